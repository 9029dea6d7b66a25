//! Rate-equation VCSEL: static light-current-voltage model, large-signal
//! integration and the two-pole small-signal response.

mod dynamics;
mod params;
mod small_signal;
mod static_model;

pub use dynamics::{initial_state, integrate, integrate_with, IntegrateOptions, ThermalMode, VcselState};
pub use params::{profile, profiles, VcselParams, C, H, Q};
pub use small_signal::{numeric_s21, s21, small_signal, PerturbationOptions, S21Curve, SmallSignal};
pub use static_model::{
    figures_of_merit, junction_temperature, operating_point, static_iv, FiguresOfMerit, OperatingPoint, StaticCurve,
};

/// Celsius to kelvin.
pub fn celsius(t_c: f64) -> f64 {
    t_c + 273.15
}
