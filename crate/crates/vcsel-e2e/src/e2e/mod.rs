//! Autoencoder transceivers trained through a differentiable link, and
//! gradient-free receiver training by differential evolution.

mod ae;
mod de;
mod link;
mod receiver;

pub use ae::{
    ae_train, ber_vs_snr, condition_on_temperature, decide, equidistant_baseline, equidistant_levels, ser_vs_snr,
    AeConfig, AeDecoder, LinkReference, Normalization, TrainChannel, Transceiver, Transmitter,
};
pub use de::{differential_evolution, DeConfig, DeResult};
pub use link::{Channel, IdentityLink, PhysicalLink, SurrogateLink};
pub use receiver::{backprop_train, de_train, theoretical_ser, ReceiverConfig, TrainableReceiver};
