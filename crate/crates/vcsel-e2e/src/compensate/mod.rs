//! Receiver-side equalisation and transmitter-side digital predistortion.

mod dpd;
mod equalizer;
pub(crate) mod record;

pub use dpd::{apply_dpd, residual, train_dpd_dla, train_dpd_ila, DpdConfig, DpdTarget, Predistorter, Transmitter};
pub use equalizer::{
    integrate_dump, linear_ffe_baseline, prune_equalizer, train_equalizer, validation_loss, EqualizerConfig,
    IntegrateDump, LinearFfe, NnEqualizer, PruneConfig, PruneReport, Slicer,
};
pub use record::{detect_chunk, detect_chunk_ser, Detector, SymbolRecord, WindowSampler};
