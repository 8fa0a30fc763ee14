//! Frequency-domain preprocessing, the hand-crafted global descriptor and
//! image-quality signals.

mod descriptor;
mod freq;
mod quality;

pub use descriptor::{describe, Describer, Descriptor, DescriptorConfig};
pub use freq::{centered_magnitude, fft2d, spat2freq, FreqImage};
pub use quality::{composite_quality, laplacian, sharpness, QualitySignals, QualityStats, RunningStats};
