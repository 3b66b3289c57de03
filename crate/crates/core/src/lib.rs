//! Tail calculus for multivariate regular variation on coordinate subcones.

pub mod cli;
pub mod error;
pub mod convolution;
pub mod levy;
pub mod measures;
pub mod montecarlo;
pub mod oracle;
pub mod random_sum;
pub mod regvar;
pub mod samplers;
pub mod spectrum;

pub use error::{Error, Result};
pub use measures::TailMeasure;
pub use regvar::{LimitClass, PowerFn, RectSet};
pub use spectrum::{MRVSpectrum, SpectrumEntry};
