//! Hyper-kernel ridge regression (HKRR) for multi-index models.
//!
//! A predictor has the form `f(x) = Σ_j α_j k(Bx, Bx̃_j)`: a Gaussian kernel
//! ridge regression on Nyström centers `x̃_j`, composed with a learned linear map
//! `B` constrained to the unit spectral-norm ball. The map and the coefficients
//! are fitted jointly by variable projection ([`optim::varpro_fit`]) or by
//! alternating gradient descent ([`optim::agd_fit`]).
//!
//! ```no_run
//! use hkrr::prelude::*;
//!
//! let spec = GenSpec::new(Dataset::Ds1, 20, 2, 2000, 7);
//! let data = synthdata::generate(&spec).unwrap().data;
//! let (train, val, test) = synthdata::split(&data, (0.5, 0.25, 0.25), 7).unwrap();
//! let grid = CvGrid { d_values: vec![2], ..CvGrid::default() };
//! let cv = cross_validate(&train, &val, &grid, &FitConfig::default(), &CvSettings::default()).unwrap();
//! let pred = cv.model.predict(test.x()).unwrap();
//! println!("test r2 = {}", modelsel::r2(&pred, test.y()).unwrap());
//! ```

pub mod error;
pub mod kernel;
mod matrix_serde;
pub mod modelsel;
pub mod objective;
pub mod optim;
pub mod rng;
pub mod synthdata;
pub mod toy2d;

pub use error::{Error, Result};
pub use matrix_serde::{from_rows, to_rows};

pub mod prelude {
    pub use crate::error::{Error, Result};
    pub use crate::kernel::{KernelConfig, KernelFamily};
    pub use crate::modelsel::{
        self, cross_validate, fit_hkrr, CvGrid, CvResult, CvSettings, HkrrFit,
    };
    pub use crate::objective::{HkrrObjective, HkrrProblem, HyperModel, SampleSet};
    pub use crate::optim::{
        Algorithm, AlphaStep, BacktrackConfig, FitConfig, FitTrace, TwoBlockObjective,
    };
    pub use crate::synthdata::{self, Dataset, GenSpec};
    pub use crate::toy2d::{ToyObjective, ToyVariant};
}
