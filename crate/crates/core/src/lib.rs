//! Large-stepsize gradient descent on two-layer near-homogeneous networks.
//!
//! The crate trains f(W; x) = (b/m) Σ_j a_j φ(x·w_j) on logistic loss with
//! constant-stepsize GD, records the quantities that the stability and
//! margin bounds speak about, and checks those bounds on the recorded
//! trajectory.
//!
//! ```
//! use eoslab::prelude::*;
//!
//! let act = parse_activation("leaky_softplus(c=0.5)").unwrap();
//! let data = xor_dataset(true);
//! let net = TwoLayerNet::init(act.clone(), 20, 2, 1.0, &InitSpec::default()).unwrap();
//! let cert = certify(&act, -30.0, 30.0, 10_001).unwrap();
//! let constants = TheoryConstants::from_certified(&cert, &Setup {
//!     n: data.len(), m: 20, d: 2, b: 1.0, eta: 5.0, w0_norm: net.weight_norm(), gamma: None,
//! });
//! let run = run_gd(net, &data, &GdConfig::new(Stepsize::PerNeuron(5.0), 200), &constants).unwrap();
//! assert!(run.final_record().loss < run.records[0].loss);
//! ```

// `!(x > 0.0)` is used throughout so that NaN fails the check.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod activation;
pub mod data;
pub mod error;
pub mod experiment;
pub mod margins;
pub mod network;
pub mod numeric;
pub mod objective;
pub mod theory;
pub mod trainer;
pub mod trajectory;

pub use error::{Error, Result};

pub mod prelude {
    pub use crate::activation::{certify, certify_default, make_activation, parse_activation, Activation, CertifiedConstants};
    pub use crate::data::{load_csv, synthetic_separable, two_point_lower_bound, xor_dataset, Dataset, Separator};
    pub use crate::margins::MarginSet;
    pub use crate::network::{InitKind, InitSpec, SignPattern, TwoLayerNet};
    pub use crate::objective::{risk, ObjectiveSnapshot};
    pub use crate::theory::{Setup, TheoryConstants};
    pub use crate::trainer::{detect_phases, run_gd, verify_stable_phase, Cadence, GdConfig, GdRun, Stepsize};
    pub use crate::trajectory::TrajectoryRecord;
}
