//! Two-state Markov switching regression: Gaussian emissions, forward
//! filtering and backward smoothing, EM estimation, and state decoding.

mod decode;
mod em;
mod emission;
mod filter;
mod mstep;

pub use decode::{decode, per_sample_map};
pub use em::{fit_em, init_from_pretrained, EmConfig, EmFitResult};
pub use emission::{emission_loglik, EmissionLogLik};
pub use filter::{backward_smooth, expected_stay_fraction, forward_pass};
pub use mstep::{m_step_beta, m_step_sigma, Ridge, SIGMA2_FLOOR};
