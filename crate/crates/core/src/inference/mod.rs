//! Reduced posteriors: conditional prior completion, reduced likelihoods and
//! a random-walk sampler on the informed coordinates.

mod conditional;
mod iact;
mod mcmc;
mod posterior;

pub use conditional::{conditional_prior_gaussian, ConditionalPrior};
pub use iact::{iact, Iact, MIN_CHAIN_LEN};
pub use mcmc::{run_chains, sample_approx_posterior, ApproxPosterior, McmcConfig};
pub use posterior::{marginal_likelihood_gaussian, InnerMode, ReducedPosterior};
