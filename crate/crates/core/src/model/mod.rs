//! Closed-form mathematics shared by the finite-difference benchmark and the learner.

mod coefficients;
mod entropy;
mod parametric;
mod quadratic;
mod surface;
mod weight;

pub use coefficients::{boundary_targets, coefficients, CoefficientBundle};
pub use entropy::{
    entropy_reward, entropy_reward_sensitivity, f_lambda, f_lambda_prime, f_lambda_second, gibbs_cdf,
    gibbs_density, sample_action, BRANCH_TOL,
};
pub use parametric::{
    basis_len, basis_values, component_g_with_grad, parametric_g, parametric_w, ComponentKappa, ParamModel, ThetaParams, GAMMA_LEN,
};
pub use quadratic::{kappa_from_quadratic, kappa_sensitivity};
pub use surface::{value_surface, SurfaceTerms};
pub use weight::{LogWeightShape, WeightGrid};
