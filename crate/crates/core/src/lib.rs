//! Numerical laboratory for the long-time `L²` decay of cubic derivative
//! nonlinear Schrödinger equations `i u_t + ½ u_xx = N(u, u_x)` on the line.
//!
//! * [`nonlinearity`]: the cubic term, its symbol `ν(ξ)` and the
//!   dissipativity taxonomy.
//! * [`profile`]: the profile ODE `i∂_t β = (μ/t)|β|²β + ρ` and its
//!   asymptotic closed form.
//! * [`decay`]: the decay integral `S(τ)`, its two-sided bounds, predicted
//!   `L²` curves and rate fits.
//! * [`solver`]: an integrating-factor pseudospectral solver for the PDE.

pub mod decay;
pub mod nonlinearity;
pub mod ode;
pub mod profile;
pub mod quad;
pub mod solver;

pub use nonlinearity::{
    classify, CubicNonlinearity, DissipativityClass, DissipativityReport, NuPolynomial,
};
