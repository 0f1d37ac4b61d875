//! Numerical laboratory for blow-up of small-data solutions of
//! `u_tt - u_xx = A(x,t)|u_t|^p|u|^q + B(x,t)|u|^r` in one space dimension.
//!
//! - [`model`]: problem descriptions and pointwise evaluation.
//! - [`dalembert`]: free waves and the Duhamel operators `L`, `L'`.
//! - [`picard`]: the weighted-norm fixed-point iteration for `(u - εu⁰, u_t - εu⁰_t)`.
//! - [`solver`]: characteristic-grid integrator and lifespan estimation.
//! - [`functional`]: the moment functional `F(t) = ∫u dx` and its ODE comparison.
//! - [`regimes`]: the atlas of lifespan scaling laws.
//! - [`sweep`]: ε-sweeps, scaling-law fits and persistence.

pub mod dalembert;
pub mod functional;
pub mod model;
pub mod picard;
pub mod regimes;
pub mod solver;
pub mod sweep;
