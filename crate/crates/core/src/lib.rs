//! Computational laboratory for Henstock-Kurzweil integration, the
//! Kuelbs-Steadman space KS², Mercer kernels with their RKHS, and covering
//! numbers of the embedding of an RKHS into KS².
//!
//! Modules build on each other bottom-up:
//!
//! * [`hk`]: gauge-Riemann, Hake-limit and series-exact integration.
//! * [`cube_system`]: the weighted cube family, its functionals `F_k` and the measure `mu`.
//! * [`ks2`]: the KS² inner product, Gram matrices, an orthonormal basis and expansions.
//! * [`operators`]: kernels as coefficient matrices and the integral operator they induce.
//! * [`mercer`]: eigendecomposition, Mercer reconstruction and the RKHS.
//! * [`covering`]: upper and lower covering-number bounds and empirical oracles.

pub mod covering;
pub mod cube_system;
pub mod exact;
pub mod hk;
pub mod ks2;
pub mod mercer;
pub mod operators;
