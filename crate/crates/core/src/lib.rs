//! Numerical laboratory for scalar non-autonomous reaction-diffusion equations
//!
//! `u_t = u_xx + (γ0 + a(t)) u + g(u)` on `(0, π)`, with `g` vanishing on the
//! linear zone `|u| <= r0` and strongly dissipative outside it. The crate
//! integrates the semiflow spectrally (exact integrating factor for the linear
//! part), computes the pullback attractor boundary `b(p)` and the scalar
//! principal cocycle, and provides the finite-horizon diagnostics used to tell
//! forwards, pinched and Li-Yorke regimes apart.

// `!(x > 0.0)` is deliberate: it also rejects NaN
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod attractor;
pub mod cocycle;
pub mod driving;
pub mod dynamics;
pub mod error;
pub mod numeric;
pub mod par;
pub mod spatial;

pub use error::{Error, Result};
