//! Extended-precision scalar arithmetic, quadrature, special functions, and
//! dense symmetric linear algebra. Everything downstream builds on this layer.
//!
//! Scalars are MPFR floats (via `rug`) at a working precision derived from the
//! requested decimal digits plus guard bits. All operations are pure functions
//! of their inputs; `PrecisionContext` is immutable after creation.

mod hyp;
mod linalg;
mod quad;

pub use hyp::hyp3f2_reg;
pub use linalg::{cholesky, sym_eigen, MpMatrix};
pub use quad::{gauss_legendre as gauss_legendre_nodes, integrate, integrate_with_mode, EndpointMode, QuadResult};

use rug::float::Constant;
use rug::ops::Pow;
use rug::Float;
use std::fmt;

/// Extended-precision real scalar.
pub type MpReal = Float;

/// Errors surfaced by the numeric layer.
#[derive(Debug, thiserror::Error)]
pub enum MpError {
    #[error("quadrature did not converge within the refinement budget (err estimate {err_estimate})")]
    NonConvergence { err_estimate: f64 },
    #[error("hypergeometric series diverges for these parameters (z = {z})")]
    DivergentSeries { z: f64 },
    #[error("matrix is not positive definite (pivot {pivot} at index {index})")]
    NotPositiveDefinite { index: usize, pivot: f64 },
    #[error("eigensolver did not converge within the sweep budget ({sweeps} sweeps)")]
    EigenNonConvergence { sweeps: usize },
    #[error("invalid precision context: {0}")]
    InvalidContext(String),
}

pub type MpResult<T> = Result<T, MpError>;

/// Working-precision handle threaded through all numerics.
///
/// `digits` is the decimal working precision; tolerances may not demand more
/// than the precision delivers (both are clamped to `>= 10^(10-digits)`).
#[derive(Clone, Debug)]
pub struct PrecisionContext {
    digits: u32,
    prec_bits: u32,
    eig_tol: f64,
    quad_tol: f64,
}

impl PrecisionContext {
    /// The default working precision used throughout the artifact.
    pub const DEFAULT_DIGITS: u32 = 80;

    pub fn new(digits: u32) -> MpResult<Self> {
        let eig = floor_tol(digits, 10.0_f64.powi(-(digits as i32) + 10));
        let quad = eig;
        Self::with_tols(digits, eig, quad)
    }

    pub fn with_tols(digits: u32, eig_tol: f64, quad_tol: f64) -> MpResult<Self> {
        if digits < 30 {
            return Err(MpError::InvalidContext(format!(
                "digits = {digits}, but below 30 the spectrum near 1/4 is numerically meaningless"
            )));
        }
        if digits > 280 {
            // f64 tolerance representation bottoms out near 1e-300
            return Err(MpError::InvalidContext(format!(
                "digits = {digits} exceeds the supported maximum of 280"
            )));
        }
        let min_tol = 10.0_f64.powi(-(digits as i32) + 10);
        if eig_tol < min_tol || quad_tol < min_tol {
            return Err(MpError::InvalidContext(format!(
                "tolerances ({eig_tol:e}, {quad_tol:e}) demand more than {digits} digits deliver (min {min_tol:e})"
            )));
        }
        // log2(10) = 3.3219...; 48 guard bits absorb rounding in long reductions
        let prec_bits = (digits as f64 * 3.321928094887362).ceil() as u32 + 48;
        Ok(Self {
            digits,
            prec_bits,
            eig_tol,
            quad_tol,
        })
    }

    /// Context at twice the digits, used by the automatic precision retry.
    pub fn doubled(&self) -> Self {
        Self::new(self.digits * 2).expect("doubled precision context")
    }

    pub fn digits(&self) -> u32 {
        self.digits
    }

    pub fn prec_bits(&self) -> u32 {
        self.prec_bits
    }

    pub fn eig_tol(&self) -> f64 {
        self.eig_tol
    }

    pub fn quad_tol(&self) -> f64 {
        self.quad_tol
    }

    // ---- scalar constructors ----

    pub fn real<T>(&self, v: T) -> MpReal
    where
        Float: rug::Assign<T>,
    {
        Float::with_val(self.prec_bits, v)
    }

    pub fn zero(&self) -> MpReal {
        Float::new(self.prec_bits)
    }

    pub fn one(&self) -> MpReal {
        self.real(1)
    }

    pub fn pi(&self) -> MpReal {
        Float::with_val(self.prec_bits, Constant::Pi)
    }

    pub fn euler_gamma(&self) -> MpReal {
        Float::with_val(self.prec_bits, Constant::Euler)
    }

    pub fn ln2(&self) -> MpReal {
        Float::with_val(self.prec_bits, Constant::Log2)
    }

    /// 10^e at working precision.
    pub fn pow10(&self, e: i32) -> MpReal {
        self.real(10).pow(e)
    }

    /// Parse a decimal string at working precision.
    pub fn parse(&self, s: &str) -> MpReal {
        Float::with_val(
            self.prec_bits,
            Float::parse(s).unwrap_or_else(|_| panic!("unparseable decimal: {s}")),
        )
    }

    /// Render with digits-derived precision; deterministic across platforms.
    pub fn to_decimal(&self, v: &MpReal) -> String {
        v.to_string_radix(10, Some(self.digits as usize + 8))
    }

    /// Same context with more guard digits (for internally cancellative steps).
    pub fn with_guard(&self, extra_digits: u32) -> Self {
        let digits = self.digits + extra_digits;
        let prec_bits = (digits as f64 * 3.321928094887362).ceil() as u32 + 48;
        Self {
            digits,
            prec_bits,
            eig_tol: self.eig_tol,
            quad_tol: self.quad_tol,
        }
    }
}

fn floor_tol(digits: u32, t: f64) -> f64 {
    let min_tol = 10.0_f64.powi(-(digits as i32) + 10);
    t.max(min_tol)
}

impl fmt::Display for PrecisionContext {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "PrecisionContext(digits={}, bits={}, eig_tol={:e}, quad_tol={:e})",
            self.digits, self.prec_bits, self.eig_tol, self.quad_tol
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn context_rejects_low_digits() {
        assert!(PrecisionContext::new(29).is_err());
        assert!(PrecisionContext::new(30).is_ok());
    }

    #[test]
    fn context_rejects_overtight_tolerance() {
        // cannot demand more than the working precision delivers
        assert!(PrecisionContext::with_tols(40, 1e-35, 1e-35).is_err());
        assert!(PrecisionContext::with_tols(40, 1e-30, 1e-30).is_ok());
    }

    #[test]
    fn constants_have_working_precision() {
        let ctx = PrecisionContext::new(80).unwrap();
        let pi = ctx.pi();
        assert!(pi.prec() >= 280);
        let s = ctx.to_decimal(&pi);
        assert!(s.starts_with("3.14159265358979323846264338327950288419716939937510582097494459230781640628"));
    }
}
