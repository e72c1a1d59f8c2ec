//! Half-integer-degree Legendre functions of the second kind, Q_{n-1/2}(c),
//! which carry the lattice momentum integral
//!
//!     Q_{n-1/2}(1 + 2u) = int_0^pi cos(n q) / sqrt(4u + 2 - 2 cos q) dq .
//!
//! The argument is parameterized by u = (c-1)/2 = (m^2 + M^2)/4 and carried
//! exactly, so values stay accurate for u down to the underflow range (the
//! p -> 0 region of the outer correlator integral).
//!
//! Three routes, selected by the caller:
//!   * elliptic AGM seeds for n = 0, 1;
//!   * downward (Miller) recurrence, stable because Q decays in n;
//!   * the z -> 1 logarithmic Frobenius series, for small n*sqrt(u) where the
//!     recurrence buffer would blow up.

use crate::mpnum::{MpReal, PrecisionContext};

/// Complete elliptic integrals K(k), E(k) by the AGM, modulus k in (0, 1).
pub fn elliptic_ke(k: &MpReal, ctx: &PrecisionContext) -> (MpReal, MpReal) {
    let mut a = ctx.one();
    let mut b: MpReal = (ctx.one() - k.clone().square()).sqrt();
    let mut c = k.clone();
    let mut s: MpReal = c.clone().square() / ctx.real(2);
    let mut pow2 = ctx.one();
    let thresh = ctx.pow10(-(ctx.digits() as i32) + 2);
    let mut last: Option<MpReal> = None;
    loop {
        let ca = c.clone().abs();
        if ca <= thresh {
            break;
        }
        if let Some(l) = &last {
            // stalled at rounding noise
            if ca >= l.clone() / ctx.real(2) {
                break;
            }
        }
        last = Some(ca);
        let an: MpReal = (a.clone() + &b) / ctx.real(2);
        let bn: MpReal = (a.clone() * &b).sqrt();
        let cn: MpReal = (a.clone() - &b) / ctx.real(2);
        a = an;
        b = bn;
        c = cn;
        pow2 *= ctx.real(2);
        s += pow2.clone() * c.clone().square() / ctx.real(2);
    }
    let kk: MpReal = ctx.pi() / (ctx.real(2) * &a);
    let ee: MpReal = kk.clone() * (ctx.one() - s);
    (kk, ee)
}

/// Q_{-1/2}(c) and Q_{1/2}(c) for c = 1 + 2u, via K and E with k^2 = 1/(1+u).
pub fn q_seeds(u: &MpReal, ctx: &PrecisionContext) -> (MpReal, MpReal) {
    let c: MpReal = ctx.one() + ctx.real(2) * u;
    let k: MpReal = (ctx.one() / (ctx.one() + u)).sqrt();
    let (kk, ee) = elliptic_ke(&k, ctx);
    let qm: MpReal = k.clone() * &kk;
    let qp: MpReal = c.clone() * &k * &kk - (ctx.one() + &c) * &k * &ee;
    (qm, qp)
}

/// Q_{n-1/2}(1+2u) for all n = 0..=nmax by downward recurrence, normalized
/// against the elliptic seed.
pub fn q_miller(u: &MpReal, nmax: usize, ctx: &PrecisionContext) -> Vec<MpReal> {
    let c: MpReal = ctx.one() + ctx.real(2) * u;
    // rho = c + sqrt(c^2 - 1) computed through u to avoid cancellation
    let rho: MpReal = c.clone() + ctx.real(2) * (u.clone() * (ctx.one() + u)).sqrt();
    let ln_rho = rho.ln();
    let need: f64 = (ctx.digits() as f64 + 14.0) * std::f64::consts::LN_10;
    let extra = (need / (2.0 * ln_rho.to_f64())).ceil() as usize + 12;
    let top = nmax + extra;

    let mut out = vec![ctx.zero(); nmax + 1];
    let mut q_np1 = ctx.zero();
    let mut q_n = ctx.pow10(-(2 * ctx.digits() as i32));
    // recurrence: (n+1/2) q_{n+1} = 2 n c q_n - (n-1/2) q_{n-1}
    for n in (1..=top).rev() {
        let nf = ctx.real(n as f64);
        let q_nm1: MpReal = (ctx.real(2) * &nf * &c * &q_n
            - (nf.clone() + ctx.real(0.5)) * &q_np1)
            / (nf - ctx.real(0.5));
        q_np1 = q_n;
        q_n = q_nm1;
        if n - 1 <= nmax {
            out[n - 1] = q_n.clone();
        }
    }
    let (q0, _) = q_seeds(u, ctx);
    let scale: MpReal = q0 / &out[0];
    for v in &mut out {
        *v *= &scale;
    }
    out
}

/// psi(n + 1/2) for integer n >= 0.
fn psi_half(n: usize, ctx: &PrecisionContext) -> MpReal {
    let mut s: MpReal = -ctx.euler_gamma() - ctx.real(2) * ctx.ln2();
    for k in 1..=n {
        s += ctx.real(2) / ctx.real(2 * k as f64 - 1.0);
    }
    s
}

/// Q_{n-1/2}(1+2u) from the logarithmic series around z = 1:
///
///   Q_nu = [-gamma - psi(nu+1)] P_nu - (P_nu ln u + sum_k b_k h_k u^k) / 2,
///   P_nu(1+2u) = sum_k b_k u^k,   b_0 = 1,
///   b_{k+1}/b_k = (nu-k)(nu+1+k) / (k+1)^2 * u,
///   h_k = sum_{j=0}^{k-1} [ 1/(j-nu) + 1/(j+nu+1) - 2/(j+1) ].
///
/// Valid for u < 1 (series radius); accuracy needs guard digits growing like
/// 2 n sqrt(u) / ln 10, supplied by the caller through `ctx`.
pub fn q_frobenius(u: &MpReal, n: usize, ctx: &PrecisionContext) -> MpReal {
    let nu: MpReal = ctx.real(n as f64) - ctx.real(0.5);
    let mut b_k = ctx.one();
    let mut p = ctx.one();
    let mut s = ctx.zero();
    let mut h = ctx.zero();
    let mut k: u64 = 0;
    let cutoff = ctx.pow10(-(ctx.digits() as i32) - 8);
    loop {
        let kf = ctx.real(k as f64);
        h += ctx.one() / (kf.clone() - &nu)
            + ctx.one() / (kf.clone() + &nu + ctx.one())
            - ctx.real(2) / (kf.clone() + ctx.one());
        let ratio: MpReal =
            (nu.clone() - &kf) * (nu.clone() + ctx.one() + &kf) / (kf.clone() + ctx.one()).square();
        b_k *= ratio * u;
        k += 1;
        p += &b_k;
        s += b_k.clone() * &h;
        let scale: MpReal = b_k.clone().abs() * (ctx.one() + h.clone().abs());
        let bound: MpReal = (p.clone().abs() + ctx.one()) * &cutoff;
        if scale < bound {
            break;
        }
        if k > 2_000_000 {
            // unreachable for u < 0.4; defensive cap
            break;
        }
    }
    let const_term: MpReal = -ctx.euler_gamma() - psi_half(n, ctx);
    const_term * &p - (p * u.clone().ln() + s) / ctx.real(2)
}

/// The lattice momentum integral I_alpha(x; u):
///   alpha = -1:  Q_{x-1/2}(c)
///   alpha = +1:  2 c Q_{x-1/2}(c) - Q_{x+1/2}(c) - Q_{|x-1|-1/2}(c)
/// with c = 1 + 2u (Q is symmetric in nu -> -nu-1, so x = 0 folds back).
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum QRoute {
    Auto,
    Frobenius,
    Miller,
}

pub fn i_alpha(alpha: i32, x: usize, u: &MpReal, route: QRoute, ctx: &PrecisionContext) -> MpReal {
    debug_assert!(alpha == 1 || alpha == -1);
    let route = match route {
        QRoute::Auto => {
            let xs: f64 = 2.0 * (x as f64) * u.clone().sqrt().to_f64();
            if xs < 20.0 && u.to_f64() < 0.4 {
                QRoute::Frobenius
            } else {
                QRoute::Miller
            }
        }
        r => r,
    };
    match route {
        QRoute::Frobenius => {
            // guard digits absorb the P_nu / series cancellation ~ e^{2 x sqrt(2u)}
            let xs: f64 = 2.0 * ((x + 1) as f64) * u.clone().sqrt().to_f64().max(0.0);
            let guard = (2.0 * xs / std::f64::consts::LN_10).ceil() as u32 + 15;
            let gctx = ctx.with_guard(guard);
            let uu = gctx.real(u);
            if alpha == -1 {
                let v = q_frobenius(&uu, x, &gctx);
                ctx.real(&v)
            } else {
                let qx = q_frobenius(&uu, x, &gctx);
                let qxp = q_frobenius(&uu, x + 1, &gctx);
                let qxm = if x == 0 {
                    qxp.clone()
                } else {
                    q_frobenius(&uu, x - 1, &gctx)
                };
                let c: MpReal = gctx.one() + gctx.real(2) * &uu;
                let v: MpReal = gctx.real(2) * c * qx - qxp - qxm;
                ctx.real(&v)
            }
        }
        QRoute::Miller | QRoute::Auto => {
            let q = q_miller(u, x + 1, ctx);
            if alpha == -1 {
                q[x].clone()
            } else {
                let qxm = if x == 0 { q[1].clone() } else { q[x - 1].clone() };
                let c: MpReal = ctx.one() + ctx.real(2) * u;
                ctx.real(2) * c * &q[x] - q[x + 1].clone() - qxm
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mpnum::{integrate, PrecisionContext};

    fn heine_integral(n: usize, u: &MpReal, ctx: &PrecisionContext) -> MpReal {
        let pi = ctx.pi();
        let mut f = |q: &MpReal| {
            let w: MpReal = ctx.real(4) * u + ctx.real(2) - ctx.real(2) * q.clone().cos();
            (q.clone() * ctx.real(n as f64)).cos() / w.sqrt()
        };
        integrate(&mut f, &ctx.zero(), &pi, ctx).unwrap().value
    }

    #[test]
    fn seeds_match_heine_integral() {
        let ctx = PrecisionContext::new(50).unwrap();
        for u_str in ["0.25", "1.0", "0.004"] {
            let u = ctx.parse(u_str);
            let (q0, q1) = q_seeds(&u, &ctx);
            let d0: MpReal = (q0 - heine_integral(0, &u, &ctx)).abs();
            let d1: MpReal = (q1 - heine_integral(1, &u, &ctx)).abs();
            assert!(d0.to_f64() < 1e-38, "u={u_str} d0 {:e}", d0.to_f64());
            assert!(d1.to_f64() < 1e-38, "u={u_str} d1 {:e}", d1.to_f64());
        }
    }

    #[test]
    fn miller_matches_heine_integral_at_high_order() {
        let ctx = PrecisionContext::new(50).unwrap();
        let u = ctx.parse("0.18");
        let q = q_miller(&u, 17, &ctx);
        let expect = heine_integral(17, &u, &ctx);
        let d: MpReal = (q[17].clone() - expect).abs() / q[17].clone().abs();
        assert!(d.to_f64() < 1e-36, "rel {:e}", d.to_f64());
    }

    #[test]
    fn frobenius_agrees_with_miller_in_overlap() {
        let ctx = PrecisionContext::new(60).unwrap();
        for (u_str, n) in [("0.01", 3usize), ("0.0004", 40), ("0.09", 12)] {
            let u = ctx.parse(u_str);
            let mil = q_miller(&u, n, &ctx)[n].clone();
            let fro = i_alpha(-1, n, &u, QRoute::Frobenius, &ctx);
            let rel: MpReal = (fro - &mil).abs() / mil.abs();
            assert!(rel.to_f64() < 1e-45, "u={u_str} n={n} rel {:e}", rel.to_f64());
        }
    }

    #[test]
    fn tiny_argument_no_absorption() {
        // u = 1e-60 must not be absorbed into c = 1; the log scale must show
        let ctx = PrecisionContext::new(50).unwrap();
        let u = ctx.parse("1e-60");
        let v = i_alpha(-1, 0, &u, QRoute::Frobenius, &ctx);
        // Q_{-1/2}(1+2u) ~ -(1/2) ln u - gamma - psi(1/2) = -(1/2)ln u - gamma + gamma + 2 ln 2
        let expect: MpReal = -u.clone().ln() / ctx.real(2) + ctx.real(2) * ctx.ln2();
        let rel: MpReal = (v - &expect).abs() / expect.abs();
        assert!(rel.to_f64() < 1e-30, "rel {:e}", rel.to_f64());
    }

    #[test]
    fn pipi_combination_matches_direct_integral() {
        let ctx = PrecisionContext::new(50).unwrap();
        let u = ctx.parse("0.07");
        for x in [0usize, 1, 6] {
            let v = i_alpha(1, x, &u, QRoute::Auto, &ctx);
            let pi = ctx.pi();
            let mut f = |q: &MpReal| {
                let w: MpReal = ctx.real(4) * &u + ctx.real(2) - ctx.real(2) * q.clone().cos();
                (q.clone() * ctx.real(x as f64)).cos() * w.sqrt()
            };
            let direct = integrate(&mut f, &ctx.zero(), &pi, &ctx).unwrap().value;
            let rel: MpReal = (v - &direct).abs() / direct.abs();
            assert!(rel.to_f64() < 1e-35, "x={x} rel {:e}", rel.to_f64());
        }
    }
}
