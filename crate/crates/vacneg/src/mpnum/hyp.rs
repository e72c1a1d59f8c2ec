//! Regularized generalized hypergeometric series 3F~2.

use super::{MpError, MpReal, MpResult, PrecisionContext};

fn as_nonpositive_int(v: &MpReal) -> Option<i64> {
    if v.is_integer() && *v <= 0 {
        v.to_integer().and_then(|z| z.to_i64())
    } else {
        None
    }
}

/// Regularized 3F2: sum_k (a1)_k (a2)_k (a3)_k z^k / (Gamma(b1+k) Gamma(b2+k) k!).
///
/// A nonpositive-integer lower parameter is allowed: the 1/Gamma factors kill
/// every term before the first surviving index, so summation starts there.
/// Convergence inside |z| < 1; at z = 1 requires sum(b) - sum(a) > 0.
pub fn hyp3f2_reg(
    a: [&MpReal; 3],
    b: [&MpReal; 2],
    z: &MpReal,
    ctx: &PrecisionContext,
) -> MpResult<MpReal> {
    if *z > 1 || *z < -1 {
        return Err(MpError::DivergentSeries { z: z.to_f64() });
    }
    if *z == 1 {
        let balance: MpReal =
            b[0].clone() + b[1] - a[0].clone() - a[1].clone() - a[2].clone();
        if balance <= 0 {
            return Err(MpError::DivergentSeries { z: 1.0 });
        }
    }

    // first surviving index
    let mut k0: i64 = 0;
    for bi in b {
        if let Some(m) = as_nonpositive_int(bi) {
            k0 = k0.max(1 - m);
        }
    }

    // leading term at k0
    let mut term = ctx.one();
    for ai in a {
        // (ai)_{k0}
        for j in 0..k0 {
            term *= (*ai).clone() + ctx.real(j as i32 as f64);
        }
        if term == 0 {
            // series truncates immediately: an upper parameter hit zero first
            break;
        }
    }
    if term != 0 {
        for j in 0..k0 {
            term *= z;
            term /= ctx.real((j + 1) as f64); // k0! built alongside z^k0
        }
        for bi in b {
            let g = ((*bi).clone() + ctx.real(k0 as f64)).gamma();
            term /= g;
        }
    } else {
        // recompute cleanly: term is exactly zero and the sum below handles
        // truncation through the recurrence producing zeros
        term = ctx.zero();
    }

    let mut sum = term.clone();
    let mut k = k0;
    let cutoff = ctx.pow10(-(ctx.digits() as i32) - 5);
    let mut quiet = 0u32;
    let max_terms: i64 = 600 * ctx.digits() as i64 + 4 * k0;

    // handle truncating series (an upper parameter is a nonpositive integer)
    let trunc_at: Option<i64> = a
        .iter()
        .filter_map(|ai| as_nonpositive_int(ai))
        .map(|m| -m)
        .min();

    loop {
        if let Some(t) = trunc_at {
            if k > t {
                break;
            }
        }
        // ratio t_{k+1} / t_k
        let kf = ctx.real(k as f64);
        let mut num = z.clone();
        for ai in a {
            num *= (*ai).clone() + &kf;
        }
        let mut den = kf.clone() + ctx.one();
        for bi in b {
            den *= (*bi).clone() + &kf;
        }
        if den == 0 {
            // a lower parameter crossing zero past k0 cannot happen for k>=k0
            return Err(MpError::DivergentSeries { z: z.to_f64() });
        }
        term *= num / den;
        sum += &term;
        k += 1;

        let small = term.clone().abs() <= sum.clone().abs().max(&ctx.one()) * cutoff.clone();
        if small {
            quiet += 1;
            // 20 consecutive negligible terms guard against slow z->1 tails
            if quiet >= 20 {
                break;
            }
        } else {
            quiet = 0;
        }
        if k - k0 > max_terms {
            return Err(MpError::NonConvergence {
                err_estimate: term.to_f64(),
            });
        }
    }
    Ok(sum)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ctx() -> PrecisionContext {
        PrecisionContext::new(60).unwrap()
    }

    #[test]
    fn truncates_at_k0_when_upper_parameter_zero() {
        // any a_i = 0, b = (2, 3) -> 1/(Gamma(2) Gamma(3)) = 1/2
        let ctx = ctx();
        let zero = ctx.zero();
        let half = ctx.real(0.5);
        let one = ctx.one();
        let b1 = ctx.real(2);
        let b2 = ctx.real(3);
        let z = ctx.real(0.7);
        let v = hyp3f2_reg([&zero, &half, &one], [&b1, &b2], &z, &ctx).unwrap();
        let diff: MpReal = v - ctx.real(0.5);
        assert!(diff.abs().to_f64() < 1e-55);
    }

    #[test]
    fn unit_at_z_zero() {
        let ctx = ctx();
        let a1 = ctx.real(0.25);
        let a2 = ctx.real(1.5);
        let a3 = ctx.real(2);
        let one = ctx.one();
        let z = ctx.zero();
        let v = hyp3f2_reg([&a1, &a2, &a3], [&one, &one], &z, &ctx).unwrap();
        let diff: MpReal = v - ctx.one();
        assert!(diff.abs().to_f64() < 1e-55);
    }

    #[test]
    fn regularized_value_at_z09_matches_independent_summation() {
        // a = (-1/2, 1/2, 1), b = (1-4, 1+4), z = 0.9; frozen from a direct
        // 10^4-term high-precision summation oracle
        let ctx = ctx();
        let a1 = ctx.real(-0.5);
        let a2 = ctx.real(0.5);
        let a3 = ctx.one();
        let b1 = ctx.real(-3);
        let b2 = ctx.real(5);
        let z = ctx.parse("0.9");
        let v = hyp3f2_reg([&a1, &a2, &a3], [&b1, &b2], &z, &ctx).unwrap();
        let expect = ctx.parse("-0.0016854262288625127263387360458631181");
        let diff: MpReal = v - expect;
        assert!(diff.abs().to_f64() < 1e-34);
    }

    #[test]
    fn shift_identity_for_nonpositive_b1() {
        // with b1 = 1-x the regularized series equals the same series summed
        // independently starting at k = x, for x in 1..=10
        let ctx = ctx();
        for x in 1..=10i64 {
            let a = [ctx.real(-0.5), ctx.real(0.5), ctx.one()];
            let b1 = ctx.real(1 - x as i32);
            let b2 = ctx.real(1 + x as i32);
            let z = ctx.parse("0.55");
            let v = hyp3f2_reg([&a[0], &a[1], &a[2]], [&b1, &b2], &z, &ctx).unwrap();

            // independent: term-by-term from k = x with explicit factorials
            let mut term = ctx.one();
            for ai in &a {
                for j in 0..x {
                    term *= ai.clone() + ctx.real(j as f64);
                }
            }
            let mut zk = ctx.one();
            for _ in 0..x {
                zk *= &z;
            }
            term *= zk;
            // Gamma(b1+x) = Gamma(1) = 1, Gamma(b2+x) = (2x)!; k0! = x!
            let mut gam = ctx.one();
            for j in 1..(2 * x + 1) {
                if j <= 2 * x {
                    gam *= ctx.real(j as f64);
                }
            }
            let mut fact = ctx.one();
            for j in 1..=x {
                fact *= ctx.real(j as f64);
            }
            term /= gam.clone() / ctx.one(); // Gamma(2x+1) = (2x)!
            term /= fact;
            let mut sum = term.clone();
            for k in x..(x + 200) {
                let kf = ctx.real(k as f64);
                let mut num = z.clone();
                for ai in &a {
                    num *= ai.clone() + &kf;
                }
                let mut den = kf.clone() + ctx.one();
                den *= b1.clone() + &kf;
                den *= b2.clone() + &kf;
                term *= num / den;
                sum += &term;
            }
            let diff: MpReal = (v - &sum).abs() / sum.clone().abs();
            assert!(diff.to_f64() < 1e-40, "x={x} diff {:e}", diff.to_f64());
        }
    }

    #[test]
    fn divergence_flagged_at_unit_argument() {
        // z = 1 with zero balance (phi-phi case) must be refused
        let ctx = ctx();
        let a1 = ctx.real(0.5);
        let a2 = ctx.real(0.5);
        let a3 = ctx.one();
        let b1 = ctx.real(-3);
        let b2 = ctx.real(5);
        let z = ctx.one();
        match hyp3f2_reg([&a1, &a2, &a3], [&b1, &b2], &z, &ctx) {
            Err(MpError::DivergentSeries { .. }) => {}
            other => panic!("expected DivergentSeries, got {other:?}"),
        }
    }
}
