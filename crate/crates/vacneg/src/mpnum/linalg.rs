//! Dense symmetric linear algebra at extended precision: Cholesky and a
//! cyclic two-sided Jacobi eigensolver. Small dense matrices only; the point
//! is relative accuracy, not BLAS throughput.

use super::{MpError, MpReal, MpResult, PrecisionContext};

/// Dense matrix of extended-precision reals, row-major.
#[derive(Clone, Debug)]
pub struct MpMatrix {
    n_rows: usize,
    n_cols: usize,
    entries: Vec<MpReal>,
}

impl MpMatrix {
    pub fn zeros(ctx: &PrecisionContext, n_rows: usize, n_cols: usize) -> Self {
        assert!(n_rows > 0 && n_cols > 0, "matrix dimensions must be positive");
        Self {
            n_rows,
            n_cols,
            entries: vec![ctx.zero(); n_rows * n_cols],
        }
    }

    pub fn identity(ctx: &PrecisionContext, n: usize) -> Self {
        let mut m = Self::zeros(ctx, n, n);
        for i in 0..n {
            *m.at_mut(i, i) = ctx.one();
        }
        m
    }

    /// Build a symmetric matrix from a generator called only on i <= j; the
    /// lower triangle mirrors the upper exactly (never symmetrized after).
    pub fn symmetric_from(ctx: &PrecisionContext, n: usize, mut f: impl FnMut(usize, usize) -> MpReal) -> Self {
        let mut m = Self::zeros(ctx, n, n);
        for i in 0..n {
            for j in i..n {
                let v = f(i, j);
                *m.at_mut(j, i) = v.clone();
                *m.at_mut(i, j) = v;
            }
        }
        m
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn n_cols(&self) -> usize {
        self.n_cols
    }

    #[inline]
    pub fn at(&self, i: usize, j: usize) -> &MpReal {
        &self.entries[i * self.n_cols + j]
    }

    #[inline]
    pub fn at_mut(&mut self, i: usize, j: usize) -> &mut MpReal {
        &mut self.entries[i * self.n_cols + j]
    }

    pub fn is_symmetric_exact(&self) -> bool {
        if self.n_rows != self.n_cols {
            return false;
        }
        for i in 0..self.n_rows {
            for j in (i + 1)..self.n_cols {
                if self.at(i, j) != self.at(j, i) {
                    return false;
                }
            }
        }
        true
    }

    pub fn transpose(&self, ctx: &PrecisionContext) -> Self {
        let mut t = Self::zeros(ctx, self.n_cols, self.n_rows);
        for i in 0..self.n_rows {
            for j in 0..self.n_cols {
                *t.at_mut(j, i) = self.at(i, j).clone();
            }
        }
        t
    }

    pub fn mul(&self, other: &MpMatrix, ctx: &PrecisionContext) -> MpMatrix {
        assert_eq!(self.n_cols, other.n_rows);
        let mut out = Self::zeros(ctx, self.n_rows, other.n_cols);
        for i in 0..self.n_rows {
            for j in 0..other.n_cols {
                let mut acc = ctx.zero();
                for k in 0..self.n_cols {
                    acc += self.at(i, k).clone() * other.at(k, j);
                }
                *out.at_mut(i, j) = acc;
            }
        }
        out
    }

    /// Frobenius norm.
    pub fn frob_norm(&self, ctx: &PrecisionContext) -> MpReal {
        let mut acc = ctx.zero();
        for e in &self.entries {
            acc += e.clone().square();
        }
        acc.sqrt()
    }

    pub fn trace(&self, ctx: &PrecisionContext) -> MpReal {
        let mut acc = ctx.zero();
        for i in 0..self.n_rows.min(self.n_cols) {
            acc += self.at(i, i);
        }
        acc
    }
}

/// Cholesky factorization S = L L^T of a symmetric positive definite matrix.
pub fn cholesky(s: &MpMatrix, ctx: &PrecisionContext) -> MpResult<MpMatrix> {
    let n = s.n_rows();
    assert_eq!(n, s.n_cols(), "cholesky needs a square matrix");
    let mut l = MpMatrix::zeros(ctx, n, n);
    for j in 0..n {
        let mut d = s.at(j, j).clone();
        for k in 0..j {
            d -= l.at(j, k).clone().square();
        }
        if d <= 0 {
            return Err(MpError::NotPositiveDefinite {
                index: j,
                pivot: d.to_f64(),
            });
        }
        let djj = d.sqrt();
        *l.at_mut(j, j) = djj.clone();
        for i in (j + 1)..n {
            let mut v = s.at(i, j).clone();
            for k in 0..j {
                v -= l.at(i, k).clone() * l.at(j, k);
            }
            v /= &djj;
            *l.at_mut(i, j) = v;
        }
    }
    Ok(l)
}

/// Eigenvalues (ascending) and optional orthonormal eigenvector columns of a
/// symmetric matrix, by cyclic two-sided Jacobi rotations.
pub fn sym_eigen(
    s: &MpMatrix,
    ctx: &PrecisionContext,
    want_vectors: bool,
) -> MpResult<(Vec<MpReal>, Option<MpMatrix>)> {
    let n = s.n_rows();
    assert_eq!(n, s.n_cols(), "sym_eigen needs a square matrix");
    let mut a = s.clone();
    let mut v = if want_vectors {
        Some(MpMatrix::identity(ctx, n))
    } else {
        None
    };
    if n == 1 {
        let lam = vec![a.at(0, 0).clone()];
        return Ok((lam, v));
    }

    let norm = a.frob_norm(ctx);
    let tol = ctx.real(ctx.eig_tol());
    let stop: MpReal = norm.clone() * &tol;
    // rotations below this threshold are skipped within a sweep
    let max_sweeps = 6 + (ctx.digits() as usize) / 2;

    for sweep in 0..max_sweeps {
        let mut off = ctx.zero();
        for p in 0..n {
            for q in (p + 1)..n {
                off += a.at(p, q).clone().square();
            }
        }
        let off = off.sqrt() * ctx.real(2).sqrt();
        if off <= stop {
            let (lam, vecs) = collect_sorted(a, v, ctx, n);
            return Ok((lam, vecs));
        }
        let _ = sweep;
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = a.at(p, q).clone();
                if apq == 0 {
                    continue;
                }
                // skip once negligible relative to the final threshold
                let small: MpReal = apq.clone().abs() * ctx.real(n as u32 * 2);
                if small <= stop {
                    continue;
                }
                let app = a.at(p, p).clone();
                let aqq = a.at(q, q).clone();
                // tan(theta) from the stable formulation
                let theta: MpReal = (aqq - &app) / (ctx.real(2) * &apq);
                let t = {
                    let mut denom = theta.clone().abs() + (theta.clone().square() + ctx.one()).sqrt();
                    if theta < 0 {
                        denom = -denom;
                    }
                    ctx.one() / denom
                };
                let c = ctx.one() / (t.clone().square() + ctx.one()).sqrt();
                let s_ = t.clone() * &c;

                // update rows/cols p and q
                for k in 0..n {
                    if k != p && k != q {
                        let akp = a.at(k, p).clone();
                        let akq = a.at(k, q).clone();
                        let new_kp = c.clone() * &akp - s_.clone() * &akq;
                        let new_kq = s_.clone() * &akp + c.clone() * &akq;
                        *a.at_mut(k, p) = new_kp.clone();
                        *a.at_mut(p, k) = new_kp;
                        *a.at_mut(k, q) = new_kq.clone();
                        *a.at_mut(q, k) = new_kq;
                    }
                }
                let tapq: MpReal = t.clone() * &apq;
                *a.at_mut(p, p) = app - &tapq;
                *a.at_mut(q, q) = aqq + &tapq;
                *a.at_mut(p, q) = ctx.zero();
                *a.at_mut(q, p) = ctx.zero();

                if let Some(vm) = v.as_mut() {
                    for k in 0..n {
                        let vkp = vm.at(k, p).clone();
                        let vkq = vm.at(k, q).clone();
                        *vm.at_mut(k, p) = c.clone() * &vkp - s_.clone() * &vkq;
                        *vm.at_mut(k, q) = s_.clone() * &vkp + c.clone() * &vkq;
                    }
                }
            }
        }
    }

    // final convergence check after the last sweep
    let mut off = ctx.zero();
    for p in 0..n {
        for q in (p + 1)..n {
            off += a.at(p, q).clone().square();
        }
    }
    if off.sqrt() * ctx.real(2).sqrt() <= stop {
        let (lam, vecs) = collect_sorted(a, v, ctx, n);
        return Ok((lam, vecs));
    }
    Err(MpError::EigenNonConvergence { sweeps: max_sweeps })
}

fn collect_sorted(
    a: MpMatrix,
    v: Option<MpMatrix>,
    ctx: &PrecisionContext,
    n: usize,
) -> (Vec<MpReal>, Option<MpMatrix>) {
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| a.at(i, i).partial_cmp(a.at(j, j)).unwrap());
    let lam: Vec<MpReal> = order.iter().map(|&i| a.at(i, i).clone()).collect();
    let vecs = v.map(|vm| {
        let mut out = MpMatrix::zeros(ctx, n, n);
        for (newc, &oldc) in order.iter().enumerate() {
            for r in 0..n {
                *out.at_mut(r, newc) = vm.at(r, oldc).clone();
            }
        }
        out
    });
    (lam, vecs)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mpnum::PrecisionContext;

    fn ctx() -> PrecisionContext {
        PrecisionContext::new(60).unwrap()
    }

    #[test]
    fn cholesky_identity() {
        let ctx = ctx();
        let id = MpMatrix::identity(&ctx, 4);
        let l = cholesky(&id, &ctx).unwrap();
        for i in 0..4 {
            for j in 0..4 {
                let expect = if i == j { 1.0 } else { 0.0 };
                assert!((l.at(i, j).to_f64() - expect).abs() < 1e-50);
            }
        }
    }

    #[test]
    fn cholesky_hand_case() {
        // [[4,2],[2,3]] -> [[2,0],[1,sqrt(2)]]
        let ctx = ctx();
        let vals = [[4.0, 2.0], [2.0, 3.0]];
        let s = MpMatrix::symmetric_from(&ctx, 2, |i, j| ctx.real(vals[i][j]));
        let l = cholesky(&s, &ctx).unwrap();
        assert!((l.at(0, 0).to_f64() - 2.0).abs() < 1e-50);
        assert!((l.at(1, 0).to_f64() - 1.0).abs() < 1e-50);
        let sqrt2 = ctx.real(2).sqrt();
        let diff: MpReal = l.at(1, 1).clone() - sqrt2;
        assert!(diff.abs().to_f64() < 1e-55);
        assert_eq!(l.at(0, 1).to_f64(), 0.0);
    }

    #[test]
    fn cholesky_rejects_indefinite() {
        let ctx = ctx();
        let vals = [[1.0, 2.0], [2.0, 1.0]];
        let s = MpMatrix::symmetric_from(&ctx, 2, |i, j| ctx.real(vals[i][j]));
        match cholesky(&s, &ctx) {
            Err(MpError::NotPositiveDefinite { index, .. }) => assert_eq!(index, 1),
            other => panic!("expected NotPositiveDefinite, got {other:?}"),
        }
    }

    #[test]
    fn eigen_diagonal() {
        let ctx = ctx();
        let s = MpMatrix::symmetric_from(&ctx, 3, |i, j| {
            if i == j {
                ctx.real(i as u32 + 1)
            } else {
                ctx.zero()
            }
        });
        let (lam, _) = sym_eigen(&s, &ctx, false).unwrap();
        for (k, l) in lam.iter().enumerate() {
            assert!((l.to_f64() - (k as f64 + 1.0)).abs() < 1e-50);
        }
    }

    #[test]
    fn eigen_swap_matrix() {
        // [[0,1],[1,0]] -> (-1, +1), vectors (1, -+1)/sqrt(2)
        let ctx = ctx();
        let s = MpMatrix::symmetric_from(&ctx, 2, |i, j| if i != j { ctx.one() } else { ctx.zero() });
        let (lam, v) = sym_eigen(&s, &ctx, true).unwrap();
        assert!((lam[0].to_f64() + 1.0).abs() < 1e-50);
        assert!((lam[1].to_f64() - 1.0).abs() < 1e-50);
        let v = v.unwrap();
        let inv_sqrt2 = 1.0 / 2.0_f64.sqrt();
        // column 0: eigenvector for -1 is (1,-1)/sqrt2 up to sign
        assert!((v.at(0, 0).to_f64().abs() - inv_sqrt2).abs() < 1e-15);
        assert!((v.at(0, 0).to_f64() + v.at(1, 0).to_f64()).abs() < 1e-15);
        assert!((v.at(0, 1).to_f64() - v.at(1, 1).to_f64()).abs() < 1e-15);
    }

    #[test]
    fn eigen_residual_and_orthonormality() {
        use rand::{Rng, SeedableRng};
        let ctx = ctx();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        let n = 6;
        let s = MpMatrix::symmetric_from(&ctx, n, |_, _| ctx.real(rng.gen_range(-1.0..1.0)));
        let (lam, v) = sym_eigen(&s, &ctx, true).unwrap();
        let v = v.unwrap();
        let norm = s.frob_norm(&ctx).to_f64();
        // residual per pair
        for k in 0..n {
            let mut worst = 0.0_f64;
            for i in 0..n {
                let mut acc = ctx.zero();
                for j in 0..n {
                    acc += s.at(i, j).clone() * v.at(j, k);
                }
                acc -= lam[k].clone() * v.at(i, k);
                worst = worst.max(acc.abs().to_f64());
            }
            assert!(worst < norm * ctx.eig_tol() * 10.0, "residual {worst}");
        }
        // orthonormality
        for a in 0..n {
            for b in a..n {
                let mut acc = ctx.zero();
                for i in 0..n {
                    acc += v.at(i, a).clone() * v.at(i, b);
                }
                let expect = if a == b { 1.0 } else { 0.0 };
                assert!((acc.to_f64() - expect).abs() < 1e-45);
            }
        }
        // trace identity
        let sum: f64 = lam.iter().map(|l| l.to_f64()).sum();
        assert!((sum - s.trace(&ctx).to_f64()).abs() < 1e-45);
    }
}
