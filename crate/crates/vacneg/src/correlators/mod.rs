//! Vacuum two-point functions of the lattice scalar field, 1D and 2D, in
//! finite volume (mode sums) and infinite volume (Brillouin-zone integrals),
//! with a displacement-keyed cache.
//!
//! Infinite-volume evaluation reduces the axis with the larger displacement
//! to a half-integer-degree Legendre function of the second kind (the same
//! object as the regularized 3F2 of the closed-form correlator; the series
//! and recurrence routes are cross-checked in tests), leaving one smooth
//! outer momentum integral.

mod legq;
mod persist;

pub use persist::{load_cache, save_cache};

use crate::mpnum::{
    integrate, integrate_with_mode, EndpointMode, MpError, MpReal, PrecisionContext,
};
use legq::{i_alpha, QRoute};
use std::collections::HashMap;
use std::sync::RwLock;

/// Which two-point function.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, serde::Serialize, serde::Deserialize)]
pub enum Kind {
    PhiPhi,
    PiPi,
}

impl Kind {
    pub fn alpha(self) -> i32 {
        match self {
            Kind::PhiPhi => -1,
            Kind::PiPi => 1,
        }
    }

    pub fn tag(self) -> &'static str {
        match self {
            Kind::PhiPhi => "phiphi",
            Kind::PiPi => "pipi",
        }
    }
}

/// Lattice dispersion relation.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
pub enum Dispersion {
    /// omega^2 = m^2 + sum_i 4 sin^2(p_i / 2)
    Standard,
    /// 4 sin^2(p_i/2) replaced by p_i^2 (improved dispersion)
    ContinuumP,
}

impl Dispersion {
    pub fn tag(self) -> &'static str {
        match self {
            Dispersion::Standard => "standard",
            Dispersion::ContinuumP => "continuum_p",
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum CorrError {
    #[error(transparent)]
    Numeric(#[from] MpError),
    #[error("zero mode diverges: massless phi-phi finite-volume sum with the exclusion prescription disabled")]
    ZeroModeDivergence,
    #[error("invalid lattice config: {0}")]
    InvalidConfig(String),
}

pub type CorrResult<T> = Result<T, CorrError>;

/// Lattice/theory parameters for the correlators.
#[derive(Clone, Debug)]
pub struct LatticeConfig {
    pub dim: usize,
    pub mass: f64,
    pub dispersion: Dispersion,
    /// IR regulator for the 1D massless phi-phi correlator; the regulated
    /// value is the exact mu -> 0 asymptotic form, so downstream negativities
    /// are already the extrapolated ones.
    pub ir_regulator: f64,
    /// Exclude the p = 0 mode from massless phi-phi finite-volume sums.
    pub exclude_zero_mode: bool,
}

impl LatticeConfig {
    pub fn new(dim: usize, mass: f64, dispersion: Dispersion) -> CorrResult<Self> {
        let cfg = Self {
            dim,
            mass,
            dispersion,
            ir_regulator: if dim == 1 && mass == 0.0 { 1e-5 } else { 0.0 },
            exclude_zero_mode: true,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn with_ir_regulator(mut self, mu: f64) -> CorrResult<Self> {
        self.ir_regulator = mu;
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> CorrResult<()> {
        if self.dim != 1 && self.dim != 2 {
            return Err(CorrError::InvalidConfig(format!("dim = {}", self.dim)));
        }
        if self.mass < 0.0 {
            return Err(CorrError::InvalidConfig("mass must be nonnegative".into()));
        }
        if self.dim == 1 && self.mass == 0.0 && self.ir_regulator <= 0.0 {
            return Err(CorrError::InvalidConfig(
                "1D massless phi-phi is IR-divergent; a positive ir_regulator is required".into(),
            ));
        }
        if self.dim == 2 && self.ir_regulator != 0.0 {
            return Err(CorrError::InvalidConfig(
                "no infrared regulation is used in two dimensions".into(),
            ));
        }
        Ok(())
    }
}

/// omega^2 at momentum p.
pub fn omega2(p: &[MpReal], config: &LatticeConfig, ctx: &PrecisionContext) -> MpReal {
    let mut w = ctx.real(config.mass);
    w.square_mut();
    for pi in p {
        match config.dispersion {
            Dispersion::Standard => {
                let s: MpReal = (pi.clone() / ctx.real(2)).sin();
                w += ctx.real(4) * s.square();
            }
            Dispersion::ContinuumP => {
                w += pi.clone().square();
            }
        }
    }
    w
}

/// Finite-volume mode sum, Eq.-style: sum_p e^{i p r} omega^alpha / (2 L^dim),
/// p_i in (2 pi / L) {0, ..., L-1}.
pub fn correlator_finite(
    kind: Kind,
    r: &[i64],
    l: usize,
    config: &LatticeConfig,
    ctx: &PrecisionContext,
) -> CorrResult<MpReal> {
    assert!(l >= 2, "L must be at least 2");
    assert_eq!(r.len(), config.dim, "displacement dimension mismatch");
    let alpha = kind.alpha();
    let two_pi: MpReal = ctx.pi() * ctx.real(2);

    // cos/sin tables per axis via recurrences
    let mode_p = |k: usize| -> MpReal { two_pi.clone() * ctx.real(k as f64) / ctx.real(l as f64) };
    // folded representative in (-pi, pi] for the continuum_p dispersion
    let folded = |k: usize| -> MpReal {
        let p = mode_p(k);
        if 2 * k > l {
            p - &two_pi
        } else {
            p
        }
    };

    let mut total = ctx.zero();
    match config.dim {
        1 => {
            for k in 0..l {
                let p = mode_p(k);
                let w2 = match config.dispersion {
                    Dispersion::Standard => omega2(std::slice::from_ref(&p), config, ctx),
                    Dispersion::ContinuumP => {
                        let pf = folded(k);
                        omega2(std::slice::from_ref(&pf), config, ctx)
                    }
                };
                if w2 == 0 {
                    match kind {
                        Kind::PhiPhi if config.exclude_zero_mode => continue,
                        Kind::PhiPhi => return Err(CorrError::ZeroModeDivergence),
                        Kind::PiPi => continue, // omega = 0 contributes nothing for alpha = +1
                    }
                }
                let w = w2.sqrt();
                let phase: MpReal = (p * ctx.real(r[0] as f64)).cos();
                let term = if alpha == 1 { w * phase } else { phase / w };
                total += term;
            }
            total /= ctx.real(2.0 * l as f64);
        }
        2 => {
            for kx in 0..l {
                let px = mode_p(kx);
                let pxf = folded(kx);
                for ky in 0..l {
                    let py = mode_p(ky);
                    let pyf = folded(ky);
                    let w2 = match config.dispersion {
                        Dispersion::Standard => omega2(&[px.clone(), py.clone()], config, ctx),
                        Dispersion::ContinuumP => omega2(&[pxf.clone(), pyf.clone()], config, ctx),
                    };
                    if w2 == 0 {
                        match kind {
                            Kind::PhiPhi if config.exclude_zero_mode => continue,
                            Kind::PhiPhi => return Err(CorrError::ZeroModeDivergence),
                            Kind::PiPi => continue,
                        }
                    }
                    let w = w2.sqrt();
                    let arg: MpReal =
                        px.clone() * ctx.real(r[0] as f64) + py.clone() * ctx.real(r[1] as f64);
                    let phase = arg.cos();
                    let term = if alpha == 1 { w * phase } else { phase / w };
                    total += term;
                }
            }
            total /= ctx.real(2.0 * (l * l) as f64);
        }
        _ => unreachable!(),
    }
    Ok(total)
}

/// Harmonic-type sum 1 + 1/3 + ... + 1/(2x-1) at working precision.
fn odd_harmonic(x: usize, ctx: &PrecisionContext) -> MpReal {
    let mut s = ctx.zero();
    for k in 1..=x {
        s += ctx.one() / ctx.real(2 * k as f64 - 1.0);
    }
    s
}

/// Infinite-volume correlator (Brillouin-zone integral of the L -> infinity
/// limit), canonicalized over the displacement sign/order symmetry.
pub fn correlator_infinite(
    kind: Kind,
    r: &[i64],
    config: &LatticeConfig,
    ctx: &PrecisionContext,
) -> CorrResult<MpReal> {
    assert_eq!(r.len(), config.dim, "displacement dimension mismatch");
    config.validate()?;
    let (x, y) = canonical_displacement(r);
    match (config.dim, config.dispersion) {
        (1, Dispersion::Standard) => corr1d_standard(kind, x, config, ctx),
        (1, Dispersion::ContinuumP) => corr1d_continuum(kind, x, config, ctx),
        (2, Dispersion::Standard) => corr2d_standard(kind, x, y, config, ctx),
        (2, Dispersion::ContinuumP) => corr2d_continuum(kind, x, y, config, ctx),
        _ => unreachable!(),
    }
}

/// Canonical displacement: absolute components sorted descending.
pub fn canonical_displacement(r: &[i64]) -> (usize, usize) {
    let a = r[0].unsigned_abs() as usize;
    let b = if r.len() > 1 { r[1].unsigned_abs() as usize } else { 0 };
    (a.max(b), a.min(b))
}

fn corr1d_standard(
    kind: Kind,
    x: usize,
    config: &LatticeConfig,
    ctx: &PrecisionContext,
) -> CorrResult<MpReal> {
    let two_pi: MpReal = ctx.pi() * ctx.real(2);
    if config.mass == 0.0 {
        match kind {
            Kind::PiPi => {
                // (1/2pi) int_0^pi 2 sin(p/2) cos(xp) dp = 2 / (pi (1 - 4 x^2))
                let den: MpReal = ctx.pi() * (ctx.one() - ctx.real(4.0 * (x as f64) * (x as f64)));
                Ok(ctx.real(2) / den)
            }
            Kind::PhiPhi => {
                // exact mu -> 0 asymptotic form of the mass-regulated integral:
                // [3 ln 2 - ln mu - 2 sum_{k<=x} 1/(2k-1)] / (2 pi)
                let mu = ctx.real(config.ir_regulator);
                let num: MpReal =
                    ctx.real(3) * ctx.ln2() - mu.ln() - ctx.real(2) * odd_harmonic(x, ctx);
                Ok(num / two_pi)
            }
        }
    } else {
        let m = ctx.real(config.mass);
        let u: MpReal = m.square() / ctx.real(4);
        Ok(i_alpha(kind.alpha(), x, &u, QRoute::Auto, ctx) / two_pi)
    }
}

fn corr1d_continuum(
    kind: Kind,
    x: usize,
    config: &LatticeConfig,
    ctx: &PrecisionContext,
) -> CorrResult<MpReal> {
    let two_pi: MpReal = ctx.pi() * ctx.real(2);
    let pi = ctx.pi();
    let m2: MpReal = ctx.real(config.mass).square();
    let alpha = kind.alpha();
    let lo = if config.mass == 0.0 && kind == Kind::PhiPhi {
        // IR cutoff at mu for the divergent massless case
        ctx.real(config.ir_regulator)
    } else {
        ctx.zero()
    };
    let mut f = |p: &MpReal| {
        let w2: MpReal = m2.clone() + p.clone().square();
        let w = w2.sqrt();
        let phase: MpReal = (p.clone() * ctx.real(x as f64)).cos();
        if alpha == 1 {
            w * phase
        } else {
            phase / w
        }
    };
    let mode = if config.mass == 0.0 && kind == Kind::PiPi {
        // |p| kink at the origin
        EndpointMode::SqrtLeft
    } else {
        EndpointMode::None
    };
    let v = integrate_with_mode(&mut f, &lo, &pi, ctx, mode).map_err(CorrError::Numeric)?;
    Ok(v.value / two_pi)
}

/// Outer-integral split point: keeps x * M(p0) ~ 20 so the Frobenius route
/// stays accurate on the left and the recurrence buffer bounded on the right.
fn split_point(x: usize, ctx: &PrecisionContext) -> (MpReal, MpReal) {
    let p0 = (20.0 / (x.max(1) as f64)).min(0.5);
    // spec'd endpoint-substitution panel near 0
    let psing = 10.0_f64.powf(-(ctx.digits() as f64) / 4.0);
    (ctx.real(psing.min(p0 / 4.0)), ctx.real(p0))
}

fn corr2d_standard(
    kind: Kind,
    x: usize,
    y: usize,
    config: &LatticeConfig,
    ctx: &PrecisionContext,
) -> CorrResult<MpReal> {
    let alpha = kind.alpha();
    let pi = ctx.pi();
    let m2_4: MpReal = ctx.real(config.mass).square() / ctx.real(4);
    let (p_sing, p0) = split_point(x, ctx);

    let integrand = |p: &MpReal, route: QRoute| -> MpReal {
        let s: MpReal = (p.clone() / ctx.real(2)).sin();
        let u: MpReal = m2_4.clone() + s.square();
        let phase: MpReal = (p.clone() * ctx.real(y as f64)).cos();
        phase * i_alpha(alpha, x, &u, route, ctx)
    };

    // [0, p_sing]: t^2 substitution absorbs the endpoint feature (log for
    // phi-phi); Frobenius route throughout.
    let mut f1 = |p: &MpReal| integrand(p, QRoute::Frobenius);
    let a = integrate_with_mode(&mut f1, &ctx.zero(), &p_sing, ctx, EndpointMode::SqrtLeft)
        .map_err(CorrError::Numeric)?;
    let mut f2 = |p: &MpReal| integrand(p, QRoute::Frobenius);
    let b = integrate(&mut f2, &p_sing, &p0, ctx).map_err(CorrError::Numeric)?;
    let mut f3 = |p: &MpReal| integrand(p, QRoute::Miller);
    let c = integrate(&mut f3, &p0, &pi, ctx).map_err(CorrError::Numeric)?;

    let total: MpReal = a.value + b.value + c.value;
    let two_pi2: MpReal = ctx.pi().square() * ctx.real(2);
    Ok(total / two_pi2)
}

fn corr2d_continuum(
    kind: Kind,
    x: usize,
    y: usize,
    config: &LatticeConfig,
    ctx: &PrecisionContext,
) -> CorrResult<MpReal> {
    // direct double Brillouin-zone quadrature; the hypergeometric reduction
    // is specific to the standard dispersion
    let alpha = kind.alpha();
    let pi = ctx.pi();
    let m2: MpReal = ctx.real(config.mass).square();
    let inner = |px: &MpReal| -> Result<MpReal, MpError> {
        let mut g = |py: &MpReal| {
            let w2: MpReal = m2.clone() + px.clone().square() + py.clone().square();
            let w = w2.sqrt();
            let phase: MpReal = (py.clone() * ctx.real(y as f64)).cos();
            if alpha == 1 {
                w * phase
            } else {
                phase / w
            }
        };
        Ok(integrate(&mut g, &ctx.zero(), &pi, ctx)?.value)
    };
    let mut err: Option<MpError> = None;
    let mut f = |px: &MpReal| -> MpReal {
        match inner(px) {
            Ok(v) => v * (px.clone() * ctx.real(x as f64)).cos(),
            Err(e) => {
                err = Some(e);
                ctx.zero()
            }
        }
    };
    let v = integrate(&mut f, &ctx.zero(), &pi, ctx).map_err(CorrError::Numeric)?;
    if let Some(e) = err {
        return Err(CorrError::Numeric(e));
    }
    let pi2: MpReal = ctx.pi().square();
    Ok(v.value / (pi2 * ctx.real(2)))
}

/// Displacement-keyed correlator cache. Reads are concurrent; writes go
/// through the single write lock keyed by canonical displacement.
pub struct CorrelatorKernel {
    config: LatticeConfig,
    ctx: PrecisionContext,
    cache: RwLock<HashMap<(Kind, usize, usize), MpReal>>,
    evals: std::sync::atomic::AtomicUsize,
    mutate_pipi_sign: bool,
}

impl CorrelatorKernel {
    pub fn new(config: LatticeConfig, ctx: &PrecisionContext) -> Self {
        let mutate = std::env::var("VACNEG_MUTATE_PIPI_SIGN").map(|v| v == "1").unwrap_or(false);
        Self {
            config,
            ctx: ctx.clone(),
            cache: RwLock::new(HashMap::new()),
            evals: std::sync::atomic::AtomicUsize::new(0),
            mutate_pipi_sign: mutate,
        }
    }

    pub fn config(&self) -> &LatticeConfig {
        &self.config
    }

    pub fn ctx(&self) -> &PrecisionContext {
        &self.ctx
    }

    /// Number of underlying integral evaluations (cache misses).
    pub fn evaluation_count(&self) -> usize {
        self.evals.load(std::sync::atomic::Ordering::Relaxed)
    }

    pub fn len(&self) -> usize {
        self.cache.read().unwrap().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Cached infinite-volume correlator at displacement r.
    pub fn get(&self, kind: Kind, r: &[i64]) -> CorrResult<MpReal> {
        let (a, b) = canonical_displacement(r);
        if let Some(v) = self.cache.read().unwrap().get(&(kind, a, b)) {
            return Ok(v.clone());
        }
        let rr: Vec<i64> = if self.config.dim == 1 {
            vec![a as i64]
        } else {
            vec![a as i64, b as i64]
        };
        let mut v = correlator_infinite(kind, &rr, &self.config, &self.ctx)?;
        if self.mutate_pipi_sign && kind == Kind::PiPi && (a, b) != (0, 0) {
            v = -v; // test hook: deliberately corrupt to exercise validation
        }
        self.evals.fetch_add(1, std::sync::atomic::Ordering::Relaxed);
        self.cache
            .write()
            .unwrap()
            .insert((kind, a, b), v.clone());
        Ok(v)
    }

    /// Pre-populate the cache for a set of displacements (canonicalized and
    /// deduplicated, grouped for the batched evaluator in 2D).
    pub fn populate(&self, displacements: &[[i64; 2]]) -> CorrResult<()> {
        use std::collections::BTreeSet;
        let mut want: BTreeSet<(usize, usize)> = BTreeSet::new();
        for d in displacements {
            let (a, b) = canonical_displacement(&d[..self.config.dim.min(2)]);
            want.insert((a, b));
        }
        {
            let cache = self.cache.read().unwrap();
            want.retain(|&(a, b)| {
                !(cache.contains_key(&(Kind::PhiPhi, a, b))
                    && cache.contains_key(&(Kind::PiPi, a, b)))
            });
        }
        if want.is_empty() {
            return Ok(());
        }
        if self.config.dim == 2 && self.config.dispersion == Dispersion::Standard {
            // group by the smaller component (outer-integral frequency)
            let mut by_y: HashMap<usize, Vec<usize>> = HashMap::new();
            for &(a, b) in &want {
                by_y.entry(b).or_default().push(a);
            }
            let mut groups: Vec<(usize, Vec<usize>)> = by_y.into_iter().collect();
            groups.sort();
            use rayon::prelude::*;
            let results: CorrResult<Vec<_>> = groups
                .par_iter()
                .map(|(y, xs)| {
                    let mut out = Vec::new();
                    for kind in [Kind::PhiPhi, Kind::PiPi] {
                        let vals = self.batch_row(kind, *y, xs)?;
                        for (x, v) in xs.iter().zip(vals) {
                            out.push((kind, *x, *y, v));
                        }
                    }
                    Ok(out)
                })
                .collect();
            let mut cache = self.cache.write().unwrap();
            for group in results? {
                for (kind, x, y, mut v) in group {
                    if self.mutate_pipi_sign && kind == Kind::PiPi && (x, y) != (0, 0) {
                        v = -v;
                    }
                    self.evals.fetch_add(1, std::sync::atomic::Ordering::Relaxed);
                    cache.insert((kind, x, y), v);
                }
            }
            Ok(())
        } else {
            use rayon::prelude::*;
            let list: Vec<(usize, usize)> = want.into_iter().collect();
            let results: CorrResult<Vec<_>> = list
                .par_iter()
                .map(|&(a, b)| {
                    let rr: Vec<i64> = if self.config.dim == 1 {
                        vec![a as i64]
                    } else {
                        vec![a as i64, b as i64]
                    };
                    let u = correlator_infinite(Kind::PhiPhi, &rr, &self.config, &self.ctx)?;
                    let v = correlator_infinite(Kind::PiPi, &rr, &self.config, &self.ctx)?;
                    Ok((a, b, u, v))
                })
                .collect();
            let mut cache = self.cache.write().unwrap();
            for (a, b, u, mut v) in results? {
                if self.mutate_pipi_sign && (a, b) != (0, 0) {
                    v = -v;
                }
                self.evals.fetch_add(2, std::sync::atomic::Ordering::Relaxed);
                cache.insert((Kind::PhiPhi, a, b), u);
                cache.insert((Kind::PiPi, a, b), v);
            }
            Ok(())
        }
    }

    /// All correlators sharing the outer oscillation frequency y evaluated in
    /// one adaptive pass; a single downward recurrence per node serves every x.
    fn batch_row(&self, kind: Kind, y: usize, xs: &[usize]) -> CorrResult<Vec<MpReal>> {
        let ctx = &self.ctx;
        let alpha = kind.alpha();
        let x_max = *xs.iter().max().unwrap();
        let m2_4: MpReal = ctx.real(self.config.mass).square() / ctx.real(4);
        let (p_sing, p0) = split_point(x_max, ctx);
        let pi = ctx.pi();

        // left region: per-x Frobenius (series shrink rapidly as p -> 0)
        let eval_frob = |p: &MpReal| -> Vec<MpReal> {
            let s: MpReal = (p.clone() / ctx.real(2)).sin();
            let u: MpReal = m2_4.clone() + s.square();
            let phase: MpReal = (p.clone() * ctx.real(y as f64)).cos();
            xs.iter()
                .map(|&x| phase.clone() * i_alpha(alpha, x, &u, QRoute::Frobenius, ctx))
                .collect()
        };
        // right region: one Miller pass serves all x
        let eval_miller = |p: &MpReal| -> Vec<MpReal> {
            let s: MpReal = (p.clone() / ctx.real(2)).sin();
            let u: MpReal = m2_4.clone() + s.square();
            let phase: MpReal = (p.clone() * ctx.real(y as f64)).cos();
            let q = legq::q_miller(&u, x_max + 1, ctx);
            let c: MpReal = ctx.one() + ctx.real(2) * &u;
            xs.iter()
                .map(|&x| {
                    let v = if alpha == -1 {
                        q[x].clone()
                    } else {
                        let qxm = if x == 0 { q[1].clone() } else { q[x - 1].clone() };
                        ctx.real(2) * c.clone() * &q[x] - q[x + 1].clone() - qxm
                    };
                    phase.clone() * v
                })
                .collect()
        };

        let n = xs.len();
        let mut total = batch_adaptive(&eval_frob, &ctx.zero(), &p_sing, n, ctx, true)?;
        let mid = batch_adaptive(&eval_frob, &p_sing, &p0, n, ctx, false)?;
        let right = batch_adaptive(&eval_miller, &p0, &pi, n, ctx, false)?;
        for i in 0..n {
            total[i] += mid[i].clone() + &right[i];
        }
        let two_pi2: MpReal = ctx.pi().square() * ctx.real(2);
        Ok(total.into_iter().map(|v| v / &two_pi2).collect())
    }
}

/// Vector-valued adaptive bisection; a panel is accepted only when every
/// component passes the parent-vs-children test.
fn batch_adaptive(
    f: &dyn Fn(&MpReal) -> Vec<MpReal>,
    a: &MpReal,
    b: &MpReal,
    n: usize,
    ctx: &PrecisionContext,
    sqrt_left: bool,
) -> CorrResult<Vec<MpReal>> {
    if a == b {
        return Ok(vec![ctx.zero(); n]);
    }
    // substitution p = a + t^2 folded in here so panels stay aligned
    let (lo, hi): (MpReal, MpReal) = if sqrt_left {
        (ctx.zero(), (b.clone() - a).sqrt())
    } else {
        (a.clone(), b.clone())
    };
    let a0 = a.clone();
    let g = |t: &MpReal| -> Vec<MpReal> {
        if sqrt_left {
            let p: MpReal = a0.clone() + t.clone().square();
            let mut v = f(&p);
            let jac: MpReal = ctx.real(2) * t;
            for vi in &mut v {
                *vi *= &jac;
            }
            v
        } else {
            f(t)
        }
    };

    let order = (ctx.digits() as usize / 2).clamp(24, 96);
    let (nodes, weights) = crate::mpnum::gauss_legendre_nodes(order, ctx);
    let panel = |pa: &MpReal, pb: &MpReal| -> Vec<MpReal> {
        let half: MpReal = (pb.clone() - pa) / ctx.real(2);
        let mid: MpReal = (pb.clone() + pa) / ctx.real(2);
        let mut acc = vec![ctx.zero(); n];
        for (xn, w) in nodes.iter().zip(&weights) {
            let p: MpReal = mid.clone() + half.clone() * xn;
            let vals = g(&p);
            for (ai, vi) in acc.iter_mut().zip(vals) {
                *ai += vi * w;
            }
        }
        for ai in &mut acc {
            *ai *= &half;
        }
        acc
    };

    let tol = ctx.real(ctx.quad_tol());
    let width: MpReal = hi.clone() - &lo;
    let whole = panel(&lo, &hi);
    let mut stack = vec![(lo, hi, whole, 0usize)];
    let mut total = vec![ctx.zero(); n];
    let max_depth = 24 + 6 * ctx.digits() as usize;
    let mut n_panels = 0usize;
    while let Some((pa, pb, pv, depth)) = stack.pop() {
        let mid: MpReal = (pa.clone() + &pb) / ctx.real(2);
        let left = panel(&pa, &mid);
        let right = panel(&mid, &pb);
        let share: MpReal = tol.clone() * (pb.clone() - &pa) / &width;
        let mut ok = true;
        for i in 0..n {
            let disc: MpReal = (pv[i].clone() - &left[i] - &right[i]).abs();
            if disc > share {
                ok = false;
                break;
            }
        }
        if ok || depth >= max_depth {
            if !ok {
                return Err(CorrError::Numeric(MpError::NonConvergence {
                    err_estimate: ctx.quad_tol(),
                }));
            }
            for i in 0..n {
                total[i] += left[i].clone() + &right[i];
            }
            n_panels += 2;
        } else {
            stack.push((pa, mid.clone(), left, depth + 1));
            stack.push((mid, pb, right, depth + 1));
        }
        if n_panels + stack.len() > 60_000 {
            return Err(CorrError::Numeric(MpError::NonConvergence {
                err_estimate: ctx.quad_tol(),
            }));
        }
    }
    Ok(total)
}
