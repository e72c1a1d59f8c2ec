//! The validate harness: replays published reference values and reports one
//! machine-readable record per check.

use crate::analysis::{sphere_radius, sweep_curve};
use crate::correlators::{CorrelatorKernel, Dispersion, LatticeConfig};
use crate::geometry::{build_region, place_pair, Boundary, DiameterRule};
use crate::mpnum::PrecisionContext;
use crate::negativity::{evaluate_pair, EvalOptions};
use serde::Serialize;

#[derive(Clone, Debug, Serialize)]
pub struct Check {
    pub id: String,
    pub description: String,
    /// table/figure coordinates in the source publication
    pub paper_ref: String,
    pub expected: String,
    pub got: String,
    pub pass: bool,
}

fn ctx_with(digits: Option<u32>) -> PrecisionContext {
    PrecisionContext::new(digits.unwrap_or(PrecisionContext::DEFAULT_DIGITS)).expect("context")
}

fn kernel_1d(ctx: &PrecisionContext) -> CorrelatorKernel {
    let cfg = LatticeConfig::new(1, 0.0, Dispersion::Standard).unwrap();
    CorrelatorKernel::new(cfg, ctx)
}

fn kernel_2d(ctx: &PrecisionContext) -> CorrelatorKernel {
    let cfg = LatticeConfig::new(2, 0.0, Dispersion::Standard).unwrap();
    CorrelatorKernel::new(cfg, ctx)
}

/// 1D sphere-edge reference ratios (per-size integer separations).
pub const RADII_1D: [(usize, f64); 16] = [
    (1, 1.000),
    (2, 1.000),
    (3, 3.000),
    (4, 3.250),
    (5, 5.200),
    (6, 5.333),
    (7, 7.429),
    (8, 7.625),
    (9, 9.667),
    (10, 9.800),
    (11, 11.91),
    (12, 12.00),
    (13, 14.15),
    (14, 14.21),
    (15, 16.33),
    (16, 16.50),
];

/// 2D sphere-edge reference ratios, N boundary.
pub const RADII_2D_N: [(usize, f64); 4] = [(3, 1.33), (5, 2.00), (7, 3.00), (9, 4.11)];

/// 2D sphere-edge reference ratios, S boundary (odd sizes).
pub const RADII_2D_S: [(usize, f64); 3] = [(3, 1.67), (5, 2.60), (7, 3.71)];

/// The d_lat = 7 separation curve: (rtilde, N) with rtilde/d_avg as printed.
pub const D7_CURVE: [(i64, f64, f64); 18] = [
    (3, 0.553, 1.20e-3),
    (4, 0.737, 5.90e-4),
    (5, 0.922, 2.58e-4),
    (6, 1.11, 9.09e-5),
    (7, 1.29, 2.29e-5),
    (8, 1.47, 6.81e-6),
    (9, 1.66, 2.91e-6),
    (10, 1.84, 1.32e-6),
    (11, 2.03, 5.12e-7),
    (12, 2.21, 1.57e-7),
    (13, 2.40, 4.84e-8),
    (14, 2.58, 1.29e-8),
    (15, 2.77, 2.41e-9),
    (16, 2.95, 7.82e-10),
    (17, 3.13, 3.66e-10),
    (18, 3.32, 1.83e-10),
    (19, 3.50, 8.01e-11),
    (20, 3.69, 1.32e-11),
];

/// Spot amplitudes from the d_lat = 13, rtilde = 13 wavefunction table,
/// in the table frame.
pub const WF13_SEP13: [(i64, i64, f64); 8] = [
    (6, 0, 0.0053146),
    (6, 6, 0.15268),
    (7, 6, 0.18416),
    (6, 1, -0.077618),
    (12, 6, -0.0037411),
    (32, 0, -0.0053146),
    (26, 6, 0.0037411),
    (6, 4, 0.092581),
];

/// Spot amplitudes from the d_lat = 13, rtilde = 100 table (region A part).
pub const WF13_SEP100: [(i64, i64, f64); 5] = [
    (6, 6, -0.37969),
    (5, 6, 0.24398),
    (6, 5, 0.24273),
    (6, 4, -0.069559),
    (6, 0, 4.9034e-8),
];

fn ratio_str(v: f64) -> String {
    format!("{v:.3}")
}

fn sig3(v: f64) -> String {
    format!("{v:.2e}")
}

fn check_radius_1d(ctx: &PrecisionContext, d: usize, expect_ratio: f64) -> Check {
    let kernel = kernel_1d(ctx);
    let expect_rt = (expect_ratio * d as f64).round() as i64;
    let got = sphere_radius(d, Boundary::N, 1, &kernel, ctx);
    let (got_str, pass) = match got {
        Ok(r) => (format!("{}", r.rtilde_ns), r.rtilde_ns == expect_rt),
        Err(e) => (format!("error: {e}"), false),
    };
    Check {
        id: format!("1d-radius-d{d}"),
        description: format!("1D negativity-sphere edge at d_lat = {d}"),
        paper_ref: format!("1D bubble radii table, row {d} -> {}", ratio_str(expect_ratio)),
        expected: format!("{expect_rt}"),
        got: got_str,
        pass,
    }
}

fn check_radius_2d(ctx: &PrecisionContext, d: usize, b: Boundary, expect_ratio: f64) -> Check {
    let kernel = kernel_2d(ctx);
    let expect_rt = (expect_ratio * d as f64).round() as i64;
    let got = sphere_radius(d, b, 2, &kernel, ctx);
    let (got_str, pass) = match got {
        Ok(r) => (format!("{}", r.rtilde_ns), r.rtilde_ns == expect_rt),
        Err(e) => (format!("error: {e}"), false),
    };
    Check {
        id: format!("2d-radius-{}{d}", b.tag()),
        description: format!("2D negativity-sphere edge, {} boundary, d_lat = {d}", b.tag()),
        paper_ref: format!("2D bubble radii table ({} boundary), row {d} -> {expect_ratio}", b.tag()),
        expected: format!("{expect_rt}"),
        got: got_str,
        pass,
    }
}

fn check_davg_calibration() -> Check {
    let r7 = build_region(7, Boundary::N).unwrap();
    let pass = r7.d_avg > 5.4237 && r7.d_avg < 5.4250;
    Check {
        id: "davg-7N-curve-calibration".into(),
        description: "averaged diameter reproduces the d_lat=7 curve abscissa normalization".into(),
        paper_ref: "d_lat=7 negativity table, first row 0.553 = 3/d_avg".into(),
        expected: "within (5.4237, 5.4250)".into(),
        got: format!("{:.5}", r7.d_avg),
        pass,
    }
}

fn check_davg_printed() -> Check {
    // The printed two-decimal values in the running text; the tabulated
    // curves imply 11.297/12.41x instead, so this check documents the
    // discrepancy rather than gating the build (see the rule variants).
    let n13 = build_region(13, Boundary::N).unwrap();
    let s13 = build_region(13, Boundary::S).unwrap();
    let four_n = crate::geometry::averaged_diameter(&n13, DiameterRule::FourConnArithmetic);
    let got = format!(
        "face-geometric {:.4}/{:.4}, four-conn {:.4}",
        n13.d_avg, s13.d_avg, four_n
    );
    let pass = (n13.d_avg - 11.27).abs() < 0.005 && (s13.d_avg - 12.36).abs() < 0.005;
    Check {
        id: "davg-13-printed-text".into(),
        description: "printed d_avg values 11.27 (N) / 12.36 (S) at d_lat = 13".into(),
        paper_ref: "running text near the diameter-normalization discussion".into(),
        expected: "11.27 / 12.36".into(),
        got,
        pass,
    }
}

fn check_d7_curve(ctx: &PrecisionContext, rows: &[(i64, f64, f64)]) -> Vec<Check> {
    let kernel = kernel_2d(ctx);
    let rts: Vec<i64> = rows.iter().map(|r| r.0).collect();
    let curve = sweep_curve(7, Boundary::N, 2, &rts, &kernel, ctx);
    match curve {
        Ok(curve) => rows
            .iter()
            .zip(&curve.points)
            .map(|(&(rt, absc, nval), p)| {
                let rel = (p.logneg_f64 - nval).abs() / nval;
                // 3 significant figures: half-ulp of the printed mantissa
                let pass = rel < 0.5e-2 && (p.over_davg - absc).abs() / absc < 0.5e-2;
                Check {
                    id: format!("2d-curve-d7-rt{rt}"),
                    description: format!("d_lat=7 N curve at rtilde = {rt}"),
                    paper_ref: format!("d_lat=7 table row {absc}"),
                    expected: sig3(nval),
                    got: sig3(p.logneg_f64),
                    pass,
                }
            })
            .collect(),
        Err(e) => vec![Check {
            id: "2d-curve-d7".into(),
            description: "d_lat=7 N curve".into(),
            paper_ref: "d_lat=7 table".into(),
            expected: "curve".into(),
            got: format!("error: {e}"),
            pass: false,
        }],
    }
}

fn check_wavefunction(
    ctx: &PrecisionContext,
    rtilde: i64,
    spots: &[(i64, i64, f64)],
    tol_rel: f64,
) -> Check {
    let kernel = kernel_2d(ctx);
    let region = build_region(13, Boundary::N).unwrap();
    let pair = place_pair(&region, rtilde);
    let res = evaluate_pair(&pair, &kernel, ctx, EvalOptions { want_ground: true });
    let (got, pass) = match res {
        Ok(r) => {
            let gs = r.ground_state.unwrap();
            let amp: std::collections::HashMap<(i64, i64), f64> = gs
                .amplitudes
                .iter()
                .map(|(x, y, a)| ((*x, *y), a.to_f64()))
                .collect();
            // align the overall sign against the largest tabulated amplitude
            let anchor = spots
                .iter()
                .max_by(|a, b| a.2.abs().partial_cmp(&b.2.abs()).unwrap())
                .unwrap();
            let sign = if amp[&(anchor.0, anchor.1)] * anchor.2 < 0.0 {
                -1.0
            } else {
                1.0
            };
            let mut worst = 0.0_f64;
            for &(x, y, v) in spots {
                let got = sign * amp[&(x, y)];
                worst = worst.max((got - v).abs() / v.abs());
            }
            (format!("worst rel dev {worst:.2e}"), worst < tol_rel)
        }
        Err(e) => (format!("error: {e}"), false),
    };
    Check {
        id: format!("wavefunction-d13-rt{rtilde}"),
        description: format!("ground-state amplitudes at d_lat = 13, rtilde = {rtilde}"),
        paper_ref: format!("wavefunction amplitude table (rtilde = {rtilde})"),
        expected: format!("all spot amplitudes within {tol_rel:.0e} relative"),
        got,
        pass,
    }
}

fn check_mu_ladder(digits: Option<u32>) -> Check {
    let ctx = ctx_with(digits);
    let mut vals = Vec::new();
    for mu in [1e-4, 1e-5, 1e-6] {
        let cfg = LatticeConfig::new(1, 0.0, Dispersion::Standard)
            .unwrap()
            .with_ir_regulator(mu)
            .unwrap();
        let kernel = CorrelatorKernel::new(cfg, &ctx);
        let pair = crate::geometry::place_pair_1d(3, 5);
        match evaluate_pair(&pair, &kernel, &ctx, EvalOptions::default()) {
            Ok(r) => vals.push(r.logneg.to_f64()),
            Err(e) => {
                return Check {
                    id: "1d-mu-insensitivity".into(),
                    description: "regulator ladder at d_lat = 3, rtilde = 5".into(),
                    paper_ref: "IR-regulator prescription (artifact decision)".into(),
                    expected: "< 1e-8 relative spread".into(),
                    got: format!("error: {e}"),
                    pass: false,
                }
            }
        }
    }
    let spread = (vals[0] - vals[2]).abs() / vals[1];
    Check {
        id: "1d-mu-insensitivity".into(),
        description: "regulator ladder at d_lat = 3, rtilde = 5".into(),
        paper_ref: "IR-regulator prescription (artifact decision)".into(),
        expected: "< 1e-8 relative spread".into(),
        got: format!("{spread:.2e}"),
        pass: spread < 1e-8,
    }
}

/// Run the quick or full suite.
pub fn run_suite(quick: bool, digits: Option<u32>) -> Vec<Check> {
    let ctx = ctx_with(digits);
    let mut checks = Vec::new();

    checks.push(check_davg_calibration());
    checks.push(check_mu_ladder(digits));

    let n_1d = if quick { 6 } else { RADII_1D.len() };
    for &(d, ratio) in RADII_1D.iter().take(n_1d) {
        checks.push(check_radius_1d(&ctx, d, ratio));
    }

    checks.push(check_radius_2d(&ctx, 3, Boundary::N, 1.33));
    checks.push(check_radius_2d(&ctx, 3, Boundary::S, 1.67));
    if !quick {
        for &(d, ratio) in RADII_2D_N.iter().skip(1) {
            checks.push(check_radius_2d(&ctx, d, Boundary::N, ratio));
        }
        for &(d, ratio) in RADII_2D_S.iter().skip(1) {
            checks.push(check_radius_2d(&ctx, d, Boundary::S, ratio));
        }
    }

    let rows: &[(i64, f64, f64)] = if quick { &D7_CURVE[..3] } else { &D7_CURVE };
    checks.extend(check_d7_curve(&ctx, rows));

    if !quick {
        checks.push(check_davg_printed());
        checks.push(check_wavefunction(&ctx, 13, &WF13_SEP13, 1e-3));
        checks.push(check_wavefunction(&ctx, 100, &WF13_SEP100, 1e-3));
    }

    checks
}
