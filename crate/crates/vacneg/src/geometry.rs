//! Pixelated circular regions, region pairs at a given surface separation,
//! and the symmetry-adapted parity basis.
//!
//! Coordinates are lattice sites (integers). Region centers can sit on a
//! site or a plaquette center, so centers are stored in half-unit (doubled)
//! coordinates and all membership tests are exact integer arithmetic.

use serde::Serialize;

/// Boundary truncation rule for the pixelated disk.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, serde::Deserialize)]
pub enum Boundary {
    /// integer truncation of |n|
    N,
    /// next-half-integer truncation of |n|
    S,
}

impl Boundary {
    pub fn tag(self) -> &'static str {
        match self {
            Boundary::N => "N",
            Boundary::S => "S",
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum GeomError {
    #[error("N regions require odd d_lat (got {0})")]
    InvalidDiameter(usize),
    #[error("symmetry violation: off-block leakage {leak:e} exceeds tolerance")]
    SymmetryViolation { leak: f64 },
}

/// A pixelated disk: site list, boundary type, axis extent, derived diameter.
#[derive(Clone, Debug, Serialize)]
pub struct RegionSpec {
    pub boundary: Boundary,
    pub d_lat: usize,
    /// center in doubled coordinates (so (1,1) means (1/2, 1/2))
    pub center2: (i64, i64),
    /// sites sorted lexicographically
    pub sites: Vec<(i64, i64)>,
    pub d_avg: f64,
}

/// Averaged-diameter rule. The default follows the normalization implied by
/// the tabulated separation curves; the connectivity variants report the
/// plain arithmetic mean over the exposed boundary sites.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DiameterRule {
    /// geometric mean of boundary-site distances weighted by exposed faces
    FaceGeometric,
    /// arithmetic mean over 4-connectivity-exposed boundary sites
    FourConnArithmetic,
    /// arithmetic mean over 8-connectivity-exposed boundary sites
    EightConnArithmetic,
}

/// Build a pixelated circular region centered at the origin site (odd d_lat)
/// or the plaquette center (even d_lat, S boundary only).
pub fn build_region(d_lat: usize, boundary: Boundary) -> Result<RegionSpec, GeomError> {
    assert!(d_lat >= 1, "d_lat must be positive");
    if boundary == Boundary::N && d_lat % 2 == 0 {
        return Err(GeomError::InvalidDiameter(d_lat));
    }
    let center2: (i64, i64) = if d_lat % 2 == 0 { (1, 1) } else { (0, 0) };
    // |n - c| <= R with R = (d_lat-1)/2 for N, d_lat/2 for S;
    // in doubled coordinates: |2n - c2|^2 <= (2R)^2
    let r2_doubled: i64 = match boundary {
        Boundary::N => ((d_lat as i64 - 1) * (d_lat as i64 - 1)),
        Boundary::S => (d_lat as i64) * (d_lat as i64),
    };
    let lim = d_lat as i64 / 2 + 1;
    let mut sites = Vec::new();
    for x in -lim..=lim + 1 {
        for y in -lim..=lim + 1 {
            let dx = 2 * x - center2.0;
            let dy = 2 * y - center2.1;
            if dx * dx + dy * dy <= r2_doubled {
                sites.push((x, y));
            }
        }
    }
    sites.sort_unstable();
    let mut region = RegionSpec {
        boundary,
        d_lat,
        center2,
        sites,
        d_avg: 0.0,
    };
    region.d_avg = averaged_diameter(&region, DiameterRule::FaceGeometric);
    Ok(region)
}

/// Boundary sites with exposed-face multiplicity (4-connectivity).
fn exposed_faces(region: &RegionSpec) -> Vec<((i64, i64), usize)> {
    let set: std::collections::HashSet<(i64, i64)> = region.sites.iter().copied().collect();
    let mut out = Vec::new();
    for &(x, y) in &region.sites {
        let n = [(1, 0), (-1, 0), (0, 1), (0, -1)]
            .iter()
            .filter(|(dx, dy)| !set.contains(&(x + dx, y + dy)))
            .count();
        if n > 0 {
            out.push(((x, y), n));
        }
    }
    out
}

fn boundary_sites(region: &RegionSpec, conn8: bool) -> Vec<(i64, i64)> {
    let set: std::collections::HashSet<(i64, i64)> = region.sites.iter().copied().collect();
    let nbrs: Vec<(i64, i64)> = if conn8 {
        (-1..=1)
            .flat_map(|dx| (-1..=1).map(move |dy| (dx, dy)))
            .filter(|&(dx, dy)| (dx, dy) != (0, 0))
            .collect()
    } else {
        vec![(1, 0), (-1, 0), (0, 1), (0, -1)]
    };
    region
        .sites
        .iter()
        .copied()
        .filter(|&(x, y)| nbrs.iter().any(|(dx, dy)| !set.contains(&(x + dx, y + dy))))
        .collect()
}

fn site_dist(region: &RegionSpec, s: (i64, i64)) -> f64 {
    let dx = (2 * s.0 - region.center2.0) as f64 / 2.0;
    let dy = (2 * s.1 - region.center2.1) as f64 / 2.0;
    (dx * dx + dy * dy).sqrt()
}

/// Averaged diameter over boundary points, by the requested rule.
pub fn averaged_diameter(region: &RegionSpec, rule: DiameterRule) -> f64 {
    assert!(!region.sites.is_empty(), "region must be nonempty");
    if region.sites.len() == 1 {
        return 1.0; // a single pixel spans one lattice unit
    }
    match rule {
        DiameterRule::FaceGeometric => {
            let faces = exposed_faces(region);
            let mut w_total = 0.0_f64;
            let mut log_sum = 0.0_f64;
            for (s, n) in faces {
                let r = site_dist(region, s);
                w_total += n as f64;
                log_sum += n as f64 * r.ln();
            }
            2.0 * (log_sum / w_total).exp()
        }
        DiameterRule::FourConnArithmetic | DiameterRule::EightConnArithmetic => {
            let b = boundary_sites(region, rule == DiameterRule::EightConnArithmetic);
            let sum: f64 = b.iter().map(|&s| site_dist(region, s)).sum();
            2.0 * sum / b.len() as f64
        }
    }
}

/// Two identical regions separated along x by the surface separation rtilde.
///
/// B is A translated by Delta = rtilde + d_lat, which puts rtilde empty
/// columns between the outermost sites (surface-to-surface distance measured
/// through the pixel faces); the nearest-site distance is rtilde + 1.
#[derive(Clone, Debug, Serialize)]
pub struct PairConfig {
    pub region: RegionSpec,
    pub rtilde: i64,
    pub delta: i64,
    pub sites_a: Vec<(i64, i64)>,
    pub sites_b: Vec<(i64, i64)>,
}

pub fn place_pair(region: &RegionSpec, rtilde: i64) -> PairConfig {
    assert!(rtilde >= 1, "rtilde must be >= 1");
    let delta = rtilde + region.d_lat as i64;
    let sites_a = region.sites.clone();
    let sites_b: Vec<(i64, i64)> = sites_a.iter().map(|&(x, y)| (x + delta, y)).collect();
    PairConfig {
        region: region.clone(),
        rtilde,
        delta,
        sites_a,
        sites_b,
    }
}

/// 1D "region": d_lat consecutive sites on a line (y = 0 throughout).
pub fn build_segment(d_lat: usize) -> RegionSpec {
    let sites: Vec<(i64, i64)> = (0..d_lat as i64).map(|x| (x, 0)).collect();
    RegionSpec {
        boundary: Boundary::N,
        d_lat,
        center2: (d_lat as i64 - 1, 0),
        sites,
        d_avg: d_lat as f64,
    }
}

pub fn place_pair_1d(d_lat: usize, rtilde: i64) -> PairConfig {
    assert!(rtilde >= 1, "rtilde must be >= 1");
    let region = build_segment(d_lat);
    let delta = rtilde + d_lat as i64;
    let sites_a = region.sites.clone();
    let sites_b: Vec<(i64, i64)> = sites_a.iter().map(|&(x, y)| (x + delta, y)).collect();
    PairConfig {
        region,
        rtilde,
        delta,
        sites_a,
        sites_b,
    }
}

impl PairConfig {
    /// Union site list in deterministic order: A then B, each lexicographic.
    pub fn union_sites(&self) -> Vec<(i64, i64)> {
        let mut v = self.sites_a.clone();
        v.extend_from_slice(&self.sites_b);
        v
    }

    pub fn n_a(&self) -> usize {
        self.sites_a.len()
    }

    /// Export as the JSON region-pair description.
    pub fn to_json(&self) -> serde_json::Value {
        serde_json::json!({
            "boundary": self.region.boundary.tag(),
            "d_lat": self.region.d_lat,
            "center": [self.region.center2.0 as f64 / 2.0, self.region.center2.1 as f64 / 2.0],
            "rtilde": self.rtilde,
            "delta": self.delta,
            "d_avg": self.region.d_avg,
            "sites_a": self.sites_a,
            "sites_b": self.sites_b,
        })
    }
}

/// Sector label: parity under the axis reflection (y -> -y about the pair
/// axis) and under the midpoint swap (x-reflection exchanging A and B).
pub type Sector = (i8, i8);

pub const SECTORS: [Sector; 4] = [(1, 1), (1, -1), (-1, 1), (-1, -1)];

pub fn sector_tag(s: Sector) -> String {
    let sgn = |v: i8| if v > 0 { '+' } else { '-' };
    format!("({},{})", sgn(s.0), sgn(s.1))
}

/// Orthonormal symmetry-adapted basis. Each vector is a short list of
/// (site index into the pair's union ordering, coefficient).
#[derive(Clone, Debug)]
pub struct ParityBasis {
    pub vectors: std::collections::BTreeMap<Sector, Vec<Vec<(usize, f64)>>>,
}

impl ParityBasis {
    pub fn sector_dim(&self, s: Sector) -> usize {
        self.vectors.get(&s).map(|v| v.len()).unwrap_or(0)
    }

    pub fn total_dim(&self) -> usize {
        self.vectors.values().map(|v| v.len()).sum()
    }
}

/// Build the parity basis for a pair produced by `place_pair`/`place_pair_1d`.
pub fn parity_basis(pair: &PairConfig) -> ParityBasis {
    let sites = pair.union_sites();
    let index: std::collections::HashMap<(i64, i64), usize> =
        sites.iter().copied().enumerate().map(|(i, s)| (s, i)).collect();
    // axis reflection: y -> cy2 - y (doubled-center arithmetic keeps it exact)
    let cy2 = pair.region.center2.1;
    // midpoint swap: x -> mx2 - x with mx2 = cx2_A + delta... in doubled
    // coords 2x' = 2*(cxA + (cxA+delta))/2*... directly: x' = cxA + cxB - x
    let cx2a = pair.region.center2.0;
    let mx2 = cx2a + pair.delta; // 2 * midpoint = (cxA) + (cxA + delta) in doubled/2... see test
    let r1 = |s: (i64, i64)| -> (i64, i64) { (s.0, cy2 - s.1) };
    let r2 = |s: (i64, i64)| -> (i64, i64) { (mx2 - s.0, s.1) };

    let mut vectors: std::collections::BTreeMap<Sector, Vec<Vec<(usize, f64)>>> =
        SECTORS.iter().map(|&s| (s, Vec::new())).collect();
    let mut seen = vec![false; sites.len()];
    for (i, &s) in sites.iter().enumerate() {
        if seen[i] {
            continue;
        }
        let orbit = [s, r1(s), r2(s), r1(r2(s))];
        for o in orbit {
            seen[index[&o]] = true;
        }
        for &(s1, s2) in &SECTORS {
            let chars = [1i64, s1 as i64, s2 as i64, (s1 * s2) as i64];
            let mut coeffs: std::collections::BTreeMap<usize, i64> = std::collections::BTreeMap::new();
            for (o, ch) in orbit.iter().zip(chars) {
                *coeffs.entry(index[o]).or_insert(0) += ch;
            }
            coeffs.retain(|_, v| *v != 0);
            if coeffs.is_empty() {
                continue;
            }
            let norm2: i64 = coeffs.values().map(|v| v * v).sum();
            let norm = (norm2 as f64).sqrt();
            let vec: Vec<(usize, f64)> =
                coeffs.into_iter().map(|(i, v)| (i, v as f64 / norm)).collect();
            // skip duplicates produced when the orbit was entered from another
            // representative (orbit size < 4 collapses some sectors)
            let dup = vectors[&(s1, s2)].iter().any(|u| {
                let mut dot = 0.0;
                let mut uj = 0usize;
                for &(i2, c2) in &vec {
                    while uj < u.len() && u[uj].0 < i2 {
                        uj += 1;
                    }
                    if uj < u.len() && u[uj].0 == i2 {
                        dot += u[uj].1 * c2;
                    }
                }
                dot.abs() > 0.5
            });
            if !dup {
                vectors.get_mut(&(s1, s2)).unwrap().push(vec);
            }
        }
    }
    ParityBasis { vectors }
}

/// D4 irreducible representations for a single region.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub enum D4Irrep {
    A1,
    A2,
    B1,
    B2,
    E,
}

pub const D4_IRREPS: [D4Irrep; 5] = [D4Irrep::A1, D4Irrep::A2, D4Irrep::B1, D4Irrep::B2, D4Irrep::E];

/// Project squared irrep weights out of a site-indexed amplitude vector over
/// a single region. Weights sum to the squared norm of the input.
pub fn d4_project(amplitudes: &[f64], region: &RegionSpec) -> std::collections::BTreeMap<D4Irrep, f64> {
    assert_eq!(amplitudes.len(), region.sites.len());
    let index: std::collections::HashMap<(i64, i64), usize> = region
        .sites
        .iter()
        .copied()
        .enumerate()
        .map(|(i, s)| (s, i))
        .collect();
    let (cx2, cy2) = region.center2;
    // group elements as maps on doubled displacement (dx, dy) = (2x - cx2, 2y - cy2)
    type G = fn((i64, i64)) -> (i64, i64);
    let elems: [G; 8] = [
        |(x, y)| (x, y),    // e
        |(x, y)| (-y, x),   // r90
        |(x, y)| (-x, -y),  // r180
        |(x, y)| (y, -x),   // r270
        |(x, y)| (x, -y),   // sigma_v (x axis)
        |(x, y)| (-x, y),   // sigma_v'
        |(x, y)| (y, x),    // sigma_d
        |(x, y)| (-y, -x),  // sigma_d'
    ];
    // character table rows: [e, r90, r180, r270, sv, sv', sd, sd']
    let chars: [(D4Irrep, [f64; 8]); 5] = [
        (D4Irrep::A1, [1.0, 1.0, 1.0, 1.0, 1.0, 1.0, 1.0, 1.0]),
        (D4Irrep::A2, [1.0, 1.0, 1.0, 1.0, -1.0, -1.0, -1.0, -1.0]),
        (D4Irrep::B1, [1.0, -1.0, 1.0, -1.0, 1.0, 1.0, -1.0, -1.0]),
        (D4Irrep::B2, [1.0, -1.0, 1.0, -1.0, -1.0, -1.0, 1.0, 1.0]),
        (D4Irrep::E, [2.0, 0.0, -2.0, 0.0, 0.0, 0.0, 0.0, 0.0]),
    ];
    let mut out = std::collections::BTreeMap::new();
    for (irrep, row) in chars {
        let dim = if irrep == D4Irrep::E { 2.0 } else { 1.0 };
        // P v, then |P v|^2
        let mut pv = vec![0.0_f64; amplitudes.len()];
        for (i, &(x, y)) in region.sites.iter().enumerate() {
            let d = (2 * x - cx2, 2 * y - cy2);
            for (g, chi) in elems.iter().zip(row) {
                if chi == 0.0 {
                    continue;
                }
                let gd = g(d);
                let gs = ((gd.0 + cx2) / 2, (gd.1 + cy2) / 2);
                let j = index[&gs];
                // chi(g) * amplitude at g^{-1} site accumulated onto i
                pv[i] += chi * amplitudes[j];
            }
        }
        let w: f64 = pv.iter().map(|v| (dim / 8.0) * v).zip(amplitudes).map(|(p, &a)| p * a).sum();
        out.insert(irrep, w);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn n3_is_plus_shape() {
        let r = build_region(3, Boundary::N).unwrap();
        assert_eq!(
            r.sites,
            vec![(-1, 0), (0, -1), (0, 0), (0, 1), (1, 0)]
        );
        assert!((averaged_diameter(&r, DiameterRule::FourConnArithmetic) - 2.0).abs() < 1e-12);
        assert!((r.d_avg - 2.0).abs() < 1e-12);
    }

    #[test]
    fn s3_is_square() {
        let r = build_region(3, Boundary::S).unwrap();
        assert_eq!(r.sites.len(), 9);
        for x in -1..=1 {
            for y in -1..=1 {
                assert!(r.sites.contains(&(x, y)));
            }
        }
    }

    #[test]
    fn n_rejects_even_diameter() {
        assert!(matches!(build_region(4, Boundary::N), Err(GeomError::InvalidDiameter(4))));
    }

    #[test]
    fn n13_site_count_matches_enumeration() {
        let r = build_region(13, Boundary::N).unwrap();
        let brute = {
            let mut c = 0;
            for x in -10i64..=10 {
                for y in -10i64..=10 {
                    if x * x + y * y <= 36 {
                        c += 1;
                    }
                }
            }
            c
        };
        assert_eq!(r.sites.len(), brute);
        assert_eq!(r.sites.len(), 113);
    }

    #[test]
    fn even_s_region_is_d4_symmetric_about_plaquette_center() {
        let r = build_region(4, Boundary::S).unwrap();
        let set: std::collections::HashSet<_> = r.sites.iter().copied().collect();
        for &(x, y) in &r.sites {
            // rotate 90 degrees about (1/2, 1/2): (x,y) -> (1-y, x) in doubled coords
            let dx = 2 * x - 1;
            let dy = 2 * y - 1;
            let rx = (-dy + 1) / 2;
            let ry = (dx + 1) / 2;
            assert!(set.contains(&(rx, ry)), "missing rotation image of ({x},{y})");
        }
        // max axis extent equals d_lat
        let min_x = r.sites.iter().map(|s| s.0).min().unwrap();
        let max_x = r.sites.iter().map(|s| s.0).max().unwrap();
        assert_eq!((max_x - min_x + 1) as usize, 4);
    }

    #[test]
    fn odd_s_contains_n() {
        for d in [3usize, 5, 7, 13] {
            let n = build_region(d, Boundary::N).unwrap();
            let s = build_region(d, Boundary::S).unwrap();
            let set: std::collections::HashSet<_> = s.sites.iter().copied().collect();
            assert!(n.sites.iter().all(|p| set.contains(p)));
            assert!(s.sites.len() > n.sites.len());
        }
    }

    #[test]
    fn davg_curve_normalization_values() {
        // frozen from the separation-curve feasibility analysis
        let cases = [
            (7usize, Boundary::N, 5.42471, 5.4237, 5.4250),
            (9, Boundary::N, 7.25055, 0.0, 0.0),
            (13, Boundary::N, 11.30661, 0.0, 0.0),
            (13, Boundary::S, 12.41407, 0.0, 0.0),
        ];
        for (d, b, expect, lo, hi) in cases {
            let r = build_region(d, b).unwrap();
            assert!(
                (r.d_avg - expect).abs() < 5e-5,
                "d={d} {b:?}: got {}, expect {expect}",
                r.d_avg
            );
            if lo > 0.0 {
                assert!(r.d_avg > lo && r.d_avg < hi, "calibration window");
            }
        }
    }

    #[test]
    fn davg_connectivity_variants() {
        let r = build_region(13, Boundary::N).unwrap();
        let four = averaged_diameter(&r, DiameterRule::FourConnArithmetic);
        let eight = averaged_diameter(&r, DiameterRule::EightConnArithmetic);
        assert!((four - 11.0718).abs() < 2e-4, "four-conn {four}");
        assert!((eight - 10.7795).abs() < 2e-4, "eight-conn {eight}");
        assert!(four < r.d_lat as f64);
    }

    #[test]
    fn davg_s_exceeds_n_at_equal_diameter() {
        for d in [3usize, 7, 13] {
            let n = build_region(d, Boundary::N).unwrap();
            let s = build_region(d, Boundary::S).unwrap();
            assert!(s.d_avg > n.d_avg);
            assert!(averaged_diameter(&n, DiameterRule::FourConnArithmetic) < d as f64 || d == 3);
        }
    }

    #[test]
    fn pair_translation_and_disjointness() {
        let r = build_region(13, Boundary::N).unwrap();
        let p = place_pair(&r, 13);
        assert_eq!(p.delta, 26);
        let a_max = p.sites_a.iter().map(|s| s.0).max().unwrap();
        let b_min = p.sites_b.iter().map(|s| s.0).min().unwrap();
        // rtilde empty columns between the surfaces
        assert_eq!(b_min - a_max - 1, p.rtilde);
        let sa: std::collections::HashSet<_> = p.sites_a.iter().collect();
        assert!(p.sites_b.iter().all(|s| !sa.contains(s)));
    }

    #[test]
    fn single_site_pair_sectors() {
        let p = place_pair_1d(1, 1);
        let basis = parity_basis(&p);
        assert_eq!(basis.sector_dim((1, 1)), 1);
        assert_eq!(basis.sector_dim((1, -1)), 1);
        assert_eq!(basis.sector_dim((-1, 1)), 0);
        assert_eq!(basis.sector_dim((-1, -1)), 0);
    }

    #[test]
    fn d3_pair_sector_dims_sum() {
        let r = build_region(3, Boundary::N).unwrap();
        let p = place_pair(&r, 2);
        let basis = parity_basis(&p);
        assert_eq!(basis.total_dim(), 10);
        assert_eq!(basis.sector_dim((1, 1)), 4);
        assert_eq!(basis.sector_dim((1, -1)), 4);
        assert_eq!(basis.sector_dim((-1, 1)), 1);
        assert_eq!(basis.sector_dim((-1, -1)), 1);
    }

    #[test]
    fn basis_is_orthonormal() {
        let r = build_region(5, Boundary::N).unwrap();
        let p = place_pair(&r, 3);
        let basis = parity_basis(&p);
        assert_eq!(basis.total_dim(), 2 * r.sites.len());
        let mut all: Vec<&Vec<(usize, f64)>> = Vec::new();
        for vs in basis.vectors.values() {
            for v in vs {
                all.push(v);
            }
        }
        for (i, u) in all.iter().enumerate() {
            for (j, v) in all.iter().enumerate() {
                let mut dot = 0.0;
                for &(iu, cu) in u.iter() {
                    for &(iv, cv) in v.iter() {
                        if iu == iv {
                            dot += cu * cv;
                        }
                    }
                }
                let expect = if i == j { 1.0 } else { 0.0 };
                assert!((dot - expect).abs() < 1e-12, "({i},{j}) dot {dot}");
            }
        }
    }

    #[test]
    fn d4_constant_vector_is_pure_a1() {
        let r = build_region(3, Boundary::N).unwrap();
        let amps = vec![1.0; r.sites.len()];
        let w = d4_project(&amps, &r);
        let total: f64 = w.values().sum();
        assert!((w[&D4Irrep::A1] - 5.0).abs() < 1e-12);
        assert!((total - 5.0).abs() < 1e-12);
        for ir in [D4Irrep::A2, D4Irrep::B1, D4Irrep::B2, D4Irrep::E] {
            assert!(w[&ir].abs() < 1e-12);
        }
    }

    #[test]
    fn d4_axis_odd_vector_is_pure_e() {
        // amplitude = x on the |n| = 1 shell: odd under x -> -x, even under y -> -y
        let r = build_region(3, Boundary::N).unwrap();
        let amps: Vec<f64> = r.sites.iter().map(|&(x, _)| x as f64).collect();
        let w = d4_project(&amps, &r);
        let total: f64 = amps.iter().map(|a| a * a).sum();
        assert!((w[&D4Irrep::E] - total).abs() < 1e-12);
        for ir in [D4Irrep::A1, D4Irrep::A2, D4Irrep::B1, D4Irrep::B2] {
            assert!(w[&ir].abs() < 1e-12);
        }
    }

    #[test]
    fn d4_weights_sum_rule_random() {
        let r = build_region(7, Boundary::N).unwrap();
        let mut state = 12345u64;
        let amps: Vec<f64> = r
            .sites
            .iter()
            .map(|_| {
                state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
                ((state >> 17) as f64 / (1u64 << 47) as f64) - 1.0
            })
            .collect();
        let w = d4_project(&amps, &r);
        let total: f64 = amps.iter().map(|a| a * a).sum();
        let sum: f64 = w.values().sum();
        assert!((sum - total).abs() < 1e-10 * total.max(1.0));
    }
}
