//! Ball coverings, discrete and rectifiable Reifenberg checks, packing sums
//! and Minkowski content by ambient cell counting.

use std::fmt::Write as _;
use std::path::Path;

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::jones_beta::{dini_integral, DiscreteMeasure};
use crate::map_model::LatticeBox;
use crate::textio::{as_count, content_lines, numbers, parse_err};
use crate::vecmath::{dist, dist_sq, unit_ball_volume};

/// Radius factor of the shrunken balls that must be pairwise disjoint.
pub const SHRINK: f64 = 0.2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Label {
    Good,
    Bad,
    Final,
    RBall,
}

impl Label {
    #[must_use]
    pub fn token(self) -> &'static str {
        match self {
            Self::Good => "good",
            Self::Bad => "bad",
            Self::Final => "final",
            Self::RBall => "r-ball",
        }
    }

    #[must_use]
    pub fn from_token(s: &str) -> Option<Self> {
        match s {
            "good" => Some(Self::Good),
            "bad" => Some(Self::Bad),
            "final" => Some(Self::Final),
            "r-ball" => Some(Self::RBall),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Ball {
    pub center: Vec<f64>,
    pub radius: f64,
    pub label: Label,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BallCovering {
    pub dim: usize,
    /// Content dimension.
    pub k: usize,
    pub balls: Vec<Ball>,
}

impl BallCovering {
    #[must_use]
    pub fn new(dim: usize, k: usize) -> Self {
        Self {
            dim,
            k,
            balls: Vec::new(),
        }
    }

    pub fn push(&mut self, center: Vec<f64>, radius: f64, label: Label) -> Result<()> {
        if center.len() != self.dim || !(radius > 0.0) || center.iter().any(|c| !c.is_finite()) {
            return Err(Error::Argument(
                "balls need m finite coordinates and a positive radius".into(),
            ));
        }
        self.balls.push(Ball { center, radius, label });
        Ok(())
    }

    #[must_use]
    pub fn len(&self) -> usize {
        self.balls.len()
    }

    #[must_use]
    pub fn is_empty(&self) -> bool {
        self.balls.is_empty()
    }

    /// Sorts by center (lexicographic), then radius, then label.
    pub fn canonicalize(&mut self) {
        self.balls.sort_by(|a, b| {
            a.center
                .iter()
                .zip(&b.center)
                .map(|(x, y)| x.total_cmp(y))
                .find(|o| o.is_ne())
                .unwrap_or(std::cmp::Ordering::Equal)
                .then(a.radius.total_cmp(&b.radius))
                .then(a.label.cmp(&b.label))
        });
    }

    #[must_use]
    pub fn centers(&self) -> Vec<Vec<f64>> {
        self.balls.iter().map(|b| b.center.clone()).collect()
    }
}

/// `Σ r_x^k`.
#[must_use]
pub fn packing_sum(c: &BallCovering) -> f64 {
    c.balls.iter().fold(0.0, |acc, b| acc + b.radius.powi(c.k as i32))
}

/// One atom `ω_k r_x^k` per ball center.
#[must_use]
pub fn covering_measure(c: &BallCovering) -> DiscreteMeasure {
    let wk = unit_ball_volume(c.k);
    let mut mu = DiscreteMeasure::empty(c.dim);
    for b in &c.balls {
        mu.push(b.center.clone(), wk * b.radius.powi(c.k as i32))
            .expect("covering balls are validated on insertion");
    }
    mu
}

/// First pair `(i, j)`, `i < j`, whose shrunken balls `B_{r/5}` intersect.
#[must_use]
pub fn first_overlap(balls: &[Ball]) -> Option<(usize, usize)> {
    let mut order: Vec<usize> = (0..balls.len()).collect();
    let lo = |i: usize| balls[i].center[0] - SHRINK * balls[i].radius;
    order.sort_by(|&a, &b| lo(a).total_cmp(&lo(b)).then(a.cmp(&b)));
    let mut found: Option<(usize, usize)> = None;
    for (pos, &i) in order.iter().enumerate() {
        let hi = balls[i].center[0] + SHRINK * balls[i].radius;
        for &j in &order[pos + 1..] {
            if lo(j) >= hi {
                break;
            }
            let reach = SHRINK * (balls[i].radius + balls[j].radius);
            if dist_sq(&balls[i].center, &balls[j].center) < reach * reach * (1.0 - 1e-12) {
                let pair = (i.min(j), i.max(j));
                if found.is_none_or(|f| pair < f) {
                    found = Some(pair);
                }
            }
        }
    }
    found
}

pub fn check_disjoint(c: &BallCovering) -> Result<()> {
    match first_overlap(&c.balls) {
        Some((first, second)) => Err(Error::CoveringInvalid { first, second }),
        None => Ok(()),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TestBall {
    pub center: Vec<f64>,
    pub radius: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ReifenbergParams {
    /// Threshold δ_R² on the Dini ratio.
    pub delta_sq: f64,
    /// Packing bound C_R.
    pub packing_bound: f64,
    /// Dyadic depth of the Dini sum.
    pub depth: usize,
    /// Test radii are `2^(−j)`, j = 0…levels.
    pub levels: usize,
}

impl Default for ReifenbergParams {
    fn default() -> Self {
        Self {
            delta_sq: 1e-2,
            packing_bound: 40.0,
            depth: 6,
            levels: 3,
        }
    }
}

/// Dyadic radii `2^(−j)`; centers on the lattice of spacing `2^(−j)` with
/// `B_r(x) ⊆ B₂`, keeping balls that contain at least one atom.
#[must_use]
pub fn default_test_balls(mu: &DiscreteMeasure, levels: usize) -> Vec<TestBall> {
    let m = mu.dim();
    let mut out = Vec::new();
    for j in 0..=levels {
        let r = 0.5f64.powi(j as i32);
        let reach = ((2.0 - r) / r).floor() as i64;
        let bx = LatticeBox::new(vec![-reach; m], vec![reach; m]);
        let mut c = vec![0.0; m];
        bx.for_each(|idx| {
            for d in 0..m {
                c[d] = idx[d] as f64 * r;
            }
            if crate::vecmath::norm(&c) + r <= 2.0 * (1.0 + 1e-12) && mu.positions().iter().any(|p| dist(p, &c) <= r) {
                out.push(TestBall {
                    center: c.clone(),
                    radius: r,
                });
            }
        });
    }
    out
}

#[derive(Debug, Clone, Serialize)]
pub struct TestBallResult {
    pub center: Vec<f64>,
    pub radius: f64,
    /// Dini sum over the ball divided by `r^k`.
    pub ratio: f64,
    /// `μ(B_r(x)) / r^k`.
    pub ahlfors: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct ReifenbergReport {
    pub k: usize,
    pub params: ReifenbergParams,
    pub tested: usize,
    pub max_ratio: f64,
    pub max_ahlfors: f64,
    pub packing_sum: f64,
    /// `Σ r_x^k < C_R`.
    pub packing_pass: bool,
    /// `max_ratio < δ_R²`.
    pub pass: bool,
    /// Ten largest ratios, descending.
    pub worst: Vec<TestBallResult>,
}

fn evaluate_test_balls(
    mu: &DiscreteMeasure,
    k: usize,
    depth: usize,
    balls: &[TestBall],
) -> Result<Vec<TestBallResult>> {
    balls
        .par_iter()
        .map(|t| {
            let dini = dini_integral(mu, &t.center, t.radius, k, depth)?;
            let rk = t.radius.powi(k as i32);
            let mass = mu.restrict(&t.center, t.radius).total_mass();
            Ok(TestBallResult {
                center: t.center.clone(),
                radius: t.radius,
                ratio: dini.value / rk,
                ahlfors: mass / rk,
            })
        })
        .collect()
}

fn report(k: usize, params: ReifenbergParams, packing: f64, mut results: Vec<TestBallResult>) -> ReifenbergReport {
    let max_ratio = results.iter().map(|r| r.ratio).fold(0.0, f64::max);
    let max_ahlfors = results.iter().map(|r| r.ahlfors).fold(0.0, f64::max);
    let tested = results.len();
    // Stable sort keeps test-ball order among equal ratios.
    results.sort_by(|a, b| b.ratio.total_cmp(&a.ratio));
    results.truncate(10);
    ReifenbergReport {
        k,
        params,
        tested,
        max_ratio,
        max_ahlfors,
        packing_sum: packing,
        packing_pass: packing < params.packing_bound,
        pass: max_ratio < params.delta_sq,
        worst: results,
    }
}

/// Dini hypothesis of the discrete theorem on the covering measure, plus its
/// packing conclusion. `test_balls` defaults to [`default_test_balls`].
pub fn discrete_reifenberg_check(
    c: &BallCovering,
    params: &ReifenbergParams,
    test_balls: Option<&[TestBall]>,
) -> Result<ReifenbergReport> {
    check_disjoint(c)?;
    let mu = covering_measure(c);
    let owned;
    let balls = match test_balls {
        Some(b) => b,
        None => {
            owned = default_test_balls(&mu, params.levels);
            &owned
        }
    };
    let results = evaluate_test_balls(&mu, c.k, params.depth, balls)?;
    Ok(report(c.k, *params, packing_sum(c), results))
}

/// Same Dini machinery on atoms approximating `λ^k ⌞ S`; the report's
/// `max_ahlfors` is the upper-Ahlfors ratio and `packing_sum` the total mass.
pub fn rectifiable_reifenberg_check(
    points: &DiscreteMeasure,
    k: usize,
    params: &ReifenbergParams,
    test_balls: Option<&[TestBall]>,
) -> Result<ReifenbergReport> {
    let owned;
    let balls = match test_balls {
        Some(b) => b,
        None => {
            owned = default_test_balls(points, params.levels);
            &owned
        }
    };
    let results = evaluate_test_balls(points, k, params.depth, balls)?;
    Ok(report(k, *params, points.total_mass(), results))
}

/// Bitset or sorted-index set over a box of lattice cells.
enum CellSet {
    Dense(Vec<u64>),
    Sparse(Vec<u64>),
}

const DENSE_LIMIT: u128 = 1 << 30;

/// `Vol(B_r(points) ∩ B_ref)` from the cell-centered lattice of spacing `h`
/// anchored at the reference center: cells whose centers lie within `r` of
/// the set and inside the reference ball, times `h^m`.
pub fn minkowski_content(
    points: &[Vec<f64>],
    r: f64,
    reference_center: &[f64],
    reference_radius: f64,
    h: f64,
) -> Result<f64> {
    if !(h > 0.0) || r < 2.0 * h * (1.0 - 1e-12) {
        return Err(Error::Resolution(format!(
            "r = {r} is below twice the lattice spacing {h}"
        )));
    }
    let m = reference_center.len();
    let anchor: Vec<f64> = reference_center.iter().map(|c| c + 0.5 * h).collect();
    let cell_of = |x: f64, d: usize| ((x - anchor[d]) / h).round() as i64;
    let near: Vec<&Vec<f64>> = points
        .iter()
        .filter(|p| dist(p, reference_center) <= reference_radius + r)
        .collect();
    if near.is_empty() {
        return Ok(0.0);
    }
    let mut lo = vec![i64::MAX; m];
    let mut hi = vec![i64::MIN; m];
    for p in &near {
        for d in 0..m {
            lo[d] = lo[d].min(cell_of(p[d] - r, d) - 1);
            hi[d] = hi[d].max(cell_of(p[d] + r, d) + 1);
        }
    }
    for d in 0..m {
        lo[d] = lo[d].max(cell_of(reference_center[d] - reference_radius, d) - 1);
        hi[d] = hi[d].min(cell_of(reference_center[d] + reference_radius, d) + 1);
    }
    if (0..m).any(|d| lo[d] > hi[d]) {
        return Ok(0.0);
    }
    let extent: Vec<u64> = (0..m).map(|d| (hi[d] - lo[d] + 1) as u64).collect();
    let cells: u128 = extent.iter().map(|&e| u128::from(e)).product();
    let mut set = if cells <= DENSE_LIMIT {
        CellSet::Dense(vec![0; (cells as usize).div_ceil(64)])
    } else {
        CellSet::Sparse(Vec::new())
    };
    let r2 = r * r;
    let ref2 = reference_radius * reference_radius;
    let mut q = vec![0.0; m];
    for p in near {
        let plo: Vec<i64> = (0..m).map(|d| cell_of(p[d] - r, d).max(lo[d])).collect();
        let phi: Vec<i64> = (0..m).map(|d| cell_of(p[d] + r, d).min(hi[d])).collect();
        if (0..m).any(|d| plo[d] > phi[d]) {
            continue;
        }
        LatticeBox::new(plo, phi).for_each(|idx| {
            for d in 0..m {
                q[d] = anchor[d] + idx[d] as f64 * h;
            }
            if dist_sq(&q, p) <= r2 && dist_sq(&q, reference_center) <= ref2 {
                let lin = (0..m).fold(0u64, |s, d| s * extent[d] + (idx[d] - lo[d]) as u64);
                match &mut set {
                    CellSet::Dense(bits) => bits[(lin / 64) as usize] |= 1 << (lin % 64),
                    CellSet::Sparse(v) => v.push(lin),
                }
            }
        });
    }
    let count = match set {
        CellSet::Dense(bits) => bits.iter().map(|w| u64::from(w.count_ones())).sum::<u64>(),
        CellSet::Sparse(mut v) => {
            v.sort_unstable();
            v.dedup();
            v.len() as u64
        }
    };
    Ok(count as f64 * h.powi(m as i32))
}

/// Header `m k count`, then center coordinates, radius and label per ball.
pub fn parse_covering(text: &str) -> Result<BallCovering> {
    let mut lines = content_lines(text);
    let (hline, header) = lines.next().ok_or_else(|| parse_err(1, "missing header"))?;
    let hv = numbers(hline, header)?;
    if hv.len() != 3 {
        return Err(parse_err(hline, "header must be `m k count`"));
    }
    let m = as_count(hline, hv[0], "m")?;
    let k = as_count(hline, hv[1], "k")?;
    let count = as_count(hline, hv[2], "count")?;
    if m == 0 || k > m {
        return Err(parse_err(hline, "need m >= 1 and k <= m"));
    }
    let mut c = BallCovering::new(m, k);
    let mut last = hline;
    for (no, line) in lines {
        let (nums, label) = line
            .rsplit_once(char::is_whitespace)
            .ok_or_else(|| parse_err(no, "expected coordinates, radius and label"))?;
        let label = Label::from_token(label.trim())
            .ok_or_else(|| parse_err(no, format!("unknown label {:?}", label.trim())))?;
        let v = numbers(no, nums)?;
        if v.len() != m + 1 {
            return Err(parse_err(
                no,
                format!("expected {} numbers before the label, found {}", m + 1, v.len()),
            ));
        }
        c.push(v[..m].to_vec(), v[m], label)
            .map_err(|e| parse_err(no, e.to_string()))?;
        last = no;
    }
    if c.len() != count {
        return Err(parse_err(
            last,
            format!("header declares {count} balls, file has {}", c.len()),
        ));
    }
    Ok(c)
}

pub fn read_covering(path: &Path) -> Result<BallCovering> {
    parse_covering(&std::fs::read_to_string(path)?)
}

#[must_use]
pub fn format_covering(c: &BallCovering) -> String {
    let mut out = format!("{} {} {}\n", c.dim, c.k, c.len());
    for b in &c.balls {
        let coords: Vec<String> = b.center.iter().map(f64::to_string).collect();
        let _ = writeln!(out, "{} {} {}", coords.join(" "), b.radius, b.label.token());
    }
    out
}

pub fn write_covering(c: &BallCovering, path: &Path) -> Result<()> {
    std::fs::write(path, format_covering(c))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn segment(r: f64, len: f64) -> BallCovering {
        let mut c = BallCovering::new(3, 1);
        let n = (len / r).round() as usize;
        for i in 0..n {
            c.push(vec![-len / 2.0 + (i as f64 + 0.5) * r, 0.0, 0.0], r, Label::RBall)
                .unwrap();
        }
        c
    }

    #[test]
    fn covering_measure_examples() {
        let mut c = BallCovering::new(3, 1);
        c.push(vec![0.0; 3], 1.0, Label::Good).unwrap();
        let mu = covering_measure(&c);
        assert_eq!(mu.len(), 1);
        assert!((mu.total_mass() - 2.0).abs() < 1e-15);
        assert!((covering_measure(&segment(0.1, 1.0)).total_mass() - 2.0).abs() < 1e-12);
        assert!(covering_measure(&BallCovering::new(3, 1)).is_empty());
    }

    #[test]
    fn packing_sum_examples() {
        let mut c = BallCovering::new(3, 1);
        for i in 0..10 {
            c.push(vec![i as f64, 0.0, 0.0], 0.1, Label::Final).unwrap();
        }
        assert!((packing_sum(&c) - 1.0).abs() < 1e-12);
        assert_eq!(packing_sum(&BallCovering::new(3, 1)), 0.0);
    }

    #[test]
    fn overlap_detection() {
        let mut c = BallCovering::new(2, 1);
        c.push(vec![0.0, 0.0], 1.0, Label::Good).unwrap();
        c.push(vec![3.0, 0.0], 1.0, Label::Good).unwrap();
        c.push(vec![0.3, 0.0], 1.0, Label::Good).unwrap();
        assert!(matches!(
            check_disjoint(&c),
            Err(Error::CoveringInvalid { first: 0, second: 2 })
        ));
        c.balls.pop();
        assert!(check_disjoint(&c).is_ok());
    }

    #[test]
    fn collinear_covering_passes() {
        let c = segment(1.0 / 16.0, 2.0);
        let rep = discrete_reifenberg_check(&c, &ReifenbergParams::default(), None).unwrap();
        assert!(rep.max_ratio < 1e-10, "{}", rep.max_ratio);
        assert!(rep.pass && rep.tested > 0);
        assert!((rep.packing_sum / 2.0 - 1.0).abs() < 0.1);
    }

    #[test]
    fn planar_covering_fails_for_curves() {
        let mut c = BallCovering::new(3, 1);
        let r = 1.0 / 16.0;
        for i in 0..16 {
            for j in 0..16 {
                c.push(vec![(i as f64 - 7.5) * r, (j as f64 - 7.5) * r, 0.0], r, Label::RBall)
                    .unwrap();
            }
        }
        let rep = discrete_reifenberg_check(&c, &ReifenbergParams::default(), None).unwrap();
        assert!(!rep.pass, "{}", rep.max_ratio);
        assert_eq!(rep.worst.len(), 10);
    }

    #[test]
    fn minkowski_examples() {
        let h = 1.0 / 128.0;
        let r = 16.0 * h;
        let v = minkowski_content(&[vec![0.0; 3]], r, &[0.0; 3], 1.0, h).unwrap();
        assert!((v / (4.0 / 3.0 * PI * r.powi(3)) - 1.0).abs() < 0.15);
        assert_eq!(minkowski_content(&[], r, &[0.0; 3], 1.0, h).unwrap(), 0.0);
        let seg: Vec<Vec<f64>> = (0..=200).map(|i| vec![-0.5 + i as f64 / 200.0, 0.0, 0.0]).collect();
        let v = minkowski_content(&seg, r, &[0.0; 3], 1.0, h).unwrap();
        let tube = PI * r * r * 1.0 + 4.0 / 3.0 * PI * r.powi(3);
        assert!((v / tube - 1.0).abs() < 0.2, "{}", v / tube);
        assert!(matches!(
            minkowski_content(&[vec![0.0; 3]], h, &[0.0; 3], 1.0, h),
            Err(Error::Resolution(_))
        ));
    }

    #[test]
    fn covering_file_round_trip() {
        let mut c = segment(0.25, 1.0);
        c.balls[1].label = Label::Bad;
        let back = parse_covering(&format_covering(&c)).unwrap();
        assert_eq!(back, c);
        assert!(matches!(
            parse_covering("3 1 1\n0 0 0 0.5 weird\n"),
            Err(Error::Parse { line: 2, .. })
        ));
    }
}
