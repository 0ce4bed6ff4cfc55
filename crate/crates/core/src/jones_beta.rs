//! β₂ numbers of weighted point sets via the inertia matrix, with a
//! brute-force plane-fitting oracle, the dyadic Dini sum and the W-bound check.

use std::fmt::Write as _;
use std::path::Path;

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::energy::w_functional;
use crate::error::{Error, Result};
use crate::linalg::sorted_eigen;
use crate::map_model::SampledMap;
use crate::textio::{as_count, content_lines, numbers, parse_err};
use crate::vecmath::{dist, dist_sq, dot, norm, project_out};

/// Weighted atoms in ℝ^m.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DiscreteMeasure {
    dim: usize,
    positions: Vec<Vec<f64>>,
    weights: Vec<f64>,
    total: f64,
}

impl DiscreteMeasure {
    pub fn new(dim: usize, atoms: Vec<(Vec<f64>, f64)>) -> Result<Self> {
        let mut mu = Self::empty(dim);
        for (p, w) in atoms {
            mu.push(p, w)?;
        }
        Ok(mu)
    }

    #[must_use]
    pub fn empty(dim: usize) -> Self {
        Self {
            dim,
            positions: Vec::new(),
            weights: Vec::new(),
            total: 0.0,
        }
    }

    pub fn push(&mut self, position: Vec<f64>, weight: f64) -> Result<()> {
        if position.len() != self.dim {
            return Err(Error::Argument(format!(
                "atom has {} coordinates, measure dimension is {}",
                position.len(),
                self.dim
            )));
        }
        if !(weight >= 0.0 && weight.is_finite()) || position.iter().any(|x| !x.is_finite()) {
            return Err(Error::Argument("atoms need finite coordinates and weight >= 0".into()));
        }
        self.positions.push(position);
        self.weights.push(weight);
        self.total += weight;
        Ok(())
    }

    #[must_use]
    pub fn dim(&self) -> usize {
        self.dim
    }

    #[must_use]
    pub fn len(&self) -> usize {
        self.weights.len()
    }

    #[must_use]
    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    #[must_use]
    pub fn positions(&self) -> &[Vec<f64>] {
        &self.positions
    }

    #[must_use]
    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    #[must_use]
    pub fn total_mass(&self) -> f64 {
        self.total
    }

    pub fn atoms(&self) -> impl Iterator<Item = (&[f64], f64)> {
        self.positions
            .iter()
            .map(Vec::as_slice)
            .zip(self.weights.iter().copied())
    }

    /// Atoms in the closed ball `B_r(x)`.
    #[must_use]
    pub fn restrict(&self, x: &[f64], r: f64) -> Self {
        let mut out = Self::empty(self.dim);
        let r2 = r * r;
        for (p, w) in self.atoms() {
            if dist_sq(p, x) <= r2 {
                out.positions.push(p.to_vec());
                out.weights.push(w);
                out.total += w;
            }
        }
        out
    }
}

/// Inertia data of a measure.
#[derive(Debug, Clone)]
pub struct MomentAnalysis {
    pub mass: f64,
    pub center_of_mass: Vec<f64>,
    /// `Q(v,w) = ∫ ((y − x_cm)·v)((y − x_cm)·w) dμ`, unnormalized.
    pub q: DMatrix<f64>,
    /// Descending.
    pub eigenvalues: Vec<f64>,
    pub eigenvectors: Vec<Vec<f64>>,
}

/// Inertia data of the whole measure.
pub fn moments(mu: &DiscreteMeasure) -> Result<MomentAnalysis> {
    let m = mu.dim();
    let mass = mu.total_mass();
    if !(mass > 0.0) {
        return Err(Error::EmptyMeasure);
    }
    let mut cm = vec![0.0; m];
    for (p, w) in mu.atoms() {
        for d in 0..m {
            cm[d] += w * p[d];
        }
    }
    cm.iter_mut().for_each(|c| *c /= mass);
    let mut q = DMatrix::zeros(m, m);
    let mut y = vec![0.0; m];
    for (p, w) in mu.atoms() {
        for d in 0..m {
            y[d] = p[d] - cm[d];
        }
        for i in 0..m {
            for j in i..m {
                q[(i, j)] += w * y[i] * y[j];
            }
        }
    }
    for i in 0..m {
        for j in 0..i {
            q[(i, j)] = q[(j, i)];
        }
    }
    let (eigenvalues, eigenvectors) = sorted_eigen(&q, true);
    Ok(MomentAnalysis {
        mass,
        center_of_mass: cm,
        q,
        eigenvalues,
        eigenvectors,
    })
}

/// Inertia data of `μ ⌞ B_r(x)`.
pub fn moment_analysis(mu: &DiscreteMeasure, x: &[f64], r: f64) -> Result<MomentAnalysis> {
    moments(&mu.restrict(x, r))
}

#[derive(Debug, Clone, Serialize)]
pub struct BetaValue {
    pub beta2: f64,
    /// Best plane `x_cm + span(basis)`; absent when the restricted mass is zero.
    pub plane: Option<(Vec<f64>, Vec<Vec<f64>>)>,
    pub empty: bool,
}

fn check_k(mu: &DiscreteMeasure, k: usize) -> Result<()> {
    if k >= mu.dim() {
        Err(Error::Argument(format!(
            "plane dimension {k} must be below m = {}",
            mu.dim()
        )))
    } else {
        Ok(())
    }
}

/// `β² = r^(−k−2) Σ_{i>k} λ_i` of `μ ⌞ B_r(x)`.
pub fn beta2(mu: &DiscreteMeasure, x: &[f64], r: f64, k: usize) -> Result<BetaValue> {
    check_k(mu, k)?;
    match moment_analysis(mu, x, r) {
        Ok(a) => {
            let tail: f64 = a.eigenvalues[k..].iter().fold(0.0, |s, l| s + l.max(0.0));
            Ok(BetaValue {
                beta2: tail * r.powi(-(k as i32) - 2),
                plane: Some((a.center_of_mass, a.eigenvectors[..k].to_vec())),
                empty: false,
            })
        }
        Err(Error::EmptyMeasure) => Ok(BetaValue {
            beta2: 0.0,
            plane: None,
            empty: true,
        }),
        Err(e) => Err(e),
    }
}

/// β² value only.
pub fn beta2_value(mu: &DiscreteMeasure, x: &[f64], r: f64, k: usize) -> Result<f64> {
    beta2(mu, x, r, k).map(|b| b.beta2)
}

const GOLDEN: f64 = 0.618_033_988_749_894_9;
const ANGLE_SAMPLES: usize = 16;
const MAX_SWEEPS: usize = 200;

/// Minimizes `∫ d²(y, V) dμ` over affine k-planes by coordinate descent on
/// Givens angles of a full orthonormal frame, from `restarts` random frames.
/// For a fixed frame the optimal offset is the mean of the transverse
/// coordinates, so only the frame is searched.
pub fn beta2_bruteforce(mu: &DiscreteMeasure, x: &[f64], r: f64, k: usize, restarts: usize, seed: u64) -> Result<f64> {
    check_k(mu, k)?;
    let local = mu.restrict(x, r);
    if local.total_mass() <= 0.0 {
        return Ok(0.0);
    }
    let m = mu.dim();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut best = f64::INFINITY;
    for _ in 0..restarts.max(1) {
        let mut frame = random_frame(m, &mut rng);
        let mut cost = plane_cost(&local, &frame, k);
        for _ in 0..MAX_SWEEPS {
            let before = cost;
            for i in 0..k {
                for j in k..m {
                    cost = optimize_rotation(&local, &mut frame, k, i, j, cost);
                }
            }
            if before - cost <= 1e-15 * before.abs().max(1e-300) {
                break;
            }
        }
        best = best.min(cost);
    }
    Ok(best * r.powi(-(k as i32) - 2))
}

fn random_frame(m: usize, rng: &mut ChaCha8Rng) -> Vec<Vec<f64>> {
    let mut frame: Vec<Vec<f64>> = Vec::with_capacity(m);
    while frame.len() < m {
        let mut v: Vec<f64> = (0..m).map(|_| rng.gen_range(-1.0..1.0)).collect();
        project_out(&mut v, &frame);
        project_out(&mut v, &frame);
        let len = norm(&v);
        if len > 1e-3 {
            v.iter_mut().for_each(|c| *c /= len);
            frame.push(v);
        }
    }
    frame
}

/// `Σ w |P⊥(y − c)|²` with `P⊥` onto `frame[k..]` and `c` the optimal offset.
fn plane_cost(mu: &DiscreteMeasure, frame: &[Vec<f64>], k: usize) -> f64 {
    let mass = mu.total_mass();
    let mut total = 0.0;
    for e in &frame[k..] {
        let mut s1 = 0.0;
        let mut s2 = 0.0;
        for (p, w) in mu.atoms() {
            let c = dot(p, e);
            s1 += w * c;
            s2 += w * c * c;
        }
        total += s2 - s1 * s1 / mass;
    }
    total.max(0.0)
}

fn rotated(frame: &[Vec<f64>], i: usize, j: usize, angle: f64) -> Vec<Vec<f64>> {
    let (s, c) = angle.sin_cos();
    let mut out = frame.to_vec();
    for d in 0..frame[i].len() {
        out[i][d] = c * frame[i][d] + s * frame[j][d];
        out[j][d] = -s * frame[i][d] + c * frame[j][d];
    }
    out
}

fn optimize_rotation(
    mu: &DiscreteMeasure,
    frame: &mut Vec<Vec<f64>>,
    k: usize,
    i: usize,
    j: usize,
    current: f64,
) -> f64 {
    let f = |a: f64| plane_cost(mu, &rotated(frame, i, j, a), k);
    let step = std::f64::consts::PI / ANGLE_SAMPLES as f64;
    let mut best = (0.0, current);
    for s in 1..ANGLE_SAMPLES {
        let a = -std::f64::consts::FRAC_PI_2 + s as f64 * step;
        let v = f(a);
        if v < best.1 {
            best = (a, v);
        }
    }
    let (mut lo, mut hi) = (best.0 - step, best.0 + step);
    let mut a1 = hi - GOLDEN * (hi - lo);
    let mut a2 = lo + GOLDEN * (hi - lo);
    let (mut f1, mut f2) = (f(a1), f(a2));
    for _ in 0..80 {
        if f1 <= f2 {
            hi = a2;
            a2 = a1;
            f2 = f1;
            a1 = hi - GOLDEN * (hi - lo);
            f1 = f(a1);
        } else {
            lo = a1;
            a1 = a2;
            f1 = f2;
            a2 = lo + GOLDEN * (hi - lo);
            f2 = f(a2);
        }
    }
    let (a, v) = if f1 <= f2 { (a1, f1) } else { (a2, f2) };
    let (a, v) = if v < best.1 { (a, v) } else { best };
    if v < current {
        *frame = rotated(frame, i, j, a);
        v
    } else {
        current
    }
}

/// Dyadic Dini sum `∫_{B_r(x)} Σ_{j=0}^{J} β²(y, r 2^(−j)) log 2 dμ(y)`.
#[derive(Debug, Clone, Serialize)]
pub struct DiniIntegral {
    pub value: f64,
    /// Contribution of scale `r 2^(−j)`, indexed by j.
    pub per_scale: Vec<f64>,
    /// `(atom index, contribution)` for atoms in `B_r(x)`, in input order.
    pub per_atom: Vec<(usize, f64)>,
    pub depth: usize,
    /// Smallest scale summed; finer scales are truncated.
    pub truncation_scale: f64,
}

pub fn dini_integral(mu: &DiscreteMeasure, x: &[f64], r: f64, k: usize, depth: usize) -> Result<DiniIntegral> {
    check_k(mu, k)?;
    if depth < 3 {
        return Err(Error::Argument("Dini depth must be at least 3".into()));
    }
    let inside: Vec<usize> = (0..mu.len()).filter(|&i| dist(&mu.positions[i], x) <= r).collect();
    let local = mu.restrict(x, 2.0 * r);
    let rows: Vec<Vec<f64>> = inside
        .par_iter()
        .map(|&i| {
            let y = &mu.positions[i];
            (0..=depth)
                .map(|j| {
                    let s = r * 0.5f64.powi(j as i32);
                    beta2_value(&local, y, s, k).map(|b| b * std::f64::consts::LN_2 * mu.weights[i])
                })
                .collect::<Result<Vec<f64>>>()
        })
        .collect::<Result<_>>()?;
    let mut per_scale = vec![0.0; depth + 1];
    let mut per_atom = Vec::with_capacity(inside.len());
    for (&i, row) in inside.iter().zip(&rows) {
        for (acc, v) in per_scale.iter_mut().zip(row) {
            *acc += v;
        }
        per_atom.push((i, row.iter().sum()));
    }
    Ok(DiniIntegral {
        value: per_atom.iter().map(|(_, v)| v).sum(),
        per_scale,
        per_atom,
        depth,
        truncation_scale: r * 0.5f64.powi(depth as i32),
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct WBoundReport {
    /// β²(x, r).
    pub lhs: f64,
    /// `∫_{B_r(x)} W_r dμ`.
    pub w_integral: f64,
    /// `C₁ r^(−k) ∫ W_r dμ`.
    pub rhs: f64,
    pub constant: f64,
    pub pass: bool,
}

/// Both sides of `β²(x,r) ≤ C₁ r^(−k) ∫_{B_r(x)} W_r dμ`. The symmetry
/// hypotheses on the ball are the caller's responsibility.
pub fn w_bound_check(
    map: &SampledMap,
    mu: &DiscreteMeasure,
    x: &[f64],
    r: f64,
    k: usize,
    c1: f64,
) -> Result<WBoundReport> {
    if !(c1 > 0.0) {
        return Err(Error::Argument("C₁ must be positive".into()));
    }
    let lhs = beta2_value(mu, x, r, k)?;
    let local = mu.restrict(x, r);
    let w_values = local
        .positions()
        .par_iter()
        .map(|y| w_functional(map, y, r))
        .collect::<Result<Vec<f64>>>()?;
    let w_integral: f64 = w_values.iter().zip(local.weights()).fold(0.0, |s, (v, w)| s + v * w);
    let rhs = c1 * r.powi(-(k as i32)) * w_integral;
    Ok(WBoundReport {
        lhs,
        w_integral,
        rhs,
        constant: c1,
        pass: lhs <= rhs,
    })
}

/// Smallest C₁ satisfying every `(β², r^(−k) ∫W dμ)` pair; `None` if some
/// pair has positive β² and zero right side.
#[must_use]
pub fn fit_w_constant(pairs: &[(f64, f64)]) -> Option<f64> {
    let mut c: f64 = 0.0;
    for &(lhs, unit_rhs) in pairs {
        if lhs <= 0.0 {
            continue;
        }
        if unit_rhs <= 0.0 {
            return None;
        }
        c = c.max(lhs / unit_rhs);
    }
    Some(c)
}

/// One row of a β profile.
#[derive(Debug, Clone, Serialize)]
pub struct BetaProfileRow {
    pub center: Vec<f64>,
    pub scale: f64,
    pub k: usize,
    pub beta2: f64,
    /// `Σ_{i≤j} β²(center, r 2^(−i)) log 2`.
    pub dini_partial: f64,
}

/// β² at `r 2^(−j)`, j = 0…depth, for each center, in input order.
pub fn beta_profile(
    mu: &DiscreteMeasure,
    centers: &[Vec<f64>],
    r: f64,
    k: usize,
    depth: usize,
) -> Result<Vec<BetaProfileRow>> {
    check_k(mu, k)?;
    let rows = centers
        .par_iter()
        .map(|c| {
            let mut partial = 0.0;
            (0..=depth)
                .map(|j| {
                    let s = r * 0.5f64.powi(j as i32);
                    let b = beta2_value(mu, c, s, k)?;
                    partial += b * std::f64::consts::LN_2;
                    Ok(BetaProfileRow {
                        center: c.clone(),
                        scale: s,
                        k,
                        beta2: b,
                        dini_partial: partial,
                    })
                })
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(rows.into_iter().flatten().collect())
}

#[must_use]
pub fn beta_profile_csv(m: usize, rows: &[BetaProfileRow]) -> String {
    let mut head: Vec<String> = (0..m).map(|i| format!("x{i}")).collect();
    head.extend(["scale", "k", "beta2", "dini_partial"].map(String::from));
    let mut out = head.join(",") + "\n";
    for row in rows {
        let c: Vec<String> = row.center.iter().map(f64::to_string).collect();
        let _ = writeln!(
            out,
            "{},{},{},{},{}",
            c.join(","),
            row.scale,
            row.k,
            row.beta2,
            row.dini_partial
        );
    }
    out
}

/// Header `m count`, then `m` coordinates and a weight per atom.
pub fn parse_measure(text: &str) -> Result<DiscreteMeasure> {
    let mut lines = content_lines(text);
    let (hline, header) = lines.next().ok_or_else(|| parse_err(1, "missing header"))?;
    let hv = numbers(hline, header)?;
    if hv.len() != 2 {
        return Err(parse_err(hline, "header must be `m count`"));
    }
    let m = as_count(hline, hv[0], "m")?;
    let count = as_count(hline, hv[1], "count")?;
    if m == 0 {
        return Err(parse_err(hline, "m must be positive"));
    }
    let mut mu = DiscreteMeasure::empty(m);
    let mut last = hline;
    for (no, line) in lines {
        let v = numbers(no, line)?;
        if v.len() != m + 1 {
            return Err(parse_err(no, format!("expected {} fields, found {}", m + 1, v.len())));
        }
        mu.push(v[..m].to_vec(), v[m])
            .map_err(|e| parse_err(no, e.to_string()))?;
        last = no;
    }
    if mu.len() != count {
        return Err(parse_err(
            last,
            format!("header declares {count} atoms, file has {}", mu.len()),
        ));
    }
    Ok(mu)
}

pub fn read_measure(path: &Path) -> Result<DiscreteMeasure> {
    parse_measure(&std::fs::read_to_string(path)?)
}

#[must_use]
pub fn format_measure(mu: &DiscreteMeasure) -> String {
    let mut out = format!("{} {}\n", mu.dim(), mu.len());
    for (p, w) in mu.atoms() {
        let fields: Vec<String> = p.iter().chain(std::iter::once(&w)).map(f64::to_string).collect();
        let _ = writeln!(out, "{}", fields.join(" "));
    }
    out
}

pub fn write_measure(mu: &DiscreteMeasure, path: &Path) -> Result<()> {
    std::fs::write(path, format_measure(mu))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn two_atoms(t: f64) -> DiscreteMeasure {
        DiscreteMeasure::new(3, vec![(vec![t, 0.0, 0.0], 0.5), (vec![-t, 0.0, 0.0], 0.5)]).unwrap()
    }

    #[test]
    fn two_atom_moments() {
        let a = moments(&two_atoms(0.7)).unwrap();
        assert!(a.center_of_mass.iter().all(|c| c.abs() < 1e-15));
        assert!((a.eigenvalues[0] - 0.49).abs() < 1e-14);
        assert!(a.eigenvalues[1].abs() < 1e-14 && a.eigenvalues[2].abs() < 1e-14);
        assert!((a.eigenvectors[0][0].abs() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn two_atom_beta() {
        let mu = two_atoms(0.5);
        let b = beta2(&mu, &[0.0; 3], 1.0, 0).unwrap();
        assert!((b.beta2 - 0.25).abs() < 1e-10);
        assert_eq!(beta2(&mu, &[0.0; 3], 1.0, 1).unwrap().beta2, 0.0);
        let brute = beta2_bruteforce(&mu, &[0.0; 3], 1.0, 0, 50, 1).unwrap();
        assert!((brute - 0.25).abs() < 1e-10);
    }

    #[test]
    fn single_atom_and_empty() {
        let mu = DiscreteMeasure::new(3, vec![(vec![0.1, 0.2, 0.3], 2.0)]).unwrap();
        let a = moments(&mu).unwrap();
        assert!(a.q.iter().all(|&v| v == 0.0));
        let b = beta2(&mu, &[5.0, 0.0, 0.0], 1.0, 0).unwrap();
        assert!(b.empty && b.beta2 == 0.0 && b.plane.is_none());
        assert!(matches!(
            moment_analysis(&mu, &[5.0, 0.0, 0.0], 1.0),
            Err(Error::EmptyMeasure)
        ));
        assert!(beta2(&mu, &[0.0; 3], 1.0, 3).is_err());
    }

    #[test]
    fn planar_measure_has_zero_tail() {
        let atoms = (0..5)
            .flat_map(|i| (0..5).map(move |j| (vec![i as f64 * 0.1, j as f64 * 0.1 - 0.2, 0.3], 1.0)))
            .collect();
        let mu = DiscreteMeasure::new(3, atoms).unwrap();
        let b = beta2(&mu, &[0.2, 0.0, 0.3], 1.0, 2).unwrap();
        assert!(b.beta2 < 1e-14);
        let brute = beta2_bruteforce(&mu, &[0.2, 0.0, 0.3], 1.0, 2, 50, 3).unwrap();
        assert!(brute < 1e-12, "{brute}");
    }

    #[test]
    fn bruteforce_matches_on_random_measures() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for trial in 0..5 {
            let atoms = (0..10)
                .map(|_| {
                    (
                        (0..3).map(|_| rng.gen_range(-0.5..0.5)).collect(),
                        rng.gen_range(0.1..1.0),
                    )
                })
                .collect();
            let mu = DiscreteMeasure::new(3, atoms).unwrap();
            for k in 0..3 {
                let exact = beta2_value(&mu, &[0.0; 3], 1.0, k).unwrap();
                let brute = beta2_bruteforce(&mu, &[0.0; 3], 1.0, k, 50, trial).unwrap();
                assert!((brute - exact).abs() <= 1e-4 * exact, "k={k}: {exact} vs {brute}");
            }
        }
    }

    #[test]
    fn dini_of_circle_decreases_with_radius() {
        let n = 64;
        let atoms = (0..n)
            .map(|i| {
                let a = 2.0 * std::f64::consts::PI * i as f64 / n as f64;
                (vec![a.cos(), a.sin(), 0.0], 2.0 * std::f64::consts::PI / n as f64)
            })
            .collect();
        let mu = DiscreteMeasure::new(3, atoms).unwrap();
        let v: Vec<f64> = [1.0, 0.5, 0.25]
            .iter()
            .map(|&r| dini_integral(&mu, &[1.0, 0.0, 0.0], r, 1, 4).unwrap().value)
            .collect();
        assert!(v[2] > 0.0 && v[0] > v[1] && v[1] > v[2], "{v:?}");
        let d = dini_integral(&mu, &[1.0, 0.0, 0.0], 0.5, 1, 4).unwrap();
        let by_atom: f64 = d.per_atom.iter().map(|(_, c)| c).sum();
        let by_scale: f64 = d.per_scale.iter().sum();
        assert!((by_atom - by_scale).abs() < 1e-14 * d.value.max(1.0));
    }

    #[test]
    fn measure_file_round_trip() {
        let mu = two_atoms(0.25);
        assert_eq!(parse_measure(&format_measure(&mu)).unwrap(), mu);
        let bad = "3 2\n0 0 0 1\n0 0 1\n";
        assert!(matches!(parse_measure(bad), Err(Error::Parse { line: 3, .. })));
    }

    #[test]
    fn collinear_profile_is_zero() {
        let atoms = (0..10).map(|i| (vec![i as f64 * 0.1, 0.0, 0.0], 1.0)).collect();
        let mu = DiscreteMeasure::new(3, atoms).unwrap();
        let rows = beta_profile(&mu, &[vec![0.5, 0.0, 0.0]], 1.0, 1, 3).unwrap();
        assert_eq!(rows.len(), 4);
        assert!(rows.iter().all(|r| r.beta2 < 1e-28));
        assert!(beta_profile_csv(3, &rows).starts_with("x0,x1,x2,scale,k,beta2,dini_partial\n"));
    }
}
