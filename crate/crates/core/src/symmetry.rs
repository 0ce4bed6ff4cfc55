//! Quantitative symmetry of balls, strata membership, pinched sets and
//! effective span.
//!
//! The distance of `u|B_r(x)` to k-symmetric maps is bounded above by an
//! averaging approximant: `V` is spanned by the k lowest-energy directions of
//! the invariant energy matrix, and `h(y)` averages `u` over `V`-translates and
//! along the transverse ray through `y`. The mean-square distance is evaluated
//! on a cell-centered local lattice of the ball.

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::Serialize;

use crate::energy::theta_hat;
use crate::error::{Error, Result};
use crate::linalg::{gauss_legendre, sorted_eigen};
use crate::map_model::quadrature::integrate_ball;
use crate::map_model::{Sample, SampledMap};
use crate::vecmath::{dist, dist_to_plane, dot, norm, project_out, sub, unit_ball_volume};

/// Resolution of the symmetry-distance evaluation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SymmetryQuadrature {
    /// Local lattice cells per ball radius.
    pub cells_per_radius: f64,
    /// Gauss–Legendre nodes along each transverse ray.
    pub radial_nodes: usize,
    /// Cell-centered samples per invariant axis.
    pub translate_nodes: usize,
}

impl Default for SymmetryQuadrature {
    fn default() -> Self {
        Self {
            cells_per_radius: 5.0,
            radial_nodes: 6,
            translate_nodes: 4,
        }
    }
}

/// The averaging approximant of a fixed order on one ball.
#[derive(Debug, Clone)]
pub struct HomogeneousApproximant {
    pub center: Vec<f64>,
    pub radius: f64,
    /// Orthonormal basis of the invariant subspace.
    pub invariant: Vec<Vec<f64>>,
    /// Orthonormal basis of its complement.
    pub transverse: Vec<Vec<f64>>,
    /// Set for the order-m (constant) approximant.
    pub constant: Option<Vec<f64>>,
    translates: Vec<(Vec<f64>, f64)>,
    ray_nodes: Vec<f64>,
    ray_weights: Vec<f64>,
}

impl HomogeneousApproximant {
    fn new(
        center: &[f64],
        radius: f64,
        invariant: Vec<Vec<f64>>,
        transverse: Vec<Vec<f64>>,
        quad: &SymmetryQuadrature,
    ) -> Self {
        let j = invariant.len();
        let m = center.len();
        let mut translates = Vec::new();
        if j == 0 {
            translates.push((vec![0.0; m], radius));
        } else if j < m {
            let q = quad.translate_nodes.max(1) as i64;
            let step = 2.0 * radius / q as f64;
            let bx = crate::map_model::LatticeBox::new(vec![0; j], vec![q - 1; j]);
            bx.for_each(|idx| {
                let coords: Vec<f64> = idx.iter().map(|&i| -radius + (i as f64 + 0.5) * step).collect();
                let t2: f64 = coords.iter().map(|c| c * c).sum();
                if t2 < radius * radius {
                    let mut t = vec![0.0; m];
                    for (c, b) in coords.iter().zip(&invariant) {
                        for d in 0..m {
                            t[d] += c * b[d];
                        }
                    }
                    translates.push((t, (radius * radius - t2).sqrt()));
                }
            });
        }
        let (ray_nodes, ray_weights) = gauss_legendre(quad.radial_nodes.max(1));
        Self {
            center: center.to_vec(),
            radius,
            invariant,
            transverse,
            constant: None,
            translates,
            ray_nodes,
            ray_weights,
        }
    }

    #[must_use]
    pub fn order(&self) -> usize {
        self.invariant.len()
    }

    /// Approximant value at `y`; `sample` is scratch space for map evaluation.
    pub fn evaluate(&self, map: &SampledMap, y: &[f64], sample: &mut Sample, out: &mut [f64]) {
        if let Some(c) = &self.constant {
            out.copy_from_slice(c);
            return;
        }
        let m = self.center.len();
        let j = self.order();
        let mut omega = vec![0.0; m];
        for e in &self.transverse {
            let c: f64 = (0..m).map(|d| (y[d] - self.center[d]) * e[d]).sum();
            for d in 0..m {
                omega[d] += c * e[d];
            }
        }
        let len = norm(&omega);
        if len < 1e-14 * self.radius {
            omega.copy_from_slice(&self.transverse[0]);
        } else {
            omega.iter_mut().for_each(|x| *x /= len);
        }
        let power = (m - j - 1) as i32;
        out.iter_mut().for_each(|x| *x = 0.0);
        let mut p = vec![0.0; m];
        for (t, smax) in &self.translates {
            for (xl, wl) in self.ray_nodes.iter().zip(&self.ray_weights) {
                let s = smax * xl;
                let w = wl * smax * s.powi(power);
                for d in 0..m {
                    p[d] = self.center[d] + t[d] + s * omega[d];
                }
                map.value_at(&p, sample);
                for (o, v) in out.iter_mut().zip(&sample.value) {
                    *o += w * v;
                }
            }
        }
        normalize_or_axis(out);
    }
}

fn normalize_or_axis(v: &mut [f64]) {
    let len = norm(v);
    if len > 1e-300 {
        v.iter_mut().for_each(|x| *x /= len);
    } else {
        v.iter_mut().for_each(|x| *x = 0.0);
        v[0] = 1.0;
    }
}

/// Cell-centered samples of `u` on `B_r(x)`.
struct LocalSamples {
    points: Vec<Vec<f64>>,
    values: Vec<Vec<f64>>,
    cell_volume: f64,
    normalizer: f64,
}

fn local_samples(map: &SampledMap, x: &[f64], r: f64, quad: &SymmetryQuadrature) -> LocalSamples {
    let m = map.dim();
    let step = r / quad.cells_per_radius;
    let anchor: Vec<f64> = x.iter().map(|c| c + 0.5 * step).collect();
    let bx = crate::map_model::sampled_ball_box(&anchor, step, x, r);
    let mut points = Vec::new();
    let mut values = Vec::new();
    let mut s = map.new_sample();
    let mut p = vec![0.0; m];
    bx.for_each(|idx| {
        for d in 0..m {
            p[d] = anchor[d] + idx[d] as f64 * step;
        }
        if dist(&p, x) <= r {
            map.value_at(&p, &mut s);
            points.push(p.clone());
            values.push(s.value.clone());
        }
    });
    LocalSamples {
        points,
        values,
        cell_volume: step.powi(m as i32),
        normalizer: unit_ball_volume(m) * r.powi(m as i32),
    }
}

impl LocalSamples {
    fn mean(&self) -> Vec<f64> {
        let n = self.values.first().map_or(1, Vec::len);
        let mut acc = vec![0.0; n];
        for v in &self.values {
            for (a, x) in acc.iter_mut().zip(v) {
                *a += x;
            }
        }
        normalize_or_axis(&mut acc);
        acc
    }

    fn distance(&self, map: &SampledMap, h: &HomogeneousApproximant) -> f64 {
        let mut s = map.new_sample();
        let mut hv = vec![0.0; map.target_dim()];
        let mut total = 0.0;
        for (p, u) in self.points.iter().zip(&self.values) {
            h.evaluate(map, p, &mut s, &mut hv);
            total += u.iter().zip(&hv).map(|(a, b)| (a - b) * (a - b)).sum::<f64>();
        }
        total * self.cell_volume / self.normalizer
    }
}

/// `E_ij = ∫_{B_r(x)} ⟨∂_i u, ∂_j u⟩`; the directional energy along unit `v` is `vᵀEv`.
pub fn invariant_energy_matrix(map: &SampledMap, x: &[f64], r: f64) -> Result<DMatrix<f64>> {
    map.domain().check_ball(x, r)?;
    let m = map.dim();
    let n = map.target_dim();
    let acc = integrate_ball(map, x, r, m * m, false, |_, s: &Sample, w, acc| {
        for i in 0..m {
            for j in i..m {
                let mut e = 0.0;
                for a in 0..n {
                    e += s.jacobian[i * n + a] * s.jacobian[j * n + a];
                }
                acc[i * m + j] += w * e;
            }
        }
    });
    let mut e = DMatrix::zeros(m, m);
    for i in 0..m {
        for j in i..m {
            e[(i, j)] = acc[i * m + j];
            e[(j, i)] = acc[i * m + j];
        }
    }
    Ok(e)
}

/// Low-energy directions first.
fn energy_directions(map: &SampledMap, x: &[f64], r: f64) -> Result<Vec<Vec<f64>>> {
    let e = invariant_energy_matrix(map, x, r)?;
    Ok(sorted_eigen(&e, false).1)
}

fn approximant_of_order(
    x: &[f64],
    r: f64,
    directions: &[Vec<f64>],
    order: usize,
    quad: &SymmetryQuadrature,
    samples: &LocalSamples,
) -> HomogeneousApproximant {
    let mut h = HomogeneousApproximant::new(x, r, directions[..order].to_vec(), directions[order..].to_vec(), quad);
    if order == x.len() {
        h.constant = Some(samples.mean());
    }
    h
}

#[derive(Debug, Clone)]
pub struct SymmetryVerdict {
    pub center: Vec<f64>,
    pub scale: f64,
    pub order: usize,
    /// Upper bound for the normalized mean-square distance to k-symmetric maps.
    pub distance: f64,
    /// The k lowest-energy directions.
    pub subspace: Vec<Vec<f64>>,
    /// Order of the approximant attaining `distance` (≥ `order`).
    pub achieved_order: usize,
    /// Raw distance of the order-j approximant for j = order..=m.
    pub order_distances: Vec<f64>,
    pub approximant: HomogeneousApproximant,
}

fn check_order(map: &SampledMap, k: usize) -> Result<()> {
    if k > map.dim() {
        Err(Error::Argument(format!("order {k} exceeds dimension {}", map.dim())))
    } else {
        Ok(())
    }
}

/// ε̂ for order 0 with the pure ray-averaging approximant.
pub fn best_homogeneous(map: &SampledMap, x: &[f64], r: f64) -> Result<(HomogeneousApproximant, f64)> {
    best_homogeneous_with(map, x, r, &SymmetryQuadrature::default())
}

pub fn best_homogeneous_with(
    map: &SampledMap,
    x: &[f64],
    r: f64,
    quad: &SymmetryQuadrature,
) -> Result<(HomogeneousApproximant, f64)> {
    map.domain().check_ball(x, r)?;
    let m = map.dim();
    let axes: Vec<Vec<f64>> = (0..m)
        .map(|i| {
            let mut e = vec![0.0; m];
            e[i] = 1.0;
            e
        })
        .collect();
    let samples = local_samples(map, x, r, quad);
    let h = approximant_of_order(x, r, &axes, 0, quad, &samples);
    let eps = samples.distance(map, &h);
    Ok((h, eps))
}

pub fn ksym_distance(map: &SampledMap, x: &[f64], r: f64, k: usize) -> Result<SymmetryVerdict> {
    ksym_distance_with(map, x, r, k, &SymmetryQuadrature::default())
}

/// Every order-j approximant with j ≥ k is k-symmetric, so the reported
/// distance is the minimum over j ∈ [k, m]; it is nondecreasing in k.
pub fn ksym_distance_with(
    map: &SampledMap,
    x: &[f64],
    r: f64,
    k: usize,
    quad: &SymmetryQuadrature,
) -> Result<SymmetryVerdict> {
    check_order(map, k)?;
    map.domain().check_ball(x, r)?;
    let m = map.dim();
    let directions = energy_directions(map, x, r)?;
    let samples = local_samples(map, x, r, quad);
    let mut best: Option<(f64, HomogeneousApproximant)> = None;
    let mut order_distances = Vec::new();
    for j in k..=m {
        let h = approximant_of_order(x, r, &directions, j, quad, &samples);
        let eps = samples.distance(map, &h);
        order_distances.push(eps);
        if best.as_ref().is_none_or(|(b, _)| eps < *b) {
            best = Some((eps, h));
        }
    }
    let (distance, approximant) = best.expect("at least one order");
    Ok(SymmetryVerdict {
        center: x.to_vec(),
        scale: r,
        order: k,
        distance,
        subspace: directions[..k].to_vec(),
        achieved_order: approximant.order(),
        order_distances,
        approximant,
    })
}

/// Returns the first order-j distance (j ≥ k) that is ≤ `eps`, trying the
/// cheap constant approximant first, then increasing j.
pub fn find_symmetry(
    map: &SampledMap,
    x: &[f64],
    r: f64,
    k: usize,
    eps: f64,
    quad: &SymmetryQuadrature,
) -> Result<Option<f64>> {
    check_order(map, k)?;
    map.domain().check_ball(x, r)?;
    let samples = local_samples(map, x, r, quad);
    let d = constant_distance(map, x, r, quad, &samples);
    if d <= eps {
        return Ok(Some(d));
    }
    nonconstant_symmetry(map, x, r, k, eps, quad, &samples)
}

fn constant_distance(map: &SampledMap, x: &[f64], r: f64, quad: &SymmetryQuadrature, samples: &LocalSamples) -> f64 {
    let mut h = approximant_of_order(x, r, &[], 0, quad, samples);
    h.constant = Some(samples.mean());
    samples.distance(map, &h)
}

fn nonconstant_symmetry(
    map: &SampledMap,
    x: &[f64],
    r: f64,
    k: usize,
    eps: f64,
    quad: &SymmetryQuadrature,
    samples: &LocalSamples,
) -> Result<Option<f64>> {
    let m = map.dim();
    if k == m {
        return Ok(None);
    }
    let directions = energy_directions(map, x, r)?;
    for j in k..m {
        let h = approximant_of_order(x, r, &directions, j, quad, samples);
        let d = samples.distance(map, &h);
        if d <= eps {
            return Ok(Some(d));
        }
    }
    Ok(None)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StrataMembership {
    pub point: Vec<f64>,
    pub k: usize,
    pub epsilon: f64,
    pub r: f64,
    pub member: bool,
    /// Largest dyadic scale at which `B_s(x)` is (k+1, ε)-symmetric.
    pub witness_scale: Option<f64>,
    pub witness_distance: Option<f64>,
}

/// Dyadic scales `2^(−j)`, j ≥ 1, in `[r, 1)`, descending.
#[must_use]
pub fn dyadic_scales(r: f64) -> Vec<f64> {
    let mut out = Vec::new();
    let mut s = 0.5;
    while s >= r * (1.0 - 1e-12) {
        out.push(s);
        s *= 0.5;
    }
    out
}

pub fn strata_membership(map: &SampledMap, x: &[f64], k: usize, eps: f64, r: f64) -> Result<StrataMembership> {
    strata_membership_with(map, x, k, eps, r, &SymmetryQuadrature::default())
}

/// `x ∈ S^k_{ε,r}` iff no dyadic `s ∈ [r, 1)` makes `B_s(x)` (k+1, ε)-symmetric.
pub fn strata_membership_with(
    map: &SampledMap,
    x: &[f64],
    k: usize,
    eps: f64,
    r: f64,
    quad: &SymmetryQuadrature,
) -> Result<StrataMembership> {
    check_strata_args(map, x, k, r)?;
    for s in dyadic_scales(r) {
        if let Some(d) = find_symmetry(map, x, s, k + 1, eps, quad)? {
            return Ok(StrataMembership {
                point: x.to_vec(),
                k,
                epsilon: eps,
                r,
                member: false,
                witness_scale: Some(s),
                witness_distance: Some(d),
            });
        }
    }
    Ok(StrataMembership {
        point: x.to_vec(),
        k,
        epsilon: eps,
        r,
        member: true,
        witness_scale: None,
        witness_distance: None,
    })
}

fn check_strata_args(map: &SampledMap, x: &[f64], k: usize, r: f64) -> Result<()> {
    if !(r > 0.0 && r < 1.0) {
        return Err(Error::Argument(format!("scale r = {r} must lie in (0, 1)")));
    }
    if k >= map.dim() {
        return Err(Error::Argument(format!(
            "stratum order {k} must be below m = {}",
            map.dim()
        )));
    }
    if dist(x, map.domain().origin()) > 1.0 + 1e-12 {
        return Err(Error::Argument(
            "strata points must lie in the unit ball about the domain origin".into(),
        ));
    }
    Ok(())
}

/// Membership only. Scans scales in ascending order, first with the constant
/// approximant at every scale, then with the remaining orders.
pub fn is_stratum_member(
    map: &SampledMap,
    x: &[f64],
    k: usize,
    eps: f64,
    r: f64,
    quad: &SymmetryQuadrature,
) -> Result<bool> {
    check_strata_args(map, x, k, r)?;
    let mut scales = dyadic_scales(r);
    scales.reverse();
    let mut cached = Vec::with_capacity(scales.len());
    for &s in &scales {
        map.domain().check_ball(x, s)?;
        let samples = local_samples(map, x, s, quad);
        if constant_distance(map, x, s, quad, &samples) <= eps {
            return Ok(false);
        }
        cached.push(samples);
    }
    for (&s, samples) in scales.iter().zip(&cached) {
        if nonconstant_symmetry(map, x, s, k + 1, eps, quad, samples)?.is_some() {
            return Ok(false);
        }
    }
    Ok(true)
}

/// Lattice nodes of the map domain in the closed unit ball about its origin
/// that belong to `S^k_{ε,r}`, in lexicographic node order.
pub fn grid_strata(map: &SampledMap, k: usize, eps: f64, r: f64, quad: &SymmetryQuadrature) -> Result<Vec<Vec<f64>>> {
    let origin = map.domain().origin().to_vec();
    let mut nodes = Vec::new();
    map.domain().for_each_node(|_, p| {
        if dist(p, &origin) <= 1.0 {
            nodes.push(p.to_vec());
        }
    });
    let member = nodes
        .par_iter()
        .map(|p| is_stratum_member(map, p, k, eps, r, quad))
        .collect::<Result<Vec<bool>>>()?;
    Ok(nodes
        .into_iter()
        .zip(member)
        .filter_map(|(p, keep)| keep.then_some(p))
        .collect())
}

/// Membership of many points, in input order.
pub fn classify_strata(
    map: &SampledMap,
    points: &[Vec<f64>],
    k: usize,
    eps: f64,
    r: f64,
    quad: &SymmetryQuadrature,
) -> Result<Vec<StrataMembership>> {
    points
        .par_iter()
        .map(|x| strata_membership_with(map, x, k, eps, r, quad))
        .collect()
}

/// Strata report rows: point coords, k, ε, r, member, witness scale, ε̂ at witness.
#[must_use]
pub fn strata_csv(m: usize, rows: &[StrataMembership]) -> String {
    let mut out: Vec<String> = (0..m).map(|i| format!("x{i}")).collect();
    out.extend(["k", "epsilon", "r", "member", "witness_scale", "witness_distance"].map(String::from));
    let mut text = out.join(",") + "\n";
    let opt = |v: Option<f64>| v.map_or_else(String::new, |x| x.to_string());
    for row in rows {
        let c: Vec<String> = row.point.iter().map(f64::to_string).collect();
        text.push_str(&format!(
            "{},{},{},{},{},{},{}\n",
            c.join(","),
            row.k,
            row.epsilon,
            row.r,
            row.member,
            opt(row.witness_scale),
            opt(row.witness_distance)
        ));
    }
    text
}

#[derive(Debug, Clone, Serialize)]
pub struct PinchedSet {
    pub center: Vec<f64>,
    pub radius: f64,
    pub level: f64,
    pub pinch: f64,
    /// Scale at which θ̂ is evaluated.
    pub scale: f64,
    /// Indices into the candidate list.
    pub points: Vec<usize>,
    /// θ̂ at each pinched point.
    pub values: Vec<f64>,
}

/// Candidates `y` with `θ̂(y, ρ·radius·radius_factor) > level − pinch`.
#[allow(clippy::too_many_arguments)]
pub fn pinched_set(
    map: &SampledMap,
    center: &[f64],
    radius: f64,
    level: f64,
    pinch: f64,
    rho: f64,
    radius_factor: f64,
    candidates: &[Vec<f64>],
) -> Result<PinchedSet> {
    if !(pinch > 0.0) {
        return Err(Error::Argument("pinch δ must be positive".into()));
    }
    if candidates
        .iter()
        .any(|y| dist(y, center) > 2.0 * radius * (1.0 + 1e-12))
    {
        return Err(Error::Argument(
            "pinched-set candidates must lie in the doubled ball".into(),
        ));
    }
    let scale = rho * radius * radius_factor;
    let values = candidates
        .iter()
        .map(|y| theta_hat(map, y, scale))
        .collect::<Result<Vec<_>>>()?;
    let mut points = Vec::new();
    let mut kept = Vec::new();
    for (i, v) in values.into_iter().enumerate() {
        if v > level - pinch {
            points.push(i);
            kept.push(v);
        }
    }
    Ok(PinchedSet {
        center: center.to_vec(),
        radius,
        level,
        pinch,
        scale,
        points,
        values: kept,
    })
}

/// Result of the greedy ρ-effective span.
#[derive(Debug, Clone, Serialize)]
pub struct EffectiveSpan {
    pub dim: usize,
    /// Input indices `y₀, …, y_k`.
    pub certificate: Vec<usize>,
    /// `L = origin + span(basis)`.
    pub origin: Vec<f64>,
    pub basis: Vec<Vec<f64>>,
    /// Largest distance from an input point to `L`; at most 2ρ.
    pub max_residual: f64,
}

/// Greedy farthest-point insertion while the farthest point is more than 2ρ
/// from the current affine span. Ties go to the earlier input.
pub fn effective_span(points: &[Vec<f64>], rho: f64) -> Result<EffectiveSpan> {
    let Some(first) = points.first() else {
        return Err(Error::Argument("effective span of an empty set".into()));
    };
    if !(rho > 0.0) {
        return Err(Error::Argument("ρ must be positive".into()));
    }
    let m = first.len();
    let origin = first.clone();
    let mut basis: Vec<Vec<f64>> = Vec::new();
    let mut certificate = vec![0];
    loop {
        let mut far = (0usize, 0.0f64);
        for (i, p) in points.iter().enumerate() {
            let d = dist_to_plane(p, &origin, &basis);
            if d > far.1 {
                far = (i, d);
            }
        }
        if far.1 <= 2.0 * rho || basis.len() == m {
            return Ok(EffectiveSpan {
                dim: basis.len(),
                certificate,
                origin,
                basis,
                max_residual: far.1,
            });
        }
        let mut dir = sub(&points[far.0], &origin);
        project_out(&mut dir, &basis);
        project_out(&mut dir, &basis);
        let len = norm(&dir);
        dir.iter_mut().for_each(|x| *x /= len);
        basis.push(dir);
        certificate.push(far.0);
    }
}

/// Re-checks `y_i ∉ B_{2ρ}(y₀ + span(y₁ − y₀, …, y_{i−1} − y₀))` for every certificate point.
#[must_use]
pub fn verify_span_certificate(points: &[Vec<f64>], certificate: &[usize], rho: f64) -> bool {
    let Some(&i0) = certificate.first() else {
        return false;
    };
    let y0 = &points[i0];
    let mut basis: Vec<Vec<f64>> = Vec::new();
    for &i in &certificate[1..] {
        let mut d = sub(&points[i], y0);
        project_out(&mut d, &basis);
        project_out(&mut d, &basis);
        let len = norm(&d);
        if len <= 2.0 * rho {
            return false;
        }
        d.iter_mut().for_each(|x| *x /= len);
        basis.push(d);
    }
    // Gram-Schmidt leaves the basis orthonormal, so distances above are exact.
    basis.iter().all(|b| (dot(b, b) - 1.0).abs() < 1e-9)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::map_model::{sample_map, CatalogEntry, GridDomain};
    use std::f64::consts::PI;

    fn map(name: &str, m: usize, cells: u32) -> SampledMap {
        let d = GridDomain::centered(m, 3.0, cells).unwrap();
        sample_map(&CatalogEntry::parse(name, m).unwrap(), &d).unwrap()
    }

    #[test]
    fn radial_map_is_homogeneous_at_the_vertex() {
        let u = map("radial", 3, 32);
        let (_, eps) = best_homogeneous(&u, &[0.0; 3], 1.0).unwrap();
        assert!(eps < 1e-20, "{eps}");
        let v = ksym_distance(&u, &[0.0; 3], 1.0, 0).unwrap();
        assert!(v.distance < 1e-20);
    }

    #[test]
    fn constant_map_is_homogeneous() {
        let u = map("constant", 3, 32);
        let (_, eps) = best_homogeneous(&u, &[0.2, 0.1, 0.0], 0.5).unwrap();
        assert!(eps < 1e-20);
    }

    #[test]
    fn off_vertex_distance_decreases_with_scale() {
        let u = map("radial", 3, 32);
        let e: Vec<f64> = [0.5, 0.25, 0.125]
            .iter()
            .map(|&r| best_homogeneous(&u, &[1.0, 0.0, 0.0], r).unwrap().1)
            .collect();
        assert!(e[0] > 0.0);
        assert!(e[0] > e[1] && e[1] > e[2], "{e:?}");
    }

    #[test]
    fn energy_matrix_is_isotropic_for_radial_map() {
        let u = map("radial", 3, 96);
        let e = invariant_energy_matrix(&u, &[0.0; 3], 1.0).unwrap();
        let target = 8.0 * PI / 3.0;
        for i in 0..3 {
            assert!((e[(i, i)] / target - 1.0).abs() < 0.01, "{}", e[(i, i)]);
            for j in 0..3 {
                if i != j {
                    assert!(e[(i, j)].abs() < 1e-10);
                }
            }
        }
    }

    #[test]
    fn extension_has_null_invariant_directions() {
        let u = map("extension:1", 4, 24);
        let e = invariant_energy_matrix(&u, &[0.0; 4], 1.0).unwrap();
        for i in 0..4 {
            assert_eq!(e[(3, i)], 0.0);
        }
        let v = ksym_distance(&u, &[0.0, 0.0, 0.0, 0.2], 1.0, 1).unwrap();
        assert!(v.distance < 1e-20, "{}", v.distance);
        assert!((v.subspace[0][3].abs() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn radial_map_is_far_from_one_symmetric() {
        let u = map("radial", 3, 32);
        let v = ksym_distance(&u, &[0.0; 3], 1.0, 1).unwrap();
        assert!(v.distance > 1e-3, "{}", v.distance);
        for w in v.order_distances.windows(2) {
            assert!(w[0].is_finite() && w[1].is_finite());
        }
    }

    #[test]
    fn distance_is_monotone_in_order() {
        let u = map("perturbed", 3, 32);
        let x = [0.2, -0.1, 0.3];
        let d: Vec<f64> = (0..=3)
            .map(|k| ksym_distance(&u, &x, 0.5, k).unwrap().distance)
            .collect();
        for w in d.windows(2) {
            assert!(w[1] >= w[0] - 1e-8, "{d:?}");
        }
    }

    #[test]
    fn vertex_is_in_the_top_stratum() {
        let u = map("radial", 3, 32);
        let gap = ksym_distance(&u, &[0.0; 3], 0.5, 1).unwrap().distance;
        let s = strata_membership(&u, &[0.0; 3], 0, gap / 2.0, 0.1).unwrap();
        assert!(s.member);
    }

    #[test]
    fn constant_map_witness_is_the_largest_scale() {
        let u = map("constant", 3, 32);
        let s = strata_membership(&u, &[0.1, 0.0, 0.0], 1, 1e-3, 0.1).unwrap();
        assert!(!s.member);
        assert_eq!(s.witness_scale, Some(0.5));
    }

    #[test]
    fn smooth_point_eventually_leaves_the_stratum() {
        let u = map("radial", 3, 32);
        let s = strata_membership(&u, &[1.0, 0.0, 0.0], 0, 0.01, 1.0 / 64.0).unwrap();
        assert!(!s.member);
        assert!(s.witness_scale.is_some());
    }

    #[test]
    fn pinched_set_examples() {
        let c = map("constant", 3, 32);
        let cands = vec![vec![0.1, 0.0, 0.0], vec![0.0, 0.4, 0.0]];
        let p = pinched_set(&c, &[0.0; 3], 0.5, 0.0, 0.1, 0.01, 0.1, &cands).unwrap();
        assert_eq!(p.points, vec![0, 1]);

        let u = map("radial", 3, 32);
        let cands = vec![vec![0.0; 3], vec![0.5, 0.0, 0.0], vec![0.0, -0.5, 0.0]];
        let p = pinched_set(&u, &[0.0; 3], 1.0, 8.0 * PI, 0.5, 0.01, 0.1, &cands).unwrap();
        assert_eq!(p.points, vec![0]);
        let all = pinched_set(&u, &[0.0; 3], 1.0, 1.0, 2.0, 0.01, 0.1, &cands).unwrap();
        assert_eq!(all.points.len(), 3);
    }

    #[test]
    fn effective_span_examples() {
        let e1 = vec![1.0, 0.0, 0.0];
        let o = vec![0.0; 3];
        let s = effective_span(&[o.clone(), e1.clone()], 0.1).unwrap();
        assert_eq!((s.dim, s.certificate.clone()), (1, vec![0, 1]));
        let s = effective_span(&[o.clone(), e1.clone(), vec![0.01, 0.0, 0.0]], 0.1).unwrap();
        assert_eq!(s.dim, 1);
        let s = effective_span(std::slice::from_ref(&e1), 0.1).unwrap();
        assert_eq!(s.dim, 0);
        assert_eq!(s.origin, e1);
        assert!(effective_span(&[], 0.1).is_err());
    }
}
