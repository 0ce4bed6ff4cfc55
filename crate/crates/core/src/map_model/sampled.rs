use std::sync::Arc;

use serde::Serialize;

use super::catalog::{CatalogEntry, Exactness};
use super::domain::{GridDomain, LatticeBox};
use crate::error::{Error, Result};
use crate::vecmath::{dist, norm};

/// Nodes closer than this many grid spacings to a known singular set get `f = 0`.
pub const TENSION_MASK_CELLS: f64 = 2.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Provenance {
    Analytic,
    File,
    Perturbed,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum GradientKind {
    Analytic,
    FiniteDifference,
}

/// Value, Jacobian (`jacobian[i*n + a] = ∂_i u^a`) and tension residual at one point.
#[derive(Debug, Clone)]
pub struct Sample {
    pub value: Vec<f64>,
    pub jacobian: Vec<f64>,
    pub tension: Vec<f64>,
    /// False when the residual stencil leaves the domain.
    pub tension_valid: bool,
    probe: Vec<f64>,
    stencil: Vec<f64>,
    probe_value: Vec<f64>,
    probe_jac: Vec<f64>,
}

impl Sample {
    #[must_use]
    pub fn new(m: usize, n: usize) -> Self {
        Self {
            value: vec![0.0; n],
            jacobian: vec![0.0; m * n],
            tension: vec![0.0; n],
            tension_valid: false,
            probe: vec![0.0; m],
            stencil: vec![0.0; m],
            probe_value: vec![0.0; n],
            probe_jac: vec![0.0; m * n],
        }
    }

    #[must_use]
    pub fn grad_sq(&self) -> f64 {
        self.jacobian.iter().map(|x| x * x).sum()
    }

    #[must_use]
    pub fn tension_sq(&self) -> f64 {
        self.tension.iter().map(|x| x * x).sum()
    }

    /// `Σ_i w_i ∂_i u` written into `out`.
    pub fn directional(&self, w: &[f64], out: &mut [f64]) {
        let n = self.value.len();
        out.iter_mut().for_each(|x| *x = 0.0);
        for (i, wi) in w.iter().enumerate() {
            for a in 0..n {
                out[a] += wi * self.jacobian[i * n + a];
            }
        }
    }
}

/// Dense node storage for maps read from files or materialized from a lazy source.
#[derive(Debug)]
struct NodeStore {
    half_width: i64,
    slots: Vec<u32>,
    values: Vec<f64>,
    jacobian: Vec<f64>,
    tension: Vec<f64>,
    tension_valid: Vec<bool>,
}

const NO_NODE: u32 = u32::MAX;

impl NodeStore {
    fn slot_of(&self, idx: &[i64]) -> Option<usize> {
        let w = 2 * self.half_width + 1;
        let mut s: i64 = 0;
        for &i in idx {
            if i < -self.half_width || i > self.half_width {
                return None;
            }
            s = s * w + (i + self.half_width);
        }
        match self.slots[s as usize] {
            NO_NODE => None,
            id => Some(id as usize),
        }
    }
}

#[derive(Debug)]
enum Source {
    Analytic(CatalogEntry),
    Stored(NodeStore),
    Rescaled {
        parent: SampledMap,
        center: Vec<f64>,
        scale: f64,
    },
}

/// A sphere-valued map sampled on a [`GridDomain`].
///
/// Catalog maps are evaluated lazily at lattice nodes and, for quadrature
/// refinement, at arbitrary points; stored maps interpolate multilinearly
/// between nodes.
#[derive(Debug, Clone)]
pub struct SampledMap {
    domain: GridDomain,
    target_dim: usize,
    provenance: Provenance,
    gradient_kind: GradientKind,
    source: Arc<Source>,
}

impl SampledMap {
    #[must_use]
    pub fn domain(&self) -> &GridDomain {
        &self.domain
    }

    #[must_use]
    pub fn dim(&self) -> usize {
        self.domain.dim()
    }

    #[must_use]
    pub fn target_dim(&self) -> usize {
        self.target_dim
    }

    #[must_use]
    pub fn provenance(&self) -> Provenance {
        self.provenance
    }

    #[must_use]
    pub fn gradient_kind(&self) -> GradientKind {
        self.gradient_kind
    }

    #[must_use]
    pub fn new_sample(&self) -> Sample {
        Sample::new(self.dim(), self.target_dim)
    }

    /// The catalog entry behind this map, looking through blow-ups.
    #[must_use]
    pub fn catalog_entry(&self) -> Option<&CatalogEntry> {
        match self.source.as_ref() {
            Source::Analytic(e) => Some(e),
            Source::Rescaled { parent, .. } => parent.catalog_entry(),
            Source::Stored(_) => None,
        }
    }

    #[must_use]
    pub fn has_singularities(&self) -> bool {
        match self.source.as_ref() {
            Source::Analytic(e) => e.exactness() != Exactness::Constant,
            Source::Rescaled { parent, .. } => parent.has_singularities(),
            Source::Stored(_) => false,
        }
    }

    /// Dimension of the known singular set (0 when it is a point or absent).
    #[must_use]
    pub fn singular_set_dim(&self) -> usize {
        match self.source.as_ref() {
            Source::Analytic(e) => e.singular_set_dim(),
            Source::Rescaled { parent, .. } => parent.singular_set_dim(),
            Source::Stored(_) => 0,
        }
    }

    /// Distance from `p` to the known singular set, infinite if none is known.
    #[must_use]
    pub fn singular_distance(&self, p: &[f64]) -> f64 {
        match self.source.as_ref() {
            Source::Analytic(e) => e.singular_distance(p),
            Source::Rescaled { parent, center, scale } => {
                let q: Vec<f64> = p.iter().zip(center).map(|(y, c)| c + scale * y).collect();
                parent.singular_distance(&q) / scale
            }
            Source::Stored(_) => f64::INFINITY,
        }
    }

    /// Samples the map at an arbitrary point of the domain.
    pub fn sample_at(&self, p: &[f64], with_tension: bool, out: &mut Sample) {
        match self.source.as_ref() {
            Source::Analytic(e) => self.sample_analytic(e, p, with_tension, out),
            Source::Stored(store) => self.sample_interpolated(store, p, with_tension, out),
            Source::Rescaled { parent, center, scale } => {
                let q: Vec<f64> = p.iter().zip(center).map(|(y, c)| c + scale * y).collect();
                parent.sample_at(&q, with_tension, out);
                out.jacobian.iter_mut().for_each(|x| *x *= scale);
                if with_tension {
                    let s2 = scale * scale;
                    out.tension.iter_mut().for_each(|x| *x *= s2);
                }
            }
        }
    }

    /// Writes only `out.value`; Jacobian and residual are left stale.
    pub fn value_at(&self, p: &[f64], out: &mut Sample) {
        match self.source.as_ref() {
            Source::Analytic(e) => {
                let h = self.domain.spacing();
                if e.singular_distance(p) < 1e-12 * h {
                    out.probe.copy_from_slice(p);
                    out.probe[0] += h / 100.0;
                    let q = std::mem::take(&mut out.probe);
                    e.value(&q, &mut out.value);
                    out.probe = q;
                } else {
                    e.value(p, &mut out.value);
                }
            }
            Source::Stored(_) => self.sample_at(p, false, out),
            Source::Rescaled { parent, center, scale } => {
                let q: Vec<f64> = p.iter().zip(center).map(|(y, c)| c + scale * y).collect();
                parent.value_at(&q, out);
            }
        }
    }

    /// Samples at lattice node `idx` whose position is `p`.
    pub fn sample_node(&self, idx: &[i64], p: &[f64], with_tension: bool, out: &mut Sample) {
        if let Source::Stored(store) = self.source.as_ref() {
            if let Some(id) = store.slot_of(idx) {
                copy_node(store, id, self.dim(), self.target_dim, with_tension, out);
                return;
            }
        }
        self.sample_at(p, with_tension, out);
    }

    fn sample_analytic(&self, e: &CatalogEntry, p: &[f64], with_tension: bool, out: &mut Sample) {
        let h = self.domain.spacing();
        let mut q = std::mem::take(&mut out.probe);
        q.copy_from_slice(p);
        if e.singular_distance(p) < 1e-12 * h {
            q[0] += h / 100.0;
        }
        e.evaluate(&q, &mut out.value, &mut out.jacobian);
        if with_tension {
            self.analytic_tension(e, &q, out);
        }
        out.probe = q;
    }

    fn analytic_tension(&self, e: &CatalogEntry, q: &[f64], out: &mut Sample) {
        let h = self.domain.spacing();
        out.tension.iter_mut().for_each(|x| *x = 0.0);
        if dist(q, self.domain.origin()) > self.domain.valid_radius() * (1.0 + 1e-12) {
            out.tension_valid = false;
            return;
        }
        out.tension_valid = true;
        if e.singular_distance(q) < TENSION_MASK_CELLS * h {
            return;
        }
        let n = self.target_dim;
        let inv_h2 = 1.0 / (h * h);
        let mut stencil = std::mem::take(&mut out.stencil);
        for d in 0..self.dim() {
            for sign in [1.0, -1.0] {
                stencil.copy_from_slice(q);
                stencil[d] += sign * h;
                e.evaluate(&stencil, &mut out.probe_value, &mut out.probe_jac);
                for a in 0..n {
                    out.tension[a] += (out.probe_value[a] - out.value[a]) * inv_h2;
                }
            }
        }
        out.stencil = stencil;
        let g2 = out.grad_sq();
        for a in 0..n {
            out.tension[a] += g2 * out.value[a];
        }
    }

    fn sample_interpolated(&self, store: &NodeStore, p: &[f64], with_tension: bool, out: &mut Sample) {
        let (m, n) = (self.dim(), self.target_dim);
        let h = self.domain.spacing();
        let o = self.domain.origin();
        let mut base = vec![0i64; m];
        let mut frac = vec![0.0; m];
        for d in 0..m {
            let t = (p[d] - o[d]) / h;
            let f = t.floor();
            base[d] = f as i64;
            frac[d] = t - f;
        }
        out.value.iter_mut().for_each(|x| *x = 0.0);
        out.jacobian.iter_mut().for_each(|x| *x = 0.0);
        out.tension.iter_mut().for_each(|x| *x = 0.0);
        out.tension_valid = true;
        let mut corner = vec![0i64; m];
        for mask in 0..(1usize << m) {
            let mut w = 1.0;
            for d in 0..m {
                let up = (mask >> d) & 1 == 1;
                corner[d] = base[d] + i64::from(up);
                w *= if up { frac[d] } else { 1.0 - frac[d] };
            }
            if w == 0.0 {
                continue;
            }
            let Some(id) = store.slot_of(&corner) else {
                // Cell leaves the stored lattice: fall back to the nearest node.
                let near = self.domain.nearest_index(p);
                let id = store
                    .slot_of(&near)
                    .or_else(|| nearest_stored(store, &near))
                    .unwrap_or(0);
                copy_node(store, id, m, n, with_tension, out);
                return;
            };
            for a in 0..n {
                out.value[a] += w * store.values[id * n + a];
            }
            for c in 0..m * n {
                out.jacobian[c] += w * store.jacobian[id * m * n + c];
            }
            if with_tension {
                for a in 0..n {
                    out.tension[a] += w * store.tension[id * n + a];
                }
                out.tension_valid &= store.tension_valid[id];
            }
        }
        let len = norm(&out.value);
        if len > 0.0 {
            out.value.iter_mut().for_each(|x| *x /= len);
        }
    }

    /// Evaluates every node in lexicographic order, returning values, Jacobians and residuals.
    #[must_use]
    pub fn materialize(&self) -> SampledMap {
        let (m, n) = (self.dim(), self.target_dim);
        let hw = self.domain.half_width();
        let w = (2 * hw + 1) as usize;
        let mut slots = vec![NO_NODE; w.pow(m as u32)];
        let mut values = Vec::new();
        let mut jacobian = Vec::new();
        let mut tension = Vec::new();
        let mut tension_valid = Vec::new();
        let mut s = self.new_sample();
        let mut count = 0u32;
        self.domain.for_each_node(|idx, p| {
            self.sample_node(idx, p, true, &mut s);
            values.extend_from_slice(&s.value);
            jacobian.extend_from_slice(&s.jacobian);
            tension.extend_from_slice(&s.tension);
            tension_valid.push(s.tension_valid);
            slots[dense_slot(idx, hw)] = count;
            count += 1;
        });
        debug_assert_eq!(values.len(), count as usize * n);
        SampledMap {
            domain: self.domain.clone(),
            target_dim: n,
            provenance: self.provenance,
            gradient_kind: self.gradient_kind,
            source: Arc::new(Source::Stored(NodeStore {
                half_width: hw,
                slots,
                values,
                jacobian,
                tension,
                tension_valid,
            })),
        }
    }

    /// Per-node node values in lexicographic order (length `count * n`).
    #[must_use]
    pub fn node_values(&self) -> Vec<f64> {
        let mut out = Vec::new();
        let mut s = self.new_sample();
        self.domain.for_each_node(|idx, p| {
            self.sample_node(idx, p, false, &mut s);
            out.extend_from_slice(&s.value);
        });
        out
    }
}

fn dense_slot(idx: &[i64], hw: i64) -> usize {
    let w = 2 * hw + 1;
    idx.iter().fold(0i64, |s, &i| s * w + (i + hw)) as usize
}

fn nearest_stored(store: &NodeStore, idx: &[i64]) -> Option<usize> {
    // Pull the index toward the lattice center until a stored node is hit.
    let mut cur = idx.to_vec();
    loop {
        if let Some(id) = store.slot_of(&cur) {
            return Some(id);
        }
        if cur.iter().all(|&i| i == 0) {
            return None;
        }
        for i in &mut cur {
            *i -= i.signum();
        }
    }
}

fn copy_node(store: &NodeStore, id: usize, m: usize, n: usize, with_tension: bool, out: &mut Sample) {
    out.value.copy_from_slice(&store.values[id * n..(id + 1) * n]);
    out.jacobian
        .copy_from_slice(&store.jacobian[id * m * n..(id + 1) * m * n]);
    if with_tension {
        out.tension.copy_from_slice(&store.tension[id * n..(id + 1) * n]);
        out.tension_valid = store.tension_valid[id];
    }
}

/// Samples a catalog entry on a domain. Evaluation is lazy; nodes exactly on
/// the singular set are shifted by `h/100` along the first axis.
pub fn sample_map(entry: &CatalogEntry, domain: &GridDomain) -> Result<SampledMap> {
    if entry.domain_dim() != domain.dim() {
        return Err(Error::Config(format!(
            "catalog map {} is defined on R^{}, domain is R^{}",
            entry.name(),
            entry.domain_dim(),
            domain.dim()
        )));
    }
    let provenance = match entry.exactness() {
        Exactness::Approximate => Provenance::Perturbed,
        _ => Provenance::Analytic,
    };
    Ok(SampledMap {
        domain: domain.clone(),
        target_dim: entry.target_dim(),
        provenance,
        gradient_kind: GradientKind::Analytic,
        source: Arc::new(Source::Analytic(entry.clone())),
    })
}

/// Builds a stored map from node values in lexicographic node order, computing
/// finite-difference gradients and, when `residuals` is absent, the tension residual.
pub fn from_node_values(
    domain: &GridDomain,
    target_dim: usize,
    values: Vec<f64>,
    residuals: Option<Vec<f64>>,
) -> Result<SampledMap> {
    let (m, n) = (domain.dim(), target_dim);
    let hw = domain.half_width();
    let w = (2 * hw + 1) as usize;
    let mut slots = vec![NO_NODE; w.pow(m as u32)];
    let mut indices = Vec::new();
    domain.for_each_node(|idx, _| {
        slots[dense_slot(idx, hw)] = indices.len() as u32;
        indices.push(idx.to_vec());
    });
    let count = indices.len();
    if values.len() != count * n {
        return Err(Error::Config(format!(
            "expected {} node values for {count} nodes, got {}",
            count * n,
            values.len()
        )));
    }
    let mut store = NodeStore {
        half_width: hw,
        slots,
        values,
        jacobian: vec![0.0; count * m * n],
        tension: vec![0.0; count * n],
        tension_valid: vec![false; count],
    };
    let h = domain.spacing();
    let mut nb = vec![0i64; m];
    for (id, idx) in indices.iter().enumerate() {
        let mut interior = true;
        let mut lap = vec![0.0; n];
        for d in 0..m {
            nb.copy_from_slice(idx);
            nb[d] += 1;
            let up = store.slot_of(&nb);
            nb[d] -= 2;
            let down = store.slot_of(&nb);
            let (a, b, span) = match (up, down) {
                (Some(u), Some(dn)) => (u, dn, 2.0 * h),
                (Some(u), None) => (u, id, h),
                (None, Some(dn)) => (id, dn, h),
                (None, None) => (id, id, 1.0),
            };
            for c in 0..n {
                store.jacobian[id * m * n + d * n + c] = (store.values[a * n + c] - store.values[b * n + c]) / span;
            }
            match (up, down) {
                (Some(u), Some(dn)) => {
                    for c in 0..n {
                        lap[c] += (store.values[u * n + c] + store.values[dn * n + c] - 2.0 * store.values[id * n + c])
                            / (h * h);
                    }
                }
                _ => interior = false,
            }
        }
        if residuals.is_none() && interior {
            let g2: f64 = store.jacobian[id * m * n..(id + 1) * m * n].iter().map(|x| x * x).sum();
            for c in 0..n {
                store.tension[id * n + c] = lap[c] + g2 * store.values[id * n + c];
            }
        }
        store.tension_valid[id] = interior;
    }
    if let Some(res) = residuals {
        if res.len() != count * n {
            return Err(Error::Config("residual count does not match node count".into()));
        }
        store.tension = res;
    }
    Ok(SampledMap {
        domain: domain.clone(),
        target_dim: n,
        provenance: Provenance::File,
        gradient_kind: GradientKind::FiniteDifference,
        source: Arc::new(Source::Stored(store)),
    })
}

/// Per-node tension residual `f = Δu + |∇u|²u` in lexicographic node order,
/// with boundary-layer nodes flagged invalid.
#[derive(Debug, Clone)]
pub struct TensionField {
    pub target_dim: usize,
    pub values: Vec<f64>,
    pub valid: Vec<bool>,
}

#[must_use]
pub fn compute_tension(map: &SampledMap) -> TensionField {
    let mut values = Vec::new();
    let mut valid = Vec::new();
    let mut s = map.new_sample();
    map.domain().for_each_node(|idx, p| {
        map.sample_node(idx, p, true, &mut s);
        values.extend_from_slice(&s.tension);
        valid.push(s.tension_valid);
    });
    TensionField {
        target_dim: map.target_dim(),
        values,
        valid,
    }
}

/// The rescaled map `T(y) = u(x + r y)` on a domain of radius `(R − |x − o|)/r`
/// centered at 0. Its Jacobian is `r∇u` and its residual `r²f`. Spacing
/// defaults to `h/r`, so lattice nodes map onto source nodes when `x` is a node.
pub fn blow_up(map: &SampledMap, x: &[f64], r: f64, spacing: Option<f64>) -> Result<SampledMap> {
    let dom = map.domain();
    if x.len() != dom.dim() {
        return Err(Error::Argument("center dimension mismatch".into()));
    }
    if !(r > 0.0 && r.is_finite()) {
        return Err(Error::Argument(format!("scale {r} must be positive")));
    }
    let offset = dist(x, dom.origin());
    if offset + r > dom.radius() * (1.0 + 1e-12) {
        return Err(Error::Domain(format!(
            "B_{r}({x:?}) is not contained in the domain ball of radius {}",
            dom.radius()
        )));
    }
    let radius = (dom.radius() - offset) / r;
    let h = spacing.unwrap_or(dom.spacing() / r);
    let domain = GridDomain::new(dom.dim(), radius, h, vec![0.0; dom.dim()])?;
    Ok(SampledMap {
        domain,
        target_dim: map.target_dim,
        provenance: map.provenance,
        gradient_kind: map.gradient_kind,
        source: Arc::new(Source::Rescaled {
            parent: map.clone(),
            center: x.to_vec(),
            scale: r,
        }),
    })
}

/// Lattice box covering the ball `B_radius(center)` for a lattice `anchor + spacing·ℤ^m`.
pub(crate) fn ball_box(anchor: &[f64], spacing: f64, center: &[f64], radius: f64) -> LatticeBox {
    let lo = center
        .iter()
        .zip(anchor)
        .map(|(c, a)| ((c - radius - a) / spacing).ceil() as i64)
        .collect();
    let hi = center
        .iter()
        .zip(anchor)
        .map(|(c, a)| ((c + radius - a) / spacing).floor() as i64)
        .collect();
    LatticeBox::new(lo, hi)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn radial3(cells: u32) -> SampledMap {
        let d = GridDomain::centered(3, 3.0, cells).unwrap();
        sample_map(&CatalogEntry::radial(3).unwrap(), &d).unwrap()
    }

    #[test]
    fn constant_map_has_zero_gradient_and_tension() {
        let d = GridDomain::new(3, 3.0, 0.1, vec![0.0; 3]).unwrap();
        let u = sample_map(&CatalogEntry::parse("constant", 3).unwrap(), &d).unwrap();
        let mut s = u.new_sample();
        u.sample_at(&[0.3, 0.2, -1.0], true, &mut s);
        assert_eq!(s.grad_sq(), 0.0);
        assert_eq!(s.tension_sq(), 0.0);
        assert!(s.tension_valid);
    }

    #[test]
    fn radial_node_value_and_energy_density() {
        let d = GridDomain::new(3, 3.0, 0.05, vec![0.0; 3]).unwrap();
        let u = sample_map(&CatalogEntry::radial(3).unwrap(), &d).unwrap();
        let mut s = u.new_sample();
        u.sample_node(&[20, 0, 0], &[1.0, 0.0, 0.0], false, &mut s);
        assert!((s.value[0] - 1.0).abs() < 1e-15);
        assert!((s.grad_sq() - 2.0).abs() < 1e-12);
    }

    #[test]
    fn singular_node_is_offset() {
        let u = radial3(30);
        let mut s = u.new_sample();
        u.sample_at(&[0.0; 3], false, &mut s);
        assert!((s.value[0] - 1.0).abs() < 1e-15);
        assert!(s.grad_sq().is_finite());
    }

    #[test]
    fn extension_has_zero_invariant_gradient() {
        let d = GridDomain::centered(4, 3.0, 16).unwrap();
        let u = sample_map(&CatalogEntry::symmetric_extension(4, 1).unwrap(), &d).unwrap();
        let mut s = u.new_sample();
        let n = u.target_dim();
        d.for_each_node(|idx, p| {
            u.sample_node(idx, p, false, &mut s);
            assert!(s.jacobian[3 * n..4 * n].iter().all(|&x| x == 0.0));
        });
    }

    #[test]
    fn radial_tension_converges_at_second_order() {
        // f is O(h²|x|⁻³) away from the origin.
        let coarse = radial3(60);
        let fine = radial3(120);
        let p = [0.8, 0.6, 0.0];
        let mut s = coarse.new_sample();
        coarse.sample_at(&p, true, &mut s);
        let fc = s.tension_sq().sqrt();
        fine.sample_at(&p, true, &mut s);
        let ff = s.tension_sq().sqrt();
        assert!(fc > 0.0 && ff > 0.0);
        let rate = (fc / ff).log2();
        assert!((rate - 2.0).abs() < 0.1, "rate {rate}");
    }

    #[test]
    fn perturbed_tension_is_nonzero() {
        let d = GridDomain::centered(3, 3.0, 64).unwrap();
        let u = sample_map(&CatalogEntry::perturbed(3, 0.1).unwrap(), &d).unwrap();
        let mut s = u.new_sample();
        u.sample_at(&[0.5, 0.5, 0.0], true, &mut s);
        assert!(s.tension_sq() > 1e-4);
        assert_eq!(u.provenance(), Provenance::Perturbed);
    }

    #[test]
    fn boundary_layer_is_flagged() {
        let u = radial3(30);
        let mut s = u.new_sample();
        u.sample_at(&[2.95, 0.0, 0.0], true, &mut s);
        assert!(!s.tension_valid);
    }

    #[test]
    fn blow_up_of_radial_is_radial() {
        let u = radial3(24);
        for r in [0.5, 0.25] {
            let t = blow_up(&u, &[0.0; 3], r, None).unwrap();
            let mut a = u.new_sample();
            let mut b = t.new_sample();
            t.domain().for_each_node(|idx, p| {
                if crate::vecmath::norm(p) > 0.0 && crate::vecmath::norm(p) < 2.0 {
                    t.sample_node(idx, p, false, &mut b);
                    u.sample_at(p, false, &mut a);
                    for (x, y) in a.value.iter().zip(&b.value) {
                        assert!((x - y).abs() < 1e-12);
                    }
                }
            });
        }
    }

    #[test]
    fn blow_up_rejects_escaping_ball() {
        let u = radial3(24);
        assert!(blow_up(&u, &[2.5, 0.0, 0.0], 1.0, None).is_err());
    }

    #[test]
    fn stored_map_interpolates_on_sphere() {
        let d = GridDomain::centered(3, 3.0, 16).unwrap();
        let u = sample_map(&CatalogEntry::perturbed(3, 0.1).unwrap(), &d).unwrap();
        let stored = from_node_values(&d, 3, u.node_values(), None).unwrap();
        let mut s = stored.new_sample();
        stored.sample_at(&[0.41, -0.33, 1.07], true, &mut s);
        assert!((norm(&s.value) - 1.0).abs() < 1e-12);
        assert_eq!(stored.gradient_kind(), GradientKind::FiniteDifference);
    }

    #[test]
    fn finite_difference_gradient_is_second_order() {
        let entry = CatalogEntry::perturbed(3, 0.1).unwrap();
        let p = [1.125, 0.375, -0.75];
        let mut errs = Vec::new();
        for cells in [16u32, 32] {
            let d = GridDomain::centered(3, 3.0, cells).unwrap();
            let u = sample_map(&entry, &d).unwrap();
            let stored = from_node_values(&d, 3, u.node_values(), None).unwrap();
            let idx = d.nearest_index(&p);
            let mut pos = vec![0.0; 3];
            d.position(&idx, &mut pos);
            let mut a = u.new_sample();
            let mut b = u.new_sample();
            u.sample_at(&pos, false, &mut a);
            stored.sample_node(&idx, &pos, false, &mut b);
            let e = a
                .jacobian
                .iter()
                .zip(&b.jacobian)
                .map(|(x, y)| (x - y).abs())
                .fold(0.0, f64::max);
            errs.push(e);
        }
        let rate = (errs[0] / errs[1]).log2();
        assert!(rate > 1.8, "rate {rate}");
    }
}
