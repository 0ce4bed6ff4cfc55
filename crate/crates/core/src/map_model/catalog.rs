use serde::Serialize;

use crate::error::{Error, Result};
use crate::vecmath::norm;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Exactness {
    Harmonic,
    Approximate,
    Constant,
}

#[derive(Debug, Clone, PartialEq)]
enum Formula {
    Constant {
        value: Vec<f64>,
    },
    Radial,
    /// `x/|x|` on the first `dim - invariant_dims` coordinates, constant along the rest.
    SymmetricExtension {
        invariant_dims: usize,
    },
    /// `v/|v|` with `v = x + a|x|² e₁`.
    Perturbed {
        amplitude: f64,
    },
}

/// Closed-form sphere-valued map on ℝ^m with its Jacobian and singular set.
#[derive(Debug, Clone, PartialEq)]
pub struct CatalogEntry {
    dim: usize,
    formula: Formula,
}

impl CatalogEntry {
    /// Constant map equal to `value` (normalized) in ℝ^n.
    pub fn constant(dim: usize, value: Vec<f64>) -> Result<Self> {
        let n = norm(&value);
        if value.is_empty() || !(n.is_finite() && n > 0.0) {
            return Err(Error::Config("constant value must be a nonzero vector".into()));
        }
        let value = value.iter().map(|x| x / n).collect();
        Ok(Self {
            dim,
            formula: Formula::Constant { value },
        })
    }

    pub fn radial(dim: usize) -> Result<Self> {
        if dim < 3 {
            return Err(Error::UnsupportedDimension {
                dim,
                reason: "x/|x| has finite energy only for m >= 3",
            });
        }
        Ok(Self {
            dim,
            formula: Formula::Radial,
        })
    }

    pub fn symmetric_extension(dim: usize, invariant_dims: usize) -> Result<Self> {
        if dim < invariant_dims + 3 {
            return Err(Error::UnsupportedDimension {
                dim,
                reason: "the transverse factor x/|x| needs at least 3 dimensions",
            });
        }
        Ok(Self {
            dim,
            formula: Formula::SymmetricExtension { invariant_dims },
        })
    }

    pub fn perturbed(dim: usize, amplitude: f64) -> Result<Self> {
        if dim < 3 {
            return Err(Error::UnsupportedDimension {
                dim,
                reason: "the perturbed radial map needs m >= 3",
            });
        }
        if !amplitude.is_finite() {
            return Err(Error::Config("perturbation amplitude must be finite".into()));
        }
        Ok(Self {
            dim,
            formula: Formula::Perturbed { amplitude },
        })
    }

    /// Parses `constant`, `radial`, `extension:<k>` or `perturbed[:<amplitude>]`.
    pub fn parse(name: &str, dim: usize) -> Result<Self> {
        let (head, arg) = match name.split_once(':') {
            Some((h, a)) => (h, Some(a)),
            None => (name, None),
        };
        let bad_arg = || Error::Config(format!("bad catalog argument in {name:?}"));
        match (head, arg) {
            ("constant", None) => {
                let mut v = vec![0.0; dim];
                v[0] = 1.0;
                Self::constant(dim, v)
            }
            ("radial", None) => Self::radial(dim),
            ("extension", Some(a)) => Self::symmetric_extension(dim, a.parse().map_err(|_| bad_arg())?),
            ("perturbed", None) => Self::perturbed(dim, 0.1),
            ("perturbed", Some(a)) => Self::perturbed(dim, a.parse().map_err(|_| bad_arg())?),
            _ => Err(Error::Config(format!("unknown catalog map {name:?}"))),
        }
    }

    #[must_use]
    pub fn name(&self) -> String {
        match &self.formula {
            Formula::Constant { .. } => "constant".into(),
            Formula::Radial => "radial".into(),
            Formula::SymmetricExtension { invariant_dims } => format!("extension:{invariant_dims}"),
            Formula::Perturbed { amplitude } => format!("perturbed:{amplitude}"),
        }
    }

    #[must_use]
    pub fn domain_dim(&self) -> usize {
        self.dim
    }

    #[must_use]
    pub fn target_dim(&self) -> usize {
        match &self.formula {
            Formula::Constant { value } => value.len(),
            Formula::Radial | Formula::Perturbed { .. } => self.dim,
            Formula::SymmetricExtension { invariant_dims } => self.dim - invariant_dims,
        }
    }

    #[must_use]
    pub fn exactness(&self) -> Exactness {
        match &self.formula {
            Formula::Constant { .. } => Exactness::Constant,
            Formula::Radial | Formula::SymmetricExtension { .. } => Exactness::Harmonic,
            Formula::Perturbed { .. } => Exactness::Approximate,
        }
    }

    /// Dimension of the exact translation-invariance subspace, if the entry has one.
    #[must_use]
    pub fn invariant_dims(&self) -> usize {
        match &self.formula {
            Formula::Constant { .. } => self.dim,
            Formula::SymmetricExtension { invariant_dims } => *invariant_dims,
            _ => 0,
        }
    }

    #[must_use]
    pub fn singular_set_dim(&self) -> usize {
        match &self.formula {
            Formula::SymmetricExtension { invariant_dims } => *invariant_dims,
            _ => 0,
        }
    }

    /// Distance from `p` to the singular set (infinite when there is none).
    #[must_use]
    pub fn singular_distance(&self, p: &[f64]) -> f64 {
        match &self.formula {
            Formula::Constant { .. } => f64::INFINITY,
            Formula::Radial => norm(p),
            Formula::SymmetricExtension { invariant_dims } => norm(&p[..self.dim - invariant_dims]),
            Formula::Perturbed { amplitude } => {
                let d0 = norm(p);
                if *amplitude == 0.0 {
                    return d0;
                }
                // v also vanishes at x = -e₁/a.
                let mut q = p.to_vec();
                q[0] += 1.0 / amplitude;
                d0.min(norm(&q))
            }
        }
    }

    /// Value only.
    pub fn value(&self, p: &[f64], value: &mut [f64]) {
        match &self.formula {
            Formula::Constant { value: c } => value.copy_from_slice(c),
            Formula::Radial => normalize_into(&p[..self.dim], value),
            Formula::SymmetricExtension { invariant_dims } => {
                normalize_into(&p[..self.dim - invariant_dims], value);
            }
            Formula::Perturbed { amplitude } => {
                let r2: f64 = p.iter().map(|x| x * x).sum();
                value.copy_from_slice(p);
                value[0] += amplitude * r2;
                let len = norm(value);
                value.iter_mut().for_each(|x| *x /= len);
            }
        }
    }

    /// Value in `value` (length n) and Jacobian in `jac` with `jac[i*n + a] = ∂_i u^a`.
    pub fn evaluate(&self, p: &[f64], value: &mut [f64], jac: &mut [f64]) {
        let m = self.dim;
        match &self.formula {
            Formula::Constant { value: c } => {
                value.copy_from_slice(c);
                jac.iter_mut().for_each(|x| *x = 0.0);
            }
            Formula::Radial => normalized_identity(&p[..m], value, jac),
            Formula::SymmetricExtension { invariant_dims } => {
                let q = m - invariant_dims;
                jac.iter_mut().for_each(|x| *x = 0.0);
                normalized_identity(&p[..q], value, jac);
            }
            Formula::Perturbed { amplitude } => {
                let a = *amplitude;
                let r2: f64 = p.iter().map(|x| x * x).sum();
                let mut v = p.to_vec();
                v[0] += a * r2;
                let len = norm(&v);
                for (u, vi) in value.iter_mut().zip(&v) {
                    *u = vi / len;
                }
                // ∂_i v = e_i + 2a x_i e₁; ∂_i u = (∂_i v − u⟨u, ∂_i v⟩)/|v|.
                for i in 0..m {
                    let mut dv = vec![0.0; m];
                    dv[i] = 1.0;
                    dv[0] += 2.0 * a * p[i];
                    let proj: f64 = value.iter().zip(&dv).map(|(u, d)| u * d).sum();
                    for c in 0..m {
                        jac[i * m + c] = (dv[c] - value[c] * proj) / len;
                    }
                }
            }
        }
    }
}

fn normalize_into(x: &[f64], out: &mut [f64]) {
    let len = norm(x);
    for (o, xi) in out.iter_mut().zip(x) {
        *o = xi / len;
    }
}

/// `x/|x|` with target dimension `x.len()`; Jacobian rows beyond `x.len()` are left untouched.
fn normalized_identity(x: &[f64], value: &mut [f64], jac: &mut [f64]) {
    let q = x.len();
    let len = norm(x);
    for (u, xi) in value.iter_mut().zip(x) {
        *u = xi / len;
    }
    for i in 0..q {
        for c in 0..q {
            let delta = if i == c { 1.0 } else { 0.0 };
            jac[i * q + c] = (delta - value[i] * value[c]) / len;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fd_jacobian(e: &CatalogEntry, p: &[f64], step: f64) -> Vec<f64> {
        let (m, n) = (e.domain_dim(), e.target_dim());
        let mut out = vec![0.0; m * n];
        let mut vp = vec![0.0; n];
        let mut vm = vec![0.0; n];
        let mut scratch = vec![0.0; m * n];
        for i in 0..m {
            let mut q = p.to_vec();
            q[i] += step;
            e.evaluate(&q, &mut vp, &mut scratch);
            q[i] -= 2.0 * step;
            e.evaluate(&q, &mut vm, &mut scratch);
            for a in 0..n {
                out[i * n + a] = (vp[a] - vm[a]) / (2.0 * step);
            }
        }
        out
    }

    #[test]
    fn analytic_jacobians_match_differences() {
        let p = [0.3, -0.7, 0.45, 0.2];
        for e in [
            CatalogEntry::radial(4).unwrap(),
            CatalogEntry::symmetric_extension(4, 1).unwrap(),
            CatalogEntry::perturbed(4, 0.1).unwrap(),
            CatalogEntry::parse("constant", 4).unwrap(),
        ] {
            let (m, n) = (e.domain_dim(), e.target_dim());
            let mut v = vec![0.0; n];
            let mut j = vec![0.0; m * n];
            e.evaluate(&p, &mut v, &mut j);
            assert!((norm(&v) - 1.0).abs() < 1e-14);
            let mut v2 = vec![0.0; n];
            e.value(&p, &mut v2);
            assert_eq!(v, v2);
            let fd = fd_jacobian(&e, &p, 1e-5);
            for (a, b) in j.iter().zip(&fd) {
                assert!((a - b).abs() < 1e-8, "{}: {a} vs {b}", e.name());
            }
        }
    }

    #[test]
    fn radial_energy_density() {
        let e = CatalogEntry::radial(3).unwrap();
        let mut v = vec![0.0; 3];
        let mut j = vec![0.0; 9];
        let p = [0.5, 1.0, -2.0];
        e.evaluate(&p, &mut v, &mut j);
        let g2: f64 = j.iter().map(|x| x * x).sum();
        assert!((g2 - 2.0 / norm(&p).powi(2)).abs() < 1e-14);
    }

    #[test]
    fn parse_round_trip() {
        for name in ["radial", "extension:1", "perturbed:0.1", "constant"] {
            assert_eq!(CatalogEntry::parse(name, 4).unwrap().name(), name);
        }
        assert!(CatalogEntry::parse("radial", 2).is_err());
        assert!(CatalogEntry::parse("bogus", 3).is_err());
    }
}
