use serde::Serialize;

use crate::error::{Error, Result};
use crate::vecmath::dist;

/// Regular lattice of spacing `spacing` clipped to the closed ball `B_radius(origin)`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GridDomain {
    dim: usize,
    radius: f64,
    spacing: f64,
    origin: Vec<f64>,
}

impl GridDomain {
    pub fn new(dim: usize, radius: f64, spacing: f64, origin: Vec<f64>) -> Result<Self> {
        if dim < 2 {
            return Err(Error::Config(format!("dimension {dim} < 2")));
        }
        if !(radius.is_finite() && radius > 0.0) {
            return Err(Error::Config(format!("radius {radius} must be positive")));
        }
        if !(spacing.is_finite() && spacing > 0.0) || spacing > radius / 8.0 * (1.0 + 1e-12) {
            return Err(Error::Config(format!(
                "spacing {spacing} must lie in (0, R/8] with R = {radius}"
            )));
        }
        if origin.len() != dim || origin.iter().any(|x| !x.is_finite()) {
            return Err(Error::Config("origin must be a finite vector of length m".into()));
        }
        Ok(Self {
            dim,
            radius,
            spacing,
            origin,
        })
    }

    /// Domain centered at 0 with spacing `radius / cells`.
    pub fn centered(dim: usize, radius: f64, cells: u32) -> Result<Self> {
        if cells == 0 {
            return Err(Error::Config("cell count must be positive".into()));
        }
        Self::new(dim, radius, radius / f64::from(cells), vec![0.0; dim])
    }

    #[must_use]
    pub fn dim(&self) -> usize {
        self.dim
    }

    #[must_use]
    pub fn radius(&self) -> f64 {
        self.radius
    }

    #[must_use]
    pub fn spacing(&self) -> f64 {
        self.spacing
    }

    #[must_use]
    pub fn origin(&self) -> &[f64] {
        &self.origin
    }

    /// Largest index magnitude along any axis.
    #[must_use]
    pub fn half_width(&self) -> i64 {
        (self.radius / self.spacing + 1e-9).floor() as i64
    }

    pub fn position(&self, idx: &[i64], out: &mut [f64]) {
        for ((o, &i), c) in out.iter_mut().zip(idx).zip(&self.origin) {
            *o = c + i as f64 * self.spacing;
        }
    }

    #[must_use]
    pub fn contains(&self, p: &[f64]) -> bool {
        dist(p, &self.origin) <= self.radius * (1.0 + 1e-12)
    }

    /// Radius of the region where one-stencil-wide differences are defined.
    #[must_use]
    pub fn valid_radius(&self) -> f64 {
        self.radius - self.spacing
    }

    /// A ball is quadrature-valid when it stays one stencil width inside the domain.
    #[must_use]
    pub fn ball_is_valid(&self, center: &[f64], r: f64) -> bool {
        r > 0.0 && dist(center, &self.origin) + r <= self.valid_radius() + 1e-12 * self.radius
    }

    pub(crate) fn check_ball(&self, center: &[f64], r: f64) -> Result<()> {
        if center.len() != self.dim {
            return Err(Error::Argument(format!(
                "center has {} coordinates, domain has {}",
                center.len(),
                self.dim
            )));
        }
        if self.ball_is_valid(center, r) {
            Ok(())
        } else {
            Err(Error::Domain(format!(
                "ball of radius {r} at {center:?} leaves the valid region of radius {}",
                self.valid_radius()
            )))
        }
    }

    /// Visits every node in lexicographic index order.
    pub fn for_each_node(&self, mut f: impl FnMut(&[i64], &[f64])) {
        let n = self.half_width();
        let bx = LatticeBox::new(vec![-n; self.dim], vec![n; self.dim]);
        let mut p = vec![0.0; self.dim];
        bx.for_each(|idx| {
            self.position(idx, &mut p);
            if self.contains(&p) {
                f(idx, &p);
            }
        });
    }

    #[must_use]
    pub fn node_count(&self) -> usize {
        let mut c = 0;
        self.for_each_node(|_, _| c += 1);
        c
    }

    /// Nearest lattice index to `p` (not necessarily inside the ball).
    #[must_use]
    pub fn nearest_index(&self, p: &[f64]) -> Vec<i64> {
        p.iter()
            .zip(&self.origin)
            .map(|(x, o)| ((x - o) / self.spacing).round() as i64)
            .collect()
    }
}

/// Inclusive integer box iterated in lexicographic order (last axis fastest).
#[derive(Debug, Clone)]
pub(crate) struct LatticeBox {
    pub lo: Vec<i64>,
    pub hi: Vec<i64>,
}

impl LatticeBox {
    pub fn new(lo: Vec<i64>, hi: Vec<i64>) -> Self {
        Self { lo, hi }
    }

    pub fn is_empty(&self) -> bool {
        self.lo.iter().zip(&self.hi).any(|(l, h)| l > h)
    }

    pub fn for_each(&self, mut f: impl FnMut(&[i64])) {
        if self.is_empty() {
            return;
        }
        let d = self.lo.len();
        let mut idx = self.lo.clone();
        loop {
            f(&idx);
            let mut axis = d;
            loop {
                if axis == 0 {
                    return;
                }
                axis -= 1;
                if idx[axis] < self.hi[axis] {
                    idx[axis] += 1;
                    break;
                }
                idx[axis] = self.lo[axis];
            }
        }
    }
}
