//! Midpoint quadrature over balls.
//!
//! Resolved balls (radius ≥ [`RESOLVED_RADIUS_CELLS`]·h) use the map's own
//! lattice with cell-center inclusion. Smaller balls use a cell-centered local
//! lattice of spacing `radius / LOCAL_CELLS_PER_RADIUS` evaluated pointwise.
//! Cells within a few cell widths of a known singular set are split
//! recursively into `4^m` sub-cells, each included in the ball by its own
//! center; this removes the O(h) midpoint error of the |x|⁻² energy density.
//!
//! Reductions run in parallel over slabs of the first lattice axis and are
//! summed in slab order, so results do not depend on the thread count.

use rayon::prelude::*;

use super::domain::LatticeBox;
use super::sampled::{ball_box, Sample, SampledMap};
use crate::vecmath::dist;

pub const RESOLVED_RADIUS_CELLS: f64 = 6.0;
pub const LOCAL_CELLS_PER_RADIUS: f64 = 8.0;

const SUBDIVISION: usize = 4;

/// `(depth, shell)`: cells within `shell` cell widths of a singular set are
/// refined, recursively up to `depth` levels. Positive-dimensional singular
/// sets touch many more cells per level, so they get a thinner shell.
fn refinement(singular_dims: usize) -> (usize, f64) {
    if singular_dims == 0 {
        (3, 3.0)
    } else {
        (2, 2.0)
    }
}

/// Lattice used to integrate over one ball.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum BallLattice {
    Map,
    Local { spacing: f64 },
}

#[must_use]
pub fn lattice_for(map: &SampledMap, radius: f64) -> BallLattice {
    let h = map.domain().spacing();
    if radius >= RESOLVED_RADIUS_CELLS * h * (1.0 - 1e-12) {
        BallLattice::Map
    } else {
        BallLattice::Local {
            spacing: radius / LOCAL_CELLS_PER_RADIUS,
        }
    }
}

/// Integrates `width` accumulators over `B_radius(center)`.
///
/// `integrand(position, sample, weight, acc)` adds `weight × value` terms into `acc`.
pub fn integrate_ball<F>(
    map: &SampledMap,
    center: &[f64],
    radius: f64,
    width: usize,
    with_tension: bool,
    integrand: F,
) -> Vec<f64>
where
    F: Fn(&[f64], &Sample, f64, &mut [f64]) + Sync,
{
    let m = map.dim();
    let lattice = lattice_for(map, radius);
    let (anchor, spacing, on_map) = match lattice {
        BallLattice::Map => (map.domain().origin().to_vec(), map.domain().spacing(), true),
        BallLattice::Local { spacing } => (
            center.iter().map(|c| c + 0.5 * spacing).collect::<Vec<_>>(),
            spacing,
            false,
        ),
    };
    let singular = map.has_singularities();
    let half_diag = spacing * (m as f64).sqrt() / 2.0;
    let pad = if singular { half_diag } else { 0.0 };
    let (depth, shell) = refinement(map.singular_set_dim());
    let bx = ball_box(&anchor, spacing, center, radius + pad);
    if bx.is_empty() {
        return vec![0.0; width];
    }
    let cell_volume = spacing.powi(m as i32);
    let inside = radius * (1.0 + 1e-12);

    let first: Vec<i64> = (bx.lo[0]..=bx.hi[0]).collect();
    let partials: Vec<Vec<f64>> = first
        .par_iter()
        .map(|&i0| {
            let mut acc = vec![0.0; width];
            let mut sample = map.new_sample();
            let mut p = vec![0.0; m];
            let mut q = Vec::new();
            let mut slab = bx.clone();
            slab.lo[0] = i0;
            slab.hi[0] = i0;
            slab.for_each(|idx| {
                for d in 0..m {
                    p[d] = anchor[d] + idx[d] as f64 * spacing;
                }
                let dc = dist(&p, center);
                if dc > radius + pad {
                    return;
                }
                let refine = singular && map.singular_distance(&p) <= shell * spacing;
                if !refine {
                    if dc <= inside {
                        if on_map {
                            map.sample_node(idx, &p, with_tension, &mut sample);
                        } else {
                            map.sample_at(&p, with_tension, &mut sample);
                        }
                        integrand(&p, &sample, cell_volume, &mut acc);
                    }
                    return;
                }
                refine_cell(
                    map,
                    center,
                    inside,
                    (&p, spacing),
                    (depth, shell),
                    with_tension,
                    &mut sample,
                    &mut q,
                    &integrand,
                    &mut acc,
                );
            });
            acc
        })
        .collect();

    let mut total = vec![0.0; width];
    for part in partials {
        for (t, v) in total.iter_mut().zip(part) {
            *t += v;
        }
    }
    total
}

#[allow(clippy::too_many_arguments)]
fn refine_cell<F>(
    map: &SampledMap,
    center: &[f64],
    inside: f64,
    (cell, size): (&[f64], f64),
    (depth, shell): (usize, f64),
    with_tension: bool,
    sample: &mut Sample,
    scratch: &mut Vec<Vec<f64>>,
    integrand: &F,
    acc: &mut [f64],
) where
    F: Fn(&[f64], &Sample, f64, &mut [f64]) + Sync,
{
    let m = cell.len();
    let sub = size / SUBDIVISION as f64;
    let half_diag = sub * (m as f64).sqrt() / 2.0;
    let volume = sub.powi(m as i32);
    let mut q = scratch.pop().unwrap_or_default();
    q.resize(m, 0.0);
    let offsets = LatticeBox::new(vec![0; m], vec![SUBDIVISION as i64 - 1; m]);
    offsets.for_each(|j| {
        for d in 0..m {
            q[d] = cell[d] - 0.5 * size + (j[d] as f64 + 0.5) * sub;
        }
        if dist(&q, center) > inside + half_diag {
            return;
        }
        if depth > 1 && map.singular_distance(&q) <= shell * sub {
            let qc = q.clone();
            refine_cell(
                map,
                center,
                inside,
                (&qc, sub),
                (depth - 1, shell),
                with_tension,
                sample,
                scratch,
                integrand,
                acc,
            );
        } else if dist(&q, center) <= inside {
            map.sample_at(&q, with_tension, sample);
            integrand(&q, sample, volume, acc);
        }
    });
    scratch.push(q);
}
