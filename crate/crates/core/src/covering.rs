//! Coverings of quantitative strata.
//!
//! A generation refines every active ball of radius `r_x` into children of
//! radius `max(ρ r_x, r)`. The pinched set `F_x` holds the points `y` of the
//! stratum in `B_{2r_x}(x)` with `θ̂(y, ρ r_x/10) > E − δ`:
//! - if `F_x` effectively spans a k-plane `V`, the ball is good and its points
//!   are re-covered by balls centered on `V` (or on the point itself when it
//!   escapes the tube `B_{ρ r_x/5}(V)`);
//! - otherwise the ball is bad; children within `2ρ r_x` of `F_x` stay bad
//!   and the rest carry the energy drop `θ̂ ≤ E − δ` at a tenth of their radius.
//!
//! Children are chosen greedily from uncovered stratum points in order of
//! decreasing radius. Every new center is at least `0.8` child radii from
//! earlier ones, so fifth-radius shrinks within a generation are disjoint.
//! Balls reaching the final scale `r` go to one registry shared by the whole
//! run; the same argument keeps the registry disjoint.

use std::collections::HashMap;

use rayon::prelude::*;
use serde::Serialize;

use crate::energy::{default_tolerance, energy_bound, hoelder_f_bound, theta_hat};
use crate::error::{Error, Result};
use crate::map_model::{LatticeBox, SampledMap};
use crate::reifenberg::{
    check_disjoint, first_overlap, minkowski_content, packing_sum, Ball, BallCovering, Label, SHRINK,
};
use crate::symmetry::effective_span;
use crate::vecmath::{dist, dist_to_plane, dot, sub, unit_ball_volume};

const REL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CoveringConfig {
    pub k: usize,
    pub epsilon: f64,
    /// Scale ratio ρ, a negative power of two not above 1/100.
    pub rho: f64,
    /// Pinch threshold δ; defaults to `0.05 E`.
    pub delta: Option<f64>,
    /// Final scale.
    pub r: f64,
    /// Initial scale R.
    pub initial_radius: f64,
    /// Energy level E; defaults to the largest `θ̂(y, R)` over the stratum.
    pub energy: Option<f64>,
    /// Energy bound Λ used for the default tolerance; defaults to `θ(o, R_dom − h)`.
    pub energy_bound: Option<f64>,
    /// Quadrature tolerance τ_q for the energy-drop check.
    pub tolerance: Option<f64>,
    /// Generation limit per run.
    pub max_generations: usize,
    /// Content constant for the first covering stage.
    pub content_constant: f64,
    /// Content constant for the second covering stage.
    pub final_constant: f64,
    /// Pinched sets use `θ̂(·, ρ r_x · radius_factor)`.
    pub radius_factor: f64,
    /// Exponent p of the L^p tension norm behind 𝓕.
    pub tension_exponent: f64,
}

impl Default for CoveringConfig {
    fn default() -> Self {
        Self {
            k: 0,
            epsilon: 0.1,
            rho: 2f64.powi(-7),
            delta: None,
            r: 2f64.powi(-5),
            initial_radius: 1.0,
            energy: None,
            energy_bound: None,
            tolerance: None,
            max_generations: 64,
            content_constant: 10.0,
            final_constant: 20.0,
            radius_factor: 0.1,
            tension_exponent: 4.0,
        }
    }
}

impl CoveringConfig {
    pub fn validate(&self, dim: usize) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(msg));
        if self.k >= dim {
            return bad(format!("k = {} must be below m = {dim}", self.k));
        }
        let log = self.rho.log2();
        if !(self.rho > 0.0 && self.rho <= 0.01) || (log - log.round()).abs() > 1e-9 {
            return bad(format!(
                "ρ = {} must be a negative power of two not above 1/100",
                self.rho
            ));
        }
        if !(self.r > 0.0 && self.r < self.initial_radius && self.initial_radius <= 1.0) {
            return bad(format!(
                "need 0 < r < R <= 1, got r = {}, R = {}",
                self.r, self.initial_radius
            ));
        }
        if self.delta.is_some_and(|d| !(d > 0.0)) {
            return bad("δ must be positive".into());
        }
        if !(self.epsilon > 0.0) {
            return bad("ε must be positive".into());
        }
        if !(self.radius_factor > 0.0 && self.radius_factor <= 1.0) {
            return bad("radius factor must lie in (0, 1]".into());
        }
        if self.max_generations == 0 {
            return bad("generation limit must be positive".into());
        }
        if !(self.content_constant > 0.0 && self.final_constant > 0.0) {
            return bad("content constants must be positive".into());
        }
        if self.tolerance.is_some_and(|t| !(t >= 0.0)) {
            return bad("τ_q must be nonnegative".into());
        }
        Ok(())
    }
}

/// Energy thresholds after defaults are filled in.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ResolvedLevels {
    pub energy: f64,
    pub delta: f64,
    pub energy_bound: f64,
    pub tolerance: f64,
}

/// Fills E, δ, Λ and τ_q from the map and stratum where the config leaves them open.
pub fn resolve_levels(map: &SampledMap, strata: &[Vec<f64>], cfg: &CoveringConfig) -> Result<ResolvedLevels> {
    let energy = match cfg.energy {
        Some(e) => e,
        None => strata
            .par_iter()
            .map(|y| theta_hat(map, y, cfg.initial_radius))
            .collect::<Result<Vec<f64>>>()?
            .into_iter()
            .fold(0.0, f64::max),
    };
    let delta = cfg.delta.unwrap_or(0.05 * energy);
    let lambda = match cfg.energy_bound {
        Some(l) => l,
        None => energy_bound(map)?,
    };
    let tolerance = cfg.tolerance.unwrap_or_else(|| default_tolerance(map, lambda));
    Ok(ResolvedLevels {
        energy,
        delta,
        energy_bound: lambda,
        tolerance,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct SeedReduction {
    pub r0: f64,
    pub seed_radius: f64,
    pub seeds: Vec<Vec<f64>>,
    /// Shrinks `B_{r₀/4}` pairwise disjoint.
    pub disjoint: bool,
    /// `N r₀^k`.
    pub content: f64,
    /// `ω_m (1 + r₀)^m m^(m/2) r₀^(k−m)`, the volume bound on `N r₀^k`.
    pub content_bound: f64,
}

/// `r₀ = min(1, (δ/𝓕)^(1/γ))`. For `r₀ < 1` the seeds are the cubic lattice
/// of spacing `r₀/√m` about the domain origin with `|c| < 1 + r₀/2`, radius
/// `r₀/2`. For `r₀ = 1` the single seed is `B_1(o)`.
pub fn initial_scale_reduction(
    map: &SampledMap,
    f_bound: f64,
    gamma: f64,
    delta: f64,
    k: usize,
) -> Result<SeedReduction> {
    if !(gamma > 0.0) {
        return Err(Error::Argument(format!("γ = {gamma} must be positive")));
    }
    if f_bound < 0.0 || !(delta > 0.0) {
        return Err(Error::Argument("need 𝓕 >= 0 and δ > 0".into()));
    }
    let m = map.dim();
    let origin = map.domain().origin().to_vec();
    let r0 = if f_bound == 0.0 {
        1.0
    } else {
        (delta / f_bound).powf(1.0 / gamma).min(1.0)
    };
    let mf = m as f64;
    let content_bound =
        unit_ball_volume(m) * (1.0 + r0).powi(m as i32) * mf.powf(mf / 2.0) * r0.powi(k as i32 - m as i32);
    if r0 >= 1.0 {
        return Ok(SeedReduction {
            r0: 1.0,
            seed_radius: 1.0,
            seeds: vec![origin],
            disjoint: true,
            content: 1.0,
            content_bound,
        });
    }
    let a = r0 / mf.sqrt();
    let reach = ((1.0 + r0 / 2.0) / a).ceil() as i64;
    let mut seeds = Vec::new();
    let mut c = vec![0.0; m];
    LatticeBox::new(vec![-reach; m], vec![reach; m]).for_each(|idx| {
        for d in 0..m {
            c[d] = origin[d] + idx[d] as f64 * a;
        }
        if dist(&c, &origin) < 1.0 + r0 / 2.0 {
            seeds.push(c.clone());
        }
    });
    let content = seeds.len() as f64 * r0.powi(k as i32);
    Ok(SeedReduction {
        r0,
        seed_radius: r0 / 2.0,
        seeds,
        disjoint: a >= r0 / 2.0 * (1.0 - REL),
        content,
        content_bound,
    })
}

/// Greedy by decreasing radius, ties by input order: a ball is kept iff its
/// fifth-radius shrink misses every kept shrink. Every input center then lies
/// within twice the radius of a kept ball.
#[must_use]
pub fn vitali_subcover(balls: &[Ball]) -> Vec<Ball> {
    let mut order: Vec<usize> = (0..balls.len()).collect();
    order.sort_by(|&a, &b| balls[b].radius.total_cmp(&balls[a].radius));
    let mut kept: Vec<Ball> = Vec::new();
    for i in order {
        let b = &balls[i];
        let clear = kept
            .iter()
            .all(|k| dist(&k.center, &b.center) >= SHRINK * (k.radius + b.radius));
        if clear {
            kept.push(b.clone());
        }
    }
    kept
}

/// Content and label counts of one generation.
#[derive(Debug, Clone, Serialize)]
pub struct GenerationRecord {
    pub generation: usize,
    pub active: usize,
    pub parent_radius_max: f64,
    pub good: usize,
    pub bad: usize,
    pub unpinched: usize,
    pub children_good: usize,
    pub children_bad: usize,
    pub children_final: usize,
    pub children_r: usize,
    /// `Σ r_x^k` over bad parents.
    pub bad_content: f64,
    /// `Σ r_x^k` over children kept bad.
    pub bad_child_content: f64,
    pub tube_escapes: usize,
    pub disjoint: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct CoverRun {
    pub level: f64,
    pub delta: f64,
    /// Leaves: r-balls, final balls, and (first stage only) bad balls.
    pub covering: BallCovering,
    pub generations: Vec<GenerationRecord>,
    pub tube_escapes: usize,
    /// Generation limit reached; remaining balls were refined straight to radius r.
    pub truncated: bool,
    pub coverage_ok: bool,
    pub disjoint_ok: bool,
    pub decay_ok: bool,
    pub energy_drop_ok: bool,
    /// Largest `θ̂(y, r_x/10) − (level − δ)` over final balls.
    pub energy_drop_margin: f64,
    pub content: f64,
    pub content_bound: f64,
    pub content_ok: bool,
}

#[derive(Debug, Clone)]
struct Active {
    center: Vec<f64>,
    radius: f64,
}

enum Kind {
    Good { origin: Vec<f64>, basis: Vec<Vec<f64>> },
    Pinched { pinched: Vec<usize> },
    Unpinched,
}

struct Proposal {
    point: usize,
    center: Vec<f64>,
    radius: f64,
    label: Label,
    escape: bool,
    bad_parent: bool,
}

struct Engine<'a> {
    map: &'a SampledMap,
    points: &'a [Vec<f64>],
    cfg: &'a CoveringConfig,
    levels: ResolvedLevels,
    cache: HashMap<(usize, u64), f64>,
    registry: Vec<Vec<f64>>,
}

impl<'a> Engine<'a> {
    fn new(map: &'a SampledMap, points: &'a [Vec<f64>], cfg: &'a CoveringConfig, levels: ResolvedLevels) -> Self {
        Self {
            map,
            points,
            cfg,
            levels,
            cache: HashMap::new(),
            registry: Vec::new(),
        }
    }

    fn is_final_scale(&self, radius: f64) -> bool {
        radius <= self.cfg.r * (1.0 + REL)
    }

    fn child_radius(&self, parent: f64) -> f64 {
        (self.cfg.rho * parent).max(self.cfg.r)
    }

    fn theta_hats(&mut self, idx: &[usize], scale: f64) -> Result<Vec<f64>> {
        let key = scale.to_bits();
        let missing: Vec<usize> = idx
            .iter()
            .copied()
            .filter(|i| !self.cache.contains_key(&(*i, key)))
            .collect();
        let values = missing
            .par_iter()
            .map(|&i| theta_hat(self.map, &self.points[i], scale))
            .collect::<Result<Vec<f64>>>()?;
        for (i, v) in missing.into_iter().zip(values) {
            self.cache.insert((i, key), v);
        }
        Ok(idx.iter().map(|i| self.cache[&(*i, key)]).collect())
    }

    fn points_within(&self, center: &[f64], radius: f64) -> Vec<usize> {
        (0..self.points.len())
            .filter(|&i| dist(&self.points[i], center) <= radius * (1.0 + REL))
            .collect()
    }

    fn in_registry(&self, q: &[f64]) -> bool {
        let r = self.cfg.r * (1.0 + REL);
        self.registry.iter().any(|c| dist(c, q) <= r)
    }

    fn classify(&mut self, ball: &Active, level: f64) -> Result<Kind> {
        let candidates = self.points_within(&ball.center, 2.0 * ball.radius);
        let scale = self.cfg.rho * ball.radius * self.cfg.radius_factor;
        let values = self.theta_hats(&candidates, scale)?;
        let pinched: Vec<usize> = candidates
            .into_iter()
            .zip(values)
            .filter_map(|(i, v)| (v > level - self.levels.delta).then_some(i))
            .collect();
        if pinched.is_empty() {
            return Ok(Kind::Unpinched);
        }
        let pts: Vec<Vec<f64>> = pinched.iter().map(|&i| self.points[i].clone()).collect();
        let span = effective_span(&pts, self.cfg.rho * ball.radius * self.cfg.radius_factor)?;
        if span.dim >= self.cfg.k {
            Ok(Kind::Good {
                origin: span.origin,
                basis: span.basis[..self.cfg.k].to_vec(),
            })
        } else {
            Ok(Kind::Pinched { pinched })
        }
    }

    fn propose(&self, parent: &Active, kind: &Kind, out: &mut Vec<Proposal>) {
        let radius = self.child_radius(parent.radius);
        let at_r = self.is_final_scale(radius);
        let tube = self.cfg.rho * parent.radius * 2.0 * SHRINK;
        for q in self.points_within(&parent.center, parent.radius) {
            let p = &self.points[q];
            if self.in_registry(p) {
                continue;
            }
            let (center, escape, label) = match kind {
                Kind::Good { origin, basis } => {
                    let escape = dist_to_plane(p, origin, basis) > tube;
                    let center = if escape { p.clone() } else { project(p, origin, basis) };
                    (center, escape, Label::Good)
                }
                Kind::Unpinched => (p.clone(), false, Label::Final),
                Kind::Pinched { pinched } => {
                    let near = pinched.iter().any(|&f| dist(&self.points[f], p) <= 2.0 * radius);
                    (p.clone(), false, if near { Label::Bad } else { Label::Final })
                }
            };
            out.push(Proposal {
                point: q,
                center,
                radius,
                label: if at_r { Label::RBall } else { label },
                escape,
                bad_parent: matches!(kind, Kind::Pinched { .. }),
            });
        }
    }

    /// Greedy net over proposals; r-balls join the registry.
    fn commit(&mut self, mut proposals: Vec<Proposal>) -> Vec<(Proposal, bool)> {
        proposals.sort_by(|a, b| b.radius.total_cmp(&a.radius));
        let mut chosen: Vec<(Proposal, bool)> = Vec::new();
        for p in proposals {
            let q = &self.points[p.point];
            let covered =
                chosen.iter().any(|(c, _)| dist(&c.center, q) <= c.radius * (1.0 + REL)) || self.in_registry(q);
            if covered {
                continue;
            }
            if p.label == Label::RBall {
                self.registry.push(p.center.clone());
            }
            chosen.push((p, true));
        }
        chosen
    }

    /// One covering stage from `starts` at energy `level`. With `second` unset,
    /// balls that are not good become bad leaves.
    fn run(
        &mut self,
        starts: Vec<Active>,
        level: f64,
        second: bool,
    ) -> Result<(Vec<Ball>, Vec<GenerationRecord>, bool)> {
        let k = self.cfg.k as i32;
        let mut leaves = Vec::new();
        let mut records = Vec::new();
        let mut active = starts;
        let mut generation = 0;
        let mut truncated = false;
        while !active.is_empty() {
            if generation >= self.cfg.max_generations {
                truncated = true;
                self.force_to_final_scale(&active);
                break;
            }
            let mut proposals = Vec::new();
            let mut record = GenerationRecord {
                generation,
                active: active.len(),
                parent_radius_max: active.iter().map(|a| a.radius).fold(0.0, f64::max),
                good: 0,
                bad: 0,
                unpinched: 0,
                children_good: 0,
                children_bad: 0,
                children_final: 0,
                children_r: 0,
                bad_content: 0.0,
                bad_child_content: 0.0,
                tube_escapes: 0,
                disjoint: true,
            };
            for ball in &active {
                let open = self
                    .points_within(&ball.center, ball.radius)
                    .into_iter()
                    .any(|q| !self.in_registry(&self.points[q]));
                if !open {
                    continue;
                }
                if self.is_final_scale(ball.radius) {
                    self.force_to_final_scale(std::slice::from_ref(ball));
                    continue;
                }
                let kind = self.classify(ball, level)?;
                match kind {
                    Kind::Good { .. } => record.good += 1,
                    Kind::Pinched { .. } => {
                        record.bad += 1;
                        record.bad_content += ball.radius.powi(k);
                    }
                    Kind::Unpinched => record.unpinched += 1,
                }
                if !second && !matches!(kind, Kind::Good { .. }) {
                    leaves.push(Ball {
                        center: ball.center.clone(),
                        radius: ball.radius,
                        label: Label::Bad,
                    });
                    continue;
                }
                self.propose(ball, &kind, &mut proposals);
            }
            let chosen = self.commit(proposals);
            let mut next = Vec::new();
            let mut generation_balls = Vec::new();
            for (p, _) in chosen {
                record.tube_escapes += usize::from(p.escape);
                match p.label {
                    Label::Good => record.children_good += 1,
                    Label::Bad => {
                        record.children_bad += 1;
                        if p.bad_parent {
                            record.bad_child_content += p.radius.powi(k);
                        }
                    }
                    Label::Final => record.children_final += 1,
                    Label::RBall => record.children_r += 1,
                }
                let ball = Ball {
                    center: p.center,
                    radius: p.radius,
                    label: p.label,
                };
                match p.label {
                    Label::Good | Label::Bad => next.push(Active {
                        center: ball.center.clone(),
                        radius: ball.radius,
                    }),
                    Label::Final => leaves.push(ball.clone()),
                    Label::RBall => {}
                }
                generation_balls.push(ball);
            }
            record.disjoint = first_overlap(&generation_balls).is_none();
            if record.bad_child_content > 0.5 * record.bad_content * (1.0 + 1e-9) {
                return Err(Error::DecayViolation {
                    generation,
                    content: record.bad_child_content,
                    bound: 0.5 * record.bad_content,
                });
            }
            records.push(record);
            active = next;
            generation += 1;
        }
        Ok((leaves, records, truncated))
    }

    /// Re-covers the stratum points of `balls` by r-balls.
    fn force_to_final_scale(&mut self, balls: &[Active]) -> usize {
        let before = self.registry.len();
        for b in balls {
            for q in self.points_within(&b.center, b.radius) {
                if !self.in_registry(&self.points[q]) {
                    self.registry.push(self.points[q].clone());
                }
            }
        }
        self.registry.len() - before
    }

    /// Points of the stratum inside any start ball must lie in a leaf or r-ball.
    fn coverage_ok(&self, starts: &[Active], leaves: &[Ball]) -> bool {
        let tol = 1.0 + 1e-9;
        (0..self.points.len())
            .filter(|&i| {
                starts
                    .iter()
                    .any(|s| dist(&self.points[i], &s.center) <= s.radius * (1.0 + REL))
            })
            .all(|i| {
                let q = &self.points[i];
                leaves.iter().any(|b| dist(&b.center, q) <= b.radius * tol)
                    || self.registry.iter().any(|c| dist(c, q) <= self.cfg.r * tol)
            })
    }

    /// Largest `θ̂(y, r_x · factor) − (level − δ)` over final leaves and the
    /// stratum points in their doubled balls.
    fn energy_drop_margin(&mut self, leaves: &[Ball], level: f64) -> Result<f64> {
        let mut worst = f64::NEG_INFINITY;
        for b in leaves.iter().filter(|b| b.label == Label::Final) {
            let ys = self.points_within(&b.center, 2.0 * b.radius);
            let values = self.theta_hats(&ys, b.radius * self.cfg.radius_factor)?;
            for v in values {
                worst = worst.max(v - (level - self.levels.delta));
            }
        }
        Ok(worst)
    }

    fn registry_balls(&self) -> Vec<Ball> {
        self.registry
            .iter()
            .map(|c| Ball {
                center: c.clone(),
                radius: self.cfg.r,
                label: Label::RBall,
            })
            .collect()
    }

    fn stage(&mut self, starts: Vec<Active>, level: f64, second: bool) -> Result<CoverRun> {
        let registry_before = self.registry.len();
        let (leaves, generations, truncated) = self.run(starts.clone(), level, second)?;
        let coverage_ok = self.coverage_ok(&starts, &leaves);
        let margin = self.energy_drop_margin(&leaves, level)?;
        let mut covering = BallCovering::new(self.map.dim(), self.cfg.k);
        covering.balls = leaves;
        covering
            .balls
            .extend(self.registry_balls().into_iter().skip(registry_before));
        covering.canonicalize();
        let content = packing_sum(&covering);
        let constant = if second {
            self.cfg.final_constant
        } else {
            self.cfg.content_constant
        };
        let content_bound = constant * starts.iter().map(|s| s.radius.powi(self.cfg.k as i32)).sum::<f64>();
        Ok(CoverRun {
            level,
            delta: self.levels.delta,
            tube_escapes: generations.iter().map(|g| g.tube_escapes).sum(),
            disjoint_ok: generations.iter().all(|g| g.disjoint),
            decay_ok: true,
            energy_drop_ok: margin <= self.levels.tolerance,
            energy_drop_margin: if margin.is_finite() { margin } else { 0.0 },
            truncated,
            coverage_ok,
            content,
            content_ok: content <= content_bound,
            content_bound,
            covering,
            generations,
        })
    }
}

fn project(p: &[f64], origin: &[f64], basis: &[Vec<f64>]) -> Vec<f64> {
    let d = sub(p, origin);
    let mut out = origin.to_vec();
    for b in basis {
        let c = dot(&d, b);
        for (o, x) in out.iter_mut().zip(b) {
            *o += c * x;
        }
    }
    out
}

fn check_strata(map: &SampledMap, strata: &[Vec<f64>], cfg: &CoveringConfig) -> Result<()> {
    cfg.validate(map.dim())?;
    let o = map.domain().origin();
    if strata.iter().any(|p| p.len() != map.dim() || dist(p, o) > 1.0 + REL) {
        return Err(Error::Argument(
            "stratum points must lie in the unit ball about the domain origin".into(),
        ));
    }
    Ok(())
}

fn single_start(map: &SampledMap, cfg: &CoveringConfig) -> Vec<Active> {
    vec![Active {
        center: map.domain().origin().to_vec(),
        radius: cfg.initial_radius,
    }]
}

/// First covering stage on `B_R(o)`: good balls are refined, all others are
/// bad leaves, and branches stop at radius r.
pub fn cover_strata_i(map: &SampledMap, strata: &[Vec<f64>], cfg: &CoveringConfig) -> Result<CoverRun> {
    check_strata(map, strata, cfg)?;
    let levels = resolve_levels(map, strata, cfg)?;
    let mut engine = Engine::new(map, strata, cfg, levels);
    engine.stage(single_start(map, cfg), levels.energy, false)
}

/// Second covering stage on `B_R(o)`: bad balls are re-covered until every
/// leaf has radius r or carries the energy drop. Bad content must halve per
/// generation.
pub fn cover_strata_ii(map: &SampledMap, strata: &[Vec<f64>], cfg: &CoveringConfig) -> Result<CoverRun> {
    check_strata(map, strata, cfg)?;
    let levels = resolve_levels(map, strata, cfg)?;
    let mut engine = Engine::new(map, strata, cfg, levels);
    engine.stage(single_start(map, cfg), levels.energy, true)
}

#[derive(Debug, Clone, Serialize)]
pub struct RoundRecord {
    pub index: usize,
    pub level: f64,
    pub start_balls: usize,
    pub start_radius_max: f64,
    pub run: CoverRun,
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct MinkowskiEstimate {
    pub r: f64,
    pub exponent: usize,
    pub ambient_spacing: f64,
    /// `Vol(B_r(𝒮) ∩ B_1)`.
    pub strata_volume: f64,
    /// `Vol(∪ B_{2r}(x) ∩ B_1)` over final centers; bounds the stratum volume.
    pub covering_volume: f64,
    pub strata_ratio: f64,
    pub covering_ratio: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct InductionReport {
    pub config: CoveringConfig,
    pub levels: ResolvedLevels,
    pub f_bound: f64,
    pub f_gamma: f64,
    pub seeds: SeedReduction,
    pub strata_points: usize,
    pub rounds: Vec<RoundRecord>,
    pub round_bound: usize,
    /// Balls still above radius r after the last round, re-covered by r-balls.
    pub forced_terminal: usize,
    pub final_covering: BallCovering,
    pub final_content: f64,
    /// `C_F^(rounds) Σ_seeds R_seed^k`.
    pub content_bound: f64,
    pub minkowski: MinkowskiEstimate,
    pub coverage_ok: bool,
    pub disjoint_ok: bool,
    pub radii_ok: bool,
    pub rounds_ok: bool,
    pub energy_drop_ok: bool,
    pub decay_ok: bool,
    pub content_ok: bool,
}

impl InductionReport {
    #[must_use]
    pub fn all_checks_pass(&self) -> bool {
        self.coverage_ok
            && self.disjoint_ok
            && self.radii_ok
            && self.rounds_ok
            && self.energy_drop_ok
            && self.decay_ok
            && self.rounds.iter().all(|r| r.run.disjoint_ok && r.run.coverage_ok)
    }
}

/// Ambient spacing for Minkowski estimates at scale r.
#[must_use]
pub fn ambient_spacing(dim: usize, r: f64) -> f64 {
    if dim <= 3 {
        r / 16.0
    } else {
        r / 8.0
    }
}

/// Runs the second covering stage at levels `E − iδ`, i = 0…⌊E/δ⌋, from the
/// seeds of the initial scale reduction. Final balls of one round are
/// re-covered by `ρ r_y`-balls to seed the next.
pub fn energy_induction(map: &SampledMap, strata: &[Vec<f64>], cfg: &CoveringConfig) -> Result<InductionReport> {
    check_strata(map, strata, cfg)?;
    let m = map.dim();
    let levels = if strata.is_empty() {
        ResolvedLevels {
            energy: cfg.energy.unwrap_or(0.0),
            delta: cfg.delta.unwrap_or(0.0),
            energy_bound: cfg.energy_bound.unwrap_or(0.0),
            tolerance: cfg.tolerance.unwrap_or(0.0),
        }
    } else {
        resolve_levels(map, strata, cfg)?
    };
    let fb = hoelder_f_bound(map, cfg.tension_exponent)?;
    let mut report_seeds = None;
    let mut rounds = Vec::new();
    let mut forced = 0;
    let mut engine = Engine::new(map, strata, cfg, levels);
    let mut round_bound = 0;
    let mut start_content = 0.0;
    if !strata.is_empty() {
        if !(levels.delta > 0.0) {
            return Err(Error::Config(format!("pinch δ = {} must be positive", levels.delta)));
        }
        let seeds = initial_scale_reduction(map, fb.bound, fb.gamma, levels.delta, cfg.k)?;
        let mut starts: Vec<Active> = seeds
            .seeds
            .iter()
            .filter(|c| strata.iter().any(|p| dist(p, c) <= seeds.seed_radius * (1.0 + REL)))
            .map(|c| Active {
                center: c.clone(),
                radius: seeds.seed_radius,
            })
            .collect();
        start_content = starts.iter().map(|s| s.radius.powi(cfg.k as i32)).sum();
        report_seeds = Some(seeds);
        round_bound = (levels.energy / levels.delta).floor() as usize + 1;
        for i in 0..round_bound {
            if starts.is_empty() {
                break;
            }
            let level = levels.energy - i as f64 * levels.delta;
            let record_starts = starts.len();
            let radius_max = starts.iter().map(|s| s.radius).fold(0.0, f64::max);
            let run = engine.stage(std::mem::take(&mut starts), level, true)?;
            let finals: Vec<Active> = run
                .covering
                .balls
                .iter()
                .filter(|b| b.label == Label::Final)
                .map(|b| Active {
                    center: b.center.clone(),
                    radius: b.radius,
                })
                .collect();
            let mut proposals = Vec::new();
            for f in &finals {
                engine.propose(f, &Kind::Unpinched, &mut proposals);
            }
            for (p, _) in engine.commit(proposals) {
                if p.label != Label::RBall {
                    starts.push(Active {
                        center: p.center,
                        radius: p.radius,
                    });
                }
            }
            rounds.push(RoundRecord {
                index: i,
                level,
                start_balls: record_starts,
                start_radius_max: radius_max,
                run,
            });
        }
        forced = engine.force_to_final_scale(&starts);
    }
    let seeds = match report_seeds {
        Some(s) => s,
        None => initial_scale_reduction(map, fb.bound, fb.gamma, levels.delta.max(f64::MIN_POSITIVE), cfg.k)?,
    };

    let mut final_covering = BallCovering::new(m, cfg.k);
    final_covering.balls = engine.registry_balls();
    final_covering.canonicalize();
    let final_content = packing_sum(&final_covering);
    let coverage_ok = strata.iter().all(|q| {
        final_covering
            .balls
            .iter()
            .any(|b| dist(&b.center, q) <= b.radius * (1.0 + 1e-9))
    });
    let origin = map.domain().origin().to_vec();
    let h = ambient_spacing(m, cfg.r);
    let strata_volume = minkowski_content(strata, cfg.r, &origin, 1.0, h)?;
    let covering_volume = minkowski_content(&final_covering.centers(), 2.0 * cfg.r, &origin, 1.0, h)?;
    let exponent = m - cfg.k;
    let scale = cfg.r.powi(exponent as i32);
    let content_bound = cfg.final_constant.powi(rounds.len() as i32) * start_content;
    Ok(InductionReport {
        config: cfg.clone(),
        levels,
        f_bound: fb.bound,
        f_gamma: fb.gamma,
        seeds,
        strata_points: strata.len(),
        round_bound,
        forced_terminal: forced,
        coverage_ok,
        disjoint_ok: check_disjoint(&final_covering).is_ok(),
        radii_ok: final_covering.balls.iter().all(|b| b.radius <= cfg.r * (1.0 + REL)),
        rounds_ok: rounds.len() <= round_bound,
        energy_drop_ok: rounds.iter().all(|r| r.run.energy_drop_ok),
        decay_ok: rounds.iter().all(|r| r.run.decay_ok),
        content_ok: final_content <= content_bound || strata.is_empty(),
        content_bound,
        final_content,
        minkowski: MinkowskiEstimate {
            r: cfg.r,
            exponent,
            ambient_spacing: h,
            strata_volume,
            covering_volume,
            strata_ratio: strata_volume / scale,
            covering_ratio: covering_volume / scale,
        },
        final_covering,
        rounds,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::map_model::{sample_map, CatalogEntry, GridDomain};

    fn map(name: &str, m: usize, cells: u32) -> SampledMap {
        let d = GridDomain::centered(m, 3.0, cells).unwrap();
        sample_map(&CatalogEntry::parse(name, m).unwrap(), &d).unwrap()
    }

    #[test]
    fn config_validation() {
        let c = CoveringConfig::default();
        assert!(c.validate(3).is_ok());
        assert!(CoveringConfig {
            rho: 0.005,
            ..c.clone()
        }
        .validate(3)
        .is_err());
        assert!(CoveringConfig { rho: 0.5, ..c.clone() }.validate(3).is_err());
        assert!(CoveringConfig { r: 2.0, ..c.clone() }.validate(3).is_err());
        assert!(CoveringConfig { k: 3, ..c }.validate(3).is_err());
    }

    #[test]
    fn seed_examples() {
        let u = map("radial", 3, 16);
        let s = initial_scale_reduction(&u, 0.0, 1.0, 0.1, 0).unwrap();
        assert_eq!((s.r0, s.seeds.len()), (1.0, 1));
        let s = initial_scale_reduction(&u, 1.0, 1.0, 0.1, 0).unwrap();
        assert!((s.r0 - 0.1).abs() < 1e-15);
        assert!(s.disjoint);
        let balls: Vec<Ball> = s
            .seeds
            .iter()
            .map(|c| Ball {
                center: c.clone(),
                radius: s.r0 / 4.0 * 5.0,
                label: Label::Good,
            })
            .collect();
        assert!(first_overlap(&balls).is_none());
        let expected = unit_ball_volume(3) * 1.05f64.powi(3) / (0.1f64 / 3f64.sqrt()).powi(3);
        assert!(
            (s.seeds.len() as f64 / expected - 1.0).abs() < 0.1,
            "{} vs {expected}",
            s.seeds.len()
        );
        assert!(s.content <= s.content_bound);
        assert!(initial_scale_reduction(&u, 1.0, 0.0, 0.1, 0).is_err());
    }

    #[test]
    fn vitali_examples() {
        let b = |x: f64, r: f64| Ball {
            center: vec![x, 0.0],
            radius: r,
            label: Label::Good,
        };
        let disjoint = vec![b(0.0, 1.0), b(5.0, 1.0)];
        assert_eq!(vitali_subcover(&disjoint), disjoint);
        assert_eq!(vitali_subcover(&[b(0.0, 1.0), b(0.0, 1.0)]).len(), 1);
        let kept = vitali_subcover(&[b(0.0, 0.5), b(0.1, 1.0)]);
        assert_eq!(kept, vec![b(0.1, 1.0)]);
    }

    #[test]
    fn empty_stratum_gives_empty_covering() {
        let u = map("constant", 3, 16);
        let cfg = CoveringConfig::default();
        let rep = energy_induction(&u, &[], &cfg).unwrap();
        assert!(rep.final_covering.is_empty());
        assert!(rep.rounds.is_empty());
        assert_eq!(rep.minkowski.strata_volume, 0.0);
        let run = cover_strata_i(
            &u,
            &[],
            &CoveringConfig {
                energy: Some(1.0),
                ..cfg
            },
        )
        .unwrap();
        assert!(run.covering.is_empty());
    }

    #[test]
    fn vertex_stratum_is_covered_by_one_r_ball() {
        let u = map("radial", 3, 32);
        let cfg = CoveringConfig {
            r: 1.0 / 16.0,
            ..CoveringConfig::default()
        };
        let strata = vec![vec![0.0; 3]];
        let one = cover_strata_i(&u, &strata, &cfg).unwrap();
        assert_eq!(one.covering.len(), 1);
        assert_eq!(one.covering.balls[0].label, Label::RBall);
        let rep = energy_induction(&u, &strata, &cfg).unwrap();
        assert_eq!(rep.final_covering.len(), 1);
        assert!(rep.all_checks_pass());
        assert!(rep.rounds.len() <= rep.round_bound);
    }

    #[test]
    fn unpinched_points_become_final() {
        let u = map("radial", 3, 32);
        let cfg = CoveringConfig {
            r: 1.0 / 256.0,
            rho: 1.0 / 128.0,
            ..CoveringConfig::default()
        };
        // Smooth points only: pinched sets at level E are empty.
        let strata = vec![vec![0.5, 0.0, 0.0], vec![0.0, 0.5, 0.0]];
        let run = cover_strata_ii(&u, &strata, &cfg).unwrap();
        assert!(run.coverage_ok && run.disjoint_ok);
        assert!(run.covering.balls.iter().all(|b| b.label == Label::Final));
        assert!(run.energy_drop_ok);
    }
}
