//! Normalized energies θ and θ̂, the annular radial energy, condition (f)
//! and monotonicity defects.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::map_model::quadrature::integrate_ball;
use crate::map_model::{Sample, SampledMap};
use crate::vecmath::{dist, unit_ball_volume};

/// Grid spacing at which [`default_tolerance`] equals `0.05·max(1, Λ)`, in units of R.
pub const REFERENCE_CELLS: f64 = 128.0;

fn check_scale(r: f64) -> Result<()> {
    if r > 0.0 && r.is_finite() {
        Ok(())
    } else {
        Err(Error::Argument(format!("scale {r} must be positive")))
    }
}

/// Raw ball integrals `∫|∇u|²`, `∫⟨(y−x)·∇u, f⟩` and `∫|f|²|y−x|^(4−m)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BallIntegrals {
    pub dirichlet: f64,
    pub cross: f64,
    pub weighted_tension: f64,
}

pub fn ball_integrals(map: &SampledMap, x: &[f64], r: f64, with_tension: bool) -> Result<BallIntegrals> {
    check_scale(r)?;
    map.domain().check_ball(x, r)?;
    let m = map.dim();
    let n = map.target_dim();
    let floor = map.domain().spacing() / 100.0;
    let exponent = 4.0 - m as f64;
    let acc = integrate_ball(map, x, r, 3, with_tension, |y, s: &Sample, w, acc| {
        acc[0] += w * s.grad_sq();
        if !with_tension || !s.tension_valid {
            return;
        }
        let mut cross = 0.0;
        for a in 0..n {
            let mut radial = 0.0;
            for i in 0..m {
                radial += (y[i] - x[i]) * s.jacobian[i * n + a];
            }
            cross += radial * s.tension[a];
        }
        acc[1] += w * cross;
        let d = dist(y, x).max(floor);
        acc[2] += w * s.tension_sq() * d.powf(exponent);
    });
    Ok(BallIntegrals {
        dirichlet: acc[0],
        cross: acc[1],
        weighted_tension: acc[2],
    })
}

/// θ(x,r) = r^(2−m) ∫_{B_r(x)} |∇u|².
pub fn theta(map: &SampledMap, x: &[f64], r: f64) -> Result<f64> {
    let b = ball_integrals(map, x, r, false)?;
    Ok(r.powi(2 - map.dim() as i32) * b.dirichlet)
}

/// Returns `(θ, θ̂)` from one pass over the ball.
pub fn theta_pair(map: &SampledMap, x: &[f64], r: f64) -> Result<(f64, f64)> {
    let m = map.dim();
    if m < 3 {
        return Err(Error::UnsupportedDimension {
            dim: m,
            reason: "θ̂ divides by m − 2",
        });
    }
    let b = ball_integrals(map, x, r, true)?;
    let scale = r.powi(2 - m as i32);
    let mm2 = m as f64 - 2.0;
    let th = scale * b.dirichlet;
    // The weighted |f|² term carries no r^(2−m) factor.
    let hat = th - 2.0 / mm2 * scale * b.cross + b.weighted_tension / (mm2 * mm2);
    Ok((th, hat))
}

/// θ̂(x,r) = θ − (2/(m−2)) r^(2−m) ∫⟨(y−x)·∇u, f⟩ + (m−2)^(−2) ∫|f|²/|y−x|^(m−4).
pub fn theta_hat(map: &SampledMap, x: &[f64], r: f64) -> Result<f64> {
    theta_pair(map, x, r).map(|(_, h)| h)
}

/// ∫_{B_r(x)∖B_s(x)} |(y−x)·∇u|² |y−x|^(−m).
pub fn radial_energy(map: &SampledMap, x: &[f64], s: f64, r: f64) -> Result<f64> {
    if !(s < r) || s < 0.0 {
        return Err(Error::Argument(format!(
            "annulus needs 0 <= s < r, got s = {s}, r = {r}"
        )));
    }
    map.domain().check_ball(x, r)?;
    let m = map.dim();
    let n = map.target_dim();
    let acc = integrate_ball(map, x, r, 1, false, |y, smp: &Sample, w, acc| {
        let d = dist(y, x);
        if d <= s {
            return;
        }
        let mut sq = 0.0;
        for a in 0..n {
            let mut radial = 0.0;
            for i in 0..m {
                radial += (y[i] - x[i]) * smp.jacobian[i * n + a];
            }
            sq += radial * radial;
        }
        acc[0] += w * sq / d.powi(m as i32);
    });
    Ok(acc[0])
}

/// W_r(x) = radial energy over `B_{8r}(x) ∖ B_r(x)`.
pub fn w_functional(map: &SampledMap, x: &[f64], r: f64) -> Result<f64> {
    radial_energy(map, x, r, 8.0 * r)
}

/// θ(x,r) ≤ ε₀.
pub fn epsilon_regularity_flag(map: &SampledMap, x: &[f64], r: f64, eps0: f64) -> Result<bool> {
    Ok(theta(map, x, r)? <= eps0)
}

/// Λ = θ(o, R − h), the energy of the largest valid ball.
pub fn energy_bound(map: &SampledMap) -> Result<f64> {
    let d = map.domain();
    theta(map, d.origin(), d.valid_radius())
}

/// τ_q = 0.05·max(1, Λ)·(h / (R/128)).
#[must_use]
pub fn default_tolerance(map: &SampledMap, energy_bound: f64) -> f64 {
    let d = map.domain();
    0.05 * energy_bound.max(1.0) * d.spacing() / (d.radius() / REFERENCE_CELLS)
}

#[derive(Debug, Clone, Serialize)]
pub struct DefectPair {
    pub outer: f64,
    pub inner: f64,
    pub radial_energy: f64,
    pub hat_drop: f64,
    pub defect: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct DefectReport {
    pub center: Vec<f64>,
    pub max_defect: f64,
    pub pairs: Vec<DefectPair>,
}

/// Max over consecutive scales of `max(0, W_{s,r} − (θ̂(r) − θ̂(s)))`.
pub fn monotonicity_defect(map: &SampledMap, x: &[f64], scales: &[f64]) -> Result<DefectReport> {
    if scales.windows(2).any(|w| w[1] >= w[0]) {
        return Err(Error::Argument("scales must be strictly descending".into()));
    }
    let hats = scales
        .iter()
        .map(|&r| theta_hat(map, x, r))
        .collect::<Result<Vec<_>>>()?;
    let mut pairs = Vec::new();
    for j in 1..scales.len() {
        let (r, s) = (scales[j - 1], scales[j]);
        let radial = radial_energy(map, x, s, r)?;
        let drop = hats[j - 1] - hats[j];
        pairs.push(DefectPair {
            outer: r,
            inner: s,
            radial_energy: radial,
            hat_drop: drop,
            defect: (radial - drop).max(0.0),
        });
    }
    let max_defect = pairs.iter().map(|p| p.defect).fold(0.0, f64::max);
    Ok(DefectReport {
        center: x.to_vec(),
        max_defect,
        pairs,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct FConditionReport {
    pub bound: f64,
    pub gamma: f64,
    /// `r^(4−m)∫|f|² / (𝓕 r^γ)` per ball; infinite when 𝓕 = 0 and f ≠ 0.
    pub ratios: Vec<f64>,
    pub pass: bool,
}

/// Checks `r^(4−m) ∫_{B_r(x)} |f|² ≤ 𝓕 r^γ` on each ball.
pub fn check_f_condition(
    map: &SampledMap,
    bound: f64,
    gamma: f64,
    balls: &[(Vec<f64>, f64)],
) -> Result<FConditionReport> {
    if !(gamma > 0.0) || bound < 0.0 {
        return Err(Error::Argument("need γ > 0 and 𝓕 >= 0".into()));
    }
    let m = map.dim() as i32;
    let mut ratios = Vec::with_capacity(balls.len());
    for (x, r) in balls {
        map.domain().check_ball(x, *r)?;
        let acc = integrate_ball(map, x, *r, 1, true, |_, s: &Sample, w, acc| {
            if s.tension_valid {
                acc[0] += w * s.tension_sq();
            }
        });
        let lhs = r.powi(4 - m) * acc[0];
        let rhs = bound * r.powf(gamma);
        ratios.push(if lhs == 0.0 {
            0.0
        } else if rhs == 0.0 {
            f64::INFINITY
        } else {
            lhs / rhs
        });
    }
    let pass = ratios.iter().all(|&q| q <= 1.0);
    Ok(FConditionReport {
        bound,
        gamma,
        ratios,
        pass,
    })
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct FBound {
    pub bound: f64,
    pub gamma: f64,
    pub lp_norm: f64,
}

/// 𝓕 = ω_m^(1−2/p) ‖f‖²_{L^p(B_{R−h})} and γ = 4 − 2m/p, from Hölder on each ball.
pub fn hoelder_f_bound(map: &SampledMap, p: f64) -> Result<FBound> {
    let m = map.dim() as f64;
    if !(p >= 2.0 && p > m / 2.0) {
        return Err(Error::Argument(format!("need p >= 2 and p > m/2, got p = {p}")));
    }
    let d = map.domain();
    let acc = integrate_ball(map, d.origin(), d.valid_radius(), 1, true, |_, s: &Sample, w, acc| {
        if s.tension_valid {
            acc[0] += w * s.tension_sq().powf(p / 2.0);
        }
    });
    let lp_norm = acc[0].powf(1.0 / p);
    let omega = unit_ball_volume(map.dim());
    Ok(FBound {
        bound: omega.powf(1.0 - 2.0 / p) * lp_norm * lp_norm,
        gamma: 4.0 - 2.0 * m / p,
        lp_norm,
    })
}

/// Smallest `c ≥ 0` with `(1−a)θ̂ − c𝓕r^γ ≤ θ ≤ (1+a)θ̂ + c𝓕r^γ` on every sample `(θ, θ̂, r)`.
#[must_use]
pub fn fit_hatbounds_constant(samples: &[(f64, f64, f64)], bound: f64, gamma: f64, a: f64) -> f64 {
    samples
        .iter()
        .map(|&(th, hat, r)| {
            let excess = ((1.0 - a) * hat - th).max(th - (1.0 + a) * hat).max(0.0);
            if excess == 0.0 {
                0.0
            } else {
                excess / (bound * r.powf(gamma))
            }
        })
        .fold(0.0, f64::max)
}

/// θ, θ̂, W and defects along dyadic scales `top·2^(−j)` at one center.
#[derive(Debug, Clone, Serialize)]
pub struct EnergyProfile {
    pub center: Vec<f64>,
    pub scales: Vec<f64>,
    pub theta: Vec<f64>,
    pub theta_hat: Vec<f64>,
    /// W_{8r,r}; absent where `B_{8r}` leaves the valid region.
    pub w: Vec<Option<f64>>,
    /// Defect against the previous (larger) scale.
    pub defect: Vec<Option<f64>>,
    pub f_params: Option<(f64, f64)>,
    pub tolerance: f64,
}

impl EnergyProfile {
    pub fn compute(
        map: &SampledMap,
        x: &[f64],
        top: f64,
        levels: usize,
        tolerance: f64,
        f_params: Option<(f64, f64)>,
    ) -> Result<Self> {
        let scales: Vec<f64> = (0..levels).map(|j| top * 0.5f64.powi(j as i32)).collect();
        let mut theta = Vec::new();
        let mut theta_hat = Vec::new();
        let mut w = Vec::new();
        for &r in &scales {
            let (t, h) = theta_pair(map, x, r)?;
            theta.push(t);
            theta_hat.push(h);
            w.push(if map.domain().ball_is_valid(x, 8.0 * r) {
                Some(w_functional(map, x, r)?)
            } else {
                None
            });
        }
        let mut defect = vec![None];
        for j in 1..scales.len() {
            let radial = radial_energy(map, x, scales[j], scales[j - 1])?;
            defect.push(Some((radial - (theta_hat[j - 1] - theta_hat[j])).max(0.0)));
        }
        Ok(Self {
            center: x.to_vec(),
            scales,
            theta,
            theta_hat,
            w,
            defect,
            f_params,
            tolerance,
        })
    }

    /// θ̂ nonincreasing toward smaller scales within the declared tolerance.
    #[must_use]
    pub fn is_monotone(&self) -> bool {
        self.theta_hat.windows(2).all(|p| p[1] <= p[0] + self.tolerance)
    }

    /// Rows `center..., scale, theta, theta_hat, W, defect`; absent values are empty cells.
    #[must_use]
    pub fn csv(&self) -> String {
        let m = self.center.len();
        let mut out = String::new();
        let head: Vec<String> = (0..m).map(|i| format!("x{i}")).collect();
        out.push_str(&head.join(","));
        out.push_str(",scale,theta,theta_hat,W,defect\n");
        let opt = |v: Option<f64>| v.map_or_else(String::new, |x| x.to_string());
        for j in 0..self.scales.len() {
            let c: Vec<String> = self.center.iter().map(f64::to_string).collect();
            out.push_str(&format!(
                "{},{},{},{},{},{}\n",
                c.join(","),
                self.scales[j],
                self.theta[j],
                self.theta_hat[j],
                opt(self.w[j]),
                opt(self.defect[j])
            ));
        }
        out
    }
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
    fn constant_map_has_zero_energy() {
        let u = map("constant", 3, 32);
        assert_eq!(theta(&u, &[0.3, 0.0, 0.0], 1.0).unwrap(), 0.0);
        assert_eq!(theta_hat(&u, &[0.3, 0.0, 0.0], 1.0).unwrap(), 0.0);
        assert!(epsilon_regularity_flag(&u, &[0.0; 3], 1.0, 1e-9).unwrap());
    }

    #[test]
    fn radial_theta_matches_closed_form() {
        let u = map("radial", 3, 96);
        let t = theta(&u, &[0.0; 3], 1.0).unwrap();
        assert!((t / (8.0 * PI) - 1.0).abs() < 0.01, "{t}");
        assert!(!epsilon_regularity_flag(&u, &[0.0; 3], 1.0, 1.0).unwrap());
    }

    #[test]
    fn smooth_point_has_small_energy_at_small_scale() {
        let u = map("radial", 3, 64);
        assert!(epsilon_regularity_flag(&u, &[1.0, 0.0, 0.0], 0.05, 1.0).unwrap());
    }

    #[test]
    fn radial_energy_vanishes_at_the_vertex() {
        let u = map("radial", 3, 64);
        let w = radial_energy(&u, &[0.0; 3], 0.25, 1.0).unwrap();
        assert!(w.abs() < 1e-12, "{w}");
        assert!(radial_energy(&u, &[0.0; 3], 1.0, 0.5).is_err());
    }

    #[test]
    fn off_center_annulus_energy_is_bounded_by_hat_drop() {
        let u = map("radial", 3, 128);
        let x = [1.0, 0.0, 0.0];
        let w = radial_energy(&u, &x, 0.1, 0.2).unwrap();
        assert!(w > 0.0);
        let drop = theta_hat(&u, &x, 0.2).unwrap() - theta_hat(&u, &x, 0.1).unwrap();
        let lambda = 8.0 * PI;
        assert!(w <= drop + default_tolerance(&u, lambda), "{w} vs {drop}");
    }

    #[test]
    fn f_condition_degenerate_bound_reports_infinity() {
        let u = map("perturbed", 3, 32);
        let rep = check_f_condition(&u, 0.0, 1.0, &[(vec![0.5, 0.0, 0.0], 0.5)]).unwrap();
        assert!(rep.ratios[0].is_infinite());
        assert!(!rep.pass);
        let c = map("constant", 3, 32);
        let rep = check_f_condition(&c, 1.0, 1.0, &[(vec![0.0; 3], 1.0)]).unwrap();
        assert_eq!(rep.ratios[0], 0.0);
        assert!(rep.pass);
    }

    #[test]
    fn hoelder_bound_passes_condition_f() {
        let u = map("perturbed", 3, 48);
        let fb = hoelder_f_bound(&u, 2.0).unwrap();
        assert!(fb.lp_norm > 0.0 && fb.lp_norm.is_finite());
        let balls = vec![
            (vec![0.0; 3], 1.0),
            (vec![0.5, 0.0, 0.0], 0.5),
            (vec![0.0, 0.3, -0.2], 0.25),
        ];
        let rep = check_f_condition(&u, fb.bound, fb.gamma, &balls).unwrap();
        assert!(rep.pass, "{:?}", rep.ratios);
    }

    #[test]
    fn profile_csv_has_one_row_per_scale() {
        let u = map("radial", 3, 32);
        let p = EnergyProfile::compute(&u, &[0.0; 3], 1.0, 3, 1.0, None).unwrap();
        assert_eq!(p.csv().lines().count(), 4);
        assert!(p.w[0].is_none());
        assert!(p.is_monotone());
    }
}
