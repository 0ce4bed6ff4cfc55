//! Invariant suites behind `harmstrat verify`.

use std::f64::consts::PI;
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use serde_json::{json, Value};

use harmstrat::covering::{cover_strata_ii, energy_induction, CoveringConfig};
use harmstrat::energy::{default_tolerance, energy_bound, monotonicity_defect, theta};
use harmstrat::jones_beta::{beta2_bruteforce, beta2_value, DiscreteMeasure};
use harmstrat::map_model::{sample_map, CatalogEntry, GridDomain, SampledMap};
use harmstrat::reifenberg::{discrete_reifenberg_check, packing_sum, BallCovering, Label};
use harmstrat::symmetry::{grid_strata, ksym_distance_with};

use crate::commands::{loglog_slope, with_threads, Outcome};
use crate::config::RunConfig;
use crate::error::CliError;

/// Slack for comparisons whose exact value is zero.
const ZERO_SLACK: f64 = 1e-12;

#[derive(Debug, Clone, Serialize)]
pub struct Check {
    pub name: String,
    pub pass: bool,
    pub measured: Value,
    pub threshold: Value,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Status {
    Pass,
    Fail,
    Skipped,
}

#[derive(Debug, Clone, Serialize)]
pub struct SuiteReport {
    pub name: String,
    pub status: Status,
    pub note: Option<String>,
    pub checks: Vec<Check>,
}

impl SuiteReport {
    fn new(name: &str, checks: Vec<Check>) -> Self {
        let status = if checks.iter().all(|c| c.pass) {
            Status::Pass
        } else {
            Status::Fail
        };
        Self {
            name: name.to_string(),
            status,
            note: None,
            checks,
        }
    }

    fn skipped(name: &str, note: &str) -> Self {
        Self {
            name: name.to_string(),
            status: Status::Skipped,
            note: Some(note.to_string()),
            checks: Vec::new(),
        }
    }

    #[must_use]
    pub fn failed(&self) -> bool {
        self.status == Status::Fail
    }
}

fn check(name: impl Into<String>, pass: bool, measured: impl Serialize, threshold: impl Serialize) -> Check {
    Check {
        name: name.into(),
        pass,
        measured: serde_json::to_value(measured).unwrap_or(Value::Null),
        threshold: serde_json::to_value(threshold).unwrap_or(Value::Null),
    }
}

fn catalog_map(name: &str, dim: usize, radius: f64, cells: u32) -> Result<SampledMap, CliError> {
    let entry = CatalogEntry::parse(name, dim)?;
    Ok(sample_map(&entry, &GridDomain::centered(dim, radius, cells)?)?)
}

fn random_in_ball(rng: &mut ChaCha8Rng, dim: usize, radius: f64) -> Vec<f64> {
    loop {
        let p: Vec<f64> = (0..dim).map(|_| rng.gen_range(-1.0..1.0)).collect();
        if p.iter().map(|c| c * c).sum::<f64>() <= 1.0 {
            return p.into_iter().map(|c| c * radius).collect();
        }
    }
}

fn random_measure(rng: &mut ChaCha8Rng, dim: usize, max_atoms: usize) -> DiscreteMeasure {
    let n = rng.gen_range(1..=max_atoms);
    let atoms = (0..n)
        .map(|_| (random_in_ball(rng, dim, 1.0), rng.gen_range(0.1..1.0)))
        .collect();
    DiscreteMeasure::new(dim, atoms).expect("finite positive atoms")
}

/// θ(0, r) of x/|x| against its closed form: 8π for m = 3 at three scales, 3π² for m = 4.
pub fn suite_energy(cfg: &RunConfig) -> Result<SuiteReport, CliError> {
    let u3 = catalog_map("radial", 3, cfg.domain_radius, cfg.verify_fine_cells)?;
    let mut checks = Vec::new();
    for r in [1.0, 0.5, 0.25] {
        let t = theta(&u3, &[0.0; 3], r)?;
        let rel = (t / (8.0 * PI) - 1.0).abs();
        checks.push(check(
            format!("radial m=3 theta(0,{r}) = 8pi"),
            rel <= 0.01,
            json!({"theta": t, "relative_error": rel}),
            0.01,
        ));
    }
    let u4 = catalog_map("radial", 4, cfg.domain_radius, cfg.verify_cells)?;
    let t = theta(&u4, &[0.0; 4], 1.0)?;
    let rel = (t / (3.0 * PI * PI) - 1.0).abs();
    checks.push(check(
        "radial m=4 theta(0,1) = 3pi^2",
        rel <= 0.01,
        json!({"theta": t, "relative_error": rel}),
        0.01,
    ));
    let c = catalog_map("constant", 3, cfg.domain_radius, cfg.verify_cells)?;
    let t = theta(&c, &[0.3, 0.0, 0.0], 1.0)?;
    checks.push(check("constant map has zero energy", t == 0.0, t, 0.0));
    Ok(SuiteReport::new("energy", checks))
}

/// Monotonicity defects at the origin and random centers, every catalog family, scales 1…1/8.
pub fn suite_monotonicity(cfg: &RunConfig) -> Result<SuiteReport, CliError> {
    let maps = [
        ("constant", 3, cfg.verify_cells),
        ("radial", 3, cfg.verify_cells),
        ("perturbed", 3, cfg.verify_cells),
        ("extension:1", 4, cfg.extension_cells),
    ];
    let scales = [1.0, 0.5, 0.25, 0.125];
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.verify_seed);
    let mut checks = Vec::new();
    for (name, dim, cells) in maps {
        let u = catalog_map(name, dim, cfg.domain_radius, cells)?;
        let tol = match cfg.covering.tolerance {
            Some(t) => t,
            None => {
                let bound = cfg.covering.energy_bound.map_or_else(|| energy_bound(&u), Ok)?;
                default_tolerance(&u, bound)
            }
        };
        // The vertex is where the annulus inequality is tight.
        let mut centers = vec![vec![0.0; dim]];
        centers.extend((0..cfg.verify_centers).map(|_| random_in_ball(&mut rng, dim, 1.0)));
        let mut worst: f64 = 0.0;
        let (mut triples, mut within) = (0usize, 0usize);
        for x in &centers {
            let rep = monotonicity_defect(&u, x, &scales)?;
            for p in &rep.pairs {
                triples += 1;
                if p.defect <= tol {
                    within += 1;
                }
            }
            worst = worst.max(rep.max_defect);
        }
        checks.push(check(
            format!("{name} m={dim} defect <= tau_q"),
            within == triples,
            json!({"max_defect": worst, "triples": triples, "within": within}),
            tol,
        ));
    }
    Ok(SuiteReport::new("monotonicity", checks))
}

/// Closed-form β² against the brute-force plane search.
pub fn suite_beta_oracle(cfg: &RunConfig) -> Result<SuiteReport, CliError> {
    if cfg.oracle_restarts == 0 {
        return Ok(SuiteReport::skipped("beta_oracle", "oracle_restarts = 0"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.verify_seed);
    let mut worst: f64 = 0.0;
    let mut agree = 0;
    for trial in 0..cfg.oracle_trials {
        let mu = random_measure(&mut rng, 3, 20);
        let k = trial % 3;
        let exact = beta2_value(&mu, &[0.0; 3], 2.0, k)?;
        let brute = beta2_bruteforce(
            &mu,
            &[0.0; 3],
            2.0,
            k,
            cfg.oracle_restarts,
            cfg.verify_seed + trial as u64,
        )?;
        let err = (exact - brute).abs();
        let scale = exact.abs().max(brute.abs());
        if scale > ZERO_SLACK {
            worst = worst.max(err / scale);
        }
        if err <= 1e-4 * scale + ZERO_SLACK {
            agree += 1;
        }
    }
    let two = DiscreteMeasure::new(3, vec![(vec![0.5, 0.0, 0.0], 0.5), (vec![-0.5, 0.0, 0.0], 0.5)])?;
    let b = beta2_value(&two, &[0.0; 3], 1.0, 0)?;
    let checks = vec![
        check(
            "beta2 matches brute force",
            agree == cfg.oracle_trials,
            json!({"agree": agree, "trials": cfg.oracle_trials, "max_relative_error": worst}),
            1e-4,
        ),
        check("two atoms at +-1/2 give 1/4", (b - 0.25).abs() <= 1e-10, b, 1e-10),
    ];
    Ok(SuiteReport::new("beta_oracle", checks))
}

/// Monotonicity of β² in μ and the off-center inequality β²(x,r) ≤ 2^(k+2) β²(y,2r).
pub fn suite_beta_lemmas(cfg: &RunConfig) -> Result<SuiteReport, CliError> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.verify_seed.wrapping_add(1));
    let (mut mono, mut off) = (0, 0);
    for trial in 0..cfg.lemma_trials {
        let k = trial % 3;
        let mu = random_measure(&mut rng, 3, 20);
        let mut atoms: Vec<(Vec<f64>, f64)> = mu.atoms().map(|(p, w)| (p.to_vec(), w)).collect();
        for _ in 0..rng.gen_range(1..=5) {
            atoms.push((random_in_ball(&mut rng, 3, 1.0), rng.gen_range(0.1..1.0)));
        }
        let nu = DiscreteMeasure::new(3, atoms)?;
        let x = random_in_ball(&mut rng, 3, 0.5);
        let r = rng.gen_range(0.25..1.0);
        if beta2_value(&mu, &x, r, k)? <= beta2_value(&nu, &x, r, k)? + ZERO_SLACK {
            mono += 1;
        }
        let offset = random_in_ball(&mut rng, 3, r);
        let y: Vec<f64> = x.iter().zip(&offset).map(|(a, b)| a + b).collect();
        let lhs = beta2_value(&mu, &x, r, k)?;
        let rhs = 2f64.powi(k as i32 + 2) * beta2_value(&mu, &y, 2.0 * r, k)?;
        if lhs <= rhs + ZERO_SLACK {
            off += 1;
        }
    }
    let n = cfg.lemma_trials;
    let checks = vec![
        check(
            "monotone in the measure",
            mono == n,
            json!({"held": mono, "trials": n}),
            n,
        ),
        check("off-center inequality", off == n, json!({"held": off, "trials": n}), n),
    ];
    Ok(SuiteReport::new("beta_lemmas", checks))
}

fn segment_covering(r: f64, len: f64) -> BallCovering {
    let mut c = BallCovering::new(3, 1);
    let n = (len / r).round() as usize;
    for i in 0..n {
        c.push(vec![-len / 2.0 + (i as f64 + 0.5) * r, 0.0, 0.0], r, Label::RBall)
            .expect("valid ball");
    }
    c
}

fn planar_covering(r: f64, side: usize) -> BallCovering {
    let mut c = BallCovering::new(3, 1);
    let mid = (side as f64 - 1.0) / 2.0;
    for i in 0..side {
        for j in 0..side {
            c.push(vec![(i as f64 - mid) * r, (j as f64 - mid) * r, 0.0], r, Label::RBall)
                .expect("valid ball");
        }
    }
    c
}

/// A collinear covering passes the Dini hypothesis; a planar one at k = 1 fails.
pub fn suite_reifenberg(cfg: &RunConfig) -> Result<SuiteReport, CliError> {
    let len = 2.0;
    let line = segment_covering(1.0 / 16.0, len);
    let rep = discrete_reifenberg_check(&line, &cfg.reifenberg, None)?;
    let packing = packing_sum(&line);
    let plane = planar_covering(1.0 / 16.0, 16);
    let planar = discrete_reifenberg_check(&plane, &cfg.reifenberg, None)?;
    let checks = vec![
        check("collinear Dini ratio", rep.max_ratio < 1e-10, rep.max_ratio, 1e-10),
        check(
            "collinear covering passes",
            rep.pass,
            rep.max_ratio,
            cfg.reifenberg.delta_sq,
        ),
        check(
            "collinear packing sum near segment length",
            (packing / len - 1.0).abs() <= 0.1,
            packing,
            json!({"length": len, "relative": 0.1}),
        ),
        check(
            "planar covering fails at k=1",
            !planar.pass,
            planar.max_ratio,
            cfg.reifenberg.delta_sq,
        ),
    ];
    Ok(SuiteReport::new("reifenberg", checks))
}

fn norm(p: &[f64]) -> f64 {
    p.iter().map(|c| c * c).sum::<f64>().sqrt()
}

fn symmetry_gap(u: &SampledMap, order: usize, cfg: &RunConfig) -> Result<f64, CliError> {
    let origin = u.domain().origin().to_vec();
    Ok(ksym_distance_with(u, &origin, 0.5, order, &cfg.quadrature)?.distance)
}

/// S⁰_{ε,r} of x/|x| at ε below the 1-symmetry gap: nested, shrinking, containing 0.
pub fn suite_strata(cfg: &RunConfig) -> Result<SuiteReport, CliError> {
    let u = catalog_map("radial", 3, cfg.domain_radius, cfg.verify_fine_cells)?;
    let gap = symmetry_gap(&u, 1, cfg)?;
    let eps = cfg.epsilon.unwrap_or(gap / 2.0);
    let mut checks = vec![check("epsilon below the 1-symmetry gap", eps < gap, eps, gap)];
    let scales = [0.25, 0.125, 0.0625];
    let mut previous: Option<(Vec<Vec<f64>>, f64)> = None;
    for r in scales {
        let s = grid_strata(&u, 0, eps, r, &cfg.quadrature)?;
        let radius = s.iter().map(|p| norm(p)).fold(0.0, f64::max);
        let origin_in = s.iter().any(|p| norm(p) == 0.0);
        checks.push(check(
            format!("origin is a member at r={r}"),
            origin_in,
            s.len(),
            Value::Null,
        ));
        checks.push(check(
            format!("stratum within B_r(0) at r={r}"),
            radius <= r,
            json!({"points": s.len(), "radius": radius}),
            r,
        ));
        if let Some((prev, prev_radius)) = &previous {
            let nested = s.iter().all(|p| prev.contains(p));
            checks.push(check(
                format!("nested in the r={} stratum", 2.0 * r),
                nested,
                s.len(),
                prev.len(),
            ));
            checks.push(check(
                format!("containment radius shrinks at r={r}"),
                radius <= *prev_radius,
                radius,
                *prev_radius,
            ));
        }
        previous = Some((s, radius));
    }
    Ok(SuiteReport::new("strata", checks))
}

/// Second covering stage and energy induction on x/|x|, k = 0, with the
/// Minkowski log-log slope over `minkowski_scales`.
pub fn suite_covering(cfg: &RunConfig) -> Result<SuiteReport, CliError> {
    let u = catalog_map("radial", 3, cfg.domain_radius, cfg.verify_cells)?;
    let eps = cfg.epsilon.unwrap_or(symmetry_gap(&u, 1, cfg)? / 2.0);
    let mut checks = Vec::new();
    let mut pairs = Vec::new();
    for &r in &cfg.minkowski_scales {
        let strata = grid_strata(&u, 0, eps, r, &cfg.quadrature)?;
        let ccfg = CoveringConfig {
            k: 0,
            epsilon: eps,
            r,
            ..cfg.covering.clone()
        };
        let run = cover_strata_ii(&u, &strata, &ccfg)?;
        checks.push(check(
            format!("second stage sound at r={r}"),
            run.coverage_ok && run.disjoint_ok && run.decay_ok && !run.truncated,
            json!({"coverage": run.coverage_ok, "disjoint": run.disjoint_ok, "decay": run.decay_ok,
                   "truncated": run.truncated, "generations": run.generations.len()}),
            Value::Null,
        ));
        let rep = energy_induction(&u, &strata, &ccfg)?;
        checks.push(check(
            format!("energy induction sound at r={r}"),
            rep.all_checks_pass(),
            json!({"rounds": rep.rounds.len(), "round_bound": rep.round_bound,
                   "coverage": rep.coverage_ok, "disjoint": rep.disjoint_ok, "decay": rep.decay_ok,
                   "strata_points": strata.len(), "final_balls": rep.final_covering.len()}),
            Value::Null,
        ));
        pairs.push((r, rep.minkowski.covering_volume));
    }
    let slope = loglog_slope(&pairs);
    checks.push(check(
        "Minkowski log-log slope near m-k=3",
        slope.is_some_and(|s| (2.5..=3.5).contains(&s)),
        json!({"slope": slope, "volumes": pairs}),
        [2.5, 3.5],
    ));
    Ok(SuiteReport::new("covering", checks))
}

/// Symmetric extension in m = 4 with k = 1: centers track the invariant axis.
pub fn suite_extension(cfg: &RunConfig) -> Result<SuiteReport, CliError> {
    let (m, k) = (4, 1);
    let entry = CatalogEntry::parse("extension:1", m)?;
    let u = sample_map(
        &entry,
        &GridDomain::centered(m, cfg.domain_radius, cfg.extension_cells)?,
    )?;
    let eps = cfg.epsilon.unwrap_or(symmetry_gap(&u, k + 1, cfg)? / 2.0);
    let r = 0.125;
    let strata = grid_strata(&u, k, eps, r, &cfg.quadrature)?;
    let ccfg = CoveringConfig {
        k,
        epsilon: eps,
        r,
        ..cfg.covering.clone()
    };
    let rep = energy_induction(&u, &strata, &ccfg)?;
    let transverse = m - entry.invariant_dims();
    let axis_distance = rep
        .final_covering
        .balls
        .iter()
        .map(|b| norm(&b.center[..transverse]))
        .fold(0.0, f64::max);
    let big_r = ccfg.initial_radius;
    let tube = 2.0 * ccfg.rho * big_r;
    let content = packing_sum(&rep.final_covering);
    let content_bound = ccfg.content_constant * big_r.powi(k as i32);
    let checks = vec![
        check("stratum is nonempty", !strata.is_empty(), strata.len(), 1),
        check(
            "induction checks",
            rep.all_checks_pass(),
            rep.final_covering.len(),
            Value::Null,
        ),
        check(
            "centers within 2 rho R of the axis",
            axis_distance <= tube,
            axis_distance,
            tube,
        ),
        check(
            "sum of radii within C_V R",
            content <= content_bound,
            content,
            content_bound,
        ),
    ];
    Ok(SuiteReport::new("extension", checks))
}

/// Runs one named suite.
pub fn run_suite(name: &str, cfg: &RunConfig) -> Result<SuiteReport, CliError> {
    match name {
        "energy" => suite_energy(cfg),
        "monotonicity" => suite_monotonicity(cfg),
        "beta_oracle" => suite_beta_oracle(cfg),
        "beta_lemmas" => suite_beta_lemmas(cfg),
        "reifenberg" => suite_reifenberg(cfg),
        "strata" => suite_strata(cfg),
        "covering" => suite_covering(cfg),
        "extension" => suite_extension(cfg),
        other => Err(CliError::input(format!("unknown verify suite {other:?}"))),
    }
}

/// Runs the configured suites and writes `verify_report.json`.
pub fn run_verify(cfg: &RunConfig, out: &Path) -> Result<Outcome, CliError> {
    let suites = with_threads(cfg.threads, || {
        cfg.verify_suites
            .iter()
            .map(|s| run_suite(s, cfg))
            .collect::<Result<Vec<_>, _>>()
    })??;
    let passed = !suites.iter().any(SuiteReport::failed);
    let summary = json!({
        "command": "verify",
        "config": cfg.raw.echo(),
        "suites": suites,
        "pass": passed,
    });
    let mut files: Vec<PathBuf> = Vec::new();
    if cfg.json {
        std::fs::create_dir_all(out)?;
        let path = out.join("verify_report.json");
        std::fs::write(
            &path,
            serde_json::to_string_pretty(&summary).expect("report serializes") + "\n",
        )?;
        files.push(path);
    }
    Ok(Outcome { passed, files, summary })
}
