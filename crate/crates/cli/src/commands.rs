//! The `analyze`, `cover`, `beta` and `reifenberg` pipelines.

use std::fs;
use std::path::{Path, PathBuf};

use serde_json::{json, Value};

use harmstrat::covering::{energy_induction, CoveringConfig, InductionReport};
use harmstrat::jones_beta::{beta_profile, beta_profile_csv, read_measure};
use harmstrat::map_model::io::read_map;
use harmstrat::map_model::{sample_map, CatalogEntry, GridDomain, SampledMap};
use harmstrat::reifenberg::{
    discrete_reifenberg_check, read_covering, rectifiable_reifenberg_check, write_covering, BallCovering,
};
use harmstrat::symmetry::{classify_strata, grid_strata, ksym_distance_with, strata_csv};

use crate::config::RunConfig;
use crate::error::CliError;

/// Used when the automatic ε would vanish, which happens for constant maps.
const FALLBACK_EPSILON: f64 = 0.1;

/// What a command produced. `passed == false` maps to exit status 1.
#[derive(Debug, Clone)]
pub struct Outcome {
    pub passed: bool,
    pub files: Vec<PathBuf>,
    pub summary: Value,
}

/// Runs `f` on a pool of `threads` workers, or the global pool when 0.
pub fn with_threads<T: Send>(threads: usize, f: impl FnOnce() -> T + Send) -> Result<T, CliError> {
    if threads == 0 {
        return Ok(f());
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| CliError::input(format!("cannot build thread pool: {e}")))?;
    Ok(pool.install(f))
}

pub fn load_map(cfg: &RunConfig) -> Result<SampledMap, CliError> {
    if let Some(path) = &cfg.map_file {
        return Ok(read_map(Path::new(path))?);
    }
    let entry = CatalogEntry::parse(&cfg.map, cfg.dim)?;
    let domain = GridDomain::centered(cfg.dim, cfg.domain_radius, cfg.cells)?;
    Ok(sample_map(&entry, &domain)?)
}

fn map_info(map: &SampledMap) -> Value {
    let d = map.domain();
    json!({
        "name": map.catalog_entry().map(CatalogEntry::name),
        "dim": map.dim(),
        "target_dim": map.target_dim(),
        "domain_radius": d.radius(),
        "spacing": d.spacing(),
        "origin": d.origin(),
        "provenance": map.provenance(),
        "gradient": map.gradient_kind(),
    })
}

/// ε from the config, or half the (k+1)-symmetry distance at the origin at scale ½.
pub fn resolve_epsilon(map: &SampledMap, cfg: &RunConfig) -> Result<(f64, &'static str), CliError> {
    if let Some(e) = cfg.epsilon {
        return Ok((e, "config"));
    }
    let origin = map.domain().origin().to_vec();
    let gap = ksym_distance_with(map, &origin, 0.5, cfg.k + 1, &cfg.quadrature)?.distance;
    if gap > 0.0 {
        Ok((gap / 2.0, "auto"))
    } else {
        Ok((FALLBACK_EPSILON, "fallback"))
    }
}

fn covering_config(cfg: &RunConfig, epsilon: f64, r: f64) -> CoveringConfig {
    CoveringConfig {
        epsilon,
        r,
        ..cfg.covering.clone()
    }
}

fn create_dir(out: &Path) -> Result<(), CliError> {
    fs::create_dir_all(out).map_err(|e| CliError::input(format!("cannot create {}: {e}", out.display())))
}

fn write_text(out: &Path, name: &str, text: &str, files: &mut Vec<PathBuf>) -> Result<(), CliError> {
    let path = out.join(name);
    fs::write(&path, text).map_err(|e| CliError::input(format!("cannot write {}: {e}", path.display())))?;
    files.push(path);
    Ok(())
}

fn write_json(out: &Path, name: &str, value: &Value, files: &mut Vec<PathBuf>) -> Result<(), CliError> {
    let text = serde_json::to_string_pretty(value).expect("report serializes") + "\n";
    write_text(out, name, &text, files)
}

fn write_covering_file(out: &Path, c: &BallCovering, files: &mut Vec<PathBuf>) -> Result<(), CliError> {
    let path = out.join("covering.txt");
    write_covering(c, &path)?;
    files.push(path);
    Ok(())
}

/// Compact view of an induction run; the full covering goes to its own file.
#[must_use]
pub fn induction_summary(rep: &InductionReport) -> Value {
    let rounds: Vec<Value> = rep
        .rounds
        .iter()
        .map(|r| {
            json!({
                "index": r.index,
                "level": r.level,
                "start_balls": r.start_balls,
                "start_radius_max": r.start_radius_max,
                "generations": r.run.generations,
                "leaves": r.run.covering.len(),
                "tube_escapes": r.run.tube_escapes,
                "truncated": r.run.truncated,
                "coverage_ok": r.run.coverage_ok,
                "disjoint_ok": r.run.disjoint_ok,
                "decay_ok": r.run.decay_ok,
                "energy_drop_ok": r.run.energy_drop_ok,
                "energy_drop_margin": r.run.energy_drop_margin,
                "content": r.run.content,
            })
        })
        .collect();
    json!({
        "levels": rep.levels,
        "f_bound": rep.f_bound,
        "f_gamma": rep.f_gamma,
        "seed_radius": rep.seeds.seed_radius,
        "seed_count": rep.seeds.seeds.len(),
        "strata_points": rep.strata_points,
        "round_bound": rep.round_bound,
        "rounds": rounds,
        "forced_terminal": rep.forced_terminal,
        "final_balls": rep.final_covering.len(),
        "final_content": rep.final_content,
        "content_bound": rep.content_bound,
        "minkowski": rep.minkowski,
        "checks": {
            "coverage": rep.coverage_ok,
            "disjoint": rep.disjoint_ok,
            "radii": rep.radii_ok,
            "rounds": rep.rounds_ok,
            "energy_drop": rep.energy_drop_ok,
            "decay": rep.decay_ok,
            "content": rep.content_ok,
        },
        "pass": rep.all_checks_pass(),
    })
}

/// Least-squares slope of `log y` against `log x` over pairs with `y > 0`;
/// `None` with fewer than two such pairs.
#[must_use]
pub fn loglog_slope(pairs: &[(f64, f64)]) -> Option<f64> {
    let pts: Vec<(f64, f64)> = pairs
        .iter()
        .filter(|(x, y)| *x > 0.0 && *y > 0.0)
        .map(|(x, y)| (x.ln(), y.ln()))
        .collect();
    if pts.len() < 2 {
        return None;
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    (sxx > 0.0).then(|| sxy / sxx)
}

struct ScaleRun {
    r: f64,
    strata: Vec<Vec<f64>>,
    report: InductionReport,
}

fn strata_and_cover(map: &SampledMap, cfg: &RunConfig, eps: f64, r: f64) -> Result<ScaleRun, CliError> {
    let strata = grid_strata(map, cfg.k, eps, r, &cfg.quadrature)?;
    let report = energy_induction(map, &strata, &covering_config(cfg, eps, r))?;
    Ok(ScaleRun { r, strata, report })
}

/// Strata classification, energy induction and Minkowski estimates at the
/// configured scale and every `minkowski_scales` entry.
pub fn run_analyze(cfg: &RunConfig, out: &Path) -> Result<Outcome, CliError> {
    with_threads(cfg.threads, || analyze(cfg, out))?
}

fn analyze(cfg: &RunConfig, out: &Path) -> Result<Outcome, CliError> {
    let map = load_map(cfg)?;
    covering_config(cfg, 1.0, cfg.r)
        .validate(map.dim())
        .map_err(CliError::from)?;
    let (eps, eps_source) = resolve_epsilon(&map, cfg)?;
    let mut scales = cfg.minkowski_scales.clone();
    if !scales.iter().any(|s| (s - cfg.r).abs() <= 1e-15 * cfg.r) {
        scales.push(cfg.r);
    }
    scales.sort_by(|a, b| b.total_cmp(a));
    let runs = scales
        .iter()
        .map(|&r| strata_and_cover(&map, cfg, eps, r))
        .collect::<Result<Vec<_>, _>>()?;

    create_dir(out)?;
    let mut files = Vec::new();
    let main = runs
        .iter()
        .find(|s| (s.r - cfg.r).abs() <= 1e-15 * cfg.r)
        .expect("configured scale is always run");
    write_covering_file(out, &main.report.final_covering, &mut files)?;

    if cfg.csv {
        let mut rows = Vec::new();
        for s in &runs {
            rows.extend(classify_strata(&map, &s.strata, cfg.k, eps, s.r, &cfg.quadrature)?);
        }
        write_text(out, "strata.csv", &strata_csv(map.dim(), &rows), &mut files)?;
        let mut table = String::from(
            "r,exponent,ambient_spacing,strata_points,strata_volume,covering_volume,\
             strata_ratio,covering_ratio,final_balls,final_content,pass\n",
        );
        for s in &runs {
            let mk = &s.report.minkowski;
            table.push_str(&format!(
                "{},{},{},{},{},{},{},{},{},{},{}\n",
                s.r,
                mk.exponent,
                mk.ambient_spacing,
                s.strata.len(),
                mk.strata_volume,
                mk.covering_volume,
                mk.strata_ratio,
                mk.covering_ratio,
                s.report.final_covering.len(),
                s.report.final_content,
                s.report.all_checks_pass()
            ));
        }
        write_text(out, "minkowski.csv", &table, &mut files)?;
    }

    let in_fit = |s: &&ScaleRun| cfg.minkowski_scales.iter().any(|m| (m - s.r).abs() <= 1e-15 * s.r);
    let strata_pairs: Vec<(f64, f64)> = runs
        .iter()
        .filter(in_fit)
        .map(|s| (s.r, s.report.minkowski.strata_volume))
        .collect();
    let covering_pairs: Vec<(f64, f64)> = runs
        .iter()
        .filter(in_fit)
        .map(|s| (s.r, s.report.minkowski.covering_volume))
        .collect();
    let passed = runs.iter().all(|s| s.report.all_checks_pass());
    let summary = json!({
        "command": "analyze",
        "config": cfg.raw.echo(),
        "map": map_info(&map),
        "k": cfg.k,
        "epsilon": eps,
        "epsilon_source": eps_source,
        "scales": runs.iter().map(|s| json!({
            "r": s.r,
            "strata_points": s.strata.len(),
            "induction": induction_summary(&s.report),
        })).collect::<Vec<_>>(),
        "minkowski_fit": {
            "predicted_exponent": map.dim() - cfg.k,
            "strata_slope": loglog_slope(&strata_pairs),
            "covering_slope": loglog_slope(&covering_pairs),
        },
        "pass": passed,
    });
    if cfg.json {
        write_json(out, "summary.json", &summary, &mut files)?;
    }
    Ok(Outcome { passed, files, summary })
}

/// Strata at the configured scale and their energy-induction covering.
pub fn run_cover(cfg: &RunConfig, out: &Path) -> Result<Outcome, CliError> {
    with_threads(cfg.threads, || cover(cfg, out))?
}

fn cover(cfg: &RunConfig, out: &Path) -> Result<Outcome, CliError> {
    let map = load_map(cfg)?;
    covering_config(cfg, 1.0, cfg.r)
        .validate(map.dim())
        .map_err(CliError::from)?;
    let (eps, eps_source) = resolve_epsilon(&map, cfg)?;
    let run = strata_and_cover(&map, cfg, eps, cfg.r)?;
    create_dir(out)?;
    let mut files = Vec::new();
    write_covering_file(out, &run.report.final_covering, &mut files)?;
    let passed = run.report.all_checks_pass();
    let summary = json!({
        "command": "cover",
        "config": cfg.raw.echo(),
        "map": map_info(&map),
        "k": cfg.k,
        "epsilon": eps,
        "epsilon_source": eps_source,
        "r": cfg.r,
        "strata_points": run.strata.len(),
        "induction": induction_summary(&run.report),
        "pass": passed,
    });
    if cfg.json {
        write_json(out, "cover_report.json", &summary, &mut files)?;
    }
    Ok(Outcome { passed, files, summary })
}

/// β² profile of a measure file at its atoms or at the origin.
pub fn run_beta(cfg: &RunConfig, out: &Path) -> Result<Outcome, CliError> {
    with_threads(cfg.threads, || beta(cfg, out))?
}

fn beta(cfg: &RunConfig, out: &Path) -> Result<Outcome, CliError> {
    let path = cfg
        .measure_file
        .as_ref()
        .ok_or_else(|| CliError::input("beta needs measure_file"))?;
    let mu = read_measure(Path::new(path))?;
    let centers: Vec<Vec<f64>> = if cfg.beta_at_atoms {
        mu.positions().to_vec()
    } else {
        vec![vec![0.0; mu.dim()]]
    };
    let rows = beta_profile(&mu, &centers, cfg.beta_radius, cfg.k, cfg.beta_depth)?;
    create_dir(out)?;
    let mut files = Vec::new();
    if cfg.csv {
        write_text(out, "beta_profile.csv", &beta_profile_csv(mu.dim(), &rows), &mut files)?;
    }
    let per_center = cfg.beta_depth + 1;
    let dini: Vec<f64> = rows
        .chunks(per_center)
        .map(|c| c.last().map_or(0.0, |r| r.dini_partial))
        .collect();
    let summary = json!({
        "command": "beta",
        "config": cfg.raw.echo(),
        "dim": mu.dim(),
        "atoms": mu.len(),
        "total_mass": mu.total_mass(),
        "k": cfg.k,
        "centers": centers.len(),
        "max_beta2": rows.iter().map(|r| r.beta2).fold(0.0, f64::max),
        "max_dini": dini.iter().copied().fold(0.0, f64::max),
    });
    if cfg.json {
        write_json(out, "summary.json", &summary, &mut files)?;
    }
    Ok(Outcome {
        passed: true,
        files,
        summary,
    })
}

/// Dini and packing checks on a covering file (discrete mode) or a measure
/// file (rectifiable mode). A failed hypothesis maps to exit status 1.
pub fn run_reifenberg(cfg: &RunConfig, out: &Path) -> Result<Outcome, CliError> {
    with_threads(cfg.threads, || reifenberg(cfg, out))?
}

fn reifenberg(cfg: &RunConfig, out: &Path) -> Result<Outcome, CliError> {
    let report = if cfg.rectifiable {
        let path = cfg
            .measure_file
            .as_ref()
            .ok_or_else(|| CliError::input("rectifiable mode needs measure_file"))?;
        let mu = read_measure(Path::new(path))?;
        rectifiable_reifenberg_check(&mu, cfg.k, &cfg.reifenberg, None)?
    } else {
        let path = cfg
            .covering_file
            .as_ref()
            .ok_or_else(|| CliError::input("discrete mode needs covering_file"))?;
        let c = read_covering(Path::new(path))?;
        discrete_reifenberg_check(&c, &cfg.reifenberg, None)?
    };
    create_dir(out)?;
    let mut files = Vec::new();
    let summary = json!({
        "command": "reifenberg",
        "config": cfg.raw.echo(),
        "mode": if cfg.rectifiable { "rectifiable" } else { "discrete" },
        "report": report,
        "pass": report.pass,
    });
    if cfg.json {
        write_json(out, "reifenberg_report.json", &summary, &mut files)?;
    }
    Ok(Outcome {
        passed: report.pass,
        files,
        summary,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn slope_of_a_power_law() {
        let pairs: Vec<(f64, f64)> = [0.5, 0.25, 0.125].iter().map(|&r: &f64| (r, 7.0 * r.powi(3))).collect();
        assert!((loglog_slope(&pairs).unwrap() - 3.0).abs() < 1e-12);
        assert!(loglog_slope(&[(0.5, 1.0), (0.25, 0.0)]).is_none());
    }
}
