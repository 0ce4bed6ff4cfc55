//! Flat `key = value` configuration with command-line overrides.

use std::collections::BTreeMap;

use harmstrat::covering::CoveringConfig;
use harmstrat::reifenberg::ReifenbergParams;
use harmstrat::symmetry::SymmetryQuadrature;

use crate::error::CliError;

/// Every accepted key with its default. `auto` defers to a computed value.
pub const KEYS: &[(&str, &str)] = &[
    ("map", "radial"),
    ("map_file", ""),
    ("dim", "3"),
    ("domain_radius", "3"),
    ("cells", "64"),
    ("threads", "0"),
    ("formats", "csv,json"),
    ("k", "0"),
    ("epsilon", "auto"),
    ("r", "0.03125"),
    ("minkowski_scales", "0.0625,0.03125,0.015625"),
    ("sym_cells", "5"),
    ("sym_radial_nodes", "6"),
    ("sym_translate_nodes", "4"),
    ("rho", "0.0078125"),
    ("delta", "auto"),
    ("energy", "auto"),
    ("energy_bound", "auto"),
    ("tolerance", "auto"),
    ("initial_radius", "1"),
    ("max_generations", "64"),
    ("content_constant", "10"),
    ("final_constant", "20"),
    ("radius_factor", "0.1"),
    ("tension_exponent", "4"),
    ("measure_file", ""),
    ("beta_radius", "1"),
    ("beta_depth", "6"),
    ("beta_centers", "atoms"),
    ("covering_file", ""),
    ("reifenberg_mode", "discrete"),
    ("delta_r2", "0.01"),
    ("packing_bound", "40"),
    ("dini_depth", "6"),
    ("test_levels", "3"),
    ("verify_suites", "all"),
    ("verify_seed", "1"),
    ("verify_centers", "20"),
    ("verify_fine_cells", "128"),
    ("verify_cells", "64"),
    ("extension_cells", "32"),
    ("oracle_restarts", "50"),
    ("oracle_trials", "100"),
    ("lemma_trials", "100"),
];

/// Raw string values, always holding every key.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RawConfig {
    values: BTreeMap<String, String>,
}

impl Default for RawConfig {
    fn default() -> Self {
        Self {
            values: KEYS.iter().map(|(k, v)| ((*k).to_string(), (*v).to_string())).collect(),
        }
    }
}

impl RawConfig {
    pub fn set(&mut self, key: &str, value: &str) -> Result<(), CliError> {
        match self.values.get_mut(key) {
            Some(slot) => {
                *slot = value.trim().to_string();
                Ok(())
            }
            None => Err(CliError::input(format!("unknown configuration key {key:?}"))),
        }
    }

    /// Applies a `key=value` override.
    pub fn apply_override(&mut self, pair: &str) -> Result<(), CliError> {
        let (k, v) = pair
            .split_once('=')
            .ok_or_else(|| CliError::input(format!("override {pair:?} is not key=value")))?;
        self.set(k.trim(), v)
    }

    /// Applies a config file: `key = value` lines, `#` comments.
    pub fn apply_file(&mut self, text: &str) -> Result<(), CliError> {
        for (i, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| CliError::input_at(i + 1, format!("expected key = value, found {line:?}")))?;
            self.set(k.trim(), v)
                .map_err(|e| CliError::input_at(i + 1, e.message))?;
        }
        Ok(())
    }

    #[must_use]
    pub fn get(&self, key: &str) -> &str {
        self.values.get(key).map_or("", String::as_str)
    }

    #[must_use]
    pub fn echo(&self) -> &BTreeMap<String, String> {
        &self.values
    }
}

/// Typed configuration; every numeric field is validated at parse time.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub raw: RawConfig,
    pub map: String,
    pub map_file: Option<String>,
    pub dim: usize,
    pub domain_radius: f64,
    pub cells: u32,
    pub threads: usize,
    pub csv: bool,
    pub json: bool,
    pub k: usize,
    pub epsilon: Option<f64>,
    pub r: f64,
    pub minkowski_scales: Vec<f64>,
    pub quadrature: SymmetryQuadrature,
    pub covering: CoveringConfig,
    pub measure_file: Option<String>,
    pub beta_radius: f64,
    pub beta_depth: usize,
    pub beta_at_atoms: bool,
    pub covering_file: Option<String>,
    pub rectifiable: bool,
    pub reifenberg: ReifenbergParams,
    pub verify_suites: Vec<String>,
    pub verify_seed: u64,
    pub verify_centers: usize,
    pub verify_fine_cells: u32,
    pub verify_cells: u32,
    pub extension_cells: u32,
    pub oracle_restarts: usize,
    pub oracle_trials: usize,
    pub lemma_trials: usize,
}

fn num<T: std::str::FromStr>(raw: &RawConfig, key: &str) -> Result<T, CliError> {
    raw.get(key)
        .parse::<T>()
        .map_err(|_| CliError::input(format!("{key} = {:?} is not a valid number", raw.get(key))))
}

fn real(raw: &RawConfig, key: &str) -> Result<f64, CliError> {
    let v: f64 = num(raw, key)?;
    if v.is_finite() {
        Ok(v)
    } else {
        Err(CliError::input(format!("{key} must be finite")))
    }
}

fn auto(raw: &RawConfig, key: &str) -> Result<Option<f64>, CliError> {
    if raw.get(key) == "auto" {
        Ok(None)
    } else {
        real(raw, key).map(Some)
    }
}

fn path(raw: &RawConfig, key: &str) -> Option<String> {
    let v = raw.get(key);
    (!v.is_empty()).then(|| v.to_string())
}

fn positive(key: &str, v: f64) -> Result<f64, CliError> {
    if v > 0.0 {
        Ok(v)
    } else {
        Err(CliError::input(format!("{key} must be positive")))
    }
}

pub const SUITES: &[&str] = &[
    "energy",
    "monotonicity",
    "beta_oracle",
    "beta_lemmas",
    "reifenberg",
    "strata",
    "covering",
    "extension",
];

impl RunConfig {
    pub fn from_raw(raw: RawConfig) -> Result<Self, CliError> {
        let formats: Vec<&str> = raw.get("formats").split(',').map(str::trim).collect();
        if let Some(f) = formats.iter().find(|f| !matches!(**f, "csv" | "json")) {
            return Err(CliError::input(format!("unknown output format {f:?}")));
        }
        let mut minkowski_scales = raw
            .get("minkowski_scales")
            .split(',')
            .map(|s| s.trim().parse::<f64>().ok().filter(|v| *v > 0.0 && *v < 1.0))
            .collect::<Option<Vec<f64>>>()
            .ok_or_else(|| CliError::input("minkowski_scales must be a comma list of values in (0, 1)"))?;
        minkowski_scales.sort_by(|a, b| b.total_cmp(a));
        minkowski_scales.dedup();
        let verify_suites: Vec<String> = match raw.get("verify_suites") {
            "all" => SUITES.iter().map(|s| (*s).to_string()).collect(),
            list => list.split(',').map(|s| s.trim().to_string()).collect(),
        };
        if let Some(s) = verify_suites.iter().find(|s| !SUITES.contains(&s.as_str())) {
            return Err(CliError::input(format!("unknown verify suite {s:?}")));
        }
        let beta_at_atoms = match raw.get("beta_centers") {
            "atoms" => true,
            "origin" => false,
            other => {
                return Err(CliError::input(format!(
                    "beta_centers must be atoms or origin, got {other:?}"
                )))
            }
        };
        let rectifiable = match raw.get("reifenberg_mode") {
            "discrete" => false,
            "rectifiable" => true,
            other => {
                return Err(CliError::input(format!(
                    "reifenberg_mode must be discrete or rectifiable, got {other:?}"
                )))
            }
        };
        let k: usize = num(&raw, "k")?;
        let r = real(&raw, "r")?;
        let epsilon = auto(&raw, "epsilon")?;
        let covering = CoveringConfig {
            k,
            epsilon: epsilon.unwrap_or(1.0),
            rho: real(&raw, "rho")?,
            delta: auto(&raw, "delta")?,
            r,
            initial_radius: real(&raw, "initial_radius")?,
            energy: auto(&raw, "energy")?,
            energy_bound: auto(&raw, "energy_bound")?,
            tolerance: auto(&raw, "tolerance")?,
            max_generations: num(&raw, "max_generations")?,
            content_constant: real(&raw, "content_constant")?,
            final_constant: real(&raw, "final_constant")?,
            radius_factor: real(&raw, "radius_factor")?,
            tension_exponent: real(&raw, "tension_exponent")?,
        };
        let dim: usize = num(&raw, "dim")?;
        covering.validate(dim).map_err(|e| CliError::input(e.to_string()))?;
        if epsilon.is_some_and(|e| e <= 0.0) {
            return Err(CliError::input("epsilon must be positive"));
        }
        let quadrature = SymmetryQuadrature {
            cells_per_radius: positive("sym_cells", real(&raw, "sym_cells")?)?,
            radial_nodes: num(&raw, "sym_radial_nodes")?,
            translate_nodes: num(&raw, "sym_translate_nodes")?,
        };
        if quadrature.radial_nodes == 0 || quadrature.translate_nodes == 0 {
            return Err(CliError::input("symmetry node counts must be positive"));
        }
        let reifenberg = ReifenbergParams {
            delta_sq: positive("delta_r2", real(&raw, "delta_r2")?)?,
            packing_bound: positive("packing_bound", real(&raw, "packing_bound")?)?,
            depth: num(&raw, "dini_depth")?,
            levels: num(&raw, "test_levels")?,
        };
        if reifenberg.depth < 3 {
            return Err(CliError::input("dini_depth must be at least 3"));
        }
        let beta_depth: usize = num(&raw, "beta_depth")?;
        if beta_depth < 3 {
            return Err(CliError::input("beta_depth must be at least 3"));
        }
        let cells: u32 = num(&raw, "cells")?;
        let verify_fine_cells: u32 = num(&raw, "verify_fine_cells")?;
        let verify_cells: u32 = num(&raw, "verify_cells")?;
        let extension_cells: u32 = num(&raw, "extension_cells")?;
        if [cells, verify_fine_cells, verify_cells, extension_cells]
            .iter()
            .any(|&c| c < 8)
        {
            return Err(CliError::input("cell counts must be at least 8"));
        }
        Ok(Self {
            map: raw.get("map").to_string(),
            map_file: path(&raw, "map_file"),
            dim,
            domain_radius: positive("domain_radius", real(&raw, "domain_radius")?)?,
            cells,
            threads: num(&raw, "threads")?,
            csv: formats.contains(&"csv"),
            json: formats.contains(&"json"),
            k,
            epsilon,
            r,
            minkowski_scales,
            quadrature,
            covering,
            measure_file: path(&raw, "measure_file"),
            beta_radius: positive("beta_radius", real(&raw, "beta_radius")?)?,
            beta_depth,
            beta_at_atoms,
            covering_file: path(&raw, "covering_file"),
            rectifiable,
            reifenberg,
            verify_suites,
            verify_seed: num(&raw, "verify_seed")?,
            verify_centers: num(&raw, "verify_centers")?,
            verify_fine_cells,
            verify_cells,
            extension_cells,
            oracle_restarts: num(&raw, "oracle_restarts")?,
            oracle_trials: num(&raw, "oracle_trials")?,
            lemma_trials: num(&raw, "lemma_trials")?,
            raw,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_parse() {
        let c = RunConfig::from_raw(RawConfig::default()).unwrap();
        assert_eq!(c.minkowski_scales, vec![0.0625, 0.03125, 0.015625]);
        assert!(c.epsilon.is_none() && c.csv && c.json);
        assert_eq!(c.verify_suites.len(), SUITES.len());
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let mut raw = RawConfig::default();
        assert!(raw.apply_override("nonsense=1").is_err());
        let err = raw.apply_file("k = 1\n\nbogus = 2\n").unwrap_err();
        assert_eq!(err.line, Some(3));
        assert_eq!(raw.get("k"), "1");
    }

    #[test]
    fn overrides_win_and_values_are_checked() {
        let mut raw = RawConfig::default();
        raw.apply_file("rho = 0.0078125\n").unwrap();
        raw.apply_override("rho=0.5").unwrap();
        assert!(RunConfig::from_raw(raw).is_err());
        let mut raw = RawConfig::default();
        raw.apply_override("cells=abc").unwrap();
        assert!(RunConfig::from_raw(raw).is_err());
    }
}
