//! Experiment configuration: a flat `key = value` text format, one key per
//! line, `#` comments. Unknown keys are rejected; serialization writes every
//! key in canonical order so configs round-trip losslessly.

use crate::error::{HarnessError, Result};
use hardy_core::{Boundary, GridSpec, OperatorKind};

#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentConfig {
    pub dim: usize,
    pub grid_n: usize,
    /// grid spacing; `None` means side length 1 (spacing = 1/grid_n)
    pub spacing: Option<f64>,
    pub boundary: Boundary,
    pub operator: OperatorKind,
    pub potential_seed: u64,
    pub potential_amplitude: f64,
    pub p_list: Vec<f64>,
    /// vanishing order M; `None` derives ⌊(n/2)(1/p−1)⌋ + 1 per p
    pub m_order: Option<usize>,
    pub alpha_list: Vec<f64>,
    pub scales_per_efold: f64,
    pub corpus: Vec<String>,
    pub corpus_seed: u64,
    pub cosine_mode: usize,
    pub band_max_mode: usize,
    pub support_tol: f64,
    pub residual_bound: f64,
    pub out_dir: String,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            dim: 1,
            grid_n: 128,
            spacing: None,
            boundary: Boundary::Periodic,
            operator: OperatorKind::Laplacian,
            potential_seed: 7,
            potential_amplitude: 12.0,
            p_list: vec![0.8, 1.0],
            m_order: None,
            alpha_list: vec![1.0, 2.0],
            scales_per_efold: 64.0,
            corpus: ["spike", "ball", "bump", "dipole", "cosine", "band"]
                .iter()
                .map(|s| s.to_string())
                .collect(),
            corpus_seed: 20240801,
            cosine_mode: 3,
            band_max_mode: 8,
            support_tol: 1e-8,
            residual_bound: 2e-2,
            out_dir: "out".into(),
        }
    }
}

impl ExperimentConfig {
    pub fn spacing_value(&self) -> f64 {
        self.spacing.unwrap_or(1.0 / self.grid_n as f64)
    }

    pub fn grid(&self) -> Result<GridSpec> {
        Ok(GridSpec::new(self.dim, self.grid_n, self.spacing_value(), self.boundary)?)
    }

    /// Default M = ⌊(n/2)(1/p − 1)⌋ + 1 unless pinned.
    pub fn m_for(&self, p: f64) -> usize {
        self.m_order.unwrap_or_else(|| {
            (0.5 * self.dim as f64 * (1.0 / p - 1.0)).floor() as usize + 1
        })
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = ExperimentConfig::default();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| HarnessError::Config(format!("line {}: expected key = value", lineno + 1)))?;
            let (key, value) = (key.trim(), value.trim());
            let bad = |what: &str| HarnessError::Config(format!("line {}: bad {what}: {value}", lineno + 1));
            match key {
                "dim" => cfg.dim = value.parse().map_err(|_| bad("dim"))?,
                "grid_n" => cfg.grid_n = value.parse().map_err(|_| bad("grid_n"))?,
                "spacing" => {
                    cfg.spacing = if value == "auto" {
                        None
                    } else {
                        Some(value.parse().map_err(|_| bad("spacing"))?)
                    }
                }
                "boundary" => {
                    cfg.boundary = match value {
                        "periodic" => Boundary::Periodic,
                        "dirichlet" => Boundary::Dirichlet,
                        _ => return Err(bad("boundary")),
                    }
                }
                "operator" => {
                    cfg.operator = match value {
                        "laplacian" => OperatorKind::Laplacian,
                        "schrodinger" => OperatorKind::Schrodinger,
                        "magnetic" => OperatorKind::MagneticSchrodinger,
                        _ => return Err(bad("operator")),
                    }
                }
                "potential_seed" => cfg.potential_seed = value.parse().map_err(|_| bad("potential_seed"))?,
                "potential_amplitude" => {
                    cfg.potential_amplitude = value.parse().map_err(|_| bad("potential_amplitude"))?
                }
                "p_list" => {
                    cfg.p_list = value
                        .split(',')
                        .map(|v| v.trim().parse::<f64>())
                        .collect::<std::result::Result<_, _>>()
                        .map_err(|_| bad("p_list"))?
                }
                "m_order" => {
                    cfg.m_order = if value == "auto" {
                        None
                    } else {
                        Some(value.parse().map_err(|_| bad("m_order"))?)
                    }
                }
                "alpha_list" => {
                    cfg.alpha_list = value
                        .split(',')
                        .map(|v| v.trim().parse::<f64>())
                        .collect::<std::result::Result<_, _>>()
                        .map_err(|_| bad("alpha_list"))?
                }
                "scales_per_efold" => {
                    cfg.scales_per_efold = value.parse().map_err(|_| bad("scales_per_efold"))?
                }
                "corpus" => {
                    cfg.corpus = value.split(',').map(|v| v.trim().to_string()).collect()
                }
                "corpus_seed" => cfg.corpus_seed = value.parse().map_err(|_| bad("corpus_seed"))?,
                "cosine_mode" => cfg.cosine_mode = value.parse().map_err(|_| bad("cosine_mode"))?,
                "band_max_mode" => cfg.band_max_mode = value.parse().map_err(|_| bad("band_max_mode"))?,
                "support_tol" => cfg.support_tol = value.parse().map_err(|_| bad("support_tol"))?,
                "residual_bound" => cfg.residual_bound = value.parse().map_err(|_| bad("residual_bound"))?,
                "out_dir" => cfg.out_dir = value.to_string(),
                other => {
                    return Err(HarnessError::Config(format!(
                        "line {}: unknown key `{other}`",
                        lineno + 1
                    )))
                }
            }
        }
        Ok(cfg)
    }

    pub fn load(path: &std::path::Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| HarnessError::Config(format!("reading {path:?}: {e}")))?;
        Self::parse(&text)
    }

    pub fn serialize(&self) -> String {
        let join = |v: &[f64]| v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(",");
        let mut out = String::new();
        out.push_str(&format!("dim = {}\n", self.dim));
        out.push_str(&format!("grid_n = {}\n", self.grid_n));
        out.push_str(&format!(
            "spacing = {}\n",
            self.spacing.map_or("auto".to_string(), |s| s.to_string())
        ));
        out.push_str(&format!(
            "boundary = {}\n",
            match self.boundary {
                Boundary::Periodic => "periodic",
                Boundary::Dirichlet => "dirichlet",
            }
        ));
        out.push_str(&format!(
            "operator = {}\n",
            match self.operator {
                OperatorKind::Laplacian => "laplacian",
                OperatorKind::Schrodinger => "schrodinger",
                OperatorKind::MagneticSchrodinger => "magnetic",
            }
        ));
        out.push_str(&format!("potential_seed = {}\n", self.potential_seed));
        out.push_str(&format!("potential_amplitude = {}\n", self.potential_amplitude));
        out.push_str(&format!("p_list = {}\n", join(&self.p_list)));
        out.push_str(&format!(
            "m_order = {}\n",
            self.m_order.map_or("auto".to_string(), |m| m.to_string())
        ));
        out.push_str(&format!("alpha_list = {}\n", join(&self.alpha_list)));
        out.push_str(&format!("scales_per_efold = {}\n", self.scales_per_efold));
        out.push_str(&format!("corpus = {}\n", self.corpus.join(",")));
        out.push_str(&format!("corpus_seed = {}\n", self.corpus_seed));
        out.push_str(&format!("cosine_mode = {}\n", self.cosine_mode));
        out.push_str(&format!("band_max_mode = {}\n", self.band_max_mode));
        out.push_str(&format!("support_tol = {}\n", self.support_tol));
        out.push_str(&format!("residual_bound = {}\n", self.residual_bound));
        out.push_str(&format!("out_dir = {}\n", self.out_dir));
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn roundtrip_default() {
        let c = ExperimentConfig::default();
        let back = ExperimentConfig::parse(&c.serialize()).unwrap();
        assert_eq!(c, back);
    }

    #[test]
    fn roundtrip_custom() {
        let mut c = ExperimentConfig::default();
        c.dim = 2;
        c.grid_n = 48;
        c.spacing = Some(0.03125);
        c.boundary = Boundary::Dirichlet;
        c.operator = OperatorKind::Schrodinger;
        c.p_list = vec![0.7];
        c.m_order = Some(2);
        c.support_tol = 1e-7;
        let back = ExperimentConfig::parse(&c.serialize()).unwrap();
        assert_eq!(c, back);
    }

    #[test]
    fn rejects_unknown_keys_and_bad_values() {
        assert!(ExperimentConfig::parse("no_such_key = 3").is_err());
        assert!(ExperimentConfig::parse("dim = banana").is_err());
        assert!(ExperimentConfig::parse("dim").is_err());
        assert!(ExperimentConfig::parse("# comment\n\ndim = 2").is_ok());
    }

    #[test]
    fn derived_m_matches_formula() {
        let c = ExperimentConfig::default();
        assert_eq!(c.m_for(1.0), 1);
        assert_eq!(c.m_for(0.8), 1);
        let mut c3 = c.clone();
        c3.dim = 3;
        assert_eq!(c3.m_for(0.5), 2); // (3/2)(1) = 1.5 → ⌊⌋ + 1 = 2
    }
}
