//! The norm-equivalence experiment: for every corpus entry and every p,
//! compute the square/maximal-function norms, run the atomic decomposition,
//! validate every atom, and assemble the ratio table that measures the
//! equivalence constants. Identical configs produce byte-identical outputs.

use crate::config::ExperimentConfig;
use crate::corpus::{generate_corpus, random_potential};
use crate::error::{at_stage, HarnessError, Result};
use hardy_core::decomposition::{atomic_decompose, validate_atom};
use hardy_core::io::{fmt_f64, write_table_csv};
use hardy_core::maximal::{
    area_function, grand_maximal, nt_maximal, radial_maximal, script_m, ConeParams, Dictionary,
    ScaleGrid,
};
use hardy_core::{
    lp_quasinorm, CalderonBundle, OperatorKind, SpectralOperator, Symbol,
};
use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

#[derive(Clone, Debug)]
pub struct EquivalenceRow {
    pub function: String,
    pub p: f64,
    pub area_norm: f64,
    pub heat_nt_norm: f64,
    pub radial_norm: f64,
    /// ‖φ*_{L,α} f‖_p per (symbol, α), in (symbol-major, α-minor) order
    pub nt_norms: Vec<f64>,
    pub grand_norm: f64,
    pub script_m_norm: f64,
    pub budget: f64,
    pub residual_rel: f64,
    pub atom_count: usize,
    pub size_qinf_max: f64,
    pub support_max: f64,
    pub lm_err_max: f64,
    pub coverage_fraction: f64,
}

#[derive(Clone, Debug)]
pub struct RatioSummary {
    pub p: f64,
    pub name: String,
    pub min: f64,
    pub max: f64,
}

#[derive(Clone, Debug)]
pub struct EquivalenceReport {
    pub rows: Vec<EquivalenceRow>,
    pub summary: Vec<RatioSummary>,
    pub hard_failures: Vec<String>,
    pub nt_column_names: Vec<String>,
    pub csv_path: PathBuf,
    pub json_path: PathBuf,
}

/// Scalar operator per config (magnetic operators have no scalar-field
/// decomposition and are covered by the kernel reports instead).
pub fn build_scalar_operator(cfg: &ExperimentConfig) -> Result<SpectralOperator> {
    let grid = cfg.grid()?;
    match cfg.operator {
        OperatorKind::Laplacian => Ok(SpectralOperator::laplacian(grid)?),
        OperatorKind::Schrodinger => {
            let v = random_potential(grid, cfg.potential_seed, cfg.potential_amplitude)?;
            Ok(SpectralOperator::schrodinger(grid, &v)?)
        }
        OperatorKind::MagneticSchrodinger => Err(HarnessError::Config(
            "the equivalence pipeline needs a scalar operator (laplacian or schrodinger)".into(),
        )),
    }
}

pub fn run_equivalence(cfg: &ExperimentConfig) -> Result<EquivalenceReport> {
    let out_dir = Path::new(&cfg.out_dir);
    std::fs::create_dir_all(out_dir)?;
    let grid = cfg.grid()?;
    let op = build_scalar_operator(cfg)?;
    let scales = ScaleGrid::for_reconstruction(&op);
    let corpus = generate_corpus(cfg, grid)?;

    // one bundle per distinct M
    let xi_max = scales.t_max() * op.max_eigenvalue().sqrt() + 8.0;
    let mut bundles: BTreeMap<usize, CalderonBundle> = BTreeMap::new();
    for &p in &cfg.p_list {
        let m = cfg.m_for(p);
        if !bundles.contains_key(&m) {
            bundles.insert(m, CalderonBundle::new(m, xi_max)?);
        }
    }

    // maximal-function symbols: the heat symbol and Φ (of the smallest M
    // bundle; Φ is M-independent)
    let first_bundle = bundles.values().next().expect("at least one p");
    let nt_symbols: Vec<(String, Symbol)> = vec![
        ("heat".to_string(), Symbol::gaussian()),
        ("Phi".to_string(), first_bundle.phi().clone()),
    ];
    let mut nt_column_names = Vec::new();
    for (name, _) in &nt_symbols {
        for &alpha in &cfg.alpha_list {
            nt_column_names.push(format!("nt_{name}_a{alpha}"));
        }
    }

    let mut rows = Vec::new();
    let mut hard_failures = Vec::new();
    for &p in &cfg.p_list {
        let m_order = cfg.m_for(p);
        let bundle = &bundles[&m_order];
        let cone = ConeParams::defaults(grid.dim(), p);
        let dict = Dictionary::normalized(
            vec![Symbol::gaussian(), bundle.phi().clone(), Symbol::rational_decay()],
            cone.grand_n,
        )?;
        for (name, f) in &corpus {
            let area = at_stage(name, "area_function", area_function(&op, f, &scales))?;
            let heat_nt = at_stage(
                name,
                "nt_maximal",
                nt_maximal(&op, &Symbol::gaussian(), f, &scales, 1.0),
            )?;
            let radial = at_stage(name, "radial_maximal", radial_maximal(&op, f, &scales))?;
            let mut nt_norms = Vec::new();
            for (_, sym) in &nt_symbols {
                for &alpha in &cfg.alpha_list {
                    let m = at_stage(name, "nt_maximal", nt_maximal(&op, sym, f, &scales, alpha))?;
                    nt_norms.push(lp_quasinorm(&m, p)?);
                }
            }
            let grand = at_stage(name, "grand_maximal", grand_maximal(&op, &dict, f, &scales))?;
            let mf = at_stage(name, "script_m", script_m(&op, bundle, f, &scales))?;
            let dec = at_stage(
                name,
                "atomic_decompose",
                atomic_decompose(&op, bundle, f, p, m_order, &scales),
            )?;
            let mut size_qinf_max = 0.0f64;
            let mut support_max = 0.0f64;
            let mut lm_err_max = 0.0f64;
            for term in &dec.terms {
                let val = at_stage(name, "validate_atom", validate_atom(&op, term, cfg.support_tol))?;
                size_qinf_max = size_qinf_max.max(val.size_ratio_qinf);
                support_max = support_max.max(val.max_support_mass);
                lm_err_max = lm_err_max.max(val.lm_identity_rel_err);
            }
            let residual_rel = dec.residual.l2_norm() / f.l2_norm();
            if support_max > cfg.support_tol {
                hard_failures.push(format!(
                    "{name} p={p}: atom support mass {support_max:.3e} exceeds {:.1e}",
                    cfg.support_tol
                ));
            }
            if lm_err_max > 1e-10 {
                hard_failures
                    .push(format!("{name} p={p}: a = L^M b identity defect {lm_err_max:.3e}"));
            }
            if residual_rel > cfg.residual_bound {
                hard_failures.push(format!(
                    "{name} p={p}: residual {residual_rel:.3e} exceeds {:.1e}",
                    cfg.residual_bound
                ));
            }
            rows.push(EquivalenceRow {
                function: name.clone(),
                p,
                area_norm: lp_quasinorm(&area, p)?,
                heat_nt_norm: lp_quasinorm(&heat_nt, p)?,
                radial_norm: lp_quasinorm(&radial, p)?,
                nt_norms,
                grand_norm: lp_quasinorm(&grand, p)?,
                script_m_norm: lp_quasinorm(&mf, p)?,
                budget: dec.budget,
                residual_rel,
                atom_count: dec.terms.len(),
                size_qinf_max,
                support_max,
                lm_err_max,
                coverage_fraction: dec.coverage.assigned_pairs as f64
                    / dec.coverage.total_pairs.max(1) as f64,
            });
        }
    }

    // ratio summary per p: min/max across corpus entries
    let alpha_one = cfg.alpha_list.iter().position(|&a| (a - 1.0).abs() < 1e-12);
    let heat_col = alpha_one; // symbol 0 is the heat symbol
    let phi_col = alpha_one.map(|i| cfg.alpha_list.len() + i);
    let mut summary = Vec::new();
    for &p in &cfg.p_list {
        let group: Vec<&EquivalenceRow> =
            rows.iter().filter(|r| (r.p - p).abs() < 1e-12).collect();
        let mut push = |name: &str, f: &dyn Fn(&EquivalenceRow) -> f64| {
            let vals: Vec<f64> = group.iter().map(|r| f(r)).collect();
            let min = vals.iter().copied().fold(f64::INFINITY, f64::min);
            let max = vals.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            summary.push(RatioSummary { p, name: name.to_string(), min, max });
        };
        if let (Some(hc), Some(pc)) = (heat_col, phi_col) {
            push("heat_nt_over_phi_nt", &move |r| r.nt_norms[hc] / r.nt_norms[pc]);
        }
        push("heat_nt_over_radial", &|r| r.heat_nt_norm / r.radial_norm);
        push("budget_over_heat_nt", &|r| r.budget / r.heat_nt_norm);
        push("budget_over_script_m", &|r| r.budget / r.script_m_norm);
        push("area_over_heat_nt", &|r| r.area_norm / r.heat_nt_norm);
        push("grand_over_heat_nt", &|r| r.grand_norm / r.heat_nt_norm);
        push("size_qinf_max", &|r| r.size_qinf_max);
    }
    for s in &summary {
        if !(s.min.is_finite() && s.max.is_finite()) {
            hard_failures.push(format!("ratio {} at p={} is not finite", s.name, s.p));
        }
    }

    // CSV
    let mut header = String::from("function,p,area,heat_nt,radial");
    for c in &nt_column_names {
        header.push(',');
        header.push_str(c);
    }
    header.push_str(
        ",grand,script_m,budget,residual_rel,atom_count,size_qinf_max,support_max,lm_err_max,coverage",
    );
    let csv_rows: Vec<Vec<String>> = rows
        .iter()
        .map(|r| {
            let mut cols = vec![r.function.clone(), r.p.to_string(), fmt_f64(r.area_norm)];
            cols.push(fmt_f64(r.heat_nt_norm));
            cols.push(fmt_f64(r.radial_norm));
            for v in &r.nt_norms {
                cols.push(fmt_f64(*v));
            }
            cols.push(fmt_f64(r.grand_norm));
            cols.push(fmt_f64(r.script_m_norm));
            cols.push(fmt_f64(r.budget));
            cols.push(fmt_f64(r.residual_rel));
            cols.push(r.atom_count.to_string());
            cols.push(fmt_f64(r.size_qinf_max));
            cols.push(fmt_f64(r.support_max));
            cols.push(fmt_f64(r.lm_err_max));
            cols.push(fmt_f64(r.coverage_fraction));
            cols
        })
        .collect();
    let csv_path = out_dir.join("equivalence.csv");
    write_table_csv(&csv_path, &header, &csv_rows)?;

    let summary_rows: Vec<Vec<String>> = summary
        .iter()
        .map(|s| {
            vec![
                s.p.to_string(),
                s.name.clone(),
                fmt_f64(s.min),
                fmt_f64(s.max),
                fmt_f64(s.max / s.min),
            ]
        })
        .collect();
    write_table_csv(&out_dir.join("equivalence_summary.csv"), "p,ratio,min,max,spread", &summary_rows)?;

    // JSON summary (BTreeMap keys keep the output deterministic)
    let json = serde_json::json!({
        "schema": 1,
        "rows": rows.iter().map(|r| serde_json::json!({
            "function": r.function,
            "p": r.p,
            "area": r.area_norm,
            "heat_nt": r.heat_nt_norm,
            "radial": r.radial_norm,
            "grand": r.grand_norm,
            "script_m": r.script_m_norm,
            "budget": r.budget,
            "residual_rel": r.residual_rel,
            "atom_count": r.atom_count,
            "size_qinf_max": r.size_qinf_max,
            "support_max": r.support_max,
            "lm_err_max": r.lm_err_max,
            "coverage": r.coverage_fraction,
        })).collect::<Vec<_>>(),
        "summary": summary.iter().map(|s| serde_json::json!({
            "p": s.p, "ratio": s.name, "min": s.min, "max": s.max,
        })).collect::<Vec<_>>(),
        "hard_failures": hard_failures,
    });
    let json_path = out_dir.join("equivalence_summary.json");
    std::fs::write(&json_path, serde_json::to_string_pretty(&json).expect("serializable"))?;

    Ok(EquivalenceReport { rows, summary, hard_failures, nt_column_names, csv_path, json_path })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_corpus_gives_empty_report() {
        let mut cfg = ExperimentConfig::default();
        cfg.grid_n = 32;
        cfg.corpus = Vec::new();
        cfg.p_list = vec![1.0];
        let dir = tempfile::tempdir().unwrap();
        cfg.out_dir = dir.path().join("out").to_string_lossy().into_owned();
        let rep = run_equivalence(&cfg).unwrap();
        assert!(rep.rows.is_empty());
        assert!(rep.hard_failures.is_empty());
        assert!(rep.csv_path.exists());
    }

    #[test]
    fn magnetic_config_is_rejected() {
        let mut cfg = ExperimentConfig::default();
        cfg.operator = OperatorKind::MagneticSchrodinger;
        assert!(build_scalar_operator(&cfg).is_err());
    }
}
