//! The kernel-estimate report pack: one CSV per checker (finite
//! propagation, sup bound, weighted L², cross-scale decay, Gaussian fit,
//! resolvent), all driven from one operator built per config.

use crate::config::ExperimentConfig;
use crate::corpus::{random_potential, random_vector_potential};
use crate::error::Result;
use hardy_core::io::{fmt_f64, write_gaussian_report_csv, write_table_csv};
use hardy_core::multiplier::{
    checker_band, cross_scale_decay_report, cross_scale_max_kernel, finite_propagation_report,
    geometric_scales, log_log_slope, sup_bound_report, weighted_l2_report,
};
use hardy_core::{fourier_symbol, make_bump, OperatorKind, SpectralOperator, Symbol};
use std::path::{Path, PathBuf};

pub fn build_operator(cfg: &ExperimentConfig) -> Result<SpectralOperator> {
    let grid = cfg.grid()?;
    Ok(match cfg.operator {
        OperatorKind::Laplacian => SpectralOperator::laplacian(grid)?,
        OperatorKind::Schrodinger => {
            let v = random_potential(grid, cfg.potential_seed, cfg.potential_amplitude)?;
            SpectralOperator::schrodinger(grid, &v)?
        }
        OperatorKind::MagneticSchrodinger => {
            let v = random_potential(grid, cfg.potential_seed, cfg.potential_amplitude)?;
            let a = random_vector_potential(grid, cfg.potential_seed, cfg.potential_amplitude)?;
            SpectralOperator::magnetic(grid, &a, Some(&v))?
        }
    })
}

/// Run all six checkers; returns the written file paths.
pub fn run_kernel_reports(cfg: &ExperimentConfig) -> Result<Vec<PathBuf>> {
    let out_dir = Path::new(&cfg.out_dir);
    std::fs::create_dir_all(out_dir)?;
    let grid = cfg.grid()?;
    let h = grid.spacing();
    let op = build_operator(cfg)?;
    let (band_lo, band_hi) = checker_band(&grid);
    let ts = geometric_scales(band_lo, band_hi, 9);
    let xi_max = band_hi * op.max_eigenvalue().sqrt() + 8.0;
    let phi = fourier_symbol(&make_bump(), xi_max)?;
    let mut paths = Vec::new();

    // finite propagation (energy fraction outside the 5h-slack cone)
    {
        let mut rows = Vec::new();
        for kappa in [0u32, 1, 2] {
            let rep = finite_propagation_report(&op, &phi, kappa, &ts, 5.0 * h)?;
            for r in &rep.rows {
                rows.push(vec![
                    kappa.to_string(),
                    fmt_f64(r.s),
                    fmt_f64(r.t),
                    fmt_f64(r.value),
                ]);
            }
        }
        let p = out_dir.join("finite_propagation.csv");
        write_table_csv(&p, "kappa,slack,t,outside_mass", &rows)?;
        paths.push(p);
    }

    // sup bound max|K|·t^n
    {
        let mut rows = Vec::new();
        for kappa in [0u32, 1, 2] {
            let rep = sup_bound_report(&op, &phi, kappa, &ts)?;
            for r in &rep.rows {
                rows.push(vec![kappa.to_string(), fmt_f64(r.t), fmt_f64(r.value)]);
            }
        }
        let p = out_dir.join("sup_bound.csv");
        write_table_csv(&p, "kappa,t,sup_times_tn", &rows)?;
        paths.push(p);
    }

    // weighted L² for band-limited multipliers across three R values
    {
        let sqrt_lam_max = op.max_eigenvalue().sqrt();
        let mut rows = Vec::new();
        for frac in [8.0, 4.0, 2.0] {
            let big_r = sqrt_lam_max / frac;
            let f = smooth_indicator(big_r);
            let rep = weighted_l2_report(&op, &f, big_r, 2.0, 0.5)?;
            rows.push(vec![fmt_f64(big_r), fmt_f64(2.0), fmt_f64(rep.measured_constant)]);
        }
        let p = out_dir.join("weighted_l2.csv");
        write_table_csv(&p, "R,s,ratio", &rows)?;
        paths.push(p);
    }

    // cross-scale decay: per-ratio constants (max over admissible base
    // scales) plus a small-ratio slope diagnostic
    {
        let psi = Symbol::x_gaussian();
        let base: Vec<f64> = geometric_scales(band_hi / 4.0, band_hi, 5);
        let mut rows = Vec::new();
        for ratio in [1.0, 0.5, 0.25, 0.125] {
            let pairs: Vec<(f64, f64)> = base
                .iter()
                .filter(|&&t| ratio * t >= band_lo - 1e-12)
                .map(|&t| (ratio * t, t))
                .collect();
            if pairs.is_empty() {
                continue;
            }
            let rep = cross_scale_decay_report(&op, &psi, &psi, 1.0, &pairs)?;
            rows.push(vec![fmt_f64(ratio), fmt_f64(band_hi), fmt_f64(rep.measured_constant)]);
        }
        // slope of max|K| vs s in the small-ratio regime
        let small: Vec<f64> = [0.125, 0.0625, 0.03125, 0.015625]
            .iter()
            .map(|r| r * band_hi)
            .collect();
        let maxk: Vec<f64> = small
            .iter()
            .map(|&s| cross_scale_max_kernel(&op, &psi, &psi, s, band_hi))
            .collect::<hardy_core::Result<_>>()?;
        let slope = log_log_slope(&small, &maxk);
        rows.push(vec!["slope".into(), fmt_f64(band_hi), fmt_f64(slope)]);
        let p = out_dir.join("cross_scale.csv");
        write_table_csv(&p, "ratio,base_t,constant", &rows)?;
        paths.push(p);
    }

    // Gaussian heat-kernel fit over diffusion times [4h², 0.1·side²-ish]
    {
        let times = geometric_scales(4.0 * h * h, 0.1, 10);
        let rep = op.gaussian_bound_report(&times)?;
        let p = out_dir.join("gaussian_fit.csv");
        write_gaussian_report_csv(&p, &rep)?;
        paths.push(p);
    }

    // resolvent quadrature cross-check
    {
        let mut rows = Vec::new();
        for kappa in [1u32, 2] {
            for t in [0.1, 1.0] {
                let d = op.resolvent_check(t, kappa)?;
                rows.push(vec![kappa.to_string(), fmt_f64(t), fmt_f64(d)]);
            }
        }
        let p = out_dir.join("resolvent.csv");
        write_table_csv(&p, "kappa,t,discrepancy", &rows)?;
        paths.push(p);
    }

    Ok(paths)
}

/// Smooth bump supported on [0, R], the band-limited multiplier the
/// weighted-L² checker exercises.
pub fn smooth_indicator(big_r: f64) -> Symbol {
    Symbol::with_support(format!("smooth-ind[0,{big_r}]"), big_r, move |x| {
        let u = 2.0 * x / big_r - 1.0;
        if u.abs() < 1.0 {
            (-1.0 / (1.0 - u * u)).exp() * std::f64::consts::E
        } else {
            0.0
        }
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn kernel_reports_write_six_files() {
        let mut cfg = ExperimentConfig::default();
        cfg.grid_n = 32;
        let dir = tempfile::tempdir().unwrap();
        cfg.out_dir = dir.path().join("k").to_string_lossy().into_owned();
        let paths = run_kernel_reports(&cfg).unwrap();
        assert_eq!(paths.len(), 6);
        for p in &paths {
            assert!(p.exists(), "{p:?} missing");
            let text = std::fs::read_to_string(p).unwrap();
            assert!(text.lines().count() >= 2, "{p:?} has no data rows");
        }
        // documented headers
        let fp = std::fs::read_to_string(dir.path().join("k/finite_propagation.csv")).unwrap();
        assert!(fp.starts_with("kappa,slack,t,outside_mass\n"));
        let rs = std::fs::read_to_string(dir.path().join("k/resolvent.csv")).unwrap();
        assert!(rs.starts_with("kappa,t,discrepancy\n"));
    }
}
