//! Deterministic test-function corpus: localized, oscillatory, rough and
//! smooth entries spanning the behaviours the norm-equivalence constants
//! have to survive. Periodic entries are projected mean-zero so the zero
//! mode never contaminates reconstruction.

use crate::config::ExperimentConfig;
use crate::error::{HarnessError, Result};
use hardy_core::{Boundary, Field, GridSpec};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Build the named corpus entries on `grid`. Deterministic in the seed;
/// every entry is nonzero.
pub fn generate_corpus(cfg: &ExperimentConfig, grid: GridSpec) -> Result<Vec<(String, Field)>> {
    let mut out = Vec::with_capacity(cfg.corpus.len());
    for name in &cfg.corpus {
        let f = generate_named(cfg, grid, name)?;
        let f = if grid.boundary() == Boundary::Periodic { f.mean_zero() } else { f };
        if f.linf_norm() == 0.0 {
            return Err(HarnessError::Config(format!("corpus entry `{name}` is identically zero")));
        }
        out.push((name.clone(), f));
    }
    Ok(out)
}

fn generate_named(cfg: &ExperimentConfig, grid: GridSpec, name: &str) -> Result<Field> {
    let n = grid.points_per_side();
    let side = grid.side_length();
    let tau = 2.0 * std::f64::consts::PI;
    let coord = |p: hardy_core::Point, a: usize| p[a] as f64 * grid.spacing();
    match name {
        "spike" => {
            let mut f = Field::zeros(grid);
            let target = grid.num_points() / 3;
            let mut vals = f.values().clone();
            vals[target] = 1.0;
            f = Field::new(grid, vals)?;
            Ok(f)
        }
        "ball" => {
            let center = center_point(grid);
            let r = 0.07 * side;
            Ok(Field::from_fn(grid, |p| if grid.distance(p, center) < r { 1.0 } else { 0.0 })?)
        }
        "bump" => {
            let center = center_point(grid);
            let r = 0.15 * side;
            Ok(Field::from_fn(grid, |p| compact_bump(grid.distance(p, center) / r))?)
        }
        "dipole" => {
            // difference of shifted bumps along the first axis: exactly mean-zero
            let r = 0.1 * side;
            let c1 = offset_point(grid, 0.3);
            let c2 = offset_point(grid, 0.7);
            Ok(Field::from_fn(grid, |p| {
                compact_bump(grid.distance(p, c1) / r) - compact_bump(grid.distance(p, c2) / r)
            })?)
        }
        "cosine" => {
            let k = cfg.cosine_mode as f64;
            if grid.boundary() != Boundary::Periodic {
                return Err(HarnessError::Config("cosine entry needs a periodic grid".into()));
            }
            Ok(Field::from_fn(grid, |p| (tau * k * coord(p, 0) / side).cos())?)
        }
        "band" => {
            let mut rng = ChaCha8Rng::seed_from_u64(cfg.corpus_seed);
            let kmax = cfg.band_max_mode.min(n / 4).max(1);
            // per-axis random band-limited combination
            let mut coeffs = Vec::new();
            for _axis in 0..grid.dim() {
                let mut axis_coeffs = Vec::new();
                for _k in 1..=kmax {
                    let a: f64 = rng.gen_range(-1.0..1.0);
                    let b: f64 = rng.gen_range(-1.0..1.0);
                    axis_coeffs.push((a, b));
                }
                coeffs.push(axis_coeffs);
            }
            Ok(Field::from_fn(grid, |p| {
                let mut v = 0.0;
                for (axis, axis_coeffs) in coeffs.iter().enumerate() {
                    for (ki, &(a, b)) in axis_coeffs.iter().enumerate() {
                        let arg = tau * (ki + 1) as f64 * coord(p, axis) / side;
                        v += a * arg.cos() + b * arg.sin();
                    }
                }
                v
            })?)
        }
        other => Err(HarnessError::Config(format!("unknown corpus generator `{other}`"))),
    }
}

/// Nonnegative random potential for Schrödinger runs.
pub fn random_potential(grid: GridSpec, seed: u64, amplitude: f64) -> Result<Field> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let vals =
        ndarray::Array1::from_shape_fn(grid.num_points(), |_| rng.gen_range(0.0..amplitude));
    Ok(Field::new(grid, vals)?)
}

/// Linear vector potential components for magnetic runs (seeded, bounded).
pub fn random_vector_potential(grid: GridSpec, seed: u64, amplitude: f64) -> Result<Vec<Field>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xa5a5_5a5a);
    let mut out = Vec::with_capacity(grid.dim());
    for _ in 0..grid.dim() {
        let vals = ndarray::Array1::from_shape_fn(grid.num_points(), |_| {
            rng.gen_range(-amplitude..amplitude)
        });
        out.push(Field::new(grid, vals)?);
    }
    Ok(out)
}

fn compact_bump(u: f64) -> f64 {
    if u.abs() < 1.0 {
        (-1.0 / (1.0 - u * u)).exp()
    } else {
        0.0
    }
}

fn center_point(grid: GridSpec) -> hardy_core::Point {
    let c = (grid.points_per_side() / 2) as i64;
    let mut p = [0i64; 3];
    for a in p.iter_mut().take(grid.dim()) {
        *a = c;
    }
    p
}

fn offset_point(grid: GridSpec, frac: f64) -> hardy_core::Point {
    let mut p = center_point(grid);
    p[0] = (frac * grid.points_per_side() as f64) as i64;
    p
}

#[cfg(test)]
mod tests {
    use super::*;
    use hardy_core::lp_quasinorm;

    fn cfg() -> ExperimentConfig {
        ExperimentConfig::default()
    }

    #[test]
    fn dipole_is_exactly_mean_zero_before_projection() {
        let grid = GridSpec::new(1, 128, 1.0 / 128.0, Boundary::Periodic).unwrap();
        let f = generate_named(&cfg(), grid, "dipole").unwrap();
        assert!(f.mean().abs() <= 1e-15);
    }

    #[test]
    fn band_reproducible_bit_exactly() {
        let grid = GridSpec::new(1, 64, 1.0 / 64.0, Boundary::Periodic).unwrap();
        let a = generate_corpus(&cfg(), grid).unwrap();
        let b = generate_corpus(&cfg(), grid).unwrap();
        for ((_, x), (_, y)) in a.iter().zip(&b) {
            for (u, v) in x.values().iter().zip(y.values().iter()) {
                assert_eq!(u.to_bits(), v.to_bits());
            }
        }
    }

    #[test]
    fn cosine_mode_is_exact_eigenvector() {
        let grid = GridSpec::new(1, 64, 1.0 / 64.0, Boundary::Periodic).unwrap();
        let op = hardy_core::SpectralOperator::laplacian(grid).unwrap();
        let f = generate_named(&cfg(), grid, "cosine").unwrap();
        let lf = op.apply_matrix(&f).unwrap();
        let lam = hardy_core::oracle::periodic_laplacian_eigenvalue_1d(
            64,
            grid.spacing(),
            cfg().cosine_mode,
        );
        let diff = lf.sub(&f.scale(lam)).unwrap();
        assert!(diff.linf_norm() <= 1e-9 * lam.max(1.0));
    }

    #[test]
    fn entries_nonzero_and_mean_zero_on_periodic() {
        let grid = GridSpec::new(1, 64, 1.0 / 64.0, Boundary::Periodic).unwrap();
        for (name, f) in generate_corpus(&cfg(), grid).unwrap() {
            assert!(f.linf_norm() > 0.0, "{name} vanished");
            assert!(f.mean().abs() <= 1e-12, "{name} mean {}", f.mean());
            assert!(lp_quasinorm(&f, 1.0).unwrap() > 0.0);
        }
    }

    #[test]
    fn unknown_generator_rejected() {
        let grid = GridSpec::new(1, 16, 1.0 / 16.0, Boundary::Periodic).unwrap();
        let mut c = cfg();
        c.corpus = vec!["wavelet".into()];
        assert!(generate_corpus(&c, grid).is_err());
    }
}
