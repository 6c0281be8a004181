//! Independent reference paths used to cross-check the dense spectral
//! calculus. Nothing here touches [`crate::operator::SpectralOperator`]:
//! the periodic 1D laplacian is diagonalized by a hand-rolled DFT with the
//! closed-form stencil symbol, and the continuum heat kernel comes from the
//! wrapped-Gaussian series.

use crate::error::{Error, Result};
use crate::grid::{Boundary, Field, GridSpec};
use crate::symbols::Symbol;

/// Closed-form eigenvalue of the periodic second-difference stencil:
/// (2 − 2cos(2πk/N)) / h².
pub fn periodic_laplacian_eigenvalue_1d(n: usize, h: f64, k: usize) -> f64 {
    let theta = 2.0 * std::f64::consts::PI * k as f64 / n as f64;
    (2.0 - 2.0 * theta.cos()) / (h * h)
}

/// F(t√L) f on a 1D periodic grid via plain Fourier diagonalization.
pub fn dft_symbol_apply_1d(grid: &GridSpec, sym: &Symbol, t: f64, f: &Field) -> Result<Field> {
    if grid.dim() != 1 || grid.boundary() != Boundary::Periodic {
        return Err(Error::Precondition(
            "dft_symbol_apply_1d needs a 1D periodic grid".into(),
        ));
    }
    if f.grid() != grid {
        return Err(Error::GridMismatch);
    }
    let n = grid.points_per_side();
    let h = grid.spacing();
    let tau = 2.0 * std::f64::consts::PI / n as f64;
    // forward transform
    let mut re = vec![0.0f64; n];
    let mut im = vec![0.0f64; n];
    for (k, (rk, ik)) in re.iter_mut().zip(im.iter_mut()).enumerate() {
        let mut ar = 0.0;
        let mut ai = 0.0;
        for (j, &v) in f.values().iter().enumerate() {
            let ang = tau * (j * k % n) as f64;
            ar += v * ang.cos();
            ai -= v * ang.sin();
        }
        *rk = ar;
        *ik = ai;
    }
    // multiplier
    for k in 0..n {
        let lam = periodic_laplacian_eigenvalue_1d(n, h, k);
        let m = sym.eval(t * lam.sqrt());
        re[k] *= m;
        im[k] *= m;
    }
    // inverse transform, real part
    let mut out = ndarray::Array1::zeros(n);
    for (j, o) in out.iter_mut().enumerate() {
        let mut acc = 0.0;
        for k in 0..n {
            let ang = tau * (j * k % n) as f64;
            acc += re[k] * ang.cos() - im[k] * ang.sin();
        }
        *o = acc / n as f64;
    }
    Field::new(*grid, out)
}

/// Continuum kernel row of e^{-t²Δ} on the circle of circumference N·h:
/// the wrapped Gaussian (4πt²)^{-1/2} Σ_m exp(−(d + m·side)²/(4t²)).
pub fn wrapped_heat_kernel_row_1d(grid: &GridSpec, t: f64, x0: usize) -> Result<Vec<f64>> {
    if grid.dim() != 1 || grid.boundary() != Boundary::Periodic {
        return Err(Error::Precondition(
            "wrapped_heat_kernel_row_1d needs a 1D periodic grid".into(),
        ));
    }
    let n = grid.points_per_side();
    let h = grid.spacing();
    let side = grid.side_length();
    let pref = 1.0 / (4.0 * std::f64::consts::PI * t * t).sqrt();
    let mut row = vec![0.0f64; n];
    for (j, r) in row.iter_mut().enumerate() {
        let d = (j as f64 - x0 as f64) * h;
        let mut acc = 0.0;
        for m in -8i64..=8 {
            let dd = d + m as f64 * side;
            acc += (-dd * dd / (4.0 * t * t)).exp();
        }
        *r = pref * acc;
    }
    Ok(row)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dft_of_eigenmode_scales_by_symbol() {
        let g = GridSpec::new(1, 64, 1.0 / 64.0, Boundary::Periodic).unwrap();
        let k = 5usize;
        let f = Field::from_fn(g, |p| {
            (2.0 * std::f64::consts::PI * k as f64 * p[0] as f64 / 64.0).cos()
        })
        .unwrap();
        let t = 0.07;
        let lam = periodic_laplacian_eigenvalue_1d(64, g.spacing(), k);
        let sym = Symbol::gaussian();
        let want = f.scale(sym.eval(t * lam.sqrt()));
        let got = dft_symbol_apply_1d(&g, &sym, t, &f).unwrap();
        let rel = got.sub(&want).unwrap().l2_norm() / want.l2_norm();
        assert!(rel <= 1e-12, "rel = {rel}");
    }

    #[test]
    fn wrapped_row_integrates_to_one() {
        let g = GridSpec::new(1, 128, 1.0 / 128.0, Boundary::Periodic).unwrap();
        let row = wrapped_heat_kernel_row_1d(&g, 0.05, 0).unwrap();
        let mass: f64 = row.iter().map(|v| v * g.spacing()).sum();
        assert!((mass - 1.0).abs() < 1e-10);
    }
}
