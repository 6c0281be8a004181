//! Kernel-estimate checkers for the spectral-multiplier layer: finite
//! propagation of Φ(t√L), the t^{-n} sup bound, the weighted-L² bound for
//! band-limited multipliers and the cross-scale decay of composed symbols.
//! Each checker measures the constant in the corresponding continuum
//! estimate on the discrete operator and reports it; none of them asserts.

use crate::error::{Error, Result};
use crate::grid::GridSpec;
use crate::operator::SpectralOperator;
use crate::symbols::Symbol;

/// One measured row of a decay report.
#[derive(Clone, Copy, Debug)]
pub struct DecayRow {
    pub s: f64,
    pub t: f64,
    pub value: f64,
}

/// Parameterized measurement of a kernel estimate.
#[derive(Clone, Debug)]
pub struct DecayReport {
    pub label: String,
    /// the headline constant (max over rows unless documented otherwise)
    pub measured_constant: f64,
    pub rows: Vec<DecayRow>,
}

/// Relative ℓ² energy of the kernel of (t²L)^κ Φ(t√L) outside the cone
/// |x−y| ≤ t + slack, per scale; `measured_constant` is the worst scale.
///
/// "Mass" is the energy fraction Σ_out K² / Σ K².
pub fn finite_propagation_report(
    op: &SpectralOperator,
    phi: &Symbol,
    kappa: u32,
    t_values: &[f64],
    slack: f64,
) -> Result<DecayReport> {
    let grid = *op.grid();
    let mut rows = Vec::with_capacity(t_values.len());
    for &t in t_values {
        let sym = power_weighted(phi, kappa);
        let kernel = op.kernel_matrix(&sym, t)?;
        let m = grid.num_points() * op.components();
        let point_of = |i: usize| i % grid.num_points();
        let mut total = 0.0;
        let mut outside = 0.0;
        for x in 0..m {
            for y in 0..m {
                let v = kernel.entries()[[x, y]];
                let e = v * v;
                total += e;
                if grid.distance_idx(point_of(x), point_of(y)) > t + slack {
                    outside += e;
                }
            }
        }
        rows.push(DecayRow { s: slack, t, value: if total > 0.0 { outside / total } else { 0.0 } });
    }
    let measured_constant = rows.iter().map(|r| r.value).fold(0.0f64, f64::max);
    Ok(DecayReport { label: format!("finite_propagation kappa={kappa}"), measured_constant, rows })
}

/// max |K_{(t²L)^κ Φ(t√L)}| · t^n per scale; `measured_constant` is the
/// max/min spread over the scales.
pub fn sup_bound_report(
    op: &SpectralOperator,
    phi: &Symbol,
    kappa: u32,
    t_values: &[f64],
) -> Result<DecayReport> {
    let n = op.grid().dim() as i32;
    let mut rows = Vec::with_capacity(t_values.len());
    for &t in t_values {
        let sym = power_weighted(phi, kappa);
        let kernel = op.kernel_matrix(&sym, t)?;
        rows.push(DecayRow { s: 0.0, t, value: kernel.max_abs() * t.powi(n) });
    }
    let hi = rows.iter().map(|r| r.value).fold(f64::NEG_INFINITY, f64::max);
    let lo = rows.iter().map(|r| r.value).fold(f64::INFINITY, f64::min);
    Ok(DecayReport {
        label: format!("sup_bound kappa={kappa}"),
        measured_constant: hi / lo,
        rows,
    })
}

/// (t²λ)^κ Φ(t√λ) as a symbol of x = t√λ.
fn power_weighted(phi: &Symbol, kappa: u32) -> Symbol {
    let phi = phi.clone();
    let p = 2 * kappa as i32;
    Symbol::new(format!("x^{p}·{}", phi.name()), move |x| x.powi(p) * phi.eval(x))
}

/// Weighted-L² bound for band-limited multipliers: computes
/// max_x Σ_y |K_{F(√L)}(x,y)|² (1 + R|x−y|)^s h^n and divides by
/// R^n ‖F(R·)‖²_{C^{s/2+ε}}, the Hölder norm replaced by its
/// finite-difference surrogate. One row per call.
pub fn weighted_l2_report(
    op: &SpectralOperator,
    f_sym: &Symbol,
    big_r: f64,
    s_exp: f64,
    epsilon: f64,
) -> Result<DecayReport> {
    // support precondition: F vanishes above R (sampled)
    let mut x = big_r * 1.001;
    while x <= big_r * 3.0 {
        if f_sym.eval(x).abs() > 1e-12 {
            return Err(Error::Precondition(format!(
                "{} does not vanish above R = {big_r}",
                f_sym.name()
            )));
        }
        x += big_r / 64.0;
    }
    let grid = *op.grid();
    let m = grid.num_points() * op.components();
    let point_of = |i: usize| i % grid.num_points();
    let hn = grid.cell_measure();
    let kernel = op.kernel_matrix(f_sym, 1.0)?;
    let mut weighted = 0.0f64;
    for x in 0..m {
        let mut acc = 0.0;
        for y in 0..m {
            let v = kernel.entries()[[x, y]];
            let d = grid.distance_idx(point_of(x), point_of(y));
            acc += v * v * (1.0 + big_r * d).powf(s_exp) * hn;
        }
        weighted = weighted.max(acc);
    }
    let gamma = s_exp / 2.0 + epsilon;
    let holder = holder_surrogate(f_sym, big_r, gamma);
    let denom = big_r.powi(grid.dim() as i32) * holder * holder;
    let value = if weighted == 0.0 { 0.0 } else { weighted / denom };
    Ok(DecayReport {
        label: format!("weighted_l2 R={big_r} s={s_exp}"),
        measured_constant: value,
        rows: vec![DecayRow { s: s_exp, t: big_r, value }],
    })
}

/// Finite-difference C^γ surrogate of ‖F(R·)‖ on [0, 1.2]:
/// Σ_{k ≤ ⌊γ⌋} ‖F^{(k)}‖_∞ plus the (γ−⌊γ⌋)-Hölder quotient of F^{(⌊γ⌋)}
/// over the sample grid.
fn holder_surrogate(f_sym: &Symbol, big_r: f64, gamma: f64) -> f64 {
    const SAMPLES: usize = 513;
    let du = 1.2 / (SAMPLES - 1) as f64;
    let mut levels: Vec<Vec<f64>> = Vec::new();
    levels.push((0..SAMPLES).map(|i| f_sym.eval(big_r * i as f64 * du)).collect());
    let m_whole = gamma.floor() as usize;
    for _ in 0..m_whole {
        let prev = levels.last().expect("at least one level");
        let mut next = vec![0.0f64; prev.len()];
        for i in 0..prev.len() {
            next[i] = if i == 0 {
                (prev[1] - prev[0]) / du
            } else if i == prev.len() - 1 {
                (prev[i] - prev[i - 1]) / du
            } else {
                (prev[i + 1] - prev[i - 1]) / (2.0 * du)
            };
        }
        levels.push(next);
    }
    let mut norm = 0.0f64;
    for lv in &levels {
        norm += lv.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    }
    let frac = gamma - m_whole as f64;
    if frac > 0.0 {
        let top = levels.last().expect("nonempty");
        let mut quot = 0.0f64;
        for i in 0..top.len() {
            for j in (i + 1)..top.len() {
                let dist = (j - i) as f64 * du;
                quot = quot.max((top[i] - top[j]).abs() / dist.powf(frac));
            }
        }
        norm += quot;
    }
    norm
}

/// Cross-scale decay of K_{ψ₁(s√L) ψ₂(t√L)}: per pair (s, t) the measured
/// constant max_{x,y} |K| (max(s,t)+|x−y|)^{n+η} / [(min/max)·max(s,t)^η];
/// `measured_constant` is the max over pairs.
pub fn cross_scale_decay_report(
    op: &SpectralOperator,
    psi1: &Symbol,
    psi2: &Symbol,
    eta_exp: f64,
    scale_pairs: &[(f64, f64)],
) -> Result<DecayReport> {
    for psi in [psi1, psi2] {
        if psi.eval(0.0).abs() > 1e-12 {
            return Err(Error::Precondition(format!("{}(0) must vanish", psi.name())));
        }
    }
    let grid = *op.grid();
    let n = grid.dim() as f64;
    let m = grid.num_points() * op.components();
    let point_of = |i: usize| i % grid.num_points();
    let mut rows = Vec::with_capacity(scale_pairs.len());
    for &(s, t) in scale_pairs {
        let p1 = psi1.clone();
        let p2 = psi2.clone();
        let ratio = s / t;
        let prod = Symbol::new("psi1(s·)psi2(t·)", move |x| p1.eval(ratio * x) * p2.eval(x));
        // composed symbol as a function of t√λ: ψ₁(s√λ) = ψ₁((s/t)·t√λ)
        let kernel = op.kernel_matrix(&prod, t)?;
        let (mx, mn) = (s.max(t), s.min(t));
        let mut worst = 0.0f64;
        for x in 0..m {
            for y in 0..m {
                let d = grid.distance_idx(point_of(x), point_of(y));
                let c = kernel.entries()[[x, y]].abs() * (mx + d).powf(n + eta_exp)
                    / ((mn / mx) * mx.powf(eta_exp));
                worst = worst.max(c);
            }
        }
        rows.push(DecayRow { s, t, value: worst });
    }
    let measured_constant = rows.iter().map(|r| r.value).fold(0.0f64, f64::max);
    Ok(DecayReport { label: format!("cross_scale eta={eta_exp}"), measured_constant, rows })
}

/// max |K_{ψ₁(s√L)ψ₂(t√L)}| for slope diagnostics.
pub fn cross_scale_max_kernel(
    op: &SpectralOperator,
    psi1: &Symbol,
    psi2: &Symbol,
    s: f64,
    t: f64,
) -> Result<f64> {
    let p1 = psi1.clone();
    let p2 = psi2.clone();
    let ratio = s / t;
    let prod = Symbol::new("prod", move |x| p1.eval(ratio * x) * p2.eval(x));
    Ok(op.kernel_matrix(&prod, t)?.max_abs())
}

/// Least-squares slope of ln(y) against ln(x).
pub fn log_log_slope(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let lx: Vec<f64> = xs.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = ys.iter().map(|v| v.ln()).collect();
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let cov: f64 = lx.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum();
    let var: f64 = lx.iter().map(|a| (a - mx) * (a - mx)).sum();
    cov / var
}

/// Geometric sequence of kernel-checker scales inside [lo, hi].
pub fn geometric_scales(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    assert!(count >= 2 && hi > lo && lo > 0.0);
    let rho = (hi / lo).powf(1.0 / (count - 1) as f64);
    (0..count).map(|k| lo * rho.powi(k as i32)).collect()
}

/// Default checker scale band [8h, side/4] from the module preconditions.
pub fn checker_band(grid: &GridSpec) -> (f64, f64) {
    (8.0 * grid.spacing(), 0.25 * grid.side_length())
}
