//! The scalar-function layer: the compactly supported bump φ, its Fourier
//! transform Φ, the reproducing pair Ψ(x) = x^{2M}Φ(x) with its Calderón
//! constant c_Ψ, the companion η, and the dictionary seminorm used to
//! normalize grand-maximal symbol classes.
//!
//! Symbols evaluate at |x|, so every `Symbol` is even by construction; the
//! spectral calculus only ever sees arguments t√λ ≥ 0.

use crate::error::{Error, Result};
use crate::quad::{gauss_legendre, gauss_legendre_log};
use std::sync::Arc;

/// An even scalar function, the only thing `spectral_apply` accepts.
#[derive(Clone)]
pub struct Symbol {
    name: String,
    support: Option<f64>,
    eval: Arc<dyn Fn(f64) -> f64 + Send + Sync>,
}

impl std::fmt::Debug for Symbol {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Symbol").field("name", &self.name).field("support", &self.support).finish()
    }
}

impl Symbol {
    /// Wrap `f`, evaluated at |x| (even extension).
    pub fn new(name: impl Into<String>, f: impl Fn(f64) -> f64 + Send + Sync + 'static) -> Self {
        Symbol { name: name.into(), support: None, eval: Arc::new(f) }
    }

    pub fn with_support(
        name: impl Into<String>,
        support: f64,
        f: impl Fn(f64) -> f64 + Send + Sync + 'static,
    ) -> Self {
        Symbol { name: name.into(), support: Some(support), eval: Arc::new(f) }
    }

    pub fn eval(&self, x: f64) -> f64 {
        (self.eval)(x.abs())
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    /// Radius of compact support, when known.
    pub fn support(&self) -> Option<f64> {
        self.support
    }

    /// Sampled evenness check; trivially true under the |x| convention but
    /// kept as the documented contract.
    pub fn is_even(&self, xs: &[f64]) -> bool {
        xs.iter().all(|&x| {
            let d = (self.eval(x) - self.eval(-x)).abs();
            d <= 1e-12 * (1.0 + self.eval(x).abs())
        })
    }

    /// e^{-x²}, the heat-semigroup symbol.
    pub fn gaussian() -> Symbol {
        Symbol::new("exp(-x^2)", |x| (-x * x).exp())
    }

    /// x² e^{-x²}, the symbol of t²L e^{-t²L}.
    pub fn heat_weight() -> Symbol {
        Symbol::new("x^2 exp(-x^2)", |x| x * x * (-x * x).exp())
    }

    /// x e^{-x²} (even extension |x|e^{-x²}); vanishes at 0.
    pub fn x_gaussian() -> Symbol {
        Symbol::new("x exp(-x^2)", |x| x * (-x * x).exp())
    }

    /// (1 + x²)^{-4}, a slowly decaying dictionary member.
    pub fn rational_decay() -> Symbol {
        Symbol::new("(1+x^2)^-4", |x| (1.0 + x * x).powi(-4))
    }

    /// The constant symbol 1.
    pub fn one() -> Symbol {
        Symbol::new("1", |_| 1.0)
    }
}

/// The canonical even bump: exp(-1/(1-x²)) on (-1,1), scaled so ∫φ = 1.
pub fn make_bump() -> Symbol {
    let (xs, ws) = gauss_legendre(2048, -1.0, 1.0);
    let z: f64 = xs.iter().zip(&ws).map(|(&x, &w)| raw_bump(x) * w).sum();
    Symbol::with_support("bump", 1.0, move |x| raw_bump(x) / z)
}

fn raw_bump(x: f64) -> f64 {
    if x.abs() < 1.0 {
        (-1.0 / (1.0 - x * x)).exp()
    } else {
        0.0
    }
}

/// Cosine transform Φ(ξ) = ∫ φ(x) cos(ξx) dx of a compactly supported even
/// symbol, normalized to Φ(0) = 1 and cached on a uniform table with cubic
/// interpolation. Evaluations beyond `xi_max` return 0; the constructor
/// extends the table until the boundary value is below 1e-10.
pub fn fourier_symbol(phi: &Symbol, xi_max: f64) -> Result<Symbol> {
    let supp = phi
        .support()
        .ok_or_else(|| Error::Symbol("fourier_symbol needs a compactly supported input".into()))?;
    const DXI: f64 = 1e-3;
    // the bump transform decays like exp(-c√ξ); 420 puts the tail below 1e-11
    let mut xi_max = xi_max.max(420.0);
    let (xs, ws) = gauss_legendre(2048, 0.0, supp);
    // even integrand: ∫_{-s}^{s} = 2 ∫_0^s
    let pv: Vec<f64> = xs.iter().zip(&ws).map(|(&x, &w)| 2.0 * phi.eval(x) * w).collect();
    let mut table;
    loop {
        let len = (xi_max / DXI).ceil() as usize + 1;
        table = vec![0.0f64; len];
        for (m, &p) in pv.iter().enumerate() {
            // cos(j·Δ·x_m) by the three-term recurrence, resynchronized every
            // 2048 steps so drift stays at machine level over long tables
            let a = xs[m] * DXI;
            let c = a.cos();
            let two_c = 2.0 * c;
            let mut cm2 = 1.0; // cos(0)
            let mut cm1 = c; // cos(a)
            table[0] += p;
            if len > 1 {
                table[1] += p * c;
            }
            for (j, slot) in table.iter_mut().enumerate().skip(2) {
                if j % 2048 == 0 {
                    cm2 = (a * (j - 1) as f64).cos();
                    cm1 = (a * j as f64).cos();
                    *slot += p * cm1;
                    continue;
                }
                let cj = two_c * cm1 - cm2;
                *slot += p * cj;
                cm2 = cm1;
                cm1 = cj;
            }
        }
        let tail = table[len - 1].abs().max(table[len - 2].abs());
        if tail < 1e-10 || xi_max > 4096.0 {
            break;
        }
        xi_max *= 1.5;
    }
    let norm = table[0];
    if !(norm.is_finite() && norm.abs() > 0.0) {
        return Err(Error::Symbol("cosine transform failed to normalize".into()));
    }
    for v in &mut table {
        *v /= norm;
    }
    let table = Arc::new(table);
    let name = format!("fourier[{}]", phi.name());
    Ok(Symbol::new(name, move |x| catmull_rom(&table, DXI, x)))
}

/// Local cubic (Catmull-Rom) interpolation on a uniform table; 0 beyond it.
fn catmull_rom(table: &[f64], dx: f64, x: f64) -> f64 {
    let t = x / dx;
    let last = table.len() - 1;
    if t >= (last - 1) as f64 {
        return 0.0;
    }
    let j = t.floor() as usize;
    let fr = t - j as f64;
    let p0 = table[j.saturating_sub(1)];
    let p1 = table[j];
    let p2 = table[j + 1];
    let p3 = table[(j + 2).min(last)];
    p1 + 0.5
        * fr
        * (p2 - p0
            + fr * (2.0 * p0 - 5.0 * p1 + 4.0 * p2 - p3 + fr * (3.0 * (p1 - p2) + p3 - p0)))
}

/// φ, Φ, Ψ = x^{2M}Φ, η and c_Ψ for a fixed vanishing order M.
#[derive(Clone, Debug)]
pub struct CalderonBundle {
    m: usize,
    phi_bump: Symbol,
    phi: Symbol,
    psi: Symbol,
    eta: Symbol,
    c_psi: f64,
}

impl CalderonBundle {
    /// Build the bundle; `xi_max` must cover the largest spectral argument
    /// t·√λ the bundle will meet.
    pub fn new(m: usize, xi_max: f64) -> Result<Self> {
        if m == 0 {
            return Err(Error::Precondition("CalderonBundle needs M >= 1".into()));
        }
        let phi_bump = make_bump();
        let phi = fourier_symbol(&phi_bump, xi_max)?;
        let phi_for_psi = phi.clone();
        let p2m = 2 * m as i32;
        let psi = Symbol::new(format!("x^{}·Phi", p2m), move |x| {
            x.powi(p2m) * phi_for_psi.eval(x)
        });

        // c_Ψ normalizes ∫_0^∞ Ψ(u) u e^{-u²} du to 1.
        let (us, ws) = gauss_legendre_log(4096, 1e-8, 40.0);
        let integral: f64 =
            us.iter().zip(&ws).map(|(&u, &w)| psi.eval(u) * u * (-u * u).exp() * w).sum();
        if !(integral.is_finite() && integral > 0.0) {
            return Err(Error::Symbol(format!("degenerate Calderón integral {integral}")));
        }
        let c_psi = 1.0 / integral;

        let eta = make_eta(&psi, c_psi);
        Ok(CalderonBundle { m, phi_bump, phi, psi, eta, c_psi })
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn phi_bump(&self) -> &Symbol {
        &self.phi_bump
    }

    /// Φ, the Fourier transform of the bump, Φ(0) = 1.
    pub fn phi(&self) -> &Symbol {
        &self.phi
    }

    /// Ψ(x) = x^{2M} Φ(x).
    pub fn psi(&self) -> &Symbol {
        &self.psi
    }

    /// η(x) = c_Ψ ∫_x^∞ y Ψ(y) e^{-y²} dy, η(0) = 1.
    pub fn eta(&self) -> &Symbol {
        &self.eta
    }

    pub fn c_psi(&self) -> f64 {
        self.c_psi
    }
}

/// η from its defining tail integral, cached on a 4096-point grid over
/// [0, 30] with monotone (Fritsch-Carlson) cubic interpolation; the
/// integrand is below 1e-300 past the cutoff.
pub fn make_eta(psi: &Symbol, c_psi: f64) -> Symbol {
    const CUTOFF: f64 = 30.0;
    const KNOTS: usize = 4096;
    let dx = CUTOFF / (KNOTS - 1) as f64;
    // per-interval Gauss panels, suffix-summed so eta(x_i) = ∫_{x_i}^{30}
    let mut vals = vec![0.0f64; KNOTS];
    let (gx, gw) = gauss_legendre(8, 0.0, 1.0);
    for i in (0..KNOTS - 1).rev() {
        let a = i as f64 * dx;
        let panel: f64 = gx
            .iter()
            .zip(&gw)
            .map(|(&q, &w)| {
                let y = a + q * dx;
                y * psi.eval(y) * (-y * y).exp() * w * dx
            })
            .sum();
        vals[i] = vals[i + 1] + panel;
    }
    // η' = −c_Ψ x Ψ(x) e^{-x²} is known exactly at the knots
    let slopes: Vec<f64> = (0..KNOTS)
        .map(|i| {
            let x = i as f64 * dx;
            -c_psi * x * psi.eval(x) * (-x * x).exp()
        })
        .collect();
    for v in &mut vals {
        *v *= c_psi;
    }
    let interp = Arc::new(Pchip::with_slopes(dx, vals, slopes));
    Symbol::new("eta", move |x| if x >= CUTOFF { 0.0 } else { interp.eval(x) })
}

/// Shape-limited cubic Hermite interpolation on a uniform grid
/// (Fritsch-Carlson limiting applied to the supplied slopes).
struct Pchip {
    dx: f64,
    vals: Vec<f64>,
    slopes: Vec<f64>,
}

impl Pchip {
    /// Exact slopes where available; each is clamped to three times the
    /// neighbouring secants so interpolation stays shape-preserving.
    fn with_slopes(dx: f64, vals: Vec<f64>, mut slopes: Vec<f64>) -> Self {
        let n = vals.len();
        for i in 0..n {
            let sec_l = if i > 0 { (vals[i] - vals[i - 1]) / dx } else { f64::NAN };
            let sec_r = if i + 1 < n { (vals[i + 1] - vals[i]) / dx } else { f64::NAN };
            let cap = 3.0
                * sec_l
                    .abs()
                    .max(sec_r.abs())
                    .max(0.0);
            let cap = if cap.is_nan() { slopes[i].abs() } else { cap };
            slopes[i] = slopes[i].clamp(-cap, cap);
        }
        Pchip { dx, vals, slopes }
    }

    fn eval(&self, x: f64) -> f64 {
        let t = x / self.dx;
        let last = self.vals.len() - 1;
        if t <= 0.0 {
            return self.vals[0];
        }
        if t >= last as f64 {
            return self.vals[last];
        }
        let j = t.floor() as usize;
        let u = t - j as f64;
        let (y0, y1) = (self.vals[j], self.vals[j + 1]);
        let (m0, m1) = (self.slopes[j] * self.dx, self.slopes[j + 1] * self.dx);
        let u2 = u * u;
        let u3 = u2 * u;
        y0 * (2.0 * u3 - 3.0 * u2 + 1.0)
            + m0 * (u3 - 2.0 * u2 + u)
            + y1 * (-2.0 * u3 + 3.0 * u2)
            + m1 * (u3 - u2)
    }
}

/// The Schwartz-class seminorm ∫ (1+|x|)^N Σ_{k≤N} |φ^{(k)}(x)|² dx used to
/// normalize dictionary members.
///
/// Derivatives are central differences with two-level Richardson
/// extrapolation; the per-order spacing balances truncation against f64
/// roundoff (a fixed spacing is pure noise beyond the third derivative).
pub fn dictionary_seminorm(phi: &Symbol, n_order: usize) -> Result<f64> {
    let tol = if n_order <= 3 { 1e-6 } else { 1e-3 };
    let coarse = seminorm_pass(phi, n_order, 1.0)?;
    let fine = seminorm_pass(phi, n_order, 0.5)?;
    if coarse == 0.0 && fine == 0.0 {
        return Ok(0.0);
    }
    let rel = (coarse - fine).abs() / fine.abs().max(f64::MIN_POSITIVE);
    if rel > tol {
        return Err(Error::SeminormUnstable);
    }
    Ok(fine)
}

fn seminorm_pass(phi: &Symbol, n_order: usize, delta_scale: f64) -> Result<f64> {
    // integrate outward in unit blocks until the tail stops contributing
    let (qx, qw) = gauss_legendre(32, 0.0, 1.0);
    let mut total = 0.0f64;
    let mut x0 = 0.0f64;
    loop {
        let mut block = 0.0f64;
        for (&q, &w) in qx.iter().zip(&qw) {
            let x = x0 + q;
            let mut s = 0.0;
            for k in 0..=n_order {
                let d = fd_derivative(phi, x, k, delta_scale)?;
                s += d * d;
            }
            block += (1.0 + x.abs()).powi(n_order as i32) * s * w;
        }
        total += block;
        x0 += 1.0;
        if (block <= 1e-14 * total.max(1e-300) && x0 > 4.0) || x0 > 800.0 {
            break;
        }
    }
    // even symbol: ∫_ℝ = 2 ∫_0^∞
    Ok(2.0 * total)
}

/// k-th derivative by the symmetric k-th difference with one Richardson step.
fn fd_derivative(phi: &Symbol, x: f64, k: usize, delta_scale: f64) -> Result<f64> {
    if k == 0 {
        return Ok(phi.eval(x));
    }
    let base = match k {
        1 | 2 => 1e-3,
        _ => f64::EPSILON.powf(1.0 / (k as f64 + 4.0)),
    } * delta_scale;
    let d1 = central_diff(phi, x, k, base);
    let d2 = central_diff(phi, x, k, base / 2.0);
    let r = (4.0 * d2 - d1) / 3.0;
    if !r.is_finite() {
        return Err(Error::SeminormUnstable);
    }
    Ok(r)
}

fn central_diff(phi: &Symbol, x: f64, k: usize, delta: f64) -> f64 {
    let mut acc = 0.0;
    let mut binom = 1.0f64;
    for j in 0..=k {
        let sign = if (k - j) % 2 == 0 { 1.0 } else { -1.0 };
        let off = j as f64 - k as f64 / 2.0;
        acc += sign * binom * phi.eval(x + off * delta);
        binom = binom * (k - j) as f64 / (j + 1) as f64;
    }
    acc / delta.powi(k as i32)
}
