//! Maximal and square functions: the area function S_L, radial and
//! non-tangential heat maximal functions, the aperture-α variant, the
//! Peetre-type weighted maximal function, the finite-dictionary grand
//! maximal function, and the composite 𝓜_L that drives the atomic
//! decomposition.
//!
//! Every sup over continuous scale is a max over one shared [`ScaleGrid`],
//! so the different maximal functions are comparable without quadrature
//! bias. All operations are pure in (operator, field) and bitwise
//! deterministic: maxima are order-independent and sums accumulate in fixed
//! offset order.

use crate::error::{Error, Result};
use crate::grid::{Field, GridSpec};
use crate::operator::SpectralOperator;
use crate::symbols::{dictionary_seminorm, CalderonBundle, Symbol};
use ndarray::Array1;

/// Geometric grid of scales t_k = t_min ρ^k discretizing dt/t.
#[derive(Clone, Debug)]
pub struct ScaleGrid {
    values: Vec<f64>,
    dlog: f64,
}

impl ScaleGrid {
    pub fn geometric(t_min: f64, t_max: f64, count: usize) -> Result<Self> {
        if !(t_min > 0.0 && t_max > t_min) {
            return Err(Error::Precondition(format!(
                "scale grid needs 0 < t_min < t_max, got [{t_min}, {t_max}]"
            )));
        }
        if count < 2 {
            return Err(Error::Precondition("scale grid needs at least 2 points".into()));
        }
        let dlog = (t_max / t_min).ln() / (count - 1) as f64;
        if dlog > 0.25 {
            return Err(Error::Precondition(format!(
                "scale grid too coarse: dlog = {dlog:.3} exceeds 0.25"
            )));
        }
        let values = (0..count).map(|k| t_min * (dlog * k as f64).exp()).collect();
        Ok(ScaleGrid { values, dlog })
    }

    /// Grid with a fixed number of points per factor e.
    pub fn with_density(t_min: f64, t_max: f64, per_efold: f64) -> Result<Self> {
        let count = ((t_max / t_min).ln() * per_efold).ceil() as usize + 1;
        Self::geometric(t_min, t_max, count.max(2))
    }

    /// Default band [h, side/2] for maximal functions, 64 points per e-fold.
    pub fn for_maximal(grid: &GridSpec) -> Self {
        Self::with_density(grid.spacing(), grid.side_length() / 2.0, 64.0)
            .expect("h < side/2 on any valid grid")
    }

    /// Band covering the operator's spectrum for Calderón reconstruction:
    /// t_min = 0.1/√λ_max and t_max = max(side, 3.5/√λ₊_min).
    pub fn for_reconstruction(op: &SpectralOperator) -> Self {
        let t_min = 0.1 / op.max_eigenvalue().sqrt();
        let t_max = op.grid().side_length().max(3.5 / op.min_positive_eigenvalue().sqrt());
        Self::with_density(t_min, t_max, 64.0).expect("spectral band is nonempty")
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn dlog(&self) -> f64 {
        self.dlog
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn t_min(&self) -> f64 {
        self.values[0]
    }

    pub fn t_max(&self) -> f64 {
        *self.values.last().expect("nonempty")
    }
}

/// Cone and weight parameters for the maximal operators.
#[derive(Clone, Copy, Debug)]
pub struct ConeParams {
    pub aperture: f64,
    pub peetre_lambda: f64,
    pub grand_n: usize,
}

impl ConeParams {
    /// Defaults: α = 1, λ = n/p + 1, N = ⌈2(n/p + n + 1)⌉.
    pub fn defaults(dim: usize, p: f64) -> Self {
        let n = dim as f64;
        ConeParams {
            aperture: 1.0,
            peetre_lambda: n / p + 1.0,
            grand_n: (2.0 * (n / p + n + 1.0)).ceil() as usize,
        }
    }
}

/// Pointwise max of |g| over the open ball of the given radius around each
/// point (the ball always contains its center; dirichlet cones are clipped
/// at the boundary).
fn cone_max(grid: &GridSpec, g: &Array1<f64>, radius: f64) -> Array1<f64> {
    let offsets = grid.ball_offsets(radius);
    let mut out = Array1::zeros(g.len());
    for (i, o) in out.iter_mut().enumerate() {
        let p = grid.point(i);
        let mut best = g[i].abs();
        for off in &offsets {
            let q = grid.translate(p, *off);
            if !grid.contains(q) {
                continue;
            }
            best = best.max(g[grid.index(q)].abs());
        }
        *o = best;
    }
    out
}

/// The area function S_L f from the cone integral of |t²L e^{-t²L} f|².
/// Scales below the mesh spacing contribute nothing (the discrete cone
/// average is ill-normalized there).
pub fn area_function(op: &SpectralOperator, f: &Field, scales: &ScaleGrid) -> Result<Field> {
    let grid = *op.grid();
    let n = grid.dim() as i32;
    let hn = grid.cell_measure();
    let sym = Symbol::heat_weight();
    let mut acc = Array1::<f64>::zeros(grid.num_points());
    for &t in scales.values() {
        if t < grid.spacing() {
            continue;
        }
        let u = op.spectral_apply(&sym, t, f)?;
        let sq = u.values().mapv(|v| v * v);
        let offsets = grid.ball_offsets(t);
        let w = scales.dlog() * hn / t.powi(n);
        for i in 0..acc.len() {
            let p = grid.point(i);
            let mut s = 0.0;
            for off in &offsets {
                let q = grid.translate(p, *off);
                if !grid.contains(q) {
                    continue;
                }
                s += sq[grid.index(q)];
            }
            acc[i] += s * w;
        }
    }
    Field::new(grid, acc.mapv(f64::sqrt))
}

/// Non-tangential maximal function sup_{t, |y−x| < αt} |F(t√L) f(y)|.
///
/// For Hardy-norm use F should satisfy F(0) = 1 (the heat symbol gives
/// f*_L); callers picking other symbols get the same cone construction.
pub fn nt_maximal(
    op: &SpectralOperator,
    sym: &Symbol,
    f: &Field,
    scales: &ScaleGrid,
    alpha: f64,
) -> Result<Field> {
    if !(alpha > 0.0) {
        return Err(Error::Precondition(format!("aperture must be positive, got {alpha}")));
    }
    let grid = *op.grid();
    let mut out = Array1::<f64>::zeros(grid.num_points());
    for &t in scales.values() {
        let g = op.spectral_apply(sym, t, f)?;
        let m = cone_max(&grid, g.values(), alpha * t);
        out.zip_mut_with(&m, |a, &b| *a = a.max(b));
    }
    Field::new(grid, out)
}

/// Radial maximal function f⁺_L = sup_t |e^{-t²L} f(x)|.
pub fn radial_maximal(op: &SpectralOperator, f: &Field, scales: &ScaleGrid) -> Result<Field> {
    let grid = *op.grid();
    let sym = Symbol::gaussian();
    let mut out = Array1::<f64>::zeros(grid.num_points());
    for &t in scales.values() {
        let g = op.spectral_apply(&sym, t, f)?;
        out.zip_mut_with(g.values(), |a, &b| *a = a.max(b.abs()));
    }
    Field::new(grid, out)
}

/// Peetre-type maximal function
/// sup_{z, s} |F(s√L) f(z)| (1 + |x−z|/s)^{-λ}.
pub fn peetre_maximal(
    op: &SpectralOperator,
    sym: &Symbol,
    f: &Field,
    scales: &ScaleGrid,
    lambda: f64,
) -> Result<Field> {
    if !(lambda > 0.0) {
        return Err(Error::Precondition(format!("peetre λ must be positive, got {lambda}")));
    }
    let grid = *op.grid();
    let m = grid.num_points();
    let mut out = Array1::<f64>::zeros(m);
    for &s in scales.values() {
        let g = op.spectral_apply(sym, s, f)?;
        for x in 0..m {
            let px = grid.point(x);
            let mut best = out[x];
            for z in 0..m {
                let w = (1.0 + grid.distance(px, grid.point(z)) / s).powf(-lambda);
                best = best.max(g.values()[z].abs() * w);
            }
            out[x] = best;
        }
    }
    Field::new(grid, out)
}

/// A finite stand-in for the dilation-invariant symbol class 𝒜: members
/// rescaled so the order-N dictionary seminorm is at most one.
#[derive(Clone, Debug)]
pub struct Dictionary {
    members: Vec<Symbol>,
    n_order: usize,
}

impl Dictionary {
    /// Rescale each member to seminorm 0.99 (the margin keeps re-measured
    /// seminorms below 1 despite derivative-estimation noise).
    pub fn normalized(members: Vec<Symbol>, n_order: usize) -> Result<Self> {
        let mut out = Vec::with_capacity(members.len());
        for sym in members {
            let s = dictionary_seminorm(&sym, n_order)?;
            if !(s > 0.0) {
                return Err(Error::Precondition(format!(
                    "dictionary member {} has vanishing seminorm",
                    sym.name()
                )));
            }
            let c = (0.99 / s).sqrt();
            let name = format!("{}·{:.3e}", sym.name(), c);
            let inner = sym.clone();
            out.push(Symbol::new(name, move |x| c * inner.eval(x)));
        }
        Ok(Dictionary { members: out, n_order })
    }

    /// Wrap members that are already normalized; errors if any seminorm
    /// exceeds one beyond tolerance.
    pub fn checked(members: Vec<Symbol>, n_order: usize) -> Result<Self> {
        for sym in &members {
            let s = dictionary_seminorm(sym, n_order)?;
            if s > 1.0 + 1e-6 {
                return Err(Error::Precondition(format!(
                    "dictionary member {} has seminorm {s:.3} > 1",
                    sym.name()
                )));
            }
        }
        Ok(Dictionary { members, n_order })
    }

    pub fn members(&self) -> &[Symbol] {
        &self.members
    }

    pub fn n_order(&self) -> usize {
        self.n_order
    }
}

/// Finite-dictionary grand maximal function: pointwise max of the α = 1
/// non-tangential maximal functions over the dictionary. Lower-bounds the
/// true sup over the infinite class.
pub fn grand_maximal(
    op: &SpectralOperator,
    dict: &Dictionary,
    f: &Field,
    scales: &ScaleGrid,
) -> Result<Field> {
    if dict.members().is_empty() {
        return Err(Error::Precondition("grand_maximal needs a nonempty dictionary".into()));
    }
    let grid = *op.grid();
    let mut out = Array1::<f64>::zeros(grid.num_points());
    for sym in dict.members() {
        let m = nt_maximal(op, sym, f, scales, 1.0)?;
        out.zip_mut_with(m.values(), |a, &b| *a = a.max(b));
    }
    Field::new(grid, out)
}

/// The composite maximal function
/// 𝓜_L f(x) = sup_{t, |x−y| < 5√n t} (|t²L e^{-t²L} f(y)| + |η(t√L) f(y)|)
/// driving the level sets of the atomic decomposition.
pub fn script_m(
    op: &SpectralOperator,
    bundle: &CalderonBundle,
    f: &Field,
    scales: &ScaleGrid,
) -> Result<Field> {
    let grid = *op.grid();
    let sqn = (grid.dim() as f64).sqrt();
    let gsym = Symbol::heat_weight();
    let mut out = Array1::<f64>::zeros(grid.num_points());
    for &t in scales.values() {
        let a = op.spectral_apply(&gsym, t, f)?;
        let b = op.spectral_apply(bundle.eta(), t, f)?;
        let sum = Array1::from_shape_fn(a.len(), |i| {
            a.values()[i].abs() + b.values()[i].abs()
        });
        let m = cone_max(&grid, &sum, 5.0 * sqn * t);
        out.zip_mut_with(&m, |x, &y| *x = x.max(y));
    }
    Field::new(grid, out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{lp_quasinorm, Boundary, GridSpec};
    use crate::oracle::periodic_laplacian_eigenvalue_1d;

    fn setup(n: usize) -> (GridSpec, SpectralOperator) {
        let g = GridSpec::new(1, n, 1.0 / n as f64, Boundary::Periodic).unwrap();
        let op = SpectralOperator::laplacian(g).unwrap();
        (g, op)
    }

    fn rough_field(g: GridSpec) -> Field {
        Field::from_fn(g, |p| ((p[0] * 29 + 7) % 13) as f64 / 6.0 - 1.0)
            .unwrap()
            .mean_zero()
    }

    #[test]
    fn scale_grid_invariants() {
        let s = ScaleGrid::geometric(0.01, 1.0, 65).unwrap();
        assert_eq!(s.len(), 65);
        assert!(s.values().windows(2).all(|w| w[1] > w[0]));
        assert!((s.t_max() - 1.0).abs() < 1e-12);
        assert!(ScaleGrid::geometric(0.01, 1.0, 5).is_err()); // dlog too big
        assert!(ScaleGrid::geometric(0.0, 1.0, 65).is_err());
    }

    #[test]
    fn area_function_kills_constants_and_is_homogeneous() {
        let (g, op) = setup(32);
        let scales = ScaleGrid::for_maximal(&g);
        let one = Field::constant(g, 1.0).unwrap();
        let s = area_function(&op, &one, &scales).unwrap();
        assert!(s.linf_norm() <= 1e-10);

        let f = rough_field(g);
        let a = area_function(&op, &f.scale(-2.5), &scales).unwrap();
        let b = area_function(&op, &f, &scales).unwrap().scale(2.5);
        assert!(a.sub(&b).unwrap().linf_norm() <= 1e-12 * b.linf_norm().max(1.0));
    }

    #[test]
    fn area_function_stable_under_scale_refinement() {
        let (g, op) = setup(64);
        let f = Field::from_fn(g, |p| {
            let x = p[0] as f64 / 64.0;
            (2.0 * std::f64::consts::PI * 2.0 * x).cos()
                + 0.5 * (2.0 * std::f64::consts::PI * 5.0 * x).sin()
        })
        .unwrap();
        let coarse = ScaleGrid::with_density(g.spacing(), 0.5, 64.0).unwrap();
        let fine = ScaleGrid::with_density(g.spacing(), 0.5, 128.0).unwrap();
        let a = lp_quasinorm(&area_function(&op, &f, &coarse).unwrap(), 2.0).unwrap();
        let b = lp_quasinorm(&area_function(&op, &f, &fine).unwrap(), 2.0).unwrap();
        assert!((a - b).abs() / a <= 0.01, "refinement moved ‖S_L f‖₂ by {}", (a - b).abs() / a);
    }

    #[test]
    fn radial_equals_brute_force_table_and_bounds_nt() {
        let (g, op) = setup(32);
        let scales = ScaleGrid::for_maximal(&g);
        let f = rough_field(g);
        let rad = radial_maximal(&op, &f, &scales).unwrap();
        // brute-force (x, t) table
        let sym = Symbol::gaussian();
        let mut want = Array1::<f64>::zeros(32);
        for &t in scales.values() {
            let gft = op.spectral_apply(&sym, t, &f).unwrap();
            for i in 0..32 {
                want[i] = want[i].max(gft.values()[i].abs());
            }
        }
        for i in 0..32 {
            assert_eq!(rad.values()[i], want[i]);
        }
        let nt = nt_maximal(&op, &sym, &f, &scales, 1.0).unwrap();
        for i in 0..32 {
            assert!(rad.values()[i] <= nt.values()[i] + 1e-15);
        }
        // constants: f ≡ 1 → f⁺ ≡ 1
        let one = Field::constant(g, 1.0).unwrap();
        let r1 = radial_maximal(&op, &one, &scales).unwrap();
        assert!((r1.linf_norm() - 1.0).abs() <= 1e-10);
        assert!(r1.values().iter().all(|&v| (v - 1.0).abs() <= 1e-10));
    }

    #[test]
    fn aperture_monotone() {
        let (g, op) = setup(32);
        let scales = ScaleGrid::for_maximal(&g);
        let f = rough_field(g);
        let sym = Symbol::gaussian();
        let m1 = nt_maximal(&op, &sym, &f, &scales, 1.0).unwrap();
        let m2 = nt_maximal(&op, &sym, &f, &scales, 2.0).unwrap();
        for i in 0..32 {
            assert!(m1.values()[i] <= m2.values()[i] + 1e-15);
        }
    }

    #[test]
    fn nt_of_eigenvector_matches_enumeration() {
        let (g, op) = setup(64);
        let k = 3usize;
        let f = Field::from_fn(g, |p| {
            (2.0 * std::f64::consts::PI * k as f64 * p[0] as f64 / 64.0).cos()
        })
        .unwrap();
        let scales = ScaleGrid::for_maximal(&g);
        let sym = Symbol::gaussian();
        let mu = periodic_laplacian_eigenvalue_1d(64, g.spacing(), k);
        // |F(t√L) f| = |F(t√μ)| |f|: enumerate the (t, cone) table directly
        let alpha = 1.0;
        let got = nt_maximal(&op, &sym, &f, &scales, alpha).unwrap();
        let mut want = Array1::<f64>::zeros(64);
        for &t in scales.values() {
            let factor = sym.eval(t * mu.sqrt()).abs();
            let offsets = g.ball_offsets(alpha * t);
            for i in 0..64 {
                let p = g.point(i);
                let mut best = factor * f.values()[i].abs();
                for off in &offsets {
                    let q = g.translate(p, *off);
                    best = best.max(factor * f.values()[g.index(q)].abs());
                }
                want[i] = want[i].max(best);
            }
        }
        for i in 0..64 {
            assert!((got.values()[i] - want[i]).abs() <= 1e-12 * want[i].max(1e-300));
        }
    }

    #[test]
    fn semigroup_limit_from_below_for_nonnegative_f() {
        let (g, op) = setup(64);
        let f = Field::from_fn(g, |p| {
            let u = (p[0] as f64 / 64.0 - 0.5) / 0.2;
            0.1 + if u.abs() < 1.0 { (-1.0 / (1.0 - u * u)).exp() } else { 0.0 }
        })
        .unwrap();
        let scales = ScaleGrid::for_maximal(&g);
        let fstar = nt_maximal(&op, &Symbol::gaussian(), &f, &scales, 1.0).unwrap();
        for i in 0..64 {
            assert!(fstar.values()[i] >= 0.95 * f.values()[i]);
        }
    }

    #[test]
    fn peetre_bounds_and_large_lambda_limit() {
        let (g, op) = setup(32);
        let scales = ScaleGrid::for_maximal(&g);
        let f = rough_field(g);
        let sym = Symbol::gaussian();
        let lam = 2.0;
        let pe = peetre_maximal(&op, &sym, &f, &scales, lam).unwrap();
        let nt = nt_maximal(&op, &sym, &f, &scales, 1.0).unwrap();
        // cone points have |x−z|/s < 1 so the weight is ≥ 2^{-λ}
        let bound = 2.0f64.powf(-lam);
        for i in 0..32 {
            assert!(pe.values()[i] >= nt.values()[i] * bound - 1e-14);
        }
        // monotone decreasing in λ
        let pe2 = peetre_maximal(&op, &sym, &f, &scales, 4.0).unwrap();
        for i in 0..32 {
            assert!(pe2.values()[i] <= pe.values()[i] + 1e-14);
        }
        // λ → ∞ tends to the radial maximal function
        let pe_big = peetre_maximal(&op, &sym, &f, &scales, 64.0).unwrap();
        let rad = radial_maximal(&op, &f, &scales).unwrap();
        for i in 0..32 {
            let rel = (pe_big.values()[i] - rad.values()[i]).abs() / rad.values()[i].max(1e-300);
            assert!(rel <= 0.05, "λ = 64 is {rel} away from radial at {i}");
        }
    }

    #[test]
    fn grand_maximal_singleton_and_monotone_in_members() {
        let (g, op) = setup(32);
        let scales = ScaleGrid::for_maximal(&g);
        let f = rough_field(g);
        let d1 = Dictionary::normalized(vec![Symbol::gaussian()], 4).unwrap();
        let gm1 = grand_maximal(&op, &d1, &f, &scales).unwrap();
        let c = {
            // the singleton grand maximal equals the scaled nt maximal
            let s = dictionary_seminorm(&Symbol::gaussian(), 4).unwrap();
            (0.99f64 / s).sqrt()
        };
        let nt = nt_maximal(&op, &Symbol::gaussian(), &f, &scales, 1.0).unwrap().scale(c);
        assert!(gm1.sub(&nt).unwrap().linf_norm() <= 1e-12 * nt.linf_norm());

        let d2 = Dictionary::normalized(
            vec![Symbol::gaussian(), Symbol::rational_decay()],
            4,
        )
        .unwrap();
        let gm2 = grand_maximal(&op, &d2, &f, &scales).unwrap();
        for i in 0..32 {
            assert!(gm2.values()[i] >= gm1.values()[i] - 1e-15);
        }
    }

    #[test]
    fn script_m_constant_and_scaling() {
        let (g, op) = setup(32);
        let scales = ScaleGrid::for_maximal(&g);
        let bundle = CalderonBundle::new(1, 80.0).unwrap();
        let one = Field::constant(g, 1.0).unwrap();
        let m = script_m(&op, &bundle, &one, &scales).unwrap();
        // first term vanishes on constants, η(0) = 1
        for &v in m.values() {
            assert!((v - 1.0).abs() <= 1e-9, "𝓜_L 1 = {v}");
        }
        let f = rough_field(g);
        let a = script_m(&op, &bundle, &f.scale(-3.0), &scales).unwrap();
        let b = script_m(&op, &bundle, &f, &scales).unwrap().scale(3.0);
        assert!(a.sub(&b).unwrap().linf_norm() <= 1e-12 * b.linf_norm());
        // 𝓜_L f dominates |η(t√L)f(x)| at every scale
        let t = scales.values()[scales.len() / 2];
        let etaf = op.spectral_apply(bundle.eta(), t, &f).unwrap();
        for i in 0..32 {
            assert!(b.values()[i] / 3.0 >= etaf.values()[i].abs() - 1e-12);
        }
    }

    #[test]
    fn sublinearity_of_maximal_ops() {
        let (g, op) = setup(32);
        let scales = ScaleGrid::for_maximal(&g);
        let f = rough_field(g);
        let gf = Field::from_fn(g, |p| ((p[0] * 11 + 3) % 9) as f64 / 4.0 - 1.0).unwrap();
        let sym = Symbol::gaussian();
        let sum = f.add(&gf).unwrap();
        let lhs = nt_maximal(&op, &sym, &sum, &scales, 1.0).unwrap();
        let rhs = nt_maximal(&op, &sym, &f, &scales, 1.0)
            .unwrap()
            .add(&nt_maximal(&op, &sym, &gf, &scales, 1.0).unwrap())
            .unwrap();
        for i in 0..32 {
            assert!(lhs.values()[i] <= rhs.values()[i] + 1e-12);
        }
    }

    #[test]
    fn cone_respects_dirichlet_clipping() {
        let g = GridSpec::new(1, 16, 1.0, Boundary::Dirichlet).unwrap();
        let mut v = Array1::zeros(16);
        v[15] = 10.0;
        let f = Array1::from(v.to_vec());
        let m = cone_max(&g, &f, 3.5);
        // point 0 is more than 3.5 away from the spike and there is no wrap
        assert_eq!(m[0], 0.0);
        assert_eq!(m[13], 10.0);
    }

    #[test]
    fn cone_params_defaults() {
        let c = ConeParams::defaults(1, 0.8);
        assert!(c.peetre_lambda > 1.0 / 0.8);
        assert_eq!(c.grand_n, 7);
        assert_eq!(ConeParams::defaults(1, 1.0).grand_n, 6);
    }
}
