//! Discrete self-adjoint operators with Gaussian heat-kernel behaviour:
//! construction (laplacian, Schrödinger, magnetic Schrödinger), the spectral
//! functional calculus F(t√L), kernel extraction, heat-kernel Gaussian-bound
//! fitting, the resolvent quadrature cross-check and the discrete Kato norm.
//!
//! The dense eigendecomposition is the single source of truth for F(t√L);
//! the independent fast-transform path in [`crate::oracle`] exists only to
//! cross-check it on periodic laplacians.

use crate::error::{Error, Result};
use crate::grid::{Boundary, Field, GridSpec};
use crate::symbols::Symbol;
use ndarray::{Array1, Array2, ArrayView1};
use ndarray_linalg::{Eigh, UPLO};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum OperatorKind {
    Laplacian,
    Schrodinger,
    MagneticSchrodinger,
}

/// A symmetric PSD matrix discretizing a second-order operator, with its
/// cached eigendecomposition. Magnetic operators are realified (real and
/// imaginary parts stacked), so their matrix dimension is twice the point
/// count; `components` records the factor.
pub struct SpectralOperator {
    grid: GridSpec,
    kind: OperatorKind,
    components: usize,
    matrix: Array2<f64>,
    eigenvalues: Array1<f64>,
    eigenvectors: Array2<f64>,
}

/// Second-difference stencil rows for the scalar laplacian.
fn scalar_laplacian_matrix(grid: &GridSpec) -> Array2<f64> {
    let m = grid.num_points();
    let n = grid.points_per_side() as i64;
    let inv_h2 = 1.0 / (grid.spacing() * grid.spacing());
    let mut a = Array2::zeros((m, m));
    for i in 0..m {
        let p = grid.point(i);
        a[[i, i]] = 2.0 * grid.dim() as f64 * inv_h2;
        for axis in 0..grid.dim() {
            for dir in [-1i64, 1] {
                let mut q = p;
                q[axis] += dir;
                match grid.boundary() {
                    Boundary::Periodic => {
                        q[axis] = q[axis].rem_euclid(n);
                        a[[i, grid.index(q)]] -= inv_h2;
                    }
                    Boundary::Dirichlet => {
                        if (0..n).contains(&q[axis]) {
                            a[[i, grid.index(q)]] -= inv_h2;
                        }
                    }
                }
            }
        }
    }
    a
}

/// Complex Hermitian magnetic hamiltonian (Peierls phases on hops), realified
/// to the symmetric form [[Re, -Im], [Im, Re]].
fn magnetic_matrix(grid: &GridSpec, a_axes: &[Field], v: Option<&Field>) -> Result<Array2<f64>> {
    let m = grid.num_points();
    let n = grid.points_per_side() as i64;
    let h = grid.spacing();
    let inv_h2 = 1.0 / (h * h);
    let mut re = Array2::<f64>::zeros((m, m));
    let mut im = Array2::<f64>::zeros((m, m));
    for i in 0..m {
        let p = grid.point(i);
        re[[i, i]] = 2.0 * grid.dim() as f64 * inv_h2;
        if let Some(pot) = v {
            re[[i, i]] += pot.values()[i];
        }
        for axis in 0..grid.dim() {
            // hop p -> p + e_axis carries the phase e^{-i A_axis(p) h}
            let mut q = p;
            q[axis] += 1;
            let inside = match grid.boundary() {
                Boundary::Periodic => {
                    q[axis] = q[axis].rem_euclid(n);
                    true
                }
                Boundary::Dirichlet => (0..n).contains(&q[axis]),
            };
            if !inside {
                continue;
            }
            let j = grid.index(q);
            let phase = -a_axes[axis].values()[i] * h;
            let (s, c) = phase.sin_cos();
            re[[i, j]] += -c * inv_h2;
            im[[i, j]] += -s * inv_h2;
            // Hermitian conjugate hop
            re[[j, i]] += -c * inv_h2;
            im[[j, i]] += s * inv_h2;
        }
    }
    let mut out = Array2::<f64>::zeros((2 * m, 2 * m));
    for i in 0..m {
        for j in 0..m {
            out[[i, j]] = re[[i, j]];
            out[[m + i, m + j]] = re[[i, j]];
            out[[i, m + j]] = -im[[i, j]];
            out[[m + i, j]] = im[[i, j]];
        }
    }
    Ok(out)
}

/// Build an operator of the requested kind and cache its eigendecomposition.
pub fn build_operator(
    kind: OperatorKind,
    grid: GridSpec,
    potential: Option<&Field>,
    vector_potential: Option<&[Field]>,
) -> Result<SpectralOperator> {
    if let Some(v) = potential {
        if *v.grid() != grid {
            return Err(Error::GridMismatch);
        }
    }
    let (matrix, components) = match kind {
        OperatorKind::Laplacian => (scalar_laplacian_matrix(&grid), 1),
        OperatorKind::Schrodinger => {
            let mut a = scalar_laplacian_matrix(&grid);
            if let Some(v) = potential {
                for (i, &vi) in v.values().iter().enumerate() {
                    a[[i, i]] += vi;
                }
            }
            (a, 1)
        }
        OperatorKind::MagneticSchrodinger => {
            let axes: Vec<Field> = match vector_potential {
                Some(fields) => {
                    if fields.len() != grid.dim() {
                        return Err(Error::Construction(format!(
                            "magnetic operator needs {} vector-potential components, got {}",
                            grid.dim(),
                            fields.len()
                        )));
                    }
                    for f in fields {
                        if *f.grid() != grid {
                            return Err(Error::GridMismatch);
                        }
                    }
                    fields.to_vec()
                }
                None => vec![Field::zeros(grid); grid.dim()],
            };
            (magnetic_matrix(&grid, &axes, potential)?, 2)
        }
    };
    SpectralOperator::from_matrix(grid, kind, components, matrix)
}

impl SpectralOperator {
    pub fn laplacian(grid: GridSpec) -> Result<Self> {
        build_operator(OperatorKind::Laplacian, grid, None, None)
    }

    pub fn schrodinger(grid: GridSpec, potential: &Field) -> Result<Self> {
        build_operator(OperatorKind::Schrodinger, grid, Some(potential), None)
    }

    pub fn magnetic(
        grid: GridSpec,
        vector_potential: &[Field],
        potential: Option<&Field>,
    ) -> Result<Self> {
        build_operator(OperatorKind::MagneticSchrodinger, grid, potential, Some(vector_potential))
    }

    fn from_matrix(
        grid: GridSpec,
        kind: OperatorKind,
        components: usize,
        matrix: Array2<f64>,
    ) -> Result<Self> {
        let scale = matrix.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let mut asym = 0.0f64;
        for i in 0..matrix.nrows() {
            for j in (i + 1)..matrix.ncols() {
                asym = asym.max((matrix[[i, j]] - matrix[[j, i]]).abs());
            }
        }
        if asym > 1e-12 * scale {
            return Err(Error::Construction(format!(
                "matrix asymmetry {asym:.3e} exceeds 1e-12·‖L‖"
            )));
        }
        let (mut eigenvalues, eigenvectors) = matrix
            .eigh(UPLO::Lower)
            .map_err(|e| Error::Construction(format!("eigendecomposition failed: {e}")))?;
        let lam_max = eigenvalues.iter().fold(0.0f64, |m, &v| m.max(v));
        let lam_min = eigenvalues.iter().fold(f64::INFINITY, |m, &v| m.min(v));
        if lam_min < -1e-10 * lam_max.max(1.0) {
            return Err(Error::Construction(format!(
                "negative eigenvalue {lam_min:.3e} signals an invalid discretization"
            )));
        }
        eigenvalues.mapv_inplace(|v| v.max(0.0));
        // orthonormality: ‖UᵀU − I‖_max
        let gram = eigenvectors.t().dot(&eigenvectors);
        let mut defect = 0.0f64;
        for i in 0..gram.nrows() {
            for j in 0..gram.ncols() {
                let want = if i == j { 1.0 } else { 0.0 };
                defect = defect.max((gram[[i, j]] - want).abs());
            }
        }
        if defect > 1e-10 {
            return Err(Error::Construction(format!(
                "eigenvector orthonormality defect {defect:.3e}"
            )));
        }
        Ok(SpectralOperator { grid, kind, components, matrix, eigenvalues, eigenvectors })
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn kind(&self) -> OperatorKind {
        self.kind
    }

    /// 1 for scalar operators, 2 for the realified magnetic form.
    pub fn components(&self) -> usize {
        self.components
    }

    /// Length of vectors the matrix acts on.
    pub fn op_dim(&self) -> usize {
        self.components * self.grid.num_points()
    }

    pub fn matrix(&self) -> &Array2<f64> {
        &self.matrix
    }

    pub fn eigenvalues(&self) -> &Array1<f64> {
        &self.eigenvalues
    }

    pub fn eigenvectors(&self) -> &Array2<f64> {
        &self.eigenvectors
    }

    pub fn max_eigenvalue(&self) -> f64 {
        self.eigenvalues.iter().fold(0.0f64, |m, &v| m.max(v))
    }

    /// Smallest eigenvalue above the zero-mode clamp threshold.
    pub fn min_positive_eigenvalue(&self) -> f64 {
        let floor = 1e-9 * self.max_eigenvalue().max(1.0);
        self.eigenvalues.iter().copied().filter(|&v| v > floor).fold(f64::INFINITY, f64::min)
    }

    /// U diag Uᵀ v.
    pub fn apply_eigen_diag(&self, diag: &Array1<f64>, v: ArrayView1<f64>) -> Array1<f64> {
        let coeffs = self.eigenvectors.t().dot(&v);
        self.eigenvectors.dot(&(coeffs * diag))
    }

    /// F(t√λ_k) over the spectrum, checked finite.
    pub fn symbol_diag(&self, sym: &Symbol, t: f64) -> Result<Array1<f64>> {
        let mut out = Array1::zeros(self.eigenvalues.len());
        for (o, &lam) in out.iter_mut().zip(self.eigenvalues.iter()) {
            let v = sym.eval(t * lam.sqrt());
            if !v.is_finite() {
                return Err(Error::Symbol(format!(
                    "{} is not finite at t√λ = {:.6e}",
                    sym.name(),
                    t * lam.sqrt()
                )));
            }
            *o = v;
        }
        Ok(out)
    }

    /// F(t√L) f through the cached eigendecomposition. On magnetic
    /// operators this applies to (f, 0) and returns the real component;
    /// use [`SpectralOperator::spectral_apply_pair`] for the full result.
    pub fn spectral_apply(&self, sym: &Symbol, t: f64, f: &Field) -> Result<Field> {
        if *f.grid() != self.grid {
            return Err(Error::GridMismatch);
        }
        let diag = self.symbol_diag(sym, t)?;
        if self.components == 1 {
            let out = self.apply_eigen_diag(&diag, f.values().view());
            Field::new(self.grid, out)
        } else {
            let m = self.grid.num_points();
            let mut v = Array1::zeros(2 * m);
            v.slice_mut(ndarray::s![..m]).assign(f.values());
            let out = self.apply_eigen_diag(&diag, v.view());
            Field::new(self.grid, out.slice(ndarray::s![..m]).to_owned())
        }
    }

    /// F(t√L)(re + i·im) on a magnetic operator, as a (re, im) pair.
    pub fn spectral_apply_pair(
        &self,
        sym: &Symbol,
        t: f64,
        re: &Field,
        im: &Field,
    ) -> Result<(Field, Field)> {
        if self.components != 2 {
            return Err(Error::Precondition(
                "spectral_apply_pair is for magnetic operators".into(),
            ));
        }
        if *re.grid() != self.grid || *im.grid() != self.grid {
            return Err(Error::GridMismatch);
        }
        let diag = self.symbol_diag(sym, t)?;
        let m = self.grid.num_points();
        let mut v = Array1::zeros(2 * m);
        v.slice_mut(ndarray::s![..m]).assign(re.values());
        v.slice_mut(ndarray::s![m..]).assign(im.values());
        let out = self.apply_eigen_diag(&diag, v.view());
        Ok((
            Field::new(self.grid, out.slice(ndarray::s![..m]).to_owned())?,
            Field::new(self.grid, out.slice(ndarray::s![m..]).to_owned())?,
        ))
    }

    /// The heat semigroup e^{-t²L} f.
    pub fn heat_apply(&self, t: f64, f: &Field) -> Result<Field> {
        if !(t > 0.0) {
            return Err(Error::Precondition(format!("heat_apply needs t > 0, got {t}")));
        }
        self.spectral_apply(&Symbol::gaussian(), t, f)
    }

    /// Direct matrix application L f (not through the spectrum).
    pub fn apply_matrix(&self, f: &Field) -> Result<Field> {
        if *f.grid() != self.grid || self.components != 1 {
            return Err(Error::GridMismatch);
        }
        Field::new(self.grid, self.matrix.dot(f.values()))
    }

    /// Kernel of F(t√L) under the convention (Ff)(x) = Σ_y K(x,y) f(y) h^n.
    pub fn kernel_matrix(&self, sym: &Symbol, t: f64) -> Result<KernelMatrix> {
        let diag = self.symbol_diag(sym, t)?;
        let hn = self.grid.cell_measure();
        let scaled = &self.eigenvectors * &diag; // U · diag (column scaling)
        let entries = scaled.dot(&self.eigenvectors.t()) / hn;
        Ok(KernelMatrix { grid: self.grid, components: self.components, entries })
    }

    /// Kernel of e^{-tL} (plain t, diffusion time).
    fn heat_kernel_plain(&self, t: f64) -> Array2<f64> {
        let diag = self.eigenvalues.mapv(|lam| (-t * lam).exp());
        let hn = self.grid.cell_measure();
        let scaled = &self.eigenvectors * &diag;
        scaled.dot(&self.eigenvectors.t()) / hn
    }

    /// Fit the Gaussian upper bound |p_t(x,y)| ≤ C t^{-n/2} e^{-|x-y|²/(ct)}
    /// over the given diffusion times. Per t the smallest admissible C is
    /// minimized over a log grid of c ∈ [1, 64]; the stability ratio
    /// (max_t C / min_t C) lands in `max_violation_ratio`.
    pub fn gaussian_bound_report(&self, t_values: &[f64]) -> Result<GaussianFitReport> {
        let h = self.grid.spacing();
        let n = self.grid.dim() as f64;
        let mesh_floor = 2.0 * h * h;
        if t_values.is_empty() {
            return Err(Error::Precondition("gaussian_bound_report needs t values".into()));
        }
        for &t in t_values {
            if t < mesh_floor {
                return Err(Error::Precondition(format!(
                    "diffusion time {t:.3e} is below the mesh scale 2h² = {mesh_floor:.3e}"
                )));
            }
        }
        let m = self.grid.num_points();
        let c_grid: Vec<f64> = (0..25).map(|j| 2f64.powf(j as f64 / 4.0)).collect();
        let mut rows = Vec::with_capacity(t_values.len());
        let mut min_entry = f64::INFINITY;
        for &t in t_values {
            let kernel = self.heat_kernel_plain(t);
            // per-pair |p| as a modulus on magnetic operators
            let abs_at = |x: usize, y: usize| -> f64 {
                if self.components == 1 {
                    kernel[[x, y]].abs()
                } else {
                    let re = kernel[[x, y]];
                    let im = kernel[[m + x, y]];
                    (re * re + im * im).sqrt()
                }
            };
            if self.components == 1 {
                min_entry = kernel.iter().fold(min_entry, |a, &v| a.min(v));
            }
            let mut best = (f64::INFINITY, c_grid[0]);
            for &c in &c_grid {
                // log-space: exp overflows directly at small t, c = 1
                let mut ln_c_needed = f64::NEG_INFINITY;
                for x in 0..m {
                    for y in 0..m {
                        let p = abs_at(x, y);
                        if p == 0.0 {
                            continue;
                        }
                        let d = self.grid.distance_idx(x, y);
                        let v = p.ln() + 0.5 * n * t.ln() + d * d / (c * t);
                        ln_c_needed = ln_c_needed.max(v);
                    }
                }
                let cval = ln_c_needed.exp();
                if cval < best.0 {
                    best = (cval, c);
                }
            }
            rows.push(GaussianFitRow { t, c_constant: best.0, c_rate: best.1 });
        }
        let c_max = rows.iter().map(|r| r.c_constant).fold(f64::NEG_INFINITY, f64::max);
        let c_min = rows.iter().map(|r| r.c_constant).fold(f64::INFINITY, f64::min);
        let worst = rows
            .iter()
            .max_by(|a, b| a.c_constant.total_cmp(&b.c_constant))
            .expect("nonempty rows");
        Ok(GaussianFitReport {
            t_range: (
                t_values.iter().copied().fold(f64::INFINITY, f64::min),
                t_values.iter().copied().fold(f64::NEG_INFINITY, f64::max),
            ),
            fitted_c_constant: worst.c_constant,
            fitted_c_rate: worst.c_rate,
            max_violation_ratio: c_max / c_min,
            min_kernel_entry: if min_entry.is_finite() { min_entry } else { 0.0 },
            rows,
        })
    }

    /// Relative operator-norm discrepancy between (I + t²L)^{-κ} computed
    /// spectrally and by the 64-point log-Gauss quadrature of its Laplace
    /// representation.
    pub fn resolvent_check(&self, t: f64, kappa: u32) -> Result<f64> {
        if !(1..=4).contains(&kappa) {
            return Err(Error::Precondition(format!("resolvent_check needs 1 ≤ κ ≤ 4, got {kappa}")));
        }
        let factorial: f64 = (1..kappa).map(|k| k as f64).product();
        let (us, ws) = crate::quad::gauss_legendre_log(64, 1e-12, 60.0);
        let mut worst = 0.0f64;
        let mut scale = 0.0f64;
        for &lam in self.eigenvalues.iter() {
            let exact = (1.0 + t * t * lam).powi(-(kappa as i32));
            let mut q = 0.0;
            for (&u, &w) in us.iter().zip(&ws) {
                q += (-u * t * t * lam).exp() * (-u).exp() * u.powi(kappa as i32 - 1) * w;
            }
            q /= factorial;
            worst = worst.max((q - exact).abs());
            scale = scale.max(exact.abs());
        }
        Ok(worst / scale.max(f64::MIN_POSITIVE))
    }
}

/// Kernel of a spectral multiplier under the h^n measure convention.
pub struct KernelMatrix {
    grid: GridSpec,
    components: usize,
    entries: Array2<f64>,
}

impl KernelMatrix {
    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn components(&self) -> usize {
        self.components
    }

    pub fn entries(&self) -> &Array2<f64> {
        &self.entries
    }

    /// (Ff)(x) = Σ_y K(x,y) f(y) h^n; reproduces `spectral_apply`.
    pub fn apply(&self, f: &Field) -> Result<Field> {
        if *f.grid() != self.grid || self.components != 1 {
            return Err(Error::GridMismatch);
        }
        let hn = self.grid.cell_measure();
        Field::new(self.grid, self.entries.dot(f.values()) * hn)
    }

    pub fn max_abs(&self) -> f64 {
        self.entries.iter().fold(0.0f64, |m, v| m.max(v.abs()))
    }

    pub fn symmetry_defect(&self) -> f64 {
        let mut d = 0.0f64;
        for i in 0..self.entries.nrows() {
            for j in (i + 1)..self.entries.ncols() {
                d = d.max((self.entries[[i, j]] - self.entries[[j, i]]).abs());
            }
        }
        d
    }
}

#[derive(Clone, Copy, Debug)]
pub struct GaussianFitRow {
    pub t: f64,
    /// smallest admissible C at this t (after minimizing over the rate c)
    pub c_constant: f64,
    /// the rate c that achieved it
    pub c_rate: f64,
}

#[derive(Clone, Debug)]
pub struct GaussianFitReport {
    pub t_range: (f64, f64),
    pub fitted_c_constant: f64,
    pub fitted_c_rate: f64,
    /// stability ratio max_t C(t) / min_t C(t)
    pub max_violation_ratio: f64,
    /// most negative kernel entry seen (scalar operators); reported, not fatal
    pub min_kernel_entry: f64,
    pub rows: Vec<GaussianFitRow>,
}

/// Discrete Kato norm on a 3-dimensional grid:
/// sup_x Σ_{y≠x} |V(y)| h³ / |x−y|, with the n = 3 smallness threshold
/// c₃ = π^{3/2}/Γ(1/2).
pub fn kato_norm(v: &Field) -> Result<KatoReport> {
    let grid = *v.grid();
    if grid.dim() != 3 {
        return Err(Error::UnsupportedDimension { dim: grid.dim(), what: "kato_norm" });
    }
    let m = grid.num_points();
    let h3 = grid.cell_measure();
    let mut sup = 0.0f64;
    for x in 0..m {
        let px = grid.point(x);
        let mut acc = 0.0;
        for y in 0..m {
            if y == x {
                continue;
            }
            let d = grid.distance(px, grid.point(y));
            acc += v.values()[y].abs() * h3 / d;
        }
        sup = sup.max(acc);
    }
    let pi = std::f64::consts::PI;
    let threshold = pi.powf(1.5) / pi.sqrt(); // Γ(1/2) = √π
    Ok(KatoReport { norm: sup, threshold, below_threshold: sup < threshold })
}

#[derive(Clone, Copy, Debug)]
pub struct KatoReport {
    pub norm: f64,
    /// c₃ = π^{3/2}/Γ(3/2−1)
    pub threshold: f64,
    pub below_threshold: bool,
}
