//! The atomic-decomposition engine: dyadic level sets of 𝓜_L f, Whitney
//! cubes, tents over open sets, the tilted-cube partition of the discrete
//! upper half-space, Calderón reconstruction, the atom terms λ_ij a_ij with
//! a_ij = L^M b_ij, the (p, q, M)-atom validator, and the interior kernel
//! bound audit.

use crate::error::{Error, Result};
use crate::grid::{Boundary, Cube, DilatedCube, Field, GridSpec};
use crate::maximal::{script_m, ScaleGrid};
use crate::operator::SpectralOperator;
use crate::symbols::{CalderonBundle, Symbol};
use ndarray::{Array1, Array2, Axis};

/// Dyadic level sets O_i = {𝓜_L f > 2^i}, nested downward in i.
#[derive(Clone, Debug)]
pub struct LevelSetFamily {
    i_min: i32,
    i_max: i32,
    masks: Vec<Vec<bool>>,
    /// per-point top level: largest i with x ∈ O_i (i_min − 1 when none)
    point_level: Vec<i32>,
}

impl LevelSetFamily {
    pub fn i_min(&self) -> i32 {
        self.i_min
    }

    pub fn i_max(&self) -> i32 {
        self.i_max
    }

    pub fn levels(&self) -> impl Iterator<Item = i32> {
        self.i_min..=self.i_max
    }

    pub fn mask(&self, i: i32) -> &[bool] {
        &self.masks[(i - self.i_min) as usize]
    }

    pub fn point_level(&self, idx: usize) -> i32 {
        self.point_level[idx]
    }
}

/// Threshold the maximal function at powers of two. i_min is chosen so
/// O_{i_min} is the whole grid (up to points where mf vanishes exactly);
/// O_{i_max} is already empty by choice of i_max.
pub fn level_sets(mf: &Field) -> Result<LevelSetFamily> {
    if mf.values().iter().any(|&v| v < 0.0) {
        return Err(Error::Precondition("level_sets needs a nonnegative field".into()));
    }
    let max = mf.values().iter().fold(0.0f64, |m, &v| m.max(v));
    if max <= 0.0 {
        return Err(Error::SpectrallyTrivial);
    }
    let min_pos = mf.values().iter().copied().filter(|&v| v > 0.0).fold(f64::INFINITY, f64::min);
    let i_min = min_pos.log2().floor() as i32 - 1;
    let i_max = max.log2().ceil() as i32;
    let masks: Vec<Vec<bool>> = (i_min..=i_max)
        .map(|i| {
            let thr = (i as f64).exp2();
            mf.values().iter().map(|&v| v > thr).collect()
        })
        .collect();
    let point_level: Vec<i32> = mf
        .values()
        .iter()
        .map(|&v| {
            if v <= 0.0 {
                i_min - 1
            } else {
                // largest i with 2^i < v
                ((v.log2().ceil() as i32) - 1).clamp(i_min, i_max)
            }
        })
        .collect();
    Ok(LevelSetFamily { i_min, i_max, masks, point_level })
}

/// A Whitney cube with its distance to the complement (grid metric;
/// infinity for the degenerate whole-domain cube when O is the full grid).
#[derive(Clone, Debug)]
pub struct WhitneyCube {
    pub cube: Cube,
    pub dist_to_complement: f64,
}

/// Whitney decomposition of the open set given by `mask`: recursive
/// (quasi-)dyadic subdivision of the domain cube, accepting a cube when it
/// lies in O and its lattice distance to O^c is at least its side length;
/// single-cell cubes inside O are always accepted so the tiling is exact.
pub fn whitney(mask: &[bool], grid: &GridSpec) -> Vec<WhitneyCube> {
    let m = grid.num_points();
    assert_eq!(mask.len(), m, "mask length must match the grid");
    if !mask.iter().any(|&b| b) {
        return Vec::new();
    }
    if mask.iter().all(|&b| b) {
        return vec![WhitneyCube { cube: Cube::root(grid), dist_to_complement: f64::INFINITY }];
    }
    // exact distance-to-complement per point
    let complement: Vec<usize> = (0..m).filter(|&i| !mask[i]).collect();
    let mut point_dist = vec![f64::INFINITY; m];
    for i in 0..m {
        if !mask[i] {
            point_dist[i] = 0.0;
            continue;
        }
        let p = grid.point(i);
        for &c in &complement {
            let d = grid.distance(p, grid.point(c));
            if d < point_dist[i] {
                point_dist[i] = d;
            }
        }
    }
    // recursion on boxes, splitting the longest axis; acceptance is only
    // tested on perfect cubes, so the leaf tiling is a cube tiling even
    // when the side is not a power of two
    #[derive(Clone, Copy)]
    struct LatticeBox {
        corner: [i64; 3],
        sizes: [usize; 3],
    }
    let dims = grid.dim();
    let mut out = Vec::new();
    let root = LatticeBox {
        corner: [0, 0, 0],
        sizes: {
            let mut s = [1usize; 3];
            for a in s.iter_mut().take(dims) {
                *a = grid.points_per_side();
            }
            s
        },
    };
    let box_points = |b: &LatticeBox| -> Vec<usize> {
        let mut pts = Vec::with_capacity(b.sizes[0] * b.sizes[1] * b.sizes[2]);
        for o0 in 0..b.sizes[0] as i64 {
            for o1 in 0..b.sizes[1] as i64 {
                for o2 in 0..b.sizes[2] as i64 {
                    let p = [b.corner[0] + o0, b.corner[1] + o1, b.corner[2] + o2];
                    pts.push(grid.index(p));
                }
            }
        }
        pts
    };
    let mut stack = vec![root];
    while let Some(b) = stack.pop() {
        let pts = box_points(&b);
        let inside = pts.iter().all(|&i| mask[i]);
        let is_cube = b.sizes[..dims].iter().all(|&s| s == b.sizes[0]);
        if inside && is_cube {
            let side = b.sizes[0];
            let dist = pts.iter().map(|&i| point_dist[i]).fold(f64::INFINITY, f64::min);
            let ell = side as f64 * grid.spacing();
            if dist >= ell || side == 1 {
                out.push(WhitneyCube {
                    cube: Cube::new(grid, b.corner, side),
                    dist_to_complement: dist,
                });
                continue;
            }
        }
        if !inside && !pts.iter().any(|&i| mask[i]) {
            continue; // nothing of O in here
        }
        if b.sizes[..dims].iter().all(|&s| s == 1) {
            continue; // single cell not accepted above means it is outside O
        }
        // split the longest axis (lowest index on ties)
        let axis = (0..dims).max_by_key(|&a| (b.sizes[a], std::cmp::Reverse(a))).expect("dims ≥ 1");
        let s = b.sizes[axis];
        let s1 = s.div_ceil(2);
        let mut left = b;
        left.sizes[axis] = s1;
        let mut right = b;
        right.corner[axis] += s1 as i64;
        right.sizes[axis] = s - s1;
        stack.push(left);
        stack.push(right);
    }
    // deterministic order: by level-size then corner
    out.sort_by_key(|w| {
        let c = w.cube.corner();
        (std::cmp::Reverse(w.cube.side_cells()), c[0], c[1], c[2])
    });
    out
}

/// One tent cell T_ij: the (point, scale) pairs owned by Whitney cube j of
/// level i.
#[derive(Clone, Debug)]
pub struct TentCell {
    pub level: i32,
    pub cube_index: usize,
    /// (scale index, point index) pairs
    pub pairs: Vec<(usize, usize)>,
}

#[derive(Clone, Debug, Default)]
pub struct CoverageStats {
    pub total_pairs: usize,
    pub assigned_pairs: usize,
    pub residual_pairs: usize,
    /// accepted non-root cubes whose 5Q dilate misses the complement
    pub exit_violations: usize,
}

#[derive(Clone, Debug)]
pub struct CellPartition {
    pub cells: Vec<TentCell>,
    pub residual_pairs: Vec<(usize, usize)>,
    pub coverage: CoverageStats,
}

/// Assign every (y, t_k) pair of the discrete upper half-space to its tent
/// cell: the level is the largest i with B(y, 4√n t_k) ⊆ O_i, the cube is
/// the one containing the tilted point ỹ = y + 3t_k ē (rounded to the
/// lattice, falling back to y's own cube when rounding exits O_i), and the
/// scale cutoff t ≤ 3ℓ(Q) is enforced exactly — pairs failing any step go
/// to the residual.
pub fn build_cells(
    levels: &LevelSetFamily,
    cubes: &[Vec<WhitneyCube>],
    scales: &ScaleGrid,
    grid: &GridSpec,
) -> Result<CellPartition> {
    let m = grid.num_points();
    let sqn = (grid.dim() as f64).sqrt();
    let n_levels = (levels.i_max() - levels.i_min() + 1) as usize;
    assert_eq!(cubes.len(), n_levels, "one cube list per level");

    // point -> cube index per level
    let mut cube_of: Vec<Vec<usize>> = vec![vec![usize::MAX; m]; n_levels];
    for (li, level_cubes) in cubes.iter().enumerate() {
        for (j, w) in level_cubes.iter().enumerate() {
            for p in w.cube.points(grid) {
                let idx = grid.index(p);
                if cube_of[li][idx] != usize::MAX {
                    return Err(Error::Invariant(format!(
                        "point {idx} covered by two Whitney cubes at level {}",
                        levels.i_min() + li as i32
                    )));
                }
                cube_of[li][idx] = j;
            }
        }
    }

    let mut cell_map: std::collections::BTreeMap<(i32, usize), Vec<(usize, usize)>> =
        std::collections::BTreeMap::new();
    let mut residual = Vec::new();
    let mut assigned = 0usize;
    for (k, &t) in scales.values().iter().enumerate() {
        let offsets = grid.ball_offsets(4.0 * sqn * t);
        for y in 0..m {
            // level: nested sets make ball-inclusion a min of point levels
            let py = grid.point(y);
            let mut lev = levels.point_level(y);
            for off in &offsets {
                if lev < levels.i_min() {
                    break;
                }
                let q = grid.translate(py, *off);
                if !grid.contains(q) {
                    lev = levels.i_min() - 1; // dirichlet: ball exits the box
                    break;
                }
                lev = lev.min(levels.point_level(grid.index(q)));
            }
            if lev < levels.i_min() {
                residual.push((k, y));
                continue;
            }
            let li = (lev - levels.i_min()) as usize;
            // tilted point, rounded half-toward-negative per axis
            let shift = 3.0 * t / grid.spacing();
            let mut tilted = py;
            for a in 0..grid.dim() {
                tilted[a] = (py[a] as f64 + shift - 0.5).ceil() as i64;
            }
            let n_side = grid.points_per_side() as i64;
            let tilted_in = match grid.boundary() {
                Boundary::Periodic => {
                    for c in tilted.iter_mut().take(grid.dim()) {
                        *c = c.rem_euclid(n_side);
                    }
                    true
                }
                Boundary::Dirichlet => tilted.iter().take(grid.dim()).all(|&c| (0..n_side).contains(&c)),
            };
            let target = if tilted_in && levels.mask(lev)[grid.index(tilted)] {
                grid.index(tilted)
            } else {
                y // y ∈ O_lev is guaranteed by the ball inclusion
            };
            let j = cube_of[li][target];
            if j == usize::MAX {
                return Err(Error::Invariant(format!(
                    "point {target} in O_{lev} not covered by its Whitney tiling"
                )));
            }
            let ell = cubes[li][j].cube.side_length(grid);
            if t > 3.0 * ell {
                residual.push((k, y));
                continue;
            }
            cell_map.entry((lev, j)).or_default().push((k, y));
            assigned += 1;
        }
    }

    let mut exit_violations = 0usize;
    for (li, level_cubes) in cubes.iter().enumerate() {
        let mask = levels.mask(levels.i_min() + li as i32);
        if mask.iter().all(|&b| b) {
            continue; // whole-domain cube is exempt
        }
        for w in level_cubes {
            let five_q = w.cube.dilate(5.0);
            let exits = (0..m).any(|i| !mask[i] && five_q.contains(grid, grid.point(i)));
            if !exits {
                exit_violations += 1;
            }
        }
    }

    let total = scales.len() * m;
    let cells: Vec<TentCell> = cell_map
        .into_iter()
        .map(|((level, cube_index), pairs)| TentCell { level, cube_index, pairs })
        .collect();
    let check: usize = cells.iter().map(|c| c.pairs.len()).sum::<usize>() + residual.len();
    if check != total {
        return Err(Error::Invariant(format!(
            "cell partition lost pairs: {check} of {total}"
        )));
    }
    Ok(CellPartition {
        cells,
        residual_pairs: residual,
        coverage: CoverageStats {
            total_pairs: total,
            assigned_pairs: assigned,
            residual_pairs: total - assigned,
            exit_violations,
        },
    })
}

/// Calderón reconstruction f ≈ c_Ψ Σ_k Ψ(t_k√L) t_k²L e^{-t_k²L} f dlog.
#[derive(Clone, Debug)]
pub struct Reconstruction {
    pub field: Field,
    /// relative L² error against f minus its kernel component
    pub rel_l2_error: f64,
    /// norm of the ker-L component of f (invisible to the formula)
    pub kernel_component_norm: f64,
}

/// Verify the scale grid covers the operator's spectral band.
fn check_band(op: &SpectralOperator, scales: &ScaleGrid) -> Result<()> {
    let lo_need = 0.1 / op.max_eigenvalue().sqrt();
    let hi_need = 3.4 / op.min_positive_eigenvalue().sqrt();
    if scales.t_min() > lo_need * 1.0001 || scales.t_max() < hi_need * 0.9999 {
        return Err(Error::Precondition(format!(
            "scale grid [{:.3e}, {:.3e}] does not cover the spectral band (need t_min ≤ {lo_need:.3e}, t_max ≥ {hi_need:.3e})",
            scales.t_min(),
            scales.t_max()
        )));
    }
    Ok(())
}

pub fn calderon_reconstruct(
    op: &SpectralOperator,
    bundle: &CalderonBundle,
    f: &Field,
    scales: &ScaleGrid,
) -> Result<Reconstruction> {
    check_band(op, scales)?;
    let floor = 1e-9 * op.max_eigenvalue().max(1.0);
    // kernel component: projection onto eigenvectors of the (clamped) zero eigenvalue
    let coeffs = op.eigenvectors().t().dot(f.values());
    let mut kernel_sq = 0.0;
    for (c, &lam) in coeffs.iter().zip(op.eigenvalues().iter()) {
        if lam <= floor {
            kernel_sq += c * c;
        }
    }
    let hn = f.grid().cell_measure();
    let kernel_component_norm = (kernel_sq * hn).sqrt();

    let mut acc = Array1::<f64>::zeros(f.len());
    for &t in scales.values() {
        let diag = op.eigenvalues().mapv(|lam| {
            let u = t * lam.sqrt();
            bundle.psi().eval(u) * u * u * (-u * u).exp()
        });
        acc += &op.apply_eigen_diag(&diag, f.values().view());
    }
    acc *= bundle.c_psi() * scales.dlog();
    let field = Field::new(*f.grid(), acc)?;

    // error against the mean-free (co-kernel) part
    let mut target = f.values().clone();
    for (col, (&c, &lam)) in op.eigenvectors().columns().into_iter().zip(
        coeffs.iter().zip(op.eigenvalues().iter()),
    ) {
        if lam <= floor {
            target.zip_mut_with(&col.to_owned(), |t, &u| *t -= c * u);
        }
    }
    let diff = &target - field.values();
    let num = (diff.iter().map(|v| v * v).sum::<f64>() * hn).sqrt();
    let den = (target.iter().map(|v| v * v).sum::<f64>() * hn).sqrt();
    Ok(Reconstruction {
        field,
        rel_l2_error: if den > 0.0 { num / den } else { 0.0 },
        kernel_component_norm,
    })
}

/// One term λ_ij a_ij of the decomposition, with everything the validator
/// needs.
#[derive(Clone, Debug)]
pub struct AtomTerm {
    pub level: i32,
    pub cube_index: usize,
    pub whitney: WhitneyCube,
    /// the atom's supporting cube 30Q_ij
    pub ball: DilatedCube,
    pub lambda: f64,
    pub b: Field,
    pub a: Field,
    pub p: f64,
    pub m_order: usize,
}

#[derive(Clone, Debug)]
pub struct Decomposition {
    pub terms: Vec<AtomTerm>,
    /// Σ λ_ij a_ij in deterministic term order
    pub reconstruction: Field,
    /// f − Σ λ_ij a_ij (bookkeeping identity, exact)
    pub residual: Field,
    /// (Σ |λ_ij|^p)^{1/p}
    pub budget: f64,
    pub coverage: CoverageStats,
    pub p: f64,
    pub m_order: usize,
}

/// Run the full pipeline 𝓜_L f → level sets → Whitney → tent cells →
/// b_ij, a_ij = L^M b_ij. The residual collects the quadrature defect and
/// the (usually empty) unassigned-pair contribution.
pub fn atomic_decompose(
    op: &SpectralOperator,
    bundle: &CalderonBundle,
    f: &Field,
    p: f64,
    m_order: usize,
    scales: &ScaleGrid,
) -> Result<Decomposition> {
    if !(p > 0.0 && p <= 1.0) {
        return Err(Error::Precondition(format!("atomic decomposition needs 0 < p ≤ 1, got {p}")));
    }
    let n = op.grid().dim() as f64;
    if (m_order as f64) <= 0.5 * n * (1.0 / p - 1.0) {
        return Err(Error::Precondition(format!(
            "M = {m_order} must exceed (n/2)(1/p − 1) = {}",
            0.5 * n * (1.0 / p - 1.0)
        )));
    }
    if bundle.m() != m_order {
        return Err(Error::Precondition(format!(
            "bundle was built for M = {}, decomposition asked for M = {m_order}",
            bundle.m()
        )));
    }
    if op.grid().boundary() == Boundary::Periodic {
        let rel_mean = f.mean().abs() / f.linf_norm().max(f64::MIN_POSITIVE);
        if rel_mean > 1e-10 {
            return Err(Error::Precondition(
                "periodic decompositions need a mean-zero field (the zero mode is invisible)"
                    .into(),
            ));
        }
    }
    check_band(op, scales)?;

    let grid = *op.grid();
    let mf = script_m(op, bundle, f, scales)?;
    let levels = match level_sets(&mf) {
        Ok(l) => l,
        Err(Error::SpectrallyTrivial) => {
            return Ok(Decomposition {
                terms: Vec::new(),
                reconstruction: Field::zeros(grid),
                residual: Field::zeros(grid),
                budget: 0.0,
                coverage: CoverageStats::default(),
                p,
                m_order,
            });
        }
        Err(e) => return Err(e),
    };
    let cubes: Vec<Vec<WhitneyCube>> =
        levels.levels().map(|i| whitney(levels.mask(i), &grid)).collect();
    let partition = build_cells(&levels, &cubes, scales, &grid)?;

    // u_k = t_k² L e^{-t_k²L} f per scale
    let heat_weight = Symbol::heat_weight();
    let u_fields: Vec<Array1<f64>> = scales
        .values()
        .iter()
        .map(|&t| Ok(op.spectral_apply(&heat_weight, t, f)?.values().clone()))
        .collect::<Result<_>>()?;

    // group cell pairs by scale: (scale k) -> [(cell idx, points)]
    let mut by_scale: Vec<Vec<(usize, Vec<usize>)>> = vec![Vec::new(); scales.len()];
    for (ci, cell) in partition.cells.iter().enumerate() {
        let mut per_scale: std::collections::BTreeMap<usize, Vec<usize>> =
            std::collections::BTreeMap::new();
        for &(k, y) in &cell.pairs {
            per_scale.entry(k).or_default().push(y);
        }
        for (k, ys) in per_scale {
            by_scale[k].push((ci, ys));
        }
    }

    // Σ_k t^{2M} Φ(t√L)(χ_cell u_k) dlog, batched per scale
    let m_pts = grid.num_points();
    let mut integrals: Vec<Array1<f64>> = vec![Array1::zeros(m_pts); partition.cells.len()];
    for (k, groups) in by_scale.iter().enumerate() {
        if groups.is_empty() {
            continue;
        }
        let t = scales.values()[k];
        let mut v = Array2::<f64>::zeros((m_pts, groups.len()));
        for (col, (_, ys)) in groups.iter().enumerate() {
            for &y in ys {
                v[[y, col]] = u_fields[k][y];
            }
        }
        let diag = op
            .symbol_diag(bundle.phi(), t)?
            .mapv(|phi| phi * t.powi(2 * m_order as i32));
        let mut w = op.eigenvectors().t().dot(&v);
        w *= &diag.view().insert_axis(Axis(1));
        let out = op.eigenvectors().dot(&w);
        for (col, &(ci, _)) in groups.iter().enumerate() {
            let contrib = out.column(col).to_owned() * scales.dlog();
            integrals[ci] += &contrib;
        }
    }

    let lam_pow_m = op.eigenvalues().mapv(|lam| lam.powi(m_order as i32));
    let mut terms = Vec::with_capacity(partition.cells.len());
    let mut recon = Array1::<f64>::zeros(m_pts);
    let mut budget_p = 0.0f64;
    for (ci, cell) in partition.cells.iter().enumerate() {
        let li = (cell.level - levels.i_min()) as usize;
        let w = cubes[li][cell.cube_index].clone();
        let lambda = (cell.level as f64).exp2() * w.cube.measure(&grid).powf(1.0 / p);
        let b_vals = &integrals[ci] * (bundle.c_psi() / lambda);
        let a_vals = op.apply_eigen_diag(&lam_pow_m, b_vals.view());
        recon.scaled_add(lambda, &a_vals);
        budget_p += lambda.powf(p);
        terms.push(AtomTerm {
            level: cell.level,
            cube_index: cell.cube_index,
            ball: w.cube.dilate(30.0),
            whitney: w,
            lambda,
            b: Field::new(grid, b_vals)?,
            a: Field::new(grid, a_vals)?,
            p,
            m_order,
        });
    }
    let reconstruction = Field::new(grid, recon)?;
    let residual = f.sub(&reconstruction)?;
    Ok(Decomposition {
        terms,
        reconstruction,
        residual,
        budget: budget_p.powf(1.0 / p),
        coverage: partition.coverage,
        p,
        m_order,
    })
}

/// Validation report for one atom term.
#[derive(Clone, Copy, Debug)]
pub struct AtomValidation {
    /// ‖a − L^M b‖₂ / ‖a‖₂ with L^M applied as a plain matrix power
    pub lm_identity_rel_err: f64,
    /// worst over k ≤ M of the ℓ² energy fraction of L^k b outside 30Q
    pub max_support_mass: f64,
    pub support_ok: bool,
    /// worst over k ≤ M of ‖(r²L)^k b‖_∞ / (r^{2M} |B|^{-1/p})
    pub size_ratio_qinf: f64,
    /// worst over k ≤ M of ‖(r²L)^k b‖_2 / (r^{2M} |B|^{1/2-1/p})
    pub size_ratio_q2: f64,
}

pub const DEFAULT_SUPPORT_TOL: f64 = 1e-8;

/// Check the Def-1.2 properties of one term: a = L^M b (two independent
/// routes), supp L^k b ⊆ 30Q up to the tolerance, and the size ratios for
/// q ∈ {2, ∞}. Ratios are reported, not thresholded: the construction
/// produces atoms up to one uniform multiplicative constant.
pub fn validate_atom(
    op: &SpectralOperator,
    term: &AtomTerm,
    support_tol: f64,
) -> Result<AtomValidation> {
    let grid = *op.grid();
    let m_pts = grid.num_points();
    let r_ball = term.ball.half_side(&grid);
    let ball_measure =
        (term.ball.factor() * term.whitney.cube.side_length(&grid)).powi(grid.dim() as i32);
    let outside: Vec<bool> =
        (0..m_pts).map(|i| !term.ball.contains(&grid, grid.point(i))).collect();
    let hn = grid.cell_measure();

    let mut lkb = term.b.values().clone();
    let mut max_support_mass = 0.0f64;
    let mut size_inf = 0.0f64;
    let mut size_2 = 0.0f64;
    let denom_inf = r_ball.powi(2 * term.m_order as i32) * ball_measure.powf(-1.0 / term.p);
    let denom_2 =
        r_ball.powi(2 * term.m_order as i32) * ball_measure.powf(0.5 - 1.0 / term.p);
    for k in 0..=term.m_order {
        let total: f64 = lkb.iter().map(|v| v * v).sum();
        if total > 0.0 {
            let out: f64 =
                lkb.iter().zip(&outside).filter(|(_, &o)| o).map(|(v, _)| v * v).sum();
            max_support_mass = max_support_mass.max(out / total);
        }
        let r2k = r_ball.powi(2 * k as i32);
        let linf = lkb.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        size_inf = size_inf.max(linf * r2k / denom_inf);
        size_2 = size_2.max((total * hn).sqrt() * r2k / denom_2);
        if k < term.m_order {
            lkb = op.matrix().dot(&lkb);
        }
    }
    // independent route: L^M b by repeated plain matrix application
    let mut lmb = term.b.values().clone();
    for _ in 0..term.m_order {
        lmb = op.matrix().dot(&lmb);
    }
    let diff = &lmb - term.a.values();
    let num = diff.iter().map(|v| v * v).sum::<f64>().sqrt();
    let den = term.a.values().iter().map(|v| v * v).sum::<f64>().sqrt();
    let lm_identity_rel_err = if den > 0.0 { num / den } else { 0.0 };
    Ok(AtomValidation {
        lm_identity_rel_err,
        max_support_mass,
        support_ok: max_support_mass <= support_tol,
        size_ratio_qinf: size_inf,
        size_ratio_q2: size_2,
    })
}

/// Audit of the interior kernel bound: the cell's K-weighted contribution
/// |c_Ψ Σ_k t^{2(M−K)} (t²L)^K Φ(t√L)(χ_cell u_k) dlog| at points with
/// d(x, Q) < 30√n ℓ, divided by 2^i ℓ^{2(M−K)}; returns the max ratio.
pub fn interior_bound_check(
    op: &SpectralOperator,
    bundle: &CalderonBundle,
    f: &Field,
    cell: &TentCell,
    cube: &WhitneyCube,
    scales: &ScaleGrid,
    k_order: usize,
    m_order: usize,
) -> Result<f64> {
    if k_order > m_order {
        return Err(Error::Precondition(format!(
            "interior_bound_check needs 0 ≤ K ≤ M, got K = {k_order}, M = {m_order}"
        )));
    }
    if cell.pairs.is_empty() {
        return Ok(0.0);
    }
    let grid = *op.grid();
    let m_pts = grid.num_points();
    let heat_weight = Symbol::heat_weight();
    let mut acc = Array1::<f64>::zeros(m_pts);
    let mut per_scale: std::collections::BTreeMap<usize, Vec<usize>> =
        std::collections::BTreeMap::new();
    for &(k, y) in &cell.pairs {
        per_scale.entry(k).or_default().push(y);
    }
    let phi = bundle.phi().clone();
    for (k, ys) in per_scale {
        let t = scales.values()[k];
        let u = op.spectral_apply(&heat_weight, t, f)?;
        let mut masked = Array1::<f64>::zeros(m_pts);
        for &y in &ys {
            masked[y] = u.values()[y];
        }
        let diag = op.eigenvalues().mapv(|lam| {
            let x = t * lam.sqrt();
            x.powi(2 * k_order as i32) * phi.eval(x)
        });
        let applied = op.apply_eigen_diag(&diag, masked.view());
        acc.scaled_add(t.powi(2 * (m_order - k_order) as i32) * scales.dlog(), &applied);
    }
    acc *= bundle.c_psi();
    let ell = cube.cube.side_length(&grid);
    let sqn = (grid.dim() as f64).sqrt();
    let cube_pts = cube.cube.points(&grid);
    let denom = (cell.level as f64).exp2() * ell.powi(2 * (m_order - k_order) as i32);
    let mut worst = 0.0f64;
    for x in 0..m_pts {
        let px = grid.point(x);
        let d = cube_pts.iter().map(|&q| grid.distance(px, q)).fold(f64::INFINITY, f64::min);
        if d < 30.0 * sqn * ell {
            worst = worst.max(acc[x].abs() / denom);
        }
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::lp_quasinorm;

    fn setup(n: usize) -> (GridSpec, SpectralOperator) {
        let g = GridSpec::new(1, n, 1.0 / n as f64, Boundary::Periodic).unwrap();
        (g, SpectralOperator::laplacian(g).unwrap())
    }

    #[test]
    fn level_sets_constant_and_nested() {
        let g = GridSpec::new(1, 16, 1.0, Boundary::Periodic).unwrap();
        let one = Field::constant(g, 1.0).unwrap();
        let ls = level_sets(&one).unwrap();
        assert_eq!(ls.i_min(), -1);
        assert!(ls.mask(-1).iter().all(|&b| b));
        assert!(ls.mask(0).iter().all(|&b| !b));

        let f = Field::from_fn(g, |p| 0.1 + (p[0] as f64).exp()).unwrap();
        let ls = level_sets(&f).unwrap();
        for i in ls.i_min()..ls.i_max() {
            let (a, b) = (ls.mask(i), ls.mask(i + 1));
            for j in 0..16 {
                assert!(!b[j] || a[j], "O_{} ⊄ O_{} at {j}", i + 1, i);
            }
        }
        // i-range tracks the dynamic range
        let spread = (f.linf_norm() / 0.1f64).log2().ceil() as i32;
        assert!((ls.i_max() - ls.i_min() - spread).abs() <= 2);

        assert!(matches!(level_sets(&Field::zeros(g)), Err(Error::SpectrallyTrivial)));
    }

    #[test]
    fn whitney_full_grid_and_empty() {
        let g = GridSpec::new(1, 16, 1.0, Boundary::Periodic).unwrap();
        let full = whitney(&vec![true; 16], &g);
        assert_eq!(full.len(), 1);
        assert_eq!(full[0].cube.side_cells(), 16);
        assert!(full[0].dist_to_complement.is_infinite());
        assert!(whitney(&vec![false; 16], &g).is_empty());
    }

    /// independent reference: enumerate all quasi-dyadic cubes, keep the
    /// acceptable ones, extract the maximal elements
    fn brute_whitney_1d(mask: &[bool], grid: &GridSpec) -> Vec<(i64, usize)> {
        fn gen(c0: i64, s: usize, out: &mut Vec<(i64, usize)>) {
            out.push((c0, s));
            if s > 1 {
                let s1 = s.div_ceil(2);
                gen(c0, s1, out);
                gen(c0 + s1 as i64, s - s1, out);
            }
        }
        let mut all = Vec::new();
        gen(0, grid.points_per_side(), &mut all);
        let comp: Vec<i64> =
            (0..grid.points_per_side() as i64).filter(|&i| !mask[i as usize]).collect();
        let ok = |&(c0, s): &(i64, usize)| -> bool {
            let pts: Vec<i64> = (c0..c0 + s as i64).collect();
            if !pts.iter().all(|&p| mask[p as usize]) {
                return false;
            }
            if comp.is_empty() {
                return true;
            }
            let dist = pts
                .iter()
                .flat_map(|&p| comp.iter().map(move |&c| grid.distance([p, 0, 0], [c, 0, 0])))
                .fold(f64::INFINITY, f64::min);
            dist >= s as f64 * grid.spacing() || s == 1
        };
        let acceptable: Vec<(i64, usize)> = all.into_iter().filter(ok).collect();
        // maximal: acceptable and no acceptable proper ancestor
        acceptable
            .iter()
            .copied()
            .filter(|&(c0, s)| {
                !acceptable
                    .iter()
                    .any(|&(d0, r)| r > s && d0 <= c0 && c0 + (s as i64) <= d0 + r as i64)
            })
            .collect()
    }

    #[test]
    fn whitney_matches_brute_force_on_dirichlet_middle_half() {
        let g = GridSpec::new(1, 64, 1.0 / 64.0, Boundary::Dirichlet).unwrap();
        let mask: Vec<bool> = (0..64).map(|i| (16..48).contains(&i)).collect();
        let got = whitney(&mask, &g);
        // disjoint exact cover
        let mut covered = vec![false; 64];
        for w in &got {
            for p in w.cube.points(&g) {
                assert!(!covered[g.index(p)], "overlap at {p:?}");
                covered[g.index(p)] = true;
            }
        }
        for i in 0..64 {
            assert_eq!(covered[i], mask[i]);
        }
        // cubes shrink toward both endpoints
        let sides: Vec<usize> = got.iter().map(|w| w.cube.side_cells()).collect();
        assert!(sides.iter().min().unwrap() < sides.iter().max().unwrap());
        let mut want = brute_whitney_1d(&mask, &g);
        let mut have: Vec<(i64, usize)> =
            got.iter().map(|w| (w.cube.corner()[0], w.cube.side_cells())).collect();
        want.sort();
        have.sort();
        assert_eq!(have, want);
        // whitney comparability and the exit property on this shape
        for w in &got {
            let ell = w.cube.side_length(&g);
            assert!(w.dist_to_complement >= ell - 1e-12);
            let sqn = 1.0f64;
            assert!(w.dist_to_complement <= 2.0 * (1.0 + sqn) * ell + 1e-12);
            let five = w.cube.dilate(5.0);
            let exits = (0..64).any(|i| !mask[i] && five.contains(&g, [i as i64, 0, 0]));
            assert!(exits, "5Q should meet the complement on an interval");
        }
    }

    #[test]
    fn whitney_2d_tiles_disc_complement() {
        let g = GridSpec::new(2, 24, 1.0 / 24.0, Boundary::Periodic).unwrap();
        let mask: Vec<bool> = (0..g.num_points())
            .map(|i| {
                let p = g.point(i);
                g.distance(p, [12, 12, 0]) > 0.2
            })
            .collect();
        let cubes = whitney(&mask, &g);
        let mut covered = vec![false; g.num_points()];
        for w in &cubes {
            for p in w.cube.points(&g) {
                let idx = g.index(p);
                assert!(mask[idx]);
                assert!(!covered[idx]);
                covered[idx] = true;
            }
        }
        for i in 0..g.num_points() {
            assert_eq!(covered[i], mask[i]);
        }
    }

    fn band_limited(g: GridSpec) -> Field {
        Field::from_fn(g, |p| {
            let x = p[0] as f64 * g.spacing();
            let tau = 2.0 * std::f64::consts::PI;
            (tau * x).cos() + 0.6 * (tau * 2.0 * x).sin() - 0.3 * (tau * 4.0 * x).cos()
        })
        .unwrap()
        .mean_zero()
    }

    #[test]
    fn calderon_scalar_defect_and_eigenvector_identity() {
        let (g, op) = setup(64);
        let bundle = CalderonBundle::new(1, 140.0).unwrap();
        let scales = ScaleGrid::for_reconstruction(&op);
        // scalar defect per nonzero eigenvalue
        let mut worst = 0.0f64;
        for &lam in op.eigenvalues().iter().filter(|&&l| l > 1e-9) {
            let mu = lam.sqrt();
            let mut s = 0.0;
            for &t in scales.values() {
                let u = t * mu;
                s += bundle.psi().eval(u) * u * u * (-u * u).exp();
            }
            s *= bundle.c_psi() * scales.dlog();
            worst = worst.max((s - 1.0).abs());
        }
        assert!(worst <= 1e-3, "scalar defect {worst}");

        // single eigenvector: reconstruction error equals the scalar defect
        let k = 5usize;
        let f = Field::from_fn(g, |p| {
            (2.0 * std::f64::consts::PI * k as f64 * p[0] as f64 / 64.0).cos()
        })
        .unwrap();
        let rec = calderon_reconstruct(&op, &bundle, &f, &scales).unwrap();
        let mu = crate::oracle::periodic_laplacian_eigenvalue_1d(64, g.spacing(), k).sqrt();
        let mut s = 0.0;
        for &t in scales.values() {
            let u = t * mu;
            s += bundle.psi().eval(u) * u * u * (-u * u).exp();
        }
        s *= bundle.c_psi() * scales.dlog();
        assert!((rec.rel_l2_error - (s - 1.0).abs()).abs() <= 1e-9);

        // constants vanish under the formula
        let one = Field::constant(g, 1.0).unwrap();
        let rec1 = calderon_reconstruct(&op, &bundle, &one, &scales).unwrap();
        assert!(rec1.field.linf_norm() <= 1e-12);
        assert!((rec1.kernel_component_norm - 1.0).abs() <= 1e-10);
    }

    #[test]
    fn calderon_reconstructs_band_limited_field() {
        let (g, op) = setup(64);
        let bundle = CalderonBundle::new(1, 140.0).unwrap();
        let scales = ScaleGrid::for_reconstruction(&op);
        let f = band_limited(g);
        let rec = calderon_reconstruct(&op, &bundle, &f, &scales).unwrap();
        assert!(rec.rel_l2_error <= 1e-2, "reconstruction error {}", rec.rel_l2_error);
    }

    #[test]
    fn band_check_rejects_maximal_grid() {
        let (g, op) = setup(64);
        let bundle = CalderonBundle::new(1, 140.0).unwrap();
        let scales = ScaleGrid::for_maximal(&g);
        let f = band_limited(g);
        assert!(calderon_reconstruct(&op, &bundle, &f, &scales).is_err());
    }

    #[test]
    fn decomposition_bookkeeping_and_partition() {
        let (g, op) = setup(64);
        let bundle = CalderonBundle::new(1, 140.0).unwrap();
        let scales = ScaleGrid::for_reconstruction(&op);
        let f = band_limited(g);
        let dec = atomic_decompose(&op, &bundle, &f, 1.0, 1, &scales).unwrap();
        // Σ λa + residual = f exactly (identity by construction)
        let mut sum = Field::zeros(g);
        for term in &dec.terms {
            sum = sum.add(&term.a.scale(term.lambda)).unwrap();
        }
        sum = sum.add(&dec.residual).unwrap();
        assert!(sum.sub(&f).unwrap().linf_norm() <= 1e-12 * f.linf_norm());
        // pairs partition exactly
        let assigned: usize = dec.coverage.assigned_pairs;
        assert_eq!(assigned + dec.coverage.residual_pairs, dec.coverage.total_pairs);
        // residual is small on a band-limited field
        let rel = dec.residual.l2_norm() / f.l2_norm();
        assert!(rel <= 2e-2, "residual {rel}");
        // budget positive and finite
        assert!(dec.budget.is_finite() && dec.budget > 0.0);
    }

    #[test]
    fn decomposition_rejects_bad_parameters() {
        let (g, op) = setup(64);
        let bundle = CalderonBundle::new(1, 140.0).unwrap();
        let scales = ScaleGrid::for_reconstruction(&op);
        let f = band_limited(g);
        assert!(atomic_decompose(&op, &bundle, &f, 1.5, 1, &scales).is_err());
        // M = 1 is below (n/2)(1/p − 1) = 2 at p = 0.2
        assert!(atomic_decompose(&op, &bundle, &f, 0.2, 1, &scales).is_err());
        // bundle M mismatch
        assert!(atomic_decompose(&op, &bundle, &f, 1.0, 2, &scales).is_err());
        let not_mean_zero = Field::constant(g, 1.0).unwrap();
        assert!(atomic_decompose(&op, &bundle, &not_mean_zero, 1.0, 1, &scales).is_err());
    }

    #[test]
    fn single_level_family_routes_everything_to_root() {
        let g = GridSpec::new(1, 32, 1.0 / 32.0, Boundary::Periodic).unwrap();
        let mf = Field::constant(g, 1.0).unwrap();
        let levels = level_sets(&mf).unwrap();
        let cubes: Vec<Vec<WhitneyCube>> =
            levels.levels().map(|i| whitney(levels.mask(i), &g)).collect();
        let scales = ScaleGrid::with_density(0.001, 0.09, 64.0).unwrap(); // t ≤ 3·side = 3
        let part = build_cells(&levels, &cubes, &scales, &g).unwrap();
        assert_eq!(part.cells.len(), 1);
        assert_eq!(part.coverage.residual_pairs, 0);
        assert_eq!(part.cells[0].pairs.len(), part.coverage.total_pairs);
    }

    #[test]
    fn validate_zero_atom() {
        let (g, op) = setup(32);
        let w = WhitneyCube { cube: Cube::new(&g, [4, 0, 0], 4), dist_to_complement: 1.0 };
        let term = AtomTerm {
            level: 0,
            cube_index: 0,
            ball: w.cube.dilate(30.0),
            whitney: w,
            lambda: 1.0,
            b: Field::zeros(g),
            a: Field::zeros(g),
            p: 1.0,
            m_order: 1,
        };
        let v = validate_atom(&op, &term, DEFAULT_SUPPORT_TOL).unwrap();
        assert_eq!(v.max_support_mass, 0.0);
        assert_eq!(v.size_ratio_qinf, 0.0);
        assert_eq!(v.size_ratio_q2, 0.0);
        assert!(v.support_ok);
    }

    #[test]
    fn hand_built_atom_reports_unit_ratio() {
        // b = smooth bump inside Q, scaled for equality in the q = ∞ size
        // bound; the validator must report the hand-computed max ratio ≈ 1
        let (g, op) = setup(128);
        let side_cells = 8usize;
        let w = WhitneyCube { cube: Cube::new(&g, [60, 0, 0], side_cells), dist_to_complement: 1.0 };
        let ell = w.cube.side_length(&g);
        let center = 60.0 + (side_cells as f64 - 1.0) / 2.0;
        // support radius: most of 30Q so the k = 1 term stays subordinate
        let supp = 10.0 * ell;
        let raw = Field::from_fn(g, |p| {
            let u = (p[0] as f64 - center) * g.spacing() / supp;
            if u.abs() < 1.0 {
                (-1.0 / (1.0 - u * u)).exp()
            } else {
                0.0
            }
        })
        .unwrap();
        let m_order = 1usize;
        let p = 1.0;
        let r_ball = 15.0 * ell;
        let ball_measure = 30.0 * ell;
        // hand-computed max ratio over k ∈ {0, 1}
        let lb = op.apply_matrix(&raw).unwrap();
        let denom = r_ball.powi(2) * ball_measure.powf(-1.0);
        let hand = (raw.linf_norm() / denom).max(lb.linf_norm() * r_ball.powi(2) / denom);
        let b = raw.scale(1.0 / hand);
        let a = op.apply_matrix(&b).unwrap();
        let term = AtomTerm {
            level: 0,
            cube_index: 0,
            ball: w.cube.dilate(30.0),
            whitney: w,
            lambda: 1.0,
            b,
            a,
            p,
            m_order,
        };
        let v = validate_atom(&op, &term, DEFAULT_SUPPORT_TOL).unwrap();
        assert!(v.support_ok);
        assert!(v.lm_identity_rel_err <= 1e-12);
        assert!((v.size_ratio_qinf - 1.0).abs() <= 0.02, "ratio {}", v.size_ratio_qinf);
        // q-monotonicity: the (p, 2, M) ratio is below the (p, ∞, M) ratio
        assert!(v.size_ratio_q2 <= v.size_ratio_qinf + 1e-12);
    }

    #[test]
    fn interior_bound_empty_cell() {
        let (g, op) = setup(32);
        let bundle = CalderonBundle::new(1, 80.0).unwrap();
        let f = band_limited(g);
        let scales = ScaleGrid::for_reconstruction(&op);
        let cell = TentCell { level: 0, cube_index: 0, pairs: Vec::new() };
        let w = WhitneyCube { cube: Cube::new(&g, [0, 0, 0], 4), dist_to_complement: 1.0 };
        let r = interior_bound_check(&op, &bundle, &f, &cell, &w, &scales, 0, 1).unwrap();
        assert_eq!(r, 0.0);
        assert!(interior_bound_check(&op, &bundle, &f, &cell, &w, &scales, 2, 1).is_err());
    }

    #[test]
    fn budget_tracks_level_measure_sum() {
        let (g, op) = setup(64);
        let bundle = CalderonBundle::new(1, 140.0).unwrap();
        let scales = ScaleGrid::for_reconstruction(&op);
        let f = band_limited(g);
        let p = 1.0;
        let dec = atomic_decompose(&op, &bundle, &f, p, 1, &scales).unwrap();
        // Σ|λ|^p ≤ Σ_i 2^{ip} |O_i| (cubes with atoms tile a subset of O_i)
        let mf = script_m(&op, &bundle, &f, &scales).unwrap();
        let levels = level_sets(&mf).unwrap();
        let hn = g.cell_measure();
        let bound: f64 = levels
            .levels()
            .map(|i| {
                let meas = levels.mask(i).iter().filter(|&&b| b).count() as f64 * hn;
                ((i as f64) * p).exp2() * meas
            })
            .sum();
        let got: f64 = dec.terms.iter().map(|t| t.lambda.powf(p)).sum();
        assert!(got <= bound * (1.0 + 1e-12), "budget^p {got} vs layer bound {bound}");
        // and the budget is comparable to ‖𝓜f‖_p (measured, loose factor)
        let mfp = lp_quasinorm(&mf, p).unwrap();
        let ratio = dec.budget / mfp;
        assert!(ratio > 0.05 && ratio < 20.0, "budget/‖𝓜f‖_p = {ratio}");
    }
}
