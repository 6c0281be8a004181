//! Finite grids, grid functions, distances, cubes and L^p quasi-norms.
//!
//! Everything else in the toolkit computes on these types. Grids are
//! periodic (torus metric) or dirichlet (plain box, Euclidean metric);
//! points are lattice coordinates and fields are one real value per
//! lattice point, row-major over coordinates.

use crate::error::{Error, Result};
use ndarray::Array1;

/// Default cap on total point count so the dense eigendecomposition
/// stays desk-scale.
pub const DEFAULT_POINT_CAP: usize = 8192;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Boundary {
    Periodic,
    Dirichlet,
}

/// Lattice coordinates; axes beyond `dim` are zero.
pub type Point = [i64; 3];

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GridSpec {
    dim: usize,
    points_per_side: usize,
    spacing: f64,
    boundary: Boundary,
}

impl GridSpec {
    pub fn new(dim: usize, points_per_side: usize, spacing: f64, boundary: Boundary) -> Result<Self> {
        Self::with_cap(dim, points_per_side, spacing, boundary, DEFAULT_POINT_CAP)
    }

    pub fn with_cap(
        dim: usize,
        points_per_side: usize,
        spacing: f64,
        boundary: Boundary,
        cap: usize,
    ) -> Result<Self> {
        if !(1..=3).contains(&dim) {
            return Err(Error::InvalidGrid(format!("dim must be 1, 2 or 3, got {dim}")));
        }
        if points_per_side < 2 {
            return Err(Error::InvalidGrid("need at least 2 points per side".into()));
        }
        if !(spacing > 0.0) || !spacing.is_finite() {
            return Err(Error::InvalidGrid(format!("spacing must be positive, got {spacing}")));
        }
        let points = points_per_side.pow(dim as u32);
        if points > cap {
            return Err(Error::GridTooLarge { points, cap });
        }
        Ok(GridSpec { dim, points_per_side, spacing, boundary })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn points_per_side(&self) -> usize {
        self.points_per_side
    }

    pub fn spacing(&self) -> f64 {
        self.spacing
    }

    pub fn boundary(&self) -> Boundary {
        self.boundary
    }

    pub fn side_length(&self) -> f64 {
        self.points_per_side as f64 * self.spacing
    }

    pub fn num_points(&self) -> usize {
        self.points_per_side.pow(self.dim as u32)
    }

    /// Cell volume h^n, the measure of one lattice cell.
    pub fn cell_measure(&self) -> f64 {
        self.spacing.powi(self.dim as i32)
    }

    /// Row-major index of a lattice point (coordinates wrapped on periodic grids).
    pub fn index(&self, p: Point) -> usize {
        let n = self.points_per_side as i64;
        let mut idx = 0usize;
        for a in 0..self.dim {
            let c = p[a].rem_euclid(n);
            idx = idx * self.points_per_side + c as usize;
        }
        idx
    }

    pub fn point(&self, mut idx: usize) -> Point {
        let mut p = [0i64; 3];
        for a in (0..self.dim).rev() {
            p[a] = (idx % self.points_per_side) as i64;
            idx /= self.points_per_side;
        }
        p
    }

    pub fn contains(&self, p: Point) -> bool {
        let n = self.points_per_side as i64;
        (0..self.dim).all(|a| (0..n).contains(&p[a])) && (self.dim..3).all(|a| p[a] == 0)
    }

    /// Per-axis lattice displacement respecting the boundary (periodic wraps
    /// to the shorter way round).
    pub fn axis_delta(&self, xa: i64, ya: i64) -> i64 {
        let d = (xa - ya).abs();
        match self.boundary {
            Boundary::Periodic => {
                let n = self.points_per_side as i64;
                let d = d.rem_euclid(n);
                d.min(n - d)
            }
            Boundary::Dirichlet => d,
        }
    }

    /// Euclidean distance between grid points, torus metric on periodic grids.
    pub fn distance(&self, x: Point, y: Point) -> f64 {
        let mut acc = 0.0;
        for a in 0..self.dim {
            let d = self.axis_delta(x[a], y[a]) as f64 * self.spacing;
            acc += d * d;
        }
        acc.sqrt()
    }

    pub fn distance_idx(&self, i: usize, j: usize) -> f64 {
        self.distance(self.point(i), self.point(j))
    }

    /// All grid points strictly within `radius` of `center`.
    pub fn ball_points(&self, center: Point, radius: f64) -> Vec<Point> {
        self.ball_offsets(radius)
            .into_iter()
            .map(|o| self.translate(center, o))
            .collect()
    }

    /// Offsets `o` such that the point `center + o` is strictly within
    /// `radius` of `center`, each wrapped target counted once.
    pub fn ball_offsets(&self, radius: f64) -> Vec<Point> {
        let mut out = Vec::new();
        if radius <= 0.0 {
            return out;
        }
        let n = self.points_per_side as i64;
        let r_lat = (radius / self.spacing).ceil() as i64;
        // offset range per axis; periodic axes never repeat a target point
        let lo = |_a: usize| -> i64 {
            match self.boundary {
                Boundary::Periodic => {
                    if 2 * r_lat + 1 >= n {
                        -(n / 2)
                    } else {
                        -r_lat
                    }
                }
                Boundary::Dirichlet => -r_lat,
            }
        };
        let hi = |_a: usize| -> i64 {
            match self.boundary {
                Boundary::Periodic => {
                    if 2 * r_lat + 1 >= n {
                        n - 1 - n / 2
                    } else {
                        r_lat
                    }
                }
                Boundary::Dirichlet => r_lat,
            }
        };
        let visit = |o: Point, out: &mut Vec<Point>| {
            let mut acc = 0.0;
            for a in 0..self.dim {
                let d = match self.boundary {
                    Boundary::Periodic => {
                        let d = o[a].rem_euclid(n);
                        d.min(n - d)
                    }
                    Boundary::Dirichlet => o[a].abs(),
                } as f64
                    * self.spacing;
                acc += d * d;
            }
            if acc.sqrt() < radius {
                out.push(o);
            }
        };
        match self.dim {
            1 => {
                for o0 in lo(0)..=hi(0) {
                    visit([o0, 0, 0], &mut out);
                }
            }
            2 => {
                for o0 in lo(0)..=hi(0) {
                    for o1 in lo(1)..=hi(1) {
                        visit([o0, o1, 0], &mut out);
                    }
                }
            }
            _ => {
                for o0 in lo(0)..=hi(0) {
                    for o1 in lo(1)..=hi(1) {
                        for o2 in lo(2)..=hi(2) {
                            visit([o0, o1, o2], &mut out);
                        }
                    }
                }
            }
        }
        out
    }

    /// `center + offset`, wrapped on periodic grids. On dirichlet grids the
    /// result may lie outside; callers filter with [`GridSpec::contains`].
    pub fn translate(&self, center: Point, offset: Point) -> Point {
        let n = self.points_per_side as i64;
        let mut p = [0i64; 3];
        for a in 0..self.dim {
            p[a] = match self.boundary {
                Boundary::Periodic => (center[a] + offset[a]).rem_euclid(n),
                Boundary::Dirichlet => center[a] + offset[a],
            };
        }
        p
    }
}

/// A real-valued function on a grid.
#[derive(Clone, Debug)]
pub struct Field {
    grid: GridSpec,
    values: Array1<f64>,
}

impl Field {
    pub fn new(grid: GridSpec, values: Array1<f64>) -> Result<Self> {
        if values.len() != grid.num_points() {
            return Err(Error::InvalidGrid(format!(
                "field has {} values for a grid of {} points",
                values.len(),
                grid.num_points()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite);
        }
        Ok(Field { grid, values })
    }

    pub fn zeros(grid: GridSpec) -> Self {
        Field { grid, values: Array1::zeros(grid.num_points()) }
    }

    pub fn constant(grid: GridSpec, c: f64) -> Result<Self> {
        Self::new(grid, Array1::from_elem(grid.num_points(), c))
    }

    pub fn from_fn(grid: GridSpec, mut f: impl FnMut(Point) -> f64) -> Result<Self> {
        let values = Array1::from_shape_fn(grid.num_points(), |i| f(grid.point(i)));
        Self::new(grid, values)
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn values(&self) -> &Array1<f64> {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn at(&self, p: Point) -> f64 {
        self.values[self.grid.index(p)]
    }

    pub fn add(&self, other: &Field) -> Result<Field> {
        if self.grid != other.grid {
            return Err(Error::GridMismatch);
        }
        Ok(Field { grid: self.grid, values: &self.values + &other.values })
    }

    pub fn sub(&self, other: &Field) -> Result<Field> {
        if self.grid != other.grid {
            return Err(Error::GridMismatch);
        }
        Ok(Field { grid: self.grid, values: &self.values - &other.values })
    }

    pub fn scale(&self, c: f64) -> Field {
        Field { grid: self.grid, values: &self.values * c }
    }

    pub fn abs(&self) -> Field {
        Field { grid: self.grid, values: self.values.mapv(f64::abs) }
    }

    pub fn mean(&self) -> f64 {
        self.values.sum() / self.values.len() as f64
    }

    /// Subtract the mean (projects out the zero mode of the periodic laplacian).
    pub fn mean_zero(&self) -> Field {
        let m = self.mean();
        Field { grid: self.grid, values: self.values.mapv(|v| v - m) }
    }

    pub fn l2_norm(&self) -> f64 {
        lp_quasinorm(self, 2.0).expect("p = 2 is valid")
    }

    pub fn linf_norm(&self) -> f64 {
        self.values.iter().fold(0.0f64, |m, v| m.max(v.abs()))
    }
}

/// Discrete L^p quasi-norm (Σ_x |f(x)|^p h^n)^{1/p}, p > 0.
pub fn lp_quasinorm(f: &Field, p: f64) -> Result<f64> {
    if !(p > 0.0) || !p.is_finite() {
        return Err(Error::Precondition(format!("lp_quasinorm needs p > 0, got {p}")));
    }
    let hn = f.grid.cell_measure();
    let sum: f64 = f.values.iter().map(|v| v.abs().powf(p)).sum();
    Ok((sum * hn).powf(1.0 / p))
}

/// A lattice-aligned cube: `side_cells` lattice points per axis starting at
/// `corner`. Its continuum side length is `side_cells * h` and membership is
/// the ℓ∞ box of its lattice points.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Cube {
    grid_points_per_side: usize,
    corner: Point,
    side_cells: usize,
}

impl Cube {
    pub fn new(grid: &GridSpec, corner: Point, side_cells: usize) -> Self {
        Cube { grid_points_per_side: grid.points_per_side(), corner, side_cells }
    }

    pub fn root(grid: &GridSpec) -> Self {
        Cube {
            grid_points_per_side: grid.points_per_side(),
            corner: [0, 0, 0],
            side_cells: grid.points_per_side(),
        }
    }

    pub fn corner(&self) -> Point {
        self.corner
    }

    pub fn side_cells(&self) -> usize {
        self.side_cells
    }

    pub fn side_length(&self, grid: &GridSpec) -> f64 {
        self.side_cells as f64 * grid.spacing()
    }

    pub fn measure(&self, grid: &GridSpec) -> f64 {
        self.side_length(grid).powi(grid.dim() as i32)
    }

    /// Center in lattice coordinates (half-integer for even sides).
    pub fn center(&self) -> [f64; 3] {
        let mut c = [0.0f64; 3];
        for a in 0..3 {
            c[a] = self.corner[a] as f64 + (self.side_cells as f64 - 1.0) / 2.0;
        }
        c
    }

    pub fn contains(&self, grid: &GridSpec, p: Point) -> bool {
        let n = self.grid_points_per_side as i64;
        for a in 0..grid.dim() {
            let rel = match grid.boundary() {
                Boundary::Periodic => (p[a] - self.corner[a]).rem_euclid(n),
                Boundary::Dirichlet => p[a] - self.corner[a],
            };
            if rel < 0 || rel >= self.side_cells as i64 {
                return false;
            }
        }
        true
    }

    /// The dilate kQ: same center, side multiplied by k.
    pub fn dilate(&self, k: f64) -> DilatedCube {
        DilatedCube { base: *self, factor: k }
    }

    /// Lattice points of the cube, in row-major order.
    pub fn points(&self, grid: &GridSpec) -> Vec<Point> {
        let s = self.side_cells as i64;
        let mut out = Vec::with_capacity(self.side_cells.pow(grid.dim() as u32));
        let ranges = |a: usize| -> std::ops::Range<i64> {
            if a < grid.dim() {
                0..s
            } else {
                0..1
            }
        };
        for o0 in ranges(0) {
            for o1 in ranges(1) {
                for o2 in ranges(2) {
                    out.push(grid.translate(self.corner, [o0, o1, o2]));
                }
            }
        }
        out
    }
}

/// kQ for a lattice cube Q; the center is generally off-lattice so this is a
/// membership view rather than a `Cube`.
#[derive(Clone, Copy, Debug)]
pub struct DilatedCube {
    base: Cube,
    factor: f64,
}

impl DilatedCube {
    pub fn base(&self) -> &Cube {
        &self.base
    }

    pub fn factor(&self) -> f64 {
        self.factor
    }

    /// Half the continuum side length of the dilate.
    pub fn half_side(&self, grid: &GridSpec) -> f64 {
        self.factor * self.base.side_length(grid) / 2.0
    }

    pub fn contains(&self, grid: &GridSpec, p: Point) -> bool {
        let c = self.base.center();
        let n = grid.points_per_side() as i64;
        let half = self.half_side(grid) / grid.spacing() + 1e-9;
        for a in 0..grid.dim() {
            let mut d = (p[a] as f64 - c[a]).abs();
            if grid.boundary() == Boundary::Periodic {
                d = d.min(n as f64 - d);
            }
            if d > half {
                return false;
            }
        }
        true
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn g1(n: usize, h: f64) -> GridSpec {
        GridSpec::new(1, n, h, Boundary::Periodic).unwrap()
    }

    #[test]
    fn cap_enforced() {
        assert!(matches!(
            GridSpec::new(3, 64, 0.1, Boundary::Periodic),
            Err(Error::GridTooLarge { .. })
        ));
        assert!(GridSpec::new(3, 20, 0.1, Boundary::Periodic).is_ok());
    }

    #[test]
    fn lp_of_zero_and_constant() {
        let g = g1(8, 0.125);
        let z = Field::zeros(g);
        assert_eq!(lp_quasinorm(&z, 0.7).unwrap(), 0.0);
        let one = Field::constant(g, 1.0).unwrap();
        // Σ 1 · h = N·h = 1
        assert!((lp_quasinorm(&one, 1.0).unwrap() - 1.0).abs() < 1e-14);
    }

    #[test]
    fn lp_matches_direct_sum() {
        let g = g1(64, 1.0 / 64.0);
        let f = Field::from_fn(g, |p| ((p[0] * 37 + 11) % 17) as f64 / 7.0 - 1.0).unwrap();
        let p = 2.0;
        let direct: f64 = (0..64).map(|i| f.values()[i].abs().powi(2) * (1.0 / 64.0)).sum();
        let direct = direct.sqrt();
        let got = lp_quasinorm(&f, p).unwrap();
        assert!((got - direct).abs() <= 1e-12 * direct.max(1.0));
    }

    #[test]
    fn lp_rejects_bad_p() {
        let g = g1(8, 1.0);
        let f = Field::zeros(g);
        assert!(lp_quasinorm(&f, 0.0).is_err());
        assert!(lp_quasinorm(&f, -1.0).is_err());
    }

    #[test]
    fn field_rejects_non_finite() {
        let g = g1(8, 1.0);
        let mut v = Array1::zeros(8);
        v[3] = f64::NAN;
        assert!(matches!(Field::new(g, v), Err(Error::NonFinite)));
    }

    #[test]
    fn distance_cases() {
        let g = g1(8, 1.0);
        assert_eq!(g.distance([3, 0, 0], [3, 0, 0]), 0.0);
        // wraparound: 0 to 7 is one step on the torus
        assert_eq!(g.distance([0, 0, 0], [7, 0, 0]), 1.0);
        let g2 = GridSpec::new(2, 16, 0.5, Boundary::Dirichlet).unwrap();
        // 3-4-5 triangle in units of h
        assert!((g2.distance([0, 0, 0], [3, 4, 0]) - 5.0 * 0.5).abs() < 1e-15);
    }

    #[test]
    fn ball_points_cases() {
        let g = g1(16, 1.0);
        assert!(g.ball_points([4, 0, 0], 0.0).is_empty());
        assert_eq!(g.ball_points([4, 0, 0], 0.5), vec![[4, 0, 0]]);
        // radius 2.5h in 1D → 5 points; cross-check by scanning every point
        let pts = g.ball_points([4, 0, 0], 2.5);
        assert_eq!(pts.len(), 5);
        let brute: Vec<Point> = (0..16)
            .map(|i| [i, 0, 0])
            .filter(|&p| g.distance([4, 0, 0], p) < 2.5)
            .collect();
        let mut got = pts.clone();
        got.sort();
        let mut want = brute;
        want.sort();
        assert_eq!(got, want);
    }

    #[test]
    fn ball_monotone_in_radius() {
        let g = GridSpec::new(2, 12, 1.0, Boundary::Periodic).unwrap();
        for (r1, r2) in [(0.5, 1.5), (1.5, 3.2), (3.2, 5.9)] {
            let b1 = g.ball_points([5, 7, 0], r1);
            let b2 = g.ball_points([5, 7, 0], r2);
            for p in &b1 {
                assert!(b2.contains(p));
            }
        }
    }

    #[test]
    fn ball_covers_whole_torus_at_large_radius() {
        let g = g1(8, 1.0);
        let pts = g.ball_points([0, 0, 0], 100.0);
        assert_eq!(pts.len(), 8);
    }

    #[test]
    fn cube_membership_and_dilate() {
        let g = g1(16, 1.0);
        let q = Cube::new(&g, [4, 0, 0], 4);
        for i in 4..8 {
            assert!(q.contains(&g, [i, 0, 0]));
        }
        assert!(!q.contains(&g, [8, 0, 0]));
        // every point of Q is in kQ for all k >= 1
        for k in [1.0, 1.5, 3.0, 30.0] {
            let kq = q.dilate(k);
            for p in q.points(&g) {
                assert!(kq.contains(&g, p), "k={k} should contain {p:?}");
            }
        }
        // 3Q around center 5.5 has half-side 6: lattice points 0..=11
        let kq = q.dilate(3.0);
        assert!(kq.contains(&g, [0, 0, 0]));
        assert!(kq.contains(&g, [11, 0, 0]));
        assert!(!kq.contains(&g, [12, 0, 0]));
        assert!(!kq.contains(&g, [15, 0, 0]));
    }

    #[test]
    fn periodic_cube_wraps() {
        let g = g1(8, 1.0);
        let q = Cube::new(&g, [6, 0, 0], 4); // covers 6,7,0,1
        assert!(q.contains(&g, [0, 0, 0]));
        assert!(q.contains(&g, [7, 0, 0]));
        assert!(!q.contains(&g, [2, 0, 0]));
    }
}
