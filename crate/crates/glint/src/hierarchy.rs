//! Acceleration structures: a least-squares cluster quadtree and a min-max
//! quadtree of normal-space bounding boxes, both perfectly balanced and
//! stored as mip pyramids.
//!
//! A cluster node at level `l` approximates the `2^l x 2^l` sub-grid below
//! it with a single cell of two triangles. Its four corner normals minimize
//! the inverse-Jacobian-weighted L2 distance to the leaf interpolation; the
//! stored residual is the square root of that objective at the solution.
//! Nodes whose residual passes `e <= r_x * r_y * tau` form the per-query cut.
//!
//! Min-max boxes bound every leaf normal triangle below a node, the node's
//! own cluster corners, and the replacement triangles that clamping would
//! substitute, so pruning never drops an intersection.

use crate::field::{Half, NormalField, NormalTriangle};
use crate::kernel::FootprintQuery;
use crate::math::{lit, solve_sym_pinv, Vec2};
use crate::pndf::{effective_triangle, ClampPolicy};
use crate::{Error, Float, Result};
use rayon::prelude::*;
use std::io::{Read, Write};
use std::path::Path;

/// Build-time options. `clamp_weights` applies the Jacobian clamp inside the
/// least-squares weights as well (the default); the raw variant only guards
/// against division by zero.
#[derive(Debug, Clone, Copy)]
pub struct BuildParams<T> {
    pub epsilon: T,
    pub clamp_weights: bool,
}

impl<T: Float> Default for BuildParams<T> {
    fn default() -> Self {
        BuildParams {
            epsilon: lit(1e-6),
            clamp_weights: true,
        }
    }
}

#[derive(Debug, Clone)]
pub struct ClusterLevel<T> {
    pub width: usize,
    pub height: usize,
    pub corners: Vec<[Vec2<T>; 4]>,
    pub residuals: Vec<T>,
}

impl<T: Float> ClusterLevel<T> {
    #[inline]
    fn index(&self, i: i64, j: i64) -> usize {
        let i = i.rem_euclid(self.width as i64) as usize;
        let j = j.rem_euclid(self.height as i64) as usize;
        j * self.width + i
    }
}

/// Mip pyramid of cluster nodes; level 0 mirrors the texel grid with zero
/// residuals.
#[derive(Debug, Clone)]
pub struct ClusterHierarchy<T> {
    pub levels: Vec<ClusterLevel<T>>,
}

impl<T: Float> ClusterHierarchy<T> {
    #[inline]
    pub fn depth(&self) -> usize {
        self.levels.len() - 1
    }

    #[inline]
    pub fn corners(&self, level: usize, i: i64, j: i64) -> [Vec2<T>; 4] {
        let lv = &self.levels[level];
        lv.corners[lv.index(i, j)]
    }

    #[inline]
    pub fn residual(&self, level: usize, i: i64, j: i64) -> T {
        let lv = &self.levels[level];
        lv.residuals[lv.index(i, j)]
    }

    /// Cluster triangle of a node, with unwrapped spatial vertices in texel
    /// units.
    pub fn node_triangle(&self, level: usize, i: i64, j: i64, half: Half) -> NormalTriangle<T> {
        let [n0, n1, n2, n3] = self.corners(level, i, j);
        let a = lit::<T>((1u64 << level) as f64);
        let x = lit::<T>(i as f64) * a;
        let y = lit::<T>(j as f64) * a;
        let u0 = Vec2::new(x, y);
        let u1 = Vec2::new(x + a, y);
        let u2 = Vec2::new(x, y + a);
        let u3 = Vec2::new(x + a, y + a);
        match half {
            Half::Upper => NormalTriangle::new([u0, u1, u2], [n0, n1, n2]),
            Half::Lower => NormalTriangle::new([u3, u2, u1], [n3, n2, n1]),
        }
    }
}

#[derive(Debug, Clone)]
pub struct MinMaxLevel<T> {
    pub width: usize,
    pub height: usize,
    pub min: Vec<Vec2<T>>,
    pub max: Vec<Vec2<T>>,
}

/// Mip pyramid of normal-space bounding boxes.
#[derive(Debug, Clone)]
pub struct MinMaxHierarchy<T> {
    pub levels: Vec<MinMaxLevel<T>>,
}

impl<T: Float> MinMaxHierarchy<T> {
    #[inline]
    pub fn aabb(&self, level: usize, i: i64, j: i64) -> (Vec2<T>, Vec2<T>) {
        let lv = &self.levels[level];
        let i = i.rem_euclid(lv.width as i64) as usize;
        let j = j.rem_euclid(lv.height as i64) as usize;
        let k = j * lv.width + i;
        (lv.min[k], lv.max[k])
    }
}

/// Both pyramids plus the clamp threshold they were built with.
#[derive(Debug, Clone)]
pub struct Hierarchy<T> {
    pub clusters: ClusterHierarchy<T>,
    pub minmax: MinMaxHierarchy<T>,
    pub epsilon: T,
}

impl<T: Float> Hierarchy<T> {
    #[inline]
    pub fn depth(&self) -> usize {
        self.clusters.depth()
    }

    pub fn node_count(&self) -> usize {
        self.clusters.levels.iter().map(|l| l.corners.len()).sum()
    }

    /// Re-point the leaf level at the field's texels. Level 0 aliases the
    /// original normals by definition; a cache round-trip must not leave it
    /// quantized when the source field is available.
    pub fn alias_leaf_corners(&mut self, field: &NormalField<T>) -> crate::Result<()> {
        let lv = &mut self.clusters.levels[0];
        if lv.width != field.width() || lv.height != field.height() {
            return Err(crate::Error::Format(format!(
                "hierarchy is {}x{} but the map is {}x{}",
                lv.width,
                lv.height,
                field.width(),
                field.height()
            )));
        }
        for j in 0..lv.height as i64 {
            for i in 0..lv.width as i64 {
                lv.corners[j as usize * lv.width + i as usize] = field.cell_corners(i, j);
            }
        }
        Ok(())
    }
}

/// Borrowed hierarchy plus the cut threshold for one query.
#[derive(Debug, Clone, Copy)]
pub struct HierRef<'a, T> {
    pub hier: &'a Hierarchy<T>,
    pub tau: T,
}

/// Level the traversal starts at: `ceil(log2 max(r_x, r_y))`, at least 0.
/// Callers clamp to the pyramid depth.
pub fn entry_level<T: Float>(half_extent: Vec2<T>) -> usize {
    let r = half_extent
        .x
        .to_f64()
        .unwrap()
        .max(half_extent.y.to_f64().unwrap());
    let l = r.log2().ceil();
    if l <= 0.0 {
        0
    } else {
        l as usize
    }
}

// ---------------------------------------------------------------------------
// Least-squares assembly
// ---------------------------------------------------------------------------

/// Per-component normal equations of a cluster node. The gradient of the
/// weighted-L2 objective at stacked corner values `v` is `a * v + b` (the
/// same 4x4 `a` acts on both normal components); `c` is the constant term,
/// so the objective itself is `v^T a v / 2 + b . v + c` per component.
#[derive(Debug, Clone)]
pub struct NormalEquations<T> {
    pub a: [[T; 4]; 4],
    pub b: [Vec2<T>; 4],
    pub c: Vec2<T>,
}

#[derive(Clone, Copy)]
enum PieceCase {
    UpperInUpper,
    UpperInLower,
    LowerInUpper,
    LowerInLower,
}

/// Closed-form contribution of one leaf half-cell at local coordinates
/// `(i, j)` of a cluster with side `a`: the unweighted Hessian block and the
/// linear-term coefficients of the four cell texel normals.
fn piece_coeffs(case: PieceCase, a: f64, i: f64, j: f64) -> ([[f64; 4]; 4], [[f64; 4]; 4]) {
    let a2 = a * a;
    let mut m = [[0.0f64; 4]; 4];
    let mut b = [[0.0f64; 4]; 4];
    match case {
        PieceCase::UpperInUpper => {
            m[0][0] = (6.0 * a2 - 4.0 * a * (3.0 * i + 3.0 * j + 2.0)
                + 6.0 * i * i
                + 12.0 * i * j
                + 8.0 * i
                + 6.0 * j * j
                + 8.0 * j
                + 3.0)
                / (6.0 * a2);
            m[0][1] = (a * (3.0 * i + 1.0) / 3.0 - i * i - i * j - i - j / 3.0 - 0.25) / a2;
            m[0][2] = (a * (3.0 * j + 1.0) / 3.0 - i * j - i / 3.0 - j * j - j - 0.25) / a2;
            m[1][1] = (6.0 * i * i + 4.0 * i + 1.0) / (6.0 * a2);
            m[1][2] = (i * j + i / 3.0 + j / 3.0 + 1.0 / 12.0) / a2;
            m[2][2] = (6.0 * j * j + 4.0 * j + 1.0) / (6.0 * a2);
            let s = -4.0 * a + 4.0 * i + 4.0 * j + 3.0;
            b[0] = [2.0 * (-2.0 * a + 2.0 * i + 2.0 * j + 1.0), s, s, 0.0];
            b[1] = [-(4.0 * i + 1.0), -2.0 * (2.0 * i + 1.0), -(4.0 * i + 1.0), 0.0];
            b[2] = [-(4.0 * j + 1.0), -(4.0 * j + 1.0), -2.0 * (2.0 * j + 1.0), 0.0];
        }
        PieceCase::UpperInLower => {
            m[1][1] = (6.0 * a2 - 12.0 * a * j - 4.0 * a + 6.0 * j * j + 4.0 * j + 1.0) / (6.0 * a2);
            m[1][2] = (a2 - a * (3.0 * i + 3.0 * j + 2.0) / 3.0 + i * j + i / 3.0 + j / 3.0
                + 1.0 / 12.0)
                / a2;
            m[2][2] = (6.0 * a2 - 12.0 * a * i - 4.0 * a + 6.0 * i * i + 4.0 * i + 1.0) / (6.0 * a2);
            m[1][3] =
                (-a2 + a * (i + 2.0 * j + 1.0) - i * j - i / 3.0 - j * j - j - 0.25) / a2;
            m[2][3] =
                (-a2 + a * (2.0 * i + j + 1.0) - i * i - i * j - i - j / 3.0 - 0.25) / a2;
            m[3][3] = (6.0 * a2 - 4.0 * a * (3.0 * i + 3.0 * j + 2.0)
                + 6.0 * i * i
                + 12.0 * i * j
                + 8.0 * i
                + 6.0 * j * j
                + 8.0 * j
                + 3.0)
                / (6.0 * a2);
            let s = -4.0 * a + 4.0 * i + 4.0 * j + 3.0;
            b[1] = [
                -4.0 * a + 4.0 * j + 1.0,
                -4.0 * a + 4.0 * j + 1.0,
                2.0 * (-2.0 * a + 2.0 * j + 1.0),
                0.0,
            ];
            b[2] = [
                -4.0 * a + 4.0 * i + 1.0,
                2.0 * (-2.0 * a + 2.0 * i + 1.0),
                -4.0 * a + 4.0 * i + 1.0,
                0.0,
            ];
            b[3] = [-2.0 * (-2.0 * a + 2.0 * i + 2.0 * j + 1.0), -s, -s, 0.0];
        }
        PieceCase::LowerInUpper => {
            m[0][0] = (6.0 * a2 - 4.0 * a * (3.0 * i + 3.0 * j + 4.0)
                + 6.0 * i * i
                + 12.0 * i * j
                + 16.0 * i
                + 6.0 * j * j
                + 16.0 * j
                + 11.0)
                / (6.0 * a2);
            m[0][1] = (a * (3.0 * i + 2.0) / 3.0 - i * i - i * j - 2.0 * i - 2.0 * j / 3.0
                - 11.0 / 12.0)
                / a2;
            m[0][2] = (a * (3.0 * j + 2.0) / 3.0 - i * j - 2.0 * i / 3.0 - j * j - 2.0 * j
                - 11.0 / 12.0)
                / a2;
            m[1][1] = (6.0 * i * i + 8.0 * i + 3.0) / (6.0 * a2);
            m[1][2] = (12.0 * i * j + 8.0 * i + 8.0 * j + 5.0) / (12.0 * a2);
            m[2][2] = (6.0 * j * j + 8.0 * j + 3.0) / (6.0 * a2);
            let s = -4.0 * a + 4.0 * i + 4.0 * j + 5.0;
            b[0] = [0.0, s, s, 2.0 * (-2.0 * a + 2.0 * i + 2.0 * j + 3.0)];
            b[1] = [0.0, -(4.0 * i + 3.0), -2.0 * (2.0 * i + 1.0), -(4.0 * i + 3.0)];
            b[2] = [0.0, -2.0 * (2.0 * j + 1.0), -(4.0 * j + 3.0), -(4.0 * j + 3.0)];
        }
        PieceCase::LowerInLower => {
            m[1][1] = (6.0 * a2 - 12.0 * a * j - 8.0 * a + 6.0 * j * j + 8.0 * j + 3.0) / (6.0 * a2);
            m[1][2] = (12.0 * a2 - 4.0 * a * (3.0 * i + 3.0 * j + 4.0)
                + 12.0 * i * j
                + 8.0 * i
                + 8.0 * j
                + 5.0)
                / (12.0 * a2);
            m[2][2] = (6.0 * a2 - 12.0 * a * i - 8.0 * a + 6.0 * i * i + 8.0 * i + 3.0) / (6.0 * a2);
            m[1][3] = (-a2 + a * (i + 2.0 * j + 2.0) - i * j - 2.0 * i / 3.0 - j * j - 2.0 * j
                - 11.0 / 12.0)
                / a2;
            m[2][3] = (-a2 + a * (2.0 * i + j + 2.0) - i * i - i * j - 2.0 * i - 2.0 * j / 3.0
                - 11.0 / 12.0)
                / a2;
            m[3][3] = (6.0 * a2 - 4.0 * a * (3.0 * i + 3.0 * j + 4.0)
                + 6.0 * i * i
                + 12.0 * i * j
                + 16.0 * i
                + 6.0 * j * j
                + 16.0 * j
                + 11.0)
                / (6.0 * a2);
            let s = -4.0 * a + 4.0 * i + 4.0 * j + 5.0;
            b[1] = [
                0.0,
                2.0 * (-2.0 * a + 2.0 * j + 1.0),
                -4.0 * a + 4.0 * j + 3.0,
                -4.0 * a + 4.0 * j + 3.0,
            ];
            b[2] = [
                0.0,
                -4.0 * a + 4.0 * i + 3.0,
                2.0 * (-2.0 * a + 2.0 * i + 1.0),
                -4.0 * a + 4.0 * i + 3.0,
            ];
            b[3] = [0.0, -s, -s, -2.0 * (-2.0 * a + 2.0 * i + 2.0 * j + 3.0)];
        }
    }
    // mirror the upper triangle; the linear coefficients share a 1/(12a)
    #[allow(clippy::needless_range_loop)]
    for r in 0..4 {
        for c in 0..r {
            m[r][c] = m[c][r];
        }
        for v in &mut b[r] {
            *v /= 12.0 * a;
        }
    }
    (m, b)
}

/// Constant objective term of one leaf half: integral of the squared linear
/// interpolant over a triangle of area 1/2, from its vertex values.
fn piece_constant<T: Float>(vals: [Vec2<T>; 3]) -> Vec2<T> {
    let twelfth = lit::<T>(1.0 / 12.0);
    let comp = |f0: T, f1: T, f2: T| (f0 * f0 + f1 * f1 + f2 * f2 + f0 * f1 + f0 * f2 + f1 * f2) * twelfth;
    Vec2::new(
        comp(vals[0].x, vals[1].x, vals[2].x),
        comp(vals[0].y, vals[1].y, vals[2].y),
    )
}

/// Assemble the normal equations of the cluster node `(i, j)` at `level`,
/// summing the closed-form per-cell contributions weighted by the inverse
/// (clamped) leaf Jacobians.
pub fn assemble_normal_equations<T: Float>(
    field: &NormalField<T>,
    level: usize,
    cell: (i64, i64),
    params: BuildParams<T>,
) -> NormalEquations<T> {
    assert!(level >= 1, "leaf nodes are not assembled");
    let a_side = 1i64 << level;
    let af = a_side as f64;
    let base_i = cell.0 * a_side;
    let base_j = cell.1 * a_side;
    let mut a = [[T::zero(); 4]; 4];
    let mut b = [Vec2::<T>::zero(); 4];
    let mut c = Vec2::<T>::zero();
    let eps = params.epsilon;
    let floor_w = if params.clamp_weights {
        eps
    } else {
        T::min_positive_value()
    };
    for lj in 0..a_side {
        for li in 0..a_side {
            let corners = field.cell_corners(base_i + li, base_j + lj);
            let [n0, n1, n2, n3] = corners;
            for half in [Half::Upper, Half::Lower] {
                let (vals, case) = match half {
                    Half::Upper => (
                        [n0, n1, n2],
                        if li + lj < a_side {
                            PieceCase::UpperInUpper
                        } else {
                            PieceCase::UpperInLower
                        },
                    ),
                    Half::Lower => (
                        [n3, n2, n1],
                        if li + lj <= a_side - 2 {
                            PieceCase::LowerInUpper
                        } else {
                            PieceCase::LowerInLower
                        },
                    ),
                };
                let area2 = (vals[2] - vals[0]).cross(vals[1] - vals[0]).abs();
                let w = T::one() / area2.max(floor_w);
                let (ma, mb) = piece_coeffs(case, af, li as f64, lj as f64);
                for r in 0..4 {
                    for cc in 0..4 {
                        a[r][cc] = a[r][cc] + lit::<T>(ma[r][cc]) * w;
                    }
                    let mut acc = Vec2::<T>::zero();
                    for (t, n) in corners.iter().enumerate() {
                        acc += *n * lit::<T>(mb[r][t]);
                    }
                    b[r] += acc * w;
                }
                c += piece_constant(vals) * w;
            }
        }
    }
    NormalEquations { a, b, c }
}

/// Least-squares corner normals. Singular systems fall back to the
/// pseudo-inverse.
pub fn solve_cluster_normals<T: Float>(eq: &NormalEquations<T>) -> [Vec2<T>; 4] {
    let tol = lit::<T>(1e-12);
    let bx = [eq.b[0].x, eq.b[1].x, eq.b[2].x, eq.b[3].x];
    let by = [eq.b[0].y, eq.b[1].y, eq.b[2].y, eq.b[3].y];
    let neg = |v: [T; 4]| [-v[0], -v[1], -v[2], -v[3]];
    let vx = solve_sym_pinv(eq.a, neg(bx), tol);
    let vy = solve_sym_pinv(eq.a, neg(by), tol);
    [
        Vec2::new(vx[0], vy[0]),
        Vec2::new(vx[1], vy[1]),
        Vec2::new(vx[2], vy[2]),
        Vec2::new(vx[3], vy[3]),
    ]
}

/// Objective value at solved corner normals, as the sum of per-triangle
/// integrals of the squared difference field.
///
/// Over each leaf half both interpolants are linear, so the integrand is the
/// square of a linear function of the vertex differences; forming the
/// differences first keeps the affine-field residual at roundoff instead of
/// losing it to cancellation between the quadratic's large terms.
pub fn cluster_residual<T: Float>(
    field: &NormalField<T>,
    level: usize,
    cell: (i64, i64),
    corners: &[Vec2<T>; 4],
    params: BuildParams<T>,
) -> T {
    let a_side = 1i64 << level;
    let inv_a = T::one() / lit::<T>(a_side as f64);
    let base_i = cell.0 * a_side;
    let base_j = cell.1 * a_side;
    let eps = params.epsilon;
    let floor_w = if params.clamp_weights {
        eps
    } else {
        T::min_positive_value()
    };
    let cluster_at = |x: T, y: T| {
        crate::field::interpolate_corners(
            corners[0], corners[1], corners[2], corners[3], x * inv_a, y * inv_a,
        )
    };
    let twelfth = lit::<T>(1.0 / 12.0);
    let mut total = T::zero();
    for lj in 0..a_side {
        for li in 0..a_side {
            let [n0, n1, n2, n3] = field.cell_corners(base_i + li, base_j + lj);
            let x = lit::<T>(li as f64);
            let y = lit::<T>(lj as f64);
            let one = T::one();
            for half in [Half::Upper, Half::Lower] {
                let (vals, verts) = match half {
                    Half::Upper => ([n0, n1, n2], [(x, y), (x + one, y), (x, y + one)]),
                    Half::Lower => (
                        [n3, n2, n1],
                        [(x + one, y + one), (x, y + one), (x + one, y)],
                    ),
                };
                let area2 = (vals[2] - vals[0]).cross(vals[1] - vals[0]).abs();
                let w = T::one() / area2.max(floor_w);
                let d: Vec<Vec2<T>> = vals
                    .iter()
                    .zip(verts.iter())
                    .map(|(v, &(vx, vy))| cluster_at(vx, vy) - *v)
                    .collect();
                let comp = |f0: T, f1: T, f2: T| {
                    (f0 * f0 + f1 * f1 + f2 * f2 + f0 * f1 + f0 * f2 + f1 * f2) * twelfth
                };
                total = total
                    + (comp(d[0].x, d[1].x, d[2].x) + comp(d[0].y, d[1].y, d[2].y)) * w;
            }
        }
    }
    total.max(T::zero()).sqrt()
}

/// Build the cluster pyramid bottom level first; level 0 copies the texel
/// corners with zero residual. Nodes within a level are independent.
pub fn build_clusters<T: Float>(field: &NormalField<T>, params: BuildParams<T>) -> ClusterHierarchy<T> {
    let depth = (field.width().min(field.height())).trailing_zeros() as usize;
    let mut levels = Vec::with_capacity(depth + 1);
    let (w0, h0) = (field.width(), field.height());
    let mut corners = Vec::with_capacity(w0 * h0);
    for j in 0..h0 as i64 {
        for i in 0..w0 as i64 {
            corners.push(field.cell_corners(i, j));
        }
    }
    levels.push(ClusterLevel {
        width: w0,
        height: h0,
        corners,
        residuals: vec![T::zero(); w0 * h0],
    });
    for level in 1..=depth {
        let w = w0 >> level;
        let h = h0 >> level;
        let solved: Vec<([Vec2<T>; 4], T)> = (0..w * h)
            .into_par_iter()
            .map(|k| {
                let (i, j) = ((k % w) as i64, (k / w) as i64);
                let eq = assemble_normal_equations(field, level, (i, j), params);
                let corners = solve_cluster_normals(&eq);
                let e = cluster_residual(field, level, (i, j), &corners, params);
                (corners, e)
            })
            .collect();
        levels.push(ClusterLevel {
            width: w,
            height: h,
            corners: solved.iter().map(|s| s.0).collect(),
            residuals: solved.iter().map(|s| s.1).collect(),
        });
    }
    ClusterHierarchy { levels }
}

fn grow<T: Float>(min: &mut Vec2<T>, max: &mut Vec2<T>, p: Vec2<T>) {
    min.x = min.x.min(p.x);
    min.y = min.y.min(p.y);
    max.x = max.x.max(p.x);
    max.y = max.y.max(p.y);
}

/// Bound the raw and effective (possibly replaced) triangles of one node.
fn node_bounds<T: Float>(
    clusters: &ClusterHierarchy<T>,
    level: usize,
    i: i64,
    j: i64,
    policy: ClampPolicy<T>,
) -> (Vec2<T>, Vec2<T>) {
    let big = T::max_value();
    let mut bb_min = Vec2::new(big, big);
    let mut bb_max = Vec2::new(-big, -big);
    for half in [Half::Upper, Half::Lower] {
        let tri = clusters.node_triangle(level, i, j, half);
        for n in tri.normals {
            grow(&mut bb_min, &mut bb_max, n);
        }
        let eff = effective_triangle(&tri, policy);
        for n in eff.normals {
            grow(&mut bb_min, &mut bb_max, n);
        }
    }
    (bb_min, bb_max)
}

/// Build the min-max pyramid over an existing cluster pyramid (the boxes
/// must contain the cluster corner normals, so clusters come first).
pub fn build_minmax<T: Float>(
    clusters: &ClusterHierarchy<T>,
    epsilon: T,
) -> MinMaxHierarchy<T> {
    let policy = ClampPolicy { epsilon };
    let depth = clusters.depth();
    let mut levels: Vec<MinMaxLevel<T>> = Vec::with_capacity(depth + 1);
    for level in 0..=depth {
        let w = clusters.levels[level].width;
        let h = clusters.levels[level].height;
        let prev = levels.last();
        let boxes: Vec<(Vec2<T>, Vec2<T>)> = (0..w * h)
            .into_par_iter()
            .map(|k| {
                let (i, j) = ((k % w) as i64, (k / w) as i64);
                let (mut lo, mut hi) = node_bounds(clusters, level, i, j, policy);
                if let Some(children) = prev {
                    for dj in 0..2i64 {
                        for di in 0..2i64 {
                            let ci = (2 * i + di).rem_euclid(children.width as i64) as usize;
                            let cj = (2 * j + dj).rem_euclid(children.height as i64) as usize;
                            let ck = cj * children.width + ci;
                            grow(&mut lo, &mut hi, children.min[ck]);
                            grow(&mut lo, &mut hi, children.max[ck]);
                        }
                    }
                }
                (lo, hi)
            })
            .collect();
        levels.push(MinMaxLevel {
            width: w,
            height: h,
            min: boxes.iter().map(|b| b.0).collect(),
            max: boxes.iter().map(|b| b.1).collect(),
        });
    }
    MinMaxHierarchy { levels }
}

/// Build both pyramids.
pub fn build<T: Float>(field: &NormalField<T>, params: BuildParams<T>) -> Hierarchy<T> {
    let clusters = build_clusters(field, params);
    let minmax = build_minmax(&clusters, params.epsilon);
    Hierarchy {
        clusters,
        minmax,
        epsilon: params.epsilon,
    }
}

// ---------------------------------------------------------------------------
// Cut selection
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CutNode {
    pub level: usize,
    pub i: i64,
    pub j: i64,
}

/// Frontier of nodes used for one query: disjoint, covering the kernel
/// support, each either a leaf or passing the residual criterion.
#[derive(Debug, Clone)]
pub struct Cut {
    pub nodes: Vec<CutNode>,
}

/// Strict overlap between a node's spatial box and the kernel support;
/// touching at the boundary does not count, matching the brute-force cell
/// range.
#[inline]
pub(crate) fn overlaps_support<T: Float>(level: usize, i: i64, j: i64, q: &FootprintQuery<T>) -> bool {
    let a = (1u64 << level) as f64;
    let lo_x = i as f64 * a;
    let lo_y = j as f64 * a;
    let cx = q.center.x.to_f64().unwrap();
    let cy = q.center.y.to_f64().unwrap();
    let rx = q.half_extent.x.to_f64().unwrap();
    let ry = q.half_extent.y.to_f64().unwrap();
    lo_x < cx + rx && lo_x + a > cx - rx && lo_y < cy + ry && lo_y + a > cy - ry
}

/// Entry-level cell range of a query (inclusive, unwrapped).
pub(crate) fn entry_range<T: Float>(level: usize, q: &FootprintQuery<T>) -> (i64, i64, i64, i64) {
    let a = (1u64 << level) as f64;
    let cx = q.center.x.to_f64().unwrap();
    let cy = q.center.y.to_f64().unwrap();
    let rx = q.half_extent.x.to_f64().unwrap();
    let ry = q.half_extent.y.to_f64().unwrap();
    let i0 = ((cx - rx) / a).floor() as i64;
    let i1 = (((cx + rx) / a).ceil() as i64 - 1).max(i0);
    let j0 = ((cy - ry) / a).floor() as i64;
    let j1 = (((cy + ry) / a).ceil() as i64 - 1).max(j0);
    (i0, i1, j0, j1)
}

/// Descend from the entry level over support-overlapping cells until the
/// residual criterion (or level 0) is met. Deterministic for fixed inputs.
pub fn select_cut<T: Float>(hier: &Hierarchy<T>, q: &FootprintQuery<T>, tau: T) -> Cut {
    let depth = hier.depth();
    let entry = entry_level(q.half_extent).min(depth);
    let thresh = q.half_extent.x * q.half_extent.y * tau;
    let mut nodes = Vec::new();
    let (i0, i1, j0, j1) = entry_range(entry, q);
    for j in j0..=j1 {
        for i in i0..=i1 {
            descend(hier, entry, i, j, q, thresh, &mut nodes);
        }
    }
    Cut { nodes }
}

fn descend<T: Float>(
    hier: &Hierarchy<T>,
    level: usize,
    i: i64,
    j: i64,
    q: &FootprintQuery<T>,
    thresh: T,
    out: &mut Vec<CutNode>,
) {
    if !overlaps_support(level, i, j, q) {
        return;
    }
    if level == 0 || hier.clusters.residual(level, i, j) <= thresh {
        out.push(CutNode { level, i, j });
        return;
    }
    let l = level - 1;
    for dj in 0..2 {
        for di in 0..2 {
            descend(hier, l, 2 * i + di, 2 * j + dj, q, thresh, out);
        }
    }
}

/// Cluster triangles of the cut nodes whose min-max box contains `m`.
/// Conservative: no triangle whose normal triangle contains `m` is skipped.
pub fn candidates<'a, T: Float>(
    hier: &'a Hierarchy<T>,
    cut: &'a Cut,
    m: Vec2<T>,
) -> impl Iterator<Item = (NormalTriangle<T>, usize)> + 'a {
    let tol = lit::<T>(1e-9);
    cut.nodes
        .iter()
        .filter(move |n| {
            let (lo, hi) = hier.minmax.aabb(n.level, n.i, n.j);
            m.x >= lo.x - tol && m.x <= hi.x + tol && m.y >= lo.y - tol && m.y <= hi.y + tol
        })
        .flat_map(move |n| {
            [Half::Upper, Half::Lower].into_iter().map(move |h| {
                (
                    hier.clusters.node_triangle(n.level, n.i, n.j, h),
                    n.level,
                )
            })
        })
}

// ---------------------------------------------------------------------------
// Cache file
// ---------------------------------------------------------------------------

const CACHE_MAGIC: &[u8; 5] = b"PNMH1";
const CACHE_VERSION: u32 = 1;

/// Serialize both pyramids: magic, header (width, height, epsilon, version),
/// then per level, per node: box min/max, the four corner normals and the
/// residual as little-endian f32.
pub fn write_cache<T: Float>(hier: &Hierarchy<T>, path: &Path) -> Result<()> {
    let w = hier.clusters.levels[0].width;
    let h = hier.clusters.levels[0].height;
    let mut buf: Vec<u8> = Vec::with_capacity(21 + hier.node_count() * 13 * 4);
    buf.extend_from_slice(CACHE_MAGIC);
    buf.extend_from_slice(&(w as u32).to_le_bytes());
    buf.extend_from_slice(&(h as u32).to_le_bytes());
    buf.extend_from_slice(&(hier.epsilon.to_f64().unwrap() as f32).to_le_bytes());
    buf.extend_from_slice(&CACHE_VERSION.to_le_bytes());
    // box bounds round outward so the stored boxes stay conservative;
    // values already representable in f32 are unchanged (idempotent write)
    let down = |v: T| {
        let f = v.to_f64().unwrap() as f32;
        if (f as f64) > v.to_f64().unwrap() {
            if f == 0.0 {
                -f32::from_bits(1)
            } else if f > 0.0 {
                f32::from_bits(f.to_bits() - 1)
            } else {
                f32::from_bits(f.to_bits() + 1)
            }
        } else {
            f
        }
    };
    let up = |v: T| {
        let f = v.to_f64().unwrap() as f32;
        if (f as f64) < v.to_f64().unwrap() {
            if f == 0.0 {
                f32::from_bits(1)
            } else if f > 0.0 {
                f32::from_bits(f.to_bits() + 1)
            } else {
                f32::from_bits(f.to_bits() - 1)
            }
        } else {
            f
        }
    };
    let mut put_f32 = |v: f32| buf.extend_from_slice(&v.to_le_bytes());
    for level in 0..=hier.depth() {
        let cl = &hier.clusters.levels[level];
        let mm = &hier.minmax.levels[level];
        for k in 0..cl.corners.len() {
            put_f32(down(mm.min[k].x));
            put_f32(down(mm.min[k].y));
            put_f32(up(mm.max[k].x));
            put_f32(up(mm.max[k].y));
            for c in cl.corners[k] {
                put_f32(c.x.to_f64().unwrap() as f32);
                put_f32(c.y.to_f64().unwrap() as f32);
            }
            put_f32(cl.residuals[k].to_f64().unwrap() as f32);
        }
    }
    let mut f = std::fs::File::create(path)?;
    f.write_all(&buf)?;
    Ok(())
}

/// Load a cache written by `write_cache`, converting to the working scalar.
pub fn read_cache<T: Float>(path: &Path) -> Result<Hierarchy<T>> {
    let mut bytes = Vec::new();
    std::fs::File::open(path)?.read_to_end(&mut bytes)?;
    if bytes.len() < 21 || &bytes[0..5] != CACHE_MAGIC {
        return Err(Error::Format("not a PNMH1 hierarchy cache".into()));
    }
    let u32_at = |o: usize| u32::from_le_bytes(bytes[o..o + 4].try_into().unwrap());
    let w = u32_at(5) as usize;
    let h = u32_at(9) as usize;
    let epsilon = f32::from_le_bytes(bytes[13..17].try_into().unwrap());
    let version = u32_at(17);
    if version != CACHE_VERSION {
        return Err(Error::Format(format!("unsupported cache version {version}")));
    }
    if w < 2 || h < 2 || !w.is_power_of_two() || !h.is_power_of_two() {
        return Err(Error::Format(format!("bad cache dimensions {w}x{h}")));
    }
    let depth = w.min(h).trailing_zeros() as usize;
    let node_count: usize = (0..=depth).map(|l| (w >> l) * (h >> l)).sum();
    let expect = 21 + node_count * 13 * 4;
    if bytes.len() != expect {
        return Err(Error::Format(format!(
            "cache length {} does not match header (expected {expect})",
            bytes.len()
        )));
    }
    let mut off = 21usize;
    let mut next = || {
        let v = f32::from_le_bytes(bytes[off..off + 4].try_into().unwrap());
        off += 4;
        lit::<T>(v as f64)
    };
    let mut cluster_levels = Vec::with_capacity(depth + 1);
    let mut minmax_levels = Vec::with_capacity(depth + 1);
    for level in 0..=depth {
        let lw = w >> level;
        let lh = h >> level;
        let n = lw * lh;
        let mut corners = Vec::with_capacity(n);
        let mut residuals = Vec::with_capacity(n);
        let mut min = Vec::with_capacity(n);
        let mut max = Vec::with_capacity(n);
        for _ in 0..n {
            min.push(Vec2::new(next(), next()));
            max.push(Vec2::new(next(), next()));
            corners.push([
                Vec2::new(next(), next()),
                Vec2::new(next(), next()),
                Vec2::new(next(), next()),
                Vec2::new(next(), next()),
            ]);
            residuals.push(next());
        }
        cluster_levels.push(ClusterLevel {
            width: lw,
            height: lh,
            corners,
            residuals,
        });
        minmax_levels.push(MinMaxLevel {
            width: lw,
            height: lh,
            min,
            max,
        });
    }
    Ok(Hierarchy {
        clusters: ClusterHierarchy {
            levels: cluster_levels,
        },
        minmax: MinMaxHierarchy {
            levels: minmax_levels,
        },
        epsilon: lit::<T>(epsilon as f64),
    })
}
