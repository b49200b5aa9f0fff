//! Footprint normal-distribution evaluation and sampling.
//!
//! Evaluation sums, over every candidate triangle of the footprint, the
//! kernel density at the intersection's spatial point divided by the
//! (clamped) interpolation Jacobian. Near-degenerate normal triangles are
//! replaced by a small equilateral triangle so densities stay bounded;
//! sampling applies the matching warp so the sample distribution equals the
//! evaluated density, with or without the cluster hierarchy.

use crate::field::{
    interpolate_corners, signed_area2, split_coord, Half, NormalField, NormalTriangle,
};
use crate::hierarchy::{entry_level, HierRef};
use crate::kernel::FootprintQuery;
use crate::math::{lit, Vec2};
use crate::{Error, Float, Result};
use rand::Rng;
use rayon::prelude::*;

/// Barycentric inclusion tolerance; a hit on a shared edge is counted by
/// both triangles (measure zero).
const BARY_TOL: f64 = 1e-9;

/// Slack on min-max box tests so edge hits admitted by `BARY_TOL` are never
/// pruned.
const AABB_TOL: f64 = 1e-9;

/// Jacobian clamp threshold.
#[derive(Debug, Clone, Copy)]
pub struct ClampPolicy<T> {
    pub epsilon: T,
}

impl<T: Float> Default for ClampPolicy<T> {
    fn default() -> Self {
        ClampPolicy { epsilon: lit(1e-6) }
    }
}

/// Evaluation result plus work counters: `intersection_count` is the number
/// of triangles containing the queried normal, `candidates_tested` the
/// number of point-in-triangle tests that ran (after min-max pruning).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PndfValue<T> {
    pub density: T,
    pub intersection_count: usize,
    pub candidates_tested: usize,
}

/// Barycentric coordinates of `m` in the normal triangle, as signed-area
/// ratios. `Some` iff every coordinate is within `BARY_TOL` of `[0, 1]`.
pub fn intersect_normal_triangle<T: Float>(
    m: Vec2<T>,
    t: &NormalTriangle<T>,
) -> Option<(T, T, T)> {
    let [a, b, c] = t.normals;
    let area = t.signed_area;
    debug_assert!(area.abs() > T::zero(), "degenerate triangle must be replaced upstream");
    let l0 = signed_area2(m, b, c) / area;
    let l1 = signed_area2(a, m, c) / area;
    let l2 = signed_area2(a, b, m) / area;
    let tol = lit::<T>(BARY_TOL);
    let lo = -tol;
    let hi = T::one() + tol;
    if l0 >= lo && l0 <= hi && l1 >= lo && l1 <= hi && l2 >= lo && l2 <= hi {
        Some((l0, l1, l2))
    } else {
        None
    }
}

/// Vertices of the equilateral triangle of the given area, centered at the
/// origin with one vertex toward +y.
pub fn eqtri_vertices<T: Float>(area: T) -> [Vec2<T>; 3] {
    // circumradius R from area: A = (3*sqrt(3)/4) R^2
    let r = (lit::<T>(4.0) * area / (lit::<T>(3.0) * lit::<T>(3.0f64.sqrt()))).sqrt();
    let half = lit::<T>(0.5);
    let sx = r * lit::<T>(0.75f64.sqrt());
    [
        Vec2::new(T::zero(), r),
        Vec2::new(-sx, -r * half),
        Vec2::new(sx, -r * half),
    ]
}

/// If the triangle's Jacobian is at least epsilon it is returned unchanged;
/// otherwise an equilateral triangle with Jacobian exactly epsilon (area
/// epsilon times the spatial area), centered at the cell-center normal, takes
/// its place. Spatial vertices are kept.
pub fn effective_triangle<T: Float>(
    t: &NormalTriangle<T>,
    policy: ClampPolicy<T>,
) -> NormalTriangle<T> {
    if t.jacobian_det() >= policy.epsilon {
        return *t;
    }
    // both halves share the cell diagonal as vertices 1 and 2
    let center = (t.normals[1] + t.normals[2]) * lit(0.5);
    let area = policy.epsilon * t.spatial_area();
    let v = eqtri_vertices(area);
    NormalTriangle::new(t.spatial, [center + v[0], center + v[1], center + v[2]])
}

/// Map the unit square onto the equilateral triangle of the given area
/// centered at the origin: fold `(u, v) -> (1-u, 1-v)` when `u + v > 1`,
/// then send the unit right triangle through the fixed affine map. The
/// pushforward of a uniform square sample has constant density `1 / area`.
pub fn eqtri_warp<T: Float>(uv: Vec2<T>, area: T) -> Vec2<T> {
    debug_assert!(area > T::zero());
    let one = T::one();
    let (u, v) = if uv.x + uv.y > one {
        (one - uv.x, one - uv.y)
    } else {
        (uv.x, uv.y)
    };
    let w = eqtri_vertices(area);
    w[0] * (one - u - v) + w[1] * u + w[2] * v
}

#[derive(Debug, Clone, Copy)]
struct Hit<T> {
    level: u8,
    j: i64,
    i: i64,
    half: u8,
    value: T,
}

/// Shared accumulation: test one (effective) triangle and record the hit.
#[inline]
fn test_triangle<T: Float>(
    tri: &NormalTriangle<T>,
    q: &FootprintQuery<T>,
    m: Vec2<T>,
    policy: ClampPolicy<T>,
    key: (u8, i64, i64, u8),
    hits: &mut Vec<Hit<T>>,
    tested: &mut usize,
) {
    *tested += 1;
    let eff = effective_triangle(tri, policy);
    if let Some((l0, l1, l2)) = intersect_normal_triangle(m, &eff) {
        let p = eff.spatial[0] * l0 + eff.spatial[1] * l1 + eff.spatial[2] * l2;
        let det = eff.jacobian_det().max(policy.epsilon);
        hits.push(Hit {
            level: key.0,
            j: key.1,
            i: key.2,
            half: key.3,
            value: q.eval(p) / det,
        });
    }
}

/// Exact footprint NDF at `m` (projected-hemisphere density). With `accel`
/// the candidate triangles come from the residual-selected hierarchy cut,
/// pruned by the min-max boxes; otherwise every leaf triangle overlapping
/// the support is tested.
pub fn eval_pndf<T: Float>(
    field: &NormalField<T>,
    accel: Option<HierRef<'_, T>>,
    q: &FootprintQuery<T>,
    m: Vec2<T>,
    policy: ClampPolicy<T>,
) -> Result<PndfValue<T>> {
    if m.norm_sq() > T::one() + lit(1e-12) {
        return Err(Error::QueryOutsideDisk);
    }
    let mut hits: Vec<Hit<T>> = Vec::with_capacity(16);
    let mut tested = 0usize;
    match accel {
        None => {
            let (i0, i1, j0, j1) = q.cell_range();
            for j in j0..=j1 {
                for i in i0..=i1 {
                    for (hk, half) in [(0u8, Half::Upper), (1u8, Half::Lower)] {
                        let tri = field.triangle(crate::field::CellId { i, j, half });
                        test_triangle(&tri, q, m, policy, (0, j, i, hk), &mut hits, &mut tested);
                    }
                }
            }
        }
        Some(h) => {
            let depth = h.hier.depth();
            let le = entry_level(q.half_extent).min(depth);
            let (i0, i1, j0, j1) = crate::hierarchy::entry_range(le, q);
            let thresh = q.half_extent.x * q.half_extent.y * h.tau;
            let tol = lit::<T>(AABB_TOL);
            for j in j0..=j1 {
                for i in i0..=i1 {
                    visit_eval(&h, le, i, j, q, m, policy, thresh, tol, &mut hits, &mut tested);
                }
            }
        }
    }
    // deterministic summation order regardless of traversal
    hits.sort_by(|a, b| {
        (a.level, a.j, a.i, a.half)
            .partial_cmp(&(b.level, b.j, b.i, b.half))
            .unwrap()
    });
    let mut density = T::zero();
    for hit in &hits {
        density = density + hit.value;
    }
    Ok(PndfValue {
        density,
        intersection_count: hits.len(),
        candidates_tested: tested,
    })
}

#[allow(clippy::too_many_arguments)]
fn visit_eval<T: Float>(
    h: &HierRef<'_, T>,
    level: usize,
    i: i64,
    j: i64,
    q: &FootprintQuery<T>,
    m: Vec2<T>,
    policy: ClampPolicy<T>,
    thresh: T,
    tol: T,
    hits: &mut Vec<Hit<T>>,
    tested: &mut usize,
) {
    if !crate::hierarchy::overlaps_support(level, i, j, q) {
        return;
    }
    let (bb_min, bb_max) = h.hier.minmax.aabb(level, i, j);
    if m.x < bb_min.x - tol
        || m.x > bb_max.x + tol
        || m.y < bb_min.y - tol
        || m.y > bb_max.y + tol
    {
        return;
    }
    let residual = h.hier.clusters.residual(level, i, j);
    if level == 0 || residual <= thresh {
        for (hk, half) in [(0u8, Half::Upper), (1u8, Half::Lower)] {
            let tri = h.hier.clusters.node_triangle(level, i, j, half);
            test_triangle(&tri, q, m, policy, (level as u8, j, i, hk), hits, tested);
        }
    } else {
        let l = level - 1;
        for dj in 0..2 {
            for di in 0..2 {
                visit_eval(h, l, 2 * i + di, 2 * j + dj, q, m, policy, thresh, tol, hits, tested);
            }
        }
    }
}

/// Draw a normal whose distribution is the evaluated footprint NDF.
///
/// The footprint kernel is sampled first; the containing cell is then looked
/// up at the same hierarchy cut level evaluation uses for this query. A cell
/// with clamped Jacobian maps its in-cell fraction onto the replacement
/// triangle instead of interpolating.
pub fn sample_pndf<T: Float, R: Rng + ?Sized>(
    field: &NormalField<T>,
    accel: Option<HierRef<'_, T>>,
    q: &FootprintQuery<T>,
    policy: ClampPolicy<T>,
    rng: &mut R,
) -> Vec2<T> {
    let u = q.sample(rng);
    let (ci, cj, _, _) = split_coord(u);
    let (level, corners) = match accel {
        None => (0usize, field.cell_corners(ci, cj)),
        Some(h) => {
            let depth = h.hier.depth();
            let mut level = entry_level(q.half_extent).min(depth);
            let thresh = q.half_extent.x * q.half_extent.y * h.tau;
            loop {
                let i = ci.div_euclid(1i64 << level);
                let j = cj.div_euclid(1i64 << level);
                if level == 0 || h.hier.clusters.residual(level, i, j) <= thresh {
                    break (level, h.hier.clusters.corners(level, i, j));
                }
                level -= 1;
            }
        }
    };
    let a = lit::<T>((1u64 << level) as f64);
    let i = ci.div_euclid(1i64 << level);
    let j = cj.div_euclid(1i64 << level);
    let sx = (u.x - lit::<T>(i as f64) * a) / a;
    let sy = (u.y - lit::<T>(j as f64) * a) / a;
    let [n0, n1, n2, n3] = corners;
    let normal_area = if sx + sy < T::one() {
        signed_area2(n0, n1, n2)
    } else {
        signed_area2(n3, n2, n1)
    };
    let spatial_area = a * a * lit(0.5);
    let det = normal_area.abs() / spatial_area;
    if det >= policy.epsilon {
        interpolate_corners(n0, n1, n2, n3, sx, sy)
    } else {
        let center = (n1 + n2) * lit(0.5);
        center + eqtri_warp(Vec2::new(sx, sy), policy.epsilon * spatial_area)
    }
}

/// Histogram reference for the leaf-level footprint NDF.
#[derive(Debug, Clone)]
pub struct BinOracle<T> {
    pub grid: usize,
    /// Row-major densities over `[-1, 1]^2`.
    pub density: Vec<T>,
    pub counts: Vec<u64>,
}

/// Bin `n_samples` leaf-level draws on a `grid x grid` lattice over
/// `[-1, 1]^2`, normalized by sample count and bin area: an unbiased
/// estimate of the leaf-level footprint NDF.
pub fn pndf_bin_oracle<T: Float, R: Rng + ?Sized>(
    field: &NormalField<T>,
    q: &FootprintQuery<T>,
    n_samples: usize,
    grid: usize,
    policy: ClampPolicy<T>,
    rng: &mut R,
) -> BinOracle<T> {
    let mut counts = vec![0u64; grid * grid];
    for _ in 0..n_samples {
        let m = sample_pndf(field, None, q, policy, rng).to_f64();
        let bx = ((m.x + 1.0) * 0.5 * grid as f64).floor() as i64;
        let by = ((m.y + 1.0) * 0.5 * grid as f64).floor() as i64;
        if bx >= 0 && bx < grid as i64 && by >= 0 && by < grid as i64 {
            counts[by as usize * grid + bx as usize] += 1;
        }
    }
    let bin_area = (2.0 / grid as f64) * (2.0 / grid as f64);
    let norm = 1.0 / (n_samples as f64 * bin_area);
    let density = counts.iter().map(|&c| lit(c as f64 * norm)).collect();
    BinOracle {
        grid,
        density,
        counts,
    }
}

/// Evaluate the footprint NDF at the centers of a `grid x grid` lattice over
/// `[-1, 1]^2`; bins outside the unit disk are zero. Rows run in parallel.
pub fn pndf_image<T: Float>(
    field: &NormalField<T>,
    accel: Option<HierRef<'_, T>>,
    q: &FootprintQuery<T>,
    grid: usize,
    policy: ClampPolicy<T>,
) -> Vec<T> {
    let mut out = vec![T::zero(); grid * grid];
    out.par_chunks_mut(grid).enumerate().for_each(|(by, row)| {
        for (bx, v) in row.iter_mut().enumerate() {
            let m = Vec2::new(
                lit::<T>(-1.0 + (bx as f64 + 0.5) * 2.0 / grid as f64),
                lit::<T>(-1.0 + (by as f64 + 0.5) * 2.0 / grid as f64),
            );
            if m.norm_sq() <= T::one() {
                *v = eval_pndf(field, accel, q, m, policy).unwrap().density;
            }
        }
    });
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernel::KernelKind;
    use crate::rng::seeded_rng;

    fn tri(normals: [(f64, f64); 3]) -> NormalTriangle<f64> {
        NormalTriangle::new(
            [
                Vec2::new(0.0, 0.0),
                Vec2::new(1.0, 0.0),
                Vec2::new(0.0, 1.0),
            ],
            normals.map(|(x, y)| Vec2::new(x, y)),
        )
    }

    #[test]
    fn bary_at_vertex_and_centroid() {
        let t = tri([(0.0, 0.0), (0.3, 0.0), (0.0, 0.3)]);
        let (l0, l1, l2) = intersect_normal_triangle(Vec2::new(0.0, 0.0), &t).unwrap();
        assert!((l0 - 1.0).abs() < 1e-9 && l1.abs() < 1e-9 && l2.abs() < 1e-9);
        let c = Vec2::new(0.1, 0.1);
        let (l0, l1, l2) = intersect_normal_triangle(c, &t).unwrap();
        for l in [l0, l1, l2] {
            assert!((l - 1.0 / 3.0).abs() < 1e-12);
        }
        assert!((l0 + l1 + l2 - 1.0).abs() < 1e-12);
    }

    #[test]
    fn bary_matches_halfplane_oracle() {
        // dense random (point, triangle) pairs against an orientation-based test
        let mut rng = seeded_rng(11);
        use rand::Rng;
        let mut hits = 0usize;
        for _ in 0..10_000 {
            let v: Vec<Vec2<f64>> = (0..3)
                .map(|_| Vec2::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
                .collect();
            let t = NormalTriangle::new(
                [Vec2::zero(), Vec2::new(1.0, 0.0), Vec2::new(0.0, 1.0)],
                [v[0], v[1], v[2]],
            );
            if t.signed_area.abs() < 1e-3 {
                continue;
            }
            let m = Vec2::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
            let ours = intersect_normal_triangle(m, &t).is_some();
            // half-plane test with the triangle's own orientation
            let s = t.signed_area.signum();
            let edge = |a: Vec2<f64>, b: Vec2<f64>| (b - a).cross(m - a) * s;
            // the signed-area convention flips handedness; inside means all
            // edge tests share the area's sign
            let e0 = edge(v[0], v[1]);
            let e1 = edge(v[1], v[2]);
            let e2 = edge(v[2], v[0]);
            let inside = (e0 <= 0.0 && e1 <= 0.0 && e2 <= 0.0) || (e0 >= 0.0 && e1 >= 0.0 && e2 >= 0.0);
            // skip near-boundary points where the tolerance differs
            let margin = [e0, e1, e2].iter().map(|x| x.abs()).fold(f64::MAX, f64::min);
            if margin < 1e-6 {
                continue;
            }
            assert_eq!(ours, inside, "m {m:?} tri {v:?}");
            hits += ours as usize;
        }
        assert!(hits > 100, "oracle exercised too rarely ({hits})");
    }

    #[test]
    fn effective_keeps_nondegenerate() {
        let t = tri([(0.0, 0.0), (0.4, 0.0), (0.0, 0.4)]);
        assert!((t.jacobian_det() - 0.16).abs() < 1e-15);
        let e = effective_triangle(&t, ClampPolicy::default());
        assert_eq!(e.normals, t.normals);
    }

    #[test]
    fn effective_replaces_flat() {
        let t = tri([(0.1, 0.2); 3]);
        let e = effective_triangle(&t, ClampPolicy::default());
        // area eps/2 at leaf scale, centered on the cell-center normal
        assert!((e.signed_area.abs() - 5e-7).abs() < 1e-12);
        let c = (e.normals[0] + e.normals[1] + e.normals[2]) * (1.0 / 3.0);
        assert!((c.x - 0.1).abs() < 1e-9 && (c.y - 0.2).abs() < 1e-9);
        // circumradius for eps = 1e-6
        let r = (e.normals[0] - c).norm();
        assert!((r - 6.204032394014e-4).abs() < 1e-9, "r = {r}");
        // one vertex toward +y
        assert!(e.normals[0].y > c.y);
        assert!((e.normals[0].x - c.x).abs() < 1e-12);
    }

    #[test]
    fn eqtri_warp_stays_inside_and_folds() {
        let mut rng = seeded_rng(3);
        use rand::Rng;
        let area = 5e-7;
        let verts = eqtri_vertices::<f64>(area);
        for _ in 0..5000 {
            let u = Vec2::new(rng.gen::<f64>(), rng.gen::<f64>());
            let p = eqtri_warp(u, area);
            let t = NormalTriangle::new(
                [Vec2::zero(), Vec2::new(1.0, 0.0), Vec2::new(0.0, 1.0)],
                verts,
            );
            assert!(intersect_normal_triangle(p, &t).is_some(), "{p:?} outside");
            let q = eqtri_warp(Vec2::new(1.0 - u.x, 1.0 - u.y), area);
            assert!((p - q).norm() < 1e-15);
        }
    }

    #[test]
    fn flat_field_density() {
        let field = NormalField::new(32, 32, vec![Vec2::new(0.0, 0.0); 32 * 32]).unwrap();
        let q = FootprintQuery::new(Vec2::new(16.0, 16.0), Vec2::new(6.0, 6.0), KernelKind::Box);
        let policy = ClampPolicy::<f64>::default();
        let v = eval_pndf(&field, None, &q, Vec2::zero(), policy).unwrap();
        let expect = 2.0 / policy.epsilon;
        assert!(
            (v.density - expect).abs() / expect < 0.02,
            "density {} vs {}",
            v.density,
            expect
        );
        // outside the replacement triangle: zero
        let far = eval_pndf(&field, None, &q, Vec2::new(0.01, 0.0), policy).unwrap();
        assert_eq!(far.density, 0.0);
        assert_eq!(far.intersection_count, 0);
    }

    #[test]
    fn flat_field_samples_within_replacement() {
        let field = NormalField::new(16, 16, vec![Vec2::new(0.0, 0.0); 256]).unwrap();
        let q = FootprintQuery::new(Vec2::new(8.0, 8.0), Vec2::new(4.0, 4.0), KernelKind::Gaussian);
        let mut rng = seeded_rng(5);
        for _ in 0..10_000 {
            let m = sample_pndf(&field, None, &q, ClampPolicy::default(), &mut rng);
            assert!(m.norm() <= 6.204032394014e-4 + 1e-12, "|m| = {}", m.norm());
        }
    }

    #[test]
    fn outside_disk_is_domain_error() {
        let field = NormalField::new(4, 4, vec![Vec2::zero(); 16]).unwrap();
        let q = FootprintQuery::new(Vec2::new(2.0, 2.0), Vec2::new(1.0, 1.0), KernelKind::Box);
        assert!(matches!(
            eval_pndf(&field, None, &q, Vec2::new(1.1, 0.0), ClampPolicy::default()),
            Err(Error::QueryOutsideDisk)
        ));
    }

    #[test]
    fn oracle_total_mass() {
        let field = NormalField::new(16, 16, vec![Vec2::new(0.1, -0.05); 256]).unwrap();
        let q = FootprintQuery::new(Vec2::new(8.0, 8.0), Vec2::new(4.0, 4.0), KernelKind::Box);
        let mut rng = seeded_rng(1);
        let n = 100_000;
        let o = pndf_bin_oracle(&field, &q, n, 32, ClampPolicy::default(), &mut rng);
        let bin_area = (2.0 / 32.0f64).powi(2);
        let mass: f64 = o.density.iter().map(|d| d * bin_area).sum();
        assert!((mass - 1.0).abs() < 3.0 / (n as f64).sqrt());
        // flat-ish field: every count lands in the bins containing (0.1, -0.05)
        let total: u64 = o.counts.iter().sum();
        assert_eq!(total, n as u64);
    }
}
