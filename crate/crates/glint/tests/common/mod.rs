//! Shared fixtures and independent oracles for the integration suites.

#![allow(dead_code)]

use glint::hierarchy::BuildParams;
use glint::synth;
use glint::{NormalField, Vec2};
use statrs::distribution::{ChiSquared, ContinuousCDF};

/// Seed of the procedurally generated isotropic validation field.
pub const ISO_SEED: u64 = 61;
pub const ISO_RMS: f64 = 0.28;
pub const ISO_FILTER_SIGMA: f64 = 0.6;

pub fn isotropic_256() -> NormalField<f64> {
    synth::isotropic_field(256, 256, ISO_SEED, ISO_RMS, ISO_FILTER_SIGMA)
}

pub fn isotropic_64() -> NormalField<f64> {
    synth::isotropic_field(64, 64, ISO_SEED + 1, ISO_RMS, 0.8)
}

pub fn default_build() -> BuildParams<f64> {
    BuildParams::default()
}

/// Relative L1 distance over a masked subset of two images.
pub fn rel_l1(a: &[f64], b: &[f64], mask: impl Fn(usize) -> bool) -> (f64, usize) {
    let mut num = 0.0;
    let mut den = 0.0;
    let mut n = 0;
    for k in 0..a.len() {
        if mask(k) {
            num += (a[k] - b[k]).abs();
            den += b[k].abs();
            n += 1;
        }
    }
    (num / den.max(1e-300), n)
}

/// Pearson chi-square p-value of observed counts against expected
/// probabilities, conditioned on the included bins.
pub fn chi_square_p(observed: &[u64], expected_weight: &[f64], min_expect: f64) -> (f64, usize) {
    assert_eq!(observed.len(), expected_weight.len());
    let w_total: f64 = expected_weight.iter().sum();
    let n_total: u64 = observed.iter().sum();
    // preliminary expected counts to choose bins
    let mut keep = vec![false; observed.len()];
    for k in 0..observed.len() {
        let e = expected_weight[k] / w_total * n_total as f64;
        keep[k] = e >= min_expect;
    }
    let w_kept: f64 = (0..observed.len())
        .filter(|&k| keep[k])
        .map(|k| expected_weight[k])
        .sum();
    let n_kept: u64 = (0..observed.len()).filter(|&k| keep[k]).map(|k| observed[k]).sum();
    let mut stat = 0.0;
    let mut dof = 0usize;
    for k in 0..observed.len() {
        if !keep[k] {
            continue;
        }
        let e = expected_weight[k] / w_kept * n_kept as f64;
        let d = observed[k] as f64 - e;
        stat += d * d / e;
        dof += 1;
    }
    assert!(dof > 2, "too few bins for a chi-square test");
    let dist = ChiSquared::new((dof - 1) as f64).unwrap();
    (1.0 - dist.cdf(stat), dof)
}

/// Quadrature of the cluster objective: for every leaf half-triangle of the
/// node, a composite midpoint rule over an 8x8 barycentric subdivision
/// (exact for the piecewise-quadratic integrand up to roundoff). Weights use
/// the clamped leaf Jacobians, matching the default build.
pub fn cluster_objective_quadrature(
    field: &NormalField<f64>,
    level: usize,
    cell: (i64, i64),
    corners: &[Vec2<f64>; 4],
    epsilon: f64,
) -> f64 {
    let a = 1i64 << level;
    let af = a as f64;
    let base = (cell.0 * a, cell.1 * a);
    let sub = 8usize;
    let mut total = 0.0;
    for lj in 0..a {
        for li in 0..a {
            let [n0, n1, n2, n3] = field.cell_corners(base.0 + li, base.1 + lj);
            for upper in [true, false] {
                let (vals, verts): ([Vec2<f64>; 3], [(f64, f64); 3]) = if upper {
                    (
                        [n0, n1, n2],
                        [
                            (li as f64, lj as f64),
                            (li as f64 + 1.0, lj as f64),
                            (li as f64, lj as f64 + 1.0),
                        ],
                    )
                } else {
                    (
                        [n3, n2, n1],
                        [
                            (li as f64 + 1.0, lj as f64 + 1.0),
                            (li as f64, lj as f64 + 1.0),
                            (li as f64 + 1.0, lj as f64),
                        ],
                    )
                };
                let area2 = (vals[2] - vals[0]).cross(vals[1] - vals[0]).abs();
                let w = 1.0 / area2.max(epsilon);
                let fsub = sub as f64;
                let eval_at = |s: f64, t: f64| {
                    let x = verts[0].0
                        + (verts[1].0 - verts[0].0) * s
                        + (verts[2].0 - verts[0].0) * t;
                    let y = verts[0].1
                        + (verts[1].1 - verts[0].1) * s
                        + (verts[2].1 - verts[0].1) * t;
                    let leaf = vals[0] * (1.0 - s - t) + vals[1] * s + vals[2] * t;
                    (cluster_interpolate(corners, x / af, y / af) - leaf).norm_sq()
                };
                // midpoint rule on each sub-triangle: exact for quadratics
                let tri_quad = |p: [(f64, f64); 3]| {
                    let m = |a: (f64, f64), b: (f64, f64)| {
                        ((a.0 + b.0) * 0.5, (a.1 + b.1) * 0.5)
                    };
                    let pts = [m(p[0], p[1]), m(p[1], p[2]), m(p[2], p[0])];
                    pts.iter().map(|&(s, t)| eval_at(s, t)).sum::<f64>() / 3.0
                };
                let mut acc = 0.0;
                for i in 0..sub {
                    for j in 0..(sub - i) {
                        let (s0, t0) = (i as f64 / fsub, j as f64 / fsub);
                        let h = 1.0 / fsub;
                        acc += tri_quad([(s0, t0), (s0 + h, t0), (s0, t0 + h)]);
                        if i + j < sub - 1 {
                            acc += tri_quad([
                                (s0 + h, t0),
                                (s0 + h, t0 + h),
                                (s0, t0 + h),
                            ]);
                        }
                    }
                }
                // sub^2 sub-triangles of area 1/(2 sub^2) tile the half
                total += acc / (2.0 * fsub * fsub) * w;
            }
        }
    }
    total
}

/// Interpolation over a unit cluster cell (same split convention as level 0).
pub fn cluster_interpolate(corners: &[Vec2<f64>; 4], sx: f64, sy: f64) -> Vec2<f64> {
    if sx + sy < 1.0 {
        corners[0] * (1.0 - sx - sy) + corners[1] * sx + corners[2] * sy
    } else {
        corners[3] * (sx + sy - 1.0) + corners[2] * (1.0 - sx) + corners[1] * (1.0 - sy)
    }
}

/// Exact per-bin masses of the footprint NDF on a `grid x grid` lattice over
/// `[-1, 1]^2`.
///
/// Each (effective) triangle's contribution to a bin is the kernel integral
/// over the texture-space preimage of `bin intersect normal-triangle`: the
/// affine change of variables cancels the Jacobian, leaving a smooth
/// integrand over a clipped polygon. This stays accurate for sliver
/// triangles whose density bands are far below any sampling grid's
/// resolution.
pub fn expected_bin_masses(
    field: &NormalField<f64>,
    accel: Option<glint::hierarchy::HierRef<'_, f64>>,
    q: &glint::kernel::FootprintQuery<f64>,
    grid: usize,
    policy: glint::pndf::ClampPolicy<f64>,
) -> Vec<f64> {
    use glint::field::{CellId, Half};
    let mut masses = vec![0.0f64; grid * grid];
    let mut triangles: Vec<glint::field::NormalTriangle<f64>> = Vec::new();
    match accel {
        None => {
            let (i0, i1, j0, j1) = q.cell_range();
            for j in j0..=j1 {
                for i in i0..=i1 {
                    for half in [Half::Upper, Half::Lower] {
                        triangles.push(field.triangle(CellId { i, j, half }));
                    }
                }
            }
        }
        Some(h) => {
            let cut = glint::hierarchy::select_cut(h.hier, q, h.tau);
            for n in &cut.nodes {
                for half in [Half::Upper, Half::Lower] {
                    triangles.push(h.hier.clusters.node_triangle(n.level, n.i, n.j, half));
                }
            }
        }
    }
    let bin_w = 2.0 / grid as f64;
    for tri in &triangles {
        let eff = glint::pndf::effective_triangle(tri, policy);
        let n = eff.normals;
        let s = eff.spatial;
        let area = eff.signed_area;
        if area.abs() <= 0.0 {
            continue;
        }
        // barycentric coordinates of a normal-space point -> spatial point
        let to_spatial = |m: Vec2<f64>| {
            let l0 = glint::field::signed_area2(m, n[1], n[2]) / area;
            let l1 = glint::field::signed_area2(n[0], m, n[2]) / area;
            let l2 = glint::field::signed_area2(n[0], n[1], m) / area;
            s[0] * l0 + s[1] * l1 + s[2] * l2
        };
        let lo_x = n.iter().map(|v| v.x).fold(f64::MAX, f64::min);
        let hi_x = n.iter().map(|v| v.x).fold(f64::MIN, f64::max);
        let lo_y = n.iter().map(|v| v.y).fold(f64::MAX, f64::min);
        let hi_y = n.iter().map(|v| v.y).fold(f64::MIN, f64::max);
        let bx0 = (((lo_x + 1.0) / bin_w).floor() as i64).max(0);
        let bx1 = (((hi_x + 1.0) / bin_w).floor() as i64).min(grid as i64 - 1);
        let by0 = (((lo_y + 1.0) / bin_w).floor() as i64).max(0);
        let by1 = (((hi_y + 1.0) / bin_w).floor() as i64).min(grid as i64 - 1);
        for by in by0..=by1 {
            for bx in bx0..=bx1 {
                let rect = [
                    -1.0 + bx as f64 * bin_w,
                    -1.0 + (bx + 1) as f64 * bin_w,
                    -1.0 + by as f64 * bin_w,
                    -1.0 + (by + 1) as f64 * bin_w,
                ];
                let clipped = clip_to_rect(&[n[0], n[1], n[2]], rect);
                if clipped.len() < 3 {
                    continue;
                }
                // pull the polygon back to texture space, restrict it to
                // the kernel support box, and integrate the kernel
                let spatial: Vec<Vec2<f64>> = clipped.iter().map(|&m| to_spatial(m)).collect();
                let support = [
                    q.center.x - q.half_extent.x,
                    q.center.x + q.half_extent.x,
                    q.center.y - q.half_extent.y,
                    q.center.y + q.half_extent.y,
                ];
                let spatial = clip_to_rect(&spatial, support);
                if spatial.len() < 3 {
                    continue;
                }
                masses[(by as usize) * grid + bx as usize] += integrate_kernel(&spatial, q);
            }
        }
    }
    masses
}

/// Sutherland-Hodgman clip of a polygon against an axis rectangle
/// `[x0, x1] x [y0, y1]`.
fn clip_to_rect(poly: &[Vec2<f64>], rect: [f64; 4]) -> Vec<Vec2<f64>> {
    let mut cur: Vec<Vec2<f64>> = poly.to_vec();
    let planes: [(f64, bool, bool); 4] = [
        (rect[0], true, false),  // x >= x0
        (rect[1], true, true),   // x <= x1
        (rect[2], false, false), // y >= y0
        (rect[3], false, true),  // y <= y1
    ];
    for (bound, is_x, upper) in planes {
        if cur.is_empty() {
            break;
        }
        let inside = |p: Vec2<f64>| {
            let v = if is_x { p.x } else { p.y };
            if upper {
                v <= bound
            } else {
                v >= bound
            }
        };
        let mut next = Vec::with_capacity(cur.len() + 2);
        for k in 0..cur.len() {
            let a = cur[k];
            let b = cur[(k + 1) % cur.len()];
            let (ia, ib) = (inside(a), inside(b));
            if ia {
                next.push(a);
            }
            if ia != ib {
                let (va, vb) = if is_x { (a.x, b.x) } else { (a.y, b.y) };
                let t = (bound - va) / (vb - va);
                next.push(a + (b - a) * t);
            }
        }
        cur = next;
    }
    cur
}

/// Integral of the footprint kernel over a convex texture-space polygon.
fn integrate_kernel(poly: &[Vec2<f64>], q: &glint::kernel::FootprintQuery<f64>) -> f64 {
    let mut total = 0.0;
    for k in 1..poly.len() - 1 {
        let (a, b, c) = (poly[0], poly[k], poly[k + 1]);
        let area = 0.5 * (b - a).cross(c - a);
        let mids = [
            (a + b) * 0.5,
            (b + c) * 0.5,
            (c + a) * 0.5,
        ];
        let f_mid: f64 = mids.iter().map(|&m| q.eval(m)).sum::<f64>() / 3.0;
        total += f_mid * area;
    }
    total.abs()
}
