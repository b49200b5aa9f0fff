//! Analytic projected area of a footprint's normal distribution, Smith
//! shadow-masking and the aggregated diffuse BRDF.
//!
//! With the kernel taken piecewise constant per triangle, the projected-area
//! integral splits into per-triangle area integrals over the visible part of
//! each normal triangle. In a frame rotated so `omega_y = 0`, the visibility
//! boundary on the projected hemisphere is the ellipse
//! `(m_x / omega_z)^2 + m_y^2 = 1`; clipping a triangle against it leaves a
//! closed boundary of line segments and ellipse arcs, each with a closed-form
//! line integral.

use crate::field::{Half, NormalField, NormalTriangle};
use crate::hierarchy::{select_cut, HierRef};
use crate::kernel::FootprintQuery;
use crate::math::{lit, Vec2, Vec3};
use crate::pndf::{effective_triangle, sample_pndf, ClampPolicy};
use crate::{Error, Float, Result};
use rand::Rng;

/// Below this `omega_z` the visibility ellipse is numerically degenerate;
/// queries are clamped up to it.
const OMEGA_Z_MIN: f64 = 1e-4;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SegmentKind {
    Line,
    Arc,
}

/// One piece of a clipped triangle boundary, in the canonical frame.
/// Consecutive segments share endpoints; the boundary is closed and
/// counterclockwise.
#[derive(Debug, Clone, Copy)]
pub struct BoundarySegment<T> {
    pub kind: SegmentKind,
    pub a: Vec2<T>,
    pub b: Vec2<T>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SmithVariant {
    Separable,
    HeightCorrelated,
}

/// In-plane rotation angle that zeroes `omega_y` (identity when `omega` is
/// already along +x or near the pole), plus the rotated direction.
pub fn canonical_rotate<T: Float>(omega: Vec3<T>) -> Result<(T, Vec3<T>)> {
    if omega.z <= T::zero() {
        return Err(Error::LowerHemisphere);
    }
    let rxy = omega.xy().norm();
    if rxy < lit(1e-9) {
        return Ok((T::zero(), Vec3::new(T::zero(), T::zero(), omega.z)));
    }
    let angle = -omega.y.atan2(omega.x);
    Ok((angle, Vec3::new(rxy, T::zero(), omega.z)))
}

/// Clip one triangle edge against the visible region (canonical frame).
/// Endpoints with `m_x >= 0` or inside the ellipse are visible; an edge with
/// no visible part is dropped (`None`).
pub fn clip_edge_to_ellipse<T: Float>(
    n0: Vec2<T>,
    n1: Vec2<T>,
    omega_z: T,
) -> Option<(Vec2<T>, Vec2<T>)> {
    let d = n1 - n0;
    let wz2 = omega_z * omega_z;
    let a = wz2 * d.y * d.y + d.x * d.x;
    let b = lit::<T>(2.0) * (wz2 * n0.y * d.y + n0.x * d.x);
    let c0 = wz2 * (n0.y * n0.y - T::one()) + n0.x * n0.x;
    let c1 = wz2 * (n1.y * n1.y - T::one()) + n1.x * n1.x;
    let clip0 = c0 > T::zero() && n0.x < T::zero();
    let clip1 = c1 > T::zero() && n1.x < T::zero();
    let mut out0 = n0;
    let mut out1 = n1;
    if clip0 || clip1 {
        let disc = b * b - lit::<T>(4.0) * a * c0;
        if disc < T::zero() {
            return None;
        }
        let sq = disc.sqrt();
        let t0 = (-b - sq) / (lit::<T>(2.0) * a);
        let t1 = (-b + sq) / (lit::<T>(2.0) * a);
        if clip0 {
            out0 = n0 * (T::one() - t0) + n1 * t0;
        }
        if clip1 {
            out1 = n0 * (T::one() - t1) + n1 * t1;
        }
        if clip0
            && clip1
            && (t0 < T::zero() || t0 > T::one() || t1 < T::zero() || t1 > T::one())
        {
            return None;
        }
    }
    Some((out0, out1))
}

/// Clip the triangle's edges and close the result with ellipse arcs. The
/// triangle's normals must already be in the canonical frame; the returned
/// boundary runs counterclockwise. Empty when the triangle is entirely
/// invisible.
pub fn build_clipped_boundary<T: Float>(
    t: &NormalTriangle<T>,
    omega_z: T,
) -> Vec<BoundarySegment<T>> {
    // counterclockwise in the standard orientation
    let [a, b, c] = t.normals;
    let std_area = (b - a).cross(c - a);
    let verts = if std_area >= T::zero() { [a, b, c] } else { [a, c, b] };
    let mut segs: Vec<(Vec2<T>, Vec2<T>)> = Vec::with_capacity(3);
    for k in 0..3 {
        if let Some(s) = clip_edge_to_ellipse(verts[k], verts[(k + 1) % 3], omega_z) {
            segs.push(s);
        }
    }
    if segs.is_empty() {
        return Vec::new();
    }
    let tol = lit::<T>(1e-9);
    let mut out = Vec::with_capacity(6);
    for k in 0..segs.len() {
        let prev_end = segs[(k + segs.len() - 1) % segs.len()].1;
        let start = segs[k].0;
        if (prev_end - start).norm() > tol {
            out.push(BoundarySegment {
                kind: SegmentKind::Arc,
                a: prev_end,
                b: start,
            });
        }
        out.push(BoundarySegment {
            kind: SegmentKind::Line,
            a: segs[k].0,
            b: segs[k].1,
        });
    }
    out
}

/// Antiderivative of `sqrt(1 - p^2)`.
#[inline]
fn f_circ<T: Float>(p: T) -> T {
    let p = p.min(T::one()).max(-T::one());
    (p.asin() + p * (T::one() - p * p).max(T::zero()).sqrt()) * lit(0.5)
}

/// Closed form of the boundary integrand over a straight segment in the
/// canonical frame. Endpoints must lie in the closed unit disk.
pub fn line_segment_integral<T: Float>(n0: Vec2<T>, n1: Vec2<T>, omega: Vec3<T>) -> T {
    let d = n1 - n0;
    let len = d.norm();
    if len < lit(1e-12) {
        return T::zero();
    }
    let d = d / len;
    let half = lit::<T>(0.5);
    let shoelace = omega.z * half * (n1.y - n0.y) * (n1.x + n0.x);
    let s = d.y * n0.x - d.x * n0.y;
    let r2 = (T::one() - s * s).max(T::zero());
    if r2 <= T::zero() {
        return shoelace;
    }
    let r = r2.sqrt();
    let p0 = d.dot(n0) / r;
    let p1 = d.dot(n1) / r;
    shoelace - omega.x * r2 * d.y * (f_circ(p1) - f_circ(p0))
}

/// Closed form of the boundary integrand along an ellipse arc from `n0` to
/// `n1` (endpoints on the ellipse, canonical frame). Independent of omega.
pub fn arc_integral<T: Float>(n0: Vec2<T>, n1: Vec2<T>) -> T {
    f_circ(n0.y) - f_circ(n1.y)
}

fn boundary_integral<T: Float>(segs: &[BoundarySegment<T>], omega: Vec3<T>) -> T {
    let mut total = T::zero();
    for s in segs {
        total = total
            + match s.kind {
                SegmentKind::Line => line_segment_integral(s.a, s.b, omega),
                SegmentKind::Arc => arc_integral(s.a, s.b),
            };
    }
    total
}

/// Visit the raw triangles the query is evaluated over: the hierarchy cut
/// when available, every leaf triangle overlapping the support otherwise.
fn for_each_support_triangle<T: Float, F: FnMut(NormalTriangle<T>)>(
    field: &NormalField<T>,
    accel: Option<HierRef<'_, T>>,
    q: &FootprintQuery<T>,
    mut f: F,
) {
    match accel {
        None => {
            let (i0, i1, j0, j1) = q.cell_range();
            for j in j0..=j1 {
                for i in i0..=i1 {
                    for half in [Half::Upper, Half::Lower] {
                        f(field.triangle(crate::field::CellId { i, j, half }));
                    }
                }
            }
        }
        Some(h) => {
            let cut = select_cut(h.hier, q, h.tau);
            for n in &cut.nodes {
                for half in [Half::Upper, Half::Lower] {
                    f(h.hier.clusters.node_triangle(n.level, n.i, n.j, half));
                }
            }
        }
    }
}

/// Analytic projected area `P(omega)` of the footprint's normal
/// distribution: the kernel-weighted sum of visible-domain area integrals
/// over the (clamped) triangles in the support. Piecewise-constant kernel
/// weights are renormalized per query so a flat field gives exactly
/// `omega_z` and `P(z) = 1`.
pub fn projected_area<T: Float>(
    field: &NormalField<T>,
    accel: Option<HierRef<'_, T>>,
    q: &FootprintQuery<T>,
    omega: Vec3<T>,
    policy: ClampPolicy<T>,
) -> Result<T> {
    if omega.z <= T::zero() {
        return Err(Error::LowerHemisphere);
    }
    let omega = clamp_grazing(omega);
    let (angle, w) = canonical_rotate(omega)?;
    let (cos_a, sin_a) = (angle.cos(), angle.sin());
    let mut weight_sum = T::zero();
    let mut value_sum = T::zero();
    let mut count = 0usize;
    let mut area_sum = T::zero();
    for_each_support_triangle(field, accel, q, |tri| {
        count += 1;
        area_sum = area_sum + tri.spatial_area();
        let k = q.on_triangle(&tri);
        if k <= T::zero() {
            return;
        }
        weight_sum = weight_sum + k * tri.spatial_area();
        let eff = effective_triangle(&tri, policy);
        let rotated = NormalTriangle::new(
            eff.spatial,
            [
                eff.normals[0].rotate(cos_a, sin_a),
                eff.normals[1].rotate(cos_a, sin_a),
                eff.normals[2].rotate(cos_a, sin_a),
            ],
        );
        let segs = build_clipped_boundary(&rotated, w.z);
        if segs.is_empty() {
            return;
        }
        let det = eff.jacobian_det().max(policy.epsilon);
        value_sum = value_sum + k * boundary_integral(&segs, w) / det;
    });
    if weight_sum <= T::zero() {
        // kernel mass missed every centroid (sub-cell footprints); weight
        // the support triangles evenly instead
        if count == 0 {
            return Ok(T::zero());
        }
        let mut value = T::zero();
        for_each_support_triangle(field, accel, q, |tri| {
            let eff = effective_triangle(&tri, policy);
            let rotated = NormalTriangle::new(
                eff.spatial,
                [
                    eff.normals[0].rotate(cos_a, sin_a),
                    eff.normals[1].rotate(cos_a, sin_a),
                    eff.normals[2].rotate(cos_a, sin_a),
                ],
            );
            let segs = build_clipped_boundary(&rotated, w.z);
            if segs.is_empty() {
                return;
            }
            let det = eff.jacobian_det().max(policy.epsilon);
            value = value + boundary_integral(&segs, w) / det;
        });
        return Ok((value / area_sum).max(T::zero()));
    }
    Ok((value_sum / weight_sum).max(T::zero()))
}

fn clamp_grazing<T: Float>(omega: Vec3<T>) -> Vec3<T> {
    let zmin = lit::<T>(OMEGA_Z_MIN);
    if omega.z >= zmin {
        return omega;
    }
    let rxy = omega.xy().norm();
    if rxy < lit(1e-12) {
        return Vec3::new(T::zero(), T::zero(), T::one());
    }
    let s = (T::one() - zmin * zmin).sqrt() / rxy;
    Vec3::new(omega.x * s, omega.y * s, zmin)
}

/// Monte Carlo reference for the projected area: leaf-level normal samples
/// averaged with the solid-angle change of measure. Returns the estimate and
/// its standard error.
pub fn projected_area_mc<T: Float, R: Rng + ?Sized>(
    field: &NormalField<T>,
    q: &FootprintQuery<T>,
    omega: Vec3<T>,
    n_samples: usize,
    policy: ClampPolicy<T>,
    rng: &mut R,
) -> (T, T) {
    let mut sum = 0.0f64;
    let mut sum_sq = 0.0f64;
    for _ in 0..n_samples {
        let m = sample_pndf(field, None, q, policy, rng);
        let m = m.to_f64();
        let mz_sq = 1.0 - m.x * m.x - m.y * m.y;
        let mz = mz_sq.max(0.0).sqrt();
        let dot = m.x * omega.x.to_f64().unwrap()
            + m.y * omega.y.to_f64().unwrap()
            + mz * omega.z.to_f64().unwrap();
        let v = if dot > 0.0 && mz > 1e-7 { dot / mz } else { 0.0 };
        sum += v;
        sum_sq += v * v;
    }
    let n = n_samples as f64;
    let mean = sum / n;
    let var = (sum_sq / n - mean * mean).max(0.0);
    (lit(mean), lit((var / n).sqrt()))
}

/// Smith's shape-invariant slope term from the projected area.
pub fn smith_lambda<T: Float>(p: T, omega_z: T) -> T {
    p / omega_z - T::one()
}

#[inline]
fn heaviside<T: Float>(x: T) -> T {
    if x > T::zero() {
        T::one()
    } else {
        T::zero()
    }
}

/// Shadow-masking from the two directions' slope terms; the micro-normal
/// only enters through the two half-space tests.
pub fn smith_g<T: Float>(
    omega_i: Vec3<T>,
    omega_o: Vec3<T>,
    m_tilde: Vec3<T>,
    lambda_i: T,
    lambda_o: T,
    variant: SmithVariant,
) -> T {
    let h = heaviside(m_tilde.dot(omega_i)) * heaviside(m_tilde.dot(omega_o));
    if h == T::zero() {
        return T::zero();
    }
    match variant {
        SmithVariant::Separable => h / ((T::one() + lambda_i) * (T::one() + lambda_o)),
        SmithVariant::HeightCorrelated => h / (T::one() + lambda_i + lambda_o),
    }
}

/// Aggregated diffuse BRDF: the exact kernel average of normal-mapped
/// Lambertian shading, `P(omega_i) / (pi * omega_i_z)`.
pub fn diffuse_brdf<T: Float>(p_omega_i: T, omega_i_z: T) -> T {
    p_omega_i / (T::PI() * omega_i_z)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernel::KernelKind;
    use crate::rng::seeded_rng;
    use crate::synth;
    use rand::Rng;

    #[test]
    fn canonical_rotation_cases() {
        let (a, w) = canonical_rotate(Vec3::<f64>::new(0.6, 0.0, 0.8)).unwrap();
        assert_eq!(a, 0.0);
        assert!((w.x - 0.6).abs() < 1e-15 && w.y == 0.0);
        let (_, w) = canonical_rotate(Vec3::<f64>::new(0.0, 0.6, 0.8)).unwrap();
        assert!((w.x - 0.6).abs() < 1e-15 && w.y.abs() < 1e-15 && (w.z - 0.8).abs() < 1e-15);
        let (a, _) = canonical_rotate(Vec3::<f64>::new(0.0, 0.0, 1.0)).unwrap();
        assert_eq!(a, 0.0);
        assert!(canonical_rotate(Vec3::<f64>::new(0.5, 0.0, -0.1)).is_err());
    }

    #[test]
    fn clip_examples() {
        // visible endpoints pass through
        let r = clip_edge_to_ellipse(Vec2::<f64>::new(0.1, 0.1), Vec2::new(0.5, -0.2), 0.5).unwrap();
        assert_eq!(r.0, Vec2::new(0.1, 0.1));
        assert_eq!(r.1, Vec2::new(0.5, -0.2));
        // first endpoint clipped onto the ellipse
        let (a, b) =
            clip_edge_to_ellipse(Vec2::<f64>::new(-0.9, 0.0), Vec2::new(0.9, 0.0), 0.5).unwrap();
        assert!((a.x + 0.5).abs() < 1e-12 && a.y.abs() < 1e-12);
        assert_eq!(b, Vec2::new(0.9, 0.0));
        let on = (a.x / 0.5).powi(2) + a.y * a.y;
        assert!((on - 1.0).abs() < 1e-9);
        // fully invisible edge drops
        assert!(clip_edge_to_ellipse(Vec2::<f64>::new(-0.9, 0.3), Vec2::new(-0.9, -0.3), 0.1).is_none());
    }

    #[test]
    fn boundary_unclipped_cases() {
        // omega_z = 1: normals in the disk are always visible
        let t = NormalTriangle::<f64>::new(
            [Vec2::zero(), Vec2::new(1.0, 0.0), Vec2::new(0.0, 1.0)],
            [Vec2::new(-0.5, -0.5), Vec2::new(0.5, -0.1), Vec2::new(0.0, 0.6)],
        );
        let segs = build_clipped_boundary(&t, 1.0);
        assert_eq!(segs.len(), 3);
        assert!(segs.iter().all(|s| s.kind == SegmentKind::Line));
    }

    #[test]
    fn boundary_closure_and_arc_invariant() {
        let mut rng = seeded_rng(21);
        let mut arcs_seen = 0;
        for _ in 0..500 {
            let rnd = |rng: &mut rand_chacha::ChaCha8Rng| {
                Vec2::new(rng.gen_range(-0.95..0.95), rng.gen_range(-0.95..0.95))
            };
            let v = [rnd(&mut rng), rnd(&mut rng), rnd(&mut rng)];
            if v.iter().any(|p| p.norm() > 0.97) {
                continue;
            }
            let t = NormalTriangle::<f64>::new(
                [Vec2::zero(), Vec2::new(1.0, 0.0), Vec2::new(0.0, 1.0)],
                v,
            );
            if t.signed_area.abs() < 1e-4 {
                continue;
            }
            let wz = rng.gen_range(0.05..0.95);
            let segs = build_clipped_boundary(&t, wz);
            if segs.is_empty() {
                continue;
            }
            // closed: each endpoint appears exactly twice
            for k in 0..segs.len() {
                let next = &segs[(k + 1) % segs.len()];
                assert!((segs[k].b - next.a).norm() < 1e-9, "boundary not closed");
            }
            for s in &segs {
                if s.kind == SegmentKind::Arc {
                    arcs_seen += 1;
                    for p in [s.a, s.b] {
                        let e = (p.x / wz).powi(2) + p.y * p.y;
                        assert!((e - 1.0).abs() < 1e-7, "arc endpoint off ellipse: {e}");
                    }
                }
            }
        }
        assert!(arcs_seen > 20, "clipping never produced arcs");
    }

    #[test]
    fn line_integral_shoelace_case() {
        let v = line_segment_integral(
            Vec2::<f64>::new(0.0, 0.0),
            Vec2::new(0.2, 0.2),
            Vec3::new(0.0, 0.0, 1.0),
        );
        assert!((v - 0.02).abs() < 1e-15);
        assert_eq!(
            line_segment_integral(Vec2::<f64>::new(0.3, 0.1), Vec2::new(0.3, 0.1), Vec3::new(0.4, 0.0, 0.9)),
            0.0
        );
    }

    #[test]
    fn line_integral_matches_quadrature() {
        let mut rng = seeded_rng(13);
        for _ in 0..200 {
            let p = Vec2::new(rng.gen_range(-0.9..0.9), rng.gen_range(-0.9..0.9));
            let q = Vec2::new(rng.gen_range(-0.9..0.9), rng.gen_range(-0.9..0.9));
            if p.norm() > 0.99 || q.norm() > 0.99 {
                continue;
            }
            let th: f64 = rng.gen_range(0.1..1.5);
            let w = Vec3::new(th.sin(), 0.0, th.cos());
            let closed = line_segment_integral(p, q, w);
            // midpoint rule on (wz*mx - wx*mz) dmy
            let n = 10_000;
            let mut acc = 0.0;
            let dy = (q.y - p.y) / n as f64;
            for k in 0..n {
                let t = (k as f64 + 0.5) / n as f64;
                let m = p * (1.0 - t) + q * t;
                let mz = (1.0 - m.norm_sq()).max(0.0).sqrt();
                acc += (w.z * m.x - w.x * mz) * dy;
            }
            let scale = closed.abs().max(acc.abs()).max(1e-3);
            assert!(
                (closed - acc).abs() / scale < 1e-6,
                "closed {closed} quad {acc}"
            );
        }
    }

    #[test]
    fn arc_integral_cases() {
        // full semi-arc
        let wz = 0.4;
        let top = Vec2::<f64>::new(0.0, 1.0);
        let bot = Vec2::new(0.0, -1.0);
        assert!((arc_integral(top, bot) - std::f64::consts::FRAC_PI_2).abs() < 1e-12);
        let p = Vec2::new(-wz * (1.0f64 - 0.25).sqrt(), 0.5);
        assert_eq!(arc_integral(p, p), 0.0);
        // quadrature of -sqrt(1 - y^2) dy
        let y0 = 0.7;
        let y1 = -0.4;
        let p0 = Vec2::new(-wz * (1.0f64 - y0 * y0).sqrt(), y0);
        let p1 = Vec2::new(-wz * (1.0f64 - y1 * y1).sqrt(), y1);
        let closed = arc_integral(p0, p1);
        let n = 200_000;
        let mut acc = 0.0;
        let dy = (y1 - y0) / n as f64;
        for k in 0..n {
            let y = y0 + (k as f64 + 0.5) * dy;
            acc += -(1.0 - y * y).sqrt() * dy;
        }
        assert!((closed - acc).abs() < 1e-8, "{closed} vs {acc}");
    }

    #[test]
    fn flat_field_projected_area() {
        let field = synth::flat_field::<f64>(16, 16);
        let q = FootprintQuery::new(Vec2::new(8.0, 8.0), Vec2::new(4.0, 4.0), KernelKind::Box);
        for th in [0.0f64, 0.4, 0.9, 1.3] {
            let w = Vec3::new(th.sin() * 0.3, th.sin() * 0.954, th.cos()).normalized();
            let w = if w.z <= 0.0 { Vec3::new(0.0, 0.0, 1.0) } else { w };
            let p = projected_area(&field, None, &q, w, ClampPolicy::default()).unwrap();
            assert!((p - w.z).abs() < 1e-6, "P {} vs wz {}", p, w.z);
        }
    }

    #[test]
    fn p_at_zenith_is_one() {
        let field = synth::isotropic_field::<f64>(64, 64, 3, 0.3, 1.5);
        let q = FootprintQuery::new(
            Vec2::new(32.0, 32.0),
            Vec2::new(8.0, 8.0),
            KernelKind::Gaussian,
        );
        let p = projected_area(&field, None, &q, Vec3::new(0.0, 0.0, 1.0), ClampPolicy::default())
            .unwrap();
        assert!((p - 1.0).abs() < 1e-3, "P(z) = {p}");
    }

    #[test]
    fn mc_flat_field_exact() {
        let field = synth::flat_field::<f64>(8, 8);
        let q = FootprintQuery::new(Vec2::new(4.0, 4.0), Vec2::new(2.0, 2.0), KernelKind::Box);
        let w = Vec3::new(0.6, 0.0, 0.8);
        let mut rng = seeded_rng(2);
        let (est, se) = projected_area_mc(&field, &q, w, 20_000, ClampPolicy::default(), &mut rng);
        assert!((est - 0.8).abs() < 1e-3, "est {est}");
        assert!(se < 1e-3);
    }

    #[test]
    fn mc_zenith_identity() {
        let field = synth::isotropic_field::<f64>(32, 32, 8, 0.35, 1.2);
        let q = FootprintQuery::new(Vec2::new(16.0, 16.0), Vec2::new(6.0, 6.0), KernelKind::Disk);
        let mut rng = seeded_rng(3);
        let (est, _) =
            projected_area_mc(&field, &q, Vec3::new(0.0, 0.0, 1.0), 50_000, ClampPolicy::default(), &mut rng);
        assert!((est - 1.0).abs() < 1e-9, "zenith estimate {est}");
    }

    #[test]
    fn smith_terms() {
        assert_eq!(smith_lambda(0.8f64, 0.8), 0.0);
        assert_eq!(smith_lambda(1.6f64, 0.8), 1.0);
        let up = Vec3::<f64>::new(0.0, 0.0, 1.0);
        let wi = Vec3::new(0.3, 0.0, 0.95).normalized();
        let wo = Vec3::new(-0.2, 0.1, 0.97).normalized();
        assert_eq!(smith_g(wi, wo, up, 0.0, 0.0, SmithVariant::Separable), 1.0);
        assert_eq!(smith_g(wi, wo, up, 0.0, 0.0, SmithVariant::HeightCorrelated), 1.0);
        assert!((smith_g(wi, wo, up, 1.0, 1.0, SmithVariant::Separable) - 0.25).abs() < 1e-15);
        assert!(
            (smith_g(wi, wo, up, 1.0, 1.0, SmithVariant::HeightCorrelated) - 1.0 / 3.0).abs()
                < 1e-15
        );
        // back-facing micro-normal kills the term
        let away = Vec3::new(0.0, 0.0, -1.0);
        assert_eq!(smith_g(wi, wo, away, 0.0, 0.0, SmithVariant::Separable), 0.0);
    }

    #[test]
    fn diffuse_brdf_cases() {
        assert!((diffuse_brdf(0.8f64, 0.8) - 1.0 / std::f64::consts::PI).abs() < 1e-15);
        assert_eq!(diffuse_brdf(0.0f64, 0.5), 0.0);
    }

    #[test]
    fn stokes_equals_shoelace_at_zenith() {
        let mut rng = seeded_rng(77);
        let mut checked = 0;
        while checked < 100 {
            let rnd = |rng: &mut rand_chacha::ChaCha8Rng| {
                Vec2::new(rng.gen_range(-0.9..0.9), rng.gen_range(-0.9..0.9))
            };
            let v = [rnd(&mut rng), rnd(&mut rng), rnd(&mut rng)];
            if v.iter().any(|p| p.norm() > 0.95) {
                continue;
            }
            let t = NormalTriangle::<f64>::new(
                [Vec2::zero(), Vec2::new(1.0, 0.0), Vec2::new(0.0, 1.0)],
                v,
            );
            if t.signed_area.abs() < 1e-3 {
                continue;
            }
            let segs = build_clipped_boundary(&t, 1.0);
            let stokes = boundary_integral(&segs, Vec3::new(0.0, 0.0, 1.0));
            assert!(
                (stokes - t.signed_area.abs()).abs() < 1e-8,
                "stokes {stokes} vs area {}",
                t.signed_area.abs()
            );
            checked += 1;
        }
    }
}
