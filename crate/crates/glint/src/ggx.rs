//! Smooth GGX surrogate for the projected area.
//!
//! `P'(omega) = (omega_z + sqrt(omega_z^2 + omega_xy^T W omega_xy)) / 2`
//! reproduces the flat limit (`W = 0` gives `omega_z`) and the standard
//! anisotropic Smith-GGX projected area for `W = Q^T diag(alpha^2) Q`. At
//! grazing angles `P'` tends to `sqrt(omega_xy^T W omega_xy) / 2`, which is
//! linear in `W`, so `W` is fitted by least squares to grazing samples of
//! the analytic projected area, then eigendecomposed into roughness and
//! tangent frame.

use crate::area::projected_area;
use crate::field::NormalField;
use crate::hierarchy::{entry_level, HierRef};
use crate::kernel::{FootprintQuery, KernelKind};
use crate::math::{jacobi_eigen_sym, lit, solve_sym_pinv, Vec2, Vec3};
use crate::pndf::ClampPolicy;
use crate::{Error, Float, Result};
use rayon::prelude::*;
use std::io::{Read, Write};
use std::path::Path;

/// Number of grazing azimuths sampled for the fit.
const FIT_AZIMUTHS: usize = 16;
/// Grazing elevation used instead of exactly zero (the analytic evaluator
/// needs omega_z > 0).
const FIT_OMEGA_Z: f64 = 1e-4;

/// Fitted surrogate parameters: `omega = [W_xx, W_xy, W_yy]` symmetric PSD,
/// roughness `alpha` (descending), rotation `q` with
/// `W = q^T diag(alpha^2) q`.
#[derive(Debug, Clone, Copy)]
pub struct GgxFit<T> {
    pub omega: [T; 3],
    pub alpha: [T; 2],
    pub q: [[T; 2]; 2],
}

/// Surrogate projected area from the fitted matrix.
pub fn ggx_projected_area<T: Float>(omega_mat: &[T; 3], omega: Vec3<T>) -> T {
    let q = (omega_mat[0] * omega.x * omega.x
        + lit::<T>(2.0) * omega_mat[1] * omega.x * omega.y
        + omega_mat[2] * omega.y * omega.y)
        .max(T::zero());
    (omega.z + (omega.z * omega.z + q).sqrt()) * lit(0.5)
}

/// Fit the surrogate at a grid center of the given mip level. The fit
/// footprint is a box kernel of half extent `2^(level-1)`.
pub fn fit_ggx<T: Float>(
    field: &NormalField<T>,
    accel: Option<HierRef<'_, T>>,
    level: usize,
    grid_center: Vec2<T>,
    policy: ClampPolicy<T>,
) -> Result<GgxFit<T>> {
    if level < 1 {
        return Err(Error::Format("GGX fit needs level >= 1".into()));
    }
    let r = lit::<T>((1u64 << (level - 1)) as f64);
    let q = FootprintQuery::new(grid_center, Vec2::new(r, r), KernelKind::Box);
    let sin_elev = (1.0 - FIT_OMEGA_Z * FIT_OMEGA_Z).sqrt();
    let mut m = [[T::zero(); 3]; 3];
    let mut rhs = [T::zero(); 3];
    for k in 0..FIT_AZIMUTHS {
        let phi = 2.0 * std::f64::consts::PI * (k as f64 + 0.5) / FIT_AZIMUTHS as f64;
        let w = Vec3::new(
            lit::<T>(phi.cos() * sin_elev),
            lit::<T>(phi.sin() * sin_elev),
            lit::<T>(FIT_OMEGA_Z),
        );
        let p = projected_area(field, accel, &q, w, policy)?;
        // the surrogate's grazing limit is sqrt(w_xy^T W w_xy) / 2
        let target = lit::<T>(4.0) * p * p;
        let row = [w.x * w.x, lit::<T>(2.0) * w.x * w.y, w.y * w.y];
        for a in 0..3 {
            rhs[a] = rhs[a] + row[a] * target;
            for b in 0..3 {
                m[a][b] = m[a][b] + row[a] * row[b];
            }
        }
    }
    let sol = solve_sym_pinv(m, rhs, lit(1e-12));
    // project onto the PSD cone and split into roughness and frame
    let sym = [[sol[0], sol[1]], [sol[1], sol[2]]];
    let (w, v) = jacobi_eigen_sym(sym);
    let clamped = [w[0].max(T::zero()), w[1].max(T::zero())];
    let (order, _) = if clamped[0] >= clamped[1] { (0, 1) } else { (1, 0) };
    let (hi, lo) = (order, 1 - order);
    let alpha = [clamped[hi].sqrt(), clamped[lo].sqrt()];
    // rows of q are the eigenvectors, so W = q^T diag(alpha^2) q
    let q_rot = [[v[0][hi], v[1][hi]], [v[0][lo], v[1][lo]]];
    let omega = [
        clamped[hi] * q_rot[0][0] * q_rot[0][0] + clamped[lo] * q_rot[1][0] * q_rot[1][0],
        clamped[hi] * q_rot[0][0] * q_rot[0][1] + clamped[lo] * q_rot[1][0] * q_rot[1][1],
        clamped[hi] * q_rot[0][1] * q_rot[0][1] + clamped[lo] * q_rot[1][1] * q_rot[1][1],
    ];
    Ok(GgxFit {
        omega,
        alpha,
        q: q_rot,
    })
}

#[derive(Debug, Clone)]
pub struct GgxLevel<T> {
    pub width: usize,
    pub height: usize,
    /// Row-major `[W_xx, W_xy, W_yy]` per grid cell.
    pub entries: Vec<[T; 3]>,
}

/// Per-mip-level tables of fitted matrices, one fit per cell center,
/// bilinearly interpolated at shading time.
#[derive(Debug, Clone)]
pub struct GgxTable<T> {
    pub width: usize,
    pub height: usize,
    pub min_level: usize,
    pub levels: Vec<GgxLevel<T>>,
}

impl<T: Float> GgxTable<T> {
    pub fn max_level(&self) -> usize {
        self.min_level + self.levels.len() - 1
    }

    /// Interpolated matrix for a footprint at `x` with half extents `r`.
    pub fn matrix_at(&self, x: Vec2<T>, half_extent: Vec2<T>) -> [T; 3] {
        let level = entry_level(half_extent)
            .max(self.min_level)
            .min(self.max_level());
        let lv = &self.levels[level - self.min_level];
        let a = (1u64 << level) as f64;
        let gx = x.x.to_f64().unwrap() / a - 0.5;
        let gy = x.y.to_f64().unwrap() / a - 0.5;
        let i0 = gx.floor() as i64;
        let j0 = gy.floor() as i64;
        let fx = lit::<T>(gx - i0 as f64);
        let fy = lit::<T>(gy - j0 as f64);
        let fetch = |i: i64, j: i64| {
            let i = i.rem_euclid(lv.width as i64) as usize;
            let j = j.rem_euclid(lv.height as i64) as usize;
            lv.entries[j * lv.width + i]
        };
        let e00 = fetch(i0, j0);
        let e10 = fetch(i0 + 1, j0);
        let e01 = fetch(i0, j0 + 1);
        let e11 = fetch(i0 + 1, j0 + 1);
        let one = T::one();
        let mut out = [T::zero(); 3];
        for k in 0..3 {
            out[k] = e00[k] * (one - fx) * (one - fy)
                + e10[k] * fx * (one - fy)
                + e01[k] * (one - fx) * fy
                + e11[k] * fx * fy;
        }
        out
    }

    /// Surrogate projected area for a footprint query.
    pub fn projected_area(&self, x: Vec2<T>, half_extent: Vec2<T>, omega: Vec3<T>) -> T {
        ggx_projected_area(&self.matrix_at(x, half_extent), omega)
    }
}

/// Fit every grid center of every mip level from `min_level` up.
pub fn build_ggx_table<T: Float>(
    field: &NormalField<T>,
    accel: Option<HierRef<'_, T>>,
    policy: ClampPolicy<T>,
    min_level: usize,
) -> Result<GgxTable<T>> {
    let depth = (field.width().min(field.height())).trailing_zeros() as usize;
    let min_level = min_level.max(1).min(depth);
    let mut levels = Vec::new();
    for level in min_level..=depth {
        let w = field.width() >> level;
        let h = field.height() >> level;
        let a = (1u64 << level) as f64;
        let entries: Result<Vec<[T; 3]>> = (0..w * h)
            .into_par_iter()
            .map(|k| {
                let (i, j) = (k % w, k / w);
                let center = Vec2::new(
                    lit::<T>((i as f64 + 0.5) * a),
                    lit::<T>((j as f64 + 0.5) * a),
                );
                fit_ggx(field, accel, level, center, policy).map(|f| f.omega)
            })
            .collect();
        levels.push(GgxLevel {
            width: w,
            height: h,
            entries: entries?,
        });
    }
    Ok(GgxTable {
        width: field.width(),
        height: field.height(),
        min_level,
        levels,
    })
}

/// Sidecar table: little-endian f32, per level, per cell, the three unique
/// matrix entries. Dimensions come from the normal map it belongs to.
pub fn write_ggx_table<T: Float>(table: &GgxTable<T>, path: &Path) -> Result<()> {
    let mut buf = Vec::new();
    for lv in &table.levels {
        for e in &lv.entries {
            for v in e {
                buf.extend_from_slice(&(v.to_f64().unwrap() as f32).to_le_bytes());
            }
        }
    }
    std::fs::File::create(path)?.write_all(&buf)?;
    Ok(())
}

/// Read a sidecar written by `write_ggx_table` for a `width x height` map.
pub fn read_ggx_table<T: Float>(
    path: &Path,
    width: usize,
    height: usize,
    min_level: usize,
) -> Result<GgxTable<T>> {
    let mut bytes = Vec::new();
    std::fs::File::open(path)?.read_to_end(&mut bytes)?;
    let depth = (width.min(height)).trailing_zeros() as usize;
    let min_level = min_level.max(1).min(depth);
    let expected: usize = (min_level..=depth)
        .map(|l| (width >> l) * (height >> l) * 12)
        .sum();
    if bytes.len() != expected {
        return Err(Error::Format(format!(
            "GGX table length {} does not match a {}x{} map (expected {expected})",
            bytes.len(),
            width,
            height
        )));
    }
    let mut off = 0usize;
    let mut next = || {
        let v = f32::from_le_bytes(bytes[off..off + 4].try_into().unwrap());
        off += 4;
        lit::<T>(v as f64)
    };
    let mut levels = Vec::new();
    for level in min_level..=depth {
        let w = width >> level;
        let h = height >> level;
        let entries = (0..w * h).map(|_| [next(), next(), next()]).collect();
        levels.push(GgxLevel {
            width: w,
            height: h,
            entries,
        });
    }
    Ok(GgxTable {
        width,
        height,
        min_level,
        levels,
    })
}
