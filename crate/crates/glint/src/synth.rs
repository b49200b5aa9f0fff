//! Procedural test fields: flat, affine, filtered-noise and scratch
//! patterns, all deterministic in the seed.

use crate::field::NormalField;
use crate::math::{lit, Vec2};
use crate::rng::seeded_rng;
use crate::Float;
use rand::Rng;
use rand_distr::StandardNormal;

pub fn flat_field<T: Float>(width: usize, height: usize) -> NormalField<T> {
    NormalField::new(width, height, vec![Vec2::zero(); width * height]).unwrap()
}

/// `n(u) = M u + c`, scaled down if it would leave the unit disk. Wrapping
/// makes the seam cells non-affine; interior cells reproduce the map exactly.
pub fn affine_field<T: Float>(
    width: usize,
    height: usize,
    m: [[f64; 2]; 2],
    c: [f64; 2],
) -> NormalField<T> {
    let mut texels = Vec::with_capacity(width * height);
    let mut max_norm: f64 = 0.0;
    let mut raw = Vec::with_capacity(width * height);
    for j in 0..height {
        for i in 0..width {
            let (x, y) = (i as f64, j as f64);
            let n = (
                m[0][0] * x + m[0][1] * y + c[0],
                m[1][0] * x + m[1][1] * y + c[1],
            );
            max_norm = max_norm.max((n.0 * n.0 + n.1 * n.1).sqrt());
            raw.push(n);
        }
    }
    let scale = if max_norm > 0.95 { 0.95 / max_norm } else { 1.0 };
    for n in raw {
        texels.push(Vec2::new(lit(n.0 * scale), lit(n.1 * scale)));
    }
    NormalField::new(width, height, texels).unwrap()
}

/// Gaussian-filtered white-noise normals with the given rms slope: the
/// "isotropic" validation surface. Filtering wraps, so the field tiles.
pub fn isotropic_field<T: Float>(
    width: usize,
    height: usize,
    seed: u64,
    rms: f64,
    filter_sigma: f64,
) -> NormalField<T> {
    let mut rng = seeded_rng(seed);
    let mut nx = vec![0.0f64; width * height];
    let mut ny = vec![0.0f64; width * height];
    for k in 0..width * height {
        nx[k] = rng.sample(StandardNormal);
        ny[k] = rng.sample(StandardNormal);
    }
    if filter_sigma > 0.0 {
        gaussian_blur_wrap(&mut nx, width, height, filter_sigma);
        gaussian_blur_wrap(&mut ny, width, height, filter_sigma);
    }
    let mean_sq: f64 =
        nx.iter().zip(&ny).map(|(a, b)| a * a + b * b).sum::<f64>() / (width * height) as f64;
    let scale = rms / mean_sq.sqrt().max(1e-12);
    let texels = nx
        .iter()
        .zip(&ny)
        .map(|(&a, &b)| {
            let mut v = Vec2::new(a * scale, b * scale);
            let n = v.norm();
            if n > 0.9 {
                v = v * (0.9 / n);
            }
            Vec2::new(lit(v.x), lit(v.y))
        })
        .collect();
    NormalField::new(width, height, texels).unwrap()
}

/// Unfiltered noise: one independent normal per texel. High-frequency by
/// construction.
pub fn high_freq_field<T: Float>(width: usize, height: usize, seed: u64, rms: f64) -> NormalField<T> {
    isotropic_field(width, height, seed, rms, 0.0)
}

/// Anisotropic noise: heavy filtering along x only, so slopes vary much
/// faster across the brush direction than along it.
pub fn brushed_field<T: Float>(
    width: usize,
    height: usize,
    seed: u64,
    rms: f64,
    along: f64,
    across: f64,
) -> NormalField<T> {
    let mut rng = seeded_rng(seed);
    let mut nx = vec![0.0f64; width * height];
    let mut ny = vec![0.0f64; width * height];
    for k in 0..width * height {
        nx[k] = rng.sample(StandardNormal);
        ny[k] = rng.sample(StandardNormal);
    }
    gaussian_blur_axis(&mut nx, width, height, along, true);
    gaussian_blur_axis(&mut nx, width, height, across, false);
    gaussian_blur_axis(&mut ny, width, height, along, true);
    gaussian_blur_axis(&mut ny, width, height, across, false);
    // damp the along-brush slope so the anisotropy shows in the normals too
    let mean_sq: f64 =
        nx.iter().zip(&ny).map(|(a, b)| 0.25 * a * a + b * b).sum::<f64>() / (width * height) as f64;
    let scale = rms / mean_sq.sqrt().max(1e-12);
    let texels = nx
        .iter()
        .zip(&ny)
        .map(|(&a, &b)| {
            let mut v = Vec2::new(0.5 * a * scale, b * scale);
            let n = v.norm();
            if n > 0.9 {
                v = v * (0.9 / n);
            }
            Vec2::new(lit(v.x), lit(v.y))
        })
        .collect();
    NormalField::new(width, height, texels).unwrap()
}

/// Mostly flat surface crossed by sparse tilted lines.
pub fn scratch_field<T: Float>(
    width: usize,
    height: usize,
    seed: u64,
    n_scratches: usize,
) -> NormalField<T> {
    let mut rng = seeded_rng(seed);
    let mut texels = vec![Vec2::new(0.0f64, 0.0); width * height];
    for _ in 0..n_scratches {
        let x0 = rng.gen_range(0.0..width as f64);
        let y0 = rng.gen_range(0.0..height as f64);
        let ang = rng.gen_range(0.0..std::f64::consts::PI);
        let len = rng.gen_range(0.25..0.9) * width as f64;
        let (dx, dy) = (ang.cos(), ang.sin());
        let tilt = Vec2::new(-dy, dx) * rng.gen_range(0.2..0.5);
        let steps = (len * 2.0) as usize;
        for s in 0..steps {
            let t = s as f64 / 2.0;
            let px = (x0 + dx * t).rem_euclid(width as f64) as usize % width;
            let py = (y0 + dy * t).rem_euclid(height as f64) as usize % height;
            texels[py * width + px] = tilt;
        }
    }
    let texels = texels
        .into_iter()
        .map(|v| Vec2::new(lit(v.x), lit(v.y)))
        .collect();
    NormalField::new(width, height, texels).unwrap()
}

fn gaussian_blur_axis(data: &mut [f64], width: usize, height: usize, sigma: f64, along_x: bool) {
    if sigma <= 0.0 {
        return;
    }
    let radius = (3.0 * sigma).ceil() as i64;
    let mut kernel = Vec::with_capacity((2 * radius + 1) as usize);
    for k in -radius..=radius {
        kernel.push((-(k * k) as f64 / (2.0 * sigma * sigma)).exp());
    }
    let sum: f64 = kernel.iter().sum();
    for k in &mut kernel {
        *k /= sum;
    }
    let mut tmp = vec![0.0f64; data.len()];
    for y in 0..height as i64 {
        for x in 0..width as i64 {
            let mut acc = 0.0;
            for (ki, w) in kernel.iter().enumerate() {
                let o = ki as i64 - radius;
                let (sx, sy) = if along_x {
                    ((x + o).rem_euclid(width as i64), y)
                } else {
                    (x, (y + o).rem_euclid(height as i64))
                };
                acc += w * data[sy as usize * width + sx as usize];
            }
            tmp[y as usize * width + x as usize] = acc;
        }
    }
    data.copy_from_slice(&tmp);
}

fn gaussian_blur_wrap(data: &mut [f64], width: usize, height: usize, sigma: f64) {
    let radius = (3.0 * sigma).ceil() as i64;
    let mut kernel = Vec::with_capacity((2 * radius + 1) as usize);
    for k in -radius..=radius {
        kernel.push((-(k * k) as f64 / (2.0 * sigma * sigma)).exp());
    }
    let sum: f64 = kernel.iter().sum();
    for k in &mut kernel {
        *k /= sum;
    }
    let mut tmp = vec![0.0f64; data.len()];
    for y in 0..height as i64 {
        for x in 0..width as i64 {
            let mut acc = 0.0;
            for (ki, w) in kernel.iter().enumerate() {
                let xx = (x + ki as i64 - radius).rem_euclid(width as i64);
                acc += w * data[y as usize * width + xx as usize];
            }
            tmp[y as usize * width + x as usize] = acc;
        }
    }
    for y in 0..height as i64 {
        for x in 0..width as i64 {
            let mut acc = 0.0;
            for (ki, w) in kernel.iter().enumerate() {
                let yy = (y + ki as i64 - radius).rem_euclid(height as i64);
                acc += w * tmp[yy as usize * width + x as usize];
            }
            data[y as usize * width + x as usize] = acc;
        }
    }
}
