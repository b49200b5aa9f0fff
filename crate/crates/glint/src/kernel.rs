//! Footprint kernels: compactly supported densities over texture space.
//!
//! All kernels integrate to one over the support box `[x - r, x + r]` and
//! vanish outside it. The Gaussian uses `sigma = r / 3` per axis, truncated
//! at the support edge and renormalized.

use crate::field::NormalTriangle;
use crate::math::{lit, Vec2};
use crate::Float;
use rand::Rng;
use rand_distr::StandardNormal;
use std::fmt;
use std::str::FromStr;

/// Mass of a 1D standard Gaussian within +-3 sigma, `erf(3 / sqrt(2))`.
const GAUSS_3SIGMA_MASS: f64 = 0.997_300_203_936_739_8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum KernelKind {
    Gaussian,
    Disk,
    Box,
}

impl fmt::Display for KernelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            KernelKind::Gaussian => "gaussian",
            KernelKind::Disk => "disk",
            KernelKind::Box => "box",
        };
        f.write_str(s)
    }
}

impl FromStr for KernelKind {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "gaussian" => Ok(KernelKind::Gaussian),
            "disk" => Ok(KernelKind::Disk),
            "box" => Ok(KernelKind::Box),
            other => Err(format!("unknown kernel '{other}' (gaussian|disk|box)")),
        }
    }
}

/// A footprint query: center, per-axis half extents and kernel kind, all in
/// texel units.
#[derive(Debug, Clone, Copy)]
pub struct FootprintQuery<T> {
    pub center: Vec2<T>,
    pub half_extent: Vec2<T>,
    pub kind: KernelKind,
}

impl<T: Float> FootprintQuery<T> {
    pub fn new(center: Vec2<T>, half_extent: Vec2<T>, kind: KernelKind) -> Self {
        assert!(
            half_extent.x > T::zero() && half_extent.y > T::zero(),
            "footprint half extents must be positive"
        );
        FootprintQuery {
            center,
            half_extent,
            kind,
        }
    }

    /// Kernel density at `u`; zero outside the support box.
    pub fn eval(&self, u: Vec2<T>) -> T {
        let d = u - self.center;
        let r = self.half_extent;
        if d.x.abs() > r.x || d.y.abs() > r.y {
            return T::zero();
        }
        match self.kind {
            KernelKind::Box => (lit::<T>(4.0) * r.x * r.y).recip(),
            KernelKind::Disk => {
                let q = (d.x / r.x).powi(2) + (d.y / r.y).powi(2);
                if q <= T::one() {
                    (T::PI() * r.x * r.y).recip()
                } else {
                    T::zero()
                }
            }
            KernelKind::Gaussian => {
                let third = lit::<T>(1.0 / 3.0);
                let sx = r.x * third;
                let sy = r.y * third;
                let norm = lit::<T>(GAUSS_3SIGMA_MASS) * (lit::<T>(2.0) * T::PI()).sqrt();
                let gx = (-(d.x * d.x) / (lit::<T>(2.0) * sx * sx)).exp() / (sx * norm);
                let gy = (-(d.y * d.y) / (lit::<T>(2.0) * sy * sy)).exp() / (sy * norm);
                gx * gy
            }
        }
    }

    /// Draw a point with density `eval`; always inside the support.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec2<T> {
        let r = self.half_extent;
        match self.kind {
            KernelKind::Box => {
                let ux: f64 = rng.gen();
                let uy: f64 = rng.gen();
                self.center
                    + Vec2::new(r.x * lit(2.0 * ux - 1.0), r.y * lit(2.0 * uy - 1.0))
            }
            KernelKind::Disk => {
                let u1: f64 = rng.gen();
                let u2: f64 = rng.gen();
                let rad = u1.sqrt();
                let ang = 2.0 * std::f64::consts::PI * u2;
                self.center
                    + Vec2::new(r.x * lit(rad * ang.cos()), r.y * lit(rad * ang.sin()))
            }
            KernelKind::Gaussian => {
                let z = |rng: &mut R| loop {
                    let z: f64 = rng.sample(StandardNormal);
                    if z.abs() <= 3.0 {
                        return z;
                    }
                };
                let third = lit::<T>(1.0 / 3.0);
                self.center
                    + Vec2::new(r.x * third * lit(z(rng)), r.y * third * lit(z(rng)))
            }
        }
    }

    /// Piecewise-constant kernel value for a triangle: the density at its
    /// spatial centroid.
    pub fn on_triangle(&self, t: &NormalTriangle<T>) -> T {
        self.eval(t.spatial_centroid())
    }

    /// Inclusive range of leaf cells whose spatial box overlaps the support.
    pub fn cell_range(&self) -> (i64, i64, i64, i64) {
        let lo_x = (self.center.x - self.half_extent.x).floor().to_f64().unwrap() as i64;
        let hi_x = (self.center.x + self.half_extent.x).ceil().to_f64().unwrap() as i64 - 1;
        let lo_y = (self.center.y - self.half_extent.y).floor().to_f64().unwrap() as i64;
        let hi_y = (self.center.y + self.half_extent.y).ceil().to_f64().unwrap() as i64 - 1;
        (lo_x, hi_x.max(lo_x), lo_y, hi_y.max(lo_y))
    }
}
