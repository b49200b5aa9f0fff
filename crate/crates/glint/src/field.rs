//! Normal-map storage on the projected hemisphere and its triangulated
//! manifold view.
//!
//! Texels live at integer lattice points. A cell `(i, j)` spans
//! `[i, i+1] x [j, j+1]` and is split by its diagonal into an upper half
//! (spatial vertices `u0, u1, u2`) and a lower half (`u3, u2, u1`) where
//! `u0..u3` are the cell corners in (floor, floor), (ceil, floor),
//! (floor, ceil), (ceil, ceil) order. Addressing wraps, so a `W x H` map has
//! `W x H` cells and the hierarchies stay perfectly balanced quadtrees.

use crate::imgio::{self, ImageF32};
use crate::math::{lit, Vec2, Vec3};
use crate::{Error, Float, Result};
use std::path::Path;

/// A normal on the projected hemisphere: the xy components of a unit vector
/// with nonnegative z, so `|n| <= 1`. Cluster fits may leave the disk
/// slightly; the hierarchies account for that.
pub type ProjNormal<T> = Vec2<T>;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Half {
    Upper,
    Lower,
}

/// Cell coordinates may be unwrapped (outside `[0, W)`); texel fetches wrap,
/// spatial vertices keep the unwrapped position so tiled footprints weight
/// each repetition separately.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CellId {
    pub i: i64,
    pub j: i64,
    pub half: Half,
}

/// Image of a spatial triangle under the normal map, with the spatial
/// vertices it came from. The signed area is half the interpolation Jacobian
/// determinant (before clamping) and is cached because evaluation divides by
/// it per intersection.
#[derive(Debug, Clone, Copy)]
pub struct NormalTriangle<T> {
    pub spatial: [Vec2<T>; 3],
    pub normals: [Vec2<T>; 3],
    pub signed_area: T,
}

impl<T: Float> NormalTriangle<T> {
    pub fn new(spatial: [Vec2<T>; 3], normals: [Vec2<T>; 3]) -> Self {
        let signed_area = signed_area2(normals[0], normals[1], normals[2]);
        NormalTriangle {
            spatial,
            normals,
            signed_area,
        }
    }

    /// Unsigned area of the spatial triangle.
    #[inline]
    pub fn spatial_area(&self) -> T {
        signed_area2(self.spatial[0], self.spatial[1], self.spatial[2]).abs()
    }

    #[inline]
    pub fn spatial_centroid(&self) -> Vec2<T> {
        (self.spatial[0] + self.spatial[1] + self.spatial[2]) / lit(3.0)
    }

    /// Jacobian determinant of the map from this spatial triangle onto its
    /// normal triangle: ratio of the two areas. For leaf cells (spatial area
    /// 1/2) this is twice the normal-triangle area.
    #[inline]
    pub fn jacobian_det(&self) -> T {
        self.signed_area.abs() / self.spatial_area()
    }
}

/// Signed area of triangle (a, b, c) as `cross(c - a, b - a) / 2`.
#[inline]
pub fn signed_area2<T: Float>(a: Vec2<T>, b: Vec2<T>, c: Vec2<T>) -> T {
    (c - a).cross(b - a) * lit(0.5)
}

/// Row-major grid of projected-hemisphere normals with repeat addressing.
/// Immutable after construction.
#[derive(Debug, Clone)]
pub struct NormalField<T> {
    width: usize,
    height: usize,
    texels: Vec<Vec2<T>>,
}

impl<T: Float> NormalField<T> {
    /// Build from already-projected normals. Resolution must be a power of
    /// two of at least 2 per axis; texels outside the unit disk are pulled
    /// back onto it (quantized encodings overflow slightly).
    pub fn new(width: usize, height: usize, mut texels: Vec<Vec2<T>>) -> Result<Self> {
        if width < 2 || height < 2 || !width.is_power_of_two() || !height.is_power_of_two() {
            return Err(Error::NonPowerOfTwo { width, height });
        }
        assert_eq!(texels.len(), width * height, "texel count mismatch");
        for n in &mut texels {
            let len = n.norm();
            if len > T::one() {
                if len.to_f64().unwrap() > 1.0 + 1e-6 {
                    return Err(Error::InvalidNormal {
                        len: len.to_f64().unwrap(),
                    });
                }
                *n = *n / len;
            }
        }
        Ok(NormalField {
            width,
            height,
            texels,
        })
    }

    /// Build from 3D shading normals: renormalize in 3D, then keep xy.
    pub fn from_normals_3d(width: usize, height: usize, normals: &[Vec3<T>]) -> Result<Self> {
        let texels = normals
            .iter()
            .map(|n| {
                let n = n.normalized();
                Vec2::new(n.x, n.y)
            })
            .collect();
        Self::new(width, height, texels)
    }

    /// Decode a 3-channel image holding shading normals in `[-1, 1]`.
    pub fn from_image(img: &ImageF32) -> Result<Self> {
        if img.channels != 3 {
            return Err(Error::Image(format!(
                "normal map must have 3 channels, got {}",
                img.channels
            )));
        }
        let normals: Vec<Vec3<T>> = (0..img.width * img.height)
            .map(|k| {
                Vec3::new(
                    lit(img.data[3 * k] as f64),
                    lit(img.data[3 * k + 1] as f64),
                    lit(img.data[3 * k + 2] as f64),
                )
            })
            .collect();
        Self::from_normals_3d(img.width, img.height, &normals)
    }

    /// Load a normal map from a PFM file (float `xyz` in `[-1, 1]`) or a PNG
    /// (8/16-bit RGB with the `0.5 * (n + 1)` mapping).
    pub fn load(path: &Path) -> Result<Self> {
        let ext = path
            .extension()
            .and_then(|e| e.to_str())
            .unwrap_or("")
            .to_ascii_lowercase();
        let img = match ext.as_str() {
            "pfm" => imgio::read_pfm(path)?,
            "png" => imgio::read_png_normals(path)?,
            other => {
                return Err(Error::Image(format!(
                    "unsupported normal map extension '{other}' (expected pfm or png)"
                )))
            }
        };
        Self::from_image(&img)
    }

    #[inline]
    pub fn width(&self) -> usize {
        self.width
    }

    #[inline]
    pub fn height(&self) -> usize {
        self.height
    }

    /// Texel fetch with repeat addressing.
    #[inline]
    pub fn texel(&self, i: i64, j: i64) -> Vec2<T> {
        let i = i.rem_euclid(self.width as i64) as usize;
        let j = j.rem_euclid(self.height as i64) as usize;
        self.texels[j * self.width + i]
    }

    #[inline]
    pub fn texels(&self) -> &[Vec2<T>] {
        &self.texels
    }

    /// Corner normals `n0..n3` of the cell at `(i, j)`.
    #[inline]
    pub fn cell_corners(&self, i: i64, j: i64) -> [Vec2<T>; 4] {
        [
            self.texel(i, j),
            self.texel(i + 1, j),
            self.texel(i, j + 1),
            self.texel(i + 1, j + 1),
        ]
    }

    /// Barycentric interpolation of the normal map at `u` (repeat addressing).
    pub fn interpolate(&self, u: Vec2<T>) -> Vec2<T> {
        let (cell_i, cell_j, fx, fy) = split_coord(u);
        let [n0, n1, n2, n3] = self.cell_corners(cell_i, cell_j);
        interpolate_corners(n0, n1, n2, n3, fx, fy)
    }

    /// The half-cell triangle, with unwrapped spatial vertices.
    pub fn triangle(&self, cell: CellId) -> NormalTriangle<T> {
        let [n0, n1, n2, n3] = self.cell_corners(cell.i, cell.j);
        let x = lit::<T>(cell.i as f64);
        let y = lit::<T>(cell.j as f64);
        let one = T::one();
        let u0 = Vec2::new(x, y);
        let u1 = Vec2::new(x + one, y);
        let u2 = Vec2::new(x, y + one);
        let u3 = Vec2::new(x + one, y + one);
        match cell.half {
            Half::Upper => NormalTriangle::new([u0, u1, u2], [n0, n1, n2]),
            Half::Lower => NormalTriangle::new([u3, u2, u1], [n3, n2, n1]),
        }
    }

    /// `|det J|` of the interpolation over the given half cell, unclamped.
    pub fn jacobian_det(&self, cell: CellId) -> T {
        self.triangle(cell).signed_area.abs() * lit(2.0)
    }
}

/// Split a texture coordinate into cell indices and the in-cell fraction.
#[inline]
pub fn split_coord<T: Float>(u: Vec2<T>) -> (i64, i64, T, T) {
    let fx = u.x.floor();
    let fy = u.y.floor();
    (
        fx.to_f64().unwrap() as i64,
        fy.to_f64().unwrap() as i64,
        u.x - fx,
        u.y - fy,
    )
}

/// Barycentric blend of cell corner normals at fraction `(fx, fy)`.
#[inline]
pub fn interpolate_corners<T: Float>(
    n0: Vec2<T>,
    n1: Vec2<T>,
    n2: Vec2<T>,
    n3: Vec2<T>,
    fx: T,
    fy: T,
) -> Vec2<T> {
    let one = T::one();
    if fx + fy < one {
        n0 * (one - fx - fy) + n1 * fx + n2 * fy
    } else {
        n3 * (fx + fy - one) + n2 * (one - fx) + n1 * (one - fy)
    }
}

/// Lift a projected normal back to the hemisphere.
pub fn unproject<T: Float>(n: Vec2<T>) -> Result<Vec3<T>> {
    let len_sq = n.norm_sq();
    let lim = T::one() + lit(2e-9);
    if len_sq > lim {
        return Err(Error::InvalidNormal {
            len: len_sq.sqrt().to_f64().unwrap(),
        });
    }
    let z = (T::one() - len_sq).max(T::zero()).sqrt();
    Ok(Vec3::new(n.x, n.y, z))
}
