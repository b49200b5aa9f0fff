//! Small fixed-size vector/matrix helpers shared by the core modules.

use crate::Float;
use std::ops::{Add, AddAssign, Div, Mul, Neg, Sub};

/// Convert an `f64` literal into the working scalar type.
#[inline]
pub fn lit<T: Float>(v: f64) -> T {
    T::from_f64(v).expect("literal not representable")
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Vec2<T> {
    pub x: T,
    pub y: T,
}

impl<T: Float> Vec2<T> {
    #[inline]
    pub fn new(x: T, y: T) -> Self {
        Vec2 { x, y }
    }

    #[inline]
    pub fn zero() -> Self {
        Vec2 {
            x: T::zero(),
            y: T::zero(),
        }
    }

    #[inline]
    pub fn dot(self, o: Self) -> T {
        self.x * o.x + self.y * o.y
    }

    /// 2D cross product (z component of the 3D cross).
    #[inline]
    pub fn cross(self, o: Self) -> T {
        self.x * o.y - self.y * o.x
    }

    #[inline]
    pub fn norm_sq(self) -> T {
        self.dot(self)
    }

    #[inline]
    pub fn norm(self) -> T {
        self.norm_sq().sqrt()
    }

    #[inline]
    pub fn rotate(self, cos_a: T, sin_a: T) -> Self {
        Vec2::new(cos_a * self.x - sin_a * self.y, sin_a * self.x + cos_a * self.y)
    }

    #[inline]
    pub fn to_f64(self) -> Vec2<f64> {
        Vec2::new(self.x.to_f64().unwrap(), self.y.to_f64().unwrap())
    }

    #[inline]
    pub fn cast<U: Float>(self) -> Vec2<U> {
        Vec2::new(lit(self.x.to_f64().unwrap()), lit(self.y.to_f64().unwrap()))
    }
}

impl<T: Float> Add for Vec2<T> {
    type Output = Self;
    #[inline]
    fn add(self, o: Self) -> Self {
        Vec2::new(self.x + o.x, self.y + o.y)
    }
}

impl<T: Float> Sub for Vec2<T> {
    type Output = Self;
    #[inline]
    fn sub(self, o: Self) -> Self {
        Vec2::new(self.x - o.x, self.y - o.y)
    }
}

impl<T: Float> Mul<T> for Vec2<T> {
    type Output = Self;
    #[inline]
    fn mul(self, s: T) -> Self {
        Vec2::new(self.x * s, self.y * s)
    }
}

impl<T: Float> Div<T> for Vec2<T> {
    type Output = Self;
    #[inline]
    fn div(self, s: T) -> Self {
        Vec2::new(self.x / s, self.y / s)
    }
}

impl<T: Float> Neg for Vec2<T> {
    type Output = Self;
    #[inline]
    fn neg(self) -> Self {
        Vec2::new(-self.x, -self.y)
    }
}

impl<T: Float> AddAssign for Vec2<T> {
    #[inline]
    fn add_assign(&mut self, o: Self) {
        *self = *self + o;
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Vec3<T> {
    pub x: T,
    pub y: T,
    pub z: T,
}

impl<T: Float> Vec3<T> {
    #[inline]
    pub fn new(x: T, y: T, z: T) -> Self {
        Vec3 { x, y, z }
    }

    #[inline]
    pub fn dot(self, o: Self) -> T {
        self.x * o.x + self.y * o.y + self.z * o.z
    }

    #[inline]
    pub fn cross(self, o: Self) -> Self {
        Vec3::new(
            self.y * o.z - self.z * o.y,
            self.z * o.x - self.x * o.z,
            self.x * o.y - self.y * o.x,
        )
    }

    #[inline]
    pub fn norm(self) -> T {
        self.dot(self).sqrt()
    }

    #[inline]
    pub fn normalized(self) -> Self {
        self * (T::one() / self.norm())
    }

    #[inline]
    pub fn xy(self) -> Vec2<T> {
        Vec2::new(self.x, self.y)
    }
}

impl<T: Float> Add for Vec3<T> {
    type Output = Self;
    #[inline]
    fn add(self, o: Self) -> Self {
        Vec3::new(self.x + o.x, self.y + o.y, self.z + o.z)
    }
}

impl<T: Float> Sub for Vec3<T> {
    type Output = Self;
    #[inline]
    fn sub(self, o: Self) -> Self {
        Vec3::new(self.x - o.x, self.y - o.y, self.z - o.z)
    }
}

impl<T: Float> Mul<T> for Vec3<T> {
    type Output = Self;
    #[inline]
    fn mul(self, s: T) -> Self {
        Vec3::new(self.x * s, self.y * s, self.z * s)
    }
}

impl<T: Float> Neg for Vec3<T> {
    type Output = Self;
    #[inline]
    fn neg(self) -> Self {
        Vec3::new(-self.x, -self.y, -self.z)
    }
}

/// Eigendecomposition of a symmetric matrix by cyclic Jacobi rotations.
/// Returns eigenvalues and the matrix of eigenvectors stored as columns,
/// so `a = v * diag(w) * v^T`.
#[allow(clippy::needless_range_loop)]
pub fn jacobi_eigen_sym<T: Float, const N: usize>(mut a: [[T; N]; N]) -> ([T; N], [[T; N]; N]) {
    let mut v = [[T::zero(); N]; N];
    for (k, row) in v.iter_mut().enumerate() {
        row[k] = T::one();
    }
    let half = lit::<T>(0.5);
    for _sweep in 0..64 {
        let mut off = T::zero();
        for p in 0..N {
            for q in (p + 1)..N {
                off = off + a[p][q] * a[p][q];
            }
        }
        let mut diag = T::zero();
        for (p, row) in a.iter().enumerate() {
            diag = diag + row[p] * row[p];
        }
        if off <= T::epsilon() * T::epsilon() * (diag + T::min_positive_value()) {
            break;
        }
        for p in 0..N {
            for q in (p + 1)..N {
                if a[p][q].abs() <= T::min_positive_value() {
                    continue;
                }
                let theta = (a[q][q] - a[p][p]) * half / a[p][q];
                let t = {
                    let s = if theta >= T::zero() { T::one() } else { -T::one() };
                    s / (theta.abs() + (theta * theta + T::one()).sqrt())
                };
                let c = T::one() / (t * t + T::one()).sqrt();
                let s = t * c;
                for k in 0..N {
                    let akp = a[k][p];
                    let akq = a[k][q];
                    a[k][p] = c * akp - s * akq;
                    a[k][q] = s * akp + c * akq;
                }
                for k in 0..N {
                    let apk = a[p][k];
                    let aqk = a[q][k];
                    a[p][k] = c * apk - s * aqk;
                    a[q][k] = s * apk + c * aqk;
                }
                for row in v.iter_mut() {
                    let vkp = row[p];
                    let vkq = row[q];
                    row[p] = c * vkp - s * vkq;
                    row[q] = s * vkp + c * vkq;
                }
            }
        }
    }
    let mut w = [T::zero(); N];
    for (k, row) in a.iter().enumerate() {
        w[k] = row[k];
    }
    (w, v)
}

/// Rank-tolerant solve of the symmetric system `a x = b` via the
/// pseudo-inverse: eigenvalues with `|w| <= tol_rel * max|w|` are dropped.
#[allow(clippy::needless_range_loop)]
pub fn solve_sym_pinv<T: Float, const N: usize>(a: [[T; N]; N], b: [T; N], tol_rel: T) -> [T; N] {
    let (w, v) = jacobi_eigen_sym(a);
    let mut wmax = T::zero();
    for wk in &w {
        wmax = wmax.max(wk.abs());
    }
    // below f64's 1e-12 the cutoff is dominated by the type's own epsilon
    let tol = (tol_rel.max(T::epsilon() * lit(16.0))) * wmax;
    let mut x = [T::zero(); N];
    for k in 0..N {
        if w[k].abs() <= tol {
            continue;
        }
        let mut proj = T::zero();
        for r in 0..N {
            proj = proj + v[r][k] * b[r];
        }
        let scale = proj / w[k];
        for r in 0..N {
            x[r] = x[r] + v[r][k] * scale;
        }
    }
    x
}
