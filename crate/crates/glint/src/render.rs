//! Desk-scale direct-lighting renderer over a normal-mapped plane.
//!
//! One perspective camera looks at the plane `z = 0`, whose texture
//! coordinates are `uv_scale` texels per world unit. Footprint half-extents
//! come from the per-pixel ray differentials. Materials: glinty specular
//! (Cook-Torrance assembly with the footprint NDF), aggregated diffuse
//! (projected-area based), and the pointwise normal-mapped diffuse baseline
//! it anti-aliases.

use crate::area::{diffuse_brdf, projected_area, smith_g, smith_lambda, SmithVariant};
use crate::field::{unproject, NormalField};
use crate::ggx::GgxTable;
use crate::hierarchy::HierRef;
use crate::imgio::ImageF32;
use crate::kernel::{FootprintQuery, KernelKind};
use crate::math::{lit, Vec2, Vec3};
use crate::pndf::{eval_pndf, ClampPolicy};
use crate::rng::derive_rng;
use crate::{Float, Result};
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Camera<T> {
    pub position: [T; 3],
    pub look_at: [T; 3],
    pub fov_y_deg: T,
    pub width: usize,
    pub height: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Light<T> {
    /// `direction` points from the surface toward the light.
    Directional { direction: [T; 3], radiance: T },
    Point { position: [T; 3], intensity: T },
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PareaMode {
    Analytic,
    Ggx,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Material<T> {
    Specular {
        f0: T,
        smith: SmithVariant,
        parea: PareaMode,
    },
    AggregatedDiffuse {
        albedo: [T; 3],
    },
    NaiveDiffuse {
        albedo: [T; 3],
    },
}

fn default_one<T: num_traits::One>() -> T {
    T::one()
}

fn default_spp() -> usize {
    1
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(bound(
    serialize = "T: Float + Serialize",
    deserialize = "T: Float + Deserialize<'de>"
))]
pub struct Scene<T> {
    pub camera: Camera<T>,
    /// Texels per world unit on the plane.
    pub uv_scale: T,
    /// Extra multiplier on the differential-derived footprint.
    #[serde(default = "default_one")]
    pub footprint_scale: T,
    pub lights: Vec<Light<T>>,
    pub material: Material<T>,
    pub kernel: KernelKind,
    #[serde(default = "default_spp")]
    pub spp: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_one")]
    pub exposure: T,
}

/// Everything a shading call needs besides the scene.
#[derive(Clone, Copy)]
pub struct RenderContext<'a, T> {
    pub field: &'a NormalField<T>,
    pub accel: Option<HierRef<'a, T>>,
    pub ggx: Option<&'a GgxTable<T>>,
    pub policy: ClampPolicy<T>,
}

struct CameraFrame<T> {
    position: Vec3<T>,
    forward: Vec3<T>,
    right: Vec3<T>,
    up: Vec3<T>,
    tan_half: T,
    aspect: T,
}

fn vec3<T: Float>(a: [T; 3]) -> Vec3<T> {
    Vec3::new(a[0], a[1], a[2])
}

impl<T: Float> Camera<T> {
    fn frame(&self) -> CameraFrame<T> {
        let position = vec3(self.position);
        let forward = (vec3(self.look_at) - position).normalized();
        let hint = if forward.y.abs() < lit(0.99) {
            Vec3::new(T::zero(), T::one(), T::zero())
        } else {
            Vec3::new(T::one(), T::zero(), T::zero())
        };
        let right = forward.cross(hint).normalized();
        let up = right.cross(forward);
        CameraFrame {
            position,
            forward,
            right,
            up,
            tan_half: (self.fov_y_deg.to_radians() * lit(0.5)).tan(),
            aspect: lit::<T>(self.width as f64 / self.height as f64),
        }
    }
}

impl<T: Float> CameraFrame<T> {
    fn ray(&self, width: usize, height: usize, px: T, py: T) -> (Vec3<T>, Vec3<T>) {
        let two = lit::<T>(2.0);
        let ndc_x = two * px / lit(width as f64) - T::one();
        let ndc_y = T::one() - two * py / lit(height as f64);
        let dir = (self.forward
            + self.right * (ndc_x * self.aspect * self.tan_half)
            + self.up * (ndc_y * self.tan_half))
            .normalized();
        (self.position, dir)
    }
}

/// Intersect a camera ray with the plane `z = 0`; texture coordinates in
/// texels.
fn hit_plane<T: Float>(origin: Vec3<T>, dir: Vec3<T>, uv_scale: T) -> Option<Vec2<T>> {
    if dir.z.abs() < lit(1e-12) {
        return None;
    }
    let t = -origin.z / dir.z;
    if t <= T::zero() {
        return None;
    }
    let hit = origin + dir * t;
    Some(Vec2::new(hit.x * uv_scale, hit.y * uv_scale))
}

/// Footprint of a pixel: center-ray hit plus half-extents from the
/// axis-aligned bound of the one-pixel ray differentials. `None` when the
/// center ray misses the plane.
pub fn pixel_footprint<T: Float>(scene: &Scene<T>, px: usize, py: usize) -> Option<FootprintQuery<T>> {
    let frame = scene.camera.frame();
    let (w, h) = (scene.camera.width, scene.camera.height);
    let half = lit::<T>(0.5);
    let at = |dx: f64, dy: f64| {
        let (o, d) = frame.ray(
            w,
            h,
            lit::<T>(px as f64 + dx) + half,
            lit::<T>(py as f64 + dy) + half,
        );
        hit_plane(o, d, scene.uv_scale)
    };
    let uv0 = at(0.0, 0.0)?;
    let uv_dx = at(1.0, 0.0)?;
    let uv_dy = at(0.0, 1.0)?;
    let d1 = uv_dx - uv0;
    let d2 = uv_dy - uv0;
    let rx = (d1.x.abs() + d2.x.abs()) * half * scene.footprint_scale;
    let ry = (d1.y.abs() + d2.y.abs()) * half * scene.footprint_scale;
    let floor = lit::<T>(1e-4);
    Some(FootprintQuery::new(
        uv0,
        Vec2::new(rx.max(floor), ry.max(floor)),
        scene.kernel,
    ))
}

pub fn schlick_fresnel<T: Float>(f0: T, cos: T) -> T {
    let c = T::one() - cos.max(T::zero()).min(T::one());
    f0 + (T::one() - f0) * c.powi(5)
}

/// Cook-Torrance assembly with the footprint NDF as `D`.
pub fn specular_brdf<T: Float>(d: T, fresnel: T, g: T, omega_i_z: T, omega_o_z: T) -> T {
    fresnel * g * d / (lit::<T>(4.0) * omega_i_z * omega_o_z)
}

fn parea<T: Float>(
    ctx: &RenderContext<'_, T>,
    mode: PareaMode,
    q: &FootprintQuery<T>,
    omega: Vec3<T>,
) -> Result<T> {
    match mode {
        PareaMode::Analytic => projected_area(ctx.field, ctx.accel, q, omega, ctx.policy),
        PareaMode::Ggx => {
            let table = ctx
                .ggx
                .expect("GGX projected-area mode requires a fitted table");
            Ok(table.projected_area(q.center, q.half_extent, omega))
        }
    }
}

/// Outgoing radiance of the glinty specular surface for one light direction.
#[allow(clippy::too_many_arguments)]
pub fn shade_specular<T: Float>(
    ctx: &RenderContext<'_, T>,
    f0: T,
    smith: SmithVariant,
    parea_mode: PareaMode,
    q: &FootprintQuery<T>,
    omega_i: Vec3<T>,
    omega_o: Vec3<T>,
    light: T,
) -> Result<T> {
    if omega_i.z <= T::zero() || omega_o.z <= T::zero() {
        return Ok(T::zero());
    }
    let h = (omega_i + omega_o).normalized();
    let m = h.xy();
    let d = eval_pndf(ctx.field, ctx.accel, q, m, ctx.policy)?.density;
    if d == T::zero() {
        return Ok(T::zero());
    }
    let p_i = parea(ctx, parea_mode, q, omega_i)?;
    let p_o = parea(ctx, parea_mode, q, omega_o)?;
    let g = smith_g(
        omega_i,
        omega_o,
        h,
        smith_lambda(p_i, omega_i.z),
        smith_lambda(p_o, omega_o.z),
        smith,
    );
    let f = schlick_fresnel(f0, h.dot(omega_o));
    Ok(specular_brdf(d, f, g, omega_i.z, omega_o.z) * light * omega_i.z)
}

/// Outgoing radiance of the aggregated diffuse surface (per channel factor
/// excluded): `P(omega_i) / pi * light`.
pub fn shade_diffuse<T: Float>(
    ctx: &RenderContext<'_, T>,
    q: &FootprintQuery<T>,
    omega_i: Vec3<T>,
    light: T,
) -> Result<T> {
    if omega_i.z <= T::zero() {
        return Ok(T::zero());
    }
    let p = projected_area(ctx.field, ctx.accel, q, omega_i, ctx.policy)?;
    Ok(diffuse_brdf(p, omega_i.z) * omega_i.z * light)
}

/// Pointwise normal-mapped Lambertian baseline at the hit point, including
/// the slope-space projection factor the aggregated model averages.
pub fn shade_naive_diffuse<T: Float>(
    ctx: &RenderContext<'_, T>,
    uv: Vec2<T>,
    omega_i: Vec3<T>,
    light: T,
) -> T {
    let n = ctx.field.interpolate(uv);
    let nt = match unproject(n) {
        Ok(v) => v,
        Err(_) => return T::zero(),
    };
    if nt.z < lit(1e-4) {
        return T::zero();
    }
    let cos = nt.dot(omega_i).max(T::zero());
    cos / (T::PI() * nt.z) * light
}

fn light_at<T: Float>(light: &Light<T>, hit_world: Vec3<T>) -> (Vec3<T>, T) {
    match light {
        Light::Directional { direction, radiance } => (vec3(*direction).normalized(), *radiance),
        Light::Point { position, intensity } => {
            let d = vec3(*position) - hit_world;
            let dist_sq = d.dot(d);
            (d.normalized(), *intensity / dist_sq)
        }
    }
}

/// Render the scene to a linear RGB image. Deterministic for a fixed seed
/// and independent of the thread count (per-pixel streams).
pub fn render<T: Float>(scene: &Scene<T>, ctx: &RenderContext<'_, T>) -> Result<ImageF32> {
    let (w, h) = (scene.camera.width, scene.camera.height);
    let frame = scene.camera.frame();
    let mut img = ImageF32::zeros(w, h, 3);
    let rows: Vec<Result<Vec<f32>>> = (0..h)
        .into_par_iter()
        .map(|py| {
            let mut row = vec![0f32; w * 3];
            for px in 0..w {
                let q0 = pixel_footprint(scene, px, py);
                let mut rng = derive_rng(scene.seed, (py * w + px) as u64);
                let mut acc = [0f64; 3];
                for _ in 0..scene.spp {
                    let (jx, jy) = if scene.spp == 1 {
                        (0.5, 0.5)
                    } else {
                        (rng.gen::<f64>(), rng.gen::<f64>())
                    };
                    let (o, d) = frame.ray(
                        w,
                        h,
                        lit::<T>(px as f64 + jx),
                        lit::<T>(py as f64 + jy),
                    );
                    let Some(uv) = hit_plane(o, d, scene.uv_scale) else {
                        continue;
                    };
                    let Some(base) = &q0 else { continue };
                    let q = FootprintQuery::new(uv, base.half_extent, scene.kernel);
                    let t = -o.z / d.z;
                    let hit_world = o + d * t;
                    let omega_o = -d;
                    let mut rgb = [T::zero(); 3];
                    for light in &scene.lights {
                        let (omega_i, radiance) = light_at(light, hit_world);
                        match &scene.material {
                            Material::Specular { f0, smith, parea } => {
                                let v = shade_specular(
                                    ctx, *f0, *smith, *parea, &q, omega_i, omega_o, radiance,
                                )?;
                                for c in &mut rgb {
                                    *c = *c + v;
                                }
                            }
                            Material::AggregatedDiffuse { albedo } => {
                                let v = shade_diffuse(ctx, &q, omega_i, radiance)?;
                                for (c, a) in rgb.iter_mut().zip(albedo) {
                                    *c = *c + v * *a;
                                }
                            }
                            Material::NaiveDiffuse { albedo } => {
                                let v = shade_naive_diffuse(ctx, uv, omega_i, radiance);
                                for (c, a) in rgb.iter_mut().zip(albedo) {
                                    *c = *c + v * *a;
                                }
                            }
                        }
                    }
                    for (a, c) in acc.iter_mut().zip(rgb) {
                        *a += c.to_f64().unwrap();
                    }
                }
                let inv = 1.0 / scene.spp as f64;
                for c in 0..3 {
                    row[px * 3 + c] = (acc[c] * inv) as f32;
                }
            }
            Ok(row)
        })
        .collect();
    for (py, row) in rows.into_iter().enumerate() {
        let row = row?;
        img.data[py * w * 3..(py + 1) * w * 3].copy_from_slice(&row);
    }
    Ok(img)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth;

    fn basic_scene(material: Material<f64>, spp: usize) -> Scene<f64> {
        Scene {
            camera: Camera {
                position: [0.0, 0.0, 4.0],
                look_at: [0.0, 0.0, 0.0],
                fov_y_deg: 30.0,
                width: 24,
                height: 24,
            },
            uv_scale: 32.0,
            footprint_scale: 1.0,
            lights: vec![Light::Directional {
                direction: [0.0, 0.0, 1.0],
                radiance: 1.0,
            }],
            material,
            kernel: KernelKind::Box,
            spp,
            seed: 7,
            exposure: 1.0,
        }
    }

    #[test]
    fn footprint_scales_with_resolution() {
        let scene = basic_scene(
            Material::AggregatedDiffuse {
                albedo: [0.5, 0.5, 0.5],
            },
            1,
        );
        let q = pixel_footprint(&scene, 12, 12).unwrap();
        let mut hi = scene.clone();
        hi.camera.width = 48;
        hi.camera.height = 48;
        let q_hi = pixel_footprint(&hi, 24, 24).unwrap();
        let ratio = q.half_extent.x / q_hi.half_extent.x;
        assert!((ratio - 2.0).abs() < 0.05, "ratio {ratio}");
        assert!(q.half_extent.y > 0.0);
    }

    #[test]
    fn oblique_view_stretches_footprint() {
        let mut scene = basic_scene(
            Material::AggregatedDiffuse {
                albedo: [0.5; 3],
            },
            1,
        );
        // tilt the camera so the plane is foreshortened in y
        scene.camera.position = [0.0, -6.0, 2.0];
        let q = pixel_footprint(&scene, 12, 12).unwrap();
        assert!(q.half_extent.y > q.half_extent.x, "{:?}", q.half_extent);
        // numeric check against the neighboring-pixel uv delta
        let frame = scene.camera.frame();
        let at = |px: f64, py: f64| {
            let (o, d) = frame.ray(24, 24, px, py);
            hit_plane(o, d, scene.uv_scale).unwrap()
        };
        let uv0 = at(12.5, 12.5);
        let du = at(13.5, 12.5) - uv0;
        let dv = at(12.5, 13.5) - uv0;
        let rx = (du.x.abs() + dv.x.abs()) / 2.0;
        let ry = (du.y.abs() + dv.y.abs()) / 2.0;
        assert!((q.half_extent.x - rx).abs() < 1e-12);
        assert!((q.half_extent.y - ry).abs() < 1e-12);
    }

    #[test]
    fn flat_specular_peak_and_falloff() {
        let field = synth::flat_field::<f64>(64, 64);
        let ctx = RenderContext {
            field: &field,
            accel: None,
            ggx: None,
            policy: ClampPolicy::default(),
        };
        let q = FootprintQuery::new(Vec2::new(32.0, 32.0), Vec2::new(8.0, 8.0), KernelKind::Box);
        let wo = Vec3::new(0.3, 0.0, 0.95).normalized();
        // mirror-aligned light: half vector exactly +z
        let wi = Vec3::new(-wo.x, -wo.y, wo.z);
        let peak = shade_specular(
            &ctx,
            1.0,
            SmithVariant::Separable,
            PareaMode::Analytic,
            &q,
            wi,
            wo,
            1.0,
        )
        .unwrap();
        assert!(peak > 1e4, "expected a delta-like peak, got {peak}");
        // rotate the light past the replacement triangle's angular radius
        let wi_off = Vec3::new(wi.x + 0.01, wi.y, wi.z).normalized();
        let off = shade_specular(
            &ctx,
            1.0,
            SmithVariant::Separable,
            PareaMode::Analytic,
            &q,
            wi_off,
            wo,
            1.0,
        )
        .unwrap();
        assert_eq!(off, 0.0);
    }

    #[test]
    fn flat_diffuse_is_lambertian() {
        let field = synth::flat_field::<f64>(64, 64);
        let ctx = RenderContext {
            field: &field,
            accel: None,
            ggx: None,
            policy: ClampPolicy::default(),
        };
        let scene = basic_scene(
            Material::AggregatedDiffuse {
                albedo: [0.8, 0.8, 0.8],
            },
            1,
        );
        let img = render(&scene, &ctx).unwrap();
        let expect = 0.8 / std::f64::consts::PI;
        for py in 8..16 {
            for px in 8..16 {
                let v = img.data[(py * 24 + px) * 3] as f64;
                assert!((v - expect).abs() < 1e-3, "pixel ({px},{py}) = {v}");
            }
        }
    }

    #[test]
    fn render_is_finite_and_nonnegative() {
        let field = synth::isotropic_field::<f64>(64, 64, 31, 0.3, 1.5);
        let ctx = RenderContext {
            field: &field,
            accel: None,
            ggx: None,
            policy: ClampPolicy::default(),
        };
        for material in [
            Material::Specular {
                f0: 1.0,
                smith: SmithVariant::HeightCorrelated,
                parea: PareaMode::Analytic,
            },
            Material::AggregatedDiffuse { albedo: [0.6; 3] },
            Material::NaiveDiffuse { albedo: [0.6; 3] },
        ] {
            let mut scene = basic_scene(material, 2);
            scene.lights = vec![Light::Point {
                position: [0.5, 0.5, 3.0],
                intensity: 8.0,
            }];
            let img = render(&scene, &ctx).unwrap();
            for v in &img.data {
                assert!(v.is_finite() && *v >= 0.0);
            }
        }
    }

    #[test]
    fn scene_json_roundtrip() {
        let scene = basic_scene(
            Material::Specular {
                f0: 0.9,
                smith: SmithVariant::Separable,
                parea: PareaMode::Analytic,
            },
            4,
        );
        let s = serde_json::to_string(&scene).unwrap();
        let back: Scene<f64> = serde_json::from_str(&s).unwrap();
        assert_eq!(back.spp, 4);
        assert_eq!(back.camera.width, 24);
        // defaults fill in when omitted
        let minimal = r#"{
            "camera": {"position": [0,0,4], "look_at": [0,0,0], "fov_y_deg": 30, "width": 8, "height": 8},
            "uv_scale": 16.0,
            "lights": [{"type": "directional", "direction": [0,0,1], "radiance": 1.0}],
            "material": {"type": "naive_diffuse", "albedo": [0.5, 0.5, 0.5]},
            "kernel": "box"
        }"#;
        let m: Scene<f64> = serde_json::from_str(minimal).unwrap();
        assert_eq!(m.spp, 1);
        assert_eq!(m.footprint_scale, 1.0);
    }
}
