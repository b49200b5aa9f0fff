//! Command-line tools around the footprint-NDF library: hierarchy builds,
//! NDF/projected-area queries, oracle comparisons, benchmarks and renders.
//!
//! Exit codes: 0 success, 1 a comparison failed its threshold, 2 usage or
//! input errors.

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use glint::area::{projected_area, projected_area_mc};
use glint::ggx::{build_ggx_table, read_ggx_table, write_ggx_table, GgxTable};
use glint::hierarchy::{self, BuildParams, Hierarchy, HierRef};
use glint::imgio::{self, ImageF32};
use glint::kernel::{FootprintQuery, KernelKind};
use glint::pndf::{self, ClampPolicy};
use glint::render::{self, RenderContext, Scene};
use glint::rng::{derive_rng, seeded_rng};
use glint::{NormalField, Vec2, Vec3};
use serde::Deserialize;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::str::FromStr;
use std::time::Instant;

/// Defaults shared by every subcommand; flags override file values.
#[derive(Debug, Clone, Deserialize, Default)]
#[serde(deny_unknown_fields)]
struct Config {
    map: Option<PathBuf>,
    hierarchy: Option<PathBuf>,
    epsilon: Option<f64>,
    tau: Option<f64>,
    kernel: Option<String>,
    threads: Option<usize>,
    seed: Option<u64>,
}

#[derive(Parser)]
#[command(name = "glint", version, about = "Footprint NDF evaluation on normal maps")]
struct Cli {
    /// JSON config file supplying defaults for map, hierarchy, epsilon,
    /// tau, kernel, threads and seed
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Worker threads (falls back to GLINT_THREADS, then all cores)
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Clone)]
struct MapArgs {
    /// Normal map (.pfm float xyz or .png)
    #[arg(long)]
    map: Option<PathBuf>,
    /// Jacobian clamp threshold
    #[arg(long)]
    epsilon: Option<f64>,
}

#[derive(Args, Debug, Clone)]
struct QueryArgs {
    /// Footprint center in texels, e.g. 128.5,96
    #[arg(long, value_parser = parse_pair)]
    at: (f64, f64),
    /// Footprint half extents in texels, e.g. 16,16
    #[arg(long, value_parser = parse_pair)]
    footprint: (f64, f64),
    /// Kernel kind: gaussian | disk | box
    #[arg(long)]
    kernel: Option<String>,
}

#[derive(Args, Debug, Clone)]
struct HierArgs {
    /// Hierarchy cache (.pnmh) to accelerate evaluation
    #[arg(long)]
    hier: Option<PathBuf>,
    /// Force brute-force evaluation even when a cache is configured
    #[arg(long)]
    no_hier: bool,
    /// Cluster cut threshold
    #[arg(long)]
    tau: Option<f64>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Build the cluster and min-max hierarchies and write a .pnmh cache
    Build {
        #[command(flatten)]
        map: MapArgs,
        #[arg(long)]
        out: PathBuf,
        /// Keep raw (unclamped) Jacobian weights in the least-squares fits
        #[arg(long)]
        raw_weights: bool,
    },
    /// Evaluate the footprint NDF on a grid over [-1,1]^2 and write a PFM
    Ndf {
        #[command(flatten)]
        map: MapArgs,
        #[command(flatten)]
        query: QueryArgs,
        #[command(flatten)]
        hier: HierArgs,
        #[arg(long, default_value_t = 128)]
        grid: usize,
        #[arg(long)]
        out: PathBuf,
        /// Also write an 8-bit preview
        #[arg(long)]
        png: Option<PathBuf>,
        #[arg(long, default_value_t = 1.0)]
        exposure: f32,
    },
    /// Draw footprint-NDF samples and write them as "x y" lines
    Sample {
        #[command(flatten)]
        map: MapArgs,
        #[command(flatten)]
        query: QueryArgs,
        #[command(flatten)]
        hier: HierArgs,
        #[arg(long, default_value_t = 10000)]
        samples: usize,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Projected area over a hemisphere grid (PFM over omega_xy in [-1,1]^2)
    Area {
        #[command(flatten)]
        map: MapArgs,
        #[command(flatten)]
        query: QueryArgs,
        #[command(flatten)]
        hier: HierArgs,
        #[arg(long, default_value_t = 64)]
        omega_grid: usize,
        /// analytic | ggx | mc
        #[arg(long, default_value = "analytic")]
        mode: String,
        /// Fitted surrogate table for --mode ggx (defaults to map.ggx)
        #[arg(long)]
        ggx_table: Option<PathBuf>,
        /// Coarsest-detail level the table was fitted from
        #[arg(long, default_value_t = 2)]
        ggx_min_level: usize,
        #[arg(long, default_value_t = 100000)]
        mc_samples: usize,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        png: Option<PathBuf>,
    },
    /// Fit the GGX projected-area surrogate per mip level and grid cell
    FitGgx {
        #[command(flatten)]
        map: MapArgs,
        #[command(flatten)]
        hier: HierArgs,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 2)]
        min_level: usize,
    },
    /// Render a scene description over the normal-mapped plane
    Render {
        #[command(flatten)]
        map: MapArgs,
        #[command(flatten)]
        hier: HierArgs,
        #[arg(long)]
        scene: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        png: Option<PathBuf>,
        #[arg(long)]
        ggx_table: Option<PathBuf>,
        /// Coarsest-detail level the table was fitted from
        #[arg(long, default_value_t = 2)]
        ggx_min_level: usize,
    },
    /// Report mean candidate-triangle counts per query as JSON
    Bench {
        #[command(flatten)]
        map: MapArgs,
        #[command(flatten)]
        query_kernel: KernelOnly,
        /// Hierarchy cache; required
        #[arg(long)]
        hier: Option<PathBuf>,
        /// Footprint scales (texels covered per axis), e.g. 64,128,256
        #[arg(long, value_delimiter = ',', default_values_t = vec![64.0, 128.0, 256.0])]
        scales: Vec<f64>,
        #[arg(long, value_delimiter = ',', default_values_t = vec![0.0, 1e-4, 1e-3, 1e-2])]
        taus: Vec<f64>,
        #[arg(long, default_value_t = 32)]
        queries: usize,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Evaluate and bin-sample the same footprint; emit an L1 report as JSON
    OracleCompare {
        #[command(flatten)]
        map: MapArgs,
        #[command(flatten)]
        query: QueryArgs,
        #[arg(long, default_value_t = 128)]
        grid: usize,
        #[arg(long, default_value_t = 1000000)]
        samples: usize,
        #[arg(long, default_value_t = 50)]
        min_hits: u64,
        /// Evaluation points per bin axis (bin-averaged evaluation image,
        /// comparable with the binned histogram)
        #[arg(long, default_value_t = 4)]
        supersample: usize,
        #[arg(long)]
        seed: Option<u64>,
        /// Write <prefix>_eval.pfm and <prefix>_oracle.pfm
        #[arg(long)]
        out_prefix: Option<String>,
        /// Exit with status 1 when the relative L1 exceeds this bound
        #[arg(long)]
        max_l1: Option<f64>,
    },
}

#[derive(Args, Debug, Clone)]
struct KernelOnly {
    #[arg(long)]
    kernel: Option<String>,
}

fn parse_pair(s: &str) -> std::result::Result<(f64, f64), String> {
    let parts: Vec<&str> = s.split(',').collect();
    if parts.len() != 2 {
        return Err(format!("expected X,Y, got '{s}'"));
    }
    let x = parts[0].trim().parse().map_err(|e| format!("{e}"))?;
    let y = parts[1].trim().parse().map_err(|e| format!("{e}"))?;
    Ok((x, y))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => code,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(2)
        }
    }
}

struct Ctx {
    config: Config,
}

impl Ctx {
    fn map_path(&self, args: &MapArgs) -> Result<PathBuf> {
        args.map
            .clone()
            .or_else(|| self.config.map.clone())
            .context("no normal map given (--map or config)")
    }

    fn load_field(&self, args: &MapArgs) -> Result<NormalField<f64>> {
        let path = self.map_path(args)?;
        NormalField::load(&path).with_context(|| format!("loading {}", path.display()))
    }

    fn epsilon(&self, args: &MapArgs) -> f64 {
        args.epsilon.or(self.config.epsilon).unwrap_or(1e-6)
    }

    fn policy(&self, args: &MapArgs) -> ClampPolicy<f64> {
        ClampPolicy {
            epsilon: self.epsilon(args),
        }
    }

    fn tau(&self, hier: &HierArgs) -> f64 {
        hier.tau.or(self.config.tau).unwrap_or(1e-3)
    }

    fn kernel(&self, flag: &Option<String>) -> Result<KernelKind> {
        let name = flag
            .clone()
            .or_else(|| self.config.kernel.clone())
            .unwrap_or_else(|| "gaussian".to_string());
        KernelKind::from_str(&name).map_err(anyhow::Error::msg)
    }

    fn seed(&self, flag: Option<u64>) -> u64 {
        flag.or(self.config.seed).unwrap_or(0)
    }

    fn load_hier(&self, args: &HierArgs, field: &NormalField<f64>) -> Result<Option<Hierarchy<f64>>> {
        if args.no_hier {
            return Ok(None);
        }
        let path = match args.hier.clone().or_else(|| self.config.hierarchy.clone()) {
            Some(p) => p,
            None => return Ok(None),
        };
        let mut h: Hierarchy<f64> = hierarchy::read_cache(&path)
            .with_context(|| format!("loading hierarchy {}", path.display()))?;
        // leaf nodes alias the map's texels; undo the cache quantization
        h.alias_leaf_corners(field)?;
        Ok(Some(h))
    }

    fn query(&self, q: &QueryArgs) -> Result<FootprintQuery<f64>> {
        if q.footprint.0 <= 0.0 || q.footprint.1 <= 0.0 {
            bail!("footprint half extents must be positive");
        }
        Ok(FootprintQuery::new(
            Vec2::new(q.at.0, q.at.1),
            Vec2::new(q.footprint.0, q.footprint.1),
            self.kernel(&q.kernel)?,
        ))
    }
}

fn run(cli: Cli) -> Result<ExitCode> {
    let config: Config = match &cli.config {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .with_context(|| format!("reading config {}", path.display()))?;
            serde_json::from_str(&text).context("parsing config JSON")?
        }
        None => Config::default(),
    };
    let threads = cli
        .threads
        .or(config.threads)
        .or_else(|| std::env::var("GLINT_THREADS").ok().and_then(|v| v.parse().ok()));
    if let Some(n) = threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n.max(1))
            .build_global()
            .ok();
    }
    let ctx = Ctx { config };
    match cli.command {
        Command::Build { map, out, raw_weights } => cmd_build(&ctx, &map, &out, raw_weights),
        Command::Ndf {
            map,
            query,
            hier,
            grid,
            out,
            png,
            exposure,
        } => cmd_ndf(&ctx, &map, &query, &hier, grid, &out, png.as_deref(), exposure),
        Command::Sample {
            map,
            query,
            hier,
            samples,
            seed,
            out,
        } => cmd_sample(&ctx, &map, &query, &hier, samples, seed, &out),
        Command::Area {
            map,
            query,
            hier,
            omega_grid,
            mode,
            ggx_table,
            ggx_min_level,
            mc_samples,
            seed,
            out,
            png,
        } => cmd_area(
            &ctx, &map, &query, &hier, omega_grid, &mode, ggx_table, ggx_min_level, mc_samples,
            seed, &out, png.as_deref(),
        ),
        Command::FitGgx {
            map,
            hier,
            out,
            min_level,
        } => cmd_fit_ggx(&ctx, &map, &hier, &out, min_level),
        Command::Render {
            map,
            hier,
            scene,
            out,
            png,
            ggx_table,
            ggx_min_level,
        } => cmd_render(&ctx, &map, &hier, &scene, &out, png.as_deref(), ggx_table, ggx_min_level),
        Command::Bench {
            map,
            query_kernel,
            hier,
            scales,
            taus,
            queries,
            seed,
        } => cmd_bench(&ctx, &map, &query_kernel, hier, &scales, &taus, queries, seed),
        Command::OracleCompare {
            map,
            query,
            grid,
            samples,
            min_hits,
            supersample,
            seed,
            out_prefix,
            max_l1,
        } => cmd_oracle_compare(
            &ctx, &map, &query, grid, samples, min_hits, supersample, seed, out_prefix, max_l1,
        ),
    }
}

fn cmd_build(ctx: &Ctx, map: &MapArgs, out: &Path, raw_weights: bool) -> Result<ExitCode> {
    let field = ctx.load_field(map)?;
    let params = BuildParams {
        epsilon: ctx.epsilon(map),
        clamp_weights: !raw_weights,
    };
    let start = Instant::now();
    let hier = hierarchy::build(&field, params);
    let elapsed = start.elapsed().as_secs_f64();
    hierarchy::write_cache(&hier, out)?;
    println!(
        "built {} levels, {} nodes in {:.2}s -> {}",
        hier.depth() + 1,
        hier.node_count(),
        elapsed,
        out.display()
    );
    Ok(ExitCode::SUCCESS)
}

#[allow(clippy::too_many_arguments)]
fn cmd_ndf(
    ctx: &Ctx,
    map: &MapArgs,
    query: &QueryArgs,
    hier_args: &HierArgs,
    grid: usize,
    out: &Path,
    png: Option<&Path>,
    exposure: f32,
) -> Result<ExitCode> {
    let field = ctx.load_field(map)?;
    let q = ctx.query(query)?;
    let policy = ctx.policy(map);
    let hier = ctx.load_hier(hier_args, &field)?;
    let accel = hier.as_ref().map(|h| HierRef {
        hier: h,
        tau: ctx.tau(hier_args),
    });
    let img = pndf::pndf_image(&field, accel, &q, grid, policy);
    let image = ImageF32::new(grid, grid, 1, img.iter().map(|v| *v as f32).collect());
    imgio::write_pfm(&image, out)?;
    if let Some(p) = png {
        imgio::write_png(&image, p, exposure)?;
    }
    Ok(ExitCode::SUCCESS)
}

fn cmd_sample(
    ctx: &Ctx,
    map: &MapArgs,
    query: &QueryArgs,
    hier_args: &HierArgs,
    samples: usize,
    seed: Option<u64>,
    out: &Path,
) -> Result<ExitCode> {
    let field = ctx.load_field(map)?;
    let q = ctx.query(query)?;
    let policy = ctx.policy(map);
    let hier = ctx.load_hier(hier_args, &field)?;
    let accel = hier.as_ref().map(|h| HierRef {
        hier: h,
        tau: ctx.tau(hier_args),
    });
    let mut rng = seeded_rng(ctx.seed(seed));
    let mut text = String::with_capacity(samples * 24);
    for _ in 0..samples {
        let m = pndf::sample_pndf(&field, accel, &q, policy, &mut rng);
        text.push_str(&format!("{} {}\n", m.x, m.y));
    }
    std::fs::write(out, text)?;
    Ok(ExitCode::SUCCESS)
}

#[allow(clippy::too_many_arguments)]
fn cmd_area(
    ctx: &Ctx,
    map: &MapArgs,
    query: &QueryArgs,
    hier_args: &HierArgs,
    omega_grid: usize,
    mode: &str,
    ggx_table: Option<PathBuf>,
    ggx_min_level: usize,
    mc_samples: usize,
    seed: Option<u64>,
    out: &Path,
    png: Option<&Path>,
) -> Result<ExitCode> {
    let field = ctx.load_field(map)?;
    let q = ctx.query(query)?;
    let policy = ctx.policy(map);
    let hier = ctx.load_hier(hier_args, &field)?;
    let accel = hier.as_ref().map(|h| HierRef {
        hier: h,
        tau: ctx.tau(hier_args),
    });
    let table: Option<GgxTable<f64>> = if mode == "ggx" {
        let path = match ggx_table {
            Some(p) => p,
            None => ctx.map_path(map)?.with_extension("ggx"),
        };
        Some(read_ggx_table(&path, field.width(), field.height(), ggx_min_level)?)
    } else {
        None
    };
    let seed = ctx.seed(seed);
    let mut data = vec![0f32; omega_grid * omega_grid];
    for gy in 0..omega_grid {
        for gx in 0..omega_grid {
            let x = -1.0 + (gx as f64 + 0.5) * 2.0 / omega_grid as f64;
            let y = -1.0 + (gy as f64 + 0.5) * 2.0 / omega_grid as f64;
            let z_sq = 1.0 - x * x - y * y;
            if z_sq <= 0.0 {
                continue;
            }
            let w = Vec3::new(x, y, z_sq.sqrt());
            let p = match mode {
                "analytic" => projected_area(&field, accel, &q, w, policy)?,
                "ggx" => table.as_ref().unwrap().projected_area(q.center, q.half_extent, w),
                "mc" => {
                    let mut rng = derive_rng(seed, (gy * omega_grid + gx) as u64);
                    projected_area_mc(&field, &q, w, mc_samples, policy, &mut rng).0
                }
                other => bail!("unknown area mode '{other}' (analytic|ggx|mc)"),
            };
            data[gy * omega_grid + gx] = p as f32;
        }
    }
    let image = ImageF32::new(omega_grid, omega_grid, 1, data);
    imgio::write_pfm(&image, out)?;
    if let Some(p) = png {
        imgio::write_png(&image, p, 1.0)?;
    }
    Ok(ExitCode::SUCCESS)
}

fn cmd_fit_ggx(
    ctx: &Ctx,
    map: &MapArgs,
    hier_args: &HierArgs,
    out: &Path,
    min_level: usize,
) -> Result<ExitCode> {
    let field = ctx.load_field(map)?;
    let policy = ctx.policy(map);
    let hier = ctx.load_hier(hier_args, &field)?;
    let accel = hier.as_ref().map(|h| HierRef {
        hier: h,
        tau: ctx.tau(hier_args),
    });
    let start = Instant::now();
    let table = build_ggx_table(&field, accel, policy, min_level)?;
    write_ggx_table(&table, out)?;
    println!(
        "fitted {} levels (from level {}) in {:.2}s -> {}",
        table.levels.len(),
        table.min_level,
        start.elapsed().as_secs_f64(),
        out.display()
    );
    Ok(ExitCode::SUCCESS)
}

#[allow(clippy::too_many_arguments)]
fn cmd_render(
    ctx: &Ctx,
    map: &MapArgs,
    hier_args: &HierArgs,
    scene_path: &Path,
    out: &Path,
    png: Option<&Path>,
    ggx_table: Option<PathBuf>,
    ggx_min_level: usize,
) -> Result<ExitCode> {
    let field = ctx.load_field(map)?;
    let text = std::fs::read_to_string(scene_path)
        .with_context(|| format!("reading scene {}", scene_path.display()))?;
    let scene: Scene<f64> = serde_json::from_str(&text).context("parsing scene JSON")?;
    let policy = ctx.policy(map);
    let hier = ctx.load_hier(hier_args, &field)?;
    let accel = hier.as_ref().map(|h| HierRef {
        hier: h,
        tau: ctx.tau(hier_args),
    });
    let needs_ggx = matches!(
        scene.material,
        render::Material::Specular {
            parea: render::PareaMode::Ggx,
            ..
        }
    );
    let table: Option<GgxTable<f64>> = if needs_ggx {
        let path = match ggx_table {
            Some(p) => p,
            None => ctx.map_path(map)?.with_extension("ggx"),
        };
        Some(read_ggx_table(&path, field.width(), field.height(), ggx_min_level)?)
    } else {
        None
    };
    let rctx = RenderContext {
        field: &field,
        accel,
        ggx: table.as_ref(),
        policy,
    };
    let img = render::render(&scene, &rctx)?;
    imgio::write_pfm(&img, out)?;
    if let Some(p) = png {
        imgio::write_png(&img, p, scene.exposure as f32)?;
    }
    Ok(ExitCode::SUCCESS)
}

#[allow(clippy::too_many_arguments)]
fn cmd_bench(
    ctx: &Ctx,
    map: &MapArgs,
    kernel: &KernelOnly,
    hier_path: Option<PathBuf>,
    scales: &[f64],
    taus: &[f64],
    queries: usize,
    seed: Option<u64>,
) -> Result<ExitCode> {
    let field = ctx.load_field(map)?;
    let policy = ctx.policy(map);
    let kind = ctx.kernel(&kernel.kernel)?;
    let hier = match hier_path.or_else(|| ctx.config.hierarchy.clone()) {
        Some(p) => hierarchy::read_cache::<f64>(&p)?,
        None => bail!("bench needs a hierarchy cache (--hier)"),
    };
    let seed = ctx.seed(seed);
    let mut scale_reports = Vec::new();
    for &scale in scales {
        let r = scale / 2.0;
        let mut tau_reports = Vec::new();
        for &tau in taus {
            let mut cut_triangles = 0.0f64;
            let mut tested = 0.0f64;
            let mut hits = 0.0f64;
            for k in 0..queries {
                let mut rng = derive_rng(seed, (k as u64) << 8);
                use rand::Rng;
                let q = FootprintQuery::new(
                    Vec2::new(
                        rng.gen_range(0.0..field.width() as f64),
                        rng.gen_range(0.0..field.height() as f64),
                    ),
                    Vec2::new(r, r),
                    kind,
                );
                let cut = hierarchy::select_cut(&hier, &q, tau);
                cut_triangles += 2.0 * cut.nodes.len() as f64 / queries as f64;
                // work at a representative normal drawn from the NDF itself
                let m = pndf::sample_pndf(&field, None, &q, policy, &mut rng);
                let v = pndf::eval_pndf(
                    &field,
                    Some(HierRef { hier: &hier, tau }),
                    &q,
                    m,
                    policy,
                )?;
                tested += v.candidates_tested as f64 / queries as f64;
                hits += v.intersection_count as f64 / queries as f64;
            }
            tau_reports.push(serde_json::json!({
                "tau": tau,
                "mean_cut_triangles": cut_triangles,
                "mean_tested_triangles": tested,
                "mean_intersections": hits,
            }));
        }
        scale_reports.push(serde_json::json!({
            "scale": scale,
            "taus": tau_reports,
        }));
    }
    let report = serde_json::json!({
        "seed": seed,
        "queries": queries,
        "kernel": kind.to_string(),
        "scales": scale_reports,
    });
    println!("{}", serde_json::to_string_pretty(&report)?);
    Ok(ExitCode::SUCCESS)
}

#[allow(clippy::too_many_arguments)]
fn cmd_oracle_compare(
    ctx: &Ctx,
    map: &MapArgs,
    query: &QueryArgs,
    grid: usize,
    samples: usize,
    min_hits: u64,
    supersample: usize,
    seed: Option<u64>,
    out_prefix: Option<String>,
    max_l1: Option<f64>,
) -> Result<ExitCode> {
    let field = ctx.load_field(map)?;
    let q = ctx.query(query)?;
    let policy = ctx.policy(map);
    let seed = ctx.seed(seed);
    let mut rng = seeded_rng(seed);
    let oracle = pndf::pndf_bin_oracle(&field, &q, samples, grid, policy, &mut rng);
    let sub = supersample.max(1);
    let fine = pndf::pndf_image(&field, None, &q, grid * sub, policy);
    // average the fine evaluation down to bin means
    let mut eval = vec![0.0f64; grid * grid];
    for fy in 0..grid * sub {
        for fx in 0..grid * sub {
            eval[(fy / sub) * grid + fx / sub] += fine[fy * (grid * sub) + fx];
        }
    }
    for v in &mut eval {
        *v /= (sub * sub) as f64;
    }
    let mut num = 0.0;
    let mut den = 0.0;
    let mut bins = 0usize;
    for (value, (&density, &count)) in eval
        .iter()
        .zip(oracle.density.iter().zip(&oracle.counts))
    {
        if count >= min_hits {
            num += (value - density).abs();
            den += density;
            bins += 1;
        }
    }
    let l1_rel = if den > 0.0 { num / den } else { f64::NAN };
    if let Some(prefix) = &out_prefix {
        let to_img = |v: &[f64]| {
            ImageF32::new(grid, grid, 1, v.iter().map(|x| *x as f32).collect())
        };
        imgio::write_pfm(&to_img(&eval), Path::new(&format!("{prefix}_eval.pfm")))?;
        imgio::write_pfm(
            &to_img(&oracle.density),
            Path::new(&format!("{prefix}_oracle.pfm")),
        )?;
    }
    let report = serde_json::json!({
        "l1_rel": l1_rel,
        "bins_compared": bins,
        "seed": seed,
        "grid": grid,
        "samples": samples,
        "supersample": sub,
    });
    println!("{}", serde_json::to_string_pretty(&report)?);
    if let Some(bound) = max_l1 {
        if l1_rel.is_nan() || l1_rel > bound {
            eprintln!("relative L1 {l1_rel} exceeds bound {bound}");
            return Ok(ExitCode::from(1));
        }
    }
    Ok(ExitCode::SUCCESS)
}
