//! The iterative reconstruction loop and its evaluation helpers.
//!
//! After a single backscatter removal the loop alternates: build the
//! forward-scatter kernel from the current shape, deconvolve, solve normals,
//! integrate them into a new shape. Kernels are rebuilt every iteration.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;
use std::time::Instant;

use crate::config::RunConfig;
use crate::error::{Error, Result};
use crate::grid::{Grid, Mask, MaskIndex};
use crate::kernel::SparseKernel;
use crate::pfm;
use crate::reconstruct::{integrate_normals, remove_backscatter, remove_forward_scatter, solve_normals};
use crate::render::{render_stack, Noise, RenderOutput};
use crate::scene::{make_plane_init, make_sphere_scene, normals_from_depth, Camera, ImageStack, Medium, Scene, Vec3};
use crate::solver::BiCgStabParams;
use crate::tables::Tables;

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineSettings {
    pub support: usize,
    pub solver: BiCgStabParams,
    pub max_iterations: usize,
    pub convergence_deg: f64,
    pub init_depth: f64,
}

impl PipelineSettings {
    pub fn from_config(cfg: &RunConfig) -> Self {
        PipelineSettings {
            support: cfg.kernel.support,
            solver: cfg.solver.params(),
            max_iterations: cfg.pipeline.max_iterations,
            convergence_deg: cfg.pipeline.convergence_deg,
            init_depth: cfg.init_depth(),
        }
    }
}

/// Captured data and calibration handed to the pipeline.
#[derive(Debug, Clone, Copy)]
pub struct PipelineInput<'a> {
    pub observed: &'a ImageStack,
    pub no_object: &'a ImageStack,
    pub camera: &'a Camera,
    pub medium: &'a Medium,
    pub tables: &'a Tables,
    /// Reference normals for error reporting only.
    pub ground_truth: Option<&'a Grid<Vec3>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct IterationMetrics {
    pub iteration: usize,
    /// Mean angle between this iteration's normals and the previous ones, degrees.
    pub angular_change: f64,
    /// Mean angular error against the reference normals, degrees.
    pub error: Option<f64>,
    /// BiCGStab iterations summed over light images.
    pub solver_iterations: usize,
    pub kernel_nnz: usize,
    pub epsilon: f64,
    pub flagged: usize,
    pub clamped: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Stage {
    BackscatterRemoved,
    KernelBuilt { nnz: usize, epsilon: f64, shape_mean_depth: f64 },
    ForwardScatterRemoved { solver_iterations: usize, corrections: Vec<f64> },
    NormalsSolved { flagged: usize },
    ShapeUpdated { mean_depth: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct StageEvent {
    /// 0 for the one-off preprocessing stage.
    pub iteration: usize,
    pub stage: Stage,
}

#[derive(Debug, Clone)]
pub struct PipelineOutput {
    pub normals: Grid<Vec3>,
    pub albedo: Grid<f64>,
    pub depth: Grid<f64>,
    pub metrics: Vec<IterationMetrics>,
    pub converged: bool,
    pub stages: Vec<StageEvent>,
    /// Wall-clock seconds per iteration.
    pub timings: Vec<f64>,
}

/// Mean over the mask of the angle between corresponding normals, in degrees.
pub fn mean_angular_error(estimate: &Grid<Vec3>, reference: &Grid<Vec3>, mask: &Mask) -> Result<f64> {
    let map = angular_error_map(estimate, reference, mask)?;
    let n = mask.count();
    if n == 0 {
        return Err(Error::InvalidParameter("mean angular error over an empty mask".into()));
    }
    let sum: f64 = map
        .as_slice()
        .iter()
        .zip(mask.as_slice())
        .filter(|(_, &m)| m)
        .map(|(e, _)| e)
        .sum();
    Ok(sum / n as f64)
}

/// Per-pixel angle in degrees; 0 outside the mask.
pub fn angular_error_map(estimate: &Grid<Vec3>, reference: &Grid<Vec3>, mask: &Mask) -> Result<Grid<f64>> {
    if estimate.dims() != reference.dims() || estimate.dims() != mask.dims() {
        return Err(Error::Dimension("normal maps and mask differ in size".into()));
    }
    if mask.count() == 0 {
        return Err(Error::InvalidParameter("angular error over an empty mask".into()));
    }
    let (w, h) = mask.dims();
    Ok(Grid::from_fn(w, h, |x, y| {
        if *mask.get(x, y) {
            let (a, b) = (estimate.get(x, y), reference.get(x, y));
            a.cross(b).norm().atan2(a.dot(b)).to_degrees()
        } else {
            0.0
        }
    }))
}

fn mean_masked(grid: &Grid<f64>, mask: &Mask) -> f64 {
    let idx = MaskIndex::new(mask);
    idx.gather(grid).iter().sum::<f64>() / idx.len() as f64
}

fn dump_stack(dir: &Path, prefix: &str, stack: &ImageStack) -> Result<()> {
    for (k, img) in stack.images.iter().enumerate() {
        pfm::write_scalar(&dir.join(format!("{prefix}_{k:02}.pfm")), img)?;
    }
    Ok(())
}

/// Runs the iterative algorithm from a fronto-parallel plane.
///
/// With `dump` set, intermediate stacks and maps are written there as PFM.
pub fn run_pipeline(input: &PipelineInput, settings: &PipelineSettings, dump: Option<&Path>) -> Result<PipelineOutput> {
    let mask = &input.observed.mask;
    if let Some(dir) = dump {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    let mut stages = Vec::new();
    let lprime = remove_backscatter(input.observed, input.no_object)?;
    stages.push(StageEvent {
        iteration: 0,
        stage: Stage::BackscatterRemoved,
    });
    if let Some(dir) = dump {
        dump_stack(dir, "lprime", &lprime)?;
    }

    let mut scene = make_plane_init(mask, settings.init_depth, input.camera)?;
    let mut previous = scene.normals.clone();
    let mut metrics = Vec::new();
    let mut timings = Vec::new();
    let mut albedo = scene.albedo.clone();
    let mut converged = false;

    for iteration in 1..=settings.max_iterations {
        let start = Instant::now();
        let kernel = SparseKernel::build(&scene, input.camera, input.medium, &input.tables.f, settings.support)?;
        let (kernel_nnz, epsilon) = (kernel.nnz(), kernel.epsilon());
        stages.push(StageEvent {
            iteration,
            stage: Stage::KernelBuilt {
                nnz: kernel_nnz,
                epsilon,
                shape_mean_depth: mean_masked(&scene.depth, mask),
            },
        });
        let fs_removed = remove_forward_scatter(&lprime, &kernel, &settings.solver)?;
        drop(kernel);
        let solver_iterations = fs_removed.reports.iter().map(|r| r.iterations).sum();
        stages.push(StageEvent {
            iteration,
            stage: Stage::ForwardScatterRemoved {
                solver_iterations,
                corrections: fs_removed.corrections.clone(),
            },
        });

        let ns = solve_normals(
            &fs_removed.reflected,
            &scene.depth,
            input.camera,
            input.medium,
            &input.tables.g,
            &previous,
        )?;
        let flagged = ns.flagged_count();
        stages.push(StageEvent {
            iteration,
            stage: Stage::NormalsSolved { flagged },
        });
        let angular_change = mean_angular_error(&ns.normals, &previous, mask)?;
        let error = input
            .ground_truth
            .map(|gt| mean_angular_error(&ns.normals, gt, mask))
            .transpose()?;

        let anchor = mean_masked(&scene.depth, mask);
        let depth = integrate_normals(&ns.normals, mask, input.camera, anchor)?;
        let from_depth = normals_from_depth(&depth, mask, input.camera);
        let normals = Grid::from_fn(mask.width(), mask.height(), |x, y| {
            if *from_depth.valid.get(x, y) {
                *from_depth.normals.get(x, y)
            } else {
                *ns.normals.get(x, y)
            }
        });
        stages.push(StageEvent {
            iteration,
            stage: Stage::ShapeUpdated {
                mean_depth: mean_masked(&depth, mask),
            },
        });
        if let Some(dir) = dump {
            dump_stack(dir, &format!("iter{iteration:02}_reflected"), &fs_removed.reflected)?;
            pfm::write_normals(&dir.join(format!("iter{iteration:02}_normals.pfm")), &ns.normals)?;
            pfm::write_scalar(&dir.join(format!("iter{iteration:02}_depth.pfm")), &depth)?;
        }

        scene = Scene {
            depth,
            normals,
            albedo: ns.albedo.clone(),
            mask: mask.clone(),
        };
        previous = ns.normals;
        albedo = ns.albedo;
        metrics.push(IterationMetrics {
            iteration,
            angular_change,
            error,
            solver_iterations,
            kernel_nnz,
            epsilon,
            flagged,
            clamped: fs_removed.clamped,
        });
        timings.push(start.elapsed().as_secs_f64());
        log::info!(
            "iteration {iteration}: change {angular_change:.4} deg{}",
            error.map(|e| format!(", error {e:.4} deg")).unwrap_or_default()
        );
        if iteration > 1 && angular_change < settings.convergence_deg {
            converged = true;
            break;
        }
    }
    if !converged {
        log::warn!("pipeline stopped after {} iterations without converging", settings.max_iterations);
    }
    Ok(PipelineOutput {
        normals: previous,
        albedo,
        depth: scene.depth,
        metrics,
        converged,
        stages,
        timings,
    })
}

/// Reconstruction with scattering removed using the true shape: one kernel
/// build, deconvolution and normal solve. Returns the normals and their mean
/// angular error against the truth.
pub fn gt_oracle(input: &PipelineInput, truth: &Scene, settings: &PipelineSettings) -> Result<(Grid<Vec3>, f64)> {
    let lprime = remove_backscatter(input.observed, input.no_object)?;
    let kernel = SparseKernel::build(truth, input.camera, input.medium, &input.tables.f, settings.support)?;
    let fs_removed = remove_forward_scatter(&lprime, &kernel, &settings.solver)?;
    let ns = solve_normals(
        &fs_removed.reflected,
        &truth.depth,
        input.camera,
        input.medium,
        &input.tables.g,
        &truth.normals,
    )?;
    let err = mean_angular_error(&ns.normals, &truth.normals, &truth.mask)?;
    Ok((ns.normals, err))
}

pub fn gt_oracle_error(input: &PipelineInput, truth: &Scene, settings: &PipelineSettings) -> Result<f64> {
    gt_oracle(input, truth, settings).map(|(_, e)| e)
}

/// Ground truth and rendered stacks for the configured sphere.
pub fn render_sphere(cfg: &RunConfig, tables: &Tables) -> Result<(Scene, Camera, RenderOutput)> {
    let camera = cfg.camera.camera()?;
    let c = cfg.scene.center;
    let truth = make_sphere_scene(&camera, Vec3::new(c[0], c[1], c[2]), cfg.scene.radius, cfg.scene.albedo)?;
    let lights = cfg.lights.lights()?;
    let noise = (cfg.render.noise_sigma > 0.0).then_some(Noise {
        sigma: cfg.render.noise_sigma,
        seed: cfg.render.seed,
    });
    let rendered = render_stack(&truth, &lights, &cfg.medium, &camera, tables, cfg.render.d_max, noise)?;
    Ok((truth, camera, rendered))
}

#[derive(Debug, Clone)]
pub struct DemoOutput {
    pub truth: Scene,
    pub camera: Camera,
    pub pipeline: PipelineOutput,
    pub gt_oracle_normals: Grid<Vec3>,
    pub gt_oracle_error: f64,
}

impl DemoOutput {
    pub fn final_error(&self) -> f64 {
        self.pipeline.metrics.last().and_then(|m| m.error).unwrap_or(f64::NAN)
    }

    /// Tab-separated per-iteration table followed by summary lines. Holds no
    /// timing data so identical runs give identical files.
    pub fn metrics_table(&self) -> String {
        let mut out = metrics_table(&self.pipeline.metrics);
        let _ = writeln!(out, "# final_error_deg\t{:.6}", self.final_error());
        let _ = writeln!(out, "# gt_oracle_error_deg\t{:.6}", self.gt_oracle_error);
        let _ = writeln!(out, "# converged\t{}", self.pipeline.converged);
        out
    }
}

/// Per-iteration rows as tab-separated text with a header line.
pub fn metrics_table(metrics: &[IterationMetrics]) -> String {
    let mut out = String::from("iteration\tangular_change_deg\terror_deg\tsolver_iterations\tkernel_nnz\tepsilon\tflagged\tclamped\n");
    for m in metrics {
        let _ = writeln!(
            out,
            "{}\t{:.6}\t{}\t{}\t{}\t{:.6e}\t{}\t{}",
            m.iteration,
            m.angular_change,
            m.error.map(|e| format!("{e:.6}")).unwrap_or_else(|| "nan".into()),
            m.solver_iterations,
            m.kernel_nnz,
            m.epsilon,
            m.flagged,
            m.clamped
        );
    }
    out
}

/// Renders the configured sphere, reconstructs it from a plane and evaluates
/// against both the truth and the ground-truth-shape oracle.
pub fn demo_sphere(cfg: &RunConfig, tables: &Tables, dump: Option<&Path>) -> Result<DemoOutput> {
    let (truth, camera, rendered) = render_sphere(cfg, tables)?;
    let input = PipelineInput {
        observed: &rendered.observed,
        no_object: &rendered.no_object,
        camera: &camera,
        medium: &cfg.medium,
        tables,
        ground_truth: Some(&truth.normals),
    };
    let mut settings = PipelineSettings::from_config(cfg);
    if cfg.pipeline.init_depth.is_none() {
        settings.init_depth = mean_masked(&truth.depth, &truth.mask);
    }
    let (gt_oracle_normals, gt_oracle_error) = gt_oracle(&input, &truth, &settings)?;
    let pipeline = run_pipeline(&input, &settings, dump)?;
    Ok(DemoOutput {
        truth,
        camera,
        pipeline,
        gt_oracle_normals,
        gt_oracle_error,
    })
}
