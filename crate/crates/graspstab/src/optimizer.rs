//! Iterative Gaussian sampling over (pose, root translation) driven by the
//! stability cost: per-dimension Gaussians initialized around the estimated
//! state, exponential cost weighting of an elite set, mean/variance
//! refitting, and global-best tracking.

use crate::geom::{RigidBodyProps, TriMesh};
use crate::hand::{
    clamp_pose, compose_state, DofLayout, HandTemplate, JointLimits, ObjectParams, ShapeParams,
    Vartheta,
};
use crate::sim::{build_scene, rollout, RolloutRecord, SimConfig, SimError};
use crate::stability::{
    total_cost, GraspState, GravityAccounting, StabilityCost, StabilityError, TargetKinematics,
};
use crate::{Quat, Vec3};
use rand::SeedableRng;
use rand_distr::Distribution;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum OptError {
    #[error("invalid sampler config: {0}")]
    BadConfig(String),
    #[error("all {0} samples of an iteration failed to simulate")]
    AllSamplesFailed(usize),
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error(transparent)]
    Stability(#[from] StabilityError),
    #[error(transparent)]
    Hand(#[from] crate::hand::HandError),
}

/// Whether the refit updates the distribution mean or only the variance
/// (resampling stays centered on the initial estimate).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MeanUpdate {
    #[default]
    Full,
    VarianceOnly,
}

/// Sampler parameters. Defaults are the reference constants: 30 iterations
/// of 300 samples, pose variance 0.1*pi and root variance 0.05 per
/// dimension.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SamplerConfig {
    pub iterations: usize,
    pub samples: usize,
    pub init_pose_variance: f64,
    pub init_root_variance: f64,
    pub elite_fraction: f64,
    pub variance_floor: f64,
    pub seed: u64,
    pub mean_update: MeanUpdate,
    pub layout: DofLayout,
}

impl Default for SamplerConfig {
    fn default() -> Self {
        Self {
            iterations: 30,
            samples: 300,
            init_pose_variance: 0.1 * std::f64::consts::PI,
            init_root_variance: 0.05,
            elite_fraction: 0.2,
            variance_floor: 1e-4,
            seed: 0,
            mean_update: MeanUpdate::Full,
            layout: DofLayout::Reduced,
        }
    }
}

impl SamplerConfig {
    pub fn validate(&self) -> Result<(), OptError> {
        if self.iterations == 0 || self.samples == 0 {
            return Err(OptError::BadConfig("iterations and samples must be >= 1".into()));
        }
        if !(self.init_pose_variance > 0.0 && self.init_root_variance > 0.0) {
            return Err(OptError::BadConfig("initial variances must be positive".into()));
        }
        if !(0.0 < self.elite_fraction && self.elite_fraction <= 1.0) {
            return Err(OptError::BadConfig("elite fraction must be in (0, 1]".into()));
        }
        if !(self.variance_floor > 0.0) {
            return Err(OptError::BadConfig("variance floor must be positive".into()));
        }
        Ok(())
    }
}

/// Independent per-dimension Gaussians.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GaussianDiag {
    pub mean: Vec<f64>,
    pub variance: Vec<f64>,
}

/// The sampling distributions over pose and root translation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Distributions {
    pub pose: GaussianDiag,
    pub root: GaussianDiag,
}

/// One sampled candidate state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sample {
    pub vartheta: Vartheta,
    pub root: Vec3,
    /// How many components were clamped into their joint limits.
    pub clamped: usize,
}

/// Pose distribution centered on the estimate, root distribution centered
/// on the origin, exactly as configured.
pub fn init_distributions(
    center: &Vartheta,
    cfg: &SamplerConfig,
) -> Result<Distributions, OptError> {
    cfg.validate()?;
    let n = center.values.len();
    Ok(Distributions {
        pose: GaussianDiag {
            mean: center.values.clone(),
            variance: vec![cfg.init_pose_variance; n],
        },
        root: GaussianDiag {
            mean: vec![0.0; 3],
            variance: vec![cfg.init_root_variance; 3],
        },
    })
}

fn sample_rng(master: u64, iteration: usize, index: usize) -> rand_chacha::ChaCha8Rng {
    let mut seed = [0u8; 32];
    seed[..8].copy_from_slice(&master.to_le_bytes());
    seed[8..16].copy_from_slice(&(iteration as u64).to_le_bytes());
    seed[16..24].copy_from_slice(&(index as u64).to_le_bytes());
    seed[24..32].copy_from_slice(&0x67726173_70746162u64.to_le_bytes());
    rand_chacha::ChaCha8Rng::from_seed(seed)
}

/// Draws `n` samples. Deterministic given the seed stream: each sample's
/// generator is derived from (master seed, iteration, sample index), so
/// results are independent of any execution schedule. Samples violating
/// joint limits are clamped and the clamp count recorded.
pub fn draw_samples(
    dists: &Distributions,
    n: usize,
    master_seed: u64,
    iteration: usize,
    layout: DofLayout,
    limits: &JointLimits,
) -> Vec<Sample> {
    (0..n)
        .map(|idx| {
            let mut rng = sample_rng(master_seed, iteration, idx);
            let mut values: Vec<f64> = dists
                .pose
                .mean
                .iter()
                .zip(&dists.pose.variance)
                .map(|(&m, &v)| {
                    rand_distr::Normal::new(m, v.sqrt()).unwrap().sample(&mut rng)
                })
                .collect();
            let root = Vec3::from_iterator(
                dists
                    .root
                    .mean
                    .iter()
                    .zip(&dists.root.variance)
                    .map(|(&m, &v)| {
                        rand_distr::Normal::new(m, v.sqrt()).unwrap().sample(&mut rng)
                    }),
            );
            let clamped = clamp_pose(&mut values, layout, limits);
            Sample {
                vartheta: Vartheta { layout, values },
                root,
                clamped,
            }
        })
        .collect()
}

/// The distribution mean as a sample (clamped), used as the first candidate
/// of every iteration so the unperturbed center is always evaluated.
fn mean_sample(dists: &Distributions, layout: DofLayout, limits: &JointLimits) -> Sample {
    let mut values = dists.pose.mean.clone();
    let clamped = clamp_pose(&mut values, layout, limits);
    Sample {
        vartheta: Vartheta { layout, values },
        root: Vec3::new(dists.root.mean[0], dists.root.mean[1], dists.root.mean[2]),
        clamped,
    }
}

/// One evaluated sample.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SampleOutcome {
    pub index: usize,
    pub cost: f64,
    pub stability: Option<StabilityCost>,
    pub displacement_mm: f64,
    pub resets: usize,
    pub weight: f64,
    pub error: Option<String>,
}

/// Exponential cost weighting of the elite set and a refit of the
/// per-dimension Gaussians. Weights are `exp(-(C - C_min)/lambda)` with
/// `lambda = median(C) - C_min` (floored), restricted to the best
/// `elite_fraction` of finite outcomes (ties at the threshold included);
/// infinite-cost samples get zero weight. Weights are normalized in place.
pub fn reweight_and_update(
    outcomes: &mut [SampleOutcome],
    samples: &[Sample],
    dists: &Distributions,
    cfg: &SamplerConfig,
) -> Result<Distributions, OptError> {
    let mut finite: Vec<f64> = outcomes
        .iter()
        .filter(|o| o.cost.is_finite())
        .map(|o| o.cost)
        .collect();
    if finite.is_empty() {
        return Err(OptError::AllSamplesFailed(outcomes.len()));
    }
    finite.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let c_min = finite[0];
    let median = finite[finite.len() / 2];
    let lambda = (median - c_min).max(1e-6);
    let k = ((cfg.elite_fraction * finite.len() as f64).ceil() as usize).max(1);
    let threshold = finite[(k - 1).min(finite.len() - 1)];

    let mut total = 0.0;
    for o in outcomes.iter_mut() {
        o.weight = if o.cost.is_finite() && o.cost <= threshold {
            (-(o.cost - c_min) / lambda).exp()
        } else {
            0.0
        };
        total += o.weight;
    }
    for o in outcomes.iter_mut() {
        o.weight /= total;
    }

    let pose_dim = dists.pose.mean.len();
    let mut new_pose_mean = vec![0.0; pose_dim];
    let mut new_root_mean = [0.0f64; 3];
    for (o, s) in outcomes.iter().zip(samples) {
        if o.weight == 0.0 {
            continue;
        }
        for (acc, &x) in new_pose_mean.iter_mut().zip(&s.vartheta.values) {
            *acc += o.weight * x;
        }
        for d in 0..3 {
            new_root_mean[d] += o.weight * s.root[d];
        }
    }
    let (pose_mean, root_mean) = match cfg.mean_update {
        MeanUpdate::Full => (new_pose_mean.clone(), new_root_mean),
        MeanUpdate::VarianceOnly => (
            dists.pose.mean.clone(),
            [dists.root.mean[0], dists.root.mean[1], dists.root.mean[2]],
        ),
    };

    let mut pose_var = vec![0.0; pose_dim];
    let mut root_var = [0.0f64; 3];
    for (o, s) in outcomes.iter().zip(samples) {
        if o.weight == 0.0 {
            continue;
        }
        for ((acc, &x), m) in pose_var.iter_mut().zip(&s.vartheta.values).zip(&new_pose_mean) {
            *acc += o.weight * (x - m) * (x - m);
        }
        for d in 0..3 {
            root_var[d] += o.weight * (s.root[d] - new_root_mean[d]).powi(2);
        }
    }
    for v in pose_var.iter_mut() {
        *v = v.max(cfg.variance_floor);
    }
    for v in root_var.iter_mut() {
        *v = v.max(cfg.variance_floor);
    }

    Ok(Distributions {
        pose: GaussianDiag { mean: pose_mean, variance: pose_var },
        root: GaussianDiag { mean: root_mean.to_vec(), variance: root_var.to_vec() },
    })
}

/// Per-iteration progress entry.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterTrace {
    pub iteration: usize,
    pub iter_best: f64,
    pub best_so_far: f64,
    pub failed: usize,
    pub clamped: usize,
}

/// Result of a sampling run over a generic evaluator.
#[derive(Debug, Clone)]
pub struct CemResult {
    pub best_sample: Sample,
    pub best_cost: f64,
    pub trace: Vec<IterTrace>,
    pub final_dists: Distributions,
}

/// The sampling loop over an arbitrary cost evaluator: `iterations` rounds
/// of draw / evaluate / reweight with global-best tracking. The first
/// candidate of each round is the current distribution mean; the remaining
/// `samples - 1` are Gaussian draws. Evaluation runs in parallel; results
/// are collected by sample index so any schedule yields identical output.
pub fn cem_minimize<F>(
    center: &Vartheta,
    cfg: &SamplerConfig,
    limits: &JointLimits,
    eval: F,
) -> Result<CemResult, OptError>
where
    F: Fn(&Sample) -> f64 + Sync,
{
    cfg.validate()?;
    let mut dists = init_distributions(center, cfg)?;
    let mut best: Option<(Sample, f64)> = None;
    let mut trace = Vec::with_capacity(cfg.iterations);

    for iteration in 0..cfg.iterations {
        let mut samples = vec![mean_sample(&dists, cfg.layout, limits)];
        samples.extend(draw_samples(
            &dists,
            cfg.samples - 1,
            cfg.seed,
            iteration,
            cfg.layout,
            limits,
        ));

        let costs: Vec<f64> = maybe_parallel_map(&samples, &eval);
        let mut outcomes: Vec<SampleOutcome> = costs
            .iter()
            .enumerate()
            .map(|(index, &cost)| SampleOutcome {
                index,
                cost,
                stability: None,
                displacement_mm: 0.0,
                resets: 0,
                weight: 0.0,
                error: None,
            })
            .collect();

        let mut iter_best = f64::INFINITY;
        for (o, s) in outcomes.iter().zip(&samples) {
            if o.cost < iter_best {
                iter_best = o.cost;
            }
            if o.cost.is_finite() && best.as_ref().map_or(true, |(_, b)| o.cost < *b) {
                best = Some((s.clone(), o.cost));
            }
        }
        let failed = outcomes.iter().filter(|o| !o.cost.is_finite()).count();
        let clamped = samples.iter().map(|s| s.clamped).sum();
        trace.push(IterTrace {
            iteration,
            iter_best,
            best_so_far: best.as_ref().map_or(f64::INFINITY, |(_, b)| *b),
            failed,
            clamped,
        });

        dists = reweight_and_update(&mut outcomes, &samples, &dists, cfg)?;
    }

    let (best_sample, best_cost) = best.ok_or(OptError::AllSamplesFailed(cfg.samples))?;
    Ok(CemResult { best_sample, best_cost, trace, final_dists: dists })
}

fn maybe_parallel_map<F>(samples: &[Sample], eval: &F) -> Vec<f64>
where
    F: Fn(&Sample) -> f64 + Sync,
{
    use rayon::prelude::*;
    samples.par_iter().map(eval).collect()
}

/// Everything a physical evaluation of one sample needs.
#[derive(Debug, Clone)]
pub struct EvalContext {
    pub template: HandTemplate,
    pub beta: ShapeParams,
    pub phi: ObjectParams,
    pub center: Vartheta,
    pub object_mesh: TriMesh,
    pub props: RigidBodyProps,
    pub sim: SimConfig,
    pub limits: JointLimits,
    pub kinematics: TargetKinematics,
    pub accounting: GravityAccounting,
    /// Characteristic object length for the torque normalizer: the mean
    /// object ellipsoid radius.
    pub char_len: f64,
}

impl EvalContext {
    /// Simulates one sample and scores it. Simulation failures surface as
    /// an error here; the optimizer maps them to infinite cost.
    pub fn evaluate(&self, sample: &Sample) -> Result<(StabilityCost, RolloutRecord), OptError> {
        let theta = sample.vartheta.to_pose();
        let state = compose_state(&self.template, &self.beta, &theta, &self.phi, sample.root)?;
        let mut scene = build_scene(
            &state,
            &self.object_mesh,
            &self.props,
            &self.sim,
            (&sample.vartheta, sample.root),
        )?;
        let record = rollout(&mut scene, &self.sim)?;
        let (p0, q0) = state.object_pose();
        let before = GraspState {
            object_pos: p0,
            object_rot: q0,
            vartheta: sample.vartheta.clone(),
            root: sample.root,
        };
        let after = GraspState {
            object_pos: record.final_object_pos,
            object_rot: record.final_object_rot,
            vartheta: record.final_vartheta.clone(),
            root: record.final_root,
        };
        let cost = total_cost(
            &before,
            &after,
            &record,
            &self.props,
            &self.kinematics,
            self.char_len,
            self.sim.gravity,
            self.accounting,
        )?;
        Ok((cost, record))
    }
}

/// Optimization result: the lowest-cost state seen across all iterations,
/// with its rollout (contact points and forces included) and the cost
/// trace.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct OptResult {
    pub best_vartheta: Vartheta,
    pub best_root: Vec3,
    pub best_cost: StabilityCost,
    pub best_object_pos: Vec3,
    pub best_object_rot: Quat,
    pub best_record: RolloutRecord,
    /// Cost of the unperturbed center sample from the first iteration.
    pub center_cost: f64,
    pub trace: Vec<IterTrace>,
}

/// Full optimization: K iterations of N rollouts, scored by the stability
/// cost, with the best state re-simulated at the end to export its contacts
/// and forces.
pub fn optimize(ctx: &EvalContext, cfg: &SamplerConfig) -> Result<OptResult, OptError> {
    let run = || {
        let result = cem_minimize(&ctx.center, cfg, &ctx.limits, |sample| {
            match ctx.evaluate(sample) {
                Ok((cost, _)) => cost.total,
                Err(_) => f64::INFINITY,
            }
        })?;
        // center cost: the mean sample of iteration 0 is the clamped center
        let center = mean_sample(
            &init_distributions(&ctx.center, cfg)?,
            cfg.layout,
            &ctx.limits,
        );
        let center_cost = match ctx.evaluate(&center) {
            Ok((c, _)) => c.total,
            Err(_) => f64::INFINITY,
        };
        let (best_cost, best_record) = ctx.evaluate(&result.best_sample)?;
        Ok::<OptResult, OptError>(OptResult {
            best_vartheta: result.best_sample.vartheta.clone(),
            best_root: result.best_sample.root,
            best_cost,
            best_object_pos: best_record.final_object_pos,
            best_object_rot: best_record.final_object_rot,
            best_record,
            center_cost,
            trace: result.trace,
        })
    };
    match thread_cap() {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| OptError::BadConfig(e.to_string()))?
            .install(run),
        None => run(),
    }
}

/// Thread cap from GRASPSTAB_THREADS, when set.
fn thread_cap() -> Option<usize> {
    std::env::var("GRASPSTAB_THREADS")
        .ok()
        .and_then(|v| v.parse().ok())
        .filter(|&n| n > 0)
}
