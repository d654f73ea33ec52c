//! JSON run configuration: scenario, model, pruning and metric parameters.

use std::path::Path;

use anyhow::{bail, Context};
use nalgebra::{Matrix3, Matrix4, Vector3, Vector4};
use serde::{Deserialize, Serialize};

use ettrack_core::metrics::TmParams;
use ettrack_core::motion::ModelParams;
use ettrack_core::reduction::ReductionParams;
use ettrack_core::sim::{scenario1, ScenarioConfig, TargetScript};
use ettrack_core::types::{BirthComponent, KinematicState, Region, ShapeState, TargetState};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RegionConfig {
    pub x_min_m: f64,
    pub x_max_m: f64,
    pub y_min_m: f64,
    pub y_max_m: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TargetConfig {
    pub birth_step: usize,
    pub death_step: usize,
    pub position_m: [f64; 2],
    pub velocity_mps: [f64; 2],
    pub orientation_rad: f64,
    pub semi_axes_m: [f64; 2],
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BirthConfig {
    pub weight: f64,
    pub position_m: [f64; 2],
    pub velocity_mps: [f64; 2],
    pub orientation_rad: f64,
    pub semi_axes_m: [f64; 2],
    /// Diagonal of the kinematic covariance `[px, py, vx, vy]`.
    pub kinematic_cov_diag: [f64; 4],
    /// Diagonal of the shape covariance `[theta, l1, l2]`.
    pub shape_cov_diag: [f64; 3],
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PruningConfig {
    pub weight_threshold: f64,
    pub kinematic_merge_threshold: f64,
    pub shape_merge_threshold: f64,
    pub max_components: usize,
}

impl Default for PruningConfig {
    fn default() -> Self {
        Self {
            weight_threshold: 1e-5,
            kinematic_merge_threshold: 4.0,
            shape_merge_threshold: 1.0,
            max_components: 300,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MetricConfig {
    pub cutoff: f64,
    pub order: f64,
    pub switch_cost: f64,
}

impl Default for MetricConfig {
    fn default() -> Self {
        Self {
            cutoff: 40.0,
            order: 1.0,
            switch_cost: 2.0,
        }
    }
}

/// The on-disk run configuration. Field names carry their units.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunConfig {
    pub duration_steps: usize,
    pub region_m: RegionConfig,
    pub sample_period_s: f64,
    pub kinematic_noise_std_m: f64,
    pub orientation_noise_std_rad: f64,
    pub axis_noise_std_m: f64,
    pub measurement_noise_std_m: f64,
    pub detection_probability: f64,
    pub survival_probability: f64,
    /// Expected measurements per detected target per step.
    pub measurement_rate: f64,
    /// Expected clutter count per step.
    pub clutter_rate: f64,
    pub cardinality_max: usize,
    pub targets: Vec<TargetConfig>,
    pub birth: Vec<BirthConfig>,
    pub birth_position_jitter_std_m: [f64; 2],
    #[serde(default)]
    pub pruning: PruningConfig,
    #[serde(default)]
    pub metric: MetricConfig,
    /// Explicit distance-partitioning thresholds; derived from the model
    /// when absent.
    #[serde(default)]
    pub partition_thresholds_m: Option<Vec<f64>>,
}

impl RunConfig {
    /// The built-in simulation scene.
    pub fn scenario1() -> Self {
        Self::from_scenario(&scenario1())
    }

    fn from_scenario(sc: &ScenarioConfig) -> Self {
        let p = &sc.params;
        Self {
            duration_steps: sc.duration,
            region_m: RegionConfig {
                x_min_m: p.region.x_min,
                x_max_m: p.region.x_max,
                y_min_m: p.region.y_min,
                y_max_m: p.region.y_max,
            },
            sample_period_s: p.sample_period,
            kinematic_noise_std_m: p.kinematic_noise_std,
            orientation_noise_std_rad: p.orientation_noise_std,
            axis_noise_std_m: p.axis_noise_std,
            measurement_noise_std_m: p.measurement_noise_std,
            detection_probability: p.detection_probability,
            survival_probability: p.survival_probability,
            measurement_rate: p.measurement_rate,
            clutter_rate: p.clutter_rate,
            cardinality_max: p.cardinality_max,
            targets: sc
                .targets
                .iter()
                .map(|t| TargetConfig {
                    birth_step: t.birth_step,
                    death_step: t.death_step,
                    position_m: [t.initial.px, t.initial.py],
                    velocity_mps: [t.initial.vx, t.initial.vy],
                    orientation_rad: t.shape.theta,
                    semi_axes_m: [t.shape.l1, t.shape.l2],
                })
                .collect(),
            birth: p
                .birth
                .iter()
                .map(|b| BirthConfig {
                    weight: b.weight,
                    position_m: [b.state.kin.px, b.state.kin.py],
                    velocity_mps: [b.state.kin.vx, b.state.kin.vy],
                    orientation_rad: b.state.shape.theta,
                    semi_axes_m: [b.state.shape.l1, b.state.shape.l2],
                    kinematic_cov_diag: [
                        b.state.cov_kin[(0, 0)],
                        b.state.cov_kin[(1, 1)],
                        b.state.cov_kin[(2, 2)],
                        b.state.cov_kin[(3, 3)],
                    ],
                    shape_cov_diag: [
                        b.state.cov_shape[(0, 0)],
                        b.state.cov_shape[(1, 1)],
                        b.state.cov_shape[(2, 2)],
                    ],
                })
                .collect(),
            birth_position_jitter_std_m: sc.birth_jitter_std,
            pruning: PruningConfig::default(),
            metric: MetricConfig::default(),
            partition_thresholds_m: None,
        }
    }

    /// Builds the in-memory scenario from this configuration.
    pub fn scenario(&self) -> anyhow::Result<ScenarioConfig> {
        if self.duration_steps == 0 {
            bail!("duration_steps must be at least 1");
        }
        for (i, t) in self.targets.iter().enumerate() {
            if t.birth_step == 0 || t.birth_step > t.death_step {
                bail!(
                    "target {i}: require 1 <= birth_step <= death_step, got {}..{}",
                    t.birth_step,
                    t.death_step
                );
            }
            if t.death_step > self.duration_steps {
                bail!(
                    "target {i}: death_step {} exceeds duration {}",
                    t.death_step,
                    self.duration_steps
                );
            }
        }
        let region = Region::new(
            self.region_m.x_min_m,
            self.region_m.x_max_m,
            self.region_m.y_min_m,
            self.region_m.y_max_m,
        );
        let birth = self
            .birth
            .iter()
            .map(|b| BirthComponent {
                weight: b.weight,
                state: TargetState::new(
                    KinematicState::new(
                        b.position_m[0],
                        b.position_m[1],
                        b.velocity_mps[0],
                        b.velocity_mps[1],
                    ),
                    ShapeState::new(b.orientation_rad, b.semi_axes_m[0], b.semi_axes_m[1]),
                    Matrix4::from_diagonal(&Vector4::from(b.kinematic_cov_diag)),
                    Matrix3::from_diagonal(&Vector3::from(b.shape_cov_diag)),
                ),
            })
            .collect();
        Ok(ScenarioConfig {
            duration: self.duration_steps,
            targets: self
                .targets
                .iter()
                .map(|t| TargetScript {
                    birth_step: t.birth_step,
                    death_step: t.death_step,
                    initial: KinematicState::new(
                        t.position_m[0],
                        t.position_m[1],
                        t.velocity_mps[0],
                        t.velocity_mps[1],
                    ),
                    shape: ShapeState::new(t.orientation_rad, t.semi_axes_m[0], t.semi_axes_m[1]),
                })
                .collect(),
            params: ModelParams {
                sample_period: self.sample_period_s,
                kinematic_noise_std: self.kinematic_noise_std_m,
                orientation_noise_std: self.orientation_noise_std_rad,
                axis_noise_std: self.axis_noise_std_m,
                measurement_noise_std: self.measurement_noise_std_m,
                detection_probability: self.detection_probability,
                survival_probability: self.survival_probability,
                measurement_rate: self.measurement_rate,
                clutter_rate: self.clutter_rate,
                region,
                birth,
                cardinality_max: self.cardinality_max,
            },
            birth_jitter_std: self.birth_position_jitter_std_m,
        })
    }

    pub fn reduction_params(&self) -> ReductionParams {
        ReductionParams {
            weight_threshold: self.pruning.weight_threshold,
            kinematic_merge_threshold: self.pruning.kinematic_merge_threshold,
            shape_merge_threshold: self.pruning.shape_merge_threshold,
            max_components: self.pruning.max_components,
        }
    }

    pub fn tm_params(&self) -> TmParams {
        TmParams {
            cutoff: self.metric.cutoff,
            order: self.metric.order,
            switch_cost: self.metric.switch_cost,
        }
    }
}

/// Loads a configuration: the name `scenario1` resolves to the built-in
/// preset, anything else is read as a JSON file.
pub fn load_config(name_or_path: &str) -> anyhow::Result<RunConfig> {
    if name_or_path == "scenario1" {
        return Ok(RunConfig::scenario1());
    }
    let path = Path::new(name_or_path);
    let text = std::fs::read_to_string(path)
        .with_context(|| format!("reading config {}", path.display()))?;
    let cfg: RunConfig = serde_json::from_str(&text)
        .with_context(|| format!("parsing config {}", path.display()))?;
    Ok(cfg)
}
