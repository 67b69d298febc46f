//! Closed-loop grasp episodes: world → pipeline → controller → world.

use std::fmt;

use serde::{Deserialize, Serialize};

use super::object::SimObject;
use super::sensor::SensorResponseModel;
use super::world::{GripperModel, SlipOnset, World, SAMPLE_RATE_HZ};
use crate::controller::{ControllerConfig, ControllerInput, GraspController, LogRow, Phase, Policy};
use crate::error::Result;
use crate::force::ForceModel;
use crate::pipeline::{BaselineMode, Pipeline};
use crate::signal::PipelineConfig;
use crate::slip::SlipState;
use crate::trace::{GroundTruthRow, Trace};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Outcome {
    Success,
    Dropped,
    Crushed,
}

impl Outcome {
    pub fn name(self) -> &'static str {
        match self {
            Outcome::Success => "SUCCESS",
            Outcome::Dropped => "DROPPED",
            Outcome::Crushed => "CRUSHED",
        }
    }
}

impl fmt::Display for Outcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpisodeConfig {
    pub controller: ControllerConfig,
    pub pipeline: PipelineConfig,
    pub gripper: GripperModel,
    pub sensor: SensorResponseModel,
    /// Object height that counts as lifted.
    pub success_height_m: f64,
    pub max_duration_s: f64,
    /// Keep the full trace and ground truth.
    pub record: bool,
}

impl Default for EpisodeConfig {
    fn default() -> Self {
        Self {
            controller: ControllerConfig::default(),
            pipeline: PipelineConfig::default(),
            gripper: GripperModel::default(),
            sensor: SensorResponseModel::default(),
            success_height_m: 0.05,
            max_duration_s: 40.0,
            record: false,
        }
    }
}

/// A grip increment and the detection that caused it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Increment {
    pub t: f64,
    pub detected_at: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct EpisodeResult {
    pub object: String,
    pub policy: Policy,
    pub seed: u64,
    pub outcome: Outcome,
    pub final_phase: Phase,
    pub duration_s: f64,
    pub peak_force_n: f64,
    pub object_height_m: f64,
    pub increments: Vec<Increment>,
    pub saturated: bool,
    pub log: Vec<LogRow>,
    /// Phases the controller passed through, in order.
    pub phases: Vec<Phase>,
    pub onsets: Vec<SlipOnset>,
    pub trace: Option<Trace>,
    pub ground_truth: Vec<GroundTruthRow>,
}

/// Run one grasp-and-lift attempt of `object` under `cfg.controller.policy`.
pub fn run_episode(object: &SimObject, seed: u64, model: &ForceModel, cfg: &EpisodeConfig) -> Result<EpisodeResult> {
    let mut world = World::new(cfg.gripper.clone(), cfg.sensor.clone(), object.clone(), seed)?;
    let ctl_cfg = ControllerConfig {
        open_deg: cfg.gripper.open_deg,
        ..cfg.controller.clone()
    };
    let policy = ctl_cfg.policy;
    let mut ctl = GraspController::new(ctl_cfg)?;
    let mut pipe = Pipeline::new(
        &cfg.pipeline,
        BaselineMode::Initialization {
            seconds: cfg.controller.init_s,
        },
        Some(model.clone()),
    )?;
    if policy == Policy::OnOff {
        pipe = pipe.without_slip();
    }
    let tick_every = (SAMPLE_RATE_HZ / cfg.controller.tick_hz).round().max(1.0) as u64;
    let max_ticks = (cfg.max_duration_s * SAMPLE_RATE_HZ) as u64;

    let mut frames = Vec::new();
    let mut slip_gt = Vec::new();
    let mut gt = Vec::new();
    let mut cmd = ctl.command();
    let mut lift_m = 0.0;
    let mut peak: f64 = 0.0;
    let mut phases = vec![ctl.phase()];
    let mut increments = Vec::new();
    let idle = SlipState::default();
    let mut outcome = None;
    let mut n: u64 = 0;

    while n < max_ticks {
        let out = world.step(cmd.theta_deg, cmd.lift_mps);
        n += 1;
        lift_m += cmd.lift_mps / SAMPLE_RATE_HZ;
        peak = peak.max(out.normal_n[0]).max(out.normal_n[1]);
        pipe.push(&out.frame)?;
        if cfg.record {
            frames.push(out.frame);
            slip_gt.push(out.slip);
            gt.push(GroundTruthRow {
                t: out.frame.t,
                slip_gt: out.slip,
                force_r_n: out.normal_n[0],
                force_l_n: out.normal_n[1],
                phase: ctl.phase().name().to_string(),
            });
        }
        if world.crushed() {
            ctl.crushed(out.frame.t);
            outcome = Some(Outcome::Crushed);
            break;
        }
        if world.contact_lost() {
            ctl.finish(out.frame.t, Phase::Dropped);
            outcome = Some(Outcome::Dropped);
            break;
        }
        if n % tick_every == 0 {
            let slip = if pipe.processed() > 0 { pipe.slip_state() } else { &idle };
            let before = ctl.increments();
            cmd = ctl.tick(&ControllerInput {
                t: out.frame.t,
                ring: pipe.ring(),
                slip,
                force_n: pipe.force().map(|(_, f)| f),
                lift_m,
            });
            if ctl.increments() > before {
                increments.push(Increment {
                    t: out.frame.t,
                    detected_at: slip.detected_at,
                });
            }
            if phases.last() != Some(&ctl.phase()) {
                phases.push(ctl.phase());
            }
            match ctl.phase() {
                Phase::Success => {
                    let lifted = world.object_height() >= cfg.success_height_m;
                    outcome = Some(if lifted { Outcome::Success } else { Outcome::Dropped });
                    break;
                }
                Phase::Dropped => {
                    outcome = Some(Outcome::Dropped);
                    break;
                }
                _ => {}
            }
        }
    }
    let outcome = outcome.unwrap_or(Outcome::Dropped);
    if phases.last() != Some(&ctl.phase()) {
        phases.push(ctl.phase());
    }
    let trace = cfg.record.then(|| Trace {
        frames,
        force_n: None,
        slip_gt: Some(slip_gt),
    });
    Ok(EpisodeResult {
        object: object.name.clone(),
        policy,
        seed,
        outcome,
        final_phase: ctl.phase(),
        duration_s: world.time(),
        peak_force_n: peak,
        object_height_m: world.object_height(),
        increments,
        saturated: ctl.saturated(),
        log: ctl.log().to_vec(),
        phases,
        onsets: world.onsets().to_vec(),
        trace,
        ground_truth: gt,
    })
}
