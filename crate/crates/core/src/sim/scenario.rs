//! Named scenarios and their `key = value` descriptions.
//!
//! | id | what |
//! |----|------|
//! | A  | lift at 1 mm/s with too little grip; stick-slip on the table |
//! | B  | indentor presses for force regression, six shapes |
//! | C  | closed-loop grasp of a fragile object |
//! | D  | closed-loop grasp of a slippery object |
//! | E  | as B with strong creep and drift |
//! | Q  | open gripper, no contact |

use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::episode::{run_episode, EpisodeConfig, Outcome};
use super::object::{find_object, indentor, SimObject, INDENTOR_TAGS};
use super::sensor::SensorResponseModel;
use super::world::{GripperModel, SlipOnset, World, SAMPLE_RATE_HZ};
use crate::controller::Policy;
use crate::error::{Error, Result};
use crate::force::dataset::{trial_from_trace, ExtractConfig};
use crate::force::{train, FeatureSet, ForceModel, ForceTrial, SvrParams};
use crate::kv::KvFile;
use crate::trace::{GroundTruthRow, Trace};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ScenarioKind {
    A,
    B,
    C,
    D,
    E,
    Q,
}

impl ScenarioKind {
    pub const ALL: [ScenarioKind; 6] = [
        ScenarioKind::A,
        ScenarioKind::B,
        ScenarioKind::C,
        ScenarioKind::D,
        ScenarioKind::E,
        ScenarioKind::Q,
    ];

    pub fn id(self) -> &'static str {
        match self {
            ScenarioKind::A => "A",
            ScenarioKind::B => "B",
            ScenarioKind::C => "C",
            ScenarioKind::D => "D",
            ScenarioKind::E => "E",
            ScenarioKind::Q => "Q",
        }
    }

    pub fn is_force_protocol(self) -> bool {
        matches!(self, ScenarioKind::B | ScenarioKind::E)
    }
}

impl fmt::Display for ScenarioKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.id())
    }
}

impl FromStr for ScenarioKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let k = s.trim().to_ascii_uppercase();
        ScenarioKind::ALL
            .into_iter()
            .find(|x| x.id() == k)
            .ok_or_else(|| Error::UnknownScenario(s.to_string()))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioConfig {
    pub kind: ScenarioKind,
    pub seed: u64,
    pub object: SimObject,
    pub gripper: GripperModel,
    pub sensor: SensorResponseModel,
    pub init_s: f64,
    /// Open-loop closing speed.
    pub closing_deg_per_s: f64,
    pub settle_s: f64,
    pub lift_speed_mps: f64,
    pub lift_s: f64,
    /// Grip as a fraction of the force needed to lift, drawn uniformly.
    pub force_fraction: (f64, f64),
    /// Total length for B, E and Q.
    pub duration_s: f64,
    /// Time of the second press in B and E.
    pub second_press_s: f64,
    pub policy: Policy,
}

impl ScenarioConfig {
    pub fn new(kind: ScenarioKind, seed: u64) -> Self {
        let (object, sensor, duration_s) = match kind {
            ScenarioKind::A => (find_object("apple").unwrap(), SensorResponseModel::default(), 0.0),
            ScenarioKind::B => (indentor(INDENTOR_TAGS[0]), SensorResponseModel::default(), 10.0),
            ScenarioKind::C => (find_object("raspberry").unwrap(), SensorResponseModel::default(), 0.0),
            ScenarioKind::D => (find_object("jam_jar").unwrap(), SensorResponseModel::default(), 0.0),
            ScenarioKind::E => (indentor(INDENTOR_TAGS[0]), SensorResponseModel::drift_stress(), 10.0),
            ScenarioKind::Q => (indentor(INDENTOR_TAGS[0]), SensorResponseModel::default(), 600.0),
        };
        Self {
            kind,
            seed,
            object,
            gripper: GripperModel::default(),
            sensor,
            init_s: 1.0,
            closing_deg_per_s: 10.0,
            settle_s: 1.0,
            lift_speed_mps: 0.001,
            lift_s: 8.0,
            force_fraction: (0.25, 1.0),
            duration_s,
            second_press_s: 5.5,
            policy: Policy::Forte,
        }
    }

    /// Build from a scenario file. `scenario` is required; everything else
    /// overrides the defaults for that scenario.
    pub fn from_kv(kv: &KvFile, default_seed: u64) -> Result<Self> {
        let kind: ScenarioKind = kv
            .get("scenario")?
            .ok_or_else(|| Error::Config(format!("{}: missing `scenario`", kv.path().display())))?;
        let seed = kv.get("seed")?.unwrap_or(default_seed);
        let mut cfg = Self::new(kind, seed);
        if let Some(name) = kv.raw("object") {
            cfg.object = if cfg.kind.is_force_protocol() {
                if !INDENTOR_TAGS.contains(&name) {
                    return Err(Error::UnknownObject(name.to_string()));
                }
                indentor(name)
            } else {
                find_object(name)?
            };
        }
        cfg.object.apply_kv(kv)?;
        cfg.gripper.apply_kv(kv)?;
        cfg.sensor.apply_kv(kv)?;
        kv.set("init_s", &mut cfg.init_s)?;
        kv.set("closing_deg_per_s", &mut cfg.closing_deg_per_s)?;
        kv.set("settle_s", &mut cfg.settle_s)?;
        kv.set("lift_speed_mps", &mut cfg.lift_speed_mps)?;
        kv.set("lift_s", &mut cfg.lift_s)?;
        if let Some(v) = kv.list::<f64>("force_fraction")? {
            let [lo, hi] = v[..] else {
                return Err(Error::Config("force_fraction needs two values".into()));
            };
            cfg.force_fraction = (lo, hi);
        }
        kv.set("duration_s", &mut cfg.duration_s)?;
        kv.set("second_press_s", &mut cfg.second_press_s)?;
        kv.set("policy", &mut cfg.policy)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        let (lo, hi) = self.force_fraction;
        if !(0.0 < lo && lo <= hi) {
            return Err(Error::Config("force_fraction must satisfy 0 < lo <= hi".into()));
        }
        if !(self.closing_deg_per_s > 0.0) || self.init_s < 0.0 || self.settle_s < 0.0 || self.lift_s < 0.0 {
            return Err(Error::Config("scenario timings must be non-negative".into()));
        }
        self.object.validate()?;
        self.gripper.validate()?;
        self.sensor.validate()
    }
}

/// Everything a simulated run produced.
#[derive(Debug, Clone)]
pub struct SimRun {
    pub kind: ScenarioKind,
    pub seed: u64,
    pub object: SimObject,
    pub trace: Trace,
    pub ground_truth: Vec<GroundTruthRow>,
    pub onsets: Vec<SlipOnset>,
    /// Commanded angle (A) or the two press angles (B, E).
    pub theta_targets: Vec<f64>,
    pub outcome: Option<Outcome>,
}

struct Recorder {
    trace: Trace,
    gt: Vec<GroundTruthRow>,
    force: bool,
}

impl Recorder {
    fn new(force: bool, slip: bool, capacity: usize) -> Self {
        Self {
            trace: Trace {
                frames: Vec::with_capacity(capacity),
                force_n: force.then(|| Vec::with_capacity(capacity)),
                slip_gt: slip.then(|| Vec::with_capacity(capacity)),
            },
            gt: Vec::with_capacity(capacity),
            force,
        }
    }

    fn step(&mut self, world: &mut World, theta: f64, lift: f64, phase: &str) {
        let out = world.step(theta, lift);
        self.trace.frames.push(out.frame);
        if self.force {
            if let Some(f) = self.trace.force_n.as_mut() {
                f.push(0.5 * (out.normal_n[0] + out.normal_n[1]));
            }
        }
        if let Some(s) = self.trace.slip_gt.as_mut() {
            s.push(out.slip);
        }
        self.gt.push(GroundTruthRow {
            t: out.frame.t,
            slip_gt: out.slip,
            force_r_n: out.normal_n[0],
            force_l_n: out.normal_n[1],
            phase: phase.to_string(),
        });
    }
}

fn samples(seconds: f64) -> usize {
    (seconds * SAMPLE_RATE_HZ).round() as usize
}

/// Ramp the command from `from` to `to` at `rate` deg/s, one value per sample.
fn ramp(from: f64, to: f64, rate: f64) -> impl Iterator<Item = f64> {
    let n = samples((from - to).abs() / rate).max(1);
    (1..=n).map(move |i| from + (to - from) * i as f64 / n as f64)
}

/// Run an open-loop scenario, or one closed-loop episode for C and D.
pub fn run_scenario(cfg: &ScenarioConfig, model: Option<&ForceModel>) -> Result<SimRun> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ 0x5EED_0F_5CE0);
    let world_seed = rng.gen();
    let mut world = World::new(cfg.gripper.clone(), cfg.sensor.clone(), cfg.object.clone(), world_seed)?;
    let open = cfg.gripper.open_deg;
    let mut thetas = Vec::new();
    let rec = match cfg.kind {
        ScenarioKind::A => {
            let frac = rng.gen_range(cfg.force_fraction.0..=cfg.force_fraction.1);
            let target = cfg.gripper.theta_for_force(cfg.object.width_m, frac * cfg.object.required_force_n());
            thetas.push(target);
            let mut r = Recorder::new(false, true, samples(cfg.init_s + cfg.settle_s + cfg.lift_s + 4.0));
            for _ in 0..samples(cfg.init_s) {
                r.step(&mut world, open, 0.0, "init");
            }
            for th in ramp(open, target, cfg.closing_deg_per_s) {
                r.step(&mut world, th, 0.0, "closing");
            }
            for _ in 0..samples(cfg.settle_s) {
                r.step(&mut world, target, 0.0, "hold");
            }
            for _ in 0..samples(cfg.lift_s) {
                r.step(&mut world, target, cfg.lift_speed_mps, "lifting");
            }
            r
        }
        ScenarioKind::B | ScenarioKind::E => {
            let zero = cfg.gripper.theta_zero_force(cfg.object.width_m).min(open);
            let t1 = rng.gen_range(0.0..=zero);
            let t2 = rng.gen_range(0.0..=zero);
            thetas.extend([t1, t2]);
            let total = samples(cfg.duration_s);
            let mut r = Recorder::new(true, false, total);
            let mut cmd = open;
            let mut schedule = Vec::with_capacity(total);
            schedule.extend(std::iter::repeat((open, "init")).take(samples(cfg.init_s)));
            for th in ramp(open, t1, cfg.closing_deg_per_s) {
                schedule.push((th, "press"));
                cmd = th;
            }
            while schedule.len() < samples(cfg.second_press_s) {
                schedule.push((cmd, "hold"));
            }
            for th in ramp(cmd, t2, cfg.closing_deg_per_s) {
                schedule.push((th, "press"));
            }
            while schedule.len() < total {
                schedule.push((t2, "hold"));
            }
            for &(th, phase) in schedule.iter().take(total) {
                r.step(&mut world, th, 0.0, phase);
            }
            r
        }
        ScenarioKind::Q => {
            let mut r = Recorder::new(false, true, samples(cfg.duration_s));
            for _ in 0..samples(cfg.duration_s) {
                r.step(&mut world, open, 0.0, "idle");
            }
            r
        }
        ScenarioKind::C | ScenarioKind::D => {
            let model = match model {
                Some(m) => m.clone(),
                None => calibration_model(cfg.seed)?,
            };
            let ep_cfg = EpisodeConfig {
                gripper: cfg.gripper.clone(),
                sensor: cfg.sensor.clone(),
                controller: crate::controller::ControllerConfig {
                    policy: cfg.policy,
                    init_s: cfg.init_s,
                    ..Default::default()
                },
                record: true,
                ..EpisodeConfig::default()
            };
            let ep = run_episode(&cfg.object, world_seed, &model, &ep_cfg)?;
            return Ok(SimRun {
                kind: cfg.kind,
                seed: cfg.seed,
                object: cfg.object.clone(),
                trace: ep.trace.unwrap_or_default(),
                ground_truth: ep.ground_truth,
                onsets: ep.onsets,
                theta_targets: Vec::new(),
                outcome: Some(ep.outcome),
            });
        }
    };
    Ok(SimRun {
        kind: cfg.kind,
        seed: cfg.seed,
        object: cfg.object.clone(),
        trace: rec.trace,
        ground_truth: rec.gt,
        onsets: world.onsets().to_vec(),
        theta_targets: thetas,
        outcome: None,
    })
}

/// Labelled force trials from the indentor protocol: `per_tag` presses for
/// each of the six shapes.
pub fn force_trials(kind: ScenarioKind, per_tag: usize, seed: u64, extract: &ExtractConfig) -> Result<Vec<ForceTrial>> {
    if !kind.is_force_protocol() {
        return Err(Error::InvalidArgument(format!("scenario {kind} has no force labels")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(per_tag * INDENTOR_TAGS.len());
    for k in 0..per_tag {
        for tag in INDENTOR_TAGS {
            let mut cfg = ScenarioConfig::new(kind, rng.gen());
            cfg.object = indentor(tag);
            let run = run_scenario(&cfg, None)?;
            let labels: Vec<Option<f64>> = run.trace.force_n.as_ref().unwrap().iter().map(|&f| Some(f)).collect();
            out.push(trial_from_trace(&format!("{kind}{k:03}_{tag}"), tag, &run.trace, &labels, extract)?);
        }
    }
    Ok(out)
}

/// A small force model for closed-loop runs when none is supplied.
pub fn calibration_model(seed: u64) -> Result<ForceModel> {
    let trials = force_trials(ScenarioKind::B, 4, seed ^ 0xCA11_B8A7E, &ExtractConfig::default())?;
    let ds = crate::force::dataset_from_trials(trials.iter(), FeatureSet::Full);
    let (model, _) = train(&ds, &SvrParams::default(), FeatureSet::Full)?;
    Ok(model)
}
