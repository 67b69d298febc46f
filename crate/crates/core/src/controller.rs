//! Slip-reactive grasp state machine.
//!
//! `INIT → CLOSING → PRELOAD → LIFTING → {SUCCESS, DROPPED, CRUSHED}`. The
//! controller runs at a fixed tick rate and only ever tightens the grip.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kv::KvFile;
use crate::signal::{ChannelRing, NUM_CHANNELS};
use crate::slip::SlipState;
use crate::trace::CsvSink;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Policy {
    /// Preload, lift, tighten on each detected slip.
    Forte,
    /// Close fully, ignore the sensors.
    OnOff,
    /// Preload and lift, never react to slip.
    WoSlip,
}

impl Policy {
    pub const ALL: [Policy; 3] = [Policy::Forte, Policy::OnOff, Policy::WoSlip];

    pub fn name(self) -> &'static str {
        match self {
            Policy::Forte => "forte",
            Policy::OnOff => "on_off",
            Policy::WoSlip => "wo_slip",
        }
    }
}

impl fmt::Display for Policy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Policy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let k = s.trim().to_ascii_lowercase().replace('-', "_");
        Policy::ALL
            .into_iter()
            .find(|p| p.name() == k)
            .ok_or_else(|| Error::Config(format!("unknown policy `{s}` (forte, on_off, wo_slip)")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Phase {
    Init,
    Closing,
    Preload,
    Lifting,
    Success,
    Dropped,
    Crushed,
}

impl Phase {
    pub fn is_terminal(self) -> bool {
        matches!(self, Phase::Success | Phase::Dropped | Phase::Crushed)
    }

    pub fn name(self) -> &'static str {
        match self {
            Phase::Init => "INIT",
            Phase::Closing => "CLOSING",
            Phase::Preload => "PRELOAD",
            Phase::Lifting => "LIFTING",
            Phase::Success => "SUCCESS",
            Phase::Dropped => "DROPPED",
            Phase::Crushed => "CRUSHED",
        }
    }

    /// Whether the state machine may move from `self` to `next`.
    pub fn can_transition(self, next: Phase) -> bool {
        use Phase::*;
        matches!(
            (self, next),
            (Init, Closing)
                | (Closing, Preload)
                | (Closing, Lifting)
                | (Preload, Lifting)
                | (Lifting, Success)
                | (Lifting, Dropped)
                | (Closing | Preload | Lifting, Crushed)
        )
    }
}

impl fmt::Display for Phase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// How detected slip turns into grip increments.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Debounce {
    /// One increment per 0→1 transition of η.
    Edge,
    /// One increment per `period_s` while η stays high.
    Sustained { period_s: f64 },
}

/// Contact test over the recent window.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ContactMode {
    /// Max minus min on any channel.
    Range,
    /// Newest minus oldest on any channel.
    Endpoint,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ControllerConfig {
    pub policy: Policy,
    pub tick_hz: f64,
    pub init_s: f64,
    pub open_deg: f64,
    /// Closing step per tick while searching for contact and preloading.
    pub closing_step_deg: f64,
    /// Grip increment per slip event.
    pub increment_deg: f64,
    pub preload_n: f64,
    pub lift_speed_mps: f64,
    /// Arm travel after which the lift is complete.
    pub lift_distance_m: f64,
    pub contact_mode: ContactMode,
    pub contact_window_s: f64,
    pub contact_threshold: f64,
    pub debounce: Debounce,
    pub drop_window_s: f64,
    pub drop_floor_factor: f64,
    /// Lower bound on the per-channel noise floor used for drop detection.
    pub drop_floor_min: f64,
    /// Servo settling time before an ON_OFF lift.
    pub settle_s: f64,
}

impl Default for ControllerConfig {
    fn default() -> Self {
        Self {
            policy: Policy::Forte,
            tick_hz: 20.0,
            init_s: 1.0,
            open_deg: 40.0,
            closing_step_deg: 0.5,
            increment_deg: 0.88,
            preload_n: 0.25,
            lift_speed_mps: 0.005,
            lift_distance_m: 0.06,
            contact_mode: ContactMode::Range,
            contact_window_s: 0.1,
            contact_threshold: 0.01,
            debounce: Debounce::Edge,
            drop_window_s: 0.25,
            drop_floor_factor: 1.2,
            drop_floor_min: 0.005,
            settle_s: 1.5,
        }
    }
}

impl ControllerConfig {
    pub fn validate(&self) -> Result<()> {
        let pos = [
            self.tick_hz,
            self.open_deg,
            self.closing_step_deg,
            self.increment_deg,
            self.lift_speed_mps,
            self.lift_distance_m,
            self.contact_window_s,
            self.contact_threshold,
            self.drop_window_s,
            self.drop_floor_factor,
        ];
        if pos.iter().any(|v| !(*v > 0.0)) || self.preload_n < 0.0 || self.init_s < 0.0 || self.settle_s < 0.0 {
            return Err(Error::Config("controller parameters must be positive".into()));
        }
        if let Debounce::Sustained { period_s } = self.debounce {
            if !(period_s > 0.0) {
                return Err(Error::Config("debounce period must be positive".into()));
            }
        }
        Ok(())
    }

    /// Override fields from `controller.*` keys.
    pub fn apply_kv(&mut self, kv: &KvFile) -> Result<()> {
        kv.set("controller.policy", &mut self.policy)?;
        kv.set("controller.tick_hz", &mut self.tick_hz)?;
        kv.set("controller.init_s", &mut self.init_s)?;
        kv.set("controller.open_deg", &mut self.open_deg)?;
        kv.set("controller.closing_step_deg", &mut self.closing_step_deg)?;
        kv.set("controller.increment_deg", &mut self.increment_deg)?;
        kv.set("controller.preload_n", &mut self.preload_n)?;
        kv.set("controller.lift_speed_mps", &mut self.lift_speed_mps)?;
        kv.set("controller.lift_distance_m", &mut self.lift_distance_m)?;
        kv.set("controller.contact_window_s", &mut self.contact_window_s)?;
        kv.set("controller.contact_threshold", &mut self.contact_threshold)?;
        if let Some(m) = kv.raw("controller.contact_mode") {
            self.contact_mode = match m {
                "range" => ContactMode::Range,
                "endpoint" => ContactMode::Endpoint,
                _ => return Err(Error::Config(format!("controller.contact_mode: unknown `{m}`"))),
            };
        }
        if let Some(d) = kv.raw("controller.debounce") {
            self.debounce = match d {
                "edge" => Debounce::Edge,
                _ => match d.strip_prefix("sustained:").and_then(|p| p.parse().ok()) {
                    Some(period_s) => Debounce::Sustained { period_s },
                    None => {
                        return Err(Error::Config(format!(
                            "controller.debounce: expected `edge` or `sustained:<seconds>`, got `{d}`"
                        )))
                    }
                },
            };
        }
        kv.set("controller.drop_window_s", &mut self.drop_window_s)?;
        kv.set("controller.drop_floor_factor", &mut self.drop_floor_factor)?;
        kv.set("controller.drop_floor_min", &mut self.drop_floor_min)?;
        kv.set("controller.settle_s", &mut self.settle_s)?;
        self.validate()
    }

    pub fn tick_s(&self) -> f64 {
        1.0 / self.tick_hz
    }
}

/// Contact test on the newest `window_s` of filtered data.
pub fn detect_contact(ring: &ChannelRing, window_s: f64, threshold: f64, mode: ContactMode) -> bool {
    let k = ((window_s * ring.sample_rate_hz()).round() as usize).clamp(1, ring.len().max(1));
    let spread = match mode {
        ContactMode::Range => ring.range_last(k),
        ContactMode::Endpoint => ring.endpoint_change_last(k),
    };
    spread.is_ok_and(|s| s.iter().any(|&d| d > threshold))
}

/// What the controller sees each tick.
#[derive(Debug, Clone, Copy)]
pub struct ControllerInput<'a> {
    pub t: f64,
    pub ring: &'a ChannelRing,
    pub slip: &'a SlipState,
    pub force_n: Option<f64>,
    /// Arm travel since the lift started.
    pub lift_m: f64,
}

/// What the controller asks of the hardware.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Command {
    pub theta_deg: f64,
    pub lift_mps: f64,
}

/// One row of the session log.
#[derive(Debug, Clone, PartialEq)]
pub struct LogRow {
    pub t: f64,
    pub phase: Phase,
    pub theta_deg: f64,
    pub force_est_n: Option<f64>,
    pub eta: bool,
    pub event: String,
}

pub const SESSION_LOG_HEADER: [&str; 6] = ["t", "phase", "theta_deg", "force_est_n", "eta", "event"];

pub fn write_session_log(path: &Path, rows: &[LogRow]) -> Result<()> {
    let mut sink = CsvSink::create(path, &SESSION_LOG_HEADER)?;
    for r in rows {
        sink.line([
            r.t.to_string(),
            r.phase.name().to_string(),
            r.theta_deg.to_string(),
            r.force_est_n.map(|f| f.to_string()).unwrap_or_default(),
            if r.eta { "1" } else { "0" }.to_string(),
            r.event.clone(),
        ])?;
    }
    sink.finish().map(|_| ())
}

/// The grasp state machine.
#[derive(Debug, Clone)]
pub struct GraspController {
    config: ControllerConfig,
    phase: Phase,
    theta: f64,
    saturated: bool,
    seen_events: u64,
    last_increment: Option<f64>,
    closed_at: Option<f64>,
    floor: Option<[f64; NUM_CHANNELS]>,
    quiet_since: Option<f64>,
    increments: u32,
    log: Vec<LogRow>,
}

impl GraspController {
    pub fn new(config: ControllerConfig) -> Result<Self> {
        config.validate()?;
        Ok(Self {
            theta: config.open_deg,
            config,
            phase: Phase::Init,
            saturated: false,
            seen_events: 0,
            last_increment: None,
            closed_at: None,
            floor: None,
            quiet_since: None,
            increments: 0,
            log: Vec::new(),
        })
    }

    pub fn config(&self) -> &ControllerConfig {
        &self.config
    }

    pub fn phase(&self) -> Phase {
        self.phase
    }

    pub fn theta(&self) -> f64 {
        self.theta
    }

    /// The grip hit the fully closed limit.
    pub fn saturated(&self) -> bool {
        self.saturated
    }

    pub fn increments(&self) -> u32 {
        self.increments
    }

    pub fn log(&self) -> &[LogRow] {
        &self.log
    }

    pub fn command(&self) -> Command {
        Command {
            theta_deg: self.theta,
            lift_mps: if self.phase == Phase::Lifting { self.config.lift_speed_mps } else { 0.0 },
        }
    }

    /// Mark the object crushed. Only meaningful in simulation.
    pub fn crushed(&mut self, t: f64) {
        if self.phase.can_transition(Phase::Crushed) {
            self.enter(t, Phase::Crushed, None, false);
        }
    }

    fn enter(&mut self, t: f64, next: Phase, force: Option<f64>, eta: bool) {
        debug_assert!(self.phase.can_transition(next), "{} -> {}", self.phase, next);
        self.phase = next;
        self.note(t, force, eta, format!("enter_{}", next.name().to_ascii_lowercase()));
    }

    fn note(&mut self, t: f64, force: Option<f64>, eta: bool, event: String) {
        self.log.push(LogRow {
            t,
            phase: self.phase,
            theta_deg: self.theta,
            force_est_n: force,
            eta,
            event,
        });
    }

    fn tighten(&mut self, step: f64) {
        let next = self.theta - step;
        if next <= 0.0 {
            self.theta = 0.0;
            self.saturated = true;
        } else {
            self.theta = next;
        }
    }

    fn dropped(&mut self, input: &ControllerInput<'_>) -> bool {
        let Some(floor) = self.floor else {
            return false;
        };
        let mean = input.ring.window_mean(self.config.drop_window_s).unwrap_or([f64::INFINITY; NUM_CHANNELS]);
        let quiet = mean
            .iter()
            .zip(floor)
            .all(|(m, f)| m.abs() <= self.config.drop_floor_factor * f);
        if !quiet {
            self.quiet_since = None;
            return false;
        }
        let since = *self.quiet_since.get_or_insert(input.t);
        input.t - since >= self.config.drop_window_s
    }

    fn measure_floor(&mut self, ring: &ChannelRing) {
        let n = ((self.config.init_s * ring.sample_rate_hz()) as usize).clamp(1, ring.len().max(1));
        let mut buf = vec![0.0; n];
        let floor = std::array::from_fn(|c| {
            let rms = match ring.copy_last(c, &mut buf) {
                Ok(()) => (buf.iter().map(|x| x * x).sum::<f64>() / n as f64).sqrt(),
                Err(_) => 0.0,
            };
            rms.max(self.config.drop_floor_min)
        });
        self.floor = Some(floor);
    }

    /// Advance one controller tick and return the new command.
    pub fn tick(&mut self, input: &ControllerInput<'_>) -> Command {
        let eta = input.slip.eta;
        let f = input.force_n;
        let cfg = self.config.clone();
        match self.phase {
            Phase::Init => {
                if input.t >= cfg.init_s && !input.ring.is_empty() {
                    self.measure_floor(input.ring);
                    self.seen_events = input.slip.events;
                    self.enter(input.t, Phase::Closing, f, eta);
                }
            }
            Phase::Closing => {
                if cfg.policy == Policy::OnOff {
                    self.theta = 0.0;
                    let at = *self.closed_at.get_or_insert(input.t);
                    if input.t - at >= cfg.settle_s {
                        self.enter(input.t, Phase::Lifting, f, eta);
                    }
                } else if detect_contact(input.ring, cfg.contact_window_s, cfg.contact_threshold, cfg.contact_mode) {
                    self.note(input.t, f, eta, "contact".into());
                    self.enter(input.t, Phase::Preload, f, eta);
                } else {
                    self.tighten(cfg.closing_step_deg);
                }
            }
            Phase::Preload => {
                if f.is_some_and(|f| f >= cfg.preload_n) {
                    self.seen_events = input.slip.events;
                    self.enter(input.t, Phase::Lifting, f, eta);
                } else if !self.saturated {
                    self.tighten(cfg.closing_step_deg);
                } else {
                    self.seen_events = input.slip.events;
                    self.enter(input.t, Phase::Lifting, f, eta);
                }
            }
            Phase::Lifting => {
                if cfg.policy == Policy::Forte {
                    let fire = match cfg.debounce {
                        Debounce::Edge => input.slip.events > self.seen_events,
                        Debounce::Sustained { period_s } => {
                            eta && self.last_increment.map_or(true, |t0| input.t - t0 >= period_s - 1e-9)
                        }
                    };
                    self.seen_events = input.slip.events;
                    if fire && !self.saturated {
                        self.tighten(cfg.increment_deg);
                        self.increments += 1;
                        self.last_increment = Some(input.t);
                        let ev = if self.saturated { "slip_increment_saturated" } else { "slip_increment" };
                        self.note(input.t, f, eta, ev.into());
                    }
                }
                if cfg.policy != Policy::OnOff && self.dropped(input) {
                    self.enter(input.t, Phase::Dropped, f, eta);
                } else if input.lift_m >= cfg.lift_distance_m {
                    self.enter(input.t, Phase::Success, f, eta);
                }
            }
            Phase::Success | Phase::Dropped | Phase::Crushed => {}
        }
        if !self.phase.is_terminal() {
            self.note(input.t, f, eta, String::new());
        }
        self.command()
    }

    /// Force a terminal outcome decided outside the controller.
    pub fn finish(&mut self, t: f64, phase: Phase) {
        if self.phase != phase && self.phase.can_transition(phase) {
            self.enter(t, phase, None, false);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::signal::{PipelineConfig, SensorFrame};

    fn ring_with(values: impl Fn(usize) -> f64, n: usize) -> ChannelRing {
        let mut r = ChannelRing::for_config(&PipelineConfig::default());
        for i in 0..n {
            r.push(&SensorFrame::new(i as f64 / 2000.0, [values(i); 6]));
        }
        r
    }

    fn input<'a>(t: f64, ring: &'a ChannelRing, slip: &'a SlipState, f: Option<f64>) -> ControllerInput<'a> {
        ControllerInput {
            t,
            ring,
            slip,
            force_n: f,
            lift_m: 0.0,
        }
    }

    #[test]
    fn transitions_table() {
        use Phase::*;
        assert!(Init.can_transition(Closing));
        assert!(!Init.can_transition(Crushed));
        assert!(!Success.can_transition(Dropped));
        assert!(Preload.can_transition(Crushed));
        assert!(!Lifting.can_transition(Closing));
    }

    #[test]
    fn policy_parsing() {
        assert_eq!("FORTE".parse::<Policy>().unwrap(), Policy::Forte);
        assert_eq!("on-off".parse::<Policy>().unwrap(), Policy::OnOff);
        assert!("magic".parse::<Policy>().is_err());
    }

    #[test]
    fn contact_modes() {
        let flat = ring_with(|i| 0.001 * (i % 3) as f64, 2000);
        assert!(!detect_contact(&flat, 0.1, 0.01, ContactMode::Range));
        let bump = ring_with(|i| if (1850..1900).contains(&i) { 0.05 } else { 0.0 }, 2000);
        assert!(detect_contact(&bump, 0.1, 0.01, ContactMode::Range));
        assert!(!detect_contact(&bump, 0.1, 0.01, ContactMode::Endpoint));
    }

    fn to_lifting(c: &mut GraspController, slip: &SlipState) {
        let quiet = ring_with(|_| 0.0, 2000);
        c.tick(&input(1.0, &quiet, slip, None));
        assert_eq!(c.phase(), Phase::Closing);
        let touched = ring_with(|i| if i > 1900 { 0.05 } else { 0.0 }, 2000);
        c.tick(&input(1.05, &touched, slip, Some(0.0)));
        assert_eq!(c.phase(), Phase::Preload);
        c.tick(&input(1.1, &touched, slip, Some(0.1)));
        assert_eq!(c.phase(), Phase::Preload);
        c.tick(&input(1.15, &touched, slip, Some(0.3)));
        assert_eq!(c.phase(), Phase::Lifting);
    }

    #[test]
    fn increments_only_on_new_events() {
        let mut c = GraspController::new(ControllerConfig::default()).unwrap();
        let mut slip = SlipState::default();
        to_lifting(&mut c, &slip);
        let held = ring_with(|_| 0.05, 2000);
        let theta0 = c.theta();
        c.tick(&input(1.2, &held, &slip, Some(0.3)));
        assert_eq!(c.theta(), theta0);
        slip.eta = true;
        slip.events = 1;
        c.tick(&input(1.25, &held, &slip, Some(0.3)));
        assert!((c.theta() - (theta0 - 0.88)).abs() < 1e-12);
        // η still high, no new edge
        c.tick(&input(1.3, &held, &slip, Some(0.3)));
        assert!((c.theta() - (theta0 - 0.88)).abs() < 1e-12);
        assert_eq!(c.increments(), 1);
    }

    #[test]
    fn sustained_debounce_repeats() {
        let cfg = ControllerConfig {
            debounce: Debounce::Sustained { period_s: 0.1 },
            ..ControllerConfig::default()
        };
        let mut c = GraspController::new(cfg).unwrap();
        let mut slip = SlipState::default();
        to_lifting(&mut c, &slip);
        let held = ring_with(|_| 0.05, 2000);
        slip.eta = true;
        slip.events = 1;
        for k in 0..4 {
            c.tick(&input(1.2 + 0.05 * k as f64, &held, &slip, Some(0.3)));
        }
        assert_eq!(c.increments(), 2);
    }

    #[test]
    fn wo_slip_never_tightens_while_lifting() {
        let cfg = ControllerConfig {
            policy: Policy::WoSlip,
            ..ControllerConfig::default()
        };
        let mut c = GraspController::new(cfg).unwrap();
        let mut slip = SlipState::default();
        to_lifting(&mut c, &slip);
        let th = c.theta();
        let held = ring_with(|_| 0.05, 2000);
        for k in 0..10 {
            slip.eta = k % 2 == 0;
            slip.events = k;
            c.tick(&input(1.2 + 0.05 * k as f64, &held, &slip, Some(0.3)));
        }
        assert_eq!(c.theta(), th);
    }

    #[test]
    fn increments_saturate_at_closed() {
        let mut c = GraspController::new(ControllerConfig::default()).unwrap();
        let mut slip = SlipState::default();
        to_lifting(&mut c, &slip);
        let held = ring_with(|_| 0.05, 2000);
        for k in 1..=80 {
            slip.events = k;
            c.tick(&input(1.2 + 0.05 * k as f64, &held, &slip, Some(0.3)));
        }
        assert_eq!(c.theta(), 0.0);
        assert!(c.saturated());
        assert!(c.theta() >= 0.0);
    }

    #[test]
    fn drop_needs_quiet_window() {
        let mut c = GraspController::new(ControllerConfig::default()).unwrap();
        let slip = SlipState::default();
        to_lifting(&mut c, &slip);
        let quiet = ring_with(|_| 0.0, 2000);
        c.tick(&input(2.0, &quiet, &slip, Some(0.0)));
        assert_eq!(c.phase(), Phase::Lifting);
        c.tick(&input(2.3, &quiet, &slip, Some(0.0)));
        assert_eq!(c.phase(), Phase::Dropped);
    }

    #[test]
    fn on_off_closes_fully_then_lifts() {
        let cfg = ControllerConfig {
            policy: Policy::OnOff,
            ..ControllerConfig::default()
        };
        let mut c = GraspController::new(cfg).unwrap();
        let slip = SlipState::default();
        let quiet = ring_with(|_| 0.0, 2000);
        c.tick(&input(1.0, &quiet, &slip, None));
        c.tick(&input(1.05, &quiet, &slip, None));
        assert_eq!(c.theta(), 0.0);
        c.tick(&input(2.6, &quiet, &slip, None));
        assert_eq!(c.phase(), Phase::Lifting);
    }

    #[test]
    fn kv_debounce() {
        let mut cfg = ControllerConfig::default();
        let kv = KvFile::parse("controller.debounce = sustained:0.1\ncontroller.policy = wo_slip\n", "c").unwrap();
        cfg.apply_kv(&kv).unwrap();
        assert_eq!(cfg.debounce, Debounce::Sustained { period_s: 0.1 });
        assert_eq!(cfg.policy, Policy::WoSlip);
        let kv = KvFile::parse("controller.debounce = sometimes\n", "c").unwrap();
        assert!(cfg.apply_kv(&kv).is_err());
    }
}
