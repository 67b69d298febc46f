//! One-axis grasp physics: a servo-driven parallel gripper squeezing an object
//! that rests on a table, lifted vertically.
//!
//! Each finger tip is a small mass hung from the finger on a tangential
//! spring. A tip either sticks to the object (Coulomb, μs) or slides over it
//! (μk). Stick-slip arises from the spring storing load while stuck and
//! releasing it once the static limit is exceeded.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::object::{SimObject, GRAVITY};
use super::sensor::{shape_weights, SensorResponseModel, SensorState};
use crate::error::{Error, Result};
use crate::kv::KvFile;
use crate::signal::{SensorFrame, CHANNELS_PER_FINGER};

pub const SAMPLE_RATE_HZ: f64 = 2000.0;

/// Gripper geometry and contact mechanics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GripperModel {
    pub open_deg: f64,
    /// Pad separation per degree of servo angle, metres.
    pub gap_per_deg_m: f64,
    /// Large-indentation normal stiffness per finger, N/m.
    pub normal_stiffness: f64,
    /// Indentation scale over which contact stiffens from zero, metres.
    pub contact_softening_m: f64,
    pub tip_mass_kg: f64,
    /// Tangential stiffness at the mean grip force, N/m.
    pub tangential_stiffness: f64,
    pub tangential_damping: f64,
    pub servo_hz: f64,
    /// Force asymmetry per metre of grasp offset.
    pub offset_sensitivity: f64,
    /// Slip distance after which a finger loses the object.
    pub contact_length_m: f64,
    /// Relative speed above which a finger counts as slipping.
    pub slip_speed_mps: f64,
    pub substeps: usize,
}

impl Default for GripperModel {
    fn default() -> Self {
        Self {
            open_deg: 40.0,
            gap_per_deg_m: 0.0022,
            normal_stiffness: 396.8,
            contact_softening_m: 0.006,
            tip_mass_kg: 0.005,
            tangential_stiffness: 150.0,
            tangential_damping: 0.5,
            servo_hz: 10.0,
            offset_sensitivity: 50.0,
            contact_length_m: 0.03,
            slip_speed_mps: 1e-5,
            substeps: 4,
        }
    }
}

impl GripperModel {
    pub fn validate(&self) -> Result<()> {
        let pos = [
            self.open_deg,
            self.gap_per_deg_m,
            self.normal_stiffness,
            self.contact_softening_m,
            self.tip_mass_kg,
            self.tangential_stiffness,
            self.servo_hz,
            self.contact_length_m,
            self.slip_speed_mps,
        ];
        if pos.iter().any(|v| !(*v > 0.0)) || self.tangential_damping < 0.0 || self.substeps == 0 {
            return Err(Error::Config("gripper parameters must be positive".into()));
        }
        Ok(())
    }

    pub fn apply_kv(&mut self, kv: &KvFile) -> Result<()> {
        kv.set("gripper.open_deg", &mut self.open_deg)?;
        kv.set("gripper.gap_per_deg_m", &mut self.gap_per_deg_m)?;
        kv.set("gripper.normal_stiffness", &mut self.normal_stiffness)?;
        kv.set("gripper.contact_softening_m", &mut self.contact_softening_m)?;
        kv.set("gripper.tip_mass_kg", &mut self.tip_mass_kg)?;
        kv.set("gripper.tangential_stiffness", &mut self.tangential_stiffness)?;
        kv.set("gripper.tangential_damping", &mut self.tangential_damping)?;
        kv.set("gripper.servo_hz", &mut self.servo_hz)?;
        kv.set("gripper.offset_sensitivity", &mut self.offset_sensitivity)?;
        kv.set("gripper.contact_length_m", &mut self.contact_length_m)?;
        kv.set("gripper.substeps", &mut self.substeps)?;
        self.validate()
    }

    /// Mean per-finger normal force for an object of `width` at servo angle `theta`.
    pub fn force_at(&self, theta_deg: f64, width_m: f64) -> f64 {
        let delta = ((width_m - theta_deg * self.gap_per_deg_m) / 2.0).max(0.0);
        self.normal_stiffness * delta * delta / (delta + self.contact_softening_m)
    }

    /// Largest angle at which the pads touch the object.
    pub fn theta_zero_force(&self, width_m: f64) -> f64 {
        width_m / self.gap_per_deg_m
    }

    /// Angle giving mean normal force `force_n`, clamped to fully closed.
    pub fn theta_for_force(&self, width_m: f64, force_n: f64) -> f64 {
        let k = self.normal_stiffness;
        let f = force_n.max(0.0);
        let delta = (f + (f * f + 4.0 * k * f * self.contact_softening_m).sqrt()) / (2.0 * k);
        ((width_m - 2.0 * delta) / self.gap_per_deg_m).max(0.0)
    }

    /// Right/left force split for a grasp offset.
    pub fn asymmetry(&self, offset_m: f64) -> f64 {
        (offset_m * self.offset_sensitivity).clamp(-0.5, 0.5)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TipState {
    Free,
    Stick,
    Slip,
}

#[derive(Debug, Clone, Copy)]
struct Tip {
    /// Tip position relative to its rest point on the finger.
    d: f64,
    dv: f64,
    state: TipState,
    slid: f64,
    lost: bool,
}

impl Tip {
    fn new() -> Self {
        Self {
            d: 0.0,
            dv: 0.0,
            state: TipState::Free,
            slid: 0.0,
            lost: false,
        }
    }
}

/// A stick→slip transition.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SlipOnset {
    pub t: f64,
    /// 0 = right, 1 = left.
    pub finger: usize,
}

/// What one 2 kHz tick produced.
#[derive(Debug, Clone, Copy)]
pub struct TickOutput {
    pub frame: SensorFrame,
    pub slip: bool,
    pub normal_n: [f64; 2],
}

#[derive(Debug, Clone)]
pub struct World {
    gripper: GripperModel,
    object: SimObject,
    beta: f64,
    shape: [[f64; CHANNELS_PER_FINGER]; 2],
    sensor: SensorState,
    rng: ChaCha8Rng,
    tick: u64,
    theta: f64,
    theta_vel: f64,
    base_z: f64,
    obj_z: f64,
    obj_v: f64,
    tips: [Tip; 2],
    normal: [f64; 2],
    tangential: [f64; 2],
    crushed: bool,
    onsets: Vec<SlipOnset>,
}

impl World {
    pub fn new(gripper: GripperModel, sensor: SensorResponseModel, object: SimObject, seed: u64) -> Result<Self> {
        gripper.validate()?;
        object.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let sensor = SensorState::new(sensor, &mut rng)?;
        let w = shape_weights(&object.geometry);
        Ok(Self {
            beta: gripper.asymmetry(object.grasp_offset_m),
            theta: gripper.open_deg,
            gripper,
            object,
            shape: [w, w],
            sensor,
            rng,
            tick: 0,
            theta_vel: 0.0,
            base_z: 0.0,
            obj_z: 0.0,
            obj_v: 0.0,
            tips: [Tip::new(); 2],
            normal: [0.0; 2],
            tangential: [0.0; 2],
            crushed: false,
            onsets: Vec::new(),
        })
    }

    pub fn gripper(&self) -> &GripperModel {
        &self.gripper
    }

    pub fn object(&self) -> &SimObject {
        &self.object
    }

    pub fn time(&self) -> f64 {
        self.tick as f64 / SAMPLE_RATE_HZ
    }

    pub fn theta(&self) -> f64 {
        self.theta
    }

    pub fn normal_forces(&self) -> [f64; 2] {
        self.normal
    }

    /// Object height above the table.
    pub fn object_height(&self) -> f64 {
        self.obj_z
    }

    pub fn base_height(&self) -> f64 {
        self.base_z
    }

    pub fn crushed(&self) -> bool {
        self.crushed
    }

    /// Both fingers have slid off the object.
    pub fn contact_lost(&self) -> bool {
        self.tips.iter().all(|t| t.lost)
    }

    pub fn tip_states(&self) -> [TipState; 2] {
        [self.tips[0].state, self.tips[1].state]
    }

    pub fn onsets(&self) -> &[SlipOnset] {
        &self.onsets
    }

    /// Advance one sample with servo target `theta_cmd` and lift speed `lift_mps`.
    pub fn step(&mut self, theta_cmd: f64, lift_mps: f64) -> TickOutput {
        let dt = 1.0 / (SAMPLE_RATE_HZ * self.gripper.substeps as f64);
        let theta_cmd = theta_cmd.clamp(0.0, self.gripper.open_deg);
        let mut slip = false;
        for _ in 0..self.gripper.substeps {
            slip |= self.substep(dt, theta_cmd, lift_mps);
        }
        self.tick += 1;
        let t = self.time();
        let frame = self.sensor.sample(
            t,
            1.0 / SAMPLE_RATE_HZ,
            self.normal,
            self.tangential,
            &self.shape,
            &mut self.rng,
        );
        TickOutput {
            frame,
            slip,
            normal_n: self.normal,
        }
    }

    fn substep(&mut self, dt: f64, theta_cmd: f64, base_v: f64) -> bool {
        let g = &self.gripper;
        let w = 2.0 * std::f64::consts::PI * g.servo_hz;
        self.theta_vel += (w * w * (theta_cmd - self.theta) - 2.0 * w * self.theta_vel) * dt;
        self.theta = (self.theta + self.theta_vel * dt).max(0.0);
        self.base_z += base_v * dt;

        let f = g.force_at(self.theta, self.object.width_m);
        let split = [1.0 + self.beta, 1.0 - self.beta];
        for i in 0..2 {
            self.normal[i] = if self.tips[i].lost { 0.0 } else { f * split[i] };
            if self.normal[i] > self.object.fragility_n {
                self.crushed = true;
            }
        }
        if self.object.fixed {
            self.tangential = [0.0; 2];
            return false;
        }

        let m_t = g.tip_mass_kg;
        let c = g.tangential_damping;
        let k: [f64; 2] = std::array::from_fn(|i| {
            if f > 0.0 {
                g.tangential_stiffness * split[i] * split[i]
            } else {
                g.tangential_stiffness
            }
        });
        let (mu_s, mu_k) = (self.object.mu_static, self.object.mu_kinetic);

        for i in 0..2 {
            let tip = &mut self.tips[i];
            if self.normal[i] > 0.0 && tip.state == TipState::Free {
                tip.state = TipState::Stick;
                tip.dv = self.obj_v - base_v;
            } else if self.normal[i] <= 0.0 {
                tip.state = TipState::Free;
            }
        }

        let spring: [f64; 2] = std::array::from_fn(|i| -k[i] * self.tips[i].d - c * self.tips[i].dv);
        let rel_v: [f64; 2] = std::array::from_fn(|i| base_v + self.tips[i].dv - self.obj_v);

        let mut mass = self.object.mass_kg;
        let mut force = -self.object.mass_kg * GRAVITY;
        for i in 0..2 {
            match self.tips[i].state {
                TipState::Stick => {
                    mass += m_t;
                    force += spring[i];
                }
                TipState::Slip => {
                    let dir = if rel_v[i] != 0.0 { rel_v[i].signum() } else { spring[i].signum() };
                    force += mu_k * self.normal[i] * dir;
                }
                TipState::Free => {}
            }
        }
        let on_table = self.obj_z <= 0.0 && self.obj_v <= 0.0;
        let acc = if on_table && force <= 0.0 { 0.0 } else { force / mass };

        let mut slipping = false;
        for i in 0..2 {
            if self.tips[i].state == TipState::Stick && (spring[i] - m_t * acc).abs() > mu_s * self.normal[i] {
                self.tips[i].state = TipState::Slip;
                let t = self.tick as f64 / SAMPLE_RATE_HZ;
                self.onsets.push(SlipOnset { t, finger: i });
                let drop = (mu_s - mu_k) * self.normal[i];
                self.sensor.add_burst(i, t, drop, &mut self.rng);
            }
        }

        self.obj_v += acc * dt;
        self.obj_z += self.obj_v * dt;
        if self.obj_z <= 0.0 {
            self.obj_z = 0.0;
            self.obj_v = self.obj_v.max(0.0);
        }

        for i in 0..2 {
            let tip = &mut self.tips[i];
            match tip.state {
                TipState::Free => {
                    let a = spring[i] / m_t;
                    tip.dv += a * dt;
                }
                TipState::Stick => {
                    tip.dv = self.obj_v - base_v;
                }
                TipState::Slip => {
                    let dir = if rel_v[i] != 0.0 { rel_v[i].signum() } else { spring[i].signum() };
                    let a = (spring[i] - mu_k * self.normal[i] * dir) / m_t;
                    let u = base_v + tip.dv + a * dt;
                    let new_rel = u - self.obj_v;
                    tip.slid += new_rel.abs() * dt;
                    if new_rel.abs() > g.slip_speed_mps {
                        slipping = true;
                    }
                    let crossed = new_rel == 0.0 || new_rel.signum() != dir;
                    if crossed && (spring[i] - m_t * acc).abs() <= mu_s * self.normal[i] {
                        tip.state = TipState::Stick;
                        tip.dv = self.obj_v - base_v;
                    } else {
                        tip.dv = u - base_v;
                    }
                    if tip.slid > g.contact_length_m {
                        tip.lost = true;
                        tip.state = TipState::Free;
                    }
                }
            }
            tip.d += tip.dv * dt;
        }
        self.tangential = std::array::from_fn(|i| match self.tips[i].state {
            TipState::Free => 0.0,
            _ => -k[i] * self.tips[i].d,
        });
        slipping
    }
}
