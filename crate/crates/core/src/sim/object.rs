use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kv::KvFile;

pub const GRAVITY: f64 = 9.81;

/// Object to be grasped.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimObject {
    pub name: String,
    pub mass_kg: f64,
    pub mu_static: f64,
    pub mu_kinetic: f64,
    /// Per-finger normal force that breaks the object; infinite if robust.
    pub fragility_n: f64,
    /// Width between the finger pads when just touching, metres.
    pub width_m: f64,
    pub geometry: String,
    /// Lateral offset from the gripper midline, metres. Positive loads the
    /// right finger more.
    pub grasp_offset_m: f64,
    /// Whether the object is rigid enough to act as a fixed indentor.
    pub fixed: bool,
}

impl SimObject {
    pub fn validate(&self) -> Result<()> {
        if !(self.mass_kg > 0.0) {
            return Err(Error::Config(format!("{}: mass must be positive", self.name)));
        }
        if !(0.0 < self.mu_kinetic && self.mu_kinetic < self.mu_static) {
            return Err(Error::Config(format!("{}: need 0 < μk < μs", self.name)));
        }
        if !(self.fragility_n > 0.0) {
            return Err(Error::Config(format!("{}: fragility must be positive", self.name)));
        }
        if !(self.width_m > 0.0) {
            return Err(Error::Config(format!("{}: width must be positive", self.name)));
        }
        Ok(())
    }

    pub fn weight_n(&self) -> f64 {
        self.mass_kg * GRAVITY
    }

    /// Per-finger normal force at which two-finger static friction just
    /// carries the weight, `mg / (2μs)`.
    pub fn required_force_n(&self) -> f64 {
        self.weight_n() / (2.0 * self.mu_static)
    }

    pub fn is_fragile(&self) -> bool {
        self.fragility_n.is_finite()
    }

    /// Override fields from `object.*` keys.
    pub fn apply_kv(&mut self, kv: &KvFile) -> Result<()> {
        if let Some(n) = kv.raw("object.name") {
            self.name = n.to_string();
        }
        kv.set("object.mass_kg", &mut self.mass_kg)?;
        kv.set("object.mu_static", &mut self.mu_static)?;
        kv.set("object.mu_kinetic", &mut self.mu_kinetic)?;
        kv.set("object.fragility_n", &mut self.fragility_n)?;
        kv.set("object.width_m", &mut self.width_m)?;
        if let Some(g) = kv.raw("object.geometry") {
            self.geometry = g.to_string();
        }
        kv.set("object.grasp_offset_m", &mut self.grasp_offset_m)?;
        kv.set("object.fixed", &mut self.fixed)?;
        self.validate()
    }
}

#[allow(clippy::too_many_arguments)]
fn obj(name: &str, mass_g: f64, mu_s: f64, mu_k: f64, fragility: f64, width_mm: f64, geometry: &str, offset_mm: f64) -> SimObject {
    SimObject {
        name: name.into(),
        mass_kg: mass_g / 1000.0,
        mu_static: mu_s,
        mu_kinetic: mu_k,
        fragility_n: fragility,
        width_m: width_mm / 1000.0,
        geometry: geometry.into(),
        grasp_offset_m: offset_mm / 1000.0,
        fixed: false,
    }
}

/// Evaluation objects: five fragile, five slippery and two everyday items.
pub fn object_suite() -> Vec<SimObject> {
    let inf = f64::INFINITY;
    vec![
        obj("raspberry", 5.0, 0.9, 0.6, 0.9, 22.0, "sphere", 1.0),
        obj("grape", 7.0, 0.8, 0.5, 1.1, 20.0, "sphere", -1.5),
        obj("potato_chip", 3.0, 0.7, 0.45, 0.7, 30.0, "flat", 2.0),
        obj("egg_shell", 60.0, 0.9, 0.6, 1.4, 45.0, "ellipsoid", -1.0),
        obj("tomato", 40.0, 1.0, 0.7, 1.6, 35.0, "sphere", 1.5),
        obj("jam_jar", 145.0, 0.6, 0.4, inf, 60.0, "cylinder", 4.0),
        obj("soap_bar", 110.0, 0.45, 0.3, inf, 40.0, "box", -3.0),
        obj("metal_can", 150.0, 0.55, 0.35, inf, 65.0, "cylinder", 2.5),
        obj("glass_bottle", 180.0, 0.7, 0.45, inf, 60.0, "cylinder", -2.0),
        obj("wet_apple", 120.0, 0.5, 0.32, inf, 70.0, "sphere", 3.0),
        obj("foam_block", 20.0, 1.0, 0.7, inf, 50.0, "box", 0.5),
        obj("wood_cube", 60.0, 0.8, 0.55, inf, 45.0, "box", -0.5),
    ]
}

pub fn find_object(name: &str) -> Result<SimObject> {
    object_suite()
        .into_iter()
        .chain(characterization_objects())
        .find(|o| o.name == name)
        .ok_or_else(|| Error::UnknownObject(name.to_string()))
}

/// Objects lifted with deliberately insufficient force.
pub fn characterization_objects() -> Vec<SimObject> {
    vec![
        obj("apple", 231.0, 0.9, 0.6, f64::INFINITY, 70.0, "sphere", 3.0),
        obj("jar", 145.0, 0.8, 0.55, f64::INFINITY, 60.0, "cylinder", -3.0),
    ]
}

/// Six load-cell indentor shapes.
pub const INDENTOR_TAGS: [&str; 6] = ["flat", "sphere", "cylinder", "edge", "ring", "wedge"];

pub fn indentor(tag: &str) -> SimObject {
    SimObject {
        name: format!("indentor_{tag}"),
        mass_kg: 1.0,
        mu_static: 1.0,
        mu_kinetic: 0.8,
        fragility_n: f64::INFINITY,
        width_m: 0.05,
        geometry: tag.into(),
        grasp_offset_m: 0.0,
        fixed: true,
    }
}
