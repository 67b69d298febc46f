//! Simulated gripper, object and tactile sensors.

pub mod episode;
pub mod object;
pub mod scenario;
pub mod sensor;
pub mod world;

pub use episode::{run_episode, EpisodeConfig, EpisodeResult, Increment, Outcome};
pub use object::{find_object, indentor, object_suite, SimObject, INDENTOR_TAGS};
pub use scenario::{calibration_model, force_trials, run_scenario, ScenarioConfig, ScenarioKind, SimRun};
pub use sensor::{SensorResponseModel, SensorState};
pub use world::{GripperModel, SlipOnset, TickOutput, TipState, World, SAMPLE_RATE_HZ};
