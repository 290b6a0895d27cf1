use crate::codec::PatternGeometry;
use crate::error::{Error, Result};
use crate::neuron::{Integrator, NeuronParams};
use crate::plasticity::LearningParams;

/// Weight-to-conductance scalar produced by [`crate::calibration::calibrate`]
/// for the default model at the default target fraction.
pub const DEFAULT_WEIGHT_SCALE: f64 = 1.00526489060549;

/// Default fraction of `V_thresh` the untrained mean potential is calibrated to.
pub const DEFAULT_CALIBRATION_FRACTION: f64 = 0.86;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimParams {
    /// Simulation timestep, ms.
    pub dt: f64,
    /// Converts weight units into peak conductance.
    pub weight_scale: f64,
    pub integrator: Integrator,
}

impl Default for SimParams {
    fn default() -> Self {
        SimParams {
            dt: 0.1,
            weight_scale: DEFAULT_WEIGHT_SCALE,
            integrator: Integrator::default(),
        }
    }
}

/// Everything needed to build a network: code geometry, neuron, learning rule
/// and simulation settings.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ModelConfig {
    pub geometry: PatternGeometry,
    pub neuron: NeuronParams,
    pub learning: LearningParams,
    pub sim: SimParams,
}

impl ModelConfig {
    pub fn validate(&self) -> Result<()> {
        self.geometry.validate()?;
        self.neuron.validate()?;
        self.learning.validate()?;
        let s = &self.sim;
        if !(s.dt > 0.0 && s.dt.is_finite()) {
            return Err(Error::param("timestep", "must be positive"));
        }
        if !(s.weight_scale > 0.0 && s.weight_scale.is_finite()) {
            return Err(Error::param("weight_scale", "must be positive"));
        }
        let steps = self.geometry.cycle_ms / s.dt;
        if (steps - steps.round()).abs() > 1e-6 {
            return Err(Error::param("timestep", "must divide the cycle time"));
        }
        Ok(())
    }

    pub fn steps_per_cycle(&self) -> u64 {
        (self.geometry.cycle_ms / self.sim.dt).round() as u64
    }
}
