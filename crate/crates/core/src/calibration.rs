//! Weight-to-conductance calibration.
//!
//! Weights are dimensionless quanta; one scalar converts them to peak
//! conductance. The scalar is chosen by bisection so that an untrained neuron
//! driven by random patterns settles at a mean potential of
//! `target_fraction * (V_thresh - V_0)` above rest. Spiking is switched off
//! while measuring so the mean rises monotonically with the scalar.

use crate::codec::generate_pattern;
use crate::engine::{Mode, Network, RunOptions, Schedule};
use crate::error::{Error, Result};
use crate::model::{ModelConfig, DEFAULT_CALIBRATION_FRACTION};
use crate::rng::{stream_rng, Stream};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CalibrationSpec {
    pub target_fraction: f64,
    /// Random patterns averaged per evaluation.
    pub n_patterns: usize,
    /// Presentations before the measured one.
    pub warmup_cycles: usize,
    pub seed: u64,
    /// Stop once the mean potential is this close to target, mV.
    pub tolerance_mv: f64,
}

impl Default for CalibrationSpec {
    fn default() -> Self {
        CalibrationSpec {
            target_fraction: DEFAULT_CALIBRATION_FRACTION,
            n_patterns: 16,
            warmup_cycles: 3,
            seed: 0,
            tolerance_mv: 1e-3,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Calibration {
    pub weight_scale: f64,
    pub mean_potential: f64,
    pub target_potential: f64,
    pub iterations: usize,
}

/// Mean free membrane potential over the last presentation of untrained recall runs.
pub fn untrained_mean_potential(model: &ModelConfig, weight_scale: f64, spec: &CalibrationSpec) -> Result<f64> {
    let mut model = *model;
    model.sim.weight_scale = weight_scale;
    // spiking off: v can approach but never reach E_rev
    model.neuron.v_thresh = model.neuron.e_rev.next_down();
    let per_cycle = model.steps_per_cycle() as usize;
    let mut pattern_rng = stream_rng(spec.seed, Stream::Calibration, 0);
    let mut lifetimes = stream_rng(spec.seed, Stream::Calibration, 1);
    let mut total = 0.0;
    for _ in 0..spec.n_patterns {
        let pattern = generate_pattern(model.geometry, &mut pattern_rng)?;
        let mut net = Network::new(model)?;
        net.set_mode(Mode::Recall);
        let sched = Schedule::recall(&pattern, spec.warmup_cycles + 1);
        let opts = RunOptions { record_membrane: true };
        let trace = net.run_observed(&sched, &mut lifetimes, opts, |_| {})?;
        let last = &trace.membrane[trace.membrane.len() - per_cycle..];
        total += last.iter().map(|&(_, v)| v).sum::<f64>() / per_cycle as f64;
    }
    Ok(total / spec.n_patterns.max(1) as f64)
}

const MIN_SCALE: f64 = 1e-4;
const MAX_SCALE: f64 = 1e4;

pub fn calibrate(model: &ModelConfig, spec: &CalibrationSpec) -> Result<Calibration> {
    if !(spec.target_fraction > 0.0 && spec.target_fraction < 1.0) {
        return Err(Error::param("calibration_fraction", "must lie in (0, 1)"));
    }
    let n = &model.neuron;
    let target = n.v_rest + spec.target_fraction * (n.v_thresh - n.v_rest);
    let eval = |s: f64| untrained_mean_potential(model, s, spec);
    // The curve turns over once the untrained neuron starts firing, so the
    // bracket is found by walking up from below rather than from the ends.
    let (mut lo, mut hi) = (MIN_SCALE, MIN_SCALE);
    loop {
        if eval(hi)? >= target {
            break;
        }
        lo = hi;
        hi *= 2.0;
        if hi > MAX_SCALE {
            return Err(Error::Calibration(format!(
                "target {target} mV unreachable with scale up to {MAX_SCALE}"
            )));
        }
    }
    let mut best = (hi, f64::INFINITY);
    for iterations in 1..=200 {
        let mid = (lo * hi).sqrt();
        let v = eval(mid)?;
        if (v - target).abs() < best.1.abs() {
            best = (mid, v - target);
        }
        if (v - target).abs() <= spec.tolerance_mv {
            return Ok(Calibration {
                weight_scale: mid,
                mean_potential: v,
                target_potential: target,
                iterations,
            });
        }
        if v < target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Err(Error::Calibration(format!(
        "no convergence; closest scale {} misses target by {} mV",
        best.0, best.1
    )))
}
