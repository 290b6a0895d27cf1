//! Conductance-based leaky-integrate-and-fire neuron.
//!
//! Synaptic drive uses a difference-of-exponentials conductance kernel, held in
//! two linear state variables that share the rise and fall constants of every
//! synapse, so the summed kernel of all inputs costs O(1) per step.

use crate::error::{Error, Result};

/// Slack for comparing step-aligned times that went through float arithmetic.
pub(crate) const TIME_EPS: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NeuronParams {
    /// Membrane time constant, ms.
    pub tau_m: f64,
    /// Membrane capacitance, nF.
    pub c_m: f64,
    /// Absolute refractory period, ms.
    pub tau_ref: f64,
    pub v_thresh: f64,
    /// Resting potential.
    pub v_rest: f64,
    pub v_reset: f64,
    /// Excitatory reversal potential.
    pub e_rev: f64,
    pub tau_rise: f64,
    pub tau_fall: f64,
}

impl Default for NeuronParams {
    fn default() -> Self {
        NeuronParams {
            tau_m: 15.0,
            c_m: 30.0,
            tau_ref: 5.0,
            v_thresh: 60.0,
            v_rest: 0.0,
            v_reset: 0.0,
            e_rev: 240.0,
            tau_rise: 0.2,
            tau_fall: 3.0,
        }
    }
}

impl NeuronParams {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("tau_m", self.tau_m),
            ("C_m", self.c_m),
            ("tau_ref", self.tau_ref),
            ("tau_rise", self.tau_rise),
            ("tau_fall", self.tau_fall),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::param(name, format!("must be positive, got {v}")));
            }
        }
        if self.tau_rise >= self.tau_fall {
            return Err(Error::param("tau_rise", "must be below tau_fall"));
        }
        if !(self.v_reset <= self.v_rest && self.v_rest < self.v_thresh && self.v_thresh < self.e_rev) {
            return Err(Error::param("V_thresh", "requires V_reset <= V_0 < V_thresh < E_rev"));
        }
        Ok(())
    }

    /// Time of the kernel peak after an arrival, ms.
    pub fn kernel_peak_time(&self) -> f64 {
        let (r, f) = (self.tau_rise, self.tau_fall);
        r * f / (f - r) * (f / r).ln()
    }

    /// Scale that makes `exp(-t/tau_fall) - exp(-t/tau_rise)` peak at exactly 1.
    pub fn kernel_norm(&self) -> f64 {
        let t = self.kernel_peak_time();
        1.0 / ((-t / self.tau_fall).exp() - (-t / self.tau_rise).exp())
    }
}

/// Membrane update rule. Kernel states always decay exactly.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Integrator {
    /// First-order explicit update of the membrane equation.
    #[default]
    ForwardEuler,
    /// Exact solution with the conductance held constant over the step.
    ExponentialEuler,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NeuronState {
    pub v: f64,
    pub refractory_until: f64,
    pub g_rise: f64,
    pub g_fall: f64,
    pub last_probe_v: f64,
    pub fired_feedforward_this_cycle: bool,
}

impl NeuronState {
    pub fn at_rest(params: &NeuronParams) -> Self {
        NeuronState {
            v: params.v_rest,
            refractory_until: 0.0,
            g_rise: 0.0,
            g_fall: 0.0,
            last_probe_v: params.v_rest,
            fired_feedforward_this_cycle: false,
        }
    }

    /// Effective synaptic conductance.
    pub fn conductance(&self) -> f64 {
        (self.g_fall - self.g_rise).max(0.0)
    }

    pub fn is_refractory(&self, now: f64) -> bool {
        now + TIME_EPS < self.refractory_until
    }

    /// Adds an arrival whose kernel will peak at `conductance`.
    pub fn receive(&mut self, conductance: f64, params: &NeuronParams) {
        let q = conductance * params.kernel_norm();
        self.g_rise += q;
        self.g_fall += q;
    }

    /// Advances the neuron over `[now, now + dt)`. Returns true when it spikes;
    /// the spike is stamped at `now + dt`.
    pub fn step(&mut self, params: &NeuronParams, input: f64, now: f64, dt: f64, integrator: Integrator) -> bool {
        if input != 0.0 {
            self.receive(input, params);
        }
        let g = self.conductance();
        if self.is_refractory(now) {
            self.v = params.v_reset;
        } else {
            self.v = match integrator {
                Integrator::ForwardEuler => {
                    let dv = -(self.v - params.v_rest) / params.tau_m + g * (params.e_rev - self.v) / params.c_m;
                    self.v + dt * dv
                }
                Integrator::ExponentialEuler => {
                    let rate = 1.0 / params.tau_m + g / params.c_m;
                    let v_inf = (params.v_rest / params.tau_m + g * params.e_rev / params.c_m) / rate;
                    v_inf + (self.v - v_inf) * (-rate * dt).exp()
                }
            };
        }
        self.g_rise *= (-dt / params.tau_rise).exp();
        self.g_fall *= (-dt / params.tau_fall).exp();

        let t_end = now + dt;
        if self.v >= params.v_thresh && !self.is_refractory(t_end) {
            self.spike(params, t_end);
            self.fired_feedforward_this_cycle = true;
            return true;
        }
        false
    }

    /// Teacher-driven spike. Absorbed (returns false, state untouched) while refractory.
    pub fn force_fire(&mut self, params: &NeuronParams, now: f64) -> bool {
        if self.is_refractory(now) {
            return false;
        }
        self.spike(params, now);
        true
    }

    /// Samples the membrane potential at the probe phase.
    pub fn probe(&mut self) -> f64 {
        self.last_probe_v = self.v;
        self.v
    }

    fn spike(&mut self, params: &NeuronParams, at: f64) {
        self.v = params.v_reset;
        self.refractory_until = at + params.tau_ref;
    }
}
