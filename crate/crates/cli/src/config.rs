//! Flat `key = value` run configuration keyed by the usual model parameter
//! names (`tau_m`, `V_thresh`, `T_pot`, ...). Blank lines and `#` comments are ignored.

use std::fmt::Write as _;
use std::path::PathBuf;

use sha2::{Digest, Sha256};

use cstdp::codec::NoiseSpec;
use cstdp::experiments::{Exp1Config, Exp2Config};
use cstdp::model::DEFAULT_CALIBRATION_FRACTION;
use cstdp::neuron::Integrator;
use cstdp::ModelConfig;

use crate::CliError;

/// How the weight-to-conductance scalar is chosen.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum WeightScale {
    Fixed(f64),
    /// Calibrated at start-up for the configured model.
    Auto,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub model: ModelConfig,
    pub weight_scale: WeightScale,
    pub calibration_fraction: f64,
    pub seed: u64,
    pub out_dir: PathBuf,
    pub exp1: Exp1Config,
    pub exp2: Exp2Config,
    /// Applied to training inputs of `train`; the experiments run clean.
    pub noise: NoiseSpec,
}

impl Default for RunConfig {
    fn default() -> Self {
        let model = ModelConfig::default();
        RunConfig {
            model,
            weight_scale: WeightScale::Fixed(model.sim.weight_scale),
            calibration_fraction: DEFAULT_CALIBRATION_FRACTION,
            seed: 0,
            out_dir: PathBuf::from("out"),
            exp1: Exp1Config::default(),
            exp2: Exp2Config::default(),
            noise: NoiseSpec::default(),
        }
    }
}

fn number(key: &str, value: &str, line: usize) -> Result<f64, CliError> {
    value
        .parse::<f64>()
        .ok()
        .filter(|v| v.is_finite())
        .ok_or_else(|| CliError::Config {
            line,
            reason: format!("`{key}` expects a number, got `{value}`"),
        })
}

fn count(key: &str, value: &str, line: usize) -> Result<usize, CliError> {
    value.parse::<usize>().map_err(|_| CliError::Config {
        line,
        reason: format!("`{key}` expects a non-negative integer, got `{value}`"),
    })
}

/// Spike-count thresholds; a leading minus sign (the depression threshold is
/// often written negative) is accepted and dropped.
fn threshold(key: &str, value: &str, line: usize) -> Result<u32, CliError> {
    let v = number(key, value, line)?.abs();
    if v.fract() != 0.0 || v < 1.0 || v > u32::MAX as f64 {
        return Err(CliError::Config {
            line,
            reason: format!("`{key}` expects a whole pair count of at least 1, got `{value}`"),
        });
    }
    Ok(v as u32)
}

fn list<T>(
    key: &str,
    value: &str,
    line: usize,
    item: impl Fn(&str, &str, usize) -> Result<T, CliError>,
) -> Result<Vec<T>, CliError> {
    value.split(',').map(|v| item(key, v.trim(), line)).collect()
}

pub fn parse_config(text: &str) -> Result<RunConfig, CliError> {
    let mut cfg = RunConfig::default();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let (key, value) = content.split_once('=').ok_or_else(|| CliError::Config {
            line,
            reason: format!("expected `key = value`, got `{content}`"),
        })?;
        let (key, value) = (key.trim(), value.trim());
        cfg.set(key, value, line)?;
    }
    cfg.validate()?;
    Ok(cfg)
}

impl RunConfig {
    fn set(&mut self, key: &str, value: &str, line: usize) -> Result<(), CliError> {
        let m = &mut self.model;
        let n = || number(key, value, line);
        match key {
            "timestep" => m.sim.dt = n()?,
            "M" => m.geometry.channels = count(key, value, line)?,
            "N" => m.geometry.active = count(key, value, line)?,
            "T_cyc" => m.geometry.cycle_ms = n()?,
            "T_bin" => m.geometry.bin_ms = n()?,
            "tau_m" => m.neuron.tau_m = n()?,
            "C_m" => m.neuron.c_m = n()?,
            "tau_ref" => m.neuron.tau_ref = n()?,
            "V_thresh" => m.neuron.v_thresh = n()?,
            "V_0" => m.neuron.v_rest = n()?,
            "V_reset" => m.neuron.v_reset = n()?,
            "E_rev" => m.neuron.e_rev = n()?,
            "tau_rise" => m.neuron.tau_rise = n()?,
            "tau_fall" => m.neuron.tau_fall = n()?,
            "T_D" => m.learning.t_d = n()?,
            "Dec_acc" => m.learning.dec_acc = n()?,
            "tau_pot" => m.learning.tau_pot = n()?,
            "tau_dep" => m.learning.tau_dep = n()?,
            "T_pot" => m.learning.t_pot = threshold(key, value, line)?,
            "T_dep" => m.learning.t_dep = threshold(key, value, line)?,
            "V_diff" => m.learning.v_diff = n()?,
            "W_max" => m.learning.w_max = n()?,
            "W_init" => m.learning.w_init = n()?,
            "W_min" => m.learning.w_min = n()?,
            "A_minus" => m.learning.a_minus = n()?,
            "A_plus" => m.learning.a_plus = n()?,
            "integrator" => {
                m.sim.integrator = match value {
                    "forward_euler" => Integrator::ForwardEuler,
                    "exponential_euler" => Integrator::ExponentialEuler,
                    _ => {
                        return Err(CliError::Config {
                            line,
                            reason: format!("`integrator` must be forward_euler or exponential_euler, got `{value}`"),
                        })
                    }
                }
            }
            "weight_scale" => {
                self.weight_scale = if value == "auto" {
                    WeightScale::Auto
                } else {
                    let v = n()?;
                    m.sim.weight_scale = v;
                    WeightScale::Fixed(v)
                }
            }
            "calibration_fraction" => self.calibration_fraction = n()?,
            "seed" => {
                self.seed = value.parse().map_err(|_| CliError::Config {
                    line,
                    reason: format!("`seed` expects an unsigned integer, got `{value}`"),
                })?
            }
            "out_dir" => self.out_dir = PathBuf::from(value),
            "trials" => self.exp1.n_trials = count(key, value, line)?,
            "repeats" => {
                let r = count(key, value, line)?;
                self.exp1.n_repeats = r;
                self.exp2.repeats = r;
            }
            "t_fire" => self.exp1.target_phase_ms = n()?,
            "recall_cycles" => self.exp1.recall_cycles = count(key, value, line)?,
            "measured_cycle" => self.exp1.measured_cycle = count(key, value, line)?,
            "set_sizes" => self.exp2.set_sizes = list(key, value, line, count)?,
            "recall_presentations" => self.exp2.recall_presentations = count(key, value, line)?,
            "tolerances" => self.exp2.tolerances = list(key, value, line, number)?,
            "poisson_rate" => self.noise.poisson_rate = n()?,
            "jitter_sigma" => self.noise.jitter_sigma = n()?,
            _ => {
                return Err(CliError::Config {
                    line,
                    reason: format!("unknown key `{key}`"),
                })
            }
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<(), CliError> {
        self.model.validate()?;
        self.exp1.validate(&self.model)?;
        self.exp2.validate()?;
        self.noise.validate()?;
        if !(self.calibration_fraction > 0.0 && self.calibration_fraction < 1.0) {
            return Err(cstdp::Error::InvalidParameter {
                name: "calibration_fraction",
                reason: "must lie in (0, 1)".into(),
            }
            .into());
        }
        Ok(())
    }

    /// Every setting as `key = value`, in a fixed order. Feeding this back to
    /// [`parse_config`] reproduces the configuration.
    pub fn canonical(&self) -> String {
        let m = &self.model;
        let (g, nr, l) = (&m.geometry, &m.neuron, &m.learning);
        let join = |v: Vec<String>| v.join(",");
        let mut s = String::new();
        let mut kv = |k: &str, v: String| {
            let _ = writeln!(s, "{k} = {v}");
        };
        kv("timestep", m.sim.dt.to_string());
        kv("M", g.channels.to_string());
        kv("N", g.active.to_string());
        kv("T_cyc", g.cycle_ms.to_string());
        kv("T_bin", g.bin_ms.to_string());
        kv("tau_m", nr.tau_m.to_string());
        kv("C_m", nr.c_m.to_string());
        kv("tau_ref", nr.tau_ref.to_string());
        kv("V_thresh", nr.v_thresh.to_string());
        kv("V_0", nr.v_rest.to_string());
        kv("V_reset", nr.v_reset.to_string());
        kv("E_rev", nr.e_rev.to_string());
        kv("tau_rise", nr.tau_rise.to_string());
        kv("tau_fall", nr.tau_fall.to_string());
        kv("T_D", l.t_d.to_string());
        kv("Dec_acc", l.dec_acc.to_string());
        kv("tau_pot", l.tau_pot.to_string());
        kv("tau_dep", l.tau_dep.to_string());
        kv("T_pot", l.t_pot.to_string());
        kv("T_dep", l.t_dep.to_string());
        kv("V_diff", l.v_diff.to_string());
        kv("W_max", l.w_max.to_string());
        kv("W_init", l.w_init.to_string());
        kv("W_min", l.w_min.to_string());
        kv("A_minus", l.a_minus.to_string());
        kv("A_plus", l.a_plus.to_string());
        kv(
            "integrator",
            match m.sim.integrator {
                Integrator::ForwardEuler => "forward_euler",
                Integrator::ExponentialEuler => "exponential_euler",
            }
            .into(),
        );
        kv(
            "weight_scale",
            match self.weight_scale {
                WeightScale::Fixed(v) => v.to_string(),
                WeightScale::Auto => "auto".into(),
            },
        );
        kv("calibration_fraction", self.calibration_fraction.to_string());
        kv("seed", self.seed.to_string());
        kv("out_dir", self.out_dir.display().to_string());
        kv("trials", self.exp1.n_trials.to_string());
        kv("repeats", self.exp1.n_repeats.to_string());
        kv("t_fire", self.exp1.target_phase_ms.to_string());
        kv("recall_cycles", self.exp1.recall_cycles.to_string());
        kv("measured_cycle", self.exp1.measured_cycle.to_string());
        kv(
            "set_sizes",
            join(self.exp2.set_sizes.iter().map(|v| v.to_string()).collect()),
        );
        kv("recall_presentations", self.exp2.recall_presentations.to_string());
        kv(
            "tolerances",
            join(self.exp2.tolerances.iter().map(|v| v.to_string()).collect()),
        );
        kv("poisson_rate", self.noise.poisson_rate.to_string());
        kv("jitter_sigma", self.noise.jitter_sigma.to_string());
        s
    }

    /// First 16 hex digits of the SHA-256 of [`RunConfig::canonical`],
    /// leaving out the output directory.
    pub fn hash(&self) -> String {
        let mut h = Sha256::new();
        for line in self.canonical().lines().filter(|l| !l.starts_with("out_dir ")) {
            h.update(line.as_bytes());
            h.update(b"\n");
        }
        let digest = h.finalize();
        digest[..8].iter().map(|b| format!("{b:02x}")).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_config_is_all_defaults() {
        let cfg = parse_config("").unwrap();
        assert_eq!(cfg, RunConfig::default());
        assert_eq!(cfg.model.learning.tau_pot, 9.6);
    }

    #[test]
    fn comments_and_whitespace() {
        let cfg = parse_config("# header\n\n  tau_pot = 8.0   # shorter\nseed=7\n").unwrap();
        assert_eq!(cfg.model.learning.tau_pot, 8.0);
        assert_eq!(cfg.seed, 7);
    }

    #[test]
    fn negative_depression_threshold_is_accepted() {
        let cfg = parse_config("T_dep = -5").unwrap();
        assert_eq!(cfg.model.learning.t_dep, 5);
        assert!(parse_config("T_pot = 2.5").is_err());
    }

    #[test]
    fn unknown_key_is_rejected_with_line() {
        let err = parse_config("seed = 1\nbogus = 3\n").unwrap_err();
        assert_eq!(err.to_string(), "config line 2: unknown key `bogus`");
    }

    #[test]
    fn range_errors_name_the_parameter() {
        assert!(parse_config("N = 80\nM = 3200").is_ok());
        let err = parse_config("N = 4000\nM = 3200").unwrap_err();
        assert!(err.to_string().contains("invalid geometry"), "{err}");
        let err = parse_config("tau_rise = 5").unwrap_err();
        assert!(err.to_string().contains("tau_rise"), "{err}");
    }

    #[test]
    fn canonical_round_trips() {
        let cfg = parse_config("N = 60\nset_sizes = 5, 10\nweight_scale = auto\njitter_sigma = 0.5").unwrap();
        let again = parse_config(&cfg.canonical()).unwrap();
        assert_eq!(cfg, again);
        assert_eq!(cfg.hash(), again.hash());
        assert_ne!(cfg.hash(), RunConfig::default().hash());
        assert_eq!(cfg.hash().len(), 16);
        let moved = RunConfig {
            out_dir: "elsewhere".into(),
            ..cfg.clone()
        };
        assert_eq!(moved.hash(), cfg.hash());
    }
}
