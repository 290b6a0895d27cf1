//! Command implementations behind the `cstdp` binary.
//!
//! Every file written here starts with a `# cstdp <command> config=<hash> seed=<seed>`
//! line and contains nothing run-dependent beyond the configuration and seed,
//! so identical invocations produce identical bytes.

pub mod config;

use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use cstdp::calibration::{calibrate, CalibrationSpec};
use cstdp::codec::{
    apply_noise, generate_pattern, info_content, write_raster, CyclicPattern, SpikeEvent, SpikeKind, TEACHER_CHANNEL,
};
use cstdp::engine::{Mode, Network, Schedule, WeightSnapshot};
use cstdp::exec::Execution;
use cstdp::experiments::{run_experiment1, run_experiment2};
use cstdp::rng::{stream_rng, Stream};
use cstdp::ModelConfig;

pub use config::{parse_config, RunConfig, WeightScale};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("config line {line}: {reason}")]
    Config { line: usize, reason: String },

    #[error(transparent)]
    Core(#[from] cstdp::Error),

    #[error("{path}: {source}")]
    Io { path: PathBuf, source: io::Error },
}

impl CliError {
    fn io(path: &Path, source: io::Error) -> Self {
        CliError::Io {
            path: path.to_path_buf(),
            source,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Command {
    Exp1,
    Exp2,
    /// Train one pattern against the teacher phase `t_fire`.
    Train,
    Recall {
        snapshot: PathBuf,
        pattern: PathBuf,
        cycles: Option<usize>,
    },
    Calibrate,
    Info,
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Exp1 => "exp1",
            Command::Exp2 => "exp2",
            Command::Train => "train",
            Command::Recall { .. } => "recall",
            Command::Calibrate => "calibrate",
            Command::Info => "info",
        }
    }
}

/// Reads `path` (defaults when absent) and applies command-line overrides.
pub fn load_config(path: Option<&Path>, seed: Option<u64>, out_dir: Option<PathBuf>) -> Result<RunConfig, CliError> {
    let text = match path {
        Some(p) => fs::read_to_string(p).map_err(|e| CliError::io(p, e))?,
        None => String::new(),
    };
    let mut cfg = parse_config(&text)?;
    if let Some(s) = seed {
        cfg.seed = s;
    }
    if let Some(d) = out_dir {
        cfg.out_dir = d;
    }
    Ok(cfg)
}

struct Output<'a> {
    cfg: &'a RunConfig,
    command: &'static str,
}

impl Output<'_> {
    fn header(&self) -> String {
        format!(
            "# cstdp {} config={} seed={}\n",
            self.command,
            self.cfg.hash(),
            self.cfg.seed
        )
    }

    fn write(&self, name: &str, body: impl FnOnce(&mut Vec<u8>) -> io::Result<()>) -> Result<PathBuf, CliError> {
        let dir = &self.cfg.out_dir;
        fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
        let path = dir.join(name);
        let mut buf = self.header().into_bytes();
        body(&mut buf).map_err(|e| CliError::io(&path, e))?;
        fs::write(&path, buf).map_err(|e| CliError::io(&path, e))?;
        Ok(path)
    }
}

/// The model with its weight scale resolved, calibrating if asked to.
pub fn resolve_model(cfg: &RunConfig) -> Result<ModelConfig, CliError> {
    let mut model = cfg.model;
    if cfg.weight_scale == WeightScale::Auto {
        let spec = CalibrationSpec {
            target_fraction: cfg.calibration_fraction,
            seed: cfg.seed,
            ..CalibrationSpec::default()
        };
        model.sim.weight_scale = calibrate(&model, &spec)?.weight_scale;
    }
    Ok(model)
}

/// Runs `cmd`, writing files under the configured output directory and a
/// human-readable summary to `out`.
pub fn dispatch<W: Write>(cmd: &Command, cfg: &RunConfig, exec: Execution, out: &mut W) -> Result<(), CliError> {
    let files = Output {
        cfg,
        command: cmd.name(),
    };
    let say = |out: &mut W, s: String| writeln!(out, "{s}").map_err(|e| CliError::io(Path::new("<stdout>"), e));
    match cmd {
        Command::Info => {
            let g = &cfg.model.geometry;
            let bits = info_content(g.channels, g.active, g.cycle_ms, g.bin_ms)?;
            say(
                out,
                format!(
                    "{}-of-{} cyclic code, T = {} ms, T_bin = {} ms: {:.6} bits",
                    g.active, g.channels, g.cycle_ms, g.bin_ms, bits
                ),
            )?;
        }
        Command::Calibrate => {
            let spec = CalibrationSpec {
                target_fraction: cfg.calibration_fraction,
                seed: cfg.seed,
                ..CalibrationSpec::default()
            };
            let c = calibrate(&cfg.model, &spec)?;
            say(out, format!("weight_scale = {}", c.weight_scale))?;
            say(
                out,
                format!(
                    "mean potential {:.4} mV (target {:.4} mV) after {} bisection steps",
                    c.mean_potential, c.target_potential, c.iterations
                ),
            )?;
        }
        Command::Exp1 => {
            let model = resolve_model(cfg)?;
            let result = run_experiment1(&model, &cfg.exp1, cfg.seed, exec)?;
            let a = files.write("exp1_convergence.csv", |w| result.write_convergence_csv(w))?;
            let b = files.write("exp1_recruitment.csv", |w| result.write_recruitment_csv(w))?;
            let s = result.summary();
            say(out, format!("spikeless prefix: {} iterations", s.spikeless_prefix))?;
            if let Some(e) = s.first_spike_error {
                say(out, format!("first-spike error: {e:+.3} ms"))?;
            }
            if let Some(e) = s.late_abs_error {
                say(out, format!("mean |error| over the last 6 iterations: {e:.3} ms"))?;
            }
            say(out, format!("wrote {} and {}", a.display(), b.display()))?;
        }
        Command::Exp2 => {
            let model = resolve_model(cfg)?;
            let result = run_experiment2(&model, &cfg.exp2, cfg.seed, exec)?;
            let path = files.write("exp2_capacity.csv", |w| result.write_capacity_csv(w))?;
            for row in &result.table {
                say(
                    out,
                    format!(
                        "set {:>3}  ±{} ms  {}/{}",
                        row.set_size, row.tolerance, row.hits, row.total
                    ),
                )?;
            }
            say(out, format!("wrote {}", path.display()))?;
        }
        Command::Train => {
            let model = resolve_model(cfg)?;
            let pattern = generate_pattern(model.geometry, &mut stream_rng(cfg.seed, Stream::Pattern, 0))?;
            let phase = cfg.exp1.target_phase_ms;
            let mut sched = Schedule::training(&pattern, cfg.exp1.n_repeats, phase);
            sched.inputs = apply_noise(
                &sched.inputs,
                &cfg.noise,
                sched.t_end,
                model.geometry.channels,
                &mut stream_rng(cfg.seed, Stream::Noise, 0),
            );
            let mut net = Network::new(model)?;
            net.set_mode(Mode::Training);
            let trace = net.run(&sched, &mut stream_rng(cfg.seed, Stream::Lifetimes, 0))?;

            let mut raster = sched.inputs.clone();
            raster.extend(sched.teacher.iter().map(|t| SpikeEvent {
                channel: TEACHER_CHANNEL,
                time_ms: t.cycle as f64 * model.geometry.cycle_ms + t.phase_ms,
                kind: SpikeKind::Teacher,
            }));
            raster.sort_by(|a, b| a.time_ms.total_cmp(&b.time_ms).then(a.channel.cmp(&b.channel)));

            let snapshot = net.snapshot_weights();
            files.write("pattern.txt", |w| w.write_all(pattern.to_text().as_bytes()))?;
            files.write("snapshot.csv", |w| w.write_all(snapshot.to_csv().as_bytes()))?;
            files.write("raster.csv", |w| write_raster(&raster, w))?;
            files.write("train_trace.csv", |w| trace.write_csv(w))?;
            let counts = snapshot.class_counts();
            say(
                out,
                format!(
                    "trained {} cycles at phase {} ms: {} commits, {} synapses recruited",
                    cfg.exp1.n_repeats,
                    phase,
                    trace.commits.len(),
                    counts[1..].iter().sum::<usize>()
                ),
            )?;
            say(
                out,
                format!(
                    "wrote pattern.txt, snapshot.csv, raster.csv, train_trace.csv to {}",
                    cfg.out_dir.display()
                ),
            )?;
        }
        Command::Recall {
            snapshot,
            pattern,
            cycles,
        } => {
            let model = resolve_model(cfg)?;
            let text = fs::read_to_string(pattern).map_err(|e| CliError::io(pattern, e))?;
            let pattern = CyclicPattern::from_text(&text)?;
            let g = pattern.geometry();
            if g.channels != model.geometry.channels {
                return Err(cstdp::Error::GeometryMismatch {
                    expected: model.geometry.channels,
                    found: g.channels,
                }
                .into());
            }
            let file = fs::File::open(snapshot).map_err(|e| CliError::io(snapshot, e))?;
            let snap = WeightSnapshot::from_csv(io::BufReader::new(file))?;
            let mut net = Network::new(model)?;
            net.restore_weights(&snap)?;
            net.set_mode(Mode::Recall);
            let cycles = cycles.unwrap_or(cfg.exp1.recall_cycles);
            let trace = net.run(
                &Schedule::recall(&pattern, cycles),
                &mut stream_rng(cfg.seed, Stream::Experiment, 0),
            )?;
            files.write("recall_trace.csv", |w| trace.write_csv(w))?;
            say(out, "time_ms".into())?;
            for s in &trace.output_spikes {
                say(out, format!("{}", s.time_ms))?;
            }
        }
    }
    Ok(())
}
