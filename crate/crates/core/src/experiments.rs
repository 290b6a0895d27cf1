//! Harnesses for the single-neuron experiments.
//!
//! - Convergence and recruitment: one pattern is trained for a number of
//!   repeats; after every repeat the synapse table is copied into a fresh
//!   neuron and recalled without a teacher.
//! - Capacity: sets of patterns with random target phases are trained one
//!   after another and then recalled, scoring hits at several tolerances.
//! - Interference, noise floor and full-memory extrapolation helpers.
//!
//! Trials are independent jobs, fanned out through [`map_jobs`].

use std::io::{self, Write};

use rand::Rng;
use rand_distr::{Distribution, Exp};

use crate::codec::{generate_pattern, CyclicPattern};
use crate::engine::{Mode, Network, RunOptions, RunTrace, Schedule, WeightSnapshot};
use crate::error::{Error, Result};
use crate::exec::{map_jobs, Execution};
use crate::model::ModelConfig;
use crate::plasticity::{LearningParams, LockClass, SynapseState};
use crate::rng::{stream_rng, SimRng, Stream};

/// Distance between two phases on a circle of circumference `cycle_ms`.
pub fn circular_distance(a: f64, b: f64, cycle_ms: f64) -> f64 {
    signed_phase_error(a, b, cycle_ms).abs()
}

/// `recalled - taught` wrapped into `(-cycle/2, cycle/2]`.
pub fn signed_phase_error(recalled: f64, taught: f64, cycle_ms: f64) -> f64 {
    let mut d = (recalled - taught).rem_euclid(cycle_ms);
    if d > cycle_ms / 2.0 {
        d -= cycle_ms;
    }
    d
}

#[derive(Debug, Clone, PartialEq)]
pub struct RecallMetrics {
    /// Phase of the matched spike in each presentation window.
    pub recalled: Vec<Option<f64>>,
    /// Signed circular error of the matched spike.
    pub errors: Vec<Option<f64>>,
    pub tolerances: Vec<f64>,
    /// Hits per tolerance, aligned with `tolerances`.
    pub hits: Vec<usize>,
}

impl RecallMetrics {
    /// Whether presentation `i` is a hit at `tolerance`.
    pub fn is_hit(&self, i: usize, tolerance: f64) -> bool {
        self.errors[i].is_some_and(|e| e.abs() <= tolerance + 1e-9)
    }
}

/// Scores a recall trace. Presentation `i` spans `[i T, (i + 1) T)`; the spike
/// closest (circularly) to `taught[i]` inside it is its recalled spike.
pub fn compute_metrics(trace: &RunTrace, taught: &[f64], tolerances: &[f64], cycle_ms: f64) -> RecallMetrics {
    let mut recalled = Vec::with_capacity(taught.len());
    let mut errors = Vec::with_capacity(taught.len());
    for (i, &target) in taught.iter().enumerate() {
        let start = i as f64 * cycle_ms;
        let best = trace
            .spikes_between(start, start + cycle_ms)
            .map(|t| (t - start).clamp(0.0, cycle_ms))
            .map(|phase| (phase, signed_phase_error(phase, target, cycle_ms)))
            .min_by(|a, b| a.1.abs().total_cmp(&b.1.abs()));
        recalled.push(best.map(|b| b.0));
        errors.push(best.map(|b| b.1));
    }
    let hits = tolerances
        .iter()
        .map(|&tol| {
            errors
                .iter()
                .filter(|e| e.is_some_and(|e| e.abs() <= tol + 1e-9))
                .count()
        })
        .collect();
    RecallMetrics {
        recalled,
        errors,
        tolerances: tolerances.to_vec(),
        hits,
    }
}

/// Synapse counts per class: unrecruited first, then the five locked classes.
pub fn recruitment_histogram(synapses: &[SynapseState]) -> [usize; 6] {
    let mut counts = [0; 6];
    for s in synapses {
        counts[s.lock_class.index()] += 1;
    }
    counts
}

/// Recalls `pattern` from a copy of `snapshot` on a fresh neuron.
pub fn recall_snapshot(
    model: &ModelConfig,
    snapshot: &WeightSnapshot,
    pattern: &CyclicPattern,
    cycles: usize,
) -> Result<RunTrace> {
    let mut net = Network::new(*model)?;
    net.restore_weights(snapshot)?;
    net.set_mode(Mode::Recall);
    // recall never draws from the rng
    let mut rng = stream_rng(0, Stream::Experiment, 0);
    net.run(&Schedule::recall(pattern, cycles), &mut rng)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Exp1Config {
    pub n_trials: usize,
    pub n_repeats: usize,
    pub target_phase_ms: f64,
    pub recall_cycles: usize,
    /// 1-based recall cycle whose spike is measured.
    pub measured_cycle: usize,
}

impl Default for Exp1Config {
    fn default() -> Self {
        Exp1Config {
            n_trials: 100,
            n_repeats: 30,
            target_phase_ms: 18.0,
            recall_cycles: 4,
            measured_cycle: 3,
        }
    }
}

impl Exp1Config {
    pub fn validate(&self, model: &ModelConfig) -> Result<()> {
        if self.measured_cycle == 0 || self.measured_cycle > self.recall_cycles {
            return Err(Error::param("measured_cycle", "must lie in 1..=recall_cycles"));
        }
        if !(self.target_phase_ms >= 0.0 && self.target_phase_ms < model.geometry.cycle_ms) {
            return Err(Error::param("t_fire", "must lie within the cycle"));
        }
        Ok(())
    }
}

/// Per-iteration record of one convergence trial. Index 0 is iteration 1.
#[derive(Debug, Clone, PartialEq)]
pub struct Exp1Trial {
    pub recalled_phase: Vec<Option<f64>>,
    pub error: Vec<Option<f64>>,
    /// Synapse class counts after each iteration.
    pub class_counts: Vec<[usize; 6]>,
    /// Classes of the commits applied during each iteration.
    pub commits: Vec<[usize; 6]>,
}

impl Exp1Trial {
    /// 0-based index of the first iteration whose recall produced a spike.
    pub fn first_spike(&self) -> Option<usize> {
        self.recalled_phase.iter().position(Option::is_some)
    }

    /// 0-based index of the first iteration recalled within `band_ms`.
    pub fn converged_at(&self, band_ms: f64) -> Option<usize> {
        self.error.iter().position(|e| e.is_some_and(|e| e.abs() <= band_ms))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConvergencePoint {
    /// 1-based.
    pub iteration: usize,
    pub mean_phase: Option<f64>,
    pub mean_abs_error: Option<f64>,
    pub miss_fraction: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Exp1Result {
    pub trials: Vec<Exp1Trial>,
    pub convergence: Vec<ConvergencePoint>,
    /// Trial-averaged class counts after each iteration.
    pub recruitment: Vec<[f64; 6]>,
}

fn mean(values: impl Iterator<Item = f64>) -> Option<f64> {
    let (sum, n) = values.fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
    (n > 0).then(|| sum / n as f64)
}

pub fn run_exp1_trial(model: &ModelConfig, cfg: &Exp1Config, seed: u64, trial: u64) -> Result<Exp1Trial> {
    let pattern = generate_pattern(model.geometry, &mut stream_rng(seed, Stream::Pattern, trial))?;
    let mut rng = stream_rng(seed, Stream::Lifetimes, trial);
    let mut net = Network::new(*model)?;
    let sched = Schedule::training(&pattern, cfg.n_repeats, cfg.target_phase_ms);
    let cycle_ms = model.geometry.cycle_ms;
    let window = (cfg.measured_cycle - 1) as f64 * cycle_ms;

    let mut out = Exp1Trial {
        recalled_phase: Vec::with_capacity(cfg.n_repeats),
        error: Vec::with_capacity(cfg.n_repeats),
        class_counts: Vec::with_capacity(cfg.n_repeats),
        commits: Vec::with_capacity(cfg.n_repeats),
    };
    let mut failure = None;
    let mut seen_commits = 0;
    net.run_observed(&sched, &mut rng, RunOptions::default(), |end| {
        if failure.is_some() {
            return;
        }
        let snapshot = end.network.snapshot_weights();
        let mut committed = [0; 6];
        for c in &end.trace.commits[seen_commits..] {
            committed[c.class.index()] += 1;
        }
        seen_commits = end.trace.commits.len();
        match recall_snapshot(model, &snapshot, &pattern, cfg.recall_cycles) {
            Ok(trace) => {
                let shifted = RunTrace {
                    output_spikes: trace
                        .output_spikes
                        .iter()
                        .filter(|s| s.time_ms >= window - 1e-9)
                        .map(|s| crate::engine::OutputSpike {
                            time_ms: s.time_ms - window,
                            cause: s.cause,
                        })
                        .collect(),
                    ..RunTrace::default()
                };
                let m = compute_metrics(&shifted, &[cfg.target_phase_ms], &[], cycle_ms);
                out.recalled_phase.push(m.recalled[0]);
                out.error.push(m.errors[0]);
            }
            Err(e) => failure = Some(e),
        }
        out.class_counts.push(snapshot.class_counts());
        out.commits.push(committed);
    })?;
    match failure {
        Some(e) => Err(e),
        None => Ok(out),
    }
}

pub fn run_experiment1(model: &ModelConfig, cfg: &Exp1Config, seed: u64, exec: Execution) -> Result<Exp1Result> {
    cfg.validate(model)?;
    let trials = map_jobs(exec, cfg.n_trials, |i| run_exp1_trial(model, cfg, seed, i as u64))
        .into_iter()
        .collect::<Result<Vec<_>>>()?;
    let n = trials.len().max(1) as f64;
    let convergence = (0..cfg.n_repeats)
        .map(|it| ConvergencePoint {
            iteration: it + 1,
            mean_phase: mean(trials.iter().filter_map(|t| t.recalled_phase[it])),
            mean_abs_error: mean(trials.iter().filter_map(|t| t.error[it].map(f64::abs))),
            miss_fraction: trials.iter().filter(|t| t.recalled_phase[it].is_none()).count() as f64 / n,
        })
        .collect();
    let recruitment = (0..cfg.n_repeats)
        .map(|it| {
            let mut avg = [0.0; 6];
            for t in &trials {
                for (a, c) in avg.iter_mut().zip(t.class_counts[it]) {
                    *a += c as f64 / n;
                }
            }
            avg
        })
        .collect();
    Ok(Exp1Result {
        trials,
        convergence,
        recruitment,
    })
}

/// Convergence figures of merit derived from an [`Exp1Result`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Exp1Summary {
    /// Leading iterations in which most trials recalled nothing.
    pub spikeless_prefix: usize,
    /// Mean signed error of each trial's first recalled spike.
    pub first_spike_error: Option<f64>,
    /// Mean absolute error of each trial's first recalled spike.
    pub first_spike_abs_error: Option<f64>,
    /// Mean absolute error over the final six iterations.
    pub late_abs_error: Option<f64>,
    /// Mean absolute error at the final iteration.
    pub final_abs_error: Option<f64>,
    pub final_miss_fraction: f64,
}

impl Exp1Result {
    pub fn summary(&self) -> Exp1Summary {
        let spikeless_prefix = self.convergence.iter().take_while(|p| p.miss_fraction > 0.5).count();
        let firsts: Vec<f64> = self
            .trials
            .iter()
            .filter_map(|t| t.first_spike().and_then(|i| t.error[i]))
            .collect();
        let n = self.convergence.len();
        let late_from = n.saturating_sub(6);
        let late = mean(
            self.trials
                .iter()
                .flat_map(|t| t.error[late_from..].iter().flatten().map(|e| e.abs())),
        );
        let last = self.convergence.last();
        Exp1Summary {
            spikeless_prefix,
            first_spike_error: mean(firsts.iter().copied()),
            first_spike_abs_error: mean(firsts.iter().map(|e| e.abs())),
            late_abs_error: late,
            final_abs_error: last.and_then(|p| p.mean_abs_error),
            final_miss_fraction: last.map_or(1.0, |p| p.miss_fraction),
        }
    }

    /// `iteration,mean_recalled_phase_ms,mean_abs_error_ms,miss_fraction`
    pub fn write_convergence_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        writeln!(w, "iteration,mean_recalled_phase_ms,mean_abs_error_ms,miss_fraction")?;
        let opt = |v: Option<f64>| v.map_or(String::new(), |v| format!("{v:.6}"));
        for p in &self.convergence {
            writeln!(
                w,
                "{},{},{},{:.6}",
                p.iteration,
                opt(p.mean_phase),
                opt(p.mean_abs_error),
                p.miss_fraction
            )?;
        }
        Ok(())
    }

    /// `iteration,<class>...` with trial-averaged counts.
    pub fn write_recruitment_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        let names: Vec<&str> = LockClass::ALL.iter().map(|c| c.as_str()).collect();
        writeln!(w, "iteration,{}", names.join(","))?;
        for (i, counts) in self.recruitment.iter().enumerate() {
            let cells: Vec<String> = counts.iter().map(|c| format!("{c:.2}")).collect();
            writeln!(w, "{},{}", i + 1, cells.join(","))?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Exp2Config {
    pub set_sizes: Vec<usize>,
    pub repeats: usize,
    pub recall_presentations: usize,
    pub tolerances: Vec<f64>,
}

impl Default for Exp2Config {
    fn default() -> Self {
        Exp2Config {
            set_sizes: vec![5, 10, 15, 20, 25, 30],
            repeats: 30,
            recall_presentations: 5,
            tolerances: vec![0.5, 1.0, 2.0, 3.0, 5.0, 7.0],
        }
    }
}

impl Exp2Config {
    pub fn validate(&self) -> Result<()> {
        if self.tolerances.iter().any(|&t| !(t > 0.0)) {
            return Err(Error::param("tolerances", "must be positive"));
        }
        if self.tolerances.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::param("tolerances", "must be strictly ascending"));
        }
        if self.recall_presentations == 0 {
            return Err(Error::param("recall_presentations", "must be at least 1"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Exp2Set {
    pub set_size: usize,
    pub taught: Vec<f64>,
    pub metrics: Vec<RecallMetrics>,
}

impl Exp2Set {
    pub fn hits(&self, tolerance: f64) -> usize {
        self.metrics
            .iter()
            .map(|m| (0..m.errors.len()).filter(|&i| m.is_hit(i, tolerance)).count())
            .sum()
    }

    /// Hits at `tolerance` broken down by presentation index.
    pub fn hits_by_presentation(&self, tolerance: f64) -> Vec<usize> {
        let n = self.metrics.first().map_or(0, |m| m.errors.len());
        (0..n)
            .map(|i| self.metrics.iter().filter(|m| m.is_hit(i, tolerance)).count())
            .collect()
    }

    pub fn total(&self) -> usize {
        self.metrics.iter().map(|m| m.errors.len()).sum()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CapacityRow {
    pub set_size: usize,
    pub tolerance: f64,
    pub hits: usize,
    pub total: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Exp2Result {
    pub sets: Vec<Exp2Set>,
    pub table: Vec<CapacityRow>,
}

impl Exp2Result {
    pub fn write_capacity_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        writeln!(w, "set_size,tolerance_ms,hits,total")?;
        for r in &self.table {
            writeln!(w, "{},{},{},{}", r.set_size, r.tolerance, r.hits, r.total)?;
        }
        Ok(())
    }
}

/// Random target phase aligned to the simulation grid.
pub fn random_phase<R: Rng + ?Sized>(model: &ModelConfig, rng: &mut R) -> f64 {
    rng.random_range(0..model.steps_per_cycle()) as f64 * model.sim.dt
}

/// Trains `patterns` one after another on `net`, each with its own teacher phase.
pub fn train_sequence(
    net: &mut Network,
    patterns: &[CyclicPattern],
    phases: &[f64],
    repeats: usize,
    rng: &mut SimRng,
) -> Result<()> {
    net.set_mode(Mode::Training);
    for (p, &phase) in patterns.iter().zip(phases) {
        net.run(&Schedule::training(p, repeats, phase), rng)?;
    }
    Ok(())
}

/// Teacher-free recall of `pattern` on `net`'s current synapses. The neuron
/// carries on from whatever state it is in.
pub fn recall_on(net: &mut Network, pattern: &CyclicPattern, cycles: usize) -> Result<RunTrace> {
    let mode = net.mode();
    net.set_mode(Mode::Recall);
    let mut rng = stream_rng(0, Stream::Experiment, 0);
    let trace = net.run(&Schedule::recall(pattern, cycles), &mut rng);
    net.set_mode(mode);
    trace
}

pub fn run_exp2_set(model: &ModelConfig, cfg: &Exp2Config, set_size: usize, seed: u64) -> Result<Exp2Set> {
    let mut pattern_rng = stream_rng(seed, Stream::Pattern, 1_000_000 + set_size as u64);
    let mut phase_rng = stream_rng(seed, Stream::Experiment, set_size as u64);
    let mut rng = stream_rng(seed, Stream::Lifetimes, 1_000_000 + set_size as u64);
    let patterns = (0..set_size)
        .map(|_| generate_pattern(model.geometry, &mut pattern_rng))
        .collect::<Result<Vec<_>>>()?;
    let taught: Vec<f64> = (0..set_size).map(|_| random_phase(model, &mut phase_rng)).collect();

    let mut net = Network::new(*model)?;
    train_sequence(&mut net, &patterns, &taught, cfg.repeats, &mut rng)?;
    // one continuous test session: the neuron starts from rest once and each
    // pattern picks up where the previous one left the membrane
    net.reset_neuron();
    let mut metrics = Vec::with_capacity(set_size);
    for (p, &phase) in patterns.iter().zip(&taught) {
        let trace = recall_on(&mut net, p, cfg.recall_presentations)?;
        let targets = vec![phase; cfg.recall_presentations];
        metrics.push(compute_metrics(
            &trace,
            &targets,
            &cfg.tolerances,
            model.geometry.cycle_ms,
        ));
    }
    Ok(Exp2Set {
        set_size,
        taught,
        metrics,
    })
}

pub fn run_experiment2(model: &ModelConfig, cfg: &Exp2Config, seed: u64, exec: Execution) -> Result<Exp2Result> {
    cfg.validate()?;
    let sets = map_jobs(exec, cfg.set_sizes.len(), |i| {
        run_exp2_set(model, cfg, cfg.set_sizes[i], seed)
    })
    .into_iter()
    .collect::<Result<Vec<_>>>()?;
    let table = sets
        .iter()
        .flat_map(|s| {
            cfg.tolerances.iter().map(move |&tolerance| CapacityRow {
                set_size: s.set_size,
                tolerance,
                hits: s.hits(tolerance),
                total: s.total(),
            })
        })
        .collect();
    Ok(Exp2Result { sets, table })
}

#[derive(Debug, Clone, PartialEq)]
pub struct InterferenceConfig {
    pub extra_patterns: usize,
    pub repeats: usize,
    pub recall_cycles: usize,
    pub measured_cycle: usize,
    pub band_ms: f64,
}

impl Default for InterferenceConfig {
    fn default() -> Self {
        InterferenceConfig {
            extra_patterns: 9,
            repeats: 30,
            recall_cycles: 4,
            measured_cycle: 3,
            band_ms: 2.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InterferenceOutcome {
    pub taught: f64,
    pub before: Option<f64>,
    pub after: Option<f64>,
}

impl InterferenceOutcome {
    /// Recall of the first pattern moved by at most `band_ms`, or was absent both times.
    pub fn is_stable(&self, band_ms: f64, cycle_ms: f64) -> bool {
        match (self.before, self.after) {
            (Some(a), Some(b)) => circular_distance(a, b, cycle_ms) <= band_ms + 1e-9,
            (None, None) => true,
            _ => false,
        }
    }
}

fn measured_phase(trace: &RunTrace, taught: f64, measured_cycle: usize, cycle_ms: f64) -> Option<f64> {
    let targets = vec![taught; measured_cycle];
    compute_metrics(trace, &targets, &[], cycle_ms).recalled[measured_cycle - 1]
}

/// Trains one pattern, records its recall, trains `extra_patterns` more and recalls it again.
pub fn run_interference(model: &ModelConfig, cfg: &InterferenceConfig, seed: u64) -> Result<InterferenceOutcome> {
    if cfg.measured_cycle == 0 || cfg.measured_cycle > cfg.recall_cycles {
        return Err(Error::param("measured_cycle", "must lie in 1..=recall_cycles"));
    }
    let mut pattern_rng = stream_rng(seed, Stream::Pattern, 2_000_000);
    let mut phase_rng = stream_rng(seed, Stream::Experiment, 2_000_000);
    let mut rng = stream_rng(seed, Stream::Lifetimes, 2_000_000);
    let n = cfg.extra_patterns + 1;
    let patterns = (0..n)
        .map(|_| generate_pattern(model.geometry, &mut pattern_rng))
        .collect::<Result<Vec<_>>>()?;
    let phases: Vec<f64> = (0..n).map(|_| random_phase(model, &mut phase_rng)).collect();
    let cycle_ms = model.geometry.cycle_ms;

    let mut net = Network::new(*model)?;
    train_sequence(&mut net, &patterns[..1], &phases[..1], cfg.repeats, &mut rng)?;
    net.reset_neuron();
    let before = recall_on(&mut net, &patterns[0], cfg.recall_cycles)?;
    train_sequence(&mut net, &patterns[1..], &phases[1..], cfg.repeats, &mut rng)?;
    net.reset_neuron();
    let after = recall_on(&mut net, &patterns[0], cfg.recall_cycles)?;
    Ok(InterferenceOutcome {
        taught: phases[0],
        before: measured_phase(&before, phases[0], cfg.measured_cycle, cycle_ms),
        after: measured_phase(&after, phases[0], cfg.measured_cycle, cycle_ms),
    })
}

pub fn interference_sweep(
    model: &ModelConfig,
    cfg: &InterferenceConfig,
    n_seeds: usize,
    base_seed: u64,
    exec: Execution,
) -> Result<Vec<InterferenceOutcome>> {
    map_jobs(exec, n_seeds, |i| run_interference(model, cfg, base_seed + i as u64))
        .into_iter()
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseFloorConfig {
    pub n_synapses: usize,
    pub pre_rate_hz: f64,
    pub post_period_ms: f64,
    /// Phase of the first post spike within its period.
    pub post_phase_ms: f64,
    pub duration_ms: f64,
}

impl Default for NoiseFloorConfig {
    fn default() -> Self {
        NoiseFloorConfig {
            n_synapses: 10_000,
            pre_rate_hz: 2.1,
            post_period_ms: 35.0,
            post_phase_ms: 19.0,
            duration_ms: 1050.0,
        }
    }
}

/// Feeds independent Poisson pre trains and a periodic post train to isolated
/// synapses and counts how many trigger a weight change.
pub fn noise_floor(learning: &LearningParams, cfg: &NoiseFloorConfig, seed: u64, exec: Execution) -> Result<usize> {
    if !(cfg.pre_rate_hz > 0.0 && cfg.post_period_ms > 0.0) {
        return Err(Error::param("noise_floor", "rates must be positive"));
    }
    let gap = Exp::new(cfg.pre_rate_hz / 1000.0).map_err(|e| Error::param("pre_rate_hz", e.to_string()))?;
    let triggered = map_jobs(exec, cfg.n_synapses, |i| {
        let mut rng = stream_rng(seed, Stream::Noise, i as u64);
        let mut pres = Vec::new();
        let mut t = gap.sample(&mut rng);
        while t < cfg.duration_ms {
            pres.push(t);
            t += gap.sample(&mut rng);
        }
        let mut syn = SynapseState::new(learning);
        let mut last = 0.0;
        let mut post = cfg.post_phase_ms;
        let mut next_pre = 0;
        loop {
            let pre_due = pres.get(next_pre).copied();
            let post_due = (post < cfg.duration_ms).then_some(post);
            let (now, is_pre) = match (pre_due, post_due) {
                (Some(a), Some(b)) if a < b => (a, true),
                (_, Some(b)) => (b, false),
                (Some(a), None) => (a, true),
                (None, None) => break,
            };
            syn.decay_accumulators(learning, (now - last) / 1000.0);
            last = now;
            if is_pre {
                syn.on_pre_spike(learning, now, &mut rng);
                next_pre += 1;
            } else {
                if syn.on_post_spike(learning, now, &mut rng).is_some() {
                    return true;
                }
                post += cfg.post_period_ms;
            }
        }
        false
    });
    Ok(triggered.into_iter().filter(|&b| b).count())
}

/// Single-neuron capacity scaled to a full memory of `channels` neurons.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Extrapolation {
    /// `floor(patterns * M / N)`.
    pub associations: u64,
    /// `floor(M / N)`, the whole-number multiplier.
    pub multiplier: u64,
    /// `patterns * floor(M / N)`.
    pub associations_whole_multiplier: u64,
}

pub fn extrapolate_capacity(single_neuron_patterns: u64, channels: u64, active: u64) -> Result<Extrapolation> {
    if active == 0 {
        return Err(Error::param("N", "must be positive to extrapolate"));
    }
    let multiplier = channels / active;
    Ok(Extrapolation {
        associations: single_neuron_patterns * channels / active,
        multiplier,
        associations_whole_multiplier: single_neuron_patterns * multiplier,
    })
}
