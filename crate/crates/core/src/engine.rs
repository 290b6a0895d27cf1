//! Clock-driven simulation kernel for one memory neuron fully connected to
//! `M` input channels.
//!
//! Per step `k` (time `k * dt`):
//!
//! 1. input spikes due this step reach their synapses (pre-spike handling in
//!    training) and inject `weight * weight_scale` into the conductance kernel;
//! 2. back-propagated post spikes due this step reach every synapse;
//! 3. at a teacher phase the potential is probed, staged changes are committed
//!    and, in training, the teacher forces a spike;
//! 4. the neuron integrates over `[k dt, (k + 1) dt)`.
//!
//! Synapse clocks are absolute across successive runs on the same network, so
//! patterns trained back to back share one continuous timeline.

use std::collections::VecDeque;
use std::fmt::Write as _;
use std::io::{self, BufRead, Write};

use crate::codec::{render_cycles, CyclicPattern, SpikeEvent};
use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::model::ModelConfig;
use crate::neuron::NeuronState;
use crate::plasticity::{Direction, LockClass, PendingChange, SynapseState};
use crate::rng::SimRng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Mode {
    #[default]
    Training,
    /// No teacher spikes and no plasticity; synapse state is read-only.
    Recall,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TeacherEvent {
    pub cycle: u32,
    pub phase_ms: f64,
}

/// Inputs for one run. Times are relative to the start of the run.
///
/// In recall mode teacher events only mark probe points.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Schedule {
    pub inputs: Vec<SpikeEvent>,
    pub teacher: Vec<TeacherEvent>,
    pub t_end: f64,
}

impl Schedule {
    /// `n_cycles` presentations of `pattern` with a teacher at `phase_ms` in each cycle.
    pub fn training(pattern: &CyclicPattern, n_cycles: usize, phase_ms: f64) -> Self {
        Schedule {
            inputs: render_cycles(pattern, n_cycles, 0.0),
            teacher: (0..n_cycles as u32)
                .map(|cycle| TeacherEvent { cycle, phase_ms })
                .collect(),
            t_end: n_cycles as f64 * pattern.geometry().cycle_ms,
        }
    }

    /// `n_cycles` presentations of `pattern` with no teacher.
    pub fn recall(pattern: &CyclicPattern, n_cycles: usize) -> Self {
        Schedule {
            inputs: render_cycles(pattern, n_cycles, 0.0),
            teacher: Vec::new(),
            t_end: n_cycles as f64 * pattern.geometry().cycle_ms,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SpikeCause {
    Feedforward,
    Teacher,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OutputSpike {
    pub time_ms: f64,
    pub cause: SpikeCause,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TeacherOutcome {
    pub cycle: u32,
    pub time_ms: f64,
    /// False when the teacher arrived during the refractory period.
    pub fired: bool,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProbeRecord {
    pub cycle: u32,
    pub time_ms: f64,
    pub v: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CommitRecord {
    /// Cycle in which the commit was applied.
    pub cycle: u32,
    pub time_ms: f64,
    pub synapse: usize,
    pub direction: Direction,
    pub class: LockClass,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct RunTrace {
    pub output_spikes: Vec<OutputSpike>,
    pub teacher: Vec<TeacherOutcome>,
    pub probes: Vec<ProbeRecord>,
    pub commits: Vec<CommitRecord>,
    /// `(time_ms, v)` after every step, when requested.
    pub membrane: Vec<(f64, f64)>,
}

impl RunTrace {
    /// Output spike times falling in `[start, end)`.
    pub fn spikes_between(&self, start: f64, end: f64) -> impl Iterator<Item = f64> + '_ {
        self.output_spikes
            .iter()
            .map(|s| s.time_ms)
            .filter(move |&t| t >= start - 1e-9 && t < end - 1e-9)
    }

    /// `event,time_ms,detail` export.
    pub fn write_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        writeln!(w, "event,time_ms,detail")?;
        let mut rows: Vec<(f64, u8, String)> = Vec::new();
        for s in &self.output_spikes {
            let cause = match s.cause {
                SpikeCause::Feedforward => "feedforward",
                SpikeCause::Teacher => "teacher",
            };
            rows.push((s.time_ms, 3, format!("spike,{},{}", s.time_ms, cause)));
        }
        for t in &self.teacher {
            let what = if t.fired { "fired" } else { "absorbed" };
            rows.push((
                t.time_ms,
                2,
                format!("teacher,{},cycle={} {}", t.time_ms, t.cycle, what),
            ));
        }
        for p in &self.probes {
            rows.push((p.time_ms, 0, format!("probe,{},cycle={} v={}", p.time_ms, p.cycle, p.v)));
        }
        for c in &self.commits {
            rows.push((
                c.time_ms,
                1,
                format!(
                    "commit,{},cycle={} synapse={} {} {}",
                    c.time_ms,
                    c.cycle,
                    c.synapse,
                    c.direction.as_str(),
                    c.class
                ),
            ));
        }
        rows.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        for (_, _, line) in rows {
            writeln!(w, "{line}")?;
        }
        Ok(())
    }

    /// `time_ms,v_mV` membrane trace export.
    pub fn write_membrane_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        writeln!(w, "time_ms,v_mV")?;
        for (t, v) in &self.membrane {
            writeln!(w, "{t},{v}")?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct RunOptions {
    pub record_membrane: bool,
}

/// One row per synapse: `synapse_id,weight,locked,lock_class,accum_plus,accum_minus`.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightSnapshot {
    pub rows: Vec<SnapshotRow>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SnapshotRow {
    pub weight: f64,
    pub lock_class: LockClass,
    pub accum_plus: f64,
    pub accum_minus: f64,
}

pub const SNAPSHOT_HEADER: &str = "synapse_id,weight,locked,lock_class,accum_plus,accum_minus";

impl WeightSnapshot {
    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::with_capacity(self.rows.len() * 40);
        out.push_str(SNAPSHOT_HEADER);
        out.push('\n');
        for (i, r) in self.rows.iter().enumerate() {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{}",
                i,
                r.weight,
                r.lock_class != LockClass::Unlocked,
                r.lock_class,
                r.accum_plus,
                r.accum_minus
            );
        }
        out
    }

    /// Parses [`to_csv`](Self::to_csv) output; `#` lines are skipped.
    pub fn from_csv<R: BufRead>(r: R) -> Result<Self> {
        let mut rows = Vec::new();
        for (i, line) in r.lines().enumerate() {
            let ln = i + 1;
            let line = line.map_err(|e| Error::Parse {
                line: ln,
                reason: e.to_string(),
            })?;
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') || line == SNAPSHOT_HEADER {
                continue;
            }
            let bad = |reason: String| Error::Parse { line: ln, reason };
            let f: Vec<&str> = line.split(',').collect();
            if f.len() != 6 {
                return Err(bad(format!("expected 6 fields, found {}", f.len())));
            }
            let id: usize = f[0].parse().map_err(|e| bad(format!("synapse_id: {e}")))?;
            if id != rows.len() {
                return Err(bad(format!("synapse_id {id} out of sequence")));
            }
            let weight = f[1].parse().map_err(|e| bad(format!("weight: {e}")))?;
            let locked: bool = f[2].parse().map_err(|e| bad(format!("locked: {e}")))?;
            let lock_class: LockClass = f[3].parse().map_err(|e: Error| bad(e.to_string()))?;
            if locked != (lock_class != LockClass::Unlocked) {
                return Err(bad("locked flag disagrees with lock_class".into()));
            }
            let accum_plus = f[4].parse().map_err(|e| bad(format!("accum_plus: {e}")))?;
            let accum_minus = f[5].parse().map_err(|e| bad(format!("accum_minus: {e}")))?;
            rows.push(SnapshotRow {
                weight,
                lock_class,
                accum_plus,
                accum_minus,
            });
        }
        Ok(WeightSnapshot { rows })
    }

    /// Synapses per class, indexed by [`LockClass::index`]. Sums to the synapse count.
    pub fn class_counts(&self) -> [usize; 6] {
        let mut counts = [0; 6];
        for r in &self.rows {
            counts[r.lock_class.index()] += 1;
        }
        counts
    }
}

/// Passed to the observer at the end of every simulated cycle.
pub struct CycleEnd<'a> {
    pub cycle: u32,
    pub network: &'a Network,
    pub trace: &'a RunTrace,
}

#[derive(Debug, Clone)]
pub struct Network {
    model: ModelConfig,
    synapses: Vec<SynapseState>,
    /// Absolute time each synapse's accumulators were last leaked to.
    leaked_at: Vec<f64>,
    neuron: NeuronState,
    mode: Mode,
    /// Absolute time at which the next run starts.
    clock_ms: f64,
}

impl Network {
    /// Fresh network: every weight at `W_init`, unlocked, neuron at rest.
    pub fn new(model: ModelConfig) -> Result<Self> {
        model.validate()?;
        let m = model.geometry.channels;
        Ok(Network {
            synapses: vec![SynapseState::new(&model.learning); m],
            leaked_at: vec![0.0; m],
            neuron: NeuronState::at_rest(&model.neuron),
            mode: Mode::Training,
            clock_ms: 0.0,
            model,
        })
    }

    pub fn model(&self) -> &ModelConfig {
        &self.model
    }

    pub fn synapses(&self) -> &[SynapseState] {
        &self.synapses
    }

    pub fn neuron(&self) -> &NeuronState {
        &self.neuron
    }

    pub fn mode(&self) -> Mode {
        self.mode
    }

    pub fn set_mode(&mut self, mode: Mode) {
        self.mode = mode;
    }

    pub fn clock_ms(&self) -> f64 {
        self.clock_ms
    }

    pub fn reset_neuron(&mut self) {
        self.neuron = NeuronState::at_rest(&self.model.neuron);
        self.neuron.refractory_until = self.clock_ms;
    }

    pub fn run(&mut self, sched: &Schedule, rng: &mut SimRng) -> Result<RunTrace> {
        self.run_observed(sched, rng, RunOptions::default(), |_| {})
    }

    /// Runs `sched`, calling `observer` after the last step of every cycle.
    pub fn run_observed<F>(
        &mut self,
        sched: &Schedule,
        rng: &mut SimRng,
        opts: RunOptions,
        mut observer: F,
    ) -> Result<RunTrace>
    where
        F: FnMut(CycleEnd<'_>),
    {
        let dt = self.model.sim.dt;
        let per_cycle = self.model.steps_per_cycle();
        let n_steps = (sched.t_end / dt).round() as u64;
        let input_steps = self.check_inputs(sched)?;
        let teacher_steps = self.check_teacher(sched)?;
        let td_steps = (self.model.learning.t_d / dt).round() as u64;
        let training = self.mode == Mode::Training;
        let scale = self.model.sim.weight_scale;
        let n_cycles = n_steps.div_ceil(per_cycle) as usize;

        let mut trace = RunTrace::default();
        let mut probe_by_cycle: Vec<Option<f64>> = vec![None; n_cycles + 1];
        let mut posts: VecDeque<(u64, bool, u32)> = VecDeque::new();
        let mut pending: Vec<PendingChange> = Vec::new();
        let mut staged = vec![false; self.synapses.len()];
        let mut next_input = 0;
        let mut next_teacher = 0;

        for k in 0..n_steps {
            let rel = k as f64 * dt;
            let now = self.clock_ms + rel;
            let cycle = (k / per_cycle) as u32;
            if k % per_cycle == 0 {
                self.neuron.fired_feedforward_this_cycle = false;
            }

            let mut drive = 0.0;
            while next_input < input_steps.len() && input_steps[next_input] == k {
                let ch = sched.inputs[next_input].channel as usize;
                if training {
                    self.leak(ch, now);
                    self.synapses[ch].on_pre_spike(&self.model.learning, now, rng);
                }
                drive += self.synapses[ch].weight * scale;
                next_input += 1;
            }

            while posts.front().is_some_and(|p| p.0 == k) {
                let (_, feedforward, spike_cycle) = posts.pop_front().expect("front checked");
                if training {
                    self.deliver_post(now, feedforward, spike_cycle, rng, &mut pending, &mut staged);
                }
            }

            if next_teacher < teacher_steps.len() && teacher_steps[next_teacher] == k {
                let t_cycle = sched.teacher[next_teacher].cycle;
                next_teacher += 1;
                let v = self.neuron.probe();
                probe_by_cycle[cycle as usize] = Some(v);
                trace.probes.push(ProbeRecord { cycle, time_ms: rel, v });
                if training {
                    self.commit(&mut pending, &mut staged, &probe_by_cycle, cycle, rel, &mut trace);
                    let fired = self.neuron.force_fire(&self.model.neuron, now);
                    trace.teacher.push(TeacherOutcome {
                        cycle: t_cycle,
                        time_ms: rel,
                        fired,
                    });
                    if fired {
                        trace.output_spikes.push(OutputSpike {
                            time_ms: rel,
                            cause: SpikeCause::Teacher,
                        });
                        posts.push_back((k + td_steps, false, cycle));
                    }
                }
            }

            let fired = self
                .neuron
                .step(&self.model.neuron, drive, now, dt, self.model.sim.integrator);
            if fired {
                trace.output_spikes.push(OutputSpike {
                    time_ms: rel + dt,
                    cause: SpikeCause::Feedforward,
                });
                posts.push_back((k + 1 + td_steps, true, ((k + 1) / per_cycle) as u32));
            }
            if opts.record_membrane {
                trace.membrane.push((rel + dt, self.neuron.v));
            }
            if (k + 1) % per_cycle == 0 || k + 1 == n_steps {
                observer(CycleEnd {
                    cycle,
                    network: self,
                    trace: &trace,
                });
            }
        }

        if training && !pending.is_empty() {
            let last = n_cycles.saturating_sub(1) as u32;
            self.commit(
                &mut pending,
                &mut staged,
                &probe_by_cycle,
                last,
                sched.t_end,
                &mut trace,
            );
        }
        self.clock_ms += n_steps as f64 * dt;
        Ok(trace)
    }

    fn leak(&mut self, i: usize, now: f64) {
        let elapsed = now - self.leaked_at[i];
        if elapsed > 0.0 {
            self.synapses[i].decay_accumulators(&self.model.learning, elapsed / 1000.0);
            self.leaked_at[i] = now;
        }
    }

    fn deliver_post(
        &mut self,
        now: f64,
        feedforward: bool,
        cycle: u32,
        rng: &mut SimRng,
        pending: &mut Vec<PendingChange>,
        staged: &mut [bool],
    ) {
        for i in 0..self.synapses.len() {
            if self.synapses[i].is_locked() {
                continue;
            }
            self.leak(i, now);
            let triggered = self.synapses[i].on_post_spike(&self.model.learning, now, rng);
            if let Some(direction) = triggered {
                // one pending change per synapse until the next commit
                if !staged[i] {
                    staged[i] = true;
                    pending.push(PendingChange {
                        direction,
                        synapse: i,
                        cycle,
                        feedforward,
                    });
                }
            }
        }
    }

    fn commit(
        &mut self,
        pending: &mut Vec<PendingChange>,
        staged: &mut [bool],
        probe_by_cycle: &[Option<f64>],
        cycle: u32,
        time_ms: f64,
        trace: &mut RunTrace,
    ) {
        pending.sort_by_key(|c| (c.direction, c.synapse));
        let (v_thresh, v_diff) = (self.model.neuron.v_thresh, self.model.learning.v_diff);
        for change in pending.drain(..) {
            staged[change.synapse] = false;
            let lock_zone = probe_by_cycle
                .get(change.cycle as usize)
                .copied()
                .flatten()
                .is_some_and(|v| v_thresh - v <= v_diff);
            let syn = &mut self.synapses[change.synapse];
            if let Some(class) =
                syn.commit_change(&self.model.learning, change.direction, lock_zone, change.feedforward)
            {
                trace.commits.push(CommitRecord {
                    cycle,
                    time_ms,
                    synapse: change.synapse,
                    direction: change.direction,
                    class,
                });
            }
        }
    }

    fn check_inputs(&self, sched: &Schedule) -> Result<Vec<u64>> {
        let dt = self.model.sim.dt;
        let m = self.synapses.len();
        let mut last = f64::NEG_INFINITY;
        let mut steps = Vec::with_capacity(sched.inputs.len());
        for (index, ev) in sched.inputs.iter().enumerate() {
            if ev.channel as usize >= m {
                return Err(Error::ChannelOutOfRange {
                    channel: ev.channel,
                    channels: m,
                });
            }
            if ev.time_ms < last {
                return Err(Error::ScheduleOutOfOrder {
                    index,
                    detail: format!("input at {} ms follows {} ms", ev.time_ms, last),
                });
            }
            if !(ev.time_ms >= 0.0) || ev.time_ms >= sched.t_end {
                return Err(Error::ScheduleOutOfOrder {
                    index,
                    detail: format!("input at {} ms outside [0, {})", ev.time_ms, sched.t_end),
                });
            }
            last = ev.time_ms;
            steps.push((ev.time_ms / dt).round() as u64);
        }
        Ok(steps)
    }

    fn check_teacher(&self, sched: &Schedule) -> Result<Vec<u64>> {
        let dt = self.model.sim.dt;
        let cycle_ms = self.model.geometry.cycle_ms;
        let per_cycle = self.model.steps_per_cycle();
        let mut steps: Vec<u64> = Vec::with_capacity(sched.teacher.len());
        for (index, t) in sched.teacher.iter().enumerate() {
            if !(t.phase_ms >= 0.0 && t.phase_ms < cycle_ms) {
                return Err(Error::ScheduleOutOfOrder {
                    index,
                    detail: format!("teacher phase {} ms outside [0, {cycle_ms})", t.phase_ms),
                });
            }
            let step = t.cycle as u64 * per_cycle + ((t.phase_ms / dt).round() as u64).min(per_cycle - 1);
            if step as f64 * dt >= sched.t_end {
                return Err(Error::ScheduleOutOfOrder {
                    index,
                    detail: format!("teacher in cycle {} lies beyond t_end", t.cycle),
                });
            }
            if steps.last().is_some_and(|&prev| step <= prev) {
                return Err(Error::ScheduleOutOfOrder {
                    index,
                    detail: "teacher events must be strictly increasing in time".into(),
                });
            }
            steps.push(step);
        }
        Ok(steps)
    }

    /// Current synapse table with accumulators leaked up to the network clock.
    pub fn snapshot_weights(&self) -> WeightSnapshot {
        let learning = &self.model.learning;
        let rows = self
            .synapses
            .iter()
            .zip(&self.leaked_at)
            .map(|(s, &at)| {
                let mut s = *s;
                s.decay_accumulators(learning, (self.clock_ms - at).max(0.0) / 1000.0);
                SnapshotRow {
                    weight: s.weight,
                    lock_class: s.lock_class,
                    accum_plus: s.accum_plus,
                    accum_minus: s.accum_minus,
                }
            })
            .collect();
        WeightSnapshot { rows }
    }

    /// Replaces the synapse table. Waiting states are cleared and the neuron
    /// returns to rest; weights, lock classes and accumulators come from the snapshot.
    pub fn restore_weights(&mut self, snapshot: &WeightSnapshot) -> Result<()> {
        if snapshot.len() != self.synapses.len() {
            return Err(Error::GeometryMismatch {
                expected: self.synapses.len(),
                found: snapshot.len(),
            });
        }
        for (s, r) in self.synapses.iter_mut().zip(&snapshot.rows) {
            *s = SynapseState {
                weight: r.weight,
                lock_class: r.lock_class,
                pre_waiting_until: None,
                post_waiting_until: None,
                accum_plus: r.accum_plus,
                accum_minus: r.accum_minus,
            };
        }
        self.leaked_at.fill(self.clock_ms);
        self.reset_neuron();
        Ok(())
    }
}

/// Runs independent memory neurons that share one input stream but have their
/// own teacher schedules. Unit `i` draws from `rngs[i]`.
pub fn run_population(
    units: &mut [Network],
    schedules: &[Schedule],
    rngs: &mut [SimRng],
    exec: Execution,
) -> Result<Vec<RunTrace>> {
    if units.len() != schedules.len() || units.len() != rngs.len() {
        return Err(Error::param(
            "population",
            "units, schedules and rngs must have equal length",
        ));
    }
    let jobs = units.iter_mut().zip(schedules).zip(rngs.iter_mut());
    let results: Vec<Result<RunTrace>> = if exec.is_parallel() {
        #[cfg(feature = "parallel")]
        {
            use rayon::prelude::*;
            units
                .par_iter_mut()
                .zip(schedules.par_iter())
                .zip(rngs.par_iter_mut())
                .map(|((net, s), rng)| net.run(s, rng))
                .collect()
        }
        #[cfg(not(feature = "parallel"))]
        {
            jobs.map(|((net, s), rng)| net.run(s, rng)).collect()
        }
    } else {
        jobs.map(|((net, s), rng)| net.run(s, rng)).collect()
    };
    results.into_iter().collect()
}
