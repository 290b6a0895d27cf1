//! Cyclic STDP synapse.
//!
//! Each synapse runs two one-bit detectors. `Pre-waiting-post` is armed by a
//! pre-synaptic spike and, if a back-propagated post spike arrives before it
//! lapses, adds one unit of causal evidence to `accum_plus`. `Post-waiting-pre`
//! mirrors it for anti-causal evidence in `accum_minus`. Both accumulators leak
//! linearly. A full accumulator reports a weight change, which the engine
//! commits once per cycle; every commit sets the lock bit, after which the
//! synapse is frozen for good.

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use rand_distr::{Distribution, Exp1};

use crate::error::{Error, Result};

/// How long a waiting state stays armed after the spike that set it.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum LifetimeModel {
    /// Exponentially distributed lifetime with the state's time constant as mean.
    #[default]
    Exponential,
    /// Lifetime equal to the time constant.
    Fixed,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LearningParams {
    /// Mean lifetime of pre-waiting-post, ms.
    pub tau_pot: f64,
    /// Mean lifetime of post-waiting-pre, ms.
    pub tau_dep: f64,
    /// Causal pairs needed to trigger potentiation.
    pub t_pot: u32,
    /// Anti-causal pairs needed to trigger depression (magnitude).
    pub t_dep: u32,
    /// Accumulator leak, units per second.
    pub dec_acc: f64,
    pub a_plus: f64,
    pub a_minus: f64,
    pub w_init: f64,
    pub w_max: f64,
    pub w_min: f64,
    /// Width of the lock zone below threshold, mV.
    pub v_diff: f64,
    /// Back-propagation delay from soma to synapse, ms.
    pub t_d: f64,
    pub lifetime: LifetimeModel,
}

impl Default for LearningParams {
    fn default() -> Self {
        LearningParams {
            tau_pot: 9.6,
            tau_dep: 11.0,
            t_pot: 5,
            t_dep: 5,
            dec_acc: 1.0,
            a_plus: 0.99,
            a_minus: 0.5,
            w_init: 0.07,
            w_max: 0.14,
            w_min: 0.0,
            v_diff: 1.0,
            t_d: 1.0,
            lifetime: LifetimeModel::Exponential,
        }
    }
}

impl LearningParams {
    pub fn validate(&self) -> Result<()> {
        if self.t_pot < 1 {
            return Err(Error::param("T_pot", "must be at least 1"));
        }
        if self.t_dep < 1 {
            return Err(Error::param("T_dep", "magnitude must be at least 1"));
        }
        if !(self.w_min <= self.w_init && self.w_init <= self.w_max) {
            return Err(Error::param("W_init", "requires W_min <= W_init <= W_max"));
        }
        if !(self.a_minus > 0.0 && self.a_minus < 1.0) {
            return Err(Error::param("A_minus", "must lie in (0, 1)"));
        }
        if !(self.a_plus >= 0.0 && self.a_plus.is_finite()) {
            return Err(Error::param("A_plus", "must be finite and >= 0"));
        }
        if !(self.dec_acc >= 0.0 && self.dec_acc.is_finite()) {
            return Err(Error::param("Dec_acc", "must be finite and >= 0"));
        }
        for (name, v) in [("tau_pot", self.tau_pot), ("tau_dep", self.tau_dep)] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::param(name, "must be positive"));
            }
        }
        if !(self.t_d >= 0.0 && self.t_d.is_finite()) {
            return Err(Error::param("T_D", "must be finite and >= 0"));
        }
        if !(self.v_diff >= 0.0) {
            return Err(Error::param("V_diff", "must be >= 0"));
        }
        Ok(())
    }

    pub fn potentiated_weight(&self) -> f64 {
        (self.w_init * (1.0 + self.a_plus)).min(self.w_max)
    }

    pub fn depressed_weight(&self) -> f64 {
        (self.w_init * self.a_minus).max(self.w_min)
    }

    fn lifetime<R: Rng + ?Sized>(&self, tau: f64, rng: &mut R) -> f64 {
        match self.lifetime {
            LifetimeModel::Exponential => {
                let unit: f64 = Exp1.sample(rng);
                tau * unit
            }
            LifetimeModel::Fixed => tau,
        }
    }
}

/// Accumulators are real-valued because of the linear leak; a count counts as
/// reaching its threshold once fewer than one whole pair is missing.
pub fn threshold_reached(accum: f64, threshold: u32) -> bool {
    accum > threshold as f64 - 1.0 + 1e-9
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum LockClass {
    Unlocked,
    Potentiated,
    Depressed,
    LockedDep,
    LockedPot,
    LockedFfwd,
}

impl LockClass {
    pub const ALL: [LockClass; 6] = [
        LockClass::Unlocked,
        LockClass::Potentiated,
        LockClass::Depressed,
        LockClass::LockedDep,
        LockClass::LockedPot,
        LockClass::LockedFfwd,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            LockClass::Unlocked => "Unlocked",
            LockClass::Potentiated => "Potentiated",
            LockClass::Depressed => "Depressed",
            LockClass::LockedDep => "LockedDep",
            LockClass::LockedPot => "LockedPot",
            LockClass::LockedFfwd => "LockedFfwd",
        }
    }

    pub fn index(self) -> usize {
        self as usize
    }

    /// Locked without a weight change.
    pub fn is_locked_at_baseline(self) -> bool {
        matches!(
            self,
            LockClass::LockedDep | LockClass::LockedPot | LockClass::LockedFfwd
        )
    }
}

impl fmt::Display for LockClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for LockClass {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        LockClass::ALL
            .into_iter()
            .find(|c| c.as_str() == s)
            .ok_or_else(|| Error::param("lock_class", format!("unknown class `{s}`")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Direction {
    Potentiate,
    Depress,
}

impl Direction {
    pub fn as_str(self) -> &'static str {
        match self {
            Direction::Potentiate => "potentiate",
            Direction::Depress => "depress",
        }
    }
}

/// A triggered change waiting for the engine's once-per-cycle commit.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PendingChange {
    pub direction: Direction,
    pub synapse: usize,
    /// Cycle in which the triggering post spike occurred.
    pub cycle: u32,
    /// The triggering post spike came from feed-forward drive, not the teacher.
    pub feedforward: bool,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SynapseState {
    pub weight: f64,
    pub lock_class: LockClass,
    pub pre_waiting_until: Option<f64>,
    pub post_waiting_until: Option<f64>,
    pub accum_plus: f64,
    pub accum_minus: f64,
}

impl SynapseState {
    pub fn new(params: &LearningParams) -> Self {
        SynapseState {
            weight: params.w_init,
            lock_class: LockClass::Unlocked,
            pre_waiting_until: None,
            post_waiting_until: None,
            accum_plus: 0.0,
            accum_minus: 0.0,
        }
    }

    pub fn is_locked(&self) -> bool {
        self.lock_class != LockClass::Unlocked
    }

    pub fn on_pre_spike<R: Rng + ?Sized>(&mut self, params: &LearningParams, now: f64, rng: &mut R) {
        if self.is_locked() {
            return;
        }
        if let Some(until) = self.post_waiting_until.take() {
            if now <= until {
                self.accum_minus = (self.accum_minus + 1.0).min(params.t_dep as f64);
            }
        }
        self.pre_waiting_until = Some(now + params.lifetime(params.tau_pot, rng));
    }

    /// Handles a back-propagated post spike arriving at `now`. Returns the
    /// change it triggers, if any; potentiation wins when both accumulators fill
    /// on the same spike.
    pub fn on_post_spike<R: Rng + ?Sized>(
        &mut self,
        params: &LearningParams,
        now: f64,
        rng: &mut R,
    ) -> Option<Direction> {
        if self.is_locked() {
            return None;
        }
        if let Some(until) = self.pre_waiting_until.take() {
            if now <= until {
                self.accum_plus = (self.accum_plus + 1.0).min(params.t_pot as f64);
            }
        }
        self.post_waiting_until = Some(now + params.lifetime(params.tau_dep, rng));

        let mut triggered = None;
        if threshold_reached(self.accum_minus, params.t_dep) {
            self.accum_minus = 0.0;
            triggered = Some(Direction::Depress);
        }
        if threshold_reached(self.accum_plus, params.t_pot) {
            self.accum_plus = 0.0;
            triggered = Some(Direction::Potentiate);
        }
        triggered
    }

    /// Linear leak of both accumulators over `elapsed_s` seconds.
    pub fn decay_accumulators(&mut self, params: &LearningParams, elapsed_s: f64) {
        if self.is_locked() || elapsed_s <= 0.0 {
            return;
        }
        let drop = params.dec_acc * elapsed_s;
        self.accum_plus = (self.accum_plus - drop).max(0.0);
        self.accum_minus = (self.accum_minus - drop).max(0.0);
    }

    /// Applies a triggered change and sets the lock bit. Returns the new class,
    /// or `None` if the synapse was already locked.
    pub fn commit_change(
        &mut self,
        params: &LearningParams,
        direction: Direction,
        lock_zone_active: bool,
        fired_feedforward: bool,
    ) -> Option<LockClass> {
        if self.is_locked() {
            return None;
        }
        let class = if fired_feedforward {
            LockClass::LockedFfwd
        } else if lock_zone_active {
            match direction {
                Direction::Potentiate => LockClass::LockedPot,
                Direction::Depress => LockClass::LockedDep,
            }
        } else {
            match direction {
                Direction::Potentiate => {
                    self.weight = params.potentiated_weight();
                    LockClass::Potentiated
                }
                Direction::Depress => {
                    self.weight = params.depressed_weight();
                    LockClass::Depressed
                }
            }
        };
        self.lock_class = class;
        self.pre_waiting_until = None;
        self.post_waiting_until = None;
        Some(class)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{stream_rng, Stream};
    use approx::assert_relative_eq;

    fn fixed() -> LearningParams {
        LearningParams {
            lifetime: LifetimeModel::Fixed,
            ..LearningParams::default()
        }
    }

    #[test]
    fn pre_arms_waiting_state_with_mean_tau_pot() {
        let p = LearningParams::default();
        let mut rng = stream_rng(11, Stream::Lifetimes, 0);
        let n = 20_000;
        let mut sum = 0.0;
        for _ in 0..n {
            let mut s = SynapseState::new(&p);
            s.on_pre_spike(&p, 10.0, &mut rng);
            sum += s.pre_waiting_until.unwrap() - 10.0;
        }
        let mean = sum / n as f64;
        // exponential: sd = mean, so the sample mean has sd tau / sqrt(n)
        let sigma = p.tau_pot / (n as f64).sqrt();
        assert!((mean - p.tau_pot).abs() < 3.0 * sigma, "mean lifetime {mean}");
    }

    #[test]
    fn post_then_pre_is_anti_causal() {
        let p = fixed();
        let mut rng = stream_rng(0, Stream::Lifetimes, 0);
        let mut s = SynapseState::new(&p);
        assert_eq!(s.on_post_spike(&p, 10.0, &mut rng), None);
        s.on_pre_spike(&p, 12.0, &mut rng);
        assert_eq!(s.accum_minus, 1.0);
        assert_eq!(s.accum_plus, 0.0);
    }

    #[test]
    fn lone_pre_changes_nothing() {
        let p = LearningParams::default();
        let mut rng = stream_rng(0, Stream::Lifetimes, 0);
        let mut s = SynapseState::new(&p);
        for k in 0..10 {
            s.on_pre_spike(&p, 10.0 + k as f64, &mut rng);
        }
        assert_eq!((s.accum_plus, s.accum_minus), (0.0, 0.0));
    }

    #[test]
    fn five_causal_pairs_potentiate() {
        let p = fixed();
        let mut rng = stream_rng(0, Stream::Lifetimes, 0);
        let mut s = SynapseState::new(&p);
        let mut reports = vec![];
        for k in 0..5 {
            let t = k as f64 * 35.0;
            s.on_pre_spike(&p, t + 15.0, &mut rng);
            s.decay_accumulators(&p, 0.035);
            reports.push(s.on_post_spike(&p, t + 19.0, &mut rng));
        }
        assert_eq!(&reports[..4], &[None; 4]);
        assert_eq!(reports[4], Some(Direction::Potentiate));
        assert_eq!(s.accum_plus, 0.0);
    }

    #[test]
    fn five_anti_causal_pairs_depress() {
        let p = fixed();
        let mut rng = stream_rng(0, Stream::Lifetimes, 0);
        let mut s = SynapseState::new(&p);
        let mut reports = vec![];
        for k in 0..6 {
            let t = k as f64 * 35.0;
            s.decay_accumulators(&p, 0.035);
            reports.push(s.on_post_spike(&p, t + 19.0, &mut rng));
            s.on_pre_spike(&p, t + 21.0, &mut rng);
        }
        // the fifth anti-causal pair is reported at the next post spike
        assert!(reports[..5].iter().all(Option::is_none));
        assert_eq!(reports[5], Some(Direction::Depress));
    }

    #[test]
    fn leak_erases_partial_evidence() {
        let p = fixed();
        let mut rng = stream_rng(0, Stream::Lifetimes, 0);
        let mut s = SynapseState::new(&p);
        for k in 0..4 {
            let t = k as f64 * 35.0;
            s.on_pre_spike(&p, t + 15.0, &mut rng);
            assert_eq!(s.on_post_spike(&p, t + 19.0, &mut rng), None);
        }
        s.decay_accumulators(&p, 10.0);
        assert_eq!(s.accum_plus, 0.0);
        s.on_pre_spike(&p, 10_015.0, &mut rng);
        assert_eq!(s.on_post_spike(&p, 10_019.0, &mut rng), None);
        assert_eq!(s.accum_plus, 1.0);
    }

    #[test]
    fn decay_arithmetic() {
        let p = LearningParams::default();
        let mut s = SynapseState::new(&p);
        s.accum_plus = 4.0;
        s.decay_accumulators(&p, 4.0);
        assert_eq!(s.accum_plus, 0.0);
        s.decay_accumulators(&p, 1.0);
        assert_eq!(s.accum_plus, 0.0);
        s.accum_plus = 4.5;
        s.decay_accumulators(&p, 1.0);
        assert_relative_eq!(s.accum_plus, 3.5);
    }

    #[test]
    fn commit_rules() {
        let p = LearningParams::default();
        let mut s = SynapseState::new(&p);
        assert_eq!(
            s.commit_change(&p, Direction::Potentiate, false, false),
            Some(LockClass::Potentiated)
        );
        assert_relative_eq!(s.weight, 0.1393, epsilon = 1e-12);
        assert!(s.weight <= p.w_max);

        let mut s = SynapseState::new(&p);
        s.commit_change(&p, Direction::Depress, false, false);
        assert_eq!(s.lock_class, LockClass::Depressed);
        assert_relative_eq!(s.weight, 0.035, epsilon = 1e-12);

        let mut s = SynapseState::new(&p);
        assert_eq!(
            s.commit_change(&p, Direction::Depress, true, false),
            Some(LockClass::LockedDep)
        );
        assert_eq!(s.weight, p.w_init);

        let mut s = SynapseState::new(&p);
        assert_eq!(
            s.commit_change(&p, Direction::Potentiate, true, false),
            Some(LockClass::LockedPot)
        );
        let mut s = SynapseState::new(&p);
        assert_eq!(
            s.commit_change(&p, Direction::Potentiate, true, true),
            Some(LockClass::LockedFfwd)
        );
        assert_eq!(s.weight, p.w_init);

        let before = s;
        assert_eq!(s.commit_change(&p, Direction::Depress, false, false), None);
        assert_eq!(s, before);
    }

    #[test]
    fn locked_synapse_ignores_spikes() {
        let p = fixed();
        let mut rng = stream_rng(0, Stream::Lifetimes, 0);
        let mut s = SynapseState::new(&p);
        s.commit_change(&p, Direction::Potentiate, false, false);
        let before = s;
        for k in 0..20 {
            s.on_pre_spike(&p, k as f64, &mut rng);
            s.on_post_spike(&p, k as f64 + 0.5, &mut rng);
        }
        assert_eq!(s, before);
    }

    #[test]
    fn lock_class_names_round_trip() {
        for c in LockClass::ALL {
            assert_eq!(c.as_str().parse::<LockClass>().unwrap(), c);
        }
        assert!("Bogus".parse::<LockClass>().is_err());
    }

    #[test]
    fn param_validation() {
        assert!(LearningParams::default().validate().is_ok());
        let mut p = LearningParams::default();
        p.a_minus = 1.0;
        assert!(p.validate().is_err());
        let mut p = LearningParams::default();
        p.w_init = 0.2;
        assert!(p.validate().is_err());
        let mut p = LearningParams::default();
        p.t_pot = 0;
        assert!(p.validate().is_err());
    }
}
