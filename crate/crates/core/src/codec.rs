//! Cyclic N-of-M codewords and their rendering as spike streams.
//!
//! A codeword selects `N` of `M` channels; each selected channel fires once per
//! cycle in a fixed phase bin. Phases are kept as integer bin indices and only
//! converted to milliseconds when a pattern is rendered, so repeated cycles are
//! phase-exact.

use std::fmt::Write as _;
use std::io::{self, BufRead, Write};

use num_bigint::BigUint;
use num_traits::{One, ToPrimitive};
use rand::Rng;
use rand_distr::{Distribution, Exp, Normal};

use crate::error::{Error, Result};

/// Out-of-band channel id carried by teacher events.
pub const TEACHER_CHANNEL: u32 = u32::MAX;

/// Shape shared by every codeword of a code: `M`, `N`, cycle period and bin width.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PatternGeometry {
    pub channels: usize,
    pub active: usize,
    pub cycle_ms: f64,
    pub bin_ms: f64,
}

impl PatternGeometry {
    pub fn new(channels: usize, active: usize, cycle_ms: f64, bin_ms: f64) -> Result<Self> {
        let g = PatternGeometry {
            channels,
            active,
            cycle_ms,
            bin_ms,
        };
        g.validate()?;
        Ok(g)
    }

    pub fn validate(&self) -> Result<()> {
        if self.active > self.channels {
            return Err(Error::InvalidGeometry(format!(
                "N = {} exceeds M = {}",
                self.active, self.channels
            )));
        }
        if !(self.bin_ms > 0.0 && self.cycle_ms > 0.0) || !self.cycle_ms.is_finite() {
            return Err(Error::InvalidGeometry(format!(
                "cycle {} ms and bin {} ms must be positive",
                self.cycle_ms, self.bin_ms
            )));
        }
        let ratio = self.cycle_ms / self.bin_ms;
        if (ratio - ratio.round()).abs() > 1e-9 * ratio.max(1.0) || ratio.round() < 1.0 {
            return Err(Error::InvalidGeometry(format!(
                "cycle {} ms is not an integer multiple of bin {} ms",
                self.cycle_ms, self.bin_ms
            )));
        }
        if ratio.round() > u32::MAX as f64 {
            return Err(Error::InvalidGeometry("too many phase bins".into()));
        }
        Ok(())
    }

    /// Number of phase bins per cycle, `B = T / T_bin`.
    pub fn bins(&self) -> u32 {
        (self.cycle_ms / self.bin_ms).round() as u32
    }

    /// Fraction of channels active in each codeword, `N / M`.
    pub fn activity(&self) -> f64 {
        self.active as f64 / self.channels as f64
    }

    /// Signal spikes per millisecond across the whole population.
    pub fn spike_density(&self) -> f64 {
        self.active as f64 / self.cycle_ms
    }
}

impl Default for PatternGeometry {
    fn default() -> Self {
        PatternGeometry {
            channels: 3200,
            active: 75,
            cycle_ms: 35.0,
            bin_ms: 0.1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct PatternEntry {
    pub channel: u32,
    pub bin: u32,
}

/// One cyclic N-of-M codeword. Entries are kept sorted by channel.
#[derive(Debug, Clone, PartialEq)]
pub struct CyclicPattern {
    geometry: PatternGeometry,
    entries: Vec<PatternEntry>,
}

impl CyclicPattern {
    /// Builds a pattern from explicit entries, checking every invariant.
    pub fn from_entries(geometry: PatternGeometry, mut entries: Vec<PatternEntry>) -> Result<Self> {
        geometry.validate()?;
        if entries.len() != geometry.active {
            return Err(Error::InvalidGeometry(format!(
                "expected {} entries, found {}",
                geometry.active,
                entries.len()
            )));
        }
        entries.sort_unstable();
        let bins = geometry.bins();
        for (i, e) in entries.iter().enumerate() {
            if e.channel as usize >= geometry.channels {
                return Err(Error::InvalidGeometry(format!(
                    "channel {} out of range for M = {}",
                    e.channel, geometry.channels
                )));
            }
            if e.bin >= bins {
                return Err(Error::InvalidGeometry(format!(
                    "phase bin {} out of range for B = {}",
                    e.bin, bins
                )));
            }
            if i > 0 && entries[i - 1].channel == e.channel {
                return Err(Error::InvalidGeometry(format!("channel {} appears twice", e.channel)));
            }
        }
        Ok(CyclicPattern { geometry, entries })
    }

    pub fn geometry(&self) -> &PatternGeometry {
        &self.geometry
    }

    pub fn entries(&self) -> &[PatternEntry] {
        &self.entries
    }

    pub fn phase_ms(&self, entry: &PatternEntry) -> f64 {
        entry.bin as f64 * self.geometry.bin_ms
    }

    /// Geometry header `M,N,T_cycle_ms,T_bin_ms` followed by one `channel,bin` per line.
    pub fn to_text(&self) -> String {
        let g = &self.geometry;
        let mut out = format!("{},{},{},{}\n", g.channels, g.active, g.cycle_ms, g.bin_ms);
        for e in &self.entries {
            let _ = writeln!(out, "{},{}", e.channel, e.bin);
        }
        out
    }

    /// Parses [`to_text`](Self::to_text) output. Lines starting with `#` are skipped.
    pub fn from_text(text: &str) -> Result<Self> {
        let mut lines = text
            .lines()
            .enumerate()
            .map(|(i, l)| (i + 1, l.trim()))
            .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'));
        let (hline, header) = lines.next().ok_or(Error::Parse {
            line: 1,
            reason: "missing geometry header".into(),
        })?;
        let fields: Vec<&str> = header.split(',').collect();
        if fields.len() != 4 {
            return Err(Error::Parse {
                line: hline,
                reason: "geometry header must be M,N,T_cycle_ms,T_bin_ms".into(),
            });
        }
        let perr = |reason: String| Error::Parse { line: hline, reason };
        let geometry = PatternGeometry::new(
            fields[0].parse().map_err(|e| perr(format!("M: {e}")))?,
            fields[1].parse().map_err(|e| perr(format!("N: {e}")))?,
            fields[2].parse().map_err(|e| perr(format!("T_cycle: {e}")))?,
            fields[3].parse().map_err(|e| perr(format!("T_bin: {e}")))?,
        )?;
        let mut entries = Vec::with_capacity(geometry.active);
        for (ln, line) in lines {
            let (c, b) = line.split_once(',').ok_or(Error::Parse {
                line: ln,
                reason: "expected channel,bin".into(),
            })?;
            let channel = c.trim().parse().map_err(|e| Error::Parse {
                line: ln,
                reason: format!("channel: {e}"),
            })?;
            let bin = b.trim().parse().map_err(|e| Error::Parse {
                line: ln,
                reason: format!("bin: {e}"),
            })?;
            entries.push(PatternEntry { channel, bin });
        }
        CyclicPattern::from_entries(geometry, entries)
    }
}

/// Draws `N` distinct channels uniformly and gives each an independent uniform phase bin.
pub fn generate_pattern<R: Rng + ?Sized>(geometry: PatternGeometry, rng: &mut R) -> Result<CyclicPattern> {
    geometry.validate()?;
    let bins = geometry.bins();
    let mut entries: Vec<PatternEntry> = rand::seq::index::sample(rng, geometry.channels, geometry.active)
        .into_iter()
        .map(|c| PatternEntry {
            channel: c as u32,
            bin: 0,
        })
        .collect();
    entries.sort_unstable();
    for e in &mut entries {
        e.bin = rng.random_range(0..bins);
    }
    Ok(CyclicPattern { geometry, entries })
}

/// Exact `C(n, k)`.
pub fn binomial(n: usize, k: usize) -> BigUint {
    if k > n {
        return BigUint::ZERO;
    }
    let k = k.min(n - k);
    let mut acc = BigUint::one();
    for i in 0..k {
        acc *= n - i;
        acc /= i + 1;
    }
    acc
}

/// `log2` of an arbitrary-precision integer, accurate to f64 precision.
pub fn log2_big(x: &BigUint) -> f64 {
    let bits = x.bits();
    if bits == 0 {
        return f64::NEG_INFINITY;
    }
    if bits <= 64 {
        return x.to_u64().map(|v| (v as f64).log2()).unwrap_or(f64::NAN);
    }
    let shift = bits - 64;
    let top = (x >> shift).to_u64().unwrap_or(u64::MAX);
    (top as f64).log2() + shift as f64
}

/// Coarse information content of one codeword in bits: spatial choice of `N`
/// of `M` channels plus `log2(T / T_bin)` bits of phase per active channel.
pub fn info_content(channels: usize, active: usize, cycle_ms: f64, bin_ms: f64) -> Result<f64> {
    let g = PatternGeometry::new(channels, active, cycle_ms, bin_ms)?;
    let spatial = log2_big(&binomial(g.channels, g.active));
    let temporal = g.active as f64 * (g.bins() as f64).log2();
    Ok(spatial + temporal)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SpikeKind {
    Signal,
    Noise,
    Teacher,
}

impl SpikeKind {
    pub fn as_str(self) -> &'static str {
        match self {
            SpikeKind::Signal => "signal",
            SpikeKind::Noise => "noise",
            SpikeKind::Teacher => "teacher",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpikeEvent {
    pub channel: u32,
    pub time_ms: f64,
    pub kind: SpikeKind,
}

impl SpikeEvent {
    pub fn signal(channel: u32, time_ms: f64) -> Self {
        SpikeEvent {
            channel,
            time_ms,
            kind: SpikeKind::Signal,
        }
    }
}

fn sort_events(events: &mut [SpikeEvent]) {
    events.sort_by(|a, b| a.time_ms.total_cmp(&b.time_ms).then(a.channel.cmp(&b.channel)));
}

/// Repeats `pattern` for `n_cycles` cycles starting at `t_start`, sorted by time.
pub fn render_cycles(pattern: &CyclicPattern, n_cycles: usize, t_start: f64) -> Vec<SpikeEvent> {
    let g = pattern.geometry();
    let mut out = Vec::with_capacity(n_cycles * pattern.entries().len());
    for k in 0..n_cycles {
        let base = t_start + k as f64 * g.cycle_ms;
        for e in pattern.entries() {
            out.push(SpikeEvent::signal(e.channel, base + pattern.phase_ms(e)));
        }
    }
    sort_events(&mut out);
    out
}

/// Background noise and timing jitter.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct NoiseSpec {
    /// Background Poisson rate per channel, Hz.
    pub poisson_rate: f64,
    /// Standard deviation of the zero-mean Gaussian shift of each signal spike, ms.
    pub jitter_sigma: f64,
}

impl NoiseSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.poisson_rate >= 0.0 && self.poisson_rate.is_finite()) {
            return Err(Error::param("poisson_rate", "must be finite and >= 0"));
        }
        if !(self.jitter_sigma >= 0.0 && self.jitter_sigma.is_finite()) {
            return Err(Error::param("jitter_sigma", "must be finite and >= 0"));
        }
        Ok(())
    }

    pub fn is_clean(&self) -> bool {
        self.poisson_rate == 0.0 && self.jitter_sigma == 0.0
    }
}

/// Jitters every signal spike independently and overlays Poisson noise on each
/// of `channels` channels over `[0, t_end)`. Provenance tags are preserved.
pub fn apply_noise<R: Rng + ?Sized>(
    events: &[SpikeEvent],
    spec: &NoiseSpec,
    t_end: f64,
    channels: usize,
    rng: &mut R,
) -> Vec<SpikeEvent> {
    let mut out = events.to_vec();
    if spec.is_clean() {
        return out;
    }
    let upper = if t_end > 0.0 { t_end.next_down() } else { 0.0 };
    if spec.jitter_sigma > 0.0 {
        let normal = Normal::new(0.0, spec.jitter_sigma).expect("sigma checked positive");
        for ev in out.iter_mut().filter(|e| e.kind == SpikeKind::Signal) {
            let shifted = ev.time_ms + normal.sample(rng);
            ev.time_ms = shifted.clamp(0.0, upper);
        }
    }
    if spec.poisson_rate > 0.0 && t_end > 0.0 {
        let per_ms = spec.poisson_rate / 1000.0;
        let gap = Exp::new(per_ms).expect("rate checked positive");
        for channel in 0..channels as u32 {
            let mut t = gap.sample(rng);
            while t < t_end {
                out.push(SpikeEvent {
                    channel,
                    time_ms: t,
                    kind: SpikeKind::Noise,
                });
                t += gap.sample(rng);
            }
        }
    }
    sort_events(&mut out);
    out
}

/// Writes a `channel,time_ms,kind` raster.
pub fn write_raster<W: Write>(events: &[SpikeEvent], mut w: W) -> io::Result<()> {
    writeln!(w, "channel,time_ms,kind")?;
    for e in events {
        writeln!(w, "{},{},{}", e.channel, e.time_ms, e.kind.as_str())?;
    }
    Ok(())
}

/// Reads a raster written by [`write_raster`], skipping `#` comment lines.
pub fn read_raster<R: BufRead>(r: R) -> Result<Vec<SpikeEvent>> {
    let mut out = Vec::new();
    for (i, line) in r.lines().enumerate() {
        let line = line.map_err(|e| Error::Parse {
            line: i + 1,
            reason: e.to_string(),
        })?;
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') || line.starts_with("channel,") {
            continue;
        }
        let bad = |reason: &str| Error::Parse {
            line: i + 1,
            reason: reason.to_string(),
        };
        let mut parts = line.split(',');
        let channel = parts
            .next()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| bad("channel"))?;
        let time_ms = parts
            .next()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| bad("time_ms"))?;
        let kind = match parts.next() {
            Some("signal") => SpikeKind::Signal,
            Some("noise") => SpikeKind::Noise,
            Some("teacher") => SpikeKind::Teacher,
            _ => return Err(bad("kind")),
        };
        out.push(SpikeEvent { channel, time_ms, kind });
    }
    Ok(out)
}
