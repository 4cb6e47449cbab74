//! Monte Carlo generator of detector time tags for a windowed pair source.
//!
//! Every cycle draws from its own ChaCha substream, so output depends only on
//! the seed and not on how cycles are distributed over threads.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Geometric, Poisson};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::ops::Range;

use crate::error::{config, Error, Result};
use crate::noise_model::ChannelModel;
use crate::spectrum::BiphotonWaveform;
use crate::tags::{sort_records, Detector, TagRecord, TagStream};

/// Timing of the SFWM windows inside one experimental cycle.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WindowSchedule {
    /// SFWM window length (s).
    pub window: f64,
    /// Trap-off period (s).
    pub fort_off: f64,
    /// Trap-on period (s).
    pub fort_on: f64,
    /// Start of the window inside the trap-off period (s).
    pub window_offset: f64,
    pub windows_per_cycle: u32,
    /// Full cycle including MOT loading (s).
    pub cycle_period: f64,
    /// Post-selected window indices `[first, last)`; all if `None`.
    #[serde(default)]
    pub selection: Option<(u32, u32)>,
}

impl Default for WindowSchedule {
    fn default() -> Self {
        Self {
            window: 1.2e-6,
            fort_off: 2.4e-6,
            fort_on: 1.6e-6,
            window_offset: 0.6e-6,
            windows_per_cycle: 3500,
            cycle_period: 8.4,
            selection: None,
        }
    }
}

impl WindowSchedule {
    pub fn validate(&self) -> Result<()> {
        if !(self.window > 0.0) || !(self.fort_off > 0.0) || self.fort_on < 0.0 || self.window_offset < 0.0 {
            return Err(config("window and trap periods must be positive"));
        }
        if self.window_offset + self.window > self.fort_off * (1.0 + 1e-12) {
            return Err(config("SFWM window does not fit into the trap-off period"));
        }
        if self.cycle_period < self.sequence_duration() {
            return Err(config("cycle period shorter than the window sequence"));
        }
        if let Some((a, b)) = self.selection {
            if a > b || b > self.windows_per_cycle {
                return Err(config(format!("window selection {a}..{b} out of range")));
            }
        }
        Ok(())
    }

    /// Window repetition period (s).
    pub fn period(&self) -> f64 {
        self.fort_off + self.fort_on
    }

    pub fn sequence_duration(&self) -> f64 {
        self.windows_per_cycle as f64 * self.period()
    }

    /// Window start relative to the cycle start (s).
    pub fn window_start(&self, i: u32) -> f64 {
        self.window_offset + i as f64 * self.period()
    }

    pub fn window_start_ps(&self, cycle: u32, i: u32) -> i64 {
        cycle as i64 * to_ps(self.cycle_period) + to_ps(self.window_start(i))
    }

    pub fn selected(&self) -> Range<u32> {
        match self.selection {
            Some((a, b)) => a..b,
            None => 0..self.windows_per_cycle,
        }
    }

    /// Selected SFWM time over total cycle time.
    pub fn duty_cycle(&self) -> f64 {
        self.selected().len() as f64 * self.window / self.cycle_period
    }
}

pub fn duty_cycle(schedule: &WindowSchedule) -> f64 {
    schedule.duty_cycle()
}

/// Exponential decay of the optical depth after release.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OdDecay {
    pub od0: f64,
    /// Time constant (s).
    pub tau: f64,
}

impl Default for OdDecay {
    fn default() -> Self {
        Self { od0: 155.0, tau: 3.2e-3 }
    }
}

impl OdDecay {
    pub fn at(&self, t: f64) -> f64 {
        self.od0 * (-t / self.tau).exp()
    }

    /// Windows whose starting OD lies in `[lo, hi]`.
    pub fn windows_in_range(&self, schedule: &WindowSchedule, lo: f64, hi: f64) -> Range<u32> {
        let inside: Vec<u32> = (0..schedule.windows_per_cycle)
            .filter(|&i| {
                let od = self.at(schedule.window_start(i));
                od >= lo && od <= hi
            })
            .collect();
        match (inside.first(), inside.last()) {
            (Some(&a), Some(&b)) => a..b + 1,
            _ => 0..0,
        }
    }
}

/// Pair-rate dependence on the instantaneous OD.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RateMap {
    /// Rate ∝ OD, equal to `pair_rate` at `od0`.
    #[default]
    Proportional,
    Constant,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WindowOd {
    pub window: u32,
    pub od: f64,
    pub rate_scale: f64,
}

/// Per-window OD and pair-rate scale of the selected windows.
pub fn od_schedule(cfg: &SourceConfig) -> Vec<WindowOd> {
    cfg.schedule
        .selected()
        .map(|i| {
            let (od, rate_scale) = cfg.od_and_scale(i);
            WindowOd { window: i, od, rate_scale }
        })
        .collect()
}

/// Discrete distribution of the S→AS delay.
///
/// Each entry stands for a bin of `width` centred on `tau`; sampled delays
/// are uniform inside the chosen bin.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DelayTable {
    pub tau: Vec<f64>,
    pub prob: Vec<f64>,
    #[serde(default)]
    pub width: f64,
}

impl DelayTable {
    /// Every pair has delay exactly `tau`.
    pub fn fixed(tau: f64) -> Self {
        Self { tau: vec![tau], prob: vec![1.0], width: 0.0 }
    }

    /// The waveform restricted to `[lo, hi]` and normalised.
    pub fn from_waveform(w: &BiphotonWaveform, lo: f64, hi: f64) -> Result<Self> {
        let cut = w.window(lo, hi);
        let total: f64 = cut.psi2.iter().sum();
        if !(total > 0.0) {
            return Err(config("waveform has no weight in the delay range"));
        }
        Ok(Self {
            width: w.step(),
            prob: cut.psi2.iter().map(|p| p / total).collect(),
            tau: cut.tau,
        })
    }

    pub fn validate(&self) -> Result<()> {
        if self.tau.is_empty() || self.tau.len() != self.prob.len() {
            return Err(config("delay table needs matching, non-empty tau/prob"));
        }
        if self.prob.iter().any(|p| !(*p >= 0.0)) || self.width < 0.0 {
            return Err(config("delay probabilities and bin width must be ≥ 0"));
        }
        let s: f64 = self.prob.iter().sum();
        if (s - 1.0).abs() > 1e-6 {
            return Err(config(format!("delay table sums to {s}, not 1")));
        }
        Ok(())
    }

    fn sampler(&self) -> DelaySampler<'_> {
        let mut acc = 0.0;
        let cdf = self
            .prob
            .iter()
            .map(|p| {
                acc += p;
                acc
            })
            .collect();
        DelaySampler { table: self, cdf }
    }

    pub fn mean(&self) -> f64 {
        self.tau.iter().zip(&self.prob).map(|(t, p)| t * p).sum()
    }
}

struct DelaySampler<'a> {
    table: &'a DelayTable,
    cdf: Vec<f64>,
}

impl DelaySampler<'_> {
    fn sample<R: Rng>(&self, rng: &mut R) -> f64 {
        let u = rng.random::<f64>() * self.cdf.last().copied().unwrap_or(1.0);
        let i = self.cdf.partition_point(|&c| c <= u).min(self.cdf.len() - 1);
        let w = self.table.width;
        if w > 0.0 {
            self.table.tau[i] + (rng.random::<f64>() - 0.5) * w
        } else {
            self.table.tau[i]
        }
    }
}

/// Distribution of the number of pairs emitted in one window.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PairStatistics {
    #[default]
    Poisson,
    /// Bose–Einstein (geometric) per window, a single thermal mode.
    Thermal,
    /// At most one pair: Bernoulli with `p = min(mean, 1)`.
    AtMostOne,
    /// Exactly this many pairs every window.
    Fixed(u32),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SourceConfig {
    /// Pair generation rate (pairs/s) during SFWM windows, at `od0`.
    pub pair_rate: f64,
    #[serde(default)]
    pub statistics: PairStatistics,
    pub delay: DelayTable,
    pub stokes: ChannelModel,
    pub anti_stokes: ChannelModel,
    /// Pump power setting the noise rates (W).
    #[serde(default)]
    pub pump_power: f64,
    /// Fixed extra AS delay from slow light (s).
    #[serde(default)]
    pub as_offset: f64,
    #[serde(default)]
    pub schedule: WindowSchedule,
    #[serde(default)]
    pub od: Option<OdDecay>,
    #[serde(default)]
    pub rate_map: RateMap,
    /// Probability of routing to sub-detector 1.
    #[serde(default = "half")]
    pub split: f64,
    #[serde(default)]
    pub dead_time: f64,
    pub cycles: u32,
    pub seed: u64,
}

fn half() -> f64 {
    0.5
}

impl SourceConfig {
    /// A noiseless, lossless source with a fixed delay and no OD decay.
    pub fn ideal(pair_rate: f64, delay: f64, cycles: u32, seed: u64) -> Self {
        let perfect = ChannelModel { efficiency: 1.0, base_rate: 0.0, slope: 0.0, raman_slope: 0.0 };
        Self {
            pair_rate,
            statistics: PairStatistics::Poisson,
            delay: DelayTable::fixed(delay),
            stokes: perfect,
            anti_stokes: perfect,
            pump_power: 0.0,
            as_offset: 0.0,
            schedule: WindowSchedule::default(),
            od: None,
            rate_map: RateMap::Constant,
            split: 0.5,
            dead_time: 0.0,
            cycles,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.pair_rate >= 0.0) {
            return Err(Error::NonPhysical("pair rate must be ≥ 0".into()));
        }
        self.stokes.validate()?;
        self.anti_stokes.validate()?;
        self.schedule.validate()?;
        self.delay.validate()?;
        if !(0.0..=1.0).contains(&self.split) {
            return Err(config("split must lie in [0, 1]"));
        }
        if self.dead_time < 0.0 || self.pump_power < 0.0 {
            return Err(config("dead time and pump power must be ≥ 0"));
        }
        if let Some(od) = self.od {
            if !(od.od0 > 0.0) || !(od.tau > 0.0) {
                return Err(config("OD decay needs od0 > 0 and tau > 0"));
            }
        }
        Ok(())
    }

    fn od_and_scale(&self, i: u32) -> (f64, f64) {
        match self.od {
            None => (f64::NAN, 1.0),
            Some(d) => {
                let od = d.at(self.schedule.window_start(i));
                let scale = match self.rate_map {
                    RateMap::Proportional => od / d.od0,
                    RateMap::Constant => 1.0,
                };
                (od, scale)
            }
        }
    }

    /// Expected pairs in window `i`.
    pub fn mean_pairs(&self, i: u32) -> f64 {
        self.pair_rate * self.od_and_scale(i).1 * self.schedule.window
    }
}

fn to_ps(t: f64) -> i64 {
    (t * 1e12).round() as i64
}

fn poisson<R: Rng>(mean: f64, rng: &mut R) -> u64 {
    if mean > 0.0 {
        Poisson::new(mean).map(|d| d.sample(rng) as u64).unwrap_or(0)
    } else {
        0
    }
}

fn pair_count<R: Rng>(stats: PairStatistics, mean: f64, rng: &mut R) -> u64 {
    match stats {
        PairStatistics::Poisson => poisson(mean, rng),
        PairStatistics::Thermal => {
            if mean > 0.0 {
                Geometric::new(1.0 / (1.0 + mean)).map(|d| d.sample(rng)).unwrap_or(0)
            } else {
                0
            }
        }
        PairStatistics::AtMostOne => rng.random_bool(mean.clamp(0.0, 1.0)) as u64,
        PairStatistics::Fixed(k) => k as u64,
    }
}

fn generate_cycle(cfg: &SourceConfig, sampler: &DelaySampler, cycle: u32) -> Vec<TagRecord> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    rng.set_stream(cycle as u64);
    let sch = &cfg.schedule;
    let w = sch.window;
    let noise_s = cfg.stokes.noise_rate(cfg.pump_power) * w;
    let noise_as = cfg.anti_stokes.noise_rate(cfg.pump_power) * w;
    let mut out = Vec::new();
    for i in sch.selected() {
        let t0 = sch.window_start_ps(cycle, i);
        let mut push = |rng: &mut ChaCha8Rng, stokes: bool, t: f64| {
            let one = rng.random_bool(cfg.split);
            let channel = match (stokes, one) {
                (true, true) => Detector::S1,
                (true, false) => Detector::S2,
                (false, true) => Detector::AS1,
                (false, false) => Detector::AS2,
            };
            out.push(TagRecord { channel, time_ps: t0 + to_ps(t), window: i, cycle });
        };
        let pairs = pair_count(cfg.statistics, cfg.mean_pairs(i), &mut rng);
        for _ in 0..pairs {
            let ts = rng.random::<f64>() * w;
            let tas = ts + sampler.sample(&mut rng) + cfg.as_offset;
            if rng.random_bool(cfg.stokes.efficiency) {
                push(&mut rng, true, ts);
            }
            if rng.random_bool(cfg.anti_stokes.efficiency) {
                push(&mut rng, false, tas);
            }
        }
        for _ in 0..poisson(noise_s, &mut rng) {
            let t = rng.random::<f64>() * w;
            push(&mut rng, true, t);
        }
        for _ in 0..poisson(noise_as, &mut rng) {
            let t = rng.random::<f64>() * w;
            push(&mut rng, false, t);
        }
    }
    sort_records(&mut out);
    if cfg.dead_time > 0.0 {
        apply_dead_time(&mut out, to_ps(cfg.dead_time));
    }
    out
}

/// Drop tags closer than `dead_ps` to the previous kept tag of the same detector.
pub fn apply_dead_time(records: &mut Vec<TagRecord>, dead_ps: i64) {
    let mut last = [i64::MIN; 4];
    records.retain(|r| {
        let k = r.channel.index();
        if last[k] != i64::MIN && r.time_ps - last[k] < dead_ps {
            false
        } else {
            last[k] = r.time_ps;
            true
        }
    });
}

/// Simulate `cfg.cycles` cycles of the source.
pub fn generate_stream(cfg: &SourceConfig) -> Result<TagStream> {
    cfg.validate()?;
    let sampler = cfg.delay.sampler();
    let parts: Vec<Vec<TagRecord>> = (0..cfg.cycles)
        .into_par_iter()
        .map(|c| generate_cycle(cfg, &sampler, c))
        .collect();
    Ok(TagStream { records: parts.concat() })
}
