//! Statistics extracted from time tags: correlation histograms normalised to
//! cross-window accidentals, heralded autocorrelation, rates and brightness.
//!
//! Everything is accumulated per cycle into integer counts and merged, so
//! results do not depend on how the stream is chunked.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{config, Error, Result};
use crate::source::WindowSchedule;
use crate::tags::{Detector, TagRecord, TagStream};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AnalysisConfig {
    #[serde(default)]
    pub schedule: WindowSchedule,
    #[serde(default = "default_bin")]
    pub bin_ps: i64,
    /// Histogram covers `[-span, span)`.
    #[serde(default = "default_span")]
    pub span_ps: i64,
    /// Coincidence gate on the S→AS delay: `[gate_start, gate_start + gate)`.
    #[serde(default)]
    pub gate_start_ps: i64,
    #[serde(default = "default_gate")]
    pub gate_ps: i64,
    /// Accidentals pair window `i` with windows `i ± 1 … i ± shifts`.
    #[serde(default = "default_shifts")]
    pub accidental_shifts: u32,
    /// Largest trigger offset of the heralded histogram.
    #[serde(default = "default_nmax")]
    pub herald_nmax: u32,
    /// Number of recorded cycles; inferred from the stream when `None`.
    #[serde(default)]
    pub cycles: Option<u32>,
}

fn default_bin() -> i64 {
    4_000
}
fn default_span() -> i64 {
    400_000
}
fn default_gate() -> i64 {
    24_000
}
fn default_shifts() -> u32 {
    10
}
fn default_nmax() -> u32 {
    10
}

impl Default for AnalysisConfig {
    fn default() -> Self {
        Self {
            schedule: WindowSchedule::default(),
            bin_ps: default_bin(),
            span_ps: default_span(),
            gate_start_ps: 0,
            gate_ps: default_gate(),
            accidental_shifts: default_shifts(),
            herald_nmax: default_nmax(),
            cycles: None,
        }
    }
}

impl AnalysisConfig {
    pub fn validate(&self) -> Result<()> {
        self.schedule.validate()?;
        if self.bin_ps <= 0 || self.span_ps <= 0 || self.span_ps % self.bin_ps != 0 {
            return Err(config("span must be a positive multiple of the bin"));
        }
        if self.gate_ps <= 0 {
            return Err(config("gate must be positive"));
        }
        if self.accidental_shifts == 0 {
            return Err(config("need at least one accidental shift"));
        }
        Ok(())
    }

    pub fn bins(&self) -> usize {
        (2 * self.span_ps / self.bin_ps) as usize
    }

    fn cycles_of(&self, stream: &TagStream) -> u32 {
        self.cycles.unwrap_or_else(|| stream.cycles())
    }

    /// Distinct-window pairs per cycle used for accidentals.
    fn diff_pairs_per_cycle(&self) -> u64 {
        let n = self.schedule.selected().len() as u64;
        (1..=self.accidental_shifts as u64)
            .map(|k| 2 * n.saturating_sub(k))
            .sum()
    }
}

/// Which detectors start and stop a correlation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Correlation {
    /// S (both sub-detectors) start, AS stop.
    Cross,
    /// S1 start, S2 stop.
    AutoStokes,
    /// AS1 start, AS2 stop.
    AutoAntiStokes,
}

impl Correlation {
    fn start(self, d: Detector) -> bool {
        match self {
            Correlation::Cross => d.is_stokes(),
            Correlation::AutoStokes => d == Detector::S1,
            Correlation::AutoAntiStokes => d == Detector::AS1,
        }
    }

    fn stop(self, d: Detector) -> bool {
        match self {
            Correlation::Cross => !d.is_stokes(),
            Correlation::AutoStokes => d == Detector::S2,
            Correlation::AutoAntiStokes => d == Detector::AS2,
        }
    }
}

/// Additive raw counts behind a [`CorrelationHistogram`].
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CorrelationCounts {
    pub bin_ps: i64,
    pub span_ps: i64,
    /// Same-window coincidences.
    pub same: Vec<u64>,
    /// Distinct-window coincidences.
    pub diff: Vec<u64>,
    pub same_pairs: u64,
    pub diff_pairs: u64,
    pub starts: u64,
    pub stops: u64,
}

impl CorrelationCounts {
    pub fn empty(cfg: &AnalysisConfig) -> Self {
        Self {
            bin_ps: cfg.bin_ps,
            span_ps: cfg.span_ps,
            same: vec![0; cfg.bins()],
            diff: vec![0; cfg.bins()],
            same_pairs: 0,
            diff_pairs: 0,
            starts: 0,
            stops: 0,
        }
    }

    pub fn merge(mut self, other: &Self) -> Self {
        for (a, b) in self.same.iter_mut().zip(&other.same) {
            *a += b;
        }
        for (a, b) in self.diff.iter_mut().zip(&other.diff) {
            *a += b;
        }
        self.same_pairs += other.same_pairs;
        self.diff_pairs += other.diff_pairs;
        self.starts += other.starts;
        self.stops += other.stops;
        self
    }

    fn add(hist: &mut [u64], starts: &[i64], stops: &[i64], offset: i64, span: i64, bin: i64) {
        for &a in starts {
            for &b in stops {
                let d = b - a + offset;
                if d >= -span && d < span {
                    hist[((d + span) / bin) as usize] += 1;
                }
            }
        }
    }

    /// Normalise; `None` marks bins without accidentals.
    pub fn finish(&self) -> Result<CorrelationHistogram> {
        if self.starts == 0 || self.stops == 0 {
            return Err(Error::Undefined("a correlated channel has no events".into()));
        }
        if self.diff_pairs == 0 {
            return Err(Error::Statistics("need ≥ 2 windows for accidentals".into()));
        }
        let scale = self.same_pairs as f64 / self.diff_pairs as f64;
        let n = self.same.len();
        let edges_ps = (0..=n as i64).map(|j| -self.span_ps + j * self.bin_ps).collect();
        let accidentals: Vec<f64> = self.diff.iter().map(|&d| d as f64 * scale).collect();
        let mut g2 = Vec::with_capacity(n);
        let mut error = Vec::with_capacity(n);
        for (&c, &d) in self.same.iter().zip(&self.diff) {
            if d == 0 {
                g2.push(None);
                error.push(None);
                continue;
            }
            let acc = d as f64 * scale;
            let g = c as f64 / acc;
            let rel_c = if c > 0 { 1.0 / c as f64 } else { 0.0 };
            let e = if c > 0 { g * (rel_c + 1.0 / d as f64).sqrt() } else { 1.0 / acc };
            g2.push(Some(g));
            error.push(Some(e));
        }
        Ok(CorrelationHistogram { edges_ps, counts: self.same.clone(), accidentals, g2, error })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrelationHistogram {
    pub edges_ps: Vec<i64>,
    pub counts: Vec<u64>,
    /// Scaled distinct-window coincidences.
    pub accidentals: Vec<f64>,
    pub g2: Vec<Option<f64>>,
    /// Propagated Poisson error.
    pub error: Vec<Option<f64>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Peak {
    /// Bin centre (ps).
    pub tau_ps: f64,
    pub g2: f64,
    pub error: f64,
    /// Maximum of the 3-bin running mean.
    pub smoothed: f64,
}

impl CorrelationHistogram {
    pub fn centre_ps(&self, j: usize) -> f64 {
        0.5 * (self.edges_ps[j] + self.edges_ps[j + 1]) as f64
    }

    /// Bin holding delay `tau_ps`.
    pub fn bin_of(&self, tau_ps: i64) -> Option<usize> {
        let j = self.edges_ps.partition_point(|&e| e <= tau_ps);
        (j >= 1 && j < self.edges_ps.len()).then(|| j - 1)
    }

    pub fn peak(&self) -> Option<Peak> {
        let (j, g) = self
            .g2
            .iter()
            .enumerate()
            .filter_map(|(j, g)| g.map(|g| (j, g)))
            .fold(None, |best: Option<(usize, f64)>, (j, g)| match best {
                Some((_, bg)) if bg >= g => best,
                _ => Some((j, g)),
            })?;
        let smoothed = (1..self.g2.len().saturating_sub(1))
            .filter_map(|k| {
                let w = [self.g2[k - 1]?, self.g2[k]?, self.g2[k + 1]?];
                Some(w.iter().sum::<f64>() / 3.0)
            })
            .fold(f64::NAN, f64::max);
        Some(Peak { tau_ps: self.centre_ps(j), g2: g, error: self.error[j].unwrap_or(f64::NAN), smoothed })
    }

    /// `(g², σ)` of the bin containing `tau_ps`.
    pub fn at(&self, tau_ps: i64) -> Option<(f64, f64)> {
        let j = self.bin_of(tau_ps)?;
        Some((self.g2[j]?, self.error[j]?))
    }

    pub fn write_csv<W: std::io::Write>(&self, w: W) -> Result<()> {
        let mut wr = csv::Writer::from_writer(w);
        wr.write_record(["tau_lo_ps", "tau_hi_ps", "counts", "accidentals", "g2", "g2_err"])
            .map_err(|e| Error::Parse { line: 0, msg: e.to_string() })?;
        for j in 0..self.counts.len() {
            let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
            wr.write_record([
                self.edges_ps[j].to_string(),
                self.edges_ps[j + 1].to_string(),
                self.counts[j].to_string(),
                self.accidentals[j].to_string(),
                opt(self.g2[j]),
                opt(self.error[j]),
            ])
            .map_err(|e| Error::Parse { line: j + 2, msg: e.to_string() })?;
        }
        wr.flush()?;
        Ok(())
    }
}

/// Event times of one cycle relative to their window start, per window.
struct CycleWindows {
    /// Indexed by window minus the first selected window.
    windows: Vec<[Vec<i64>; 4]>,
}

impl CycleWindows {
    fn build(records: &[TagRecord], cfg: &AnalysisConfig) -> Self {
        let sel = cfg.schedule.selected();
        let mut windows: Vec<[Vec<i64>; 4]> = (0..sel.len()).map(|_| Default::default()).collect();
        for r in records {
            if !sel.contains(&r.window) {
                continue;
            }
            let t = r.time_ps - cfg.schedule.window_start_ps(r.cycle, r.window);
            windows[(r.window - sel.start) as usize][r.channel.index()].push(t);
        }
        Self { windows }
    }

    fn collect(&self, w: usize, pick: impl Fn(Detector) -> bool) -> Vec<i64> {
        let mut v: Vec<i64> = Detector::ALL
            .iter()
            .filter(|d| pick(**d))
            .flat_map(|d| self.windows[w][d.index()].iter().copied())
            .collect();
        v.sort_unstable();
        v
    }
}

fn correlate_cycle(records: &[TagRecord], cfg: &AnalysisConfig, kind: Correlation) -> CorrelationCounts {
    let cw = CycleWindows::build(records, cfg);
    let n = cw.windows.len();
    let starts: Vec<Vec<i64>> = (0..n).map(|w| cw.collect(w, |d| kind.start(d))).collect();
    let stops: Vec<Vec<i64>> = (0..n).map(|w| cw.collect(w, |d| kind.stop(d))).collect();
    let mut c = CorrelationCounts::empty(cfg);
    let (span, bin) = (cfg.span_ps, cfg.bin_ps);
    for w in 0..n {
        c.starts += starts[w].len() as u64;
        c.stops += stops[w].len() as u64;
        CorrelationCounts::add(&mut c.same, &starts[w], &stops[w], 0, span, bin);
        if starts[w].is_empty() {
            continue;
        }
        for k in 1..=cfg.accidental_shifts as usize {
            if w + k < n {
                CorrelationCounts::add(&mut c.diff, &starts[w], &stops[w + k], 0, span, bin);
            }
            if w >= k {
                CorrelationCounts::add(&mut c.diff, &starts[w], &stops[w - k], 0, span, bin);
            }
        }
    }
    c
}

fn cycles(records: &[TagRecord]) -> Vec<&[TagRecord]> {
    records.chunk_by(|a, b| a.cycle == b.cycle).collect()
}

/// Raw counts of one correlation over `records`, which must be whole cycles.
pub fn correlation_counts(records: &[TagRecord], cfg: &AnalysisConfig, kind: Correlation) -> CorrelationCounts {
    let parts: Vec<CorrelationCounts> = cycles(records)
        .into_par_iter()
        .map(|chunk| correlate_cycle(chunk, cfg, kind))
        .collect();
    parts.iter().fold(CorrelationCounts::empty(cfg), |a, b| a.merge(b))
}

fn with_window_pairs(mut c: CorrelationCounts, cfg: &AnalysisConfig, cycles: u32) -> CorrelationCounts {
    c.same_pairs = cfg.schedule.selected().len() as u64 * cycles as u64;
    c.diff_pairs = cfg.diff_pairs_per_cycle() * cycles as u64;
    c
}

pub fn correlation(stream: &TagStream, cfg: &AnalysisConfig, kind: Correlation) -> Result<CorrelationHistogram> {
    cfg.validate()?;
    let c = correlation_counts(&stream.records, cfg, kind);
    with_window_pairs(c, cfg, cfg.cycles_of(stream)).finish()
}

/// S–AS cross-correlation `g²_{S,AS}(τ)`.
pub fn cross_correlation(stream: &TagStream, cfg: &AnalysisConfig) -> Result<CorrelationHistogram> {
    correlation(stream, cfg, Correlation::Cross)
}

/// HBT autocorrelation between the two sub-detectors of one channel.
pub fn auto_correlation(stream: &TagStream, cfg: &AnalysisConfig, stokes: bool) -> Result<CorrelationHistogram> {
    let kind = if stokes { Correlation::AutoStokes } else { Correlation::AutoAntiStokes };
    correlation(stream, cfg, kind)
}

pub use crate::noise_model::cauchy_schwarz;

/// Additive counts of the heralded S1/S2 histogram.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct HeraldedCounts {
    pub nmax: u32,
    /// `C_n` for `n = -nmax ..= nmax`.
    pub counts: Vec<u64>,
    pub triggers: u64,
}

impl HeraldedCounts {
    pub fn empty(nmax: u32) -> Self {
        Self { nmax, counts: vec![0; 2 * nmax as usize + 1], triggers: 0 }
    }

    pub fn merge(mut self, o: &Self) -> Self {
        for (a, b) in self.counts.iter_mut().zip(&o.counts) {
            *a += b;
        }
        self.triggers += o.triggers;
        self
    }

    pub fn finish(&self) -> Result<HeraldedHistogram> {
        let nmax = self.nmax as i64;
        let side: Vec<(f64, f64)> = (-nmax..=nmax)
            .filter(|&n| n != 0)
            .map(|n| (n as f64, self.counts[(n + nmax) as usize] as f64))
            .collect();
        if side.iter().filter(|(_, c)| *c > 0.0).count() < 2 {
            return Err(Error::Statistics("fewer than two populated side bins".into()));
        }
        // Weighted straight line through the n ≠ 0 bins, evaluated at 0.
        let (mut sw, mut sx, mut sy, mut sxx, mut sxy) = (0.0, 0.0, 0.0, 0.0, 0.0);
        for &(x, y) in &side {
            let w = 1.0 / y.max(1.0);
            sw += w;
            sx += w * x;
            sy += w * y;
            sxx += w * x * x;
            sxy += w * x * y;
        }
        let det = sw * sxx - sx * sx;
        let intercept = (sxx * sy - sx * sxy) / det;
        let slope = (sw * sxy - sx * sy) / det;
        let intercept_err = (sxx / det).sqrt();
        let zero = self.counts[self.nmax as usize];
        if !(intercept > 0.0) {
            return Err(Error::Statistics("non-positive baseline".into()));
        }
        let g2 = zero as f64 / intercept;
        let rel = ((zero.max(1)) as f64).sqrt() / intercept;
        let g2_err = (rel * rel + (g2 * intercept_err / intercept).powi(2)).sqrt();
        Ok(HeraldedHistogram {
            n: (-nmax..=nmax).collect(),
            counts: self.counts.clone(),
            zero,
            baseline: (intercept, slope),
            g2,
            g2_err,
            triggers: self.triggers,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HeraldedHistogram {
    pub n: Vec<i64>,
    pub counts: Vec<u64>,
    /// The `n = 0` count, excluded from the fit.
    pub zero: u64,
    /// Linear fit `(intercept, slope)` over `n ≠ 0`.
    pub baseline: (f64, f64),
    pub g2: f64,
    pub g2_err: f64,
    pub triggers: u64,
}

fn count_in(sorted: &[i64], lo: i64, hi: i64) -> u64 {
    (sorted.partition_point(|&t| t < hi) - sorted.partition_point(|&t| t < lo)) as u64
}

fn herald_cycle(records: &[TagRecord], cfg: &AnalysisConfig) -> HeraldedCounts {
    let sel = cfg.schedule.selected();
    let pick = |d: Detector| -> Vec<i64> {
        records
            .iter()
            .filter(|r| r.channel == d && sel.contains(&r.window))
            .map(|r| r.time_ps)
            .collect()
    };
    let (s1, s2) = (pick(Detector::S1), pick(Detector::S2));
    let mut heralds: Vec<i64> = records
        .iter()
        .filter(|r| !r.channel.is_stokes() && sel.contains(&r.window))
        .map(|r| r.time_ps)
        .collect();
    heralds.sort_unstable();
    let (g0, g1) = (cfg.gate_start_ps, cfg.gate_start_ps + cfg.gate_ps);
    let c1: Vec<u64> = heralds.iter().map(|&t| count_in(&s1, t - g1 + 1, t - g0 + 1)).collect();
    let c2: Vec<u64> = heralds.iter().map(|&t| count_in(&s2, t - g1 + 1, t - g0 + 1)).collect();
    let nmax = cfg.herald_nmax as i64;
    let mut h = HeraldedCounts::empty(cfg.herald_nmax);
    h.triggers = heralds.len() as u64;
    let m = heralds.len() as i64;
    for i in 0..m {
        if c1[i as usize] == 0 {
            continue;
        }
        for n in -nmax..=nmax {
            let j = i + n;
            if j >= 0 && j < m {
                h.counts[(n + nmax) as usize] += c1[i as usize] * c2[j as usize];
            }
        }
    }
    h
}

/// Heralded autocorrelation `g²_{S,S|AS}(0)`.
///
/// Each AS event is a trigger; `c1[i]`, `c2[i]` count S1/S2 events inside
/// the gate preceding it. `C_n = Σ_i c1[i]·c2[i+n]`; the zero bin is
/// normalised to the linear fit of the `n ≠ 0` bins at `n = 0`.
pub fn heralded_autocorrelation(stream: &TagStream, cfg: &AnalysisConfig) -> Result<HeraldedHistogram> {
    cfg.validate()?;
    heralded_counts(&stream.records, cfg).finish()
}

pub fn heralded_counts(records: &[TagRecord], cfg: &AnalysisConfig) -> HeraldedCounts {
    let parts: Vec<HeraldedCounts> = cycles(records)
        .into_par_iter()
        .map(|c| herald_cycle(c, cfg))
        .collect();
    parts.iter().fold(HeraldedCounts::empty(cfg.herald_nmax), |a, b| a.merge(b))
}

/// Inputs needed to turn detected counts into generated brightness.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RateCorrections {
    pub t_s: f64,
    pub t_as: f64,
    /// Background rates during SFWM windows (1/s).
    #[serde(default)]
    pub background_s: f64,
    #[serde(default)]
    pub background_as: f64,
    /// Overrides the schedule's duty cycle.
    #[serde(default)]
    pub duty_cycle: Option<f64>,
    #[serde(default)]
    pub bandwidth_mhz: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RateReport {
    /// Wall-clock duration of the record (s).
    pub wall_time: f64,
    pub duty_cycle: f64,
    /// Detected singles per wall-clock second.
    pub singles_s: f64,
    pub singles_as: f64,
    pub singles_s_bs: f64,
    pub singles_as_bs: f64,
    /// Coincidences in the gate and their accidental estimate.
    pub coincidences: u64,
    pub accidentals: f64,
    /// Background-subtracted pair rate, per wall-clock second.
    pub pair_rate: f64,
    pub pair_rate_err: f64,
    /// Pair rate during SFWM windows.
    pub pair_rate_corrected: f64,
    /// Generated pairs/s during windows, corrected for detection.
    pub generated_rate: f64,
    pub gsb: f64,
    pub gsb_err: f64,
    pub heralding_efficiency: f64,
}

pub fn rates_and_gsb(stream: &TagStream, cfg: &AnalysisConfig, corr: &RateCorrections) -> Result<RateReport> {
    cfg.validate()?;
    let bandwidth = corr
        .bandwidth_mhz
        .ok_or_else(|| config("a bandwidth (MHz) is required for GSB"))?;
    if !(bandwidth > 0.0) {
        return Err(config("bandwidth must be positive"));
    }
    let duty = corr.duty_cycle.unwrap_or_else(|| cfg.schedule.duty_cycle());
    if !(duty > 0.0) {
        return Err(config("duty cycle is zero"));
    }
    if !(corr.t_s > 0.0 && corr.t_as > 0.0) {
        return Err(Error::NonPhysical("efficiencies must be positive".into()));
    }
    let cycles = cfg.cycles_of(stream).max(1);
    let wall_time = cycles as f64 * cfg.schedule.cycle_period;
    let acquisition = wall_time * duty;
    let sel = cfg.schedule.selected();
    let (mut ns, mut nas) = (0u64, 0u64);
    for r in stream.records.iter().filter(|r| sel.contains(&r.window)) {
        if r.channel.is_stokes() {
            ns += 1;
        } else {
            nas += 1;
        }
    }
    let gated = AnalysisConfig {
        bin_ps: cfg.gate_ps,
        span_ps: cfg.gate_ps,
        ..*cfg
    };
    // One bin [0, gate) after shifting starts by the gate offset.
    let shifted = TagStream {
        records: stream
            .records
            .iter()
            .map(|r| if r.channel.is_stokes() { TagRecord { time_ps: r.time_ps + cfg.gate_start_ps, ..*r } } else { *r })
            .collect(),
    };
    let counts = with_window_pairs(correlation_counts(&shifted.records, &gated, Correlation::Cross), &gated, cycles);
    let scale = counts.same_pairs as f64 / counts.diff_pairs.max(1) as f64;
    let coincidences = counts.same[1];
    let accidentals = counts.diff[1] as f64 * scale;
    let bs = (coincidences as f64 - accidentals).max(0.0);
    let bs_err = (coincidences as f64 + counts.diff[1] as f64 * scale * scale).sqrt();
    let singles_s_bs = ((ns as f64 - corr.background_s * acquisition) / wall_time).max(0.0);
    let singles_as_bs = ((nas as f64 - corr.background_as * acquisition) / wall_time).max(0.0);
    let pair_rate = bs / wall_time;
    let pair_rate_corrected = pair_rate / duty;
    let generated_rate = pair_rate_corrected / (corr.t_s * corr.t_as);
    let gsb = generated_rate / bandwidth;
    let gsb_err = bs_err / wall_time / duty / (corr.t_s * corr.t_as) / bandwidth;
    let heralding_efficiency = if singles_as_bs > 0.0 { pair_rate / (corr.t_s * singles_as_bs) } else { 0.0 };
    Ok(RateReport {
        wall_time,
        duty_cycle: duty,
        singles_s: ns as f64 / wall_time,
        singles_as: nas as f64 / wall_time,
        singles_s_bs,
        singles_as_bs,
        coincidences,
        accidentals,
        pair_rate,
        pair_rate_err: bs_err / wall_time,
        pair_rate_corrected,
        generated_rate,
        gsb,
        gsb_err,
        heralding_efficiency,
    })
}

/// One point of a power sweep: pump power (W), GSB and its 1σ error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GsbPoint {
    pub pump: f64,
    pub gsb: f64,
    pub gsb_err: f64,
}

/// Weighted least-squares slope through the origin, `GSB = GSBP·P`.
///
/// Returns `(GSBP, σ)`; σ is inflated by √χ²_red when the scatter exceeds
/// the quoted errors.
pub fn fit_gsbp(points: &[GsbPoint]) -> Result<(f64, f64)> {
    if points.len() < 2 {
        return Err(Error::Fit("need ≥ 2 power points".into()));
    }
    if points.iter().any(|p| !(p.gsb_err > 0.0) || !(p.pump > 0.0)) {
        return Err(Error::Fit("every point needs P > 0 and a positive error".into()));
    }
    let (mut spp, mut spg) = (0.0, 0.0);
    for p in points {
        let w = 1.0 / (p.gsb_err * p.gsb_err);
        spp += w * p.pump * p.pump;
        spg += w * p.pump * p.gsb;
    }
    let slope = spg / spp;
    let chi2: f64 = points.iter().map(|p| ((p.gsb - slope * p.pump) / p.gsb_err).powi(2)).sum();
    let red = chi2 / (points.len() - 1) as f64;
    Ok((slope, (1.0 / spp).sqrt() * red.max(1.0).sqrt()))
}

/// Everything `analyze` reports for one stream.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnalysisReport {
    pub cross: CorrelationHistogram,
    pub cross_peak: Option<Peak>,
    pub auto_s: Option<CorrelationHistogram>,
    pub auto_as: Option<CorrelationHistogram>,
    pub auto_s_zero: Option<(f64, f64)>,
    pub auto_as_zero: Option<(f64, f64)>,
    pub cauchy_schwarz: Option<(f64, f64)>,
    pub heralded: Option<HeraldedHistogram>,
    pub rates: Option<RateReport>,
}

/// Bin-0 autocorrelation `[0, bin)`.
fn zero_delay(h: &CorrelationHistogram) -> Option<(f64, f64)> {
    h.at(0)
}

pub fn analyze(stream: &TagStream, cfg: &AnalysisConfig, corr: Option<&RateCorrections>) -> Result<AnalysisReport> {
    let cross = cross_correlation(stream, cfg)?;
    let cross_peak = cross.peak();
    let auto_s = auto_correlation(stream, cfg, true).ok();
    let auto_as = auto_correlation(stream, cfg, false).ok();
    let auto_s_zero = auto_s.as_ref().and_then(zero_delay);
    let auto_as_zero = auto_as.as_ref().and_then(zero_delay);
    let cauchy_schwarz = match (cross_peak, auto_s_zero, auto_as_zero) {
        (Some(p), Some(s), Some(a)) => cauchy_schwarz((p.g2, p.error), s, a).ok(),
        _ => None,
    };
    let heralded = heralded_autocorrelation(stream, cfg).ok();
    let rates = match corr {
        Some(c) => Some(rates_and_gsb(stream, cfg, c)?),
        None => None,
    };
    Ok(AnalysisReport { cross, cross_peak, auto_s, auto_as, auto_s_zero, auto_as_zero, cauchy_schwarz, heralded, rates })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gsbp_fit_exact_line() {
        let pts: Vec<GsbPoint> = (1..=5)
            .map(|i| GsbPoint { pump: i as f64 * 1e-8, gsb: 312e9 * i as f64 * 1e-8, gsb_err: 10.0 })
            .collect();
        let (s, e) = fit_gsbp(&pts).unwrap();
        assert!((s / 312e9 - 1.0).abs() < 1e-12);
        assert!(e > 0.0);
        assert!(fit_gsbp(&pts[..1]).is_err());
    }

    #[test]
    fn heralded_fit_flat_baseline() {
        let mut h = HeraldedCounts::empty(3);
        h.counts = vec![100, 100, 100, 50, 100, 100, 100];
        let r = h.finish().unwrap();
        assert!((r.g2 - 0.5).abs() < 1e-12);
        let mut sparse = HeraldedCounts::empty(3);
        sparse.counts[0] = 5;
        assert!(matches!(sparse.finish(), Err(Error::Statistics(_))));
    }

    #[test]
    fn missing_bandwidth_is_reported() {
        let corr = RateCorrections { t_s: 0.1, t_as: 0.1, background_s: 0.0, background_as: 0.0, duty_cycle: None, bandwidth_mhz: None };
        let r = rates_and_gsb(&TagStream::default(), &AnalysisConfig::default(), &corr);
        assert!(matches!(r, Err(Error::Config(_))));
        let zero = RateCorrections { duty_cycle: Some(0.0), bandwidth_mhz: Some(6.5), ..corr };
        assert!(matches!(rates_and_gsb(&TagStream::default(), &AnalysisConfig::default(), &zero), Err(Error::Config(_))));
    }

    #[test]
    fn empty_channel_is_undefined() {
        let cfg = AnalysisConfig { cycles: Some(1), ..Default::default() };
        assert!(matches!(cross_correlation(&TagStream::default(), &cfg), Err(Error::Undefined(_))));
    }
}
