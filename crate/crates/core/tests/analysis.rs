use proptest::prelude::*;
use sfwm::analysis::{
    analyze, auto_correlation, correlation_counts, cross_correlation, fit_gsbp, heralded_autocorrelation,
    heralded_counts, rates_and_gsb, AnalysisConfig, Correlation, CorrelationCounts, GsbPoint, HeraldedCounts,
    RateCorrections,
};
use sfwm::noise_model::ChannelModel;
use sfwm::source::{generate_stream, PairStatistics, SourceConfig, WindowSchedule};
use sfwm::tags::TagStream;
use sfwm::Error;

fn short(windows: u32) -> WindowSchedule {
    WindowSchedule { windows_per_cycle: windows, cycle_period: windows as f64 * 4e-6 + 1e-4, ..Default::default() }
}

fn source(windows: u32, cycles: u32, pairs_per_window: f64, seed: u64) -> SourceConfig {
    let mut cfg = SourceConfig::ideal(0.0, 10e-9, cycles, seed);
    cfg.schedule = short(windows);
    cfg.pair_rate = pairs_per_window / cfg.schedule.window;
    cfg
}

fn noise(rate: f64) -> ChannelModel {
    ChannelModel { efficiency: 1.0, base_rate: rate, slope: 0.0, raman_slope: 0.0 }
}

fn analysis(cfg: &SourceConfig, bin_ps: i64, span_ps: i64) -> AnalysisConfig {
    AnalysisConfig { schedule: cfg.schedule, bin_ps, span_ps, cycles: Some(cfg.cycles), ..Default::default() }
}

/// Probability that the difference of two uniform times on `[0, w)` lies in `[lo, hi)`.
fn triangle_mass(lo: f64, hi: f64, w: f64) -> f64 {
    let cdf = |x: f64| {
        let x = x.clamp(-w, w);
        if x < 0.0 {
            (w + x) * (w + x) / (2.0 * w * w)
        } else {
            1.0 - (w - x) * (w - x) / (2.0 * w * w)
        }
    };
    cdf(hi) - cdf(lo)
}

#[test]
fn independent_channels_are_uncorrelated() {
    let mut cfg = source(200, 400, 0.0, 31);
    cfg.stokes = noise(2e5);
    cfg.anti_stokes = noise(2e5);
    let s = generate_stream(&cfg).unwrap();
    let h = cross_correlation(&s, &analysis(&cfg, 60_000, 600_000)).unwrap();
    for (g, e) in h.g2.iter().zip(&h.error) {
        let (g, e) = (g.unwrap(), e.unwrap());
        assert!((g - 1.0).abs() < 3.0 * e, "{g} ± {e}");
    }
}

#[test]
fn rare_pairs_give_a_single_bin_peak() {
    let mu = 0.1;
    let cfg = source(200, 100, mu, 17);
    let s = generate_stream(&cfg).unwrap();
    let h = cross_correlation(&s, &analysis(&cfg, 120_000, 1_200_000)).unwrap();
    let w = 1.2e-6;
    let tau = 10e-9;
    let p = triangle_mass(-tau, 120e-9 - tau, w);
    let oracle = 1.0 + 1.0 / (mu * p);
    let peak = h.peak().unwrap();
    assert_eq!(h.bin_of(10_000), h.bin_of(peak.tau_ps as i64));
    assert!((peak.g2 - oracle).abs() < 3.0 * peak.error, "{} ± {} vs {oracle}", peak.g2, peak.error);
    let j = h.bin_of(10_000).unwrap();
    for (k, (g, e)) in h.g2.iter().zip(&h.error).enumerate() {
        if k != j {
            assert!((g.unwrap() - 1.0).abs() < 4.0 * e.unwrap());
        }
    }
}

#[test]
fn histogram_shape_and_flags() {
    let cfg = source(20, 2, 0.5, 3);
    let s = generate_stream(&cfg).unwrap();
    let a = analysis(&cfg, 4_000, 400_000);
    let h = cross_correlation(&s, &a).unwrap();
    assert_eq!(h.counts.len(), 200);
    assert_eq!(h.edges_ps.len(), 201);
    assert_eq!((h.edges_ps[0], h.edges_ps[200]), (-400_000, 400_000));
    for ((g, e), acc) in h.g2.iter().zip(&h.error).zip(&h.accidentals) {
        assert_eq!(g.is_none(), *acc == 0.0);
        assert_eq!(g.is_none(), e.is_none());
    }
    let mut csv = Vec::new();
    h.write_csv(&mut csv).unwrap();
    assert_eq!(String::from_utf8(csv).unwrap().lines().count(), 201);
}

#[test]
fn empty_channels_are_undefined() {
    let mut cfg = source(50, 2, 0.0, 1);
    cfg.stokes = noise(1e6);
    let s = generate_stream(&cfg).unwrap();
    assert!(matches!(cross_correlation(&s, &analysis(&cfg, 4_000, 400_000)), Err(Error::Undefined(_))));
    let mut one = cfg.clone();
    one.split = 1.0;
    let s = generate_stream(&one).unwrap();
    assert!(matches!(auto_correlation(&s, &analysis(&one, 4_000, 400_000), true), Err(Error::Undefined(_))));
}

#[test]
fn bad_analysis_configs_rejected() {
    let s = TagStream::default();
    for a in [
        AnalysisConfig { bin_ps: 0, ..Default::default() },
        AnalysisConfig { span_ps: 10_000, bin_ps: 3_000, ..Default::default() },
        AnalysisConfig { gate_ps: 0, ..Default::default() },
        AnalysisConfig { accidental_shifts: 0, ..Default::default() },
    ] {
        assert!(matches!(cross_correlation(&s, &a), Err(Error::Config(_))));
    }
}

fn auto_zero(stats: PairStatistics, seed: u64) -> (f64, f64) {
    let mut cfg = source(200, 1000, 0.5, seed);
    cfg.statistics = stats;
    cfg.stokes.efficiency = 0.5;
    let s = generate_stream(&cfg).unwrap();
    let h = auto_correlation(&s, &analysis(&cfg, 120_000, 1_200_000), true).unwrap();
    h.at(0).unwrap()
}

#[test]
fn poisson_autocorrelation_is_one() {
    let (g, e) = auto_zero(PairStatistics::Poisson, 41);
    assert!((g - 1.0).abs() < 3.0 * e, "{g} ± {e}");
}

#[test]
fn thermal_autocorrelation_is_two() {
    let (g, _) = auto_zero(PairStatistics::Thermal, 42);
    assert!((g / 2.0 - 1.0).abs() < 0.1, "{g}");
}

#[test]
fn ideal_heralded_source_never_splits() {
    let mut cfg = source(200, 200, 0.3, 5);
    cfg.statistics = PairStatistics::AtMostOne;
    let s = generate_stream(&cfg).unwrap();
    let h = heralded_autocorrelation(&s, &analysis(&cfg, 4_000, 400_000)).unwrap();
    assert_eq!(h.zero, 0);
    assert_eq!(h.g2, 0.0);
    assert!(h.baseline.0 > 0.0);
    assert_eq!(h.n.len(), 21);
}

fn uncorrelated_heralds(seed: u64) -> TagStream {
    let mut cfg = source(200, 100, 0.0, seed);
    cfg.stokes = noise(2e7);
    cfg.anti_stokes = noise(1e6);
    generate_stream(&cfg).unwrap()
}

#[test]
fn uncorrelated_heralds_give_one() {
    let s = uncorrelated_heralds(77);
    let cfg = source(200, 100, 0.0, 0);
    let h = heralded_autocorrelation(&s, &analysis(&cfg, 4_000, 400_000)).unwrap();
    assert!((h.g2 - 1.0).abs() < 3.0 * h.g2_err, "{} ± {}", h.g2, h.g2_err);
}

#[test]
fn heralded_estimator_ignores_global_translation() {
    let s = uncorrelated_heralds(78);
    let a = analysis(&source(200, 100, 0.0, 0), 4_000, 400_000);
    let h0 = heralded_autocorrelation(&s, &a).unwrap();
    for dt in [-7_777_777, 1, 123_456_789_012] {
        assert_eq!(heralded_autocorrelation(&s.translated(dt), &a).unwrap(), h0);
    }
}

#[test]
fn chunked_analysis_equals_single_pass() {
    let mut cfg = source(100, 12, 0.4, 9);
    cfg.stokes = noise(1e5);
    let s = generate_stream(&cfg).unwrap();
    let a = analysis(&cfg, 4_000, 400_000);
    let chunks = s.by_cycle();
    let whole = correlation_counts(&s.records, &a, Correlation::Cross);
    let mut merged = CorrelationCounts::empty(&a);
    let mut heralded = HeraldedCounts::empty(a.herald_nmax);
    for c in &chunks {
        merged = merged.merge(&correlation_counts(c, &a, Correlation::Cross));
        heralded = heralded.merge(&heralded_counts(c, &a));
    }
    assert_eq!(merged, whole);
    assert_eq!(heralded, heralded_counts(&s.records, &a));
}

#[test]
fn no_pairs_means_zero_brightness() {
    let mut cfg = source(100, 20, 0.0, 2);
    cfg.stokes = noise(1e4);
    cfg.anti_stokes = noise(1e4);
    let s = generate_stream(&cfg).unwrap();
    let corr = RateCorrections {
        t_s: 1.0,
        t_as: 1.0,
        background_s: 0.0,
        background_as: 0.0,
        duty_cycle: None,
        bandwidth_mhz: Some(6.5),
    };
    let r = rates_and_gsb(&s, &analysis(&cfg, 4_000, 400_000), &corr).unwrap();
    assert!(r.gsb.abs() < 3.0 * r.gsb_err.max(1e-300) || r.gsb == 0.0);
    let empty = rates_and_gsb(&TagStream::default(), &analysis(&cfg, 4_000, 400_000), &corr).unwrap();
    assert_eq!(empty.gsb, 0.0);
    let no_bw = RateCorrections { bandwidth_mhz: None, ..corr };
    assert!(matches!(rates_and_gsb(&s, &analysis(&cfg, 4_000, 400_000), &no_bw), Err(Error::Config(_))));
}

#[test]
fn brightness_closes_the_loop() {
    let mut cfg = source(200, 200, 0.2, 12);
    cfg.stokes = ChannelModel { efficiency: 0.5, base_rate: 5e4, slope: 0.0, raman_slope: 0.0 };
    cfg.anti_stokes = ChannelModel { efficiency: 0.4, base_rate: 5e4, slope: 0.0, raman_slope: 0.0 };
    let s = generate_stream(&cfg).unwrap();
    let bw = 6.5;
    let corr = RateCorrections {
        t_s: 0.5,
        t_as: 0.4,
        background_s: 5e4,
        background_as: 5e4,
        duty_cycle: None,
        bandwidth_mhz: Some(bw),
    };
    let r = rates_and_gsb(&s, &analysis(&cfg, 4_000, 400_000), &corr).unwrap();
    let truth = cfg.pair_rate / bw;
    assert!((r.gsb - truth).abs() < 3.0 * r.gsb_err, "{} ± {} vs {truth}", r.gsb, r.gsb_err);
    // η = pairs / (T_S · AS singles), with all AS singles from pairs after background removal
    assert!((r.heralding_efficiency - 1.0).abs() < 0.1, "{}", r.heralding_efficiency);
    assert!(r.pair_rate_corrected >= 0.0 && r.singles_as_bs >= 0.0);
}

#[test]
fn gsbp_fit_rejects_degenerate_sweeps() {
    assert!(matches!(fit_gsbp(&[]), Err(Error::Fit(_))));
    let p = GsbPoint { pump: 1e-8, gsb: 3000.0, gsb_err: 10.0 };
    assert!(fit_gsbp(&[p]).is_err());
    assert!(fit_gsbp(&[p, GsbPoint { gsb_err: 0.0, ..p }]).is_err());
    let (s, _) = fit_gsbp(&[p, GsbPoint { pump: 2e-8, gsb: 6000.0, gsb_err: 10.0 }]).unwrap();
    assert!((s - 3e11).abs() < 1e-3);
}

#[test]
fn full_report() {
    let mut cfg = source(200, 100, 1.0, 19);
    cfg.statistics = PairStatistics::Thermal;
    cfg.stokes = ChannelModel { efficiency: 0.5, base_rate: 1e4, slope: 0.0, raman_slope: 0.0 };
    cfg.anti_stokes = cfg.stokes;
    let s = generate_stream(&cfg).unwrap();
    let rep = analyze(&s, &analysis(&cfg, 40_000, 400_000), None).unwrap();
    let p = rep.cross_peak.unwrap();
    assert!(p.g2 > 2.0);
    assert!(rep.cauchy_schwarz.unwrap().0 > 1.0);
    assert!(rep.heralded.is_some());
    assert!(rep.rates.is_none());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn cross_counts_ignore_translation(seed in 0u64..500, dt in -1_000_000_000i64..1_000_000_000) {
        let cfg = source(40, 3, 0.5, seed);
        let s = generate_stream(&cfg).unwrap();
        let a = analysis(&cfg, 4_000, 400_000);
        let moved = s.translated(dt);
        let h0 = correlation_counts(&s.records, &a, Correlation::Cross);
        let h1 = correlation_counts(&moved.records, &a, Correlation::Cross);
        prop_assert_eq!(h0, h1);
    }

    #[test]
    fn merging_is_associative(seed in 0u64..500, cut in 1usize..5) {
        let cfg = source(30, 6, 0.5, seed);
        let s = generate_stream(&cfg).unwrap();
        let a = analysis(&cfg, 4_000, 400_000);
        let cycles = s.by_cycle();
        let cut = cut.min(cycles.len());
        let left: Vec<_> = cycles[..cut].concat();
        let right: Vec<_> = cycles[cut..].concat();
        let l = correlation_counts(&left, &a, Correlation::Cross);
        let r = correlation_counts(&right, &a, Correlation::Cross);
        prop_assert_eq!(l.merge(&r), correlation_counts(&s.records, &a, Correlation::Cross));
    }
}
