//! End-to-end recipes: spectrum → Monte Carlo tags → analysis → model.

use std::path::Path;

use anyhow::Result;
use serde_json::json;

use sfwm::analysis::{
    analyze, cross_correlation, fit_gsbp, rates_and_gsb, AnalysisConfig, GsbPoint, RateCorrections,
};
use sfwm::noise_model::{
    fit_alpha, g2_vs_gsb, peak_g2_vs_power, ChannelModel, Channels, CrossTerms, G2Point, NoiseModelParams,
};
use sfwm::source::{generate_stream, DelayTable, PairStatistics, SourceConfig};
use sfwm::spectrum::{biphoton_waveform, Bandwidth, DeltaGrid, SfwmParams};

use crate::table::Table;
use crate::{out_dir, write_json};

const DELAY_RANGE_S: f64 = 300e-9;

struct Reference {
    bandwidth_mhz: f64,
    delay: DelayTable,
}

fn reference() -> Result<Reference> {
    let p = SfwmParams::fiber_reference();
    let (spec, wave) = biphoton_waveform(&p, &DeltaGrid::standard(p.gamma_d1))?;
    Ok(Reference {
        bandwidth_mhz: Bandwidth::of(&spec)?.fwhm_hz() / 1e6,
        delay: DelayTable::from_waveform(&wave, 0.0, DELAY_RANGE_S)?,
    })
}

fn source_with(r: &Reference, pump: f64, cycles: u32, seed: u64) -> SourceConfig {
    let gsb = NoiseModelParams::default().gsbp * pump;
    let mut cfg = SourceConfig::ideal(gsb * r.bandwidth_mhz, 0.0, cycles, seed);
    cfg.delay = r.delay.clone();
    cfg.statistics = PairStatistics::Poisson;
    cfg.stokes = ChannelModel::stokes();
    cfg.anti_stokes = ChannelModel::anti_stokes();
    cfg.pump_power = pump;
    cfg
}

/// The fiber source at pump power `pump` (W): reference waveform, linear
/// brightness and the measured channel efficiencies and noise. A window spans
/// many coherence times, so pair numbers per window are Poissonian.
pub fn fiber_source(pump: f64, cycles: u32, seed: u64) -> Result<SourceConfig> {
    Ok(source_with(&reference()?, pump, cycles, seed))
}

fn corrections(cfg: &SourceConfig, bandwidth_mhz: f64) -> RateCorrections {
    RateCorrections {
        t_s: cfg.stokes.efficiency,
        t_as: cfg.anti_stokes.efficiency,
        background_s: cfg.stokes.noise_rate(cfg.pump_power),
        background_as: cfg.anti_stokes.noise_rate(cfg.pump_power),
        duty_cycle: None,
        bandwidth_mhz: Some(bandwidth_mhz),
    }
}

fn analysis_for(cfg: &SourceConfig) -> AnalysisConfig {
    AnalysisConfig {
        schedule: cfg.schedule,
        gate_ps: (DELAY_RANGE_S * 1e12) as i64,
        cycles: Some(cfg.cycles),
        ..Default::default()
    }
}

/// Waveform measurement at 14 nW against the closed-form expectation.
pub fn fig2(cycles: u32, seed: u64, out: &Path) -> Result<()> {
    let r = reference()?;
    let cfg = source_with(&r, 14e-9, cycles, seed);
    let a = analysis_for(&cfg);
    let stream = generate_stream(&cfg)?;
    let corr = corrections(&cfg, r.bandwidth_mhz);
    let rep = analyze(&stream, &a, Some(&corr))?;

    // Expected g² per bin for Poisson pair numbers with mean μ per window.
    let w = cfg.schedule.window;
    let mu = cfg.mean_pairs(0);
    let (ts, tas) = (cfg.stokes.efficiency, cfg.anti_stokes.efficiency);
    let (ns, nas) = (cfg.stokes.noise_rate(cfg.pump_power) * w, cfg.anti_stokes.noise_rate(cfg.pump_power) * w);
    let b = a.bin_ps as f64 * 1e-12;
    let acc = (mu * ts + ns) * (mu * tas + nas) * b / w;

    out_dir(out)?;
    let h = &rep.cross;
    let mut t = Table::new(&["tau_ns", "counts", "accidentals", "g2", "g2_err", "g2_model"]);
    for j in 0..h.counts.len() {
        let (lo, hi) = (h.edges_ps[j] as f64 * 1e-12, h.edges_ps[j + 1] as f64 * 1e-12);
        let p_bin: f64 = r.delay.tau.iter().zip(&r.delay.prob).filter(|(x, _)| **x >= lo && **x < hi).map(|(_, p)| p).sum();
        let model = 1.0 + mu * ts * tas * p_bin / acc;
        t.row(&[
            h.centre_ps(j) / 1e3,
            h.counts[j] as f64,
            h.accidentals[j],
            h.g2[j].unwrap_or(f64::NAN),
            h.error[j].unwrap_or(f64::NAN),
            model,
        ]);
    }
    t.save(&out.join("fig2.csv"))?;
    write_json(
        &out.join("fig2.json"),
        &json!({
            "source": cfg,
            "analysis": a,
            "bandwidth_mhz": r.bandwidth_mhz,
            "cross_peak": rep.cross_peak,
            "auto_s_zero": rep.auto_s_zero,
            "auto_as_zero": rep.auto_as_zero,
            "cauchy_schwarz": rep.cauchy_schwarz,
            "heralded_g2": rep.heralded.as_ref().map(|x| json!({ "g2": x.g2, "error": x.g2_err })),
            "rates": rep.rates,
            "gsb_configured": NoiseModelParams::default().gsbp * 14e-9,
        }),
    )?;
    if let Some(p) = rep.cross_peak {
        println!("fig2: peak g² {:.1} ± {:.1} at {:.0} ns", p.g2, p.error, p.tau_ps / 1e3);
    }
    Ok(())
}

const POWERS_NW: [f64; 8] = [5.0, 10.0, 20.0, 40.0, 60.0, 90.0, 130.0, 180.0];

/// Power sweep: peak g² and brightness with the linear GSBP fit.
pub fn fig3(cycles: u32, seed: u64, out: &Path) -> Result<()> {
    let r = reference()?;
    let params = NoiseModelParams::default();
    let ch = Channels::default();
    let mut t = Table::new(&["pump_nw", "gsb_true", "gsb_mc", "gsb_err", "g2_model", "g2_mc", "g2_mc_err"]);
    let mut points = Vec::new();
    for (i, &p_nw) in POWERS_NW.iter().enumerate() {
        let pump = p_nw * 1e-9;
        let cfg = source_with(&r, pump, cycles, seed.wrapping_add(i as u64));
        let a = analysis_for(&cfg);
        let stream = generate_stream(&cfg)?;
        let peak = cross_correlation(&stream, &a)?.peak();
        let rates = rates_and_gsb(&stream, &a, &corrections(&cfg, r.bandwidth_mhz))?;
        let model = peak_g2_vs_power(pump, &params, &ch)?;
        t.row(&[
            p_nw,
            params.gsbp * pump,
            rates.gsb,
            rates.gsb_err,
            model,
            peak.map_or(f64::NAN, |p| p.g2),
            peak.map_or(f64::NAN, |p| p.error),
        ]);
        if rates.gsb_err > 0.0 {
            points.push(GsbPoint { pump, gsb: rates.gsb, gsb_err: rates.gsb_err });
        }
    }
    out_dir(out)?;
    t.save(&out.join("fig3.csv"))?;
    let (gsbp, err) = fit_gsbp(&points)?;
    write_json(
        &out.join("fig3.json"),
        &json!({
            "cycles": cycles,
            "seed": seed,
            "bandwidth_mhz": r.bandwidth_mhz,
            "gsbp_configured_per_nw": params.gsbp * 1e-9,
            "gsbp_fit_per_nw": gsbp * 1e-9,
            "gsbp_fit_err_per_nw": err * 1e-9,
        }),
    )?;
    println!("fig3: GSBP {:.1} ± {:.1} pairs/s/MHz/nW", gsbp * 1e-9, err * 1e-9);
    Ok(())
}

const GSB_GRID: [f64; 7] = [1e3, 3e3, 1e4, 3e4, 1e5, 3e5, 1e6];

/// Peak g² against brightness: Monte Carlo against the single-mode model.
///
/// One τ_c-wide bin is one mode: a window of length W holds `n·W/τ_c` pairs
/// when the model has `n` pairs per mode, and the bin collects `r·τ_c` noise
/// counts, so the complete model applies without free parameters.
pub fn fig4c(cycles: u32, seed: u64, out: &Path) -> Result<()> {
    let printed = NoiseModelParams::default();
    let complete = NoiseModelParams { cross_terms: CrossTerms::Kept, ..printed };
    let ch = Channels::default();
    let tau_c = printed.tau_c;
    let bin_ps = (tau_c * 1e12).round() as i64;
    let mut t = Table::new(&["gsb", "pump_nw", "n", "g2_printed", "g2_complete", "g2_mc", "g2_mc_err", "z"]);
    let mut agree = 0usize;
    let mut mc_points = Vec::new();
    for (i, &gsb) in GSB_GRID.iter().enumerate() {
        let pump = gsb / printed.gsbp;
        let n = printed.pairs_per_mode(gsb);
        let mut cfg = SourceConfig::ideal(0.0, 10e-9, cycles, seed.wrapping_add(i as u64));
        cfg.statistics = PairStatistics::Thermal;
        cfg.pair_rate = n / tau_c;
        cfg.stokes = ch.stokes;
        cfg.anti_stokes = ch.anti_stokes;
        cfg.pump_power = pump;
        let a = AnalysisConfig { schedule: cfg.schedule, bin_ps, span_ps: 20 * bin_ps, cycles: Some(cycles), ..Default::default() };
        let stream = generate_stream(&cfg)?;
        let h = cross_correlation(&stream, &a)?;
        let (g, e) = h.at(10_000).unwrap_or((f64::NAN, f64::NAN));
        let gp = g2_vs_gsb(gsb, &printed, &ch, pump)?;
        let gc = g2_vs_gsb(gsb, &complete, &ch, pump)?;
        let z = (g - gc) / e;
        if z.abs() <= 3.0 {
            agree += 1;
        }
        if e.is_finite() && e > 0.0 {
            mc_points.push(G2Point { gsb, g2: g, g2_err: e, pump });
        }
        t.row(&[gsb, pump * 1e9, n, gp, gc, g, e, z]);
    }
    out_dir(out)?;
    t.save(&out.join("fig4c.csv"))?;
    let refit = fit_alpha(&mc_points, &complete, &ch).ok();
    write_json(
        &out.join("fig4c.json"),
        &json!({
            "cycles": cycles,
            "seed": seed,
            "params": printed,
            "channels": ch,
            "bin_ps": bin_ps,
            "points": GSB_GRID.len(),
            "within_3_sigma": agree,
            "alpha_refit": refit,
        }),
    )?;
    println!("fig4c: {agree}/{} points within 3σ of the complete model", GSB_GRID.len());
    if let Some(f) = refit {
        println!("fig4c: α refit from Monte Carlo {:.1} ± {:.1} (configured {})", f.alpha, f.alpha_err, printed.alpha);
    }
    Ok(())
}
