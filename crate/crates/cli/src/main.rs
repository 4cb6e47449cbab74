use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::json;

use sfwm::analysis::{analyze, AnalysisConfig, RateCorrections};
use sfwm::atomic::LevelScheme;
use sfwm::noise_model::{fit_alpha, g2_vs_gsb, Channels, G2Point, NoiseModelParams};
use sfwm::source::{generate_stream, OdDecay, SourceConfig};
use sfwm::spectrum::{biphoton_waveform, Bandwidth, DeltaGrid, OdConvention, SfwmParams};
use sfwm::tags::TagStream;
use sfwm::zeeman::trajectory::trajectory_extinction;
use sfwm::zeeman::{run_ensemble, Mode, SimConfig, SimInputs};

mod reproduce;
mod table;

use table::Table;

#[derive(Parser)]
#[command(name = "sfwm", version, about = "Biphoton source modelling: spectra, Bloch simulation, time tags and noise fits")]
struct Cli {
    /// Worker threads for parallel stages (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Biphoton spectrum, waveform and bandwidth.
    Spectrum(SpectrumArgs),
    /// Zeeman-resolved Maxwell–Bloch trajectories.
    SimulateZeeman(ZeemanArgs),
    /// Monte Carlo detector time tags.
    GenerateTags(TagArgs),
    /// Correlations, heralded autocorrelation and rates from a tag file.
    Analyze(AnalyzeArgs),
    /// Fit the pair-number scale α to measured (GSB, g²) points.
    FitNoise(FitArgs),
    /// Regenerate a figure's data set end to end.
    Reproduce(ReproduceArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum OdReading {
    Intensity,
    FieldAmplitude,
}

#[derive(clap::Args)]
struct SpectrumArgs {
    /// Medium parameters (JSON); the fiber reference set if omitted.
    #[arg(long)]
    params: Option<PathBuf>,
    #[arg(long)]
    od: Option<f64>,
    /// Control Rabi frequency in units of Γ_D1.
    #[arg(long)]
    control: Option<f64>,
    #[arg(long, value_enum)]
    od_convention: Option<OdReading>,
    /// Half-width of the detuning grid in units of Γ_D1.
    #[arg(long, default_value_t = 32.0)]
    delta_span: f64,
    #[arg(long, default_value_t = 16384)]
    points: usize,
    #[arg(long, short, default_value = "spectrum-out")]
    out: PathBuf,
}

#[derive(clap::Args)]
struct ZeemanArgs {
    /// Numerical settings (JSON `SimConfig`); defaults if omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Level scheme (JSON); the bundled ⁸⁷Rb scheme if omitted.
    #[arg(long)]
    scheme: Option<PathBuf>,
    /// Drives and medium (JSON `SimInputs`); fiber-source values if omitted.
    #[arg(long)]
    inputs: Option<PathBuf>,
    #[arg(long)]
    trajectories: Option<usize>,
    #[arg(long)]
    duration: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, short, default_value = "zeeman-out")]
    out: PathBuf,
}

#[derive(clap::Args)]
struct TagArgs {
    /// Source description (JSON `SourceConfig`); the 14 nW fiber source if omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    cycles: Option<u32>,
    #[arg(long)]
    seed: Option<u64>,
    /// Pump power in nW for the built-in source.
    #[arg(long, default_value_t = 14.0)]
    pump_nw: f64,
    #[arg(long, short, default_value = "tags.csv")]
    out: PathBuf,
}

#[derive(clap::Args)]
struct AnalyzeArgs {
    /// Tag file `channel,time_ps,window,cycle`.
    #[arg(long)]
    tags: PathBuf,
    /// Analysis settings (JSON `AnalysisConfig`).
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    bin_ps: Option<i64>,
    #[arg(long)]
    span_ps: Option<i64>,
    #[arg(long)]
    gate_ps: Option<i64>,
    /// Keep windows whose OD lies in `lo,hi` (default OD decay curve).
    #[arg(long, value_name = "LO,HI", value_parser = parse_range)]
    od_range: Option<(f64, f64)>,
    /// Biphoton bandwidth for brightness; rates are skipped without it.
    #[arg(long)]
    bandwidth_mhz: Option<f64>,
    #[arg(long, default_value_t = 0.08)]
    t_s: f64,
    #[arg(long, default_value_t = 0.08)]
    t_as: f64,
    #[arg(long, default_value_t = 0.0)]
    background_s: f64,
    #[arg(long, default_value_t = 0.0)]
    background_as: f64,
    #[arg(long, short, default_value = "analysis-out")]
    out: PathBuf,
}

#[derive(clap::Args)]
struct FitArgs {
    /// CSV with header `gsb,g2,g2_err,pump_nw`.
    #[arg(long)]
    data: PathBuf,
    /// Model parameters (JSON `NoiseModelParams`).
    #[arg(long)]
    params: Option<PathBuf>,
    #[arg(long, short, default_value = "fit-out")]
    out: PathBuf,
}

#[derive(Clone, Copy, ValueEnum)]
enum Figure {
    Fig2,
    Fig3,
    Fig4c,
}

#[derive(clap::Args)]
struct ReproduceArgs {
    #[arg(value_enum)]
    figure: Figure,
    /// Cycles per Monte Carlo point (figure-specific default if omitted).
    #[arg(long)]
    cycles: Option<u32>,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[arg(long, short, default_value = "reproduce-out")]
    out: PathBuf,
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))
}

fn parse_range(s: &str) -> Result<(f64, f64), String> {
    let (lo, hi) = s.split_once(',').ok_or("expected LO,HI")?;
    let num = |x: &str| x.trim().parse::<f64>().map_err(|e| format!("{x}: {e}"));
    Ok((num(lo)?, num(hi)?))
}

pub(crate) fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

pub(crate) fn out_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))
}

fn spectrum(a: SpectrumArgs) -> Result<()> {
    let mut p = match &a.params {
        Some(path) => {
            let p: SfwmParams = read_json(path)?;
            p.validate()?;
            p
        }
        None => SfwmParams::fiber_reference(),
    };
    if let Some(od) = a.od {
        p.od = Some(od);
        p.atom_number = None;
    }
    if let Some(c) = a.control {
        p.control_rabi = c * p.gamma_d1;
    }
    if let Some(c) = a.od_convention {
        p.od_convention = match c {
            OdReading::Intensity => OdConvention::Intensity,
            OdReading::FieldAmplitude => OdConvention::FieldAmplitude,
        };
    }
    let grid = DeltaGrid { span: a.delta_span * p.gamma_d1, points: a.points };
    let (spec, wave) = biphoton_waveform(&p, &grid)?;
    let bw = Bandwidth::of(&spec)?;
    out_dir(&a.out)?;

    let mut t = Table::new(&["delta_gamma", "delta_mhz", "re", "im", "power"]);
    for (d, z) in spec.delta.iter().zip(&spec.amplitude) {
        t.row(&[d / p.gamma_d1, d / (2.0 * std::f64::consts::PI * 1e6), z.re, z.im, z.norm_sqr()]);
    }
    t.save(&a.out.join("spectrum.csv"))?;

    let w = wave.window(-50e-9, 400e-9);
    let mut t = Table::new(&["tau_ns", "psi2"]);
    for (tau, v) in w.tau.iter().zip(&w.psi2) {
        t.row(&[tau * 1e9, *v]);
    }
    t.save(&a.out.join("waveform.csv"))?;

    let mut t = Table::new(&["fwhm_mhz", "fwhm_gamma", "timescale_ns"]);
    t.row(&[bw.fwhm_hz() / 1e6, bw.fwhm / p.gamma_d1, bw.timescale * 1e9]);
    t.save(&a.out.join("bandwidth.csv"))?;
    write_json(
        &a.out.join("summary.json"),
        &json!({ "params": p, "grid": grid, "bandwidth": bw, "fwhm_mhz": bw.fwhm_hz() / 1e6 }),
    )?;
    println!("FWHM 2π×{:.3} MHz, timescale {:.2} ns", bw.fwhm_hz() / 1e6, bw.timescale * 1e9);
    Ok(())
}

fn simulate_zeeman(a: ZeemanArgs) -> Result<()> {
    let scheme = match &a.scheme {
        Some(path) => LevelScheme::load(path)?,
        None => LevelScheme::default(),
    };
    let mut cfg: SimConfig = match &a.config {
        Some(path) => read_json(path)?,
        None => SimConfig::default(),
    };
    if let Some(n) = a.trajectories {
        cfg.trajectories = n;
    }
    if let Some(d) = a.duration {
        cfg.duration = d;
    }
    if let Some(s) = a.seed {
        cfg.seed = s;
    }
    cfg.validate()?;
    let inputs: SimInputs = match &a.inputs {
        Some(path) => read_json(path)?,
        None => SimInputs::from_scheme(&scheme)?,
    };
    let runs = run_ensemble(&cfg, &scheme, &inputs)?;
    out_dir(&a.out)?;
    let mut summary = Vec::new();
    for (i, r) in runs.iter().enumerate() {
        let mut cols = vec!["t".to_string()];
        for m in Mode::ALL {
            cols.push(format!("{}_re", m.name()));
            cols.push(format!("{}_im", m.name()));
        }
        let names: Vec<&str> = cols.iter().map(String::as_str).collect();
        let mut t = Table::new(&names);
        for (time, o) in r.t.iter().zip(&r.output) {
            let mut row = vec![*time];
            for z in o {
                row.push(z.re);
                row.push(z.im);
            }
            t.row(&row);
        }
        t.save(&a.out.join(format!("trajectory_{i:03}.csv")))?;
        let ext = trajectory_extinction(r, &inputs, 60.0).ok();
        summary.push(json!({
            "index": i,
            "extinction_db": ext.map(|(s, a)| json!({ "stokes_vs_pump": s, "anti_stokes_vs_control": a })),
            "max_trace_error": r.max_trace_error,
            "max_hermiticity_error": r.max_hermiticity_error,
            "min_population": r.min_population,
            "accepted_steps": r.accepted_steps,
            "rejected_steps": r.rejected_steps,
        }));
    }
    write_json(&a.out.join("summary.json"), &json!({ "config": cfg, "inputs": inputs, "trajectories": summary }))?;
    println!("{} trajectories written to {}", runs.len(), a.out.display());
    Ok(())
}

fn generate_tags(a: TagArgs) -> Result<()> {
    let mut cfg: SourceConfig = match &a.config {
        Some(path) => read_json(path)?,
        None => reproduce::fiber_source(a.pump_nw * 1e-9, 10, 1)?,
    };
    if let Some(c) = a.cycles {
        cfg.cycles = c;
    }
    if let Some(s) = a.seed {
        cfg.seed = s;
    }
    let stream = generate_stream(&cfg)?;
    if let Some(dir) = a.out.parent().filter(|d| !d.as_os_str().is_empty()) {
        out_dir(dir)?;
    }
    stream.save(&a.out)?;
    write_json(&a.out.with_extension("json"), &cfg)?;
    println!("{} tags over {} cycles written to {}", stream.len(), cfg.cycles, a.out.display());
    Ok(())
}

fn analyze_cmd(a: AnalyzeArgs) -> Result<()> {
    let stream = TagStream::load(&a.tags).with_context(|| format!("loading {}", a.tags.display()))?;
    let mut cfg: AnalysisConfig = match &a.config {
        Some(path) => read_json(path)?,
        None => AnalysisConfig::default(),
    };
    if let Some(b) = a.bin_ps {
        cfg.bin_ps = b;
    }
    if let Some(s) = a.span_ps {
        cfg.span_ps = s;
    }
    if let Some(g) = a.gate_ps {
        cfg.gate_ps = g;
    }
    if let Some((lo, hi)) = a.od_range {
        let range = OdDecay::default().windows_in_range(&cfg.schedule, lo.min(hi), lo.max(hi));
        if range.is_empty() {
            bail!("no window has an OD in [{lo}, {hi}]");
        }
        cfg.schedule.selection = Some((range.start, range.end));
    }
    cfg.validate()?;
    let corr = a.bandwidth_mhz.map(|bw| RateCorrections {
        t_s: a.t_s,
        t_as: a.t_as,
        background_s: a.background_s,
        background_as: a.background_as,
        duty_cycle: None,
        bandwidth_mhz: Some(bw),
    });
    let rep = analyze(&stream, &cfg, corr.as_ref())?;
    out_dir(&a.out)?;
    rep.cross.write_csv(fs::File::create(a.out.join("cross.csv"))?)?;
    if let Some(h) = &rep.auto_s {
        h.write_csv(fs::File::create(a.out.join("auto_s.csv"))?)?;
    }
    if let Some(h) = &rep.auto_as {
        h.write_csv(fs::File::create(a.out.join("auto_as.csv"))?)?;
    }
    if let Some(h) = &rep.heralded {
        let mut t = Table::new(&["n", "counts"]);
        for (n, c) in h.n.iter().zip(&h.counts) {
            t.row(&[*n as f64, *c as f64]);
        }
        t.save(&a.out.join("heralded.csv"))?;
    }
    write_json(
        &a.out.join("report.json"),
        &json!({
            "config": cfg,
            "corrections": corr,
            "cross_peak": rep.cross_peak,
            "auto_s_zero": rep.auto_s_zero,
            "auto_as_zero": rep.auto_as_zero,
            "cauchy_schwarz": rep.cauchy_schwarz,
            "heralded_g2": rep.heralded.as_ref().map(|h| json!({ "g2": h.g2, "error": h.g2_err, "zero": h.zero, "baseline": h.baseline })),
            "rates": rep.rates,
        }),
    )?;
    match rep.cross_peak {
        Some(p) => println!("peak g² {:.2} ± {:.2} at {:.1} ns", p.g2, p.error, p.tau_ps / 1e3),
        None => println!("no populated cross-correlation bins"),
    }
    Ok(())
}

fn fit_noise(a: FitArgs) -> Result<()> {
    let text = fs::read_to_string(&a.data).with_context(|| format!("reading {}", a.data.display()))?;
    let rows = table::parse(&text, &["gsb", "g2", "g2_err", "pump_nw"])?;
    let points: Vec<G2Point> =
        rows.iter().map(|r| G2Point { gsb: r[0], g2: r[1], g2_err: r[2], pump: r[3] * 1e-9 }).collect();
    let params: NoiseModelParams = match &a.params {
        Some(path) => read_json(path)?,
        None => NoiseModelParams::default(),
    };
    let ch = Channels::default();
    let fit = fit_alpha(&points, &params, &ch)?;
    out_dir(&a.out)?;
    let fitted = NoiseModelParams { alpha: fit.alpha, ..params };
    let mut t = Table::new(&["gsb", "g2_model"]);
    for k in 0..=80 {
        let gsb = 10f64.powf(2.0 + 5.0 * k as f64 / 80.0);
        t.row(&[gsb, g2_vs_gsb(gsb, &fitted, &ch, gsb / fitted.gsbp)?]);
    }
    t.save(&a.out.join("curve.csv"))?;
    write_json(&a.out.join("fit.json"), &json!({ "params": params, "channels": ch, "points": points.len(), "fit": fit }))?;
    println!("α = {:.2} ± {:.2}", fit.alpha, fit.alpha_err);
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    if let Some(n) = cli.threads {
        if n == 0 {
            bail!("--threads must be at least 1");
        }
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global()?;
    }
    match cli.command {
        Command::Spectrum(a) => spectrum(a),
        Command::SimulateZeeman(a) => simulate_zeeman(a),
        Command::GenerateTags(a) => generate_tags(a),
        Command::Analyze(a) => analyze_cmd(a),
        Command::FitNoise(a) => fit_noise(a),
        Command::Reproduce(a) => match a.figure {
            Figure::Fig2 => reproduce::fig2(a.cycles.unwrap_or(800), a.seed, &a.out),
            Figure::Fig3 => reproduce::fig3(a.cycles.unwrap_or(300), a.seed, &a.out),
            Figure::Fig4c => reproduce::fig4c(a.cycles.unwrap_or(100), a.seed, &a.out),
        },
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(2) } else { ExitCode::SUCCESS };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
