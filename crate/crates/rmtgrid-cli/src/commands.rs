//! One function per subcommand. Each reads its inputs, runs the library
//! pipeline, writes its outputs atomically and returns a summary.

use std::fmt::Write as _;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use rmtgrid::covtest::{pooled_statistic, Decision, TestReport, WindowedStream};
use rmtgrid::ensembles::{sample, standardize, EnsembleSpec};
use rmtgrid::freeprob::{
    grid_around, ks_density_vs_samples, monte_carlo_spectrum, polynomial_spectrum, McConfig, McEnsemble,
    PolySpectrumConfig, Polynomial,
};
use rmtgrid::gridsim::{simulate as run_simulation, Preset};
use rmtgrid::laws::{convergence_gap, esd_from_spectrum, LawSpec};
use rmtgrid::linalg::{eig_hermitian, SpectrumSample};
use rmtgrid::sa::{analyze_window, msr_theoretical, stage_segmentation, window_stream, LawCheckConfig, PreparedWindow, Stage};
use serde::Serialize;

use crate::config::RunConfig;
use crate::error::{CliError, CliResult};
use crate::stream::{read_meta, read_stream, write_atomic, write_meta, write_stream, StreamFile, StreamMeta};
use crate::Outcome;

/// `out.json` → `out.<suffix>`.
pub fn companion_path(output: &Path, suffix: &str) -> PathBuf {
    output.with_extension(suffix)
}

fn fmt_opt(x: Option<f64>) -> String {
    x.map_or_else(String::new, |v| v.to_string())
}

#[derive(Debug, Clone, Serialize)]
pub struct SimulateSummary {
    pub sensors: usize,
    pub samples: usize,
}

/// Runs a preset event script and writes the voltage stream plus its sidecar.
pub fn simulate(preset: Preset, seed: u64, output: &Path) -> CliResult<SimulateSummary> {
    let sim = run_simulation(&preset.script(), seed)?;
    let stream = StreamFile::numbered("bus", sim.times, sim.voltages)?;
    write_stream(output, &stream)?;
    let meta = StreamMeta {
        sampling_hz: 1.0,
        units: "p.u. deviation".into(),
        source: format!("rmtgrid simulate --preset {} --seed {seed}", preset_name(preset)),
    };
    write_meta(output, &meta)?;
    Ok(SimulateSummary { sensors: stream.sensors.len(), samples: stream.times.len() })
}

fn preset_name(p: Preset) -> &'static str {
    match p {
        Preset::Ieee118 => "ieee118",
        Preset::Ieee118Fusion => "ieee118-fusion",
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct LawcheckReport {
    pub input: PathBuf,
    pub window_t: usize,
    pub stride: usize,
    pub seed: u64,
    pub law: LawCheckConfig,
    pub windows: usize,
    pub flagged_windows: usize,
    pub flagged_fraction: f64,
    pub first_flag_t_end: Option<f64>,
    pub longest_flagged_run: usize,
    pub min_run: usize,
    pub msr_theoretical: f64,
    /// Runs of clean and flagged windows; empty unless the stride is 1 and
    /// there are at least `window_t` windows.
    pub stages: Vec<Stage>,
    pub anomaly: bool,
}

/// Ring-law and M-P checks on every window of a stream. Writes the JSON report
/// to `output`, per-window series to `<output>.windows.csv` and covariance ESDs
/// of the first window and the first flagged window to `<output>.esd.csv`.
pub fn lawcheck(input: &Path, cfg: &RunConfig, output: &Path) -> CliResult<(LawcheckReport, Outcome)> {
    cfg.validate()?;
    let stream = read_stream(input)?;
    let windows = window_stream(&stream.data, &stream.times, cfg.window_t, cfg.stride)?;
    let mut analyses = Vec::with_capacity(windows.len());
    for w in &windows {
        analyses.push(analyze_window(w, &cfg.law, &cfg.indicators, cfg.seed)?);
    }

    let flags: Vec<bool> = analyses.iter().map(|a| a.anomaly).collect();
    let t_end: Vec<f64> = analyses.iter().map(|a| a.t_end).collect();
    let flagged = flags.iter().filter(|&&f| f).count();
    let longest = flags
        .iter()
        .fold((0usize, 0usize), |(best, cur), &f| if f { (best.max(cur + 1), cur + 1) } else { (best, 0) })
        .0;
    let stages = if cfg.stride == 1 && flags.len() >= cfg.window_t {
        stage_segmentation(&t_end, &flags, cfg.window_t)?
    } else {
        Vec::new()
    };
    let c = windows[0].c;
    let report = LawcheckReport {
        input: input.to_path_buf(),
        window_t: cfg.window_t,
        stride: cfg.stride,
        seed: cfg.seed,
        law: cfg.law,
        windows: flags.len(),
        flagged_windows: flagged,
        flagged_fraction: flagged as f64 / flags.len() as f64,
        first_flag_t_end: analyses.iter().find(|a| a.anomaly).map(|a| a.t_end),
        longest_flagged_run: longest,
        min_run: cfg.min_run,
        msr_theoretical: msr_theoretical(c.min(1.0), cfg.law.l)?,
        stages,
        anomaly: longest >= cfg.min_run,
    };

    let mut csv = String::from("t_end,anomaly,ring_fraction,mp_fraction,mp_top,msr,msr_ratio");
    for phi in &cfg.indicators {
        write!(csv, ",{}", phi.name()).expect("string write");
    }
    csv.push('\n');
    for a in &analyses {
        write!(
            csv,
            "{},{},{},{},{},{},{}",
            a.t_end,
            u8::from(a.anomaly),
            a.ring.fraction_inside,
            a.mp.fraction_inside,
            a.mp.top_eigenvalue,
            a.msr.value,
            fmt_opt(a.msr.ratio)
        )
        .expect("string write");
        for ind in &a.indicators {
            write!(csv, ",{}", ind.value).expect("string write");
        }
        csv.push('\n');
    }

    let mut esd = String::from("t_end,x,esd_cdf,mp_cdf\n");
    let mut picks = vec![0];
    if let Some(k) = flags.iter().position(|&f| f) {
        if k != 0 {
            picks.push(k);
        }
    }
    for k in picks {
        let w = &windows[k];
        let spec = PreparedWindow::new(w, cfg.seed)?.covariance_spectrum;
        let e = esd_from_spectrum(&spec, 1)?;
        let law = LawSpec::marchenko_pastur(w.c)?;
        for (x, f) in e.grid.iter().zip(&e.cdf) {
            writeln!(esd, "{},{x},{f},{}", w.t_end, law.cdf(*x)).expect("string write");
        }
    }

    write_atomic(output, serde_json::to_string_pretty(&report)?.as_bytes())?;
    write_atomic(&companion_path(output, "windows.csv"), csv.as_bytes())?;
    write_atomic(&companion_path(output, "esd.csv"), esd.as_bytes())?;
    let outcome = if report.anomaly { Outcome::Alarm } else { Outcome::Clean };
    Ok((report, outcome))
}

/// Pooled covariance-change test on the first `q·n_g` samples of a stream.
pub fn ustat(input: &Path, cfg: &RunConfig, output: Option<&Path>) -> CliResult<(TestReport, Outcome)> {
    cfg.validate()?;
    let stream = read_stream(input)?;
    let need = cfg.q * cfg.n_g;
    if stream.times.len() < need {
        return Err(CliError::Config(format!(
            "insufficient samples: q*n_g = {need} but the stream has {}",
            stream.times.len()
        )));
    }
    let hz = match read_meta(input)? {
        Some(m) => m.sampling_hz,
        None => stream.inferred_hz().unwrap_or(1.0),
    };
    let ws = WindowedStream::from_series(&stream.data, cfg.q, cfg.n_g, stream.times[0], hz)?;
    let report = pooled_statistic(&ws, cfg.alpha)?;
    let json = serde_json::to_string_pretty(&report)?;
    match output {
        Some(p) => write_atomic(p, json.as_bytes())?,
        None => {
            let mut out = std::io::stdout().lock();
            // a reader that closed the pipe early does not change the decision
            match writeln!(out, "{json}") {
                Err(e) if e.kind() != std::io::ErrorKind::BrokenPipe => return Err(CliError::io("<stdout>", e)),
                _ => {}
            }
        }
    }
    let outcome = if report.decision == Decision::H1 { Outcome::Alarm } else { Outcome::Clean };
    Ok((report, outcome))
}

#[derive(Debug, Clone)]
pub struct FreeProbOptions {
    pub polynomial: Polynomial,
    /// One law per variable, or a single law used for all of them.
    pub laws: Vec<McEnsemble>,
    pub n: usize,
    pub reps: usize,
    pub grid_points: usize,
    pub epsilon: f64,
    pub seed: u64,
}

#[derive(Debug, Clone, Serialize)]
pub struct FreeProbSummary {
    pub ks: f64,
    pub mass: f64,
    pub flagged_points: Vec<f64>,
}

/// Subordination density of a polynomial in free variables next to a
/// Monte-Carlo histogram, written as `x,density_algorithm,density_mc`.
pub fn freeprob(opts: &FreeProbOptions, output: &Path) -> CliResult<FreeProbSummary> {
    let vars = opts.polynomial.var_count();
    let laws: Vec<McEnsemble> = match opts.laws.len() {
        1 => vec![opts.laws[0]; vars],
        k if k == vars => opts.laws.clone(),
        k => return Err(CliError::Config(format!("{k} laws given for a polynomial in {vars} variables"))),
    };
    if opts.grid_points < 2 {
        return Err(CliError::Config("--grid-points must be at least 2".into()));
    }
    let mc = McConfig { n: opts.n, reps: opts.reps, eta: opts.epsilon, seed: opts.seed };
    let samples = monte_carlo_spectrum(opts.polynomial, &laws, &mc)?;
    let grid = grid_around(&samples, opts.grid_points, 1.0)?;
    let cfg = PolySpectrumConfig { eta: opts.epsilon, ..PolySpectrumConfig::default() };
    let specs: Vec<LawSpec> = laws.iter().map(|l| l.law()).collect();
    let table = polynomial_spectrum(&opts.polynomial.pencil(), &specs, &grid, &cfg)?;
    let ks = ks_density_vs_samples(&table.x, &table.density, &samples)?;

    let h = grid[1] - grid[0];
    let total = samples.len() as f64;
    let mut csv = String::from("x,density_algorithm,density_mc\n");
    for (x, d) in table.x.iter().zip(&table.density) {
        let lo = samples.partition_point(|&s| s < x - 0.5 * h);
        let hi = samples.partition_point(|&s| s < x + 0.5 * h);
        writeln!(csv, "{x},{d},{}", (hi - lo) as f64 / (total * h)).expect("string write");
    }
    write_atomic(output, csv.as_bytes())?;
    Ok(FreeProbSummary { ks, mass: table.mass(), flagged_points: table.flagged.iter().map(|&i| grid[i]).collect() })
}

/// Where the `spectrum` command gets its matrix.
#[derive(Debug, Clone)]
pub enum SpectrumSource {
    /// `H/√n` for a GUE draw, against the standard semicircle.
    Gue { n: usize, seed: u64 },
    /// `(1/T) X Xᴴ`, against M-P with `c = p/T`.
    Lue { p: usize, t: usize, seed: u64 },
    /// Sample covariance of the last `window` standardized columns of a stream.
    Stream { input: PathBuf, window: usize, seed: u64 },
}

#[derive(Debug, Clone, Serialize)]
pub struct SpectrumSummary {
    pub law: String,
    pub eigenvalues: usize,
    pub sup_gap: f64,
}

/// ESD histogram and CDF of the chosen matrix next to its limit law, written as
/// `x,esd_density,law_density,esd_cdf,law_cdf` at the bin centers.
pub fn spectrum(source: &SpectrumSource, bins: usize, output: &Path) -> CliResult<SpectrumSummary> {
    let (spec, law): (SpectrumSample, LawSpec) = match source {
        SpectrumSource::Gue { n, seed } => {
            let h = sample(&EnsembleSpec::gue(*n, *seed))?;
            (eig_hermitian(&h.scaled(1.0 / (*n as f64).sqrt()))?, LawSpec::semicircle(1.0)?)
        }
        SpectrumSource::Lue { p, t, seed } => {
            let w = sample(&EnsembleSpec::lue(*p, *t, *seed))?;
            (eig_hermitian(&w)?, LawSpec::marchenko_pastur(*p as f64 / *t as f64)?)
        }
        SpectrumSource::Stream { input, window, seed } => {
            let s = read_stream(input)?;
            let len = s.times.len();
            if *window < 2 || *window > len {
                return Err(CliError::Config(format!("--window {window} does not fit a stream of {len} samples")));
            }
            let x = standardize(&s.data.column_range(len - window, len)?, *seed)?.matrix;
            (eig_hermitian(&x.gram_rows())?, LawSpec::marchenko_pastur(s.data.rows() as f64 / *window as f64)?)
        }
    };
    let esd = esd_from_spectrum(&spec, bins)?;
    let gap = convergence_gap(&esd, &law);
    let mut csv = String::from("x,esd_density,law_density,esd_cdf,law_cdf\n");
    for (x, d) in esd.bin_centers().iter().zip(&esd.hist) {
        writeln!(csv, "{x},{d},{},{},{}", law.density(*x), esd.cdf_at(*x), law.cdf(*x)).expect("string write");
    }
    write_atomic(output, csv.as_bytes())?;
    Ok(SpectrumSummary { law: format!("{:?}", law.kind), eigenvalues: spec.len(), sup_gap: gap })
}
