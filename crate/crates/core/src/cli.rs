//! Batch front end: JSON configs in, numbers and CSV out.

use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use serde::{Deserialize, Serialize};

use crate::convolution::convolve;
use crate::error::{Error, Result};
use crate::levy::{auto_regime, LevySpec, Regime};
use crate::montecarlo::{convergence_study, write_csv, SimKind, Theory};
use crate::regvar::{LimitClass, RectSet};
use crate::samplers::{sample_compound_poisson_into, sample_sum_into, JumpModel, RngStream};
use crate::spectrum::MRVSpectrum;
use crate::TailMeasure;

pub const EXIT_OK: i32 = 0;
pub const EXIT_INPUT: i32 = 2;
pub const EXIT_NUMERIC: i32 = 3;

pub const THREADS_ENV: &str = "CONETAIL_THREADS";

/// Smallest sample count a study config may request.
pub const MIN_STUDY_SAMPLES: u64 = 1000;

#[derive(Parser, Debug)]
#[command(name = "conetail", version, about = "Subcone tail calculus and Monte Carlo checks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Evaluate a tail measure on a rectangle.
    EvalMeasure {
        #[arg(long)]
        measure: PathBuf,
        #[arg(long)]
        set: PathBuf,
    },
    /// Spectrum of the sum of two independent vectors.
    Convolve {
        #[arg(long)]
        spec1: PathBuf,
        #[arg(long)]
        spec2: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Theory approximation for each t of a study config.
    Approx {
        #[arg(long)]
        config: PathBuf,
    },
    /// Stream draws as CSV.
    Simulate {
        #[arg(long)]
        model: PathBuf,
        #[arg(long, default_value = "vector")]
        kind: String,
        #[arg(long)]
        n: u64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 0)]
        stream: u64,
    },
    /// Monte Carlo convergence study.
    Study {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        threads: Option<usize>,
    },
    /// Exact probabilities where an oracle exists.
    Oracle {
        #[arg(long)]
        config: PathBuf,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum TheorySpec {
    Spectrum { spectrum: MRVSpectrum },
    Levy { levy: LevySpec, regime: Option<Regime> },
    /// The string `"auto"`.
    Auto(String),
}

impl Default for TheorySpec {
    fn default() -> Self {
        TheorySpec::Auto("auto".into())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StudyConfig {
    pub model: JumpModel,
    pub kind: SimKind,
    pub set: RectSet,
    pub t_grid: Vec<f64>,
    pub n_samples: u64,
    pub seed: u64,
    #[serde(default)]
    pub theory: TheorySpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<PathBuf>,
}

impl StudyConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: StudyConfig = serde_json::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.t_grid.is_empty() || self.t_grid.windows(2).any(|w| w[1] <= w[0]) || self.t_grid[0] <= 0.0 {
            return Err(Error::bad_param("t_grid", "must be positive and strictly increasing"));
        }
        if self.n_samples < MIN_STUDY_SAMPLES {
            return Err(Error::bad_param("n_samples", format!("must be at least {MIN_STUDY_SAMPLES}")));
        }
        if self.set.dim() != self.model.d() {
            return Err(Error::DimensionMismatch { expected: self.model.d(), got: self.set.dim() });
        }
        if let TheorySpec::Auto(s) = &self.theory {
            if s != "auto" {
                return Err(Error::bad_param("theory", format!("expected \"auto\" or an object, got {s:?}")));
            }
        }
        Ok(())
    }

    pub fn theory(&self) -> Result<Theory> {
        match &self.theory {
            TheorySpec::Auto(_) => Theory::auto(self.kind, &self.model),
            TheorySpec::Spectrum { spectrum } => Ok(Theory::Spectrum(spectrum.clone())),
            TheorySpec::Levy { levy, regime } => {
                let regime = match regime {
                    Some(r) => *r,
                    None => auto_regime(levy)?,
                };
                Ok(Theory::Levy { spec: levy.clone(), regime })
            }
        }
    }
}

fn read(path: &Path) -> Result<String> {
    Ok(fs::read_to_string(path)?)
}

fn threads_from_env() -> Result<Option<usize>> {
    match std::env::var(THREADS_ENV) {
        Ok(v) => v
            .trim()
            .parse::<usize>()
            .map(Some)
            .map_err(|_| Error::bad_param(THREADS_ENV, format!("not a thread count: {v:?}"))),
        Err(_) => Ok(None),
    }
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

fn execute(cmd: Command, out: &mut dyn Write, err: &mut dyn Write) -> Result<()> {
    match cmd {
        Command::EvalMeasure { measure, set } => {
            let mu: TailMeasure = serde_json::from_str(&read(&measure)?)?;
            let a: RectSet = serde_json::from_str(&read(&set)?)?;
            writeln!(out, "{}", mu.eval(&a)?)?;
        }
        Command::Convolve { spec1, spec2, out: path } => {
            let s1 = MRVSpectrum::from_json(&read(&spec1)?)?;
            let s2 = MRVSpectrum::from_json(&read(&spec2)?)?;
            let report = convolve(&s1, &s2)?;
            fs::write(&path, report.spectrum.to_json())?;
            writeln!(out, "level,support,c,factor")?;
            for (i, w) in report.weights.iter().enumerate() {
                let level = i + 1;
                let support: Vec<String> = w.support().iter().map(|m| m.to_string()).collect();
                let c: Vec<String> = w.c.iter().map(|x| x.to_string()).collect();
                writeln!(out, "{level},{},{},{}", support.join(" "), c.join(" "), fmt_opt(level_factor(&s1, &report.spectrum, level)))?;
            }
            writeln!(
                err,
                "delta = {}, band = [{}, {}], within band: {}",
                report.spectrum.delta(),
                report.band.0,
                report.band.1,
                report.within_band
            )?;
        }
        Command::Approx { config } => {
            let cfg = StudyConfig::from_json(&read(&config)?)?;
            let theory = cfg.theory()?;
            writeln!(out, "t,approx")?;
            for &t in &cfg.t_grid {
                writeln!(out, "{t},{}", theory.approx(cfg.kind, &cfg.set, t)?)?;
            }
        }
        Command::Simulate { model, kind, n, seed, stream } => {
            let m = JumpModel::from_json(&read(&model)?)?;
            let kind: SimKind = kind.parse()?;
            let mut rng = RngStream::new(seed, stream);
            let d = m.d();
            let header: Vec<String> = (1..=d).map(|j| format!("z{j}")).collect();
            let mut w = csv::Writer::from_writer(out);
            w.write_record(&header)?;
            let mut z = vec![0.0; d];
            let mut scratch = vec![0.0; d];
            for _ in 0..n {
                match kind {
                    SimKind::Vector => m.sample_into(&mut rng, &mut z),
                    SimKind::Sum(k) => sample_sum_into(&m, k, &mut rng, &mut z, &mut scratch),
                    SimKind::CompoundPoisson { lambda, s } => {
                        sample_compound_poisson_into(&m, lambda, s, &mut rng, &mut z, &mut scratch);
                    }
                }
                w.write_record(z.iter().map(|x| x.to_string()))?;
            }
            w.flush()?;
        }
        Command::Study { config, out: path, threads } => {
            let cfg = StudyConfig::from_json(&read(&config)?)?;
            let theory = cfg.theory()?;
            let threads = match threads {
                Some(k) => Some(k),
                None => threads_from_env()?,
            };
            let mut builder = rayon::ThreadPoolBuilder::new();
            if let Some(k) = threads {
                if k == 0 {
                    return Err(Error::bad_param("threads", "must be at least 1"));
                }
                builder = builder.num_threads(k);
            }
            let pool = builder.build().map_err(|e| Error::bad_param("threads", e.to_string()))?;
            let study = pool.install(|| {
                convergence_study(cfg.kind, &cfg.model, &theory, &cfg.set, &cfg.t_grid, cfg.n_samples, cfg.seed)
            })?;
            match path.or(cfg.output.clone()) {
                Some(p) => write_csv(&study.rows, fs::File::create(p)?)?,
                None => write_csv(&study.rows, &mut *out)?,
            }
            if !study.monotone {
                writeln!(err, "warning: |ratio - 1| does not decrease along the grid")?;
            }
        }
        Command::Oracle { config } => {
            let cfg = StudyConfig::from_json(&read(&config)?)?;
            writeln!(out, "t,oracle")?;
            for &t in &cfg.t_grid {
                writeln!(out, "{t},{}", crate::oracle::oracle(cfg.kind, &cfg.model, &cfg.set, t)?)?;
            }
        }
    }
    Ok(())
}

/// `lim P(S in tA) / P(Z in tA)` on the leading level-`i` diagonal, when finite.
fn level_factor(base: &MRVSpectrum, sum: &MRVSpectrum, i: usize) -> Option<f64> {
    let mu_b = base.entry(i).measure()?;
    let mu_s = sum.entry(i).measure()?;
    let pairs: Vec<(usize, f64)> = (0..i).map(|j| (j, 1.0)).collect();
    let vb = mu_b.eval_pairs(&pairs);
    if vb <= 0.0 {
        return None;
    }
    match base.b_inverse(i).ratio_limit(&sum.b_inverse(i)) {
        LimitClass::Finite(r) => Some(mu_s.eval_pairs(&pairs) / vb * r),
        _ => None,
    }
}

/// Runs the CLI; returns the process exit code.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_INPUT } else { EXIT_OK };
            let text = e.render().to_string();
            let _ = if e.use_stderr() { write!(err, "{text}") } else { write!(out, "{text}") };
            return code;
        }
    };
    match execute(cli.command, out, err) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            let _ = writeln!(err, "{}: {}", e.code(), e.to_string().replace('\n', " "));
            if e.is_input_error() {
                EXIT_INPUT
            } else {
                EXIT_NUMERIC
            }
        }
    }
}
