use std::fmt;
use std::fs::File;
use std::io::{self, BufReader, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use serde_json::json;

use squeezesim::experiment::sweep_point;
use squeezesim::squeezing::husimi;
use squeezesim::{
    correct_covariance, mle_reconstruct, run_sweep, tact_optimum, Error, ExperimentConfig, MeasurementRecord,
    MleOptions, SpinQuantumNumber,
};

/// Batch front end for the spin-squeezing simulation.
#[derive(Parser, Debug)]
#[command(name = "squeezesim", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum Format {
    Csv,
    Json,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Two-axis countertwisting optimum for F = 1, 3/2, ..., f.
    Limits {
        /// Largest spin, e.g. 4 or 7/2.
        f: String,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, value_enum, default_value = "csv")]
        format: Format,
    },
    /// Sweep the Raman duration and write one row per duration.
    Sweep {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, value_enum, default_value = "csv")]
        format: Format,
    },
    /// Raw probe record for one duration.
    Records {
        #[arg(long)]
        config: PathBuf,
        /// Raman duration (ms).
        #[arg(long)]
        tr: f64,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Corrected covariance of a record and, with --mle, its density matrix.
    Reconstruct {
        records: PathBuf,
        #[arg(long)]
        mle: bool,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, value_enum, default_value = "json")]
        format: Format,
    },
    /// Husimi Q function on a theta x phi grid.
    Qpd {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        tr: f64,
        /// Grid size as N_THETAxN_PHI.
        #[arg(long, default_value = "64x128")]
        grid: String,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
    },
}

enum Failure {
    Usage(String),
    ConfigNotFound(PathBuf),
    Io(String),
    Model(Error),
}

impl Failure {
    fn exit_code(&self) -> u8 {
        match self {
            Failure::Model(e) if e.is_numerical() => 1,
            _ => 2,
        }
    }
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Failure::Usage(m) => write!(f, "usage: {m}"),
            Failure::ConfigNotFound(p) => write!(f, "config not found: {}", p.display()),
            Failure::Io(m) => write!(f, "io: {m}"),
            Failure::Model(e) => {
                let category = match e {
                    _ if e.is_numerical() => "numerical",
                    Error::Parse { .. } => "config invalid",
                    Error::Io(_) => "io",
                    _ => "invalid input",
                };
                write!(f, "{category}: {e}")
            }
        }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Model(e)
    }
}

impl From<io::Error> for Failure {
    fn from(e: io::Error) -> Self {
        Failure::Io(e.to_string())
    }
}

type Outcome = std::result::Result<(), Failure>;

fn load_config(path: &Path, seed: Option<u64>) -> std::result::Result<ExperimentConfig, Failure> {
    let text = match std::fs::read_to_string(path) {
        Ok(t) => t,
        Err(e) if e.kind() == io::ErrorKind::NotFound => return Err(Failure::ConfigNotFound(path.to_path_buf())),
        Err(e) => return Err(Failure::Io(format!("{}: {e}", path.display()))),
    };
    let mut cfg = ExperimentConfig::parse(&text)?;
    if let Some(s) = seed {
        cfg.seed = s;
    }
    Ok(cfg)
}

/// Writes to `out` via a temporary file in the same directory, renamed into
/// place only once the content is complete; stdout when `out` is `None`.
fn emit(out: Option<&Path>, body: impl FnOnce(&mut dyn Write) -> io::Result<()>) -> Outcome {
    match out {
        None => {
            let stdout = io::stdout();
            let mut lock = stdout.lock();
            body(&mut lock)?;
            lock.flush()?;
        }
        Some(path) => {
            let dir = match path.parent() {
                Some(p) if !p.as_os_str().is_empty() => p,
                _ => Path::new("."),
            };
            let mut tmp = tempfile::NamedTempFile::new_in(dir)
                .map_err(|e| Failure::Io(format!("{}: {e}", path.display())))?;
            {
                let mut w = io::BufWriter::new(tmp.as_file_mut());
                body(&mut w)?;
                w.flush()?;
            }
            tmp.persist(path)
                .map_err(|e| Failure::Io(format!("{}: {}", path.display(), e.error)))?;
        }
    }
    Ok(())
}

fn write_json(w: &mut dyn Write, value: &serde_json::Value) -> io::Result<()> {
    serde_json::to_writer_pretty(&mut *w, value)?;
    writeln!(w)
}

fn limits(f: &str, out: Option<&Path>, format: Format) -> Outcome {
    let top: SpinQuantumNumber = f.parse()?;
    if top.two_f() < 2 {
        return Err(Failure::Usage(format!(
            "F = {top} has no squeezing: Fz^2 and Fy^2 are multiples of the identity for spin-1/2, \
             so twisting leaves the state unchanged; use F >= 1"
        )));
    }
    let rows = (2..=top.two_f())
        .map(|tf| tact_optimum(SpinQuantumNumber::from_two_f(tf)))
        .collect::<squeezesim::Result<Vec<_>>>()?;
    emit(out, |w| match format {
        Format::Csv => {
            writeln!(w, "# command=limits f={top}")?;
            writeln!(w, "f,chi2,alpha_t_chi2_rad,zeta2,alpha_t_zeta2_rad,xi2,alpha_t_xi2_rad")?;
            for o in &rows {
                writeln!(
                    w,
                    "{},{:.6},{:.6},{:.6},{:.6},{:.6},{:.6}",
                    o.f, o.chi2.value, o.chi2.alpha_t, o.zeta2.value, o.zeta2.alpha_t, o.xi2.value, o.xi2.alpha_t
                )?;
            }
            Ok(())
        }
        Format::Json => {
            let rows: Vec<_> = rows
                .iter()
                .map(|o| {
                    json!({
                        "f": o.f.to_string(),
                        "chi2": o.chi2.value,
                        "alpha_t_chi2_rad": o.chi2.alpha_t,
                        "zeta2": o.zeta2.value,
                        "alpha_t_zeta2_rad": o.zeta2.alpha_t,
                        "xi2": o.xi2.value,
                        "alpha_t_xi2_rad": o.xi2.alpha_t,
                    })
                })
                .collect();
            write_json(w, &json!({ "command": format!("limits f={top}"), "rows": rows }))
        }
    })
}

fn sweep(config: &Path, out: Option<&Path>, seed: Option<u64>, format: Format) -> Outcome {
    let cfg = load_config(config, seed)?;
    let result = run_sweep(&cfg)?;
    emit(out, |w| match format {
        Format::Csv => result.write_csv(w),
        Format::Json => write_json(w, &result.to_json()),
    })
}

fn check_duration(tr: f64) -> Outcome {
    if !(tr >= 0.0) || !tr.is_finite() {
        return Err(Failure::Usage(format!("--tr must be a finite duration >= 0 ms, got {tr}")));
    }
    Ok(())
}

fn records(config: &Path, tr: f64, out: Option<&Path>, seed: Option<u64>) -> Outcome {
    check_duration(tr)?;
    let cfg = load_config(config, seed)?;
    let point = sweep_point(&cfg, tr)?;
    let record = point.record(cfg.n_shots)?;
    let header = vec![
        ("config_sha256".to_string(), cfg.hash()),
        ("t_r_ms".to_string(), format!("{tr:?}")),
        ("zeta2_true".to_string(), format!("{:.10e}", point.report.zeta2)),
    ];
    emit(out, |w| record.write_csv(w, &header))
}

fn reconstruct(records: &Path, mle: bool, out: Option<&Path>, format: Format) -> Outcome {
    let file = File::open(records).map_err(|e| Failure::Io(format!("{}: {e}", records.display())))?;
    let record = MeasurementRecord::read_csv(BufReader::new(file))?;
    let cc = correct_covariance(&record)?;
    let density = if mle {
        Some(mle_reconstruct(&record, &MleOptions::default())?)
    } else {
        None
    };
    emit(out, |w| match format {
        Format::Json => {
            let mut value = json!({
                "covariance": cc,
                "var_x_err": cc.var_x_error(),
                "var_p_err": cc.var_p_error(),
            });
            if let Some(m) = &density {
                value["mle"] = json!({
                    "iterations": m.iterations,
                    "log_likelihood": m.log_likelihood.last(),
                    "truncation_valid": m.density.truncation_valid(),
                    "mean_x": m.mean_x,
                    "mean_p": m.mean_p,
                    "density_matrix": m.density.to_json(),
                });
            }
            write_json(w, &value)
        }
        Format::Csv => {
            writeln!(w, "quantity,value")?;
            for (k, v) in [
                ("mean_x", cc.mean_x),
                ("mean_p", cc.mean_p),
                ("var_x", cc.var_x),
                ("var_p", cc.var_p),
                ("cov_xp", cc.cov_xp),
                ("var_x_err", cc.var_x_error()),
                ("var_p_err", cc.var_p_error()),
                ("statistical_error", cc.statistical_error),
                ("kappa2", cc.kappa2),
                ("n_shots", cc.n_shots as f64),
            ] {
                writeln!(w, "{k},{v:.16e}")?;
            }
            if let Some(m) = &density {
                writeln!(w, "# iterations={}", m.iterations)?;
                writeln!(w, "# truncation_valid={}", m.density.truncation_valid())?;
                m.density.write_csv(&mut *w)?;
            }
            Ok(())
        }
    })
}

fn parse_grid(grid: &str) -> std::result::Result<(usize, usize), Failure> {
    let bad = || Failure::Usage(format!("--grid expects NxM with positive integers, got '{grid}'"));
    let (a, b) = grid.split_once(['x', 'X']).ok_or_else(bad)?;
    let n: usize = a.trim().parse().map_err(|_| bad())?;
    let m: usize = b.trim().parse().map_err(|_| bad())?;
    if n == 0 || m == 0 {
        return Err(bad());
    }
    Ok((n, m))
}

fn qpd(config: &Path, tr: f64, grid: &str, out: Option<&Path>, seed: Option<u64>) -> Outcome {
    check_duration(tr)?;
    let (n_theta, n_phi) = parse_grid(grid)?;
    let cfg = load_config(config, seed)?;
    let point = sweep_point(&cfg, tr)?;
    let q = husimi(&point.state, n_theta, n_phi)?;
    emit(out, |w| {
        writeln!(w, "# config_sha256={}", cfg.hash())?;
        writeln!(w, "# t_r_ms={tr:?}")?;
        q.write_csv(w)
    })
}

fn run(cli: Cli) -> Outcome {
    match cli.command {
        Command::Limits { f, out, format } => limits(&f, out.as_deref(), format),
        Command::Sweep {
            config,
            out,
            seed,
            format,
        } => sweep(&config, out.as_deref(), seed, format),
        Command::Records { config, tr, out, seed } => records(&config, tr, out.as_deref(), seed),
        Command::Reconstruct {
            records,
            mle,
            out,
            format,
        } => reconstruct(&records, mle, out.as_deref(), format),
        Command::Qpd {
            config,
            tr,
            grid,
            out,
            seed,
        } => qpd(&config, tr, &grid, out.as_deref(), seed),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let msg = e.to_string();
            let first = msg
                .lines()
                .map(|l| l.trim().trim_start_matches("error:").trim())
                .find(|l| !l.is_empty())
                .unwrap_or("invalid arguments")
                .to_string();
            eprintln!("error: usage: {first}");
            return ExitCode::from(2);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            let line = f.to_string().replace('\n', " ");
            eprintln!("error: {line}");
            ExitCode::from(f.exit_code())
        }
    }
}
