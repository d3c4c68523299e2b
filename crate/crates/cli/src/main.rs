use clap::{Args, Parser, Subcommand};
use mdmlink::experiment::{self, SweepAxis};
use mdmlink::io::{plot, results};
use mdmlink::{Error, ExperimentConfig};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

/// Simulate and analyse a mode-division-multiplexed coherent link with a
/// TDM-assisted MIMO receiver.
#[derive(Debug, Parser)]
#[command(name = "mdmlink", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct RunArgs {
    /// Experiment configuration (TOML); defaults apply when omitted.
    #[arg(long, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Override the master seed.
    #[arg(long, value_name = "N")]
    seed: Option<u64>,
    /// Output directory (default: `output.dir` from the configuration).
    #[arg(long, value_name = "DIR")]
    out: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run every (wavelength, SNR) point of a configuration.
    Simulate(RunArgs),
    /// Repeat a run over values of one parameter.
    Sweep {
        #[command(flatten)]
        run: RunArgs,
        /// Parameter to sweep: `wavelength` (nm) or `snr` (dB).
        #[arg(long)]
        axis: SweepAxis,
        /// Comma-separated values, or `start:step:stop`.
        #[arg(long, allow_hyphen_values = true)]
        values: String,
    },
    /// Crosstalk, insertion loss and MDL of measured intensity matrices.
    Characterize {
        /// Intensity-matrix CSV files, one per wavelength.
        #[arg(required = true)]
        files: Vec<PathBuf>,
        /// Seed of the synthesized field phases used for the MDL.
        #[arg(long, value_name = "N", default_value_t = 1)]
        seed: u64,
        /// Write `characterization.csv` into this directory.
        #[arg(long, value_name = "DIR")]
        out: Option<PathBuf>,
    },
    /// Draw SVG figures from a run or sweep result directory.
    Plot {
        /// Result directory written by `simulate` or `sweep`.
        results: PathBuf,
        /// Figure directory (default: `<results>/plots`).
        #[arg(long, value_name = "DIR")]
        out: Option<PathBuf>,
    },
    /// Print the annotated configuration schema with every default.
    PrintConfigSchema,
}

/// Failure of a subcommand, mapped onto the process exit code.
#[derive(Debug)]
enum Failure {
    /// Bad configuration, arguments or input files.
    Input(String),
    /// The signal chain itself failed (sync, divergence, ...).
    Runtime(String),
}

impl From<&Error> for Failure {
    fn from(e: &Error) -> Self {
        if e.is_runtime() {
            Failure::Runtime(e.to_string())
        } else {
            Failure::Input(e.to_string())
        }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::from(&e)
    }
}

fn load_config(args: &RunArgs) -> Result<ExperimentConfig, Failure> {
    let mut cfg = match &args.config {
        Some(p) => ExperimentConfig::load(p)?,
        None => ExperimentConfig::default(),
    };
    if let Some(seed) = args.seed {
        cfg.seeds.master = seed;
    }
    Ok(cfg)
}

fn out_dir(args: &RunArgs, cfg: &ExperimentConfig) -> PathBuf {
    args.out.clone().unwrap_or_else(|| cfg.output.dir.clone())
}

fn parse_values(text: &str) -> Result<Vec<f64>, Failure> {
    let num = |s: &str| {
        s.trim()
            .parse::<f64>()
            .map_err(|_| Failure::Input(format!("bad sweep value '{}'", s.trim())))
    };
    let parts: Vec<&str> = text.split(':').collect();
    if parts.len() == 3 {
        let (start, step, stop) = (num(parts[0])?, num(parts[1])?, num(parts[2])?);
        if !(step > 0.0) || stop < start {
            return Err(Failure::Input(format!(
                "bad range '{text}': need step > 0 and stop >= start"
            )));
        }
        let n = ((stop - start) / step + 1e-9).floor() as usize + 1;
        return Ok((0..n).map(|k| start + k as f64 * step).collect());
    }
    let values = text
        .split(',')
        .filter(|s| !s.trim().is_empty())
        .map(num)
        .collect::<Result<Vec<_>, _>>()?;
    if values.is_empty() {
        return Err(Failure::Input("no sweep values given".into()));
    }
    Ok(values)
}

fn simulate(args: &RunArgs) -> Result<(), Failure> {
    let cfg = load_config(args)?;
    let dir = out_dir(args, &cfg);
    let run = experiment::run_simulation(&cfg)?;
    results::write_run(&dir, &run)?;
    println!("wavelength_nm  snr_db  mean_ber   worst_ber  worst_mode  class");
    for p in &run.points {
        println!(
            "{:>13}  {:>6}  {:.3e}  {:.3e}  {:>10}  {}",
            p.wavelength_nm,
            p.snr_db,
            p.mean_ber(),
            p.ber.worst_ber(),
            mdmlink::channel::mode_label(p.ber.worst_mode()),
            p.ber.class()
        );
    }
    let cap = &run.capacity;
    println!(
        "net capacity {:.4} Tb/s, spectral efficiency {:.2} b/s/Hz ({} GHz grid)",
        cap.net_bps / 1e12,
        cap.spectral_efficiency_bps_hz,
        cap.grid_hz / 1e9
    );
    println!("results written to {}", dir.display());
    Ok(())
}

fn sweep(args: &RunArgs, axis: SweepAxis, values: &str) -> Result<(), Failure> {
    let cfg = load_config(args)?;
    let values = parse_values(values)?;
    let dir = out_dir(args, &cfg);
    let points = experiment::sweep(&cfg, axis, &values)?;
    results::write_sweep(&dir, &points)?;
    let mut first_error = None;
    for sp in &points {
        match &sp.result {
            Ok(r) => println!("{axis} = {}: mean BER {:.3e}", sp.value, r.mean_ber()),
            Err(e) => {
                eprintln!("{axis} = {}: failed: {e}", sp.value);
                first_error.get_or_insert_with(|| Failure::from(e));
            }
        }
    }
    println!("results written to {}", dir.display());
    // A sweep with at least one good point succeeds; failures are recorded.
    match first_error {
        Some(f) if points.iter().all(|p| p.result.is_err()) => Err(f),
        _ => Ok(()),
    }
}

fn characterize(files: &[PathBuf], seed: u64, out: Option<&Path>) -> Result<(), Failure> {
    let rows = experiment::characterize(files, seed)?;
    println!("wavelength_nm  worst_mode  worst_crosstalk_db  mdl_db");
    for r in &rows {
        println!(
            "{:>13}  {:>10}  {:>18.2}  {:>6.2}",
            r.wavelength_nm, r.labels[r.worst_mode], r.crosstalk_db[r.worst_mode], r.mdl_db
        );
    }
    if let Some(dir) = out {
        std::fs::create_dir_all(dir).map_err(Error::from)?;
        let path = dir.join("characterization.csv");
        std::fs::write(&path, results::characterization_csv(&rows)).map_err(Error::from)?;
        println!("written {}", path.display());
    }
    Ok(())
}

fn draw(results_dir: &Path, out: Option<&Path>) -> Result<(), Failure> {
    let out = out.map(Path::to_path_buf).unwrap_or_else(|| results_dir.join("plots"));
    let report = plot::emit_plots(results_dir, &out)?;
    for p in &report.written {
        println!("written {}", p.display());
    }
    for m in &report.missing {
        eprintln!("missing section {m}");
    }
    if report.written.is_empty() {
        return Err(Failure::Input(format!(
            "no plottable results in {}",
            results_dir.display()
        )));
    }
    Ok(())
}

fn main() -> ExitCode {
    // clap's own usage errors would exit with 2, which is reserved for
    // runtime failures here.
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let result = match &cli.command {
        Command::Simulate(args) => simulate(args),
        Command::Sweep { run, axis, values } => sweep(run, *axis, values),
        Command::Characterize { files, seed, out } => characterize(files, *seed, out.as_deref()),
        Command::Plot { results, out } => draw(results, out.as_deref()),
        Command::PrintConfigSchema => {
            print!("{}", mdmlink::config::schema());
            Ok(())
        }
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Input(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
        Err(Failure::Runtime(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn value_lists_and_ranges() {
        assert_eq!(parse_values("1530, 1545,1560").unwrap(), vec![1530.0, 1545.0, 1560.0]);
        assert_eq!(parse_values("10:5:25").unwrap(), vec![10.0, 15.0, 20.0, 25.0]);
        assert_eq!(parse_values("-3").unwrap(), vec![-3.0]);
        assert!(parse_values("1,x").is_err());
        assert!(parse_values("10:0:20").is_err());
        assert!(parse_values("").is_err());
    }

    #[test]
    fn cli_definition_is_consistent() {
        use clap::CommandFactory;
        Cli::command().debug_assert();
    }
}
