use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use bellgap::loophole::{canonical_lhv_bound, canonicalize, critical_efficiency, EfficiencyMode};
use bellgap::optimize::{score_functional, Engine, OptimizerConfig};
use bellgap::quantum::{alpha_for_concurrence, tilted_realization};
use bellgap::stats::{frequencies, kl_divergence, ns_project, poisson_sample, SAMPLER_VERSION};
use bellgap::{lhv_bound, Behavior, BellFunctional};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Deserialize;

use crate::analysis::{analyze, Summary, OPTIMIZED, TILTED};
use crate::error::{CliError, CliResult};
use crate::files::{
    behavior_json, counts_json, parse_counts, read_bytes, read_counts, read_data, read_functional, sha256_hex,
    write_json, write_text, DataFile, Source,
};

#[derive(Debug, Parser)]
#[command(name = "bellgap", version, about = "Data-driven Bell inequalities from coincidence counts")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Sample counts (or write exact statistics) from the ideal tilted realization.
    Simulate(SimulateArgs),
    /// Print the local-hidden-variable bound of a functional.
    Bound {
        functional: PathBuf,
    },
    /// Print Q, ΔQ, C, SDN and R of a functional on count data.
    Evaluate {
        functional: PathBuf,
        counts: PathBuf,
        /// Evaluate Q on the no-signaling projection of the frequencies.
        #[arg(long)]
        projected: bool,
    },
    /// Write the no-signaling projection of the observed frequencies.
    Project {
        counts: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Search for the functional maximizing R and write an analysis report.
    Optimize(OptimizeArgs),
    /// Print critical detection efficiencies of a two-outcome functional.
    Efficiency {
        functional: PathBuf,
        /// Counts or behavior file.
        data: PathBuf,
        #[arg(long, value_enum, default_value_t = ModeArg::Both)]
        mode: ModeArg,
        /// Divide the canonical coefficients by this positive constant.
        #[arg(long)]
        normalize: Option<f64>,
        /// Use the no-signaling projection of count data.
        #[arg(long)]
        projected: bool,
    },
    /// Analyze several counts files and write CSV series for plotting.
    Report(ReportArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ModeArg {
    Asymmetric,
    Symmetric,
    Both,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[arg(long, conflicts_with = "concurrence", required_unless_present = "concurrence")]
    pub alpha: Option<f64>,
    /// Choose α from the concurrence of the optimal state instead.
    #[arg(long)]
    pub concurrence: Option<f64>,
    /// Mean number of trials per setting pair.
    #[arg(long, required_unless_present = "exact")]
    pub n: Option<u64>,
    #[arg(long, required_unless_present = "exact")]
    pub seed: Option<u64>,
    /// Write the noiseless behavior instead of sampled counts.
    #[arg(long)]
    pub exact: bool,
    #[arg(long)]
    pub out: PathBuf,
}

/// Optimizer settings shared by `optimize` and `report`; flags override the
/// config file, which overrides the defaults.
#[derive(Debug, Args)]
pub struct OptimizerFlags {
    #[arg(long)]
    pub seed: u64,
    /// JSON file with any of the optimizer settings below.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub engine: Option<String>,
    #[arg(long)]
    pub restarts: Option<usize>,
    #[arg(long)]
    pub max_iters: Option<usize>,
    #[arg(long)]
    pub step_init: Option<f64>,
    #[arg(long)]
    pub convergence_tol: Option<f64>,
    #[arg(long)]
    pub denom_floor: Option<f64>,
    /// Evaluate Q on the no-signaling projection of the frequencies.
    #[arg(long)]
    pub projected: bool,
    /// Extra functional files used as starting points and scored in the report.
    #[arg(long)]
    pub witness: Vec<PathBuf>,
}

#[derive(Debug, Args)]
pub struct OptimizeArgs {
    pub counts: PathBuf,
    #[command(flatten)]
    pub optimizer: OptimizerFlags,
    #[arg(long)]
    pub out: PathBuf,
    /// Where to write the optimal functional; defaults next to the report.
    #[arg(long)]
    pub functional_out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ReportArgs {
    #[arg(required = true)]
    pub counts: Vec<PathBuf>,
    #[command(flatten)]
    pub optimizer: OptimizerFlags,
    #[arg(long)]
    pub out_dir: PathBuf,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct ConfigFile {
    engine: Option<String>,
    restarts: Option<usize>,
    max_iters: Option<usize>,
    step_init: Option<f64>,
    convergence_tol: Option<f64>,
    denom_floor: Option<f64>,
    projected: Option<bool>,
}

impl OptimizerFlags {
    pub fn resolve(&self) -> CliResult<OptimizerConfig> {
        let file = match &self.config {
            Some(path) => serde_json::from_slice::<ConfigFile>(&read_bytes(path)?)
                .map_err(|e| CliError::invalid(format!("{}: {e}", path.display())))?,
            None => ConfigFile::default(),
        };
        let defaults = OptimizerConfig::default();
        let engine = match self.engine.as_ref().or(file.engine.as_ref()) {
            Some(name) => name.parse::<Engine>()?,
            None => defaults.engine,
        };
        let cfg = OptimizerConfig {
            engine,
            restarts: self.restarts.or(file.restarts).unwrap_or(defaults.restarts),
            seed: self.seed,
            max_iters: self.max_iters.or(file.max_iters).unwrap_or(defaults.max_iters),
            step_init: self.step_init.or(file.step_init).unwrap_or(defaults.step_init),
            convergence_tol: self.convergence_tol.or(file.convergence_tol).unwrap_or(defaults.convergence_tol),
            denom_floor: self.denom_floor.or(file.denom_floor).unwrap_or(defaults.denom_floor),
            projected: self.projected || file.projected.unwrap_or(defaults.projected),
        };
        cfg.validate()?;
        Ok(cfg)
    }

    fn witnesses(&self) -> CliResult<Vec<(String, BellFunctional)>> {
        let mut out: Vec<(String, BellFunctional)> = Vec::new();
        for path in &self.witness {
            let named = read_functional(path)?;
            let name = named.name.unwrap_or_else(|| {
                path.file_stem().map_or_else(|| "witness".into(), |s| s.to_string_lossy().into_owned())
            });
            if name == OPTIMIZED || name == TILTED || out.iter().any(|(n, _)| *n == name) {
                return Err(CliError::invalid(format!("witness name `{name}` is reserved or repeated")));
            }
            out.push((name, named.functional));
        }
        Ok(out)
    }
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map_or_else(|| "undefined".to_owned(), |x| x.to_string())
}

fn simulate(args: &SimulateArgs, out: &mut dyn Write) -> CliResult<()> {
    let alpha = match (args.alpha, args.concurrence) {
        (Some(a), _) => a,
        (None, Some(c)) => alpha_for_concurrence(c)?,
        (None, None) => return Err(CliError::invalid("give --alpha or --concurrence")),
    };
    let real = tilted_realization(alpha)?;
    let behavior = real.behavior();
    let mut source = Source {
        alpha: Some(alpha),
        concurrence: Some(args.concurrence.unwrap_or_else(|| real.concurrence())),
        ..Default::default()
    };
    if args.exact {
        write_json(&args.out, &behavior_json(&behavior, Some(&source)))?;
        writeln!(out, "wrote exact behavior for alpha {alpha} to {}", args.out.display()).ok();
        return Ok(());
    }
    let (n, seed) = match (args.n, args.seed) {
        (Some(n), Some(seed)) => (n, seed),
        _ => return Err(CliError::invalid("sampling needs --n and --seed")),
    };
    if n == 0 {
        return Err(CliError::invalid("--n must be positive"));
    }
    source.n_per_setting = Some(n);
    source.seed = Some(seed);
    source.sampler = Some(SAMPLER_VERSION.to_owned());
    let counts = poisson_sample(&behavior, n, seed);
    if counts.check_positive().is_err() {
        return Err(CliError::Numerical("a setting block received no counts; increase --n".into()));
    }
    write_json(&args.out, &counts_json(&counts, Some(&source)))?;
    writeln!(out, "wrote counts for alpha {alpha} to {}", args.out.display()).ok();
    Ok(())
}

fn efficiency_data(path: &Path, projected: bool) -> CliResult<Behavior> {
    Ok(match read_data(path)? {
        DataFile::Counts(c) => {
            let f = frequencies(&c.counts, None)?;
            if projected {
                ns_project(&f)?
            } else {
                f
            }
        }
        DataFile::Behavior(b) => b.behavior,
    })
}

fn functional_out_path(report: &Path) -> PathBuf {
    let stem = report.file_stem().map_or_else(|| "report".into(), |s| s.to_string_lossy().into_owned());
    report.with_file_name(format!("{stem}.functional.json"))
}

fn optimize(args: &OptimizeArgs, out: &mut dyn Write) -> CliResult<()> {
    let cfg = args.optimizer.resolve()?;
    let witnesses = args.optimizer.witnesses()?;
    let bytes = read_bytes(&args.counts)?;
    let data = parse_counts(&bytes, &args.counts)?;
    let analysis = analyze(&data, &sha256_hex(&bytes), &witnesses, &cfg)?;
    write_json(&args.out, &analysis.report)?;
    let fpath = args.functional_out.clone().unwrap_or_else(|| functional_out_path(&args.out));
    write_json(&fpath, &analysis.report["optimized_functional"])?;
    let s = &analysis.summary;
    writeln!(out, "r: {}", analysis.report["functionals"][0]["r"]).ok();
    writeln!(out, "sdn: {}", fmt_opt(s.sdn_optimized)).ok();
    writeln!(out, "nonlocal: {}", analysis.report["functionals"][0]["nonlocal"]).ok();
    writeln!(out, "report: {}", args.out.display()).ok();
    writeln!(out, "functional: {}", fpath.display()).ok();
    Ok(())
}

fn csv_cell(v: Option<f64>) -> String {
    v.map_or_else(String::new, |x| x.to_string())
}

fn report(args: &ReportArgs, out: &mut dyn Write) -> CliResult<()> {
    let cfg = args.optimizer.resolve()?;
    let witnesses = args.optimizer.witnesses()?;
    std::fs::create_dir_all(&args.out_dir)
        .map_err(|e| CliError::invalid(format!("cannot create {}: {e}", args.out_dir.display())))?;
    let mut rows: Vec<Summary> = Vec::new();
    for path in &args.counts {
        let bytes = read_bytes(path)?;
        let data = parse_counts(&bytes, path)?;
        let analysis = analyze(&data, &sha256_hex(&bytes), &witnesses, &cfg)?;
        if analysis.summary.concurrence.is_none() {
            return Err(CliError::invalid(format!(
                "{}: needs a source block with alpha or concurrence",
                path.display()
            )));
        }
        let stem = path.file_stem().map_or_else(|| "counts".into(), |s| s.to_string_lossy().into_owned());
        write_json(&args.out_dir.join(format!("{stem}.report.json")), &analysis.report)?;
        rows.push(analysis.summary);
    }
    rows.sort_by(|a, b| a.concurrence.unwrap_or(0.0).total_cmp(&b.concurrence.unwrap_or(0.0)));

    let table = |header: &str, cells: &dyn Fn(&Summary) -> (Option<f64>, Option<f64>)| {
        let mut text = format!("{header}\n");
        for row in &rows {
            let (t, o) = cells(row);
            text.push_str(&format!("{},{},{}\n", csv_cell(row.concurrence), csv_cell(t), csv_cell(o)));
        }
        text
    };
    let files = [
        (
            "sdn.csv",
            table("concurrence,sdn_tilted,sdn_optimized", &|r| (r.sdn_tilted, r.sdn_optimized)),
        ),
        (
            "efficiency_asymmetric.csv",
            table("concurrence,eta_tilted,eta_optimized", &|r| {
                (r.eta_tilted.asymmetric, r.eta_optimized.asymmetric)
            }),
        ),
        (
            "efficiency_symmetric.csv",
            table("concurrence,eta_tilted,eta_optimized", &|r| {
                (r.eta_tilted.symmetric, r.eta_optimized.symmetric)
            }),
        ),
    ];
    for (name, text) in files {
        let path = args.out_dir.join(name);
        write_text(&path, &text)?;
        writeln!(out, "wrote {}", path.display()).ok();
    }
    Ok(())
}

pub fn execute(cli: &Cli, out: &mut dyn Write) -> CliResult<()> {
    match &cli.command {
        Command::Simulate(args) => simulate(args, out),
        Command::Bound { functional } => {
            let f = read_functional(functional)?.functional;
            let res = lhv_bound(&f)?;
            writeln!(out, "bound: {}", res.bound).ok();
            writeln!(out, "maximizers: {}", res.maximizers.len()).ok();
            Ok(())
        }
        Command::Evaluate {
            functional,
            counts,
            projected,
        } => {
            let f = read_functional(functional)?.functional;
            let data = read_counts(counts)?;
            let cfg = OptimizerConfig::default();
            let s = score_functional(&f, &data.counts, cfg.denom_floor, *projected)?;
            writeln!(out, "q: {}", s.q).ok();
            writeln!(out, "delta_q: {}", s.delta_q).ok();
            writeln!(out, "c: {}", s.c).ok();
            writeln!(out, "sdn: {}", fmt_opt(s.sdn)).ok();
            writeln!(out, "r: {}", s.r).ok();
            writeln!(out, "nonlocal: {}", s.nonlocal).ok();
            Ok(())
        }
        Command::Project { counts, out: path } => {
            let data = read_counts(counts)?;
            let f = frequencies(&data.counts, None)?;
            let p = ns_project(&f)?;
            write_json(path, &behavior_json(&p, data.source.as_ref()))?;
            writeln!(out, "kl_divergence: {}", kl_divergence(&f, &p)?).ok();
            writeln!(out, "ns_residual_before: {}", f.ns_residual().max()).ok();
            writeln!(out, "ns_residual_after: {}", p.ns_residual().max()).ok();
            Ok(())
        }
        Command::Optimize(args) => optimize(args, out),
        Command::Efficiency {
            functional,
            data,
            mode,
            normalize,
            projected,
        } => {
            let f = read_functional(functional)?.functional;
            let b = efficiency_data(data, *projected)?;
            let cf = canonicalize(&f, *normalize)?;
            writeln!(out, "canonical_bound: {}", canonical_lhv_bound(&cf)?).ok();
            writeln!(out, "canonical_value: {}", cf.evaluate(&b)?).ok();
            let modes: &[EfficiencyMode] = match mode {
                ModeArg::Asymmetric => &[EfficiencyMode::AsymmetricBPerfect],
                ModeArg::Symmetric => &[EfficiencyMode::Symmetric],
                ModeArg::Both => &[EfficiencyMode::AsymmetricBPerfect, EfficiencyMode::Symmetric],
            };
            for &m in modes {
                let res = critical_efficiency(&cf, &b, m)?;
                writeln!(out, "{}: eta_a {} eta_b {}", m.name(), res.eta_a, res.eta_b).ok();
            }
            Ok(())
        }
        Command::Report(args) => report(args, out),
    }
}

/// Parses arguments, runs the command and returns the process exit code.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { crate::error::EXIT_VALIDATION } else { 0 };
            let text = e.render().to_string();
            if code == 0 {
                write!(out, "{text}").ok();
            } else {
                write!(err, "{text}").ok();
            }
            return code;
        }
    };
    match execute(&cli, out) {
        Ok(()) => 0,
        Err(e) => {
            writeln!(err, "error: {e}").ok();
            e.exit_code()
        }
    }
}

