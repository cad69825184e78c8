//! Config-driven command-line front end.
//!
//! Six subcommands: `solve` (one integration), `sweep` (grid of runs),
//! `order` (convergence study), `stability` (threshold bisection),
//! `coeffs` (estimator weight dump), and `noise` (filtering variance
//! study). All data goes to CSV (or JSON for `solve`) with fixed
//! headers; diagnostics go to stderr. Floats are printed with 17
//! significant digits so outputs double as regression fixtures.

use std::fs::File;
use std::io::{self, Read, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::analysis::{
    error_vs_reference, noise_variance_report, observed_order, stability_threshold,
};
use crate::error::{Error, Result};
use crate::estimator::{EstimatorCoefficients, GainMode};
use crate::problems::{self, OdeProblem};
use crate::schemes::{integrate_to, SchemeSpec, Trajectory};

const LONG_HELP: &str = "\
Scheme spec grammar:
  explicit_euler | rk2_midpoint | rk4_classic
  euler_ansfd:eta=N[,gain=G][,phi=PHI][,bootstrap=euler|rk4]
  rk_ansfd:eta=N[,gain=G][,delta=D][,spacing=delta|timestep][,phi=PHI][,seed=N]
with G = calibrated|auto|unit|<K>, PHI = identity|expfit:<lambda>,
D = grid|random[:<min|auto>:<max|auto>] (auto span is [0, max(h*|f_k|, eps)]).
delta=random requires a seed (from the spec, --seed, or ANSFD_SEED).

Problems: linear_gain5, dahlquist:<lambda>, dahlquist_noisy:<lambda>, logistic.
Noise in noisy inputs is keyed on (seed, step index), not time, so runs at
different h are independent reproducible experiments; --seed reseeds it.

CSV headers (decimal point, LF line endings, 17 significant digits):
  solve:     t,y[,y_ref,abs_err]
  sweep:     problem,scheme,h,eta,status,final_value,final_error
  order:     h,final_error,pairwise_order
  stability: scheme,eta,lambda,h_max
  coeffs:    j,weight
  noise:     eta,algebraic_std,two_point_std,analytic_std
The eta column is 0 for schemes without a window; undefined values
(missing reference, first pairwise order) print as NaN.
";

/// Round-trip-safe float formatting: 17 significant digits.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

#[derive(Parser, Debug)]
#[command(name = "ansfd", version, about = "Algebraic-estimation NSFD ODE toolkit", after_long_help = LONG_HELP)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Integrate one problem and write the trajectory.
    Solve(SolveArgs),
    /// Run a grid of (h, eta) integrations and tabulate final errors.
    Sweep(SweepArgs),
    /// Measure the observed convergence order over a halving h list.
    Order(OrderArgs),
    /// Bisect the largest stable step size on y' = lambda*y.
    Stability(StabilityArgs),
    /// Dump the estimator window weights for one eta.
    Coeffs(CoeffsArgs),
    /// Monte-Carlo noise-filtering study of the slope estimator.
    Noise(NoiseArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum OutputFormat {
    Csv,
    Json,
}

/// One `solve` invocation; also the JSON config-file document. Flags
/// override file values.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub problem: Option<String>,
    pub scheme: Option<String>,
    pub h: Option<f64>,
    pub t_final: Option<f64>,
    pub seed: Option<u64>,
    pub output: Option<PathBuf>,
    pub format: Option<OutputFormat>,
}

impl RunConfig {
    pub fn from_json_file(path: &Path) -> Result<Self> {
        let mut text = String::new();
        File::open(path)?.read_to_string(&mut text)?;
        Ok(serde_json::from_str(&text)?)
    }

    /// Field-wise merge where `self` (the flags) wins.
    pub fn merged_over(mut self, base: RunConfig) -> RunConfig {
        self.problem = self.problem.or(base.problem);
        self.scheme = self.scheme.or(base.scheme);
        self.h = self.h.or(base.h);
        self.t_final = self.t_final.or(base.t_final);
        self.seed = self.seed.or(base.seed);
        self.output = self.output.or(base.output);
        self.format = self.format.or(base.format);
        self
    }

    fn require<T: Clone>(field: &Option<T>, name: &str) -> Result<T> {
        field
            .clone()
            .ok_or_else(|| Error::InvalidParameter(format!("missing required setting '{name}'")))
    }
}

#[derive(Args, Debug)]
pub struct SolveArgs {
    /// JSON config file mirroring the flags; flags override it.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Problem name, e.g. dahlquist:-1.
    #[arg(long)]
    pub problem: Option<String>,
    /// Scheme spec string (see --help for the grammar).
    #[arg(long)]
    pub scheme: Option<String>,
    /// Step size.
    #[arg(long)]
    pub h: Option<f64>,
    /// Horizon override (defaults to the problem's own).
    #[arg(long)]
    pub t_final: Option<f64>,
    /// Seed for noisy inputs and unseeded random-delta schemes.
    #[arg(long, env = "ANSFD_SEED")]
    pub seed: Option<u64>,
    /// Output path; stdout when omitted or '-'.
    #[arg(long, short)]
    pub output: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub format: Option<OutputFormat>,
}

#[derive(Args, Debug)]
pub struct SweepArgs {
    #[arg(long)]
    pub problem: String,
    /// Scheme template; the grid's eta axis overrides its eta.
    #[arg(long)]
    pub scheme: String,
    /// Axes, e.g. 'h=0.1,0.05:eta=2,3,5' (eta axis optional).
    #[arg(long)]
    pub grid: String,
    #[arg(long)]
    pub t_final: Option<f64>,
    #[arg(long, env = "ANSFD_SEED")]
    pub seed: Option<u64>,
    #[arg(long, short)]
    pub output: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct OrderArgs {
    #[arg(long)]
    pub problem: String,
    #[arg(long)]
    pub scheme: String,
    /// Halving step sizes, largest first, e.g. '0.1,0.05,0.025,0.0125'.
    #[arg(long)]
    pub h_list: String,
    #[arg(long, env = "ANSFD_SEED")]
    pub seed: Option<u64>,
    #[arg(long, short)]
    pub output: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct StabilityArgs {
    /// Scheme spec; repeat the flag for several schemes.
    #[arg(long, required = true)]
    pub scheme: Vec<String>,
    #[arg(long, allow_hyphen_values = true)]
    pub lambda: f64,
    /// Bisection bracket 'lo:hi' (lo stable, hi unstable).
    #[arg(long)]
    pub bracket: String,
    /// Steps per stability probe.
    #[arg(long, default_value_t = 1000)]
    pub steps: usize,
    #[arg(long, env = "ANSFD_SEED")]
    pub seed: Option<u64>,
    #[arg(long, short)]
    pub output: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct CoeffsArgs {
    #[arg(long)]
    pub eta: usize,
    #[arg(long, default_value_t = 1.0)]
    pub h: f64,
    /// calibrated (alias auto), unit, or a numeric K.
    #[arg(long, default_value = "auto")]
    pub gain: String,
    #[arg(long, short)]
    pub output: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct NoiseArgs {
    /// Window lengths, e.g. '2,4,8'.
    #[arg(long)]
    pub eta_list: String,
    #[arg(long, default_value_t = 0.1)]
    pub sigma: f64,
    #[arg(long, default_value_t = 10_000)]
    pub trials: usize,
    #[arg(long, default_value_t = 0.1)]
    pub h: f64,
    #[arg(long, env = "ANSFD_SEED", default_value_t = 42)]
    pub seed: u64,
    #[arg(long, short)]
    pub output: Option<PathBuf>,
}

/// Entry point used by the binary.
pub fn run_cli(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Solve(args) => {
            let flags = RunConfig {
                problem: args.problem,
                scheme: args.scheme,
                h: args.h,
                t_final: args.t_final,
                seed: args.seed,
                output: args.output,
                format: args.format,
            };
            let config = match args.config {
                Some(path) => flags.merged_over(RunConfig::from_json_file(&path)?),
                None => flags,
            };
            run(&config)
        }
        Command::Sweep(args) => sweep(&args),
        Command::Order(args) => order(&args),
        Command::Stability(args) => stability(&args),
        Command::Coeffs(args) => coeffs(&args),
        Command::Noise(args) => noise(&args),
    }
}

/// Resolves a config, integrates, and writes the trajectory.
pub fn run(config: &RunConfig) -> Result<()> {
    let problem_name = RunConfig::require(&config.problem, "problem")?;
    let scheme_text = RunConfig::require(&config.scheme, "scheme")?;
    let h = RunConfig::require(&config.h, "h")?;
    let (problem, spec) = resolve(&problem_name, &scheme_text, config.seed)?;
    let t_final = config.t_final.unwrap_or_else(|| problem.t_final());
    let traj = integrate_to(&problem, &spec, h, t_final)?;
    let sink = open_sink(config.output.as_deref())?;
    match config.format.unwrap_or(OutputFormat::Csv) {
        OutputFormat::Csv => write_trajectory_csv(sink, &problem, &traj)?,
        OutputFormat::Json => write_trajectory_json(sink, &problem, &traj)?,
    }
    Ok(())
}

/// Looks up the problem and parses the scheme, threading the run seed
/// into noisy inputs and (when absent) the scheme's own seed.
fn resolve(
    problem_name: &str,
    scheme_text: &str,
    seed: Option<u64>,
) -> Result<(OdeProblem, SchemeSpec)> {
    let mut problem = problems::lookup(problem_name)?;
    let mut spec = SchemeSpec::parse(scheme_text)?;
    if let Some(seed) = seed {
        problem = problem.with_seed(seed);
        spec = spec.ensure_seed(seed);
    }
    spec.validate()?;
    Ok((problem, spec))
}

fn open_sink(output: Option<&Path>) -> Result<Box<dyn Write>> {
    match output {
        Some(path) if path != Path::new("-") => Ok(Box::new(File::create(path)?)),
        _ => Ok(Box::new(io::stdout().lock())),
    }
}

fn write_trajectory_csv(sink: Box<dyn Write>, problem: &OdeProblem, traj: &Trajectory) -> Result<()> {
    let mut w = csv::Writer::from_writer(sink);
    let dim = traj.dim();
    let has_ref = problem.reference().is_some();
    let mut header = vec!["t".to_string()];
    if dim == 1 {
        header.push("y".into());
        if has_ref {
            header.push("y_ref".into());
            header.push("abs_err".into());
        }
    } else {
        for i in 0..dim {
            header.push(format!("y{i}"));
        }
        if has_ref {
            for i in 0..dim {
                header.push(format!("y{i}_ref"));
            }
            for i in 0..dim {
                header.push(format!("abs_err{i}"));
            }
        }
    }
    w.write_record(&header)?;
    for (t, y) in traj.times.iter().zip(&traj.values) {
        let mut row = vec![fmt_f64(*t)];
        row.extend(y.iter().map(|v| fmt_f64(*v)));
        if has_ref {
            let reference = problem.reference_at(*t).expect("reference present");
            row.extend(reference.iter().map(|v| fmt_f64(*v)));
            row.extend(y.iter().zip(&reference).map(|(a, b)| fmt_f64((a - b).abs())));
        }
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

fn write_trajectory_json(
    mut sink: Box<dyn Write>,
    problem: &OdeProblem,
    traj: &Trajectory,
) -> Result<()> {
    let mut doc = serde_json::json!({
        "meta": {
            "problem": traj.meta.problem,
            "scheme": traj.meta.scheme,
            "h": traj.meta.h,
            "seed": traj.meta.seed,
            "collapsed_spans": traj.meta.diagnostics.collapsed_spans,
        },
        "times": traj.times,
        "values": traj.values,
    });
    if problem.reference().is_some() {
        let refs: Vec<Vec<f64>> =
            traj.times.iter().map(|t| problem.reference_at(*t).expect("reference")).collect();
        let errs: Vec<Vec<f64>> = traj
            .values
            .iter()
            .zip(&refs)
            .map(|(y, r)| y.iter().zip(r).map(|(a, b)| (a - b).abs()).collect())
            .collect();
        doc["reference"] = serde_json::json!(refs);
        doc["abs_err"] = serde_json::json!(errs);
    }
    serde_json::to_writer_pretty(&mut sink, &doc)?;
    writeln!(sink)?;
    Ok(())
}

struct SweepRow {
    scheme: String,
    h: f64,
    eta: usize,
    status: String,
    final_value: f64,
    final_error: f64,
}

fn sweep(args: &SweepArgs) -> Result<()> {
    let (h_values, eta_values) = parse_grid(&args.grid)?;
    let base_spec = SchemeSpec::parse(&args.scheme)?;
    if eta_values.is_some() && base_spec.eta().is_none() {
        return Err(Error::InvalidParameter(format!(
            "grid has an eta axis but scheme '{base_spec}' has no eta parameter"
        )));
    }
    // cartesian product in deterministic (eta, h) sorted order
    let mut combos: Vec<(Option<usize>, f64)> = Vec::new();
    for eta in eta_values.map_or(vec![None], |v| v.into_iter().map(Some).collect()) {
        for &h in &h_values {
            combos.push((eta, h));
        }
    }
    combos.sort_by(|a, b| {
        (a.0.unwrap_or(0), a.1).partial_cmp(&(b.0.unwrap_or(0), b.1)).expect("finite grid")
    });
    let rows: Vec<SweepRow> = combos
        .par_iter()
        .map(|&(eta, h)| -> Result<SweepRow> {
            let (problem, mut spec) = resolve(&args.problem, &args.scheme, args.seed)?;
            if let Some(eta) = eta {
                spec = spec.with_eta(eta)?;
            }
            let t_final = args.t_final.unwrap_or_else(|| problem.t_final());
            let (status, final_value, final_error) = match integrate_to(&problem, &spec, h, t_final)
            {
                Ok(traj) => {
                    let err = error_vs_reference(&problem, &traj)
                        .map_or(f64::NAN, |r| r.final_error);
                    ("ok".to_string(), traj.final_value()[0], err)
                }
                Err(Error::Divergence { step, .. }) => {
                    (format!("diverged@{step}"), f64::NAN, f64::NAN)
                }
                Err(other) => return Err(other),
            };
            Ok(SweepRow {
                scheme: spec.to_string(),
                h,
                eta: spec.eta().unwrap_or(0),
                status,
                final_value,
                final_error,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let mut w = csv::Writer::from_writer(open_sink(args.output.as_deref())?);
    w.write_record(["problem", "scheme", "h", "eta", "status", "final_value", "final_error"])?;
    for row in rows {
        w.write_record([
            args.problem.clone(),
            row.scheme,
            fmt_f64(row.h),
            row.eta.to_string(),
            row.status,
            fmt_f64(row.final_value),
            fmt_f64(row.final_error),
        ])?;
    }
    w.flush()?;
    Ok(())
}

fn order(args: &OrderArgs) -> Result<()> {
    let h_values = parse_f64_list(&args.h_list)?;
    let (problem, spec) = resolve(&args.problem, &args.scheme, args.seed)?;
    let estimate = observed_order(&problem, &spec, &h_values)?;
    let mut w = csv::Writer::from_writer(open_sink(args.output.as_deref())?);
    w.write_record(["h", "final_error", "pairwise_order"])?;
    for (i, (&h, &err)) in estimate.h_values.iter().zip(&estimate.errors).enumerate() {
        let pairwise = if i == 0 { f64::NAN } else { estimate.pairwise_orders[i - 1] };
        w.write_record([fmt_f64(h), fmt_f64(err), fmt_f64(pairwise)])?;
    }
    w.flush()?;
    match estimate.summary_order {
        Some(order) => eprintln!("summary_order={order}"),
        None => eprintln!("summary_order=undefined (degenerate errors)"),
    }
    Ok(())
}

fn stability(args: &StabilityArgs) -> Result<()> {
    let bracket = parse_bracket(&args.bracket)?;
    let mut w = csv::Writer::from_writer(open_sink(args.output.as_deref())?);
    w.write_record(["scheme", "eta", "lambda", "h_max"])?;
    for scheme_text in &args.scheme {
        let mut spec = SchemeSpec::parse(scheme_text)?;
        if let Some(seed) = args.seed {
            spec = spec.ensure_seed(seed);
        }
        let h_max = stability_threshold(&spec, args.lambda, args.steps, bracket)?;
        w.write_record([
            spec.to_string(),
            spec.eta().unwrap_or(0).to_string(),
            fmt_f64(args.lambda),
            fmt_f64(h_max),
        ])?;
    }
    w.flush()?;
    Ok(())
}

fn coeffs(args: &CoeffsArgs) -> Result<()> {
    let gain: GainMode =
        args.gain.parse().map_err(Error::InvalidParameter)?;
    let coeffs = EstimatorCoefficients::new(args.eta, args.h, gain)?;
    let mut w = csv::Writer::from_writer(open_sink(args.output.as_deref())?);
    w.write_record(["j", "weight"])?;
    for (j, weight) in coeffs.raw_weights().iter().enumerate() {
        w.write_record([j.to_string(), fmt_f64(*weight)])?;
    }
    w.flush()?;
    eprintln!(
        "eta={} h={} K={} scale={}",
        coeffs.eta(),
        fmt_f64(coeffs.h()),
        fmt_f64(coeffs.gain()),
        fmt_f64(coeffs.scale())
    );
    Ok(())
}

fn noise(args: &NoiseArgs) -> Result<()> {
    let eta_values = parse_usize_list(&args.eta_list)?;
    let rows = noise_variance_report(&eta_values, args.sigma, args.trials, args.seed, args.h)?;
    let mut w = csv::Writer::from_writer(open_sink(args.output.as_deref())?);
    w.write_record(["eta", "algebraic_std", "two_point_std", "analytic_std"])?;
    for row in rows {
        w.write_record([
            row.eta.to_string(),
            fmt_f64(row.algebraic_std),
            fmt_f64(row.two_point_std),
            fmt_f64(row.analytic_std),
        ])?;
    }
    w.flush()?;
    Ok(())
}

fn parse_f64_list(text: &str) -> Result<Vec<f64>> {
    text.split(',')
        .map(|s| {
            s.trim()
                .parse::<f64>()
                .map_err(|_| Error::InvalidParameter(format!("bad number '{s}' in list")))
        })
        .collect()
}

fn parse_usize_list(text: &str) -> Result<Vec<usize>> {
    text.split(',')
        .map(|s| {
            s.trim()
                .parse::<usize>()
                .map_err(|_| Error::InvalidParameter(format!("bad integer '{s}' in list")))
        })
        .collect()
}

fn parse_bracket(text: &str) -> Result<(f64, f64)> {
    let (lo, hi) = text
        .split_once(':')
        .ok_or_else(|| Error::InvalidParameter(format!("bracket must be 'lo:hi', got '{text}'")))?;
    let lo: f64 =
        lo.parse().map_err(|_| Error::InvalidParameter(format!("bad bracket low '{lo}'")))?;
    let hi: f64 =
        hi.parse().map_err(|_| Error::InvalidParameter(format!("bad bracket high '{hi}'")))?;
    Ok((lo, hi))
}

/// Parses `h=0.1,0.05[:eta=2,3,5]` into its axes.
fn parse_grid(text: &str) -> Result<(Vec<f64>, Option<Vec<usize>>)> {
    let mut h_values = None;
    let mut eta_values = None;
    for axis in text.split(':') {
        let (key, list) = axis.split_once('=').ok_or_else(|| {
            Error::InvalidParameter(format!("grid axis must be key=v1,v2,..., got '{axis}'"))
        })?;
        match key {
            "h" => h_values = Some(parse_f64_list(list)?),
            "eta" => eta_values = Some(parse_usize_list(list)?),
            _ => {
                return Err(Error::InvalidParameter(format!(
                    "unknown grid axis '{key}' (expected h or eta)"
                )))
            }
        }
    }
    let h_values =
        h_values.ok_or_else(|| Error::InvalidParameter("grid needs an h axis".into()))?;
    Ok((h_values, eta_values))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_parsing() {
        let (h, eta) = parse_grid("h=0.1,0.05:eta=2,3,5").unwrap();
        assert_eq!(h, vec![0.1, 0.05]);
        assert_eq!(eta, Some(vec![2, 3, 5]));
        let (h, eta) = parse_grid("h=0.2").unwrap();
        assert_eq!(h, vec![0.2]);
        assert_eq!(eta, None);
        assert!(parse_grid("eta=2,3").is_err());
        assert!(parse_grid("h=0.1:beta=2").is_err());
        assert!(parse_grid("h").is_err());
    }

    #[test]
    fn bracket_parsing() {
        assert_eq!(parse_bracket("1.0:3.0").unwrap(), (1.0, 3.0));
        assert!(parse_bracket("1.0").is_err());
        assert!(parse_bracket("a:b").is_err());
    }

    #[test]
    fn config_merge_flags_win() {
        let file = RunConfig {
            problem: Some("dahlquist:-1".into()),
            scheme: Some("explicit_euler".into()),
            h: Some(0.1),
            seed: Some(1),
            ..Default::default()
        };
        let flags = RunConfig { h: Some(0.05), ..Default::default() };
        let merged = flags.merged_over(file);
        assert_eq!(merged.h, Some(0.05));
        assert_eq!(merged.problem.as_deref(), Some("dahlquist:-1"));
        assert_eq!(merged.seed, Some(1));
    }

    #[test]
    fn float_formatting_round_trips() {
        for &x in &[0.1, 0.9, 1.0 / 3.0, 2.0f64.sqrt(), 1e-300, -7.25e17, 0.0] {
            let s = fmt_f64(x);
            let back: f64 = s.parse().unwrap();
            assert_eq!(back.to_bits(), x.to_bits(), "{x} -> {s} -> {back}");
            assert!(!s.contains(','));
        }
    }

    #[test]
    fn run_requires_core_fields() {
        let err = run(&RunConfig::default()).unwrap_err();
        assert!(matches!(err, Error::InvalidParameter(_)));
    }

    #[test]
    fn cli_parses_spec_example_invocations() {
        use clap::Parser;
        Cli::try_parse_from([
            "ansfd", "solve", "--problem", "dahlquist:-1", "--scheme", "explicit_euler", "--h",
            "0.1",
        ])
        .unwrap();
        Cli::try_parse_from([
            "ansfd",
            "sweep",
            "--problem",
            "dahlquist:-1",
            "--scheme",
            "euler_ansfd:eta=2",
            "--grid",
            "h=0.1,0.05:eta=2,3,5",
        ])
        .unwrap();
        Cli::try_parse_from([
            "ansfd",
            "stability",
            "--scheme",
            "explicit_euler",
            "--lambda",
            "-1",
            "--bracket",
            "1.0:3.0",
        ])
        .unwrap();
        Cli::try_parse_from(["ansfd", "coeffs", "--eta", "3"]).unwrap();
        Cli::try_parse_from([
            "ansfd",
            "order",
            "--problem",
            "dahlquist:-1",
            "--scheme",
            "rk4_classic",
            "--h-list",
            "0.1,0.05,0.025,0.0125",
        ])
        .unwrap();
        Cli::try_parse_from([
            "ansfd",
            "noise",
            "--eta-list",
            "2,4,8",
            "--sigma",
            "0.1",
            "--trials",
            "2000",
        ])
        .unwrap();
    }
}
