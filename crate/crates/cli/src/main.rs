//! `randprod` — command line front end.
//!
//! Subcommands map one-to-one onto the library modules:
//! `sieve` (tables), `sum-scan` (exponential-sum traces), `egk`
//! (moment/subadditivity harness), `eval`/`continue`/`winding`
//! (evaluation and continuation of f(s, θ)), `mc` (seeded campaigns).
//! All randomness is seed-controlled; no output carries timestamps or any
//! other nondeterministic field.

use anyhow::{Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};
use std::fs;
use std::io::Write as _;
use std::path::PathBuf;

use randprod_core::continuation::{
    continue_log_f, dirichlet_partial, euler_product, winding_number, ContinuationParams, Rect,
    SPoint,
};
use randprod_core::egk::{moment_monte_carlo, subadditivity_fuzz, EgkConfig, MomentReport};
use randprod_core::error::Error as CoreError;
use randprod_core::experiments::{run_campaign, ExperimentConfig};
use randprod_core::exp_sums::{trace, GridSpec};
use randprod_core::{LambdaTable, ThetaSample};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum OutputFormat {
    Csv,
    Json,
}

#[derive(Parser)]
#[command(name = "randprod", version, about = "Random Euler products over the primes: sums, moments, continuation")]
struct Cli {
    /// JSON file with global settings; overrides the flags below.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Sieve limit floor (the table is grown to what the command needs).
    #[arg(long, global = true)]
    sieve_limit: Option<u64>,

    /// Worker threads (default: all cores; RANDPROD_THREADS as fallback).
    #[arg(long, global = true)]
    threads: Option<usize>,

    /// Output format where both make sense.
    #[arg(long, global = true, value_enum)]
    format: Option<OutputFormat>,

    /// error | warn | info | debug
    #[arg(long, global = true, default_value = "warn")]
    log_level: String,

    #[command(subcommand)]
    cmd: Cmd,
}

/// Global settings file: same knobs as the global flags.
#[derive(Debug, Default, Deserialize)]
struct GlobalConfig {
    sieve_limit: Option<u64>,
    threads: Option<usize>,
    format: Option<String>,
    log_level: Option<String>,
}

#[derive(Subcommand)]
enum Cmd {
    /// Build the prime/Λ table and print limit, π(L), ψ(L).
    Sieve {
        #[arg(long)]
        limit: u64,
        /// Cross-check Λ against trial division on a sample.
        #[arg(long)]
        check: bool,
        #[arg(long, default_value = "-")]
        out: String,
    },
    /// Trace S_N(θ) and ℭ(N) along a checkpoint grid.
    #[command(name = "sum-scan")]
    SumScan {
        /// θ as a float ("0.37"), a fraction ("2/5"), or "seed:K".
        #[arg(long)]
        theta: String,
        #[arg(long)]
        nmax: u64,
        /// "geometric[:ratio]" or "list:n1,n2,...".
        #[arg(long, default_value = "geometric")]
        grid: String,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long, default_value = "-")]
        out: String,
    },
    /// Erdős–Gál–Koksma harness.
    Egk {
        #[command(subcommand)]
        sub: EgkCmd,
    },
    /// Evaluate f(s, θ) for Re s > 1 by Euler product and Dirichlet sum.
    Eval {
        /// s as "sigma,t".
        #[arg(long)]
        s: String,
        #[arg(long)]
        theta: String,
        #[arg(long, default_value_t = 1_000_000)]
        nmax: u64,
        #[arg(long, default_value_t = 1_000_000)]
        pmax: u64,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long, default_value = "-")]
        out: String,
    },
    /// Continue log f to Re s > 1/2 from an anchor line.
    Continue {
        #[arg(long)]
        s: String,
        #[arg(long)]
        theta: String,
        /// Anchor abscissa σ₀.
        #[arg(long, default_value_t = 2.0)]
        anchor: f64,
        #[arg(long, default_value_t = 1_000_000)]
        nmax: u64,
        #[arg(long, default_value_t = 1_000_000)]
        pmax: u64,
        #[arg(long, default_value_t = 1_000_000)]
        cutoff: u64,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long, default_value = "-")]
        out: String,
    },
    /// Winding number of f around a rectangle (argument principle).
    Winding {
        /// Rectangle as "sigma1,sigma2,t1,t2".
        #[arg(long)]
        rect: String,
        #[arg(long)]
        theta: String,
        /// Initial panel length along the contour.
        #[arg(long, default_value_t = 0.25)]
        step: f64,
        #[arg(long, default_value_t = 1_000_000)]
        nmax: u64,
        #[arg(long, default_value_t = 1_000_000)]
        pmax: u64,
        #[arg(long, default_value_t = 1_000_000)]
        cutoff: u64,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long, default_value = "-")]
        out: String,
    },
    /// Seeded Monte Carlo campaign over θ with rational controls.
    Mc {
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long, default_value_t = 100)]
        thetas: usize,
        #[arg(long, default_value_t = 1_000_000)]
        nmax: u64,
        /// Comma list of rationals, e.g. "0,1/2,1/3,2/5".
        #[arg(long, default_value = "0,1/2,1/3,2/5")]
        controls: String,
        #[arg(long, default_value = "geometric")]
        grid: String,
        #[arg(long, default_value_t = 0.05)]
        epsilon: f64,
        #[arg(long, default_value = "-")]
        out: String,
    },
}

#[derive(Subcommand)]
enum EgkCmd {
    /// Closed-form vs Monte Carlo block moments over cells from a JSON
    /// file (array of [M, N] pairs).
    Moments {
        #[arg(long)]
        cells: PathBuf,
        #[arg(long, default_value_t = 10_000)]
        samples: usize,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long, default_value = "-")]
        out: String,
    },
    /// Subadditivity fuzz: max violation over random blocks.
    Fuzz {
        #[arg(long, default_value_t = 10_000)]
        trials: u64,
        #[arg(long, default_value_t = 10_000)]
        ncap: u64,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long, default_value = "-")]
        out: String,
    },
}

fn main() {
    let cli = Cli::parse();
    if let Err(e) = run(cli) {
        eprintln!("error: {e:#}");
        std::process::exit(exit_code(&e));
    }
}

/// 2 invalid arguments/domain, 3 resource limits, 4 numerical failure,
/// 1 anything else (I/O and friends).
fn exit_code(e: &anyhow::Error) -> i32 {
    match e.downcast_ref::<CoreError>() {
        Some(CoreError::InvalidArgument(_)) | Some(CoreError::Domain(_)) => 2,
        Some(CoreError::ResourceLimit(_)) => 3,
        Some(CoreError::Quadrature { .. }) | Some(CoreError::FitUndefined(_)) => 4,
        None => 1,
    }
}

struct Global {
    sieve_limit: Option<u64>,
    format: Option<OutputFormat>,
    verbose: bool,
}

fn run(cli: Cli) -> Result<()> {
    let mut sieve_limit = cli.sieve_limit;
    let mut threads = cli.threads;
    let mut format = cli.format;
    let mut log_level = cli.log_level.clone();

    if let Some(path) = &cli.config {
        let text = fs::read_to_string(path)
            .with_context(|| format!("reading config {}", path.display()))?;
        let cfg: GlobalConfig = serde_json::from_str(&text)
            .map_err(|e| CoreError::invalid(format!("bad config file: {e}")))?;
        sieve_limit = cfg.sieve_limit.or(sieve_limit);
        threads = cfg.threads.or(threads);
        if let Some(f) = cfg.format {
            format = Some(match f.as_str() {
                "csv" => OutputFormat::Csv,
                "json" => OutputFormat::Json,
                other => return Err(CoreError::invalid(format!("bad format '{other}'")).into()),
            });
        }
        if let Some(l) = cfg.log_level {
            log_level = l;
        }
    }

    let threads = threads.or_else(|| {
        std::env::var("RANDPROD_THREADS").ok().and_then(|v| v.parse().ok())
    });
    if let Some(n) = threads {
        if n < 1 {
            return Err(CoreError::invalid("threads must be >= 1".to_string()).into());
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .context("building thread pool")?;
    }

    let global = Global {
        sieve_limit,
        format,
        verbose: matches!(log_level.as_str(), "info" | "debug"),
    };
    dispatch(cli.cmd, &global)
}

fn dispatch(cmd: Cmd, g: &Global) -> Result<()> {
    match cmd {
        Cmd::Sieve { limit, check, out } => cmd_sieve(g, limit, check, &out),
        Cmd::SumScan { theta, nmax, grid, seed, out } => {
            cmd_sum_scan(g, &theta, nmax, &grid, seed, &out)
        }
        Cmd::Egk { sub } => match sub {
            EgkCmd::Moments { cells, samples, seed, out } => {
                cmd_egk_moments(g, &cells, samples, seed, &out)
            }
            EgkCmd::Fuzz { trials, ncap, seed, out } => cmd_egk_fuzz(g, trials, ncap, seed, &out),
        },
        Cmd::Eval { s, theta, nmax, pmax, seed, out } => {
            cmd_eval(g, &s, &theta, nmax, pmax, seed, &out)
        }
        Cmd::Continue { s, theta, anchor, nmax, pmax, cutoff, seed, out } => {
            cmd_continue(g, &s, &theta, anchor, nmax, pmax, cutoff, seed, &out)
        }
        Cmd::Winding { rect, theta, step, nmax, pmax, cutoff, seed, out } => {
            cmd_winding(g, &rect, &theta, step, nmax, pmax, cutoff, seed, &out)
        }
        Cmd::Mc { seed, thetas, nmax, controls, grid, epsilon, out } => {
            cmd_mc(g, seed, thetas, nmax, &controls, &grid, epsilon, &out)
        }
    }
}

// ---------------------------------------------------------------------------
// shared parsing and output helpers

fn build_table(g: &Global, needed: u64) -> Result<LambdaTable> {
    let limit = g.sieve_limit.unwrap_or(0).max(needed).max(2);
    if g.verbose {
        eprintln!("sieving to {limit}");
    }
    Ok(LambdaTable::build(limit)?)
}

fn parse_theta(spec: &str, seed: u64) -> Result<ThetaSample> {
    if let Some(idx) = spec.strip_prefix("seed:") {
        let index: u64 = idx
            .parse()
            .map_err(|_| CoreError::invalid(format!("bad seeded theta '{spec}'")))?;
        return Ok(ThetaSample::seeded(seed, index));
    }
    Ok(spec.parse::<ThetaSample>()?)
}

fn parse_s(spec: &str) -> Result<SPoint> {
    let parts: Vec<&str> = spec.split(',').collect();
    if parts.len() != 2 {
        return Err(CoreError::invalid(format!("s must be 'sigma,t', got '{spec}'")).into());
    }
    let sigma: f64 = parts[0]
        .trim()
        .parse()
        .map_err(|_| CoreError::invalid(format!("bad sigma in '{spec}'")))?;
    let t: f64 = parts[1]
        .trim()
        .parse()
        .map_err(|_| CoreError::invalid(format!("bad t in '{spec}'")))?;
    Ok(SPoint::new(sigma, t))
}

fn parse_rect(spec: &str) -> Result<Rect> {
    let vals: Vec<f64> = spec
        .split(',')
        .map(|p| p.trim().parse::<f64>())
        .collect::<std::result::Result<_, _>>()
        .map_err(|_| CoreError::invalid(format!("rect must be 'sigma1,sigma2,t1,t2', got '{spec}'")))?;
    if vals.len() != 4 {
        return Err(CoreError::invalid(format!("rect needs 4 numbers, got {}", vals.len())).into());
    }
    Ok(Rect { sigma_min: vals[0], sigma_max: vals[1], t_min: vals[2], t_max: vals[3] })
}

fn parse_grid(spec: &str) -> Result<GridSpec> {
    if spec == "geometric" {
        return Ok(GridSpec::default());
    }
    if let Some(r) = spec.strip_prefix("geometric:") {
        let ratio: f64 = r
            .parse()
            .map_err(|_| CoreError::invalid(format!("bad grid ratio '{r}'")))?;
        return Ok(GridSpec::Geometric { start: randprod_core::exp_sums::DEFAULT_GRID_START, ratio });
    }
    if let Some(list) = spec.strip_prefix("list:") {
        let pts: Vec<u64> = list
            .split(',')
            .map(|p| p.trim().parse::<u64>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|_| CoreError::invalid(format!("bad grid list '{list}'")))?;
        return Ok(GridSpec::Explicit(pts));
    }
    Err(CoreError::invalid(format!("unknown grid spec '{spec}'")).into())
}

fn parse_controls(spec: &str) -> Result<Vec<(u64, u64)>> {
    if spec.trim().is_empty() {
        return Ok(Vec::new());
    }
    spec.split(',')
        .map(|item| {
            let item = item.trim();
            if let Some((a, q)) = item.split_once('/') {
                let a = a.parse::<u64>();
                let q = q.parse::<u64>();
                match (a, q) {
                    (Ok(a), Ok(q)) if q > 0 && a < q => Ok((a, q)),
                    _ => Err(CoreError::invalid(format!("bad control '{item}'")).into()),
                }
            } else if item == "0" {
                Ok((0, 1))
            } else {
                Err(CoreError::invalid(format!(
                    "controls are rationals like '1/3' (or '0'), got '{item}'"
                ))
                .into())
            }
        })
        .collect()
}

fn write_output(out: &str, content: &str) -> Result<()> {
    if out == "-" {
        let mut stdout = std::io::stdout().lock();
        stdout.write_all(content.as_bytes())?;
        if !content.ends_with('\n') {
            stdout.write_all(b"\n")?;
        }
        Ok(())
    } else {
        fs::write(out, content).with_context(|| format!("writing {out}"))
    }
}

fn to_json<T: Serialize>(value: &T) -> Result<String> {
    Ok(serde_json::to_string_pretty(value)?)
}

// ---------------------------------------------------------------------------
// subcommands

#[derive(Serialize)]
struct SieveOutput {
    schema: u32,
    limit: u64,
    pi: u64,
    psi: f64,
    check: Option<String>,
}

fn cmd_sieve(g: &Global, limit: u64, check: bool, out: &str) -> Result<()> {
    if limit < 2 {
        return Err(CoreError::invalid(format!("sieve limit must be >= 2, got {limit}")).into());
    }
    let table = build_table(g, limit)?;
    let pi = table.prime_count(limit)?;
    let psi = table.chebyshev_psi(limit)?;
    let check_result = if check {
        // trial-division sweep over a bounded prefix
        let upto = limit.min(100_000);
        for n in 1..=upto {
            let expect = lambda_trial(n);
            let got = table.lambda(n)?;
            if (got - expect).abs() > 1e-12 * (1.0 + expect.abs()) {
                anyhow::bail!("sieve check failed at n = {n}: {got} vs {expect}");
            }
        }
        Some(format!("ok (trial division to {upto})"))
    } else {
        None
    };
    let content = match g.format {
        Some(OutputFormat::Json) => to_json(&SieveOutput {
            schema: 1,
            limit,
            pi,
            psi,
            check: check_result,
        })?,
        Some(OutputFormat::Csv) => {
            format!("# schema=1\nlimit,pi,psi\n{limit},{pi},{psi}\n")
        }
        None => match &check_result {
            Some(c) => format!("limit={limit} pi={pi} psi={psi} check={c}"),
            None => format!("limit={limit} pi={pi} psi={psi}"),
        },
    };
    write_output(out, &content)
}

/// Independent trial-division Λ for `sieve --check`.
fn lambda_trial(n: u64) -> f64 {
    if n < 2 {
        return 0.0;
    }
    let mut rest = n;
    let mut p = 0u64;
    let mut d = 2u64;
    while d * d <= rest {
        if rest.is_multiple_of(d) {
            p = d;
            while rest.is_multiple_of(d) {
                rest /= d;
            }
            break;
        }
        d += 1;
    }
    if p == 0 {
        (n as f64).ln()
    } else if rest == 1 {
        (p as f64).ln()
    } else {
        0.0
    }
}

fn cmd_sum_scan(g: &Global, theta: &str, nmax: u64, grid: &str, seed: u64, out: &str) -> Result<()> {
    let theta = parse_theta(theta, seed)?;
    let grid = parse_grid(grid)?.materialize(nmax)?;
    let table = build_table(g, nmax)?;
    let tr = trace(&theta, &grid, &table)?;
    let content = match g.format {
        Some(OutputFormat::Json) => to_json(&tr)?,
        _ => tr.to_csv(),
    };
    write_output(out, &content)
}

#[derive(Serialize)]
struct MomentsOutput {
    schema: u32,
    seed: u64,
    samples: usize,
    reports: Vec<MomentReport>,
}

fn cmd_egk_moments(g: &Global, cells: &PathBuf, samples: usize, seed: u64, out: &str) -> Result<()> {
    let text = fs::read_to_string(cells)
        .with_context(|| format!("reading cells {}", cells.display()))?;
    let cells: Vec<(u64, u64)> = serde_json::from_str(&text)
        .map_err(|e| CoreError::invalid(format!("cells file must be a JSON array of [M, N] pairs: {e}")))?;
    let needed = cells
        .iter()
        .map(|&(m, n)| m.saturating_add(n))
        .max()
        .unwrap_or(2);
    let table = build_table(g, needed)?;
    let mut reports = Vec::with_capacity(cells.len());
    for (i, &(m, n)) in cells.iter().enumerate() {
        let cfg = EgkConfig { mc_samples: samples, seed: seed.wrapping_add(i as u64), ..Default::default() };
        reports.push(moment_monte_carlo(m, n, &cfg, &table)?);
    }
    let content = match g.format {
        Some(OutputFormat::Json) => to_json(&MomentsOutput { schema: 1, seed, samples, reports })?,
        _ => {
            let mut s = format!("# schema=1\n{}\n", MomentReport::CSV_HEADER);
            for r in &reports {
                s.push_str(&r.csv_row());
                s.push('\n');
            }
            s
        }
    };
    write_output(out, &content)
}

#[derive(Serialize)]
struct FuzzOutput {
    schema: u32,
    trials: u64,
    ncap: u64,
    seed: u64,
    max_violation: f64,
    ok: bool,
}

fn cmd_egk_fuzz(g: &Global, trials: u64, ncap: u64, seed: u64, out: &str) -> Result<()> {
    let table = build_table(g, ncap)?;
    let max_violation = subadditivity_fuzz(trials, ncap, seed, &table)?;
    let ok = max_violation <= 1e-10;
    let payload = FuzzOutput { schema: 1, trials, ncap, seed, max_violation, ok };
    let content = match g.format {
        Some(OutputFormat::Csv) => format!(
            "# schema=1\ntrials,ncap,seed,max_violation,ok\n{},{},{},{},{}\n",
            trials, ncap, seed, max_violation, ok
        ),
        _ => to_json(&payload)?,
    };
    write_output(out, &content)
}

#[derive(Serialize)]
struct EvalOutput {
    schema: u32,
    s: SPoint,
    theta: ThetaSample,
    f: num_complex::Complex64,
    euler: randprod_core::continuation::EulerEval,
    dirichlet: randprod_core::continuation::SeriesSum,
    agreement: f64,
}

fn cmd_eval(
    g: &Global,
    s: &str,
    theta: &str,
    nmax: u64,
    pmax: u64,
    seed: u64,
    out: &str,
) -> Result<()> {
    let s = parse_s(s)?;
    let theta = parse_theta(theta, seed)?;
    let table = build_table(g, nmax.max(pmax))?;
    let euler = euler_product(s, &theta, pmax, &table)?;
    let dirichlet = dirichlet_partial(s, &theta, nmax, &table)?;
    let payload = EvalOutput {
        schema: 1,
        s,
        theta,
        f: euler.value,
        agreement: (euler.value - dirichlet.value).norm(),
        euler,
        dirichlet,
    };
    let content = match g.format {
        Some(OutputFormat::Csv) => format!(
            "# schema=1\nsigma,t,theta,re_f,im_f,log_tail,agreement\n{},{},{},{},{},{},{}\n",
            s.sigma, s.t, theta, euler.value.re, euler.value.im, euler.log_tail, payload.agreement
        ),
        _ => to_json(&payload)?,
    };
    write_output(out, &content)
}

#[derive(Serialize)]
struct ContinueOutput {
    schema: u32,
    #[serde(flatten)]
    result: randprod_core::continuation::ContinuationResult,
}

#[allow(clippy::too_many_arguments)]
fn cmd_continue(
    g: &Global,
    s: &str,
    theta: &str,
    anchor: f64,
    nmax: u64,
    pmax: u64,
    cutoff: u64,
    seed: u64,
    out: &str,
) -> Result<()> {
    let s = parse_s(s)?;
    let theta = parse_theta(theta, seed)?;
    let table = build_table(g, nmax.max(pmax).max(cutoff))?;
    let params = ContinuationParams {
        n_max: nmax,
        p_max: pmax,
        cutoff,
        anchor_sigma: anchor,
        ..Default::default()
    };
    let result = continue_log_f(s, &theta, &params, &table)?;
    let content = match g.format {
        Some(OutputFormat::Csv) => format!(
            "# schema=1\nsigma,t,theta,re_log_f,im_log_f,re_f,im_f,re_logderiv,im_logderiv,trunc_error,flags\n{},{},{},{},{},{},{},{},{},{},{}\n",
            s.sigma,
            s.t,
            theta,
            result.log_f.re,
            result.log_f.im,
            result.f.re,
            result.f.im,
            result.logderiv.re,
            result.logderiv.im,
            result.trunc_error,
            result.flags.join(";")
        ),
        _ => to_json(&ContinueOutput { schema: 1, result })?,
    };
    write_output(out, &content)
}

#[derive(Serialize)]
struct WindingOutput {
    schema: u32,
    rect: Rect,
    theta: ThetaSample,
    step: f64,
    #[serde(flatten)]
    result: randprod_core::continuation::WindingResult,
}

#[allow(clippy::too_many_arguments)]
fn cmd_winding(
    g: &Global,
    rect: &str,
    theta: &str,
    step: f64,
    nmax: u64,
    pmax: u64,
    cutoff: u64,
    seed: u64,
    out: &str,
) -> Result<()> {
    let rect = parse_rect(rect)?;
    let theta = parse_theta(theta, seed)?;
    let table = build_table(g, nmax.max(pmax).max(cutoff))?;
    let params = ContinuationParams { n_max: nmax, p_max: pmax, cutoff, ..Default::default() };
    let result = winding_number(rect, &theta, step, &params, &table)?;
    let content = match g.format {
        Some(OutputFormat::Csv) => format!(
            "# schema=1\nsigma1,sigma2,t1,t2,theta,re_raw,im_raw,nearest,quad_error,stiff\n{},{},{},{},{},{},{},{},{},{}\n",
            rect.sigma_min,
            rect.sigma_max,
            rect.t_min,
            rect.t_max,
            theta,
            result.raw.re,
            result.raw.im,
            result.nearest,
            result.quad_error,
            result.stiff
        ),
        _ => to_json(&WindingOutput { schema: 1, rect, theta, step, result })?,
    };
    write_output(out, &content)
}

#[allow(clippy::too_many_arguments)]
fn cmd_mc(
    g: &Global,
    seed: u64,
    thetas: usize,
    nmax: u64,
    controls: &str,
    grid: &str,
    epsilon: f64,
    out: &str,
) -> Result<()> {
    let cfg = ExperimentConfig {
        seed,
        theta_count: thetas,
        n_max: nmax,
        grid: parse_grid(grid)?,
        epsilon,
        controls: parse_controls(controls)?,
        output: (out != "-").then(|| PathBuf::from(out)),
    };
    let table = build_table(g, nmax)?;
    if g.verbose {
        eprintln!("campaign: {thetas} random thetas + {} controls, N <= {nmax}", cfg.controls.len());
    }
    let report = run_campaign(&cfg, &table)?;
    let content = match g.format {
        Some(OutputFormat::Json) => to_json(&report)?,
        _ => report.to_csv(),
    };
    write_output(out, &content)
}
