//! Seeded Monte Carlo campaigns over θ.
//!
//! A campaign samples θ uniformly (counter-based, so byte-identical
//! regardless of worker count), traces S_N(θ) along a geometric grid, and
//! reports two statistics per θ:
//!
//! * `sup_normalized` — sup over the grid of |S_N|/(N^{1/2}(ln N)^{5/2});
//! * `exponent_fit`  — least-squares slope of ln|S_N| against ln N over
//!   the upper half of the grid (small-N transients suppressed).
//!
//! A slope near 1 means coherent growth (no cancellation — the rational
//! control rows), near 1/2 square-root cancellation (typical random θ).
//! Rational controls θ = a/q run through exact modular phase arithmetic so
//! the control rows carry no irrational-drift artifacts. The summary holds
//! percentiles over the random population only; no per-θ constant is
//! asserted, since the underlying almost-everywhere bound has a
//! θ-dependent constant.

use rayon::prelude::*;
use serde::Serialize;
use std::fmt::Write as _;
use std::path::PathBuf;

use crate::egk::percentile;
use crate::error::{Error, Result};
use crate::exp_sums::{trace, GridSpec, SumTrace};
use crate::prime_tables::LambdaTable;
use crate::theta::ThetaSample;

#[derive(Debug, Clone, Serialize)]
pub struct ExperimentConfig {
    pub seed: u64,
    pub theta_count: usize,
    pub n_max: u64,
    pub grid: GridSpec,
    pub epsilon: f64,
    /// Rational controls (a, q), evaluated exactly.
    pub controls: Vec<(u64, u64)>,
    /// Where the CLI writes the report; unused by the library itself.
    pub output: Option<PathBuf>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            seed: 1,
            theta_count: 100,
            n_max: 1_000_000,
            grid: GridSpec::default(),
            epsilon: 0.05,
            controls: vec![(0, 1), (1, 2), (1, 3), (2, 5)],
            output: None,
        }
    }
}

impl ExperimentConfig {
    pub fn validate(&self, table: &LambdaTable) -> Result<()> {
        if self.theta_count < 1 {
            return Err(Error::invalid("theta_count must be >= 1".to_string()));
        }
        if self.n_max > table.limit() {
            return Err(Error::invalid(format!(
                "n_max {} exceeds sieve limit {}",
                self.n_max,
                table.limit()
            )));
        }
        for &(a, q) in &self.controls {
            if q == 0 || a >= q {
                return Err(Error::invalid(format!("bad control {a}/{q}")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum RowKind {
    Control,
    Random,
}

#[derive(Debug, Clone, Serialize)]
pub struct ThetaReport {
    pub kind: RowKind,
    pub theta: ThetaSample,
    pub sup_normalized: f64,
    pub exponent_fit: f64,
    pub flags: Vec<String>,
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct Percentiles {
    pub p50: f64,
    pub p90: f64,
    pub p95: f64,
    pub p99: f64,
}

fn percentiles_of(mut xs: Vec<f64>) -> Percentiles {
    xs.sort_by(f64::total_cmp);
    Percentiles {
        p50: percentile(&xs, 50.0),
        p90: percentile(&xs, 90.0),
        p95: percentile(&xs, 95.0),
        p99: percentile(&xs, 99.0),
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct CampaignReport {
    pub seed: u64,
    pub n_max: u64,
    /// N-range of the exponent fit window (upper half of the grid).
    pub fit_window: (u64, u64),
    pub reports: Vec<ThetaReport>,
    /// Percentiles over the random population only.
    pub sup_normalized: Percentiles,
    pub exponent_fit: Percentiles,
}

/// Uniform counter-based θ samples: identical across runs and thread
/// schedules for a fixed (count, seed).
pub fn sample_thetas(count: usize, seed: u64) -> Vec<ThetaSample> {
    (0..count as u64).map(|i| ThetaSample::seeded(seed, i)).collect()
}

/// Least-squares slope of ln|S_N| vs ln N over the geometric upper half
/// of the trace grid. Checkpoints with |S_N| = 0 are excluded; fewer than
/// 4 usable points is an error.
pub fn exponent_fit(trace: &SumTrace) -> Result<f64> {
    let start = trace.checkpoints.len() / 2;
    let pts: Vec<(f64, f64)> = trace.checkpoints[start..]
        .iter()
        .zip(&trace.s_values[start..])
        .filter(|(_, s)| s.norm() > 0.0)
        .map(|(&n, s)| ((n as f64).ln(), s.norm().ln()))
        .collect();
    if pts.len() < 4 {
        return Err(Error::FitUndefined(format!(
            "{} usable checkpoints in the fitting window, need 4",
            pts.len()
        )));
    }
    let n = pts.len() as f64;
    let mean_x = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let mean_y = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let mut sxx = 0.0;
    let mut sxy = 0.0;
    for &(x, y) in &pts {
        sxx += (x - mean_x) * (x - mean_x);
        sxy += (x - mean_x) * (y - mean_y);
    }
    if sxx == 0.0 {
        return Err(Error::FitUndefined("degenerate fitting window".to_string()));
    }
    Ok(sxy / sxx)
}

fn report_for(
    kind: RowKind,
    theta: &ThetaSample,
    grid: &[u64],
    table: &LambdaTable,
) -> Result<ThetaReport> {
    let tr = trace(theta, grid, table)?;
    let sup = tr.sup_normalized();
    let fit = exponent_fit(&tr)?;
    let mut flags = Vec::new();
    if kind == RowKind::Control {
        flags.push("control".to_string());
    }
    if sup > 1.0 {
        // the normalized envelope is exceeded somewhere on the grid
        flags.push("exceeds_envelope".to_string());
    }
    Ok(ThetaReport { kind, theta: *theta, sup_normalized: sup, exponent_fit: fit, flags })
}

/// Runs the campaign: control rows first, then the seeded random
/// population, reports merged in sample-index order.
pub fn run_campaign(cfg: &ExperimentConfig, table: &LambdaTable) -> Result<CampaignReport> {
    cfg.validate(table)?;
    let grid = cfg.grid.materialize(cfg.n_max)?;
    let window_start = grid[grid.len() / 2];
    if grid.len() - grid.len() / 2 < 4 {
        return Err(Error::FitUndefined(format!(
            "grid too short for exponent fitting ({} points)",
            grid.len()
        )));
    }

    let controls: Vec<ThetaSample> = cfg
        .controls
        .iter()
        .map(|&(a, q)| ThetaSample::rational(a, q))
        .collect::<Result<_>>()?;
    let randoms = sample_thetas(cfg.theta_count, cfg.seed);

    let control_rows: Vec<ThetaReport> = controls
        .par_iter()
        .map(|th| report_for(RowKind::Control, th, &grid, table))
        .collect::<Result<_>>()?;
    let random_rows: Vec<ThetaReport> = randoms
        .par_iter()
        .map(|th| report_for(RowKind::Random, th, &grid, table))
        .collect::<Result<_>>()?;

    let sup_normalized = percentiles_of(random_rows.iter().map(|r| r.sup_normalized).collect());
    let exponent = percentiles_of(random_rows.iter().map(|r| r.exponent_fit).collect());

    let mut reports = control_rows;
    reports.extend(random_rows);
    Ok(CampaignReport {
        seed: cfg.seed,
        n_max: cfg.n_max,
        fit_window: (window_start, cfg.n_max),
        reports,
        sup_normalized,
        exponent_fit: exponent,
    })
}

impl CampaignReport {
    /// Canonical CSV: `kind,theta,a,q,sup_normalized,exponent_fit,flags`
    /// rows plus a commented summary block. Byte-identical for identical
    /// inputs — floats are shortest-roundtrip formatted and no
    /// nondeterministic field exists.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("# schema=1\nkind,theta,a,q,sup_normalized,exponent_fit,flags\n");
        for r in &self.reports {
            let kind = match r.kind {
                RowKind::Control => "control",
                RowKind::Random => "random",
            };
            let (a, q) = match r.theta.as_rational() {
                Some((a, q)) => (a.to_string(), q.to_string()),
                None => (String::new(), String::new()),
            };
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{}",
                kind,
                r.theta.value(),
                a,
                q,
                r.sup_normalized,
                r.exponent_fit,
                r.flags.join(";")
            );
        }
        let _ = writeln!(out, "# fit_window_n {} {}", self.fit_window.0, self.fit_window.1);
        let s = &self.sup_normalized;
        let _ = writeln!(
            out,
            "# summary sup_normalized p50={} p90={} p95={} p99={}",
            s.p50, s.p90, s.p95, s.p99
        );
        let e = &self.exponent_fit;
        let _ = writeln!(
            out,
            "# summary exponent_fit p50={} p90={} p95={} p99={}",
            e.p50, e.p90, e.p95, e.p99
        );
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use num_complex::Complex64;
    use std::sync::OnceLock;

    fn table() -> &'static LambdaTable {
        static T: OnceLock<LambdaTable> = OnceLock::new();
        T.get_or_init(|| LambdaTable::build(100_000).unwrap())
    }

    fn synthetic_trace(f: impl Fn(f64) -> f64) -> SumTrace {
        let checkpoints: Vec<u64> = (0..20).map(|k| 100 * (1u64 << k.min(13)) + k).collect();
        let s_values: Vec<Complex64> = checkpoints
            .iter()
            .map(|&n| Complex64::new(f(n as f64), 0.0))
            .collect();
        let normalized = vec![0.0; checkpoints.len()];
        SumTrace {
            theta: ThetaSample::explicit(0.5).unwrap(),
            c_values: s_values.clone(),
            checkpoints,
            s_values,
            normalized,
        }
    }

    #[test]
    fn exponent_fit_recovers_exact_power_laws() {
        assert_relative_eq!(exponent_fit(&synthetic_trace(|n| n)).unwrap(), 1.0, epsilon = 1e-12);
        assert_relative_eq!(
            exponent_fit(&synthetic_trace(|n| n.sqrt())).unwrap(),
            0.5,
            epsilon = 1e-12
        );
    }

    #[test]
    fn exponent_fit_needs_enough_points() {
        let mut tr = synthetic_trace(|n| n);
        tr.checkpoints.truncate(5);
        tr.s_values.truncate(5);
        tr.normalized.truncate(5);
        // upper half of 5 points leaves 3 usable ones
        assert!(matches!(exponent_fit(&tr), Err(Error::FitUndefined(_))));
    }

    #[test]
    fn theta_zero_fit_is_one() {
        let t = table();
        let grid = GridSpec::default().materialize(100_000).unwrap();
        let tr = trace(&ThetaSample::rational(0, 1).unwrap(), &grid, t).unwrap();
        let fit = exponent_fit(&tr).unwrap();
        assert!((fit - 1.0).abs() < 0.02, "fit {fit}");
    }

    #[test]
    fn sampling_is_deterministic_with_uniform_mean() {
        let a = sample_thetas(10_000, 5);
        let b = sample_thetas(10_000, 5);
        assert_eq!(a, b);
        assert!(a.iter().all(|t| (0.0..1.0).contains(&t.value())));
        let mean = a.iter().map(|t| t.value()).sum::<f64>() / a.len() as f64;
        let band = 4.0 * (1.0f64 / 12.0).sqrt() / 100.0;
        assert!((mean - 0.5).abs() < band, "mean {mean}");
    }

    #[test]
    fn campaign_smoke() {
        let t = table();
        let cfg = ExperimentConfig {
            theta_count: 8,
            n_max: 100_000,
            ..Default::default()
        };
        let rep = run_campaign(&cfg, t).unwrap();
        assert_eq!(rep.reports.len(), 8 + cfg.controls.len());

        // controls first, flagged; θ=0 exceeds the envelope at this n_max
        let zero_row = &rep.reports[0];
        assert_eq!(zero_row.kind, RowKind::Control);
        assert!(zero_row.flags.iter().any(|f| f == "control"));
        assert!(zero_row.exponent_fit > 0.9);

        for r in &rep.reports {
            assert!(r.exponent_fit.is_finite());
            assert!(r.sup_normalized >= 0.0);
        }
        // random rows: square-root-cancellation territory at this scale
        let random_fits: Vec<f64> = rep
            .reports
            .iter()
            .filter(|r| r.kind == RowKind::Random)
            .map(|r| r.exponent_fit)
            .collect();
        let below = random_fits.iter().filter(|&&f| f < 0.75).count();
        assert!(below * 2 > random_fits.len(), "fits {random_fits:?}");
    }

    #[test]
    fn campaign_is_reproducible_and_order_stable() {
        let t = table();
        let cfg = ExperimentConfig {
            theta_count: 4,
            n_max: 20_000,
            ..Default::default()
        };
        let a = run_campaign(&cfg, t).unwrap().to_csv();
        let b = run_campaign(&cfg, t).unwrap().to_csv();
        assert_eq!(a, b);

        // single-threaded pool must give the same bytes
        let pool = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
        let c = pool.install(|| run_campaign(&cfg, t).unwrap().to_csv());
        assert_eq!(a, c);
    }

    #[test]
    fn sup_normalized_is_monotone_under_grid_extension() {
        let t = table();
        let theta = ThetaSample::seeded(3, 0);
        let short = GridSpec::default().materialize(10_000).unwrap();
        let long = GridSpec::default().materialize(100_000).unwrap();
        let sup_short = trace(&theta, &short, t).unwrap().sup_normalized();
        let sup_long = trace(&theta, &long, t).unwrap().sup_normalized();
        assert!(sup_long >= sup_short - 1e-15);
    }

    #[test]
    fn squarefree_rational_controls_grow_coherently() {
        // Controls with μ(q) ≠ 0 have a nonvanishing Ramanujan-sum main
        // term, so the fitted exponent sits near 1. (Non-squarefree q like
        // 4 or 9 genuinely cancel to ~N^{1/2} and are not controls here.)
        let t = table();
        let grid = GridSpec::default().materialize(100_000).unwrap();
        for (a, q) in [(1u64, 2u64), (1, 3), (2, 5), (1, 6), (3, 7), (1, 10), (2, 15), (5, 19)] {
            let tr = trace(&ThetaSample::rational(a, q).unwrap(), &grid, t).unwrap();
            let fit = exponent_fit(&tr).unwrap();
            assert!(fit > 0.9, "theta {a}/{q}: fit {fit}");
        }
    }

    #[test]
    fn config_validation() {
        let t = table();
        let bad = ExperimentConfig { theta_count: 0, ..Default::default() };
        assert!(bad.validate(t).is_err());
        let bad = ExperimentConfig { n_max: t.limit() + 1, ..Default::default() };
        assert!(bad.validate(t).is_err());
        let bad = ExperimentConfig { controls: vec![(3, 2)], n_max: 10_000, ..Default::default() };
        assert!(bad.validate(t).is_err());
    }
}
