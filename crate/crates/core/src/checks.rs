//! Self-verification suites with fixed seeds, each producing a JSON report.

use rayon::prelude::*;
use serde::Serialize;
use serde_json::{json, Value};
use std::fmt;
use std::str::FromStr;

use crate::correlation::{CorrelationMatrix, SpectrumReport};
use crate::error::{Error, Result};
use crate::meanfield::{critical_temperature, solve, Magnetization, Model, SolverConfig};
use crate::model::ModelParams;
use crate::montecarlo::{selfavg_experiment, subadditivity_draws, variance_trend};
use crate::phases::find_tc;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Suite {
    Spectrum,
    Tc,
    Subadd,
    Selfavg,
    Stationarity,
}

impl Suite {
    pub const ALL: [Suite; 5] = [
        Suite::Spectrum,
        Suite::Tc,
        Suite::Subadd,
        Suite::Selfavg,
        Suite::Stationarity,
    ];
}

impl fmt::Display for Suite {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Suite::Spectrum => "spectrum",
            Suite::Tc => "tc",
            Suite::Subadd => "subadd",
            Suite::Selfavg => "selfavg",
            Suite::Stationarity => "stationarity",
        })
    }
}

impl FromStr for Suite {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Suite::ALL
            .into_iter()
            .find(|suite| suite.to_string() == s)
            .ok_or_else(|| {
                Error::InvalidParameter(format!(
                    "unknown suite {s:?}; expected spectrum, tc, subadd, selfavg or stationarity"
                ))
            })
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct SuiteReport {
    pub suite: Suite,
    pub passed: bool,
    pub details: Value,
}

#[derive(Debug, Clone, Serialize)]
pub struct CheckReport {
    pub seed: u64,
    pub passed: bool,
    pub suites: Vec<SuiteReport>,
}

pub fn run_suites(suites: &[Suite], seed: u64) -> Result<CheckReport> {
    let reports = suites
        .iter()
        .map(|&s| run_suite(s, seed))
        .collect::<Result<Vec<_>>>()?;
    Ok(CheckReport {
        seed,
        passed: reports.iter().all(|r| r.passed),
        suites: reports,
    })
}

pub fn run_suite(suite: Suite, seed: u64) -> Result<SuiteReport> {
    match suite {
        Suite::Spectrum => spectrum_suite(),
        Suite::Tc => tc_suite(),
        Suite::Subadd => subadd_suite(seed),
        Suite::Selfavg => selfavg_suite(seed),
        Suite::Stationarity => stationarity_suite(),
    }
}

pub const SPECTRUM_TOL: f64 = 1e-10;
pub const CHAR_POLY_TOL: f64 = 1e-9;

/// Closed-form eigenvalues and characteristic-polynomial roots for
/// `P ∈ 3..=30`, `a ∈ {0.1, 0.3, 0.49}`.
pub fn spectrum_suite() -> Result<SuiteReport> {
    let mut worst_formula: f64 = 0.0;
    let mut worst_poly: f64 = 0.0;
    let mut failures = Vec::new();
    for p in 3..=30 {
        for a in [0.1, 0.3, 0.49] {
            let report = SpectrumReport::new(&CorrelationMatrix::new(p, a)?);
            let (f, c) = (report.max_formula_residual(), report.max_char_poly_residual());
            worst_formula = worst_formula.max(f);
            worst_poly = worst_poly.max(c);
            if f > SPECTRUM_TOL || c > CHAR_POLY_TOL {
                failures.push(json!({"P": p, "a": a, "formula": f, "char_poly": c}));
            }
        }
    }
    Ok(SuiteReport {
        suite: Suite::Spectrum,
        passed: failures.is_empty(),
        details: json!({
            "max_formula_residual": worst_formula,
            "max_char_poly_residual": worst_poly,
            "failures": failures,
        }),
    })
}

pub const TC_TOL: f64 = 0.02;
pub const TC_RESOLUTION: f64 = 0.01;

/// Bisected ergodicity line against `1 + 2a` for `a ∈ {0, 0.1, ..., 0.5}` at
/// `P = 5`, plus monotonicity.
pub fn tc_suite() -> Result<SuiteReport> {
    let cfg = SolverConfig::default();
    let a_values: Vec<f64> = (0..=5).map(|k| k as f64 / 10.0).collect();
    let found = a_values
        .par_iter()
        .map(|&a| find_tc(a, 5, &cfg, TC_RESOLUTION))
        .collect::<Result<Vec<f64>>>()?;
    let rows: Vec<Value> = a_values
        .iter()
        .zip(&found)
        .map(|(&a, &tc)| {
            json!({"a": a, "tc": tc, "expected": critical_temperature(a),
                   "error": (tc - critical_temperature(a)).abs()})
        })
        .collect();
    let within = a_values
        .iter()
        .zip(&found)
        .all(|(&a, &tc)| (tc - critical_temperature(a)).abs() <= TC_TOL);
    let monotone = found.windows(2).all(|w| w[1] >= w[0]);
    Ok(SuiteReport {
        suite: Suite::Tc,
        passed: within && monotone,
        details: json!({"P": 5, "resolution": TC_RESOLUTION, "tolerance": TC_TOL,
                        "monotone": monotone, "points": rows}),
    })
}

/// Fifty draws of `N = 16` split `8 + 8`, `P = 2`, `a = 0.3`,
/// `β ∈ {0.5, 1, 2}`.
pub fn subadd_suite(seed: u64) -> Result<SuiteReport> {
    let mut per_beta = Vec::new();
    let mut violations = 0;
    for beta in [0.5, 1.0, 2.0] {
        let params = ModelParams::new(2, 0.3, beta)?;
        let reports = subadditivity_draws(&params, (8, 8), 50, seed)?;
        let bad = reports.iter().filter(|r| !r.holds).count();
        violations += bad;
        let min_slack = reports.iter().map(|r| r.slack).fold(f64::INFINITY, f64::min);
        per_beta.push(json!({"beta": beta, "draws": reports.len(),
                             "violations": bad, "min_slack": min_slack}));
    }
    Ok(SuiteReport {
        suite: Suite::Subadd,
        passed: violations == 0,
        details: json!({"N": 16, "split": [8, 8], "P": 2, "a": 0.3,
                        "violations": violations, "runs": per_beta}),
    })
}

/// Variance of the exact pressure over 200 draws for `N ∈ {8, 12, 16, 20}`,
/// `P = 2`, `a = 0.3`, `β = 1`.
pub fn selfavg_suite(seed: u64) -> Result<SuiteReport> {
    let params = ModelParams::new(2, 0.3, 1.0)?;
    let rows = selfavg_experiment(&params, &[8, 12, 16, 20], 200, seed)?;
    let verdict = variance_trend(&rows);
    Ok(SuiteReport {
        suite: Suite::Selfavg,
        passed: verdict.non_increasing,
        details: json!({"P": 2, "a": 0.3, "beta": 1.0, "rows": rows, "trend": verdict}),
    })
}

pub const STATIONARITY_TOL: f64 = 1e-5;

/// Converged non-trivial fixed points sampled over `(T, a)` and several
/// starts.
pub fn stationary_samples(count: usize) -> Result<Vec<(ModelParams, Magnetization, f64)>> {
    let cfg = SolverConfig::default();
    let temps = [0.1, 0.25, 0.4, 0.6, 0.8, 1.0, 1.2, 1.5, 1.8, 2.2, 2.6];
    let a_values = [0.0, 0.1, 0.2, 0.3, 0.45, 0.6, 0.75, 0.9, 1.0];
    let inits = [
        Magnetization::pure(5),
        Magnetization::symmetric(5, 0.5),
        Magnetization::correlated_ansatz(5),
        Magnetization::noisy(5, 0.2),
    ];
    let mut cells = Vec::new();
    for &t in &temps {
        for &a in &a_values {
            for init in &inits {
                cells.push((t, a, init.clone()));
            }
        }
    }
    let solved = cells
        .par_iter()
        .map(|(t, a, init)| {
            let params = ModelParams::from_temperature(5, *a, *t)?;
            let r = solve(&params, init, &cfg, Model::RelCorr)?;
            Ok((params, r))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(solved
        .into_iter()
        .filter(|(_, r)| r.converged && r.m.max_abs() > cfg.zero_eps && r.denominator_violations == 0)
        .filter_map(|(p, r)| r.gradient_norm.map(|g| (p, r.m, g)))
        .take(count)
        .collect())
}

pub fn stationarity_suite() -> Result<SuiteReport> {
    let samples = stationary_samples(100)?;
    let worst = samples.iter().map(|s| s.2).fold(0.0, f64::max);
    let failing = samples.iter().filter(|s| s.2 > STATIONARITY_TOL).count();
    Ok(SuiteReport {
        suite: Suite::Stationarity,
        passed: samples.len() == 100 && failing == 0,
        details: json!({"samples": samples.len(), "max_gradient": worst,
                        "failing": failing, "tolerance": STATIONARITY_TOL}),
    })
}
