//! Phase classification of fixed points, multi-start selection by pressure,
//! grid sweeps over `(T, a)` and location of the ergodicity-breaking line.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::meanfield::{solve, FixedPointResult, Magnetization, Model, SolverConfig};
use crate::model::ModelParams;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum PhaseLabel {
    Ergodic,
    Symmetric,
    Retrieval,
    Correlated,
    Unclassified,
}

impl PhaseLabel {
    pub const ALL: [PhaseLabel; 5] = [
        PhaseLabel::Ergodic,
        PhaseLabel::Symmetric,
        PhaseLabel::Retrieval,
        PhaseLabel::Correlated,
        PhaseLabel::Unclassified,
    ];

    pub fn code(self) -> &'static str {
        match self {
            PhaseLabel::Ergodic => "E",
            PhaseLabel::Symmetric => "S",
            PhaseLabel::Retrieval => "R",
            PhaseLabel::Correlated => "C",
            PhaseLabel::Unclassified => "U",
        }
    }
}

impl fmt::Display for PhaseLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

/// Whether the pure state is the global (`R1`) or only a local (`R2`)
/// pressure maximum.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum RetrievalKind {
    R1,
    R2,
}

impl fmt::Display for RetrievalKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

/// Thresholds for [`classify`].
///
/// `zero_eps` separates the ergodic state, `sym_eps` decides equality of
/// components, and `minor_eps` is the magnitude a component needs to count
/// as a separate overlap when distinguishing retrieval from correlated
/// profiles. At finite temperature a retrieval state carries small
/// neighbour overlaps induced by the correlation, so `minor_eps` is much
/// coarser than `zero_eps`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassifyConfig {
    pub zero_eps: f64,
    pub sym_eps: f64,
    pub minor_eps: f64,
}

impl Default for ClassifyConfig {
    fn default() -> Self {
        Self {
            zero_eps: 1e-6,
            sym_eps: 1e-4,
            minor_eps: 1e-2,
        }
    }
}

pub fn classify(m: &Magnetization, cfg: &ClassifyConfig) -> PhaseLabel {
    let v = m.as_slice();
    let p = v.len();
    let abs: Vec<f64> = v.iter().map(|x| x.abs()).collect();
    let max = abs.iter().copied().fold(0.0, f64::max);
    if p == 0 || max < cfg.zero_eps {
        return PhaseLabel::Ergodic;
    }

    let peak = abs.iter().position(|&x| x == max).expect("non-empty");
    let orient = v[peak].signum();
    let mut signed: Vec<f64> = v.iter().map(|x| orient * x).collect();
    signed.sort_by(f64::total_cmp);
    let mean = signed.iter().sum::<f64>() / p as f64;
    let (lo, hi) = (signed[0], signed[p - 1]);
    if mean >= cfg.zero_eps && hi - mean <= cfg.sym_eps && mean - lo <= cfg.sym_eps {
        return PhaseLabel::Symmetric;
    }

    let significant = if max >= cfg.minor_eps {
        cfg.minor_eps.max(cfg.zero_eps)
    } else {
        cfg.zero_eps
    };
    if abs.iter().filter(|&&x| x >= significant).count() == 1 {
        return PhaseLabel::Retrieval;
    }

    let candidates = (0..p).filter(|&c| max - abs[c] <= cfg.sym_eps);
    for c in candidates {
        if is_hierarchical(&abs, c, cfg.sym_eps) {
            return PhaseLabel::Correlated;
        }
    }
    PhaseLabel::Unclassified
}

/// Mirror-symmetric around `center`, non-increasing in cyclic distance, with
/// at least two distinct levels.
fn is_hierarchical(abs: &[f64], center: usize, eps: f64) -> bool {
    let p = abs.len();
    let at = |offset: isize| abs[(center as isize + offset).rem_euclid(p as isize) as usize];
    let mut previous = abs[center];
    let mut distinct = false;
    for d in 1..=(p / 2) as isize {
        let (right, left) = (at(d), at(-d));
        if (right - left).abs() > eps {
            return false;
        }
        let level = right.max(left);
        if level > previous + eps {
            return false;
        }
        if (abs[center] - level).abs() > eps {
            distinct = true;
        }
        previous = level;
    }
    distinct
}

/// Named starting magnetization for the solver.
#[derive(Debug, Clone, PartialEq)]
pub enum InitState {
    Pure,
    Symmetric(f64),
    Correlated,
    Noisy(f64),
    Zero,
    Custom { label: String, m: Vec<f64> },
}

impl InitState {
    /// Pure, symmetric, correlated ansatz, three noisy pure states and zero.
    pub fn default_set() -> Vec<InitState> {
        vec![
            InitState::Pure,
            InitState::Symmetric(0.5),
            InitState::Correlated,
            InitState::Noisy(0.15),
            InitState::Noisy(0.20),
            InitState::Noisy(0.25),
            InitState::Zero,
        ]
    }

    pub fn label(&self) -> String {
        match self {
            InitState::Pure => "pure".into(),
            InitState::Symmetric(v) if *v == 0.5 => "symmetric".into(),
            InitState::Symmetric(v) => format!("symmetric:{v}"),
            InitState::Correlated => "correlated".into(),
            InitState::Noisy(d) => format!("noisy:{d}"),
            InitState::Zero => "zero".into(),
            InitState::Custom { label, .. } => label.clone(),
        }
    }

    pub fn magnetization(&self, p: usize) -> Result<Magnetization> {
        Ok(match self {
            InitState::Pure => Magnetization::pure(p),
            InitState::Symmetric(v) => Magnetization::try_new(vec![*v; p], p)?,
            InitState::Correlated => Magnetization::correlated_ansatz(p),
            InitState::Noisy(d) => {
                if !(0.0..=1.0).contains(d) {
                    return Err(Error::InvalidParameter(format!(
                        "noise level {d} outside [0, 1]"
                    )));
                }
                Magnetization::noisy(p, *d)
            }
            InitState::Zero => Magnetization::zero(p),
            InitState::Custom { m, .. } => Magnetization::try_new(m.clone(), p)?,
        })
    }

    /// Reads whitespace- or comma-separated components from a file.
    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let m = text
            .split(|c: char| c.is_whitespace() || c == ',')
            .filter(|s| !s.is_empty())
            .map(|s| {
                s.parse::<f64>().map_err(|_| {
                    Error::InvalidParameter(format!("{}: {s:?} is not a number", path.display()))
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(InitState::Custom {
            label: format!("file:{}", path.display()),
            m,
        })
    }
}

impl FromStr for InitState {
    type Err = Error;

    /// `pure`, `symmetric`, `correlated`, `zero`, `noisy:<δ>` or `file:<path>`.
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "pure" => Ok(InitState::Pure),
            "symmetric" => Ok(InitState::Symmetric(0.5)),
            "correlated" => Ok(InitState::Correlated),
            "zero" => Ok(InitState::Zero),
            _ => {
                if let Some(d) = s.strip_prefix("noisy:") {
                    let d: f64 = d
                        .parse()
                        .map_err(|_| Error::InvalidParameter(format!("bad noise level {d:?}")))?;
                    if !(0.0..=1.0).contains(&d) {
                        return Err(Error::InvalidParameter(format!(
                            "noise level {d} outside [0, 1]"
                        )));
                    }
                    Ok(InitState::Noisy(d))
                } else if let Some(path) = s.strip_prefix("file:") {
                    InitState::from_file(Path::new(path))
                } else if let Some(v) = s.strip_prefix("symmetric:") {
                    let v: f64 = v
                        .parse()
                        .map_err(|_| Error::InvalidParameter(format!("bad symmetric level {v:?}")))?;
                    Ok(InitState::Symmetric(v))
                } else {
                    Err(Error::InvalidParameter(format!(
                        "unknown init {s:?}; expected pure, symmetric, correlated, noisy:<d>, zero or file:<path>"
                    )))
                }
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MultiStartConfig {
    pub solver: SolverConfig,
    pub classify: ClassifyConfig,
    pub inits: Vec<InitState>,
    pub model: Model,
    /// Pressures closer than this are ties, broken towards larger `max|M|`.
    pub tie_tol: f64,
}

impl Default for MultiStartConfig {
    fn default() -> Self {
        Self {
            solver: SolverConfig::default(),
            classify: ClassifyConfig::default(),
            inits: InitState::default_set(),
            model: Model::RelCorr,
            tie_tol: 1e-9,
        }
    }
}

impl MultiStartConfig {
    /// Single-start configuration.
    pub fn single(init: InitState) -> Self {
        Self {
            inits: vec![init],
            ..Self::default()
        }
    }

    /// Sup-distance below which two fixed points are the same state.
    pub fn dedup_tol(&self) -> f64 {
        (10.0 * self.solver.tol).max(1e-6)
    }

    pub fn validate(&self) -> Result<()> {
        self.solver.validate()?;
        if self.inits.is_empty() {
            return Err(Error::InvalidParameter("init set is empty".into()));
        }
        Ok(())
    }
}

/// One distinct fixed point and the starts that reached it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Solution {
    pub inits: Vec<String>,
    pub label: PhaseLabel,
    pub result: FixedPointResult,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhasePoint {
    #[serde(rename = "T")]
    pub t: f64,
    pub a: f64,
    pub best: FixedPointResult,
    pub best_inits: Vec<String>,
    pub label: PhaseLabel,
    pub sublabel: Option<RetrievalKind>,
    /// Distinct converged fixed points.
    pub all_solutions: Vec<Solution>,
    /// Starts that did not converge.
    pub failures: Vec<Solution>,
}

impl PhasePoint {
    pub fn max_abs_m(&self) -> f64 {
        self.best.m.max_abs()
    }
}

fn same_state(x: &Magnetization, y: &Magnetization, tol: f64) -> bool {
    x.symmetric_distance(y) < tol || x.symmetric_distance(&y.neg()) < tol
}

/// Index of the preferred solution: maximal pressure, ties within `tie_tol`
/// resolved towards the larger `max|M|`.
fn select_best(solutions: &[&FixedPointResult], tie_tol: f64) -> Option<usize> {
    let top = solutions
        .iter()
        .map(|r| r.pressure)
        .filter(|p| !p.is_nan())
        .fold(f64::NEG_INFINITY, f64::max);
    solutions
        .iter()
        .enumerate()
        .filter(|(_, r)| r.pressure >= top - tie_tol)
        .max_by(|(i, x), (j, y)| {
            x.m.max_abs()
                .total_cmp(&y.m.max_abs())
                .then(x.pressure.total_cmp(&y.pressure))
                .then(j.cmp(i))
        })
        .map(|(i, _)| i)
}

/// Solves from every start, merges symmetric duplicates and picks the
/// pressure maximizer.
pub fn multi_start(params: &ModelParams, cfg: &MultiStartConfig) -> Result<PhasePoint> {
    cfg.validate()?;
    let tol = cfg.dedup_tol();
    let mut unique: Vec<Solution> = Vec::new();
    let mut failures = Vec::new();
    for init in &cfg.inits {
        let m0 = init.magnetization(params.p)?;
        let result = solve(params, &m0, &cfg.solver, cfg.model)?;
        let label = classify(&result.m, &cfg.classify);
        if !result.converged {
            failures.push(Solution {
                inits: vec![init.label()],
                label: PhaseLabel::Unclassified,
                result,
            });
            continue;
        }
        match unique.iter_mut().find(|s| same_state(&s.result.m, &result.m, tol)) {
            Some(existing) => existing.inits.push(init.label()),
            None => unique.push(Solution {
                inits: vec![init.label()],
                label,
                result,
            }),
        }
    }

    let (best, best_inits, label) = if unique.is_empty() {
        let refs: Vec<&FixedPointResult> = failures.iter().map(|s| &s.result).collect();
        let i = select_best(&refs, cfg.tie_tol).unwrap_or(0);
        let f = &failures[i];
        (f.result.clone(), f.inits.clone(), PhaseLabel::Unclassified)
    } else {
        let refs: Vec<&FixedPointResult> = unique.iter().map(|s| &s.result).collect();
        let i = select_best(&refs, cfg.tie_tol).unwrap_or(0);
        let s = &unique[i];
        (s.result.clone(), s.inits.clone(), s.label)
    };

    let pure_label = InitState::Pure.label();
    let sublabel = unique
        .iter()
        .enumerate()
        .find(|(_, s)| s.inits.contains(&pure_label))
        .filter(|(_, s)| s.label == PhaseLabel::Retrieval)
        .map(|(i, s)| {
            let dominant = unique
                .iter()
                .enumerate()
                .filter(|&(j, _)| j != i)
                .all(|(_, o)| s.result.pressure > o.result.pressure + cfg.tie_tol);
            if dominant {
                RetrievalKind::R1
            } else {
                RetrievalKind::R2
            }
        });

    Ok(PhasePoint {
        t: params.temperature(),
        a: params.a,
        best,
        best_inits,
        label,
        sublabel,
        all_solutions: unique,
        failures,
    })
}

/// Evenly spaced values `min, ..., max`; one step requires `min == max`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Axis {
    pub min: f64,
    pub max: f64,
    pub steps: usize,
}

impl Axis {
    pub fn new(min: f64, max: f64, steps: usize) -> Result<Self> {
        let axis = Self { min, max, steps };
        axis.validate()?;
        Ok(axis)
    }

    pub fn validate(&self) -> Result<()> {
        if !self.min.is_finite() || !self.max.is_finite() {
            return Err(Error::InvalidParameter("axis bounds must be finite".into()));
        }
        match self.steps {
            0 => Err(Error::InvalidParameter("axis needs at least one step".into())),
            1 if self.min != self.max => Err(Error::InvalidParameter(format!(
                "a single-step axis needs min == max, got {}:{}",
                self.min, self.max
            ))),
            1 => Ok(()),
            _ if self.min >= self.max => Err(Error::InvalidParameter(format!(
                "axis range {}:{} is empty",
                self.min, self.max
            ))),
            _ => Ok(()),
        }
    }

    pub fn values(&self) -> Vec<f64> {
        if self.steps == 1 {
            return vec![self.min];
        }
        let span = self.max - self.min;
        let last = (self.steps - 1) as f64;
        (0..self.steps)
            .map(|k| {
                if k == self.steps - 1 {
                    self.max
                } else {
                    self.min + span * k as f64 / last
                }
            })
            .collect()
    }
}

impl FromStr for Axis {
    type Err = Error;

    /// `min:max:steps` or a single value.
    fn from_str(s: &str) -> Result<Self> {
        let num = |x: &str| {
            x.trim()
                .parse::<f64>()
                .map_err(|_| Error::InvalidParameter(format!("bad number {x:?} in range {s:?}")))
        };
        let parts: Vec<&str> = s.split(':').collect();
        match parts.as_slice() {
            [v] => Axis::new(num(v)?, num(v)?, 1),
            [lo, hi, n] => {
                let steps = n
                    .trim()
                    .parse()
                    .map_err(|_| Error::InvalidParameter(format!("bad step count {n:?}")))?;
                Axis::new(num(lo)?, num(hi)?, steps)
            }
            _ => Err(Error::InvalidParameter(format!(
                "range {s:?} must be min:max:steps"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepGrid {
    pub p: usize,
    pub t: Axis,
    pub a: Axis,
}

impl SweepGrid {
    pub fn new(p: usize, t: Axis, a: Axis) -> Result<Self> {
        let grid = Self { p, t, a };
        grid.validate()?;
        Ok(grid)
    }

    pub fn validate(&self) -> Result<()> {
        self.t.validate()?;
        self.a.validate()?;
        if self.p == 0 {
            return Err(Error::InvalidParameter("P must be at least 1".into()));
        }
        if self.t.min < 0.0 {
            return Err(Error::InvalidParameter("temperatures must be >= 0".into()));
        }
        if self.a.min < 0.0 || self.a.max > 1.0 {
            return Err(Error::InvalidParameter("a must lie in [0, 1]".into()));
        }
        Ok(())
    }

    /// `(T, a)` cells, `T` outer and `a` inner.
    pub fn cells(&self) -> Vec<(f64, f64)> {
        let avals = self.a.values();
        self.t
            .values()
            .into_iter()
            .flat_map(|t| avals.iter().map(move |&a| (t, a)))
            .collect()
    }
}

/// One [`PhasePoint`] per cell in [`SweepGrid::cells`] order.
pub fn sweep(grid: &SweepGrid, cfg: &MultiStartConfig) -> Result<Vec<PhasePoint>> {
    grid.validate()?;
    cfg.validate()?;
    grid.cells()
        .into_par_iter()
        .map(|(t, a)| multi_start(&ModelParams::from_temperature(grid.p, a, t)?, cfg))
        .collect()
}

/// Counts of each label, in [`PhaseLabel::ALL`] order.
pub fn label_counts(points: &[PhasePoint]) -> Vec<(PhaseLabel, usize)> {
    PhaseLabel::ALL
        .iter()
        .map(|&l| (l, points.iter().filter(|p| p.label == l).count()))
        .collect()
}

pub const TC_BRACKET: (f64, f64) = (0.5, 3.5);

fn ordered(a: f64, p: usize, t: f64, cfg: &SolverConfig, model: Model) -> Result<bool> {
    let params = ModelParams::from_temperature(p, a, t)?;
    let r = solve(&params, &Magnetization::symmetric(p, 0.5), cfg, model)?;
    Ok(r.m.max_abs() >= cfg.zero_eps)
}

/// Ergodicity-breaking temperature by bisection on `max|M| ≥ zero_eps` from
/// the symmetric start; returns the midpoint of the final bracket.
pub fn find_tc(a: f64, p: usize, cfg: &SolverConfig, resolution: f64) -> Result<f64> {
    find_tc_for(a, p, cfg, resolution, Model::RelCorr)
}

pub fn find_tc_for(
    a: f64,
    p: usize,
    cfg: &SolverConfig,
    resolution: f64,
    model: Model,
) -> Result<f64> {
    if !(resolution > 0.0) {
        return Err(Error::InvalidParameter("resolution must be > 0".into()));
    }
    let (mut lo, mut hi) = TC_BRACKET;
    if !ordered(a, p, lo, cfg, model)? || ordered(a, p, hi, cfg, model)? {
        return Err(Error::NoTransition { a, lo, hi });
    }
    while hi - lo > resolution {
        let mid = 0.5 * (lo + hi);
        if ordered(a, p, mid, cfg, model)? {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    #[serde(rename = "T")]
    pub t: f64,
    /// Stimulated pattern first.
    #[serde(rename = "M")]
    pub m: Magnetization,
    pub label: PhaseLabel,
    pub converged: bool,
}

/// Fixed point reached from the pure state at each temperature.
pub fn magnetization_curves(
    a: f64,
    p: usize,
    temperatures: &[f64],
    cfg: &SolverConfig,
    classify_cfg: &ClassifyConfig,
) -> Result<Vec<CurvePoint>> {
    temperatures
        .iter()
        .map(|&t| {
            let params = ModelParams::from_temperature(p, a, t)?;
            let r = solve(&params, &Magnetization::pure(p), cfg, Model::RelCorr)?;
            Ok(CurvePoint {
                t,
                label: classify(&r.m, classify_cfg),
                converged: r.converged,
                m: r.m,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn label(v: &[f64]) -> PhaseLabel {
        classify(&Magnetization::new(v.to_vec()), &ClassifyConfig::default())
    }

    #[test]
    fn classify_examples() {
        assert_eq!(label(&[0.0; 5]), PhaseLabel::Ergodic);
        assert_eq!(label(&[0.6; 5]), PhaseLabel::Symmetric);
        assert_eq!(label(&[-0.6; 5]), PhaseLabel::Symmetric);
        assert_eq!(label(&[0.97, 0.0, 0.0, 0.0, 0.0]), PhaseLabel::Retrieval);
        assert_eq!(label(&[0.97, 6e-4, 1e-6, 1e-6, 6e-4]), PhaseLabel::Retrieval);
        let p10: Vec<f64> = [77.0, 51.0, 13.0, 3.0, 1.0, 0.0, 1.0, 3.0, 13.0, 51.0]
            .iter()
            .map(|x| x / 128.0)
            .collect();
        assert_eq!(label(&p10), PhaseLabel::Correlated);
        assert_eq!(label(&[0.625, 0.375, 0.125, 0.125, 0.375]), PhaseLabel::Correlated);
        assert_eq!(label(&[0.6, 0.6, 0.0, 0.0, 0.0]), PhaseLabel::Unclassified);
        assert_eq!(label(&[0.6, 0.2, 0.5, 0.5, 0.2]), PhaseLabel::Unclassified);
        assert_eq!(label(&[0.5, 0.5, 0.5, 0.5, -0.5]), PhaseLabel::Unclassified);
    }

    #[test]
    fn hierarchy_needs_two_levels() {
        assert!(!is_hierarchical(&[0.4, 0.4, 0.4], 0, 1e-4));
        assert!(is_hierarchical(&[0.2, 0.5, 0.2, 0.1], 1, 1e-4));
    }

    #[test]
    fn init_parsing() {
        assert_eq!("pure".parse::<InitState>().unwrap(), InitState::Pure);
        assert_eq!("noisy:0.2".parse::<InitState>().unwrap(), InitState::Noisy(0.2));
        assert!("noisy:2".parse::<InitState>().is_err());
        assert!("noisy:x".parse::<InitState>().is_err());
        assert!("sideways".parse::<InitState>().is_err());
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.txt");
        std::fs::write(&path, "0.5, 0.25\n0.1\n").unwrap();
        let init: InitState = format!("file:{}", path.display()).parse().unwrap();
        assert_eq!(init.magnetization(3).unwrap().as_slice(), &[0.5, 0.25, 0.1]);
        assert!(init.magnetization(4).is_err());
        for init in InitState::default_set() {
            assert_eq!(init.label().parse::<InitState>().unwrap(), init);
        }
    }

    #[test]
    fn axis_parsing_and_values() {
        let ax: Axis = "0:1:5".parse().unwrap();
        assert_eq!(ax.values(), vec![0.0, 0.25, 0.5, 0.75, 1.0]);
        let one: Axis = "0.3".parse().unwrap();
        assert_eq!(one.values(), vec![0.3]);
        assert!("0.3:0.3:1".parse::<Axis>().is_ok());
        assert!("1:0:3".parse::<Axis>().is_err());
        assert!("0:1:1".parse::<Axis>().is_err());
        assert!("0:1:0".parse::<Axis>().is_err());
        assert!("0:1".parse::<Axis>().is_err());
        assert!("a:1:3".parse::<Axis>().is_err());
        let ax = Axis::new(0.05, 3.0, 40).unwrap();
        let v = ax.values();
        assert_eq!(v.len(), 40);
        assert_eq!(v[39], 3.0);
    }

    #[test]
    fn grid_validation() {
        let ok = Axis::new(0.0, 1.0, 3).unwrap();
        assert!(SweepGrid::new(5, ok, ok).is_ok());
        assert!(SweepGrid::new(5, ok, Axis::new(0.0, 1.5, 3).unwrap()).is_err());
        assert!(SweepGrid::new(5, Axis::new(-1.0, 1.0, 3).unwrap(), ok).is_err());
        assert!(SweepGrid::new(0, ok, ok).is_err());
    }

    #[test]
    fn small_sweep() {
        let grid = SweepGrid::new(
            5,
            Axis::new(0.5, 2.5, 3).unwrap(),
            Axis::new(0.0, 0.5, 3).unwrap(),
        )
        .unwrap();
        let points = sweep(&grid, &MultiStartConfig::default()).unwrap();
        assert_eq!(points.len(), 9);
        let cell = points
            .iter()
            .find(|p| p.a == 0.0 && p.t == 1.5)
            .unwrap();
        assert_eq!(cell.label, PhaseLabel::Ergodic);
        let hot = points.iter().find(|p| p.a == 0.5 && p.t == 2.5).unwrap();
        assert_eq!(hot.label, PhaseLabel::Ergodic);
        for p in &points {
            for s in &p.all_solutions {
                assert!(p.best.pressure >= s.result.pressure - 1e-9);
            }
        }
        // Determinism, including under a different thread count.
        let pool = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
        let again = pool.install(|| sweep(&grid, &MultiStartConfig::default()).unwrap());
        assert_eq!(points, again);
    }

    #[test]
    fn multi_start_retrieval_region() {
        let params = ModelParams::from_temperature(5, 0.05, 0.2).unwrap();
        let pt = multi_start(&params, &MultiStartConfig::default()).unwrap();
        assert_eq!(pt.label, PhaseLabel::Retrieval);
        assert_eq!(pt.sublabel, Some(RetrievalKind::R1));
        assert!(pt.best_inits.contains(&"pure".to_string()));
    }

    #[test]
    fn multi_start_symmetric_and_ergodic() {
        let pt = multi_start(
            &ModelParams::from_temperature(5, 0.5, 1.5).unwrap(),
            &MultiStartConfig::default(),
        )
        .unwrap();
        assert_eq!(pt.label, PhaseLabel::Symmetric);
        let pt = multi_start(
            &ModelParams::from_temperature(5, 0.5, 2.5).unwrap(),
            &MultiStartConfig::default(),
        )
        .unwrap();
        assert_eq!(pt.label, PhaseLabel::Ergodic);
        assert_eq!(pt.all_solutions.len(), 1);
    }

    #[test]
    fn duplicates_are_merged() {
        let params = ModelParams::from_temperature(5, 0.05, 0.2).unwrap();
        let pt = multi_start(&params, &MultiStartConfig::default()).unwrap();
        for (i, x) in pt.all_solutions.iter().enumerate() {
            for y in &pt.all_solutions[i + 1..] {
                assert!(!same_state(&x.result.m, &y.result.m, 1e-6));
            }
        }
        let starts: usize = pt.all_solutions.iter().map(|s| s.inits.len()).sum::<usize>() + pt.failures.len();
        assert_eq!(starts, 7);
    }

    #[test]
    fn tie_break_prefers_larger_overlap() {
        let mk = |p: f64, m: f64| FixedPointResult {
            m: Magnetization::new(vec![m, 0.0]),
            pressure: p,
            iterations: 1,
            converged: true,
            residual: 0.0,
            gradient_norm: None,
            denominator_violations: 0,
            min_denominator: None,
            error: None,
        };
        let (a, b, c) = (mk(1.0, 0.2), mk(1.0 + 5e-10, 0.1), mk(0.5, 0.9));
        assert_eq!(select_best(&[&a, &b, &c], 1e-9), Some(0));
        assert_eq!(select_best(&[&a, &b, &c], 0.0), Some(1));
    }

    #[test]
    fn find_tc_matches_linear_line() {
        let cfg = SolverConfig::default();
        for a in [0.0, 0.1, 0.4] {
            let tc = find_tc(a, 5, &cfg, 0.01).unwrap();
            assert!((tc - (1.0 + 2.0 * a)).abs() <= 0.02, "a={a}: {tc}");
        }
        assert!(matches!(
            find_tc(0.0, 5, &cfg, 0.0),
            Err(Error::InvalidParameter(_))
        ));
    }

    #[test]
    fn curves_follow_expected_structure() {
        let cfg = SolverConfig::default();
        let ccfg = ClassifyConfig::default();
        let a = 0.3;
        let curve = magnetization_curves(a, 5, &[0.05, 1.55, 1.8], &cfg, &ccfg).unwrap();
        assert!(curve[0].m.as_slice()[0] > 0.99);
        assert!(curve[0].m.as_slice()[1..].iter().all(|x| x.abs() < 0.01));
        assert_eq!(curve[1].label, PhaseLabel::Symmetric);
        assert_eq!(curve[2].label, PhaseLabel::Ergodic);
    }

    fn profile() -> impl Strategy<Value = Vec<f64>> {
        prop_oneof![
            proptest::collection::vec(-1.0f64..1.0, 1..9),
            (1usize..9, -1.0f64..1.0).prop_map(|(p, v)| vec![v; p]),
            (3usize..9, 0.1f64..1.0).prop_map(|(p, v)| {
                (0..p)
                    .map(|mu| v / (1 + mu.min(p - mu)) as f64)
                    .collect()
            }),
            (2usize..9, 0.1f64..1.0).prop_map(|(p, v)| {
                let mut m = vec![0.0; p];
                m[0] = v;
                m
            }),
        ]
    }

    proptest! {
        #[test]
        fn classification_is_invariant(v in profile(), k in 0usize..9) {
            let cfg = ClassifyConfig::default();
            let m = Magnetization::new(v);
            let base = classify(&m, &cfg);
            prop_assert_eq!(classify(&m.rotate(k), &cfg), base);
            prop_assert_eq!(classify(&m.reflect(), &cfg), base);
            prop_assert_eq!(classify(&m.neg(), &cfg), base);
        }
    }
}
