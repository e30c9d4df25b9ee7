//! Single-spin-flip Monte Carlo under the relativistic correlated
//! Hamiltonian, plus finite-size experiments built on exact enumeration.

use rand::Rng as _;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::fmt;
use std::str::FromStr;

use crate::correlation::quadratic_form;
use crate::error::{Error, Result};
use crate::model::{
    exact_log_partition_excess, ModelParams, PatternSet, SpinSystem, DEFAULT_ENUMERATION_CAP,
};
use crate::rng::{self, Rng};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum UpdateRule {
    /// Heat bath, acceptance `1 / (1 + e^{βΔH})`.
    Glauber,
    /// Acceptance `min(1, e^{-βΔH})`.
    Metropolis,
}

impl fmt::Display for UpdateRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            UpdateRule::Glauber => "glauber",
            UpdateRule::Metropolis => "metropolis",
        })
    }
}

impl FromStr for UpdateRule {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "glauber" => Ok(UpdateRule::Glauber),
            "metropolis" => Ok(UpdateRule::Metropolis),
            other => Err(Error::InvalidParameter(format!(
                "unknown update rule {other:?}, expected glauber or metropolis"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct McConfig {
    /// Total sweeps of `N` proposals, burn-in included.
    pub sweeps: usize,
    pub burn_in: usize,
    pub seed: u64,
    pub rule: UpdateRule,
    pub measure_every: usize,
}

impl Default for McConfig {
    fn default() -> Self {
        Self {
            sweeps: 400,
            burn_in: 200,
            seed: 1,
            rule: UpdateRule::Glauber,
            measure_every: 1,
        }
    }
}

impl McConfig {
    pub fn validate(&self) -> Result<()> {
        if self.burn_in >= self.sweeps {
            return Err(Error::InvalidParameter(format!(
                "burn_in {} must be smaller than sweeps {}",
                self.burn_in, self.sweeps
            )));
        }
        if self.measure_every == 0 {
            return Err(Error::InvalidParameter("measure_every must be >= 1".into()));
        }
        Ok(())
    }
}

fn energy_change(n: usize, a: f64, before: &[f64], after: &[f64]) -> f64 {
    let q0 = quadratic_form(a, before);
    let q1 = quadratic_form(a, after);
    let (r0, r1) = ((1.0 + q0).sqrt(), (1.0 + q1).sqrt());
    // r1 - r0 without cancellation.
    -(n as f64) * (q1 - q0) / (r1 + r0)
}

/// `H(σ with spin i flipped) - H(σ)` in `O(P)`.
pub fn delta_energy(spins: &SpinSystem<'_>, i: usize, params: &ModelParams) -> f64 {
    let mut after = vec![0.0; spins.overlaps().len()];
    spins.overlaps_after_flip(i, &mut after);
    energy_change(spins.n(), params.a, spins.overlaps(), &after)
}

/// Probability of accepting a move that changes the energy by `dh`.
pub fn acceptance(rule: UpdateRule, beta: f64, dh: f64) -> f64 {
    if beta.is_infinite() {
        return match dh.partial_cmp(&0.0) {
            Some(std::cmp::Ordering::Less) => 1.0,
            Some(std::cmp::Ordering::Greater) => 0.0,
            _ => match rule {
                UpdateRule::Glauber => 0.5,
                UpdateRule::Metropolis => 1.0,
            },
        };
    }
    let x = beta * dh;
    match rule {
        UpdateRule::Glauber => {
            if x > 0.0 {
                let e = (-x).exp();
                e / (1.0 + e)
            } else {
                1.0 / (1.0 + x.exp())
            }
        }
        UpdateRule::Metropolis => {
            if x <= 0.0 {
                1.0
            } else {
                (-x).exp()
            }
        }
    }
}

/// Markov chain over spin configurations with random-site proposals.
pub struct Sampler<'a> {
    spins: SpinSystem<'a>,
    params: ModelParams,
    rule: UpdateRule,
    rng: Rng,
    scratch: Vec<f64>,
    proposals: u64,
    accepted: u64,
}

impl<'a> Sampler<'a> {
    pub fn new(spins: SpinSystem<'a>, params: ModelParams, rule: UpdateRule, rng: Rng) -> Self {
        let p = spins.overlaps().len();
        Self {
            spins,
            params,
            rule,
            rng,
            scratch: vec![0.0; p],
            proposals: 0,
            accepted: 0,
        }
    }

    pub fn spins(&self) -> &SpinSystem<'a> {
        &self.spins
    }

    /// One proposal; returns the flipped site if accepted.
    pub fn step(&mut self) -> Option<usize> {
        let n = self.spins.n();
        let i = self.rng.random_range(0..n);
        self.spins.overlaps_after_flip(i, &mut self.scratch);
        let dh = energy_change(n, self.params.a, self.spins.overlaps(), &self.scratch);
        let prob = acceptance(self.rule, self.params.beta, dh);
        self.proposals += 1;
        if self.rng.random::<f64>() < prob {
            self.spins.flip(i);
            self.accepted += 1;
            Some(i)
        } else {
            None
        }
    }

    /// `N` proposals.
    pub fn sweep(&mut self) {
        for _ in 0..self.spins.n() {
            self.step();
        }
    }

    pub fn acceptance_rate(&self) -> f64 {
        if self.proposals == 0 {
            0.0
        } else {
            self.accepted as f64 / self.proposals as f64
        }
    }

    pub fn energy_per_neuron(&self) -> f64 {
        -(1.0 + quadratic_form(self.params.a, self.spins.overlaps())).sqrt()
    }

    pub fn into_spins(self) -> SpinSystem<'a> {
        self.spins
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryRow {
    pub sweep: usize,
    pub m: Vec<f64>,
    pub energy_per_neuron: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub n: usize,
    pub p: usize,
    pub rows: Vec<TrajectoryRow>,
    pub acceptance_rate: f64,
}

impl Trajectory {
    /// Time average of `|m_μ|`.
    pub fn mean_abs_m(&self) -> Vec<f64> {
        self.time_average(f64::abs)
    }

    pub fn mean_m(&self) -> Vec<f64> {
        self.time_average(|x| x)
    }

    fn time_average(&self, f: impl Fn(f64) -> f64) -> Vec<f64> {
        let mut acc = vec![0.0; self.p];
        for row in &self.rows {
            for (a, &x) in acc.iter_mut().zip(&row.m) {
                *a += f(x);
            }
        }
        let count = self.rows.len().max(1) as f64;
        acc.into_iter().map(|x| x / count).collect()
    }

    /// CSV with columns `sweep_index, m_1..m_P, energy_per_neuron`.
    pub fn write_csv<W: std::io::Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let mut header = vec!["sweep_index".to_string()];
        header.extend((1..=self.p).map(|mu| format!("m_{mu}")));
        header.push("energy_per_neuron".into());
        w.write_record(&header)?;
        for row in &self.rows {
            let mut rec = vec![row.sweep.to_string()];
            rec.extend(row.m.iter().map(|x| crate::output::fmt_f64(*x)));
            rec.push(crate::output::fmt_f64(row.energy_per_neuron));
            w.write_record(&rec)?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Runs `cfg.sweeps` sweeps from `init`, recording overlaps every
/// `measure_every` sweeps once burn-in is over.
pub fn run(
    patterns: &PatternSet,
    params: &ModelParams,
    init: SpinSystem<'_>,
    cfg: &McConfig,
) -> Result<Trajectory> {
    cfg.validate()?;
    if patterns.p() != params.p {
        return Err(Error::DimensionMismatch {
            expected: params.p,
            actual: patterns.p(),
        });
    }
    if !std::ptr::eq(init.patterns(), patterns) && init.patterns() != patterns {
        return Err(Error::InvalidParameter(
            "initial configuration uses a different pattern set".into(),
        ));
    }
    let mut sampler = Sampler::new(init, *params, cfg.rule, rng::seeded(cfg.seed));
    let mut rows = Vec::new();
    for s in 1..=cfg.sweeps {
        sampler.sweep();
        if s > cfg.burn_in && (s - cfg.burn_in).is_multiple_of(cfg.measure_every) {
            rows.push(TrajectoryRow {
                sweep: s,
                m: sampler.spins().overlaps().to_vec(),
                energy_per_neuron: sampler.energy_per_neuron(),
            });
        }
    }
    Ok(Trajectory {
        n: patterns.n(),
        p: patterns.p(),
        rows,
        acceptance_rate: sampler.acceptance_rate(),
    })
}

/// Visit frequencies of every configuration over `steps` single proposals,
/// indexed by [`SpinSystem::state_index`].
pub fn empirical_distribution(
    patterns: &PatternSet,
    params: &ModelParams,
    rule: UpdateRule,
    steps: u64,
    burn_in: u64,
    seed: u64,
) -> Result<Vec<f64>> {
    let n = patterns.n();
    if n > 24 {
        return Err(Error::EnumerationCap { size: n, cap: 24 });
    }
    let mut r = rng::stream(seed, 0, 0);
    let init = SpinSystem::random(patterns, &mut r);
    let mut sampler = Sampler::new(init, *params, rule, rng::stream(seed, 0, 1));
    for _ in 0..burn_in {
        sampler.step();
    }
    let mut index = sampler.spins().state_index();
    let mut counts = vec![0u64; 1 << n];
    for _ in 0..steps {
        if let Some(i) = sampler.step() {
            index ^= 1 << i;
        }
        counts[index as usize] += 1;
    }
    Ok(counts.into_iter().map(|c| c as f64 / steps as f64).collect())
}

/// `½ Σ |p - q|`.
pub fn total_variation(p: &[f64], q: &[f64]) -> f64 {
    0.5 * p.iter().zip(q).map(|(x, y)| (x - y).abs()).sum::<f64>()
}

/// Sample mean and unbiased variance, with the standard error of the
/// variance estimated from the fourth central moment.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SampleStats {
    pub count: usize,
    pub mean: f64,
    pub variance: f64,
    pub variance_se: f64,
}

impl SampleStats {
    pub fn of(values: &[f64]) -> Self {
        let n = values.len();
        if n == 0 {
            return Self {
                count: 0,
                mean: f64::NAN,
                variance: f64::NAN,
                variance_se: f64::NAN,
            };
        }
        let nf = n as f64;
        // Shifting by the first value keeps identical samples exactly at zero spread.
        let origin = values[0];
        let shift = values.iter().map(|x| x - origin).sum::<f64>() / nf;
        let mean = origin + shift;
        if n < 2 {
            return Self {
                count: n,
                mean,
                variance: 0.0,
                variance_se: 0.0,
            };
        }
        let dev = |x: &f64| x - origin - shift;
        let m2 = values.iter().map(|x| dev(x).powi(2)).sum::<f64>();
        let m4 = values.iter().map(|x| dev(x).powi(4)).sum::<f64>() / nf;
        let variance = m2 / (nf - 1.0);
        let se2 = if n > 3 {
            (m4 - (nf - 3.0) / (nf - 1.0) * variance * variance) / nf
        } else {
            0.0
        };
        Self {
            count: n,
            mean,
            variance,
            variance_se: se2.max(0.0).sqrt(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SelfAvgRow {
    #[serde(rename = "N")]
    pub n: usize,
    pub draws: usize,
    pub mean: f64,
    pub variance: f64,
    pub variance_se: f64,
}

/// Mean and variance of the exact pressure over independent pattern draws
/// for each size in `sizes`.
pub fn selfavg_experiment(
    params: &ModelParams,
    sizes: &[usize],
    draws: usize,
    seed: u64,
) -> Result<Vec<SelfAvgRow>> {
    if draws == 0 {
        return Err(Error::InvalidParameter("draws must be >= 1".into()));
    }
    if let Some(&n) = sizes.iter().find(|&&n| n > DEFAULT_ENUMERATION_CAP || n == 0) {
        return Err(Error::EnumerationCap {
            size: n,
            cap: DEFAULT_ENUMERATION_CAP,
        });
    }
    sizes
        .iter()
        .map(|&n| {
            let values = (0..draws)
                .into_par_iter()
                .map(|d| {
                    let mut r = rng::stream(seed, n as u64, d as u64);
                    let patterns = PatternSet::random_with(n, params.p, &mut r, None);
                    crate::model::exact_pressure(&patterns, params)
                })
                .collect::<Result<Vec<f64>>>()?;
            let stats = SampleStats::of(&values);
            Ok(SelfAvgRow {
                n,
                draws,
                mean: stats.mean,
                variance: stats.variance,
                variance_se: stats.variance_se,
            })
        })
        .collect()
}

/// Upward steps of the variance sequence, and whether it counts as
/// non-increasing: at most one upward step, lying within two combined
/// standard errors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrendVerdict {
    pub inversions: usize,
    pub worst_excess_in_se: f64,
    pub non_increasing: bool,
}

pub fn variance_trend(rows: &[SelfAvgRow]) -> TrendVerdict {
    let mut inversions = 0;
    let mut worst: f64 = 0.0;
    let mut within = true;
    for w in rows.windows(2) {
        let rise = w[1].variance - w[0].variance;
        if rise > 0.0 {
            inversions += 1;
            let se = (w[0].variance_se.powi(2) + w[1].variance_se.powi(2)).sqrt();
            let excess = if se > 0.0 { rise / se } else { f64::INFINITY };
            worst = worst.max(excess);
            if excess > 2.0 {
                within = false;
            }
        }
    }
    TrendVerdict {
        inversions,
        worst_excess_in_se: worst,
        non_increasing: inversions <= 1 && within,
    }
}

/// Comparison of `log Z_N` with `log Z_{N1} + log Z_{N2}` for a split of the
/// neurons into the first `N1` and the remaining `N2` rows.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SubadditivityReport {
    #[serde(rename = "N")]
    pub n: usize,
    pub n1: usize,
    pub n2: usize,
    pub pressure: f64,
    pub pressure1: f64,
    pub pressure2: f64,
    pub log_z: f64,
    pub log_z1: f64,
    pub log_z2: f64,
    /// `N1 F1 + N2 F2 - N F`.
    pub slack: f64,
    pub holds: bool,
}

/// Floating-point allowance on the slack sign.
pub const SUBADDITIVITY_TOL: f64 = 1e-10;

pub fn subadditivity_check(
    patterns: &PatternSet,
    params: &ModelParams,
    split: (usize, usize),
) -> Result<SubadditivityReport> {
    let (n1, n2) = split;
    let n = patterns.n();
    if n1 == 0 || n2 == 0 || n1 + n2 != n {
        return Err(Error::InvalidParameter(format!(
            "split {n1}+{n2} does not partition N = {n}"
        )));
    }
    let cap = DEFAULT_ENUMERATION_CAP;
    let sub1 = patterns.rows(0, n1)?;
    let sub2 = patterns.rows(n1, n)?;
    let e = exact_log_partition_excess(patterns, params, cap)?;
    let e1 = exact_log_partition_excess(&sub1, params, cap)?;
    let e2 = exact_log_partition_excess(&sub2, params, cap)?;
    let ln2 = std::f64::consts::LN_2;
    let slack = e1 + e2 - e;
    Ok(SubadditivityReport {
        n,
        n1,
        n2,
        pressure: ln2 + e / n as f64,
        pressure1: ln2 + e1 / n1 as f64,
        pressure2: ln2 + e2 / n2 as f64,
        log_z: n as f64 * ln2 + e,
        log_z1: n1 as f64 * ln2 + e1,
        log_z2: n2 as f64 * ln2 + e2,
        slack,
        holds: slack >= -SUBADDITIVITY_TOL,
    })
}

/// [`subadditivity_check`] over independent pattern draws.
pub fn subadditivity_draws(
    params: &ModelParams,
    split: (usize, usize),
    draws: usize,
    seed: u64,
) -> Result<Vec<SubadditivityReport>> {
    let n = split.0 + split.1;
    (0..draws)
        .into_par_iter()
        .map(|d| {
            let mut r = rng::stream(seed, n as u64, d as u64);
            let patterns = PatternSet::random_with(n, params.p, &mut r, None);
            subadditivity_check(&patterns, params, split)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{exact_gibbs_distribution, hamiltonian_rel_corr};

    fn params(p: usize, a: f64, beta: f64) -> ModelParams {
        ModelParams::new(p, a, beta).unwrap()
    }

    #[test]
    fn config_validation() {
        assert!(McConfig::default().validate().is_ok());
        assert!(McConfig { burn_in: 400, ..Default::default() }.validate().is_err());
        assert!(McConfig { measure_every: 0, ..Default::default() }.validate().is_err());
        assert_eq!("metropolis".parse::<UpdateRule>().unwrap(), UpdateRule::Metropolis);
        assert!("wolff".parse::<UpdateRule>().is_err());
    }

    #[test]
    fn delta_energy_matches_recomputation() {
        let pats = PatternSet::random(50, 3, 3);
        let par = params(3, 0.3, 1.0);
        let mut r = rng::seeded(4);
        for _ in 0..2000 {
            let mut s = SpinSystem::random(&pats, &mut r);
            let i = r.random_range(0..50);
            let before = hamiltonian_rel_corr(&s, &par);
            let dh = delta_energy(&s, i, &par);
            s.flip(i);
            let after = hamiltonian_rel_corr(&s, &par);
            assert!((dh - (after - before)).abs() < 1e-10);
            let back = delta_energy(&s, i, &par);
            assert!((dh + back).abs() < 1e-12);
        }
    }

    #[test]
    fn delta_energy_from_zero_overlap_is_negative() {
        let n = 40;
        let pats = PatternSet::from_bits(n, 1, vec![1; n]).unwrap();
        let sigma: Vec<i8> = (0..n).map(|i| if i % 2 == 0 { 1 } else { -1 }).collect();
        let s = SpinSystem::new(&pats, sigma).unwrap();
        let par = params(1, 0.0, 1.0);
        for i in 0..n {
            let dh = delta_energy(&s, i, &par);
            let d = 2.0 / n as f64;
            assert!((dh + n as f64 * ((1.0 + d * d).sqrt() - 1.0)).abs() < 1e-12);
            assert!(dh < 0.0);
        }
    }

    #[test]
    fn acceptance_rules() {
        assert_eq!(acceptance(UpdateRule::Glauber, 0.0, 3.0), 0.5);
        assert_eq!(acceptance(UpdateRule::Glauber, 0.0, -3.0), 0.5);
        assert_eq!(acceptance(UpdateRule::Metropolis, 2.0, -1.0), 1.0);
        assert!((acceptance(UpdateRule::Metropolis, 2.0, 1.0) - (-2.0f64).exp()).abs() < 1e-15);
        let g = acceptance(UpdateRule::Glauber, 1.5, 0.7);
        assert!((g - 1.0 / (1.0 + (1.05f64).exp())).abs() < 1e-15);
        assert_eq!(acceptance(UpdateRule::Glauber, 1e3, 1e3), 0.0);
        assert_eq!(acceptance(UpdateRule::Glauber, f64::INFINITY, -1.0), 1.0);
        assert_eq!(acceptance(UpdateRule::Metropolis, f64::INFINITY, 1.0), 0.0);
    }

    #[test]
    fn infinite_temperature_accepts_half() {
        let pats = PatternSet::random(100, 2, 1);
        let par = params(2, 0.3, 0.0);
        let mut r = rng::seeded(2);
        let init = SpinSystem::random(&pats, &mut r);
        let mut s = Sampler::new(init, par, UpdateRule::Glauber, rng::seeded(3));
        for _ in 0..200 {
            s.sweep();
        }
        assert!((s.acceptance_rate() - 0.5).abs() < 0.01);
    }

    #[test]
    fn deep_retrieval_well() {
        let pats = PatternSet::random(500, 3, 17);
        let par = params(3, 0.0, 1e3);
        let cfg = McConfig {
            sweeps: 60,
            burn_in: 10,
            ..Default::default()
        };
        let traj = run(&pats, &par, SpinSystem::aligned(&pats, 0), &cfg).unwrap();
        assert_eq!(traj.rows.len(), 50);
        let m = traj.mean_m();
        assert!(m[0] >= 0.99);
        assert!(m[1].abs() <= 0.1 && m[2].abs() <= 0.1);
    }

    #[test]
    fn trajectories_are_reproducible() {
        let pats = PatternSet::random(64, 3, 5);
        let par = params(3, 0.2, 1.5);
        let cfg = McConfig {
            sweeps: 30,
            burn_in: 5,
            measure_every: 5,
            ..Default::default()
        };
        let mut r = rng::seeded(1);
        let init = SpinSystem::random(&pats, &mut r);
        let a = run(&pats, &par, init.clone(), &cfg).unwrap();
        let b = run(&pats, &par, init.clone(), &cfg).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.rows.iter().map(|r| r.sweep).collect::<Vec<_>>(), vec![10, 15, 20, 25, 30]);
        let c = run(&pats, &par, init, &McConfig { seed: 2, ..cfg }).unwrap();
        assert_ne!(a, c);
        let mut buf = Vec::new();
        a.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("sweep_index,m_1,m_2,m_3,energy_per_neuron\n"));
        assert_eq!(text.lines().count(), 6);
    }

    #[test]
    fn metropolis_samples_gibbs_measure() {
        let pats = PatternSet::random(6, 2, 9);
        let par = params(2, 0.3, 1.0);
        let exact = exact_gibbs_distribution(&pats, &par, 24).unwrap();
        let emp = empirical_distribution(&pats, &par, UpdateRule::Metropolis, 1_000_000, 1000, 7).unwrap();
        assert!(total_variation(&exact, &emp) < 0.02);
    }

    #[test]
    fn sample_stats() {
        let s = SampleStats::of(&[1.0, 2.0, 3.0, 4.0]);
        assert_eq!(s.mean, 2.5);
        assert!((s.variance - 5.0 / 3.0).abs() < 1e-15);
        let same = SampleStats::of(&[0.7; 50]);
        assert_eq!(same.variance, 0.0);
        assert_eq!(same.variance_se, 0.0);
    }

    #[test]
    fn selfavg_infinite_temperature_has_no_variance() {
        let rows = selfavg_experiment(&params(2, 0.3, 0.0), &[4, 8], 20, 1).unwrap();
        for row in rows {
            assert_eq!(row.variance, 0.0);
            assert_eq!(row.mean, std::f64::consts::LN_2);
        }
        assert!(selfavg_experiment(&params(2, 0.3, 1.0), &[30], 2, 1).is_err());
    }

    #[test]
    fn trend_verdicts() {
        let row = |v: f64, se: f64| SelfAvgRow { n: 1, draws: 1, mean: 0.0, variance: v, variance_se: se };
        assert!(variance_trend(&[row(4.0, 0.1), row(3.0, 0.1), row(2.0, 0.1)]).non_increasing);
        let one = variance_trend(&[row(4.0, 0.5), row(4.2, 0.5), row(2.0, 0.1)]);
        assert_eq!(one.inversions, 1);
        assert!(one.non_increasing);
        assert!(!variance_trend(&[row(4.0, 0.01), row(5.0, 0.01)]).non_increasing);
        assert!(!variance_trend(&[row(1.0, 1.0), row(1.1, 1.0), row(1.0, 1.0), row(1.1, 1.0)]).non_increasing);
    }

    #[test]
    fn subadditivity_examples() {
        let pats = PatternSet::random(8, 2, 3);
        let r = subadditivity_check(&pats, &params(2, 0.3, 1.0), (4, 4)).unwrap();
        assert!(r.holds && r.slack >= 0.0);
        let n_f = 8.0 * r.pressure;
        let parts = 4.0 * r.pressure1 + 4.0 * r.pressure2;
        assert!((parts - n_f - r.slack).abs() < 1e-12);
        let r = subadditivity_check(&pats, &params(2, 0.3, 0.0), (4, 4)).unwrap();
        assert_eq!(r.slack, 0.0);
        assert!(subadditivity_check(&pats, &params(2, 0.3, 1.0), (3, 4)).is_err());
        let draws = subadditivity_draws(&params(2, 0.3, 1.0), (5, 5), 20, 4).unwrap();
        assert!(draws.iter().all(|r| r.holds));
    }
}
