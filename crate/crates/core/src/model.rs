//! Finite-size model: patterns, spin configurations, Hamiltonians and the
//! exactly enumerated intensive pressure.

use rand::Rng as _;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use crate::correlation::quadratic_form;
use crate::error::{Error, Result};
use crate::meanfield::Magnetization;
use crate::rng;

/// Default cap on `N` for `2^N` enumeration.
pub const DEFAULT_ENUMERATION_CAP: usize = 24;

/// One thermodynamic point `(P, a, β)`.
///
/// `beta = +∞` selects the zero-temperature limit, where the mean-field maps
/// replace `tanh` with `sign`. Finite-size routines reject it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModelParams {
    pub p: usize,
    pub a: f64,
    pub beta: f64,
}

impl ModelParams {
    pub fn new(p: usize, a: f64, beta: f64) -> Result<Self> {
        if p == 0 {
            return Err(Error::InvalidParameter("P must be at least 1".into()));
        }
        if !(0.0..=1.0).contains(&a) {
            return Err(Error::InvalidParameter(format!(
                "correlation strength a = {a} outside [0, 1]"
            )));
        }
        if beta.is_nan() || beta < 0.0 {
            return Err(Error::InvalidParameter(format!(
                "inverse temperature beta = {beta} must be >= 0"
            )));
        }
        Ok(Self { p, a, beta })
    }

    /// `T = 0` maps to the zero-temperature limit.
    pub fn from_temperature(p: usize, a: f64, t: f64) -> Result<Self> {
        if t.is_nan() || t < 0.0 {
            return Err(Error::InvalidParameter(format!(
                "temperature T = {t} must be >= 0"
            )));
        }
        let beta = if t == 0.0 { f64::INFINITY } else { 1.0 / t };
        Self::new(p, a, beta)
    }

    pub fn zero_temperature(p: usize, a: f64) -> Result<Self> {
        Self::new(p, a, f64::INFINITY)
    }

    pub fn temperature(&self) -> f64 {
        if self.beta.is_infinite() {
            0.0
        } else {
            1.0 / self.beta
        }
    }

    pub fn is_zero_temperature(&self) -> bool {
        self.beta.is_infinite()
    }

    /// Whether the eigen-rotation of `X` is available (strictly positive spectrum).
    pub fn rotation_available(&self) -> bool {
        crate::correlation::closed_form_eigenvalues(self.p, self.a)
            .last()
            .is_some_and(|&l| l > crate::correlation::POSITIVITY_EPS)
    }

    fn require_finite_beta(&self) -> Result<()> {
        if self.beta.is_finite() {
            Ok(())
        } else {
            Err(Error::InvalidParameter(
                "finite-size routines need a finite beta".into(),
            ))
        }
    }
}

/// `N × P` array of ±1 pattern bits, one row per neuron.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PatternSet {
    n: usize,
    p: usize,
    bits: Vec<i8>,
    seed: Option<u64>,
}

impl PatternSet {
    pub fn from_bits(n: usize, p: usize, bits: Vec<i8>) -> Result<Self> {
        if n == 0 || p == 0 {
            return Err(Error::InvalidParameter("pattern set must be non-empty".into()));
        }
        if bits.len() != n * p {
            return Err(Error::DimensionMismatch {
                expected: n * p,
                actual: bits.len(),
            });
        }
        if let Some(bad) = bits.iter().find(|&&b| b != 1 && b != -1) {
            return Err(Error::InvalidParameter(format!(
                "pattern entry {bad} is not ±1"
            )));
        }
        Ok(Self {
            n,
            p,
            bits,
            seed: None,
        })
    }

    /// I.i.d. unbiased ±1 entries.
    pub fn random(n: usize, p: usize, seed: u64) -> Self {
        let mut r = rng::seeded(seed);
        Self::random_with(n, p, &mut r, Some(seed))
    }

    pub fn random_with(n: usize, p: usize, r: &mut rng::Rng, seed: Option<u64>) -> Self {
        assert!(n > 0 && p > 0, "pattern set must be non-empty");
        let bits = (0..n * p)
            .map(|_| if r.random::<bool>() { 1 } else { -1 })
            .collect();
        Self { n, p, bits, seed }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn p(&self) -> usize {
        self.p
    }

    pub fn seed(&self) -> Option<u64> {
        self.seed
    }

    pub fn get(&self, i: usize, mu: usize) -> i8 {
        self.bits[i * self.p + mu]
    }

    pub fn row(&self, i: usize) -> &[i8] {
        &self.bits[i * self.p..(i + 1) * self.p]
    }

    /// Pattern `μ` as a length-`N` spin vector.
    pub fn pattern(&self, mu: usize) -> Vec<i8> {
        (0..self.n).map(|i| self.get(i, mu)).collect()
    }

    /// The neurons `start..end`, keeping every pattern.
    pub fn rows(&self, start: usize, end: usize) -> Result<Self> {
        if start >= end || end > self.n {
            return Err(Error::InvalidParameter(format!(
                "row range {start}..{end} invalid for N = {}",
                self.n
            )));
        }
        Ok(Self {
            n: end - start,
            p: self.p,
            bits: self.bits[start * self.p..end * self.p].to_vec(),
            seed: self.seed,
        })
    }

    /// CSV of ±1 integers, one neuron per row, preceded by a
    /// `# N=<n> P=<p> seed=<s>` header line.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        let seed = self
            .seed
            .map_or_else(|| "none".to_string(), |s| s.to_string());
        writeln!(out, "# N={} P={} seed={}", self.n, self.p, seed)?;
        let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(out);
        for i in 0..self.n {
            w.write_record(self.row(i).iter().map(|b| b.to_string()))?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_csv(path: &Path) -> Result<Self> {
        let file = std::fs::File::open(path)?;
        let mut reader = BufReader::new(file);
        let mut header = String::new();
        reader.read_line(&mut header)?;
        let bad = |reason: String| Error::PatternFormat {
            path: path.to_path_buf(),
            reason,
        };
        let (n, p, seed) = parse_header(header.trim()).map_err(bad)?;

        let mut r = csv::ReaderBuilder::new()
            .has_headers(false)
            .comment(Some(b'#'))
            .trim(csv::Trim::All)
            .from_reader(reader);
        let mut bits = Vec::with_capacity(n * p);
        for (line, record) in r.records().enumerate() {
            let record = record?;
            if record.len() != p {
                return Err(bad(format!(
                    "row {line} has {} columns, expected {p}",
                    record.len()
                )));
            }
            for field in record.iter() {
                let b: i8 = field
                    .parse()
                    .map_err(|_| bad(format!("row {line}: {field:?} is not an integer")))?;
                bits.push(b);
            }
        }
        let mut set = Self::from_bits(n, p, bits).map_err(|e| bad(e.to_string()))?;
        set.seed = seed;
        Ok(set)
    }
}

fn parse_header(line: &str) -> std::result::Result<(usize, usize, Option<u64>), String> {
    let body = line
        .strip_prefix('#')
        .ok_or_else(|| format!("missing '# N=.. P=.. seed=..' header, found {line:?}"))?;
    let (mut n, mut p, mut seed) = (None, None, None);
    for token in body.split_whitespace() {
        let (key, value) = token
            .split_once('=')
            .ok_or_else(|| format!("malformed header token {token:?}"))?;
        match key {
            "N" => n = Some(value.parse().map_err(|_| format!("bad N {value:?}"))?),
            "P" => p = Some(value.parse().map_err(|_| format!("bad P {value:?}"))?),
            "seed" => {
                seed = match value {
                    "none" => None,
                    v => Some(v.parse().map_err(|_| format!("bad seed {v:?}"))?),
                }
            }
            _ => return Err(format!("unknown header key {key:?}")),
        }
    }
    Ok((n.ok_or("header lacks N")?, p.ok_or("header lacks P")?, seed))
}

/// Spin configuration with incrementally maintained Mattis overlaps.
///
/// The overlaps are kept as exact integer sums `Σ_i ξ_i^μ σ_i`, so the cached
/// `m_μ = sum_μ / N` is bit-identical to a recomputation from scratch.
#[derive(Debug, Clone)]
pub struct SpinSystem<'a> {
    patterns: &'a PatternSet,
    sigma: Vec<i8>,
    sums: Vec<i64>,
    m: Vec<f64>,
}

impl<'a> SpinSystem<'a> {
    pub fn new(patterns: &'a PatternSet, sigma: Vec<i8>) -> Result<Self> {
        if sigma.len() != patterns.n() {
            return Err(Error::DimensionMismatch {
                expected: patterns.n(),
                actual: sigma.len(),
            });
        }
        if sigma.iter().any(|&s| s != 1 && s != -1) {
            return Err(Error::InvalidParameter("spins must be ±1".into()));
        }
        let mut s = Self {
            patterns,
            sigma,
            sums: vec![0; patterns.p()],
            m: vec![0.0; patterns.p()],
        };
        s.sums = s.recompute_sums();
        s.refresh_overlaps();
        Ok(s)
    }

    /// `σ = ξ^μ`.
    pub fn aligned(patterns: &'a PatternSet, mu: usize) -> Self {
        Self::new(patterns, patterns.pattern(mu)).expect("pattern is a valid configuration")
    }

    pub fn random(patterns: &'a PatternSet, r: &mut rng::Rng) -> Self {
        let sigma = (0..patterns.n())
            .map(|_| if r.random::<bool>() { 1 } else { -1 })
            .collect();
        Self::new(patterns, sigma).expect("random configuration is valid")
    }

    /// Configuration whose bit `i` is set iff `σ_i = -1`.
    pub fn from_state_index(patterns: &'a PatternSet, index: u64) -> Result<Self> {
        if patterns.n() > 63 {
            return Err(Error::EnumerationCap {
                size: patterns.n(),
                cap: 63,
            });
        }
        let sigma = (0..patterns.n())
            .map(|i| if index >> i & 1 == 1 { -1 } else { 1 })
            .collect();
        Self::new(patterns, sigma)
    }

    pub fn state_index(&self) -> u64 {
        self.sigma
            .iter()
            .enumerate()
            .filter(|(_, &s)| s == -1)
            .fold(0, |acc, (i, _)| acc | 1 << i)
    }

    pub fn patterns(&self) -> &'a PatternSet {
        self.patterns
    }

    pub fn n(&self) -> usize {
        self.sigma.len()
    }

    pub fn spins(&self) -> &[i8] {
        &self.sigma
    }

    /// Cached overlaps `m_μ`.
    pub fn overlaps(&self) -> &[f64] {
        &self.m
    }

    /// Overlaps after flipping spin `i`, without applying the flip.
    pub fn overlaps_after_flip(&self, i: usize, out: &mut [f64]) {
        let n = self.n() as f64;
        let s = i64::from(self.sigma[i]);
        for (mu, o) in out.iter_mut().enumerate() {
            let xi = i64::from(self.patterns.get(i, mu));
            *o = (self.sums[mu] - 2 * xi * s) as f64 / n;
        }
    }

    pub fn flip(&mut self, i: usize) {
        let s = i64::from(self.sigma[i]);
        for mu in 0..self.sums.len() {
            self.sums[mu] -= 2 * i64::from(self.patterns.get(i, mu)) * s;
        }
        self.sigma[i] = -self.sigma[i];
        self.refresh_overlaps();
    }

    /// `(1/N) Σ_i ξ_i^μ σ_i` from scratch.
    pub fn recompute_overlaps(&self) -> Vec<f64> {
        let n = self.n() as f64;
        self.recompute_sums().iter().map(|&s| s as f64 / n).collect()
    }

    fn recompute_sums(&self) -> Vec<i64> {
        let mut sums = vec![0i64; self.patterns.p()];
        for (i, &s) in self.sigma.iter().enumerate() {
            for (mu, sum) in sums.iter_mut().enumerate() {
                *sum += i64::from(self.patterns.get(i, mu)) * i64::from(s);
            }
        }
        sums
    }

    fn refresh_overlaps(&mut self) {
        let n = self.n() as f64;
        for (m, &s) in self.m.iter_mut().zip(&self.sums) {
            *m = s as f64 / n;
        }
    }
}

/// Mattis magnetization vector of a configuration.
pub fn mattis(spins: &SpinSystem<'_>) -> Magnetization {
    Magnetization::new(spins.overlaps().to_vec())
}

/// `-N √(1 + mᵀXm)` for overlaps `m`.
pub fn rel_energy(n: usize, a: f64, m: &[f64]) -> f64 {
    let arg = 1.0 + quadratic_form(a, m);
    assert!(arg > 0.0, "1 + mᵀXm = {arg} must be positive");
    -(n as f64) * arg.sqrt()
}

/// `-(N/2) mᵀXm` for overlaps `m`.
pub fn cl_energy(n: usize, a: f64, m: &[f64]) -> f64 {
    -0.5 * n as f64 * quadratic_form(a, m)
}

pub fn hamiltonian_rel_corr(spins: &SpinSystem<'_>, params: &ModelParams) -> f64 {
    rel_energy(spins.n(), params.a, spins.overlaps())
}

pub fn hamiltonian_cl_corr(spins: &SpinSystem<'_>, params: &ModelParams) -> f64 {
    cl_energy(spins.n(), params.a, spins.overlaps())
}

/// `log Z - N log 2` of the relativistic correlated model, by Gray-code
/// enumeration of all `2^N` configurations with a running-maximum
/// log-sum-exp.
///
/// Returning the excess over `N log 2` keeps `β = 0` exact.
fn log_partition_excess(patterns: &PatternSet, params: &ModelParams, cap: usize) -> Result<f64> {
    let n = patterns.n();
    let p = patterns.p();
    if n > cap || n > 62 {
        return Err(Error::EnumerationCap { size: n, cap });
    }
    if p != params.p {
        return Err(Error::DimensionMismatch {
            expected: params.p,
            actual: p,
        });
    }
    params.require_finite_beta()?;

    let nf = n as f64;
    let beta_n = params.beta * nf;
    let a = params.a;
    // Start from σ = (+1, ..., +1).
    let mut sigma = vec![1i64; n];
    let mut sums: Vec<i64> = (0..p)
        .map(|mu| (0..n).map(|i| i64::from(patterns.get(i, mu))).sum())
        .collect();
    let mut m = vec![0.0; p];
    let log_weight = |sums: &[i64], m: &mut [f64]| {
        for (mi, &s) in m.iter_mut().zip(sums) {
            *mi = s as f64 / nf;
        }
        beta_n * (1.0 + quadratic_form(a, m)).sqrt()
    };

    let mut shift = log_weight(&sums, &mut m);
    let mut acc = 1.0f64;
    for k in 1u64..(1u64 << n) {
        let i = k.trailing_zeros() as usize;
        let s = sigma[i];
        for (mu, sum) in sums.iter_mut().enumerate() {
            *sum -= 2 * i64::from(patterns.get(i, mu)) * s;
        }
        sigma[i] = -s;
        let lw = log_weight(&sums, &mut m);
        if lw > shift {
            acc = acc * (shift - lw).exp() + 1.0;
            shift = lw;
        } else {
            acc += (lw - shift).exp();
        }
    }
    // acc * 2^-N is an exact rescaling.
    let scaled = acc * (-(n as f64)).exp2();
    Ok(shift + scaled.ln())
}

/// `log Z_N` of the relativistic correlated model.
pub fn exact_log_partition(patterns: &PatternSet, params: &ModelParams, cap: usize) -> Result<f64> {
    let excess = log_partition_excess(patterns, params, cap)?;
    Ok(patterns.n() as f64 * std::f64::consts::LN_2 + excess)
}

/// Intensive pressure `F_N = (1/N) log Σ_σ exp(-β H(σ))` by exact enumeration.
pub fn exact_pressure(patterns: &PatternSet, params: &ModelParams) -> Result<f64> {
    exact_pressure_with_cap(patterns, params, DEFAULT_ENUMERATION_CAP)
}

pub fn exact_pressure_with_cap(
    patterns: &PatternSet,
    params: &ModelParams,
    cap: usize,
) -> Result<f64> {
    let excess = log_partition_excess(patterns, params, cap)?;
    Ok(std::f64::consts::LN_2 + excess / patterns.n() as f64)
}

/// `log Z_N - N log 2`; differences of these are exact at `β = 0`.
pub fn exact_log_partition_excess(
    patterns: &PatternSet,
    params: &ModelParams,
    cap: usize,
) -> Result<f64> {
    log_partition_excess(patterns, params, cap)
}

/// Exact Gibbs probabilities indexed by [`SpinSystem::state_index`].
pub fn exact_gibbs_distribution(
    patterns: &PatternSet,
    params: &ModelParams,
    cap: usize,
) -> Result<Vec<f64>> {
    let n = patterns.n();
    if n > cap.min(30) {
        return Err(Error::EnumerationCap {
            size: n,
            cap: cap.min(30),
        });
    }
    params.require_finite_beta()?;
    let log_w: Vec<f64> = (0..1u64 << n)
        .map(|idx| {
            let s = SpinSystem::from_state_index(patterns, idx)?;
            Ok(-params.beta * hamiltonian_rel_corr(&s, params))
        })
        .collect::<Result<_>>()?;
    let max = log_w.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let w: Vec<f64> = log_w.iter().map(|l| (l - max).exp()).collect();
    let z: f64 = w.iter().sum();
    Ok(w.into_iter().map(|x| x / z).collect())
}
