//! The cyclic temporal-correlation matrix `X` and its spectral structure.
//!
//! `X` couples every pattern to its two cyclic neighbours with strength `a`:
//! `X = I + a (S + S^T)` where `S` is the cyclic shift. The literal reading of
//! the neighbour sum is kept for small `P`: with `P = 2` both neighbours are
//! the same pattern, so the off-diagonal entry is `2a`, and with `P = 1` the
//! single entry is `1 + 2a`.

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;
use serde::Serialize;
use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::model::PatternSet;

/// Eigenvalues closer than this are treated as one eigenspace.
const CLUSTER_TOL: f64 = 1e-8;

/// Smallest eigenvalue accepted by [`rotate_patterns`].
pub const POSITIVITY_EPS: f64 = 1e-12;

/// Computes `X m` in place into `out` using the three-term cyclic stencil.
///
/// Works for every `P >= 1`, including the wrap-around cases `P = 1, 2`.
pub fn apply_cyclic(a: f64, m: &[f64], out: &mut [f64]) {
    let p = m.len();
    debug_assert_eq!(out.len(), p);
    for mu in 0..p {
        let next = m[(mu + 1) % p];
        let prev = m[(mu + p - 1) % p];
        out[mu] = m[mu] + a * (next + prev);
    }
}

/// `m^T X m` without materialising `X`.
pub fn quadratic_form(a: f64, m: &[f64]) -> f64 {
    let p = m.len();
    (0..p)
        .map(|mu| m[mu] * (m[mu] + a * (m[(mu + 1) % p] + m[(mu + p - 1) % p])))
        .sum()
}

#[derive(Debug, Clone, PartialEq)]
pub struct CorrelationMatrix {
    p: usize,
    a: f64,
    dense: DMatrix<f64>,
}

impl CorrelationMatrix {
    pub fn new(p: usize, a: f64) -> Result<Self> {
        if p == 0 {
            return Err(Error::InvalidParameter("P must be at least 1".into()));
        }
        if !(0.0..=1.0).contains(&a) {
            return Err(Error::InvalidParameter(format!(
                "correlation strength a = {a} outside [0, 1]"
            )));
        }
        let mut dense = DMatrix::zeros(p, p);
        for mu in 0..p {
            dense[(mu, mu)] += 1.0;
            dense[(mu, (mu + 1) % p)] += a;
            dense[(mu, (mu + p - 1) % p)] += a;
        }
        Ok(Self { p, a, dense })
    }

    pub fn p(&self) -> usize {
        self.p
    }

    pub fn a(&self) -> f64 {
        self.a
    }

    pub fn dense(&self) -> &DMatrix<f64> {
        &self.dense
    }

    pub fn get(&self, mu: usize, nu: usize) -> f64 {
        self.dense[(mu, nu)]
    }

    /// Matrix-free product `X m`.
    pub fn apply(&self, m: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; m.len()];
        apply_cyclic(self.a, m, &mut out);
        out
    }

    /// Dense product, kept as a cross-check for [`apply`](Self::apply).
    pub fn apply_dense(&self, m: &[f64]) -> Vec<f64> {
        (0..self.p)
            .map(|mu| (0..self.p).map(|nu| self.dense[(mu, nu)] * m[nu]).sum())
            .collect()
    }

    pub fn quadratic_form(&self, m: &[f64]) -> f64 {
        quadratic_form(self.a, m)
    }

    pub fn spectrum(&self) -> Spectrum {
        Spectrum::of(self)
    }
}

/// Eigen-decomposition `X = U diag(λ) U^T` with eigenvalues sorted in
/// descending order.
///
/// Degenerate eigenspaces (`λ_k = λ_{P-k}`) get a canonical basis: the
/// discrete cosine/sine vectors are projected onto the eigenspace in a fixed
/// order and orthonormalised, so the basis (and every rotated pattern built
/// from it) is reproducible across runs.
#[derive(Debug, Clone)]
pub struct Spectrum {
    eigenvalues: Vec<f64>,
    eigenvectors: DMatrix<f64>,
}

impl Spectrum {
    pub fn of(x: &CorrelationMatrix) -> Self {
        let p = x.p;
        if x.a == 0.0 {
            return Self {
                eigenvalues: vec![1.0; p],
                eigenvectors: DMatrix::identity(p, p),
            };
        }

        let eig = SymmetricEigen::new(x.dense.clone());
        let mut order: Vec<usize> = (0..p).collect();
        order.sort_by(|&i, &j| eig.eigenvalues[j].total_cmp(&eig.eigenvalues[i]));
        let eigenvalues: Vec<f64> = order.iter().map(|&i| eig.eigenvalues[i]).collect();

        let reference = fourier_basis(p);
        let mut eigenvectors = DMatrix::zeros(p, p);
        let mut start = 0;
        while start < p {
            let mut end = start + 1;
            while end < p && (eigenvalues[end - 1] - eigenvalues[end]).abs() < CLUSTER_TOL {
                end += 1;
            }
            let raw: Vec<Vec<f64>> = order[start..end]
                .iter()
                .map(|&i| eig.eigenvectors.column(i).iter().copied().collect())
                .collect();
            let canonical = canonical_basis(&raw, &reference);
            for (k, v) in canonical.into_iter().enumerate() {
                for mu in 0..p {
                    eigenvectors[(mu, start + k)] = v[mu];
                }
            }
            start = end;
        }
        Self {
            eigenvalues,
            eigenvectors,
        }
    }

    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    /// Columns are the eigenvectors, in the order of [`eigenvalues`](Self::eigenvalues).
    pub fn eigenvectors(&self) -> &DMatrix<f64> {
        &self.eigenvectors
    }

    pub fn min_eigenvalue(&self) -> f64 {
        self.eigenvalues.iter().copied().fold(f64::INFINITY, f64::min)
    }

    /// `√λ`, defined only for a strictly positive spectrum.
    pub fn sqrt_d(&self) -> Option<Vec<f64>> {
        if self.min_eigenvalue() > POSITIVITY_EPS {
            Some(self.eigenvalues.iter().map(|l| l.sqrt()).collect())
        } else {
            None
        }
    }

    /// `U diag(λ) U^T`.
    pub fn reconstruct(&self) -> DMatrix<f64> {
        let d = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(self.eigenvalues.clone()));
        &self.eigenvectors * d * self.eigenvectors.transpose()
    }
}

/// Orthonormal cosine/sine basis of `R^P`, low frequencies first.
fn fourier_basis(p: usize) -> Vec<Vec<f64>> {
    let mut basis = Vec::with_capacity(p);
    for k in 0..=p / 2 {
        let theta = 2.0 * PI * k as f64 / p as f64;
        basis.push(normalized((0..p).map(|mu| (theta * mu as f64).cos()).collect()));
        if k != 0 && 2 * k != p {
            basis.push(normalized((0..p).map(|mu| (theta * mu as f64).sin()).collect()));
        }
    }
    basis
}

fn normalized(mut v: Vec<f64>) -> Vec<f64> {
    let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    v.iter_mut().for_each(|x| *x /= n);
    v
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Projects the reference vectors onto `span(raw)` and Gram-Schmidts them.
fn canonical_basis(raw: &[Vec<f64>], reference: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let dim = raw.len();
    let mut accepted: Vec<Vec<f64>> = Vec::with_capacity(dim);
    for r in reference {
        if accepted.len() == dim {
            break;
        }
        let mut v = vec![0.0; r.len()];
        for q in raw {
            let c = dot(q, r);
            v.iter_mut().zip(q).for_each(|(vi, qi)| *vi += c * qi);
        }
        for u in &accepted {
            let c = dot(u, &v);
            v.iter_mut().zip(u).for_each(|(vi, ui)| *vi -= c * ui);
        }
        if dot(&v, &v).sqrt() > 1e-6 {
            accepted.push(normalized(v));
        }
    }
    // The cosine/sine vectors span R^P, so this only triggers on a broken
    // eigen-decomposition.
    assert_eq!(accepted.len(), dim, "eigenspace canonicalisation failed");
    accepted
}

/// `1 + 2a cos(2πk/P)` for `k = 0..P`, sorted descending.
pub fn closed_form_eigenvalues(p: usize, a: f64) -> Vec<f64> {
    let mut v: Vec<f64> = (0..p)
        .map(|k| 1.0 + 2.0 * a * (2.0 * PI * k as f64 / p as f64).cos())
        .collect();
    v.sort_by(|x, y| y.total_cmp(x));
    v
}

/// Closed-form characteristic polynomial `det(X - λI)` of the cyclic matrix.
///
/// With `φ = (1 - λ)/2` and `r± = φ ± √(φ² - a²)` the determinant is
/// `r₊^P + r₋^P - 2(-1)^P a^P`. When `φ² < a²` the roots are complex
/// conjugates and the sum is evaluated in complex arithmetic; its imaginary
/// part cancels.
pub fn char_poly_value(p: usize, a: f64, lambda: f64) -> f64 {
    let phi = Complex64::new((1.0 - lambda) / 2.0, 0.0);
    let disc = (phi * phi - a * a).sqrt();
    let exp = p as u32;
    let value = (phi + disc).powu(exp) + (phi - disc).powu(exp);
    let sign = if p.is_multiple_of(2) { 1.0 } else { -1.0 };
    let boundary = 2.0 * sign * a.powi(p as i32);
    debug_assert!(
        value.im.abs() <= 1e-9 * (1.0 + value.re.abs()),
        "imaginary residue {} in characteristic polynomial",
        value.im
    );
    value.re - boundary
}

/// Patterns in the eigenbasis of `X`, scaled by `√λ`.
#[derive(Debug, Clone)]
pub struct RotatedPatterns {
    n: usize,
    p: usize,
    tilde: Vec<f64>,
}

impl RotatedPatterns {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn p(&self) -> usize {
        self.p
    }

    pub fn get(&self, i: usize, rho: usize) -> f64 {
        self.tilde[i * self.p + rho]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.tilde[i * self.p..(i + 1) * self.p]
    }

    /// `J_ij = (1/N) Σ_ρ ξ̃_i^ρ ξ̃_j^ρ`.
    pub fn coupling(&self, i: usize, j: usize) -> f64 {
        dot(self.row(i), self.row(j)) / self.n as f64
    }

    /// Column covariance `(1/N) Σ_i ξ̃_i^ρ ξ̃_i^μ - mean_ρ mean_μ`.
    pub fn covariance(&self) -> DMatrix<f64> {
        let n = self.n as f64;
        let means: Vec<f64> = (0..self.p)
            .map(|rho| (0..self.n).map(|i| self.get(i, rho)).sum::<f64>() / n)
            .collect();
        DMatrix::from_fn(self.p, self.p, |rho, mu| {
            (0..self.n).map(|i| self.get(i, rho) * self.get(i, mu)).sum::<f64>() / n
                - means[rho] * means[mu]
        })
    }

    /// Pearson correlation matrix of the columns.
    pub fn normalized_covariance(&self) -> DMatrix<f64> {
        let cov = self.covariance();
        DMatrix::from_fn(self.p, self.p, |rho, mu| {
            cov[(rho, mu)] / (cov[(rho, rho)] * cov[(mu, mu)]).sqrt()
        })
    }
}

/// `ξ̃_i = √D U^T ξ_i` for every neuron `i`.
pub fn rotate_patterns(patterns: &PatternSet, spectrum: &Spectrum) -> Result<RotatedPatterns> {
    let p = patterns.p();
    if spectrum.eigenvalues.len() != p {
        return Err(Error::DimensionMismatch {
            expected: p,
            actual: spectrum.eigenvalues.len(),
        });
    }
    let sqrt_d = spectrum.sqrt_d().ok_or(Error::NotPositiveDefinite {
        min_eigenvalue: spectrum.min_eigenvalue(),
    })?;
    let u = &spectrum.eigenvectors;
    let mut tilde = Vec::with_capacity(patterns.n() * p);
    for i in 0..patterns.n() {
        let row = patterns.row(i);
        for (rho, s) in sqrt_d.iter().enumerate() {
            let proj: f64 = (0..p).map(|nu| u[(nu, rho)] * f64::from(row[nu])).sum();
            tilde.push(s * proj);
        }
    }
    Ok(RotatedPatterns {
        n: patterns.n(),
        p,
        tilde,
    })
}

/// JSON export of a spectrum with its residuals against the closed form.
#[derive(Debug, Clone, Serialize)]
pub struct SpectrumReport {
    #[serde(rename = "P")]
    pub p: usize,
    pub a: f64,
    pub eigenvalues: Vec<f64>,
    /// `|λ_numeric - λ_closed_form|`, index-aligned with `eigenvalues`.
    pub formula_residuals: Vec<f64>,
    /// `det(X - λI)` evaluated with the closed-form polynomial at each eigenvalue.
    pub char_poly_residuals: Vec<f64>,
}

impl SpectrumReport {
    pub fn new(x: &CorrelationMatrix) -> Self {
        let spectrum = x.spectrum();
        let closed = closed_form_eigenvalues(x.p, x.a);
        let formula_residuals = spectrum
            .eigenvalues
            .iter()
            .zip(&closed)
            .map(|(l, c)| (l - c).abs())
            .collect();
        let char_poly_residuals = closed
            .iter()
            .map(|&l| char_poly_value(x.p, x.a, l))
            .collect();
        Self {
            p: x.p,
            a: x.a,
            eigenvalues: spectrum.eigenvalues,
            formula_residuals,
            char_poly_residuals,
        }
    }

    pub fn max_formula_residual(&self) -> f64 {
        self.formula_residuals.iter().copied().fold(0.0, f64::max)
    }

    pub fn max_char_poly_residual(&self) -> f64 {
        self.char_poly_residuals
            .iter()
            .map(|r| r.abs())
            .fold(0.0, f64::max)
    }
}
