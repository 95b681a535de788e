use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::qmath::{DensityMatrix, SubsystemLayout};

/// Eigenvalues below this are treated as exact zeros.
pub const EIG_CUTOFF: f64 = 1e-12;

/// `−Σ p log₂ p` over entries above the cutoff.
pub fn shannon(probs: &[f64]) -> f64 {
    let s: f64 = probs.iter().filter(|&&p| p > EIG_CUTOFF).map(|&p| -p * p.log2()).sum();
    s.max(0.0)
}

/// Binary entropy `h(p)`.
pub fn binary_entropy(p: f64) -> f64 {
    shannon(&[p, 1.0 - p])
}

pub fn von_neumann(rho: &DensityMatrix) -> f64 {
    shannon(&rho.spectrum())
}

/// Entropy of the reduced state on `labels`; the empty set gives 0.
pub fn marginal_entropy<S: AsRef<str>>(rho: &DensityMatrix, labels: &[S]) -> Result<f64> {
    if labels.is_empty() {
        return Ok(0.0);
    }
    Ok(von_neumann(&rho.partial_trace(labels)?))
}

fn disjoint<S: AsRef<str>, T: AsRef<str>>(x: &[S], y: &[T]) -> Result<Vec<String>> {
    let mut all: Vec<String> = x.iter().map(|s| s.as_ref().to_string()).collect();
    for l in y {
        if all.iter().any(|a| a == l.as_ref()) {
            return Err(Error::OverlappingLabels(l.as_ref().to_string()));
        }
        all.push(l.as_ref().to_string());
    }
    Ok(all)
}

/// `S(of | given) = S(of ∪ given) − S(given)`.
pub fn conditional_entropy<S: AsRef<str>, T: AsRef<str>>(rho: &DensityMatrix, of: &[S], given: &[T]) -> Result<f64> {
    let joint = disjoint(of, given)?;
    Ok(marginal_entropy(rho, &joint)? - marginal_entropy(rho, given)?)
}

/// `I(x : y) = S(x) + S(y) − S(xy)`.
pub fn mutual_information<S: AsRef<str>, T: AsRef<str>>(rho: &DensityMatrix, x: &[S], y: &[T]) -> Result<f64> {
    let joint = disjoint(x, y)?;
    Ok(marginal_entropy(rho, x)? + marginal_entropy(rho, y)? - marginal_entropy(rho, &joint)?)
}

/// Continuity bound `4λ log₂|X| + 2h(λ)` for conditional entropies.
pub fn alicki_fannes_bound(lambda: f64, dim_x: usize) -> Result<f64> {
    if !(0.0..=1.0).contains(&lambda) {
        return Err(Error::OutOfRange(format!("lambda = {lambda} not in [0, 1]")));
    }
    Ok(4.0 * lambda * (dim_x as f64).log2() + 2.0 * binary_entropy(lambda))
}

/// Entropic summary of a bipartite split.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EntropyReport {
    #[serde(rename = "S_A")]
    pub s_a: f64,
    #[serde(rename = "S_B")]
    pub s_b: f64,
    #[serde(rename = "S_AB")]
    pub s_ab: f64,
    #[serde(rename = "S_cond_A_given_B")]
    pub s_a_given_b: f64,
    #[serde(rename = "S_cond_B_given_A")]
    pub s_b_given_a: f64,
    #[serde(rename = "I_A_B")]
    pub i_ab: f64,
    pub layout: SubsystemLayout,
}

impl EntropyReport {
    pub fn new<S: AsRef<str>, T: AsRef<str>>(rho: &DensityMatrix, a: &[S], b: &[T]) -> Result<Self> {
        let ab = disjoint(a, b)?;
        let s_a = marginal_entropy(rho, a)?;
        let s_b = marginal_entropy(rho, b)?;
        let s_ab = marginal_entropy(rho, &ab)?;
        Ok(Self {
            s_a,
            s_b,
            s_ab,
            s_a_given_b: s_ab - s_b,
            s_b_given_a: s_ab - s_a,
            i_ab: s_a + s_b - s_ab,
            layout: rho.layout().clone(),
        })
    }

    /// Report for the first subsystem against all the others.
    pub fn first_vs_rest(rho: &DensityMatrix) -> Result<Self> {
        let labels = rho.layout().labels();
        if labels.len() < 2 {
            return Err(Error::InvalidLayout("an entropy report needs at least two subsystems".into()));
        }
        Self::new(rho, &labels[..1], &labels[1..])
    }

    pub fn table(&self) -> String {
        let rows = [
            ("S(A)", self.s_a),
            ("S(B)", self.s_b),
            ("S(AB)", self.s_ab),
            ("S(A|B)", self.s_a_given_b),
            ("S(B|A)", self.s_b_given_a),
            ("I(A:B)", self.i_ab),
        ];
        rows.iter().map(|(k, v)| format!("{k:<8} {v:>14.10}\n")).collect()
    }
}
