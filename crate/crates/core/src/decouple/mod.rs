//! One-shot decoupling: conditional min-entropy, the Haar-average decoupling
//! bound, Monte-Carlo key extraction and typical-subspace splitting.

mod minentropy;
mod typical;

pub use minentropy::{min_entropy, MinEntropyResult, MIN_ENTROPY_DIM_CAP};
pub use typical::{preprocess_check, typical_split, typical_unitary, PreprocessReport, TypicalSplit};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ibit::robust_error_fprime_capped;
use crate::qmath::linalg::{trace_norm_hermitian, CMatrix, CVector};
use crate::qmath::{haar_unitary, DensityMatrix, PureState, SubsystemLayout};

/// Largest joint dimension simulated exactly.
pub const TOTAL_DIM_CAP: usize = 1 << 14;

pub(crate) fn check_total(dim: usize) -> Result<()> {
    if dim > TOTAL_DIM_CAP {
        Err(Error::DimensionOverflow(dim, TOTAL_DIM_CAP))
    } else {
        Ok(())
    }
}

/// Dimensions of a state laid out as exactly three subsystems (Alice, Bob, Eve).
pub(crate) fn tripartite_dims(psi: &PureState) -> Result<[usize; 3]> {
    match psi.layout().dims() {
        &[a, b, e] => Ok([a, b, e]),
        _ => Err(Error::InvalidLayout(format!(
            "expected three subsystems (Alice, Bob, Eve), got {}",
            psi.layout().len()
        ))),
    }
}

/// `ψ^{⊗n}` with its amplitudes reordered party by party: `(P₀ⁿ, P₁ⁿ, …)`.
pub(crate) fn tensor_power_grouped(amps: &CVector, dims: &[usize], n: usize) -> CVector {
    let block: usize = dims.iter().product();
    let total = block.pow(n as u32);
    let party_dims: Vec<usize> = dims.iter().map(|d| d.pow(n as u32)).collect();
    let mut party_strides = vec![1usize; dims.len()];
    for p in (0..dims.len().saturating_sub(1)).rev() {
        party_strides[p] = party_strides[p + 1] * party_dims[p + 1];
    }
    let mut out = CVector::zeros(total);
    let mut digits = vec![0usize; dims.len()];
    for idx in 0..total {
        let mut amp = crate::qmath::linalg::real(1.0);
        let mut combined = vec![0usize; dims.len()];
        let mut rest = idx;
        let mut copy_stride = total / block;
        for _ in 0..n {
            let local = rest / copy_stride;
            rest %= copy_stride;
            copy_stride = (copy_stride / block).max(1);
            amp *= amps[local];
            let mut l = local;
            for p in (0..dims.len()).rev() {
                digits[p] = l % dims[p];
                l /= dims[p];
            }
            for p in 0..dims.len() {
                combined[p] = combined[p] * dims[p] + digits[p];
            }
        }
        let target: usize = combined.iter().zip(&party_strides).map(|(c, s)| c * s).sum();
        out[target] = amp;
    }
    out
}

/// SplitMix64 finaliser applied to `seed ⊕ index`, used for per-trial seeds.
pub fn trial_seed(seed: u64, index: u64) -> u64 {
    let mut z = seed ^ index.wrapping_add(1).wrapping_mul(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Key value of basis index `x` when `d` outcomes are binned into `k` keys.
fn bin(x: usize, d: usize, k: usize) -> usize {
    x * k / d
}

fn bin_weights(d: usize, k: usize) -> Vec<f64> {
    let mut w = vec![0.0; k];
    for x in 0..d {
        w[bin(x, d, k)] += 1.0 / d as f64;
    }
    w
}

fn key_dim(bits: u32, available: usize) -> Result<usize> {
    let k = 1usize.checked_shl(bits).filter(|&k| k <= available);
    k.ok_or_else(|| Error::OutOfRange(format!("{bits} key bits exceed a register of dimension {available}")))
}

/// `Σ_k ‖ρ_k − w_k ρ‖₁` for a classical-quantum state with blocks `ρ_k`.
fn cq_distance(blocks: &[CMatrix], weights: &[f64], marginal: &CMatrix) -> f64 {
    blocks.iter().zip(weights).map(|(b, w)| trace_norm_hermitian(&(b - marginal.scale(*w)))).sum()
}

fn marginal_of(blocks: &[CMatrix]) -> CMatrix {
    let mut out = CMatrix::zeros(blocks[0].nrows(), blocks[0].ncols());
    for b in blocks {
        out += b;
    }
    out
}

/// Choi state `τ_RK` of "measure the binned register of dimension `d` into `k` keys".
pub fn key_map_choi(d: usize, k: usize) -> Result<DensityMatrix> {
    if k == 0 || k > d {
        return Err(Error::OutOfRange(format!("key dimension {k} not in 1..={d}")));
    }
    let layout = SubsystemLayout::new(["R", "K"], [d, k])?;
    let mut probs = vec![0.0; d * k];
    for x in 0..d {
        probs[x * k + bin(x, d, k)] = 1.0 / d as f64;
    }
    DensityMatrix::diagonal(layout, &probs)
}

/// `2^{−½[H_min(A|E)_ρ + H_min(R|B)_τ]}`.
pub fn dupuis_bound<S: AsRef<str>>(rho: &DensityMatrix, a: &[S], e: &[S], tau: &DensityMatrix, r: &[S], b: &[S]) -> Result<f64> {
    let h_ae = min_entropy(rho, a, e)?.value;
    let h_rb = min_entropy(tau, r, b)?.value;
    Ok((-0.5 * (h_ae + h_rb)).exp2())
}

struct Prepared {
    /// Rows: Alice's `Aⁿ`; columns: `(Bⁿ, Eⁿ)`.
    coeffs: CMatrix,
    db: usize,
    de: usize,
    rho_b: CMatrix,
    rho_e: CMatrix,
}

impl Prepared {
    fn new(psi: &PureState, n: usize) -> Result<Self> {
        let [da, db, de] = tripartite_dims(psi)?;
        if n == 0 {
            return Err(Error::OutOfRange("n must be positive".into()));
        }
        let pow = |d: usize| d.checked_pow(n as u32).ok_or(Error::DimensionOverflow(usize::MAX, TOTAL_DIM_CAP));
        let (dan, dbn, den) = (pow(da)?, pow(db)?, pow(de)?);
        check_total(dan.saturating_mul(dbn).saturating_mul(den))?;
        let v = tensor_power_grouped(psi.amplitudes(), &[da, db, de], n);
        let coeffs = CMatrix::from_fn(dan, dbn * den, |a, r| v[a * dbn * den + r]);
        let blocks = split_blocks(&coeffs, 1, dbn, den);
        Ok(Self { rho_b: blocks.0[0].clone(), rho_e: blocks.1[0].clone(), coeffs, db: dbn, de: den })
    }

    fn trial(&self, key: usize, seed: u64) -> Result<(f64, f64)> {
        let da = self.coeffs.nrows();
        if key == 1 {
            return Ok((0.0, 0.0));
        }
        let u = haar_unitary(da, seed)?;
        let rotated = u.matrix() * &self.coeffs;
        let (bb, be) = split_blocks(&rotated, key, self.db, self.de);
        let w = bin_weights(da, key);
        Ok((cq_distance(&bb, &w, &self.rho_b), cq_distance(&be, &w, &self.rho_e)))
    }
}

/// Conditional Bob and Eve blocks after binning Alice's rows into `key` outcomes.
fn split_blocks(coeffs: &CMatrix, key: usize, db: usize, de: usize) -> (Vec<CMatrix>, Vec<CMatrix>) {
    let da = coeffs.nrows();
    let mut bb = vec![CMatrix::zeros(db, db); key];
    let mut be = vec![CMatrix::zeros(de, de); key];
    for x in 0..da {
        let k = bin(x, da, key);
        let v = CMatrix::from_fn(db, de, |b, e| coeffs[(x, b * de + e)]);
        bb[k] += &v * v.adjoint();
        let vt = v.transpose();
        be[k] += &vt * vt.adjoint();
    }
    (bb, be)
}

/// One Haar draw on `Aⁿ`: trace norms of the key-Bob and key-Eve states from
/// `τ_K ⊗ ψ_B^{⊗n}` and `τ_K ⊗ ψ_E^{⊗n}`.
pub fn decoupling_trial(psi: &PureState, n: usize, key_bits: u32, seed: u64) -> Result<(f64, f64)> {
    let prep = Prepared::new(psi, n)?;
    let key = key_dim(key_bits, prep.coeffs.nrows())?;
    prep.trial(key, seed)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrialResult {
    pub dist_b: f64,
    pub dist_e: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DecouplingExperiment {
    pub psi: PureState,
    pub n: usize,
    pub key_bits: u32,
    pub trials: usize,
    pub seed: u64,
    /// Indexed by trial number.
    pub results: Vec<TrialResult>,
    /// Eve-side bound `2^{−½[H_min(Aⁿ|Eⁿ) + H_min(R|K)]}`.
    pub bound: f64,
    /// Bob-side counterpart of `bound`.
    pub bound_b: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecouplingReport {
    pub n: usize,
    pub key_bits: u32,
    pub trials: usize,
    pub seed: u64,
    pub per_trial: Vec<TrialResult>,
    pub mean: TrialResult,
    pub stderr: TrialResult,
    pub bound: f64,
    pub bound_b: f64,
    pub existence_fraction: f64,
}

fn mean_and_stderr(xs: impl Iterator<Item = f64> + Clone) -> (f64, f64) {
    let n = xs.clone().count();
    if n == 0 {
        return (0.0, 0.0);
    }
    let mean = xs.clone().sum::<f64>() / n as f64;
    if n == 1 {
        return (mean, 0.0);
    }
    let var = xs.map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    (mean, (var / n as f64).sqrt())
}

impl DecouplingExperiment {
    pub fn mean(&self) -> TrialResult {
        TrialResult {
            dist_b: mean_and_stderr(self.results.iter().map(|r| r.dist_b)).0,
            dist_e: mean_and_stderr(self.results.iter().map(|r| r.dist_e)).0,
        }
    }

    pub fn stderr(&self) -> TrialResult {
        TrialResult {
            dist_b: mean_and_stderr(self.results.iter().map(|r| r.dist_b)).1,
            dist_e: mean_and_stderr(self.results.iter().map(|r| r.dist_e)).1,
        }
    }

    /// Fraction of draws with both distances at most twice their bounds.
    pub fn existence_fraction(&self) -> f64 {
        if self.results.is_empty() {
            return 0.0;
        }
        let good = self.results.iter().filter(|r| r.dist_b <= 2.0 * self.bound_b && r.dist_e <= 2.0 * self.bound).count();
        good as f64 / self.results.len() as f64
    }

    pub fn report(&self) -> DecouplingReport {
        DecouplingReport {
            n: self.n,
            key_bits: self.key_bits,
            trials: self.trials,
            seed: self.seed,
            per_trial: self.results.clone(),
            mean: self.mean(),
            stderr: self.stderr(),
            bound: self.bound,
            bound_b: self.bound_b,
            existence_fraction: self.existence_fraction(),
        }
    }
}

/// Single-copy min-entropies scaled by `n`; the min-entropy is additive on tensor powers.
fn decoupling_bounds(psi: &PureState, n: usize, dan: usize, key: usize) -> Result<(f64, f64)> {
    let labels = psi.layout().labels();
    let (a, b, e) = (labels[0].as_str(), labels[1].as_str(), labels[2].as_str());
    let h_rk = (dan as f64 / key as f64).log2();
    let h_ae = min_entropy(&psi.marginal(&[a, e])?, &[a], &[e])?.value;
    let h_ab = min_entropy(&psi.marginal(&[a, b])?, &[a], &[b])?.value;
    let f = |h: f64| (-0.5 * (n as f64 * h + h_rk)).exp2();
    Ok((f(h_ab), f(h_ae)))
}

/// Runs `trials` independent Haar draws; trial `i` uses seed `trial_seed(seed, i)`.
pub fn simultaneous_decoupling(psi: &PureState, n: usize, key_bits: u32, trials: usize, seed: u64) -> Result<DecouplingExperiment> {
    let prep = Prepared::new(psi, n)?;
    let dan = prep.coeffs.nrows();
    let key = key_dim(key_bits, dan)?;
    let (bound_b, bound) = decoupling_bounds(psi, n, dan, key)?;
    let results = (0..trials)
        .into_par_iter()
        .map(|i| prep.trial(key, trial_seed(seed, i as u64)).map(|(dist_b, dist_e)| TrialResult { dist_b, dist_e }))
        .collect::<Result<Vec<_>>>()?;
    Ok(DecouplingExperiment { psi: psi.clone(), n, key_bits, trials, seed, results, bound, bound_b })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ComposedTrial {
    /// `‖ρ_{K_A K_B E^{n+m}} − τ ⊗ τ ⊗ ψ_E^{⊗(n+m)}‖₁`.
    pub joint: f64,
    pub alice_b: f64,
    pub alice_e: f64,
    /// Bob's key against the untouched `A^m`.
    pub bob_a: f64,
    /// Bob's key against `Aⁿ E^{n+m}`, all of Alice's first block handed to Eve.
    pub bob_e: f64,
    pub epsilon: f64,
    /// `min(2, f′(ε))`.
    pub bound: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ComposedReport {
    pub n: usize,
    pub m: usize,
    pub key_bits: (u32, u32),
    pub seed: u64,
    pub per_trial: Vec<ComposedTrial>,
    pub mean_joint: f64,
    pub min_joint: f64,
}

struct ComposedSetup {
    alice: Prepared,
    v: CVector,
    dims: [usize; 4],
    keys: (usize, usize),
}

impl ComposedSetup {
    /// Amplitudes over `(Aⁿ, A^m, B^{n+m}, E^{n+m})`.
    fn trial(&self, seed: u64) -> Result<ComposedTrial> {
        let [dan, dam, db, de] = self.dims;
        let (ka, kb) = self.keys;
        let (alice_b, alice_e) = self.alice.trial(ka, seed)?;
        let ua = haar_unitary(dan, seed)?;
        let ub = haar_unitary(db, trial_seed(seed, 1))?;
        let rest = dam * db * de;
        let t = ua.matrix() * CMatrix::from_fn(dan, rest, |x, r| self.v[x * rest + r]);
        let mut amp = CVector::zeros(self.v.len());
        for x in 0..dan {
            for y in 0..dam {
                let row = x * rest + y * db * de;
                let block = ub.matrix() * CMatrix::from_fn(db, de, |b, e| t[(x, y * db * de + b * de + e)]);
                for b in 0..db {
                    for e in 0..de {
                        amp[row + b * de + e] = block[(b, e)];
                    }
                }
            }
        }
        let at = |x: usize, y: usize, b: usize, e: usize| amp[((x * dam + y) * db + b) * de + e];
        let mut joint = vec![CMatrix::zeros(de, de); ka * kb];
        let mut bob_ae = vec![CMatrix::zeros(dan * de, dan * de); kb];
        let mut bob_a = vec![CMatrix::zeros(dam, dam); kb];
        for b in 0..db {
            let kb_i = bin(b, db, kb);
            for y in 0..dam {
                let v = CVector::from_fn(dan * de, |i, _| at(i / de, y, b, i % de));
                bob_ae[kb_i] += &v * v.adjoint();
                for x in 0..dan {
                    let ve = v.rows(x * de, de).into_owned();
                    joint[bin(x, dan, ka) * kb + kb_i] += &ve * ve.adjoint();
                }
            }
            for x in 0..dan {
                for e in 0..de {
                    let v = CVector::from_fn(dam, |y, _| at(x, y, b, e));
                    bob_a[kb_i] += &v * v.adjoint();
                }
            }
        }
        let wa = bin_weights(dan, ka);
        let wb = bin_weights(db, kb);
        let wj: Vec<f64> = wa.iter().flat_map(|a| wb.iter().map(move |b| a * b)).collect();
        let joint = cq_distance(&joint, &wj, &marginal_of(&joint));
        let bob_e = cq_distance(&bob_ae, &wb, &marginal_of(&bob_ae));
        let bob_a = cq_distance(&bob_a, &wb, &marginal_of(&bob_a));
        let epsilon = alice_b.max(alice_e).max(bob_a).max(bob_e);
        let bound = robust_error_fprime_capped(epsilon.min(1.0))?;
        Ok(ComposedTrial { joint, alice_b, alice_e, bob_a, bob_e, epsilon, bound })
    }
}

/// Alice extracts `key_bits_a` from her first `n` copies, then Bob extracts
/// `key_bits_b` from all `n + m` of his systems.
pub fn vqsm_compose(
    psi: &PureState,
    n: usize,
    m: usize,
    key_bits_a: u32,
    key_bits_b: u32,
    trials: usize,
    seed: u64,
) -> Result<ComposedReport> {
    let [da, db, de] = tripartite_dims(psi)?;
    let total_copies = n + m;
    let pow = |d: usize, k: usize| d.checked_pow(k as u32).ok_or(Error::DimensionOverflow(usize::MAX, TOTAL_DIM_CAP));
    let (dan, dam, dbt, det) = (pow(da, n)?, pow(da, m)?, pow(db, total_copies)?, pow(de, total_copies)?);
    let total = dan.saturating_mul(dam).saturating_mul(dbt).saturating_mul(det);
    check_total(total)?;
    let alice = Prepared::new(psi, n)?;
    let keys = (key_dim(key_bits_a, dan)?, key_dim(key_bits_b, dbt)?);
    let setup = ComposedSetup { alice, v: tensor_power_grouped(psi.amplitudes(), &[da, db, de], total_copies), dims: [dan, dam, dbt, det], keys };
    let per_trial = (0..trials).into_par_iter().map(|i| setup.trial(trial_seed(seed, i as u64))).collect::<Result<Vec<_>>>()?;
    let (mean_joint, _) = mean_and_stderr(per_trial.iter().map(|t| t.joint));
    let min_joint = per_trial.iter().map(|t| t.joint).fold(f64::INFINITY, f64::min);
    Ok(ComposedReport { n, m, key_bits: (key_bits_a, key_bits_b), seed, per_trial, mean_joint, min_joint })
}
