use serde::Serialize;

use crate::entropy::{shannon, EIG_CUTOFF};
use crate::error::{Error, Result};
use crate::qmath::linalg::{eigh, kron, real, CMatrix, CVector};
use crate::qmath::{DensityMatrix, PureState, UnitaryMatrix};

/// Largest `dⁿ` for which type classes are counted exactly.
const COUNT_CAP_BITS: f64 = 120.0;
/// Largest `dⁿ` for which the splitting unitary is built explicitly.
pub const EXPLICIT_DIM_CAP: usize = 1 << 10;
/// Absolute slack for the rank bounds, covering rounding in the residual mass.
const RANK_SLACK: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TypicalSplit {
    pub delta: f64,
    pub n: usize,
    pub entropy: f64,
    pub projector_rank: u128,
    pub info_dims: u128,
    pub purity_dims: u128,
    /// `1 − Tr ρ^{⊗n} Π`.
    pub residual_mass: f64,
}

impl TypicalSplit {
    /// `2^{n(S+δ)}`.
    pub fn upper_rank_bound(&self) -> f64 {
        (self.n as f64 * (self.entropy + self.delta)).exp2()
    }

    /// `(1 − ε)·2^{n(S−δ)}` with `ε` the residual mass.
    pub fn lower_rank_bound(&self) -> f64 {
        (1.0 - self.residual_mass) * (self.n as f64 * (self.entropy - self.delta)).exp2()
    }

    pub fn rank_bounds_hold(&self) -> bool {
        let r = self.projector_rank as f64;
        r <= self.upper_rank_bound() + RANK_SLACK && r >= self.lower_rank_bound() - RANK_SLACK
    }
}

fn clean_spectrum(rho: &DensityMatrix) -> Vec<f64> {
    rho.spectrum().into_iter().map(|v| if v < EIG_CUTOFF { 0.0 } else { v }).collect()
}

fn multinomial(n: usize, parts: &[usize]) -> u128 {
    let mut out: u128 = 1;
    let mut used = 0usize;
    for &k in parts {
        for j in 1..=k {
            used += 1;
            out = out * used as u128 / j as u128;
        }
    }
    debug_assert_eq!(used, n);
    out
}

fn compositions(n: usize, parts: usize, f: &mut impl FnMut(&[usize])) {
    fn rec(left: usize, slot: usize, cur: &mut Vec<usize>, f: &mut impl FnMut(&[usize])) {
        if slot + 1 == cur.len() {
            cur[slot] = left;
            f(cur);
            return;
        }
        for k in 0..=left {
            cur[slot] = k;
            rec(left - k, slot + 1, cur, f);
        }
    }
    let mut cur = vec![0; parts];
    rec(n, 0, &mut cur, f);
}

/// `log₂ λ_{iⁿ}` of a type class, or `None` when the class has probability zero.
fn type_log_prob(spectrum: &[f64], counts: &[usize]) -> Option<f64> {
    let mut acc = 0.0;
    for (&l, &k) in spectrum.iter().zip(counts) {
        if k > 0 {
            if l <= 0.0 {
                return None;
            }
            acc += k as f64 * l.log2();
        }
    }
    Some(acc)
}

fn is_typical(log_p: Option<f64>, n: usize, entropy: f64, delta: f64) -> bool {
    log_p.is_some_and(|lp| (-lp / n as f64 - entropy).abs() <= delta)
}

fn prime_factors(mut d: usize) -> Vec<(u128, u32)> {
    let mut out = Vec::new();
    let mut p = 2;
    while p * p <= d {
        let mut e = 0;
        while d.is_multiple_of(p) {
            d /= p;
            e += 1;
        }
        if e > 0 {
            out.push((p as u128, e));
        }
        p += 1;
    }
    if d > 1 {
        out.push((d as u128, 1));
    }
    out
}

/// Smallest divisor of `dⁿ` that is at least `at_least`.
fn smallest_divisor_above(d: usize, n: usize, at_least: u128) -> u128 {
    let mut divisors: Vec<u128> = vec![1];
    for (p, e) in prime_factors(d) {
        let mut next = Vec::with_capacity(divisors.len() * (e as usize * n + 1));
        for &q in &divisors {
            let mut v = q;
            for _ in 0..=e as usize * n {
                next.push(v);
                v *= p;
            }
        }
        divisors = next;
    }
    divisors.into_iter().filter(|&v| v >= at_least).min().unwrap_or(1)
}

/// Typical projector of `ρ^{⊗n}` by type-class counting.
pub fn typical_split(rho: &DensityMatrix, n: usize, delta: f64) -> Result<TypicalSplit> {
    if n == 0 {
        return Err(Error::OutOfRange("n must be positive".into()));
    }
    if delta.is_nan() || delta <= 0.0 {
        return Err(Error::OutOfRange(format!("delta = {delta} must be positive")));
    }
    let d = rho.dim();
    if n as f64 * (d as f64).log2() > COUNT_CAP_BITS {
        return Err(Error::OutOfRange(format!("{d}^{n} basis states exceed exact type-class counting")));
    }
    let spectrum = clean_spectrum(rho);
    let entropy = shannon(&spectrum);
    let mut rank: u128 = 0;
    let mut residual = 0.0;
    compositions(n, d, &mut |counts| {
        let lp = type_log_prob(&spectrum, counts);
        let count = multinomial(n, counts);
        if is_typical(lp, n, entropy, delta) {
            rank += count;
        } else if let Some(lp) = lp {
            residual += count as f64 * lp.exp2();
        }
    });
    let info_dims = smallest_divisor_above(d, n, rank);
    let total = (d as u128).pow(n as u32);
    Ok(TypicalSplit { delta, n, entropy, projector_rank: rank, info_dims, purity_dims: total / info_dims, residual_mass: residual })
}

/// Splitting unitary `U: Aⁿ → A_I A_P` sending the `j`-th typical eigenvector
/// to `|j⟩_{A_I}|0⟩_{A_P}`; atypical eigenvectors fill the remaining slots.
pub fn typical_unitary(rho: &DensityMatrix, n: usize, delta: f64) -> Result<(UnitaryMatrix, TypicalSplit)> {
    let split = typical_split(rho, n, delta)?;
    let d = rho.dim();
    let total = d.checked_pow(n as u32).filter(|&t| t <= EXPLICIT_DIM_CAP).ok_or(Error::DimensionOverflow(d.saturating_pow(n as u32), EXPLICIT_DIM_CAP))?;
    let eig = eigh(rho.matrix());
    let spectrum = clean_spectrum(rho);
    let mut w = CMatrix::identity(1, 1);
    for _ in 0..n {
        w = kron(&w, &eig.vectors);
    }
    let purity = split.purity_dims as usize;
    let mut typical_slots = (0..).map(|j| j * purity);
    let mut taken = vec![false; total];
    let mut target = vec![usize::MAX; total];
    for (idx, slot) in target.iter_mut().enumerate() {
        let mut counts = vec![0; d];
        let mut rest = idx;
        for _ in 0..n {
            counts[rest % d] += 1;
            rest /= d;
        }
        if is_typical(type_log_prob(&spectrum, &counts), n, split.entropy, delta) {
            let s = typical_slots.next().unwrap_or(usize::MAX);
            *slot = s;
            taken[s] = true;
        }
    }
    let mut free = (0..total).filter(|&s| !taken[s]);
    for slot in target.iter_mut().filter(|s| **s == usize::MAX) {
        *slot = free.next().ok_or_else(|| Error::InvalidState("typical slot assignment failed".into()))?;
    }
    let mut perm = CMatrix::zeros(total, total);
    for (idx, &t) in target.iter().enumerate() {
        perm[(t, idx)] = real(1.0);
    }
    Ok((UnitaryMatrix::new(perm * w.adjoint())?, split))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PreprocessReport {
    pub distance: f64,
    pub epsilon: f64,
    pub bound: f64,
    pub info_a: u128,
    pub info_b: u128,
}

/// Trace distance between `(U ⊗ V) ψ^{⊗n}` and its normalised projection onto
/// `A_I B_I Eⁿ ⊗ |0⟩_{A_P}|0⟩_{B_P}`, with the bound `2ε + 4√ε`.
pub fn preprocess_check(psi: &PureState, n: usize, delta: f64) -> Result<PreprocessReport> {
    let [da, db, de] = super::tripartite_dims(psi)?;
    let labels = psi.layout().labels();
    let rho_a = psi.marginal(&[labels[0].as_str()])?;
    let rho_b = psi.marginal(&[labels[1].as_str()])?;
    let (ua, sa) = typical_unitary(&rho_a, n, delta)?;
    let (ub, sb) = typical_unitary(&rho_b, n, delta)?;
    let (dan, dbn, den) = (da.pow(n as u32), db.pow(n as u32), de.pow(n as u32));
    super::check_total(dan * dbn * den)?;
    let v = super::tensor_power_grouped(psi.amplitudes(), &[da, db, de], n);
    let mut t = CMatrix::from_fn(dan, dbn * den, |a, r| v[a * dbn * den + r]);
    t = ua.matrix() * t;
    let mut rotated = CVector::zeros(v.len());
    for a in 0..dan {
        let block = CMatrix::from_fn(dbn, den, |b, e| t[(a, b * den + e)]);
        let block = ub.matrix() * block;
        for b in 0..dbn {
            for e in 0..den {
                rotated[(a * dbn + b) * den + e] = block[(b, e)];
            }
        }
    }
    let (pa, pb) = (sa.purity_dims as usize, sb.purity_dims as usize);
    let (ra, rb) = (sa.projector_rank as usize, sb.projector_rank as usize);
    let keep = |a: usize, b: usize| a.is_multiple_of(pa) && a / pa < ra && b.is_multiple_of(pb) && b / pb < rb;
    let mut omega = CVector::zeros(v.len());
    for a in 0..dan {
        for b in 0..dbn {
            if keep(a, b) {
                for e in 0..den {
                    let i = (a * dbn + b) * den + e;
                    omega[i] = rotated[i];
                }
            }
        }
    }
    let norm = omega.norm();
    let overlap = if norm > 0.0 { rotated.dotc(&omega).norm() / norm } else { 0.0 };
    let distance = 2.0 * (1.0 - overlap * overlap).max(0.0).sqrt();
    let epsilon = sa.residual_mass.max(sb.residual_mass);
    Ok(PreprocessReport { distance, epsilon, bound: 2.0 * epsilon + 4.0 * epsilon.sqrt(), info_a: sa.info_dims, info_b: sb.info_dims })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qmath::linalg::unitarity_defect;
    use crate::qmath::{random_pure, SubsystemLayout};

    fn qubit(p: f64) -> DensityMatrix {
        DensityMatrix::diagonal(SubsystemLayout::single("A", 2).unwrap(), &[p, 1.0 - p]).unwrap()
    }

    fn binomial_residual(p: f64, n: usize, delta: f64) -> f64 {
        let h = -p * p.log2() - (1.0 - p) * (1.0 - p).log2();
        let mut acc = 0.0;
        let mut coeff = 1.0f64;
        for k in 0..=n {
            if k > 0 {
                coeff = coeff * (n - k + 1) as f64 / k as f64;
            }
            let lp = (n - k) as f64 * p.log2() + k as f64 * (1.0 - p).log2();
            if (-lp / n as f64 - h).abs() > delta {
                acc += coeff * lp.exp2();
            }
        }
        acc
    }

    #[test]
    fn pure_state_is_all_purity() {
        let s = typical_split(&qubit(1.0), 7, 0.1).unwrap();
        assert_eq!(s.projector_rank, 1);
        assert_eq!(s.residual_mass, 0.0);
        assert_eq!((s.info_dims, s.purity_dims), (1, 128));
    }

    #[test]
    fn flat_spectrum_is_all_information() {
        for n in [1, 5, 12] {
            let s = typical_split(&qubit(0.5), n, 0.01).unwrap();
            assert_eq!(s.projector_rank, 1u128 << n);
            assert_eq!(s.residual_mass, 0.0);
            assert_eq!(s.purity_dims, 1);
        }
    }

    #[test]
    fn binomial_tail_matches() {
        let s = typical_split(&qubit(0.9), 20, 0.15).unwrap();
        assert!((s.residual_mass - binomial_residual(0.9, 20, 0.15)).abs() < 1e-12);
        assert!(s.rank_bounds_hold());
        assert!(s.info_dims >= s.projector_rank && s.info_dims * s.purity_dims == 1 << 20);
    }

    #[test]
    fn qutrit_divisor_split() {
        let rho = DensityMatrix::diagonal(SubsystemLayout::single("A", 3).unwrap(), &[0.7, 0.2, 0.1]).unwrap();
        let s = typical_split(&rho, 6, 0.2).unwrap();
        assert!(s.rank_bounds_hold());
        assert_eq!(s.info_dims * s.purity_dims, 729);
        assert!(s.info_dims >= s.projector_rank);
        assert!(smallest_divisor_above(3, 6, s.projector_rank) == s.info_dims);
        assert_eq!(smallest_divisor_above(6, 2, 5), 6);
        assert_eq!(smallest_divisor_above(6, 2, 7), 9);
    }

    #[test]
    fn explicit_unitary_maps_typical_vectors() {
        let rho = crate::qmath::random_density(&SubsystemLayout::single("A", 2).unwrap(), 0, 11);
        let (u, s) = typical_unitary(&rho, 4, 0.3).unwrap();
        assert!(unitarity_defect(u.matrix()) < 1e-10);
        let mut power = CMatrix::identity(1, 1);
        for _ in 0..4 {
            power = kron(&power, rho.matrix());
        }
        let rotated = u.matrix() * power * u.matrix().adjoint();
        let p = s.purity_dims as usize;
        let kept: f64 = (0..16).filter(|i| i % p == 0 && i / p < s.projector_rank as usize).map(|i| rotated[(i, i)].re).sum();
        assert!((kept - (1.0 - s.residual_mass)).abs() < 1e-10);
    }

    #[test]
    fn preprocess_bound_holds() {
        let l = SubsystemLayout::new(["A", "B", "E"], [2, 2, 2]).unwrap();
        for seed in 0..4 {
            let psi = random_pure(&l, seed);
            for n in [2, 3, 4] {
                let r = preprocess_check(&psi, n, 0.4).unwrap();
                assert!(r.distance <= r.bound + 1e-9, "seed {seed} n {n}: {r:?}");
            }
        }
    }
}
