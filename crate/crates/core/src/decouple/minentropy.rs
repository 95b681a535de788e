use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::qmath::linalg::{c, eigvalsh, hermitize, identity, kron, real, CMatrix, ZERO};
use crate::qmath::{DensityMatrix, SubsystemLayout};

/// Largest joint dimension handed to the barrier solver.
pub const MIN_ENTROPY_DIM_CAP: usize = 256;
const GAP_TARGET: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq)]
pub struct MinEntropyResult {
    pub value: f64,
    /// Optimal conditioning operator normalised to unit trace.
    pub witness: DensityMatrix,
    /// `max(0, −λ_min(1 ⊗ σ − ρ))` at the returned optimum.
    pub residual: f64,
}

/// Orthonormal Hermitian basis of `d × d` matrices.
fn hermitian_basis(d: usize) -> Vec<CMatrix> {
    let mut out = Vec::with_capacity(d * d);
    let s = std::f64::consts::FRAC_1_SQRT_2;
    for j in 0..d {
        let mut m = CMatrix::zeros(d, d);
        m[(j, j)] = real(1.0);
        out.push(m);
    }
    for j in 0..d {
        for k in j + 1..d {
            let mut m = CMatrix::zeros(d, d);
            m[(j, k)] = real(s);
            m[(k, j)] = real(s);
            out.push(m);
            let mut m = CMatrix::zeros(d, d);
            m[(j, k)] = c(0.0, -s);
            m[(k, j)] = c(0.0, s);
            out.push(m);
        }
    }
    out
}

fn is_diagonal(m: &CMatrix) -> bool {
    for i in 0..m.nrows() {
        for j in 0..m.ncols() {
            if i != j && m[(i, j)].norm() > 1e-14 {
                return false;
            }
        }
    }
    true
}

/// `H_min(of | given)` at smoothing zero: `−log₂ min{Tr σ : 1 ⊗ σ ≥ ρ}`.
pub fn min_entropy<S: AsRef<str>, T: AsRef<str>>(rho: &DensityMatrix, of: &[S], given: &[T]) -> Result<MinEntropyResult> {
    let of_pos = rho.layout().positions(of)?;
    let given_pos = rho.layout().positions(given)?;
    if let Some(p) = of_pos.iter().find(|p| given_pos.contains(p)) {
        return Err(Error::OverlappingLabels(rho.layout().labels()[*p].clone()));
    }
    let mut order: Vec<&str> = of.iter().map(AsRef::as_ref).collect();
    order.extend(given.iter().map(AsRef::as_ref));
    let reduced = rho.partial_trace(&order)?.permute(&order)?;
    let da = rho.layout().dim_of_all(of)?;
    let de = rho.layout().dim_of_all(given)?;
    let given_layout = if given.is_empty() {
        SubsystemLayout::single("__trivial", 1)?
    } else {
        rho.layout().select(&given_pos)
    };
    if da * de > MIN_ENTROPY_DIM_CAP {
        return Err(Error::DimensionOverflow(da * de, MIN_ENTROPY_DIM_CAP));
    }
    let m = reduced.matrix();
    let (sigma, residual) = if is_diagonal(m) { classical_optimum(m, da, de) } else { barrier(m, da, de)? };
    let tr = sigma.trace().re;
    Ok(MinEntropyResult {
        value: -tr.log2(),
        witness: DensityMatrix::new_unchecked(given_layout, hermitize(&sigma.unscale(tr))),
        residual,
    })
}

/// For states diagonal in a product basis, `σ = diag_e max_a p(a, e)`.
fn classical_optimum(m: &CMatrix, da: usize, de: usize) -> (CMatrix, f64) {
    let mut sigma = CMatrix::zeros(de, de);
    for e in 0..de {
        let best = (0..da).map(|a| m[(a * de + e, a * de + e)].re).fold(0.0, f64::max);
        sigma[(e, e)] = real(best);
    }
    (sigma, 0.0)
}

fn residual(m: &CMatrix, sigma: &CMatrix, da: usize) -> f64 {
    let s = kron(&identity(da), sigma) - m;
    (-eigvalsh(&s).last().copied().unwrap_or(0.0)).max(0.0)
}

/// Inverse of a Hermitian positive definite matrix, or `None` when it is not.
fn pd_inverse(s: &CMatrix) -> Option<CMatrix> {
    let ch = hermitize(s).cholesky()?;
    Some(ch.inverse())
}

/// Log-barrier path following on `t·Tr σ − log det(1 ⊗ σ − ρ)`.
fn barrier(m: &CMatrix, da: usize, de: usize) -> Result<(CMatrix, f64)> {
    let basis = hermitian_basis(de);
    let lifted: Vec<CMatrix> = basis.iter().map(|b| kron(&identity(da), b)).collect();
    let nvar = basis.len();
    let dim = (da * de) as f64;
    let lmax = eigvalsh(m).first().copied().unwrap_or(1.0);
    let mut x = vec![0.0; nvar];
    x[..de].fill(lmax + 1.0);
    let build = |x: &[f64]| -> CMatrix {
        let mut s = CMatrix::zeros(de, de);
        for (xi, b) in x.iter().zip(&basis) {
            s += b.scale(*xi);
        }
        s
    };
    let trace_coeff: Vec<f64> = basis.iter().map(|b| b.trace().re).collect();
    let mut t = 1.0;
    let mut sigma = build(&x);
    for _outer in 0..200 {
        for _newton in 0..200 {
            let s = kron(&identity(da), &sigma) - m;
            let inv = pd_inverse(&s).ok_or_else(|| Error::NonConvergence("barrier iterate left the feasible set".into()))?;
            let mk: Vec<CMatrix> = lifted.iter().map(|l| &inv * l).collect();
            let grad: Vec<f64> = (0..nvar).map(|k| t * trace_coeff[k] - mk[k].trace().re).collect();
            let mut hess = DMatrix::<f64>::zeros(nvar, nvar);
            for k in 0..nvar {
                for l in k..nvar {
                    let mut acc = ZERO;
                    let (a, b) = (&mk[k], &mk[l]);
                    for i in 0..a.nrows() {
                        for j in 0..a.ncols() {
                            acc += a[(i, j)] * b[(j, i)];
                        }
                    }
                    hess[(k, l)] = acc.re;
                    hess[(l, k)] = acc.re;
                }
            }
            let g = nalgebra::DVector::from_vec(grad.clone());
            let step = match hess.clone().cholesky() {
                Some(ch) => ch.solve(&(-&g)),
                None => return Err(Error::NonConvergence("singular barrier Hessian".into())),
            };
            let decrement = -(g.dot(&step));
            if decrement * 0.5 < 1e-12 {
                break;
            }
            let f_at = |x: &[f64]| -> Option<f64> {
                let s = kron(&identity(da), &build(x)) - m;
                let ch = hermitize(&s).cholesky()?;
                let logdet: f64 = (0..s.nrows()).map(|i| 2.0 * ch.l_dirty()[(i, i)].re.ln()).sum();
                let tr: f64 = x.iter().zip(&trace_coeff).map(|(a, b)| a * b).sum();
                Some(t * tr - logdet)
            };
            let f0 = f_at(&x).ok_or_else(|| Error::NonConvergence("barrier lost feasibility".into()))?;
            let mut alpha = 1.0;
            loop {
                let cand: Vec<f64> = x.iter().zip(step.iter()).map(|(a, d)| a + alpha * d).collect();
                if let Some(fc) = f_at(&cand) {
                    if fc <= f0 - 0.25 * alpha * decrement {
                        x = cand;
                        break;
                    }
                }
                alpha *= 0.5;
                if alpha < 1e-16 {
                    break;
                }
            }
            sigma = build(&x);
            if alpha < 1e-16 {
                break;
            }
        }
        if dim / t < GAP_TARGET {
            let r = residual(m, &sigma, da);
            return Ok((sigma, r));
        }
        t *= 8.0;
    }
    Err(Error::NonConvergence("barrier method did not reach the duality gap target".into()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::entropy::conditional_entropy;
    use crate::qmath::{random_density, random_pure, PureState};

    #[test]
    fn product_state_gives_max_eigenvalue() {
        let ra = random_density(&SubsystemLayout::single("A", 2).unwrap(), 0, 1);
        let re = random_density(&SubsystemLayout::single("E", 3).unwrap(), 0, 2);
        let rho = ra.tensor(&re).unwrap();
        let r = min_entropy(&rho, &["A"], &["E"]).unwrap();
        let lmax = ra.spectrum()[0];
        assert!((r.value + lmax.log2()).abs() < 1e-7, "{} vs {}", r.value, -lmax.log2());
        assert!(r.residual <= 1e-7);
    }

    #[test]
    fn maximally_entangled_gives_minus_log_d() {
        for d in [2, 3] {
            let phi = PureState::maximally_entangled("A", "E", d).unwrap().density();
            let r = min_entropy(&phi, &["A"], &["E"]).unwrap();
            assert!((r.value + (d as f64).log2()).abs() < 1e-7);
        }
    }

    #[test]
    fn uniform_uncorrelated_gives_log_d() {
        let a = DensityMatrix::maximally_mixed(SubsystemLayout::single("A", 4).unwrap());
        let e = random_density(&SubsystemLayout::single("E", 2).unwrap(), 0, 3);
        let r = min_entropy(&a.tensor(&e).unwrap(), &["A"], &["E"]).unwrap();
        assert!((r.value - 2.0).abs() < 1e-7);
    }

    #[test]
    fn pure_states_match_schmidt_formula() {
        let l = SubsystemLayout::new(["A", "E"], [2, 3]).unwrap();
        for seed in 0..5 {
            let psi = random_pure(&l, seed);
            let rho_a = psi.marginal(&["A"]).unwrap();
            let s: f64 = rho_a.spectrum().iter().map(|v| v.max(0.0).sqrt()).sum();
            let r = min_entropy(&psi.density(), &["A"], &["E"]).unwrap();
            assert!((r.value + 2.0 * s.log2()).abs() < 1e-6, "seed {seed}: {} vs {}", r.value, -2.0 * s.log2());
        }
    }

    #[test]
    fn classical_states_match_guessing_probability() {
        let l = SubsystemLayout::new(["A", "E"], [3, 2]).unwrap();
        let p = [0.1, 0.2, 0.25, 0.05, 0.3, 0.1];
        let rho = DensityMatrix::diagonal(l, &p).unwrap();
        let guess = (0..2).map(|e| (0..3).map(|a| p[a * 2 + e]).fold(0.0, f64::max)).sum::<f64>();
        let fast = min_entropy(&rho, &["A"], &["E"]).unwrap();
        assert!((fast.value + guess.log2()).abs() < 1e-12);
        let (sigma, _) = barrier(rho.matrix(), 3, 2).unwrap();
        assert!((-sigma.trace().re.log2() - fast.value).abs() < 1e-7);
    }

    #[test]
    fn hierarchy_on_random_states() {
        let l = SubsystemLayout::new(["A", "E"], [2, 2]).unwrap();
        for seed in 0..10 {
            let rho = random_density(&l, 0, seed);
            let h = min_entropy(&rho, &["A"], &["E"]).unwrap();
            let s = conditional_entropy(&rho, &["A"], &["E"]).unwrap();
            assert!(h.value <= s + 1e-7 && s <= 1.0 + 1e-12);
            assert!(h.residual <= 1e-7);
        }
    }

    #[test]
    fn empty_conditioning_is_min_entropy_of_marginal() {
        let rho = random_density(&SubsystemLayout::single("A", 3).unwrap(), 0, 4);
        let r = min_entropy(&rho, &["A"], &[] as &[&str]).unwrap();
        assert!((r.value + rho.spectrum()[0].log2()).abs() < 1e-7);
    }

    #[test]
    fn overlapping_labels_rejected() {
        let rho = random_density(&SubsystemLayout::new(["A", "E"], [2, 2]).unwrap(), 0, 5);
        assert!(matches!(min_entropy(&rho, &["A"], &["A"]), Err(Error::OverlappingLabels(_))));
    }
}
