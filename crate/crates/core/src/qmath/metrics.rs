use super::linalg::{eigvalsh, psd_sqrt, trace_norm_hermitian, CMatrix};
use super::state::{DensityMatrix, PureState, UnitaryMatrix};
use crate::error::{Error, Result};

fn same_layout(rho: &DensityMatrix, sigma: &DensityMatrix) -> Result<()> {
    if rho.layout() != sigma.layout() {
        return Err(Error::DimensionMismatch(format!(
            "layouts differ: {:?}{:?} vs {:?}{:?}",
            rho.layout().labels(),
            rho.layout().dims(),
            sigma.layout().labels(),
            sigma.layout().dims()
        )));
    }
    Ok(())
}

/// `½‖ρ − σ‖₁`.
pub fn trace_distance(rho: &DensityMatrix, sigma: &DensityMatrix) -> Result<f64> {
    Ok(0.5 * trace_norm_distance(rho, sigma)?)
}

/// `‖ρ − σ‖₁`, in `[0, 2]`.
pub fn trace_norm_distance(rho: &DensityMatrix, sigma: &DensityMatrix) -> Result<f64> {
    same_layout(rho, sigma)?;
    Ok(trace_norm_hermitian(&(rho.matrix() - sigma.matrix())).min(2.0))
}

/// `F(ρ, σ) = Tr √(√ρ σ √ρ)`.
pub fn fidelity(rho: &DensityMatrix, sigma: &DensityMatrix) -> Result<f64> {
    same_layout(rho, sigma)?;
    let s = psd_sqrt(rho.matrix());
    let inner = &s * sigma.matrix() * &s;
    let f: f64 = eigvalsh(&inner).into_iter().map(|v| v.max(0.0).sqrt()).sum();
    Ok(f.clamp(0.0, 1.0))
}

/// Coefficients `M[r, b]` of a pure state with `b` enumerating `act_on` (given
/// order) and `r` the rest (layout order).
fn split_coefficients(psi: &PureState, act_on: &[usize]) -> CMatrix {
    let layout = psi.layout();
    let rest = layout.complement(act_on);
    let ro = layout.offsets(&rest);
    let bo = layout.offsets(act_on);
    CMatrix::from_fn(ro.len(), bo.len(), |r, b| psi.amplitudes()[ro[r] + bo[b]])
}

/// Unitary `U` on `act_on` maximising `|⟨φ|(1 ⊗ U)|ψ⟩|`.
///
/// The maximum equals the fidelity of the two states' marginals on the
/// complement of `act_on`.
pub fn uhlmann_unitary<S: AsRef<str>>(phi: &PureState, psi: &PureState, act_on: &[S]) -> Result<UnitaryMatrix> {
    if phi.layout() != psi.layout() {
        return Err(Error::DimensionMismatch("purifications have different layouts".into()));
    }
    let pos = phi.layout().positions(act_on)?;
    let a = split_coefficients(phi, &pos);
    let b = split_coefficients(psi, &pos);
    // <phi|(1⊗U)|psi> = Tr(U m) with m = bᵀ conj(a)
    let m = b.transpose() * a.map(|z| z.conj());
    let svd = m.svd(true, true);
    let (w, v_t) = (svd.u.expect("left singular vectors"), svd.v_t.expect("right singular vectors"));
    Ok(UnitaryMatrix::new_unchecked(v_t.adjoint() * w.adjoint()))
}

/// `|⟨φ|(1 ⊗ U)|ψ⟩|` for `U` acting on `act_on`.
pub fn overlap_with<S: AsRef<str>>(phi: &PureState, psi: &PureState, act_on: &[S], u: &UnitaryMatrix) -> Result<f64> {
    let moved = psi.apply_unitary(act_on, u)?;
    Ok(phi.inner(&moved)?.norm())
}
