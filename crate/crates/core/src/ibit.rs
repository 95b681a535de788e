//! Ibit states: key registers twisted against a shield.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::io::{matrix_from_json, matrix_to_json, JsonMatrix};
use crate::qmath::linalg::{identity, unitarity_defect, CMatrix, CVector, ZERO};
use crate::qmath::{trace_distance, uhlmann_unitary, DensityMatrix, PureState, SubsystemLayout, UnitaryMatrix};

pub const KEY_A: &str = "KA";
pub const KEY_B: &str = "KB";
pub const VERIFY_TOL: f64 = 1e-8;

/// `α = (1/ab) Σ |ik⟩⟨jl| ⊗ U_ik σ U_jl†` with `U` indexed by `i·b + k`.
#[derive(Debug, Clone, PartialEq)]
pub struct AlphaState {
    pub key_dims: (usize, usize),
    pub twisting: Vec<UnitaryMatrix>,
    pub shield: DensityMatrix,
}

impl AlphaState {
    pub fn new(key_dims: (usize, usize), twisting: Vec<UnitaryMatrix>, shield: DensityMatrix) -> Result<Self> {
        let (a, b) = key_dims;
        if a == 0 || b == 0 {
            return Err(Error::OutOfRange("key dimensions must be positive".into()));
        }
        if twisting.len() != a * b {
            return Err(Error::DimensionMismatch(format!("{} twisting unitaries for {a}x{b} keys", twisting.len())));
        }
        if let Some(u) = twisting.iter().find(|u| u.dim() != shield.dim()) {
            return Err(Error::DimensionMismatch(format!("twisting of dim {} on a shield of dim {}", u.dim(), shield.dim())));
        }
        for l in [KEY_A, KEY_B] {
            if shield.layout().contains(l) {
                return Err(Error::InvalidLayout(format!("shield may not use the key label `{l}`")));
            }
        }
        Ok(Self { key_dims, twisting, shield })
    }

    /// Every key value twisted by the identity.
    pub fn untwisted(key_dims: (usize, usize), shield: DensityMatrix) -> Result<Self> {
        let d = shield.dim();
        Self::new(key_dims, vec![UnitaryMatrix::identity(d); key_dims.0 * key_dims.1], shield)
    }

    pub fn layout(&self) -> Result<SubsystemLayout> {
        SubsystemLayout::new([KEY_A, KEY_B], [self.key_dims.0, self.key_dims.1])?.concat(self.shield.layout())
    }
}

pub fn build_alpha(spec: &AlphaState) -> Result<DensityMatrix> {
    let k = spec.key_dims.0 * spec.key_dims.1;
    let d = spec.shield.dim();
    let sigma = spec.shield.matrix();
    let mut m = CMatrix::zeros(k * d, k * d);
    for x in 0..k {
        let left = spec.twisting[x].matrix() * sigma;
        for y in 0..k {
            let block = &left * spec.twisting[y].matrix().adjoint();
            m.view_mut((x * d, y * d), (d, d)).copy_from(&block.unscale(k as f64));
        }
    }
    Ok(DensityMatrix::new_unchecked(spec.layout()?, m))
}

#[derive(Debug, Clone, PartialEq)]
pub struct IbitVerification {
    pub ok: bool,
    pub max_deviation: f64,
    /// Recovered twisting indexed by joint key value, with the first entry the identity.
    pub twisting: Option<Vec<UnitaryMatrix>>,
    pub shield: Option<DensityMatrix>,
}

/// Blocks `φ_x` of a pure state: `|ψ⟩ = Σ_x |x⟩_K |φ_x⟩`, with the rest kept in layout order.
fn key_blocks(psi: &PureState, key_pos: &[usize]) -> (Vec<CVector>, SubsystemLayout) {
    let layout = psi.layout();
    let rest = layout.complement(key_pos);
    let ko = layout.offsets(key_pos);
    let ro = layout.offsets(&rest);
    let blocks = ko.iter().map(|&k| CVector::from_iterator(ro.len(), ro.iter().map(|&r| psi.amplitudes()[k + r]))).collect();
    (blocks, layout.select(&rest))
}

/// Checks whether `ρ` on `key ∪ shield` is an ibit with the given key registers.
pub fn verify_ibit<S: AsRef<str>>(rho: &DensityMatrix, key_labels: &[S], shield_labels: &[S]) -> Result<IbitVerification> {
    verify_ibit_tol(rho, key_labels, shield_labels, VERIFY_TOL)
}

pub fn verify_ibit_tol<S: AsRef<str>>(rho: &DensityMatrix, key_labels: &[S], shield_labels: &[S], tol: f64) -> Result<IbitVerification> {
    let layout = rho.layout();
    if key_labels.is_empty() || key_labels.len() > 2 {
        return Err(Error::InvalidLayout("one or two key registers expected".into()));
    }
    let key_pos = layout.positions(key_labels)?;
    let shield_pos = layout.positions(shield_labels)?;
    if key_pos.iter().any(|p| shield_pos.contains(p)) {
        return Err(Error::OverlappingLabels("key and shield share a subsystem".into()));
    }
    if key_pos.len() + shield_pos.len() != layout.len() {
        return Err(Error::InvalidLayout("key and shield must cover the state".into()));
    }
    let env = "__env";
    let psi = rho.purify(env)?;
    let (blocks, rest_layout) = key_blocks(&psi, &key_pos);
    let k = blocks.len();
    let mut dev = blocks.iter().map(|b| (b.norm_squared() - 1.0 / k as f64).abs()).fold(0.0, f64::max);
    if blocks[0].norm() < 1e-9 {
        return Ok(IbitVerification { ok: false, max_deviation: dev.max(1.0 / k as f64), twisting: None, shield: None });
    }
    let states: Vec<Option<PureState>> = blocks
        .iter()
        .map(|b| if b.norm() < 1e-12 { None } else { Some(PureState::new_unchecked(rest_layout.clone(), b.unscale(b.norm()))) })
        .collect();
    let reference = states[0].clone().expect("nonzero reference block");
    let eve_ref = reference.marginal(&[env])?;
    let shield_names: Vec<&str> = shield_pos.iter().map(|&p| layout.labels()[p].as_str()).collect();
    let mut twisting = vec![UnitaryMatrix::identity(rest_layout.dim_of_all(&shield_names)?)];
    for s in states.iter().skip(1) {
        match s {
            None => {
                dev = dev.max(1.0);
                twisting.push(UnitaryMatrix::identity(twisting[0].dim()));
            }
            Some(phi) => {
                dev = dev.max(trace_distance(&phi.marginal(&[env])?, &eve_ref)?);
                twisting.push(uhlmann_unitary(phi, &reference, &shield_names)?);
            }
        }
    }
    let shield = reference.marginal(&shield_names)?;
    let key_dims: Vec<usize> = key_pos.iter().map(|&p| layout.dims()[p]).collect();
    let kd = (key_dims[0], key_dims.get(1).copied().unwrap_or(1));
    let rebuilt = build_alpha(&AlphaState { key_dims: kd, twisting: twisting.clone(), shield: shield.clone() })?;
    let target = reorder_like(rho, &key_pos, &shield_pos)?;
    let rebuilt = DensityMatrix::new_unchecked(target.layout().clone(), rebuilt.matrix().clone());
    dev = dev.max(trace_distance(&rebuilt, &target)?);
    Ok(IbitVerification { ok: dev <= tol, max_deviation: dev, twisting: Some(twisting), shield: Some(shield) })
}

/// `ρ` with keys first, then shield in layout order.
fn reorder_like(rho: &DensityMatrix, key_pos: &[usize], shield_pos: &[usize]) -> Result<DensityMatrix> {
    let mut shield_sorted = shield_pos.to_vec();
    shield_sorted.sort_unstable();
    let order: Vec<&str> = key_pos.iter().chain(shield_sorted.iter()).map(|&p| rho.layout().labels()[p].as_str()).collect();
    rho.permute(&order)
}

/// Distance of the measured key and Eve state from uniform keys times Eve's marginal.
#[derive(Debug, Clone, PartialEq)]
pub struct StandardReport {
    pub distance: f64,
    pub ccq: DensityMatrix,
    pub eve_state: DensityMatrix,
}

/// Dephases `key_labels`, discards everything but keys and `eve_labels`, and
/// compares with `uniform ⊗ ρ_E`.
pub fn measure_standard<S: AsRef<str>, T: AsRef<str>>(psi: &PureState, key_labels: &[S], eve_labels: &[T]) -> Result<StandardReport> {
    let keys: Vec<&str> = key_labels.iter().map(AsRef::as_ref).collect();
    let eve: Vec<&str> = eve_labels.iter().map(AsRef::as_ref).collect();
    let kept: Vec<&str> = keys.iter().chain(eve.iter()).copied().collect();
    let ccq = psi.marginal(&kept)?.dephase(&keys)?;
    let eve_state = if eve.is_empty() { None } else { Some(psi.marginal(&eve)?) };
    let distance = distance_from_ideal(&ccq, &keys, eve_state.as_ref())?;
    let eve_state = eve_state.unwrap_or_else(|| DensityMatrix::maximally_mixed(SubsystemLayout::single("__none", 1).expect("valid")));
    Ok(StandardReport { distance, ccq, eve_state })
}

/// Trace distance of a ccq state from `uniform(keys) ⊗ eve`.
pub fn distance_from_ideal(ccq: &DensityMatrix, keys: &[&str], eve: Option<&DensityMatrix>) -> Result<f64> {
    let key_dim = ccq.layout().dim_of_all(keys)?;
    let key_pos = ccq.layout().positions(keys)?;
    let key_layout = ccq.layout().select(&key_pos);
    let mut ideal = DensityMatrix::maximally_mixed(key_layout);
    debug_assert_eq!(ideal.dim(), key_dim);
    if let Some(e) = eve {
        ideal = ideal.tensor(e)?;
    }
    let order: Vec<&str> = ccq.layout().labels().iter().map(String::as_str).collect();
    trace_distance(ccq, &ideal.permute(&order)?)
}

/// `f(ε) = 1 − (1−√ε)(1−2ε−2√ε)`, capped at 1.
pub fn robust_error_f(eps: f64) -> Result<f64> {
    check_eps(eps)?;
    let s = eps.sqrt();
    Ok((1.0 - (1.0 - s) * (1.0 - 2.0 * eps - 2.0 * s)).min(1.0))
}

/// `f′(ε) = 2ε + 5√(2ε) + 2√(4√(2ε) − 2ε)`.
pub fn robust_error_fprime(eps: f64) -> Result<f64> {
    check_eps(eps)?;
    let r = (2.0 * eps).sqrt();
    Ok(2.0 * eps + 5.0 * r + 2.0 * (4.0 * r - 2.0 * eps).max(0.0).sqrt())
}

/// `f′(ε)` as a trace-norm bound, which never exceeds 2.
pub fn robust_error_fprime_capped(eps: f64) -> Result<f64> {
    Ok(robust_error_fprime(eps)?.min(2.0))
}

fn check_eps(eps: f64) -> Result<()> {
    if (0.0..=1.0).contains(&eps) {
        Ok(())
    } else {
        Err(Error::OutOfRange(format!("epsilon = {eps} not in [0, 1]")))
    }
}

/// One-sided ibit whose shield is maximally mixed.
pub fn check_irreducible(alpha: &AlphaState) -> bool {
    if alpha.key_dims.1 != 1 {
        return false;
    }
    let d = alpha.shield.dim();
    let flat = (alpha.shield.matrix() - identity(d).unscale(d as f64)).norm() <= VERIFY_TOL;
    flat && alpha.twisting.iter().all(|u| unitarity_defect(u.matrix()) <= 1e-10)
}

/// Alpha state read off a pure `key ⊗ shield ⊗ Eve` state by twisting a fixed
/// purification of Eve's marginal onto each key block.
pub fn forward_alpha<S: AsRef<str>>(psi: &PureState, key_labels: &[S], shield_labels: &[S], eve_labels: &[S]) -> Result<(DensityMatrix, f64)> {
    let layout = psi.layout();
    let key_pos = layout.positions(key_labels)?;
    let mut shield_pos = layout.positions(shield_labels)?;
    shield_pos.sort_unstable();
    let mut eve_pos = layout.positions(eve_labels)?;
    eve_pos.sort_unstable();
    if key_pos.len() + shield_pos.len() + eve_pos.len() != layout.len() {
        return Err(Error::InvalidLayout("key, shield and Eve must cover the state".into()));
    }
    let shield_names: Vec<&str> = shield_pos.iter().map(|&p| layout.labels()[p].as_str()).collect();
    let eve_names: Vec<&str> = eve_pos.iter().map(|&p| layout.labels()[p].as_str()).collect();
    let shield_dim = layout.dim_of_all(&shield_names)?;
    let rho_e = psi.marginal(&eve_names)?;
    let rank = rho_e.spectrum().iter().filter(|&&v| v > 1e-12).count();
    if rank > shield_dim {
        return Err(Error::DimensionMismatch(format!("shield dim {shield_dim} below the rank {rank} of Eve's state")));
    }
    // purification of rho_E on the shield, ordered like the blocks (layout order)
    let purified = rho_e.purify("__s")?;
    let mut v = CVector::zeros(shield_dim * rho_e.dim());
    let env_dim = purified.layout().dim_of("__s")?;
    for e in 0..rho_e.dim() {
        for s in 0..env_dim {
            v[s * rho_e.dim() + e] = purified.amplitudes()[e * env_dim + s];
        }
    }
    let (blocks, rest_layout) = key_blocks(psi, &key_pos);
    let merged_shield = SubsystemLayout::single("__shield", shield_dim)?.concat(&SubsystemLayout::single("__eve", rho_e.dim())?)?;
    // blocks enumerate rest in layout order; put shield digits first to match `v`
    let rest_shield: Vec<usize> = shield_names.iter().map(|n| rest_layout.position(n)).collect::<Result<_>>()?;
    let rest_eve: Vec<usize> = eve_names.iter().map(|n| rest_layout.position(n)).collect::<Result<_>>()?;
    let order: Vec<usize> = rest_shield.iter().chain(rest_eve.iter()).copied().collect();
    let map = rest_layout.offsets(&order);
    let phi0 = PureState::new_unchecked(merged_shield.clone(), v);
    let k = blocks.len();
    let mut twisting = Vec::with_capacity(k);
    for b in &blocks {
        let reordered = CVector::from_iterator(map.len(), map.iter().map(|&i| b[i]));
        let n = reordered.norm();
        if n < 1e-12 {
            twisting.push(UnitaryMatrix::identity(shield_dim));
            continue;
        }
        let phi_x = PureState::new_unchecked(merged_shield.clone(), reordered.unscale(n));
        twisting.push(uhlmann_unitary(&phi_x, &phi0, &["__shield"])?);
    }
    let sigma = phi0.marginal(&["__shield"])?;
    let key_dims: Vec<usize> = key_pos.iter().map(|&p| layout.dims()[p]).collect();
    let kd = (key_dims[0], key_dims.get(1).copied().unwrap_or(1));
    let alpha = build_alpha(&AlphaState { key_dims: kd, twisting, shield: sigma })?;
    let kept: Vec<&str> = key_pos.iter().map(|&p| layout.labels()[p].as_str()).chain(shield_names.iter().copied()).collect();
    let actual = psi.marginal(&kept)?;
    let key_names: Vec<&str> = key_pos.iter().map(|&p| layout.labels()[p].as_str()).collect();
    let order: Vec<&str> = key_names.iter().chain(shield_names.iter()).copied().collect();
    let actual = actual.permute(&order)?;
    let alpha = DensityMatrix::new_unchecked(actual.layout().clone(), alpha.matrix().clone());
    let d = trace_distance(&alpha, &actual)?;
    Ok((alpha, d))
}

/// Twisting file: `{"a", "b", "unitaries": [matrix, ...], "shield": matrix}`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TwistingFile {
    pub a: usize,
    pub b: usize,
    pub unitaries: Vec<JsonMatrix>,
    pub shield: JsonMatrix,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub shield_labels: Option<Vec<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub shield_dims: Option<Vec<usize>>,
}

impl TwistingFile {
    pub fn into_alpha(self) -> Result<AlphaState> {
        let sigma = matrix_from_json(&self.shield)?;
        let d = sigma.nrows();
        let dims = self.shield_dims.unwrap_or_else(|| vec![d]);
        let labels = self
            .shield_labels
            .unwrap_or_else(|| if dims.len() == 1 { vec!["S".into()] } else { (0..dims.len()).map(|i| format!("S{i}")).collect() });
        let shield = DensityMatrix::new(SubsystemLayout::new(labels, dims)?, sigma)?;
        let twisting = self.unitaries.iter().map(|m| UnitaryMatrix::new(matrix_from_json(m)?)).collect::<Result<Vec<_>>>()?;
        AlphaState::new((self.a, self.b), twisting, shield)
    }

    pub fn from_alpha(alpha: &AlphaState) -> Self {
        Self {
            a: alpha.key_dims.0,
            b: alpha.key_dims.1,
            unitaries: alpha.twisting.iter().map(|u| matrix_to_json(u.matrix())).collect(),
            shield: matrix_to_json(alpha.shield.matrix()),
            shield_labels: Some(alpha.shield.layout().labels().to_vec()),
            shield_dims: Some(alpha.shield.layout().dims().to_vec()),
        }
    }
}

/// Key-diagonal state `Σ_x p_x |x⟩⟨x| ⊗ ρ_x`.
pub fn classical_key_state(key_label: &str, parts: &[(f64, DensityMatrix)]) -> Result<DensityMatrix> {
    let first = parts.first().ok_or_else(|| Error::Degenerate("no key values".into()))?;
    let d = first.1.dim();
    let k = parts.len();
    let mut m = CMatrix::from_element(k * d, k * d, ZERO);
    for (x, (p, r)) in parts.iter().enumerate() {
        if r.layout() != first.1.layout() {
            return Err(Error::DimensionMismatch("conditional states differ in layout".into()));
        }
        m.view_mut((x * d, x * d), (d, d)).copy_from(&r.matrix().scale(*p));
    }
    let layout = SubsystemLayout::single(key_label, k)?.concat(first.1.layout())?;
    DensityMatrix::new(layout, m)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qmath::{gates, haar_unitary, random_density};

    fn shield1(label: &str, probs: &[f64]) -> DensityMatrix {
        DensityMatrix::diagonal(SubsystemLayout::single(label, probs.len()).unwrap(), probs).unwrap()
    }

    #[test]
    fn untwisted_pure_shield_is_product() {
        let sigma = shield1("S", &[1.0, 0.0]);
        let alpha = build_alpha(&AlphaState::untwisted((2, 2), sigma.clone()).unwrap()).unwrap();
        let keys = DensityMatrix::diagonal(SubsystemLayout::new([KEY_A, KEY_B], [2, 2]).unwrap(), &[1.0; 4]);
        assert!(keys.is_err()); // not normalised: sanity on the validator
        let plus = PureState::normalized(
            SubsystemLayout::new([KEY_A, KEY_B], [2, 2]).unwrap(),
            CVector::from_element(4, crate::qmath::linalg::real(1.0)),
        )
        .unwrap()
        .density();
        let expect = plus.tensor(&sigma).unwrap();
        assert!((alpha.matrix() - expect.matrix()).norm() < 1e-12);
    }

    #[test]
    fn pauli_twist_gives_bell_state() {
        let sigma = shield1("S", &[1.0, 0.0]);
        let spec = AlphaState::new((2, 1), vec![UnitaryMatrix::identity(2), gates::pauli_x()], sigma).unwrap();
        let alpha = build_alpha(&spec).unwrap();
        let phi = PureState::maximally_entangled("x", "y", 2).unwrap().density();
        assert!((alpha.matrix() - phi.matrix()).norm() < 1e-12);
        assert!(verify_ibit(&alpha, &[KEY_A, KEY_B], &["S"]).unwrap().ok);
    }

    #[test]
    fn random_twistings_round_trip() {
        let l = SubsystemLayout::new(["A'", "B'"], [2, 2]).unwrap();
        for seed in 0..5 {
            let sigma = random_density(&l, 2, seed);
            let tw = (0..4).map(|k| haar_unitary(4, 100 * seed + k).unwrap()).collect();
            let alpha = build_alpha(&AlphaState::new((2, 2), tw, sigma).unwrap()).unwrap();
            let v = verify_ibit(&alpha, &[KEY_A, KEY_B], &["A'", "B'"]).unwrap();
            assert!(v.ok && v.max_deviation < 1e-9, "seed {seed}: {}", v.max_deviation);
            let twisting = v.twisting.unwrap();
            assert!((twisting[0].matrix() - identity(4)).norm() < 1e-15);
            let rebuilt = build_alpha(&AlphaState::new((2, 2), twisting, v.shield.unwrap()).unwrap()).unwrap();
            assert!((rebuilt.matrix() - alpha.matrix()).norm() < 1e-8);
        }
    }

    #[test]
    fn key_correlated_with_eve_is_rejected() {
        let r0 = shield1("S", &[0.7, 0.3]);
        let r1 = shield1("S", &[0.2, 0.8]);
        let rho = classical_key_state(KEY_A, &[(0.5, r0), (0.5, r1)]).unwrap();
        let v = verify_ibit(&rho, &[KEY_A], &["S"]).unwrap();
        assert!(!v.ok);
        assert!(v.max_deviation > 0.1);
    }

    #[test]
    fn pure_zero_is_a_degenerate_ibit() {
        let rho = shield1(KEY_A, &[1.0]).tensor(&shield1("S", &[1.0, 0.0])).unwrap();
        assert!(verify_ibit(&rho, &[KEY_A], &["S"]).unwrap().ok);
    }

    fn ghz() -> PureState {
        let l = SubsystemLayout::new([KEY_A, KEY_B, "E"], [2, 2, 2]).unwrap();
        let mut v = CVector::zeros(8);
        v[0] = crate::qmath::linalg::real(0.5f64.sqrt());
        v[7] = crate::qmath::linalg::real(0.5f64.sqrt());
        PureState::new(l, v).unwrap()
    }

    #[test]
    fn measure_standard_examples() {
        let l = SubsystemLayout::new(["A'"], [2]).unwrap();
        let sigma = random_density(&l, 0, 3);
        let tw = (0..4).map(|k| haar_unitary(2, k).unwrap()).collect();
        let alpha = build_alpha(&AlphaState::new((2, 2), tw, sigma).unwrap()).unwrap();
        let psi = alpha.purify("E").unwrap();
        assert!(measure_standard(&psi, &[KEY_A, KEY_B], &["E"]).unwrap().distance < 1e-9);

        // both keys against E: exact value 3/4
        let both = measure_standard(&ghz(), &[KEY_A, KEY_B], &["E"]).unwrap().distance;
        assert!((both - 0.75).abs() < 1e-12);
        // a single key with KB acting as shield
        let one = measure_standard(&ghz(), &[KEY_A], &["E"]).unwrap().distance;
        assert!((one - 0.5).abs() < 1e-12);

        let plus = PureState::normalized(
            SubsystemLayout::new([KEY_A, KEY_B, "E"], [2, 2, 1]).unwrap(),
            CVector::from_element(4, crate::qmath::linalg::real(1.0)),
        )
        .unwrap();
        assert!(measure_standard(&plus, &[KEY_A, KEY_B], &["E"]).unwrap().distance < 1e-12);
    }

    #[test]
    fn error_function_values() {
        assert_eq!(robust_error_f(0.0).unwrap(), 0.0);
        assert_eq!(robust_error_fprime(0.0).unwrap(), 0.0);
        assert!((robust_error_f(0.01).unwrap() - 0.298).abs() < 1e-12);
        let fp = robust_error_fprime(0.02).unwrap();
        assert!((fp - (0.04 + 1.0 + 2.0 * 0.76f64.sqrt())).abs() < 1e-12);
        assert!((fp - 2.784).abs() < 1e-3);
        assert_eq!(robust_error_fprime_capped(0.02).unwrap(), 2.0);
        assert!(robust_error_f(1.5).is_err());
        assert!(robust_error_fprime(-0.1).is_err());
    }

    #[test]
    fn irreducible_examples() {
        let tw = vec![haar_unitary(2, 1).unwrap(), haar_unitary(2, 2).unwrap()];
        let flat = AlphaState::new((2, 1), tw.clone(), shield1("S", &[0.5, 0.5])).unwrap();
        assert!(check_irreducible(&flat));
        let pure = AlphaState::new((2, 1), tw.clone(), shield1("S", &[1.0, 0.0])).unwrap();
        assert!(!check_irreducible(&pure));
        let skewed = AlphaState::new((2, 1), tw, shield1("S", &[0.6, 0.4])).unwrap();
        assert!(!check_irreducible(&skewed));
    }

    #[test]
    fn forward_alpha_exact_for_ibit_purification() {
        let l = SubsystemLayout::new(["S"], [3]).unwrap();
        let sigma = random_density(&l, 2, 8);
        let tw = (0..2).map(|k| haar_unitary(3, 40 + k).unwrap()).collect();
        let alpha = build_alpha(&AlphaState::new((2, 1), tw, sigma).unwrap()).unwrap();
        let psi = alpha.purify("E").unwrap();
        let (_, d) = forward_alpha(&psi, &[KEY_A, KEY_B], &["S"], &["E"]).unwrap();
        assert!(d < 1e-9);
    }

    #[test]
    fn twisting_file_round_trip() {
        let tw = vec![UnitaryMatrix::identity(2), gates::pauli_x()];
        let alpha = AlphaState::new((2, 1), tw, shield1("S", &[1.0, 0.0])).unwrap();
        let text = serde_json::to_string(&TwistingFile::from_alpha(&alpha)).unwrap();
        let back: TwistingFile = serde_json::from_str(&text).unwrap();
        assert_eq!(back.into_alpha().unwrap(), alpha);
    }
}
