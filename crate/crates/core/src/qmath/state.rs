//! State objects: density matrices, pure states and unitaries, all carrying
//! an explicit [`SubsystemLayout`].

use super::layout::SubsystemLayout;
use super::linalg::{self, eigvalsh, hermiticity_defect, CMatrix, CVector, C64, PSD_CLAMP, ZERO};
use crate::error::{Error, Result};

/// Tolerance on Hermiticity, positivity and unit trace.
pub const STATE_TOL: f64 = 1e-10;
/// Tolerance on the norm of a pure state.
pub const NORM_TOL: f64 = 1e-12;
/// Frobenius tolerance on `U U† = 1`.
pub const UNITARY_TOL: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix {
    layout: SubsystemLayout,
    matrix: CMatrix,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PureState {
    layout: SubsystemLayout,
    amplitudes: CVector,
}

#[derive(Debug, Clone, PartialEq)]
pub struct UnitaryMatrix {
    matrix: CMatrix,
}

// ---------------------------------------------------------------------------
// index permutation helpers shared by both state kinds

fn permutation_order<S: AsRef<str>>(layout: &SubsystemLayout, order: &[S]) -> Result<Vec<usize>> {
    let positions = layout.positions(order)?;
    if positions.len() != layout.len() {
        return Err(Error::InvalidLayout(format!(
            "permutation lists {} of {} subsystems",
            positions.len(),
            layout.len()
        )));
    }
    Ok(positions)
}

fn permute_vector(v: &CVector, layout: &SubsystemLayout, positions: &[usize]) -> (CVector, SubsystemLayout) {
    let map = layout.offsets(positions);
    let out = CVector::from_iterator(map.len(), map.iter().map(|&i| v[i]));
    (out, layout.select(positions))
}

fn permute_matrix(m: &CMatrix, layout: &SubsystemLayout, positions: &[usize]) -> (CMatrix, SubsystemLayout) {
    let map = layout.offsets(positions);
    let n = map.len();
    let out = CMatrix::from_fn(n, n, |i, j| m[(map[i], map[j])]);
    (out, layout.select(positions))
}

/// `(op ⊗ 1_rest) v` where the targets are the leading `in_dim` factor of `v`.
fn apply_leading_vec(op: &CMatrix, v: &CVector) -> CVector {
    let in_dim = op.ncols();
    let out_dim = op.nrows();
    let rest = v.len() / in_dim;
    let mut w = CVector::zeros(out_dim * rest);
    for t_out in 0..out_dim {
        for t_in in 0..in_dim {
            let o = op[(t_out, t_in)];
            if o == ZERO {
                continue;
            }
            for r in 0..rest {
                w[t_out * rest + r] += o * v[t_in * rest + r];
            }
        }
    }
    w
}

/// `(op ⊗ 1_rest) m` column by column.
fn apply_leading_left(op: &CMatrix, m: &CMatrix) -> CMatrix {
    let in_dim = op.ncols();
    let out_dim = op.nrows();
    let rest = m.nrows() / in_dim;
    let mut w = CMatrix::zeros(out_dim * rest, m.ncols());
    for col in 0..m.ncols() {
        for t_out in 0..out_dim {
            for t_in in 0..in_dim {
                let o = op[(t_out, t_in)];
                if o == ZERO {
                    continue;
                }
                for r in 0..rest {
                    w[(t_out * rest + r, col)] += o * m[(t_in * rest + r, col)];
                }
            }
        }
    }
    w
}

/// Positions `targets` first, followed by the remaining subsystems in layout order.
fn targets_first(layout: &SubsystemLayout, targets: &[usize]) -> Vec<usize> {
    let mut order = targets.to_vec();
    order.extend(layout.complement(targets));
    order
}

/// Layout after replacing the dims of `targets` with `new_dims`.
fn replaced_layout(layout: &SubsystemLayout, targets: &[usize], new_dims: &[usize]) -> Result<SubsystemLayout> {
    let mut dims = layout.dims().to_vec();
    for (&t, &d) in targets.iter().zip(new_dims) {
        dims[t] = d;
    }
    SubsystemLayout::new(layout.labels().to_vec(), dims)
}

fn check_operator(layout: &SubsystemLayout, targets: &[usize], op: &CMatrix, new_dims: &[usize]) -> Result<()> {
    let in_dim: usize = targets.iter().map(|&t| layout.dims()[t]).product();
    let out_dim: usize = new_dims.iter().product();
    if new_dims.len() != targets.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} output dims for {} target subsystems",
            new_dims.len(),
            targets.len()
        )));
    }
    if op.ncols() != in_dim || op.nrows() != out_dim {
        return Err(Error::DimensionMismatch(format!(
            "operator is {}x{}, targets need {}x{}",
            op.nrows(),
            op.ncols(),
            out_dim,
            in_dim
        )));
    }
    Ok(())
}

/// Merged subsystem names with the number of original subsystems in each.
type Runs = Vec<(String, usize)>;

/// Group labels into merged subsystems; every label must appear exactly once.
fn regroup_order<S: AsRef<str>>(layout: &SubsystemLayout, groups: &[(&str, &[S])]) -> Result<(Vec<usize>, Runs)> {
    let mut order = Vec::new();
    let mut runs = Vec::new();
    for (name, members) in groups {
        if members.is_empty() {
            return Err(Error::InvalidLayout(format!("group `{name}` is empty")));
        }
        for m in members.iter() {
            let p = layout.position(m.as_ref())?;
            if order.contains(&p) {
                return Err(Error::OverlappingLabels(m.as_ref().to_string()));
            }
            order.push(p);
        }
        runs.push((name.to_string(), members.len()));
    }
    if order.len() != layout.len() {
        return Err(Error::InvalidLayout("regrouping must cover every subsystem".into()));
    }
    Ok((order, runs))
}

// ---------------------------------------------------------------------------

impl DensityMatrix {
    /// Validated constructor: Hermitian, PSD and unit trace to 1e-10.
    pub fn new(layout: SubsystemLayout, matrix: CMatrix) -> Result<Self> {
        let d = layout.total_dim();
        if matrix.nrows() != d || matrix.ncols() != d {
            return Err(Error::DimensionMismatch(format!(
                "matrix is {}x{}, layout needs {d}x{d}",
                matrix.nrows(),
                matrix.ncols()
            )));
        }
        let herm = hermiticity_defect(&matrix);
        if herm > STATE_TOL {
            return Err(Error::InvalidState(format!("not Hermitian (defect {herm:e})")));
        }
        let tr = matrix.trace();
        if (tr.re - 1.0).abs() > STATE_TOL || tr.im.abs() > STATE_TOL {
            return Err(Error::InvalidState(format!("trace is {tr}")));
        }
        let min = eigvalsh(&matrix).last().copied().unwrap_or(0.0);
        if min < -STATE_TOL {
            return Err(Error::InvalidState(format!("negative eigenvalue {min:e}")));
        }
        Ok(Self { layout, matrix: linalg::hermitize(&matrix) })
    }

    /// Normalises a PSD operator by its trace before validating.
    pub fn from_unnormalized(layout: SubsystemLayout, matrix: CMatrix) -> Result<Self> {
        let tr = matrix.trace().re;
        if tr <= 0.0 {
            return Err(Error::InvalidState("zero trace".into()));
        }
        Self::new(layout, matrix.unscale(tr))
    }

    /// Skips validation; callers guarantee a state up to round-off.
    pub(crate) fn new_unchecked(layout: SubsystemLayout, matrix: CMatrix) -> Self {
        Self { layout, matrix }
    }

    pub fn maximally_mixed(layout: SubsystemLayout) -> Self {
        let d = layout.total_dim();
        Self { matrix: linalg::identity(d).unscale(d as f64), layout }
    }

    /// Diagonal state in the computational basis.
    pub fn diagonal(layout: SubsystemLayout, probs: &[f64]) -> Result<Self> {
        let d = layout.total_dim();
        if probs.len() != d {
            return Err(Error::DimensionMismatch(format!("{} probabilities for dimension {d}", probs.len())));
        }
        let m = CMatrix::from_diagonal(&CVector::from_iterator(d, probs.iter().map(|&p| linalg::real(p))));
        Self::new(layout, m)
    }

    pub fn layout(&self) -> &SubsystemLayout {
        &self.layout
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.matrix
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    /// Eigenvalues, descending, with drift in `[-1e-10, 0)` clamped to zero.
    pub fn spectrum(&self) -> Vec<f64> {
        eigvalsh(&self.matrix)
            .into_iter()
            .map(|v| if (-PSD_CLAMP..0.0).contains(&v) { 0.0 } else { v })
            .collect()
    }

    pub fn purity(&self) -> f64 {
        (&self.matrix * &self.matrix).trace().re
    }

    pub fn is_pure(&self, tol: f64) -> bool {
        self.purity() >= 1.0 - tol
    }

    pub fn tensor(&self, other: &Self) -> Result<Self> {
        Ok(Self {
            layout: self.layout.concat(&other.layout)?,
            matrix: linalg::kron(&self.matrix, &other.matrix),
        })
    }

    /// Reduced state on `keep`; kept subsystems stay in layout order.
    pub fn partial_trace<S: AsRef<str>>(&self, keep: &[S]) -> Result<Self> {
        let mut kept = self.layout.positions(keep)?;
        kept.sort_unstable();
        let rest = self.layout.complement(&kept);
        let ko = self.layout.offsets(&kept);
        let ro = self.layout.offsets(&rest);
        let n = ko.len();
        let mut out = CMatrix::zeros(n, n);
        for a in 0..n {
            for b in 0..n {
                let mut acc = ZERO;
                for &r in &ro {
                    acc += self.matrix[(ko[a] + r, ko[b] + r)];
                }
                out[(a, b)] = acc;
            }
        }
        Ok(Self { layout: self.layout.select(&kept), matrix: out })
    }

    /// Traces out `labels`.
    pub fn trace_out<S: AsRef<str>>(&self, labels: &[S]) -> Result<Self> {
        let gone = self.layout.positions(labels)?;
        let keep: Vec<String> = self
            .layout
            .complement(&gone)
            .into_iter()
            .map(|p| self.layout.labels()[p].clone())
            .collect();
        self.partial_trace(&keep)
    }

    /// Reorders subsystems to follow `order` (all labels).
    pub fn permute<S: AsRef<str>>(&self, order: &[S]) -> Result<Self> {
        let positions = permutation_order(&self.layout, order)?;
        let (matrix, layout) = permute_matrix(&self.matrix, &self.layout, &positions);
        Ok(Self { layout, matrix })
    }

    /// Merges labels into composite subsystems, e.g. `[("A", &["A1","A2"]), ("B", &["B1","B2"])]`.
    pub fn regroup<S: AsRef<str>>(&self, groups: &[(&str, &[S])]) -> Result<Self> {
        let (order, runs) = regroup_order(&self.layout, groups)?;
        let (matrix, layout) = permute_matrix(&self.matrix, &self.layout, &order);
        Ok(Self { layout: layout.merge_runs(&runs)?, matrix })
    }

    /// Renames a subsystem.
    pub fn relabel(&self, from: &str, to: &str) -> Result<Self> {
        let p = self.layout.position(from)?;
        let mut labels = self.layout.labels().to_vec();
        labels[p] = to.to_string();
        Ok(Self { layout: SubsystemLayout::new(labels, self.layout.dims().to_vec())?, matrix: self.matrix.clone() })
    }

    /// `ρ ↦ (op ⊗ 1) ρ (op ⊗ 1)†` with `op` acting on `targets` and mapping them
    /// to subsystems of dimensions `new_dims` (same labels).
    pub fn conjugate_by<S: AsRef<str>>(&self, targets: &[S], op: &CMatrix, new_dims: &[usize]) -> Result<Self> {
        let tpos = self.layout.positions(targets)?;
        check_operator(&self.layout, &tpos, op, new_dims)?;
        let order = targets_first(&self.layout, &tpos);
        let (m, _) = permute_matrix(&self.matrix, &self.layout, &order);
        let left = apply_leading_left(op, &m);
        let both = apply_leading_left(op, &left.adjoint()).adjoint();
        let new_layout = replaced_layout(&self.layout, &tpos, new_dims)?;
        let permuted_layout = new_layout.select(&order);
        let back: Vec<&str> = new_layout.labels().iter().map(String::as_str).collect();
        let back_pos = permuted_layout.positions(&back)?;
        let (matrix, layout) = permute_matrix(&both, &permuted_layout, &back_pos);
        Ok(Self { layout, matrix })
    }

    pub fn apply_unitary<S: AsRef<str>>(&self, targets: &[S], u: &UnitaryMatrix) -> Result<Self> {
        let dims: Vec<usize> = self.layout.positions(targets)?.iter().map(|&p| self.layout.dims()[p]).collect();
        self.conjugate_by(targets, u.matrix(), &dims)
    }

    /// Completely dephases `labels` in the computational basis.
    pub fn dephase<S: AsRef<str>>(&self, labels: &[S]) -> Result<Self> {
        let pos = self.layout.positions(labels)?;
        let n = self.dim();
        let digit = |i: usize| -> Vec<usize> {
            let d = self.layout.digits(i);
            pos.iter().map(|&p| d[p]).collect()
        };
        let keys: Vec<Vec<usize>> = (0..n).map(digit).collect();
        let matrix = CMatrix::from_fn(n, n, |i, j| if keys[i] == keys[j] { self.matrix[(i, j)] } else { ZERO });
        Ok(Self { layout: self.layout.clone(), matrix })
    }

    /// Purification `Σ_k √λ_k |v_k⟩|k⟩_env` with the environment appended last
    /// and sized to the rank of the state.
    pub fn purify(&self, env_label: &str) -> Result<PureState> {
        let eig = linalg::eigh(&self.matrix);
        let support: Vec<usize> = (0..eig.values.len()).filter(|&k| eig.values[k] > 1e-12).collect();
        let rank = support.len().max(1);
        let layout = self.layout.concat(&SubsystemLayout::single(env_label, rank)?)?;
        let d = self.dim();
        let mut v = CVector::zeros(d * rank);
        for (slot, &k) in support.iter().enumerate() {
            let w = eig.values[k].sqrt();
            for i in 0..d {
                v[i * rank + slot] = eig.vectors[(i, k)] * w;
            }
        }
        PureState::normalized(layout, v)
    }

    /// Convex mixture `p·self + (1−p)·other`.
    pub fn mix(&self, other: &Self, p: f64) -> Result<Self> {
        if self.layout != other.layout {
            return Err(Error::DimensionMismatch("mixing states with different layouts".into()));
        }
        Ok(Self { layout: self.layout.clone(), matrix: self.matrix.scale(p) + other.matrix.scale(1.0 - p) })
    }
}

impl PureState {
    /// Validated constructor: Euclidean norm 1 to 1e-12.
    pub fn new(layout: SubsystemLayout, amplitudes: CVector) -> Result<Self> {
        if amplitudes.len() != layout.total_dim() {
            return Err(Error::DimensionMismatch(format!(
                "{} amplitudes for dimension {}",
                amplitudes.len(),
                layout.total_dim()
            )));
        }
        let norm = amplitudes.norm();
        if (norm - 1.0).abs() > NORM_TOL {
            return Err(Error::InvalidState(format!("norm is {norm}")));
        }
        Ok(Self { layout, amplitudes })
    }

    pub fn normalized(layout: SubsystemLayout, amplitudes: CVector) -> Result<Self> {
        let norm = amplitudes.norm();
        if norm == 0.0 {
            return Err(Error::InvalidState("zero vector".into()));
        }
        Self::new(layout, amplitudes.unscale(norm))
    }

    pub(crate) fn new_unchecked(layout: SubsystemLayout, amplitudes: CVector) -> Self {
        Self { layout, amplitudes }
    }

    /// Computational basis state `|digits⟩`.
    pub fn basis(layout: SubsystemLayout, digits: &[usize]) -> Result<Self> {
        if digits.len() != layout.len() || digits.iter().zip(layout.dims()).any(|(d, n)| d >= n) {
            return Err(Error::DimensionMismatch(format!("basis digits {digits:?} for dims {:?}", layout.dims())));
        }
        let idx: usize = digits.iter().zip(layout.strides()).map(|(d, s)| d * s).sum();
        let mut v = CVector::zeros(layout.total_dim());
        v[idx] = linalg::ONE;
        Ok(Self { layout, amplitudes: v })
    }

    /// `Σ_i |i⟩|i⟩ / √d` on two subsystems of dimension `d`.
    pub fn maximally_entangled(a: &str, b: &str, d: usize) -> Result<Self> {
        let layout = SubsystemLayout::new([a, b], [d, d])?;
        let mut v = CVector::zeros(d * d);
        for i in 0..d {
            v[i * d + i] = linalg::real(1.0 / (d as f64).sqrt());
        }
        Ok(Self { layout, amplitudes: v })
    }

    pub fn layout(&self) -> &SubsystemLayout {
        &self.layout
    }

    pub fn amplitudes(&self) -> &CVector {
        &self.amplitudes
    }

    pub fn dim(&self) -> usize {
        self.amplitudes.len()
    }

    pub fn density(&self) -> DensityMatrix {
        DensityMatrix::new_unchecked(self.layout.clone(), linalg::outer(&self.amplitudes))
    }

    pub fn inner(&self, other: &Self) -> Result<C64> {
        if self.layout != other.layout {
            return Err(Error::DimensionMismatch("inner product of states with different layouts".into()));
        }
        Ok(self.amplitudes.dotc(&other.amplitudes))
    }

    pub fn tensor(&self, other: &Self) -> Result<Self> {
        Ok(Self {
            layout: self.layout.concat(&other.layout)?,
            amplitudes: linalg::kron_vec(&self.amplitudes, &other.amplitudes),
        })
    }

    /// Coefficient matrix `M[k, r]` with `k` running over `keep` (in the given
    /// order) and `r` over the remaining subsystems in layout order.
    pub fn coefficient_matrix<S: AsRef<str>>(&self, keep: &[S]) -> Result<CMatrix> {
        let kept = self.layout.positions(keep)?;
        let rest = self.layout.complement(&kept);
        let ko = self.layout.offsets(&kept);
        let ro = self.layout.offsets(&rest);
        Ok(CMatrix::from_fn(ko.len(), ro.len(), |a, r| self.amplitudes[ko[a] + ro[r]]))
    }

    /// Reduced density matrix on `keep`, kept subsystems in layout order.
    pub fn marginal<S: AsRef<str>>(&self, keep: &[S]) -> Result<DensityMatrix> {
        let mut kept = self.layout.positions(keep)?;
        kept.sort_unstable();
        let labels: Vec<&str> = kept.iter().map(|&p| self.layout.labels()[p].as_str()).collect();
        let m = self.coefficient_matrix(&labels)?;
        Ok(DensityMatrix::new_unchecked(self.layout.select(&kept), &m * m.adjoint()))
    }

    pub fn permute<S: AsRef<str>>(&self, order: &[S]) -> Result<Self> {
        let positions = permutation_order(&self.layout, order)?;
        let (amplitudes, layout) = permute_vector(&self.amplitudes, &self.layout, &positions);
        Ok(Self { layout, amplitudes })
    }

    pub fn regroup<S: AsRef<str>>(&self, groups: &[(&str, &[S])]) -> Result<Self> {
        let (order, runs) = regroup_order(&self.layout, groups)?;
        let (amplitudes, layout) = permute_vector(&self.amplitudes, &self.layout, &order);
        Ok(Self { layout: layout.merge_runs(&runs)?, amplitudes })
    }

    /// `(op ⊗ 1)|ψ⟩` with `op` mapping `targets` to subsystems of dims `new_dims`.
    /// The result is not renormalised; use it with isometries.
    pub fn apply_operator<S: AsRef<str>>(&self, targets: &[S], op: &CMatrix, new_dims: &[usize]) -> Result<Self> {
        let tpos = self.layout.positions(targets)?;
        check_operator(&self.layout, &tpos, op, new_dims)?;
        let order = targets_first(&self.layout, &tpos);
        let (v, _) = permute_vector(&self.amplitudes, &self.layout, &order);
        let w = apply_leading_vec(op, &v);
        let new_layout = replaced_layout(&self.layout, &tpos, new_dims)?;
        let permuted_layout = new_layout.select(&order);
        let back: Vec<&str> = new_layout.labels().iter().map(String::as_str).collect();
        let back_pos = permuted_layout.positions(&back)?;
        let (amplitudes, layout) = permute_vector(&w, &permuted_layout, &back_pos);
        Ok(Self { layout, amplitudes })
    }

    pub fn apply_unitary<S: AsRef<str>>(&self, targets: &[S], u: &UnitaryMatrix) -> Result<Self> {
        let dims: Vec<usize> = self.layout.positions(targets)?.iter().map(|&p| self.layout.dims()[p]).collect();
        self.apply_operator(targets, u.matrix(), &dims)
    }

    /// Copy isometry `Σ_i |i⟩_X |i⟩_env ⟨i|_X`; the new subsystem is appended last.
    pub fn copy_to_new(&self, label: &str, env_label: &str) -> Result<Self> {
        let p = self.layout.position(label)?;
        let d = self.layout.dims()[p];
        let stride = self.layout.strides()[p];
        let layout = self.layout.concat(&SubsystemLayout::single(env_label, d)?)?;
        let mut w = CVector::zeros(layout.total_dim());
        for (i, &a) in self.amplitudes.iter().enumerate() {
            let x = (i / stride) % d;
            w[i * d + x] = a;
        }
        Ok(Self { layout, amplitudes: w })
    }

    pub fn relabel(&self, from: &str, to: &str) -> Result<Self> {
        let p = self.layout.position(from)?;
        let mut labels = self.layout.labels().to_vec();
        labels[p] = to.to_string();
        Ok(Self { layout: SubsystemLayout::new(labels, self.layout.dims().to_vec())?, amplitudes: self.amplitudes.clone() })
    }
}

impl UnitaryMatrix {
    /// Validated constructor: `‖U U† − 1‖_F ≤ 1e-10`.
    pub fn new(matrix: CMatrix) -> Result<Self> {
        let defect = linalg::unitarity_defect(&matrix);
        if defect > UNITARY_TOL {
            return Err(Error::NotUnitary(defect));
        }
        Ok(Self { matrix })
    }

    pub(crate) fn new_unchecked(matrix: CMatrix) -> Self {
        Self { matrix }
    }

    pub fn identity(dim: usize) -> Self {
        Self { matrix: linalg::identity(dim) }
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.matrix
    }

    pub fn adjoint(&self) -> Self {
        Self { matrix: self.matrix.adjoint() }
    }

    pub fn compose(&self, then: &Self) -> Result<Self> {
        if self.dim() != then.dim() {
            return Err(Error::DimensionMismatch("composing unitaries of different sizes".into()));
        }
        Ok(Self { matrix: &then.matrix * &self.matrix })
    }

    pub fn kron(&self, other: &Self) -> Self {
        Self { matrix: linalg::kron(&self.matrix, &other.matrix) }
    }
}

/// Standard gates.
pub mod gates {
    use super::UnitaryMatrix;
    use crate::qmath::linalg::{real, CMatrix, ONE, ZERO};

    pub fn pauli_x() -> UnitaryMatrix {
        UnitaryMatrix::new_unchecked(CMatrix::from_row_slice(2, 2, &[ZERO, ONE, ONE, ZERO]))
    }

    pub fn pauli_z() -> UnitaryMatrix {
        UnitaryMatrix::new_unchecked(CMatrix::from_row_slice(2, 2, &[ONE, ZERO, ZERO, -ONE]))
    }

    pub fn hadamard() -> UnitaryMatrix {
        let h = real(std::f64::consts::FRAC_1_SQRT_2);
        UnitaryMatrix::new_unchecked(CMatrix::from_row_slice(2, 2, &[h, h, h, -h]))
    }

    /// Controlled-NOT with the first qubit as control.
    pub fn cnot() -> UnitaryMatrix {
        let mut m = CMatrix::zeros(4, 4);
        m[(0, 0)] = ONE;
        m[(1, 1)] = ONE;
        m[(2, 3)] = ONE;
        m[(3, 2)] = ONE;
        UnitaryMatrix::new_unchecked(m)
    }
}
