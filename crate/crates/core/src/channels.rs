use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::io::{matrix_from_json, matrix_to_json, JsonMatrix};
use crate::qmath::linalg::{eigh, identity, isometry_defect, kron, real, CMatrix, ZERO};
use crate::qmath::{DensityMatrix, SubsystemLayout};

/// Kraus operators with zero norm are discarded; Choi eigenvalues below this
/// are outside the channel's rank.
pub const CHOI_CUTOFF: f64 = 1e-10;
const TP_TOL: f64 = 1e-10;

/// Completely positive trace-preserving map given by Kraus operators.
#[derive(Debug, Clone, PartialEq)]
pub struct Channel {
    in_dim: usize,
    out_dim: usize,
    kraus: Vec<CMatrix>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum NamedChannel {
    Identity { dim: usize },
    Depolarizing { p: f64, dim: usize },
    Dephasing { p: f64, dim: usize },
    AmplitudeDamping { gamma: f64 },
    Erasure { p: f64, dim: usize },
}

/// Vectorised operator `|K⟩⟩ = Σ_i |i⟩ ⊗ K|i⟩`, input index major.
fn vectorize(k: &CMatrix) -> Vec<crate::qmath::linalg::C64> {
    let (out, inp) = (k.nrows(), k.ncols());
    (0..inp * out).map(|idx| k[(idx % out, idx / out)]).collect()
}

impl Channel {
    /// Validates `Σ K†K = 1` and reduces to a minimal Kraus set when the
    /// given set is larger than the Choi rank.
    pub fn from_kraus(kraus: Vec<CMatrix>) -> Result<Self> {
        let first = kraus.first().ok_or_else(|| Error::Degenerate("empty Kraus set".into()))?;
        let (out_dim, in_dim) = (first.nrows(), first.ncols());
        if in_dim == 0 || out_dim == 0 {
            return Err(Error::Degenerate("zero-dimensional Kraus operator".into()));
        }
        if kraus.iter().any(|k| k.nrows() != out_dim || k.ncols() != in_dim) {
            return Err(Error::DimensionMismatch("Kraus operators of different shapes".into()));
        }
        let mut sum = CMatrix::zeros(in_dim, in_dim);
        for k in &kraus {
            sum += k.adjoint() * k;
        }
        let defect = (sum - identity(in_dim)).norm();
        if defect > TP_TOL {
            return Err(Error::InvalidState(format!("Kraus operators not trace preserving (defect {defect:e})")));
        }
        let kraus: Vec<CMatrix> = kraus.into_iter().filter(|k| k.norm() > CHOI_CUTOFF).collect();
        let ch = Self { in_dim, out_dim, kraus };
        let rank = ch.choi_rank();
        if ch.kraus.len() > rank {
            return Ok(ch.minimal());
        }
        Ok(ch)
    }

    pub fn named(kind: NamedChannel) -> Result<Self> {
        let check = |p: f64, what: &str| {
            if (0.0..=1.0).contains(&p) {
                Ok(())
            } else {
                Err(Error::OutOfRange(format!("{what} = {p} not in [0, 1]")))
            }
        };
        let check_dim = |d: usize| if d >= 1 { Ok(()) } else { Err(Error::OutOfRange("dimension must be at least 1".into())) };
        match kind {
            NamedChannel::Identity { dim } => {
                check_dim(dim)?;
                Self::from_kraus(vec![identity(dim)])
            }
            NamedChannel::Depolarizing { p, dim } => {
                check(p, "p")?;
                check_dim(dim)?;
                let d2 = (dim * dim) as f64;
                let mut ops = Vec::with_capacity(dim * dim);
                for a in 0..dim {
                    for b in 0..dim {
                        let w = if a == 0 && b == 0 { 1.0 - p + p / d2 } else { p / d2 };
                        ops.push(weyl(dim, a, b).scale(w.sqrt()));
                    }
                }
                Self::from_kraus(ops)
            }
            NamedChannel::Dephasing { p, dim } => {
                check(p, "p")?;
                check_dim(dim)?;
                let mut ops = vec![identity(dim).scale((1.0 - p).sqrt())];
                for i in 0..dim {
                    let mut k = CMatrix::zeros(dim, dim);
                    k[(i, i)] = real(p.sqrt());
                    ops.push(k);
                }
                Self::from_kraus(ops)
            }
            NamedChannel::AmplitudeDamping { gamma } => {
                check(gamma, "gamma")?;
                let k0 = CMatrix::from_row_slice(2, 2, &[real(1.0), ZERO, ZERO, real((1.0 - gamma).sqrt())]);
                let k1 = CMatrix::from_row_slice(2, 2, &[ZERO, real(gamma.sqrt()), ZERO, ZERO]);
                Self::from_kraus(vec![k0, k1])
            }
            NamedChannel::Erasure { p, dim } => {
                check(p, "p")?;
                check_dim(dim)?;
                let mut k0 = CMatrix::zeros(dim + 1, dim);
                for i in 0..dim {
                    k0[(i, i)] = real((1.0 - p).sqrt());
                }
                let mut ops = vec![k0];
                for i in 0..dim {
                    let mut k = CMatrix::zeros(dim + 1, dim);
                    k[(dim, i)] = real(p.sqrt());
                    ops.push(k);
                }
                Self::from_kraus(ops)
            }
        }
    }

    pub fn in_dim(&self) -> usize {
        self.in_dim
    }

    pub fn out_dim(&self) -> usize {
        self.out_dim
    }

    pub fn kraus(&self) -> &[CMatrix] {
        &self.kraus
    }

    pub fn env_dim(&self) -> usize {
        self.kraus.len()
    }

    /// Unnormalised Choi operator `Σ_k |K_k⟩⟩⟨⟨K_k|` on `R ⊗ B`.
    fn choi_operator(&self) -> CMatrix {
        let n = self.in_dim * self.out_dim;
        let mut j = CMatrix::zeros(n, n);
        for k in &self.kraus {
            let v = crate::qmath::linalg::CVector::from_vec(vectorize(k));
            j += &v * v.adjoint();
        }
        j
    }

    fn choi_rank(&self) -> usize {
        eigh(&self.choi_operator()).values.iter().filter(|&&v| v > CHOI_CUTOFF).count().max(1)
    }

    /// Normalised Choi state `τ_RB = (id ⊗ N)(Φ_RA′)`.
    pub fn choi(&self) -> DensityMatrix {
        let layout = SubsystemLayout::new(["R", "B"], [self.in_dim, self.out_dim]).expect("valid dims");
        DensityMatrix::new_unchecked(layout, self.choi_operator().unscale(self.in_dim as f64))
    }

    /// Channel with Kraus operators read off the Choi eigendecomposition.
    pub fn minimal(&self) -> Self {
        Self::kraus_from_choi_operator(&self.choi_operator(), self.in_dim, self.out_dim)
    }

    fn kraus_from_choi_operator(j: &CMatrix, in_dim: usize, out_dim: usize) -> Self {
        let eig = eigh(j);
        let mut kraus = Vec::new();
        for (k, &lam) in eig.values.iter().enumerate() {
            if lam <= CHOI_CUTOFF {
                continue;
            }
            let s = lam.sqrt();
            kraus.push(CMatrix::from_fn(out_dim, in_dim, |b, i| eig.vectors[(i * out_dim + b, k)] * s));
        }
        Self { in_dim, out_dim, kraus }
    }

    /// Reconstructs a channel from its normalised Choi state on `R ⊗ B`.
    pub fn from_choi(choi: &DensityMatrix) -> Result<Self> {
        let dims = choi.layout().dims();
        if dims.len() != 2 {
            return Err(Error::InvalidLayout("Choi state must have two subsystems".into()));
        }
        let (in_dim, out_dim) = (dims[0], dims[1]);
        let ch = Self::kraus_from_choi_operator(&choi.matrix().scale(in_dim as f64), in_dim, out_dim);
        Self::from_kraus(ch.kraus)
    }

    /// Stinespring isometry `V = Σ_k K_k ⊗ |k⟩_E`, rows indexed by `b·env + k`.
    pub fn stinespring(&self) -> CMatrix {
        let env = self.env_dim();
        let mut v = CMatrix::zeros(self.out_dim * env, self.in_dim);
        for (k, op) in self.kraus.iter().enumerate() {
            for b in 0..self.out_dim {
                for i in 0..self.in_dim {
                    v[(b * env + k, i)] = op[(b, i)];
                }
            }
        }
        v
    }

    pub fn isometry_defect(&self) -> f64 {
        isometry_defect(&self.stinespring())
    }

    /// `Σ_k (1 ⊗ K_k) ρ (1 ⊗ K_k)†` on subsystem `on`.
    pub fn apply(&self, rho: &DensityMatrix, on: &str) -> Result<DensityMatrix> {
        let d = rho.layout().dim_of(on)?;
        if d != self.in_dim {
            return Err(Error::DimensionMismatch(format!("subsystem `{on}` has dim {d}, channel input is {}", self.in_dim)));
        }
        let mut acc: Option<DensityMatrix> = None;
        for k in &self.kraus {
            let term = rho.conjugate_by(&[on], k, &[self.out_dim])?;
            acc = Some(match acc {
                None => term,
                Some(a) => DensityMatrix::new_unchecked(a.layout().clone(), a.matrix() + term.matrix()),
            });
        }
        Ok(acc.expect("nonempty Kraus set"))
    }

    /// `V ρ V†` on `B ⊗ E` for an input state on the channel's input space.
    pub fn complementary_output(&self, rho_in: &DensityMatrix) -> Result<DensityMatrix> {
        self.complementary_output_labeled(rho_in.matrix(), "B", "E")
    }

    pub fn complementary_output_labeled(&self, rho_in: &CMatrix, b: &str, e: &str) -> Result<DensityMatrix> {
        if rho_in.nrows() != self.in_dim || rho_in.ncols() != self.in_dim {
            return Err(Error::DimensionMismatch(format!(
                "input is {}x{}, channel input is {}",
                rho_in.nrows(),
                rho_in.ncols(),
                self.in_dim
            )));
        }
        let v = self.stinespring();
        let layout = SubsystemLayout::new([b, e], [self.out_dim, self.env_dim()])?;
        Ok(DensityMatrix::new_unchecked(layout, &v * rho_in * v.adjoint()))
    }

    /// `N₁ ⊗ N₂` with pairwise Kronecker products of Kraus operators.
    pub fn tensor(&self, other: &Self) -> Result<Self> {
        let mut ops = Vec::with_capacity(self.kraus.len() * other.kraus.len());
        for a in &self.kraus {
            for b in &other.kraus {
                ops.push(kron(a, b));
            }
        }
        Self::from_kraus(ops)
    }
}

pub fn tensor_channels(a: &Channel, b: &Channel) -> Result<Channel> {
    a.tensor(b)
}

/// Weyl operator `X^a Z^b` on dimension `d`.
pub fn weyl(d: usize, a: usize, b: usize) -> CMatrix {
    let omega = 2.0 * std::f64::consts::PI / d as f64;
    let mut m = CMatrix::zeros(d, d);
    for j in 0..d {
        let phase = crate::qmath::linalg::C64::from_polar(1.0, omega * (b * j) as f64);
        m[((j + a) % d, j)] = phase;
    }
    m
}

/// Channel description as stored on disk.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ChannelFile {
    Kraus(KrausFile),
    Named(NamedChannel),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KrausFile {
    pub kind: KrausTag,
    pub in_dim: usize,
    pub out_dim: usize,
    pub ops: Vec<JsonMatrix>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KrausTag {
    Kraus,
}

impl ChannelFile {
    pub fn build(&self) -> Result<Channel> {
        match self {
            ChannelFile::Named(n) => Channel::named(*n),
            ChannelFile::Kraus(k) => {
                let ops = k.ops.iter().map(matrix_from_json).collect::<Result<Vec<_>>>()?;
                if ops.iter().any(|m| m.nrows() != k.out_dim || m.ncols() != k.in_dim) {
                    return Err(Error::DimensionMismatch(format!("Kraus operators must be {}x{}", k.out_dim, k.in_dim)));
                }
                Channel::from_kraus(ops)
            }
        }
    }

    pub fn from_channel(ch: &Channel) -> Self {
        ChannelFile::Kraus(KrausFile {
            kind: KrausTag::Kraus,
            in_dim: ch.in_dim,
            out_dim: ch.out_dim,
            ops: ch.kraus.iter().map(matrix_to_json).collect(),
        })
    }
}

pub fn parse_channel(text: &str) -> Result<Channel> {
    serde_json::from_str::<ChannelFile>(text)?.build()
}

/// Random channel with `env` Kraus operators from a Haar isometry.
pub fn random_channel(in_dim: usize, out_dim: usize, env: usize, seed: u64) -> Result<Channel> {
    let u = crate::qmath::haar_unitary(out_dim * env, seed)?;
    if out_dim * env < in_dim {
        return Err(Error::DimensionMismatch("isometry needs out_dim·env ≥ in_dim".into()));
    }
    let v = u.matrix().columns(0, in_dim).into_owned();
    let kraus = (0..env).map(|k| CMatrix::from_fn(out_dim, in_dim, |b, i| v[(b * env + k, i)])).collect();
    Channel::from_kraus(kraus)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qmath::{random_density, PureState};
    use crate::qmath::linalg::CVector;

    fn qubit_layout() -> SubsystemLayout {
        SubsystemLayout::single("A", 2).unwrap()
    }

    fn plus() -> DensityMatrix {
        let v = CVector::from_vec(vec![real(1.0), real(1.0)]);
        PureState::normalized(qubit_layout(), v).unwrap().density()
    }

    fn close(a: &CMatrix, b: &CMatrix) -> bool {
        (a - b).norm() < 1e-10
    }

    #[test]
    fn apply_examples() {
        let rho = random_density(&qubit_layout(), 0, 3);
        let id = Channel::named(NamedChannel::Identity { dim: 2 }).unwrap();
        assert!(close(id.apply(&rho, "A").unwrap().matrix(), rho.matrix()));
        let deph = Channel::named(NamedChannel::Dephasing { p: 1.0, dim: 2 }).unwrap();
        assert!(close(deph.apply(&plus(), "A").unwrap().matrix(), &identity(2).unscale(2.0)));
        let dep = Channel::named(NamedChannel::Depolarizing { p: 1.0, dim: 2 }).unwrap();
        assert!(close(dep.apply(&rho, "A").unwrap().matrix(), &identity(2).unscale(2.0)));
    }

    #[test]
    fn complementary_examples() {
        let rho = random_density(&qubit_layout(), 0, 4);
        let id = Channel::named(NamedChannel::Identity { dim: 2 }).unwrap();
        let be = id.complementary_output(&rho).unwrap();
        assert_eq!(be.layout().dims(), &[2, 1]);
        assert!(close(be.matrix(), rho.matrix()));

        let deph = Channel::named(NamedChannel::Dephasing { p: 1.0, dim: 2 }).unwrap();
        let diag = DensityMatrix::diagonal(qubit_layout(), &[0.3, 0.7]).unwrap();
        let be = deph.complementary_output(&diag).unwrap();
        let expect = DensityMatrix::diagonal(be.layout().clone(), &[0.3, 0.0, 0.0, 0.7]).unwrap();
        assert!(close(be.matrix(), expect.matrix()));

        let g = 0.4;
        let ad = Channel::named(NamedChannel::AmplitudeDamping { gamma: g }).unwrap();
        let one = DensityMatrix::diagonal(qubit_layout(), &[0.0, 1.0]).unwrap();
        let be = ad.complementary_output(&one).unwrap();
        let v = CVector::from_vec(vec![ZERO, real(g.sqrt()), real((1.0 - g).sqrt()), ZERO]);
        let expect = PureState::new(be.layout().clone(), v).unwrap().density();
        assert!(close(be.matrix(), expect.matrix()));
    }

    #[test]
    fn named_examples() {
        let dep0 = Channel::named(NamedChannel::Depolarizing { p: 0.0, dim: 2 }).unwrap();
        let phi = PureState::maximally_entangled("R", "B", 2).unwrap().density();
        assert!(close(dep0.choi().matrix(), phi.matrix()));
        assert_eq!(dep0.env_dim(), 1);

        let er = Channel::named(NamedChannel::Erasure { p: 1.0, dim: 2 }).unwrap();
        let out = er.apply(&random_density(&qubit_layout(), 0, 5), "A").unwrap();
        let flag = DensityMatrix::diagonal(out.layout().clone(), &[0.0, 0.0, 1.0]).unwrap();
        assert!(close(out.matrix(), flag.matrix()));

        let deph = Channel::named(NamedChannel::Dephasing { p: 1.0, dim: 2 }).unwrap();
        assert_eq!(deph.kraus().len(), 2);
        let p0 = DensityMatrix::diagonal(qubit_layout(), &[1.0, 0.0]).unwrap();
        let p1 = DensityMatrix::diagonal(qubit_layout(), &[0.0, 1.0]).unwrap();
        assert!(close(&deph.kraus()[0], p0.matrix()));
        assert!(close(&deph.kraus()[1], p1.matrix()));

        assert!(Channel::named(NamedChannel::Dephasing { p: 1.5, dim: 2 }).is_err());
    }

    #[test]
    fn invalid_kraus_rejected() {
        assert!(Channel::from_kraus(vec![identity(2).scale(0.5)]).is_err());
        assert!(Channel::from_kraus(vec![]).is_err());
    }

    #[test]
    fn minimal_stinespring_is_isometry() {
        for kind in [
            NamedChannel::Depolarizing { p: 0.3, dim: 3 },
            NamedChannel::Dephasing { p: 0.5, dim: 2 },
            NamedChannel::AmplitudeDamping { gamma: 0.2 },
            NamedChannel::Erasure { p: 0.25, dim: 2 },
        ] {
            let ch = Channel::named(kind).unwrap();
            assert!(ch.isometry_defect() < 1e-10);
            assert_eq!(ch.env_dim(), ch.choi_rank());
            let choi = ch.choi();
            let r = choi.partial_trace(&["R"]).unwrap();
            assert!(close(r.matrix(), &identity(ch.in_dim()).unscale(ch.in_dim() as f64)));
        }
    }

    #[test]
    fn tensor_with_identity_acts_locally() {
        let ad = Channel::named(NamedChannel::AmplitudeDamping { gamma: 0.3 }).unwrap();
        let id = Channel::named(NamedChannel::Identity { dim: 2 }).unwrap();
        let both = tensor_channels(&ad, &id).unwrap();
        let rho = random_density(&SubsystemLayout::single("A", 2).unwrap(), 0, 6);
        let sigma = random_density(&SubsystemLayout::single("B", 2).unwrap(), 0, 7);
        let joint = rho.tensor(&sigma).unwrap().regroup(&[("X", &["A", "B"][..])]).unwrap();
        let got = both.apply(&joint, "X").unwrap();
        let expect = ad.apply(&rho, "A").unwrap().tensor(&sigma).unwrap();
        assert!(close(got.matrix(), expect.matrix()));
        let idid = tensor_channels(&id, &id).unwrap();
        assert_eq!(idid.env_dim(), 1);
        assert!(close(&idid.kraus()[0], &identity(4)));
    }

    #[test]
    fn channel_json_round_trip() {
        let ch = Channel::named(NamedChannel::AmplitudeDamping { gamma: 0.3 }).unwrap();
        let text = serde_json::to_string(&ChannelFile::from_channel(&ch)).unwrap();
        assert_eq!(parse_channel(&text).unwrap(), ch);
        let named = parse_channel(r#"{"kind":"depolarizing","p":0.1,"dim":2}"#).unwrap();
        assert_eq!(named.in_dim(), 2);
        assert!(parse_channel(r#"{"kind":"kraus","in_dim":2,"out_dim":2,"ops":[[[[1,0],[0,0]],[[0,0],[1,0]]]]}"#).is_ok());
    }
}
