//! Exact simulation of protocols built from local unitaries, dephasing-channel
//! sends and computational-basis measurements, with Eve's environment kept.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::entropy::von_neumann;
use crate::error::{Error, Result};
use crate::ibit::measure_standard;
use crate::io::{matrix_from_json, matrix_to_json, JsonMatrix};
use crate::qmath::linalg::{trace_norm_hermitian, CMatrix};
use crate::qmath::{gates, DensityMatrix, PureState, SubsystemLayout, UnitaryMatrix};

/// Distance below which a key is reported as decoupled.
pub const DECOUPLED_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Party {
    #[serde(rename = "A", alias = "Alice", alias = "alice")]
    Alice,
    #[serde(rename = "B", alias = "Bob", alias = "bob")]
    Bob,
    #[serde(rename = "E", alias = "Eve", alias = "eve")]
    Eve,
}

impl Party {
    fn from_label(label: &str) -> Option<Self> {
        match label.chars().next()? {
            'A' | 'a' => Some(Party::Alice),
            'B' | 'b' => Some(Party::Bob),
            'E' | 'e' => Some(Party::Eve),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "op", rename_all = "snake_case")]
pub enum Step {
    Unitary { party: Party, labels: Vec<String>, matrix: JsonMatrix },
    Send {
        label: String,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        from: Option<Party>,
        to: Party,
    },
    Measure { party: Party, labels: Vec<String> },
}

impl Step {
    pub fn unitary(party: Party, labels: &[&str], u: &UnitaryMatrix) -> Self {
        Step::Unitary { party, labels: labels.iter().map(|s| s.to_string()).collect(), matrix: matrix_to_json(u.matrix()) }
    }

    pub fn send(label: &str, from: Party, to: Party) -> Self {
        Step::Send { label: label.into(), from: Some(from), to }
    }

    pub fn measure(party: Party, labels: &[&str]) -> Self {
        Step::Measure { party, labels: labels.iter().map(|s| s.to_string()).collect() }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ProtocolScript {
    pub steps: Vec<Step>,
    /// Owners of the initial labels; labels not listed go by their first letter.
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub owners: BTreeMap<String, Party>,
}

impl ProtocolScript {
    pub fn new(steps: Vec<Step>) -> Self {
        Self { steps, owners: BTreeMap::new() }
    }

    pub fn parse(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }
}

/// Stepwise executor holding the global pure state and label ownership.
#[derive(Debug, Clone)]
pub struct Simulator {
    state: PureState,
    owners: BTreeMap<String, Party>,
    measured: Vec<String>,
    steps_done: usize,
}

impl Simulator {
    pub fn new(initial: &PureState, owners: &BTreeMap<String, Party>) -> Result<Self> {
        let mut map = BTreeMap::new();
        for label in initial.layout().labels() {
            let owner = owners
                .get(label)
                .copied()
                .or_else(|| Party::from_label(label))
                .ok_or_else(|| Error::InvalidLayout(format!("no owner for label `{label}`")))?;
            map.insert(label.clone(), owner);
        }
        if let Some(extra) = owners.keys().find(|l| !initial.layout().contains(l)) {
            return Err(Error::UnknownLabel(extra.clone()));
        }
        if !map.values().any(|&p| p == Party::Eve) {
            return Err(Error::InvalidLayout("the initial state needs an Eve subsystem (it may be 1-dimensional)".into()));
        }
        Ok(Self { state: initial.clone(), owners: map, measured: Vec::new(), steps_done: 0 })
    }

    pub fn state(&self) -> &PureState {
        &self.state
    }

    pub fn owner(&self, label: &str) -> Option<Party> {
        self.owners.get(label).copied()
    }

    /// Live labels owned by `party`, in layout order.
    pub fn labels_of(&self, party: Party) -> Vec<String> {
        self.state.layout().labels().iter().filter(|l| self.owners.get(*l) == Some(&party)).cloned().collect()
    }

    pub fn measured(&self) -> &[String] {
        &self.measured
    }

    pub fn eve_entropy(&self) -> Result<f64> {
        Ok(von_neumann(&self.state.marginal(&self.labels_of(Party::Eve))?))
    }

    fn illegal(&self, reason: impl Into<String>) -> Error {
        Error::IllegalStep { step: self.steps_done, reason: reason.into() }
    }

    fn check_owned(&self, party: Party, labels: &[String]) -> Result<()> {
        if labels.is_empty() {
            return Err(self.illegal("no labels given"));
        }
        for (i, l) in labels.iter().enumerate() {
            match self.owners.get(l) {
                None => return Err(self.illegal(format!("unknown label `{l}`"))),
                Some(&p) if p != party => return Err(self.illegal(format!("`{l}` is not held by {party:?}"))),
                _ => {}
            }
            if labels[..i].contains(l) {
                return Err(self.illegal(format!("label `{l}` repeated")));
            }
            if self.measured.contains(l) {
                return Err(self.illegal(format!("`{l}` was already measured")));
            }
        }
        Ok(())
    }

    fn fresh_env_label(&self, label: &str) -> String {
        let base = format!("E_{label}");
        let mut candidate = base.clone();
        let mut i = 1;
        while self.state.layout().contains(&candidate) {
            i += 1;
            candidate = format!("{base}{i}");
        }
        candidate
    }

    pub fn apply(&mut self, step: &Step) -> Result<()> {
        match step {
            Step::Unitary { party, labels, matrix } => {
                if *party == Party::Eve {
                    return Err(self.illegal("Eve's registers cannot be acted on"));
                }
                self.check_owned(*party, labels)?;
                let m = matrix_from_json(matrix)?;
                let u = UnitaryMatrix::new(m).map_err(|e| self.illegal(e.to_string()))?;
                self.state = self.state.apply_unitary(labels, &u).map_err(|e| self.illegal(e.to_string()))?;
            }
            Step::Send { label, from, to } => {
                let owner = self.owners.get(label).copied().ok_or_else(|| self.illegal(format!("unknown label `{label}`")))?;
                let from = from.unwrap_or(owner);
                if from == Party::Eve || *to == Party::Eve {
                    return Err(self.illegal("sends run between Alice and Bob"));
                }
                if from == *to {
                    return Err(self.illegal("sender and receiver coincide"));
                }
                self.check_owned(from, std::slice::from_ref(label))?;
                let env = self.fresh_env_label(label);
                self.state = self.state.copy_to_new(label, &env)?;
                self.owners.insert(label.clone(), *to);
                self.owners.insert(env, Party::Eve);
            }
            Step::Measure { party, labels } => {
                if *party == Party::Eve {
                    return Err(self.illegal("Eve does not measure"));
                }
                self.check_owned(*party, labels)?;
                self.measured.extend(labels.iter().cloned());
            }
        }
        self.steps_done += 1;
        Ok(())
    }

    pub fn finish(self) -> Result<ProtocolOutcome> {
        let eve = self.labels_of(Party::Eve);
        let report = measure_standard(&self.state, &self.measured, &eve)?;
        let layout = self.state.layout();
        let extracted_bits = self.measured.iter().map(|l| layout.dim_of(l).map(|d| (d as f64).log2())).sum::<Result<f64>>()?;
        let shield = self
            .state
            .layout()
            .labels()
            .iter()
            .filter(|l| !self.measured.contains(l) && self.owners[*l] != Party::Eve)
            .cloned()
            .collect();
        Ok(ProtocolOutcome {
            final_pure: self.state,
            ccq: report.ccq,
            ideal_distance: report.distance,
            extracted_bits,
            keys: self.measured,
            eve,
            shield,
            owners: self.owners,
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProtocolOutcome {
    /// Global state before the terminal measurements, Eve's registers included.
    pub final_pure: PureState,
    /// Measured keys and all of Eve's registers.
    pub ccq: DensityMatrix,
    /// Trace distance of `ccq` from uniform keys times Eve's marginal.
    pub ideal_distance: f64,
    pub extracted_bits: f64,
    pub keys: Vec<String>,
    pub eve: Vec<String>,
    /// Unmeasured registers held by Alice or Bob.
    pub shield: Vec<String>,
    pub owners: BTreeMap<String, Party>,
}

impl ProtocolOutcome {
    /// Distance of the measured keys from uniform against `adversary` alone.
    pub fn distance_against<S: AsRef<str>>(&self, adversary: &[S]) -> Result<f64> {
        Ok(measure_standard(&self.final_pure, &self.keys, adversary)?.distance)
    }

    /// Distance with every unmeasured register of Alice and Bob handed to Eve.
    pub fn pessimistic_distance(&self) -> Result<f64> {
        let all: Vec<&String> = self.eve.iter().chain(&self.shield).collect();
        self.distance_against(&all)
    }

    /// Largest number of key bits that are uniform against each adversary
    /// separately, maximised over subsets of the measured labels.
    pub fn decoupled_bits(&self, adversaries: &[&[&str]]) -> Result<f64> {
        let layout = self.final_pure.layout();
        let mut best = 0.0f64;
        for mask in 1u64..(1u64 << self.keys.len()) {
            let subset: Vec<&str> =
                self.keys.iter().enumerate().filter(|(i, _)| mask >> i & 1 == 1).map(|(_, l)| l.as_str()).collect();
            let bits = (layout.dim_of_all(&subset)? as f64).log2();
            if bits <= best {
                continue;
            }
            let mut ok = true;
            for adv in adversaries {
                if measure_standard(&self.final_pure, &subset, adv)?.distance > DECOUPLED_TOL {
                    ok = false;
                    break;
                }
            }
            if ok {
                best = bits;
            }
        }
        Ok(best)
    }
}

pub fn run(script: &ProtocolScript, initial: &PureState) -> Result<ProtocolOutcome> {
    let mut sim = Simulator::new(initial, &script.owners)?;
    for step in &script.steps {
        sim.apply(step)?;
    }
    sim.finish()
}

/// `½ Σ_k ‖p_k ρ_E^k − ρ_E/|K|‖₁` computed block by block from the global state.
pub fn to_standard_picture(outcome: &ProtocolOutcome) -> Result<f64> {
    let psi = &outcome.final_pure;
    let order: Vec<&str> = outcome.keys.iter().chain(&outcome.eve).map(String::as_str).collect();
    let rest: Vec<&str> = psi.layout().labels().iter().map(String::as_str).filter(|l| !order.contains(l)).collect();
    let full: Vec<&str> = order.iter().chain(&rest).copied().collect();
    let permuted = psi.permute(&full)?;
    let layout = permuted.layout();
    let dk = layout.dim_of_all(&outcome.keys)?;
    let de = layout.dim_of_all(&outcome.eve)?;
    let dr = layout.dim_of_all(&rest)?;
    let amps = permuted.amplitudes();
    let mut blocks = Vec::with_capacity(dk);
    for k in 0..dk {
        let m = CMatrix::from_fn(de, dr, |e, r| amps[(k * de + e) * dr + r]);
        blocks.push(&m * m.adjoint());
    }
    let mut rho_e = CMatrix::zeros(de, de);
    for b in &blocks {
        rho_e += b;
    }
    let uniform = rho_e.unscale(dk as f64);
    Ok(0.5 * blocks.iter().map(|b| trace_norm_hermitian(&(b - &uniform))).sum::<f64>())
}

fn trivial_eve() -> Result<PureState> {
    PureState::basis(SubsystemLayout::single("E", 1)?, &[0])
}

fn bell_measurement(first: &str, second: &str) -> Vec<Step> {
    vec![
        Step::unitary(Party::Alice, &[first, second], &gates::cnot()),
        Step::unitary(Party::Alice, &[first], &gates::hadamard()),
        Step::measure(Party::Alice, &[first, second]),
    ]
}

/// `|Φ⟩_{A₁B} ⊗ |Φ⟩_{A₂E}` followed by Alice's Bell measurement on `A₁A₂`.
pub fn entanglement_swapping() -> Result<ProtocolOutcome> {
    let psi = PureState::maximally_entangled("A1", "B", 2)?.tensor(&PureState::maximally_entangled("A2", "E", 2)?)?;
    run(&ProtocolScript::new(bell_measurement("A1", "A2")), &psi)
}

/// The same measurement with `A₂` in `|0⟩` instead of entangled with Eve.
pub fn entanglement_swapping_without_noise() -> Result<ProtocolOutcome> {
    let a2 = PureState::basis(SubsystemLayout::single("A2", 2)?, &[0])?;
    let psi = PureState::maximally_entangled("A1", "B", 2)?.tensor(&a2)?.tensor(&trivial_eve()?)?;
    run(&ProtocolScript::new(bell_measurement("A1", "A2")), &psi)
}

/// Initial state and steps of the two-singlet protocol. Bob dephases `B₁` on
/// its way to Alice, who disentangles it with a CNOT.
pub fn singlet_protocol_script() -> Result<(ProtocolScript, PureState)> {
    let psi = PureState::maximally_entangled("A1", "B1", 2)?
        .tensor(&PureState::maximally_entangled("A2", "B2", 2)?)?
        .tensor(&trivial_eve()?)?;
    let mut steps = vec![
        Step::send("B1", Party::Bob, Party::Alice),
        Step::unitary(Party::Alice, &["A1", "B1"], &gates::cnot()),
        Step::unitary(Party::Alice, &["B1"], &gates::hadamard()),
    ];
    steps.extend(bell_measurement("A1", "A2"));
    steps.push(Step::measure(Party::Alice, &["B1"]));
    Ok((ProtocolScript::new(steps), psi))
}

pub fn singlet_protocol() -> Result<ProtocolOutcome> {
    let (script, psi) = singlet_protocol_script()?;
    run(&script, &psi)
}
