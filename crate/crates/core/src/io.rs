//! JSON file formats for states and matrices.
//!
//! Complex numbers are `[re, im]` pairs; matrices are row-major lists of rows.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::qmath::linalg::{c, CMatrix, CVector};
use crate::qmath::{DensityMatrix, PureState, SubsystemLayout};

pub type JsonMatrix = Vec<Vec<[f64; 2]>>;
pub type JsonVector = Vec<[f64; 2]>;

pub fn matrix_to_json(m: &CMatrix) -> JsonMatrix {
    (0..m.nrows()).map(|i| (0..m.ncols()).map(|j| [m[(i, j)].re, m[(i, j)].im]).collect()).collect()
}

pub fn matrix_from_json(rows: &JsonMatrix) -> Result<CMatrix> {
    let nr = rows.len();
    let nc = rows.first().map_or(0, Vec::len);
    if rows.iter().any(|r| r.len() != nc) {
        return Err(Error::DimensionMismatch("ragged matrix rows".into()));
    }
    Ok(CMatrix::from_fn(nr, nc, |i, j| c(rows[i][j][0], rows[i][j][1])))
}

pub fn vector_to_json(v: &CVector) -> JsonVector {
    v.iter().map(|z| [z.re, z.im]).collect()
}

pub fn vector_from_json(v: &JsonVector) -> CVector {
    CVector::from_iterator(v.len(), v.iter().map(|z| c(z[0], z[1])))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum StateFile {
    Density { labels: Vec<String>, dims: Vec<usize>, matrix: JsonMatrix },
    Pure { labels: Vec<String>, dims: Vec<usize>, vector: JsonVector },
}

/// A state read from disk, either mixed or pure.
#[derive(Debug, Clone, PartialEq)]
pub enum State {
    Density(DensityMatrix),
    Pure(PureState),
}

impl State {
    pub fn density(&self) -> DensityMatrix {
        match self {
            State::Density(d) => d.clone(),
            State::Pure(p) => p.density(),
        }
    }

    pub fn layout(&self) -> &SubsystemLayout {
        match self {
            State::Density(d) => d.layout(),
            State::Pure(p) => p.layout(),
        }
    }
}

impl StateFile {
    pub fn into_state(self) -> Result<State> {
        match self {
            StateFile::Density { labels, dims, matrix } => {
                let layout = SubsystemLayout::new(labels, dims)?;
                Ok(State::Density(DensityMatrix::new(layout, matrix_from_json(&matrix)?)?))
            }
            StateFile::Pure { labels, dims, vector } => {
                let layout = SubsystemLayout::new(labels, dims)?;
                Ok(State::Pure(PureState::new(layout, vector_from_json(&vector))?))
            }
        }
    }

    pub fn from_density(rho: &DensityMatrix) -> Self {
        StateFile::Density {
            labels: rho.layout().labels().to_vec(),
            dims: rho.layout().dims().to_vec(),
            matrix: matrix_to_json(rho.matrix()),
        }
    }

    pub fn from_pure(psi: &PureState) -> Self {
        StateFile::Pure {
            labels: psi.layout().labels().to_vec(),
            dims: psi.layout().dims().to_vec(),
            vector: vector_to_json(psi.amplitudes()),
        }
    }
}

pub fn parse_state(text: &str) -> Result<State> {
    serde_json::from_str::<StateFile>(text)?.into_state()
}

pub fn read_state(path: &Path) -> Result<State> {
    parse_state(&std::fs::read_to_string(path)?)
}

pub fn density_to_string(rho: &DensityMatrix) -> Result<String> {
    Ok(serde_json::to_string_pretty(&StateFile::from_density(rho))?)
}

pub fn pure_to_string(psi: &PureState) -> Result<String> {
    Ok(serde_json::to_string_pretty(&StateFile::from_pure(psi))?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qmath::{random_density, random_pure};

    #[test]
    fn density_round_trip() {
        let l = SubsystemLayout::new(["A", "B"], [2, 3]).unwrap();
        let rho = random_density(&l, 0, 1);
        let back = parse_state(&density_to_string(&rho).unwrap()).unwrap();
        assert_eq!(back.density(), DensityMatrix::new(l, rho.matrix().clone()).unwrap());
    }

    #[test]
    fn pure_round_trip() {
        let l = SubsystemLayout::new(["A", "E"], [2, 2]).unwrap();
        let psi = random_pure(&l, 1);
        match parse_state(&pure_to_string(&psi).unwrap()).unwrap() {
            State::Pure(p) => assert_eq!(p, psi),
            other => panic!("expected pure state, got {other:?}"),
        }
    }

    #[test]
    fn rejects_invalid_input() {
        assert!(parse_state(r#"{"labels":["A"],"dims":[2],"matrix":[[[1,0],[0,0]],[[0,0],[1,0]]]}"#).is_err());
        assert!(parse_state(r#"{"labels":["A"],"dims":[2],"vector":[[1,0]]}"#).is_err());
        assert!(parse_state("not json").is_err());
    }
}
