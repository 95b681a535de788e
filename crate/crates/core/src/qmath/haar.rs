//! Seeded random unitaries and states.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use super::layout::SubsystemLayout;
use super::linalg::{c, CMatrix, CVector};
use super::state::{DensityMatrix, PureState, UnitaryMatrix};
use crate::error::{Error, Result};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Complex Ginibre matrix with standard normal real and imaginary parts.
pub fn ginibre(rows: usize, cols: usize, rng: &mut ChaCha8Rng) -> CMatrix {
    CMatrix::from_fn(rows, cols, |_, _| {
        let re: f64 = StandardNormal.sample(rng);
        let im: f64 = StandardNormal.sample(rng);
        c(re, im)
    })
}

/// Haar-distributed unitary from QR of a Ginibre matrix, with the phases of
/// `R`'s diagonal moved into `Q`.
pub fn haar_unitary_rng(dim: usize, rng: &mut ChaCha8Rng) -> Result<UnitaryMatrix> {
    if dim == 0 {
        return Err(Error::OutOfRange("unitary dimension must be at least 1".into()));
    }
    let qr = ginibre(dim, dim, rng).qr();
    let (mut q, r) = qr.unpack();
    for k in 0..dim {
        let d = r[(k, k)];
        let phase = if d.norm() > 0.0 { d / d.norm() } else { c(1.0, 0.0) };
        for z in q.column_mut(k).iter_mut() {
            *z *= phase;
        }
    }
    Ok(UnitaryMatrix::new_unchecked(q))
}

pub fn haar_unitary(dim: usize, seed: u64) -> Result<UnitaryMatrix> {
    haar_unitary_rng(dim, &mut rng(seed))
}

/// Haar-random pure state on `layout`.
pub fn random_pure(layout: &SubsystemLayout, seed: u64) -> PureState {
    random_pure_rng(layout, &mut rng(seed))
}

pub fn random_pure_rng(layout: &SubsystemLayout, rng: &mut ChaCha8Rng) -> PureState {
    let g = ginibre(layout.total_dim(), 1, rng);
    let v = CVector::from_column_slice(g.as_slice());
    let n = v.norm();
    PureState::new_unchecked(layout.clone(), v.unscale(n))
}

/// Random mixed state `G G† / Tr` with a `d × rank` Ginibre `G` (rank 0 means full rank).
pub fn random_density(layout: &SubsystemLayout, rank: usize, seed: u64) -> DensityMatrix {
    random_density_rng(layout, rank, &mut rng(seed))
}

pub fn random_density_rng(layout: &SubsystemLayout, rank: usize, rng: &mut ChaCha8Rng) -> DensityMatrix {
    let d = layout.total_dim();
    let k = if rank == 0 { d } else { rank };
    let g = ginibre(d, k, rng);
    let m = &g * g.adjoint();
    let tr = m.trace().re;
    DensityMatrix::new_unchecked(layout.clone(), m.unscale(tr))
}
