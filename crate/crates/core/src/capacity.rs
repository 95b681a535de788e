//! Private randomness capacity of a channel via its reverse coherent information.

use serde::{Deserialize, Serialize};

use crate::channels::Channel;
use crate::entropy::{conditional_entropy, von_neumann};
use crate::error::{Error, Result};
use crate::qmath::linalg::{eigvalsh, hermitian_map, hermitize, identity, kron, log2_on_support, CMatrix};
use crate::qmath::{DensityMatrix, SubsystemLayout};

const LOG_CUTOFF: f64 = 1e-14;
/// Largest product input dimension accepted by [`additivity_check`].
pub const ADDITIVITY_DIM_CAP: usize = 36;

#[derive(Debug, Clone, PartialEq)]
pub struct CapacityResult {
    pub rci: f64,
    pub capacity: f64,
    pub optimizer_input: DensityMatrix,
    pub iterations: usize,
    pub gap_estimate: f64,
    pub converged: bool,
    /// Objective after every accepted step, starting with the initial point.
    pub trace: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AscentOptions {
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for AscentOptions {
    fn default() -> Self {
        Self { tol: 1e-7, max_iter: 5000 }
    }
}

fn input_layout(n: &Channel) -> SubsystemLayout {
    SubsystemLayout::single("A'", n.in_dim()).expect("positive dim")
}

fn check_input(n: &Channel, sigma: &CMatrix) -> Result<()> {
    if sigma.nrows() != n.in_dim() || sigma.ncols() != n.in_dim() {
        return Err(Error::DimensionMismatch(format!("input is {}x{}, channel input is {}", sigma.nrows(), sigma.ncols(), n.in_dim())));
    }
    Ok(())
}

/// `S(B|E)` of `V σ V†`.
pub fn rci_of_input(n: &Channel, sigma: &DensityMatrix) -> Result<f64> {
    check_input(n, sigma.matrix())?;
    objective(n, sigma.matrix())
}

fn objective(n: &Channel, sigma: &CMatrix) -> Result<f64> {
    let be = n.complementary_output_labeled(sigma, "B", "E")?;
    conditional_entropy(&be, &["B"], &["E"])
}

/// `S(σ) − S((id ⊗ N)(φ_{RA′}))` with `φ` a purification of `σ`.
pub fn rci_via_purification(n: &Channel, sigma: &DensityMatrix) -> Result<f64> {
    check_input(n, sigma.matrix())?;
    let s = DensityMatrix::new_unchecked(input_layout(n), sigma.matrix().clone());
    let phi = s.purify("R")?.density();
    let out = n.apply(&phi, "A'")?;
    Ok(von_neumann(&s) - von_neumann(&out))
}

/// Gradient of `σ ↦ S(B|E)_{VσV†}` in bits, valid for full-rank `σ`.
pub fn rci_gradient(n: &Channel, sigma: &DensityMatrix) -> Result<CMatrix> {
    check_input(n, sigma.matrix())?;
    Ok(gradient(n, &n.stinespring(), sigma.matrix()))
}

fn gradient(n: &Channel, v: &CMatrix, sigma: &CMatrix) -> CMatrix {
    let omega = v * sigma * v.adjoint();
    let env = n.env_dim();
    let out = n.out_dim();
    let mut omega_e = CMatrix::zeros(env, env);
    for b in 0..out {
        omega_e += omega.view((b * env, b * env), (env, env));
    }
    let log_be = log2_on_support(&hermitize(&omega), LOG_CUTOFF);
    let log_e = kron(&identity(out), &log2_on_support(&hermitize(&omega_e), LOG_CUTOFF));
    hermitize(&(v.adjoint() * (log_e - log_be) * v))
}

fn gap(g: &CMatrix, sigma: &CMatrix) -> f64 {
    let lmax = eigvalsh(g).first().copied().unwrap_or(0.0);
    (lmax - (sigma * g).trace().re).max(0.0)
}

/// Entropic mirror ascent from the maximally mixed input.
pub fn maximize_rci(n: &Channel, opts: AscentOptions) -> Result<CapacityResult> {
    if opts.tol.is_nan() || opts.tol <= 0.0 {
        return Err(Error::OutOfRange(format!("tolerance {} must be positive", opts.tol)));
    }
    let d = n.in_dim();
    let v = n.stinespring();
    let mut sigma = identity(d).unscale(d as f64);
    let mut f = objective(n, &sigma)?;
    let mut g = gradient(n, &v, &sigma);
    let mut gap_est = gap(&g, &sigma);
    let mut trace = vec![f];
    let mut iterations = 0;
    let mut converged = gap_est <= opts.tol;
    while !converged && iterations < opts.max_iter {
        iterations += 1;
        let log_sigma = hermitian_map(&sigma, |x| x.max(1e-300).ln());
        let mut eta = 1.0;
        let mut accepted = None;
        while eta > 1e-14 {
            let cand = hermitian_map(&(&log_sigma + g.scale(eta)), f64::exp);
            let cand = hermitize(&cand.unscale(cand.trace().re));
            let fc = objective(n, &cand)?;
            if fc > f {
                accepted = Some((cand, fc));
                break;
            }
            eta *= 0.5;
        }
        let Some((cand, fc)) = accepted else {
            converged = true;
            break;
        };
        let change = fc - f;
        sigma = cand;
        f = fc;
        g = gradient(n, &v, &sigma);
        gap_est = gap(&g, &sigma);
        trace.push(f);
        if change < opts.tol || gap_est <= opts.tol {
            converged = true;
        }
    }
    let log_b = (n.out_dim() as f64).log2();
    Ok(CapacityResult {
        rci: f,
        capacity: log_b + f,
        optimizer_input: DensityMatrix::new_unchecked(input_layout(n), sigma),
        iterations,
        gap_estimate: gap_est,
        converged,
        trace,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdditivityReport {
    pub lhs: f64,
    pub rhs: f64,
    pub pass: bool,
}

/// Compares the optimum for `N₁ ⊗ N₂` with the sum of the individual optima.
pub fn additivity_check(n1: &Channel, n2: &Channel, tol: f64, opts: AscentOptions) -> Result<AdditivityReport> {
    let dim = n1.in_dim() * n2.in_dim();
    if dim > ADDITIVITY_DIM_CAP {
        return Err(Error::DimensionOverflow(dim, ADDITIVITY_DIM_CAP));
    }
    let both = n1.tensor(n2)?;
    let lhs = maximize_rci(&both, opts)?.rci;
    let rhs = maximize_rci(n1, opts)?.rci + maximize_rci(n2, opts)?.rci;
    Ok(AdditivityReport { lhs, rhs, pass: (lhs - rhs).abs() <= tol })
}
