//! Two-party rate regions, one-sided rates and ping-pong accounting.

use serde::{Deserialize, Serialize};

use crate::entropy::marginal_entropy;
use crate::error::{Error, Result};
use crate::qmath::DensityMatrix;

const FEAS_TOL: f64 = 1e-9;
const PURE_TOL: f64 = 1e-10;
/// Largest purified dimension explored by the one-sided subset search.
const SEARCH_DIM_CAP: usize = 1 << 12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Setting {
    NoCommNoNoise,
    NoiseNoComm,
    NoiseComm,
    CommNoNoise,
}

impl Setting {
    pub const ALL: [Setting; 4] = [Setting::NoCommNoNoise, Setting::NoiseNoComm, Setting::NoiseComm, Setting::CommNoNoise];

    pub fn from_index(i: u8) -> Result<Self> {
        match i {
            1 => Ok(Setting::NoCommNoNoise),
            2 => Ok(Setting::NoiseNoComm),
            3 => Ok(Setting::NoiseComm),
            4 => Ok(Setting::CommNoNoise),
            _ => Err(Error::OutOfRange(format!("setting {i} is not one of 1, 2, 3, 4"))),
        }
    }

    pub fn index(self) -> u8 {
        match self {
            Setting::NoCommNoNoise => 1,
            Setting::NoiseNoComm => 2,
            Setting::NoiseComm => 3,
            Setting::CommNoNoise => 4,
        }
    }
}

/// Split of a state's subsystems between Alice and Bob.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Bipartition {
    pub alice: Vec<String>,
    pub bob: Vec<String>,
}

impl Bipartition {
    /// First subsystem for Alice, the rest for Bob.
    pub fn first_vs_rest(rho: &DensityMatrix) -> Result<Self> {
        let labels = rho.layout().labels();
        if labels.len() < 2 {
            return Err(Error::InvalidLayout("a bipartite state needs at least two subsystems".into()));
        }
        Ok(Self { alice: labels[..1].to_vec(), bob: labels[1..].to_vec() })
    }

    pub fn new<S: AsRef<str>>(rho: &DensityMatrix, alice: &[S], bob: &[S]) -> Result<Self> {
        let a: Vec<String> = alice.iter().map(|s| s.as_ref().to_string()).collect();
        let b: Vec<String> = bob.iter().map(|s| s.as_ref().to_string()).collect();
        let all: Vec<&String> = a.iter().chain(b.iter()).collect();
        let pos = rho.layout().positions(&all)?;
        if pos.len() != rho.layout().len() || a.is_empty() || b.is_empty() {
            return Err(Error::InvalidLayout("Alice and Bob must be nonempty and cover every subsystem".into()));
        }
        Ok(Self { alice: a, bob: b })
    }
}

/// Entropies of a bipartite state in bits.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BipartiteEntropies {
    pub log_a: f64,
    pub log_b: f64,
    pub s_a: f64,
    pub s_b: f64,
    pub s_ab: f64,
}

impl BipartiteEntropies {
    pub fn of(rho: &DensityMatrix, split: &Bipartition) -> Result<Self> {
        let l = rho.layout();
        let all: Vec<&String> = split.alice.iter().chain(split.bob.iter()).collect();
        Ok(Self {
            log_a: (l.dim_of_all(&split.alice)? as f64).log2(),
            log_b: (l.dim_of_all(&split.bob)? as f64).log2(),
            s_a: marginal_entropy(rho, &split.alice)?,
            s_b: marginal_entropy(rho, &split.bob)?,
            s_ab: marginal_entropy(rho, &all)?,
        })
    }

    pub fn global_rate(&self) -> f64 {
        self.log_a + self.log_b - self.s_ab
    }

    /// `S(A|E) = S(B) − S(AB)` for a purifying Eve.
    pub fn s_a_given_e(&self) -> f64 {
        self.s_b - self.s_ab
    }

    pub fn s_b_given_e(&self) -> f64 {
        self.s_a - self.s_ab
    }

    pub fn mutual_information(&self) -> f64 {
        self.s_a + self.s_b - self.s_ab
    }
}

/// `a·R_A + b·R_B ≤ bound`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Inequality {
    pub coeff_a: f64,
    pub coeff_b: f64,
    pub bound: f64,
}

impl Inequality {
    fn new(coeff_a: f64, coeff_b: f64, bound: f64) -> Self {
        Self { coeff_a, coeff_b, bound }
    }

    pub fn slack(&self, p: (f64, f64)) -> f64 {
        self.bound - self.coeff_a * p.0 - self.coeff_b * p.1
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateRegion {
    pub setting: Setting,
    pub inequalities: Vec<Inequality>,
    /// Counter-clockwise, starting at the vertex on the `R_A` axis with the
    /// largest `R_A`.
    pub vertices: Vec<(f64, f64)>,
}

impl RateRegion {
    pub fn contains(&self, p: (f64, f64)) -> bool {
        self.inequalities.iter().all(|q| q.slack(p) >= -FEAS_TOL)
    }

    pub fn max_sum(&self) -> f64 {
        self.vertices.iter().map(|v| v.0 + v.1).fold(f64::NEG_INFINITY, f64::max)
    }

    /// Polygon as CSV with columns `R_A,R_B`, closed by repeating the first vertex.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("R_A,R_B\n");
        for v in self.vertices.iter().chain(self.vertices.first()) {
            out.push_str(&format!("{},{}\n", v.0, v.1));
        }
        out
    }
}

/// `log|AB| − S(AB)` over all subsystems of the state.
pub fn global_rate(rho: &DensityMatrix) -> f64 {
    let log_d = (rho.dim() as f64).log2();
    log_d - crate::entropy::von_neumann(rho)
}

pub fn region_inequalities(e: &BipartiteEntropies, setting: Setting) -> Vec<Inequality> {
    let rg = e.global_rate();
    let s_a_given_b = e.s_ab - e.s_b;
    let s_b_given_a = e.s_ab - e.s_a;
    let (ba, bb) = match setting {
        Setting::NoCommNoNoise => (e.log_a - s_a_given_b.max(0.0), e.log_b - s_b_given_a.max(0.0)),
        Setting::NoiseNoComm => (e.log_a - s_a_given_b, e.log_b - s_b_given_a),
        Setting::NoiseComm => (rg, rg),
        Setting::CommNoNoise => {
            let log_ab = e.log_a + e.log_b;
            (log_ab - e.s_b.max(e.s_ab), log_ab - e.s_a.max(e.s_ab))
        }
    };
    vec![
        Inequality::new(1.0, 0.0, ba),
        Inequality::new(0.0, 1.0, bb),
        Inequality::new(1.0, 1.0, rg),
        Inequality::new(-1.0, 0.0, 0.0),
        Inequality::new(0.0, -1.0, 0.0),
    ]
}

/// Vertices of `{p : all inequalities}` by pairwise intersection.
pub fn polygon_vertices(ineqs: &[Inequality]) -> Vec<(f64, f64)> {
    let mut pts: Vec<(f64, f64)> = Vec::new();
    for i in 0..ineqs.len() {
        for j in i + 1..ineqs.len() {
            let (p, q) = (ineqs[i], ineqs[j]);
            let det = p.coeff_a * q.coeff_b - p.coeff_b * q.coeff_a;
            if det.abs() < 1e-15 {
                continue;
            }
            let x = (p.bound * q.coeff_b - p.coeff_b * q.bound) / det;
            let y = (p.coeff_a * q.bound - p.bound * q.coeff_a) / det;
            let pt = (clean(x), clean(y));
            if ineqs.iter().all(|k| k.slack(pt) >= -FEAS_TOL) && !pts.iter().any(|v| (v.0 - pt.0).abs() <= FEAS_TOL && (v.1 - pt.1).abs() <= FEAS_TOL) {
                pts.push(pt);
            }
        }
    }
    order_ccw(pts)
}

fn clean(x: f64) -> f64 {
    if x.abs() < 1e-13 {
        0.0
    } else {
        x
    }
}

fn order_ccw(mut pts: Vec<(f64, f64)>) -> Vec<(f64, f64)> {
    if pts.len() < 2 {
        return pts;
    }
    let n = pts.len() as f64;
    let cx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let cy = pts.iter().map(|p| p.1).sum::<f64>() / n;
    pts.sort_by(|a, b| (a.1 - cy).atan2(a.0 - cx).total_cmp(&(b.1 - cy).atan2(b.0 - cx)));
    let start = pts
        .iter()
        .enumerate()
        .filter(|(_, p)| p.1.abs() <= FEAS_TOL)
        .max_by(|a, b| a.1 .0.total_cmp(&b.1 .0))
        .map_or(0, |(i, _)| i);
    pts.rotate_left(start);
    pts
}

/// Region for the given entropies; inequalities that touch no vertex are
/// dropped since they do not shape the polygon.
pub fn region_from_entropies(e: &BipartiteEntropies, setting: Setting) -> RateRegion {
    let all = region_inequalities(e, setting);
    let vertices = polygon_vertices(&all);
    let inequalities = all.into_iter().filter(|q| vertices.iter().any(|v| q.slack(*v).abs() <= FEAS_TOL)).collect();
    RateRegion { setting, inequalities, vertices }
}

pub fn region(rho: &DensityMatrix, setting: Setting) -> Result<RateRegion> {
    region_split(rho, &Bipartition::first_vs_rest(rho)?, setting)
}

pub fn region_split(rho: &DensityMatrix, split: &Bipartition, setting: Setting) -> Result<RateRegion> {
    Ok(region_from_entropies(&BipartiteEntropies::of(rho, split)?, setting))
}

/// True when the no-noise, no-communication region already reaches the
/// global rate on its sum-rate face.
pub fn no_bound_randomness_check(rho: &DensityMatrix) -> Result<bool> {
    let split = Bipartition::first_vs_rest(rho)?;
    let e = BipartiteEntropies::of(rho, &split)?;
    let rg = e.global_rate();
    if rg <= FEAS_TOL {
        return Ok(true);
    }
    Ok(region_from_entropies(&e, Setting::NoCommNoNoise).max_sum() >= rg - FEAS_TOL)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OneSidedReport {
    pub lower_bound: f64,
    pub upper_half_entropy: f64,
    pub upper_er_hash: f64,
    pub r_g: f64,
    pub exact: Option<f64>,
}

impl OneSidedReport {
    pub fn best_upper(&self) -> f64 {
        self.upper_half_entropy.min(self.upper_er_hash)
    }
}

/// Best single-copy one-sided rate over subsets `T` of Bob's subsystems sent
/// to Alice through dephasing channels: `log|AB| − max{S(B∖T), S(E T_copy)}`.
fn dephasing_send_lower_bound(rho: &DensityMatrix, split: &Bipartition, e: &BipartiteEntropies) -> Result<f64> {
    let log_ab = e.log_a + e.log_b;
    let mut best = log_ab - e.s_b.max(e.s_ab);
    let psi = rho.purify("__eve")?;
    let nb = split.bob.len();
    if nb > 12 {
        return Ok(best);
    }
    for mask in 1u32..(1 << nb) {
        let sent: Vec<&String> = (0..nb).filter(|k| mask & (1 << k) != 0).map(|k| &split.bob[k]).collect();
        let kept: Vec<&String> = (0..nb).filter(|k| mask & (1 << k) == 0).map(|k| &split.bob[k]).collect();
        let grown: usize = sent.iter().map(|l| psi.layout().dim_of(l).unwrap_or(1)).product();
        if psi.dim() * grown > SEARCH_DIM_CAP {
            continue;
        }
        let mut state = psi.clone();
        let mut eve = vec!["__eve".to_string()];
        for l in &sent {
            let copy = format!("__copy_{l}");
            state = state.copy_to_new(l, &copy)?;
            eve.push(copy);
        }
        let s_kept = if kept.is_empty() { 0.0 } else { crate::entropy::von_neumann(&state.marginal(&kept)?) };
        let s_eve = crate::entropy::von_neumann(&state.marginal(&eve)?);
        best = best.max(log_ab - s_kept.max(s_eve));
    }
    Ok(best)
}

pub fn one_sided(rho: &DensityMatrix) -> Result<OneSidedReport> {
    one_sided_split(rho, &Bipartition::first_vs_rest(rho)?)
}

pub fn one_sided_split(rho: &DensityMatrix, split: &Bipartition) -> Result<OneSidedReport> {
    let e = BipartiteEntropies::of(rho, split)?;
    let log_ab = e.log_a + e.log_b;
    let r_g = e.global_rate();
    let upper_half_entropy = log_ab - 0.5 * e.s_a.max(e.s_b);
    let e_hash = 0.0f64.max(e.s_a - e.s_ab).max(e.s_b - e.s_ab);
    let upper_er_hash = log_ab - (0.5 * (e_hash + e.s_ab)).max(e.s_ab);
    let pure = rho.purity() >= 1.0 - PURE_TOL;
    let pure_value = log_ab - 0.5 * e.s_a;
    let mut lower_bound = dephasing_send_lower_bound(rho, split, &e)?;
    if pure {
        lower_bound = lower_bound.max(pure_value);
    }
    let best_upper = upper_half_entropy.min(upper_er_hash);
    let exact = if pure {
        Some(pure_value)
    } else if e.s_b <= e.s_ab + 1e-12 {
        Some(r_g)
    } else if (best_upper - lower_bound).abs() <= FEAS_TOL {
        Some(lower_bound)
    } else {
        None
    };
    Ok(OneSidedReport { lower_bound, upper_half_entropy, upper_er_hash, r_g, exact })
}

/// `(R_A, K_D, R_A + ½K_D)` for a pure state on `d × d`.
pub fn key_complementarity(rho: &DensityMatrix, d: usize) -> Result<(f64, f64, f64)> {
    if rho.purity() < 1.0 - PURE_TOL {
        return Err(Error::InvalidState("key complementarity needs a pure state".into()));
    }
    let split = Bipartition::first_vs_rest(rho)?;
    let l = rho.layout();
    if l.dim_of_all(&split.alice)? != d || l.dim_of_all(&split.bob)? != d {
        return Err(Error::DimensionMismatch(format!("both parties must have dimension {d}")));
    }
    let s_a = marginal_entropy(rho, &split.alice)?;
    let log_d = (d as f64).log2();
    let r_a = 2.0 * log_d - 0.5 * s_a;
    Ok((r_a, s_a, r_a + 0.5 * s_a))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PingPong {
    pub r_a: f64,
    pub r_b: f64,
    pub ratio: f64,
    pub n_a: f64,
    pub n_b: f64,
}

/// Rates of the alternating protocol after `rounds` rounds, ending on Alice's side.
pub fn pingpong_rates(e: &BipartiteEntropies, rounds: u32) -> Result<PingPong> {
    let sae = e.s_a_given_e();
    let sbe = e.s_b_given_e();
    if sae <= 1e-12 || sbe <= 1e-12 {
        return Err(Error::Degenerate(format!("needs S(A|E) > 0 and S(B|E) > 0, got {sae} and {sbe}")));
    }
    let r = e.s_a * e.s_b / (sae * sbe);
    if r <= 1.0 + 1e-12 {
        return Err(Error::Degenerate(format!("ratio r = {r} must exceed 1")));
    }
    let l = rounds as i32;
    let n_a = (r.powi(l + 2) - 1.0) / ((r - 1.0) * sae);
    let n_b = e.s_b * (r.powi(l + 1) - 1.0) / ((r - 1.0) * sae * sbe);
    let n = n_a + n_b;
    let i = e.mutual_information();
    Ok(PingPong {
        r_a: n_a / n * i + e.log_a - e.s_a,
        r_b: n_b / n * i + e.log_b - e.s_b,
        ratio: r,
        n_a,
        n_b,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::entropy::shannon;
    use crate::qmath::{PureState, SubsystemLayout};

    fn ab() -> SubsystemLayout {
        SubsystemLayout::new(["A", "B"], [2, 2]).unwrap()
    }

    fn phi() -> DensityMatrix {
        PureState::maximally_entangled("A", "B", 2).unwrap().density()
    }

    fn sigma() -> DensityMatrix {
        DensityMatrix::diagonal(ab(), &[0.5, 0.0, 0.0, 0.5]).unwrap()
    }

    fn close_pts(a: &[(f64, f64)], b: &[(f64, f64)]) -> bool {
        a.len() == b.len() && a.iter().zip(b).all(|(p, q)| (p.0 - q.0).abs() < 1e-9 && (p.1 - q.1).abs() < 1e-9)
    }

    #[test]
    fn global_rate_examples() {
        assert!((global_rate(&phi()) - 2.0).abs() < 1e-12);
        assert!(global_rate(&DensityMatrix::maximally_mixed(ab())).abs() < 1e-12);
        assert!((global_rate(&sigma()) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn region_examples() {
        let r = region(&phi(), Setting::NoCommNoNoise).unwrap();
        assert!(close_pts(&r.vertices, &[(1.0, 0.0), (1.0, 1.0), (0.0, 1.0), (0.0, 0.0)]));
        let r = region(&phi(), Setting::NoiseNoComm).unwrap();
        assert!(close_pts(&r.vertices, &[(2.0, 0.0), (0.0, 2.0), (0.0, 0.0)]));
        let r = region(&sigma(), Setting::NoiseComm).unwrap();
        assert!(close_pts(&r.vertices, &[(1.0, 0.0), (0.0, 1.0), (0.0, 0.0)]));
    }

    #[test]
    fn region_invariants_hold() {
        for rho in [phi(), sigma(), DensityMatrix::maximally_mixed(ab())] {
            for s in Setting::ALL {
                let r = region(&rho, s).unwrap();
                assert!(r.contains((0.0, 0.0)));
                for q in &r.inequalities {
                    assert!(r.vertices.iter().any(|v| q.slack(*v).abs() < 1e-9));
                }
            }
        }
    }

    #[test]
    fn csv_closes_polygon() {
        let csv = region(&phi(), Setting::NoiseNoComm).unwrap().to_csv();
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], "R_A,R_B");
        assert_eq!(lines[1], lines[lines.len() - 1]);
        assert_eq!(lines.len(), 5);
    }

    #[test]
    fn corollary_examples() {
        let zero = DensityMatrix::diagonal(ab(), &[1.0, 0.0, 0.0, 0.0]).unwrap();
        for rho in [phi(), sigma(), zero, DensityMatrix::maximally_mixed(ab())] {
            assert!(no_bound_randomness_check(&rho).unwrap());
        }
    }

    #[test]
    fn one_sided_paper_values() {
        assert!((one_sided(&phi()).unwrap().exact.unwrap() - 1.5).abs() < 1e-9);
        assert!((one_sided(&sigma()).unwrap().exact.unwrap() - 1.0).abs() < 1e-9);
        let both = phi().tensor(&sigma().relabel("A", "A2").unwrap().relabel("B", "B2").unwrap()).unwrap();
        let split = Bipartition::new(&both, &["A", "A2"], &["B", "B2"]).unwrap();
        let rep = one_sided_split(&both, &split).unwrap();
        assert!((rep.exact.unwrap() - 3.0).abs() < 1e-9, "{rep:?}");
        assert!((rep.lower_bound - 3.0).abs() < 1e-9);
    }

    #[test]
    fn key_complementarity_examples() {
        let prod = DensityMatrix::diagonal(ab(), &[1.0, 0.0, 0.0, 0.0]).unwrap();
        let (ra, kd, sum) = key_complementarity(&prod, 2).unwrap();
        assert!((ra - 2.0).abs() < 1e-12 && kd.abs() < 1e-12 && (sum - 2.0).abs() < 1e-12);
        let (ra, kd, sum) = key_complementarity(&phi(), 2).unwrap();
        assert!((ra - 1.5).abs() < 1e-12 && (kd - 1.0).abs() < 1e-12 && (sum - 2.0).abs() < 1e-12);
        let v = crate::qmath::linalg::CVector::from_vec(vec![
            crate::qmath::linalg::real(0.8f64.sqrt()),
            crate::qmath::linalg::ZERO,
            crate::qmath::linalg::ZERO,
            crate::qmath::linalg::real(0.2f64.sqrt()),
        ]);
        let partial = PureState::new(ab(), v).unwrap().density();
        let h = shannon(&[0.8, 0.2]);
        let (ra, kd, sum) = key_complementarity(&partial, 2).unwrap();
        assert!((ra - (2.0 - 0.5 * h)).abs() < 1e-10 && (kd - h).abs() < 1e-10 && (sum - 2.0).abs() < 1e-10);
        assert!(key_complementarity(&sigma(), 2).is_err());
    }

    fn isotropic() -> DensityMatrix {
        phi().mix(&DensityMatrix::maximally_mixed(ab()), 0.9).unwrap()
    }

    #[test]
    fn pingpong_isotropic_limit() {
        let e = BipartiteEntropies::of(&isotropic(), &Bipartition::first_vs_rest(&isotropic()).unwrap()).unwrap();
        let s_ab = shannon(&[0.925, 0.025, 0.025, 0.025]);
        let pp = pingpong_rates(&e, 30).unwrap();
        assert!((pp.r_a - 1.0).abs() < 1e-6);
        assert!((pp.r_b - (1.0 - s_ab)).abs() < 1e-6);
        assert!((pp.ratio - 1.0 / (1.0 - s_ab).powi(2)).abs() < 1e-9);
        assert!((pp.ratio - 4.052).abs() < 1e-3);
    }

    #[test]
    fn pingpong_is_monotone_and_sums_to_global_rate() {
        let e = BipartiteEntropies::of(&isotropic(), &Bipartition::first_vs_rest(&isotropic()).unwrap()).unwrap();
        let mut prev = pingpong_rates(&e, 0).unwrap();
        for l in 1..20 {
            let pp = pingpong_rates(&e, l).unwrap();
            assert!(pp.r_a <= prev.r_a + 1e-12 && pp.r_b >= prev.r_b - 1e-12);
            assert!((pp.r_a + pp.r_b - e.global_rate()).abs() < 1e-12);
            prev = pp;
        }
    }

    #[test]
    fn pingpong_degenerate_inputs() {
        let e = BipartiteEntropies::of(&phi(), &Bipartition::first_vs_rest(&phi()).unwrap()).unwrap();
        assert!(matches!(pingpong_rates(&e, 5), Err(Error::Degenerate(_))));
    }
}
