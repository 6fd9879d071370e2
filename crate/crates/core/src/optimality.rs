//! Energy comparisons, optimal and *-optimal minimal realizations, unitary
//! similarity, defect functions, and the structural checks built on them.
//!
//! For a minimal passive `Σ = (A, B, C; D)` every minimal passive realization of
//! the same transfer function is, up to a basis change, the same four blocks with
//! another state Gram `H`. The optimal Gram is the limit of the Riccati recursion
//!
//! ```text
//! H_{k+1} = A^H H A + C^H G_Y C + L R^+ L^H,
//! L = A^H H B + C^H G_Y D,   R = G_U - B^H H B - D^H G_Y D,
//! ```
//!
//! started at `H_0 = 0`. `H_k` is the Gram of the projection of the state onto
//! the span of the first `k` observable blocks of the co-isometric dilation, so the
//! limit is the energy form of the first minimal restriction of the conservative
//! dilation. The *-optimal Gram is `G H'^{-1} G` with `H'` the optimal Gram of the
//! dual system.

use rand::Rng;
use serde::Serialize;

use crate::colligation::{resolvent, Colligation, Realization};
use crate::corpus::{complex_gaussian, random_j_unitary, rng_from_seed};
use crate::dilation::conservative_dilation;
use crate::error::{Error, Result};
use crate::indefinite::SignatureSpace;
use crate::julia::{julia_embedding, JuliaEmbedding};
use crate::kernel::{negative_squares_estimate, NegSquaresEstimate, SamplerConfig, Side, TransferSource};
use crate::linalg::{
    block2, containment_gap, eye, hermitian_part, inverse, max_abs, norm2, pinv, procrustes, solve, vstack, zeros,
    CMat, CVec, C64, DEFAULT_TOL, RANK_TOL,
};
use crate::subspaces::{
    controllable_subspace, is_minimal, is_simple, krylov_steps, minimal_restriction_first, minimal_restriction_second,
    observable_subspace,
};

/// Relative slack when two energies are declared ordered.
pub const ENERGY_TOL: f64 = 1e-9;
pub const DEFAULT_TRIALS: usize = 100;
pub const DEFAULT_HORIZON: usize = 12;
/// Acceptance level for similarity residuals.
pub const SIMILARITY_TOL: f64 = 1e-6;
/// Containment gap below which a dilation subspace counts as contained.
pub const GAP_TOL: f64 = 1e-6;

/// Pseudo-inverse cutoff inside the Riccati map; input directions that carry
/// no energy exchange drop out instead of being inverted. Near a singular limit
/// both `L v` and the eigenvalue vanish linearly, so dropping an eigenvalue below
/// the cut moves the fixed point by about the cut, while a smaller cut lets
/// rounding noise in that eigenvalue be amplified by its inverse.
const RICCATI_CUT: f64 = 1e-8;
/// Acceptance level for the relative fixed-point residual; matches the cut.
const RICCATI_RESIDUAL_TOL: f64 = 1e-9;
/// Largest tolerated distance between the doubling and value-iteration answers.
const RICCATI_AGREEMENT_TOL: f64 = 1e-6;
const MAX_DOUBLINGS: usize = 100;
const MAX_NEWTON: usize = 20;
const MAX_VALUE_STEPS: usize = 20_000;

// ---------------------------------------------------------------------------
// Energy

/// Indefinite square norm of the state reached from rest.
#[derive(Debug, Clone, PartialEq)]
pub struct EnergyTrace {
    pub inputs: Vec<CVec>,
    /// `x = Σ_k A^k B u_k`.
    pub state: CVec,
    pub value: f64,
    /// Imaginary part of `x^H G x`; roundoff only.
    pub imag_residue: f64,
}

pub fn energy(sys: &Colligation, inputs: &[CVec]) -> Result<EnergyTrace> {
    if inputs.is_empty() {
        return Err(Error::BadParameter("energy needs at least one input vector".into()));
    }
    let m = sys.input_dim();
    let mut x = CVec::zeros(sys.state_dim());
    for (k, u) in inputs.iter().enumerate().rev() {
        if u.len() != m {
            return Err(Error::ShapeMismatch(format!("input {k} has length {}, expected {m}", u.len())));
        }
        x = sys.a() * x + sys.b() * u;
    }
    let q = (x.adjoint() * sys.state().gram() * &x)[(0, 0)];
    Ok(EnergyTrace { inputs: inputs.to_vec(), state: x, value: q.re, imag_residue: q.im.abs() })
}

/// Empirical order between the state energies of two realizations.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum EnergyOrder {
    /// First never above second.
    Le,
    /// First never below second.
    Ge,
    Equal,
    Incomparable,
}

impl EnergyOrder {
    pub fn as_str(&self) -> &'static str {
        match self {
            EnergyOrder::Le => "le",
            EnergyOrder::Ge => "ge",
            EnergyOrder::Equal => "equal",
            EnergyOrder::Incomparable => "incomparable",
        }
    }

    /// Whether the first system is at most the second on every trial.
    pub fn first_le(&self) -> bool {
        matches!(self, EnergyOrder::Le | EnergyOrder::Equal)
    }

    pub fn first_ge(&self) -> bool {
        matches!(self, EnergyOrder::Ge | EnergyOrder::Equal)
    }
}

/// An input sequence separating two energies.
#[derive(Debug, Clone, PartialEq)]
pub struct EnergyWitness {
    pub trial: usize,
    pub inputs: Vec<CVec>,
    pub first: f64,
    pub second: f64,
}

/// Sampled energy comparison. This is evidence, never a proof of optimality.
#[derive(Debug, Clone, PartialEq)]
pub struct OptimalityComparison {
    pub order: EnergyOrder,
    pub trials: usize,
    pub horizon: usize,
    pub seed: u64,
    /// Trials where the first energy exceeded the second beyond tolerance.
    pub first_above: usize,
    pub second_above: usize,
    pub witness_first_above: Option<EnergyWitness>,
    pub witness_second_above: Option<EnergyWitness>,
    /// Largest scaled gap `(E_1 - E_2) / scale` seen in either direction.
    pub max_gap: f64,
}

pub fn compare_optimality(
    s1: &Colligation,
    s2: &Colligation,
    trials: usize,
    horizon: usize,
    seed: u64,
) -> Result<OptimalityComparison> {
    compare_optimality_tol(s1, s2, trials, horizon, seed, ENERGY_TOL)
}

/// As [`compare_optimality`] with an explicit relative tolerance.
///
/// Energies are compared relative to `1 + |x_1|^2 ||G_1|| + |x_2|^2 ||G_2||`, since
/// indefinite energies can cancel far below the size of the states.
pub fn compare_optimality_tol(
    s1: &Colligation,
    s2: &Colligation,
    trials: usize,
    horizon: usize,
    seed: u64,
    tol: f64,
) -> Result<OptimalityComparison> {
    if trials == 0 || horizon == 0 {
        return Err(Error::BadParameter("comparison needs at least one trial and a positive horizon".into()));
    }
    require_same_channels(s1, s2)?;
    let depth = horizon.max(s1.state_dim() + s2.state_dim()) + 1;
    let m1 = s1.markov_parameters(depth);
    let m2 = s2.markov_parameters(depth);
    let mtol = DEFAULT_TOL * s1.scale().max(s2.scale()).powi(2);
    if let Some((index, residual)) = m1.first_mismatch(&m2, mtol) {
        return Err(Error::TransferMismatch { index, residual });
    }

    let mut rng = rng_from_seed(seed);
    let m = s1.input_dim();
    let g1 = norm2(s1.state().gram());
    let g2 = norm2(s2.state().gram());
    let mut out = OptimalityComparison {
        order: EnergyOrder::Equal,
        trials,
        horizon,
        seed,
        first_above: 0,
        second_above: 0,
        witness_first_above: None,
        witness_second_above: None,
        max_gap: 0.0,
    };
    for trial in 0..trials {
        let inputs = sample_inputs(&mut rng, m, horizon);
        let e1 = energy(s1, &inputs)?;
        let e2 = energy(s2, &inputs)?;
        let scale = 1.0 + e1.state.norm_squared() * g1 + e2.state.norm_squared() * g2;
        let gap = (e1.value - e2.value) / scale;
        if gap.abs() > out.max_gap.abs() {
            out.max_gap = gap;
        }
        let witness = || EnergyWitness { trial, inputs: inputs.clone(), first: e1.value, second: e2.value };
        if gap > tol {
            out.first_above += 1;
            out.witness_first_above.get_or_insert_with(witness);
        } else if gap < -tol {
            out.second_above += 1;
            out.witness_second_above.get_or_insert_with(witness);
        }
    }
    out.order = match (out.first_above, out.second_above) {
        (0, 0) => EnergyOrder::Equal,
        (0, _) => EnergyOrder::Le,
        (_, 0) => EnergyOrder::Ge,
        _ => EnergyOrder::Incomparable,
    };
    Ok(out)
}

fn require_same_channels(s1: &Colligation, s2: &Colligation) -> Result<()> {
    let same =
        |a: &SignatureSpace, b: &SignatureSpace| a.dim() == b.dim() && max_abs(&(a.gram() - b.gram())) <= DEFAULT_TOL;
    if !same(s1.input(), s2.input()) {
        return Err(Error::ShapeMismatch("input spaces differ".into()));
    }
    if !same(s1.output(), s2.output()) {
        return Err(Error::ShapeMismatch("output spaces differ".into()));
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// Optimal Grams

/// A converged optimal (or *-optimal) state Gram with solver diagnostics.
#[derive(Debug, Clone, PartialEq)]
pub struct GramSolution {
    pub gram: CMat,
    pub doubling_steps: usize,
    pub newton_steps: usize,
    pub value_steps: usize,
    /// Relative fixed-point residual of the Riccati map.
    pub residual: f64,
    /// Relative distance between the doubling answer and plain value iteration.
    pub agreement: f64,
}

struct RiccatiData {
    a: CMat,
    b: CMat,
    c: CMat,
    d: CMat,
    gu: CMat,
    gy: CMat,
}

impl RiccatiData {
    fn of(sys: &Colligation) -> Self {
        RiccatiData {
            a: sys.a().clone(),
            b: sys.b().clone(),
            c: sys.c().clone(),
            d: sys.d().clone(),
            gu: sys.input().gram().clone(),
            gy: sys.output().gram().clone(),
        }
    }

    /// One Riccati step and its closed-loop matrix.
    fn step(&self, h: &CMat) -> (CMat, CMat) {
        let r = hermitian_part(&(&self.gu - self.b.adjoint() * h * &self.b - self.d.adjoint() * &self.gy * &self.d));
        let l = self.a.adjoint() * h * &self.b + self.c.adjoint() * &self.gy * &self.d;
        let rp = pinv(&r, RICCATI_CUT);
        let f = self.a.adjoint() * h * &self.a + self.c.adjoint() * &self.gy * &self.c + &l * &rp * l.adjoint();
        let closed = &self.a + &self.b * &rp * l.adjoint();
        (hermitian_part(&f), closed)
    }

    fn residual(&self, h: &CMat) -> f64 {
        let (f, _) = self.step(h);
        rel(&(f - h), h)
    }
}

fn rel(diff: &CMat, base: &CMat) -> f64 {
    max_abs(diff) / (1.0 + max_abs(base))
}

/// Structure-preserving doubling: the k-th iterate equals the `2^k`-th Riccati iterate.
fn doubling(data: &RiccatiData) -> Option<(CMat, usize)> {
    let n = data.a.nrows();
    let r0 = hermitian_part(&(&data.gu - data.d.adjoint() * &data.gy * &data.d));
    let r0p = pinv(&r0, RICCATI_CUT);
    let s = data.c.adjoint() * &data.gy * &data.d;
    let mut ak = &data.a + &data.b * &r0p * s.adjoint();
    let mut gk = -(&data.b * &r0p * data.b.adjoint());
    let mut hk = hermitian_part(&(data.c.adjoint() * &data.gy * &data.c + &s * &r0p * s.adjoint()));
    let id = eye(n);
    for k in 0..MAX_DOUBLINGS {
        let w = inverse(&(&id + &gk * &hk))?;
        let an = &ak * &w * &ak;
        let gn = hermitian_part(&(&gk + &ak * &w * &gk * ak.adjoint()));
        let hn = hermitian_part(&(&hk + ak.adjoint() * &hk * &w * &ak));
        let change = rel(&(&hn - &hk), &hn);
        if !change.is_finite() {
            return None;
        }
        ak = an;
        gk = gn;
        hk = hn;
        if change <= 4.0 * f64::EPSILON {
            return Some((hk, k + 1));
        }
    }
    Some((hk, MAX_DOUBLINGS))
}

/// Solves `X - M^H X M = Q` through its Kronecker form.
fn stein(m: &CMat, q: &CMat) -> Option<CMat> {
    let n = m.nrows();
    let mh = m.adjoint();
    let mut k = eye(n * n);
    for j in 0..n {
        for l in 0..n {
            let t = m[(l, j)];
            if t == C64::new(0.0, 0.0) {
                continue;
            }
            for i in 0..n {
                for p in 0..n {
                    k[(j * n + i, l * n + p)] -= t * mh[(i, p)];
                }
            }
        }
    }
    let rhs = CMat::from_column_slice(n * n, 1, q.as_slice());
    let x = solve(&k, &rhs)?;
    if x.iter().any(|v| !v.re.is_finite() || !v.im.is_finite()) {
        return None;
    }
    Some(CMat::from_column_slice(n, n, x.as_slice()))
}

fn newton_polish(data: &RiccatiData, start: CMat) -> (CMat, usize, f64) {
    let mut h = start;
    let mut res = data.residual(&h);
    let mut steps = 0;
    for _ in 0..MAX_NEWTON {
        if res <= 4.0 * f64::EPSILON {
            break;
        }
        let (f, closed) = data.step(&h);
        let Some(dx) = stein(&closed, &(f - &h)) else { break };
        let next = hermitian_part(&(&h + dx));
        let next_res = data.residual(&next);
        if !(next_res < res) {
            break;
        }
        h = next;
        res = next_res;
        steps += 1;
    }
    (h, steps, res)
}

/// Plain value iteration from zero, returning the iterate with the smallest increment.
fn value_iteration(data: &RiccatiData) -> (CMat, usize, f64) {
    let n = data.a.nrows();
    let mut h = zeros(n, n);
    let mut best = (h.clone(), f64::INFINITY);
    let mut steps = 0;
    for k in 0..MAX_VALUE_STEPS {
        let (next, _) = data.step(&h);
        let inc = rel(&(&next - &h), &next);
        h = next;
        steps = k + 1;
        if !inc.is_finite() {
            break;
        }
        if inc < best.1 {
            best = (h.clone(), inc);
        }
        // The limit can repel once unstable modes are present; stop when drifting away.
        if inc <= 4.0 * f64::EPSILON || inc > 1e6 * best.1 {
            break;
        }
    }
    (best.0, steps, best.1)
}

/// Optimal state Gram for the four blocks of `sys`. Only the operator blocks and
/// the channel Grams enter; the state Gram of `sys` does not.
pub fn optimal_gram(sys: &Colligation) -> Result<GramSolution> {
    let data = RiccatiData::of(sys);
    let n = sys.state_dim();
    if n == 0 {
        return Ok(GramSolution {
            gram: zeros(0, 0),
            doubling_steps: 0,
            newton_steps: 0,
            value_steps: 0,
            residual: 0.0,
            agreement: 0.0,
        });
    }
    let (vi, value_steps, vi_inc) = value_iteration(&data);
    let (candidate, doubling_steps) = doubling(&data).unwrap_or((vi.clone(), 0));
    let (h, newton_steps, residual) = newton_polish(&data, candidate);
    let agreement = rel(&(&h - &vi), &vi);
    if residual <= RICCATI_RESIDUAL_TOL && agreement <= RICCATI_AGREEMENT_TOL {
        return Ok(GramSolution { gram: h, doubling_steps, newton_steps, value_steps, residual, agreement });
    }
    // Fall back on the value iteration itself when it settled.
    let (h, newton_steps, residual) = newton_polish(&data, vi.clone());
    let agreement = rel(&(&h - &vi), &vi);
    if residual <= RICCATI_RESIDUAL_TOL && agreement <= RICCATI_AGREEMENT_TOL {
        return Ok(GramSolution { gram: h, doubling_steps: 0, newton_steps, value_steps, residual, agreement });
    }
    Err(Error::NotConverged(format!(
        "optimal Gram: residual {residual:.2e}, value-iteration increment {vi_inc:.2e}, agreement {agreement:.2e}"
    )))
}

/// `G H'^{-1} G` with `H'` the optimal Gram of the dual system.
pub fn star_optimal_gram(sys: &Colligation) -> Result<GramSolution> {
    let dual = optimal_gram(&sys.dual())?;
    let g = sys.state().gram();
    let inv = inverse(&dual.gram).ok_or_else(|| Error::NotConverged("dual optimal Gram is singular".into()))?;
    Ok(GramSolution { gram: hermitian_part(&(g * inv * g)), ..dual })
}

/// The optimal and *-optimal minimal realizations of a minimal passive system.
#[derive(Debug, Clone, PartialEq)]
pub struct OptimalRealizations {
    pub base: Colligation,
    pub optimal: Colligation,
    pub star_optimal: Colligation,
    pub optimal_solution: GramSolution,
    pub star_solution: GramSolution,
}

impl OptimalRealizations {
    /// Same blocks with Gram `(1 - t) H_opt + t H_*`; passive for `t` in `[0, 1]`.
    pub fn interpolate(&self, t: f64) -> Result<Colligation> {
        let h = self.optimal.state().gram().scale(1.0 - t) + self.star_optimal.state().gram().scale(t);
        self.base.with_state_gram(hermitian_part(&h))
    }

    /// Distance between the two Grams relative to their size.
    pub fn gram_gap(&self) -> f64 {
        let h1 = self.optimal.state().gram();
        let h2 = self.star_optimal.state().gram();
        max_abs(&(h1 - h2)) / (1.0 + max_abs(h1).max(max_abs(h2)))
    }
}

pub fn optimal_realizations(sys: &Colligation, tol: f64) -> Result<OptimalRealizations> {
    if !sys.is_passive(tol) {
        return Err(Error::NotPassive);
    }
    if !is_minimal(sys, RANK_TOL) {
        return Err(Error::NotMinimal);
    }
    let optimal_solution = optimal_gram(sys)?;
    let star_solution = star_optimal_gram(sys)?;
    let wrap = |e: Error| Error::NotConverged(format!("limit Gram is not a valid state space: {e}"));
    let optimal = sys.with_state_gram(optimal_solution.gram.clone()).map_err(wrap)?;
    let star_optimal = sys.with_state_gram(star_solution.gram.clone()).map_err(wrap)?;
    for (name, s) in [("optimal", &optimal), ("*-optimal", &star_optimal)] {
        if !s.is_passive(tol.max(DEFAULT_TOL)) {
            return Err(Error::NotConverged(format!("{name} realization failed the passivity check")));
        }
    }
    Ok(OptimalRealizations { base: sys.clone(), optimal, star_optimal, optimal_solution, star_solution })
}

fn require_simple_conservative(sys: &Colligation, tol: f64) -> Result<()> {
    if !sys.classify_system(tol).is_unitary() {
        return Err(Error::NotConservative);
    }
    if !is_simple(sys, RANK_TOL) {
        return Err(Error::NotSimple);
    }
    Ok(())
}

/// First minimal restriction of a simple conservative realization.
pub fn construct_optimal_minimal(sc: &Colligation, tol: f64) -> Result<Colligation> {
    require_simple_conservative(sc, tol)?;
    minimal_restriction_first(sc, RANK_TOL)
}

/// Second minimal restriction of a simple conservative realization.
pub fn construct_star_optimal_minimal(sc: &Colligation, tol: f64) -> Result<Colligation> {
    require_simple_conservative(sc, tol)?;
    minimal_restriction_second(sc, RANK_TOL)
}

// ---------------------------------------------------------------------------
// Unitary similarity

/// Residuals of `U A_1 = A_2 U`, `U B_1 = B_2`, `C_1 = C_2 U`, `U^H G_2 U = G_1`,
/// each divided by the size of the data it compares.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SimilarityResiduals {
    pub r_a: f64,
    pub r_b: f64,
    pub r_c: f64,
    pub r_j: f64,
}

impl SimilarityResiduals {
    pub fn max(&self) -> f64 {
        self.r_a.max(self.r_b).max(self.r_c).max(self.r_j)
    }

    fn intertwines(&self, tol: f64) -> bool {
        self.r_a.max(self.r_b).max(self.r_c) <= tol
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimilarityCertificate {
    /// Maps the state of the first system onto the state of the second.
    pub u: CMat,
    pub residuals: SimilarityResiduals,
}

#[derive(Debug, Clone, PartialEq)]
pub struct NotSimilarReport {
    pub reason: String,
    pub residuals: Option<SimilarityResiduals>,
    /// An invertible intertwiner exists, so the systems are similar but not isometrically.
    pub intertwiner_exists: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub enum SimilarityOutcome {
    Similar(SimilarityCertificate),
    NotSimilar(NotSimilarReport),
}

impl SimilarityOutcome {
    pub fn is_similar(&self) -> bool {
        matches!(self, SimilarityOutcome::Similar(_))
    }

    pub fn residuals(&self) -> Option<SimilarityResiduals> {
        match self {
            SimilarityOutcome::Similar(c) => Some(c.residuals),
            SimilarityOutcome::NotSimilar(r) => r.residuals,
        }
    }
}

fn controllability_matrix(sys: &Colligation) -> CMat {
    let n = sys.state_dim();
    let mut blocks = Vec::with_capacity(n);
    let mut x = sys.b().clone();
    for _ in 0..n {
        blocks.push(x.clone());
        x = sys.a() * x;
    }
    crate::linalg::hstack(&blocks.iter().collect::<Vec<_>>())
}

fn similarity_residuals(s1: &Colligation, s2: &Colligation, u: &CMat) -> SimilarityResiduals {
    let scale = norm2(u).max(1.0) * s1.scale().max(s2.scale());
    let gscale = norm2(u).max(1.0).powi(2) * norm2(s1.state().gram()).max(norm2(s2.state().gram()));
    SimilarityResiduals {
        r_a: norm2(&(u * s1.a() - s2.a() * u)) / scale,
        r_b: norm2(&(u * s1.b() - s2.b())) / scale,
        r_c: norm2(&(s1.c() - s2.c() * u)) / scale,
        r_j: norm2(&(s1.state().gram() - u.adjoint() * s2.state().gram() * u)) / gscale.max(1.0),
    }
}

/// Decides whether two minimal systems are unitarily similar.
///
/// `U` is fitted on the controllability matrices by least squares and then moved
/// towards the Gram-unitary group by one Newton step `U <- (U + G_2^{-1} U^{-H} G_1) / 2`.
pub fn unitary_similarity(s1: &Colligation, s2: &Colligation, tol: f64) -> Result<SimilarityOutcome> {
    require_same_channels(s1, s2)?;
    for s in [s1, s2] {
        if !is_minimal(s, RANK_TOL) {
            return Err(Error::NotMinimal);
        }
    }
    let not = |reason: String, residuals, intertwiner_exists| {
        Ok(SimilarityOutcome::NotSimilar(NotSimilarReport { reason, residuals, intertwiner_exists }))
    };
    if s1.state_dim() != s2.state_dim() {
        return not(format!("state dimensions {} and {} differ", s1.state_dim(), s2.state_dim()), None, false);
    }
    let dgap = norm2(&(s1.d() - s2.d())) / s1.scale().max(s2.scale());
    if dgap > tol {
        return not(format!("feedthrough blocks differ by {dgap:.2e}"), None, false);
    }
    let k1 = controllability_matrix(s1);
    let k2 = controllability_matrix(s2);
    let fitted = &k2 * pinv(&k1, RANK_TOL);
    let fitted_res = similarity_residuals(s1, s2, &fitted);
    let u = match inverse(&fitted) {
        Some(inv) => {
            let pulled = s2.state().gram_inv() * inv.adjoint() * s1.state().gram();
            (&fitted + pulled).scale(0.5)
        }
        None => fitted.clone(),
    };
    let residuals = similarity_residuals(s1, s2, &u);
    let fitted_u = fitted.clone();
    let (u, best) = if residuals.max() <= fitted_res.max() { (u, residuals) } else { (fitted, fitted_res) };
    if best.max() <= tol {
        return Ok(SimilarityOutcome::Similar(SimilarityCertificate { u, residuals: best }));
    }
    let intertwiner = fitted_res.intertwines(tol) && inverse(&fitted_u).is_some();
    not(format!("largest residual {:.2e} exceeds {tol:.1e}", best.max()), Some(best), intertwiner)
}

/// `B^[*] (I - w̄ A^[*])^{-1} (I - z A)^{-1} B`.
pub fn controllability_kernel(sys: &Colligation, z: C64, w: C64) -> Result<CMat> {
    let rz = resolvent(sys.a(), z)?;
    let rw = resolvent(&sys.a_adjoint(), w.conj())?;
    Ok(sys.b_adjoint() * rw * rz * sys.b())
}

// ---------------------------------------------------------------------------
// Defect functions

/// A defect function given by a state-space realization; zero width means identically zero.
#[derive(Debug, Clone, PartialEq)]
pub struct DefectFunction {
    pub side: Side,
    pub realization: Realization,
    /// The minimal realization whose Julia embedding produced the function.
    pub source: Colligation,
}

impl DefectFunction {
    /// Dimension of the defect space.
    pub fn width(&self) -> usize {
        match self.side {
            Side::Right => self.realization.output.dim(),
            Side::Left => self.realization.input.dim(),
        }
    }

    pub fn eval(&self, z: C64) -> Result<CMat> {
        self.realization.eval(z)
    }

    /// Largest spectral norm over the given points.
    pub fn max_norm(&self, points: &[C64]) -> Result<f64> {
        let mut out: f64 = 0.0;
        for &z in points {
            out = out.max(norm2(&self.eval(z)?));
        }
        Ok(out)
    }
}

/// Optimal and *-optimal sources for a transfer function given by any minimal
/// passive realization, or by a simple conservative one.
fn defect_source(source: &Colligation, side: Side, tol: f64) -> Result<Colligation> {
    if source.classify_system(tol).is_unitary() && is_simple(source, RANK_TOL) {
        return match side {
            Side::Right => construct_optimal_minimal(source, tol),
            Side::Left => construct_star_optimal_minimal(source, tol),
        };
    }
    let or = optimal_realizations(source, tol)?;
    Ok(match side {
        Side::Right => or.optimal,
        Side::Left => or.star_optimal,
    })
}

fn defect_from(sys: Colligation, side: Side, tol: f64) -> Result<DefectFunction> {
    let je = julia_embedding(&sys, tol)?;
    let realization = match side {
        Side::Right => je.phi_realization(),
        Side::Left => je.psi_realization(),
    };
    Ok(DefectFunction { side, realization, source: sys })
}

/// `φ_θ`: the defect block of the Julia embedding of an optimal minimal realization.
pub fn defect_function_right(source: &Colligation, tol: f64) -> Result<DefectFunction> {
    defect_from(defect_source(source, Side::Right, tol)?, Side::Right, tol)
}

/// `ψ_θ`: the codefect block of the Julia embedding of a *-optimal minimal realization.
pub fn defect_function_left(source: &Colligation, tol: f64) -> Result<DefectFunction> {
    defect_from(defect_source(source, Side::Left, tol)?, Side::Left, tol)
}

/// Comparison of `φ_θ^#(z) = φ_θ(z̄)^*` with `ψ_{θ^#}(z)` up to a constant unitary factor.
#[derive(Debug, Clone, PartialEq)]
pub struct RelatedDefectReport {
    pub widths: (usize, usize),
    pub samples: usize,
    /// Relative Procrustes residual; infinite when the widths differ.
    pub residual: f64,
    pub factor: Option<CMat>,
}

pub fn related_defect_check(source: &Colligation, points: &[C64], tol: f64) -> Result<RelatedDefectReport> {
    let phi = defect_function_right(source, tol)?;
    let psi = defect_function_left(&source.dual(), tol)?;
    let widths = (phi.width(), psi.width());
    if widths.0 != widths.1 {
        return Ok(RelatedDefectReport { widths, samples: points.len(), residual: f64::INFINITY, factor: None });
    }
    let gu_inv = source.input().gram_inv();
    let mut lhs = Vec::with_capacity(points.len());
    let mut rhs = Vec::with_capacity(points.len());
    for &z in points {
        lhs.push(gu_inv * phi.eval(z.conj())?.adjoint());
        rhs.push(psi.eval(z)?);
    }
    let p = vstack(&lhs.iter().collect::<Vec<_>>());
    let q = vstack(&rhs.iter().collect::<Vec<_>>());
    let (v, residual) = procrustes(&p, &q).ok_or_else(|| Error::ShapeMismatch("defect samples".into()))?;
    Ok(RelatedDefectReport { widths, samples: points.len(), residual, factor: Some(v) })
}

// ---------------------------------------------------------------------------
// Structural checks

/// Containment gap of the controllable subspace inside the observable subspace.
pub fn opti_cont_gap(sys: &Colligation) -> f64 {
    let xc = controllable_subspace(sys, RANK_TOL);
    let xo = observable_subspace(sys, RANK_TOL);
    xc.containment_gap(&xo)
}

/// `X^c ⊆ X^o` within `1e-8`, as required of an optimal system.
pub fn opti_cont_check(sys: &Colligation) -> bool {
    opti_cont_gap(sys) <= crate::linalg::SUBSPACE_TOL
}

/// Krylov settings for containment tests inside a conservative dilation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ContainmentConfig {
    /// Steps spent on the subspace being tested; `None` means `state_dim + 2`.
    pub probe_steps: Option<usize>,
    /// Largest number of steps spent on the ambient subspace; doubled from 16.
    pub max_steps: usize,
    pub gap_tol: f64,
}

impl Default for ContainmentConfig {
    fn default() -> Self {
        ContainmentConfig { probe_steps: None, max_steps: 128, gap_tol: GAP_TOL }
    }
}

/// Gaps of `X^c ⊆ X^o` and `X^o ⊆ X^c` in the conservative dilation of `sys`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DilationContainment {
    pub controllable_in_observable: f64,
    pub observable_in_controllable: f64,
    pub probe_steps: usize,
    pub ambient_steps: usize,
    pub depth: usize,
}

/// The dilation tails grow one cell per step, so a dilation of depth `k + 1`
/// represents the first `k` blocks of each Krylov sequence exactly.
pub fn dilation_containment(sys: &Colligation, config: &ContainmentConfig, tol: f64) -> Result<DilationContainment> {
    let probe = config.probe_steps.unwrap_or(sys.state_dim() + 2).max(1);
    let mut ambient = 16usize.max(probe);
    let mut previous = [f64::INFINITY; 2];
    loop {
        let depth = ambient + 1;
        let dil = conservative_dilation(sys, depth, tol)?;
        let hat = &dil.dilated;
        let b = hat.b();
        let ca = hat.c_adjoint();
        let a = hat.a();
        let aa = hat.a_adjoint();
        let xc_probe = krylov_steps(a, b, probe - 1, RANK_TOL);
        let xo_probe = krylov_steps(&aa, &ca, probe - 1, RANK_TOL);
        let xc = krylov_steps(a, b, ambient - 1, RANK_TOL);
        let xo = krylov_steps(&aa, &ca, ambient - 1, RANK_TOL);
        let out = DilationContainment {
            controllable_in_observable: containment_gap(&xc_probe, &xo),
            observable_in_controllable: containment_gap(&xo_probe, &xc),
            probe_steps: probe,
            ambient_steps: ambient,
            depth,
        };
        let gaps = [out.controllable_in_observable, out.observable_in_controllable];
        // Gaps of genuine containments shrink geometrically with the ambient span;
        // a gap that fails to halve on doubling is taken as final.
        let done = gaps.iter().zip(previous.iter()).all(|(&g, &p)| g <= config.gap_tol || g >= 0.5 * p);
        if done || ambient * 2 > config.max_steps {
            return Ok(out);
        }
        previous = gaps;
        ambient *= 2;
    }
}

/// Independently computed sides of the defect/structure equivalences.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SepontulosReport {
    pub phi_width: usize,
    pub psi_width: usize,
    /// Largest norm of `φ_θ` (resp. `ψ_θ`) at the sample points.
    pub phi_norm: f64,
    pub psi_norm: f64,
    pub phi_zero: bool,
    pub psi_zero: bool,
    pub containment: DilationContainment,
    /// The simple conservative realization is observable, controllable, minimal.
    pub sc_observable: bool,
    pub sc_controllable: bool,
    pub sc_minimal: bool,
    pub part_i: bool,
    pub part_ii: bool,
    pub part_iii: bool,
}

impl SepontulosReport {
    pub fn all_agree(&self) -> bool {
        self.part_i && self.part_ii && self.part_iii
    }
}

/// `φ_θ ≡ 0 ⇔ Σ_sc observable`, `ψ_θ ≡ 0 ⇔ Σ_sc controllable`, and both ⇔ `Σ_sc` minimal.
///
/// The defect side uses the optimal Grams; the structural side measures Krylov
/// containment inside a truncated conservative dilation of `sys`, whose simple
/// part is a simple conservative realization of the same transfer function.
pub fn sepontulos_check(sys: &Colligation, config: &ContainmentConfig, tol: f64) -> Result<SepontulosReport> {
    let phi = defect_function_right(sys, tol)?;
    let psi = defect_function_left(sys, tol)?;
    let r = 0.5 * sys.safe_radius().min(1.0);
    let pts: Vec<C64> = (0..8).map(|k| C64::from_polar(r * (0.3 + 0.7 * k as f64 / 8.0), 2.1 * k as f64)).collect();
    let zero_tol = 1e-7 * (1.0 + sys.scale());
    let phi_norm = phi.max_norm(&pts)?;
    let psi_norm = psi.max_norm(&pts)?;
    let phi_zero = phi.width() == 0 || phi_norm <= zero_tol;
    let psi_zero = psi.width() == 0 || psi_norm <= zero_tol;

    let containment = dilation_containment(sys, config, tol)?;
    let sc_observable = containment.controllable_in_observable <= config.gap_tol;
    let sc_controllable = containment.observable_in_controllable <= config.gap_tol;
    let sc_minimal = sc_observable && sc_controllable;
    Ok(SepontulosReport {
        phi_width: phi.width(),
        psi_width: psi.width(),
        phi_norm,
        psi_norm,
        phi_zero,
        psi_zero,
        containment,
        sc_observable,
        sc_controllable,
        sc_minimal,
        part_i: phi_zero == sc_observable,
        part_ii: psi_zero == sc_controllable,
        part_iii: (phi_zero && psi_zero) == sc_minimal,
    })
}

// ---------------------------------------------------------------------------
// Defect-extended transfer function

/// `Θ = [[θ, ψ_θ], [φ_θ, χ]]`, from `U ⊕ 𝔇_*` into `Y ⊕ 𝔇`.
#[derive(Debug, Clone, PartialEq)]
pub enum ExtendedTheta {
    /// The extended transfer function of one Julia embedding.
    Embedded(Colligation),
    /// Independent blocks with `χ = 0`.
    Assembled { theta: Realization, psi: Realization, phi: Realization, input: SignatureSpace, output: SignatureSpace },
}

impl ExtendedTheta {
    fn from_embedding(je: &JuliaEmbedding) -> Self {
        ExtendedTheta::Embedded(je.extended.clone())
    }
}

impl TransferSource for ExtendedTheta {
    fn input(&self) -> &SignatureSpace {
        match self {
            ExtendedTheta::Embedded(s) => s.input(),
            ExtendedTheta::Assembled { input, .. } => input,
        }
    }
    fn output(&self) -> &SignatureSpace {
        match self {
            ExtendedTheta::Embedded(s) => s.output(),
            ExtendedTheta::Assembled { output, .. } => output,
        }
    }
    fn eval(&self, z: C64) -> Result<CMat> {
        match self {
            ExtendedTheta::Embedded(s) => s.transfer_eval(z),
            ExtendedTheta::Assembled { theta, psi, phi, .. } => {
                let chi = zeros(phi.output.dim(), psi.input.dim());
                Ok(block2(&theta.eval(z)?, &psi.eval(z)?, &phi.eval(z)?, &chi))
            }
        }
    }
    fn state_dim(&self) -> usize {
        match self {
            ExtendedTheta::Embedded(s) => s.state_dim(),
            ExtendedTheta::Assembled { theta, psi, phi, .. } => theta.state_dim() + psi.state_dim() + phi.state_dim(),
        }
    }
    fn spectral_radius(&self) -> f64 {
        match self {
            ExtendedTheta::Embedded(s) => s.spectral_radius(),
            ExtendedTheta::Assembled { theta, .. } => theta.spectral_radius(),
        }
    }
}

/// How `χ` was obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ThetaRoute {
    /// From a realization that is both optimal and *-optimal.
    Embedded,
    /// No such realization was found; `χ = 0` is a probe, not a construction.
    Exploratory,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PairSimilarity {
    pub first: String,
    pub second: String,
    pub similar: bool,
    pub max_residual: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct KulmaReport {
    /// Negative index of the optimal Gram.
    pub kappa: usize,
    pub realizations: Vec<String>,
    pub pairs: Vec<PairSimilarity>,
    pub all_similar: bool,
    pub route: ThetaRoute,
    pub defect_widths: (usize, usize),
    pub estimate: NegSquaresEstimate,
    pub kappa_matches: bool,
    /// `κ̂(Θ) = κ` exactly when all sampled pairs are similar.
    pub agree: bool,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KulmaConfig {
    pub sampler: SamplerConfig,
    pub similarity_tol: f64,
    /// Seed for the extra basis-changed realization.
    pub seed: u64,
}

impl Default for KulmaConfig {
    fn default() -> Self {
        KulmaConfig { sampler: SamplerConfig::default(), similarity_tol: SIMILARITY_TOL, seed: 0 }
    }
}

/// Pairwise similarity of sampled minimal passive realizations against the
/// negative squares of the defect-extended transfer function.
pub fn kulma_check(sys: &Colligation, config: &KulmaConfig, tol: f64) -> Result<KulmaReport> {
    let or = optimal_realizations(sys, tol)?;
    let kappa = or.optimal.kappa();
    let mut rng = rng_from_seed(config.seed);
    let w = random_j_unitary(or.optimal.state(), &mut rng);
    let rotated = or.optimal.change_basis(&inverse(&w.matrix).ok_or(Error::NotConverged("basis change".into()))?)?;
    let sampled = [
        ("optimal".to_string(), or.optimal.clone()),
        ("star_optimal".to_string(), or.star_optimal.clone()),
        ("midpoint".to_string(), or.interpolate(0.5)?),
        ("optimal_rotated".to_string(), rotated),
    ];
    let mut pairs = Vec::new();
    let mut opt_star_similar = false;
    for i in 0..sampled.len() {
        for j in i + 1..sampled.len() {
            let outcome = unitary_similarity(&sampled[i].1, &sampled[j].1, config.similarity_tol)?;
            if i == 0 && j == 1 {
                opt_star_similar = outcome.is_similar();
            }
            pairs.push(PairSimilarity {
                first: sampled[i].0.clone(),
                second: sampled[j].0.clone(),
                similar: outcome.is_similar(),
                max_residual: outcome.residuals().map(|r| r.max()),
            });
        }
    }
    let all_similar = pairs.iter().all(|p| p.similar);

    let je_opt = julia_embedding(&or.optimal, tol)?;
    let (route, theta) = if opt_star_similar {
        (ThetaRoute::Embedded, ExtendedTheta::from_embedding(&je_opt))
    } else {
        let je_star = julia_embedding(&or.star_optimal, tol)?;
        let psi = je_star.psi_realization();
        let phi = je_opt.phi_realization();
        let input = sys.input().direct_sum(&psi.input);
        let output = sys.output().direct_sum(&phi.output);
        (ThetaRoute::Exploratory, ExtendedTheta::Assembled { theta: sys.realization(), psi, phi, input, output })
    };
    let defect_widths = (
        TransferSource::output(&theta).dim() - sys.output_dim(),
        TransferSource::input(&theta).dim() - sys.input_dim(),
    );
    let estimate = negative_squares_estimate(&theta, &config.sampler)?;
    // A realization of Θ with state index κ caps the estimate at κ; otherwise an
    // equality needs a stabilized trace before it means anything.
    let conclusive = route == ThetaRoute::Embedded || estimate.kappa_hat > kappa || estimate.stabilized;
    if !conclusive {
        return Err(Error::Inconclusive(format!(
            "negative squares of the extended function not stabilized ({} rounds stable)",
            estimate.stable_rounds
        )));
    }
    let kappa_matches = estimate.kappa_hat == kappa;
    Ok(KulmaReport {
        kappa,
        realizations: sampled.iter().map(|(n, _)| n.clone()).collect(),
        pairs,
        all_similar,
        route,
        defect_widths,
        estimate,
        kappa_matches,
        agree: kappa_matches == all_similar,
    })
}

/// Random complex Gaussian input sequences, exposed for reproducible witnesses.
pub fn sample_inputs<R: Rng>(rng: &mut R, input_dim: usize, horizon: usize) -> Vec<CVec> {
    (0..horizon).map(|_| complex_gaussian(rng, input_dim, 1).column(0).into_owned()).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{blaschke_example, mixed_example, random_j_unitary_seeded, reciprocal_blaschke_example};
    use crate::linalg::{c, from_real, min_eig, r};

    fn unit_input(v: f64) -> Vec<CVec> {
        vec![CVec::from_element(1, r(v))]
    }

    #[test]
    fn energy_of_anti_hilbert_mode_is_negative() {
        let s = reciprocal_blaschke_example(0.5).unwrap();
        let e = energy(&s, &unit_input(1.0)).unwrap();
        assert!((e.state[0] - r(-3f64.sqrt())).norm() < 1e-12);
        assert!((e.value + 3.0).abs() < 1e-12);
        assert!(e.imag_residue < 1e-12);
        assert!(energy(&s, &[]).is_err());
    }

    #[test]
    fn energy_without_input_coupling_vanishes() {
        let s = Colligation::new(
            SignatureSpace::hilbert(1),
            SignatureSpace::hilbert(1),
            SignatureSpace::hilbert(1),
            from_real(1, 1, &[0.5]),
            zeros(1, 1),
            from_real(1, 1, &[0.5]),
            from_real(1, 1, &[0.5]),
        )
        .unwrap();
        assert_eq!(energy(&s, &unit_input(2.0)).unwrap().value, 0.0);
    }

    #[test]
    fn stein_solution_satisfies_equation() {
        let m = from_real(2, 2, &[0.3, 0.2, -0.1, 0.5]);
        let q = from_real(2, 2, &[1.0, 0.2, 0.2, 2.0]);
        let x = stein(&m, &q).unwrap();
        assert!(max_abs(&(&x - m.adjoint() * &x * &m - q)) < 1e-12);
    }

    #[test]
    fn comparison_with_itself_is_equal() {
        let s = mixed_example();
        let cmp = compare_optimality(&s, &s, 20, 12, 3).unwrap();
        assert_eq!(cmp.order, EnergyOrder::Equal);
        let other = blaschke_example(0.5).unwrap();
        assert!(matches!(compare_optimality(&s, &other, 5, 4, 0), Err(Error::TransferMismatch { .. })));
    }

    #[test]
    fn conservative_system_is_its_own_optimal_realization() {
        let s = reciprocal_blaschke_example(0.5).unwrap();
        let h = optimal_gram(&s).unwrap();
        assert!(max_abs(&(&h.gram - s.state().gram())) < 1e-12);
        let opt = construct_optimal_minimal(&s, DEFAULT_TOL).unwrap();
        assert_eq!(opt.state_dim(), 1);
        assert!(unitary_similarity(&opt, &s, SIMILARITY_TOL).unwrap().is_similar());
        let star = construct_star_optimal_minimal(&s, DEFAULT_TOL).unwrap();
        assert!(unitary_similarity(&star, &s, SIMILARITY_TOL).unwrap().is_similar());
    }

    #[test]
    fn optimal_grams_bracket_the_given_gram() {
        let s = mixed_example();
        let or = optimal_realizations(&s, DEFAULT_TOL).unwrap();
        let g = s.state().gram();
        assert!(min_eig(&(g - or.optimal.state().gram())) > -1e-9);
        assert!(min_eig(&(or.star_optimal.state().gram() - g)) > -1e-9);
        assert_eq!(or.optimal.kappa(), 1);
        assert_eq!(or.star_optimal.kappa(), 1);
        assert!(or.gram_gap() > 0.1);
        let outcome = unitary_similarity(&or.optimal, &or.star_optimal, SIMILARITY_TOL).unwrap();
        match outcome {
            SimilarityOutcome::NotSimilar(rep) => assert!(rep.intertwiner_exists),
            SimilarityOutcome::Similar(_) => panic!("distinct Grams on a minimal system cannot be similar"),
        }
    }

    #[test]
    fn optimal_realization_wins_and_star_optimal_loses() {
        let s = mixed_example();
        let or = optimal_realizations(&s, DEFAULT_TOL).unwrap();
        let mid = or.interpolate(0.5).unwrap();
        assert!(compare_optimality(&or.optimal, &s, 50, 12, 1).unwrap().order.first_le());
        assert!(compare_optimality(&or.optimal, &mid, 50, 12, 2).unwrap().order.first_le());
        assert!(compare_optimality(&or.star_optimal, &s, 50, 12, 3).unwrap().order.first_ge());
        assert!(compare_optimality(&or.star_optimal, &mid, 50, 12, 4).unwrap().order.first_ge());
    }

    #[test]
    fn similarity_recovers_basis_change() {
        let s = mixed_example();
        let w = random_j_unitary_seeded(s.state(), 9).matrix;
        let t = s.change_basis(&w).unwrap();
        match unitary_similarity(&s, &t, SIMILARITY_TOL).unwrap() {
            SimilarityOutcome::Similar(cert) => assert!(max_abs(&(&cert.u * &w - eye(2))) < 1e-8),
            SimilarityOutcome::NotSimilar(rep) => panic!("{}", rep.reason),
        }
    }

    #[test]
    fn similarity_rejects_different_dimensions() {
        let s = mixed_example();
        let t = reciprocal_blaschke_example(0.5).unwrap();
        assert!(matches!(
            unitary_similarity(&s, &t, SIMILARITY_TOL),
            Err(Error::ShapeMismatch(_)) | Ok(SimilarityOutcome::NotSimilar(_))
        ));
    }

    #[test]
    fn controllability_kernel_is_similarity_invariant() {
        let s = mixed_example();
        let w = random_j_unitary_seeded(s.state(), 4).matrix;
        let t = s.change_basis(&w).unwrap();
        let (z, v) = (c(0.1, 0.05), c(-0.08, 0.12));
        let k1 = controllability_kernel(&s, z, v).unwrap();
        let k2 = controllability_kernel(&t, z, v).unwrap();
        assert!(max_abs(&(k1 - k2)) < 1e-10);
    }

    #[test]
    fn duality_swaps_optimal_and_star_optimal() {
        let s = mixed_example();
        let or = optimal_realizations(&s, DEFAULT_TOL).unwrap();
        let dual_or = optimal_realizations(&s.dual(), DEFAULT_TOL).unwrap();
        let back = dual_or.optimal.dual();
        assert!(unitary_similarity(&or.star_optimal, &back, SIMILARITY_TOL).unwrap().is_similar());
    }

    #[test]
    fn observable_but_unreachable_mode_keeps_containment_strict() {
        let s = Colligation::new(
            SignatureSpace::hilbert(1),
            SignatureSpace::hilbert(1),
            SignatureSpace::hilbert(1),
            from_real(1, 1, &[0.5]),
            zeros(1, 1),
            from_real(1, 1, &[0.5]),
            from_real(1, 1, &[0.5]),
        )
        .unwrap();
        assert!(s.is_passive(DEFAULT_TOL));
        assert!(opti_cont_check(&s));
        assert_eq!(controllable_subspace(&s, RANK_TOL).dim(), 0);
        assert_eq!(observable_subspace(&s, RANK_TOL).dim(), 1);
    }
}
