//! Controllable, observable and simple subspaces, restrictions, and minimal restrictions.

use serde::Serialize;

use crate::colligation::{solve_resolvent, Colligation};
use crate::error::{Error, Result};
use crate::indefinite::{orthocomplement, orthogonal_projection, subspace_regular, Regularity, SignatureSpace};
use crate::linalg::{
    containment_gap, eye, hstack, inverse, norm2, orth, orth_abs, subspace_distance, zeros, CMat, C64, DEFAULT_TOL,
    RANK_TOL, SUBSPACE_TOL,
};

/// A subspace of a state space, stored with Euclidean-orthonormal columns.
#[derive(Debug, Clone, PartialEq)]
pub struct SubspaceBasis {
    parent: SignatureSpace,
    columns: CMat,
    regularity: Regularity,
}

impl SubspaceBasis {
    /// Orthonormalizes `spanning` (relative rank cutoff `rank_tol`) and tests regularity.
    pub fn from_spanning(parent: &SignatureSpace, spanning: &CMat, rank_tol: f64) -> Result<Self> {
        if spanning.nrows() != parent.dim() {
            return Err(Error::ShapeMismatch(format!(
                "spanning set has {} rows, space dimension is {}",
                spanning.nrows(),
                parent.dim()
            )));
        }
        Self::from_orthonormal(parent, orth(spanning, rank_tol))
    }

    /// Wraps columns that are already Euclidean-orthonormal.
    pub fn from_orthonormal(parent: &SignatureSpace, columns: CMat) -> Result<Self> {
        let regularity = subspace_regular(parent, &columns, DEFAULT_TOL)?;
        Ok(SubspaceBasis { parent: parent.clone(), columns, regularity })
    }

    pub fn full(parent: &SignatureSpace) -> Self {
        Self::from_orthonormal(parent, eye(parent.dim())).expect("whole space is regular")
    }

    pub fn parent(&self) -> &SignatureSpace {
        &self.parent
    }

    pub fn columns(&self) -> &CMat {
        &self.columns
    }

    pub fn dim(&self) -> usize {
        self.columns.ncols()
    }

    pub fn is_full(&self) -> bool {
        self.dim() == self.parent.dim()
    }

    pub fn is_regular(&self) -> bool {
        self.regularity.regular
    }

    pub fn is_hilbert(&self) -> bool {
        self.regularity.is_hilbert()
    }

    pub fn signature(&self) -> Option<(usize, usize)> {
        self.regularity.signature
    }

    pub fn regularity(&self) -> Regularity {
        self.regularity
    }

    /// Indefinite orthogonal projection onto this subspace.
    pub fn projection(&self) -> Result<CMat> {
        orthogonal_projection(&self.parent, &self.columns)
    }

    /// The indefinite orthogonal complement.
    pub fn orthocomplement(&self) -> SubspaceBasis {
        let cols = orthocomplement(&self.parent, &self.columns);
        Self::from_orthonormal(&self.parent, cols).expect("complement basis is orthonormal")
    }

    /// Sine of the largest angle by which `self` leaves `other`.
    pub fn containment_gap(&self, other: &SubspaceBasis) -> f64 {
        containment_gap(&self.columns, &other.columns)
    }

    pub fn is_contained_in(&self, other: &SubspaceBasis, tol: f64) -> bool {
        self.containment_gap(other) <= tol
    }

    pub fn distance(&self, other: &SubspaceBasis) -> f64 {
        subspace_distance(&self.columns, &other.columns)
    }

    pub fn same_span(&self, other: &SubspaceBasis, tol: f64) -> bool {
        self.dim() == other.dim() && self.distance(other) <= tol
    }
}

/// Orthonormal basis of the smallest `a`-invariant subspace containing `span(start)`.
///
/// Each new block is orthogonalized against the basis found so far, so the
/// growth of powers of `a` never enters the rank decisions.
pub fn krylov_span(a: &CMat, start: &CMat, rank_tol: f64) -> CMat {
    krylov_steps(a, start, a.nrows(), rank_tol)
}

/// Orthonormal basis of `span{a^k start : k <= steps}`, built block by block.
pub fn krylov_steps(a: &CMat, start: &CMat, steps: usize, rank_tol: f64) -> CMat {
    let n = a.nrows();
    let mut q = orth(start, rank_tol);
    if q.ncols() == 0 {
        return zeros(n, 0);
    }
    let cut = rank_tol * norm2(a).max(f64::MIN_POSITIVE);
    let mut frontier = q.clone();
    for _ in 0..steps {
        if q.ncols() >= n || frontier.ncols() == 0 {
            break;
        }
        let mut w = a * &frontier;
        for _ in 0..2 {
            w -= &q * (q.adjoint() * &w);
        }
        let fresh = orth_abs(&w, cut);
        if fresh.ncols() == 0 {
            break;
        }
        q = hstack(&[&q, &fresh]);
        frontier = fresh;
    }
    orth(&q, rank_tol)
}

/// `span{A^n B u}`.
pub fn controllable_subspace(sys: &Colligation, rank_tol: f64) -> SubspaceBasis {
    let cols = krylov_span(sys.a(), sys.b(), rank_tol);
    SubspaceBasis::from_orthonormal(sys.state(), cols).expect("Krylov basis is orthonormal")
}

/// `span{(A^[*])^n C^[*] y}`.
pub fn observable_subspace(sys: &Colligation, rank_tol: f64) -> SubspaceBasis {
    let cols = krylov_span(&sys.a_adjoint(), &sys.c_adjoint(), rank_tol);
    SubspaceBasis::from_orthonormal(sys.state(), cols).expect("Krylov basis is orthonormal")
}

/// Span of the controllable and observable Krylov families together.
pub fn simple_subspace(sys: &Colligation, rank_tol: f64) -> SubspaceBasis {
    let xc = controllable_subspace(sys, rank_tol);
    let xo = observable_subspace(sys, rank_tol);
    let both = hstack(&[xc.columns(), xo.columns()]);
    SubspaceBasis::from_spanning(sys.state(), &both, rank_tol).expect("shapes agree")
}

pub fn is_controllable(sys: &Colligation, rank_tol: f64) -> bool {
    controllable_subspace(sys, rank_tol).is_full()
}

pub fn is_observable(sys: &Colligation, rank_tol: f64) -> bool {
    observable_subspace(sys, rank_tol).is_full()
}

pub fn is_minimal(sys: &Colligation, rank_tol: f64) -> bool {
    is_controllable(sys, rank_tol) && is_observable(sys, rank_tol)
}

pub fn is_simple(sys: &Colligation, rank_tol: f64) -> bool {
    simple_subspace(sys, rank_tol).is_full()
}

/// Distances between Krylov spans and spans of sampled resolvent vectors.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ResolventCrosscheck {
    pub controllable_distance: f64,
    pub observable_distance: f64,
    pub agrees: bool,
}

/// Compares `span{(I - zA)^{-1} B}` and its adjoint analogue with the Krylov spans.
pub fn resolvent_span_crosscheck(sys: &Colligation, samples: &[C64], rank_tol: f64) -> Result<ResolventCrosscheck> {
    let n = sys.state_dim();
    if samples.len() < n {
        return Err(Error::InsufficientSamples { needed: n, got: samples.len() });
    }
    let a_adj = sys.a_adjoint();
    let c_adj = sys.c_adjoint();
    let mut fwd = Vec::with_capacity(samples.len());
    let mut bwd = Vec::with_capacity(samples.len());
    for &z in samples {
        fwd.push(solve_resolvent(sys.a(), z, sys.b())?);
        bwd.push(solve_resolvent(&a_adj, z, &c_adj)?);
    }
    let fwd_span = orth(&hstack(&fwd.iter().collect::<Vec<_>>()), rank_tol);
    let bwd_span = orth(&hstack(&bwd.iter().collect::<Vec<_>>()), rank_tol);
    let xc = controllable_subspace(sys, rank_tol);
    let xo = observable_subspace(sys, rank_tol);
    let controllable_distance = subspace_distance(&fwd_span, xc.columns());
    let observable_distance = subspace_distance(&bwd_span, xo.columns());
    Ok(ResolventCrosscheck {
        controllable_distance,
        observable_distance,
        agrees: controllable_distance <= SUBSPACE_TOL && observable_distance <= SUBSPACE_TOL,
    })
}

/// Compression of the system to a regular subspace, in orthonormal coordinates of that subspace.
///
/// With `V` the basis and `R = V^H G V`, the blocks are `R^{-1} V^H G A V`,
/// `R^{-1} V^H G B`, `C V` and `D`, and the new state Gram is `R`.
pub fn restrict(sys: &Colligation, sub: &SubspaceBasis) -> Result<Colligation> {
    if !sub.is_regular() {
        return Err(Error::NotRegular);
    }
    if sub.parent().dim() != sys.state_dim() {
        return Err(Error::ShapeMismatch("subspace lives in a different state space".into()));
    }
    let v = sub.columns();
    let g = sys.state().gram();
    let rg = sys.state().restricted_gram(v);
    let rinv = inverse(&rg).ok_or(Error::NotRegular)?;
    let left = &rinv * v.adjoint() * g;
    let state = SignatureSpace::new(rg).map_err(|_| Error::NotRegular)?;
    Colligation::new(
        state,
        sys.input().clone(),
        sys.output().clone(),
        &left * sys.a() * v,
        &left * sys.b(),
        sys.c() * v,
        sys.d().clone(),
    )
}

/// Regularity and negative index of one orthogonal complement.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ComplementStatus {
    pub dim: usize,
    pub regular: bool,
    pub signature: Option<(usize, usize)>,
    pub hilbert: bool,
}

impl ComplementStatus {
    fn of(sub: &SubspaceBasis) -> Self {
        let comp = sub.orthocomplement();
        ComplementStatus {
            dim: comp.dim(),
            regular: comp.is_regular(),
            signature: comp.signature(),
            hilbert: comp.dim() == 0 || comp.is_hilbert(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ComplementReport {
    pub controllable: ComplementStatus,
    pub observable: ComplementStatus,
    pub simple: ComplementStatus,
}

impl ComplementReport {
    pub fn all_hilbert(&self) -> bool {
        self.controllable.hilbert && self.observable.hilbert && self.simple.hilbert
    }
}

/// Tests whether the complements of the controllable, observable and simple subspaces are Hilbert.
pub fn hilbert_complement_check(sys: &Colligation, rank_tol: f64) -> ComplementReport {
    ComplementReport {
        controllable: ComplementStatus::of(&controllable_subspace(sys, rank_tol)),
        observable: ComplementStatus::of(&observable_subspace(sys, rank_tol)),
        simple: ComplementStatus::of(&simple_subspace(sys, rank_tol)),
    }
}

fn require_hilbert_complements(xc: &SubspaceBasis, xo: &SubspaceBasis) -> Result<()> {
    if !ComplementStatus::of(xo).hilbert {
        return Err(Error::ComplementNotHilbert("observable".into()));
    }
    if !ComplementStatus::of(xc).hilbert {
        return Err(Error::ComplementNotHilbert("controllable".into()));
    }
    Ok(())
}

// The cutoff scales with `||P||` because `basis` is orthonormal.
fn projected_span(parent: &SignatureSpace, p: &CMat, basis: &CMat, rank_tol: f64) -> Result<SubspaceBasis> {
    let cut = rank_tol * norm2(p).max(1.0);
    SubspaceBasis::from_orthonormal(parent, orth_abs(&(p * basis), cut))
}

/// Restriction to the span of `P_{X^o} X^c`.
pub fn minimal_restriction_first(sys: &Colligation, rank_tol: f64) -> Result<Colligation> {
    let xc = controllable_subspace(sys, rank_tol);
    let xo = observable_subspace(sys, rank_tol);
    require_hilbert_complements(&xc, &xo)?;
    let p = xo.projection()?;
    let sub = projected_span(sys.state(), &p, xc.columns(), rank_tol)?;
    restrict(sys, &sub)
}

/// Restriction to the span of `P_{X^c} X^o`.
pub fn minimal_restriction_second(sys: &Colligation, rank_tol: f64) -> Result<Colligation> {
    let xc = controllable_subspace(sys, rank_tol);
    let xo = observable_subspace(sys, rank_tol);
    require_hilbert_complements(&xc, &xo)?;
    let p = xc.projection()?;
    let sub = projected_span(sys.state(), &p, xo.columns(), rank_tol)?;
    restrict(sys, &sub)
}

/// Which restriction to apply; used by front ends.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RestrictionKind {
    Controllable,
    Observable,
    Simple,
    MinimalFirst,
    MinimalSecond,
}

pub fn restrict_by_kind(sys: &Colligation, kind: RestrictionKind, rank_tol: f64) -> Result<Colligation> {
    match kind {
        RestrictionKind::Controllable => restrict(sys, &controllable_subspace(sys, rank_tol)),
        RestrictionKind::Observable => restrict(sys, &observable_subspace(sys, rank_tol)),
        RestrictionKind::Simple => restrict(sys, &simple_subspace(sys, rank_tol)),
        RestrictionKind::MinimalFirst => minimal_restriction_first(sys, rank_tol),
        RestrictionKind::MinimalSecond => minimal_restriction_second(sys, rank_tol),
    }
}

/// Default rank tolerance re-exported for callers that do not tune it.
pub const DEFAULT_RANK_TOL: f64 = RANK_TOL;

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{from_real, r};

    fn diag_system() -> Colligation {
        Colligation::new(
            SignatureSpace::hilbert(2),
            SignatureSpace::hilbert(1),
            SignatureSpace::hilbert(1),
            from_real(2, 2, &[0.3, 0.0, 0.0, -0.2]),
            from_real(2, 1, &[1.0, 0.0]),
            from_real(1, 2, &[0.0, 1.0]),
            from_real(1, 1, &[0.0]),
        )
        .unwrap()
    }

    #[test]
    fn invariant_axis_is_controllable_span() {
        let s = diag_system();
        let xc = controllable_subspace(&s, RANK_TOL);
        assert_eq!(xc.dim(), 1);
        assert!((xc.columns()[(0, 0)].norm() - 1.0).abs() < 1e-12);
        let xo = observable_subspace(&s, RANK_TOL);
        assert_eq!(xo.dim(), 1);
        assert!((xo.columns()[(1, 0)].norm() - 1.0).abs() < 1e-12);
        assert_eq!(simple_subspace(&s, RANK_TOL).dim(), 2);
    }

    #[test]
    fn zero_input_gives_empty_span() {
        let mut s = diag_system();
        s = Colligation::new(
            s.state().clone(),
            s.input().clone(),
            s.output().clone(),
            s.a().clone(),
            zeros(2, 1),
            s.c().clone(),
            s.d().clone(),
        )
        .unwrap();
        assert_eq!(controllable_subspace(&s, RANK_TOL).dim(), 0);
    }

    #[test]
    fn crosscheck_needs_enough_samples() {
        let s = diag_system();
        assert!(matches!(
            resolvent_span_crosscheck(&s, &[r(0.0)], RANK_TOL),
            Err(Error::InsufficientSamples { needed: 2, got: 1 })
        ));
    }

    #[test]
    fn decoupled_system_restrictions_are_empty() {
        let s = diag_system();
        // X^c ⟂ X^o, so the first minimal restriction has zero state.
        let m = minimal_restriction_first(&s, RANK_TOL).unwrap();
        assert_eq!(m.state_dim(), 0);
        assert!(s.markov_parameters(6).max_diff(&m.markov_parameters(6)) < 1e-14);
    }
}
