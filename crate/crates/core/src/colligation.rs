//! Discrete-time systems `x' = Ax + Bu, y = Cx + Du` over signature spaces.

use crate::error::{Error, Result};
use crate::indefinite::{j_adjoint_matrix, IndefOperator, OperatorClass, SignatureSpace};
use crate::linalg::{block2, eye, max_abs, norm2, singular_values, solve, spectral_radius, CMat, C64, RANK_TOL};

/// A state-space realization `D + z C (I - zA)^{-1} B` with no passivity requirement.
///
/// Used for auxiliary functions such as defect functions, whose channels
/// need not share a negative index.
#[derive(Debug, Clone, PartialEq)]
pub struct Realization {
    pub input: SignatureSpace,
    pub output: SignatureSpace,
    pub a: CMat,
    pub b: CMat,
    pub c: CMat,
    pub d: CMat,
}

impl Realization {
    pub fn new(input: SignatureSpace, output: SignatureSpace, a: CMat, b: CMat, c: CMat, d: CMat) -> Result<Self> {
        let n = a.nrows();
        check_shape("A", &a, n, n)?;
        check_shape("B", &b, n, input.dim())?;
        check_shape("C", &c, output.dim(), n)?;
        check_shape("D", &d, output.dim(), input.dim())?;
        Ok(Realization { input, output, a, b, c, d })
    }

    pub fn state_dim(&self) -> usize {
        self.a.nrows()
    }

    /// `(I - zA)^{-1}`, rejecting numerically singular resolvents.
    pub fn resolvent(&self, z: C64) -> Result<CMat> {
        resolvent(&self.a, z)
    }

    pub fn eval(&self, z: C64) -> Result<CMat> {
        if self.state_dim() == 0 {
            return Ok(self.d.clone());
        }
        let rb = solve_resolvent(&self.a, z, &self.b)?;
        Ok(&self.d + &self.c * rb * z)
    }

    pub fn spectral_radius(&self) -> f64 {
        spectral_radius(&self.a)
    }

    /// Radius `0.5 / max(1, rho(A))` inside which evaluations are well conditioned.
    pub fn safe_radius(&self) -> f64 {
        0.5 / self.spectral_radius().max(1.0)
    }
}

fn check_shape(name: &str, m: &CMat, rows: usize, cols: usize) -> Result<()> {
    if m.shape() != (rows, cols) {
        return Err(Error::ShapeMismatch(format!("{name} is {}x{}, expected {rows}x{cols}", m.nrows(), m.ncols())));
    }
    Ok(())
}

fn resolvent_guard(a: &CMat, z: C64) -> Result<CMat> {
    let n = a.nrows();
    let m = eye(n) - a * z;
    let s = singular_values(&m);
    if let (Some(&smax), Some(&smin)) = (s.first(), s.last()) {
        if smin <= RANK_TOL * smax.max(1.0) {
            return Err(Error::ResolventSingular { re: z.re, im: z.im });
        }
    }
    Ok(m)
}

pub(crate) fn resolvent(a: &CMat, z: C64) -> Result<CMat> {
    let m = resolvent_guard(a, z)?;
    solve(&m, &eye(a.nrows())).ok_or(Error::ResolventSingular { re: z.re, im: z.im })
}

pub(crate) fn solve_resolvent(a: &CMat, z: C64, rhs: &CMat) -> Result<CMat> {
    let m = resolvent_guard(a, z)?;
    solve(&m, rhs).ok_or(Error::ResolventSingular { re: z.re, im: z.im })
}

/// The colligation `Σ = (A, B, C; D)` with state, input and output spaces.
#[derive(Debug, Clone, PartialEq)]
pub struct Colligation {
    state: SignatureSpace,
    input: SignatureSpace,
    output: SignatureSpace,
    a: CMat,
    b: CMat,
    c: CMat,
    d: CMat,
}

/// Taylor coefficients `[D, CB, CAB, ...]` of a transfer function at the origin.
#[derive(Debug, Clone, PartialEq)]
pub struct MarkovSequence(pub Vec<CMat>);

impl MarkovSequence {
    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Largest entrywise difference over the common prefix.
    pub fn max_diff(&self, other: &MarkovSequence) -> f64 {
        self.0
            .iter()
            .zip(&other.0)
            .map(|(x, y)| if x.shape() == y.shape() { max_abs(&(x - y)) } else { f64::INFINITY })
            .fold(0.0, f64::max)
    }

    /// First index whose coefficients differ by more than `tol (1 + |M_k|)`.
    pub fn first_mismatch(&self, other: &MarkovSequence, tol: f64) -> Option<(usize, f64)> {
        for (k, (x, y)) in self.0.iter().zip(&other.0).enumerate() {
            if x.shape() != y.shape() {
                return Some((k, f64::INFINITY));
            }
            let d = max_abs(&(x - y));
            if d > tol * (1.0 + max_abs(x).max(max_abs(y))) {
                return Some((k, d));
            }
        }
        None
    }
}

impl Colligation {
    pub fn new(
        state: SignatureSpace,
        input: SignatureSpace,
        output: SignatureSpace,
        a: CMat,
        b: CMat,
        c: CMat,
        d: CMat,
    ) -> Result<Self> {
        if input.neg_index() != output.neg_index() {
            return Err(Error::InvalidSpace(format!(
                "input and output negative indices differ ({} vs {})",
                input.neg_index(),
                output.neg_index()
            )));
        }
        let n = state.dim();
        check_shape("A", &a, n, n)?;
        check_shape("B", &b, n, input.dim())?;
        check_shape("C", &c, output.dim(), n)?;
        check_shape("D", &d, output.dim(), input.dim())?;
        Ok(Colligation { state, input, output, a, b, c, d })
    }

    /// Splits a block operator on `X ⊕ U -> X ⊕ Y` into its four blocks.
    pub fn from_system_matrix(
        state: SignatureSpace,
        input: SignatureSpace,
        output: SignatureSpace,
        t: &CMat,
    ) -> Result<Self> {
        let n = state.dim();
        let (mu, my) = (input.dim(), output.dim());
        check_shape("system operator", t, n + my, n + mu)?;
        Colligation::new(
            state,
            input,
            output,
            t.view((0, 0), (n, n)).into_owned(),
            t.view((0, n), (n, mu)).into_owned(),
            t.view((n, 0), (my, n)).into_owned(),
            t.view((n, n), (my, mu)).into_owned(),
        )
    }

    pub fn state(&self) -> &SignatureSpace {
        &self.state
    }

    pub fn input(&self) -> &SignatureSpace {
        &self.input
    }

    pub fn output(&self) -> &SignatureSpace {
        &self.output
    }

    pub fn a(&self) -> &CMat {
        &self.a
    }

    pub fn b(&self) -> &CMat {
        &self.b
    }

    pub fn c(&self) -> &CMat {
        &self.c
    }

    pub fn d(&self) -> &CMat {
        &self.d
    }

    pub fn state_dim(&self) -> usize {
        self.state.dim()
    }

    pub fn input_dim(&self) -> usize {
        self.input.dim()
    }

    pub fn output_dim(&self) -> usize {
        self.output.dim()
    }

    /// Negative index of the state space.
    pub fn kappa(&self) -> usize {
        self.state.neg_index()
    }

    /// `[[A, B], [C, D]]` from `X ⊕ U` to `X ⊕ Y`.
    pub fn system_operator(&self) -> IndefOperator {
        IndefOperator {
            domain: self.state.direct_sum(&self.input),
            codomain: self.state.direct_sum(&self.output),
            matrix: block2(&self.a, &self.b, &self.c, &self.d),
        }
    }

    pub fn realization(&self) -> Realization {
        Realization {
            input: self.input.clone(),
            output: self.output.clone(),
            a: self.a.clone(),
            b: self.b.clone(),
            c: self.c.clone(),
            d: self.d.clone(),
        }
    }

    /// `θ(z) = D + z C (I - zA)^{-1} B`.
    pub fn transfer_eval(&self, z: C64) -> Result<CMat> {
        if self.state_dim() == 0 {
            return Ok(self.d.clone());
        }
        let rb = solve_resolvent(&self.a, z, &self.b)?;
        Ok(&self.d + &self.c * rb * z)
    }

    /// `[M_0, .., M_n]` with `M_0 = D` and `M_k = C A^{k-1} B`.
    pub fn markov_parameters(&self, n: usize) -> MarkovSequence {
        let mut out = Vec::with_capacity(n + 1);
        out.push(self.d.clone());
        let mut x = self.b.clone();
        for _ in 1..=n {
            out.push(&self.c * &x);
            x = &self.a * x;
        }
        MarkovSequence(out)
    }

    /// The system whose operator is the indefinite adjoint of this one.
    pub fn dual(&self) -> Colligation {
        let adj = self.system_operator().j_adjoint();
        Colligation::from_system_matrix(self.state.clone(), self.output.clone(), self.input.clone(), &adj.matrix)
            .expect("adjoint blocks have consistent shapes")
    }

    pub fn classify_system(&self, tol: f64) -> OperatorClass {
        self.system_operator().classify(tol)
    }

    pub fn system_class(&self, tol: f64) -> SystemClass {
        SystemClass::from_operator_class(&self.classify_system(tol))
    }

    pub fn is_passive(&self, tol: f64) -> bool {
        self.classify_system(tol).contraction
    }

    pub fn spectral_radius(&self) -> f64 {
        spectral_radius(&self.a)
    }

    /// Radius `0.5 / max(1, rho(A))` used for default sampling.
    pub fn safe_radius(&self) -> f64 {
        0.5 / self.spectral_radius().max(1.0)
    }

    /// `A^[*]` with respect to the state Gram.
    pub fn a_adjoint(&self) -> CMat {
        j_adjoint_matrix(&self.a, &self.state, &self.state)
    }

    /// `C^[*]` mapping `Y` into `X`.
    pub fn c_adjoint(&self) -> CMat {
        j_adjoint_matrix(&self.c, &self.state, &self.output)
    }

    /// `B^[*]` mapping `X` into `U`.
    pub fn b_adjoint(&self) -> CMat {
        j_adjoint_matrix(&self.b, &self.input, &self.state)
    }

    /// Coordinates change `x = W ξ`: returns `(W^{-1} A W, W^{-1} B, C W, D)` with Gram `W^H G W`.
    pub fn change_basis(&self, w: &CMat) -> Result<Colligation> {
        let n = self.state_dim();
        check_shape("basis change", w, n, n)?;
        let winv = crate::linalg::inverse(w).ok_or_else(|| Error::BadParameter("basis change is singular".into()))?;
        let gram = self.state.restricted_gram(w);
        Colligation::new(
            SignatureSpace::new(gram)?,
            self.input.clone(),
            self.output.clone(),
            &winv * &self.a * w,
            &winv * &self.b,
            &self.c * w,
            self.d.clone(),
        )
    }

    /// Same operator blocks with a different state Gram.
    pub fn with_state_gram(&self, gram: CMat) -> Result<Colligation> {
        let state = SignatureSpace::new(gram)?;
        Colligation::new(
            state,
            self.input.clone(),
            self.output.clone(),
            self.a.clone(),
            self.b.clone(),
            self.c.clone(),
            self.d.clone(),
        )
    }

    /// Largest norm among the four blocks, used to scale tolerances.
    pub fn scale(&self) -> f64 {
        [norm2(&self.a), norm2(&self.b), norm2(&self.c), norm2(&self.d)].into_iter().fold(1.0, f64::max)
    }
}

/// Passivity vocabulary for systems.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SystemClass {
    Conservative,
    Isometric,
    Coisometric,
    Passive,
    NotPassive,
}

impl SystemClass {
    pub fn from_operator_class(cls: &OperatorClass) -> Self {
        use crate::indefinite::ClassKind;
        match cls.kind {
            ClassKind::Unitary => SystemClass::Conservative,
            ClassKind::Isometry => SystemClass::Isometric,
            ClassKind::Coisometry => SystemClass::Coisometric,
            ClassKind::Contraction => SystemClass::Passive,
            ClassKind::None => SystemClass::NotPassive,
        }
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            SystemClass::Conservative => "conservative",
            SystemClass::Isometric => "isometric",
            SystemClass::Coisometric => "co-isometric",
            SystemClass::Passive => "passive",
            SystemClass::NotPassive => "not passive",
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{c, from_real, r, zeros};

    fn recip() -> Colligation {
        let s3 = 3f64.sqrt();
        Colligation::new(
            SignatureSpace::canonical(0, 1),
            SignatureSpace::hilbert(1),
            SignatureSpace::hilbert(1),
            from_real(1, 1, &[2.0]),
            from_real(1, 1, &[-s3]),
            from_real(1, 1, &[s3]),
            from_real(1, 1, &[-2.0]),
        )
        .unwrap()
    }

    #[test]
    fn recip_transfer_and_markov() {
        let s = recip();
        let v = s.transfer_eval(r(0.1)).unwrap()[(0, 0)];
        assert!((v - r(-2.375)).norm() < 1e-14);
        let m = s.markov_parameters(4);
        let expect = [-2.0, -3.0, -6.0, -12.0, -24.0];
        for (k, e) in expect.iter().enumerate() {
            assert!((m.0[k][(0, 0)] - r(*e)).norm() < 1e-12);
        }
        assert_eq!(s.system_class(1e-9), SystemClass::Conservative);
    }

    #[test]
    fn dual_transfer_is_conjugate_transpose() {
        let s = recip();
        let z = c(0.1, 0.05);
        let lhs = s.dual().transfer_eval(z).unwrap();
        let rhs = s.transfer_eval(z.conj()).unwrap().adjoint();
        assert!(max_abs(&(lhs - rhs)) < 1e-13);
        assert_eq!(s.dual().dual(), s);
    }

    #[test]
    fn antihilbert_gain_two_is_passive() {
        let s = Colligation::new(
            SignatureSpace::canonical(0, 1),
            SignatureSpace::hilbert(1),
            SignatureSpace::hilbert(1),
            from_real(1, 1, &[2.0]),
            zeros(1, 1),
            zeros(1, 1),
            zeros(1, 1),
        )
        .unwrap();
        let cls = s.classify_system(1e-9);
        assert!(cls.contraction);
        assert!((cls.defect_min_eig - 1.0).abs() < 1e-12);
    }

    #[test]
    fn pole_is_reported() {
        let s = recip();
        assert!(matches!(s.transfer_eval(r(0.5)), Err(Error::ResolventSingular { .. })));
    }

    #[test]
    fn mismatched_channel_indices_rejected() {
        let e = Colligation::new(
            SignatureSpace::hilbert(1),
            SignatureSpace::canonical(0, 1),
            SignatureSpace::hilbert(1),
            zeros(1, 1),
            zeros(1, 1),
            zeros(1, 1),
            zeros(1, 1),
        );
        assert!(matches!(e, Err(Error::InvalidSpace(_))));
    }
}
