//! Finite-dimensional Pontryagin spaces and operators between them.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::{
    block_diag, eye, herm_eig, hermitian_part, inverse, min_eig, norm2, null_space, r, singular_values, zeros, CMat,
    C64, RANK_TOL,
};

/// A space `C^n` carrying the indefinite inner product `<x, y> = y^H G x`.
#[derive(Debug, Clone, PartialEq)]
pub struct SignatureSpace {
    gram: CMat,
    gram_inv: CMat,
    pos: usize,
    neg: usize,
}

impl SignatureSpace {
    /// `diag(+1, .., +1, -1, .., -1)` with `pos` positive and `neg` negative entries.
    pub fn canonical(pos: usize, neg: usize) -> Self {
        let n = pos + neg;
        let mut g = zeros(n, n);
        for i in 0..n {
            g[(i, i)] = r(if i < pos { 1.0 } else { -1.0 });
        }
        SignatureSpace { gram_inv: g.clone(), gram: g, pos, neg }
    }

    pub fn hilbert(n: usize) -> Self {
        Self::canonical(n, 0)
    }

    /// Validates Hermitian symmetry and invertibility and reads off the signature.
    pub fn new(gram: CMat) -> Result<Self> {
        if gram.nrows() != gram.ncols() {
            return Err(Error::InvalidSpace(format!("Gram matrix is {}x{}", gram.nrows(), gram.ncols())));
        }
        let scale = 1.0 + norm2(&gram);
        if norm2(&(&gram - gram.adjoint())) > 1e-10 * scale {
            return Err(Error::InvalidSpace("Gram matrix is not Hermitian".into()));
        }
        let gram = hermitian_part(&gram);
        let s = singular_values(&gram);
        if let (Some(&smax), Some(&smin)) = (s.first(), s.last()) {
            if smin <= RANK_TOL * smax {
                return Err(Error::InvalidSpace("Gram matrix is singular".into()));
            }
        }
        let eig = herm_eig(&gram);
        let pos = eig.values.iter().filter(|&&v| v > 0.0).count();
        let neg = eig.values.len() - pos;
        let gram_inv =
            hermitian_part(&inverse(&gram).ok_or_else(|| Error::InvalidSpace("Gram matrix is singular".into()))?);
        Ok(SignatureSpace { gram, gram_inv, pos, neg })
    }

    pub fn dim(&self) -> usize {
        self.gram.nrows()
    }

    pub fn gram(&self) -> &CMat {
        &self.gram
    }

    pub fn gram_inv(&self) -> &CMat {
        &self.gram_inv
    }

    pub fn pos_index(&self) -> usize {
        self.pos
    }

    pub fn neg_index(&self) -> usize {
        self.neg
    }

    pub fn signature(&self) -> (usize, usize) {
        (self.pos, self.neg)
    }

    pub fn is_hilbert(&self) -> bool {
        self.neg == 0
    }

    /// True when the Gram matrix is exactly the canonical diagonal one.
    pub fn is_canonical(&self) -> bool {
        self.gram == Self::canonical(self.pos, self.neg).gram
    }

    pub fn direct_sum(&self, other: &SignatureSpace) -> SignatureSpace {
        SignatureSpace {
            gram: block_diag(&self.gram, &other.gram),
            gram_inv: block_diag(&self.gram_inv, &other.gram_inv),
            pos: self.pos + other.pos,
            neg: self.neg + other.neg,
        }
    }

    /// `<x, y>` for column vectors, linear in `x`.
    pub fn inner(&self, x: &CMat, y: &CMat) -> C64 {
        (y.adjoint() * &self.gram * x)[(0, 0)]
    }

    /// Restricted Gram `B^H G B` of a set of columns.
    pub fn restricted_gram(&self, basis: &CMat) -> CMat {
        hermitian_part(&(basis.adjoint() * &self.gram * basis))
    }
}

/// A linear map between two signature spaces.
#[derive(Debug, Clone, PartialEq)]
pub struct IndefOperator {
    pub domain: SignatureSpace,
    pub codomain: SignatureSpace,
    pub matrix: CMat,
}

impl IndefOperator {
    pub fn new(domain: SignatureSpace, codomain: SignatureSpace, matrix: CMat) -> Result<Self> {
        if matrix.shape() != (codomain.dim(), domain.dim()) {
            return Err(Error::ShapeMismatch(format!(
                "operator matrix is {}x{}, spaces require {}x{}",
                matrix.nrows(),
                matrix.ncols(),
                codomain.dim(),
                domain.dim()
            )));
        }
        Ok(IndefOperator { domain, codomain, matrix })
    }

    /// Adjoint with respect to the two indefinite inner products.
    pub fn j_adjoint(&self) -> IndefOperator {
        IndefOperator {
            domain: self.codomain.clone(),
            codomain: self.domain.clone(),
            matrix: j_adjoint_matrix(&self.matrix, &self.domain, &self.codomain),
        }
    }

    /// `G_dom - T^H G_cod T`, positive semidefinite exactly for contractions.
    pub fn defect_form(&self) -> CMat {
        hermitian_part(&(self.domain.gram() - self.matrix.adjoint() * self.codomain.gram() * &self.matrix))
    }

    pub fn classify(&self, tol: f64) -> OperatorClass {
        classify(self, tol)
    }
}

/// `G_dom^{-1} T^H G_cod` for `T` acting from `dom` to `cod`.
pub fn j_adjoint_matrix(t: &CMat, dom: &SignatureSpace, cod: &SignatureSpace) -> CMat {
    dom.gram_inv() * t.adjoint() * cod.gram()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum ClassKind {
    Unitary,
    Isometry,
    Coisometry,
    Contraction,
    None,
}

impl ClassKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            ClassKind::Unitary => "unitary",
            ClassKind::Isometry => "isometry",
            ClassKind::Coisometry => "coisometry",
            ClassKind::Contraction => "contraction",
            ClassKind::None => "none",
        }
    }
}

/// Classification of an operator together with its defect diagnostics.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OperatorClass {
    pub kind: ClassKind,
    pub contraction: bool,
    pub isometry: bool,
    pub coisometry: bool,
    /// Whether the adjoint is a contraction.
    pub adjoint_contraction: bool,
    pub defect_min_eig: f64,
    pub codefect_min_eig: f64,
    pub defect_norm: f64,
    pub codefect_norm: f64,
    /// Effective absolute thresholds used for the two forms.
    pub defect_threshold: f64,
    pub codefect_threshold: f64,
}

impl OperatorClass {
    pub fn is_contraction(&self) -> bool {
        self.contraction
    }

    pub fn is_unitary(&self) -> bool {
        self.kind == ClassKind::Unitary
    }
}

/// Scale-aware threshold `tol (1 + |G| + |T^H G T|)` for a defect form.
pub(crate) fn form_threshold(tol: f64, gram: &CMat, image_form: &CMat) -> f64 {
    tol * (1.0 + norm2(gram) + norm2(image_form))
}

pub fn classify(t: &IndefOperator, tol: f64) -> OperatorClass {
    let g1 = t.domain.gram();
    let g2 = t.codomain.gram();
    let image = hermitian_part(&(t.matrix.adjoint() * g2 * &t.matrix));
    let form = hermitian_part(&(g1 - &image));
    let co_image = hermitian_part(&(g2 * &t.matrix * t.domain.gram_inv() * t.matrix.adjoint() * g2));
    let co_form = hermitian_part(&(g2 - &co_image));

    let thr = form_threshold(tol, g1, &image);
    let co_thr = form_threshold(tol, g2, &co_image);
    let defect_min_eig = min_eig(&form);
    let codefect_min_eig = min_eig(&co_form);
    let defect_norm = norm2(&form);
    let codefect_norm = norm2(&co_form);

    let isometry = defect_norm <= thr;
    let coisometry = codefect_norm <= co_thr;
    let same_index = t.domain.neg_index() == t.codomain.neg_index();
    let adjoint_contraction = coisometry || codefect_min_eig >= -co_thr;
    let contraction = isometry || defect_min_eig >= -thr || (coisometry && same_index);

    let kind = if isometry && coisometry {
        ClassKind::Unitary
    } else if isometry {
        ClassKind::Isometry
    } else if coisometry && contraction {
        ClassKind::Coisometry
    } else if contraction {
        ClassKind::Contraction
    } else {
        ClassKind::None
    };
    OperatorClass {
        kind,
        contraction,
        isometry,
        coisometry,
        adjoint_contraction,
        defect_min_eig,
        codefect_min_eig,
        defect_norm,
        codefect_norm,
        defect_threshold: thr,
        codefect_threshold: co_thr,
    }
}

/// Gram-orthogonal bases of a maximal positive and a maximal negative subspace.
pub fn fundamental_decomposition(s: &SignatureSpace) -> (CMat, CMat) {
    let eig = herm_eig(s.gram());
    let p = s.pos_index();
    let n = s.dim();
    (eig.vectors.columns(0, p).into_owned(), eig.vectors.columns(p, n - p).into_owned())
}

/// Result of a regularity test on a subspace.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct Regularity {
    pub regular: bool,
    /// Signature of the restricted Gram, present only for regular subspaces.
    pub signature: Option<(usize, usize)>,
}

impl Regularity {
    pub fn is_hilbert(&self) -> bool {
        matches!(self.signature, Some((_, 0))) && self.regular
    }
}

/// Decides whether `span(basis)` is a Pontryagin space under the inherited product.
pub fn subspace_regular(s: &SignatureSpace, basis: &CMat, tol: f64) -> Result<Regularity> {
    if basis.nrows() != s.dim() {
        return Err(Error::ShapeMismatch(format!("basis has {} rows, space dimension is {}", basis.nrows(), s.dim())));
    }
    if basis.ncols() == 0 {
        return Ok(Regularity { regular: true, signature: Some((0, 0)) });
    }
    let sb = singular_values(basis);
    if sb.last().copied().unwrap_or(0.0) <= RANK_TOL * sb[0] || basis.ncols() > basis.nrows() {
        return Err(Error::DependentColumns);
    }
    let rg = s.restricted_gram(basis);
    let sr = singular_values(&rg);
    let threshold = tol * norm2(s.gram()) * sb[0] * sb[0];
    if sr.last().copied().unwrap_or(0.0) <= threshold {
        return Ok(Regularity { regular: false, signature: None });
    }
    let eig = herm_eig(&rg);
    let p = eig.values.iter().filter(|&&v| v > 0.0).count();
    Ok(Regularity { regular: true, signature: Some((p, eig.values.len() - p)) })
}

/// Gram-self-adjoint idempotent `B (B^H G B)^{-1} B^H G` onto a regular subspace.
pub fn orthogonal_projection(s: &SignatureSpace, basis: &CMat) -> Result<CMat> {
    if !subspace_regular(s, basis, crate::linalg::DEFAULT_TOL)?.regular {
        return Err(Error::NotRegular);
    }
    if basis.ncols() == 0 {
        return Ok(zeros(s.dim(), s.dim()));
    }
    let rg = s.restricted_gram(basis);
    let rinv = inverse(&rg).ok_or(Error::NotRegular)?;
    Ok(basis * rinv * basis.adjoint() * s.gram())
}

/// Euclidean-orthonormal basis of `{x : <x, b> = 0 for all columns b}`.
pub fn orthocomplement(s: &SignatureSpace, basis: &CMat) -> CMat {
    if basis.ncols() == 0 {
        return eye(s.dim());
    }
    let m = basis.adjoint() * s.gram();
    let cut = RANK_TOL * norm2(&m).max(f64::MIN_POSITIVE);
    null_space(&m, cut)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{from_real, max_abs};

    fn kappa_one_operator() -> IndefOperator {
        let s3 = 3f64.sqrt();
        let sp = SignatureSpace::new(from_real(2, 2, &[-1.0, 0.0, 0.0, 1.0])).unwrap();
        IndefOperator::new(sp.clone(), sp, from_real(2, 2, &[2.0, -s3, s3, -2.0])).unwrap()
    }

    #[test]
    fn adjoint_of_scalar_between_opposite_signs() {
        let dom = SignatureSpace::new(from_real(1, 1, &[-1.0])).unwrap();
        let cod = SignatureSpace::hilbert(1);
        let t = IndefOperator::new(dom, cod, from_real(1, 1, &[2.0])).unwrap();
        assert!((t.j_adjoint().matrix[(0, 0)] - r(-2.0)).norm() < 1e-15);
    }

    #[test]
    fn hyperbolic_matrix_is_unitary() {
        let t = kappa_one_operator();
        let cls = t.classify(1e-9);
        assert_eq!(cls.kind, ClassKind::Unitary);
        assert_eq!(t.j_adjoint().classify(1e-9).kind, ClassKind::Unitary);
    }

    #[test]
    fn half_identity_is_strict_contraction() {
        let s = SignatureSpace::hilbert(2);
        let t = IndefOperator::new(s.clone(), s, eye(2) * r(0.5)).unwrap();
        let cls = t.classify(1e-9);
        assert_eq!(cls.kind, ClassKind::Contraction);
        assert!(!cls.isometry);
    }

    #[test]
    fn decomposition_of_swap_gram() {
        let s = SignatureSpace::new(from_real(2, 2, &[0.0, 1.0, 1.0, 0.0])).unwrap();
        assert_eq!(s.signature(), (1, 1));
        let (p, n) = fundamental_decomposition(&s);
        let h = 1.0 / 2f64.sqrt();
        assert!(max_abs(&(p - from_real(2, 1, &[h, h]))) < 1e-12);
        assert!(
            max_abs(&(n.clone() - from_real(2, 1, &[h, -h]))) < 1e-12
                || max_abs(&(n + from_real(2, 1, &[h, -h]))) < 1e-12
        );
    }

    #[test]
    fn neutral_vector_is_not_regular() {
        let s = SignatureSpace::canonical(1, 1);
        let reg = subspace_regular(&s, &from_real(2, 1, &[1.0, 1.0]), 1e-9).unwrap();
        assert!(!reg.regular);
        let reg = subspace_regular(&s, &from_real(2, 1, &[1.0, 0.0]), 1e-9).unwrap();
        assert_eq!(reg.signature, Some((1, 0)));
        assert_eq!(orthogonal_projection(&s, &from_real(2, 1, &[1.0, 1.0])), Err(Error::NotRegular));
    }

    #[test]
    fn projection_onto_negative_axis() {
        let s = SignatureSpace::canonical(1, 1);
        let p = orthogonal_projection(&s, &from_real(2, 1, &[0.0, 1.0])).unwrap();
        assert!(max_abs(&(p - from_real(2, 2, &[0.0, 0.0, 0.0, 1.0]))) < 1e-15);
    }

    #[test]
    fn dependent_basis_rejected() {
        let s = SignatureSpace::hilbert(2);
        let b = from_real(2, 2, &[1.0, 2.0, 1.0, 2.0]);
        assert_eq!(subspace_regular(&s, &b, 1e-9), Err(Error::DependentColumns));
    }
}
