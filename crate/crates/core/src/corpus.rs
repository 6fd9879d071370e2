//! Seeded generation of test systems, named analytic examples, and Ho-Kalman realization.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::colligation::{Colligation, MarkovSequence};
use crate::error::{Error, Result};
use crate::indefinite::{IndefOperator, SignatureSpace};
use crate::linalg::{
    block_diag, from_real, herm_eig, hermitian_part, inverse, norm2, pinv, svd_sorted, zeros, CMat, C64,
};

pub type CorpusRng = ChaCha20Rng;

pub fn rng_from_seed(seed: u64) -> CorpusRng {
    ChaCha20Rng::seed_from_u64(seed)
}

/// Entry-wise standard complex Gaussian matrix (unit variance per entry).
pub fn complex_gaussian<R: Rng>(rng: &mut R, rows: usize, cols: usize) -> CMat {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    CMat::from_fn(rows, cols, |_, _| {
        let re: f64 = rng.sample(StandardNormal);
        let im: f64 = rng.sample(StandardNormal);
        C64::new(re * s, im * s)
    })
}

/// Cap on the generator norm so that the exponential stays well conditioned.
const GENERATOR_CAP: f64 = 2.0;

/// `exp(K)` for `K = G^{-1} S` with `S` skew-Hermitian; unitary for `G`.
pub fn j_unitary_from_generator(space: &SignatureSpace, skew: &CMat) -> IndefOperator {
    let k = space.gram_inv() * skew;
    IndefOperator { domain: space.clone(), codomain: space.clone(), matrix: k.exp() }
}

pub fn random_j_unitary<R: Rng>(space: &SignatureSpace, rng: &mut R) -> IndefOperator {
    let n = space.dim();
    let g = complex_gaussian(rng, n, n);
    let mut s = (&g - g.adjoint()) * C64::new(0.5, 0.0);
    let k_norm = norm2(&(space.gram_inv() * &s));
    if k_norm > GENERATOR_CAP {
        s *= C64::new(GENERATOR_CAP / k_norm, 0.0);
    }
    j_unitary_from_generator(space, &s)
}

pub fn random_j_unitary_seeded(space: &SignatureSpace, seed: u64) -> IndefOperator {
    random_j_unitary(space, &mut rng_from_seed(seed))
}

/// Basis `E` with `E^H G E = diag(I_p, -I_q)`.
fn normalized_fundamental_basis(space: &SignatureSpace) -> CMat {
    let eig = herm_eig(space.gram());
    let mut e = eig.vectors.clone();
    for (k, lam) in eig.values.iter().enumerate() {
        e.column_mut(k).scale_mut(1.0 / lam.abs().sqrt());
    }
    e
}

/// A Gram-preserving bijection between two spaces of equal signature.
pub fn signature_isomorphism(from: &SignatureSpace, to: &SignatureSpace) -> Result<CMat> {
    if from.signature() != to.signature() {
        return Err(Error::ShapeMismatch(format!("signatures {:?} and {:?} differ", from.signature(), to.signature())));
    }
    let ef = normalized_fundamental_basis(from);
    let et = normalized_fundamental_basis(to);
    let efi = inverse(&ef).ok_or_else(|| Error::InvalidSpace("degenerate Gram".into()))?;
    Ok(et * efi)
}

/// Compression of a random unitary on `dom ⊕ H` to `cod ⊕ H'`; both padding spaces are Hilbert.
pub fn random_j_contraction<R: Rng>(dom: &SignatureSpace, cod: &SignatureSpace, rng: &mut R) -> Result<IndefOperator> {
    if dom.neg_index() != cod.neg_index() {
        return Err(Error::InvalidSpace("contraction corpus needs equal negative indices".into()));
    }
    let h = 1 + rng.gen_range(0..2) + cod.pos_index().saturating_sub(dom.pos_index());
    let big = dom.direct_sum(&SignatureSpace::hilbert(h));
    let h2 = big.dim() - cod.dim();
    let target = cod.direct_sum(&SignatureSpace::hilbert(h2));
    let w = random_j_unitary(&big, rng);
    let phi = signature_isomorphism(&big, &target)?;
    let full = phi * w.matrix;
    let t = full.view((0, 0), (cod.dim(), dom.dim())).into_owned();
    IndefOperator::new(dom.clone(), cod.clone(), t)
}

/// Which passivity class a generated colligation should have.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ClassTarget {
    Conservative,
    Passive,
    Isometric,
    Coisometric,
}

/// Description of a generated family of colligations.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusSpec {
    pub seed: u64,
    /// `(pos, neg)` of the state space.
    pub state: (usize, usize),
    /// `(pos, neg)` of the input space; the output equals it except for isometric targets.
    pub channel: (usize, usize),
    pub count: usize,
    pub target: ClassTarget,
}

fn canonical(sig: (usize, usize)) -> SignatureSpace {
    SignatureSpace::canonical(sig.0, sig.1)
}

pub fn random_conservative<R: Rng>(state: &SignatureSpace, channel: &SignatureSpace, rng: &mut R) -> Colligation {
    let total = state.direct_sum(channel);
    let w = random_j_unitary(&total, rng);
    Colligation::from_system_matrix(state.clone(), channel.clone(), channel.clone(), &w.matrix)
        .expect("partition of a square unitary")
}

/// Compression to `X` of a conservative system on `X ⊕ H` with `dim H` in `1..=3`.
pub fn random_passive<R: Rng>(state: &SignatureSpace, channel: &SignatureSpace, rng: &mut R) -> Colligation {
    let h = rng.gen_range(1..=3);
    let big_state = state.direct_sum(&SignatureSpace::hilbert(h));
    let big = random_conservative(&big_state, channel, rng);
    let n = state.dim();
    Colligation::new(
        state.clone(),
        channel.clone(),
        channel.clone(),
        big.a().view((0, 0), (n, n)).into_owned(),
        big.b().rows(0, n).into_owned(),
        big.c().columns(0, n).into_owned(),
        big.d().clone(),
    )
    .expect("compressed blocks have consistent shapes")
}

/// First columns of a unitary on `X ⊕ U ⊕ E`; the output space is `U ⊕ E` with `dim E` in `1..=2`.
pub fn random_isometric<R: Rng>(state: &SignatureSpace, channel: &SignatureSpace, rng: &mut R) -> Colligation {
    let e = rng.gen_range(1..=2);
    let out = channel.direct_sum(&SignatureSpace::hilbert(e));
    let total = state.direct_sum(&out);
    let w = random_j_unitary(&total, rng);
    let cols = w.matrix.columns(0, state.dim() + channel.dim()).into_owned();
    Colligation::from_system_matrix(state.clone(), channel.clone(), out, &cols).expect("isometric column block")
}

pub fn random_coisometric<R: Rng>(state: &SignatureSpace, channel: &SignatureSpace, rng: &mut R) -> Colligation {
    random_isometric(state, channel, rng).dual()
}

pub fn random_colligation<R: Rng>(
    target: ClassTarget,
    state: &SignatureSpace,
    channel: &SignatureSpace,
    rng: &mut R,
) -> Colligation {
    match target {
        ClassTarget::Conservative => random_conservative(state, channel, rng),
        ClassTarget::Passive => random_passive(state, channel, rng),
        ClassTarget::Isometric => random_isometric(state, channel, rng),
        ClassTarget::Coisometric => random_coisometric(state, channel, rng),
    }
}

pub fn generate(spec: &CorpusSpec) -> Vec<Colligation> {
    let mut rng = rng_from_seed(spec.seed);
    let state = canonical(spec.state);
    let channel = canonical(spec.channel);
    (0..spec.count).map(|_| random_colligation(spec.target, &state, &channel, &mut rng)).collect()
}

fn scalar_system(gram_x: f64, a: f64, b: f64, c: f64, d: f64) -> Colligation {
    Colligation::new(
        SignatureSpace::new(from_real(1, 1, &[gram_x])).expect("nonzero Gram"),
        SignatureSpace::hilbert(1),
        SignatureSpace::hilbert(1),
        from_real(1, 1, &[a]),
        from_real(1, 1, &[b]),
        from_real(1, 1, &[c]),
        from_real(1, 1, &[d]),
    )
    .expect("scalar blocks")
}

/// Conservative realization of `(z - a) / (1 - a z)` on a one-dimensional Hilbert state.
pub fn blaschke_example(a: f64) -> Result<Colligation> {
    if !(a.abs() < 1.0) {
        return Err(Error::BadParameter(format!("Blaschke parameter must satisfy |a| < 1, got {a}")));
    }
    let s = (1.0 - a * a).sqrt();
    Ok(scalar_system(1.0, a, s, s, -a))
}

/// Conservative realization of `(1 - a z) / (z - a)` on a one-dimensional anti-Hilbert state.
pub fn reciprocal_blaschke_example(a: f64) -> Result<Colligation> {
    if !(a.abs() < 1.0) || a == 0.0 {
        return Err(Error::BadParameter(format!("reciprocal Blaschke parameter must satisfy 0 < |a| < 1, got {a}")));
    }
    let s = (1.0 - a * a).sqrt() / a.abs();
    Ok(scalar_system(-1.0, 1.0 / a, -s, s, -1.0 / a))
}

/// The reciprocal Blaschke system at `a = 1/2` with an extra anti-Hilbert mode that is
/// neither reachable nor visible, so the state has one more negative square than `θ`.
pub fn dead_mode_example() -> Colligation {
    let s3 = 3f64.sqrt();
    Colligation::new(
        SignatureSpace::canonical(0, 2),
        SignatureSpace::hilbert(1),
        SignatureSpace::hilbert(1),
        from_real(2, 2, &[2.0, 0.0, 0.0, 2.0]),
        from_real(2, 1, &[-s3, 0.0]),
        from_real(1, 2, &[s3, 0.0]),
        from_real(1, 1, &[-2.0]),
    )
    .expect("fixed example")
}

/// A passive, non-conservative system with `X = diag(-1, 1)`: the reciprocal Blaschke
/// operator at `a = 1/2` on `(x_1, x_2, u)`, mixed by a rotation in the `(x_2, y)` plane and
/// damped by `rho` on the input.
pub fn mixed_passive_example(c: f64, rho: f64) -> Result<Colligation> {
    if !(c.abs() <= 1.0) || !(rho.abs() <= 1.0) {
        return Err(Error::BadParameter("rotation cosine and damping must lie in [-1, 1]".into()));
    }
    let s = (1.0 - c * c).sqrt();
    let s3 = 3f64.sqrt();
    Colligation::new(
        SignatureSpace::new(from_real(2, 2, &[-1.0, 0.0, 0.0, 1.0]))?,
        SignatureSpace::hilbert(1),
        SignatureSpace::hilbert(1),
        from_real(2, 2, &[2.0, 0.0, -s * s3, c]),
        from_real(2, 1, &[-s3 * rho, 2.0 * s * rho]),
        from_real(1, 2, &[c * s3, s]),
        from_real(1, 1, &[-2.0 * c * rho]),
    )
}

/// Default instance of [`mixed_passive_example`].
pub fn mixed_example() -> Colligation {
    mixed_passive_example(0.6, 0.9).expect("fixed parameters")
}

/// `θ(z) = [z; 0]` realized isometrically on a one-dimensional Hilbert state.
pub fn padded_shift_example() -> Colligation {
    Colligation::new(
        SignatureSpace::hilbert(1),
        SignatureSpace::hilbert(1),
        SignatureSpace::hilbert(2),
        zeros(1, 1),
        from_real(1, 1, &[1.0]),
        from_real(2, 1, &[1.0, 0.0]),
        zeros(2, 1),
    )
    .expect("fixed example")
}

/// Result of a Ho-Kalman realization with the fitted state Gram.
#[derive(Debug, Clone, PartialEq)]
pub struct HoKalman {
    pub system: Colligation,
    /// Whether the Gram fit succeeded and the resulting system is passive.
    pub passive_certified: bool,
    /// Residual of the Gram fitting equations; infinite when the fit was singular.
    pub gram_residual: f64,
    pub singular_values: Vec<f64>,
}

/// Minimal realization of `markov = [D, M_1, .., M_N]` from the Hankel matrix of the tail.
///
/// The state Gram is fitted so that the system operator is co-isometric; if that fails the
/// Hilbert Gram is kept and `passive_certified` is false.
pub fn ho_kalman_realize(
    markov: &MarkovSequence,
    input: &SignatureSpace,
    output: &SignatureSpace,
    tol: f64,
) -> Result<HoKalman> {
    let seq = &markov.0;
    if seq.is_empty() {
        return Err(Error::BadParameter("empty Markov sequence".into()));
    }
    let (p, m) = (output.dim(), input.dim());
    if seq.iter().any(|mk| mk.shape() != (p, m)) {
        return Err(Error::ShapeMismatch("Markov parameters do not match channel dimensions".into()));
    }
    let tail = seq.len() - 1;
    let d = seq[0].clone();
    let k1 = tail / 2;
    let k2 = tail - k1;
    let empty = |sv: Vec<f64>| -> Result<HoKalman> {
        let sys = Colligation::new(
            SignatureSpace::hilbert(0),
            input.clone(),
            output.clone(),
            zeros(0, 0),
            zeros(0, m),
            zeros(p, 0),
            d.clone(),
        )?;
        let passive = sys.is_passive(crate::linalg::DEFAULT_TOL);
        Ok(HoKalman { system: sys, passive_certified: passive, gram_residual: 0.0, singular_values: sv })
    };
    if k1 == 0 || k2 == 0 {
        return empty(vec![]);
    }
    let mut h = zeros(k1 * p, k2 * m);
    let mut hs = zeros(k1 * p, k2 * m);
    for i in 0..k1 {
        for j in 0..k2 {
            h.view_mut((i * p, j * m), (p, m)).copy_from(&seq[i + j + 1]);
            if i + j + 2 <= tail {
                hs.view_mut((i * p, j * m), (p, m)).copy_from(&seq[i + j + 2]);
            }
        }
    }
    let svd = svd_sorted(&h);
    let sv = svd.s.clone();
    let smax = sv.first().copied().unwrap_or(0.0);
    if smax <= f64::MIN_POSITIVE {
        return empty(sv);
    }
    if sv.iter().any(|&s| s / smax > tol && s / smax <= 10.0 * tol) {
        return Err(Error::RankAmbiguous);
    }
    let n = sv.iter().filter(|&&s| s / smax > tol).count();
    let mut sq = zeros(n, n);
    let mut sqi = zeros(n, n);
    for k in 0..n {
        sq[(k, k)] = C64::new(sv[k].sqrt(), 0.0);
        sqi[(k, k)] = C64::new(1.0 / sv[k].sqrt(), 0.0);
    }
    let ur = svd.u.columns(0, n).into_owned();
    let vr = svd.v.columns(0, n).into_owned();
    let obs = &ur * &sq;
    let ctrl = &sq * vr.adjoint();
    let a = &sqi * ur.adjoint() * &hs * &vr * &sqi;
    let b = ctrl.columns(0, m).into_owned();
    let c = obs.rows(0, p).into_owned();

    let (p_fit, gram_residual) = fit_inverse_gram(&a, &b, &c, &d, input, output);
    let scale = 1.0 + norm2(&a).powi(2) + norm2(&b).powi(2) + norm2(&c).powi(2) + norm2(&d).powi(2);
    let fitted = p_fit
        .filter(|_| gram_residual <= 1e-6 * scale)
        .and_then(|pm| inverse(&pm))
        .and_then(|g| SignatureSpace::new(hermitian_part(&g)).ok());
    let (state, certified) = match fitted {
        Some(sp) => (sp, true),
        None => (SignatureSpace::hilbert(n), false),
    };
    let system = Colligation::new(state, input.clone(), output.clone(), a, b, c, d)?;
    let passive_certified = certified && system.is_passive(crate::linalg::DEFAULT_TOL);
    Ok(HoKalman { system, passive_certified, gram_residual, singular_values: sv })
}

/// Hermitian `P` minimizing the co-isometry equations
/// `A P A^H + B G_U^{-1} B^H = P`, `A P C^H + B G_U^{-1} D^H = 0`, `C P C^H + D G_U^{-1} D^H = G_Y^{-1}`.
fn fit_inverse_gram(
    a: &CMat,
    b: &CMat,
    c: &CMat,
    d: &CMat,
    input: &SignatureSpace,
    output: &SignatureSpace,
) -> (Option<CMat>, f64) {
    let n = a.nrows();
    let gui = input.gram_inv();
    let residual_of = |pm: &CMat| -> Vec<C64> {
        let r1 = a * pm * a.adjoint() - pm;
        let r2 = a * pm * c.adjoint();
        let r3 = c * pm * c.adjoint();
        r1.iter().chain(r2.iter()).chain(r3.iter()).copied().collect()
    };
    let constant = {
        let r1 = b * gui * b.adjoint();
        let r2 = b * gui * d.adjoint();
        let r3 = d * gui * d.adjoint() - output.gram_inv();
        r1.iter().chain(r2.iter()).chain(r3.iter()).copied().collect::<Vec<_>>()
    };
    // Real basis of n x n Hermitian matrices.
    let mut basis = Vec::with_capacity(n * n);
    for i in 0..n {
        for j in i..n {
            let mut e = zeros(n, n);
            if i == j {
                e[(i, i)] = C64::new(1.0, 0.0);
                basis.push(e);
            } else {
                e[(i, j)] = C64::new(1.0, 0.0);
                e[(j, i)] = C64::new(1.0, 0.0);
                basis.push(e.clone());
                let mut f = zeros(n, n);
                f[(i, j)] = C64::new(0.0, 1.0);
                f[(j, i)] = C64::new(0.0, -1.0);
                basis.push(f);
            }
        }
    }
    let rows = 2 * constant.len();
    let mut lhs = nalgebra::DMatrix::<f64>::zeros(rows, basis.len());
    for (k, e) in basis.iter().enumerate() {
        for (i, v) in residual_of(e).iter().enumerate() {
            lhs[(2 * i, k)] = v.re;
            lhs[(2 * i + 1, k)] = v.im;
        }
    }
    let mut rhs = nalgebra::DVector::<f64>::zeros(rows);
    for (i, v) in constant.iter().enumerate() {
        rhs[2 * i] = -v.re;
        rhs[2 * i + 1] = -v.im;
    }
    let lhs_c = lhs.map(|v| C64::new(v, 0.0));
    let rhs_c = CMat::from_iterator(rows, 1, rhs.iter().map(|&v| C64::new(v, 0.0)));
    let coef = pinv(&lhs_c, 1e-12) * &rhs_c;
    let mut pm = zeros(n, n);
    for (k, e) in basis.iter().enumerate() {
        pm += e * C64::new(coef[(k, 0)].re, 0.0);
    }
    let res: f64 = residual_of(&pm).iter().zip(constant.iter()).map(|(x, y)| (x + y).norm_sqr()).sum::<f64>().sqrt();
    (Some(pm), res)
}

/// Direct sum of two colligations sharing no channels: inputs and outputs are stacked.
pub fn parallel_sum(s1: &Colligation, s2: &Colligation) -> Result<Colligation> {
    Colligation::new(
        s1.state().direct_sum(s2.state()),
        s1.input().direct_sum(s2.input()),
        s1.output().direct_sum(s2.output()),
        block_diag(s1.a(), s2.a()),
        block_diag(s1.b(), s2.b()),
        block_diag(s1.c(), s2.c()),
        block_diag(s1.d(), s2.d()),
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::colligation::SystemClass;
    use crate::linalg::{eye, max_abs, r, DEFAULT_TOL};

    #[test]
    fn zero_generator_gives_identity() {
        let sp = SignatureSpace::canonical(2, 1);
        let u = j_unitary_from_generator(&sp, &zeros(3, 3));
        assert!(max_abs(&(u.matrix - eye(3))) < 1e-15);
    }

    #[test]
    fn hyperbolic_rotation_closed_form() {
        let sp = SignatureSpace::new(from_real(2, 2, &[-1.0, 0.0, 0.0, 1.0])).unwrap();
        let t = 0.7;
        // K = G^{-1} S = t [[0,1],[1,0]] requires S = G K = t [[0,-1],[1,0]].
        let s = from_real(2, 2, &[0.0, -t, t, 0.0]);
        let u = j_unitary_from_generator(&sp, &s);
        let expect = from_real(2, 2, &[t.cosh(), t.sinh(), t.sinh(), t.cosh()]);
        assert!(max_abs(&(u.matrix - expect)) < 1e-14);
    }

    #[test]
    fn blaschke_markov() {
        let s = blaschke_example(0.5).unwrap();
        let m = s.markov_parameters(3);
        let want = [-0.5, 0.75, 0.375, 0.1875];
        for (k, w) in want.iter().enumerate() {
            assert!((m.0[k][(0, 0)] - r(*w)).norm() < 1e-15);
        }
        assert_eq!(s.system_class(DEFAULT_TOL), SystemClass::Conservative);
        assert!(blaschke_example(1.0).is_err());
    }

    #[test]
    fn reciprocal_blaschke_values() {
        let s = reciprocal_blaschke_example(0.5).unwrap();
        assert!((s.b()[(0, 0)] - r(-(3f64.sqrt()))).norm() < 1e-15);
        let m = s.markov_parameters(3);
        for (k, w) in [-2.0, -3.0, -6.0, -12.0].iter().enumerate() {
            assert!((m.0[k][(0, 0)] - r(*w)).norm() < 1e-13);
        }
        assert!(matches!(reciprocal_blaschke_example(0.0), Err(Error::BadParameter(_))));
    }

    #[test]
    fn e3_is_passive_not_conservative() {
        let s = mixed_example();
        assert_eq!(s.system_class(DEFAULT_TOL), SystemClass::Passive);
    }

    #[test]
    fn padded_shift_is_isometric() {
        assert_eq!(padded_shift_example().system_class(DEFAULT_TOL), SystemClass::Isometric);
    }

    #[test]
    fn ho_kalman_recovers_scalar_examples() {
        let b = blaschke_example(0.5).unwrap();
        let hk = ho_kalman_realize(&b.markov_parameters(8), b.input(), b.output(), 1e-10).unwrap();
        assert_eq!(hk.system.state_dim(), 1);
        assert!((hk.system.a()[(0, 0)] - r(0.5)).norm() < 1e-8);
        assert!(hk.passive_certified);

        let rb = reciprocal_blaschke_example(0.5).unwrap();
        let hk = ho_kalman_realize(&rb.markov_parameters(8), rb.input(), rb.output(), 1e-10).unwrap();
        assert_eq!(hk.system.state_dim(), 1);
        assert!((hk.system.a()[(0, 0)] - r(2.0)).norm() < 1e-8);
        assert_eq!(hk.system.kappa(), 1);
        assert!(hk.passive_certified);
    }

    #[test]
    fn ho_kalman_zero_tail() {
        let seq = MarkovSequence(vec![eye(1), zeros(1, 1), zeros(1, 1), zeros(1, 1)]);
        let sp = SignatureSpace::hilbert(1);
        let hk = ho_kalman_realize(&seq, &sp, &sp, 1e-10).unwrap();
        assert_eq!(hk.system.state_dim(), 0);
    }
}
