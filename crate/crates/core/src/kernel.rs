//! Schur-kernel Gram matrices, negative-squares estimation, admissibility, and
//! boundary defect inequalities.

use rand::Rng;
use serde::Serialize;

use crate::colligation::{Colligation, Realization};
use crate::corpus::rng_from_seed;
use crate::error::{Error, Result};
use crate::indefinite::SignatureSpace;
use crate::linalg::{herm_eig, hermitian_part, max_abs, norm2, zeros, CMat, CVec, C64, DEFAULT_TOL};

/// Anything that can be evaluated as an operator-valued function near the origin.
pub trait TransferSource {
    fn input(&self) -> &SignatureSpace;
    fn output(&self) -> &SignatureSpace;
    fn eval(&self, z: C64) -> Result<CMat>;
    /// Upper bound for the McMillan degree.
    fn state_dim(&self) -> usize;
    fn spectral_radius(&self) -> f64;

    /// `θ^*(w) = G_U^{-1} θ(w)^H G_Y`.
    fn eval_adjoint(&self, w: C64) -> Result<CMat> {
        Ok(self.input().gram_inv() * self.eval(w)?.adjoint() * self.output().gram())
    }

    /// Default sampling radius `0.4 / max(1, rho(A))`.
    fn sampling_radius(&self) -> f64 {
        0.4 / self.spectral_radius().max(1.0)
    }
}

impl TransferSource for Colligation {
    fn input(&self) -> &SignatureSpace {
        Colligation::input(self)
    }
    fn output(&self) -> &SignatureSpace {
        Colligation::output(self)
    }
    fn eval(&self, z: C64) -> Result<CMat> {
        self.transfer_eval(z)
    }
    fn state_dim(&self) -> usize {
        Colligation::state_dim(self)
    }
    fn spectral_radius(&self) -> f64 {
        Colligation::spectral_radius(self)
    }
}

impl TransferSource for Realization {
    fn input(&self) -> &SignatureSpace {
        &self.input
    }
    fn output(&self) -> &SignatureSpace {
        &self.output
    }
    fn eval(&self, z: C64) -> Result<CMat> {
        Realization::eval(self, z)
    }
    fn state_dim(&self) -> usize {
        Realization::state_dim(self)
    }
    fn spectral_radius(&self) -> f64 {
        Realization::spectral_radius(self)
    }
}

/// Relative eigenvalue cutoff for counting negative squares.
pub const KERNEL_EIG_TOL: f64 = 1e-8;

/// Points closer than this are treated as coincident.
const COINCIDENCE_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct KernelReport {
    pub points: Vec<C64>,
    pub vectors: Vec<CVec>,
    /// Entry `(i, j)` is `<K(w_i, w_j) f_j, f_i>_Y`.
    pub gram: CMat,
    pub eigenvalues: Vec<f64>,
    pub neg_count: usize,
    pub config_size: usize,
    pub tol_eig: f64,
}

fn check_points(points: &[C64]) -> Result<()> {
    for (i, &z) in points.iter().enumerate() {
        for &w in &points[..i] {
            if (z - w).norm() < COINCIDENCE_TOL {
                return Err(Error::CoincidentPoints);
            }
        }
        for &w in points {
            if (C64::new(1.0, 0.0) - z * w.conj()).norm() < COINCIDENCE_TOL {
                return Err(Error::CoincidentPoints);
            }
        }
    }
    Ok(())
}

fn evaluate_all<T: TransferSource + ?Sized>(theta: &T, points: &[C64]) -> Result<Vec<CMat>> {
    points.iter().map(|&z| theta.eval(z).map_err(|e| Error::EvaluationFailure(format!("at {z}: {e}")))).collect()
}

/// Gram matrix of the Schur kernel `(I - θ(z)θ^*(w)) / (1 - z w̄)` on the pairs `(w_i, f_i)`.
pub fn kernel_matrix<T: TransferSource + ?Sized>(theta: &T, points: &[C64], vectors: &[CVec]) -> Result<KernelReport> {
    if points.len() != vectors.len() {
        return Err(Error::ShapeMismatch(format!("{} points but {} vectors", points.len(), vectors.len())));
    }
    let p = theta.output().dim();
    if let Some(v) = vectors.iter().find(|v| v.len() != p) {
        return Err(Error::ShapeMismatch(format!("vector of length {}, output dimension is {p}", v.len())));
    }
    check_points(points)?;
    let values = evaluate_all(theta, points)?;
    let gy = theta.output().gram();
    let gui = theta.input().gram_inv();
    let k = points.len();
    // h_i = θ(w_i)^H G_Y f_i and g_i = G_Y f_i give entry (g_i^H f_j - h_i^H G_U^{-1} h_j) / (1 - w_i w̄_j).
    let g: Vec<CVec> = vectors.iter().map(|f| gy * f).collect();
    let h: Vec<CVec> = values.iter().zip(vectors).map(|(th, f)| th.adjoint() * gy * f).collect();
    let mut gram = zeros(k, k);
    for i in 0..k {
        for j in 0..k {
            let num = g[i].dotc(&vectors[j]) - h[i].dotc(&(gui * &h[j]));
            gram[(i, j)] = num / (C64::new(1.0, 0.0) - points[i] * points[j].conj());
        }
    }
    Ok(finish_report(points.to_vec(), vectors.to_vec(), gram))
}

fn finish_report(points: Vec<C64>, vectors: Vec<CVec>, gram: CMat) -> KernelReport {
    let gram = hermitian_part(&gram);
    let tol_eig = KERNEL_EIG_TOL * norm2(&gram);
    let eigenvalues = herm_eig(&gram).values;
    let neg_count = eigenvalues.iter().filter(|&&v| v < -tol_eig).count();
    let config_size = gram.nrows();
    KernelReport { points, vectors, gram, eigenvalues, neg_count, config_size, tol_eig }
}

/// Kernel Gram matrix using every canonical basis vector of `Y` at each point.
pub fn block_kernel_matrix<T: TransferSource + ?Sized>(theta: &T, points: &[C64]) -> Result<KernelReport> {
    let p = theta.output().dim();
    let mut pts = Vec::with_capacity(points.len() * p);
    let mut vecs = Vec::with_capacity(points.len() * p);
    for &z in points {
        for e in 0..p {
            pts.push(z);
            let mut v = CVec::zeros(p);
            v[e] = C64::new(1.0, 0.0);
            vecs.push(v);
        }
    }
    check_points(points)?;
    let values = evaluate_all(theta, points)?;
    let gy = theta.output().gram();
    let gui = theta.input().gram_inv();
    let k = points.len();
    let mut gram = zeros(k * p, k * p);
    for i in 0..k {
        for j in 0..k {
            let blk = (gy - gy * &values[i] * gui * values[j].adjoint() * gy)
                / (C64::new(1.0, 0.0) - points[i] * points[j].conj());
            gram.view_mut((i * p, j * p), (p, p)).copy_from(&blk);
        }
    }
    Ok(finish_report(pts, vecs, gram))
}

/// Uniform points in the open disk of the given radius with a minimum pairwise separation.
pub fn sample_disk_points<R: Rng>(rng: &mut R, count: usize, radius: f64, min_sep: f64) -> Vec<C64> {
    let mut out: Vec<C64> = Vec::with_capacity(count);
    let mut attempts = 0usize;
    while out.len() < count {
        attempts += 1;
        let rho = radius * rng.gen::<f64>().sqrt();
        let ang = std::f64::consts::TAU * rng.gen::<f64>();
        let z = C64::from_polar(rho, ang);
        // Separation is relaxed only if the disk is too crowded to honour it.
        let sep = if attempts > 1000 * (count + 1) { 0.0 } else { min_sep };
        if out.iter().all(|w| (z - w).norm() >= sep.max(COINCIDENCE_TOL)) {
            out.push(z);
        }
    }
    out
}

/// `count` points closed under complex conjugation, drawn from a seeded disk sampler.
pub fn conjugate_symmetric_points(count: usize, radius: f64, seed: u64) -> Vec<C64> {
    let mut rng = rng_from_seed(seed);
    let mut out = Vec::with_capacity(count);
    if count % 2 == 1 {
        out.push(C64::new(radius * (2.0 * rng.gen::<f64>() - 1.0), 0.0));
    }
    let half = sample_disk_points(&mut rng, count / 2, radius, MIN_SEPARATION);
    for z in half {
        let z = if z.im.abs() < MIN_SEPARATION { C64::new(z.re, MIN_SEPARATION) } else { z };
        out.push(z);
        out.push(z.conj());
    }
    out
}

pub const MIN_SEPARATION: f64 = 1e-3;
pub const STABLE_ROUNDS: usize = 5;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SamplerConfig {
    pub rounds: usize,
    pub points_per_round: usize,
    /// Sampling radius; `None` means `0.4 / max(1, rho(A))`.
    pub radius: Option<f64>,
    pub seed: u64,
}

impl Default for SamplerConfig {
    fn default() -> Self {
        SamplerConfig { rounds: 10, points_per_round: 8, radius: None, seed: 0 }
    }
}

/// Running maximum of negative counts over independent sampling rounds.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NegSquaresEstimate {
    /// Certified lower bound for the number of negative squares.
    pub kappa_hat: usize,
    /// Per-round running maximum; nondecreasing.
    pub trace: Vec<usize>,
    /// Per-round negative count.
    pub round_counts: Vec<usize>,
    /// Rounds completed since the running maximum last increased.
    pub stable_rounds: usize,
    pub config_size: usize,
    pub radius: f64,
    /// Heuristic: at least five stable rounds with kernels of size at least twice the degree bound.
    pub stabilized: bool,
}

pub fn negative_squares_estimate<T: TransferSource + ?Sized>(
    theta: &T,
    config: &SamplerConfig,
) -> Result<NegSquaresEstimate> {
    if config.rounds == 0 || config.points_per_round == 0 {
        return Err(Error::BadParameter("sampler needs at least one round and one point".into()));
    }
    let radius = config.radius.unwrap_or_else(|| theta.sampling_radius());
    if !(radius > 0.0 && radius < 1.0) {
        return Err(Error::BadParameter(format!("sampling radius {radius} must lie in (0, 1)")));
    }
    let mut rng = rng_from_seed(config.seed);
    let mut best = 0usize;
    let mut trace = Vec::with_capacity(config.rounds);
    let mut round_counts = Vec::with_capacity(config.rounds);
    let mut last_increase = 0usize;
    let mut config_size = 0usize;
    for round in 0..config.rounds {
        let pts = sample_disk_points(&mut rng, config.points_per_round, radius, MIN_SEPARATION);
        let rep = block_kernel_matrix(theta, &pts)?;
        config_size = rep.config_size;
        round_counts.push(rep.neg_count);
        if rep.neg_count > best {
            best = rep.neg_count;
            last_increase = round;
        }
        trace.push(best);
    }
    let stable_rounds = config.rounds - 1 - last_increase;
    let stabilized = stable_rounds >= STABLE_ROUNDS && config_size >= 2 * theta.state_dim();
    Ok(NegSquaresEstimate { kappa_hat: best, trace, round_counts, stable_rounds, config_size, radius, stabilized })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AdmissibilityReport {
    pub admissible: bool,
    pub kappa_hat: usize,
    pub neg_index: usize,
    pub estimate: NegSquaresEstimate,
}

/// Whether the negative squares of `θ_Σ` match the negative index of the state space.
///
/// A match is conclusive on its own because the estimate is a lower bound that never
/// exceeds the state index; a mismatch needs a stabilized trace.
pub fn admissibility_check(sys: &Colligation, config: &SamplerConfig) -> Result<AdmissibilityReport> {
    if !sys.is_passive(DEFAULT_TOL) {
        return Err(Error::NotPassive);
    }
    let est = negative_squares_estimate(sys, config)?;
    let neg_index = sys.kappa();
    if est.kappa_hat == neg_index {
        return Ok(AdmissibilityReport { admissible: true, kappa_hat: est.kappa_hat, neg_index, estimate: est });
    }
    if !est.stabilized {
        return Err(Error::Inconclusive(format!(
            "estimate {} below state index {neg_index} after {} stable rounds",
            est.kappa_hat, est.stable_rounds
        )));
    }
    Ok(AdmissibilityReport { admissible: false, kappa_hat: est.kappa_hat, neg_index, estimate: est })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MaxdimReport {
    pub kappa_hat: usize,
    pub neg_index: usize,
    pub estimate: NegSquaresEstimate,
}

/// Asserts that the estimated negative squares never exceed the state negative index.
pub fn maxdim_bound_check(sys: &Colligation, config: &SamplerConfig) -> Result<MaxdimReport> {
    if !sys.is_passive(DEFAULT_TOL) {
        return Err(Error::NotPassive);
    }
    let est = negative_squares_estimate(sys, config)?;
    let neg_index = sys.kappa();
    if est.kappa_hat > neg_index {
        return Err(Error::BoundViolated { kappa_hat: est.kappa_hat, neg_index });
    }
    Ok(MaxdimReport { kappa_hat: est.kappa_hat, neg_index, estimate: est })
}

/// Which defect inequality to test on the circle.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    /// `I - θ^H θ - φ^H φ >= 0`.
    Right,
    /// `I - θ θ^H - ψ ψ^H >= 0`.
    Left,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoundaryReport {
    pub side: Side,
    pub grid: usize,
    pub min_eig: f64,
    /// `(angle, min eigenvalue)` at grid points where the form dips below `-tol`.
    pub violations: Vec<(f64, f64)>,
    /// Largest norm of the form; zero for inner functions with exact defects.
    pub max_form_norm: f64,
    pub passed: bool,
}

/// Evaluates the defect inequality at `ζ_k = exp(2πik/N)`.
///
/// `defect` is `φ` (from `U` into a Hilbert space) on the right side and `ψ`
/// (from a Hilbert space into `Y`) on the left side; `None` means zero width.
pub fn boundary_defect_check<T: TransferSource + ?Sized>(
    theta: &T,
    defect: Option<&Realization>,
    side: Side,
    grid: usize,
    tol: f64,
) -> Result<BoundaryReport> {
    if !theta.input().is_hilbert() || !theta.output().is_hilbert() {
        return Err(Error::InvalidSpace("boundary check needs Hilbert channel spaces".into()));
    }
    if grid == 0 {
        return Err(Error::BadParameter("grid must have at least one point".into()));
    }
    let (m, p) = (theta.input().dim(), theta.output().dim());
    if let Some(dfn) = defect {
        let ok = match side {
            Side::Right => dfn.input.dim() == m,
            Side::Left => dfn.output.dim() == p,
        };
        if !ok {
            return Err(Error::ShapeMismatch("defect function channels do not match θ".into()));
        }
    }
    let mut min_eig = f64::INFINITY;
    let mut max_form_norm: f64 = 0.0;
    let mut violations = Vec::new();
    for k in 0..grid {
        let angle = std::f64::consts::TAU * k as f64 / grid as f64;
        let zeta = C64::from_polar(1.0, angle);
        let pole = |_| Error::PoleOnCircle { angle };
        let th = theta.eval(zeta).map_err(pole)?;
        let form = match side {
            Side::Right => {
                let mut f = CMat::identity(m, m) - th.adjoint() * &th;
                if let Some(dfn) = defect {
                    let ph = dfn.eval(zeta).map_err(pole)?;
                    f -= ph.adjoint() * ph;
                }
                f
            }
            Side::Left => {
                let mut f = CMat::identity(p, p) - &th * th.adjoint();
                if let Some(dfn) = defect {
                    let ps = dfn.eval(zeta).map_err(pole)?;
                    f -= &ps * ps.adjoint();
                }
                f
            }
        };
        let form = hermitian_part(&form);
        let lo = herm_eig(&form).values.last().copied().unwrap_or(0.0);
        max_form_norm = max_form_norm.max(max_abs(&form));
        min_eig = min_eig.min(lo);
        if lo < -tol {
            violations.push((angle, lo));
        }
    }
    Ok(BoundaryReport { side, grid, min_eig, passed: violations.is_empty(), violations, max_form_norm })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{blaschke_example, dead_mode_example, reciprocal_blaschke_example};
    use crate::linalg::{from_real, r};

    fn constant(d: CMat, gram_u: SignatureSpace, gram_y: SignatureSpace) -> Realization {
        let (p, m) = d.shape();
        Realization::new(gram_u, gram_y, zeros(0, 0), zeros(0, m), zeros(p, 0), d).unwrap()
    }

    #[test]
    fn unitary_constant_has_zero_kernel() {
        let sp = SignatureSpace::new(from_real(2, 2, &[-1.0, 0.0, 0.0, 1.0])).unwrap();
        let t = 0.3f64;
        let d = from_real(2, 2, &[t.cosh(), t.sinh(), t.sinh(), t.cosh()]);
        let th = constant(d, sp.clone(), sp);
        let rep = block_kernel_matrix(&th, &[r(0.1), C64::new(0.0, 0.2), r(-0.3)]).unwrap();
        assert!(max_abs(&rep.gram) < 1e-14);
        assert_eq!(rep.neg_count, 0);
    }

    #[test]
    fn zero_function_gives_szego_kernel() {
        let th = constant(zeros(1, 1), SignatureSpace::hilbert(1), SignatureSpace::hilbert(1));
        let pts = [r(0.1), C64::new(0.2, 0.3)];
        let one = CVec::from_element(1, r(1.0));
        let rep = kernel_matrix(&th, &pts, &[one.clone(), one]).unwrap();
        let want = r(1.0) / (r(1.0) - pts[0] * pts[1].conj());
        assert!((rep.gram[(0, 1)] - want).norm() < 1e-15);
        assert_eq!(rep.neg_count, 0);
    }

    #[test]
    fn coincident_points_rejected() {
        let th = constant(zeros(1, 1), SignatureSpace::hilbert(1), SignatureSpace::hilbert(1));
        assert_eq!(block_kernel_matrix(&th, &[r(0.1), r(0.1)]).unwrap_err(), Error::CoincidentPoints);
    }

    #[test]
    fn reciprocal_blaschke_has_one_negative_square() {
        let s = reciprocal_blaschke_example(0.5).unwrap();
        let pts: Vec<C64> = (0..6).map(|k| C64::from_polar(0.15, k as f64)).collect();
        assert_eq!(block_kernel_matrix(&s, &pts).unwrap().neg_count, 1);
        let est = negative_squares_estimate(&s, &SamplerConfig::default()).unwrap();
        assert_eq!(est.kappa_hat, 1);
        assert!(est.stabilized);
        assert!(est.trace.windows(2).all(|w| w[0] <= w[1]));
    }

    #[test]
    fn blaschke_has_none() {
        let s = blaschke_example(0.5).unwrap();
        let est = negative_squares_estimate(&s, &SamplerConfig::default()).unwrap();
        assert_eq!(est.kappa_hat, 0);
        assert!(est.stabilized);
    }

    #[test]
    fn dead_mode_is_not_admissible() {
        let rep = admissibility_check(&dead_mode_example(), &SamplerConfig::default()).unwrap();
        assert!(!rep.admissible);
        assert_eq!((rep.kappa_hat, rep.neg_index), (1, 2));
    }

    #[test]
    fn inner_function_has_tight_boundary_form() {
        let s = blaschke_example(0.3).unwrap();
        let rep = boundary_defect_check(&s, None, Side::Right, 64, 1e-10).unwrap();
        assert!(rep.passed);
        assert!(rep.max_form_norm < 1e-12);
    }

    #[test]
    fn pole_on_circle_reported() {
        let s = blaschke_example(0.0).unwrap();
        let shifted = Realization::new(
            s.input().clone(),
            s.output().clone(),
            from_real(1, 1, &[1.0]),
            s.b().clone(),
            s.c().clone(),
            s.d().clone(),
        )
        .unwrap();
        assert!(matches!(boundary_defect_check(&shifted, None, Side::Right, 8, 1e-9), Err(Error::PoleOnCircle { .. })));
    }
}
