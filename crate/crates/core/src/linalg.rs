//! Dense complex helpers shared by every module.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

pub type C64 = Complex64;
pub type CMat = DMatrix<C64>;
pub type CVec = DVector<C64>;

/// Relative singular-value cutoff for rank decisions.
pub const RANK_TOL: f64 = 1e-10;
/// Default tolerance for semidefiniteness and classification tests.
pub const DEFAULT_TOL: f64 = 1e-9;
/// Principal-angle threshold for subspace comparisons.
pub const SUBSPACE_TOL: f64 = 1e-8;

pub fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

pub fn r(re: f64) -> C64 {
    C64::new(re, 0.0)
}

pub fn zeros(rows: usize, cols: usize) -> CMat {
    CMat::zeros(rows, cols)
}

pub fn eye(n: usize) -> CMat {
    CMat::identity(n, n)
}

pub fn from_real(rows: usize, cols: usize, data: &[f64]) -> CMat {
    CMat::from_row_iterator(rows, cols, data.iter().map(|&x| r(x)))
}

pub fn hermitian_part(m: &CMat) -> CMat {
    (m + m.adjoint()) * r(0.5)
}

/// Largest singular value; zero for empty matrices.
pub fn norm2(m: &CMat) -> f64 {
    if m.is_empty() {
        return 0.0;
    }
    singular_values(m).first().copied().unwrap_or(0.0)
}

/// Singular values in descending order.
pub fn singular_values(m: &CMat) -> Vec<f64> {
    if m.is_empty() {
        return Vec::new();
    }
    let mut s: Vec<f64> = to_faer(m).singular_values().expect("SVD iteration converges for finite input");
    s.sort_by(|a, b| b.total_cmp(a));
    s
}

// Dense decompositions go through faer: nalgebra's complex SVD loses accuracy on
// some nearly rank-deficient inputs, which the Riccati iteration runs into.
fn to_faer(m: &CMat) -> faer::Mat<C64> {
    faer::Mat::from_fn(m.nrows(), m.ncols(), |i, j| m[(i, j)])
}

fn from_faer(m: faer::MatRef<'_, C64>) -> CMat {
    CMat::from_fn(m.nrows(), m.ncols(), |i, j| m[(i, j)])
}

/// Thin SVD with columns sorted by descending singular value.
pub struct SortedSvd {
    pub u: CMat,
    pub s: Vec<f64>,
    pub v: CMat,
}

pub fn svd_sorted(m: &CMat) -> SortedSvd {
    let (rows, cols) = m.shape();
    let k = rows.min(cols);
    if k == 0 {
        return SortedSvd { u: zeros(rows, 0), s: Vec::new(), v: zeros(cols, 0) };
    }
    let svd = to_faer(m).thin_svd().expect("SVD iteration converges for finite input");
    let u = from_faer(svd.U());
    let v = from_faer(svd.V());
    let sv: Vec<f64> = (0..k).map(|i| svd.S().column_vector()[i].re).collect();
    let mut idx: Vec<usize> = (0..k).collect();
    idx.sort_by(|&a, &b| sv[b].total_cmp(&sv[a]));
    let mut us = zeros(rows, k);
    let mut vs = zeros(cols, k);
    let mut s = Vec::with_capacity(k);
    for (j, &i) in idx.iter().enumerate() {
        us.set_column(j, &u.column(i));
        vs.set_column(j, &v.column(i));
        s.push(sv[i]);
    }
    SortedSvd { u: us, s, v: vs }
}

/// Eigen-decomposition of a Hermitian matrix, eigenvalues descending.
pub struct HermEig {
    pub values: Vec<f64>,
    pub vectors: CMat,
}

pub fn herm_eig(m: &CMat) -> HermEig {
    let n = m.nrows();
    if n == 0 {
        return HermEig { values: Vec::new(), vectors: zeros(0, 0) };
    }
    let eig = to_faer(&hermitian_part(m))
        .self_adjoint_eigen(faer::Side::Lower)
        .expect("Hermitian eigensolver converges for finite input");
    let vals: Vec<f64> = (0..n).map(|i| eig.S().column_vector()[i].re).collect();
    let vecs = from_faer(eig.U());
    let mut idx: Vec<usize> = (0..n).collect();
    idx.sort_by(|&a, &b| vals[b].total_cmp(&vals[a]));
    let mut vectors = zeros(n, n);
    let mut values = Vec::with_capacity(n);
    for (j, &i) in idx.iter().enumerate() {
        let mut col = vecs.column(i).into_owned();
        phase_normalize(&mut col);
        vectors.set_column(j, &col);
        values.push(vals[i]);
    }
    HermEig { values, vectors }
}

/// Rotates a vector so its first non-negligible entry is real and positive.
pub fn phase_normalize(v: &mut CVec) {
    let scale = v.iter().map(|z| z.norm()).fold(0.0, f64::max);
    if scale == 0.0 {
        return;
    }
    if let Some(p) = v.iter().find(|z| z.norm() > 1e-8 * scale) {
        let phase = p.conj() / p.norm();
        *v *= phase;
    }
}

/// Smallest eigenvalue of the Hermitian part; zero for empty matrices.
pub fn min_eig(m: &CMat) -> f64 {
    herm_eig(m).values.last().copied().unwrap_or(0.0)
}

/// Orthonormal basis of the column space, keeping singular values above `abs_tol`.
pub fn orth_abs(m: &CMat, abs_tol: f64) -> CMat {
    let svd = svd_sorted(m);
    let rank = svd.s.iter().take_while(|&&s| s > abs_tol).count();
    svd.u.columns(0, rank).into_owned()
}

/// Orthonormal basis of the column space with relative cutoff `rel_tol * sigma_max`.
pub fn orth(m: &CMat, rel_tol: f64) -> CMat {
    let smax = norm2(m);
    if smax == 0.0 {
        return zeros(m.nrows(), 0);
    }
    orth_abs(m, rel_tol * smax)
}

pub fn rank(m: &CMat, rel_tol: f64) -> usize {
    orth(m, rel_tol).ncols()
}

/// Orthonormal basis of the kernel, treating singular values at most `abs_tol` as zero.
pub fn null_space(m: &CMat, abs_tol: f64) -> CMat {
    let (rows, cols) = m.shape();
    if cols == 0 {
        return zeros(0, 0);
    }
    // Padding to a square shape makes the thin SVD return a full right basis.
    let mut sq = zeros(rows.max(cols), cols);
    sq.view_mut((0, 0), (rows, cols)).copy_from(m);
    let svd = svd_sorted(&sq);
    let rank = svd.s.iter().take_while(|&&s| s > abs_tol).count();
    svd.v.columns(rank, cols - rank).into_owned()
}

pub fn inverse(m: &CMat) -> Option<CMat> {
    if m.is_empty() {
        return Some(m.clone());
    }
    m.clone().try_inverse()
}

/// Solves `a x = b` for square `a` via LU.
pub fn solve(a: &CMat, b: &CMat) -> Option<CMat> {
    if a.is_empty() {
        return Some(zeros(0, b.ncols()));
    }
    a.clone().lu().solve(b)
}

pub fn pinv(m: &CMat, rel_tol: f64) -> CMat {
    let (rows, cols) = m.shape();
    let svd = svd_sorted(m);
    let cut = rel_tol * svd.s.first().copied().unwrap_or(0.0);
    let mut out = zeros(cols, rows);
    for (i, &s) in svd.s.iter().enumerate() {
        if s > cut && s > 0.0 {
            out += svd.v.column(i) * svd.u.column(i).adjoint() * r(1.0 / s);
        }
    }
    out
}

/// Eigenvalues of a general complex matrix via the Schur form.
pub fn eigenvalues(m: &CMat) -> Vec<C64> {
    if m.is_empty() {
        return Vec::new();
    }
    to_faer(m).eigenvalues().expect("eigenvalue iteration converges for finite input")
}

pub fn spectral_radius(m: &CMat) -> f64 {
    eigenvalues(m).iter().map(|z| z.norm()).fold(0.0, f64::max)
}

pub fn block_diag(a: &CMat, b: &CMat) -> CMat {
    let mut out = zeros(a.nrows() + b.nrows(), a.ncols() + b.ncols());
    out.view_mut((0, 0), a.shape()).copy_from(a);
    out.view_mut((a.nrows(), a.ncols()), b.shape()).copy_from(b);
    out
}

pub fn hstack(blocks: &[&CMat]) -> CMat {
    let rows = blocks.first().map(|b| b.nrows()).unwrap_or(0);
    let cols = blocks.iter().map(|b| b.ncols()).sum();
    let mut out = zeros(rows, cols);
    let mut at = 0;
    for b in blocks {
        assert_eq!(b.nrows(), rows, "hstack row mismatch");
        out.view_mut((0, at), b.shape()).copy_from(*b);
        at += b.ncols();
    }
    out
}

pub fn vstack(blocks: &[&CMat]) -> CMat {
    let cols = blocks.first().map(|b| b.ncols()).unwrap_or(0);
    let rows = blocks.iter().map(|b| b.nrows()).sum();
    let mut out = zeros(rows, cols);
    let mut at = 0;
    for b in blocks {
        assert_eq!(b.ncols(), cols, "vstack column mismatch");
        out.view_mut((at, 0), b.shape()).copy_from(*b);
        at += b.nrows();
    }
    out
}

/// `[[a, b], [c, d]]` with shapes checked by the caller.
pub fn block2(a: &CMat, b: &CMat, c: &CMat, d: &CMat) -> CMat {
    vstack(&[&hstack(&[a, b]), &hstack(&[c, d])])
}

/// Sine of the largest principal angle by which span(q1) leaves span(q2).
/// Both arguments must have orthonormal columns.
pub fn containment_gap(q1: &CMat, q2: &CMat) -> f64 {
    if q1.ncols() == 0 {
        return 0.0;
    }
    if q2.ncols() == 0 {
        return 1.0;
    }
    let resid = q1 - q2 * (q2.adjoint() * q1);
    norm2(&resid).min(1.0)
}

/// Sine of the largest principal angle between two equal-dimensional spans.
pub fn subspace_distance(q1: &CMat, q2: &CMat) -> f64 {
    if q1.ncols() != q2.ncols() {
        return 1.0;
    }
    containment_gap(q1, q2).max(containment_gap(q2, q1))
}

/// Unitary `V` minimising `||p - q V||_F`, returned with the relative residual.
pub fn procrustes(p: &CMat, q: &CMat) -> Option<(CMat, f64)> {
    if p.shape() != q.shape() {
        return None;
    }
    let k = p.ncols();
    if k == 0 {
        return Some((zeros(0, 0), 0.0));
    }
    let svd = svd_sorted(&(q.adjoint() * p));
    let v = &svd.u * svd.v.adjoint();
    let resid = (p - q * &v).norm() / (1.0 + p.norm());
    Some((v, resid))
}

pub fn max_abs(m: &CMat) -> f64 {
    m.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

/// Selects rows `start..start+len` of the identity, as an `n x len` injection.
pub fn coordinate_injection(n: usize, start: usize, len: usize) -> CMat {
    let mut e = zeros(n, len);
    for i in 0..len {
        e[(start + i, i)] = r(1.0);
    }
    e
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn null_space_of_wide_matrix_is_full() {
        let m = from_real(1, 3, &[1.0, 1.0, 0.0]);
        let k = null_space(&m, 1e-12);
        assert_eq!(k.ncols(), 2);
        assert!(max_abs(&(&m * &k)) < 1e-12);
    }

    #[test]
    fn eigenvalues_of_triangular() {
        let m = from_real(2, 2, &[2.0, 1.0, 0.0, 0.5]);
        let mut ev: Vec<f64> = eigenvalues(&m).iter().map(|z| z.re).collect();
        ev.sort_by(f64::total_cmp);
        assert!((ev[0] - 0.5).abs() < 1e-12 && (ev[1] - 2.0).abs() < 1e-12);
        assert!((spectral_radius(&m) - 2.0).abs() < 1e-12);
    }

    #[test]
    fn herm_eig_sorted_descending() {
        let m = from_real(2, 2, &[0.0, 1.0, 1.0, 0.0]);
        let e = herm_eig(&m);
        assert!((e.values[0] - 1.0).abs() < 1e-12 && (e.values[1] + 1.0).abs() < 1e-12);
        let s = 1.0 / 2f64.sqrt();
        assert!((e.vectors[(0, 0)] - r(s)).norm() < 1e-12);
        assert!((e.vectors[(1, 0)] - r(s)).norm() < 1e-12);
    }

    #[test]
    fn procrustes_recovers_rotation() {
        let q = from_real(3, 2, &[1.0, 0.0, 0.0, 1.0, 1.0, 1.0]);
        let v = CMat::from_row_slice(2, 2, &[c(0.0, 1.0), r(0.0), r(0.0), r(-1.0)]);
        let (w, res) = procrustes(&(&q * &v), &q).unwrap();
        assert!(res < 1e-12);
        assert!(max_abs(&(w - v)) < 1e-12);
    }
}
