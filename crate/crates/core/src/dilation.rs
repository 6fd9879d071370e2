//! Truncated shift-register dilations and channel embeddings.
//!
//! The dilated state is laid out as `[f_{-N}, .., f_{-1}, x, f_1, .., f_N]`:
//! left cells carry copies of the defect space, right cells copies of the
//! co-defect space, both with identity Gram.

use serde::Serialize;

use crate::colligation::Colligation;
use crate::error::{Error, Result};
use crate::indefinite::{subspace_regular, SignatureSpace};
use crate::julia::julia_embedding;
use crate::linalg::{block_diag, eye, hstack, max_abs, norm2, orth, vstack, zeros, CMat, DEFAULT_TOL, RANK_TOL};

pub const DEFAULT_DEPTH: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum DilationKind {
    Conservative,
    Isometric,
    Coisometric,
}

impl DilationKind {
    fn left(self) -> bool {
        matches!(self, DilationKind::Conservative | DilationKind::Isometric)
    }

    fn right(self) -> bool {
        matches!(self, DilationKind::Conservative | DilationKind::Coisometric)
    }
}

/// Location of the original state space and of the two tails inside a dilated state.
#[derive(Debug, Clone, PartialEq)]
pub struct DilationEmbedding {
    /// Columns map `X` into the dilated state; must preserve the Gram.
    pub x_injection: CMat,
    /// Basis of the tail `𝒟` that `Â` leaves invariant.
    pub left_tail: CMat,
    /// Basis of the tail `𝒟_*` that `Â^[*]` leaves invariant.
    pub right_tail: CMat,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TruncatedDilation {
    pub base: Colligation,
    pub kind: DilationKind,
    pub depth: usize,
    pub dilated: Colligation,
    pub embedding: DilationEmbedding,
    /// Markov parameters agree with the base system at least up to this index.
    pub exactness_horizon: usize,
    pub defect_rank: usize,
    pub codefect_rank: usize,
}

impl TruncatedDilation {
    /// Offset of the state block inside the dilated state.
    pub fn state_offset(&self) -> usize {
        if self.kind.left() {
            self.depth * self.defect_rank
        } else {
            0
        }
    }

    /// Largest isometry and co-isometry defects of the dilated system operator away from the
    /// truncated cells: the input of `f_{-N}` and the output of `f_N` are excluded.
    pub fn interior_residuals(&self) -> (f64, f64) {
        let t = self.dilated.system_operator();
        let nh = self.dilated.state_dim();
        let total_in = t.domain.dim();
        let total_out = t.codomain.dim();
        let keep = |n: usize, skip: Option<(usize, usize)>| -> Vec<usize> {
            (0..n).filter(|i| skip.is_none_or(|(s, l)| *i < s || *i >= s + l)).collect()
        };
        let left_edge = (self.kind.left() && self.defect_rank > 0).then_some((0, self.defect_rank));
        let right_edge =
            (self.kind.right() && self.codefect_rank > 0).then_some((nh - self.codefect_rank, self.codefect_rank));
        let iso = t.domain.gram() - t.matrix.adjoint() * t.codomain.gram() * &t.matrix;
        let coiso = t.codomain.gram_inv() - &t.matrix * t.domain.gram_inv() * t.matrix.adjoint();
        let cols = keep(total_in, left_edge);
        let rows = keep(total_out, right_edge);
        let iso_res = norm2(&iso.select_rows(&cols).select_columns(&cols));
        let coiso_res = norm2(&coiso.select_rows(&rows).select_columns(&rows));
        (iso_res, coiso_res)
    }
}

pub fn conservative_dilation(sys: &Colligation, depth: usize, tol: f64) -> Result<TruncatedDilation> {
    dilate(sys, DilationKind::Conservative, depth, tol)
}

pub fn isometric_dilation(sys: &Colligation, depth: usize, tol: f64) -> Result<TruncatedDilation> {
    dilate(sys, DilationKind::Isometric, depth, tol)
}

pub fn coisometric_dilation(sys: &Colligation, depth: usize, tol: f64) -> Result<TruncatedDilation> {
    dilate(sys, DilationKind::Coisometric, depth, tol)
}

pub fn dilate(sys: &Colligation, kind: DilationKind, depth: usize, tol: f64) -> Result<TruncatedDilation> {
    if depth == 0 {
        return Err(Error::BadParameter("dilation depth must be at least 1".into()));
    }
    let je = julia_embedding(sys, tol)?;
    let n = sys.state_dim();
    let r = if kind.left() { je.defect_rank() } else { 0 };
    let rs = if kind.right() { je.codefect_rank() } else { 0 };
    let (nl, nr) = (depth * r, depth * rs);
    let nh = nl + n + nr;
    let xo = nl;
    // Cell -k starts at (depth - k) r; cell k starts at nl + n + (k - 1) rs.
    let right_cell = |k: usize| nl + n + (k - 1) * rs;
    let x_corner = je.extended.d().view((sys.output_dim(), sys.input_dim()), (je.defect_rank(), je.codefect_rank()));

    let mut a = zeros(nh, nh);
    let mut b = zeros(nh, sys.input_dim());
    let mut c = zeros(sys.output_dim(), nh);
    a.view_mut((xo, xo), (n, n)).copy_from(sys.a());
    b.view_mut((xo, 0), (n, sys.input_dim())).copy_from(sys.b());
    c.view_mut((0, xo), (sys.output_dim(), n)).copy_from(sys.c());
    if r > 0 {
        for k in 1..depth {
            // f_{-(k+1)}' = f_{-k}
            let dst = (depth - k - 1) * r;
            let src = (depth - k) * r;
            a.view_mut((dst, src), (r, r)).copy_from(&eye(r));
        }
        let f1 = (depth - 1) * r;
        a.view_mut((f1, xo), (r, n)).copy_from(&je.d_t1_adjoint);
        b.view_mut((f1, 0), (r, sys.input_dim())).copy_from(&je.d_t2_adjoint);
        if rs > 0 {
            a.view_mut((f1, right_cell(1)), (r, rs)).copy_from(&x_corner);
        }
    }
    if rs > 0 {
        for k in 1..depth {
            a.view_mut((right_cell(k), right_cell(k + 1)), (rs, rs)).copy_from(&eye(rs));
        }
        a.view_mut((xo, right_cell(1)), (n, rs)).copy_from(&je.d_ts1);
        c.view_mut((0, right_cell(1)), (sys.output_dim(), rs)).copy_from(&je.d_ts2);
    }
    let gram = block_diag(&block_diag(&eye(nl), sys.state().gram()), &eye(nr));
    let dilated = Colligation::new(
        SignatureSpace::new(gram)?,
        sys.input().clone(),
        sys.output().clone(),
        a,
        b,
        c,
        sys.d().clone(),
    )?;
    let embedding = DilationEmbedding {
        x_injection: eye(nh).columns(xo, n).into_owned(),
        left_tail: eye(nh).columns(0, nl).into_owned(),
        right_tail: eye(nh).columns(nl + n, nr).into_owned(),
    };
    Ok(TruncatedDilation {
        base: sys.clone(),
        kind,
        depth,
        dilated,
        embedding,
        exactness_horizon: depth - 1,
        defect_rank: r,
        codefect_rank: rs,
    })
}

/// Outcome of the structural dilation test with the residual behind each condition.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DilationCheck {
    pub is_dilation: bool,
    pub gram_compatible: f64,
    pub left_invariant: f64,
    pub right_coinvariant: f64,
    pub output_kills_left: f64,
    pub input_adjoint_kills_right: f64,
    pub left_hilbert: bool,
    pub right_hilbert: bool,
    pub orthogonality: f64,
    pub dimensions_add_up: bool,
    pub recovery: f64,
}

fn leave_residual(op: &CMat, basis: &CMat) -> f64 {
    if basis.ncols() == 0 {
        return 0.0;
    }
    let q = orth(basis, RANK_TOL);
    let image = op * &q;
    norm2(&(&image - &q * (q.adjoint() * &image)))
}

fn is_hilbert_span(space: &SignatureSpace, basis: &CMat) -> bool {
    basis.ncols() == 0 || subspace_regular(space, basis, DEFAULT_TOL).map(|r| r.is_hilbert()).unwrap_or(false)
}

/// Tests whether `hat` dilates `sys` through the given embedding.
pub fn is_dilation(hat: &Colligation, sys: &Colligation, emb: &DilationEmbedding, tol: f64) -> DilationCheck {
    let gh = hat.state().gram();
    let e = &emb.x_injection;
    let (dl, dr) = (&emb.left_tail, &emb.right_tail);
    let shapes_ok = e.nrows() == hat.state_dim()
        && dl.nrows() == hat.state_dim()
        && dr.nrows() == hat.state_dim()
        && e.ncols() == sys.state_dim()
        && hat.input().gram() == sys.input().gram()
        && hat.output().gram() == sys.output().gram();
    if !shapes_ok {
        return DilationCheck {
            is_dilation: false,
            gram_compatible: f64::INFINITY,
            left_invariant: f64::INFINITY,
            right_coinvariant: f64::INFINITY,
            output_kills_left: f64::INFINITY,
            input_adjoint_kills_right: f64::INFINITY,
            left_hilbert: false,
            right_hilbert: false,
            orthogonality: f64::INFINITY,
            dimensions_add_up: false,
            recovery: f64::INFINITY,
        };
    }
    let gram_compatible = max_abs(&(e.adjoint() * gh * e - sys.state().gram()));
    let left_invariant = leave_residual(hat.a(), dl);
    let right_coinvariant = leave_residual(&hat.a_adjoint(), dr);
    let output_kills_left = if dl.ncols() == 0 { 0.0 } else { norm2(&(hat.c() * dl)) };
    let input_adjoint_kills_right = if dr.ncols() == 0 { 0.0 } else { norm2(&(hat.b_adjoint() * dr)) };
    let left_hilbert = is_hilbert_span(hat.state(), dl);
    let right_hilbert = is_hilbert_span(hat.state(), dr);
    let cross =
        |p: &CMat, q: &CMat| if p.ncols() == 0 || q.ncols() == 0 { 0.0 } else { max_abs(&(p.adjoint() * gh * q)) };
    let orthogonality = cross(e, dl).max(cross(e, dr)).max(cross(dl, dr));
    let dimensions_add_up = e.ncols() + dl.ncols() + dr.ncols() == hat.state_dim();

    let recovery = match crate::linalg::inverse(sys.state().gram()) {
        Some(gxi) if sys.state_dim() > 0 => {
            let left = &gxi * e.adjoint() * gh;
            let ra = max_abs(&(&left * hat.a() * e - sys.a()));
            let rb = max_abs(&(&left * hat.b() - sys.b()));
            let rc = max_abs(&(hat.c() * e - sys.c()));
            ra.max(rb).max(rc).max(max_abs(&(hat.d() - sys.d())))
        }
        _ => max_abs(&(hat.d() - sys.d())),
    };
    let scale = hat.scale();
    let ok = |v: f64| v <= tol * scale;
    let is_dilation = ok(gram_compatible)
        && ok(left_invariant)
        && ok(right_coinvariant)
        && ok(output_kills_left)
        && ok(input_adjoint_kills_right)
        && left_hilbert
        && right_hilbert
        && ok(orthogonality)
        && dimensions_add_up
        && ok(recovery);
    DilationCheck {
        is_dilation,
        gram_compatible,
        left_invariant,
        right_coinvariant,
        output_kills_left,
        input_adjoint_kills_right,
        left_hilbert,
        right_hilbert,
        orthogonality,
        dimensions_add_up,
        recovery,
    }
}

/// Added channel blocks for [`embed_system`].
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelExtension {
    pub extra_input: SignatureSpace,
    pub extra_output: SignatureSpace,
    pub b1: CMat,
    pub c1: CMat,
    pub d12: CMat,
    pub d21: CMat,
    pub d22: CMat,
}

/// `(A, [B B1], [C; C1], [[D, D12], [D21, D22]])` over `U ⊕ U'` and `Y ⊕ Y'`.
pub fn embed_system(sys: &Colligation, ext: &ChannelExtension) -> Result<Colligation> {
    if !ext.extra_input.is_hilbert() || !ext.extra_output.is_hilbert() {
        return Err(Error::NonHilbertChannel);
    }
    let (n, m, p) = (sys.state_dim(), sys.input_dim(), sys.output_dim());
    let (m2, p2) = (ext.extra_input.dim(), ext.extra_output.dim());
    for (name, mat, shape) in [
        ("B1", &ext.b1, (n, m2)),
        ("C1", &ext.c1, (p2, n)),
        ("D12", &ext.d12, (p, m2)),
        ("D21", &ext.d21, (p2, m)),
        ("D22", &ext.d22, (p2, m2)),
    ] {
        if mat.shape() != shape {
            return Err(Error::ShapeMismatch(format!(
                "{name} is {}x{}, expected {}x{}",
                mat.nrows(),
                mat.ncols(),
                shape.0,
                shape.1
            )));
        }
    }
    Colligation::new(
        sys.state().clone(),
        sys.input().direct_sum(&ext.extra_input),
        sys.output().direct_sum(&ext.extra_output),
        sys.a().clone(),
        hstack(&[sys.b(), &ext.b1]),
        vstack(&[sys.c(), &ext.c1]),
        vstack(&[&hstack(&[sys.d(), &ext.d12]), &hstack(&[&ext.d21, &ext.d22])]),
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{from_real, r};

    fn small_passive() -> Colligation {
        Colligation::new(
            SignatureSpace::hilbert(1),
            SignatureSpace::hilbert(1),
            SignatureSpace::hilbert(1),
            from_real(1, 1, &[0.3]),
            from_real(1, 1, &[0.4]),
            from_real(1, 1, &[0.5]),
            from_real(1, 1, &[0.2]),
        )
        .unwrap()
    }

    #[test]
    fn depth_zero_rejected() {
        assert!(matches!(conservative_dilation(&small_passive(), 0, DEFAULT_TOL), Err(Error::BadParameter(_))));
    }

    #[test]
    fn scalar_dilation_structure() {
        let s = small_passive();
        let d = conservative_dilation(&s, 3, DEFAULT_TOL).unwrap();
        assert_eq!(d.dilated.state_dim(), 1 + 3 * d.defect_rank + 3 * d.codefect_rank);
        let chk = is_dilation(&d.dilated, &s, &d.embedding, 1e-10);
        assert!(chk.is_dilation, "{chk:?}");
        let (iso, coiso) = d.interior_residuals();
        assert!(iso < 1e-12 && coiso < 1e-12, "{iso} {coiso}");
        let m1 = s.markov_parameters(6);
        let m2 = d.dilated.markov_parameters(6);
        assert!(m1.max_diff(&m2) < 1e-14);
    }

    #[test]
    fn corrupted_corner_detected() {
        let s = small_passive();
        let d = conservative_dilation(&s, 2, DEFAULT_TOL).unwrap();
        let mut c = d.dilated.c().clone();
        c[(0, 0)] = r(0.1);
        let bad = Colligation::new(
            d.dilated.state().clone(),
            s.input().clone(),
            s.output().clone(),
            d.dilated.a().clone(),
            d.dilated.b().clone(),
            c,
            s.d().clone(),
        )
        .unwrap();
        assert!(!is_dilation(&bad, &s, &d.embedding, 1e-10).is_dilation);
    }

    #[test]
    fn hilbert_check_on_added_channels() {
        let s = small_passive();
        let ext = ChannelExtension {
            extra_input: SignatureSpace::canonical(0, 1),
            extra_output: SignatureSpace::canonical(0, 1),
            b1: zeros(1, 1),
            c1: zeros(1, 1),
            d12: zeros(1, 1),
            d21: zeros(1, 1),
            d22: zeros(1, 1),
        };
        assert_eq!(embed_system(&s, &ext), Err(Error::NonHilbertChannel));
    }
}
