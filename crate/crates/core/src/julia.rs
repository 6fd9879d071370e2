//! Defect factorizations, unitary (Julia) completions of contractions, and the
//! channel-extended system they induce.

use serde::Serialize;

use crate::colligation::{solve_resolvent, Colligation, Realization};
use crate::error::{Error, Result};
use crate::indefinite::{form_threshold, IndefOperator, SignatureSpace};
use crate::linalg::{block2, herm_eig, hermitian_part, hstack, norm2, vstack, zeros, CMat, C64};

/// Residual bound for the unitarity of a completion, relative to `(1 + |U|)^2`.
pub const COMPLETION_TOL: f64 = 1e-8;

/// `I - T^[*] T = D D^[*]` with `D` of full column rank and a Hilbert defect space.
#[derive(Debug, Clone, PartialEq)]
pub struct DefectFactorization {
    pub base: IndefOperator,
    pub rank: usize,
    /// `D`, of size `dim(domain) x rank`.
    pub d: CMat,
    /// `D^[*] = M^H` where `G_dom - T^H G_cod T = M M^H`.
    pub d_adjoint: CMat,
    pub defect_space: SignatureSpace,
    /// Retained eigenvalues of the defect form, descending.
    pub eigenvalues: Vec<f64>,
}

impl DefectFactorization {
    /// `|I - T^[*]T - D D^[*]|`.
    pub fn residual(&self) -> f64 {
        let t = &self.base.matrix;
        let g1inv = self.base.domain.gram_inv();
        let n = self.base.domain.dim();
        let lhs = CMat::identity(n, n) - g1inv * t.adjoint() * self.base.codomain.gram() * t;
        norm2(&(lhs - &self.d * &self.d_adjoint))
    }
}

/// Factors the defect form by eigendecomposition, dropping eigenvalues at or below the scaled threshold.
pub fn defect_factorization(t: &IndefOperator, tol: f64) -> Result<DefectFactorization> {
    let g1 = t.domain.gram();
    let image = hermitian_part(&(t.matrix.adjoint() * t.codomain.gram() * &t.matrix));
    let form = hermitian_part(&(g1 - &image));
    let thr = form_threshold(tol, g1, &image);
    let eig = herm_eig(&form);
    if let Some(&lo) = eig.values.last() {
        if lo < -thr {
            return Err(Error::NotContraction { min_eig: lo });
        }
    }
    let rank = eig.values.iter().take_while(|&&v| v > thr).count();
    let n = t.domain.dim();
    let mut m = zeros(n, rank);
    for k in 0..rank {
        let s = eig.values[k].sqrt();
        m.set_column(k, &(eig.vectors.column(k) * C64::new(s, 0.0)));
    }
    Ok(DefectFactorization {
        base: t.clone(),
        rank,
        d: t.domain.gram_inv() * &m,
        d_adjoint: m.adjoint(),
        defect_space: SignatureSpace::hilbert(rank),
        eigenvalues: eig.values[..rank].to_vec(),
    })
}

/// Unitary completion `[[T, D_{T*}], [D_T^[*], -L^[*]]]` from `dom ⊕ 𝔇_{T*}` to `cod ⊕ 𝔇_T`.
#[derive(Debug, Clone, PartialEq)]
pub struct JuliaOperator {
    pub operator: IndefOperator,
    pub defect: DefectFactorization,
    pub codefect: DefectFactorization,
    /// The corner `L : 𝔇_T -> 𝔇_{T*}`; the completion carries `-L^H` in its lower right block.
    pub l: CMat,
    /// `|diag(G_dom, I) - U^H diag(G_cod, I) U|`.
    pub residual: f64,
}

pub fn julia_operator(t: &IndefOperator, tol: f64) -> Result<JuliaOperator> {
    let defect = defect_factorization(t, tol)?;
    let codefect = defect_factorization(&t.j_adjoint(), tol)?;
    let (r, rs) = (defect.rank, codefect.rank);
    if t.domain.dim() + rs != t.codomain.dim() + r {
        return Err(Error::CompletionFailed(format!(
            "defect ranks {r} and {rs} do not balance dimensions {} and {}",
            t.domain.dim(),
            t.codomain.dim()
        )));
    }
    // Orthogonality of the two block columns: M X = -T^H G_cod D_{T*}; M has full column rank.
    let n_mat = t.codomain.gram() * &codefect.d;
    let rhs = t.matrix.adjoint() * &n_mat;
    let mut x = zeros(r, rs);
    if r > 0 && rs > 0 {
        let mut scaled = defect.d_adjoint.clone();
        for (k, lam) in defect.eigenvalues.iter().enumerate() {
            scaled.row_mut(k).scale_mut(1.0 / lam);
        }
        // pinv(M) = diag(1/lambda) M^H since the columns of M are orthogonal with squared norms lambda.
        x = -(scaled * rhs);
    }
    let u = block2(&t.matrix, &codefect.d, &defect.d_adjoint, &x);
    let dom = t.domain.direct_sum(&codefect.defect_space);
    let cod = t.codomain.direct_sum(&defect.defect_space);
    let op = IndefOperator::new(dom, cod, u)?;
    let res_form = op.domain.gram() - op.matrix.adjoint() * op.codomain.gram() * &op.matrix;
    let co_form = op.codomain.gram_inv() - &op.matrix * op.domain.gram_inv() * op.matrix.adjoint();
    let residual = norm2(&res_form).max(norm2(&co_form));
    let scale = (1.0 + norm2(&op.matrix)).powi(2);
    if !(residual <= COMPLETION_TOL * scale) {
        return Err(Error::CompletionFailed(format!("unitarity residual {residual:e}")));
    }
    Ok(JuliaOperator { operator: op, defect, codefect, l: -x.adjoint(), residual })
}

/// A passive system together with its channel extension by the two defect spaces.
#[derive(Debug, Clone, PartialEq)]
pub struct JuliaEmbedding {
    pub base: Colligation,
    /// Input `U ⊕ 𝔇_{T*}`, output `Y ⊕ 𝔇_T`, same state; its system operator is unitary.
    pub extended: Colligation,
    /// `D_T = [D_{T,1}; D_{T,2}]` split over `X ⊕ U`.
    pub d_t1: CMat,
    pub d_t2: CMat,
    /// `D_{T*} = [D_{T*,1}; D_{T*,2}]` split over `X ⊕ Y`.
    pub d_ts1: CMat,
    pub d_ts2: CMat,
    /// `D_T^[*]` split into its `X` and `U` columns.
    pub d_t1_adjoint: CMat,
    pub d_t2_adjoint: CMat,
    pub l: CMat,
    pub residual: f64,
}

pub fn julia_embedding(sys: &Colligation, tol: f64) -> Result<JuliaEmbedding> {
    let t = sys.system_operator();
    if !t.classify(tol).contraction {
        return Err(Error::NotPassive);
    }
    let jo = julia_operator(&t, tol)?;
    let n = sys.state_dim();
    let (m, p) = (sys.input_dim(), sys.output_dim());
    let (r, rs) = (jo.defect.rank, jo.codefect.rank);
    let d_t = &jo.defect.d;
    let d_ts = &jo.codefect.d;
    let d_adj = &jo.defect.d_adjoint;
    let d_t1 = d_t.rows(0, n).into_owned();
    let d_t2 = d_t.rows(n, m).into_owned();
    let d_ts1 = d_ts.rows(0, n).into_owned();
    let d_ts2 = d_ts.rows(n, p).into_owned();
    let d_t1_adjoint = d_adj.columns(0, n).into_owned();
    let d_t2_adjoint = d_adj.columns(n, m).into_owned();
    let x = jo.operator.matrix.view((n + p, m + n), (r, rs)).into_owned();

    let extended = Colligation::new(
        sys.state().clone(),
        sys.input().direct_sum(&jo.codefect.defect_space),
        sys.output().direct_sum(&jo.defect.defect_space),
        sys.a().clone(),
        hstack(&[sys.b(), &d_ts1]),
        vstack(&[sys.c(), &d_t1_adjoint]),
        block2(sys.d(), &d_ts2, &d_t2_adjoint, &x),
    )?;
    Ok(JuliaEmbedding {
        base: sys.clone(),
        extended,
        d_t1,
        d_t2,
        d_ts1,
        d_ts2,
        d_t1_adjoint,
        d_t2_adjoint,
        l: jo.l,
        residual: jo.residual,
    })
}

impl JuliaEmbedding {
    pub fn defect_rank(&self) -> usize {
        self.d_t1_adjoint.nrows()
    }

    pub fn codefect_rank(&self) -> usize {
        self.d_ts1.ncols()
    }

    /// `φ(z) = D_{T,2}^[*] + z D_{T,1}^[*] (I - zA)^{-1} B`, from `U` into `𝔇_T`.
    pub fn phi_realization(&self) -> Realization {
        let s = &self.base;
        Realization {
            input: s.input().clone(),
            output: SignatureSpace::hilbert(self.defect_rank()),
            a: s.a().clone(),
            b: s.b().clone(),
            c: self.d_t1_adjoint.clone(),
            d: self.d_t2_adjoint.clone(),
        }
    }

    /// `ψ(z) = D_{T*,2} + z C (I - zA)^{-1} D_{T*,1}`, from `𝔇_{T*}` into `Y`.
    pub fn psi_realization(&self) -> Realization {
        let s = &self.base;
        Realization {
            input: SignatureSpace::hilbert(self.codefect_rank()),
            output: s.output().clone(),
            a: s.a().clone(),
            b: self.d_ts1.clone(),
            c: s.c().clone(),
            d: self.d_ts2.clone(),
        }
    }
}

/// The four blocks of the extended transfer function at one point.
#[derive(Debug, Clone, PartialEq)]
pub struct TransferBlocks {
    pub theta: CMat,
    pub psi: CMat,
    pub phi: CMat,
    pub chi: CMat,
}

pub fn embedded_transfer_blocks(je: &JuliaEmbedding, z: C64) -> Result<TransferBlocks> {
    let full = je.extended.transfer_eval(z)?;
    let (m, p) = (je.base.input_dim(), je.base.output_dim());
    let (r, rs) = (je.defect_rank(), je.codefect_rank());
    Ok(TransferBlocks {
        theta: full.view((0, 0), (p, m)).into_owned(),
        psi: full.view((0, m), (p, rs)).into_owned(),
        phi: full.view((p, 0), (r, m)).into_owned(),
        chi: full.view((p, m), (r, rs)).into_owned(),
    })
}

/// Largest residuals of the two kernel identities over all ordered sample pairs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DefectIdentityReport {
    pub pairs: usize,
    /// `I - θ(z)θ^*(w) - (1 - z w̄) G(z)G^*(w) - ψ(z)ψ^*(w)`.
    pub left_residual: f64,
    /// `I - θ^*(w)θ(z) - (1 - z w̄) F^*(w)F(z) - φ^*(w)φ(z)`.
    pub right_residual: f64,
}

impl DefectIdentityReport {
    pub fn max_residual(&self) -> f64 {
        self.left_residual.max(self.right_residual)
    }
}

struct PointData {
    theta: CMat,
    psi: CMat,
    phi: CMat,
    g: CMat,
    f: CMat,
}

fn point_data(je: &JuliaEmbedding, z: C64) -> Result<PointData> {
    let blocks = embedded_transfer_blocks(je, z)?;
    let s = &je.base;
    let n = s.state_dim();
    let f = solve_resolvent(s.a(), z, s.b())?;
    // G(z) = C (I - zA)^{-1}, computed as the adjoint of a resolvent solve.
    let g = if n == 0 {
        zeros(s.output_dim(), 0)
    } else {
        let eye = CMat::identity(n, n);
        let rt = solve_resolvent(&s.a().transpose(), z, &eye)?;
        s.c() * rt.transpose()
    };
    Ok(PointData { theta: blocks.theta, psi: blocks.psi, phi: blocks.phi, g, f })
}

/// Checks both kernel identities of the embedding on every ordered pair from `samples`.
pub fn verify_defect_identities(sys: &Colligation, samples: &[C64], tol: f64) -> Result<DefectIdentityReport> {
    let je = julia_embedding(sys, tol)?;
    let data = samples.iter().map(|&z| point_data(&je, z)).collect::<Result<Vec<_>>>()?;
    let gx = sys.state().gram();
    let gxi = sys.state().gram_inv();
    let gui = sys.input().gram_inv();
    let gy = sys.output().gram();
    let (m, p) = (sys.input_dim(), sys.output_dim());
    let mut left_residual: f64 = 0.0;
    let mut right_residual: f64 = 0.0;
    for (i, &z) in samples.iter().enumerate() {
        for (j, &w) in samples.iter().enumerate() {
            let (dz, dw) = (&data[i], &data[j]);
            let weight = C64::new(1.0, 0.0) - z * w.conj();
            let theta_star_w = gui * dw.theta.adjoint() * gy;
            let g_star_w = gxi * dw.g.adjoint() * gy;
            let psi_star_w = dw.psi.adjoint() * gy;
            let left =
                CMat::identity(p, p) - &dz.theta * &theta_star_w - (&dz.g * g_star_w) * weight - &dz.psi * psi_star_w;
            let f_star_w = gui * dw.f.adjoint() * gx;
            let phi_star_w = gui * dw.phi.adjoint();
            let right =
                CMat::identity(m, m) - &theta_star_w * &dz.theta - (f_star_w * &dz.f) * weight - phi_star_w * &dz.phi;
            left_residual = left_residual.max(norm2(&left));
            right_residual = right_residual.max(norm2(&right));
        }
    }
    Ok(DefectIdentityReport { pairs: samples.len() * samples.len(), left_residual, right_residual })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{from_real, max_abs, r, DEFAULT_TOL};

    fn op(g1: &[f64], g2: &[f64], rows: usize, cols: usize, t: &[f64]) -> IndefOperator {
        let sp = |g: &[f64]| {
            let n = g.len();
            let mut m = zeros(n, n);
            for (k, v) in g.iter().enumerate() {
                m[(k, k)] = r(*v);
            }
            SignatureSpace::new(m).unwrap()
        };
        IndefOperator::new(sp(g1), sp(g2), from_real(rows, cols, t)).unwrap()
    }

    #[test]
    fn zero_map_has_full_defect_and_swap_completion() {
        let t = op(&[1.0], &[1.0], 1, 1, &[0.0]);
        let df = defect_factorization(&t, DEFAULT_TOL).unwrap();
        assert_eq!(df.rank, 1);
        assert!((df.d[(0, 0)] - r(1.0)).norm() < 1e-15);
        let jo = julia_operator(&t, DEFAULT_TOL).unwrap();
        let expect = from_real(2, 2, &[0.0, 1.0, 1.0, 0.0]);
        assert!(max_abs(&(jo.operator.matrix - expect)) < 1e-15);
    }

    #[test]
    fn j_unitary_has_no_defect() {
        let s3 = 3f64.sqrt();
        let t = op(&[-1.0, 1.0], &[-1.0, 1.0], 2, 2, &[2.0, -s3, s3, -2.0]);
        assert_eq!(defect_factorization(&t, DEFAULT_TOL).unwrap().rank, 0);
        let jo = julia_operator(&t, DEFAULT_TOL).unwrap();
        assert_eq!(jo.operator.matrix.shape(), (2, 2));
    }

    #[test]
    fn non_contraction_rejected() {
        let t = op(&[1.0], &[1.0], 1, 1, &[2.0]);
        assert!(matches!(defect_factorization(&t, DEFAULT_TOL), Err(Error::NotContraction { .. })));
    }

    #[test]
    fn scalar_contraction_completion() {
        let t = op(&[1.0], &[1.0], 1, 1, &[0.6]);
        let jo = julia_operator(&t, DEFAULT_TOL).unwrap();
        // [[0.6, 0.8], [0.8, -0.6]]
        let expect = from_real(2, 2, &[0.6, 0.8, 0.8, -0.6]);
        assert!(max_abs(&(&jo.operator.matrix - expect)) < 1e-14);
        assert!((jo.l[(0, 0)] - r(0.6)).norm() < 1e-14);
    }

    #[test]
    fn identities_at_origin() {
        let sys = Colligation::new(
            SignatureSpace::hilbert(1),
            SignatureSpace::hilbert(1),
            SignatureSpace::hilbert(1),
            from_real(1, 1, &[0.3]),
            from_real(1, 1, &[0.4]),
            from_real(1, 1, &[0.5]),
            from_real(1, 1, &[0.2]),
        )
        .unwrap();
        let rep =
            verify_defect_identities(&sys, &[r(0.0), C64::new(0.1, 0.2), C64::new(0.1, -0.2)], DEFAULT_TOL).unwrap();
        assert_eq!(rep.pairs, 9);
        assert!(rep.max_residual() < 1e-13);
    }
}
