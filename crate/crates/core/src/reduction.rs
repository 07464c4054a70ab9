//! Reduced-order models from Hankel and snapshot data: ERA, balanced POD,
//! ERA with pseudo-adjoint modes, and POD/Galerkin.
//!
//! ERA and balanced POD are algebraically two routes to the same model; they
//! share the truncated Hankel SVD (including its deterministic sign
//! convention) so that the equivalence can be checked entrywise.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::hankel::HankelPair;
use crate::linalg;
use crate::lti::StateSpaceModel;
use crate::sampling::{OutputProjector, SnapshotKind, SnapshotMatrix};

/// Default relative threshold below which singular values count as zero.
pub const DEFAULT_RANK_TOL: f64 = 1e-10;

/// Tolerance on the biorthogonality identity Psi^T Phi = I.
pub const BIORTHOGONALITY_TOL: f64 = 1e-8;

/// Truncated SVD of a generalized Hankel matrix.
///
/// Holds the retained singular triples, sorted non-increasing, with the sign
/// convention that each left singular vector's largest-magnitude entry is
/// positive. `numerical_rank` is the count of singular values above
/// `rank_tol` relative to the largest, before truncation.
#[derive(Clone, Debug, PartialEq)]
pub struct HankelSvd {
    u: DMatrix<f64>,
    sigma: Vec<f64>,
    v: DMatrix<f64>,
    rank_tol: f64,
    numerical_rank: usize,
}

impl HankelSvd {
    pub fn u(&self) -> &DMatrix<f64> {
        &self.u
    }

    /// Retained singular values, non-increasing.
    pub fn sigma(&self) -> &[f64] {
        &self.sigma
    }

    pub fn v(&self) -> &DMatrix<f64> {
        &self.v
    }

    pub fn rank_tol(&self) -> f64 {
        self.rank_tol
    }

    /// Numerical rank n_1 of the decomposed matrix.
    pub fn numerical_rank(&self) -> usize {
        self.numerical_rank
    }

    /// Number of retained triples (<= numerical rank).
    pub fn retained(&self) -> usize {
        self.sigma.len()
    }

    fn check_order(&self, r: usize) -> Result<()> {
        if r > self.retained() {
            Err(Error::RankExceeded {
                requested: r,
                rank: self.retained(),
            })
        } else {
            Ok(())
        }
    }
}

/// Truncated SVD of `h`: retains `r` triples when given (erroring if `r`
/// exceeds the numerical rank), otherwise all numerically nonzero triples.
pub fn svd_truncate(h: &DMatrix<f64>, r: Option<usize>, rank_tol: f64) -> Result<HankelSvd> {
    let svd = linalg::sorted_svd(h)?;
    let sigma_max = svd.sigma.iter().copied().fold(0.0f64, f64::max);
    if sigma_max == 0.0 {
        if r == Some(0) {
            return Ok(HankelSvd {
                u: DMatrix::zeros(h.nrows(), 0),
                sigma: Vec::new(),
                v: DMatrix::zeros(h.ncols(), 0),
                rank_tol,
                numerical_rank: 0,
            });
        }
        return Err(Error::ZeroMatrix);
    }
    let n1 = svd
        .sigma
        .iter()
        .filter(|&&s| s > rank_tol * sigma_max)
        .count();
    let keep = match r {
        Some(r) => {
            if r > n1 {
                return Err(Error::RankExceeded {
                    requested: r,
                    rank: n1,
                });
            }
            r
        }
        None => n1,
    };
    Ok(HankelSvd {
        u: svd.u.columns(0, keep).clone_owned(),
        sigma: svd.sigma.iter().take(keep).copied().collect(),
        v: svd.v.columns(0, keep).clone_owned(),
        rank_tol,
        numerical_rank: n1,
    })
}

/// Default order selection: the smallest r whose discarded singular-value
/// mass is below 1e-3 of the total, then extended so a group of numerically
/// tied singular values is never split.
pub fn select_order(sigma: &[f64], requested: Option<usize>) -> usize {
    if let Some(r) = requested {
        return r.min(sigma.len());
    }
    let total: f64 = sigma.iter().sum();
    if total == 0.0 {
        return 0;
    }
    let mut r = sigma.len();
    let mut tail = 0.0;
    for i in (0..sigma.len()).rev() {
        tail += sigma[i];
        if tail / total >= 1e-3 {
            break;
        }
        r = i;
    }
    let r = r.max(1);
    let mut r = r.min(sigma.len());
    // Ties: sigma_{r+1} within 1e-8 relative of sigma_r joins the group.
    while r < sigma.len() && sigma[r] > sigma[r - 1] * (1.0 - 1e-8) {
        r += 1;
    }
    r
}

/// Which projection built a mode set.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ModeFlavor {
    TrueAdjoint,
    PseudoAdjoint,
    Pod,
}

/// Primal modes Phi and adjoint (or surrogate) modes Psi with Psi^T Phi = I.
#[derive(Clone, Debug, PartialEq)]
pub struct ModeSet {
    phi: DMatrix<f64>,
    psi: DMatrix<f64>,
    flavor: ModeFlavor,
    hsv: Vec<f64>,
}

impl ModeSet {
    pub fn phi(&self) -> &DMatrix<f64> {
        &self.phi
    }

    pub fn psi(&self) -> &DMatrix<f64> {
        &self.psi
    }

    pub fn flavor(&self) -> ModeFlavor {
        self.flavor
    }

    /// Singular values associated with the modes (empty when not applicable).
    pub fn hsv(&self) -> &[f64] {
        &self.hsv
    }

    /// Number of mode pairs.
    pub fn order(&self) -> usize {
        self.phi.ncols()
    }

    /// State dimension the modes live in.
    pub fn state_dim(&self) -> usize {
        self.phi.nrows()
    }

    /// Attaches singular values to modes built without them.
    pub fn with_hsv(mut self, hsv: Vec<f64>) -> Self {
        self.hsv = hsv;
        self
    }

    /// The leading r mode pairs.
    pub fn truncated(&self, r: usize) -> Result<ModeSet> {
        if r > self.order() {
            return Err(Error::RankExceeded {
                requested: r,
                rank: self.order(),
            });
        }
        Ok(ModeSet {
            phi: self.phi.columns(0, r).clone_owned(),
            psi: self.psi.columns(0, r).clone_owned(),
            flavor: self.flavor,
            hsv: self.hsv.iter().take(r).copied().collect(),
        })
    }

    /// Max deviation of Psi^T Phi from the identity.
    pub fn biorthogonality_defect(&self) -> f64 {
        let gram = self.psi.transpose() * &self.phi;
        let eye = DMatrix::identity(self.order(), self.order());
        linalg::max_abs(&(gram - eye))
    }
}

/// Balanced-POD modes Phi_r = X V_r Sigma_r^{-1/2}, Psi_r = Y U_r Sigma_r^{-1/2}.
/// The two sets must come out biorthogonal; a failure signals that the SVD
/// was not computed from Y*X of these snapshots.
pub fn bpod_modes(
    x: &SnapshotMatrix,
    y: &SnapshotMatrix,
    svd: &HankelSvd,
    r: usize,
) -> Result<ModeSet> {
    svd.check_order(r)?;
    if x.data().ncols() != svd.v.nrows() || y.data().ncols() != svd.u.nrows() {
        return Err(Error::DimensionMismatch(format!(
            "SVD factors ({}, {}) do not match snapshot column counts ({}, {})",
            svd.u.nrows(),
            svd.v.nrows(),
            y.data().ncols(),
            x.data().ncols()
        )));
    }
    let mut phi = x.data() * svd.v.columns(0, r);
    let mut psi = y.data() * svd.u.columns(0, r);
    for k in 0..r {
        let s = svd.sigma[k].sqrt();
        phi.column_mut(k).unscale_mut(s);
        psi.column_mut(k).unscale_mut(s);
    }
    let modes = ModeSet {
        phi,
        psi,
        flavor: ModeFlavor::TrueAdjoint,
        hsv: svd.sigma.iter().take(r).copied().collect(),
    };
    let defect = modes.biorthogonality_defect();
    if defect > BIORTHOGONALITY_TOL {
        return Err(Error::BiorthogonalityFailure { deviation: defect });
    }
    Ok(modes)
}

/// Pseudo-adjoint modes Psi~ = Phi (Phi^T Phi)^{-1}, the Moore-Penrose
/// surrogate used when no adjoint simulations exist. Requires Phi to have
/// full column rank; the Gram condition number must stay below 1e12.
pub fn pseudo_adjoint_modes(phi: &DMatrix<f64>) -> Result<ModeSet> {
    let svd = linalg::sorted_svd(phi)?;
    let s_max = svd.sigma.iter().copied().fold(0.0f64, f64::max);
    let s_min = svd.sigma.iter().copied().fold(f64::INFINITY, f64::min);
    let gram_cond = if s_min > 0.0 {
        (s_max / s_min).powi(2)
    } else {
        f64::INFINITY
    };
    if !(gram_cond < 1e12) {
        return Err(Error::IllConditioned {
            condition: gram_cond,
        });
    }
    let gram = phi.transpose() * phi;
    let chol = nalgebra::Cholesky::new(gram).ok_or(Error::IllConditioned {
        condition: gram_cond,
    })?;
    // Psi~^T = (Phi^T Phi)^{-1} Phi^T, solved column block at a time.
    let psi_t = chol.solve(&phi.transpose());
    Ok(ModeSet {
        phi: phi.clone(),
        psi: psi_t.transpose(),
        flavor: ModeFlavor::PseudoAdjoint,
        hsv: Vec::new(),
    })
}

/// Primal modes Phi_1 = X V Sigma^{-1/2} alone, for pipelines that store the
/// state snapshots but have no adjoint data (ERA with pseudo-adjoint modes).
pub fn primal_modes(x: &SnapshotMatrix, svd: &HankelSvd, count: usize) -> Result<DMatrix<f64>> {
    svd.check_order(count)?;
    if x.data().ncols() != svd.v.nrows() {
        return Err(Error::DimensionMismatch(format!(
            "SVD right factor has {} rows but X has {} columns",
            svd.v.nrows(),
            x.data().ncols()
        )));
    }
    let mut phi = x.data() * svd.v.columns(0, count);
    for k in 0..count {
        phi.column_mut(k).unscale_mut(svd.sigma[k].sqrt());
    }
    Ok(phi)
}

/// Default cap on the number of primal modes the pseudo-adjoint surrogate is
/// built from.
pub const PSEUDO_MODE_CAP: usize = 100;

/// Pseudo-adjoint mode set from stored state snapshots and the Hankel SVD:
/// takes the first min(cap, retained) primal modes and backs off one mode at
/// a time while the Gram matrix is too ill-conditioned to invert.
pub fn fit_pseudo_modes(
    x: &SnapshotMatrix,
    svd: &HankelSvd,
    cap: usize,
) -> Result<ModeSet> {
    let mut count = cap.min(svd.retained());
    loop {
        if count == 0 {
            return Err(Error::RankDeficient {
                requested: 1,
                available: 0,
            });
        }
        let phi = primal_modes(x, svd, count)?;
        match pseudo_adjoint_modes(&phi) {
            Ok(modes) => {
                return Ok(modes.with_hsv(svd.sigma.iter().take(count).copied().collect()))
            }
            Err(Error::IllConditioned { .. }) => count -= 1,
            Err(e) => return Err(e),
        }
    }
}

/// Whether a reduced model came from ERA, balanced POD, the pseudo-adjoint
/// variant, plain POD/Galerkin, or the exact balanced-truncation oracle.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum ReductionMethod {
    Era,
    Bpod,
    Pseudo,
    Pod,
    BtOracle,
}

impl ReductionMethod {
    pub fn name(&self) -> &'static str {
        match self {
            ReductionMethod::Era => "era",
            ReductionMethod::Bpod => "bpod",
            ReductionMethod::Pseudo => "pseudo",
            ReductionMethod::Pod => "pod",
            ReductionMethod::BtOracle => "bt-oracle",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "era" => Ok(ReductionMethod::Era),
            "bpod" => Ok(ReductionMethod::Bpod),
            "pseudo" => Ok(ReductionMethod::Pseudo),
            "pod" => Ok(ReductionMethod::Pod),
            "bt-oracle" => Ok(ReductionMethod::BtOracle),
            other => Err(Error::InvalidArgument(format!(
                "unknown reduction method '{other}'"
            ))),
        }
    }
}

/// A reduced triple (A_r, B_r, C_r) with the singular values retained at
/// truncation and the method that produced it.
#[derive(Clone, Debug, PartialEq)]
pub struct ReducedModel {
    a_r: DMatrix<f64>,
    b_r: DMatrix<f64>,
    c_r: DMatrix<f64>,
    hsv: Vec<f64>,
    method: ReductionMethod,
    projector: Option<OutputProjector>,
}

impl ReducedModel {
    pub fn new(
        a_r: DMatrix<f64>,
        b_r: DMatrix<f64>,
        c_r: DMatrix<f64>,
        hsv: Vec<f64>,
        method: ReductionMethod,
        projector: Option<OutputProjector>,
    ) -> Result<Self> {
        if !a_r.is_square() || b_r.nrows() != a_r.nrows() || c_r.ncols() != a_r.nrows() {
            return Err(Error::DimensionMismatch(
                "reduced triple dimensions are inconsistent".into(),
            ));
        }
        if hsv.windows(2).any(|w| w[1] > w[0]) {
            return Err(Error::InvalidArgument(
                "retained singular values must be non-increasing".into(),
            ));
        }
        Ok(Self {
            a_r,
            b_r,
            c_r,
            hsv,
            method,
            projector,
        })
    }

    pub fn a_r(&self) -> &DMatrix<f64> {
        &self.a_r
    }

    pub fn b_r(&self) -> &DMatrix<f64> {
        &self.b_r
    }

    pub fn c_r(&self) -> &DMatrix<f64> {
        &self.c_r
    }

    /// Singular values retained at truncation.
    pub fn hsv(&self) -> &[f64] {
        &self.hsv
    }

    pub fn method(&self) -> ReductionMethod {
        self.method
    }

    pub fn order(&self) -> usize {
        self.a_r.nrows()
    }

    /// The output projector the model was built under, if any.
    pub fn projector(&self) -> Option<&OutputProjector> {
        self.projector.as_ref()
    }

    /// The reduced triple as a simulatable state-space model.
    pub fn to_model(&self) -> Result<StateSpaceModel> {
        StateSpaceModel::new(
            self.a_r.clone(),
            self.b_r.clone(),
            self.c_r.clone(),
            false,
        )
    }
}

fn flavor_method(flavor: ModeFlavor) -> ReductionMethod {
    match flavor {
        ModeFlavor::TrueAdjoint => ReductionMethod::Bpod,
        ModeFlavor::PseudoAdjoint => ReductionMethod::Pseudo,
        ModeFlavor::Pod => ReductionMethod::Pod,
    }
}

fn petrov_galerkin(
    model: &StateSpaceModel,
    modes: &ModeSet,
    projector: Option<&OutputProjector>,
) -> Result<ReducedModel> {
    if modes.state_dim() != model.state_dim() {
        return Err(Error::DimensionMismatch(format!(
            "modes live in dimension {} but the model has {} states",
            modes.state_dim(),
            model.state_dim()
        )));
    }
    let a_r = modes.psi.transpose() * model.a() * &modes.phi;
    let b_r = modes.psi.transpose() * model.b();
    let c_r = match projector {
        Some(proj) => {
            if proj.output_dim() != model.output_dim() {
                return Err(Error::ProjectorDimensionMismatch {
                    projector_rows: proj.output_dim(),
                    outputs: model.output_dim(),
                });
            }
            proj.theta().transpose() * model.c() * &modes.phi
        }
        None => model.c() * &modes.phi,
    };
    ReducedModel::new(
        a_r,
        b_r,
        c_r,
        modes.hsv.clone(),
        flavor_method(modes.flavor),
        projector.cloned(),
    )
}

/// Petrov-Galerkin projection with balanced-POD modes:
/// A_r = Psi^T A Phi, B_r = Psi^T B, C_r = C Phi (Theta^T C Phi under an
/// output projector).
pub fn bpod_reduce(
    model: &StateSpaceModel,
    modes: &ModeSet,
    projector: Option<&OutputProjector>,
) -> Result<ReducedModel> {
    petrov_galerkin(model, modes, projector)
}

/// Projection with pseudo-adjoint modes; same arithmetic as `bpod_reduce`
/// but tagged by the mode flavor.
pub fn pseudo_reduce(
    model: &StateSpaceModel,
    modes: &ModeSet,
    projector: Option<&OutputProjector>,
) -> Result<ReducedModel> {
    petrov_galerkin(model, modes, projector)
}

/// The ERA realization from the Hankel pair and its shared SVD:
/// A_r = Sigma_r^{-1/2} U_r^T H' V_r Sigma_r^{-1/2}, B_r the first p columns
/// of Sigma_r^{1/2} V_r^T, C_r the first q rows of U_r Sigma_r^{1/2}.
pub fn era_reduce(
    pair: &HankelPair,
    svd: &HankelSvd,
    r: usize,
    projector: Option<&OutputProjector>,
) -> Result<ReducedModel> {
    svd.check_order(r)?;
    let (q, p) = pair.block_shape();
    if svd.u.nrows() != pair.h().nrows() || svd.v.nrows() != pair.h().ncols() {
        return Err(Error::DimensionMismatch(
            "SVD factors do not match the Hankel matrix".into(),
        ));
    }
    let u_r = svd.u.columns(0, r);
    let v_r = svd.v.columns(0, r);
    let sqrt: Vec<f64> = svd.sigma.iter().take(r).map(|s| s.sqrt()).collect();

    let mut a_r = (u_r.transpose() * pair.h_prime()) * v_r;
    for i in 0..r {
        for j in 0..r {
            a_r[(i, j)] /= sqrt[i] * sqrt[j];
        }
    }

    let mut b_r = v_r.rows(0, p).transpose().clone_owned();
    for i in 0..r {
        b_r.row_mut(i).scale_mut(sqrt[i]);
    }

    let mut c_r = u_r.rows(0, q).clone_owned();
    for j in 0..r {
        c_r.column_mut(j).scale_mut(sqrt[j]);
    }

    ReducedModel::new(
        a_r,
        b_r,
        c_r,
        svd.sigma.iter().take(r).copied().collect(),
        ReductionMethod::Era,
        projector.cloned(),
    )
}

/// POD/Galerkin comparator: Phi = leading r left singular vectors of the
/// snapshot matrix X, orthogonal projection A_r = Phi^T A Phi, B_r = Phi^T B,
/// C_r = C Phi. The retained values are POD singular values of X, not Hankel
/// singular values.
pub fn pod_reduce(
    x: &SnapshotMatrix,
    model: &StateSpaceModel,
    r: usize,
    projector: Option<&OutputProjector>,
) -> Result<ReducedModel> {
    if x.kind() != SnapshotKind::Primal {
        return Err(Error::InvalidArgument(
            "POD modes are fitted on primal snapshots".into(),
        ));
    }
    let svd = linalg::sorted_svd(x.data())?;
    let sigma_max = svd.sigma.iter().copied().fold(0.0f64, f64::max);
    let rank = svd
        .sigma
        .iter()
        .filter(|&&s| s > DEFAULT_RANK_TOL * sigma_max && s > 0.0)
        .count();
    if r > rank {
        return Err(Error::RankExceeded { requested: r, rank });
    }
    let phi = svd.u.columns(0, r).clone_owned();
    let modes = ModeSet {
        psi: phi.clone(),
        phi,
        flavor: ModeFlavor::Pod,
        hsv: svd.sigma.iter().take(r).copied().collect(),
    };
    petrov_galerkin(model, &modes, projector)
}
