//! Exact and empirical Gramians, the exact balanced-truncation oracle, and
//! the transformed-Gramian block diagnostics.
//!
//! The empirical Gramians are the snapshot products XX* and YY*. The exact
//! ones solve the discrete-time Lyapunov (Stein) equations by a doubling
//! iteration, which is the oracle everything else is checked against.

use nalgebra::DMatrix;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::linalg;
use crate::lti::{adjoint_system, StateSpaceModel};
use crate::reduction::{ReducedModel, ReductionMethod};
use crate::sampling::SnapshotMatrix;

/// Whether a Gramian pair is the Lyapunov solution or a snapshot product.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum GramianKind {
    Exact,
    Empirical,
}

/// Controllability and observability Gramians of one system.
#[derive(Clone, Debug, PartialEq)]
pub struct GramianPair {
    w_c: DMatrix<f64>,
    w_o: DMatrix<f64>,
    kind: GramianKind,
}

impl GramianPair {
    pub fn w_c(&self) -> &DMatrix<f64> {
        &self.w_c
    }

    pub fn w_o(&self) -> &DMatrix<f64> {
        &self.w_o
    }

    pub fn kind(&self) -> GramianKind {
        self.kind
    }
}

/// Empirical Gramians W_c = XX*, W_o = YY* from snapshot matrices.
pub fn empirical_gramians(x: &SnapshotMatrix, y: &SnapshotMatrix) -> Result<GramianPair> {
    if x.state_dim() != y.state_dim() {
        return Err(Error::DimensionMismatch(format!(
            "snapshot state dimensions differ: {} vs {}",
            x.state_dim(),
            y.state_dim()
        )));
    }
    Ok(GramianPair {
        w_c: x.data() * x.data().transpose(),
        w_o: y.data() * y.data().transpose(),
        kind: GramianKind::Empirical,
    })
}

/// State-dimension bound for the exact solvers.
pub const EXACT_GRAMIAN_LIMIT: usize = 2000;

/// Solves W = A W A^T + Q by squaring: W <- W + M W M^T, M <- M^2, starting
/// from W = Q, M = A. Stops when the update norm drops below 1e-14 ||W||.
fn solve_stein(a: &DMatrix<f64>, q: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let mut w = q.clone();
    let mut m = a.clone();
    for _ in 0..128 {
        let update = &m * &w * m.transpose();
        w += &update;
        if update.norm() <= 1e-14 * w.norm() {
            // Symmetry drifts slightly over the squarings.
            return Ok(0.5 * (&w + w.transpose()));
        }
        m = &m * &m;
    }
    Err(Error::NoConvergence {
        what: "Lyapunov doubling iteration",
    })
}

/// Exact Gramians of a stable model: W_c solves A W_c A* - W_c + BB* = 0 and
/// W_o solves A* W_o A - W_o + C*C = 0.
pub fn exact_gramians(model: &StateSpaceModel) -> Result<GramianPair> {
    model.require_stable()?;
    if model.state_dim() > EXACT_GRAMIAN_LIMIT {
        return Err(Error::InvalidArgument(format!(
            "exact Gramians limited to n <= {EXACT_GRAMIAN_LIMIT}"
        )));
    }
    let w_c = solve_stein(model.a(), &(model.b() * model.b().transpose()))?;
    let at = model.a().transpose();
    let w_o = solve_stein(&at, &(model.c().transpose() * model.c()))?;
    Ok(GramianPair {
        w_c,
        w_o,
        kind: GramianKind::Exact,
    })
}

/// The model sampled every `period` steps: (A^period, B, C). Snapshot data
/// collected at period P factors through this system, so it is what the
/// sampled-data oracles must be computed on.
pub fn sampled_system(model: &StateSpaceModel, period: usize) -> Result<StateSpaceModel> {
    if period < 1 {
        return Err(Error::InvalidArgument("period must be at least 1".into()));
    }
    let mut a_p = model.a().clone();
    for _ in 1..period {
        a_p = &a_p * model.a();
    }
    StateSpaceModel::new(a_p, model.b().clone(), model.c().clone(), false)
}

/// Exact Hankel singular values sqrt(lambda(W_c W_o)), computed through the
/// SVD of the Gramian square-root factors.
pub fn exact_hankel_singular_values(model: &StateSpaceModel) -> Result<Vec<f64>> {
    let grams = exact_gramians(model)?;
    let l_c = linalg::psd_factor(grams.w_c(), 1e-8)?;
    let l_o = linalg::psd_factor(grams.w_o(), 1e-8)?;
    let svd = linalg::sorted_svd(&(l_o.transpose() * l_c))?;
    Ok(svd.sigma.iter().copied().collect())
}

/// Exact balanced truncation: the square-root method on the exact Gramians.
/// Serves as the oracle the snapshot pipelines are validated against.
pub fn exact_balanced_truncation(model: &StateSpaceModel, r: usize) -> Result<ReducedModel> {
    exact_balanced_truncation_sampled(model, 1, r)
}

/// Balanced truncation of the one-step dynamics with respect to the Gramians
/// of the `period`-sampled system: the exact counterpart of reduction from
/// snapshots taken every `period` steps. `period` = 1 is plain balanced
/// truncation.
pub fn exact_balanced_truncation_sampled(
    model: &StateSpaceModel,
    period: usize,
    r: usize,
) -> Result<ReducedModel> {
    let sampled = sampled_system(model, period)?;
    let grams = exact_gramians(&sampled)?;
    let l_c = linalg::psd_factor(grams.w_c(), 1e-8)?;
    let l_o = linalg::psd_factor(grams.w_o(), 1e-8)?;
    let svd = linalg::sorted_svd(&(l_o.transpose() * &l_c))?;
    let sigma_max = svd.sigma.iter().copied().fold(0.0f64, f64::max);
    if sigma_max == 0.0 {
        return Err(Error::ZeroMatrix);
    }
    let rank = svd
        .sigma
        .iter()
        .filter(|&&s| s > 1e-10 * sigma_max)
        .count();
    if r > rank {
        return Err(Error::RankExceeded { requested: r, rank });
    }

    let mut t = &l_c * svd.v.columns(0, r);
    let mut t_inv = (svd.u.columns(0, r).transpose() * l_o.transpose()).clone_owned();
    for k in 0..r {
        let s = svd.sigma[k].sqrt();
        t.column_mut(k).unscale_mut(s);
        t_inv.row_mut(k).unscale_mut(s);
    }
    // Deterministic signs: dominant entry of each balancing direction positive.
    for k in 0..r {
        let col = t.column(k);
        let mut best = 0usize;
        let mut best_abs = 0.0f64;
        for (i, &v) in col.iter().enumerate() {
            if v.abs() > best_abs {
                best_abs = v.abs();
                best = i;
            }
        }
        if col[best] < 0.0 {
            t.column_mut(k).neg_mut();
            t_inv.row_mut(k).neg_mut();
        }
    }

    let a_r = &t_inv * model.a() * &t;
    let b_r = &t_inv * model.b();
    let c_r = model.c() * &t;
    ReducedModel::new(
        a_r,
        b_r,
        c_r,
        svd.sigma.iter().take(r).copied().collect(),
        ReductionMethod::BtOracle,
        None,
    )
}

/// Invertible n x n completion of a biorthogonal mode pair: T = [Phi_1 Phi_2]
/// with Phi_2 an orthonormal basis of the null space of Psi_1^T, and T^{-1}
/// whose first rows recover Psi_1^T.
#[derive(Clone, Debug, PartialEq)]
pub struct FullTransformation {
    t: DMatrix<f64>,
    t_inv: DMatrix<f64>,
    split: usize,
}

impl FullTransformation {
    pub fn t(&self) -> &DMatrix<f64> {
        &self.t
    }

    pub fn t_inv(&self) -> &DMatrix<f64> {
        &self.t_inv
    }

    /// Column count r_1 of the leading mode block.
    pub fn split(&self) -> usize {
        self.split
    }

    pub fn state_dim(&self) -> usize {
        self.t.nrows()
    }

    /// The completion block Phi_2 (n x (n - r_1)).
    pub fn phi_2(&self) -> DMatrix<f64> {
        let n = self.state_dim();
        self.t.columns(self.split, n - self.split).clone_owned()
    }
}

/// Builds the full transformation from mode matrices with Psi_1^T Phi_1 = I.
/// For pseudo-adjoint modes the null space of Psi~_1^T coincides with the
/// orthogonal complement of the primal modes, so the same construction
/// applies to both flavors.
pub fn build_full_transformation(
    phi_1: &DMatrix<f64>,
    psi_1: &DMatrix<f64>,
) -> Result<FullTransformation> {
    let (n, r1) = phi_1.shape();
    if psi_1.shape() != (n, r1) {
        return Err(Error::DimensionMismatch(format!(
            "mode shapes differ: {:?} vs {:?}",
            phi_1.shape(),
            psi_1.shape()
        )));
    }
    let gram = psi_1.transpose() * phi_1;
    let defect = linalg::max_abs(&(&gram - DMatrix::identity(r1, r1)));
    if defect > 1e-8 {
        return Err(Error::BiorthogonalityFailure { deviation: defect });
    }

    if r1 == n {
        return Ok(FullTransformation {
            t: phi_1.clone(),
            t_inv: psi_1.transpose(),
            split: r1,
        });
    }

    // Null space of Psi_1^T as the range of the complementary orthogonal
    // projector I - Psi_1 (Psi_1^T Psi_1)^{-1} Psi_1^T.
    let psi_gram = psi_1.transpose() * psi_1;
    let chol = nalgebra::Cholesky::new(psi_gram).ok_or(Error::SingularTransformation)?;
    let proj = DMatrix::identity(n, n) - psi_1 * chol.solve(&psi_1.transpose());
    let basis_svd = linalg::sorted_svd(&proj)?;
    let phi_2 = basis_svd.u.columns(0, n - r1).clone_owned();

    let mut t = DMatrix::zeros(n, n);
    t.columns_mut(0, r1).copy_from(phi_1);
    t.columns_mut(r1, n - r1).copy_from(&phi_2);
    let t_inv = t
        .clone()
        .lu()
        .try_inverse()
        .ok_or(Error::SingularTransformation)?;
    Ok(FullTransformation {
        t,
        t_inv,
        split: r1,
    })
}

/// The three transformed matrices of the balance diagnostics, partitioned at
/// r_1: T^{-1} W_c T^{-T}, T^T W_o T, and T^{-1} W_c W_o T, plus the observed
/// coupling block M_3 and (optionally) its independent reconstruction
/// Sigma_1 Psi_1^T Phi_2 from the true adjoint modes.
#[derive(Clone, Debug, PartialEq)]
pub struct BlockDiagnostics {
    wc_t: DMatrix<f64>,
    wo_t: DMatrix<f64>,
    product_t: DMatrix<f64>,
    split: usize,
    sigma_1: Vec<f64>,
    m3_independent: Option<DMatrix<f64>>,
}

impl BlockDiagnostics {
    /// Transformed controllability Gramian T^{-1} W_c T^{-T}.
    pub fn wc_t(&self) -> &DMatrix<f64> {
        &self.wc_t
    }

    /// Transformed observability Gramian T^T W_o T.
    pub fn wo_t(&self) -> &DMatrix<f64> {
        &self.wo_t
    }

    /// Transformed Gramian product T^{-1} W_c W_o T.
    pub fn product_t(&self) -> &DMatrix<f64> {
        &self.product_t
    }

    pub fn split(&self) -> usize {
        self.split
    }

    pub fn sigma_1(&self) -> &[f64] {
        &self.sigma_1
    }

    /// Upper-right block of the transformed observability Gramian.
    pub fn m3(&self) -> DMatrix<f64> {
        let n = self.wo_t.nrows();
        self.wo_t
            .view((0, self.split), (self.split, n - self.split))
            .clone_owned()
    }

    /// Sigma_1 Psi_1^T Phi_2 computed from the true adjoint modes, when they
    /// were supplied.
    pub fn m3_independent(&self) -> Option<&DMatrix<f64>> {
        self.m3_independent.as_ref()
    }

    fn blocks_of(m: &DMatrix<f64>, split: usize) -> [DMatrix<f64>; 4] {
        let n = m.nrows();
        [
            m.view((0, 0), (split, split)).clone_owned(),
            m.view((0, split), (split, n - split)).clone_owned(),
            m.view((split, 0), (n - split, split)).clone_owned(),
            m.view((split, split), (n - split, n - split)).clone_owned(),
        ]
    }

    /// [upper-left, upper-right, lower-left, lower-right] blocks.
    pub fn wc_blocks(&self) -> [DMatrix<f64>; 4] {
        Self::blocks_of(&self.wc_t, self.split)
    }

    pub fn wo_blocks(&self) -> [DMatrix<f64>; 4] {
        Self::blocks_of(&self.wo_t, self.split)
    }

    pub fn product_blocks(&self) -> [DMatrix<f64>; 4] {
        Self::blocks_of(&self.product_t, self.split)
    }
}

/// Transforms empirical Gramians into the mode coordinates and partitions
/// them at the mode count. `sigma_1` is the retained singular-value block;
/// `psi_1_true`, when given, enables the independent M_3 cross-check.
pub fn transformed_gramians(
    trans: &FullTransformation,
    grams: &GramianPair,
    sigma_1: &[f64],
    psi_1_true: Option<&DMatrix<f64>>,
) -> Result<BlockDiagnostics> {
    let n = trans.state_dim();
    if grams.w_c().nrows() != n || grams.w_o().nrows() != n {
        return Err(Error::DimensionMismatch(format!(
            "Gramians of dimension {} do not match transformation of dimension {}",
            grams.w_c().nrows(),
            n
        )));
    }
    if sigma_1.len() != trans.split() {
        return Err(Error::DimensionMismatch(format!(
            "sigma_1 has {} entries but the mode block is {}",
            sigma_1.len(),
            trans.split()
        )));
    }
    let wc_t = trans.t_inv() * grams.w_c() * trans.t_inv().transpose();
    let wo_t = trans.t().transpose() * grams.w_o() * trans.t();
    let product_t = trans.t_inv() * grams.w_c() * grams.w_o() * trans.t();

    let m3_independent = match psi_1_true {
        Some(psi) => {
            if psi.nrows() != n || psi.ncols() != trans.split() {
                return Err(Error::DimensionMismatch(
                    "true adjoint modes do not match the transformation".into(),
                ));
            }
            let mut m3 = psi.transpose() * trans.phi_2();
            for (i, &s) in sigma_1.iter().enumerate() {
                m3.row_mut(i).scale_mut(s);
            }
            Some(m3)
        }
        None => None,
    };

    Ok(BlockDiagnostics {
        wc_t,
        wo_t,
        product_t,
        split: trans.split(),
        sigma_1: sigma_1.to_vec(),
        m3_independent,
    })
}

/// One row of the Gramian-diagonal comparison: mode index (1-based), the
/// retained singular value, and the diagonal entries of the reduced model's
/// exact controllability and observability Gramians.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GramianDiagRow {
    pub index: usize,
    pub hsv: f64,
    pub wc_diag: f64,
    pub wo_diag: f64,
}

/// Exact Gramian diagonals of a reduced model next to its retained singular
/// values. For a well-balanced model the three columns coincide.
pub fn gramian_diagonals_report(reduced: &ReducedModel) -> Result<Vec<GramianDiagRow>> {
    let model = reduced.to_model()?;
    model.require_stable()?;
    let grams = exact_gramians(&model)?;
    Ok((0..reduced.order())
        .map(|i| GramianDiagRow {
            index: i + 1,
            hsv: reduced.hsv().get(i).copied().unwrap_or(f64::NAN),
            wc_diag: grams.w_c()[(i, i)],
            wo_diag: grams.w_o()[(i, i)],
        })
        .collect())
}

/// Seed of the fixed perturbation direction used by `perturb_adjoint`.
pub const PERTURBATION_SEED: u64 = 0x00ad_70b5;

/// The adjoint system with its state matrix perturbed to A* + eps E, where E
/// is a fixed random direction of unit Frobenius norm. eps = 0 returns the
/// exact adjoint. The perturbed system may be unstable; downstream snapshot
/// collection surfaces that as `UnstableSystem`.
pub fn perturb_adjoint(model: &StateSpaceModel, eps: f64) -> Result<StateSpaceModel> {
    let adj = adjoint_system(model);
    if eps == 0.0 {
        return Ok(adj);
    }
    let n = model.state_dim();
    let mut rng = ChaCha8Rng::seed_from_u64(PERTURBATION_SEED);
    let mut e = DMatrix::from_fn(n, n, |_, _| rng.gen_range(-1.0..1.0));
    e /= e.norm();
    StateSpaceModel::new(
        adj.a() + eps * e,
        adj.b().clone(),
        adj.c().clone(),
        false,
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lti::{make_system, random_stable_system};
    use crate::sampling::{collect_adjoint, collect_primal, SnapshotKind};
    use approx::assert_relative_eq;

    fn scalar_system() -> StateSpaceModel {
        make_system(
            DMatrix::from_element(1, 1, 0.5),
            DMatrix::from_element(1, 1, 1.0),
            DMatrix::from_element(1, 1, 1.0),
            true,
        )
        .unwrap()
    }

    fn s2_system() -> StateSpaceModel {
        make_system(
            DMatrix::from_row_slice(2, 2, &[0.5, 1.0, 0.0, 0.6]),
            DMatrix::from_row_slice(2, 1, &[0.0, 1.0]),
            DMatrix::from_row_slice(1, 2, &[1.0, 0.0]),
            true,
        )
        .unwrap()
    }

    #[test]
    fn empirical_scalar() {
        let m = scalar_system();
        let x = collect_primal(&m, 1, 1).unwrap();
        let y = collect_adjoint(&m, 1, 1, None).unwrap();
        let g = empirical_gramians(&x, &y).unwrap();
        assert_relative_eq!(g.w_c()[(0, 0)], 1.25, max_relative = 1e-14);
        assert_relative_eq!(g.w_o()[(0, 0)], 1.25, max_relative = 1e-14);
    }

    #[test]
    fn empirical_zero_snapshots() {
        let x = SnapshotMatrix::new(DMatrix::zeros(3, 2), 1, 1, SnapshotKind::Primal).unwrap();
        let y = SnapshotMatrix::new(DMatrix::zeros(3, 2), 1, 1, SnapshotKind::Adjoint).unwrap();
        let g = empirical_gramians(&x, &y).unwrap();
        assert_eq!(linalg::max_abs(g.w_c()), 0.0);
    }

    #[test]
    fn empirical_s2_hand_product() {
        let m = s2_system();
        let x = collect_primal(&m, 1, 1).unwrap();
        let y = collect_adjoint(&m, 1, 1, None).unwrap();
        let g = empirical_gramians(&x, &y).unwrap();
        let expected = DMatrix::from_row_slice(2, 2, &[1.0, 0.6, 0.6, 1.36]);
        assert!(linalg::rel_diff(g.w_c(), &expected) < 1e-14);
    }

    #[test]
    fn exact_scalar_geometric_series() {
        let g = exact_gramians(&scalar_system()).unwrap();
        assert_relative_eq!(g.w_c()[(0, 0)], 4.0 / 3.0, max_relative = 1e-13);
        assert_relative_eq!(g.w_o()[(0, 0)], 4.0 / 3.0, max_relative = 1e-13);
    }

    #[test]
    fn exact_zero_input() {
        let m = make_system(
            DMatrix::from_element(1, 1, 0.5),
            DMatrix::from_element(1, 1, 0.0),
            DMatrix::from_element(1, 1, 1.0),
            true,
        )
        .unwrap();
        let g = exact_gramians(&m).unwrap();
        assert_eq!(g.w_c()[(0, 0)], 0.0);
    }

    #[test]
    fn exact_matches_truncated_series_oracle() {
        let m = s2_system();
        let g = exact_gramians(&m).unwrap();
        // Series oracle: sum over k <= 200 of A^k B B^T (A^T)^k.
        let mut w = DMatrix::zeros(2, 2);
        let mut col = m.b().clone();
        for _ in 0..=200 {
            w += &col * col.transpose();
            col = m.a() * col;
        }
        assert!(linalg::rel_diff(g.w_c(), &w) < 1e-10);

        let mut wo = DMatrix::zeros(2, 2);
        let mut row = m.c().transpose();
        for _ in 0..=200 {
            wo += &row * row.transpose();
            row = m.a().transpose() * row;
        }
        assert!(linalg::rel_diff(g.w_o(), &wo) < 1e-10);
    }

    #[test]
    fn stein_residual_is_small() {
        let m = random_stable_system(12, 2, 2, 0.9, 3).unwrap();
        let g = exact_gramians(&m).unwrap();
        let residual = m.a() * g.w_c() * m.a().transpose() - g.w_c()
            + m.b() * m.b().transpose();
        assert!(linalg::max_abs(&residual) < 1e-11 * linalg::max_abs(g.w_c()));
    }

    #[test]
    fn bt_oracle_scalar_identity() {
        let rom = exact_balanced_truncation(&scalar_system(), 1).unwrap();
        assert_relative_eq!(rom.hsv()[0], 4.0 / 3.0, max_relative = 1e-12);
        assert_relative_eq!(rom.a_r()[(0, 0)], 0.5, max_relative = 1e-12);
        assert_relative_eq!(rom.b_r()[(0, 0)], 1.0, max_relative = 1e-12);
        assert_relative_eq!(rom.c_r()[(0, 0)], 1.0, max_relative = 1e-12);
    }

    #[test]
    fn bt_oracle_full_order_preserves_markov_parameters() {
        let m = random_stable_system(5, 2, 1, 0.8, 17).unwrap();
        let rom = exact_balanced_truncation(&m, 5).unwrap();
        let reduced = rom.to_model().unwrap();
        let got = crate::lti::markov_parameters(&reduced, 10);
        let want = crate::lti::markov_parameters(&m, 10);
        for k in 0..10 {
            let scale = linalg::max_abs(&want.blocks()[k]).max(1e-9);
            assert!(
                linalg::max_abs(&(&got.blocks()[k] - &want.blocks()[k])) < 1e-9 * scale,
                "Markov parameter {k} not preserved"
            );
        }
    }

    #[test]
    fn bt_oracle_full_order_is_balanced() {
        // At full order the balanced realization has W_c = W_o = diag(hsv)
        // exactly; truncation perturbs the reduced Gramians slightly.
        let m = random_stable_system(6, 1, 2, 0.85, 23).unwrap();
        let rom = exact_balanced_truncation(&m, 6).unwrap();
        let grams = exact_gramians(&rom.to_model().unwrap()).unwrap();
        for i in 0..6 {
            assert_relative_eq!(grams.w_c()[(i, i)], rom.hsv()[i], max_relative = 1e-8);
            assert_relative_eq!(grams.w_o()[(i, i)], rom.hsv()[i], max_relative = 1e-8);
        }
        let off_c = grams.w_c() - DMatrix::from_diagonal(&nalgebra::DVector::from_vec(rom.hsv().to_vec()));
        assert!(linalg::max_abs(&off_c) < 1e-8 * rom.hsv()[0]);
    }

    #[test]
    fn bt_oracle_rank_exceeded_on_unreachable_states() {
        // 2-state system with one unreachable, unobservable state.
        let m = make_system(
            DMatrix::from_row_slice(2, 2, &[0.5, 0.0, 0.0, 0.4]),
            DMatrix::from_row_slice(2, 1, &[1.0, 0.0]),
            DMatrix::from_row_slice(1, 2, &[1.0, 0.0]),
            true,
        )
        .unwrap();
        let err = exact_balanced_truncation(&m, 2).unwrap_err();
        assert!(matches!(err, Error::RankExceeded { rank: 1, .. }));
    }

    #[test]
    fn full_transformation_square_case() {
        let phi = DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 0.0, 1.0]);
        let psi_t = phi.clone().lu().try_inverse().unwrap();
        let trans = build_full_transformation(&phi, &psi_t.transpose()).unwrap();
        assert_eq!(trans.t(), &phi);
        assert_eq!(trans.t_inv(), &psi_t);
    }

    #[test]
    fn full_transformation_first_basis_vector() {
        let phi = DMatrix::from_row_slice(2, 1, &[1.0, 0.0]);
        let trans = build_full_transformation(&phi, &phi).unwrap();
        assert!(linalg::rel_diff(trans.t(), &DMatrix::identity(2, 2)) < 1e-12);
        assert!(linalg::rel_diff(trans.t_inv(), &DMatrix::identity(2, 2)) < 1e-12);
    }

    #[test]
    fn full_transformation_random_modes() {
        // Biorthogonal pair from a random snapshot Hankel factorization.
        let mut rng = ChaCha8Rng::seed_from_u64(40);
        let x_data = DMatrix::from_fn(20, 5, |_, _| rng.gen_range(-1.0..1.0));
        let y_data = DMatrix::from_fn(20, 5, |_, _| rng.gen_range(-1.0..1.0));
        let x = SnapshotMatrix::new(x_data, 1, 1, SnapshotKind::Primal).unwrap();
        let y = SnapshotMatrix::new(y_data, 1, 1, SnapshotKind::Adjoint).unwrap();
        let h = y.data().transpose() * x.data();
        let svd = crate::reduction::svd_truncate(&h, None, 1e-10).unwrap();
        let modes = crate::reduction::bpod_modes(&x, &y, &svd, svd.retained()).unwrap();

        let trans = build_full_transformation(modes.phi(), modes.psi()).unwrap();
        let eye = trans.t() * trans.t_inv();
        assert!(linalg::rel_diff(&eye, &DMatrix::identity(20, 20)) < 1e-9);
        let head = trans.t_inv().rows(0, 5).clone_owned();
        assert!(linalg::rel_diff(&head, &modes.psi().transpose()) < 1e-9);
    }

    #[test]
    fn scalar_diagonals_report() {
        let rom = exact_balanced_truncation(&scalar_system(), 1).unwrap();
        let rows = gramian_diagonals_report(&rom).unwrap();
        assert_eq!(rows.len(), 1);
        assert_relative_eq!(rows[0].hsv, 4.0 / 3.0, max_relative = 1e-12);
        assert_relative_eq!(rows[0].wc_diag, 4.0 / 3.0, max_relative = 1e-10);
        assert_relative_eq!(rows[0].wo_diag, 4.0 / 3.0, max_relative = 1e-10);
    }

    #[test]
    fn perturb_zero_eps_is_exact_adjoint() {
        let m = s2_system();
        let adj = perturb_adjoint(&m, 0.0).unwrap();
        assert_eq!(adj, adjoint_system(&m));
    }

    #[test]
    fn perturb_direction_has_unit_norm_and_is_fixed() {
        let m = random_stable_system(6, 1, 1, 0.8, 2).unwrap();
        let p1 = perturb_adjoint(&m, 1e-3).unwrap();
        let p2 = perturb_adjoint(&m, 1e-3).unwrap();
        assert_eq!(p1, p2);
        let diff = p1.a() - adjoint_system(&m).a().clone_owned();
        assert_relative_eq!(diff.norm(), 1e-3, max_relative = 1e-12);
    }

    #[test]
    fn large_perturbation_destabilizes() {
        let m = random_stable_system(5, 1, 1, 0.99, 14).unwrap();
        let bad = perturb_adjoint(&m, 3.0).unwrap();
        assert!(!bad.is_stable());
        let err = crate::sampling::collect_adjoint_from(&bad, 3, 1, None).unwrap_err();
        assert!(matches!(err, Error::UnstableSystem { .. }));
    }
}
