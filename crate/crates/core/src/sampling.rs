//! Snapshot collection: primal/adjoint state snapshots, the Markov-parameter
//! pattern consumed by the Hankel builder, and output projection.
//!
//! Snapshot counts follow the conventions of the two pipelines they feed:
//! `collect_primal`/`collect_adjoint` produce m+1 snapshots in mP+1 steps,
//! while `collect_markov_pairs` runs a single (m_c+m_o)P+2-step simulation
//! and keeps the adjacent pairs of outputs at exponents kP and kP+1. The
//! off-by-one conventions are deliberately not unified.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::linalg;
use crate::lti::{self, StateSpaceModel};

/// Whether a snapshot matrix came from the primal or the adjoint system.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SnapshotKind {
    Primal,
    Adjoint,
}

/// Column-stacked state snapshots: block j holds the p (or q-tilde) state
/// columns at sampling instant jP.
#[derive(Clone, Debug, PartialEq)]
pub struct SnapshotMatrix {
    data: DMatrix<f64>,
    block_width: usize,
    sampling_period: usize,
    kind: SnapshotKind,
}

impl SnapshotMatrix {
    /// Validated construction for deserialized or synthetic snapshot data.
    pub fn new(
        data: DMatrix<f64>,
        block_width: usize,
        sampling_period: usize,
        kind: SnapshotKind,
    ) -> Result<Self> {
        if block_width == 0 || sampling_period == 0 {
            return Err(Error::InvalidArgument(
                "block width and sampling period must be positive".into(),
            ));
        }
        if data.ncols() % block_width != 0 {
            return Err(Error::ShapeMismatch(format!(
                "{} columns not divisible by block width {}",
                data.ncols(),
                block_width
            )));
        }
        Ok(Self {
            data,
            block_width,
            sampling_period,
            kind,
        })
    }

    pub(crate) fn from_parts(
        data: DMatrix<f64>,
        block_width: usize,
        sampling_period: usize,
        kind: SnapshotKind,
    ) -> Self {
        assert!(block_width > 0 && sampling_period > 0);
        assert_eq!(
            data.ncols() % block_width,
            0,
            "column count must be divisible by the block width"
        );
        Self {
            data,
            block_width,
            sampling_period,
            kind,
        }
    }

    pub fn data(&self) -> &DMatrix<f64> {
        &self.data
    }

    pub fn block_width(&self) -> usize {
        self.block_width
    }

    pub fn sampling_period(&self) -> usize {
        self.sampling_period
    }

    pub fn kind(&self) -> SnapshotKind {
        self.kind
    }

    /// Number of snapshot blocks (m + 1).
    pub fn num_blocks(&self) -> usize {
        self.data.ncols() / self.block_width
    }

    /// State dimension.
    pub fn state_dim(&self) -> usize {
        self.data.nrows()
    }

    /// The j-th snapshot block as an owned n x block_width matrix.
    pub fn block(&self, j: usize) -> DMatrix<f64> {
        self.data
            .columns(j * self.block_width, self.block_width)
            .clone_owned()
    }
}

/// Ordered q x p output blocks CA^kB together with the exponents k they
/// carry. Exponents are strictly increasing and blocks are deduplicated, so
/// overlapping patterns (P = 1) cost no extra storage.
#[derive(Clone, Debug, PartialEq)]
pub struct MarkovSequence {
    blocks: Vec<DMatrix<f64>>,
    indices: Vec<usize>,
}

impl MarkovSequence {
    pub(crate) fn from_parts(blocks: Vec<DMatrix<f64>>, indices: Vec<usize>) -> Self {
        assert_eq!(blocks.len(), indices.len());
        assert!(indices.windows(2).all(|w| w[0] < w[1]));
        if let Some(first) = blocks.first() {
            assert!(blocks.iter().all(|b| b.shape() == first.shape()));
        }
        Self { blocks, indices }
    }

    /// Validated construction for deserialized data.
    pub fn new(blocks: Vec<DMatrix<f64>>, indices: Vec<usize>) -> Result<Self> {
        if blocks.len() != indices.len() {
            return Err(Error::ShapeMismatch(
                "block and index counts differ".into(),
            ));
        }
        if !indices.windows(2).all(|w| w[0] < w[1]) {
            return Err(Error::InvalidArgument(
                "exponents must be strictly increasing".into(),
            ));
        }
        if let Some(first) = blocks.first() {
            if !blocks.iter().all(|b| b.shape() == first.shape()) {
                return Err(Error::ShapeMismatch("block shapes differ".into()));
            }
        }
        Ok(Self { blocks, indices })
    }

    pub fn blocks(&self) -> &[DMatrix<f64>] {
        &self.blocks
    }

    pub fn indices(&self) -> &[usize] {
        &self.indices
    }

    /// Output/input dimensions (q, p) of each block.
    pub fn block_shape(&self) -> (usize, usize) {
        self.blocks.first().map_or((0, 0), |b| b.shape())
    }

    /// The block at time exponent k, if present.
    pub fn at_exponent(&self, k: usize) -> Option<&DMatrix<f64>> {
        self.indices
            .binary_search(&k)
            .ok()
            .map(|pos| &self.blocks[pos])
    }

    /// The sequence with every block left-multiplied by Theta^T.
    pub fn projected(&self, projector: &OutputProjector) -> Result<MarkovSequence> {
        let (q, _) = self.block_shape();
        if projector.output_dim() != q {
            return Err(Error::ProjectorDimensionMismatch {
                projector_rows: projector.output_dim(),
                outputs: q,
            });
        }
        let theta_t = projector.theta().transpose();
        Ok(MarkovSequence {
            blocks: self.blocks.iter().map(|b| &theta_t * b).collect(),
            indices: self.indices.clone(),
        })
    }
}

/// Orthonormal leading POD modes of an output-snapshot set, used to project
/// high-dimensional outputs. `energies` keeps the full singular-value
/// spectrum of the snapshot matrix, not just the retained part.
#[derive(Clone, Debug, PartialEq)]
pub struct OutputProjector {
    theta: DMatrix<f64>,
    energies: Vec<f64>,
}

impl OutputProjector {
    /// Validated construction from stored mode and energy data: columns must
    /// be orthonormal to 1e-10 and energies non-increasing.
    pub fn from_parts(theta: DMatrix<f64>, energies: Vec<f64>) -> Result<Self> {
        let m = theta.ncols();
        let gram = theta.transpose() * &theta;
        let defect = linalg::max_abs(&(gram - DMatrix::identity(m, m)));
        if defect > 1e-10 {
            return Err(Error::InvalidArgument(format!(
                "projector columns are not orthonormal (defect {defect:e})"
            )));
        }
        if energies.windows(2).any(|w| w[1] > w[0]) {
            return Err(Error::InvalidArgument(
                "projector energies must be non-increasing".into(),
            ));
        }
        Ok(Self { theta, energies })
    }

    pub fn theta(&self) -> &DMatrix<f64> {
        &self.theta
    }

    /// Singular values of the output-snapshot matrix, non-increasing.
    pub fn energies(&self) -> &[f64] {
        &self.energies
    }

    /// Number of retained modes.
    pub fn mode_count(&self) -> usize {
        self.theta.ncols()
    }

    /// Output dimension the projector applies to.
    pub fn output_dim(&self) -> usize {
        self.theta.nrows()
    }

    /// Theta^T y: project a full output into mode coordinates.
    pub fn project(&self, y: &DMatrix<f64>) -> DMatrix<f64> {
        self.theta.transpose() * y
    }

    /// Theta x: embed mode coordinates back into the full output space.
    pub fn embed(&self, y_modes: &DMatrix<f64>) -> DMatrix<f64> {
        &self.theta * y_modes
    }
}

fn check_projector(projector: &OutputProjector, q: usize) -> Result<()> {
    if projector.output_dim() != q {
        return Err(Error::ProjectorDimensionMismatch {
            projector_rows: projector.output_dim(),
            outputs: q,
        });
    }
    Ok(())
}

/// Primal impulse snapshots X = [B, A^P B, ..., A^{m_c P} B].
pub fn collect_primal(
    model: &StateSpaceModel,
    m_c: usize,
    period: usize,
) -> Result<SnapshotMatrix> {
    model.require_stable()?;
    if m_c < 1 || period < 1 {
        return Err(Error::InvalidArgument(
            "snapshot count and period must be at least 1".into(),
        ));
    }
    Ok(lti::impulse_response_states(model, m_c, period))
}

/// Adjoint impulse snapshots Y = [C*, (A*)^P C*, ..., (A*)^{m_o P} C*].
///
/// With a projector, each retained POD mode seeds one adjoint run, so the
/// effective adjoint input map is C* Theta and the block width is the mode
/// count instead of q.
pub fn collect_adjoint(
    model: &StateSpaceModel,
    m_o: usize,
    period: usize,
    projector: Option<&OutputProjector>,
) -> Result<SnapshotMatrix> {
    let adj = lti::adjoint_system(model);
    collect_adjoint_from(&adj, m_o, period, projector)
}

/// As `collect_adjoint`, but runs a caller-supplied adjoint system. This is
/// the entry point used with deliberately perturbed adjoints.
pub fn collect_adjoint_from(
    adjoint: &StateSpaceModel,
    m_o: usize,
    period: usize,
    projector: Option<&OutputProjector>,
) -> Result<SnapshotMatrix> {
    adjoint.require_stable()?;
    if m_o < 1 || period < 1 {
        return Err(Error::InvalidArgument(
            "snapshot count and period must be at least 1".into(),
        ));
    }
    let run = match projector {
        Some(proj) => {
            check_projector(proj, adjoint.input_dim())?;
            let seeded = StateSpaceModel::new(
                adjoint.a().clone(),
                adjoint.b() * proj.theta(),
                adjoint.c().clone(),
                true,
            )?;
            lti::impulse_response_states(&seeded, m_o, period)
        }
        None => lti::impulse_response_states(adjoint, m_o, period),
    };
    Ok(SnapshotMatrix::from_parts(
        run.data().clone(),
        run.block_width(),
        period,
        SnapshotKind::Adjoint,
    ))
}

/// The adjacent-pair Markov pattern: one primal impulse simulation of
/// (m_c + m_o)P + 2 steps, keeping the output blocks at exponents kP and
/// kP + 1 for 0 <= k <= m_c + m_o. Duplicate exponents (P = 1) are stored
/// once. With a projector the blocks are Theta^T (C A^k B).
pub fn collect_markov_pairs(
    model: &StateSpaceModel,
    m_c: usize,
    m_o: usize,
    period: usize,
    projector: Option<&OutputProjector>,
) -> Result<MarkovSequence> {
    model.require_stable()?;
    if period < 1 {
        return Err(Error::InvalidArgument("period must be at least 1".into()));
    }
    let theta_t = match projector {
        Some(proj) => {
            check_projector(proj, model.output_dim())?;
            Some(proj.theta().transpose())
        }
        None => None,
    };
    let mut exponents: Vec<usize> = Vec::with_capacity(2 * (m_c + m_o + 1));
    for k in 0..=(m_c + m_o) {
        exponents.push(k * period);
        exponents.push(k * period + 1);
    }
    exponents.sort_unstable();
    exponents.dedup();
    Ok(lti::markov_at_exponents(model, &exponents, theta_t.as_ref()))
}

/// Stacks the columns of every block of a Markov sequence into one q x (p * len)
/// output-snapshot matrix, in exponent order.
pub fn output_snapshot_matrix(seq: &MarkovSequence) -> DMatrix<f64> {
    let (q, p) = seq.block_shape();
    let mut m = DMatrix::zeros(q, p * seq.blocks().len());
    for (j, block) in seq.blocks().iter().enumerate() {
        m.columns_mut(j * p, p).copy_from(block);
    }
    m
}

/// Leading `m_out` POD modes of an output-snapshot matrix (columns are output
/// snapshots). Modes are the left singular vectors; `energies` records the
/// whole singular-value spectrum. Errors with `RankDeficient` when fewer than
/// `m_out` singular values exceed 1e-12 relative to the largest.
pub fn fit_output_projector(outputs: &DMatrix<f64>, m_out: usize) -> Result<OutputProjector> {
    if m_out == 0 {
        return Err(Error::InvalidArgument(
            "at least one projection mode required".into(),
        ));
    }
    let svd = linalg::sorted_svd(outputs)?;
    let sigma_max = svd.sigma.iter().copied().fold(0.0f64, f64::max);
    let available = svd
        .sigma
        .iter()
        .filter(|&&s| s > 1e-12 * sigma_max && s > 0.0)
        .count();
    if available < m_out {
        return Err(Error::RankDeficient {
            requested: m_out,
            available,
        });
    }
    Ok(OutputProjector {
        theta: svd.u.columns(0, m_out).clone_owned(),
        energies: svd.sigma.iter().copied().collect(),
    })
}

/// Convenience wrapper fitting the projector on all blocks of a Markov
/// sequence.
pub fn fit_output_projector_from_markov(
    seq: &MarkovSequence,
    m_out: usize,
) -> Result<OutputProjector> {
    fit_output_projector(&output_snapshot_matrix(seq), m_out)
}

/// Default sampling parameters: the period is chosen so that roughly
/// `SNAPSHOT_CAP` snapshots span the horizon at which the impulse response
/// has decayed to 1e-4 of its initial norm.
pub fn default_sampling(model: &StateSpaceModel) -> Result<(usize, usize, usize)> {
    model.require_stable()?;
    let b_norm = model.b().norm();
    if b_norm == 0.0 {
        return Ok((1, 1, 1));
    }
    let mut x = model.b().clone();
    let mut steps = 0usize;
    let limit = 200_000usize;
    while x.norm() >= 1e-4 * b_norm && steps < limit {
        x = model.a() * x;
        steps += 1;
    }
    let steps = steps.max(1);
    let period = steps.div_ceil(SNAPSHOT_CAP);
    let m = steps.div_ceil(period);
    Ok((m, m, period))
}

/// Cap on the default number of snapshots per direction.
pub const SNAPSHOT_CAP: usize = 200;

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lti::{adjoint_system, make_system, markov_parameters, random_stable_system};
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
    fn primal_scalar_periods() {
        let m = scalar_system();
        let x1 = collect_primal(&m, 1, 1).unwrap();
        assert_eq!(x1.data().as_slice(), &[1.0, 0.5]);
        let x2 = collect_primal(&m, 1, 2).unwrap();
        assert_eq!(x2.data().as_slice(), &[1.0, 0.25]);
    }

    #[test]
    fn primal_s2_matches_recursion_oracle() {
        let m = s2_system();
        let x = collect_primal(&m, 2, 1).unwrap();
        let expected = DMatrix::from_row_slice(2, 3, &[0.0, 1.0, 1.1, 1.0, 0.6, 0.36]);
        assert!(linalg::rel_diff(x.data(), &expected) < 1e-14);
        assert_eq!(x.kind(), SnapshotKind::Primal);
    }

    #[test]
    fn adjoint_scalar_self_adjoint() {
        let m = scalar_system();
        let y = collect_adjoint(&m, 1, 1, None).unwrap();
        assert_eq!(y.data().as_slice(), &[1.0, 0.5]);
        assert_eq!(y.kind(), SnapshotKind::Adjoint);
    }

    #[test]
    fn adjoint_s2_blocks() {
        // Oracle: transpose recursion z <- A^T z from z0 = C^T.
        let m = s2_system();
        let y = collect_adjoint(&m, 1, 1, None).unwrap();
        let expected = DMatrix::from_row_slice(2, 2, &[1.0, 0.5, 0.0, 1.0]);
        assert!(linalg::rel_diff(y.data(), &expected) < 1e-14);
    }

    #[test]
    fn identity_projector_is_no_projector() {
        let m = random_stable_system(5, 2, 3, 0.7, 2).unwrap();
        let eye = OutputProjector {
            theta: DMatrix::identity(3, 3),
            energies: vec![1.0, 1.0, 1.0],
        };
        let with = collect_adjoint(&m, 4, 2, Some(&eye)).unwrap();
        let without = collect_adjoint(&m, 4, 2, None).unwrap();
        assert_eq!(with.data(), without.data());
    }

    #[test]
    fn projector_dimension_mismatch_detected() {
        let m = random_stable_system(5, 2, 3, 0.7, 2).unwrap();
        let bad = OutputProjector {
            theta: DMatrix::identity(4, 2),
            energies: vec![1.0, 1.0],
        };
        let err = collect_adjoint(&m, 4, 2, Some(&bad)).unwrap_err();
        assert!(matches!(err, Error::ProjectorDimensionMismatch { .. }));
    }

    #[test]
    fn markov_pairs_scalar_period_two() {
        let m = scalar_system();
        let seq = collect_markov_pairs(&m, 1, 1, 2, None).unwrap();
        assert_eq!(seq.indices(), &[0, 1, 2, 3, 4, 5]);
        let values: Vec<f64> = seq.blocks().iter().map(|b| b[(0, 0)]).collect();
        assert_eq!(values, vec![1.0, 0.5, 0.25, 0.125, 0.0625, 0.03125]);
    }

    #[test]
    fn markov_pairs_period_one_dedups() {
        let m = scalar_system();
        let seq = collect_markov_pairs(&m, 1, 1, 1, None).unwrap();
        // k in {0,1,2} yields pairs {0,1},{1,2},{2,3}; duplicates collapse.
        assert_eq!(seq.indices(), &[0, 1, 2, 3]);
    }

    #[test]
    fn markov_pairs_s2_values() {
        let m = s2_system();
        let seq = collect_markov_pairs(&m, 1, 1, 1, None).unwrap();
        let values: Vec<f64> = seq.blocks().iter().map(|b| b[(0, 0)]).collect();
        assert_eq!(values, vec![0.0, 1.0, 1.1, 0.91]);
    }

    #[test]
    fn markov_pairs_consistent_with_primal_snapshots() {
        let m = random_stable_system(6, 2, 2, 0.8, 5).unwrap();
        let (m_c, m_o, period) = (3, 2, 2);
        let seq = collect_markov_pairs(&m, m_c, m_o, period, None).unwrap();
        let x = collect_primal(&m, m_c + m_o, period).unwrap();
        for k in 0..=(m_c + m_o) {
            let markov = seq.at_exponent(k * period).unwrap();
            let from_primal = m.c() * x.block(k);
            assert!(linalg::rel_diff(markov, &from_primal) < 1e-12);
        }
    }

    #[test]
    fn adjoint_blocks_reproduce_markov_blocks() {
        let m = random_stable_system(6, 2, 2, 0.8, 6).unwrap();
        let period = 3;
        let y = collect_adjoint(&m, 4, period, None).unwrap();
        let seq = markov_parameters(&m, 4 * period + 1);
        for k in 0..=4 {
            let lhs = y.block(k).transpose() * m.b();
            let rhs = &seq.blocks()[k * period];
            assert!(linalg::rel_diff(&lhs, rhs) < 1e-12);
        }
    }

    #[test]
    fn projector_q1_is_positive_unit() {
        let outputs = DMatrix::from_row_slice(1, 3, &[-2.0, -1.0, -0.5]);
        let proj = fit_output_projector(&outputs, 1).unwrap();
        assert_relative_eq!(proj.theta()[(0, 0)], 1.0, max_relative = 1e-14);
    }

    #[test]
    fn projector_spans_plane_and_is_orthonormal() {
        // Columns lie in the span of two fixed directions.
        let u1 = DMatrix::from_row_slice(4, 1, &[1.0, 0.0, 1.0, 0.0]);
        let u2 = DMatrix::from_row_slice(4, 1, &[0.0, 2.0, 0.0, -1.0]);
        let mut outputs = DMatrix::zeros(4, 5);
        for j in 0..5 {
            let col = &u1 * (1.0 + j as f64) + &u2 * (0.5 * j as f64 - 1.0);
            outputs.set_column(j, &col.column(0));
        }
        let proj = fit_output_projector(&outputs, 2).unwrap();
        let gram = proj.theta().transpose() * proj.theta();
        assert!(linalg::rel_diff(&gram, &DMatrix::identity(2, 2)) < 1e-10);
        // Every snapshot is reproduced by the two modes.
        let reconstructed = proj.embed(&proj.project(&outputs));
        assert!(linalg::rel_diff(&reconstructed, &outputs) < 1e-10);
    }

    #[test]
    fn projector_rank_deficient() {
        let u1 = DMatrix::from_row_slice(4, 1, &[1.0, 0.0, 1.0, 0.0]);
        let mut outputs = DMatrix::zeros(4, 4);
        for j in 0..4 {
            outputs.set_column(j, &(&u1 * (j as f64 + 1.0)).column(0));
        }
        let err = fit_output_projector(&outputs, 3).unwrap_err();
        assert!(matches!(err, Error::RankDeficient { available: 1, .. }));
    }

    #[test]
    fn projector_idempotent_on_projected_outputs() {
        let m = random_stable_system(8, 1, 6, 0.8, 7).unwrap();
        let seq = collect_markov_pairs(&m, 5, 5, 1, None).unwrap();
        let proj = fit_output_projector_from_markov(&seq, 3).unwrap();
        let projected = proj.project(&output_snapshot_matrix(&seq));
        let again = fit_output_projector(&projected, 3).unwrap();
        assert!(linalg::rel_diff(again.theta(), &DMatrix::identity(3, 3)) < 1e-10);
    }

    #[test]
    fn default_sampling_reaches_decay_horizon() {
        let m = random_stable_system(6, 1, 1, 0.9, 8).unwrap();
        let (m_c, _m_o, period) = default_sampling(&m).unwrap();
        assert!(m_c <= SNAPSHOT_CAP + 1);
        let x = collect_primal(&m, m_c, period).unwrap();
        let tail = x.block(m_c).norm();
        assert!(tail < 1e-3 * m.b().norm());
    }
}
