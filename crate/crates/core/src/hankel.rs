//! Generalized Hankel matrices H and H' built by the two routes: snapshot
//! inner products (H = Y*X, H' = Y*AX) and Markov-parameter assembly. The
//! two routes agree up to simulation roundoff on exactly simulated systems.
//!
//! Every block inner product performed while assembling H is counted; block
//! assembly by Markov copies only counts the distinct blocks. The counters
//! quantify the cost gap between the routes at block granularity.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::lti::StateSpaceModel;
use crate::sampling::{MarkovSequence, SnapshotKind, SnapshotMatrix};

/// Which pipeline assembled the pair.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum HankelSource {
    Bpod,
    Era,
}

/// A generalized Hankel matrix H and its shifted companion H', with block
/// layout metadata and assembly-cost counters.
#[derive(Clone, Debug, PartialEq)]
pub struct HankelPair {
    h: DMatrix<f64>,
    h_prime: DMatrix<f64>,
    block_rows: usize,
    block_cols: usize,
    block_shape: (usize, usize),
    source: HankelSource,
    h_block_products: u64,
    h_prime_block_products: u64,
}

impl HankelPair {
    pub fn h(&self) -> &DMatrix<f64> {
        &self.h
    }

    pub fn h_prime(&self) -> &DMatrix<f64> {
        &self.h_prime
    }

    /// Number of block rows, m_o + 1.
    pub fn block_rows(&self) -> usize {
        self.block_rows
    }

    /// Number of block columns, m_c + 1.
    pub fn block_cols(&self) -> usize {
        self.block_cols
    }

    /// Shape (q-tilde, p) of each block.
    pub fn block_shape(&self) -> (usize, usize) {
        self.block_shape
    }

    pub fn source(&self) -> HankelSource {
        self.source
    }

    /// Block inner products spent assembling H.
    pub fn h_block_products(&self) -> u64 {
        self.h_block_products
    }

    /// Block inner products spent assembling H'.
    pub fn h_prime_block_products(&self) -> u64 {
        self.h_prime_block_products
    }

    /// Block (i, j) of H as an owned matrix.
    pub fn h_block(&self, i: usize, j: usize) -> DMatrix<f64> {
        let (q, p) = self.block_shape;
        self.h.view((i * q, j * p), (q, p)).clone_owned()
    }

    /// Block (i, j) of H'.
    pub fn h_prime_block(&self, i: usize, j: usize) -> DMatrix<f64> {
        let (q, p) = self.block_shape;
        self.h_prime.view((i * q, j * p), (q, p)).clone_owned()
    }

    pub(crate) fn from_parts(
        h: DMatrix<f64>,
        h_prime: DMatrix<f64>,
        block_rows: usize,
        block_cols: usize,
        block_shape: (usize, usize),
        source: HankelSource,
        h_block_products: u64,
        h_prime_block_products: u64,
    ) -> Self {
        Self {
            h,
            h_prime,
            block_rows,
            block_cols,
            block_shape,
            source,
            h_block_products,
            h_prime_block_products,
        }
    }
}

/// H = Y*X and H' = Y*(AX), assembled block by block from primal snapshots X
/// and adjoint snapshots Y. The shifted matrix applies one extra simulation
/// step to the columns of X instead of storing a second snapshot set.
pub fn hankel_from_snapshots(
    x: &SnapshotMatrix,
    y: &SnapshotMatrix,
    model: &StateSpaceModel,
) -> Result<HankelPair> {
    if x.kind() != SnapshotKind::Primal || y.kind() != SnapshotKind::Adjoint {
        return Err(Error::InvalidArgument(
            "expected a primal X and an adjoint Y".into(),
        ));
    }
    if x.sampling_period() != y.sampling_period() {
        return Err(Error::PeriodMismatch {
            primal: x.sampling_period(),
            adjoint: y.sampling_period(),
        });
    }
    if x.state_dim() != y.state_dim() || x.state_dim() != model.state_dim() {
        return Err(Error::DimensionMismatch(format!(
            "state dimensions differ: X has {}, Y has {}, model has {}",
            x.state_dim(),
            y.state_dim(),
            model.state_dim()
        )));
    }

    let block_rows = y.num_blocks();
    let block_cols = x.num_blocks();
    let q = y.block_width();
    let p = x.block_width();

    let ax = model.a() * x.data();
    let mut h = DMatrix::zeros(block_rows * q, block_cols * p);
    let mut h_prime = DMatrix::zeros(block_rows * q, block_cols * p);
    let mut h_count = 0u64;
    let mut hp_count = 0u64;
    for i in 0..block_rows {
        let yi_t = y.block(i).transpose();
        for j in 0..block_cols {
            let xj = x.data().columns(j * p, p);
            h.view_mut((i * q, j * p), (q, p)).copy_from(&(&yi_t * xj));
            h_count += 1;
            let axj = ax.columns(j * p, p);
            h_prime
                .view_mut((i * q, j * p), (q, p))
                .copy_from(&(&yi_t * axj));
            hp_count += 1;
        }
    }

    Ok(HankelPair::from_parts(
        h,
        h_prime,
        block_rows,
        block_cols,
        (q, p),
        HankelSource::Bpod,
        h_count,
        hp_count,
    ))
}

/// H and H' assembled from Markov parameters: block (i, j) of H is the block
/// at exponent (i+j)P, and of H' at (i+j)P + 1. Only the m_c + m_o + 1
/// distinct anti-diagonal blocks of each matrix are real data; every other
/// position is a copy.
pub fn hankel_from_markov(
    markov: &MarkovSequence,
    m_c: usize,
    m_o: usize,
    period: usize,
) -> Result<HankelPair> {
    if period < 1 {
        return Err(Error::InvalidArgument("period must be at least 1".into()));
    }
    let (q, p) = markov.block_shape();
    if q == 0 || p == 0 {
        return Err(Error::InvalidArgument("empty Markov sequence".into()));
    }
    let mut diag = Vec::with_capacity(m_c + m_o + 1);
    let mut diag_prime = Vec::with_capacity(m_c + m_o + 1);
    for k in 0..=(m_c + m_o) {
        let e = k * period;
        diag.push(
            markov
                .at_exponent(e)
                .ok_or(Error::MissingExponent { exponent: e })?,
        );
        diag_prime.push(
            markov
                .at_exponent(e + 1)
                .ok_or(Error::MissingExponent { exponent: e + 1 })?,
        );
    }

    let block_rows = m_o + 1;
    let block_cols = m_c + 1;
    let mut h = DMatrix::zeros(block_rows * q, block_cols * p);
    let mut h_prime = DMatrix::zeros(block_rows * q, block_cols * p);
    for i in 0..block_rows {
        for j in 0..block_cols {
            h.view_mut((i * q, j * p), (q, p)).copy_from(diag[i + j]);
            h_prime
                .view_mut((i * q, j * p), (q, p))
                .copy_from(diag_prime[i + j]);
        }
    }

    let distinct = (m_c + m_o + 1) as u64;
    Ok(HankelPair::from_parts(
        h,
        h_prime,
        block_rows,
        block_cols,
        (q, p),
        HankelSource::Era,
        distinct,
        distinct,
    ))
}
