//! Discrete-time LTI systems, their adjoints, and impulse-response simulation.
//!
//! A system is the triple (A, B, C) driving
//!
//! ```text
//! x(k+1) = A x(k) + B u(k)
//! y(k)   = C x(k)
//! ```
//!
//! with n states, p inputs, and q outputs. Impulse responses are always
//! computed by repeated matrix-vector products, one input channel at a time;
//! powers of A are never formed explicitly.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::linalg;
use crate::sampling::{MarkovSequence, SnapshotKind, SnapshotMatrix};

/// Tolerance on the stability margin: a system is accepted as stable when
/// rho(A) < 1 - STABILITY_TOL.
pub const STABILITY_TOL: f64 = 1e-12;

/// Dense state-space triple (A, B, C) with stability metadata.
#[derive(Clone, Debug, PartialEq)]
pub struct StateSpaceModel {
    a: DMatrix<f64>,
    b: DMatrix<f64>,
    c: DMatrix<f64>,
    spectral_radius: f64,
    stable: bool,
}

impl StateSpaceModel {
    /// Validates dimensions, computes the spectral radius, and constructs a
    /// model. With `require_stable`, rejects systems with rho(A) >= 1 - 1e-12.
    pub fn new(
        a: DMatrix<f64>,
        b: DMatrix<f64>,
        c: DMatrix<f64>,
        require_stable: bool,
    ) -> Result<Self> {
        if !a.is_square() {
            return Err(Error::DimensionMismatch(format!(
                "A must be square, got {}x{}",
                a.nrows(),
                a.ncols()
            )));
        }
        let n = a.nrows();
        if b.nrows() != n {
            return Err(Error::DimensionMismatch(format!(
                "B must have {} rows, got {}",
                n,
                b.nrows()
            )));
        }
        if c.ncols() != n {
            return Err(Error::DimensionMismatch(format!(
                "C must have {} columns, got {}",
                n,
                c.ncols()
            )));
        }
        if n == 0 || b.ncols() == 0 || c.nrows() == 0 {
            return Err(Error::DimensionMismatch(
                "dimensions n, p, q must be positive".into(),
            ));
        }
        let rho = linalg::spectral_radius(&a)?;
        let stable = rho < 1.0 - STABILITY_TOL;
        if require_stable && !stable {
            return Err(Error::UnstableSystem { rho });
        }
        Ok(Self {
            a,
            b,
            c,
            spectral_radius: rho,
            stable,
        })
    }

    pub fn a(&self) -> &DMatrix<f64> {
        &self.a
    }

    pub fn b(&self) -> &DMatrix<f64> {
        &self.b
    }

    pub fn c(&self) -> &DMatrix<f64> {
        &self.c
    }

    /// State dimension n.
    pub fn state_dim(&self) -> usize {
        self.a.nrows()
    }

    /// Input dimension p.
    pub fn input_dim(&self) -> usize {
        self.b.ncols()
    }

    /// Output dimension q.
    pub fn output_dim(&self) -> usize {
        self.c.nrows()
    }

    /// Spectral radius rho(A) recorded at construction.
    pub fn spectral_radius(&self) -> f64 {
        self.spectral_radius
    }

    pub fn is_stable(&self) -> bool {
        self.stable
    }

    /// Returns an error unless the model was verified stable at construction.
    pub fn require_stable(&self) -> Result<()> {
        if self.stable {
            Ok(())
        } else {
            Err(Error::UnstableSystem {
                rho: self.spectral_radius,
            })
        }
    }

    /// One state update without input: x <- A x.
    pub fn step(&self, x: &mut DVector<f64>) {
        let next = &self.a * &*x;
        x.copy_from(&next);
    }

    /// Output y = C x.
    pub fn output(&self, x: &DVector<f64>) -> DVector<f64> {
        &self.c * x
    }
}

/// Validates and builds a model from the (A, B, C) triple.
pub fn make_system(
    a: DMatrix<f64>,
    b: DMatrix<f64>,
    c: DMatrix<f64>,
    require_stable: bool,
) -> Result<StateSpaceModel> {
    StateSpaceModel::new(a, b, c, require_stable)
}

/// The adjoint system (A*, C*, B*): state matrix transposed, the output map
/// becomes the input map and vice versa. Dimensions are (n, q, p).
pub fn adjoint_system(model: &StateSpaceModel) -> StateSpaceModel {
    StateSpaceModel {
        a: model.a.transpose(),
        b: model.c.transpose(),
        c: model.b.transpose(),
        spectral_radius: model.spectral_radius,
        stable: model.stable,
    }
}

/// Impulse-response state snapshots X = [B, A^P B, ..., A^{mP} B].
///
/// Each block of `p` columns holds one sampling instant; within a block the
/// columns follow the input channels in order. Computed channel by channel
/// with repeated matrix-vector products.
pub fn impulse_response_states(model: &StateSpaceModel, m: usize, period: usize) -> SnapshotMatrix {
    let data = impulse_state_blocks(model, m, period);
    SnapshotMatrix::from_parts(data, model.input_dim(), period, SnapshotKind::Primal)
}

pub(crate) fn impulse_state_blocks(
    model: &StateSpaceModel,
    m: usize,
    period: usize,
) -> DMatrix<f64> {
    assert!(period >= 1, "sampling period must be at least 1");
    let n = model.state_dim();
    let p = model.input_dim();
    let mut data = DMatrix::zeros(n, p * (m + 1));
    for ch in 0..p {
        let mut x: DVector<f64> = model.b.column(ch).into();
        data.column_mut(ch).copy_from(&x);
        for j in 1..=m {
            for _ in 0..period {
                model.step(&mut x);
            }
            data.column_mut(j * p + ch).copy_from(&x);
        }
    }
    data
}

/// The first `count` Markov parameters (CB, CAB, ..., CA^{count-1}B),
/// each a q x p block, computed by time stepping.
pub fn markov_parameters(model: &StateSpaceModel, count: usize) -> MarkovSequence {
    assert!(count >= 1, "at least one Markov parameter required");
    let exponents: Vec<usize> = (0..count).collect();
    markov_at_exponents(model, &exponents, None)
}

/// Markov blocks CA^kB at the given strictly increasing exponents, optionally
/// left-multiplied by a projection matrix. One simulation per input channel.
pub(crate) fn markov_at_exponents(
    model: &StateSpaceModel,
    exponents: &[usize],
    theta_t: Option<&DMatrix<f64>>,
) -> MarkovSequence {
    debug_assert!(exponents.windows(2).all(|w| w[0] < w[1]));
    let p = model.input_dim();
    let q = theta_t.map_or(model.output_dim(), |t| t.nrows());
    let mut blocks: Vec<DMatrix<f64>> = exponents.iter().map(|_| DMatrix::zeros(q, p)).collect();
    let max_exp = exponents.last().copied().unwrap_or(0);
    for ch in 0..p {
        let mut x: DVector<f64> = model.b.column(ch).into();
        let mut slot = 0usize;
        for k in 0..=max_exp {
            if slot < exponents.len() && exponents[slot] == k {
                let y = model.output(&x);
                let y = match theta_t {
                    Some(t) => t * y,
                    None => y,
                };
                blocks[slot].column_mut(ch).copy_from(&y);
                slot += 1;
            }
            if k < max_exp {
                model.step(&mut x);
            }
        }
    }
    MarkovSequence::from_parts(blocks, exponents.to_vec())
}

/// Deterministic random stable system with rho(A) rescaled to `target_radius`.
pub fn random_stable_system(
    n: usize,
    p: usize,
    q: usize,
    target_radius: f64,
    seed: u64,
) -> Result<StateSpaceModel> {
    if !(0.0 < target_radius && target_radius < 1.0) {
        return Err(Error::InvalidArgument(format!(
            "target radius must lie in (0, 1), got {target_radius}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let attempts = 10;
    for _ in 0..attempts {
        let a = DMatrix::from_fn(n, n, |_, _| rng.gen_range(-1.0..1.0));
        let rho = linalg::spectral_radius(&a)?;
        if rho <= 1e-12 * linalg::max_abs(&a).max(1.0) {
            continue;
        }
        let a = a * (target_radius / rho);
        let b = DMatrix::from_fn(n, p, |_, _| rng.gen_range(-1.0..1.0));
        let c = DMatrix::from_fn(q, n, |_, _| rng.gen_range(-1.0..1.0));
        return StateSpaceModel::new(a, b, c, true);
    }
    Err(Error::DegenerateDraw { attempts })
}
