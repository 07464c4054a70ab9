//! Built-in 2-D convection-diffusion test plant.
//!
//! Explicit finite-difference update on an nx x ny grid with homogeneous
//! Dirichlet boundary: first-order upwind convection, second-order central
//! diffusion, forward Euler in time. The input is a single Gaussian body
//! force and the output is the full state, which makes output projection
//! meaningful at desk scale.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lti::StateSpaceModel;

/// Grid, transport, forcing, and time-step parameters of the built-in plant.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PlantConfig {
    /// Grid width (number of interior points in x).
    pub nx: usize,
    /// Grid height (number of interior points in y).
    pub ny: usize,
    /// Diffusion coefficient, grid units^2 per step.
    pub nu: f64,
    /// Convection velocity in x, grid units per step.
    pub cx: f64,
    /// Convection velocity in y, grid units per step.
    pub cy: f64,
    /// Forcing center, x grid coordinate.
    pub fx: f64,
    /// Forcing center, y grid coordinate.
    pub fy: f64,
    /// Gaussian forcing width in grid units.
    pub width: f64,
    /// Time step.
    pub dt: f64,
}

impl Default for PlantConfig {
    fn default() -> Self {
        Self {
            nx: 16,
            ny: 16,
            nu: 0.2,
            cx: 0.3,
            cy: 0.0,
            fx: 3.0,
            fy: 7.5,
            width: 1.5,
            // Forward Euler needs dt (4 nu + |cx| + |cy|) comfortably below 2.
            dt: 0.5,
        }
    }
}

/// Builds the plant model: A is the explicit update operator, B the Gaussian
/// forcing column, C the identity (full-state output). Errors with
/// `UnstableSystem` when the resulting operator has spectral radius >= 1.
pub fn build_plant(config: &PlantConfig) -> Result<StateSpaceModel> {
    if config.nx == 0 || config.ny == 0 {
        return Err(Error::InvalidArgument("grid sizes must be positive".into()));
    }
    if config.nu < 0.0 || config.width <= 0.0 || config.dt <= 0.0 {
        return Err(Error::InvalidArgument(
            "nu must be nonnegative, width and dt positive".into(),
        ));
    }
    let (nx, ny) = (config.nx, config.ny);
    let n = nx * ny;
    let dt = config.dt;
    let (nu, cx, cy) = (config.nu, config.cx, config.cy);

    let idx = |i: usize, j: usize| j * nx + i;
    let mut a = DMatrix::zeros(n, n);
    for j in 0..ny {
        for i in 0..nx {
            let k = idx(i, j);
            a[(k, k)] = 1.0 - dt * (4.0 * nu + cx.abs() + cy.abs());
            // Neighbors outside the grid carry the Dirichlet value 0 and drop out.
            if i > 0 {
                a[(k, idx(i - 1, j))] = dt * (nu + cx.max(0.0));
            }
            if i + 1 < nx {
                a[(k, idx(i + 1, j))] = dt * (nu + (-cx).max(0.0));
            }
            if j > 0 {
                a[(k, idx(i, j - 1))] = dt * (nu + cy.max(0.0));
            }
            if j + 1 < ny {
                a[(k, idx(i, j + 1))] = dt * (nu + (-cy).max(0.0));
            }
        }
    }

    let two_w2 = 2.0 * config.width * config.width;
    let b = DMatrix::from_fn(n, 1, |k, _| {
        let i = (k % nx) as f64;
        let j = (k / nx) as f64;
        let d2 = (i - config.fx).powi(2) + (j - config.fy).powi(2);
        (-d2 / two_w2).exp()
    });
    let c = DMatrix::identity(n, n);

    StateSpaceModel::new(a, b, c, true)
}
