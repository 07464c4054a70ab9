//! Model evaluation: impulse-response error norms, frequency-response
//! sweeps, Welch cross-spectral transfer estimation, and the side-by-side
//! comparison tables for a family of reduced models.

use nalgebra::{Complex, DMatrix, DVector};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rustfft::FftPlanner;

use crate::error::{Error, Result};
use crate::gramians;
use crate::lti::{self, StateSpaceModel};
use crate::reduction::ReducedModel;
use crate::sampling::OutputProjector;

/// Relative tail level below which an impulse-response horizon counts as
/// converged.
pub const TAIL_TOL: f64 = 1e-8;

/// Time-ordered impulse-response blocks G(k) = C A^k B for k = 0..K.
#[derive(Clone, Debug, PartialEq)]
pub struct ImpulseTrace {
    blocks: Vec<DMatrix<f64>>,
    dt: f64,
}

impl ImpulseTrace {
    pub fn blocks(&self) -> &[DMatrix<f64>] {
        &self.blocks
    }

    /// Step size, for reporting only.
    pub fn dt(&self) -> f64 {
        self.dt
    }

    /// Highest time index K.
    pub fn horizon(&self) -> usize {
        self.blocks.len() - 1
    }

    pub fn block_shape(&self) -> (usize, usize) {
        self.blocks.first().map_or((0, 0), |b| b.shape())
    }

    /// Largest block Frobenius norm along the trace.
    pub fn peak(&self) -> f64 {
        self.blocks.iter().map(|b| b.norm()).fold(0.0, f64::max)
    }

    /// Maps every block through `f` (projection or embedding).
    pub fn map_blocks(&self, f: impl Fn(&DMatrix<f64>) -> DMatrix<f64>) -> ImpulseTrace {
        ImpulseTrace {
            blocks: self.blocks.iter().map(f).collect(),
            dt: self.dt,
        }
    }
}

/// Impulse response G(k) = C A^k B for k = 0..=K, output-projected when a
/// projector is supplied.
pub fn impulse_trace(
    model: &StateSpaceModel,
    k_max: usize,
    projector: Option<&OutputProjector>,
) -> Result<ImpulseTrace> {
    let theta_t = match projector {
        Some(proj) => {
            if proj.output_dim() != model.output_dim() {
                return Err(Error::ProjectorDimensionMismatch {
                    projector_rows: proj.output_dim(),
                    outputs: model.output_dim(),
                });
            }
            Some(proj.theta().transpose())
        }
        None => None,
    };
    let exponents: Vec<usize> = (0..=k_max).collect();
    let seq = lti::markov_at_exponents(model, &exponents, theta_t.as_ref());
    Ok(ImpulseTrace {
        blocks: seq.blocks().to_vec(),
        dt: 1.0,
    })
}

/// Smallest horizon K at which the impulse response has decayed below
/// `TAIL_TOL` of its running peak (capped at 200000 steps).
pub fn decay_horizon(model: &StateSpaceModel, tol: f64) -> Result<usize> {
    model.require_stable()?;
    let cap = 200_000usize;
    let mut norms = Vec::new();
    let mut peak = 0.0f64;
    let mut quiet = 0usize;
    let p = model.input_dim();
    let mut states: Vec<DVector<f64>> = (0..p).map(|ch| model.b().column(ch).into()).collect();
    for _ in 0..cap {
        let mut norm_sq = 0.0;
        for x in &states {
            norm_sq += (model.c() * x).norm_squared();
        }
        let norm = norm_sq.sqrt();
        norms.push(norm);
        peak = peak.max(norm);
        if norm < tol * peak {
            quiet += 1;
            if quiet >= 50 {
                break;
            }
        } else {
            quiet = 0;
        }
        for x in &mut states {
            let next = model.a() * &*x;
            x.copy_from(&next);
        }
    }
    let threshold = tol * peak;
    let last_loud = norms.iter().rposition(|&v| v >= threshold).unwrap_or(0);
    Ok((last_loud + 1).min(norms.len() - 1).max(1))
}

/// Finite-horizon 2-norm of the difference between two impulse responses,
/// with a truncation warning when the reference trace has not decayed below
/// `TAIL_TOL` of its peak by the final step.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct H2Error {
    pub value: f64,
    /// Set when the horizon fails the tail criterion.
    pub truncated: bool,
}

/// sqrt of the summed squared Frobenius block differences.
pub fn h2_error(full: &ImpulseTrace, reduced: &ImpulseTrace) -> Result<H2Error> {
    if full.block_shape() != reduced.block_shape() || full.blocks.len() != reduced.blocks.len() {
        return Err(Error::ShapeMismatch(format!(
            "traces differ: {} blocks of {:?} vs {} blocks of {:?}",
            full.blocks.len(),
            full.block_shape(),
            reduced.blocks.len(),
            reduced.block_shape()
        )));
    }
    let mut sum = 0.0;
    for (g, gr) in full.blocks.iter().zip(&reduced.blocks) {
        sum += (g - gr).norm_squared();
    }
    let peak = full.peak();
    let tail = full.blocks.last().map_or(0.0, |b| b.norm());
    Ok(H2Error {
        value: sum.sqrt(),
        truncated: peak > 0.0 && tail >= TAIL_TOL * peak,
    })
}

/// 2-norm of the part of the full impulse response outside the projector's
/// range: the floor no reduced model of the projected system can beat.
pub fn lower_bound_error(
    full_model: &StateSpaceModel,
    projector: &OutputProjector,
    k_max: Option<usize>,
) -> Result<f64> {
    if projector.output_dim() != full_model.output_dim() {
        return Err(Error::ProjectorDimensionMismatch {
            projector_rows: projector.output_dim(),
            outputs: full_model.output_dim(),
        });
    }
    let k_max = match k_max {
        Some(k) => k,
        None => decay_horizon(full_model, TAIL_TOL)?,
    };
    let trace = impulse_trace(full_model, k_max, None)?;
    let mut sum = 0.0;
    for g in trace.blocks() {
        let residual = g - projector.embed(&projector.project(g));
        sum += residual.norm_squared();
    }
    Ok(sum.sqrt())
}

/// Gain samples of a transfer function over strictly increasing frequencies
/// in (0, pi], radians per step.
#[derive(Clone, Debug, PartialEq)]
pub struct FrequencySweep {
    frequencies: Vec<f64>,
    gains: Vec<f64>,
}

impl FrequencySweep {
    pub fn frequencies(&self) -> &[f64] {
        &self.frequencies
    }

    pub fn gains(&self) -> &[f64] {
        &self.gains
    }

    pub fn len(&self) -> usize {
        self.frequencies.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frequencies.is_empty()
    }
}

fn check_frequencies(frequencies: &[f64]) -> Result<()> {
    if frequencies.is_empty() {
        return Err(Error::InvalidArgument("no frequencies given".into()));
    }
    let ok = frequencies.windows(2).all(|w| w[0] < w[1])
        && frequencies.iter().all(|&w| w > 0.0 && w <= std::f64::consts::PI);
    if !ok {
        return Err(Error::InvalidArgument(
            "frequencies must be strictly increasing in (0, pi]".into(),
        ));
    }
    Ok(())
}

/// Largest singular value of C (e^{iw} I - A)^{-1} B at each frequency, by a
/// direct complex solve.
pub fn frequency_response(model: &StateSpaceModel, frequencies: &[f64]) -> Result<FrequencySweep> {
    check_frequencies(frequencies)?;
    let n = model.state_dim();
    let eigs = model.a().clone().complex_eigenvalues();
    let a_c = model.a().map(|v| Complex::new(v, 0.0));
    let b_c = model.b().map(|v| Complex::new(v, 0.0));
    let c_c = model.c().map(|v| Complex::new(v, 0.0));

    let mut gains = Vec::with_capacity(frequencies.len());
    for &w in frequencies {
        let z = Complex::new(w.cos(), w.sin());
        if eigs.iter().any(|lambda| (lambda - z).norm() < 1e-12) {
            return Err(Error::SingularResolvent { frequency: w });
        }
        let mut resolvent = -a_c.clone();
        for i in 0..n {
            resolvent[(i, i)] += z;
        }
        let lu = resolvent.lu();
        let solved = lu
            .solve(&b_c)
            .ok_or(Error::SingularResolvent { frequency: w })?;
        let tf = &c_c * solved;
        let svd = nalgebra::SVD::try_new(tf, false, false, f64::EPSILON, 10_000)
            .ok_or(Error::NoConvergence { what: "SVD" })?;
        let gain = svd.singular_values.iter().copied().fold(0.0f64, f64::max);
        gains.push(gain);
    }
    Ok(FrequencySweep {
        frequencies: frequencies.to_vec(),
        gains,
    })
}

/// Welch segment length used by `spectral_estimate`.
pub const WELCH_SEGMENT: usize = 1 << 10;

/// Minimum run length accepted by `spectral_estimate`.
pub const MIN_SPECTRAL_SAMPLES: usize = 1 << 14;

/// Transfer-magnitude estimate from a long random-input run: drives every
/// input channel with i.i.d. uniform(-0.5, 0.5) noise, forms Welch-averaged
/// cross spectra over auto spectra (Hann window, 50% overlap, segment 1024),
/// and returns the largest singular value of the estimated transfer matrix
/// per frequency bin.
pub fn spectral_estimate(
    model: &StateSpaceModel,
    run_length: usize,
    seed: u64,
    projector: Option<&OutputProjector>,
) -> Result<FrequencySweep> {
    model.require_stable()?;
    if run_length < MIN_SPECTRAL_SAMPLES {
        return Err(Error::InvalidArgument(format!(
            "run length {run_length} below the minimum {MIN_SPECTRAL_SAMPLES}"
        )));
    }
    let theta_t = match projector {
        Some(proj) => {
            if proj.output_dim() != model.output_dim() {
                return Err(Error::ProjectorDimensionMismatch {
                    projector_rows: proj.output_dim(),
                    outputs: model.output_dim(),
                });
            }
            Some(proj.theta().transpose())
        }
        None => None,
    };

    let n_fft = WELCH_SEGMENT;
    let step = n_fft / 2;
    let p = model.input_dim();
    let q = theta_t.as_ref().map_or(model.output_dim(), |t| t.nrows());
    let n_bins = n_fft / 2;

    let hann: Vec<f64> = (0..n_fft)
        .map(|i| {
            0.5 * (1.0 - (2.0 * std::f64::consts::PI * i as f64 / (n_fft - 1) as f64).cos())
        })
        .collect();

    let mut planner = FftPlanner::new();
    let fft = planner.plan_fft_forward(n_fft);

    // Ring buffers over the last n_fft samples of every channel.
    let mut u_ring = vec![vec![0.0f64; n_fft]; p];
    let mut y_ring = vec![vec![0.0f64; n_fft]; q];
    // Accumulated cross spectra S_{u_j y_i} and auto spectra S_{u_j u_j}.
    let mut cross = vec![vec![Complex::new(0.0, 0.0); p * q]; n_bins];
    let mut auto = vec![vec![0.0f64; p]; n_bins];
    let mut segments = 0u64;

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut x = DVector::zeros(model.state_dim());
    let mut u = DVector::zeros(p);
    let mut spec_u = vec![vec![Complex::new(0.0, 0.0); n_fft]; p];
    let mut spec_y = vec![vec![Complex::new(0.0, 0.0); n_fft]; q];

    for k in 0..run_length {
        for ch in 0..p {
            u[ch] = rng.gen_range(-0.5..0.5);
        }
        let y_full = model.c() * &x;
        let slot = k % n_fft;
        match &theta_t {
            Some(t) => {
                let y_proj = t * &y_full;
                for (i, ring) in y_ring.iter_mut().enumerate() {
                    ring[slot] = y_proj[i];
                }
            }
            None => {
                for (i, ring) in y_ring.iter_mut().enumerate() {
                    ring[slot] = y_full[i];
                }
            }
        }
        for (j, ring) in u_ring.iter_mut().enumerate() {
            ring[slot] = u[j];
        }
        x = model.a() * x + model.b() * &u;

        let filled = k + 1;
        if filled >= n_fft && (filled - n_fft) % step == 0 {
            let start = filled - n_fft;
            for (j, ring) in u_ring.iter().enumerate() {
                for s in 0..n_fft {
                    spec_u[j][s] = Complex::new(ring[(start + s) % n_fft] * hann[s], 0.0);
                }
                fft.process(&mut spec_u[j]);
            }
            for (i, ring) in y_ring.iter().enumerate() {
                for s in 0..n_fft {
                    spec_y[i][s] = Complex::new(ring[(start + s) % n_fft] * hann[s], 0.0);
                }
                fft.process(&mut spec_y[i]);
            }
            for bin in 0..n_bins {
                // Bin b carries frequency 2 pi (b+1) / n_fft.
                let idx = bin + 1;
                for j in 0..p {
                    let uj = spec_u[j][idx];
                    auto[bin][j] += uj.norm_sqr();
                    for i in 0..q {
                        cross[bin][i * p + j] += uj.conj() * spec_y[i][idx];
                    }
                }
            }
            segments += 1;
        }
    }

    if segments == 0 {
        return Err(Error::InvalidArgument(
            "run too short for a single Welch segment".into(),
        ));
    }

    let mut frequencies = Vec::with_capacity(n_bins);
    let mut gains = Vec::with_capacity(n_bins);
    for bin in 0..n_bins {
        let w = 2.0 * std::f64::consts::PI * (bin + 1) as f64 / n_fft as f64;
        let mut tf = DMatrix::from_element(q, p, Complex::new(0.0, 0.0));
        for j in 0..p {
            let denom = auto[bin][j];
            if denom > 0.0 {
                for i in 0..q {
                    tf[(i, j)] = cross[bin][i * p + j] / denom;
                }
            }
        }
        let svd = nalgebra::SVD::try_new(tf, false, false, f64::EPSILON, 10_000)
            .ok_or(Error::NoConvergence { what: "SVD" })?;
        let gain = svd.singular_values.iter().copied().fold(0.0f64, f64::max);
        frequencies.push(w);
        gains.push(gain);
    }
    Ok(FrequencySweep {
        frequencies,
        gains,
    })
}

/// The model with its output map projected onto the retained POD modes.
pub fn project_outputs(
    model: &StateSpaceModel,
    projector: &OutputProjector,
) -> Result<StateSpaceModel> {
    if projector.output_dim() != model.output_dim() {
        return Err(Error::ProjectorDimensionMismatch {
            projector_rows: projector.output_dim(),
            outputs: model.output_dim(),
        });
    }
    StateSpaceModel::new(
        model.a().clone(),
        model.b().clone(),
        projector.theta().transpose() * model.c(),
        false,
    )
}

/// One impulse-error entry of the comparison report.
#[derive(Clone, Debug, PartialEq)]
pub struct ErrorRow {
    pub method: String,
    pub order: usize,
    pub h2: f64,
    pub truncated: bool,
}

/// One Gramian-diagonal entry of the comparison report.
#[derive(Clone, Debug, PartialEq)]
pub struct GramianRow {
    pub method: String,
    pub order: usize,
    pub index: usize,
    pub hsv: f64,
    pub wc: f64,
    pub wo: f64,
}

/// A labelled numeric table (first column is the independent variable).
#[derive(Clone, Debug, PartialEq)]
pub struct LabelledTable {
    pub labels: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl LabelledTable {
    /// CSV rendering with a header row.
    pub fn to_csv(&self) -> String {
        let mut out = self.labels.join(",");
        out.push('\n');
        for row in &self.rows {
            let line: Vec<String> = row.iter().map(|v| format!("{v:.12e}")).collect();
            out.push_str(&line.join(","));
            out.push('\n');
        }
        out
    }
}

/// All comparison tables for a family of reduced models of one plant.
#[derive(Clone, Debug, PartialEq)]
pub struct ComparisonReport {
    /// Impulse-error 2-norms per (method, order).
    pub errors: Vec<ErrorRow>,
    /// Projection floor, when an output projector is in play.
    pub lower_bound: Option<f64>,
    /// Gramian diagonals of every stable reduced model.
    pub gramians: Vec<GramianRow>,
    /// First projected output coordinate over time, full system and models.
    pub traces: LabelledTable,
    /// Max-singular-value sweeps, full (projected) system and stable models.
    pub sigma: LabelledTable,
}

impl ComparisonReport {
    /// The error table in CSV form (method, order, h2, truncated).
    pub fn errors_csv(&self) -> String {
        let mut out = String::from("method,order,h2_error,truncated\n");
        for row in &self.errors {
            out.push_str(&format!(
                "{},{},{:.12e},{}\n",
                row.method, row.order, row.h2, row.truncated
            ));
        }
        if let Some(lb) = self.lower_bound {
            out.push_str(&format!("lower-bound,0,{lb:.12e},false\n"));
        }
        out
    }

    /// The Gramian-diagonal table in CSV form.
    pub fn gramians_csv(&self) -> String {
        let mut out = String::from("method,order,index,hsv,wc_diag,wo_diag\n");
        for row in &self.gramians {
            out.push_str(&format!(
                "{},{},{},{:.12e},{:.12e},{:.12e}\n",
                row.method, row.order, row.index, row.hsv, row.wc, row.wo
            ));
        }
        out
    }
}

fn model_label(rom: &ReducedModel) -> String {
    format!("{}_r{}", rom.method().name(), rom.order())
}

/// Builds the full comparison: impulse-error norms per model, Gramian
/// diagonals, output-coordinate time traces, and frequency sweeps. Reduced
/// models must share the projector the report is built around. Models whose
/// reduced dynamics are unstable still contribute error rows, but are left
/// out of the Gramian and frequency tables, which require stable simulation.
pub fn compare_models(
    full_model: &StateSpaceModel,
    models: &[ReducedModel],
    projector: Option<&OutputProjector>,
    frequencies: &[f64],
) -> Result<ComparisonReport> {
    check_frequencies(frequencies)?;
    let k_max = decay_horizon(full_model, TAIL_TOL)?;
    let full_trace = impulse_trace(full_model, k_max, None)?;

    let mut errors = Vec::new();
    let mut gramian_rows = Vec::new();
    let mut trace_labels = vec!["step".to_string(), "full".to_string()];
    let mut trace_cols: Vec<Vec<f64>> = Vec::new();
    let mut sigma_labels = vec!["omega".to_string(), "full".to_string()];
    let mut sigma_cols: Vec<Vec<f64>> = Vec::new();

    // Reference trace of the first projected output coordinate.
    let full_projected_trace = match projector {
        Some(proj) => full_trace.map_blocks(|g| proj.project(g)),
        None => full_trace.clone(),
    };
    let full_a1: Vec<f64> = full_projected_trace
        .blocks()
        .iter()
        .map(|g| g[(0, 0)])
        .collect();

    let full_sigma = match projector {
        Some(proj) => frequency_response(&project_outputs(full_model, proj)?, frequencies)?,
        None => frequency_response(full_model, frequencies)?,
    };

    for rom in models {
        let reduced = rom.to_model()?;
        let label = model_label(rom);

        let reduced_trace = impulse_trace(&reduced, k_max, None)?;
        let embedded = match (projector, reduced.output_dim() == full_model.output_dim()) {
            (Some(proj), false) => {
                if reduced.output_dim() != proj.mode_count() {
                    return Err(Error::ShapeMismatch(format!(
                        "model {label} has {} outputs, expected {} projected modes",
                        reduced.output_dim(),
                        proj.mode_count()
                    )));
                }
                reduced_trace.map_blocks(|g| proj.embed(g))
            }
            (None, false) => {
                return Err(Error::ShapeMismatch(format!(
                    "model {label} output dimension differs and no projector is attached"
                )));
            }
            (_, true) => reduced_trace.clone(),
        };
        let err = h2_error(&full_trace, &embedded)?;
        errors.push(ErrorRow {
            method: rom.method().name().to_string(),
            order: rom.order(),
            h2: err.value,
            truncated: err.truncated,
        });

        trace_labels.push(label.clone());
        trace_cols.push(reduced_trace.blocks().iter().map(|g| g[(0, 0)]).collect());

        if reduced.is_stable() {
            if let Ok(rows) = gramians::gramian_diagonals_report(rom) {
                for row in rows {
                    gramian_rows.push(GramianRow {
                        method: rom.method().name().to_string(),
                        order: rom.order(),
                        index: row.index,
                        hsv: row.hsv,
                        wc: row.wc_diag,
                        wo: row.wo_diag,
                    });
                }
            }
            sigma_labels.push(label);
            sigma_cols.push(frequency_response(&reduced, frequencies)?.gains);
        }
    }

    let lower_bound = match projector {
        Some(proj) => Some(lower_bound_error(full_model, proj, Some(k_max))?),
        None => None,
    };

    let mut trace_rows = Vec::with_capacity(k_max + 1);
    for k in 0..=k_max {
        let mut row = vec![k as f64, full_a1[k]];
        for col in &trace_cols {
            row.push(col[k]);
        }
        trace_rows.push(row);
    }
    let mut sigma_rows = Vec::with_capacity(frequencies.len());
    for (i, &w) in frequencies.iter().enumerate() {
        let mut row = vec![w, full_sigma.gains()[i]];
        for col in &sigma_cols {
            row.push(col[i]);
        }
        sigma_rows.push(row);
    }

    Ok(ComparisonReport {
        errors,
        lower_bound,
        gramians: gramian_rows,
        traces: LabelledTable {
            labels: trace_labels,
            rows: trace_rows,
        },
        sigma: LabelledTable {
            labels: sigma_labels,
            rows: sigma_rows,
        },
    })
}

/// Log-spaced frequency grid over (0, pi]. The endpoint is pinned to pi
/// exactly so rounding cannot push it outside the admissible interval.
pub fn log_frequency_grid(count: usize, w_min: f64) -> Vec<f64> {
    assert!(count >= 2 && w_min > 0.0 && w_min < std::f64::consts::PI);
    let w_max = std::f64::consts::PI;
    let lo = w_min.ln();
    let hi = w_max.ln();
    let mut grid: Vec<f64> = (0..count)
        .map(|i| (lo + (hi - lo) * i as f64 / (count - 1) as f64).exp())
        .collect();
    grid[count - 1] = w_max;
    grid
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lti::make_system;
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

    fn zero_system() -> StateSpaceModel {
        make_system(
            DMatrix::from_element(1, 1, 0.0),
            DMatrix::from_element(1, 1, 0.0),
            DMatrix::from_element(1, 1, 0.0),
            true,
        )
        .unwrap()
    }

    #[test]
    fn impulse_trace_scalar() {
        let trace = impulse_trace(&scalar_system(), 3, None).unwrap();
        let values: Vec<f64> = trace.blocks().iter().map(|b| b[(0, 0)]).collect();
        assert_eq!(values, vec![1.0, 0.5, 0.25, 0.125]);
    }

    #[test]
    fn impulse_trace_s2_recursion() {
        let trace = impulse_trace(&s2_system(), 3, None).unwrap();
        let values: Vec<f64> = trace.blocks().iter().map(|b| b[(0, 0)]).collect();
        assert_eq!(values, vec![0.0, 1.0, 1.1, 0.91]);
    }

    #[test]
    fn h2_identical_traces() {
        let t = impulse_trace(&scalar_system(), 40, None).unwrap();
        let err = h2_error(&t, &t).unwrap();
        assert_eq!(err.value, 0.0);
        assert!(!err.truncated);
    }

    #[test]
    fn h2_scalar_vs_zero_model() {
        let k = decay_horizon(&scalar_system(), TAIL_TOL).unwrap();
        let full = impulse_trace(&scalar_system(), k, None).unwrap();
        let zero = impulse_trace(&zero_system(), k, None).unwrap();
        let err = h2_error(&full, &zero).unwrap();
        assert_relative_eq!(err.value, (4.0f64 / 3.0).sqrt(), max_relative = 1e-12);
    }

    #[test]
    fn h2_shape_mismatch() {
        let a = impulse_trace(&scalar_system(), 5, None).unwrap();
        let b = impulse_trace(&scalar_system(), 6, None).unwrap();
        assert!(matches!(
            h2_error(&a, &b).unwrap_err(),
            Error::ShapeMismatch(_)
        ));
    }

    #[test]
    fn h2_truncation_warning() {
        let full = impulse_trace(&scalar_system(), 3, None).unwrap();
        let zero = impulse_trace(&zero_system(), 3, None).unwrap();
        assert!(h2_error(&full, &zero).unwrap().truncated);
    }

    #[test]
    fn frequency_response_scalar_limits() {
        let m = scalar_system();
        let sweep = frequency_response(&m, &[1e-9, std::f64::consts::PI]).unwrap();
        assert_relative_eq!(sweep.gains()[0], 2.0, max_relative = 1e-6);
        assert_relative_eq!(sweep.gains()[1], 2.0 / 3.0, max_relative = 1e-12);
    }

    #[test]
    fn frequency_grid_validated() {
        let m = scalar_system();
        assert!(frequency_response(&m, &[0.0, 1.0]).is_err());
        assert!(frequency_response(&m, &[2.0, 1.0]).is_err());
        assert!(frequency_response(&m, &[4.0]).is_err());
    }

    #[test]
    fn lower_bound_zero_for_full_span() {
        let m = s2_system();
        // q = 1: a single mode spans the whole output space.
        let seq = crate::sampling::collect_markov_pairs(&m, 6, 6, 1, None).unwrap();
        let proj = crate::sampling::fit_output_projector_from_markov(&seq, 1).unwrap();
        let lb = lower_bound_error(&m, &proj, None).unwrap();
        assert!(lb < 1e-12);
    }

    #[test]
    fn zero_model_spectral_estimate_is_silent() {
        let m = make_system(
            DMatrix::from_element(1, 1, 0.5),
            DMatrix::from_element(1, 1, 1.0),
            DMatrix::from_element(1, 1, 0.0),
            true,
        )
        .unwrap();
        let sweep = spectral_estimate(&m, 1 << 14, 7, None).unwrap();
        assert!(sweep.gains().iter().all(|&g| g <= 1e-3));
    }

    #[test]
    fn spectral_estimate_rejects_short_runs() {
        let m = scalar_system();
        assert!(spectral_estimate(&m, 1000, 7, None).is_err());
    }

    #[test]
    fn log_grid_spans_range() {
        let grid = log_frequency_grid(50, 1e-3);
        assert_eq!(grid.len(), 50);
        assert!(grid.windows(2).all(|w| w[0] < w[1]));
        assert_relative_eq!(grid[0], 1e-3, max_relative = 1e-12);
        assert_relative_eq!(grid[49], std::f64::consts::PI, max_relative = 1e-12);
    }
}
