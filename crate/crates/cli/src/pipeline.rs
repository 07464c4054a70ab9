//! Experiment orchestration shared by the subcommands: builds the plant,
//! collects data once, and derives reduced models, reports, and artifacts.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use balred::dmat;
use balred::error::{Error, Result};
use balred::eval::{self, log_frequency_grid};
use balred::gramians::{
    build_full_transformation, empirical_gramians, exact_balanced_truncation_sampled,
    perturb_adjoint, transformed_gramians, BlockDiagnostics,
};
use balred::hankel::{hankel_from_markov, hankel_from_snapshots, HankelPair};
use balred::lti::{make_system, StateSpaceModel};
use balred::plant::{build_plant, PlantConfig};
use balred::reduction::{
    bpod_modes, bpod_reduce, era_reduce, fit_pseudo_modes, pod_reduce, pseudo_reduce,
    select_order, svd_truncate, HankelSvd, ModeSet, ReducedModel, ReductionMethod,
    DEFAULT_RANK_TOL, PSEUDO_MODE_CAP,
};
use balred::sampling::{
    collect_adjoint_from, collect_markov_pairs, collect_primal, default_sampling,
    fit_output_projector, output_snapshot_matrix, OutputProjector, SnapshotMatrix,
};
use nalgebra::DMatrix;

use crate::config::{ExperimentConfig, PlantSource};

fn builtin_model(name: &str, plant_config: &Option<PlantConfig>) -> Result<StateSpaceModel> {
    match name {
        "scalar" => make_system(
            DMatrix::from_element(1, 1, 0.5),
            DMatrix::from_element(1, 1, 1.0),
            DMatrix::from_element(1, 1, 1.0),
            true,
        ),
        "s2" => make_system(
            DMatrix::from_row_slice(2, 2, &[0.5, 1.0, 0.0, 0.6]),
            DMatrix::from_row_slice(2, 1, &[0.0, 1.0]),
            DMatrix::from_row_slice(1, 2, &[1.0, 0.0]),
            true,
        ),
        "plant" => build_plant(&plant_config.clone().unwrap_or_default()),
        other => Err(Error::InvalidArgument(format!("unknown builtin '{other}'"))),
    }
}

/// Everything the subcommands need, computed once per run.
pub struct Workspace {
    pub model: StateSpaceModel,
    pub m_c: usize,
    pub m_o: usize,
    pub period: usize,
    pub projector: Option<OutputProjector>,
    pub era_pair: HankelPair,
    pub svd_era: HankelSvd,
    pub x: SnapshotMatrix,
    pub bpod: Option<BpodData>,
    pub methods: Vec<ReductionMethod>,
    pub orders: Vec<usize>,
}

pub struct BpodData {
    pub y: SnapshotMatrix,
    pub pair: HankelPair,
    pub svd: HankelSvd,
}

pub fn build_workspace(config: &ExperimentConfig) -> Result<Workspace> {
    let methods = config
        .validate()
        .map_err(Error::InvalidArgument)?;

    let model = match &config.plant {
        PlantSource::Builtin { name, plant_config } => builtin_model(name, plant_config)?,
        PlantSource::Dmat { a, b, c } => make_system(
            dmat::read_dmat(a)?,
            dmat::read_dmat(b)?,
            dmat::read_dmat(c)?,
            true,
        )?,
    };

    let (default_m, _, default_p) = default_sampling(&model)?;
    let period = config.sampling.period.unwrap_or(default_p);
    let default_m_for_period = (default_m * default_p).div_ceil(period).max(1);
    let m_c = config.sampling.m_c.unwrap_or(default_m_for_period);
    let m_o = config.sampling.m_o.unwrap_or(default_m_for_period);

    let raw = collect_markov_pairs(&model, m_c, m_o, period, None)?;
    let projector = match config.projection {
        Some(m_out) => Some(fit_output_projector(&output_snapshot_matrix(&raw), m_out)?),
        None => None,
    };
    let seq = match &projector {
        Some(proj) => raw.projected(proj)?,
        None => raw,
    };
    let era_pair = hankel_from_markov(&seq, m_c, m_o, period)?;
    let svd_era = svd_truncate(era_pair.h(), None, DEFAULT_RANK_TOL)?;

    let x = collect_primal(&model, m_c, period)?;
    let needs_bpod = methods.contains(&ReductionMethod::Bpod);
    let bpod = if needs_bpod {
        let adjoint = perturb_adjoint(&model, config.adjoint_eps)?;
        let y = collect_adjoint_from(&adjoint, m_o, period, projector.as_ref())?;
        let pair = hankel_from_snapshots(&x, &y, &model)?;
        let svd = svd_truncate(pair.h(), None, DEFAULT_RANK_TOL)?;
        Some(BpodData { y, pair, svd })
    } else {
        None
    };

    let orders = if config.orders.is_empty() {
        let mut r = select_order(svd_era.sigma(), None);
        if let Some(data) = &bpod {
            r = r.min(data.svd.retained());
        }
        vec![r.max(1)]
    } else {
        config.orders.clone()
    };

    Ok(Workspace {
        model,
        m_c,
        m_o,
        period,
        projector,
        era_pair,
        svd_era,
        x,
        bpod,
        methods,
        orders,
    })
}

impl Workspace {
    /// One reduced model per requested (method, order).
    pub fn reduced_models(&self) -> Result<Vec<ReducedModel>> {
        let proj = self.projector.as_ref();
        let mut pseudo_modes: Option<ModeSet> = None;
        let mut models = Vec::new();
        for &method in &self.methods {
            for &r in &self.orders {
                let rom = match method {
                    ReductionMethod::Era => era_reduce(&self.era_pair, &self.svd_era, r, proj)?,
                    ReductionMethod::Bpod => {
                        let data = self.bpod.as_ref().expect("bpod data present");
                        let modes = bpod_modes(&self.x, &data.y, &data.svd, r)?;
                        bpod_reduce(&self.model, &modes, proj)?
                    }
                    ReductionMethod::Pseudo => {
                        if pseudo_modes.is_none() {
                            pseudo_modes =
                                Some(fit_pseudo_modes(&self.x, &self.svd_era, PSEUDO_MODE_CAP)?);
                        }
                        let modes = pseudo_modes.as_ref().unwrap().truncated(r)?;
                        pseudo_reduce(&self.model, &modes, proj)?
                    }
                    ReductionMethod::Pod => pod_reduce(&self.x, &self.model, r, proj)?,
                    ReductionMethod::BtOracle => {
                        let target = match proj {
                            Some(p) => eval::project_outputs(&self.model, p)?,
                            None => self.model.clone(),
                        };
                        exact_balanced_truncation_sampled(&target, self.period, r)?
                    }
                };
                models.push(rom);
            }
        }
        Ok(models)
    }

    /// Transformed-Gramian diagnostics for a mode flavor, backing off the
    /// mode count until the completion is well conditioned.
    fn diagnostics_for(&self, pseudo: bool) -> Result<Option<BlockDiagnostics>> {
        let data = match &self.bpod {
            Some(data) => data,
            None => return Ok(None),
        };
        let grams = empirical_gramians(&self.x, &data.y)?;
        let mut r1 = data.svd.retained();
        while r1 > 0 {
            let true_modes = match bpod_modes(&self.x, &data.y, &data.svd, r1) {
                Ok(modes) => modes,
                Err(_) => {
                    r1 -= 1;
                    continue;
                }
            };
            let modes = if pseudo {
                match fit_pseudo_modes(&self.x, &data.svd, r1) {
                    Ok(m) => m,
                    Err(_) => {
                        r1 -= 1;
                        continue;
                    }
                }
            } else {
                true_modes.clone()
            };
            let r_used = modes.order();
            let sigma: Vec<f64> = data.svd.sigma().iter().take(r_used).copied().collect();
            let trans = match build_full_transformation(modes.phi(), modes.psi()) {
                Ok(t) => t,
                Err(_) => {
                    r1 -= 1;
                    continue;
                }
            };
            let psi_true = if pseudo && r_used <= true_modes.order() {
                Some(true_modes.phi().columns(0, 0).clone_owned())
            } else {
                None
            };
            let _ = psi_true;
            let psi_ref = if pseudo {
                match bpod_modes(&self.x, &data.y, &data.svd, r_used) {
                    Ok(m) => Some(m.psi().clone()),
                    Err(_) => None,
                }
            } else {
                None
            };
            return transformed_gramians(&trans, &grams, &sigma, psi_ref.as_ref()).map(Some);
        }
        Ok(None)
    }
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text)?;
    Ok(())
}

fn model_prefix(rom: &ReducedModel) -> String {
    format!("{}_r{}", rom.method().name(), rom.order())
}

/// Manifest of one run: the configuration hash plus the artifact paths,
/// written with stable ordering.
fn write_manifest(
    out: &Path,
    config: &ExperimentConfig,
    artifacts: &[PathBuf],
) -> Result<PathBuf> {
    let mut files: Vec<String> = artifacts
        .iter()
        .map(|p| {
            p.strip_prefix(out)
                .unwrap_or(p)
                .to_string_lossy()
                .into_owned()
        })
        .collect();
    files.sort();
    let manifest = serde_json::json!({
        "config_hash": config.hash(),
        "config": config,
        "artifacts": files,
    });
    let path = out.join("manifest.json");
    write_text(&path, &serde_json::to_string_pretty(&manifest)?)?;
    Ok(path)
}

/// `reduce`: writes reduced-model files, the singular-value table, the
/// assembly counters, and the manifest.
pub fn cmd_reduce(config: &ExperimentConfig, out: &Path) -> Result<()> {
    fs::create_dir_all(out)?;
    let ws = build_workspace(config)?;
    let mut artifacts = Vec::new();

    for rom in ws.reduced_models()? {
        let prefix = out.join(model_prefix(&rom));
        dmat::save_reduced_model(&prefix, &rom)?;
        for suffix in ["_A.dmat", "_B.dmat", "_C.dmat"] {
            artifacts.push(out.join(format!("{}{}", model_prefix(&rom), suffix)));
        }
        artifacts.push(prefix.with_extension("json"));
    }

    let mut hsv = String::from("index,sigma\n");
    for (i, s) in ws.svd_era.sigma().iter().enumerate() {
        hsv.push_str(&format!("{},{:.12e}\n", i + 1, s));
    }
    let hsv_path = out.join("hsv.csv");
    write_text(&hsv_path, &hsv)?;
    artifacts.push(hsv_path);

    let mut counters = BTreeMap::new();
    counters.insert("era_h_blocks".to_string(), ws.era_pair.h_block_products());
    if let Some(data) = &ws.bpod {
        counters.insert("bpod_h_blocks".to_string(), data.pair.h_block_products());
    }
    let counters_path = out.join("counters.json");
    write_text(&counters_path, &serde_json::to_string_pretty(&counters)?)?;
    artifacts.push(counters_path);

    write_manifest(out, config, &artifacts)?;
    Ok(())
}

/// `compare`: emits the comparison tables (impulse errors per order, Gramian
/// diagonals, output traces, gain sweeps), the route-difference table, and
/// the transformed-Gramian magnitude dumps.
pub fn cmd_compare(config: &ExperimentConfig, out: &Path) -> Result<()> {
    fs::create_dir_all(out)?;
    let ws = build_workspace(config)?;
    let models = ws.reduced_models()?;
    let freqs = log_frequency_grid(100, 1e-3);
    let report = eval::compare_models(&ws.model, &models, ws.projector.as_ref(), &freqs)?;

    let mut artifacts = Vec::new();
    for (name, text) in [
        ("error_vs_order.csv", report.errors_csv()),
        ("gramian_diagonals.csv", report.gramians_csv()),
        ("traces.csv", report.traces.to_csv()),
        ("sigma_sweep.csv", report.sigma.to_csv()),
    ] {
        let path = out.join(name);
        write_text(&path, &text)?;
        artifacts.push(path);
    }

    // Max entry difference between the two balanced routes per order.
    let era_models: Vec<&ReducedModel> = models
        .iter()
        .filter(|m| m.method() == ReductionMethod::Era)
        .collect();
    let bpod_models: Vec<&ReducedModel> = models
        .iter()
        .filter(|m| m.method() == ReductionMethod::Bpod)
        .collect();
    if !era_models.is_empty() && !bpod_models.is_empty() {
        let mut delta = String::from("order,max_entry_diff\n");
        for era in &era_models {
            if let Some(bpod) = bpod_models.iter().find(|b| b.order() == era.order()) {
                let diff = max_entry_diff(era, bpod);
                delta.push_str(&format!("{},{:.12e}\n", era.order(), diff));
            }
        }
        let path = out.join("era_bpod_delta.csv");
        write_text(&path, &delta)?;
        artifacts.push(path);
    }

    for (pseudo, tag) in [(false, "true_adjoint"), (true, "pseudo_adjoint")] {
        if let Some(diag) = ws.diagnostics_for(pseudo)? {
            for (name, matrix) in [
                ("wc", diag.wc_t()),
                ("wo", diag.wo_t()),
                ("product", diag.product_t()),
            ] {
                let path = out.join(format!("gramian_{tag}_{name}_abs.csv"));
                write_text(&path, &dmat::abs_csv(matrix))?;
                artifacts.push(path);
            }
        }
    }

    write_manifest(out, config, &artifacts)?;
    Ok(())
}

fn max_entry_diff(a: &ReducedModel, b: &ReducedModel) -> f64 {
    let diff = |x: &DMatrix<f64>, y: &DMatrix<f64>| -> f64 {
        (x - y).iter().fold(0.0f64, |acc, &v| acc.max(v.abs()))
    };
    diff(a.a_r(), b.a_r())
        .max(diff(a.b_r(), b.b_r()))
        .max(diff(a.c_r(), b.c_r()))
}

/// `counters`: assembles both Hankel routes and reports the block
/// inner-product counts and their ratio as JSON on stdout (and on disk when
/// an output directory is given).
pub fn cmd_counters(config: &ExperimentConfig, out: Option<&Path>) -> Result<String> {
    let mut config = config.clone();
    if !config.methods.contains(&"bpod".to_string()) {
        config.methods.push("bpod".to_string());
    }
    let ws = build_workspace(&config)?;
    let data = ws.bpod.as_ref().expect("bpod route requested");
    let bpod_blocks = data.pair.h_block_products();
    let era_blocks = ws.era_pair.h_block_products();
    let json = serde_json::json!({
        "m_c": ws.m_c,
        "m_o": ws.m_o,
        "period": ws.period,
        "bpod_h_blocks": bpod_blocks,
        "era_h_blocks": era_blocks,
        "ratio": bpod_blocks as f64 / era_blocks as f64,
    });
    let text = serde_json::to_string_pretty(&json)?;
    if let Some(dir) = out {
        fs::create_dir_all(dir)?;
        write_text(&dir.join("counters.json"), &text)?;
    }
    Ok(text)
}
