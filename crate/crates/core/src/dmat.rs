//! Plain-text matrix files ("DMAT") and the JSON sidecars that carry the
//! metadata of snapshot, Markov, Hankel, and reduced-model artifacts.
//!
//! A DMAT file is `dmat <rows> <cols>` on the first line followed by one
//! row per line, entries separated by single spaces and printed with 17
//! significant digits, which round-trips every finite double bit-exactly.

use std::fs;
use std::path::{Path, PathBuf};

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hankel::{HankelPair, HankelSource};
use crate::reduction::{ReducedModel, ReductionMethod};
use crate::sampling::{MarkovSequence, OutputProjector, SnapshotKind, SnapshotMatrix};

/// Serializes a matrix in DMAT form.
pub fn format_dmat(m: &DMatrix<f64>) -> Result<String> {
    if m.iter().any(|v| !v.is_finite()) {
        return Err(Error::Format("matrix contains non-finite entries".into()));
    }
    let mut out = format!("dmat {} {}\n", m.nrows(), m.ncols());
    for i in 0..m.nrows() {
        for j in 0..m.ncols() {
            if j > 0 {
                out.push(' ');
            }
            out.push_str(&format!("{:.16e}", m[(i, j)]));
        }
        out.push('\n');
    }
    Ok(out)
}

/// Parses DMAT text back into a matrix.
pub fn parse_dmat(text: &str) -> Result<DMatrix<f64>> {
    let mut lines = text.lines();
    let header = lines.next().ok_or_else(|| Error::Format("empty file".into()))?;
    let mut parts = header.split_whitespace();
    if parts.next() != Some("dmat") {
        return Err(Error::Format("missing 'dmat' header".into()));
    }
    let rows: usize = parts
        .next()
        .and_then(|s| s.parse().ok())
        .ok_or_else(|| Error::Format("bad row count".into()))?;
    let cols: usize = parts
        .next()
        .and_then(|s| s.parse().ok())
        .ok_or_else(|| Error::Format("bad column count".into()))?;
    let mut data = Vec::with_capacity(rows * cols);
    for (i, line) in lines.take(rows).enumerate() {
        let values: std::result::Result<Vec<f64>, _> =
            line.split_whitespace().map(str::parse::<f64>).collect();
        let values = values.map_err(|e| Error::Format(format!("row {i}: {e}")))?;
        if values.len() != cols {
            return Err(Error::Format(format!(
                "row {i} has {} entries, expected {cols}",
                values.len()
            )));
        }
        data.extend(values);
    }
    if data.len() != rows * cols {
        return Err(Error::Format(format!(
            "expected {rows} rows, found {}",
            data.len() / cols.max(1)
        )));
    }
    Ok(DMatrix::from_row_slice(rows, cols, &data))
}

pub fn write_dmat(path: &Path, m: &DMatrix<f64>) -> Result<()> {
    fs::write(path, format_dmat(m)?)?;
    Ok(())
}

pub fn read_dmat(path: &Path) -> Result<DMatrix<f64>> {
    parse_dmat(&fs::read_to_string(path)?)
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    fs::write(path, serde_json::to_string_pretty(value)?)?;
    Ok(())
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    Ok(serde_json::from_str(&fs::read_to_string(path)?)?)
}

#[derive(Serialize, Deserialize)]
struct SnapshotSidecar {
    kind: String,
    sampling_period: usize,
    block_width: usize,
}

/// Writes `<prefix>.dmat` and `<prefix>.json` for a snapshot matrix.
pub fn save_snapshots(prefix: &Path, snapshots: &SnapshotMatrix) -> Result<()> {
    write_dmat(&prefix.with_extension("dmat"), snapshots.data())?;
    write_json(
        &prefix.with_extension("json"),
        &SnapshotSidecar {
            kind: match snapshots.kind() {
                SnapshotKind::Primal => "primal".into(),
                SnapshotKind::Adjoint => "adjoint".into(),
            },
            sampling_period: snapshots.sampling_period(),
            block_width: snapshots.block_width(),
        },
    )
}

pub fn load_snapshots(prefix: &Path) -> Result<SnapshotMatrix> {
    let data = read_dmat(&prefix.with_extension("dmat"))?;
    let sidecar: SnapshotSidecar = read_json(&prefix.with_extension("json"))?;
    let kind = match sidecar.kind.as_str() {
        "primal" => SnapshotKind::Primal,
        "adjoint" => SnapshotKind::Adjoint,
        other => return Err(Error::Format(format!("unknown snapshot kind '{other}'"))),
    };
    SnapshotMatrix::new(data, sidecar.block_width, sidecar.sampling_period, kind)
}

#[derive(Serialize, Deserialize)]
struct MarkovSidecar {
    indices: Vec<usize>,
    block_width: usize,
}

/// Writes a Markov sequence as one column-stacked DMAT plus its exponents.
pub fn save_markov(prefix: &Path, seq: &MarkovSequence) -> Result<()> {
    let (q, p) = seq.block_shape();
    let mut stacked = DMatrix::zeros(q, p * seq.blocks().len());
    for (j, block) in seq.blocks().iter().enumerate() {
        stacked.columns_mut(j * p, p).copy_from(block);
    }
    write_dmat(&prefix.with_extension("dmat"), &stacked)?;
    write_json(
        &prefix.with_extension("json"),
        &MarkovSidecar {
            indices: seq.indices().to_vec(),
            block_width: p,
        },
    )
}

pub fn load_markov(prefix: &Path) -> Result<MarkovSequence> {
    let stacked = read_dmat(&prefix.with_extension("dmat"))?;
    let sidecar: MarkovSidecar = read_json(&prefix.with_extension("json"))?;
    let p = sidecar.block_width;
    if p == 0 || stacked.ncols() != p * sidecar.indices.len() {
        return Err(Error::Format(
            "markov block count does not match the index list".into(),
        ));
    }
    let blocks: Vec<DMatrix<f64>> = (0..sidecar.indices.len())
        .map(|j| stacked.columns(j * p, p).clone_owned())
        .collect();
    MarkovSequence::new(blocks, sidecar.indices)
}

#[derive(Serialize, Deserialize)]
struct HankelSidecar {
    source: String,
    block_rows: usize,
    block_cols: usize,
    block_shape: (usize, usize),
    h_block_products: u64,
    h_prime_block_products: u64,
}

/// Writes `<prefix>_H.dmat`, `<prefix>_Hprime.dmat`, and `<prefix>.json`.
pub fn save_hankel(prefix: &Path, pair: &HankelPair) -> Result<()> {
    write_dmat(&suffixed(prefix, "_H.dmat"), pair.h())?;
    write_dmat(&suffixed(prefix, "_Hprime.dmat"), pair.h_prime())?;
    write_json(
        &prefix.with_extension("json"),
        &HankelSidecar {
            source: match pair.source() {
                HankelSource::Bpod => "bpod".into(),
                HankelSource::Era => "era".into(),
            },
            block_rows: pair.block_rows(),
            block_cols: pair.block_cols(),
            block_shape: pair.block_shape(),
            h_block_products: pair.h_block_products(),
            h_prime_block_products: pair.h_prime_block_products(),
        },
    )
}

#[derive(Serialize, Deserialize)]
struct ReducedSidecar {
    method: String,
    r: usize,
    hsv: Vec<f64>,
    projector_id: Option<String>,
    projector_energies: Option<Vec<f64>>,
}

fn suffixed(prefix: &Path, suffix: &str) -> PathBuf {
    let mut name = prefix.file_name().map(|s| s.to_os_string()).unwrap_or_default();
    name.push(suffix);
    prefix.with_file_name(name)
}

/// Writes the reduced triple as `<prefix>_A.dmat`, `<prefix>_B.dmat`,
/// `<prefix>_C.dmat` plus a JSON sidecar; an attached output projector goes
/// to `<prefix>_Theta.dmat`.
pub fn save_reduced_model(prefix: &Path, rom: &ReducedModel) -> Result<()> {
    write_dmat(&suffixed(prefix, "_A.dmat"), rom.a_r())?;
    write_dmat(&suffixed(prefix, "_B.dmat"), rom.b_r())?;
    write_dmat(&suffixed(prefix, "_C.dmat"), rom.c_r())?;
    let projector_id = match rom.projector() {
        Some(proj) => {
            write_dmat(&suffixed(prefix, "_Theta.dmat"), proj.theta())?;
            Some(
                suffixed(prefix, "_Theta.dmat")
                    .file_name()
                    .map(|s| s.to_string_lossy().into_owned())
                    .unwrap_or_default(),
            )
        }
        None => None,
    };
    write_json(
        &prefix.with_extension("json"),
        &ReducedSidecar {
            method: rom.method().name().into(),
            r: rom.order(),
            hsv: rom.hsv().to_vec(),
            projector_id,
            projector_energies: rom.projector().map(|p| p.energies().to_vec()),
        },
    )
}

pub fn load_reduced_model(prefix: &Path) -> Result<ReducedModel> {
    let a = read_dmat(&suffixed(prefix, "_A.dmat"))?;
    let b = read_dmat(&suffixed(prefix, "_B.dmat"))?;
    let c = read_dmat(&suffixed(prefix, "_C.dmat"))?;
    let sidecar: ReducedSidecar = read_json(&prefix.with_extension("json"))?;
    let projector = match (&sidecar.projector_id, &sidecar.projector_energies) {
        (Some(_), Some(energies)) => {
            let theta = read_dmat(&suffixed(prefix, "_Theta.dmat"))?;
            Some(OutputProjector::from_parts(theta, energies.clone())?)
        }
        _ => None,
    };
    ReducedModel::new(
        a,
        b,
        c,
        sidecar.hsv,
        ReductionMethod::parse(&sidecar.method)?,
        projector,
    )
}

/// CSV of entry magnitudes, row per matrix row; the heatmap-friendly dump of
/// the transformed-Gramian diagnostics.
pub fn abs_csv(m: &DMatrix<f64>) -> String {
    let mut out = String::new();
    for i in 0..m.nrows() {
        let line: Vec<String> = (0..m.ncols())
            .map(|j| format!("{:.6e}", m[(i, j)].abs()))
            .collect();
        out.push_str(&line.join(","));
        out.push('\n');
    }
    out
}
