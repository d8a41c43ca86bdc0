//! Binary checkpoint container for one side's [`Encoder`].
//!
//! Layout:
//!
//! ```text
//! SEQRANK-CHECKPOINT 1\n
//! <one line of JSON: CheckpointHeader>\n
//! <every active tensor, in header field order, row-major little-endian f64>
//! ```
//!
//! Field order is the order of [`Encoder::groups`]: forward-direction groups first,
//! then `bwd.`-prefixed groups for bidirectional encoders.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::params::{Arch, Encoder, Params, Side, Variant};

const MAGIC: &str = "SEQRANK-CHECKPOINT 1";

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FieldSpec {
    pub name: String,
    pub shape: Vec<usize>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CheckpointHeader {
    pub arch: Arch,
    pub variant: Variant,
    pub cells: usize,
    pub trigram_dim: usize,
    pub bidirectional: bool,
    pub side: Side,
    /// Trigram dictionary file, relative to the checkpoint's directory.
    pub dict: String,
    pub fields: Vec<FieldSpec>,
}

fn field_shape(name: &str, cells: usize, dim: usize) -> Vec<usize> {
    let base = name.strip_prefix("bwd.").unwrap_or(name);
    if base == "w" || base.ends_with(".w") {
        vec![cells, dim]
    } else if base.ends_with("w_rec") {
        vec![cells, cells]
    } else {
        vec![cells]
    }
}

impl CheckpointHeader {
    pub fn describe(encoder: &Encoder, side: Side, dict: &str) -> CheckpointHeader {
        let cells = encoder.cells();
        let dim = encoder.input_dim();
        CheckpointHeader {
            arch: encoder.arch(),
            variant: encoder.variant(),
            cells,
            trigram_dim: dim,
            bidirectional: encoder.is_bidirectional(),
            side,
            dict: dict.to_string(),
            fields: encoder
                .groups()
                .into_iter()
                .map(|(name, _)| FieldSpec {
                    shape: field_shape(&name, cells, dim),
                    name,
                })
                .collect(),
        }
    }
}

pub fn write_checkpoint<W: Write>(
    mut out: W,
    encoder: &Encoder,
    side: Side,
    dict: &str,
) -> Result<()> {
    let header = CheckpointHeader::describe(encoder, side, dict);
    writeln!(out, "{MAGIC}")?;
    serde_json::to_writer(&mut out, &header)?;
    out.write_all(b"\n")?;
    for (_, values) in encoder.groups() {
        for v in values {
            out.write_all(&v.to_le_bytes())?;
        }
    }
    out.flush()?;
    Ok(())
}

pub fn read_checkpoint<R: BufRead>(mut input: R, source: &Path) -> Result<(CheckpointHeader, Encoder)> {
    let bad = |message: String| Error::Checkpoint {
        path: source.to_path_buf(),
        message,
    };
    let mut line = String::new();
    input.read_line(&mut line)?;
    if line.trim_end() != MAGIC {
        return Err(bad("missing checkpoint magic line".into()));
    }
    line.clear();
    input.read_line(&mut line)?;
    let header: CheckpointHeader =
        serde_json::from_str(line.trim_end()).map_err(|e| bad(format!("bad header: {e}")))?;

    let forward = Params::zeros(header.arch, header.variant, header.cells, header.trigram_dim);
    let backward = header.bidirectional.then(|| forward.clone());
    let mut encoder = Encoder { forward, backward };
    let expected = CheckpointHeader::describe(&encoder, header.side, &header.dict);
    if expected.fields != header.fields {
        return Err(bad("field list does not match the declared architecture".into()));
    }
    let mut buf = [0u8; 8];
    for (name, values) in encoder.groups_mut() {
        for v in values.iter_mut() {
            input
                .read_exact(&mut buf)
                .map_err(|_| bad(format!("truncated while reading {name}")))?;
            *v = f64::from_le_bytes(buf);
        }
    }
    if input.read(&mut buf)? != 0 {
        return Err(bad("trailing bytes after last field".into()));
    }
    if !encoder.is_finite() {
        return Err(bad("non-finite parameter values".into()));
    }
    Ok((header, encoder))
}

pub fn save(path: &Path, encoder: &Encoder, side: Side, dict: &str) -> Result<()> {
    let file = File::create(path)?;
    write_checkpoint(BufWriter::new(file), encoder, side, dict)
}

/// Loads a checkpoint and returns the resolved dictionary path alongside it.
pub fn load(path: &Path) -> Result<(CheckpointHeader, Encoder, PathBuf)> {
    let file = crate::error::open(path)?;
    let (header, encoder) = read_checkpoint(BufReader::new(file), path)?;
    let dict_path = path.parent().unwrap_or(Path::new(".")).join(&header.dict);
    Ok((header, encoder, dict_path))
}
