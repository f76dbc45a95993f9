//! Binary checkpoints.
//!
//! A file is one JSON header line followed by raw little-endian `f64` pairs
//! `(re, im)` for the coefficients of `n, u1, u2, u3`, each in slot order with
//! k3 fastest, then m, then k1 (slots follow the FFT layout: non-negative
//! wavenumbers first, then the negative ones).

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;
use std::sync::Arc;

use pksns_core::{FlowState, Grid, GridSpec, RunContext, SpectralField, VectorField, C64};
use serde::{Deserialize, Serialize};

use crate::error::{io_err, Error, Result};

pub const FORMAT: &str = "pksns-checkpoint";
pub const VERSION: u32 = 1;
pub const FIELDS: [&str; 4] = ["n", "u1", "u2", "u3"];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Header {
    pub format: String,
    pub version: u32,
    pub grid: GridSpec,
    pub t: f64,
    pub frame_shear: f64,
    pub fields: Vec<String>,
    pub index_order: String,
    /// Run-loop state for a bit-exact resume; absent for bare field snapshots.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub run: Option<RunContext>,
}

#[derive(Clone, Debug)]
pub struct Checkpoint {
    pub header: Header,
    pub coeffs: [Vec<C64>; 4],
}

impl Checkpoint {
    /// Rebuilds the state on `grid`, which must match the header's grid spec.
    pub fn state(&self, grid: &Arc<Grid>) -> Result<FlowState> {
        if grid.spec() != &self.header.grid {
            return Err(Error::Validation { field: "grid".into(), reason: format!("checkpoint grid {:?} differs from {:?}", self.header.grid, grid.spec()) });
        }
        let s = self.header.frame_shear;
        let f = |i: usize| SpectralField::from_coeffs(grid, self.coeffs[i].clone(), s);
        Ok(FlowState::new(self.header.t, f(0)?, VectorField::new([f(1)?, f(2)?, f(3)?]))?)
    }
}

pub fn write_checkpoint(state: &FlowState, run: Option<&RunContext>, path: &Path) -> Result<()> {
    let header = Header {
        format: FORMAT.into(),
        version: VERSION,
        grid: state.grid().spec().clone(),
        t: state.t,
        frame_shear: state.frame_shear(),
        fields: FIELDS.iter().map(|s| s.to_string()).collect(),
        index_order: "k3 fastest, then m, then k1".into(),
        run: run.cloned(),
    };
    let tmp = path.with_extension("tmp");
    {
        let mut w = BufWriter::new(File::create(&tmp).map_err(io_err(&tmp))?);
        serde_json::to_writer(&mut w, &header)?;
        w.write_all(b"\n").map_err(io_err(&tmp))?;
        for f in state.fields() {
            for c in f.coeffs() {
                w.write_all(&c.re.to_le_bytes()).map_err(io_err(&tmp))?;
                w.write_all(&c.im.to_le_bytes()).map_err(io_err(&tmp))?;
            }
        }
        w.flush().map_err(io_err(&tmp))?;
    }
    std::fs::rename(&tmp, path).map_err(io_err(path))
}

pub fn read_checkpoint(path: &Path) -> Result<Checkpoint> {
    let bad = |reason: String| Error::Checkpoint { path: path.to_owned(), reason };
    let mut r = BufReader::new(File::open(path).map_err(io_err(path))?);
    let mut line = Vec::new();
    r.read_until(b'\n', &mut line).map_err(io_err(path))?;
    if line.last() != Some(&b'\n') {
        return Err(bad("truncated header".into()));
    }
    let value: serde_json::Value = serde_json::from_slice(&line).map_err(|e| bad(format!("header is not JSON: {e}")))?;
    if value.get("format").and_then(|v| v.as_str()) != Some(FORMAT) {
        return Err(bad("not a pksns checkpoint".into()));
    }
    let version = value.get("version").and_then(|v| v.as_u64()).ok_or_else(|| bad("missing version".into()))?;
    if version != VERSION as u64 {
        return Err(Error::CheckpointVersion { path: path.to_owned(), found: version as u32, expected: VERSION });
    }
    let header: Header = serde_json::from_value(value).map_err(|e| bad(format!("bad header: {e}")))?;
    if header.fields != FIELDS {
        return Err(bad(format!("unexpected field list {:?}", header.fields)));
    }
    header.grid.validate()?;
    let len = header.grid.len();
    let mut payload = Vec::new();
    r.read_to_end(&mut payload).map_err(io_err(path))?;
    let expected = 4 * len * 16;
    if payload.len() < expected {
        return Err(bad(format!("truncated payload: {} of {expected} bytes", payload.len())));
    }
    if payload.len() > expected {
        return Err(bad(format!("payload has {} bytes, header implies {expected}", payload.len())));
    }
    let word = |o: usize| f64::from_le_bytes(payload[o..o + 8].try_into().expect("8 bytes"));
    let field = |i: usize| -> Vec<C64> { (0..len).map(|k| (i * len + k) * 16).map(|o| C64::new(word(o), word(o + 8))).collect() };
    Ok(Checkpoint { coeffs: [field(0), field(1), field(2), field(3)], header })
}
