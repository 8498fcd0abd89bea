//! Snapshot files: a text header terminated by `END`, then the ρ and w
//! arrays in row-major order as little-endian f64.

use std::io::{BufRead, Write};

use sha2::{Digest, Sha256};

use super::{AtomicState, Model};
use crate::error::{Error, Result};
use crate::spectral::TransverseGrid;

pub const DIAGNOSTICS_COLUMNS: &str = "step,time,amp_rho_q,amp_w_q,min_rho_pm,mean_rho,max_w";

const MAGIC: &str = "magnetomech-snapshot 1";

/// Short SHA-256 digest identifying the physical parameters of a run.
pub fn params_hash(model: &Model) -> String {
    let digest = Sha256::digest(format!("{model:?}").as_bytes());
    digest[..8].iter().map(|b| format!("{b:02x}")).collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct Snapshot {
    pub shape: Vec<usize>,
    pub spacing: f64,
    pub params_hash: String,
    pub state: AtomicState,
}

pub fn write_snapshot<W: Write>(
    mut out: W,
    state: &AtomicState,
    grid: &TransverseGrid,
    params_hash: &str,
) -> Result<()> {
    if state.rho.len() != grid.len() || state.w.len() != grid.len() {
        return Err(Error::ShapeMismatch {
            expected: grid.len(),
            got: state.rho.len().min(state.w.len()),
        });
    }
    let shape: Vec<String> = grid.shape().iter().map(|s| s.to_string()).collect();
    writeln!(out, "{MAGIC}")?;
    writeln!(out, "dims {}", grid.dims())?;
    writeln!(out, "shape {}", shape.join(" "))?;
    writeln!(out, "spacing {:e}", grid.spacing())?;
    writeln!(out, "time {:e}", state.time)?;
    writeln!(out, "params_hash {params_hash}")?;
    writeln!(out, "fields rho w")?;
    writeln!(out, "encoding f64-le row-major")?;
    writeln!(out, "END")?;
    for v in state.rho.iter().chain(&state.w) {
        out.write_all(&v.to_le_bytes())?;
    }
    Ok(())
}

pub fn read_snapshot<R: BufRead>(mut input: R) -> Result<Snapshot> {
    let mut line = String::new();
    let mut next_line = |input: &mut R| -> Result<String> {
        line.clear();
        if input.read_line(&mut line)? == 0 {
            return Err(Error::Format("header ended before END".into()));
        }
        Ok(line.trim_end().to_string())
    };
    if next_line(&mut input)? != MAGIC {
        return Err(Error::Format("missing magic line".into()));
    }
    let (mut shape, mut spacing, mut time, mut hash) = (None, None, None, None);
    loop {
        let l = next_line(&mut input)?;
        if l == "END" {
            break;
        }
        let (key, value) = l.split_once(' ').unwrap_or((l.as_str(), ""));
        let num = |v: &str| v.parse::<f64>().map_err(|_| Error::Format(format!("bad {key}: {v}")));
        match key {
            "shape" => {
                let dims = value
                    .split_whitespace()
                    .map(|s| s.parse::<usize>())
                    .collect::<std::result::Result<Vec<_>, _>>()
                    .map_err(|_| Error::Format(format!("bad shape: {value}")))?;
                shape = Some(dims);
            }
            "spacing" => spacing = Some(num(value)?),
            "time" => time = Some(num(value)?),
            "params_hash" => hash = Some(value.to_string()),
            _ => {}
        }
    }
    let shape = shape.ok_or_else(|| Error::Format("no shape".into()))?;
    let n: usize = shape.iter().product();
    let mut bytes = vec![0u8; 16 * n];
    input.read_exact(&mut bytes)?;
    let values: Vec<f64> = bytes
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("chunk of 8")))
        .collect();
    Ok(Snapshot {
        shape,
        spacing: spacing.ok_or_else(|| Error::Format("no spacing".into()))?,
        params_hash: hash.unwrap_or_default(),
        state: AtomicState {
            rho: values[..n].to_vec(),
            w: values[n..].to_vec(),
            time: time.ok_or_else(|| Error::Format("no time".into()))?,
        },
    })
}
