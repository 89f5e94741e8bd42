//! Record export and the binary network dump.
//!
//! Binary layout (all little-endian): magic `DGNET001`, `u64` layer count
//! `D`, `D + 1` widths as `u64`, `σ_w` and `σ_b` as `f64`, `u64` seed,
//! `u64` name length followed by the UTF-8 nonlinearity name, then for each
//! layer the weights in column-major order and the biases, all `f64`.

use std::io::{self, Read, Write};

use nalgebra::{DMatrix, DVector};

use super::{LayerRecord, NetworkRealization};
use crate::activations::builtin;
use crate::error::{Error, Result};
use crate::stats::{mean_var, sum};

const MAGIC: &[u8; 8] = b"DGNET001";

/// Writes one CSV row per `(layer, sample)`: `layer,sample,theta,q,mean,std`,
/// where the statistics run over neurons. `thetas` labels the columns.
pub fn records_csv(records: &[LayerRecord], thetas: &[f64], out: &mut impl Write) -> io::Result<()> {
    writeln!(out, "layer,sample,theta,q,mean,std")?;
    for r in records {
        for (j, col) in r.h.column_iter().enumerate() {
            let xs: Vec<f64> = col.iter().copied().collect();
            let q = sum(xs.iter().map(|x| x * x)) / xs.len() as f64;
            let (m, v) = mean_var(&xs);
            let theta = thetas.get(j).copied().unwrap_or(f64::NAN);
            writeln!(
                out,
                "{},{},{:.16e},{:.16e},{:.16e},{:.16e}",
                r.layer,
                j,
                theta,
                q,
                m,
                v.sqrt()
            )?;
        }
    }
    Ok(())
}

fn io_err(e: io::Error) -> Error {
    Error::Numerical(format!("network dump i/o: {e}"))
}

pub fn write_network(net: &NetworkRealization, out: &mut impl Write) -> Result<()> {
    let mut buf = Vec::new();
    buf.extend_from_slice(MAGIC);
    buf.extend_from_slice(&(net.depth() as u64).to_le_bytes());
    for &w in &net.widths {
        buf.extend_from_slice(&(w as u64).to_le_bytes());
    }
    buf.extend_from_slice(&net.sigma_w.to_le_bytes());
    buf.extend_from_slice(&net.sigma_b.to_le_bytes());
    buf.extend_from_slice(&net.seed.to_le_bytes());
    let name = net.nonlinearity.name().as_bytes();
    buf.extend_from_slice(&(name.len() as u64).to_le_bytes());
    buf.extend_from_slice(name);
    for (w, b) in net.weights.iter().zip(&net.biases) {
        for x in w.iter().chain(b.iter()) {
            buf.extend_from_slice(&x.to_le_bytes());
        }
    }
    out.write_all(&buf).map_err(io_err)
}

/// Reads a dump written by [`write_network`]; the nonlinearity must be a builtin.
pub fn read_network(input: &mut impl Read) -> Result<NetworkRealization> {
    let mut bytes = Vec::new();
    input.read_to_end(&mut bytes).map_err(io_err)?;
    let mut pos = 0usize;
    let mut take = |n: usize| -> Result<&[u8]> {
        let s = bytes
            .get(pos..pos + n)
            .ok_or_else(|| Error::Numerical("truncated network dump".into()))?;
        pos += n;
        Ok(s)
    };
    if take(8)? != MAGIC {
        return Err(Error::Numerical("not a network dump (bad magic)".into()));
    }
    let u64_at = |s: &[u8]| u64::from_le_bytes(s.try_into().expect("8 bytes"));
    let f64_at = |s: &[u8]| f64::from_le_bytes(s.try_into().expect("8 bytes"));
    let depth = u64_at(take(8)?) as usize;
    if depth == 0 || depth > 1 << 20 {
        return Err(Error::Numerical(format!("implausible depth {depth} in dump")));
    }
    let mut widths = Vec::with_capacity(depth + 1);
    for _ in 0..=depth {
        widths.push(u64_at(take(8)?) as usize);
    }
    let sigma_w = f64_at(take(8)?);
    let sigma_b = f64_at(take(8)?);
    let seed = u64_at(take(8)?);
    let name_len = u64_at(take(8)?) as usize;
    let name = String::from_utf8(take(name_len)?.to_vec())
        .map_err(|_| Error::Numerical("nonlinearity name is not UTF-8".into()))?;
    let nonlinearity = builtin(&name)?;
    let mut weights = Vec::with_capacity(depth);
    let mut biases = Vec::with_capacity(depth);
    for l in 1..=depth {
        let (rows, cols) = (widths[l], widths[l - 1]);
        let mut read_vals = |count: usize| -> Result<Vec<f64>> {
            let raw = take(count.checked_mul(8).ok_or_else(|| Error::Numerical("dump too large".into()))?)?;
            Ok(raw.chunks_exact(8).map(f64_at).collect())
        };
        let w = read_vals(rows * cols)?;
        let b = read_vals(rows)?;
        weights.push(DMatrix::from_vec(rows, cols, w));
        biases.push(DVector::from_vec(b));
    }
    if pos != bytes.len() {
        return Err(Error::Numerical("trailing bytes after network dump".into()));
    }
    Ok(NetworkRealization {
        widths,
        weights,
        biases,
        nonlinearity,
        sigma_w,
        sigma_b,
        seed,
    })
}
