//! On-disk model bundle: a directory with `meta.json` plus row-major
//! little-endian f64 files `A.bin`, `Win.bin`, `Wout.bin`.

use std::fs::File;
use std::io::{BufWriter, Read, Write};
use std::path::Path;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::reservoir::{ReservoirConfig, ReservoirModel, SparseCsr};

const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Serialize, Deserialize)]
struct Checksums {
    #[serde(rename = "A.bin")]
    a: String,
    #[serde(rename = "Win.bin")]
    w_in: String,
    #[serde(rename = "Wout.bin")]
    w_out: String,
}

#[derive(Debug, Serialize, Deserialize)]
struct Meta {
    format_version: u32,
    config: ReservoirConfig,
    seed_used: u64,
    u_guard: f64,
    ridge_residual: f64,
    checksums: Checksums,
}

/// FNV-1a 64-bit hash, hex encoded.
pub fn fnv1a64_hex(bytes: &[u8]) -> String {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for &b in bytes {
        h ^= b as u64;
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    format!("{h:016x}")
}

fn matrix_row_major_bytes(m: &DMatrix<f64>) -> Vec<u8> {
    let mut out = Vec::with_capacity(m.len() * 8);
    for i in 0..m.nrows() {
        for j in 0..m.ncols() {
            out.extend_from_slice(&m[(i, j)].to_le_bytes());
        }
    }
    out
}

fn matrix_from_row_major(bytes: &[u8], rows: usize, cols: usize) -> Result<DMatrix<f64>> {
    if bytes.len() != rows * cols * 8 {
        return Err(Error::Bundle(format!(
            "expected {} bytes for a {rows}x{cols} matrix, found {}",
            rows * cols * 8,
            bytes.len()
        )));
    }
    let mut m = DMatrix::zeros(rows, cols);
    for i in 0..rows {
        for j in 0..cols {
            let off = (i * cols + j) * 8;
            m[(i, j)] = f64::from_le_bytes(bytes[off..off + 8].try_into().unwrap());
        }
    }
    Ok(m)
}

impl ReservoirModel {
    /// Write the model bundle. Round trip through [`ReservoirModel::load`]
    /// is bit exact.
    pub fn save<P: AsRef<Path>>(&self, dir: P) -> Result<()> {
        let dir = dir.as_ref();
        std::fs::create_dir_all(dir)?;

        let mut a_bytes = Vec::with_capacity(self.config.n * self.config.n * 8);
        self.a.write_dense_rows(&mut a_bytes)?;
        let w_in_bytes = matrix_row_major_bytes(&self.w_in);
        let w_out_bytes = matrix_row_major_bytes(&self.w_out);

        let meta = Meta {
            format_version: FORMAT_VERSION,
            config: self.config,
            seed_used: self.seed_used,
            u_guard: self.u_guard,
            ridge_residual: self.ridge_residual,
            checksums: Checksums {
                a: fnv1a64_hex(&a_bytes),
                w_in: fnv1a64_hex(&w_in_bytes),
                w_out: fnv1a64_hex(&w_out_bytes),
            },
        };

        std::fs::write(dir.join("A.bin"), &a_bytes)?;
        std::fs::write(dir.join("Win.bin"), &w_in_bytes)?;
        std::fs::write(dir.join("Wout.bin"), &w_out_bytes)?;
        let mut w = BufWriter::new(File::create(dir.join("meta.json"))?);
        serde_json::to_writer_pretty(&mut w, &meta)?;
        w.flush()?;
        Ok(())
    }

    pub fn load<P: AsRef<Path>>(dir: P) -> Result<Self> {
        let dir = dir.as_ref();
        let meta: Meta = serde_json::from_reader(File::open(dir.join("meta.json"))?)?;
        if meta.format_version != FORMAT_VERSION {
            return Err(Error::Bundle(format!(
                "unsupported format version {} (expected {FORMAT_VERSION})",
                meta.format_version
            )));
        }
        meta.config.validate()?;
        let n = meta.config.n;
        let m = meta.config.m;

        let read_checked = |name: &str, expect: &str, len: usize| -> Result<Vec<u8>> {
            let mut bytes = Vec::new();
            File::open(dir.join(name))?.read_to_end(&mut bytes)?;
            if bytes.len() != len {
                return Err(Error::Bundle(format!(
                    "{name}: expected {len} bytes, found {} (truncated?)",
                    bytes.len()
                )));
            }
            let got = fnv1a64_hex(&bytes);
            if got != expect {
                return Err(Error::Bundle(format!(
                    "{name}: checksum mismatch (expected {expect}, got {got})"
                )));
            }
            Ok(bytes)
        };

        let a_bytes = read_checked("A.bin", &meta.checksums.a, n * n * 8)?;
        let w_in_bytes = read_checked("Win.bin", &meta.checksums.w_in, n * m * 8)?;
        let w_out_bytes = read_checked("Wout.bin", &meta.checksums.w_out, m * n * 8)?;

        let a_dense = matrix_from_row_major(&a_bytes, n, n)?;
        Ok(ReservoirModel {
            config: meta.config,
            seed_used: meta.seed_used,
            a: SparseCsr::from_dense(&a_dense),
            w_in: matrix_from_row_major(&w_in_bytes, n, m)?,
            w_out: matrix_from_row_major(&w_out_bytes, m, n)?,
            u_guard: meta.u_guard,
            ridge_residual: meta.ridge_residual,
        })
    }
}
