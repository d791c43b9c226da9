//! The dictionary: a dense observation-by-code matrix whose columns live in
//! the Euclidean unit ball, plus its binary serialization.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use ndarray::{Array1, Array2, ArrayView1, Axis};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{Error, Result};

/// File magic for the binary dictionary format.
pub const DICTIONARY_MAGIC: [u8; 4] = *b"OSDL";
/// Current version of the binary dictionary format.
pub const DICTIONARY_VERSION: u32 = 1;

/// Slack on the unit-ball column invariant, absorbing rounding in
/// normalization and projection.
pub const COLUMN_NORM_SLACK: f64 = 1e-12;

/// Dense dictionary with unit-ball columns.
#[derive(Debug, Clone, PartialEq)]
pub struct Dictionary {
    matrix: Array2<f64>,
}

impl Dictionary {
    /// Deterministic initialization: entries uniform on (-1, 1) from a
    /// ChaCha stream seeded by `seed`, drawn column by column, then each
    /// column scaled to unit norm.
    pub fn init(obs_dim: usize, code_dim: usize, seed: u64) -> Dictionary {
        assert!(obs_dim >= 1 && code_dim >= 1, "dictionary dims must be >= 1");
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut matrix = Array2::zeros((obs_dim, code_dim));
        for j in 0..code_dim {
            let mut norm2 = 0.0;
            for i in 0..obs_dim {
                let v: f64 = rng.random_range(-1.0..1.0);
                matrix[[i, j]] = v;
                norm2 += v * v;
            }
            let norm = norm2.sqrt();
            if norm > 0.0 {
                for i in 0..obs_dim {
                    matrix[[i, j]] /= norm;
                }
            }
        }
        Dictionary { matrix }
    }

    /// Wraps an existing matrix, enforcing the column-norm invariant.
    pub fn from_matrix(matrix: Array2<f64>) -> Result<Dictionary> {
        if matrix.nrows() == 0 || matrix.ncols() == 0 {
            return Err(Error::shape("dictionary must have positive dimensions"));
        }
        for (j, col) in matrix.axis_iter(Axis(1)).enumerate() {
            let norm = col.iter().map(|v| v * v).sum::<f64>().sqrt();
            if !norm.is_finite() || norm > 1.0 + COLUMN_NORM_SLACK {
                return Err(Error::param(format!(
                    "dictionary column {j} has norm {norm}, outside the unit ball"
                )));
            }
        }
        Ok(Dictionary { matrix })
    }

    pub fn matrix(&self) -> &Array2<f64> {
        &self.matrix
    }

    pub fn obs_dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn code_dim(&self) -> usize {
        self.matrix.ncols()
    }

    pub fn row(&self, i: usize) -> ArrayView1<'_, f64> {
        self.matrix.row(i)
    }

    pub fn column(&self, j: usize) -> ArrayView1<'_, f64> {
        self.matrix.column(j)
    }

    /// Overwrites one column without re-checking the ball invariant; the
    /// update path projects before calling this, and verification code uses
    /// it to probe perturbed dictionaries.
    pub fn set_column(&mut self, j: usize, values: ArrayView1<f64>) {
        self.matrix.column_mut(j).assign(&values);
    }

    /// Copy of the rows listed in `obs`, in the given order.
    pub fn restrict_rows(&self, obs: &[usize]) -> Array2<f64> {
        self.matrix.select(Axis(0), obs)
    }

    /// Gram matrix of the rows, used to derive item similarities cheaply.
    pub fn row_gram(&self) -> Array2<f64> {
        self.matrix.dot(&self.matrix.t())
    }

    /// Binary encoding: magic, version, dims, then row-major little-endian
    /// 64-bit floats.
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(16 + 8 * self.matrix.len());
        out.extend_from_slice(&DICTIONARY_MAGIC);
        out.extend_from_slice(&DICTIONARY_VERSION.to_le_bytes());
        out.extend_from_slice(&(self.obs_dim() as u32).to_le_bytes());
        out.extend_from_slice(&(self.code_dim() as u32).to_le_bytes());
        for row in self.matrix.rows() {
            for &v in row {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Dictionary> {
        if bytes.len() < 16 {
            return Err(Error::DictionaryFormat("file shorter than header".into()));
        }
        if bytes[0..4] != DICTIONARY_MAGIC {
            return Err(Error::DictionaryFormat("bad magic".into()));
        }
        let version = u32::from_le_bytes(bytes[4..8].try_into().unwrap());
        if version != DICTIONARY_VERSION {
            return Err(Error::DictionaryFormat(format!(
                "unsupported version {version}"
            )));
        }
        let obs_dim = u32::from_le_bytes(bytes[8..12].try_into().unwrap()) as usize;
        let code_dim = u32::from_le_bytes(bytes[12..16].try_into().unwrap()) as usize;
        let want = 16 + 8 * obs_dim * code_dim;
        if bytes.len() != want {
            return Err(Error::DictionaryFormat(format!(
                "expected {want} bytes for {obs_dim}x{code_dim}, found {}",
                bytes.len()
            )));
        }
        let mut values = Vec::with_capacity(obs_dim * code_dim);
        for chunk in bytes[16..].chunks_exact(8) {
            values.push(f64::from_le_bytes(chunk.try_into().unwrap()));
        }
        let matrix = Array2::from_shape_vec((obs_dim, code_dim), values)
            .map_err(|e| Error::DictionaryFormat(e.to_string()))?;
        Dictionary::from_matrix(matrix)
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        let mut w = BufWriter::new(File::create(path)?);
        w.write_all(&self.to_bytes())?;
        Ok(())
    }

    /// Writes the dictionary plus a JSON sidecar (`<path>.json`) holding the
    /// generating configuration for provenance.
    pub fn write_with_sidecar<M: Serialize>(&self, path: &Path, provenance: &M) -> Result<()> {
        self.write(path)?;
        let mut name = path.file_name().unwrap_or_default().to_os_string();
        name.push(".json");
        let sidecar = path.with_file_name(name);
        let mut w = BufWriter::new(File::create(sidecar)?);
        serde_json::to_writer_pretty(&mut w, provenance)?;
        w.write_all(b"\n")?;
        Ok(())
    }

    pub fn read(path: &Path) -> Result<Dictionary> {
        let mut bytes = Vec::new();
        BufReader::new(File::open(path)?).read_to_end(&mut bytes)?;
        Dictionary::from_bytes(&bytes)
    }
}

/// Projection onto the Euclidean unit ball: identity inside, rescale outside.
pub fn project_to_unit_ball(u: ArrayView1<f64>) -> Array1<f64> {
    let norm = u.iter().map(|v| v * v).sum::<f64>().sqrt();
    if norm > 1.0 {
        u.mapv(|v| v / norm)
    } else {
        u.to_owned()
    }
}
