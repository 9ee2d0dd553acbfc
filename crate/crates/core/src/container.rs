//! Binary container for ensembles and instances.
//!
//! Layout (all integers little-endian):
//!
//! | bytes | content |
//! |-------|---------|
//! | 4 | magic `EHCS` |
//! | 4 | format version (`u32`) |
//! | 4 | header length `h` (`u32`) |
//! | h | UTF-8 JSON header |
//! | … | arrays, back to back, as little-endian `f64` |
//!
//! The header is an object with `meta` (free-form: dimensions, seeds,
//! parameters) and `arrays`, a list of `{name, rows, cols, complex}` in
//! payload order. Complex arrays interleave `re, im`. Matrices are stored
//! column-major.

use std::path::Path;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::ensemble::{PowerPattern, SensingEnsemble, SparseInstance};
use crate::error::{Error, Result};
use crate::{CMatrix, CVector};

pub const MAGIC: &[u8; 4] = b"EHCS";
pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArrayInfo {
    pub name: String,
    pub rows: usize,
    pub cols: usize,
    pub complex: bool,
}

impl ArrayInfo {
    fn len(&self) -> usize {
        self.rows * self.cols * if self.complex { 2 } else { 1 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Array {
    pub info: ArrayInfo,
    pub data: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct HeaderJson {
    meta: serde_json::Value,
    arrays: Vec<ArrayInfo>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Container {
    pub meta: serde_json::Value,
    pub arrays: Vec<Array>,
}

fn format_err(msg: impl Into<String>) -> Error {
    Error::Format(msg.into())
}

impl Container {
    pub fn new(meta: serde_json::Value) -> Self {
        Container { meta, arrays: Vec::new() }
    }

    pub fn push_real(&mut self, name: &str, values: &[f64]) {
        self.arrays.push(Array {
            info: ArrayInfo { name: name.into(), rows: values.len(), cols: 1, complex: false },
            data: values.to_vec(),
        });
    }

    pub fn push_complex(&mut self, name: &str, m: &CMatrix) {
        let data = m.as_slice().iter().flat_map(|z| [z.re, z.im]).collect();
        self.arrays.push(Array {
            info: ArrayInfo { name: name.into(), rows: m.nrows(), cols: m.ncols(), complex: true },
            data,
        });
    }

    pub fn push_complex_vector(&mut self, name: &str, v: &CVector) {
        let data = v.as_slice().iter().flat_map(|z| [z.re, z.im]).collect();
        self.arrays.push(Array {
            info: ArrayInfo { name: name.into(), rows: v.len(), cols: 1, complex: true },
            data,
        });
    }

    pub fn get(&self, name: &str) -> Result<&Array> {
        self.arrays.iter().find(|a| a.info.name == name).ok_or_else(|| format_err(format!("missing array {name:?}")))
    }

    pub fn real(&self, name: &str) -> Result<&[f64]> {
        let a = self.get(name)?;
        if a.info.complex {
            return Err(format_err(format!("array {name:?} is complex")));
        }
        Ok(&a.data)
    }

    pub fn complex_matrix(&self, name: &str) -> Result<CMatrix> {
        let a = self.get(name)?;
        if !a.info.complex {
            return Err(format_err(format!("array {name:?} is real")));
        }
        let values: Vec<Complex64> = a.data.chunks_exact(2).map(|c| Complex64::new(c[0], c[1])).collect();
        Ok(CMatrix::from_vec(a.info.rows, a.info.cols, values))
    }

    pub fn complex_vector(&self, name: &str) -> Result<CVector> {
        let m = self.complex_matrix(name)?;
        if m.ncols() != 1 {
            return Err(format_err(format!("array {name:?} is not a vector")));
        }
        Ok(CVector::from_column_slice(m.as_slice()))
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let header = HeaderJson { meta: self.meta.clone(), arrays: self.arrays.iter().map(|a| a.info.clone()).collect() };
        let header = serde_json::to_vec(&header)?;
        let header_len = u32::try_from(header.len()).map_err(|_| format_err("header too large"))?;
        let payload: usize = self.arrays.iter().map(|a| a.data.len() * 8).sum();
        let mut out = Vec::with_capacity(12 + header.len() + payload);
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
        out.extend_from_slice(&header_len.to_le_bytes());
        out.extend_from_slice(&header);
        for a in &self.arrays {
            if a.data.len() != a.info.len() {
                return Err(format_err(format!("array {:?} has inconsistent length", a.info.name)));
            }
            for v in &a.data {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        Ok(out)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        if bytes.len() < 12 || &bytes[..4] != MAGIC {
            return Err(format_err("not an EHCS container"));
        }
        let version = u32::from_le_bytes(bytes[4..8].try_into().expect("4 bytes"));
        if version != FORMAT_VERSION {
            return Err(format_err(format!("unsupported container version {version}")));
        }
        let header_len = u32::from_le_bytes(bytes[8..12].try_into().expect("4 bytes")) as usize;
        let body = bytes.get(12..12 + header_len).ok_or_else(|| format_err("truncated header"))?;
        let header: HeaderJson = serde_json::from_slice(body)?;
        let mut offset = 12 + header_len;
        let mut arrays = Vec::with_capacity(header.arrays.len());
        for info in header.arrays {
            let len = info.len();
            let raw = bytes.get(offset..offset + 8 * len).ok_or_else(|| format_err(format!("truncated array {:?}", info.name)))?;
            let data = raw.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes"))).collect();
            offset += 8 * len;
            arrays.push(Array { info, data });
        }
        if offset != bytes.len() {
            return Err(format_err("trailing bytes after last array"));
        }
        Ok(Container { meta: header.meta, arrays })
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_bytes()?)?;
        Ok(())
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_bytes(&std::fs::read(path)?)
    }
}

fn basis_tag(name: &str) -> &'static str {
    match name {
        "dft" => "dft",
        "dct" => "dct",
        "identity" => "identity",
        _ => "custom",
    }
}

/// Packs an ensemble; `seed` records the substream it came from.
pub fn ensemble_container(ensemble: &SensingEnsemble, seed: Option<u64>) -> Container {
    let mut c = Container::new(json!({
        "object": "sensing-ensemble",
        "m": ensemble.m,
        "n": ensemble.n(),
        "p": ensemble.p,
        "basis": ensemble.basis,
        "p_ave": ensemble.pattern.p_ave,
        "sigma2": ensemble.pattern.sigma2,
        "seed": seed,
    }));
    c.push_real("gamma", &ensemble.pattern.gamma);
    c.push_complex("sigma", &ensemble.sigma_mat);
    c.push_complex("z_tilde", &ensemble.z_tilde);
    c.push_complex("a", &ensemble.a_mat);
    c
}

pub fn ensemble_from_container(c: &Container) -> Result<SensingEnsemble> {
    let meta = &c.meta;
    if meta["object"] != "sensing-ensemble" {
        return Err(format_err("container does not hold a sensing ensemble"));
    }
    let num = |key: &str| meta[key].as_f64().ok_or_else(|| format_err(format!("missing meta field {key}")));
    let m = num("m")? as usize;
    let pattern = PowerPattern::new(c.real("gamma")?.to_vec(), num("sigma2")?)?;
    let a_mat = c.complex_matrix("a")?;
    let z_tilde = c.complex_matrix("z_tilde")?;
    let sigma_mat = c.complex_matrix("sigma")?;
    let n = pattern.n();
    if a_mat.shape() != (m, n) || z_tilde.shape() != (m, n) || sigma_mat.shape() != (n, n) {
        return Err(Error::Dimension("container arrays disagree with m and n".into()));
    }
    Ok(SensingEnsemble {
        sigma_mat,
        z_tilde,
        a_mat,
        m,
        p: num("p")?,
        pattern,
        basis: basis_tag(meta["basis"].as_str().unwrap_or("custom")),
    })
}

pub fn instance_container(instance: &SparseInstance, seed: Option<u64>) -> Container {
    let mut c = Container::new(json!({
        "object": "sparse-instance",
        "n": instance.x.len(),
        "m": instance.y.len(),
        "support": instance.support,
        "seed": seed,
    }));
    c.push_complex_vector("x", &instance.x);
    c.push_complex_vector("y", &instance.y);
    c.push_complex_vector("noise", &instance.noise);
    c
}

pub fn instance_from_container(c: &Container) -> Result<SparseInstance> {
    if c.meta["object"] != "sparse-instance" {
        return Err(format_err("container does not hold a sparse instance"));
    }
    let support: Vec<usize> = serde_json::from_value(c.meta["support"].clone())?;
    let x = c.complex_vector("x")?;
    let y = c.complex_vector("y")?;
    let noise = c.complex_vector("noise")?;
    if y.len() != noise.len() || support.iter().any(|&s| s >= x.len()) {
        return Err(Error::Dimension("container arrays disagree with each other".into()));
    }
    Ok(SparseInstance { x, support, y, noise })
}
