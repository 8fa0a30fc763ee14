//! `ALGM` model files.
//!
//! Layout, little-endian:
//! `"ALGM"`, version u32, head count u16, then per head class count u32,
//! d u32, `classes × d` f32 weights and the head trailer. A trailer is a tag
//! u8: 0 or 1 for a fixed or variable altitude binning (parameters as f64,
//! bin count u32), 2 for a place head (M f64, N u16, u u16, v u16, then one
//! (e i64, n i64) cell per class). The file ends with the descriptor layout,
//! the descriptor input size (u32 × 2) and the logit scale s (f64).

use std::fs;
use std::path::Path;

use crate::altbins::AltitudeBinning;
use crate::codec::{PutLe, Reader};
use crate::error::{Error, Result};
use crate::spectra::DescriptorConfig;

use super::PrototypeMatrix;

pub const MODEL_MAGIC: &[u8; 4] = b"ALGM";
pub const MODEL_VERSION: u32 = 1;

const TAG_PLACE: u8 = 2;

/// The group a place head covers and the cell behind each of its classes.
#[derive(Debug, Clone, PartialEq)]
pub struct PlaceHeadRef {
    pub cell_size_m: f64,
    pub group_modulus: u16,
    pub group: (u16, u16),
    pub cells: Vec<(i64, i64)>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum HeadMeta {
    Altitude(AltitudeBinning),
    Place(PlaceHeadRef),
}

impl HeadMeta {
    fn classes(&self) -> usize {
        match self {
            HeadMeta::Altitude(b) => b.n_bins(),
            HeadMeta::Place(p) => p.cells.len(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Head {
    pub prototypes: PrototypeMatrix,
    pub meta: HeadMeta,
}

impl Head {
    pub fn new(prototypes: PrototypeMatrix, meta: HeadMeta) -> Result<Self> {
        if prototypes.rows() != meta.classes() {
            return Err(Error::Mismatch(format!(
                "head has {} prototypes but its trailer describes {} classes",
                prototypes.rows(),
                meta.classes()
            )));
        }
        Ok(Self { prototypes, meta })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModelFile {
    pub heads: Vec<Head>,
    pub descriptor: DescriptorConfig,
    pub input_size: (usize, usize),
    pub scale: f64,
}

impl ModelFile {
    /// Weights are rounded to f32 so a model scores identically before
    /// saving and after loading.
    pub fn new(mut heads: Vec<Head>, descriptor: DescriptorConfig, input_size: (usize, usize), scale: f64) -> Result<Self> {
        if heads.is_empty() || heads.len() > u16::MAX as usize {
            return Err(Error::Config(format!("a model needs 1..=65535 heads, got {}", heads.len())));
        }
        let d = descriptor.dim();
        if let Some(h) = heads.iter().find(|h| h.prototypes.cols() != d) {
            return Err(Error::Mismatch(format!(
                "head dimension {} does not match descriptor dimension {d}",
                h.prototypes.cols()
            )));
        }
        heads.iter_mut().for_each(|h| h.prototypes.round_to_f32());
        Ok(Self {
            heads,
            descriptor,
            input_size,
            scale,
        })
    }

    /// The single altitude head of an altitude model.
    pub fn altitude_head(&self) -> Result<(&PrototypeMatrix, &AltitudeBinning)> {
        match self.heads.as_slice() {
            [Head {
                prototypes,
                meta: HeadMeta::Altitude(b),
            }] => Ok((prototypes, b)),
            _ => Err(Error::Mismatch("expected a model with exactly one altitude head".into())),
        }
    }

    /// Place heads with their references; errors if any head is not a place head.
    pub fn place_heads(&self) -> Result<Vec<(&PrototypeMatrix, &PlaceHeadRef)>> {
        self.heads
            .iter()
            .map(|h| match &h.meta {
                HeadMeta::Place(p) => Ok((&h.prototypes, p)),
                HeadMeta::Altitude(_) => Err(Error::Mismatch("expected place heads, found an altitude head".into())),
            })
            .collect()
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        out.extend_from_slice(MODEL_MAGIC);
        out.put_u32(MODEL_VERSION);
        out.put_u16(self.heads.len() as u16);
        for head in &self.heads {
            let p = &head.prototypes;
            out.put_u32(p.rows() as u32);
            out.put_u32(p.cols() as u32);
            p.weights().iter().for_each(|&w| out.put_f32(w as f32));
            match &head.meta {
                HeadMeta::Altitude(b) => b.encode(&mut out),
                HeadMeta::Place(r) => {
                    out.put_u8(TAG_PLACE);
                    out.put_f64(r.cell_size_m);
                    out.put_u16(r.group_modulus);
                    out.put_u16(r.group.0);
                    out.put_u16(r.group.1);
                    for &(e, n) in &r.cells {
                        out.put_i64(e);
                        out.put_i64(n);
                    }
                }
            }
        }
        self.descriptor.encode(&mut out);
        out.put_u32(self.input_size.0 as u32);
        out.put_u32(self.input_size.1 as u32);
        out.put_f64(self.scale);
        out
    }

    pub fn from_bytes(bytes: &[u8], path: &Path) -> Result<Self> {
        let mut r = Reader::new(bytes, path);
        if r.take(4, "magic")? != MODEL_MAGIC {
            return Err(r.error("not an ALGM model file"));
        }
        let version = r.u32()?;
        if version != MODEL_VERSION {
            return Err(r.error(format!("unsupported model version {version}")));
        }
        let n_heads = r.u16()?;
        let mut heads = Vec::with_capacity(n_heads as usize);
        for _ in 0..n_heads {
            let rows = r.u32()? as usize;
            let cols = r.u32()? as usize;
            let weights: Vec<f64> = r.f32_vec(rows * cols)?.into_iter().map(f64::from).collect();
            let prototypes = PrototypeMatrix::from_stored(rows, cols, weights).map_err(|e| r.error(e.to_string()))?;
            let tag = r.u8()?;
            let meta = if tag == TAG_PLACE {
                let cell_size_m = r.f64()?;
                let group_modulus = r.u16()?;
                let group = (r.u16()?, r.u16()?);
                let cells = (0..rows).map(|_| Ok((r.i64()?, r.i64()?))).collect::<Result<_>>()?;
                HeadMeta::Place(PlaceHeadRef {
                    cell_size_m,
                    group_modulus,
                    group,
                    cells,
                })
            } else {
                HeadMeta::Altitude(AltitudeBinning::decode(tag, &mut r)?)
            };
            heads.push(Head::new(prototypes, meta).map_err(|e| r.error(e.to_string()))?);
        }
        let descriptor = DescriptorConfig::decode(&mut r)?;
        let input_size = (r.u32()? as usize, r.u32()? as usize);
        let scale = r.f64()?;
        if r.remaining() != 0 {
            return Err(r.error(format!("{} trailing bytes", r.remaining())));
        }
        Self::new(heads, descriptor, input_size, scale).map_err(|e| match e {
            Error::Mismatch(m) => Error::Mismatch(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        fs::write(path, self.to_bytes()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
        Self::from_bytes(&bytes, path)
    }
}
