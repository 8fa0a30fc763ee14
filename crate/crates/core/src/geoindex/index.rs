use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::grid::{CellId, GridSpec, GroupId};
use crate::codec::{PutLe, Reader};
use crate::error::{Error, Result};
use crate::image::RgbImage;
use crate::spectra::{Descriptor, DescriptorConfig};
use crate::synthmap::{footprint, render_view, CameraIntrinsics, GeoRaster, Utm};

pub const INDEX_MAGIC: &[u8; 4] = b"ALGX";
pub const INDEX_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct IndexEntry {
    /// Unit-norm descriptor, rounded through f32 so a saved index reloads exactly.
    pub descriptor: Vec<f64>,
    pub utm: Utm,
    pub cell: CellId,
}

/// Reference database of canonical-altitude tiles filed by grid cell.
#[derive(Debug, Clone, PartialEq)]
pub struct GeoIndex {
    entries: Vec<IndexEntry>,
    cells: BTreeMap<CellId, Vec<usize>>,
    groups: BTreeMap<GroupId, Vec<CellId>>,
    cell_size_m: f64,
    group_modulus: u16,
    h_db: f64,
    stride_m: f64,
    descriptor: DescriptorConfig,
    input_size: (usize, usize),
}

/// Tile centers on a `stride`-spaced lattice whose footprints fit the raster,
/// row-major from the north-west corner.
pub fn tile_centers(raster: &GeoRaster, fp_w: f64, fp_h: f64, stride: f64) -> Vec<Utm> {
    let (west, east, south, north) = raster.bounds();
    let count = |extent: f64, fp: f64| -> usize {
        if fp > extent + 1e-9 {
            0
        } else {
            ((extent - fp) / stride + 1e-9).floor() as usize + 1
        }
    };
    let nx = count(east - west, fp_w);
    let ny = count(north - south, fp_h);
    let mut out = Vec::with_capacity(nx * ny);
    for j in 0..ny {
        for i in 0..nx {
            out.push(Utm::new(
                west + fp_w / 2.0 + i as f64 * stride,
                north - fp_h / 2.0 - j as f64 * stride,
            ));
        }
    }
    out
}

pub struct IndexBuild<'a> {
    pub raster: &'a GeoRaster,
    pub grid: &'a GridSpec,
    pub h_db: f64,
    pub stride_m: f64,
    pub intrinsics: &'a CameraIntrinsics,
    /// Pixel size each tile is rendered at before `describe` sees it.
    pub render_size: (usize, usize),
    pub descriptor: DescriptorConfig,
    /// Size the descriptor is computed at; recorded in the index file.
    pub input_size: (usize, usize),
}

impl GeoIndex {
    /// Renders every lattice tile at `h_db`, describes it and files it under
    /// its cell. Tiles are processed in lattice order.
    pub fn build(spec: &IndexBuild, mut describe: impl FnMut(&RgbImage) -> Result<Descriptor>) -> Result<Self> {
        spec.grid.validate()?;
        if !(spec.stride_m > 0.0 && spec.stride_m.is_finite()) {
            return Err(Error::Config(format!("stride must be > 0, got {}", spec.stride_m)));
        }
        let fp = footprint(spec.intrinsics, spec.h_db)?;
        let centers = tile_centers(spec.raster, fp.width_m, fp.height_m, spec.stride_m);
        if centers.is_empty() {
            return Err(Error::Unsatisfiable(format!(
                "no {:.1} m × {:.1} m tile fits the raster",
                fp.width_m, fp.height_m
            )));
        }
        let mut entries = Vec::with_capacity(centers.len());
        for c in centers {
            let tile = render_view(spec.raster, c, spec.h_db, spec.intrinsics, spec.render_size.0, spec.render_size.1)?;
            let d = describe(&tile)?;
            if d.dim() != spec.descriptor.dim() {
                return Err(Error::shape(format!("{}-dimensional descriptor", spec.descriptor.dim()), d.dim()));
            }
            entries.push(IndexEntry {
                descriptor: d.values.iter().map(|&v| v as f32 as f64).collect(),
                utm: c,
                cell: spec.grid.cell_of(c),
            });
        }
        Self::from_entries(
            entries,
            spec.grid.cell_size_m,
            spec.grid.group_modulus,
            spec.h_db,
            spec.stride_m,
            spec.descriptor,
            spec.input_size,
        )
    }

    #[allow(clippy::too_many_arguments)]
    pub fn from_entries(
        entries: Vec<IndexEntry>,
        cell_size_m: f64,
        group_modulus: u16,
        h_db: f64,
        stride_m: f64,
        descriptor: DescriptorConfig,
        input_size: (usize, usize),
    ) -> Result<Self> {
        let d = descriptor.dim();
        let mut cells: BTreeMap<CellId, Vec<usize>> = BTreeMap::new();
        for (i, e) in entries.iter().enumerate() {
            if e.descriptor.len() != d {
                return Err(Error::shape(format!("{d}-dimensional entry"), format!("entry {i} with {}", e.descriptor.len())));
            }
            let want = super::cell_of(e.utm, cell_size_m);
            if want != e.cell {
                return Err(Error::Mismatch(format!(
                    "entry {i} at ({}, {}) is filed under {:?} but lies in {:?}",
                    e.utm.easting, e.utm.northing, e.cell, want
                )));
            }
            cells.entry(e.cell).or_default().push(i);
        }
        let mut groups: BTreeMap<GroupId, Vec<CellId>> = BTreeMap::new();
        for &c in cells.keys() {
            groups.entry(super::group_of(c, group_modulus)).or_default().push(c);
        }
        Ok(Self {
            entries,
            cells,
            groups,
            cell_size_m,
            group_modulus,
            h_db,
            stride_m,
            descriptor,
            input_size,
        })
    }

    pub fn entries(&self) -> &[IndexEntry] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.descriptor.dim()
    }

    pub fn cell_directory(&self) -> &BTreeMap<CellId, Vec<usize>> {
        &self.cells
    }

    pub fn group_directory(&self) -> &BTreeMap<GroupId, Vec<CellId>> {
        &self.groups
    }

    pub fn cell_size_m(&self) -> f64 {
        self.cell_size_m
    }

    pub fn group_modulus(&self) -> u16 {
        self.group_modulus
    }

    pub fn h_db(&self) -> f64 {
        self.h_db
    }

    pub fn stride_m(&self) -> f64 {
        self.stride_m
    }

    pub fn descriptor_config(&self) -> &DescriptorConfig {
        &self.descriptor
    }

    pub fn input_size(&self) -> (usize, usize) {
        self.input_size
    }

    /// Sorted, deduplicated union of the cells' entries; unknown cells add nothing.
    pub fn subdb_union(&self, cells: &[CellId]) -> Vec<usize> {
        let mut out: Vec<usize> = cells
            .iter()
            .filter_map(|c| self.cells.get(c))
            .flatten()
            .copied()
            .collect();
        out.sort_unstable();
        out.dedup();
        out
    }

    /// Exact k-nearest entries among `candidates` by Euclidean distance,
    /// ascending, ties by entry index.
    pub fn search(&self, query: &[f64], candidates: &[usize], n_retrieve: usize) -> Result<RetrievalResult> {
        if candidates.is_empty() {
            return Err(Error::Retrieval("candidate set is empty".into()));
        }
        if query.len() != self.dim() {
            return Err(Error::Mismatch(format!(
                "query has {} dimensions, index holds {}",
                query.len(),
                self.dim()
            )));
        }
        let mut scored: Vec<(f64, usize)> = candidates
            .iter()
            .map(|&i| (euclidean(query, &self.entries[i].descriptor), i))
            .collect();
        let k = n_retrieve.min(scored.len());
        let cmp = |a: &(f64, usize), b: &(f64, usize)| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1));
        if k < scored.len() {
            scored.select_nth_unstable_by(k, cmp);
            scored.truncate(k);
        }
        scored.sort_unstable_by(cmp);
        Ok(RetrievalResult {
            indices: scored.iter().map(|s| s.1).collect(),
            coords: scored.iter().map(|s| self.entries[s.1].utm).collect(),
            distances: scored.iter().map(|s| s.0).collect(),
        })
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        out.extend_from_slice(INDEX_MAGIC);
        out.put_u32(INDEX_VERSION);
        out.put_u32(self.dim() as u32);
        out.put_u64(self.entries.len() as u64);
        out.put_f64(self.cell_size_m);
        out.put_u16(self.group_modulus);
        out.put_f64(self.h_db);
        out.put_f64(self.stride_m);
        for e in &self.entries {
            out.put_f64(e.utm.easting);
            out.put_f64(e.utm.northing);
            out.put_i64(e.cell.e);
            out.put_i64(e.cell.n);
            e.descriptor.iter().for_each(|&v| out.put_f32(v as f32));
        }
        self.descriptor.encode(&mut out);
        out.put_u32(self.input_size.0 as u32);
        out.put_u32(self.input_size.1 as u32);
        out
    }

    pub fn from_bytes(bytes: &[u8], path: &Path) -> Result<Self> {
        let mut r = Reader::new(bytes, path);
        if r.take(4, "magic")? != INDEX_MAGIC {
            return Err(r.error("not an ALGX index file"));
        }
        let version = r.u32()?;
        if version != INDEX_VERSION {
            return Err(r.error(format!("unsupported index version {version}")));
        }
        let d = r.u32()? as usize;
        let count = r.u64()? as usize;
        let cell_size_m = r.f64()?;
        let group_modulus = r.u16()?;
        let h_db = r.f64()?;
        let stride_m = r.f64()?;
        let per_entry = 32 + 4 * d;
        if count.checked_mul(per_entry).is_none_or(|n| n > r.remaining()) {
            return Err(r.error(format!("{count} entries of {per_entry} bytes exceed the file")));
        }
        let mut entries = Vec::with_capacity(count);
        for _ in 0..count {
            let utm = Utm::new(r.f64()?, r.f64()?);
            let cell = CellId::new(r.i64()?, r.i64()?);
            let descriptor = r.f32_vec(d)?.into_iter().map(f64::from).collect();
            entries.push(IndexEntry { descriptor, utm, cell });
        }
        let descriptor = DescriptorConfig::decode(&mut r)?;
        let input_size = (r.u32()? as usize, r.u32()? as usize);
        if r.remaining() != 0 {
            return Err(r.error(format!("{} trailing bytes", r.remaining())));
        }
        if descriptor.dim() != d {
            return Err(r.error(format!("header says d = {d}, descriptor layout gives {}", descriptor.dim())));
        }
        if !(cell_size_m > 0.0) || group_modulus == 0 {
            return Err(r.error("invalid grid parameters"));
        }
        Self::from_entries(entries, cell_size_m, group_modulus, h_db, stride_m, descriptor, input_size)
    }

    /// `<index>.toc`
    pub fn toc_path(index: &Path) -> PathBuf {
        let mut s = index.as_os_str().to_owned();
        s.push(".toc");
        PathBuf::from(s)
    }

    /// Per-cell entry counts, one CSV row per cell in cell order.
    pub fn toc(&self) -> String {
        let mut out = String::from("e_i,n_j,u,v,entries\n");
        for (c, list) in &self.cells {
            let g = super::group_of(*c, self.group_modulus);
            writeln!(out, "{},{},{},{},{}", c.e, c.n, g.u, g.v, list.len()).unwrap();
        }
        out
    }

    /// Writes the index and its `.toc` next to it.
    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        fs::write(path, self.to_bytes()).map_err(|e| Error::io(path, e))?;
        let toc = Self::toc_path(path);
        fs::write(&toc, self.toc()).map_err(|e| Error::io(&toc, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
        Self::from_bytes(&bytes, path)
    }
}

pub(crate) fn euclidean(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RetrievalResult {
    /// Entry indices, nearest first.
    pub indices: Vec<usize>,
    pub coords: Vec<Utm>,
    pub distances: Vec<f64>,
}

impl RetrievalResult {
    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }
}
