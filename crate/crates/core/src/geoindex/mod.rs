//! UTM grid partitioning, the canonical-altitude reference database and exact
//! nearest-neighbor search.

mod grid;
mod index;

pub use grid::{cell_of, group_of, CellId, GridSpec, GroupId};
pub use index::{tile_centers, GeoIndex, IndexBuild, IndexEntry, RetrievalResult, INDEX_MAGIC, INDEX_VERSION};
