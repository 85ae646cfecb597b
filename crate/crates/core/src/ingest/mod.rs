//! Dataset records, mask-to-layout extraction and format converters.

mod components;
mod convert;
mod dataset;
mod extract;
pub mod npy;
mod sizes;

pub use components::{class_component_counts, label_components};
pub use convert::{convert, ConvertOptions, ConvertReport, SourceFormat};
pub use dataset::{
    pack_mask, read_vocabulary, size_statistics, unpack_mask, write_record, write_vocabulary, Dataset,
    DatasetRecord, MAX_INSTANCES,
};
pub(crate) use extract::splitmix64;
pub use extract::{extract_layout_from_mask, render_box_masks, resize_binary, Extraction, CELL_MASK_SIZE};
pub use sizes::{SizeStatistics, TypeSize};
