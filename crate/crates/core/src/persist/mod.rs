//! On-disk formats: bit-exact checkpoints, text feature dumps for
//! data-owner audits, matrix CSV and PGM heatmaps, datasets and splits.

mod checkpoint;
mod heatmap;
mod text;

pub use checkpoint::{
    decode_checkpoint, encode_checkpoint, load_checkpoint, save_checkpoint, FORMAT_VERSION, MAGIC,
};
pub use heatmap::{encode_pgm, gray_level, symmetric_range, write_heatmap_pgm};
pub use text::{
    read_dataset_csv, read_feature_dump, read_matrix_csv, read_splits, write_dataset_csv,
    write_feature_dump, write_matrix_csv, write_splits,
};
