//! Files and the stage pipeline: NPY arrays, the JSON run config, CSV
//! reports and `generate -> explain -> evaluate -> rank -> meta -> report`.
//!
//! Output tree of a run:
//!
//! ```text
//! manifest.json           format version, config hash, seed
//! config.json             effective config
//! data/<d>/               inputs.npy, labels.npy, pool.npy
//! models/<d>/<a>/         architecture.json, weights.npy
//! maps/                   manifest.json, <d>/<a>/targets.npy, <d>/<a>/<method>.npy
//! scores/                 manifest.json, scores.npy, mask.npy
//! rankings/               <criterion>.csv, tables.json
//! meta/                   meta.json, one CSV per matrix
//! report/                 ranking_<criterion>.csv, meta_*.csv, report.txt
//! ```

pub mod config;
pub mod npy;
mod pipeline;
pub mod report;

pub use config::{ArchitectureKind, ArchitectureSpec, DatasetSpec, IngestSpec, RunConfig};
pub use npy::{read_array, read_npy, write_array, write_npy, NpyArray, NpyData};
pub use pipeline::{
    read_rankings, read_scores, run_all, run_stage, write_scores, MapEntry, MapsManifest, RunOptions, ScoreManifest, Stage,
    TargetEntry,
};
