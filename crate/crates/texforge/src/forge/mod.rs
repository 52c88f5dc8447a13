//! Synthetic paired-data forge.
//!
//! Builds procedural materials and garment meshes, renders each material both
//! draped (condition) and flat (target), and writes the result as a manifest
//! of training pairs. Print materials pair the draped render with the source
//! RGBA print instead of a flat render.

pub mod assets;
pub mod manifest;
pub mod pairs;
pub mod print;
pub mod pseudo;

pub use assets::{albedo_preset, print_preset, wrinkled_mesh, ALBEDO_PRESETS, PRINT_PRESETS};
pub use manifest::{
    check_material_disjointness, load_dataset, read_manifest_file, write_manifest, LoadedDataset,
    LoadedPair, Manifest, ManifestEntry, MANIFEST_SCHEMA_VERSION,
};
pub use pairs::{
    forge_pairs, hash_image, ForgeAsset, ForgeConfig, ForgeOutput, PairKind, PairedExample,
    SkipRecord, Split, MAX_SKIP_RATE,
};
pub use print::{make_print_material, UvRect};
pub use pseudo::{make_pseudo_brdf, sample_pseudo_response, PseudoResponse};
