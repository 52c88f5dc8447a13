//! Scene rendering: meshes, cameras, environment lighting, the garment and
//! flat-target renderers, and patch capture.

pub mod camera;
pub mod capture;
pub mod envmap;
pub mod flat;
pub mod garment;
pub mod mesh;

pub use camera::{Camera, Projection, Ray};
pub use capture::{capture_patch, CropRect, MIN_PATCH_COVERAGE};
pub use envmap::{EnvironmentMap, ENV_PRESETS};
pub use flat::{render_flat, FlatRenderParams};
pub use garment::{render_garment, GarmentRenderParams, RenderedView};
pub use mesh::{load_mesh, GarmentMesh};
