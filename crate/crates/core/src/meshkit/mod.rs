//! Triangle meshes: OBJ I/O, boundary loops, erosion, surface sampling,
//! normalization and voxel occupancy.

pub mod erosion;
pub mod loops;
pub mod mesh;
pub mod obj;
pub mod sampling;
pub mod shapes;
pub mod voxel;

pub use erosion::{boundary_distances, erode_cloud, erode_part, ErosionConfig};
pub use loops::{boundary_loops, BoundaryLoop};
pub use mesh::{weld, weld_topological, TriMesh};
pub use obj::{load_mesh, save_mesh, ObjData};
pub use sampling::{normalize_cloud, normalizing_transform, sample_surface, PointCloud, SampleMode};
pub use voxel::{dilate, voxel_occupancy, GridSpec, InsideTester, OccupancyGrid};
