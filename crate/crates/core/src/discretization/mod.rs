//! Geometry, finite-element spaces, assembled operators and discrete norms.

pub mod mesh;
pub mod norms;
pub mod quadrature;
pub mod space;

pub use mesh::{build_rect_mesh, BoundaryEdge, BoundaryTag, Segment, Side, TaggedMesh};
pub use norms::{norm, Field, FieldKind, NormKind};
pub use space::{assemble, MixedSpace, Operators, QpField};
