//! Typed graph model: schema, edge ingestion, per-relation transition
//! distributions and constant-time neighbor sampling.

mod alias;
mod graph;
mod io;
mod schema;

use std::fmt;

pub use alias::{AliasTable, AliasTables};
pub use graph::{Direction, EdgeRecord, GraphBuilder, HetGraph, Neighbor, StoredEdge};
pub use schema::{GraphSchema, RelationType};

macro_rules! dense_id {
    ($(#[$m:meta])* $name:ident) => {
        $(#[$m])*
        #[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
        pub struct $name(pub u32);

        impl $name {
            #[inline]
            pub fn index(self) -> usize {
                self.0 as usize
            }
        }

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                write!(f, "{}", self.0)
            }
        }
    };
}

dense_id!(
    /// Dense internal vertex index. Never written to files.
    VertexId
);
dense_id!(VertexTypeId);
dense_id!(RelId);
