//! Covers, partitions of unity and the constructive sheaf and cosheaf checks.

pub mod cosheaf;
pub mod cover;
pub mod family;
pub mod flabby;
pub mod glue;
pub mod mv;

pub use cosheaf::{cosheaf_decompose, cosheaf_reassemble, CompactSection};
pub use cover::{build_pou, Cover, PartitionOfUnity, POU_GRID, POU_GRID_TOL};
pub use flabby::{flabby_check, flabby_ranks, FlabbyOutcome, SpaceTag};
pub use glue::{check_compatible, section_residual, sheaf_glue, sheaf_glue_auto, GlobalSection};
pub use mv::{mv_phi, mv_psi, mv_split};
