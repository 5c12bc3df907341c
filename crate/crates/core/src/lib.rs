//! Blocked double-precision GEMM (`C += A * B`) for asymmetric multicores.
//!
//! The computation follows the classic five-loop blocked algorithm with
//! packed `A_c`/`B_c` buffers and an `m_r x n_r` micro-kernel. Threads are
//! grouped into a fast and a slow cluster; the [`scheduler`] decides how the
//! iteration space is split between them:
//!
//! | policy   | coarse split                         | control trees |
//! |----------|--------------------------------------|---------------|
//! | `sss`    | even, Loop 1 or Loop 3               | one           |
//! | `sas`    | fast:slow ratio, Loop 1 or Loop 3    | one           |
//! | `ca-sas` | fast:slow ratio, Loop 1 or Loop 3    | one per class |
//! | `das`    | leader-dispatched Loop 3 chunks      | one           |
//! | `ca-das` | leader-dispatched Loop 3 chunks      | one per class |
//!
//! Inside a cluster Loop 4 and/or Loop 5 are split evenly.
//!
//! See the `examples/` directory of this crate for runnable walkthroughs.

pub mod bench;
pub mod energy;
pub mod engine;
pub mod error;
pub mod kernel;
pub mod matrix;
pub mod model;
pub mod overrides;
pub mod packing;
pub mod profile;
pub mod reference;
pub mod scheduler;
pub mod tuner;

pub use engine::{gemm, gemm_parallel, gemm_sequential, ExecutionStats, GemmRequest};
pub use error::{Error, Result};
pub use matrix::{MatMut, MatRef, Matrix};
pub use model::{
    cache_fit_check, max_mc_for_l2, validate_control_tree, CacheConfig, ClusterSpec, CoarseLoop, ControlTree,
    CoreClass, FineLoops, Range, Ratio, Topology, Violation,
};
pub use scheduler::{make_plan, SchedulingPolicy, Trees, WorkPlan};
