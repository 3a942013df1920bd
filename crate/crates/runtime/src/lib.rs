//! Runtime support for lamina programs.
//!
//! The crate is used in two ways. As an ordinary library it exposes the value
//! layout, the heap and the collector so the compiler and test harnesses can
//! share them. Built with `--cfg native_runtime` it becomes a `no_std` static
//! archive exporting the `B*`/`L*` entry points that generated assembly calls.

#![cfg_attr(native_runtime, no_std)]

pub mod failure;
#[cfg(not(native_runtime))]
pub mod harness;
pub mod heap;
pub mod layout;
pub mod ops;

#[cfg(native_runtime)]
mod native;

pub use failure::{Failure, FAILURE_EXIT_CODE};
pub use heap::{GcReport, Heap, HeapStats, RootRange, DEFAULT_SPACE_BYTES};
#[cfg(not(native_runtime))]
pub use heap::OwnedHeap;
pub use layout::{fix_decode, fix_encode, pack_tag, wrap63, ObjTag, FIX_MAX, FIX_MIN};

/// Environment variable that sets the size of one heap space in bytes.
pub const HEAP_BYTES_ENV: &str = "LAMINA_HEAP_BYTES";
/// When set to `1`, every collection sweeps for stale pointers and the
/// program aborts if any are found.
pub const GC_VERIFY_ENV: &str = "LAMINA_GC_VERIFY";
/// When set to `1`, heap statistics are printed on standard error at exit.
pub const GC_STATS_ENV: &str = "LAMINA_GC_STATS";
/// Exit code of a binary whose collector detected heap corruption.
pub const GC_CORRUPTION_EXIT_CODE: i32 = 70;
