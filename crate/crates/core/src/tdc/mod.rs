//! Tree-based decoder-centric search for latent holes.
//!
//! The training set is encoded and projected onto its top `d_r` principal axes. A
//! fence (the bounding box of `d_r` random projected training codes) delimits the
//! search. Starting from a random root, each depth of a breadth-first search walks the
//! axis-parallel lines through the current hubs, samples them at a fixed step, lifts
//! the samples back to the latent space and decodes them. Pairs whose Lipschitz ratio
//! exceeds the IQR fence of all ratios seen so far mark holes, and holes become the
//! hubs of the next depth. An empty hub set starts a new tree from a fresh root; the
//! search halts once `n_hole` holes are found or the path budget runs out.
//!
//! Paths of one depth are evaluated in parallel and merged in canonical order, so a
//! run depends only on its configuration, never on the worker count.

mod fence;
mod io;
mod outlier;
mod path;
mod run;

pub use fence::{build_fence, interpolation_interval, Fence};
pub use io::{
    read_holes_jsonl, read_report_json, read_trace_csv, write_holes_jsonl, write_report_json, write_trace_csv,
};
pub use outlier::{outlier_fence, outlier_fence_floored};
pub use path::{enumerate_paths, evaluate_path, sample_positions, IndicatorTrace, Path, PathKey};
pub use run::{
    prepare, run_tdc, run_tdc_traced, HoleRecord, Prepared, RunConfig, RunMeta, RunReport, RunStatus, TraceRow,
};
