//! Monte-Carlo phase-transition sweeps, timing benchmarks, and their file
//! formats.

mod bench;
mod grid;
mod heatmap;
mod sweep;
mod table;

pub use bench::{
    log_log_fit, run_timing_bench, run_timing_bench_with_progress, write_bench_csv, write_bench_csv_to, BenchSpec,
    TimingResult, BENCH_CSV_HEADER, MIN_TIMED_ITERATIONS,
};
pub use grid::Grid;
pub use heatmap::{read_curve, render_pgm, render_svg, ticks_text, write_heatmap, HeatmapOptions, Pgm, RateGrid};
pub use sweep::{realize, run_sweep, run_sweep_with_progress, Cell, CellResult, SweepSpec, TrialFailure};
pub use table::{read_csv, read_csv_from, write_csv, write_csv_to, CSV_HEADER};
