//! Experiment orchestration: seeded Monte-Carlo FER sweeps, EXIT
//! trajectories, operation-count reports and configuration handling.

mod complexity;
mod config;
mod exit;
mod sim;

pub use complexity::{
    analytic_counts, complexity_report, measured_counts, table4, write_complexity_csv,
    ComplexityRow, Table4Check, TABLE4_EXPECTED,
};
pub use config::{DetectorKind, LinkConfig};
pub use exit::{
    decoder_curve_path, decoder_transfer, default_exit_ebn0, exit_trajectory, gaussian_llrs,
    j_function, j_inverse, mutual_information, write_exit_csv, DecoderPoint, ExitPoint, ExitReport,
};
pub use sim::{
    frame_rng, read_fer_csv, run_fer_point, run_fer_point_with, run_sweep, snr_at_fer,
    write_fer_csv, FerCsvRow, FerRecord, FrameOutcome, Link, TurboStep, NOMINAL_RATE,
};
