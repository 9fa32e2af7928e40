//! Experiment files, engine dispatch and CSV output.

mod config;
mod csv;
mod run;

pub use config::{
    emit_config, parse_config, Absorbing, Engine, ExperimentConfig, Model, Reference,
};
pub use csv::{read_rows, write_csv, write_labelled_csv, Provenance, GIT_DESCRIBE};
pub use run::{
    blcheck, fpe_config, reference_survival, robin_params, run_convergence, run_experiment,
    solve_fpe, BlReport, ConvergenceRow, ConvergenceTable, SurvivalCount, DEFAULT_DX_LINE,
    DEFAULT_DX_PLANE, DEFAULT_PLANE,
};
