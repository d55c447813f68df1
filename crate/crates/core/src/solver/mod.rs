//! Pseudospectral time integration of the coupled system on a periodic box.

mod norms;
mod run;
mod state;
mod stepper;

pub use norms::{field_norms, max_abs, norms, parseval, FieldNorms, Norms};
pub use run::{norms_row, run, Diagnostics, HistoryRow, RunControls, RunOutcome, RunStatus, SampleCadence};
pub use state::{make_initial_data, FieldState, InitialData};
pub use stepper::{nonlinearity, Physical, StepOutput, Stepper};
