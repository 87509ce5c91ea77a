//! Configuration, verification suites, sweeps and their on-disk artefacts.

pub mod config;
pub mod diagnostics;
pub mod golden;
pub mod io;
pub mod suites;
pub mod sweep;

pub use config::{RunConfig, Suite, Tolerances};
pub use diagnostics::{read_jsonl, Diagnostics, DiagnosticsRecord};
pub use golden::{Golden, GoldenCheck};
pub use io::{read_tuple, write_tuple, TupleManifest};
pub use suites::{mikado_identities, run_suite, MikadoIdentities, SuiteOutcome};
pub use sweep::{estimate_sweep, SweepAxis, SweepResult, SweepRow, SweepSpec};
