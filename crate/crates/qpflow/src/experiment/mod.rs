//! Config-driven experiment runs: named presets, artifact export, and the
//! manifest of pass/fail verdicts.

pub mod config;
pub mod export;
pub mod presets;

pub use config::{DiagnosticsToggles, DomainSpec, ExperimentConfig, FlowSpec, ModelSpec, OUTPUT_ROOT_ENV};
pub use export::Exporter;
pub use presets::{default_config, list_presets, run_preset, Manifest, PresetInfo, Verdict, PRESETS};
