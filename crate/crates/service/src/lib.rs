//! Stage runner, project file and HTTP API for the implant design pipeline.

pub mod api;
pub mod error;
pub mod project;
pub mod stages;
pub mod synth;

pub use error::ServiceError;
pub use project::{load_project, save_project, Project, Stage};
pub use stages::{evaluate_implant, EvaluationReport, Verdict, Workspace};
