//! Numerical certificates for the two explicit constructions: the bounded web
//! of the series family and the constrained disk forest.

pub mod forest;
pub mod mayer;
pub mod probe;
pub mod web;

pub use forest::{
    choose_forest_params, default_layout, read_spec_csv, uncovered_area, validate_forest_params, write_report_csv,
    write_spec_csv,
    ConstraintReport, ConstraintRow, LayoutDisk,
};
pub use mayer::{mayer_derivative_spotcheck, MayerOptions, MayerReport};
pub use probe::{area_probe, forest_dichotomy, write_probe_csv, AreaProbeResult, DichotomyReport};
pub use web::{
    compute_web_constant, estimate_r0, on_web, sample_web, verify_web_bound, web_points, WebBoundReport, WebSample,
};
