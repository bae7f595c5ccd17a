//! Default numerical settings, collected in one place.
//!
//! | name                   | value  | used by                                        |
//! |------------------------|--------|------------------------------------------------|
//! | `INTEGRATION_TOL`      | 1e-9   | adaptive profile integration (rtol = atol)      |
//! | `X_START_REL`          | 1e-3   | series handoff abscissa, relative to b          |
//! | `X_MAX_REL`            | 4      | integration horizon, relative to b              |
//! | `S_MAX_REL`            | 10     | arclength budget, relative to max(x_max, b)     |
//! | `SLOPE_SWITCH`         | 10     | graph to parametric switch threshold on abs(γ′) |
//! | `ISOTHERMAL_TOL`       | 1e-13  | integration of the conformal coordinate         |
//! | `UMBILIC_REL`          | 1e-14  | umbilic classification, see `rotgeom`           |
//! | `TOL_SPH`              | 1e-8   | sphere-coincidence criterion                    |
//! | `SPHERE_RESIDUAL_REL`  | 1e-10  | accepted residual of the sphere-radius equation |
//! | `R_BRACKET_REL`        | 1e6    | radius search interval, relative to the scale   |
//! | `RATIO_FLOOR`          | 1e-12  | defects this small count as converged           |
//! | `HOPF_DEFECT_MAX`      | 1e-5   | identity defects accepted at the coarse step    |
//! | `HOPF_ORDER_FACTOR`    | 3.5    | required defect reduction when the step halves  |
//! | `HOPF_STEP`            | 1e-3   | default conformal grid step of the suite        |
//!
//! The command-line front end lets `SOLITONLAB_TOL` override `INTEGRATION_TOL`.

pub const INTEGRATION_TOL: f64 = 1e-9;
pub const X_START_REL: f64 = 1e-3;
pub const X_MAX_REL: f64 = 4.0;
pub const S_MAX_REL: f64 = 10.0;
pub const SLOPE_SWITCH: f64 = 10.0;
pub const ISOTHERMAL_TOL: f64 = 1e-13;
pub use crate::rotgeom::UMBILIC_REL;
pub const TOL_SPH: f64 = 1e-8;
pub const SPHERE_RESIDUAL_REL: f64 = 1e-10;
pub const R_BRACKET_REL: f64 = 1e6;
pub const RATIO_FLOOR: f64 = 1e-12;
pub const HOPF_DEFECT_MAX: f64 = 1e-5;
pub const HOPF_ORDER_FACTOR: f64 = 3.5;
pub const HOPF_STEP: f64 = 1e-3;
