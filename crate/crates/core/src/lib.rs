//! Exact-arithmetic toolkit for the moving coefficients method: hypersurface
//! systems, determinantal symmetric differential forms, exponent schedules and
//! a finite-field codimension oracle for rank-condition varieties.

pub mod baselocus;
pub mod error;
pub mod hypersurfaces;
pub mod linalg;
pub mod mcm_schedule;
pub mod polyring;
pub mod codim_oracle;
pub mod rng;
pub mod symforms;

pub use error::{McmError, Result};
pub use mcm_schedule::{build_schedule, McmConfig, McmSchedule, ScheduleMode, Selection, TwistDegree, Variant};
