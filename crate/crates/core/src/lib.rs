//! Scale-adjusted ordered logit models of stated purchase quantities.
//!
//! Respondents state how many units (0 to 10) of each product they would buy.
//! The latent index `W = ASC + β·x + γ·z` is mapped to quantities through ten
//! ordered thresholds divided by a per-(cut, season) scale. The crate covers
//! design generation, estimation, pooling tests, willingness to pay and
//! purchase forecasts. It needs only `alloc`.

#![no_std]
#![forbid(unsafe_code)]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod covariates;
pub mod dataset;
pub mod design;
pub mod error;
pub mod estimate;
pub mod likelihood;
pub mod linalg;
pub mod math;
pub mod model;
pub mod optim;
pub mod pooling;
pub mod schema;
pub mod simulate;
pub mod stats;
pub mod synth;
pub mod wtp;

pub use covariates::{CovariateCoder, Population, RespondentProfile};
pub use dataset::{ChoiceObservation, Dataset, CATEGORIES, MAX_QUANTITY};
pub use error::{Error, Result};
pub use estimate::{fit, prune, EstimationResult, FitOptions};
pub use model::{BindingKind, BindingRule, Model, ModelSpec, ParameterSet, ScaleLayout, ThresholdLayout};
pub use schema::{AttributeSchema, Cell, DesignRow, LevelValue, Product, Season};
