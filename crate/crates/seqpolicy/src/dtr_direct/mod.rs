//! Direct policy search: importance-weighted value estimation (MC, IPTW,
//! AIPTW), soft-max policy search, outcome-weighted learning (OWL, BOWL,
//! SOWL), and V-learning for indefinite horizons.

mod owl;
mod softmax_search;
mod sowl;
mod value;
mod vlearn;

pub use owl::{bowl_fit, owl_fit, BowlFit, LinearDecisionFn, OwlFit, OwlOptions};
pub use softmax_search::{policy_search_softmax, SoftmaxSearchOptions, SoftmaxSearchResult};
pub use sowl::{sowl_fit, sowl_surrogate, SowlFit, SowlOptions};
pub use value::{
    estimate_value_aiptw, estimate_value_iptw, estimate_value_mc, ValueEstimate,
};
pub use vlearn::{
    vlearn_fit, vlearn_policy_search, VLearnFit, VLearnModel, VLearnOptions, VLearnSearchResult,
};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum DirectError {
    #[error("positivity violated at stage {stage} of unit {unit}: probability {prob}")]
    Positivity {
        unit: String,
        stage: usize,
        prob: f64,
    },

    #[error("degenerate overlap: every trajectory weight is zero")]
    DegenerateOverlap,

    #[error("sample depletion at stage {stage}: no trajectory follows the later-stage rules (retained per stage so far: {retained:?})")]
    SampleDepletion { stage: usize, retained: Vec<usize> },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("{0}")]
    UnsupportedData(String),

    #[error(transparent)]
    Core(#[from] crate::core::CoreError),

    #[error(transparent)]
    Numerics(#[from] crate::numerics::NumericsError),
}
