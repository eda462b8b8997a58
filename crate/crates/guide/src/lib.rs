//! The covprob guide. Each chapter of `book/` is a module here so that its
//! code blocks run as doc-tests.

use covprob::dsl::{parse_model, parse_profile};
use covprob::model::{SystemModel, UsageProfile};

pub const ENERGY_MODEL: &str = include_str!("../../core/fixtures/energy_small.quac");
pub const ENERGY_PROFILE: &str = include_str!("../../core/fixtures/usage_small.quac");

/// The wind turbine model and its one-round profile.
pub fn running_example() -> (SystemModel, UsageProfile) {
    (parse_model(ENERGY_MODEL).unwrap(), parse_profile(ENERGY_PROFILE).unwrap())
}

#[doc = include_str!("../../../book/src/introduction.md")]
pub mod introduction {}

#[doc = include_str!("../../../book/src/modeling.md")]
pub mod modeling {}

#[doc = include_str!("../../../book/src/profiles.md")]
pub mod profiles {}

#[doc = include_str!("../../../book/src/analyses.md")]
pub mod analyses {}

#[doc = include_str!("../../../book/src/regions.md")]
pub mod regions {}

#[doc = include_str!("../../../book/src/cli.md")]
pub mod cli {}
