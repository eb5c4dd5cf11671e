//! Hypothesis-space construction: bottom rules, generalisation, coverage
//! signatures and the opt-sufficient space.

mod bottom;
mod signature;
mod space;

pub use bottom::{BottomRule, Origin, Sign};
pub use signature::{generalise, CoverageSignature, SignatureLayout, Synthesis, TableLayout};
pub use space::{OptSufficientSpace, SpaceFile, SpaceFileRule, SpaceRule, SpaceStats, SynthesisConfig, SPACE_SCHEMA};
