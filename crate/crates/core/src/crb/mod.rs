//! Cramér-Rao bounds for target positions.
//!
//! Three routes that agree on their common domain: the general multi-target
//! FIM ([`fim_multi`] + [`crb_from_fim`]), the single-target closed form
//! ([`crb_single_wgn`]) and the on-axis UPA sums ([`crb_monostatic_axis`]).

mod closed_form;
mod fim;
mod upa;

pub use closed_form::{crb_single_wgn, single_target_terms, SingleTargetTerms};
pub use fim::{
    crb_from_fim, crb_multi, fim_multi, invert_fim, AxisCrb, CrbReport, FimBlocks, FimResult, NoiseCovariance,
    TransmitCovariance, MAX_FIM_CONDITION,
};
pub use upa::{crb_asymptotic_far, crb_monostatic_axis, upa_sums, AsymptoticCrb, UpaSums};
