//! Hand–object contact detection, contact summaries, and grasp filtering.

mod detect;
mod filter;
mod summary;

pub use detect::{detect_contacts, ContactPattern, ContactRecord, LinkContact, DEFAULT_EPSILON, UNLABELED_PART};
pub use filter::{
    filter_by_penetration, select_grasps_per_pattern, PenetrationVerdict, DEFAULT_PENETRATION_THRESHOLD,
    DEFAULT_PER_PATTERN_DEXTEROUS, DEFAULT_PER_PATTERN_GRIPPER,
};
pub use summary::{count_word, finger_order, summarize_contacts, ContactSummary, FingerPart, SummaryMode, PALM};


#[derive(Debug, thiserror::Error)]
pub enum ContactError {
    #[error("{what} must be positive, got {value}")]
    NonPositive { what: &'static str, value: f64 },
    #[error("no-contact grasp")]
    NoContact,
}
