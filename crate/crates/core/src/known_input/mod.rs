//! Known-input attack: the adversary holds some private records, links them
//! to their released images, samples an estimator uniformly from the set of
//! orthogonal maps consistent with the links and reports the closed-form
//! breach probability of the best candidate record.

mod attack;
pub mod closed_form;
pub mod linking;
mod sampler;

pub use attack::{
    attack_linked, attack_linked_general, known_input_attack, known_input_attack_general,
    BreachReport, CandidateRho, KnownInputOptions,
};
pub use closed_form::{breach_probability, gamma_ratio, sine_integral, BreachProbabilityInputs};
pub use linking::{
    candidate_set, find_maximal_uniquely_valid, is_uniquely_valid, Assignment, LinkResult, Linker,
    LinkingOptions, Validity, DEFAULT_LINK_TOL,
};
pub use sampler::ConstraintSetSampler;
