//! Expected improvement and its maximization over mixed (x, o) space.

mod ego;
mod ei;
mod sfta;

pub use ego::{optimize_x_given_o, propose_next, EgoConfig, Proposal};
pub use ei::{ei_closed_form, ei_gradient_x, expected_improvement, Direction};
pub use sfta::{neighbor, sfta, SftaConfig, SftaOutcome};
