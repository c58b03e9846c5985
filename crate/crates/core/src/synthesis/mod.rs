//! Feedback and observer synthesis: controller form, pole placement,
//! Luenberger observers and the Gramian stabilizer with prescribed decay.

mod observer;
mod placement;
mod poly;
mod stabilizer;

pub use observer::{closed_loop_observer_system, design_observer, ObserverClosedLoop, ObserverGain, ObserverRun};
pub use placement::{controller_form, pole_place, ControllerForm, FeedbackGain};
pub(crate) use placement::place_best;
pub use poly::{characteristic_polynomial, MonicPolynomial};
pub use stabilizer::{gramian_stabilizer, minimal_lambda, GramianStabilizer};
