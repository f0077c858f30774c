//! Edge node: receives IoT windows over TCP, classifies them and forwards
//! collision events to the Cloud.

mod classify;
mod dispatch;
mod server;

pub use classify::{decide, Classification, ClassifyError, Decider, DecisionPolicy, EdgeClassifier, StageTimings};
pub use dispatch::{read_spool, DeliveryRecord, DeliveryState, Dispatcher, Forwarder, RetryPolicy, Spool, Submitter};
pub use server::{start_edge, EdgeConfig, EdgeHandle, EdgeSummary, WindowRecord};

/// Records the Edge publishes to an in-process observer.
#[derive(Debug, Clone, PartialEq)]
pub enum EdgeObservation {
    Window(WindowRecord),
    Delivery(DeliveryRecord),
    /// A connection ended; `reason` is set when it was dropped on an error.
    Closed { peer: String, reason: Option<String> },
}
