//! Simulation of hypothesis-transfer-learning (HTL) analytics at the network edge.
//!
//! Sensors stream observations to mobile data mules (over IEEE 802.15.4) or to an edge
//! server (over NB-IoT). After every collection window the collectors learn a shared linear
//! classifier with one of two HTL protocols, and every radio transmission is charged to an
//! energy ledger. The crate is organised bottom-up:
//!
//! * [`dataset`]: CovType ingestion, balancing, splitting, standardization and window streams.
//! * [`learning`]: linear models, the SVM base learner, GreedyTL, averaging and entropy.
//! * [`scenario`]: mule population draws, Zipf/uniform allocation and the aggregation heuristic.
//! * [`energy`]: the wireless catalog, per-transmission energy and the accounting policy.
//! * [`protocol`]: per-window orchestration of EdgeOnly, A2AHTL and StarHTL.
//! * [`metrics`]: precision, recall, F-measure and replication statistics.
//! * [`experiment`]: configuration, presets and the replicated experiment runner.

pub mod dataset;
pub mod energy;
pub mod error;
pub mod experiment;
pub mod learning;
pub mod metrics;
pub mod par;
pub mod protocol;
pub mod rng;
pub mod scenario;

pub use error::{Error, Result};
