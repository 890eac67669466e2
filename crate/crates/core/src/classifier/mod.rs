//! Seen-class and unseen-class softmax heads and the logistic gate that
//! routes each test sample to one of them.

mod gate;
mod head;
mod routing;

pub use gate::{fit_logistic, train_gate, GateConfig, GateFeatureMode, GateModel, LogisticFit};
pub use head::{train_head, ClassifierHead, HeadConfig};
pub use routing::{classify_zsl, gate_features, gate_features_from_probs, GzslModel, Routed};
