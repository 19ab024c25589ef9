pub mod curate;
pub mod decode;
pub mod distract;
pub mod metrics;
pub mod pipeline;
pub mod stats;
pub mod train;
