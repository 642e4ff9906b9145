pub mod ingest;
pub mod model;
pub mod reconcile;
pub mod report;
pub mod simulate;
pub mod stats;
