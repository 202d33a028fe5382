pub mod align;
pub mod cli;
pub mod corpus;
pub mod metrics;
pub mod model;
pub mod rst;
pub mod trainer;
pub mod vocab;
