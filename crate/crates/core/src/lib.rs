//! Probabilistic repair planning for hierarchical component models.

pub mod compile;
pub mod fixtures;
pub mod flatplan;
pub mod hierplan;
pub mod model;
pub mod netinfer;
pub mod oracle;
pub mod space;
