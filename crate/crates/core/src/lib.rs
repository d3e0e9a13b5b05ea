//! Vulnerability-centric risk scoring and patch prioritisation.
//!
//! A [`model::SystemModel`] describes hosts, assets, their software
//! components and known vulnerabilities, and how components depend on one
//! another. [`risk`] scores it at every level and [`rank`] orders patches
//! by how much system risk they remove.

pub mod enrich;
pub mod error;
pub mod graph;
pub mod model;
pub mod rank;
pub mod report;
pub mod risk;

pub use error::{Error, Result};
pub use model::{load_system_model, parse_system_model, RiskParams, SystemModel};
pub use rank::{rank_patches, what_if, PatchRanking, RankScope};
pub use risk::{system_risk, RiskContext, RiskReport};
