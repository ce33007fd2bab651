//! Life-cycle assessment of AI services and of the net environmental effect
//! of deploying them.
//!
//! A scenario is a set of unit processes linked by economic flows. Solving
//! the technosphere for the functional unit gives a scaling vector, the
//! inventory, and characterized impacts broken down by process, life-cycle
//! stage and tier. Comparing a reference scenario with an AI-enabled one
//! gives the per-category net effect and its decomposition.

pub mod ai_service;
pub mod allocation;
pub mod file;
pub mod finding;
pub mod inventory;
pub mod lci;
pub mod net_benefit;
pub mod report;
pub mod sparse;
pub mod stage;

pub use finding::{Finding, FindingCode, Severity};
pub use inventory::{build_scenario, FlowSpec, FunctionalUnit, Scenario, ScenarioParts, Tier, UnitProcess};
pub use lci::{assess, AssessmentResult, CharacterizationTable, ImpactCategory, ImpactVector};
pub use net_benefit::{compare, decompose, ComparisonResult, Verdict};
pub use stage::{LifeCycleStage, StageId, SubProcess};

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../README.md")]
    mod readme {}
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/inventory.md")]
    mod inventory {}
    #[doc = include_str!("../../../book/src/allocation.md")]
    mod allocation {}
    #[doc = include_str!("../../../book/src/assessment.md")]
    mod assessment {}
    #[doc = include_str!("../../../book/src/ai-services.md")]
    mod ai_services {}
    #[doc = include_str!("../../../book/src/net-benefit.md")]
    mod net_benefit {}
    #[doc = include_str!("../../../book/src/cli.md")]
    mod cli {}
}
