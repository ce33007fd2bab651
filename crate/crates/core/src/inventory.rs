//! Life-cycle inventory model: flows, unit processes, functional units and
//! scenarios, and the technosphere/intervention matrices built from them.
//!
//! Sign conventions: in the technosphere matrix production is positive and
//! consumption negative; in the intervention matrix emissions are positive
//! and extractions negative.
//!
//! Canonical ordering: economic and environmental flows are sorted by id.
//! Process columns are ordered by the id of the economic flow they produce,
//! so column `j` of the technosphere matrix is the producer of row `j` and
//! the production entries sit on the diagonal.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::finding::{Finding, FindingCode};
use crate::sparse::CscMatrix;
use crate::stage::LifeCycleStage;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    /// Technosphere to biosphere.
    Emission,
    /// Biosphere to technosphere.
    Extraction,
}

impl Direction {
    /// +1 for emissions, -1 for extractions.
    pub fn sign(self) -> f64 {
        match self {
            Direction::Emission => 1.0,
            Direction::Extraction => -1.0,
        }
    }
}

/// Economic flows link processes; environmental flows cross the
/// technosphere boundary and always have a direction.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum FlowKind {
    Economic,
    Environmental(Direction),
}

impl FlowKind {
    pub fn is_economic(self) -> bool {
        matches!(self, FlowKind::Economic)
    }

    pub fn direction(self) -> Option<Direction> {
        match self {
            FlowKind::Economic => None,
            FlowKind::Environmental(d) => Some(d),
        }
    }
}

impl fmt::Display for FlowKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            FlowKind::Economic => "economic",
            FlowKind::Environmental(_) => "environmental",
        })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct FlowSpec {
    pub id: String,
    pub name: String,
    pub kind: FlowKind,
    /// Opaque unit label; only compared for equality.
    pub unit: String,
}

impl FlowSpec {
    pub fn economic(id: impl Into<String>, unit: impl Into<String>) -> Self {
        let id = id.into();
        FlowSpec {
            name: id.clone(),
            id,
            kind: FlowKind::Economic,
            unit: unit.into(),
        }
    }

    pub fn emission(id: impl Into<String>, unit: impl Into<String>) -> Self {
        Self::environmental(id, unit, Direction::Emission)
    }

    pub fn extraction(id: impl Into<String>, unit: impl Into<String>) -> Self {
        Self::environmental(id, unit, Direction::Extraction)
    }

    pub fn environmental(id: impl Into<String>, unit: impl Into<String>, direction: Direction) -> Self {
        let id = id.into();
        FlowSpec {
            name: id.clone(),
            id,
            kind: FlowKind::Environmental(direction),
            unit: unit.into(),
        }
    }

    pub fn named(mut self, name: impl Into<String>) -> Self {
        self.name = name.into();
        self
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Tier {
    Terminal,
    Network,
    DataCenter,
}

impl Tier {
    pub fn label(self) -> &'static str {
        match self {
            Tier::Terminal => "terminal",
            Tier::Network => "network",
            Tier::DataCenter => "data_center",
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct UnitProcess {
    pub id: String,
    pub name: String,
    pub stage: LifeCycleStage,
    pub tier: Option<Tier>,
    /// Part of the AI service sub-scope.
    pub ai_tagged: bool,
    /// Signed quantity per unit operation: positive produced, negative consumed.
    pub economic_exchanges: BTreeMap<String, f64>,
    /// Non-negative quantity per unit operation; the direction is carried by the flow.
    pub environmental_exchanges: BTreeMap<String, f64>,
}

impl UnitProcess {
    pub fn new(id: impl Into<String>, stage: LifeCycleStage) -> Self {
        let id = id.into();
        UnitProcess {
            name: id.clone(),
            id,
            stage,
            tier: None,
            ai_tagged: false,
            economic_exchanges: BTreeMap::new(),
            environmental_exchanges: BTreeMap::new(),
        }
    }

    pub fn named(mut self, name: impl Into<String>) -> Self {
        self.name = name.into();
        self
    }

    pub fn tier(mut self, tier: Tier) -> Self {
        self.tier = Some(tier);
        self
    }

    pub fn ai(mut self, ai_tagged: bool) -> Self {
        self.ai_tagged = ai_tagged;
        self
    }

    pub fn produces(mut self, flow: impl Into<String>, amount: f64) -> Self {
        self.economic_exchanges.insert(flow.into(), amount.abs());
        self
    }

    pub fn consumes(mut self, flow: impl Into<String>, amount: f64) -> Self {
        self.economic_exchanges.insert(flow.into(), -amount.abs());
        self
    }

    pub fn exchanges(mut self, flow: impl Into<String>, amount: f64) -> Self {
        self.environmental_exchanges.insert(flow.into(), amount);
        self
    }

    /// Economic flows with a positive exchange.
    pub fn products(&self) -> impl Iterator<Item = (&str, f64)> {
        self.economic_exchanges
            .iter()
            .filter(|(_, &v)| v > 0.0)
            .map(|(k, &v)| (k.as_str(), v))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FunctionalUnit {
    pub reference_flow: String,
    pub quantity: f64,
    pub description: String,
}

#[derive(Clone, Debug, PartialEq, thiserror::Error)]
pub enum InventoryError {
    #[error("duplicate {what} id `{id}`")]
    DuplicateId { what: &'static str, id: String },
    #[error("{context} references undeclared flow `{flow}`")]
    UnknownFlowRef { context: String, flow: String },
    #[error("flow `{flow}` is declared with unit `{first}` and with unit `{second}`")]
    UnitMismatch {
        flow: String,
        first: String,
        second: String,
    },
    #[error("scenario has no processes")]
    EmptyProcessSet,
    #[error("flow `{0}` has an empty unit")]
    EmptyUnit(String),
    #[error("{context} uses flow `{flow}` as {expected}, but it is declared {actual}")]
    FlowKindMismatch {
        context: String,
        flow: String,
        expected: &'static str,
        actual: &'static str,
    },
    #[error("process `{process}` has a negative environmental exchange of `{flow}` ({value}); use the flow direction instead")]
    NegativeEnvironmentalExchange {
        process: String,
        flow: String,
        value: f64,
    },
    #[error("process `{process}` has a non-finite exchange of `{flow}`")]
    NonFiniteQuantity { process: String, flow: String },
    #[error("process `{0}` has no economic exchange")]
    NoEconomicExchange(String),
    #[error("scenario has no functional unit")]
    MissingFunctionalUnit,
    #[error("functional unit quantity must be positive and finite, got {0}")]
    InvalidFunctionalUnit(f64),
    #[error("technosphere is not square: {economic_flows} economic flows, {processes} processes")]
    NonSquareSystem {
        economic_flows: usize,
        processes: usize,
    },
    #[error("economic flow `{flow}` is produced by several processes: {}", .processes.join(", "))]
    MultipleProducers { flow: String, processes: Vec<String> },
    #[error("process `{process}` produces several economic flows ({}); partition it first", .flows.join(", "))]
    MultifunctionalProcess { process: String, flows: Vec<String> },
    #[error("economic flow `{0}` is used but no process produces it")]
    MissingProducer(String),
    #[error("process `{0}` produces no economic flow")]
    ProcessWithoutProduct(String),
}

/// Unvalidated inputs of [`build_scenario`].
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ScenarioParts {
    pub id: String,
    pub label: String,
    pub flows: Vec<FlowSpec>,
    pub processes: Vec<UnitProcess>,
    pub functional_unit: Option<FunctionalUnit>,
    pub metadata: BTreeMap<String, serde_json::Value>,
}

/// A validated, immutable inventory of one application variant.
#[derive(Clone, Debug, PartialEq)]
pub struct Scenario {
    id: String,
    label: String,
    flows: BTreeMap<String, FlowSpec>,
    processes: BTreeMap<String, UnitProcess>,
    functional_unit: FunctionalUnit,
    metadata: BTreeMap<String, serde_json::Value>,
}

/// Validates `parts` and returns a [`Scenario`].
///
/// Flows declared twice are reported as [`InventoryError::UnitMismatch`]
/// when their units differ and as [`InventoryError::DuplicateId`] otherwise.
pub fn build_scenario(parts: ScenarioParts) -> Result<Scenario, InventoryError> {
    let ScenarioParts {
        id,
        label,
        flows: flow_list,
        processes: process_list,
        functional_unit,
        metadata,
    } = parts;

    let mut flows: BTreeMap<String, FlowSpec> = BTreeMap::new();
    for flow in flow_list {
        if flow.unit.trim().is_empty() {
            return Err(InventoryError::EmptyUnit(flow.id));
        }
        if let Some(prev) = flows.get(&flow.id) {
            return Err(if prev.unit != flow.unit {
                InventoryError::UnitMismatch {
                    flow: flow.id.clone(),
                    first: prev.unit.clone(),
                    second: flow.unit,
                }
            } else {
                InventoryError::DuplicateId {
                    what: "flow",
                    id: flow.id,
                }
            });
        }
        flows.insert(flow.id.clone(), flow);
    }

    if process_list.is_empty() {
        return Err(InventoryError::EmptyProcessSet);
    }
    let mut processes: BTreeMap<String, UnitProcess> = BTreeMap::new();
    for process in process_list {
        check_process(&process, &flows)?;
        if processes.contains_key(&process.id) {
            return Err(InventoryError::DuplicateId {
                what: "process",
                id: process.id,
            });
        }
        processes.insert(process.id.clone(), process);
    }

    let functional_unit = functional_unit.ok_or(InventoryError::MissingFunctionalUnit)?;
    if !(functional_unit.quantity > 0.0 && functional_unit.quantity.is_finite()) {
        return Err(InventoryError::InvalidFunctionalUnit(functional_unit.quantity));
    }
    match flows.get(&functional_unit.reference_flow) {
        None => {
            return Err(InventoryError::UnknownFlowRef {
                context: "functional unit".into(),
                flow: functional_unit.reference_flow.clone(),
            })
        }
        Some(f) if !f.kind.is_economic() => {
            return Err(InventoryError::FlowKindMismatch {
                context: "functional unit".into(),
                flow: f.id.clone(),
                expected: "economic",
                actual: "environmental",
            })
        }
        Some(_) => {}
    }

    Ok(Scenario {
        id,
        label,
        flows,
        processes,
        functional_unit,
        metadata,
    })
}

fn check_process(p: &UnitProcess, flows: &BTreeMap<String, FlowSpec>) -> Result<(), InventoryError> {
    let context = || format!("process `{}`", p.id);
    if p.economic_exchanges.is_empty() {
        return Err(InventoryError::NoEconomicExchange(p.id.clone()));
    }
    for (flow, &value) in &p.economic_exchanges {
        let spec = flows.get(flow).ok_or_else(|| InventoryError::UnknownFlowRef {
            context: context(),
            flow: flow.clone(),
        })?;
        if !spec.kind.is_economic() {
            return Err(InventoryError::FlowKindMismatch {
                context: context(),
                flow: flow.clone(),
                expected: "economic",
                actual: "environmental",
            });
        }
        if !value.is_finite() {
            return Err(InventoryError::NonFiniteQuantity {
                process: p.id.clone(),
                flow: flow.clone(),
            });
        }
    }
    for (flow, &value) in &p.environmental_exchanges {
        let spec = flows.get(flow).ok_or_else(|| InventoryError::UnknownFlowRef {
            context: context(),
            flow: flow.clone(),
        })?;
        if spec.kind.is_economic() {
            return Err(InventoryError::FlowKindMismatch {
                context: context(),
                flow: flow.clone(),
                expected: "environmental",
                actual: "economic",
            });
        }
        if !value.is_finite() {
            return Err(InventoryError::NonFiniteQuantity {
                process: p.id.clone(),
                flow: flow.clone(),
            });
        }
        if value < 0.0 {
            return Err(InventoryError::NegativeEnvironmentalExchange {
                process: p.id.clone(),
                flow: flow.clone(),
                value,
            });
        }
    }
    Ok(())
}

/// Matrices of a scenario together with their row and column labels.
#[derive(Clone, Debug, PartialEq)]
pub struct InventoryMatrices {
    /// Row labels of `technosphere` and `demand`.
    pub economic_flows: Vec<String>,
    /// Column labels of both matrices.
    pub processes: Vec<String>,
    /// Row labels of `intervention`.
    pub environmental_flows: Vec<String>,
    /// `A`: economic flows × processes.
    pub technosphere: CscMatrix,
    /// `B`: environmental flows × processes.
    pub intervention: CscMatrix,
    /// `f`: functional-unit demand per economic flow.
    pub demand: Vec<f64>,
}

impl Scenario {
    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn flows(&self) -> impl Iterator<Item = &FlowSpec> {
        self.flows.values()
    }

    pub fn flow(&self, id: &str) -> Option<&FlowSpec> {
        self.flows.get(id)
    }

    /// Processes in id order.
    pub fn processes(&self) -> impl Iterator<Item = &UnitProcess> {
        self.processes.values()
    }

    pub fn process(&self, id: &str) -> Option<&UnitProcess> {
        self.processes.get(id)
    }

    pub fn functional_unit(&self) -> &FunctionalUnit {
        &self.functional_unit
    }

    pub fn metadata(&self) -> &BTreeMap<String, serde_json::Value> {
        &self.metadata
    }

    /// Copies the scenario back into editable parts.
    pub fn to_parts(&self) -> ScenarioParts {
        ScenarioParts {
            id: self.id.clone(),
            label: self.label.clone(),
            flows: self.flows.values().cloned().collect(),
            processes: self.processes.values().cloned().collect(),
            functional_unit: Some(self.functional_unit.clone()),
            metadata: self.metadata.clone(),
        }
    }

    /// The same system with the functional-unit quantity multiplied by `k`.
    pub fn with_demand_scaled(&self, k: f64) -> Result<Scenario, InventoryError> {
        if !(k > 0.0 && k.is_finite()) {
            return Err(InventoryError::InvalidFunctionalUnit(self.functional_unit.quantity * k));
        }
        let mut s = self.clone();
        s.functional_unit.quantity *= k;
        Ok(s)
    }

    /// Producing processes of each economic flow, in id order.
    fn producers(&self) -> BTreeMap<&str, Vec<&str>> {
        let mut map: BTreeMap<&str, Vec<&str>> = self
            .flows
            .values()
            .filter(|f| f.kind.is_economic())
            .map(|f| (f.id.as_str(), Vec::new()))
            .collect();
        for p in self.processes.values() {
            for (flow, _) in p.products() {
                if let Some(list) = map.get_mut(flow) {
                    list.push(p.id.as_str());
                }
            }
        }
        map
    }

    /// Structural findings that prevent building a square technosphere.
    ///
    /// Returns an empty list iff [`Scenario::matrices`] succeeds.
    /// `NonSquareSystem` is reported only when no more specific finding
    /// explains the mismatch (for instance an economic flow that is declared
    /// but never used).
    pub fn validate(&self) -> Vec<Finding> {
        let mut findings = Vec::new();
        let producers = self.producers();

        let mut referenced: BTreeSet<&str> = BTreeSet::new();
        referenced.insert(self.functional_unit.reference_flow.as_str());
        for p in self.processes.values() {
            referenced.extend(p.economic_exchanges.keys().map(String::as_str));
        }

        for (flow, prods) in &producers {
            if prods.len() > 1 {
                findings.push(Finding::error(
                    FindingCode::MultipleProducers((*flow).to_string()),
                    format!(
                        "economic flow `{flow}` is produced by several processes ({}); allocate or merge them",
                        prods.join(", ")
                    ),
                ));
            } else if prods.is_empty() && referenced.contains(flow) {
                findings.push(Finding::error(
                    FindingCode::MissingProducer((*flow).to_string()),
                    format!("economic flow `{flow}` is used but no process produces it"),
                ));
            }
        }
        for p in self.processes.values() {
            let products: Vec<&str> = p.products().map(|(f, _)| f).collect();
            if products.is_empty() {
                findings.push(Finding::error(
                    FindingCode::ProcessWithoutProduct(p.id.clone()),
                    format!("process `{}` produces no economic flow", p.id),
                ));
            } else if products.len() > 1 {
                findings.push(Finding::error(
                    FindingCode::MultifunctionalProcess(p.id.clone()),
                    format!(
                        "process `{}` produces several economic flows ({}); partition it with an allocation key",
                        p.id,
                        products.join(", ")
                    ),
                ));
            }
        }

        let n_flows = producers.len();
        let n_processes = self.processes.len();
        if findings.is_empty() && n_flows != n_processes {
            findings.push(Finding::error(
                FindingCode::NonSquareSystem {
                    economic_flows: n_flows,
                    processes: n_processes,
                },
                format!(
                    "technosphere is not square: {n_flows} economic flows, {n_processes} processes"
                ),
            ));
        }
        findings
    }

    fn structural_error(&self, code: FindingCode) -> InventoryError {
        match code {
            FindingCode::MultipleProducers(flow) => InventoryError::MultipleProducers {
                processes: self
                    .producers()
                    .get(flow.as_str())
                    .map(|v| v.iter().map(|s| s.to_string()).collect())
                    .unwrap_or_default(),
                flow,
            },
            FindingCode::MultifunctionalProcess(process) => InventoryError::MultifunctionalProcess {
                flows: self.processes[&process]
                    .products()
                    .map(|(f, _)| f.to_string())
                    .collect(),
                process,
            },
            FindingCode::MissingProducer(flow) => InventoryError::MissingProducer(flow),
            FindingCode::ProcessWithoutProduct(p) => InventoryError::ProcessWithoutProduct(p),
            _ => InventoryError::NonSquareSystem {
                economic_flows: self.flows.values().filter(|f| f.kind.is_economic()).count(),
                processes: self.processes.len(),
            },
        }
    }

    /// Technosphere matrix, intervention matrix and demand vector in
    /// canonical order.
    pub fn matrices(&self) -> Result<InventoryMatrices, InventoryError> {
        if let Some(first) = self.validate().into_iter().next() {
            return Err(self.structural_error(first.code));
        }
        let producers = self.producers();

        let economic_flows: Vec<String> = producers.keys().map(|s| s.to_string()).collect();
        let processes: Vec<String> = producers.values().map(|p| p[0].to_string()).collect();
        let environmental_flows: Vec<String> = self
            .flows
            .values()
            .filter(|f| !f.kind.is_economic())
            .map(|f| f.id.clone())
            .collect();
        let econ_row: BTreeMap<&str, usize> = economic_flows
            .iter()
            .enumerate()
            .map(|(i, f)| (f.as_str(), i))
            .collect();
        let env_row: BTreeMap<&str, usize> = environmental_flows
            .iter()
            .enumerate()
            .map(|(i, f)| (f.as_str(), i))
            .collect();

        let mut a = Vec::new();
        let mut b = Vec::new();
        for (j, pid) in processes.iter().enumerate() {
            let p = &self.processes[pid];
            for (flow, &v) in &p.economic_exchanges {
                a.push((econ_row[flow.as_str()], j, v));
            }
            for (flow, &v) in &p.environmental_exchanges {
                let sign = self.flows[flow]
                    .kind
                    .direction()
                    .map_or(1.0, Direction::sign);
                b.push((env_row[flow.as_str()], j, sign * v));
            }
        }
        let n = processes.len();
        let mut demand = vec![0.0; n];
        demand[econ_row[self.functional_unit.reference_flow.as_str()]] =
            self.functional_unit.quantity;

        Ok(InventoryMatrices {
            technosphere: CscMatrix::from_triplets(n, n, a),
            intervention: CscMatrix::from_triplets(environmental_flows.len(), n, b),
            economic_flows,
            processes,
            environmental_flows,
            demand,
        })
    }
}
