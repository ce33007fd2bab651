//! Scenario and characterization-factor files.
//!
//! A scenario file is one JSON document:
//!
//! ```json
//! {
//!   "id": "m1",
//!   "label": "conventional heating",
//!   "flows": [{"id": "heat", "kind": "economic", "unit": "m2*yr"},
//!             {"id": "co2e", "kind": "environmental", "direction": "emission", "unit": "kg"}],
//!   "processes": [{"id": "heater", "stage": {"stage_id": "C_Use"},
//!                  "economic_exchanges": {"heat": 1.0},
//!                  "environmental_exchanges": {"co2e": 600.0}}],
//!   "functional_unit": {"reference_flow": "heat", "quantity": 1.0,
//!                       "description": "heating 1m² to 20°C for one year"},
//!   "meta": {"evaluation_category": "f"}
//! }
//! ```
//!
//! `devices` and `tasks` are optional; they are expanded into processes by
//! [`crate::ai_service::expand_service`]. Processes may carry an
//! `allocation` key or an `amortize` block, applied before the scenario is
//! built.
//!
//! Unknown keys are rejected unless parsing is lenient, in which case each
//! one becomes a warning.

use std::collections::BTreeMap;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::ai_service::{expand_service, AiServiceError, AiTask, Device, Embodied, EnergyProfile, TaskKind};
use crate::allocation::{allocate, amortize_embodied, AllocationError, AllocationKey};
use crate::finding::{Finding, FindingCode};
use crate::inventory::{
    build_scenario, Direction, FlowKind, FlowSpec, FunctionalUnit, InventoryError, Scenario, ScenarioParts, Tier,
    UnitProcess,
};
use crate::lci::{CharacterizationError, CharacterizationTable, ImpactCategory};
use crate::report::ReportMeta;
use crate::stage::LifeCycleStage;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct ParseOptions {
    /// Report unknown keys as warnings instead of rejecting the file.
    pub lenient_schema: bool,
}

#[derive(Clone, Debug, PartialEq, thiserror::Error)]
pub enum FileError {
    #[error("input is not valid UTF-8 (byte {offset})")]
    NotUtf8 { offset: usize },
    #[error("syntax error at line {line}, column {column}: {message}")]
    Syntax { line: usize, column: usize, message: String },
    #[error("schema error at {path}: {message}")]
    Schema { path: String, message: String },
    #[error(transparent)]
    Inventory(#[from] InventoryError),
    #[error(transparent)]
    AiService(#[from] AiServiceError),
    #[error(transparent)]
    Characterization(#[from] CharacterizationError),
}

impl FileError {
    fn schema(path: impl Into<String>, message: impl Into<String>) -> Self {
        FileError::Schema {
            path: path.into(),
            message: message.into(),
        }
    }
}

fn escape_token(token: &str) -> String {
    token.replace('~', "~0").replace('/', "~1")
}

fn ignored_pointer(path: &serde_ignored::Path<'_>) -> String {
    use serde_ignored::Path;
    match path {
        Path::Root => String::new(),
        Path::Seq { parent, index } => format!("{}/{}", ignored_pointer(parent), index),
        Path::Map { parent, key } => format!("{}/{}", ignored_pointer(parent), escape_token(key)),
        Path::Some { parent } | Path::NewtypeStruct { parent } | Path::NewtypeVariant { parent } => {
            ignored_pointer(parent)
        }
    }
}

fn error_pointer(path: &serde_path_to_error::Path) -> String {
    use serde_path_to_error::Segment;
    let mut out = String::new();
    for segment in path.iter() {
        match segment {
            Segment::Seq { index } => out.push_str(&format!("/{index}")),
            Segment::Map { key } => out.push_str(&format!("/{}", escape_token(key))),
            Segment::Enum { .. } | Segment::Unknown => {}
        }
    }
    if out.is_empty() {
        out.push('/');
    }
    out
}

/// Deserializes `bytes` tracking the JSON-pointer path of errors and of
/// unknown keys.
fn read_document<T: DeserializeOwned>(bytes: &[u8], options: ParseOptions) -> Result<(T, Vec<Finding>), FileError> {
    if let Err(e) = std::str::from_utf8(bytes) {
        return Err(FileError::NotUtf8 {
            offset: e.valid_up_to(),
        });
    }
    let mut unknown = Vec::new();
    let mut de = serde_json::Deserializer::from_slice(bytes);
    let value: Result<T, _> = {
        let mut track = |path: serde_ignored::Path<'_>| unknown.push(ignored_pointer(&path));
        let ignoring = serde_ignored::Deserializer::new(&mut de, &mut track);
        serde_path_to_error::deserialize(ignoring)
    };
    let value = match value {
        Ok(v) => v,
        Err(e) => {
            let path = error_pointer(e.path());
            let inner = e.into_inner();
            return Err(match inner.classify() {
                serde_json::error::Category::Syntax | serde_json::error::Category::Eof => FileError::Syntax {
                    line: inner.line(),
                    column: inner.column(),
                    message: strip_position(&inner),
                },
                _ => FileError::Schema {
                    path,
                    message: inner.to_string(),
                },
            });
        }
    };
    if let Err(e) = de.end() {
        return Err(FileError::Syntax {
            line: e.line(),
            column: e.column(),
            message: strip_position(&e),
        });
    }
    if let Some(first) = unknown.first() {
        if !options.lenient_schema {
            return Err(FileError::schema(first.clone(), "unknown key"));
        }
    }
    let findings = unknown
        .into_iter()
        .map(|path| {
            Finding::warning(
                FindingCode::UnknownSchemaKey(path.clone()),
                format!("unknown key at {path} ignored"),
            )
        })
        .collect();
    Ok((value, findings))
}

fn strip_position(e: &serde_json::Error) -> String {
    let s = e.to_string();
    match s.rfind(" at line ") {
        Some(i) => s[..i].to_string(),
        None => s,
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
enum FlowKindDoc {
    Economic,
    Environmental,
}

#[derive(Serialize, Deserialize)]
struct FlowDoc {
    id: String,
    #[serde(default)]
    name: Option<String>,
    kind: FlowKindDoc,
    unit: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    direction: Option<Direction>,
}

#[derive(Serialize, Deserialize)]
struct AmortizeDoc {
    lifetime: f64,
    usage: f64,
    #[serde(default = "one")]
    exclusivity: f64,
}

fn one() -> f64 {
    1.0
}

#[derive(Serialize, Deserialize)]
struct ProcessDoc {
    id: String,
    #[serde(default)]
    name: Option<String>,
    stage: LifeCycleStage,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    tier: Option<Tier>,
    #[serde(default)]
    ai_tagged: bool,
    #[serde(default)]
    economic_exchanges: BTreeMap<String, f64>,
    #[serde(default)]
    environmental_exchanges: BTreeMap<String, f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    allocation: Option<AllocationKey>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    amortize: Option<AmortizeDoc>,
}

#[derive(Deserialize)]
struct DeviceDoc {
    id: String,
    #[serde(default)]
    name: Option<String>,
    tier: Tier,
    #[serde(default)]
    embodied: Embodied,
    lifetime: f64,
    power_active: f64,
    power_idle: f64,
    #[serde(default = "one")]
    hosted_pue: f64,
    #[serde(default)]
    support_equipment: bool,
    #[serde(default)]
    dedicated: bool,
}

#[derive(Deserialize)]
struct TaskDoc {
    id: String,
    kind: TaskKind,
    devices: Vec<String>,
    profile: EnergyProfile,
    #[serde(default)]
    consumer: Option<String>,
}

#[derive(Deserialize)]
struct ScenarioDoc {
    id: String,
    #[serde(default)]
    label: Option<String>,
    flows: Vec<FlowDoc>,
    processes: Vec<ProcessDoc>,
    #[serde(default)]
    devices: Vec<DeviceDoc>,
    #[serde(default)]
    tasks: Vec<TaskDoc>,
    functional_unit: FunctionalUnit,
    #[serde(default)]
    meta: BTreeMap<String, Value>,
}

/// A parsed scenario file after device expansion and allocation.
#[derive(Clone, Debug, PartialEq)]
pub struct ScenarioFile {
    pub scenario: Scenario,
    pub devices: Vec<Device>,
    pub tasks: Vec<AiTask>,
    pub meta: ReportMeta,
    /// Schema warnings and data-gap findings from device expansion.
    pub findings: Vec<Finding>,
}

fn check_number(path: String, value: f64, ok: bool, requirement: &str) -> Result<(), FileError> {
    if ok && value.is_finite() {
        Ok(())
    } else {
        Err(FileError::schema(path, format!("{requirement}, got {value}")))
    }
}

fn convert_flow(i: usize, doc: FlowDoc) -> Result<FlowSpec, FileError> {
    let kind = match (doc.kind, doc.direction) {
        (FlowKindDoc::Economic, None) => FlowKind::Economic,
        (FlowKindDoc::Economic, Some(_)) => {
            return Err(FileError::schema(
                format!("/flows/{i}/direction"),
                "economic flows have no direction",
            ))
        }
        (FlowKindDoc::Environmental, Some(d)) => FlowKind::Environmental(d),
        (FlowKindDoc::Environmental, None) => {
            return Err(FileError::schema(
                format!("/flows/{i}/direction"),
                "environmental flows need a direction (emission or extraction)",
            ))
        }
    };
    Ok(FlowSpec {
        name: doc.name.unwrap_or_else(|| doc.id.clone()),
        id: doc.id,
        kind,
        unit: doc.unit,
    })
}

fn convert_process(i: usize, doc: ProcessDoc) -> Result<Vec<UnitProcess>, FileError> {
    let at = |field: &str| format!("/processes/{i}/{field}");
    for (flow, &v) in &doc.economic_exchanges {
        check_number(
            format!("{}/{}", at("economic_exchanges"), escape_token(flow)),
            v,
            true,
            "exchange must be finite",
        )?;
    }
    for (flow, &v) in &doc.environmental_exchanges {
        check_number(
            format!("{}/{}", at("environmental_exchanges"), escape_token(flow)),
            v,
            v >= 0.0,
            "environmental exchange must be >= 0 (the flow carries the direction)",
        )?;
    }
    let mut process = UnitProcess {
        name: doc.name.unwrap_or_else(|| doc.id.clone()),
        id: doc.id,
        stage: doc.stage,
        tier: doc.tier,
        ai_tagged: doc.ai_tagged,
        economic_exchanges: doc.economic_exchanges,
        environmental_exchanges: doc.environmental_exchanges,
    };
    let alloc_err = |field: &str, e: AllocationError| FileError::schema(at(field), e.to_string());
    if let Some(a) = doc.amortize {
        process = amortize_embodied(&process, a.lifetime, a.usage, a.exclusivity)
            .map_err(|e| alloc_err("amortize", e))?;
    }
    match doc.allocation {
        Some(key) => allocate(&process, &key).map_err(|e| alloc_err("allocation", e)),
        None => Ok(vec![process]),
    }
}

fn convert_device(i: usize, doc: DeviceDoc) -> Result<Device, FileError> {
    let at = |field: &str| format!("/devices/{i}/{field}");
    check_number(at("power_idle"), doc.power_idle, doc.power_idle >= 0.0, "power_idle must be >= 0")?;
    check_number(
        at("power_active"),
        doc.power_active,
        doc.power_active >= doc.power_idle,
        "power_active must be >= power_idle",
    )?;
    check_number(at("lifetime"), doc.lifetime, doc.lifetime > 0.0, "lifetime must be > 0 hours")?;
    check_number(at("hosted_pue"), doc.hosted_pue, doc.hosted_pue >= 1.0, "hosted_pue must be >= 1")?;
    for (part, map) in [("production", &doc.embodied.production), ("end_of_life", &doc.embodied.end_of_life)] {
        for (flow, &v) in map {
            check_number(
                format!("{}/{part}/{}", at("embodied"), escape_token(flow)),
                v,
                v >= 0.0,
                "embodied exchange must be >= 0",
            )?;
        }
    }
    Ok(Device {
        name: doc.name.unwrap_or_else(|| doc.id.clone()),
        id: doc.id,
        tier: doc.tier,
        embodied: doc.embodied,
        lifetime: doc.lifetime,
        power_active: doc.power_active,
        power_idle: doc.power_idle,
        hosted_pue: doc.hosted_pue,
        support_equipment: doc.support_equipment,
        dedicated: doc.dedicated,
    })
}

fn convert_task(i: usize, doc: TaskDoc) -> Result<AiTask, FileError> {
    let at = |field: &str| format!("/tasks/{i}/{field}");
    if doc.devices.is_empty() {
        return Err(FileError::schema(at("devices"), "a task needs at least one device"));
    }
    let p = &doc.profile;
    check_number(at("profile/duration"), p.duration, p.duration > 0.0, "duration must be > 0 hours")?;
    check_number(
        at("profile/utilization"),
        p.utilization,
        (0.0..=1.0).contains(&p.utilization),
        "utilization must lie in [0, 1]",
    )?;
    if p.n_sharing == 0 {
        return Err(FileError::schema(at("profile/n_sharing"), "n_sharing must be >= 1"));
    }
    Ok(AiTask {
        id: doc.id,
        kind: doc.kind,
        devices: doc.devices,
        profile: doc.profile,
        consumer: doc.consumer,
    })
}

/// Parses a scenario file, expands its devices and applies allocation.
pub fn parse_scenario(bytes: &[u8], options: ParseOptions) -> Result<ScenarioFile, FileError> {
    let (doc, mut findings) = read_document::<ScenarioDoc>(bytes, options)?;
    let meta = ReportMeta::from_map(&doc.meta).map_err(|m| FileError::schema("/meta/evaluation_category", m))?;
    if !(doc.functional_unit.quantity > 0.0 && doc.functional_unit.quantity.is_finite()) {
        return Err(FileError::schema(
            "/functional_unit/quantity",
            format!("quantity must be > 0, got {}", doc.functional_unit.quantity),
        ));
    }

    let flows = doc
        .flows
        .into_iter()
        .enumerate()
        .map(|(i, f)| convert_flow(i, f))
        .collect::<Result<Vec<_>, _>>()?;
    let mut processes = Vec::new();
    for (i, p) in doc.processes.into_iter().enumerate() {
        processes.extend(convert_process(i, p)?);
    }
    let devices = doc
        .devices
        .into_iter()
        .enumerate()
        .map(|(i, d)| convert_device(i, d))
        .collect::<Result<Vec<_>, _>>()?;
    let tasks = doc
        .tasks
        .into_iter()
        .enumerate()
        .map(|(i, t)| convert_task(i, t))
        .collect::<Result<Vec<_>, _>>()?;

    let mut parts = ScenarioParts {
        label: doc.label.unwrap_or_else(|| doc.id.clone()),
        id: doc.id,
        flows,
        processes,
        functional_unit: Some(doc.functional_unit),
        metadata: doc.meta,
    };
    findings.extend(expand_service(&mut parts, &tasks, &devices)?);
    let scenario = build_scenario(parts)?;
    Ok(ScenarioFile {
        scenario,
        devices,
        tasks,
        meta,
        findings,
    })
}

#[derive(Serialize)]
struct ScenarioOut<'a> {
    id: &'a str,
    label: &'a str,
    flows: Vec<FlowDoc>,
    processes: Vec<ProcessDoc>,
    functional_unit: &'a FunctionalUnit,
    #[serde(skip_serializing_if = "BTreeMap::is_empty")]
    meta: &'a BTreeMap<String, Value>,
}

/// Writes `scenario` in the file format. Devices and allocation are already
/// folded into the processes, so the output contains neither.
pub fn scenario_to_json(scenario: &Scenario) -> String {
    let out = ScenarioOut {
        id: scenario.id(),
        label: scenario.label(),
        flows: scenario
            .flows()
            .map(|f| FlowDoc {
                id: f.id.clone(),
                name: Some(f.name.clone()),
                kind: match f.kind {
                    FlowKind::Economic => FlowKindDoc::Economic,
                    FlowKind::Environmental(_) => FlowKindDoc::Environmental,
                },
                unit: f.unit.clone(),
                direction: f.kind.direction(),
            })
            .collect(),
        processes: scenario
            .processes()
            .map(|p| ProcessDoc {
                id: p.id.clone(),
                name: Some(p.name.clone()),
                stage: p.stage.clone(),
                tier: p.tier,
                ai_tagged: p.ai_tagged,
                economic_exchanges: p.economic_exchanges.clone(),
                environmental_exchanges: p.environmental_exchanges.clone(),
                allocation: None,
                amortize: None,
            })
            .collect(),
        functional_unit: scenario.functional_unit(),
        meta: scenario.metadata(),
    };
    let mut s = serde_json::to_string_pretty(&out).expect("scenario serializes");
    s.push('\n');
    s
}

#[derive(Deserialize)]
struct FactorsDoc {
    #[serde(default)]
    illustrative: bool,
    categories: Vec<ImpactCategory>,
    factors: BTreeMap<String, BTreeMap<String, f64>>,
}

/// Parses a characterization-factor file:
/// `{"illustrative": bool, "categories": [{"id", "name", "unit"}], "factors": {category: {flow: factor}}}`.
pub fn parse_factors(bytes: &[u8], options: ParseOptions) -> Result<(CharacterizationTable, Vec<Finding>), FileError> {
    let (doc, mut findings) = read_document::<FactorsDoc>(bytes, options)?;
    let table = CharacterizationTable::new(doc.categories, doc.factors)?.illustrative(doc.illustrative);
    if table.is_illustrative() {
        findings.push(illustrative_finding());
    }
    Ok((table, findings))
}

pub(crate) fn illustrative_finding() -> Finding {
    Finding::warning(
        FindingCode::IllustrativeFactors,
        "characterization factors are illustrative demo values, not an authoritative method",
    )
}

/// Demo factor table used when no factor file is given.
pub const DEMO_FACTORS: &str = include_str!("../../../scenarios/demo-factors.json");

pub fn demo_factors() -> CharacterizationTable {
    parse_factors(DEMO_FACTORS.as_bytes(), ParseOptions::default())
        .expect("bundled demo factors parse")
        .0
}
