//! AI-service front end: devices, energy profiles and tasks are turned into
//! stage-tagged unit processes, and scenarios are audited against the
//! life-cycle classification.
//!
//! For every (task, device) pair three processes are emitted: production
//! (raw material acquisition and manufacturing lumped together), use, and end
//! of life. Production and end of life are amortized over the device
//! lifetime; the use process consumes the facility-level electricity of the
//! task from the grid.
//!
//! Each emitted process produces one unit of a dedicated "slice" flow. The
//! slices are consumed by the task's consumer process, which by default is
//! the producer of the functional unit, so the AI service is scaled with the
//! functional unit like any other input.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::allocation::{amortize_embodied, AllocationError};
use crate::finding::{Finding, FindingCode, Severity};
use crate::inventory::{FlowSpec, Scenario, ScenarioParts, Tier, UnitProcess};
use crate::stage::{LifeCycleStage, Obligation, StageId, SubProcess};

/// Unit label of the flows linking emitted processes to their consumer.
pub const SLICE_UNIT: &str = "slice";

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TaskKind {
    DataAcquisition,
    DataStorage,
    /// Pre-processing and other data handling between acquisition and training.
    DataProcessing,
    Training,
    Inference,
}

#[derive(Clone, Debug, PartialEq, thiserror::Error)]
pub enum AiServiceError {
    #[error("device `{device}`: {reason}")]
    InvalidDevice { device: String, reason: String },
    #[error("task `{task}`: {reason}")]
    InvalidTask { task: String, reason: String },
    #[error("duplicate device id `{0}`")]
    DuplicateDevice(String),
    #[error("task `{task}` refers to unknown device `{device}`")]
    UnknownDevice { task: String, device: String },
    #[error("grid process `{0}` is not declared")]
    UnknownGridProcess(String),
    #[error("grid process `{process}` does not produce `{flow}` used by task `{task}`")]
    GridFlowMismatch {
        process: String,
        flow: String,
        task: String,
    },
    #[error("no declared process produces grid flow `{flow}` of task `{task}`")]
    NoGridProducer { task: String, flow: String },
    #[error("consumer process `{consumer}` of task `{task}` is not declared")]
    UnknownConsumer { task: String, consumer: String },
    #[error("task `{task}`, device `{device}`: {source}")]
    Allocation {
        task: String,
        device: String,
        #[source]
        source: AllocationError,
    },
}

/// Embodied environmental exchanges of one device unit.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Embodied {
    /// Raw material acquisition, manufacturing and transport.
    #[serde(default)]
    pub production: BTreeMap<String, f64>,
    #[serde(default)]
    pub end_of_life: BTreeMap<String, f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Device {
    pub id: String,
    pub name: String,
    pub tier: Tier,
    pub embodied: Embodied,
    /// Hours.
    pub lifetime: f64,
    /// Watts at full utilization.
    pub power_active: f64,
    /// Watts when switched on but idle.
    pub power_idle: f64,
    /// Facility overhead multiplier; 1.0 for devices not hosted in a facility.
    pub hosted_pue: f64,
    /// Power supply, cooling and other equipment supporting ICT devices.
    pub support_equipment: bool,
    /// Used only by the application under study; otherwise shared.
    pub dedicated: bool,
}

impl Device {
    pub fn validate(&self) -> Result<(), AiServiceError> {
        let bad = |reason: String| AiServiceError::InvalidDevice {
            device: self.id.clone(),
            reason,
        };
        if !(self.power_idle >= 0.0 && self.power_idle.is_finite()) {
            return Err(bad(format!("power_idle must be >= 0, got {}", self.power_idle)));
        }
        if !(self.power_active >= self.power_idle && self.power_active.is_finite()) {
            return Err(bad(format!(
                "power_active ({}) must be >= power_idle ({})",
                self.power_active, self.power_idle
            )));
        }
        if !(self.lifetime > 0.0 && self.lifetime.is_finite()) {
            return Err(bad(format!("lifetime must be > 0, got {}", self.lifetime)));
        }
        if !(self.hosted_pue >= 1.0 && self.hosted_pue.is_finite()) {
            return Err(bad(format!("hosted_pue must be >= 1, got {}", self.hosted_pue)));
        }
        for (flow, v) in self
            .embodied
            .production
            .iter()
            .chain(&self.embodied.end_of_life)
        {
            if !(*v >= 0.0 && v.is_finite()) {
                return Err(bad(format!("embodied exchange of `{flow}` must be >= 0, got {v}")));
            }
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnergyProfile {
    /// Hours.
    pub duration: f64,
    /// Fraction of the active-minus-idle power drawn on average.
    pub utilization: f64,
    /// Number of programs sharing the devices at the same time.
    pub n_sharing: u32,
    /// Economic flow supplying electricity.
    pub grid_flow: String,
}

impl EnergyProfile {
    pub fn validate(&self) -> Result<(), String> {
        if !(self.duration > 0.0 && self.duration.is_finite()) {
            return Err(format!("duration must be > 0, got {}", self.duration));
        }
        if !(0.0..=1.0).contains(&self.utilization) {
            return Err(format!("utilization must lie in [0, 1], got {}", self.utilization));
        }
        if self.n_sharing == 0 {
            return Err("n_sharing must be >= 1".into());
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct AiTask {
    pub id: String,
    pub kind: TaskKind,
    pub devices: Vec<String>,
    pub profile: EnergyProfile,
    /// Process consuming this task's slices; defaults to the producer of the
    /// functional unit.
    pub consumer: Option<String>,
}

impl AiTask {
    pub fn validate(&self) -> Result<(), AiServiceError> {
        if self.devices.is_empty() {
            return Err(AiServiceError::InvalidTask {
                task: self.id.clone(),
                reason: "a task needs at least one device".into(),
            });
        }
        self.profile.validate().map_err(|reason| AiServiceError::InvalidTask {
            task: self.id.clone(),
            reason,
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnergyUse {
    pub dynamic_kwh: f64,
    pub static_kwh: f64,
    pub facility_kwh: f64,
}

/// Linear power model between idle and active draw.
///
/// The dynamic part is the extra consumption caused by the workload; the
/// static part is the idle draw divided among the programs sharing the
/// device. Facility energy applies the hosting PUE to both.
pub fn energy_use(device: &Device, profile: &EnergyProfile) -> EnergyUse {
    let dynamic_kwh =
        profile.utilization * (device.power_active - device.power_idle) * profile.duration / 1000.0;
    let static_kwh = device.power_idle * profile.duration / 1000.0 / f64::from(profile.n_sharing.max(1));
    EnergyUse {
        dynamic_kwh,
        static_kwh,
        facility_kwh: (dynamic_kwh + static_kwh) * device.hosted_pue,
    }
}

/// Processes and flows emitted for a set of tasks.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct DeviceExpansion {
    pub flows: Vec<FlowSpec>,
    pub processes: Vec<UnitProcess>,
    /// `(task id, slice flow id)` for each emitted process.
    pub slices: Vec<(String, String)>,
    pub findings: Vec<Finding>,
}

/// Emits production, use and end-of-life processes for every device of
/// every task.
///
/// `declared` are the scenario's own processes; the grid process must be
/// one of them and must produce each task's grid flow.
pub fn devices_to_processes(
    tasks: &[AiTask],
    devices: &[Device],
    grid_process_id: &str,
    declared: &[UnitProcess],
) -> Result<DeviceExpansion, AiServiceError> {
    let grid = declared
        .iter()
        .find(|p| p.id == grid_process_id)
        .ok_or_else(|| AiServiceError::UnknownGridProcess(grid_process_id.to_string()))?;
    let mut by_id: BTreeMap<&str, &Device> = BTreeMap::new();
    for d in devices {
        d.validate()?;
        if by_id.insert(d.id.as_str(), d).is_some() {
            return Err(AiServiceError::DuplicateDevice(d.id.clone()));
        }
    }

    let mut out = DeviceExpansion::default();
    let mut gap_reported = BTreeSet::new();
    for task in tasks {
        task.validate()?;
        let grid_flow = &task.profile.grid_flow;
        if !grid.products().any(|(f, _)| f == grid_flow) {
            return Err(AiServiceError::GridFlowMismatch {
                process: grid.id.clone(),
                flow: grid_flow.clone(),
                task: task.id.clone(),
            });
        }
        for device_id in &task.devices {
            let device = by_id.get(device_id.as_str()).ok_or_else(|| AiServiceError::UnknownDevice {
                task: task.id.clone(),
                device: device_id.clone(),
            })?;
            emit_device(task, device, &mut out, &mut gap_reported)?;
        }
    }
    Ok(out)
}

fn emit_device(
    task: &AiTask,
    device: &Device,
    out: &mut DeviceExpansion,
    gap_reported: &mut BTreeSet<String>,
) -> Result<(), AiServiceError> {
    let exclusivity = if device.dedicated {
        1.0
    } else {
        1.0 / f64::from(task.profile.n_sharing)
    };
    let amortize = |p: &UnitProcess| {
        amortize_embodied(p, device.lifetime, task.profile.duration, exclusivity).map_err(|source| {
            AiServiceError::Allocation {
                task: task.id.clone(),
                device: device.id.clone(),
                source,
            }
        })
    };

    let (production_row, use_row) = if device.support_equipment {
        (SubProcess::SupportEquipmentProduction, SubProcess::SupportEquipmentUse)
    } else {
        (SubProcess::DeviceProductionAssembly, SubProcess::IctEquipmentUse)
    };

    let mut new_process = |phase: &str, stage: LifeCycleStage| {
        let id = format!("{}/{}/{}", task.id, device.id, phase);
        out.flows.push(
            FlowSpec::economic(id.clone(), SLICE_UNIT)
                .named(format!("{} {} slice for {}", device.name, phase, task.id)),
        );
        out.slices.push((task.id.clone(), id.clone()));
        UnitProcess::new(id.clone(), stage)
            .named(format!("{} {} ({})", device.name, phase, task.id))
            .tier(device.tier)
            .ai(true)
            .produces(id, 1.0)
    };

    let mut production = new_process(
        "production",
        LifeCycleStage::row(production_row).merging([SubProcess::RawMaterialAcquisition]),
    );
    production.environmental_exchanges = device.embodied.production.clone();
    let production = amortize(&production)?;

    let energy = energy_use(device, &task.profile);
    let use_stage = if device.hosted_pue > 1.0 && !device.support_equipment {
        LifeCycleStage::row(use_row).merging([SubProcess::SupportEquipmentUse])
    } else {
        LifeCycleStage::row(use_row)
    };
    let mut usage = new_process("use", use_stage);
    if energy.facility_kwh > 0.0 {
        usage = usage.consumes(task.profile.grid_flow.clone(), energy.facility_kwh);
    }

    let mut end_of_life = new_process(
        "end-of-life",
        LifeCycleStage::row(SubProcess::StorageDisassemblyDismantlingCrushing)
            .merging([SubProcess::ReusePreparation]),
    );
    if device.embodied.end_of_life.is_empty() && gap_reported.insert(device.id.clone()) {
        out.findings.push(Finding::warning(
            FindingCode::EndOfLifeDataGap(device.id.clone()),
            format!(
                "device `{}` declares no end-of-life exchanges; a zero-exchange end-of-life process was emitted",
                device.id
            ),
        ));
    }
    end_of_life.environmental_exchanges = device.embodied.end_of_life.clone();
    let end_of_life = amortize(&end_of_life)?;

    out.processes.push(production);
    out.processes.push(usage);
    out.processes.push(end_of_life);
    Ok(())
}

/// Adds device-derived processes to `parts` and links their slices to the
/// consuming processes. The grid process of each task is the declared
/// producer of its grid flow.
pub fn expand_service(
    parts: &mut ScenarioParts,
    tasks: &[AiTask],
    devices: &[Device],
) -> Result<Vec<Finding>, AiServiceError> {
    if tasks.is_empty() {
        for d in devices {
            d.validate()?;
        }
        return Ok(Vec::new());
    }
    let default_consumer = parts.functional_unit.as_ref().and_then(|fu| {
        parts
            .processes
            .iter()
            .find(|p| p.products().any(|(f, _)| f == fu.reference_flow))
            .map(|p| p.id.clone())
    });

    let mut findings = Vec::new();
    let mut expansions = Vec::new();
    for task in tasks {
        let grid = parts
            .processes
            .iter()
            .find(|p| p.products().any(|(f, _)| f == task.profile.grid_flow))
            .ok_or_else(|| AiServiceError::NoGridProducer {
                task: task.id.clone(),
                flow: task.profile.grid_flow.clone(),
            })?;
        let expansion =
            devices_to_processes(std::slice::from_ref(task), devices, &grid.id, &parts.processes)?;
        let consumer = task
            .consumer
            .clone()
            .or_else(|| default_consumer.clone())
            .ok_or_else(|| AiServiceError::UnknownConsumer {
                task: task.id.clone(),
                consumer: String::from("<functional unit producer>"),
            })?;
        expansions.push((task.id.clone(), consumer, expansion));
    }

    for (task, consumer, expansion) in expansions {
        let target = parts
            .processes
            .iter_mut()
            .find(|p| p.id == consumer)
            .ok_or_else(|| AiServiceError::UnknownConsumer {
                task: task.clone(),
                consumer: consumer.clone(),
            })?;
        for (_, slice) in &expansion.slices {
            *target.economic_exchanges.entry(slice.clone()).or_insert(0.0) -= 1.0;
        }
        for f in expansion.findings {
            if !findings.contains(&f) {
                findings.push(f);
            }
        }
        parts.flows.extend(expansion.flows);
        parts.processes.extend(expansion.processes);
    }
    Ok(findings)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum CoverageStatus {
    Present,
    Missing,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CoverageEntry {
    pub stage_id: StageId,
    pub sub_process: SubProcess,
    pub label: String,
    pub obligation: Obligation,
    pub status: CoverageStatus,
}

/// One entry per classification row, in classification order.
pub fn coverage_report(scenario: &Scenario) -> Vec<CoverageEntry> {
    SubProcess::ALL
        .iter()
        .map(|&row| CoverageEntry {
            stage_id: row.stage(),
            sub_process: row,
            label: row.to_string(),
            obligation: row.obligation(),
            status: if scenario.processes().any(|p| p.stage.covers(row)) {
                CoverageStatus::Present
            } else {
                CoverageStatus::Missing
            },
        })
        .collect()
}

/// Findings for missing rows. Mandatory gaps are errors in strict mode and
/// warnings otherwise; recommended gaps are always warnings.
pub fn coverage_findings(report: &[CoverageEntry], strict: bool) -> Vec<Finding> {
    report
        .iter()
        .filter(|e| e.status == CoverageStatus::Missing)
        .map(|e| match e.obligation {
            Obligation::Mandatory => Finding::new(
                if strict { Severity::Error } else { Severity::Warning },
                FindingCode::MissingMandatory(e.sub_process),
                format!("missing Mandatory life-cycle row \"{}\"", e.label),
            ),
            Obligation::Recommended => Finding::warning(
                FindingCode::MissingRecommended(e.sub_process),
                format!("missing Recommended life-cycle row \"{}\"", e.label),
            ),
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::inventory::{build_scenario, FunctionalUnit};

    fn server(pue: f64) -> Device {
        Device {
            id: "srv".into(),
            name: "training server".into(),
            tier: Tier::DataCenter,
            embodied: Embodied {
                production: [("co2e".to_string(), 1000.0)].into_iter().collect(),
                end_of_life: [("co2e".to_string(), 20.0)].into_iter().collect(),
            },
            lifetime: 208.0 * 168.0,
            power_active: 300.0,
            power_idle: 100.0,
            hosted_pue: pue,
            support_equipment: false,
            dedicated: false,
        }
    }

    fn profile(hours: f64, n: u32) -> EnergyProfile {
        EnergyProfile {
            duration: hours,
            utilization: 1.0,
            n_sharing: n,
            grid_flow: "kwh".into(),
        }
    }

    #[test]
    fn energy_split_examples() {
        let e = energy_use(&server(1.0), &profile(10.0, 1));
        assert_eq!((e.dynamic_kwh, e.static_kwh, e.facility_kwh), (2.0, 1.0, 3.0));
        let e = energy_use(&server(1.0), &profile(10.0, 4));
        assert_eq!(e.static_kwh, 0.25);
        let e = energy_use(&server(1.5), &profile(10.0, 1));
        assert_eq!(e.facility_kwh, 4.5);
    }

    #[test]
    fn device_invariants() {
        let mut d = server(1.0);
        d.power_idle = 400.0;
        assert!(d.validate().is_err());
        let mut d = server(0.9);
        d.hosted_pue = 0.9;
        assert!(d.validate().is_err());
        let mut d = server(1.0);
        d.lifetime = 0.0;
        assert!(d.validate().is_err());
    }

    fn grid() -> UnitProcess {
        UnitProcess::new("grid", LifeCycleStage::stage(StageId::Use))
            .produces("kwh", 1.0)
            .exchanges("co2e", 0.06)
    }

    fn task(hours: f64, n: u32) -> AiTask {
        AiTask {
            id: "train".into(),
            kind: TaskKind::Training,
            devices: vec!["srv".into()],
            profile: profile(hours, n),
            consumer: None,
        }
    }

    #[test]
    fn one_week_training_slice() {
        let exp = devices_to_processes(&[task(168.0, 1)], &[server(1.0)], "grid", &[grid()]).unwrap();
        assert_eq!(exp.processes.len(), 3);
        let prod = &exp.processes[0];
        assert_eq!(prod.id, "train/srv/production");
        assert!((prod.environmental_exchanges["co2e"] - 1000.0 / 208.0).abs() < 1e-12);
        assert!(prod.stage.covers(SubProcess::RawMaterialAcquisition));
        assert!(prod.ai_tagged);
        assert_eq!(prod.tier, Some(Tier::DataCenter));
        let usage = &exp.processes[1];
        assert_eq!(usage.stage.stage_id(), StageId::Use);
        assert!((usage.economic_exchanges["kwh"] + 168.0 * 0.3).abs() < 1e-12);
        let eol = &exp.processes[2];
        assert!(eol.stage.covers(SubProcess::ReusePreparation));
        assert!(eol.stage.covers(SubProcess::StorageDisassemblyDismantlingCrushing));
    }

    #[test]
    fn dedicated_full_lifetime_keeps_embodied() {
        let thermostat = Device {
            id: "thermo".into(),
            name: "smart thermostat".into(),
            tier: Tier::Terminal,
            embodied: Embodied {
                production: [("co2e".to_string(), 5.0)].into_iter().collect(),
                end_of_life: BTreeMap::new(),
            },
            lifetime: 87_600.0,
            power_active: 1.0,
            power_idle: 1.0,
            hosted_pue: 1.0,
            support_equipment: false,
            dedicated: true,
        };
        let t = AiTask {
            id: "sense".into(),
            kind: TaskKind::DataAcquisition,
            devices: vec!["thermo".into()],
            profile: EnergyProfile {
                duration: 87_600.0,
                utilization: 0.5,
                n_sharing: 3,
                grid_flow: "kwh".into(),
            },
            consumer: None,
        };
        let exp = devices_to_processes(&[t], &[thermostat], "grid", &[grid()]).unwrap();
        assert_eq!(exp.processes[0].environmental_exchanges["co2e"], 5.0);
        // No end-of-life data: explicit zero process plus a finding.
        assert!(exp.processes[2].environmental_exchanges.is_empty());
        assert_eq!(exp.findings[0].code, FindingCode::EndOfLifeDataGap("thermo".into()));
    }

    #[test]
    fn unknown_references() {
        let mut t = task(1.0, 1);
        t.devices = vec!["nope".into()];
        assert!(matches!(
            devices_to_processes(&[t], &[server(1.0)], "grid", &[grid()]),
            Err(AiServiceError::UnknownDevice { .. })
        ));
        assert!(matches!(
            devices_to_processes(&[task(1.0, 1)], &[server(1.0)], "grid2", &[grid()]),
            Err(AiServiceError::UnknownGridProcess(_))
        ));
    }

    #[test]
    fn usage_longer_than_lifetime_is_rejected() {
        let r = devices_to_processes(&[task(1e9, 1)], &[server(1.0)], "grid", &[grid()]);
        assert!(matches!(
            r,
            Err(AiServiceError::Allocation {
                source: AllocationError::UsageExceedsLifetime { .. },
                ..
            })
        ));
    }

    fn service_parts() -> ScenarioParts {
        ScenarioParts {
            id: "svc".into(),
            label: "svc".into(),
            flows: vec![
                FlowSpec::economic("kwh", "kWh"),
                FlowSpec::economic("model", "model"),
                FlowSpec::emission("co2e", "kg CO2e"),
            ],
            processes: vec![
                grid().ai(true),
                UnitProcess::new("deliver", LifeCycleStage::stage(StageId::Use))
                    .produces("model", 1.0)
                    .ai(true),
            ],
            functional_unit: Some(FunctionalUnit {
                reference_flow: "model".into(),
                quantity: 1.0,
                description: "one trained model".into(),
            }),
            metadata: BTreeMap::new(),
        }
    }

    #[test]
    fn use_phase_gwp_through_assessment() {
        use crate::lci::{assess, CharacterizationTable, ImpactCategory};
        let mut parts = service_parts();
        let findings = expand_service(&mut parts, &[task(10.0, 1)], &[server(1.5)]).unwrap();
        assert!(findings.is_empty());
        let scenario = build_scenario(parts).unwrap();
        let mut factors = BTreeMap::new();
        factors.insert("GWP".to_string(), [("co2e".to_string(), 1.0)].into_iter().collect());
        let table =
            CharacterizationTable::new(vec![ImpactCategory::new("GWP", "GWP", "kg CO2e")], factors)
                .unwrap();
        let r = assess(&scenario, &table).unwrap();
        // 4.5 kWh at 0.06 kg CO2e/kWh
        assert!((r.by_process["grid"][0] - 0.27).abs() < 1e-12);
        assert!((r.by_stage[&StageId::Use][0] - 0.27).abs() < 1e-12);
    }

    #[test]
    fn coverage_of_expanded_service() {
        let mut parts = service_parts();
        expand_service(&mut parts, &[task(10.0, 1)], &[server(1.5)]).unwrap();
        let scenario = build_scenario(parts).unwrap();
        let report = coverage_report(&scenario);
        assert_eq!(report.len(), 11);
        for e in &report {
            let expect_present = e.obligation == Obligation::Mandatory
                && e.sub_process != SubProcess::SupportEquipmentProduction;
            if expect_present {
                assert_eq!(e.status, CoverageStatus::Present, "{}", e.label);
            }
        }
        let strict = coverage_findings(&report, true);
        let errors: Vec<_> = strict.iter().filter(|f| f.is_error()).collect();
        assert_eq!(errors.len(), 1);
        assert_eq!(
            errors[0].code,
            FindingCode::MissingMandatory(SubProcess::SupportEquipmentProduction)
        );
        assert!(coverage_findings(&report, false).iter().all(|f| !f.is_error()));
    }

    #[test]
    fn missing_end_of_life_names_reuse_row() {
        let mut parts = service_parts();
        expand_service(&mut parts, &[task(10.0, 1)], &[server(1.0)]).unwrap();
        parts.processes.retain(|p| p.stage.stage_id() != StageId::EndOfLife);
        // dangling slice consumption does not matter for coverage
        let report = coverage_report(&build_scenario(parts).unwrap());
        let f = coverage_findings(&report, true);
        assert!(f.iter().any(|f| f.is_error()
            && f.message.contains("Preparation of ICT goods for reuse")));
    }
}
