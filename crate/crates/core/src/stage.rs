//! Life-cycle stages and the unit-process classification used for coverage audits.
//!
//! Stages follow the ICT life-cycle breakdown (raw material acquisition,
//! production, use, end of life). Each stage is split into sub-processes, and
//! every sub-process carries a fixed obligation level ([`Obligation`]). The
//! obligation is a property of the sub-process itself and cannot be set by
//! scenario authors.

use std::fmt;

use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum StageId {
    #[serde(rename = "A_RawMaterial")]
    RawMaterial,
    #[serde(rename = "B_Production")]
    Production,
    #[serde(rename = "C_Use")]
    Use,
    #[serde(rename = "D_EndOfLife")]
    EndOfLife,
}

impl StageId {
    pub const ALL: [StageId; 4] = [
        StageId::RawMaterial,
        StageId::Production,
        StageId::Use,
        StageId::EndOfLife,
    ];

    pub fn code(self) -> &'static str {
        match self {
            StageId::RawMaterial => "A_RawMaterial",
            StageId::Production => "B_Production",
            StageId::Use => "C_Use",
            StageId::EndOfLife => "D_EndOfLife",
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            StageId::RawMaterial => "A - Raw material acquisition",
            StageId::Production => "B - Production",
            StageId::Use => "C - Use",
            StageId::EndOfLife => "D - End of life",
        }
    }

    /// Raw material acquisition and production are reported together as the
    /// production phase.
    pub fn is_production_phase(self) -> bool {
        matches!(self, StageId::RawMaterial | StageId::Production)
    }
}

impl fmt::Display for StageId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.code())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Obligation {
    Mandatory,
    Recommended,
}

impl fmt::Display for Obligation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Obligation::Mandatory => "Mandatory",
            Obligation::Recommended => "Recommended",
        })
    }
}

/// One row of the life-cycle classification.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum SubProcess {
    RawMaterialAcquisition,
    DeviceProductionAssembly,
    ManufacturerSupport,
    SupportEquipmentProduction,
    SiteConstruction,
    IctEquipmentUse,
    SupportEquipmentUse,
    OperatorSupport,
    ServiceProviderSupport,
    ReusePreparation,
    StorageDisassemblyDismantlingCrushing,
}

impl SubProcess {
    /// All rows, in classification order.
    pub const ALL: [SubProcess; 11] = [
        SubProcess::RawMaterialAcquisition,
        SubProcess::DeviceProductionAssembly,
        SubProcess::ManufacturerSupport,
        SubProcess::SupportEquipmentProduction,
        SubProcess::SiteConstruction,
        SubProcess::IctEquipmentUse,
        SubProcess::SupportEquipmentUse,
        SubProcess::OperatorSupport,
        SubProcess::ServiceProviderSupport,
        SubProcess::ReusePreparation,
        SubProcess::StorageDisassemblyDismantlingCrushing,
    ];

    pub fn stage(self) -> StageId {
        use SubProcess::*;
        match self {
            RawMaterialAcquisition => StageId::RawMaterial,
            DeviceProductionAssembly
            | ManufacturerSupport
            | SupportEquipmentProduction
            | SiteConstruction => StageId::Production,
            IctEquipmentUse | SupportEquipmentUse | OperatorSupport | ServiceProviderSupport => {
                StageId::Use
            }
            ReusePreparation | StorageDisassemblyDismantlingCrushing => StageId::EndOfLife,
        }
    }

    pub fn obligation(self) -> Obligation {
        use SubProcess::*;
        match self {
            RawMaterialAcquisition
            | DeviceProductionAssembly
            | SupportEquipmentProduction
            | IctEquipmentUse
            | SupportEquipmentUse
            | ReusePreparation
            | StorageDisassemblyDismantlingCrushing => Obligation::Mandatory,
            ManufacturerSupport | SiteConstruction | OperatorSupport | ServiceProviderSupport => {
                Obligation::Recommended
            }
        }
    }

    pub fn label(self) -> &'static str {
        use SubProcess::*;
        match self {
            RawMaterialAcquisition => "Raw material acquisition",
            DeviceProductionAssembly => "Devices production and assembly",
            ManufacturerSupport => "Manufacturer support activities",
            SupportEquipmentProduction => "Production of support equipment",
            SiteConstruction => "ICT-specific site construction",
            IctEquipmentUse => "Use of ICT equipment",
            SupportEquipmentUse => "Use of support equipment",
            OperatorSupport => "Operator support activities",
            ServiceProviderSupport => "Service provider support activities",
            ReusePreparation => "Preparation of ICT goods for reuse",
            StorageDisassemblyDismantlingCrushing => {
                "Storage / disassembly / dismantling / crushing"
            }
        }
    }
}

impl fmt::Display for SubProcess {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} / {}", self.stage().label(), self.label())
    }
}

#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
pub enum StageError {
    #[error("sub-process {sub_process:?} belongs to stage {actual}, not {declared}")]
    SubProcessStageMismatch {
        declared: StageId,
        actual: StageId,
        sub_process: SubProcess,
    },
    #[error("merged sub-process {0:?} duplicates the primary sub-process")]
    DuplicateMerged(SubProcess),
}

/// Stage tag of a unit process.
///
/// `sub_process` is optional so that non-ICT processes (a gas boiler, a
/// building) can be placed in a stage without claiming a classification row.
/// `merged` lists additional rows a lumped process stands for, e.g. a
/// device production process that also covers raw material acquisition.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "StageRepr", into = "StageRepr")]
pub struct LifeCycleStage {
    stage_id: StageId,
    sub_process: Option<SubProcess>,
    merged: Vec<SubProcess>,
}

impl LifeCycleStage {
    /// A stage without a classification row.
    pub fn stage(stage_id: StageId) -> Self {
        LifeCycleStage {
            stage_id,
            sub_process: None,
            merged: Vec::new(),
        }
    }

    pub fn row(sub_process: SubProcess) -> Self {
        LifeCycleStage {
            stage_id: sub_process.stage(),
            sub_process: Some(sub_process),
            merged: Vec::new(),
        }
    }

    pub fn new(
        stage_id: StageId,
        sub_process: Option<SubProcess>,
        merged: impl IntoIterator<Item = SubProcess>,
    ) -> Result<Self, StageError> {
        if let Some(sp) = sub_process {
            if sp.stage() != stage_id {
                return Err(StageError::SubProcessStageMismatch {
                    declared: stage_id,
                    actual: sp.stage(),
                    sub_process: sp,
                });
            }
        }
        let mut merged: Vec<SubProcess> = merged.into_iter().collect();
        merged.sort();
        merged.dedup();
        if let Some(sp) = sub_process {
            if merged.contains(&sp) {
                return Err(StageError::DuplicateMerged(sp));
            }
        }
        Ok(LifeCycleStage {
            stage_id,
            sub_process,
            merged,
        })
    }

    /// Same stage, additionally standing for `rows`.
    pub fn merging(mut self, rows: impl IntoIterator<Item = SubProcess>) -> Self {
        for row in rows {
            if Some(row) != self.sub_process && !self.merged.contains(&row) {
                self.merged.push(row);
            }
        }
        self.merged.sort();
        self
    }

    pub fn stage_id(&self) -> StageId {
        self.stage_id
    }

    pub fn sub_process(&self) -> Option<SubProcess> {
        self.sub_process
    }

    pub fn merged(&self) -> &[SubProcess] {
        &self.merged
    }

    pub fn obligation(&self) -> Option<Obligation> {
        self.sub_process.map(SubProcess::obligation)
    }

    /// Whether a process with this tag counts as present for `row`.
    ///
    /// Stage A has a single row, so any stage-A process covers it.
    pub fn covers(&self, row: SubProcess) -> bool {
        self.sub_process == Some(row)
            || self.merged.contains(&row)
            || (row == SubProcess::RawMaterialAcquisition && self.stage_id == StageId::RawMaterial)
    }
}

#[derive(Serialize, Deserialize)]
struct StageRepr {
    stage_id: StageId,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    sub_process: Option<SubProcess>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    merged: Vec<SubProcess>,
}

impl TryFrom<StageRepr> for LifeCycleStage {
    type Error = StageError;

    fn try_from(r: StageRepr) -> Result<Self, Self::Error> {
        LifeCycleStage::new(r.stage_id, r.sub_process, r.merged)
    }
}

impl From<LifeCycleStage> for StageRepr {
    fn from(s: LifeCycleStage) -> Self {
        StageRepr {
            stage_id: s.stage_id,
            sub_process: s.sub_process,
            merged: s.merged,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn obligations_follow_classification() {
        use Obligation::*;
        let expected = [
            Mandatory,
            Mandatory,
            Recommended,
            Mandatory,
            Recommended,
            Mandatory,
            Mandatory,
            Recommended,
            Recommended,
            Mandatory,
            Mandatory,
        ];
        for (row, want) in SubProcess::ALL.iter().zip(expected) {
            assert_eq!(row.obligation(), want, "{row:?}");
        }
    }

    #[test]
    fn sub_process_must_match_stage() {
        let err = LifeCycleStage::new(StageId::Use, Some(SubProcess::ReusePreparation), [])
            .unwrap_err();
        assert!(matches!(err, StageError::SubProcessStageMismatch { .. }));
    }

    #[test]
    fn merged_rows_count_as_covered() {
        let s = LifeCycleStage::row(SubProcess::DeviceProductionAssembly)
            .merging([SubProcess::RawMaterialAcquisition]);
        assert!(s.covers(SubProcess::RawMaterialAcquisition));
        assert!(s.covers(SubProcess::DeviceProductionAssembly));
        assert!(!s.covers(SubProcess::ManufacturerSupport));
        assert_eq!(s.stage_id(), StageId::Production);
    }

    #[test]
    fn untagged_stage_a_covers_row_a() {
        assert!(LifeCycleStage::stage(StageId::RawMaterial).covers(SubProcess::RawMaterialAcquisition));
        assert!(!LifeCycleStage::stage(StageId::Use).covers(SubProcess::IctEquipmentUse));
    }

    #[test]
    fn obligation_is_not_part_of_the_serialized_form() {
        let s = LifeCycleStage::row(SubProcess::OperatorSupport);
        let json = serde_json::to_string(&s).unwrap();
        assert_eq!(json, r#"{"stage_id":"C_Use","sub_process":"OperatorSupport"}"#);
        let back: LifeCycleStage = serde_json::from_str(&json).unwrap();
        assert_eq!(back.obligation(), Some(Obligation::Recommended));
    }
}
