//! Inventory computation and impact assessment.
//!
//! The scaling vector `s` solves `A s = f`, the inventory is `g = B s` and
//! the impact vector is `h = Q g`. Contributions are attributed to the
//! process that directly emits or extracts a flow (column `j` of `B` times
//! `s_j`), then aggregated by stage and tier.

use std::collections::BTreeMap;
use std::fmt;
use std::ops::{Add, AddAssign, Index, Neg, Sub};

use serde::{Deserialize, Serialize};

use crate::finding::{Finding, FindingCode};
use crate::inventory::{Direction, FunctionalUnit, InventoryError, Scenario, Tier};
use crate::sparse::{solve_sparse, CscMatrix, SolveError};
use crate::stage::{LifeCycleStage, StageId};

/// Default cap on the condition estimate above which a warning is raised.
pub const DEFAULT_CONDITION_CAP: f64 = 1e12;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ImpactCategory {
    pub id: String,
    pub name: String,
    pub unit: String,
}

impl ImpactCategory {
    pub fn new(id: impl Into<String>, name: impl Into<String>, unit: impl Into<String>) -> Self {
        ImpactCategory {
            id: id.into(),
            name: name.into(),
            unit: unit.into(),
        }
    }
}

/// A value per impact category, in the order of the characterization table.
#[derive(Clone, Debug, PartialEq, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ImpactVector(Vec<f64>);

impl ImpactVector {
    pub fn zeros(d: usize) -> Self {
        ImpactVector(vec![0.0; d])
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn iter(&self) -> impl Iterator<Item = f64> + '_ {
        self.0.iter().copied()
    }

    pub fn scaled(&self, k: f64) -> Self {
        ImpactVector(self.0.iter().map(|v| v * k).collect())
    }

    /// Largest absolute component.
    pub fn max_abs(&self) -> f64 {
        self.0.iter().fold(0.0, |m, v| m.max(v.abs()))
    }
}

impl From<Vec<f64>> for ImpactVector {
    fn from(v: Vec<f64>) -> Self {
        ImpactVector(v)
    }
}

impl Index<usize> for ImpactVector {
    type Output = f64;

    fn index(&self, i: usize) -> &f64 {
        &self.0[i]
    }
}

impl AddAssign<&ImpactVector> for ImpactVector {
    fn add_assign(&mut self, rhs: &ImpactVector) {
        assert_eq!(self.len(), rhs.len(), "impact vectors of different length");
        for (a, b) in self.0.iter_mut().zip(&rhs.0) {
            *a += b;
        }
    }
}

impl Add for &ImpactVector {
    type Output = ImpactVector;

    fn add(self, rhs: &ImpactVector) -> ImpactVector {
        let mut out = self.clone();
        out += rhs;
        out
    }
}

impl Sub for &ImpactVector {
    type Output = ImpactVector;

    fn sub(self, rhs: &ImpactVector) -> ImpactVector {
        assert_eq!(self.len(), rhs.len(), "impact vectors of different length");
        ImpactVector(self.0.iter().zip(&rhs.0).map(|(a, b)| a - b).collect())
    }
}

impl Neg for &ImpactVector {
    type Output = ImpactVector;

    fn neg(self) -> ImpactVector {
        ImpactVector(self.0.iter().map(|v| -v).collect())
    }
}

#[derive(Clone, Debug, PartialEq, thiserror::Error)]
pub enum CharacterizationError {
    #[error("duplicate impact category `{0}`")]
    DuplicateCategory(String),
    #[error("impact category `{0}` has an empty unit")]
    EmptyUnit(String),
    #[error("factors refer to unknown impact category `{0}`")]
    UnknownCategory(String),
    #[error("factor for `{category}` / `{flow}` is not finite")]
    NonFiniteFactor { category: String, flow: String },
}

/// Factors converting environmental flows into impact-category indicators.
///
/// A factor is expressed per unit of flow moved in the flow's declared
/// direction, so a positive factor is a burden for both emissions and
/// extractions. Pairs without a factor count as zero.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CharacterizationTable {
    categories: Vec<ImpactCategory>,
    /// category id → flow id → factor
    factors: BTreeMap<String, BTreeMap<String, f64>>,
    /// Set on demonstration data that must not be read as authoritative.
    #[serde(default)]
    illustrative: bool,
}

impl CharacterizationTable {
    pub fn new(
        categories: Vec<ImpactCategory>,
        factors: BTreeMap<String, BTreeMap<String, f64>>,
    ) -> Result<Self, CharacterizationError> {
        for (i, c) in categories.iter().enumerate() {
            if categories[..i].iter().any(|o| o.id == c.id) {
                return Err(CharacterizationError::DuplicateCategory(c.id.clone()));
            }
            if c.unit.trim().is_empty() {
                return Err(CharacterizationError::EmptyUnit(c.id.clone()));
            }
        }
        for (cat, row) in &factors {
            if !categories.iter().any(|c| &c.id == cat) {
                return Err(CharacterizationError::UnknownCategory(cat.clone()));
            }
            if let Some((flow, _)) = row.iter().find(|(_, v)| !v.is_finite()) {
                return Err(CharacterizationError::NonFiniteFactor {
                    category: cat.clone(),
                    flow: flow.clone(),
                });
            }
        }
        Ok(CharacterizationTable {
            categories,
            factors,
            illustrative: false,
        })
    }

    pub fn illustrative(mut self, yes: bool) -> Self {
        self.illustrative = yes;
        self
    }

    pub fn is_illustrative(&self) -> bool {
        self.illustrative
    }

    pub fn categories(&self) -> &[ImpactCategory] {
        &self.categories
    }

    pub fn factors(&self) -> &BTreeMap<String, BTreeMap<String, f64>> {
        &self.factors
    }

    pub fn factor(&self, category: &str, flow: &str) -> f64 {
        self.factors
            .get(category)
            .and_then(|row| row.get(flow))
            .copied()
            .unwrap_or(0.0)
    }

    /// Whether any category has a factor for `flow`.
    pub fn knows(&self, flow: &str) -> bool {
        self.factors.values().any(|row| row.contains_key(flow))
    }

    /// Factors of `flow` across all categories.
    pub fn column(&self, flow: &str) -> ImpactVector {
        ImpactVector(
            self.categories
                .iter()
                .map(|c| self.factor(&c.id, flow))
                .collect(),
        )
    }
}

/// `h[c] = Σ_k Q[c,k]·g[k]` over an inventory given in each flow's declared
/// direction. Nonzero flows without any factor contribute nothing and are
/// reported.
pub fn characterize(
    table: &CharacterizationTable,
    inventory: &BTreeMap<String, f64>,
) -> (ImpactVector, Vec<Finding>) {
    let mut h = ImpactVector::zeros(table.categories.len());
    let mut findings = Vec::new();
    for (flow, &amount) in inventory {
        if !table.knows(flow) {
            if amount != 0.0 {
                findings.push(Finding::warning(
                    FindingCode::UnknownFlow(flow.clone()),
                    format!("environmental flow `{flow}` has no characterization factor and is ignored"),
                ));
            }
            continue;
        }
        for (i, c) in table.categories.iter().enumerate() {
            h.0[i] += table.factor(&c.id, flow) * amount;
        }
    }
    (h, findings)
}

#[derive(Clone, Debug)]
pub struct ScalingSolution {
    pub scaling: Vec<f64>,
    pub condition_estimate: f64,
    pub findings: Vec<Finding>,
}

/// Solves `A s = f` by sparse LU. A condition estimate above `condition_cap`
/// is reported as a warning, not an error.
pub fn solve_scaling(
    technosphere: &CscMatrix,
    demand: &[f64],
    condition_cap: f64,
) -> Result<ScalingSolution, SolveError> {
    let sol = solve_sparse(technosphere, demand)?;
    let mut findings = Vec::new();
    // NaN estimates count as ill conditioned.
    #[allow(clippy::neg_cmp_op_on_partial_ord)]
    if !(sol.condition_estimate <= condition_cap) {
        findings.push(Finding::warning(
            FindingCode::IllConditioned {
                estimate: sol.condition_estimate,
            },
            format!(
                "technosphere condition estimate {:e} exceeds {:e}; results may be inaccurate",
                sol.condition_estimate, condition_cap
            ),
        ));
    }
    Ok(ScalingSolution {
        scaling: sol.x,
        condition_estimate: sol.condition_estimate,
        findings,
    })
}

/// Grouping key for the tier breakdown.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TierSlot {
    Terminal,
    Network,
    DataCenter,
    Unassigned,
}

impl From<Option<Tier>> for TierSlot {
    fn from(t: Option<Tier>) -> Self {
        match t {
            Some(Tier::Terminal) => TierSlot::Terminal,
            Some(Tier::Network) => TierSlot::Network,
            Some(Tier::DataCenter) => TierSlot::DataCenter,
            None => TierSlot::Unassigned,
        }
    }
}

impl fmt::Display for TierSlot {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            TierSlot::Terminal => "terminal",
            TierSlot::Network => "network",
            TierSlot::DataCenter => "data_center",
            TierSlot::Unassigned => "unassigned",
        })
    }
}

/// Tags of a process carried into results for grouping and reporting.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProcessTags {
    pub name: String,
    pub stage: LifeCycleStage,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tier: Option<Tier>,
    pub ai_tagged: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AssessmentResult {
    pub scenario_id: String,
    pub label: String,
    pub functional_unit: FunctionalUnit,
    pub categories: Vec<ImpactCategory>,
    pub totals: ImpactVector,
    pub by_process: BTreeMap<String, ImpactVector>,
    pub by_stage: BTreeMap<StageId, ImpactVector>,
    pub by_tier: BTreeMap<TierSlot, ImpactVector>,
    pub ai_subtotal: ImpactVector,
    pub scaling: BTreeMap<String, f64>,
    /// Life-cycle inventory per environmental flow, in the flow's direction.
    pub inventory: BTreeMap<String, f64>,
    pub processes: BTreeMap<String, ProcessTags>,
    pub condition_estimate: f64,
    pub findings: Vec<Finding>,
}

impl AssessmentResult {
    pub fn category_index(&self, id: &str) -> Option<usize> {
        self.categories.iter().position(|c| c.id == id)
    }

    /// Sum of `by_process` over the processes selected by `pred`.
    pub fn subtotal(&self, pred: impl Fn(&ProcessTags) -> bool) -> ImpactVector {
        let mut out = ImpactVector::zeros(self.categories.len());
        for (id, h) in &self.by_process {
            if self.processes.get(id).is_some_and(&pred) {
                out += h;
            }
        }
        out
    }

    /// Share of a category's total coming from raw material acquisition and
    /// production. `None` when the total is zero.
    pub fn production_share(&self, category: usize) -> Option<f64> {
        let total = self.totals[category];
        if total == 0.0 {
            return None;
        }
        let production: f64 = self
            .by_stage
            .iter()
            .filter(|(s, _)| s.is_production_phase())
            .map(|(_, h)| h[category])
            .sum();
        Some(production / total)
    }
}

#[derive(Clone, Debug, PartialEq, thiserror::Error)]
pub enum AssessError {
    #[error(transparent)]
    Inventory(#[from] InventoryError),
    #[error(transparent)]
    Solve(#[from] SolveError),
}

/// Full assessment of a scenario with the default condition cap.
pub fn assess(scenario: &Scenario, table: &CharacterizationTable) -> Result<AssessmentResult, AssessError> {
    assess_with_cap(scenario, table, DEFAULT_CONDITION_CAP)
}

pub fn assess_with_cap(
    scenario: &Scenario,
    table: &CharacterizationTable,
    condition_cap: f64,
) -> Result<AssessmentResult, AssessError> {
    let m = scenario.matrices()?;
    let solution = solve_scaling(&m.technosphere, &m.demand, condition_cap)?;
    let s = &solution.scaling;
    let d = table.categories().len();

    let directions: Vec<f64> = m
        .environmental_flows
        .iter()
        .map(|f| {
            scenario
                .flow(f)
                .and_then(|spec| spec.kind.direction())
                .map_or(1.0, Direction::sign)
        })
        .collect();
    let factor_columns: Vec<ImpactVector> = m
        .environmental_flows
        .iter()
        .map(|f| table.column(f))
        .collect();

    let signed_inventory = m.intervention.mul_vec(s);
    let inventory: BTreeMap<String, f64> = m
        .environmental_flows
        .iter()
        .zip(signed_inventory.iter().zip(&directions))
        .map(|(f, (g, dir))| (f.clone(), g * dir))
        .collect();
    let (totals, mut findings) = characterize(table, &inventory);

    let mut by_process = BTreeMap::new();
    let mut by_stage: BTreeMap<StageId, ImpactVector> = StageId::ALL
        .iter()
        .map(|&st| (st, ImpactVector::zeros(d)))
        .collect();
    let mut by_tier: BTreeMap<TierSlot, ImpactVector> = BTreeMap::new();
    let mut ai_subtotal = ImpactVector::zeros(d);
    let mut processes = BTreeMap::new();
    let mut scaling = BTreeMap::new();

    for (j, pid) in m.processes.iter().enumerate() {
        let process = scenario.process(pid).expect("matrix column names a process");
        let mut h = ImpactVector::zeros(d);
        for (k, b) in m.intervention.column(j) {
            let amount = b * directions[k] * s[j];
            for (hc, qc) in h.0.iter_mut().zip(factor_columns[k].iter()) {
                *hc += qc * amount;
            }
        }
        *by_stage
            .get_mut(&process.stage.stage_id())
            .expect("all stages present") += &h;
        *by_tier
            .entry(TierSlot::from(process.tier))
            .or_insert_with(|| ImpactVector::zeros(d)) += &h;
        if process.ai_tagged {
            ai_subtotal += &h;
        }
        processes.insert(
            pid.clone(),
            ProcessTags {
                name: process.name.clone(),
                stage: process.stage.clone(),
                tier: process.tier,
                ai_tagged: process.ai_tagged,
            },
        );
        scaling.insert(pid.clone(), s[j]);
        by_process.insert(pid.clone(), h);
    }

    findings.extend(solution.findings);
    Ok(AssessmentResult {
        scenario_id: scenario.id().to_string(),
        label: scenario.label().to_string(),
        functional_unit: scenario.functional_unit().clone(),
        categories: table.categories().to_vec(),
        totals,
        by_process,
        by_stage,
        by_tier,
        ai_subtotal,
        scaling,
        inventory,
        processes,
        condition_estimate: solution.condition_estimate,
        findings,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::inventory::{build_scenario, FlowSpec, ScenarioParts, UnitProcess};
    use crate::stage::SubProcess;

    fn gwp_table() -> CharacterizationTable {
        let mut factors = BTreeMap::new();
        factors.insert(
            "GWP".to_string(),
            [("co2".to_string(), 1.0), ("ch4".to_string(), 28.0)]
                .into_iter()
                .collect(),
        );
        CharacterizationTable::new(vec![ImpactCategory::new("GWP", "Global warming", "kg CO2e")], factors)
            .unwrap()
    }

    fn inv(pairs: &[(&str, f64)]) -> BTreeMap<String, f64> {
        pairs.iter().map(|(k, v)| (k.to_string(), *v)).collect()
    }

    #[test]
    fn characterize_unit_factor() {
        let (h, f) = characterize(&gwp_table(), &inv(&[("co2", 5.0)]));
        assert_eq!(h.as_slice(), &[5.0]);
        assert!(f.is_empty());
    }

    #[test]
    fn characterize_dot_product() {
        // 2 × 1 + 1 × 28 (illustrative factor)
        let (h, _) = characterize(&gwp_table(), &inv(&[("co2", 2.0), ("ch4", 1.0)]));
        assert_eq!(h.as_slice(), &[30.0]);
    }

    #[test]
    fn characterize_empty_and_unknown() {
        let (h, f) = characterize(&gwp_table(), &BTreeMap::new());
        assert_eq!(h.as_slice(), &[0.0]);
        assert!(f.is_empty());
        let (h, f) = characterize(&gwp_table(), &inv(&[("n2o", 3.0)]));
        assert_eq!(h.as_slice(), &[0.0]);
        assert_eq!(f[0].code, FindingCode::UnknownFlow("n2o".into()));
    }

    #[test]
    fn table_rejects_bad_input() {
        let cats = vec![
            ImpactCategory::new("GWP", "a", "kg"),
            ImpactCategory::new("GWP", "b", "kg"),
        ];
        assert!(matches!(
            CharacterizationTable::new(cats, BTreeMap::new()),
            Err(CharacterizationError::DuplicateCategory(_))
        ));
        let mut factors = BTreeMap::new();
        factors.insert("ADP".to_string(), BTreeMap::new());
        assert!(matches!(
            CharacterizationTable::new(vec![ImpactCategory::new("GWP", "a", "kg")], factors),
            Err(CharacterizationError::UnknownCategory(_))
        ));
    }

    #[test]
    fn scaling_examples() {
        let a = CscMatrix::from_dense(&[vec![1.0]]);
        assert_eq!(solve_scaling(&a, &[1.0], DEFAULT_CONDITION_CAP).unwrap().scaling, vec![1.0]);
        let a = CscMatrix::from_dense(&[vec![1.0, -1.0], vec![1.0, -1.0]]);
        assert!(matches!(
            solve_scaling(&a, &[1.0, 0.0], DEFAULT_CONDITION_CAP),
            Err(SolveError::SingularSystem { .. })
        ));
    }

    #[test]
    fn ill_conditioning_is_a_warning() {
        let a = CscMatrix::from_dense(&[vec![1.0, 0.0], vec![0.0, 1e-13]]);
        let sol = solve_scaling(&a, &[1.0, 1.0], DEFAULT_CONDITION_CAP).unwrap();
        assert_eq!(sol.findings.len(), 1);
        assert!(matches!(sol.findings[0].code, FindingCode::IllConditioned { .. }));
        assert!(!sol.findings[0].is_error());
    }

    #[test]
    fn heater_pass_through() {
        let parts = ScenarioParts {
            id: "m1".into(),
            label: "M1".into(),
            flows: vec![
                FlowSpec::economic("heat", "m2.year"),
                FlowSpec::emission("co2", "kg"),
            ],
            processes: vec![UnitProcess::new("Heater", LifeCycleStage::stage(StageId::Use))
                .produces("heat", 1.0)
                .exchanges("co2", 600.0)],
            functional_unit: Some(FunctionalUnit {
                reference_flow: "heat".into(),
                quantity: 1.0,
                description: "heating 1m² to 20°C for one year".into(),
            }),
            metadata: BTreeMap::new(),
        };
        let r = assess(&build_scenario(parts).unwrap(), &gwp_table()).unwrap();
        assert_eq!(r.totals.as_slice(), &[600.0]);
        assert_eq!(r.by_stage[&StageId::Use].as_slice(), &[600.0]);
        assert_eq!(r.by_stage[&StageId::Production].as_slice(), &[0.0]);
        assert_eq!(r.by_tier[&TierSlot::Unassigned].as_slice(), &[600.0]);
        assert_eq!(r.ai_subtotal.as_slice(), &[0.0]);
    }

    #[test]
    fn extraction_factor_counts_as_burden() {
        let mut factors = BTreeMap::new();
        factors.insert("ADP".to_string(), [("sb".to_string(), 1.0)].into_iter().collect());
        let table = CharacterizationTable::new(
            vec![ImpactCategory::new("ADP", "Abiotic depletion", "kg Sb-eq")],
            factors,
        )
        .unwrap();
        let parts = ScenarioParts {
            id: "x".into(),
            label: "x".into(),
            flows: vec![FlowSpec::economic("chip", "unit"), FlowSpec::extraction("sb", "kg")],
            processes: vec![UnitProcess::new(
                "fab",
                LifeCycleStage::row(SubProcess::DeviceProductionAssembly),
            )
            .produces("chip", 1.0)
            .exchanges("sb", 0.002)
            .ai(true)],
            functional_unit: Some(FunctionalUnit {
                reference_flow: "chip".into(),
                quantity: 2.0,
                description: "two chips".into(),
            }),
            metadata: BTreeMap::new(),
        };
        let r = assess(&build_scenario(parts).unwrap(), &table).unwrap();
        assert!((r.totals[0] - 0.004).abs() < 1e-15);
        assert!((r.inventory["sb"] - 0.004).abs() < 1e-15);
        assert_eq!(r.ai_subtotal, r.totals);
    }
}
