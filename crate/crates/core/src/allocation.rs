//! Allocation of shared and multifunctional processes.
//!
//! Two operations are provided. Partitioning splits a process that produces
//! several economic flows into one process per flow, dividing its inputs and
//! environmental exchanges by an allocation key. Amortization attributes a
//! time share of a piece of equipment's embodied exchanges to one use.
//!
//! Both operations leave the produced quantities untouched and multiply every
//! other exchange by a scalar, so they commute.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::inventory::UnitProcess;

#[derive(Clone, Debug, PartialEq, thiserror::Error)]
pub enum AllocationError {
    #[error("allocation key for process `{process}` has no weight for produced flow `{flow}`")]
    MissingWeight { process: String, flow: String },
    #[error("allocation key for process `{process}` weights `{flow}`, which the process does not produce")]
    UnknownFunction { process: String, flow: String },
    #[error("allocation weights for process `{0}` sum to zero")]
    ZeroWeightSum(String),
    #[error("allocation weight for `{flow}` must be finite and non-negative, got {value}")]
    InvalidWeight { flow: String, value: f64 },
    #[error("process `{0}` produces no economic flow and cannot be partitioned")]
    NoProducts(String),
    #[error("a {0} key cannot partition a multifunctional process")]
    KeyNotApplicable(&'static str),
    #[error("time share must lie in (0, 1], got {0}")]
    InvalidTimeShare(f64),
    #[error("lifetime must be positive, got {0}")]
    NonPositiveLifetime(f64),
    #[error("usage must be positive, got {0}")]
    NonPositiveUsage(f64),
    #[error("usage {usage} exceeds lifetime {lifetime}")]
    UsageExceedsLifetime { usage: f64, lifetime: f64 },
    #[error("exclusivity must lie in (0, 1], got {0}")]
    InvalidExclusivity(f64),
    #[error("the number of programs sharing a resource must be at least 1")]
    ZeroPrograms,
    #[error("quantity to share must be finite and non-negative, got {0}")]
    InvalidQuantity(f64),
}

/// How the burdens of a shared or multifunctional process are divided.
///
/// Weight-based keys take raw observed quantities (gigabytes, euros); they
/// are normalized internally.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum AllocationKey {
    /// Weights per produced flow, e.g. gigabytes carried by a network.
    DataVolume { weights: BTreeMap<String, f64> },
    /// Weights per produced flow, e.g. the value of storage and compute services.
    EconomicValue { weights: BTreeMap<String, f64> },
    /// Fraction of the process attributed to the system.
    TimeShare { share: f64 },
    /// The process is shared equally by `n` users.
    EqualShare { n: u32 },
}

impl AllocationKey {
    pub fn kind_name(&self) -> &'static str {
        match self {
            AllocationKey::DataVolume { .. } => "data_volume",
            AllocationKey::EconomicValue { .. } => "economic_value",
            AllocationKey::TimeShare { .. } => "time_share",
            AllocationKey::EqualShare { .. } => "equal_share",
        }
    }

    pub fn validate(&self) -> Result<(), AllocationError> {
        match self {
            AllocationKey::DataVolume { weights } | AllocationKey::EconomicValue { weights } => {
                for (flow, &value) in weights {
                    if !(value.is_finite() && value >= 0.0) {
                        return Err(AllocationError::InvalidWeight {
                            flow: flow.clone(),
                            value,
                        });
                    }
                }
                Ok(())
            }
            AllocationKey::TimeShare { share } => {
                if *share > 0.0 && *share <= 1.0 {
                    Ok(())
                } else {
                    Err(AllocationError::InvalidTimeShare(*share))
                }
            }
            AllocationKey::EqualShare { n } => {
                if *n >= 1 {
                    Ok(())
                } else {
                    Err(AllocationError::ZeroPrograms)
                }
            }
        }
    }
}

/// Multiplies every exchange except produced quantities by `factor`.
fn scale_burdens(process: &mut UnitProcess, factor: impl Fn(f64) -> f64) {
    for v in process.economic_exchanges.values_mut() {
        if *v < 0.0 {
            *v = factor(*v);
        }
    }
    for v in process.environmental_exchanges.values_mut() {
        *v = factor(*v);
    }
}

/// Splits a multifunctional process into one process per produced flow.
///
/// Each sub-process keeps the full output of its own flow and receives the
/// normalized-weight share of every input and environmental exchange. The
/// sub-process ids are `<process id>:<flow id>`. A single-function process
/// with a key naming its product is returned unchanged.
pub fn partition_multifunctional(
    process: &UnitProcess,
    key: &AllocationKey,
) -> Result<Vec<UnitProcess>, AllocationError> {
    key.validate()?;
    let weights = match key {
        AllocationKey::DataVolume { weights } | AllocationKey::EconomicValue { weights } => weights,
        other => return Err(AllocationError::KeyNotApplicable(other.kind_name())),
    };
    let products: Vec<(String, f64)> = process
        .products()
        .map(|(f, v)| (f.to_string(), v))
        .collect();
    if products.is_empty() {
        return Err(AllocationError::NoProducts(process.id.clone()));
    }
    for (flow, _) in &products {
        if !weights.contains_key(flow) {
            return Err(AllocationError::MissingWeight {
                process: process.id.clone(),
                flow: flow.clone(),
            });
        }
    }
    if let Some(extra) = weights
        .keys()
        .find(|f| !products.iter().any(|(p, _)| p == *f))
    {
        return Err(AllocationError::UnknownFunction {
            process: process.id.clone(),
            flow: extra.clone(),
        });
    }
    let total: f64 = products.iter().map(|(f, _)| weights[f]).sum();
    if total <= 0.0 {
        return Err(AllocationError::ZeroWeightSum(process.id.clone()));
    }
    if products.len() == 1 {
        return Ok(vec![process.clone()]);
    }

    Ok(products
        .iter()
        .map(|(flow, amount)| {
            let share = weights[flow] / total;
            let mut sub = process.clone();
            sub.id = format!("{}:{}", process.id, flow);
            sub.name = format!("{} [{}]", process.name, flow);
            sub.economic_exchanges.retain(|_, v| *v < 0.0);
            scale_burdens(&mut sub, |v| v * share);
            sub.economic_exchanges.insert(flow.clone(), *amount);
            sub
        })
        .collect())
}

/// Attributes the `usage / lifetime × exclusivity` share of a process's
/// burdens to one use of the equipment. Outputs are kept, the stage is
/// preserved.
pub fn amortize_embodied(
    process: &UnitProcess,
    lifetime: f64,
    usage: f64,
    exclusivity: f64,
) -> Result<UnitProcess, AllocationError> {
    let factor = amortization_factor(lifetime, usage, exclusivity)?;
    let mut out = process.clone();
    scale_burdens(&mut out, |v| v * factor);
    Ok(out)
}

/// `(usage / lifetime) × exclusivity`, after checking the ranges.
pub fn amortization_factor(lifetime: f64, usage: f64, exclusivity: f64) -> Result<f64, AllocationError> {
    if !(lifetime > 0.0 && lifetime.is_finite()) {
        return Err(AllocationError::NonPositiveLifetime(lifetime));
    }
    if !(usage > 0.0 && usage.is_finite()) {
        return Err(AllocationError::NonPositiveUsage(usage));
    }
    if usage > lifetime {
        return Err(AllocationError::UsageExceedsLifetime { usage, lifetime });
    }
    if !(exclusivity > 0.0 && exclusivity <= 1.0) {
        return Err(AllocationError::InvalidExclusivity(exclusivity));
    }
    Ok(usage / lifetime * exclusivity)
}

/// Share of a static consumption attributed to one of `n` simultaneous programs.
pub fn static_share(total: f64, n: u32) -> Result<f64, AllocationError> {
    if n == 0 {
        return Err(AllocationError::ZeroPrograms);
    }
    if !(total.is_finite() && total >= 0.0) {
        return Err(AllocationError::InvalidQuantity(total));
    }
    Ok(total / f64::from(n))
}

/// Applies `key` to `process`: weight keys partition it, share keys scale
/// its burdens (`EqualShare(n)` divides by `n` exactly).
pub fn allocate(process: &UnitProcess, key: &AllocationKey) -> Result<Vec<UnitProcess>, AllocationError> {
    key.validate()?;
    match key {
        AllocationKey::DataVolume { .. } | AllocationKey::EconomicValue { .. } => {
            partition_multifunctional(process, key)
        }
        AllocationKey::TimeShare { share } => {
            let mut out = process.clone();
            scale_burdens(&mut out, |v| v * share);
            Ok(vec![out])
        }
        AllocationKey::EqualShare { n } => {
            let n = f64::from(*n);
            let mut out = process.clone();
            scale_burdens(&mut out, |v| v / n);
            Ok(vec![out])
        }
    }
}
