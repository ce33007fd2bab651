//! Comparison of a reference scenario (M1) with an AI-enabled one (M2).
//!
//! `delta = LCA(M2) − LCA(M1)` per category; a negative component is a net
//! benefit in that category. The AI service footprint `lca_ai` is split into
//! its use-stage part `e_term` and the remainder `o_term`, and the avoided
//! impacts are `s_term = LCA(M1) − (LCA(M2) − lca_ai)`, so that
//! `−delta = s_term − e_term − o_term` for every category.
//!
//! Categories are never aggregated into a single score.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::lci::{AssessmentResult, ImpactCategory, ImpactVector};
use crate::stage::StageId;

#[derive(Clone, Debug, PartialEq, thiserror::Error)]
pub enum ComparisonError {
    #[error("category lists differ: [{left}] vs [{right}]")]
    CategoryMismatch { left: String, right: String },
    #[error("tolerance for category `{category}` must be finite and >= 0, got {value}")]
    InvalidTolerance { category: String, value: f64 },
    #[error("expected {expected} tolerances, got {got}")]
    ToleranceCount { expected: usize, got: usize },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Verdict {
    Beneficial,
    Detrimental,
    Neutral,
}

impl Verdict {
    pub fn label(self) -> &'static str {
        match self {
            Verdict::Beneficial => "Beneficial",
            Verdict::Detrimental => "Detrimental",
            Verdict::Neutral => "Neutral",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ComparisonResult {
    pub m1: String,
    pub m2: String,
    pub categories: Vec<ImpactCategory>,
    pub delta: ImpactVector,
    pub lca_ai: ImpactVector,
    pub s_term: ImpactVector,
    pub e_term: ImpactVector,
    pub o_term: ImpactVector,
    /// Category id → verdict. Empty until [`verdict`] is applied.
    pub verdicts: BTreeMap<String, Verdict>,
}

impl ComparisonResult {
    /// Largest relative violation of `−delta = s − e − o` over categories.
    pub fn identity_residual(&self) -> f64 {
        (0..self.delta.len())
            .map(|c| {
                let terms = [self.delta[c], self.s_term[c], self.e_term[c], self.o_term[c]];
                let scale = terms.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
                let r = (-self.delta[c] - (self.s_term[c] - self.e_term[c] - self.o_term[c])).abs();
                if scale == 0.0 {
                    r
                } else {
                    r / scale
                }
            })
            .fold(0.0, f64::max)
    }
}

fn check_categories(m2: &AssessmentResult, m1: &AssessmentResult) -> Result<(), ComparisonError> {
    fn ids(r: &AssessmentResult) -> Vec<&str> {
        r.categories.iter().map(|c| c.id.as_str()).collect()
    }
    if ids(m2) != ids(m1) {
        return Err(ComparisonError::CategoryMismatch {
            left: ids(m2).join(", "),
            right: ids(m1).join(", "),
        });
    }
    Ok(())
}

/// `m2.totals − m1.totals`.
pub fn delta(m2: &AssessmentResult, m1: &AssessmentResult) -> Result<ImpactVector, ComparisonError> {
    check_categories(m2, m1)?;
    Ok(&m2.totals - &m1.totals)
}

/// Sum of contributions of the AI-tagged processes.
pub fn ai_subtotal(assessment: &AssessmentResult) -> ImpactVector {
    assessment.subtotal(|p| p.ai_tagged)
}

/// Use-stage contributions of the AI-tagged processes.
pub fn energy_term(assessment: &AssessmentResult) -> ImpactVector {
    assessment.subtotal(|p| p.ai_tagged && p.stage.stage_id() == StageId::Use)
}

pub fn decompose(m2: &AssessmentResult, m1: &AssessmentResult) -> Result<ComparisonResult, ComparisonError> {
    let delta = delta(m2, m1)?;
    let lca_ai = ai_subtotal(m2);
    let e_term = energy_term(m2);
    let o_term = &lca_ai - &e_term;
    let s_term = &m1.totals - &(&m2.totals - &lca_ai);
    Ok(ComparisonResult {
        m1: m1.scenario_id.clone(),
        m2: m2.scenario_id.clone(),
        categories: m2.categories.clone(),
        delta,
        lca_ai,
        s_term,
        e_term,
        o_term,
        verdicts: BTreeMap::new(),
    })
}

/// Sign rule with a neutral band of half-width `tolerance`.
pub fn classify(delta: f64, tolerance: f64) -> Verdict {
    if delta < -tolerance {
        Verdict::Beneficial
    } else if delta > tolerance {
        Verdict::Detrimental
    } else {
        Verdict::Neutral
    }
}

/// One verdict per category; `tolerances` follows the category order.
pub fn verdict(
    comparison: &ComparisonResult,
    tolerances: &[f64],
) -> Result<BTreeMap<String, Verdict>, ComparisonError> {
    if tolerances.len() != comparison.categories.len() {
        return Err(ComparisonError::ToleranceCount {
            expected: comparison.categories.len(),
            got: tolerances.len(),
        });
    }
    comparison
        .categories
        .iter()
        .zip(tolerances)
        .enumerate()
        .map(|(i, (cat, &tol))| {
            if !(tol >= 0.0 && tol.is_finite()) {
                return Err(ComparisonError::InvalidTolerance {
                    category: cat.id.clone(),
                    value: tol,
                });
            }
            Ok((cat.id.clone(), classify(comparison.delta[i], tol)))
        })
        .collect()
}

/// `decompose` followed by `verdict`, with the verdicts stored in the result.
pub fn compare(
    m2: &AssessmentResult,
    m1: &AssessmentResult,
    tolerances: &[f64],
) -> Result<ComparisonResult, ComparisonError> {
    let mut result = decompose(m2, m1)?;
    result.verdicts = verdict(&result, tolerances)?;
    Ok(result)
}
