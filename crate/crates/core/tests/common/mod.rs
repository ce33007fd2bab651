//! Random scenario generation and a dense reference implementation used as
//! an oracle by the integration tests.

#![allow(dead_code)]

use std::collections::BTreeMap;
use std::path::PathBuf;

use ailca::inventory::{Direction, FlowKind};
use ailca::{
    CharacterizationTable, FlowSpec, FunctionalUnit, ImpactCategory, LifeCycleStage, ScenarioParts, StageId, Tier,
    UnitProcess,
};
use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

pub fn bundled(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../scenarios").join(name)
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    rand::SeedableRng::seed_from_u64(seed)
}

pub const CATEGORIES: [&str; 3] = ["GWP", "ADP", "WATER"];

/// Random factor table over `env_flows` with a few absent pairs.
pub fn random_table(rng: &mut ChaCha8Rng, env_flows: usize) -> CharacterizationTable {
    let categories = CATEGORIES
        .iter()
        .map(|c| ImpactCategory::new(*c, *c, "unit"))
        .collect();
    let mut factors = BTreeMap::new();
    for c in CATEGORIES {
        let mut row = BTreeMap::new();
        for k in 0..env_flows {
            if rng.gen_bool(0.8) {
                row.insert(env_id(k), rng.gen_range(0.0..50.0));
            }
        }
        factors.insert(c.to_string(), row);
    }
    CharacterizationTable::new(categories, factors).unwrap()
}

pub fn flow_id(j: usize) -> String {
    format!("p{j:02}")
}

pub fn env_id(k: usize) -> String {
    format!("e{k:02}")
}

/// A valid scenario with `n` processes whose technosphere matrix is
/// strictly column diagonally dominant, hence invertible.
pub fn random_parts(rng: &mut ChaCha8Rng, n: usize, env_flows: usize, id: &str) -> ScenarioParts {
    let mut flows: Vec<FlowSpec> = (0..n).map(|j| FlowSpec::economic(flow_id(j), "u")).collect();
    for k in 0..env_flows {
        let d = if rng.gen_bool(0.7) {
            Direction::Emission
        } else {
            Direction::Extraction
        };
        flows.push(FlowSpec::environmental(env_id(k), "kg", d));
    }
    let stages = [StageId::RawMaterial, StageId::Production, StageId::Use, StageId::EndOfLife];
    let tiers = [None, Some(Tier::Terminal), Some(Tier::Network), Some(Tier::DataCenter)];
    let mut processes = Vec::new();
    for j in 0..n {
        let diag = rng.gen_range(1.0..3.0);
        let mut p = UnitProcess::new(format!("proc-{j:02}"), LifeCycleStage::stage(*stages.choose(rng).unwrap()))
            .ai(rng.gen_bool(0.4))
            .produces(flow_id(j), diag);
        if let Some(t) = *tiers.choose(rng).unwrap() {
            p = p.tier(t);
        }
        if n > 1 {
            let inputs = rng.gen_range(0..=4.min(n - 1));
            let budget = 0.9 * diag;
            let mut others: Vec<usize> = (0..n).filter(|&i| i != j).collect();
            others.shuffle(rng);
            for &i in others.iter().take(inputs) {
                p = p.consumes(flow_id(i), budget / inputs as f64 * rng.gen_range(0.05..1.0));
            }
        }
        for k in 0..env_flows {
            if rng.gen_bool(0.5) {
                p = p.exchanges(env_id(k), rng.gen_range(0.0..10.0));
            }
        }
        processes.push(p);
    }
    processes.shuffle(rng);
    ScenarioParts {
        id: id.to_string(),
        label: id.to_string(),
        flows,
        processes,
        functional_unit: Some(FunctionalUnit {
            reference_flow: flow_id(rng.gen_range(0..n)),
            quantity: rng.gen_range(0.5..20.0),
            description: "random".into(),
        }),
        metadata: BTreeMap::new(),
    }
}

/// Gauss-Jordan inverse with partial pivoting.
pub fn dense_inverse(a: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let n = a.len();
    let mut m: Vec<Vec<f64>> = a
        .iter()
        .enumerate()
        .map(|(i, row)| {
            let mut r = row.clone();
            r.extend((0..n).map(|k| if k == i { 1.0 } else { 0.0 }));
            r
        })
        .collect();
    for col in 0..n {
        let pivot = (col..n)
            .max_by(|&x, &y| m[x][col].abs().total_cmp(&m[y][col].abs()))
            .unwrap();
        assert!(m[pivot][col] != 0.0, "oracle: singular matrix");
        m.swap(col, pivot);
        let p = m[col][col];
        for v in m[col].iter_mut() {
            *v /= p;
        }
        for r in 0..n {
            if r != col && m[r][col] != 0.0 {
                let f = m[r][col];
                let pivot_row = m[col].clone();
                for (v, pv) in m[r].iter_mut().zip(&pivot_row) {
                    *v -= f * pv;
                }
            }
        }
    }
    m.into_iter().map(|r| r[n..].to_vec()).collect()
}

/// Impact totals computed from the raw parts with a dense inverse,
/// independently of the library's matrix assembly and solver.
pub fn oracle_totals(parts: &ScenarioParts, table: &CharacterizationTable) -> Vec<f64> {
    let economic: Vec<&FlowSpec> = parts.flows.iter().filter(|f| f.kind == FlowKind::Economic).collect();
    let environmental: Vec<&FlowSpec> = parts.flows.iter().filter(|f| f.kind != FlowKind::Economic).collect();
    let row = |id: &str| economic.iter().position(|f| f.id == id).unwrap();
    let n = economic.len();
    assert_eq!(n, parts.processes.len(), "oracle expects a square system");
    let mut a = vec![vec![0.0; n]; n];
    for (j, p) in parts.processes.iter().enumerate() {
        for (flow, v) in &p.economic_exchanges {
            a[row(flow)][j] += v;
        }
    }
    let fu = parts.functional_unit.as_ref().unwrap();
    let mut f = vec![0.0; n];
    f[row(&fu.reference_flow)] = fu.quantity;
    let inv = dense_inverse(&a);
    let s: Vec<f64> = inv.iter().map(|r| r.iter().zip(&f).map(|(x, y)| x * y).sum()).collect();

    let mut totals = vec![0.0; table.categories().len()];
    for flow in environmental {
        let amount: f64 = parts
            .processes
            .iter()
            .zip(&s)
            .map(|(p, sj)| p.environmental_exchanges.get(&flow.id).copied().unwrap_or(0.0) * sj)
            .sum();
        for (c, cat) in table.categories().iter().enumerate() {
            totals[c] += table.factor(&cat.id, &flow.id) * amount;
        }
    }
    totals
}

pub fn rel_err(a: f64, b: f64, scale: f64) -> f64 {
    let s = scale.max(a.abs()).max(b.abs());
    if s == 0.0 {
        0.0
    } else {
        (a - b).abs() / s
    }
}

/// Writes one acceptance line straight to the process stdout so that it is
/// visible even when the test harness captures output.
pub fn criterion_line(name: &str, passed: bool, detail: &str) {
    use std::io::Write;
    let line = format!("{} {name}: {detail}\n", if passed { "PASS" } else { "FAIL" });
    let _ = std::io::stdout().lock().write_all(line.as_bytes());
}
