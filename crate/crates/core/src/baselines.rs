//! Conventional reference schemes: (biased) max-RSRP association with a
//! fixed ABS fraction and PF or round-robin scheduling.

use serde::{Deserialize, Serialize};

use crate::radio::{LogicalEnbIndex, Rsrp};
use crate::solver::{
    objective, per_ue_utility, rb_block, AbsFraction, Association, PfOptions, ScheduleSolver,
    Solution, TraceEntry,
};
use crate::topology::{Tier, Topology};
use crate::{Error, Result, Scenario};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BaselineAssociation {
    MaxRsrp,
    BiasedRsrp { bias_db: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BaselineScheduler {
    RoundRobin,
    Pf,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BaselineSpec {
    pub association: BaselineAssociation,
    pub beta: f64,
    pub scheduler: BaselineScheduler,
}

impl BaselineSpec {
    pub fn validate(&self) -> Result<()> {
        if let BaselineAssociation::BiasedRsrp { bias_db } = self.association {
            if !(bias_db.is_finite() && bias_db >= 0.0) {
                return Err(Error::config(format!(
                    "bias_db must be >= 0, got {bias_db}"
                )));
            }
        }
        if !(0.0..=1.0).contains(&self.beta) {
            return Err(Error::config(format!(
                "beta must lie in [0, 1], got {}",
                self.beta
            )));
        }
        Ok(())
    }
}

/// Serving logical eNB per UE when pico RSRPs are boosted by `bias_db`.
/// UEs whose strongest biased cell is a pico they would not pick unbiased
/// land on that pico's CRE half. Ties go to the lowest physical id.
pub fn biased_rsrp_association(
    rsrp: &Rsrp,
    topology: &Topology,
    index: &LogicalEnbIndex,
    bias_db: f64,
) -> Association {
    let gain = 10f64.powf(bias_db / 10.0);
    let serving: Vec<usize> = (0..rsrp.num_ues)
        .map(|u| {
            let row = rsrp.row(u);
            let mut best = 0;
            let mut best_val = f64::NEG_INFINITY;
            let mut best_macro = f64::NEG_INFINITY;
            for e in &topology.enbs {
                let v = match e.tier {
                    Tier::Macro => {
                        best_macro = best_macro.max(row[e.id]);
                        row[e.id]
                    }
                    Tier::Pico => row[e.id] * gain,
                };
                if v > best_val {
                    best = e.id;
                    best_val = v;
                }
            }
            match topology.enbs[best].tier {
                Tier::Macro => best,
                Tier::Pico if row[best] >= best_macro => index.cen_of(best),
                Tier::Pico => index.cre_of(best),
            }
        })
        .collect();
    Association::from_serving(index.len(), &serving)
}

/// Strongest unbiased cell per UE.
pub fn max_rsrp_association(
    rsrp: &Rsrp,
    topology: &Topology,
    index: &LogicalEnbIndex,
) -> Association {
    biased_rsrp_association(rsrp, topology, index, 0.0)
}

/// Evaluates a fixed scheme. UEs left with no rate (CRE UEs at `beta = 0`,
/// macro UEs at `beta = 1`) are reported in `starved` and make the utility
/// `-inf`.
pub fn run_baseline(spec: &BaselineSpec, scenario: &Scenario) -> Result<Solution> {
    spec.validate()?;
    let bias = match spec.association {
        BaselineAssociation::MaxRsrp => 0.0,
        BaselineAssociation::BiasedRsrp { bias_db } => bias_db,
    };
    let association =
        biased_rsrp_association(&scenario.rsrp, &scenario.topology, &scenario.index, bias);
    let beta = AbsFraction::new(spec.beta)?;
    let solver = match spec.scheduler {
        BaselineScheduler::Pf => ScheduleSolver::PfNumeric,
        BaselineScheduler::RoundRobin => ScheduleSolver::RoundRobin,
    };
    let problem = &scenario.problem;
    let allocation = rb_block(&association, beta, problem, solver, &PfOptions::default())?;
    let terms = per_ue_utility(&association, &allocation, &problem.rates, &problem.weights);
    let starved: Vec<usize> = (0..terms.len())
        .filter(|&u| !terms[u].is_finite())
        .collect();
    let utility = if starved.is_empty() {
        objective(&association, &allocation, &problem.rates, &problem.weights)?
    } else {
        f64::NEG_INFINITY
    };
    Ok(Solution {
        trace: vec![TraceEntry {
            iteration: 0,
            utility,
            num_handovers: 0,
            beta: beta.value(),
        }],
        association,
        beta,
        allocation,
        utility,
        converged: true,
        starved,
        upper_bound: None,
    })
}
