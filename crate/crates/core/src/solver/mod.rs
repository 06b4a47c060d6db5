//! Joint association / ABS / RB optimisation.
//!
//! The variables split into three blocks that are optimised in turn by
//! [`bcd::bcd_solve`]: the UE-to-logical-eNB association `S`, the ABS
//! fraction `beta`, and the per-RB time shares `x` (non-ABS) and `y` (ABS).

pub mod abs;
pub mod association;
pub mod bcd;
pub mod enumerate;
pub mod objective;
pub mod schedule;
pub mod simplex;

use crate::radio::{Eligibility, EnbKind, RateTable};
use crate::{Error, Result};

pub use abs::{optimal_abs, reduced_abs_objective};
pub use association::{
    association_gradient, association_utility, binary_utility, heuristic_association_step,
    heuristic_fixed_point, improve_jointly, improve_locally, relaxed_association,
    AssociationSearch, RelaxedOptions, RelaxedSolution,
};
pub use bcd::{bcd_solve, AssociationSolver, BcdOptions};
pub use enumerate::{enumerate_at_beta, enumerate_optimum, EnumeratedOptimum};
pub use objective::{objective, per_ue_utility};
pub use schedule::{
    closed_form_allocation, pf_schedule, rb_block, round_robin_schedule, PfOptions, PfResult,
    ScheduleSolver,
};

/// Lower clamp on the ABS fraction when both phases have UEs.
pub const BETA_EPS: f64 = 1e-6;
/// Floor on `Omega_b` inside logarithms, which defines the marginal utility
/// of joining an empty eNB.
pub const OMEGA_FLOOR: f64 = 1e-12;
/// Tolerance for share budgets and relaxed row sums.
pub const SHARE_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AssociationMode {
    Binary,
    Relaxed,
}

/// UE-to-logical-eNB assignment matrix, `(ue, logical_enb)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Association {
    num_ues: usize,
    num_enbs: usize,
    s: Vec<f64>,
    mode: AssociationMode,
}

impl Association {
    pub fn from_serving(num_enbs: usize, serving: &[usize]) -> Self {
        let mut s = vec![0.0; serving.len() * num_enbs];
        for (u, &b) in serving.iter().enumerate() {
            assert!(b < num_enbs, "serving eNB {b} out of range");
            s[u * num_enbs + b] = 1.0;
        }
        Association {
            num_ues: serving.len(),
            num_enbs,
            s,
            mode: AssociationMode::Binary,
        }
    }

    pub fn relaxed(num_ues: usize, num_enbs: usize, s: Vec<f64>) -> Result<Self> {
        if s.len() != num_ues * num_enbs {
            return Err(Error::invalid("association matrix has the wrong size"));
        }
        let a = Association {
            num_ues,
            num_enbs,
            s,
            mode: AssociationMode::Relaxed,
        };
        a.check_rows()?;
        Ok(a)
    }

    fn check_rows(&self) -> Result<()> {
        for u in 0..self.num_ues {
            let row = self.row(u);
            if row.iter().any(|v| !(0.0..=1.0).contains(v)) {
                return Err(Error::invalid(format!(
                    "association row {u} has entries outside [0, 1]"
                )));
            }
            let sum: f64 = row.iter().sum();
            if (sum - 1.0).abs() > SHARE_TOL {
                return Err(Error::invalid(format!("association row {u} sums to {sum}")));
            }
        }
        Ok(())
    }

    pub fn num_ues(&self) -> usize {
        self.num_ues
    }

    pub fn num_enbs(&self) -> usize {
        self.num_enbs
    }

    pub fn mode(&self) -> AssociationMode {
        self.mode
    }

    #[inline]
    pub fn get(&self, ue: usize, enb: usize) -> f64 {
        self.s[ue * self.num_enbs + enb]
    }

    pub fn row(&self, ue: usize) -> &[f64] {
        &self.s[ue * self.num_enbs..(ue + 1) * self.num_enbs]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.s
    }

    /// Serving eNB of each UE. For relaxed associations, the largest entry
    /// of each row (ties to the lowest id).
    pub fn serving(&self) -> Vec<usize> {
        (0..self.num_ues)
            .map(|u| {
                let row = self.row(u);
                let mut best = 0;
                for (b, &v) in row.iter().enumerate() {
                    if v > row[best] {
                        best = b;
                    }
                }
                best
            })
            .collect()
    }

    /// `Omega_b`, the weight attached to each eNB.
    pub fn loads(&self, weights: &[f64]) -> Vec<f64> {
        let mut omega = vec![0.0; self.num_enbs];
        for u in 0..self.num_ues {
            for (b, &s) in self.row(u).iter().enumerate() {
                omega[b] += s * weights[u];
            }
        }
        omega
    }

    pub fn validate(&self, eligibility: &Eligibility) -> Result<()> {
        if self.mode == AssociationMode::Binary {
            for u in 0..self.num_ues {
                let row = self.row(u);
                if row.iter().any(|&v| v != 0.0 && v != 1.0) || row.iter().sum::<f64>() != 1.0 {
                    return Err(Error::invalid(format!(
                        "binary association row {u} is not one-hot"
                    )));
                }
            }
        } else {
            self.check_rows()?;
        }
        for u in 0..self.num_ues {
            for b in 0..self.num_enbs {
                if self.get(u, b) != 0.0 && !eligibility.is_eligible(u, b) {
                    return Err(Error::invalid(format!(
                        "UE {u} attached to ineligible eNB {b}"
                    )));
                }
            }
        }
        Ok(())
    }
}

/// Validated ABS fraction.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct AbsFraction(f64);

impl AbsFraction {
    pub fn new(beta: f64) -> Result<Self> {
        if (0.0..=1.0).contains(&beta) {
            Ok(AbsFraction(beta))
        } else {
            Err(Error::invalid(format!(
                "ABS fraction {beta} outside [0, 1]"
            )))
        }
    }

    pub fn value(self) -> f64 {
        self.0
    }

    /// Budget available to an eNB scheduling in `kind`'s phase.
    pub fn budget(self, kind: EnbKind) -> f64 {
        match kind {
            EnbKind::Macro | EnbKind::PicoCen => 1.0 - self.0,
            EnbKind::PicoCre => self.0,
        }
    }
}

/// Time-frequency shares `x` (non-ABS) and `y` (ABS), `(ue, logical_enb, rb)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Allocation {
    num_ues: usize,
    num_enbs: usize,
    num_rbs: usize,
    x: Vec<f64>,
    y: Vec<f64>,
}

impl Allocation {
    pub fn zeros(num_ues: usize, num_enbs: usize, num_rbs: usize) -> Self {
        let n = num_ues * num_enbs * num_rbs;
        Allocation {
            num_ues,
            num_enbs,
            num_rbs,
            x: vec![0.0; n],
            y: vec![0.0; n],
        }
    }

    pub fn num_ues(&self) -> usize {
        self.num_ues
    }

    pub fn num_enbs(&self) -> usize {
        self.num_enbs
    }

    pub fn num_rbs(&self) -> usize {
        self.num_rbs
    }

    #[inline]
    fn at(&self, ue: usize, enb: usize) -> usize {
        (ue * self.num_enbs + enb) * self.num_rbs
    }

    pub fn x(&self, ue: usize, enb: usize, rb: usize) -> f64 {
        self.x[self.at(ue, enb) + rb]
    }

    pub fn y(&self, ue: usize, enb: usize, rb: usize) -> f64 {
        self.y[self.at(ue, enb) + rb]
    }

    pub fn x_link(&self, ue: usize, enb: usize) -> &[f64] {
        let s = self.at(ue, enb);
        &self.x[s..s + self.num_rbs]
    }

    pub fn y_link(&self, ue: usize, enb: usize) -> &[f64] {
        let s = self.at(ue, enb);
        &self.y[s..s + self.num_rbs]
    }

    pub fn x_link_mut(&mut self, ue: usize, enb: usize) -> &mut [f64] {
        let s = self.at(ue, enb);
        &mut self.x[s..s + self.num_rbs]
    }

    pub fn y_link_mut(&mut self, ue: usize, enb: usize) -> &mut [f64] {
        let s = self.at(ue, enb);
        &mut self.y[s..s + self.num_rbs]
    }

    /// Mutable `(x, y)` shares of one link.
    pub fn links_mut(&mut self, ue: usize, enb: usize) -> (&mut [f64], &mut [f64]) {
        let s = self.at(ue, enb);
        let n = self.num_rbs;
        (&mut self.x[s..s + n], &mut self.y[s..s + n])
    }

    /// Checks the share constraints against `association` and `beta`: per
    /// (eNB, RB) the non-ABS shares sum to `1 - beta` and the ABS shares to
    /// `beta` for every eNB with attached UEs (within [`SHARE_TOL`]); every
    /// share lies in `[0, S_ub]`.
    pub fn check_feasible(&self, association: &Association, beta: AbsFraction) -> Result<()> {
        let beta = beta.value();
        let loads = association.loads(&vec![1.0; self.num_ues]);
        for b in 0..self.num_enbs {
            for r in 0..self.num_rbs {
                let mut sx = 0.0;
                let mut sy = 0.0;
                for u in 0..self.num_ues {
                    let (x, y, s) = (self.x(u, b, r), self.y(u, b, r), association.get(u, b));
                    if !(0.0..=s).contains(&x) || !(0.0..=s).contains(&y) {
                        return Err(Error::invalid(format!(
                            "share out of bounds at ue {u}, eNB {b}, RB {r}: x={x}, y={y}, S={s}"
                        )));
                    }
                    sx += x;
                    sy += y;
                }
                if loads[b] > 0.0
                    && ((sx - (1.0 - beta)).abs() > SHARE_TOL || (sy - beta).abs() > SHARE_TOL)
                {
                    return Err(Error::invalid(format!(
                        "eNB {b}, RB {r}: share sums ({sx}, {sy}) miss budgets ({}, {beta})",
                        1.0 - beta
                    )));
                }
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceEntry {
    pub iteration: usize,
    pub utility: f64,
    pub num_handovers: usize,
    pub beta: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Solution {
    pub association: Association,
    pub beta: AbsFraction,
    pub allocation: Allocation,
    /// Sum weighted log utility; `-inf` when some UE is starved.
    pub utility: f64,
    pub trace: Vec<TraceEntry>,
    pub converged: bool,
    /// UEs attached to an eNB that gives them zero aggregate rate.
    pub starved: Vec<usize>,
    /// Certified bound on the relaxed association problem at the final
    /// `beta`, when computed. Bounds every binary association at that `beta`
    /// under weight-proportional shares and RB-averaged rates; with a numeric
    /// PF schedule on frequency-selective channels the attained utility can
    /// exceed it.
    pub upper_bound: Option<f64>,
}

/// Everything the association, ABS and RB blocks need about a scenario.
#[derive(Debug, Clone, PartialEq)]
pub struct JointProblem {
    pub rates: RateTable,
    pub kinds: Vec<EnbKind>,
    pub eligibility: Eligibility,
    pub weights: Vec<f64>,
}

impl JointProblem {
    pub fn new(
        rates: RateTable,
        kinds: Vec<EnbKind>,
        eligibility: Eligibility,
        weights: Vec<f64>,
    ) -> Result<Self> {
        if kinds.len() != rates.num_enbs()
            || eligibility.num_enbs() != rates.num_enbs()
            || eligibility.num_ues() != rates.num_ues()
            || weights.len() != rates.num_ues()
        {
            return Err(Error::invalid("joint problem dimensions disagree"));
        }
        if let Some(w) = weights.iter().find(|w| !(w.is_finite() && **w > 0.0)) {
            return Err(Error::invalid(format!("weight {w} is not positive")));
        }
        Ok(JointProblem {
            rates,
            kinds,
            eligibility,
            weights,
        })
    }

    /// Problem whose rates are identical on all `num_rbs` RBs. `nabs` and
    /// `abs` are `(ue, logical_enb)` spectral efficiencies; the entries of the
    /// inactive phase for each kind are forced to zero.
    pub fn flat(
        kinds: Vec<EnbKind>,
        nabs: &[f64],
        abs: &[f64],
        eligibility: Eligibility,
        weights: Vec<f64>,
        num_rbs: usize,
    ) -> Result<Self> {
        let nb = kinds.len();
        let nu = weights.len();
        if nabs.len() != nu * nb || abs.len() != nu * nb {
            return Err(Error::invalid("flat rate arrays have the wrong size"));
        }
        let mut rn = Vec::with_capacity(nu * nb * num_rbs);
        let mut ra = Vec::with_capacity(nu * nb * num_rbs);
        for u in 0..nu {
            for (b, kind) in kinds.iter().enumerate() {
                let (vn, va) = match kind.active_phase() {
                    crate::radio::Phase::Nabs => (nabs[u * nb + b], 0.0),
                    crate::radio::Phase::Abs => (0.0, abs[u * nb + b]),
                };
                rn.extend(std::iter::repeat_n(vn, num_rbs));
                ra.extend(std::iter::repeat_n(va, num_rbs));
            }
        }
        let rates = RateTable::from_parts(nu, nb, num_rbs, rn, ra);
        Self::new(rates, kinds, eligibility, weights)
    }

    pub fn num_ues(&self) -> usize {
        self.rates.num_ues()
    }

    pub fn num_enbs(&self) -> usize {
        self.rates.num_enbs()
    }

    pub fn num_rbs(&self) -> usize {
        self.rates.num_rbs()
    }

    /// `R_ub = n [avg_nabs (1 - beta) + avg_abs beta]` for eligible pairs,
    /// zero elsewhere.
    pub fn link_rates(&self, beta: f64) -> Vec<f64> {
        let nu = self.num_ues();
        let nb = self.num_enbs();
        let n = self.num_rbs() as f64;
        let mut out = vec![0.0; nu * nb];
        for u in 0..nu {
            for b in 0..nb {
                if self.eligibility.is_eligible(u, b) {
                    out[u * nb + b] = n
                        * (self.rates.avg_nabs(u, b) * (1.0 - beta)
                            + self.rates.avg_abs(u, b) * beta);
                }
            }
        }
        out
    }
}
