use crate::radio::RateTable;
use crate::solver::{Allocation, Association};
use crate::{Error, Result};

/// Aggregate spectral efficiency of `ue` on `enb`: `sum_r (R^nABS x + R^ABS y)`.
pub fn link_throughput(rates: &RateTable, allocation: &Allocation, ue: usize, enb: usize) -> f64 {
    let rn = rates.nabs_link(ue, enb);
    let ra = rates.abs_link(ue, enb);
    let x = allocation.x_link(ue, enb);
    let y = allocation.y_link(ue, enb);
    (0..rates.num_rbs())
        .map(|r| rn[r] * x[r] + ra[r] * y[r])
        .sum()
}

/// Per-UE utility terms `sum_b S_ub w_u log(...)`, or `-inf` for a UE with a
/// zero-rate attachment.
pub fn per_ue_utility(
    association: &Association,
    allocation: &Allocation,
    rates: &RateTable,
    weights: &[f64],
) -> Vec<f64> {
    (0..association.num_ues())
        .map(|u| {
            let mut total = 0.0;
            for b in 0..association.num_enbs() {
                let s = association.get(u, b);
                if s == 0.0 {
                    continue;
                }
                let t = link_throughput(rates, allocation, u, b);
                if t <= 0.0 {
                    return f64::NEG_INFINITY;
                }
                total += s * weights[u] * t.ln();
            }
            total
        })
        .collect()
}

/// Sum weighted logarithmic utility of a complete operating point.
///
/// Pairs with `S_ub = 0` contribute nothing. A UE attached with zero
/// aggregate rate makes the utility undefined and is reported as infeasible.
pub fn objective(
    association: &Association,
    allocation: &Allocation,
    rates: &RateTable,
    weights: &[f64],
) -> Result<f64> {
    let terms = per_ue_utility(association, allocation, rates, weights);
    if let Some(u) = terms.iter().position(|t| !t.is_finite()) {
        return Err(Error::infeasible(format!(
            "UE {u} has zero aggregate rate on its eNB"
        )));
    }
    Ok(terms.iter().sum())
}
