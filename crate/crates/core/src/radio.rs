//! SINR and spectral efficiency for the two interference phases.
//!
//! During non-ABS subframes every eNB transmits. During ABS subframes the
//! macros are muted, so pico UEs only see other picos. Each pico is exposed to
//! the solver as two logical sub-eNBs: a cell-centre one served in non-ABS and
//! a range-extension one served in ABS.

use rayon::prelude::*;

use crate::topology::{GainTensor, Tier, Topology};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum EnbKind {
    Macro,
    PicoCen,
    PicoCre,
}

impl EnbKind {
    pub fn as_str(self) -> &'static str {
        match self {
            EnbKind::Macro => "macro",
            EnbKind::PicoCen => "pico_cen",
            EnbKind::PicoCre => "pico_cre",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "macro" => Some(EnbKind::Macro),
            "pico_cen" => Some(EnbKind::PicoCen),
            "pico_cre" => Some(EnbKind::PicoCre),
            _ => None,
        }
    }

    /// The subframe type in which this kind of logical eNB may schedule.
    pub fn active_phase(self) -> Phase {
        match self {
            EnbKind::Macro | EnbKind::PicoCen => Phase::Nabs,
            EnbKind::PicoCre => Phase::Abs,
        }
    }

    pub fn tier(self) -> Tier {
        match self {
            EnbKind::Macro => Tier::Macro,
            EnbKind::PicoCen | EnbKind::PicoCre => Tier::Pico,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Phase {
    Abs,
    Nabs,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LogicalEnb {
    pub id: usize,
    pub kind: EnbKind,
    pub physical: usize,
}

/// Logical eNBs ordered as: macros, pico CEN halves, pico CRE halves.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LogicalEnbIndex {
    entries: Vec<LogicalEnb>,
    num_macros: usize,
    num_picos: usize,
    /// Physical id of the first pico.
    first_pico: usize,
}

impl LogicalEnbIndex {
    pub fn new(topology: &Topology) -> Self {
        let mut entries = Vec::new();
        for e in topology.macros() {
            entries.push(LogicalEnb {
                id: entries.len(),
                kind: EnbKind::Macro,
                physical: e.id,
            });
        }
        for kind in [EnbKind::PicoCen, EnbKind::PicoCre] {
            for e in topology.picos() {
                entries.push(LogicalEnb {
                    id: entries.len(),
                    kind,
                    physical: e.id,
                });
            }
        }
        LogicalEnbIndex {
            entries,
            num_macros: topology.num_macros(),
            num_picos: topology.num_picos(),
            first_pico: topology
                .picos()
                .map(|p| p.id)
                .min()
                .unwrap_or(topology.num_macros()),
        }
    }

    /// Index over `num_macros` macros and `num_picos` picos with physical ids
    /// `0..num_macros` and `num_macros..num_macros + num_picos`.
    pub fn with_counts(num_macros: usize, num_picos: usize) -> Self {
        let mut entries: Vec<LogicalEnb> = (0..num_macros)
            .map(|m| LogicalEnb {
                id: m,
                kind: EnbKind::Macro,
                physical: m,
            })
            .collect();
        for kind in [EnbKind::PicoCen, EnbKind::PicoCre] {
            for p in 0..num_picos {
                entries.push(LogicalEnb {
                    id: entries.len(),
                    kind,
                    physical: num_macros + p,
                });
            }
        }
        LogicalEnbIndex {
            entries,
            num_macros,
            num_picos,
            first_pico: num_macros,
        }
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn entries(&self) -> &[LogicalEnb] {
        &self.entries
    }

    pub fn get(&self, logical: usize) -> LogicalEnb {
        self.entries[logical]
    }

    pub fn kind(&self, logical: usize) -> EnbKind {
        self.entries[logical].kind
    }

    pub fn kinds(&self) -> Vec<EnbKind> {
        self.entries.iter().map(|e| e.kind).collect()
    }

    pub fn num_macros(&self) -> usize {
        self.num_macros
    }

    pub fn num_picos(&self) -> usize {
        self.num_picos
    }

    /// Logical id of the cell-centre half of physical pico `physical`.
    pub fn cen_of(&self, physical: usize) -> usize {
        self.num_macros + (physical - self.first_pico)
    }

    pub fn cre_of(&self, physical: usize) -> usize {
        self.num_macros + self.num_picos + (physical - self.first_pico)
    }
}

/// Per-link received power `P_b * G_ub` with fading averaged out, `(ue, physical_enb)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Rsrp {
    pub num_ues: usize,
    pub num_enbs: usize,
    pub values: Vec<f64>,
}

impl Rsrp {
    pub fn from_gains(topology: &Topology, gains: &GainTensor) -> Self {
        let num_ues = topology.num_ues();
        let num_enbs = topology.num_enbs();
        let mut values = Vec::with_capacity(num_ues * num_enbs);
        for u in 0..num_ues {
            for e in &topology.enbs {
                values.push(e.per_rb_power * gains.long_term(u, e.id));
            }
        }
        Rsrp {
            num_ues,
            num_enbs,
            values,
        }
    }

    pub fn get(&self, ue: usize, enb: usize) -> f64 {
        self.values[ue * self.num_enbs + enb]
    }

    pub fn row(&self, ue: usize) -> &[f64] {
        &self.values[ue * self.num_enbs..(ue + 1) * self.num_enbs]
    }
}

/// Which logical eNBs each UE may attach to, `(ue, logical_enb)`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Eligibility {
    num_ues: usize,
    num_enbs: usize,
    mask: Vec<bool>,
}

impl Eligibility {
    pub fn new(num_ues: usize, num_enbs: usize, mask: Vec<bool>) -> Self {
        assert_eq!(mask.len(), num_ues * num_enbs);
        Eligibility {
            num_ues,
            num_enbs,
            mask,
        }
    }

    /// Every pair eligible.
    pub fn all(num_ues: usize, num_enbs: usize) -> Self {
        Self::new(num_ues, num_enbs, vec![true; num_ues * num_enbs])
    }

    pub fn num_ues(&self) -> usize {
        self.num_ues
    }

    pub fn num_enbs(&self) -> usize {
        self.num_enbs
    }

    #[inline]
    pub fn is_eligible(&self, ue: usize, enb: usize) -> bool {
        self.mask[ue * self.num_enbs + enb]
    }

    pub fn row(&self, ue: usize) -> &[bool] {
        &self.mask[ue * self.num_enbs..(ue + 1) * self.num_enbs]
    }

    pub fn eligible_enbs(&self, ue: usize) -> impl Iterator<Item = usize> + '_ {
        self.row(ue)
            .iter()
            .enumerate()
            .filter(|(_, e)| **e)
            .map(|(b, _)| b)
    }
}

/// A UE is in a pico's nominal (cell-centre) coverage when that pico's
/// unbiased RSRP is at least the strongest macro's. Ties go to the centre.
pub fn classify_cen_cre(rsrp: &Rsrp, topology: &Topology, index: &LogicalEnbIndex) -> Eligibility {
    let mut mask = vec![false; rsrp.num_ues * index.len()];
    for u in 0..rsrp.num_ues {
        let row = &mut mask[u * index.len()..(u + 1) * index.len()];
        let best_macro = topology
            .macros()
            .map(|m| rsrp.get(u, m.id))
            .fold(f64::NEG_INFINITY, f64::max);
        for m in topology.macros() {
            row[m.id] = true;
        }
        for p in topology.picos() {
            if rsrp.get(u, p.id) >= best_macro {
                row[index.cen_of(p.id)] = true;
            } else {
                row[index.cre_of(p.id)] = true;
            }
        }
    }
    Eligibility::new(rsrp.num_ues, index.len(), mask)
}

/// SINR of `ue` on `rb` when served by physical eNB `serving` in `phase`.
///
/// A macro-served UE sees every other eNB regardless of phase. A pico-served
/// UE sees every other eNB in non-ABS and only the other picos in ABS.
pub fn sinr(
    gains: &GainTensor,
    topology: &Topology,
    noise_per_rb: f64,
    ue: usize,
    serving: usize,
    rb: usize,
    phase: Phase,
) -> f64 {
    let serving_tier = topology.enbs[serving].tier;
    let mut interference = noise_per_rb;
    for (k, e) in topology.enbs.iter().enumerate() {
        if k == serving {
            continue;
        }
        let audible = match (serving_tier, e.tier) {
            (Tier::Pico, Tier::Macro) => phase == Phase::Nabs,
            _ => true,
        };
        if audible {
            interference += e.per_rb_power * gains.get(ue, k, rb);
        }
    }
    topology.enbs[serving].per_rb_power * gains.get(ue, serving, rb) / interference
}

pub fn rate_from_sinr(sinr: f64) -> f64 {
    (1.0 + sinr).log2()
}

/// Spectral efficiencies in bits/s/Hz, laid out `(ue, logical_enb, rb)`.
#[derive(Debug, Clone, PartialEq)]
pub struct RateTable {
    num_ues: usize,
    num_enbs: usize,
    num_rbs: usize,
    rate_nabs: Vec<f64>,
    rate_abs: Vec<f64>,
    avg_rate_nabs: Vec<f64>,
    avg_rate_abs: Vec<f64>,
}

impl RateTable {
    /// Builds a table from raw `(ue, logical_enb, rb)` arrays. Averages are
    /// recomputed; entries must be finite and non-negative.
    pub fn from_parts(
        num_ues: usize,
        num_enbs: usize,
        num_rbs: usize,
        rate_nabs: Vec<f64>,
        rate_abs: Vec<f64>,
    ) -> Self {
        let n = num_ues * num_enbs * num_rbs;
        assert_eq!(rate_nabs.len(), n);
        assert_eq!(rate_abs.len(), n);
        assert!(rate_nabs
            .iter()
            .chain(&rate_abs)
            .all(|r| r.is_finite() && *r >= 0.0));
        let mean = |v: &[f64]| -> Vec<f64> {
            v.chunks(num_rbs)
                .map(|c| c.iter().sum::<f64>() / num_rbs as f64)
                .collect()
        };
        RateTable {
            num_ues,
            num_enbs,
            num_rbs,
            avg_rate_nabs: mean(&rate_nabs),
            avg_rate_abs: mean(&rate_abs),
            rate_nabs,
            rate_abs,
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

    pub fn nabs(&self, ue: usize, enb: usize, rb: usize) -> f64 {
        self.rate_nabs[self.at(ue, enb) + rb]
    }

    pub fn abs(&self, ue: usize, enb: usize, rb: usize) -> f64 {
        self.rate_abs[self.at(ue, enb) + rb]
    }

    pub fn nabs_link(&self, ue: usize, enb: usize) -> &[f64] {
        let s = self.at(ue, enb);
        &self.rate_nabs[s..s + self.num_rbs]
    }

    pub fn abs_link(&self, ue: usize, enb: usize) -> &[f64] {
        let s = self.at(ue, enb);
        &self.rate_abs[s..s + self.num_rbs]
    }

    /// Rates of `ue` on `enb` in the given phase.
    pub fn link(&self, ue: usize, enb: usize, phase: Phase) -> &[f64] {
        match phase {
            Phase::Nabs => self.nabs_link(ue, enb),
            Phase::Abs => self.abs_link(ue, enb),
        }
    }

    pub fn avg_nabs(&self, ue: usize, enb: usize) -> f64 {
        self.avg_rate_nabs[ue * self.num_enbs + enb]
    }

    pub fn avg_abs(&self, ue: usize, enb: usize) -> f64 {
        self.avg_rate_abs[ue * self.num_enbs + enb]
    }

    pub fn avg_nabs_slice(&self) -> &[f64] {
        &self.avg_rate_nabs
    }

    pub fn avg_abs_slice(&self) -> &[f64] {
        &self.avg_rate_abs
    }
}

pub fn build_rate_table(
    gains: &GainTensor,
    topology: &Topology,
    index: &LogicalEnbIndex,
    noise_per_rb: f64,
) -> RateTable {
    let num_ues = topology.num_ues();
    let num_rbs = gains.num_rbs();
    let nl = index.len();
    let macros: Vec<usize> = topology.macros().map(|e| e.id).collect();
    let picos: Vec<usize> = topology.picos().map(|e| e.id).collect();

    let per_ue: Vec<(Vec<f64>, Vec<f64>)> = (0..num_ues)
        .into_par_iter()
        .map(|u| {
            let mut nabs = vec![0.0; nl * num_rbs];
            let mut abs = vec![0.0; nl * num_rbs];
            let rx = |k: usize, r: usize| topology.enbs[k].per_rb_power * gains.get(u, k, r);
            let mut macro_rx = vec![0.0; macros.len()];
            let mut pico_rx = vec![0.0; picos.len()];
            for r in 0..num_rbs {
                for (i, &k) in macros.iter().enumerate() {
                    macro_rx[i] = rx(k, r);
                }
                for (i, &k) in picos.iter().enumerate() {
                    pico_rx[i] = rx(k, r);
                }
                let macro_excl = sums_excluding(&macro_rx);
                let pico_excl = sums_excluding(&pico_rx);
                let macro_total: f64 = macro_rx.iter().sum();
                let pico_total: f64 = pico_rx.iter().sum();
                for e in index.entries() {
                    let slot = e.id * num_rbs + r;
                    match e.kind {
                        EnbKind::Macro => {
                            let i = macros.iter().position(|&k| k == e.physical).unwrap();
                            let s = macro_rx[i] / (macro_excl[i] + pico_total + noise_per_rb);
                            nabs[slot] = rate_from_sinr(s);
                        }
                        EnbKind::PicoCen => {
                            let i = picos.iter().position(|&k| k == e.physical).unwrap();
                            let s = pico_rx[i] / (macro_total + pico_excl[i] + noise_per_rb);
                            nabs[slot] = rate_from_sinr(s);
                        }
                        EnbKind::PicoCre => {
                            let i = picos.iter().position(|&k| k == e.physical).unwrap();
                            let s = pico_rx[i] / (pico_excl[i] + noise_per_rb);
                            abs[slot] = rate_from_sinr(s);
                        }
                    }
                }
            }
            (nabs, abs)
        })
        .collect();

    let mut rate_nabs = Vec::with_capacity(num_ues * nl * num_rbs);
    let mut rate_abs = Vec::with_capacity(num_ues * nl * num_rbs);
    for (n, a) in per_ue {
        rate_nabs.extend(n);
        rate_abs.extend(a);
    }
    RateTable::from_parts(num_ues, nl, num_rbs, rate_nabs, rate_abs)
}

/// `out[i] = sum of v[j] for j != i`, without subtracting from the total.
fn sums_excluding(v: &[f64]) -> Vec<f64> {
    let n = v.len();
    let mut out = vec![0.0; n];
    let mut acc = 0.0;
    for i in 0..n {
        out[i] = acc;
        acc += v[i];
    }
    acc = 0.0;
    for i in (0..n).rev() {
        out[i] += acc;
        acc += v[i];
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::topology::{Enb, Ue};

    fn enb(id: usize, tier: Tier, power: f64) -> Enb {
        Enb {
            id,
            tier,
            position: [0.0, 0.0],
            sector_bearing: None,
            per_rb_power: power,
        }
    }

    /// One UE, hand-set gains, `num_macros` macros then `num_picos` picos.
    fn tiny(
        num_macros: usize,
        num_picos: usize,
        gains: Vec<f64>,
        num_rbs: usize,
    ) -> (Topology, GainTensor) {
        let mut enbs = Vec::new();
        for m in 0..num_macros {
            enbs.push(enb(m, Tier::Macro, 4.0));
        }
        for p in 0..num_picos {
            enbs.push(enb(num_macros + p, Tier::Pico, 0.1));
        }
        let nb = enbs.len();
        let nu = gains.len() / (nb * num_rbs);
        let ues = (0..nu)
            .map(|id| Ue {
                id,
                position: [0.0, 0.0],
                weight: 1.0,
                hotspot: None,
            })
            .collect();
        let lt = (0..nu * nb).map(|i| gains[i * num_rbs]).collect();
        (
            Topology { enbs, ues },
            GainTensor::from_parts(nu, nb, num_rbs, gains, lt).unwrap(),
        )
    }

    #[test]
    fn single_pico_abs_is_snr() {
        let (t, g) = tiny(1, 1, vec![1e-9, 1e-8], 1);
        let noise = 1e-12;
        let s_abs = sinr(&g, &t, noise, 0, 1, 0, Phase::Abs);
        assert!((s_abs - 0.1 * 1e-8 / noise).abs() < 1e-9 * s_abs);
        let s_nabs = sinr(&g, &t, noise, 0, 1, 0, Phase::Nabs);
        assert!(s_nabs < s_abs);
    }

    #[test]
    fn macro_sinr_matches_hand_evaluation() {
        // 2 macros, 1 pico, gains chosen by hand.
        let (t, g) = tiny(2, 1, vec![2e-10, 5e-11, 3e-9], 1);
        let noise = 4e-13;
        let got = sinr(&g, &t, noise, 0, 0, 0, Phase::Nabs);
        let want = (4.0 * 2e-10) / (4.0 * 5e-11 + 0.1 * 3e-9 + 4e-13);
        assert!((got - want).abs() <= 1e-12 * want);
        // Macro SINR ignores the phase.
        assert_eq!(got, sinr(&g, &t, noise, 0, 0, 0, Phase::Abs));
        let pico_nabs = sinr(&g, &t, noise, 0, 2, 0, Phase::Nabs);
        let want = (0.1 * 3e-9) / (4.0 * 2e-10 + 4.0 * 5e-11 + 4e-13);
        assert!((pico_nabs - want).abs() <= 1e-12 * want);
    }

    #[test]
    fn rate_of_unit_sinr_is_one_bit() {
        assert_eq!(rate_from_sinr(1.0), 1.0);
        assert!(rate_from_sinr(2.0) > rate_from_sinr(1.0));
    }

    #[test]
    fn rate_table_matches_scalar_loop() {
        // 2 UEs, 1 macro + 1 pico, 2 RBs, arbitrary gains.
        let gains = vec![
            3e-10, 1e-10, 2e-9, 7e-9, // ue 0: macro rb0, rb1, pico rb0, rb1
            5e-11, 9e-11, 4e-8, 1e-8, // ue 1
        ];
        let (t, g) = tiny(1, 1, gains, 2);
        let index = LogicalEnbIndex::new(&t);
        let noise = 1e-13;
        let table = build_rate_table(&g, &t, &index, noise);
        for u in 0..2 {
            for e in index.entries() {
                for r in 0..2 {
                    let (want_n, want_a) = match e.kind {
                        EnbKind::Macro | EnbKind::PicoCen => (
                            (1.0 + sinr(&g, &t, noise, u, e.physical, r, Phase::Nabs)).log2(),
                            0.0,
                        ),
                        EnbKind::PicoCre => (
                            0.0,
                            (1.0 + sinr(&g, &t, noise, u, e.physical, r, Phase::Abs)).log2(),
                        ),
                    };
                    let got_n = table.nabs(u, e.id, r);
                    let got_a = table.abs(u, e.id, r);
                    assert!((got_n - want_n).abs() <= 1e-12 * want_n.max(1e-300));
                    assert!((got_a - want_a).abs() <= 1e-12 * want_a.max(1e-300));
                    assert_eq!(got_n * got_a, 0.0);
                }
            }
        }
    }

    #[test]
    fn logical_index_layout() {
        let index = LogicalEnbIndex::with_counts(3, 2);
        assert_eq!(index.len(), 7);
        assert_eq!(index.kind(0), EnbKind::Macro);
        assert_eq!(index.cen_of(3), 3);
        assert_eq!(index.cre_of(3), 5);
        assert_eq!(index.get(6).physical, 4);
        assert_eq!(index.get(4).kind, EnbKind::PicoCen);
    }

    #[test]
    fn sums_excluding_small() {
        assert_eq!(sums_excluding(&[1.0, 2.0, 4.0]), vec![6.0, 5.0, 3.0]);
        assert_eq!(sums_excluding(&[5.0]), vec![0.0]);
    }

    #[test]
    fn cen_cre_classification() {
        let index = LogicalEnbIndex::with_counts(1, 1);
        let (t, _) = tiny(1, 1, vec![1.0, 1.0, 1.0, 1.0, 1.0, 1.0], 1);
        let db = |x: f64| 10f64.powf(x / 10.0);
        // ue 0: pico 3 dB above macro, ue 1: below, ue 2: exact tie.
        let rsrp = Rsrp {
            num_ues: 3,
            num_enbs: 2,
            values: vec![1.0, db(3.0), 1.0, db(-3.0), 2.0, 2.0],
        };
        let el = classify_cen_cre(&rsrp, &t, &index);
        assert_eq!(el.row(0), &[true, true, false]);
        assert_eq!(el.row(1), &[true, false, true]);
        assert_eq!(el.row(2), &[true, true, false]);
    }
}
