//! Physical layout and channel gains.
//!
//! Macros sit on a hexagonal site grid (spiral order from the centre site),
//! each site carrying `sectors_per_macro` co-located omni sector eNBs. Picos
//! are dropped uniformly inside their parent sector. All randomness is drawn
//! from per-entity ChaCha streams derived from the scenario seed, so results
//! do not depend on evaluation order or thread count.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp1, StandardNormal};
use rayon::prelude::*;

use crate::config::{FadingModel, NetworkConfig, PathLossParams};
use crate::{Error, Result};

const MAX_PLACEMENT_TRIES: usize = 10_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Tier {
    Macro,
    Pico,
}

impl Tier {
    pub fn as_str(self) -> &'static str {
        match self {
            Tier::Macro => "macro",
            Tier::Pico => "pico",
        }
    }

    pub fn parse(s: &str) -> Option<Tier> {
        match s {
            "macro" => Some(Tier::Macro),
            "pico" => Some(Tier::Pico),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Enb {
    pub id: usize,
    pub tier: Tier,
    pub position: [f64; 2],
    /// Boresight of the sector in radians; `None` for picos.
    pub sector_bearing: Option<f64>,
    /// Transmit power per RB in watts.
    pub per_rb_power: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Ue {
    pub id: usize,
    pub position: [f64; 2],
    pub weight: f64,
    /// Physical id of the pico whose hotspot this UE was dropped in.
    pub hotspot: Option<usize>,
}

/// Physical network. Macros come first in `enbs`, followed by picos.
#[derive(Debug, Clone, PartialEq)]
pub struct Topology {
    pub enbs: Vec<Enb>,
    pub ues: Vec<Ue>,
}

impl Topology {
    pub fn num_ues(&self) -> usize {
        self.ues.len()
    }

    pub fn num_enbs(&self) -> usize {
        self.enbs.len()
    }

    pub fn macros(&self) -> impl Iterator<Item = &Enb> {
        self.enbs.iter().filter(|e| e.tier == Tier::Macro)
    }

    pub fn picos(&self) -> impl Iterator<Item = &Enb> {
        self.enbs.iter().filter(|e| e.tier == Tier::Pico)
    }

    pub fn num_macros(&self) -> usize {
        self.macros().count()
    }

    pub fn num_picos(&self) -> usize {
        self.picos().count()
    }

    pub fn weights(&self) -> Vec<f64> {
        self.ues.iter().map(|u| u.weight).collect()
    }

    pub fn distance(&self, ue: usize, enb: usize) -> f64 {
        dist(self.ues[ue].position, self.enbs[enb].position)
    }
}

/// Dense `(ue, physical_enb, rb)` tensor of linear power gains.
#[derive(Debug, Clone, PartialEq)]
pub struct GainTensor {
    num_ues: usize,
    num_enbs: usize,
    num_rbs: usize,
    gains: Vec<f64>,
    /// Path loss and shadowing only, per `(ue, enb)`.
    long_term: Vec<f64>,
}

impl GainTensor {
    pub fn from_parts(
        num_ues: usize,
        num_enbs: usize,
        num_rbs: usize,
        gains: Vec<f64>,
        long_term: Vec<f64>,
    ) -> Result<Self> {
        if gains.len() != num_ues * num_enbs * num_rbs || long_term.len() != num_ues * num_enbs {
            return Err(Error::invalid(
                "gain tensor dimensions do not match data length",
            ));
        }
        if let Some(g) = gains
            .iter()
            .chain(&long_term)
            .find(|g| !(g.is_finite() && **g > 0.0))
        {
            return Err(Error::invalid(format!(
                "gain {g} is not positive and finite"
            )));
        }
        Ok(GainTensor {
            num_ues,
            num_enbs,
            num_rbs,
            gains,
            long_term,
        })
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
    pub fn get(&self, ue: usize, enb: usize, rb: usize) -> f64 {
        self.gains[(ue * self.num_enbs + enb) * self.num_rbs + rb]
    }

    /// Gains of one link across all RBs.
    pub fn link(&self, ue: usize, enb: usize) -> &[f64] {
        let start = (ue * self.num_enbs + enb) * self.num_rbs;
        &self.gains[start..start + self.num_rbs]
    }

    pub fn long_term(&self, ue: usize, enb: usize) -> f64 {
        self.long_term[ue * self.num_enbs + enb]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.gains
    }

    pub fn long_term_slice(&self) -> &[f64] {
        &self.long_term
    }
}

/// Path loss in dB for a link of `distance` meters to an eNB of `tier`.
pub fn path_loss_db(distance: f64, tier: Tier, params: &PathLossParams) -> f64 {
    let d_km = distance.max(params.min_distance_m) / 1000.0;
    match tier {
        Tier::Macro => params.macro_intercept_db + params.macro_slope_db * d_km.log10(),
        Tier::Pico => params.pico_intercept_db + params.pico_slope_db * d_km.log10(),
    }
}

// Stream identifiers for seed derivation.
const STREAM_PICO: u64 = 1;
const STREAM_UE: u64 = 2;
const STREAM_SHADOW: u64 = 3;
const STREAM_FADING: u64 = 4;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn entity_rng(seed: u64, stream: u64, index: u64) -> ChaCha8Rng {
    let s = splitmix64(splitmix64(splitmix64(seed) ^ stream) ^ index);
    ChaCha8Rng::seed_from_u64(s)
}

fn dist(a: [f64; 2], b: [f64; 2]) -> f64 {
    (a[0] - b[0]).hypot(a[1] - b[1])
}

/// Site centres in spiral order: centre first, then ring by ring.
pub fn hex_site_positions(num_sites: usize, isd: f64) -> Vec<[f64; 2]> {
    const DIRS: [(i64, i64); 6] = [(1, 0), (1, -1), (0, -1), (-1, 0), (-1, 1), (0, 1)];
    let axial_to_xy = |q: i64, r: i64| {
        [
            isd * (q as f64 + r as f64 / 2.0),
            isd * (3f64.sqrt() / 2.0) * r as f64,
        ]
    };
    let mut out = vec![axial_to_xy(0, 0)];
    let mut ring = 1i64;
    while out.len() < num_sites {
        let (mut q, mut r) = (DIRS[4].0 * ring, DIRS[4].1 * ring);
        'ring: for dir in DIRS {
            for _ in 0..ring {
                out.push(axial_to_xy(q, r));
                if out.len() == num_sites {
                    break 'ring;
                }
                q += dir.0;
                r += dir.1;
            }
        }
        ring += 1;
    }
    out.truncate(num_sites);
    out
}

/// Whether `p` (relative to the site centre) lies in the site's hexagonal cell.
fn in_site_hexagon(p: [f64; 2], isd: f64) -> bool {
    // Neighbouring sites lie along 0, 60 and 120 degrees.
    let half = isd / 2.0;
    [0.0, PI / 3.0, 2.0 * PI / 3.0]
        .iter()
        .all(|a: &f64| (p[0] * a.cos() + p[1] * a.sin()).abs() <= half)
}

fn sample_in_disc<R: Rng>(rng: &mut R, centre: [f64; 2], radius: f64) -> [f64; 2] {
    let r = radius * rng.random::<f64>().sqrt();
    let theta = 2.0 * PI * rng.random::<f64>();
    [centre[0] + r * theta.cos(), centre[1] + r * theta.sin()]
}

/// Uniform point in the site hexagon restricted to the sector wedge.
fn sample_in_sector<R: Rng>(
    rng: &mut R,
    site: [f64; 2],
    bearing: f64,
    width: f64,
    isd: f64,
) -> [f64; 2] {
    let circumradius = isd / 3f64.sqrt();
    loop {
        let r = circumradius * rng.random::<f64>().sqrt();
        let theta = bearing + (rng.random::<f64>() - 0.5) * width;
        let rel = [r * theta.cos(), r * theta.sin()];
        if in_site_hexagon(rel, isd) {
            return [site[0] + rel[0], site[1] + rel[1]];
        }
    }
}

fn sample_in_macro_area<R: Rng>(rng: &mut R, sites: &[[f64; 2]], isd: f64) -> [f64; 2] {
    let site = sites[rng.random_range(0..sites.len())];
    let circumradius = isd / 3f64.sqrt();
    loop {
        let rel = [
            (2.0 * rng.random::<f64>() - 1.0) * circumradius,
            (2.0 * rng.random::<f64>() - 1.0) * circumradius,
        ];
        if in_site_hexagon(rel, isd) {
            return [site[0] + rel[0], site[1] + rel[1]];
        }
    }
}

pub fn generate_layout(config: &NetworkConfig) -> Result<Topology> {
    config.validate()?;
    let isd = config.inter_site_distance;
    let sites = hex_site_positions(config.num_macro_sites, isd);
    let sectors = config.sectors_per_macro;
    let sector_width = 2.0 * PI / sectors as f64;

    let mut enbs = Vec::with_capacity(config.num_macros() + config.num_picos());
    for &site in &sites {
        for k in 0..sectors {
            enbs.push(Enb {
                id: enbs.len(),
                tier: Tier::Macro,
                position: site,
                sector_bearing: Some(k as f64 * sector_width),
                per_rb_power: config.macro_power_per_rb(),
            });
        }
    }

    let min_pico_sep = 2.0 * config.hotspot_radius;
    let mut picos: Vec<[f64; 2]> = Vec::with_capacity(config.num_picos());
    for sector in 0..config.num_macros() {
        let site = sites[sector / sectors];
        let bearing = enbs[sector].sector_bearing.unwrap_or(0.0);
        let mut rng = entity_rng(config.seed, STREAM_PICO, sector as u64);
        for _ in 0..config.picos_per_sector {
            let mut placed = None;
            for _ in 0..MAX_PLACEMENT_TRIES {
                let p = sample_in_sector(&mut rng, site, bearing, sector_width, isd);
                let clear_of_macros = sites
                    .iter()
                    .all(|&s| dist(p, s) >= config.min_pico_macro_distance);
                let clear_of_picos = picos.iter().all(|&q| dist(p, q) >= min_pico_sep);
                if clear_of_macros && clear_of_picos {
                    placed = Some(p);
                    break;
                }
            }
            let p = placed.ok_or_else(|| {
                Error::config(format!(
                    "could not place pico in sector {sector} after {MAX_PLACEMENT_TRIES} tries; \
                     reduce picos_per_sector or hotspot_radius"
                ))
            })?;
            picos.push(p);
        }
    }
    let first_pico = enbs.len();
    for p in &picos {
        enbs.push(Enb {
            id: enbs.len(),
            tier: Tier::Pico,
            position: *p,
            sector_bearing: None,
            per_rb_power: config.pico_power_per_rb(),
        });
    }

    let num_hotspot = config.num_hotspot_ues();
    let ues = (0..config.num_ues)
        .map(|id| {
            let mut rng = entity_rng(config.seed, STREAM_UE, id as u64);
            let weight = config.ue_weights.as_ref().map_or(1.0, |w| w[id]);
            if id < num_hotspot {
                let pico = id % picos.len();
                Ue {
                    id,
                    position: sample_in_disc(&mut rng, picos[pico], config.hotspot_radius),
                    weight,
                    hotspot: Some(first_pico + pico),
                }
            } else {
                Ue {
                    id,
                    position: sample_in_macro_area(&mut rng, &sites, isd),
                    weight,
                    hotspot: None,
                }
            }
        })
        .collect();

    Ok(Topology { enbs, ues })
}

pub fn build_gain_tensor(topology: &Topology, config: &NetworkConfig) -> GainTensor {
    let num_ues = topology.num_ues();
    let num_enbs = topology.num_enbs();
    let num_rbs = config.num_rbs;
    let sigma = config.shadowing_sigma;

    let per_ue: Vec<(Vec<f64>, Vec<f64>)> = (0..num_ues)
        .into_par_iter()
        .map(|u| {
            let mut shadow_rng = entity_rng(config.seed, STREAM_SHADOW, u as u64);
            let mut fading_rng = entity_rng(config.seed, STREAM_FADING, u as u64);
            let mut gains = Vec::with_capacity(num_enbs * num_rbs);
            let mut long_term = Vec::with_capacity(num_enbs);
            for (b, enb) in topology.enbs.iter().enumerate() {
                let pl = path_loss_db(topology.distance(u, b), enb.tier, &config.path_loss);
                let z: f64 = StandardNormal.sample(&mut shadow_rng);
                let lt = 10f64.powf(-(pl + sigma * z) / 10.0);
                long_term.push(lt);
                match config.fading_model {
                    FadingModel::None => gains.extend(std::iter::repeat_n(lt, num_rbs)),
                    FadingModel::RayleighBlock => {
                        for _ in 0..num_rbs {
                            let h: f64 = Exp1.sample(&mut fading_rng);
                            gains.push(lt * h.max(1e-12));
                        }
                    }
                }
            }
            (gains, long_term)
        })
        .collect();

    let mut gains = Vec::with_capacity(num_ues * num_enbs * num_rbs);
    let mut long_term = Vec::with_capacity(num_ues * num_enbs);
    for (g, lt) in per_ue {
        gains.extend(g);
        long_term.extend(lt);
    }
    GainTensor {
        num_ues,
        num_enbs,
        num_rbs,
        gains,
        long_term,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> NetworkConfig {
        NetworkConfig {
            num_rbs: 4,
            ..NetworkConfig::default()
        }
    }

    #[test]
    fn path_loss_reference_points() {
        let p = PathLossParams::default();
        assert!((path_loss_db(1000.0, Tier::Macro, &p) - 128.1).abs() < 1e-12);
        assert!((path_loss_db(1000.0, Tier::Pico, &p) - 140.7).abs() < 1e-12);
        assert_eq!(
            path_loss_db(5.0, Tier::Macro, &p),
            path_loss_db(10.0, Tier::Macro, &p)
        );
        assert_eq!(
            path_loss_db(0.0, Tier::Pico, &p),
            path_loss_db(10.0, Tier::Pico, &p)
        );
        assert!(path_loss_db(200.0, Tier::Macro, &p) > path_loss_db(100.0, Tier::Macro, &p));
    }

    #[test]
    fn counts_follow_config() {
        let t = generate_layout(&small()).unwrap();
        assert_eq!(t.num_macros(), 3);
        assert_eq!(t.num_picos(), 6);
        assert_eq!(t.num_ues(), 120);
        assert!(t.enbs.iter().take(3).all(|e| e.tier == Tier::Macro));
    }

    #[test]
    fn hotspot_split() {
        let c = NetworkConfig {
            num_ues: 1260,
            num_rbs: 1,
            ..small()
        };
        let t = generate_layout(&c).unwrap();
        let hot = t.ues.iter().filter(|u| u.hotspot.is_some()).count();
        assert_eq!(hot, 840);
        assert_eq!(t.num_ues() - hot, 420);
        for u in t.ues.iter().filter(|u| u.hotspot.is_some()) {
            let p = &t.enbs[u.hotspot.unwrap()];
            assert!(dist(u.position, p.position) <= c.hotspot_radius + 1e-9);
        }
    }

    #[test]
    fn pico_geometry_constraints() {
        for seed in 0..20 {
            let c = NetworkConfig { seed, ..small() };
            let t = generate_layout(&c).unwrap();
            let picos: Vec<_> = t.picos().collect();
            for (i, a) in picos.iter().enumerate() {
                assert!(dist(a.position, [0.0, 0.0]) >= 75.0);
                for b in &picos[i + 1..] {
                    assert!(dist(a.position, b.position) >= 2.0 * c.hotspot_radius);
                }
            }
        }
    }

    #[test]
    fn picos_stay_in_their_sector() {
        let c = small();
        let t = generate_layout(&c).unwrap();
        for (k, p) in t.picos().enumerate() {
            let sector = k / c.picos_per_sector;
            let bearing = t.enbs[sector].sector_bearing.unwrap();
            let angle = p.position[1].atan2(p.position[0]);
            let mut off = (angle - bearing).rem_euclid(2.0 * PI);
            if off > PI {
                off -= 2.0 * PI;
            }
            assert!(off.abs() <= PI / 3.0 + 1e-9, "pico {k} off by {off}");
        }
    }

    #[test]
    fn spiral_grid() {
        let sites = hex_site_positions(7, 500.0);
        assert_eq!(sites.len(), 7);
        assert_eq!(sites[0], [0.0, 0.0]);
        for s in &sites[1..] {
            assert!((dist(*s, [0.0, 0.0]) - 500.0).abs() < 1e-9);
        }
        for i in 1..7 {
            for j in i + 1..7 {
                assert!(dist(sites[i], sites[j]) >= 500.0 - 1e-9);
            }
        }
    }

    #[test]
    fn deterministic_and_seed_sensitive() {
        let c = small();
        let a = generate_layout(&c).unwrap();
        let b = generate_layout(&c).unwrap();
        assert_eq!(a, b);
        let ga = build_gain_tensor(&a, &c);
        let gb = build_gain_tensor(&b, &c);
        assert_eq!(ga, gb);
        let other = generate_layout(&NetworkConfig { seed: 2, ..c }).unwrap();
        assert!(a
            .ues
            .iter()
            .zip(&other.ues)
            .any(|(x, y)| x.position != y.position));
    }

    #[test]
    fn gains_independent_of_thread_count() {
        let c = NetworkConfig {
            fading_model: FadingModel::RayleighBlock,
            ..small()
        };
        let t = generate_layout(&c).unwrap();
        let reference = build_gain_tensor(&t, &c);
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(3)
            .build()
            .unwrap();
        let other = pool.install(|| build_gain_tensor(&t, &c));
        assert_eq!(reference, other);
        let single = rayon::ThreadPoolBuilder::new()
            .num_threads(1)
            .build()
            .unwrap();
        assert_eq!(reference, single.install(|| build_gain_tensor(&t, &c)));
    }

    #[test]
    fn flat_fading_is_constant_over_rbs() {
        let c = small();
        let t = generate_layout(&c).unwrap();
        let g = build_gain_tensor(&t, &c);
        for u in 0..t.num_ues() {
            for b in 0..t.num_enbs() {
                let link = g.link(u, b);
                assert!(link
                    .iter()
                    .all(|&x| x == link[0] && x > 0.0 && x.is_finite()));
                assert_eq!(link[0], g.long_term(u, b));
            }
        }
    }

    #[test]
    fn no_shadowing_gives_pure_path_loss() {
        let c = NetworkConfig {
            shadowing_sigma: 0.0,
            ..small()
        };
        let t = generate_layout(&c).unwrap();
        let g = build_gain_tensor(&t, &c);
        for u in 0..t.num_ues() {
            for (b, e) in t.enbs.iter().enumerate() {
                let pl = path_loss_db(t.distance(u, b), e.tier, &c.path_loss);
                assert_eq!(g.get(u, b, 0), 10f64.powf(-pl / 10.0));
            }
            // Nearest eNB of a tier is at least as strong as the farthest.
            for tier in [Tier::Macro, Tier::Pico] {
                let links: Vec<(f64, f64)> = t
                    .enbs
                    .iter()
                    .filter(|e| e.tier == tier)
                    .map(|e| (t.distance(u, e.id), g.get(u, e.id, 0)))
                    .collect();
                let near = links.iter().min_by(|a, b| a.0.total_cmp(&b.0)).unwrap();
                let far = links.iter().max_by(|a, b| a.0.total_cmp(&b.0)).unwrap();
                assert!(near.1 >= far.1);
            }
        }
    }

    #[test]
    fn rayleigh_gains_positive_with_unit_mean() {
        let c = NetworkConfig {
            fading_model: FadingModel::RayleighBlock,
            num_rbs: 50,
            ..small()
        };
        let t = generate_layout(&c).unwrap();
        let g = build_gain_tensor(&t, &c);
        let mut ratio_sum = 0.0;
        let mut n = 0.0;
        for u in 0..t.num_ues() {
            for b in 0..t.num_enbs() {
                for &x in g.link(u, b) {
                    assert!(x > 0.0 && x.is_finite());
                    ratio_sum += x / g.long_term(u, b);
                    n += 1.0;
                }
            }
        }
        let mean = ratio_sum / n;
        assert!((mean - 1.0).abs() < 0.02, "mean fading power {mean}");
    }

    #[test]
    fn infeasible_pico_geometry_is_a_config_error() {
        let c = NetworkConfig {
            picos_per_sector: 40,
            hotspot_radius: 60.0,
            ..small()
        };
        assert!(matches!(generate_layout(&c), Err(Error::Config(_))));
    }
}
