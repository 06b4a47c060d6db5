//! Scenario configuration.
//!
//! Field names double as the keys of the scenario config file. Every field
//! has a default, so a config file only needs to list what it overrides.
//! The defaults describe a single three-sector macro site with two picos per
//! sector and 120 UEs.

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FadingModel {
    /// Flat channel: gains are constant across RBs.
    #[default]
    None,
    /// One i.i.d. unit-mean exponential power coefficient per (UE, eNB, RB).
    RayleighBlock,
}

/// Log-distance path loss `intercept + slope * log10(d_km)` per tier, in dB.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PathLossParams {
    pub macro_intercept_db: f64,
    pub macro_slope_db: f64,
    pub pico_intercept_db: f64,
    pub pico_slope_db: f64,
    /// Distances below this are evaluated at this value.
    pub min_distance_m: f64,
}

impl Default for PathLossParams {
    fn default() -> Self {
        // 3GPP urban macro and pico-to-UE models.
        PathLossParams {
            macro_intercept_db: 128.1,
            macro_slope_db: 37.6,
            pico_intercept_db: 140.7,
            pico_slope_db: 36.7,
            min_distance_m: 10.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NetworkConfig {
    pub inter_site_distance: f64,
    pub num_macro_sites: usize,
    pub sectors_per_macro: usize,
    pub picos_per_sector: usize,
    pub hotspot_radius: f64,
    pub num_ues: usize,
    pub hotspot_ue_fraction: f64,
    /// Total macro transmit power in dBm, split evenly over the RBs.
    pub macro_power: f64,
    /// Total pico transmit power in dBm, split evenly over the RBs.
    pub pico_power: f64,
    /// System bandwidth in Hz.
    pub bandwidth: f64,
    pub num_rbs: usize,
    /// Thermal noise power spectral density in dBm/Hz.
    pub noise_psd: f64,
    pub shadowing_sigma: f64,
    pub fading_model: FadingModel,
    pub seed: u64,
    pub path_loss: PathLossParams,
    pub min_pico_macro_distance: f64,
    /// Per-UE weights; all 1.0 when absent.
    pub ue_weights: Option<Vec<f64>>,
}

impl Default for NetworkConfig {
    fn default() -> Self {
        NetworkConfig {
            inter_site_distance: 500.0,
            num_macro_sites: 1,
            sectors_per_macro: 3,
            picos_per_sector: 2,
            hotspot_radius: 40.0,
            num_ues: 120,
            hotspot_ue_fraction: 2.0 / 3.0,
            macro_power: 46.0,
            pico_power: 30.0,
            bandwidth: 20e6,
            num_rbs: 100,
            noise_psd: -174.0,
            shadowing_sigma: 10.0,
            fading_model: FadingModel::None,
            seed: 1,
            path_loss: PathLossParams::default(),
            min_pico_macro_distance: 75.0,
            ue_weights: None,
        }
    }
}

fn dbm_to_watts(dbm: f64) -> f64 {
    10f64.powf((dbm - 30.0) / 10.0)
}

impl NetworkConfig {
    /// Full-scale layout: 7 sites, 21 sectors, 1260 UEs.
    pub fn full_scale() -> Self {
        NetworkConfig {
            num_macro_sites: 7,
            num_ues: 1260,
            ..Self::default()
        }
    }

    pub fn num_macros(&self) -> usize {
        self.num_macro_sites * self.sectors_per_macro
    }

    pub fn num_picos(&self) -> usize {
        self.num_macros() * self.picos_per_sector
    }

    pub fn rb_bandwidth(&self) -> f64 {
        self.bandwidth / self.num_rbs as f64
    }

    /// Noise power per RB in watts.
    pub fn noise_per_rb(&self) -> f64 {
        dbm_to_watts(self.noise_psd) * self.rb_bandwidth()
    }

    pub fn macro_power_per_rb(&self) -> f64 {
        dbm_to_watts(self.macro_power) / self.num_rbs as f64
    }

    pub fn pico_power_per_rb(&self) -> f64 {
        dbm_to_watts(self.pico_power) / self.num_rbs as f64
    }

    pub fn num_hotspot_ues(&self) -> usize {
        (self.hotspot_ue_fraction * self.num_ues as f64).round() as usize
    }

    pub fn validate(&self) -> Result<()> {
        let positive = |name: &str, v: f64| {
            if v.is_finite() && v > 0.0 {
                Ok(())
            } else {
                Err(Error::config(format!(
                    "{name} must be positive and finite, got {v}"
                )))
            }
        };
        let at_least_one = |name: &str, v: usize| {
            if v >= 1 {
                Ok(())
            } else {
                Err(Error::config(format!("{name} must be at least 1")))
            }
        };
        positive("inter_site_distance", self.inter_site_distance)?;
        positive("hotspot_radius", self.hotspot_radius)?;
        positive("bandwidth", self.bandwidth)?;
        positive("path_loss.min_distance_m", self.path_loss.min_distance_m)?;
        at_least_one("num_macro_sites", self.num_macro_sites)?;
        at_least_one("sectors_per_macro", self.sectors_per_macro)?;
        at_least_one("num_ues", self.num_ues)?;
        at_least_one("num_rbs", self.num_rbs)?;
        if !(0.0..=1.0).contains(&self.hotspot_ue_fraction) {
            return Err(Error::config(format!(
                "hotspot_ue_fraction must lie in [0, 1], got {}",
                self.hotspot_ue_fraction
            )));
        }
        if self.inter_site_distance <= 2.0 * self.hotspot_radius {
            return Err(Error::config(format!(
                "inter_site_distance ({}) must exceed 2 * hotspot_radius ({})",
                self.inter_site_distance, self.hotspot_radius
            )));
        }
        if self.picos_per_sector == 0 && self.num_hotspot_ues() > 0 {
            return Err(Error::config(
                "hotspot_ue_fraction must be 0 when picos_per_sector is 0",
            ));
        }
        if !(self.shadowing_sigma.is_finite() && self.shadowing_sigma >= 0.0) {
            return Err(Error::config(
                "shadowing_sigma must be finite and non-negative",
            ));
        }
        if !(self.min_pico_macro_distance.is_finite() && self.min_pico_macro_distance >= 0.0) {
            return Err(Error::config(
                "min_pico_macro_distance must be finite and non-negative",
            ));
        }
        for (name, v) in [
            ("macro_power", self.macro_power),
            ("pico_power", self.pico_power),
            ("noise_psd", self.noise_psd),
            (
                "path_loss.macro_intercept_db",
                self.path_loss.macro_intercept_db,
            ),
            ("path_loss.macro_slope_db", self.path_loss.macro_slope_db),
            (
                "path_loss.pico_intercept_db",
                self.path_loss.pico_intercept_db,
            ),
            ("path_loss.pico_slope_db", self.path_loss.pico_slope_db),
        ] {
            if !v.is_finite() {
                return Err(Error::config(format!("{name} must be finite")));
            }
        }
        if let Some(w) = &self.ue_weights {
            if w.len() != self.num_ues {
                return Err(Error::config(format!(
                    "ue_weights has {} entries but num_ues is {}",
                    w.len(),
                    self.num_ues
                )));
            }
            if let Some((i, v)) = w
                .iter()
                .enumerate()
                .find(|(_, v)| !(v.is_finite() && **v > 0.0))
            {
                return Err(Error::config(format!(
                    "ue_weights[{i}] = {v} is not positive"
                )));
            }
        }
        Ok(())
    }
}
