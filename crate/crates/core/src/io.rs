//! On-disk formats.
//!
//! * `ues.csv`: `ue_id,x,y,weight`
//! * `enbs.csv`: `enb_id,tier,x,y,power_dbm`
//! * `gains.bin`: magic `EICICGT\0`, format version (u32), UE / eNB / RB
//!   counts (u64), then the `(ue, enb, rb)` gains and the `(ue, enb)`
//!   long-term gains as little-endian f64.
//! * `association.csv`: `ue_id,serving_enb,kind`
//! * `shares.csv`: `ue_id,enb_id,rb,x,y` (nonzero links only)
//! * `trace.csv`: `iteration,utility,handovers,beta`
//! * `rates.csv`: `ue_id,logical_enb_id,kind,rb,rate_nabs,rate_abs`

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::radio::{EnbKind, LogicalEnbIndex, RateTable};
use crate::solver::{Allocation, Association, TraceEntry};
use crate::topology::{Enb, GainTensor, Tier, Topology, Ue};
use crate::{Error, NetworkConfig, Result};

const GAINS_MAGIC: &[u8; 8] = b"EICICGT\0";
pub const GAINS_VERSION: u32 = 1;

fn format_err(path: &str, msg: impl Into<String>) -> Error {
    Error::Format {
        path: path.to_string(),
        msg: msg.into(),
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct UeRow {
    ue_id: usize,
    x: f64,
    y: f64,
    weight: f64,
}

#[derive(Debug, Serialize, Deserialize)]
struct EnbRow {
    enb_id: usize,
    tier: String,
    x: f64,
    y: f64,
    power_dbm: f64,
}

pub fn write_ues<W: Write>(w: W, topology: &Topology) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    for u in &topology.ues {
        out.serialize(UeRow {
            ue_id: u.id,
            x: u.position[0],
            y: u.position[1],
            weight: u.weight,
        })?;
    }
    out.flush()?;
    Ok(())
}

pub fn write_enbs<W: Write>(w: W, topology: &Topology, config: &NetworkConfig) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    for e in &topology.enbs {
        let power_dbm = match e.tier {
            Tier::Macro => config.macro_power,
            Tier::Pico => config.pico_power,
        };
        out.serialize(EnbRow {
            enb_id: e.id,
            tier: e.tier.as_str().to_string(),
            x: e.position[0],
            y: e.position[1],
            power_dbm,
        })?;
    }
    out.flush()?;
    Ok(())
}

/// Reads a layout written by [`write_ues`] / [`write_enbs`].
///
/// Per-RB powers, sector bearings and hotspot membership are rebuilt from
/// `config` with the same rules as layout generation; the stored `power_dbm`
/// must agree with the configured tier power.
pub fn read_topology<R1: Read, R2: Read>(
    ues: R1,
    enbs: R2,
    config: &NetworkConfig,
) -> Result<Topology> {
    let mut enb_list = Vec::new();
    for (i, row) in csv::Reader::from_reader(enbs)
        .deserialize::<EnbRow>()
        .enumerate()
    {
        let row = row?;
        let at = format!("enbs.csv row {}", i + 1);
        if row.enb_id != i {
            return Err(format_err(
                &at,
                format!("expected enb_id {i}, found {}", row.enb_id),
            ));
        }
        let tier = Tier::parse(&row.tier)
            .ok_or_else(|| format_err(&at, format!("unknown tier '{}'", row.tier)))?;
        let (want_dbm, per_rb_power) = match tier {
            Tier::Macro => (config.macro_power, config.macro_power_per_rb()),
            Tier::Pico => (config.pico_power, config.pico_power_per_rb()),
        };
        if (row.power_dbm - want_dbm).abs() > 1e-9 {
            return Err(format_err(
                &at,
                format!(
                    "power {} dBm disagrees with configured {want_dbm} dBm",
                    row.power_dbm
                ),
            ));
        }
        enb_list.push(Enb {
            id: i,
            tier,
            position: [row.x, row.y],
            sector_bearing: None,
            per_rb_power,
        });
    }
    let num_macros = enb_list
        .iter()
        .take_while(|e| e.tier == Tier::Macro)
        .count();
    if enb_list[num_macros..].iter().any(|e| e.tier == Tier::Macro) {
        return Err(format_err("enbs.csv", "macros must precede picos"));
    }
    let sector_width = 2.0 * std::f64::consts::PI / config.sectors_per_macro as f64;
    for e in &mut enb_list[..num_macros] {
        e.sector_bearing = Some((e.id % config.sectors_per_macro) as f64 * sector_width);
    }
    let num_picos = enb_list.len() - num_macros;

    let num_hotspot = config.num_hotspot_ues();
    let mut ue_list = Vec::new();
    for (i, row) in csv::Reader::from_reader(ues)
        .deserialize::<UeRow>()
        .enumerate()
    {
        let row = row?;
        if row.ue_id != i {
            return Err(format_err(
                &format!("ues.csv row {}", i + 1),
                format!("expected ue_id {i}, found {}", row.ue_id),
            ));
        }
        if !(row.weight.is_finite() && row.weight > 0.0) {
            return Err(format_err(
                &format!("ues.csv row {}", i + 1),
                "weight must be positive",
            ));
        }
        ue_list.push(Ue {
            id: i,
            position: [row.x, row.y],
            weight: row.weight,
            hotspot: (i < num_hotspot && num_picos > 0).then(|| num_macros + i % num_picos),
        });
    }
    Ok(Topology {
        enbs: enb_list,
        ues: ue_list,
    })
}

pub fn write_gains<W: Write>(mut w: W, gains: &GainTensor) -> Result<()> {
    w.write_all(GAINS_MAGIC)?;
    w.write_all(&GAINS_VERSION.to_le_bytes())?;
    for d in [gains.num_ues(), gains.num_enbs(), gains.num_rbs()] {
        w.write_all(&(d as u64).to_le_bytes())?;
    }
    let mut buf = Vec::with_capacity(8 * (gains.as_slice().len() + gains.long_term_slice().len()));
    for g in gains.as_slice().iter().chain(gains.long_term_slice()) {
        buf.extend_from_slice(&g.to_le_bytes());
    }
    w.write_all(&buf)?;
    w.flush()?;
    Ok(())
}

pub fn read_gains<R: Read>(mut r: R) -> Result<GainTensor> {
    let mut bytes = Vec::new();
    r.read_to_end(&mut bytes)?;
    let err = |msg: &str| format_err("gains.bin", msg);
    if bytes.len() < 36 || &bytes[..8] != GAINS_MAGIC {
        return Err(err("not a gain tensor file"));
    }
    let version = u32::from_le_bytes(bytes[8..12].try_into().unwrap());
    if version != GAINS_VERSION {
        return Err(err(&format!("unsupported version {version}")));
    }
    let dim =
        |k: usize| u64::from_le_bytes(bytes[12 + 8 * k..20 + 8 * k].try_into().unwrap()) as usize;
    let (nu, ne, nr) = (dim(0), dim(1), dim(2));
    let n_gains = nu
        .checked_mul(ne)
        .and_then(|v| v.checked_mul(nr))
        .ok_or_else(|| err("dimensions overflow"))?;
    let n_lt = nu * ne;
    let body = &bytes[36..];
    if body.len() != 8 * (n_gains + n_lt) {
        return Err(err(&format!(
            "expected {} bytes of data for {nu}x{ne}x{nr}, found {}",
            8 * (n_gains + n_lt),
            body.len()
        )));
    }
    let values: Vec<f64> = body
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect();
    let (g, lt) = values.split_at(n_gains);
    GainTensor::from_parts(nu, ne, nr, g.to_vec(), lt.to_vec())
}

#[derive(Debug, Serialize, Deserialize)]
struct RateRow {
    ue_id: usize,
    logical_enb_id: usize,
    kind: String,
    rb: usize,
    rate_nabs: f64,
    rate_abs: f64,
}

pub fn write_rates<W: Write>(w: W, rates: &RateTable, index: &LogicalEnbIndex) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    for u in 0..rates.num_ues() {
        for b in 0..rates.num_enbs() {
            for r in 0..rates.num_rbs() {
                out.serialize(RateRow {
                    ue_id: u,
                    logical_enb_id: b,
                    kind: index.kind(b).as_str().to_string(),
                    rb: r,
                    rate_nabs: rates.nabs(u, b, r),
                    rate_abs: rates.abs(u, b, r),
                })?;
            }
        }
    }
    out.flush()?;
    Ok(())
}

#[derive(Debug, Serialize, Deserialize)]
struct AssociationRow {
    ue_id: usize,
    serving_enb: usize,
    kind: String,
}

pub fn write_association<W: Write>(
    w: W,
    association: &Association,
    kinds: &[EnbKind],
) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    for (u, b) in association.serving().into_iter().enumerate() {
        out.serialize(AssociationRow {
            ue_id: u,
            serving_enb: b,
            kind: kinds[b].as_str().to_string(),
        })?;
    }
    out.flush()?;
    Ok(())
}

/// Serving logical eNB per UE.
pub fn read_association<R: Read>(r: R, kinds: &[EnbKind]) -> Result<Vec<usize>> {
    let mut serving = Vec::new();
    for (i, row) in csv::Reader::from_reader(r)
        .deserialize::<AssociationRow>()
        .enumerate()
    {
        let row = row?;
        let at = format!("association.csv row {}", i + 1);
        if row.ue_id != i {
            return Err(format_err(
                &at,
                format!("expected ue_id {i}, found {}", row.ue_id),
            ));
        }
        let kind = kinds
            .get(row.serving_enb)
            .ok_or_else(|| format_err(&at, format!("eNB {} out of range", row.serving_enb)))?;
        if EnbKind::parse(&row.kind) != Some(*kind) {
            return Err(format_err(
                &at,
                format!("kind '{}' disagrees with eNB {}", row.kind, row.serving_enb),
            ));
        }
        serving.push(row.serving_enb);
    }
    Ok(serving)
}

#[derive(Debug, Serialize, Deserialize)]
struct ShareRow {
    ue_id: usize,
    enb_id: usize,
    rb: usize,
    x: f64,
    y: f64,
}

pub fn write_shares<W: Write>(w: W, allocation: &Allocation) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    for u in 0..allocation.num_ues() {
        for b in 0..allocation.num_enbs() {
            let (xs, ys) = (allocation.x_link(u, b), allocation.y_link(u, b));
            if xs.iter().chain(ys).all(|&v| v == 0.0) {
                continue;
            }
            for r in 0..allocation.num_rbs() {
                out.serialize(ShareRow {
                    ue_id: u,
                    enb_id: b,
                    rb: r,
                    x: xs[r],
                    y: ys[r],
                })?;
            }
        }
    }
    out.flush()?;
    Ok(())
}

pub fn read_shares<R: Read>(
    r: R,
    num_ues: usize,
    num_enbs: usize,
    num_rbs: usize,
) -> Result<Allocation> {
    let mut alloc = Allocation::zeros(num_ues, num_enbs, num_rbs);
    for (i, row) in csv::Reader::from_reader(r)
        .deserialize::<ShareRow>()
        .enumerate()
    {
        let row = row?;
        if row.ue_id >= num_ues || row.enb_id >= num_enbs || row.rb >= num_rbs {
            return Err(format_err(
                &format!("shares.csv row {}", i + 1),
                "index out of range",
            ));
        }
        let (x, y) = alloc.links_mut(row.ue_id, row.enb_id);
        x[row.rb] = row.x;
        y[row.rb] = row.y;
    }
    Ok(alloc)
}

#[derive(Debug, Serialize, Deserialize)]
struct TraceRow {
    iteration: usize,
    utility: f64,
    handovers: usize,
    beta: f64,
}

pub fn write_trace<W: Write>(w: W, trace: &[TraceEntry]) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    for t in trace {
        out.serialize(TraceRow {
            iteration: t.iteration,
            utility: t.utility,
            handovers: t.num_handovers,
            beta: t.beta,
        })?;
    }
    out.flush()?;
    Ok(())
}

pub fn read_trace<R: Read>(r: R) -> Result<Vec<TraceEntry>> {
    csv::Reader::from_reader(r)
        .deserialize::<TraceRow>()
        .map(|row| {
            let row = row?;
            Ok(TraceEntry {
                iteration: row.iteration,
                utility: row.utility,
                num_handovers: row.handovers,
                beta: row.beta,
            })
        })
        .collect()
}
