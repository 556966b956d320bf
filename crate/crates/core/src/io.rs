//! File formats.
//!
//! - Raw keys: two-column CSV `x,y` preceded by one `#` comment line with the
//!   channel parameters and seed.
//! - Sub-channel reports: CSV with columns
//!   `snr_db,detection,level,p,p_se,c_bsc,mi_dr,mi_dr_se,mi_rr,mi_rr_se`.
//! - Efficiency sweeps: CSV with columns
//!   `snr_db,detection,depth,beta_dr,beta_dr_se,beta_rr,beta_rr_se,mi_xy`,
//!   or JSON embedding the full per-level reports.
//! - Bit matrices: one line per level of `0`/`1` characters.
//!
//! Floats are written in shortest round-trip form with `.` as decimal
//! separator. Non-finite values are rejected instead of written.

use std::io::{BufRead, BufReader, Read, Write};

use serde::{Deserialize, Serialize};

use crate::channel::{ChannelParams, Detection, RawKeyPair};
use crate::error::{Error, Result};
use crate::estimators::{bsc_capacity, Estimate, SubChannelReport};
use crate::recon::{EfficiencyPoint, EfficiencySweep};
use crate::transform::BitMatrix;

fn finite(what: &'static str, v: f64) -> Result<f64> {
    if v.is_finite() {
        Ok(v)
    } else {
        Err(Error::NonFinite { what, value: v })
    }
}

/// Parse a newline-, comma- or whitespace-separated sequence of reals.
/// Lines starting with `#` are ignored.
pub fn parse_real_sequence(text: &str) -> Result<Vec<f64>> {
    let mut out = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        if line.trim_start().starts_with('#') {
            continue;
        }
        let mut col = 0;
        for field in line.split(|c: char| c == ',' || c.is_whitespace()) {
            let start = col;
            col += field.len() + 1;
            if field.is_empty() {
                continue;
            }
            let v: f64 = field.parse().map_err(|_| Error::Parse {
                line: lineno + 1,
                column: start + 1,
                message: format!("'{field}' is not a number"),
            })?;
            if !v.is_finite() {
                return Err(Error::Parse {
                    line: lineno + 1,
                    column: start + 1,
                    message: format!("'{field}' is not finite"),
                });
            }
            out.push(v);
        }
    }
    if out.is_empty() {
        return Err(Error::Empty);
    }
    Ok(out)
}

impl BitMatrix {
    /// One line per level, `0`/`1` characters, newline-terminated.
    pub fn to_text(&self) -> String {
        let mut s = String::with_capacity(self.depth() * (self.len() + 1));
        for row in self.rows() {
            s.extend(row.iter().map(|&b| if b == 1 { '1' } else { '0' }));
            s.push('\n');
        }
        s
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut rows = Vec::new();
        for (lineno, line) in text.lines().enumerate() {
            if line.is_empty() {
                continue;
            }
            let row = line
                .chars()
                .enumerate()
                .map(|(c, ch)| match ch {
                    '0' => Ok(0u8),
                    '1' => Ok(1u8),
                    other => Err(Error::Parse {
                        line: lineno + 1,
                        column: c + 1,
                        message: format!("unexpected character '{other}'"),
                    }),
                })
                .collect::<Result<Vec<u8>>>()?;
            rows.push(row);
        }
        if rows.is_empty() {
            return Err(Error::Empty);
        }
        BitMatrix::from_rows(rows)
    }
}

fn params_header(p: &ChannelParams, seed: u64) -> String {
    format!(
        "# mod_variance={},transmittance={},excess_noise={},detection={},seed={}",
        p.mod_variance(),
        p.transmittance(),
        p.excess_noise(),
        p.detection(),
        seed
    )
}

fn parse_params_header(line: &str) -> Result<(ChannelParams, u64)> {
    let bad = |m: &str| Error::Parse {
        line: 1,
        column: 1,
        message: m.to_string(),
    };
    let body = line
        .strip_prefix('#')
        .ok_or_else(|| bad("missing parameter comment"))?;
    let (mut vm, mut tau, mut xi, mut det, mut seed) = (None, None, None, None, None);
    for kv in body.trim().split(',') {
        let (k, v) = kv
            .split_once('=')
            .ok_or_else(|| bad("malformed key=value"))?;
        let num = || {
            v.parse::<f64>()
                .map_err(|_| bad(&format!("bad value for {k}")))
        };
        match k.trim() {
            "mod_variance" => vm = Some(num()?),
            "transmittance" => tau = Some(num()?),
            "excess_noise" => xi = Some(num()?),
            "detection" => det = Some(v.parse::<Detection>()?),
            "seed" => seed = Some(v.parse::<u64>().map_err(|_| bad("bad seed"))?),
            other => return Err(bad(&format!("unknown key {other}"))),
        }
    }
    let missing = || bad("incomplete parameter comment");
    let params = ChannelParams::new(
        vm.ok_or_else(missing)?,
        tau.ok_or_else(missing)?,
        xi.ok_or_else(missing)?,
        det.ok_or_else(missing)?,
    )?;
    Ok((params, seed.ok_or_else(missing)?))
}

pub fn write_raw_keys<W: Write>(pair: &RawKeyPair, mut w: W) -> Result<()> {
    writeln!(w, "{}", params_header(&pair.params, pair.seed))?;
    let mut csv = csv::Writer::from_writer(w);
    csv.write_record(["x", "y"])?;
    for (&x, &y) in pair.x.iter().zip(&pair.y) {
        csv.serialize((finite("x", x)?, finite("y", y)?))?;
    }
    csv.flush()?;
    Ok(())
}

pub fn read_raw_keys<R: Read>(r: R) -> Result<RawKeyPair> {
    let mut reader = BufReader::new(r);
    let mut header = String::new();
    reader.read_line(&mut header)?;
    let (params, seed) = parse_params_header(header.trim_end())?;
    let mut csv = csv::Reader::from_reader(reader);
    let (mut x, mut y) = (Vec::new(), Vec::new());
    for rec in csv.deserialize::<(f64, f64)>() {
        let (a, b) = rec?;
        x.push(a);
        y.push(b);
    }
    Ok(RawKeyPair { x, y, params, seed })
}

/// One row of the sub-channel CSV.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SubChannelRow {
    pub snr_db: f64,
    pub detection: Detection,
    pub level: u32,
    pub p: f64,
    pub p_se: f64,
    pub c_bsc: f64,
    pub mi_dr: f64,
    pub mi_dr_se: f64,
    pub mi_rr: f64,
    pub mi_rr_se: f64,
}

impl SubChannelRow {
    pub fn new(snr_db: f64, detection: Detection, r: &SubChannelReport) -> Self {
        Self {
            snr_db,
            detection,
            level: r.level,
            p: r.p.value,
            p_se: r.p.std_error,
            c_bsc: r.bsc_capacity,
            mi_dr: r.mi_dr.value,
            mi_dr_se: r.mi_dr.std_error,
            mi_rr: r.mi_rr.value,
            mi_rr_se: r.mi_rr.std_error,
        }
    }

    pub fn report(&self) -> SubChannelReport {
        SubChannelReport {
            level: self.level,
            p: Estimate::new(self.p, self.p_se),
            bsc_capacity: self.c_bsc,
            mi_dr: Estimate::new(self.mi_dr, self.mi_dr_se),
            mi_rr: Estimate::new(self.mi_rr, self.mi_rr_se),
        }
    }

    fn check(&self) -> Result<()> {
        for (what, v) in [
            ("snr_db", self.snr_db),
            ("p", self.p),
            ("p_se", self.p_se),
            ("c_bsc", self.c_bsc),
            ("mi_dr", self.mi_dr),
            ("mi_dr_se", self.mi_dr_se),
            ("mi_rr", self.mi_rr),
            ("mi_rr_se", self.mi_rr_se),
        ] {
            finite(what, v)?;
        }
        Ok(())
    }
}

/// One row of the sweep CSV.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EfficiencyRow {
    pub snr_db: f64,
    pub detection: Detection,
    pub depth: u32,
    pub beta_dr: f64,
    pub beta_dr_se: f64,
    pub beta_rr: f64,
    pub beta_rr_se: f64,
    pub mi_xy: f64,
}

impl From<&EfficiencyPoint> for EfficiencyRow {
    fn from(p: &EfficiencyPoint) -> Self {
        Self {
            snr_db: p.snr_db,
            detection: p.detection,
            depth: p.depth,
            beta_dr: p.beta_dr.value,
            beta_dr_se: p.beta_dr.std_error,
            beta_rr: p.beta_rr.value,
            beta_rr_se: p.beta_rr.std_error,
            mi_xy: p.mi_xy.value,
        }
    }
}

impl EfficiencyRow {
    fn check(&self) -> Result<()> {
        for (what, v) in [
            ("snr_db", self.snr_db),
            ("beta_dr", self.beta_dr),
            ("beta_dr_se", self.beta_dr_se),
            ("beta_rr", self.beta_rr),
            ("beta_rr_se", self.beta_rr_se),
            ("mi_xy", self.mi_xy),
        ] {
            finite(what, v)?;
        }
        Ok(())
    }
}

pub fn write_subchannel_csv<W: Write>(rows: &[SubChannelRow], w: W) -> Result<()> {
    let mut csv = csv::Writer::from_writer(w);
    if rows.is_empty() {
        csv.write_record([
            "snr_db",
            "detection",
            "level",
            "p",
            "p_se",
            "c_bsc",
            "mi_dr",
            "mi_dr_se",
            "mi_rr",
            "mi_rr_se",
        ])?;
    }
    for row in rows {
        row.check()?;
        csv.serialize(row)?;
    }
    csv.flush()?;
    Ok(())
}

pub fn read_subchannel_csv<R: Read>(r: R) -> Result<Vec<SubChannelRow>> {
    let mut csv = csv::Reader::from_reader(r);
    csv.deserialize().map(|r| r.map_err(Error::from)).collect()
}

pub fn write_sweep_csv<W: Write>(sweep: &EfficiencySweep, w: W) -> Result<()> {
    let rows: Vec<EfficiencyRow> = sweep.points.iter().map(EfficiencyRow::from).collect();
    write_efficiency_rows(&rows, w)
}

pub fn write_efficiency_rows<W: Write>(rows: &[EfficiencyRow], w: W) -> Result<()> {
    let mut csv = csv::Writer::from_writer(w);
    if rows.is_empty() {
        csv.write_record([
            "snr_db",
            "detection",
            "depth",
            "beta_dr",
            "beta_dr_se",
            "beta_rr",
            "beta_rr_se",
            "mi_xy",
        ])?;
    }
    for row in rows {
        row.check()?;
        csv.serialize(row)?;
    }
    csv.flush()?;
    Ok(())
}

pub fn read_sweep_csv<R: Read>(r: R) -> Result<Vec<EfficiencyRow>> {
    let mut csv = csv::Reader::from_reader(r);
    csv.deserialize().map(|r| r.map_err(Error::from)).collect()
}

pub fn write_sweep_json<W: Write>(sweep: &EfficiencySweep, mut w: W) -> Result<()> {
    for p in &sweep.points {
        EfficiencyRow::from(p).check()?;
    }
    serde_json::to_writer_pretty(&mut w, sweep)?;
    writeln!(w)?;
    Ok(())
}

pub fn read_sweep_json<R: Read>(r: R) -> Result<EfficiencySweep> {
    Ok(serde_json::from_reader(r)?)
}

/// Recompute `c_bsc` from `p`; used to sanity-check parsed files.
pub fn row_is_consistent(row: &SubChannelRow) -> bool {
    bsc_capacity(row.p).is_ok_and(|c| (c - row.c_bsc).abs() <= 1e-12)
}
