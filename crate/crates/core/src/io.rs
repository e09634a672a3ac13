//! Snapshot files, PGM previews and the CSV tables written by runs.
//!
//! A snapshot is a pair of files: `<stem>.hdr`, a short `key value` text
//! header, and `<stem>.raw`, the row-major payload (last axis fastest). Label
//! payloads hold one byte per cell, scalar payloads little-endian `f64`.

use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use crate::energy::StepReport;
use crate::error::{Error, Result};
use crate::field::{GridSpec, LabelField, ScalarField};
use crate::probes::ProbeRecord;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PayloadKind {
    Labels,
    Scalar,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SnapshotHeader {
    pub kind: PayloadKind,
    pub sizes: Vec<usize>,
    /// Phase count; absent for scalar payloads.
    pub num_phases: Option<usize>,
    pub step: usize,
    pub time: f64,
}

impl SnapshotHeader {
    fn render(&self) -> String {
        let sizes: Vec<String> = self.sizes.iter().map(usize::to_string).collect();
        let mut s = format!(
            "kind {}\ndim {}\nsizes {}\n",
            match self.kind {
                PayloadKind::Labels => "labels",
                PayloadKind::Scalar => "scalar",
            },
            self.sizes.len(),
            sizes.join(" ")
        );
        if let Some(n) = self.num_phases {
            s += &format!("num_phases {n}\n");
        }
        s += &format!("step {}\ntime {}\n", self.step, format_sig(self.time));
        s
    }

    fn parse(text: &str) -> Result<Self> {
        let bad = |m: String| Error::Format(m);
        let mut kind = None;
        let mut dim = None;
        let mut sizes = None;
        let mut num_phases = None;
        let mut step = None;
        let mut time = None;
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line
                .split_once(char::is_whitespace)
                .ok_or_else(|| bad(format!("header line {}: expected `key value`", lineno + 1)))?;
            let value = value.trim();
            let num = |v: &str| {
                v.parse::<usize>()
                    .map_err(|_| bad(format!("header line {}: `{v}` is not a count", lineno + 1)))
            };
            match key {
                "kind" => {
                    kind = Some(match value {
                        "labels" => PayloadKind::Labels,
                        "scalar" => PayloadKind::Scalar,
                        other => return Err(bad(format!("unknown payload kind `{other}`"))),
                    })
                }
                "dim" => dim = Some(num(value)?),
                "sizes" => sizes = Some(value.split_whitespace().map(num).collect::<Result<Vec<_>>>()?),
                "num_phases" => num_phases = Some(num(value)?),
                "step" => step = Some(num(value)?),
                "time" => {
                    time = Some(
                        value
                            .parse::<f64>()
                            .map_err(|_| bad(format!("header line {}: bad time `{value}`", lineno + 1)))?,
                    )
                }
                other => return Err(bad(format!("header line {}: unknown key `{other}`", lineno + 1))),
            }
        }
        let sizes = sizes.ok_or_else(|| bad("header lacks `sizes`".into()))?;
        if dim.is_some_and(|d| d != sizes.len()) {
            return Err(bad("header `dim` disagrees with `sizes`".into()));
        }
        let kind = kind.ok_or_else(|| bad("header lacks `kind`".into()))?;
        if kind == PayloadKind::Labels && num_phases.is_none() {
            return Err(bad("label header lacks `num_phases`".into()));
        }
        Ok(Self {
            kind,
            sizes,
            num_phases,
            step: step.unwrap_or(0),
            time: time.unwrap_or(0.0),
        })
    }
}

/// `<stem>.hdr` and `<stem>.raw`.
pub fn snapshot_paths(stem: &Path) -> (PathBuf, PathBuf) {
    (stem.with_extension("hdr"), stem.with_extension("raw"))
}

/// Accepts a stem or either member of the pair.
fn stem_of(path: &Path) -> PathBuf {
    match path.extension().and_then(|e| e.to_str()) {
        Some("hdr" | "raw") => path.with_extension(""),
        _ => path.to_path_buf(),
    }
}

pub fn write_labels(stem: &Path, labels: &LabelField, step: usize, time: f64) -> Result<()> {
    let header = SnapshotHeader {
        kind: PayloadKind::Labels,
        sizes: labels.grid().sizes().to_vec(),
        num_phases: Some(labels.num_phases()),
        step,
        time,
    };
    let (hdr, raw) = snapshot_paths(stem);
    fs::write(hdr, header.render())?;
    fs::write(raw, labels.labels())?;
    Ok(())
}

pub fn write_scalar(stem: &Path, field: &ScalarField, step: usize, time: f64) -> Result<()> {
    let header = SnapshotHeader {
        kind: PayloadKind::Scalar,
        sizes: field.grid().sizes().to_vec(),
        num_phases: None,
        step,
        time,
    };
    let (hdr, raw) = snapshot_paths(stem);
    fs::write(hdr, header.render())?;
    let bytes: Vec<u8> = field.values().iter().flat_map(|v| v.to_le_bytes()).collect();
    fs::write(raw, bytes)?;
    Ok(())
}

fn read_pair(path: &Path, expect: PayloadKind) -> Result<(SnapshotHeader, GridSpec, Vec<u8>)> {
    let (hdr, raw) = snapshot_paths(&stem_of(path));
    let header = SnapshotHeader::parse(&fs::read_to_string(&hdr)?)?;
    if header.kind != expect {
        return Err(Error::Format(format!("{} holds a different payload kind", hdr.display())));
    }
    let grid = GridSpec::new(&header.sizes)?;
    let bytes = fs::read(&raw)?;
    let width = match expect {
        PayloadKind::Labels => 1,
        PayloadKind::Scalar => 8,
    };
    if bytes.len() != grid.len() * width {
        return Err(Error::Format(format!(
            "{} has {} bytes, header implies {}",
            raw.display(),
            bytes.len(),
            grid.len() * width
        )));
    }
    Ok((header, grid, bytes))
}

pub fn read_labels(path: &Path) -> Result<(LabelField, SnapshotHeader)> {
    let (header, grid, bytes) = read_pair(path, PayloadKind::Labels)?;
    let n = header.num_phases.expect("checked by the parser");
    Ok((LabelField::new(grid, n, bytes)?, header))
}

pub fn read_scalar(path: &Path) -> Result<(ScalarField, SnapshotHeader)> {
    let (header, grid, bytes) = read_pair(path, PayloadKind::Scalar)?;
    let values = bytes
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("chunks of eight")))
        .collect();
    Ok((ScalarField::new(grid, values)?, header))
}

/// 8-bit PGM of a 2D labelling, phases spread evenly over the gray range.
/// Rows follow the first axis.
pub fn write_pgm(path: &Path, labels: &LabelField) -> Result<()> {
    let grid = labels.grid();
    if grid.dim() != 2 {
        return Err(Error::UnsupportedDimension(grid.dim()));
    }
    let (rows, cols) = (grid.sizes()[0], grid.sizes()[1]);
    let top = (labels.num_phases() - 1).max(1) as f64;
    let mut out = format!("P5\n{cols} {rows}\n255\n").into_bytes();
    out.extend(
        labels
            .labels()
            .iter()
            .map(|&l| (255.0 * l as f64 / top).round() as u8),
    );
    fs::write(path, out)?;
    Ok(())
}

/// `x` with 12 significant digits, in the shorter of fixed and exponent form.
pub fn format_sig(x: f64) -> String {
    if x == 0.0 || !x.is_finite() {
        return format!("{x}");
    }
    let exp = x.abs().log10().floor() as i32;
    if (-5..12).contains(&exp) {
        let decimals = (11 - exp).max(0) as usize;
        let s = format!("{x:.decimals$}");
        if s.contains('.') {
            s.trim_end_matches('0').trim_end_matches('.').to_string()
        } else {
            s
        }
    } else {
        let s = format!("{x:.11e}");
        let (mantissa, e) = s.split_once('e').expect("exponent form");
        let mantissa = if mantissa.contains('.') {
            mantissa.trim_end_matches('0').trim_end_matches('.')
        } else {
            mantissa
        };
        format!("{mantissa}e{e}")
    }
}

/// Streams one `metrics.csv` row per step.
pub struct MetricsWriter {
    out: BufWriter<fs::File>,
    num_phases: usize,
}

impl MetricsWriter {
    pub fn create(path: &Path, num_phases: usize) -> Result<Self> {
        let mut out = BufWriter::new(fs::File::create(path)?);
        let mut cols: Vec<String> = [
            "step",
            "time",
            "E_h_before",
            "E_h_after",
            "dist_sq",
            "ledger_lhs",
            "ledger_rhs",
        ]
        .iter()
        .map(|s| s.to_string())
        .collect();
        cols.extend((0..num_phases).map(|i| format!("vol_{i}")));
        for i in 0..num_phases {
            for j in i + 1..num_phases {
                cols.push(format!("e_{i}_{j}"));
            }
        }
        writeln!(out, "{}", cols.join(","))?;
        Ok(Self { out, num_phases })
    }

    pub fn write(&mut self, r: &StepReport) -> Result<()> {
        let mut cols = vec![
            r.step.to_string(),
            format_sig(r.time),
            format_sig(r.energy_before.total),
            format_sig(r.energy_after.total),
            format_sig(r.dist_sq),
            format_sig(r.ledger_lhs),
            format_sig(r.ledger_rhs),
        ];
        cols.extend(r.phase_volumes.iter().map(usize::to_string));
        let p = &r.energy_after.per_pair;
        for i in 0..self.num_phases {
            for j in i + 1..self.num_phases {
                cols.push(format_sig(p[(i, j)]));
            }
        }
        writeln!(self.out, "{}", cols.join(","))?;
        Ok(())
    }

    pub fn finish(mut self) -> Result<()> {
        self.out.flush()?;
        Ok(())
    }
}

fn optional(x: f64) -> String {
    if x.is_nan() {
        String::new()
    } else {
        format_sig(x)
    }
}

/// Writes `probes.csv`; measurements without a target leave `target` and
/// `error` empty.
pub fn write_probes(path: &Path, records: &[ProbeRecord]) -> Result<()> {
    let mut out = BufWriter::new(fs::File::create(path)?);
    writeln!(out, "kind,step,value,target,error")?;
    for r in records {
        writeln!(
            out,
            "{},{},{},{},{}",
            r.kind,
            r.step,
            format_sig(r.value),
            optional(r.target),
            optional(r.error())
        )?;
    }
    out.flush()?;
    Ok(())
}
