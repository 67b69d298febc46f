//! CSV trace files.
//!
//! Sensor traces: `t,ch0,…,ch5[,force_n][,slip_gt]`. Ground truth from the
//! simulator: `t,slip_gt,force_R_n,force_L_n,phase`. Floats are written in
//! shortest round-trip form, so re-reading a written file is exact.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::signal::{SensorFrame, NUM_CHANNELS};

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Trace {
    pub frames: Vec<SensorFrame>,
    /// Measured grip force per frame, newtons.
    pub force_n: Option<Vec<f64>>,
    pub slip_gt: Option<Vec<bool>>,
}

impl Trace {
    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    pub fn duration(&self) -> f64 {
        match (self.frames.first(), self.frames.last()) {
            (Some(a), Some(b)) => b.t - a.t,
            _ => 0.0,
        }
    }
}

const CHANNEL_COLS: [&str; NUM_CHANNELS] = ["ch0", "ch1", "ch2", "ch3", "ch4", "ch5"];

fn parse_err(path: &Path, line: u64, message: impl Into<String>) -> Error {
    Error::Parse {
        path: path.to_path_buf(),
        line,
        message: message.into(),
    }
}

pub fn read_trace(path: &Path) -> Result<Trace> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    read_trace_from(file, path)
}

pub fn read_trace_from(reader: impl std::io::Read, path: &Path) -> Result<Trace> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
    let header = rdr.headers().map_err(|e| parse_err(path, 1, e.to_string()))?.clone();
    let cols: Vec<&str> = header.iter().map(str::trim).collect();
    if cols.len() < 1 + NUM_CHANNELS || cols[0] != "t" || cols[1..=NUM_CHANNELS] != CHANNEL_COLS {
        return Err(parse_err(path, 1, format!("header must start with t,ch0..ch5, got `{}`", cols.join(","))));
    }
    let mut force_col = None;
    let mut slip_col = None;
    for (i, c) in cols.iter().enumerate().skip(1 + NUM_CHANNELS) {
        match *c {
            "force_n" if force_col.is_none() => force_col = Some(i),
            "slip_gt" if slip_col.is_none() => slip_col = Some(i),
            other => return Err(parse_err(path, 1, format!("unexpected column `{other}`"))),
        }
    }
    let mut trace = Trace {
        frames: Vec::new(),
        force_n: force_col.map(|_| Vec::new()),
        slip_gt: slip_col.map(|_| Vec::new()),
    };
    let mut record = csv::StringRecord::new();
    let mut line = 1u64;
    loop {
        match rdr.read_record(&mut record) {
            Ok(false) => break,
            Ok(true) => {}
            Err(e) => {
                let l = e.position().map(|p| p.line()).unwrap_or(line + 1);
                return Err(parse_err(path, l, e.to_string()));
            }
        }
        line = record.position().map(|p| p.line()).unwrap_or(line + 1);
        if record.len() != cols.len() {
            return Err(parse_err(path, line, format!("expected {} fields, got {}", cols.len(), record.len())));
        }
        let num = |i: usize| -> Result<f64> {
            let s = record[i].trim();
            s.parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| parse_err(path, line, format!("column `{}`: `{s}` is not a finite number", cols[i])))
        };
        let t = num(0)?;
        if let Some(prev) = trace.frames.last() {
            if t <= prev.t {
                return Err(parse_err(path, line, format!("timestamp {t} does not increase (previous {})", prev.t)));
            }
        }
        let mut ch = [0.0; NUM_CHANNELS];
        for (k, c) in ch.iter_mut().enumerate() {
            *c = num(1 + k)?;
            if !(-1.0..=1.0).contains(c) {
                return Err(parse_err(path, line, format!("{} = {} outside [-1, 1]", cols[1 + k], c)));
            }
        }
        trace.frames.push(SensorFrame::new(t, ch));
        if let (Some(i), Some(v)) = (force_col, trace.force_n.as_mut()) {
            v.push(num(i)?);
        }
        if let (Some(i), Some(v)) = (slip_col, trace.slip_gt.as_mut()) {
            v.push(match record[i].trim() {
                "0" => false,
                "1" => true,
                s => return Err(parse_err(path, line, format!("slip_gt must be 0 or 1, got `{s}`"))),
            });
        }
    }
    Ok(trace)
}

/// Buffered CSV output with a fixed header.
pub struct CsvSink<W: Write> {
    out: W,
    path: PathBuf,
}

impl CsvSink<BufWriter<File>> {
    pub fn create(path: &Path, header: &[&str]) -> Result<Self> {
        if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
            std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        }
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        let mut sink = Self {
            out: BufWriter::new(file),
            path: path.to_path_buf(),
        };
        sink.line(header.iter().copied())?;
        Ok(sink)
    }
}

impl<W: Write> CsvSink<W> {
    pub fn from_writer(out: W, header: &[&str]) -> Result<Self> {
        let mut sink = Self {
            out,
            path: PathBuf::from("<stream>"),
        };
        sink.line(header.iter().copied())?;
        Ok(sink)
    }

    pub fn line<S: AsRef<str>>(&mut self, fields: impl IntoIterator<Item = S>) -> Result<()> {
        let mut first = true;
        for f in fields {
            if !first {
                self.out.write_all(b",").map_err(|e| Error::io(&self.path, e))?;
            }
            first = false;
            self.out.write_all(f.as_ref().as_bytes()).map_err(|e| Error::io(&self.path, e))?;
        }
        self.out.write_all(b"\n").map_err(|e| Error::io(&self.path, e))
    }

    pub fn finish(mut self) -> Result<W> {
        self.out.flush().map_err(|e| Error::io(&self.path, e))?;
        Ok(self.out)
    }
}

pub fn trace_header(trace: &Trace) -> Vec<&'static str> {
    let mut h = vec!["t"];
    h.extend(CHANNEL_COLS);
    if trace.force_n.is_some() {
        h.push("force_n");
    }
    if trace.slip_gt.is_some() {
        h.push("slip_gt");
    }
    h
}

pub fn write_trace_to<W: Write>(out: W, trace: &Trace) -> Result<W> {
    let mut sink = CsvSink::from_writer(out, &trace_header(trace))?;
    write_rows(&mut sink, trace)?;
    sink.finish()
}

pub fn write_trace(path: &Path, trace: &Trace) -> Result<()> {
    let mut sink = CsvSink::create(path, &trace_header(trace))?;
    write_rows(&mut sink, trace)?;
    sink.finish().map(|_| ())
}

fn write_rows<W: Write>(sink: &mut CsvSink<W>, trace: &Trace) -> Result<()> {
    let mut fields: Vec<String> = Vec::with_capacity(9);
    for (i, f) in trace.frames.iter().enumerate() {
        fields.clear();
        fields.push(f.t.to_string());
        fields.extend(f.channels.iter().map(f64::to_string));
        if let Some(v) = &trace.force_n {
            fields.push(v[i].to_string());
        }
        if let Some(v) = &trace.slip_gt {
            fields.push(if v[i] { "1" } else { "0" }.to_string());
        }
        sink.line(&fields)?;
    }
    Ok(())
}

/// One row of simulator ground truth.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruthRow {
    pub t: f64,
    pub slip_gt: bool,
    pub force_r_n: f64,
    pub force_l_n: f64,
    pub phase: String,
}

pub const GROUND_TRUTH_HEADER: [&str; 5] = ["t", "slip_gt", "force_R_n", "force_L_n", "phase"];

pub fn write_ground_truth(path: &Path, rows: &[GroundTruthRow]) -> Result<()> {
    let mut sink = CsvSink::create(path, &GROUND_TRUTH_HEADER)?;
    for r in rows {
        sink.line([
            r.t.to_string(),
            if r.slip_gt { "1" } else { "0" }.to_string(),
            r.force_r_n.to_string(),
            r.force_l_n.to_string(),
            r.phase.clone(),
        ])?;
    }
    sink.finish().map(|_| ())
}

pub fn read_ground_truth(path: &Path) -> Result<Vec<GroundTruthRow>> {
    let mut rdr = csv::Reader::from_path(path).map_err(|e| parse_err(path, 1, e.to_string()))?;
    let header: Vec<String> = rdr
        .headers()
        .map_err(|e| parse_err(path, 1, e.to_string()))?
        .iter()
        .map(|s| s.trim().to_string())
        .collect();
    if header != GROUND_TRUTH_HEADER {
        return Err(parse_err(path, 1, format!("expected header {}", GROUND_TRUTH_HEADER.join(","))));
    }
    let mut rows = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| parse_err(path, e.position().map(|p| p.line()).unwrap_or(0), e.to_string()))?;
        let line = rec.position().map(|p| p.line()).unwrap_or(0);
        let f = |i: usize| -> Result<f64> {
            rec[i]
                .trim()
                .parse::<f64>()
                .map_err(|_| parse_err(path, line, format!("`{}` is not a number", &rec[i])))
        };
        rows.push(GroundTruthRow {
            t: f(0)?,
            slip_gt: match rec[1].trim() {
                "0" => false,
                "1" => true,
                s => return Err(parse_err(path, line, format!("slip_gt must be 0 or 1, got `{s}`"))),
            },
            force_r_n: f(2)?,
            force_l_n: f(3)?,
            phase: rec[4].trim().to_string(),
        });
    }
    Ok(rows)
}
