use std::fmt::Write as _;
use std::io::{self, Write};

use super::DetectorError;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TraceKind {
    Current,
    Counts,
}

impl TraceKind {
    pub fn unit(self) -> &'static str {
        match self {
            TraceKind::Current => "A",
            TraceKind::Counts => "counts",
        }
    }

    pub fn from_unit(unit: &str) -> Option<Self> {
        match unit {
            "A" => Some(TraceKind::Current),
            "counts" => Some(TraceKind::Counts),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceSample {
    pub t_s: f64,
    pub value: f64,
    pub rf_on: bool,
}

/// Consumer of a detector sample stream.
pub trait SampleSink {
    fn push(&mut self, t_s: f64, value: f64, rf_on: bool);
}

impl<F: FnMut(f64, f64, bool)> SampleSink for F {
    fn push(&mut self, t_s: f64, value: f64, rf_on: bool) {
        self(t_s, value, rf_on)
    }
}

/// Time-stamped detector samples with RF phase labels.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceRecord {
    pub kind: TraceKind,
    pub seq_id: usize,
    pub seed: u64,
    pub samples: Vec<TraceSample>,
}

impl SampleSink for TraceRecord {
    fn push(&mut self, t_s: f64, value: f64, rf_on: bool) {
        self.samples.push(TraceSample { t_s, value, rf_on });
    }
}

impl TraceRecord {
    pub fn new(kind: TraceKind, seq_id: usize, seed: u64) -> Self {
        Self {
            kind,
            seq_id,
            seed,
            samples: Vec::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn validate(&self) -> Result<(), DetectorError> {
        if let Some(w) = self.samples.windows(2).find(|w| !(w[1].t_s > w[0].t_s)) {
            return Err(DetectorError::NonMonotonic(w[1].t_s));
        }
        Ok(())
    }

    pub fn write_csv<W: Write>(&self, mut w: W, header: bool) -> io::Result<()> {
        if header {
            writeln!(w, "t_s,value,unit,rf_on,seq_id")?;
        }
        let unit = self.kind.unit();
        let mut line = String::with_capacity(64);
        for s in &self.samples {
            line.clear();
            let _ = writeln!(
                line,
                "{:e},{:e},{},{},{}",
                s.t_s, s.value, unit, s.rf_on as u8, self.seq_id
            );
            w.write_all(line.as_bytes())?;
        }
        Ok(())
    }

    pub fn to_csv(&self) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf, true).expect("write to Vec");
        String::from_utf8(buf).expect("ascii")
    }

    /// Parses the CSV written by [`TraceRecord::write_csv`] (single sequence, header required).
    pub fn from_csv(text: &str, seed: u64) -> Result<Self, DetectorError> {
        let mut lines = text.lines();
        match lines.next() {
            Some("t_s,value,unit,rf_on,seq_id") => {}
            _ => return Err(DetectorError::Parse("missing trace header".into())),
        }
        let mut out: Option<TraceRecord> = None;
        for (n, line) in lines.enumerate() {
            let bad = || DetectorError::Parse(format!("row {}: `{line}`", n + 1));
            let cols: Vec<&str> = line.split(',').collect();
            if cols.len() != 5 {
                return Err(bad());
            }
            let kind = TraceKind::from_unit(cols[2]).ok_or_else(bad)?;
            let seq_id: usize = cols[4].parse().map_err(|_| bad())?;
            let rec = out.get_or_insert_with(|| TraceRecord::new(kind, seq_id, seed));
            if rec.kind != kind || rec.seq_id != seq_id {
                return Err(bad());
            }
            let rf_on = match cols[3] {
                "0" => false,
                "1" => true,
                _ => return Err(bad()),
            };
            rec.samples.push(TraceSample {
                t_s: cols[0].parse().map_err(|_| bad())?,
                value: cols[1].parse().map_err(|_| bad())?,
                rf_on,
            });
        }
        out.ok_or_else(|| DetectorError::Parse("no samples".into()))
    }
}
