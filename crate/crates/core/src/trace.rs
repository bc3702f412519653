//! Columnar simulation traces and their on-disk formats.
//!
//! Three encodings are supported: CSV with the fixed column order
//! `t_s, f_r_N, f_m_N, f_f_N, u_mA, W_N, contact, P_t_NpermA`, JSON (one array
//! per column), and a little-endian binary columnar file. Floats are written
//! in shortest round-trip form, so every encoding reloads bit-identically.

use crate::error::{Error, Result};
use crate::lti::{Signal, Unit};
use crate::plant::ContactState;
use serde::{Deserialize, Serialize};
use std::io::{Read, Write};
use std::path::Path;

pub const CSV_HEADER: [&str; 8] = [
    "t_s",
    "f_r_N",
    "f_m_N",
    "f_f_N",
    "u_mA",
    "W_N",
    "contact",
    "P_t_NpermA",
];

const MAGIC: &[u8; 8] = b"FLTRACE1";

/// One trace sample.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceRow {
    pub t: f64,
    pub f_r: f64,
    pub f_m: f64,
    pub f_f: f64,
    pub u: f64,
    pub w: f64,
    pub contact: ContactState,
    pub p_t: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Trace {
    pub fs: f64,
    pub t: Vec<f64>,
    pub f_r: Vec<f64>,
    pub f_m: Vec<f64>,
    pub f_f: Vec<f64>,
    pub u: Vec<f64>,
    pub w: Vec<f64>,
    pub contact: Vec<u8>,
    pub p_t: Vec<f64>,
}

/// Trace file encodings.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TraceFormat {
    Csv,
    Json,
    Binary,
}

impl TraceFormat {
    pub fn extension(self) -> &'static str {
        match self {
            TraceFormat::Csv => "csv",
            TraceFormat::Json => "json",
            TraceFormat::Binary => "bin",
        }
    }

    pub fn from_path(path: &Path) -> Result<Self> {
        match path.extension().and_then(|e| e.to_str()) {
            Some("csv") => Ok(TraceFormat::Csv),
            Some("json") => Ok(TraceFormat::Json),
            Some("bin") => Ok(TraceFormat::Binary),
            _ => Err(Error::Format(format!(
                "cannot infer trace format of {}",
                path.display()
            ))),
        }
    }
}

impl Trace {
    pub fn new(fs: f64) -> Self {
        Self {
            fs,
            ..Self::default()
        }
    }

    pub fn with_capacity(fs: f64, n: usize) -> Self {
        Self {
            fs,
            t: Vec::with_capacity(n),
            f_r: Vec::with_capacity(n),
            f_m: Vec::with_capacity(n),
            f_f: Vec::with_capacity(n),
            u: Vec::with_capacity(n),
            w: Vec::with_capacity(n),
            contact: Vec::with_capacity(n),
            p_t: Vec::with_capacity(n),
        }
    }

    pub fn len(&self) -> usize {
        self.t.len()
    }

    pub fn is_empty(&self) -> bool {
        self.t.is_empty()
    }

    pub fn push(&mut self, r: TraceRow) {
        self.t.push(r.t);
        self.f_r.push(r.f_r);
        self.f_m.push(r.f_m);
        self.f_f.push(r.f_f);
        self.u.push(r.u);
        self.w.push(r.w);
        self.contact.push(r.contact.code());
        self.p_t.push(r.p_t);
    }

    pub fn row(&self, i: usize) -> TraceRow {
        TraceRow {
            t: self.t[i],
            f_r: self.f_r[i],
            f_m: self.f_m[i],
            f_f: self.f_f[i],
            u: self.u[i],
            w: self.w[i],
            contact: ContactState::from_code(self.contact[i]).unwrap_or(ContactState::Stuck),
            p_t: self.p_t[i],
        }
    }

    pub fn contact_states(&self) -> Vec<ContactState> {
        self.contact
            .iter()
            .map(|&c| ContactState::from_code(c).unwrap_or(ContactState::Stuck))
            .collect()
    }

    pub fn reference(&self) -> Result<Signal> {
        Signal::new(self.f_r.clone(), self.fs, Unit::Newton)
    }

    pub fn measured(&self) -> Result<Signal> {
        Signal::new(self.f_m.clone(), self.fs, Unit::Newton)
    }

    pub fn friction(&self) -> Result<Signal> {
        Signal::new(self.f_f.clone(), self.fs, Unit::Newton)
    }

    pub fn current(&self) -> Result<Signal> {
        Signal::new(self.u.clone(), self.fs, Unit::MilliAmp)
    }

    /// Every `step`-th row.
    pub fn decimate(&self, step: usize) -> Trace {
        let step = step.max(1);
        let pick = |v: &Vec<f64>| v.iter().step_by(step).copied().collect::<Vec<_>>();
        Trace {
            fs: self.fs / step as f64,
            t: pick(&self.t),
            f_r: pick(&self.f_r),
            f_m: pick(&self.f_m),
            f_f: pick(&self.f_f),
            u: pick(&self.u),
            w: pick(&self.w),
            contact: self.contact.iter().step_by(step).copied().collect(),
            p_t: pick(&self.p_t),
        }
    }

    fn check(&self) -> Result<()> {
        let n = self.t.len();
        let lens = [
            self.f_r.len(),
            self.f_m.len(),
            self.f_f.len(),
            self.u.len(),
            self.w.len(),
            self.contact.len(),
            self.p_t.len(),
        ];
        if lens.iter().any(|&l| l != n) {
            return Err(Error::Format("trace columns differ in length".into()));
        }
        if !(self.fs > 0.0 && self.fs.is_finite()) {
            return Err(Error::Format(format!("invalid trace rate {}", self.fs)));
        }
        if let Some(c) = self.contact.iter().find(|&&c| c > 2) {
            return Err(Error::Format(format!("invalid contact code {c}")));
        }
        Ok(())
    }

    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wr = csv::Writer::from_writer(w);
        wr.write_record(CSV_HEADER)?;
        let mut rec: Vec<String> = Vec::with_capacity(8);
        for i in 0..self.len() {
            rec.clear();
            for v in [
                self.t[i],
                self.f_r[i],
                self.f_m[i],
                self.f_f[i],
                self.u[i],
                self.w[i],
            ] {
                rec.push(format!("{v:?}"));
            }
            rec.push(self.contact[i].to_string());
            rec.push(format!("{:?}", self.p_t[i]));
            wr.write_record(&rec)?;
        }
        wr.flush()?;
        Ok(())
    }

    /// Reads the CSV layout; the rate is recovered from the time column.
    pub fn read_csv<R: Read>(r: R) -> Result<Trace> {
        let mut rd = csv::Reader::from_reader(r);
        let header: Vec<String> = rd.headers()?.iter().map(str::to_owned).collect();
        if header != CSV_HEADER {
            return Err(Error::Format(format!("unexpected trace header {header:?}")));
        }
        let mut tr = Trace::new(1.0);
        for rec in rd.records() {
            let rec = rec?;
            let num = |k: usize| -> Result<f64> {
                rec[k]
                    .parse::<f64>()
                    .map_err(|e| Error::Format(format!("column {}: {e}", CSV_HEADER[k])))
            };
            tr.t.push(num(0)?);
            tr.f_r.push(num(1)?);
            tr.f_m.push(num(2)?);
            tr.f_f.push(num(3)?);
            tr.u.push(num(4)?);
            tr.w.push(num(5)?);
            tr.contact.push(
                rec[6]
                    .parse::<u8>()
                    .map_err(|e| Error::Format(format!("contact: {e}")))?,
            );
            tr.p_t.push(num(7)?);
        }
        tr.fs = rate_from_times(&tr.t)?;
        tr.check()?;
        Ok(tr)
    }

    pub fn write_binary<W: Write>(&self, mut w: W) -> Result<()> {
        w.write_all(MAGIC)?;
        w.write_all(&(self.len() as u64).to_le_bytes())?;
        w.write_all(&self.fs.to_le_bytes())?;
        for col in [&self.t, &self.f_r, &self.f_m, &self.f_f, &self.u, &self.w] {
            for v in col {
                w.write_all(&v.to_le_bytes())?;
            }
        }
        w.write_all(&self.contact)?;
        for v in &self.p_t {
            w.write_all(&v.to_le_bytes())?;
        }
        Ok(())
    }

    pub fn read_binary<R: Read>(mut r: R) -> Result<Trace> {
        let mut magic = [0u8; 8];
        r.read_exact(&mut magic)?;
        if &magic != MAGIC {
            return Err(Error::Format("not a binary trace".into()));
        }
        let mut b8 = [0u8; 8];
        r.read_exact(&mut b8)?;
        let n = u64::from_le_bytes(b8) as usize;
        r.read_exact(&mut b8)?;
        let fs = f64::from_le_bytes(b8);
        let read_col = |r: &mut R| -> Result<Vec<f64>> {
            let mut buf = vec![0u8; n * 8];
            r.read_exact(&mut buf)?;
            Ok(buf
                .chunks_exact(8)
                .map(|c| f64::from_le_bytes(c.try_into().expect("chunk of 8")))
                .collect())
        };
        let t = read_col(&mut r)?;
        let f_r = read_col(&mut r)?;
        let f_m = read_col(&mut r)?;
        let f_f = read_col(&mut r)?;
        let u = read_col(&mut r)?;
        let w = read_col(&mut r)?;
        let mut contact = vec![0u8; n];
        r.read_exact(&mut contact)?;
        let p_t = read_col(&mut r)?;
        let tr = Trace {
            fs,
            t,
            f_r,
            f_m,
            f_f,
            u,
            w,
            contact,
            p_t,
        };
        tr.check()?;
        Ok(tr)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let f = std::io::BufWriter::new(std::fs::File::create(path)?);
        match TraceFormat::from_path(path)? {
            TraceFormat::Csv => self.write_csv(f),
            TraceFormat::Binary => self.write_binary(f),
            TraceFormat::Json => {
                serde_json::to_writer(f, self)?;
                Ok(())
            }
        }
    }

    pub fn load(path: &Path) -> Result<Trace> {
        let f = std::io::BufReader::new(std::fs::File::open(path)?);
        match TraceFormat::from_path(path)? {
            TraceFormat::Csv => Trace::read_csv(f),
            TraceFormat::Binary => Trace::read_binary(f),
            TraceFormat::Json => {
                let tr: Trace = serde_json::from_reader(f)?;
                tr.check()?;
                Ok(tr)
            }
        }
    }
}

fn rate_from_times(t: &[f64]) -> Result<f64> {
    if t.len() < 2 {
        return Err(Error::Format(
            "need at least two rows to infer the rate".into(),
        ));
    }
    let span = t[t.len() - 1] - t[0];
    let fs = (t.len() - 1) as f64 / span;
    if !(fs > 0.0 && fs.is_finite()) {
        return Err(Error::Format("time column is not increasing".into()));
    }
    // rates are whole hertz in practice; snap away accumulated rounding
    Ok(if (fs - fs.round()).abs() < 1e-6 * fs {
        fs.round()
    } else {
        fs
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> Trace {
        let mut tr = Trace::new(60_000.0);
        for i in 0..50 {
            tr.push(TraceRow {
                t: i as f64 / 60_000.0,
                f_r: 0.1 * (i as f64).sin(),
                f_m: 1.0 / 3.0 + i as f64,
                f_f: -0.25,
                u: 2.5,
                w: 0.5,
                contact: ContactState::from_code((i % 3) as u8).unwrap(),
                p_t: 0.06 + 1e-17 * i as f64,
            });
        }
        tr
    }

    #[test]
    fn csv_roundtrip_is_exact() {
        let tr = sample();
        let mut buf = Vec::new();
        tr.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("t_s,f_r_N,f_m_N,f_f_N,u_mA,W_N,contact,P_t_NpermA\n"));
        assert_eq!(Trace::read_csv(buf.as_slice()).unwrap(), tr);
    }

    #[test]
    fn binary_and_json_roundtrip() {
        let tr = sample();
        let mut buf = Vec::new();
        tr.write_binary(&mut buf).unwrap();
        assert_eq!(Trace::read_binary(buf.as_slice()).unwrap(), tr);
        let js = serde_json::to_string(&tr).unwrap();
        assert_eq!(serde_json::from_str::<Trace>(&js).unwrap(), tr);
    }
}
