//! CSV formats.
//!
//! Labeled data: `d` feature columns then a label in `{-1, +1}` or `{0, 1}`;
//! an all-text first row is treated as a header. Pair data: header
//! `x1..xd, xp1..xpd, s, c`. Reals are written with 17 significant digits.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use ndarray::Array2;

use crate::error::{Error, Result};
use crate::pairs::{Label, LabeledDataset, PairDataset, WeakPair};

fn fmt_real(v: f64) -> String {
    format!("{v:.16e}")
}

fn reader<R: Read>(r: R) -> csv::Reader<R> {
    csv::ReaderBuilder::new().has_headers(false).flexible(true).trim(csv::Trim::All).from_reader(r)
}

fn parse_real(field: &str, row: usize, column: usize) -> Result<f64> {
    let v: f64 = field
        .parse()
        .map_err(|_| Error::Parse { row, column, message: format!("cannot parse {field:?} as a number") })?;
    if !v.is_finite() {
        return Err(Error::Parse { row, column, message: format!("non-finite value {field:?}") });
    }
    Ok(v)
}

#[derive(Default)]
struct LabelEncoding {
    zero_one: bool,
    signed: bool,
}

impl LabelEncoding {
    fn parse(&mut self, field: &str, row: usize) -> Result<Label> {
        let bad = || Error::LabelDomain { row, value: field.to_string() };
        let v: f64 = field.parse().map_err(|_| bad())?;
        let label = if v == 1.0 {
            Label::Pos
        } else if v == -1.0 {
            self.signed = true;
            Label::Neg
        } else if v == 0.0 {
            self.zero_one = true;
            Label::Neg
        } else {
            return Err(bad());
        };
        // a file mixing 0 and -1 matches neither encoding
        if self.signed && self.zero_one {
            return Err(bad());
        }
        Ok(label)
    }
}

pub fn read_labeled_csv<R: Read>(r: R) -> Result<LabeledDataset<f64>> {
    let mut flat = Vec::new();
    let mut labels = Vec::new();
    let mut width: Option<usize> = None;
    let mut enc = LabelEncoding::default();
    for (i, rec) in reader(r).records().enumerate() {
        let rec = rec?;
        let row = i + 1;
        if i == 0 && rec.iter().all(|f| f.parse::<f64>().is_err()) {
            continue;
        }
        if rec.len() == 1 && rec[0].is_empty() {
            continue;
        }
        let w = *width.get_or_insert(rec.len());
        if w < 2 {
            return Err(Error::Parse { row, column: 1, message: "need at least one feature and a label".into() });
        }
        if rec.len() != w {
            return Err(Error::Parse {
                row,
                column: rec.len().min(w) + 1,
                message: format!("expected {w} fields, found {}", rec.len()),
            });
        }
        for (j, field) in rec.iter().take(w - 1).enumerate() {
            flat.push(parse_real(field, row, j + 1)?);
        }
        labels.push(enc.parse(&rec[w - 1], row)?);
    }
    let Some(w) = width else {
        return Err(Error::EmptyDataset);
    };
    let features = Array2::from_shape_vec((labels.len(), w - 1), flat).expect("row widths checked");
    LabeledDataset::new(features, labels)
}

/// Reads a labeled CSV file.
pub fn load_csv(path: impl AsRef<Path>) -> Result<LabeledDataset<f64>> {
    let path = path.as_ref();
    let f = File::open(path).map_err(|e| Error::io(path, e))?;
    read_labeled_csv(BufReader::new(f))
}

pub fn write_labeled_csv<W: Write>(w: W, data: &LabeledDataset<f64>) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    let mut header: Vec<String> = (1..=data.dim()).map(|j| format!("x{j}")).collect();
    header.push("y".into());
    out.write_record(&header)?;
    for (row, y) in data.features().rows().into_iter().zip(data.labels()) {
        let mut rec: Vec<String> = row.iter().map(|&v| fmt_real(v)).collect();
        rec.push(y.as_i8().to_string());
        out.write_record(&rec)?;
    }
    out.flush().map_err(|e| Error::Csv(e.into()))?;
    Ok(())
}

pub fn save_labeled_csv(path: impl AsRef<Path>, data: &LabeledDataset<f64>) -> Result<()> {
    let path = path.as_ref();
    let f = File::create(path).map_err(|e| Error::io(path, e))?;
    write_labeled_csv(BufWriter::new(f), data)
}

fn pair_header(d: usize) -> Vec<String> {
    let mut h: Vec<String> = (1..=d).map(|j| format!("x{j}")).collect();
    h.extend((1..=d).map(|j| format!("xp{j}")));
    h.push("s".into());
    h.push("c".into());
    h
}

pub fn write_pairs_csv<W: Write>(w: W, data: &PairDataset<f64>) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(pair_header(data.dim()))?;
    for p in data.pairs() {
        let rec = p.x.iter().chain(&p.x_prime).chain([&p.s, &p.c]).map(|&v| fmt_real(v));
        out.write_record(rec)?;
    }
    out.flush().map_err(|e| Error::Csv(e.into()))?;
    Ok(())
}

pub fn save_pairs_csv(path: impl AsRef<Path>, data: &PairDataset<f64>) -> Result<()> {
    let path = path.as_ref();
    let f = File::create(path).map_err(|e| Error::io(path, e))?;
    write_pairs_csv(BufWriter::new(f), data)
}

pub fn read_pairs_csv<R: Read>(r: R) -> Result<PairDataset<f64>> {
    let mut records = reader(r).into_records();
    let header = records.next().ok_or(Error::EmptyDataset)??;
    let width = header.len();
    if width < 4 || width % 2 != 0 {
        return Err(Error::Parse { row: 1, column: 1, message: format!("pair header has {width} columns") });
    }
    let d = (width - 2) / 2;
    let expected = pair_header(d);
    if let Some(j) = header.iter().zip(&expected).position(|(a, b)| a != b) {
        return Err(Error::Parse { row: 1, column: j + 1, message: format!("expected column {:?}", expected[j]) });
    }
    let mut pairs = Vec::new();
    for (i, rec) in records.enumerate() {
        let rec = rec?;
        let row = i + 2;
        if rec.len() != width {
            return Err(Error::Parse {
                row,
                column: rec.len().min(width) + 1,
                message: format!("expected {width} fields, found {}", rec.len()),
            });
        }
        let vals = rec.iter().enumerate().map(|(j, f)| parse_real(f, row, j + 1)).collect::<Result<Vec<f64>>>()?;
        pairs.push(WeakPair::new(vals[..d].to_vec(), vals[d..2 * d].to_vec(), vals[2 * d], vals[2 * d + 1])?);
    }
    PairDataset::new(pairs)
}

pub fn load_pairs_csv(path: impl AsRef<Path>) -> Result<PairDataset<f64>> {
    let path = path.as_ref();
    let f = File::open(path).map_err(|e| Error::io(path, e))?;
    read_pairs_csv(BufReader::new(f))
}
