//! Text format: a header line `n P layer`, then `P` lines of `n` characters
//! `0`/`1`. Witnesses go to a CSV sidecar with rows
//! `index,shift,columns,w_0,w_1,...` where `columns` is `;`-separated or empty.

use std::io::{BufRead, Write};

use super::{ArrangementMatrix, ArrangementPattern, PatternBits, Witness};
use crate::error::{Error, Result};

fn format_err(message: impl Into<String>) -> Error {
    Error::Format {
        what: "arrangement file",
        message: message.into(),
    }
}

pub fn write_text(arr: &ArrangementMatrix, mut out: impl Write) -> std::io::Result<()> {
    writeln!(out, "{} {} {}", arr.n(), arr.p(), arr.layer())?;
    for p in arr.patterns() {
        writeln!(out, "{}", p.bits)?;
    }
    Ok(())
}

/// Reads the text format. Patterns come back without witnesses.
pub fn read_text(input: impl BufRead) -> Result<ArrangementMatrix> {
    let mut lines = input.lines();
    let header = lines
        .next()
        .ok_or_else(|| format_err("empty input"))?
        .map_err(|e| format_err(e.to_string()))?;
    let fields: Vec<usize> = header
        .split_whitespace()
        .map(|t| t.parse().map_err(|_| format_err(format!("bad header field {t:?}"))))
        .collect::<Result<_>>()?;
    let [n, p, layer] = fields[..] else {
        return Err(format_err("header must be `n P layer`"));
    };
    let mut patterns = Vec::with_capacity(p);
    for (k, line) in lines.enumerate() {
        let line = line.map_err(|e| format_err(e.to_string()))?;
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let bits: PatternBits = line.parse()?;
        if bits.len() != n {
            return Err(format_err(format!(
                "line {}: expected {n} bits, found {}",
                k + 2,
                bits.len()
            )));
        }
        patterns.push(ArrangementPattern { bits, witness: None });
    }
    if patterns.len() != p {
        return Err(format_err(format!("header says {p} patterns, found {}", patterns.len())));
    }
    let arr = ArrangementMatrix::from_patterns(n, layer, patterns)?;
    if arr.p() != p {
        return Err(format_err("duplicate patterns"));
    }
    Ok(arr)
}

pub fn write_witness_csv(arr: &ArrangementMatrix, out: impl Write) -> Result<()> {
    let mut w = csv::WriterBuilder::new().flexible(true).from_writer(out);
    for (j, p) in arr.patterns().iter().enumerate() {
        let Some(wit) = &p.witness else { continue };
        let mut record = vec![
            j.to_string(),
            wit.shift.to_string(),
            wit.columns
                .as_ref()
                .map(|c| c.iter().map(usize::to_string).collect::<Vec<_>>().join(";"))
                .unwrap_or_default(),
        ];
        record.extend(wit.weights.iter().map(f64::to_string));
        w.write_record(&record)?;
    }
    w.flush().map_err(|e| Error::io("witness csv", e))?;
    Ok(())
}

/// Attaches witnesses from a sidecar to the patterns of `arr`.
pub fn read_witness_csv(mut arr: ArrangementMatrix, input: impl std::io::Read) -> Result<ArrangementMatrix> {
    let mut r = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .from_reader(input);
    for (row, record) in r.records().enumerate() {
        let record = record?;
        let parse = |k: usize| -> Result<f64> {
            record
                .get(k)
                .and_then(|s| s.parse().ok())
                .ok_or_else(|| format_err(format!("witness row {}: bad field {k}", row + 1)))
        };
        let j = parse(0)? as usize;
        if j >= arr.p() {
            return Err(format_err(format!("witness row {}: index {j} out of range", row + 1)));
        }
        let shift = parse(1)?;
        let columns = match record.get(2) {
            Some("") | None => None,
            Some(s) => Some(
                s.split(';')
                    .map(|c| c.parse().map_err(|_| format_err(format!("bad column {c:?}"))))
                    .collect::<Result<Vec<usize>>>()?,
            ),
        };
        let weights = (3..record.len()).map(parse).collect::<Result<Vec<_>>>()?;
        arr.patterns[j].witness = Some(Witness {
            weights,
            shift,
            columns,
        });
    }
    Ok(arr)
}
