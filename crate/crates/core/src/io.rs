//! File formats: LWE samples as JSON lines after a header line, and generic
//! JSON-lines helpers.

use std::io::{BufRead, Write};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{Error, Result};
use crate::lwe::{ContinuousSample, DiscreteSample, LweSample, Noise, SampleBatch, SampleMode};
use crate::modring::{ModVector, Torus};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SampleHeader {
    pub n: usize,
    pub p: u64,
    pub mode: SampleMode,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub noise: Option<Noise>,
    /// Planted secret, kept for scoring attacks on generated instances.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub secret: Option<Vec<u64>>,
}

#[derive(Serialize, Deserialize)]
struct Row<B> {
    a: Vec<u64>,
    b: B,
}

pub fn write_jsonl<W: Write, T: Serialize>(mut w: W, items: &[T]) -> Result<()> {
    for item in items {
        serde_json::to_writer(&mut w, item)?;
        w.write_all(b"\n")?;
    }
    Ok(())
}

pub fn read_jsonl<R: BufRead, T: DeserializeOwned>(r: R) -> Result<Vec<T>> {
    r.lines()
        .filter(|l| !matches!(l, Ok(s) if s.trim().is_empty()))
        .map(|l| Ok(serde_json::from_str(&l?)?))
        .collect()
}

pub fn write_samples<W: Write>(mut w: W, header: &SampleHeader, batch: &SampleBatch) -> Result<()> {
    serde_json::to_writer(&mut w, header)?;
    w.write_all(b"\n")?;
    match batch {
        SampleBatch::Discrete(v) => {
            let rows: Vec<Row<u64>> = v.iter().map(|x| Row { a: x.a.entries().to_vec(), b: x.b }).collect();
            write_jsonl(w, &rows)
        }
        SampleBatch::Continuous(v) => {
            let rows: Vec<Row<f64>> = v.iter().map(|x| Row { a: x.a.entries().to_vec(), b: x.b.value() }).collect();
            write_jsonl(w, &rows)
        }
    }
}

fn check_a(a: Vec<u64>, header: &SampleHeader, line: usize) -> Result<ModVector> {
    if a.len() != header.n || a.iter().any(|&x| x >= header.p) {
        return Err(Error::Config(format!(
            "line {line}: a must have {} entries below {}",
            header.n, header.p
        )));
    }
    Ok(ModVector::new(a, header.p))
}

/// Reads a header line and the samples after it. Whether `b` is a residue
/// or a torus value follows the mode, the noise law, or the first row.
pub fn read_samples<R: BufRead>(r: R) -> Result<(SampleHeader, SampleBatch)> {
    let mut lines = r.lines().filter(|l| !matches!(l, Ok(s) if s.trim().is_empty()));
    let first = lines.next().ok_or_else(|| Error::Config("sample file is empty".into()))??;
    let header: SampleHeader = serde_json::from_str(&first)?;
    let rows: Vec<Row<Value>> = lines.map(|l| Ok(serde_json::from_str(&l?)?)).collect::<Result<_>>()?;
    let continuous = match (header.mode, &header.noise) {
        (SampleMode::Continuous, _) => true,
        (SampleMode::Discrete, _) => false,
        (SampleMode::Uniform, Some(Noise::Psi { .. })) => true,
        (SampleMode::Uniform, Some(Noise::Discrete { .. })) => false,
        (SampleMode::Uniform, None) => rows.first().is_some_and(|r| !r.b.is_u64()),
    };
    let batch = if continuous {
        let mut out: Vec<ContinuousSample> = Vec::with_capacity(rows.len());
        for (i, row) in rows.into_iter().enumerate() {
            let b = row
                .b
                .as_f64()
                .ok_or_else(|| Error::Config(format!("line {}: b must be a number", i + 2)))?;
            out.push(LweSample {
                a: check_a(row.a, &header, i + 2)?,
                b: Torus::new(b),
            });
        }
        SampleBatch::Continuous(out)
    } else {
        let mut out: Vec<DiscreteSample> = Vec::with_capacity(rows.len());
        for (i, row) in rows.into_iter().enumerate() {
            let b = row
                .b
                .as_u64()
                .filter(|&b| b < header.p)
                .ok_or_else(|| Error::Config(format!("line {}: b must be a residue mod {}", i + 2, header.p)))?;
            out.push(LweSample {
                a: check_a(row.a, &header, i + 2)?,
                b,
            });
        }
        SampleBatch::Discrete(out)
    };
    Ok((header, batch))
}
