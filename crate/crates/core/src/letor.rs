//! Line-oriented ranking files: `<relevance> qid:<id> <index>:<value> ...`.
//!
//! Feature indices are 1-based and strictly ascending. An optional trailing
//! `# comment` is kept verbatim. Values are written with the shortest
//! representation that parses back to the same `f64`.

use std::fmt::Write as _;
use std::io::{BufRead, Write};

use crate::data::UpliftDataset;
use crate::error::{Error, Result};
use crate::metrics::Query;

#[derive(Clone, Debug, PartialEq)]
pub struct RankingLine {
    pub relevance: f64,
    pub qid: String,
    /// (1-based index, value), ascending by index.
    pub features: Vec<(u32, f64)>,
    pub comment: Option<String>,
}

impl RankingLine {
    /// Dense feature vector of length `dim`; absent indices are zero.
    pub fn dense(&self, dim: usize) -> Vec<f64> {
        let mut out = vec![0.0; dim];
        for &(idx, v) in &self.features {
            if let Some(slot) = out.get_mut(idx as usize - 1) {
                *slot = v;
            }
        }
        out
    }

    pub fn format(&self) -> String {
        let mut s = format!("{} qid:{}", self.relevance, self.qid);
        for (idx, v) in &self.features {
            let _ = write!(s, " {idx}:{v}");
        }
        if let Some(c) = &self.comment {
            let _ = write!(s, " #{c}");
        }
        s
    }
}

fn parse_err(line: usize, message: impl Into<String>) -> Error {
    Error::Ingestion {
        row: line,
        message: message.into(),
    }
}

pub fn parse_line(text: &str, line: usize) -> Result<RankingLine> {
    let (body, comment) = match text.find('#') {
        Some(pos) => (&text[..pos], Some(text[pos + 1..].to_string())),
        None => (text, None),
    };
    let mut tokens = body.split_whitespace();
    let relevance: f64 = tokens
        .next()
        .ok_or_else(|| parse_err(line, "empty line"))?
        .parse()
        .map_err(|_| parse_err(line, "relevance is not a number"))?;
    if !relevance.is_finite() {
        return Err(parse_err(line, "relevance must be finite"));
    }
    let qid = tokens
        .next()
        .and_then(|t| t.strip_prefix("qid:"))
        .ok_or_else(|| parse_err(line, "expected `qid:<id>` after the relevance"))?
        .to_string();
    let mut features = Vec::new();
    let mut last = 0u32;
    for tok in tokens {
        let (idx, val) = tok
            .split_once(':')
            .ok_or_else(|| parse_err(line, format!("malformed feature `{tok}`")))?;
        let idx: u32 = idx
            .parse()
            .map_err(|_| parse_err(line, format!("bad feature index `{idx}`")))?;
        if idx == 0 || idx <= last {
            return Err(parse_err(
                line,
                format!("feature indices must be 1-based and ascending (saw {idx} after {last})"),
            ));
        }
        let val: f64 = val
            .parse()
            .map_err(|_| parse_err(line, format!("bad feature value `{val}`")))?;
        if !val.is_finite() {
            return Err(parse_err(line, "feature values must be finite"));
        }
        features.push((idx, val));
        last = idx;
    }
    Ok(RankingLine {
        relevance,
        qid,
        features,
        comment,
    })
}

pub fn read_ranking<R: BufRead>(reader: R) -> Result<Vec<RankingLine>> {
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line.map_err(|e| parse_err(i + 1, e.to_string()))?;
        if line.trim().is_empty() || line.trim_start().starts_with('#') {
            continue;
        }
        out.push(parse_line(&line, i + 1)?);
    }
    Ok(out)
}

pub fn write_ranking<W: Write>(mut writer: W, lines: &[RankingLine]) -> std::io::Result<()> {
    for l in lines {
        writeln!(writer, "{}", l.format())?;
    }
    Ok(())
}

/// Ranking lines for the given queries, writing every feature densely.
pub fn queries_to_lines(dataset: &UpliftDataset, queries: &[Query]) -> Vec<RankingLine> {
    let mut out = Vec::new();
    for q in queries {
        for (&m, &rel) in q.members.iter().zip(&q.relevance) {
            let features = dataset.instances()[m]
                .features
                .iter()
                .enumerate()
                .map(|(j, &v)| (j as u32 + 1, v))
                .collect();
            out.push(RankingLine {
                relevance: rel,
                qid: q.id.clone(),
                features,
                comment: None,
            });
        }
    }
    out
}
