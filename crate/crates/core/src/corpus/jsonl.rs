//! One JSON object per line per link.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use super::dataset::LabeledLink;
use super::CorpusError;

pub fn serialize_record(link: &LabeledLink) -> String {
    serde_json::to_string(link).expect("links always serialize")
}

/// Parses one line; `line_no` is 1-based and only used for errors.
pub fn parse_record(line: &str, line_no: usize) -> Result<LabeledLink, CorpusError> {
    let link: LabeledLink = serde_json::from_str(line).map_err(|e| CorpusError::Parse {
        line: line_no,
        message: e.to_string(),
    })?;
    if let Some(b) = link.observed.as_bool() {
        if b != link.truth {
            return Err(CorpusError::Parse {
                line: line_no,
                message: "must label contradicts truth".to_owned(),
            });
        }
    }
    Ok(link)
}

pub fn write_jsonl(path: &Path, links: &[LabeledLink]) -> Result<(), CorpusError> {
    let mut out = BufWriter::new(File::create(path)?);
    for link in links {
        writeln!(out, "{}", serialize_record(link))?;
    }
    out.flush()?;
    Ok(())
}

/// Reads every nonblank line.
pub fn read_jsonl(path: &Path) -> Result<Vec<LabeledLink>, CorpusError> {
    let reader = BufReader::new(File::open(path)?);
    let mut out = Vec::new();
    for (k, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(parse_record(&line, k + 1)?);
    }
    Ok(out)
}
