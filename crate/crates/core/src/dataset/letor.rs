//! LETOR / SVMLight text: `<label> qid:<id> <fid>:<val> ... [# comment]`.

use std::fs::File;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use super::{Dataset, Document};
use crate::{Error, ParseError, Result};

/// Parses a LETOR stream. Feature ids are 1-based and must increase
/// strictly within a line; absent ids read as 0.0 and every row is padded to
/// the largest id seen in the stream.
pub fn parse_letor<R: BufRead>(reader: R) -> Result<Dataset, ParseError> {
    let mut documents = Vec::new();
    for (index, line) in reader.lines().enumerate() {
        let line = line?;
        if let Some(doc) = parse_line(&line, index + 1)? {
            documents.push(doc);
        }
    }
    if documents.is_empty() {
        return Err(ParseError::Empty);
    }
    Ok(Dataset::from_documents(documents).expect("non-empty"))
}

pub fn parse_letor_str(text: &str) -> Result<Dataset, ParseError> {
    parse_letor(text.as_bytes())
}

pub fn read_letor_file(path: impl AsRef<Path>) -> Result<Dataset> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::file(path, e))?;
    parse_letor(BufReader::new(file)).map_err(|e| match e {
        ParseError::Io(source) => Error::file(path, source),
        other => Error::Parse(other),
    })
}

fn parse_line(line: &str, lineno: usize) -> Result<Option<Document>, ParseError> {
    let content = match line.find('#') {
        Some(pos) => &line[..pos],
        None => line,
    };
    let mut tokens = content.split_whitespace();
    let Some(label_token) = tokens.next() else {
        return Ok(None);
    };
    let malformed = |message: String| ParseError::Malformed {
        line: lineno,
        message,
    };

    let primary_label = label_token
        .parse::<u32>()
        .map_err(|_| ParseError::InvalidLabel {
            line: lineno,
            token: label_token.to_string(),
        })?;

    let query_id = match tokens.next().and_then(|t| t.strip_prefix("qid:")) {
        Some(id) if !id.is_empty() => id.to_string(),
        _ => return Err(malformed("expected qid:<id> after the label".into())),
    };

    let mut features: Vec<f64> = Vec::new();
    for token in tokens {
        let (fid, value) = token
            .split_once(':')
            .ok_or_else(|| malformed(format!("expected <fid>:<value>, got {token:?}")))?;
        let fid: usize = fid
            .parse()
            .map_err(|_| malformed(format!("bad feature id {fid:?}")))?;
        if fid == 0 {
            return Err(malformed("feature ids start at 1".into()));
        }
        if fid <= features.len() {
            return Err(malformed(format!("feature id {fid} is not strictly increasing")));
        }
        let value: f64 = value
            .parse()
            .map_err(|_| malformed(format!("bad feature value {value:?}")))?;
        features.resize(fid - 1, 0.0);
        features.push(value);
    }

    Ok(Some(Document {
        features,
        primary_label,
        query_id,
    }))
}

/// Writes every feature explicitly so re-parsing restores the same width.
pub fn write_letor<W: Write>(dataset: &Dataset, mut out: W) -> std::io::Result<()> {
    for group in dataset.groups() {
        for doc in group.range() {
            write!(out, "{} qid:{}", dataset.primary_labels()[doc], group.query_id)?;
            for (i, v) in dataset.features(doc).iter().enumerate() {
                write!(out, " {}:{}", i + 1, v)?;
            }
            writeln!(out)?;
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn single_line_fills_missing_ids() {
        let ds = parse_letor_str("2 qid:7 1:0.5 3:1.0").unwrap();
        assert_eq!(ds.len(), 1);
        assert_eq!(ds.primary_labels(), &[2]);
        assert_eq!(ds.groups()[0].query_id, "7");
        assert_eq!(ds.features(0), &[0.5, 0.0, 1.0]);
    }

    #[test]
    fn grouping_by_qid() {
        let ds = parse_letor_str("0 qid:1 1:1.0\n1 qid:1 1:2.0\n0 qid:2 1:3.0").unwrap();
        assert_eq!(ds.len(), 3);
        let sizes: Vec<usize> = ds.groups().iter().map(|g| g.len()).collect();
        assert_eq!(sizes, vec![2, 1]);
    }

    #[test]
    fn width_is_max_fid_over_stream() {
        let ds = parse_letor_str("0 qid:1 2:1.0\n1 qid:1 5:2.0 # trailing\n\n").unwrap();
        assert_eq!(ds.feature_count(), 5);
        assert_eq!(ds.features(0), &[0.0, 1.0, 0.0, 0.0, 0.0]);
    }

    #[test]
    fn errors_carry_line_numbers() {
        let err = parse_letor_str("0 qid:1 1:1\n1 1:2").unwrap_err();
        assert!(matches!(err, ParseError::Malformed { line: 2, .. }), "{err}");
        let err = parse_letor_str("0 qid:1 2:1 1:3").unwrap_err();
        assert!(matches!(err, ParseError::Malformed { line: 1, .. }));
        let err = parse_letor_str("0 qid:1 1:x").unwrap_err();
        assert!(matches!(err, ParseError::Malformed { line: 1, .. }));
        let err = parse_letor_str("\n-1 qid:1 1:1").unwrap_err();
        assert!(matches!(err, ParseError::InvalidLabel { line: 2, .. }));
        let err = parse_letor_str("1.5 qid:1 1:1").unwrap_err();
        assert!(matches!(err, ParseError::InvalidLabel { .. }));
        let err = parse_letor_str("").unwrap_err();
        assert_eq!(err.to_string(), "no documents");
        let err = parse_letor_str("# only a comment\n").unwrap_err();
        assert!(matches!(err, ParseError::Empty));
    }

    #[test]
    fn missing_file_names_the_path() {
        let err = read_letor_file("/nonexistent/train.txt").unwrap_err();
        assert!(err.to_string().contains("/nonexistent/train.txt"));
    }

    fn rows() -> impl Strategy<Value = Vec<(u32, u8, Vec<f64>)>> {
        prop::collection::vec(
            (
                0u32..5,
                0u8..6,
                prop::collection::vec(-1e6f64..1e6, 1..6),
            ),
            1..40,
        )
    }

    proptest! {
        #[test]
        fn letor_round_trip(rows in rows()) {
            let text: String = rows
                .iter()
                .map(|(label, q, feats)| {
                    let f: Vec<String> = feats.iter().enumerate().map(|(i, v)| format!("{}:{}", i + 1, v)).collect();
                    format!("{label} qid:q{q} {}\n", f.join(" "))
                })
                .collect();
            let parsed = parse_letor_str(&text).unwrap();
            let mut buf = Vec::new();
            write_letor(&parsed, &mut buf).unwrap();
            let reparsed = parse_letor(buf.as_slice()).unwrap();
            prop_assert_eq!(parsed, reparsed);
        }
    }
}
