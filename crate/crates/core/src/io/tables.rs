//! Two-column node tables: class labels and ideology values.

use std::path::Path;

use super::{check_field, read_text, tsv_lines};
use crate::error::{Error, Result};

pub const LABELS_HEADER: &str = "node_id\tlabel";
pub const IDEOLOGY_HEADER: &str = "node_id\tvalue";

fn parse_pairs(text: &str, path: &Path, header: &str) -> Result<Vec<(usize, String, String)>> {
    let err = |line: usize, message: String| Error::Parse {
        path: path.to_path_buf(),
        line,
        message,
    };
    let mut lines = tsv_lines(text);
    match lines.next() {
        Some((_, fields)) if fields.join("\t") == header => {}
        Some((n, fields)) => {
            return Err(err(n, format!("expected header {header:?}, found {:?}", fields.join("\t"))))
        }
        None => return Err(err(1, "missing header".into())),
    }
    lines
        .map(|(n, fields)| match fields.as_slice() {
            [id, value] if !id.is_empty() && !value.is_empty() => {
                Ok((n, id.to_string(), value.to_string()))
            }
            _ => Err(err(n, format!("expected 2 non-empty tab-separated fields, found {}", fields.len()))),
        })
        .collect()
}

/// `(node_id, label)` pairs. Ids may carry a `user:` or `claim:` prefix.
pub fn parse_labels(text: &str, path: &Path) -> Result<Vec<(String, String)>> {
    Ok(parse_pairs(text, path, LABELS_HEADER)?
        .into_iter()
        .map(|(_, id, label)| (id, label))
        .collect())
}

pub fn load_labels(path: &Path) -> Result<Vec<(String, String)>> {
    parse_labels(&read_text(path)?, path)
}

pub fn parse_values(text: &str, path: &Path) -> Result<Vec<(String, f64)>> {
    parse_pairs(text, path, IDEOLOGY_HEADER)?
        .into_iter()
        .map(|(n, id, v)| match v.parse::<f64>() {
            Ok(x) if x.is_finite() => Ok((id, x)),
            _ => Err(Error::Parse {
                path: path.to_path_buf(),
                line: n,
                message: format!("value {v:?} is not a finite number"),
            }),
        })
        .collect()
}

pub fn load_ideology(path: &Path) -> Result<Vec<(String, f64)>> {
    parse_values(&read_text(path)?, path)
}

pub fn format_labels(labels: &[(String, String)]) -> Result<String> {
    let mut out = format!("{LABELS_HEADER}\n");
    for (id, label) in labels {
        check_field(id, "node id")?;
        check_field(label, "label")?;
        out.push_str(&format!("{id}\t{label}\n"));
    }
    Ok(out)
}

pub fn format_values(values: &[(String, f64)]) -> Result<String> {
    let mut out = format!("{IDEOLOGY_HEADER}\n");
    for (id, v) in values {
        check_field(id, "node id")?;
        out.push_str(&format!("{id}\t{v:?}\n"));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn labels_round_trip() {
        let labels = vec![("user:a".to_string(), "R".to_string()), ("x".into(), "D".into())];
        let text = format_labels(&labels).unwrap();
        assert_eq!(text, "node_id\tlabel\nuser:a\tR\nx\tD\n");
        assert_eq!(parse_labels(&text, Path::new("l")).unwrap(), labels);
    }

    #[test]
    fn values_round_trip_and_errors() {
        let values = vec![("a".to_string(), -0.25), ("b".into(), 0.1)];
        let text = format_values(&values).unwrap();
        assert_eq!(parse_values(&text, Path::new("v")).unwrap(), values);
        let bad = "node_id\tvalue\na\tNaN\n";
        assert!(matches!(parse_values(bad, Path::new("v")), Err(Error::Parse { line: 2, .. })));
        assert!(parse_labels("node_id\tvalue\n", Path::new("l")).is_err());
        assert!(parse_labels("node_id\tlabel\na\n", Path::new("l")).is_err());
    }
}
