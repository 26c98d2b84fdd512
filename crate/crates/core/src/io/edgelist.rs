use std::path::Path;

use super::{check_field, read_text, tsv_lines, write_atomic};
use crate::error::{Error, Result};
use crate::graph::InteractionRecord;

pub const EDGELIST_HEADER: &str = "user_id\tclaim_id\trelation\tweight";
const SHORT_HEADER: &str = "user_id\tclaim_id\trelation";

pub fn load_edgelist(path: &Path) -> Result<Vec<InteractionRecord>> {
    parse_edgelist(&read_text(path)?, path)
}

/// Parses edge-list text. `path` only labels error messages.
pub fn parse_edgelist(text: &str, path: &Path) -> Result<Vec<InteractionRecord>> {
    let err = |line: usize, message: String| Error::Parse {
        path: path.to_path_buf(),
        line,
        message,
    };
    let mut lines = tsv_lines(text);
    match lines.next() {
        None => return Err(err(1, "missing header".into())),
        Some((n, fields)) => {
            let header = fields.join("\t");
            if header != EDGELIST_HEADER && header != SHORT_HEADER {
                return Err(err(n, format!("expected header {EDGELIST_HEADER:?}, found {header:?}")));
            }
        }
    }
    let mut records = Vec::new();
    for (n, fields) in lines {
        if !(3..=4).contains(&fields.len()) {
            return Err(err(n, format!("expected 3 or 4 tab-separated fields, found {}", fields.len())));
        }
        if let Some(i) = fields[..3].iter().position(|f| f.is_empty()) {
            let name = ["user_id", "claim_id", "relation"][i];
            return Err(err(n, format!("{name} is empty")));
        }
        let weight = match fields.get(3) {
            None => 1.0,
            Some(w) => w
                .parse::<f64>()
                .ok()
                .filter(|w| w.is_finite() && *w >= 0.0)
                .ok_or_else(|| err(n, format!("weight {w:?} is not a non-negative number")))?,
        };
        records.push(InteractionRecord::new(fields[0], fields[1], fields[2]).with_weight(weight));
    }
    Ok(records)
}

/// Renders records with the full header. Weights use the shortest form that
/// reads back to the same value.
pub fn format_edgelist(records: &[InteractionRecord]) -> Result<String> {
    let mut out = String::from(EDGELIST_HEADER);
    out.push('\n');
    for r in records {
        check_field(&r.user, "user id")?;
        check_field(&r.claim, "claim id")?;
        check_field(&r.relation, "relation")?;
        if r.user.starts_with('#') {
            return Err(Error::Data(format!("user id {:?} would read as a comment", r.user)));
        }
        if !(r.weight.is_finite() && r.weight >= 0.0) {
            return Err(Error::Data(format!("weight {} is not a non-negative number", r.weight)));
        }
        out.push_str(&format!("{}\t{}\t{}\t{:?}\n", r.user, r.claim, r.relation, r.weight));
    }
    Ok(out)
}

pub fn write_edgelist(path: &Path, records: &[InteractionRecord]) -> Result<()> {
    write_atomic(path, format_edgelist(records)?.as_bytes())
}
