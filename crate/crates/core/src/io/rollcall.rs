//! Roll-call votes in the public congressional vote database layout.
//!
//! Members file columns: `member_id` (or `icpsr`), `party` (or
//! `party_code`), and optionally `congress`, `chamber`, `nominate_dim1`.
//! Votes file columns: `member_id` (or `icpsr`), `bill_id` (or
//! `rollnumber`), `cast` (or `cast_code`), and optionally `congress`,
//! `chamber`.

use std::collections::{BTreeMap, HashMap};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::read_text;
use crate::error::{Error, Result};
use crate::graph::InteractionRecord;

/// What to do with a cast value outside the known codes.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum UnknownCast {
    #[default]
    Reject,
    Abstain,
    Skip,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct RollcallOptions {
    pub congress: Option<u32>,
    /// Matched case-insensitively against the `chamber` column.
    pub chamber: Option<String>,
    pub unknown_cast: UnknownCast,
}

/// Parsed votes with the side files derived from them. Label and ideology
/// ids carry `user:` / `claim:` prefixes.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct RollCall {
    pub records: Vec<InteractionRecord>,
    pub member_labels: Vec<(String, String)>,
    pub bill_labels: Vec<(String, String)>,
    pub ideology: Vec<(String, f64)>,
}

pub const YEA: &str = "yea";
pub const NAY: &str = "nay";
pub const ABSTAIN: &str = "abstain";

fn party_label(raw: &str) -> Option<&'static str> {
    match raw.trim().to_ascii_lowercase().as_str() {
        "100" | "d" | "dem" | "democrat" | "democratic" => Some("D"),
        "200" | "r" | "rep" | "republican" => Some("R"),
        _ => None,
    }
}

enum Cast {
    Vote(&'static str),
    NotMember,
    Unknown,
}

fn cast_category(raw: &str) -> Cast {
    match raw.trim().to_ascii_lowercase().as_str() {
        "1" | "2" | "3" | "yea" | "yes" | "y" | "aye" => Cast::Vote(YEA),
        "4" | "5" | "6" | "nay" | "no" | "n" => Cast::Vote(NAY),
        "7" | "8" | "9" | "abstain" | "absent" | "present" | "not voting" => Cast::Vote(ABSTAIN),
        "0" => Cast::NotMember,
        _ => Cast::Unknown,
    }
}

struct Table {
    path: std::path::PathBuf,
    headers: Vec<String>,
    rows: Vec<(usize, Vec<String>)>,
}

impl Table {
    fn parse(text: &str, path: &Path) -> Result<Self> {
        let mut reader = csv::ReaderBuilder::new()
            .trim(csv::Trim::All)
            .comment(Some(b'#'))
            .from_reader(text.as_bytes());
        let parse_err = |line: usize, e: csv::Error| Error::Parse {
            path: path.to_path_buf(),
            line,
            message: e.to_string(),
        };
        let headers = reader
            .headers()
            .map_err(|e| parse_err(1, e))?
            .iter()
            .map(|h| h.to_ascii_lowercase())
            .collect();
        let mut rows = Vec::new();
        for rec in reader.records() {
            let rec = rec.map_err(|e| {
                let line = e.position().map_or(0, |p| p.line() as usize);
                parse_err(line, e)
            })?;
            let line = rec.position().map_or(0, |p| p.line() as usize);
            rows.push((line, rec.iter().map(str::to_string).collect()));
        }
        Ok(Self {
            path: path.to_path_buf(),
            headers,
            rows,
        })
    }

    fn column(&self, names: &[&str]) -> Option<usize> {
        names
            .iter()
            .find_map(|n| self.headers.iter().position(|h| h == n))
    }

    fn require(&self, names: &[&str]) -> Result<usize> {
        self.column(names).ok_or_else(|| Error::Parse {
            path: self.path.clone(),
            line: 1,
            message: format!("missing column {}", names.join(" or ")),
        })
    }

    fn keep(&self, row: &[String], opts: &RollcallOptions) -> bool {
        if let (Some(c), Some(want)) = (self.column(&["congress"]), opts.congress) {
            if row[c].parse::<u32>().ok() != Some(want) {
                return false;
            }
        }
        if let (Some(c), Some(want)) = (self.column(&["chamber"]), &opts.chamber) {
            if !row[c].eq_ignore_ascii_case(want) {
                return false;
            }
        }
        true
    }
}

pub fn load_rollcall(members: &Path, votes: &Path, opts: &RollcallOptions) -> Result<RollCall> {
    parse_rollcall(&read_text(members)?, members, &read_text(votes)?, votes, opts)
}

pub fn parse_rollcall(
    members_text: &str,
    members_path: &Path,
    votes_text: &str,
    votes_path: &Path,
    opts: &RollcallOptions,
) -> Result<RollCall> {
    let members = Table::parse(members_text, members_path)?;
    let m_id = members.require(&["member_id", "icpsr"])?;
    let m_party = members.require(&["party", "party_code"])?;
    let m_score = members.column(&["nominate_dim1"]);

    let mut party: HashMap<String, &'static str> = HashMap::new();
    let mut out = RollCall::default();
    for (_, row) in &members.rows {
        if !members.keep(row, opts) {
            continue;
        }
        let Some(label) = party_label(&row[m_party]) else {
            continue;
        };
        let id = row[m_id].clone();
        if party.insert(id.clone(), label).is_none() {
            out.member_labels.push((format!("user:{id}"), label.to_string()));
            if let Some(score) = m_score.and_then(|c| row[c].parse::<f64>().ok()) {
                if score.is_finite() {
                    out.ideology.push((format!("user:{id}"), score));
                }
            }
        }
    }

    let votes = Table::parse(votes_text, votes_path)?;
    let v_member = votes.require(&["member_id", "icpsr"])?;
    let v_bill = votes.require(&["bill_id", "rollnumber"])?;
    let v_cast = votes.require(&["cast", "cast_code"])?;
    let mut yea_by_party: BTreeMap<String, [usize; 2]> = BTreeMap::new();
    let mut bill_order: Vec<String> = Vec::new();
    for (line, row) in &votes.rows {
        if !votes.keep(row, opts) {
            continue;
        }
        let Some(&member_party) = party.get(&row[v_member]) else {
            continue;
        };
        let relation = match cast_category(&row[v_cast]) {
            Cast::Vote(r) => r,
            Cast::NotMember => continue,
            Cast::Unknown => match opts.unknown_cast {
                UnknownCast::Reject => {
                    return Err(Error::Parse {
                        path: votes_path.to_path_buf(),
                        line: *line,
                        message: format!("unknown cast code {:?}", row[v_cast]),
                    })
                }
                UnknownCast::Abstain => ABSTAIN,
                UnknownCast::Skip => continue,
            },
        };
        let bill = row[v_bill].clone();
        if !yea_by_party.contains_key(&bill) {
            bill_order.push(bill.clone());
        }
        let counts = yea_by_party.entry(bill.clone()).or_default();
        if relation == YEA {
            counts[usize::from(member_party == "R")] += 1;
        }
        out.records
            .push(InteractionRecord::new(row[v_member].clone(), bill, relation));
    }
    for bill in bill_order {
        let [d, r] = yea_by_party[&bill];
        let label = match d.cmp(&r) {
            std::cmp::Ordering::Greater => "D",
            std::cmp::Ordering::Less => "R",
            std::cmp::Ordering::Equal => continue,
        };
        out.bill_labels.push((format!("claim:{bill}"), label.to_string()));
    }
    Ok(out)
}
