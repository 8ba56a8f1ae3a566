//! CSV readers for the three data layouts.
//!
//! - `mean`: `y, x1..xd[, weight]`
//! - `auction`: one row per bid, `bid, x1..xd, auction_id, n_bidders`
//! - `did`: `y, x1..xd, period[, weight]`

use std::collections::{BTreeMap, HashMap};
use std::io::Read;
use std::path::Path;

use fineq::estimators::Sample;
use serde::{Deserialize, Serialize};

use crate::error::{CliError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Schema {
    Mean,
    Auction,
    Did,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Ingested {
    pub sample: Sample,
    /// Data lines read (bids, for auctions).
    pub rows: usize,
    /// Auctions per bidder count, or rows per period; empty for the mean
    /// layout.
    pub group_counts: BTreeMap<i64, usize>,
}

pub fn ingest_csv(path: &Path, schema: Schema) -> Result<Ingested> {
    let file = std::fs::File::open(path).map_err(|e| CliError::io(path, e))?;
    ingest_reader(file, schema).map_err(|e| match e {
        CliError::Data(m) => CliError::Data(format!("{}: {m}", path.display())),
        other => other,
    })
}

struct Columns {
    names: Vec<String>,
}

impl Columns {
    fn find(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }

    fn require(&self, name: &str) -> Result<usize> {
        self.find(name)
            .ok_or_else(|| CliError::Data(format!("missing column '{name}'")))
    }

    /// Positions of `x1, x2, …`, which must be numbered consecutively.
    fn covariates(&self) -> Result<Vec<usize>> {
        let mut numbered: Vec<(usize, usize)> = self
            .names
            .iter()
            .enumerate()
            .filter_map(|(pos, n)| {
                n.strip_prefix('x')
                    .and_then(|k| k.parse::<usize>().ok())
                    .map(|k| (k, pos))
            })
            .collect();
        numbered.sort_unstable();
        if numbered.is_empty() {
            return Err(CliError::Data("missing covariate column 'x1'".into()));
        }
        for (expect, (k, _)) in (1..).zip(&numbered) {
            if *k != expect {
                return Err(CliError::Data(format!("missing covariate column 'x{expect}'")));
            }
        }
        Ok(numbered.into_iter().map(|(_, pos)| pos).collect())
    }
}

fn cell<'a>(record: &'a csv::StringRecord, pos: usize, line: u64, name: &str) -> Result<&'a str> {
    record
        .get(pos)
        .map(str::trim)
        .ok_or_else(|| CliError::Data(format!("line {line}: missing value for '{name}'")))
}

fn number(record: &csv::StringRecord, pos: usize, line: u64, name: &str) -> Result<f64> {
    let raw = cell(record, pos, line, name)?;
    raw.parse::<f64>()
        .ok()
        .filter(|v| v.is_finite())
        .ok_or_else(|| CliError::Data(format!("line {line}: '{raw}' in column '{name}' is not a finite number")))
}

fn integer(record: &csv::StringRecord, pos: usize, line: u64, name: &str) -> Result<i64> {
    let raw = cell(record, pos, line, name)?;
    raw.parse::<i64>()
        .map_err(|_| CliError::Data(format!("line {line}: '{raw}' in column '{name}' is not an integer")))
}

pub fn ingest_reader<R: Read>(reader: R, schema: Schema) -> Result<Ingested> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let headers = rdr
        .headers()
        .map_err(|e| CliError::Data(format!("cannot read header: {e}")))?;
    let cols = Columns {
        names: headers.iter().map(|h| h.trim().to_string()).collect(),
    };
    let xs = cols.covariates()?;
    let mut records = Vec::new();
    for (k, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| CliError::Data(format!("line {}: {e}", k + 2)))?;
        records.push((k as u64 + 2, rec));
    }
    if records.is_empty() {
        return Err(CliError::Data("no data rows".into()));
    }
    let read_x = |rec: &csv::StringRecord, line: u64| -> Result<Vec<f64>> {
        xs.iter()
            .enumerate()
            .map(|(m, &pos)| number(rec, pos, line, &format!("x{}", m + 1)))
            .collect()
    };
    match schema {
        Schema::Mean | Schema::Did => {
            let y_pos = cols.require("y")?;
            let w_pos = cols.find("weight");
            let p_pos = match schema {
                Schema::Did => Some(cols.require("period")?),
                _ => None,
            };
            let mut y = Vec::with_capacity(records.len());
            let mut x = Vec::with_capacity(records.len());
            let mut w = Vec::with_capacity(records.len());
            let mut periods = Vec::with_capacity(records.len());
            for (line, rec) in &records {
                y.push(number(rec, y_pos, *line, "y")?);
                x.push(read_x(rec, *line)?);
                if let Some(p) = w_pos {
                    w.push(number(rec, p, *line, "weight")?);
                }
                if let Some(p) = p_pos {
                    periods.push(integer(rec, p, *line, "period")?);
                }
            }
            let mut sample = Sample::scalar(y, x).map_err(CliError::from)?;
            if w_pos.is_some() {
                sample = sample.with_weights(w).map_err(CliError::from)?;
            }
            let mut group_counts = BTreeMap::new();
            if p_pos.is_some() {
                for p in &periods {
                    *group_counts.entry(*p).or_insert(0) += 1;
                }
                sample = sample.with_groups(periods).map_err(CliError::from)?;
            }
            Ok(Ingested {
                sample,
                rows: records.len(),
                group_counts,
            })
        }
        Schema::Auction => {
            let bid_pos = cols.require("bid")?;
            let id_pos = cols.require("auction_id")?;
            let n_pos = cols.require("n_bidders")?;
            let mut index: HashMap<String, usize> = HashMap::new();
            let mut ids: Vec<String> = Vec::new();
            let mut bids: Vec<Vec<f64>> = Vec::new();
            let mut x: Vec<Vec<f64>> = Vec::new();
            let mut counts: Vec<i64> = Vec::new();
            for (line, rec) in &records {
                let id = cell(rec, id_pos, *line, "auction_id")?.to_string();
                let bid = number(rec, bid_pos, *line, "bid")?;
                let xi = read_x(rec, *line)?;
                let nb = integer(rec, n_pos, *line, "n_bidders")?;
                match index.get(&id) {
                    Some(&a) => {
                        if counts[a] != nb {
                            return Err(CliError::Data(format!(
                                "line {line}: auction '{id}' has inconsistent n_bidders"
                            )));
                        }
                        if x[a] != xi {
                            return Err(CliError::Data(format!(
                                "line {line}: auction '{id}' has inconsistent covariates"
                            )));
                        }
                        bids[a].push(bid);
                    }
                    None => {
                        index.insert(id.clone(), ids.len());
                        ids.push(id);
                        bids.push(vec![bid]);
                        x.push(xi);
                        counts.push(nb);
                    }
                }
            }
            for (a, id) in ids.iter().enumerate() {
                if bids[a].len() as i64 != counts[a] {
                    return Err(CliError::Data(format!(
                        "auction '{id}' declares {} bidders but has {} bid rows",
                        counts[a],
                        bids[a].len()
                    )));
                }
            }
            let mut group_counts = BTreeMap::new();
            for c in &counts {
                *group_counts.entry(*c).or_insert(0) += 1;
            }
            let sample = Sample::new(bids, x)
                .and_then(|s| s.with_groups(counts))
                .map_err(CliError::from)?;
            Ok(Ingested {
                sample,
                rows: records.len(),
                group_counts,
            })
        }
    }
}
