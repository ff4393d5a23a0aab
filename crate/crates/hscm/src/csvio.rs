//! The three CSV tables of a two-level dataset.
//!
//! `groups.csv` has header `group_id,Z1,...,Zq`, `units.csv` has
//! `group_id,X1,...,Xp` and the optional `factor2.csv` has `group_id,W1,...`.
//! Group order follows `groups.csv`; numbers are written in shortest
//! round-trip form so a file round trip preserves every bit.

use std::collections::{BTreeSet, HashMap};
use std::fmt::Write as _;
use std::path::Path;

use hscm_core::{HierDataset, Level, NodeId};

use crate::error::{AppError, Result};

struct Table {
    ids: Vec<i64>,
    columns: Vec<Vec<f64>>,
    /// 1-based file line of each data row.
    lines: Vec<u64>,
}

fn read_table(path: &Path, level: Level) -> Result<Table> {
    let bytes = std::fs::read(path).map_err(|e| AppError::io(path, e))?;
    parse_table(path, &bytes, level)
}

fn parse_table(path: &Path, bytes: &[u8], level: Level) -> Result<Table> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(bytes);
    let header = rdr
        .headers()
        .map_err(|e| AppError::schema(path, format!("line 1: {e}")))?
        .clone();
    if header.get(0) != Some("group_id") {
        return Err(AppError::schema(path, "line 1: first column must be group_id"));
    }
    for (k, name) in header.iter().skip(1).enumerate() {
        let expected = NodeId::new(level, k).to_string();
        if name != expected {
            return Err(AppError::schema(
                path,
                format!("line 1: column {} is {name:?}, expected {expected}", k + 2),
            ));
        }
    }
    let width = header.len() - 1;
    if width == 0 {
        return Err(AppError::schema(path, "line 1: no variable columns"));
    }
    let mut table = Table {
        ids: Vec::new(),
        columns: vec![Vec::new(); width],
        lines: Vec::new(),
    };
    for record in rdr.records() {
        let record = record.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line());
            AppError::schema(path, format!("line {line}: {e}"))
        })?;
        let line = record.position().map_or(0, |p| p.line());
        let id = record[0]
            .parse::<i64>()
            .map_err(|_| AppError::schema(path, format!("line {line}: invalid group_id {:?}", &record[0])))?;
        for (k, field) in record.iter().skip(1).enumerate() {
            let v = field.parse::<f64>().ok().filter(|v| v.is_finite()).ok_or_else(|| {
                AppError::schema(
                    path,
                    format!("line {line}, column {}: invalid number {field:?}", &header[k + 1]),
                )
            })?;
            table.columns[k].push(v);
        }
        table.ids.push(id);
        table.lines.push(line);
    }
    if table.ids.is_empty() {
        return Err(AppError::schema(path, "no data rows"));
    }
    Ok(table)
}

fn join_ids(ids: &BTreeSet<i64>) -> String {
    ids.iter().map(i64::to_string).collect::<Vec<_>>().join(", ")
}

/// Read and cross-check the dataset files.
pub fn read_dataset(groups: &Path, units: &Path, factor2: Option<&Path>) -> Result<HierDataset> {
    let g = read_table(groups, Level::GroupZ)?;
    let u = read_table(units, Level::Unit)?;
    let f = factor2
        .map(|p| read_table(p, Level::GroupW).map(|t| (p, t)))
        .transpose()?;
    assemble(groups, g, units, u, f)
}

fn assemble(
    groups_path: &Path,
    g: Table,
    units_path: &Path,
    u: Table,
    f: Option<(&Path, Table)>,
) -> Result<HierDataset> {
    let mut index = HashMap::new();
    for (row, (&id, &line)) in g.ids.iter().zip(&g.lines).enumerate() {
        if index.insert(id, row).is_some() {
            return Err(AppError::schema(
                groups_path,
                format!("line {line}: duplicate group_id {id}"),
            ));
        }
    }
    let known: BTreeSet<i64> = g.ids.iter().copied().collect();
    let used: BTreeSet<i64> = u.ids.iter().copied().collect();
    let unknown: BTreeSet<i64> = used.difference(&known).copied().collect();
    if !unknown.is_empty() {
        return Err(AppError::schema(
            units_path,
            format!(
                "group ids not present in {}: {}",
                groups_path.display(),
                join_ids(&unknown)
            ),
        ));
    }
    let empty: BTreeSet<i64> = known.difference(&used).copied().collect();
    if !empty.is_empty() {
        return Err(AppError::schema(
            units_path,
            format!("groups without units: {}", join_ids(&empty)),
        ));
    }
    let group: Vec<usize> = u.ids.iter().map(|id| index[id]).collect();

    let w = match f {
        None => None,
        Some((path, t)) => {
            let ids: BTreeSet<i64> = t.ids.iter().copied().collect();
            let mismatch: BTreeSet<i64> = ids.symmetric_difference(&known).copied().collect();
            if !mismatch.is_empty() || ids.len() != t.ids.len() {
                let msg = if mismatch.is_empty() {
                    "duplicate group ids".to_string()
                } else {
                    format!(
                        "group ids differ from {}: {}",
                        groups_path.display(),
                        join_ids(&mismatch)
                    )
                };
                return Err(AppError::schema(path, msg));
            }
            let mut cols = vec![vec![0.0; g.ids.len()]; t.columns.len()];
            for (row, id) in t.ids.iter().enumerate() {
                for (k, col) in t.columns.iter().enumerate() {
                    cols[k][index[id]] = col[row];
                }
            }
            Some(cols)
        }
    };
    let m = g.ids.len();
    let ds = HierDataset::new(g.columns, w, u.columns, group, m)?.with_labels(g.ids)?;
    Ok(ds)
}

fn write_rows(out: &mut String, header: &[String], rows: usize, row: impl Fn(usize, &mut String)) {
    out.push_str(&header.join(","));
    out.push('\n');
    for i in 0..rows {
        row(i, out);
        out.push('\n');
    }
}

fn push_values(out: &mut String, values: impl Iterator<Item = f64>) {
    for v in values {
        let _ = write!(out, ",{v}");
    }
}

fn header(first: &[&str], level: Level, count: usize) -> Vec<String> {
    first
        .iter()
        .map(|s| s.to_string())
        .chain((0..count).map(|k| NodeId::new(level, k).to_string()))
        .collect()
}

pub fn groups_csv(ds: &HierDataset) -> String {
    let mut out = String::new();
    write_rows(
        &mut out,
        &header(&["group_id"], Level::GroupZ, ds.q()),
        ds.m(),
        |j, o| {
            let _ = write!(o, "{}", ds.group_labels[j]);
            push_values(o, ds.z.iter().map(|c| c[j]));
        },
    );
    out
}

pub fn units_csv(ds: &HierDataset) -> String {
    let mut out = String::new();
    write_rows(
        &mut out,
        &header(&["group_id"], Level::Unit, ds.p()),
        ds.n_units(),
        |i, o| {
            let _ = write!(o, "{}", ds.group_labels[ds.group[i]]);
            push_values(o, ds.x.iter().map(|c| c[i]));
        },
    );
    out
}

pub fn factor2_csv(ds: &HierDataset) -> Option<String> {
    let w = ds.w.as_ref()?;
    let mut out = String::new();
    write_rows(
        &mut out,
        &header(&["group_id"], Level::GroupW, w.len()),
        ds.m(),
        |j, o| {
            let _ = write!(o, "{}", ds.group_labels[j]);
            push_values(o, w.iter().map(|c| c[j]));
        },
    );
    Some(out)
}

/// Simulated group-level table: one row per (group, subgroup).
pub fn ztilde_csv(res: &hscm_core::InterventionResult, labels: &[i64]) -> String {
    let mut head = vec!["group_id".to_string(), "subgroup".to_string()];
    head.extend(res.group_nodes.iter().map(NodeId::to_string));
    let mut out = String::new();
    write_rows(&mut out, &head, res.group_rows(), |row, o| {
        let (g, s) = res.group_row_tag(row);
        let _ = write!(o, "{},{}", labels[g], s + 1);
        push_values(o, res.group_values.iter().map(|c| c[row]));
    });
    out
}

/// Simulated unit-level table: one row per (group, subgroup, replicate).
pub fn xtilde_csv(res: &hscm_core::InterventionResult, labels: &[i64]) -> String {
    let mut head = vec!["group_id".to_string(), "subgroup".to_string(), "replicate".to_string()];
    head.extend((0..res.unit_values.len()).map(|k| NodeId::x(k).to_string()));
    let mut out = String::new();
    write_rows(&mut out, &head, res.unit_rows(), |row, o| {
        let (g, s, r) = res.unit_row_tag(row);
        let _ = write!(o, "{},{},{}", labels[g], s + 1, r + 1);
        push_values(o, res.unit_values.iter().map(|c| c[row]));
    });
    out
}
