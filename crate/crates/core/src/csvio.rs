//! Long-format CSV for designs and response tables.
//!
//! A table has one column per factor holding level labels, then a
//! `replicate` column and a `response` column. Designs use only the factor
//! columns. When no factor schema is supplied, levels are inferred: all
//! numeric labels sort ascending, anything else keeps first-appearance order.

use std::collections::{BTreeMap, HashMap};
use std::io::{Read, Write};

use crate::error::{Error, Result};
use crate::model::{Design, Factor, FactorKind, Level, Observation, Provenance, ResponseTable, Role};

pub const REPLICATE: &str = "replicate";
pub const RESPONSE: &str = "response";

pub fn write_table<W: Write>(table: &ResponseTable, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let mut header: Vec<&str> = table.factors().iter().map(Factor::name).collect();
    header.push(REPLICATE);
    header.push(RESPONSE);
    w.write_record(&header)?;
    for r in table.rows() {
        let run = table.design().run(r.run);
        let mut rec: Vec<String> = table.factors().iter().zip(run).map(|(f, &l)| f.label(l).to_string()).collect();
        rec.push(r.replicate.to_string());
        rec.push(format!("{}", r.response));
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

pub fn table_to_string(table: &ResponseTable) -> String {
    let mut buf = Vec::new();
    write_table(table, &mut buf).expect("writing to memory");
    String::from_utf8(buf).expect("csv output is utf-8")
}

pub fn write_design<W: Write>(design: &Design, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(design.factors().iter().map(Factor::name))?;
    for run in design.runs() {
        w.write_record(design.factors().iter().zip(run).map(|(f, &l)| f.label(l)))?;
    }
    w.flush()?;
    Ok(())
}

/// Parse a response table. `schema`, when given, fixes factor order of
/// levels, kinds and roles; columns are matched by name.
pub fn read_table<R: Read>(input: R, schema: Option<&[Factor]>) -> Result<ResponseTable> {
    let mut rdr = csv::Reader::from_reader(input);
    let headers: Vec<String> = rdr.headers()?.iter().map(|h| h.trim().to_string()).collect();
    let resp_col =
        headers.iter().position(|h| h == RESPONSE).ok_or_else(|| Error::Invalid("missing `response` column".into()))?;
    let rep_col = headers.iter().position(|h| h == REPLICATE);
    let factor_cols: Vec<usize> = (0..headers.len()).filter(|&i| i != resp_col && Some(i) != rep_col).collect();

    let mut labels: Vec<Vec<String>> = Vec::new();
    let mut reps = Vec::new();
    let mut responses = Vec::new();
    for (line, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let row: Vec<String> = factor_cols.iter().map(|&i| rec[i].trim().to_string()).collect();
        let rep = match rep_col {
            Some(i) => rec[i]
                .trim()
                .parse::<u32>()
                .map_err(|e| Error::Invalid(format!("line {}: bad replicate `{}`: {e}", line + 2, &rec[i])))?,
            None => 1,
        };
        let y = rec[resp_col]
            .trim()
            .parse::<f64>()
            .map_err(|e| Error::Invalid(format!("line {}: bad response `{}`: {e}", line + 2, &rec[resp_col])))?;
        labels.push(row);
        reps.push(rep);
        responses.push(y);
    }
    if labels.is_empty() {
        return Err(Error::Invalid("table has no rows".into()));
    }
    let names: Vec<&str> = factor_cols.iter().map(|&i| headers[i].as_str()).collect();
    let factors = resolve_factors(&names, &labels, schema)?;
    let (design, run_of_row) = design_from_labels(factors, &labels)?;
    let rows = run_of_row
        .into_iter()
        .zip(reps)
        .zip(responses)
        .map(|((run, replicate), response)| Observation { run, replicate, response })
        .collect();
    ResponseTable::new(design, rows)
}

pub fn read_design<R: Read>(input: R, schema: Option<&[Factor]>) -> Result<Design> {
    let mut rdr = csv::Reader::from_reader(input);
    let headers: Vec<String> = rdr.headers()?.iter().map(|h| h.trim().to_string()).collect();
    let mut labels = Vec::new();
    for rec in rdr.records() {
        let rec = rec?;
        labels.push(rec.iter().map(|s| s.trim().to_string()).collect::<Vec<_>>());
    }
    let names: Vec<&str> = headers.iter().map(String::as_str).collect();
    let factors = resolve_factors(&names, &labels, schema)?;
    let (design, run_of_row) = design_from_labels(factors, &labels)?;
    if run_of_row.iter().enumerate().any(|(i, &r)| i != r) {
        // keep the file's run order
        let runs = run_of_row.iter().map(|&r| design.run(r).to_vec()).collect();
        let provenance = design.provenance().clone();
        return Design::new(design.factors().to_vec(), runs, provenance);
    }
    Ok(design)
}

fn resolve_factors(names: &[&str], labels: &[Vec<String>], schema: Option<&[Factor]>) -> Result<Vec<Factor>> {
    match schema {
        Some(schema) => names
            .iter()
            .map(|n| schema.iter().find(|f| f.name() == *n).cloned().ok_or_else(|| Error::UnknownFactor(n.to_string())))
            .collect(),
        None => {
            names.iter().enumerate().map(|(j, n)| infer_factor(n, labels.iter().map(|row| row[j].as_str()))).collect()
        }
    }
}

fn infer_factor<'a>(name: &str, column: impl Iterator<Item = &'a str>) -> Result<Factor> {
    let mut seen: Vec<&str> = Vec::new();
    for l in column {
        if !seen.contains(&l) {
            seen.push(l);
        }
    }
    let numeric: Option<Vec<f64>> = seen.iter().map(|s| s.parse::<f64>().ok()).collect();
    match numeric {
        Some(values) if values.iter().all(|v| v.is_finite()) => {
            let mut levels: Vec<Level> = seen.iter().zip(&values).map(|(s, &v)| Level::numeric(*s, v)).collect();
            levels.sort_by(|a, b| a.value.partial_cmp(&b.value).expect("finite"));
            Factor::new(name, FactorKind::Numeric, levels, Role::Unassigned)
        }
        _ => Factor::new(
            name,
            FactorKind::Categorical,
            seen.iter().map(|s| Level::categorical(*s)).collect(),
            Role::Unassigned,
        ),
    }
}

/// Distinct level combinations in lexicographic index order, plus the run
/// index of each input row.
fn design_from_labels(factors: Vec<Factor>, labels: &[Vec<String>]) -> Result<(Design, Vec<usize>)> {
    let lookup: Vec<HashMap<&str, usize>> =
        factors.iter().map(|f| f.levels().iter().enumerate().map(|(i, l)| (l.label.as_str(), i)).collect()).collect();
    let mut row_levels = Vec::with_capacity(labels.len());
    for row in labels {
        let lv = row
            .iter()
            .zip(&factors)
            .zip(&lookup)
            .map(|((l, f), m)| {
                m.get(l.as_str())
                    .copied()
                    .ok_or_else(|| Error::UnknownLevel { factor: f.name().to_string(), level: l.clone() })
            })
            .collect::<Result<Vec<usize>>>()?;
        row_levels.push(lv);
    }
    let distinct: BTreeMap<&Vec<usize>, usize> = {
        let mut m = BTreeMap::new();
        for lv in &row_levels {
            m.entry(lv).or_insert(0);
        }
        for (i, v) in m.values_mut().enumerate() {
            *v = i;
        }
        m
    };
    let runs: Vec<Vec<usize>> = distinct.keys().map(|k| (*k).clone()).collect();
    let run_of_row = row_levels.iter().map(|lv| distinct[lv]).collect();
    let full: usize = factors.iter().map(Factor::n_levels).product();
    let provenance = if runs.len() == full { Provenance::FullFactorial } else { Provenance::Manual };
    Ok((Design::new(factors, runs, provenance)?, run_of_row))
}
