//! Reader and writer for the numeric subset of MATPOWER case files.
//!
//! Accepted statements, one per `;`-terminated line:
//!
//! ```text
//! function mpc = name          declaration line, nothing is evaluated
//! mpc.baseMVA = 100;           numeric scalar
//! mpc.version = '2';           quoted string
//! mpc.bus = [ ... ];           rectangular numeric matrix
//! ```
//!
//! Anything else (calls, indexing, arithmetic, cell arrays) is a parse error.
//! Case files are data, never code.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use super::{BranchRecord, BranchStatus, BusRecord, BusType, GridCase};
use crate::error::{Error, Result};

const BUS_I: usize = 0;
const BUS_TYPE: usize = 1;
const PD: usize = 2;
const F_BUS: usize = 0;
const T_BUS: usize = 1;
const BR_X: usize = 3;
const BR_STATUS: usize = 10;

#[derive(Debug)]
struct Matrix {
    line: usize,
    rows: Vec<Vec<f64>>,
}

#[derive(Debug, Default)]
struct RawCase {
    scalars: BTreeMap<String, f64>,
    matrices: BTreeMap<String, Matrix>,
}

/// Strips a `%` comment, ignoring `%` inside single-quoted strings.
fn strip_comment(line: &str) -> &str {
    let mut quoted = false;
    for (i, c) in line.char_indices() {
        match c {
            '\'' => quoted = !quoted,
            '%' if !quoted => return &line[..i],
            _ => {}
        }
    }
    line
}

fn is_identifier(s: &str) -> bool {
    let mut chars = s.chars();
    matches!(chars.next(), Some(c) if c.is_ascii_alphabetic())
        && chars.all(|c| c.is_ascii_alphanumeric() || c == '_')
}

fn parse_number(token: &str, line: usize) -> Result<f64> {
    match token {
        "Inf" | "inf" => Ok(f64::INFINITY),
        "-Inf" | "-inf" => Ok(f64::NEG_INFINITY),
        _ => token
            .parse::<f64>()
            .map_err(|_| Error::parse(line, format!("not a number: `{token}`"))),
    }
}

struct MatrixBuilder {
    name: String,
    start: usize,
    rows: Vec<Vec<f64>>,
    current: Vec<f64>,
    width: Option<usize>,
}

impl MatrixBuilder {
    fn end_row(&mut self, line: usize) -> Result<()> {
        if self.current.is_empty() {
            return Ok(());
        }
        let row = std::mem::take(&mut self.current);
        match self.width {
            None => self.width = Some(row.len()),
            Some(w) if w != row.len() => {
                return Err(Error::parse(
                    line,
                    format!(
                        "ragged row in `{}`: {} columns, expected {w}",
                        self.name,
                        row.len()
                    ),
                ))
            }
            _ => {}
        }
        self.rows.push(row);
        Ok(())
    }

    /// Consumes matrix body text. Returns the remainder after `]` once closed.
    fn feed<'a>(&mut self, text: &'a str, line: usize) -> Result<Option<&'a str>> {
        let mut rest = text;
        loop {
            let cut = rest.find([';', ']']);
            let (chunk, delim) = match cut {
                Some(i) => (&rest[..i], Some(rest.as_bytes()[i])),
                None => (rest, None),
            };
            for token in chunk.split(|c: char| c.is_whitespace() || c == ',') {
                if !token.is_empty() {
                    self.current.push(parse_number(token, line)?);
                }
            }
            match delim {
                Some(b';') => {
                    self.end_row(line)?;
                    rest = &rest[cut.unwrap() + 1..];
                }
                Some(_) => {
                    self.end_row(line)?;
                    return Ok(Some(&rest[cut.unwrap() + 1..]));
                }
                None => {
                    // A newline also ends a row.
                    self.end_row(line)?;
                    return Ok(None);
                }
            }
        }
    }
}

fn parse_raw(text: &str) -> Result<RawCase> {
    let mut raw = RawCase::default();
    let mut open: Option<MatrixBuilder> = None;
    let mut seen_statement = false;

    for (idx, full) in text.lines().enumerate() {
        let line = idx + 1;
        let mut rest = strip_comment(full);

        loop {
            if let Some(m) = open.as_mut() {
                match m.feed(rest, line)? {
                    Some(after) => {
                        let m = open.take().unwrap();
                        if raw.matrices.contains_key(&m.name) {
                            return Err(Error::parse(m.start, format!("`{}` assigned twice", m.name)));
                        }
                        raw.matrices.insert(
                            m.name,
                            Matrix {
                                line: m.start,
                                rows: m.rows,
                            },
                        );
                        rest = after.trim_start().strip_prefix(';').unwrap_or(after);
                        continue;
                    }
                    None => break,
                }
            }

            let stmt = rest.trim();
            if stmt.is_empty() {
                break;
            }
            if let Some(decl) = stmt.strip_prefix("function") {
                if seen_statement {
                    return Err(Error::parse(line, "function declaration must come first"));
                }
                let decl = decl.trim();
                let ok = decl
                    .split_once('=')
                    .map(|(out, name)| is_identifier(out.trim()) && is_identifier(name.trim()))
                    .unwrap_or(false);
                if !ok {
                    return Err(Error::parse(line, format!("unsupported function header `{stmt}`")));
                }
                seen_statement = true;
                break;
            }
            seen_statement = true;

            let (lhs, rhs) = stmt
                .split_once('=')
                .ok_or_else(|| Error::parse(line, format!("unsupported statement `{stmt}`")))?;
            let name = lhs
                .trim()
                .strip_prefix("mpc.")
                .filter(|n| is_identifier(n))
                .ok_or_else(|| Error::parse(line, format!("unsupported assignment target `{}`", lhs.trim())))?
                .to_string();
            let rhs = rhs.trim_start();

            if let Some(body) = rhs.strip_prefix('[') {
                open = Some(MatrixBuilder {
                    name,
                    start: line,
                    rows: Vec::new(),
                    current: Vec::new(),
                    width: None,
                });
                rest = body;
                continue;
            }

            let value = rhs
                .strip_suffix(';')
                .ok_or_else(|| Error::parse(line, format!("missing `;` after `{name}`")))?
                .trim();
            if let Some(s) = value.strip_prefix('\'') {
                if !s.ends_with('\'') {
                    return Err(Error::parse(line, "unterminated string"));
                }
            } else {
                raw.scalars.insert(name, parse_number(value, line)?);
            }
            break;
        }
    }

    if let Some(m) = open {
        return Err(Error::parse(m.start, format!("matrix `{}` is never closed with `]`", m.name)));
    }
    Ok(raw)
}

fn column(row: &[f64], col: usize, table: &str, line: usize) -> Result<f64> {
    row.get(col).copied().ok_or_else(|| {
        Error::parse(line, format!("`{table}` needs at least {} columns", col + 1))
    })
}

fn as_bus_id(v: f64, line: usize) -> Result<u32> {
    if v.fract() == 0.0 && v >= 1.0 && v <= u32::MAX as f64 {
        Ok(v as u32)
    } else {
        Err(Error::parse(line, format!("bus number {v} is not a positive integer")))
    }
}

/// Parses MATPOWER case text into bus and branch tables.
///
/// Loads are converted from MW to per-unit on `baseMVA`. Branches with status 0
/// are kept and marked [`BranchStatus::Out`].
pub fn parse_matpower_case(text: &str) -> Result<GridCase> {
    let raw = parse_raw(text)?;
    let base_mva = *raw
        .scalars
        .get("baseMVA")
        .ok_or_else(|| Error::Structure("missing `mpc.baseMVA`".into()))?;
    let bus = raw
        .matrices
        .get("bus")
        .ok_or_else(|| Error::Structure("missing `mpc.bus` table".into()))?;
    let branch = raw
        .matrices
        .get("branch")
        .ok_or_else(|| Error::Structure("missing `mpc.branch` table".into()))?;

    let mut buses = Vec::with_capacity(bus.rows.len());
    for row in &bus.rows {
        let id = as_bus_id(column(row, BUS_I, "bus", bus.line)?, bus.line)?;
        let code = column(row, BUS_TYPE, "bus", bus.line)?;
        let bus_type = BusType::from_code(code)
            .ok_or_else(|| Error::Validation(format!("bus {id} has unsupported type code {code}")))?;
        let pd = column(row, PD, "bus", bus.line)?;
        buses.push(BusRecord {
            id,
            bus_type,
            p_load: pd / base_mva,
            coords: None,
        });
    }

    let mut branches = Vec::with_capacity(branch.rows.len());
    for row in &branch.rows {
        let from_bus = as_bus_id(column(row, F_BUS, "branch", branch.line)?, branch.line)?;
        let to_bus = as_bus_id(column(row, T_BUS, "branch", branch.line)?, branch.line)?;
        let reactance = column(row, BR_X, "branch", branch.line)?;
        let status = match row.get(BR_STATUS) {
            Some(&0.0) => BranchStatus::Out,
            _ => BranchStatus::InService,
        };
        branches.push(BranchRecord {
            from_bus,
            to_bus,
            reactance,
            status,
        });
    }

    GridCase::new(base_mva, buses, branches)
}

/// Writes the tables back as case text readable by [`parse_matpower_case`].
pub fn write_matpower_case(case: &GridCase, name: &str) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "function mpc = {name}");
    let _ = writeln!(out, "mpc.version = '2';");
    let _ = writeln!(out, "mpc.baseMVA = {:?};", case.base_mva);
    let _ = writeln!(out, "\n%% bus_i\ttype\tPd\nmpc.bus = [");
    for b in &case.buses {
        let _ = writeln!(out, "\t{}\t{}\t{:?};", b.id, b.bus_type.code(), b.p_load * case.base_mva);
    }
    let _ = writeln!(out, "];\n\n%% fbus\ttbus\tr\tx\tb\trateA\trateB\trateC\tratio\tangle\tstatus\nmpc.branch = [");
    for br in &case.branches {
        let status = u8::from(br.in_service());
        let _ = writeln!(
            out,
            "\t{}\t{}\t0\t{:?}\t0\t0\t0\t0\t0\t0\t{status};",
            br.from_bus, br.to_bus, br.reactance
        );
    }
    out.push_str("];\n");
    out
}
