//! Published lookup tables shipped as fixtures, and diffs against the
//! tables regenerated by brute-force enumeration.
//!
//! Table 1 maps coefficient monomials to probe phase pairs. Tables 2 and 3
//! give the correction on `a` for each Fourier outcome of the maximal branch
//! (2 holds outputs `Omega0..2`, 3 holds `Omega3..4`). Table 4 lists outcomes
//! of the six qubit branches that leave a 2:1 state.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::homodyne::ProbePhasePair;
use crate::protocol::{
    branch_layout, derive_feedforward, monomial_class, ClassTag, Correction, FeedForwardEntry, FourierOutcome,
    Subpattern,
};

const TABLE1: &str = include_str!("../fixtures/table1.csv");
const TABLE2_3: &str = include_str!("../fixtures/table2_3.csv");
const TABLE4: &str = include_str!("../fixtures/table4.csv");
const TABLE4_STATES: &str = include_str!("../fixtures/table4_states.csv");

/// Maximal-branch phase pair.
pub const MAXIMAL_BRANCH: ProbePhasePair = ProbePhasePair::new(1, 3);

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Table1Row {
    pub coefficient: String,
    pub pair: ProbePhasePair,
    /// Index `n` of the output family `Psi_n`.
    pub output: u8,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CorrectionRow {
    pub outcome: FourierOutcome,
    /// Output index `i` of `Omega_i` before correction.
    pub output: usize,
    /// Correction index `i` of `U_i`.
    pub correction: usize,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct QubitRow {
    pub coefficient: String,
    pub outcome: FourierOutcome,
    pub output: usize,
}

fn rows(text: &str, cols: usize) -> Result<Vec<Vec<&str>>> {
    let mut lines = text.lines().filter(|l| !l.trim().is_empty());
    lines.next().ok_or_else(|| Error::Fixture("missing header".into()))?;
    lines
        .map(|l| {
            let cells: Vec<&str> = l.split(',').map(str::trim).collect();
            if cells.len() == cols {
                Ok(cells)
            } else {
                Err(Error::Fixture(format!("expected {cols} cells in {l:?}")))
            }
        })
        .collect()
}

fn num<T: std::str::FromStr>(s: &str) -> Result<T> {
    s.parse().map_err(|_| Error::Fixture(format!("bad number {s:?}")))
}

fn suffix(s: &str, prefix: &str) -> Result<usize> {
    s.strip_prefix(prefix).ok_or_else(|| Error::Fixture(format!("expected {prefix}n, got {s:?}"))).and_then(num)
}

fn outcome(cells: &[&str]) -> Result<FourierOutcome> {
    FourierOutcome::new(num(cells[0])?, num(cells[1])?, num(cells[2])?, num(cells[3])?)
}

pub fn table1() -> Result<Vec<Table1Row>> {
    rows(TABLE1, 4)?
        .into_iter()
        .map(|c| {
            Ok(Table1Row {
                coefficient: c[0].to_string(),
                pair: ProbePhasePair::new(num(c[1])?, num(c[2])?),
                output: num(c[3])?,
            })
        })
        .collect()
}

/// Rows of tables 2 and 3 in printed order.
pub fn table2_3() -> Result<Vec<CorrectionRow>> {
    rows(TABLE2_3, 6)?
        .into_iter()
        .map(|c| {
            Ok(CorrectionRow { outcome: outcome(&c)?, output: suffix(c[4], "Omega")?, correction: suffix(c[5], "U")? })
        })
        .collect()
}

pub fn table4() -> Result<Vec<QubitRow>> {
    rows(TABLE4, 6)?
        .into_iter()
        .map(|c| {
            Ok(QubitRow { coefficient: c[0].to_string(), outcome: outcome(&c[1..5])?, output: suffix(c[5], "Omega")? })
        })
        .collect()
}

/// Output states of table 4 as `|00>, |11>, |22>` amplitudes in units of `1/sqrt 5`.
pub fn table4_states() -> Result<BTreeMap<usize, [f64; 3]>> {
    rows(TABLE4_STATES, 4)?
        .into_iter()
        .map(|c| Ok((suffix(c[0], "Omega")?, [num(c[1])?, num(c[2])?, num(c[3])?])))
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub enum DiffStatus {
    #[serde(rename = "agree")]
    Agree,
    #[serde(rename = "disagree")]
    Disagree,
    /// Outcome printed more than once.
    #[serde(rename = "duplicate")]
    Duplicate,
    /// Derived row with no printed counterpart.
    #[serde(rename = "missing")]
    Missing,
    /// Printed output state lives on different modes from the derived one.
    #[serde(rename = "subspace_mismatch")]
    SubspaceMismatch,
}

impl DiffStatus {
    pub fn name(&self) -> &'static str {
        match self {
            DiffStatus::Agree => "agree",
            DiffStatus::Disagree => "disagree",
            DiffStatus::Duplicate => "duplicate",
            DiffStatus::Missing => "missing",
            DiffStatus::SubspaceMismatch => "subspace_mismatch",
        }
    }
}

impl fmt::Display for DiffStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// One line of a diff report.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct DiffRow {
    pub table: u8,
    pub key: String,
    pub reference: String,
    pub derived: String,
    pub status: DiffStatus,
}

fn diff_row(table: u8, key: impl Into<String>, reference: String, derived: String, status: DiffStatus) -> DiffRow {
    DiffRow { table, key: key.into(), reference, derived, status }
}

/// Derived table 1: monomial, phase pair and output family per branch.
pub fn derived_table1() -> Vec<Table1Row> {
    branch_layout()
        .into_iter()
        .map(|(pair, coefficient)| {
            let tag = monomial_class(&coefficient);
            Table1Row { coefficient, pair, output: tag.psi_index().expect("branch families have an index") }
        })
        .collect()
}

pub fn table1_csv(rows: &[Table1Row]) -> String {
    let mut out = String::from("coefficient,first_shift,second_shift,output_state\n");
    for r in rows {
        out.push_str(&format!("{},{},{},{}\n", r.coefficient, r.pair.p, r.pair.q, r.output));
    }
    out
}

pub fn diff_table1() -> Result<Vec<DiffRow>> {
    let derived: BTreeMap<String, Table1Row> =
        derived_table1().into_iter().map(|r| (r.coefficient.clone(), r)).collect();
    let show = |r: &Table1Row| format!("{} Psi{}", r.pair, r.output);
    let mut out = Vec::new();
    let mut seen = BTreeSet::new();
    for r in table1()? {
        let status = match derived.get(&r.coefficient) {
            _ if !seen.insert(r.coefficient.clone()) => DiffStatus::Duplicate,
            Some(d) if d == &r => DiffStatus::Agree,
            _ => DiffStatus::Disagree,
        };
        let got = derived.get(&r.coefficient).map(show).unwrap_or_default();
        out.push(diff_row(1, &r.coefficient, show(&r), got, status));
    }
    for (k, d) in &derived {
        if !seen.contains(k) {
            out.push(diff_row(1, k, String::new(), show(d), DiffStatus::Missing));
        }
    }
    Ok(out)
}

fn listed(e: &FeedForwardEntry) -> Option<usize> {
    match e.correction {
        Correction::Listed(i) => Some(i),
        Correction::Diagonal(_) => None,
    }
}

/// Which of tables 2 and 3 an output index belongs to.
fn table_of_output(i: usize) -> u8 {
    if i <= 2 {
        2
    } else {
        3
    }
}

/// Diff of tables 2 and 3 against the derived maximal-branch feed-forward.
///
/// `which` selects table 2 or 3; derived outcomes whose correction belongs
/// to that table but are never printed anywhere are reported as missing.
pub fn diff_table2_3(which: u8) -> Result<Vec<DiffRow>> {
    let derived = derive_feedforward(MAXIMAL_BRANCH)?;
    let show = |o: Option<usize>| o.map_or("diag".to_string(), |i| format!("Omega{i} U{i}"));
    let reference = table2_3()?;
    let mut counts: BTreeMap<FourierOutcome, usize> = BTreeMap::new();
    for r in &reference {
        *counts.entry(r.outcome).or_insert(0) += 1;
    }
    let mut out = Vec::new();
    for r in reference.iter().filter(|r| table_of_output(r.output) == which) {
        let d = listed(&derived[r.outcome.index()]);
        let status = if counts[&r.outcome] > 1 {
            DiffStatus::Duplicate
        } else if d == Some(r.correction) && r.output == r.correction {
            DiffStatus::Agree
        } else {
            DiffStatus::Disagree
        };
        let text = format!("Omega{} U{}", r.output, r.correction);
        out.push(diff_row(which, r.outcome.to_string(), text, show(d), status));
    }
    for e in &derived {
        let d = listed(e);
        if !counts.contains_key(&e.outcome) && d.map_or(which == 3, |i| table_of_output(i) == which) {
            out.push(diff_row(which, e.outcome.to_string(), String::new(), show(d), DiffStatus::Missing));
        }
    }
    Ok(out)
}

fn qubit_branches() -> Vec<(ProbePhasePair, String, ClassTag)> {
    branch_layout()
        .into_iter()
        .map(|(p, m)| {
            let tag = monomial_class(&m);
            (p, m, tag)
        })
        .filter(|(_, _, t)| t.is_qubit())
        .collect()
}

/// Magnitude layout of a corrected state in units of `1/sqrt 5`, rounded.
fn layout_of(e: &FeedForwardEntry) -> Option<[f64; 3]> {
    let t = e.target.as_ref()?;
    let amps = crate::protocol::classify::diagonal_amplitudes(t)?;
    Some(amps.map(|a| (a.norm() * 5f64.sqrt() * 1e6).round() / 1e6))
}

fn show_layout(l: &[f64; 3]) -> String {
    let names = ["00", "11", "22"];
    let parts: Vec<String> = (0..3).filter(|&x| l[x] != 0.0).map(|x| format!("{}|{}>", l[x], names[x])).collect();
    parts.join("+")
}

/// Diff of table 4: each printed outcome is checked for a 2:1 output on the
/// same modes as the printed state. Derived 2:1 outcomes that are not printed
/// are reported as missing.
pub fn diff_table4() -> Result<Vec<DiffRow>> {
    let states = table4_states()?;
    let mut derived = BTreeMap::new();
    for (pair, mono, _) in qubit_branches() {
        derived.insert(mono, derive_feedforward(pair)?);
    }
    let mut out = Vec::new();
    let mut printed = BTreeSet::new();
    for r in table4()? {
        let key = format!("{} {}", r.coefficient, r.outcome);
        let want = states.get(&r.output).ok_or_else(|| Error::Fixture(format!("no state for Omega{}", r.output)))?;
        let reference = format!("Omega{} {}", r.output, show_layout(want));
        let Some(table) = derived.get(&r.coefficient) else {
            out.push(diff_row(4, key, reference, String::new(), DiffStatus::Disagree));
            continue;
        };
        if !printed.insert((r.coefficient.clone(), r.outcome)) {
            out.push(diff_row(4, key, reference, String::new(), DiffStatus::Duplicate));
            continue;
        }
        let e = &table[r.outcome.index()];
        let got = layout_of(e);
        let text = format!("{} {}", e.final_class.subpattern_name(), got.as_ref().map(show_layout).unwrap_or_default());
        let status = match got {
            _ if e.final_class.subpattern != Some(Subpattern::Ratio2To1) => DiffStatus::Disagree,
            Some(g) if g == *want => DiffStatus::Agree,
            Some(g) if sorted(g) == sorted(*want) => DiffStatus::SubspaceMismatch,
            _ => DiffStatus::Disagree,
        };
        out.push(diff_row(4, key, reference, text, status));
    }
    for (mono, table) in &derived {
        for e in table {
            if e.final_class.subpattern == Some(Subpattern::Ratio2To1) && !printed.contains(&(mono.clone(), e.outcome))
            {
                let text = format!("RATIO_2_1 {}", layout_of(e).as_ref().map(show_layout).unwrap_or_default());
                out.push(diff_row(4, format!("{mono} {}", e.outcome), String::new(), text, DiffStatus::Missing));
            }
        }
    }
    Ok(out)
}

fn sorted(mut l: [f64; 3]) -> [f64; 3] {
    l.sort_by(f64::total_cmp);
    l
}

/// CSV with header `table,key,reference,derived,status`.
pub fn diff_csv(rows: &[DiffRow]) -> String {
    let mut out = String::from("table,key,reference,derived,status\n");
    for r in rows {
        out.push_str(&format!("{},\"{}\",\"{}\",\"{}\",{}\n", r.table, r.key, r.reference, r.derived, r.status));
    }
    out
}

/// Count of each status in a diff.
pub fn tally(rows: &[DiffRow]) -> BTreeMap<DiffStatus, usize> {
    let mut m = BTreeMap::new();
    for r in rows {
        *m.entry(r.status).or_insert(0) += 1;
    }
    m
}

/// Feed-forward rows for a regenerated table: 2 and 3 split the maximal
/// branch by correction, 4 covers every qubit branch.
pub fn derived_feedforward(which: u8) -> Result<Vec<FeedForwardEntry>> {
    match which {
        2 | 3 => Ok(derive_feedforward(MAXIMAL_BRANCH)?
            .into_iter()
            .filter(|e| listed(e).map_or(which == 3, |i| table_of_output(i) == which))
            .collect()),
        4 => {
            let mut out = Vec::new();
            for (pair, _, _) in qubit_branches() {
                out.extend(derive_feedforward(pair)?);
            }
            Ok(out)
        }
        _ => Err(Error::InvalidParameter(format!("no feed-forward table {which}"))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fixtures_parse() {
        assert_eq!(table1().unwrap().len(), 10);
        assert_eq!(table2_3().unwrap().len(), 81);
        assert_eq!(table4().unwrap().len(), 54);
        assert_eq!(table4_states().unwrap().len(), 6);
    }

    #[test]
    fn table1_agrees() {
        let d = diff_table1().unwrap();
        assert_eq!(d.len(), 10);
        assert!(d.iter().all(|r| r.status == DiffStatus::Agree), "{d:?}");
        assert_eq!(table1_csv(&derived_table1()).lines().count(), 11);
    }

    #[test]
    fn first_row_of_table2_is_identity() {
        let d = diff_table2_3(2).unwrap();
        let first = &d[0];
        assert_eq!(first.key, "(0,0,0,0)");
        assert_eq!(first.status, DiffStatus::Agree);
        assert_eq!(first.derived, "Omega0 U0");
    }

    #[test]
    fn tables_2_3_findings() {
        let mut all = diff_table2_3(2).unwrap();
        all.extend(diff_table2_3(3).unwrap());
        let t = tally(&all);
        assert_eq!(t.get(&DiffStatus::Duplicate), Some(&24));
        assert_eq!(t.get(&DiffStatus::Missing), Some(&12));
        assert_eq!(t.get(&DiffStatus::Disagree), None);
        assert_eq!(t[&DiffStatus::Agree], 57);
    }

    #[test]
    fn table4_flags_mismatched_modes() {
        let d = diff_table4().unwrap();
        let t = tally(&d);
        assert_eq!(t[&DiffStatus::Agree], 36);
        assert_eq!(t[&DiffStatus::SubspaceMismatch], 18);
        assert_eq!(t[&DiffStatus::Missing], 6 * 18);
        assert!(d
            .iter()
            .filter(|r| r.status == DiffStatus::SubspaceMismatch)
            .all(|r| r.key.starts_with("b2c") || r.key.starts_with("bc2")));
    }

    #[test]
    fn regenerated_tables() {
        assert_eq!(derived_feedforward(2).unwrap().len(), 45);
        assert_eq!(derived_feedforward(3).unwrap().len(), 36);
        assert_eq!(derived_feedforward(4).unwrap().len(), 6 * 81);
        assert!(derived_feedforward(5).is_err());
    }
}
