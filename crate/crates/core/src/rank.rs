//! Ranking of evaluated candidates and the delimited report format.

use alloc::string::String;
use alloc::vec::Vec;
use core::cmp::Ordering;

use crate::itemset::{Itemset, ItemsetError};
use crate::logit::{Column, FitError, FitResult};
use crate::miner::CandidateItemset;

pub const REPORT_HEADER: [&str; 10] = [
    "itemset",
    "supp_d2",
    "supp_d1",
    "supp_ratio",
    "p_age",
    "p_gender",
    "p_exposure",
    "p_x",
    "p_interaction",
    "flags",
];

pub const CANDIDATE_HEADER: [&str; 4] = ["itemset", "supp_d2", "supp_d1", "supp_ratio"];

const MISSING: &str = "NA";

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ParseError {
    #[error("line {line}: expected header {expected:?}")]
    Header { line: usize, expected: String },
    #[error("line {line}: expected {expected} fields, found {found}")]
    Fields { line: usize, expected: usize, found: usize },
    #[error("line {line}: bad number {value:?}")]
    Number { line: usize, value: String },
    #[error("line {line}: unknown flag {value:?}")]
    Flag { line: usize, value: String },
    #[error("line {line}: {source}")]
    Itemset { line: usize, source: ItemsetError },
}

/// Reasons a candidate's regression cannot be taken at face value.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct Flags {
    pub separation: bool,
    pub collinear: bool,
    /// The fit failed for a reason other than collinearity.
    pub degenerate: bool,
}

impl Flags {
    pub fn any(&self) -> bool {
        self.separation || self.collinear || self.degenerate
    }

    fn render(&self) -> String {
        let mut parts = Vec::new();
        if self.separation {
            parts.push("separation");
        }
        if self.collinear {
            parts.push("collinear");
        }
        if self.degenerate {
            parts.push("degenerate");
        }
        parts.join("|")
    }

    fn parse(s: &str, line: usize) -> Result<Self, ParseError> {
        let mut flags = Flags::default();
        for part in s.split('|').filter(|p| !p.is_empty()) {
            match part {
                "separation" => flags.separation = true,
                "collinear" => flags.collinear = true,
                "degenerate" => flags.degenerate = true,
                other => {
                    return Err(ParseError::Flag {
                        line,
                        value: other.into(),
                    })
                }
            }
        }
        Ok(flags)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReportRow {
    pub itemset: Itemset,
    pub supp_d2: f64,
    pub supp_d1: f64,
    pub supp_ratio: f64,
    pub p_age: Option<f64>,
    pub p_gender: Option<f64>,
    pub p_exposure: Option<f64>,
    pub p_x: Option<f64>,
    pub p_interaction: Option<f64>,
    pub flags: Flags,
}

impl ReportRow {
    pub fn new(candidate: &CandidateItemset, fit: &Result<FitResult, FitError>) -> Self {
        let mut row = ReportRow {
            itemset: candidate.itemset.clone(),
            supp_d2: candidate.supp_d2,
            supp_d1: candidate.supp_d1,
            supp_ratio: candidate.supp_ratio,
            p_age: None,
            p_gender: None,
            p_exposure: None,
            p_x: None,
            p_interaction: None,
            flags: Flags::default(),
        };
        match fit {
            Ok(f) => {
                row.p_age = Some(f.p_value(Column::Age));
                row.p_gender = Some(f.p_value(Column::Gender));
                row.p_exposure = Some(f.p_value(Column::Exposure));
                row.p_x = Some(f.p_value(Column::X));
                row.p_interaction = Some(f.p_value(Column::Interaction));
                row.flags.separation = f.separation;
            }
            Err(FitError::Collinear(_)) => row.flags.collinear = true,
            Err(_) => row.flags.degenerate = true,
        }
        row
    }
}

/// Ascending interaction p-value, then descending support ratio, then
/// itemset order. Missing p-values sort last.
fn order(a: &ReportRow, b: &ReportRow) -> Ordering {
    let p = |r: &ReportRow| r.p_interaction.unwrap_or(f64::INFINITY);
    p(a).total_cmp(&p(b))
        .then_with(|| b.supp_ratio.total_cmp(&a.supp_ratio))
        .then_with(|| a.itemset.cmp(&b.itemset))
}

/// Orders candidates for the report; flagged rows follow all clean rows.
pub fn rank(candidates: Vec<(CandidateItemset, Result<FitResult, FitError>)>) -> Vec<ReportRow> {
    let rows: Vec<ReportRow> = candidates.iter().map(|(c, f)| ReportRow::new(c, f)).collect();
    rank_rows(rows)
}

pub fn rank_rows(rows: Vec<ReportRow>) -> Vec<ReportRow> {
    let (mut clean, mut flagged): (Vec<_>, Vec<_>) = rows.into_iter().partition(|r| !r.flags.any());
    clean.sort_by(order);
    flagged.sort_by(order);
    clean.append(&mut flagged);
    clean
}

/// Six significant digits in positional notation; `inf` for infinity.
pub fn format_sig6(x: f64) -> String {
    if x.is_infinite() {
        return String::from(if x > 0.0 { "inf" } else { "-inf" });
    }
    if x == 0.0 || !x.is_finite() {
        return alloc::format!("{:.5}", x);
    }
    let magnitude = libm::floor(libm::log10(libm::fabs(x))) as i32;
    let mut decimals = (5 - magnitude).max(0) as usize;
    let mut s = alloc::format!("{:.*}", decimals, x);
    // Rounding can carry into a new leading digit (9.999995 -> 10.00000).
    let digits = s.bytes().filter(u8::is_ascii_digit).skip_while(|&b| b == b'0').count();
    if digits > 6 && decimals > 0 {
        decimals -= 1;
        s = alloc::format!("{:.*}", decimals, x);
    }
    s
}

/// Three significant digits in scientific notation, e.g. `7.86e-30`.
pub fn format_p(p: Option<f64>) -> String {
    match p {
        Some(v) => alloc::format!("{:.2e}", v),
        None => String::from(MISSING),
    }
}

fn parse_f64(s: &str, line: usize) -> Result<f64, ParseError> {
    s.trim().parse().map_err(|_| ParseError::Number {
        line,
        value: s.into(),
    })
}

fn parse_p(s: &str, line: usize) -> Result<Option<f64>, ParseError> {
    if s.trim() == MISSING {
        Ok(None)
    } else {
        parse_f64(s, line).map(Some)
    }
}

/// Renders the report, header first, one line per row.
pub fn format_report(rows: &[ReportRow], delimiter: char) -> String {
    let mut out = String::new();
    write_line(&mut out, REPORT_HEADER.iter().map(|s| String::from(*s)), delimiter);
    for r in rows {
        write_line(
            &mut out,
            [
                alloc::format!("{}", r.itemset),
                format_sig6(r.supp_d2),
                format_sig6(r.supp_d1),
                format_sig6(r.supp_ratio),
                format_p(r.p_age),
                format_p(r.p_gender),
                format_p(r.p_exposure),
                format_p(r.p_x),
                format_p(r.p_interaction),
                r.flags.render(),
            ]
            .into_iter(),
            delimiter,
        );
    }
    out
}

fn write_line(out: &mut String, fields: impl Iterator<Item = String>, delimiter: char) {
    for (i, f) in fields.enumerate() {
        if i > 0 {
            out.push(delimiter);
        }
        out.push_str(&f);
    }
    out.push('\n');
}

fn split_checked<'a>(
    text: &'a str,
    header: &[&str],
    delimiter: char,
) -> Result<Vec<(usize, Vec<&'a str>)>, ParseError> {
    let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l));
    let expected = header.join(&*alloc::format!("{delimiter}"));
    match lines.next() {
        Some((_, l)) if l.trim_end() == expected => {}
        _ => return Err(ParseError::Header { line: 1, expected }),
    }
    lines
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(n, l)| {
            let fields: Vec<&str> = l.split(delimiter).collect();
            if fields.len() != header.len() {
                return Err(ParseError::Fields {
                    line: n,
                    expected: header.len(),
                    found: fields.len(),
                });
            }
            Ok((n, fields))
        })
        .collect()
}

fn parse_itemset(s: &str, line: usize) -> Result<Itemset, ParseError> {
    s.parse().map_err(|source| ParseError::Itemset { line, source })
}

/// Parses text produced by [`format_report`].
pub fn parse_report(text: &str, delimiter: char) -> Result<Vec<ReportRow>, ParseError> {
    split_checked(text, &REPORT_HEADER, delimiter)?
        .into_iter()
        .map(|(n, f)| {
            Ok(ReportRow {
                itemset: parse_itemset(f[0], n)?,
                supp_d2: parse_f64(f[1], n)?,
                supp_d1: parse_f64(f[2], n)?,
                supp_ratio: parse_f64(f[3], n)?,
                p_age: parse_p(f[4], n)?,
                p_gender: parse_p(f[5], n)?,
                p_exposure: parse_p(f[6], n)?,
                p_x: parse_p(f[7], n)?,
                p_interaction: parse_p(f[8], n)?,
                flags: Flags::parse(f[9].trim(), n)?,
            })
        })
        .collect()
}

/// One line per mined candidate: itemset and its two supports and ratio.
pub fn format_candidates(candidates: &[CandidateItemset], delimiter: char) -> String {
    let mut out = String::new();
    write_line(&mut out, CANDIDATE_HEADER.iter().map(|s| String::from(*s)), delimiter);
    for c in candidates {
        write_line(
            &mut out,
            [
                alloc::format!("{}", c.itemset),
                format_sig6(c.supp_d2),
                format_sig6(c.supp_d1),
                format_sig6(c.supp_ratio),
            ]
            .into_iter(),
            delimiter,
        );
    }
    out
}

/// (itemset, supp_d2, supp_d1, supp_ratio) rows of a candidate file.
pub fn parse_candidates(text: &str, delimiter: char) -> Result<Vec<(Itemset, f64, f64, f64)>, ParseError> {
    split_checked(text, &CANDIDATE_HEADER, delimiter)?
        .into_iter()
        .map(|(n, f)| {
            Ok((
                parse_itemset(f[0], n)?,
                parse_f64(f[1], n)?,
                parse_f64(f[2], n)?,
                parse_f64(f[3], n)?,
            ))
        })
        .collect()
}
