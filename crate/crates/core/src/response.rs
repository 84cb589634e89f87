//! Turning a completion back into column values.

use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dataset::{format_number, Cell, ColumnKind};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ParseError {
    #[error("expected {expected} values, got {got}")]
    CountMismatch { expected: usize, got: usize },
    #[error("values outside the category domain at positions {positions:?}")]
    DomainViolation { positions: Vec<usize>, values: Vec<String> },
    #[error("values that are not finite numbers at positions {positions:?}")]
    NumericParseFailure { positions: Vec<usize>, values: Vec<String> },
}

/// What the parsed values are checked against.
#[derive(Debug, Clone, Copy)]
pub enum Domain<'a> {
    Categories(&'a [String]),
    Numeric,
}

impl Domain<'_> {
    pub fn kind(&self) -> ColumnKind {
        match self {
            Domain::Categories(_) => ColumnKind::Categorical,
            Domain::Numeric => ColumnKind::Numerical,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParsedResponse {
    pub values: Vec<String>,
    pub diagnostics: Vec<String>,
}

impl ParsedResponse {
    pub fn cells(&self, kind: ColumnKind) -> Vec<Cell> {
        self.values
            .iter()
            .map(|v| match kind {
                ColumnKind::Numerical => Cell::Number(v.parse().expect("validated numeric")),
                ColumnKind::Categorical => Cell::Category(v.clone()),
            })
            .collect()
    }
}

fn is_group_marker(line: &str) -> bool {
    let b = line.as_bytes();
    b.len() == 2 && b[0].is_ascii_uppercase() && b[1] == b'.'
}

fn unquote(s: &str) -> &str {
    let s = s.trim();
    for q in ['"', '\'', '`'] {
        if s.len() >= 2 && s.starts_with(q) && s.ends_with(q) {
            return s[1..s.len() - 1].trim();
        }
    }
    s
}

fn tokens(raw: &str) -> Vec<String> {
    let lines: Vec<&str> = raw
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !is_group_marker(l) && !l.starts_with("```"))
        .collect();
    // A single line holding several values is read as a comma list.
    if lines.len() == 1 && lines[0].contains(',') {
        return lines[0]
            .split(',')
            .map(unquote)
            .filter(|t| !t.is_empty())
            .map(ToString::to_string)
            .collect();
    }
    lines.into_iter().map(|l| unquote(l).to_string()).collect()
}

/// Parses `expected` values for a column. Accepts one value per line or a
/// single comma-separated line; group letter lines, blank lines and code
/// fences are ignored. Categories are matched case-insensitively and
/// returned in the dataset's spelling.
pub fn parse_response(raw: &str, expected: usize, domain: Domain<'_>) -> Result<ParsedResponse, ParseError> {
    let toks = tokens(raw);
    if toks.len() != expected {
        return Err(ParseError::CountMismatch {
            expected,
            got: toks.len(),
        });
    }
    let mut values = Vec::with_capacity(expected);
    let mut diagnostics = Vec::new();
    let mut bad_pos = Vec::new();
    let mut bad_val = Vec::new();
    for (i, t) in toks.iter().enumerate() {
        match domain {
            Domain::Categories(cats) => match cats.iter().find(|c| c.eq_ignore_ascii_case(t)) {
                Some(c) => {
                    if c != t {
                        diagnostics.push(format!("position {i}: `{t}` read as `{c}`"));
                    }
                    values.push(c.clone());
                }
                None => {
                    bad_pos.push(i);
                    bad_val.push(t.clone());
                }
            },
            Domain::Numeric => match t.parse::<f64>() {
                Ok(v) if v.is_finite() => values.push(format_number(v)),
                _ => {
                    bad_pos.push(i);
                    bad_val.push(t.clone());
                }
            },
        }
    }
    if !bad_pos.is_empty() {
        return Err(match domain {
            Domain::Categories(_) => ParseError::DomainViolation {
                positions: bad_pos,
                values: bad_val,
            },
            Domain::Numeric => ParseError::NumericParseFailure {
                positions: bad_pos,
                values: bad_val,
            },
        });
    }
    Ok(ParsedResponse { values, diagnostics })
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn yes_no() -> Vec<String> {
        vec!["No".into(), "Yes".into()]
    }

    #[test]
    fn newline_values() {
        let d = yes_no();
        let p = parse_response("Yes\nNo\nYes", 3, Domain::Categories(&d)).unwrap();
        assert_eq!(p.values, ["Yes", "No", "Yes"]);
        assert!(p.diagnostics.is_empty());
    }

    #[test]
    fn markers_and_case() {
        let d = yes_no();
        let p = parse_response("A.\nyes\nno\nB.\nyes", 3, Domain::Categories(&d)).unwrap();
        assert_eq!(p.values, ["Yes", "No", "Yes"]);
        assert_eq!(p.diagnostics.len(), 3);
    }

    #[test]
    fn too_few() {
        let d = yes_no();
        assert_eq!(
            parse_response("Yes,No", 3, Domain::Categories(&d)).unwrap_err(),
            ParseError::CountMismatch { expected: 3, got: 2 }
        );
    }

    #[test]
    fn comma_line_quotes_and_blanks() {
        let d = yes_no();
        let p = parse_response("\n \"Yes\", 'no' ,YES\n\n", 3, Domain::Categories(&d)).unwrap();
        assert_eq!(p.values, ["Yes", "No", "Yes"]);
    }

    #[test]
    fn domain_violation_positions() {
        let d = yes_no();
        assert_eq!(
            parse_response("Yes\nMaybe\nNo\nPerhaps", 4, Domain::Categories(&d)).unwrap_err(),
            ParseError::DomainViolation {
                positions: vec![1, 3],
                values: vec!["Maybe".into(), "Perhaps".into()]
            }
        );
    }

    #[test]
    fn numeric() {
        let p = parse_response("30\n 41.5 \n2e1", 3, Domain::Numeric).unwrap();
        assert_eq!(p.values, ["30", "41.5", "20"]);
        assert_eq!(p.cells(ColumnKind::Numerical)[1], Cell::Number(41.5));
        assert!(matches!(
            parse_response("30\nNaN\nabc", 3, Domain::Numeric),
            Err(ParseError::NumericParseFailure { positions, .. }) if positions == [1, 2]
        ));
    }

    #[test]
    fn values_with_inner_spaces_survive() {
        let d = vec!["Married-civ-spouse".to_string(), "Never-married".to_string()];
        let p = parse_response("never-married\nMarried-civ-spouse", 2, Domain::Categories(&d)).unwrap();
        assert_eq!(p.values, ["Never-married", "Married-civ-spouse"]);
        let d = vec!["High Income".to_string(), "Low Income".to_string()];
        let p = parse_response("high income\nLow Income", 2, Domain::Categories(&d)).unwrap();
        assert_eq!(p.values, ["High Income", "Low Income"]);
    }
}
