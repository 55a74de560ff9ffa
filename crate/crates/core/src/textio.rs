//! Line-oriented transcript format.
//!
//! ```text
//! # comment lines and blank lines are ignored
//! @destinations 0.25,0.75        (optional; required when rows are present)
//! 1,0.3                          outcome,prediction
//! 0,0.3,0.5,0.5                  outcome,prediction,plan row...
//! ```
//!
//! Floats are written with the shortest representation that parses back to
//! the same `f64`, so write-then-read is exact. Either every step carries a
//! plan row or none does.

use std::fmt::Write as _;
use std::path::Path;

use crate::error::{CalibError, Result};
use crate::types::{TransportPlan, Transcript};

const DESTINATIONS: &str = "@destinations";

pub fn write_transcript(tr: &Transcript, plan: Option<&TransportPlan>) -> Result<String> {
    if let Some(plan) = plan {
        plan.check_horizon(tr.len())?;
    }
    let mut out = String::new();
    if let Some(plan) = plan {
        out.push_str(DESTINATIONS);
        out.push(' ');
        push_list(&mut out, plan.destinations());
        out.push('\n');
    }
    for (t, s) in tr.steps().enumerate() {
        write!(out, "{},{}", s.outcome, s.prediction).expect("write to String");
        if let Some(plan) = plan {
            out.push(',');
            push_list(&mut out, &plan.rows()[t]);
        }
        out.push('\n');
    }
    Ok(out)
}

fn push_list(out: &mut String, values: &[f64]) {
    for (i, v) in values.iter().enumerate() {
        if i > 0 {
            out.push(',');
        }
        write!(out, "{v}").expect("write to String");
    }
}

fn parse_f64(field: &str, line: usize) -> Result<f64> {
    field.trim().parse::<f64>().map_err(|_| CalibError::Parse {
        line,
        message: format!("`{}` is not a number", field.trim()),
    })
}

pub fn parse_transcript(text: &str) -> Result<(Transcript, Option<TransportPlan>)> {
    let mut destinations: Option<Vec<f64>> = None;
    let mut outcomes = Vec::new();
    let mut predictions = Vec::new();
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let body = raw.split('#').next().unwrap_or_default().trim();
        if body.is_empty() {
            continue;
        }
        if let Some(rest) = body.strip_prefix(DESTINATIONS) {
            if destinations.is_some() || !outcomes.is_empty() {
                return Err(CalibError::Parse {
                    line,
                    message: "destinations must appear once, before any step".into(),
                });
            }
            let list = rest
                .split(',')
                .map(|f| parse_f64(f, line))
                .collect::<Result<Vec<_>>>()?;
            destinations = Some(list);
            continue;
        }
        let fields: Vec<&str> = body.split(',').collect();
        if fields.len() < 2 {
            return Err(CalibError::Parse {
                line,
                message: "expected `outcome,prediction`".into(),
            });
        }
        let outcome = match fields[0].trim() {
            "0" => 0u8,
            "1" => 1u8,
            other => {
                return Err(CalibError::Parse {
                    line,
                    message: format!("outcome `{other}` is not 0 or 1"),
                })
            }
        };
        outcomes.push(outcome);
        predictions.push(parse_f64(fields[1], line)?);
        let row = fields[2..]
            .iter()
            .map(|f| parse_f64(f, line))
            .collect::<Result<Vec<_>>>()?;
        let expected = destinations.as_ref().map_or(0, Vec::len);
        if row.len() != expected {
            return Err(CalibError::Parse {
                line,
                message: format!("plan row has {} entries, expected {expected}", row.len()),
            });
        }
        rows.push(row);
    }
    let tr = Transcript::new(outcomes, predictions)?;
    let plan = match destinations {
        Some(d) => Some(TransportPlan::new(d, rows)?),
        None => None,
    };
    Ok((tr, plan))
}

pub fn read_transcript_file(path: &Path) -> Result<(Transcript, Option<TransportPlan>)> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CalibError::Io(format!("{}: {e}", path.display())))?;
    parse_transcript(&text)
}

pub fn write_transcript_file(path: &Path, tr: &Transcript, plan: Option<&TransportPlan>) -> Result<()> {
    let text = write_transcript(tr, plan)?;
    std::fs::write(path, text).map_err(|e| CalibError::Io(format!("{}: {e}", path.display())))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_with_plan() {
        let tr = Transcript::new(vec![1, 0, 1], vec![0.1, 1.0 / 3.0, 0.7000000000000001]).unwrap();
        let plan = TransportPlan::new(
            vec![0.2, 2.0 / 3.0],
            vec![vec![0.5, 0.5], vec![1.0, 0.0], vec![0.1, 0.9]],
        )
        .unwrap();
        let text = write_transcript(&tr, Some(&plan)).unwrap();
        let (tr2, plan2) = parse_transcript(&text).unwrap();
        assert_eq!(tr, tr2);
        assert_eq!(Some(plan), plan2);
    }

    #[test]
    fn comments_and_blank_lines() {
        let (tr, plan) = parse_transcript("# header\n\n1,0.5  # trailing\n0,0.25\n").unwrap();
        assert_eq!(tr.outcomes(), &[1, 0]);
        assert_eq!(tr.predictions(), &[0.5, 0.25]);
        assert!(plan.is_none());
    }

    #[test]
    fn errors_carry_line_numbers() {
        let err = parse_transcript("1,0.5\n2,0.5\n").unwrap_err();
        assert!(matches!(err, CalibError::Parse { line: 2, .. }));
        let err = parse_transcript("1,0.5,1\n").unwrap_err();
        assert!(matches!(err, CalibError::Parse { line: 1, .. }));
        let err = parse_transcript("1,abc\n").unwrap_err();
        assert!(matches!(err, CalibError::Parse { line: 1, .. }));
        assert!(matches!(parse_transcript("# nothing\n"), Err(CalibError::Empty)));
        assert!(matches!(
            parse_transcript("1,1.5\n"),
            Err(CalibError::InvalidPrediction { .. })
        ));
    }
}
