//! JSON input files, CSV tables and versioned JSON reports.

use crate::constants::ConstantTable;
use crate::error::{Error, Result};
use crate::potential::{FourierPotential, PotentialSpec};
use crate::standard_form::{PerturbedHamiltonian, PerturbedSpec};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use std::io::Write;
use std::path::Path;

pub const SCHEMA: &str = "morse-actions/1";

/// Pull the field name out of a serde message such as
/// ``unknown field `foo`, expected ...``.
fn field_of(message: &str) -> String {
    message
        .split('`')
        .nth(1)
        .map(str::to_owned)
        .unwrap_or_else(|| "<root>".to_owned())
}

/// Deserialize JSON text, separating syntax errors (with position) from
/// schema errors (with the offending field).
pub fn parse_json<T: DeserializeOwned>(text: &str) -> Result<T> {
    serde_json::from_str(text).map_err(|e| {
        use serde_json::error::Category;
        let message = e.to_string();
        match e.classify() {
            Category::Syntax | Category::Eof => {
                Error::Parse { line: e.line(), column: e.column(), message }
            }
            Category::Data => Error::Schema { field: field_of(&message), message },
            Category::Io => Error::Io(message),
        }
    })
}

fn read(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))
}

pub fn parse_potential(text: &str) -> Result<FourierPotential> {
    FourierPotential::from_spec(&parse_json::<PotentialSpec>(text)?)
}

pub fn load_potential(path: &Path) -> Result<FourierPotential> {
    parse_potential(&read(path)?)
}

pub fn potential_json(pot: &FourierPotential) -> String {
    let mut s = serde_json::to_string_pretty(&pot.to_spec()).expect("potential specs serialize");
    s.push('\n');
    s
}

pub fn write_potential(pot: &FourierPotential, path: &Path) -> Result<()> {
    std::fs::write(path, potential_json(pot))?;
    Ok(())
}

pub fn parse_perturbed(text: &str) -> Result<PerturbedHamiltonian> {
    PerturbedHamiltonian::from_spec(&parse_json::<PerturbedSpec>(text)?)
}

pub fn load_perturbed(path: &Path) -> Result<PerturbedHamiltonian> {
    parse_perturbed(&read(path)?)
}

/// A float with 17 significant digits, enough to round-trip every `f64`.
pub fn format_float(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.16e}")
    } else if x.is_nan() {
        "NaN".into()
    } else if x > 0.0 {
        "inf".into()
    } else {
        "-inf".into()
    }
}

/// Write a CSV table with a mandatory header row.
pub fn write_csv<W: Write>(out: W, header: &[&str], rows: &[Vec<f64>]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let io = |e: csv::Error| Error::Io(e.to_string());
    w.write_record(header).map_err(io)?;
    for row in rows {
        if row.len() != header.len() {
            return Err(Error::InvalidInput(format!(
                "row has {} columns, header has {}",
                row.len(),
                header.len()
            )));
        }
        w.write_record(row.iter().map(|&x| format_float(x))).map_err(io)?;
    }
    w.flush()?;
    Ok(())
}

pub fn csv_string(header: &[&str], rows: &[Vec<f64>]) -> Result<String> {
    let mut buf = Vec::new();
    write_csv(&mut buf, header, rows)?;
    Ok(String::from_utf8(buf).expect("csv output is utf-8"))
}

/// Read back a table written by [`write_csv`].
pub fn read_csv(text: &str) -> Result<(Vec<String>, Vec<Vec<f64>>)> {
    let mut r = csv::Reader::from_reader(text.as_bytes());
    let header = r
        .headers()
        .map_err(|e| Error::Io(e.to_string()))?
        .iter()
        .map(str::to_owned)
        .collect();
    let mut rows = Vec::new();
    for (n, rec) in r.records().enumerate() {
        let rec = rec.map_err(|e| Error::Io(e.to_string()))?;
        let row = rec
            .iter()
            .enumerate()
            .map(|(c, f)| {
                f.parse::<f64>().map_err(|e| Error::Parse {
                    line: n + 2,
                    column: c + 1,
                    message: e.to_string(),
                })
            })
            .collect::<Result<Vec<f64>>>()?;
        rows.push(row);
    }
    Ok((header, rows))
}

/// Envelope of every JSON report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report<T> {
    pub schema: String,
    pub command: String,
    pub seed: u64,
    pub constants: ConstantTable,
    pub passed: bool,
    pub body: T,
}

impl<T: Serialize> Report<T> {
    pub fn new(command: &str, seed: u64, constants: ConstantTable, passed: bool, body: T) -> Self {
        Report { schema: SCHEMA.into(), command: command.into(), seed, constants, passed, body }
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("reports serialize");
        s.push('\n');
        s
    }
}

pub fn write_report<T: Serialize>(report: &Report<T>, path: &Path) -> Result<()> {
    std::fs::write(path, report.to_json())?;
    Ok(())
}

/// Parse `lo:hi:count` with an optional `:log` suffix into a grid.
pub fn parse_range(text: &str) -> Result<Vec<f64>> {
    let bad = || Error::InvalidInput(format!("expected lo:hi:count[:log], got `{text}`"));
    let parts: Vec<&str> = text.split(':').collect();
    if parts.len() != 3 && parts.len() != 4 {
        return Err(bad());
    }
    let lo: f64 = parts[0].trim().parse().map_err(|_| bad())?;
    let hi: f64 = parts[1].trim().parse().map_err(|_| bad())?;
    let count: usize = parts[2].trim().parse().map_err(|_| bad())?;
    let log = match parts.get(3).map(|s| s.trim()) {
        None | Some("lin") => false,
        Some("log") => true,
        Some(_) => return Err(bad()),
    };
    if count == 0 || !(lo.is_finite() && hi.is_finite()) || (log && (lo <= 0.0 || hi <= 0.0)) {
        return Err(bad());
    }
    if count == 1 {
        return Ok(vec![lo]);
    }
    Ok((0..count)
        .map(|k| {
            let t = k as f64 / (count - 1) as f64;
            if log {
                lo * (hi / lo).powf(t)
            } else {
                lo + (hi - lo) * t
            }
        })
        .collect())
}

/// Parse a comma-separated parameter point; the empty string is the empty point.
pub fn parse_point(text: &str) -> Result<Vec<f64>> {
    if text.trim().is_empty() {
        return Ok(Vec::new());
    }
    text.split(',')
        .map(|s| {
            s.trim()
                .parse::<f64>()
                .map_err(|_| Error::InvalidInput(format!("bad parameter value `{s}`")))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::poly::Poly;

    fn sample() -> FourierPotential {
        FourierPotential::new(
            1,
            vec![Poly::new(1, vec![-1.0, 0.1]).unwrap(), Poly::new(1, vec![0.3, 1.0 / 3.0]).unwrap()],
            vec![Poly::new(1, vec![0.0, 0.0]).unwrap(), Poly::new(1, vec![0.1 + 0.2, -7e-17]).unwrap()],
            1.0,
            vec![[0.0, 0.5]],
        )
        .unwrap()
    }

    #[test]
    fn potential_round_trip_is_bit_exact() {
        let pot = sample();
        let back = parse_potential(&potential_json(&pot)).unwrap();
        assert_eq!(back, pot);
        for (a, b) in back.to_spec().cos.iter().flatten().zip(pot.to_spec().cos.iter().flatten()) {
            assert_eq!(a.to_bits(), b.to_bits());
        }
    }

    #[test]
    fn malformed_json_reports_position() {
        let err = parse_potential("{\n  \"K\": 1,\n  \"cos\": [[1.0]\n").unwrap_err();
        match err {
            Error::Parse { line, .. } => assert!(line >= 3),
            e => panic!("unexpected {e:?}"),
        }
    }

    #[test]
    fn unknown_field_is_named() {
        let mut v: serde_json::Value = serde_json::from_str(&potential_json(&sample())).unwrap();
        v["colour"] = serde_json::json!(1);
        let err = parse_potential(&v.to_string()).unwrap_err();
        assert!(matches!(err, Error::Schema { ref field, .. } if field == "colour"), "{err:?}");
    }

    #[test]
    fn missing_field_is_named() {
        let err = parse_potential(r#"{"K": 0, "n_params": 0, "cos": [], "sin": [], "param_box": []}"#)
            .unwrap_err();
        assert!(matches!(err, Error::Schema { ref field, .. } if field == "s0"), "{err:?}");
    }

    #[test]
    fn csv_has_header_and_round_trips() {
        let rows = vec![vec![0.1, -1.0 / 3.0], vec![1e-300, std::f64::consts::PI]];
        let text = csv_string(&["E", "I"], &rows).unwrap();
        assert!(text.starts_with("E,I\n"));
        let (header, back) = read_csv(&text).unwrap();
        assert_eq!(header, ["E", "I"]);
        assert_eq!(back, rows);
        assert!(text.contains("3.1415926535897931e0"));
    }

    #[test]
    fn ranges() {
        assert_eq!(parse_range("-1:1:3").unwrap(), vec![-1.0, 0.0, 1.0]);
        let g = parse_range("1e-6:1:7:log").unwrap();
        assert!((g[1] / g[0] - 10.0).abs() < 1e-12);
        assert_eq!(parse_range("-0.999:0.999:64").unwrap().len(), 64);
        assert!(parse_range("1:2").is_err());
        assert!(parse_range("-1:1:3:log").is_err());
        assert_eq!(parse_point("0.1, 0.2").unwrap(), vec![0.1, 0.2]);
        assert!(parse_point("").unwrap().is_empty());
    }

    #[test]
    fn reports_carry_schema_and_seed() {
        let c = ConstantTable::new(1f64.cosh(), 1.0, 1.0, 1.0);
        let r = Report::new("analyze", 7, c, true, serde_json::json!({"x": 1}));
        let text = r.to_json();
        let v: serde_json::Value = serde_json::from_str(&text).unwrap();
        assert_eq!(v["schema"], SCHEMA);
        assert_eq!(v["seed"], 7);
        assert!(v["constants"]["r2"]["log10"].as_f64().unwrap() < -50.0);
        assert_eq!(text, Report::new("analyze", 7, c, true, serde_json::json!({"x": 1})).to_json());
    }
}
