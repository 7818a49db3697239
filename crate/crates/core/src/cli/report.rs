//! Tabular output: CSV with a config echo line, or JSON.

use std::io::Write;

use num_bigint::BigInt;
use num_traits::{Signed, Zero};
use serde::{Deserialize, Serialize};
use serde_json::{json, Map, Value};

use crate::exact::{self, Rational};
use crate::Result;

pub const SIGNIFICANT_DIGITS: usize = 12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum OutputFormat {
    #[default]
    Csv,
    Json,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Num { value: f64, exact: Option<Rational> },
    Text(String),
    Na,
}

impl Cell {
    pub fn num(value: f64) -> Self {
        Cell::Num { value, exact: None }
    }

    pub fn exact(value: f64, exact: Option<Rational>) -> Self {
        Cell::Num { value, exact }
    }

    pub fn text(s: impl Into<String>) -> Self {
        Cell::Text(s.into())
    }

    fn render(&self, rational: bool) -> String {
        match self {
            Cell::Num { exact: Some(r), .. } if rational => exact::format_rational(r),
            Cell::Num { value, .. } => format_significant(*value, SIGNIFICANT_DIGITS),
            Cell::Text(s) => s.clone(),
            Cell::Na => "NA".into(),
        }
    }

    fn to_json(&self, rational: bool) -> Value {
        match self {
            Cell::Num { exact: Some(r), .. } if rational => Value::String(exact::format_rational(r)),
            Cell::Num { value, .. } => {
                let rounded: f64 = format_significant(*value, SIGNIFICANT_DIGITS)
                    .parse()
                    .unwrap_or(*value);
                serde_json::Number::from_f64(rounded)
                    .map(Value::Number)
                    .unwrap_or_else(|| Value::String(format_significant(*value, SIGNIFICANT_DIGITS)))
            }
            Cell::Text(s) => Value::String(s.clone()),
            Cell::Na => Value::Null,
        }
    }
}

impl From<crate::Result<f64>> for Cell {
    fn from(r: crate::Result<f64>) -> Self {
        r.map(Cell::num).unwrap_or(Cell::Na)
    }
}

#[derive(Debug, Clone, Default)]
pub struct Table {
    pub columns: Vec<&'static str>,
    pub rows: Vec<Vec<Cell>>,
}

impl Table {
    pub fn new(columns: Vec<&'static str>) -> Self {
        Table {
            columns,
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }

    /// First line `# config: <json>`, then the header and the rows.
    pub fn write_csv<W: Write>(&self, config: &Value, rational: bool, mut out: W) -> Result<()> {
        writeln!(out, "# config: {}", serde_json::to_string(config).expect("config serializes"))?;
        let mut writer = csv::WriterBuilder::new()
            .terminator(csv::Terminator::Any(b'\n'))
            .from_writer(out);
        writer.write_record(&self.columns).map_err(csv_error)?;
        for row in &self.rows {
            writer
                .write_record(row.iter().map(|c| c.render(rational)))
                .map_err(csv_error)?;
        }
        writer.flush()?;
        Ok(())
    }

    pub fn to_json(&self, config: &Value, rational: bool) -> Value {
        let rows: Vec<Value> = self
            .rows
            .iter()
            .map(|row| {
                let obj: Map<String, Value> = self
                    .columns
                    .iter()
                    .zip(row)
                    .map(|(c, cell)| (c.to_string(), cell.to_json(rational)))
                    .collect();
                Value::Object(obj)
            })
            .collect();
        json!({ "config": config, "rows": rows })
    }

    pub fn write<W: Write>(&self, format: OutputFormat, config: &Value, rational: bool, mut out: W) -> Result<()> {
        match format {
            OutputFormat::Csv => self.write_csv(config, rational, out),
            OutputFormat::Json => {
                let text = serde_json::to_string_pretty(&self.to_json(config, rational))
                    .expect("report serializes");
                writeln!(out, "{text}")?;
                Ok(())
            }
        }
    }
}

fn csv_error(e: csv::Error) -> crate::Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => crate::Error::Io(io),
        other => crate::Error::Io(std::io::Error::other(format!("{other:?}"))),
    }
}

/// Decimal rendering with `digits` significant digits and no trailing zeros;
/// scientific notation outside `1e-5 ..= 1e15`.
pub fn format_significant(x: f64, digits: usize) -> String {
    if x.is_nan() {
        return "NaN".into();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    if x == 0.0 {
        return "0".into();
    }
    let sci = format!("{:.*e}", digits - 1, x);
    let (mantissa, exponent) = sci.split_once('e').expect("exponent present");
    let exponent: i32 = exponent.parse().expect("integer exponent");
    if (-5..15).contains(&exponent) {
        let decimals = (digits as i32 - 1 - exponent).max(0) as usize;
        trim_zeros(format!("{x:.decimals$}"))
    } else {
        format!("{}e{exponent}", trim_zeros(mantissa.to_string()))
    }
}

fn trim_zeros(s: String) -> String {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    } else {
        s
    }
}

/// Exact square root when `r` is the square of a rational.
pub fn rational_sqrt(r: &Rational) -> Option<Rational> {
    if r.is_negative() {
        return None;
    }
    if r.is_zero() {
        return Some(r.clone());
    }
    let root = |n: &BigInt| {
        let s = n.sqrt();
        (&s * &s == *n).then_some(s)
    };
    Some(Rational::new(root(r.numer())?, root(r.denom())?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exact::ratio;

    #[test]
    fn significant_digit_formatting() {
        assert_eq!(format_significant(21.0, 12), "21");
        assert_eq!(format_significant(17.5, 12), "17.5");
        assert_eq!(format_significant(112.0 / 3.0, 12), "37.3333333333");
        assert_eq!(format_significant(91.0 / 36.0, 12), "2.52777777778");
        assert_eq!(format_significant(-0.05, 12), "-0.05");
        assert_eq!(format_significant(9.9999999999999, 12), "10");
        assert_eq!(format_significant(1.5e-7, 12), "1.5e-7");
        assert_eq!(format_significant(2.0e20, 12), "2e20");
        assert_eq!(format_significant(0.0, 12), "0");
        assert_eq!(format_significant(1.0 / 3.0, 12), "0.333333333333");
    }

    #[test]
    fn exact_square_roots() {
        assert_eq!(rational_sqrt(&ratio(1, 25)), Some(ratio(1, 5)));
        assert_eq!(rational_sqrt(&ratio(35, 12)), None);
        assert_eq!(rational_sqrt(&ratio(-4, 1)), None);
    }

    #[test]
    fn csv_layout() {
        let mut t = Table::new(vec!["quantity", "value", "note"]);
        t.push(vec![Cell::text("E[U]"), Cell::exact(21.0, Some(ratio(21, 1))), Cell::text("")]);
        t.push(vec![Cell::text("Var(V)"), Cell::Na, Cell::text("a, b")]);
        let mut buf = Vec::new();
        t.write_csv(&json!({"k": 1}), false, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(
            text,
            "# config: {\"k\":1}\nquantity,value,note\nE[U],21,\nVar(V),NA,\"a, b\"\n"
        );
    }
}
