//! Formatting of scalars, reports and tables as text, CSV or JSON.

use std::io::Write;

use serde_json::{json, Map, Value};

#[derive(Debug, Clone)]
pub enum Cell {
    Float(f64),
    Int(i64),
    Bool(bool),
    Pair([f64; 2]),
    Text(String),
}

impl Cell {
    fn text(&self) -> String {
        match self {
            Cell::Float(x) => fmt_f64(*x),
            Cell::Int(n) => n.to_string(),
            Cell::Bool(b) => b.to_string(),
            Cell::Pair([a, b]) => format!("{},{}", fmt_f64(*a), fmt_f64(*b)),
            Cell::Text(s) => s.clone(),
        }
    }

    fn json(&self) -> Value {
        let num = |x: f64| serde_json::Number::from_f64(x).map(Value::Number).unwrap_or_else(|| Value::String(fmt_f64(x)));
        match self {
            Cell::Float(x) => num(*x),
            Cell::Int(n) => json!(n),
            Cell::Bool(b) => json!(b),
            Cell::Pair([a, b]) => Value::Array(vec![num(*a), num(*b)]),
            Cell::Text(s) => json!(s),
        }
    }
}

pub enum Output {
    /// One value per line.
    Values(Vec<(&'static str, Cell)>),
    /// `key=value` lines.
    Report(Vec<(&'static str, Cell)>),
    Table {
        header: Vec<&'static str>,
        rows: Vec<Vec<Cell>>,
    },
    /// A finished JSON document.
    Document(String),
}

fn object(fields: &[(&'static str, Cell)]) -> Value {
    Value::Object(fields.iter().map(|(k, v)| (k.to_string(), v.json())).collect::<Map<_, _>>())
}

impl Output {
    pub fn write(&self, out: &mut dyn Write, as_json: bool) -> std::io::Result<()> {
        if as_json {
            let doc = match self {
                Output::Values(f) | Output::Report(f) => object(f),
                Output::Table { header, rows } => Value::Array(
                    rows.iter()
                        .map(|r| object(&header.iter().copied().zip(r.iter().cloned()).collect::<Vec<_>>()))
                        .collect(),
                ),
                Output::Document(s) => {
                    out.write_all(s.as_bytes())?;
                    return writeln!(out);
                }
            };
            serde_json::to_writer_pretty(&mut *out, &doc)?;
            return writeln!(out);
        }
        match self {
            Output::Values(f) => {
                for (_, v) in f {
                    writeln!(out, "{}", v.text())?;
                }
            }
            Output::Report(f) => {
                for (k, v) in f {
                    writeln!(out, "{k}={}", v.text())?;
                }
            }
            Output::Table { header, rows } => {
                let mut w = csv::Writer::from_writer(&mut *out);
                w.write_record(header)?;
                for r in rows {
                    w.write_record(r.iter().map(Cell::text))?;
                }
                w.flush()?;
            }
            Output::Document(s) => {
                out.write_all(s.as_bytes())?;
                writeln!(out)?;
            }
        }
        Ok(())
    }
}

/// 17 significant digits with trailing zeros removed; integral values keep
/// a `.0`, magnitudes outside `[1e-5, 1e17)` use exponent notation.
pub fn fmt_f64(x: f64) -> String {
    if x.is_nan() {
        return "NaN".into();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    if x == 0.0 {
        return if x.is_sign_negative() { "-0.0".into() } else { "0.0".into() };
    }
    let sci = format!("{:.16e}", x.abs());
    let (mantissa, exp) = sci.split_once('e').expect("exponent");
    let exp: i32 = exp.parse().expect("integer exponent");
    let digits: String = mantissa.chars().filter(|c| c.is_ascii_digit()).collect();
    let digits = digits.trim_end_matches('0');
    let digits = if digits.is_empty() { "0" } else { digits };
    let sign = if x < 0.0 { "-" } else { "" };
    let body = if (-5..17).contains(&exp) {
        if exp >= 0 {
            let e = exp as usize + 1;
            let (int, frac) = if digits.len() > e {
                (digits[..e].to_string(), digits[e..].to_string())
            } else {
                (format!("{digits:0<e$}"), String::new())
            };
            format!("{int}.{}", if frac.is_empty() { "0" } else { &frac })
        } else {
            format!("0.{}{digits}", "0".repeat((-exp - 1) as usize))
        }
    } else {
        let rest = &digits[1..];
        format!("{}.{}e{exp}", &digits[..1], if rest.is_empty() { "0" } else { rest })
    };
    format!("{sign}{body}")
}

#[cfg(test)]
mod tests {
    use super::fmt_f64;

    #[test]
    fn float_formatting() {
        assert_eq!(fmt_f64(1.0), "1.0");
        assert_eq!(fmt_f64(2.0 * 3f64.ln()), "2.1972245773362196");
        assert_eq!(fmt_f64(-0.25), "-0.25");
        assert_eq!(fmt_f64(1234.5), "1234.5");
        assert_eq!(fmt_f64(1e20), "1.0e20");
        assert_eq!(fmt_f64(2f64.powi(-23)), "1.1920928955078125e-7");
        assert_eq!(fmt_f64(2f64.powi(-10)), "0.0009765625");
        assert_eq!(fmt_f64(0.0), "0.0");
        assert_eq!(fmt_f64(f64::INFINITY), "inf");
        for x in [0.1, 1.0 / 3.0, 6.02e23, 2.5e-300, 123456789.123] {
            assert_eq!(fmt_f64(x).parse::<f64>().unwrap(), x);
        }
    }
}
