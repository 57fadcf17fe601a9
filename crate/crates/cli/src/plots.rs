//! Normalized CSV for plotting tools.
//!
//! The first column (the key: `iter`, `param`, `node_id`, ...) stays first;
//! the remaining columns are ordered by name, comparing digit runs
//! numerically so that `w_2` precedes `w_10`. Integer columns are written as
//! integers, every other value with 17 significant digits. Empty fields stay
//! empty.

use std::cmp::Ordering;
use std::io::{Read, Write};

use crate::CliError;

/// `x` with 17 significant digits, which round-trips every `f64`.
pub fn format_number(x: f64) -> String {
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

fn natural_cmp(a: &str, b: &str) -> Ordering {
    let (mut a, mut b) = (a.as_bytes(), b.as_bytes());
    loop {
        match (a.first(), b.first()) {
            (None, None) => return Ordering::Equal,
            (None, _) => return Ordering::Less,
            (_, None) => return Ordering::Greater,
            (Some(x), Some(y)) if x.is_ascii_digit() && y.is_ascii_digit() => {
                let da = a.iter().take_while(|c| c.is_ascii_digit()).count();
                let db = b.iter().take_while(|c| c.is_ascii_digit()).count();
                let (na, nb) = (
                    std::str::from_utf8(&a[..da]).unwrap().trim_start_matches('0'),
                    std::str::from_utf8(&b[..db]).unwrap().trim_start_matches('0'),
                );
                let ord = na.len().cmp(&nb.len()).then_with(|| na.cmp(nb));
                if ord != Ordering::Equal {
                    return ord;
                }
                a = &a[da..];
                b = &b[db..];
            }
            (Some(x), Some(y)) => {
                if x != y {
                    return x.cmp(y);
                }
                a = &a[1..];
                b = &b[1..];
            }
        }
    }
}

enum Cell {
    Empty,
    Int(i64),
    Real(f64),
}

fn parse_cell(field: &str, row: usize, column: &str) -> Result<Cell, CliError> {
    let field = field.trim();
    if field.is_empty() {
        return Ok(Cell::Empty);
    }
    if let Ok(v) = field.parse::<i64>() {
        return Ok(Cell::Int(v));
    }
    field
        .parse::<f64>()
        .map(Cell::Real)
        .map_err(|_| CliError::Config(format!("row {row}, column {column}: '{field}' is not a number")))
}

/// Reads a trace, weights or experiment CSV and writes its normalized form.
pub fn emit_plots_data<R: Read, W: Write>(input: R, output: W) -> Result<(), CliError> {
    let mut rd = csv::ReaderBuilder::new().has_headers(true).from_reader(input);
    let malformed = |e: csv::Error| {
        if e.is_io_error() {
            CliError::Io(e.to_string())
        } else {
            CliError::Config(format!("malformed csv: {e}"))
        }
    };
    let header: Vec<String> = rd
        .headers()
        .map_err(malformed)?
        .iter()
        .map(|h| h.trim().to_string())
        .collect();
    if header.is_empty() || header.iter().all(String::is_empty) {
        return Err(CliError::Config("csv has no header".into()));
    }
    let mut order: Vec<usize> = (1..header.len()).collect();
    order.sort_by(|&a, &b| natural_cmp(&header[a], &header[b]));
    order.insert(0, 0);

    let mut rows = Vec::new();
    for (r, record) in rd.records().enumerate() {
        let record = record.map_err(malformed)?;
        let cells = record
            .iter()
            .zip(&header)
            .map(|(f, h)| parse_cell(f, r + 1, h))
            .collect::<Result<Vec<_>, _>>()?;
        rows.push(cells);
    }
    let integral: Vec<bool> = (0..header.len())
        .map(|c| rows.iter().all(|row| !matches!(row[c], Cell::Real(_))))
        .collect();

    let mut wr = csv::Writer::from_writer(output);
    let io = |e: csv::Error| CliError::Io(e.to_string());
    wr.write_record(order.iter().map(|&c| header[c].as_str())).map_err(io)?;
    for row in &rows {
        let fields = order.iter().map(|&c| match row[c] {
            Cell::Empty => String::new(),
            Cell::Int(v) if integral[c] => v.to_string(),
            Cell::Int(v) => format_number(v as f64),
            Cell::Real(v) => format_number(v),
        });
        wr.write_record(fields).map_err(io)?;
    }
    wr.flush().map_err(|e| CliError::Io(e.to_string()))
}
