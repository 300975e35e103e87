//! Plain CSV output with a fixed number format, and the parsers the plotter
//! and round-trip checks need. Fields never contain commas or quotes, so no
//! quoting is done.

use thiserror::Error;
use twosite_coag::particles::SiteSnapshot;
use twosite_coag::{Site, SnapshotRecord};

pub const TIMESERIES_HEADER: &str = "t,site,particle_count,mass_frac,sigma_hat,rho_hat,max_mass,gelled";

const SIG_DIGITS: usize = 12;

#[derive(Debug, Error, PartialEq)]
pub enum CsvError {
    #[error("empty file (no header)")]
    Empty,
    #[error("unexpected header {found:?}, expected {expected:?}")]
    Header { found: String, expected: String },
    #[error("line {line}: expected {expected} fields, found {found}")]
    Width { line: usize, expected: usize, found: usize },
    #[error("line {line}: cannot parse {field} = {value:?}")]
    Field { line: usize, field: &'static str, value: String },
    #[error("line {line}: rows must come in (site 0, site 1) pairs with equal t")]
    Pairing { line: usize },
}

/// `%.12g`: 12 significant digits, trailing zeros dropped, exponent form
/// outside `[1e-4, 1e12)`.
pub fn fmt_num(x: f64) -> String {
    if x.is_nan() {
        return "nan".into();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf" } else { "-inf" }.into();
    }
    if x == 0.0 {
        return if x.is_sign_negative() { "-0" } else { "0" }.into();
    }
    let sci = format!("{:.*e}", SIG_DIGITS - 1, x);
    let (mantissa, exp) = sci.split_once('e').expect("exponent form");
    let exp: i32 = exp.parse().expect("integer exponent");
    if exp < -4 || exp >= SIG_DIGITS as i32 {
        let sign = if exp < 0 { '-' } else { '+' };
        format!("{}e{sign}{:02}", trim_zeros(mantissa), exp.abs())
    } else {
        let decimals = (SIG_DIGITS as i32 - 1 - exp) as usize;
        trim_zeros(&format!("{x:.decimals$}")).to_string()
    }
}

fn trim_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

/// One output field.
#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Num(f64),
    Int(u64),
    Text(String),
    Empty,
}

impl From<f64> for Cell {
    fn from(v: f64) -> Self {
        Cell::Num(v)
    }
}

impl From<u64> for Cell {
    fn from(v: u64) -> Self {
        Cell::Int(v)
    }
}

impl From<usize> for Cell {
    fn from(v: usize) -> Self {
        Cell::Int(v as u64)
    }
}

impl From<bool> for Cell {
    fn from(v: bool) -> Self {
        Cell::Int(v as u64)
    }
}

impl From<Site> for Cell {
    fn from(s: Site) -> Self {
        Cell::Int(s.index() as u64)
    }
}

impl From<Option<f64>> for Cell {
    fn from(v: Option<f64>) -> Self {
        v.map_or(Cell::Empty, Cell::Num)
    }
}

impl From<&str> for Cell {
    fn from(v: &str) -> Self {
        Cell::Text(v.to_string())
    }
}

/// In-memory CSV body with LF line endings.
#[derive(Debug, Clone)]
pub struct Csv {
    width: usize,
    buf: String,
}

impl Csv {
    pub fn new(header: &str) -> Self {
        Self {
            width: header.split(',').count(),
            buf: format!("{header}\n"),
        }
    }

    pub fn row<const K: usize>(&mut self, cells: [Cell; K]) {
        assert_eq!(K, self.width, "row width does not match header");
        for (i, c) in cells.into_iter().enumerate() {
            if i > 0 {
                self.buf.push(',');
            }
            match c {
                Cell::Num(v) => self.buf.push_str(&fmt_num(v)),
                Cell::Int(v) => self.buf.push_str(&v.to_string()),
                Cell::Text(s) => self.buf.push_str(&s),
                Cell::Empty => {}
            }
        }
        self.buf.push('\n');
    }

    pub fn into_bytes(self) -> Vec<u8> {
        self.buf.into_bytes()
    }

    pub fn as_str(&self) -> &str {
        &self.buf
    }
}

/// One row per (snapshot, site).
pub fn timeseries_csv(records: &[SnapshotRecord]) -> Csv {
    let mut csv = Csv::new(TIMESERIES_HEADER);
    for r in records {
        for site in Site::BOTH {
            let s = r.site(site);
            csv.row([
                r.t.into(),
                site.into(),
                s.particle_count.into(),
                s.mass_frac.into(),
                s.sigma_hat.into(),
                s.rho_hat.into(),
                s.max_mass.into(),
                s.gelled.into(),
            ]);
        }
    }
    csv
}

/// Inverse of [`timeseries_csv`].
pub fn parse_timeseries(text: &str) -> Result<Vec<SnapshotRecord>, CsvError> {
    let table = Table::parse(text)?;
    if table.header.join(",") != TIMESERIES_HEADER {
        return Err(CsvError::Header {
            found: table.header.join(","),
            expected: TIMESERIES_HEADER.into(),
        });
    }
    let mut out: Vec<SnapshotRecord> = Vec::with_capacity(table.rows.len() / 2);
    let mut pending: Option<(f64, SiteSnapshot)> = None;
    for (k, row) in table.rows.iter().enumerate() {
        let line = k + 2;
        let num = |i: usize, field: &'static str| -> Result<f64, CsvError> {
            row[i].parse().map_err(|_| CsvError::Field {
                line,
                field,
                value: row[i].clone(),
            })
        };
        let int = |i: usize, field: &'static str| -> Result<u64, CsvError> {
            row[i].parse().map_err(|_| CsvError::Field {
                line,
                field,
                value: row[i].clone(),
            })
        };
        let t = num(0, "t")?;
        let site = int(1, "site")?;
        let gelled = match row[7].as_str() {
            "0" => false,
            "1" => true,
            v => {
                return Err(CsvError::Field {
                    line,
                    field: "gelled",
                    value: v.into(),
                })
            }
        };
        let snap = SiteSnapshot {
            particle_count: int(2, "particle_count")?,
            mass_frac: num(3, "mass_frac")?,
            sigma_hat: num(4, "sigma_hat")?,
            rho_hat: num(5, "rho_hat")?,
            max_mass: int(6, "max_mass")?,
            gelled,
        };
        match (pending.take(), site) {
            (None, 0) => pending = Some((t, snap)),
            (Some((t0, first)), 1) if t0.to_bits() == t.to_bits() => out.push(SnapshotRecord {
                t,
                sites: [first, snap],
            }),
            _ => return Err(CsvError::Pairing { line }),
        }
    }
    if pending.is_some() {
        return Err(CsvError::Pairing {
            line: table.rows.len() + 1,
        });
    }
    Ok(out)
}

/// Header plus string rows of a comma-separated file.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn parse(text: &str) -> Result<Self, CsvError> {
        let mut lines = text.lines();
        let header: Vec<String> = match lines.next() {
            Some(h) if !h.trim().is_empty() => h.split(',').map(|s| s.trim().to_string()).collect(),
            _ => return Err(CsvError::Empty),
        };
        let mut rows = Vec::new();
        for (k, l) in lines.enumerate() {
            if l.is_empty() {
                continue;
            }
            let row: Vec<String> = l.split(',').map(|s| s.trim().to_string()).collect();
            if row.len() != header.len() {
                return Err(CsvError::Width {
                    line: k + 2,
                    expected: header.len(),
                    found: row.len(),
                });
            }
            rows.push(row);
        }
        Ok(Self { header, rows })
    }

    pub fn column(&self, name: &str) -> Option<usize> {
        self.header.iter().position(|h| h == name)
    }
}
