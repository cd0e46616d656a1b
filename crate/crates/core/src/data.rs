//! Date-indexed multivariate series: CSV ingestion and output.
//!
//! Input is a header row, one date column and any number of named numeric
//! columns. Dates are period labels (`1990Q1`, `1990-03`, `1990`, or plain
//! integers); all rows must use one format and be equally spaced once sorted.
//! Empty cells are read as missing (`NaN`).

use std::collections::BTreeMap;
use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{BpsError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum LabelFormat {
    Quarterly,
    Monthly,
    Annual,
    Index,
}

fn parse_label(label: &str) -> Option<(LabelFormat, i64)> {
    let s = label.trim();
    if let Some((y, q)) = s.split_once(['Q', 'q']) {
        let y: i64 = y.trim_end_matches(['/', '-', ' ']).parse().ok()?;
        let q: i64 = q.parse().ok()?;
        return (1..=4).contains(&q).then_some((LabelFormat::Quarterly, y * 4 + q - 1));
    }
    if let Some((y, m)) = s.split_once('-') {
        if y.len() == 4 {
            let y: i64 = y.parse().ok()?;
            let m: i64 = m.parse().ok()?;
            return (1..=12).contains(&m).then_some((LabelFormat::Monthly, y * 12 + m - 1));
        }
    }
    let v: i64 = s.parse().ok()?;
    if s.len() == 4 && !s.starts_with('-') {
        Some((LabelFormat::Annual, v))
    } else {
        Some((LabelFormat::Index, v))
    }
}

/// Column selection for ingestion.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ColumnMapping {
    /// Name of the date column in the file.
    #[serde(default = "default_date_column")]
    pub date: String,
    /// Internal series name -> file column. Empty selects every non-date column
    /// under its own name.
    #[serde(default)]
    pub series: BTreeMap<String, String>,
}

fn default_date_column() -> String {
    "date".into()
}

impl ColumnMapping {
    pub fn all(date: impl Into<String>) -> Self {
        ColumnMapping {
            date: date.into(),
            series: BTreeMap::new(),
        }
    }
}

/// Rows sorted by strictly increasing, equally spaced dates.
#[derive(Debug, Clone, PartialEq)]
pub struct SeriesTable {
    dates: Vec<String>,
    names: Vec<String>,
    columns: Vec<Vec<f64>>,
}

impl SeriesTable {
    /// Builds a table, sorting rows by date and validating the labels.
    pub fn new(dates: Vec<String>, names: Vec<String>, columns: Vec<Vec<f64>>) -> Result<Self> {
        if names.len() != columns.len() {
            return Err(BpsError::Data(format!(
                "{} series names for {} columns",
                names.len(),
                columns.len()
            )));
        }
        if let Some(c) = columns.iter().find(|c| c.len() != dates.len()) {
            return Err(BpsError::Data(format!(
                "column length {} differs from {} dates",
                c.len(),
                dates.len()
            )));
        }
        for (i, n) in names.iter().enumerate() {
            if names[..i].contains(n) {
                return Err(BpsError::Data(format!("duplicate series name '{n}'")));
            }
        }
        let mut keyed = Vec::with_capacity(dates.len());
        let mut format = None;
        for (row, d) in dates.iter().enumerate() {
            let (fmt, ord) = parse_label(d)
                .ok_or_else(|| BpsError::Data(format!("unparseable date '{d}' in row {}", row + 1)))?;
            match format {
                None => format = Some(fmt),
                Some(f) if f != fmt => {
                    return Err(BpsError::Data(format!("date '{d}' uses a different label format")))
                }
                _ => {}
            }
            keyed.push((ord, row));
        }
        keyed.sort_by_key(|&(ord, _)| ord);
        for w in keyed.windows(2) {
            if w[0].0 == w[1].0 {
                return Err(BpsError::Data(format!("duplicate date '{}'", dates[w[1].1])));
            }
        }
        if keyed.len() > 2 {
            let step = keyed[1].0 - keyed[0].0;
            if let Some(w) = keyed.windows(2).find(|w| w[1].0 - w[0].0 != step) {
                return Err(BpsError::Data(format!(
                    "dates are not equally spaced around '{}'",
                    dates[w[1].1]
                )));
            }
        }
        let order: Vec<usize> = keyed.iter().map(|&(_, r)| r).collect();
        Ok(SeriesTable {
            dates: order.iter().map(|&r| dates[r].clone()).collect(),
            names,
            columns: columns
                .into_iter()
                .map(|c| order.iter().map(|&r| c[r]).collect())
                .collect(),
        })
    }

    pub fn len(&self) -> usize {
        self.dates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.dates.is_empty()
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn dates(&self) -> &[String] {
        &self.dates
    }

    pub fn date(&self, row: usize) -> &str {
        &self.dates[row]
    }

    pub fn row_of(&self, label: &str) -> Option<usize> {
        let key = parse_label(label)?;
        self.dates.iter().position(|d| parse_label(d) == Some(key))
    }

    pub fn column(&self, name: &str) -> Option<&[f64]> {
        self.names
            .iter()
            .position(|n| n == name)
            .map(|i| self.columns[i].as_slice())
    }

    pub fn column_mut(&mut self, name: &str) -> Option<&mut [f64]> {
        self.names
            .iter()
            .position(|n| n == name)
            .map(|i| self.columns[i].as_mut_slice())
    }

    /// Reads CSV from any reader.
    pub fn from_csv_reader<R: Read>(reader: R, mapping: &ColumnMapping) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
        let headers = rdr.headers()?.clone();
        let find = |col: &str| {
            headers
                .iter()
                .position(|h| h == col)
                .ok_or_else(|| BpsError::Data(format!("missing column '{col}'")))
        };
        let date_idx = find(&mapping.date)?;
        let selected: Vec<(String, usize)> = if mapping.series.is_empty() {
            headers
                .iter()
                .enumerate()
                .filter(|&(i, _)| i != date_idx)
                .map(|(i, h)| (h.to_string(), i))
                .collect()
        } else {
            mapping
                .series
                .iter()
                .map(|(name, col)| Ok((name.clone(), find(col)?)))
                .collect::<Result<_>>()?
        };
        let mut dates = Vec::new();
        let mut columns = vec![Vec::new(); selected.len()];
        for (row, rec) in rdr.records().enumerate() {
            let rec = rec?;
            dates.push(rec.get(date_idx).unwrap_or("").to_string());
            for (k, (name, idx)) in selected.iter().enumerate() {
                let cell = rec.get(*idx).unwrap_or("");
                let v = if cell.is_empty() || cell.eq_ignore_ascii_case("na") || cell.eq_ignore_ascii_case("nan") {
                    f64::NAN
                } else {
                    cell.parse::<f64>().map_err(|_| {
                        BpsError::Data(format!(
                            "unparseable value '{cell}' for '{name}' in data row {}",
                            row + 1
                        ))
                    })?
                };
                columns[k].push(v);
            }
        }
        let names = selected.into_iter().map(|(n, _)| n).collect();
        SeriesTable::new(dates, names, columns)
    }

    pub fn write_csv<W: Write>(&self, writer: W, date_header: &str) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        let mut header = vec![date_header.to_string()];
        header.extend(self.names.iter().cloned());
        w.write_record(&header)?;
        for row in 0..self.len() {
            let mut rec = vec![self.dates[row].clone()];
            rec.extend(self.columns.iter().map(|c| {
                if c[row].is_nan() {
                    String::new()
                } else {
                    c[row].to_string()
                }
            }));
            w.write_record(&rec)?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Reads a date-indexed CSV file.
pub fn ingest(path: impl AsRef<Path>, mapping: &ColumnMapping) -> Result<SeriesTable> {
    let path = path.as_ref();
    let file = std::fs::File::open(path)
        .map_err(|e| BpsError::Data(format!("cannot open {}: {e}", path.display())))?;
    SeriesTable::from_csv_reader(file, mapping)
}

/// Quarterly labels `start, start+1, ...` such as `1961Q1`.
pub fn quarterly_labels(start_year: i64, start_quarter: i64, count: usize) -> Vec<String> {
    let base = start_year * 4 + start_quarter - 1;
    (0..count as i64)
        .map(|i| {
            let o = base + i;
            format!("{}Q{}", o.div_euclid(4), o.rem_euclid(4) + 1)
        })
        .collect()
}
