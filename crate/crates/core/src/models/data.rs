use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Repeated observations with covariates for one subject.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Subject {
    pub y: Vec<f64>,
    /// Row-major `len(y) x p` covariates; the first column is the intercept.
    pub x: Vec<f64>,
}

impl Subject {
    pub fn len(&self) -> usize {
        self.y.len()
    }

    pub fn is_empty(&self) -> bool {
        self.y.is_empty()
    }

    pub fn row<'a>(&'a self, t: usize, p: usize) -> &'a [f64] {
        &self.x[t * p..(t + 1) * p]
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PanelData {
    pub p: usize,
    pub subjects: Vec<Subject>,
}

/// Observed data for any supported model.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "layout", rename_all = "snake_case")]
pub enum Dataset {
    /// Long-format panel: one row per observation.
    Panel(PanelData),
    /// One observation per time point.
    Series { y: Vec<f64> },
}

/// Decimal rendering with 17 significant digits.
pub fn fmt_f64(v: f64) -> String {
    if v.is_finite() {
        format!("{v:.16e}")
    } else if v.is_nan() {
        "nan".into()
    } else if v > 0.0 {
        "inf".into()
    } else {
        "-inf".into()
    }
}

impl Dataset {
    pub fn n_latents(&self) -> usize {
        match self {
            Dataset::Panel(p) => p.subjects.len(),
            Dataset::Series { y } => y.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.n_latents() == 0
    }

    /// Write as CSV with a header row.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path).map_err(|e| csv_io(path, e))?;
        match self {
            Dataset::Panel(panel) => {
                let mut header = vec!["subject_id".to_string(), "time".into(), "y".into()];
                header.extend((1..=panel.p).map(|j| format!("x_{j}")));
                w.write_record(&header).map_err(|e| csv_io(path, e))?;
                for (i, s) in panel.subjects.iter().enumerate() {
                    for t in 0..s.len() {
                        let mut rec = vec![i.to_string(), t.to_string(), fmt_f64(s.y[t])];
                        rec.extend(s.row(t, panel.p).iter().map(|&v| fmt_f64(v)));
                        w.write_record(&rec).map_err(|e| csv_io(path, e))?;
                    }
                }
            }
            Dataset::Series { y } => {
                w.write_record(["y"]).map_err(|e| csv_io(path, e))?;
                for v in y {
                    w.write_record([fmt_f64(*v)]).map_err(|e| csv_io(path, e))?;
                }
            }
        }
        w.flush().map_err(|e| Error::io(path, e))
    }

    /// Read a CSV produced by [`Dataset::write_csv`] or by hand.
    ///
    /// Panels need columns `subject_id,time,y,x_1..x_p` with zero-based
    /// subject ids; series need a `y` column. Errors report 1-based file rows.
    pub fn read_csv(path: &Path) -> Result<Self> {
        let mut r = csv::ReaderBuilder::new()
            .has_headers(true)
            .trim(csv::Trim::All)
            .from_path(path)
            .map_err(|e| csv_io(path, e))?;
        let header: Vec<String> = r
            .headers()
            .map_err(|e| Error::Data {
                row: 1,
                message: e.to_string(),
            })?
            .iter()
            .map(str::to_string)
            .collect();
        let panel = header.first().map(String::as_str) == Some("subject_id");
        if panel {
            if header.len() < 3 || header[1] != "time" || header[2] != "y" {
                return Err(Error::Data {
                    row: 1,
                    message: "panel header must start with subject_id,time,y".into(),
                });
            }
            let p = header.len() - 3;
            let mut subjects: Vec<Subject> = Vec::new();
            for (k, rec) in r.records().enumerate() {
                let row = k + 2;
                let rec = rec.map_err(|e| Error::Data {
                    row,
                    message: e.to_string(),
                })?;
                if rec.len() != header.len() {
                    return Err(Error::Data {
                        row,
                        message: format!("expected {} fields, found {}", header.len(), rec.len()),
                    });
                }
                let id: usize = rec[0].parse().map_err(|_| Error::Data {
                    row,
                    message: format!("subject id {:?} is not a non-negative integer", &rec[0]),
                })?;
                let y = parse_num(&rec[2], row)?;
                if subjects.len() <= id {
                    subjects.resize_with(id + 1, Subject::default);
                }
                let s = &mut subjects[id];
                s.y.push(y);
                for j in 0..p {
                    s.x.push(parse_num(&rec[3 + j], row)?);
                }
            }
            Ok(Dataset::Panel(PanelData { p, subjects }))
        } else {
            let col = header.iter().position(|h| h == "y").ok_or(Error::Data {
                row: 1,
                message: "missing y column".into(),
            })?;
            let mut y = Vec::new();
            for (k, rec) in r.records().enumerate() {
                let row = k + 2;
                let rec = rec.map_err(|e| Error::Data {
                    row,
                    message: e.to_string(),
                })?;
                let field = rec.get(col).ok_or(Error::Data {
                    row,
                    message: "missing y field".into(),
                })?;
                y.push(parse_num(field, row)?);
            }
            Ok(Dataset::Series { y })
        }
    }
}

fn parse_num(s: &str, row: usize) -> Result<f64> {
    let v: f64 = s.parse().map_err(|_| Error::Data {
        row,
        message: format!("{s:?} is not a number"),
    })?;
    if v.is_finite() {
        Ok(v)
    } else {
        Err(Error::Data {
            row,
            message: format!("non-finite value {s:?}"),
        })
    }
}

fn csv_io(path: &Path, e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::io(path, io),
        other => Error::Format(format!("{}: {other:?}", path.display())),
    }
}
