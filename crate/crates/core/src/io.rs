//! Comma-separated dataset files with a mandatory header row.

use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use ndarray::{Array2, ArrayView2};

use crate::error::{Result, VdaError};

/// Which column holds the class labels.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub enum LabelColumn {
    #[default]
    Last,
    Named(String),
    /// Every column is a feature.
    None,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub x: Array2<f64>,
    pub labels: Option<Vec<String>>,
    pub column_names: Vec<String>,
}

impl Dataset {
    pub fn n(&self) -> usize {
        self.x.nrows()
    }

    pub fn p(&self) -> usize {
        self.x.ncols()
    }

    pub fn labels(&self) -> Result<&[String]> {
        self.labels
            .as_deref()
            .ok_or_else(|| VdaError::data("dataset has no label column"))
    }
}

pub fn read_csv(path: impl AsRef<Path>, label: &LabelColumn) -> Result<Dataset> {
    let path = path.as_ref();
    let file = File::open(path)
        .map_err(|e| VdaError::data(format!("cannot open {}: {e}", path.display())))?;
    read_csv_from(file, label)
}

pub fn read_csv_from<R: Read>(reader: R, label: &LabelColumn) -> Result<Dataset> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
    let header: Vec<String> = rdr.headers()?.iter().map(|h| h.trim().to_string()).collect();
    if header.is_empty() || (header.len() == 1 && header[0].is_empty()) {
        return Err(VdaError::data("missing header row"));
    }
    let label_idx = match label {
        LabelColumn::Last => {
            if header.len() < 2 {
                return Err(VdaError::data("need at least one feature column and a label column"));
            }
            Some(header.len() - 1)
        }
        LabelColumn::Named(name) => Some(
            header
                .iter()
                .position(|h| h == name)
                .ok_or_else(|| VdaError::data(format!("no column named '{name}'")))?,
        ),
        LabelColumn::None => None,
    };
    let feature_idx: Vec<usize> = (0..header.len()).filter(|&c| Some(c) != label_idx).collect();
    let mut values = Vec::new();
    let mut labels = Vec::new();
    let mut n = 0;
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let row = i + 2;
        for &c in &feature_idx {
            let cell = rec[c].trim();
            let v: f64 = cell.parse().map_err(|_| VdaError::Parse {
                row,
                column: header[c].clone(),
                message: format!("'{cell}' is not a number"),
            })?;
            if !v.is_finite() {
                return Err(VdaError::Parse {
                    row,
                    column: header[c].clone(),
                    message: format!("'{cell}' is not finite"),
                });
            }
            values.push(v);
        }
        if let Some(l) = label_idx {
            let cell = rec[l].trim();
            if cell.is_empty() || cell == "NA" {
                return Err(VdaError::Parse {
                    row,
                    column: header[l].clone(),
                    message: "missing label".into(),
                });
            }
            labels.push(cell.to_string());
        }
        n += 1;
    }
    if n == 0 {
        return Err(VdaError::data("no data rows"));
    }
    let x = Array2::from_shape_vec((n, feature_idx.len()), values)
        .map_err(|e| VdaError::data(e.to_string()))?;
    Ok(Dataset {
        x,
        labels: label_idx.map(|_| labels),
        column_names: feature_idx.iter().map(|&c| header[c].clone()).collect(),
    })
}

/// Write features and optional labels; column names default to `x1..xp`
/// with a trailing `label` column.
pub fn write_csv<W: Write>(
    writer: W,
    x: ArrayView2<'_, f64>,
    labels: Option<&[String]>,
    column_names: Option<&[String]>,
) -> Result<()> {
    if let Some(l) = labels {
        if l.len() != x.nrows() {
            return Err(VdaError::arg("labels and rows disagree in length"));
        }
    }
    let mut header: Vec<String> = match column_names {
        Some(c) if c.len() == x.ncols() => c.to_vec(),
        Some(_) => return Err(VdaError::arg("column names and columns disagree in length")),
        None => (1..=x.ncols()).map(|j| format!("x{j}")).collect(),
    };
    if labels.is_some() {
        header.push("label".into());
    }
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(&header)?;
    let mut rec: Vec<String> = Vec::with_capacity(header.len());
    for (i, row) in x.rows().into_iter().enumerate() {
        rec.clear();
        rec.extend(row.iter().map(|v| v.to_string()));
        if let Some(l) = labels {
            rec.push(l[i].clone());
        }
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_csv_file(
    path: impl AsRef<Path>,
    x: ArrayView2<'_, f64>,
    labels: Option<&[String]>,
    column_names: Option<&[String]>,
) -> Result<()> {
    write_csv(File::create(path)?, x, labels, column_names)
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn reads_small_file() {
        let d = read_csv_from("a,b,y\n1,2,c1\n3,4.5,c2\n-1,0,c1\n".as_bytes(), &LabelColumn::Last)
            .unwrap();
        assert_eq!((d.n(), d.p()), (3, 2));
        assert_eq!(d.x, array![[1.0, 2.0], [3.0, 4.5], [-1.0, 0.0]]);
        assert_eq!(d.labels().unwrap(), ["c1", "c2", "c1"]);
        assert_eq!(d.column_names, ["a", "b"]);
    }

    #[test]
    fn named_label_column() {
        let d = read_csv_from("y,a\nu,1\nv,2\n".as_bytes(), &LabelColumn::Named("y".into())).unwrap();
        assert_eq!(d.x, array![[1.0], [2.0]]);
        assert_eq!(d.labels().unwrap(), ["u", "v"]);
        assert!(read_csv_from("y,a\nu,1\n".as_bytes(), &LabelColumn::Named("z".into())).is_err());
    }

    #[test]
    fn unlabeled() {
        let d = read_csv_from("a,b\n1,2\n".as_bytes(), &LabelColumn::None).unwrap();
        assert_eq!(d.p(), 2);
        assert!(d.labels().is_err());
    }

    #[test]
    fn na_cell_is_located() {
        let err = read_csv_from("a,b,y\n1,2,c\n3,NA,c\n".as_bytes(), &LabelColumn::Last).unwrap_err();
        match err {
            VdaError::Parse { row, column, .. } => {
                assert_eq!(row, 3);
                assert_eq!(column, "b");
            }
            e => panic!("unexpected {e}"),
        }
        let err = read_csv_from("a,y\n1,\n".as_bytes(), &LabelColumn::Last).unwrap_err();
        assert!(matches!(err, VdaError::Parse { row: 2, .. }));
        assert!(read_csv_from("a,y\ninf,c\n".as_bytes(), &LabelColumn::Last).is_err());
        assert!(read_csv_from("a,y\n".as_bytes(), &LabelColumn::Last).is_err());
        assert!(read_csv_from("a,y\n1,c,3\n".as_bytes(), &LabelColumn::Last).is_err());
    }

    #[test]
    fn round_trip_is_exact() {
        let x = array![[0.1 + 0.2, -1e-300], [std::f64::consts::PI, 12345.678901234567]];
        let labels = vec!["1".to_string(), "two".to_string()];
        let mut buf = Vec::new();
        write_csv(&mut buf, x.view(), Some(&labels), None).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("x1,x2,label\n"));
        let d = read_csv_from(buf.as_slice(), &LabelColumn::Last).unwrap();
        for (a, b) in d.x.iter().zip(x.iter()) {
            assert_eq!(a.to_bits(), b.to_bits());
        }
        assert_eq!(d.labels().unwrap(), labels.as_slice());
    }
}
