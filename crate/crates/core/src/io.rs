//! CSV ingestion and export. Missing entries are the literal token `NA`
//! (case-sensitive); every other cell must parse as a finite number. Lines
//! starting with `#` are comments.

use std::io::{Read, Write};
use std::path::Path;

use ndarray::{Array1, Array2, ArrayView1, ArrayView2};

use crate::error::{Error, Result};

pub const MISSING_TOKEN: &str = "NA";

/// Covariates (with `None` for missing cells) and an optional response.
#[derive(Debug, Clone)]
pub struct Dataset {
    pub names: Vec<String>,
    pub rows: Vec<Vec<Option<f64>>>,
    pub response: Option<Array1<f64>>,
}

fn csv_err(e: csv::Error) -> Error {
    Error::InvalidInput(format!("csv: {e}"))
}

fn open(path: &Path) -> Result<std::fs::File> {
    std::fs::File::open(path).map_err(|e| Error::InvalidInput(format!("cannot open {}: {e}", path.display())))
}

fn parse_cell(s: &str, row: usize, col: usize) -> Result<Option<f64>> {
    let t = s.trim();
    if t == MISSING_TOKEN {
        return Ok(None);
    }
    match t.parse::<f64>() {
        Ok(v) if v.is_finite() => Ok(Some(v)),
        _ => Err(Error::InvalidInput(format!("row {row}, column {col}: cannot parse {s:?}"))),
    }
}

/// Reads a headed table; `response` names the column split off as `y`,
/// which must be fully observed.
pub fn read_dataset<R: Read>(reader: R, response: Option<&str>) -> Result<Dataset> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).comment(Some(b'#')).from_reader(reader);
    let header: Vec<String> = rdr.headers().map_err(csv_err)?.iter().map(|s| s.trim().to_string()).collect();
    let target = match response {
        Some(name) => Some(
            header
                .iter()
                .position(|h| h == name)
                .ok_or_else(|| Error::InvalidInput(format!("response column {name:?} not in header")))?,
        ),
        None => None,
    };
    let mut rows = Vec::new();
    let mut y = Vec::new();
    for (r, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(csv_err)?;
        let mut row = Vec::with_capacity(header.len());
        for (c, cell) in rec.iter().enumerate() {
            let v = parse_cell(cell, r + 1, c + 1)?;
            if Some(c) == target {
                y.push(v.ok_or_else(|| Error::InvalidInput(format!("response missing in row {}", r + 1)))?);
            } else {
                row.push(v);
            }
        }
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(Error::InvalidInput("no data rows".into()));
    }
    let names = header
        .iter()
        .enumerate()
        .filter(|(c, _)| Some(*c) != target)
        .map(|(_, h)| h.clone())
        .collect();
    Ok(Dataset {
        names,
        rows,
        response: target.map(|_| Array1::from(y)),
    })
}

pub fn read_dataset_path(path: &Path, response: Option<&str>) -> Result<Dataset> {
    read_dataset(open(path)?, response)
}

/// Numeric records; a first record that does not parse is taken as a header.
fn numeric_records<R: Read>(reader: R) -> Result<Vec<Vec<f64>>> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(false).flexible(true).comment(Some(b'#')).from_reader(reader);
    let mut out = Vec::new();
    for (r, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(csv_err)?;
        let parsed: std::result::Result<Vec<f64>, _> = rec.iter().map(|s| s.trim().parse::<f64>()).collect();
        match parsed {
            Ok(v) => {
                if v.iter().any(|x| !x.is_finite()) {
                    return Err(Error::InvalidInput(format!("row {} has non-finite values", r + 1)));
                }
                out.push(v)
            }
            Err(_) if r == 0 => continue,
            Err(_) => return Err(Error::InvalidInput(format!("row {} is not numeric", r + 1))),
        }
    }
    Ok(out)
}

/// One line of observation rates.
pub fn read_rates<R: Read>(reader: R) -> Result<Vec<f64>> {
    let recs = numeric_records(reader)?;
    match recs.as_slice() {
        [one] => Ok(one.clone()),
        _ => Err(Error::InvalidInput(format!("rates file must hold one numeric line, found {}", recs.len()))),
    }
}

pub fn read_rates_path(path: &Path) -> Result<Vec<f64>> {
    read_rates(open(path)?)
}

/// A dense numeric matrix, optionally headed.
pub fn read_matrix<R: Read>(reader: R) -> Result<Array2<f64>> {
    let recs = numeric_records(reader)?;
    let ncol = recs.first().map(|r| r.len()).unwrap_or(0);
    if recs.is_empty() || ncol == 0 {
        return Err(Error::InvalidInput("matrix file is empty".into()));
    }
    if let Some((r, _)) = recs.iter().enumerate().find(|(_, r)| r.len() != ncol) {
        return Err(Error::InvalidInput(format!("matrix row {} has a different length", r + 1)));
    }
    let flat: Vec<f64> = recs.into_iter().flatten().collect();
    Array2::from_shape_vec((flat.len() / ncol, ncol), flat).map_err(|e| Error::InvalidInput(e.to_string()))
}

pub fn read_matrix_path(path: &Path) -> Result<Array2<f64>> {
    read_matrix(open(path)?)
}

fn io_err(e: std::io::Error) -> Error {
    Error::InvalidInput(format!("write failed: {e}"))
}

/// Writes `m` with the given header (omitted when empty). Values use the
/// shortest representation that round-trips.
pub fn write_matrix<W: Write>(w: W, header: &[String], m: ArrayView2<f64>) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(w);
    if !header.is_empty() {
        wtr.write_record(header).map_err(csv_err)?;
    }
    for row in m.rows() {
        wtr.write_record(row.iter().map(|v| format!("{v:?}"))).map_err(csv_err)?;
    }
    wtr.flush().map_err(io_err)
}

/// Writes `name,value` rows.
pub fn write_named_vector<W: Write>(w: W, names: &[String], v: ArrayView1<f64>) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(w);
    wtr.write_record(["name", "value"]).map_err(csv_err)?;
    for (n, x) in names.iter().zip(v.iter()) {
        wtr.write_record([n.clone(), format!("{x:?}")]).map_err(csv_err)?;
    }
    wtr.flush().map_err(io_err)
}

/// Reads what [`write_named_vector`] wrote.
pub fn read_named_vector<R: Read>(reader: R) -> Result<(Vec<String>, Array1<f64>)> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).comment(Some(b'#')).from_reader(reader);
    let mut names = Vec::new();
    let mut vals = Vec::new();
    for (r, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(csv_err)?;
        if rec.len() != 2 {
            return Err(Error::InvalidInput(format!("row {} must have two fields", r + 1)));
        }
        names.push(rec[0].to_string());
        vals.push(
            parse_cell(&rec[1], r + 1, 2)?
                .ok_or_else(|| Error::InvalidInput(format!("row {} value is missing", r + 1)))?,
        );
    }
    Ok((names, Array1::from(vals)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn dataset_with_na_and_response() {
        let text = "a,y,b\n1.5,2,NA\nNA,-1,3e-1\n";
        let d = read_dataset(text.as_bytes(), Some("y")).unwrap();
        assert_eq!(d.names, vec!["a", "b"]);
        assert_eq!(d.rows, vec![vec![Some(1.5), None], vec![None, Some(0.3)]]);
        assert_eq!(d.response.unwrap(), array![2.0, -1.0]);
    }

    #[test]
    fn bad_cells_are_rejected() {
        assert!(read_dataset("a,y\nna,1\n".as_bytes(), Some("y")).is_err());
        assert!(read_dataset("a,y\n1,NA\n".as_bytes(), Some("y")).is_err());
        assert!(read_dataset("a,y\n1,2\n".as_bytes(), Some("z")).is_err());
    }

    #[test]
    fn rates_and_matrices() {
        assert_eq!(read_rates("0.5,0.9\n".as_bytes()).unwrap(), vec![0.5, 0.9]);
        assert_eq!(read_rates("a,b\n0.5,0.9\n".as_bytes()).unwrap(), vec![0.5, 0.9]);
        assert!(read_rates("0.5\n0.9\n".as_bytes()).is_err());
        let m = read_matrix("1,0\n0,2\n".as_bytes()).unwrap();
        assert_eq!(m, array![[1.0, 0.0], [0.0, 2.0]]);
    }

    #[test]
    fn named_vector_round_trip() {
        let v = array![0.1, -1.0 / 3.0, 1e-300];
        let names: Vec<String> = ["a", "b", "c"].iter().map(|s| s.to_string()).collect();
        let mut buf = Vec::new();
        write_named_vector(&mut buf, &names, v.view()).unwrap();
        let (n2, v2) = read_named_vector(buf.as_slice()).unwrap();
        assert_eq!(n2, names);
        assert_eq!(v2, v);
    }
}
