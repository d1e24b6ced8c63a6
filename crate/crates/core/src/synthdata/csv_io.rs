use std::path::Path;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::objective::SampleSet;

fn csv_err(e: csv::Error) -> Error {
    let line = e.position().map_or(0, |p| p.line());
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::Io(io),
        other => Error::Parse {
            line,
            message: format!("{other:?}"),
        },
    }
}

/// 17 significant digits, enough to round-trip any `f64`.
fn fmt(v: f64) -> String {
    format!("{v:.16e}")
}

/// Header `x_1,…,x_D,y[,z]`, one sample per row.
pub fn write_csv(data: &SampleSet, path: impl AsRef<Path>) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(csv_err)?;
    let mut header: Vec<String> = (1..=data.dim()).map(|j| format!("x_{j}")).collect();
    header.push("y".to_owned());
    if data.z().is_some() {
        header.push("z".to_owned());
    }
    w.write_record(&header).map_err(csv_err)?;
    for i in 0..data.len() {
        let mut record: Vec<String> = data.x().row(i).iter().map(|v| fmt(*v)).collect();
        record.push(fmt(data.y()[i]));
        if let Some(z) = data.z() {
            record.push(fmt(z[i]));
        }
        w.write_record(&record).map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_csv(path: impl AsRef<Path>) -> Result<SampleSet> {
    let mut r = csv::Reader::from_path(path).map_err(csv_err)?;
    let header: Vec<String> = r.headers().map_err(csv_err)?.iter().map(str::to_owned).collect();
    let n_x = header.iter().take_while(|h| h.starts_with("x_")).count();
    for (j, h) in header[..n_x].iter().enumerate() {
        if *h != format!("x_{}", j + 1) {
            return Err(Error::Parse {
                line: 1,
                message: format!("expected column x_{}, found {h:?}", j + 1),
            });
        }
    }
    let rest: Vec<&str> = header[n_x..].iter().map(String::as_str).collect();
    let has_z = match rest.as_slice() {
        ["y"] => false,
        ["y", "z"] => true,
        _ => {
            return Err(Error::Parse {
                line: 1,
                message: format!("expected columns x_1..x_D,y[,z], found {header:?}"),
            })
        }
    };
    if n_x == 0 {
        return Err(Error::Parse {
            line: 1,
            message: "no input columns".to_owned(),
        });
    }

    let mut xs = Vec::new();
    let mut ys = Vec::new();
    let mut zs = Vec::new();
    for record in r.records() {
        let record = record.map_err(csv_err)?;
        let line = record.position().map_or(0, |p| p.line());
        let parse = |s: &str| {
            s.trim().parse::<f64>().map_err(|e| Error::Parse {
                line,
                message: format!("{s:?}: {e}"),
            })
        };
        for j in 0..n_x {
            xs.push(parse(&record[j])?);
        }
        ys.push(parse(&record[n_x])?);
        if has_z {
            zs.push(parse(&record[n_x + 1])?);
        }
    }
    let m = ys.len();
    if m == 0 {
        return Err(Error::Parse {
            line: 2,
            message: "no data rows".to_owned(),
        });
    }
    let x = DMatrix::from_row_slice(m, n_x, &xs);
    let z = has_z.then(|| DVector::from_vec(zs));
    SampleSet::new(x, DVector::from_vec(ys), z)
}
