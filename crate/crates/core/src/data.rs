//! Observation triples `(X, Y, Z)` and CSV ingestion.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// `n` observations of `X` (n × d_X), `Y` (n) and `Z` (n × d_Z).
///
/// All entries are finite and `d_X ≥ 1`. `d_Z = 0` is representable but the
/// conditional tests reject it.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    x: DMatrix<f64>,
    y: DVector<f64>,
    z: DMatrix<f64>,
}

impl Dataset {
    pub fn new(x: DMatrix<f64>, y: DVector<f64>, z: DMatrix<f64>) -> Result<Self> {
        let n = y.len();
        if n == 0 {
            return Err(Error::invalid("dataset has no rows"));
        }
        if x.nrows() != n || z.nrows() != n {
            return Err(Error::invalid(format!(
                "row counts differ: x has {}, y has {}, z has {}",
                x.nrows(),
                n,
                z.nrows()
            )));
        }
        if x.ncols() == 0 {
            return Err(Error::invalid("x must have at least one column"));
        }
        for (name, values) in [("x", x.as_slice()), ("y", y.as_slice()), ("z", z.as_slice())] {
            if values.iter().any(|v| !v.is_finite()) {
                return Err(Error::invalid(format!("{name} contains non-finite entries")));
            }
        }
        Ok(Dataset { x, y, z })
    }

    /// Builds a dataset from row-major slices.
    pub fn from_rows(x: &[f64], dx: usize, y: &[f64], z: &[f64], dz: usize) -> Result<Self> {
        let n = y.len();
        if x.len() != n * dx || z.len() != n * dz {
            return Err(Error::invalid("slice lengths do not match n × d"));
        }
        Dataset::new(
            DMatrix::from_row_slice(n, dx, x),
            DVector::from_column_slice(y),
            DMatrix::from_row_slice(n, dz, z),
        )
    }

    pub fn n(&self) -> usize {
        self.y.len()
    }

    pub fn dx(&self) -> usize {
        self.x.ncols()
    }

    pub fn dz(&self) -> usize {
        self.z.ncols()
    }

    pub fn x(&self) -> &DMatrix<f64> {
        &self.x
    }

    pub fn y(&self) -> &DVector<f64> {
        &self.y
    }

    pub fn z(&self) -> &DMatrix<f64> {
        &self.z
    }

    /// `[X | Z]`, the design for regressions on `(X, Z)`.
    pub fn xz(&self) -> DMatrix<f64> {
        hstack(&self.x, &self.z)
    }

    /// Rows selected by `idx`, in the given order.
    pub fn subset(&self, idx: &[usize]) -> Dataset {
        Dataset {
            x: self.x.select_rows(idx),
            y: self.y.select_rows(idx),
            z: self.z.select_rows(idx),
        }
    }

    /// Copy with `Y` replaced. Fails if the new response has the wrong length.
    pub fn with_y(&self, y: DVector<f64>) -> Result<Dataset> {
        Dataset::new(self.x.clone(), y, self.z.clone())
    }
}

pub(crate) fn hstack(a: &DMatrix<f64>, b: &DMatrix<f64>) -> DMatrix<f64> {
    let n = a.nrows();
    let mut out = DMatrix::zeros(n, a.ncols() + b.ncols());
    out.columns_mut(0, a.ncols()).copy_from(a);
    out.columns_mut(a.ncols(), b.ncols()).copy_from(b);
    out
}

/// Which CSV columns hold X, Y and Z, e.g. `x=x1,x2;y=y;z=z1..z7`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ColumnSchema {
    pub x: Vec<String>,
    pub y: String,
    pub z: Vec<String>,
}

impl ColumnSchema {
    pub fn parse(spec: &str) -> Result<Self> {
        let mut x = None;
        let mut y = None;
        let mut z = None;
        for part in spec.split(';').map(str::trim).filter(|p| !p.is_empty()) {
            let (key, value) = part
                .split_once('=')
                .ok_or_else(|| Error::Schema(format!("expected `key=columns`, got `{part}`")))?;
            let names = expand_names(value)?;
            let slot = match key.trim() {
                "x" => &mut x,
                "y" => &mut y,
                "z" => &mut z,
                other => return Err(Error::Schema(format!("unknown role `{other}`"))),
            };
            if slot.is_some() {
                return Err(Error::Schema(format!("role `{}` given twice", key.trim())));
            }
            *slot = Some(names);
        }
        let x = x.ok_or_else(|| Error::Schema("missing `x=` columns".into()))?;
        if x.is_empty() {
            return Err(Error::Schema("x needs at least one column".into()));
        }
        let y = y.ok_or_else(|| Error::Schema("missing `y=` column".into()))?;
        if y.len() != 1 {
            return Err(Error::Schema(format!("y takes exactly one column, got {}", y.len())));
        }
        Ok(ColumnSchema {
            x,
            y: y.into_iter().next().unwrap(),
            z: z.unwrap_or_default(),
        })
    }

    /// Default names `x1..x{dx}`, `y`, `z1..z{dz}`.
    pub fn default_for(dx: usize, dz: usize) -> Self {
        ColumnSchema {
            x: (1..=dx).map(|i| format!("x{i}")).collect(),
            y: "y".to_string(),
            z: (1..=dz).map(|i| format!("z{i}")).collect(),
        }
    }
}

impl std::fmt::Display for ColumnSchema {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "x={};y={};z={}", self.x.join(","), self.y, self.z.join(","))
    }
}

/// Expands `a,b,z1..z3` into `[a, b, z1, z2, z3]`.
fn expand_names(value: &str) -> Result<Vec<String>> {
    let mut out = Vec::new();
    for token in value.split(',').map(str::trim).filter(|t| !t.is_empty()) {
        match token.split_once("..") {
            None => out.push(token.to_string()),
            Some((lo, hi)) => {
                let (prefix_lo, start) = split_numeric_suffix(lo)
                    .ok_or_else(|| Error::Schema(format!("bad range start `{lo}`")))?;
                let (prefix_hi, end) = split_numeric_suffix(hi)
                    .ok_or_else(|| Error::Schema(format!("bad range end `{hi}`")))?;
                if !(prefix_hi.is_empty() || prefix_hi == prefix_lo) || end < start {
                    return Err(Error::Schema(format!("bad column range `{token}`")));
                }
                out.extend((start..=end).map(|i| format!("{prefix_lo}{i}")));
            }
        }
    }
    Ok(out)
}

fn split_numeric_suffix(s: &str) -> Option<(&str, usize)> {
    let digits = s.chars().rev().take_while(|c| c.is_ascii_digit()).count();
    if digits == 0 {
        return None;
    }
    let (prefix, num) = s.split_at(s.len() - digits);
    num.parse().ok().map(|n| (prefix, n))
}

/// Reads a headed CSV file and picks out the schema's columns.
pub fn load_dataset(path: impl AsRef<Path>, schema: &ColumnSchema) -> Result<Dataset> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    read_dataset(file, schema)
}

pub fn read_dataset<R: std::io::Read>(reader: R, schema: &ColumnSchema) -> Result<Dataset> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
    let headers = match rdr.headers() {
        Ok(h) => h.clone(),
        Err(e) => return Err(Error::invalid(format!("cannot read header: {e}"))),
    };
    if headers.is_empty() || (headers.len() == 1 && headers.get(0) == Some("")) {
        return Err(Error::invalid("empty file"));
    }
    let position = |name: &str| {
        headers
            .iter()
            .position(|h| h.trim() == name)
            .ok_or_else(|| Error::Schema(format!("missing column `{name}`")))
    };
    let xi: Vec<usize> = schema.x.iter().map(|c| position(c)).collect::<Result<_>>()?;
    let yi = position(&schema.y)?;
    let zi: Vec<usize> = schema.z.iter().map(|c| position(c)).collect::<Result<_>>()?;

    let (mut xs, mut ys, mut zs) = (Vec::new(), Vec::new(), Vec::new());
    for (i, record) in rdr.records().enumerate() {
        let row = i + 1;
        let record = record.map_err(|e| Error::Parse {
            row,
            msg: e.to_string(),
        })?;
        let cell = |j: usize, name: &str| -> Result<f64> {
            let raw = record.get(j).ok_or_else(|| Error::Parse {
                row,
                msg: format!("missing cell for `{name}`"),
            })?;
            let v: f64 = raw.trim().parse().map_err(|_| Error::Parse {
                row,
                msg: format!("`{raw}` in column `{name}` is not a number"),
            })?;
            if !v.is_finite() {
                return Err(Error::Parse {
                    row,
                    msg: format!("non-finite value `{raw}` in column `{name}`"),
                });
            }
            Ok(v)
        };
        for (j, name) in xi.iter().zip(&schema.x) {
            xs.push(cell(*j, name)?);
        }
        ys.push(cell(yi, &schema.y)?);
        for (j, name) in zi.iter().zip(&schema.z) {
            zs.push(cell(*j, name)?);
        }
    }
    if ys.is_empty() {
        return Err(Error::invalid("file has a header but no data rows"));
    }
    Dataset::from_rows(&xs, schema.x.len(), &ys, &zs, schema.z.len())
}

/// Writes the dataset as CSV with the schema's column names. Values use the
/// shortest representation that parses back to the same `f64`.
pub fn write_dataset(path: impl AsRef<Path>, data: &Dataset, schema: &ColumnSchema) -> Result<()> {
    let path = path.as_ref();
    let io_err = |source| Error::Io {
        path: path.to_path_buf(),
        source,
    };
    let file = File::create(path).map_err(io_err)?;
    let mut w = BufWriter::new(file);
    write_dataset_to(&mut w, data, schema).map_err(io_err)?;
    w.flush().map_err(io_err)
}

pub fn write_dataset_to<W: Write>(w: &mut W, data: &Dataset, schema: &ColumnSchema) -> std::io::Result<()> {
    if schema.x.len() != data.dx() || schema.z.len() != data.dz() {
        return Err(std::io::Error::new(
            std::io::ErrorKind::InvalidInput,
            "schema does not match dataset dimensions",
        ));
    }
    let mut header: Vec<&str> = schema.x.iter().map(String::as_str).collect();
    header.push(&schema.y);
    header.extend(schema.z.iter().map(String::as_str));
    writeln!(w, "{}", header.join(","))?;
    for i in 0..data.n() {
        let mut cells: Vec<String> = data.x().row(i).iter().map(|v| v.to_string()).collect();
        cells.push(data.y()[i].to_string());
        cells.extend(data.z().row(i).iter().map(|v| v.to_string()));
        writeln!(w, "{}", cells.join(","))?;
    }
    Ok(())
}
