//! Point files: one point per CSV row.
//!
//! Vector backends take coordinates (the hyperboloid accepts either the
//! spatial part or the full ambient vector), SPD rows are the matrix in
//! row-major order, and tree rows are `e<edge>,<offset>` or `n<node>`.

use std::path::Path;

use crate::error::{Error, Result};
use crate::geometry::{Matrix, Point, Space};

pub fn ingest_points(path: impl AsRef<Path>, space: &Space) -> Result<Vec<Point>> {
    let path = path.as_ref();
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .comment(Some(b'#'))
        .from_path(path)
        .map_err(|e| match e.into_kind() {
            csv::ErrorKind::Io(io) => Error::io(path, io),
            other => Error::Ingest {
                path: path.into(),
                line: 0,
                message: format!("{other:?}"),
            },
        })?;
    let mut points = Vec::new();
    for row in reader.records() {
        let row = row.map_err(|e| Error::Ingest {
            path: path.into(),
            line: e.position().map_or(0, |p| p.line()),
            message: e.to_string(),
        })?;
        let line = row.position().map_or(0, |p| p.line());
        let fields: Vec<&str> = row.iter().filter(|f| !f.is_empty()).collect();
        if fields.is_empty() {
            continue;
        }
        let at = |message: String| Error::Ingest {
            path: path.into(),
            line,
            message,
        };
        let p = parse_row(space, &fields).map_err(&at)?;
        match space.validate(&p) {
            Ok(()) => points.push(space.normalize(p)),
            Err(Error::Domain(msg)) => {
                let detail = match &p {
                    Point::Matrix(m) => format!("{msg}; eigenvalues {:?}", m.symmetrized().sym_eigen().values),
                    _ => msg,
                };
                return Err(Error::Domain(format!("{}: line {line}: {detail}", path.display())));
            }
            Err(e) => return Err(at(e.to_string())),
        }
    }
    Ok(points)
}

fn numbers(fields: &[&str]) -> std::result::Result<Vec<f64>, String> {
    fields
        .iter()
        .map(|f| f.parse::<f64>().map_err(|_| format!("`{f}` is not a number")))
        .collect()
}

fn parse_row(space: &Space, fields: &[&str]) -> std::result::Result<Point, String> {
    let arity = |want: usize| {
        if fields.len() == want {
            Ok(())
        } else {
            Err(format!("expected {want} fields, found {}", fields.len()))
        }
    };
    match space {
        Space::Euclidean { dim } => {
            arity(*dim)?;
            Ok(Point::Vector(numbers(fields)?))
        }
        Space::PdNorm { metric } => {
            arity(metric.rows())?;
            Ok(Point::Vector(numbers(fields)?))
        }
        Space::Hyperboloid { dim } => {
            let v = numbers(fields)?;
            if v.len() == *dim {
                Ok(Space::hyperboloid_point(&v))
            } else if v.len() == dim + 1 {
                Ok(Point::Vector(v))
            } else {
                Err(format!("expected {dim} or {} fields, found {}", dim + 1, v.len()))
            }
        }
        Space::Spd { n } => {
            arity(n * n)?;
            Matrix::from_row_major(*n, *n, numbers(fields)?)
                .map(Point::Matrix)
                .map_err(|e| e.to_string())
        }
        Space::Tree(_) => {
            let head = fields[0];
            let id = |s: &str| s[1..].parse::<usize>().map_err(|_| format!("bad tree label `{s}`"));
            match head.chars().next() {
                Some('e') => {
                    arity(2)?;
                    let offset = fields[1]
                        .parse::<f64>()
                        .map_err(|_| format!("`{}` is not a number", fields[1]))?;
                    Ok(Point::on_edge(id(head)?, offset))
                }
                Some('n') => {
                    arity(1)?;
                    Ok(Point::node(id(head)?))
                }
                _ => Err(format!("tree rows start with `e<edge>` or `n<node>`, found `{head}`")),
            }
        }
        Space::Product(_) => Err("product spaces have no row format".into()),
    }
}
