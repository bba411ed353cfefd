//! Line-based update streams.
//!
//! ```text
//! # optional headers, before any operation
//! matrix 3
//! 0 1 3
//! 1 0 2
//! 3 2 0
//! metric l1            # coordinate mode only; euclidean is the default
//! insert <id> <weight> [<x1> <x2> ...]
//! delete <id>
//! ```

use std::str::FromStr;

use crate::error::{Error, Result};
use crate::metric::{CoordMetric, DistanceMatrix, PointId, WeightedMetricSpace};

#[derive(Clone, Debug, PartialEq)]
pub enum Op {
    Insert { id: PointId, weight: f64, coords: Vec<f64> },
    Delete { id: PointId },
}

impl Op {
    pub fn id(&self) -> PointId {
        match self {
            Op::Insert { id, .. } | Op::Delete { id } => *id,
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            Op::Insert { .. } => "insert",
            Op::Delete { .. } => "delete",
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Stream {
    pub matrix: Option<DistanceMatrix>,
    pub metric: CoordMetric,
    /// Operations with their 1-based line numbers.
    pub ops: Vec<(usize, Op)>,
}

impl Stream {
    /// An empty space with this stream's distance source.
    pub fn empty_space(&self) -> WeightedMetricSpace {
        match &self.matrix {
            Some(m) => WeightedMetricSpace::with_matrix(m.clone()),
            None => WeightedMetricSpace::with_coords(self.metric),
        }
    }

    /// Applies every operation and returns the final space.
    pub fn final_space(&self) -> Result<WeightedMetricSpace> {
        let mut space = self.empty_space();
        for (line, op) in &self.ops {
            apply(&mut space, op).map_err(|e| Error::AtLine { line: *line, source: Box::new(e) })?;
            if let Op::Delete { id } = op {
                space.release(*id);
            }
        }
        Ok(space)
    }
}

/// Applies one operation to the space.
pub fn apply(space: &mut WeightedMetricSpace, op: &Op) -> Result<()> {
    match op {
        Op::Insert { id, weight, coords } => space.insert_point(*id, *weight, coords),
        Op::Delete { id } => space.delete_point(*id),
    }
}

fn parse_num<T: FromStr>(tok: &str, what: &str, line: usize) -> Result<T> {
    tok.parse()
        .map_err(|_| Error::Parse { line, message: format!("cannot parse {what} from {tok:?}") })
}

pub fn parse(text: &str) -> Result<Stream> {
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'));
    let mut stream = Stream { matrix: None, metric: CoordMetric::Euclidean, ops: Vec::new() };
    let mut headers_open = true;
    while let Some((line, text)) = lines.next() {
        let toks: Vec<&str> = text.split_whitespace().collect();
        let bad = |message: String| Error::Parse { line, message };
        match toks[0] {
            "matrix" if headers_open && stream.matrix.is_none() => {
                if toks.len() != 2 {
                    return Err(bad("expected `matrix <n>`".into()));
                }
                let n: usize = parse_num(toks[1], "matrix size", line)?;
                let mut rows = Vec::with_capacity(n);
                for _ in 0..n {
                    let (row_line, row) = lines.next().ok_or_else(|| bad(format!("matrix declares {n} rows")))?;
                    let row: Vec<f64> = row
                        .split_whitespace()
                        .map(|t| parse_num(t, "distance", row_line))
                        .collect::<Result<_>>()?;
                    rows.push(row);
                }
                stream.matrix = Some(DistanceMatrix::new(rows).map_err(|e| bad(e.to_string()))?);
            }
            "metric" if headers_open => {
                stream.metric = match toks.get(1).copied() {
                    Some("euclidean") if toks.len() == 2 => CoordMetric::Euclidean,
                    Some("l1") if toks.len() == 2 => CoordMetric::L1,
                    _ => return Err(bad("expected `metric euclidean` or `metric l1`".into())),
                };
            }
            "matrix" | "metric" => return Err(bad(format!("`{}` must come before any operation", toks[0]))),
            "insert" => {
                headers_open = false;
                if toks.len() < 3 {
                    return Err(bad("expected `insert <id> <weight> [coords...]`".into()));
                }
                let id = PointId(parse_num(toks[1], "id", line)?);
                let weight = parse_num(toks[2], "weight", line)?;
                let coords = toks[3..]
                    .iter()
                    .map(|t| parse_num(t, "coordinate", line))
                    .collect::<Result<_>>()?;
                stream.ops.push((line, Op::Insert { id, weight, coords }));
            }
            "delete" => {
                headers_open = false;
                if toks.len() != 2 {
                    return Err(bad("expected `delete <id>`".into()));
                }
                stream.ops.push((line, Op::Delete { id: PointId(parse_num(toks[1], "id", line)?) }));
            }
            other => return Err(bad(format!("unknown directive {other:?}"))),
        }
    }
    Ok(stream)
}

/// Renders operations in the format [`parse`] reads.
pub fn render(matrix: Option<&DistanceMatrix>, ops: &[Op]) -> String {
    let mut out = String::new();
    if let Some(m) = matrix {
        out.push_str(&format!("matrix {}\n", m.len()));
        for i in 0..m.len() {
            let row: Vec<String> = (0..m.len()).map(|j| m.get(i, j).to_string()).collect();
            out.push_str(&row.join(" "));
            out.push('\n');
        }
    }
    for op in ops {
        match op {
            Op::Insert { id, weight, coords } => {
                out.push_str(&format!("insert {id} {weight}"));
                for c in coords {
                    out.push_str(&format!(" {c}"));
                }
                out.push('\n');
            }
            Op::Delete { id } => out.push_str(&format!("delete {id}\n")),
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn coordinate_stream() {
        let s = parse("# demo\ninsert 0 1 0\ninsert 1 1 1\n\ninsert 2 1 3\ndelete 1\n").unwrap();
        assert!(s.matrix.is_none());
        assert_eq!(s.ops.len(), 4);
        assert_eq!(s.ops[3], (6, Op::Delete { id: PointId(1) }));
        let space = s.final_space().unwrap();
        assert_eq!(space.ids().collect::<Vec<_>>(), vec![PointId(0), PointId(2)]);
    }

    #[test]
    fn matrix_stream() {
        let s = parse("matrix 2\n0 5\n5 0\ninsert 1 2\ninsert 0 1\n").unwrap();
        let space = s.final_space().unwrap();
        assert_eq!(space.distance(PointId(0), PointId(1)).unwrap(), 5.0);
    }

    #[test]
    fn errors_carry_line_numbers() {
        assert_eq!(
            parse("insert 0 1 0\ninsert x 1 2\n"),
            Err(Error::Parse { line: 2, message: "cannot parse id from \"x\"".into() })
        );
        assert!(matches!(parse("frobnicate\n"), Err(Error::Parse { line: 1, .. })));
        assert!(matches!(parse("insert 0 1 0\nmatrix 1\n0\n"), Err(Error::Parse { line: 2, .. })));
        assert!(matches!(parse("matrix 2\n0 1\n"), Err(Error::Parse { line: 1, .. })));
        let s = parse("insert 0 1 0\ndelete 4\n").unwrap();
        assert!(matches!(s.final_space(), Err(Error::AtLine { line: 2, .. })));
    }

    #[test]
    fn l1_header() {
        let s = parse("metric l1\ninsert 0 1 0 0\ninsert 1 1 3 4\n").unwrap();
        assert_eq!(s.final_space().unwrap().distance(PointId(0), PointId(1)).unwrap(), 7.0);
    }

    #[test]
    fn render_round_trip() {
        let text = "matrix 2\n0 1.5\n1.5 0\ninsert 0 2\ninsert 1 0.5\ndelete 0\n";
        let s = parse(text).unwrap();
        let ops: Vec<Op> = s.ops.iter().map(|(_, o)| o.clone()).collect();
        assert_eq!(render(s.matrix.as_ref(), &ops), text);
    }

    #[test]
    fn empty_stream() {
        let s = parse("").unwrap();
        assert!(s.ops.is_empty());
        assert!(s.final_space().unwrap().is_empty());
    }
}
