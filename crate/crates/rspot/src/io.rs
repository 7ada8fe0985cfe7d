//! Text formats: edge lists, margins, and dense matrix CSV.
//!
//! Files use 1-based node ids; everything handed to `rspot_core` is 0-based.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use rspot_core::{load_graph, CostRule, EdgeRecord, Graph, MarginSpec, Matrix};

#[derive(thiserror::Error, Debug)]
pub enum IoError {
    #[error("cannot read {path}: {source}")]
    Read {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("cannot write {path}: {source}")]
    Write {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("{origin}:{line}: {message}")]
    Parse {
        origin: String,
        line: usize,
        message: String,
    },
    #[error("{origin}: {source}")]
    Core {
        origin: String,
        source: rspot_core::Error,
    },
}

pub type Result<T> = std::result::Result<T, IoError>;

fn parse_err(origin: &str, line: usize, message: impl Into<String>) -> IoError {
    IoError::Parse {
        origin: origin.to_string(),
        line,
        message: message.into(),
    }
}

pub fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|source| IoError::Read {
        path: path.to_path_buf(),
        source,
    })
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|source| IoError::Write {
        path: path.to_path_buf(),
        source,
    })
}

/// Non-blank, non-comment lines with their 1-based line numbers.
fn data_lines(text: &str) -> impl Iterator<Item = (usize, Vec<&str>)> {
    text.lines().enumerate().filter_map(|(i, raw)| {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            None
        } else {
            Some((i + 1, line.split_whitespace().collect()))
        }
    })
}

fn parse_node(origin: &str, line: usize, field: &str) -> Result<usize> {
    match field.parse::<usize>() {
        Ok(id) if id >= 1 => Ok(id - 1),
        _ => Err(parse_err(
            origin,
            line,
            format!("node id must be a positive integer, got {field:?}"),
        )),
    }
}

fn parse_float(origin: &str, line: usize, name: &str, field: &str) -> Result<f64> {
    field
        .parse::<f64>()
        .map_err(|_| parse_err(origin, line, format!("{name} is not a number: {field:?}")))
}

/// Parses a `src dst weight [cost]` edge list. The cost column, if present in
/// the header, switches the graph to explicit costs; otherwise costs are
/// reciprocal weights. The node count is the largest id mentioned.
pub fn parse_edge_list(text: &str, origin: &str) -> Result<Graph> {
    let mut lines = data_lines(text);
    let (hline, header) = lines
        .next()
        .ok_or_else(|| parse_err(origin, 0, "empty edge list"))?;
    let has_cost = match header.as_slice() {
        ["src", "dst", "weight"] => false,
        ["src", "dst", "weight", "cost"] => true,
        _ => {
            return Err(parse_err(
                origin,
                hline,
                format!(
                    "expected header `src dst weight [cost]`, got {:?}",
                    header.join(" ")
                ),
            ))
        }
    };
    let width = if has_cost { 4 } else { 3 };
    let mut records = Vec::new();
    let mut node_count = 0;
    for (line, fields) in lines {
        if fields.len() != width {
            return Err(parse_err(
                origin,
                line,
                format!("expected {width} columns, got {}", fields.len()),
            ));
        }
        let src = parse_node(origin, line, fields[0])?;
        let dst = parse_node(origin, line, fields[1])?;
        let weight = parse_float(origin, line, "weight", fields[2])?;
        node_count = node_count.max(src + 1).max(dst + 1);
        records.push(if has_cost {
            let cost = parse_float(origin, line, "cost", fields[3])?;
            EdgeRecord::with_cost(src, dst, weight, cost)
        } else {
            EdgeRecord::new(src, dst, weight)
        });
    }
    let rule = if has_cost {
        CostRule::Explicit
    } else {
        CostRule::ReciprocalWeight
    };
    load_graph(node_count, &records, rule).map_err(|source| IoError::Core {
        origin: origin.to_string(),
        source,
    })
}

pub fn read_edge_list(path: &Path) -> Result<Graph> {
    parse_edge_list(&read_text(path)?, &path.display().to_string())
}

/// Parses a `node sigma_in sigma_out` table over `node_count` nodes; omitted
/// nodes get zero on both sides.
pub fn parse_margins(text: &str, origin: &str, node_count: usize) -> Result<MarginSpec> {
    let mut lines = data_lines(text);
    let (hline, header) = lines
        .next()
        .ok_or_else(|| parse_err(origin, 0, "empty margins file"))?;
    if header.as_slice() != ["node", "sigma_in", "sigma_out"] {
        return Err(parse_err(
            origin,
            hline,
            format!(
                "expected header `node sigma_in sigma_out`, got {:?}",
                header.join(" ")
            ),
        ));
    }
    let mut sigma_in = vec![0.0; node_count];
    let mut sigma_out = vec![0.0; node_count];
    let mut seen = vec![false; node_count];
    for (line, fields) in lines {
        if fields.len() != 3 {
            return Err(parse_err(
                origin,
                line,
                format!("expected 3 columns, got {}", fields.len()),
            ));
        }
        let node = parse_node(origin, line, fields[0])?;
        if node >= node_count {
            return Err(parse_err(
                origin,
                line,
                format!("node {} is not in the graph ({node_count} nodes)", node + 1),
            ));
        }
        if std::mem::replace(&mut seen[node], true) {
            return Err(parse_err(
                origin,
                line,
                format!("node {} listed twice", node + 1),
            ));
        }
        sigma_in[node] = parse_float(origin, line, "sigma_in", fields[1])?;
        sigma_out[node] = parse_float(origin, line, "sigma_out", fields[2])?;
    }
    MarginSpec::new(sigma_in, sigma_out).map_err(|source| IoError::Core {
        origin: origin.to_string(),
        source,
    })
}

pub fn read_margins(path: &Path, node_count: usize) -> Result<MarginSpec> {
    parse_margins(&read_text(path)?, &path.display().to_string(), node_count)
}

/// Dense matrix with labelled rows and columns. The first header cell is
/// `id`; floats carry 17 significant digits.
pub fn format_matrix_csv(row_labels: &[String], col_labels: &[String], m: &Matrix) -> String {
    assert_eq!(row_labels.len(), m.rows());
    assert_eq!(col_labels.len(), m.cols());
    let mut out = String::from("id");
    for c in col_labels {
        out.push(',');
        out.push_str(c);
    }
    out.push('\n');
    for (i, label) in row_labels.iter().enumerate() {
        out.push_str(label);
        for v in m.row(i) {
            write!(out, ",{v:.16e}").unwrap();
        }
        out.push('\n');
    }
    out
}

pub fn write_matrix_csv(
    path: &Path,
    row_labels: &[String],
    col_labels: &[String],
    m: &Matrix,
) -> Result<()> {
    write_text(path, &format_matrix_csv(row_labels, col_labels, m))
}

/// Row labels, column labels and values of a file written by
/// [`format_matrix_csv`].
pub fn parse_matrix_csv(text: &str, origin: &str) -> Result<(Vec<String>, Vec<String>, Matrix)> {
    let mut lines = text
        .lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty());
    let (_, header) = lines
        .next()
        .ok_or_else(|| parse_err(origin, 0, "empty matrix file"))?;
    let mut cells = header.split(',');
    if cells.next() != Some("id") {
        return Err(parse_err(origin, 1, "first header cell must be `id`"));
    }
    let cols: Vec<String> = cells.map(str::to_string).collect();
    let mut rows = Vec::new();
    let mut data = Vec::new();
    for (i, line) in lines {
        let mut cells = line.split(',');
        rows.push(cells.next().unwrap_or("").to_string());
        let values = cells
            .map(|c| parse_float(origin, i + 1, "entry", c))
            .collect::<Result<Vec<f64>>>()?;
        if values.len() != cols.len() {
            return Err(parse_err(
                origin,
                i + 1,
                format!("expected {} values, got {}", cols.len(), values.len()),
            ));
        }
        data.push(values);
    }
    let m = Matrix::from_fn(rows.len(), cols.len(), |i, j| data[i][j]);
    Ok((rows, cols, m))
}

pub fn read_matrix_csv(path: &Path) -> Result<(Vec<String>, Vec<String>, Matrix)> {
    parse_matrix_csv(&read_text(path)?, &path.display().to_string())
}

/// 1-based labels for original nodes.
pub fn node_labels(nodes: impl IntoIterator<Item = usize>) -> Vec<String> {
    nodes.into_iter().map(|i| (i + 1).to_string()).collect()
}

/// Labels for the extended graph: `src`, the original ids, `sink`.
pub fn extended_labels(original_count: usize) -> Vec<String> {
    let mut labels = vec!["src".to_string()];
    labels.extend(node_labels(0..original_count));
    labels.push("sink".to_string());
    labels
}
