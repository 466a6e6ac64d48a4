//! Edge file reading and writing.
//!
//! TSV rows `src_key <TAB> rel_name <TAB> dst_key [<TAB> weight]`; the
//! weight defaults to 1. Blank lines and lines starting with `#` are skipped.

use std::fs;
use std::io::{BufWriter, Write};
use std::path::Path;

use crate::error::{Error, Result};

use super::graph::{EdgeRecord, GraphBuilder, HetGraph};
use super::GraphSchema;

pub(crate) fn parse_edge_line(line: &str) -> std::result::Result<EdgeRecord, String> {
    let cols: Vec<&str> = line.split('\t').collect();
    let (src, rel, dst, weight) = match cols.as_slice() {
        [s, r, d] => (*s, *r, *d, 1.0),
        [s, r, d, w] => {
            let w: f64 = w
                .trim()
                .parse()
                .map_err(|_| format!("weight `{w}` is not a number"))?;
            (*s, *r, *d, w)
        }
        _ => return Err(format!("expected 3 or 4 tab-separated columns, got {}", cols.len())),
    };
    if src.is_empty() || dst.is_empty() {
        return Err("empty vertex key".into());
    }
    Ok(EdgeRecord {
        src_key: src.to_owned(),
        rel_name: rel.trim().to_owned(),
        dst_key: dst.to_owned(),
        weight,
    })
}

impl HetGraph {
    /// Parses edge rows against `schema`. Errors carry the 1-based line.
    pub fn parse_edges(schema: GraphSchema, text: &str) -> Result<HetGraph> {
        let mut builder = GraphBuilder::new(schema);
        for (idx, raw) in text.lines().enumerate() {
            let line = raw.trim_end_matches('\r');
            if line.trim().is_empty() || line.starts_with('#') {
                continue;
            }
            let row = idx + 1;
            let record = parse_edge_line(line).map_err(|msg| Error::EdgeRow { line: row, msg })?;
            builder.add_record(&record).map_err(|e| Error::EdgeRow {
                line: row,
                msg: match e {
                    Error::Schema(m) | Error::Invalid(m) => m,
                    other => other.to_string(),
                },
            })?;
        }
        Ok(builder.build())
    }

    pub fn load(schema: GraphSchema, edges_path: impl AsRef<Path>) -> Result<HetGraph> {
        let path = edges_path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse_edges(schema, &text).map_err(|e| match e {
            Error::EdgeRow { line, msg } => Error::parse(path.display().to_string(), line, msg),
            other => other,
        })
    }

    pub fn write_edges_to<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        for r in self.edge_records() {
            writeln!(out, "{}\t{}\t{}\t{}", r.src_key, r.rel_name, r.dst_key, r.weight)?;
        }
        out.flush()
    }

    pub fn write_edges(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
        self.write_edges_to(BufWriter::new(file))
            .map_err(|e| Error::io(path, e))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const SCHEMA: &str = "V paper\nV kw\nR cites paper paper\nR has paper kw\n";

    #[test]
    fn violating_row_reports_line_number() {
        let s = GraphSchema::parse(SCHEMA, "t").unwrap();
        let text = "p1\tcites\tp2\t1\n\n# c\np1\thas\tk1\nk1\tcites\tp1\n";
        match HetGraph::parse_edges(s, text).unwrap_err() {
            Error::EdgeRow { line, .. } => assert_eq!(line, 5),
            other => panic!("{other}"),
        }
    }

    #[test]
    fn malformed_rows() {
        let s = GraphSchema::parse(SCHEMA, "t").unwrap();
        assert!(HetGraph::parse_edges(s.clone(), "p1\tcites\n").is_err());
        assert!(HetGraph::parse_edges(s.clone(), "p1\tcites\tp2\tabc\n").is_err());
        assert!(HetGraph::parse_edges(s.clone(), "p1\tcites\tp2\tinf\n").is_err());
        assert!(HetGraph::parse_edges(s, "p1\tcites\tp2\t-2\n").is_err());
    }

    #[test]
    fn weight_defaults_to_one() {
        let s = GraphSchema::parse(SCHEMA, "t").unwrap();
        let g = HetGraph::parse_edges(s, "p1\tcites\tp2\n").unwrap();
        assert_eq!(g.edges()[0].weight, 1.0);
    }
}
