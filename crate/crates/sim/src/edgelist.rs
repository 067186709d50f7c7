//! Plain-text edge lists: one `u v` pair per line, `#` starts a comment.
//! Node count is the highest id plus one.

use std::path::Path;

use ppsl_core::graph::{Graph, GraphError};

#[derive(Debug, thiserror::Error)]
pub enum EdgeListError {
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("line {line}: expected `u v`, got {content:?}")]
    Malformed { line: usize, content: String },
    #[error("file contains no edges")]
    Empty,
    #[error("invalid graph: {0}")]
    Graph(#[from] GraphError),
}

pub fn parse(text: &str) -> Result<(usize, Vec<(u32, u32)>), EdgeListError> {
    let mut edges = Vec::new();
    let mut max_id = 0u32;
    for (idx, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let mut parts = line.split_whitespace();
        let (u, v) = match (parts.next(), parts.next(), parts.next()) {
            (Some(u), Some(v), None) => (u, v),
            _ => {
                return Err(EdgeListError::Malformed {
                    line: idx + 1,
                    content: raw.to_string(),
                })
            }
        };
        let parse_id = |tok: &str| {
            tok.parse::<u32>().map_err(|_| EdgeListError::Malformed {
                line: idx + 1,
                content: raw.to_string(),
            })
        };
        let (u, v) = (parse_id(u)?, parse_id(v)?);
        max_id = max_id.max(u).max(v);
        edges.push((u, v));
    }
    if edges.is_empty() {
        return Err(EdgeListError::Empty);
    }
    Ok((max_id as usize + 1, edges))
}

pub fn load(path: &Path) -> Result<Graph, EdgeListError> {
    let (n, edges) = parse(&std::fs::read_to_string(path)?)?;
    Ok(Graph::from_edges(n, &edges)?)
}

pub fn format(graph: &Graph) -> String {
    let mut out = format!("# nodes: {}\n", graph.n());
    for (u, v) in graph.edges() {
        out.push_str(&format!("{u} {v}\n"));
    }
    out
}

pub fn save(path: &Path, graph: &Graph) -> Result<(), EdgeListError> {
    Ok(std::fs::write(path, format(graph))?)
}
