use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid_model::{EdgeId, ForestConfig, GridGraph, Line, Node, NodeId, NodeKind};

/// On-disk grid document.
///
/// ```json
/// {"nodes": [{"id": 0, "kind": "substation"}, {"id": 1, "kind": "load"}],
///  "edges": [{"from": 0, "to": 1, "r": 0.01, "x": 0.02, "closed": true}],
///  "meta": {"name": "two-bus"}}
/// ```
///
/// A forest is declared when at least one edge carries `closed`; edges
/// without the field then count as open.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridFile {
    pub nodes: Vec<NodeEntry>,
    pub edges: Vec<EdgeEntry>,
    #[serde(default)]
    pub meta: Meta,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NodeEntry {
    pub id: NodeId,
    pub kind: NodeKind,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EdgeEntry {
    pub from: NodeId,
    pub to: NodeId,
    pub r: f64,
    pub x: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub closed: Option<bool>,
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub switchable: bool,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Meta {
    #[serde(default)]
    pub name: String,
}

/// A parsed grid with its declared operational forest, if any.
#[derive(Debug, Clone)]
pub struct LoadedGrid {
    pub name: String,
    pub grid: Arc<GridGraph>,
    pub forest: Option<ForestConfig>,
}

impl LoadedGrid {
    pub fn require_forest(&self) -> Result<&ForestConfig> {
        self.forest.as_ref().ok_or_else(|| {
            Error::Validation(format!("grid '{}' declares no closed edges", self.name))
        })
    }
}

fn validation(e: Error) -> Error {
    match e {
        Error::Structural(msg) => Error::Validation(msg),
        other => other,
    }
}

impl GridFile {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text)
            .map_err(|e| Error::Parse(format!("line {}, column {}: {e}", e.line(), e.column())))
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("grid files always serialize");
        s.push('\n');
        s
    }

    pub fn into_grid(self) -> Result<LoadedGrid> {
        let nodes = self
            .nodes
            .iter()
            .map(|n| Node {
                id: n.id,
                kind: n.kind,
            })
            .collect();
        let lines = self
            .edges
            .iter()
            .map(|e| Line {
                from: e.from,
                to: e.to,
                r: e.r,
                x: e.x,
                switchable: e.switchable,
            })
            .collect();
        let grid = Arc::new(GridGraph::new(nodes, lines).map_err(validation)?);
        let declared = self.edges.iter().any(|e| e.closed.is_some());
        let forest = if declared {
            let closed = self
                .edges
                .iter()
                .enumerate()
                .filter(|(_, e)| e.closed == Some(true))
                .map(|(i, _)| EdgeId(i));
            Some(ForestConfig::new(grid.clone(), closed).map_err(validation)?)
        } else {
            None
        };
        Ok(LoadedGrid {
            name: self.meta.name,
            grid,
            forest,
        })
    }

    /// Document for `grid`, with `closed` flags when `forest` is given.
    pub fn from_grid(name: &str, grid: &GridGraph, forest: Option<&ForestConfig>) -> Self {
        GridFile {
            nodes: grid
                .nodes()
                .iter()
                .map(|n| NodeEntry {
                    id: n.id,
                    kind: n.kind,
                })
                .collect(),
            edges: grid
                .lines()
                .iter()
                .enumerate()
                .map(|(i, l)| EdgeEntry {
                    from: l.from,
                    to: l.to,
                    r: l.r,
                    x: l.x,
                    closed: forest.map(|f| f.is_closed(EdgeId(i))),
                    switchable: l.switchable,
                })
                .collect(),
            meta: Meta {
                name: name.to_string(),
            },
        }
    }
}

pub fn parse_grid_str(text: &str) -> Result<LoadedGrid> {
    GridFile::from_json(text)?.into_grid()
}

pub fn parse_grid(path: impl AsRef<Path>) -> Result<LoadedGrid> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path)?;
    let mut loaded = parse_grid_str(&text).map_err(|e| match e {
        Error::Parse(msg) => Error::Parse(format!("{}: {msg}", path.display())),
        other => other,
    })?;
    if loaded.name.is_empty() {
        loaded.name = path
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_default();
    }
    Ok(loaded)
}

pub fn serialize_grid(name: &str, grid: &GridGraph, forest: Option<&ForestConfig>) -> String {
    GridFile::from_grid(name, grid, forest).to_json()
}

#[cfg(test)]
mod tests {
    use super::*;

    const TWO_BUS: &str = r#"{"nodes": [{"id": 0, "kind": "substation"}, {"id": 1, "kind": "load"}],
        "edges": [{"from": 0, "to": 1, "r": 0.01, "x": 0.02, "closed": true}],
        "meta": {"name": "two-bus"}}"#;

    #[test]
    fn minimal_file() {
        let g = parse_grid_str(TWO_BUS).unwrap();
        assert_eq!(g.name, "two-bus");
        assert_eq!(g.grid.substation_count(), 1);
        assert_eq!(g.grid.load_count(), 1);
        assert_eq!(g.forest.unwrap().closed_edges(), &[EdgeId(0)]);
    }

    #[test]
    fn round_trip_is_identical() {
        let g = parse_grid_str(TWO_BUS).unwrap();
        let text = serialize_grid(&g.name, &g.grid, g.forest.as_ref());
        let again = parse_grid_str(&text).unwrap();
        assert_eq!(
            serialize_grid(&again.name, &again.grid, again.forest.as_ref()),
            text
        );
    }

    #[test]
    fn no_closed_flags_means_no_forest() {
        let g = parse_grid_str(&TWO_BUS.replace(r#", "closed": true"#, "")).unwrap();
        assert!(g.forest.is_none());
        assert!(g.require_forest().is_err());
    }

    #[test]
    fn cyclic_closed_edges_fail_validation() {
        let text = r#"{"nodes": [{"id": 0, "kind": "substation"}, {"id": 1, "kind": "load"}, {"id": 2, "kind": "load"}],
          "edges": [{"from": 0, "to": 1, "r": 1, "x": 1, "closed": true},
                    {"from": 1, "to": 2, "r": 1, "x": 1, "closed": true},
                    {"from": 2, "to": 0, "r": 1, "x": 1, "closed": true}]}"#;
        match parse_grid_str(text) {
            Err(Error::Validation(msg)) => assert!(msg.contains("cycle"), "{msg}"),
            other => panic!("expected validation error, got {other:?}"),
        }
    }

    #[test]
    fn two_substations_in_one_tree_are_named() {
        let text = r#"{"nodes": [{"id": 0, "kind": "substation"}, {"id": 1, "kind": "load"}, {"id": 2, "kind": "substation"}],
          "edges": [{"from": 0, "to": 1, "r": 1, "x": 1, "closed": true},
                    {"from": 1, "to": 2, "r": 1, "x": 1, "closed": true}]}"#;
        match parse_grid_str(text) {
            Err(Error::Validation(msg)) => assert!(msg.contains("two substations"), "{msg}"),
            other => panic!("expected validation error, got {other:?}"),
        }
    }

    #[test]
    fn schema_errors_carry_location() {
        let text = "{\n  \"nodes\": [{\"id\": 0, \"kind\": \"plant\"}],\n  \"edges\": []\n}";
        match parse_grid_str(text) {
            Err(Error::Parse(msg)) => assert!(msg.starts_with("line 2, column"), "{msg}"),
            other => panic!("expected parse error, got {other:?}"),
        }
    }
}
