//! Graph definition files (JSON syntax) and report serialization.

use crate::coupling::{named_coupling, CouplingError, CouplingKind, UnitaryCoupling};
use crate::graph::{Edge, GraphError, MetricGraph};
use crate::linalg::{CMat, C64};
use crate::profile::{ProfileError, ProfileSpec};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum IoError {
    #[error("cannot read `{path}`: {source}")]
    Read {
        path: String,
        source: std::io::Error,
    },
    #[error("malformed graph file: {0}")]
    Parse(#[from] serde_json::Error),
    #[error("edge `{0}` is missing its damping profile (damping must be explicit)")]
    MissingDamping(String),
    #[error("vertex `{0}` has no coupling entry")]
    MissingCoupling(String),
    #[error("coupling for vertex `{vertex}`: {source}")]
    Coupling {
        vertex: String,
        source: CouplingError,
    },
    #[error("edge `{edge}`: {source}")]
    Profile {
        edge: String,
        source: ProfileError,
    },
    #[error(transparent)]
    Graph(#[from] GraphError),
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ComplexSpec {
    pub re: f64,
    pub im: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum CouplingSpec {
    Standard,
    Dirichlet,
    Neumann,
    Delta { alpha: f64 },
    DeltaPrimeS { beta: f64 },
    Robin { theta: f64 },
    Custom { matrix: Vec<Vec<ComplexSpec>> },
}

#[derive(Debug, Clone, Deserialize)]
struct EdgeSpec {
    id: String,
    tail: String,
    head: String,
    length: f64,
    damping: Option<ProfileSpec>,
    potential: Option<ProfileSpec>,
}

#[derive(Debug, Clone, Deserialize)]
struct GraphSpec {
    vertices: Vec<String>,
    edges: Vec<EdgeSpec>,
    couplings: std::collections::BTreeMap<String, CouplingSpec>,
}

/// A parsed graph file: the metric graph plus one coupling per vertex,
/// indexed like the graph's vertices.
#[derive(Debug, Clone)]
pub struct GraphFile {
    pub graph: MetricGraph,
    pub couplings: Vec<UnitaryCoupling>,
}

impl CouplingSpec {
    pub fn build(&self, degree: usize) -> Result<UnitaryCoupling, CouplingError> {
        match self {
            CouplingSpec::Standard => named_coupling(CouplingKind::Standard, degree),
            CouplingSpec::Dirichlet => named_coupling(CouplingKind::Dirichlet, degree),
            CouplingSpec::Neumann => named_coupling(CouplingKind::Neumann, degree),
            CouplingSpec::Delta { alpha } => named_coupling(CouplingKind::Delta(*alpha), degree),
            CouplingSpec::DeltaPrimeS { beta } => {
                named_coupling(CouplingKind::DeltaPrimeS(*beta), degree)
            }
            CouplingSpec::Robin { theta } => named_coupling(CouplingKind::Robin(*theta), degree),
            CouplingSpec::Custom { matrix } => {
                let n = matrix.len();
                let mut m = CMat::zeros(n, n);
                for (i, row) in matrix.iter().enumerate() {
                    for (j, z) in row.iter().enumerate() {
                        m[(i, j)] = C64::new(z.re, z.im);
                    }
                }
                UnitaryCoupling::custom(m)
            }
        }
    }
}

pub fn parse_graph(text: &str) -> Result<GraphFile, IoError> {
    let spec: GraphSpec = serde_json::from_str(text)?;
    let vertex_ids = spec.vertices.clone();
    let index_of = |id: &str| vertex_ids.iter().position(|v| v == id);
    let mut edges = Vec::new();
    for e in &spec.edges {
        let tail = index_of(&e.tail).ok_or_else(|| GraphError::DanglingEndpoint {
            edge: e.id.clone(),
            vertex: e.tail.clone(),
        })?;
        let head = index_of(&e.head).ok_or_else(|| GraphError::DanglingEndpoint {
            edge: e.id.clone(),
            vertex: e.head.clone(),
        })?;
        let damping = e
            .damping
            .as_ref()
            .ok_or_else(|| IoError::MissingDamping(e.id.clone()))?
            .build(e.length)
            .map_err(|source| IoError::Profile {
                edge: e.id.clone(),
                source,
            })?;
        let potential = match &e.potential {
            Some(p) => p.build(e.length).map_err(|source| IoError::Profile {
                edge: e.id.clone(),
                source,
            })?,
            None => crate::profile::CoefficientProfile::constant(0.0, e.length),
        };
        edges.push(Edge {
            id: e.id.clone(),
            tail,
            head,
            length: e.length,
            damping,
            potential,
        });
    }
    let graph = MetricGraph::new(vertex_ids, edges)?;
    let degrees = graph.degrees();
    let mut couplings = Vec::with_capacity(graph.n_vertices());
    for (v, id) in graph.vertex_ids().iter().enumerate() {
        let spec = spec
            .couplings
            .get(id)
            .ok_or_else(|| IoError::MissingCoupling(id.clone()))?;
        couplings.push(spec.build(degrees[v]).map_err(|source| IoError::Coupling {
            vertex: id.clone(),
            source,
        })?);
    }
    Ok(GraphFile { graph, couplings })
}

pub fn load_graph(path: &std::path::Path) -> Result<GraphFile, IoError> {
    let text = std::fs::read_to_string(path).map_err(|source| IoError::Read {
        path: path.display().to_string(),
        source,
    })?;
    parse_graph(&text)
}

#[cfg(test)]
mod tests {
    use super::*;

    const SINGLE_EDGE: &str = r#"{
        "vertices": ["a", "b"],
        "edges": [
            {"id": "e", "tail": "a", "head": "b", "length": 1.0,
             "damping": {"type": "constant", "value": 1.0}}
        ],
        "couplings": {"a": {"type": "dirichlet"}, "b": {"type": "dirichlet"}}
    }"#;

    #[test]
    fn parses_single_edge() {
        let gf = parse_graph(SINGLE_EDGE).unwrap();
        assert_eq!(gf.graph.n_edges(), 1);
        assert_eq!(gf.couplings.len(), 2);
        assert!((gf.graph.edges()[0].damping.average() - 1.0).abs() < 1e-15);
        assert_eq!(gf.graph.edges()[0].potential.average(), 0.0);
    }

    #[test]
    fn missing_damping_is_an_error() {
        let bad = SINGLE_EDGE.replace(
            r#""damping": {"type": "constant", "value": 1.0}"#,
            r#""potential": {"type": "constant", "value": 1.0}"#,
        );
        assert!(matches!(
            parse_graph(&bad),
            Err(IoError::MissingDamping(_))
        ));
    }

    #[test]
    fn missing_coupling_is_an_error() {
        let bad = SINGLE_EDGE.replace(r#""b": {"type": "dirichlet"}"#, "");
        let bad = bad.replace(r#"{"a": {"type": "dirichlet"}, }"#, r#"{"a": {"type": "dirichlet"}}"#);
        // robust against the exact produced text: just assert an error surfaces
        assert!(parse_graph(&bad).is_err());
    }

    #[test]
    fn explicit_profiles_parse() {
        let text = r#"{
            "vertices": ["a", "b"],
            "edges": [
                {"id": "e", "tail": "a", "head": "b", "length": 2.0,
                 "damping": {"type": "piecewise", "breakpoints": [0.5], "values": [1.0, 3.0]},
                 "potential": {"type": "sampled", "values": [0.0, 1.0, 0.0, -1.0, 0.0]}}
            ],
            "couplings": {"a": {"type": "neumann"}, "b": {"type": "delta", "alpha": 0.5}}
        }"#;
        let gf = parse_graph(text).unwrap();
        let e = &gf.graph.edges()[0];
        assert_eq!(e.damping.eval(0.25), 1.0);
        assert_eq!(e.damping.eval(1.5), 3.0);
        assert!((e.damping.average() - 2.5).abs() < 1e-12);
        assert!(e.potential.average().abs() < 1e-12);
        // bad piecewise shape is rejected with the edge named
        let bad = text.replace(r#""values": [1.0, 3.0]"#, r#""values": [1.0]"#);
        assert!(matches!(parse_graph(&bad), Err(IoError::Profile { .. })));
    }

    #[test]
    fn custom_coupling_roundtrip_and_unitarity_gate() {
        let text = r#"{
            "vertices": ["a", "b"],
            "edges": [
                {"id": "e", "tail": "a", "head": "b", "length": 1.0,
                 "damping": {"type": "constant", "value": 0.0}}
            ],
            "couplings": {
                "a": {"type": "custom", "matrix": [[{"re": 0.0, "im": 1.0}]]},
                "b": {"type": "robin", "theta": 3.141592653589793}
            }
        }"#;
        let gf = parse_graph(text).unwrap();
        assert_eq!(gf.couplings[0].matrix[(0, 0)], C64::new(0.0, 1.0));
        // robin(pi) is the dirichlet point
        assert!((gf.couplings[1].matrix[(0, 0)] - C64::new(-1.0, 0.0)).norm() < 1e-12);
        let non_unitary = text.replace(r#"{"re": 0.0, "im": 1.0}"#, r#"{"re": 0.5, "im": 0.0}"#);
        assert!(parse_graph(&non_unitary).is_err());
    }
}
