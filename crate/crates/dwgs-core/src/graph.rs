//! Finite metric graphs with per-edge damping and potential profiles, and
//! the structural transformations the solver needs: directed double,
//! subdivision to an equilateral graph, scaling, bipartiteness.

use crate::profile::CoefficientProfile;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GraphError {
    #[error("edge `{edge}` references unknown vertex `{vertex}`")]
    DanglingEndpoint { edge: String, vertex: String },
    #[error("edge `{edge}` has nonpositive length {length}")]
    NonpositiveLength { edge: String, length: f64 },
    #[error("graph is disconnected")]
    Disconnected,
    #[error("graph has no edges")]
    Empty,
    #[error("duplicate id `{0}`")]
    DuplicateId(String),
    #[error("edge `{edge}` of length {length} is not a multiple of l0 = {l0}")]
    Incommensurate {
        edge: String,
        length: f64,
        l0: f64,
    },
    #[error("graph is not equilateral with unit edges")]
    NotUnitEquilateral,
    #[error("profile length {profile} does not match edge length {edge}")]
    ProfileLengthMismatch { profile: f64, edge: f64 },
}

#[derive(Debug, Clone)]
pub struct Edge {
    pub id: String,
    /// Orientation is fixed by (tail, head); the coordinate x runs tail -> head.
    pub tail: usize,
    pub head: usize,
    pub length: f64,
    pub damping: CoefficientProfile,
    pub potential: CoefficientProfile,
}

/// One endpoint of an edge; the flower-model slot unit.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum End {
    Tail,
    Head,
}

#[derive(Debug, Clone)]
pub struct MetricGraph {
    vertex_ids: Vec<String>,
    edges: Vec<Edge>,
}

#[derive(Debug, Clone)]
pub struct ValidationReport {
    pub errors: Vec<GraphError>,
    pub degrees: Vec<usize>,
    pub boundary_vertices: Vec<String>,
    pub total_length: f64,
    pub connected: bool,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.errors.is_empty()
    }
}

impl MetricGraph {
    /// Build a graph; edges are sorted by id and vertices keep input order.
    pub fn new(vertex_ids: Vec<String>, mut edges: Vec<Edge>) -> Result<MetricGraph, GraphError> {
        let mut seen = std::collections::HashSet::new();
        for v in &vertex_ids {
            if !seen.insert(v.clone()) {
                return Err(GraphError::DuplicateId(v.clone()));
            }
        }
        let mut eseen = std::collections::HashSet::new();
        for e in &edges {
            if !eseen.insert(e.id.clone()) {
                return Err(GraphError::DuplicateId(e.id.clone()));
            }
            if (e.damping.length() - e.length).abs() > 1e-12 * e.length.max(1.0) {
                return Err(GraphError::ProfileLengthMismatch {
                    profile: e.damping.length(),
                    edge: e.length,
                });
            }
            if (e.potential.length() - e.length).abs() > 1e-12 * e.length.max(1.0) {
                return Err(GraphError::ProfileLengthMismatch {
                    profile: e.potential.length(),
                    edge: e.length,
                });
            }
        }
        edges.sort_by(|a, b| a.id.cmp(&b.id));
        Ok(MetricGraph { vertex_ids, edges })
    }

    pub fn n_vertices(&self) -> usize {
        self.vertex_ids.len()
    }

    pub fn n_edges(&self) -> usize {
        self.edges.len()
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn vertex_ids(&self) -> &[String] {
        &self.vertex_ids
    }

    pub fn vertex_index(&self, id: &str) -> Option<usize> {
        self.vertex_ids.iter().position(|v| v == id)
    }

    /// Slot index of (edge, end): tail slot before head slot, edges in id order.
    pub fn slot(&self, edge: usize, end: End) -> usize {
        2 * edge
            + match end {
                End::Tail => 0,
                End::Head => 1,
            }
    }

    pub fn slot_vertex(&self, slot: usize) -> usize {
        let e = &self.edges[slot / 2];
        if slot % 2 == 0 {
            e.tail
        } else {
            e.head
        }
    }

    /// Slots incident to each vertex, in slot order (deterministic).
    pub fn vertex_slots(&self) -> Vec<Vec<usize>> {
        let mut out = vec![Vec::new(); self.n_vertices()];
        for s in 0..2 * self.n_edges() {
            out[self.slot_vertex(s)].push(s);
        }
        out
    }

    pub fn degrees(&self) -> Vec<usize> {
        self.vertex_slots().iter().map(|s| s.len()).collect()
    }

    pub fn total_length(&self) -> f64 {
        self.edges.iter().map(|e| e.length).sum()
    }

    pub fn is_connected(&self) -> bool {
        let n = self.n_vertices();
        if n == 0 {
            return false;
        }
        let mut adj = vec![Vec::new(); n];
        for e in &self.edges {
            adj[e.tail].push(e.head);
            adj[e.head].push(e.tail);
        }
        let mut seen = vec![false; n];
        let mut stack = vec![0usize];
        seen[0] = true;
        let mut count = 1;
        while let Some(v) = stack.pop() {
            for &w in &adj[v] {
                if !seen[w] {
                    seen[w] = true;
                    count += 1;
                    stack.push(w);
                }
            }
        }
        count == n
    }

    pub fn validate(&self) -> ValidationReport {
        let mut errors = Vec::new();
        if self.edges.is_empty() {
            errors.push(GraphError::Empty);
        }
        for e in &self.edges {
            if !(e.length > 0.0) {
                errors.push(GraphError::NonpositiveLength {
                    edge: e.id.clone(),
                    length: e.length,
                });
            }
            for v in [e.tail, e.head] {
                if v >= self.n_vertices() {
                    errors.push(GraphError::DanglingEndpoint {
                        edge: e.id.clone(),
                        vertex: format!("#{v}"),
                    });
                }
            }
        }
        let connected = errors.is_empty() && self.is_connected();
        if errors.is_empty() && !connected {
            errors.push(GraphError::Disconnected);
        }
        let degrees = self.degrees();
        let boundary_vertices = degrees
            .iter()
            .enumerate()
            .filter(|(_, &d)| d == 1)
            .map(|(i, _)| self.vertex_ids[i].clone())
            .collect();
        ValidationReport {
            errors,
            degrees,
            boundary_vertices,
            total_length: self.total_length(),
            connected,
        }
    }

    pub fn is_equilateral(&self, tol: f64) -> Option<f64> {
        let l0 = self.edges.first()?.length;
        for e in &self.edges {
            if (e.length - l0).abs() > tol * l0 {
                return None;
            }
        }
        Some(l0)
    }

    /// Vertex 2-coloring test by BFS; call on an equilateral graph so that
    /// "odd cycle" means "odd loop length".
    pub fn is_bipartite(&self) -> bool {
        let n = self.n_vertices();
        let mut adj = vec![Vec::new(); n];
        for e in &self.edges {
            if e.tail == e.head {
                return false; // self-loop is an odd cycle of length 1
            }
            adj[e.tail].push(e.head);
            adj[e.head].push(e.tail);
        }
        let mut color = vec![-1i8; n];
        for start in 0..n {
            if color[start] != -1 {
                continue;
            }
            color[start] = 0;
            let mut queue = std::collections::VecDeque::from([start]);
            while let Some(v) = queue.pop_front() {
                for &w in &adj[v] {
                    if color[w] == -1 {
                        color[w] = 1 - color[v];
                        queue.push_back(w);
                    } else if color[w] == color[v] {
                        return false;
                    }
                }
            }
        }
        true
    }

    /// (min, max) of the per-edge damping averages.
    pub fn average_damping_bounds(&self) -> (f64, f64) {
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for e in &self.edges {
            lo = lo.min(e.damping.average());
            hi = hi.max(e.damping.average());
        }
        (lo, hi)
    }

    pub fn directed_double(&self) -> DirectedDouble {
        DirectedDouble::new(self)
    }

    /// Split every edge into `length / l0` unit pieces of length l0,
    /// inserting degree-2 vertices. New vertices and sub-edges derive their
    /// ids from the parent edge.
    pub fn subdivide_to_equilateral(
        &self,
        l0: f64,
    ) -> Result<(MetricGraph, SubdivisionMap), GraphError> {
        assert!(l0 > 0.0);
        let mut vertex_ids = self.vertex_ids.clone();
        let mut edges = Vec::new();
        let n_original = vertex_ids.len();
        for e in &self.edges {
            let ratio = e.length / l0;
            let m = ratio.round();
            if m < 1.0 || (ratio - m).abs() > 1e-9 * ratio {
                return Err(GraphError::Incommensurate {
                    edge: e.id.clone(),
                    length: e.length,
                    l0,
                });
            }
            let m = m as usize;
            let mut prev = e.tail;
            for k in 0..m {
                let next = if k + 1 == m {
                    e.head
                } else {
                    vertex_ids.push(format!("{}.v{}", e.id, k + 1));
                    vertex_ids.len() - 1
                };
                let x0 = e.length * k as f64 / m as f64;
                let x1 = e.length * (k + 1) as f64 / m as f64;
                edges.push(Edge {
                    id: format!("{}.{:04}", e.id, k),
                    tail: prev,
                    head: next,
                    length: l0,
                    damping: e.damping.restrict(x0, x1),
                    potential: e.potential.restrict(x0, x1),
                });
                prev = next;
            }
        }
        let graph = MetricGraph::new(vertex_ids, edges)?;
        Ok((graph, SubdivisionMap { n_original }))
    }

    /// Geometric part of the scaling lemma: every length multiplied by
    /// `factor`, damping divided by `factor`, potential by `factor^2`.
    /// The coupling transformation lives in the coupling module.
    pub fn scaled_geometry(&self, factor: f64) -> MetricGraph {
        assert!(factor > 0.0);
        let edges = self
            .edges
            .iter()
            .map(|e| Edge {
                id: e.id.clone(),
                tail: e.tail,
                head: e.head,
                length: e.length * factor,
                damping: e.damping.scaled(factor, 1),
                potential: e.potential.scaled(factor, 2),
            })
            .collect();
        MetricGraph::new(self.vertex_ids.clone(), edges).expect("scaling preserves validity")
    }

    /// Flip the orientation of one edge (testing hook; the spectrum must not
    /// depend on it).
    pub fn with_flipped_edge(&self, edge: usize) -> MetricGraph {
        let mut edges = self.edges.clone();
        let e = &mut edges[edge];
        std::mem::swap(&mut e.tail, &mut e.head);
        e.damping = e.damping.reversed();
        e.potential = e.potential.reversed();
        MetricGraph::new(self.vertex_ids.clone(), edges).expect("flip preserves validity")
    }
}

/// Book-keeping from subdivision: vertices `0..n_original` are the original
/// ones, the rest were inserted (and get standard coupling).
#[derive(Debug, Clone, Copy)]
pub struct SubdivisionMap {
    pub n_original: usize,
}

/// The directed double cover: each edge j becomes directed edges j (tail->head)
/// and j + N (head->tail); reversal is d -> (d + N) mod 2N.
#[derive(Debug, Clone)]
pub struct DirectedDouble {
    pub n_edges: usize,
    pub start: Vec<usize>,
    pub end: Vec<usize>,
    /// Directed edges leaving each vertex, ascending.
    pub out_edges: Vec<Vec<usize>>,
    /// Directed edges entering each vertex, ascending.
    pub in_edges: Vec<Vec<usize>>,
}

impl DirectedDouble {
    pub fn new(graph: &MetricGraph) -> DirectedDouble {
        let n = graph.n_edges();
        let nv = graph.n_vertices();
        let mut start = Vec::with_capacity(2 * n);
        let mut end = Vec::with_capacity(2 * n);
        for e in graph.edges() {
            start.push(e.tail);
            end.push(e.head);
        }
        for e in graph.edges() {
            start.push(e.head);
            end.push(e.tail);
        }
        let mut out_edges = vec![Vec::new(); nv];
        let mut in_edges = vec![Vec::new(); nv];
        for d in 0..2 * n {
            out_edges[start[d]].push(d);
            in_edges[end[d]].push(d);
        }
        DirectedDouble {
            n_edges: n,
            start,
            end,
            out_edges,
            in_edges,
        }
    }

    pub fn n_directed(&self) -> usize {
        2 * self.n_edges
    }

    pub fn reversal(&self, d: usize) -> usize {
        (d + self.n_edges) % (2 * self.n_edges)
    }

    /// Undirected parent edge of a directed edge.
    pub fn parent(&self, d: usize) -> usize {
        d % self.n_edges
    }
}

/// Find a common unit l0 such that every length is an integer multiple,
/// by continued-fraction rationalization of the ratios to the shortest
/// edge. Denominators are capped at 10^4, relative tolerance 1e-9.
pub fn commensurate_unit(lengths: &[f64]) -> Option<f64> {
    const QCAP: u64 = 10_000;
    const LCM_CAP: u64 = 1_000_000;
    let lmin = lengths.iter().cloned().fold(f64::INFINITY, f64::min);
    if !(lmin > 0.0) {
        return None;
    }
    let mut lcm_q: u64 = 1;
    for &l in lengths {
        let (_, q) = rationalize(l / lmin, QCAP, 1e-9)?;
        lcm_q = lcm(lcm_q, q);
        if lcm_q > LCM_CAP {
            return None;
        }
    }
    let l0 = lmin / lcm_q as f64;
    for &l in lengths {
        let m = (l / l0).round();
        if m < 1.0 || (l / l0 - m).abs() > 1e-9 * (l / l0) {
            return None;
        }
    }
    Some(l0)
}

/// Best rational approximation p/q to x with q <= qcap, if it meets rel_tol.
fn rationalize(x: f64, qcap: u64, rel_tol: f64) -> Option<(u64, u64)> {
    assert!(x > 0.0);
    let (mut p0, mut q0, mut p1, mut q1) = (0u64, 1u64, 1u64, 0u64);
    let mut frac = x;
    for _ in 0..64 {
        let a = frac.floor();
        if a >= u64::MAX as f64 {
            break;
        }
        let a_u = a as u64;
        let p2 = a_u.checked_mul(p1).and_then(|v| v.checked_add(p0));
        let q2 = a_u.checked_mul(q1).and_then(|v| v.checked_add(q0));
        let (Some(p2), Some(q2)) = (p2, q2) else {
            break;
        };
        if q2 > qcap {
            break;
        }
        p0 = p1;
        q0 = q1;
        p1 = p2;
        q1 = q2;
        let rem = frac - a;
        if rem.abs() < 1e-12 {
            break;
        }
        frac = 1.0 / rem;
    }
    if q1 == 0 {
        return None;
    }
    let approx = p1 as f64 / q1 as f64;
    if (approx - x).abs() <= rel_tol * x {
        Some((p1, q1))
    } else {
        None
    }
}

fn gcd(a: u64, b: u64) -> u64 {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

fn lcm(a: u64, b: u64) -> u64 {
    a / gcd(a, b) * b
}

#[cfg(test)]
mod tests {
    use super::*;

    pub fn unit_edge(id: &str, tail: usize, head: usize, a: f64) -> Edge {
        Edge {
            id: id.to_string(),
            tail,
            head,
            length: 1.0,
            damping: CoefficientProfile::constant(a, 1.0),
            potential: CoefficientProfile::constant(0.0, 1.0),
        }
    }

    fn names(n: usize) -> Vec<String> {
        (0..n).map(|i| format!("v{i}")).collect()
    }

    /// Example 7.2 shape: loop of 3 unit edges plus a pendant edge.
    fn loop3_pendant(a_pendant: f64, a_loop: f64) -> MetricGraph {
        MetricGraph::new(
            names(4),
            vec![
                unit_edge("e1", 0, 1, a_pendant), // pendant: v0 boundary, v1 center
                unit_edge("e2", 1, 2, a_loop),
                unit_edge("e3", 2, 3, a_loop),
                unit_edge("e4", 3, 1, a_loop),
            ],
        )
        .unwrap()
    }

    #[test]
    fn single_edge_is_valid() {
        let g = MetricGraph::new(names(2), vec![unit_edge("e", 0, 1, 0.0)]).unwrap();
        let r = g.validate();
        assert!(r.is_valid());
        assert_eq!(r.degrees, vec![1, 1]);
        assert_eq!(r.boundary_vertices.len(), 2);
    }

    #[test]
    fn disjoint_edges_are_disconnected() {
        let g = MetricGraph::new(
            names(4),
            vec![unit_edge("e1", 0, 1, 0.0), unit_edge("e2", 2, 3, 0.0)],
        )
        .unwrap();
        let r = g.validate();
        assert!(r.errors.contains(&GraphError::Disconnected));
    }

    #[test]
    fn example_72_degrees_and_length() {
        let g = loop3_pendant(3.0, 0.0);
        let r = g.validate();
        assert!(r.is_valid());
        let mut degs = r.degrees.clone();
        degs.sort();
        assert_eq!(degs, vec![1, 2, 2, 3]);
        assert!((r.total_length - 4.0).abs() < 1e-14);
    }

    #[test]
    fn directed_double_counts_and_reversal() {
        let g = loop3_pendant(3.0, 0.0);
        let d = g.directed_double();
        assert_eq!(d.n_directed(), 8);
        for i in 0..8 {
            assert_eq!(d.reversal(d.reversal(i)), i);
            assert_ne!(d.reversal(i), i);
            assert_eq!(d.start[i], d.end[d.reversal(i)]);
        }
        // 3-star: each boundary vertex has exactly 1 in / 1 out
        let star = MetricGraph::new(
            names(4),
            vec![
                unit_edge("e1", 0, 1, 0.0),
                unit_edge("e2", 0, 2, 0.0),
                unit_edge("e3", 0, 3, 0.0),
            ],
        )
        .unwrap();
        let ds = star.directed_double();
        assert_eq!(ds.n_directed(), 6);
        for v in 1..4 {
            assert_eq!(ds.out_edges[v].len(), 1);
            assert_eq!(ds.in_edges[v].len(), 1);
        }
    }

    #[test]
    fn subdivision_of_length_three_edge() {
        let mut e = unit_edge("e", 0, 1, 1.5);
        e.length = 3.0;
        e.damping = CoefficientProfile::constant(1.5, 3.0);
        e.potential = CoefficientProfile::constant(0.0, 3.0);
        let g = MetricGraph::new(names(2), vec![e]).unwrap();
        let (sub, map) = g.subdivide_to_equilateral(1.0).unwrap();
        assert_eq!(sub.n_edges(), 3);
        assert_eq!(sub.n_vertices(), 4);
        assert_eq!(map.n_original, 2);
        assert!(sub.is_equilateral(1e-12).is_some());
        let mut degs = sub.degrees();
        degs.sort();
        assert_eq!(degs, vec![1, 1, 2, 2]);
    }

    #[test]
    fn subdivision_counts_for_star_103() {
        let mut edges = vec![
            unit_edge("e1", 0, 1, 3.0),
            unit_edge("e2", 0, 2, 4.0),
            unit_edge("e3", 0, 3, 5.0),
        ];
        edges[2].length = 1.03;
        edges[2].damping = CoefficientProfile::constant(5.0, 1.03);
        edges[2].potential = CoefficientProfile::constant(0.0, 1.03);
        let g = MetricGraph::new(names(4), edges).unwrap();
        let l0 = commensurate_unit(&[1.0, 1.0, 1.03]).unwrap();
        assert!((l0 - 0.01).abs() < 1e-12);
        let (sub, _) = g.subdivide_to_equilateral(l0).unwrap();
        assert_eq!(sub.n_edges(), 100 + 100 + 103);
    }

    #[test]
    fn incommensurate_length_detected() {
        let mut e = unit_edge("e", 0, 1, 0.0);
        e.length = std::f64::consts::SQRT_2;
        e.damping = CoefficientProfile::constant(0.0, e.length);
        e.potential = CoefficientProfile::constant(0.0, e.length);
        let g = MetricGraph::new(names(2), vec![e]).unwrap();
        assert!(matches!(
            g.subdivide_to_equilateral(0.1),
            Err(GraphError::Incommensurate { .. })
        ));
        assert!(commensurate_unit(&[1.0, std::f64::consts::SQRT_2]).is_none());
    }

    #[test]
    fn bipartite_detection() {
        let loop3 = MetricGraph::new(
            names(3),
            vec![
                unit_edge("e1", 0, 1, 0.0),
                unit_edge("e2", 1, 2, 0.0),
                unit_edge("e3", 2, 0, 0.0),
            ],
        )
        .unwrap();
        assert!(!loop3.is_bipartite());
        let star = MetricGraph::new(
            names(4),
            vec![
                unit_edge("e1", 0, 1, 0.0),
                unit_edge("e2", 0, 2, 0.0),
                unit_edge("e3", 0, 3, 0.0),
            ],
        )
        .unwrap();
        assert!(star.is_bipartite());
        let loop4 = MetricGraph::new(
            names(4),
            vec![
                unit_edge("e1", 0, 1, 0.0),
                unit_edge("e2", 1, 2, 0.0),
                unit_edge("e3", 2, 3, 0.0),
                unit_edge("e4", 3, 0, 0.0),
            ],
        )
        .unwrap();
        assert!(loop4.is_bipartite());
    }

    #[test]
    fn damping_bounds() {
        let g = MetricGraph::new(
            names(3),
            vec![unit_edge("e1", 0, 1, 2.0), unit_edge("e2", 1, 2, 1.0)],
        )
        .unwrap();
        assert_eq!(g.average_damping_bounds(), (1.0, 2.0));
    }

    #[test]
    fn commensurate_unit_examples() {
        assert!((commensurate_unit(&[1.0, 1.0, 1.03]).unwrap() - 0.01).abs() < 1e-12);
        assert!((commensurate_unit(&[1.5, 2.1, 3.1]).unwrap() - 0.1).abs() < 1e-12);
        assert!((commensurate_unit(&[2.0, 3.0]).unwrap() - 1.0).abs() < 1e-12);
        assert!(commensurate_unit(&[1.0, 1.41421356237309]).is_none());
    }
}
