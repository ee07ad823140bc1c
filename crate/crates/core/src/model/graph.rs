use super::{CostParams, NodeId, ServiceArcId, ServiceNetwork};
use std::collections::BTreeMap;

/// Vertex of the transshipment-expanded search graph.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SearchVertex {
    /// Virtual start at the origin.
    Source,
    /// Riding a service-arc; the vertex is "at the head of" the arc.
    Arc(ServiceArcId),
    /// Virtual end at a destination node.
    Sink(NodeId),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SearchEdge {
    /// Vertex at the other end (successor for out-edges, predecessor for
    /// in-edges).
    pub vertex: usize,
    /// Per-unit transshipment cost charged on this edge.
    pub transfer_cost: f64,
}

/// Directed graph over service-arc states.
///
/// An edge `Arc(a) -> Arc(b)` exists when `a` ends where `b` starts and
/// carries the transshipment cost between their services at that node
/// (zero when both belong to the same service). Source edges lead to arcs
/// leaving the origin and every arc has a free edge into the sink of its
/// head node.
#[derive(Debug, Clone)]
pub struct ExpandedGraph {
    vertices: Vec<SearchVertex>,
    out_edges: Vec<Vec<SearchEdge>>,
    in_edges: Vec<Vec<SearchEdge>>,
    sinks: BTreeMap<NodeId, usize>,
    origin: NodeId,
}

impl ExpandedGraph {
    pub const SOURCE: usize = 0;

    #[inline]
    pub fn arc_vertex(id: ServiceArcId) -> usize {
        id.0 + 1
    }

    pub fn build(net: &ServiceNetwork, costs: &CostParams) -> Self {
        let n_arcs = net.service_arcs.len();
        let mut vertices = Vec::with_capacity(n_arcs + net.nodes.len() + 1);
        vertices.push(SearchVertex::Source);
        vertices.extend((0..n_arcs).map(|k| SearchVertex::Arc(ServiceArcId(k))));

        let mut sinks = BTreeMap::new();
        for &node in &net.nodes {
            if node != net.origin && net.service_arcs.iter().any(|a| a.to == node) {
                sinks.insert(node, vertices.len());
                vertices.push(SearchVertex::Sink(node));
            }
        }

        let mut leaving: BTreeMap<NodeId, Vec<usize>> = BTreeMap::new();
        for (k, arc) in net.service_arcs.iter().enumerate() {
            leaving.entry(arc.from).or_default().push(k);
        }

        let mut out_edges = vec![Vec::new(); vertices.len()];
        for &k in leaving.get(&net.origin).into_iter().flatten() {
            out_edges[Self::SOURCE].push(SearchEdge {
                vertex: Self::arc_vertex(ServiceArcId(k)),
                transfer_cost: 0.0,
            });
        }
        for (k, arc) in net.service_arcs.iter().enumerate() {
            let from = Self::arc_vertex(ServiceArcId(k));
            for &next in leaving.get(&arc.to).into_iter().flatten() {
                let next_arc = &net.service_arcs[next];
                out_edges[from].push(SearchEdge {
                    vertex: Self::arc_vertex(ServiceArcId(next)),
                    transfer_cost: costs.transshipment(arc.to, arc.service, next_arc.service),
                });
            }
            if let Some(&sink) = sinks.get(&arc.to) {
                out_edges[from].push(SearchEdge {
                    vertex: sink,
                    transfer_cost: 0.0,
                });
            }
        }

        let mut in_edges = vec![Vec::new(); vertices.len()];
        for (from, edges) in out_edges.iter().enumerate() {
            for edge in edges {
                in_edges[edge.vertex].push(SearchEdge {
                    vertex: from,
                    transfer_cost: edge.transfer_cost,
                });
            }
        }

        Self {
            vertices,
            out_edges,
            in_edges,
            sinks,
            origin: net.origin,
        }
    }

    pub fn len(&self) -> usize {
        self.vertices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vertices.is_empty()
    }

    pub fn vertex(&self, v: usize) -> SearchVertex {
        self.vertices[v]
    }

    /// Out-edges of `v`, ordered by ascending successor vertex.
    pub fn successors(&self, v: usize) -> &[SearchEdge] {
        &self.out_edges[v]
    }

    pub fn predecessors(&self, v: usize) -> &[SearchEdge] {
        &self.in_edges[v]
    }

    pub fn sink(&self, node: NodeId) -> Option<usize> {
        self.sinks.get(&node).copied()
    }

    pub fn edge_count(&self) -> usize {
        self.out_edges.iter().map(Vec::len).sum()
    }

    /// Every source-to-sink path that visits each physical node at most
    /// once, in lexicographic order of service-arc indices, with its
    /// accumulated per-unit transfer cost.
    pub fn simple_paths(
        &self,
        net: &ServiceNetwork,
        destination: NodeId,
    ) -> Vec<(Vec<ServiceArcId>, f64)> {
        let mut found = Vec::new();
        let Some(sink) = self.sink(destination) else {
            return found;
        };
        let mut visited = vec![self.origin];
        let mut path = Vec::new();
        self.walk(net, Self::SOURCE, sink, 0.0, &mut visited, &mut path, &mut found);
        found
    }

    #[allow(clippy::too_many_arguments)]
    fn walk(
        &self,
        net: &ServiceNetwork,
        v: usize,
        sink: usize,
        transfer: f64,
        visited: &mut Vec<NodeId>,
        path: &mut Vec<ServiceArcId>,
        found: &mut Vec<(Vec<ServiceArcId>, f64)>,
    ) {
        for edge in self.successors(v) {
            match self.vertices[edge.vertex] {
                SearchVertex::Sink(_) if edge.vertex == sink => {
                    found.push((path.clone(), transfer + edge.transfer_cost));
                }
                SearchVertex::Arc(id) => {
                    let head = net.service_arcs[id.0].to;
                    if visited.contains(&head) {
                        continue;
                    }
                    if self.vertices[sink] == SearchVertex::Sink(net.service_arcs[id.0].from) {
                        continue;
                    }
                    visited.push(head);
                    path.push(id);
                    self.walk(
                        net,
                        edge.vertex,
                        sink,
                        transfer + edge.transfer_cost,
                        visited,
                        path,
                        found,
                    );
                    path.pop();
                    visited.pop();
                }
                _ => {}
            }
        }
    }
}
