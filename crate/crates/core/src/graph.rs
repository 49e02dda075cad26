//! Causal DAG representation: topological ordering, do-operator mutilation,
//! d-separation, and the local-Markov conditional-independence set.
//!
//! Graphs are immutable after construction and every operation is pure, so
//! shared concurrent reads are safe. Ties are always broken by ascending node
//! id to keep runs reproducible.

use std::cmp::Reverse;
use std::collections::{BTreeMap, BTreeSet, BinaryHeap, VecDeque};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::data::ColumnKind;
use crate::error::{Error, Result};

#[derive(
    Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize,
)]
#[serde(transparent)]
pub struct NodeId(pub u32);

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NodeRole {
    Feature,
    Treatment,
    Outcome,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct NodeSpec {
    pub id: NodeId,
    pub name: String,
    pub role: NodeRole,
    pub kind: ColumnKind,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Edge {
    pub src: NodeId,
    pub dst: NodeId,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub weight: Option<f64>,
}

/// A claimed conditional independence `a ⊥ b | given`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CiStatement {
    pub a: NodeId,
    pub b: NodeId,
    pub given: BTreeSet<NodeId>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct GraphJson {
    nodes: Vec<NodeSpec>,
    edges: Vec<Edge>,
}

impl From<CausalDag> for GraphJson {
    fn from(g: CausalDag) -> Self {
        GraphJson { nodes: g.nodes, edges: g.edges }
    }
}

impl TryFrom<GraphJson> for CausalDag {
    type Error = Error;
    fn try_from(j: GraphJson) -> Result<Self> {
        CausalDag::new(j.nodes, j.edges)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(try_from = "GraphJson", into = "GraphJson")]
pub struct CausalDag {
    nodes: Vec<NodeSpec>,
    edges: Vec<Edge>,
    #[serde(skip)]
    index_of: BTreeMap<NodeId, usize>,
    #[serde(skip)]
    parents: Vec<Vec<usize>>,
    #[serde(skip)]
    children: Vec<Vec<usize>>,
}

impl CausalDag {
    /// Validates node-id uniqueness, edge endpoints, and acyclicity.
    /// Nodes are kept sorted by ascending id.
    pub fn new(mut nodes: Vec<NodeSpec>, edges: Vec<Edge>) -> Result<Self> {
        nodes.sort_by_key(|n| n.id);
        let mut index_of = BTreeMap::new();
        for (i, n) in nodes.iter().enumerate() {
            if index_of.insert(n.id, i).is_some() {
                return Err(Error::DuplicateNode(n.id.0));
            }
        }
        let mut parents = vec![Vec::new(); nodes.len()];
        let mut children = vec![Vec::new(); nodes.len()];
        for e in &edges {
            let s = *index_of.get(&e.src).ok_or(Error::UnknownNode(e.src.0))?;
            let d = *index_of.get(&e.dst).ok_or(Error::UnknownNode(e.dst.0))?;
            if s == d {
                return Err(Error::CycleDetected);
            }
            children[s].push(d);
            parents[d].push(s);
        }
        for v in parents.iter_mut().chain(children.iter_mut()) {
            v.sort_unstable();
            v.dedup();
        }
        let dag = CausalDag { nodes, edges, index_of, parents, children };
        dag.topological_sort()?;
        Ok(dag)
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn nodes(&self) -> &[NodeSpec] {
        &self.nodes
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn node(&self, id: NodeId) -> Result<&NodeSpec> {
        self.index(id).map(|i| &self.nodes[i])
    }

    pub fn node_ids(&self) -> Vec<NodeId> {
        self.nodes.iter().map(|n| n.id).collect()
    }

    fn index(&self, id: NodeId) -> Result<usize> {
        self.index_of.get(&id).copied().ok_or(Error::UnknownNode(id.0))
    }

    pub fn has_edge(&self, src: NodeId, dst: NodeId) -> bool {
        self.edges.iter().any(|e| e.src == src && e.dst == dst)
    }

    pub fn edge_weight(&self, src: NodeId, dst: NodeId) -> Option<f64> {
        self.edges
            .iter()
            .find(|e| e.src == src && e.dst == dst)
            .and_then(|e| e.weight)
    }

    /// Parents in ascending id order.
    pub fn parents_of(&self, id: NodeId) -> Result<Vec<NodeId>> {
        let i = self.index(id)?;
        Ok(self.parents[i].iter().map(|&p| self.nodes[p].id).collect())
    }

    /// Children in ascending id order.
    pub fn children_of(&self, id: NodeId) -> Result<Vec<NodeId>> {
        let i = self.index(id)?;
        Ok(self.children[i].iter().map(|&c| self.nodes[c].id).collect())
    }

    /// Parents of `id` paired with their edge weights; errors if any incoming
    /// edge is unweighted.
    pub fn weighted_parents(&self, id: NodeId) -> Result<Vec<(NodeId, f64)>> {
        let i = self.index(id)?;
        let mut out = Vec::new();
        for &p in &self.parents[i] {
            let pid = self.nodes[p].id;
            let w = self
                .edge_weight(pid, id)
                .ok_or(Error::MissingWeights { src: pid.0, dst: id.0 })?;
            out.push((pid, w));
        }
        Ok(out)
    }

    /// Proper descendants (excludes `id`).
    pub fn descendants_of(&self, id: NodeId) -> Result<BTreeSet<NodeId>> {
        let start = self.index(id)?;
        Ok(self
            .reach(start, &self.children)
            .into_iter()
            .map(|i| self.nodes[i].id)
            .collect())
    }

    /// Proper ancestors (excludes `id`).
    pub fn ancestors_of(&self, id: NodeId) -> Result<BTreeSet<NodeId>> {
        let start = self.index(id)?;
        Ok(self
            .reach(start, &self.parents)
            .into_iter()
            .map(|i| self.nodes[i].id)
            .collect())
    }

    fn reach(&self, start: usize, adj: &[Vec<usize>]) -> Vec<usize> {
        let mut seen = vec![false; self.nodes.len()];
        let mut stack = adj[start].clone();
        let mut out = Vec::new();
        while let Some(v) = stack.pop() {
            if std::mem::replace(&mut seen[v], true) {
                continue;
            }
            out.push(v);
            stack.extend_from_slice(&adj[v]);
        }
        out
    }

    /// The unique (treatment, outcome) role pair required for selection.
    pub fn selection_roles(&self) -> Result<(NodeId, NodeId)> {
        let treatments: Vec<NodeId> = self
            .nodes
            .iter()
            .filter(|n| n.role == NodeRole::Treatment)
            .map(|n| n.id)
            .collect();
        let outcomes: Vec<NodeId> = self
            .nodes
            .iter()
            .filter(|n| n.role == NodeRole::Outcome)
            .map(|n| n.id)
            .collect();
        if treatments.len() == 1 && outcomes.len() == 1 {
            Ok((treatments[0], outcomes[0]))
        } else {
            Err(Error::MissingRoles { treatments: treatments.len(), outcomes: outcomes.len() })
        }
    }

    /// Kahn topological sort; ties broken by ascending node id.
    pub fn topological_sort(&self) -> Result<Vec<NodeId>> {
        let n = self.nodes.len();
        let mut indeg: Vec<usize> = self.parents.iter().map(|p| p.len()).collect();
        let mut heap: BinaryHeap<Reverse<(NodeId, usize)>> = BinaryHeap::new();
        for i in 0..n {
            if indeg[i] == 0 {
                heap.push(Reverse((self.nodes[i].id, i)));
            }
        }
        let mut order = Vec::with_capacity(n);
        while let Some(Reverse((id, i))) = heap.pop() {
            order.push(id);
            for &c in &self.children[i] {
                indeg[c] -= 1;
                if indeg[c] == 0 {
                    heap.push(Reverse((self.nodes[c].id, c)));
                }
            }
        }
        if order.len() == n {
            Ok(order)
        } else {
            Err(Error::CycleDetected)
        }
    }

    /// Interventional graph: all edges into `treatment` removed, everything
    /// else untouched.
    pub fn mutilate(&self, treatment: NodeId) -> Result<CausalDag> {
        self.index(treatment)?;
        let edges = self
            .edges
            .iter()
            .filter(|e| e.dst != treatment)
            .cloned()
            .collect();
        CausalDag::new(self.nodes.clone(), edges)
    }

    /// d-separation of `a` and `b` given `given`, by reachability over active
    /// trails. Callers must uphold `a != b` and `a, b ∉ given`.
    pub fn d_separated(&self, a: NodeId, b: NodeId, given: &BTreeSet<NodeId>) -> Result<bool> {
        let ai = self.index(a)?;
        let bi = self.index(b)?;
        debug_assert!(ai != bi, "d_separated: a and b must differ");
        debug_assert!(
            !given.contains(&a) && !given.contains(&b),
            "d_separated: endpoints must not be conditioned on"
        );
        let n = self.nodes.len();
        let mut in_z = vec![false; n];
        for id in given {
            in_z[self.index(*id)?] = true;
        }
        // opens_collider[v]: v or a descendant of v is conditioned on,
        // i.e. v is in given or is an ancestor of a conditioned node.
        let mut opens_collider = in_z.clone();
        {
            let mut stack: Vec<usize> = (0..n).filter(|&i| in_z[i]).collect();
            while let Some(v) = stack.pop() {
                for &p in &self.parents[v] {
                    if !opens_collider[p] {
                        opens_collider[p] = true;
                        stack.push(p);
                    }
                }
            }
        }

        // Trail states: arrived moving down an edge (from a parent) or up an
        // edge (from a child).
        const DOWN: usize = 0;
        const UP: usize = 1;
        let mut visited = vec![[false; 2]; n];
        let mut queue = VecDeque::new();
        queue.push_back((ai, UP));
        visited[ai][UP] = true;
        while let Some((v, dir)) = queue.pop_front() {
            if v == bi {
                return Ok(false);
            }
            let push = |queue: &mut VecDeque<(usize, usize)>,
                            visited: &mut Vec<[bool; 2]>,
                            w: usize,
                            d: usize| {
                if !visited[w][d] {
                    visited[w][d] = true;
                    queue.push_back((w, d));
                }
            };
            match dir {
                UP => {
                    if !in_z[v] {
                        for &p in &self.parents[v] {
                            push(&mut queue, &mut visited, p, UP);
                        }
                        for &c in &self.children[v] {
                            push(&mut queue, &mut visited, c, DOWN);
                        }
                    }
                }
                _ => {
                    if !in_z[v] {
                        for &c in &self.children[v] {
                            push(&mut queue, &mut visited, c, DOWN);
                        }
                    }
                    if opens_collider[v] {
                        for &p in &self.parents[v] {
                            push(&mut queue, &mut visited, p, UP);
                        }
                    }
                }
            }
        }
        Ok(true)
    }

    /// Local Markov statements: for every ordered pair `(v, u)` with `u` a
    /// non-descendant non-parent of `v`, claim `v ⊥ u | parents(v)`.
    /// Statements are emitted in ascending (v, u) id order.
    pub fn local_markov_set(&self) -> Vec<CiStatement> {
        let ids = self.node_ids();
        let mut out = Vec::new();
        for &v in &ids {
            let parents: BTreeSet<NodeId> =
                self.parents_of(v).expect("node exists").into_iter().collect();
            let desc = self.descendants_of(v).expect("node exists");
            for &u in &ids {
                if u == v || parents.contains(&u) || desc.contains(&u) {
                    continue;
                }
                out.push(CiStatement { a: v, b: u, given: parents.clone() });
            }
        }
        out
    }

    pub fn to_json_string(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json_str(s: &str) -> Result<CausalDag> {
        Ok(serde_json::from_str(s)?)
    }
}

/// Convenience constructor used across the crate and its tests: nodes named
/// by `names`, default feature role, continuous kind, edges given as
/// `(src, dst, weight)` index triples into `names`.
pub fn dag_from_parts(
    names: &[&str],
    roles: &[(usize, NodeRole)],
    kinds: &[(usize, ColumnKind)],
    edges: &[(usize, usize, Option<f64>)],
) -> Result<CausalDag> {
    let mut nodes: Vec<NodeSpec> = names
        .iter()
        .enumerate()
        .map(|(i, name)| NodeSpec {
            id: NodeId(i as u32),
            name: (*name).to_string(),
            role: NodeRole::Feature,
            kind: ColumnKind::Continuous,
        })
        .collect();
    for &(i, role) in roles {
        nodes[i].role = role;
    }
    for &(i, kind) in kinds {
        nodes[i].kind = kind;
    }
    let edges = edges
        .iter()
        .map(|&(s, d, w)| Edge { src: NodeId(s as u32), dst: NodeId(d as u32), weight: w })
        .collect();
    CausalDag::new(nodes, edges)
}
