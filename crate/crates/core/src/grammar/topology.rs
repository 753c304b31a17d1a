//! Structural queries over an expanded hand graph: finger discovery,
//! attachment, chain shape and connectivity.

use std::collections::{BTreeSet, VecDeque};

use crate::model::{HandGraph, NodeKind};

/// One finger: a connected component of the graph with the palm removed that
/// touches the palm.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FingerChain {
    /// Node indices in the component, in discovery order from the palm.
    pub nodes: Vec<usize>,
    /// Number of palm edges landing in this component.
    pub palm_edges: usize,
    /// Mount/connector nodes between the palm and the first joint or link.
    pub mounts_before_chain: usize,
    /// Joint/link kinds in path order from the palm, or `None` when the
    /// joint/link subgraph branches.
    pub chain: Option<Vec<NodeKind>>,
    pub joints: usize,
    pub links: usize,
}

impl FingerChain {
    pub fn alternates_and_ends_in_joint(&self) -> bool {
        let Some(chain) = &self.chain else {
            return false;
        };
        if chain.last() != Some(&NodeKind::Joint) {
            return false;
        }
        chain.windows(2).all(|w| w[0] != w[1])
    }
}

#[derive(Debug, Clone)]
pub struct Topology {
    pub adjacency: Vec<Vec<usize>>,
    pub palms: Vec<usize>,
    pub fingers: Vec<FingerChain>,
    /// Nodes not reachable from the (first) palm.
    pub unreachable: Vec<usize>,
}

impl Topology {
    pub fn of(graph: &HandGraph) -> Topology {
        let n = graph.nodes.len();
        let index = |id: &str| graph.nodes.iter().position(|node| node.id == id);
        let mut adjacency = vec![Vec::new(); n];
        for e in &graph.edges {
            if let (Some(a), Some(b)) = (index(&e.a), index(&e.b)) {
                adjacency[a].push(b);
                adjacency[b].push(a);
            }
        }
        let palms: Vec<usize> = (0..n)
            .filter(|&i| graph.nodes[i].kind == NodeKind::Palm)
            .collect();

        let root = palms.first().copied().unwrap_or(0);
        let reachable = if n == 0 { BTreeSet::new() } else { bfs(&adjacency, root, |_| true) };
        let unreachable = (0..n).filter(|i| !reachable.contains(i)).collect();

        let mut fingers = Vec::new();
        if let Some(&palm) = palms.first() {
            let mut assigned = BTreeSet::new();
            for &start in &adjacency[palm] {
                if palms.contains(&start) || assigned.contains(&start) {
                    continue;
                }
                let comp = bfs_ordered(&adjacency, start, |i| !palms.contains(&i));
                assigned.extend(comp.iter().copied());
                fingers.push(analyse_finger(graph, &adjacency, palm, &palms, comp));
            }
        }
        Topology {
            adjacency,
            palms,
            fingers,
            unreachable,
        }
    }

    pub fn finger_count(&self) -> usize {
        self.fingers.len()
    }
}

fn bfs(adjacency: &[Vec<usize>], start: usize, allow: impl Fn(usize) -> bool) -> BTreeSet<usize> {
    bfs_ordered(adjacency, start, allow).into_iter().collect()
}

fn bfs_ordered(adjacency: &[Vec<usize>], start: usize, allow: impl Fn(usize) -> bool) -> Vec<usize> {
    let mut seen = vec![false; adjacency.len()];
    let mut order = Vec::new();
    let mut queue = VecDeque::from([start]);
    seen[start] = true;
    while let Some(u) = queue.pop_front() {
        order.push(u);
        for &v in &adjacency[u] {
            if !seen[v] && allow(v) {
                seen[v] = true;
                queue.push_back(v);
            }
        }
    }
    order
}

fn analyse_finger(
    graph: &HandGraph,
    adjacency: &[Vec<usize>],
    palm: usize,
    palms: &[usize],
    nodes: Vec<usize>,
) -> FingerChain {
    let kind = |i: usize| graph.nodes[i].kind;
    let members: BTreeSet<usize> = nodes.iter().copied().collect();
    let palm_edges = adjacency[palm].iter().filter(|v| members.contains(v)).count();
    let joints = nodes.iter().filter(|&&i| kind(i) == NodeKind::Joint).count();
    let links = nodes.iter().filter(|&&i| kind(i) == NodeKind::Link).count();

    // Shortest path from the attachment node to the first joint/link.
    let attach = nodes[0];
    let is_chain = |i: usize| matches!(kind(i), NodeKind::Joint | NodeKind::Link);
    let mut parent = vec![usize::MAX; adjacency.len()];
    let mut queue = VecDeque::from([attach]);
    parent[attach] = attach;
    let mut chain_start = None;
    while let Some(u) = queue.pop_front() {
        if is_chain(u) {
            chain_start = Some(u);
            break;
        }
        for &v in &adjacency[u] {
            if parent[v] == usize::MAX && members.contains(&v) && !palms.contains(&v) {
                parent[v] = u;
                queue.push_back(v);
            }
        }
    }
    let is_mount = |i: usize| matches!(kind(i), NodeKind::Mount | NodeKind::Connector);
    let mounts_before_chain = match chain_start {
        Some(end) => {
            let mut count = 0;
            let mut cur = end;
            loop {
                if is_mount(cur) {
                    count += 1;
                }
                if cur == attach {
                    break;
                }
                cur = parent[cur];
            }
            count
        }
        None => nodes.iter().filter(|&&i| is_mount(i)).count(),
    };

    let chain = chain_start.and_then(|s| walk_chain(graph, adjacency, &members, s));
    FingerChain {
        nodes,
        palm_edges,
        mounts_before_chain,
        chain,
        joints,
        links,
    }
}

/// Walks the joint/link subgraph from `start`; `None` if it is not a simple
/// path beginning at `start` that covers every joint/link of the finger.
fn walk_chain(
    graph: &HandGraph,
    adjacency: &[Vec<usize>],
    members: &BTreeSet<usize>,
    start: usize,
) -> Option<Vec<NodeKind>> {
    let kind = |i: usize| graph.nodes[i].kind;
    let in_chain = |i: usize| members.contains(&i) && matches!(kind(i), NodeKind::Joint | NodeKind::Link);
    let total = members.iter().filter(|&&i| in_chain(i)).count();
    let neighbours = |u: usize| -> BTreeSet<usize> {
        adjacency[u].iter().copied().filter(|&v| v != u && in_chain(v)).collect()
    };
    if neighbours(start).len() > 1 {
        return None;
    }
    let mut out = vec![kind(start)];
    let mut visited = BTreeSet::from([start]);
    let mut cur = start;
    loop {
        let next: Vec<usize> = neighbours(cur).into_iter().filter(|v| !visited.contains(v)).collect();
        match next.as_slice() {
            [] => break,
            [v] => {
                if neighbours(*v).len() > 2 {
                    return None;
                }
                visited.insert(*v);
                out.push(kind(*v));
                cur = *v;
            }
            _ => return None,
        }
    }
    (out.len() == total).then_some(out)
}
