//! Taint propagation from view sources to registered sinks.
//!
//! The analysis is flow-insensitive inside a method, field-based (one cell
//! per field signature, base objects ignored) and context-insensitive across
//! calls. Every statement contributes its edges regardless of order, and a
//! leak is the shortest labeled path from a source to a sink operand.

use std::collections::{BTreeMap, HashMap, HashSet};

use serde::{Deserialize, Serialize};

use crate::ir::{resolve_call, AppBundle, Atom, FieldSig, MethodBody, Reg, ResolvedTarget, StmtId, StmtKind};
use crate::pi::PiKind;
use crate::sourcesink::{Position, SinkRegistry, SinkSpec, SourcePoint};

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct MethodKey {
    pub class: String,
    pub sub_signature: String,
}

impl MethodKey {
    pub fn of(body: &MethodBody) -> Self {
        MethodKey {
            class: body.sig.declaring_class.clone(),
            sub_signature: body.sig.sub_signature(),
        }
    }

    pub fn of_stmt(id: &StmtId) -> Self {
        MethodKey {
            class: id.class.clone(),
            sub_signature: id.method.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum TaintNode {
    Register { method: MethodKey, reg: Reg },
    FieldCell(FieldSig),
    /// A sink call site.
    StmtNode(StmtId),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Edge {
    pub from: usize,
    pub to: usize,
    /// The statement inducing the edge.
    pub label: StmtId,
}

/// A call site matching at least one sink spec, with the graph node of
/// each operand that is a register.
#[derive(Debug, Clone)]
pub struct SinkSite {
    pub stmt: StmtId,
    pub specs: Vec<SinkSpec>,
    pub operands: BTreeMap<Position, usize>,
}

#[derive(Debug, Clone)]
pub struct Seed {
    pub source: SourcePoint,
    /// Register node receiving the view; absent when the call result is
    /// discarded.
    pub node: Option<usize>,
}

#[derive(Debug, Clone, Default)]
pub struct TaintGraph {
    nodes: Vec<TaintNode>,
    index: HashMap<TaintNode, usize>,
    edges: Vec<Edge>,
    edge_set: HashSet<(usize, usize, StmtId)>,
    out: Vec<Vec<usize>>,
    pub seeds: Vec<Seed>,
    pub sinks: Vec<SinkSite>,
}

impl TaintGraph {
    pub fn nodes(&self) -> &[TaintNode] {
        &self.nodes
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn node_id(&self, node: &TaintNode) -> Option<usize> {
        self.index.get(node).copied()
    }

    pub fn out_edges(&self, node: usize) -> impl Iterator<Item = &Edge> {
        self.out[node].iter().map(|&e| &self.edges[e])
    }

    fn intern(&mut self, node: TaintNode) -> usize {
        if let Some(&i) = self.index.get(&node) {
            return i;
        }
        let i = self.nodes.len();
        self.nodes.push(node.clone());
        self.index.insert(node, i);
        self.out.push(Vec::new());
        i
    }

    fn reg(&mut self, method: &MethodKey, reg: &Reg) -> usize {
        self.intern(TaintNode::Register {
            method: method.clone(),
            reg: reg.clone(),
        })
    }

    fn add_edge(&mut self, from: usize, to: usize, label: &StmtId) {
        if self.edge_set.insert((from, to, label.clone())) {
            self.out[from].push(self.edges.len());
            self.edges.push(Edge {
                from,
                to,
                label: label.clone(),
            });
        }
    }
}

/// Build the propagation graph for a bundle.
///
/// Edge rules: atom and cast assignments copy operand to destination;
/// field reads and writes go through the field's cell; calls resolved in
/// the bundle bind arguments to parameters, the receiver to `this`, and
/// returned registers to the call result; opaque calls taint the result
/// from the receiver and every argument, and the receiver from every
/// argument. Sink operands get an edge into the sink's statement node.
pub fn build_graph(bundle: &AppBundle, sources: &[SourcePoint], registry: &SinkRegistry) -> TaintGraph {
    let mut g = TaintGraph::default();
    for method in bundle.methods() {
        let mk = MethodKey::of(method);
        for stmt in &method.statements {
            let id = &stmt.id;
            match &stmt.kind {
                StmtKind::AssignAtom { dst, src } => {
                    if let Atom::Reg(r) = src {
                        let (a, b) = (g.reg(&mk, r), g.reg(&mk, dst));
                        g.add_edge(a, b, id);
                    }
                }
                StmtKind::AssignCast { dst, src, .. } => {
                    let (a, b) = (g.reg(&mk, src), g.reg(&mk, dst));
                    g.add_edge(a, b, id);
                }
                StmtKind::FieldRead { dst, field, .. } => {
                    let a = g.intern(TaintNode::FieldCell(field.clone()));
                    let b = g.reg(&mk, dst);
                    g.add_edge(a, b, id);
                }
                StmtKind::FieldWrite { field, value, .. } => {
                    if let Atom::Reg(r) = value {
                        let a = g.reg(&mk, r);
                        let b = g.intern(TaintNode::FieldCell(field.clone()));
                        g.add_edge(a, b, id);
                    }
                }
                StmtKind::Invoke { dst, expr } => {
                    let arg_regs: Vec<(usize, &Reg)> =
                        expr.args.iter().enumerate().filter_map(|(i, a)| a.as_reg().map(|r| (i, r))).collect();
                    match resolve_call(expr, bundle) {
                        ResolvedTarget::InBundle(callee) => {
                            let ck = MethodKey::of(callee);
                            for &(i, r) in &arg_regs {
                                let (a, b) = (g.reg(&mk, r), g.reg(&ck, &callee.params[i]));
                                g.add_edge(a, b, id);
                            }
                            if let (Some(recv), false) = (&expr.receiver, callee.is_static) {
                                let (a, b) = (g.reg(&mk, recv), g.reg(&ck, &Reg::this()));
                                g.add_edge(a, b, id);
                            }
                            if let Some(d) = dst {
                                for ret in &callee.statements {
                                    if let StmtKind::Return { value: Some(Atom::Reg(r)) } = &ret.kind {
                                        let (a, b) = (g.reg(&ck, r), g.reg(&mk, d));
                                        g.add_edge(a, b, &ret.id);
                                    }
                                }
                            }
                        }
                        ResolvedTarget::Opaque => {
                            let recv = expr.receiver.as_ref().map(|r| g.reg(&mk, r));
                            let args: Vec<usize> = arg_regs.iter().map(|&(_, r)| g.reg(&mk, r)).collect();
                            if let Some(d) = dst {
                                let d = g.reg(&mk, d);
                                for &a in args.iter().chain(recv.iter()) {
                                    g.add_edge(a, d, id);
                                }
                            }
                            if let Some(rv) = recv {
                                for &a in &args {
                                    g.add_edge(a, rv, id);
                                }
                            }
                        }
                    }
                    let specs: Vec<SinkSpec> = registry.lookup(&expr.method).into_iter().cloned().collect();
                    if !specs.is_empty() {
                        let sink_node = g.intern(TaintNode::StmtNode(id.clone()));
                        let mut operands = BTreeMap::new();
                        for pos in specs.iter().flat_map(|s| s.positions.iter()) {
                            let reg = match pos {
                                Position::Recv => expr.receiver.as_ref(),
                                Position::Arg(i) => expr.args.get(*i).and_then(Atom::as_reg),
                            };
                            if let Some(r) = reg {
                                let n = g.reg(&mk, r);
                                operands.insert(*pos, n);
                                g.add_edge(n, sink_node, id);
                            }
                        }
                        g.sinks.push(SinkSite {
                            stmt: id.clone(),
                            specs,
                            operands,
                        });
                    }
                }
                StmtKind::Return { .. } => {}
            }
        }
    }
    for source in sources {
        let node = source
            .result
            .as_ref()
            .map(|r| g.reg(&MethodKey::of_stmt(&source.stmt), r));
        g.seeds.push(Seed {
            source: source.clone(),
            node,
        });
    }
    g
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Party {
    First,
    Third,
}

/// Who owns a piece of code, judged by the class's package.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CodeOwner {
    Platform,
    App,
    ThirdParty,
}

const PLATFORM_PREFIXES: &[&str] = &["android.", "androidx.", "java.", "javax.", "kotlin.", "kotlinx.", "dalvik."];

/// `a.b` for `a.b.c.d`; the whole package when it has fewer segments.
pub fn org_prefix(app_package: &str) -> &str {
    match app_package.match_indices('.').nth(1) {
        Some((i, _)) => &app_package[..i],
        None => app_package,
    }
}

pub fn code_owner(class: &str, app_package: &str) -> CodeOwner {
    if PLATFORM_PREFIXES.iter().any(|p| class.starts_with(p)) {
        return CodeOwner::Platform;
    }
    let package = class.rsplit_once('.').map_or("", |(p, _)| p);
    let org = org_prefix(app_package);
    let first = package == app_package
        || package == org
        || package.strip_prefix(org).is_some_and(|rest| rest.starts_with('.'));
    if first {
        CodeOwner::App
    } else {
        CodeOwner::ThirdParty
    }
}

/// Third iff any statement on the path sits in third-party code.
pub fn classify_party(path: &[StmtId], app_package: &str) -> Party {
    if path.iter().any(|s| code_owner(&s.class, app_package) == CodeOwner::ThirdParty) {
        Party::Third
    } else {
        Party::First
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Leak {
    pub source: SourcePoint,
    pub sink_stmt: StmtId,
    pub sink_spec: SinkSpec,
    pub pi: PiKind,
    pub party: Party,
    /// Source statement, each edge's statement, sink statement.
    pub path: Vec<StmtId>,
    pub path_len: usize,
    /// The retained path is first-party but some longer path crosses
    /// third-party code.
    pub third_party_alternative: bool,
}

struct Search {
    dist: Vec<Option<u32>>,
    rank: Vec<u32>,
    parent: Vec<Option<(usize, usize)>>,
}

/// Layered breadth-first search that also ranks each node by the
/// lexicographic order of its best label sequence. Within a layer, equal
/// rank means equal sequence.
fn search(g: &TaintGraph, seed: usize) -> Search {
    let n = g.nodes.len();
    let mut s = Search {
        dist: vec![None; n],
        rank: vec![0; n],
        parent: vec![None; n],
    };
    s.dist[seed] = Some(0);
    let mut frontier = vec![seed];
    let mut depth = 0;
    while !frontier.is_empty() {
        depth += 1;
        let mut best: HashMap<usize, (u32, &StmtId, usize, usize)> = HashMap::new();
        for &u in &frontier {
            for &e in &g.out[u] {
                let edge = &g.edges[e];
                let v = edge.to;
                if s.dist[v].is_some() || matches!(g.nodes[v], TaintNode::StmtNode(_)) {
                    continue;
                }
                let cand = (s.rank[u], &edge.label, u, e);
                match best.get(&v) {
                    Some(cur) if (cur.0, cur.1) <= (cand.0, cand.1) => {}
                    _ => {
                        best.insert(v, cand);
                    }
                }
            }
        }
        let mut layer: Vec<_> = best.into_iter().collect();
        layer.sort_by(|a, b| (a.1 .0, a.1 .1, a.0).cmp(&(b.1 .0, b.1 .1, b.0)));
        let mut next_rank = 0u32;
        let mut prev_key: Option<(u32, &StmtId)> = None;
        for (v, (r, label, u, e)) in &layer {
            if prev_key.is_some_and(|k| k != (*r, *label)) {
                next_rank += 1;
            }
            prev_key = Some((*r, *label));
            s.dist[*v] = Some(depth);
            s.rank[*v] = next_rank;
            s.parent[*v] = Some((*u, *e));
        }
        frontier = layer.into_iter().map(|(v, _)| v).collect();
    }
    s
}

fn labels_to(g: &TaintGraph, s: &Search, mut node: usize) -> Vec<StmtId> {
    let mut out = Vec::new();
    while let Some((u, e)) = s.parent[node] {
        out.push(g.edges[e].label.clone());
        node = u;
    }
    out.reverse();
    out
}

/// Nodes reachable from `seed` along some path containing a third-party
/// statement (the source statement included).
fn third_party_reach(g: &TaintGraph, seed: usize, source: &StmtId, app_package: &str) -> Vec<bool> {
    let n = g.nodes.len();
    let third = |id: &StmtId| code_owner(&id.class, app_package) == CodeOwner::ThirdParty;
    let mut seen = vec![[false; 2]; n];
    let start = usize::from(third(source));
    seen[seed][start] = true;
    let mut stack = vec![(seed, start)];
    while let Some((u, flag)) = stack.pop() {
        for &e in &g.out[u] {
            let edge = &g.edges[e];
            let f = flag | usize::from(third(&edge.label));
            if !seen[edge.to][f] {
                seen[edge.to][f] = true;
                stack.push((edge.to, f));
            }
        }
    }
    seen.into_iter().map(|s| s[1]).collect()
}

/// One leak per (source, sink statement, sink spec) along a shortest path;
/// ties go to the lexicographically smallest statement sequence.
pub fn extract_leaks(graph: &TaintGraph, app_package: &str) -> Vec<Leak> {
    let mut leaks = Vec::new();
    for seed in &graph.seeds {
        let Some(start) = seed.node else { continue };
        let s = search(graph, start);
        let mut alt: Option<Vec<bool>> = None;
        for site in &graph.sinks {
            for spec in &site.specs {
                let best = spec
                    .positions
                    .iter()
                    .filter_map(|p| site.operands.get(p))
                    .filter_map(|&n| s.dist[n].map(|d| (d, s.rank[n], n)))
                    .min();
                let Some((dist, _, node)) = best else { continue };
                let mut path = Vec::with_capacity(dist as usize + 2);
                path.push(seed.source.stmt.clone());
                path.extend(labels_to(graph, &s, node));
                path.push(site.stmt.clone());
                let party = classify_party(&path, app_package);
                let third_party_alternative = party == Party::First && {
                    let reach = alt
                        .get_or_insert_with(|| third_party_reach(graph, start, &seed.source.stmt, app_package));
                    spec.positions
                        .iter()
                        .filter_map(|p| site.operands.get(p))
                        .any(|&n| reach[n])
                };
                leaks.push(Leak {
                    source: seed.source.clone(),
                    sink_stmt: site.stmt.clone(),
                    sink_spec: spec.clone(),
                    pi: seed.source.pi,
                    party,
                    path_len: path.len() - 1,
                    path,
                    third_party_alternative,
                });
            }
        }
    }
    leaks.sort_by(|a, b| {
        (&a.source.stmt, &a.sink_stmt, a.sink_spec.category, &a.sink_spec.sig).cmp(&(
            &b.source.stmt,
            &b.sink_stmt,
            b.sink_spec.category,
            &b.sink_spec.sig,
        ))
    });
    leaks
}
