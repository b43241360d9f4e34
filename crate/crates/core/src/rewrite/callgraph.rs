//! Static call graph over declared functions.

use std::collections::{BTreeSet, HashMap};

use petgraph::algo::tarjan_scc;
use petgraph::graphmap::DiGraphMap;

use crate::syntax::{Expr, Name, Program};

/// Edge `f -> g` when the body of `f` statically calls `g`.
#[derive(Debug, Clone)]
pub struct CallGraph {
    names: Vec<Name>,
    graph: DiGraphMap<usize, ()>,
    recursive: BTreeSet<usize>,
    /// Static call sites per function across all bodies and `main`.
    sites: HashMap<Name, usize>,
}

fn callees(e: &Expr, out: &mut Vec<Name>) {
    e.walk(&mut |n| {
        if let Expr::Call { name, .. } = n {
            out.push(name.clone());
        }
    });
}

impl CallGraph {
    pub fn build(p: &Program) -> Self {
        let names: Vec<Name> = p.decls.iter().map(|d| d.name.clone()).collect();
        let index: HashMap<&Name, usize> = names.iter().enumerate().map(|(i, n)| (n, i)).collect();
        let mut graph = DiGraphMap::new();
        let mut sites: HashMap<Name, usize> = HashMap::new();
        for (i, d) in p.decls.iter().enumerate() {
            graph.add_node(i);
            let mut out = Vec::new();
            callees(&d.body, &mut out);
            for c in out {
                if let Some(&j) = index.get(&c) {
                    graph.add_edge(i, j, ());
                }
                *sites.entry(c).or_default() += 1;
            }
        }
        let mut out = Vec::new();
        callees(&p.main, &mut out);
        for c in out {
            *sites.entry(c).or_default() += 1;
        }
        let mut recursive = BTreeSet::new();
        for scc in tarjan_scc(&graph) {
            if scc.len() > 1 || graph.contains_edge(scc[0], scc[0]) {
                recursive.extend(scc);
            }
        }
        CallGraph { names, graph, recursive, sites }
    }

    /// Whether `f` lies on a call cycle, self-calls included.
    pub fn is_recursive(&self, f: &Name) -> bool {
        self.names.iter().position(|n| n == f).is_some_and(|i| self.recursive.contains(&i))
    }

    pub fn call_sites(&self, f: &Name) -> usize {
        self.sites.get(f).copied().unwrap_or(0)
    }

    pub fn callees(&self, f: &Name) -> Vec<Name> {
        match self.names.iter().position(|n| n == f) {
            Some(i) => self.graph.neighbors(i).map(|j| self.names[j].clone()).collect(),
            None => Vec::new(),
        }
    }

    /// Declarations reachable from `main` through static calls.
    pub fn reachable(&self, p: &Program) -> BTreeSet<Name> {
        let mut todo = Vec::new();
        callees(&p.main, &mut todo);
        let mut seen = BTreeSet::new();
        while let Some(f) = todo.pop() {
            if seen.insert(f.clone()) {
                todo.extend(self.callees(&f));
            }
        }
        seen
    }
}

/// Drops declarations that `main` cannot reach.
pub fn drop_unreachable(p: Program) -> Program {
    let live = CallGraph::build(&p).reachable(&p);
    Program { decls: p.decls.into_iter().filter(|d| live.contains(&d.name)).collect(), main: p.main }
}
