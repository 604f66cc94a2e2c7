use std::collections::BTreeSet;

use crate::error::{CdfError, Result};
use crate::model::CdnModel;

/// A permutation of the variables together with its induced width.
///
/// The indicator `z_i` of a variable that appears in a single factor takes
/// one value only, so it is fixed rather than summed out and does not take
/// part in the interaction graph. The width is measured on the graph of the
/// remaining indicators, where `z_i` and `z_k` are adjacent when a factor
/// contains both variables.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EliminationOrder {
    order: Vec<usize>,
    width: usize,
    widest: Vec<usize>,
}

impl EliminationOrder {
    /// Checks that `order` is a permutation of `0..p` and computes its width.
    pub fn new(model: &CdnModel, order: Vec<usize>) -> Result<Self> {
        let p = model.p();
        let mut seen = vec![false; p];
        if order.len() != p {
            return Err(CdfError::Argument(format!(
                "elimination order has {} entries, model has {p} variables",
                order.len()
            )));
        }
        for &v in &order {
            if v >= p || seen[v] {
                return Err(CdfError::Argument(format!(
                    "elimination order is not a permutation (entry {v})"
                )));
            }
            seen[v] = true;
        }
        let mut graph = interaction_graph(model);
        let mut width = 0;
        let mut widest = Vec::new();
        for &v in &order {
            if !graph.active[v] {
                continue;
            }
            let clique = graph.eliminate(v);
            if clique.len() - 1 > width || widest.is_empty() {
                width = clique.len() - 1;
                widest = clique;
            }
        }
        Ok(EliminationOrder { order, width, widest })
    }

    pub fn order(&self) -> &[usize] {
        &self.order
    }

    pub fn width(&self) -> usize {
        self.width
    }

    /// The clique (eliminated variable first) that attains the width.
    pub fn widest_clique(&self) -> &[usize] {
        &self.widest
    }
}

struct Graph {
    adj: Vec<BTreeSet<usize>>,
    active: Vec<bool>,
}

impl Graph {
    /// Removes `v`, connects its neighbours, returns `v` followed by them.
    fn eliminate(&mut self, v: usize) -> Vec<usize> {
        let nbrs: Vec<usize> = self.adj[v].iter().copied().collect();
        for (a, &x) in nbrs.iter().enumerate() {
            self.adj[x].remove(&v);
            for &y in &nbrs[a + 1..] {
                self.adj[x].insert(y);
                self.adj[y].insert(x);
            }
        }
        self.adj[v].clear();
        self.active[v] = false;
        let mut clique = vec![v];
        clique.extend(nbrs);
        clique
    }

    fn fill_in(&self, v: usize) -> usize {
        let nbrs: Vec<usize> = self.adj[v].iter().copied().collect();
        let mut fill = 0;
        for (a, &x) in nbrs.iter().enumerate() {
            for &y in &nbrs[a + 1..] {
                if !self.adj[x].contains(&y) {
                    fill += 1;
                }
            }
        }
        fill
    }
}

fn interaction_graph(model: &CdnModel) -> Graph {
    let z = model.z_domains();
    variable_graph(model, (0..model.p()).map(|i| z.domain(i).len() > 1).collect())
}

fn variable_graph(model: &CdnModel, active: Vec<bool>) -> Graph {
    let mut adj = vec![BTreeSet::new(); model.p()];
    for f in model.factors() {
        let vars: Vec<usize> = f.scope().iter().copied().filter(|&i| active[i]).collect();
        for (a, &x) in vars.iter().enumerate() {
            for &y in &vars[a + 1..] {
                adj[x].insert(y);
                adj[y].insert(x);
            }
        }
    }
    Graph { adj, active }
}

/// Eliminates every active variable greedily by fill-in, appending to `order`.
fn greedy_min_fill(graph: &mut Graph, order: &mut Vec<usize>) -> (usize, Vec<usize>) {
    let mut width = 0;
    let mut widest = Vec::new();
    let mut remaining: BTreeSet<usize> = (0..graph.active.len()).filter(|&i| graph.active[i]).collect();
    while !remaining.is_empty() {
        let mut best = None;
        for &v in &remaining {
            let fill = graph.fill_in(v);
            if best.is_none_or(|(_, f)| fill < f) {
                best = Some((v, fill));
                if fill == 0 {
                    break;
                }
            }
        }
        let (v, _) = best.expect("nonempty");
        remaining.remove(&v);
        let clique = graph.eliminate(v);
        if clique.len() - 1 > width || widest.is_empty() {
            width = clique.len() - 1;
            widest = clique;
        }
        order.push(v);
    }
    (width, widest)
}

/// Greedy min-fill ordering; ties go to the lowest variable index. Fixed
/// (single-factor) variables come first in ascending order.
pub fn min_fill_order(model: &CdnModel) -> EliminationOrder {
    let mut graph = interaction_graph(model);
    let mut order: Vec<usize> = (0..model.p()).filter(|&i| !graph.active[i]).collect();
    let (width, widest) = greedy_min_fill(&mut graph, &mut order);
    EliminationOrder { order, width, widest }
}

/// Induced width of a min-fill elimination of the bi-directed graph with
/// every variable taking part. This is the width of the graph itself; the
/// width that governs density evaluation ([`EliminationOrder::width`]) can be
/// smaller because single-factor variables need no summation.
pub fn bidirected_width(model: &CdnModel) -> usize {
    let mut graph = variable_graph(model, vec![true; model.p()]);
    greedy_min_fill(&mut graph, &mut Vec::new()).0
}
