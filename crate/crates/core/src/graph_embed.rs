//! DeepWalk category embeddings: uniform random walks over the category
//! graph, fed to the skip-gram trainer.

use std::collections::{BTreeMap, BTreeSet};

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corpus::Vocabulary;
use crate::error::{Error, Result};
use crate::skipgram::{train_sgns, EmbeddingMatrix, SgnsConfig};
use crate::util;

/// Undirected label graph. Nodes are indexed in lexicographic label order;
/// self-loops and duplicate edges are dropped.
#[derive(Debug, Clone)]
pub struct CategoryGraph {
    nodes: Vocabulary,
    adjacency: Vec<Vec<usize>>,
}

impl CategoryGraph {
    /// Builds the graph from an edge list plus any labels that should exist
    /// as (possibly isolated) nodes.
    pub fn build<'a, E, L>(edges: E, extra_labels: L) -> Result<Self>
    where
        E: IntoIterator<Item = (&'a str, &'a str)>,
        L: IntoIterator<Item = &'a str>,
    {
        let mut neighbors: BTreeMap<&str, BTreeSet<&str>> = BTreeMap::new();
        for (a, b) in edges {
            neighbors.entry(a).or_default();
            neighbors.entry(b).or_default();
            if a != b {
                neighbors.get_mut(a).unwrap().insert(b);
                neighbors.get_mut(b).unwrap().insert(a);
            }
        }
        for l in extra_labels {
            neighbors.entry(l).or_default();
        }
        if neighbors.is_empty() {
            return Err(Error::Data("category graph has no nodes".into()));
        }
        let labels: Vec<String> = neighbors.keys().map(|s| s.to_string()).collect();
        let degrees = neighbors.values().map(|n| n.len() as u64).collect();
        let nodes = Vocabulary::from_parts(labels, degrees)?;
        let adjacency = neighbors
            .values()
            .map(|ns| ns.iter().map(|l| nodes.get(l).expect("label indexed")).collect())
            .collect();
        Ok(CategoryGraph { nodes, adjacency })
    }

    pub fn nodes(&self) -> &Vocabulary {
        &self.nodes
    }

    pub fn neighbors(&self, node: usize) -> &[usize] {
        &self.adjacency[node]
    }

    pub fn node_count(&self) -> usize {
        self.adjacency.len()
    }

    pub fn edge_count(&self) -> usize {
        self.adjacency.iter().map(Vec::len).sum::<usize>() / 2
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct WalkConfig {
    /// Steps per walk; a walk visits at most `walk_length + 1` nodes.
    pub walk_length: usize,
    pub walks_per_node: usize,
    pub seed: u64,
}

impl Default for WalkConfig {
    fn default() -> Self {
        WalkConfig {
            walk_length: 40,
            walks_per_node: 1,
            seed: 1,
        }
    }
}

impl WalkConfig {
    pub fn validate(&self) -> Result<()> {
        if self.walk_length < 1 || self.walks_per_node < 1 {
            return Err(Error::Config("walk_length and walks_per_node must be at least 1".into()));
        }
        Ok(())
    }
}

/// `walks_per_node` uniform random walks from every node, ordered by start
/// node. Each walk draws from its own substream, so the result does not
/// depend on the thread count. Walks stop early at nodes without neighbors.
pub fn random_walks(g: &CategoryGraph, cfg: &WalkConfig) -> Result<Vec<Vec<usize>>> {
    cfg.validate()?;
    let per = cfg.walks_per_node;
    Ok((0..g.node_count() * per)
        .into_par_iter()
        .map(|k| {
            let mut rng = util::substream(cfg.seed, k as u64);
            let mut node = k / per;
            let mut walk = Vec::with_capacity(cfg.walk_length + 1);
            walk.push(node);
            for _ in 0..cfg.walk_length {
                let ns = g.neighbors(node);
                if ns.is_empty() {
                    break;
                }
                node = ns[rng.random_range(0..ns.len())];
                walk.push(node);
            }
            walk
        })
        .collect())
}

/// Walks the graph and trains skip-gram on the walks: one vector per node.
/// Nodes that never occur in a multi-node walk keep their initial vector.
pub fn train_category_embeddings(g: &CategoryGraph, wcfg: &WalkConfig, scfg: &SgnsConfig) -> Result<EmbeddingMatrix> {
    let walks = random_walks(g, wcfg)?;
    Ok(train_sgns(&walks, g.nodes().clone(), scfg)?.without_output())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn isolated_node_walk_is_just_the_start() {
        let g = CategoryGraph::build([("a", "b")], ["lonely"]).unwrap();
        let walks = random_walks(&g, &WalkConfig::default()).unwrap();
        let lonely = g.nodes().get("lonely").unwrap();
        assert_eq!(walks[lonely], vec![lonely]);
    }

    #[test]
    fn path_graph_alternates() {
        let g = CategoryGraph::build([("a", "b")], []).unwrap();
        let a = g.nodes().get("a").unwrap();
        let b = g.nodes().get("b").unwrap();
        let cfg = WalkConfig { walk_length: 6, ..Default::default() };
        let walks = random_walks(&g, &cfg).unwrap();
        assert_eq!(walks[a], vec![a, b, a, b, a, b, a]);
    }

    #[test]
    fn self_loops_and_duplicates_dropped() {
        let g = CategoryGraph::build([("a", "a"), ("a", "b"), ("b", "a")], []).unwrap();
        assert_eq!(g.neighbors(g.nodes().get("a").unwrap()), &[1]);
        assert_eq!(g.edge_count(), 1);
        let only_loop = CategoryGraph::build([("x", "x")], []).unwrap();
        assert!(only_loop.neighbors(0).is_empty());
    }

    #[test]
    fn default_walks_one_per_node() {
        let edges: Vec<(String, String)> = (0..30).map(|i| (format!("n{i}"), format!("n{}", (i * 7 + 3) % 30))).collect();
        let g = CategoryGraph::build(edges.iter().map(|(a, b)| (a.as_str(), b.as_str())), []).unwrap();
        let walks = random_walks(&g, &WalkConfig::default()).unwrap();
        assert_eq!(walks.len(), g.node_count());
        for (i, w) in walks.iter().enumerate() {
            assert_eq!(w[0], i);
            assert!(w.len() <= 41);
        }
    }

    #[test]
    fn zero_length_rejected() {
        let g = CategoryGraph::build([("a", "b")], []).unwrap();
        assert!(random_walks(&g, &WalkConfig { walk_length: 0, ..Default::default() }).is_err());
    }
}
