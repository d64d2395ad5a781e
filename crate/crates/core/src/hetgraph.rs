//! Heterogeneous graph model and metapath-based adjacency.
//!
//! A metapath is a sequence of typed relation steps that starts and ends at
//! the target node type. Its adjacency over target nodes is the boolean
//! product of the per-step biadjacency matrices, with self-loops forced on.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;

use rand::Rng as _;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::matrix::BinaryMatrix;
use crate::rng::{stream_rng, Stream};
use crate::{Error, Matrix, Result};

/// A typed edge list between two node types.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Relation {
    pub src_type: String,
    pub dst_type: String,
    pub edges: Vec<(usize, usize)>,
}

/// One traversal of a relation, forward (`src → dst`) or reversed.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MetapathStep {
    pub relation: String,
    #[serde(default)]
    pub reversed: bool,
}

impl MetapathStep {
    pub fn forward(relation: &str) -> Self {
        MetapathStep {
            relation: relation.to_string(),
            reversed: false,
        }
    }

    pub fn reversed(relation: &str) -> Self {
        MetapathStep {
            relation: relation.to_string(),
            reversed: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Metapath {
    pub name: String,
    pub steps: Vec<MetapathStep>,
}

impl Metapath {
    pub fn new(name: &str, steps: Vec<MetapathStep>) -> Self {
        Metapath {
            name: name.to_string(),
            steps,
        }
    }

    /// Number of relation steps.
    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    /// True when the second half retraces the first half backwards, which
    /// makes the adjacency symmetric.
    pub fn is_palindromic(&self) -> bool {
        let l = self.steps.len();
        (0..l).all(|k| {
            let (a, b) = (&self.steps[k], &self.steps[l - 1 - k]);
            a.relation == b.relation && a.reversed != b.reversed
        })
    }
}

/// Heterogeneous graph: typed nodes, typed edges, attributes and metapaths.
#[derive(Debug, Clone, PartialEq)]
pub struct HeteroGraph {
    pub node_counts: BTreeMap<String, usize>,
    pub relations: BTreeMap<String, Relation>,
    pub attributes: BTreeMap<String, Matrix>,
    pub metapaths: Vec<Metapath>,
    pub target_type: String,
    /// Class id per target node.
    pub labels: Option<Vec<usize>>,
    /// Optional named index lists (train/val/test) over target nodes.
    pub splits: Option<BTreeMap<String, Vec<usize>>>,
}

impl HeteroGraph {
    pub fn target_count(&self) -> usize {
        self.node_counts.get(&self.target_type).copied().unwrap_or(0)
    }

    pub fn target_features(&self) -> Result<&Matrix> {
        self.attributes
            .get(&self.target_type)
            .ok_or_else(|| Error::Validation(format!("no attributes for target type '{}'", self.target_type)))
    }

    pub fn metapath(&self, name: &str) -> Option<&Metapath> {
        self.metapaths.iter().find(|m| m.name == name)
    }

    /// `(from type, to type)` of one step, honouring its direction.
    pub fn step_types(&self, step: &MetapathStep) -> Result<(&str, &str)> {
        let rel = self
            .relations
            .get(&step.relation)
            .ok_or_else(|| Error::Validation(format!("unknown relation '{}'", step.relation)))?;
        Ok(if step.reversed {
            (rel.dst_type.as_str(), rel.src_type.as_str())
        } else {
            (rel.src_type.as_str(), rel.dst_type.as_str())
        })
    }

    /// Node types visited by the metapath, `l + 1` entries.
    pub fn type_sequence(&self, mp: &Metapath) -> Result<Vec<String>> {
        let mut types = vec![self.target_type.clone()];
        for step in &mp.steps {
            let (from, to) = self.step_types(step)?;
            if from != types.last().map(String::as_str).unwrap_or_default() {
                return Err(Error::Validation(format!(
                    "metapath '{}' is not type-compatible at relation '{}'",
                    mp.name, step.relation
                )));
            }
            types.push(to.to_string());
        }
        Ok(types)
    }

    pub fn validate_metapath(&self, mp: &Metapath) -> Result<()> {
        if mp.steps.is_empty() {
            return Err(Error::Validation(format!(
                "metapath '{}' must start and end at target type '{}' (it has no steps)",
                mp.name, self.target_type
            )));
        }
        let first = self.step_types(&mp.steps[0])?.0;
        let last = self.step_types(&mp.steps[mp.steps.len() - 1])?.1;
        if first != self.target_type || last != self.target_type {
            return Err(Error::Validation(format!(
                "metapath '{}' must start and end at target type '{}'",
                mp.name, self.target_type
            )));
        }
        self.type_sequence(mp).map(|_| ())
    }

    /// Checks every structural invariant of the model.
    pub fn validate(&self) -> Result<()> {
        if !self.node_counts.contains_key(&self.target_type) {
            return Err(Error::Validation(format!(
                "target type '{}' is not a declared node type",
                self.target_type
            )));
        }
        for (name, rel) in &self.relations {
            let count = |t: &str| {
                self.node_counts
                    .get(t)
                    .copied()
                    .ok_or_else(|| Error::Validation(format!("relation '{name}' uses undeclared node type '{t}'")))
            };
            let (ns, nd) = (count(&rel.src_type)?, count(&rel.dst_type)?);
            for (k, &(s, d)) in rel.edges.iter().enumerate() {
                if s >= ns || d >= nd {
                    return Err(Error::Validation(format!(
                        "relation '{name}' edge {k} ({s}, {d}) out of range for counts ({ns}, {nd})"
                    )));
                }
            }
        }
        for (t, m) in &self.attributes {
            let count = self
                .node_counts
                .get(t)
                .copied()
                .ok_or_else(|| Error::Validation(format!("attributes given for undeclared node type '{t}'")))?;
            if m.rows() != count {
                return Err(Error::Validation(format!(
                    "attributes of '{t}' have {} rows but the type has {count} nodes",
                    m.rows()
                )));
            }
        }
        if self.metapaths.is_empty() {
            return Err(Error::Validation("at least one metapath is required".into()));
        }
        for mp in &self.metapaths {
            self.validate_metapath(mp)?;
        }
        let n = self.target_count();
        if let Some(labels) = &self.labels {
            if labels.len() != n {
                return Err(Error::Validation(format!(
                    "{} labels for {n} target nodes",
                    labels.len()
                )));
            }
        }
        if let Some(splits) = &self.splits {
            for (name, idx) in splits {
                if let Some(&bad) = idx.iter().find(|&&i| i >= n) {
                    return Err(Error::Validation(format!(
                        "split '{name}' references target node {bad} of {n}"
                    )));
                }
            }
        }
        Ok(())
    }

    /// Biadjacency of one step in traversal direction.
    pub fn step_biadjacency(&self, step: &MetapathStep) -> Result<BinaryMatrix> {
        let (from, to) = self.step_types(step)?;
        let (nf, nt) = (self.node_counts[from], self.node_counts[to]);
        let rel = &self.relations[&step.relation];
        let mut b = BinaryMatrix::zeros(nf, nt);
        for &(s, d) in &rel.edges {
            if step.reversed {
                b.set(d, s, true);
            } else {
                b.set(s, d, true);
            }
        }
        Ok(b)
    }
}

/// Binary adjacency over target nodes induced by one metapath.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MetapathView {
    pub metapath_name: String,
    pub adjacency: BinaryMatrix,
}

impl MetapathView {
    pub fn node_count(&self) -> usize {
        self.adjacency.rows()
    }

    /// Off-diagonal entries that are set.
    pub fn edge_count(&self) -> usize {
        let n = self.node_count();
        self.adjacency.count_ones() - (0..n).filter(|&i| self.adjacency.get(i, i)).count()
    }
}

/// `1[(B₁ ⋯ B_l) > 0]` with the diagonal forced to one.
pub fn build_metapath_adjacency(g: &HeteroGraph, mp: &Metapath) -> Result<MetapathView> {
    g.validate_metapath(mp)?;
    let mut acc = g.step_biadjacency(&mp.steps[0])?;
    for step in &mp.steps[1..] {
        acc = acc.bool_product(&g.step_biadjacency(step)?)?;
    }
    for i in 0..acc.rows() {
        acc.set(i, i, true);
    }
    Ok(MetapathView {
        metapath_name: mp.name.clone(),
        adjacency: acc,
    })
}

/// One view per declared metapath, in declaration order.
pub fn metapath_views(g: &HeteroGraph) -> Result<Vec<MetapathView>> {
    g.metapaths.iter().map(|mp| build_metapath_adjacency(g, mp)).collect()
}

/// Neighbour index lists of a binary adjacency (row `i` lists every set column).
pub fn adjacency_neighbors(adjacency: &BinaryMatrix) -> Vec<Vec<usize>> {
    (0..adjacency.rows())
        .map(|i| {
            adjacency
                .row(i)
                .iter()
                .enumerate()
                .filter_map(|(j, &set)| set.then_some(j))
                .collect()
        })
        .collect()
}

pub fn neighbor_lists(view: &MetapathView) -> Vec<Vec<usize>> {
    adjacency_neighbors(&view.adjacency)
}

/// Planted-partition generator settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SyntheticSpec {
    pub communities: usize,
    pub community_size: usize,
    /// Auxiliary nodes per community.
    pub aux_per_community: usize,
    /// Distinct auxiliary neighbours of each target node, per relation.
    pub links_per_target: usize,
    /// Relative weight of linking into the node's own community.
    pub intra: f64,
    /// Relative weight of linking into each other community.
    pub inter: f64,
    /// Number of target–auxiliary relations; each yields one metapath.
    pub relations: usize,
    pub attr_dim: usize,
    /// Norm of each community mean attribute vector.
    pub signal: f64,
    /// Expected norm of the per-node attribute noise.
    pub noise: f64,
    pub seed: u64,
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        SyntheticSpec {
            communities: 3,
            community_size: 100,
            aux_per_community: 700,
            links_per_target: 4,
            intra: 0.995,
            inter: 0.0025,
            relations: 2,
            attr_dim: 512,
            signal: 0.0,
            noise: 1.0,
            seed: 7,
        }
    }
}

pub const SYNTHETIC_TARGET: &str = "target";
pub const SYNTHETIC_AUX: &str = "aux";

/// Planted-partition heterogeneous graph. Target node `i` belongs to
/// community `i / community_size`; auxiliary nodes are split the same way.
/// For every target–auxiliary relation each target draws
/// `links_per_target` distinct auxiliary neighbours: the community of each
/// link is drawn with weight `intra` for the node's own community and
/// `inter` for every other one, then the neighbour is uniform inside it.
/// Target attributes are the community mean plus isotropic Gaussian noise.
pub fn generate_synthetic(spec: &SyntheticSpec) -> Result<HeteroGraph> {
    for (name, w) in [("intra", spec.intra), ("inter", spec.inter)] {
        if !(w >= 0.0) || !w.is_finite() {
            return Err(Error::Parameter(format!("{name} weight {w} must be finite and >= 0")));
        }
    }
    if spec.communities == 0 || spec.community_size == 0 || spec.aux_per_community == 0 {
        return Err(Error::Parameter("community counts and sizes must be >= 1".into()));
    }
    if spec.relations == 0 || spec.attr_dim == 0 {
        return Err(Error::Parameter("relations and attr_dim must be >= 1".into()));
    }
    if !(spec.signal >= 0.0) || !(spec.noise >= 0.0) {
        return Err(Error::Parameter("signal and noise must be non-negative".into()));
    }
    let k = spec.communities;
    let own = spec.intra;
    let other = if k > 1 { spec.inter } else { 0.0 };
    if own + other == 0.0 {
        return Err(Error::Parameter("intra and inter weights are both zero".into()));
    }
    // Every chosen community needs room for the requested distinct links.
    let reachable = if other > 0.0 { k } else { 1 };
    if spec.links_per_target > reachable * spec.aux_per_community {
        return Err(Error::Parameter(format!(
            "links_per_target {} exceeds the {} reachable auxiliary nodes",
            spec.links_per_target,
            reachable * spec.aux_per_community
        )));
    }
    let p_own = own / (own + (k - 1) as f64 * other);
    let mut rng = stream_rng(spec.seed, Stream::Synthetic, 0);
    let n = k * spec.community_size;
    let na = k * spec.aux_per_community;
    let community = |i: usize| i / spec.community_size;

    let mut relations = BTreeMap::new();
    let mut metapaths = Vec::new();
    for r in 0..spec.relations {
        let name = format!("ta{r}");
        let mut edges = Vec::with_capacity(n * spec.links_per_target);
        for i in 0..n {
            let c = community(i);
            let mut picked: Vec<usize> = Vec::with_capacity(spec.links_per_target);
            while picked.len() < spec.links_per_target {
                let target_community = if k == 1 || rng.gen::<f64>() < p_own {
                    c
                } else {
                    let o = rng.gen_range(0..k - 1);
                    if o >= c {
                        o + 1
                    } else {
                        o
                    }
                };
                let a = target_community * spec.aux_per_community + rng.gen_range(0..spec.aux_per_community);
                if !picked.contains(&a) {
                    picked.push(a);
                }
            }
            picked.sort_unstable();
            edges.extend(picked.into_iter().map(|a| (i, a)));
        }
        relations.insert(
            name.clone(),
            Relation {
                src_type: SYNTHETIC_TARGET.into(),
                dst_type: SYNTHETIC_AUX.into(),
                edges,
            },
        );
        metapaths.push(Metapath::new(
            &format!("TA{r}T"),
            vec![MetapathStep::forward(&name), MetapathStep::reversed(&name)],
        ));
    }

    let d = spec.attr_dim;
    let mut means = Vec::with_capacity(spec.communities);
    for _ in 0..spec.communities {
        let v: Vec<f64> = (0..d).map(|_| StandardNormal.sample(&mut rng)).collect();
        let len = libm::sqrt(v.iter().map(|x| x * x).sum::<f64>()).max(f64::MIN_POSITIVE);
        means.push(v.into_iter().map(|x| x * spec.signal / len).collect::<Vec<f64>>());
    }
    let sd = spec.noise / libm::sqrt(d as f64);
    let mut features = Matrix::zeros(n, d);
    for i in 0..n {
        let mean = &means[community(i)];
        for (k, v) in features.row_mut(i).iter_mut().enumerate() {
            let z: f64 = StandardNormal.sample(&mut rng);
            *v = mean[k] + sd * z;
        }
    }

    let mut node_counts = BTreeMap::new();
    node_counts.insert(SYNTHETIC_TARGET.to_string(), n);
    node_counts.insert(SYNTHETIC_AUX.to_string(), na);
    let mut attributes = BTreeMap::new();
    attributes.insert(SYNTHETIC_TARGET.to_string(), features);
    let g = HeteroGraph {
        node_counts,
        relations,
        attributes,
        metapaths,
        target_type: SYNTHETIC_TARGET.into(),
        labels: Some((0..n).map(community).collect()),
        splits: None,
    };
    g.validate()?;
    Ok(g)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::SeedableRng;

    fn paper_author(edges: Vec<(usize, usize)>, papers: usize, authors: usize) -> HeteroGraph {
        let mut node_counts = BTreeMap::new();
        node_counts.insert("paper".to_string(), papers);
        node_counts.insert("author".to_string(), authors);
        let mut relations = BTreeMap::new();
        relations.insert(
            "pa".to_string(),
            Relation {
                src_type: "paper".into(),
                dst_type: "author".into(),
                edges,
            },
        );
        let mut attributes = BTreeMap::new();
        attributes.insert("paper".to_string(), Matrix::filled(papers, 2, 1.0));
        HeteroGraph {
            node_counts,
            relations,
            attributes,
            metapaths: vec![Metapath::new(
                "PAP",
                vec![MetapathStep::forward("pa"), MetapathStep::reversed("pa")],
            )],
            target_type: "paper".into(),
            labels: None,
            splits: None,
        }
    }

    #[test]
    fn pap_adjacency_by_hand() {
        let g = paper_author(vec![(0, 0), (1, 0)], 2, 1);
        g.validate().unwrap();
        let view = build_metapath_adjacency(&g, &g.metapaths[0]).unwrap();
        assert_eq!(view.adjacency, BinaryMatrix::full(2, 2));
        assert_eq!(neighbor_lists(&view), vec![vec![0, 1], vec![0, 1]]);
        assert_eq!(view.edge_count(), 2);
    }

    #[test]
    fn empty_relation_gives_identity() {
        let g = paper_author(vec![], 3, 2);
        let view = build_metapath_adjacency(&g, &g.metapaths[0]).unwrap();
        assert_eq!(view.adjacency, BinaryMatrix::identity(3));
        assert_eq!(neighbor_lists(&view), vec![vec![0], vec![1], vec![2]]);
    }

    #[test]
    fn metapath_must_return_to_target() {
        let mut g = paper_author(vec![(0, 0)], 1, 1);
        g.metapaths = vec![Metapath::new("PA", vec![MetapathStep::forward("pa")])];
        let err = g.validate().unwrap_err();
        assert!(format!("{err}").contains("must start and end at target type"), "{err}");

        g.metapaths = vec![Metapath::new("none", vec![])];
        let err = g.validate().unwrap_err();
        assert!(format!("{err}").contains("must start and end at target type"), "{err}");

        g.metapaths = vec![Metapath::new(
            "PAA",
            vec![MetapathStep::forward("pa"), MetapathStep::forward("pa")],
        )];
        assert!(matches!(g.validate(), Err(Error::Validation(_))));
    }

    #[test]
    fn out_of_range_edge_is_rejected() {
        let g = paper_author(vec![(5, 0)], 3, 1);
        let err = g.validate().unwrap_err();
        assert!(format!("{err}").contains("out of range"), "{err}");
    }

    #[test]
    fn synthetic_shape_and_determinism() {
        let spec = SyntheticSpec::default();
        let g = generate_synthetic(&spec).unwrap();
        assert_eq!(g.target_count(), 300);
        assert_eq!(g.labels.as_ref().unwrap().len(), 300);
        assert_eq!(g.metapaths.len(), 2);
        assert_eq!(g, generate_synthetic(&spec).unwrap());

        for rel in g.relations.values() {
            assert_eq!(rel.edges.len(), 300 * spec.links_per_target);
        }

        let bad = SyntheticSpec {
            intra: -1.0,
            ..spec.clone()
        };
        assert!(matches!(generate_synthetic(&bad), Err(Error::Parameter(_))));
        let crowded = SyntheticSpec {
            aux_per_community: 2,
            links_per_target: 7,
            ..spec
        };
        assert!(matches!(generate_synthetic(&crowded), Err(Error::Parameter(_))));
    }

    /// Mutual information (nats) between "same community" and "adjacent"
    /// over unordered target pairs.
    fn label_adjacency_mi(view: &MetapathView, labels: &[usize]) -> f64 {
        let n = labels.len();
        let mut counts = [[0.0f64; 2]; 2];
        for i in 0..n {
            for j in i + 1..n {
                let s = (labels[i] == labels[j]) as usize;
                let e = view.adjacency.get(i, j) as usize;
                counts[s][e] += 1.0;
            }
        }
        let total: f64 = counts.iter().flatten().sum();
        let mut mi = 0.0;
        for s in 0..2 {
            for e in 0..2 {
                let p = counts[s][e] / total;
                let ps = (counts[s][0] + counts[s][1]) / total;
                let pe = (counts[0][e] + counts[1][e]) / total;
                if p > 0.0 {
                    mi += p * libm::log(p / (ps * pe));
                }
            }
        }
        mi
    }

    #[test]
    fn equal_weights_carry_no_community_signal() {
        let mut flat = 0.0;
        let mut planted = 0.0;
        for seed in 0..4 {
            let base = SyntheticSpec {
                community_size: 40,
                aux_per_community: 10,
                links_per_target: 2,
                seed,
                ..SyntheticSpec::default()
            };
            let g = generate_synthetic(&SyntheticSpec {
                intra: 0.05,
                inter: 0.05,
                ..base.clone()
            })
            .unwrap();
            let v = build_metapath_adjacency(&g, &g.metapaths[0]).unwrap();
            flat += label_adjacency_mi(&v, g.labels.as_ref().unwrap());
            let g = generate_synthetic(&SyntheticSpec {
                intra: 0.9,
                inter: 0.05,
                ..base
            })
            .unwrap();
            let v = build_metapath_adjacency(&g, &g.metapaths[0]).unwrap();
            planted += label_adjacency_mi(&v, g.labels.as_ref().unwrap());
        }
        assert!(flat / 4.0 < 2e-3, "flat MI {}", flat / 4.0);
        assert!(planted / 4.0 > 0.05, "planted MI {}", planted / 4.0);
    }

    /// Enumerates every path instance directly; independent of the matrix route.
    fn brute_force_adjacency(g: &HeteroGraph, mp: &Metapath) -> BinaryMatrix {
        let n = g.target_count();
        let mut out = BinaryMatrix::identity(n);
        fn walk(g: &HeteroGraph, mp: &Metapath, depth: usize, node: usize, start: usize, out: &mut BinaryMatrix) {
            if depth == mp.steps.len() {
                out.set(start, node, true);
                return;
            }
            let step = &mp.steps[depth];
            for &(s, d) in &g.relations[&step.relation].edges {
                let (from, to) = if step.reversed { (d, s) } else { (s, d) };
                if from == node {
                    walk(g, mp, depth + 1, to, start, out);
                }
            }
        }
        for start in 0..n {
            walk(g, mp, 0, start, start, &mut out);
        }
        out
    }

    fn random_graph(seed: u64) -> (HeteroGraph, Metapath) {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let types = ["t", "u", "v"];
        let mut node_counts = BTreeMap::new();
        for t in types {
            node_counts.insert(t.to_string(), rng.gen_range(1..=7));
        }
        let mut relations = BTreeMap::new();
        let pairs = [("t", "u"), ("u", "v"), ("t", "v"), ("t", "t")];
        for (k, (s, d)) in pairs.iter().enumerate() {
            let (ns, nd) = (node_counts[*s], node_counts[*d]);
            let p = rng.gen_range(0.0..0.6);
            let mut edges = Vec::new();
            for i in 0..ns {
                for j in 0..nd {
                    if rng.gen::<f64>() < p {
                        edges.push((i, j));
                    }
                }
            }
            relations.insert(
                format!("r{k}"),
                Relation {
                    src_type: s.to_string(),
                    dst_type: d.to_string(),
                    edges,
                },
            );
        }
        let mut g = HeteroGraph {
            node_counts,
            relations,
            attributes: BTreeMap::new(),
            metapaths: vec![],
            target_type: "t".into(),
            labels: None,
            splits: None,
        };
        // random type-consistent walk over the schema, closed back to t
        let len = rng.gen_range(1..=4usize);
        loop {
            let mut steps = Vec::new();
            let mut at = "t".to_string();
            for k in 0..len {
                let options: Vec<MetapathStep> = g
                    .relations
                    .iter()
                    .flat_map(|(name, r)| {
                        let mut v = Vec::new();
                        if r.src_type == at {
                            v.push(MetapathStep::forward(name));
                        }
                        if r.dst_type == at {
                            v.push(MetapathStep::reversed(name));
                        }
                        v
                    })
                    .filter(|s| k + 1 < len || g.step_types(s).unwrap().1 == "t")
                    .collect();
                if options.is_empty() {
                    break;
                }
                let s = options[rng.gen_range(0..options.len())].clone();
                at = g.step_types(&s).unwrap().1.to_string();
                steps.push(s);
            }
            if steps.len() == len && at == "t" {
                let mp = Metapath::new("rand", steps);
                g.metapaths.push(mp.clone());
                return (g, mp);
            }
        }
    }

    #[test]
    fn matches_brute_force_enumeration() {
        for seed in 0..50 {
            let (g, mp) = random_graph(seed);
            g.validate().unwrap();
            let view = build_metapath_adjacency(&g, &mp).unwrap();
            assert_eq!(view.adjacency, brute_force_adjacency(&g, &mp), "seed {seed}");
        }
    }

    proptest! {
        #[test]
        fn palindromic_metapaths_are_symmetric(seed in 0u64..10_000) {
            let (g, _) = random_graph(seed);
            let mp = Metapath::new("pal", vec![
                MetapathStep::forward("r0"),
                MetapathStep::forward("r1"),
                MetapathStep::reversed("r1"),
                MetapathStep::reversed("r0"),
            ]);
            prop_assert!(mp.is_palindromic());
            let view = build_metapath_adjacency(&g, &mp).unwrap();
            prop_assert!(view.adjacency.is_symmetric());
            for row in neighbor_lists(&view).iter().enumerate() {
                prop_assert!(row.1.contains(&row.0));
            }
        }
    }
}
