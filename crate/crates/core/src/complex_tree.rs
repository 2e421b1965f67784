//! Trees of rational complexes built from negative information, and the
//! path selections that read connectedness components off them.

use std::collections::BTreeMap;

use num_traits::{Signed, Zero};
use serde::{Deserialize, Serialize};

use crate::coded_sets::{box_covered_by, cover_open_box, Ambient, Ball, NegInfoSet, SetStream};
use crate::error::{check_dim, Error, Result};
use crate::geometry::{
    compactly_included, distance_to_set, split_components, strip_boundary, BoxSet, Complex,
};
use crate::points::PointOracle;
use crate::rat::{half, int, pow2, ExtRat, Rat};

/// Default cap on boxes per label before a build gives up.
pub const DEFAULT_BOX_CAP: usize = 50_000;

pub type Word = Vec<usize>;

/// A finitely branching tree with a complex on every node.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ComplexTree {
    dim: usize,
    nodes: BTreeMap<Word, Complex>,
    bound: Vec<usize>,
    depth: usize,
    source: Option<NegInfoSet>,
    box_cap: usize,
}

/// A word of the tree together with the labels along it.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct PathPrefix {
    pub word: Word,
    /// `labels[i]` belongs to `word[..i]`; one more entry than `word`.
    pub labels: Vec<Complex>,
}

impl PathPrefix {
    pub fn root(q: Complex) -> Self {
        PathPrefix {
            word: Vec::new(),
            labels: vec![q],
        }
    }

    pub fn last(&self) -> &Complex {
        self.labels.last().expect("root label present")
    }

    pub fn len(&self) -> usize {
        self.word.len()
    }

    pub fn is_empty(&self) -> bool {
        self.word.is_empty()
    }
}

/// Level `i` to `i+1`: erode by `delta`, cut the open `cuts`, split into components.
pub(crate) fn expand(label: &BoxSet, delta: &Rat, cuts: &[Ball], cap: usize) -> Result<Vec<Complex>> {
    let mut set = strip_boundary(label, delta)?;
    let Some(bb) = set.bbox() else {
        return Ok(Vec::new());
    };
    for b in cuts {
        if !b.meets(&bb) {
            continue;
        }
        let (lo, hi) = b.corners();
        set = set.minus_open_box(&lo, &hi);
        if set.len() > cap {
            set = set.normalized();
            if set.len() > cap {
                return Err(Error::ResourceLimit {
                    op: "build_tree",
                    detail: format!("label exceeds {cap} boxes"),
                });
            }
        }
        if set.is_empty() {
            return Ok(Vec::new());
        }
    }
    let set = set.normalized();
    if set.len() > cap {
        return Err(Error::ResourceLimit {
            op: "build_tree",
            detail: format!("label exceeds {cap} boxes"),
        });
    }
    Ok(split_components(&set))
}

/// Balls subtracted at level `i`: `B(c_j, r_j - 2^-i)` for `j <= i`.
pub(crate) fn level_cuts(balls: &[Ball], i: usize) -> Vec<Ball> {
    let slack = pow2(-(i as i32));
    balls
        .iter()
        .take(i + 1)
        .filter_map(|b| {
            let r = &b.radius - &slack;
            r.is_positive().then(|| Ball {
                center: b.center.clone(),
                radius: r,
            })
        })
        .collect()
}

pub(crate) fn stripe(i: usize) -> Rat {
    pow2(-(i as i32) - 1)
}

fn expand_all(
    parents: &[(Word, Complex)],
    delta: &Rat,
    cuts: &[Ball],
    cap: usize,
) -> Result<Vec<Vec<Complex>>> {
    if parents.len() < 4 {
        return parents
            .iter()
            .map(|(_, c)| expand(c.set(), delta, cuts, cap))
            .collect();
    }
    let jobs = std::thread::available_parallelism()
        .map(|n| n.get())
        .unwrap_or(1)
        .min(8)
        .min(parents.len());
    let chunk = parents.len().div_ceil(jobs);
    std::thread::scope(|scope| {
        let handles: Vec<_> = parents
            .chunks(chunk)
            .map(|part| {
                scope.spawn(move || {
                    part.iter()
                        .map(|(_, c)| expand(c.set(), delta, cuts, cap))
                        .collect::<Result<Vec<_>>>()
                })
            })
            .collect();
        let mut out = Vec::with_capacity(parents.len());
        for h in handles {
            out.extend(h.join().expect("expansion thread panicked")?);
        }
        Ok(out)
    })
}

impl ComplexTree {
    /// The depth-0 tree `{ε ↦ {Q}}`.
    pub fn root(dim: usize) -> Self {
        let mut nodes = BTreeMap::new();
        nodes.insert(
            Vec::new(),
            Complex::from_box(Ambient::Extended.cube(dim)),
        );
        ComplexTree {
            dim,
            nodes,
            bound: Vec::new(),
            depth: 0,
            source: None,
            box_cap: DEFAULT_BOX_CAP,
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn depth(&self) -> usize {
        self.depth
    }

    pub fn bound(&self) -> &[usize] {
        &self.bound
    }

    pub fn source(&self) -> Option<&NegInfoSet> {
        self.source.as_ref()
    }

    pub fn label(&self, w: &[usize]) -> Option<&Complex> {
        self.nodes.get(w)
    }

    pub fn nodes(&self) -> impl Iterator<Item = (&Word, &Complex)> {
        self.nodes.iter()
    }

    pub fn level_nodes(&self, i: usize) -> impl Iterator<Item = (&Word, &Complex)> {
        self.nodes.iter().filter(move |(w, _)| w.len() == i)
    }

    /// Children of `w`, in order.
    pub fn children(&self, w: &[usize]) -> Vec<(Word, &Complex)> {
        let mut out = Vec::new();
        for j in 0.. {
            let mut c = w.to_vec();
            c.push(j);
            match self.nodes.get(&c) {
                Some(l) => out.push((c, l)),
                None => break,
            }
        }
        out
    }

    pub fn set_box_cap(&mut self, cap: usize) {
        self.box_cap = cap;
    }

    /// Adds level `depth + 1` using an explicit stripe width and cut list.
    pub fn extend_with(&mut self, delta: &Rat, cuts: &[Ball]) -> Result<()> {
        let parents: Vec<(Word, Complex)> = self
            .level_nodes(self.depth)
            .map(|(w, c)| (w.clone(), c.clone()))
            .collect();
        let kids = expand_all(&parents, delta, cuts, self.box_cap)?;
        let mut b = 0;
        for ((w, _), ks) in parents.iter().zip(kids) {
            if !ks.is_empty() {
                b = b.max(ks.len() - 1);
            }
            for (j, k) in ks.into_iter().enumerate() {
                let mut c = w.clone();
                c.push(j);
                self.nodes.insert(c, k);
            }
        }
        self.bound.push(b);
        self.depth += 1;
        Ok(())
    }

    /// Adds one level from the stored source with the standard schedule.
    pub fn extend(&mut self) -> Result<()> {
        let i = self.depth;
        let cuts = match &self.source {
            Some(s) => level_cuts(s.balls(), i),
            None => Vec::new(),
        };
        self.extend_with(&stripe(i), &cuts)
    }

    pub fn level_union(&self, i: usize) -> Result<BoxSet> {
        if i > self.depth {
            return Err(Error::LevelNotBuilt {
                op: "level_union",
                level: i,
                built: self.depth,
            });
        }
        let mut out = BoxSet::empty(self.dim);
        for (_, c) in self.level_nodes(i) {
            out = out.union(c.set());
        }
        Ok(out)
    }

    /// Number of level-`i` nodes that still have descendants at level `depth`.
    pub fn surviving(&self, i: usize) -> Vec<Word> {
        let mut out: Vec<Word> = self
            .level_nodes(self.depth)
            .map(|(w, _)| w[..i.min(w.len())].to_vec())
            .collect();
        out.dedup();
        out
    }

    /// Exact check of: prefix-closure, the bound, nesting with positive gap
    /// along every ancestor chain, and disjointness within each level.
    pub fn check_invariants(&self) -> Result<()> {
        let bad = |detail: String| Error::InvalidArgument {
            op: "check_invariants",
            detail,
        };
        for (w, c) in &self.nodes {
            if w.len() > self.depth {
                return Err(bad(format!("node {w:?} below built depth")));
            }
            for (i, &x) in w.iter().enumerate() {
                if x > self.bound[i] {
                    return Err(bad(format!("node {w:?} exceeds bound at {i}")));
                }
            }
            for k in 0..w.len() {
                let anc = self
                    .nodes
                    .get(&w[..k])
                    .ok_or_else(|| bad(format!("prefix of {w:?} missing")))?;
                let (ok, gap) = compactly_included(c.set(), anc.set())?;
                if !ok || !gap.is_positive() {
                    return Err(bad(format!("{w:?} not compactly inside {:?}", &w[..k])));
                }
            }
        }
        for i in 0..=self.depth {
            let level: Vec<_> = self.level_nodes(i).collect();
            for a in 0..level.len() {
                for b in a + 1..level.len() {
                    if level[a].1.set().intersects(level[b].1.set()) {
                        return Err(bad(format!(
                            "{:?} and {:?} intersect",
                            level[a].0, level[b].0
                        )));
                    }
                }
            }
        }
        Ok(())
    }
}

/// The inductive construction over `Q = [-1,2]^n` to the given depth.
pub fn build_tree(s: &NegInfoSet, depth: usize) -> Result<ComplexTree> {
    build_tree_capped(s, depth, DEFAULT_BOX_CAP)
}

pub fn build_tree_capped(s: &NegInfoSet, depth: usize, cap: usize) -> Result<ComplexTree> {
    let s = s.embed_extended();
    let mut t = ComplexTree::root(s.dim());
    t.box_cap = cap;
    t.source = Some(s);
    for _ in 0..depth {
        t.extend()?;
    }
    Ok(t)
}

/// Negative information for `∩_i A_i`: for each level `i < depth` the
/// complement of `A_i` in `Q`, padded by half its gap to `A_{i+1}` so the
/// open cover still misses `A_{i+1}`.
pub fn tree_to_neginfo(t: &ComplexTree) -> Result<NegInfoSet> {
    let q = Ambient::Extended.cube(t.dim);
    let mut out = NegInfoSet::new(t.dim, Ambient::Extended)?;
    for i in 0..t.depth {
        let ai = t.level_union(i)?;
        let next = t.level_union(i + 1)?;
        let pad = match compactly_included(&next, &ai)?.1 {
            ExtRat::Finite(g) => half(&g),
            ExtRat::Infinite => int(1),
        };
        if pad.is_zero() {
            return Err(Error::InvalidArgument {
                op: "tree_to_neginfo",
                detail: format!("level {} not compactly inside level {i}", i + 1),
            });
        }
        for p in ai.complement_in(&q) {
            let g = p.closure().expand(&pad);
            out.extend(cover_open_box(&g.lo, &g.hi))?;
        }
    }
    out.set_exhausted(true);
    Ok(out)
}

fn children_of(label: &Complex, i: usize, balls: &[Ball], cap: usize) -> Result<Vec<Complex>> {
    expand(label.set(), &stripe(i), &level_cuts(balls, i), cap)
}

/// Follow the unique surviving child of a connected set: at each level wait
/// until every sibling but one is covered by the balls seen so far. One fuel
/// unit pulls one more ball and re-checks.
pub fn unique_path(stream: &mut SetStream, depth: usize, fuel: usize) -> Result<PathPrefix> {
    let mut st = stream.extended();
    let n = st.dim();
    let mut path = PathPrefix::root(Complex::from_box(Ambient::Extended.cube(n)));
    let mut used = 0usize;
    for i in 0..depth {
        st.fill_to(i + 1);
        let kids = children_of(path.last(), i, st.seen().balls(), DEFAULT_BOX_CAP)?;
        if kids.is_empty() {
            return Err(Error::PromiseViolated {
                op: "unique_path",
                detail: format!("every complex at level {} is covered: the set is empty", i + 1),
            });
        }
        let pick = loop {
            let open: Vec<usize> = (0..kids.len())
                .filter(|&j| !set_covered(st.seen().balls(), kids[j].set()))
                .collect();
            match open.len() {
                1 => break open[0],
                0 => {
                    return Err(Error::PromiseViolated {
                        op: "unique_path",
                        detail: format!("all siblings at level {} covered: the set is empty", i + 1),
                    })
                }
                _ => {
                    if used >= fuel || st.next_ball().is_none() {
                        return Err(Error::FuelExhausted {
                            op: "unique_path",
                            used,
                        });
                    }
                    used += 1;
                }
            }
        };
        path.word.push(pick);
        path.labels.push(kids[pick].clone());
    }
    *stream = st;
    Ok(path)
}

pub fn unique_path_set(s: &NegInfoSet, depth: usize, fuel: usize) -> Result<PathPrefix> {
    unique_path(&mut SetStream::from_set(s.clone()), depth, fuel)
}

fn set_covered(balls: &[Ball], set: &BoxSet) -> bool {
    set.boxes().iter().all(|b| box_covered_by(balls, b))
}

/// Descend by locating the point: at each level the unique child within
/// the query precision of `x`.
pub fn component_containing_point(
    s: &NegInfoSet,
    x: &dyn PointOracle,
    depth: usize,
    query_cap: usize,
) -> Result<PathPrefix> {
    check_dim("component_containing_point", s.dim(), x.dim())?;
    let s = s.embed_extended();
    let mut path = PathPrefix::root(Complex::from_box(Ambient::Extended.cube(s.dim())));
    for i in 0..depth {
        let kids = children_of(path.last(), i, s.balls(), DEFAULT_BOX_CAP)?;
        let mut eps = pow2(-4);
        let mut pick = None;
        for _ in 0..query_cap {
            let q = x.approx(&eps);
            let near: Vec<usize> = (0..kids.len())
                .filter(|&j| distance_to_set(kids[j].set(), &q).is_some_and(|d| d <= eps))
                .collect();
            match near.len() {
                0 => {
                    return Err(Error::PromiseViolated {
                        op: "component_containing_point",
                        detail: format!("point lies in no complex at level {}", i + 1),
                    })
                }
                1 => {
                    pick = Some(near[0]);
                    break;
                }
                _ => eps = half(&eps),
            }
        }
        let pick = pick.ok_or_else(|| Error::ResourceLimit {
            op: "component_containing_point",
            detail: format!("precision stalled after {query_cap} queries"),
        })?;
        path.word.push(pick);
        path.labels.push(kids[pick].clone());
    }
    Ok(path)
}

/// Anytime selection of an infinite path: the lexicographically least
/// level-`depth` node with descendants at the deepest level explored. Each
/// fuel unit explores one more level; changes of selection are counted.
pub fn anytime_component(s: &NegInfoSet, depth: usize, fuel: usize) -> Result<(PathPrefix, usize)> {
    let mut t = build_tree(s, depth)?;
    let mut current: Option<Word> = None;
    let mut changes = 0usize;
    for step in 0..=fuel {
        if step > 0 {
            t.extend()?;
        }
        let sel = t.surviving(depth).into_iter().next().ok_or(Error::PromiseViolated {
            op: "anytime_component",
            detail: "tree died: the set is empty".into(),
        })?;
        if current.as_ref().is_some_and(|c| c != &sel) {
            changes += 1;
        }
        current = Some(sel);
    }
    let word = current.expect("at least one step");
    let labels = (0..=depth)
        .map(|k| t.label(&word[..k]).expect("prefix-closed").clone())
        .collect();
    Ok((PathPrefix { word, labels }, changes))
}

#[derive(Serialize, Deserialize)]
struct NodeJson {
    word: Word,
    complex: Complex,
}

#[derive(Serialize, Deserialize)]
struct TreeJson {
    bound: Vec<usize>,
    nodes: Vec<NodeJson>,
    depth: usize,
}

impl Serialize for ComplexTree {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        TreeJson {
            bound: self.bound.clone(),
            nodes: self
                .nodes
                .iter()
                .map(|(w, c)| NodeJson {
                    word: w.clone(),
                    complex: c.clone(),
                })
                .collect(),
            depth: self.depth,
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for ComplexTree {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        use serde::de::Error as _;
        let raw = TreeJson::deserialize(d)?;
        let dim = raw
            .nodes
            .first()
            .map(|n| n.complex.dim())
            .ok_or_else(|| D::Error::custom("tree without a root"))?;
        if raw.bound.len() != raw.depth {
            return Err(D::Error::custom("bound length differs from depth"));
        }
        let t = ComplexTree {
            dim,
            nodes: raw.nodes.into_iter().map(|n| (n.word, n.complex)).collect(),
            bound: raw.bound,
            depth: raw.depth,
            source: None,
            box_cap: DEFAULT_BOX_CAP,
        };
        t.check_invariants().map_err(D::Error::custom)?;
        Ok(t)
    }
}
