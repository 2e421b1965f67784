//! Exact max-norm geometry of rational boxes and box complexes.
//!
//! Sets are finite unions of closed axis-aligned boxes with rational bounds.
//! A cube `B[c, r]` is the box with equal side length `2r`. Unions coming out
//! of subtraction and erosion are kept as boxes; cubes are only produced on
//! export when a box happens to be one.

use std::collections::{BTreeMap, VecDeque};

use num_traits::{Signed, Zero};
use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};
use crate::rat::{half, int, max_rat, min_rat, serde_rat, serde_rat_vec, ExtRat, Rat};

/// Closed max-norm ball `B[c, r]`, `r > 0`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct RatCube {
    #[serde(rename = "c", with = "serde_rat_vec")]
    pub center: Vec<Rat>,
    #[serde(rename = "r", with = "serde_rat")]
    pub radius: Rat,
}

impl RatCube {
    pub fn new(center: Vec<Rat>, radius: Rat) -> Result<Self> {
        if !radius.is_positive() {
            return Err(Error::InvalidArgument {
                op: "RatCube::new",
                detail: "radius must be positive".into(),
            });
        }
        if center.is_empty() {
            return Err(Error::InvalidArgument {
                op: "RatCube::new",
                detail: "dimension must be at least 1".into(),
            });
        }
        Ok(RatCube { center, radius })
    }

    pub fn dim(&self) -> usize {
        self.center.len()
    }

    pub fn to_box(&self) -> RatBox {
        RatBox {
            lo: self.center.iter().map(|c| c - &self.radius).collect(),
            hi: self.center.iter().map(|c| c + &self.radius).collect(),
        }
    }

    /// Membership in the open ball `B(c, r)`.
    pub fn open_contains(&self, x: &[Rat]) -> bool {
        self.center
            .iter()
            .zip(x)
            .all(|(c, xi)| (xi - c).abs() < self.radius)
    }
}

/// Closed box `∏ [lo_i, hi_i]`; degenerate axes (`lo_i == hi_i`) are allowed.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct RatBox {
    #[serde(with = "serde_rat_vec")]
    pub lo: Vec<Rat>,
    #[serde(with = "serde_rat_vec")]
    pub hi: Vec<Rat>,
}

impl RatBox {
    pub fn new(lo: Vec<Rat>, hi: Vec<Rat>) -> Result<Self> {
        check_dim("RatBox::new", lo.len(), hi.len())?;
        if lo.is_empty() || lo.iter().zip(&hi).any(|(a, b)| a > b) {
            return Err(Error::InvalidArgument {
                op: "RatBox::new",
                detail: "need lo <= hi on every axis".into(),
            });
        }
        Ok(RatBox { lo, hi })
    }

    /// `[lo, hi]^n`.
    pub fn uniform(n: usize, lo: Rat, hi: Rat) -> Self {
        RatBox {
            lo: vec![lo; n],
            hi: vec![hi; n],
        }
    }

    pub fn point(x: &[Rat]) -> Self {
        RatBox {
            lo: x.to_vec(),
            hi: x.to_vec(),
        }
    }

    pub fn dim(&self) -> usize {
        self.lo.len()
    }

    pub fn width(&self, i: usize) -> Rat {
        &self.hi[i] - &self.lo[i]
    }

    pub fn is_degenerate(&self) -> bool {
        self.lo.iter().zip(&self.hi).any(|(a, b)| a == b)
    }

    pub fn center(&self) -> Vec<Rat> {
        self.lo.iter().zip(&self.hi).map(|(a, b)| half(&(a + b))).collect()
    }

    /// Largest side length; the max-norm diameter.
    pub fn diameter(&self) -> Rat {
        (0..self.dim())
            .map(|i| self.width(i))
            .max()
            .unwrap_or_else(Rat::zero)
    }

    pub fn as_cube(&self) -> Option<RatCube> {
        let w = self.width(0);
        if w.is_zero() || (1..self.dim()).any(|i| self.width(i) != w) {
            return None;
        }
        Some(RatCube {
            center: self.center(),
            radius: half(&w),
        })
    }

    pub fn contains(&self, x: &[Rat]) -> bool {
        self.lo
            .iter()
            .zip(&self.hi)
            .zip(x)
            .all(|((a, b), xi)| a <= xi && xi <= b)
    }

    pub fn contains_box(&self, other: &RatBox) -> bool {
        (0..self.dim()).all(|i| self.lo[i] <= other.lo[i] && other.hi[i] <= self.hi[i])
    }

    pub fn intersects(&self, other: &RatBox) -> bool {
        (0..self.dim()).all(|i| self.lo[i] <= other.hi[i] && other.lo[i] <= self.hi[i])
    }

    pub fn interiors_overlap(&self, other: &RatBox) -> bool {
        (0..self.dim()).all(|i| self.lo[i] < other.hi[i] && other.lo[i] < self.hi[i])
    }

    pub fn intersection(&self, other: &RatBox) -> Option<RatBox> {
        if !self.intersects(other) {
            return None;
        }
        Some(RatBox {
            lo: (0..self.dim())
                .map(|i| max_rat(&self.lo[i], &other.lo[i]).clone())
                .collect(),
            hi: (0..self.dim())
                .map(|i| min_rat(&self.hi[i], &other.hi[i]).clone())
                .collect(),
        })
    }

    pub fn expand(&self, delta: &Rat) -> RatBox {
        RatBox {
            lo: self.lo.iter().map(|a| a - delta).collect(),
            hi: self.hi.iter().map(|b| b + delta).collect(),
        }
    }

    /// Max-norm distance from a point.
    pub fn dist_point(&self, x: &[Rat]) -> Rat {
        let mut d = Rat::zero();
        for i in 0..self.dim() {
            let gap = if x[i] < self.lo[i] {
                &self.lo[i] - &x[i]
            } else if x[i] > self.hi[i] {
                &x[i] - &self.hi[i]
            } else {
                continue;
            };
            if gap > d {
                d = gap;
            }
        }
        d
    }

    /// Max-norm distance between two boxes.
    pub fn dist_box(&self, other: &RatBox) -> Rat {
        let mut d = Rat::zero();
        for i in 0..self.dim() {
            let gap = if other.hi[i] < self.lo[i] {
                &self.lo[i] - &other.hi[i]
            } else if other.lo[i] > self.hi[i] {
                &other.lo[i] - &self.hi[i]
            } else {
                continue;
            };
            if gap > d {
                d = gap;
            }
        }
        d
    }

    /// Nearest point of the box to `x` (coordinate clamp).
    pub fn project(&self, x: &[Rat]) -> Vec<Rat> {
        x.iter()
            .enumerate()
            .map(|(i, xi)| {
                if xi < &self.lo[i] {
                    self.lo[i].clone()
                } else if xi > &self.hi[i] {
                    self.hi[i].clone()
                } else {
                    xi.clone()
                }
            })
            .collect()
    }

    /// Axis sweep of `self \ (lo, hi)` for the open box `(lo, hi)`; pieces are closed.
    pub fn minus_open(&self, lo: &[Rat], hi: &[Rat]) -> Vec<RatBox> {
        if (0..self.dim()).any(|i| self.hi[i] <= lo[i] || self.lo[i] >= hi[i]) {
            return vec![self.clone()];
        }
        let mut out = Vec::new();
        let mut rem = self.clone();
        for i in 0..self.dim() {
            if rem.lo[i] <= lo[i] {
                let mut p = rem.clone();
                p.hi[i] = lo[i].clone();
                out.push(p);
            }
            if rem.hi[i] >= hi[i] {
                let mut p = rem.clone();
                p.lo[i] = hi[i].clone();
                out.push(p);
            }
            if rem.lo[i] < lo[i] {
                rem.lo[i] = lo[i].clone();
            }
            if rem.hi[i] > hi[i] {
                rem.hi[i] = hi[i].clone();
            }
        }
        out
    }

    /// Closure of `self \ other` for a closed box `other`.
    pub fn minus_closed_closure(&self, other: &RatBox) -> Vec<RatBox> {
        if !self.intersects(other) {
            return vec![self.clone()];
        }
        let mut out = Vec::new();
        let mut rem = self.clone();
        for i in 0..self.dim() {
            if rem.lo[i] < other.lo[i] {
                let mut p = rem.clone();
                p.hi[i] = other.lo[i].clone();
                out.push(p);
                rem.lo[i] = other.lo[i].clone();
            }
            if rem.hi[i] > other.hi[i] {
                let mut p = rem.clone();
                p.lo[i] = other.hi[i].clone();
                out.push(p);
                rem.hi[i] = other.hi[i].clone();
            }
        }
        out
    }
}

/// Box with independently open or closed faces; used for complements.
#[derive(Clone, Debug)]
pub(crate) struct HalfBox {
    pub lo: Vec<Rat>,
    pub hi: Vec<Rat>,
    pub lo_open: Vec<bool>,
    pub hi_open: Vec<bool>,
}

impl HalfBox {
    fn closed(b: &RatBox) -> Self {
        HalfBox {
            lo: b.lo.clone(),
            hi: b.hi.clone(),
            lo_open: vec![false; b.dim()],
            hi_open: vec![false; b.dim()],
        }
    }

    fn is_empty(&self) -> bool {
        (0..self.lo.len()).any(|i| {
            self.lo[i] > self.hi[i]
                || (self.lo[i] == self.hi[i] && (self.lo_open[i] || self.hi_open[i]))
        })
    }

    fn meets(&self, b: &RatBox) -> bool {
        (0..self.lo.len()).all(|i| {
            let left_ok = if self.lo[i] == b.hi[i] {
                !self.lo_open[i]
            } else {
                self.lo[i] < b.hi[i]
            };
            let right_ok = if self.hi[i] == b.lo[i] {
                !self.hi_open[i]
            } else {
                self.hi[i] > b.lo[i]
            };
            left_ok && right_ok
        })
    }

    fn minus_closed(&self, b: &RatBox) -> Vec<HalfBox> {
        if !self.meets(b) {
            return vec![self.clone()];
        }
        let mut out = Vec::new();
        let mut rem = self.clone();
        for i in 0..self.lo.len() {
            if rem.lo[i] < b.lo[i] {
                let mut p = rem.clone();
                p.hi[i] = b.lo[i].clone();
                p.hi_open[i] = true;
                out.push(p);
                rem.lo[i] = b.lo[i].clone();
                rem.lo_open[i] = false;
            }
            if rem.hi[i] > b.hi[i] {
                let mut p = rem.clone();
                p.lo[i] = b.hi[i].clone();
                p.lo_open[i] = true;
                out.push(p);
                rem.hi[i] = b.hi[i].clone();
                rem.hi_open[i] = false;
            }
        }
        out.retain(|p| !p.is_empty());
        out
    }

    pub(crate) fn closure(&self) -> RatBox {
        RatBox {
            lo: self.lo.clone(),
            hi: self.hi.clone(),
        }
    }
}

/// Finite union of closed boxes of one dimension.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct BoxSet {
    dim: usize,
    boxes: Vec<RatBox>,
}

impl BoxSet {
    pub fn empty(dim: usize) -> Self {
        BoxSet {
            dim,
            boxes: Vec::new(),
        }
    }

    pub fn from_boxes(dim: usize, boxes: Vec<RatBox>) -> Result<Self> {
        for b in &boxes {
            check_dim("BoxSet::from_boxes", dim, b.dim())?;
        }
        Ok(BoxSet { dim, boxes })
    }

    pub fn from_cubes(dim: usize, cubes: &[RatCube]) -> Result<Self> {
        Self::from_boxes(dim, cubes.iter().map(RatCube::to_box).collect())
    }

    pub fn single(b: RatBox) -> Self {
        BoxSet {
            dim: b.dim(),
            boxes: vec![b],
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn boxes(&self) -> &[RatBox] {
        &self.boxes
    }

    pub fn into_boxes(self) -> Vec<RatBox> {
        self.boxes
    }

    pub fn len(&self) -> usize {
        self.boxes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.boxes.is_empty()
    }

    pub fn contains(&self, x: &[Rat]) -> bool {
        self.boxes.iter().any(|b| b.contains(x))
    }

    pub fn bbox(&self) -> Option<RatBox> {
        let first = self.boxes.first()?;
        let mut lo = first.lo.clone();
        let mut hi = first.hi.clone();
        for b in &self.boxes[1..] {
            for i in 0..self.dim {
                if b.lo[i] < lo[i] {
                    lo[i] = b.lo[i].clone();
                }
                if b.hi[i] > hi[i] {
                    hi[i] = b.hi[i].clone();
                }
            }
        }
        Some(RatBox { lo, hi })
    }

    /// Max-norm diameter of the union (zero for the empty set).
    pub fn diameter(&self) -> Rat {
        self.bbox().map(|b| b.diameter()).unwrap_or_else(Rat::zero)
    }

    pub fn union(&self, other: &BoxSet) -> BoxSet {
        let mut boxes = self.boxes.clone();
        boxes.extend(other.boxes.iter().cloned());
        BoxSet {
            dim: self.dim,
            boxes,
        }
    }

    pub fn intersects(&self, other: &BoxSet) -> bool {
        self.boxes
            .iter()
            .any(|a| other.boxes.iter().any(|b| a.intersects(b)))
    }

    pub fn intersects_box(&self, b: &RatBox) -> bool {
        self.boxes.iter().any(|a| a.intersects(b))
    }

    /// Affine image `x ↦ scale·x + shift` (scale > 0) applied to every box.
    pub fn affine(&self, scale: &Rat, shift: &Rat) -> BoxSet {
        BoxSet {
            dim: self.dim,
            boxes: self
                .boxes
                .iter()
                .map(|b| RatBox {
                    lo: b.lo.iter().map(|a| a * scale + shift).collect(),
                    hi: b.hi.iter().map(|a| a * scale + shift).collect(),
                })
                .collect(),
        }
    }

    pub fn has_interior_overlap(&self) -> bool {
        let n = self.boxes.len();
        (0..n).any(|i| (i + 1..n).any(|j| self.boxes[i].interiors_overlap(&self.boxes[j])))
    }

    /// Canonical simplified form of the same union: adjacent full boxes merged,
    /// measure-zero boxes trimmed against full ones, sorted.
    pub fn normalized(&self) -> BoxSet {
        let (full, degen): (Vec<_>, Vec<_>) =
            self.boxes.iter().cloned().partition(|b| !b.is_degenerate());
        let full = merge_boxes(full);
        let mut rest = Vec::new();
        for d in degen {
            let mut pieces = vec![d];
            for f in &full {
                if pieces.iter().any(|p| p.intersects(f)) {
                    pieces = pieces
                        .into_iter()
                        .flat_map(|p| p.minus_closed_closure(f))
                        .collect();
                }
                if pieces.is_empty() {
                    break;
                }
            }
            rest.extend(pieces);
        }
        rest.sort();
        rest.dedup();
        let mut kept: Vec<RatBox> = Vec::new();
        for (i, b) in rest.iter().enumerate() {
            let covered = rest
                .iter()
                .enumerate()
                .any(|(j, o)| j != i && o.contains_box(b) && (o != b));
            if !covered {
                kept.push(b.clone());
            }
        }
        let mut boxes = full;
        boxes.extend(merge_boxes(kept));
        boxes.sort();
        BoxSet {
            dim: self.dim,
            boxes,
        }
    }

    /// `self \ (lo, hi)` for an open box.
    pub fn minus_open_box(&self, lo: &[Rat], hi: &[Rat]) -> BoxSet {
        let boxes = self
            .boxes
            .iter()
            .flat_map(|b| b.minus_open(lo, hi))
            .collect();
        BoxSet {
            dim: self.dim,
            boxes,
        }
    }

    /// Complement of the union inside the closed region, as half-open pieces.
    pub(crate) fn complement_in(&self, region: &RatBox) -> Vec<HalfBox> {
        let mut pieces = vec![HalfBox::closed(region)];
        for b in &self.boxes {
            pieces = pieces.into_iter().flat_map(|p| p.minus_closed(b)).collect();
            if pieces.is_empty() {
                break;
            }
        }
        pieces
    }
}

/// Merge boxes whose union is again a box, repeatedly, axis by axis.
fn merge_boxes(mut boxes: Vec<RatBox>) -> Vec<RatBox> {
    if boxes.is_empty() {
        return boxes;
    }
    let dim = boxes[0].dim();
    loop {
        let before = boxes.len();
        for k in 0..dim {
            let mut groups: BTreeMap<(Vec<Rat>, Vec<Rat>), Vec<(Rat, Rat)>> = BTreeMap::new();
            for b in boxes.drain(..) {
                let mut lo = b.lo;
                let mut hi = b.hi;
                let a = std::mem::take(&mut lo[k]);
                let c = std::mem::take(&mut hi[k]);
                groups.entry((lo, hi)).or_default().push((a, c));
            }
            for ((lo, hi), mut ivs) in groups {
                ivs.sort();
                let mut merged: Vec<(Rat, Rat)> = Vec::new();
                for (a, c) in ivs {
                    match merged.last_mut() {
                        Some(last) if a <= last.1 => {
                            if c > last.1 {
                                last.1 = c;
                            }
                        }
                        _ => merged.push((a, c)),
                    }
                }
                for (a, c) in merged {
                    let mut l = lo.clone();
                    let mut h = hi.clone();
                    l[k] = a;
                    h[k] = c;
                    boxes.push(RatBox { lo: l, hi: h });
                }
            }
        }
        if boxes.len() == before {
            break;
        }
    }
    boxes.sort();
    boxes
}

/// A box complex: interiors pairwise disjoint, union connected (or empty).
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Complex {
    set: BoxSet,
}

impl Complex {
    pub fn new(set: BoxSet) -> Result<Self> {
        if set.has_interior_overlap() {
            return Err(Error::InteriorOverlap { op: "Complex::new" });
        }
        if components_of(&set).len() > 1 {
            return Err(Error::InvalidArgument {
                op: "Complex::new",
                detail: "union is not connected".into(),
            });
        }
        Ok(Complex { set })
    }

    pub fn from_box(b: RatBox) -> Self {
        Complex {
            set: BoxSet::single(b),
        }
    }

    pub fn set(&self) -> &BoxSet {
        &self.set
    }

    pub fn into_set(self) -> BoxSet {
        self.set
    }

    pub fn dim(&self) -> usize {
        self.set.dim()
    }

    pub fn is_empty(&self) -> bool {
        self.set.is_empty()
    }

    /// Lexicographically least vertex of the lexicographically least box.
    pub fn anchor(&self) -> Option<Vec<Rat>> {
        self.set.boxes.iter().min().map(|b| b.lo.clone())
    }
}

/// Closed intersection of two cubes (possibly a degenerate box).
pub fn cube_intersection(a: &RatCube, b: &RatCube) -> Result<Option<RatBox>> {
    check_dim("cube_intersection", a.dim(), b.dim())?;
    Ok(a.to_box().intersection(&b.to_box()))
}

fn components_of(set: &BoxSet) -> Vec<Vec<usize>> {
    let n = set.boxes.len();
    let mut parent: Vec<usize> = (0..n).collect();
    fn find(p: &mut [usize], mut x: usize) -> usize {
        while p[x] != x {
            p[x] = p[p[x]];
            x = p[x];
        }
        x
    }
    for i in 0..n {
        for j in i + 1..n {
            if set.boxes[i].intersects(&set.boxes[j]) {
                let (a, b) = (find(&mut parent, i), find(&mut parent, j));
                if a != b {
                    parent[a.max(b)] = a.min(b);
                }
            }
        }
    }
    let mut groups: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for i in 0..n {
        let r = find(&mut parent, i);
        groups.entry(r).or_default().push(i);
    }
    groups.into_values().collect()
}

/// Connected components of a union of interior-disjoint boxes, ordered by
/// their lexicographically least box (lower corner, then upper corner).
pub fn components(set: &BoxSet) -> Result<Vec<Complex>> {
    if set.has_interior_overlap() {
        return Err(Error::InteriorOverlap { op: "components" });
    }
    Ok(split_components(set))
}

pub(crate) fn split_components(set: &BoxSet) -> Vec<Complex> {
    let mut out: Vec<Complex> = components_of(set)
        .into_iter()
        .map(|idx| {
            let mut boxes: Vec<RatBox> = idx.into_iter().map(|i| set.boxes[i].clone()).collect();
            boxes.sort();
            Complex {
                set: BoxSet {
                    dim: set.dim,
                    boxes,
                },
            }
        })
        .collect();
    out.sort_by(|a, b| a.set.boxes[0].cmp(&b.set.boxes[0]));
    out
}

/// `(∪set) \ B(center, radius)` for the open max-norm ball.
pub fn subtract_open_ball(set: &BoxSet, center: &[Rat], radius: &Rat) -> Result<BoxSet> {
    check_dim("subtract_open_ball", set.dim(), center.len())?;
    if !radius.is_positive() {
        return Ok(set.clone());
    }
    let lo: Vec<Rat> = center.iter().map(|c| c - radius).collect();
    let hi: Vec<Rat> = center.iter().map(|c| c + radius).collect();
    Ok(set.minus_open_box(&lo, &hi).normalized())
}

/// `(∪set) \ {x : d(x, ∂∪set) < delta}`: the erosion by the closed cube of radius `delta`.
pub fn strip_boundary(set: &BoxSet, delta: &Rat) -> Result<BoxSet> {
    if !delta.is_positive() {
        return Err(Error::InvalidArgument {
            op: "strip_boundary",
            detail: "delta must be positive".into(),
        });
    }
    let Some(bbox) = set.bbox() else {
        return Ok(set.clone());
    };
    let region = bbox.expand(delta);
    let mut out = set.clone();
    for p in set.complement_in(&region) {
        let grown = p.closure().expand(delta);
        out = out.minus_open_box(&grown.lo, &grown.hi);
        if out.is_empty() {
            break;
        }
    }
    Ok(out.normalized())
}

/// Whether `closure(∪a) ⊆ interior(∪b)`, with the exact gap `d(∪a, (∪b)^c)`.
pub fn compactly_included(a: &BoxSet, b: &BoxSet) -> Result<(bool, ExtRat)> {
    check_dim("compactly_included", a.dim(), b.dim())?;
    let Some(abox) = a.bbox() else {
        return Ok((true, ExtRat::Infinite));
    };
    let region = match b.bbox() {
        Some(bb) => {
            let u = BoxSet::from_boxes(a.dim(), vec![abox, bb])?;
            u.bbox().expect("nonempty").expand(&int(1))
        }
        None => return Ok((false, ExtRat::Finite(Rat::zero()))),
    };
    let mut gap: Option<Rat> = None;
    for p in b.complement_in(&region) {
        let c = p.closure();
        for ab in a.boxes() {
            let d = ab.dist_box(&c);
            if gap.as_ref().is_none_or(|g| &d < g) {
                gap = Some(d);
            }
            if gap.as_ref().is_some_and(|g| g.is_zero()) {
                return Ok((false, ExtRat::Finite(Rat::zero())));
            }
        }
    }
    let gap = gap.expect("region strictly contains b");
    Ok((gap.is_positive(), ExtRat::Finite(gap)))
}

/// `(d(x, ∪set), d(x, (∪set)^c))`, exact in the max norm.
pub fn distance_pair(set: &BoxSet, x: &[Rat]) -> Result<(ExtRat, Rat)> {
    check_dim("distance_pair", set.dim(), x.len())?;
    if set.is_empty() {
        return Ok((ExtRat::Infinite, Rat::zero()));
    }
    let d_in = set
        .boxes()
        .iter()
        .map(|b| b.dist_point(x))
        .min()
        .expect("nonempty");
    if !d_in.is_zero() {
        return Ok((ExtRat::Finite(d_in), Rat::zero()));
    }
    Ok((ExtRat::Finite(d_in), distance_to_complement(set, x)))
}

/// `d(x, (∪set)^c)`; zero unless `x` is interior.
pub fn distance_to_complement(set: &BoxSet, x: &[Rat]) -> Rat {
    let Some(bb) = set.bbox() else {
        return Rat::zero();
    };
    let region = bb.expand(&int(1));
    set.complement_in(&region)
        .iter()
        .map(|p| p.closure().dist_point(x))
        .min()
        .unwrap_or_else(Rat::zero)
}

/// `d(x, ∪set)`, `None` for the empty set.
pub fn distance_to_set(set: &BoxSet, x: &[Rat]) -> Option<Rat> {
    set.boxes().iter().map(|b| b.dist_point(x)).min()
}

/// Piecewise-linear path inside a complex; every segment lies in one box.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PolyPath {
    #[serde(with = "crate::rat::serde_rat_mat")]
    pub vertices: Vec<Vec<Rat>>,
}

impl PolyPath {
    /// Uniform parameterization over `[0, 1]`, one equal subinterval per segment.
    pub fn at(&self, t: &Rat) -> Vec<Rat> {
        let k = self.vertices.len() - 1;
        if k == 0 || t <= &Rat::zero() {
            return self.vertices[0].clone();
        }
        if t >= &int(1) {
            return self.vertices[k].clone();
        }
        let scaled = t * int(k as i64);
        let j = scaled.floor();
        let s = &scaled - &j;
        let j: usize = num_traits::ToPrimitive::to_usize(&j.to_integer()).unwrap_or(0);
        let a = &self.vertices[j];
        let b = &self.vertices[j + 1];
        a.iter().zip(b).map(|(x, y)| x + (y - x) * &s).collect()
    }

    /// Enclosing box of the path portion `{at(t) : t ∈ [t0, t1]}`.
    pub fn enclosure(&self, t0: &Rat, t1: &Rat) -> RatBox {
        let mut pts = vec![self.at(t0), self.at(t1)];
        let k = self.vertices.len() - 1;
        for (j, v) in self.vertices.iter().enumerate() {
            let tj = Rat::new((j as i64).into(), (k.max(1) as i64).into());
            if &tj > t0 && &tj < t1 {
                pts.push(v.clone());
            }
        }
        let n = pts[0].len();
        let lo = (0..n)
            .map(|i| pts.iter().map(|p| p[i].clone()).min().expect("nonempty"))
            .collect();
        let hi = (0..n)
            .map(|i| pts.iter().map(|p| p[i].clone()).max().expect("nonempty"))
            .collect();
        RatBox { lo, hi }
    }
}

/// Path from `x` to `y` inside `∪c`: breadth-first search over box adjacency,
/// passing through a shared point of every consecutive pair of boxes and the
/// center of every intermediate box.
pub fn path_witness(c: &Complex, x: &[Rat], y: &[Rat]) -> Result<PolyPath> {
    let set = c.set();
    check_dim("path_witness", set.dim(), x.len())?;
    check_dim("path_witness", set.dim(), y.len())?;
    if set.is_empty() {
        return Err(Error::InvalidArgument {
            op: "path_witness",
            detail: "empty complex".into(),
        });
    }
    let boxes = set.boxes();
    let start = boxes
        .iter()
        .position(|b| b.contains(x))
        .ok_or(Error::NotInSet { op: "path_witness" })?;
    let goal = boxes
        .iter()
        .position(|b| b.contains(y))
        .ok_or(Error::NotInSet { op: "path_witness" })?;
    let mut prev = vec![usize::MAX; boxes.len()];
    let mut queue = VecDeque::from([start]);
    prev[start] = start;
    while let Some(u) = queue.pop_front() {
        if u == goal {
            break;
        }
        for v in 0..boxes.len() {
            if prev[v] == usize::MAX && boxes[u].intersects(&boxes[v]) {
                prev[v] = u;
                queue.push_back(v);
            }
        }
    }
    if prev[goal] == usize::MAX {
        return Err(Error::InvalidArgument {
            op: "path_witness",
            detail: "points lie in different components".into(),
        });
    }
    let mut chain = vec![goal];
    while *chain.last().expect("nonempty") != start {
        let u = *chain.last().expect("nonempty");
        chain.push(prev[u]);
    }
    chain.reverse();
    let mut vertices = vec![x.to_vec()];
    for w in chain.windows(2) {
        if w[0] != start {
            vertices.push(boxes[w[0]].center());
        }
        let shared = boxes[w[0]]
            .intersection(&boxes[w[1]])
            .expect("adjacent boxes meet");
        vertices.push(shared.center());
    }
    vertices.push(y.to_vec());
    vertices.dedup();
    Ok(PolyPath { vertices })
}

#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum BoxJson {
    Cube {
        #[serde(with = "serde_rat_vec")]
        c: Vec<Rat>,
        #[serde(with = "serde_rat")]
        r: Rat,
    },
    Box {
        #[serde(with = "serde_rat_vec")]
        lo: Vec<Rat>,
        #[serde(with = "serde_rat_vec")]
        hi: Vec<Rat>,
    },
}

#[derive(Serialize, Deserialize)]
struct BoxSetJson {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    dim: Option<usize>,
    cubes: Vec<BoxJson>,
}

impl Serialize for BoxSet {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let cubes = self
            .boxes
            .iter()
            .map(|b| match b.as_cube() {
                Some(c) => BoxJson::Cube {
                    c: c.center,
                    r: c.radius,
                },
                None => BoxJson::Box {
                    lo: b.lo.clone(),
                    hi: b.hi.clone(),
                },
            })
            .collect();
        BoxSetJson {
            dim: Some(self.dim),
            cubes,
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for BoxSet {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        use serde::de::Error as _;
        let raw = BoxSetJson::deserialize(d)?;
        let mut boxes = Vec::new();
        for b in raw.cubes {
            let b = match b {
                BoxJson::Cube { c, r } => RatCube::new(c, r).map(|c| c.to_box()),
                BoxJson::Box { lo, hi } => RatBox::new(lo, hi),
            }
            .map_err(D::Error::custom)?;
            boxes.push(b);
        }
        let dim = raw
            .dim
            .or_else(|| boxes.first().map(|b| b.dim()))
            .ok_or_else(|| D::Error::custom("empty set needs an explicit dim"))?;
        BoxSet::from_boxes(dim, boxes).map_err(D::Error::custom)
    }
}

impl Serialize for Complex {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        self.set.serialize(s)
    }
}

impl<'de> Deserialize<'de> for Complex {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        use serde::de::Error as _;
        Complex::new(BoxSet::deserialize(d)?).map_err(D::Error::custom)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rat::rat;

    fn cube(c: &[Rat], r: Rat) -> RatCube {
        RatCube::new(c.to_vec(), r).unwrap()
    }

    fn iv(a: Rat, b: Rat) -> RatBox {
        RatBox::new(vec![a], vec![b]).unwrap()
    }

    fn set1(ivs: &[(Rat, Rat)]) -> BoxSet {
        BoxSet::from_boxes(1, ivs.iter().map(|(a, b)| iv(a.clone(), b.clone())).collect()).unwrap()
    }

    #[test]
    fn cube_intersection_examples() {
        let a = cube(&[int(0)], rat(1, 4));
        let b = cube(&[rat(1, 2)], rat(1, 4));
        assert_eq!(
            cube_intersection(&a, &b).unwrap(),
            Some(iv(rat(1, 4), rat(1, 4)))
        );
        let c = cube(&[int(0)], rat(1, 8));
        let d = cube(&[int(1)], rat(1, 8));
        assert_eq!(cube_intersection(&c, &d).unwrap(), None);
        let e = cube(&[int(0), int(0)], rat(1, 2));
        let f = cube(&[rat(1, 2), rat(1, 2)], rat(1, 2));
        assert_eq!(
            cube_intersection(&e, &f).unwrap(),
            Some(RatBox::uniform(2, int(0), rat(1, 2)))
        );
        let g = cube(&[int(0), int(0), int(0)], int(1));
        assert!(matches!(
            cube_intersection(&a, &g),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn components_examples() {
        let s = BoxSet::from_cubes(
            1,
            &[cube(&[rat(1, 8)], rat(1, 8)), cube(&[rat(3, 4)], rat(1, 4))],
        )
        .unwrap();
        assert_eq!(components(&s).unwrap().len(), 2);
        let s = BoxSet::from_cubes(
            1,
            &[cube(&[rat(1, 4)], rat(1, 4)), cube(&[rat(3, 4)], rat(1, 4))],
        )
        .unwrap();
        assert_eq!(components(&s).unwrap().len(), 1);
        let overlapping = set1(&[(int(0), rat(1, 2)), (rat(1, 4), int(1))]);
        assert!(matches!(
            components(&overlapping),
            Err(Error::InteriorOverlap { .. })
        ));
    }

    #[test]
    fn subtract_examples() {
        let unit = set1(&[(int(0), int(1))]);
        let r = subtract_open_ball(&unit, &[rat(1, 2)], &rat(1, 4)).unwrap();
        assert_eq!(r, set1(&[(int(0), rat(1, 4)), (rat(3, 4), int(1))]));
        let r = subtract_open_ball(&unit, &[int(2)], &rat(1, 2)).unwrap();
        assert_eq!(r, unit);
        let r = subtract_open_ball(&unit, &[int(2)], &int(-1)).unwrap();
        assert_eq!(r, unit);
        // the open ball leaves its boundary points behind
        let r = subtract_open_ball(&unit, &[rat(1, 2)], &rat(1, 2)).unwrap();
        assert_eq!(r, set1(&[(int(0), int(0)), (int(1), int(1))]));
    }

    #[test]
    fn strip_examples() {
        let unit = set1(&[(int(0), int(1))]);
        assert_eq!(
            strip_boundary(&unit, &rat(1, 4)).unwrap(),
            set1(&[(rat(1, 4), rat(3, 4))])
        );
        assert_eq!(
            strip_boundary(&unit, &rat(1, 2)).unwrap(),
            set1(&[(rat(1, 2), rat(1, 2))])
        );
        assert!(strip_boundary(&unit, &int(1)).unwrap().is_empty());
        assert!(strip_boundary(&unit, &int(0)).is_err());
        let sq = BoxSet::single(RatBox::uniform(2, int(0), int(1)));
        assert_eq!(
            strip_boundary(&sq, &rat(1, 4)).unwrap(),
            BoxSet::single(RatBox::uniform(2, rat(1, 4), rat(3, 4)))
        );
    }

    #[test]
    fn strip_l_shape_keeps_inner_corner_exact() {
        // [0,2]x[0,1] ∪ [0,1]x[1,2]
        let l = BoxSet::from_boxes(
            2,
            vec![
                RatBox::new(vec![int(0), int(0)], vec![int(2), int(1)]).unwrap(),
                RatBox::new(vec![int(0), int(1)], vec![int(1), int(2)]).unwrap(),
            ],
        )
        .unwrap();
        let e = strip_boundary(&l, &rat(1, 4)).unwrap();
        assert!(e.contains(&[rat(3, 4), rat(3, 4)]));
        assert!(e.contains(&[rat(7, 4), rat(3, 4)]));
        assert!(e.contains(&[rat(3, 4), rat(7, 4)]));
        assert!(!e.contains(&[rat(7, 8), rat(7, 8)]));
        assert!(!e.contains(&[rat(1, 8), rat(1, 2)]));
    }

    #[test]
    fn compact_inclusion_examples() {
        let unit = set1(&[(int(0), int(1))]);
        let (ok, gap) = compactly_included(&set1(&[(rat(1, 4), rat(3, 4))]), &unit).unwrap();
        assert!(ok);
        assert_eq!(gap, ExtRat::Finite(rat(1, 4)));
        let (ok, gap) = compactly_included(&set1(&[(int(0), rat(1, 2))]), &unit).unwrap();
        assert!(!ok);
        assert!(gap.is_zero());
        let a = BoxSet::single(RatBox::uniform(2, rat(1, 3), rat(1, 2)));
        let b = BoxSet::single(RatBox::uniform(2, int(0), int(1)));
        let (ok, gap) = compactly_included(&a, &b).unwrap();
        assert!(ok);
        assert_eq!(gap, ExtRat::Finite(rat(1, 3)));
    }

    #[test]
    fn distance_pair_examples() {
        let unit = set1(&[(int(0), int(1))]);
        assert_eq!(
            distance_pair(&unit, &[rat(1, 2)]).unwrap(),
            (ExtRat::Finite(int(0)), rat(1, 2))
        );
        assert_eq!(
            distance_pair(&unit, &[rat(3, 2)]).unwrap(),
            (ExtRat::Finite(rat(1, 2)), int(0))
        );
        let two = set1(&[(int(0), rat(1, 4)), (rat(1, 2), int(1))]);
        assert_eq!(
            distance_pair(&two, &[rat(3, 8)]).unwrap(),
            (ExtRat::Finite(rat(1, 8)), int(0))
        );
        assert_eq!(
            distance_pair(&BoxSet::empty(1), &[int(0)]).unwrap(),
            (ExtRat::Infinite, int(0))
        );
    }

    #[test]
    fn path_examples() {
        let c = Complex::new(set1(&[(int(0), int(1))])).unwrap();
        let p = path_witness(&c, &[int(0)], &[int(1)]).unwrap();
        assert_eq!(p.vertices, vec![vec![int(0)], vec![int(1)]]);
        let c = Complex::new(set1(&[(int(0), rat(1, 2)), (rat(1, 2), int(1))])).unwrap();
        let p = path_witness(&c, &[int(0)], &[int(1)]).unwrap();
        assert_eq!(
            p.vertices,
            vec![vec![int(0)], vec![rat(1, 2)], vec![int(1)]]
        );
        assert!(matches!(
            path_witness(&c, &[int(2)], &[int(1)]),
            Err(Error::NotInSet { .. })
        ));
    }

    #[test]
    fn path_parameterization() {
        let p = PolyPath {
            vertices: vec![vec![int(0)], vec![int(1)], vec![int(3)]],
        };
        assert_eq!(p.at(&rat(1, 4)), vec![rat(1, 2)]);
        assert_eq!(p.at(&rat(3, 4)), vec![int(2)]);
        let e = p.enclosure(&rat(1, 4), &rat(3, 4));
        assert_eq!(e, iv(rat(1, 2), int(2)));
    }

    #[test]
    fn json_round_trip() {
        let s = BoxSet::from_boxes(
            2,
            vec![
                RatBox::uniform(2, int(0), int(1)),
                RatBox::new(vec![int(1), int(0)], vec![int(3), int(1)]).unwrap(),
            ],
        )
        .unwrap();
        let j = serde_json::to_string(&s).unwrap();
        assert!(j.contains("\"c\":[\"1/2\",\"1/2\"]"));
        let back: BoxSet = serde_json::from_str(&j).unwrap();
        assert_eq!(back, s);
    }
}
