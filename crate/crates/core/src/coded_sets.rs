//! Closed sets given by negative information: an ambient cube minus a list of
//! open max-norm balls.

use std::fmt;
use std::sync::Arc;

use num_traits::{Signed, Zero};
use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};
use crate::geometry::{BoxSet, RatBox};
use crate::rat::{half, int, serde_rat, serde_rat_vec, Rat};

/// Open max-norm ball `B(c, r)`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Ball {
    #[serde(rename = "c", with = "serde_rat_vec")]
    pub center: Vec<Rat>,
    #[serde(rename = "r", with = "serde_rat")]
    pub radius: Rat,
}

impl Ball {
    pub fn new(center: Vec<Rat>, radius: Rat) -> Result<Self> {
        if !radius.is_positive() {
            return Err(Error::InvalidArgument {
                op: "Ball::new",
                detail: "radius must be positive".into(),
            });
        }
        Ok(Ball { center, radius })
    }

    pub fn dim(&self) -> usize {
        self.center.len()
    }

    pub fn contains(&self, x: &[Rat]) -> bool {
        self.center
            .iter()
            .zip(x)
            .all(|(c, xi)| (xi - c).abs() < self.radius)
    }

    /// Closure of the ball as a box.
    pub fn closure(&self) -> RatBox {
        self.with_radius(&self.radius)
    }

    fn with_radius(&self, r: &Rat) -> RatBox {
        RatBox {
            lo: self.center.iter().map(|c| c - r).collect(),
            hi: self.center.iter().map(|c| c + r).collect(),
        }
    }

    /// Whether the open ball meets the closed box.
    pub fn meets(&self, b: &RatBox) -> bool {
        (0..self.dim())
            .all(|i| &self.center[i] - &self.radius < b.hi[i] && &self.center[i] + &self.radius > b.lo[i])
    }

    /// Open lower and upper corners.
    pub fn corners(&self) -> (Vec<Rat>, Vec<Rat>) {
        let b = self.closure();
        (b.lo, b.hi)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Ambient {
    /// `[0,1]^n`
    Unit,
    /// `Q = [-1,2]^n`
    Extended,
}

impl Ambient {
    pub fn cube(self, n: usize) -> RatBox {
        match self {
            Ambient::Unit => RatBox::uniform(n, int(0), int(1)),
            Ambient::Extended => RatBox::uniform(n, int(-1), int(2)),
        }
    }
}

/// Result of the co-membership semidecision.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CoMember {
    ConfirmedOutside,
    Unknown,
    ConfirmedInside,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Coverage {
    Covered,
    Unknown,
}

/// `ambient \ ∪ balls`. With `exhausted == false` the list is only a prefix
/// of a longer name, and the set it describes is a superset of the target.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "NegInfoJson", into = "NegInfoJson")]
pub struct NegInfoSet {
    dim: usize,
    ambient: Ambient,
    exhausted: bool,
    balls: Vec<Ball>,
}

#[derive(Serialize, Deserialize)]
struct NegInfoJson {
    dim: usize,
    ambient: Ambient,
    #[serde(default)]
    exhausted: bool,
    #[serde(default)]
    balls: Vec<Ball>,
}

impl TryFrom<NegInfoJson> for NegInfoSet {
    type Error = Error;
    fn try_from(j: NegInfoJson) -> Result<Self> {
        let mut s = NegInfoSet::new(j.dim, j.ambient)?;
        for b in j.balls {
            if !b.radius.is_positive() {
                return Err(Error::Malformed {
                    op: "NegInfoSet::from_json",
                    detail: "ball radius must be positive".into(),
                });
            }
            s.push(b)?;
        }
        s.exhausted = j.exhausted;
        Ok(s)
    }
}

impl From<NegInfoSet> for NegInfoJson {
    fn from(s: NegInfoSet) -> Self {
        NegInfoJson {
            dim: s.dim,
            ambient: s.ambient,
            exhausted: s.exhausted,
            balls: s.balls,
        }
    }
}

impl NegInfoSet {
    pub fn new(dim: usize, ambient: Ambient) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidArgument {
                op: "NegInfoSet::new",
                detail: "dimension must be at least 1".into(),
            });
        }
        Ok(NegInfoSet {
            dim,
            ambient,
            exhausted: false,
            balls: Vec::new(),
        })
    }

    /// A complete description: `ambient \ ∪ balls`.
    pub fn exhausted(dim: usize, ambient: Ambient, balls: Vec<Ball>) -> Result<Self> {
        let mut s = Self::new(dim, ambient)?;
        s.extend(balls)?;
        s.exhausted = true;
        Ok(s)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn ambient(&self) -> Ambient {
        self.ambient
    }

    pub fn is_exhausted(&self) -> bool {
        self.exhausted
    }

    pub fn set_exhausted(&mut self, exhausted: bool) {
        self.exhausted = exhausted;
    }

    pub fn balls(&self) -> &[Ball] {
        &self.balls
    }

    pub fn len(&self) -> usize {
        self.balls.len()
    }

    pub fn is_empty(&self) -> bool {
        self.balls.is_empty()
    }

    /// Appends a ball. Balls missing the ambient cube carry no information
    /// and are dropped.
    pub fn push(&mut self, b: Ball) -> Result<()> {
        check_dim("NegInfoSet::push", self.dim, b.dim())?;
        if b.meets(&self.ambient.cube(self.dim)) {
            self.balls.push(b);
        }
        Ok(())
    }

    pub fn extend(&mut self, balls: impl IntoIterator<Item = Ball>) -> Result<()> {
        for b in balls {
            self.push(b)?;
        }
        Ok(())
    }

    /// The first `k` balls, as a non-exhausted prefix (unless `k` covers the whole exhausted list).
    pub fn prefix(&self, k: usize) -> NegInfoSet {
        let k = k.min(self.balls.len());
        NegInfoSet {
            dim: self.dim,
            ambient: self.ambient,
            exhausted: self.exhausted && k == self.balls.len(),
            balls: self.balls[..k].to_vec(),
        }
    }

    pub fn co_member(&self, x: &[Rat]) -> Result<CoMember> {
        check_dim("co_member", self.dim, x.len())?;
        if !self.ambient.cube(self.dim).contains(x) || self.balls.iter().any(|b| b.contains(x)) {
            return Ok(CoMember::ConfirmedOutside);
        }
        Ok(if self.exhausted {
            CoMember::ConfirmedInside
        } else {
            CoMember::Unknown
        })
    }

    pub fn box_covered(&self, b: &RatBox) -> Result<Coverage> {
        check_dim("box_covered", self.dim, b.dim())?;
        Ok(if box_covered_by(&self.balls, b) {
            Coverage::Covered
        } else {
            Coverage::Unknown
        })
    }

    /// Re-express a unit-ambient set over `Q = [-1,2]^n` by prepending one
    /// ball per face slab of `Q \ [0,1]^n`.
    pub fn embed_extended(&self) -> NegInfoSet {
        if self.ambient == Ambient::Extended {
            return self.clone();
        }
        let mut out = NegInfoSet {
            dim: self.dim,
            ambient: Ambient::Extended,
            exhausted: self.exhausted,
            balls: unit_complement_balls(self.dim),
        };
        out.balls.extend(self.balls.iter().cloned());
        out
    }

    /// The exact residual `ambient \ ∪ balls` as a box union.
    pub fn residual(&self) -> BoxSet {
        let mut set = BoxSet::single(self.ambient.cube(self.dim));
        for b in &self.balls {
            let (lo, hi) = b.corners();
            set = set.minus_open_box(&lo, &hi);
            if set.len() > 256 {
                set = set.normalized();
            }
        }
        set.normalized()
    }
}

/// Balls `B((-2, 1/2, ..), 2)` and `B((3, 1/2, ..), 2)` per axis: together they
/// cover `Q \ [0,1]^n` and miss `[0,1]^n`.
pub fn unit_complement_balls(n: usize) -> Vec<Ball> {
    let mut out = Vec::with_capacity(2 * n);
    for k in 0..n {
        for side in [int(-2), int(3)] {
            let mut c = vec![half(&int(1)); n];
            c[k] = side.clone();
            out.push(Ball {
                center: c,
                radius: int(2),
            });
        }
    }
    out
}

/// Whether the closed box lies in the union of the open balls, decided
/// exactly by subtracting each ball from the box.
pub fn box_covered_by(balls: &[Ball], b: &RatBox) -> bool {
    let mut rem = BoxSet::single(b.clone());
    for ball in balls {
        if !ball.meets(b) {
            continue;
        }
        let (lo, hi) = ball.corners();
        rem = rem.minus_open_box(&lo, &hi);
        if rem.is_empty() {
            return true;
        }
        if rem.len() > 64 {
            rem = rem.normalized();
        }
    }
    rem.is_empty()
}

/// Cubes whose open union is exactly the open box `(lo, hi)`.
pub fn cover_open_box(lo: &[Rat], hi: &[Rat]) -> Vec<Ball> {
    let side = lo
        .iter()
        .zip(hi)
        .map(|(a, b)| b - a)
        .min()
        .expect("nonempty box");
    if !side.is_positive() {
        return Vec::new();
    }
    let r = half(&side);
    let axes: Vec<Vec<Rat>> = lo
        .iter()
        .zip(hi)
        .map(|(a, b)| {
            let w = b - a;
            if w == side {
                return vec![a + &r];
            }
            // consecutive centers closer than `side`, so the open pieces overlap
            let m = (&w / &side).floor().to_integer() + 1u32;
            let m: usize = num_traits::ToPrimitive::to_usize(&m).expect("small grid");
            let step = (&w - &side) / int(m as i64 - 1);
            (0..m).map(|k| a + &r + &step * int(k as i64)).collect()
        })
        .collect();
    let mut out = vec![Vec::new()];
    for axis in &axes {
        out = out
            .into_iter()
            .flat_map(|p: Vec<Rat>| {
                axis.iter().map(move |t| {
                    let mut q = p.clone();
                    q.push(t.clone());
                    q
                })
            })
            .collect();
    }
    out.into_iter()
        .map(|center| Ball {
            center,
            radius: r.clone(),
        })
        .collect()
}

/// Negative information for `A × B`. Each ball of either factor becomes a
/// cover of the slab `ball × (other ambient widened by 1)`; the two inputs are
/// interleaved by index.
pub fn product(s1: &NegInfoSet, s2: &NegInfoSet) -> Result<NegInfoSet> {
    if s1.ambient != s2.ambient {
        return Err(Error::InvalidArgument {
            op: "product",
            detail: "factors must share the ambient type".into(),
        });
    }
    let amb = s1.ambient;
    let (n1, n2) = (s1.dim, s2.dim);
    let wide1 = amb.cube(n1).expand(&int(1));
    let wide2 = amb.cube(n2).expand(&int(1));
    let mut out = NegInfoSet::new(n1 + n2, amb)?;
    let slab_left = |b: &Ball| {
        let (mut lo, mut hi) = b.corners();
        lo.extend(wide2.lo.iter().cloned());
        hi.extend(wide2.hi.iter().cloned());
        cover_open_box(&lo, &hi)
    };
    let slab_right = |b: &Ball| {
        let (lo2, hi2) = b.corners();
        let mut lo = wide1.lo.clone();
        let mut hi = wide1.hi.clone();
        lo.extend(lo2);
        hi.extend(hi2);
        cover_open_box(&lo, &hi)
    };
    for i in 0..s1.len().max(s2.len()) {
        if let Some(b) = s1.balls.get(i) {
            out.extend(slab_left(b))?;
        }
        if let Some(b) = s2.balls.get(i) {
            out.extend(slab_right(b))?;
        }
    }
    out.exhausted = s1.exhausted && s2.exhausted;
    Ok(out)
}

/// A deterministic, replayable source of balls indexed from 0.
pub trait BallSource: Send + Sync {
    fn dim(&self) -> usize;
    fn ambient(&self) -> Ambient;
    /// The `i`-th ball, or `None` once the source is finished.
    fn ball(&self, i: usize) -> Option<Ball>;
    /// Whether `None` from `ball` means the list is complete.
    fn finite(&self) -> bool {
        true
    }
}

impl BallSource for NegInfoSet {
    fn dim(&self) -> usize {
        self.dim
    }
    fn ambient(&self) -> Ambient {
        self.ambient
    }
    fn ball(&self, i: usize) -> Option<Ball> {
        self.balls.get(i).cloned()
    }
    fn finite(&self) -> bool {
        self.exhausted
    }
}

/// Pull-based cursor over a [`BallSource`].
#[derive(Clone)]
pub struct SetStream {
    source: Arc<dyn BallSource>,
    pos: usize,
    seen: NegInfoSet,
}

impl fmt::Debug for SetStream {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("SetStream")
            .field("dim", &self.source.dim())
            .field("pos", &self.pos)
            .finish()
    }
}

impl SetStream {
    pub fn new(source: Arc<dyn BallSource>) -> Self {
        let seen = NegInfoSet {
            dim: source.dim(),
            ambient: source.ambient(),
            exhausted: false,
            balls: Vec::new(),
        };
        SetStream {
            source,
            pos: 0,
            seen,
        }
    }

    pub fn from_set(s: NegInfoSet) -> Self {
        Self::new(Arc::new(s))
    }

    pub fn dim(&self) -> usize {
        self.source.dim()
    }

    pub fn ambient(&self) -> Ambient {
        self.source.ambient()
    }

    pub fn position(&self) -> usize {
        self.pos
    }

    pub fn next_ball(&mut self) -> Option<Ball> {
        let b = self.source.ball(self.pos);
        match &b {
            Some(b) => {
                self.pos += 1;
                self.seen.balls.push(b.clone());
            }
            None => self.seen.exhausted = self.source.finite(),
        }
        b
    }

    /// Pull until at least `k` balls have been seen; returns whether that many exist.
    pub fn fill_to(&mut self, k: usize) -> bool {
        while self.pos < k {
            if self.next_ball().is_none() {
                return false;
            }
        }
        true
    }

    /// Everything pulled so far.
    pub fn seen(&self) -> &NegInfoSet {
        &self.seen
    }

    pub fn reset(&mut self) {
        *self = SetStream::new(self.source.clone());
    }

    pub fn source(&self) -> Arc<dyn BallSource> {
        self.source.clone()
    }

    /// Ball `i` without moving the cursor.
    pub fn peek(&self, i: usize) -> Option<Ball> {
        self.source.ball(i)
    }
}

/// Finite or lazily generated ball list given by a closure.
pub struct FnSource<F> {
    dim: usize,
    ambient: Ambient,
    finite: bool,
    f: F,
}

impl<F: Fn(usize) -> Option<Ball> + Send + Sync> FnSource<F> {
    pub fn new(dim: usize, ambient: Ambient, finite: bool, f: F) -> Self {
        FnSource {
            dim,
            ambient,
            finite,
            f,
        }
    }
}

impl<F: Fn(usize) -> Option<Ball> + Send + Sync> BallSource for FnSource<F> {
    fn dim(&self) -> usize {
        self.dim
    }
    fn ambient(&self) -> Ambient {
        self.ambient
    }
    fn ball(&self, i: usize) -> Option<Ball> {
        (self.f)(i)
    }
    fn finite(&self) -> bool {
        self.finite
    }
}

/// A unit-ambient source seen over `Q`: the shell balls of
/// [`unit_complement_balls`] come first, then the inner source.
pub struct ExtendedSource {
    inner: Arc<dyn BallSource>,
    shell: Vec<Ball>,
}

impl ExtendedSource {
    pub fn new(inner: Arc<dyn BallSource>) -> Self {
        let shell = match inner.ambient() {
            Ambient::Unit => unit_complement_balls(inner.dim()),
            Ambient::Extended => Vec::new(),
        };
        ExtendedSource { inner, shell }
    }
}

impl BallSource for ExtendedSource {
    fn dim(&self) -> usize {
        self.inner.dim()
    }
    fn ambient(&self) -> Ambient {
        Ambient::Extended
    }
    fn ball(&self, i: usize) -> Option<Ball> {
        match self.shell.get(i) {
            Some(b) => Some(b.clone()),
            None => self.inner.ball(i - self.shell.len()),
        }
    }
    fn finite(&self) -> bool {
        self.inner.finite()
    }
}

impl SetStream {
    /// The same stream over the extended ambient (identity if already extended).
    pub fn extended(&self) -> SetStream {
        if self.ambient() == Ambient::Extended {
            return SetStream::new(self.source.clone());
        }
        SetStream::new(Arc::new(ExtendedSource::new(self.source.clone())))
    }
}

/// The residual is empty exactly when every ambient box is covered.
pub fn is_certainly_empty(s: &NegInfoSet) -> bool {
    box_covered_by(&s.balls, &s.ambient.cube(s.dim))
}

/// The zero vector, handy for callers building balls around the origin.
pub fn origin(n: usize) -> Vec<Rat> {
    vec![Rat::zero(); n]
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rat::rat;

    fn b1(c: Rat, r: Rat) -> Ball {
        Ball::new(vec![c], r).unwrap()
    }

    #[test]
    fn co_member_examples() {
        let mut s = NegInfoSet::new(1, Ambient::Unit).unwrap();
        s.push(b1(rat(1, 2), rat(1, 4))).unwrap();
        assert_eq!(s.co_member(&[rat(1, 2)]).unwrap(), CoMember::ConfirmedOutside);
        assert_eq!(s.co_member(&[int(0)]).unwrap(), CoMember::Unknown);
        s.set_exhausted(true);
        assert_eq!(s.co_member(&[int(0)]).unwrap(), CoMember::ConfirmedInside);
        let s = NegInfoSet::exhausted(
            1,
            Ambient::Unit,
            vec![
                b1(rat(1, 2), rat(1, 6)),
                b1(rat(3, 4), rat(1, 6)),
                b1(int(1), rat(1, 6)),
            ],
        )
        .unwrap();
        // open balls miss their own boundary point 1/3
        let mut prefix = s.clone();
        prefix.set_exhausted(false);
        assert_eq!(prefix.co_member(&[rat(1, 3)]).unwrap(), CoMember::Unknown);
        assert_eq!(prefix.co_member(&[rat(9, 10)]).unwrap(), CoMember::ConfirmedOutside);
    }

    #[test]
    fn box_covered_examples() {
        let unit = RatBox::uniform(1, int(0), int(1));
        let s = NegInfoSet::exhausted(1, Ambient::Unit, vec![b1(rat(1, 2), rat(3, 4))]).unwrap();
        assert_eq!(s.box_covered(&unit).unwrap(), Coverage::Covered);
        let s = NegInfoSet::exhausted(
            1,
            Ambient::Unit,
            vec![b1(int(0), rat(1, 2)), b1(int(1), rat(1, 2))],
        )
        .unwrap();
        assert_eq!(s.box_covered(&unit).unwrap(), Coverage::Unknown);
        let s = NegInfoSet::exhausted(
            1,
            Ambient::Unit,
            vec![b1(rat(1, 4), rat(3, 8)), b1(rat(3, 4), rat(3, 8))],
        )
        .unwrap();
        assert_eq!(s.box_covered(&unit).unwrap(), Coverage::Covered);
    }

    #[test]
    fn irrelevant_balls_are_dropped() {
        let mut s = NegInfoSet::new(1, Ambient::Unit).unwrap();
        s.push(b1(int(5), rat(1, 2))).unwrap();
        s.push(b1(int(-1), int(1))).unwrap();
        assert!(s.is_empty());
        s.push(b1(int(-1), rat(3, 2))).unwrap();
        assert_eq!(s.len(), 1);
    }

    #[test]
    fn embedding_covers_exactly_the_outer_shell() {
        for n in 1..=3 {
            let balls = unit_complement_balls(n);
            let unit = RatBox::uniform(n, int(0), int(1));
            assert!(balls.iter().all(|b| !b.meets(&unit)));
            let s = NegInfoSet::exhausted(n, Ambient::Extended, balls).unwrap();
            assert_eq!(s.residual(), BoxSet::single(unit));
        }
    }

    #[test]
    fn open_box_cover_is_exact() {
        let lo = vec![int(0), int(0)];
        let hi = vec![rat(1, 2), rat(7, 4)];
        let cover = cover_open_box(&lo, &hi);
        let region = RatBox::new(lo.clone(), hi.clone()).unwrap();
        let set = NegInfoSet::exhausted(2, Ambient::Extended, cover.clone()).unwrap();
        // every cube stays inside the open box and the interior is covered
        assert!(cover.iter().all(|b| region.contains_box(&b.closure())));
        let inner = region.expand(&rat(-1, 64));
        assert_eq!(set.box_covered(&inner).unwrap(), Coverage::Covered);
    }

    #[test]
    fn product_examples() {
        let full = NegInfoSet::exhausted(1, Ambient::Unit, vec![]).unwrap();
        let p = product(&full, &full).unwrap();
        assert!(p.is_empty());
        let mut a = NegInfoSet::new(1, Ambient::Unit).unwrap();
        a.push(b1(rat(1, 2), rat(1, 4))).unwrap();
        a.set_exhausted(true);
        let p = product(&a, &full).unwrap();
        assert_eq!(p.co_member(&[rat(1, 2), int(1)]).unwrap(), CoMember::ConfirmedOutside);
        assert_eq!(p.co_member(&[rat(1, 4), int(0)]).unwrap(), CoMember::ConfirmedInside);
        let third = NegInfoSet::exhausted(
            1,
            Ambient::Unit,
            vec![b1(int(0), rat(1, 3)), b1(int(1), rat(2, 3))],
        )
        .unwrap();
        let p = product(&third, &third).unwrap();
        assert_eq!(p.co_member(&[rat(1, 2), rat(1, 3)]).unwrap(), CoMember::ConfirmedOutside);
        assert_eq!(p.co_member(&[rat(1, 3), rat(1, 3)]).unwrap(), CoMember::ConfirmedInside);
    }

    #[test]
    fn stream_replays() {
        let s = NegInfoSet::exhausted(1, Ambient::Unit, vec![b1(rat(1, 2), rat(1, 4))]).unwrap();
        let mut st = SetStream::from_set(s);
        let first: Vec<_> = std::iter::from_fn(|| st.next_ball()).collect();
        assert!(st.seen().is_exhausted());
        st.reset();
        let again: Vec<_> = std::iter::from_fn(|| st.next_ball()).collect();
        assert_eq!(first, again);
    }

    #[test]
    fn json_shape() {
        let s = NegInfoSet::exhausted(1, Ambient::Unit, vec![b1(rat(1, 2), rat(1, 4))]).unwrap();
        let j = serde_json::to_value(&s).unwrap();
        assert_eq!(j["ambient"], "unit");
        assert_eq!(j["balls"][0]["r"], "1/4");
        let back: NegInfoSet = serde_json::from_value(j).unwrap();
        assert_eq!(back, s);
        let bad = serde_json::json!({"dim": 1, "ambient": "unit", "balls": [{"c": ["0/1"], "r": "-1/2"}]});
        assert!(serde_json::from_value::<NegInfoSet>(bad).is_err());
    }
}
