//! Fixed points of self-maps of the unit cube: the fixed-point set as
//! negative information, a certified topological index for `n <= 2`, and a
//! Brouwer solver that descends the tree of complexes guided by the index.

use std::collections::BTreeMap;
use std::fmt;
use std::sync::{Arc, Mutex};

use num_traits::{Signed, Zero};
use serde::{Deserialize, Serialize};

use crate::coded_sets::{unit_complement_balls, Ambient, Ball, NegInfoSet};
use crate::complex_tree::{expand, PathPrefix};
use crate::error::{check_dim, Error, Result};
use crate::geometry::{components, BoxSet, Complex, RatBox};
use crate::rat::{half, int, norm, pow2, serde_rat_mat, serde_rat_vec, sub_vec, Rat};

/// An approximation of `f(x)` within `error` in the max norm.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Approx {
    pub value: Vec<Rat>,
    pub error: Rat,
}

/// A continuous map `[0,1]^n → [0,1]^n` known through certified evaluation.
///
/// Box arguments of the enclosure methods always lie inside `[0,1]^n`.
pub trait FunctionOracle: Send + Sync {
    fn dim(&self) -> usize;

    /// `f(x)` to within `precision`; `x` must lie in the unit cube.
    fn eval(&self, x: &[Rat], precision: &Rat) -> Result<Approx>;

    /// A max-norm Lipschitz constant, when one is known.
    fn lipschitz(&self) -> Option<Rat> {
        None
    }

    /// A box containing `f(b)`.
    fn enclosure(&self, b: &RatBox) -> Option<RatBox> {
        let l = self.lipschitz()?;
        let c = b.center();
        let r = half(&b.diameter());
        let a = self.eval(&c, &pow2(-30)).ok()?;
        Some(RatBox::point(&a.value).expand(&(l * r + a.error)))
    }

    /// A box containing `{f(x) - x : x ∈ b}`.
    fn displacement_enclosure(&self, b: &RatBox) -> Option<RatBox> {
        let e = self.enclosure(b)?;
        Some(RatBox {
            lo: e.lo.iter().zip(&b.hi).map(|(a, x)| a - x).collect(),
            hi: e.hi.iter().zip(&b.lo).map(|(a, x)| a - x).collect(),
        })
    }

    /// A lower bound for `||f(x) - x||` over `b` (zero means nothing is known).
    fn displacement_lower_bound(&self, b: &RatBox) -> Rat {
        self.displacement_enclosure(b)
            .map(|k| box_min_norm(&k))
            .unwrap_or_else(Rat::zero)
    }

    /// A box `K` with `0 ∉ K` such that every `f(x) - x`, `x ∈ b`, is a
    /// positive multiple of a point of `K`.
    fn displacement_cone(&self, b: &RatBox) -> Option<RatBox> {
        self.displacement_enclosure(b)
            .filter(|k| box_min_norm(k).is_positive())
    }

    fn description(&self) -> String;
}

/// `min_{v ∈ k} ||v||` in the max norm.
pub fn box_min_norm(k: &RatBox) -> Rat {
    (0..k.dim())
        .map(|i| {
            if k.lo[i].is_positive() {
                k.lo[i].clone()
            } else if k.hi[i].is_negative() {
                -k.hi[i].clone()
            } else {
                Rat::zero()
            }
        })
        .max()
        .unwrap_or_else(Rat::zero)
}

fn unit(n: usize) -> RatBox {
    RatBox::uniform(n, int(0), int(1))
}

/// Interval product of a scalar with `[lo, hi]`.
fn scale_iv(m: &Rat, lo: &Rat, hi: &Rat) -> (Rat, Rat) {
    if m.is_negative() {
        (m * hi, m * lo)
    } else {
        (m * lo, m * hi)
    }
}

fn mul_iv(a: (&Rat, &Rat), b: (&Rat, &Rat)) -> (Rat, Rat) {
    let p = [a.0 * b.0, a.0 * b.1, a.1 * b.0, a.1 * b.1];
    (
        p.iter().min().expect("four").clone(),
        p.iter().max().expect("four").clone(),
    )
}

/// 1D polynomial `Σ c_k x^k`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Poly {
    pub coeffs: Vec<Rat>,
}

impl Poly {
    pub fn new(coeffs: Vec<Rat>) -> Self {
        Poly { coeffs }
    }

    pub fn at(&self, x: &Rat) -> Rat {
        self.coeffs
            .iter()
            .rev()
            .fold(Rat::zero(), |acc, c| acc * x + c)
    }

    fn horner_iv(coeffs: &[Rat], lo: &Rat, hi: &Rat) -> (Rat, Rat) {
        let mut acc = (Rat::zero(), Rat::zero());
        for c in coeffs.iter().rev() {
            let p = mul_iv((&acc.0, &acc.1), (lo, hi));
            acc = (p.0 + c, p.1 + c);
        }
        acc
    }

    fn displacement_coeffs(&self) -> Vec<Rat> {
        let mut g = self.coeffs.clone();
        if g.len() < 2 {
            g.resize(2, Rat::zero());
        }
        g[1] -= int(1);
        g
    }
}

impl FunctionOracle for Poly {
    fn dim(&self) -> usize {
        1
    }
    fn eval(&self, x: &[Rat], _precision: &Rat) -> Result<Approx> {
        check_dim("Poly::eval", 1, x.len())?;
        Ok(Approx {
            value: vec![self.at(&x[0])],
            error: Rat::zero(),
        })
    }
    fn lipschitz(&self) -> Option<Rat> {
        Some(
            self.coeffs
                .iter()
                .enumerate()
                .skip(1)
                .map(|(k, c)| c.abs() * int(k as i64))
                .fold(Rat::zero(), |a, b| a + b),
        )
    }
    fn enclosure(&self, b: &RatBox) -> Option<RatBox> {
        let (lo, hi) = Self::horner_iv(&self.coeffs, &b.lo[0], &b.hi[0]);
        Some(RatBox {
            lo: vec![lo],
            hi: vec![hi],
        })
    }
    fn displacement_enclosure(&self, b: &RatBox) -> Option<RatBox> {
        let (lo, hi) = Self::horner_iv(&self.displacement_coeffs(), &b.lo[0], &b.hi[0]);
        Some(RatBox {
            lo: vec![lo],
            hi: vec![hi],
        })
    }
    fn description(&self) -> String {
        let terms: Vec<String> = self
            .coeffs
            .iter()
            .enumerate()
            .map(|(k, c)| format!("({c})x^{k}"))
            .collect();
        format!("poly {}", terms.join(" + "))
    }
}

/// Constant map.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Constant {
    pub value: Vec<Rat>,
}

impl FunctionOracle for Constant {
    fn dim(&self) -> usize {
        self.value.len()
    }
    fn eval(&self, x: &[Rat], _precision: &Rat) -> Result<Approx> {
        check_dim("Constant::eval", self.dim(), x.len())?;
        Ok(Approx {
            value: self.value.clone(),
            error: Rat::zero(),
        })
    }
    fn lipschitz(&self) -> Option<Rat> {
        Some(Rat::zero())
    }
    fn enclosure(&self, _b: &RatBox) -> Option<RatBox> {
        Some(RatBox::point(&self.value))
    }
    fn description(&self) -> String {
        format!("constant {:?}", self.value.iter().map(|v| v.to_string()).collect::<Vec<_>>())
    }
}

/// `x ↦ Mx + b`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Affine {
    pub matrix: Vec<Vec<Rat>>,
    pub offset: Vec<Rat>,
}

impl Affine {
    pub fn new(matrix: Vec<Vec<Rat>>, offset: Vec<Rat>) -> Result<Self> {
        let n = offset.len();
        if matrix.len() != n || matrix.iter().any(|r| r.len() != n) {
            return Err(Error::DimensionMismatch {
                op: "Affine::new",
                expected: n,
                got: matrix.len(),
            });
        }
        Ok(Affine { matrix, offset })
    }

    pub fn identity(n: usize) -> Self {
        let matrix = (0..n)
            .map(|i| (0..n).map(|j| if i == j { int(1) } else { int(0) }).collect())
            .collect();
        Affine {
            matrix,
            offset: vec![Rat::zero(); n],
        }
    }

    fn apply_iv(&self, m: &[Vec<Rat>], b: &RatBox) -> RatBox {
        let n = self.offset.len();
        let mut lo = Vec::with_capacity(n);
        let mut hi = Vec::with_capacity(n);
        for i in 0..n {
            let mut l = self.offset[i].clone();
            let mut h = self.offset[i].clone();
            for j in 0..n {
                let (a, c) = scale_iv(&m[i][j], &b.lo[j], &b.hi[j]);
                l += a;
                h += c;
            }
            lo.push(l);
            hi.push(h);
        }
        RatBox { lo, hi }
    }
}

impl FunctionOracle for Affine {
    fn dim(&self) -> usize {
        self.offset.len()
    }
    fn eval(&self, x: &[Rat], _precision: &Rat) -> Result<Approx> {
        check_dim("Affine::eval", self.dim(), x.len())?;
        let value = self
            .matrix
            .iter()
            .zip(&self.offset)
            .map(|(row, b)| row.iter().zip(x).fold(b.clone(), |acc, (m, xi)| acc + m * xi))
            .collect();
        Ok(Approx {
            value,
            error: Rat::zero(),
        })
    }
    fn lipschitz(&self) -> Option<Rat> {
        self.matrix
            .iter()
            .map(|r| r.iter().map(|m| m.abs()).fold(Rat::zero(), |a, b| a + b))
            .max()
    }
    fn enclosure(&self, b: &RatBox) -> Option<RatBox> {
        Some(self.apply_iv(&self.matrix, b))
    }
    fn displacement_enclosure(&self, b: &RatBox) -> Option<RatBox> {
        let mut m = self.matrix.clone();
        for (i, row) in m.iter_mut().enumerate() {
            row[i] -= int(1);
        }
        Some(self.apply_iv(&m, b))
    }
    fn description(&self) -> String {
        format!("affine map in dimension {}", self.dim())
    }
}

/// Built-in function families as JSON.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum FunctionSpec {
    Poly {
        #[serde(with = "serde_rat_vec")]
        coeffs: Vec<Rat>,
    },
    Constant {
        #[serde(with = "serde_rat_vec")]
        value: Vec<Rat>,
    },
    Affine {
        #[serde(with = "serde_rat_mat")]
        matrix: Vec<Vec<Rat>>,
        #[serde(with = "serde_rat_vec")]
        offset: Vec<Rat>,
    },
    Constructed {
        source: NegInfoSet,
        #[serde(default)]
        fuel: Option<usize>,
    },
}

impl FunctionSpec {
    pub fn build(&self) -> Result<Arc<dyn FunctionOracle>> {
        Ok(match self {
            FunctionSpec::Poly { coeffs } => Arc::new(Poly::new(coeffs.clone())),
            FunctionSpec::Constant { value } => Arc::new(Constant {
                value: value.clone(),
            }),
            FunctionSpec::Affine { matrix, offset } => {
                Arc::new(Affine::new(matrix.clone(), offset.clone())?)
            }
            FunctionSpec::Constructed { source, fuel } => Arc::new(
                crate::constructions::function_from_connected(
                    source,
                    fuel.unwrap_or(crate::constructions::DEFAULT_FUEL),
                )?,
            ),
        })
    }
}

// The tree of complexes lives in Q = [-1,2]^n, so the index is taken for the
// extension x ↦ f(clamp(x)). It has the same fixed points as f.

fn clamp_box(b: &RatBox) -> RatBox {
    let u = unit(b.dim());
    RatBox {
        lo: u.project(&b.lo),
        hi: u.project(&b.hi),
    }
}

/// Lower bound for `||f(clamp x) - x||` over any box.
pub fn extended_lower_bound(f: &dyn FunctionOracle, b: &RatBox) -> Rat {
    let u = unit(b.dim());
    if u.contains_box(b) {
        return f.displacement_lower_bound(b);
    }
    let c = clamp_box(b);
    // with x' = clamp(x): ||f(x') - x|| >= max(||x - x'||, ||f(x') - x'|| - ||x - x'||)
    let mut best = half(&f.displacement_lower_bound(&c));
    let out = b.dist_box(&u);
    if out > best {
        best = out;
    }
    if let Some(e) = f.enclosure(&c) {
        let k = RatBox {
            lo: e.lo.iter().zip(&b.hi).map(|(a, x)| a - x).collect(),
            hi: e.hi.iter().zip(&b.lo).map(|(a, x)| a - x).collect(),
        };
        let m = box_min_norm(&k);
        if m > best {
            best = m;
        }
    }
    best
}

fn extended_cone(f: &dyn FunctionOracle, b: &RatBox) -> Option<RatBox> {
    if unit(b.dim()).contains_box(b) {
        return f.displacement_cone(b);
    }
    let e = f.enclosure(&clamp_box(b))?;
    let k = RatBox {
        lo: e.lo.iter().zip(&b.hi).map(|(a, x)| a - x).collect(),
        hi: e.hi.iter().zip(&b.lo).map(|(a, x)| a - x).collect(),
    };
    box_min_norm(&k).is_positive().then_some(k)
}

fn extended_displacement(f: &dyn FunctionOracle, x: &[Rat], precision: &Rat) -> Result<Approx> {
    let c = unit(x.len()).project(x);
    let a = f.eval(&c, precision)?;
    Ok(Approx {
        value: sub_vec(&a.value, x),
        error: a.error,
    })
}

/// Resource limits for the index and the descent.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Budget {
    /// Boundary pieces per index computation.
    pub pieces: usize,
    /// Halvings of the precision or of a boundary piece before giving up.
    pub refine: u32,
    /// Grid cells examined by the fixed-point cover.
    pub cells: usize,
    /// Tree levels the solver may descend.
    pub max_depth: usize,
}

impl Default for Budget {
    fn default() -> Self {
        Budget {
            pieces: 20_000,
            refine: 48,
            cells: 200_000,
            max_depth: 40,
        }
    }
}

/// Complement of `Fix(f)` as open balls `B(q, 2^-k)` over a dyadic grid,
/// refined only where no certificate was found.
pub struct FixCover {
    f: Arc<dyn FunctionOracle>,
    by_res: Vec<Vec<Ball>>,
    frontier: Vec<RatBox>,
    cells: usize,
    cell_cap: usize,
}

impl fmt::Debug for FixCover {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("FixCover")
            .field("resolutions", &self.by_res.len())
            .field("cells", &self.cells)
            .finish()
    }
}

impl FixCover {
    pub fn new(f: Arc<dyn FunctionOracle>, cell_cap: usize) -> Self {
        let n = f.dim();
        FixCover {
            f,
            by_res: Vec::new(),
            frontier: vec![unit(n)],
            cells: 0,
            cell_cap,
        }
    }

    /// Compute resolutions up to and including `k`.
    pub fn ensure(&mut self, k: usize) {
        let n = self.f.dim();
        let u = unit(n);
        while self.by_res.len() <= k {
            let res = self.by_res.len();
            let side = pow2(-(res as i32));
            let mut emitted = Vec::new();
            let mut next = Vec::new();
            for cell in std::mem::take(&mut self.frontier) {
                self.cells += 1;
                let c = cell.center();
                let ball = Ball {
                    center: c.clone(),
                    radius: side.clone(),
                };
                let region = ball.closure().intersection(&u).expect("cell inside cube");
                if self.f.displacement_lower_bound(&region).is_positive() {
                    emitted.push(ball);
                } else if self.cells + next.len() < self.cell_cap {
                    next.extend(split_cell(&cell));
                }
            }
            self.by_res.push(emitted);
            self.frontier = next;
        }
    }

    pub fn balls_upto(&mut self, k: usize) -> Vec<Ball> {
        self.ensure(k);
        self.by_res[..=k].iter().flatten().cloned().collect()
    }

    pub fn cells_examined(&self) -> usize {
        self.cells
    }
}

fn split_cell(b: &RatBox) -> Vec<RatBox> {
    let c = b.center();
    let mut out = vec![b.clone()];
    for i in 0..b.dim() {
        out = out
            .into_iter()
            .flat_map(|p| {
                let mut l = p.clone();
                l.hi[i] = c[i].clone();
                let mut r = p;
                r.lo[i] = c[i].clone();
                [l, r]
            })
            .collect();
    }
    out
}

/// Negative information for `Fix(f)` from grid resolutions `0..=resolution`.
pub fn fix_neginfo(f: Arc<dyn FunctionOracle>, resolution: usize) -> Result<NegInfoSet> {
    let n = f.dim();
    let mut cover = FixCover::new(f, Budget::default().cells);
    let mut s = NegInfoSet::new(n, Ambient::Unit)?;
    s.extend(cover.balls_upto(resolution))?;
    Ok(s)
}

/// A certified index with a lower bound on the displacement along the boundary.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct IndexValue {
    pub value: i64,
    #[serde(with = "crate::rat::serde_rat")]
    pub certificate: Rat,
}

/// Strict sign of each coordinate of `f(clamp x) - x`, refining precision.
fn certified_displacement(f: &dyn FunctionOracle, x: &[Rat], refine: u32) -> Result<Vec<Rat>> {
    let mut eps = pow2(-4);
    for _ in 0..refine {
        let a = extended_displacement(f, x, &eps)?;
        if norm(&a.value) > a.error {
            return Ok(a.value);
        }
        if a.error.is_zero() {
            break; // an exact fixed point
        }
        eps = half(&eps);
    }
    Err(Error::BoundaryFixedPoint { op: "index" })
}

/// `(sign g(a) - sign g(b)) / 2` for `g = f - id` (extended outside `[0,1]`).
pub fn index_1d(f: &dyn FunctionOracle, a: &Rat, b: &Rat, budget: &Budget) -> Result<IndexValue> {
    check_dim("index_1d", 1, f.dim())?;
    if a > b {
        return Err(Error::InvalidArgument {
            op: "index_1d",
            detail: "empty interval".into(),
        });
    }
    let sign = |x: &Rat| -> Result<(i64, Rat)> {
        let mut eps = pow2(-4);
        for _ in 0..budget.refine {
            let g = extended_displacement(f, std::slice::from_ref(x), &eps)?;
            let v = &g.value[0];
            if v.abs() > g.error {
                let s = if v.is_positive() { 1 } else { -1 };
                return Ok((s, v.abs() - &g.error));
            }
            if g.error.is_zero() {
                break;
            }
            eps = half(&eps);
        }
        Err(Error::BoundaryFixedPoint { op: "index_1d" })
    };
    let (sa, da) = sign(a)?;
    if a == b {
        return Ok(IndexValue {
            value: 0,
            certificate: da,
        });
    }
    let (sb, db) = sign(b)?;
    Ok(IndexValue {
        value: (sa - sb) / 2,
        certificate: if da < db { da } else { db },
    })
}

type V2 = (Rat, Rat);

fn cross(a: &V2, b: &V2) -> Rat {
    &a.0 * &b.1 - &a.1 * &b.0
}

/// Extreme rays of the cone spanned by a box avoiding the origin.
fn cone_of(k: &RatBox) -> (V2, V2) {
    let corners = [
        (k.lo[0].clone(), k.lo[1].clone()),
        (k.hi[0].clone(), k.lo[1].clone()),
        (k.hi[0].clone(), k.hi[1].clone()),
        (k.lo[0].clone(), k.hi[1].clone()),
    ];
    let lo = corners
        .iter()
        .find(|a| corners.iter().all(|p| !cross(a, p).is_negative()))
        .expect("cone narrower than a half-plane")
        .clone();
    let hi = corners
        .iter()
        .find(|b| corners.iter().all(|p| !cross(p, b).is_negative()))
        .expect("cone narrower than a half-plane")
        .clone();
    (lo, hi)
}

/// Winding number of the closed chain formed by the segments, around 0.
fn winding(segments: &[(V2, V2)]) -> i64 {
    let mut w = 0;
    for (p, q) in segments {
        if !p.1.is_positive() && q.1.is_positive() && cross(p, q).is_positive() {
            w += 1;
        } else if !q.1.is_positive() && p.1.is_positive() && cross(p, q).is_negative() {
            w -= 1;
        }
    }
    w
}

/// Oriented boundary of a planar box union: counterclockwise edges of every
/// full box, cut at all box coordinates, with opposite pairs cancelled.
fn boundary_edges(boxes: &[RatBox]) -> Vec<(V2, V2)> {
    let mut xs: Vec<Rat> = boxes.iter().flat_map(|b| [b.lo[0].clone(), b.hi[0].clone()]).collect();
    let mut ys: Vec<Rat> = boxes.iter().flat_map(|b| [b.lo[1].clone(), b.hi[1].clone()]).collect();
    xs.sort();
    xs.dedup();
    ys.sort();
    ys.dedup();
    let cuts = |coords: &[Rat], a: &Rat, b: &Rat| -> Vec<Rat> {
        let (lo, hi) = if a < b { (a, b) } else { (b, a) };
        let mut v: Vec<Rat> = coords.iter().filter(|c| *c > lo && *c < hi).cloned().collect();
        v.insert(0, lo.clone());
        v.push(hi.clone());
        if a > b {
            v.reverse();
        }
        v
    };
    let mut edges: BTreeMap<(V2, V2), ()> = BTreeMap::new();
    let mut add = |p: V2, q: V2| {
        if edges.remove(&(q.clone(), p.clone())).is_none() {
            edges.insert((p, q), ());
        }
    };
    for b in boxes {
        let (x0, x1, y0, y1) = (&b.lo[0], &b.hi[0], &b.lo[1], &b.hi[1]);
        for w in cuts(&xs, x0, x1).windows(2) {
            add((w[0].clone(), y0.clone()), (w[1].clone(), y0.clone()));
        }
        for w in cuts(&ys, y0, y1).windows(2) {
            add((x1.clone(), w[0].clone()), (x1.clone(), w[1].clone()));
        }
        for w in cuts(&xs, x1, x0).windows(2) {
            add((w[0].clone(), y1.clone()), (w[1].clone(), y1.clone()));
        }
        for w in cuts(&ys, y1, y0).windows(2) {
            add((x0.clone(), w[0].clone()), (x0.clone(), w[1].clone()));
        }
    }
    edges.into_keys().collect()
}

fn seg_box(p: &V2, q: &V2) -> RatBox {
    RatBox {
        lo: vec![crate::rat::min_rat(&p.0, &q.0).clone(), crate::rat::min_rat(&p.1, &q.1).clone()],
        hi: vec![crate::rat::max_rat(&p.0, &q.0).clone(), crate::rat::max_rat(&p.1, &q.1).clone()],
    }
}

/// Winding number of `g = f - id` (extended) along the oriented boundary of a
/// planar complex. Each boundary piece gets a cone avoiding 0; every vertex
/// gets a rational vector inside all incident cones, and the winding of the
/// resulting polygon is counted exactly.
pub fn index_2d(f: &dyn FunctionOracle, c: &Complex, budget: &Budget) -> Result<IndexValue> {
    index_2d_set(f, c.set(), budget)
}

fn index_2d_set(f: &dyn FunctionOracle, set: &BoxSet, budget: &Budget) -> Result<IndexValue> {
    check_dim("index_2d", 2, f.dim())?;
    check_dim("index_2d", 2, set.dim())?;
    let (full, thin): (Vec<RatBox>, Vec<RatBox>) =
        set.boxes().iter().cloned().partition(|b| !b.is_degenerate());
    let mut certificate: Option<Rat> = None;
    let mut note = |d: &Rat| {
        if certificate.as_ref().is_none_or(|c| d < c) {
            certificate = Some(d.clone());
        }
    };
    let min_len = pow2(-(budget.refine as i32));
    let mut pieces_used = 0usize;
    // measure-zero parts carry no index but must be free of fixed points
    for t in &thin {
        let mut stack = vec![t.clone()];
        while let Some(b) = stack.pop() {
            let d = extended_lower_bound(f, &b);
            if d.is_positive() {
                note(&d);
                continue;
            }
            if b.diameter() < min_len {
                return Err(Error::BoundaryFixedPoint { op: "index_2d" });
            }
            pieces_used += 1;
            if pieces_used > budget.pieces {
                return Err(Error::BudgetExceeded {
                    op: "index_2d",
                    detail: format!("more than {} boundary pieces", budget.pieces),
                });
            }
            stack.extend(split_longest(&b));
        }
    }
    let mut cones: BTreeMap<V2, Vec<(V2, V2)>> = BTreeMap::new();
    let mut accepted: Vec<(V2, V2)> = Vec::new();
    for (p, q) in boundary_edges(&full) {
        let mut stack = vec![(p, q)];
        while let Some((p, q)) = stack.pop() {
            let b = seg_box(&p, &q);
            let d = extended_lower_bound(f, &b);
            let cone = if d.is_positive() { extended_cone(f, &b) } else { None };
            if let Some(k) = cone {
                note(&d);
                let rays = cone_of(&k);
                cones.entry(p.clone()).or_default().push(rays.clone());
                cones.entry(q.clone()).or_default().push(rays);
                accepted.push((p, q));
                continue;
            }
            if b.diameter() < min_len {
                return Err(Error::BoundaryFixedPoint { op: "index_2d" });
            }
            pieces_used += 1;
            if pieces_used > budget.pieces {
                return Err(Error::BudgetExceeded {
                    op: "index_2d",
                    detail: format!("more than {} boundary pieces", budget.pieces),
                });
            }
            let m = (half(&(&p.0 + &q.0)), half(&(&p.1 + &q.1)));
            stack.push((m.clone(), q));
            stack.push((p, m));
        }
    }
    let mut rep: BTreeMap<V2, V2> = BTreeMap::new();
    for (v, list) in &cones {
        let (mut lo, mut hi) = list[0].clone();
        for (a, b) in &list[1..] {
            if cross(&lo, a).is_positive() {
                lo = a.clone();
            }
            if cross(b, &hi).is_positive() {
                hi = b.clone();
            }
        }
        if cross(&lo, &hi).is_negative() {
            return Err(Error::BoundaryFixedPoint { op: "index_2d" });
        }
        rep.insert(v.clone(), (&lo.0 + &hi.0, &lo.1 + &hi.1));
    }
    let segs: Vec<(V2, V2)> = accepted
        .iter()
        .map(|(p, q)| (rep[p].clone(), rep[q].clone()))
        .collect();
    Ok(IndexValue {
        value: winding(&segs),
        certificate: certificate.unwrap_or_else(|| int(1)),
    })
}

fn split_longest(b: &RatBox) -> Vec<RatBox> {
    let k = (0..b.dim()).max_by_key(|&i| b.width(i)).expect("nonempty");
    let m = half(&(&b.lo[k] + &b.hi[k]));
    let mut l = b.clone();
    l.hi[k] = m.clone();
    let mut r = b.clone();
    r.lo[k] = m;
    vec![l, r]
}

/// Index of `f` on a complex, for `n ∈ {1, 2}`.
pub fn index(f: &dyn FunctionOracle, c: &Complex, budget: &Budget) -> Result<IndexValue> {
    match c.dim() {
        1 => {
            let bb = c.set().bbox().ok_or(Error::InvalidArgument {
                op: "index",
                detail: "empty complex".into(),
            })?;
            index_1d(f, &bb.lo[0], &bb.hi[0], budget)
        }
        2 => index_2d(f, c, budget),
        d => Err(Error::UnsupportedDimension { op: "index", dim: d }),
    }
}

/// Index of `f` on a finite union of complexes given as one box set. In the
/// plane the boundary of the whole union is wound at once, so additivity
/// over disjoint pieces is a property of the computation, not a definition.
pub fn index_of_set(f: &dyn FunctionOracle, set: &BoxSet, budget: &Budget) -> Result<IndexValue> {
    if set.has_interior_overlap() {
        return Err(Error::InteriorOverlap { op: "index_of_set" });
    }
    match set.dim() {
        1 => {
            let mut value = 0;
            let mut certificate: Option<Rat> = None;
            for c in components(set)? {
                let v = index(f, &c, budget)?;
                value += v.value;
                if certificate.as_ref().is_none_or(|d| &v.certificate < d) {
                    certificate = Some(v.certificate);
                }
            }
            Ok(IndexValue {
                value,
                certificate: certificate.unwrap_or_else(|| int(1)),
            })
        }
        2 => index_2d_set(f, set, budget),
        d => Err(Error::UnsupportedDimension { op: "index_of_set", dim: d }),
    }
}

/// The chain of complexes chosen by the index-guided descent.
#[derive(Clone, Debug, Serialize)]
pub struct Descent {
    pub path: PathPrefix,
    pub indices: Vec<i64>,
    #[serde(with = "crate::rat::serde_rat_vec")]
    pub stripes: Vec<Rat>,
}

/// Index-guided walk down the tree of complexes of `Fix(f)`.
///
/// Level `i` cuts the balls of the fixed-point cover up to resolution
/// `i - 2`, each shrunk by `2^-i` as in the standard construction.
pub struct Descender {
    f: Arc<dyn FunctionOracle>,
    cover: FixCover,
    shell: Vec<Ball>,
    budget: Budget,
    pub state: Descent,
}

/// Stripe factors tried in turn when a child index cannot be certified.
/// Only shrinking factors keep every fixed point away from the new boundary.
fn stripe_factors() -> Vec<Rat> {
    let mut v = vec![int(1)];
    for k in 1..=4i64 {
        v.push(Rat::new((2 * k).into(), (2 * k + 1).into()));
    }
    v
}

impl Descender {
    pub fn new(f: Arc<dyn FunctionOracle>, budget: Budget) -> Result<Self> {
        let n = f.dim();
        if n == 0 || n > 2 {
            return Err(Error::UnsupportedDimension {
                op: "descend_fix_component",
                dim: n,
            });
        }
        Ok(Descender {
            cover: FixCover::new(f.clone(), budget.cells),
            f,
            shell: unit_complement_balls(n),
            budget,
            state: Descent {
                path: PathPrefix::root(Complex::from_box(Ambient::Extended.cube(n))),
                indices: Vec::new(),
                stripes: Vec::new(),
            },
        })
    }

    fn cuts(&mut self, i: usize) -> Vec<Ball> {
        let mut balls = self.shell.clone();
        if i >= 2 {
            balls.extend(self.cover.balls_upto(i - 2));
        }
        let slack = pow2(-(i as i32));
        balls
            .into_iter()
            .filter_map(|b| {
                let r = &b.radius - &slack;
                r.is_positive().then_some(Ball {
                    center: b.center,
                    radius: r,
                })
            })
            .collect()
    }

    pub fn depth(&self) -> usize {
        self.state.path.len()
    }

    pub fn current(&self) -> &Complex {
        self.state.path.last()
    }

    /// Descend one level.
    pub fn step(&mut self) -> Result<()> {
        let i = self.depth();
        let cuts = self.cuts(i);
        let parent = self.current().set().clone();
        let mut last_err = None;
        for factor in stripe_factors() {
            let delta = pow2(-(i as i32) - 1) * &factor;
            let kids = expand(&parent, &delta, &cuts, crate::complex_tree::DEFAULT_BOX_CAP)?;
            for (j, k) in kids.iter().enumerate() {
                match index(self.f.as_ref(), k, &self.budget) {
                    Ok(v) if v.value != 0 => {
                        self.state.path.word.push(j);
                        self.state.path.labels.push(k.clone());
                        self.state.indices.push(v.value);
                        self.state.stripes.push(delta);
                        return Ok(());
                    }
                    Ok(_) => {}
                    Err(e @ Error::BudgetExceeded { .. }) => return Err(e),
                    Err(e) => last_err = Some(e),
                }
            }
        }
        Err(last_err.unwrap_or(Error::BoundaryFixedPoint {
            op: "descend_fix_component",
        }))
    }
}

pub fn descend_fix_component(
    f: Arc<dyn FunctionOracle>,
    depth: usize,
    budget: &Budget,
) -> Result<Descent> {
    let mut d = Descender::new(f, budget.clone())?;
    for _ in 0..depth {
        d.step()?;
    }
    Ok(d.state)
}

#[derive(Clone, Debug, Serialize)]
pub struct BrouwerResult {
    #[serde(with = "crate::rat::serde_rat_vec")]
    pub point: Vec<Rat>,
    /// Upper bound for `||f(point) - point||`.
    #[serde(with = "crate::rat::serde_rat")]
    pub residual: Rat,
    pub complex: Complex,
    #[serde(with = "crate::rat::serde_rat")]
    pub diameter: Rat,
    pub converged: bool,
    pub depth: usize,
    pub indices: Vec<i64>,
}

/// Descend until the current complex has diameter `< eps`, then return its
/// point nearest to the center of its bounding box. If the depth limit is
/// reached first, or the descent stalls on a fat fixed component (no child
/// certified, or three levels each shrinking the diameter by under `eps/4`),
/// the result is returned with `converged == false`.
pub fn brouwer_solve(f: Arc<dyn FunctionOracle>, eps: &Rat, budget: &Budget) -> Result<BrouwerResult> {
    if !eps.is_positive() {
        return Err(Error::InvalidArgument {
            op: "brouwer_solve",
            detail: "eps must be positive".into(),
        });
    }
    let mut d = Descender::new(f.clone(), budget.clone())?;
    let mut converged = d.current().set().diameter() < *eps;
    let mut diam = d.current().set().diameter();
    let mut stalled = 0;
    while !converged && d.depth() < budget.max_depth && stalled < 3 {
        match d.step() {
            Ok(()) => {}
            Err(Error::BoundaryFixedPoint { .. }) => break,
            Err(e) => return Err(e),
        }
        let next = d.current().set().diameter();
        // a fat fixed component keeps the diameter from ever reaching eps
        stalled = if &diam - &next < eps / int(4) { stalled + 1 } else { 0 };
        diam = next;
        converged = diam < *eps;
    }
    let c = d.current().clone();
    let point = nearest_to_center(c.set());
    let u = unit(point.len());
    let inside = u.project(&point);
    let a = f.eval(&inside, &(eps / int(16)))?;
    let residual = norm(&sub_vec(&a.value, &point)) + &a.error;
    Ok(BrouwerResult {
        diameter: c.set().diameter(),
        point,
        residual,
        complex: c,
        converged,
        depth: d.depth(),
        indices: d.state.indices.clone(),
    })
}

fn nearest_to_center(s: &BoxSet) -> Vec<Rat> {
    let c = s.bbox().expect("nonempty complex").center();
    let b = s
        .boxes()
        .iter()
        .min_by(|a, b| a.dist_point(&c).cmp(&b.dist_point(&c)))
        .expect("nonempty");
    b.project(&c)
}

/// Evaluations memoized per `(point, precision)`; for expensive oracles.
pub struct Memo<F> {
    inner: F,
    cache: Mutex<BTreeMap<(Vec<Rat>, Rat), Approx>>,
}

impl<F: FunctionOracle> Memo<F> {
    pub fn new(inner: F) -> Self {
        Memo {
            inner,
            cache: Mutex::new(BTreeMap::new()),
        }
    }
}

impl<F: FunctionOracle> FunctionOracle for Memo<F> {
    fn dim(&self) -> usize {
        self.inner.dim()
    }
    fn eval(&self, x: &[Rat], precision: &Rat) -> Result<Approx> {
        let key = (x.to_vec(), precision.clone());
        if let Some(a) = self.cache.lock().expect("memo lock").get(&key) {
            return Ok(a.clone());
        }
        let a = self.inner.eval(x, precision)?;
        self.cache.lock().expect("memo lock").insert(key, a.clone());
        Ok(a)
    }
    fn lipschitz(&self) -> Option<Rat> {
        self.inner.lipschitz()
    }
    fn enclosure(&self, b: &RatBox) -> Option<RatBox> {
        self.inner.enclosure(b)
    }
    fn displacement_enclosure(&self, b: &RatBox) -> Option<RatBox> {
        self.inner.displacement_enclosure(b)
    }
    fn displacement_lower_bound(&self, b: &RatBox) -> Rat {
        self.inner.displacement_lower_bound(b)
    }
    fn displacement_cone(&self, b: &RatBox) -> Option<RatBox> {
        self.inner.displacement_cone(b)
    }
    fn description(&self) -> String {
        self.inner.description()
    }
}

/// Whether some coordinate of a displacement is certainly nonzero.
pub fn certainly_moves(f: &dyn FunctionOracle, x: &[Rat], refine: u32) -> bool {
    certified_displacement(f, x, refine).is_ok()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coded_sets::CoMember;
    use crate::rat::rat;

    fn quad() -> Arc<dyn FunctionOracle> {
        Arc::new(Poly::new(vec![rat(1, 4), int(0), rat(1, 2)]))
    }

    fn sq(lo: Rat, hi: Rat) -> Complex {
        Complex::from_box(RatBox::uniform(2, lo, hi))
    }

    #[test]
    fn fix_cover_examples() {
        let id: Arc<dyn FunctionOracle> = Arc::new(Affine::identity(1));
        assert!(fix_neginfo(id, 6).unwrap().is_empty());
        let s = fix_neginfo(quad(), 6).unwrap();
        assert!(s.balls().iter().any(|b| b.contains(&[rat(9, 10)])));
        let half_map: Arc<dyn FunctionOracle> = Arc::new(Constant {
            value: vec![rat(1, 2)],
        });
        let s = fix_neginfo(half_map, 8).unwrap();
        assert_eq!(s.co_member(&[rat(3, 10)]).unwrap(), CoMember::ConfirmedOutside);
        assert_ne!(s.co_member(&[rat(1, 2)]).unwrap(), CoMember::ConfirmedOutside);
    }

    #[test]
    fn index_1d_examples() {
        let b = Budget::default();
        let v = index_1d(quad().as_ref(), &int(0), &int(1), &b).unwrap();
        assert_eq!(v.value, 1);
        assert!(v.certificate.is_positive());
        let c = Constant {
            value: vec![rat(1, 2)],
        };
        assert_eq!(index_1d(&c, &int(0), &rat(1, 4), &b).unwrap().value, 0);
        let id = Affine::identity(1);
        assert!(matches!(
            index_1d(&id, &rat(1, 4), &rat(3, 4), &b),
            Err(Error::BoundaryFixedPoint { .. })
        ));
    }

    #[test]
    fn index_2d_examples() {
        let b = Budget::default();
        let c = Constant {
            value: vec![rat(1, 2), rat(1, 2)],
        };
        assert_eq!(index_2d(&c, &sq(int(0), int(1)), &b).unwrap().value, 1);
        assert_eq!(index_2d(&c, &sq(int(0), rat(1, 4)), &b).unwrap().value, 0);
        let disjoint = BoxSet::from_boxes(
            2,
            vec![RatBox::uniform(2, int(0), rat(1, 4)), RatBox::uniform(2, rat(3, 8), rat(5, 8))],
        )
        .unwrap();
        assert_eq!(index_of_set(&c, &disjoint, &b).unwrap().value, 1);
    }

    #[test]
    fn rotation_has_index_one_on_the_square() {
        // x ↦ center + R90 (x - center) / 2: a rotating contraction
        let f = Affine::new(
            vec![vec![int(0), rat(-1, 2)], vec![rat(1, 2), int(0)]],
            vec![rat(1, 2), rat(1, 4)],
        )
        .unwrap();
        let v = index_2d(&f, &sq(int(0), int(1)), &Budget::default()).unwrap();
        assert_eq!(v.value, 1);
    }

    #[test]
    fn l_shaped_complex_index() {
        let c = Constant {
            value: vec![rat(1, 8), rat(1, 8)],
        };
        let l = BoxSet::from_boxes(
            2,
            vec![
                RatBox::new(vec![int(0), int(0)], vec![int(1), rat(1, 4)]).unwrap(),
                RatBox::new(vec![int(0), rat(1, 4)], vec![rat(1, 4), int(1)]).unwrap(),
            ],
        )
        .unwrap();
        let l = Complex::new(l).unwrap();
        assert_eq!(index_2d(&c, &l, &Budget::default()).unwrap().value, 1);
    }

    #[test]
    fn clamped_extension_keeps_fixed_points() {
        let f = quad();
        let outside = RatBox::uniform(1, rat(-1, 2), rat(-1, 4));
        assert!(extended_lower_bound(f.as_ref(), &outside).is_positive());
        let v = index_1d(f.as_ref(), &int(-1), &int(2), &Budget::default()).unwrap();
        assert_eq!(v.value, 1);
    }

    #[test]
    fn descent_and_solver_on_the_quadratic() {
        let star = 1.0 - 1.0 / 2f64.sqrt();
        let r = brouwer_solve(quad(), &pow2(-10), &Budget::default()).unwrap();
        assert!(r.converged);
        assert!((crate::rat::to_f64(&r.point[0]) - star).abs() < 1.0 / 1024.0);
        assert!(r.indices.iter().all(|&v| v != 0));
    }

    #[test]
    fn identity_gives_a_fat_component() {
        let id: Arc<dyn FunctionOracle> = Arc::new(Affine::identity(1));
        let budget = Budget {
            max_depth: 8,
            ..Budget::default()
        };
        let r = brouwer_solve(id, &rat(1, 2), &budget).unwrap();
        assert!(!r.converged);
        assert!(r.complex.set().contains(&[int(0)]) && r.complex.set().contains(&[int(1)]));
    }

    #[test]
    fn constant_map_in_the_plane() {
        let f: Arc<dyn FunctionOracle> = Arc::new(Constant {
            value: vec![rat(1, 2), rat(1, 2)],
        });
        let r = brouwer_solve(f, &pow2(-8), &Budget::default()).unwrap();
        assert!(r.converged);
        assert!(crate::rat::dist(&r.point, &[rat(1, 2), rat(1, 2)]) < pow2(-8));
    }

    #[test]
    fn three_dimensions_are_rejected() {
        let f: Arc<dyn FunctionOracle> = Arc::new(Affine::identity(3));
        assert!(matches!(
            descend_fix_component(f, 1, &Budget::default()),
            Err(Error::UnsupportedDimension { dim: 3, .. })
        ));
    }

    #[test]
    fn spec_json() {
        let j = serde_json::json!({"kind": "poly", "coeffs": ["1/4", "0", "1/2"]});
        let f = serde_json::from_value::<FunctionSpec>(j).unwrap().build().unwrap();
        assert_eq!(f.eval(&[int(1)], &pow2(-4)).unwrap().value, vec![rat(3, 4)]);
        let j = serde_json::json!({"kind": "affine", "matrix": [["1/2", "0"], ["0", "1/2"]], "offset": ["1/4", "1/4"]});
        let f = serde_json::from_value::<FunctionSpec>(j).unwrap().build().unwrap();
        assert_eq!(f.dim(), 2);
    }
}
