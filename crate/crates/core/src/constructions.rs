//! Reduction gadgets: the Ariadne-thread map of a connected set, the zero
//! witness and fixability blend, twisted and mixed cubes, the Cantor
//! embedding, the binary-product interval automaton and majority voting.

use std::collections::{HashMap, HashSet, VecDeque};
use std::sync::{Arc, Mutex};

use num_traits::{Signed, Zero};
use serde::{Deserialize, Serialize};

use crate::coded_sets::{box_covered_by, Ambient, Ball, NegInfoSet};
use crate::complex_tree::unique_path_set;
use crate::error::{check_dim, Error, Result};
use crate::fixed_point::{box_min_norm, Approx, FunctionOracle};
use crate::geometry::{distance_to_complement, distance_to_set, path_witness, BoxSet, Complex, PolyPath, RatBox};
use crate::points::PointOracle;
use crate::rat::{half, int, norm, pow2, rat, scale_vec, sub_vec, Rat};

/// Ball-stream budget handed to the path selection.
pub const DEFAULT_FUEL: usize = 100_000;
/// Deepest level the Ariadne data may be materialized to.
pub const MAX_LEVELS: usize = 48;

/// Uniform affine frame `x ↦ scale·x + shift` from tree coordinates into
/// the unit cube, plus the number of leading tree levels that are skipped.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Frame {
    pub scale: Rat,
    pub shift: Rat,
    pub skip: usize,
}

impl Frame {
    /// `[-1,2]^n → [1/16, 15/16]^n`, i.e. `x ↦ (x+1)·(7/8)/3 + 1/16`.
    pub fn standard() -> Self {
        Frame {
            scale: rat(7, 24),
            shift: rat(17, 48),
            skip: 0,
        }
    }

    /// Identity coordinates for sets inside `[1/8, 7/8]^n`; the first levels
    /// are dropped until every complex fits in `[1/16, 15/16]^n`.
    pub fn native(n: usize) -> Self {
        Frame {
            scale: int(1),
            shift: Rat::zero(),
            skip: (2 * n).max(5),
        }
    }

    pub fn to_unit(&self, x: &[Rat]) -> Vec<Rat> {
        x.iter().map(|v| v * &self.scale + &self.shift).collect()
    }

    pub fn to_tree(&self, y: &[Rat]) -> Vec<Rat> {
        y.iter().map(|v| (v - &self.shift) / &self.scale).collect()
    }

    pub fn box_to_tree(&self, b: &RatBox) -> RatBox {
        RatBox {
            lo: self.to_tree(&b.lo),
            hi: self.to_tree(&b.hi),
        }
    }
}

/// Balls covering `[-1,2]^n \ [1/8, 7/8]^n`.
pub fn native_shell_balls(n: usize) -> Vec<Ball> {
    let mut out = Vec::with_capacity(2 * n);
    for k in 0..n {
        for side in [rat(-15, 8), rat(23, 8)] {
            let mut c = vec![rat(1, 2); n];
            c[k] = side;
            out.push(Ball {
                center: c,
                radius: int(2),
            });
        }
    }
    out
}

/// Levels `A_i`, anchors `x_i ∈ A_i` and paths `p_i` in `A_i` from `x_{i+1}`
/// to `x_i`, in tree coordinates.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize)]
pub struct AriadneData {
    pub levels: Vec<Complex>,
    #[serde(with = "crate::rat::serde_rat_mat")]
    pub anchors: Vec<Vec<Rat>>,
    pub paths: Vec<PolyPath>,
}

/// `f = id + 2^-4 Σ g_i` for a connected set given by negative information.
pub struct AriadneFunction {
    dim: usize,
    source: NegInfoSet,
    frame: Frame,
    fuel: usize,
    data: Mutex<AriadneData>,
}

impl std::fmt::Debug for AriadneFunction {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("AriadneFunction")
            .field("dim", &self.dim)
            .field("frame", &self.frame)
            .finish()
    }
}

fn unit_dir(v: &[Rat]) -> Vec<Rat> {
    let m = norm(v);
    v.iter().map(|x| x / &m).collect()
}

fn precision_level(p: &Rat) -> usize {
    let mut k = 0;
    let mut t = int(1);
    while &t > p && k < 4096 {
        t = half(&t);
        k += 1;
    }
    k
}

impl AriadneFunction {
    /// `source` lives over `[-1,2]^n`; `frame` maps tree coordinates to the cube.
    pub fn new(source: NegInfoSet, frame: Frame, fuel: usize) -> Result<Self> {
        if source.ambient() != Ambient::Extended {
            return Err(Error::InvalidArgument {
                op: "AriadneFunction::new",
                detail: "source must be over [-1,2]^n".into(),
            });
        }
        let f = AriadneFunction {
            dim: source.dim(),
            source,
            frame,
            fuel,
            data: Mutex::new(AriadneData::default()),
        };
        f.ensure(4)?;
        if f.frame.skip > 0 {
            let inner = RatBox::uniform(f.dim, rat(1, 16), rat(15, 16));
            let data = f.data.lock().expect("ariadne lock");
            if !data.levels[0].set().boxes().iter().all(|b| inner.contains_box(b)) {
                return Err(Error::PromiseViolated {
                    op: "AriadneFunction::new",
                    detail: "set does not lie in [1/8, 7/8]^n".into(),
                });
            }
        }
        Ok(f)
    }

    pub fn frame(&self) -> &Frame {
        &self.frame
    }

    /// Materialize at least `count` levels.
    pub fn ensure(&self, count: usize) -> Result<()> {
        let mut data = self.data.lock().expect("ariadne lock");
        if data.levels.len() >= count {
            return Ok(());
        }
        if count > MAX_LEVELS {
            return Err(Error::BudgetExceeded {
                op: "function_from_connected",
                detail: format!("needs {count} levels, limit {MAX_LEVELS}"),
            });
        }
        let target = count.max(2 * data.levels.len()).min(MAX_LEVELS);
        let path = unique_path_set(&self.source, self.frame.skip + target - 1, self.fuel)?;
        let levels: Vec<Complex> = path.labels[self.frame.skip..].to_vec();
        let anchors: Vec<Vec<Rat>> = levels
            .iter()
            .map(|c| c.anchor().expect("levels are non-empty"))
            .collect();
        let mut paths = Vec::with_capacity(levels.len());
        for k in 0..levels.len() - 1 {
            paths.push(path_witness(&levels[k], &anchors[k + 1], &anchors[k])?);
        }
        *data = AriadneData {
            levels,
            anchors,
            paths,
        };
        Ok(())
    }

    pub fn snapshot(&self) -> AriadneData {
        self.data.lock().expect("ariadne lock").clone()
    }

    /// `Σ g_i(x)` at a point in tree coordinates, with an error bound.
    fn sum_g(&self, x: &[Rat], need: usize) -> Result<(Vec<Rat>, Rat)> {
        self.ensure(3)?;
        loop {
            let data = self.data.lock().expect("ariadne lock");
            let l = data.levels.len();
            let m = (0..l).find(|&k| !data.levels[k].set().contains(x));
            match m {
                Some(m) if m <= 1 => {
                    let d = distance_to_set(data.levels[1].set(), x).expect("non-empty");
                    let u = unit_dir(&sub_vec(&data.anchors[2], x));
                    let w = half(&(d * &self.frame.scale + int(1)));
                    return Ok((scale_vec(&u, &w), Rat::zero()));
                }
                Some(m) if m + 1 < l => {
                    let din = distance_to_set(data.levels[m].set(), x).expect("non-empty");
                    let dout = distance_to_complement(data.levels[m - 1].set(), x);
                    let dd = &din / (&din + dout);
                    let q = data.paths[m].at(&dd);
                    let u = unit_dir(&sub_vec(&q, x));
                    let w = pow2(-(m as i32)) * (dd + int(1));
                    return Ok((scale_vec(&u, &w), Rat::zero()));
                }
                Some(m) => {
                    drop(data);
                    self.ensure(m + 2)?;
                }
                None if l >= need => {
                    // g_i vanishes for i <= l - 2
                    return Ok((vec![Rat::zero(); self.dim], pow2(-(l as i32) + 1)));
                }
                None => {
                    drop(data);
                    self.ensure(need)?;
                }
            }
        }
    }

    /// Smallest materialized level in `0..=upto` that misses the box (tree coordinates).
    fn first_missing_level(&self, b: &RatBox, upto: usize) -> Result<Option<usize>> {
        self.ensure((upto + 1).min(MAX_LEVELS))?;
        let data = self.data.lock().expect("ariadne lock");
        Ok((0..data.levels.len().min(upto + 1)).find(|&j| !data.levels[j].set().intersects_box(b)))
    }

    fn levels_for(&self, b: &RatBox) -> usize {
        let d = b.diameter();
        let mut j = 3;
        while pow2(-(j as i32)) * int(4) > d && j + 3 < MAX_LEVELS {
            j += 1;
        }
        j + 2
    }
}

impl FunctionOracle for AriadneFunction {
    fn dim(&self) -> usize {
        self.dim
    }

    fn eval(&self, y: &[Rat], precision: &Rat) -> Result<Approx> {
        check_dim("AriadneFunction::eval", self.dim, y.len())?;
        let k = precision_level(precision);
        let x = self.frame.to_tree(y);
        let (s, err) = self.sum_g(&x, k + 5)?;
        let c = pow2(-4);
        Ok(Approx {
            value: y.iter().zip(&s).map(|(a, b)| a + b * &c).collect(),
            error: err * c,
        })
    }

    /// Every `x` outside `A_j` has `||Σ g(x)|| >= 2^-max(j,1)`.
    fn displacement_lower_bound(&self, b: &RatBox) -> Rat {
        let t = self.frame.box_to_tree(b);
        match self.first_missing_level(&t, self.levels_for(&t)) {
            Ok(Some(j)) => pow2(-4 - (j.max(1) as i32)),
            _ => Rat::zero(),
        }
    }

    /// For `x` whose first missing level is `m`, the displacement points
    /// from `x` to `x_2` (`m <= 1`) or to `p_m(D(x))`. The box can only meet
    /// the regimes between the first level not containing it and the first
    /// level it misses; `D` is bounded through 1-Lipschitz distances.
    fn displacement_cone(&self, b: &RatBox) -> Option<RatBox> {
        let t = self.frame.box_to_tree(b);
        let top = self.first_missing_level(&t, self.levels_for(&t)).ok()??;
        let data = self.data.lock().expect("ariadne lock");
        let low = (0..top)
            .find(|&k| !box_inside(&t, data.levels[k].set()))
            .unwrap_or(top);
        let c = t.center();
        let rad = half(&t.diameter());
        let mut hull: Option<RatBox> = None;
        for m in low..=top {
            let q = if m <= 1 {
                RatBox::point(&data.anchors[2])
            } else {
                if m + 1 >= data.levels.len() {
                    return None;
                }
                let inner = data.levels[m].set();
                let gap = inner.boxes().iter().map(|x| x.dist_box(&t)).min()?;
                let din_c = distance_to_set(inner, &c)?;
                let din_lo = gap.max(&din_c - &rad);
                let din_hi = &din_c + &rad;
                let dout_c = distance_to_complement(data.levels[m - 1].set(), &c);
                let dout_lo = (&dout_c - &rad).max(Rat::zero());
                let dout_hi = &dout_c + &rad;
                let dd_lo = &din_lo / (&din_lo + &dout_hi);
                let dd_hi = if (&din_hi + &dout_lo).is_zero() {
                    int(1)
                } else {
                    &din_hi / (&din_hi + &dout_lo)
                };
                data.paths[m].enclosure(&dd_lo, &dd_hi)
            };
            let k = RatBox {
                lo: q.lo.iter().zip(&t.hi).map(|(a, h)| a - h).collect(),
                hi: q.hi.iter().zip(&t.lo).map(|(a, l)| a - l).collect(),
            };
            hull = Some(match hull {
                None => k,
                Some(h) => RatBox {
                    lo: h.lo.iter().zip(&k.lo).map(|(a, b)| a.min(b).clone()).collect(),
                    hi: h.hi.iter().zip(&k.hi).map(|(a, b)| a.max(b).clone()).collect(),
                },
            });
        }
        hull.filter(|k| box_min_norm(k).is_positive())
    }

    fn description(&self) -> String {
        format!("ariadne map in dimension {}", self.dim)
    }
}

/// `t ⊆ ∪ set`, by subtracting the boxes one at a time.
fn box_inside(t: &RatBox, set: &BoxSet) -> bool {
    let mut rest = vec![t.clone()];
    for b in set.boxes() {
        rest = rest.iter().flat_map(|p| p.minus_closed_closure(b)).collect();
        if rest.is_empty() {
            return true;
        }
    }
    false
}

/// The standard construction: `Fix(f)` is the frame image of the set.
pub fn function_from_connected(s: &NegInfoSet, fuel: usize) -> Result<AriadneFunction> {
    if s.ambient() != Ambient::Unit {
        return Err(Error::InvalidArgument {
            op: "function_from_connected",
            detail: "expects a set in [0,1]^n".into(),
        });
    }
    AriadneFunction::new(s.embed_extended(), Frame::standard(), fuel)
}

/// The construction without a change of coordinates, for sets inside
/// `[1/8, 7/8]^n`: here `Fix(f)` is the set itself.
pub fn function_from_connected_native(s: &NegInfoSet, fuel: usize) -> Result<AriadneFunction> {
    let n = s.dim();
    let mut src = NegInfoSet::new(n, Ambient::Extended)?;
    src.extend(native_shell_balls(n))?;
    src.extend(s.balls().iter().cloned())?;
    src.set_exhausted(s.is_exhausted());
    AriadneFunction::new(src, Frame::native(n), fuel)
}

/// `g(x) = Σ 2^-i-1 · clamp(1 - ||x - c_i|| / r_i)`, zero exactly on the set.
#[derive(Clone, Debug)]
pub struct ZeroWitness {
    set: NegInfoSet,
}

impl ZeroWitness {
    pub fn new(set: NegInfoSet) -> Self {
        ZeroWitness { set }
    }

    fn tail(&self) -> Rat {
        if self.set.is_exhausted() {
            Rat::zero()
        } else {
            pow2(-(self.set.len() as i32))
        }
    }

    fn term(i: usize, t: Rat) -> Rat {
        let t = if t.is_negative() { Rat::zero() } else if t > int(1) { int(1) } else { t };
        pow2(-(i as i32) - 1) * t
    }

    /// Value from the listed balls and the bound on the unlisted tail.
    pub fn eval(&self, x: &[Rat], precision: &Rat) -> Result<(Rat, Rat)> {
        check_dim("ZeroWitness::eval", self.set.dim(), x.len())?;
        let err = self.tail();
        if &err > precision {
            return Err(Error::BudgetExceeded {
                op: "zero_witness",
                detail: format!("only {} balls listed", self.set.len()),
            });
        }
        let v = self
            .set
            .balls()
            .iter()
            .enumerate()
            .map(|(i, b)| Self::term(i, int(1) - crate::rat::dist(x, &b.center) / &b.radius))
            .fold(Rat::zero(), |a, b| a + b);
        Ok((v, err))
    }

    pub fn lower_bound(&self, b: &RatBox) -> Rat {
        self.set
            .balls()
            .iter()
            .enumerate()
            .map(|(i, ball)| {
                let far = (0..b.dim())
                    .map(|k| {
                        let a = (&b.lo[k] - &ball.center[k]).abs();
                        let c = (&b.hi[k] - &ball.center[k]).abs();
                        if a > c { a } else { c }
                    })
                    .max()
                    .unwrap_or_else(Rat::zero);
                Self::term(i, int(1) - far / &ball.radius)
            })
            .fold(Rat::zero(), |a, b| a + b)
    }
}

/// `h = (1 - g)·id + g·f`, with `f` the Ariadne map of a component `C` and
/// `g` the zero witness of `A`; `Fix(h) = A`.
pub struct FixableFunction {
    g: ZeroWitness,
    f: AriadneFunction,
}

impl FixableFunction {
    pub fn parts(&self) -> (&ZeroWitness, &AriadneFunction) {
        (&self.g, &self.f)
    }
}

pub fn zero_witness(s: &NegInfoSet) -> ZeroWitness {
    ZeroWitness::new(s.clone())
}

pub fn fixable_function(sa: &NegInfoSet, sc: &NegInfoSet, fuel: usize) -> Result<FixableFunction> {
    check_dim("fixable_function", sa.dim(), sc.dim())?;
    Ok(FixableFunction {
        g: ZeroWitness::new(sa.clone()),
        f: function_from_connected_native(sc, fuel)?,
    })
}

impl FunctionOracle for FixableFunction {
    fn dim(&self) -> usize {
        self.f.dim()
    }

    fn eval(&self, x: &[Rat], precision: &Rat) -> Result<Approx> {
        let p = precision / int(4);
        let (g, ge) = self.g.eval(x, &p)?;
        let a = self.f.eval(x, &p)?;
        let d = sub_vec(&a.value, x);
        let error = &ge * (norm(&d) + &a.error) + (&g + &ge) * &a.error;
        Ok(Approx {
            value: x.iter().zip(&d).map(|(xi, di)| xi + &g * di).collect(),
            error,
        })
    }

    fn displacement_lower_bound(&self, b: &RatBox) -> Rat {
        let g = self.g.lower_bound(b);
        if g.is_zero() {
            return g;
        }
        g * self.f.displacement_lower_bound(b)
    }

    fn displacement_cone(&self, b: &RatBox) -> Option<RatBox> {
        if self.g.lower_bound(b).is_positive() {
            self.f.displacement_cone(b)
        } else {
            None
        }
    }

    fn description(&self) -> String {
        "fixability blend".into()
    }
}

struct AxisGrid {
    covered: Vec<bool>,
}

fn grid_interval(k: usize, j: usize) -> RatBox {
    let h = pow2(-(k as i32));
    let c = &h * int(j as i64);
    RatBox {
        lo: vec![&c - &h],
        hi: vec![c + h],
    }
}

impl AxisGrid {
    fn new(s: &NegInfoSet, k: usize) -> Self {
        let prefix = &s.balls()[..s.len().min(k + 1)];
        let unit = RatBox::uniform(1, int(0), int(1));
        let covered = (0..=1usize << k)
            .map(|j| {
                let iv = grid_interval(k, j).intersection(&unit).expect("grid meets [0,1]");
                box_covered_by(prefix, &iv)
            })
            .collect();
        AxisGrid { covered }
    }
}

/// Stage `k` of a grid enumeration: cubes `B(j·2^-k, 2^-k)` satisfying the
/// predicate, skipping those inside a cube that already qualified at `k-1`.
fn grid_stage(
    dim: usize,
    k: usize,
    pred: &dyn Fn(&[usize]) -> bool,
    prev: &HashSet<Vec<usize>>,
) -> (Vec<Ball>, HashSet<Vec<usize>>) {
    let side = (1usize << k) + 1;
    let h = pow2(-(k as i32));
    let mut idx = vec![0usize; dim];
    let mut out = Vec::new();
    let mut kept = Vec::new();
    let mut sat = HashSet::new();
    loop {
        if pred(&idx) {
            let parents: Vec<Vec<usize>> = idx
                .iter()
                .map(|&j| if j % 2 == 0 { vec![j / 2] } else { vec![j / 2, j / 2 + 1] })
                .collect();
            let mut inherited = false;
            let mut pick = vec![0usize; dim];
            'odo: loop {
                let p: Vec<usize> = (0..dim).map(|a| parents[a][pick[a]]).collect();
                if prev.contains(&p) {
                    inherited = true;
                    break;
                }
                for a in 0..dim {
                    pick[a] += 1;
                    if pick[a] < parents[a].len() {
                        continue 'odo;
                    }
                    pick[a] = 0;
                }
                break;
            }
            if !inherited {
                out.push(idx.clone());
            }
            sat.insert(idx.clone());
        } else {
            kept.push(idx.clone());
        }
        let mut a = 0;
        loop {
            if a == dim {
                // farthest from what the stage keeps goes first, distance
                // measured through cubes still present, so the removed region
                // grows inwards and never cuts off a fragment
                let reach = grid_reach(&kept, &out, side);
                let reach = |i: &Vec<usize>| reach.get(i).copied().unwrap_or(usize::MAX);
                let mut keyed: Vec<(usize, Vec<usize>)> = out.into_iter().map(|i| (reach(&i), i)).collect();
                keyed.sort_by(|a, b| b.0.cmp(&a.0).then_with(|| a.1.cmp(&b.1)));
                let balls = keyed
                    .into_iter()
                    .map(|(_, i)| Ball {
                        center: i.iter().map(|&j| &h * int(j as i64)).collect(),
                        radius: h.clone(),
                    })
                    .collect();
                return (balls, sat);
            }
            idx[a] += 1;
            if idx[a] < side {
                break;
            }
            idx[a] = 0;
            a += 1;
        }
    }
}

/// Breadth-first grid distance from `kept` through `pending`. Only axis
/// steps count: the removed open cubes cover every diagonal segment.
fn grid_reach(kept: &[Vec<usize>], pending: &[Vec<usize>], side: usize) -> HashMap<Vec<usize>, usize> {
    let open: HashSet<&Vec<usize>> = pending.iter().collect();
    let mut dist: HashMap<Vec<usize>, usize> = kept.iter().map(|k| (k.clone(), 0)).collect();
    let mut queue: VecDeque<Vec<usize>> = kept.iter().cloned().collect();
    while let Some(p) = queue.pop_front() {
        let d = dist[&p];
        for a in 0..p.len() {
            for q in [p[a].checked_sub(1), Some(p[a] + 1).filter(|&v| v < side)].into_iter().flatten() {
                let mut n = p.clone();
                n[a] = q;
                if open.contains(&n) && !dist.contains_key(&n) {
                    dist.insert(n.clone(), d + 1);
                    queue.push_back(n);
                }
            }
        }
    }
    dist
}

fn grid_enumerate(
    s: &NegInfoSet,
    dim: usize,
    stages: usize,
    pred: impl Fn(usize, &AxisGrid, &[usize]) -> bool,
) -> Vec<Vec<Ball>> {
    let mut prev = HashSet::new();
    let mut out = Vec::with_capacity(stages);
    for k in 1..=stages {
        let g = AxisGrid::new(s, k);
        let (balls, sat) = grid_stage(dim, k, &|idx| pred(k, &g, idx), &prev);
        out.push(balls);
        prev = sat;
    }
    out
}

fn check_1d(op: &'static str, s: &NegInfoSet) -> Result<()> {
    check_dim(op, 1, s.dim())?;
    if s.ambient() != Ambient::Unit {
        return Err(Error::InvalidArgument {
            op,
            detail: "expects a set in [0,1]".into(),
        });
    }
    Ok(())
}

/// Ball emissions of the twisted cube
/// `T(A) = A×[0,1]×{0} ∪ A×A×[0,1] ∪ [0,1]×A×{1}`, one list per grid stage.
pub fn twisted_stages(s: &NegInfoSet, stages: usize) -> Result<Vec<Vec<Ball>>> {
    check_1d("twisted_cube", s)?;
    Ok(grid_enumerate(s, 3, stages, |k, g, idx| {
        let (u, v) = (g.covered[idx[0]], g.covered[idx[1]]);
        // closure of W misses 0, resp. 1
        let no0 = idx[2] >= 2;
        let no1 = idx[2] + 1 < (1 << k);
        (no0 || u) && (u || v) && (no1 || v)
    }))
}

pub fn twisted_cube(s: &NegInfoSet, stages: usize) -> Result<NegInfoSet> {
    let mut out = NegInfoSet::new(3, Ambient::Unit)?;
    out.extend(twisted_stages(s, stages)?.into_iter().flatten())?;
    Ok(out)
}

/// Whether a point lies in `T(A)` for an exhausted `A` (exact membership).
pub fn in_twisted(s: &NegInfoSet, x: &[Rat]) -> bool {
    let ina = |t: &Rat| s.balls().iter().all(|b| !b.contains(std::slice::from_ref(t)));
    let unit = |t: &Rat| !t.is_negative() && t <= &int(1);
    if !x.iter().all(unit) {
        return false;
    }
    (ina(&x[0]) && x[2].is_zero()) || (ina(&x[0]) && ina(&x[1])) || (ina(&x[1]) && x[2] == int(1))
}

/// Mixed cube over `n` axes: coordinate `i` free and all others in `A`,
/// united over `i`. A grid cube is emitted once two of its axes are covered.
pub fn generalized_mixed_stages(s: &NegInfoSet, n: usize, stages: usize) -> Result<Vec<Vec<Ball>>> {
    check_1d("mixed_cube", s)?;
    if n < 2 {
        return Err(Error::InvalidArgument {
            op: "mixed_cube",
            detail: "needs n >= 2".into(),
        });
    }
    Ok(grid_enumerate(s, n, stages, |_, g, idx| {
        idx.iter().filter(|&&j| g.covered[j]).count() >= 2
    }))
}

pub fn generalized_mixed_cube(s: &NegInfoSet, n: usize, stages: usize) -> Result<NegInfoSet> {
    let mut out = NegInfoSet::new(n, Ambient::Unit)?;
    out.extend(generalized_mixed_stages(s, n, stages)?.into_iter().flatten())?;
    Ok(out)
}

pub fn mixed_cube(s: &NegInfoSet, stages: usize) -> Result<NegInfoSet> {
    generalized_mixed_cube(s, 2, stages)
}

/// One coordinate of a point of the twisted cube that is sure to lie in `A`.
pub struct TwistedDecoded {
    inner: Arc<dyn PointOracle>,
    coord: usize,
}

impl TwistedDecoded {
    pub fn coord(&self) -> usize {
        self.coord
    }
}

impl PointOracle for TwistedDecoded {
    fn dim(&self) -> usize {
        1
    }
    fn approx(&self, eps: &Rat) -> Vec<Rat> {
        vec![self.inner.approx(eps)[self.coord].clone()]
    }
}

/// Semidecide `x3 < 2/3` (then `x1 ∈ A`) and `x3 > 1/3` (then `x2 ∈ A`)
/// at growing precision; the first test to fire picks the coordinate.
pub fn twisted_decode(p: Arc<dyn PointOracle>, query_cap: usize) -> Result<TwistedDecoded> {
    check_dim("twisted_decode", 3, p.dim())?;
    let mut eps = pow2(-2);
    for _ in 0..query_cap {
        let q = p.approx(&eps);
        if &q[2] + &eps < rat(2, 3) {
            return Ok(TwistedDecoded { inner: p, coord: 0 });
        }
        if &q[2] - &eps > rat(1, 3) {
            return Ok(TwistedDecoded { inner: p, coord: 1 });
        }
        eps = half(&eps);
    }
    Err(Error::ResourceLimit {
        op: "twisted_decode",
        detail: format!("no test fired after {query_cap} queries"),
    })
}

/// `ι(p) = Σ 2 p_i / 3^(i+1)`.
pub struct CantorPoint<F> {
    bits: F,
}

impl<F: Fn(usize) -> bool + Send + Sync> CantorPoint<F> {
    pub fn new(bits: F) -> Self {
        CantorPoint { bits }
    }
}

impl<F: Fn(usize) -> bool + Send + Sync> PointOracle for CantorPoint<F> {
    fn dim(&self) -> usize {
        1
    }
    fn approx(&self, eps: &Rat) -> Vec<Rat> {
        let mut w = rat(1, 3);
        let mut acc = Rat::zero();
        let mut i = 0;
        // the digits from position i on contribute at most 3·w = 3^-i
        while &w * int(3) > *eps {
            if (self.bits)(i) {
                acc += &w * int(2);
            }
            w /= int(3);
            i += 1;
        }
        vec![acc]
    }
}

pub fn cantor_embed<F: Fn(usize) -> bool + Send + Sync>(bits: F) -> CantorPoint<F> {
    CantorPoint::new(bits)
}

/// The first `count` binary digits of a point of the Cantor set.
pub fn cantor_extract(x: &dyn PointOracle, count: usize) -> Result<Vec<bool>> {
    check_dim("cantor_extract", 1, x.dim())?;
    let mut a = Rat::zero();
    let mut w = int(1);
    let mut out = Vec::with_capacity(count);
    for _ in 0..count {
        let third = &w / int(3);
        let eps = &third / int(4);
        let q = x.approx(&eps).remove(0);
        if q < &a + &third + &eps {
            if q < &a - &eps {
                return Err(Error::PromiseViolated {
                    op: "cantor_extract",
                    detail: "point left of the current interval".into(),
                });
            }
            out.push(false);
        } else if q > &a + &third * int(2) - &eps && q <= &a + &w + &eps {
            out.push(true);
            a += &third * int(2);
        } else {
            return Err(Error::PromiseViolated {
                op: "cantor_extract",
                detail: "point outside the Cantor set".into(),
            });
        }
        w = third;
    }
    Ok(out)
}

/// A revealed constraint: slot `slot` (1-based) must not take value `forbid`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Constraint {
    pub slot: usize,
    pub forbid: u8,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TranscriptEntry {
    /// Position in the event stream that caused the descent.
    pub event: usize,
    pub slot: usize,
    pub bit: u8,
    /// 0-based child among the `2n` canonical subintervals.
    pub child: usize,
    #[serde(with = "crate::rat::serde_rat_vec")]
    pub interval: Vec<Rat>,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct BitTranscript {
    pub entries: Vec<TranscriptEntry>,
}

fn root_interval(n: usize) -> (Rat, Rat) {
    let n = n as i64;
    (rat(1, 2 * n + 2), rat(1, 2 * n + 1))
}

/// Child `j` of `[a, b]`: `[a + 2j·h, a + (2j+1)·h]` with `h = (b-a)/(4n)`.
pub fn child_interval(n: usize, a: &Rat, b: &Rat, j: usize) -> (Rat, Rat) {
    let h = (b - a) / int(4 * n as i64);
    (a + &h * int(2 * j as i64), a + &h * int(2 * j as i64 + 1))
}

/// The interval automaton encoding `n` constrained bits as a connected set.
#[derive(Clone, Debug)]
pub struct BinaryEncoder {
    n: usize,
    interval: (Rat, Rat),
    forbidden: Vec<Option<u8>>,
    events: usize,
    transcript: BitTranscript,
    out: NegInfoSet,
}

fn outside_balls(a: &Rat, b: &Rat) -> [Ball; 2] {
    [
        Ball {
            center: vec![a - int(1)],
            radius: int(1),
        },
        Ball {
            center: vec![b + int(1)],
            radius: int(1),
        },
    ]
}

impl BinaryEncoder {
    pub fn new(n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidArgument {
                op: "encode_binary_product",
                detail: "n must be positive".into(),
            });
        }
        let (a, b) = root_interval(n);
        let mut out = NegInfoSet::new(1, Ambient::Unit)?;
        out.extend(outside_balls(&a, &b))?;
        Ok(BinaryEncoder {
            n,
            interval: (a, b),
            forbidden: vec![None; n],
            events: 0,
            transcript: BitTranscript::default(),
            out,
        })
    }

    pub fn reveal(&mut self, c: Constraint) -> Result<()> {
        let ev = self.events;
        self.events += 1;
        if c.slot == 0 || c.slot > self.n || c.forbid > 1 {
            return Err(Error::Malformed {
                op: "encode_binary_product",
                detail: format!("constraint {c:?} out of range"),
            });
        }
        match self.forbidden[c.slot - 1] {
            Some(f) if f == c.forbid => Ok(()),
            Some(_) => Err(Error::Malformed {
                op: "encode_binary_product",
                detail: format!("both bits forbidden for slot {}", c.slot),
            }),
            None => {
                self.forbidden[c.slot - 1] = Some(c.forbid);
                let bit = 1 - c.forbid;
                let child = 2 * (c.slot - 1) + bit as usize;
                let (a, b) = child_interval(self.n, &self.interval.0, &self.interval.1, child);
                self.out.extend(outside_balls(&a, &b))?;
                self.transcript.entries.push(TranscriptEntry {
                    event: ev,
                    slot: c.slot,
                    bit,
                    child,
                    interval: vec![a.clone(), b.clone()],
                });
                self.interval = (a, b);
                Ok(())
            }
        }
    }

    pub fn interval(&self) -> (&Rat, &Rat) {
        (&self.interval.0, &self.interval.1)
    }

    pub fn transcript(&self) -> &BitTranscript {
        &self.transcript
    }

    /// Negative information emitted so far; exhausted once every slot is known.
    pub fn set(&self) -> NegInfoSet {
        let mut s = self.out.clone();
        s.set_exhausted(true);
        s
    }
}

pub fn encode_binary_product(n: usize, constraints: &[Constraint]) -> Result<BinaryEncoder> {
    let mut e = BinaryEncoder::new(n)?;
    for c in constraints {
        e.reveal(*c)?;
    }
    Ok(e)
}

/// Interval chain reproduced from a transcript.
pub fn replay_transcript(n: usize, t: &BitTranscript) -> Vec<(Rat, Rat)> {
    let mut cur = root_interval(n);
    let mut out = vec![cur.clone()];
    for e in &t.entries {
        cur = child_interval(n, &cur.0, &cur.1, e.child);
        out.push(cur.clone());
    }
    out
}

/// Bits from a point of the encoded interval: descend `n` levels by nearest
/// child, reading `(slot, bit)` off each child; the first mention of a slot
/// wins and unmentioned slots read 0.
pub fn decode_binary_product(n: usize, x: &dyn PointOracle) -> Result<Vec<u8>> {
    check_dim("decode_binary_product", 1, x.dim())?;
    if n == 0 {
        return Err(Error::InvalidArgument {
            op: "decode_binary_product",
            detail: "n must be positive".into(),
        });
    }
    let (mut a, mut b) = root_interval(n);
    let mut len = &b - &a;
    for _ in 0..n {
        len /= int(4 * n as i64);
    }
    let eps = len / int(4);
    let q = x.approx(&eps).remove(0);
    if q < &a - &eps || q > &b + &eps {
        return Err(Error::PromiseViolated {
            op: "decode_binary_product",
            detail: "point outside the root interval".into(),
        });
    }
    let mut bits: Vec<Option<u8>> = vec![None; n];
    for _ in 0..n {
        let best = (0..2 * n)
            .min_by_key(|&j| {
                let (lo, hi) = child_interval(n, &a, &b, j);
                RatBox::new(vec![lo], vec![hi]).expect("ordered").dist_point(std::slice::from_ref(&q))
            })
            .expect("2n children");
        let slot = best / 2;
        if bits[slot].is_none() {
            bits[slot] = Some((best % 2) as u8);
        }
        let c = child_interval(n, &a, &b, best);
        a = c.0;
        b = c.1;
    }
    Ok(bits.into_iter().map(|b| b.unwrap_or(0)).collect())
}

/// Bitwise vote: output 1 where at least `k` of the `m` answers say 1.
pub fn majority_vote(answers: &[Vec<bool>], k: usize) -> Result<Vec<bool>> {
    let m = answers.len();
    if 2 * k <= m {
        return Err(Error::InvalidArgument {
            op: "majority_vote",
            detail: format!("needs 2k > m, got k={k}, m={m}"),
        });
    }
    let len = answers.iter().map(|a| a.len()).min().unwrap_or(0);
    Ok((0..len)
        .map(|i| answers.iter().filter(|a| a[i]).count() >= k)
        .collect())
}
