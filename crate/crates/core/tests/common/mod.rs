//! Fixtures and test-side oracles shared by the integration tests. Nothing
//! here calls into the library's geometry: membership, distances and
//! component counts are recomputed from the ball lists directly.
#![allow(dead_code)]

use num_traits::{Signed, Zero};
use rand::rngs::StdRng;
use rand::Rng;

use ratcomplex::coded_sets::{Ambient, Ball, NegInfoSet};
use ratcomplex::geometry::RatBox;
use ratcomplex::Rat;

#[allow(unused_imports)]
pub use ratcomplex::rat::{int, pow2 as p2, rat as r};

pub fn ball(c: &[Rat], rad: Rat) -> Ball {
    Ball::new(c.to_vec(), rad).unwrap()
}

pub struct Fixture {
    pub name: &'static str,
    pub set: NegInfoSet,
}

impl Fixture {
    pub fn new(name: &'static str, dim: usize, balls: Vec<(Vec<Rat>, Rat)>) -> Self {
        let balls = balls.into_iter().map(|(c, rad)| ball(&c, rad)).collect();
        Fixture {
            name,
            set: NegInfoSet::exhausted(dim, Ambient::Unit, balls).unwrap(),
        }
    }

    pub fn dim(&self) -> usize {
        self.set.dim()
    }

    pub fn contains(&self, x: &[Rat]) -> bool {
        in_residual(self.set.balls(), x)
    }

    pub fn cells(&self) -> Vec<RatBox> {
        residual_cells(self.dim(), self.set.balls())
    }
}

fn iv(lo: (i64, i64), hi: (i64, i64)) -> (Vec<Rat>, Rat) {
    // the open ball whose trace on the line is (lo, hi)
    let (a, b) = (r(lo.0, lo.1), r(hi.0, hi.1));
    (vec![(&a + &b) / r(2, 1)], (&b - &a) / r(2, 1))
}

fn b2(cx: (i64, i64), cy: (i64, i64), rad: (i64, i64)) -> (Vec<Rat>, Rat) {
    (vec![r(cx.0, cx.1), r(cy.0, cy.1)], r(rad.0, rad.1))
}

/// Exhausted box-union fixtures in `[0,1]` and `[0,1]^2`. Level `i` cuts the
/// balls `j <= i`, so a depth-8 tree sees the first eight balls of the
/// embedded name; every fixture stays within that.
pub fn corpus() -> Vec<Fixture> {
    let mut out = vec![
        Fixture::new("line", 1, vec![]),
        Fixture::new("two_intervals", 1, vec![iv((1, 4), (1, 2))]),
        Fixture::new(
            "two_points",
            1,
            vec![iv((-1, 4), (1, 4)), iv((1, 4), (3, 4)), iv((3, 4), (5, 4))],
        ),
        Fixture::new("midpoint", 1, vec![iv((-1, 2), (1, 2)), iv((1, 2), (3, 2))]),
        Fixture::new("origin", 1, vec![iv((0, 1), (2, 1))]),
        Fixture::new("middle_third", 1, vec![iv((-1, 1), (1, 3)), iv((2, 3), (4, 3))]),
        Fixture::new("third_to_half", 1, vec![iv((-1, 3), (1, 3)), iv((1, 2), (3, 2))]),
        Fixture::new("cantor_1", 1, vec![iv((1, 3), (2, 3))]),
        Fixture::new(
            "cantor_2",
            1,
            vec![iv((1, 3), (2, 3)), iv((1, 9), (2, 9)), iv((7, 9), (8, 9))],
        ),
        Fixture::new("three_intervals", 1, vec![iv((1, 8), (1, 4)), iv((1, 2), (3, 4))]),
        Fixture::new("overlapping_gaps", 1, vec![iv((1, 4), (1, 2)), iv((3, 8), (5, 8))]),
        Fixture::new(
            "point_and_interval",
            1,
            vec![iv((-1, 4), (1, 4)), iv((1, 4), (1, 2)), iv((3, 4), (5, 4))],
        ),
        Fixture::new("square", 2, vec![]),
        Fixture::new("two_squares", 2, vec![b2((1, 1), (0, 1), (3, 4)), b2((0, 1), (1, 1), (3, 4))]),
        Fixture::new("annulus", 2, vec![b2((1, 2), (1, 2), (1, 4))]),
        Fixture::new("frame", 2, vec![b2((1, 2), (1, 2), (1, 2))]),
        Fixture::new(
            "edge_notches",
            2,
            vec![
                b2((1, 2), (0, 1), (1, 4)),
                b2((1, 2), (1, 1), (1, 4)),
                b2((0, 1), (1, 2), (1, 4)),
                b2((1, 1), (1, 2), (1, 4)),
            ],
        ),
        Fixture::new(
            "center_point",
            2,
            vec![
                b2((-1, 2), (1, 2), (1, 1)),
                b2((3, 2), (1, 2), (1, 1)),
                b2((1, 2), (-1, 2), (1, 1)),
                b2((1, 2), (3, 2), (1, 1)),
            ],
        ),
        Fixture::new(
            "cantor_stripes",
            2,
            (0..4).map(|j| b2((1, 2), (2 * j + 1, 8), (1, 6))).collect(),
        ),
        Fixture::new("l_shape", 2, vec![b2((1, 1), (1, 1), (1, 2))]),
        Fixture::new("axes", 2, vec![b2((1, 1), (1, 1), (1, 1))]),
        Fixture::new(
            "inner_square",
            2,
            vec![
                b2((-1, 2), (1, 2), (3, 4)),
                b2((3, 2), (1, 2), (3, 4)),
                b2((1, 2), (-1, 2), (3, 4)),
                b2((1, 2), (3, 2), (3, 4)),
            ],
        ),
    ];
    out.sort_by_key(|f| f.dim());
    out
}

/// Connected fixtures for the function constructions.
pub fn connected_corpus() -> Vec<Fixture> {
    let keep = ["middle_third", "midpoint", "third_to_half", "line", "inner_square"];
    corpus().into_iter().filter(|f| keep.contains(&f.name)).collect()
}

pub fn in_open_ball(b: &Ball, x: &[Rat]) -> bool {
    b.center.iter().zip(x).all(|(c, v)| (v - c).abs() < b.radius)
}

pub fn in_residual(balls: &[Ball], x: &[Rat]) -> bool {
    let zero = Rat::zero();
    let one = Rat::from_integer(1.into());
    x.iter().all(|v| v >= &zero && v <= &one) && !balls.iter().any(|b| in_open_ball(b, x))
}

/// Max-norm distance from a point to a closed box.
pub fn box_dist(b: &RatBox, x: &[Rat]) -> Rat {
    let mut d = Rat::zero();
    for i in 0..x.len() {
        let e = if x[i] < b.lo[i] {
            &b.lo[i] - &x[i]
        } else if x[i] > b.hi[i] {
            &x[i] - &b.hi[i]
        } else {
            Rat::zero()
        };
        if e > d {
            d = e;
        }
    }
    d
}

pub fn dist_to_cells(cells: &[RatBox], x: &[Rat]) -> Option<Rat> {
    cells.iter().map(|c| box_dist(c, x)).min()
}

/// Axis breakpoints of all ball faces clipped to `[0,1]`.
fn breakpoints(dim: usize, balls: &[Ball]) -> Vec<Vec<Rat>> {
    let zero = Rat::zero();
    let one = Rat::from_integer(1.into());
    (0..dim)
        .map(|k| {
            let mut v = vec![zero.clone(), one.clone()];
            for b in balls {
                for t in [&b.center[k] - &b.radius, &b.center[k] + &b.radius] {
                    if t > zero && t < one {
                        v.push(t);
                    }
                }
            }
            v.sort();
            v.dedup();
            v
        })
        .collect()
}

/// Open cells of the breakpoint grid (each axis either a breakpoint or an
/// open gap), as closures, restricted to the residual. Membership is
/// constant on each open cell, so their closures tile the residual.
pub fn residual_cells(dim: usize, balls: &[Ball]) -> Vec<RatBox> {
    cell_graph(dim, balls).0
}

/// Cells in the residual plus codimension-one face adjacency between them.
fn cell_graph(dim: usize, balls: &[Ball]) -> (Vec<RatBox>, Vec<(usize, usize)>) {
    let bp = breakpoints(dim, balls);
    // per axis: slots 0..2m-1, even = breakpoint, odd = open gap
    let slots: Vec<usize> = bp.iter().map(|v| 2 * v.len() - 1).collect();
    let mut cells = Vec::new();
    let mut index = std::collections::HashMap::new();
    let mut idx = vec![0usize; dim];
    loop {
        let mut lo = Vec::with_capacity(dim);
        let mut hi = Vec::with_capacity(dim);
        let mut rep = Vec::with_capacity(dim);
        for k in 0..dim {
            let s = idx[k];
            if s % 2 == 0 {
                lo.push(bp[k][s / 2].clone());
                hi.push(bp[k][s / 2].clone());
                rep.push(bp[k][s / 2].clone());
            } else {
                let (a, b) = (&bp[k][s / 2], &bp[k][s / 2 + 1]);
                lo.push(a.clone());
                hi.push(b.clone());
                rep.push((a + b) / Rat::from_integer(2.into()));
            }
        }
        if in_residual(balls, &rep) {
            index.insert(idx.clone(), cells.len());
            cells.push(RatBox { lo, hi });
        }
        let mut k = 0;
        loop {
            if k == dim {
                let mut edges = Vec::new();
                for (key, &i) in &index {
                    for a in 0..dim {
                        if key[a] % 2 == 1 {
                            for nb in [key[a] - 1, key[a] + 1] {
                                let mut other = key.clone();
                                other[a] = nb;
                                if let Some(&j) = index.get(&other) {
                                    edges.push((i, j));
                                }
                            }
                        }
                    }
                }
                return (cells, edges);
            }
            idx[k] += 1;
            if idx[k] < slots[k] {
                break;
            }
            idx[k] = 0;
            k += 1;
        }
    }
}

fn find(p: &mut [usize], mut i: usize) -> usize {
    while p[i] != i {
        p[i] = p[p[i]];
        i = p[i];
    }
    i
}

/// Union-find over items with the given edges; returns the class count.
pub fn count_classes(n: usize, edges: &[(usize, usize)]) -> usize {
    let mut p: Vec<usize> = (0..n).collect();
    for &(a, b) in edges {
        let (ra, rb) = (find(&mut p, a), find(&mut p, b));
        if ra != rb {
            p[ra] = rb;
        }
    }
    (0..n).filter(|&i| find(&mut p, i) == i).count()
}

/// Components of `[0,1]^n` minus the open balls, by union-find on cells.
pub fn component_count(dim: usize, balls: &[Ball]) -> usize {
    let (cells, edges) = cell_graph(dim, balls);
    count_classes(cells.len(), &edges)
}

/// Components of a union of closed boxes (touching boxes are joined).
pub fn box_components(boxes: &[RatBox]) -> usize {
    let mut edges = Vec::new();
    for i in 0..boxes.len() {
        for j in i + 1..boxes.len() {
            let touch = (0..boxes[i].lo.len())
                .all(|k| boxes[i].lo[k] <= boxes[j].hi[k] && boxes[j].lo[k] <= boxes[i].hi[k]);
            if touch {
                edges.push((i, j));
            }
        }
    }
    count_classes(boxes.len(), &edges)
}

/// A random rational in `[a, b]` on a grid of 2^10 steps.
pub fn rand_in(rng: &mut StdRng, a: &Rat, b: &Rat) -> Rat {
    let t = rng.gen_range(0..=1024i64);
    a + (b - a) * r(t, 1024)
}

/// A random point of the residual of a fixture.
pub fn sample_in(rng: &mut StdRng, cells: &[RatBox]) -> Vec<Rat> {
    let c = &cells[rng.gen_range(0..cells.len())];
    (0..c.lo.len()).map(|k| rand_in(rng, &c.lo[k], &c.hi[k])).collect()
}

pub fn sample_cube(rng: &mut StdRng, dim: usize) -> Vec<Rat> {
    let (a, b) = (Rat::zero(), Rat::from_integer(1.into()));
    (0..dim).map(|_| rand_in(rng, &a, &b)).collect()
}

pub fn max_norm(v: &[Rat]) -> Rat {
    v.iter().map(|x| x.abs()).max().unwrap_or_else(Rat::zero)
}

pub fn dist(a: &[Rat], b: &[Rat]) -> Rat {
    let d: Vec<Rat> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    max_norm(&d)
}

pub fn positive(x: &Rat) -> bool {
    x.is_positive()
}
