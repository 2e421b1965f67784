mod common;

use std::sync::Arc;

use common::*;
use num_traits::{Signed, Zero};
use proptest::prelude::*;
use ratcomplex::coded_sets::*;
use ratcomplex::constructions::*;
use ratcomplex::fixed_point::*;
use ratcomplex::geometry::{compactly_included, BoxSet, Complex, RatBox};
use ratcomplex::points::ExactPoint;
use ratcomplex::Rat;

/// Grid boxes with coordinates in 1/8, given as (lo, width) numerators.
fn box8(n: usize) -> impl Strategy<Value = RatBox> {
    prop::collection::vec((0i64..8, 1i64..=8), n).prop_map(|v| {
        let lo = v.iter().map(|(a, _)| r(*a, 8)).collect();
        let hi = v.iter().map(|(a, w)| r((a + w).min(8), 8)).collect();
        RatBox::new(lo, hi).unwrap()
    })
}

fn interior(b: &RatBox, x: &[Rat]) -> bool {
    x.iter().enumerate().all(|(i, v)| &b.lo[i] < v && v < &b.hi[i])
}

/// Disjoint open intervals with endpoints on the 1/8 grid, as balls.
fn dyadic_gaps() -> impl Strategy<Value = Vec<Ball>> {
    prop::collection::btree_set(-1i64..=9, 2..7).prop_map(|cuts| {
        let cuts: Vec<i64> = cuts.into_iter().collect();
        cuts.chunks(2)
            .filter(|c| c.len() == 2)
            .map(|c| ball(&[r(c[0] + c[1], 16)], r(c[1] - c[0], 16)))
            .collect()
    })
}

fn in_a(balls: &[Ball], t: &Rat) -> bool {
    !t.is_negative() && t <= &int(1) && in_residual(balls, std::slice::from_ref(t))
}

/// `T(A)` membership straight from the definition.
fn in_t(balls: &[Ball], x: &[Rat]) -> bool {
    let a = |t: &Rat| in_a(balls, t);
    (a(&x[0]) && x[2].is_zero()) || (a(&x[0]) && a(&x[1])) || (a(&x[1]) && x[2] == int(1))
}

/// Whether some positive multiple of `d` lies in `k`.
fn ray_meets(d: &[Rat], k: &RatBox) -> bool {
    let mut lo: Option<Rat> = None;
    let mut hi: Option<Rat> = None;
    for i in 0..d.len() {
        if d[i].is_zero() {
            if k.lo[i].is_positive() || k.hi[i].is_negative() {
                return false;
            }
            continue;
        }
        let (a, b) = (&k.lo[i] / &d[i], &k.hi[i] / &d[i]);
        let (a, b) = if a < b { (a, b) } else { (b, a) };
        lo = Some(lo.map_or(a.clone(), |l| l.max(a)));
        hi = Some(hi.map_or(b.clone(), |h| h.min(b)));
    }
    match (lo, hi) {
        (Some(l), Some(h)) => h.is_positive() && l <= h,
        _ => true,
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn constant_map_index_is_membership(b in box8(2), c in prop::collection::vec(0i64..=16, 2)) {
        let c: Vec<Rat> = c.iter().map(|&v| r(v, 16)).collect();
        let f = Constant { value: c.clone() };
        let got = index_2d(&f, &Complex::from_box(b.clone()), &Budget::default());
        if interior(&b, &c) {
            prop_assert_eq!(got.unwrap().value, 1);
        } else if b.contains(&c) {
            let boundary = matches!(got, Err(ratcomplex::Error::BoundaryFixedPoint { .. }));
            prop_assert!(boundary);
        } else {
            prop_assert_eq!(got.unwrap().value, 0);
        }
    }

    #[test]
    fn constant_map_index_on_the_line(lo in 0i64..16, w in 1i64..16, c in 0i64..=16) {
        let (a, b) = (r(lo, 16), r((lo + w).min(16), 16));
        let c = r(c, 16);
        let f = Constant { value: vec![c.clone()] };
        let got = index_1d(&f, &a, &b, &Budget::default());
        if a < c && c < b {
            prop_assert_eq!(got.unwrap().value, 1);
        } else if a == c || c == b {
            prop_assert!(got.is_err());
        } else {
            prop_assert_eq!(got.unwrap().value, 0);
        }
    }

    #[test]
    fn index_adds_over_disjoint_boxes(
        cells in prop::collection::btree_set((0i64..4, 0i64..4), 1..6),
        m in prop::collection::vec(prop::collection::vec(-3i64..=3, 2), 2),
        off in prop::collection::vec(1i64..16, 2),
    ) {
        // affine maps x -> Mx/4 + offset, centered on odd 1/17 offsets
        // so no fixed point lands on the 1/4 grid lines
        let f = Affine::new(
            m.iter().map(|row| row.iter().map(|&v| r(v, 4)).collect()).collect(),
            off.iter().map(|&v| r(v, 17)).collect(),
        ).unwrap();
        let boxes: Vec<RatBox> = cells
            .iter()
            .map(|&(i, j)| RatBox::new(vec![r(i, 4), r(j, 4)], vec![r(i + 1, 4), r(j + 1, 4)]).unwrap())
            .collect();
        let b = Budget::default();
        let parts: Result<Vec<i64>, _> = boxes
            .iter()
            .map(|x| index_2d(&f, &Complex::from_box(x.clone()), &b).map(|v| v.value))
            .collect();
        let Ok(parts) = parts else { return Ok(()); };
        let whole = index_of_set(&f, &BoxSet::from_boxes(2, boxes).unwrap(), &b).unwrap();
        prop_assert_eq!(whole.value, parts.iter().sum::<i64>());
    }

    #[test]
    fn descent_chain_nests_with_nonzero_indices(c in prop::collection::vec(1i64..32, 2)) {
        let c: Vec<Rat> = c.iter().map(|&v| r(2 * v - 1, 65)).collect();
        let f = Arc::new(Constant { value: c.clone() });
        let d = descend_fix_component(f, 6, &Budget::default()).unwrap();
        prop_assert!(d.indices.iter().all(|&i| i != 0));
        for w in d.path.labels.windows(2) {
            let (ok, gap) = compactly_included(w[1].set(), w[0].set()).unwrap();
            prop_assert!(ok && gap.is_positive());
        }
        prop_assert!(d.path.last().set().contains(&c));
    }

    #[test]
    fn ariadne_cone_contains_sampled_directions(b in box8(2), pts in prop::collection::vec(prop::collection::vec(0i64..=64, 2), 8)) {
        let f = ariadne_square();
        let b = RatBox::new(b.lo.clone(), b.lo.iter().zip(&b.hi).map(|(l, h)| (l + h) / int(2)).collect()).unwrap();
        if let Some(k) = f.displacement_cone(&b) {
            prop_assert!(!k.contains(&vec![Rat::zero(); 2]));
            let k = k.expand(&p2(-20));
            for p in &pts {
                let x: Vec<Rat> = b.lo.iter().zip(&b.hi).zip(p).map(|((l, h), &t)| l + (h - l) * r(t, 64)).collect();
                let a = f.eval(&x, &p2(-30)).unwrap();
                let d: Vec<Rat> = a.value.iter().zip(&x).map(|(u, v)| u - v).collect();
                if max_norm(&d) < p2(-10) {
                    continue;
                }
                prop_assert!(ray_meets(&d, &k), "direction {:?} outside the cone", d);
            }
        }
    }

    #[test]
    fn ariadne_evaluations_are_consistent(
        x in prop::collection::vec(0i64..=128, 2),
        e1 in 2i32..20,
        e2 in 2i32..20,
    ) {
        let f = ariadne_square();
        let x: Vec<Rat> = x.iter().map(|&v| r(v, 128)).collect();
        let a = f.eval(&x, &p2(-e1)).unwrap();
        let b = f.eval(&x, &p2(-e2)).unwrap();
        prop_assert!(a.error <= p2(-e1) && b.error <= p2(-e2));
        prop_assert!(dist(&a.value, &b.value) <= &a.error + &b.error);
        prop_assert!(a.value.iter().all(|v| !v.is_negative() && v <= &int(1)));
    }
}

fn ariadne_square() -> AriadneFunction {
    let q = |x: i64, y: i64| ball(&[r(x, 2), r(y, 2)], r(3, 4));
    let s = NegInfoSet::exhausted(2, Ambient::Unit, vec![q(-1, 1), q(3, 1), q(1, -1), q(1, 3)]).unwrap();
    function_from_connected(&s, DEFAULT_FUEL).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn cantor_round_trip(prefix in prop::collection::vec(any::<bool>(), 1..24), count in 1usize..48) {
        let p = prefix.clone();
        let x = cantor_embed(move |i| p[i % p.len()]);
        let got = cantor_extract(&x, count).unwrap();
        let want: Vec<bool> = (0..count).map(|i| prefix[i % prefix.len()]).collect();
        prop_assert_eq!(got, want);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn decoded_bits_respect_every_constraint(
        n in 1usize..=5,
        raw in prop::collection::vec((0usize..5, 0u8..2), 0..8),
        ts in prop::collection::vec(0i64..=16, 10),
    ) {
        let mut forbid: Vec<Option<u8>> = vec![None; n];
        let mut cs = Vec::new();
        for (s, v) in raw {
            let s = s % n;
            if forbid[s].is_none_or(|f| f == v) {
                forbid[s] = Some(v);
                cs.push(Constraint { slot: s + 1, forbid: v });
            }
        }
        let e = encode_binary_product(n, &cs).unwrap();
        let (a, b) = e.interval();
        let set = e.set();
        for t in &ts {
            let x = a + (b - a) * r(*t, 16);
            prop_assert!(in_residual(set.balls(), std::slice::from_ref(&x)));
            let bits = decode_binary_product(n, &ExactPoint(vec![x])).unwrap();
            for c in &cs {
                prop_assert_ne!(bits[c.slot - 1], c.forbid);
            }
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn twisted_balls_miss_the_twisted_set(gaps in dyadic_gaps(), pts in prop::collection::vec(prop::collection::vec(-64i64..=64, 3), 64)) {
        let s = NegInfoSet::exhausted(1, Ambient::Unit, gaps.clone()).unwrap();
        let stages = twisted_stages(&s, 3).unwrap();
        for (k, b) in stages.iter().flatten().enumerate() {
            // 64 lattice points of step radius/64 inside the open ball
            let p = &pts[k % pts.len()];
            let x: Vec<Rat> = b.center.iter().zip(p).map(|(c, &t)| c + &b.radius * r(t, 65)).collect();
            prop_assert!(!in_t(&gaps, &x), "ball {:?} meets T(A) at {:?}", b, x);
        }
    }

    #[test]
    fn mixed_residual_points_stay_near_a_in_all_but_one_axis(
        gaps in dyadic_gaps(),
        n in 2usize..=3,
        pts in prop::collection::vec(prop::collection::vec(0i64..=32, 3), 200),
    ) {
        let s = NegInfoSet::exhausted(1, Ambient::Unit, gaps.clone()).unwrap();
        // a grid cell counts as covered once its closed interval lies in a
        // gap, so stage k leaves a sliver of width 2^(1-k) along A
        let stages = 4;
        let tol = p2(1 - stages);
        let cells = residual_cells(1, &gaps);
        let balls: Vec<Ball> = generalized_mixed_stages(&s, n, stages as usize).unwrap().into_iter().flatten().collect();
        for p in &pts {
            let x: Vec<Rat> = p[..n].iter().map(|&t| r(t, 32)).collect();
            if !in_residual(&balls, &x) {
                continue;
            }
            let near = x
                .iter()
                .filter(|t| dist_to_cells(&cells, std::slice::from_ref(*t)).is_some_and(|d| d <= tol))
                .count();
            prop_assert!(near + 1 >= n, "{:?} has {} coordinates near A", x, near);
        }
    }
}
