//! Triangle quadrature with optional adaptive subdivision.

use std::ops::{AddAssign, Mul};

use crate::geometry::Point;

/// Symmetric rule on the reference triangle, in barycentric coordinates.
/// Weights sum to one.
#[derive(Clone, Copy, Debug)]
pub struct TriRule {
    pub points: &'static [[f64; 3]],
    pub weights: &'static [f64],
}

/// Degree-2 rule with interior points.
pub const RULE3: TriRule = TriRule {
    points: &[
        [2.0 / 3.0, 1.0 / 6.0, 1.0 / 6.0],
        [1.0 / 6.0, 2.0 / 3.0, 1.0 / 6.0],
        [1.0 / 6.0, 1.0 / 6.0, 2.0 / 3.0],
    ],
    weights: &[1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0],
};

const A1: f64 = 0.059_715_871_789_769_82;
const B1: f64 = 0.470_142_064_105_115_1;
const A2: f64 = 0.797_426_985_353_087_3;
const B2: f64 = 0.101_286_507_323_456_3;
const W1: f64 = 0.132_394_152_788_506_2;
const W2: f64 = 0.125_939_180_544_827_1;

/// Degree-5 seven-point rule.
pub const RULE7: TriRule = TriRule {
    points: &[
        [1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0],
        [A1, B1, B1],
        [B1, A1, B1],
        [B1, B1, A1],
        [A2, B2, B2],
        [B2, A2, B2],
        [B2, B2, A2],
    ],
    weights: &[0.225, W1, W1, W1, W2, W2, W2],
};

pub type Triangle = [Point; 3];

pub fn triangle_area(t: &Triangle) -> f64 {
    0.5 * ((t[1] - t[0]).perp(&(t[2] - t[0]))).abs()
}

pub fn triangle_diameter(t: &Triangle) -> f64 {
    (t[1] - t[0]).norm().max((t[2] - t[1]).norm()).max((t[0] - t[2]).norm())
}

pub fn barycentric_point(t: &Triangle, l: &[f64; 3]) -> Point {
    Point::from(t[0].coords * l[0] + t[1].coords * l[1] + t[2].coords * l[2])
}

/// Barycentric coordinates of `p` with respect to `t`.
pub fn barycentric_coords(t: &Triangle, p: &Point) -> [f64; 3] {
    let d = (t[1] - t[0]).perp(&(t[2] - t[0]));
    let l1 = (p - t[0]).perp(&(t[2] - t[0])) / d;
    let l2 = (t[1] - t[0]).perp(&(p - t[0])) / d;
    [1.0 - l1 - l2, l1, l2]
}

pub fn triangle_contains(t: &Triangle, p: &Point, tol: f64) -> bool {
    barycentric_coords(t, p).iter().all(|&l| l >= -tol)
}

/// Distance from `p` to the closed triangle.
pub fn triangle_distance(t: &Triangle, p: &Point) -> f64 {
    if triangle_contains(t, p, 0.0) {
        return 0.0;
    }
    (0..3)
        .map(|i| crate::geometry::segment_distance(p, &t[i], &t[(i + 1) % 3]))
        .fold(f64::INFINITY, f64::min)
}

pub fn integrate<T, F>(t: &Triangle, rule: &TriRule, mut f: F) -> T
where
    T: Default + AddAssign + Mul<f64, Output = T>,
    F: FnMut(Point, &[f64; 3]) -> T,
{
    let area = triangle_area(t);
    let mut acc = T::default();
    for (l, &w) in rule.points.iter().zip(rule.weights) {
        acc += f(barycentric_point(t, l), l) * (w * area);
    }
    acc
}

/// Midpoint subdivision into four congruent children.
pub fn subdivide(t: &Triangle) -> [Triangle; 4] {
    let m01 = nalgebra::center(&t[0], &t[1]);
    let m12 = nalgebra::center(&t[1], &t[2]);
    let m20 = nalgebra::center(&t[2], &t[0]);
    [[t[0], m01, m20], [m01, t[1], m12], [m20, m12, t[2]], [m01, m12, m20]]
}

/// Recursive quadrature: a leaf is split while `split(leaf, depth)` holds and
/// `depth < max_depth`; leaves for which `skip` holds contribute nothing.
pub fn integrate_adaptive<T, F, S, K>(
    t: &Triangle,
    rule: &TriRule,
    max_depth: usize,
    split: &S,
    skip: &K,
    f: &mut F,
) -> T
where
    T: Default + AddAssign + Mul<f64, Output = T>,
    F: FnMut(Point) -> T,
    S: Fn(&Triangle, usize) -> bool,
    K: Fn(&Triangle) -> bool,
{
    fn rec<T, F, S, K>(t: &Triangle, rule: &TriRule, depth: usize, max: usize, split: &S, skip: &K, f: &mut F, acc: &mut T)
    where
        T: Default + AddAssign + Mul<f64, Output = T>,
        F: FnMut(Point) -> T,
        S: Fn(&Triangle, usize) -> bool,
        K: Fn(&Triangle) -> bool,
    {
        if depth < max && split(t, depth) {
            for c in subdivide(t) {
                rec(&c, rule, depth + 1, max, split, skip, f, acc);
            }
        } else if !skip(t) {
            *acc += integrate(t, rule, |p, _| f(p));
        }
    }
    let mut acc = T::default();
    rec(t, rule, 0, max_depth, split, skip, f, &mut acc);
    acc
}

/// Splitting criterion for integrands singular at `y`: refine while the
/// leaf is large compared with its distance to `y`.
pub fn near_singularity(y: Point, ratio: f64) -> impl Fn(&Triangle, usize) -> bool {
    move |t, _| triangle_diameter(t) > ratio * triangle_distance(t, &y)
}

/// True when the circle `|x - c| = r` passes through the triangle.
pub fn crosses_circle(t: &Triangle, c: &Point, r: f64) -> bool {
    let dmin = triangle_distance(t, c);
    let dmax = t.iter().map(|v| (v - c).norm()).fold(0.0, f64::max);
    dmin < r && dmax > r
}
