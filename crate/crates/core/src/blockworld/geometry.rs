//! Planar geometry on rotated rectangles.

use std::f64::consts::PI;

/// Normalizes an angle into `[0, π)`.
pub fn normalize_theta(theta: f64) -> f64 {
    let t = theta.rem_euclid(PI);
    // rem_euclid can round up to exactly PI for tiny negative inputs
    if t >= PI {
        0.0
    } else {
        t
    }
}

/// Smallest absolute angular difference between two axes that repeat every `period`.
pub fn axis_difference(a: f64, b: f64, period: f64) -> f64 {
    let d = (a - b).rem_euclid(period);
    d.min(period - d)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }
}

/// A rectangle of extents `w` (along its local x axis) by `l`, rotated by `theta` about its center.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Rect {
    pub cx: f64,
    pub cy: f64,
    pub w: f64,
    pub l: f64,
    pub theta: f64,
}

impl Rect {
    pub fn new(cx: f64, cy: f64, w: f64, l: f64, theta: f64) -> Self {
        Self { cx, cy, w, l, theta }
    }

    pub fn area(&self) -> f64 {
        self.w * self.l
    }

    pub fn center(&self) -> Point {
        Point::new(self.cx, self.cy)
    }

    pub fn half_diagonal(&self) -> f64 {
        0.5 * self.w.hypot(self.l)
    }

    /// Coordinates of `p` in the rectangle frame (u along the local x axis).
    pub fn to_local(&self, p: Point) -> (f64, f64) {
        let (s, c) = self.theta.sin_cos();
        let dx = p.x - self.cx;
        let dy = p.y - self.cy;
        (c * dx + s * dy, -s * dx + c * dy)
    }

    pub fn to_world(&self, u: f64, v: f64) -> Point {
        let (s, c) = self.theta.sin_cos();
        Point::new(self.cx + c * u - s * v, self.cy + s * u + c * v)
    }

    pub fn contains(&self, p: Point) -> bool {
        let (u, v) = self.to_local(p);
        u.abs() <= 0.5 * self.w && v.abs() <= 0.5 * self.l
    }

    /// Counter-clockwise corners.
    pub fn corners(&self) -> [Point; 4] {
        let hw = 0.5 * self.w;
        let hl = 0.5 * self.l;
        [
            self.to_world(-hw, -hl),
            self.to_world(hw, -hl),
            self.to_world(hw, hl),
            self.to_world(-hw, hl),
        ]
    }

    /// True if every corner of `self` lies within `outer`, up to `tol` in the outer frame.
    pub fn inside(&self, outer: &Rect, tol: f64) -> bool {
        self.corners().iter().all(|&p| {
            let (u, v) = outer.to_local(p);
            u.abs() <= 0.5 * outer.w + tol && v.abs() <= 0.5 * outer.l + tol
        })
    }

    pub fn shrunk(&self, margin: f64) -> Rect {
        Rect { w: (self.w - 2.0 * margin).max(0.0), l: (self.l - 2.0 * margin).max(0.0), ..*self }
    }

    pub fn grown(&self, margin: f64) -> Rect {
        Rect { w: self.w + 2.0 * margin, l: self.l + 2.0 * margin, ..*self }
    }
}

/// Clips a convex polygon against a convex CCW clip polygon (Sutherland-Hodgman).
fn clip_convex(subject: &[Point], clip: &[Point]) -> Vec<Point> {
    let mut output = subject.to_vec();
    for k in 0..clip.len() {
        if output.is_empty() {
            break;
        }
        let a = clip[k];
        let b = clip[(k + 1) % clip.len()];
        let side = |p: Point| (b.x - a.x) * (p.y - a.y) - (b.y - a.y) * (p.x - a.x);
        let input = std::mem::take(&mut output);
        for i in 0..input.len() {
            let cur = input[i];
            let prev = input[(i + input.len() - 1) % input.len()];
            let sc = side(cur);
            let sp = side(prev);
            if sc >= 0.0 {
                if sp < 0.0 {
                    output.push(intersect(prev, cur, sp, sc));
                }
                output.push(cur);
            } else if sp >= 0.0 {
                output.push(intersect(prev, cur, sp, sc));
            }
        }
    }
    output
}

fn intersect(p: Point, q: Point, sp: f64, sq: f64) -> Point {
    let t = sp / (sp - sq);
    Point::new(p.x + t * (q.x - p.x), p.y + t * (q.y - p.y))
}

/// Signed area and area-weighted centroid of a simple polygon.
fn area_centroid(poly: &[Point]) -> (f64, Point) {
    if poly.len() < 3 {
        return (0.0, Point::new(0.0, 0.0));
    }
    let mut a = 0.0;
    let mut cx = 0.0;
    let mut cy = 0.0;
    for i in 0..poly.len() {
        let p = poly[i];
        let q = poly[(i + 1) % poly.len()];
        let cross = p.x * q.y - q.x * p.y;
        a += cross;
        cx += (p.x + q.x) * cross;
        cy += (p.y + q.y) * cross;
    }
    a *= 0.5;
    if a.abs() < 1e-18 {
        return (0.0, Point::new(0.0, 0.0));
    }
    (a, Point::new(cx / (6.0 * a), cy / (6.0 * a)))
}

/// Intersection of two rectangles as (area, centroid). The centroid is meaningless when the area is zero.
pub fn overlap(a: &Rect, b: &Rect) -> (f64, Point) {
    let dx = a.cx - b.cx;
    let dy = a.cy - b.cy;
    let reach = a.half_diagonal() + b.half_diagonal();
    if dx * dx + dy * dy > reach * reach {
        return (0.0, a.center());
    }
    let poly = clip_convex(&a.corners(), &b.corners());
    let (area, c) = area_centroid(&poly);
    (area.abs(), c)
}

pub fn overlap_area(a: &Rect, b: &Rect) -> f64 {
    overlap(a, b).0
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn aabb_overlap(a: &Rect, b: &Rect) -> f64 {
        let ox = ((a.cx + a.w / 2.0).min(b.cx + b.w / 2.0) - (a.cx - a.w / 2.0).max(b.cx - b.w / 2.0)).max(0.0);
        let oy = ((a.cy + a.l / 2.0).min(b.cy + b.l / 2.0) - (a.cy - a.l / 2.0).max(b.cy - b.l / 2.0)).max(0.0);
        ox * oy
    }

    #[test]
    fn normalize_wraps_into_half_turn() {
        assert_eq!(normalize_theta(0.0), 0.0);
        assert!((normalize_theta(PI + 0.25) - 0.25).abs() < 1e-12);
        assert!((normalize_theta(-0.25) - (PI - 0.25)).abs() < 1e-12);
        assert!(normalize_theta(-1e-300) < PI);
    }

    #[test]
    fn axis_difference_respects_period() {
        assert!(axis_difference(0.1, PI - 0.1, PI) - 0.2 < 1e-12);
        assert!(axis_difference(0.0, PI / 2.0, PI / 2.0) < 1e-12);
    }

    #[test]
    fn rotated_square_overlap_is_octagon() {
        let a = Rect::new(0.0, 0.0, 1.0, 1.0, 0.0);
        let b = Rect::new(0.0, 0.0, 1.0, 1.0, PI / 4.0);
        // regular octagon inscribed between the two squares
        let expected = 2.0 * (2.0f64.sqrt() - 1.0);
        assert!((overlap_area(&a, &b) - expected).abs() < 1e-12);
    }

    #[test]
    fn disjoint_rects_have_zero_overlap() {
        let a = Rect::new(0.0, 0.0, 0.03, 0.03, 0.3);
        let b = Rect::new(0.1, 0.0, 0.03, 0.03, 1.0);
        assert_eq!(overlap_area(&a, &b), 0.0);
    }

    proptest! {
        #[test]
        fn axis_aligned_overlap_matches_closed_form(
            ax in -1.0f64..1.0, ay in -1.0f64..1.0, aw in 0.01f64..1.0, al in 0.01f64..1.0,
            bx in -1.0f64..1.0, by in -1.0f64..1.0, bw in 0.01f64..1.0, bl in 0.01f64..1.0,
        ) {
            let a = Rect::new(ax, ay, aw, al, 0.0);
            let b = Rect::new(bx, by, bw, bl, 0.0);
            prop_assert!((overlap_area(&a, &b) - aabb_overlap(&a, &b)).abs() < 1e-9);
        }

        #[test]
        fn overlap_is_symmetric_and_bounded(
            ax in -0.2f64..0.2, ay in -0.2f64..0.2, at in 0.0f64..std::f64::consts::PI,
            bx in -0.2f64..0.2, by in -0.2f64..0.2, bt in 0.0f64..std::f64::consts::PI,
        ) {
            let a = Rect::new(ax, ay, 0.09, 0.03, at);
            let b = Rect::new(bx, by, 0.05, 0.05, bt);
            let ab = overlap_area(&a, &b);
            let ba = overlap_area(&b, &a);
            prop_assert!((ab - ba).abs() < 1e-12);
            prop_assert!(ab <= a.area().min(b.area()) + 1e-12);
            prop_assert!(ab >= 0.0);
        }
    }
}
