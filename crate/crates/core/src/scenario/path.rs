//! Planar polyline curves with arc-length queries and signed projection.

use crate::error::{Error, Result};

/// Projection cutoff for [`Path::project`].
pub const PROJECTION_CUTOFF: f64 = 50.0;

/// Point on a curve with its tangent heading and signed curvature.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CurvePoint {
    pub x: f64,
    pub y: f64,
    pub heading: f64,
    pub curvature: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Projection {
    /// Arc length of the foot point.
    pub s: f64,
    /// Signed offset of the query point, positive to the left of the curve.
    pub lateral: f64,
    pub foot: CurvePoint,
}

/// Piecewise-linear curve. Headings and curvatures are stored per vertex and
/// interpolated linearly in arc length, so both are continuous along the curve.
#[derive(Debug, Clone)]
pub struct Path {
    xs: Vec<f64>,
    ys: Vec<f64>,
    s: Vec<f64>,
    heading: Vec<f64>,
    curvature: Vec<f64>,
    /// `(x0, dx)` when vertices are uniformly spaced in x; speeds up projection.
    x_grid: Option<(f64, f64)>,
}

impl Path {
    /// Builds a path from vertices. Missing headings come from chord
    /// directions; missing curvatures from the circle through each vertex and
    /// its two neighbours.
    pub fn new(
        points: &[[f64; 2]],
        headings: Option<&[f64]>,
        curvatures: Option<&[f64]>,
    ) -> Result<Self> {
        if points.len() < 2 {
            return Err(Error::invalid("points", "a path needs at least two vertices"));
        }
        let n = points.len();
        let xs: Vec<f64> = points.iter().map(|p| p[0]).collect();
        let ys: Vec<f64> = points.iter().map(|p| p[1]).collect();
        let mut s = Vec::with_capacity(n);
        s.push(0.0);
        for i in 1..n {
            let ds = (xs[i] - xs[i - 1]).hypot(ys[i] - ys[i - 1]);
            if ds <= 0.0 {
                return Err(Error::invalid("points", format!("repeated vertex at index {i}")));
            }
            s.push(s[i - 1] + ds);
        }

        let mut heading: Vec<f64> = match headings {
            Some(h) if h.len() == n => h.to_vec(),
            Some(h) => {
                return Err(Error::DimensionMismatch {
                    expected: n,
                    got: h.len(),
                })
            }
            None => {
                let chord = |i: usize, j: usize| (ys[j] - ys[i]).atan2(xs[j] - xs[i]);
                (0..n)
                    .map(|i| {
                        if i == 0 {
                            chord(0, 1)
                        } else if i == n - 1 {
                            chord(n - 2, n - 1)
                        } else {
                            let a = chord(i - 1, i);
                            a + wrap_angle(chord(i, i + 1) - a) / 2.0
                        }
                    })
                    .collect()
            }
        };
        unwrap_in_place(&mut heading);

        let curvature = match curvatures {
            Some(k) if k.len() == n => k.to_vec(),
            Some(k) => {
                return Err(Error::DimensionMismatch {
                    expected: n,
                    got: k.len(),
                })
            }
            None => {
                let mut k = vec![0.0; n];
                for i in 1..n.saturating_sub(1) {
                    k[i] = three_point_curvature(points[i - 1], points[i], points[i + 1]);
                }
                if n >= 3 {
                    k[0] = k[1];
                    k[n - 1] = k[n - 2];
                }
                k
            }
        };

        Ok(Self {
            xs,
            ys,
            s,
            heading,
            curvature,
            x_grid: None,
        })
    }

    /// Samples `y = f(x)` on a uniform x grid with analytic slope `df` and
    /// second derivative `d2f`.
    pub fn from_graph(
        x_start: f64,
        x_end: f64,
        dx: f64,
        f: impl Fn(f64) -> f64,
        df: impl Fn(f64) -> f64,
        d2f: impl Fn(f64) -> f64,
    ) -> Result<Self> {
        if !(dx > 0.0 && x_end > x_start) {
            return Err(Error::invalid("dx", "graph sampling needs dx > 0 and x_end > x_start"));
        }
        let n = ((x_end - x_start) / dx).ceil() as usize + 1;
        let mut pts = Vec::with_capacity(n);
        let mut hs = Vec::with_capacity(n);
        let mut ks = Vec::with_capacity(n);
        for i in 0..n {
            let x = x_start + i as f64 * dx;
            let (d1, d2) = (df(x), d2f(x));
            pts.push([x, f(x)]);
            hs.push(d1.atan());
            ks.push(d2 / (1.0 + d1 * d1).powf(1.5));
        }
        let mut path = Self::new(&pts, Some(&hs), Some(&ks))?;
        path.x_grid = Some((x_start, dx));
        Ok(path)
    }

    pub fn len(&self) -> f64 {
        *self.s.last().unwrap()
    }

    pub fn is_empty(&self) -> bool {
        self.s.len() < 2
    }

    pub fn vertex_count(&self) -> usize {
        self.s.len()
    }

    fn segment_at(&self, s: f64) -> usize {
        let n = self.s.len();
        match self.s.binary_search_by(|v| v.total_cmp(&s)) {
            Ok(i) => i.min(n - 2),
            Err(0) => 0,
            Err(i) => (i - 1).min(n - 2),
        }
    }

    /// Point at arc length `s`. Beyond either end the curve continues as a
    /// straight line along the end tangent.
    pub fn point_at(&self, s: f64) -> CurvePoint {
        let n = self.s.len();
        if s <= 0.0 {
            let (sin_h, cos_h) = self.heading[0].sin_cos();
            return CurvePoint {
                x: self.xs[0] + s * cos_h,
                y: self.ys[0] + s * sin_h,
                heading: self.heading[0],
                curvature: if s == 0.0 { self.curvature[0] } else { 0.0 },
            };
        }
        let end = self.len();
        if s >= end {
            let (sin_h, cos_h) = self.heading[n - 1].sin_cos();
            let over = s - end;
            return CurvePoint {
                x: self.xs[n - 1] + over * cos_h,
                y: self.ys[n - 1] + over * sin_h,
                heading: self.heading[n - 1],
                curvature: if over == 0.0 { self.curvature[n - 1] } else { 0.0 },
            };
        }
        let i = self.segment_at(s);
        let t = (s - self.s[i]) / (self.s[i + 1] - self.s[i]);
        CurvePoint {
            x: lerp(self.xs[i], self.xs[i + 1], t),
            y: lerp(self.ys[i], self.ys[i + 1], t),
            heading: lerp(self.heading[i], self.heading[i + 1], t),
            curvature: lerp(self.curvature[i], self.curvature[i + 1], t),
        }
    }

    /// Unit left normal of the chord containing arc length `s`.
    pub fn normal_at(&self, s: f64) -> [f64; 2] {
        let n = self.s.len();
        let (dx, dy) = if s <= 0.0 {
            let (sh, ch) = self.heading[0].sin_cos();
            (ch, sh)
        } else if s >= self.len() {
            let (sh, ch) = self.heading[n - 1].sin_cos();
            (ch, sh)
        } else {
            let i = self.segment_at(s);
            let l = self.s[i + 1] - self.s[i];
            ((self.xs[i + 1] - self.xs[i]) / l, (self.ys[i + 1] - self.ys[i]) / l)
        };
        [-dy, dx]
    }

    /// Nearest point on the curve (including the straight extensions past
    /// either end) to `(px, py)`.
    pub fn project(&self, px: f64, py: f64) -> Result<Projection> {
        let n = self.s.len();
        let (lo, hi) = match self.x_grid {
            Some((x0, dx)) => {
                let guess = ((px - x0) / dx).floor();
                let window = (2.0 * PROJECTION_CUTOFF / dx).ceil() as isize;
                let g = guess as isize;
                let lo = (g - window).clamp(0, n as isize - 2) as usize;
                let hi = (g + window).clamp(0, n as isize - 2) as usize;
                (lo, hi)
            }
            None => (0, n - 2),
        };

        let mut best = (f64::INFINITY, 0.0, 0usize);
        for i in lo..=hi {
            let (ax, ay) = (self.xs[i], self.ys[i]);
            let (ex, ey) = (self.xs[i + 1] - ax, self.ys[i + 1] - ay);
            let len2 = ex * ex + ey * ey;
            let mut t = ((px - ax) * ex + (py - ay) * ey) / len2;
            if i > 0 || t > 0.0 {
                t = t.max(0.0);
            }
            if i < n - 2 || t < 1.0 {
                t = t.min(1.0);
            }
            let (fx, fy) = (ax + t * ex, ay + t * ey);
            let d2 = (px - fx).powi(2) + (py - fy).powi(2);
            if d2 < best.0 {
                best = (d2, t, i);
            }
        }
        let (d2, t, i) = best;
        let distance = d2.sqrt();
        if !distance.is_finite() || distance > PROJECTION_CUTOFF {
            return Err(Error::ProjectionFailed {
                distance,
                cutoff: PROJECTION_CUTOFF,
            });
        }
        let s = self.s[i] + t * (self.s[i + 1] - self.s[i]);
        let foot = self.point_at(s);
        let [nx, ny] = self.normal_at(s);
        let lateral = (px - foot.x) * nx + (py - foot.y) * ny;
        Ok(Projection { s, lateral, foot })
    }
}

fn lerp(a: f64, b: f64, t: f64) -> f64 {
    a + (b - a) * t
}

/// Wraps an angle into (-pi, pi].
pub fn wrap_angle(a: f64) -> f64 {
    use std::f64::consts::{PI, TAU};
    let mut w = a.rem_euclid(TAU);
    if w > PI {
        w -= TAU;
    }
    w
}

fn unwrap_in_place(h: &mut [f64]) {
    for i in 1..h.len() {
        h[i] = h[i - 1] + wrap_angle(h[i] - h[i - 1]);
    }
}

/// Signed curvature of the circle through three points (positive turning left).
pub fn three_point_curvature(p0: [f64; 2], p1: [f64; 2], p2: [f64; 2]) -> f64 {
    let (ax, ay) = (p1[0] - p0[0], p1[1] - p0[1]);
    let (bx, by) = (p2[0] - p1[0], p2[1] - p1[1]);
    let (cx, cy) = (p2[0] - p0[0], p2[1] - p0[1]);
    let denom = ax.hypot(ay) * bx.hypot(by) * cx.hypot(cy);
    if denom == 0.0 {
        return 0.0;
    }
    2.0 * (ax * by - ay * bx) / denom
}
