//! Intervals of the extended real line and edge-anchored regions.

use serde::{Deserialize, Serialize};

/// An interval with independently open or closed ends; ends may be infinite.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
    pub lo_closed: bool,
    pub hi_closed: bool,
}

impl Interval {
    pub fn new(lo: f64, hi: f64, lo_closed: bool, hi_closed: bool) -> Self {
        Self { lo, hi, lo_closed: lo_closed && lo.is_finite(), hi_closed: hi_closed && hi.is_finite() }
    }
    pub fn all() -> Self {
        Self::new(f64::NEG_INFINITY, f64::INFINITY, false, false)
    }
    pub fn open(lo: f64, hi: f64) -> Self {
        Self::new(lo, hi, false, false)
    }
    pub fn closed(lo: f64, hi: f64) -> Self {
        Self::new(lo, hi, true, true)
    }
    /// `(lo, hi]`
    pub fn open_closed(lo: f64, hi: f64) -> Self {
        Self::new(lo, hi, false, true)
    }
    /// `[lo, hi)`
    pub fn closed_open(lo: f64, hi: f64) -> Self {
        Self::new(lo, hi, true, false)
    }
    pub fn positive() -> Self {
        Self::open(0.0, f64::INFINITY)
    }
    pub fn negative() -> Self {
        Self::open(f64::NEG_INFINITY, 0.0)
    }

    pub fn contains(&self, x: f64) -> bool {
        let above = if self.lo_closed { x >= self.lo } else { x > self.lo };
        let below = if self.hi_closed { x <= self.hi } else { x < self.hi };
        above && below
    }

    pub fn is_empty(&self) -> bool {
        self.lo > self.hi || (self.lo == self.hi && !(self.lo_closed && self.hi_closed))
    }

    pub fn intersect(&self, other: &Interval) -> Option<Interval> {
        let (lo, lo_closed) = if self.lo > other.lo {
            (self.lo, self.lo_closed)
        } else if other.lo > self.lo {
            (other.lo, other.lo_closed)
        } else {
            (self.lo, self.lo_closed && other.lo_closed)
        };
        let (hi, hi_closed) = if self.hi < other.hi {
            (self.hi, self.hi_closed)
        } else if other.hi < self.hi {
            (other.hi, other.hi_closed)
        } else {
            (self.hi, self.hi_closed && other.hi_closed)
        };
        let out = Interval { lo, hi, lo_closed, hi_closed };
        (!out.is_empty()).then_some(out)
    }

    /// Image under `x -> -x`.
    pub fn reflect(&self) -> Interval {
        Interval { lo: -self.hi, hi: -self.lo, lo_closed: self.hi_closed, hi_closed: self.lo_closed }
    }
}

/// A set `{origin + dir * s : s in span}` with `dir = ±1`.
///
/// Plain intervals use `origin = 0, dir = 1`. Regions anchored at a support
/// edge keep the edge as origin so that distances to the edge far below
/// `ulp(edge)` stay exact.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Region {
    pub origin: f64,
    pub dir: f64,
    pub span: Interval,
}

/// A one-sided stretch `start + dir * t, t in [0, width]` used for closed-form
/// masses and quadrature over a density part.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Span {
    pub start: f64,
    pub dir: f64,
    pub width: f64,
}

impl Span {
    pub fn point(&self, t: f64) -> f64 {
        self.start + self.dir * t
    }
    pub fn end(&self) -> f64 {
        self.point(self.width)
    }
}

impl From<Interval> for Region {
    fn from(span: Interval) -> Self {
        Region { origin: 0.0, dir: 1.0, span }
    }
}

impl Region {
    pub fn all() -> Self {
        Interval::all().into()
    }

    /// Points at distance `d` from `edge` on side `dir` with `d0 < d <= d1`.
    pub fn edge(edge: f64, dir: f64, d0: f64, d1: f64) -> Self {
        Region { origin: edge, dir, span: Interval::open_closed(d0, d1) }
    }

    pub fn coord(&self, x: f64) -> f64 {
        self.dir * (x - self.origin)
    }

    pub fn contains(&self, x: f64) -> bool {
        self.span.contains(self.coord(x))
    }

    pub fn is_empty(&self) -> bool {
        self.span.is_empty()
    }

    /// An interval in coordinates of this region's frame.
    fn to_frame(self, iv: &Interval) -> Interval {
        let a = self.coord(iv.lo);
        let b = self.coord(iv.hi);
        if self.dir > 0.0 {
            Interval::new(a, b, iv.lo_closed, iv.hi_closed)
        } else {
            Interval::new(b, a, iv.hi_closed, iv.lo_closed)
        }
    }

    /// The x-space interval covered (approximate when the frame is offset).
    pub fn to_interval(&self) -> Interval {
        let a = self.origin + self.dir * self.span.lo;
        let b = self.origin + self.dir * self.span.hi;
        if self.dir > 0.0 {
            Interval::new(a, b, self.span.lo_closed, self.span.hi_closed)
        } else {
            Interval::new(b, a, self.span.hi_closed, self.span.lo_closed)
        }
    }

    pub fn intersect(&self, iv: &Interval) -> Option<Region> {
        let local = self.to_frame(iv);
        self.span.intersect(&local).map(|span| Region { span, ..*self })
    }

    /// Re-expresses this region in another frame.
    pub fn reframe(&self, origin: f64, dir: f64) -> Region {
        if origin == self.origin && dir == self.dir {
            return *self;
        }
        let target = Region { origin, dir, span: Interval::all() };
        let span = target.to_frame(&self.to_interval());
        Region { origin, dir, span }
    }

    /// The portion of this region inside `[lo, hi]`, as a span starting at a
    /// finite end.
    pub fn span_within(&self, lo: f64, hi: f64) -> Option<Span> {
        let (a, b) = {
            let x = self.coord(lo);
            let y = self.coord(hi);
            if x <= y { (x, y) } else { (y, x) }
        };
        let s0 = self.span.lo.max(a);
        let s1 = self.span.hi.min(b);
        if !(s1 > s0) {
            return None;
        }
        if s0.is_finite() {
            Some(Span { start: self.origin + self.dir * s0, dir: self.dir, width: s1 - s0 })
        } else if s1.is_finite() {
            Some(Span { start: self.origin + self.dir * s1, dir: -self.dir, width: f64::INFINITY })
        } else {
            None
        }
    }
}
