use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::SymMat;

/// Discrete replica-symmetry-breaking scheme: x_0..x_{r-1} and Q_1..Q_r.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DiscreteOrderParam {
    pub x: Vec<f64>,
    #[serde(rename = "Qs")]
    pub qs: Vec<SymMat>,
}

const INC_TOL: f64 = 1e-10;

impl DiscreteOrderParam {
    pub fn new(x: Vec<f64>, qs: Vec<SymMat>) -> Result<Self> {
        let p = DiscreteOrderParam { x, qs };
        p.validate()?;
        Ok(p)
    }

    pub fn r(&self) -> usize {
        self.qs.len()
    }

    pub fn dim(&self) -> usize {
        self.qs[0].dim()
    }

    /// Q_k with Q_0 = 0.
    pub fn q(&self, k: usize) -> SymMat {
        if k == 0 {
            SymMat::zeros(self.dim())
        } else {
            self.qs[k - 1].clone()
        }
    }

    pub fn target(&self) -> &SymMat {
        self.qs.last().expect("at least one level")
    }

    pub fn validate(&self) -> Result<()> {
        let r = self.qs.len();
        if r == 0 {
            return Err(Error::InvalidInput("order parameter needs at least one level".into()));
        }
        if self.x.len() != r {
            return Err(Error::DimensionMismatch { expected: r, found: self.x.len() });
        }
        let m = self.qs[0].dim();
        for q in &self.qs {
            if q.dim() != m {
                return Err(Error::DimensionMismatch { expected: m, found: q.dim() });
            }
        }
        if self.x[0] != 0.0 {
            return Err(Error::MonotonicityViolation(format!("x_0 = {} must be 0", self.x[0])));
        }
        for k in 1..r {
            if !(self.x[k] >= self.x[k - 1]) || self.x[k] > 1.0 {
                return Err(Error::MonotonicityViolation(format!(
                    "x must be nondecreasing in [0,1]; x_{} = {}, x_{} = {}",
                    k - 1,
                    self.x[k - 1],
                    k,
                    self.x[k]
                )));
            }
        }
        for k in 0..r {
            let inc = &self.q(k + 1) - &self.q(k);
            let me = inc.min_eig();
            if me < -INC_TOL {
                return Err(Error::MonotonicityViolation(format!(
                    "Q_{} - Q_{} has eigenvalue {me}",
                    k + 1,
                    k
                )));
            }
        }
        Ok(())
    }

    /// Drops breakpoints Q_k with x_k − x_{k−1} ≤ tol. Both functionals are
    /// unchanged, but such a Q_k is not determined by stationarity.
    pub fn merged(&self, tol: f64) -> DiscreteOrderParam {
        let mut x = vec![self.x[0]];
        let mut qs = Vec::with_capacity(self.r());
        for k in 1..self.r() {
            if self.x[k] - x[x.len() - 1] > tol {
                x.push(self.x[k]);
                qs.push(self.qs[k - 1].clone());
            }
        }
        qs.push(self.target().clone());
        DiscreteOrderParam { x, qs }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Interp {
    /// Right-continuous step function through the knots.
    Step,
    /// Piecewise linear; a repeated t marks a jump.
    Linear,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MeasureMode {
    FiniteTemperature,
    ZeroTemperature,
}

/// Which one-sided limit to take at a discontinuity.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Side {
    Left,
    Right,
}

/// Nondecreasing right-continuous function on [0, end] given by knots.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MeasureFn {
    pub knots: Vec<(f64, f64)>,
    pub interp: Interp,
    pub mode: MeasureMode,
    pub end: f64,
}

impl MeasureFn {
    pub fn new(knots: Vec<(f64, f64)>, interp: Interp, mode: MeasureMode, end: f64) -> Result<Self> {
        let f = MeasureFn { knots, interp, mode, end };
        f.validate()?;
        Ok(f)
    }

    pub fn step(knots: Vec<(f64, f64)>, mode: MeasureMode, end: f64) -> Result<Self> {
        Self::new(knots, Interp::Step, mode, end)
    }

    pub fn validate(&self) -> Result<()> {
        if self.knots.is_empty() {
            return Err(Error::InvalidInput("measure needs at least one knot".into()));
        }
        if self.knots[0].0 != 0.0 {
            return Err(Error::InvalidInput("first measure knot must be at t = 0".into()));
        }
        for w in self.knots.windows(2) {
            if w[1].0 < w[0].0 || w[1].1 < w[0].1 {
                return Err(Error::MonotonicityViolation(format!(
                    "measure knots not nondecreasing: {:?} then {:?}",
                    w[0], w[1]
                )));
            }
        }
        let last_t = self.knots.last().unwrap().0;
        if last_t > self.end + 1e-12 {
            return Err(Error::InvalidInput(format!("knot {last_t} beyond end {}", self.end)));
        }
        if self.knots[0].1 < 0.0 {
            return Err(Error::MonotonicityViolation("measure must be nonnegative".into()));
        }
        if self.mode == MeasureMode::FiniteTemperature {
            let top = self.knots.last().unwrap().1;
            if top > 1.0 + 1e-14 {
                return Err(Error::MonotonicityViolation(format!("x exceeds 1: {top}")));
            }
        }
        Ok(())
    }

    /// Right-continuous value x(t).
    pub fn eval(&self, t: f64) -> f64 {
        let k = &self.knots;
        let i = match k.iter().rposition(|&(s, _)| s <= t) {
            Some(i) => i,
            None => return 0.0,
        };
        match self.interp {
            Interp::Step => k[i].1,
            Interp::Linear => {
                if i + 1 == k.len() {
                    k[i].1
                } else {
                    let (t0, v0) = k[i];
                    let (t1, v1) = k[i + 1];
                    v0 + (v1 - v0) * (t - t0) / (t1 - t0)
                }
            }
        }
    }

    /// Left limit x(t−), with x(0−) = 0.
    pub fn eval_left(&self, t: f64) -> f64 {
        let k = &self.knots;
        if t <= 0.0 {
            return 0.0;
        }
        match self.interp {
            Interp::Step => match k.iter().rposition(|&(s, _)| s < t) {
                Some(i) => k[i].1,
                None => 0.0,
            },
            Interp::Linear => match k.iter().position(|&(s, _)| s >= t) {
                None => k.last().unwrap().1,
                Some(0) => 0.0,
                Some(j) => {
                    let (t0, v0) = k[j - 1];
                    let (t1, v1) = k[j];
                    v0 + (v1 - v0) * (t - t0) / (t1 - t0)
                }
            },
        }
    }

    pub fn eval_side(&self, t: f64, side: Side) -> f64 {
        match side {
            Side::Right => self.eval(t),
            Side::Left => self.eval_left(t),
        }
    }

    /// Points where the function may jump.
    pub fn breakpoints(&self) -> Vec<f64> {
        match self.interp {
            Interp::Step => self.knots.iter().map(|k| k.0).collect(),
            Interp::Linear => {
                let mut out = vec![0.0];
                for w in self.knots.windows(2) {
                    if w[0].0 == w[1].0 {
                        out.push(w[0].0);
                    }
                }
                out
            }
        }
    }

    /// t_x = inf{t : x(t) = 1}; `end` when x never reaches 1 before it.
    pub fn t_x(&self) -> f64 {
        self.knots
            .iter()
            .find(|&&(_, v)| v >= 1.0 - 1e-14)
            .map(|&(t, _)| t)
            .unwrap_or(self.end)
    }

    pub fn sup(&self) -> f64 {
        self.knots.iter().map(|k| k.1).fold(0.0, f64::max)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SegmentKind {
    Linear,
    Sine,
    Constant,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PathSegment {
    pub kind: SegmentKind,
    pub t0: f64,
    pub t1: f64,
    pub start: SymMat,
    pub end: SymMat,
}

impl PathSegment {
    fn phase(&self, t: f64) -> f64 {
        std::f64::consts::PI * (2.0 * t - self.t0 - self.t1) / (2.0 * (self.t1 - self.t0))
    }

    pub fn value(&self, t: f64) -> SymMat {
        match self.kind {
            SegmentKind::Constant => self.start.clone(),
            SegmentKind::Linear => {
                let s = (t - self.t0) / (self.t1 - self.t0);
                let mut v = self.start.clone();
                v.axpy(s, &(&self.end - &self.start));
                v
            }
            SegmentKind::Sine => {
                let mid = (&self.start + &self.end).scale(0.5);
                let half = (&self.end - &self.start).scale(0.5);
                let mut v = mid;
                v.axpy(self.phase(t).sin(), &half);
                v
            }
        }
    }

    pub fn derivative(&self, t: f64) -> SymMat {
        let diff = &self.end - &self.start;
        match self.kind {
            SegmentKind::Constant => SymMat::zeros(self.start.dim()),
            SegmentKind::Linear => diff.scale(1.0 / (self.t1 - self.t0)),
            SegmentKind::Sine => {
                let w = std::f64::consts::PI / (self.t1 - self.t0);
                diff.scale(0.5 * w * self.phase(t).cos())
            }
        }
    }

    pub fn second_derivative(&self, t: f64) -> SymMat {
        let diff = &self.end - &self.start;
        match self.kind {
            SegmentKind::Constant | SegmentKind::Linear => SymMat::zeros(self.start.dim()),
            SegmentKind::Sine => {
                let w = std::f64::consts::PI / (self.t1 - self.t0);
                diff.scale(-0.5 * w * w * self.phase(t).sin())
            }
        }
    }
}

/// Piecewise-analytic matrix path Φ on [0, end].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MatrixPath {
    pub segments: Vec<PathSegment>,
}

impl MatrixPath {
    pub fn new(segments: Vec<PathSegment>) -> Result<Self> {
        let p = MatrixPath { segments };
        p.validate()?;
        Ok(p)
    }

    /// Φ(t) = (t/end)·Q.
    pub fn linear(q: &SymMat, end: f64) -> Self {
        MatrixPath {
            segments: vec![PathSegment {
                kind: SegmentKind::Linear,
                t0: 0.0,
                t1: end,
                start: SymMat::zeros(q.dim()),
                end: q.clone(),
            }],
        }
    }

    pub fn validate(&self) -> Result<()> {
        let segs = &self.segments;
        if segs.is_empty() {
            return Err(Error::InvalidInput("path needs at least one segment".into()));
        }
        if segs[0].t0 != 0.0 {
            return Err(Error::InvalidInput("path must start at t = 0".into()));
        }
        if segs[0].start.max_abs() > 1e-12 {
            return Err(Error::InvalidInput("path must start at the zero matrix".into()));
        }
        let m = segs[0].start.dim();
        for (k, s) in segs.iter().enumerate() {
            if s.start.dim() != m || s.end.dim() != m {
                return Err(Error::DimensionMismatch { expected: m, found: s.end.dim() });
            }
            if !(s.t1 > s.t0) {
                return Err(Error::InvalidInput(format!("segment {k} has empty interval")));
            }
            if s.kind == SegmentKind::Constant && (&s.end - &s.start).max_abs() > 1e-12 {
                return Err(Error::InvalidInput(format!("constant segment {k} changes value")));
            }
            let me = (&s.end - &s.start).min_eig();
            if me < -INC_TOL {
                return Err(Error::MonotonicityViolation(format!(
                    "segment {k} increment has eigenvalue {me}"
                )));
            }
            if k > 0 {
                let p = &segs[k - 1];
                if (p.t1 - s.t0).abs() > 1e-14 * (1.0 + s.t0.abs()) {
                    return Err(Error::InvalidInput(format!("gap before segment {k}")));
                }
                if (&p.end - &s.start).max_abs() > 1e-12 {
                    return Err(Error::InvalidInput(format!("path discontinuous at segment {k}")));
                }
            }
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.segments[0].start.dim()
    }

    pub fn end_time(&self) -> f64 {
        self.segments.last().unwrap().t1
    }

    pub fn end_value(&self) -> &SymMat {
        &self.segments.last().unwrap().end
    }

    pub fn knots(&self) -> Vec<f64> {
        let mut v: Vec<f64> = self.segments.iter().map(|s| s.t0).collect();
        v.push(self.end_time());
        v
    }

    fn segment_at(&self, t: f64, side: Side) -> &PathSegment {
        let segs = &self.segments;
        let idx = match side {
            Side::Right => segs.iter().rposition(|s| s.t0 <= t).unwrap_or(0),
            Side::Left => segs.iter().position(|s| s.t1 >= t).unwrap_or(segs.len() - 1),
        };
        &segs[idx]
    }

    pub fn eval(&self, t: f64) -> SymMat {
        self.segment_at(t, Side::Right).value(t)
    }

    pub fn derivative(&self, t: f64) -> SymMat {
        self.segment_at(t, Side::Right).derivative(t)
    }

    pub fn derivative_side(&self, t: f64, side: Side) -> SymMat {
        self.segment_at(t, side).derivative(t)
    }

    pub fn second_derivative(&self, t: f64) -> SymMat {
        self.segment_at(t, Side::Right).second_derivative(t)
    }
}

/// (L, α, Φ) for the zero-temperature functional.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ZeroTempTriple {
    #[serde(rename = "L")]
    pub l: SymMat,
    pub alpha: MeasureFn,
    pub path: MatrixPath,
}

/// Knot times t_k = trace(Q_k), Φ(t_k) = Q_k joined by sine segments, and
/// x(t) = x_k on [t_k, t_{k+1}).
pub fn sine_interpolate(p: &DiscreteOrderParam) -> Result<(MeasureFn, MatrixPath)> {
    p.validate()?;
    let r = p.r();
    let m = p.dim();
    let mut segments = Vec::new();
    let mut knots = Vec::new();
    let mut prev = SymMat::zeros(m);
    let mut prev_t = 0.0;
    for k in 0..r {
        let next = p.q(k + 1);
        let t1 = next.trace();
        let gap = t1 - prev_t;
        if gap < 1e-12 {
            if (&next - &prev).max_abs() > 1e-12 {
                return Err(Error::DegenerateKnots { level: k, gap });
            }
            continue;
        }
        knots.push((prev_t, p.x[k]));
        segments.push(PathSegment {
            kind: SegmentKind::Sine,
            t0: prev_t,
            t1,
            start: prev.clone(),
            end: next.clone(),
        });
        prev = next;
        prev_t = t1;
    }
    if segments.is_empty() {
        return Err(Error::DegenerateKnots { level: 0, gap: 0.0 });
    }
    if knots.last().unwrap().1 < 1.0 {
        knots.push((prev_t, 1.0));
    }
    let x = MeasureFn::new(knots, Interp::Step, MeasureMode::FiniteTemperature, prev_t)?;
    Ok((x, MatrixPath::new(segments)?))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scalar(v: f64) -> SymMat {
        SymMat::diag(&[v])
    }

    #[test]
    fn sine_midpoint_and_endpoint_derivative() {
        let q1 = SymMat::from_rows(&[vec![0.3, 0.1], vec![0.1, 0.4]]).unwrap();
        let q2 = SymMat::from_rows(&[vec![1.0, 0.2], vec![0.2, 1.0]]).unwrap();
        let p = DiscreteOrderParam::new(vec![0.0, 1.0], vec![q1.clone(), q2.clone()]).unwrap();
        let (_, path) = sine_interpolate(&p).unwrap();
        let (t1, t2) = (q1.trace(), q2.trace());
        let mid = path.eval(0.5 * (t1 + t2));
        assert!((&mid - &(&q1 + &q2).scale(0.5)).max_abs() < 1e-14);
        assert!(path.derivative(t1).max_abs() < 1e-14);
        assert!(path.derivative_side(t1, Side::Left).max_abs() < 1e-14);
        assert!((path.eval(t1).trace() - t1).abs() < 1e-14);
        assert!((path.eval(t2).trace() - t2).abs() < 1e-14);
    }

    #[test]
    fn degenerate_knots_rejected() {
        let q1 = SymMat::diag(&[0.5, -0.5 + 1e-13]);
        let p = DiscreteOrderParam { x: vec![0.0, 1.0], qs: vec![q1, SymMat::identity(2)] };
        assert!(sine_interpolate(&p).is_err());
    }

    #[test]
    fn measure_step_limits() {
        let x = MeasureFn::step(
            vec![(0.0, 0.0), (0.3, 0.5), (0.6, 1.0)],
            MeasureMode::FiniteTemperature,
            1.0,
        )
        .unwrap();
        assert_eq!(x.eval(0.3), 0.5);
        assert_eq!(x.eval_left(0.3), 0.0);
        assert_eq!(x.eval(0.59), 0.5);
        assert_eq!(x.t_x(), 0.6);
    }

    #[test]
    fn measure_linear_with_jump() {
        let x = MeasureFn::new(
            vec![(0.0, 0.0), (0.5, 0.25), (0.5, 1.0), (1.0, 1.0)],
            Interp::Linear,
            MeasureMode::FiniteTemperature,
            1.0,
        )
        .unwrap();
        assert!((x.eval(0.25) - 0.125).abs() < 1e-15);
        assert_eq!(x.eval(0.5), 1.0);
        assert!((x.eval_left(0.5) - 0.25).abs() < 1e-15);
        assert_eq!(x.t_x(), 0.5);
        assert_eq!(x.breakpoints(), vec![0.0, 0.5]);
    }

    #[test]
    fn discrete_validation() {
        assert!(DiscreteOrderParam::new(vec![0.0, 0.5], vec![scalar(0.6), scalar(0.4)]).is_err());
        assert!(DiscreteOrderParam::new(vec![0.1, 0.5], vec![scalar(0.3), scalar(1.0)]).is_err());
        assert!(DiscreteOrderParam::new(vec![0.0, 0.5], vec![scalar(0.3), scalar(1.0)]).is_ok());
    }
}
