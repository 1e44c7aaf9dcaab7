//! Composite Simpson on grids aligned with breakpoints.

use crate::error::Result;
use crate::functionals::order::Side;
use crate::linalg::SymMat;

pub const DEFAULT_N_QUAD: usize = 2001;
/// Lower bound on intervals per piece, so short sine segments stay resolved.
const MIN_INTERVALS: usize = 64;

/// Values that can be combined linearly.
pub trait Lin: Clone {
    fn zero_like(&self) -> Self;
    fn add_scaled(&mut self, s: f64, x: &Self);
}

impl Lin for f64 {
    fn zero_like(&self) -> Self {
        0.0
    }
    fn add_scaled(&mut self, s: f64, x: &Self) {
        *self += s * x;
    }
}

impl Lin for SymMat {
    fn zero_like(&self) -> Self {
        SymMat::zeros(self.dim())
    }
    fn add_scaled(&mut self, s: f64, x: &Self) {
        self.axpy(s, x);
    }
}

#[derive(Clone, Debug)]
pub struct Piece {
    pub a: f64,
    pub b: f64,
    pub n: usize,
}

impl Piece {
    pub fn h(&self) -> f64 {
        (self.b - self.a) / self.n as f64
    }

    pub fn node(&self, i: usize) -> f64 {
        if i == self.n {
            self.b
        } else {
            self.a + i as f64 * self.h()
        }
    }
}

/// Node values laid out piece by piece; shared endpoints appear twice.
pub type Table<T> = Vec<Vec<T>>;

#[derive(Clone, Debug)]
pub struct Grid {
    pub pieces: Vec<Piece>,
}

impl Grid {
    /// Splits [0, end] at `breaks` and distributes about `n_quad − 1`
    /// intervals proportionally, each piece getting an even count.
    pub fn new(breaks: &[f64], end: f64, n_quad: usize) -> Grid {
        let eps = 1e-13 * (1.0 + end.abs());
        let mut pts: Vec<f64> = breaks.iter().copied().filter(|&t| t > eps && t < end - eps).collect();
        pts.push(0.0);
        pts.push(end);
        pts.sort_by(f64::total_cmp);
        pts.dedup_by(|a, b| (*a - *b).abs() <= eps);
        let total = n_quad.max(3) - 1;
        let pieces = pts
            .windows(2)
            .map(|w| {
                let frac = (w[1] - w[0]) / end;
                let mut n = ((frac * total as f64).ceil() as usize).max(MIN_INTERVALS);
                if n % 2 == 1 {
                    n += 1;
                }
                Piece { a: w[0], b: w[1], n }
            })
            .collect();
        Grid { pieces }
    }

    pub fn end(&self) -> f64 {
        self.pieces.last().unwrap().b
    }

    /// Evaluates `f(t, side)` on every node. Piece endpoints use the one-sided
    /// limit from inside the piece.
    pub fn eval<T>(&self, mut f: impl FnMut(f64, Side) -> Result<T>) -> Result<Table<T>> {
        let mut out = Vec::with_capacity(self.pieces.len());
        for p in &self.pieces {
            let mut v = Vec::with_capacity(p.n + 1);
            for i in 0..=p.n {
                let side = if i == p.n { Side::Left } else { Side::Right };
                v.push(f(p.node(i), side)?);
            }
            out.push(v);
        }
        Ok(out)
    }

    /// Maps a table node-wise, passing (piece, index, t, side).
    pub fn map<T, U>(
        &self,
        table: &Table<T>,
        mut f: impl FnMut(usize, usize, f64, Side, &T) -> Result<U>,
    ) -> Result<Table<U>> {
        let mut out = Vec::with_capacity(table.len());
        for (pi, (p, vals)) in self.pieces.iter().zip(table).enumerate() {
            let mut v = Vec::with_capacity(vals.len());
            for (i, y) in vals.iter().enumerate() {
                let side = if i == p.n { Side::Left } else { Side::Right };
                v.push(f(pi, i, p.node(i), side, y)?);
            }
            out.push(v);
        }
        Ok(out)
    }

    fn piece_integral<T: Lin>(p: &Piece, y: &[T]) -> T {
        let h = p.h();
        let mut acc = y[0].zero_like();
        acc.add_scaled(h / 3.0, &y[0]);
        acc.add_scaled(h / 3.0, &y[p.n]);
        for (i, v) in y.iter().enumerate().take(p.n).skip(1) {
            let w = if i % 2 == 1 { 4.0 } else { 2.0 };
            acc.add_scaled(w * h / 3.0, v);
        }
        acc
    }

    /// Simpson integral over the pieces whose right end is ≤ `upto`.
    pub fn integrate_upto<T: Lin>(&self, table: &Table<T>, upto: f64) -> T {
        let mut acc = table[0][0].zero_like();
        for (p, y) in self.pieces.iter().zip(table) {
            if p.b > upto + 1e-13 * (1.0 + upto.abs()) {
                break;
            }
            acc.add_scaled(1.0, &Self::piece_integral(p, y));
        }
        acc
    }

    pub fn integrate<T: Lin>(&self, table: &Table<T>) -> T {
        self.integrate_upto(table, f64::INFINITY)
    }

    /// F(t) = ∫₀^t, with Simpson at even nodes and the half-panel rule
    /// h/12 (5f₀ + 8f₁ − f₂) at odd nodes.
    pub fn cumulative_left<T: Lin>(&self, table: &Table<T>) -> Table<T> {
        let mut offset = table[0][0].zero_like();
        let mut out = Vec::with_capacity(table.len());
        for (p, y) in self.pieces.iter().zip(table) {
            let h = p.h();
            let mut f = vec![offset.clone(); p.n + 1];
            let mut k = 0;
            while k < p.n {
                let mut odd = f[k].clone();
                odd.add_scaled(5.0 * h / 12.0, &y[k]);
                odd.add_scaled(8.0 * h / 12.0, &y[k + 1]);
                odd.add_scaled(-h / 12.0, &y[k + 2]);
                let mut even = f[k].clone();
                even.add_scaled(h / 3.0, &y[k]);
                even.add_scaled(4.0 * h / 3.0, &y[k + 1]);
                even.add_scaled(h / 3.0, &y[k + 2]);
                f[k + 1] = odd;
                f[k + 2] = even;
                k += 2;
            }
            offset = f[p.n].clone();
            out.push(f);
        }
        out
    }

    /// G(t) = ∫_t^end, computed as total − F(t) so both directions agree.
    pub fn cumulative_right<T: Lin>(&self, table: &Table<T>) -> Table<T> {
        let left = self.cumulative_left(table);
        let total = left.last().unwrap().last().unwrap().clone();
        left.into_iter()
            .map(|v| {
                v.into_iter()
                    .map(|f| {
                        let mut g = total.clone();
                        g.add_scaled(-1.0, &f);
                        g
                    })
                    .collect()
            })
            .collect()
    }

    /// Flattened (t, value) pairs with duplicated piece endpoints removed.
    pub fn flatten<T: Clone>(&self, table: &Table<T>) -> Vec<(f64, T)> {
        let mut out = Vec::new();
        for (pi, (p, y)) in self.pieces.iter().zip(table).enumerate() {
            let start = if pi == 0 { 0 } else { 1 };
            for (i, v) in y.iter().enumerate().skip(start) {
                out.push((p.node(i), v.clone()));
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn integrates_cubic_exactly() {
        let g = Grid::new(&[0.3, 0.7], 1.0, 101);
        let t = g.eval(|t, _| Ok(t * t * t - 2.0 * t)).unwrap();
        assert!((g.integrate(&t) - (0.25 - 1.0)).abs() < 1e-14);
        let c = g.cumulative_left(&t);
        for (s, v) in g.flatten(&c) {
            let exact = s.powi(4) / 4.0 - s * s;
            assert!((v - exact).abs() < 1e-8, "{s}: {v} vs {exact}");
        }
    }

    #[test]
    fn one_sided_values_at_breaks() {
        let g = Grid::new(&[0.5], 1.0, 11);
        let t = g.eval(|t, side| Ok(if t > 0.5 || (t == 0.5 && side == Side::Right) { 1.0 } else { 0.0 })).unwrap();
        assert!((g.integrate(&t) - 0.5).abs() < 1e-15);
    }
}
