//! Finite-N ground truth: Gaussian couplings, constrained energy maximization
//! and N^{−2/3} extrapolation.

use nalgebra::{DMatrix, DVector};
use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{pd_floor, SymMat};
use crate::model::MixedModel;

pub const DEFAULT_MEMORY_BUDGET: u128 = 512 << 20;

/// Symmetrized coupling tensor for one p, shared by all copies.
#[derive(Clone, Debug)]
pub struct Couplings {
    pub p: u32,
    pub g: Vec<f64>,
}

#[derive(Clone, Debug)]
pub struct HamiltonianSample {
    pub n: usize,
    pub m: usize,
    pub couplings: Vec<Couplings>,
    pub model: MixedModel,
    pub seed: u64,
}

#[derive(Clone, Debug)]
pub struct ConstrainedConfig {
    /// m×N frame with W Wᵀ = N I.
    pub w: DMatrix<f64>,
    /// Q^{1/2} W.
    pub sigma: DMatrix<f64>,
}

impl ConstrainedConfig {
    /// ‖σσᵀ/N − Q‖_F
    pub fn overlap_error(&self, q: &SymMat) -> f64 {
        let n = self.sigma.ncols() as f64;
        (&self.sigma * self.sigma.transpose() / n - q.as_matrix()).norm()
    }
}

pub fn footprint(n: usize, ps: &[u32]) -> u128 {
    ps.iter().map(|&p| 8 * (n as u128).pow(p)).sum()
}

fn permuted_sum(g: &[f64], n: usize, p: usize) -> Vec<f64> {
    let mut perm: Vec<usize> = (0..p).collect();
    let mut out = vec![0.0; g.len()];
    let mut count = 0usize;
    let mut digits = vec![0usize; p];
    loop {
        for (idx, v) in g.iter().enumerate() {
            let mut rest = idx;
            for d in (0..p).rev() {
                digits[d] = rest % n;
                rest /= n;
            }
            let mut j = 0;
            for &s in &perm {
                j = j * n + digits[s];
            }
            out[j] += v;
        }
        count += 1;
        if !next_permutation(&mut perm) {
            break;
        }
    }
    out.iter_mut().for_each(|v| *v /= count as f64);
    out
}

fn next_permutation(a: &mut [usize]) -> bool {
    let Some(i) = (1..a.len()).rev().find(|&i| a[i - 1] < a[i]) else { return false };
    let j = (i..a.len()).rev().find(|&j| a[j] > a[i - 1]).unwrap();
    a.swap(i - 1, j);
    a[i..].reverse();
    true
}

pub fn sample_hamiltonian(model: &MixedModel, n: usize, p_cut: u32, seed: u64) -> Result<HamiltonianSample> {
    sample_hamiltonian_with_budget(model, n, p_cut, seed, DEFAULT_MEMORY_BUDGET)
}

/// Draws i.i.d. standard Gaussian couplings for each p ≤ p_cut present in
/// the model (terms above p_cut are dropped with a warning).
pub fn sample_hamiltonian_with_budget(
    model: &MixedModel,
    n: usize,
    p_cut: u32,
    seed: u64,
    budget: u128,
) -> Result<HamiltonianSample> {
    if n == 0 {
        return Err(Error::InvalidInput("N must be positive".into()));
    }
    let mut ps: Vec<u32> = model.terms.iter().map(|t| t.p).collect();
    ps.sort_unstable();
    ps.dedup();
    if ps.iter().any(|&p| p > p_cut) {
        log::warn!("dropping terms with p > {p_cut} from the sampled Hamiltonian");
        ps.retain(|&p| p <= p_cut);
    }
    let bytes = footprint(n, &ps);
    if bytes > budget {
        return Err(Error::MemoryBudgetExceeded { bytes, budget });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let couplings = ps
        .iter()
        .map(|&p| {
            let raw: Vec<f64> = (0..n.pow(p)).map(|_| StandardNormal.sample(&mut rng)).collect();
            let g = if p == 1 { raw } else { permuted_sum(&raw, n, p as usize) };
            Couplings { p, g }
        })
        .collect();
    Ok(HamiltonianSample { n, m: model.m, couplings, model: model.clone(), seed })
}

/// Contracts all but one slot of a symmetric tensor with s.
fn contract(g: &[f64], n: usize, p: u32, s: &[f64]) -> Vec<f64> {
    let mut cur = g.to_vec();
    for _ in 1..p {
        cur = cur.chunks_exact(n).map(|row| row.iter().zip(s).map(|(a, b)| a * b).sum()).collect();
    }
    cur
}

impl HamiltonianSample {
    fn beta(&self, p: u32, j: usize) -> f64 {
        self.model.terms.iter().filter(|t| t.p == p).map(|t| t.beta[j]).sum()
    }

    /// H_N^j(σ) for each copy j (not divided by N).
    pub fn copy_energies(&self, sigma: &DMatrix<f64>) -> Vec<f64> {
        self.energy_grad(sigma, false).0
    }

    /// Per-copy energies and, optionally, ∂H/∂σ.
    fn energy_grad(&self, sigma: &DMatrix<f64>, grad: bool) -> (Vec<f64>, DMatrix<f64>) {
        let n = self.n;
        let mut e = vec![0.0; self.m];
        let mut gr = DMatrix::zeros(if grad { self.m } else { 0 }, if grad { n } else { 0 });
        for j in 0..self.m {
            let s: Vec<f64> = sigma.row(j).iter().copied().collect();
            let h = self.model.h[j];
            e[j] = h * s.iter().sum::<f64>();
            if grad {
                gr.row_mut(j).fill(h);
            }
            for c in &self.couplings {
                let b = self.beta(c.p, j);
                if b == 0.0 {
                    continue;
                }
                let scale = b * (n as f64).powf(-(c.p as f64 - 1.0) / 2.0);
                let v = contract(&c.g, n, c.p, &s);
                e[j] += scale * v.iter().zip(&s).map(|(a, b)| a * b).sum::<f64>();
                if grad {
                    for i in 0..n {
                        gr[(j, i)] += scale * c.p as f64 * v[i];
                    }
                }
            }
        }
        (e, gr)
    }

    /// H_N(σ)/N.
    pub fn energy(&self, sigma: &DMatrix<f64>) -> f64 {
        self.copy_energies(sigma).iter().sum::<f64>() / self.n as f64
    }
}

/// Polar retraction onto {W Wᵀ = N I}.
fn retract(w: &DMatrix<f64>) -> Option<DMatrix<f64>> {
    let n = w.ncols() as f64;
    let gram = SymMat::from_matrix(&(w * w.transpose()));
    let inv_half = gram.inv_pow(0.5).ok()?;
    Some(inv_half.as_matrix() * w * n.sqrt())
}

#[derive(Clone, Debug)]
pub struct MaxResult {
    pub best: f64,
    pub config: ConstrainedConfig,
    pub per_restart: Vec<f64>,
}

struct Ascent<'a> {
    sample: &'a HamiltonianSample,
    half: DMatrix<f64>,
}

impl Ascent<'_> {
    fn eval(&self, w: &DMatrix<f64>) -> (f64, DMatrix<f64>) {
        let sigma = &self.half * w;
        let (e, g) = self.sample.energy_grad(&sigma, true);
        let n = self.sample.n as f64;
        (e.iter().sum::<f64>() / n, &self.half * g / n)
    }

    fn value(&self, w: &DMatrix<f64>) -> f64 {
        self.sample.energy(&(&self.half * w))
    }

    fn run(&self, mut w: DMatrix<f64>, max_iters: usize) -> (f64, DMatrix<f64>) {
        let n = self.sample.n as f64;
        let scale = ((self.sample.m as f64) * n).sqrt();
        let (mut f, mut g) = self.eval(&w);
        let mut t: f64 = 0.5;
        for _ in 0..max_iters {
            let wg = &g * w.transpose();
            let sym = (&wg + wg.transpose()) * 0.5;
            let dir = &g - sym * &w / n;
            let gn = dir.norm();
            if gn * scale < 1e-12 * (1.0 + f.abs()) {
                break;
            }
            let mut accepted = false;
            while t > 1e-12 {
                let step = t * scale / gn;
                if let Some(trial) = retract(&(&w + &dir * step)) {
                    let ft = self.value(&trial);
                    if ft >= f + 1e-4 * step * gn * gn {
                        w = trial;
                        accepted = true;
                        t = (2.0 * t).min(1.0);
                        break;
                    }
                }
                t *= 0.5;
            }
            if !accepted {
                break;
            }
            (f, g) = self.eval(&w);
        }
        (f, w)
    }
}

/// Projected-gradient ascent of H_N(Q^{1/2}W)/N over frames W Wᵀ = N I.
/// Restart k draws its start from stream k+1 of the sample seed.
pub fn maximize_energy(sample: &HamiltonianSample, q: &SymMat, restarts: usize, max_iters: usize) -> Result<MaxResult> {
    if q.dim() != sample.m {
        return Err(Error::DimensionMismatch { expected: sample.m, found: q.dim() });
    }
    let me = q.min_eig();
    if me <= pd_floor(q) {
        return Err(Error::NonPDConstraint { min_eig: me });
    }
    if restarts == 0 {
        return Err(Error::InvalidInput("restarts must be at least 1".into()));
    }
    if sample.n < sample.m {
        return Err(Error::InvalidInput(format!("N = {} < m = {}", sample.n, sample.m)));
    }
    let half = q.sqrt()?.as_matrix().clone();
    let asc = Ascent { sample, half: half.clone() };
    let runs: Vec<(f64, DMatrix<f64>)> = (0..restarts)
        .into_par_iter()
        .map(|k| {
            let mut rng = ChaCha8Rng::seed_from_u64(sample.seed);
            rng.set_stream(k as u64 + 1);
            let w0 = DMatrix::from_fn(sample.m, sample.n, |_, _| StandardNormal.sample(&mut rng));
            let w0 = retract(&w0).expect("Gaussian frame has full rank");
            asc.run(w0, max_iters)
        })
        .collect();
    let per_restart: Vec<f64> = runs.iter().map(|r| r.0).collect();
    let (bi, _) = per_restart
        .iter()
        .enumerate()
        .fold((0, f64::NEG_INFINITY), |acc, (i, &v)| if v > acc.1 { (i, v) } else { acc });
    let w = runs[bi].1.clone();
    let sigma = &half * &w;
    Ok(MaxResult { best: per_restart[bi], config: ConstrainedConfig { w, sigma }, per_restart })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Extrapolation {
    pub e_inf: f64,
    pub slope: f64,
    pub exponent: f64,
    /// Root mean square of the fit residuals.
    pub residual: f64,
}

/// Least squares for e(N) = e_∞ + c N^{exponent}.
pub fn extrapolate_gse(values: &[(usize, f64)], exponent: f64) -> Result<Extrapolation> {
    let mut ns: Vec<usize> = values.iter().map(|v| v.0).collect();
    ns.sort_unstable();
    ns.dedup();
    if ns.len() < 3 {
        return Err(Error::IllConditionedFit(format!("need at least 3 distinct N, got {}", ns.len())));
    }
    let a = DMatrix::from_fn(values.len(), 2, |i, j| if j == 0 { 1.0 } else { (values[i].0 as f64).powf(exponent) });
    let b = DVector::from_iterator(values.len(), values.iter().map(|v| v.1));
    let svd = a.clone().svd(true, true);
    let (smax, smin) = (svd.singular_values.max(), svd.singular_values.min());
    if !(smin > 1e-12 * smax) {
        return Err(Error::IllConditionedFit(format!("singular values {smax:e}, {smin:e}")));
    }
    let sol = svd.solve(&b, 0.0).map_err(|e| Error::IllConditionedFit(e.to_string()))?;
    let res = &a * &sol - &b;
    Ok(Extrapolation {
        e_inf: sol[0],
        slope: sol[1],
        exponent,
        residual: (res.norm_squared() / values.len() as f64).sqrt(),
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimulationConfig {
    pub sizes: Vec<usize>,
    pub draws: usize,
    pub restarts: usize,
    pub max_iters: usize,
    pub p_cut: u32,
    pub exponent: f64,
    pub memory_budget: u128,
}

impl Default for SimulationConfig {
    fn default() -> Self {
        SimulationConfig {
            sizes: vec![100, 200, 400],
            draws: 5,
            restarts: 8,
            max_iters: 2000,
            p_cut: 4,
            exponent: -2.0 / 3.0,
            memory_budget: DEFAULT_MEMORY_BUDGET,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimRow {
    #[serde(rename = "N")]
    pub n: usize,
    pub seed: u64,
    pub restart: usize,
    pub energy: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimulationReport {
    pub rows: Vec<SimRow>,
    /// Best energy of each disorder draw.
    pub draw_best: Vec<(usize, f64)>,
    pub extrapolation: Option<Extrapolation>,
}

/// Seed of disorder draw `d` at size `n`.
pub fn draw_seed(base: u64, n: usize, d: usize) -> u64 {
    let mut rng = ChaCha8Rng::seed_from_u64(base);
    rng.set_stream(((n as u64) << 20) | d as u64);
    rng.next_u64()
}

pub fn simulate(model: &MixedModel, q: &SymMat, cfg: &SimulationConfig, seed: u64) -> Result<SimulationReport> {
    if cfg.draws == 0 || cfg.sizes.is_empty() {
        return Err(Error::InvalidInput("need at least one size and one draw".into()));
    }
    let mut rows = Vec::new();
    let mut draw_best = Vec::new();
    for &n in &cfg.sizes {
        for d in 0..cfg.draws {
            let s = draw_seed(seed, n, d);
            let sample = sample_hamiltonian_with_budget(model, n, cfg.p_cut, s, cfg.memory_budget)?;
            let res = maximize_energy(&sample, q, cfg.restarts, cfg.max_iters)?;
            log::debug!("N={n} draw {d}: best {:.8}", res.best);
            for (k, e) in res.per_restart.iter().enumerate() {
                rows.push(SimRow { n, seed: s, restart: k, energy: *e });
            }
            draw_best.push((n, res.best));
        }
    }
    let extrapolation = match extrapolate_gse(&draw_best, cfg.exponent) {
        Ok(e) => Some(e),
        Err(Error::IllConditionedFit(msg)) => {
            log::warn!("no extrapolation: {msg}");
            None
        }
        Err(e) => return Err(e),
    };
    Ok(SimulationReport { rows, draw_best, extrapolation })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn symmetrization_keeps_energy() {
        let n = 5;
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let raw: Vec<f64> = (0..n * n * n).map(|_| StandardNormal.sample(&mut rng)).collect();
        let sym = permuted_sum(&raw, n, 3);
        let s: Vec<f64> = (0..n).map(|i| (i as f64 * 0.7).sin()).collect();
        let full = |g: &[f64]| contract(g, n, 3, &s).iter().zip(&s).map(|(a, b)| a * b).sum::<f64>();
        assert!((full(&raw) - full(&sym)).abs() < 1e-12);
        assert!((sym[1 * n * n + 2 * n + 3] - sym[3 * n * n + 1 * n + 2]).abs() < 1e-15);
    }

    #[test]
    fn permutations_are_all_visited() {
        let mut a = vec![0, 1, 2, 3];
        let mut k = 1;
        while next_permutation(&mut a) {
            k += 1;
        }
        assert_eq!(k, 24);
    }
}
