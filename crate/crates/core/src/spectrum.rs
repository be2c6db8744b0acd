//! Low-lying spectra, detuning sweeps and avoided-crossing detection.
//!
//! The detuning Δ is applied by holding ω₂ fixed and setting ω₁ = ω₂ + Δ.
//! Sweeps dispatch grid points to the rayon pool; each eigensolve itself is
//! single-threaded and results merge by grid index, so output is
//! deterministic regardless of thread scheduling.

use crate::error::CoreError;
use crate::hilbert::{FockSpaceLayout, OperatorMatrix};
use crate::models::{
    self, DerivedConstants, EffectiveModelParams, FullModelParams,
};
use crate::sparse::CsrMatrix;
use crate::Result;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

/// Above this dimension `lowest_eigenvalues` switches from dense
/// diagonalization to the Lanczos solver.
pub const DENSE_EIGEN_LIMIT: usize = 512;

/// Hermiticity tolerance for eigensolver inputs.
const INPUT_HERMITIAN_TOL: f64 = 1e-12;

/// Fixed seed for the Lanczos start vector; a deterministic solver setting.
const LANCZOS_SEED: u64 = 0x6f70_746f_6d6f_746f;

/// Uniform Δ grid specification.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DeltaGrid {
    pub lo: f64,
    pub hi: f64,
    pub points: usize,
}

impl DeltaGrid {
    pub fn new(lo: f64, hi: f64, points: usize) -> Result<Self> {
        if points < 2 || !(hi > lo) {
            return Err(CoreError::InvalidGrid(format!(
                "need points >= 2 and hi > lo, got [{lo}, {hi}] with {points} points"
            )));
        }
        Ok(Self { lo, hi, points })
    }

    /// Grid values, endpoints included.
    pub fn values(&self) -> Vec<f64> {
        let step = (self.hi - self.lo) / (self.points - 1) as f64;
        (0..self.points).map(|i| self.lo + step * i as f64).collect()
    }
}

/// Echo of the swept model's parameters at the reference detuning.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum ModelParamsEcho {
    Effective(EffectiveModelParams),
    Full(FullModelParams),
}

/// Result of a Δ sweep: per grid point the `m` lowest eigenvalues, ascending.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SpectrumSweepResult {
    pub delta_grid: Vec<f64>,
    /// `levels[j][i]` = i-th lowest eigenvalue at `delta_grid[j]`.
    pub levels: Vec<Vec<f64>>,
    pub params_echo: ModelParamsEcho,
}

impl SpectrumSweepResult {
    /// Number of levels per grid point.
    pub fn n_levels(&self) -> usize {
        self.levels.first().map_or(0, Vec::len)
    }

    /// Gap series E_{i+1} − E_i over the grid for the adjacent pair (i, i+1).
    pub fn gap_series(&self, lower_level: usize) -> Vec<f64> {
        self.levels
            .iter()
            .map(|row| row[lower_level + 1] - row[lower_level])
            .collect()
    }
}

/// A located avoided crossing of the adjacent pair `level_pair`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AnticrossingReport {
    /// The adjacent levels (i, i+1) whose gap has a local minimum.
    pub level_pair: (usize, usize),
    /// Sub-grid (parabolically refined) Δ of the minimum gap.
    pub delta_star: f64,
    /// Minimum energy separation at `delta_star`.
    pub gap: f64,
}

/// The `m` smallest eigenvalues of a Hermitian operator, ascending.
///
/// Dense diagonalization up to [`DENSE_EIGEN_LIMIT`], Lanczos with full
/// reorthogonalization above. Non-Hermitian input is rejected.
pub fn lowest_eigenvalues(h: &OperatorMatrix, m: usize) -> Result<Vec<f64>> {
    let dim = h.dim();
    if m > dim {
        return Err(CoreError::TooManyEigenvalues { m, dim });
    }
    if m == 0 {
        return Ok(Vec::new());
    }
    let defect = h.hermiticity_defect();
    if defect > INPUT_HERMITIAN_TOL {
        return Err(CoreError::NotHermitian { defect });
    }
    if dim <= DENSE_EIGEN_LIMIT {
        Ok(dense_lowest(h, m))
    } else {
        lanczos_lowest(h.entries(), m)
    }
}

fn dense_lowest(h: &OperatorMatrix, m: usize) -> Vec<f64> {
    let mut eigs: Vec<f64> = h
        .to_dense()
        .symmetric_eigen()
        .eigenvalues
        .iter()
        .copied()
        .collect();
    eigs.sort_by(|a, b| a.partial_cmp(b).unwrap());
    eigs.truncate(m);
    eigs
}

/// Lanczos iteration with full reorthogonalization and a deterministic
/// start vector. Converges the `m` lowest Ritz values to `tol` or reports
/// the worst residual.
fn lanczos_lowest(a: &CsrMatrix, m: usize) -> Result<Vec<f64>> {
    let dim = a.nrows();
    let tol = 1e-11;
    let max_dim = dim.min((6 * m + 60).max(120));

    let mut rng = ChaCha8Rng::seed_from_u64(LANCZOS_SEED);
    let mut v: Vec<Complex64> = (0..dim)
        .map(|_| Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
        .collect();
    normalize(&mut v);

    let mut basis: Vec<Vec<Complex64>> = vec![v.clone()];
    let mut alphas: Vec<f64> = Vec::new();
    let mut betas: Vec<f64> = Vec::new();

    let mut last_residual = f64::INFINITY;
    for step in 0..max_dim {
        let mut w = a.matvec(&basis[step]);
        let alpha = dot(&basis[step], &w).re;
        alphas.push(alpha);
        // w -= alpha v_j + beta v_{j-1}, then full reorthogonalization
        for (wi, vi) in w.iter_mut().zip(&basis[step]) {
            *wi -= alpha * vi;
        }
        if step > 0 {
            let beta_prev = betas[step - 1];
            for (wi, vi) in w.iter_mut().zip(&basis[step - 1]) {
                *wi -= beta_prev * vi;
            }
        }
        for b in &basis {
            let proj = dot(b, &w);
            for (wi, bi) in w.iter_mut().zip(b) {
                *wi -= proj * bi;
            }
        }
        let beta = norm(&w);

        // Ritz values of the current tridiagonal block
        if alphas.len() >= m {
            let t = tridiagonal(&alphas, &betas);
            let eig = t.symmetric_eigen();
            let mut order: Vec<usize> = (0..alphas.len()).collect();
            order.sort_by(|&i, &j| eig.eigenvalues[i].partial_cmp(&eig.eigenvalues[j]).unwrap());
            // residual of Ritz pair i is |beta * s_last,i|
            last_residual = order
                .iter()
                .take(m)
                .map(|&i| (beta * eig.eigenvectors[(alphas.len() - 1, i)]).abs())
                .fold(0.0f64, f64::max);
            let scale = order
                .iter()
                .take(m)
                .map(|&i| eig.eigenvalues[i].abs())
                .fold(1.0f64, f64::max);
            if last_residual <= tol * scale || alphas.len() == dim {
                return Ok(order
                    .iter()
                    .take(m)
                    .map(|&i| eig.eigenvalues[i])
                    .collect());
            }
        }

        if beta < 1e-14 {
            // invariant subspace exhausted; restart with a fresh direction
            let mut fresh: Vec<Complex64> = (0..dim)
                .map(|_| Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
                .collect();
            for b in &basis {
                let proj = dot(b, &fresh);
                for (fi, bi) in fresh.iter_mut().zip(b) {
                    *fi -= proj * bi;
                }
            }
            let n = norm(&fresh);
            if n < 1e-14 {
                break;
            }
            for f in &mut fresh {
                *f /= n;
            }
            betas.push(0.0);
            basis.push(fresh);
        } else {
            for wi in &mut w {
                *wi /= beta;
            }
            betas.push(beta);
            basis.push(w);
        }
    }
    Err(CoreError::EigensolverNonConvergence {
        residual: last_residual,
        iterations: alphas.len(),
    })
}

fn tridiagonal(alphas: &[f64], betas: &[f64]) -> nalgebra::DMatrix<f64> {
    let n = alphas.len();
    let mut t = nalgebra::DMatrix::<f64>::zeros(n, n);
    for i in 0..n {
        t[(i, i)] = alphas[i];
        if i + 1 < n {
            t[(i, i + 1)] = betas[i];
            t[(i + 1, i)] = betas[i];
        }
    }
    t
}

fn dot(a: &[Complex64], b: &[Complex64]) -> Complex64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

fn norm(v: &[Complex64]) -> f64 {
    v.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt()
}

fn normalize(v: &mut [Complex64]) {
    let n = norm(v);
    for x in v {
        *x /= n;
    }
}

/// Sweep the effective model over Δ: per grid point, ω₁ = ω₂ + Δ and the
/// `m` lowest eigenvalues are recorded. A sweep at k₁ = k₂ = 0 falls back to
/// the bare-frequency uncoupled limit (see
/// [`DerivedConstants::uncoupled_limit`]).
pub fn sweep_delta(
    p: &EffectiveModelParams,
    grid: DeltaGrid,
    m: usize,
    layout: &FockSpaceLayout,
) -> Result<SpectrumSweepResult> {
    let zero_coupling = p.k1 == 0.0 && p.k2 == 0.0;
    sweep_core(grid, m, ModelParamsEcho::Effective(*p), |delta| {
        let pd = EffectiveModelParams {
            omega1: p.omega2 + delta,
            ..*p
        };
        if zero_coupling {
            let c = DerivedConstants::uncoupled_limit(&pd);
            Ok(models::build_effective_hamiltonian_with_constants(
                &pd, &c, layout,
            ))
        } else {
            models::build_effective_hamiltonian(&pd, layout)
        }
    })
}

/// Sweep the full model over Δ (ω₁ = ω₂ + Δ).
pub fn sweep_delta_full(
    p: &FullModelParams,
    grid: DeltaGrid,
    m: usize,
    layout: &FockSpaceLayout,
) -> Result<SpectrumSweepResult> {
    sweep_core(grid, m, ModelParamsEcho::Full(*p), |delta| {
        let pd = FullModelParams {
            omega1: p.omega2 + delta,
            ..*p
        };
        Ok(models::build_full_hamiltonian(&pd, layout))
    })
}

fn sweep_core(
    grid: DeltaGrid,
    m: usize,
    echo: ModelParamsEcho,
    build: impl Fn(f64) -> Result<OperatorMatrix> + Sync,
) -> Result<SpectrumSweepResult> {
    let deltas = grid.values();
    let per_point: Vec<Result<Vec<f64>>> = deltas
        .par_iter()
        .map(|&delta| {
            let h = build(delta).map_err(|e| CoreError::SweepPointFailure {
                delta,
                source: Box::new(e),
            })?;
            lowest_eigenvalues(&h, m).map_err(|e| CoreError::SweepPointFailure {
                delta,
                source: Box::new(e),
            })
        })
        .collect();
    let mut levels = Vec::with_capacity(deltas.len());
    for row in per_point {
        levels.push(row?);
    }
    Ok(SpectrumSweepResult {
        delta_grid: deltas,
        levels,
        params_echo: echo,
    })
}

/// Locate avoided crossings: for each adjacent level pair, interior local
/// minima of the gap over Δ with prominence at least `min_prominence`,
/// refined below grid resolution by a parabolic fit.
///
/// A minimum whose refined gap does not exceed `min_prominence` is an actual
/// (or numerically exact) level crossing, not an avoided one, and is not
/// reported — an uncoupled sweep yields an empty list.
pub fn find_avoided_crossings(
    sweep: &SpectrumSweepResult,
    min_prominence: f64,
) -> Vec<AnticrossingReport> {
    let mut reports = Vec::new();
    let n = sweep.delta_grid.len();
    if n < 3 {
        return reports;
    }
    for pair in 0..sweep.n_levels().saturating_sub(1) {
        let gap = sweep.gap_series(pair);
        for j in 1..n - 1 {
            let is_min = gap[j] < gap[j - 1] && gap[j] <= gap[j + 1];
            if !is_min {
                continue;
            }
            if prominence(&gap, j) < min_prominence {
                continue;
            }
            let (delta_star, gap_min) = refine_parabolic(
                sweep.delta_grid[j - 1],
                sweep.delta_grid[j],
                sweep.delta_grid[j + 1],
                gap[j - 1],
                gap[j],
                gap[j + 1],
            );
            if gap_min <= min_prominence {
                continue;
            }
            reports.push(AnticrossingReport {
                level_pair: (pair, pair + 1),
                delta_star,
                gap: gap_min,
            });
        }
    }
    reports
}

/// Prominence of the local minimum at `j`: the smaller of the highest
/// barriers separating it from a lower point (or the boundary) on each side.
fn prominence(gap: &[f64], j: usize) -> f64 {
    let mut left_barrier = gap[j];
    let mut i = j;
    while i > 0 {
        i -= 1;
        left_barrier = left_barrier.max(gap[i]);
        if gap[i] < gap[j] {
            break;
        }
    }
    let mut right_barrier = gap[j];
    let mut i = j;
    while i + 1 < gap.len() {
        i += 1;
        right_barrier = right_barrier.max(gap[i]);
        if gap[i] < gap[j] {
            break;
        }
    }
    left_barrier.min(right_barrier) - gap[j]
}

fn refine_parabolic(x0: f64, x1: f64, x2: f64, y0: f64, y1: f64, y2: f64) -> (f64, f64) {
    let h = x1 - x0;
    let curvature = y0 - 2.0 * y1 + y2;
    if curvature <= 0.0 {
        return (x1, y1);
    }
    let d = (0.5 * (y0 - y2) / curvature).clamp(-1.0, 1.0);
    let x_star = x1 + d * h;
    let y_star = y1 - 0.25 * (y0 - y2) * d;
    (x_star.clamp(x0, x2), y_star.min(y1))
}
