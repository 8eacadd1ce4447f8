//! Unit-modulus sensing-phase design by projected gradient.
//!
//! The sensing sub-array `g` (first `L_s` RIS axis elements) should respond
//! with magnitude `L_s` on the grid points of one partition and zero
//! elsewhere:
//!
//! ```text
//! minimize  || W^(1/2) (A g - L_s 1_{s,i}) ||^2   s.t. |g_m| = 1
//! A = r^T(v_b) ∘ R^H          (Khatri-Rao, D x L_s)
//! g <- exp(j angle(g + mu A^H W (b - A g)))
//! ```
//!
//! `W` is the row weighting and `b` the target: `L_s 1_{s,i}` for the complex
//! mask, or `L_s 1_{s,i}` carrying the phase of the current response for the
//! magnitude mask. Uniform weights with the complex mask is the plain
//! least-squares form.

use ndarray::{Array1, Array2};
use num_complex::Complex;
use rand::Rng;

use crate::error::{check_dim, invalid, Result};
use crate::geometry::axis_response;
use crate::linalg::{conj_transpose, khatri_rao, spectral_norm_sq};
use crate::scalar::Real;

use super::{Grid, PartitionSpec};

/// What the on-partition response is pushed towards.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum MaskTarget {
    /// `L_s` with zero phase on every partition point.
    Complex,
    /// Magnitude `L_s`, phase free.
    #[default]
    Magnitude,
}

/// Row weighting of the masked residual.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum MaskWeighting {
    /// Every grid point counts once.
    Uniform,
    /// On-partition and off-partition sets carry equal total weight.
    #[default]
    Balanced,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverParams {
    /// `mu = step_scale / sigma_max(W^(1/2) A)^2`.
    pub step_scale: f64,
    pub max_iters: usize,
    /// Stop once the relative residual change drops below this.
    pub tol: f64,
    pub mask: MaskTarget,
    pub weighting: MaskWeighting,
    /// Std-dev (radians) of the seeded phase perturbation on the warm start.
    pub init_perturbation: f64,
    pub init_seed: u64,
    /// Normalized residual above which a beam is flagged in the codebook metadata.
    pub residual_ceiling: f64,
}

impl Default for SolverParams {
    fn default() -> Self {
        Self {
            step_scale: 0.5,
            max_iters: 500,
            tol: 1e-8,
            mask: MaskTarget::default(),
            weighting: MaskWeighting::default(),
            init_perturbation: 0.01,
            init_seed: 0x5eed,
            residual_ceiling: 0.75,
        }
    }
}

impl SolverParams {
    /// Complex mask, uniform weights.
    pub fn plain_least_squares() -> Self {
        Self {
            mask: MaskTarget::Complex,
            weighting: MaskWeighting::Uniform,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.step_scale > 0.0 && self.step_scale.is_finite()) {
            return Err(invalid("solver step_scale must be positive"));
        }
        if !(self.tol >= 0.0) {
            return Err(invalid("solver tol must be non-negative"));
        }
        if !(self.init_perturbation >= 0.0) {
            return Err(invalid("init_perturbation must be non-negative"));
        }
        Ok(())
    }
}

/// Result of one sensing design.
#[derive(Debug, Clone, PartialEq)]
pub struct SensingDesign<T> {
    pub g: Array1<Complex<T>>,
    /// `||W^(1/2)(·)||` of the returned iterate.
    pub residual: T,
    /// Residual divided by `||W^(1/2) L_s 1_{s,i}||`.
    pub normalized_residual: T,
    pub iterations: usize,
}

/// `A = r^T(v_b) ∘ R^H`, `D x L_s`; row `j` applied to `g` equals
/// `r^H(v_j) diag(g) r(v_b)`.
pub fn sensing_matrix<T: Real>(l_s: usize, v_b: T, grid: &Grid<T>, spacing: T) -> Array2<Complex<T>> {
    let rb = axis_response(v_b, l_s, spacing).insert_axis(ndarray::Axis(0));
    let mut r = Array2::from_elem((l_s, grid.len()), Complex::new(T::zero(), T::zero()));
    for (j, &v) in grid.points().iter().enumerate() {
        r.column_mut(j).assign(&axis_response(v, l_s, spacing));
    }
    let rh = conj_transpose(r.view());
    khatri_rao(rb.view(), rh.view())
}

/// Indicator `1_{s,i}` over the grid (0/1 per grid point).
pub fn indicator(partition: &PartitionSpec, d: usize) -> Vec<bool> {
    let mut ind = vec![false; d];
    for &k in &partition.indices {
        ind[k - 1] = true;
    }
    ind
}

fn row_weights<T: Real>(ind: &[bool], weighting: MaskWeighting) -> Vec<T> {
    match weighting {
        MaskWeighting::Uniform => vec![T::one(); ind.len()],
        MaskWeighting::Balanced => {
            let on = ind.iter().filter(|&&b| b).count().max(1);
            let off = (ind.len() - ind.iter().filter(|&&b| b).count()).max(1);
            ind.iter()
                .map(|&b| T::one() / T::from_usize_lossy(if b { on } else { off }))
                .collect()
        }
    }
}

fn residual<T: Real>(resp: &Array1<Complex<T>>, ind: &[bool], weights: &[T], l: T, mask: MaskTarget) -> T {
    resp.iter()
        .zip(ind.iter().zip(weights.iter()))
        .map(|(z, (&on, &w))| {
            let target = if on { l } else { T::zero() };
            let e = match mask {
                MaskTarget::Complex => (z - Complex::new(target, T::zero())).norm_sqr(),
                MaskTarget::Magnitude => (z.norm() - target).powi(2),
            };
            w * e
        })
        .sum::<T>()
        .sqrt()
}

fn project_unit<T: Real>(z: Complex<T>) -> Complex<T> {
    if z.norm() == T::zero() {
        Complex::new(T::one(), T::zero())
    } else {
        Complex::from_polar(T::one(), z.arg())
    }
}

/// Warm start: the conjugate beam matched to `v_mid`, with a seeded phase jitter.
pub fn matched_init<T: Real, R: Rng + ?Sized>(
    l_s: usize,
    v_b: T,
    v_mid: T,
    spacing: T,
    perturbation: f64,
    rng: &mut R,
) -> Array1<Complex<T>> {
    let rb = axis_response(v_b, l_s, spacing);
    let rm = axis_response(v_mid, l_s, spacing);
    let sd = T::lit(perturbation);
    Array1::from_shape_fn(l_s, |n| {
        let jitter = if perturbation > 0.0 { T::standard_normal(rng) * sd } else { T::zero() };
        rb[n].conj() * rm[n] * Complex::from_polar(T::one(), jitter)
    })
}

/// Designs the sensing phases `g_{s,i}` of one axis beam.
pub fn design_sensing_phases<T: Real>(
    partition: &PartitionSpec,
    l_s: usize,
    v_b: T,
    grid: &Grid<T>,
    spacing: T,
    params: &SolverParams,
    init: Array1<Complex<T>>,
) -> Result<SensingDesign<T>> {
    if l_s == 0 {
        return Err(invalid("sensing sub-array needs at least one element"));
    }
    params.validate()?;
    check_dim("design_sensing_phases: init", l_s, init.len())?;
    let tol_mod = T::lit(1e-6).max(T::epsilon() * T::lit(64.0));
    if init.iter().any(|z| (z.norm() - T::one()).abs() > tol_mod) {
        return Err(invalid("initial sensing phases must have unit modulus"));
    }
    if !grid.points().windows(2).all(|w| w[0] < w[1]) {
        return Err(invalid("design grid must be strictly increasing"));
    }
    let d = grid.len();
    let ind = indicator(partition, d);
    let weights: Vec<T> = row_weights(&ind, params.weighting);
    let l = T::from_usize_lossy(l_s);

    let a = sensing_matrix(l_s, v_b, grid, spacing);
    let sqrt_w: Vec<T> = weights.iter().map(|w| w.sqrt()).collect();
    let mut aw = a.clone();
    for (mut row, &sw) in aw.rows_mut().into_iter().zip(sqrt_w.iter()) {
        row.mapv_inplace(|z| z * sw);
    }
    let sigma2 = spectral_norm_sq(aw.view());
    let mu = if sigma2 > T::zero() { T::lit(params.step_scale) / sigma2 } else { T::zero() };
    let ah = conj_transpose(a.view());

    let target_norm = ind
        .iter()
        .zip(weights.iter())
        .filter(|(&on, _)| on)
        .map(|(_, &w)| w * l * l)
        .sum::<T>()
        .sqrt();

    let mut g = init;
    let mut resp = a.dot(&g);
    let mut best = g.clone();
    let mut best_res = residual(&resp, &ind, &weights, l, params.mask);
    let mut prev = best_res;
    let mut iterations = 0;
    for _ in 0..params.max_iters {
        iterations += 1;
        // weighted error W (b - A g)
        let err: Array1<Complex<T>> = resp
            .iter()
            .zip(ind.iter().zip(weights.iter()))
            .map(|(z, (&on, &w))| {
                let b = if !on {
                    Complex::new(T::zero(), T::zero())
                } else {
                    match params.mask {
                        MaskTarget::Complex => Complex::new(l, T::zero()),
                        MaskTarget::Magnitude => project_unit(*z) * l,
                    }
                };
                (b - z) * w
            })
            .collect();
        let step = ah.dot(&err);
        g = Array1::from_shape_fn(l_s, |n| project_unit(g[n] + step[n] * mu));
        resp = a.dot(&g);
        let r = residual(&resp, &ind, &weights, l, params.mask);
        if r < best_res {
            best_res = r;
            best = g.clone();
        }
        let scale = prev.max(T::min_positive_value());
        if (prev - r).abs() < T::lit(params.tol) * scale {
            break;
        }
        prev = r;
    }
    let normalized_residual = if target_norm > T::zero() { best_res / target_norm } else { best_res };
    Ok(SensingDesign {
        g: best,
        residual: best_res,
        normalized_residual,
        iterations,
    })
}

/// Communication phases for the last `c_s` of `n_axis` elements:
/// `conj(r_c(v_b)) ⊙ r_c(v_u)`.
pub fn design_comm_phases<T: Real>(c_s: usize, n_axis: usize, v_b: T, v_u: T, spacing: T) -> Result<Array1<Complex<T>>> {
    if c_s > n_axis {
        return Err(invalid(format!("{c_s} communication elements exceed the {n_axis}-element axis")));
    }
    let rb = axis_response(v_b, n_axis, spacing);
    let ru = axis_response(v_u, n_axis, spacing);
    let start = n_axis - c_s;
    Ok(Array1::from_shape_fn(c_s, |k| rb[start + k].conj() * ru[start + k]))
}
