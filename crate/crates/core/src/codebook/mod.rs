//! Multi-stage hierarchical RIS codebook.
//!
//! Stage `s` splits the direction-cosine grid of each axis into `2^s`
//! contiguous partitions. Every axis beam `w = [g; h]` uses its first `L_s`
//! elements to illuminate one partition and its last `C_s` elements to serve
//! the UE. Two-dimensional stage beams are Kronecker pairs of a horizontal
//! and a vertical axis beam, indexed row-major: `(a, b) -> (a-1) 2^s + b`.
//!
//! Beam and partition indices in the public API are 1-based.

mod design;
pub mod io;

pub use design::{
    design_comm_phases, design_sensing_phases, indicator, matched_init, sensing_matrix, MaskTarget, MaskWeighting,
    SensingDesign, SolverParams,
};

use ndarray::{s, Array1, Array2, ArrayView1};
use num_complex::Complex;
use rayon::prelude::*;

use crate::channels::{axis_gain, PhaseProfile, Scene};
use crate::error::{check_dim, invalid, Result};
use crate::geometry::axis_response;
use crate::linalg::kron;
use crate::rng::StreamKey;
use crate::scalar::Real;

/// Uniform direction-cosine grid on `[-1, 1]`, endpoints included.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid<T> {
    points: Vec<T>,
}

impl<T: Real> Grid<T> {
    pub fn uniform(d: usize) -> Self {
        let points = match d {
            0 => Vec::new(),
            1 => vec![T::zero()],
            _ => {
                let step = T::lit(2.0) / T::from_usize_lossy(d - 1);
                (0..d).map(|k| -T::one() + step * T::from_usize_lossy(k)).collect()
            }
        };
        Self { points }
    }

    pub fn from_points(points: Vec<T>) -> Result<Self> {
        if points.is_empty() || !points.windows(2).all(|w| w[0] < w[1]) {
            return Err(invalid("grid points must be non-empty and strictly increasing"));
        }
        if points.iter().any(|p| p.abs() > T::one()) {
            return Err(invalid("grid points must lie in [-1, 1]"));
        }
        Ok(Self { points })
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn points(&self) -> &[T] {
        &self.points
    }

    /// Grid value at 1-based index `k`.
    pub fn at(&self, k: usize) -> T {
        self.points[k - 1]
    }

    /// 1-based index of the nearest grid point; lower index on ties.
    pub fn nearest(&self, v: T) -> usize {
        let mut best = 0;
        for (k, &p) in self.points.iter().enumerate() {
            if (p - v).abs() < (self.points[best] - v).abs() {
                best = k;
            }
        }
        best + 1
    }

    /// Centre of the partition's covered interval.
    pub fn partition_midpoint(&self, p: &PartitionSpec) -> T {
        let lo = self.at(p.indices[0]);
        let hi = self.at(*p.indices.last().expect("partitions are non-empty"));
        (lo + hi) / T::lit(2.0)
    }
}

/// Contiguous block of grid indices covered by partition `i` of stage `s`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PartitionSpec {
    pub stage: usize,
    pub index: usize,
    /// 1-based grid indices.
    pub indices: Vec<usize>,
}

impl PartitionSpec {
    pub fn contains(&self, grid_index: usize) -> bool {
        self.indices.first().is_some_and(|&lo| grid_index >= lo) && self.indices.last().is_some_and(|&hi| grid_index <= hi)
    }
}

/// `{D/2^s (i-1) + 1, ..., D/2^s i}`.
pub fn partition_indices(s: usize, i: usize, d: usize) -> Result<PartitionSpec> {
    if s == 0 || s >= usize::BITS as usize || d == 0 {
        return Err(invalid(format!("stage {s} with grid size {d} is out of range")));
    }
    let parts = 1usize << s;
    if parts > d || d % parts != 0 {
        return Err(invalid(format!("grid size {d} cannot be split into {parts} partitions")));
    }
    if i == 0 || i > parts {
        return Err(invalid(format!("partition index {i} outside 1..={parts}")));
    }
    let width = d / parts;
    Ok(PartitionSpec {
        stage: s,
        index: i,
        indices: ((i - 1) * width + 1..=i * width).collect(),
    })
}

/// Partition of stage `s` that contains 1-based grid index `k`.
pub fn partition_of(s: usize, k: usize, d: usize) -> usize {
    (k - 1) / (d >> s) + 1
}

/// One designed axis beam.
#[derive(Debug, Clone, PartialEq)]
pub struct AxisBeam<T> {
    /// `[g; h]`, length `sqrt(N_r)`.
    pub w: Array1<Complex<T>>,
    pub sensing_len: usize,
    pub residual: T,
    pub normalized_residual: T,
    pub iterations: usize,
}

impl<T: Real> AxisBeam<T> {
    pub fn g(&self) -> ArrayView1<'_, Complex<T>> {
        self.w.slice(s![..self.sensing_len])
    }

    pub fn h(&self) -> ArrayView1<'_, Complex<T>> {
        self.w.slice(s![self.sensing_len..])
    }

    pub fn comm_len(&self) -> usize {
        self.w.len() - self.sensing_len
    }

    /// `|r_L^H(v_j) diag(g) r_L(v_b)|` at every grid point.
    pub fn sensing_response(&self, v_b: T, grid: &Grid<T>, spacing: T) -> Vec<T> {
        grid.points().iter().map(|&v| axis_gain(self.g(), v, v_b, spacing).norm()).collect()
    }

    fn from_parts(g: Array1<Complex<T>>, h: Array1<Complex<T>>, residual: T, normalized_residual: T, iterations: usize) -> Self {
        let sensing_len = g.len();
        let mut w = Array1::from_elem(g.len() + h.len(), Complex::new(T::zero(), T::zero()));
        w.slice_mut(s![..sensing_len]).assign(&g);
        w.slice_mut(s![sensing_len..]).assign(&h);
        Self {
            w,
            sensing_len,
            residual,
            normalized_residual,
            iterations,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Axis {
    X,
    Y,
}

/// Axis beams of one stage.
#[derive(Debug, Clone, PartialEq)]
pub struct StageBook<T> {
    pub stage: usize,
    pub sensing_len: usize,
    pub comm_len: usize,
    pub x_beams: Vec<AxisBeam<T>>,
    pub y_beams: Vec<AxisBeam<T>>,
}

impl<T: Real> StageBook<T> {
    pub fn axis_beams(&self, axis: Axis) -> &[AxisBeam<T>] {
        match axis {
            Axis::X => &self.x_beams,
            Axis::Y => &self.y_beams,
        }
    }

    pub fn partitions_per_axis(&self) -> usize {
        self.x_beams.len()
    }

    pub fn n_beams(&self) -> usize {
        self.x_beams.len() * self.y_beams.len()
    }

    /// `(a, b)` of row-major 2-D beam index `k`.
    pub fn split_index(&self, k: usize) -> (usize, usize) {
        let n = self.partitions_per_axis();
        ((k - 1) / n + 1, (k - 1) % n + 1)
    }

    pub fn join_index(&self, a: usize, b: usize) -> usize {
        (a - 1) * self.partitions_per_axis() + b
    }

    /// Phase profile of 2-D beam `k`.
    pub fn beam_profile(&self, k: usize) -> PhaseProfile<T> {
        let (a, b) = self.split_index(k);
        PhaseProfile {
            wx: self.x_beams[a - 1].w.clone(),
            wy: self.y_beams[b - 1].w.clone(),
        }
    }

    /// `W_s^x ⊗ W_s^y`, `N_r x 4^s`.
    pub fn omega_matrix(&self) -> Array2<Complex<T>> {
        assemble_stage(&self.x_beams, &self.y_beams).expect("stage books hold consistent beams")
    }
}

fn beam_matrix<T: Real>(beams: &[AxisBeam<T>]) -> Result<Array2<Complex<T>>> {
    let n = beams.first().map_or(0, |b| b.w.len());
    let mut m = Array2::from_elem((n, beams.len()), Complex::new(T::zero(), T::zero()));
    for (k, b) in beams.iter().enumerate() {
        check_dim("assemble_stage: axis beam length", n, b.w.len())?;
        m.column_mut(k).assign(&b.w);
    }
    Ok(m)
}

/// Stage beams `W_x ⊗ W_y`; column `(a-1) 2^s + b` is `w_{x,a} ⊗ w_{y,b}`.
pub fn assemble_stage<T: Real>(x_beams: &[AxisBeam<T>], y_beams: &[AxisBeam<T>]) -> Result<Array2<Complex<T>>> {
    let wx = beam_matrix(x_beams)?;
    let wy = beam_matrix(y_beams)?;
    check_dim("assemble_stage: axis lengths", wx.nrows(), wy.nrows())?;
    Ok(kron(wx.view(), wy.view()))
}

/// Beam that failed a design-quality check.
#[derive(Debug, Clone, PartialEq)]
pub struct DesignWarning {
    pub stage: usize,
    pub axis: Axis,
    pub index: usize,
    pub normalized_residual: f64,
}

/// Designed codebook plus everything needed to interpret it.
#[derive(Debug, Clone, PartialEq)]
pub struct Codebook<T> {
    pub grid: Grid<T>,
    pub n_axis: usize,
    pub spacing: T,
    pub v_b: (T, T),
    pub v_u: (T, T),
    pub schedule: Vec<usize>,
    pub stages: Vec<StageBook<T>>,
    pub warnings: Vec<DesignWarning>,
}

impl<T: Real> Codebook<T> {
    pub fn n_stages(&self) -> usize {
        self.stages.len()
    }

    pub fn grid_size(&self) -> usize {
        self.grid.len()
    }

    /// 1-based stage access.
    pub fn stage(&self, s: usize) -> &StageBook<T> {
        &self.stages[s - 1]
    }

    pub fn incident(&self, axis: Axis) -> T {
        match axis {
            Axis::X => self.v_b.0,
            Axis::Y => self.v_b.1,
        }
    }

    pub fn total_axis_beams(&self) -> usize {
        self.stages.iter().map(|s| s.x_beams.len() + s.y_beams.len()).sum::<usize>() / 2
    }

    /// Checks the codebook can drive `scene`.
    pub fn check_compatible(&self, scene: &Scene<T>) -> Result<()> {
        check_dim("codebook: RIS axis length", scene.n_axis, self.n_axis)?;
        check_dim("codebook: grid size", scene.grid_size, self.grid.len())?;
        check_dim("codebook: stage count", stage_count(scene.grid_size)?, self.stages.len())
    }
}

/// `log2 D`, requiring a power of two.
pub fn stage_count(d: usize) -> Result<usize> {
    if d < 2 || !d.is_power_of_two() {
        return Err(invalid(format!("grid size {d} must be a power of two >= 2")));
    }
    Ok(d.trailing_zeros() as usize)
}

fn check_schedule(schedule: &[usize], n_stages: usize, n_axis: usize) -> Result<()> {
    if schedule.len() != n_stages {
        return Err(invalid(format!("schedule has {} stages, expected {n_stages}", schedule.len())));
    }
    if schedule.iter().any(|&l| l == 0 || l > n_axis) {
        return Err(invalid(format!("every sensing length must lie in 1..={n_axis}")));
    }
    if schedule.windows(2).any(|w| w[0] > w[1]) {
        return Err(invalid("sensing lengths must be non-decreasing across stages"));
    }
    Ok(())
}

/// Designs every axis beam for `scene` under `schedule` (`L_1..L_{N_s}`).
///
/// Beams are solved in parallel; each draws its warm-start jitter from its own
/// substream of `params.init_seed`, so the output does not depend on thread
/// count.
pub fn build_codebook<T: Real>(scene: &Scene<T>, schedule: &[usize], params: &SolverParams) -> Result<Codebook<T>> {
    params.validate()?;
    let d = scene.grid_size;
    let n_stages = stage_count(d)?;
    check_schedule(schedule, n_stages, scene.n_axis)?;
    let grid = Grid::uniform(d);
    let root = StreamKey::new(params.init_seed);

    let mut jobs = Vec::new();
    for (si, &l_s) in schedule.iter().enumerate() {
        let s = si + 1;
        for (ai, axis) in [Axis::X, Axis::Y].into_iter().enumerate() {
            for i in 1..=(1usize << s) {
                jobs.push((s, l_s, ai, axis, i));
            }
        }
    }
    let designed: Vec<Result<AxisBeam<T>>> = jobs
        .par_iter()
        .map(|&(s, l_s, ai, axis, i)| {
            let (v_b, v_u) = match axis {
                Axis::X => (scene.v_b.vx, scene.v_u.vx),
                Axis::Y => (scene.v_b.vy, scene.v_u.vy),
            };
            let part = partition_indices(s, i, d)?;
            let mut rng = root.child(s as u64).child(ai as u64).child(i as u64).rng();
            let init = matched_init(l_s, v_b, grid.partition_midpoint(&part), scene.spacing, params.init_perturbation, &mut rng);
            let out = design_sensing_phases(&part, l_s, v_b, &grid, scene.spacing, params, init)?;
            let h = design_comm_phases(scene.n_axis - l_s, scene.n_axis, v_b, v_u, scene.spacing)?;
            Ok(AxisBeam::from_parts(out.g, h, out.residual, out.normalized_residual, out.iterations))
        })
        .collect();

    let mut designed = designed.into_iter();
    let mut stages = Vec::with_capacity(n_stages);
    let mut warnings = Vec::new();
    for (si, &l_s) in schedule.iter().enumerate() {
        let s = si + 1;
        let mut per_axis = [Vec::new(), Vec::new()];
        for (ai, axis) in [Axis::X, Axis::Y].into_iter().enumerate() {
            for i in 1..=(1usize << s) {
                let beam = designed.next().expect("one design per job")?;
                let nr = beam.normalized_residual.to_f64_lossy();
                if nr > params.residual_ceiling {
                    warnings.push(DesignWarning {
                        stage: s,
                        axis,
                        index: i,
                        normalized_residual: nr,
                    });
                }
                per_axis[ai].push(beam);
            }
        }
        let [x_beams, y_beams] = per_axis;
        stages.push(StageBook {
            stage: s,
            sensing_len: l_s,
            comm_len: scene.n_axis - l_s,
            x_beams,
            y_beams,
        });
    }
    Ok(Codebook {
        grid,
        n_axis: scene.n_axis,
        spacing: scene.spacing,
        v_b: (scene.v_b.vx, scene.v_b.vy),
        v_u: (scene.v_u.vx, scene.v_u.vy),
        schedule: schedule.to_vec(),
        stages,
        warnings,
    })
}

/// Reference codebook of closed-form beams. The sensing part is matched to
/// each partition midpoint; the remaining elements reflect toward
/// `v = 1 / (2 spacing)`, which is invisible for `spacing < 0.5`, so they add
/// nothing to the echo from any grid direction. Useful as noiseless ground
/// truth.
pub fn oracle_codebook<T: Real>(scene: &Scene<T>, schedule: &[usize]) -> Result<Codebook<T>> {
    let d = scene.grid_size;
    let n_stages = stage_count(d)?;
    check_schedule(schedule, n_stages, scene.n_axis)?;
    let grid = Grid::uniform(d);
    let n = scene.n_axis;
    let mut stages = Vec::with_capacity(n_stages);
    for (si, &l_s) in schedule.iter().enumerate() {
        let s = si + 1;
        let mut per_axis = [Vec::new(), Vec::new()];
        for (ai, v_b) in [scene.v_b.vx, scene.v_b.vy].into_iter().enumerate() {
            let rb = axis_response(v_b, n, scene.spacing);
            for i in 1..=(1usize << s) {
                let part = partition_indices(s, i, d)?;
                let rm = axis_response(grid.partition_midpoint(&part), n, scene.spacing);
                let w = Array1::from_shape_fn(n, |k| {
                    if k < l_s {
                        rb[k].conj() * rm[k]
                    } else {
                        let sign = if k % 2 == 0 { T::one() } else { -T::one() };
                        rb[k].conj() * sign
                    }
                });
                per_axis[ai].push(AxisBeam {
                    w,
                    sensing_len: l_s,
                    residual: T::zero(),
                    normalized_residual: T::zero(),
                    iterations: 0,
                });
            }
        }
        let [x_beams, y_beams] = per_axis;
        stages.push(StageBook {
            stage: s,
            sensing_len: l_s,
            comm_len: n - l_s,
            x_beams,
            y_beams,
        });
    }
    Ok(Codebook {
        grid,
        n_axis: n,
        spacing: scene.spacing,
        v_b: (scene.v_b.vx, scene.v_b.vy),
        v_u: (scene.v_u.vx, scene.v_u.vy),
        schedule: schedule.to_vec(),
        stages,
        warnings: Vec::new(),
    })
}

/// Full-aperture pencil beam `conj(r(v_b)) ⊙ r(v)` for one axis.
pub fn pencil_beam<T: Real>(v_b: T, v: T, n_axis: usize, spacing: T) -> Array1<Complex<T>> {
    let rb = axis_response(v_b, n_axis, spacing);
    let r = axis_response(v, n_axis, spacing);
    Array1::from_shape_fn(n_axis, |k| rb[k].conj() * r[k])
}

/// Design-quality figures of one axis beam, normalized by `L_s`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BeamQuality {
    pub on_mean: f64,
    pub off_mean: f64,
    pub normalized_residual: f64,
}

impl BeamQuality {
    pub fn passes(&self, gates: &QualityGates) -> bool {
        self.on_mean >= gates.min_on && self.off_mean <= gates.max_off
    }
}

/// Mask-fidelity thresholds, as fractions of `L_s`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QualityGates {
    pub min_on: f64,
    pub max_off: f64,
}

impl Default for QualityGates {
    fn default() -> Self {
        Self { min_on: 0.7, max_off: 0.25 }
    }
}

/// On/off-partition mean response of beam `i` at stage `s` on `axis`.
pub fn beam_quality<T: Real>(cb: &Codebook<T>, s: usize, axis: Axis, i: usize) -> Result<BeamQuality> {
    let stage = cb.stage(s);
    let beam = &stage.axis_beams(axis)[i - 1];
    let part = partition_indices(s, i, cb.grid.len())?;
    let resp = beam.sensing_response(cb.incident(axis), &cb.grid, cb.spacing);
    let l = stage.sensing_len as f64;
    let (mut on, mut n_on, mut off, mut n_off) = (0.0, 0usize, 0.0, 0usize);
    for (k, r) in resp.iter().enumerate() {
        if part.contains(k + 1) {
            on += r.to_f64_lossy();
            n_on += 1;
        } else {
            off += r.to_f64_lossy();
            n_off += 1;
        }
    }
    Ok(BeamQuality {
        on_mean: on / n_on.max(1) as f64 / l,
        off_mean: if n_off == 0 { 0.0 } else { off / n_off as f64 / l },
        normalized_residual: beam.normalized_residual.to_f64_lossy(),
    })
}

/// Width (in direction cosine) of the contiguous main lobe of the sensing
/// pattern where power stays at or above half its peak, on a grid of
/// `resolution` points over `[-1, 1]`.
pub fn half_power_width<T: Real>(beam: &AxisBeam<T>, v_b: T, spacing: T, resolution: usize) -> f64 {
    let fine = Grid::<T>::uniform(resolution.max(2));
    let p: Vec<f64> = beam
        .sensing_response(v_b, &fine, spacing)
        .into_iter()
        .map(|r| r.to_f64_lossy().powi(2))
        .collect();
    let (peak_idx, peak) = p
        .iter()
        .enumerate()
        .fold((0, f64::MIN), |acc, (k, &v)| if v > acc.1 { (k, v) } else { acc });
    let half = peak / 2.0;
    let mut lo = peak_idx;
    while lo > 0 && p[lo - 1] >= half {
        lo -= 1;
    }
    let mut hi = peak_idx;
    while hi + 1 < p.len() && p[hi + 1] >= half {
        hi += 1;
    }
    let step = 2.0 / (fine.len() - 1) as f64;
    (hi - lo + 1) as f64 * step
}

/// Mean half-power width over all beams of a stage (both axes).
pub fn stage_half_power_width<T: Real>(cb: &Codebook<T>, s: usize, resolution: usize) -> f64 {
    let stage = cb.stage(s);
    let mut total = 0.0;
    let mut count = 0;
    for axis in [Axis::X, Axis::Y] {
        for beam in stage.axis_beams(axis) {
            total += half_power_width(beam, cb.incident(axis), cb.spacing, resolution);
            count += 1;
        }
    }
    total / count as f64
}

/// One row of beampattern data: sensing-part and full-aperture magnitude of
/// an axis beam toward one grid point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PatternSample {
    pub stage: usize,
    pub axis: Axis,
    pub beam: usize,
    pub v: f64,
    pub sensing: f64,
    pub full: f64,
}

/// Axis-beam response magnitudes over `points` evenly spaced cosines.
pub fn beampattern<T: Real>(cb: &Codebook<T>, points: usize) -> Vec<PatternSample> {
    let fine = Grid::<T>::uniform(points.max(2));
    let mut out = Vec::new();
    for stage in &cb.stages {
        for axis in [Axis::X, Axis::Y] {
            let v_b = cb.incident(axis);
            for (bi, beam) in stage.axis_beams(axis).iter().enumerate() {
                for &v in fine.points() {
                    out.push(PatternSample {
                        stage: stage.stage,
                        axis,
                        beam: bi + 1,
                        v: v.to_f64_lossy(),
                        sensing: axis_gain(beam.g(), v, v_b, cb.spacing).norm().to_f64_lossy(),
                        full: axis_gain(beam.w.view(), v, v_b, cb.spacing).norm().to_f64_lossy(),
                    });
                }
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channels::ScenarioConfig;

    fn scene(n_axis: usize, d: usize) -> Scene<f64> {
        let cfg = ScenarioConfig {
            n_ris: n_axis * n_axis,
            grid_size: d,
            ..ScenarioConfig::reference()
        };
        Scene::from_config(&cfg).unwrap()
    }

    #[test]
    fn partition_examples() {
        assert_eq!(partition_indices(1, 1, 32).unwrap().indices, (1..=16).collect::<Vec<_>>());
        assert_eq!(partition_indices(5, 7, 32).unwrap().indices, vec![7]);
        for s in 1..=5 {
            let mut all: Vec<usize> = (1..=1 << s).flat_map(|i| partition_indices(s, i, 32).unwrap().indices).collect();
            all.sort_unstable();
            assert_eq!(all, (1..=32).collect::<Vec<_>>());
        }
        assert!(partition_indices(1, 3, 32).is_err());
        assert!(partition_indices(6, 1, 32).is_err());
        assert!(partition_indices(1, 0, 32).is_err());
        assert_eq!(partition_of(2, 9, 32), 2);
    }

    #[test]
    fn grid_is_inclusive_linspace() {
        let g = Grid::<f64>::uniform(5);
        assert_eq!(g.points(), &[-1.0, -0.5, 0.0, 0.5, 1.0]);
        assert_eq!(g.nearest(0.26), 4);
        assert_eq!(g.nearest(0.25), 3);
    }

    #[test]
    fn stage_columns_follow_row_major_pairs() {
        let sc = scene(8, 8);
        let cb = oracle_codebook(&sc, &[2, 4, 8]).unwrap();
        let st = cb.stage(2);
        let om = st.omega_matrix();
        assert_eq!(om.dim(), (64, 16));
        for k in 1..=16 {
            let expected = st.beam_profile(k).omega();
            assert!(om.column(k - 1).iter().zip(expected.iter()).all(|(a, b)| (a - b).norm() < 1e-14));
        }
        assert_eq!(st.split_index(11), (3, 3));
        assert_eq!(st.join_index(3, 3), 11);
        assert!(om.iter().all(|z| (z.norm() - 1.0).abs() < 1e-12));
    }

    #[test]
    fn build_counts_and_determinism() {
        let sc = scene(16, 16);
        let cb = build_codebook(&sc, &[4, 8, 8, 16], &SolverParams::default()).unwrap();
        assert_eq!(cb.n_stages(), 4);
        assert_eq!(cb.total_axis_beams(), 2 + 4 + 8 + 16);
        for (s, st) in cb.stages.iter().enumerate() {
            assert_eq!(st.x_beams.len(), 1 << (s + 1));
            assert_eq!(st.sensing_len + st.comm_len, 16);
            for b in st.x_beams.iter().chain(&st.y_beams) {
                assert!(b.w.iter().all(|z| (z.norm() - 1.0).abs() < 1e-12));
            }
        }
        let again = build_codebook(&sc, &[4, 8, 8, 16], &SolverParams::default()).unwrap();
        assert_eq!(cb, again);
    }

    #[test]
    fn schedule_validation() {
        let sc = scene(16, 16);
        assert!(build_codebook(&sc, &[4, 8, 8], &SolverParams::default()).is_err());
        assert!(build_codebook(&sc, &[4, 8, 4, 8], &SolverParams::default()).is_err());
        assert!(build_codebook(&sc, &[4, 8, 8, 17], &SolverParams::default()).is_err());
    }

    #[test]
    fn half_power_width_of_pencil_matches_aperture() {
        let beam = AxisBeam {
            w: pencil_beam(0.1, 0.3, 32, 0.25),
            sensing_len: 32,
            residual: 0.0,
            normalized_residual: 0.0,
            iterations: 0,
        };
        // aperture 32 * 0.25 wavelengths: -3 dB width ~ 0.886 / 8
        let w = half_power_width(&beam, 0.1, 0.25, 20001);
        assert!((w - 0.886 / 8.0).abs() < 0.01, "{w}");
    }
}
