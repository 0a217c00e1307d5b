//! Adaptive Fourier transforms: 1D in the periodic direction, per-mode
//! 2D transforms in the free directions with mode-dependent
//! zero-padding.
//!
//! The scaled Fourier-space sum needs very different `kappa`-space
//! resolutions per `k3` mode. The Green's function decays like
//! `1/(kappa^2 + k3^2)` for `k3 != 0`, so high modes are smooth and the
//! plain grid resolution suffices; near `k3 = 0` it sharpens, and the
//! `k3 = 0` plane holds a truncated kernel whose `log`-like behavior
//! demands the finest sampling. Ordinary upsampled 3D transforms would
//! pay that finest resolution everywhere. Instead, after the 1D `z`
//! transform splits the grid into `M` planes, each plane is
//! zero-padded in real space by its own factor: `s0` for the zero
//! mode, `sl` for the `2 nl` low modes in the local pad set, and none
//! for the rest. Zero-padding refines the `kappa` sampling to
//! `2 pi / (s Ltilde)` without altering shared bins.
//!
//! No scaling is applied on the forward side; the inverse applies the
//! standard `1/n` conventions (`1/side^2` per plane, `1/M` along `z`).
//! The trapezoidal `h^3` quadrature factor and the `1/(2 pi)^2 / L3`
//! inverse-transform measure cancel against them exactly, so the
//! round trip is the identity and all physical prefactors live in the
//! spread and gather steps.
//!
//! Every 1D transform of length `n` adds `round(n log2 n)` to a global
//! operation counter, giving a deterministic cost model that the
//! adaptive-versus-plain comparisons assert against.

use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;

use rayon::prelude::*;
use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};

use crate::error::{Result, SeError};
use crate::estimate::SolverParams;
use crate::gridding::GridField;
use crate::real::Real;

/// Global FFT operation counter (units of `round(n log2 n)` per
/// length-`n` transform). Shared across scalar types; reset it around
/// the region being measured.
static FFT_OPS: AtomicU64 = AtomicU64::new(0);

/// Resets the FFT operation counter to zero.
pub fn reset_fft_ops() {
    FFT_OPS.store(0, Ordering::Relaxed);
}

/// Current value of the FFT operation counter.
pub fn fft_ops() -> u64 {
    FFT_OPS.load(Ordering::Relaxed)
}

/// Cost charged for one length-`n` transform.
fn cost1(n: usize) -> u64 {
    (n as f64 * (n as f64).log2()).round() as u64
}

fn charge(count: usize, n: usize) {
    FFT_OPS.fetch_add(count as u64 * cost1(n), Ordering::Relaxed);
}

/// Signed wave-number index of FFT bin `b` out of `n`:
/// `0, 1, .., n/2-1, -n/2, .., -1`.
pub fn signed_index(b: usize, n: usize) -> i64 {
    if b < n.div_ceil(2) {
        b as i64
    } else {
        b as i64 - n as i64
    }
}

/// Partition of the `z` mode indices by oversampling treatment.
#[derive(Clone, Debug)]
pub struct PadSets {
    /// Local pad set: signed indices with `0 < |n| <= nl`.
    pub local: Vec<i64>,
    /// Plain set: `nl < |n| <= M/2`, including the unpaired `-M/2`.
    pub plain: Vec<i64>,
}

/// Splits the `M` mode indices into the zero mode, the local pad set
/// `I` and the plain set `J`.
pub fn pad_sets(m: usize, nl: usize) -> Result<PadSets> {
    if m < 2 || m % 2 != 0 {
        return Err(SeError::InvalidParams(format!(
            "mode count must be even and positive, got {m}"
        )));
    }
    if nl > m / 2 - 1 {
        return Err(SeError::InvalidParams(format!(
            "nl = {nl} out of range for M = {m}"
        )));
    }
    let mut local = Vec::with_capacity(2 * nl);
    for n in 1..=nl as i64 {
        local.push(n);
        local.push(-n);
    }
    let mut plain = Vec::with_capacity(m - 1 - 2 * nl);
    for n in nl as i64 + 1..m as i64 / 2 {
        plain.push(n);
        plain.push(-n);
    }
    plain.push(-(m as i64) / 2);
    Ok(PadSets { local, plain })
}

/// One `z` mode's 2D spectral plane.
#[derive(Clone, Debug)]
pub struct Plane<T> {
    /// Signed `z` mode index `n`, wave number `k3 = 2 pi n / L3`.
    pub k3_index: i64,
    /// Side length of the square bin array (`s * Mtilde`).
    pub side: usize,
    /// Row-major bins, `kappa_2` slow, `kappa_1` fast.
    pub data: Vec<Complex<T>>,
}

impl<T: Real> Plane<T> {
    /// Wave number of bin index `j` along either free axis:
    /// `2 pi signed(j) / (side h)`.
    pub fn kappa(&self, j: usize, h: T) -> T {
        T::of(2.0) * T::PI() * T::of(signed_index(j, self.side) as f64)
            / (T::of_usize(self.side) * h)
    }
}

/// The transformed grid: one plane per `z` mode, each with its own
/// resolution.
#[derive(Clone, Debug)]
pub struct SpectralField<T> {
    /// Planes indexed by the `z` FFT bin (`planes[b].k3_index` is the
    /// signed index of bin `b`).
    pub planes: Vec<Plane<T>>,
    /// Nodes along `z`.
    pub m: usize,
    /// Unpadded plane side (`M + P`).
    pub mtilde: usize,
    /// Grid spacing.
    pub h: T,
}

impl<T: Real> SpectralField<T> {
    /// Wave number `k3` of plane `b`.
    pub fn k3(&self, b: usize) -> T {
        T::of(2.0) * T::PI() * T::of(self.planes[b].k3_index as f64)
            / (T::of_usize(self.m) * self.h)
    }

    fn validate(&self) -> Result<()> {
        if self.planes.len() != self.m {
            return Err(SeError::InvalidParams(format!(
                "{} planes for M = {}",
                self.planes.len(),
                self.m
            )));
        }
        for (b, plane) in self.planes.iter().enumerate() {
            if plane.k3_index != signed_index(b, self.m) {
                return Err(SeError::InvalidParams(format!(
                    "plane {b} claims mode {}",
                    plane.k3_index
                )));
            }
            if plane.side < self.mtilde || plane.data.len() != plane.side * plane.side {
                return Err(SeError::InvalidParams(format!(
                    "plane {b} has side {} and {} bins",
                    plane.side,
                    plane.data.len()
                )));
            }
        }
        Ok(())
    }
}

/// Plane side lengths for the adaptive inventory of `params`.
fn adaptive_sides<T: Real>(params: &SolverParams<T>) -> Vec<usize> {
    let m = params.m;
    (0..m)
        .map(|b| {
            let n = signed_index(b, m).unsigned_abs() as usize;
            if n == 0 {
                params.s0_planes()
            } else if n <= params.nl {
                params.sl_planes()
            } else {
                params.mtilde()
            }
        })
        .collect()
}

/// Uniform plane sides `round(s * Mtilde)` for every mode.
fn uniform_sides<T: Real>(params: &SolverParams<T>, s: T) -> Result<Vec<usize>> {
    if !(s >= T::one()) {
        return Err(SeError::InvalidParams(format!(
            "oversampling factor must be at least 1, got {s}"
        )));
    }
    let side = (s * T::of_usize(params.mtilde())).as_f64().round() as usize;
    Ok(vec![side; params.m])
}

/// Adaptive forward transform (zero-mode pad `s0`, local pad `sl`,
/// plain elsewhere).
pub fn aft_forward<T: Real>(
    field: &GridField<T>,
    params: &SolverParams<T>,
) -> Result<SpectralField<T>> {
    forward_with_sides(field, params, &adaptive_sides(params))
}

/// Forward transform with one oversampling factor `s` for every mode.
/// `s = 1` is the plain mixed discrete transform.
pub fn aft_forward_uniform<T: Real>(
    field: &GridField<T>,
    params: &SolverParams<T>,
    s: T,
) -> Result<SpectralField<T>> {
    forward_with_sides(field, params, &uniform_sides(params, s)?)
}

fn forward_with_sides<T: Real>(
    field: &GridField<T>,
    params: &SolverParams<T>,
    sides: &[usize],
) -> Result<SpectralField<T>> {
    let m = params.m;
    let mtilde = params.mtilde();
    if field.mz != m || field.mxy != mtilde {
        return Err(SeError::InvalidParams(format!(
            "field of {}x{}x{} nodes does not match params (M = {m}, Mtilde = {mtilde})",
            field.mz, field.mxy, field.mxy
        )));
    }
    let mut planner = FftPlanner::<T>::new();
    let zfft = planner.plan_fft_forward(m);
    let plane_ffts: Vec<Arc<dyn Fft<T>>> = {
        let mut sizes: Vec<usize> = sides.to_vec();
        sizes.sort_unstable();
        sizes.dedup();
        sizes
            .iter()
            .map(|&n| planner.plan_fft_forward(n))
            .collect()
    };
    let fft_for = |side: usize| -> Arc<dyn Fft<T>> {
        plane_ffts
            .iter()
            .find(|f| f.len() == side)
            .expect("plan exists for every side")
            .clone()
    };

    // 1D transforms along z, one per (x, y) column
    let strips: Vec<Vec<Complex<T>>> = (0..mtilde)
        .into_par_iter()
        .map(|iy| {
            let mut out = vec![Complex::new(T::zero(), T::zero()); m * mtilde];
            let mut col = vec![Complex::new(T::zero(), T::zero()); m];
            for ix in 0..mtilde {
                for (iz, c) in col.iter_mut().enumerate() {
                    *c = Complex::new(field.at(iz, iy, ix), T::zero());
                }
                zfft.process(&mut col);
                for (b, &c) in col.iter().enumerate() {
                    out[b * mtilde + ix] = c;
                }
            }
            out
        })
        .collect();
    charge(mtilde * mtilde, m);

    // per-mode zero-padded 2D transforms
    let planes: Vec<Plane<T>> = (0..m)
        .into_par_iter()
        .map(|b| {
            let side = sides[b];
            let mut data = vec![Complex::new(T::zero(), T::zero()); side * side];
            for (iy, strip) in strips.iter().enumerate() {
                data[iy * side..iy * side + mtilde]
                    .copy_from_slice(&strip[b * mtilde..(b + 1) * mtilde]);
            }
            fft2d(&mut data, side, &fft_for(side));
            Plane {
                k3_index: signed_index(b, m),
                side,
                data,
            }
        })
        .collect();

    Ok(SpectralField {
        planes,
        m,
        mtilde,
        h: params.h(),
    })
}

/// Inverse of [`aft_forward`]: per-plane 2D inverse transforms,
/// restriction to the leading `Mtilde x Mtilde` block, then the `z`
/// inverse. Accepts any self-consistent plane inventory.
pub fn aft_inverse<T: Real>(
    spec: &SpectralField<T>,
    params: &SolverParams<T>,
) -> Result<GridField<T>> {
    let m = params.m;
    let mtilde = params.mtilde();
    if spec.m != m || spec.mtilde != mtilde {
        return Err(SeError::InvalidParams(format!(
            "spectral field for M = {}, Mtilde = {} does not match params",
            spec.m, spec.mtilde
        )));
    }
    spec.validate()?;
    let mut planner = FftPlanner::<T>::new();
    let zfft = planner.plan_fft_inverse(m);
    let plane_ffts: Vec<Arc<dyn Fft<T>>> = {
        let mut sizes: Vec<usize> = spec.planes.iter().map(|p| p.side).collect();
        sizes.sort_unstable();
        sizes.dedup();
        sizes
            .iter()
            .map(|&n| planner.plan_fft_inverse(n))
            .collect()
    };

    // per-plane inverse, normalized, restricted to Mtilde x Mtilde
    let restricted: Vec<Vec<Complex<T>>> = spec
        .planes
        .par_iter()
        .map(|plane| {
            let side = plane.side;
            let fft = plane_ffts
                .iter()
                .find(|f| f.len() == side)
                .expect("plan exists")
                .clone();
            let mut data = plane.data.clone();
            fft2d(&mut data, side, &fft);
            let norm = T::one() / T::of_usize(side * side);
            let mut out = vec![Complex::new(T::zero(), T::zero()); mtilde * mtilde];
            for iy in 0..mtilde {
                for ix in 0..mtilde {
                    out[iy * mtilde + ix] = data[iy * side + ix] * norm;
                }
            }
            out
        })
        .collect();

    // inverse along z, normalized by 1/M; keep the real part
    let strips: Vec<Vec<T>> = (0..mtilde)
        .into_par_iter()
        .map(|iy| {
            let mut out = vec![T::zero(); m * mtilde];
            let mut col = vec![Complex::new(T::zero(), T::zero()); m];
            let norm = T::one() / T::of_usize(m);
            for ix in 0..mtilde {
                for (b, c) in col.iter_mut().enumerate() {
                    *c = restricted[b][iy * mtilde + ix];
                }
                zfft.process(&mut col);
                for (iz, &c) in col.iter().enumerate() {
                    out[iz * mtilde + ix] = c.re * norm;
                }
            }
            out
        })
        .collect();
    charge(mtilde * mtilde, m);

    let mut grid = GridField {
        values: vec![T::zero(); m * mtilde * mtilde],
        mz: m,
        mxy: mtilde,
        h: params.h(),
    };
    for (iy, strip) in strips.iter().enumerate() {
        for iz in 0..m {
            for ix in 0..mtilde {
                let v = strip[iz * mtilde + ix];
                let idx = grid.idx(iz, iy, ix);
                grid.values[idx] = v;
            }
        }
    }
    Ok(grid)
}

/// In-place 2D transform of a `side x side` row-major array: rows in
/// one batched pass, columns through a scratch vector.
fn fft2d<T: Real>(data: &mut [Complex<T>], side: usize, fft: &Arc<dyn Fft<T>>) {
    debug_assert_eq!(data.len(), side * side);
    fft.process(data);
    let mut col = vec![Complex::new(T::zero(), T::zero()); side];
    for c in 0..side {
        for r in 0..side {
            col[r] = data[r * side + c];
        }
        fft.process(&mut col);
        for r in 0..side {
            data[r * side + c] = col[r];
        }
    }
    charge(2 * side, side);
}

/// Expected [`fft_ops`] charge of one forward or inverse adaptive
/// transform under `params`.
pub fn op_model_adaptive<T: Real>(params: &SolverParams<T>) -> u64 {
    op_model(params, &adaptive_sides(params))
}

/// Expected [`fft_ops`] charge of one forward or inverse transform
/// with uniform oversampling `s`.
pub fn op_model_uniform<T: Real>(params: &SolverParams<T>, s: T) -> Result<u64> {
    Ok(op_model(params, &uniform_sides(params, s)?))
}

fn op_model<T: Real>(params: &SolverParams<T>, sides: &[usize]) -> u64 {
    let mtilde = params.mtilde() as u64;
    let mut ops = mtilde * mtilde * cost1(params.m);
    for &side in sides {
        ops += 2 * side as u64 * cost1(side);
    }
    ops
}
