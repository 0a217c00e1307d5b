//! Fast Gaussian gridding: spreading charges to a grid and gathering
//! potentials and forces back.
//!
//! The Fourier-space part of the split replaces each point charge by a
//! Gaussian of shape parameter `eta`, sampled on a uniform grid with
//! spacing `h`. Each Gaussian is truncated to a `P x P x P` block of
//! nodes around the particle: periodic (wrapped) in `z`, and contained
//! in an extended domain `[0, Ltilde)` in the free directions, which is
//! padded by exactly the support width `P h` so no block ever leaves it.
//!
//! Evaluating `P^3` exponentials per particle would dominate the cost,
//! so the separable weights use the fast Gaussian gridding
//! factorization: with `delta` the fractional offset of the particle
//! from its anchor node and `alpha = 2 xi^2 / eta`,
//!
//! ```text
//! exp(-alpha h^2 (l - delta)^2)
//!     = exp(-alpha h^2 l^2) * [exp(2 alpha h^2 delta)]^l
//!       * exp(-alpha h^2 delta^2)
//!     = f1(l) * f2^l * f3
//! ```
//!
//! where `f1` is particle independent and only three exponentials are
//! evaluated per particle and direction. The choice of `eta` keeps
//! `alpha h^2 = 2 c^2 pi / P`, so `f2^l` stays bounded by `e^{c^2 pi}`
//! across the stencil and the factorization is numerically benign.
//!
//! Gathering is the adjoint operation: the trapezoidal-rule integral of
//! the processed grid against the same truncated Gaussian. The force
//! gather differentiates the Gaussian instead, picking up a factor
//! `(4 xi^2 / eta) (x_m - x_grid)` under the sum, with the displacement
//! taken minimum-image in `z`.

use rayon::prelude::*;

use crate::error::{Result, SeError};
use crate::estimate::{SolverParams, SHAPE_C};
use crate::model::ParticleSystem;
use crate::real::Real;
use crate::vec3::Vec3;

/// Particles per parallel spreading chunk. Fixed so the grouping of
/// partial grids, and therefore the floating-point result, does not
/// depend on the thread count.
const SPREAD_CHUNK: usize = 256;

/// Uniform real-space grid over the extended domain.
///
/// Values are stored `[z][y][x]` with `x` fastest, one contiguous
/// `mxy * mxy` plane per `z` index: `z` is the periodic direction with
/// `mz = M` nodes, the free directions carry `mxy = M + P` nodes over
/// `[0, Ltilde)`.
#[derive(Clone, Debug)]
pub struct GridField<T> {
    pub values: Vec<T>,
    /// Nodes along the periodic direction (`M`).
    pub mz: usize,
    /// Nodes along each free direction (`M + P`).
    pub mxy: usize,
    /// Grid spacing `h = L / M = Ltilde / (M + P)`.
    pub h: T,
}

impl<T: Real> GridField<T> {
    /// Zero-initialized grid matching `params`.
    pub fn zeros(params: &SolverParams<T>) -> Self {
        let mz = params.m;
        let mxy = params.mtilde();
        GridField {
            values: vec![T::zero(); mz * mxy * mxy],
            mz,
            mxy,
            h: params.h(),
        }
    }

    /// Flat index of node `(iz, iy, ix)`.
    #[inline]
    pub fn idx(&self, iz: usize, iy: usize, ix: usize) -> usize {
        (iz * self.mxy + iy) * self.mxy + ix
    }

    /// Value at node `(iz, iy, ix)`.
    #[inline]
    pub fn at(&self, iz: usize, iy: usize, ix: usize) -> T {
        self.values[self.idx(iz, iy, ix)]
    }
}

/// Shape parameter of the gridded Gaussians:
/// `eta = P (xi h)^2 / (c^2 pi)` with `c = 0.95`.
///
/// Equal to `(2 w xi / m)^2` for the window half-width `w = P h / 2`
/// and shape constant `m = c sqrt(pi P)`.
pub fn compute_eta<T: Real>(p: usize, xi: T, h: T) -> T {
    let c = T::of(SHAPE_C);
    T::of_usize(p) * (xi * h) * (xi * h) / (c * c * T::PI())
}

/// Separable truncated-Gaussian stencil of one particle.
///
/// Holds, per direction, the `P` node indices (wrapped in `z`, in-range
/// in `x`/`y` by construction), the FGG weights, and the signed
/// displacements `x - x_grid` used by the force gather.
#[derive(Clone, Debug)]
pub struct GaussianStencil<T> {
    /// First node index in `x` (unwrapped, block is contiguous).
    pub ix0: usize,
    /// First node index in `y`.
    pub iy0: usize,
    /// Wrapped node indices in `z`.
    pub zidx: Vec<usize>,
    /// Weights per direction, length `P` each.
    pub wx: Vec<T>,
    pub wy: Vec<T>,
    pub wz: Vec<T>,
    /// Displacements `x - x_grid` per direction, length `P` each.
    pub dx: Vec<T>,
    pub dy: Vec<T>,
    pub dz: Vec<T>,
}

/// One direction of the FGG factorization: weights and displacements
/// for offsets `l = -P/2+1 ..= P/2` around the anchor `floor(x/h)`.
fn axis_weights<T: Real>(
    x_over_h: T,
    h: T,
    alpha_h2: T,
    f1: &[T],
) -> (i64, Vec<T>, Vec<T>) {
    let p = f1.len();
    let anchor = x_over_h.floor();
    let delta = x_over_h - anchor;
    let f2 = (T::of(2.0) * alpha_h2 * delta).exp();
    let f3 = (-alpha_h2 * delta * delta).exp();
    let lo = -(p as i64) / 2 + 1;
    // f2^lo by repeated multiplication; exponents stay within
    // +-c^2 pi so neither overflow nor underflow is possible
    let mut f2_pow = T::one();
    for _ in 0..(-lo) {
        f2_pow /= f2;
    }
    let mut weights = Vec::with_capacity(p);
    let mut disp = Vec::with_capacity(p);
    for (i, &f1v) in f1.iter().enumerate() {
        let l = lo + i as i64;
        weights.push(f3 * f1v * f2_pow);
        disp.push((delta - T::of(l as f64)) * h);
        f2_pow *= f2;
    }
    (anchor.as_f64() as i64 + lo, weights, disp)
}

impl<T: Real> GaussianStencil<T> {
    /// Builds the stencil of a particle at `pos` under `params`.
    ///
    /// Fails if the free-direction block leaves the extended domain,
    /// which signals params inconsistent with the particle's box.
    pub fn build(pos: Vec3<T>, params: &SolverParams<T>, f1: &[T]) -> Result<Self> {
        let h = params.h();
        let w = params.w();
        let p = params.p;
        let mz = params.m;
        let mxy = params.mtilde();
        let alpha_h2 = T::of(2.0) * params.xi * params.xi / params.eta() * h * h;

        let (x0, wx, dx) = axis_weights((pos.x + w) / h, h, alpha_h2, f1);
        let (y0, wy, dy) = axis_weights((pos.y + w) / h, h, alpha_h2, f1);
        let (z0, wz, dz) = axis_weights(pos.z / h, h, alpha_h2, f1);

        for (name, start) in [("x", x0), ("y", y0)] {
            if start < 0 || start + p as i64 > mxy as i64 {
                return Err(SeError::InvalidParams(format!(
                    "{name}-stencil [{start}, {}) leaves the extended domain of {mxy} nodes; \
                     params do not match the particle box",
                    start + p as i64
                )));
            }
        }
        let zidx = (0..p)
            .map(|i| (z0 + i as i64).rem_euclid(mz as i64) as usize)
            .collect();
        Ok(GaussianStencil {
            ix0: x0 as usize,
            iy0: y0 as usize,
            zidx,
            wx,
            wy,
            wz,
            dx,
            dy,
            dz,
        })
    }
}

/// Particle-independent axis factor `f1(l) = exp(-alpha h^2 l^2)`.
fn f1_table<T: Real>(params: &SolverParams<T>) -> Vec<T> {
    let h = params.h();
    let alpha_h2 = T::of(2.0) * params.xi * params.xi / params.eta() * h * h;
    let p = params.p as i64;
    (-p / 2 + 1..=p / 2)
        .map(|l| (-alpha_h2 * T::of(l as f64) * T::of(l as f64)).exp())
        .collect()
}

fn check_geometry<T: Real>(system: &ParticleSystem<T>, params: &SolverParams<T>) -> Result<()> {
    for l in system.boxd() {
        if (l - params.l).abs() > T::of(1e-12) * params.l {
            return Err(SeError::InvalidParams(format!(
                "params box {} does not match the system box {l}",
                params.l
            )));
        }
    }
    Ok(())
}

/// Spreads all charges onto the grid:
/// `H = (2 xi^2 / (pi eta))^{3/2} sum_n q_n (truncated Gaussian at x_n)`.
pub fn spread<T: Real>(system: &ParticleSystem<T>, params: &SolverParams<T>) -> Result<GridField<T>> {
    check_geometry(system, params)?;
    let f1 = f1_table(params);
    let pref = gaussian_norm(params);
    let charges = system.charges();
    let positions = system.positions();

    // per-chunk partial grids merged in fixed chunk order: bitwise
    // deterministic for any thread count
    let partials: Vec<Result<GridField<T>>> = positions
        .par_chunks(SPREAD_CHUNK)
        .zip(charges.par_chunks(SPREAD_CHUNK))
        .map(|(pos_chunk, q_chunk)| {
            let mut grid = GridField::zeros(params);
            for (&pos, &q) in pos_chunk.iter().zip(q_chunk) {
                let st = GaussianStencil::build(pos, params, &f1)?;
                let scale = pref * q;
                for (iz, &wz) in st.zidx.iter().zip(&st.wz) {
                    for (dy, &wy) in st.wy.iter().enumerate() {
                        let base = grid.idx(*iz, st.iy0 + dy, st.ix0);
                        let row = &mut grid.values[base..base + st.wx.len()];
                        let zy = scale * wz * wy;
                        for (v, &wx) in row.iter_mut().zip(&st.wx) {
                            *v += zy * wx;
                        }
                    }
                }
            }
            Ok(grid)
        })
        .collect();

    let mut total = GridField::zeros(params);
    for partial in partials {
        let partial = partial?;
        for (t, p) in total.values.iter_mut().zip(&partial.values) {
            *t += *p;
        }
    }
    Ok(total)
}

/// `(2 xi^2 / (pi eta))^{3/2}`, the normalization of one Gaussian.
fn gaussian_norm<T: Real>(params: &SolverParams<T>) -> T {
    let a = T::of(2.0) * params.xi * params.xi / (T::PI() * params.eta());
    a * a.sqrt()
}

/// Gathers the Fourier-space potential at every particle from a
/// processed grid:
/// `phi_m = 4 pi (2 xi^2/(pi eta))^{3/2} h^3 sum H~ (Gaussian at x_m)`.
///
/// The `4 pi` pairs with the plain-sum transform normalization of the
/// adaptive FFT stage: the inverse supplies `1/(M side^2)`, turning
/// the mode sums into `h^3 (1/L3) sum_{k3} (2 pi)^{-2} int dkappa`,
/// and `4 pi / k^2` is the physical kernel split as
/// `4 pi * Ghat(kappa, k3)`.
pub fn gather_potential<T: Real>(
    field: &GridField<T>,
    system: &ParticleSystem<T>,
    params: &SolverParams<T>,
) -> Result<Vec<T>> {
    Ok(gather(field, system, params, false)?.0)
}

/// Gathers the Fourier-space force, using the differentiated window:
/// the potential-gather sum with an extra `(4 xi^2/eta)(x_m - x_grid)`
/// factor and charge weight.
pub fn gather_force<T: Real>(
    field: &GridField<T>,
    system: &ParticleSystem<T>,
    params: &SolverParams<T>,
) -> Result<Vec<Vec3<T>>> {
    Ok(gather(field, system, params, true)?.1)
}

/// Potential and force gathered in one sweep over the stencils.
pub fn gather_both<T: Real>(
    field: &GridField<T>,
    system: &ParticleSystem<T>,
    params: &SolverParams<T>,
) -> Result<(Vec<T>, Vec<Vec3<T>>)> {
    gather(field, system, params, true)
}

fn gather<T: Real>(
    field: &GridField<T>,
    system: &ParticleSystem<T>,
    params: &SolverParams<T>,
    with_force: bool,
) -> Result<(Vec<T>, Vec<Vec3<T>>)> {
    check_geometry(system, params)?;
    if field.mz != params.m || field.mxy != params.mtilde() {
        return Err(SeError::InvalidParams(format!(
            "field of {}x{}x{} nodes does not match params",
            field.mz, field.mxy, field.mxy
        )));
    }
    let f1 = f1_table(params);
    let h = params.h();
    let pref = T::of(4.0) * T::PI() * gaussian_norm(params) * h * h * h;
    let fpref = T::of(4.0) * params.xi * params.xi / params.eta();
    let rows: Vec<Result<(T, Vec3<T>)>> = system
        .positions()
        .par_iter()
        .zip(system.charges().par_iter())
        .map(|(&pos, &q)| {
            let st = GaussianStencil::build(pos, params, &f1)?;
            let mut phi = T::zero();
            let mut f = Vec3::zero();
            for ((iz, &wz), &ddz) in st.zidx.iter().zip(&st.wz).zip(&st.dz) {
                for ((dy, &wy), &ddy) in st.wy.iter().enumerate().zip(&st.dy) {
                    let base = field.idx(*iz, st.iy0 + dy, st.ix0);
                    let row = &field.values[base..base + st.wx.len()];
                    let zy = wz * wy;
                    if with_force {
                        let mut s = T::zero();
                        let mut sx = T::zero();
                        for ((&v, &wx), &ddx) in row.iter().zip(&st.wx).zip(&st.dx) {
                            let t = v * wx;
                            s += t;
                            sx += t * ddx;
                        }
                        phi += zy * s;
                        f.x += zy * sx;
                        f.y += zy * s * ddy;
                        f.z += zy * s * ddz;
                    } else {
                        let mut s = T::zero();
                        for (&v, &wx) in row.iter().zip(&st.wx) {
                            s += v * wx;
                        }
                        phi += zy * s;
                    }
                }
            }
            let force = Vec3::new(f.x, f.y, f.z).scale(q * pref * fpref);
            Ok((phi * pref, force))
        })
        .collect();
    let mut phis = Vec::with_capacity(system.len());
    let mut forces = Vec::with_capacity(system.len());
    for row in rows {
        let (p, f) = row?;
        phis.push(p);
        forces.push(f);
    }
    Ok((phis, forces))
}
