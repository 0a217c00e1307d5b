//! Top-level solver: composes the real-space sum, the gridded k-space
//! pipeline, and the self term into potentials, forces, and energy.
//!
//! The k-space part runs the five-stage pipeline
//!
//! ```text
//! spread -> aft_forward -> scale_field -> aft_inverse -> gather
//! ```
//!
//! and returns the combined `k3 != 0` and `k3 = 0` Fourier
//! contributions in one pass; the zero mode needs no separate code
//! path because its plane carries the truncated kernel. Forces come
//! from the same scaled field through the gradient gather, so the
//! `k3 = 0` force is included automatically.
//!
//! Neutrality is required: the zero mode of a net-charged system
//! diverges (the truncated kernel renders it finite but dependent on
//! the arbitrary truncation radius). [`solve_with`] offers an expert
//! escape hatch that subtracts the mean charge as a uniform background
//! (it zeroes the DC bin of the scaled spectrum); results then carry a
//! background-dependent offset and the override is off-spec.

use rayon::prelude::*;

use crate::aft::{aft_forward, aft_inverse};
use crate::direct::self_term;
use crate::error::{Result, SeError};
use crate::estimate::SolverParams;
use crate::gridding::{gather_both, gather_potential, spread};
use crate::greens::{scale_field, ScalingSpec};
use crate::model::{EnergyBreakdown, ParticleSystem, Results};
use crate::real::Real;
use crate::realspace::real_potential_and_force;
use crate::vec3::Vec3;

/// Options for [`solve_with`].
#[derive(Clone, Copy, Debug, Default)]
pub struct SolveOptions {
    /// Accept net-charged systems by adding a uniform neutralizing
    /// background (zeroes the DC spectral bin). Off-spec; the zero
    /// mode of the result is defined only up to a uniform constant.
    pub neutralizing_background: bool,
}

/// Reusable context for the k-space pipeline.
///
/// Holds the validated parameter set and the derived spectral scaling.
/// Stage buffers are task-local (the stages parallelize internally),
/// so repeated solves through one workspace are bitwise reproducible.
/// A workspace is externally synchronized; distinct workspaces may run
/// concurrently.
#[derive(Clone, Debug)]
pub struct KSpaceWorkspace<T> {
    params: SolverParams<T>,
    scaling: ScalingSpec<T>,
}

impl<T: Real> KSpaceWorkspace<T> {
    /// Validates the parameters and builds a workspace.
    pub fn new(params: &SolverParams<T>) -> Result<Self> {
        let scaling = ScalingSpec::from_params(params)?;
        Ok(KSpaceWorkspace { params: params.clone(), scaling })
    }

    /// Current parameter set.
    pub fn params(&self) -> &SolverParams<T> {
        &self.params
    }

    /// Swaps in a new parameter set, revalidating the derived scaling.
    pub fn set_params(&mut self, params: &SolverParams<T>) -> Result<()> {
        *self = Self::new(params)?;
        Ok(())
    }

    /// Fourier-space potential `phi^F` per particle (both the
    /// `k3 != 0` sum and the zero mode).
    pub fn fourier_potential(&self, system: &ParticleSystem<T>) -> Result<Vec<T>> {
        require_neutral(system)?;
        let field = self.scaled_field(system, false)?;
        gather_potential(&field, system, &self.params)
    }

    /// Fourier-space force per particle.
    pub fn fourier_force(&self, system: &ParticleSystem<T>) -> Result<Vec<Vec3<T>>> {
        require_neutral(system)?;
        let field = self.scaled_field(system, false)?;
        Ok(gather_both(&field, system, &self.params)?.1)
    }

    /// Fourier-space potential and force from one pipeline pass.
    pub fn fourier_both(
        &self,
        system: &ParticleSystem<T>,
    ) -> Result<(Vec<T>, Vec<Vec3<T>>)> {
        require_neutral(system)?;
        let field = self.scaled_field(system, false)?;
        gather_both(&field, system, &self.params)
    }

    /// Runs spread, both transforms, and the spectral scaling,
    /// returning the smeared Fourier-space potential on the grid.
    fn scaled_field(
        &self,
        system: &ParticleSystem<T>,
        background: bool,
    ) -> Result<crate::gridding::GridField<T>> {
        let grid = spread(system, &self.params)?;
        let mut spec = aft_forward(&grid, &self.params)?;
        scale_field(&mut spec, &self.scaling)?;
        if background {
            spec.planes[0].data[0] = rustfft::num_complex::Complex::new(T::zero(), T::zero());
        }
        aft_inverse(&spec, &self.params)
    }
}

fn require_neutral<T: Real>(system: &ParticleSystem<T>) -> Result<()> {
    if !system.is_neutral() {
        return Err(SeError::InvalidSystem(format!(
            "system is not charge neutral (net charge {}); the zero \
             mode diverges. See SolveOptions::neutralizing_background \
             for the off-spec override",
            system.total_charge()
        )));
    }
    Ok(())
}

/// One-shot [`KSpaceWorkspace::fourier_potential`].
pub fn fourier_potential<T: Real>(
    system: &ParticleSystem<T>,
    params: &SolverParams<T>,
) -> Result<Vec<T>> {
    KSpaceWorkspace::new(params)?.fourier_potential(system)
}

/// One-shot [`KSpaceWorkspace::fourier_force`].
pub fn fourier_force<T: Real>(
    system: &ParticleSystem<T>,
    params: &SolverParams<T>,
) -> Result<Vec<Vec3<T>>> {
    KSpaceWorkspace::new(params)?.fourier_force(system)
}

/// Full solve: `phi = phi^R + phi^F + phi^self`, forces likewise,
/// energy as the charge-weighted sum of [`Results::assemble`].
pub fn solve<T: Real>(
    system: &ParticleSystem<T>,
    params: &SolverParams<T>,
) -> Result<Results<T>> {
    solve_with(system, params, SolveOptions::default())
}

/// [`solve`] with expert options.
pub fn solve_with<T: Real>(
    system: &ParticleSystem<T>,
    params: &SolverParams<T>,
    options: SolveOptions,
) -> Result<Results<T>> {
    let workspace = KSpaceWorkspace::new(params)?;
    if !options.neutralizing_background {
        require_neutral(system)?;
    }
    let (phi_r, force_r) = real_potential_and_force(system, params.xi, params.rc)?;
    let field = workspace.scaled_field(system, options.neutralizing_background)?;
    let (phi_f, force_f) = gather_both(&field, system, params)?;

    let charges = system.charges();
    let selfs: Vec<T> = charges.iter().map(|&q| self_term(q, params.xi)).collect();
    let potential: Vec<T> = (0..system.len())
        .into_par_iter()
        .map(|m| phi_r[m] + phi_f[m] + selfs[m])
        .collect();
    let force: Vec<Vec3<T>> = (0..system.len())
        .into_par_iter()
        .map(|m| force_r[m] + force_f[m])
        .collect();
    let dot = |a: &[T]| -> T { a.iter().zip(charges).map(|(&p, &q)| p * q).sum() };
    let breakdown = EnergyBreakdown {
        real: dot(&phi_r),
        fourier: dot(&phi_f),
        self_term: dot(&selfs),
    };
    Ok(Results::assemble(charges, potential, force, breakdown))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::aft::{op_model_adaptive, op_model_uniform};
    use crate::direct::{
        direct_kspace, direct_total, direct_zeromode, DirectConfig,
    };
    use crate::estimate::{rms_error, select_params};
    use crate::model::gen_uniform;

    fn oracle_system() -> ParticleSystem<f64> {
        ParticleSystem::new(
            vec![
                Vec3::new(0.10, 0.20, 0.30),
                Vec3::new(0.70, 0.40, 0.90),
                Vec3::new(0.45, 0.85, 0.05),
            ],
            vec![1.0, -1.0, 0.0],
            [1.0, 1.0, 1.0],
        )
        .unwrap()
    }

    /// End-to-end check against the direct Ewald oracle. xi is large
    /// enough that the truncated real-space sum at rc = 0.49 is
    /// converged, so every term of the decomposition must match.
    #[test]
    fn total_matches_direct_oracle() {
        let sys = oracle_system();
        let pr = SolverParams::new(10.0, 0.49, 48, 24, 7, 4.0, 2.5, 1.0).unwrap();
        let got = solve(&sys, &pr).unwrap();
        let want = direct_total(&sys, &DirectConfig::new(10.0, 30, 60).unwrap()).unwrap();

        let phi_scale = want
            .potential
            .iter()
            .fold(0.0f64, |a: f64, &b| a.max(b.abs()));
        for (g, w) in got.potential.iter().zip(&want.potential) {
            assert!(
                (g - w).abs() <= 1e-10 * phi_scale,
                "potential {g} vs {w}"
            );
        }
        let f_scale = want
            .force
            .iter()
            .flat_map(|f| [f.x, f.y, f.z])
            .fold(0.0f64, |a, b| a.max(b.abs()));
        for (g, w) in got.force.iter().zip(&want.force) {
            for c in 0..3 {
                assert!(
                    (g[c] - w[c]).abs() <= 1e-9 * f_scale,
                    "force {} vs {}",
                    g[c],
                    w[c]
                );
            }
        }
        assert!((got.energy - want.energy).abs() <= 1e-10 * want.energy.abs().max(1.0));
        assert!((got.breakdown.real - want.breakdown.real).abs() <= 1e-9);
        assert!((got.breakdown.fourier - want.breakdown.fourier).abs() <= 1e-9);
        assert_eq!(got.breakdown.self_term, want.breakdown.self_term);
    }

    /// A non-unit box: no stray box factors may survive in the
    /// pipeline normalization.
    #[test]
    fn oracle_agreement_in_larger_box() {
        let l = 2.0;
        let sys = gen_uniform::<f64>(4, [l, l, l], 11).unwrap();
        let pr = SolverParams::new(5.0, 0.9, 64, 24, 8, 4.0, 2.5, l).unwrap();
        let got = solve(&sys, &pr).unwrap();
        let want = direct_total(&sys, &DirectConfig::new(5.0, 20, 40).unwrap()).unwrap();
        let scale = want
            .potential
            .iter()
            .fold(0.0f64, |a: f64, &b| a.max(b.abs()));
        for (g, w) in got.potential.iter().zip(&want.potential) {
            assert!((g - w).abs() <= 1e-8 * scale, "potential {g} vs {w}");
        }
    }

    /// N = 10 uniform system at the reference parameter set that
    /// reaches near machine precision.
    #[test]
    fn kspace_reaches_machine_precision() {
        let sys = gen_uniform::<f64>(10, [1.0, 1.0, 1.0], 91).unwrap();
        let pr = SolverParams::new(8.0, 0.25, 38, 24, 5, 4.0, 2.5, 1.0).unwrap();
        let se = fourier_potential(&sys, &pr).unwrap();

        let cfg = DirectConfig::new(8.0, 1, 40).unwrap();
        let k = direct_kspace(&sys, &cfg).unwrap();
        let z = direct_zeromode(&sys, 8.0).unwrap();
        let reference: Vec<f64> = k.iter().zip(&z).map(|(a, b)| a + b).collect();
        let err = rms_error(&se, &reference, true).unwrap();
        assert!(err <= 2e-12, "rms {err:e}");
    }

    /// Padding factors past the recipe sit on a convergence plateau.
    #[test]
    fn local_pad_plateau() {
        let sys = gen_uniform::<f64>(12, [1.0, 1.0, 1.0], 17).unwrap();
        let base = SolverParams::new(8.0, 0.25, 38, 24, 5, 4.0, 2.5, 1.0).unwrap();
        let wide = SolverParams::new(8.0, 0.25, 38, 24, 5, 6.0, 2.5, 1.0).unwrap();
        let a = fourier_potential(&sys, &base).unwrap();
        let b = fourier_potential(&sys, &wide).unwrap();
        let scale = a.iter().fold(0.0f64, |x, &y| x.max(y.abs()));
        for (x, y) in a.iter().zip(&b) {
            assert!((x - y).abs() <= 1e-11 * scale, "{x} vs {y}");
        }
    }

    #[test]
    fn workspace_reuse_is_deterministic() {
        let sys = gen_uniform::<f64>(16, [1.0, 1.0, 1.0], 5).unwrap();
        let pr = SolverParams::new(4.0, 0.3, 16, 8, 3, 2.0, 2.5, 1.0).unwrap();
        let mut ws = KSpaceWorkspace::new(&pr).unwrap();
        let first = ws.fourier_potential(&sys).unwrap();
        let second = ws.fourier_potential(&sys).unwrap();
        assert_eq!(first, second);

        let other = SolverParams::new(4.0, 0.3, 32, 8, 3, 2.0, 2.5, 1.0).unwrap();
        ws.set_params(&other).unwrap();
        assert_eq!(ws.params().m, 32);
        ws.set_params(&pr).unwrap();
        let third = ws.fourier_potential(&sys).unwrap();
        assert_eq!(first, third);

        let s1 = solve(&sys, &pr).unwrap();
        let s2 = solve(&sys, &pr).unwrap();
        assert_eq!(s1.potential, s2.potential);
        assert_eq!(s1.energy, s2.energy);
    }

    /// The Ewald split parameter moves work between the sums but nearly
    /// cancels in the total.
    #[test]
    fn xi_independence() {
        let l = 2.0;
        let sys = gen_uniform::<f64>(20, [l, l, l], 23).unwrap();
        let q = sys.charge_sq_sum();
        let p3 = select_params(1e-8, 5.0, q, Vec3::new(l, l, l)).unwrap();
        let p4 = select_params(1e-8, 7.0, q, Vec3::new(l, l, l)).unwrap();
        let a = solve(&sys, &p3).unwrap();
        let b = solve(&sys, &p4).unwrap();
        let scale = a.potential.iter().fold(0.0f64, |x, &y| x.max(y.abs()));
        for (x, y) in a.potential.iter().zip(&b.potential) {
            assert!((x - y).abs() <= 1e-7 * scale, "{x} vs {y}");
        }
        assert!((a.energy - b.energy).abs() <= 1e-7 * a.energy.abs().max(1.0));
        // the split itself moved
        assert!((a.breakdown.real - b.breakdown.real).abs() > 1e-4);
    }

    #[test]
    fn rigid_z_translation_invariance() {
        let l = 1.0;
        let sys = gen_uniform::<f64>(14, [l, l, l], 41).unwrap();
        let q = sys.charge_sq_sum();
        let pr = select_params(1e-10, 12.0, q, Vec3::new(l, l, l)).unwrap();
        let shifted = ParticleSystem::new(
            sys.positions()
                .iter()
                .map(|p| Vec3::new(p.x, p.y, (p.z + 0.347).rem_euclid(l)))
                .collect(),
            sys.charges().to_vec(),
            [l, l, l],
        )
        .unwrap();
        let a = solve(&sys, &pr).unwrap();
        let b = solve(&shifted, &pr).unwrap();
        let scale = a.potential.iter().fold(0.0f64, |x, &y| x.max(y.abs()));
        for (x, y) in a.potential.iter().zip(&b.potential) {
            assert!((x - y).abs() <= 1e-9 * scale, "{x} vs {y}");
        }
    }

    #[test]
    fn fourier_forces_sum_to_zero() {
        let sys = gen_uniform::<f64>(30, [1.0, 1.0, 1.0], 77).unwrap();
        let pr = SolverParams::new(6.0, 0.3, 32, 24, 4, 2.0, 2.5, 1.0).unwrap();
        let f = fourier_force(&sys, &pr).unwrap();
        let total = f.iter().fold(Vec3::new(0.0, 0.0, 0.0), |a, b| a + *b);
        let scale: f64 = f.iter().map(|v| v.norm()).sum();
        assert!(total.norm() <= 1e-10 * scale, "net force {total:?}");
    }

    #[test]
    fn non_neutral_systems_are_rejected_unless_overridden() {
        let sys = ParticleSystem::new(
            vec![Vec3::new(0.2, 0.2, 0.2), Vec3::new(0.8, 0.8, 0.8)],
            vec![1.0f64, 1.0],
            [1.0, 1.0, 1.0],
        )
        .unwrap();
        let pr = SolverParams::new(4.0, 0.3, 16, 8, 3, 2.0, 2.5, 1.0).unwrap();
        assert!(solve(&sys, &pr).is_err());
        assert!(fourier_potential(&sys, &pr).is_err());
        let opts = SolveOptions { neutralizing_background: true };
        let out = solve_with(&sys, &pr, opts).unwrap();
        assert!(out.potential.iter().all(|p| p.is_finite()));

        // on an already neutral system the background is a no-op to
        // within the window truncation level
        let neutral = gen_uniform::<f64>(10, [1.0, 1.0, 1.0], 3).unwrap();
        let plain = solve(&neutral, &pr).unwrap();
        let with_bg = solve_with(&neutral, &pr, opts).unwrap();
        let scale = plain.potential.iter().fold(0.0f64, |a, &b| a.max(b.abs()));
        for (x, y) in plain.potential.iter().zip(&with_bg.potential) {
            assert!((x - y).abs() <= 1e-5 * scale);
        }
    }

    /// Box and parameter geometry must agree.
    #[test]
    fn geometry_mismatch_is_rejected() {
        let sys = gen_uniform::<f64>(4, [2.0, 2.0, 2.0], 9).unwrap();
        let pr = SolverParams::new(4.0, 0.3, 16, 8, 3, 2.0, 2.5, 1.0).unwrap();
        assert!(solve(&sys, &pr).is_err());
    }

    /// Transform work per particle at fixed density grows only like
    /// log M, so the k-space cost per particle is essentially flat.
    #[test]
    fn work_per_particle_is_nearly_flat() {
        let per_particle = |m: usize, l: f64| -> f64 {
            let n = (50.0 * l * l * l) as u64;
            let pr = SolverParams::new(6.0, 0.3 * l, m, 8, 3, 2.0, 2.5, l).unwrap();
            let p3 = (pr.p * pr.p * pr.p) as u64;
            ((2 * op_model_adaptive(&pr) + n * p3) / n) as f64
        };
        let a = per_particle(16, 1.0);
        let b = per_particle(32, 2.0);
        let c = per_particle(64, 4.0);
        assert!(b / a <= 1.6, "16 -> 32 per-particle work grew {}x", b / a);
        assert!(c / b <= 1.6, "32 -> 64 per-particle work grew {}x", c / b);
        // and the adaptive inventory stays cheaper than uniform padding
        let pr = SolverParams::new(6.0, 0.3, 64, 8, 3, 2.0, 2.5, 1.0).unwrap();
        assert!(op_model_adaptive(&pr) < op_model_uniform(&pr, 2.0).unwrap());
    }

    /// The generic scalar path: single precision tracks double to the
    /// accuracy single allows.
    #[test]
    fn f32_tracks_f64() {
        let sys64 = gen_uniform::<f64>(8, [1.0, 1.0, 1.0], 57).unwrap();
        let sys32 = ParticleSystem::<f32>::new(
            sys64
                .positions()
                .iter()
                .map(|p| Vec3::new(p.x as f32, p.y as f32, p.z as f32))
                .collect(),
            sys64.charges().iter().map(|&q| q as f32).collect(),
            [1.0, 1.0, 1.0],
        )
        .unwrap();
        let p64 = SolverParams::new(4.0f64, 0.3, 16, 8, 3, 2.0, 2.5, 1.0).unwrap();
        let p32 = SolverParams::new(4.0f32, 0.3, 16, 8, 3, 2.0, 2.5, 1.0).unwrap();
        let a = solve(&sys64, &p64).unwrap();
        let b = solve(&sys32, &p32).unwrap();
        let scale = a.potential.iter().fold(0.0f64, |x, &y| x.max(y.abs()));
        for (x, y) in a.potential.iter().zip(&b.potential) {
            assert!((x - *y as f64).abs() <= 1e-3 * scale, "{x} vs {y}");
        }
    }
}
