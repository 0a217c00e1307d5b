//! Slow, high-precision reference evaluation of the Ewald decomposition.
//!
//! Every fast path in this crate is validated against the sums in this
//! module, evaluated pairwise without grids or transforms. The potential
//! at particle `m` splits into four terms:
//!
//! * a real-space sum of `erfc(xi r)/r` over all particles and their
//!   periodic images in `z`,
//! * a Fourier-space sum over the discrete wave numbers
//!   `k3 = 2 pi n / L3`, `n != 0`, whose `(x, y)` integrals reduce to the
//!   incomplete modified Bessel function `K0(k3^2/4xi^2, xi^2 rho^2)`,
//! * the zero mode, a logarithmic term requiring charge neutrality,
//! * and the self term `-(2 xi / sqrt(pi)) q_m`.
//!
//! Forces are available both analytically, by differentiating each term
//! (the Bessel derivative brings in the companion kernel
//! `G = -dK0/db`), and as central finite differences of the potential,
//! which cross-validates the analytic route.
//!
//! Everything here is `O(N^2)` per mode or image layer and intended for
//! oracle duty at modest `N`, not production evaluation.

use rayon::prelude::*;

use crate::error::{Result, SeError};
use crate::model::{EnergyBreakdown, ParticleSystem, Results};
use crate::real::Real;
use crate::specfun::{erfc, gamma_log_e1, incomplete_k0, incomplete_k0_deriv};
use crate::vec3::Vec3;

/// Arguments beyond which `erfc` underflows below every tolerance used
/// here.
const ERFC_CUTOFF: f64 = 30.0;

/// First K0 argument beyond which a mode contributes less than 1e-21
/// (`K0(a, b) <= E1(a)`).
const MODE_CUTOFF: f64 = 45.0;

/// Configuration of the direct reference sums.
#[derive(Clone, Copy, Debug)]
pub struct DirectConfig<T> {
    /// Ewald splitting parameter.
    pub xi: T,
    /// Periodic image layers included on each side in `z`.
    pub image_layers: usize,
    /// Largest wave-number index `|n|` kept in the Fourier sum.
    pub kinf: usize,
}

impl<T: Real> DirectConfig<T> {
    /// Validates and builds a configuration.
    pub fn new(xi: T, image_layers: usize, kinf: usize) -> Result<Self> {
        if !(xi > T::zero()) || !xi.is_finite() {
            return Err(SeError::InvalidParams(format!(
                "xi must be positive, got {xi}"
            )));
        }
        if image_layers < 1 || kinf < 1 {
            return Err(SeError::InvalidParams(format!(
                "image_layers and kinf must be at least 1, got {image_layers} and {kinf}"
            )));
        }
        Ok(DirectConfig {
            xi,
            image_layers,
            kinf,
        })
    }
}

/// Real-space Ewald sum: screened Coulomb over periodic images in `z`.
///
/// The `n = m` term is skipped only in the unshifted image.
pub fn direct_real<T: Real>(system: &ParticleSystem<T>, cfg: &DirectConfig<T>) -> Vec<T> {
    let l3 = system.boxd()[2];
    let xi = cfg.xi;
    let layers = cfg.image_layers as i64;
    let positions = system.positions();
    let charges = system.charges();
    (0..system.len())
        .into_par_iter()
        .map(|m| {
            let xm = positions[m];
            let mut phi = T::zero();
            for (n, (&xn, &qn)) in positions.iter().zip(charges).enumerate() {
                let base = xm - xn;
                for alpha in -layers..=layers {
                    if n == m && alpha == 0 {
                        continue;
                    }
                    let dz = base.z + T::of(alpha as f64) * l3;
                    let r2 = base.rho2() + dz * dz;
                    let r = r2.sqrt();
                    if (xi * r).as_f64() > ERFC_CUTOFF {
                        continue;
                    }
                    phi += qn * erfc(xi * r) / r;
                }
            }
            phi
        })
        .collect()
}

/// Wave number `k3 = 2 pi n / L3` for mode index `n`.
fn k3_mode<T: Real>(n: usize, l3: T) -> T {
    T::of(2.0) * T::PI() * T::of_usize(n) / l3
}

/// Per-mode contributions of the `k3 != 0` Fourier sum.
///
/// Returns one vector of per-particle potentials for each mode index
/// `n = 1..=kinf`, each containing the combined `+n` and `-n`
/// contribution including the `1/L3` prefactor. Summing the vectors
/// gives [`direct_kspace`].
pub fn direct_kspace_by_mode<T: Real>(
    system: &ParticleSystem<T>,
    xi: T,
    kinf: usize,
) -> Vec<Vec<T>> {
    let l3 = system.boxd()[2];
    let positions = system.positions();
    let charges = system.charges();
    let nmodes = kinf;
    let per_particle: Vec<Vec<T>> = (0..system.len())
        .into_par_iter()
        .map(|m| {
            let xm = positions[m];
            let mut modes = vec![T::zero(); nmodes];
            for (&xn, &qn) in positions.iter().zip(charges) {
                let d = xm - xn;
                let b = xi * xi * d.rho2();
                for (idx, acc) in modes.iter_mut().enumerate() {
                    let k3 = k3_mode(idx + 1, l3);
                    let a = k3 * k3 / (T::of(4.0) * xi * xi);
                    if a.as_f64() > MODE_CUTOFF {
                        break;
                    }
                    let kernel = incomplete_k0(a, b);
                    // conjugate modes +-n combine to twice the cosine
                    *acc += qn * kernel * T::of(2.0) * (k3 * d.z).cos();
                }
            }
            modes
        })
        .collect();
    // transpose to mode-major and apply the prefactor
    (0..nmodes)
        .map(|idx| {
            per_particle
                .iter()
                .map(|modes| modes[idx] / l3)
                .collect::<Vec<T>>()
        })
        .collect()
}

/// Fourier-space sum over `k3 != 0`.
///
/// Accumulates the complex series per particle and verifies that the
/// imaginary residue stays below `1e-12` of the result scale before
/// discarding it.
pub fn direct_kspace<T: Real>(
    system: &ParticleSystem<T>,
    cfg: &DirectConfig<T>,
) -> Result<Vec<T>> {
    let l3 = system.boxd()[2];
    let xi = cfg.xi;
    let positions = system.positions();
    let charges = system.charges();
    let acc: Vec<(T, T)> = (0..system.len())
        .into_par_iter()
        .map(|m| {
            let xm = positions[m];
            let mut re = T::zero();
            let mut im = T::zero();
            for (&xn, &qn) in positions.iter().zip(charges) {
                let d = xm - xn;
                let b = xi * xi * d.rho2();
                for idx in 1..=cfg.kinf {
                    let k3 = k3_mode(idx, l3);
                    let a = k3 * k3 / (T::of(4.0) * xi * xi);
                    if a.as_f64() > MODE_CUTOFF {
                        break;
                    }
                    let kernel = incomplete_k0(a, b);
                    let (sin, cos) = (k3 * d.z).sin_cos();
                    // modes +n and -n carry conjugate phases
                    re += qn * kernel * (cos + cos);
                    im += qn * kernel * (sin - sin);
                }
            }
            (re / l3, im / l3)
        })
        .collect();
    let scale = acc
        .iter()
        .map(|&(re, _)| re.abs())
        .fold(T::zero(), T::max)
        .max(T::one());
    for &(_, im) in &acc {
        if im.abs() > T::of(1e-12) * scale {
            return Err(SeError::Numerical(format!(
                "Fourier sum imaginary residue {im:e} exceeds 1e-12 of scale {scale:e}"
            )));
        }
    }
    Ok(acc.into_iter().map(|(re, _)| re).collect())
}

/// Zero-mode (`k3 = 0`) term. Requires a charge-neutral system.
///
/// Pairs at `rho = 0` are excluded; their limit contribution vanishes.
pub fn direct_zeromode<T: Real>(system: &ParticleSystem<T>, xi: T) -> Result<Vec<T>> {
    if !system.is_neutral() {
        return Err(SeError::InvalidSystem(format!(
            "the zero mode requires a neutral system, net charge {:e}",
            system.total_charge()
        )));
    }
    let l3 = system.boxd()[2];
    let positions = system.positions();
    let charges = system.charges();
    Ok((0..system.len())
        .into_par_iter()
        .map(|m| {
            let xm = positions[m];
            let mut acc = T::zero();
            for (n, (&xn, &qn)) in positions.iter().zip(charges).enumerate() {
                if n == m {
                    continue;
                }
                let rho2 = (xm - xn).rho2();
                if rho2 == T::zero() {
                    continue;
                }
                acc += qn * gamma_log_e1(xi * xi * rho2);
            }
            -acc / l3
        })
        .collect())
}

/// Self-interaction correction `-(2 xi / sqrt(pi)) q`.
pub fn self_term<T: Real>(q: T, xi: T) -> T {
    -T::of(2.0) * xi / T::PI().sqrt() * q
}

/// Full reference solution: potential, analytic force, energy and the
/// per-term energy breakdown.
pub fn direct_total<T: Real>(
    system: &ParticleSystem<T>,
    cfg: &DirectConfig<T>,
) -> Result<Results<T>> {
    let real = direct_real(system, cfg);
    let kspace = direct_kspace(system, cfg)?;
    let zero = direct_zeromode(system, cfg.xi)?;
    let charges = system.charges();
    let selfs: Vec<T> = charges.iter().map(|&q| self_term(q, cfg.xi)).collect();
    let potential: Vec<T> = (0..system.len())
        .map(|m| real[m] + kspace[m] + zero[m] + selfs[m])
        .collect();
    let force = direct_force(system, cfg)?;
    let dot = |a: &[T]| -> T { a.iter().zip(charges).map(|(&p, &q)| p * q).sum() };
    let breakdown = EnergyBreakdown {
        real: dot(&real),
        fourier: dot(&kspace) + dot(&zero),
        self_term: dot(&selfs),
    };
    Ok(Results::assemble(charges, potential, force, breakdown))
}

/// Analytic force: the negative charge-weighted gradient of each term.
pub fn direct_force<T: Real>(
    system: &ParticleSystem<T>,
    cfg: &DirectConfig<T>,
) -> Result<Vec<Vec3<T>>> {
    force_terms(system, cfg, true)
}

/// Analytic force of the Fourier part alone (the `k3 != 0` sum plus
/// the zero mode, without the real-space term).
pub fn direct_fourier_force<T: Real>(
    system: &ParticleSystem<T>,
    cfg: &DirectConfig<T>,
) -> Result<Vec<Vec3<T>>> {
    force_terms(system, cfg, false)
}

fn force_terms<T: Real>(
    system: &ParticleSystem<T>,
    cfg: &DirectConfig<T>,
    with_real: bool,
) -> Result<Vec<Vec3<T>>> {
    if !system.is_neutral() {
        return Err(SeError::InvalidSystem(
            "the zero-mode force requires a neutral system".into(),
        ));
    }
    let l3 = system.boxd()[2];
    let xi = cfg.xi;
    let layers = cfg.image_layers as i64;
    let positions = system.positions();
    let charges = system.charges();
    let two_over_sqrt_pi = T::of(2.0) / T::PI().sqrt();
    Ok((0..system.len())
        .into_par_iter()
        .map(|m| {
            let xm = positions[m];
            let qm = charges[m];
            let mut f = Vec3::zero();
            for (n, (&xn, &qn)) in positions.iter().zip(charges).enumerate() {
                let d = xm - xn;
                let rho2 = d.rho2();
                let b = xi * xi * rho2;

                // real-space: gradient of erfc(xi r)/r over images
                if with_real {
                    for alpha in -layers..=layers {
                        if n == m && alpha == 0 {
                            continue;
                        }
                        let dz = d.z + T::of(alpha as f64) * l3;
                        let r2 = rho2 + dz * dz;
                        let r = r2.sqrt();
                        let u = xi * r;
                        if u.as_f64() > ERFC_CUTOFF {
                            continue;
                        }
                        let mag = qm
                            * qn
                            * (erfc(u) / r + two_over_sqrt_pi * xi * (-u * u).exp())
                            / r2;
                        f.x += mag * d.x;
                        f.y += mag * d.y;
                        f.z += mag * dz;
                    }
                }

                // k3 != 0 modes: xy through G = -dK0/db, z through the phase
                for idx in 1..=cfg.kinf {
                    let k3 = k3_mode(idx, l3);
                    let a = k3 * k3 / (T::of(4.0) * xi * xi);
                    if a.as_f64() > MODE_CUTOFF {
                        break;
                    }
                    let (sin, cos) = (k3 * d.z).sin_cos();
                    if n != m || rho2 > T::zero() {
                        let g = incomplete_k0_deriv(a, b);
                        let c = qm * qn * T::of(4.0) * xi * xi / l3 * cos * g;
                        f.x += c * d.x;
                        f.y += c * d.y;
                    }
                    let kernel = incomplete_k0(a, b);
                    f.z += qm * qn * T::of(2.0) / l3 * k3 * sin * kernel;
                }

                // zero mode: (2/L3) q_m q_n rho/rho^2 (1 - exp(-xi^2 rho^2))
                if rho2 > T::zero() {
                    let c = qm * qn * T::of(2.0) / l3 * (T::one() - (-b).exp()) / rho2;
                    f.x += c * d.x;
                    f.y += c * d.y;
                }
            }
            f
        })
        .collect())
}

/// Central finite-difference force from six shifted potential
/// evaluations per particle.
///
/// The step must be small against the closest pair distance.
pub fn direct_force_fd<T: Real>(
    system: &ParticleSystem<T>,
    cfg: &DirectConfig<T>,
    step: T,
) -> Result<Vec<Vec3<T>>> {
    let mut forces = Vec::with_capacity(system.len());
    for m in 0..system.len() {
        let xm = system.positions()[m];
        let mut f = Vec3::zero();
        for axis in 0..3 {
            let mut moved = xm;
            moved[axis] = xm[axis] + step;
            let plus = potential_of_others(&system.with_moved(m, moved)?, cfg, m)?;
            moved[axis] = xm[axis] - step;
            let minus = potential_of_others(&system.with_moved(m, moved)?, cfg, m)?;
            f[axis] = -system.charges()[m] * (plus - minus) / (T::of(2.0) * step);
        }
        forces.push(f);
    }
    Ok(forces)
}

/// Position-dependent potential at particle `m` due to all other
/// particles (the self term is position-independent and omitted).
fn potential_of_others<T: Real>(
    system: &ParticleSystem<T>,
    cfg: &DirectConfig<T>,
    m: usize,
) -> Result<T> {
    let real = direct_real(system, cfg);
    let kspace = direct_kspace(system, cfg)?;
    let zero = direct_zeromode(system, cfg.xi)?;
    Ok(real[m] + kspace[m] + zero[m])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::specfun::exp_int_e1;
    use approx::assert_relative_eq;

    /// The 3-particle oracle system frozen from a 50-digit evaluation:
    /// unit cube, charges +1, -1, 0 (neutral including a zero-charge
    /// probe).
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

    fn oracle_cfg(xi: f64) -> DirectConfig<f64> {
        DirectConfig::new(xi, 30, 40).unwrap()
    }

    #[test]
    fn config_validation() {
        assert!(DirectConfig::new(4.0, 30, 40).is_ok());
        assert!(DirectConfig::new(0.0, 30, 40).is_err());
        assert!(DirectConfig::new(4.0, 0, 40).is_err());
        assert!(DirectConfig::new(4.0, 30, 0).is_err());
    }

    #[test]
    fn real_term_matches_oracle() {
        let sys = oracle_system();
        let phi = direct_real(&sys, &oracle_cfg(4.0));
        assert!((phi[0] - -0.00003169183609273930925635).abs() < 1e-15);
        assert!((phi[1] - 0.00003169183609273930925635).abs() < 1e-15);
        assert!((phi[2] - -0.00450030313755970963802).abs() < 1e-15);
    }

    #[test]
    fn kspace_term_matches_oracle() {
        let sys = oracle_system();
        let phi = direct_kspace(&sys, &oracle_cfg(4.0)).unwrap();
        assert!((phi[0] - 0.9686452215653307400295).abs() < 1e-12);
        assert!((phi[1] - -0.9686452215653307400295).abs() < 1e-12);
        assert!((phi[2] - -0.05980845356713013918037).abs() < 1e-12);
    }

    #[test]
    fn zeromode_term_matches_oracle() {
        let sys = oracle_system();
        let phi = direct_zeromode(&sys, 4.0).unwrap();
        assert!((phi[0] - 2.433741603223088405939).abs() < 1e-13);
        assert!((phi[1] - -2.433741603223088405939).abs() < 1e-13);
        assert!((phi[2] - -0.7182434967522220077022).abs() < 1e-13);
    }

    #[test]
    fn totals_match_oracle_and_are_xi_independent() {
        let sys = oracle_system();
        let want = [
            -1.111161535429723888926,
            1.111161535429723888926,
            -0.7825522534569118565206,
        ];
        for xi in [3.0, 4.0] {
            let out = direct_total(&sys, &oracle_cfg(xi)).unwrap();
            for (m, &w) in want.iter().enumerate() {
                assert!(
                    (out.potential[m] - w).abs() < 1e-12,
                    "xi = {xi}, particle {m}: {} vs {w}",
                    out.potential[m]
                );
            }
        }
    }

    #[test]
    fn kspace_by_mode_sums_to_kspace() {
        let sys = oracle_system();
        let cfg = oracle_cfg(4.0);
        let modes = direct_kspace_by_mode(&sys, 4.0, cfg.kinf);
        let full = direct_kspace(&sys, &cfg).unwrap();
        for m in 0..sys.len() {
            let summed: f64 = modes.iter().map(|mode| mode[m]).sum();
            assert_relative_eq!(summed, full[m], epsilon = 1e-13);
        }
    }

    #[test]
    fn kspace_self_convergence() {
        let sys = oracle_system();
        let a = direct_kspace(&sys, &DirectConfig::new(4.0, 1, 40).unwrap()).unwrap();
        let b = direct_kspace(&sys, &DirectConfig::new(4.0, 1, 80).unwrap()).unwrap();
        for m in 0..sys.len() {
            assert!((a[m] - b[m]).abs() < 1e-15);
        }
    }

    #[test]
    fn real_self_convergence_and_decay() {
        // opposite pair at z-distance 0.5 in a long box with large xi:
        // erfc makes everything vanish
        let sys = ParticleSystem::new(
            vec![Vec3::new(1.0, 1.0, 0.25), Vec3::new(1.0, 1.0, 0.75)],
            vec![1.0, -1.0],
            [2.0, 2.0, 1.0],
        )
        .unwrap();
        let phi: Vec<f64> = direct_real(&sys, &DirectConfig::new(80.0, 3, 1).unwrap());
        assert!(phi[0].abs() < 1e-300);

        let sys = oracle_system();
        let few = direct_real(&sys, &DirectConfig::new(4.0, 4, 1).unwrap());
        let many = direct_real(&sys, &DirectConfig::new(4.0, 8, 1).unwrap());
        for m in 0..sys.len() {
            assert!((few[m] - many[m]).abs() < 1e-15);
        }
    }

    #[test]
    fn real_permutation_equivariance() {
        let sys = oracle_system();
        let permuted = ParticleSystem::new(
            vec![
                Vec3::new(0.45, 0.85, 0.05),
                Vec3::new(0.10, 0.20, 0.30),
                Vec3::new(0.70, 0.40, 0.90),
            ],
            vec![0.0, 1.0, -1.0],
            [1.0, 1.0, 1.0],
        )
        .unwrap();
        let cfg = oracle_cfg(4.0);
        let a = direct_real(&sys, &cfg);
        let b = direct_real(&permuted, &cfg);
        assert_eq!(a[0], b[1]);
        assert_eq!(a[1], b[2]);
        assert_eq!(a[2], b[0]);
    }

    #[test]
    fn kspace_single_particle_exercises_b0_branch() {
        // one particle: only the self pair at rho = 0 contributes, through
        // K0(a, 0) = E1(a)
        let sys = ParticleSystem::new(
            vec![Vec3::new(0.5, 0.5, 0.5)],
            vec![2.0],
            [1.0, 1.0, 1.0],
        )
        .unwrap();
        let cfg = DirectConfig::new(3.0, 1, 25).unwrap();
        let phi = direct_kspace(&sys, &cfg).unwrap();
        let mut want: f64 = 0.0;
        for n in 1..=25 {
            let k3 = 2.0 * std::f64::consts::PI * n as f64;
            let a = k3 * k3 / 36.0;
            if a > MODE_CUTOFF {
                break;
            }
            want += 2.0 * 2.0 * exp_int_e1(a);
        }
        assert_relative_eq!(phi[0], want, max_relative = 1e-13);
    }

    #[test]
    fn kspace_mirrored_pair_is_real() {
        let sys = ParticleSystem::new(
            vec![Vec3::new(0.3, 0.4, 0.2), Vec3::new(0.3, 0.4, 0.8)],
            vec![1.0, 1.0],
            [1.0, 1.0, 1.0],
        )
        .unwrap();
        // the imaginary-residue contract is checked inside direct_kspace
        let phi = direct_kspace(&sys, &DirectConfig::new(4.0, 1, 30).unwrap()).unwrap();
        assert_relative_eq!(phi[0], phi[1], max_relative = 1e-14);
    }

    #[test]
    fn zeromode_examples() {
        // coincident in (x, y): the only pair is excluded at rho = 0
        let sys = ParticleSystem::new(
            vec![Vec3::new(0.5, 0.5, 0.2), Vec3::new(0.5, 0.5, 0.7)],
            vec![1.0, -1.0],
            [1.0, 1.0, 1.0],
        )
        .unwrap();
        let phi = direct_zeromode(&sys, 4.0).unwrap();
        assert_eq!(phi, vec![0.0, 0.0]);

        // rigid (x, y) translation leaves the zero mode unchanged
        let sys = oracle_system();
        let shifted = ParticleSystem::new(
            sys.positions()
                .iter()
                .map(|&p| p + Vec3::new(0.13, 0.08, 0.0))
                .collect(),
            sys.charges().to_vec(),
            sys.boxd(),
        )
        .unwrap();
        let a = direct_zeromode(&sys, 4.0).unwrap();
        let b = direct_zeromode(&shifted, 4.0).unwrap();
        for m in 0..sys.len() {
            assert_relative_eq!(a[m], b[m], epsilon = 1e-12);
        }

        // non-neutral systems are rejected
        let bad = ParticleSystem::new(
            vec![Vec3::new(0.5, 0.5, 0.2), Vec3::new(0.2, 0.5, 0.7)],
            vec![1.0, 1.0],
            [1.0, 1.0, 1.0],
        )
        .unwrap();
        assert!(direct_zeromode(&bad, 4.0).is_err());
    }

    #[test]
    fn self_term_examples() {
        assert_eq!(self_term(0.0, 4.0), 0.0);
        let pi = std::f64::consts::PI;
        assert_relative_eq!(self_term(1.0, pi.sqrt() / 2.0), -1.0, max_relative = 1e-15);
        assert_relative_eq!(
            self_term(3.0, 2.0),
            3.0 * self_term(1.0, 2.0),
            max_relative = 1e-15
        );
        assert_relative_eq!(
            self_term(1.0, 6.0),
            3.0 * self_term(1.0, 2.0),
            max_relative = 1e-15
        );
    }

    #[test]
    fn total_sign_flip_and_z_shift() {
        let sys = oracle_system();
        let cfg = oracle_cfg(4.0);
        let out = direct_total(&sys, &cfg).unwrap();

        let flipped = ParticleSystem::new(
            sys.positions().to_vec(),
            sys.charges().iter().map(|&q| -q).collect(),
            sys.boxd(),
        )
        .unwrap();
        let out_f = direct_total(&flipped, &cfg).unwrap();
        for m in 0..sys.len() {
            assert_relative_eq!(out_f.potential[m], -out.potential[m], epsilon = 1e-13);
        }
        assert_relative_eq!(out_f.energy, out.energy, epsilon = 1e-12);

        let shifted = ParticleSystem::new(
            sys.positions()
                .iter()
                .map(|&p| p + Vec3::new(0.0, 0.0, 0.37))
                .collect(),
            sys.charges().to_vec(),
            sys.boxd(),
        )
        .unwrap();
        let out_s = direct_total(&shifted, &cfg).unwrap();
        for m in 0..sys.len() {
            assert!((out_s.potential[m] - out.potential[m]).abs() < 1e-12);
        }
    }

    #[test]
    fn analytic_force_matches_oracle() {
        let sys = oracle_system();
        let f = direct_force(&sys, &oracle_cfg(4.0)).unwrap();
        assert!((f[0].x - 2.754354032064391703698).abs() < 1e-11);
        assert!((f[0].y - 0.9181180106881305678993).abs() < 1e-11);
        assert!((f[0].z - -0.1625232800526979836034).abs() < 1e-11);
    }

    #[test]
    fn forces_balance_and_mirror() {
        let sys = oracle_system();
        let f = direct_force(&sys, &oracle_cfg(4.0)).unwrap();
        let total = f.iter().fold(Vec3::<f64>::zero(), |acc, &v| acc + v);
        let scale = f.iter().map(|v| v.norm()).fold(0.0, f64::max);
        assert!(total.norm() < 1e-12 * scale);

        // symmetric pair: forces are equal and opposite
        let pair = ParticleSystem::new(
            vec![Vec3::new(0.3, 0.5, 0.4), Vec3::new(0.7, 0.5, 0.6)],
            vec![1.0, -1.0],
            [1.0, 1.0, 1.0],
        )
        .unwrap();
        let f = direct_force(&pair, &oracle_cfg(4.0)).unwrap();
        assert_relative_eq!(f[0].x, -f[1].x, max_relative = 1e-12);
        assert_relative_eq!(f[0].y, -f[1].y, epsilon = 1e-12);
        assert_relative_eq!(f[0].z, -f[1].z, max_relative = 1e-12);
    }

    #[test]
    fn fourier_force_is_total_minus_real_gradient() {
        // cross-check the split against a finite difference of the
        // Fourier-part potential alone
        let sys = oracle_system();
        let cfg = oracle_cfg(4.0);
        let f = direct_fourier_force(&sys, &cfg).unwrap();
        let step = 1e-5;
        let m = 0usize;
        let phi_f = |s: &ParticleSystem<f64>| -> f64 {
            let k = direct_kspace(s, &cfg).unwrap();
            let z = direct_zeromode(s, cfg.xi).unwrap();
            k[m] + z[m]
        };
        for axis in 0..3 {
            let mut moved = sys.positions()[m];
            moved[axis] += step;
            let plus = phi_f(&sys.with_moved(m, moved).unwrap());
            moved[axis] -= 2.0 * step;
            let minus = phi_f(&sys.with_moved(m, moved).unwrap());
            let fd = -sys.charges()[m] * (plus - minus) / (2.0 * step);
            assert_relative_eq!(f[m][axis], fd, max_relative = 2e-7, epsilon = 1e-9);
        }
    }

    #[test]
    fn fd_force_richardson_converges_to_analytic() {
        let sys = oracle_system();
        let cfg = oracle_cfg(4.0);
        let analytic = direct_force(&sys, &cfg).unwrap();
        let coarse = direct_force_fd(&sys, &cfg, 2e-4).unwrap();
        let fine = direct_force_fd(&sys, &cfg, 1e-4).unwrap();
        for m in 0..sys.len() {
            let e_coarse = (coarse[m] - analytic[m]).norm();
            let e_fine = (fine[m] - analytic[m]).norm();
            assert!(e_fine < 1e-7, "fd error too large: {e_fine}");
            if e_coarse > 1e-9 {
                // second-order scheme: error drops by ~4 when halving
                let ratio = e_coarse / e_fine;
                assert!(
                    (2.5..6.0).contains(&ratio),
                    "Richardson ratio {ratio} outside second-order band"
                );
            }
        }
    }
}
