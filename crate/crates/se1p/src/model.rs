//! Particle systems, result containers and their file formats.
//!
//! A system is a set of `N` point charges in a box `[0,L1) x [0,L2) x [0,L3)`
//! that is periodic in the third (`z`) direction only. Coordinates in the
//! free directions must lie inside the box; `z` coordinates are folded into
//! the principal cell on construction.
//!
//! # File formats
//!
//! Particle files are whitespace-separated text:
//!
//! ```text
//! N L1 L2 L3
//! x y z q        (N lines)
//! ```
//!
//! Result files are CSV with a `# schema=1` comment line followed by the
//! header `index,phi,fx,fy,fz`.

use std::fmt::Write as _;
use std::path::Path;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Result, SeError};
use crate::real::Real;
use crate::vec3::Vec3;

/// Relative bound on `|sum q|` below which a system counts as neutral.
const NEUTRALITY_EPS: f64 = 1e-12;

/// A charged particle system, periodic in `z` only.
#[derive(Clone, Debug)]
pub struct ParticleSystem<T> {
    positions: Vec<Vec3<T>>,
    charges: Vec<T>,
    boxd: [T; 3],
}

impl<T: Real> ParticleSystem<T> {
    /// Builds a system, validating coordinates and folding `z` into `[0,L3)`.
    ///
    /// Fails when the box is not positive and finite, a free-direction
    /// coordinate lies outside `[0,Li)`, any value is non-finite, or the
    /// lengths of the inputs disagree.
    pub fn new(positions: Vec<Vec3<T>>, charges: Vec<T>, boxd: [T; 3]) -> Result<Self> {
        if positions.len() != charges.len() {
            return Err(SeError::InvalidSystem(format!(
                "{} positions but {} charges",
                positions.len(),
                charges.len()
            )));
        }
        if positions.is_empty() {
            return Err(SeError::InvalidSystem("empty system".into()));
        }
        for l in boxd {
            if !(l.is_finite() && l > T::zero()) {
                return Err(SeError::InvalidSystem("box lengths must be positive".into()));
            }
        }
        let mut positions = positions;
        for (i, p) in positions.iter_mut().enumerate() {
            if !(p.x.is_finite() && p.y.is_finite() && p.z.is_finite()) {
                return Err(SeError::InvalidSystem(format!("non-finite position {i}")));
            }
            if p.x < T::zero() || p.x >= boxd[0] || p.y < T::zero() || p.y >= boxd[1] {
                return Err(SeError::InvalidSystem(format!(
                    "particle {i} outside the free-direction box"
                )));
            }
            p.z = fold_periodic(p.z, boxd[2]);
        }
        for (i, q) in charges.iter().enumerate() {
            if !q.is_finite() {
                return Err(SeError::InvalidSystem(format!("non-finite charge {i}")));
            }
        }
        Ok(Self { positions, charges, boxd })
    }

    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    pub fn positions(&self) -> &[Vec3<T>] {
        &self.positions
    }

    pub fn charges(&self) -> &[T] {
        &self.charges
    }

    pub fn boxd(&self) -> [T; 3] {
        self.boxd
    }

    /// Total charge `sum q_n`.
    pub fn total_charge(&self) -> T {
        self.charges.iter().copied().sum()
    }

    /// Squared-charge sum `Q = sum q_n^2` used by the truncation estimates.
    pub fn charge_sq_sum(&self) -> T {
        self.charges.iter().map(|&q| q * q).sum()
    }

    /// Whether the net charge vanishes relative to the charge magnitude.
    pub fn is_neutral(&self) -> bool {
        let scale: T = self.charges.iter().map(|&q| q.abs()).sum();
        if scale == T::zero() {
            return true;
        }
        self.total_charge().abs() <= T::of(NEUTRALITY_EPS) * scale
    }

    /// Returns a copy with particle `m` moved to `pos` (validated and folded).
    pub fn with_moved(&self, m: usize, pos: Vec3<T>) -> Result<Self> {
        let mut positions = self.positions.clone();
        positions[m] = pos;
        Self::new(positions, self.charges.clone(), self.boxd)
    }

    /// Loads a system from a particle file.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    /// Parses the particle file format from a string.
    pub fn parse(text: &str) -> Result<Self> {
        let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
        let (lno, header) = lines
            .next()
            .ok_or_else(|| SeError::Parse { line: 1, reason: "empty file".into() })?;
        let head: Vec<&str> = header.split_whitespace().collect();
        if head.len() != 4 {
            return Err(SeError::Parse {
                line: lno + 1,
                reason: "expected `N L1 L2 L3`".into(),
            });
        }
        let n: usize = head[0]
            .parse()
            .map_err(|_| SeError::Parse { line: lno + 1, reason: "bad particle count".into() })?;
        let mut boxd = [T::zero(); 3];
        for (i, tok) in head[1..].iter().enumerate() {
            boxd[i] = parse_scalar(tok, lno + 1)?;
        }
        let mut positions = Vec::with_capacity(n);
        let mut charges = Vec::with_capacity(n);
        for (lno, line) in lines {
            let f: Vec<&str> = line.split_whitespace().collect();
            if f.len() != 4 {
                return Err(SeError::Parse {
                    line: lno + 1,
                    reason: "expected `x y z q`".into(),
                });
            }
            positions.push(Vec3::new(
                parse_scalar(f[0], lno + 1)?,
                parse_scalar(f[1], lno + 1)?,
                parse_scalar(f[2], lno + 1)?,
            ));
            charges.push(parse_scalar(f[3], lno + 1)?);
        }
        if positions.len() != n {
            return Err(SeError::Parse {
                line: 1,
                reason: format!("header says {n} particles, found {}", positions.len()),
            });
        }
        Self::new(positions, charges, boxd)
    }

    /// Serializes to the particle file format.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(
            s,
            "{} {} {} {}",
            self.len(),
            self.boxd[0],
            self.boxd[1],
            self.boxd[2]
        );
        for (p, q) in self.positions.iter().zip(&self.charges) {
            let _ = writeln!(s, "{:.17e} {:.17e} {:.17e} {:.17e}", p.x, p.y, p.z, q);
        }
        s
    }

    /// Writes the particle file to disk.
    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        Ok(std::fs::write(path, self.to_text())?)
    }
}

fn parse_scalar<T: Real>(tok: &str, line: usize) -> Result<T> {
    let v: f64 = tok
        .parse()
        .map_err(|_| SeError::Parse { line, reason: format!("bad number `{tok}`") })?;
    if !v.is_finite() {
        return Err(SeError::Parse { line, reason: format!("non-finite `{tok}`") });
    }
    Ok(T::of(v))
}

/// Folds a coordinate into `[0, l)`.
pub fn fold_periodic<T: Real>(z: T, l: T) -> T {
    let mut r = z % l;
    if r < T::zero() {
        r += l;
    }
    if r >= l {
        r = T::zero();
    }
    r
}

/// Signed minimum-image separation along the periodic direction,
/// in `[-l/2, l/2)`.
pub fn min_image<T: Real>(dz: T, l: T) -> T {
    let half = l / T::of(2.0);
    let mut d = dz % l;
    if d < -half {
        d += l;
    }
    if d >= half {
        d -= l;
    }
    d
}

/// Draws `n` particles uniformly in the box with alternating unit charges.
///
/// `n` must be even so the system is neutral. The generator is seeded and
/// platform independent: the same seed always produces the same system.
pub fn gen_uniform<T: Real>(n: usize, boxd: [T; 3], seed: u64) -> Result<ParticleSystem<T>> {
    if n == 0 || n % 2 != 0 {
        return Err(SeError::InvalidSystem(format!(
            "particle count must be positive and even, got {n}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut positions = Vec::with_capacity(n);
    let mut charges = Vec::with_capacity(n);
    for i in 0..n {
        let x: f64 = rng.gen();
        let y: f64 = rng.gen();
        let z: f64 = rng.gen();
        positions.push(Vec3::new(
            T::of(x) * boxd[0],
            T::of(y) * boxd[1],
            T::of(z) * boxd[2],
        ));
        charges.push(if i % 2 == 0 { T::one() } else { -T::one() });
    }
    ParticleSystem::new(positions, charges, boxd)
}

/// Per-term energy breakdown of a solve.
#[derive(Clone, Copy, Debug, Default)]
pub struct EnergyBreakdown<T> {
    pub real: T,
    pub fourier: T,
    pub self_term: T,
}

/// Potentials, forces and energy returned by the solvers.
#[derive(Clone, Debug)]
pub struct Results<T> {
    pub potential: Vec<T>,
    pub force: Vec<Vec3<T>>,
    pub energy: T,
    pub breakdown: EnergyBreakdown<T>,
}

impl<T: Real> Results<T> {
    /// Assembles results, computing `energy = sum q_m phi_m` from the parts.
    pub fn assemble(
        charges: &[T],
        potential: Vec<T>,
        force: Vec<Vec3<T>>,
        breakdown: EnergyBreakdown<T>,
    ) -> Self {
        let energy = charges.iter().zip(&potential).map(|(&q, &p)| q * p).sum();
        Self { potential, force, energy, breakdown }
    }

    /// Renders the `index,phi,fx,fy,fz` CSV document.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("# schema=1\nindex,phi,fx,fy,fz\n");
        for (i, (phi, f)) in self.potential.iter().zip(&self.force).enumerate() {
            let _ = writeln!(s, "{i},{:.17e},{:.17e},{:.17e},{:.17e}", phi, f.x, f.y, f.z);
        }
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    #[test]
    fn parse_two_particle_file() {
        let sys: ParticleSystem<f64> =
            ParticleSystem::parse("2 1 1 1\n0.1 0.2 0.3 1.0\n0.4 0.5 1.2 -1.0\n").unwrap();
        assert_eq!(sys.len(), 2);
        assert!(sys.is_neutral());
        assert_relative_eq!(sys.positions()[1].z, 0.2, epsilon = 1e-15);
    }

    #[test]
    fn free_direction_out_of_box_is_rejected() {
        let r: Result<ParticleSystem<f64>> =
            ParticleSystem::parse("1 1 1 1\n1.5 0.2 0.3 1.0\n");
        assert!(matches!(r, Err(SeError::InvalidSystem(_))));
        let r: Result<ParticleSystem<f64>> =
            ParticleSystem::parse("1 1 1 1\n0.5 -0.1 0.3 1.0\n");
        assert!(matches!(r, Err(SeError::InvalidSystem(_))));
    }

    #[test]
    fn malformed_lines_are_rejected() {
        assert!(ParticleSystem::<f64>::parse("").is_err());
        assert!(ParticleSystem::<f64>::parse("2 1 1 1\n0.1 0.2 0.3\n").is_err());
        assert!(ParticleSystem::<f64>::parse("2 1 1 1\n0.1 0.2 0.3 nope\n").is_err());
        assert!(ParticleSystem::<f64>::parse("3 1 1 1\n0.1 0.2 0.3 1\n0.1 0.2 0.3 -1\n").is_err());
        assert!(ParticleSystem::<f64>::parse("1 1 1 1\n0.1 0.2 inf 1\n").is_err());
    }

    #[test]
    fn text_round_trip() {
        let sys: ParticleSystem<f64> = gen_uniform(10, [2.0, 3.0, 4.0], 42).unwrap();
        let back = ParticleSystem::parse(&sys.to_text()).unwrap();
        for (a, b) in sys.positions().iter().zip(back.positions()) {
            assert_eq!(a, b);
        }
        assert_eq!(sys.charges(), back.charges());
    }

    #[test]
    fn gen_uniform_contract() {
        let a: ParticleSystem<f64> = gen_uniform(2, [1.0, 1.0, 1.0], 7).unwrap();
        assert_eq!(a.charges(), &[1.0, -1.0]);
        assert_eq!(a.total_charge(), 0.0);

        let b: ParticleSystem<f64> = gen_uniform(100, [2.0, 2.0, 2.0], 9).unwrap();
        let c: ParticleSystem<f64> = gen_uniform(100, [2.0, 2.0, 2.0], 9).unwrap();
        assert!(b.is_neutral());
        assert_eq!(b.charge_sq_sum(), 100.0);
        for (p, r) in b.positions().iter().zip(c.positions()) {
            assert_eq!(p, r);
        }
        for p in b.positions() {
            assert!(p.x >= 0.0 && p.x < 2.0 && p.y >= 0.0 && p.y < 2.0);
            assert!(p.z >= 0.0 && p.z < 2.0);
        }

        assert!(gen_uniform::<f64>(7, [1.0, 1.0, 1.0], 0).is_err());
    }

    #[test]
    fn results_energy_is_charge_weighted_sum() {
        let r = Results::assemble(
            &[1.0, -2.0],
            vec![0.5, 0.25],
            vec![Vec3::zero(), Vec3::zero()],
            EnergyBreakdown::default(),
        );
        assert_relative_eq!(r.energy, 1.0 * 0.5 - 2.0 * 0.25);
        let csv = r.to_csv();
        assert!(csv.starts_with("# schema=1\nindex,phi,fx,fy,fz\n"));
        assert_eq!(csv.lines().count(), 4);
    }

    proptest! {
        #[test]
        fn folding_preserves_periodic_distance(z1 in -25.0..25.0f64, z2 in -25.0..25.0f64) {
            let l = 3.0;
            let d_raw = min_image(z1 - z2, l);
            let d_fold = min_image(fold_periodic(z1, l) - fold_periodic(z2, l), l);
            prop_assert!((d_raw.abs() - d_fold.abs()).abs() < 1e-12);
        }

        #[test]
        fn fold_lands_in_cell(z in -100.0..100.0f64) {
            let l = 2.5;
            let f = fold_periodic(z, l);
            prop_assert!((0.0..l).contains(&f));
        }
    }
}
