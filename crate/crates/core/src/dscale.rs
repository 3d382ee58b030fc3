//! D→∞ energy functionals over point electrons and their global
//! minimisation.
//!
//! In the large-D limit each electron freezes at a point and the energy is a
//! classical function of the 3N coordinates:
//!
//! ```text
//! planar:  Σ 1/(2m yᵢ²)        + Σ V(rᵢ) + Σ_{i<j} [(zᵢ−zⱼ)² + (xᵢ−xⱼ)² + yᵢ² + yⱼ²]^{-½}
//! diatomic: Σ 1/(2m(xᵢ²+yᵢ²))  + Σ V(rᵢ) + Σ_{i<j} [(zᵢ−zⱼ)² + xᵢ² + xⱼ² + yᵢ² + yⱼ²]^{-½}
//! central:  Σ 1/(2m|rᵢ|²)      + Σ V(rᵢ) + Σ_{i<j} [|rᵢ|² + |rⱼ|²]^{-½}
//! ```
//!
//! with V the dressed potential and m the relativistic mass multiplier.

use std::fmt;
use std::str::FromStr;

use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dressed::DressedPotential;
use crate::fmt::{round15, ser_f64};
use crate::optimize::{bfgs, Objective, Options, Status};
use crate::{Error, Result, Vec3, HARTREE_EV};

pub const DEFAULT_DEGENERACY_TOL: f64 = 1e-12;
pub const DEFAULT_RESTARTS: usize = 24;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HamiltonianKind {
    CentralForce,
    Diatomic,
    Planar,
}

impl HamiltonianKind {
    pub fn label(&self) -> &'static str {
        match self {
            Self::CentralForce => "cf",
            Self::Diatomic => "da",
            Self::Planar => "planar",
        }
    }
}

impl fmt::Display for HamiltonianKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for HamiltonianKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "cf" | "central" | "central_force" => Ok(Self::CentralForce),
            "da" | "diatomic" => Ok(Self::Diatomic),
            "planar" | "p" => Ok(Self::Planar),
            _ => Err(Error::InvalidParameter(format!("unknown hamiltonian '{s}' (cf|da|planar)"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ElectronConfiguration {
    pub positions: Vec<[f64; 3]>,
}

impl ElectronConfiguration {
    pub fn new(positions: Vec<Vec3>) -> Result<Self> {
        if positions.is_empty() {
            return Err(Error::InvalidParameter("configuration needs N >= 1".into()));
        }
        if positions.iter().any(|p| !p.iter().all(|v| v.is_finite())) {
            return Err(Error::InvalidParameter("non-finite electron coordinate".into()));
        }
        Ok(Self {
            positions: positions.iter().map(|p| [p.x, p.y, p.z]).collect(),
        })
    }

    pub fn from_flat(x: &[f64]) -> Result<Self> {
        if x.len() % 3 != 0 {
            return Err(Error::InvalidParameter("flat configuration length must be 3N".into()));
        }
        Self::new(x.chunks(3).map(|c| Vec3::new(c[0], c[1], c[2])).collect())
    }

    pub fn n(&self) -> usize {
        self.positions.len()
    }

    pub fn vectors(&self) -> Vec<Vec3> {
        self.positions.iter().map(|p| Vec3::new(p[0], p[1], p[2])).collect()
    }

    pub fn to_flat(&self) -> Vec<f64> {
        self.positions.iter().flatten().copied().collect()
    }

    /// Image under z → −z.
    pub fn mirrored_z(&self) -> Self {
        Self {
            positions: self.positions.iter().map(|p| [p[0], p[1], -p[2]]).collect(),
        }
    }
}

/// Energy functional of one kind over a fixed potential and mass.
#[derive(Clone, Copy, Debug)]
pub struct Hamiltonian<'a> {
    pub kind: HamiltonianKind,
    pub pot: &'a DressedPotential,
    pub mass: f64,
    pub degeneracy_tol: f64,
}

/// Energy split into its three parts.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct EnergyTerms {
    pub kinetic: f64,
    pub external: f64,
    pub repulsion: f64,
}

impl EnergyTerms {
    pub fn total(&self) -> f64 {
        self.kinetic + self.external + self.repulsion
    }
}

impl<'a> Hamiltonian<'a> {
    pub fn new(kind: HamiltonianKind, pot: &'a DressedPotential, mass: f64) -> Result<Self> {
        if !(mass > 0.0 && mass.is_finite()) {
            return Err(Error::InvalidParameter(format!("mass multiplier {mass} must be > 0")));
        }
        Ok(Self {
            kind,
            pot,
            mass,
            degeneracy_tol: DEFAULT_DEGENERACY_TOL,
        })
    }

    pub fn with_degeneracy_tol(mut self, tol: f64) -> Self {
        self.degeneracy_tol = tol;
        self
    }

    fn kinetic_denominator(&self, r: &Vec3) -> f64 {
        match self.kind {
            HamiltonianKind::Planar => r.y * r.y,
            HamiltonianKind::Diatomic => r.x * r.x + r.y * r.y,
            HamiltonianKind::CentralForce => r.norm_squared(),
        }
    }

    pub fn terms(&self, pos: &[Vec3]) -> Result<EnergyTerms> {
        let mut t = EnergyTerms::default();
        for (i, r) in pos.iter().enumerate() {
            let d2 = self.kinetic_denominator(r);
            if d2.sqrt() < self.degeneracy_tol {
                return Err(Error::DegenerateConfiguration {
                    electron: i,
                    denominator: d2.sqrt(),
                });
            }
            t.kinetic += 0.5 / (self.mass * d2);
            t.external += self.pot.eval(r)?;
        }
        for i in 0..pos.len() {
            for j in i + 1..pos.len() {
                t.repulsion += 1.0 / self.pair_s(&pos[i], &pos[j]).sqrt();
            }
        }
        Ok(t)
    }

    pub fn energy(&self, pos: &[Vec3]) -> Result<f64> {
        Ok(self.terms(pos)?.total())
    }

    fn pair_s(&self, a: &Vec3, b: &Vec3) -> f64 {
        match self.kind {
            HamiltonianKind::Planar => {
                (a.z - b.z).powi(2) + (a.x - b.x).powi(2) + a.y * a.y + b.y * b.y
            }
            HamiltonianKind::Diatomic => {
                (a.z - b.z).powi(2) + a.x * a.x + b.x * b.x + a.y * a.y + b.y * b.y
            }
            HamiltonianKind::CentralForce => a.norm_squared() + b.norm_squared(),
        }
    }

    pub fn energy_gradient(&self, pos: &[Vec3]) -> Result<(f64, Vec<Vec3>)> {
        let mut e = 0.0;
        let mut g = vec![Vec3::zeros(); pos.len()];
        for (i, r) in pos.iter().enumerate() {
            let d2 = self.kinetic_denominator(r);
            if d2.sqrt() < self.degeneracy_tol {
                return Err(Error::DegenerateConfiguration {
                    electron: i,
                    denominator: d2.sqrt(),
                });
            }
            e += 0.5 / (self.mass * d2);
            // ∂/∂c [1/(2m d²)] = −(∂d²/∂c)/(2m d⁴)
            let w = -1.0 / (self.mass * d2 * d2);
            match self.kind {
                HamiltonianKind::Planar => g[i].y += w * r.y,
                HamiltonianKind::Diatomic => {
                    g[i].x += w * r.x;
                    g[i].y += w * r.y;
                }
                HamiltonianKind::CentralForce => g[i] += r * w,
            }
            let (v, dv) = self.pot.eval_with_gradient(r)?;
            e += v;
            g[i] += dv;
        }
        for i in 0..pos.len() {
            for j in i + 1..pos.len() {
                let (a, b) = (&pos[i], &pos[j]);
                let inv = 1.0 / self.pair_s(a, b).sqrt();
                e += inv;
                let c = inv * inv * inv;
                match self.kind {
                    HamiltonianKind::Planar => {
                        let dx = a.x - b.x;
                        let dz = a.z - b.z;
                        g[i] += Vec3::new(-dx * c, -a.y * c, -dz * c);
                        g[j] += Vec3::new(dx * c, -b.y * c, dz * c);
                    }
                    HamiltonianKind::Diatomic => {
                        let dz = a.z - b.z;
                        g[i] += Vec3::new(-a.x * c, -a.y * c, -dz * c);
                        g[j] += Vec3::new(-b.x * c, -b.y * c, dz * c);
                    }
                    HamiltonianKind::CentralForce => {
                        g[i] -= a * c;
                        g[j] -= b * c;
                    }
                }
            }
        }
        Ok((e, g))
    }
}

pub fn energy(kind: HamiltonianKind, config: &ElectronConfiguration, pot: &DressedPotential, mass: f64) -> Result<f64> {
    Hamiltonian::new(kind, pot, mass)?.energy(&config.vectors())
}

/// Flattened 3N gradient `[∂x₀, ∂y₀, ∂z₀, ∂x₁, …]`.
pub fn gradient(kind: HamiltonianKind, config: &ElectronConfiguration, pot: &DressedPotential, mass: f64) -> Result<Vec<f64>> {
    let (_, g) = Hamiltonian::new(kind, pot, mass)?.energy_gradient(&config.vectors())?;
    Ok(g.iter().flat_map(|v| [v.x, v.y, v.z]).collect())
}

#[derive(Clone, Debug)]
pub struct MinimizeOptions {
    pub restarts: usize,
    pub seed: u64,
    pub gtol: f64,
    pub max_iter: usize,
    pub degeneracy_tol: f64,
    /// Extra start tried before the random ones (e.g. the previous sweep
    /// point's minimiser). Used only when its electron count matches.
    pub warm_start: Option<ElectronConfiguration>,
}

impl Default for MinimizeOptions {
    fn default() -> Self {
        Self {
            restarts: DEFAULT_RESTARTS,
            seed: 0,
            gtol: 1e-8,
            max_iter: 2000,
            degeneracy_tol: DEFAULT_DEGENERACY_TOL,
            warm_start: None,
        }
    }
}

impl MinimizeOptions {
    pub fn with_restarts(mut self, restarts: usize) -> Self {
        self.restarts = restarts;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_warm_start(mut self, warm: Option<ElectronConfiguration>) -> Self {
        self.warm_start = warm;
        self
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GroundState {
    pub kind: HamiltonianKind,
    #[serde(rename = "Z", serialize_with = "ser_f64")]
    pub charge: f64,
    /// Electrons requested.
    #[serde(rename = "N")]
    pub n: usize,
    #[serde(serialize_with = "ser_f64")]
    pub alpha0: f64,
    #[serde(serialize_with = "ser_f64")]
    pub omega: f64,
    #[serde(serialize_with = "ser_f64")]
    pub mass: f64,
    #[serde(serialize_with = "ser_f64")]
    pub energy: f64,
    #[serde(serialize_with = "ser_f64")]
    pub energy_ev: f64,
    /// Positions of the electrons that stayed bound.
    pub positions: Vec<[f64; 3]>,
    /// Electrons shed to infinity; they contribute zero energy.
    pub escaped: usize,
    pub converged: bool,
    #[serde(serialize_with = "ser_f64")]
    pub grad_norm: f64,
    /// Restarts run, including a warm start.
    pub restarts: usize,
    /// Index of the winning restart; a warm start has index 0 and shifts the
    /// random ones up by one.
    pub best_restart: usize,
}

impl GroundState {
    pub fn config(&self) -> Option<ElectronConfiguration> {
        if self.positions.is_empty() {
            None
        } else {
            Some(ElectronConfiguration {
                positions: self.positions.clone(),
            })
        }
    }

    pub fn require_converged(self) -> Result<Self> {
        if self.converged {
            Ok(self)
        } else {
            Err(Error::NotConverged {
                restarts: self.restarts,
                grad_norm: self.grad_norm,
            })
        }
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

#[derive(Clone, Debug)]
struct Local {
    energy: f64,
    positions: Vec<Vec3>,
    escaped: usize,
    grad_norm: f64,
    converged: bool,
}

struct Flat<'h, 'p> {
    h: &'h Hamiltonian<'p>,
    escape_radius: f64,
}

impl Objective for Flat<'_, '_> {
    fn value_grad(&self, x: &DVector<f64>) -> Option<(f64, DVector<f64>)> {
        let pos = unflatten(x.as_slice());
        let (e, g) = self.h.energy_gradient(&pos).ok()?;
        Some((e, DVector::from_iterator(x.len(), g.iter().flat_map(|v| [v.x, v.y, v.z]))))
    }

    fn abort(&self, x: &DVector<f64>) -> bool {
        x.as_slice().chunks(3).any(|c| Vec3::new(c[0], c[1], c[2]).norm() > self.escape_radius)
    }
}

fn unflatten(x: &[f64]) -> Vec<Vec3> {
    x.chunks(3).map(|c| Vec3::new(c[0], c[1], c[2])).collect()
}

fn flatten(p: &[Vec3]) -> DVector<f64> {
    DVector::from_iterator(p.len() * 3, p.iter().flat_map(|v| [v.x, v.y, v.z]))
}

/// Local descent from `start` that sheds unbound electrons: any electron
/// that leaves the escape sphere, or whose removal lowers the converged
/// energy, is dropped and the rest re-minimised.
fn descend(h: &Hamiltonian, start: Vec<Vec3>, opts: &MinimizeOptions, escape_radius: f64, max_step: f64) -> Local {
    let bopts = Options {
        gtol: opts.gtol,
        max_iter: opts.max_iter,
        max_step,
        ..Options::default()
    };
    let obj = Flat { h, escape_radius };
    let mut pos = start;
    let mut escaped = 0;
    loop {
        if pos.is_empty() {
            return Local {
                energy: 0.0,
                positions: pos,
                escaped,
                grad_norm: 0.0,
                converged: true,
            };
        }
        let Some(m) = bfgs(&obj, flatten(&pos), &bopts) else {
            return Local {
                energy: f64::INFINITY,
                positions: pos,
                escaped,
                grad_norm: f64::INFINITY,
                converged: false,
            };
        };
        pos = unflatten(m.x.as_slice());
        if m.status == Status::Aborted {
            let before = pos.len();
            pos.retain(|r| r.norm() <= escape_radius);
            escaped += before - pos.len();
            continue;
        }
        // the least useful electron, if removing it does not raise the energy
        let shed = (0..pos.len())
            .filter_map(|i| {
                let mut rest = pos.clone();
                rest.remove(i);
                let e_rest = if rest.is_empty() { Some(0.0) } else { h.energy(&rest).ok() };
                e_rest.map(|e| (i, m.f - e))
            })
            .filter(|&(_, gain)| gain >= 0.0)
            .max_by(|a, b| a.1.total_cmp(&b.1));
        if let Some((i, _)) = shed {
            pos.remove(i);
            escaped += 1;
            continue;
        }
        for r in pos.iter_mut() {
            r.y = r.y.abs();
        }
        return Local {
            energy: m.f,
            positions: pos,
            escaped,
            grad_norm: m.grad_norm(),
            converged: m.converged(),
        };
    }
}

/// Seed points for multistart: the origin, the nucleus at the four
/// figure-8 turning phases, and the ends of the trajectory along x and z.
fn seed_sites(pot: &DressedPotential) -> Vec<Vec3> {
    let traj = pot.trajectory();
    let mut sites = traj.well_sites();
    let ext = traj.extent();
    for s in [1.0, -1.0] {
        if ext.z > 0.0 {
            sites.push(Vec3::new(0.0, 0.0, s * ext.z));
        }
        if ext.x > 0.0 {
            sites.push(Vec3::new(s * ext.x, 0.0, 0.0));
        }
    }
    sites
}

/// Multistart BFGS over the 3N coordinates.
///
/// Restarts run in parallel; restart k draws from its own ChaCha stream of
/// `seed`, and the winner is the lowest energy among converged restarts
/// (ties broken by index), so the result does not depend on scheduling.
pub fn minimize_with(
    kind: HamiltonianKind,
    n: usize,
    pot: &DressedPotential,
    mass: f64,
    opts: &MinimizeOptions,
) -> Result<GroundState> {
    if n == 0 {
        return Err(Error::InvalidParameter("N must be >= 1".into()));
    }
    if opts.restarts == 0 {
        return Err(Error::InvalidParameter("restarts must be >= 1".into()));
    }
    let h = Hamiltonian::new(kind, pot, mass)?.with_degeneracy_tol(opts.degeneracy_tol);
    let extent = pot.trajectory().extent().max_half_width();
    let z = pot.charge();
    let r_eff = (1.0 + extent.sqrt()) / z;
    let jitter = 0.1 * (1.0 + extent.sqrt());
    let escape_radius = 10.0 * (extent + 10.0 * r_eff.max(1.0));
    let max_step = 1.0 + 0.1 * extent;
    let sites = seed_sites(pot);

    let mut starts: Vec<Vec<Vec3>> = Vec::new();
    if let Some(w) = opts.warm_start.as_ref().filter(|w| w.n() == n) {
        starts.push(w.vectors());
    }
    for k in 0..opts.restarts {
        let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
        rng.set_stream(k as u64);
        let start = (0..n)
            .map(|i| {
                let site = if k == 0 { sites[i % sites.len()] } else { sites[rng.gen_range(0..sites.len())] };
                Vec3::new(
                    site.x + jitter * rng.gen_range(-1.0..1.0),
                    r_eff * rng.gen_range(0.5..2.0),
                    site.z + jitter * rng.gen_range(-1.0..1.0),
                )
            })
            .collect();
        starts.push(start);
    }

    let locals: Vec<Local> = starts
        .into_par_iter()
        .map(|s| descend(&h, s, opts, escape_radius, max_step))
        .collect();
    let pick = |only_converged: bool| {
        locals
            .iter()
            .enumerate()
            .filter(|(_, l)| l.energy.is_finite() && (l.converged || !only_converged))
            .min_by(|a, b| a.1.energy.total_cmp(&b.1.energy).then(a.0.cmp(&b.0)))
    };
    let (best_restart, best) = pick(true).or_else(|| pick(false)).ok_or(Error::NotConverged {
        restarts: locals.len(),
        grad_norm: f64::INFINITY,
    })?;
    let params = pot.params();
    Ok(GroundState {
        kind,
        charge: z,
        n,
        alpha0: params.alpha0,
        omega: params.omega,
        mass,
        energy: best.energy,
        energy_ev: best.energy * HARTREE_EV,
        positions: best.positions.iter().map(|p| [p.x, p.y, p.z]).collect(),
        escaped: best.escaped,
        converged: best.converged,
        grad_norm: best.grad_norm,
        restarts: locals.len(),
        best_restart,
    })
}

pub fn minimize(
    kind: HamiltonianKind,
    n: usize,
    pot: &DressedPotential,
    mass: f64,
    restarts: usize,
    seed: u64,
) -> Result<GroundState> {
    minimize_with(kind, n, pot, mass, &MinimizeOptions::default().with_restarts(restarts).with_seed(seed))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BindingEnergy {
    #[serde(serialize_with = "ser_f64")]
    pub value: f64,
    #[serde(serialize_with = "ser_f64")]
    pub e_n: f64,
    #[serde(serialize_with = "ser_f64")]
    pub e_n_minus_1: f64,
    /// B.E. is negative beyond round-off and no electron was shed.
    pub bound: bool,
}

/// Tolerance below zero a binding energy must reach to count as bound.
pub const BOUND_TOL: f64 = 1e-9;

impl BindingEnergy {
    pub fn from_states(n: &GroundState, n_minus_1: Option<&GroundState>) -> Self {
        let e_prev = n_minus_1.map_or(0.0, |g| g.energy);
        let value = n.energy - e_prev;
        Self {
            value,
            e_n: n.energy,
            e_n_minus_1: e_prev,
            bound: value < -BOUND_TOL && n.escaped == 0,
        }
    }
}

/// E(N) − E(N−1) with E(0) = 0, both from [`minimize_with`] on the same
/// trajectory with nuclear charge `z`.
pub fn binding_energy(
    kind: HamiltonianKind,
    n: usize,
    z: f64,
    pot: &DressedPotential,
    mass: f64,
    opts: &MinimizeOptions,
) -> Result<BindingEnergy> {
    let pot = pot.with_charge(z)?;
    let e_n = minimize_with(kind, n, &pot, mass, opts)?.require_converged()?;
    let e_prev = if n > 1 {
        Some(minimize_with(kind, n - 1, &pot, mass, opts)?.require_converged()?)
    } else {
        None
    };
    Ok(BindingEnergy::from_states(&e_n, e_prev.as_ref()))
}

/// Rounds every coordinate to 15 significant digits.
pub fn round_config(c: &ElectronConfiguration) -> ElectronConfiguration {
    ElectronConfiguration {
        positions: c.positions.iter().map(|p| p.map(round15)).collect(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::trajectory::{FieldParams, Trajectory, TrajectoryKind};
    use approx::assert_abs_diff_eq;

    fn bare(z: f64) -> DressedPotential {
        DressedPotential::new(z, Trajectory::new(TrajectoryKind::NonRelLinear, FieldParams::new(0.0)).unwrap()).unwrap()
    }

    #[test]
    fn hand_evaluated_energies() {
        let p = bare(1.0);
        let one = ElectronConfiguration::new(vec![Vec3::new(0.0, 0.0, 1.0)]).unwrap();
        assert_abs_diff_eq!(energy(HamiltonianKind::CentralForce, &one, &p, 1.0).unwrap(), -0.5, epsilon = 1e-15);
        let y = ElectronConfiguration::new(vec![Vec3::new(0.0, 1.0, 0.0)]).unwrap();
        assert_abs_diff_eq!(energy(HamiltonianKind::Planar, &y, &p, 1.0).unwrap(), -0.5, epsilon = 1e-15);
        let two = ElectronConfiguration::new(vec![Vec3::new(0.0, 1.0, 0.0); 2]).unwrap();
        let e = energy(HamiltonianKind::Planar, &two, &p, 1.0).unwrap();
        assert_abs_diff_eq!(e, -1.0 + 1.0 / 2f64.sqrt(), epsilon = 1e-15);
    }

    #[test]
    fn degenerate_kinetic_term() {
        let p = bare(1.0);
        let c = ElectronConfiguration::new(vec![Vec3::new(1.0, 0.0, 2.0)]).unwrap();
        assert!(matches!(
            energy(HamiltonianKind::Planar, &c, &p, 1.0),
            Err(Error::DegenerateConfiguration { electron: 0, .. })
        ));
        assert!(energy(HamiltonianKind::Diatomic, &c, &p, 1.0).is_ok());
        assert!(ElectronConfiguration::new(vec![]).is_err());
    }

    #[test]
    fn stationary_at_bohr_radius() {
        let p = bare(1.0);
        let c = ElectronConfiguration::new(vec![Vec3::new(0.0, 1.0, 0.0)]).unwrap();
        let g = gradient(HamiltonianKind::Planar, &c, &p, 1.0).unwrap();
        assert!(g.iter().map(|v| v * v).sum::<f64>().sqrt() < 1e-8);
    }

    #[test]
    fn hydrogenic_minimum() {
        for z in [1.0, 2.0, 3.0] {
            let g = minimize(HamiltonianKind::CentralForce, 1, &bare(z), 1.0, 4, 7).unwrap();
            assert!(g.converged);
            assert_abs_diff_eq!(g.energy, -z * z / 2.0, epsilon = 1e-10);
            let r = Vec3::from(g.positions[0]).norm();
            assert_abs_diff_eq!(r, 1.0 / z, epsilon = 1e-7);
        }
    }

    #[test]
    fn kind_parsing() {
        assert_eq!("cf".parse::<HamiltonianKind>().unwrap(), HamiltonianKind::CentralForce);
        assert_eq!("DA".parse::<HamiltonianKind>().unwrap(), HamiltonianKind::Diatomic);
        assert_eq!("planar".parse::<HamiltonianKind>().unwrap(), HamiltonianKind::Planar);
        assert!("x".parse::<HamiltonianKind>().is_err());
    }

    #[test]
    fn unbound_electron_is_shed() {
        // three electrons on a proton: at most two stay
        let g = minimize(HamiltonianKind::Planar, 3, &bare(1.0), 1.0, 6, 1).unwrap();
        assert!(g.escaped >= 1);
        assert_eq!(g.positions.len() + g.escaped, 3);
    }

    #[test]
    fn json_record_fields() {
        let g = minimize(HamiltonianKind::Planar, 1, &bare(1.0), 1.0, 2, 0).unwrap();
        let v: serde_json::Value = serde_json::from_str(&g.to_json().unwrap()).unwrap();
        for k in ["kind", "Z", "N", "alpha0", "omega", "energy", "positions", "converged", "restarts"] {
            assert!(v.get(k).is_some(), "{k}");
        }
        assert_eq!(v["kind"], "planar");
    }
}
