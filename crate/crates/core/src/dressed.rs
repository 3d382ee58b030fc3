//! Period-averaged dressed Coulomb potential and the relativistic mass gauge.
//!
//! In the Kramers–Henneberger frame the nucleus runs along −α⃗(φ) and the
//! electron sees the cycle average
//!
//! ```text
//! V(r) = −(Z/2π) ∮ dφ / √(|r + α⃗(φ)|² + ε²)
//! ```
//!
//! evaluated with the uniform trapezoid rule in φ, which converges
//! spectrally for points off the path. Close to the path the step is halved
//! until successive sums agree to a relative tolerance.

use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::fmt::sig15;
use crate::trajectory::{FieldParams, Trajectory};
use crate::{Error, Result, Vec3};

pub const DEFAULT_PHASE_NODES: usize = 512;

/// Default relative tolerance of the adaptive phase refinement.
pub const DEFAULT_REFINE_TOL: f64 = 1e-7;

const MAX_REFINED_NODES: usize = 1 << 20;

/// Relativistic mass multiplier m_r/m_e = (1 + 2q)^½ with q = U_p/(m c²).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MassGauge {
    pub q: f64,
    pub multiplier: f64,
}

impl MassGauge {
    pub fn from_params(params: &FieldParams) -> Self {
        // U_p = E0²/(4ω²), c = 1/α_f
        let e0 = params.field_amplitude();
        let up = e0 * e0 / (4.0 * params.omega * params.omega);
        let q = up * params.alpha_f * params.alpha_f;
        Self {
            q,
            multiplier: (1.0 + 2.0 * q).sqrt(),
        }
    }

    /// Rest mass, for runs with the gauge switched off.
    pub fn rest() -> Self {
        Self {
            q: 0.0,
            multiplier: 1.0,
        }
    }
}

/// Coefficient κ in 2q = κ·α₀²ω², i.e. α_f²/2.
pub fn two_q_coefficient(alpha_f: f64) -> f64 {
    0.5 * alpha_f * alpha_f
}

/// (1 + 2q)^½ for the given field.
pub fn mass_factor(params: &FieldParams) -> f64 {
    MassGauge::from_params(params).multiplier
}

/// Dressed potential of a nucleus of charge `Z` quivering along a trajectory.
///
/// Immutable after construction; safe to share between threads.
#[derive(Clone, Debug)]
pub struct DressedPotential {
    charge: f64,
    trajectory: Trajectory,
    softening: f64,
    refine_tol: Option<f64>,
    nodes: Vec<Vec3>,
}

impl DressedPotential {
    pub fn new(charge: f64, trajectory: Trajectory) -> Result<Self> {
        Self::with_phase_nodes(charge, trajectory, DEFAULT_PHASE_NODES)
    }

    pub fn with_phase_nodes(charge: f64, trajectory: Trajectory, n_phase: usize) -> Result<Self> {
        if !(charge > 0.0 && charge.is_finite()) {
            return Err(Error::InvalidParameter(format!("nuclear charge {charge} must be > 0")));
        }
        if n_phase == 0 {
            return Err(Error::InvalidParameter("n_phase must be positive".into()));
        }
        trajectory.params.validate()?;
        trajectory.kind.validate()?;
        let nodes = trajectory.nodes(n_phase);
        Ok(Self {
            charge,
            trajectory,
            softening: 0.0,
            refine_tol: Some(DEFAULT_REFINE_TOL),
            nodes,
        })
    }

    /// Node count for which the spacing between consecutive phase nodes
    /// along the path is at most `max_spacing` Bohr, never below the default.
    pub fn auto_phase_nodes(trajectory: &Trajectory, max_spacing: f64) -> usize {
        let wanted = (trajectory.path_length() / max_spacing).ceil() as usize;
        wanted.max(DEFAULT_PHASE_NODES).next_power_of_two()
    }

    /// Soft-core ε (Bohr). Intended for rendering grids only.
    pub fn with_softening(mut self, eps: f64) -> Result<Self> {
        if !(eps >= 0.0 && eps.is_finite()) {
            return Err(Error::InvalidParameter(format!("softening {eps} must be >= 0")));
        }
        self.softening = eps;
        Ok(self)
    }

    /// Same trajectory and quadrature with a different charge.
    pub fn with_charge(&self, charge: f64) -> Result<Self> {
        if !(charge > 0.0 && charge.is_finite()) {
            return Err(Error::InvalidParameter(format!("nuclear charge {charge} must be > 0")));
        }
        let mut p = self.clone();
        p.charge = charge;
        Ok(p)
    }

    pub fn charge(&self) -> f64 {
        self.charge
    }

    pub fn trajectory(&self) -> &Trajectory {
        &self.trajectory
    }

    pub fn params(&self) -> &FieldParams {
        &self.trajectory.params
    }

    pub fn n_phase(&self) -> usize {
        self.nodes.len()
    }

    pub fn softening(&self) -> f64 {
        self.softening
    }

    /// Trajectory displacements α⃗(φ_k) at the quadrature nodes.
    pub fn nodes(&self) -> &[Vec3] {
        &self.nodes
    }

    /// Positions of the nucleus in the KH frame, −α⃗(φ_k).
    pub fn nucleus_positions(&self) -> impl Iterator<Item = Vec3> + '_ {
        self.nodes.iter().map(|a| -a)
    }

    pub fn eval(&self, r: &Vec3) -> Result<f64> {
        Ok(self.average(r, false)?.0)
    }

    /// Value and gradient; the gradient is the phase average of the
    /// integrand's gradient on the same nodes.
    pub fn eval_with_gradient(&self, r: &Vec3) -> Result<(f64, Vec3)> {
        self.average(r, true)
    }

    /// Relative tolerance on the difference between the n- and n/2-node
    /// sums above which the rule is refined by halving the phase step.
    /// `None` keeps the fixed rule.
    pub fn with_refinement(mut self, tol: Option<f64>) -> Result<Self> {
        if let Some(t) = tol {
            if !(t > 0.0 && t.is_finite()) {
                return Err(Error::InvalidParameter(format!("refinement tolerance {t} must be > 0")));
            }
        }
        self.refine_tol = tol;
        Ok(self)
    }

    pub fn refinement(&self) -> Option<f64> {
        self.refine_tol
    }

    /// Cycle average of `f(α⃗(φ))` on this potential's phase rule, with the
    /// same refinement as [`Self::eval`]. Multiplies by nothing: the charge
    /// and sign are left to the caller.
    pub fn phase_average<F: Fn(&Vec3) -> f64>(&self, f: F) -> f64 {
        let n = self.nodes.len();
        let (mut s_even, mut s_odd) = (0.0, 0.0);
        for (k, a) in self.nodes.iter().enumerate() {
            if k % 2 == 0 {
                s_even += f(a);
            } else {
                s_odd += f(a);
            }
        }
        let mut total = s_even + s_odd;
        let mut m = n;
        if let (Some(tol), true) = (self.refine_tol, n >= 4 && n % 2 == 0) {
            let mut prev = s_even / (n / 2) as f64;
            loop {
                let cur = total / m as f64;
                if (cur - prev).abs() <= tol * cur.abs() || m >= MAX_REFINED_NODES {
                    break;
                }
                let h = std::f64::consts::TAU / m as f64;
                let s_mid: f64 = (0..m).map(|k| f(&self.trajectory.eval(h * (k as f64 + 0.5)))).sum();
                prev = cur;
                total += s_mid;
                m *= 2;
            }
        }
        total / m as f64
    }

    fn average(&self, r: &Vec3, want_grad: bool) -> Result<(f64, Vec3)> {
        let eps2 = self.softening * self.softening;
        let term = |a: &Vec3, sum: &mut f64, grad: &mut Vec3| -> Result<()> {
            let d = r + a;
            let d2 = d.norm_squared() + eps2;
            if d2 == 0.0 {
                return Err(non_finite(r));
            }
            let inv = 1.0 / d2.sqrt();
            *sum += inv;
            if want_grad {
                *grad += d * (inv * inv * inv);
            }
            Ok(())
        };
        let n = self.nodes.len();
        let (mut s_even, mut s_odd) = (0.0, 0.0);
        let (mut g_even, mut g_odd) = (Vec3::zeros(), Vec3::zeros());
        for (k, a) in self.nodes.iter().enumerate() {
            if k % 2 == 0 {
                term(a, &mut s_even, &mut g_even)?;
            } else {
                term(a, &mut s_odd, &mut g_odd)?;
            }
        }
        let mut total = s_even + s_odd;
        let mut gtotal = g_even + g_odd;
        let mut m = n;
        if let (Some(tol), true) = (self.refine_tol, n >= 4 && n % 2 == 0) {
            let mut prev = s_even / (n / 2) as f64;
            loop {
                let cur = total / m as f64;
                if (cur - prev).abs() <= tol * cur.abs() || m >= MAX_REFINED_NODES {
                    break;
                }
                let h = std::f64::consts::TAU / m as f64;
                let (mut s_mid, mut g_mid) = (0.0, Vec3::zeros());
                for k in 0..m {
                    let a = self.trajectory.eval(h * (k as f64 + 0.5));
                    term(&a, &mut s_mid, &mut g_mid)?;
                }
                prev = cur;
                total += s_mid;
                gtotal += g_mid;
                m *= 2;
            }
        }
        let w = self.charge / m as f64;
        Ok((-w * total, gtotal * w))
    }
}

fn non_finite(r: &Vec3) -> Error {
    Error::NonFinite {
        x: r.x,
        y: r.y,
        z: r.z,
    }
}

/// Free-function form of [`DressedPotential::eval`].
pub fn eval_dressed(pot: &DressedPotential, r: &Vec3) -> Result<f64> {
    pot.eval(r)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridMeta {
    pub alpha0: f64,
    pub omega: f64,
    pub kind: String,
    pub charge: f64,
    pub n_phase: usize,
    pub softening: f64,
    pub x_range: (f64, f64),
    pub z_range: (f64, f64),
    pub nx: usize,
    pub nz: usize,
    /// Fixed y of the sampled plane.
    pub y: f64,
}

/// Potential sampled on the y = const plane. `values[iz * nx + ix]`; cells
/// where the potential is not finite hold `None`.
#[derive(Clone, Debug, PartialEq)]
pub struct PotentialGrid {
    pub meta: GridMeta,
    pub values: Vec<Option<f64>>,
}

fn linspace(lo: f64, hi: f64, n: usize) -> impl Iterator<Item = f64> {
    let step = (hi - lo) / (n - 1) as f64;
    (0..n).map(move |i| if i + 1 == n { hi } else { lo + step * i as f64 })
}

pub fn potential_grid(
    pot: &DressedPotential,
    x_range: (f64, f64),
    z_range: (f64, f64),
    nx: usize,
    nz: usize,
) -> Result<PotentialGrid> {
    potential_grid_at(pot, x_range, z_range, nx, nz, 0.0)
}

pub fn potential_grid_at(
    pot: &DressedPotential,
    x_range: (f64, f64),
    z_range: (f64, f64),
    nx: usize,
    nz: usize,
    y: f64,
) -> Result<PotentialGrid> {
    if nx < 2 || nz < 2 {
        return Err(Error::InvalidParameter("grid needs nx, nz >= 2".into()));
    }
    let xs: Vec<f64> = linspace(x_range.0, x_range.1, nx).collect();
    let zs: Vec<f64> = linspace(z_range.0, z_range.1, nz).collect();
    let values: Vec<Option<f64>> = zs
        .par_iter()
        .flat_map_iter(|&z| {
            xs.iter()
                .map(move |&x| pot.eval(&Vec3::new(x, y, z)).ok())
                .collect::<Vec<_>>()
        })
        .collect();
    let params = pot.params();
    Ok(PotentialGrid {
        meta: GridMeta {
            alpha0: params.alpha0,
            omega: params.omega,
            kind: pot.trajectory().kind.label().to_string(),
            charge: pot.charge(),
            n_phase: pot.n_phase(),
            softening: pot.softening(),
            x_range,
            z_range,
            nx,
            nz,
            y,
        },
        values,
    })
}

impl PotentialGrid {
    pub fn xs(&self) -> Vec<f64> {
        linspace(self.meta.x_range.0, self.meta.x_range.1, self.meta.nx).collect()
    }

    pub fn zs(&self) -> Vec<f64> {
        linspace(self.meta.z_range.0, self.meta.z_range.1, self.meta.nz).collect()
    }

    pub fn get(&self, ix: usize, iz: usize) -> Option<f64> {
        self.values[iz * self.meta.nx + ix]
    }

    /// Interior cells strictly below all eight neighbours, as `(ix, iz)`.
    pub fn local_minima(&self) -> Vec<(usize, usize)> {
        let (nx, nz) = (self.meta.nx, self.meta.nz);
        let mut out = Vec::new();
        for iz in 1..nz - 1 {
            for ix in 1..nx - 1 {
                let Some(v) = self.get(ix, iz) else { continue };
                let mut is_min = true;
                'n: for dz in -1i64..=1 {
                    for dx in -1i64..=1 {
                        if dx == 0 && dz == 0 {
                            continue;
                        }
                        let jx = (ix as i64 + dx) as usize;
                        let jz = (iz as i64 + dz) as usize;
                        match self.get(jx, jz) {
                            Some(w) if w > v => {}
                            _ => {
                                is_min = false;
                                break 'n;
                            }
                        }
                    }
                }
                if is_min {
                    out.push((ix, iz));
                }
            }
        }
        out
    }

    fn header(&self) -> String {
        let m = &self.meta;
        format!(
            "# alpha0={} omega={} kind={} Z={}\n# n_phase={} softening={} y={}\n",
            m.alpha0, m.omega, m.kind, m.charge, m.n_phase, m.softening, m.y
        )
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        w.write_all(self.header().as_bytes())?;
        writeln!(w, "x,z,V")?;
        let xs = self.xs();
        for (iz, z) in self.zs().iter().enumerate() {
            for (ix, x) in xs.iter().enumerate() {
                let v = self.get(ix, iz).map(sig15).unwrap_or_else(|| "nan".into());
                writeln!(w, "{},{},{}", sig15(*x), sig15(*z), v)?;
            }
        }
        Ok(())
    }

    pub fn to_json(&self) -> serde_json::Value {
        use crate::fmt::round15;
        let nx = self.meta.nx;
        let rows: Vec<Vec<Option<f64>>> = self
            .values
            .chunks(nx)
            .map(|r| r.iter().map(|v| v.map(round15)).collect())
            .collect();
        serde_json::json!({
            "meta": self.meta,
            "x": self.xs().into_iter().map(round15).collect::<Vec<_>>(),
            "z": self.zs().into_iter().map(round15).collect::<Vec<_>>(),
            "V": rows,
        })
    }
}
