//! Closed-form periodic quiver trajectories α⃗(φ) of a free electron.
//!
//! Laser geometry: propagation along y, electric field along z, magnetic
//! field along x. Every trajectory is a function of the phase φ = ωt and is
//! 2π-periodic; drift motion is dropped.

use std::f64::consts::{FRAC_PI_4, PI};

use serde::{Deserialize, Serialize};

use crate::{Error, Result, Vec3, FINE_STRUCTURE};

/// Laser parameters in atomic units.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FieldParams {
    /// Quiver amplitude α₀ = E₀/ω² (Bohr).
    pub alpha0: f64,
    /// Angular frequency (a.u.).
    pub omega: f64,
    /// Fine-structure constant.
    pub alpha_f: f64,
    /// Coefficient of the figure-8 transverse amplitude α₀²α_f. `1` is the
    /// atomic-unit closed form; `ω/8` is what the Newton–Lorentz solution
    /// gives (see [`FieldParams::with_derived_x_amplitude`]).
    pub x_amp_coeff: f64,
}

impl Default for FieldParams {
    fn default() -> Self {
        Self {
            alpha0: 0.0,
            omega: 1.0,
            alpha_f: FINE_STRUCTURE,
            x_amp_coeff: 1.0,
        }
    }
}

impl FieldParams {
    pub fn new(alpha0: f64) -> Self {
        Self {
            alpha0,
            ..Self::default()
        }
    }

    pub fn with_omega(mut self, omega: f64) -> Self {
        self.omega = omega;
        self
    }

    pub fn with_alpha_f(mut self, alpha_f: f64) -> Self {
        self.alpha_f = alpha_f;
        self
    }

    pub fn with_x_amp_coeff(mut self, coeff: f64) -> Self {
        self.x_amp_coeff = coeff;
        self
    }

    /// Uses the transverse amplitude α₀²ωα_f/8 of the Newton–Lorentz solution.
    pub fn with_derived_x_amplitude(mut self) -> Self {
        self.x_amp_coeff = self.omega / 8.0;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.alpha0 >= 0.0 && self.alpha0.is_finite()) {
            return Err(Error::InvalidParameter(format!("alpha0 = {} must be >= 0", self.alpha0)));
        }
        if !(self.omega > 0.0 && self.omega.is_finite()) {
            return Err(Error::InvalidParameter(format!("omega = {} must be > 0", self.omega)));
        }
        if !(self.alpha_f > 0.0 && self.alpha_f.is_finite()) {
            return Err(Error::InvalidParameter(format!("alpha_f = {} must be > 0", self.alpha_f)));
        }
        if !self.x_amp_coeff.is_finite() {
            return Err(Error::InvalidParameter("x_amp_coeff must be finite".into()));
        }
        Ok(())
    }

    /// Peak field E₀ = α₀ω².
    pub fn field_amplitude(&self) -> f64 {
        self.alpha0 * self.omega * self.omega
    }

    /// Q₀ = eE₀/(m ω c) = α₀ ω α_f.
    pub fn q0(&self) -> f64 {
        self.field_amplitude() * self.alpha_f / self.omega
    }

    /// Amplitude of the second-harmonic motion along the propagation axis.
    pub fn figure8_amplitude(&self) -> f64 {
        self.x_amp_coeff * self.alpha0 * self.alpha0 * self.alpha_f
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Axis {
    X,
    Y,
    Z,
}

impl Axis {
    fn index(self) -> usize {
        match self {
            Axis::X => 0,
            Axis::Y => 1,
            Axis::Z => 2,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PhaseShape {
    Cos,
    Sin,
}

/// One colour of a superposed multicolour field: `amplitude·shape(harmonic·φ)`
/// along `axis`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct HarmonicComponent {
    pub amplitude: f64,
    pub axis: Axis,
    pub harmonic: u32,
    pub shape: PhaseShape,
}

impl HarmonicComponent {
    pub fn new(amplitude: f64, axis: Axis, harmonic: u32, shape: PhaseShape) -> Self {
        Self {
            amplitude,
            axis,
            harmonic,
            shape,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TrajectoryKind {
    /// (0, 0, α₀ cos φ)
    NonRelLinear,
    /// (−c·α₀²α_f sin 2φ, 0, α₀ cos φ), the figure-8.
    RelLinear,
    /// (ε₁ cos φ − β₂ sin φ, 0, ε₂ sin φ + β₁ cos φ)
    Elliptical {
        eps1: f64,
        eps2: f64,
        beta1: f64,
        beta2: f64,
    },
    /// Elliptical with ε₁ = ε₂ and β₁ = β₂.
    Circular { eps: f64, beta: f64 },
    Multicolor { components: Vec<HarmonicComponent> },
}

impl TrajectoryKind {
    /// The two-colour field α₀ cos φ x̂ + α₁ sin 4φ ẑ.
    pub fn two_color(alpha0: f64, alpha1: f64) -> Self {
        TrajectoryKind::Multicolor {
            components: vec![
                HarmonicComponent::new(alpha0, Axis::X, 1, PhaseShape::Cos),
                HarmonicComponent::new(alpha1, Axis::Z, 4, PhaseShape::Sin),
            ],
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            TrajectoryKind::Elliptical {
                eps1,
                eps2,
                beta1,
                beta2,
            } => {
                if [eps1, eps2, beta1, beta2].iter().any(|a| !(**a >= 0.0)) {
                    return Err(Error::InvalidParameter(
                        "elliptical amplitudes must be non-negative".into(),
                    ));
                }
            }
            TrajectoryKind::Circular { eps, beta } => {
                if !(*eps >= 0.0 && *beta >= 0.0) {
                    return Err(Error::InvalidParameter(
                        "circular amplitudes must be non-negative".into(),
                    ));
                }
            }
            TrajectoryKind::Multicolor { components } => {
                if components.is_empty() {
                    return Err(Error::InvalidParameter("multicolor list is empty".into()));
                }
                if components.iter().any(|c| c.harmonic == 0) {
                    return Err(Error::InvalidParameter(
                        "multicolor harmonics must be positive".into(),
                    ));
                }
                if components.iter().any(|c| !c.amplitude.is_finite()) {
                    return Err(Error::InvalidParameter("multicolor amplitude is not finite".into()));
                }
            }
            TrajectoryKind::NonRelLinear | TrajectoryKind::RelLinear => {}
        }
        Ok(())
    }

    /// Whether the path is a segment (span of dimension one).
    pub fn is_linear(&self) -> bool {
        matches!(self, TrajectoryKind::NonRelLinear)
    }

    pub fn label(&self) -> &'static str {
        match self {
            TrajectoryKind::NonRelLinear => "nonrel",
            TrajectoryKind::RelLinear => "rel",
            TrajectoryKind::Elliptical { .. } => "elliptical",
            TrajectoryKind::Circular { .. } => "circular",
            TrajectoryKind::Multicolor { .. } => "multicolor",
        }
    }
}

/// Displacement α⃗(φ) in Bohr.
pub fn eval_trajectory(kind: &TrajectoryKind, params: &FieldParams, phase: f64) -> Vec3 {
    match kind {
        TrajectoryKind::NonRelLinear => Vec3::new(0.0, 0.0, params.alpha0 * phase.cos()),
        TrajectoryKind::RelLinear => Vec3::new(
            -params.figure8_amplitude() * (2.0 * phase).sin(),
            0.0,
            params.alpha0 * phase.cos(),
        ),
        TrajectoryKind::Elliptical {
            eps1,
            eps2,
            beta1,
            beta2,
        } => elliptical(*eps1, *eps2, *beta1, *beta2, phase),
        TrajectoryKind::Circular { eps, beta } => elliptical(*eps, *eps, *beta, *beta, phase),
        TrajectoryKind::Multicolor { components } => {
            let mut r = Vec3::zeros();
            for c in components {
                let arg = c.harmonic as f64 * phase;
                let s = match c.shape {
                    PhaseShape::Cos => arg.cos(),
                    PhaseShape::Sin => arg.sin(),
                };
                r[c.axis.index()] += c.amplitude * s;
            }
            r
        }
    }
}

fn elliptical(eps1: f64, eps2: f64, beta1: f64, beta2: f64, phase: f64) -> Vec3 {
    let (s, c) = phase.sin_cos();
    Vec3::new(eps1 * c - beta2 * s, 0.0, eps2 * s + beta1 * c)
}

/// Half-widths of the axis-aligned box containing the path.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Extent {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl Extent {
    pub fn max_half_width(&self) -> f64 {
        self.x.max(self.y).max(self.z)
    }
}

/// Bounds on |α_x|, |α_y|, |α_z| over a period. Exact except for
/// multicolour fields with several colours on one axis, where the sum of
/// amplitudes is returned.
pub fn trajectory_extent(kind: &TrajectoryKind, params: &FieldParams) -> Extent {
    match kind {
        TrajectoryKind::NonRelLinear => Extent {
            x: 0.0,
            y: 0.0,
            z: params.alpha0,
        },
        TrajectoryKind::RelLinear => Extent {
            x: params.figure8_amplitude().abs(),
            y: 0.0,
            z: params.alpha0,
        },
        TrajectoryKind::Elliptical {
            eps1,
            eps2,
            beta1,
            beta2,
        } => Extent {
            x: eps1.hypot(*beta2),
            y: 0.0,
            z: eps2.hypot(*beta1),
        },
        TrajectoryKind::Circular { eps, beta } => {
            let r = eps.hypot(*beta);
            Extent { x: r, y: 0.0, z: r }
        }
        TrajectoryKind::Multicolor { components } => {
            let mut e = [0.0; 3];
            for c in components {
                e[c.axis.index()] += c.amplitude.abs();
            }
            Extent {
                x: e[0],
                y: e[1],
                z: e[2],
            }
        }
    }
}

/// A trajectory bound to its field parameters.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub kind: TrajectoryKind,
    pub params: FieldParams,
}

impl Trajectory {
    pub fn new(kind: TrajectoryKind, params: FieldParams) -> Result<Self> {
        params.validate()?;
        kind.validate()?;
        Ok(Self { kind, params })
    }

    pub fn eval(&self, phase: f64) -> Vec3 {
        eval_trajectory(&self.kind, &self.params, phase)
    }

    pub fn extent(&self) -> Extent {
        trajectory_extent(&self.kind, &self.params)
    }

    /// Uniform phase nodes φ_k = 2πk/n and the displacements at them.
    pub fn nodes(&self, n: usize) -> Vec<Vec3> {
        (0..n)
            .map(|k| self.eval(2.0 * PI * k as f64 / n as f64))
            .collect()
    }

    /// Path length over one period (trapezoid on the speed, 4096 nodes).
    pub fn path_length(&self) -> f64 {
        let n = 4096;
        let pts = self.nodes(n);
        (0..n).map(|k| (pts[(k + 1) % n] - pts[k]).norm()).sum()
    }

    /// Potential-well sites in the Kramers–Henneberger frame: the origin and
    /// the positions −α⃗(φ) at φ = π/4, 3π/4, 5π/4, 7π/4, where the nucleus
    /// moves slowest on the figure-8.
    pub fn well_sites(&self) -> Vec<Vec3> {
        let mut sites = vec![Vec3::zeros()];
        for k in [1.0, 3.0, 5.0, 7.0] {
            sites.push(-self.eval(k * FRAC_PI_4));
        }
        sites
    }
}
