//! One-dimensional box V(z) = π on |z| ≤ 1 under the same cycle averaging
//! as the Coulomb problem.
//!
//! The displaced box is piecewise constant in the phase, so the numeric
//! routines integrate it exactly cell by cell: each uniform phase cell is
//! split at the points where the displaced coordinate crosses a box edge.
//!
//! The box is a plateau of positive height, so the places an electron
//! collects (the "wells") are the local maxima of V_eff.

use std::f64::consts::{PI, TAU};
use std::io::Write;

use crate::dressed::DressedPotential;
use crate::fmt::sig15;
use crate::trajectory::{FieldParams, Trajectory, TrajectoryKind};
use crate::{Error, Result, Vec3};

pub const BOX_HEIGHT: f64 = PI;
pub const BOX_HALF_WIDTH: f64 = 1.0;

pub fn box_potential(z: f64) -> f64 {
    if z.abs() <= BOX_HALF_WIDTH {
        BOX_HEIGHT
    } else {
        0.0
    }
}

/// Closed form: the box is felt for the fraction of the cycle in which
/// cos Ω ∈ [(−1−z)/α₀, (1−z)/α₀], giving arccos(a) − arccos(b) after
/// clamping both bounds to [−1, 1]. The sign of α₀ is irrelevant.
pub fn box_effective_analytic(z: f64, alpha0: f64) -> f64 {
    let a0 = alpha0.abs();
    if a0 == 0.0 {
        return box_potential(z);
    }
    if z.abs() >= BOX_HALF_WIDTH + a0 {
        return 0.0;
    }
    let lo = ((-BOX_HALF_WIDTH - z) / a0).clamp(-1.0, 1.0);
    let hi = ((BOX_HALF_WIDTH - z) / a0).clamp(-1.0, 1.0);
    BOX_HEIGHT / PI * (lo.acos() - hi.acos())
}

fn bisect<F: Fn(f64) -> f64>(f: &F, mut a: f64, mut b: f64) -> f64 {
    let mut fa = f(a);
    for _ in 0..200 {
        let m = 0.5 * (a + b);
        if m <= a || m >= b {
            break;
        }
        let fm = f(m);
        if (fm < 0.0) == (fa < 0.0) {
            a = m;
            fa = fm;
        } else {
            b = m;
        }
    }
    0.5 * (a + b)
}

/// Fraction of Ω ∈ [0, 2π) on which every constraint is ≥ 0.
///
/// The period is cut into `n` uniform cells, each sampled at `sub` equal
/// subcells; sign changes of a constraint inside a subcell are located by
/// bisection and the pieces between crossings are classified at their
/// midpoints. Exact whenever each constraint changes sign at most once per
/// subcell.
pub fn phase_fraction_inside(constraints: &[&dyn Fn(f64) -> f64], n: usize, sub: usize) -> f64 {
    let m = n.max(1) * sub.max(1);
    let h = TAU / m as f64;
    let mut inside = 0.0;
    let mut cuts = Vec::with_capacity(constraints.len() + 2);
    for k in 0..m {
        let (a, b) = (h * k as f64, h * (k + 1) as f64);
        cuts.clear();
        cuts.push(a);
        for c in constraints {
            let (ca, cb) = (c(a), c(b));
            if (ca < 0.0) != (cb < 0.0) {
                cuts.push(bisect(c, a, b));
            }
        }
        cuts.push(b);
        cuts.sort_by(f64::total_cmp);
        for w in cuts.windows(2) {
            let mid = 0.5 * (w[0] + w[1]);
            if constraints.iter().all(|c| c(mid) >= 0.0) {
                inside += w[1] - w[0];
            }
        }
    }
    inside / TAU
}

fn even_cells(n_phase: usize) -> usize {
    let n = n_phase.max(16);
    n + n % 2
}

/// Phase average of the box displaced by α₀ cos Ω.
///
/// `n_phase` is raised to an even count of at least 16 so that Ω = 0 and
/// Ω = π fall on cell edges; z + α₀ cos Ω is then monotone in every cell
/// and the result is exact to rounding.
pub fn box_effective_numeric(z: f64, alpha0: f64, n_phase: usize) -> f64 {
    let lower = |w: f64| z + alpha0 * w.cos() + BOX_HALF_WIDTH;
    let upper = |w: f64| BOX_HALF_WIDTH - z - alpha0 * w.cos();
    BOX_HEIGHT * phase_fraction_inside(&[&lower, &upper], even_cells(n_phase), 1)
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum RelativisticMode {
    /// Box evaluated at the displaced distance ρ(Ω).
    #[default]
    BoxOfDistance,
    /// Cycle average of ρ(Ω) itself.
    LiteralDistance,
}

const REL_SUBCELLS: usize = 4;

/// Average over the figure-8 displacement of the box centre, with the box
/// applied to ρ(Ω) = √((z + α₀cos Ω)² + (α₀²α_f sin 2Ω)²).
pub fn box_effective_relativistic(z: f64, alpha0: f64, alpha_f: f64, n_phase: usize) -> f64 {
    box_effective_relativistic_with(z, alpha0, alpha0 * alpha0 * alpha_f, n_phase, RelativisticMode::BoxOfDistance)
}

/// As [`box_effective_relativistic`] with an explicit transverse amplitude
/// (`x_amp` = coeff·α₀²α_f) and averaging mode.
pub fn box_effective_relativistic_with(
    z: f64,
    alpha0: f64,
    x_amp: f64,
    n_phase: usize,
    mode: RelativisticMode,
) -> f64 {
    let n = even_cells(n_phase);
    match mode {
        RelativisticMode::BoxOfDistance => {
            let inside = |w: f64| {
                let u = z + alpha0 * w.cos();
                let v = x_amp * (2.0 * w).sin();
                BOX_HALF_WIDTH * BOX_HALF_WIDTH - u * u - v * v
            };
            BOX_HEIGHT * phase_fraction_inside(&[&inside], n, REL_SUBCELLS)
        }
        RelativisticMode::LiteralDistance => {
            let h = TAU / n as f64;
            (0..n)
                .map(|k| {
                    let w = h * k as f64;
                    (z + alpha0 * w.cos()).hypot(x_amp * (2.0 * w).sin())
                })
                .sum::<f64>()
                / n as f64
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum BarePotential {
    /// Disk of radius 1 and height π in the x–z plane.
    Box,
    /// −Z/|r|, optionally softened.
    Coulomb { charge: f64, softening: f64 },
}

/// Row-major (`values[iz * xs.len() + ix]`) grid on the y = 0 plane.
#[derive(Clone, Debug, PartialEq)]
pub struct Grid2 {
    pub xs: Vec<f64>,
    pub zs: Vec<f64>,
    pub values: Vec<f64>,
}

impl Grid2 {
    pub fn get(&self, ix: usize, iz: usize) -> f64 {
        self.values[iz * self.xs.len() + ix]
    }
}

/// Cycle average of the bare potential over α⃗(Ω) = α₀cos Ω x̂ + α₁ sin 4Ω ẑ.
pub fn multicolor_effective(
    zs: &[f64],
    xs: &[f64],
    alpha0: f64,
    alpha1: f64,
    n_phase: usize,
    bare: BarePotential,
) -> Result<Grid2> {
    if !(alpha0 >= 0.0 && alpha1 >= 0.0) {
        return Err(Error::InvalidParameter("multicolor amplitudes must be >= 0".into()));
    }
    let n = even_cells(n_phase);
    let mut values = Vec::with_capacity(xs.len() * zs.len());
    match bare {
        BarePotential::Box => {
            for &z in zs {
                for &x in xs {
                    let inside = |w: f64| {
                        let u = x + alpha0 * w.cos();
                        let v = z + alpha1 * (4.0 * w).sin();
                        BOX_HALF_WIDTH * BOX_HALF_WIDTH - u * u - v * v
                    };
                    values.push(BOX_HEIGHT * phase_fraction_inside(&[&inside], n, REL_SUBCELLS));
                }
            }
        }
        BarePotential::Coulomb { charge, softening } => {
            let traj = Trajectory::new(TrajectoryKind::two_color(alpha0, alpha1), FieldParams::new(alpha0))?;
            let pot = DressedPotential::with_phase_nodes(charge, traj, n)?.with_softening(softening)?;
            for &z in zs {
                for &x in xs {
                    values.push(pot.eval(&Vec3::new(x, 0.0, z)).unwrap_or(f64::NAN));
                }
            }
        }
    }
    Ok(Grid2 {
        xs: xs.to_vec(),
        zs: zs.to_vec(),
        values,
    })
}

/// Indices of the peaks of `v` whose topographic prominence is at least
/// `min_prominence`. A flat-topped run counts once, at its centre.
pub fn peaks(v: &[f64], min_prominence: f64) -> Vec<usize> {
    // collapse equal runs
    let mut runs: Vec<(usize, usize, f64)> = Vec::new();
    for (i, &x) in v.iter().enumerate() {
        match runs.last_mut() {
            Some(r) if (r.2 - x).abs() <= 1e-12 * x.abs().max(1.0) => r.1 = i,
            _ => runs.push((i, i, x)),
        }
    }
    let vals: Vec<f64> = runs.iter().map(|r| r.2).collect();
    let mut out = Vec::new();
    for i in 0..vals.len() {
        let left_higher = i > 0 && vals[i - 1] > vals[i];
        let right_higher = i + 1 < vals.len() && vals[i + 1] > vals[i];
        if left_higher || right_higher || vals.len() == 1 {
            continue;
        }
        let mut left_base = vals[i];
        let mut j = i;
        // ties resolve to the leftmost peak
        while j > 0 {
            j -= 1;
            if vals[j] >= vals[i] {
                break;
            }
            left_base = left_base.min(vals[j]);
        }
        let mut right_base = vals[i];
        let mut j = i;
        while j + 1 < vals.len() {
            j += 1;
            if vals[j] > vals[i] {
                break;
            }
            right_base = right_base.min(vals[j]);
        }
        if vals[i] - left_base.max(right_base) >= min_prominence {
            out.push((runs[i].0 + runs[i].1) / 2);
        }
    }
    out
}

/// Wells of an effective box potential sampled on a grid: its prominent
/// local maxima.
pub fn well_indices(v: &[f64]) -> Vec<usize> {
    peaks(v, 1e-3 * BOX_HEIGHT)
}

pub fn write_profile_csv<W: Write>(mut w: W, header: &str, zs: &[f64], vs: &[f64]) -> Result<()> {
    for line in header.lines() {
        writeln!(w, "# {line}")?;
    }
    writeln!(w, "z,V_eff")?;
    for (z, v) in zs.iter().zip(vs) {
        writeln!(w, "{},{}", sig15(*z), sig15(*v))?;
    }
    Ok(())
}

pub fn write_grid_csv<W: Write>(mut w: W, header: &str, grid: &Grid2) -> Result<()> {
    for line in header.lines() {
        writeln!(w, "# {line}")?;
    }
    writeln!(w, "x,z,V_eff")?;
    for (iz, z) in grid.zs.iter().enumerate() {
        for (ix, x) in grid.xs.iter().enumerate() {
            writeln!(w, "{},{},{}", sig15(*x), sig15(*z), sig15(grid.get(ix, iz)))?;
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use std::f64::consts::FRAC_PI_2;

    #[test]
    fn analytic_examples() {
        assert_eq!(box_effective_analytic(0.0, 0.3), PI);
        for a in [0.2, 1.0, 7.5] {
            assert_abs_diff_eq!(box_effective_analytic(1.0 + a, a), 0.0, epsilon = 1e-15);
        }
        assert_abs_diff_eq!(box_effective_analytic(1.0, 0.4), FRAC_PI_2, epsilon = 1e-15);
        assert_eq!(box_effective_analytic(0.5, 0.0), PI);
        assert_eq!(box_effective_analytic(1.5, 0.0), 0.0);
    }

    #[test]
    fn numeric_examples() {
        assert_eq!(box_effective_numeric(100.0, 1.0, 64), 0.0);
        assert_abs_diff_eq!(box_effective_numeric(0.0, 0.0, 16), PI, epsilon = 1e-15);
        // fraction of the cycle with |cos Ω| ≤ 1/2 is 1/3
        assert_abs_diff_eq!(box_effective_numeric(0.0, 2.0, 4096), PI / 3.0, epsilon = 1e-12);
    }

    #[test]
    fn relativistic_without_transverse_motion_is_nonrelativistic() {
        for z in [-3.0, -0.4, 0.0, 1.7, 9.2] {
            let a = box_effective_relativistic(z, 10.0, 0.0, 2048);
            assert_abs_diff_eq!(a, box_effective_numeric(z, 10.0, 2048), epsilon = 1e-12);
        }
        assert_abs_diff_eq!(box_effective_relativistic(0.3, 0.0, crate::FINE_STRUCTURE, 64), PI, epsilon = 1e-15);
    }

    #[test]
    fn literal_mode_is_mean_distance() {
        // α₀ = 0: ρ = |z|
        let v = box_effective_relativistic_with(-2.5, 0.0, 0.0, 64, RelativisticMode::LiteralDistance);
        assert_abs_diff_eq!(v, 2.5, epsilon = 1e-15);
    }

    #[test]
    fn peak_counting() {
        assert_eq!(peaks(&[0.0, 1.0, 0.0, 2.0, 0.0], 0.5), vec![1, 3]);
        assert_eq!(peaks(&[0.0, 1.0, 0.99, 1.0, 0.0], 0.5), vec![1]);
        assert_eq!(peaks(&[0.0, 1.0, 0.99, 1.2, 0.0], 0.5), vec![3]);
        assert_eq!(peaks(&[0.0, 3.0, 3.0, 3.0, 0.0], 0.1), vec![2]);
    }

    #[test]
    fn nonrelativistic_double_well() {
        for a in [2.0, 5.0, 10.0] {
            let zs: Vec<f64> = (0..=2000).map(|i| -(a + 2.0) + (a + 2.0) * i as f64 / 1000.0).collect();
            let v: Vec<f64> = zs.iter().map(|&z| box_effective_analytic(z, a)).collect();
            let w = well_indices(&v);
            assert_eq!(w.len(), 2, "alpha0 = {a}");
            assert_abs_diff_eq!(zs[w[1]], a - 1.0, epsilon = 0.02);
        }
    }

    #[test]
    fn multicolor_without_second_color_is_one_dimensional() {
        let xs = [-3.5, -1.0, 0.0, 0.6, 2.2];
        let g = multicolor_effective(&[0.0], &xs, 3.0, 0.0, 1024, BarePotential::Box).unwrap();
        for (ix, &x) in xs.iter().enumerate() {
            assert_abs_diff_eq!(g.get(ix, 0), box_effective_analytic(x, 3.0), epsilon = 1e-9);
        }
        let bare = multicolor_effective(&[0.0, 2.0], &[1.0], 0.0, 0.0, 64, BarePotential::Coulomb { charge: 1.0, softening: 0.0 }).unwrap();
        assert_abs_diff_eq!(bare.get(0, 0), -1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(bare.get(0, 1), -1.0 / 5f64.sqrt(), epsilon = 1e-15);
    }

    #[test]
    fn csv_layout() {
        let mut buf = Vec::new();
        write_profile_csv(&mut buf, "alpha0=1", &[0.0, 1.0], &[PI, 0.0]).unwrap();
        let s = String::from_utf8(buf).unwrap();
        assert_eq!(s.lines().next(), Some("# alpha0=1"));
        assert_eq!(s.lines().nth(1), Some("z,V_eff"));
        assert_eq!(s.lines().count(), 4);
    }
}
