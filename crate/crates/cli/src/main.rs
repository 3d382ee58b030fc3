use std::collections::BTreeMap;
use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::str::FromStr;

use anyhow::{anyhow, bail, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};

use hfion::box1d::{
    box_effective_analytic, box_effective_numeric, box_effective_relativistic, multicolor_effective, well_indices,
    write_grid_csv, write_profile_csv, BarePotential,
};
use hfion::dressed::{mass_factor, potential_grid_at, DressedPotential};
use hfion::dscale::{minimize_with, HamiltonianKind, MinimizeOptions};
use hfion::fmt::sig15;
use hfion::scf::{
    density_grid, scf_solve, spin_split, BasisRecipe, FloatingBasis, NuclearRoute, Plane, ScfOptions, ScfSummary,
};
use hfion::sweep::{
    alpha0_range, compare, emit_curves, parse_config, run_sweep, CurveFormat, Method, SweepResult, SweepSpec,
    RESULTS_FILE,
};
use hfion::trajectory::{Axis, FieldParams, Trajectory, TrajectoryKind};
use hfion::HARTREE_EV;

/// Raised for bad flags, config keys or values; exits with status 2.
#[derive(Debug)]
struct Usage(String);

impl std::fmt::Display for Usage {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for Usage {}

fn usage(msg: impl Into<String>) -> anyhow::Error {
    anyhow::Error::new(Usage(msg.into()))
}

#[derive(Parser, Debug)]
#[command(name = "hfion", version, about = "Multiply-charged ions in super-intense high-frequency laser fields")]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Args, Debug, Default)]
struct Common {
    /// key=value file; flags given on the command line take precedence.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    jobs: Option<usize>,
    /// Nuclear charge.
    #[arg(long = "z", global = true)]
    charge: Option<f64>,
    /// Electron count (N_max for `sweep`).
    #[arg(long = "n", global = true)]
    n: Option<usize>,
    /// Quiver amplitude in Bohr; for `sweep` a list `a,b,..` or a range `start:stop:step`.
    #[arg(long, global = true, allow_hyphen_values = true)]
    alpha0: Option<String>,
    #[arg(long, global = true)]
    omega: Option<f64>,
    #[arg(long, global = true, value_enum)]
    trajectory: Option<TrajArg>,
    #[arg(long, global = true, value_enum)]
    hamiltonian: Option<HamArg>,
    #[arg(long = "mass-gauge", global = true, value_enum)]
    mass_gauge: Option<OnOff>,
    #[arg(long = "x-amp-coeff", global = true)]
    x_amp_coeff: Option<f64>,
    #[arg(long, global = true)]
    restarts: Option<usize>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output file (directory for `sweep` and `compare`); stdout when absent.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true, value_enum)]
    format: Option<FormatArg>,
    /// Elliptical amplitudes `eps1,eps2,beta1,beta2` (circular uses the first and third).
    #[arg(long, global = true)]
    ellipse: Option<String>,
    /// Second-colour amplitude of the multicolor field.
    #[arg(long, global = true)]
    alpha1: Option<f64>,
}

#[derive(Subcommand, Debug)]
enum Cmd {
    /// Sample the dressed potential on a y = const plane.
    PotentialGrid(GridArgs),
    /// Effective 1-D box potential and its wells.
    Box1d(BoxArgs),
    /// Minimise the D→∞ energy for N electrons.
    DscaleMin,
    /// Unrestricted Hartree–Fock on floating s Gaussians.
    Scf(ScfArgs),
    /// α₀ sweep of energies and binding energies.
    Sweep(SweepArgs),
    /// Overlay two methods' normalised B.E. curves from a finished sweep.
    Compare(CompareArgs),
}

#[derive(Args, Debug)]
struct GridArgs {
    /// `lo:hi`; defaults to the trajectory extent plus 5 Bohr.
    #[arg(long, allow_hyphen_values = true)]
    x_range: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    z_range: Option<String>,
    #[arg(long, default_value_t = 201)]
    nx: usize,
    #[arg(long, default_value_t = 201)]
    nz: usize,
    #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
    y: f64,
    #[arg(long, default_value_t = 0.0)]
    softening: f64,
    /// Phase nodes; default keeps node spacing under 1 Bohr.
    #[arg(long)]
    n_phase: Option<usize>,
}

#[derive(Args, Debug)]
struct BoxArgs {
    #[arg(long, value_enum, default_value = "analytic")]
    mode: BoxMode,
    #[arg(long, allow_hyphen_values = true)]
    z_range: Option<String>,
    #[arg(long, default_value_t = 401)]
    nz: usize,
    /// Multicolor only.
    #[arg(long, allow_hyphen_values = true)]
    x_range: Option<String>,
    #[arg(long, default_value_t = 101)]
    nx: usize,
    #[arg(long, default_value_t = 4096)]
    n_phase: usize,
    #[arg(long, value_enum, default_value = "box")]
    bare: BareArg,
    /// Softening of the multicolor Coulomb bare potential.
    #[arg(long, default_value_t = 0.0)]
    softening: f64,
}

#[derive(Args, Debug)]
struct ScfArgs {
    /// Basis file; default is an even-tempered s set on each phase node.
    #[arg(long)]
    basis: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "boys")]
    route: RouteArg,
    /// Also write the total density on the y = 0 plane to this CSV.
    #[arg(long)]
    density: Option<PathBuf>,
    #[arg(long, default_value_t = 81)]
    density_points: usize,
}

#[derive(Args, Debug)]
struct SweepArgs {
    /// Comma list drawn from cf, da, planar, scf; default is the --hamiltonian choice.
    #[arg(long)]
    methods: Option<String>,
    /// Largest phase-node spacing in Bohr.
    #[arg(long)]
    phase_spacing: Option<f64>,
}

#[derive(Args, Debug)]
struct CompareArgs {
    #[arg(long, default_value = "planar")]
    first: String,
    #[arg(long, default_value = "scf")]
    second: String,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum TrajArg {
    Nonrel,
    Rel,
    Elliptical,
    Circular,
    Multicolor,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum HamArg {
    Cf,
    Da,
    Planar,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum OnOff {
    On,
    Off,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum FormatArg {
    Csv,
    Json,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum BoxMode {
    Analytic,
    Numeric,
    Rel,
    Multicolor,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum BareArg {
    Box,
    Coulomb,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum RouteArg {
    Boys,
    Quadrature,
}

const CONFIG_KEYS: &[&str] = &[
    "z",
    "n",
    "alpha0",
    "omega",
    "trajectory",
    "hamiltonian",
    "mass-gauge",
    "x-amp-coeff",
    "restarts",
    "seed",
    "out",
    "format",
    "jobs",
    "ellipse",
    "alpha1",
    "methods",
    "phase-spacing",
];

/// Flags merged over the optional config file.
struct Settings {
    common: Common,
    file: BTreeMap<String, String>,
}

fn from_file<T: FromStr>(file: &BTreeMap<String, String>, key: &str) -> anyhow::Result<Option<T>> {
    match file.get(key) {
        None => Ok(None),
        Some(s) => s
            .parse::<T>()
            .map(Some)
            .map_err(|_| usage(format!("config: invalid value '{s}' for {key}"))),
    }
}

fn enum_from_file<T: ValueEnum>(file: &BTreeMap<String, String>, key: &str) -> anyhow::Result<Option<T>> {
    match file.get(key) {
        None => Ok(None),
        Some(s) => T::from_str(s, true)
            .map(Some)
            .map_err(|_| usage(format!("config: invalid value '{s}' for {key}"))),
    }
}

impl Settings {
    fn load(common: Common) -> anyhow::Result<Self> {
        let file = match &common.config {
            None => BTreeMap::new(),
            Some(p) => {
                let text = fs::read_to_string(p).map_err(|e| usage(format!("cannot read config {}: {e}", p.display())))?;
                let map = parse_config(&text).map_err(|e| usage(format!("config {}: {e}", p.display())))?;
                if let Some(k) = map.keys().find(|k| !CONFIG_KEYS.contains(&k.as_str())) {
                    return Err(usage(format!("config: unknown key '{k}'")));
                }
                map
            }
        };
        let mut s = Settings { common, file };
        let f = &s.file;
        let c = &mut s.common;
        if c.charge.is_none() {
            c.charge = from_file(f, "z")?;
        }
        if c.n.is_none() {
            c.n = from_file(f, "n")?;
        }
        if c.alpha0.is_none() {
            c.alpha0 = f.get("alpha0").cloned();
        }
        if c.omega.is_none() {
            c.omega = from_file(f, "omega")?;
        }
        if c.trajectory.is_none() {
            c.trajectory = enum_from_file(f, "trajectory")?;
        }
        if c.hamiltonian.is_none() {
            c.hamiltonian = enum_from_file(f, "hamiltonian")?;
        }
        if c.mass_gauge.is_none() {
            c.mass_gauge = enum_from_file(f, "mass-gauge")?;
        }
        if c.x_amp_coeff.is_none() {
            c.x_amp_coeff = from_file(f, "x-amp-coeff")?;
        }
        if c.restarts.is_none() {
            c.restarts = from_file(f, "restarts")?;
        }
        if c.seed.is_none() {
            c.seed = from_file(f, "seed")?;
        }
        if c.out.is_none() {
            c.out = f.get("out").map(PathBuf::from);
        }
        if c.format.is_none() {
            c.format = enum_from_file(f, "format")?;
        }
        if c.jobs.is_none() {
            c.jobs = from_file(f, "jobs")?;
        }
        if c.ellipse.is_none() {
            c.ellipse = f.get("ellipse").cloned();
        }
        if c.alpha1.is_none() {
            c.alpha1 = from_file(f, "alpha1")?;
        }
        Ok(s)
    }

    fn charge(&self) -> anyhow::Result<f64> {
        let z = self.common.charge.unwrap_or(1.0);
        if !(z > 0.0 && z.is_finite()) {
            return Err(usage("--z must be a positive number"));
        }
        Ok(z)
    }

    fn electrons(&self) -> anyhow::Result<usize> {
        match self.common.n.unwrap_or(1) {
            0 => Err(usage("--n must be >= 1")),
            n => Ok(n),
        }
    }

    fn alpha0(&self) -> anyhow::Result<f64> {
        let Some(s) = &self.common.alpha0 else { return Ok(0.0) };
        let a: f64 = s.trim().parse().map_err(|_| usage(format!("--alpha0: expected a number, got '{s}'")))?;
        if !(a >= 0.0 && a.is_finite()) {
            return Err(usage("--alpha0 must be >= 0"));
        }
        Ok(a)
    }

    fn alpha0_grid(&self) -> anyhow::Result<Vec<f64>> {
        let s = self
            .common
            .alpha0
            .as_deref()
            .ok_or_else(|| usage("sweep needs --alpha0 (list a,b,.. or range start:stop:step)"))?;
        let grid = if s.contains(':') {
            let parts: Vec<f64> = s
                .split(':')
                .map(|p| p.trim().parse::<f64>())
                .collect::<Result<_, _>>()
                .map_err(|_| usage(format!("--alpha0: bad range '{s}'")))?;
            if parts.len() != 3 {
                return Err(usage("--alpha0 range must be start:stop:step"));
            }
            alpha0_range(parts[0], parts[1], parts[2]).map_err(|e| usage(format!("--alpha0: {e}")))?
        } else {
            s.split(',')
                .map(|p| p.trim().parse::<f64>())
                .collect::<Result<_, _>>()
                .map_err(|_| usage(format!("--alpha0: bad list '{s}'")))?
        };
        if grid.iter().any(|a| !(*a >= 0.0 && a.is_finite())) {
            return Err(usage("--alpha0 values must be >= 0"));
        }
        Ok(grid)
    }

    fn params(&self, alpha0: f64) -> anyhow::Result<FieldParams> {
        let p = FieldParams::new(alpha0)
            .with_omega(self.common.omega.unwrap_or(1.0))
            .with_x_amp_coeff(self.common.x_amp_coeff.unwrap_or(1.0));
        p.validate().map_err(|e| usage(e.to_string()))?;
        Ok(p)
    }

    fn trajectory_kind(&self, alpha0: f64) -> anyhow::Result<TrajectoryKind> {
        let ellipse = || -> anyhow::Result<[f64; 4]> {
            match &self.common.ellipse {
                None => Ok([alpha0, alpha0, 0.0, 0.0]),
                Some(s) => {
                    let v: Vec<f64> = s
                        .split(',')
                        .map(|p| p.trim().parse::<f64>())
                        .collect::<Result<_, _>>()
                        .map_err(|_| usage(format!("--ellipse: bad list '{s}'")))?;
                    v.try_into().map_err(|_| usage("--ellipse needs eps1,eps2,beta1,beta2"))
                }
            }
        };
        let kind = match self.common.trajectory.unwrap_or(TrajArg::Rel) {
            TrajArg::Nonrel => TrajectoryKind::NonRelLinear,
            TrajArg::Rel => TrajectoryKind::RelLinear,
            TrajArg::Elliptical => {
                let [eps1, eps2, beta1, beta2] = ellipse()?;
                TrajectoryKind::Elliptical { eps1, eps2, beta1, beta2 }
            }
            TrajArg::Circular => {
                let e = ellipse()?;
                TrajectoryKind::Circular { eps: e[0], beta: e[2] }
            }
            TrajArg::Multicolor => TrajectoryKind::two_color(alpha0, self.alpha1(alpha0)),
        };
        kind.validate().map_err(|e| usage(e.to_string()))?;
        Ok(kind)
    }

    fn alpha1(&self, alpha0: f64) -> f64 {
        self.common.alpha1.unwrap_or(0.5 * alpha0)
    }

    fn trajectory(&self, alpha0: f64) -> anyhow::Result<Trajectory> {
        Ok(Trajectory::new(self.trajectory_kind(alpha0)?, self.params(alpha0)?)?)
    }

    fn hamiltonian(&self) -> HamiltonianKind {
        match self.common.hamiltonian.unwrap_or(HamArg::Planar) {
            HamArg::Cf => HamiltonianKind::CentralForce,
            HamArg::Da => HamiltonianKind::Diatomic,
            HamArg::Planar => HamiltonianKind::Planar,
        }
    }

    fn mass_gauge(&self) -> bool {
        self.common.mass_gauge == Some(OnOff::On)
    }

    fn restarts(&self) -> anyhow::Result<usize> {
        match self.common.restarts.unwrap_or(hfion::dscale::DEFAULT_RESTARTS) {
            0 => Err(usage("--restarts must be >= 1")),
            r => Ok(r),
        }
    }

    fn format(&self) -> FormatArg {
        self.common.format.unwrap_or(FormatArg::Json)
    }
}

fn parse_range(s: &str, what: &str) -> anyhow::Result<(f64, f64)> {
    let (a, b) = s.split_once(':').ok_or_else(|| usage(format!("--{what}: expected lo:hi")))?;
    let lo: f64 = a.trim().parse().map_err(|_| usage(format!("--{what}: bad number '{a}'")))?;
    let hi: f64 = b.trim().parse().map_err(|_| usage(format!("--{what}: bad number '{b}'")))?;
    if !(hi > lo) {
        return Err(usage(format!("--{what}: need lo < hi")));
    }
    Ok((lo, hi))
}

fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    (0..n).map(|i| if i + 1 == n { hi } else { lo + (hi - lo) * i as f64 / (n - 1) as f64 }).collect()
}

/// Writes `text` to `out`, or to stdout when no path is given.
fn emit(out: Option<&Path>, text: &str) -> anyhow::Result<()> {
    match out {
        Some(p) => fs::write(p, text).with_context(|| format!("writing {}", p.display())),
        None => {
            io::stdout().write_all(text.as_bytes())?;
            Ok(())
        }
    }
}

fn energy_line(label: &str, e: f64) -> String {
    format!("{label} = {} Hartree ({} eV)", sig15(e), sig15(e * HARTREE_EV))
}

fn cmd_potential_grid(s: &Settings, a: &GridArgs) -> anyhow::Result<()> {
    let alpha0 = s.alpha0()?;
    let traj = s.trajectory(alpha0)?;
    let n_phase = a.n_phase.unwrap_or_else(|| DressedPotential::auto_phase_nodes(&traj, 1.0));
    let ext = traj.extent();
    let pot = DressedPotential::with_phase_nodes(s.charge()?, traj, n_phase)
        .map_err(|e| usage(e.to_string()))?
        .with_softening(a.softening)
        .map_err(|e| usage(e.to_string()))?;
    let xr = match &a.x_range {
        Some(r) => parse_range(r, "x-range")?,
        None => (-(ext.x + 5.0), ext.x + 5.0),
    };
    let zr = match &a.z_range {
        Some(r) => parse_range(r, "z-range")?,
        None => (-(ext.z + 5.0), ext.z + 5.0),
    };
    if a.nx < 2 || a.nz < 2 {
        return Err(usage("--nx and --nz must be >= 2"));
    }
    let grid = potential_grid_at(&pot, xr, zr, a.nx, a.nz, a.y)?;
    let text = match s.format() {
        FormatArg::Csv => {
            let mut buf = Vec::new();
            grid.write_csv(&mut buf)?;
            String::from_utf8(buf)?
        }
        FormatArg::Json => serde_json::to_string_pretty(&grid.to_json())? + "\n",
    };
    emit(s.common.out.as_deref(), &text)?;
    let (xs, zs) = (grid.xs(), grid.zs());
    let minima = grid.local_minima();
    eprintln!("n_phase = {n_phase}, {} local minima", minima.len());
    for (ix, iz) in minima.iter().take(16) {
        let v = grid.get(*ix, *iz).unwrap_or(f64::NAN);
        eprintln!("  minimum at x={} z={}: {}", sig15(xs[*ix]), sig15(zs[*iz]), energy_line("V", v));
    }
    let flagged = grid.values.iter().filter(|v| v.is_none()).count();
    if flagged > 0 {
        eprintln!("{flagged} cells hit a node singularity and were written as nan/null");
    }
    Ok(())
}

fn cmd_box1d(s: &Settings, a: &BoxArgs) -> anyhow::Result<()> {
    let alpha0 = s.alpha0()?;
    let half = alpha0 + 3.0;
    let zr = match &a.z_range {
        Some(r) => parse_range(r, "z-range")?,
        None => (-half, half),
    };
    if a.nz < 2 {
        return Err(usage("--nz must be >= 2"));
    }
    let zs = linspace(zr.0, zr.1, a.nz);
    let header = format!("alpha0={} mode={:?}", sig15(alpha0), a.mode).to_lowercase();
    if let BoxMode::Multicolor = a.mode {
        let alpha1 = s.alpha1(alpha0);
        let xr = match &a.x_range {
            Some(r) => parse_range(r, "x-range")?,
            None => (-half, half),
        };
        if a.nx < 2 {
            return Err(usage("--nx must be >= 2"));
        }
        let xs = linspace(xr.0, xr.1, a.nx);
        let bare = match a.bare {
            BareArg::Box => BarePotential::Box,
            BareArg::Coulomb => BarePotential::Coulomb {
                charge: s.charge()?,
                softening: a.softening,
            },
        };
        let grid = multicolor_effective(&zs, &xs, alpha0, alpha1, a.n_phase, bare).map_err(|e| usage(e.to_string()))?;
        let text = match s.format() {
            FormatArg::Csv => {
                let mut buf = Vec::new();
                write_grid_csv(&mut buf, &format!("{header} alpha1={}", sig15(alpha1)), &grid)?;
                String::from_utf8(buf)?
            }
            FormatArg::Json => {
                let v: Vec<Option<f64>> = grid.values.iter().map(|x| x.is_finite().then_some(*x)).collect();
                serde_json::to_string_pretty(&serde_json::json!({
                    "alpha0": alpha0, "alpha1": alpha1, "x": grid.xs, "z": grid.zs, "V_eff": v,
                }))? + "\n"
            }
        };
        return emit(s.common.out.as_deref(), &text);
    }
    let params = s.params(alpha0)?;
    let vs: Vec<f64> = match a.mode {
        BoxMode::Analytic => zs.iter().map(|&z| box_effective_analytic(z, alpha0)).collect(),
        BoxMode::Numeric => zs.iter().map(|&z| box_effective_numeric(z, alpha0, a.n_phase)).collect(),
        BoxMode::Rel => zs
            .iter()
            .map(|&z| box_effective_relativistic(z, alpha0, params.alpha_f, a.n_phase))
            .collect(),
        BoxMode::Multicolor => unreachable!(),
    };
    let wells = well_indices(&vs);
    let text = match s.format() {
        FormatArg::Csv => {
            let mut buf = Vec::new();
            write_profile_csv(&mut buf, &header, &zs, &vs)?;
            String::from_utf8(buf)?
        }
        FormatArg::Json => {
            let wz: Vec<f64> = wells.iter().map(|&i| zs[i]).collect();
            serde_json::to_string_pretty(&serde_json::json!({
                "alpha0": alpha0, "z": zs, "V_eff": vs, "wells": wz,
            }))? + "\n"
        }
    };
    emit(s.common.out.as_deref(), &text)?;
    let wz: Vec<String> = wells.iter().map(|&i| sig15(zs[i])).collect();
    eprintln!("{} well(s) at z = [{}]", wells.len(), wz.join(", "));
    Ok(())
}

fn cmd_dscale(s: &Settings) -> anyhow::Result<()> {
    let alpha0 = s.alpha0()?;
    let traj = s.trajectory(alpha0)?;
    let n_phase = DressedPotential::auto_phase_nodes(&traj, 1.0);
    let pot = DressedPotential::with_phase_nodes(s.charge()?, traj, n_phase)?;
    let mass = if s.mass_gauge() { mass_factor(pot.params()) } else { 1.0 };
    let opts = MinimizeOptions::default()
        .with_restarts(s.restarts()?)
        .with_seed(s.common.seed.unwrap_or(0));
    let g = minimize_with(s.hamiltonian(), s.electrons()?, &pot, mass, &opts)?;
    emit(s.common.out.as_deref(), &(g.to_json()? + "\n"))?;
    eprintln!("{}", energy_line("E", g.energy));
    eprintln!(
        "converged = {}, escaped = {}, |grad| = {:.3e}, best restart {}/{}",
        g.converged, g.escaped, g.grad_norm, g.best_restart, g.restarts
    );
    if !g.converged {
        bail!("minimisation did not converge (|grad| = {:.3e})", g.grad_norm);
    }
    Ok(())
}

fn cmd_scf(s: &Settings, a: &ScfArgs) -> anyhow::Result<()> {
    let alpha0 = s.alpha0()?;
    let charge = s.charge()?;
    let traj = s.trajectory(alpha0)?;
    let basis = match &a.basis {
        Some(p) => {
            let text = fs::read_to_string(p).map_err(|e| usage(format!("cannot read basis {}: {e}", p.display())))?;
            FloatingBasis::parse(&text).map_err(|e| usage(format!("basis {}: {e}", p.display())))?
        }
        None => FloatingBasis::for_trajectory(&traj, &BasisRecipe::for_charge(charge))?,
    };
    let n_phase = DressedPotential::auto_phase_nodes(&traj, 1.0);
    let pot = DressedPotential::with_phase_nodes(charge, traj, n_phase)?;
    let mass = if s.mass_gauge() { mass_factor(pot.params()) } else { 1.0 };
    let (na, nb) = spin_split(s.electrons()?);
    let opts = ScfOptions {
        route: match a.route {
            RouteArg::Boys => NuclearRoute::Boys,
            RouteArg::Quadrature => NuclearRoute::Quadrature,
        },
        ..ScfOptions::default()
    };
    let st = scf_solve(&basis, &pot, na, nb, mass, &opts)?;
    let summary = ScfSummary::new(&st, &basis, &pot);
    emit(s.common.out.as_deref(), &(serde_json::to_string_pretty(&summary)? + "\n"))?;
    if let Some(path) = &a.density {
        let ext = pot.trajectory().extent();
        let plane = Plane {
            normal: Axis::Y,
            offset: 0.0,
            u_range: (-(ext.x + 5.0), ext.x + 5.0),
            v_range: (-(ext.z + 5.0), ext.z + 5.0),
            nu: a.density_points.max(2),
            nv: a.density_points.max(2),
        };
        let g = density_grid(&st, &basis, &plane)?;
        let mut f = fs::File::create(path).with_context(|| format!("writing {}", path.display()))?;
        g.write_csv(&mut f, &format!("Z={} N={} alpha0={}", sig15(charge), na + nb, sig15(alpha0)))?;
        let m = g.argmax();
        eprintln!("density maximum at x={} z={}", sig15(m.x), sig15(m.z));
    }
    eprintln!("{}", energy_line("E", st.energy));
    eprintln!("iterations = {}, converged = {}", st.iterations, st.converged);
    Ok(())
}

fn parse_method(s: &str) -> anyhow::Result<Method> {
    match s.trim().to_ascii_lowercase().as_str() {
        "scf" => Ok(Method::Scf),
        other => HamiltonianKind::from_str(other)
            .map(Method::Dscale)
            .map_err(|_| usage(format!("unknown method '{s}' (cf, da, planar, scf)"))),
    }
}

fn cmd_sweep(s: &Settings, a: &SweepArgs) -> anyhow::Result<()> {
    let grid = s.alpha0_grid()?;
    let charge = s.charge()?;
    let mut spec = SweepSpec::new(charge, s.electrons()?, grid);
    spec.omega = s.common.omega.unwrap_or(1.0);
    spec.x_amp_coeff = s.common.x_amp_coeff.unwrap_or(1.0);
    spec.trajectory = s.trajectory_kind(spec.alpha0[0])?;
    if matches!(spec.trajectory, TrajectoryKind::Multicolor { .. } | TrajectoryKind::Elliptical { .. } | TrajectoryKind::Circular { .. })
        && spec.alpha0.len() > 1
        && s.common.ellipse.is_none()
        && s.common.alpha1.is_none()
    {
        return Err(usage("sweeping α₀ needs a linear trajectory or explicit --ellipse/--alpha1"));
    }
    let methods = a.methods.clone().or_else(|| s.file.get("methods").cloned());
    spec.methods = match methods {
        Some(list) => list.split(',').map(parse_method).collect::<anyhow::Result<_>>()?,
        None => vec![Method::Dscale(s.hamiltonian())],
    };
    spec.mass_gauge = s.mass_gauge();
    spec.restarts = s.restarts()?;
    spec.seed = s.common.seed.unwrap_or(0);
    if let Some(ps) = a.phase_spacing.map(Ok).or_else(|| from_file(&s.file, "phase-spacing").transpose()) {
        spec.phase_spacing = ps?;
    }
    spec.validate().map_err(|e| usage(e.to_string()))?;

    let out = s.common.out.as_deref();
    let result = run_sweep(&spec, out)?;
    match out {
        Some(dir) => {
            let fmt = match s.format() {
                FormatArg::Csv => CurveFormat::Csv,
                FormatArg::Json => CurveFormat::Json,
            };
            for p in emit_curves(&result, dir, fmt)? {
                eprintln!("wrote {}", p.display());
            }
        }
        None => emit(None, &(result.to_json()? + "\n"))?,
    }
    report_sweep(&result);
    let failed: Vec<&str> = result
        .points
        .iter()
        .filter_map(|p| p.failure.as_deref())
        .collect();
    if !failed.is_empty() {
        bail!("{} point(s) failed; first: {}", failed.len(), failed[0]);
    }
    Ok(())
}

fn report_sweep(result: &SweepResult) {
    for m in &result.spec.methods {
        for n in 1..=result.spec.n_max {
            let curve = result.be_curve(m, n);
            let best = curve
                .iter()
                .filter_map(|(a, v)| v.map(|v| (*a, v)))
                .min_by(|x, y| x.1.total_cmp(&y.1));
            if let Some((a, be)) = best {
                eprintln!("{} N={n}: min {} at alpha0 = {}", m.label(), energy_line("B.E.", be), sig15(a));
            }
        }
    }
}

fn cmd_compare(s: &Settings, a: &CompareArgs) -> anyhow::Result<()> {
    let dir = s
        .common
        .out
        .as_deref()
        .ok_or_else(|| usage("compare needs --out pointing at a sweep directory"))?;
    let path = dir.join(RESULTS_FILE);
    let text = fs::read_to_string(&path).map_err(|e| usage(format!("cannot read {}: {e}", path.display())))?;
    let result: SweepResult = serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
    let first = parse_method(&a.first)?;
    let second = parse_method(&a.second)?;
    for m in [&first, &second] {
        if !result.spec.methods.contains(m) {
            return Err(usage(format!("method '{}' is not in this sweep", m.label())));
        }
    }
    let n = s.common.n.unwrap_or(result.spec.n_max);
    if n == 0 || n > result.spec.n_max {
        return Err(usage(format!("--n must be in 1..={}", result.spec.n_max)));
    }
    let c = compare(&result, &first, &second, n);
    let text = serde_json::to_string_pretty(&c)? + "\n";
    match s.format() {
        FormatArg::Json => io::stdout().write_all(text.as_bytes())?,
        FormatArg::Csv => {
            let mut w = io::stdout().lock();
            writeln!(w, "alpha0,{},{}", c.first, c.second)?;
            let cell = |v: &Option<Vec<Option<f64>>>, i: usize| {
                v.as_ref().and_then(|v| v[i]).map(sig15).unwrap_or_default()
            };
            for (i, a0) in c.alpha0.iter().enumerate() {
                writeln!(w, "{},{},{}", sig15(*a0), cell(&c.first_normalized, i), cell(&c.second_normalized, i))?;
            }
        }
    }
    let show = |v: Option<f64>| v.map(sig15).unwrap_or_else(|| "none".into());
    eprintln!(
        "argmin {} = {}, {} = {}, shared = {}",
        c.first,
        show(c.first_argmin),
        c.second,
        show(c.second_argmin),
        c.shared_argmin
    );
    Ok(())
}

fn run(cli: Cli) -> anyhow::Result<()> {
    let s = Settings::load(cli.common)?;
    if let Some(j) = s.common.jobs {
        if j == 0 {
            return Err(usage("--jobs must be >= 1"));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(j)
            .build_global()
            .map_err(|e| anyhow!("thread pool: {e}"))?;
    }
    match &cli.cmd {
        Cmd::PotentialGrid(a) => cmd_potential_grid(&s, a),
        Cmd::Box1d(a) => cmd_box1d(&s, a),
        Cmd::DscaleMin => cmd_dscale(&s),
        Cmd::Scf(a) => cmd_scf(&s, a),
        Cmd::Sweep(a) => cmd_sweep(&s, a),
        Cmd::Compare(a) => cmd_compare(&s, a),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                let _ = e.print();
                return ExitCode::SUCCESS;
            }
            let first = e.to_string();
            let line = first.lines().next().unwrap_or("usage error").trim_start_matches("error: ");
            eprintln!("hfion: {line}");
            return ExitCode::from(2);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) if e.is::<Usage>() => {
            eprintln!("hfion: {e}");
            ExitCode::from(2)
        }
        Err(e) => {
            eprintln!("hfion: {}", format!("{e:#}").replace('\n', " "));
            ExitCode::from(1)
        }
    }
}
