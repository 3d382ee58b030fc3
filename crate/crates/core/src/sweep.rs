//! α₀ sweeps, binding-energy curves and their persistence.
//!
//! A sweep is a set of chains, one per (method, N). Each chain walks the α₀
//! grid in order and warm-starts every point from the previous minimiser;
//! chains run in parallel. Completed points are written to
//! `results.json` as they finish, so an interrupted sweep resumes where it
//! stopped.

use std::collections::{BTreeMap, HashMap};
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Mutex;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dressed::{mass_factor, DressedPotential};
use crate::dscale::{minimize_with, round_config, ElectronConfiguration, HamiltonianKind, MinimizeOptions};
use crate::fmt::{round15, sig15};
use crate::scf::{mulliken, scf_solve, spin_split, BasisRecipe, FloatingBasis, ScfOptions};
use crate::trajectory::{FieldParams, Trajectory, TrajectoryKind};
use crate::{Error, Result};

pub const CODE_VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Dscale(HamiltonianKind),
    Scf,
}

impl Method {
    pub fn label(&self) -> String {
        match self {
            Method::Dscale(k) => k.label().to_string(),
            Method::Scf => "scf".into(),
        }
    }
}

/// Expands `start..=stop` in steps of `step` without accumulating drift.
pub fn alpha0_range(start: f64, stop: f64, step: f64) -> Result<Vec<f64>> {
    if !(step > 0.0) || stop < start {
        return Err(Error::InvalidParameter("alpha0 range needs step > 0 and stop >= start".into()));
    }
    let n = ((stop - start) / step + 1e-9).floor() as usize;
    Ok((0..=n).map(|i| round15(start + step * i as f64)).collect())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepSpec {
    #[serde(rename = "Z")]
    pub charge: f64,
    pub n_max: usize,
    pub alpha0: Vec<f64>,
    pub omega: f64,
    pub x_amp_coeff: f64,
    pub trajectory: TrajectoryKind,
    pub methods: Vec<Method>,
    pub mass_gauge: bool,
    pub restarts: usize,
    pub seed: u64,
    /// Largest phase-node spacing along the path, in Bohr.
    pub phase_spacing: f64,
    /// Even-tempered s set per centre for SCF points: (count, min, max).
    pub scf_basis: (usize, f64, f64),
}

impl SweepSpec {
    pub fn new(charge: f64, n_max: usize, alpha0: Vec<f64>) -> Self {
        let r = BasisRecipe::for_charge(charge);
        Self {
            charge,
            n_max,
            alpha0,
            omega: 1.0,
            x_amp_coeff: 1.0,
            trajectory: TrajectoryKind::RelLinear,
            methods: vec![Method::Dscale(HamiltonianKind::Planar)],
            mass_gauge: false,
            restarts: crate::dscale::DEFAULT_RESTARTS,
            seed: 0,
            phase_spacing: 1.0,
            scf_basis: (r.n_primitives, r.min_exponent, r.max_exponent),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.alpha0.is_empty() {
            return Err(Error::InvalidParameter("alpha0 grid is empty".into()));
        }
        if self.alpha0.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::InvalidParameter("alpha0 grid must be strictly increasing".into()));
        }
        if self.n_max == 0 {
            return Err(Error::InvalidParameter("N_max must be >= 1".into()));
        }
        if self.methods.is_empty() {
            return Err(Error::InvalidParameter("no method selected".into()));
        }
        if self.restarts == 0 {
            return Err(Error::InvalidParameter("restarts must be >= 1".into()));
        }
        if !(self.charge > 0.0) {
            return Err(Error::InvalidParameter("Z must be > 0".into()));
        }
        if !(self.phase_spacing > 0.0) {
            return Err(Error::InvalidParameter("phase spacing must be > 0".into()));
        }
        self.trajectory.validate()?;
        self.params(self.alpha0[0]).validate()
    }

    pub fn params(&self, alpha0: f64) -> FieldParams {
        FieldParams::new(alpha0).with_omega(self.omega).with_x_amp_coeff(self.x_amp_coeff)
    }

    pub fn potential(&self, alpha0: f64) -> Result<DressedPotential> {
        let traj = Trajectory::new(self.trajectory.clone(), self.params(alpha0))?;
        let n = DressedPotential::auto_phase_nodes(&traj, self.phase_spacing);
        DressedPotential::with_phase_nodes(self.charge, traj, n)
    }

    pub fn mass(&self, alpha0: f64) -> f64 {
        if self.mass_gauge {
            mass_factor(&self.params(alpha0))
        } else {
            1.0
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PointResult {
    pub method: Method,
    #[serde(rename = "N")]
    pub n: usize,
    pub alpha0: f64,
    /// Rounded to 15 significant digits; `None` when the point failed.
    pub energy: Option<f64>,
    /// B.E. = E(N) − E(N−1) of the stored energies, E(0) = 0.
    pub binding_energy: Option<f64>,
    pub converged: bool,
    /// Bound-electron coordinates (D-scaling points).
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub positions: Vec<[f64; 3]>,
    #[serde(default)]
    pub escaped: usize,
    /// Mulliken populations per centre (SCF points).
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub populations: Vec<f64>,
    pub mass: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub failure: Option<String>,
}

impl PointResult {
    pub fn key(&self) -> String {
        point_key(&self.method, self.n, self.alpha0)
    }

    pub fn completed(&self) -> bool {
        self.failure.is_none() && self.energy.is_some()
    }
}

fn point_key(method: &Method, n: usize, alpha0: f64) -> String {
    format!("{}|{}|{}", method.label(), n, sig15(alpha0))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub spec: SweepSpec,
    pub version: String,
    /// Ordered by method, then α₀, then N.
    pub points: Vec<PointResult>,
}

impl SweepResult {
    pub fn get(&self, method: &Method, n: usize, alpha0: f64) -> Option<&PointResult> {
        let key = point_key(method, n, alpha0);
        self.points.iter().find(|p| p.key() == key)
    }

    pub fn energy(&self, method: &Method, n: usize, alpha0: f64) -> Option<f64> {
        if n == 0 {
            return Some(0.0);
        }
        self.get(method, n, alpha0).and_then(|p| p.energy)
    }

    /// B.E. curve of `n` electrons for one method over the spec grid.
    pub fn be_curve(&self, method: &Method, n: usize) -> Vec<(f64, Option<f64>)> {
        self.spec
            .alpha0
            .iter()
            .map(|&a| (a, self.get(method, n, a).and_then(|p| p.binding_energy)))
            .collect()
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Manifest {
    pub spec: SweepSpec,
    pub seed: u64,
    pub version: String,
    /// Wall seconds per point key.
    pub timings: BTreeMap<String, f64>,
}

pub const RESULTS_FILE: &str = "results.json";
pub const MANIFEST_FILE: &str = "manifest.json";

struct Store {
    dir: Option<PathBuf>,
    points: BTreeMap<String, PointResult>,
    timings: BTreeMap<String, f64>,
}

fn sort_points(spec: &SweepSpec, pts: impl IntoIterator<Item = PointResult>) -> Vec<PointResult> {
    let mut v: Vec<PointResult> = pts.into_iter().collect();
    let pos = |a: f64| spec.alpha0.iter().position(|&x| x == a).unwrap_or(usize::MAX);
    let mpos = |m: &Method| spec.methods.iter().position(|x| x == m).unwrap_or(usize::MAX);
    v.sort_by(|a, b| (mpos(&a.method), pos(a.alpha0), a.n).cmp(&(mpos(&b.method), pos(b.alpha0), b.n)));
    v
}

impl Store {
    fn snapshot(&self, spec: &SweepSpec) -> SweepResult {
        SweepResult {
            spec: spec.clone(),
            version: CODE_VERSION.into(),
            points: sort_points(spec, self.points.values().cloned()),
        }
    }

    fn persist(&self, spec: &SweepSpec) -> Result<()> {
        let Some(dir) = &self.dir else { return Ok(()) };
        let res = self.snapshot(spec);
        write_atomic(&dir.join(RESULTS_FILE), &res.to_json()?)?;
        let man = Manifest {
            spec: spec.clone(),
            seed: spec.seed,
            version: CODE_VERSION.into(),
            timings: self.timings.clone(),
        };
        write_atomic(&dir.join(MANIFEST_FILE), &serde_json::to_string_pretty(&man)?)?;
        Ok(())
    }
}

fn write_atomic(path: &Path, text: &str) -> Result<()> {
    let tmp = path.with_extension("tmp");
    fs::write(&tmp, text)?;
    fs::rename(tmp, path)?;
    Ok(())
}

/// Raw outcome of one (method, N, α₀) computation.
struct Computed {
    energy: f64,
    converged: bool,
    positions: Vec<[f64; 3]>,
    escaped: usize,
    populations: Vec<f64>,
    mass: f64,
}

fn compute_point(spec: &SweepSpec, method: &Method, n: usize, alpha0: f64, warm: Option<ElectronConfiguration>) -> Result<Computed> {
    let pot = spec.potential(alpha0)?;
    let mass = spec.mass(alpha0);
    match method {
        Method::Dscale(kind) => {
            let opts = MinimizeOptions::default()
                .with_restarts(spec.restarts)
                .with_seed(spec.seed)
                .with_warm_start(warm);
            let g = minimize_with(*kind, n, &pot, mass, &opts)?;
            Ok(Computed {
                energy: g.energy,
                converged: g.converged,
                positions: g.positions,
                escaped: g.escaped,
                populations: vec![],
                mass,
            })
        }
        Method::Scf => {
            let (count, lo, hi) = spec.scf_basis;
            let recipe = BasisRecipe {
                n_primitives: count,
                min_exponent: lo,
                max_exponent: hi,
            };
            let basis = FloatingBasis::for_trajectory(pot.trajectory(), &recipe)?;
            let (na, nb) = spin_split(n);
            let st = scf_solve(&basis, &pot, na, nb, mass, &ScfOptions::default())?;
            Ok(Computed {
                energy: st.energy,
                converged: st.converged,
                positions: vec![],
                escaped: 0,
                populations: mulliken(&st, &basis),
                mass,
            })
        }
    }
}

/// Reads a previous `results.json` in `dir` if its spec matches.
pub fn load_previous(dir: &Path, spec: &SweepSpec) -> Result<Option<SweepResult>> {
    let path = dir.join(RESULTS_FILE);
    if !path.exists() {
        return Ok(None);
    }
    let prev: SweepResult = serde_json::from_str(&fs::read_to_string(path)?)?;
    Ok((prev.spec == *spec).then_some(prev))
}

/// Runs every (method, N, α₀) point of `spec`.
///
/// With `out_dir`, results and a manifest are persisted after every point
/// and already-completed points of a matching earlier run are reused.
/// Failed points are kept with a failure message; the sweep itself only
/// fails on invalid specs or I/O errors.
pub fn run_sweep(spec: &SweepSpec, out_dir: Option<&Path>) -> Result<SweepResult> {
    spec.validate()?;
    let mut points = BTreeMap::new();
    let mut timings = BTreeMap::new();
    if let Some(dir) = out_dir {
        fs::create_dir_all(dir)?;
        if let Some(prev) = load_previous(dir, spec)? {
            for p in prev.points.into_iter().filter(|p| p.completed()) {
                points.insert(p.key(), p);
            }
            let man = dir.join(MANIFEST_FILE);
            if man.exists() {
                if let Ok(m) = serde_json::from_str::<Manifest>(&fs::read_to_string(man)?) {
                    timings = m.timings.into_iter().filter(|(k, _)| points.contains_key(k)).collect();
                }
            }
        }
    }
    let store = Mutex::new(Store {
        dir: out_dir.map(Path::to_path_buf),
        points,
        timings,
    });

    let chains: Vec<(Method, usize)> = spec
        .methods
        .iter()
        .flat_map(|m| (1..=spec.n_max).map(move |n| (*m, n)))
        .collect();
    let io_error: Mutex<Option<Error>> = Mutex::new(None);

    chains.par_iter().for_each(|&(method, n)| {
        let mut warm: Option<ElectronConfiguration> = None;
        for &a in &spec.alpha0 {
            let key = point_key(&method, n, a);
            let done = store.lock().expect("store lock").points.get(&key).cloned();
            if let Some(p) = done {
                warm = (!p.positions.is_empty()).then(|| ElectronConfiguration { positions: p.positions });
                continue;
            }
            let t0 = Instant::now();
            let outcome = compute_point(spec, &method, n, a, warm.take());
            let secs = t0.elapsed().as_secs_f64();
            let rec = match outcome {
                Ok(c) => {
                    let positions: Vec<[f64; 3]> = c.positions.iter().map(|p| p.map(round15)).collect();
                    if !positions.is_empty() {
                        warm = Some(round_config(&ElectronConfiguration { positions: positions.clone() }));
                    }
                    PointResult {
                        method,
                        n,
                        alpha0: a,
                        energy: Some(round15(c.energy)),
                        binding_energy: None,
                        converged: c.converged,
                        positions,
                        escaped: c.escaped,
                        populations: c.populations.into_iter().map(round15).collect(),
                        mass: round15(c.mass),
                        failure: None,
                    }
                }
                Err(e) => PointResult {
                    method,
                    n,
                    alpha0: a,
                    energy: None,
                    binding_energy: None,
                    converged: false,
                    positions: vec![],
                    escaped: 0,
                    populations: vec![],
                    mass: round15(spec.mass(a)),
                    failure: Some(e.to_string()),
                },
            };
            let mut st = store.lock().expect("store lock");
            st.timings.insert(key.clone(), secs);
            st.points.insert(key, rec);
            fill_binding_energies(&mut st.points);
            if let Err(e) = st.persist(spec) {
                io_error.lock().expect("error lock").get_or_insert(e);
            }
        }
    });

    if let Some(e) = io_error.into_inner().expect("error lock") {
        return Err(e);
    }
    let mut st = store.into_inner().expect("store lock");
    fill_binding_energies(&mut st.points);
    st.persist(spec)?;
    Ok(st.snapshot(spec))
}

/// Sets B.E. on every point whose own and (N−1) energies are known.
fn fill_binding_energies(points: &mut BTreeMap<String, PointResult>) {
    let energies: HashMap<String, f64> = points.iter().filter_map(|(k, p)| p.energy.map(|e| (k.clone(), e))).collect();
    for p in points.values_mut() {
        let prev = if p.n == 1 {
            Some(0.0)
        } else {
            energies.get(&point_key(&p.method, p.n - 1, p.alpha0)).copied()
        };
        p.binding_energy = match (p.energy, prev) {
            (Some(e), Some(e0)) => Some(e - e0),
            _ => None,
        };
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CurveFormat {
    Csv,
    Json,
}

/// Normalises a B.E. curve by the magnitude of its deepest point, so the
/// minimum becomes exactly −1. `None` when nothing is bound.
pub fn normalized(curve: &[Option<f64>]) -> Option<Vec<Option<f64>>> {
    let min = curve.iter().flatten().copied().fold(f64::INFINITY, f64::min);
    if !(min < 0.0) {
        return None;
    }
    Some(curve.iter().map(|v| v.map(|x| if x == min { -1.0 } else { x / min.abs() })).collect())
}

/// Grid index of the most negative B.E.
pub fn argmin(curve: &[Option<f64>]) -> Option<usize> {
    curve
        .iter()
        .enumerate()
        .filter_map(|(i, v)| v.map(|x| (i, x)))
        .min_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)))
        .map(|(i, _)| i)
}

/// Header and rows `alpha0,E_1..E_N,BE_1..BE_N,BEnorm_1..BEnorm_N` for one
/// method.
pub fn curve_table(result: &SweepResult, method: &Method) -> (Vec<String>, Vec<Vec<Option<f64>>>) {
    let nmax = result.spec.n_max;
    let mut header = vec!["alpha0".to_string()];
    header.extend((1..=nmax).map(|n| format!("E_{n}")));
    header.extend((1..=nmax).map(|n| format!("BE_{n}")));
    header.extend((1..=nmax).map(|n| format!("BEnorm_{n}")));
    let grid: Vec<f64> = result
        .spec
        .alpha0
        .iter()
        .copied()
        .filter(|&a| (1..=nmax).any(|n| result.get(method, n, a).is_some()))
        .collect();
    let norms: Vec<Option<Vec<Option<f64>>>> = (1..=nmax)
        .map(|n| {
            let c: Vec<Option<f64>> = grid.iter().map(|&a| result.get(method, n, a).and_then(|p| p.binding_energy)).collect();
            normalized(&c)
        })
        .collect();
    let rows = grid
        .iter()
        .enumerate()
        .map(|(i, &a)| {
            let mut row = vec![Some(a)];
            row.extend((1..=nmax).map(|n| result.energy(method, n, a)));
            row.extend((1..=nmax).map(|n| result.get(method, n, a).and_then(|p| p.binding_energy)));
            row.extend((0..nmax).map(|k| norms[k].as_ref().and_then(|v| v[i])));
            row
        })
        .collect();
    (header, rows)
}

/// Writes one curve file per method into `dir`; returns the paths.
pub fn emit_curves(result: &SweepResult, dir: &Path, format: CurveFormat) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir)?;
    let mut out = Vec::new();
    for m in &result.spec.methods {
        let (header, rows) = curve_table(result, m);
        match format {
            CurveFormat::Csv => {
                let path = dir.join(format!("curve_{}.csv", m.label()));
                let mut f = fs::File::create(&path)?;
                write_curve_csv(&mut f, &header, &rows)?;
                out.push(path);
            }
            CurveFormat::Json => {
                let path = dir.join(format!("curve_{}.json", m.label()));
                let cols: serde_json::Map<String, serde_json::Value> = header
                    .iter()
                    .enumerate()
                    .map(|(j, h)| (h.clone(), serde_json::json!(rows.iter().map(|r| r[j].map(round15)).collect::<Vec<_>>())))
                    .collect();
                fs::write(&path, serde_json::to_string_pretty(&cols)?)?;
                out.push(path);
            }
        }
    }
    Ok(out)
}

pub fn write_curve_csv<W: Write>(mut w: W, header: &[String], rows: &[Vec<Option<f64>>]) -> Result<()> {
    writeln!(w, "{}", header.join(","))?;
    for r in rows {
        let cells: Vec<String> = r.iter().map(|v| v.map(sig15).unwrap_or_default()).collect();
        writeln!(w, "{}", cells.join(","))?;
    }
    Ok(())
}

/// Parses a curve CSV back into (header, rows); empty cells are `None`.
pub fn read_curve_csv(text: &str) -> Result<(Vec<String>, Vec<Vec<Option<f64>>>)> {
    let mut lines = text.lines().filter(|l| !l.starts_with('#'));
    let header: Vec<String> = lines
        .next()
        .ok_or_else(|| Error::Parse("empty curve file".into()))?
        .split(',')
        .map(str::to_string)
        .collect();
    let mut rows = Vec::new();
    for l in lines.filter(|l| !l.trim().is_empty()) {
        let r = l
            .split(',')
            .map(|c| {
                if c.is_empty() {
                    Ok(None)
                } else {
                    c.parse::<f64>().map(Some).map_err(|_| Error::Parse(format!("bad number '{c}'")))
                }
            })
            .collect::<Result<Vec<_>>>()?;
        if r.len() != header.len() {
            return Err(Error::Parse("row width differs from header".into()));
        }
        rows.push(r);
    }
    Ok((header, rows))
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Comparison {
    #[serde(rename = "N")]
    pub n: usize,
    pub alpha0: Vec<f64>,
    pub first: String,
    pub second: String,
    pub first_normalized: Option<Vec<Option<f64>>>,
    pub second_normalized: Option<Vec<Option<f64>>>,
    pub first_argmin: Option<f64>,
    pub second_argmin: Option<f64>,
    pub shared_argmin: bool,
}

/// Normalised B.E. curves of two methods and whether their argmins coincide.
pub fn compare(result: &SweepResult, first: &Method, second: &Method, n: usize) -> Comparison {
    let a: Vec<Option<f64>> = result.be_curve(first, n).into_iter().map(|p| p.1).collect();
    let b: Vec<Option<f64>> = result.be_curve(second, n).into_iter().map(|p| p.1).collect();
    let grid = &result.spec.alpha0;
    let ia = normalized(&a).and(argmin(&a));
    let ib = normalized(&b).and(argmin(&b));
    Comparison {
        n,
        alpha0: grid.clone(),
        first: first.label(),
        second: second.label(),
        first_normalized: normalized(&a),
        second_normalized: normalized(&b),
        first_argmin: ia.map(|i| grid[i]),
        second_argmin: ib.map(|i| grid[i]),
        shared_argmin: ia.is_some() && ia == ib,
    }
}

/// Flat `key = value` text; `#` starts a comment.
pub fn parse_config(text: &str) -> Result<BTreeMap<String, String>> {
    let mut out = BTreeMap::new();
    for (ln, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| Error::Parse(format!("line {}: expected key=value", ln + 1)))?;
        let k = k.trim().trim_start_matches("--").replace('_', "-");
        if k.is_empty() {
            return Err(Error::Parse(format!("line {}: empty key", ln + 1)));
        }
        out.insert(k, v.trim().to_string());
    }
    Ok(out)
}
