//! Unrestricted Hartree–Fock with floating s-type Gaussians in a dressed
//! potential.
//!
//! Every integral is closed form except the nuclear attraction, where the
//! nucleus is smeared over its trajectory: the point-charge result
//! −Z(2π/p)K F₀(p|P − C|²) is averaged over the phase nodes C = −α⃗(φ_k).
//! An independent fully numeric route is kept alongside it.

use std::f64::consts::PI;
use std::io::Write;

use nalgebra::{DMatrix, SymmetricEigen};
use rayon::prelude::*;
use serde::Serialize;

use crate::dressed::DressedPotential;
use crate::fmt::{ser_f64, ser_vec_f64, sig15};
use crate::quadrature::{integrate_2d, Tolerance};
use crate::trajectory::{Axis, Trajectory};
use crate::{Error, Result, Vec3};

const BOYS_SWITCH: f64 = 36.0;

/// F₀(t) = ∫₀¹ e^{−tu²} du.
///
/// Below the switch the series e^{−t} Σ (2t)^k/(2k+1)!! is summed (all
/// terms positive); above it F₀ = √(π/4t) to within erfc(6).
pub fn boys_f0(t: f64) -> f64 {
    if t < 0.0 {
        return f64::NAN;
    }
    if t >= BOYS_SWITCH {
        return (PI / (4.0 * t)).sqrt();
    }
    let mut term = 1.0;
    let mut sum = 1.0;
    let mut k = 0.0;
    loop {
        k += 1.0;
        term *= 2.0 * t / (2.0 * k + 1.0);
        sum += term;
        if term < 1e-17 * sum {
            break;
        }
    }
    (-t).exp() * sum
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GaussianProduct {
    pub exponent: f64,
    pub prefactor: f64,
    pub center: Vec3,
}

/// e^{−a|r−A|²}·e^{−b|r−B|²} = K e^{−p|r−P|²}.
pub fn gaussian_product_center(a: f64, ra: &Vec3, b: f64, rb: &Vec3) -> GaussianProduct {
    let p = a + b;
    GaussianProduct {
        exponent: p,
        prefactor: (-a * b / p * (ra - rb).norm_squared()).exp(),
        center: (ra * a + rb * b) / p,
    }
}

/// Normalisation of a single s primitive, (2a/π)^{3/4}.
pub fn primitive_norm(a: f64) -> f64 {
    (2.0 * a / PI).powf(0.75)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Primitive {
    pub exponent: f64,
    /// Coefficient of the normalised primitive.
    pub coefficient: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ContractedS {
    pub center: usize,
    pub primitives: Vec<Primitive>,
}

impl ContractedS {
    /// Terms `(exponent, c·N(exponent))` multiplying bare Gaussians.
    fn terms(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.primitives.iter().map(|p| (p.exponent, p.coefficient * primitive_norm(p.exponent)))
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct FloatingBasis {
    pub centers: Vec<Vec3>,
    pub functions: Vec<ContractedS>,
}

/// Even-tempered s set replicated on every centre.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BasisRecipe {
    pub n_primitives: usize,
    pub min_exponent: f64,
    pub max_exponent: f64,
}

impl BasisRecipe {
    /// Six primitives over [0.06, 20]·Z.
    pub fn for_charge(z: f64) -> Self {
        Self {
            n_primitives: 6,
            min_exponent: 0.06 * z,
            max_exponent: 20.0 * z,
        }
    }

    /// Six primitives over [0.02, 20]·Z, with a more diffuse tail.
    pub fn diffuse(z: f64) -> Self {
        Self {
            n_primitives: 6,
            min_exponent: 0.02 * z,
            max_exponent: 20.0 * z,
        }
    }

    pub fn exponents(&self) -> Vec<f64> {
        let n = self.n_primitives;
        if n == 1 {
            return vec![self.min_exponent];
        }
        let r = self.max_exponent / self.min_exponent;
        (0..n).map(|k| self.min_exponent * r.powf(k as f64 / (n - 1) as f64)).collect()
    }
}

impl FloatingBasis {
    /// Validates and normalises each contracted function to unit overlap.
    pub fn new(centers: Vec<Vec3>, functions: Vec<ContractedS>) -> Result<Self> {
        if centers.is_empty() {
            return Err(Error::InvalidParameter("basis needs at least one centre".into()));
        }
        if functions.is_empty() {
            return Err(Error::InvalidParameter("basis needs at least one function".into()));
        }
        let mut out = Vec::with_capacity(functions.len());
        for f in functions {
            if f.center >= centers.len() {
                return Err(Error::InvalidParameter(format!("centre index {} out of range", f.center)));
            }
            if f.primitives.is_empty() {
                return Err(Error::InvalidParameter("contracted function without primitives".into()));
            }
            if f.primitives.iter().any(|p| !(p.exponent > 0.0 && p.exponent.is_finite() && p.coefficient.is_finite())) {
                return Err(Error::InvalidParameter("exponents must be > 0 and coefficients finite".into()));
            }
            let self_overlap: f64 = f
                .terms()
                .flat_map(|(a, ca)| f.terms().map(move |(b, cb)| ca * cb * (PI / (a + b)).powf(1.5)))
                .sum();
            if !(self_overlap > 0.0) {
                return Err(Error::InvalidParameter("contracted function has zero norm".into()));
            }
            let s = 1.0 / self_overlap.sqrt();
            out.push(ContractedS {
                center: f.center,
                primitives: f
                    .primitives
                    .iter()
                    .map(|p| Primitive {
                        exponent: p.exponent,
                        coefficient: p.coefficient * s,
                    })
                    .collect(),
            });
        }
        Ok(Self {
            centers,
            functions: out,
        })
    }

    /// Uncontracted even-tempered functions on every centre.
    pub fn even_tempered(centers: Vec<Vec3>, recipe: &BasisRecipe) -> Result<Self> {
        if recipe.n_primitives == 0 || !(recipe.min_exponent > 0.0 && recipe.max_exponent >= recipe.min_exponent) {
            return Err(Error::InvalidParameter("bad even-tempered recipe".into()));
        }
        let ex = recipe.exponents();
        let functions = (0..centers.len())
            .flat_map(|c| {
                ex.iter().map(move |&a| ContractedS {
                    center: c,
                    primitives: vec![Primitive {
                        exponent: a,
                        coefficient: 1.0,
                    }],
                })
            })
            .collect();
        Self::new(centers, functions)
    }

    /// Origin plus the four figure-8 turning points.
    pub fn for_trajectory(traj: &Trajectory, recipe: &BasisRecipe) -> Result<Self> {
        Self::even_tempered(traj.well_sites(), recipe)
    }

    pub fn len(&self) -> usize {
        self.functions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.functions.is_empty()
    }

    pub fn center_of(&self, i: usize) -> &Vec3 {
        &self.centers[self.functions[i].center]
    }

    /// φ_i(r).
    pub fn eval(&self, i: usize, r: &Vec3) -> f64 {
        let d2 = (r - self.center_of(i)).norm_squared();
        self.functions[i].terms().map(|(a, c)| c * (-a * d2).exp()).sum()
    }

    /// Same basis with every centre shifted by `d`.
    pub fn translated(&self, d: &Vec3) -> Self {
        Self {
            centers: self.centers.iter().map(|c| c + d).collect(),
            functions: self.functions.clone(),
        }
    }

    /// Reads the plain-text layout
    ///
    /// ```text
    /// [centers]
    /// cx cy cz
    /// [primitives]
    /// center_index exponent coefficient
    /// ```
    ///
    /// Consecutive primitive lines on one centre form one contracted
    /// function; a blank line or a change of centre starts the next. `#`
    /// starts a comment.
    pub fn parse(text: &str) -> Result<Self> {
        #[derive(PartialEq)]
        enum Section {
            None,
            Centers,
            Primitives,
        }
        let mut section = Section::None;
        let mut centers = Vec::new();
        let mut functions: Vec<ContractedS> = Vec::new();
        let mut open = false;
        for (ln, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            let err = |m: &str| Error::Parse(format!("line {}: {m}", ln + 1));
            if line.is_empty() {
                open = false;
                continue;
            }
            match line.to_ascii_lowercase().as_str() {
                "[centers]" => {
                    section = Section::Centers;
                    continue;
                }
                "[primitives]" => {
                    section = Section::Primitives;
                    open = false;
                    continue;
                }
                _ => {}
            }
            let fields: Vec<&str> = line.split_whitespace().collect();
            match section {
                Section::None => return Err(err("expected [centers] or [primitives]")),
                Section::Centers => {
                    let v: Vec<f64> = fields
                        .iter()
                        .map(|f| f.parse::<f64>())
                        .collect::<std::result::Result<_, _>>()
                        .map_err(|_| err("centre needs three numbers"))?;
                    if v.len() != 3 {
                        return Err(err("centre needs three numbers"));
                    }
                    centers.push(Vec3::new(v[0], v[1], v[2]));
                }
                Section::Primitives => {
                    if fields.len() != 3 {
                        return Err(err("primitive needs: center_index exponent coefficient"));
                    }
                    let c: usize = fields[0].parse().map_err(|_| err("bad centre index"))?;
                    let exponent: f64 = fields[1].parse().map_err(|_| err("bad exponent"))?;
                    let coefficient: f64 = fields[2].parse().map_err(|_| err("bad coefficient"))?;
                    let prim = Primitive { exponent, coefficient };
                    match functions.last_mut() {
                        Some(f) if open && f.center == c => f.primitives.push(prim),
                        _ => functions.push(ContractedS {
                            center: c,
                            primitives: vec![prim],
                        }),
                    }
                    open = true;
                }
            }
        }
        Self::new(centers, functions)
    }

    pub fn to_text(&self) -> String {
        let mut s = String::from("[centers]\n");
        for c in &self.centers {
            s.push_str(&format!("{} {} {}\n", sig15(c.x), sig15(c.y), sig15(c.z)));
        }
        s.push_str("[primitives]\n");
        for f in &self.functions {
            for p in &f.primitives {
                s.push_str(&format!("{} {} {}\n", f.center, sig15(p.exponent), sig15(p.coefficient)));
            }
            s.push('\n');
        }
        s
    }
}

/// Overlap and kinetic matrices.
#[derive(Clone, Debug)]
pub struct OneElectron {
    pub s: DMatrix<f64>,
    pub t: DMatrix<f64>,
    pub min_s_eigenvalue: f64,
    /// Smallest eigenvalue of S below the pruning threshold.
    pub linearly_dependent: bool,
}

pub const LINDEP_TOL: f64 = 1e-8;

fn pair_sum<F: Fn(f64, &Vec3, f64, &Vec3) -> f64>(basis: &FloatingBasis, i: usize, j: usize, f: F) -> f64 {
    let (fi, fj) = (&basis.functions[i], &basis.functions[j]);
    let (ra, rb) = (basis.center_of(i), basis.center_of(j));
    let mut acc = 0.0;
    for (a, ca) in fi.terms() {
        for (b, cb) in fj.terms() {
            acc += ca * cb * f(a, ra, b, rb);
        }
    }
    acc
}

fn symmetric_matrix<F: Fn(usize, usize) -> f64 + Sync>(n: usize, f: F) -> DMatrix<f64> {
    let pairs: Vec<(usize, usize)> = (0..n).flat_map(|i| (0..=i).map(move |j| (i, j))).collect();
    let vals: Vec<f64> = pairs.par_iter().map(|&(i, j)| f(i, j)).collect();
    let mut m = DMatrix::zeros(n, n);
    for (&(i, j), v) in pairs.iter().zip(vals) {
        m[(i, j)] = v;
        m[(j, i)] = v;
    }
    m
}

pub fn overlap_primitive(a: f64, ra: &Vec3, b: f64, rb: &Vec3) -> f64 {
    let g = gaussian_product_center(a, ra, b, rb);
    g.prefactor * (PI / g.exponent).powf(1.5)
}

pub fn kinetic_primitive(a: f64, ra: &Vec3, b: f64, rb: &Vec3) -> f64 {
    let mu = a * b / (a + b);
    mu * (3.0 - 2.0 * mu * (ra - rb).norm_squared()) * overlap_primitive(a, ra, b, rb)
}

pub fn overlap_kinetic(basis: &FloatingBasis) -> OneElectron {
    let n = basis.len();
    let s = symmetric_matrix(n, |i, j| pair_sum(basis, i, j, overlap_primitive));
    let t = symmetric_matrix(n, |i, j| pair_sum(basis, i, j, kinetic_primitive));
    let min_s_eigenvalue = s.clone().symmetric_eigenvalues().min();
    OneElectron {
        s,
        t,
        min_s_eigenvalue,
        linearly_dependent: min_s_eigenvalue < LINDEP_TOL,
    }
}

/// −Z(2π/p)K⟨F₀(p|P + α⃗(φ)|²)⟩_φ for one primitive pair.
pub fn nuclear_attraction_primitive(a: f64, ra: &Vec3, b: f64, rb: &Vec3, pot: &DressedPotential) -> f64 {
    let g = gaussian_product_center(a, ra, b, rb);
    let p = g.exponent;
    let mean = pot.phase_average(|alpha| boys_f0(p * (g.center + alpha).norm_squared()));
    -pot.charge() * 2.0 * PI / p * g.prefactor * mean
}

/// Nuclear attraction matrix through phase-averaged Boys functions.
pub fn nuclear_attraction(basis: &FloatingBasis, pot: &DressedPotential) -> DMatrix<f64> {
    symmetric_matrix(basis.len(), |i, j| {
        pair_sum(basis, i, j, |a, ra, b, rb| nuclear_attraction_primitive(a, ra, b, rb, pot))
    })
}

/// Product-Gaussian extent, in standard deviations, covered by the numeric
/// route.
pub const NUMERIC_SIGMAS: f64 = 8.0;

/// ∫ e^{−p|r−P|²}/|r − C| d³r by adaptive quadrature in spherical
/// coordinates about C with the polar axis through P; the r² Jacobian
/// cancels the singularity and the azimuth integrates to 2π.
pub fn gaussian_coulomb_numeric(p: f64, center: &Vec3, nucleus: &Vec3, rel_tol: f64) -> Result<f64> {
    let d = (center - nucleus).norm();
    let reach = NUMERIC_SIGMAS / (2.0 * p).sqrt();
    let r_lo = (d - reach).max(0.0);
    let r_hi = d + reach;
    let theta_max = move |r: f64| {
        if d == 0.0 || r == 0.0 {
            PI
        } else {
            ((r * r + d * d - reach * reach) / (2.0 * r * d)).clamp(-1.0, 1.0).acos()
        }
    };
    let f = move |r: f64, th: f64| r * th.sin() * (-p * (r * r + d * d - 2.0 * r * d * th.cos())).exp();
    let tol = Tolerance {
        abs: 0.0,
        rel: rel_tol,
        max_intervals: 4000,
    };
    let est = integrate_2d(f, r_lo, r_hi, |_| 0.0, theta_max, tol)?;
    Ok(2.0 * PI * est.value)
}

/// ⟨φ_i|V|φ_j⟩ without Boys functions: every phase node is integrated
/// numerically. Relative tolerance `rel_tol` per node.
pub fn nuclear_attraction_numeric(basis: &FloatingBasis, i: usize, j: usize, pot: &DressedPotential, rel_tol: f64) -> Result<f64> {
    let failure = std::cell::RefCell::new(None);
    let v = pair_sum(basis, i, j, |a, ra, b, rb| {
        let g = gaussian_product_center(a, ra, b, rb);
        let mean = pot.phase_average(|alpha| match gaussian_coulomb_numeric(g.exponent, &g.center, &-alpha, rel_tol) {
            Ok(v) => v,
            Err(e) => {
                failure.borrow_mut().get_or_insert(e);
                f64::NAN
            }
        });
        -pot.charge() * g.prefactor * mean
    });
    match failure.into_inner() {
        Some(e) => Err(e),
        None => Ok(v),
    }
}

/// (ab|cd) over bare primitives.
pub fn eri_primitive(a: f64, ra: &Vec3, b: f64, rb: &Vec3, c: f64, rc: &Vec3, d: f64, rd: &Vec3) -> f64 {
    let g1 = gaussian_product_center(a, ra, b, rb);
    let g2 = gaussian_product_center(c, rc, d, rd);
    let (p, q) = (g1.exponent, g2.exponent);
    let k = g1.prefactor * g2.prefactor;
    if k == 0.0 {
        return 0.0;
    }
    2.0 * PI.powf(2.5) / (p * q * (p + q).sqrt()) * k * boys_f0(p * q / (p + q) * (g1.center - g2.center).norm_squared())
}

/// (ij|kl) over contracted functions.
pub fn eri(basis: &FloatingBasis, i: usize, j: usize, k: usize, l: usize) -> f64 {
    let f = &basis.functions;
    let (ri, rj, rk, rl) = (basis.center_of(i), basis.center_of(j), basis.center_of(k), basis.center_of(l));
    let mut acc = 0.0;
    for (a, ca) in f[i].terms() {
        for (b, cb) in f[j].terms() {
            for (c, cc) in f[k].terms() {
                for (d, cd) in f[l].terms() {
                    acc += ca * cb * cc * cd * eri_primitive(a, ri, b, rj, c, rk, d, rl);
                }
            }
        }
    }
    acc
}

/// Dense (ij|kl) tensor filled from the 8-fold unique quartets.
#[derive(Clone, Debug)]
pub struct EriTensor {
    n: usize,
    data: Vec<f64>,
}

impl EriTensor {
    pub fn build(basis: &FloatingBasis) -> Self {
        let n = basis.len();
        let pairs: Vec<(usize, usize)> = (0..n).flat_map(|i| (0..=i).map(move |j| (i, j))).collect();
        let rows: Vec<Vec<f64>> = pairs
            .par_iter()
            .enumerate()
            .map(|(ij, &(i, j))| pairs[..=ij].iter().map(|&(k, l)| eri(basis, i, j, k, l)).collect())
            .collect();
        let mut data = vec![0.0; n * n * n * n];
        for (ij, &(i, j)) in pairs.iter().enumerate() {
            for (kl, &(k, l)) in pairs[..=ij].iter().enumerate() {
                let v = rows[ij][kl];
                for (a, b) in [(i, j), (j, i)] {
                    for (c, d) in [(k, l), (l, k)] {
                        data[((a * n + b) * n + c) * n + d] = v;
                        data[((c * n + d) * n + a) * n + b] = v;
                    }
                }
            }
        }
        Self { n, data }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn get(&self, i: usize, j: usize, k: usize, l: usize) -> f64 {
        let n = self.n;
        self.data[((i * n + j) * n + k) * n + l]
    }

    /// Coulomb J_μν = Σ P_λσ(μν|λσ).
    pub fn coulomb(&self, p: &DMatrix<f64>) -> DMatrix<f64> {
        let n = self.n;
        // row-major copy of P so it lines up with the (k, l) slice
        let pt = p.transpose();
        let flat = pt.as_slice();
        DMatrix::from_fn(n, n, |i, j| {
            let base = (i * n + j) * n * n;
            self.data[base..base + n * n].iter().zip(flat).map(|(g, pv)| g * pv).sum()
        })
    }

    /// Exchange K_μν = Σ P_λσ(μλ|νσ).
    pub fn exchange(&self, p: &DMatrix<f64>) -> DMatrix<f64> {
        let n = self.n;
        DMatrix::from_fn(n, n, |i, j| {
            let mut acc = 0.0;
            for k in 0..n {
                let base = ((i * n + k) * n + j) * n;
                for l in 0..n {
                    acc += p[(k, l)] * self.data[base + l];
                }
            }
            acc
        })
    }

    /// Supermatrix M[(ij),(kl)] = (ij|kl).
    pub fn supermatrix(&self) -> DMatrix<f64> {
        let n2 = self.n * self.n;
        DMatrix::from_row_slice(n2, n2, &self.data)
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum NuclearRoute {
    #[default]
    Boys,
    /// Numeric route at relative tolerance 1e-7.
    Quadrature,
}

#[derive(Clone, Debug)]
pub struct ScfOptions {
    pub max_iter: usize,
    /// Weight of the previous density in the next iterate.
    pub damping: f64,
    /// Virtual-orbital shift in Hartree; 0 disables it.
    pub level_shift: f64,
    pub energy_tol: f64,
    pub density_tol: f64,
    pub lindep_tol: f64,
    /// Also start from a guess with the α HOMO and LUMO mixed at 45° and
    /// keep the lower converged energy.
    pub broken_symmetry_guess: bool,
    pub route: NuclearRoute,
}

impl Default for ScfOptions {
    fn default() -> Self {
        Self {
            max_iter: 500,
            damping: 0.3,
            level_shift: 0.0,
            energy_tol: 1e-6,
            density_tol: 1e-6,
            lindep_tol: LINDEP_TOL,
            broken_symmetry_guess: true,
            route: NuclearRoute::Boys,
        }
    }
}

#[derive(Clone, Debug)]
pub struct ScfState {
    pub s: DMatrix<f64>,
    pub t: DMatrix<f64>,
    pub v: DMatrix<f64>,
    pub h_core: DMatrix<f64>,
    pub eri: EriTensor,
    /// Canonical orthogonaliser X, with XᵀSX = 1.
    pub x: DMatrix<f64>,
    pub p_alpha: DMatrix<f64>,
    pub p_beta: DMatrix<f64>,
    pub c_alpha: DMatrix<f64>,
    pub c_beta: DMatrix<f64>,
    pub eps_alpha: Vec<f64>,
    pub eps_beta: Vec<f64>,
    pub energy: f64,
    pub iterations: usize,
    pub converged: bool,
    pub trace: Vec<f64>,
    pub n_alpha: usize,
    pub n_beta: usize,
    pub mass: f64,
}

impl ScfState {
    pub fn p_total(&self) -> DMatrix<f64> {
        &self.p_alpha + &self.p_beta
    }

    /// Lowest eigenvalue of XᵀH^core X.
    pub fn core_ground_energy(&self) -> f64 {
        let (e, _) = diagonalize(&self.x, &self.h_core);
        e[0]
    }
}

fn canonical_orthogonalizer(s: &DMatrix<f64>, tol: f64) -> DMatrix<f64> {
    let eig = SymmetricEigen::new(s.clone());
    let mut idx: Vec<usize> = (0..s.nrows()).filter(|&k| eig.eigenvalues[k] > tol).collect();
    idx.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    DMatrix::from_fn(s.nrows(), idx.len(), |i, k| eig.eigenvectors[(i, idx[k])] / eig.eigenvalues[idx[k]].sqrt())
}

/// Sorted eigenpairs of XᵀFX, coefficients returned in the AO basis.
fn diagonalize(x: &DMatrix<f64>, f: &DMatrix<f64>) -> (Vec<f64>, DMatrix<f64>) {
    let fp = x.transpose() * f * x;
    let fp = (&fp + fp.transpose()) * 0.5;
    let eig = SymmetricEigen::new(fp);
    let mut idx: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    idx.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let e = idx.iter().map(|&k| eig.eigenvalues[k]).collect();
    let c = DMatrix::from_fn(eig.eigenvectors.nrows(), idx.len(), |i, k| eig.eigenvectors[(i, idx[k])]);
    (e, x * c)
}

fn density(c: &DMatrix<f64>, n_occ: usize) -> DMatrix<f64> {
    let occ = c.columns(0, n_occ);
    &occ * occ.transpose()
}

fn frob_dot(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    a.component_mul(b).sum()
}

struct Run {
    p_alpha: DMatrix<f64>,
    p_beta: DMatrix<f64>,
    c_alpha: DMatrix<f64>,
    c_beta: DMatrix<f64>,
    eps_alpha: Vec<f64>,
    eps_beta: Vec<f64>,
    energy: f64,
    iterations: usize,
    converged: bool,
    trace: Vec<f64>,
    last_de: f64,
    last_dp: f64,
}

struct Fixed<'a> {
    h: &'a DMatrix<f64>,
    s: &'a DMatrix<f64>,
    x: &'a DMatrix<f64>,
    eri: &'a EriTensor,
    n_alpha: usize,
    n_beta: usize,
    opts: &'a ScfOptions,
}

impl Fixed<'_> {
    fn fock(&self, pa: &DMatrix<f64>, pb: &DMatrix<f64>) -> (DMatrix<f64>, DMatrix<f64>, f64) {
        let j = self.eri.coulomb(&(pa + pb));
        let fa = self.h + &j - self.eri.exchange(pa);
        let fb = self.h + &j - self.eri.exchange(pb);
        let e = 0.5 * (frob_dot(&(pa + pb), self.h) + frob_dot(pa, &fa) + frob_dot(pb, &fb));
        (fa, fb, e)
    }

    fn diag_shifted(&self, f: &DMatrix<f64>, p: &DMatrix<f64>) -> (Vec<f64>, DMatrix<f64>) {
        if self.opts.level_shift == 0.0 {
            return diagonalize(self.x, f);
        }
        // F + σ(S − SPS) raises the virtual space of the current density
        let sps = self.s * p * self.s;
        let shifted = f + (self.s - sps) * self.opts.level_shift;
        let (mut e, c) = diagonalize(self.x, &shifted);
        // report unshifted orbital energies
        for (k, ek) in e.iter_mut().enumerate() {
            let ck = c.column(k);
            *ek = (ck.transpose() * f * ck)[(0, 0)];
        }
        (e, c)
    }

    fn run(&self, mut pa: DMatrix<f64>, mut pb: DMatrix<f64>) -> Run {
        let lam = self.opts.damping;
        let mut e_old = f64::NAN;
        let mut trace = Vec::new();
        let (mut last_de, mut last_dp) = (f64::INFINITY, f64::INFINITY);
        for it in 1..=self.opts.max_iter {
            let (fa, fb, e) = self.fock(&pa, &pb);
            trace.push(e);
            let (ea, ca) = self.diag_shifted(&fa, &pa);
            let (eb, cb) = self.diag_shifted(&fb, &pb);
            let pa_new = density(&ca, self.n_alpha);
            let pb_new = density(&cb, self.n_beta);
            let n2 = (pa.len() * 2) as f64;
            let dp = (((&pa_new - &pa).norm_squared() + (&pb_new - &pb).norm_squared()) / n2).sqrt();
            let de = (e - e_old).abs();
            last_de = de;
            last_dp = dp;
            if de < self.opts.energy_tol && dp < self.opts.density_tol {
                let (_, _, e_final) = self.fock(&pa_new, &pb_new);
                return Run {
                    p_alpha: pa_new,
                    p_beta: pb_new,
                    c_alpha: ca,
                    c_beta: cb,
                    eps_alpha: ea,
                    eps_beta: eb,
                    energy: e_final,
                    iterations: it,
                    converged: true,
                    trace,
                    last_de,
                    last_dp,
                };
            }
            pa = &pa_new * (1.0 - lam) + &pa * lam;
            pb = &pb_new * (1.0 - lam) + &pb * lam;
            e_old = e;
        }
        let (fa, fb, e) = self.fock(&pa, &pb);
        let (ea, ca) = diagonalize(self.x, &fa);
        let (eb, cb) = diagonalize(self.x, &fb);
        Run {
            p_alpha: pa,
            p_beta: pb,
            c_alpha: ca,
            c_beta: cb,
            eps_alpha: ea,
            eps_beta: eb,
            energy: e,
            iterations: self.opts.max_iter,
            converged: false,
            trace,
            last_de,
            last_dp,
        }
    }
}

/// Full UHF solve. The kinetic matrix is divided by `mass`.
pub fn scf_solve(
    basis: &FloatingBasis,
    pot: &DressedPotential,
    n_alpha: usize,
    n_beta: usize,
    mass: f64,
    opts: &ScfOptions,
) -> Result<ScfState> {
    if !(mass > 0.0) {
        return Err(Error::InvalidParameter("mass multiplier must be > 0".into()));
    }
    if n_alpha + n_beta == 0 {
        return Err(Error::InvalidParameter("need at least one electron".into()));
    }
    if n_alpha + n_beta > 2 * basis.len() {
        return Err(Error::InvalidParameter("more electrons than spin orbitals".into()));
    }
    if !(0.0..1.0).contains(&opts.damping) {
        return Err(Error::InvalidParameter("damping must lie in [0, 1)".into()));
    }
    let one = overlap_kinetic(basis);
    let x = canonical_orthogonalizer(&one.s, opts.lindep_tol);
    let needed = n_alpha.max(n_beta);
    if x.ncols() < needed {
        return Err(Error::LinearDependence {
            kept: x.ncols(),
            total: basis.len(),
            needed,
        });
    }
    let v = match opts.route {
        NuclearRoute::Boys => nuclear_attraction(basis, pot),
        NuclearRoute::Quadrature => {
            let n = basis.len();
            let pairs: Vec<(usize, usize)> = (0..n).flat_map(|i| (0..=i).map(move |j| (i, j))).collect();
            let vals: Vec<Result<f64>> = pairs
                .par_iter()
                .map(|&(i, j)| nuclear_attraction_numeric(basis, i, j, pot, 1e-7))
                .collect();
            let mut m = DMatrix::zeros(n, n);
            for (&(i, j), v) in pairs.iter().zip(vals) {
                let v = v?;
                m[(i, j)] = v;
                m[(j, i)] = v;
            }
            m
        }
    };
    let h = &one.t / mass + &v;
    let eri = EriTensor::build(basis);
    let fixed = Fixed {
        h: &h,
        s: &one.s,
        x: &x,
        eri: &eri,
        n_alpha,
        n_beta,
        opts,
    };

    let (_, c0) = diagonalize(&x, &h);
    let mut runs = vec![fixed.run(density(&c0, n_alpha), density(&c0, n_beta))];
    if opts.broken_symmetry_guess && n_alpha >= 1 && c0.ncols() > n_alpha {
        let mut ca = c0.clone();
        let (hi, lo) = (c0.column(n_alpha - 1).into_owned(), c0.column(n_alpha).into_owned());
        let r = std::f64::consts::FRAC_1_SQRT_2;
        ca.set_column(n_alpha - 1, &((&hi + &lo) * r));
        ca.set_column(n_alpha, &((&lo - &hi) * r));
        runs.push(fixed.run(density(&ca, n_alpha), density(&c0, n_beta)));
    }
    let best = runs
        .into_iter()
        .min_by(|a, b| b.converged.cmp(&a.converged).then(a.energy.total_cmp(&b.energy)))
        .expect("at least one run");
    if !best.converged {
        return Err(Error::ScfNotConverged {
            iterations: best.iterations,
            delta_e: best.last_de,
            delta_p: best.last_dp,
            trace: best.trace,
        });
    }
    Ok(ScfState {
        s: one.s,
        t: one.t,
        v,
        h_core: h,
        eri,
        x,
        p_alpha: best.p_alpha,
        p_beta: best.p_beta,
        c_alpha: best.c_alpha,
        c_beta: best.c_beta,
        eps_alpha: best.eps_alpha,
        eps_beta: best.eps_beta,
        energy: best.energy,
        iterations: best.iterations,
        converged: best.converged,
        trace: best.trace,
        n_alpha,
        n_beta,
        mass,
    })
}

/// Spin-summed Mulliken population on each basis centre.
pub fn mulliken(state: &ScfState, basis: &FloatingBasis) -> Vec<f64> {
    let ps = state.p_total() * &state.s;
    let mut pop = vec![0.0; basis.centers.len()];
    for (i, f) in basis.functions.iter().enumerate() {
        pop[f.center] += ps[(i, i)];
    }
    pop
}

/// Electron density Σ P_μν φ_μ(r) φ_ν(r).
pub fn density_at(state: &ScfState, basis: &FloatingBasis, r: &Vec3) -> f64 {
    let phi: Vec<f64> = (0..basis.len()).map(|i| basis.eval(i, r)).collect();
    let p = state.p_total();
    let mut acc = 0.0;
    for i in 0..phi.len() {
        for j in 0..phi.len() {
            acc += p[(i, j)] * phi[i] * phi[j];
        }
    }
    acc
}

/// A rectangle in the plane `normal = offset`, with in-plane axes in
/// (x, y, z) order minus the normal.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Plane {
    pub normal: Axis,
    pub offset: f64,
    pub u_range: (f64, f64),
    pub v_range: (f64, f64),
    pub nu: usize,
    pub nv: usize,
}

impl Plane {
    fn point(&self, u: f64, v: f64) -> Vec3 {
        match self.normal {
            Axis::X => Vec3::new(self.offset, u, v),
            Axis::Y => Vec3::new(u, self.offset, v),
            Axis::Z => Vec3::new(u, v, self.offset),
        }
    }

    fn axis_names(&self) -> (&'static str, &'static str) {
        match self.normal {
            Axis::X => ("y", "z"),
            Axis::Y => ("x", "z"),
            Axis::Z => ("x", "y"),
        }
    }
}

fn lin(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    (0..n).map(|i| if n == 1 { lo } else { lo + (hi - lo) * i as f64 / (n - 1) as f64 }).collect()
}

#[derive(Clone, Debug, PartialEq)]
pub struct DensityGrid {
    pub plane: Plane,
    pub us: Vec<f64>,
    pub vs: Vec<f64>,
    /// `values[iv * nu + iu]`.
    pub values: Vec<f64>,
}

pub fn density_grid(state: &ScfState, basis: &FloatingBasis, plane: &Plane) -> Result<DensityGrid> {
    if plane.nu < 2 || plane.nv < 2 {
        return Err(Error::InvalidParameter("density grid needs at least 2x2 points".into()));
    }
    let us = lin(plane.u_range.0, plane.u_range.1, plane.nu);
    let vs = lin(plane.v_range.0, plane.v_range.1, plane.nv);
    let values = vs
        .par_iter()
        .flat_map_iter(|&v| us.iter().map(move |&u| density_at(state, basis, &plane.point(u, v))).collect::<Vec<_>>())
        .collect();
    Ok(DensityGrid {
        plane: *plane,
        us,
        vs,
        values,
    })
}

impl DensityGrid {
    pub fn get(&self, iu: usize, iv: usize) -> f64 {
        self.values[iv * self.us.len() + iu]
    }

    /// Point of largest density.
    pub fn argmax(&self) -> Vec3 {
        let k = (0..self.values.len())
            .max_by(|&a, &b| self.values[a].total_cmp(&self.values[b]))
            .unwrap_or(0);
        let nu = self.us.len();
        self.plane.point(self.us[k % nu], self.vs[k / nu])
    }

    pub fn write_csv<W: Write>(&self, mut w: W, header: &str) -> Result<()> {
        for line in header.lines() {
            writeln!(w, "# {line}")?;
        }
        let (a, b) = self.plane.axis_names();
        writeln!(w, "{a},{b},rho")?;
        for (iv, v) in self.vs.iter().enumerate() {
            for (iu, u) in self.us.iter().enumerate() {
                writeln!(w, "{},{},{}", sig15(*u), sig15(*v), sig15(self.get(iu, iv)))?;
            }
        }
        Ok(())
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct OrbitalEnergies {
    #[serde(serialize_with = "ser_vec_f64")]
    pub alpha: Vec<f64>,
    #[serde(serialize_with = "ser_vec_f64")]
    pub beta: Vec<f64>,
}

/// JSON-facing summary of a solve.
#[derive(Clone, Debug, Serialize)]
pub struct ScfSummary {
    #[serde(rename = "Z", serialize_with = "ser_f64")]
    pub charge: f64,
    #[serde(rename = "N")]
    pub n: usize,
    pub n_alpha: usize,
    pub n_beta: usize,
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
    pub orbital_energies: OrbitalEnergies,
    #[serde(serialize_with = "ser_vec_f64")]
    pub populations: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
    pub basis_size: usize,
}

impl ScfSummary {
    pub fn new(state: &ScfState, basis: &FloatingBasis, pot: &DressedPotential) -> Self {
        let occ = |e: &[f64], n: usize| e.iter().take(n.max(1) + 2).copied().collect::<Vec<_>>();
        Self {
            charge: pot.charge(),
            n: state.n_alpha + state.n_beta,
            n_alpha: state.n_alpha,
            n_beta: state.n_beta,
            alpha0: pot.params().alpha0,
            omega: pot.params().omega,
            mass: state.mass,
            energy: state.energy,
            energy_ev: state.energy * crate::HARTREE_EV,
            orbital_energies: OrbitalEnergies {
                alpha: occ(&state.eps_alpha, state.n_alpha),
                beta: occ(&state.eps_beta, state.n_beta),
            },
            populations: mulliken(state, basis),
            iterations: state.iterations,
            converged: state.converged,
            basis_size: basis.len(),
        }
    }
}

/// Spin split used for an N-electron solve: ⌈N/2⌉ α and ⌊N/2⌋ β.
pub fn spin_split(n: usize) -> (usize, usize) {
    (n.div_ceil(2), n / 2)
}
