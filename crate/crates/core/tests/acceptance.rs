//! Acceptance suite: one PASS/FAIL line per criterion, nonzero exit if any
//! criterion fails.

use std::f64::consts::PI;
use std::process::ExitCode;
use std::time::Instant;

use nalgebra::{DMatrix, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use hfion::box1d::{box_effective_analytic, box_effective_numeric, box_effective_relativistic, well_indices};
use hfion::dressed::{mass_factor, two_q_coefficient, DressedPotential};
use hfion::dscale::{minimize, Hamiltonian, HamiltonianKind};
use hfion::quadrature::{integrate_2d, Tolerance};
use hfion::scf::{
    eri_primitive, mulliken, nuclear_attraction, overlap_kinetic, scf_solve, spin_split, BasisRecipe, FloatingBasis,
    ScfOptions,
};
use hfion::sweep::{argmin, compare, run_sweep, Method, SweepResult, SweepSpec};
use hfion::trajectory::{FieldParams, Trajectory, TrajectoryKind};
use hfion::{Vec3, FINE_STRUCTURE};

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn potential(kind: TrajectoryKind, z: f64, alpha0: f64) -> DressedPotential {
    let traj = Trajectory::new(kind, FieldParams::new(alpha0)).unwrap();
    let n = DressedPotential::auto_phase_nodes(&traj, 1.0);
    DressedPotential::with_phase_nodes(z, traj, n).unwrap()
}

fn be_values(res: &SweepResult, n: usize) -> Vec<Option<f64>> {
    res.be_curve(&Method::Dscale(HamiltonianKind::Planar), n).into_iter().map(|p| p.1).collect()
}

fn planar_sweep(z: f64, n_max: usize, grid: Vec<f64>) -> SweepResult {
    let mut spec = SweepSpec::new(z, n_max, grid);
    spec.methods = vec![Method::Dscale(HamiltonianKind::Planar)];
    run_sweep(&spec, None).unwrap()
}

fn coulomb_limit() -> Outcome {
    let mut ok = true;
    let mut parts = vec![];
    for kind in [HamiltonianKind::CentralForce, HamiltonianKind::Planar] {
        let t0 = Instant::now();
        let g = minimize(kind, 1, &potential(TrajectoryKind::RelLinear, 1.0, 0.0), 1.0, 24, 0).unwrap();
        let secs = t0.elapsed().as_secs_f64();
        let p = g.positions[0];
        let r = (p[0] * p[0] + p[1] * p[1] + p[2] * p[2]).sqrt();
        ok &= (g.energy + 0.5).abs() <= 1e-6 && (r - 1.0).abs() <= 1e-6 && secs < 1.0;
        parts.push(format!("{}: E={:.9} r={:.9} {:.3}s", kind.label(), g.energy, r, secs));
    }
    outcome(ok, parts.join("; "))
}

fn mass_gauge() -> Outcome {
    // at α₀ω = 1 the mass factor is √(1 + c), with c the 2q coefficient
    let m = mass_factor(&FieldParams::new(1.0).with_omega(1.0));
    let from_mass = m * m - 1.0;
    let printed = format!("{from_mass:.2e}");
    let direct = two_q_coefficient(FINE_STRUCTURE);
    let ok = printed == "2.66e-5" && (from_mass - direct).abs() <= 1e-9 * direct;
    outcome(ok, format!("m²−1 = {from_mass:.6e} (printed {printed}), α_f²/2 = {direct:.6e}"))
}

fn hydride() -> Outcome {
    let grid: Vec<f64> = (2..=40).map(f64::from).collect();
    let t0 = Instant::now();
    let res = planar_sweep(1.0, 2, grid.clone());
    let secs = t0.elapsed().as_secs_f64();
    let be = be_values(&res, 2);
    let Some(i) = argmin(&be) else {
        return outcome(false, "no bound point".into());
    };
    let depth = -be[i].unwrap();
    let interior = i > 0 && i + 1 < grid.len();
    let ok = interior && (6.0..=16.0).contains(&grid[i]) && (depth - 0.047).abs() <= 0.3 * 0.047 && secs < 600.0;
    outcome(ok, format!("min B.E. = {:.5} at α₀ = {} (interior: {interior}), {:.1}s", -depth, grid[i], secs))
}

fn positions() -> Outcome {
    let g = minimize(HamiltonianKind::Planar, 2, &potential(TrajectoryKind::RelLinear, 1.0, 20.0), 1.0, 24, 0).unwrap();
    if g.positions.len() != 2 {
        return outcome(false, format!("{} bound electrons", g.positions.len()));
    }
    let (a, b) = (g.positions[0], g.positions[1]);
    let xs_ok = a[0].abs() < 1e-3 && b[0].abs() < 1e-3;
    let ys_ok = (a[1] - 5.04).abs() <= 0.5 && (b[1] - 5.04).abs() <= 0.5;
    let zs_ok = (a[2].abs() - 16.59).abs() <= 1.0 && (b[2].abs() - 16.59).abs() <= 1.0;
    let mirror = (a[2] + b[2]).abs() < 1e-3 && (a[1] - b[1]).abs() < 1e-3;
    outcome(
        xs_ok && ys_ok && zs_ok && mirror,
        format!("r1 = ({:.2e}, {:.4}, {:.4}), r2 = ({:.2e}, {:.4}, {:.4})", a[0], a[1], a[2], b[0], b[1], b[2]),
    )
}

fn terminal_species() -> Outcome {
    let grid: Vec<f64> = (2..=12).map(|k| f64::from(k) * 10.0).collect();
    let res = planar_sweep(1.0, 4, grid);
    let tol = 1e-9;
    let be3: Vec<f64> = be_values(&res, 3).into_iter().map(|v| v.unwrap_or(f64::NAN)).collect();
    let be4: Vec<f64> = be_values(&res, 4).into_iter().map(|v| v.unwrap_or(f64::NAN)).collect();
    let monotone = be3.windows(2).all(|w| w[1] <= w[0] + tol);
    let lo_end = be3[0].min(be3[be3.len() - 1]);
    let no_interior_min = be3[1..be3.len() - 1].iter().all(|v| *v >= lo_end - tol);
    let unbound4 = be4.iter().all(|v| *v > -tol);
    let max3 = be3.iter().fold(f64::NEG_INFINITY, |a, b| a.max(b.abs()));
    let min4 = be4.iter().copied().fold(f64::INFINITY, f64::min);
    outcome(
        monotone && no_interior_min && unbound4 && be3.iter().all(|v| v.is_finite()),
        format!(
            "N=3: non-increasing {monotone}, no interior min {no_interior_min}, max |B.E.| {max3:.2e}; N=4: min B.E. {min4:.2e} (unbound {unbound4})"
        ),
    )
}

fn helium_ladder() -> Outcome {
    let grid = vec![
        2.0, 5.0, 10.0, 15.0, 20.0, 30.0, 45.0, 60.0, 75.0, 90.0, 105.0, 120.0, 150.0, 200.0, 300.0, 400.0, 500.0, 600.0,
    ];
    let t0 = Instant::now();
    let res = planar_sweep(2.0, 5, grid.clone());
    let mut mins = vec![];
    for n in 3..=5 {
        let be = be_values(&res, n);
        match argmin(&be) {
            Some(i) if be[i].unwrap() < 0.0 => mins.push((grid[i], -be[i].unwrap())),
            _ => return outcome(false, format!("N={n} never binds")),
        }
    }
    let targets = [0.057, 0.007, 0.0004];
    let within = mins.iter().zip(targets).all(|((_, d), t)| (d - t).abs() <= 0.5 * t);
    let ordered = mins[0].1 > mins[1].1 && mins[1].1 > mins[2].1;
    let argmins = mins[0].0 < mins[1].0;
    let text: Vec<String> = mins
        .iter()
        .enumerate()
        .map(|(k, (a, d))| format!("N={}: {:.5} at α₀={}", k + 3, -d, a))
        .collect();
    outcome(within && ordered && argmins, format!("{}; {:.1}s", text.join(", "), t0.elapsed().as_secs_f64()))
}

fn hamiltonian_equivalence() -> Outcome {
    let mut worst: f64 = 0.0;
    for (z, n) in [(1.0, 1), (1.0, 2), (2.0, 2)] {
        for a in [5.0, 20.0, 50.0] {
            let p = potential(TrajectoryKind::NonRelLinear, z, a);
            let ep = minimize(HamiltonianKind::Planar, n, &p, 1.0, 24, 0).unwrap().energy;
            let ed = minimize(HamiltonianKind::Diatomic, n, &p, 1.0, 24, 0).unwrap().energy;
            worst = worst.max((ep - ed).abs());
        }
    }
    outcome(worst <= 1e-6, format!("max |E_P − E_DA| = {worst:.2e} over 9 cases"))
}

fn box_oracle() -> Outcome {
    let mut worst: f64 = 0.0;
    for a in [0.5, 2.0, 5.0, 10.0, 20.0] {
        let half = a + 2.0;
        for k in 0..=800 {
            let z = -half + 2.0 * half * f64::from(k) / 800.0;
            worst = worst.max((box_effective_analytic(z, a) - box_effective_numeric(z, a, 4096)).abs());
        }
    }
    let zs: Vec<f64> = (0..=2600).map(|k| -13.0 + 0.01 * f64::from(k)).collect();
    let rel: Vec<f64> = zs.iter().map(|&z| box_effective_relativistic(z, 10.0, FINE_STRUCTURE, 4096)).collect();
    let wells: Vec<f64> = well_indices(&rel).into_iter().map(|i| zs[i]).collect();
    outcome(
        worst <= 1e-6 && wells.len() == 3,
        format!("sup |analytic − numeric| = {worst:.2e}; relativistic α₀=10 wells at {wells:?}"),
    )
}

/// (ab|cd) by reducing the pair integral to ∫ G(R)/|R| d³R, where G is the
/// Gaussian cross-correlation of the two charge clouds, and integrating the
/// remaining (r, cos θ) plane numerically.
fn eri_oracle(a: f64, ra: &Vec3, b: f64, rb: &Vec3, c: f64, rc: &Vec3, d: f64, rd: &Vec3) -> f64 {
    let (p, q) = (a + b, c + d);
    let k1 = (-a * b / p * (ra - rb).norm_squared()).exp();
    let k2 = (-c * d / q * (rc - rd).norm_squared()).exp();
    let pc = (ra * a + rb * b) / p;
    let qc = (rc * c + rd * d) / q;
    let mu = p * q / (p + q);
    let dist = (pc - qc).norm();
    let rmax = dist + 12.0 / mu.sqrt();
    let radial = integrate_2d(
        |r, u| r * (-mu * (r * r + dist * dist - 2.0 * r * dist * u)).exp(),
        0.0,
        rmax,
        |_| -1.0,
        |_| 1.0,
        Tolerance::new(1e-14, 1e-11),
    )
    .unwrap();
    k1 * k2 * (PI / (p + q)).powf(1.5) * 2.0 * PI * radial.value
}

/// Lowest eigenvalue of H^core = T/m + V after canonical orthogonalisation.
fn core_eigenvalue(basis: &FloatingBasis, pot: &DressedPotential, mass: f64) -> f64 {
    let one = overlap_kinetic(basis);
    let h: DMatrix<f64> = &one.t / mass + nuclear_attraction(basis, pot);
    let eig = SymmetricEigen::new(one.s.clone());
    let keep: Vec<usize> = (0..eig.eigenvalues.len()).filter(|&k| eig.eigenvalues[k] > 1e-8).collect();
    let x = DMatrix::from_fn(one.s.nrows(), keep.len(), |i, k| {
        eig.eigenvectors[(i, keep[k])] / eig.eigenvalues[keep[k]].sqrt()
    });
    let hp = x.transpose() * h * &x;
    let hp = (&hp + hp.transpose()) * 0.5;
    SymmetricEigen::new(hp).eigenvalues.iter().copied().fold(f64::INFINITY, f64::min)
}

fn scf_correctness() -> Outcome {
    let mut parts = vec![];
    let mut ok = true;

    let mut core_err: f64 = 0.0;
    for (z, a) in [(1.0, 0.0), (1.0, 10.0), (2.0, 20.0)] {
        let pot = potential(TrajectoryKind::RelLinear, z, a);
        let basis = FloatingBasis::for_trajectory(pot.trajectory(), &BasisRecipe::for_charge(z)).unwrap();
        let st = scf_solve(&basis, &pot, 1, 0, 1.0, &ScfOptions::default()).unwrap();
        core_err = core_err.max((st.energy - core_eigenvalue(&basis, &pot, 1.0)).abs());
    }
    ok &= core_err <= 1e-10;
    parts.push(format!("N=1 vs core eigenvalue {core_err:.1e}"));

    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut eri_err: f64 = 0.0;
    for _ in 0..10 {
        let mut prim = || {
            let e = rng.gen_range(0.1..4.0);
            let r = Vec3::new(rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0));
            (e, r)
        };
        let (a, ra) = prim();
        let (b, rb) = prim();
        let (c, rc) = prim();
        let (d, rd) = prim();
        let got = eri_primitive(a, &ra, b, &rb, c, &rc, d, &rd);
        let want = eri_oracle(a, &ra, b, &rb, c, &rc, d, &rd);
        eri_err = eri_err.max((got - want).abs() / want.abs().max(1.0));
    }
    ok &= eri_err <= 1e-6;
    parts.push(format!("ERI vs numeric {eri_err:.1e}"));

    let mut pops_text = vec![];
    for (label, z, n) in [("H", 1.0, 1), ("H-", 1.0, 2), ("He", 2.0, 2), ("He-", 2.0, 3)] {
        let pot = potential(TrajectoryKind::RelLinear, z, 20.0);
        let basis = FloatingBasis::for_trajectory(pot.trajectory(), &BasisRecipe::for_charge(z)).unwrap();
        let (na, nb) = spin_split(n);
        let st = scf_solve(&basis, &pot, na, nb, 1.0, &ScfOptions::default()).unwrap();
        let pops = mulliken(&st, &basis);
        let total: f64 = pops.iter().sum();
        let inner = pops[0];
        let outer = pops[1..].iter().sum::<f64>() / 4.0;
        ok &= (total - n as f64).abs() <= 1e-6;
        ok &= match label {
            "He-" => (inner - 1.0).abs() <= 0.05,
            _ => inner < 0.1 * outer,
        };
        pops_text.push(format!("{label} {inner:.5}/{outer:.5}"));
    }
    parts.push(format!("inner/outer {}", pops_text.join(", ")));
    outcome(ok, parts.join("; "))
}

fn cross_method() -> Outcome {
    let mut spec = SweepSpec::new(1.0, 2, vec![2.0, 7.0, 12.0, 17.0, 22.0]);
    spec.methods = vec![Method::Dscale(HamiltonianKind::Planar), Method::Scf];
    let res = run_sweep(&spec, None).unwrap();
    let c = compare(&res, &spec.methods[0], &spec.methods[1], 2);
    outcome(
        c.shared_argmin,
        format!("argmin D-scaling α₀ = {:?}, SCF α₀ = {:?}", c.first_argmin, c.second_argmin),
    )
}

fn gradient_check() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let kinds = [HamiltonianKind::Planar, HamiltonianKind::Diatomic, HamiltonianKind::CentralForce];
    let mut worst: f64 = 0.0;
    for case in 0..20 {
        let kind = kinds[case % 3];
        let z = if case % 2 == 0 { 1.0 } else { 2.0 };
        let alpha0 = rng.gen_range(0.0..30.0);
        let n = 1 + case % 4;
        let pot = potential(TrajectoryKind::RelLinear, z, alpha0);
        let h = Hamiltonian::new(kind, &pot, rng.gen_range(1.0..1.5)).unwrap();
        let pos: Vec<Vec3> = (0..n)
            .map(|_| {
                Vec3::new(
                    rng.gen_range(-5.0..5.0),
                    rng.gen_range(0.5..6.0),
                    rng.gen_range(-alpha0 - 5.0..alpha0 + 5.0),
                )
            })
            .collect();
        let (_, g) = h.energy_gradient(&pos).unwrap();
        let mut num = vec![Vec3::zeros(); n];
        for i in 0..n {
            for c in 0..3 {
                let step = 1e-5 * pos[i][c].abs().max(1.0);
                let mut p = pos.clone();
                p[i][c] += step;
                let up = h.energy(&p).unwrap();
                p[i][c] -= 2.0 * step;
                let dn = h.energy(&p).unwrap();
                num[i][c] = (up - dn) / (2.0 * step);
            }
        }
        let scale = g.iter().map(|v| v.amax()).fold(0.0, f64::max);
        let diff = g.iter().zip(&num).map(|(a, b)| (a - b).amax()).fold(0.0, f64::max);
        worst = worst.max(diff / scale);
    }
    outcome(worst <= 1e-5, format!("max relative deviation {worst:.2e} over 20 configurations"))
}

fn main() -> ExitCode {
    let criteria: [(&str, fn() -> Outcome); 11] = [
        ("Coulomb limit", coulomb_limit),
        ("mass gauge coefficient", mass_gauge),
        ("H- stability", hydride),
        ("electron positions", positions),
        ("terminal species", terminal_species),
        ("helium ladder", helium_ladder),
        ("Hamiltonian equivalence", hamiltonian_equivalence),
        ("box oracle", box_oracle),
        ("SCF correctness", scf_correctness),
        ("cross-method argmin", cross_method),
        ("gradient check", gradient_check),
    ];
    let mut failed = 0;
    for (k, (name, f)) in criteria.iter().enumerate() {
        let o = f();
        let tag = if o.pass { "PASS" } else { "FAIL" };
        println!("criterion {:>2} {tag} {name}: {}", k + 1, o.detail);
        if !o.pass {
            failed += 1;
        }
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
