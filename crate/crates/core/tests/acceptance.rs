//! Acceptance criteria. Each test writes one `[PASS]`/`[FAIL]` line to stderr,
//! bypassing libtest capture; use `--test-threads 1` to read them in order.

use std::io::Write;

use nalgebra::{Matrix3, Vector3};
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

use surfstokes_core::assembly::{
    apply_b, apply_b_star, assemble, energy_norm, energy_product, pressure_norm, AssemblyConfig, StokesData,
    TaylorHoodSpace,
};
use surfstokes_core::fe_space::{build_dofmap, quadrature, ReferenceBasis};
use surfstokes_core::geometry::{AnalyticSurface, Point3};
use surfstokes_core::lift::{build_improved_normal, geometric_errors, improved_normal_error, LiftedMesh};
use surfstokes_core::mesh::{build_base_mesh, BaseMesh};
use surfstokes_core::mms::{ManufacturedCase, MmsKind};
use surfstokes_core::solver::{
    pressure_mean_defect, solve_direct, solve_minres, MinresOptions, PreconditionerKind, SpdFactor,
};
use surfstokes_core::study::{compute_eoc, run_study, LevelRange, StudyConfig};

fn verdict(id: usize, name: &str, pass: bool, detail: &str) {
    let line = format!("[{}] criterion {id:>2} {name}: {detail}\n", if pass { "PASS" } else { "FAIL" });
    // A single write keeps lines from concurrent tests intact.
    let _ = std::io::stderr().write_all(line.as_bytes());
    assert!(pass, "criterion {id} ({name}) failed: {detail}");
}

fn sphere() -> AnalyticSurface {
    AnalyticSurface::sphere(1.0).unwrap()
}

fn torus() -> AnalyticSurface {
    AnalyticSurface::torus(1.0, 0.4).unwrap()
}

fn meshes(surface: &AnalyticSurface, levels: std::ops::RangeInclusive<usize>) -> Vec<BaseMesh> {
    let mut mesh = build_base_mesh(surface).unwrap().refine_to(surface, *levels.start()).unwrap();
    let mut out = vec![mesh.clone()];
    for _ in *levels.start()..*levels.end() {
        mesh = mesh.refine(surface).unwrap();
        out.push(mesh.clone());
    }
    out
}

/// `max / min − 1`.
fn variation(values: &[f64]) -> f64 {
    let max = values.iter().cloned().fold(f64::MIN, f64::max);
    let min = values.iter().cloned().fold(f64::MAX, f64::min);
    max / min - 1.0
}

fn last_eoc(errors: &[f64], hs: &[f64]) -> f64 {
    *compute_eoc(errors, hs).unwrap().last().unwrap()
}

fn fmt(values: &[f64]) -> String {
    values.iter().map(|v| format!("{v:.3}")).collect::<Vec<_>>().join(", ")
}

/// Last-pair EOCs of `(sup|d|, sup‖n − n_h‖, sup‖H∘π − H_h‖)` over `meshes`.
fn geometry_rates(surface: &AnalyticSurface, meshes: &[BaseMesh], k: usize) -> [f64; 3] {
    let rule = quadrature(2 * k + 2).unwrap();
    let (mut hs, mut d, mut n, mut w) = (vec![], vec![], vec![], vec![]);
    for mesh in meshes {
        let lifted = LiftedMesh::new(mesh, surface, k).unwrap();
        let e = geometric_errors(&lifted, &rule).unwrap();
        hs.push(lifted.h());
        d.push(e.distance);
        n.push(e.normal);
        w.push(e.weingarten);
    }
    // H_h vanishes on flat elements, so the curvature error stays O(1) for k = 1
    let w_rate = if k == 1 { (w[w.len() - 2] / w[w.len() - 1]).ln() / (hs[hs.len() - 2] / hs[hs.len() - 1]).ln() } else { last_eoc(&w, &hs) };
    [last_eoc(&d, &hs), last_eoc(&n, &hs), w_rate]
}

#[test]
fn criterion_01_geometric_rates() {
    let s = sphere();
    let ms = meshes(&s, 1..=4);
    let mut pass = true;
    let mut detail = vec![];
    for k in 1..=3 {
        let r = geometry_rates(&s, &ms, k);
        let expected = [k as f64 + 1.0, k as f64, k as f64 - 1.0];
        let ok = r.iter().zip(&expected).all(|(a, b)| (a - b).abs() <= 0.4);
        pass &= ok;
        detail.push(format!("sphere k={k} [{}] vs [{}]{}", fmt(&r), fmt(&expected), if ok { "" } else { " (off)" }));
    }
    let t = torus();
    let tm = meshes(&t, 1..=3);
    for k in 1..=3 {
        let r = geometry_rates(&t, &tm, k);
        println!("    torus levels 1-3, k={k}: EOC [{}]", fmt(&r));
    }
    verdict(1, "geometric rates", pass, &detail.join("; "));
}

#[test]
fn criterion_02_improved_normal() {
    let s = sphere();
    let ms = meshes(&s, 1..=4);
    let mut pass = true;
    let mut detail = vec![];
    for k in 2..=3 {
        let (mut hs, mut errs) = (vec![], vec![]);
        for mesh in &ms {
            let lifted = LiftedMesh::new(mesh, &s, k).unwrap();
            let dofs = build_dofmap(mesh, k).unwrap();
            let basis = ReferenceBasis::new(k).unwrap();
            let field = build_improved_normal(&lifted, &dofs.velocity, &basis).unwrap();
            let rule = quadrature(2 * k + 2).unwrap();
            errs.push(improved_normal_error(&lifted, &field, &dofs.velocity, &basis, &rule).unwrap());
            hs.push(lifted.h());
        }
        let eoc = last_eoc(&errs, &hs);
        let ok = eoc >= k as f64 + 1.0 - 0.3;
        pass &= ok;
        detail.push(format!("k=m={k} EOC {eoc:.3} (need ≥ {:.1})", k as f64 + 0.7));
    }
    verdict(2, "improved normal", pass, &detail.join("; "));
}

fn study(k: usize, m: usize, mms: MmsKind, levels: LevelRange, spectra: bool) -> surfstokes_core::study::ConvergenceReport {
    let config = StudyConfig { geom_degree: k, velocity_degree: m, mms, levels, spectra, ..StudyConfig::default() };
    let report = run_study(&config).unwrap();
    assert!(!report.has_failures(), "{:?}", report.levels.iter().map(|l| &l.failure).collect::<Vec<_>>());
    report
}

#[test]
fn criterion_03_energy_convergence() {
    let levels = LevelRange::new(1, 4).unwrap();
    let mut pass = true;
    let mut detail = vec![];
    for mms in [MmsKind::Killing, MmsKind::Polynomial] {
        let r = study(2, 2, mms, levels, false);
        let (e, p) = (*r.eoc.energy_error.last().unwrap(), *r.eoc.pressure_l2.last().unwrap());
        let ok = (1.75..=2.25).contains(&e) && (1.7..=2.4).contains(&p);
        pass &= ok;
        detail.push(format!("{mms} k=m=2 energy {e:.3} pressure {p:.3}"));
        let tangential: Vec<f64> = r.levels.iter().map(|l| l.tangential_h1).collect();
        let hs: Vec<f64> = r.levels.iter().map(|l| l.h).collect();
        println!(
            "    {mms} k=m=2 energy EOCs [{}], tangential H1 EOCs [{}]",
            fmt(&r.eoc.energy_error),
            fmt(&compute_eoc(&tangential, &hs).unwrap())
        );
        let r = study(1, 2, mms, levels, false);
        let e = *r.eoc.energy_error.last().unwrap();
        let ok = (0.8..=1.3).contains(&e);
        pass &= ok;
        detail.push(format!("{mms} k=1,m=2 energy {e:.3}"));
    }
    verdict(3, "energy-norm convergence", pass, &detail.join("; "));
}

fn spectra_sweep() -> surfstokes_core::study::ConvergenceReport {
    study(2, 2, MmsKind::Killing, LevelRange::new(1, 3).unwrap(), true)
}

#[test]
fn criterion_04_inf_sup_uniformity() {
    let r = spectra_sweep();
    let c: Vec<f64> = r.levels.iter().map(|l| l.schur_min.sqrt()).collect();
    let v = variation(&c);
    let min = c.iter().cloned().fold(f64::MAX, f64::min);
    verdict(4, "inf-sup uniformity", v < 0.2 && min > 0.01, &format!("c_* = [{}], variation {:.3}", fmt(&c), v));
}

#[test]
fn criterion_05_schur_equivalence() {
    let r = spectra_sweep();
    let lo: Vec<f64> = r.levels.iter().map(|l| l.schur_min).collect();
    let hi: Vec<f64> = r.levels.iter().map(|l| l.schur_max).collect();
    let (vl, vh) = (variation(&lo), variation(&hi));
    verdict(
        5,
        "Schur spectral equivalence",
        vl < 0.2 && vh < 0.2,
        &format!("min [{}] ({vl:.3}), max [{}] ({vh:.3})", fmt(&lo), fmt(&hi)),
    );
}

#[test]
fn criterion_06_a_block_conditioning() {
    let r = spectra_sweep();
    let ratios: Vec<f64> = r.levels.iter().map(|l| l.a_cond_ratio).collect();
    let growth: Vec<f64> = ratios.windows(2).map(|w| w[1] / w[0]).collect();
    let lows: Vec<f64> = r.levels.iter().map(|l| l.a_min).collect();
    let v = variation(&lows);
    let pass = growth.iter().all(|g| (3.0..=5.0).contains(g)) && v < 0.2;
    verdict(6, "A-block conditioning", pass, &format!("growth [{}], λ_min [{}] ({v:.3})", fmt(&growth), fmt(&lows)));
}

#[test]
fn criterion_07_minres_iterations() {
    let s = sphere();
    let case = ManufacturedCase::new(MmsKind::Killing, &s).unwrap();
    let mut its = vec![];
    for mesh in meshes(&s, 2..=4) {
        let space = TaylorHoodSpace::new(&mesh, &s, 2, 2, AssemblyConfig::default()).unwrap();
        let sys = assemble(&space, Some(&case)).unwrap();
        let opts = MinresOptions { preconditioner: PreconditionerKind::Exact, tol: 1e-10, max_iter: 5000 };
        its.push(solve_minres(&sys, opts).unwrap().iterations as f64);
    }
    let v = variation(&its);
    verdict(7, "preconditioned MINRES", v < 0.3, &format!("iterations [{}], variation {v:.3}", fmt(&its)));
}

struct TorusData;
impl StokesData for TorusData {
    fn forcing(&self, x: &Point3) -> Vector3<f64> {
        let n = torus().normal(x).unwrap();
        let v = Vector3::new(-x.y, x.x, x.z * x.x);
        v - n * n.dot(&v)
    }
    fn source(&self, x: &Point3) -> f64 {
        x.x * x.y
    }
}

#[test]
fn criterion_08_algebraic_identities() {
    let mut worst = [0.0f64; 3];
    let mut all_ok = true;
    let mut count = 0;
    let mut check = |space: &TaylorHoodSpace, data: &dyn StokesData| {
        let sys = assemble(space, Some(data)).unwrap();
        let bt1 = sys.b.tr_mul_vec(&vec![1.0; sys.n_p()]).unwrap();
        let bt1 = bt1.iter().fold(0.0f64, |a, v| a.max(v.abs())) / sys.b.max_abs();
        let sym = sys.a.symmetry_error().max(sys.m_u.symmetry_error()).max(sys.m_p.symmetry_error());
        let chol = SpdFactor::new(&sys.m_p, "M_p").is_ok();
        let d = solve_direct(&sys).unwrap();
        let m = solve_minres(&sys, MinresOptions::default()).unwrap();
        let mean = pressure_mean_defect(&sys, &d.p).max(pressure_mean_defect(&sys, &m.p));
        all_ok &= bt1 <= 1e-12 && sym <= 1e-12 && chol && mean <= 1e-10;
        worst = [worst[0].max(bt1), worst[1].max(sym), worst[2].max(mean)];
        count += 1;
    };
    let s = sphere();
    let case = ManufacturedCase::new(MmsKind::Polynomial, &s).unwrap();
    for mesh in meshes(&s, 1..=2) {
        for (k, m) in [(1, 2), (2, 2), (2, 3), (3, 3)] {
            check(&TaylorHoodSpace::new(&mesh, &s, k, m, AssemblyConfig::default()).unwrap(), &case);
        }
    }
    let t = torus();
    for mesh in meshes(&t, 0..=1) {
        for (k, m) in [(1, 2), (2, 2)] {
            check(&TaylorHoodSpace::new(&mesh, &t, k, m, AssemblyConfig::default()).unwrap(), &TorusData);
        }
    }
    verdict(
        8,
        "exact algebraic identities",
        all_ok,
        &format!(
            "{count} configurations; max |Bᵀ1| {:.1e}, symmetry {:.1e}, mean defect {:.1e}",
            worst[0], worst[1], worst[2]
        ),
    );
}

#[test]
fn criterion_09_b_discrepancy() {
    let s = sphere();
    // fields without parity, so the discrepancy cannot cancel over the symmetric mesh
    let v_field = |x: &Point3| {
        let w = Vector3::new(x.y.exp(), (2.0 * x.z).cos(), x.x + 0.3);
        w - x * x.dot(&w)
    };
    let (mut hs, mut ratios) = (vec![], vec![]);
    for mesh in meshes(&s, 1..=4) {
        let space = TaylorHoodSpace::new(&mesh, &s, 2, 2, AssemblyConfig::default()).unwrap();
        let sys = assemble(&space, None).unwrap();
        let v = space.interpolate_velocity(v_field).unwrap();
        let q = space.interpolate_pressure(|x| x.x.exp() + x.y * x.z * x.z).unwrap();
        let diff = (apply_b(&sys, &v, &q).unwrap() - apply_b_star(&sys, &v, &q).unwrap()).abs();
        ratios.push(diff / (energy_norm(&sys, &v).unwrap() * pressure_norm(&sys, &q).unwrap()));
        hs.push(space.h());
    }
    let eoc = last_eoc(&ratios, &hs);
    let all = compute_eoc(&ratios, &hs).unwrap();
    let r: Vec<String> = ratios.iter().map(|v| format!("{v:.3e}")).collect();
    verdict(9, "b_h vs b_h* discrepancy", eoc >= 0.8, &format!("ratios [{}], EOCs [{}]", r.join(", "), fmt(&all)));
}

#[test]
fn criterion_10_coercivity_sandwich() {
    let s = sphere();
    let mut rng = StdRng::seed_from_u64(2024);
    let (mut lows, mut highs) = (vec![], vec![]);
    for mesh in meshes(&s, 1..=3) {
        let space = TaylorHoodSpace::new(&mesh, &s, 2, 2, AssemblyConfig::default()).unwrap();
        let sys = assemble(&space, None).unwrap();
        let (mut lo, mut hi) = (f64::MAX, 0.0f64);
        for _ in 0..100 {
            let v: Vec<f64> = (0..sys.n_u()).map(|_| rng.random_range(-1.0..1.0)).collect();
            let r = energy_product(&sys, &v, &v).unwrap() / energy_norm(&sys, &v).unwrap().powi(2);
            lo = lo.min(r);
            hi = hi.max(r);
        }
        lows.push(lo);
        highs.push(hi);
    }
    let (vl, vh) = (variation(&lows), variation(&highs));
    let pass = lows.iter().all(|&c| c > 0.0) && vl < 0.3 && vh < 0.3;
    verdict(10, "coercivity/continuity sandwich", pass, &format!("c [{}] ({vl:.3}), C [{}] ({vh:.3})", fmt(&lows), fmt(&highs)));
}

fn random_sphere_points(n: usize, seed: u64) -> Vec<Point3> {
    let mut rng = StdRng::seed_from_u64(seed);
    (0..n)
        .map(|_| loop {
            let v = Vector3::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
            if v.norm() > 0.1 && v.norm() <= 1.0 {
                break v.normalize();
            }
        })
        .collect()
}

/// Richardson-extrapolated central difference, step 1e-4.
fn fd<F: Fn(&Point3) -> Vector3<f64>>(f: &F, x: &Point3, j: usize) -> Vector3<f64> {
    let central = |s: f64| {
        let mut e = Vector3::zeros();
        e[j] = s;
        (f(&(x + e)) - f(&(x - e))) / (2.0 * s)
    };
    (central(0.5e-4) * 4.0 - central(1e-4)) / 3.0
}

fn fd_gradient<F: Fn(&Point3) -> Vector3<f64>>(f: &F, x: &Point3) -> Matrix3<f64> {
    Matrix3::from_columns(&[fd(f, x, 0), fd(f, x, 1), fd(f, x, 2)])
}

#[test]
fn criterion_11_cross_solver_and_derivative_oracles() {
    let s = sphere();
    let mut solver_gap = 0.0f64;
    for kind in [MmsKind::Killing, MmsKind::Polynomial] {
        let case = ManufacturedCase::new(kind, &s).unwrap();
        for mesh in meshes(&s, 1..=3) {
            let space = TaylorHoodSpace::new(&mesh, &s, 2, 2, AssemblyConfig::default()).unwrap();
            let sys = assemble(&space, Some(&case)).unwrap();
            let d = solve_direct(&sys).unwrap();
            let m = solve_minres(&sys, MinresOptions { tol: 1e-10, ..MinresOptions::default() }).unwrap();
            let diff: Vec<f64> = d.u.iter().zip(&m.u).map(|(a, b)| a - b).collect();
            solver_gap = solver_gap.max(energy_norm(&sys, &diff).unwrap() / energy_norm(&sys, &d.u).unwrap());
        }
    }
    let mut oracle_gap = 0.0f64;
    let proj = |x: &Point3| Matrix3::identity() - x * x.transpose();
    for kind in [MmsKind::Killing, MmsKind::Polynomial] {
        let c = ManufacturedCase::new(kind, &s).unwrap();
        let ext = |y: &Point3| c.velocity_extension(y).unwrap();
        for x in random_sphere_points(100, 17) {
            let g = fd_gradient(&ext, &x);
            oracle_gap = oracle_gap.max((g - c.velocity_gradient(&x)).abs().max());
            oracle_gap = oracle_gap.max((g.trace() - c.source(&x)).abs());
            let strain_row = |i: usize| {
                move |y: &Point3| {
                    let z = s.closest_point(y).unwrap();
                    let gz = c.velocity_gradient(&z);
                    let p = proj(&z);
                    (p * (gz + gz.transpose()) * p * 0.5).row(i).transpose()
                }
            };
            let div = Vector3::from_fn(|i, _| (0..3).map(|j| fd(&strain_row(i), &x, j)[j]).sum::<f64>());
            let f = -proj(&x) * div + c.velocity(&x) + c.pressure_gradient(&x);
            oracle_gap = oracle_gap.max((f - c.forcing(&x)).abs().max());
        }
    }
    verdict(
        11,
        "cross-solver and derivative oracles",
        solver_gap <= 1e-8 && oracle_gap <= 1e-6,
        &format!("direct vs MINRES energy gap {solver_gap:.1e}; finite-difference gap {oracle_gap:.1e}"),
    );
}
