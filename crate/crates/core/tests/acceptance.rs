//! Acceptance checks. Each test prints one `criterion N: PASS|FAIL` line
//! with the measured numbers, then asserts. Tolerances are the constants
//! at the top of each test.

use std::time::Instant;

use hyperdet::detmap::{phi_coeffs, phi_eval_grad, SymPair};
use hyperdet::homotopy::{jacobian_z, make_dual_basis, residual};
use hyperdet::hyperbolic::check_hyperbolic_default;
use hyperdet::linalg::C64;
use hyperdet::nuij::{apply_f, expand_f_randomized, fixed_endpoint, nuij_direct, LinearFormSet, NuijFamily, PathKind};
use hyperdet::oracle::solve_conic;
use hyperdet::parse::parse_polynomial_text;
use hyperdet::pipeline::{canonicalize, solve, verify, Detour, Representation, SolveOptions};
use hyperdet::ternary::{Point3, TernaryForm};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const SEXTIC: &str = "-36 x^6 - 157 x^4 y^2 - 20 x^3 y^3 - 109 x^2 y^4 + 246 x y^5 - 92 y^6 \
    - 12 x^3 y^2 t + 90 x^2 y^3 t + 10 x y^4 t + 76 y^5 t + 49 x^4 t^2 + 156 x^2 y^2 t^2 \
    - 16 x y^3 t^2 + 132 y^4 t^2 + 12 x y^2 t^3 - 14 y^3 t^3 - 14 x^2 t^4 - 27 y^2 t^4 + t^6";

const SEXTIC_R: [[f64; 6]; 6] = [
    [0.0, 1.0, -1.0, 1.0, 2.0, 1.0],
    [1.0, 0.0, -1.0, -2.0, 1.0, -1.0],
    [-1.0, -1.0, 0.0, 1.0, 2.0, 1.0],
    [1.0, -2.0, 1.0, 0.0, -1.0, 1.0],
    [2.0, 1.0, 2.0, -1.0, 0.0, -2.0],
    [1.0, -1.0, 1.0, 1.0, -2.0, 0.0],
];

/// Start endpoint as printed to six digits.
const ENDPOINT_D: [f64; 6] = [0.222847, 1.18893, 2.99274, 5.77514, 9.83747, 15.9829];
const ENDPOINT_R: [[f64; 6]; 6] = [
    [6.0, 2.51352, 1.19571, 4.04309, 1.42786, -1.98597],
    [2.51352, 6.0, 3.08656, 0.468873, 2.38468, 1.05948],
    [1.19571, 3.08656, 6.0, 0.785785, 4.66027, 2.29433],
    [4.04309, 0.468873, 0.785785, 6.0, 1.6226, 0.933245],
    [1.42786, 2.38468, 4.66027, 1.6226, 6.0, 3.50198],
    [-1.98597, 1.05948, 2.29433, 0.933245, 3.50198, 6.0],
];

fn report(n: usize, ok: bool, detail: String) {
    println!("criterion {n}: {} {detail}", if ok { "PASS" } else { "FAIL" });
    assert!(ok, "criterion {n} failed: {detail}");
}

fn sextic() -> TernaryForm {
    parse_polynomial_text(SEXTIC).unwrap()
}

fn sextic_pair() -> SymPair {
    let r: Vec<Vec<f64>> = SEXTIC_R.iter().map(|row| row.to_vec()).collect();
    SymPair::from_real(&[-3.0, -2.0, -1.0, 1.0, 2.0, 3.0], &r).unwrap()
}

fn endpoint_pair() -> SymPair {
    let r: Vec<Vec<f64>> = ENDPOINT_R.iter().map(|row| row.to_vec()).collect();
    SymPair::from_real(&ENDPOINT_D, &r).unwrap()
}

/// `max |a - b| / max(1, max |b|)`, coefficient-wise.
fn rel_coeff_error(a: &TernaryForm, b: &TernaryForm) -> f64 {
    a.coeff_distance(b).unwrap() / b.max_abs_coeff().max(1.0)
}

fn strict_random_pair(d: usize, rng: &mut ChaCha8Rng) -> (SymPair, TernaryForm) {
    loop {
        let z = SymPair::random_real(d, rng);
        let p = phi_coeffs(&z).unwrap();
        if check_hyperbolic_default(&p).unwrap().is_strict {
            return (z, p);
        }
    }
}

fn max_imag_along(rep: &Representation) -> f64 {
    let stats = &rep.path_stats;
    [&stats.phase1, &stats.phase2]
        .iter()
        .filter_map(|s| s.as_ref().map(|t| t.max_imag_seen))
        .fold(0.0, f64::max)
}

#[test]
fn criterion_01_forward_map_regression() {
    const TOL: f64 = 1e-9;
    const BUDGET_S: f64 = 1.0;
    let clock = Instant::now();
    let f = phi_coeffs(&sextic_pair()).unwrap();
    let secs = clock.elapsed().as_secs_f64();
    let dist = f.coeff_distance(&sextic()).unwrap();
    let spot = [((0, 6, 0), -36.0), ((0, 1, 5), 246.0), ((4, 0, 2), -27.0)]
        .iter()
        .all(|&((i, j, k), c)| (f.coeff(i, j, k).re - c).abs() < TOL);
    report(
        1,
        dist < TOL && spot && secs < BUDGET_S,
        format!("max coefficient error {dist:.2e} (tol {TOL:e}), {secs:.3} s (budget {BUDGET_S} s)"),
    );
}

#[test]
fn criterion_02_sextic_end_to_end() {
    const RESIDUAL_TOL: f64 = 1e-6;
    const D_TOL: f64 = 1e-6;
    let clock = Instant::now();
    let rep = solve(&sextic(), &SolveOptions::default()).unwrap();
    let secs = clock.elapsed().as_secs_f64();
    let mut d = rep.diag.clone();
    d.sort_by(f64::total_cmp);
    let d_err = d
        .iter()
        .zip([-3.0, -2.0, -1.0, 1.0, 2.0, 3.0])
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    let checked = verify(&sextic(), &rep).unwrap();
    report(
        2,
        rep.is_real && rep.residual < RESIDUAL_TOL && checked < RESIDUAL_TOL && d_err < D_TOL,
        format!(
            "is_real {}, residual {:.2e} (tol {RESIDUAL_TOL:e}), D error {d_err:.2e} (tol {D_TOL:e}), {secs:.2} s",
            rep.is_real, rep.residual
        ),
    );
}

/// Coefficient scale of this endpoint is about 3e5 (the `y^6` term), so six
/// printed digits leave absolute errors near 0.5. The check is relative to
/// each coefficient's own size.
#[test]
fn criterion_03_fixed_endpoint_cross_check() {
    const TOL: f64 = 1e-3;
    let printed = phi_coeffs(&endpoint_pair()).unwrap();
    let ours = fixed_endpoint(6, &PathKind::Original).unwrap();
    let abs = printed.coeff_distance(&ours).unwrap();
    let worst = printed
        .terms()
        .zip(ours.terms())
        .map(|((_, a), (_, b))| (a - b).norm() / b.norm().max(1.0))
        .fold(0.0, f64::max);
    report(
        3,
        worst < TOL,
        format!(
            "per-coefficient relative error {worst:.2e} (tol {TOL:e}); absolute {abs:.3} against coefficients up to {:.0}",
            ours.max_abs_coeff()
        ),
    );
}

/// The literal absolute reading; fails at print precision.
#[test]
#[ignore = "absolute 1e-3 is below the six-digit print precision at coefficient scale 3e5"]
fn criterion_03_literal_absolute() {
    const TOL: f64 = 1e-3;
    let printed = phi_coeffs(&endpoint_pair()).unwrap();
    let ours = fixed_endpoint(6, &PathKind::Original).unwrap();
    let abs = printed.coeff_distance(&ours).unwrap();
    report(3, abs < TOL, format!("absolute coefficient error {abs:.3} (tol {TOL:e})"));
}

#[test]
fn criterion_04_conic_fibres() {
    const TOL: f64 = 1e-8;
    let mut rng = ChaCha8Rng::seed_from_u64(404);
    let opts = SolveOptions {
        seed: 4,
        ..SolveOptions::default()
    };
    let mut bad = Vec::new();
    for i in 0..50 {
        let (_, p) = strict_random_pair(2, &mut rng);
        let set = solve_conic(&p).unwrap();
        let all_real = set.solutions.iter().all(|s| s.max_imag() == 0.0);
        let rep = solve(&p, &opts).unwrap();
        let (ours, _) = canonicalize(&rep.pair().unwrap()).unwrap();
        let hit = set.solutions.iter().any(|s| {
            let (c, _) = canonicalize(s).unwrap();
            c.coords().iter().zip(ours.coords()).all(|(a, b)| (a - b).norm() < TOL)
        });
        if set.solutions.len() != 4 || !all_real || !hit {
            bad.push(i);
        }
    }
    report(4, bad.is_empty(), format!("50 conics, mismatches {bad:?} (tol {TOL:e})"));
}

#[test]
fn criterion_05_hyperbolicity_along_paths() {
    let mut rng = ChaCha8Rng::seed_from_u64(505);
    let mut failures = Vec::new();
    for i in 0..100 {
        let d = 2 + i % 4;
        let (_, p) = strict_random_pair(d, &mut rng);
        let kind = if i % 2 == 0 {
            PathKind::Original
        } else {
            PathKind::Randomized(LinearFormSet::random(d, &mut rng))
        };
        for k in 0..=10 {
            let s = k as f64 / 10.0;
            let r = check_hyperbolic_default(&nuij_direct(&p, C64::new(s, 0.0), &kind)).unwrap();
            if !r.is_hyperbolic || (k < 10 && !r.is_strict) {
                failures.push((i, s));
            }
        }
    }
    report(5, failures.is_empty(), format!("100 forms x 11 values of s, failures {failures:?}"));
}

#[test]
fn criterion_06_conic_discriminant() {
    const TOL: f64 = 1e-9;
    let mut rng = ChaCha8Rng::seed_from_u64(606);
    let mut worst: f64 = 0.0;
    let mut min_value = f64::INFINITY;
    for _ in 0..100 {
        let z = SymPair::random_real(2, &mut rng);
        let s: f64 = rng.random_range(0.0..1.0);
        let q = nuij_direct(&phi_coeffs(&z).unwrap(), C64::new(s, 0.0), &PathKind::Original);
        let c = |i, j, k| q.coeff(i, j, k).re;
        let (a, b, cc, dd, e, f) = (c(0, 2, 0), c(0, 1, 1), c(0, 0, 2), c(1, 1, 0), c(1, 0, 1), c(2, 0, 0));
        let det = a * (cc * f - e * e / 4.0) - b / 2.0 * (b / 2.0 * f - e / 2.0 * dd / 2.0)
            + dd / 2.0 * (b / 2.0 * e / 2.0 - cc * dd / 2.0);
        let lhs = 4.0 * det;
        let (d1, d2) = (z.diag()[0].re, z.diag()[1].re);
        let (r11, r12, r22) = (z.r(0, 0).re, z.r(0, 1).re, z.r(1, 1).re);
        let u = s * s * (s - 1.0) * (s - 1.0);
        let rhs = 2.0 * u * (d1 - d2).powi(2)
            + 2.0 * u * (r11 - r22).powi(2)
            + s.powi(4) * r12 * r12 * (d1 - d2).powi(2)
            + 8.0 * r12 * r12 * u
            + 16.0 * (s - 1.0).powi(4);
        worst = worst.max((lhs - rhs).abs() / rhs.abs());
        min_value = min_value.min(rhs);
    }
    report(
        6,
        worst < TOL && min_value > 0.0,
        format!("relative error {worst:.2e} (tol {TOL:e}), smallest value {min_value:.2e}"),
    );
}

#[test]
fn criterion_07_expansion_formula() {
    const TOL: f64 = 1e-12;
    let mut rng = ChaCha8Rng::seed_from_u64(707);
    let mut worst: f64 = 0.0;
    for i in 0..100 {
        let d = 1 + i % 6;
        let coeffs = (0..(d + 1) * (d + 2) / 2)
            .map(|_| C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
            .collect();
        let f = TernaryForm::from_coeffs(d, coeffs).unwrap();
        let l = LinearFormSet::random(d, &mut rng);
        let s = C64::new(rng.random_range(-1.0..2.0), rng.random_range(-1.0..1.0));
        let composed = apply_f(&f, s, &PathKind::Randomized(l.clone()));
        worst = worst.max(rel_coeff_error(&expand_f_randomized(&f, s, &l), &composed));
    }
    report(7, worst < TOL, format!("relative error {worst:.2e} (tol {TOL:e})"));
}

#[test]
fn criterion_08_s_degree_bounds() {
    let mut rng = ChaCha8Rng::seed_from_u64(808);
    let mut ok = true;
    let mut seen = Vec::new();
    for kind_is_random in [false, true] {
        let mut profile = std::collections::BTreeMap::<(usize, usize), usize>::new();
        for i in 0..50 {
            let d = 2 + i % 5;
            let (_, p) = strict_random_pair(d, &mut rng);
            let kind = if kind_is_random {
                PathKind::Randomized(LinearFormSet::random(d, &mut rng))
            } else {
                PathKind::Original
            };
            let deg = NuijFamily::new(p, kind).unwrap().s_degree_profile();
            ok &= deg <= if kind_is_random { d } else { 2 * d };
            *profile.entry((d, deg)).or_default() += 1;
        }
        let name = if kind_is_random { "randomized" } else { "original" };
        let text: Vec<String> = profile.iter().map(|((d, k), n)| format!("d={d}:{k}x{n}")).collect();
        seen.push(format!("{name} [{}]", text.join(" ")));
    }
    report(8, ok, format!("observed s-degrees {}", seen.join("; ")));
}

#[test]
fn criterion_09_singular_quartic() {
    const TOL: f64 = 1e-8;
    let q = parse_polynomial_text("1/19*(19*t^4 - 31*x^2*t^2 - 86*y^2*t^2 + 9*x^4 + 41*x^2*y^2 + 39*y^4)").unwrap();
    let strict = check_hyperbolic_default(&q).unwrap().is_strict;
    let scale = q.max_abs_coeff();
    let mut worst: f64 = 0.0;
    for (sx, sy) in [(1.0, 1.0), (1.0, -1.0), (-1.0, 1.0), (-1.0, -1.0)] {
        let pt: Point3 = [C64::new(1.0, 0.0), C64::new(2.0 * sx, 0.0), C64::new(0.0, sy)];
        let g = q.gradient_at(pt);
        worst = worst.max(g.iter().map(|c| c.norm()).fold(0.0, f64::max) / scale);
    }
    report(
        9,
        strict && worst < TOL,
        format!("strict {strict}, normalized gradient {worst:.2e} (tol {TOL:e})"),
    );
}

fn coord_step(c: C64) -> f64 {
    1e-5 * (1.0 + c.norm())
}

#[test]
fn criterion_10_jacobians() {
    const TOL: f64 = 1e-6;
    let mut rng = ChaCha8Rng::seed_from_u64(1010);
    let mut worst_grad: f64 = 0.0;
    let mut worst_jac: f64 = 0.0;
    for i in 0..100 {
        let d = 1 + i % 8;
        let z = SymPair::random_real(d, &mut rng);
        let coords = z.coords();
        let pt: Point3 = [0, 1, 2].map(|_| C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)));
        let shifted = |k: usize, h: f64| {
            let mut c = coords.clone();
            c[k] += h;
            SymPair::from_coords(d, &c).unwrap()
        };

        let (_, grad) = phi_eval_grad(&z, pt);
        let gscale = grad.iter().map(|g| g.norm()).fold(0.0, f64::max).max(1e-300);
        for (k, g) in grad.iter().enumerate() {
            let h = coord_step(coords[k]);
            let fd = (phi_eval_grad(&shifted(k, h), pt).0 - phi_eval_grad(&shifted(k, -h), pt).0) / (2.0 * h);
            worst_grad = worst_grad.max((fd - g).norm() / gscale);
        }

        let (_, base) = strict_random_pair(d.max(1), &mut rng);
        let fam = NuijFamily::new(base, PathKind::Original).unwrap();
        let basis = make_dual_basis(d, i as u64).unwrap();
        // near s = 1 the family values stay small, so the differences do not
        // cancel against them
        let s = C64::new(rng.random_range(0.9..1.0), rng.random_range(-0.1..0.1));
        let jac = jacobian_z(&z, s, &fam, &basis);
        let jscale = (0..jac.rows()).flat_map(|r| jac.row(r).iter()).map(|c| c.norm()).fold(0.0, f64::max).max(1e-300);
        for k in 0..coords.len() {
            let h = coord_step(coords[k]);
            let plus = residual(&shifted(k, h), s, &fam, &basis);
            let minus = residual(&shifted(k, -h), s, &fam, &basis);
            for (row, (a, b)) in plus.iter().zip(&minus).enumerate() {
                let fd = (a - b) / (2.0 * h);
                worst_jac = worst_jac.max((fd - jac[(row, k)]).norm() / jscale);
            }
        }
    }
    report(
        10,
        worst_grad < TOL && worst_jac < TOL,
        format!("gradient error {worst_grad:.2e}, residual Jacobian error {worst_jac:.2e} (tol {TOL:e}), d = 1..8"),
    );
}

/// Solves random Phi-generated forms per degree with detour off, on the
/// original path or on a randomized one drawn per form. Returns the worst
/// verify value, worst imaginary drift and failures.
fn round_trips(degrees: &[usize], per_degree: usize, seed: u64, randomized: bool) -> (f64, f64, Vec<String>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (mut worst, mut drift) = (0.0_f64, 0.0_f64);
    let mut failures = Vec::new();
    for &d in degrees {
        for i in 0..per_degree {
            let (_, p) = strict_random_pair(d, &mut rng);
            let path_kind = if randomized {
                PathKind::random_randomized(d, &mut rng).unwrap()
            } else {
                PathKind::Original
            };
            let opts = SolveOptions {
                path_kind,
                seed: 1000 * d as u64 + i as u64,
                detour: Detour::Off,
                ..SolveOptions::default()
            };
            match solve(&p, &opts).and_then(|rep| Ok((verify(&p, &rep)?, rep))) {
                Ok((v, rep)) => {
                    worst = worst.max(v);
                    drift = drift.max(max_imag_along(&rep));
                    if v >= 1e-6 {
                        failures.push(format!("d={d} #{i}: verify {v:.2e}"));
                    }
                }
                Err(e) => failures.push(format!("d={d} #{i}: {e}")),
            }
        }
    }
    (worst, drift, failures)
}

#[test]
fn criteria_11_12_round_trip_and_realness() {
    const VERIFY_TOL: f64 = 1e-6;
    const IMAG_TOL: f64 = 1e-6;
    const BUDGET_S: f64 = 30.0 * 60.0;
    let clock = Instant::now();
    let (worst, drift, failures) = round_trips(&[2, 3, 4, 5], 20, 1111, false);
    let secs = clock.elapsed().as_secs_f64();
    let ok11 = failures.is_empty() && worst < VERIFY_TOL && secs < BUDGET_S;
    println!(
        "criterion 11: {} 80 solves, worst verify {worst:.2e} (tol {VERIFY_TOL:e}), {secs:.1} s, failures {failures:?}",
        if ok11 { "PASS" } else { "FAIL" }
    );
    let ok12 = drift < IMAG_TOL;
    println!(
        "criterion 12: {} max |Im| along accepted points {drift:.2e} (tol {IMAG_TOL:e})",
        if ok12 { "PASS" } else { "FAIL" }
    );
    assert!(ok11 && ok12);
}

#[test]
#[ignore = "long: degrees 6 to 10"]
fn long_round_trips_high_degree() {
    // the original path is only claimed up to d = 7 and the randomized one
    // up to d = 9; the rest is reported
    let mut claimed = Vec::new();
    for d in 6..=10 {
        for randomized in [false, true] {
            let clock = Instant::now();
            let (worst, drift, failures) = round_trips(&[d], 3, 2222, randomized);
            println!(
                "d={d} {}: worst verify {worst:.2e}, max |Im| {drift:.2e}, {:.1} s, {} of 3 failed",
                if randomized { "randomized" } else { "original" },
                clock.elapsed().as_secs_f64(),
                failures.len()
            );
            if d <= if randomized { 9 } else { 7 } {
                claimed.extend(failures);
            }
        }
    }
    assert!(claimed.is_empty(), "{claimed:#?}");
}
