//! The determinantal map `(D, R) -> det(t I + x D + y R)`.
//!
//! Point values and exact gradients come from one LU factorization of the
//! pencil per point. Full coefficient vectors are recovered by interpolation
//! from point values, never by symbolic expansion of the determinant.

use std::sync::OnceLock;

use num_bigint::BigUint;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::linalg::{cond1, det, CMatrix, Lu, C64};
use crate::roots::univariate_roots;
use crate::ternary::{exponents, monomial_count, Point3, TernaryForm};

const ZERO: C64 = C64::new(0.0, 0.0);

/// A pair `(D, R)` with `D` diagonal and `R` symmetric, both `d x d`.
///
/// Coordinates are ordered as the `d` diagonal entries of `D` followed by the
/// upper triangle of `R` in row-major order, `d(d+3)/2` values in total.
#[derive(Debug, Clone, PartialEq)]
pub struct SymPair {
    d: usize,
    diag: Vec<C64>,
    sym: Vec<C64>,
}

/// Number of coordinates of a pair of order `d`.
pub fn pair_dim(d: usize) -> usize {
    d * (d + 3) / 2
}

fn sym_index(d: usize, j: usize, k: usize) -> usize {
    let (j, k) = if j <= k { (j, k) } else { (k, j) };
    j * d - j * (j.saturating_sub(1)) / 2 + (k - j)
}

impl SymPair {
    pub fn zeros(d: usize) -> Self {
        Self {
            d,
            diag: vec![ZERO; d],
            sym: vec![ZERO; d * (d + 1) / 2],
        }
    }

    /// Builds a pair from `D`'s diagonal and a full symmetric matrix `R`.
    pub fn new(diag: Vec<C64>, r: &[Vec<C64>]) -> Result<Self> {
        let d = diag.len();
        if r.len() != d || r.iter().any(|row| row.len() != d) {
            return Err(Error::Format(format!("R must be {d} x {d}")));
        }
        let mut sym = Vec::with_capacity(d * (d + 1) / 2);
        for j in 0..d {
            for k in j..d {
                if r[j][k] != r[k][j] {
                    return Err(Error::Format(format!("R is not symmetric at ({j}, {k})")));
                }
                sym.push(r[j][k]);
            }
        }
        Ok(Self { d, diag, sym })
    }

    pub fn from_real(diag: &[f64], r: &[Vec<f64>]) -> Result<Self> {
        let c = |x: &f64| C64::new(*x, 0.0);
        Self::new(
            diag.iter().map(c).collect(),
            &r.iter().map(|row| row.iter().map(c).collect()).collect::<Vec<_>>(),
        )
    }

    pub fn from_coords(d: usize, coords: &[C64]) -> Result<Self> {
        if coords.len() != pair_dim(d) {
            return Err(Error::Format(format!(
                "expected {} coordinates for order {d}, got {}",
                pair_dim(d),
                coords.len()
            )));
        }
        Ok(Self {
            d,
            diag: coords[..d].to_vec(),
            sym: coords[d..].to_vec(),
        })
    }

    /// Real pair with entries uniform in `[-1, 1]`.
    pub fn random_real<R: Rng + ?Sized>(d: usize, rng: &mut R) -> Self {
        let mut draw = || C64::new(rng.random_range(-1.0..=1.0), 0.0);
        let diag = (0..d).map(|_| draw()).collect();
        let sym = (0..d * (d + 1) / 2).map(|_| draw()).collect();
        Self { d, diag, sym }
    }

    pub fn order(&self) -> usize {
        self.d
    }

    pub fn dim(&self) -> usize {
        pair_dim(self.d)
    }

    pub fn diag(&self) -> &[C64] {
        &self.diag
    }

    pub fn r(&self, j: usize, k: usize) -> C64 {
        self.sym[sym_index(self.d, j, k)]
    }

    pub fn set_r(&mut self, j: usize, k: usize, v: C64) {
        let i = sym_index(self.d, j, k);
        self.sym[i] = v;
    }

    pub fn r_matrix(&self) -> CMatrix {
        CMatrix::from_fn(self.d, self.d, |j, k| self.r(j, k))
    }

    pub fn coords(&self) -> Vec<C64> {
        self.diag.iter().chain(&self.sym).copied().collect()
    }

    pub fn max_imag(&self) -> f64 {
        crate::linalg::max_imag(&self.coords())
    }

    pub fn is_real(&self) -> bool {
        self.max_imag() < 1e-12
    }

    pub fn real_part(&self) -> Self {
        let re = |v: &Vec<C64>| v.iter().map(|z| C64::new(z.re, 0.0)).collect();
        Self {
            d: self.d,
            diag: re(&self.diag),
            sym: re(&self.sym),
        }
    }

    /// `D` entries as reals (imaginary parts dropped).
    pub fn diag_re(&self) -> Vec<f64> {
        self.diag.iter().map(|z| z.re).collect()
    }

    /// `R` as a real row-major matrix (imaginary parts dropped).
    pub fn r_re(&self) -> Vec<Vec<f64>> {
        (0..self.d)
            .map(|j| (0..self.d).map(|k| self.r(j, k).re).collect())
            .collect()
    }

    /// Euclidean norm of the coordinate vector.
    pub fn norm(&self) -> f64 {
        crate::linalg::norm2(&self.coords())
    }
}

/// `t I + x D + y R`.
pub fn pencil_at(z: &SymPair, pt: Point3) -> CMatrix {
    let [t, x, y] = pt;
    CMatrix::from_fn(z.d, z.d, |j, k| {
        let r = y * z.r(j, k);
        if j == k {
            t + x * z.diag[j] + r
        } else {
            r
        }
    })
}

/// `det(t I + x D + y R)` by LU with partial pivoting.
pub fn phi_eval(z: &SymPair, pt: Point3) -> C64 {
    det(&pencil_at(z, pt))
}

/// Adjugate from cofactors, one minor determinant per entry.
fn adjugate_by_cofactors(m: &CMatrix) -> CMatrix {
    let n = m.rows();
    if n == 1 {
        return CMatrix::identity(1);
    }
    let mut adj = CMatrix::zeros(n, n);
    for r in 0..n {
        for c in 0..n {
            let minor = CMatrix::from_fn(n - 1, n - 1, |i, j| {
                m[(if i < r { i } else { i + 1 }, if j < c { j } else { j + 1 })]
            });
            let sign = if (r + c) % 2 == 0 { 1.0 } else { -1.0 };
            adj[(c, r)] = det(&minor) * sign;
        }
    }
    adj
}

/// Value and gradient of `det(t I + x D + y R)` with respect to the pair
/// coordinates.
///
/// With `C = adj(M)`: `d det / d D_kk = x C_kk`, `d det / d R_kk = y C_kk` and
/// `d det / d R_jk = 2 y C_jk` for `j < k` (the entry appears twice).
pub fn phi_eval_grad(z: &SymPair, pt: Point3) -> (C64, Vec<C64>) {
    let m = pencil_at(z, pt);
    let lu = Lu::new(&m);
    let value = lu.det();
    let adj = if lu.min_pivot_ratio() > 1e-8 {
        let mut inv = lu.inverse();
        for i in 0..z.d {
            for j in 0..z.d {
                inv[(i, j)] *= value;
            }
        }
        inv
    } else {
        adjugate_by_cofactors(&m)
    };
    let [_, x, y] = pt;
    let mut grad = Vec::with_capacity(z.dim());
    grad.extend((0..z.d).map(|k| x * adj[(k, k)]));
    for j in 0..z.d {
        for k in j..z.d {
            let c = 0.5 * (adj[(j, k)] + adj[(k, j)]);
            grad.push(if j == k { y * c } else { 2.0 * y * c });
        }
    }
    (value, grad)
}

const NODE_SEED: u64 = 0x6e6f_6465_7365_7473;

fn unit(rng: &mut ChaCha8Rng) -> C64 {
    C64::from_polar(1.0, rng.random_range(0.0..std::f64::consts::TAU))
}

/// Monomial-evaluation matrix of degree `d` at the given points.
pub fn monomial_matrix(d: usize, points: &[Point3]) -> CMatrix {
    let exps: Vec<_> = exponents(d).collect();
    CMatrix::from_fn(points.len(), exps.len(), |i, m| {
        let (a, b, c) = exps[m];
        let [t, x, y] = points[i];
        t.powu(a as u32) * x.powu(b as u32) * y.powu(c as u32)
    })
}

struct NodeSet {
    points: Vec<Point3>,
    lu: Lu,
}

fn interpolation_nodes(d: usize) -> Result<&'static NodeSet> {
    static CACHE: OnceLock<std::sync::Mutex<Vec<Option<&'static NodeSet>>>> = OnceLock::new();
    let cache = CACHE.get_or_init(Default::default);
    let mut guard = cache.lock().expect("node cache poisoned");
    if guard.len() <= d {
        guard.resize(d + 1, None);
    }
    if let Some(set) = guard[d] {
        return Ok(set);
    }
    let n = monomial_count(d);
    let mut rng = ChaCha8Rng::seed_from_u64(NODE_SEED ^ d as u64);
    let mut worst = 0.0f64;
    for _ in 0..20 {
        let points: Vec<Point3> = (0..n).map(|_| [unit(&mut rng), unit(&mut rng), unit(&mut rng)]).collect();
        let v = monomial_matrix(d, &points);
        let cond = cond1(&v);
        if cond < 1e10 {
            let set: &'static NodeSet = Box::leak(Box::new(NodeSet { points, lu: Lu::new(&v) }));
            guard[d] = Some(set);
            return Ok(set);
        }
        worst = worst.max(cond);
    }
    Err(Error::IllConditionedNodes(worst))
}

/// Coefficients of `det(t I + x D + y R)`, recovered by interpolation at a
/// fixed set of `binom(d+2, 2)` unit-circle nodes.
pub fn phi_coeffs(z: &SymPair) -> Result<TernaryForm> {
    let d = z.d;
    let nodes = interpolation_nodes(d)?;
    let values: Vec<C64> = nodes.points.iter().map(|&p| phi_eval(z, p)).collect();
    let mut coeffs = nodes.lu.solve(&values);
    let scale = crate::linalg::max_abs(&values).max(1.0);
    let resid = monomial_matrix(d, &nodes.points)
        .mul_vec(&coeffs)
        .iter()
        .zip(&values)
        .fold(0.0f64, |m, (a, b)| m.max((a - b).norm()));
    if resid > 1e-9 * scale {
        return Err(Error::IllConditionedNodes(resid / scale));
    }
    coeffs[0] = C64::new(1.0, 0.0);
    if z.is_real() {
        coeffs.iter_mut().for_each(|c| c.im = 0.0);
    }
    TernaryForm::from_coeffs(d, coeffs)
}

/// Sorted real roots of `p(t, -1, 0)`: the diagonal of `D` in any pair of
/// the fiber over `p`.
pub fn extract_d_candidates(p: &TernaryForm) -> Result<Vec<f64>> {
    let roots = univariate_roots(&p.restrict_direction(-1.0, 0.0)?)?;
    let worst = crate::linalg::max_imag(&roots);
    if worst >= 1e-7 {
        return Err(Error::NonRealRoots(worst));
    }
    let mut re: Vec<f64> = roots.iter().map(|r| r.re).collect();
    re.sort_by(f64::total_cmp);
    Ok(re)
}

/// Fibre sizes of the determinantal map over a smooth hyperbolic form of
/// degree `d`: `(complex, real)` with genus `g = (d-1)(d-2)/2`.
///
/// complex = `2^(g-1) (2^g + 1) 2^(d-1) d!`, real = `2^g 2^(d-1) d!`.
pub fn fiber_cardinality(d: usize) -> (BigUint, BigUint) {
    assert!(d >= 1, "degree must be positive");
    let g = if d < 3 { 0 } else { (d - 1) * (d - 2) / 2 };
    let pow2 = |e: usize| BigUint::from(1u8) << e;
    let fact: BigUint = (1..=d).map(BigUint::from).product();
    let tail = pow2(d - 1) * fact;
    // 2^g (2^g + 1) is always even, so halving it is exact even at g = 0
    let classes = (pow2(g) * (pow2(g) + 1u8)) >> 1;
    (classes * &tail, pow2(g) * tail)
}

#[cfg(test)]
pub(crate) mod fixtures {
    use super::*;

    /// Integer pair whose determinant is [`crate::ternary::fixtures::sextic`].
    pub fn sextic_pair() -> SymPair {
        SymPair::from_real(
            &[-3.0, -2.0, -1.0, 1.0, 2.0, 3.0],
            &[
                vec![0.0, 1.0, -1.0, 1.0, 2.0, 1.0],
                vec![1.0, 0.0, -1.0, -2.0, 1.0, -1.0],
                vec![-1.0, -1.0, 0.0, 1.0, 2.0, 1.0],
                vec![1.0, -2.0, 1.0, 0.0, -1.0, 1.0],
                vec![2.0, 1.0, 2.0, -1.0, 0.0, -2.0],
                vec![1.0, -1.0, 1.0, 1.0, -2.0, 0.0],
            ],
        )
        .unwrap()
    }
}

#[cfg(test)]
mod tests {
    use super::fixtures::sextic_pair;
    use super::*;
    use crate::hyperbolic::check_hyperbolic_default;
    use crate::ternary::fixtures::sextic;
    use proptest::prelude::*;
    use rand::Rng;

    fn re(x: f64) -> C64 {
        C64::new(x, 0.0)
    }

    fn pt(t: f64, x: f64, y: f64) -> Point3 {
        [re(t), re(x), re(y)]
    }

    fn rng(seed: u64) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(seed)
    }

    #[test]
    fn coordinate_layout() {
        let z = sextic_pair();
        assert_eq!(z.dim(), 27);
        assert_eq!(z.coords().len(), 27);
        assert_eq!(z.r(4, 1), re(1.0));
        assert_eq!(z.r(0, 4), re(2.0));
        let back = SymPair::from_coords(6, &z.coords()).unwrap();
        assert_eq!(back, z);
        assert!(z.r_matrix().is_symmetric());
    }

    #[test]
    fn rejects_asymmetric_r() {
        let r = SymPair::from_real(&[0.0, 1.0], &[vec![0.0, 1.0], vec![2.0, 0.0]]);
        assert!(matches!(r, Err(Error::Format(_))));
    }

    #[test]
    fn pencil_examples() {
        let z = sextic_pair();
        assert_eq!(pencil_at(&z, pt(1.0, 0.0, 0.0)), CMatrix::identity(6));
        let dm = pencil_at(&z, pt(0.0, 1.0, 0.0));
        for j in 0..6 {
            for k in 0..6 {
                let expect = if j == k { z.diag()[j] } else { ZERO };
                assert_eq!(dm[(j, k)], expect);
            }
        }
        assert_eq!(pencil_at(&z, pt(0.0, 0.0, 1.0)), z.r_matrix());
    }

    #[test]
    fn eval_examples() {
        let z = sextic_pair();
        assert!((phi_eval(&z, pt(1.0, 0.0, 0.0)) - re(1.0)).norm() < 1e-14);
        // prod (1 - d_i) contains the factor (1 - 1)
        assert!(phi_eval(&z, pt(1.0, -1.0, 0.0)).norm() < 1e-12);
        let p = sextic();
        let mut r = rng(1);
        for _ in 0..20 {
            let q: Point3 = [0, 1, 2].map(|_| C64::new(r.random_range(-1.0..1.0), r.random_range(-1.0..1.0)));
            let (a, b) = (phi_eval(&z, q), p.evaluate(q));
            assert!((a - b).norm() <= 1e-9 * b.norm().max(1.0), "{a} vs {b}");
        }
    }

    #[test]
    fn grad_small_cases() {
        let z = sextic_pair();
        let (v, g) = phi_eval_grad(&z, pt(1.0, 0.0, 0.0));
        assert!((v - re(1.0)).norm() < 1e-14);
        assert!(g.iter().all(|c| c.norm() == 0.0));

        let z = SymPair::from_real(&[0.7], &[vec![-0.3]]).unwrap();
        let p = [C64::new(0.2, 0.1), re(1.5), C64::new(-0.4, 2.0)];
        let (v, g) = phi_eval_grad(&z, p);
        assert!((v - (p[0] + 0.7 * p[1] - 0.3 * p[2])).norm() < 1e-14);
        assert!((g[0] - p[1]).norm() < 1e-14 && (g[1] - p[2]).norm() < 1e-14);
    }

    #[test]
    fn grad_at_singular_pencil_uses_cofactors() {
        // pt (1, -1, 0) makes the pencil singular for the sextic pair
        let z = sextic_pair();
        let p = pt(1.0, -1.0, 0.0);
        let (_, g) = phi_eval_grad(&z, p);
        let h = 1e-6;
        for i in 0..z.dim() {
            let mut a = z.coords();
            let mut b = z.coords();
            a[i] += h;
            b[i] -= h;
            let fd = (phi_eval(&SymPair::from_coords(6, &a).unwrap(), p)
                - phi_eval(&SymPair::from_coords(6, &b).unwrap(), p))
                / (2.0 * h);
            assert!((fd - g[i]).norm() <= 1e-6 * g[i].norm().max(1.0), "coord {i}: {fd} vs {}", g[i]);
        }
    }

    #[test]
    fn coeffs_examples() {
        let zero = phi_coeffs(&SymPair::zeros(4)).unwrap();
        assert!(zero.coeff_distance(&TernaryForm::t_power(4)).unwrap() < 1e-12);
        // diagonal pencil: prod (t + d_i x)
        let dvals = [0.5, -1.25, 2.0];
        let z = SymPair::from_real(&dvals, &vec![vec![0.0; 3]; 3]).unwrap();
        let mut prod = TernaryForm::t_power(0);
        for dv in dvals {
            prod = prod.mul_linear(re(1.0), re(dv), ZERO);
        }
        assert!(phi_coeffs(&z).unwrap().coeff_distance(&prod).unwrap() < 1e-12);
        let got = phi_coeffs(&sextic_pair()).unwrap();
        let dist = got.coeff_distance(&sextic()).unwrap();
        assert!(dist < 1e-9, "sextic recovered to {dist:e}");
    }

    #[test]
    fn d_candidates() {
        let got = extract_d_candidates(&sextic()).unwrap();
        for (a, b) in got.iter().zip([-3.0, -2.0, -1.0, 1.0, 2.0, 3.0]) {
            assert!((a - b).abs() < 1e-8);
        }
        let f = TernaryForm::from_real_terms(2, &[([2, 0, 0], 1.0), ([0, 2, 0], -1.0)]).unwrap();
        assert_eq!(extract_d_candidates(&f).unwrap(), vec![-1.0, 1.0]);
        let g = TernaryForm::from_real_terms(2, &[([2, 0, 0], 1.0), ([0, 2, 0], 1.0)]).unwrap();
        assert!(matches!(extract_d_candidates(&g), Err(Error::NonRealRoots(_))));
        let mut r = rng(7);
        for d in 1..6 {
            let z = SymPair::random_real(d, &mut r);
            let mut dv = z.diag_re();
            dv.sort_by(f64::total_cmp);
            let got = extract_d_candidates(&phi_coeffs(&z).unwrap()).unwrap();
            for (a, b) in got.iter().zip(&dv) {
                assert!((a - b).abs() < 1e-8, "{got:?} vs {dv:?}");
            }
        }
    }

    #[test]
    fn fiber_counts() {
        let (c, r) = fiber_cardinality(2);
        assert_eq!((c, r), (BigUint::from(4u8), BigUint::from(4u8)));
        let (c, r) = fiber_cardinality(3);
        assert_eq!((c, r), (BigUint::from(72u8), BigUint::from(48u8)));
        let (c, r) = fiber_cardinality(6);
        assert_eq!(c, BigUint::from(512u64 * 1025 * 32 * 720));
        assert_eq!(r, BigUint::from(1024u64 * 32 * 720));
        assert_eq!(fiber_cardinality(1), (BigUint::from(1u8), BigUint::from(1u8)));
    }

    #[test]
    fn sign_and_permutation_invariance() {
        let mut r = rng(11);
        for d in 2..6 {
            let z = SymPair::random_real(d, &mut r);
            let base = phi_coeffs(&z).unwrap();
            let signs: Vec<f64> = (0..d).map(|_| if r.random_bool(0.5) { 1.0 } else { -1.0 }).collect();
            let mut flipped = z.clone();
            for j in 0..d {
                for k in j..d {
                    flipped.set_r(j, k, z.r(j, k) * signs[j] * signs[k]);
                }
            }
            let perm: Vec<usize> = (0..d).rev().collect();
            let permuted = SymPair::new(
                perm.iter().map(|&i| z.diag()[i]).collect(),
                &perm.iter().map(|&j| perm.iter().map(|&k| z.r(j, k)).collect()).collect::<Vec<_>>(),
            )
            .unwrap();
            let scale = base.max_abs_coeff();
            assert!(phi_coeffs(&flipped).unwrap().coeff_distance(&base).unwrap() <= 1e-12 * scale);
            assert!(phi_coeffs(&permuted).unwrap().coeff_distance(&base).unwrap() <= 1e-12 * scale);
        }
    }

    #[test]
    fn real_pairs_map_into_hyperbolic_cone() {
        let mut r = rng(3);
        for d in 1..7 {
            for _ in 0..5 {
                let p = phi_coeffs(&SymPair::random_real(d, &mut r)).unwrap();
                assert!(check_hyperbolic_default(&p).unwrap().is_hyperbolic);
            }
        }
    }

    fn arb_pair() -> impl Strategy<Value = (SymPair, Point3)> {
        (1usize..9, any::<u64>()).prop_map(|(d, seed)| {
            let mut r = rng(seed);
            let coords: Vec<C64> = (0..pair_dim(d))
                .map(|_| C64::new(r.random_range(-1.0..1.0), r.random_range(-0.5..0.5)))
                .collect();
            let p = [0, 1, 2].map(|_| C64::from_polar(1.0, r.random_range(0.0..6.3)));
            (SymPair::from_coords(d, &coords).unwrap(), p)
        })
    }

    proptest! {
        #[test]
        fn gradient_matches_finite_differences((z, p) in arb_pair()) {
            let (_, g) = phi_eval_grad(&z, p);
            let h = 1e-6;
            for i in 0..z.dim() {
                let mut a = z.coords();
                let mut b = z.coords();
                a[i] += h;
                b[i] -= h;
                let fd = (phi_eval(&SymPair::from_coords(z.order(), &a).unwrap(), p)
                    - phi_eval(&SymPair::from_coords(z.order(), &b).unwrap(), p)) / (2.0 * h);
                prop_assert!((fd - g[i]).norm() <= 1e-6 * g[i].norm().max(1.0));
            }
        }

        #[test]
        fn coeffs_agree_with_point_values((z, p) in arb_pair()) {
            let f = phi_coeffs(&z).unwrap();
            let (a, b) = (f.evaluate(p), phi_eval(&z, p));
            prop_assert!((a - b).norm() <= 1e-9 * b.norm().max(1.0));
        }
    }
}
