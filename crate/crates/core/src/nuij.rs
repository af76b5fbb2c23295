//! Nuij operators and the one-parameter families `N_s(p)` joining a fixed
//! strictly hyperbolic endpoint (`s = 0`) to `p` (`s = 1`).
//!
//! For a real linear form `l` in `(x, y)` and real `s >= 0` the operator
//! `T^l_s : f -> f + s l df/dt` preserves hyperbolicity, and `G_s` rescales
//! `(x, y)`. The original path composes `d` copies of `T^x` and `T^y`
//! each, the randomized one a product of `e = max(d, 2)` operators `T^{l_i}`
//! with random `l_i`:
//!
//! ```text
//! N_s = F_{1-s} G_s,   F_s = (T^x_s)^d (T^y_s)^d   or   F_s = T^{l_1}_s ... T^{l_e}_s
//! ```
//!
//! A family is stored as one polynomial in `s` per monomial coefficient,
//! recovered exactly (a discrete Fourier transform) from `2d + 1` samples on
//! the circle `|s - 1/2| = 1`. That disk contains `[0, 1]` and every detour
//! segment `[0, c] u [c, 1]` with `|c - 1/2| <= 1`, and evaluation inside it
//! cannot amplify the sampling error.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hyperbolic::check_hyperbolic_default;
use crate::linalg::C64;
use crate::ternary::TernaryForm;

const ZERO: C64 = C64::new(0.0, 0.0);
const ONE: C64 = C64::new(1.0, 0.0);

/// Linear forms `l_i = a_i x + b_i y` with real coefficients.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearFormSet {
    forms: Vec<[f64; 2]>,
}

impl LinearFormSet {
    pub fn new(forms: Vec<[f64; 2]>) -> Result<Self> {
        if forms.is_empty() {
            return Err(Error::InvalidLinearForms("empty set".into()));
        }
        if let Some(f) = forms.iter().find(|[a, b]| *a == 0.0 && *b == 0.0) {
            return Err(Error::InvalidLinearForms(format!("zero form {f:?}")));
        }
        if forms.iter().flatten().any(|c| !c.is_finite()) {
            return Err(Error::InvalidLinearForms("non-finite coefficient".into()));
        }
        Ok(Self { forms })
    }

    /// `e = max(d, 2)` forms with coefficients uniform in `[-1, 1]`, rejecting
    /// forms with `|a| + |b| < 0.1`.
    pub fn random<R: Rng + ?Sized>(degree: usize, rng: &mut R) -> Self {
        let e = degree.max(2);
        let forms = (0..e)
            .map(|_| loop {
                let f: [f64; 2] = [rng.random_range(-1.0..=1.0), rng.random_range(-1.0..=1.0)];
                if f[0].abs() + f[1].abs() >= 0.1 {
                    break f;
                }
            })
            .collect();
        Self { forms }
    }

    pub fn forms(&self) -> &[[f64; 2]] {
        &self.forms
    }

    pub fn len(&self) -> usize {
        self.forms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.forms.is_empty()
    }

    /// Checks the size requirement `e >= max(d, 2)` for use at degree `d`.
    pub fn validate_for_degree(&self, degree: usize) -> Result<()> {
        if self.forms.len() < degree.max(2) {
            return Err(Error::InvalidLinearForms(format!(
                "{} forms given, degree {} needs at least {}",
                self.forms.len(),
                degree,
                degree.max(2)
            )));
        }
        Ok(())
    }

    /// Stable 64-bit FNV-1a digest of the coefficient bits.
    pub fn digest(&self) -> u64 {
        crate::fnv1a(self.forms.iter().flatten().flat_map(|c| c.to_bits().to_le_bytes()))
    }
}

/// Which family of operators makes up `F_s`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum PathKind {
    Original,
    Randomized(LinearFormSet),
}

impl PathKind {
    pub fn name(&self) -> &'static str {
        match self {
            PathKind::Original => "original",
            PathKind::Randomized(_) => "randomized",
        }
    }

    /// Digest of the operator data; 0 for the original path.
    pub fn digest(&self) -> u64 {
        match self {
            PathKind::Original => 0,
            PathKind::Randomized(l) => l.digest(),
        }
    }

    /// Randomized kind for degree `d` whose fixed endpoint passes the strict
    /// hyperbolicity certificate, resampling the forms up to 10 times.
    pub fn random_randomized<R: Rng + ?Sized>(degree: usize, rng: &mut R) -> Result<Self> {
        for _ in 0..10 {
            let kind = PathKind::Randomized(LinearFormSet::random(degree, rng));
            match fixed_endpoint(degree, &kind) {
                Ok(_) => return Ok(kind),
                Err(Error::EndpointNotStrict(_)) => continue,
                Err(e) => return Err(e),
            }
        }
        Err(Error::EndpointNotStrict(degree))
    }
}

/// `f + s l df/dt` with `l = a x + b y`.
pub fn apply_t(f: &TernaryForm, l: [f64; 2], s: C64) -> TernaryForm {
    if f.degree() == 0 {
        return f.clone();
    }
    let lf = f.diff_t(1).mul_linear(ZERO, C64::new(l[0], 0.0), C64::new(l[1], 0.0));
    f.add_scaled(&lf, s)
}

/// `f(t, s x, s y)`.
pub fn apply_g(f: &TernaryForm, s: C64) -> TernaryForm {
    let mut g = f.clone();
    let mut off = 0;
    let mut sa = ONE;
    for a in 0..=f.degree() {
        for c in &mut g.coeffs_mut()[off..=off + a] {
            *c *= sa;
        }
        off += a + 1;
        sa *= s;
    }
    g
}

/// `F_s(f)` as a composition of `T` operators, rightmost applied first.
pub fn apply_f(f: &TernaryForm, s: C64, kind: &PathKind) -> TernaryForm {
    let mut g = f.clone();
    match kind {
        PathKind::Original => {
            let d = f.degree();
            for _ in 0..d {
                g = apply_t(&g, [0.0, 1.0], s);
            }
            for _ in 0..d {
                g = apply_t(&g, [1.0, 0.0], s);
            }
        }
        PathKind::Randomized(l) => {
            for &form in l.forms().iter().rev() {
                g = apply_t(&g, form, s);
            }
        }
    }
    g
}

/// Elementary symmetric polynomials `sigma_0..=sigma_e` of the forms, each a
/// binary form of degree `k` (stored as a ternary form free of `t`).
pub fn elementary_symmetric(l: &LinearFormSet) -> Vec<TernaryForm> {
    let mut sig = vec![TernaryForm::t_power(0)];
    for &[a, b] in l.forms() {
        let (a, b) = (C64::new(a, 0.0), C64::new(b, 0.0));
        let mut next = Vec::with_capacity(sig.len() + 1);
        for k in 0..=sig.len() {
            let mut term = if k < sig.len() {
                sig[k].clone()
            } else {
                TernaryForm::zero(k)
            };
            if k > 0 {
                term = term.add_scaled(&sig[k - 1].mul_linear(ZERO, a, b), ONE);
            }
            next.push(term);
        }
        sig = next;
    }
    sig
}

/// Closed expansion `sum_k s^k sigma_k(l) d^k f/dt^k` of the randomized `F_s`.
pub fn expand_f_randomized(f: &TernaryForm, s: C64, l: &LinearFormSet) -> TernaryForm {
    let d = f.degree();
    let sig = elementary_symmetric(l);
    let mut out = f.clone();
    let mut sk = ONE;
    for (k, sigma) in sig.iter().enumerate().skip(1).take(d) {
        sk *= s;
        out = out.add_scaled(&sigma.mul(&f.diff_t(k)), sk);
    }
    out
}

/// `N_s(f) = F_{1-s} G_s f`, computed directly from the operators.
pub fn nuij_direct(f: &TernaryForm, s: C64, kind: &PathKind) -> TernaryForm {
    apply_f(&apply_g(f, s), ONE - s, kind)
}

/// The common endpoint `N_0(p) = F_1(t^d)`, certified strictly hyperbolic.
pub fn fixed_endpoint(degree: usize, kind: &PathKind) -> Result<TernaryForm> {
    if let PathKind::Randomized(l) = kind {
        l.validate_for_degree(degree)?;
    }
    let f = apply_f(&TernaryForm::t_power(degree), ONE, kind);
    let report = check_hyperbolic_default(&f)?;
    if !report.is_strict {
        return Err(Error::EndpointNotStrict(degree));
    }
    Ok(f)
}

/// Centre and radius of the sampling circle in the `s`-plane.
const CENTRE: f64 = 0.5;
const RADIUS: f64 = 1.0;

/// The family `s -> N_s(p)` with each coefficient held as a polynomial in
/// `w = s - 1/2`.
#[derive(Debug, Clone)]
pub struct NuijFamily {
    base: TernaryForm,
    kind: PathKind,
    /// `poly[m][k]`: coefficient of `w^k` for monomial m.
    poly: Vec<Vec<C64>>,
    /// Same for the `s`-derivative.
    poly_ds: Vec<Vec<C64>>,
}

impl NuijFamily {
    pub fn new(base: TernaryForm, kind: PathKind) -> Result<Self> {
        let d = base.degree();
        if let PathKind::Randomized(l) = &kind {
            l.validate_for_degree(d)?;
        }
        let n = 2 * d + 1;
        let roots: Vec<C64> = (0..n)
            .map(|j| C64::from_polar(1.0, std::f64::consts::TAU * j as f64 / n as f64))
            .collect();
        let samples: Vec<TernaryForm> = roots
            .iter()
            .map(|&w| nuij_direct(&base, C64::new(CENTRE, 0.0) + RADIUS * w, &kind))
            .collect();
        let real = base.is_real();
        let poly: Vec<Vec<C64>> = (0..base.coeffs().len())
            .map(|m| {
                let mut rk = 1.0;
                (0..n)
                    .map(|k| {
                        let sum: C64 = samples
                            .iter()
                            .enumerate()
                            .map(|(j, f)| f.coeffs()[m] * roots[(j * k) % n].conj())
                            .sum();
                        let mut a = sum / (n as f64 * rk);
                        rk *= RADIUS;
                        if real {
                            // real base: the coefficient polynomials are real
                            a.im = 0.0;
                        }
                        a
                    })
                    .collect()
            })
            .collect();
        let poly_ds = poly
            .iter()
            .map(|a| (1..a.len()).map(|k| a[k] * k as f64).collect())
            .collect();
        Ok(Self {
            base,
            kind,
            poly,
            poly_ds,
        })
    }

    pub fn base(&self) -> &TernaryForm {
        &self.base
    }

    pub fn kind(&self) -> &PathKind {
        &self.kind
    }

    pub fn degree(&self) -> usize {
        self.base.degree()
    }

    /// `N_s(p)`, by applying the operators. The interpolant agrees to
    /// rounding but is not exact at `s = 1`.
    pub fn at(&self, s: C64) -> TernaryForm {
        nuij_direct(&self.base, s, &self.kind)
    }

    /// `N_s(p)` from the stored coefficient polynomials.
    pub fn interpolated(&self, s: C64) -> TernaryForm {
        self.eval(&self.poly, s)
    }

    /// `d N_s(p) / ds`, coefficient-wise.
    pub fn s_derivative(&self, s: C64) -> TernaryForm {
        self.eval(&self.poly_ds, s)
    }

    fn eval(&self, polys: &[Vec<C64>], s: C64) -> TernaryForm {
        let w = s - CENTRE;
        let coeffs = polys
            .iter()
            .map(|a| a.iter().rev().fold(ZERO, |acc, &c| acc * w + c))
            .collect();
        TernaryForm::from_coeffs(self.degree(), coeffs).expect("coefficient count is fixed by degree")
    }

    /// Largest `k` such that some coefficient polynomial has a `w^k` term of
    /// size (on the sampling circle) above `1e-10` times the largest term.
    /// Degree does not depend on the expansion point.
    pub fn s_degree_profile(&self) -> usize {
        let sized = |k: usize, c: &C64| c.norm() * RADIUS.powi(k as i32);
        let scale = self
            .poly
            .iter()
            .flat_map(|a| a.iter().enumerate().map(|(k, c)| sized(k, c)))
            .fold(0.0f64, f64::max);
        self.poly
            .iter()
            .filter_map(|a| a.iter().enumerate().rposition(|(k, c)| sized(k, c) > 1e-10 * scale))
            .max()
            .unwrap_or(0)
    }
}
