//! Dense homogeneous forms in the variables `(t, x, y)`.
//!
//! Coefficients are stored in graded order: first by total `(x, y)`-degree
//! `a = j + k`, then by the exponent of `y`. The monomial `t^i x^j y^k` sits at
//! index `a(a+1)/2 + k`, so `t^d` is always at index 0.

use crate::error::{Error, Result};
use crate::linalg::C64;

/// A point of complex 3-space, ordered `(t, x, y)`.
pub type Point3 = [C64; 3];

const ZERO: C64 = C64::new(0.0, 0.0);
const ONE: C64 = C64::new(1.0, 0.0);

/// Homogeneous polynomial of degree `d` in `(t, x, y)`.
#[derive(Debug, Clone, PartialEq)]
pub struct TernaryForm {
    degree: usize,
    coeffs: Vec<C64>,
}

/// Number of monomials of degree `d` in three variables.
pub fn monomial_count(d: usize) -> usize {
    (d + 1) * (d + 2) / 2
}

/// Storage index of `t^i x^j y^k` in a form of degree `i + j + k`.
pub fn monomial_index(_i: usize, j: usize, k: usize) -> usize {
    let a = j + k;
    a * (a + 1) / 2 + k
}

/// Exponent triples of degree `d` in storage order.
pub fn exponents(d: usize) -> impl Iterator<Item = (usize, usize, usize)> {
    (0..=d).flat_map(move |a| (0..=a).map(move |k| (d - a, a - k, k)))
}

fn powers(z: C64, n: usize) -> Vec<C64> {
    let mut p = Vec::with_capacity(n + 1);
    let mut acc = ONE;
    for _ in 0..=n {
        p.push(acc);
        acc *= z;
    }
    p
}

impl TernaryForm {
    pub fn zero(degree: usize) -> Self {
        Self {
            degree,
            coeffs: vec![ZERO; monomial_count(degree)],
        }
    }

    /// The form `t^d`.
    pub fn t_power(degree: usize) -> Self {
        let mut f = Self::zero(degree);
        f.coeffs[0] = ONE;
        f
    }

    /// Builds a form from a dense coefficient vector in storage order.
    pub fn from_coeffs(degree: usize, coeffs: Vec<C64>) -> Result<Self> {
        if coeffs.len() != monomial_count(degree) {
            return Err(Error::Format(format!(
                "expected {} coefficients for degree {}, got {}",
                monomial_count(degree),
                degree,
                coeffs.len()
            )));
        }
        Ok(Self { degree, coeffs })
    }

    /// Builds a form from `(exponent, coefficient)` terms; repeated exponents add up.
    pub fn from_terms<I>(degree: usize, terms: I) -> Result<Self>
    where
        I: IntoIterator<Item = ([u32; 3], C64)>,
    {
        let mut f = Self::zero(degree);
        for ([i, j, k], c) in terms {
            if (i + j + k) as usize != degree {
                return Err(Error::BadExponent(i, j, k, degree));
            }
            f.coeffs[monomial_index(i as usize, j as usize, k as usize)] += c;
        }
        Ok(f)
    }

    /// Real-coefficient convenience wrapper around [`TernaryForm::from_terms`].
    pub fn from_real_terms(degree: usize, terms: &[([u32; 3], f64)]) -> Result<Self> {
        Self::from_terms(degree, terms.iter().map(|&(e, c)| (e, C64::new(c, 0.0))))
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn coeffs(&self) -> &[C64] {
        &self.coeffs
    }

    pub fn coeffs_mut(&mut self) -> &mut [C64] {
        &mut self.coeffs
    }

    pub fn coeff(&self, i: usize, j: usize, k: usize) -> C64 {
        assert_eq!(i + j + k, self.degree, "exponent does not match degree");
        self.coeffs[monomial_index(i, j, k)]
    }

    pub fn set_coeff(&mut self, i: usize, j: usize, k: usize, c: C64) {
        assert_eq!(i + j + k, self.degree, "exponent does not match degree");
        self.coeffs[monomial_index(i, j, k)] = c;
    }

    /// Coefficient of `t^d`.
    pub fn leading(&self) -> C64 {
        self.coeffs[0]
    }

    /// Iterates `(exponent, coefficient)` pairs in storage order.
    pub fn terms(&self) -> impl Iterator<Item = ((usize, usize, usize), C64)> + '_ {
        exponents(self.degree).zip(self.coeffs.iter().copied())
    }

    /// Divides through by the `t^d` coefficient so that `f(1, 0, 0) = 1`.
    pub fn normalized(&self) -> Result<Self> {
        let lead = self.leading();
        if lead.norm() == 0.0 {
            return Err(Error::LeadingCoefficientZero);
        }
        let mut f = self.scale(lead.inv());
        f.coeffs[0] = ONE;
        Ok(f)
    }

    pub fn max_imag(&self) -> f64 {
        crate::linalg::max_imag(&self.coeffs)
    }

    pub fn is_real(&self) -> bool {
        self.max_imag() < 1e-12
    }

    /// Copy with imaginary parts dropped.
    pub fn real_part(&self) -> Self {
        Self {
            degree: self.degree,
            coeffs: self.coeffs.iter().map(|z| C64::new(z.re, 0.0)).collect(),
        }
    }

    pub fn max_abs_coeff(&self) -> f64 {
        crate::linalg::max_abs(&self.coeffs)
    }

    pub fn evaluate(&self, pt: Point3) -> C64 {
        let d = self.degree;
        let (tp, xp, yp) = (powers(pt[0], d), powers(pt[1], d), powers(pt[2], d));
        self.terms().map(|((i, j, k), c)| c * tp[i] * xp[j] * yp[k]).sum()
    }

    /// Coefficients of `f(t, u, v)` in `t`, highest power first.
    pub fn restrict_direction(&self, u: f64, v: f64) -> Result<Vec<C64>> {
        if u == 0.0 && v == 0.0 {
            return Err(Error::ZeroDirection);
        }
        let d = self.degree;
        let (up, vp) = (powers(C64::new(u, 0.0), d), powers(C64::new(v, 0.0), d));
        let mut out = vec![ZERO; d + 1];
        for ((i, j, k), c) in self.terms() {
            out[d - i] += c * up[j] * vp[k];
        }
        Ok(out)
    }

    /// `(df/dt, df/dx, df/dy)` at `pt`.
    pub fn gradient_at(&self, pt: Point3) -> Point3 {
        let d = self.degree;
        if d == 0 {
            return [ZERO; 3];
        }
        let (tp, xp, yp) = (powers(pt[0], d), powers(pt[1], d), powers(pt[2], d));
        let mut g = [ZERO; 3];
        for ((i, j, k), c) in self.terms() {
            if i > 0 {
                g[0] += c * (i as f64) * tp[i - 1] * xp[j] * yp[k];
            }
            if j > 0 {
                g[1] += c * (j as f64) * tp[i] * xp[j - 1] * yp[k];
            }
            if k > 0 {
                g[2] += c * (k as f64) * tp[i] * xp[j] * yp[k - 1];
            }
        }
        g
    }

    /// `k`-th derivative with respect to `t`, a form of degree `d - k`.
    pub fn diff_t(&self, k: usize) -> Self {
        assert!(k <= self.degree, "derivative order exceeds degree");
        let mut out = Self::zero(self.degree - k);
        for ((i, j, l), c) in self.terms() {
            if i >= k {
                let falling: f64 = (i - k + 1..=i).map(|n| n as f64).product();
                out.coeffs[monomial_index(i - k, j, l)] += c * falling;
            }
        }
        out
    }

    pub fn scale(&self, c: C64) -> Self {
        Self {
            degree: self.degree,
            coeffs: self.coeffs.iter().map(|z| z * c).collect(),
        }
    }

    /// `self + c * other`; degrees must agree.
    pub fn add_scaled(&self, other: &Self, c: C64) -> Self {
        assert_eq!(self.degree, other.degree, "degree mismatch");
        Self {
            degree: self.degree,
            coeffs: self
                .coeffs
                .iter()
                .zip(&other.coeffs)
                .map(|(a, b)| a + c * b)
                .collect(),
        }
    }

    pub fn mul(&self, other: &Self) -> Self {
        let mut out = Self::zero(self.degree + other.degree);
        for ((i, j, k), a) in self.terms() {
            if a == ZERO {
                continue;
            }
            for ((p, q, r), b) in other.terms() {
                out.coeffs[monomial_index(i + p, j + q, k + r)] += a * b;
            }
        }
        out
    }

    /// Product with the linear form `a_t t + a_x x + a_y y`.
    pub fn mul_linear(&self, a_t: C64, a_x: C64, a_y: C64) -> Self {
        let mut out = Self::zero(self.degree + 1);
        for ((i, j, k), c) in self.terms() {
            out.coeffs[monomial_index(i + 1, j, k)] += a_t * c;
            out.coeffs[monomial_index(i, j + 1, k)] += a_x * c;
            out.coeffs[monomial_index(i, j, k + 1)] += a_y * c;
        }
        out
    }

    /// Largest coefficient-wise modulus of `self - other`.
    pub fn coeff_distance(&self, other: &Self) -> Result<f64> {
        if self.degree != other.degree {
            return Err(Error::DegreeMismatch(self.degree, other.degree));
        }
        Ok(self
            .coeffs
            .iter()
            .zip(&other.coeffs)
            .fold(0.0, |m, (a, b)| m.max((a - b).norm())))
    }
}

#[cfg(test)]
pub(crate) mod fixtures {
    use super::*;

    /// The sextic used throughout the tests; equals det(tI + xD + yR) for the
    /// integer pair in [`crate::detmap::fixtures`].
    pub fn sextic() -> TernaryForm {
        TernaryForm::from_real_terms(
            6,
            &[
                ([0, 6, 0], -36.0),
                ([0, 4, 2], -157.0),
                ([0, 3, 3], -20.0),
                ([0, 2, 4], -109.0),
                ([0, 1, 5], 246.0),
                ([0, 0, 6], -92.0),
                ([1, 3, 2], -12.0),
                ([1, 2, 3], 90.0),
                ([1, 1, 4], 10.0),
                ([1, 0, 5], 76.0),
                ([2, 4, 0], 49.0),
                ([2, 2, 2], 156.0),
                ([2, 1, 3], -16.0),
                ([2, 0, 4], 132.0),
                ([3, 1, 2], 12.0),
                ([3, 0, 3], -14.0),
                ([4, 2, 0], -14.0),
                ([4, 0, 2], -27.0),
                ([6, 0, 0], 1.0),
            ],
        )
        .unwrap()
    }

    /// Strictly hyperbolic quartic with two pairs of complex conjugate
    /// singular points at (1 : +-2 : +-i).
    pub fn singular_quartic() -> TernaryForm {
        let c = 1.0 / 19.0;
        TernaryForm::from_real_terms(
            4,
            &[
                ([4, 0, 0], 19.0 * c),
                ([2, 2, 0], -31.0 * c),
                ([2, 0, 2], -86.0 * c),
                ([0, 4, 0], 9.0 * c),
                ([0, 2, 2], 41.0 * c),
                ([0, 0, 4], 39.0 * c),
            ],
        )
        .unwrap()
    }
}
