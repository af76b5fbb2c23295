//! Roots of univariate polynomials via companion-matrix eigenvalues.

use nalgebra::{DMatrix, Schur};

use crate::error::{Error, Result};
use crate::linalg::C64;

/// Evaluates a polynomial given highest-degree coefficient first.
pub fn horner(coeffs: &[C64], z: C64) -> C64 {
    coeffs.iter().fold(C64::new(0.0, 0.0), |acc, &c| acc * z + c)
}

fn horner_with_derivative(coeffs: &[C64], z: C64) -> (C64, C64) {
    let mut p = C64::new(0.0, 0.0);
    let mut dp = C64::new(0.0, 0.0);
    for &c in coeffs {
        dp = dp * z + p;
        p = p * z + c;
    }
    (p, dp)
}

/// Parlett-Reinsch balancing with power-of-two scalings.
fn balance(m: &mut DMatrix<C64>) {
    let n = m.nrows();
    let radix = 2.0f64;
    let mut converged = false;
    while !converged {
        converged = true;
        for i in 0..n {
            let mut c = 0.0;
            let mut r = 0.0;
            for j in 0..n {
                if j != i {
                    c += m[(j, i)].l1_norm();
                    r += m[(i, j)].l1_norm();
                }
            }
            if c == 0.0 || r == 0.0 {
                continue;
            }
            let s = c + r;
            let mut f = 1.0;
            let mut g = r / radix;
            while c < g {
                f *= radix;
                c *= radix * radix;
            }
            g = r * radix;
            while c > g {
                f /= radix;
                c /= radix * radix;
            }
            if (c + r) / f < 0.95 * s {
                converged = false;
                for j in 0..n {
                    m[(i, j)] /= f;
                }
                for j in 0..n {
                    m[(j, i)] *= f;
                }
            }
        }
    }
}

/// Aberth-Ehrlich simultaneous iteration on a monic polynomial; used only if
/// the Schur iteration does not converge.
fn aberth(monic: &[C64]) -> Vec<C64> {
    let n = monic.len() - 1;
    let radius = 1.0 + monic[1..].iter().fold(0.0f64, |m, c| m.max(c.norm()));
    let mut z: Vec<C64> = (0..n)
        .map(|k| C64::from_polar(radius * 0.5, 0.4 + 2.0 * std::f64::consts::PI * k as f64 / n as f64))
        .collect();
    for _ in 0..500 {
        let mut moved = 0.0f64;
        for k in 0..n {
            let (p, dp) = horner_with_derivative(monic, z[k]);
            if p.norm() == 0.0 {
                continue;
            }
            let ratio = p / dp;
            let sum: C64 = (0..n).filter(|&j| j != k).map(|j| (z[k] - z[j]).inv()).sum();
            let w = ratio / (C64::new(1.0, 0.0) - ratio * sum);
            z[k] -= w;
            moved = moved.max(w.norm() / (1.0 + z[k].norm()));
        }
        if moved < 1e-15 {
            break;
        }
    }
    z
}

/// All complex roots of `coeffs[0] t^n + ... + coeffs[n]`.
///
/// Roots are the eigenvalues of the balanced companion matrix, refined by at
/// most two Newton steps on the original polynomial (a step is kept only if it
/// lowers the residual).
pub fn univariate_roots(coeffs: &[C64]) -> Result<Vec<C64>> {
    let lead = *coeffs.first().ok_or(Error::DegenerateLeadingCoefficient)?;
    if lead.norm() == 0.0 {
        return Err(Error::DegenerateLeadingCoefficient);
    }
    let n = coeffs.len() - 1;
    if n == 0 {
        return Ok(Vec::new());
    }
    let monic: Vec<C64> = coeffs.iter().map(|c| c / lead).collect();
    if n == 1 {
        return Ok(vec![-monic[1]]);
    }
    let mut comp = DMatrix::<C64>::zeros(n, n);
    for j in 0..n {
        comp[(0, j)] = -monic[j + 1];
    }
    for i in 1..n {
        comp[(i, i - 1)] = C64::new(1.0, 0.0);
    }
    balance(&mut comp);
    let mut roots = Schur::try_new(comp, f64::EPSILON, 10_000)
        .and_then(|s| s.eigenvalues())
        .map(|v| v.iter().copied().collect::<Vec<_>>())
        .unwrap_or_else(|| aberth(&monic));

    for r in roots.iter_mut() {
        for _ in 0..2 {
            let (p, dp) = horner_with_derivative(&monic, *r);
            if dp.norm() == 0.0 || p.norm() == 0.0 {
                break;
            }
            let cand = *r - p / dp;
            if horner(&monic, cand).norm() < p.norm() {
                *r = cand;
            } else {
                break;
            }
        }
    }
    Ok(roots)
}
