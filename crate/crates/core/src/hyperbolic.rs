//! Sampled numerical certificate of (strict) hyperbolicity.
//!
//! A real form `f` with `f(1, 0, 0) = 1` is hyperbolic when `f(t, u, v)` is
//! real-rooted in `t` for every real direction `(u, v)`, and strictly
//! hyperbolic when those roots are also distinct for `(u, v) != 0`. Both
//! properties are homogeneous in `(u, v)` and invariant under `(u, v) -> -(u, v)`,
//! so directions on a half circle suffice. This is a sampled check, not a
//! proof: a failure is conclusive, a pass is evidence.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::C64;
use crate::roots::univariate_roots;
use crate::ternary::TernaryForm;

pub const DEFAULT_TOL: f64 = 1e-7;
pub const DEFAULT_DIRECTIONS: usize = 64;

const DIRECTION_SEED: u64 = 0x4879_7065_7262;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HyperbolicityReport {
    pub is_hyperbolic: bool,
    pub is_strict: bool,
    /// Largest `|Im r| / (1 + |r|)` over all sampled roots.
    pub max_imag: f64,
    /// Smallest pairwise root distance over all sampled directions.
    pub min_gap: f64,
    /// Direction attaining the worst value (imaginary part if not
    /// hyperbolic, gap otherwise).
    pub witness_direction: (f64, f64),
}

/// Samples `n_dirs` evenly spaced directions on the upper half circle plus
/// `n_dirs` pseudo-random ones (fixed seed) and inspects the roots in `t`.
pub fn check_hyperbolic(f: &TernaryForm, n_dirs: usize, tol: f64) -> Result<HyperbolicityReport> {
    if !f.is_real() {
        return Err(Error::NotReal(f.max_imag()));
    }
    if f.leading().norm() == 0.0 {
        return Err(Error::LeadingCoefficientZero);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(DIRECTION_SEED);
    let angles = (0..n_dirs)
        .map(|k| std::f64::consts::PI * k as f64 / n_dirs.max(1) as f64)
        .chain((0..n_dirs).map(|_| rng.random_range(0.0..std::f64::consts::PI)))
        .collect::<Vec<_>>();

    let mut max_imag = 0.0f64;
    let mut imag_witness = (1.0, 0.0);
    let mut min_gap = f64::INFINITY;
    let mut gap_witness = (1.0, 0.0);
    for theta in angles {
        let (u, v) = (theta.cos(), theta.sin());
        let roots = univariate_roots(&f.restrict_direction(u, v)?)?;
        for r in &settled_roots(&roots) {
            let im = r.im.abs() / (1.0 + r.norm());
            if im > max_imag {
                max_imag = im;
                imag_witness = (u, v);
            }
        }
        for (a, ra) in roots.iter().enumerate() {
            for rb in &roots[a + 1..] {
                let gap = (ra - rb).norm();
                if gap < min_gap {
                    min_gap = gap;
                    gap_witness = (u, v);
                }
            }
        }
    }
    if !min_gap.is_finite() {
        // degree <= 1: a single root has no neighbour
        min_gap = f64::MAX;
    }
    let is_hyperbolic = max_imag < tol;
    let is_strict = is_hyperbolic && min_gap > tol;
    Ok(HyperbolicityReport {
        is_hyperbolic,
        is_strict,
        max_imag,
        min_gap,
        witness_direction: if is_hyperbolic { gap_witness } else { imag_witness },
    })
}

/// Replaces each tight cluster that contains non-real roots by copies of its
/// centroid. Rounding splits a `k`-fold root into a ring of radius about
/// `eps^(1/k)`, whereas the centroid stays within `O(eps)` of the true root.
fn settled_roots(roots: &[C64]) -> Vec<C64> {
    let n = roots.len();
    let link = 1e-3 * (1.0 + roots.iter().fold(0.0f64, |m, r| m.max(r.norm())));
    let mut label: Vec<usize> = (0..n).collect();
    // single-linkage clustering; n <= ~10 so the quadratic sweep is fine
    let mut changed = true;
    while changed {
        changed = false;
        for a in 0..n {
            for b in 0..n {
                if label[b] < label[a] && (roots[a] - roots[b]).norm() < link {
                    label[a] = label[b];
                    changed = true;
                }
            }
        }
    }
    let mut out = roots.to_vec();
    for l in 0..n {
        let members: Vec<usize> = (0..n).filter(|&i| label[i] == l).collect();
        let k = members.len();
        if k < 2 || members.iter().all(|&i| roots[i].im == 0.0) {
            continue;
        }
        let centroid = members.iter().map(|&i| roots[i]).sum::<C64>() / k as f64;
        let diameter = members
            .iter()
            .flat_map(|&a| members.iter().map(move |&b| (roots[a] - roots[b]).norm()))
            .fold(0.0f64, f64::max);
        let ring = 40.0 * f64::EPSILON.powf(1.0 / k as f64) * (1.0 + centroid.norm());
        if diameter <= ring {
            for &i in &members {
                out[i] = centroid;
            }
        }
    }
    out
}

/// [`check_hyperbolic`] with the default direction count and tolerance.
pub fn check_hyperbolic_default(f: &TernaryForm) -> Result<HyperbolicityReport> {
    check_hyperbolic(f, DEFAULT_DIRECTIONS, DEFAULT_TOL)
}
