//! Closed-form ground truth for conics, for checking the tracker.

use serde::Serialize;

use crate::detmap::{phi_coeffs, SymPair};
use crate::error::{Error, Result};
use crate::roots::univariate_roots;
use crate::ternary::TernaryForm;

/// All real pairs `(D, R)` of order two over one conic.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConicSolutionSet {
    #[serde(serialize_with = "as_pair_json")]
    pub solutions: Vec<SymPair>,
}

fn as_pair_json<S: serde::Serializer>(v: &[SymPair], s: S) -> std::result::Result<S::Ok, S::Error> {
    use serde::ser::SerializeSeq;
    let mut seq = s.serialize_seq(Some(v.len()))?;
    for z in v {
        seq.serialize_element(&crate::io::PairJson::from(z))?;
    }
    seq.end()
}

/// Solves `det(t I + x Diag(d1, d2) + y R) = p` by hand.
///
/// Expanding, `p = (t + d1 x + r11 y)(t + d2 x + r22 y) - r12^2 y^2`, so the
/// `d_i` are the roots of `p(t, -1, 0)`, the `ty` and `xy` coefficients give
/// `r11 + r22` and `d2 r11 + d1 r22`, and the `y^2` coefficient fixes `r12^2`.
/// Two orders of `D` times two signs of `r12` give four solutions.
pub fn solve_conic(p: &TernaryForm) -> Result<ConicSolutionSet> {
    if p.degree() != 2 {
        return Err(Error::DegreeMismatch(p.degree(), 2));
    }
    if !p.is_real() {
        return Err(Error::NotReal(p.max_imag()));
    }
    let p = p.real_part().normalized()?;
    let roots = univariate_roots(&p.restrict_direction(-1.0, 0.0)?)?;
    if roots.iter().any(|r| r.im.abs() > 1e-9) {
        return Err(Error::InternalInconsistency(format!("non-real diagonal {roots:?}")));
    }
    let (a, b) = (roots[0].re, roots[1].re);
    if (a - b).abs() < 1e-9 {
        return Err(Error::RepeatedD);
    }
    let c = |i, j, k| p.coeff(i, j, k).re;
    let (ty, xy, yy) = (c(1, 0, 1), c(0, 1, 1), c(0, 0, 2));
    let scale = p.max_abs_coeff().max(1.0);
    let mut solutions = Vec::with_capacity(4);
    for (d1, d2) in [(a, b), (b, a)] {
        let r11 = (xy - d1 * ty) / (d2 - d1);
        let r22 = ty - r11;
        let mut sq = r11 * r22 - yy;
        if sq < 0.0 {
            if sq < -1e-12 * scale * scale {
                return Err(Error::InternalInconsistency(format!("r12^2 = {sq:e} < 0")));
            }
            sq = 0.0;
        }
        for sign in [1.0, -1.0] {
            let r12 = sign * sq.sqrt();
            solutions.push(SymPair::from_real(&[d1, d2], &[vec![r11, r12], vec![r12, r22]])?);
        }
    }
    Ok(ConicSolutionSet { solutions })
}

/// Whether `z` lies in the fibre over `p`: coefficient distance `< 1e-8`.
pub fn brute_coeff_match(p: &TernaryForm, z: &SymPair) -> bool {
    phi_coeffs(z)
        .and_then(|f| f.coeff_distance(p))
        .is_ok_and(|dist| dist < 1e-8)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::detmap::fixtures::sextic_pair;
    use crate::hyperbolic::check_hyperbolic_default;
    use crate::linalg::C64;
    use crate::pipeline::canonicalize;
    use crate::ternary::fixtures::sextic;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn circle() {
        let p = TernaryForm::from_real_terms(2, &[([2, 0, 0], 1.0), ([0, 2, 0], -1.0), ([0, 0, 2], -1.0)]).unwrap();
        let set = solve_conic(&p).unwrap();
        assert_eq!(set.solutions.len(), 4);
        for z in &set.solutions {
            assert!(brute_coeff_match(&p, z));
            assert!(z.r(0, 0).norm() < 1e-15 && z.r(1, 1).norm() < 1e-15);
            assert!((z.r(0, 1).norm() - 1.0).abs() < 1e-15);
        }
        let hit = set
            .solutions
            .iter()
            .any(|z| z.diag_re() == [-1.0, 1.0] && z.r(0, 1) == C64::new(1.0, 0.0));
        assert!(hit);
    }

    #[test]
    fn random_conics_have_four_real_solutions() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..50 {
            let z = SymPair::random_real(2, &mut rng);
            let p = phi_coeffs(&z).unwrap();
            if !check_hyperbolic_default(&p).unwrap().is_strict {
                continue;
            }
            let set = solve_conic(&p).unwrap();
            assert_eq!(set.solutions.len(), 4);
            for s in &set.solutions {
                assert!(s.max_imag() == 0.0);
                assert!(phi_coeffs(s).unwrap().coeff_distance(&p).unwrap() < 1e-10);
            }
            let (cz, _) = canonicalize(&z).unwrap();
            let found = set.solutions.iter().any(|s| {
                let (cs, _) = canonicalize(s).unwrap();
                cs.coords().iter().zip(cz.coords()).all(|(a, b)| (a - b).norm() < 1e-8)
            });
            assert!(found);
        }
    }

    #[test]
    fn errors() {
        let repeated = TernaryForm::from_real_terms(2, &[([2, 0, 0], 1.0), ([0, 0, 2], -1.0)]).unwrap();
        assert_eq!(solve_conic(&repeated), Err(Error::RepeatedD));
        assert!(matches!(solve_conic(&sextic()), Err(Error::DegreeMismatch(6, 2))));
        // t^2 - x^2 + y^2 is not hyperbolic: r12^2 would be negative
        let bad = TernaryForm::from_real_terms(2, &[([2, 0, 0], 1.0), ([0, 2, 0], -1.0), ([0, 0, 2], 1.0)]).unwrap();
        assert!(matches!(solve_conic(&bad), Err(Error::InternalInconsistency(_))));
    }

    #[test]
    fn membership() {
        assert!(brute_coeff_match(&sextic(), &sextic_pair()));
        assert!(brute_coeff_match(&TernaryForm::t_power(3), &SymPair::zeros(3)));
        let mut off = sextic_pair();
        off.set_r(0, 1, off.r(0, 1) + 0.1);
        assert!(!brute_coeff_match(&sextic(), &off));
    }
}
