//! Predictor-corrector tracking of a fibre point of the determinantal map
//! along a Nuij family.
//!
//! The unknowns are the `m = d(d+3)/2` pair coordinates. The equations are
//! `m` point evaluations `h_i = det(pencil at p_i) - N_s(f)(p_i)`; the `t^d`
//! term agrees on both sides, so `m` functionals suffice to pin the rest.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::detmap::{monomial_matrix, phi_eval, phi_eval_grad, SymPair};
use crate::error::{Error, Result};
use crate::linalg::{cond1, norm2, CMatrix, Lu, C64};
use crate::nuij::NuijFamily;
use crate::ternary::Point3;

/// Pivot ratio below which the Newton system counts as singular.
const SINGULAR_PIVOT: f64 = 1e-14;
/// Largest relative Newton step still read as rounding noise once the
/// iteration stops contracting.
const NOISE_FLOOR_CAP: f64 = 1e-6;
/// Distance to the end of the path inside which a singular Jacobian is
/// reported instead of stepped around.
const END_ZONE: f64 = 1e-4;
/// A corrector whose relative residual is this small has converged, however
/// large its last step: at `d >= 9` the Jacobian is too ill-conditioned for
/// steps to settle below the noise floor cap.
const RESIDUAL_FLOOR: f64 = 1e-11;

/// `m` evaluation functionals at random points with unit-modulus coordinates.
#[derive(Debug, Clone, PartialEq)]
pub struct DualBasis {
    d: usize,
    points: Vec<Point3>,
    cond_estimate: f64,
}

impl DualBasis {
    pub fn order(&self) -> usize {
        self.d
    }

    pub fn points(&self) -> &[Point3] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn cond_estimate(&self) -> f64 {
        self.cond_estimate
    }
}

/// Draws a dual basis for degree `d`: the best conditioned of the first
/// eight samples from the stream whose evaluation matrix on the non-`t^d`
/// monomials has condition `< 1e8`, drawing up to twenty samples.
///
/// The Newton Jacobian inherits this condition number almost one for one,
/// so taking the best of several matters from `d = 7` on.
pub fn make_dual_basis(d: usize, seed: u64) -> Result<DualBasis> {
    assert!(d >= 1, "degree must be positive");
    const DRAWS: usize = 20;
    const CANDIDATES: usize = 8;
    let m = d * (d + 3) / 2;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut unit = || C64::from_polar(1.0, rng.random_range(0.0..std::f64::consts::TAU));
    let mut best: Option<DualBasis> = None;
    for draw in 0..DRAWS {
        if draw >= CANDIDATES && best.is_some() {
            break;
        }
        let points: Vec<Point3> = (0..m).map(|_| [unit(), unit(), unit()]).collect();
        let full = monomial_matrix(d, &points);
        let reduced = CMatrix::from_fn(m, m, |i, j| full[(i, j + 1)]);
        let cond = cond1(&reduced);
        if cond < 1e8 && best.as_ref().is_none_or(|b| cond < b.cond_estimate) {
            best = Some(DualBasis {
                d,
                points,
                cond_estimate: cond,
            });
        }
    }
    best.ok_or(Error::BasisConditioningFailed(DRAWS))
}

/// Piecewise-linear path in the `s`-plane.
#[derive(Debug, Clone, PartialEq)]
pub struct SPath {
    waypoints: Vec<C64>,
}

impl SPath {
    /// Consecutive repeats are dropped, so `[a, a]` is the constant path.
    pub fn new(waypoints: Vec<C64>) -> Result<Self> {
        let mut w: Vec<C64> = Vec::with_capacity(waypoints.len());
        for s in waypoints {
            if !(s.re.is_finite() && s.im.is_finite()) {
                return Err(Error::InvalidOptions(format!("non-finite waypoint {s}")));
            }
            if w.last() != Some(&s) {
                w.push(s);
            }
        }
        if w.is_empty() {
            return Err(Error::InvalidOptions("empty path".into()));
        }
        Ok(Self { waypoints: w })
    }

    pub fn real(points: &[f64]) -> Result<Self> {
        Self::new(points.iter().map(|&s| C64::new(s, 0.0)).collect())
    }

    pub fn waypoints(&self) -> &[C64] {
        &self.waypoints
    }

    pub fn start(&self) -> C64 {
        self.waypoints[0]
    }

    pub fn end(&self) -> C64 {
        *self.waypoints.last().expect("path is non-empty")
    }

    pub fn is_real(&self) -> bool {
        self.waypoints.iter().all(|s| s.im == 0.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Predictor {
    Euler,
    Rk4,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrackerSettings {
    pub h_init: f64,
    pub h_min: f64,
    pub newton_tol: f64,
    pub newton_max_iters: usize,
    pub max_steps: usize,
    pub predictor: Predictor,
}

impl Default for TrackerSettings {
    fn default() -> Self {
        Self {
            h_init: 0.05,
            h_min: 1e-8,
            newton_tol: 1e-10,
            newton_max_iters: 3,
            max_steps: 10_000,
            predictor: Predictor::Rk4,
        }
    }
}

impl TrackerSettings {
    pub fn validate(&self) -> Result<()> {
        let ok = self.h_min > 0.0
            && self.h_min < self.h_init
            && self.h_init <= 1.0
            && self.newton_tol > 0.0
            && self.newton_max_iters >= 1
            && self.max_steps >= 1;
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidOptions(format!("bad tracker settings {self:?}")))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum TrackStatus {
    Success,
    MinStepReached,
    MaxStepsReached,
    DivergedCorrector,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrackResult {
    pub status: TrackStatus,
    #[serde(skip)]
    pub endpoint: SymPair,
    /// Parameter value of `endpoint`; the path end on success.
    #[serde(skip)]
    pub s_reached: C64,
    pub steps_taken: usize,
    pub rejected_steps: usize,
    /// Largest relative residual over accepted points.
    pub max_residual_seen: f64,
    /// Largest imaginary part of a coordinate over accepted points.
    pub max_imag_seen: f64,
}

/// `h_i = det(pencil at p_i) - N_s(f)(p_i)`.
pub fn residual(z: &SymPair, s: C64, fam: &NuijFamily, basis: &DualBasis) -> Vec<C64> {
    let target = fam.at(s);
    basis
        .points
        .iter()
        .map(|&pt| phi_eval(z, pt) - target.evaluate(pt))
        .collect()
}

/// Residual norm over the size of the target values, floored at one.
pub fn relative_residual(z: &SymPair, s: C64, fam: &NuijFamily, basis: &DualBasis) -> f64 {
    target_residual(z, &fam.at(s), basis)
}

/// `d h / d z`: row `i` is the pair gradient of the determinant at `p_i`.
pub fn jacobian_z(z: &SymPair, _s: C64, _fam: &NuijFamily, basis: &DualBasis) -> CMatrix {
    residual_and_jacobian(z, None, basis).1
}

fn residual_and_jacobian(
    z: &SymPair,
    target: Option<&crate::ternary::TernaryForm>,
    basis: &DualBasis,
) -> (Vec<C64>, CMatrix) {
    let m = basis.points.len();
    let mut h = Vec::with_capacity(m);
    let mut jac = CMatrix::zeros(m, z.dim());
    for (i, &pt) in basis.points.iter().enumerate() {
        let (v, g) = phi_eval_grad(z, pt);
        h.push(match target {
            Some(f) => v - f.evaluate(pt),
            None => v,
        });
        jac.row_mut(i).copy_from_slice(&g);
    }
    (h, jac)
}

/// `d h / d s = -e_i(d N_s(f) / ds)`.
pub fn partial_s(_z: &SymPair, s: C64, fam: &NuijFamily, basis: &DualBasis) -> Vec<C64> {
    let ds = fam.s_derivative(s);
    basis.points.iter().map(|&pt| -ds.evaluate(pt)).collect()
}

fn shifted(z: &SymPair, dz: &[C64], scale: C64) -> SymPair {
    let coords: Vec<C64> = z.coords().iter().zip(dz).map(|(a, b)| a + b * scale).collect();
    SymPair::from_coords(z.order(), &coords).expect("coordinate count is preserved")
}

/// Plain Newton iteration on `h(., s) = 0`.
///
/// Converged when `|dz| / (1 + |z|) < newton_tol`, or when the steps stop
/// contracting at a size below `1e-6` relative: the Jacobian at `d = 6` can
/// have condition `1e10`, which puts the noise floor of `dz` above any fixed
/// tolerance near `1e-10`. Gives up after `newton_max_iters` steps or on
/// stagnation above that floor.
pub fn newton_correct(
    z: &SymPair,
    s: C64,
    fam: &NuijFamily,
    basis: &DualBasis,
    settings: &TrackerSettings,
) -> Result<(SymPair, bool, usize)> {
    newton_iterate(z, &fam.at(s), basis, settings.newton_tol, settings.newton_max_iters)
}

fn newton_iterate(
    z: &SymPair,
    target: &crate::ternary::TernaryForm,
    basis: &DualBasis,
    tol: f64,
    max_iters: usize,
) -> Result<(SymPair, bool, usize)> {
    let mut cur = z.clone();
    let mut last_step = f64::INFINITY;
    for iter in 1..=max_iters {
        let (h, jac) = residual_and_jacobian(&cur, Some(target), basis);
        let lu = Lu::new(&jac);
        if lu.min_pivot_ratio() < SINGULAR_PIVOT {
            return Err(Error::SingularJacobian(lu.min_pivot_ratio()));
        }
        let dz = lu.solve(&h);
        let step = norm2(&dz);
        cur = shifted(&cur, &dz, C64::new(-1.0, 0.0));
        let rel = step / (1.0 + cur.norm());
        if rel < tol {
            return Ok((cur, true, iter));
        }
        if !rel.is_finite() {
            return Ok((cur, false, iter));
        }
        if step > 0.25 * last_step {
            // no longer contracting: either rounding noise of an
            // ill-conditioned system, or divergence
            let ok = rel < NOISE_FLOOR_CAP || target_residual(&cur, target, basis) < RESIDUAL_FLOOR;
            return Ok((cur, ok, iter));
        }
        last_step = step;
    }
    let ok = target_residual(&cur, target, basis) < RESIDUAL_FLOOR;
    Ok((cur, ok, max_iters))
}

/// Residual norm at the dual points over the largest target value, floored
/// at one.
fn target_residual(z: &SymPair, target: &crate::ternary::TernaryForm, basis: &DualBasis) -> f64 {
    let mut scale = 1.0f64;
    let mut acc = 0.0;
    for &pt in &basis.points {
        let v = target.evaluate(pt);
        scale = scale.max(v.norm());
        acc += (phi_eval(z, pt) - v).norm_sqr();
    }
    acc.sqrt() / scale
}

/// Tangent `dz/ds` times the complex direction `dir` of the current segment.
fn tangent(z: &SymPair, s: C64, dir: C64, fam: &NuijFamily, basis: &DualBasis) -> Result<Vec<C64>> {
    let jac = residual_and_jacobian(z, None, basis).1;
    let lu = Lu::new(&jac);
    if lu.min_pivot_ratio() < SINGULAR_PIVOT {
        return Err(Error::SingularJacobian(lu.min_pivot_ratio()));
    }
    let rhs: Vec<C64> = partial_s(z, s, fam, basis).iter().map(|v| -v * dir).collect();
    Ok(lu.solve(&rhs))
}

fn predict(
    z: &SymPair,
    s: C64,
    dir: C64,
    h: f64,
    fam: &NuijFamily,
    basis: &DualBasis,
    kind: Predictor,
) -> Result<SymPair> {
    let hc = C64::new(h, 0.0);
    let k1 = tangent(z, s, dir, fam, basis)?;
    if kind == Predictor::Euler {
        return Ok(shifted(z, &k1, hc));
    }
    let half = dir * (h / 2.0);
    let k2 = tangent(&shifted(z, &k1, hc / 2.0), s + half, dir, fam, basis)?;
    let k3 = tangent(&shifted(z, &k2, hc / 2.0), s + half, dir, fam, basis)?;
    let k4 = tangent(&shifted(z, &k3, hc), s + dir * h, dir, fam, basis)?;
    let avg: Vec<C64> = (0..k1.len())
        .map(|i| (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]) / 6.0)
        .collect();
    Ok(shifted(z, &avg, hc))
}

/// Follows the fibre point `z_start` over `N_{s_start}` along `path`.
///
/// A singular Jacobian within `1e-4` of the path end is returned as an error;
/// anywhere else it just shrinks the step.
pub fn track(
    z_start: &SymPair,
    path: &SPath,
    fam: &NuijFamily,
    basis: &DualBasis,
    settings: &TrackerSettings,
) -> Result<TrackResult> {
    settings.validate()?;
    let end = path.end();
    let mut z = z_start.clone();
    let mut s = path.start();
    let mut steps = 0usize;
    let mut rejected = 0usize;
    let mut max_res = relative_residual(&z, s, fam, basis);
    let mut max_imag = z.max_imag();
    let finish = |status, z: SymPair, s, steps, rejected, max_res, max_imag| TrackResult {
        status,
        endpoint: z,
        s_reached: s,
        steps_taken: steps,
        rejected_steps: rejected,
        max_residual_seen: max_res,
        max_imag_seen: max_imag,
    };

    for seg in path.waypoints.windows(2) {
        let (a, b) = (seg[0], seg[1]);
        let len = (b - a).norm();
        let dir = (b - a) / len;
        let mut sigma = 0.0;
        let mut h = settings.h_init.min(len);
        let mut streak = 0usize;
        while sigma < len {
            if steps + rejected >= settings.max_steps {
                return Ok(finish(TrackStatus::MaxStepsReached, z, s, steps, rejected, max_res, max_imag));
            }
            let last = len - sigma <= h;
            let h_eff = if last { len - sigma } else { h };
            let s_next = if last { b } else { a + dir * (sigma + h_eff) };
            let attempt = predict(&z, s, dir, h_eff, fam, basis, settings.predictor)
                .and_then(|zp| newton_correct(&zp, s_next, fam, basis, settings));
            let accepted = match attempt {
                Ok((zc, true, _)) => Some(zc),
                Ok(_) => None,
                Err(Error::SingularJacobian(r)) => {
                    if (end - s_next).norm() < END_ZONE && h_eff <= settings.h_min * 4.0 {
                        return Err(Error::SingularJacobian(r));
                    }
                    None
                }
                Err(e) => return Err(e),
            };
            match accepted {
                Some(zc) => {
                    z = zc;
                    s = s_next;
                    sigma = if last { len } else { sigma + h_eff };
                    steps += 1;
                    max_res = max_res.max(relative_residual(&z, s, fam, basis));
                    max_imag = max_imag.max(z.max_imag());
                    streak += 1;
                    if streak >= 3 {
                        h = (2.0 * h).min(settings.h_init);
                        streak = 0;
                    }
                }
                None => {
                    rejected += 1;
                    streak = 0;
                    h = h_eff / 2.0;
                    if h < settings.h_min {
                        return Ok(finish(TrackStatus::MinStepReached, z, s, steps, rejected, max_res, max_imag));
                    }
                }
            }
        }
    }

    // full correction at the end, with room for a few extra iterations
    let iters = settings.newton_max_iters.max(8);
    let (z_end, ok) = match newton_iterate(&z, &fam.at(end), basis, settings.newton_tol, iters) {
        Ok((zc, ok, _)) => (zc, ok),
        Err(Error::SingularJacobian(r)) => return Err(Error::SingularJacobian(r)),
        Err(e) => return Err(e),
    };
    if !ok {
        return Ok(finish(TrackStatus::DivergedCorrector, z_end, end, steps, rejected, max_res, max_imag));
    }
    max_res = max_res.max(relative_residual(&z_end, end, fam, basis));
    max_imag = max_imag.max(z_end.max_imag());
    Ok(finish(TrackStatus::Success, z_end, end, steps, rejected, max_res, max_imag))
}
