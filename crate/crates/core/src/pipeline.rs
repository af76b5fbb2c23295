//! Two-phase solve: a random start pair is tracked down to the universal
//! endpoint of its family once per degree, then that endpoint is tracked up
//! the family of the target form.

use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::detmap::{phi_coeffs, SymPair};
use crate::error::{Error, Result};
use crate::homotopy::{
    make_dual_basis, relative_residual, track, DualBasis, SPath, TrackResult, TrackStatus, TrackerSettings,
};
use crate::hyperbolic::check_hyperbolic_default;
use crate::io::{self, PairJson};
use crate::linalg::{norm2, Lu, C64};
use crate::nuij::{fixed_endpoint, NuijFamily, PathKind};
use crate::ternary::TernaryForm;

/// Relative coefficient distance a tracked endpoint must reach before it is
/// accepted.
const ACCEPT_REL: f64 = 1e-8;
/// Imaginary parts below this are rounding and get dropped.
const REAL_CUTOFF: f64 = 1e-6;
/// Size of the random coefficient nudge in the last fallback rung.
const PERTURBATION: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Detour {
    Off,
    Auto,
    Always,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveOptions {
    pub path_kind: PathKind,
    pub seed: u64,
    pub detour: Detour,
    pub detour_c: Option<C64>,
    pub perturb_eps: f64,
    pub max_retries: usize,
    pub tracker: TrackerSettings,
    #[serde(skip)]
    pub cache_dir: Option<PathBuf>,
}

impl Default for SolveOptions {
    fn default() -> Self {
        Self {
            path_kind: PathKind::Original,
            seed: 0,
            detour: Detour::Auto,
            detour_c: None,
            perturb_eps: 1e-3,
            max_retries: 5,
            tracker: TrackerSettings::default(),
            cache_dir: None,
        }
    }
}

impl SolveOptions {
    pub fn validate(&self) -> Result<()> {
        if !(self.perturb_eps > 0.0 && self.perturb_eps < 0.5) {
            return Err(Error::InvalidOptions(format!("perturb_eps {} not in (0, 0.5)", self.perturb_eps)));
        }
        if let Some(c) = self.detour_c {
            if c.im == 0.0 || !c.re.is_finite() || !c.im.is_finite() {
                return Err(Error::InvalidOptions(format!("detour point {c} must be non-real")));
            }
        }
        if self.max_retries == 0 {
            return Err(Error::InvalidOptions("max_retries must be positive".into()));
        }
        self.tracker.validate()
    }
}

/// What a tracked path did, without the endpoint.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrackSummary {
    pub status: TrackStatus,
    pub steps_taken: usize,
    pub rejected_steps: usize,
    pub max_residual_seen: f64,
    pub max_imag_seen: f64,
}

impl From<&TrackResult> for TrackSummary {
    fn from(r: &TrackResult) -> Self {
        Self {
            status: r.status,
            steps_taken: r.steps_taken,
            rejected_steps: r.rejected_steps,
            max_residual_seen: r.max_residual_seen,
            max_imag_seen: r.max_imag_seen,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct PathStats {
    /// `None` when the start endpoint came from the cache.
    pub phase1: Option<TrackSummary>,
    pub phase2: Option<TrackSummary>,
    pub attempts: usize,
    pub strategy: String,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub diagnostics: Vec<String>,
}

/// `p = det(t I + x D + y R)`, up to the residual.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Representation {
    #[serde(rename = "D")]
    pub diag: Vec<f64>,
    #[serde(rename = "R")]
    pub r: Vec<Vec<f64>>,
    #[serde(rename = "R_imag", default, skip_serializing_if = "Option::is_none")]
    pub r_imag: Option<Vec<Vec<f64>>>,
    pub residual: f64,
    pub is_real: bool,
    /// Set when the input was only weakly hyperbolic and `N_{1-eps}(p)` was
    /// represented instead.
    #[serde(default)]
    pub approximate: bool,
    #[serde(default)]
    pub ambiguous_sign: bool,
    #[serde(default)]
    pub path_stats: PathStats,
    #[serde(default)]
    pub seed: u64,
}

impl Representation {
    fn from_pair(z: &SymPair) -> Self {
        let d = z.order();
        let r_imag = (z.max_imag() > 0.0)
            .then(|| (0..d).map(|j| (0..d).map(|k| z.r(j, k).im).collect()).collect());
        Self {
            diag: z.diag_re(),
            r: z.r_re(),
            r_imag,
            residual: 0.0,
            is_real: z.max_imag() == 0.0,
            approximate: false,
            ambiguous_sign: false,
            path_stats: PathStats::default(),
            seed: 0,
        }
    }

    pub fn pair(&self) -> Result<SymPair> {
        let d = self.diag.len();
        let im = self.r_imag.clone().unwrap_or_else(|| vec![vec![0.0; d]; d]);
        if im.len() != d || self.r.len() != d {
            return Err(Error::Format(format!("R must be {d} x {d}")));
        }
        let r: Vec<Vec<C64>> = self
            .r
            .iter()
            .zip(&im)
            .map(|(a, b)| a.iter().zip(b).map(|(&x, &y)| C64::new(x, y)).collect())
            .collect();
        SymPair::new(self.diag.iter().map(|&x| C64::new(x, 0.0)).collect(), &r)
    }
}

/// SplitMix64 step, used to derive independent sub-seeds.
fn derive(seed: u64, tag: u64) -> u64 {
    let mut z = seed ^ tag.wrapping_mul(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

fn rel_distance(a: &TernaryForm, b: &TernaryForm) -> Result<f64> {
    Ok(a.coeff_distance(b)? / b.max_abs_coeff().max(1.0))
}

fn poly_hash(f: &TernaryForm) -> u64 {
    crate::fnv1a(
        f.coeffs()
            .iter()
            .flat_map(|c| c.re.to_bits().to_le_bytes().into_iter().chain(c.im.to_bits().to_le_bytes())),
    )
}

/// Phase-one endpoints on disk, one JSON file per `(d, path kind, L)`.
#[derive(Debug, Clone)]
pub struct EndpointCache {
    dir: PathBuf,
}

#[derive(Debug, Serialize, Deserialize)]
struct CacheEntry {
    d: usize,
    kind: PathKind,
    pair: PairJson,
    endpoint_poly_hash: u64,
}

impl EndpointCache {
    pub fn new(dir: impl Into<PathBuf>) -> Self {
        Self { dir: dir.into() }
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn key_hash(d: usize, kind: &PathKind) -> u64 {
        let tag = format!("{d}:{}:{:016x}", kind.name(), kind.digest());
        crate::fnv1a(tag.into_bytes())
    }

    pub fn path_for(&self, d: usize, kind: &PathKind) -> PathBuf {
        self.dir.join(format!("endpoint-{:016x}.json", Self::key_hash(d, kind)))
    }

    /// The cached pair, if present and still a fibre point over `endpoint`
    /// (relative coefficient distance `< 1e-8`). Stale entries are deleted.
    pub fn load(&self, d: usize, kind: &PathKind, endpoint: &TernaryForm) -> Option<SymPair> {
        let path = self.path_for(d, kind);
        let text = std::fs::read_to_string(&path).ok()?;
        let checked = || -> Result<SymPair> {
            let entry: CacheEntry = serde_json::from_str(&text)?;
            if entry.d != d || &entry.kind != kind || entry.endpoint_poly_hash != poly_hash(endpoint) {
                return Err(Error::Format("cache key mismatch".into()));
            }
            let pair = SymPair::try_from(&entry.pair)?;
            if pair.order() != d || rel_distance(&phi_coeffs(&pair)?, endpoint)? >= ACCEPT_REL {
                return Err(Error::Format("cached pair is off the fibre".into()));
            }
            Ok(pair)
        };
        match checked() {
            Ok(pair) => Some(pair),
            Err(e) => {
                log::warn!("discarding cache entry {}: {e}", path.display());
                let _ = std::fs::remove_file(&path);
                None
            }
        }
    }

    pub fn store(&self, kind: &PathKind, pair: &SymPair, endpoint: &TernaryForm) -> Result<()> {
        let entry = CacheEntry {
            d: pair.order(),
            kind: kind.clone(),
            pair: PairJson::from(pair),
            endpoint_poly_hash: poly_hash(endpoint),
        };
        io::write_atomic(&self.path_for(pair.order(), kind), &serde_json::to_string_pretty(&entry)?)
    }
}

/// Newton on the real pair against `target`, keeping only real parts of the
/// updates. Stops once the update is at rounding level or stops shrinking.
fn real_polish(z: &SymPair, target: &TernaryForm, basis: &DualBasis) -> SymPair {
    let mut cur = z.real_part();
    let mut last = f64::INFINITY;
    for _ in 0..6 {
        let mut h = Vec::with_capacity(basis.len());
        let mut jac = crate::linalg::CMatrix::zeros(basis.len(), cur.dim());
        for (i, &pt) in basis.points().iter().enumerate() {
            let (v, g) = crate::detmap::phi_eval_grad(&cur, pt);
            h.push(v - target.evaluate(pt));
            jac.row_mut(i).copy_from_slice(&g);
        }
        let lu = Lu::new(&jac);
        if lu.is_singular() {
            break;
        }
        let dz = lu.solve(&h);
        let step = norm2(&dz);
        if step.is_nan() || step >= last {
            break;
        }
        let coords: Vec<C64> = cur.coords().iter().zip(&dz).map(|(a, b)| C64::new(a.re - b.re, 0.0)).collect();
        cur = SymPair::from_coords(cur.order(), &coords).expect("same order");
        if step / (1.0 + cur.norm()) < 1e-15 {
            break;
        }
        last = step;
    }
    cur
}

fn check_kind(d: usize, kind: &PathKind) -> Result<()> {
    match kind {
        PathKind::Original => Ok(()),
        PathKind::Randomized(l) => l.validate_for_degree(d),
    }
}

/// Start pair with well separated diagonal entries whose form is strictly
/// hyperbolic.
fn start_pair(d: usize, rng: &mut ChaCha8Rng) -> Result<(SymPair, TernaryForm)> {
    for _ in 0..10 {
        let mut diag: Vec<f64> = (0..d).map(|_| rng.random_range(-1.0..=1.0)).collect();
        let mut sorted = diag.clone();
        sorted.sort_by(f64::total_cmp);
        if sorted.windows(2).any(|w| w[1] - w[0] < 0.05 / d as f64) {
            continue;
        }
        let mut r = vec![vec![0.0; d]; d];
        for j in 0..d {
            for k in j..d {
                let v = rng.random_range(-1.0..=1.0);
                r[j][k] = v;
                r[k][j] = v;
            }
        }
        let z = SymPair::from_real(&std::mem::take(&mut diag), &r)?;
        let q = phi_coeffs(&z)?;
        if check_hyperbolic_default(&q)?.is_strict {
            return Ok((z, q));
        }
    }
    Err(Error::StartNotStrict)
}

/// Result of tracking a random start pair down to the universal endpoint.
#[derive(Debug, Clone)]
pub struct Phase1 {
    pub pair: SymPair,
    pub stats: TrackSummary,
}

/// Tracks a fresh random start pair from `s = 1` to `s = 0`, reseeding up
/// to `max_retries` times.
pub fn phase1(d: usize, opts: &SolveOptions) -> Result<Phase1> {
    assert!(d >= 1, "degree must be positive");
    check_kind(d, &opts.path_kind)?;
    let endpoint = fixed_endpoint(d, &opts.path_kind)?;
    let mut diagnostics = Vec::new();
    for attempt in 0..opts.max_retries {
        let mut rng = ChaCha8Rng::seed_from_u64(derive(opts.seed, 1 + attempt as u64));
        let (z, q) = start_pair(d, &mut rng)?;
        let basis = make_dual_basis(d, rng.random())?;
        let fam = NuijFamily::new(q, opts.path_kind.clone())?;
        let path = SPath::real(&[1.0, 0.0])?;
        match track(&z, &path, &fam, &basis, &opts.tracker) {
            Ok(res) if res.status == TrackStatus::Success => {
                let pair = if res.endpoint.max_imag() < REAL_CUTOFF {
                    real_polish(&res.endpoint, &endpoint, &basis)
                } else {
                    res.endpoint.clone()
                };
                let dist = rel_distance(&phi_coeffs(&pair)?, &endpoint)?;
                if dist < ACCEPT_REL {
                    return Ok(Phase1 {
                        pair,
                        stats: TrackSummary::from(&res),
                    });
                }
                diagnostics.push(format!("phase1 attempt {attempt}: endpoint off by {dist:e}"));
            }
            Ok(res) => diagnostics.push(format!("phase1 attempt {attempt}: {:?}", res.status)),
            Err(e) => diagnostics.push(format!("phase1 attempt {attempt}: {e}")),
        }
    }
    Err(Error::SolveFailed {
        attempts: opts.max_retries,
        diagnostics,
    })
}

/// Start endpoint from the cache when possible, else from [`phase1`] (and
/// then cached).
fn start_endpoint(d: usize, opts: &SolveOptions) -> Result<(SymPair, Option<TrackSummary>)> {
    let cache = opts.cache_dir.as_ref().map(EndpointCache::new);
    let endpoint = fixed_endpoint(d, &opts.path_kind)?;
    if let Some(pair) = cache.as_ref().and_then(|c| c.load(d, &opts.path_kind, &endpoint)) {
        return Ok((pair, None));
    }
    let p1 = phase1(d, opts)?;
    if let Some(c) = &cache {
        if let Err(e) = c.store(&opts.path_kind, &p1.pair, &endpoint) {
            log::warn!("could not write endpoint cache: {e}");
        }
    }
    Ok((p1.pair, Some(p1.stats)))
}

fn detour_point(opts: &SolveOptions, rng: &mut ChaCha8Rng) -> C64 {
    opts.detour_c
        .unwrap_or_else(|| C64::new(0.5, rng.random_range(0.25..=1.0)))
}

/// Tracks `z0` over the universal endpoint up the family of `p` to `s = 1`,
/// through a detour point when `opts.detour` is `Always`.
pub fn phase2(p: &TernaryForm, z0: &SymPair, opts: &SolveOptions) -> Result<TrackResult> {
    let mut rng = ChaCha8Rng::seed_from_u64(derive(opts.seed, 100));
    let basis = make_dual_basis(p.degree(), rng.random())?;
    let fam = NuijFamily::new(p.clone(), opts.path_kind.clone())?;
    let path = if opts.detour == Detour::Always {
        SPath::new(vec![C64::new(0.0, 0.0), detour_point(opts, &mut rng), C64::new(1.0, 0.0)])?
    } else {
        SPath::real(&[0.0, 1.0])?
    };
    track(z0, &path, &fam, &basis, &opts.tracker)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Rung {
    Plain,
    FreshBasis,
    Detour,
    Perturb { detour: bool },
}

fn ladder(attempt: usize, detour: Detour) -> Rung {
    match (detour, attempt) {
        (Detour::Always, _) => Rung::Detour,
        (_, 0) => Rung::Plain,
        (_, 1) => Rung::FreshBasis,
        (Detour::Auto, 2) => Rung::Detour,
        (Detour::Auto, k) => Rung::Perturb { detour: k % 2 == 0 },
        (Detour::Off, _) => Rung::Perturb { detour: false },
    }
}

/// Representation of a real hyperbolic form `p`.
///
/// Weakly hyperbolic input is replaced by `N_{1-eps}(p)` and the output is
/// marked approximate. The result is canonicalized when real.
pub fn solve(p: &TernaryForm, opts: &SolveOptions) -> Result<Representation> {
    opts.validate()?;
    if !p.is_real() {
        return Err(Error::NotReal(p.max_imag()));
    }
    let p = p.real_part().normalized()?;
    let d = p.degree();
    check_kind(d, &opts.path_kind)?;
    if p.coeffs().iter().skip(1).all(|c| *c == C64::new(0.0, 0.0)) {
        let mut rep = Representation::from_pair(&SymPair::zeros(d));
        rep.seed = opts.seed;
        rep.path_stats.strategy = "trivial".into();
        return Ok(rep);
    }
    let report = check_hyperbolic_default(&p)?;
    if !report.is_hyperbolic {
        return Err(Error::NotHyperbolic(report.max_imag));
    }
    let (target, approximate) = if report.is_strict {
        (p.clone(), false)
    } else {
        let fam = NuijFamily::new(p.clone(), opts.path_kind.clone())?;
        (fam.at(C64::new(1.0 - opts.perturb_eps, 0.0)).real_part(), true)
    };

    let (z0, phase1_stats) = start_endpoint(d, opts)?;
    let mut rng = ChaCha8Rng::seed_from_u64(derive(opts.seed, 100));
    let first_basis = rng.random();
    let mut diagnostics = Vec::new();
    let mut used_fixed_c = false;
    for attempt in 0..opts.max_retries {
        let rung = ladder(attempt, opts.detour);
        let basis_seed = if attempt == 0 { first_basis } else { rng.random() };
        let basis = make_dual_basis(d, basis_seed)?;
        let tracked_target = match rung {
            Rung::Perturb { .. } => {
                let mut q = target.clone();
                for c in q.coeffs_mut().iter_mut().skip(1) {
                    c.re += PERTURBATION * rng.random_range(-1.0..=1.0);
                }
                q
            }
            _ => target.clone(),
        };
        let use_detour = matches!(rung, Rung::Detour | Rung::Perturb { detour: true });
        let path = if use_detour {
            // a user-chosen detour point gets one try; later ones are random
            let c = match opts.detour_c.filter(|_| !used_fixed_c) {
                Some(c) => c,
                None => C64::new(0.5, rng.random_range(0.25..=1.0)),
            };
            used_fixed_c = true;
            SPath::new(vec![C64::new(0.0, 0.0), c, C64::new(1.0, 0.0)])?
        } else {
            SPath::real(&[0.0, 1.0])?
        };
        let fam = NuijFamily::new(tracked_target, opts.path_kind.clone())?;
        let label = format!("attempt {attempt} ({rung:?}, path {:?})", path.waypoints());
        let res = match track(&z0, &path, &fam, &basis, &opts.tracker) {
            Ok(res) if res.status == TrackStatus::Success => res,
            Ok(res) => {
                diagnostics.push(format!("{label}: {:?} at s = {}", res.status, res.s_reached));
                continue;
            }
            Err(e) => {
                diagnostics.push(format!("{label}: {e}"));
                continue;
            }
        };
        let mut z = res.endpoint.clone();
        // a real path from a real start can only end at a real point; what
        // is left is rounding, and the verification below still applies
        let is_real = !use_detour || z.max_imag() < REAL_CUTOFF;
        if is_real {
            z = real_polish(&z, &target, &basis);
        } else if relative_residual(&z, C64::new(1.0, 0.0), &fam, &basis) > ACCEPT_REL {
            diagnostics.push(format!("{label}: complex endpoint off the fibre"));
            continue;
        }
        let dist = rel_distance(&phi_coeffs(&z)?, &target)?;
        if dist >= ACCEPT_REL {
            diagnostics.push(format!("{label}: endpoint off by {dist:e}"));
            continue;
        }
        let (z, ambiguous) = if is_real { canonicalize(&z)? } else { (sort_by_diag(&z), false) };
        let mut rep = Representation::from_pair(&z);
        rep.is_real = is_real;
        rep.residual = phi_coeffs(&z)?.coeff_distance(&p)?;
        rep.approximate = approximate;
        rep.ambiguous_sign = ambiguous;
        rep.seed = opts.seed;
        rep.path_stats = PathStats {
            phase1: phase1_stats,
            phase2: Some(TrackSummary::from(&res)),
            attempts: attempt + 1,
            strategy: format!("{rung:?}"),
            diagnostics,
        };
        return Ok(rep);
    }
    Err(Error::SolveFailed {
        attempts: opts.max_retries,
        diagnostics,
    })
}

/// Runs `k` solves with seeds `seed, seed + 1, ...` concurrently and returns
/// the successful one with the smallest seed, so the outcome does not depend
/// on scheduling.
pub fn solve_parallel(p: &TernaryForm, opts: &SolveOptions, k: usize) -> Result<Representation> {
    if k <= 1 {
        return solve(p, opts);
    }
    let results: Vec<Result<Representation>> = std::thread::scope(|scope| {
        let handles: Vec<_> = (0..k)
            .map(|i| {
                let mut o = opts.clone();
                o.seed = opts.seed.wrapping_add(i as u64);
                scope.spawn(move || solve(p, &o))
            })
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().unwrap_or_else(|_| Err(Error::InternalInconsistency("solver thread panicked".into()))))
            .collect()
    });
    let mut first_err = None;
    for r in results {
        match r {
            Ok(rep) => return Ok(rep),
            Err(e) => {
                first_err.get_or_insert(e);
            }
        }
    }
    Err(first_err.expect("k > 1 attempts ran"))
}

fn permuted(z: &SymPair, perm: &[usize], sign: &[f64]) -> SymPair {
    let d = z.order();
    let diag = perm.iter().map(|&i| z.diag()[i]).collect();
    let r: Vec<Vec<C64>> = (0..d)
        .map(|j| (0..d).map(|k| z.r(perm[j], perm[k]) * (sign[j] * sign[k])).collect())
        .collect();
    SymPair::new(diag, &r).expect("conjugation keeps symmetry")
}

fn sort_by_diag(z: &SymPair) -> SymPair {
    let mut perm: Vec<usize> = (0..z.order()).collect();
    perm.sort_by(|&a, &b| z.diag()[a].re.total_cmp(&z.diag()[b].re));
    permuted(z, &perm, &vec![1.0; z.order()])
}

/// Canonical representative of `z` under `D, R -> P D P^T, S P R P^T S`.
///
/// `D` ascending; then for each column `k >= 1` the sign `S_k` makes the
/// first entry `R[j][k]`, `j < k`, with `|R[j][k]| > 1e-9` positive. The flag
/// reports a column with no such entry, where the sign is left at `+1`.
pub fn canonicalize(z: &SymPair) -> Result<(SymPair, bool)> {
    let z = z.real_part();
    let d = z.order();
    let sorted = sort_by_diag(&z);
    let gap = sorted
        .diag()
        .windows(2)
        .map(|w| w[1].re - w[0].re)
        .fold(f64::INFINITY, f64::min);
    if gap < 1e-9 {
        return Err(Error::DegenerateD(gap));
    }
    let mut sign = vec![1.0; d];
    let mut ambiguous = false;
    for k in 1..d {
        match (0..k).find(|&j| sorted.r(j, k).re.abs() > 1e-9) {
            Some(j) => {
                if sign[j] * sorted.r(j, k).re < 0.0 {
                    sign[k] = -1.0;
                }
            }
            None => ambiguous = true,
        }
    }
    let id: Vec<usize> = (0..d).collect();
    Ok((permuted(&sorted, &id, &sign), ambiguous))
}

/// Coefficient distance between the representation's form and `p` (made
/// monic in `t` first).
pub fn verify(p: &TernaryForm, rep: &Representation) -> Result<f64> {
    let z = rep.pair()?;
    if z.order() != p.degree() {
        return Err(Error::DegreeMismatch(z.order(), p.degree()));
    }
    phi_coeffs(&z)?.coeff_distance(&p.normalized()?)
}
