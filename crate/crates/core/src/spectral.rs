//! Characteristic equation of the constant-tension crane, complex root
//! location by the argument principle, closed-form instability witnesses and
//! stability scans.
//!
//! Separable solutions `e^{lambda t} f(x)` with `f = k1 e^{-s x} + k2 e^{s x}`,
//! `s = sqrt(lambda^2 + sigma lambda)`, exist exactly when
//!
//! ```text
//! (A - s)(B + s) e^{s} - (A + s)(B - s) e^{-s} = 0,
//! A = lambda (alpha e^{-lambda tau} - m lambda - beta),  B = M lambda^2.
//! ```
//!
//! The left side is odd in `s`, so it flips sign across the branch cut of the
//! square root. Root location works on the reduced residual
//! `2 (A B - s^2) sinh(s)/s + 2 (A - B) cosh(s)`, which is entire in `lambda`.

use std::f64::consts::{PI, SQRT_2};

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::SpectralError;
use crate::model::{CraneParams, RegimeKind};
use crate::solver::platform_coefficient;

/// Characteristic equation for one parameter set (unit tension assumed).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CharProblem {
    pub kind: RegimeKind,
    pub params: CraneParams,
}

impl CharProblem {
    pub fn new(kind: RegimeKind, params: CraneParams) -> Self {
        Self { kind, params }
    }

    fn coefficients(&self, lambda: Complex64) -> (Complex64, Complex64, Complex64) {
        let a = platform_coefficient(lambda, &self.params, self.kind);
        let b = self.params.load_mass * lambda * lambda;
        let s2 = lambda * lambda + self.params.damping * lambda;
        (a, b, s2)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Branch {
    Principal,
    Flipped,
}

/// Characteristic residual with the principal square root.
pub fn char_residual(lambda: Complex64, problem: &CharProblem) -> Complex64 {
    char_residual_on_branch(lambda, problem, Branch::Principal)
}

pub fn char_residual_on_branch(lambda: Complex64, problem: &CharProblem, branch: Branch) -> Complex64 {
    let (a, b, s2) = problem.coefficients(lambda);
    let s = match branch {
        Branch::Principal => s2.sqrt(),
        Branch::Flipped => -s2.sqrt(),
    };
    (a - s) * (b + s) * s.exp() - (a + s) * (b - s) * (-s).exp()
}

/// `sinh(s)/s` and `cosh(s)` as functions of `w = s^2`.
fn even_hyperbolics(w: Complex64) -> (Complex64, Complex64) {
    if w.norm() < 1e-2 {
        // Taylor series, 8 terms are far below rounding for |w| < 1e-2
        let mut sinhc = Complex64::new(0.0, 0.0);
        let mut cosh = Complex64::new(0.0, 0.0);
        let mut term = Complex64::new(1.0, 0.0);
        for k in 0..8 {
            let k2 = 2.0 * k as f64;
            cosh += term;
            sinhc += term / (k2 + 1.0);
            term = term * w / ((k2 + 1.0) * (k2 + 2.0));
        }
        (sinhc, cosh)
    } else {
        let s = w.sqrt();
        (s.sinh() / s, s.cosh())
    }
}

/// Entire function whose zeros are the characteristic roots:
/// `char_residual = s * reduced_residual`.
pub fn reduced_residual(lambda: Complex64, problem: &CharProblem) -> Complex64 {
    let (a, b, s2) = problem.coefficients(lambda);
    let (sinhc, cosh) = even_hyperbolics(s2);
    2.0 * (a * b - s2) * sinhc + 2.0 * (a - b) * cosh
}

/// Closed rectangle `[re.0, re.1] x [im.0, im.1]` of the complex plane.
#[cfg_attr(feature = "schema", derive(schemars::JsonSchema))]
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Rect {
    pub re: (f64, f64),
    pub im: (f64, f64),
}

impl Rect {
    pub fn new(re: (f64, f64), im: (f64, f64)) -> Self {
        Self { re, im }
    }

    /// `[-5 sigma, 3 sigma] x [-40, 40] i`
    pub fn default_for(sigma: f64) -> Self {
        Self::new((-5.0 * sigma, 3.0 * sigma), (-40.0, 40.0))
    }

    pub fn around(center: Complex64, half_width: f64) -> Self {
        Self::new(
            (center.re - half_width, center.re + half_width),
            (center.im - half_width, center.im + half_width),
        )
    }

    fn width(&self) -> f64 {
        self.re.1 - self.re.0
    }

    fn height(&self) -> f64 {
        self.im.1 - self.im.0
    }

    fn is_finite(&self) -> bool {
        [self.re.0, self.re.1, self.im.0, self.im.1].iter().all(|v| v.is_finite())
    }

    pub fn has_area(&self) -> bool {
        self.width() > 0.0 && self.height() > 0.0
    }

    pub fn contains(&self, z: Complex64) -> bool {
        z.re >= self.re.0 && z.re <= self.re.1 && z.im >= self.im.0 && z.im <= self.im.1
    }

    fn grown(&self, margin: f64) -> Self {
        Self::new(
            (self.re.0 - margin, self.re.1 + margin),
            (self.im.0 - margin, self.im.1 + margin),
        )
    }

    fn center(&self) -> Complex64 {
        Complex64::new(0.5 * (self.re.0 + self.re.1), 0.5 * (self.im.0 + self.im.1))
    }

    fn diameter(&self) -> f64 {
        self.width().hypot(self.height())
    }

    fn corners(&self) -> [Complex64; 4] {
        [
            Complex64::new(self.re.0, self.im.0),
            Complex64::new(self.re.1, self.im.0),
            Complex64::new(self.re.1, self.im.1),
            Complex64::new(self.re.0, self.im.1),
        ]
    }

    fn split(&self, fraction: f64) -> (Self, Self) {
        if self.width() >= self.height() {
            let cut = self.re.0 + fraction * self.width();
            (
                Self::new((self.re.0, cut), self.im),
                Self::new((cut, self.re.1), self.im),
            )
        } else {
            let cut = self.im.0 + fraction * self.height();
            (
                Self::new(self.re, (self.im.0, cut)),
                Self::new(self.re, (cut, self.im.1)),
            )
        }
    }
}

/// A located characteristic root.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Root {
    pub lambda: Complex64,
    /// `|char_residual(lambda)|` after Newton polishing.
    pub residual: f64,
    pub converged: bool,
    /// Winding count of the final enclosing cell.
    pub multiplicity: u32,
}

impl Root {
    pub fn is_equilibrium_mode(&self, tol: f64) -> bool {
        self.lambda.norm() < tol
    }
}

/// Tuning knobs of [`find_roots_with`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RootSearch {
    /// Cells are not subdivided below this diameter.
    pub min_cell: f64,
    pub max_newton: usize,
    /// Initial boundary samples per unit length.
    pub samples_per_unit: f64,
}

impl Default for RootSearch {
    fn default() -> Self {
        Self {
            min_cell: 1e-3,
            max_newton: 60,
            samples_per_unit: 4.0,
        }
    }
}

const MAX_EDGE_DEPTH: usize = 40;
const MAX_CELL_DEPTH: usize = 64;
/// Consecutive boundary samples may differ by at most this fraction of the
/// smaller modulus; keeps every phase increment well below pi.
const MAX_RELATIVE_JUMP: f64 = 0.5;
const SPLIT_FRACTIONS: [f64; 5] = [0.5317, 0.4683, 0.5711, 0.4289, 0.6143];

#[derive(Debug)]
struct NearRoot;

fn edge_phase<F: Fn(Complex64) -> Complex64>(
    f: &F,
    pa: Complex64,
    fa: Complex64,
    pb: Complex64,
    fb: Complex64,
    depth: usize,
) -> Result<f64, NearRoot> {
    let small = fa.norm().min(fb.norm());
    if (fb - fa).norm() <= MAX_RELATIVE_JUMP * small {
        return Ok((fb / fa).arg());
    }
    if depth >= MAX_EDGE_DEPTH {
        return Err(NearRoot);
    }
    let pm = 0.5 * (pa + pb);
    let fm = f(pm);
    if !(fm.norm() > 0.0) || !fm.norm().is_finite() {
        return Err(NearRoot);
    }
    Ok(edge_phase(f, pa, fa, pm, fm, depth + 1)? + edge_phase(f, pm, fm, pb, fb, depth + 1)?)
}

/// Number of zeros of `f` inside `rect` counted by the total phase change
/// along its boundary.
fn winding<F: Fn(Complex64) -> Complex64>(f: &F, rect: &Rect, samples_per_unit: f64) -> Result<i64, NearRoot> {
    let corners = rect.corners();
    let mut total = 0.0;
    for k in 0..4 {
        let (p, q) = (corners[k], corners[(k + 1) % 4]);
        let pieces = ((q - p).norm() * samples_per_unit).ceil().max(4.0) as usize;
        let point = |j: usize| p + (q - p) * (j as f64 / pieces as f64);
        let mut prev = (p, f(p));
        if !(prev.1.norm() > 0.0) || !prev.1.norm().is_finite() {
            return Err(NearRoot);
        }
        for j in 1..=pieces {
            let pj = if j == pieces { q } else { point(j) };
            let fj = f(pj);
            if !(fj.norm() > 0.0) || !fj.norm().is_finite() {
                return Err(NearRoot);
            }
            total += edge_phase(f, prev.0, prev.1, pj, fj, 0)?;
            prev = (pj, fj);
        }
    }
    let turns = total / (2.0 * PI);
    let count = turns.round();
    if (turns - count).abs() > 0.25 || count < 0.0 {
        return Err(NearRoot);
    }
    Ok(count as i64)
}

/// Zero count of the reduced residual inside `rect`; `None` when the
/// boundary passes too close to a root.
pub fn root_count(problem: &CharProblem, rect: &Rect) -> Option<i64> {
    let f = |z| reduced_residual(z, problem);
    winding(&f, rect, RootSearch::default().samples_per_unit).ok()
}

struct Finder<'a> {
    problem: &'a CharProblem,
    search: RootSearch,
    root_tol: f64,
}

impl Finder<'_> {
    fn f(&self, z: Complex64) -> Complex64 {
        reduced_residual(z, self.problem)
    }

    fn count(&self, rect: &Rect) -> Result<i64, NearRoot> {
        winding(&|z| self.f(z), rect, self.search.samples_per_unit)
    }

    /// Newton iteration with a central-difference derivative. Returns the
    /// final iterate and whether the steps settled.
    fn newton(&self, start: Complex64) -> (Complex64, bool) {
        let mut z = start;
        for _ in 0..self.search.max_newton {
            let g = self.f(z);
            if g.norm() == 0.0 {
                return (z, true);
            }
            let h = 1e-7 * (1.0 + z.norm());
            let d = (self.f(z + h) - self.f(z - h)) / (2.0 * h);
            if !(d.norm() > 0.0) || !d.norm().is_finite() {
                return (z, false);
            }
            let step = g / d;
            z -= step;
            if !z.norm().is_finite() {
                return (start, false);
            }
            if step.norm() <= 1e-14 * (1.0 + z.norm()) {
                return (z, true);
            }
        }
        (z, false)
    }

    fn polish(&self, start: Complex64, multiplicity: u32) -> Root {
        let (mut z, settled) = self.newton(start);
        // real coefficients: snap roots that sit on the real axis
        if z.im.abs() <= 1e-13 * (1.0 + z.norm()) {
            z.im = 0.0;
        }
        let residual = char_residual(z, self.problem).norm();
        Root {
            lambda: z,
            residual,
            converged: settled && residual < self.root_tol,
            multiplicity,
        }
    }

    fn search(&self, rect: Rect, count: i64, depth: usize, out: &mut Vec<Root>) {
        if count <= 0 {
            return;
        }
        let smallest = rect.diameter() <= self.search.min_cell || depth >= MAX_CELL_DEPTH;
        if count == 1 || smallest {
            let slack = 1e-9 * (1.0 + rect.center().norm());
            let root = self.polish(rect.center(), count as u32);
            if root.converged && rect.grown(slack).contains(root.lambda) {
                out.push(root);
                return;
            }
            if smallest {
                out.push(Root {
                    lambda: rect.center(),
                    converged: false,
                    residual: char_residual(rect.center(), self.problem).norm(),
                    ..root
                });
                return;
            }
        }
        for fraction in SPLIT_FRACTIONS {
            let (a, b) = rect.split(fraction);
            if let (Ok(ca), Ok(cb)) = (self.count(&a), self.count(&b)) {
                self.search(a, ca, depth + 1, out);
                self.search(b, cb, depth + 1, out);
                return;
            }
        }
        // every cut ran into a root: report the best polish of the centre
        out.push(self.polish(rect.center(), count as u32));
    }
}

/// Locates all characteristic roots in `region`.
pub fn find_roots(problem: &CharProblem, region: &Rect, root_tol: f64) -> Result<Vec<Root>, SpectralError> {
    find_roots_with(problem, region, root_tol, &RootSearch::default())
}

pub fn find_roots_with(
    problem: &CharProblem,
    region: &Rect,
    root_tol: f64,
    search: &RootSearch,
) -> Result<Vec<Root>, SpectralError> {
    if !region.is_finite() {
        return Err(SpectralError::BadRegion);
    }
    if !region.has_area() {
        return Ok(Vec::new());
    }
    let finder = Finder {
        problem,
        search: *search,
        root_tol,
    };

    // nudge the outer boundary off any root sitting on it
    let mut outer = *region;
    let mut count = None;
    for k in 0..6 {
        match finder.count(&outer) {
            Ok(c) => {
                count = Some(c);
                break;
            }
            Err(NearRoot) => outer = region.grown(0.5 * search.min_cell * (k + 1) as f64),
        }
    }
    let count = count.ok_or(SpectralError::SingularBoundary)?;

    let mut found = Vec::new();
    finder.search(outer, count, 0, &mut found);

    let mut roots: Vec<Root> = Vec::with_capacity(found.len());
    for r in found.into_iter().filter(|r| region.contains(r.lambda)) {
        match roots
            .iter_mut()
            .find(|q| (q.lambda - r.lambda).norm() < 10.0 * root_tol)
        {
            Some(q) if r.residual < q.residual => *q = r,
            Some(_) => {}
            None => roots.push(r),
        }
    }
    roots.sort_by(|a, b| {
        b.lambda
            .re
            .total_cmp(&a.lambda.re)
            .then(a.lambda.im.total_cmp(&b.lambda.im))
    });
    Ok(roots)
}

/// Largest real part among `roots`, ignoring the equilibrium root at 0.
pub fn spectral_abscissa(roots: &[Root], zero_tol: f64) -> Option<f64> {
    roots
        .iter()
        .filter(|r| !r.is_equilibrium_mode(zero_tol))
        .map(|r| r.lambda.re)
        .max_by(f64::total_cmp)
}

/// Default cross weight attached to witness parameter sets.
const WITNESS_CROSS_WEIGHT: f64 = 0.5;
/// Residual accepted for the closed-form witness roots.
pub const WITNESS_TOL: f64 = 1e-10;

/// Parameters with `tau = sqrt 2`, `M = sqrt 2 / sigma` and
/// `alpha = sqrt 2 (1 + m/M) e^{2/M}`, for which `lambda = sigma` is a root
/// without instantaneous velocity feedback.
pub fn instability_witness_beta0(sigma: f64, m: f64) -> (CraneParams, Root) {
    let load_mass = SQRT_2 / sigma;
    let alpha = SQRT_2 * (1.0 + m / load_mass) * (2.0 / load_mass).exp();
    let params = CraneParams {
        platform_mass: m,
        load_mass,
        delay_gain: alpha,
        velocity_gain: 0.0,
        damping: sigma,
        delay: SQRT_2,
        delay_weight: 2.0 * alpha,
        cross_weight: WITNESS_CROSS_WEIGHT,
    };
    let root = exact_root(&CharProblem::new(RegimeKind::Beta0, params), sigma);
    (params, root)
}

fn exact_root(problem: &CharProblem, lambda: f64) -> Root {
    let lambda = Complex64::new(lambda, 0.0);
    let residual = char_residual(lambda, problem).norm();
    Root {
        lambda,
        residual,
        converged: residual < WITNESS_TOL,
        multiplicity: 1,
    }
}

/// Why no delay makes `lambda = sigma` a root for the requested gains.
#[derive(Debug, Clone, PartialEq, Serialize, thiserror::Error)]
#[serde(tag = "reason", rename_all = "snake_case")]
pub enum Infeasible {
    #[error("need alpha >= beta + sqrt2 (1 + m/M) = {bound}, got alpha = {alpha}")]
    GainMargin { alpha: f64, bound: f64 },
    #[error("constructed delay tau = {tau} is not positive")]
    DelayNotPositive { tau: f64 },
    #[error("sigma, m and alpha must be positive and beta non-negative")]
    BadInput,
}

/// `beta + sqrt 2 (1 + m / M)` with `M = sqrt 2 / sigma`.
pub fn general_witness_bound(sigma: f64, m: f64, beta: f64) -> f64 {
    let load_mass = SQRT_2 / sigma;
    beta + SQRT_2 * (1.0 + m / load_mass)
}

/// With `M = sqrt 2 / sigma`, the delay
/// `tau = (M / sqrt 2) ln(alpha / (beta + sqrt 2 (1 + m/M)))` makes
/// `lambda = sigma` a root with velocity feedback `beta`.
pub fn instability_witness_general(
    sigma: f64,
    m: f64,
    alpha: f64,
    beta: f64,
) -> Result<(CraneParams, Root), Infeasible> {
    if !(sigma > 0.0 && m > 0.0 && alpha > 0.0 && beta >= 0.0) {
        return Err(Infeasible::BadInput);
    }
    let load_mass = SQRT_2 / sigma;
    let bound = general_witness_bound(sigma, m, beta);
    if alpha < bound {
        return Err(Infeasible::GainMargin { alpha, bound });
    }
    let tau = load_mass / SQRT_2 * (alpha / bound).ln();
    if !(tau > 0.0) {
        return Err(Infeasible::DelayNotPositive { tau });
    }
    let params = CraneParams {
        platform_mass: m,
        load_mass,
        delay_gain: alpha,
        velocity_gain: beta,
        damping: sigma,
        delay: tau,
        delay_weight: alpha,
        cross_weight: WITNESS_CROSS_WEIGHT,
    };
    let root = exact_root(&CharProblem::new(RegimeKind::General, params), sigma);
    Ok((params, root))
}

/// Parameter varied along a scan axis.
#[cfg_attr(feature = "schema", derive(schemars::JsonSchema))]
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScanParam {
    PlatformMass,
    LoadMass,
    DelayGain,
    VelocityGain,
    Damping,
    Delay,
}

impl ScanParam {
    pub fn apply(self, params: &mut CraneParams, value: f64) {
        let slot = match self {
            ScanParam::PlatformMass => &mut params.platform_mass,
            ScanParam::LoadMass => &mut params.load_mass,
            ScanParam::DelayGain => &mut params.delay_gain,
            ScanParam::VelocityGain => &mut params.velocity_gain,
            ScanParam::Damping => &mut params.damping,
            ScanParam::Delay => &mut params.delay,
        };
        *slot = value;
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScanAxis {
    pub param: ScanParam,
    pub values: Vec<f64>,
}

impl ScanAxis {
    pub fn linspace(param: ScanParam, from: f64, to: f64, count: usize) -> Self {
        let values = match count {
            0 => Vec::new(),
            1 => vec![from],
            _ => (0..count)
                .map(|k| from + (to - from) * k as f64 / (count - 1) as f64)
                .collect(),
        };
        Self { param, values }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum ScanCell {
    /// Largest real part over the non-equilibrium roots in the region.
    Abscissa { value: f64, roots: usize },
    /// Only the equilibrium root (or nothing) lies in the region.
    NoRootFound,
    /// The search could not certify a root-free boundary.
    Failed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StabilityMap {
    pub axis1: ScanAxis,
    pub axis2: ScanAxis,
    /// `cells[i][j]` holds `axis1.values[i]`, `axis2.values[j]`.
    pub cells: Vec<Vec<ScanCell>>,
}

/// Spectral abscissa over a two-parameter grid. Cells are independent and
/// evaluated in parallel.
pub fn stability_scan(
    template: &CharProblem,
    axis1: &ScanAxis,
    axis2: &ScanAxis,
    region: &Rect,
    root_tol: f64,
    search: &RootSearch,
) -> StabilityMap {
    let cells = axis1
        .values
        .par_iter()
        .map(|&v1| {
            axis2
                .values
                .par_iter()
                .map(|&v2| {
                    let mut problem = *template;
                    axis1.param.apply(&mut problem.params, v1);
                    axis2.param.apply(&mut problem.params, v2);
                    match find_roots_with(&problem, region, root_tol, search) {
                        Ok(roots) => {
                            let zero_tol = 1e-6;
                            let others = roots.iter().filter(|r| !r.is_equilibrium_mode(zero_tol)).count();
                            match spectral_abscissa(&roots, zero_tol) {
                                Some(value) => ScanCell::Abscissa { value, roots: others },
                                None => ScanCell::NoRootFound,
                            }
                        }
                        Err(_) => ScanCell::Failed,
                    }
                })
                .collect()
        })
        .collect();
    StabilityMap {
        axis1: axis1.clone(),
        axis2: axis2.clone(),
        cells,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn convergent() -> CharProblem {
        CharProblem::new(
            RegimeKind::General,
            CraneParams {
                platform_mass: 1.0,
                load_mass: 1.0,
                delay_gain: 0.5,
                velocity_gain: 1.5,
                damping: 1.0,
                delay: 0.5,
                delay_weight: 1.0,
                cross_weight: 0.5,
            },
        )
    }

    #[test]
    fn zero_is_always_a_root() {
        let z = Complex64::new(0.0, 0.0);
        assert_eq!(char_residual(z, &convergent()), z);
        assert_eq!(reduced_residual(z, &convergent()), z);
    }

    #[test]
    fn reduced_residual_times_s_matches() {
        let p = convergent();
        for l in [Complex64::new(0.3, 1.7), Complex64::new(-2.0, 0.4), Complex64::new(1e-4, 2e-4)] {
            let s = (l * l + p.params.damping * l).sqrt();
            let lhs = char_residual(l, &p);
            let rhs = s * reduced_residual(l, &p);
            assert!((lhs - rhs).norm() <= 1e-12 * (1.0 + lhs.norm()), "{l}: {lhs} vs {rhs}");
        }
    }

    #[test]
    fn series_matches_direct_evaluation_at_switch() {
        let w = Complex64::new(0.0099, 0.0);
        let (a, b) = even_hyperbolics(w);
        let s = w.sqrt();
        assert_relative_eq!(a.re, (s.sinh() / s).re, epsilon = 1e-15);
        assert_relative_eq!(b.re, s.cosh().re, epsilon = 1e-15);
    }

    #[test]
    fn beta0_witness_root() {
        let (p, root) = instability_witness_beta0(1.0, 1.0);
        assert_relative_eq!(p.load_mass, SQRT_2);
        assert_relative_eq!(p.delay, SQRT_2);
        assert!(root.residual < WITNESS_TOL);
        assert!(root.converged);
        let (p2, root2) = instability_witness_beta0(2.0, 0.5);
        assert_relative_eq!(p2.load_mass, SQRT_2 / 2.0);
        assert!(root2.residual < WITNESS_TOL);
    }

    #[test]
    fn beta0_witness_gain_simplifies() {
        for (sigma, m) in [(0.5, 0.5), (1.0, 1.0), (2.0, 0.5), (1.3, 2.2)] {
            let (p, _) = instability_witness_beta0(sigma, m);
            let simplified = (SQRT_2 + sigma * m) * (sigma * SQRT_2).exp();
            assert_relative_eq!(p.delay_gain, simplified, max_relative = 1e-14);
        }
    }

    #[test]
    fn general_witness_feasible() {
        let bound = general_witness_bound(1.0, 1.0, 1.0);
        let (p, root) = instability_witness_general(1.0, 1.0, bound + 0.5, 1.0).unwrap();
        assert!(p.delay > 0.0);
        assert!(root.residual < WITNESS_TOL, "{}", root.residual);
    }

    #[test]
    fn general_witness_infeasible() {
        assert!(matches!(
            instability_witness_general(1.0, 1.0, 1.0, 1.0),
            Err(Infeasible::GainMargin { .. })
        ));
        let bound = general_witness_bound(1.0, 1.0, 1.0);
        assert_eq!(
            instability_witness_general(1.0, 1.0, bound, 1.0),
            Err(Infeasible::DelayNotPositive { tau: 0.0 })
        );
    }

    #[test]
    fn winding_counts_planted_zeros() {
        let f = |z: Complex64| (z - Complex64::new(0.3, 0.2)) * (z + 1.0) * (z - Complex64::new(0.0, 2.0));
        let r = Rect::new((-2.0, 2.0), (-1.0, 1.0));
        assert_eq!(winding(&f, &r, 4.0).unwrap(), 2);
        let r = Rect::new((-2.0, 2.0), (-1.0, 3.0));
        assert_eq!(winding(&f, &r, 4.0).unwrap(), 3);
    }

    #[test]
    fn finds_beta0_witness_root() {
        let (p, _) = instability_witness_beta0(1.0, 1.0);
        let problem = CharProblem::new(RegimeKind::Beta0, p);
        let roots = find_roots(&problem, &Rect::new((0.0, 2.0), (-1.0, 1.0)), 1e-8).unwrap();
        assert!(roots.iter().any(|r| (r.lambda - 1.0).norm() < 1e-8), "{roots:?}");
    }

    #[test]
    fn finds_zero_root() {
        let roots = find_roots(&convergent(), &Rect::around(Complex64::new(0.0, 0.0), 0.1), 1e-8).unwrap();
        assert_eq!(roots.len(), 1);
        assert!(roots[0].lambda.norm() < 1e-10);
        assert!(roots[0].converged);
    }

    #[test]
    fn empty_region_has_no_roots() {
        let r = Rect::new((1.0, 1.0), (-1.0, 1.0));
        assert!(find_roots(&convergent(), &r, 1e-8).unwrap().is_empty());
        let bad = Rect::new((f64::NAN, 1.0), (-1.0, 1.0));
        assert_eq!(find_roots(&convergent(), &bad, 1e-8), Err(SpectralError::BadRegion));
    }

    #[test]
    fn scan_param_application() {
        let mut p = convergent().params;
        ScanParam::Delay.apply(&mut p, 2.0);
        ScanParam::DelayGain.apply(&mut p, 0.1);
        assert_eq!((p.delay, p.delay_gain), (2.0, 0.1));
        let axis = ScanAxis::linspace(ScanParam::Damping, 0.0, 1.0, 5);
        assert_eq!(axis.values, vec![0.0, 0.25, 0.5, 0.75, 1.0]);
    }
}
