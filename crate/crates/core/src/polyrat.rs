//! Complex-coefficient polynomial and rational-function algebra, plus a
//! multiplicity-aware root finder.
//!
//! Coefficients are stored in ascending degree order. Polynomials with real
//! coefficients are routed through a balanced companion-matrix eigenvalue
//! solve; genuinely complex inputs fall back to Aberth-Ehrlich iteration.

use crate::error::{Error, Result};
use num_complex::Complex64;
use std::ops::{Add, Mul, Sub};

pub const DEFAULT_ROOT_TOL: f64 = 1e-12;

/// Relative threshold under which trailing coefficients are trimmed.
const TRIM_EPS: f64 = 1e-13;

#[derive(Clone, Debug, PartialEq)]
pub struct Polynomial {
    coeffs: Vec<Complex64>,
}

impl Polynomial {
    /// Builds a polynomial from ascending-degree coefficients, trimming
    /// trailing entries that are negligible against the largest coefficient.
    pub fn new(coeffs: Vec<Complex64>) -> Self {
        let mut p = Polynomial { coeffs };
        p.trim();
        p
    }

    pub fn from_real(coeffs: &[f64]) -> Self {
        Self::new(coeffs.iter().map(|&c| Complex64::new(c, 0.0)).collect())
    }

    pub fn zero() -> Self {
        Polynomial { coeffs: vec![] }
    }

    pub fn constant(c: Complex64) -> Self {
        Self::new(vec![c])
    }

    pub fn one() -> Self {
        Self::constant(Complex64::new(1.0, 0.0))
    }

    /// Monomial `coef * s^power`.
    pub fn monomial(coef: Complex64, power: usize) -> Self {
        let mut coeffs = vec![Complex64::default(); power + 1];
        coeffs[power] = coef;
        Self::new(coeffs)
    }

    pub fn coeffs(&self) -> &[Complex64] {
        &self.coeffs
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.is_empty()
    }

    /// Degree of the polynomial; zero for constants and the zero polynomial.
    pub fn degree(&self) -> usize {
        self.coeffs.len().saturating_sub(1)
    }

    pub fn leading(&self) -> Complex64 {
        self.coeffs.last().copied().unwrap_or_default()
    }

    pub fn max_coeff_norm(&self) -> f64 {
        self.coeffs.iter().map(|c| c.norm()).fold(0.0, f64::max)
    }

    fn trim(&mut self) {
        let scale = self.max_coeff_norm();
        if scale == 0.0 {
            self.coeffs.clear();
            return;
        }
        while let Some(last) = self.coeffs.last() {
            if last.norm() <= TRIM_EPS * scale && self.coeffs.len() > 1 {
                self.coeffs.pop();
            } else {
                break;
            }
        }
        if self.coeffs.len() == 1 && self.coeffs[0].norm() <= TRIM_EPS * scale {
            self.coeffs.clear();
        }
    }

    pub fn eval(&self, s: Complex64) -> Complex64 {
        let mut acc = Complex64::default();
        for &c in self.coeffs.iter().rev() {
            acc = acc * s + c;
        }
        acc
    }

    pub fn derivative(&self) -> Polynomial {
        if self.coeffs.len() <= 1 {
            return Polynomial::zero();
        }
        Polynomial::new(
            self.coeffs[1..]
                .iter()
                .enumerate()
                .map(|(i, &c)| c * (i as f64 + 1.0))
                .collect(),
        )
    }

    pub fn scale(&self, k: Complex64) -> Polynomial {
        Polynomial::new(self.coeffs.iter().map(|&c| c * k).collect())
    }

    /// `p(k * s)`: substitutes a scaled argument.
    pub fn compose_scale(&self, k: Complex64) -> Polynomial {
        let mut pow = Complex64::new(1.0, 0.0);
        Polynomial::new(
            self.coeffs
                .iter()
                .map(|&c| {
                    let r = c * pow;
                    pow *= k;
                    r
                })
                .collect(),
        )
    }

    pub fn pow(&self, n: usize) -> Polynomial {
        let mut acc = Polynomial::one();
        for _ in 0..n {
            acc = &acc * self;
        }
        acc
    }

    /// Expands `lead * prod (s - r_i)^{m_i}`.
    pub fn from_roots(lead: Complex64, roots: &[(Complex64, usize)]) -> Polynomial {
        let mut acc = Polynomial::constant(lead);
        for &(r, m) in roots {
            let factor = Polynomial::new(vec![-r, Complex64::new(1.0, 0.0)]);
            for _ in 0..m {
                acc = &acc * &factor;
            }
        }
        acc
    }

    /// Taylor coefficients of `p` about the point `a`, i.e. coefficients of
    /// `p(a + t)` in powers of `t`.
    pub fn shift(&self, a: Complex64) -> Polynomial {
        let mut c = self.coeffs.clone();
        let n = c.len();
        // repeated synthetic division by (s - a)
        for i in 0..n {
            for j in (i..n.saturating_sub(1)).rev() {
                let next = c[j + 1];
                c[j] = c[j] + next * a;
            }
        }
        Polynomial { coeffs: c }
    }

    /// Divides by `s`, assuming the constant term is (numerically) zero.
    pub fn deflate_zero_root(&self) -> Polynomial {
        debug_assert!(
            self.coeffs
                .first()
                .map(|c| c.norm() <= 1e-9 * (1.0 + self.max_coeff_norm()))
                .unwrap_or(true),
            "constant term not negligible"
        );
        if self.coeffs.len() <= 1 {
            return Polynomial::zero();
        }
        Polynomial::new(self.coeffs[1..].to_vec())
    }

    /// True when every coefficient is (numerically) real.
    pub fn is_real(&self) -> bool {
        let scale = 1.0 + self.max_coeff_norm();
        self.coeffs.iter().all(|c| c.im.abs() <= 1e-12 * scale)
    }

    /// Drops negligible imaginary parts; the polynomial must satisfy
    /// `is_real` beforehand.
    pub fn into_real(self) -> Polynomial {
        Polynomial::new(
            self.coeffs
                .into_iter()
                .map(|c| Complex64::new(c.re, 0.0))
                .collect(),
        )
    }
}

impl Add for &Polynomial {
    type Output = Polynomial;
    fn add(self, rhs: &Polynomial) -> Polynomial {
        let n = self.coeffs.len().max(rhs.coeffs.len());
        let mut out = vec![Complex64::default(); n];
        for (i, &c) in self.coeffs.iter().enumerate() {
            out[i] += c;
        }
        for (i, &c) in rhs.coeffs.iter().enumerate() {
            out[i] += c;
        }
        Polynomial::new(out)
    }
}

impl Sub for &Polynomial {
    type Output = Polynomial;
    fn sub(self, rhs: &Polynomial) -> Polynomial {
        let n = self.coeffs.len().max(rhs.coeffs.len());
        let mut out = vec![Complex64::default(); n];
        for (i, &c) in self.coeffs.iter().enumerate() {
            out[i] += c;
        }
        for (i, &c) in rhs.coeffs.iter().enumerate() {
            out[i] -= c;
        }
        Polynomial::new(out)
    }
}

impl Mul for &Polynomial {
    type Output = Polynomial;
    fn mul(self, rhs: &Polynomial) -> Polynomial {
        if self.is_zero() || rhs.is_zero() {
            return Polynomial::zero();
        }
        let mut out = vec![Complex64::default(); self.coeffs.len() + rhs.coeffs.len() - 1];
        for (i, &a) in self.coeffs.iter().enumerate() {
            for (j, &b) in rhs.coeffs.iter().enumerate() {
                out[i + j] += a * b;
            }
        }
        Polynomial::new(out)
    }
}

/// A located root with its clustered multiplicity.
#[derive(Clone, Copy, Debug)]
pub struct Root {
    pub location: Complex64,
    pub multiplicity: usize,
}

/// All roots of a polynomial, multiplicity-aware, with the worst residual of
/// the monic-scaled input over the returned locations.
#[derive(Clone, Debug, Default)]
pub struct RootSet {
    pub roots: Vec<Root>,
    pub residual_bound: f64,
}

impl RootSet {
    pub fn total_multiplicity(&self) -> usize {
        self.roots.iter().map(|r| r.multiplicity).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.roots.is_empty()
    }

    /// Product of the root locations with multiplicity.
    pub fn product(&self) -> Complex64 {
        self.roots.iter().fold(Complex64::new(1.0, 0.0), |acc, r| {
            acc * r.location.powu(r.multiplicity as u32)
        })
    }

    pub fn iter_with_multiplicity(&self) -> impl Iterator<Item = Complex64> + '_ {
        self.roots
            .iter()
            .flat_map(|r| std::iter::repeat(r.location).take(r.multiplicity))
    }
}

/// Roots split by the sign of their real part.
#[derive(Clone, Debug, Default)]
pub struct HalfPlaneSplit {
    pub minus: RootSet,
    pub plus: RootSet,
    pub axis: RootSet,
}

/// Finds all complex roots of `p` with multiplicities.
///
/// Roots closer than `cluster_radius = 2e-5 * (1 + max|root|)` are merged
/// into a single root of summed multiplicity at their centroid; this absorbs
/// the eigenvalue scatter of roots of low multiplicity. Callers that know
/// the pole structure exactly should prefer passing it along instead of
/// relying on the clustering.
pub fn find_roots(p: &Polynomial, tol: f64) -> Result<RootSet> {
    if p.is_zero() || p.degree() == 0 {
        return Err(Error::InvalidModel(
            "root finding requires degree >= 1".into(),
        ));
    }
    if !p.coeffs().iter().all(|c| c.re.is_finite() && c.im.is_finite()) {
        return Err(Error::InvalidModel("non-finite polynomial coefficient".into()));
    }
    let lead = p.leading();
    let monic: Vec<Complex64> = p.coeffs().iter().map(|&c| c / lead).collect();
    let n = monic.len() - 1;

    let raw = if n == 1 {
        vec![-monic[0]]
    } else if n == 2 {
        solve_quadratic(monic[0], monic[1])
    } else if p.is_real() {
        companion_eigenvalues(&monic, n)?
    } else {
        aberth(&monic, tol)?
    };

    let raw = symmetrize_conjugates(raw, p.is_real());
    let max_abs = raw.iter().map(|r| r.norm()).fold(0.0, f64::max);
    let cluster_radius = 2e-5 * (1.0 + max_abs);
    let roots = cluster(raw, cluster_radius);

    let monic_poly = Polynomial::new(monic);
    let residual_bound = roots
        .iter()
        .map(|r| monic_poly.eval(r.location).norm())
        .fold(0.0, f64::max);

    Ok(RootSet {
        roots,
        residual_bound,
    })
}

/// Splits a root set by half-plane: Re < -axis_eps, Re > axis_eps, |Re| <= axis_eps.
pub fn classify_halfplane(r: &RootSet, axis_eps: f64) -> HalfPlaneSplit {
    let mut split = HalfPlaneSplit::default();
    for root in &r.roots {
        let bucket = if root.location.re < -axis_eps {
            &mut split.minus
        } else if root.location.re > axis_eps {
            &mut split.plus
        } else {
            &mut split.axis
        };
        bucket.roots.push(*root);
    }
    split.minus.residual_bound = r.residual_bound;
    split.plus.residual_bound = r.residual_bound;
    split.axis.residual_bound = r.residual_bound;
    split
}

fn solve_quadratic(c0: Complex64, c1: Complex64) -> Vec<Complex64> {
    // s^2 + c1 s + c0
    let disc = (c1 * c1 - 4.0 * c0).sqrt();
    // pick the sign that avoids cancellation
    let q = if (c1 + disc).norm() >= (c1 - disc).norm() {
        -(c1 + disc) / 2.0
    } else {
        -(c1 - disc) / 2.0
    };
    if q.norm() == 0.0 {
        vec![Complex64::default(), -c1]
    } else {
        vec![q, c0 / q]
    }
}

fn companion_eigenvalues(monic: &[Complex64], n: usize) -> Result<Vec<Complex64>> {
    use nalgebra::DMatrix;
    // Variable scaling s = gamma * t equilibrates coefficient magnitudes
    // before the (unbalanced) QR iteration.
    let a0 = monic[0].norm();
    let gamma = if a0 > 0.0 { a0.powf(1.0 / n as f64) } else { 1.0 };
    let gamma = gamma.clamp(1e-8, 1e8);
    let mut scaled = vec![0.0f64; n + 1];
    let mut g = 1.0;
    for (k, slot) in scaled.iter_mut().enumerate() {
        *slot = monic[k].re * g;
        g *= gamma;
    }
    let lead = scaled[n];
    let mut m = DMatrix::<f64>::zeros(n, n);
    for i in 1..n {
        m[(i, i - 1)] = 1.0;
    }
    for i in 0..n {
        m[(i, n - 1)] = -scaled[i] / lead;
    }
    let schur = nalgebra::linalg::Schur::try_new(m, 1e-14, 10_000).ok_or(
        Error::NonConvergence {
            degree: n,
            residual: f64::NAN,
        },
    )?;
    let eig = schur.complex_eigenvalues();
    Ok(eig.iter().map(|e| Complex64::new(e.re, e.im) * gamma).collect())
}

fn aberth(monic: &[Complex64], tol: f64) -> Result<Vec<Complex64>> {
    let n = monic.len() - 1;
    let p = Polynomial::new(monic.to_vec());
    let dp = p.derivative();
    // Cauchy bound on root magnitudes
    let bound = 1.0 + monic[..n].iter().map(|c| c.norm()).fold(0.0, f64::max);
    let mut z: Vec<Complex64> = (0..n)
        .map(|k| {
            let angle = 2.0 * std::f64::consts::PI * k as f64 / n as f64 + 0.4;
            bound * 0.8 * Complex64::new(angle.cos(), angle.sin())
        })
        .collect();
    let max_iter = 500;
    for _ in 0..max_iter {
        let mut max_step = 0.0f64;
        for i in 0..n {
            let pv = p.eval(z[i]);
            let dv = dp.eval(z[i]);
            let ratio = if dv.norm() > 0.0 { pv / dv } else { pv };
            let mut sum = Complex64::default();
            for j in 0..n {
                if j != i {
                    let d = z[i] - z[j];
                    if d.norm() > 1e-300 {
                        sum += 1.0 / d;
                    }
                }
            }
            let denom = Complex64::new(1.0, 0.0) - ratio * sum;
            let step = if denom.norm() > 1e-300 { ratio / denom } else { ratio };
            z[i] -= step;
            max_step = max_step.max(step.norm() / (1.0 + z[i].norm()));
        }
        if max_step < tol {
            return Ok(z);
        }
    }
    // Accept a stalled iteration only if the residuals are already small
    // (multiple roots converge linearly and can trip the step criterion).
    let worst = z.iter().map(|&zi| p.eval(zi).norm()).fold(0.0, f64::max);
    if worst < tol.sqrt() {
        Ok(z)
    } else {
        Err(Error::NonConvergence {
            degree: n,
            residual: worst,
        })
    }
}

fn symmetrize_conjugates(mut roots: Vec<Complex64>, real_input: bool) -> Vec<Complex64> {
    if !real_input {
        return roots;
    }
    let scale = 1.0 + roots.iter().map(|r| r.norm()).fold(0.0, f64::max);
    let snap = 1e-10 * scale;
    for r in roots.iter_mut() {
        if r.im.abs() <= snap {
            r.im = 0.0;
        }
    }
    // average conjugate partners so the set is exactly closed under conjugation
    let n = roots.len();
    let mut used = vec![false; n];
    for i in 0..n {
        if used[i] || roots[i].im == 0.0 {
            continue;
        }
        let target = roots[i].conj();
        let mut best: Option<(usize, f64)> = None;
        for (j, &cand) in roots.iter().enumerate() {
            if j != i && !used[j] && cand.im * roots[i].im < 0.0 {
                let d = (cand - target).norm();
                if best.map(|(_, bd)| d < bd).unwrap_or(true) {
                    best = Some((j, d));
                }
            }
        }
        if let Some((j, d)) = best {
            if d <= 1e-7 * scale {
                let avg = (roots[i] + roots[j].conj()) / 2.0;
                roots[i] = avg;
                roots[j] = avg.conj();
                used[i] = true;
                used[j] = true;
            }
        }
    }
    roots
}

fn cluster(roots: Vec<Complex64>, radius: f64) -> Vec<Root> {
    let n = roots.len();
    let mut assigned = vec![false; n];
    let mut out = Vec::new();
    for i in 0..n {
        if assigned[i] {
            continue;
        }
        // grow the connected component of points within `radius`
        let mut members = vec![i];
        assigned[i] = true;
        let mut cursor = 0;
        while cursor < members.len() {
            let m = members[cursor];
            for j in 0..n {
                if !assigned[j] && (roots[j] - roots[m]).norm() <= radius {
                    assigned[j] = true;
                    members.push(j);
                }
            }
            cursor += 1;
        }
        let centroid =
            members.iter().map(|&k| roots[k]).sum::<Complex64>() / members.len() as f64;
        out.push(Root {
            location: centroid,
            multiplicity: members.len(),
        });
    }
    out.sort_by(|a, b| {
        (a.location.re, a.location.im)
            .partial_cmp(&(b.location.re, b.location.im))
            .unwrap()
    });
    out
}

/// A ratio of two polynomials.
#[derive(Clone, Debug)]
pub struct RationalFn {
    pub num: Polynomial,
    pub den: Polynomial,
}

impl RationalFn {
    pub fn new(num: Polynomial, den: Polynomial) -> Self {
        assert!(!den.is_zero(), "denominator is the zero polynomial");
        RationalFn { num, den }
    }

    pub fn eval(&self, s: Complex64) -> Complex64 {
        self.num.eval(s) / self.den.eval(s)
    }

    /// `r(k * s)`.
    pub fn compose_scale(&self, k: Complex64) -> RationalFn {
        RationalFn::new(self.num.compose_scale(k), self.den.compose_scale(k))
    }

    /// Limit at `s -> infinity`; zero when the function is strictly proper.
    pub fn limit_at_infinity(&self) -> Complex64 {
        if self.num.is_zero() {
            return Complex64::default();
        }
        if self.num.degree() < self.den.degree() {
            Complex64::default()
        } else {
            self.num.leading() / self.den.leading()
        }
    }
}
