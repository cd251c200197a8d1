//! Exact inversion of rational Laplace-Stieltjes transforms into
//! exponential-polynomial mixtures, plus closed-form functionals (mean,
//! stop-loss, quantiles, convolution) on those mixtures.

use crate::error::{Error, Result};
use crate::polyrat::{find_roots, Polynomial, RationalFn, Root, DEFAULT_ROOT_TOL};
use num_complex::Complex64;

/// One term `coef * t^power * exp(rate * t)` with Re(rate) < 0.
#[derive(Clone, Copy, Debug)]
pub struct Term {
    pub coef: Complex64,
    pub power: usize,
    pub rate: Complex64,
}

/// Tail function of a nonnegative distribution with a possible atom at zero:
/// P(X > u) = sum of the terms for u >= 0, and P(X = 0) = `atom0`.
///
/// Complex terms occur in conjugate pairs; evaluation takes the real part.
#[derive(Clone, Debug, Default)]
pub struct ExpPolyMix {
    pub atom0: f64,
    pub terms: Vec<Term>,
    /// Largest term coefficient seen before any merging. Coefficients of this
    /// basis cancel at evaluation when rates cluster, so this bounds the
    /// conditioning: pointwise values carry roundoff of order
    /// `coef_scale * eps`.
    pub coef_scale: f64,
}

fn factorial(n: usize) -> f64 {
    (1..=n).map(|k| k as f64).product()
}

fn binomial(n: usize, k: usize) -> f64 {
    let mut r = 1.0;
    for i in 0..k {
        r *= (n - i) as f64 / (k - i) as f64;
    }
    r
}

/// integral over (t, inf) of u^p e^{ru} du, Re r < 0, expressed as
/// e^{rt} * sum_j (p!/j!) t^j / (-r)^{p-j+1}
fn upper_incomplete_terms(coef: Complex64, p: usize, r: Complex64) -> Vec<Term> {
    (0..=p)
        .map(|j| Term {
            coef: coef * factorial(p) / factorial(j) / (-r).powu((p - j + 1) as u32),
            power: j,
            rate: r,
        })
        .collect()
}

impl ExpPolyMix {
    pub fn zero() -> Self {
        ExpPolyMix::default()
    }

    /// Point mass at zero (identity for convolution).
    pub fn point_mass_at_zero() -> Self {
        ExpPolyMix {
            atom0: 1.0,
            ..Default::default()
        }
    }

    /// Tail of Erlang(order, rate): sum_{j<order} e^{-rate t}(rate t)^j / j!
    pub fn erlang_tail(order: usize, rate: f64) -> Self {
        let terms = (0..order)
            .map(|j| Term {
                coef: Complex64::from(rate.powi(j as i32) / factorial(j)),
                power: j,
                rate: Complex64::from(-rate),
            })
            .collect();
        ExpPolyMix {
            atom0: 0.0,
            terms,
            coef_scale: 0.0,
        }
    }

    /// Density of Erlang(order, rate) as a term list (atom0 unused).
    pub fn erlang_density(order: usize, rate: f64) -> Self {
        ExpPolyMix {
            atom0: 0.0,
            terms: vec![Term {
                coef: Complex64::from(rate.powi(order as i32) / factorial(order - 1)),
                power: order - 1,
                rate: Complex64::from(-rate),
            }],
            coef_scale: 0.0,
        }
    }

    pub fn scale(&self, w: f64) -> Self {
        ExpPolyMix {
            atom0: self.atom0 * w,
            terms: self
                .terms
                .iter()
                .map(|t| Term {
                    coef: t.coef * w,
                    ..*t
                })
                .collect(),
            coef_scale: self.coef_scale * w.abs(),
        }
    }

    pub fn add(&self, other: &Self) -> Self {
        let mut terms = self.terms.clone();
        terms.extend_from_slice(&other.terms);
        ExpPolyMix {
            atom0: self.atom0 + other.atom0,
            terms,
            coef_scale: self.coef_scale.max(other.coef_scale),
        }
    }

    /// Merges terms sharing (rate, power) and drops negligible ones.
    pub fn combined(&self) -> Self {
        let scale = self
            .terms
            .iter()
            .map(|t| t.coef.norm())
            .fold(self.atom0.abs(), f64::max)
            .max(1e-300);
        let mut merged: Vec<Term> = Vec::new();
        for t in &self.terms {
            let rate_tol = 1e-7 * (1.0 + t.rate.norm());
            if let Some(m) = merged
                .iter_mut()
                .find(|m| m.power == t.power && (m.rate - t.rate).norm() < rate_tol)
            {
                m.coef += t.coef;
            } else {
                merged.push(*t);
            }
        }
        merged.retain(|t| t.coef.norm() > 1e-13 * scale);
        ExpPolyMix {
            atom0: self.atom0,
            terms: merged,
            coef_scale: self.coef_scale.max(scale),
        }
    }

    pub fn evaluate(&self, t: f64) -> f64 {
        self.terms
            .iter()
            .map(|term| (term.coef * (term.rate * t).exp()).re * t.powi(term.power as i32))
            .sum()
    }

    /// integral over (t, inf) of the mixture, in closed form.
    pub fn integral_tail(&self, t: f64) -> f64 {
        self.terms
            .iter()
            .flat_map(|term| upper_incomplete_terms(term.coef, term.power, term.rate))
            .map(|term| (term.coef * (term.rate * t).exp()).re * t.powi(term.power as i32))
            .sum()
    }

    /// Mean of the distribution: integral of the tail over (0, inf).
    pub fn mean(&self) -> f64 {
        self.integral_tail(0.0)
    }

    /// The function t -> integral over (t, inf) of this mixture, itself as a
    /// term list (atom0 is dropped).
    pub fn integral_mix(&self) -> ExpPolyMix {
        ExpPolyMix {
            atom0: 0.0,
            terms: self
                .terms
                .iter()
                .flat_map(|t| upper_incomplete_terms(t.coef, t.power, t.rate))
                .collect(),
            coef_scale: self.coef_scale,
        }
        .combined()
    }

    /// Stop-loss E(X - t)_+ for t >= 0.
    pub fn stop_loss(&self, t: f64) -> f64 {
        self.integral_tail(t.max(0.0))
    }

    /// Smallest u with P(X <= u) >= q, by bisection to 1e-10.
    pub fn quantile(&self, q: f64) -> f64 {
        assert!((0.0..1.0).contains(&q));
        let level = 1.0 - q;
        if self.evaluate(0.0) <= level + 1e-15 {
            return 0.0;
        }
        let mut hi = 1.0;
        while self.evaluate(hi) > level {
            hi *= 2.0;
            if hi > 1e12 {
                return hi;
            }
        }
        let mut lo = 0.0;
        while hi - lo > 1e-10 * (1.0 + hi) {
            let mid = 0.5 * (lo + hi);
            if self.evaluate(mid) > level {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        0.5 * (lo + hi)
    }

    /// Density of the absolutely continuous part: -d/du of the tail.
    pub fn density(&self) -> ExpPolyMix {
        let mut terms = Vec::new();
        for t in &self.terms {
            terms.push(Term {
                coef: -t.coef * t.rate,
                power: t.power,
                rate: t.rate,
            });
            if t.power > 0 {
                terms.push(Term {
                    coef: -t.coef * t.power as f64,
                    power: t.power - 1,
                    rate: t.rate,
                });
            }
        }
        ExpPolyMix {
            atom0: 0.0,
            terms,
            coef_scale: self.coef_scale,
        }
        .combined()
    }

    /// LST E e^{-sX} reconstructed from the mixture, for Re s >= 0.
    pub fn transform_at(&self, s: Complex64) -> Complex64 {
        // E e^{-sX} = 1 - s * integral e^{-su} P(X>u) du
        let lap: Complex64 = self
            .terms
            .iter()
            .map(|t| t.coef * factorial(t.power) / (s - t.rate).powu((t.power + 1) as u32))
            .sum();
        Complex64::from(1.0) - s * lap
    }

    /// Distribution of the independent sum, as a tail mixture.
    pub fn convolve(&self, other: &Self) -> Self {
        let fx = self.density();
        let fy = other.density();
        let mut dens: Vec<Term> = Vec::new();
        for t in &fx.terms {
            dens.push(Term {
                coef: t.coef * other.atom0,
                ..*t
            });
        }
        for t in &fy.terms {
            dens.push(Term {
                coef: t.coef * self.atom0,
                ..*t
            });
        }
        for tx in &fx.terms {
            for ty in &fy.terms {
                dens.extend(convolve_terms(tx, ty));
            }
        }
        let tail: Vec<Term> = dens
            .iter()
            .flat_map(|t| upper_incomplete_terms(t.coef, t.power, t.rate))
            .collect();
        ExpPolyMix {
            atom0: self.atom0 * other.atom0,
            terms: tail,
            coef_scale: self.coef_scale.max(other.coef_scale),
        }
        .combined()
    }
}

/// Density convolution of c1 t^{A-1} e^{r1 t} and c2 t^{B-1} e^{r2 t} via the
/// partial-fraction expansion of 1/((s-r1)^A (s-r2)^B).
fn convolve_terms(tx: &Term, ty: &Term) -> Vec<Term> {
    let a = tx.power + 1;
    let b = ty.power + 1;
    let scale = tx.coef * ty.coef * factorial(tx.power) * factorial(ty.power);
    let rate_tol = 1e-7 * (1.0 + tx.rate.norm().max(ty.rate.norm()));
    if (tx.rate - ty.rate).norm() < rate_tol {
        // merged pole of order a+b
        return vec![Term {
            coef: scale / factorial(a + b - 1),
            power: a + b - 1,
            rate: (tx.rate + ty.rate) / 2.0,
        }];
    }
    let mut out = Vec::with_capacity(a + b);
    let d12 = tx.rate - ty.rate;
    for j in 0..a {
        // coefficient of 1/(s-r1)^{a-j}
        let cj = Complex64::from((-1.0f64).powi(j as i32) * binomial(b - 1 + j, j))
            / d12.powu((b + j) as u32);
        out.push(Term {
            coef: scale * cj / factorial(a - j - 1),
            power: a - j - 1,
            rate: tx.rate,
        });
    }
    let d21 = -d12;
    for j in 0..b {
        let cj = Complex64::from((-1.0f64).powi(j as i32) * binomial(a - 1 + j, j))
            / d21.powu((a + j) as u32);
        out.push(Term {
            coef: scale * cj / factorial(b - j - 1),
            power: b - j - 1,
            rate: ty.rate,
        });
    }
    out
}

/// Inverts a proper rational LST of a nonnegative distribution into its tail,
/// locating the poles numerically. Prefer [`invert_tail_at_poles`] when the
/// pole structure is known exactly: numerically-split multiple poles ruin the
/// partial-fraction residues.
pub fn invert_tail(rf: &RationalFn) -> Result<ExpPolyMix> {
    if rf.den.degree() == 0 {
        return invert_tail_at_poles(rf, &[]);
    }
    let roots = find_roots(&rf.den, DEFAULT_ROOT_TOL)?;
    invert_tail_at_poles(rf, &roots.roots)
}

/// Inverts a proper rational LST of a nonnegative distribution into its tail,
/// using the given pole set (which must carry the full denominator degree).
///
/// The transform must satisfy T*(0) = 1; its value at infinity becomes the
/// atom at zero, and all poles must lie strictly in Re s < 0.
pub fn invert_tail_at_poles(rf: &RationalFn, poles: &[Root]) -> Result<ExpPolyMix> {
    let n = &rf.num;
    let d = &rf.den;
    if n.degree() > d.degree() {
        return Err(Error::InvalidDistribution(
            "transform does not vanish or stay bounded at infinity".into(),
        ));
    }
    let at0 = rf.eval(Complex64::from(0.0));
    if (at0 - Complex64::from(1.0)).norm() > 1e-8 {
        return Err(Error::InvalidDistribution(format!(
            "transform value at 0 is {at0}, expected 1"
        )));
    }
    let atom0 = rf.limit_at_infinity().re;

    // tail transform: (1 - T*(s))/s = (D - N)/(s D); the zero of D - N at the
    // origin is structural and removed by exact deflation
    let p = (d - n).deflate_zero_root();
    if p.is_zero() {
        return Ok(ExpPolyMix {
            atom0: 1.0,
            ..Default::default()
        });
    }

    let covered: usize = poles.iter().map(|r| r.multiplicity).sum();
    if covered != d.degree() {
        return Err(Error::InvalidDistribution(format!(
            "pole multiplicities cover {covered} of denominator degree {}",
            d.degree()
        )));
    }
    let axis_eps = 1e-9 * (1.0 + poles.iter().map(|r| r.location.norm()).fold(0.0, f64::max));
    let mut terms = Vec::new();
    for root in poles {
        if root.location.re > -axis_eps {
            return Err(Error::PoleOnAxis(root.location));
        }
        let m = root.multiplicity;
        let ps = p.shift(root.location);
        let ds = d.shift(root.location);
        // D(s) = (s-r)^m Q(s): Q coefficients start at index m
        let dc = ds.coeffs();
        let q: Vec<Complex64> = dc.iter().skip(m).copied().collect();
        if q.is_empty() || q[0].norm() < 1e-300 {
            return Err(Error::SingularMatrix);
        }
        let pc = ps.coeffs();
        // power-series division P~/Q~ to order m-1
        let mut e = vec![Complex64::default(); m];
        for k in 0..m {
            let mut acc = if k < pc.len() {
                pc[k]
            } else {
                Complex64::default()
            };
            for i in 1..=k {
                if i < q.len() {
                    acc -= q[i] * e[k - i];
                }
            }
            e[k] = acc / q[0];
        }
        // e_k / (s-r)^{m-k}  <->  e_k t^{m-k-1} e^{rt} / (m-k-1)!
        for (k, &ek) in e.iter().enumerate() {
            terms.push(Term {
                coef: ek / factorial(m - k - 1),
                power: m - k - 1,
                rate: root.location,
            });
        }
    }
    Ok(ExpPolyMix {
        atom0,
        terms,
        coef_scale: 0.0,
    }
    .combined())
}

/// A rational LST kept in factored form:
/// `lead * poly(s) * prod (s - a_i)^{p_i} / prod (s - b_j)^{m_j}`.
///
/// Inverting from this representation avoids the catastrophic cancellation
/// that expanding the products into the monomial basis and Taylor-shifting
/// them back would introduce (the round trip loses a factor of roughly the
/// central binomial coefficient of the total degree).
#[derive(Clone, Debug)]
pub struct FactoredLst {
    pub lead: Complex64,
    /// Additional numerator factor that is not available in root form; keep
    /// its degree small, it is the only part that goes through a Taylor shift.
    pub poly: Polynomial,
    pub num_roots: Vec<Root>,
    /// Pole locations must be pairwise distinct (merge coincident ones into a
    /// single entry with the summed multiplicity).
    pub den_roots: Vec<Root>,
}

impl FactoredLst {
    pub fn eval(&self, s: Complex64) -> Complex64 {
        let mut v = self.lead * self.poly.eval(s);
        for r in &self.num_roots {
            v *= (s - r.location).powu(r.multiplicity as u32);
        }
        for r in &self.den_roots {
            v /= (s - r.location).powu(r.multiplicity as u32);
        }
        v
    }

    fn num_degree(&self) -> usize {
        self.poly.degree() + self.num_roots.iter().map(|r| r.multiplicity).sum::<usize>()
    }

    fn den_degree(&self) -> usize {
        self.den_roots.iter().map(|r| r.multiplicity).sum()
    }
}

/// Product of two truncated power series, mod x^m.
fn series_mul(a: &[Complex64], b: &[Complex64], m: usize) -> Vec<Complex64> {
    let mut out = vec![Complex64::default(); m];
    for (i, &ai) in a.iter().enumerate().take(m) {
        for (j, &bj) in b.iter().enumerate().take(m - i) {
            out[i + j] += ai * bj;
        }
    }
    out
}

/// Reciprocal of a truncated power series with nonzero constant term, mod x^m.
fn series_recip(a: &[Complex64], m: usize) -> Result<Vec<Complex64>> {
    if a.is_empty() || a[0].norm() < 1e-300 {
        return Err(Error::SingularMatrix);
    }
    let mut out = vec![Complex64::default(); m];
    out[0] = a[0].inv();
    for k in 1..m {
        let mut acc = Complex64::default();
        for i in 1..=k {
            if i < a.len() {
                acc += a[i] * out[k - i];
            }
        }
        out[k] = -acc / a[0];
    }
    Ok(out)
}

/// Coefficients of (x + c)^p, truncated to length m.
fn binomial_pow(c: Complex64, p: usize, m: usize) -> Vec<Complex64> {
    (0..m.min(p + 1))
        .map(|k| binomial(p, k) * c.powu((p - k) as u32))
        .collect()
}

/// Inverts a proper rational LST given in factored form into its tail. Same
/// contract as [`invert_tail_at_poles`]; preferred when numerator and
/// denominator arise as products of known linear factors.
pub fn invert_tail_factored(t: &FactoredLst) -> Result<ExpPolyMix> {
    if t.num_degree() > t.den_degree() {
        return Err(Error::InvalidDistribution(
            "transform does not stay bounded at infinity".into(),
        ));
    }
    let at0 = t.eval(Complex64::default());
    if (at0 - Complex64::from(1.0)).norm() > 1e-8 {
        return Err(Error::InvalidDistribution(format!(
            "transform value at 0 is {at0}, expected 1"
        )));
    }
    let atom0 = if t.num_degree() == t.den_degree() {
        (t.lead * t.poly.leading()).re
    } else {
        0.0
    };
    let axis_eps = 1e-9
        * (1.0
            + t.den_roots
                .iter()
                .map(|r| r.location.norm())
                .fold(0.0, f64::max));
    let mut terms = Vec::new();
    for (j, pole) in t.den_roots.iter().enumerate() {
        let r = pole.location;
        if r.re > -axis_eps {
            return Err(Error::PoleOnAxis(r));
        }
        let m = pole.multiplicity;
        // h(x) = (s - r)^m T(s) at s = r + x, mod x^m, from the factors
        let mut h = vec![Complex64::default(); m];
        h[0] = t.lead;
        let shifted = t.poly.shift(r);
        h = series_mul(&h, shifted.coeffs(), m);
        for a in &t.num_roots {
            h = series_mul(&h, &binomial_pow(r - a.location, a.multiplicity, m), m);
        }
        for (k, b) in t.den_roots.iter().enumerate() {
            if k == j {
                continue;
            }
            let f = binomial_pow(r - b.location, b.multiplicity, m);
            h = series_mul(&h, &series_recip(&f, m)?, m);
        }
        // tail transform (1 - T(s))/s: near the pole, (s - r)^m (1 - T)/s
        // = -h(x)/(r + x) mod x^m (the (s - r)^m / s piece starts at x^m)
        let geo: Vec<Complex64> = (0..m)
            .map(|k| Complex64::from(-1.0).powu(k as u32) / r.powu(k as u32 + 1))
            .collect();
        let e = series_mul(&h, &geo, m);
        // -e_k / (s-r)^{m-k}  <->  -e_k t^{m-k-1} e^{rt} / (m-k-1)!
        for (k, &ek) in e.iter().enumerate() {
            terms.push(Term {
                coef: -ek / factorial(m - k - 1),
                power: m - k - 1,
                rate: r,
            });
        }
    }
    Ok(ExpPolyMix {
        atom0,
        terms,
        coef_scale: 0.0,
    }
    .combined())
}

/// Exact E(D - t)_+ for D = U - V with independent U ~ Erlang(u_order,
/// u_rate) and V ~ Erlang(v_order, v_rate). Valid for all real t.
pub fn difference_stop_loss(
    u_order: usize,
    u_rate: f64,
    v_order: usize,
    v_rate: f64,
    t: f64,
) -> f64 {
    if t < 0.0 {
        // E(U-V-t)_+ = EU - EV - t + E(V-U-(-t))_+
        let eu = u_order as f64 / u_rate;
        let ev = v_order as f64 / v_rate;
        return eu - ev - t + difference_stop_loss(v_order, v_rate, u_order, u_rate, -t);
    }
    // stop-loss of U at x >= 0: sum_i c_i x^i e^{-u_rate x}
    // with c_i = (u_order - i) u_rate^{i-1} / i!
    // then integrate against the V density f_V(v) = v^{a-1} v_rate^a e^{-v_rate v}/(a-1)!
    let a = v_order;
    let theta = u_rate;
    let lam = v_rate;
    let mut total = 0.0;
    for i in 0..u_order {
        let ci = (u_order - i) as f64 * theta.powi(i as i32 - 1) / factorial(i);
        // integral_0^inf f_V(v) (t+v)^i e^{-theta(t+v)} dv
        let mut inner = 0.0;
        for j in 0..=i {
            // I_j = integral v^j e^{-theta v} f_V(v) dv
            let ij = lam.powi(a as i32) * factorial(j + a - 1)
                / (factorial(a - 1) * (theta + lam).powi((j + a) as i32));
            inner += binomial(i, j) * t.powi((i - j) as i32) * ij;
        }
        total += ci * (-theta * t).exp() * inner;
    }
    total
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::polyrat::Polynomial;
    use approx::assert_abs_diff_eq;

    fn exp_tail(rate: f64) -> ExpPolyMix {
        ExpPolyMix::erlang_tail(1, rate)
    }

    #[test]
    fn erlang_tail_and_density_agree() {
        let tail = ExpPolyMix::erlang_tail(3, 2.0);
        let dens = tail.density();
        let from_dens = ExpPolyMix::erlang_density(3, 2.0).combined();
        for &t in &[0.1, 0.5, 1.7] {
            assert_abs_diff_eq!(dens.evaluate(t), from_dens.evaluate(t), epsilon = 1e-12);
        }
        assert_abs_diff_eq!(tail.mean(), 1.5, epsilon = 1e-12);
        assert_abs_diff_eq!(tail.evaluate(0.0), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn invert_mm1_waiting_transform() {
        // (1 + s/2)/(1 + s): atom 1/2, tail 0.5 e^{-u}
        let rf = RationalFn::new(
            Polynomial::from_real(&[1.0, 0.5]),
            Polynomial::from_real(&[1.0, 1.0]),
        );
        let mix = invert_tail(&rf).unwrap();
        assert_abs_diff_eq!(mix.atom0, 0.5, epsilon = 1e-12);
        for &u in &[0.0, 0.3, 1.0, 4.0] {
            assert_abs_diff_eq!(mix.evaluate(u), 0.5 * (-u as f64).exp(), epsilon = 1e-12);
        }
        assert_abs_diff_eq!(mix.mean(), 0.5, epsilon = 1e-12);
    }

    #[test]
    fn invert_constant_transform_is_point_mass() {
        let rf = RationalFn::new(
            Polynomial::from_real(&[3.0]),
            Polynomial::from_real(&[3.0]),
        );
        let mix = invert_tail(&rf).unwrap();
        assert_abs_diff_eq!(mix.atom0, 1.0, epsilon = 0.0);
        assert!(mix.terms.is_empty());
    }

    #[test]
    fn invert_repeated_pole() {
        // Erlang(2, 1): 1/(1+s)^2, tail (1+u)e^{-u}
        let rf = RationalFn::new(
            Polynomial::from_real(&[1.0]),
            Polynomial::from_real(&[1.0, 2.0, 1.0]),
        );
        let mix = invert_tail(&rf).unwrap();
        for &u in &[0.0, 0.5, 2.0] {
            assert_abs_diff_eq!(
                mix.evaluate(u),
                (1.0 + u) * (-u as f64).exp(),
                epsilon = 1e-10
            );
        }
    }

    #[test]
    fn pole_on_axis_is_rejected() {
        let rf = RationalFn::new(
            Polynomial::from_real(&[0.0, 1.0]),
            Polynomial::from_real(&[0.0, 1.0, 1.0]),
        );
        assert!(matches!(invert_tail(&rf), Err(Error::PoleOnAxis(_))));
    }

    #[test]
    fn convolution_examples() {
        let e1 = exp_tail(1.0);
        let conv = e1.convolve(&e1);
        for &u in &[0.0, 0.7, 2.0] {
            assert_abs_diff_eq!(conv.evaluate(u), (1.0 + u) * (-u as f64).exp(), epsilon = 1e-12);
        }
        let e2 = exp_tail(2.0);
        let conv = e1.convolve(&e2);
        for &u in &[0.0, 0.7, 2.0] {
            assert_abs_diff_eq!(
                conv.evaluate(u),
                2.0 * (-u as f64).exp() - (-2.0 * u as f64).exp(),
                epsilon = 1e-12
            );
        }
        // point mass at zero is the identity
        let id = ExpPolyMix::point_mass_at_zero();
        let back = e1.convolve(&id);
        for &u in &[0.0, 1.0, 3.0] {
            assert_abs_diff_eq!(back.evaluate(u), e1.evaluate(u), epsilon = 1e-12);
        }
        // atom mixes propagate: (0.5 delta + 0.5 exp(1)) * exp(1)
        let half = ExpPolyMix {
            atom0: 0.5,
            terms: exp_tail(1.0).scale(0.5).terms,
            coef_scale: 0.0,
        };
        let conv = half.convolve(&e1);
        for &u in &[0.0, 0.4, 2.0] {
            let want = 0.5 * (-u as f64).exp() + 0.5 * (1.0 + u) * (-u as f64).exp();
            assert_abs_diff_eq!(conv.evaluate(u), want, epsilon = 1e-12);
        }
    }

    #[test]
    fn transform_round_trip() {
        let rf = RationalFn::new(
            Polynomial::from_real(&[2.0, 0.6]),
            Polynomial::from_real(&[2.0, 3.0, 1.0]),
        );
        let mix = invert_tail(&rf).unwrap();
        for &sv in &[0.3, 1.0, 5.0] {
            let s = Complex64::from(sv);
            assert!((mix.transform_at(s) - rf.eval(s)).norm() < 1e-12);
        }
    }

    #[test]
    fn stop_loss_and_quantile() {
        let e1 = exp_tail(1.0);
        assert_abs_diff_eq!(e1.stop_loss(1.0), (-1.0f64).exp(), epsilon = 1e-12);
        assert_abs_diff_eq!(e1.quantile(0.95), 20.0f64.ln(), epsilon = 1e-8);
        let half = ExpPolyMix {
            atom0: 0.6,
            terms: exp_tail(1.0).scale(0.4).terms,
            coef_scale: 0.0,
        };
        assert_abs_diff_eq!(half.quantile(0.5), 0.0, epsilon = 0.0);
    }

    #[test]
    fn difference_stop_loss_laplace() {
        // exp(1) - exp(1) is standard Laplace: E(D-t)_+ = e^{-t}/2 for t >= 0
        for &t in &[0.0, 0.5, 2.0] {
            assert_abs_diff_eq!(
                difference_stop_loss(1, 1.0, 1, 1.0, t),
                0.5 * (-t as f64).exp(),
                epsilon = 1e-12
            );
            assert_abs_diff_eq!(
                difference_stop_loss(1, 1.0, 1, 1.0, -t),
                t + 0.5 * (-t as f64).exp(),
                epsilon = 1e-12
            );
        }
    }

    #[test]
    fn difference_stop_loss_consistency() {
        // E(D-t)_+ - E(D-t)_- identity: E(D-t)_+ = ED - t + E(t-D)_+
        let (uo, ur, vo, vr) = (3usize, 2.0, 2usize, 1.5);
        let ed = uo as f64 / ur - vo as f64 / vr;
        for &t in &[-1.0, 0.0, 0.8, 3.0] {
            let plus = difference_stop_loss(uo, ur, vo, vr, t);
            let minus = difference_stop_loss(vo, vr, uo, ur, -t);
            assert_abs_diff_eq!(plus - minus, ed - t, epsilon = 1e-10);
        }
        // numeric cross-check by quadrature over the V density
        let t = 0.7;
        let mut num = 0.0;
        let h = 1e-3;
        let mut v: f64 = h / 2.0;
        while v < 60.0 {
            let fv = vr.powi(vo as i32) * v.powi(vo as i32 - 1) * (-vr * v).exp()
                / factorial(vo - 1);
            // E(U - (t+v))_+ via the Erlang tail integral
            let sl = ExpPolyMix::erlang_tail(uo, ur).integral_tail(t + v);
            num += fv * sl * h;
            v += h;
        }
        assert_abs_diff_eq!(
            difference_stop_loss(uo, ur, vo, vr, t),
            num,
            epsilon = 1e-5
        );
    }
}
