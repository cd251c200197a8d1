//! Wiener-Hopf factorization of 1 - E e^{-sY} for Y = B/c - A with a
//! rational transform f/g: locates the roots of g - f and of g in each
//! half-plane, checks the root counts match, and assembles the
//! waiting-time and idle-period transforms from them.

use crate::error::{Error, Result};
use crate::inversion::FactoredLst;
use crate::models::DependenceModel;
use crate::polyrat::{
    classify_halfplane, find_roots, Polynomial, RationalFn, Root, DEFAULT_ROOT_TOL,
};
use num_complex::Complex64;

/// Half-plane root data of the factorization.
///
/// `s_minus` / `s_plus` are the roots of g - f (the numerator of
/// 1 - E e^{-sY}); the structural root at the origin is kept in `s_plus`.
/// `stilde_minus` / `stilde_plus` are the roots of g. Shared roots of f and
/// g cancel from both sides before the counts are checked.
#[derive(Clone, Debug)]
pub struct Factorization {
    pub s_minus: Vec<Root>,
    pub s_plus: Vec<Root>,
    pub stilde_minus: Vec<Root>,
    pub stilde_plus: Vec<Root>,
    /// worst monic-scaled residual across both root solves
    pub residual_bound: f64,
}

fn total(roots: &[Root]) -> usize {
    roots.iter().map(|r| r.multiplicity).sum()
}

fn with_mult(roots: &[Root]) -> Vec<(Complex64, usize)> {
    roots.iter().map(|r| (r.location, r.multiplicity)).collect()
}

/// Removes root pairs shared (within cluster tolerance) between the two
/// lists, but only where f itself vanishes: a common root of g - f and g is
/// necessarily a common factor of f and g and cancels from the ratio.
fn cancel_shared(a: &mut Vec<Root>, b: &mut Vec<Root>, f: &Polynomial) {
    for ra in a.iter_mut() {
        let tol = 1e-7 * (1.0 + ra.location.norm());
        // relative residual of f at the candidate root
        let fscale: f64 = f
            .coeffs()
            .iter()
            .enumerate()
            .map(|(k, c)| c.norm() * ra.location.norm().powi(k as i32))
            .sum();
        if f.eval(ra.location).norm() > 1e-8 * fscale.max(1e-300) {
            continue;
        }
        if let Some(rb) = b
            .iter_mut()
            .find(|rb| (rb.location - ra.location).norm() < tol)
        {
            let drop = ra.multiplicity.min(rb.multiplicity);
            ra.multiplicity -= drop;
            rb.multiplicity -= drop;
        }
    }
    a.retain(|r| r.multiplicity > 0);
    b.retain(|r| r.multiplicity > 0);
}

/// Factorizes 1 - yt(s) for a rational transform yt = f/g of Y = B/c - A.
///
/// Requires E Y < 0 (checked by the caller); fails with
/// [`Error::RoucheCountMismatch`] when the located half-plane root counts are
/// inconsistent, which flags an unreliable root solve rather than a modeling
/// problem.
pub fn factorize(yt: &RationalFn) -> Result<Factorization> {
    let g = if yt.den.is_real() {
        yt.den.clone().into_real()
    } else {
        yt.den.clone()
    };
    let g_roots = find_roots(&g, DEFAULT_ROOT_TOL)?;
    factorize_with_g_roots(yt, g_roots.roots, g_roots.residual_bound)
}

/// Factorization with the denominator roots supplied exactly (multiple roots
/// of g are structural in every model family, and numeric clustering cannot
/// recover high multiplicities reliably).
pub fn factorize_with_g_roots(
    yt: &RationalFn,
    g_roots: Vec<Root>,
    g_residual: f64,
) -> Result<Factorization> {
    let f = &yt.num;
    let g = &yt.den;
    let gmf_full = g - f;
    // 1 - f/g vanishes at the origin; deflate that root exactly
    let origin_gap = gmf_full.coeffs().first().map(|c| c.norm()).unwrap_or(0.0);
    if origin_gap > 1e-9 * (1.0 + gmf_full.max_coeff_norm()) {
        return Err(Error::InvalidModel(format!(
            "transform of Y is not 1 at the origin (gap {origin_gap:.3e})"
        )));
    }
    let gmf = gmf_full.deflate_zero_root();
    if gmf.is_zero() {
        return Err(Error::InvalidModel("degenerate transform: f == g".into()));
    }
    let gmf = if gmf.is_real() { gmf.into_real() } else { gmf };

    let gmf_roots = find_roots(&gmf, DEFAULT_ROOT_TOL)?;
    let g_roots = crate::polyrat::RootSet {
        roots: g_roots,
        residual_bound: g_residual,
    };
    if g_roots.total_multiplicity() != g.degree() {
        return Err(Error::InvalidModel(format!(
            "denominator roots cover {} of degree {}",
            g_roots.total_multiplicity(),
            g.degree()
        )));
    }
    let residual_bound = gmf_roots.residual_bound.max(g_roots.residual_bound);

    let max_abs = gmf_roots
        .roots
        .iter()
        .chain(&g_roots.roots)
        .map(|r| r.location.norm())
        .fold(0.0, f64::max);
    let axis_eps = 1e-9 * (1.0 + max_abs);

    let gmf_split = classify_halfplane(&gmf_roots, axis_eps);
    let g_split = classify_halfplane(&g_roots, axis_eps);

    if !g_split.axis.is_empty() {
        return Err(Error::PoleOnAxis(g_split.axis.roots[0].location));
    }
    if !gmf_split.axis.is_empty() {
        // the structural origin root is already deflated; any other axis root
        // means the half-plane assignment is ambiguous
        return Err(Error::RoucheCountMismatch {
            context: format!(
                "root of g - f on the imaginary axis at {}",
                gmf_split.axis.roots[0].location
            ),
            gmf_plus: gmf_split.plus.total_multiplicity(),
            g_plus: g_split.plus.total_multiplicity(),
        });
    }

    let mut s_minus = gmf_split.minus.roots;
    let mut s_plus = gmf_split.plus.roots;
    let mut stilde_minus = g_split.minus.roots;
    let mut stilde_plus = g_split.plus.roots;

    cancel_shared(&mut s_minus, &mut stilde_minus, f);
    cancel_shared(&mut s_plus, &mut stilde_plus, f);

    // the deflated origin root belongs to the nonnegative half-plane
    s_plus.push(Root {
        location: Complex64::default(),
        multiplicity: 1,
    });

    // both polynomials have the same degree and, by the argument-principle
    // count, the same number of zeros in Re s >= 0
    if total(&s_plus) != total(&stilde_plus) || total(&s_minus) != total(&stilde_minus) {
        return Err(Error::RoucheCountMismatch {
            context: format!(
                "half-plane counts (minus {} vs {})",
                total(&s_minus),
                total(&stilde_minus)
            ),
            gmf_plus: total(&s_plus),
            g_plus: total(&stilde_plus),
        });
    }

    Ok(Factorization {
        s_minus,
        s_plus,
        stilde_minus,
        stilde_plus,
        residual_bound,
    })
}

pub fn factorize_model(model: &DependenceModel) -> Result<Factorization> {
    let mom = model.moments();
    if mom.ey >= 0.0 {
        return Err(Error::StabilityViolation { ey: mom.ey });
    }
    factorize_with_g_roots(&model.y_transform(), model.y_denominator_roots()?, 0.0)
}

impl Factorization {
    /// P(W = 0): product of the negative-half-plane roots of g - f over the
    /// negative-half-plane roots of g.
    pub fn atom(&self) -> f64 {
        let num: Complex64 = self
            .s_minus
            .iter()
            .fold(Complex64::new(1.0, 0.0), |acc, r| {
                acc * r.location.powu(r.multiplicity as u32)
            });
        let den: Complex64 = self
            .stilde_minus
            .iter()
            .fold(Complex64::new(1.0, 0.0), |acc, r| {
                acc * r.location.powu(r.multiplicity as u32)
            });
        (num / den).re
    }

    /// E(cW): the mean of the scaled waiting time, from the root sums.
    pub fn mean_scaled_waiting(&self) -> f64 {
        let inv_sum = |roots: &[Root]| -> Complex64 {
            roots
                .iter()
                .map(|r| r.multiplicity as f64 / r.location)
                .sum()
        };
        (inv_sum(&self.stilde_minus) - inv_sum(&self.s_minus)).re
    }

    /// LST of cW: prod (1 - s/stilde_minus) / prod (1 - s/s_minus).
    pub fn waiting_lst(&self) -> RationalFn {
        let num = normalized_factor_product(&self.stilde_minus);
        let den = normalized_factor_product(&self.s_minus);
        RationalFn::new(num, den)
    }

    /// Same LST kept in factored form, for cancellation-free inversion.
    pub fn waiting_lst_factored(&self) -> FactoredLst {
        let count = |roots: &[Root]| -> usize { roots.iter().map(|r| r.multiplicity).sum() };
        let prod = |roots: &[Root]| -> Complex64 {
            roots.iter().fold(Complex64::new(1.0, 0.0), |acc, r| {
                acc * r.location.powu(r.multiplicity as u32)
            })
        };
        // prod (1 - s/a) = (-1)^{sum mult} prod (s - a) / prod a
        let sign = if (count(&self.stilde_minus) + count(&self.s_minus)) % 2 == 0 {
            1.0
        } else {
            -1.0
        };
        FactoredLst {
            lead: sign * prod(&self.s_minus) / prod(&self.stilde_minus),
            poly: Polynomial::one(),
            num_roots: self.stilde_minus.clone(),
            den_roots: self.s_minus.clone(),
        }
    }

    /// LST E e^{sI} of the idle period (defined for Re s <= 0), as the
    /// rational function 1 - Np(s)/Dp(s) with Np = prod (s - s_plus) and
    /// Dp = prod (s - stilde_plus); returned as (Dp - Np)/Dp.
    pub fn idle_lst(&self) -> RationalFn {
        let np = Polynomial::from_roots(Complex64::new(1.0, 0.0), &with_mult(&self.s_plus));
        let dp = Polynomial::from_roots(Complex64::new(1.0, 0.0), &with_mult(&self.stilde_plus));
        RationalFn::new(&dp - &np, dp)
    }

    /// Mean idle period: Np(0) = 0 through the structural origin root, so
    /// the derivative of 1 - Np/Dp at 0 collapses to -Np'(0)/Dp(0).
    pub fn mean_idle(&self) -> f64 {
        let rf = self.idle_lst();
        let np = Polynomial::from_roots(Complex64::new(1.0, 0.0), &with_mult(&self.s_plus));
        let dp0 = rf.den.eval(Complex64::default());
        (-np.derivative().eval(Complex64::default()) / dp0).re
    }
}

/// prod over roots of (1 - s/r), expanded; real when the set is
/// conjugate-closed.
fn normalized_factor_product(roots: &[Root]) -> Polynomial {
    let base = Polynomial::from_roots(Complex64::new(1.0, 0.0), &with_mult(roots));
    let scale = roots.iter().fold(Complex64::new(1.0, 0.0), |acc, r| {
        acc * (-r.location).powu(r.multiplicity as u32)
    });
    let p = base.scale(1.0 / scale);
    if p.is_real() {
        p.into_real()
    } else {
        p
    }
}
