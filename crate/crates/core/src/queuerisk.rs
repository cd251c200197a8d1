//! End-to-end analysis of a dependence model: steady-state waiting time,
//! workload, idle period, and the dual ordinary / delayed ruin functions.
//!
//! The workload law is computed twice, through genuinely different routes:
//! once as the rational transform (1 - rho) + rho W*(s) B_res*(s) inverted by
//! partial fractions, and once termwise through the ladder-height integral
//! equation (convolving the waiting-time tail with the stationary-excess
//! service density). Disagreement beyond `DUALITY_TOL` is reported as an
//! error instead of silently returning either answer.

use crate::error::{Error, Result};
use crate::inversion::{
    difference_stop_loss, invert_tail_at_poles, invert_tail_factored, ExpPolyMix, FactoredLst,
};
use crate::models::{DependenceModel, MomentReport};
use crate::polyrat::{RationalFn, Root};
use crate::wienerhopf::{factorize_model, Factorization};
use num_complex::Complex64;
use serde::Serialize;

/// Maximum allowed gap between the two workload computations.
pub const DUALITY_TOL: f64 = 1e-8;
/// Grid size for the cross-validation of the two workload routes.
const DUALITY_GRID: usize = 100;

/// Full analytic solution for one model.
pub struct Analysis {
    pub model: DependenceModel,
    pub moments: MomentReport,
    pub factorization: Factorization,
    /// tail of the scaled waiting time cW; doubles as the ordinary ruin
    /// function of the dual risk process
    pub scaled_waiting: ExpPolyMix,
    /// tail of the stationary workload V; doubles as the delayed (stationary)
    /// ruin function
    pub workload: ExpPolyMix,
    pub mean_idle: f64,
    /// largest observed gap between the two workload routes
    pub duality_gap: f64,
}

/// Flat summary of the quantities reported in the reference tables.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct ScenarioReport {
    pub rho: f64,
    pub corr: f64,
    pub atom: f64,
    pub mean_waiting: f64,
    pub q95_waiting: f64,
    pub workload_atom: f64,
    pub mean_workload: f64,
    pub mean_idle: f64,
}

/// Stationary-excess (integrated-tail) distribution of the service
/// requirement, as a rational LST: (1 - B*(s)) / (s E B).
fn residual_service_lst(model: &DependenceModel, eb: f64) -> RationalFn {
    let b = model.marginal_b_lst();
    let num = (&b.den - &b.num).deflate_zero_root();
    RationalFn::new(num, b.den.scale(Complex64::from(eb)))
}

/// Concatenates pole lists, merging coincident locations.
fn merge_poles(a: &[Root], b: &[Root]) -> Vec<Root> {
    let mut out: Vec<Root> = a.to_vec();
    for r in b {
        let tol = 1e-9 * (1.0 + r.location.norm());
        if let Some(hit) = out
            .iter_mut()
            .find(|o| (o.location - r.location).norm() < tol)
        {
            hit.multiplicity += r.multiplicity;
        } else {
            out.push(*r);
        }
    }
    out
}

pub fn analyze(model: &DependenceModel) -> Result<Analysis> {
    model.validate()?;
    let moments = model.moments();
    if moments.ey >= 0.0 {
        return Err(Error::StabilityViolation { ey: moments.ey });
    }
    let rho = moments.rho;
    let factorization = factorize_model(model)?;
    let w_fac = factorization.waiting_lst_factored();
    let scaled_waiting = invert_tail_factored(&w_fac)?;

    // route one: the transform of cW + B_res as the factored product
    // W*(s) B_res*(s), inverted by global partial fractions; then
    // V = (1 - rho) delta_0 + rho (cW + B_res)
    let bres = residual_service_lst(model, moments.eb);
    let v_poles = merge_poles(&factorization.s_minus, &model.marginal_b_poles()?);
    let sum_fac = FactoredLst {
        lead: w_fac.lead / bres.den.leading(),
        poly: bres.num.clone(),
        num_roots: w_fac.num_roots.clone(),
        den_roots: v_poles,
    };
    let mut workload = invert_tail_factored(&sum_fac)?.scale(rho);
    workload.atom0 = 1.0 - rho;

    // route two: termwise ladder-height convolution
    let bres_tail = model
        .marginal_b_tail()
        .integral_mix()
        .scale(1.0 / moments.eb);
    let sum_tail = scaled_waiting.convolve(&bres_tail);
    let mut delayed = sum_tail.scale(rho);
    delayed.atom0 = 1.0 - rho;

    let horizon = 10.0 * (scaled_waiting.mean() + moments.eb).max(moments.eb);
    let mut duality_gap: f64 = 0.0;
    let mut worst_u = 0.0;
    for k in 0..DUALITY_GRID {
        let u = horizon * k as f64 / (DUALITY_GRID - 1) as f64;
        let gap = (workload.evaluate(u) - delayed.evaluate(u)).abs();
        if gap > duality_gap {
            duality_gap = gap;
            worst_u = u;
        }
    }
    // The exponential-polynomial basis is ill-conditioned when many poles
    // cluster (coefficients grow like spacing^-multiplicity and cancel at
    // evaluation), so the achievable agreement degrades with the coefficient
    // magnitude seen along the way; allow for that roundoff on top of the
    // fixed tolerance.
    let coef_scale = workload.coef_scale.max(delayed.coef_scale).max(1.0);
    if duality_gap > DUALITY_TOL.max(1e-10 * coef_scale) {
        return Err(Error::DualityViolation {
            u: worst_u,
            gap: duality_gap,
        });
    }

    let mean_idle = factorization.mean_idle();
    Ok(Analysis {
        model: model.clone(),
        moments,
        factorization,
        scaled_waiting,
        workload,
        mean_idle,
        duality_gap,
    })
}

impl Analysis {
    /// P(W = 0).
    pub fn atom(&self) -> f64 {
        self.scaled_waiting.atom0
    }

    /// P(W > u) for the actual (unscaled) waiting time.
    pub fn waiting_tail(&self, u: f64) -> f64 {
        if u < 0.0 {
            return 1.0;
        }
        self.scaled_waiting.evaluate(self.model.c * u)
    }

    pub fn mean_waiting(&self) -> f64 {
        self.scaled_waiting.mean() / self.model.c
    }

    pub fn waiting_quantile(&self, q: f64) -> f64 {
        self.scaled_waiting.quantile(q) / self.model.c
    }

    /// P(V > v), stationary workload.
    pub fn workload_tail(&self, v: f64) -> f64 {
        if v < 0.0 {
            return 1.0;
        }
        self.workload.evaluate(v)
    }

    /// P(V = 0) = 1 - rho.
    pub fn workload_atom(&self) -> f64 {
        self.workload.atom0
    }

    pub fn mean_workload(&self) -> f64 {
        self.workload.mean()
    }

    pub fn workload_quantile(&self, q: f64) -> f64 {
        self.workload.quantile(q)
    }

    /// Ruin probability with initial capital u when the first inter-claim
    /// interval is an ordinary one: by duality, P(cW > u).
    pub fn ordinary_ruin(&self, u: f64) -> f64 {
        if u < 0.0 {
            return 1.0;
        }
        self.scaled_waiting.evaluate(u)
    }

    /// Ruin probability under the stationary (delayed) claim process: by
    /// duality, P(V > u).
    pub fn delayed_ruin(&self, u: f64) -> f64 {
        self.workload_tail(u)
    }

    /// Idle-period tail, inverted from 1 - Np(-s)/Dp(-s).
    pub fn idle_tail(&self) -> Result<ExpPolyMix> {
        let rf = self
            .factorization
            .idle_lst()
            .compose_scale(Complex64::from(-1.0));
        let poles: Vec<Root> = self
            .factorization
            .stilde_plus
            .iter()
            .map(|r| Root {
                location: -r.location,
                multiplicity: r.multiplicity,
            })
            .collect();
        invert_tail_at_poles(&rf, &poles)
    }

    pub fn report(&self) -> ScenarioReport {
        ScenarioReport {
            rho: self.moments.rho,
            corr: self.moments.corr,
            atom: self.atom(),
            mean_waiting: self.mean_waiting(),
            q95_waiting: self.waiting_quantile(0.95),
            workload_atom: self.workload_atom(),
            mean_workload: self.mean_workload(),
            mean_idle: self.mean_idle,
        }
    }
}

/// Exact E(D - t)_+ for the increment D = B/c - A of a finite mixed-Erlang
/// model, by conditioning on the mixture component.
pub fn increment_stop_loss(model: &DependenceModel, t: f64) -> Result<f64> {
    let pairs = model.component_pairs().ok_or_else(|| {
        Error::InvalidModel("increment stop-loss needs a finite mixture".into())
    })?;
    let (lambda, mu) = match &model.family {
        crate::models::Family::MixedErlang { lambda, mu, .. } => (*lambda, *mu),
        _ => unreachable!("component_pairs implies a mixed-Erlang family"),
    };
    Ok(pairs
        .iter()
        .map(|p| {
            p.weight
                * difference_stop_loss(p.b_order, mu * model.c, p.a_order, lambda, t)
        })
        .sum())
}

/// Exact convex-ordering check of the increments across the three scenarios
/// built from the same mixing weights: equality of means plus
/// E(D_pos - t)_+ <= E(D_ind - t)_+ <= E(D_neg - t)_+ at every grid point.
///
/// Mean inequality (possible for asymmetric mixing, where the negative
/// scenario changes the marginal of B) is reported as a violation, since
/// convex ordering requires equal means.
pub fn check_increment_ordering(
    weights: &[f64],
    lambda: f64,
    mu: f64,
    c: f64,
    ts: &[f64],
    tol: f64,
) -> Result<()> {
    use crate::models::ScenarioKind;
    let build = |kind| DependenceModel::build_scenario(kind, weights, lambda, mu, c);
    let pos = build(ScenarioKind::Positive)?;
    let ind = build(ScenarioKind::Independent)?;
    let neg = build(ScenarioKind::Negative)?;
    for (a, b, which) in [
        (&pos, &ind, "means of positive and independent"),
        (&ind, &neg, "means of independent and negative"),
    ] {
        let (ma, mb) = (a.moments().ey, b.moments().ey);
        if (ma - mb).abs() > tol {
            return Err(Error::OrderingViolation {
                t: f64::NAN,
                lhs: ma,
                rhs: mb,
                which: which.into(),
            });
        }
    }
    for &t in ts {
        let p = increment_stop_loss(&pos, t)?;
        let i = increment_stop_loss(&ind, t)?;
        let n = increment_stop_loss(&neg, t)?;
        if p > i + tol {
            return Err(Error::OrderingViolation {
                t,
                lhs: p,
                rhs: i,
                which: "stop-loss of positive vs independent".into(),
            });
        }
        if i > n + tol {
            return Err(Error::OrderingViolation {
                t,
                lhs: i,
                rhs: n,
                which: "stop-loss of independent vs negative".into(),
            });
        }
    }
    Ok(())
}
