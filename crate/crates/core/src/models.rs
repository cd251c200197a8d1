//! Bivariate dependence families for the inter-arrival / service pair (A, B):
//! mixed-Erlang scenarios with positive, independent or negative coupling,
//! the Kibble-Moran bivariate gamma, and the Cheriyan-Ramabhadran bivariate
//! gamma. Each family exposes its joint transform, the rational transform of
//! Y = B/c - A, closed-form moments, the marginal service-time law, and exact
//! samplers (including the stationary residual pair).

use crate::error::{Error, Result};
use crate::inversion::ExpPolyMix;
use crate::polyrat::{Polynomial, RationalFn, Root};
use num_complex::Complex64;
use rand::Rng;
use serde::{Deserialize, Serialize};

pub const MODEL_SCHEMA_VERSION: u32 = 1;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScenarioKind {
    Positive,
    Independent,
    Negative,
}

/// Distribution of the shared mixing variable M of the mixed-Erlang families.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(untagged)]
pub enum MixingDistribution {
    FiniteSupport { weights: Vec<f64> },
    DiscretePhaseType { alpha: Vec<f64>, t: Vec<Vec<f64>> },
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum Family {
    MixedErlang {
        kind: ScenarioKind,
        lambda: f64,
        mu: f64,
        mixing: MixingDistribution,
    },
    KibbleMoran {
        m: u32,
        p: f64,
        lambda: f64,
        mu: f64,
    },
    CheriyanRamabhadran {
        orders: [u32; 3],
        beta: [f64; 3],
    },
}

/// A bivariate matrix-exponential dependence model together with the server
/// speed (premium rate) `c`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct DependenceModel {
    #[serde(flatten)]
    pub family: Family,
    pub c: f64,
}

#[derive(Clone, Copy, Debug)]
pub struct PairSample {
    /// Inter-arrival (inter-claim) time.
    pub a: f64,
    /// Service requirement (claim size).
    pub b: f64,
}

/// Closed-form first and second moments of the pair, plus the load and drift.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct MomentReport {
    pub ea: f64,
    pub eb: f64,
    pub var_a: f64,
    pub var_b: f64,
    pub cov: f64,
    pub corr: f64,
    pub rho: f64,
    pub ey: f64,
}

/// One component of a finite mixed-Erlang mixture: conditionally on the
/// component, A ~ Erlang(a_order, lambda) and B ~ Erlang(b_order, mu),
/// independent.
#[derive(Clone, Copy, Debug)]
pub struct PairComponent {
    pub a_order: usize,
    pub b_order: usize,
    pub weight: f64,
}

const WEIGHT_SUM_TOL: f64 = 1e-12;

fn check_weights(weights: &[f64]) -> Result<()> {
    if weights.is_empty() {
        return Err(Error::InvalidDistribution("empty weight vector".into()));
    }
    if weights.iter().any(|&w| w < 0.0 || !w.is_finite()) {
        return Err(Error::InvalidDistribution("negative weight".into()));
    }
    let sum: f64 = weights.iter().sum();
    if (sum - 1.0).abs() > WEIGHT_SUM_TOL * weights.len() as f64 {
        return Err(Error::InvalidDistribution(format!(
            "weights sum to {sum}, expected 1"
        )));
    }
    Ok(())
}

impl DependenceModel {
    pub fn new(family: Family, c: f64) -> Result<Self> {
        let m = DependenceModel { family, c };
        m.validate()?;
        Ok(m)
    }

    /// Builds one of the three mixed-Erlang scenarios with a finite mixing
    /// distribution `weights` over {1..K}.
    pub fn build_scenario(
        kind: ScenarioKind,
        weights: &[f64],
        lambda: f64,
        mu: f64,
        c: f64,
    ) -> Result<Self> {
        check_weights(weights)?;
        Self::new(
            Family::MixedErlang {
                kind,
                lambda,
                mu,
                mixing: MixingDistribution::FiniteSupport {
                    weights: weights.to_vec(),
                },
            },
            c,
        )
    }

    /// M/M/1-equivalent degenerate model: A ~ exp(lambda), B ~ exp(mu),
    /// independent.
    pub fn mm1(lambda: f64, mu: f64, c: f64) -> Self {
        Self::build_scenario(ScenarioKind::Positive, &[1.0], lambda, mu, c).unwrap()
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.c > 0.0 && self.c.is_finite()) {
            return Err(Error::InvalidModel("speed c must be > 0".into()));
        }
        match &self.family {
            Family::MixedErlang {
                kind,
                lambda,
                mu,
                mixing,
            } => {
                if *lambda <= 0.0 || *mu <= 0.0 {
                    return Err(Error::InvalidModel("rates must be > 0".into()));
                }
                match mixing {
                    MixingDistribution::FiniteSupport { weights } => check_weights(weights)?,
                    MixingDistribution::DiscretePhaseType { alpha, t } => {
                        if *kind != ScenarioKind::Positive {
                            return Err(Error::InvalidModel(
                                "phase-type mixing is only supported for the positive scenario"
                                    .into(),
                            ));
                        }
                        let d = alpha.len();
                        if d == 0 || t.len() != d || t.iter().any(|row| row.len() != d) {
                            return Err(Error::InvalidDistribution(
                                "alpha/T dimension mismatch".into(),
                            ));
                        }
                        if alpha.iter().any(|&a| a < 0.0) {
                            return Err(Error::InvalidDistribution("negative alpha entry".into()));
                        }
                        let asum: f64 = alpha.iter().sum();
                        if (asum - 1.0).abs() > 1e-10 {
                            return Err(Error::InvalidDistribution(format!(
                                "alpha sums to {asum}, expected 1"
                            )));
                        }
                        for row in t {
                            if row.iter().any(|&x| x < 0.0) {
                                return Err(Error::InvalidDistribution(
                                    "negative transition probability".into(),
                                ));
                            }
                            let rs: f64 = row.iter().sum();
                            if rs > 1.0 + 1e-12 {
                                return Err(Error::InvalidDistribution(
                                    "row of T sums above 1".into(),
                                ));
                            }
                        }
                        // I - T must be nonsingular for the chain to absorb
                        solve_real(&sub_from_identity(t), &vec![1.0; d])
                            .ok_or(Error::SingularMatrix)?;
                    }
                }
            }
            Family::KibbleMoran { m, p, lambda, mu } => {
                if *m == 0 {
                    return Err(Error::InvalidModel("Kibble-Moran order m must be >= 1".into()));
                }
                if !(*p > 0.0 && *p <= 1.0) {
                    return Err(Error::InvalidModel("jump probability p must be in (0,1]".into()));
                }
                if *lambda <= 0.0 || *mu <= 0.0 {
                    return Err(Error::InvalidModel("rates must be > 0".into()));
                }
            }
            Family::CheriyanRamabhadran { orders, beta } => {
                if beta.iter().any(|&b| b <= 0.0) {
                    return Err(Error::InvalidModel("rates must be > 0".into()));
                }
                let [m0, m1, m2] = *orders;
                if m0 + m1 == 0 || m0 + m2 == 0 {
                    return Err(Error::InvalidModel(
                        "both marginals need at least one Erlang stage".into(),
                    ));
                }
            }
        }
        Ok(())
    }

    /// Finite mixture components, when the family has them.
    pub fn component_pairs(&self) -> Option<Vec<PairComponent>> {
        match &self.family {
            Family::MixedErlang {
                kind,
                mixing: MixingDistribution::FiniteSupport { weights },
                ..
            } => {
                let k = weights.len();
                let mut pairs = Vec::new();
                match kind {
                    ScenarioKind::Positive => {
                        for (i, &w) in weights.iter().enumerate() {
                            pairs.push(PairComponent {
                                a_order: i + 1,
                                b_order: i + 1,
                                weight: w,
                            });
                        }
                    }
                    ScenarioKind::Negative => {
                        for (i, &w) in weights.iter().enumerate() {
                            pairs.push(PairComponent {
                                a_order: i + 1,
                                b_order: k - i,
                                weight: w,
                            });
                        }
                    }
                    ScenarioKind::Independent => {
                        for (i, &wi) in weights.iter().enumerate() {
                            for (j, &wj) in weights.iter().enumerate() {
                                pairs.push(PairComponent {
                                    a_order: i + 1,
                                    b_order: j + 1,
                                    weight: wi * wj,
                                });
                            }
                        }
                    }
                }
                Some(pairs)
            }
            _ => None,
        }
    }

    /// Joint Laplace-Stieltjes transform E exp(-s1 A - s2 B).
    pub fn joint_lst(&self, s1: Complex64, s2: Complex64) -> Result<Complex64> {
        match &self.family {
            Family::MixedErlang {
                lambda,
                mu,
                mixing,
                ..
            } => {
                let za = Complex64::from(*lambda) / (lambda + s1);
                let zb = Complex64::from(*mu) / (mu + s2);
                match mixing {
                    MixingDistribution::FiniteSupport { .. } => {
                        let pairs = self.component_pairs().unwrap();
                        Ok(pairs
                            .iter()
                            .map(|p| {
                                p.weight
                                    * za.powu(p.a_order as u32)
                                    * zb.powu(p.b_order as u32)
                            })
                            .sum())
                    }
                    MixingDistribution::DiscretePhaseType { alpha, t } => {
                        // alpha' [ ((lambda+s1)(mu+s2)/(lambda mu)) I - T ]^{-1} t
                        let theta = 1.0 / (za * zb);
                        let d = alpha.len();
                        let mut m = vec![vec![Complex64::default(); d]; d];
                        for i in 0..d {
                            for j in 0..d {
                                m[i][j] = -Complex64::from(t[i][j]);
                            }
                            m[i][i] += theta;
                        }
                        let exit = exit_vector(t);
                        let x = solve_complex(&m, &exit).ok_or(Error::SingularMatrix)?;
                        Ok(alpha
                            .iter()
                            .zip(&x)
                            .map(|(&a, &xi)| Complex64::from(a) * xi)
                            .sum())
                    }
                }
            }
            Family::KibbleMoran { m, p, lambda, mu } => {
                let z = (Complex64::from(*lambda) / (lambda + s1))
                    * (Complex64::from(*mu) / (mu + s2));
                let geo = *p * z / (Complex64::from(1.0) - (1.0 - *p) * z);
                Ok(geo.powu(*m))
            }
            Family::CheriyanRamabhadran { orders, beta } => {
                let [m0, m1, m2] = *orders;
                let [b0, b1, b2] = *beta;
                let f0 = (Complex64::from(b0) / (b0 + s1 + s2)).powu(m0);
                let f1 = (Complex64::from(b1) / (b1 + s1)).powu(m1);
                let f2 = (Complex64::from(b2) / (b2 + s2)).powu(m2);
                Ok(f0 * f1 * f2)
            }
        }
    }

    /// Rational transform f(s)/g(s) of Y = B/c - A, built symbolically.
    ///
    /// Finite mixtures are expanded over the common denominator
    /// (lambda - s)^Amax (mu + s/c)^Bmax without numeric cancellation of
    /// shared factors; the factorization stage removes those structurally.
    pub fn y_transform(&self) -> RationalFn {
        let c = self.c;
        match &self.family {
            Family::MixedErlang {
                lambda,
                mu,
                mixing,
                ..
            } => {
                let p1 = Polynomial::from_real(&[*lambda, -1.0]); // lambda - s
                let p2 = Polynomial::from_real(&[*mu, 1.0 / c]); // mu + s/c
                match mixing {
                    MixingDistribution::FiniteSupport { .. } => {
                        let pairs = self.component_pairs().unwrap();
                        let a_max = pairs.iter().map(|p| p.a_order).max().unwrap();
                        let b_max = pairs.iter().map(|p| p.b_order).max().unwrap();
                        let g = &p1.pow(a_max) * &p2.pow(b_max);
                        let mut f = Polynomial::zero();
                        for pc in &pairs {
                            let coef = pc.weight
                                * lambda.powi(pc.a_order as i32)
                                * mu.powi(pc.b_order as i32);
                            let term = &p1.pow(a_max - pc.a_order) * &p2.pow(b_max - pc.b_order);
                            f = &f + &term.scale(Complex64::from(coef));
                        }
                        RationalFn::new(f, g)
                    }
                    MixingDistribution::DiscretePhaseType { alpha, t } => {
                        // P_M(z) with z = lambda mu / w(s), w = (lambda-s)(mu+s/c)
                        let w = &p1 * &p2;
                        pgf_rational(alpha, t, &w, lambda * mu)
                    }
                }
            }
            Family::KibbleMoran { m, p, lambda, mu } => {
                let w = &Polynomial::from_real(&[*lambda, -1.0])
                    * &Polynomial::from_real(&[*mu, 1.0 / c]);
                let f = Polynomial::from_real(&[(p * lambda * mu).powi(*m as i32)]);
                let shifted = &w - &Polynomial::from_real(&[(1.0 - p) * lambda * mu]);
                RationalFn::new(f, shifted.pow(*m as usize))
            }
            Family::CheriyanRamabhadran { orders, beta } => {
                // E e^{-sY} = E e^{s(1-1/c)Z0} E e^{sZ1} E e^{-sZ2/c}
                let [m0, m1, m2] = orders.map(|o| o as usize);
                let [b0, b1, b2] = *beta;
                let mut g = Polynomial::one();
                let mut fconst = 1.0;
                if m0 > 0 {
                    g = &g * &Polynomial::from_real(&[b0, 1.0 / c - 1.0]).pow(m0);
                    fconst *= b0.powi(m0 as i32);
                }
                if m1 > 0 {
                    g = &g * &Polynomial::from_real(&[b1, -1.0]).pow(m1);
                    fconst *= b1.powi(m1 as i32);
                }
                if m2 > 0 {
                    g = &g * &Polynomial::from_real(&[b2, 1.0 / c]).pow(m2);
                    fconst *= b2.powi(m2 as i32);
                }
                RationalFn::new(Polynomial::from_real(&[fconst]), g)
            }
        }
    }

    pub fn moments(&self) -> MomentReport {
        let c = self.c;
        let (ea, eb, var_a, var_b, cov) = match &self.family {
            Family::MixedErlang {
                lambda,
                mu,
                mixing,
                ..
            } => {
                let (ma, mb, va, vb, cab) = match mixing {
                    MixingDistribution::FiniteSupport { .. } => {
                        let pairs = self.component_pairs().unwrap();
                        let ma: f64 = pairs.iter().map(|p| p.weight * p.a_order as f64).sum();
                        let mb: f64 = pairs.iter().map(|p| p.weight * p.b_order as f64).sum();
                        let maa: f64 = pairs
                            .iter()
                            .map(|p| p.weight * (p.a_order as f64).powi(2))
                            .sum();
                        let mbb: f64 = pairs
                            .iter()
                            .map(|p| p.weight * (p.b_order as f64).powi(2))
                            .sum();
                        let mab: f64 = pairs
                            .iter()
                            .map(|p| p.weight * p.a_order as f64 * p.b_order as f64)
                            .sum();
                        (ma, mb, maa - ma * ma, mbb - mb * mb, mab - ma * mb)
                    }
                    MixingDistribution::DiscretePhaseType { alpha, t } => {
                        let (em, em2) = dph_first_two_moments(alpha, t);
                        let vm = em2 - em * em;
                        (em, em, vm, vm, vm)
                    }
                };
                // law of total variance over the mixing index
                (
                    ma / lambda,
                    mb / mu,
                    ma / (lambda * lambda) + va / (lambda * lambda),
                    mb / (mu * mu) + vb / (mu * mu),
                    cab / (lambda * mu),
                )
            }
            Family::KibbleMoran { m, p, lambda, mu } => {
                let em = *m as f64 / p;
                let vm = *m as f64 * (1.0 - p) / (p * p);
                (
                    em / lambda,
                    em / mu,
                    em / (lambda * lambda) + vm / (lambda * lambda),
                    em / (mu * mu) + vm / (mu * mu),
                    vm / (lambda * mu),
                )
            }
            Family::CheriyanRamabhadran { orders, beta } => {
                let [m0, m1, m2] = orders.map(|o| o as f64);
                let [b0, b1, b2] = *beta;
                (
                    m0 / b0 + m1 / b1,
                    m0 / b0 + m2 / b2,
                    m0 / (b0 * b0) + m1 / (b1 * b1),
                    m0 / (b0 * b0) + m2 / (b2 * b2),
                    m0 / (b0 * b0),
                )
            }
        };
        let corr = if var_a > 0.0 && var_b > 0.0 {
            cov / (var_a * var_b).sqrt()
        } else {
            0.0
        };
        MomentReport {
            ea,
            eb,
            var_a,
            var_b,
            cov,
            corr,
            rho: eb / (c * ea),
            ey: eb / c - ea,
        }
    }

    pub fn is_stable(&self) -> bool {
        self.moments().ey < 0.0
    }

    /// LST of the marginal service requirement B.
    pub fn marginal_b_lst(&self) -> RationalFn {
        match &self.family {
            Family::MixedErlang {
                mu,
                mixing: MixingDistribution::FiniteSupport { .. },
                ..
            } => {
                let pairs = self.component_pairs().unwrap();
                let b_max = pairs.iter().map(|p| p.b_order).max().unwrap();
                let p2 = Polynomial::from_real(&[*mu, 1.0]); // mu + s
                let den = p2.pow(b_max);
                let mut num = Polynomial::zero();
                for pc in &pairs {
                    // components with equal b_order aggregate naturally
                    let coef = pc.weight * mu.powi(pc.b_order as i32);
                    num = &num + &p2.pow(b_max - pc.b_order).scale(Complex64::from(coef));
                }
                RationalFn::new(num, den)
            }
            Family::MixedErlang {
                mu,
                mixing: MixingDistribution::DiscretePhaseType { alpha, t },
                ..
            } => pgf_rational(alpha, t, &Polynomial::from_real(&[*mu, 1.0]), *mu),
            Family::KibbleMoran { m, p, mu, .. } => {
                // geometric sums of exponentials collapse: B ~ Erlang(m, p*mu)
                let rate = p * mu;
                RationalFn::new(
                    Polynomial::from_real(&[rate.powi(*m as i32)]),
                    Polynomial::from_real(&[rate, 1.0]).pow(*m as usize),
                )
            }
            Family::CheriyanRamabhadran { orders, beta } => {
                let [m0, _, m2] = orders.map(|o| o as usize);
                let [b0, _, b2] = *beta;
                let num = b0.powi(m0 as i32) * b2.powi(m2 as i32);
                let den = &Polynomial::from_real(&[b0, 1.0]).pow(m0)
                    * &Polynomial::from_real(&[b2, 1.0]).pow(m2);
                RationalFn::new(Polynomial::from_real(&[num]), den)
            }
        }
    }

    /// Poles of the marginal service-requirement transform, with exact
    /// multiplicities.
    pub fn marginal_b_poles(&self) -> Result<Vec<Root>> {
        let root = |re: f64, multiplicity: usize| Root {
            location: Complex64::from(re),
            multiplicity,
        };
        match &self.family {
            Family::MixedErlang {
                mu,
                mixing: MixingDistribution::FiniteSupport { .. },
                ..
            } => {
                let b_max = self
                    .component_pairs()
                    .unwrap()
                    .iter()
                    .map(|p| p.b_order)
                    .max()
                    .unwrap();
                Ok(vec![root(-mu, b_max)])
            }
            Family::MixedErlang { .. } => {
                // phase-type mixing: generically simple poles
                Ok(crate::polyrat::find_roots(
                    &self.marginal_b_lst().den,
                    crate::polyrat::DEFAULT_ROOT_TOL,
                )?
                .roots)
            }
            Family::KibbleMoran { m, p, mu, .. } => Ok(vec![root(-p * mu, *m as usize)]),
            Family::CheriyanRamabhadran { orders, beta } => {
                let mut out = Vec::new();
                if orders[0] > 0 {
                    out.push(root(-beta[0], orders[0] as usize));
                }
                if orders[2] > 0 {
                    out.push(root(-beta[2], orders[2] as usize));
                }
                Ok(out)
            }
        }
    }

    /// Exact roots (with multiplicity) of the denominator of the Y transform.
    pub fn y_denominator_roots(&self) -> Result<Vec<Root>> {
        let c = self.c;
        let root = |loc: Complex64, multiplicity: usize| Root {
            location: loc,
            multiplicity,
        };
        match &self.family {
            Family::MixedErlang {
                lambda,
                mu,
                mixing: MixingDistribution::FiniteSupport { .. },
                ..
            } => {
                let pairs = self.component_pairs().unwrap();
                let a_max = pairs.iter().map(|p| p.a_order).max().unwrap();
                let b_max = pairs.iter().map(|p| p.b_order).max().unwrap();
                Ok(vec![
                    root(Complex64::from(*lambda), a_max),
                    root(Complex64::from(-mu * c), b_max),
                ])
            }
            Family::MixedErlang { .. } => {
                // phase-type mixing: generically simple roots
                Ok(crate::polyrat::find_roots(
                    &self.y_transform().den,
                    crate::polyrat::DEFAULT_ROOT_TOL,
                )?
                .roots)
            }
            Family::KibbleMoran { m, p, lambda, mu } => {
                // ((lambda - s)(mu + s/c) - (1-p) lambda mu)^m
                let quad = &(&Polynomial::from_real(&[*lambda, -1.0])
                    * &Polynomial::from_real(&[*mu, 1.0 / c]))
                    - &Polynomial::from_real(&[(1.0 - p) * lambda * mu]);
                let rs = crate::polyrat::find_roots(&quad, crate::polyrat::DEFAULT_ROOT_TOL)?;
                Ok(rs
                    .roots
                    .iter()
                    .map(|r| root(r.location, r.multiplicity * *m as usize))
                    .collect())
            }
            Family::CheriyanRamabhadran { orders, beta } => {
                let [m0, m1, m2] = orders.map(|o| o as usize);
                let [b0, b1, b2] = *beta;
                let mut out = Vec::new();
                // (b0 + s(1/c - 1)) degenerates to a constant at c = 1
                if m0 > 0 && (1.0 / c - 1.0).abs() > 1e-14 {
                    out.push(root(Complex64::from(b0 / (1.0 - 1.0 / c)), m0));
                }
                if m1 > 0 {
                    out.push(root(Complex64::from(b1), m1));
                }
                if m2 > 0 {
                    out.push(root(Complex64::from(-b2 * c), m2));
                }
                Ok(out)
            }
        }
    }

    /// Survival function 1 - F_B(w) of the marginal service requirement, as a
    /// closed-form exponential-polynomial mixture.
    pub fn marginal_b_tail(&self) -> ExpPolyMix {
        match &self.family {
            Family::MixedErlang {
                mu,
                mixing: MixingDistribution::FiniteSupport { .. },
                ..
            } => {
                let pairs = self.component_pairs().unwrap();
                let mut tail = ExpPolyMix::zero();
                for pc in &pairs {
                    tail = tail.add(&ExpPolyMix::erlang_tail(pc.b_order, *mu).scale(pc.weight));
                }
                tail.combined()
            }
            Family::KibbleMoran { m, p, mu, .. } => {
                ExpPolyMix::erlang_tail(*m as usize, p * mu)
            }
            _ => {
                // remaining families: invert the rational marginal transform
                // at the structurally known poles
                let poles = self
                    .marginal_b_poles()
                    .expect("marginal B poles are computable");
                crate::inversion::invert_tail_at_poles(&self.marginal_b_lst(), &poles)
                    .expect("marginal B transform has stable poles")
            }
        }
    }

    /// Cached sampler for the pair law and the stationary residual pair.
    pub fn sampler(&self) -> PairSampler {
        PairSampler::new(self)
    }

    /// One-off draw of (A, B); prefer [`PairSampler`] in loops.
    pub fn sample_pair<R: Rng>(&self, rng: &mut R) -> PairSample {
        self.sampler().sample_pair(rng)
    }

    /// One-off draw of the stationary first pair (A^res, B*).
    pub fn sample_residual_pair<R: Rng>(&self, rng: &mut R) -> PairSample {
        self.sampler().sample_residual_pair(rng)
    }
}

// ---------------------------------------------------------------------------
// sampling

fn erlang<R: Rng>(rng: &mut R, order: usize, rate: f64) -> f64 {
    // product of uniforms needs a single log
    let mut prod = 1.0f64;
    for _ in 0..order {
        prod *= rng.gen::<f64>().max(f64::MIN_POSITIVE);
    }
    -prod.ln() / rate
}

fn geometric<R: Rng>(rng: &mut R, p: f64) -> usize {
    if p >= 1.0 {
        return 1;
    }
    let u: f64 = rng.gen::<f64>().max(f64::MIN_POSITIVE);
    (u.ln() / (1.0 - p).ln()).floor() as usize + 1
}

/// Precomputed sampler for a [`DependenceModel`].
pub struct PairSampler {
    model: DependenceModel,
    /// cumulative component weights (finite mixtures)
    cum: Vec<f64>,
    /// cumulative size-biased component weights (finite mixtures)
    cum_biased: Vec<f64>,
    pairs: Vec<PairComponent>,
}

impl PairSampler {
    pub fn new(model: &DependenceModel) -> Self {
        let pairs = model.component_pairs().unwrap_or_default();
        let mut cum = Vec::with_capacity(pairs.len());
        let mut cum_biased = Vec::with_capacity(pairs.len());
        let mut acc = 0.0;
        for p in &pairs {
            acc += p.weight;
            cum.push(acc);
        }
        let total_biased: f64 = pairs.iter().map(|p| p.weight * p.a_order as f64).sum();
        let mut accb = 0.0;
        for p in &pairs {
            accb += p.weight * p.a_order as f64 / total_biased.max(f64::MIN_POSITIVE);
            cum_biased.push(accb);
        }
        PairSampler {
            model: model.clone(),
            cum,
            cum_biased,
            pairs,
        }
    }

    fn pick(cum: &[f64], u: f64) -> usize {
        match cum.binary_search_by(|c| c.partial_cmp(&u).unwrap()) {
            Ok(i) => (i + 1).min(cum.len() - 1),
            Err(i) => i.min(cum.len() - 1),
        }
    }

    /// Exact draw of (A, B) from the joint law.
    pub fn sample_pair<R: Rng>(&self, rng: &mut R) -> PairSample {
        match &self.model.family {
            Family::MixedErlang {
                lambda,
                mu,
                mixing,
                ..
            } => match mixing {
                MixingDistribution::FiniteSupport { .. } => {
                    let i = Self::pick(&self.cum, rng.gen());
                    let pc = self.pairs[i];
                    PairSample {
                        a: erlang(rng, pc.a_order, *lambda),
                        b: erlang(rng, pc.b_order, *mu),
                    }
                }
                MixingDistribution::DiscretePhaseType { alpha, t } => {
                    let m = sample_dph(rng, alpha, t);
                    PairSample {
                        a: erlang(rng, m, *lambda),
                        b: erlang(rng, m, *mu),
                    }
                }
            },
            Family::KibbleMoran { m, p, lambda, mu } => {
                let total: usize = (0..*m).map(|_| geometric(rng, *p)).sum();
                PairSample {
                    a: erlang(rng, total, *lambda),
                    b: erlang(rng, total, *mu),
                }
            }
            Family::CheriyanRamabhadran { orders, beta } => {
                let [m0, m1, m2] = orders.map(|o| o as usize);
                let z0 = erlang(rng, m0, beta[0]);
                let z1 = erlang(rng, m1, beta[1]);
                let z2 = erlang(rng, m2, beta[2]);
                PairSample { a: z0 + z1, b: z0 + z2 }
            }
        }
    }

    /// Stationary first pair (A^res, B*): the component is drawn size-biased
    /// by its mean inter-arrival contribution, the inter-arrival component is
    /// the uniform fraction of a size-biased draw, and B* keeps the joint
    /// coupling of the full pair.
    pub fn sample_residual_pair<R: Rng>(&self, rng: &mut R) -> PairSample {
        match &self.model.family {
            Family::MixedErlang {
                lambda,
                mu,
                mixing,
                ..
            } => {
                let (a_order, b_order) = match mixing {
                    MixingDistribution::FiniteSupport { .. } => {
                        let i = Self::pick(&self.cum_biased, rng.gen());
                        let pc = self.pairs[i];
                        (pc.a_order, pc.b_order)
                    }
                    MixingDistribution::DiscretePhaseType { alpha, t } => {
                        let m = sample_dph_size_biased(rng, alpha, t);
                        (m, m)
                    }
                };
                let a_tilde = erlang(rng, a_order + 1, *lambda);
                PairSample {
                    a: rng.gen::<f64>() * a_tilde,
                    b: erlang(rng, b_order, *mu),
                }
            }
            Family::KibbleMoran { m, p, lambda, mu } => {
                let n = sample_nb_size_biased(rng, *m as usize, *p);
                let a_tilde = erlang(rng, n + 1, *lambda);
                PairSample {
                    a: rng.gen::<f64>() * a_tilde,
                    b: erlang(rng, n, *mu),
                }
            }
            Family::CheriyanRamabhadran { orders, beta } => {
                // size-bias A = Z0 + Z1 by choosing which summand carries the
                // extra stage; Z0 stays shared with B*
                let [m0, m1, m2] = orders.map(|o| o as usize);
                let [b0, b1, b2] = *beta;
                let w0 = m0 as f64 / b0;
                let w1 = m1 as f64 / b1;
                let bias_z0 = rng.gen::<f64>() * (w0 + w1) < w0;
                let (z0, z1) = if bias_z0 {
                    (erlang(rng, m0 + 1, b0), erlang(rng, m1, b1))
                } else {
                    (erlang(rng, m0, b0), erlang(rng, m1 + 1, b1))
                };
                let a_tilde = z0 + z1;
                let z2 = erlang(rng, m2, b2);
                PairSample {
                    a: rng.gen::<f64>() * a_tilde,
                    b: z0 + z2,
                }
            }
        }
    }
}

fn sample_dph<R: Rng>(rng: &mut R, alpha: &[f64], t: &[Vec<f64>]) -> usize {
    let d = alpha.len();
    let mut state = {
        let u: f64 = rng.gen();
        let mut acc = 0.0;
        let mut s = d - 1;
        for (i, &a) in alpha.iter().enumerate() {
            acc += a;
            if u < acc {
                s = i;
                break;
            }
        }
        s
    };
    let mut jumps = 1usize;
    loop {
        let u: f64 = rng.gen();
        let mut acc = 0.0;
        let mut next = None;
        for (j, &pij) in t[state].iter().enumerate() {
            acc += pij;
            if u < acc {
                next = Some(j);
                break;
            }
        }
        match next {
            Some(j) => {
                state = j;
                jumps += 1;
            }
            None => return jumps,
        }
    }
}

fn sample_dph_size_biased<R: Rng>(rng: &mut R, alpha: &[f64], t: &[Vec<f64>]) -> usize {
    // sequential inversion of P(n) ~ n * alpha' T^{n-1} t / E M
    let em = dph_first_two_moments(alpha, t).0;
    let exit = exit_vector(t);
    let target: f64 = rng.gen::<f64>() * em;
    let mut v = alpha.to_vec();
    let mut acc = 0.0;
    for n in 1usize..100_000_000 {
        let pn: f64 = v.iter().zip(&exit).map(|(a, b)| a * b).sum();
        acc += n as f64 * pn;
        if acc >= target || pn < 1e-300 {
            return n;
        }
        // v <- v T
        let d = v.len();
        let mut next = vec![0.0; d];
        for (i, &vi) in v.iter().enumerate() {
            for j in 0..d {
                next[j] += vi * t[i][j];
            }
        }
        v = next;
    }
    unreachable!("size-biased phase-type sampling failed to terminate")
}

fn sample_nb_size_biased<R: Rng>(rng: &mut R, m: usize, p: f64) -> usize {
    // size-biased negative binomial on {m, m+1, ...}
    if p >= 1.0 {
        return m;
    }
    let em = m as f64 / p;
    let target: f64 = rng.gen::<f64>() * em;
    let mut pmf = p.powi(m as i32);
    let mut acc = 0.0;
    let mut n = m;
    loop {
        acc += n as f64 * pmf;
        if acc >= target || pmf < 1e-300 {
            return n;
        }
        pmf *= (1.0 - p) * n as f64 / (n + 1 - m) as f64;
        n += 1;
    }
}

// ---------------------------------------------------------------------------
// small dense linear algebra for the phase-type machinery

fn exit_vector(t: &[Vec<f64>]) -> Vec<f64> {
    t.iter()
        .map(|row| 1.0 - row.iter().sum::<f64>())
        .collect()
}

fn sub_from_identity(t: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let d = t.len();
    let mut m = vec![vec![0.0; d]; d];
    for i in 0..d {
        for j in 0..d {
            m[i][j] = if i == j { 1.0 - t[i][j] } else { -t[i][j] };
        }
    }
    m
}

fn solve_real(a: &[Vec<f64>], b: &[f64]) -> Option<Vec<f64>> {
    let d = b.len();
    let mut m: Vec<Vec<f64>> = a.to_vec();
    let mut x = b.to_vec();
    for col in 0..d {
        let piv = (col..d).max_by(|&i, &j| m[i][col].abs().total_cmp(&m[j][col].abs()))?;
        if m[piv][col].abs() < 1e-14 {
            return None;
        }
        m.swap(col, piv);
        x.swap(col, piv);
        for row in col + 1..d {
            let f = m[row][col] / m[col][col];
            for k in col..d {
                m[row][k] -= f * m[col][k];
            }
            x[row] -= f * x[col];
        }
    }
    for col in (0..d).rev() {
        x[col] /= m[col][col];
        for row in 0..col {
            x[row] -= m[row][col] * x[col];
        }
    }
    Some(x)
}

fn solve_complex(a: &[Vec<Complex64>], b: &[f64]) -> Option<Vec<Complex64>> {
    let d = b.len();
    let mut m: Vec<Vec<Complex64>> = a.to_vec();
    let mut x: Vec<Complex64> = b.iter().map(|&v| Complex64::from(v)).collect();
    let scale = m
        .iter()
        .flat_map(|r| r.iter().map(|c| c.norm()))
        .fold(0.0f64, f64::max);
    for col in 0..d {
        let piv = (col..d).max_by(|&i, &j| m[i][col].norm().total_cmp(&m[j][col].norm()))?;
        if m[piv][col].norm() < 1e-14 * scale.max(1.0) {
            return None;
        }
        m.swap(col, piv);
        x.swap(col, piv);
        for row in col + 1..d {
            let f = m[row][col] / m[col][col];
            for k in col..d {
                let sub = f * m[col][k];
                m[row][k] -= sub;
            }
            let sub = f * x[col];
            x[row] -= sub;
        }
    }
    for col in (0..d).rev() {
        x[col] /= m[col][col];
        for row in 0..col {
            let sub = m[row][col] * x[col];
            x[row] -= sub;
        }
    }
    Some(x)
}

fn dph_first_two_moments(alpha: &[f64], t: &[Vec<f64>]) -> (f64, f64) {
    // E M = alpha' (I-T)^{-1} 1 ; E M^2 = alpha' (I+T)(I-T)^{-2} 1
    let d = alpha.len();
    let ones = vec![1.0; d];
    let imt = sub_from_identity(t);
    let x1 = solve_real(&imt, &ones).expect("I - T nonsingular");
    let em: f64 = alpha.iter().zip(&x1).map(|(a, b)| a * b).sum();
    let x2 = solve_real(&imt, &x1).expect("I - T nonsingular");
    // (I+T)(I-T)^{-2} 1 = (2(I-T)^{-1} - I)(I-T)^{-1} 1 = 2 x2 - x1
    let em2: f64 = alpha
        .iter()
        .zip(x2.iter().zip(&x1))
        .map(|(a, (b2, b1))| a * (2.0 * b2 - b1))
        .sum();
    (em, em2)
}

/// P_M as a rational function of s, where the PGF argument is
/// `z = xden / xnum(s)` and M is discrete phase-type with representation
/// (alpha, T). Uses Faddeev-LeVerrier for det(xI - T) and alpha' adj(xI-T) t.
fn pgf_rational(alpha: &[f64], t: &[Vec<f64>], xnum: &Polynomial, xden: f64) -> RationalFn {
    let d = alpha.len();
    // Faddeev-LeVerrier: char coeffs c[0..=d] of det(xI-T), adjugate matrices
    let mut c = vec![0.0f64; d + 1];
    c[d] = 1.0;
    let mut mk = vec![vec![0.0; d]; d]; // M_1 = I
    for (i, row) in mk.iter_mut().enumerate() {
        row[i] = 1.0;
    }
    let exit = exit_vector(t);
    // numerator coefficients a_k of alpha' adj(xI-T) t = sum_k a_k x^k
    let mut a = vec![0.0f64; d];
    for k in 1..=d {
        // adj(xI-T) = sum_{k=1}^{d} M_k x^{d-k}
        let mut quad = 0.0;
        for i in 0..d {
            for j in 0..d {
                quad += alpha[i] * mk[i][j] * exit[j];
            }
        }
        a[d - k] = quad;
        // A_k = T M_k ; c_{d-k} = -tr(A_k)/k ; M_{k+1} = A_k + c_{d-k} I
        let mut ak = vec![vec![0.0; d]; d];
        for i in 0..d {
            for j in 0..d {
                let mut s = 0.0;
                for l in 0..d {
                    s += t[i][l] * mk[l][j];
                }
                ak[i][j] = s;
            }
        }
        let tr: f64 = (0..d).map(|i| ak[i][i]).sum();
        c[d - k] = -tr / k as f64;
        if k < d {
            for i in 0..d {
                for j in 0..d {
                    mk[i][j] = ak[i][j] + if i == j { c[d - k] } else { 0.0 };
                }
            }
        }
    }
    // substitute x = xnum / xden and clear denominators:
    // num(s) = sum_k a_k xden^{d-k} xnum^k, den(s) = sum_k c_k xden^{d-k} xnum^k
    let mut num = Polynomial::zero();
    let mut den = Polynomial::zero();
    for k in 0..=d {
        let pw = xnum.pow(k);
        let scale = xden.powi((d - k) as i32);
        if k < d {
            num = &num + &pw.scale(Complex64::from(a[k] * scale));
        }
        den = &den + &pw.scale(Complex64::from(c[k] * scale));
    }
    RationalFn::new(num, den)
}
