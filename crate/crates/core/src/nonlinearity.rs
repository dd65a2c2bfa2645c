//! Combined power-series nonlinearities `N(u) = sum_k d_k |u|^{alpha_k}`.
//!
//! Finite sums are stored term by term. The exponential, sine and cosine
//! families are stored by their parameters and evaluated in closed form
//! (minus the head of the series that is not retained); their truncated
//! series form exists for testing and for the coefficient-condition checker.
//!
//! Two extra knobs cover the way the dynamics is usually written:
//! `scale` multiplies a closed-form family (`eps * (e^{c s^r} - 1)`), and
//! `constant` is a `k = 0` coefficient with power zero. The constant only
//! rotates the phase of the solution (`u -> e^{i d_0 t} u`), so it is kept
//! apart from the series proper, whose powers are all positive.

use std::fmt;

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quadrature::tanh_sinh;

/// A single `d |u|^alpha` term.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Term {
    pub coeff: C64,
    pub alpha: f64,
}

impl Term {
    pub fn new(coeff: f64, alpha: f64) -> Self {
        Self {
            coeff: C64::new(coeff, 0.0),
            alpha,
        }
    }

    pub fn complex(coeff: C64, alpha: f64) -> Self {
        Self { coeff, alpha }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Family {
    FiniteSum(Vec<Term>),
    /// `sum_{k >= first} (c s^r)^k / k!`.
    Exp { c: f64, r: f64, first: u32 },
    /// `sum_{k >= first} (-1)^k s^{r(2k+1)} / (2k+1)!`.
    Sin { r: f64, first: u32 },
    /// `sum_{k >= first} (-1)^k s^{2rk} / (2k)!`, `first >= 1`.
    Cos { r: f64, first: u32 },
}

/// Coarse classification of a nonlinearity.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Kind {
    FiniteSum,
    ExpSeries,
    ExpTail,
    SinSeries,
    CosSeries,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SeriesNonlinearity {
    family: Family,
    scale: f64,
    constant: f64,
}

/// Threshold below which closed-form tails are summed directly; the
/// closed form `e^x - head` loses relative accuracy for small `x`.
const SMALL_ARG: f64 = 1.0;

impl SeriesNonlinearity {
    /// Finite sum of `d_k |u|^{alpha_k}`; terms are sorted by power.
    pub fn finite_sum(mut terms: Vec<Term>) -> Result<Self> {
        if let Some((i, t)) = terms
            .iter()
            .enumerate()
            .find(|(_, t)| !(t.alpha.is_finite() && t.alpha > 0.0))
        {
            return Err(Error::InvalidArgument(format!(
                "term {i}: power must be positive, got {}",
                t.alpha
            )));
        }
        if let Some((i, _)) = terms
            .iter()
            .enumerate()
            .find(|(_, t)| !(t.coeff.re.is_finite() && t.coeff.im.is_finite()))
        {
            return Err(Error::InvalidArgument(format!("term {i}: non-finite coefficient")));
        }
        terms.sort_by(|a, b| a.alpha.total_cmp(&b.alpha));
        Ok(Self {
            family: Family::FiniteSum(terms),
            scale: 1.0,
            constant: 0.0,
        })
    }

    /// Single power `d |u|^alpha`.
    pub fn power(coeff: f64, alpha: f64) -> Result<Self> {
        Self::finite_sum(vec![Term::new(coeff, alpha)])
    }

    /// `eps1 |u|^{alpha1} + eps2 |u|^{alpha2}`.
    pub fn double(eps1: f64, alpha1: f64, eps2: f64, alpha2: f64) -> Result<Self> {
        Self::finite_sum(vec![Term::new(eps1, alpha1), Term::new(eps2, alpha2)])
    }

    /// The zero nonlinearity (free equation).
    pub fn zero() -> Self {
        Self {
            family: Family::FiniteSum(Vec::new()),
            scale: 1.0,
            constant: 0.0,
        }
    }

    /// `e^{c s^r} - 1`, i.e. `d_k = c^k / k!`, `alpha_k = r k`, `k >= 1`.
    pub fn exp(c: f64, r: f64) -> Result<Self> {
        Self::exp_from(c, r, 1)
    }

    /// Exponential tail keeping only `k > 2/r`, so every power exceeds 2.
    pub fn exp_tail(c: f64, r: f64) -> Result<Self> {
        check_r(r)?;
        Self::exp_from(c, r, (2.0 / r).floor() as u32 + 1)
    }

    /// Exponential series starting at index `first` (at least 1).
    pub fn exp_from(c: f64, r: f64, first: u32) -> Result<Self> {
        check_r(r)?;
        if !c.is_finite() || c == 0.0 {
            return Err(Error::InvalidArgument(format!("exp constant must be non-zero, got {c}")));
        }
        Ok(Self {
            family: Family::Exp {
                c,
                r,
                first: first.max(1),
            },
            scale: 1.0,
            constant: 0.0,
        })
    }

    /// `sin(s^r)`, all terms.
    pub fn sin(r: f64) -> Result<Self> {
        Self::sin_from(r, 0)
    }

    /// `sin(s^eta)` keeping `k > 1/eta - 1/2`.
    pub fn sin_tail(eta: f64) -> Result<Self> {
        check_r(eta)?;
        let bound = 1.0 / eta - 0.5;
        let first = if bound < 0.0 { 0 } else { bound.floor() as u32 + 1 };
        Self::sin_from(eta, first)
    }

    pub fn sin_from(r: f64, first: u32) -> Result<Self> {
        check_r(r)?;
        Ok(Self {
            family: Family::Sin { r, first },
            scale: 1.0,
            constant: 0.0,
        })
    }

    /// `cos(s^r) - 1`.
    pub fn cos(r: f64) -> Result<Self> {
        Self::cos_from(r, 1)
    }

    /// `cos(s^eta)` keeping `k > 1/eta`.
    pub fn cos_tail(eta: f64) -> Result<Self> {
        check_r(eta)?;
        Self::cos_from(eta, (1.0 / eta).floor() as u32 + 1)
    }

    pub fn cos_from(r: f64, first: u32) -> Result<Self> {
        check_r(r)?;
        Ok(Self {
            family: Family::Cos {
                r,
                first: first.max(1),
            },
            scale: 1.0,
            constant: 0.0,
        })
    }

    /// Multiplies every series coefficient by `scale`.
    pub fn with_scale(mut self, scale: f64) -> Self {
        self.scale = scale;
        self
    }

    /// Adds the power-zero coefficient `d_0` (a pure phase rotation).
    pub fn with_constant(mut self, constant: f64) -> Self {
        self.constant = constant;
        self
    }

    /// `eps * e^{s^r}`, the full exponential including its constant term.
    pub fn exp_full(eps: f64, r: f64) -> Result<Self> {
        Ok(Self::exp(1.0, r)?.with_scale(eps).with_constant(eps))
    }

    pub fn family(&self) -> &Family {
        &self.family
    }

    pub fn scale(&self) -> f64 {
        self.scale
    }

    pub fn constant(&self) -> f64 {
        self.constant
    }

    pub fn kind(&self) -> Kind {
        match self.family {
            Family::FiniteSum(_) => Kind::FiniteSum,
            Family::Exp { first, .. } if first <= 1 => Kind::ExpSeries,
            Family::Exp { .. } => Kind::ExpTail,
            Family::Sin { .. } => Kind::SinSeries,
            Family::Cos { .. } => Kind::CosSeries,
        }
    }

    /// Smallest retained index (`tail_cut`) for the closed-form families.
    pub fn tail_cut(&self) -> Option<u32> {
        match self.family {
            Family::FiniteSum(_) => None,
            Family::Exp { first, .. } | Family::Sin { first, .. } | Family::Cos { first, .. } => {
                Some(first)
            }
        }
    }

    pub fn is_zero(&self) -> bool {
        self.constant == 0.0
            && match &self.family {
                Family::FiniteSum(t) => t.iter().all(|t| t.coeff == C64::new(0.0, 0.0)),
                _ => self.scale == 0.0,
            }
    }

    /// True when every coefficient is real, so the flow has a Hamiltonian.
    pub fn has_real_coefficients(&self) -> bool {
        match &self.family {
            Family::FiniteSum(t) => t.iter().all(|t| t.coeff.im == 0.0),
            _ => true,
        }
    }

    /// Smallest power in the series (ignoring the constant).
    pub fn min_alpha(&self) -> Option<f64> {
        match &self.family {
            Family::FiniteSum(t) => t.first().map(|t| t.alpha),
            Family::Exp { r, first, .. } => Some(r * *first as f64),
            Family::Sin { r, first } => Some(r * (2 * *first + 1) as f64),
            Family::Cos { r, first } => Some(r * (2 * *first) as f64),
        }
    }

    /// Number of series terms, `None` for infinite series.
    pub fn term_count(&self) -> Option<usize> {
        match &self.family {
            Family::FiniteSum(t) => Some(t.len()),
            _ => None,
        }
    }

    /// The `idx`-th retained term `(d_k, alpha_k)` (constant excluded).
    pub fn term(&self, idx: usize) -> Option<Term> {
        let s = self.scale;
        match &self.family {
            Family::FiniteSum(t) => t.get(idx).copied(),
            Family::Exp { c, r, first } => {
                let k = *first as usize + idx;
                let d = s * (k as f64 * c.abs().ln() - ln_factorial(k)).exp() * c.signum().powi(k as i32);
                Some(Term::new(d, r * k as f64))
            }
            Family::Sin { r, first } => {
                let k = *first as usize + idx;
                let m = 2 * k + 1;
                let d = s * alt(k) * (-ln_factorial(m)).exp();
                Some(Term::new(d, r * m as f64))
            }
            Family::Cos { r, first } => {
                let k = *first as usize + idx;
                let m = 2 * k;
                let d = s * alt(k) * (-ln_factorial(m)).exp();
                Some(Term::new(d, r * m as f64))
            }
        }
    }

    /// `N` evaluated at modulus `s >= 0`.
    pub fn eval(&self, s: f64) -> C64 {
        let series = match &self.family {
            Family::FiniteSum(terms) => {
                return terms
                    .iter()
                    .map(|t| t.coeff * pow_pos(s, t.alpha))
                    .sum::<C64>()
                    + self.constant;
            }
            _ => self.eval_closed_real(s),
        };
        C64::new(series + self.constant, 0.0)
    }

    /// Real part of `N(s)`; exact for real-coefficient nonlinearities.
    pub fn eval_real(&self, s: f64) -> f64 {
        match &self.family {
            Family::FiniteSum(terms) => {
                terms.iter().map(|t| t.coeff.re * pow_pos(s, t.alpha)).sum::<f64>() + self.constant
            }
            _ => self.eval_closed_real(s) + self.constant,
        }
    }

    fn eval_closed_real(&self, s: f64) -> f64 {
        let v = match self.family {
            Family::FiniteSum(_) => unreachable!(),
            Family::Exp { c, r, first } => exp_tail(c * pow_pos(s, r), first),
            Family::Sin { r, first } => sin_tail(pow_pos(s, r), first),
            Family::Cos { r, first } => cos_tail(pow_pos(s, r), first),
        };
        self.scale * v
    }

    /// `s N'(s)` for the series part (the constant has zero derivative).
    pub fn s_dn_ds(&self, s: f64) -> C64 {
        if s == 0.0 {
            return C64::new(0.0, 0.0);
        }
        let v = match &self.family {
            Family::FiniteSum(terms) => {
                return terms.iter().map(|t| t.coeff * t.alpha * pow_pos(s, t.alpha)).sum();
            }
            Family::Exp { c, r, first } => {
                let x = c * pow_pos(s, *r);
                r * x * exp_tail(x, first - 1)
            }
            Family::Sin { r, first } => {
                let y = pow_pos(s, *r);
                r * y * cos_tail(y, *first)
            }
            Family::Cos { r, first } => {
                let y = pow_pos(s, *r);
                -r * y * sin_tail(y, first - 1)
            }
        };
        C64::new(self.scale * v, 0.0)
    }

    /// Pointwise `N(|u(x)|)` over a field.
    pub fn eval_field(&self, u: &crate::grid::ComplexField) -> Vec<C64> {
        u.values().iter().map(|v| self.eval(v.norm())).collect()
    }

    /// Truncated-series evaluation with `k_max` retained terms (testing oracle
    /// for the closed forms).
    pub fn eval_series(&self, s: f64, k_max: usize) -> C64 {
        let n = self.term_count().map_or(k_max, |n| n.min(k_max));
        (0..n)
            .filter_map(|i| self.term(i))
            .map(|t| t.coeff * pow_pos(s, t.alpha))
            .sum::<C64>()
            + self.constant
    }

    /// Potential density `G(s) = int_0^s N(sigma) sigma d sigma`, so that
    /// `E[u] = 1/2 int |u_x|^2 - int G(|u|)` is conserved. `None` when a
    /// coefficient is complex (no Hamiltonian).
    pub fn potential_density(&self, s: f64) -> Option<f64> {
        if !self.has_real_coefficients() {
            return None;
        }
        let base = 0.5 * self.constant * s * s;
        let series = match &self.family {
            Family::FiniteSum(terms) => terms
                .iter()
                .map(|t| t.coeff.re * pow_pos(s, t.alpha + 2.0) / (t.alpha + 2.0))
                .sum(),
            Family::Exp { c, r, first } if *r == 2.0 => {
                // int_0^s (cs^2)^k/k! s ds = (cs^2)^{k+1} / (2c (k+1)!)
                self.scale / (2.0 * c) * exp_tail(c * s * s, first + 1)
            }
            _ => {
                if s == 0.0 {
                    0.0
                } else {
                    tanh_sinh(|sig| self.eval_closed_real(sig) * sig, 0.0, s, 1e-14).value
                }
            }
        };
        Some(base + series)
    }

    /// Series antiderivative `sum_k d_k s^{alpha_k+2}/(alpha_k+2)` truncated to
    /// `k_max` terms; oracle for [`Self::potential_density`].
    pub fn potential_density_series(&self, s: f64, k_max: usize) -> f64 {
        let n = self.term_count().map_or(k_max, |n| n.min(k_max));
        0.5 * self.constant * s * s
            + (0..n)
                .filter_map(|i| self.term(i))
                .map(|t| t.coeff.re * pow_pos(s, t.alpha + 2.0) / (t.alpha + 2.0))
                .sum::<f64>()
    }
}

impl fmt::Display for SeriesNonlinearity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.family {
            Family::FiniteSum(terms) => {
                if terms.is_empty() {
                    write!(f, "0")?;
                }
                for (i, t) in terms.iter().enumerate() {
                    if i > 0 {
                        write!(f, " + ")?;
                    }
                    if t.coeff.im == 0.0 {
                        write!(f, "{}|u|^{}", t.coeff.re, t.alpha)?;
                    } else {
                        write!(f, "({})|u|^{}", t.coeff, t.alpha)?;
                    }
                }
            }
            Family::Exp { c, r, first } => {
                write!(f, "{}*[exp({c}|u|^{r}) minus terms k < {first}]", self.scale)?
            }
            Family::Sin { r, first } => {
                write!(f, "{}*[sin(|u|^{r}) minus terms k < {first}]", self.scale)?
            }
            Family::Cos { r, first } => {
                write!(f, "{}*[cos(|u|^{r}) minus terms k < {first}]", self.scale)?
            }
        }
        if self.constant != 0.0 {
            write!(f, " + {}", self.constant)?;
        }
        Ok(())
    }
}

fn check_r(r: f64) -> Result<()> {
    if r.is_finite() && r > 0.0 {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!("inner power must be positive, got {r}")))
    }
}

fn alt(k: usize) -> f64 {
    if k % 2 == 0 {
        1.0
    } else {
        -1.0
    }
}

/// `s^a` for `s >= 0`, `a > 0`, with `0^a = 0`.
#[inline]
pub(crate) fn pow_pos(s: f64, a: f64) -> f64 {
    if s == 0.0 {
        0.0
    } else if a == 1.0 {
        s
    } else if a == 2.0 {
        s * s
    } else if a.fract() == 0.0 && a <= 16.0 {
        s.powi(a as i32)
    } else {
        s.powf(a)
    }
}

pub(crate) fn ln_factorial(k: usize) -> f64 {
    (2..=k).map(|j| (j as f64).ln()).sum()
}

/// `sum_{k >= first} x^k / k!`.
fn exp_tail(x: f64, first: u32) -> f64 {
    if x.abs() <= SMALL_ARG {
        let mut term = 1.0;
        for k in 1..=first {
            term *= x / k as f64;
        }
        series_from(term, first as usize, |k| x / (k + 1) as f64)
    } else {
        let mut head = 0.0;
        let mut term = 1.0;
        for k in 0..first {
            head += term;
            term *= x / (k + 1) as f64;
        }
        if first == 1 {
            x.exp_m1()
        } else {
            x.exp() - head
        }
    }
}

/// `sum_{k >= first} (-1)^k y^{2k+1} / (2k+1)!`.
fn sin_tail(y: f64, first: u32) -> f64 {
    let first = first as usize;
    if y.abs() <= SMALL_ARG {
        let m = 2 * first + 1;
        let term = alt(first) * y.powi(m as i32) * (-ln_factorial(m)).exp();
        series_from(term, first, |k| -y * y / ((2 * k + 2) * (2 * k + 3)) as f64)
    } else {
        let mut head = 0.0;
        let mut term = y;
        for k in 0..first {
            head += term;
            term *= -y * y / ((2 * k + 2) * (2 * k + 3)) as f64;
        }
        y.sin() - head
    }
}

/// `sum_{k >= first} (-1)^k y^{2k} / (2k)!`.
fn cos_tail(y: f64, first: u32) -> f64 {
    let first = first as usize;
    if y.abs() <= SMALL_ARG {
        let m = 2 * first;
        let term = alt(first) * y.powi(m as i32) * (-ln_factorial(m)).exp();
        series_from(term, first, |k| -y * y / ((2 * k + 1) * (2 * k + 2)) as f64)
    } else {
        let mut head = 0.0;
        let mut term = 1.0;
        for k in 0..first {
            head += term;
            term *= -y * y / ((2 * k + 1) * (2 * k + 2)) as f64;
        }
        if first == 0 {
            y.cos()
        } else if first == 1 {
            // cos y - 1 = -2 sin^2(y/2)
            let h = (0.5 * y).sin();
            -2.0 * h * h
        } else {
            y.cos() - head
        }
    }
}

/// Sums `t_k, t_{k+1} = t_k * ratio(k), ...` from index `k0` until the terms
/// stop contributing.
fn series_from(mut term: f64, k0: usize, ratio: impl Fn(usize) -> f64) -> f64 {
    let mut sum = 0.0;
    let mut k = k0;
    while term != 0.0 {
        sum += term;
        if term.abs() <= f64::EPSILON * 1e-3 * sum.abs() {
            break;
        }
        term *= ratio(k);
        k += 1;
        if k > k0 + 200 {
            break;
        }
    }
    sum
}

// ---------------------------------------------------------------------------
// Coefficient conditions
// ---------------------------------------------------------------------------

/// The summability conditions on `{d_k}`, `{alpha_k}` checked by
/// [`check_condition`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Condition {
    /// `sum_k sum_{beta<=M} |d_k| (1 + C(alpha_k, beta))
    ///  (R0^{|alpha_k - 2beta|} + |alpha_k - 2beta| R0^{|alpha_k - 2beta - 1|})`.
    #[serde(rename = "coeffcond")]
    Weighted,
    /// The same sum with an extra `1/(alpha_k - 2)`; needs `alpha_k > 2`.
    #[serde(rename = "coeffcond2.1")]
    WeightedGlobal,
    /// `sum_k |d_k| (1 + alpha_k + alpha_k^2) R0^{alpha_k}`; needs `alpha_k >= 1`.
    #[serde(rename = "coeffcond2")]
    Energy,
    /// The same with an extra `1/(alpha_k - 2)`; needs `alpha_k > 2`.
    #[serde(rename = "coeffcond3")]
    EnergyGlobal,
}

impl Condition {
    pub const ALL: [Condition; 4] = [
        Condition::Weighted,
        Condition::WeightedGlobal,
        Condition::Energy,
        Condition::EnergyGlobal,
    ];

    pub fn id(self) -> &'static str {
        match self {
            Condition::Weighted => "coeffcond",
            Condition::WeightedGlobal => "coeffcond2.1",
            Condition::Energy => "coeffcond2",
            Condition::EnergyGlobal => "coeffcond3",
        }
    }

    pub fn from_id(id: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|c| c.id() == id)
    }

    fn needs_global(self) -> bool {
        matches!(self, Condition::WeightedGlobal | Condition::EnergyGlobal)
    }

    fn check_alpha(self, index: usize, alpha: f64) -> Result<()> {
        let (ok, requirement) = match self {
            Condition::Weighted => (alpha > 0.0, "alpha_k > 0"),
            Condition::Energy => (alpha >= 1.0, "alpha_k >= 1"),
            Condition::WeightedGlobal | Condition::EnergyGlobal => (alpha > 2.0, "alpha_k > 2"),
        };
        if ok {
            Ok(())
        } else {
            Err(Error::TermPrecondition {
                index,
                alpha,
                condition: self.id(),
                requirement,
            })
        }
    }
}

impl fmt::Display for Condition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.id())
    }
}

/// `C(alpha, beta) = |alpha| |alpha - 2| ... |alpha - 2(beta - 1)|` for
/// `beta >= 1`, and `0` for `beta = 0`.
pub fn c_factor(alpha: f64, beta: u32) -> f64 {
    if beta == 0 {
        return 0.0;
    }
    (0..beta).map(|j| (alpha - 2.0 * j as f64).abs()).product()
}

/// Growth law bounding a factorial-type series: for retained term with
/// power index `m` (so `alpha = r m`), `|d| <= a * c^m / m!`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FactorialLaw {
    pub a: f64,
    pub c: f64,
    pub r: f64,
}

/// Anything that can enumerate `(d_k, alpha_k)` for the condition checker.
pub trait TermSequence {
    /// Retained term number `idx` (0-based); `None` past the last term.
    fn term_at(&self, idx: usize) -> Option<Term>;
    /// Power index `m` of term `idx` for factorial-law families.
    fn power_index(&self, _idx: usize) -> Option<usize> {
        None
    }
    /// Analytic coefficient law, when the family is recognized.
    fn factorial_law(&self) -> Option<FactorialLaw> {
        None
    }
    fn is_finite_sum(&self) -> bool;
}

impl TermSequence for SeriesNonlinearity {
    fn term_at(&self, idx: usize) -> Option<Term> {
        self.term(idx)
    }

    fn power_index(&self, idx: usize) -> Option<usize> {
        match self.family {
            Family::FiniteSum(_) => None,
            Family::Exp { first, .. } => Some(first as usize + idx),
            Family::Sin { first, .. } => Some(2 * (first as usize + idx) + 1),
            Family::Cos { first, .. } => Some(2 * (first as usize + idx)),
        }
    }

    fn factorial_law(&self) -> Option<FactorialLaw> {
        let a = self.scale.abs();
        match self.family {
            Family::FiniteSum(_) => None,
            Family::Exp { c, r, .. } => Some(FactorialLaw { a, c: c.abs(), r }),
            Family::Sin { r, .. } | Family::Cos { r, .. } => Some(FactorialLaw { a, c: 1.0, r }),
        }
    }

    fn is_finite_sum(&self) -> bool {
        matches!(self.family, Family::FiniteSum(_))
    }
}

/// An arbitrary infinite sequence given by closures; no analytic law, so
/// the checker can at best report divergence or an inconclusive estimate.
pub struct GenericSeries<D, A> {
    pub coeff: D,
    pub alpha: A,
}

impl<D: Fn(usize) -> C64, A: Fn(usize) -> f64> TermSequence for GenericSeries<D, A> {
    fn term_at(&self, idx: usize) -> Option<Term> {
        Some(Term::complex((self.coeff)(idx), (self.alpha)(idx)))
    }

    fn is_finite_sum(&self) -> bool {
        false
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "verdict", rename_all = "snake_case")]
pub enum Verdict {
    /// The series converges; `bound` = partial sum + `tail_bound`.
    Converged { bound: f64, tail_bound: f64 },
    Diverged,
    /// No certificate; `tail_estimate` is the last term magnitude.
    Inconclusive { tail_estimate: f64 },
}

impl Verdict {
    pub fn is_converged(&self) -> bool {
        matches!(self, Verdict::Converged { .. })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConditionReport {
    pub condition_id: Condition,
    pub r0: f64,
    pub m_param: u32,
    pub lambda: Option<f64>,
    pub partial_sums: Vec<f64>,
    pub verdict: Verdict,
    /// Whether the verdict is known to hold for every `R0 > 0` (finite sums
    /// and factorial-law families), not just the supplied one.
    pub holds_for_all_r0: bool,
}

#[derive(Debug, Clone, Copy)]
pub struct CheckOptions {
    pub condition: Condition,
    pub r0: f64,
    pub m: u32,
    /// Absolute tolerance on the certified tail.
    pub tol: f64,
    /// Terms summed for sequences without a recognized law.
    pub k_max: usize,
    pub lambda: Option<f64>,
}

impl CheckOptions {
    pub fn new(condition: Condition, r0: f64, m: u32, tol: f64) -> Self {
        Self {
            condition,
            r0,
            m,
            tol,
            k_max: 500,
            lambda: None,
        }
    }
}

/// Checks `condition` at radius `r0` with `m` (the `M` of the weighted
/// space) and tail tolerance `tol`.
pub fn check_condition(
    seq: &dyn TermSequence,
    condition: Condition,
    r0: f64,
    m: u32,
    tol: f64,
) -> Result<ConditionReport> {
    check_condition_with(seq, &CheckOptions::new(condition, r0, m, tol))
}

pub fn check_condition_with(seq: &dyn TermSequence, opts: &CheckOptions) -> Result<ConditionReport> {
    if !(opts.r0.is_finite() && opts.r0 > 0.0) {
        return Err(Error::InvalidArgument(format!("R0 must be positive, got {}", opts.r0)));
    }
    let cond = opts.condition;
    let mut partial_sums = Vec::new();
    let mut sum = 0.0;
    let report = |partial_sums, verdict, all| ConditionReport {
        condition_id: cond,
        r0: opts.r0,
        m_param: opts.m,
        lambda: opts.lambda,
        partial_sums,
        verdict,
        holds_for_all_r0: all,
    };

    if seq.is_finite_sum() {
        let mut idx = 0;
        while let Some(t) = seq.term_at(idx) {
            cond.check_alpha(idx, t.alpha)?;
            sum += ln_term(cond, t.coeff.norm().ln(), t.alpha, opts.r0, opts.m).exp();
            partial_sums.push(sum);
            idx += 1;
        }
        return Ok(report(
            partial_sums,
            Verdict::Converged {
                bound: sum,
                tail_bound: 0.0,
            },
            true,
        ));
    }

    if let Some(law) = seq.factorial_law() {
        // Every later power is larger, so checking the first term suffices.
        let first = seq.term_at(0).expect("infinite series has a first term");
        cond.check_alpha(0, first.alpha)?;
        let rho = opts.r0.max(1.0 / opts.r0);
        for idx in 0..100_000 {
            let t = seq.term_at(idx).expect("infinite series");
            let m = seq.power_index(idx).expect("law-backed series has power indices");
            let ln_d = if t.coeff.norm() == 0.0 {
                f64::NEG_INFINITY
            } else {
                t.coeff.norm().ln()
            };
            sum += ln_term(cond, ln_d, t.alpha, opts.r0, opts.m).exp();
            partial_sums.push(sum);
            if !sum.is_finite() {
                return Ok(report(partial_sums, Verdict::Inconclusive { tail_estimate: f64::INFINITY }, false));
            }
            if let Some(tail) = factorial_tail_bound(cond, law, m, rho, opts.m) {
                if tail <= opts.tol {
                    return Ok(report(
                        partial_sums,
                        Verdict::Converged {
                            bound: sum + tail,
                            tail_bound: tail,
                        },
                        true,
                    ));
                }
            }
        }
        let last = partial_sums.len();
        let tail_estimate = partial_sums[last - 1] - partial_sums[last - 2];
        return Ok(report(partial_sums, Verdict::Inconclusive { tail_estimate }, false));
    }

    // Generic sequence: sum K_max terms and look at the term magnitudes.
    let mut terms = Vec::with_capacity(opts.k_max);
    for idx in 0..opts.k_max {
        let Some(t) = seq.term_at(idx) else { break };
        cond.check_alpha(idx, t.alpha)?;
        let ln_d = if t.coeff.norm() == 0.0 {
            f64::NEG_INFINITY
        } else {
            t.coeff.norm().ln()
        };
        let term = ln_term(cond, ln_d, t.alpha, opts.r0, opts.m).exp();
        sum += term;
        terms.push(term);
        partial_sums.push(sum);
    }
    let k = terms.len();
    if k == 0 {
        return Ok(report(partial_sums, Verdict::Converged { bound: 0.0, tail_bound: 0.0 }, false));
    }
    // divergence test: the terms do not decay over the second half
    let late = &terms[k / 2..];
    let non_decaying = late.windows(2).all(|w| w[1] >= w[0]) && late.last() >= late.first();
    let verdict = if !sum.is_finite() || (k >= 4 && non_decaying && terms[k - 1] > 0.0) {
        Verdict::Diverged
    } else {
        Verdict::Inconclusive {
            tail_estimate: terms[k - 1],
        }
    };
    Ok(report(partial_sums, verdict, false))
}

/// `ln` of the `k`-th summand of `cond` for a term with `ln|d| = ln_d`.
fn ln_term(cond: Condition, ln_d: f64, alpha: f64, r0: f64, m: u32) -> f64 {
    let lr = r0.ln();
    let body = match cond {
        Condition::Weighted | Condition::WeightedGlobal => {
            let parts: Vec<f64> = (0..=m)
                .map(|beta| {
                    let a = (alpha - 2.0 * beta as f64).abs();
                    let a1 = (alpha - 2.0 * beta as f64 - 1.0).abs();
                    let ln_c = (1.0 + c_factor(alpha, beta)).ln();
                    let first = a * lr;
                    let second = if a == 0.0 {
                        f64::NEG_INFINITY
                    } else {
                        a.ln() + a1 * lr
                    };
                    ln_c + log_add(first, second)
                })
                .collect();
            log_sum(&parts)
        }
        Condition::Energy | Condition::EnergyGlobal => {
            (1.0 + alpha + alpha * alpha).ln() + alpha * lr
        }
    };
    let global = if cond.needs_global() {
        -(alpha - 2.0).ln()
    } else {
        0.0
    };
    ln_d + body + global
}

/// Rigorous bound on `sum_{m' > m}` of the summands of a factorial-law
/// family, or `None` if the ratio test does not yet apply at `m`.
///
/// Uses `B(m) >= summand(m)` with
///   weighted: `B = a c^m/m! * 2(M+1) (rm+2M+2)^{M+1} rho^{rm+2M+1}`,
///   energy:   `B = a c^m/m! * (1+rm)^2 rho^{rm}`,
/// whose ratio `B(m+1)/B(m)` decreases in `m`; the tail is then at most
/// `B(m+1) / (1 - q)` with `q = B(m+2)/B(m+1) < 1`. Bounding over every
/// `m' > m` (step one) dominates the sin/cos families' odd/even subsequence.
fn factorial_tail_bound(cond: Condition, law: FactorialLaw, m: usize, rho: f64, big_m: u32) -> Option<f64> {
    let ln_b = |mm: usize| -> f64 {
        let mf = mm as f64;
        let base = law.a.ln() + mf * law.c.ln() - ln_factorial(mm);
        let rest = match cond {
            Condition::Weighted | Condition::WeightedGlobal => {
                let p = law.r * mf + 2.0 * big_m as f64 + 2.0;
                (2.0 * (big_m as f64 + 1.0)).ln()
                    + (big_m as f64 + 1.0) * p.ln()
                    + (law.r * mf + 2.0 * big_m as f64 + 1.0) * rho.ln()
            }
            Condition::Energy | Condition::EnergyGlobal => {
                2.0 * (1.0 + law.r * mf).ln() + law.r * mf * rho.ln()
            }
        };
        base + rest
    };
    let ln_next = ln_b(m + 1);
    let q = (ln_b(m + 2) - ln_next).exp();
    if !(q < 0.5) {
        return None;
    }
    let global = if cond.needs_global() {
        let amin = law.r * (m + 1) as f64 - 2.0;
        if amin <= 0.0 {
            return None;
        }
        1.0 / amin
    } else {
        1.0
    };
    Some(ln_next.exp() / (1.0 - q) * global)
}

fn log_add(a: f64, b: f64) -> f64 {
    if a == f64::NEG_INFINITY {
        return b;
    }
    if b == f64::NEG_INFINITY {
        return a;
    }
    let m = a.max(b);
    m + ((a - m).exp() + (b - m).exp()).ln()
}

fn log_sum(xs: &[f64]) -> f64 {
    let m = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return m;
    }
    m + xs.iter().map(|x| (x - m).exp()).sum::<f64>().ln()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_term_evaluation() {
        let n = SeriesNonlinearity::power(0.5, 0.5).unwrap();
        assert_eq!(n.eval(4.0), C64::new(1.0, 0.0));
        assert_eq!(n.eval(0.0), C64::new(0.0, 0.0));
    }

    #[test]
    fn exp_series_vanishes_at_zero() {
        let n = SeriesNonlinearity::exp(1.0, 1.0).unwrap();
        assert_eq!(n.eval(0.0).re, 0.0);
        assert_eq!(n.kind(), Kind::ExpSeries);
    }

    #[test]
    fn exp_closed_form_matches_truncated_series() {
        let n = SeriesNonlinearity::exp(1.0, 2.0).unwrap();
        let s = 1.3f64;
        let closed = n.eval(s).re;
        assert!((closed - ((s * s).exp() - 1.0)).abs() < 1e-14);
        let series = n.eval_series(s, 40).re;
        assert!((closed - series).abs() <= 1e-13, "{closed} vs {series}");
    }

    #[test]
    fn finite_sum_sorted_and_validated() {
        let n = SeriesNonlinearity::double(0.9, 4.0, 0.1, 0.5).unwrap();
        assert_eq!(n.term(0).unwrap().alpha, 0.5);
        assert!(SeriesNonlinearity::power(1.0, 0.0).is_err());
        assert!(SeriesNonlinearity::power(1.0, -1.0).is_err());
    }

    #[test]
    fn tail_cuts_follow_the_power_threshold() {
        // l <= 2/r < l + 1 keeps k >= l + 1
        assert_eq!(SeriesNonlinearity::exp_tail(1.0, 1.0).unwrap().tail_cut(), Some(3));
        assert_eq!(SeriesNonlinearity::exp_tail(1.0, 3.0).unwrap().tail_cut(), Some(1));
        assert_eq!(SeriesNonlinearity::exp_tail(1.0, 1.5).unwrap().tail_cut(), Some(2));
        assert_eq!(SeriesNonlinearity::exp_tail(1.0, 0.5).unwrap().tail_cut(), Some(5));
        // sin tail keeps k > 1/eta - 1/2; eta > 2 keeps everything
        assert_eq!(SeriesNonlinearity::sin_tail(3.0).unwrap().tail_cut(), Some(0));
        assert_eq!(SeriesNonlinearity::sin_tail(1.0).unwrap().tail_cut(), Some(1));
        assert_eq!(SeriesNonlinearity::cos_tail(1.0).unwrap().tail_cut(), Some(2));
        for n in [
            SeriesNonlinearity::exp_tail(1.0, 0.7).unwrap(),
            SeriesNonlinearity::sin_tail(0.4).unwrap(),
            SeriesNonlinearity::cos_tail(0.9).unwrap(),
        ] {
            assert!(n.min_alpha().unwrap() > 2.0, "{n}");
        }
    }

    #[test]
    fn closed_forms_match_series_on_a_range() {
        let fams = [
            SeriesNonlinearity::exp(1.0, 1.0).unwrap(),
            SeriesNonlinearity::exp(-0.7, 1.5).unwrap(),
            SeriesNonlinearity::exp_tail(1.0, 1.0).unwrap(),
            SeriesNonlinearity::sin(1.0).unwrap(),
            SeriesNonlinearity::sin_tail(0.5).unwrap(),
            SeriesNonlinearity::cos(1.0).unwrap(),
            SeriesNonlinearity::cos_tail(0.5).unwrap(),
        ];
        for n in &fams {
            for i in 0..=40 {
                let s = 0.05 * i as f64;
                let a = n.eval(s).re;
                let b = n.eval_series(s, 80).re;
                assert!((a - b).abs() <= 1e-12 * (1.0 + a.abs()), "{n} at {s}: {a} vs {b}");
            }
        }
    }

    #[test]
    fn derivative_matches_finite_differences() {
        let fams = [
            SeriesNonlinearity::double(0.1, 0.5, 0.9, 4.0).unwrap(),
            SeriesNonlinearity::exp(1.0, 1.0).unwrap(),
            SeriesNonlinearity::exp_tail(0.5, 1.5).unwrap(),
            SeriesNonlinearity::sin(1.0).unwrap(),
            SeriesNonlinearity::sin_tail(0.6).unwrap(),
            SeriesNonlinearity::cos(1.0).unwrap(),
            SeriesNonlinearity::cos_tail(1.0).unwrap(),
        ];
        for n in &fams {
            for s in [0.3, 0.9, 1.7, 2.4] {
                let h = 1e-5;
                let fd = s * (n.eval(s + h).re - n.eval(s - h).re) / (2.0 * h);
                let an = n.s_dn_ds(s).re;
                assert!((fd - an).abs() <= 1e-7 * (1.0 + an.abs()), "{n} at {s}: {fd} vs {an}");
            }
        }
    }

    #[test]
    fn c_factor_values() {
        assert_eq!(c_factor(3.7, 0), 0.0);
        assert_eq!(c_factor(2.0, 2), 0.0);
        assert_eq!(c_factor(5.0, 3), 15.0);
        assert_eq!(c_factor(1.0, 1), 1.0);
    }

    #[test]
    fn potential_density_basics() {
        let cubic = SeriesNonlinearity::power(1.0, 2.0).unwrap();
        assert_eq!(cubic.potential_density(0.0), Some(0.0));
        assert!((cubic.potential_density(1.0).unwrap() - 0.25).abs() < 1e-15);
        let e = SeriesNonlinearity::exp(1.0, 1.0).unwrap();
        let q = e.potential_density(0.7).unwrap();
        let oracle = e.potential_density_series(0.7, 60);
        assert!((q - oracle).abs() <= 1e-12, "{q} vs {oracle}");
        let complex = SeriesNonlinearity::finite_sum(vec![Term::complex(C64::new(1.0, 0.5), 2.0)]).unwrap();
        assert_eq!(complex.potential_density(1.0), None);
    }

    #[test]
    fn potential_density_exp_square_closed_form() {
        let e = SeriesNonlinearity::exp(0.8, 2.0).unwrap().with_scale(0.3);
        for s in [0.0, 0.2, 1.0, 2.5] {
            let g = e.potential_density(s).unwrap();
            let oracle = e.potential_density_series(s, 120);
            assert!((g - oracle).abs() < 1e-12 * (1.0 + oracle.abs()), "{s}: {g} vs {oracle}");
        }
    }

    #[test]
    fn finite_sums_converge_exactly() {
        let n = SeriesNonlinearity::double(1.0, 3.0, -1.0, 6.0).unwrap();
        let rep = check_condition(&n, Condition::Weighted, 2.0, 5, 1e-12).unwrap();
        assert_eq!(rep.partial_sums.len(), 2);
        match rep.verdict {
            Verdict::Converged { bound, tail_bound } => {
                assert_eq!(tail_bound, 0.0);
                assert_eq!(bound, *rep.partial_sums.last().unwrap());
            }
            v => panic!("{v:?}"),
        }
        assert!(rep.holds_for_all_r0);
    }

    #[test]
    fn energy_condition_by_hand() {
        // |d|(1 + a + a^2) R0^a for a single cubic term at R0 = 2: 7 * 4
        let n = SeriesNonlinearity::power(-1.0, 2.0).unwrap();
        let rep = check_condition(&n, Condition::Energy, 2.0, 3, 1e-12).unwrap();
        assert!((rep.partial_sums[0] - 28.0).abs() < 1e-12);
        let rep = check_condition(&n, Condition::Weighted, 1.0, 1, 1e-12).unwrap();
        // beta = 0: (1+0)(1 + 2*1) = 3; beta = 1: (1+2)(1 + 0) = 3
        assert!((rep.partial_sums[0] - 6.0).abs() < 1e-12, "{}", rep.partial_sums[0]);
    }

    #[test]
    fn exp_series_converges_with_tail_bound() {
        let n = SeriesNonlinearity::exp(1.0, 1.0).unwrap();
        for cond in [Condition::Weighted, Condition::Energy] {
            let rep = check_condition(&n, cond, 3.0, 5, 1e-10).unwrap();
            match rep.verdict {
                Verdict::Converged { bound, tail_bound } => {
                    assert!(tail_bound <= 1e-10 && tail_bound >= 0.0);
                    assert!(bound >= *rep.partial_sums.last().unwrap());
                }
                v => panic!("{cond}: {v:?}"),
            }
        }
    }

    #[test]
    fn exp_tail_bound_dominates_the_true_tail() {
        let n = SeriesNonlinearity::exp(1.0, 1.0).unwrap();
        let rep = check_condition(&n, Condition::Energy, 2.0, 4, 1e-6).unwrap();
        let Verdict::Converged { tail_bound, .. } = rep.verdict else { panic!() };
        let k = rep.partial_sums.len();
        // brute-force the remaining tail
        let mut tail = 0.0;
        for idx in k..k + 200 {
            let t = n.term(idx).unwrap();
            tail += t.coeff.norm() * (1.0 + t.alpha + t.alpha * t.alpha) * 2f64.powf(t.alpha);
        }
        assert!(tail <= tail_bound, "{tail} > {tail_bound}");
    }

    #[test]
    fn global_conditions_reject_small_powers() {
        let n = SeriesNonlinearity::exp(1.0, 1.0).unwrap();
        let err = check_condition(&n, Condition::WeightedGlobal, 1.0, 4, 1e-10).unwrap_err();
        assert!(matches!(err, Error::TermPrecondition { index: 0, .. }));
        let n = SeriesNonlinearity::double(1.0, 3.0, 1.0, 0.5).unwrap();
        let err = check_condition(&n, Condition::Energy, 1.0, 4, 1e-10).unwrap_err();
        assert!(matches!(err, Error::TermPrecondition { index: 0, alpha, .. } if alpha == 0.5));
        let tail = SeriesNonlinearity::exp_tail(1.0, 1.0).unwrap();
        for cond in [Condition::WeightedGlobal, Condition::EnergyGlobal] {
            assert!(check_condition(&tail, cond, 2.0, 4, 1e-10).unwrap().verdict.is_converged());
        }
    }

    #[test]
    fn artificial_series_diverges() {
        let s = GenericSeries {
            coeff: |_| C64::new(1.0, 0.0),
            alpha: |k| (k + 1) as f64,
        };
        for cond in [Condition::Weighted, Condition::Energy] {
            let rep = check_condition(&s, cond, 2.0, 4, 1e-10).unwrap();
            assert_eq!(rep.verdict, Verdict::Diverged, "{cond}");
            assert!(!rep.holds_for_all_r0);
        }
    }

    #[test]
    fn generic_decaying_series_is_inconclusive() {
        let s = GenericSeries {
            coeff: |k| C64::new(1.0 / ((k + 1) as f64).powi(3), 0.0),
            alpha: |_| 1.0,
        };
        let rep = check_condition(&s, Condition::Energy, 1.0, 3, 1e-10).unwrap();
        assert!(matches!(rep.verdict, Verdict::Inconclusive { .. }));
    }

    #[test]
    fn condition_ids_round_trip() {
        for c in Condition::ALL {
            assert_eq!(Condition::from_id(c.id()), Some(c));
        }
    }
}
