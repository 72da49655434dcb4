//! Entropy estimation: how many of a block's corrected bits can be
//! treated as secret.
//!
//! Four estimators map the block statistics to a bound `t`. The usable
//! count then subtracts the non-randomness measure `r` and the disclosed
//! parities `d`: `clamp(floor(t - r - d), 0, b)`.
//!
//! The binomial tail that defines `p` is summed from 0 to `e`. The
//! published form prints the upper limit as `c`, which cannot index a sum.
//!
//! Myers-Pearson is transcribed with a single `(b - e)` factor:
//! `max over R in (1, 2) of (b-e)/(1-R) * log2(pE^R + (1-pE)^R)
//! - log2(R / (c (R-1))) - 2`.

use std::fmt;
use std::str::FromStr;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EntropyInputs {
    /// Sifted bits in the block.
    pub b: u64,
    /// Errors found by reconciliation.
    pub e: u64,
    /// Bits transmitted on the quantum channel.
    pub n: u64,
    /// Parity bits disclosed during reconciliation.
    pub d: u64,
    /// Non-randomness deduction, in bits.
    pub r: f64,
    /// Probability of overestimating the secret entropy.
    pub c: f64,
}

impl EntropyInputs {
    pub fn validate(&self) -> Result<(), EntropyError> {
        let bad = |why| Err(EntropyError::InvalidInputs(why));
        if self.b == 0 {
            return bad("b must be positive");
        }
        if self.e > self.b || self.b > self.n {
            return bad("need e <= b <= n");
        }
        if !(self.r >= 0.0 && self.r.is_finite()) {
            return bad("r must be a finite non-negative number");
        }
        if !(self.c > 0.0 && self.c < 1.0) {
            return bad("c must lie in (0, 1)");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum EstimatorKind {
    Bennett,
    Slutsky,
    MyersPearson,
    ShorPreskill,
}

impl EstimatorKind {
    pub const ALL: [EstimatorKind; 4] = [
        EstimatorKind::Bennett,
        EstimatorKind::Slutsky,
        EstimatorKind::MyersPearson,
        EstimatorKind::ShorPreskill,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Self::Bennett => "bennett",
            Self::Slutsky => "slutsky",
            Self::MyersPearson => "myers-pearson",
            Self::ShorPreskill => "shor-preskill",
        }
    }
}

impl fmt::Display for EstimatorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for EstimatorKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let key: String = s
            .chars()
            .filter(|c| c.is_ascii_alphanumeric())
            .map(|c| c.to_ascii_lowercase())
            .collect();
        match key.as_str() {
            "bennett" => Ok(Self::Bennett),
            "slutsky" => Ok(Self::Slutsky),
            "myerspearson" => Ok(Self::MyersPearson),
            "shorpreskill" => Ok(Self::ShorPreskill),
            _ => Err(format!("unknown entropy estimator {s:?}")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum EntropyError {
    #[error("invalid entropy inputs: {0}")]
    InvalidInputs(&'static str),
    #[error("entropy estimate undefined: {0}")]
    EstimateUndefined(&'static str),
}

/// Inverse complementary error function for `c` in (0, 2).
///
/// Starts from Giles' polynomial approximation (written in terms of
/// `w = -ln(c (2 - c))`, which keeps precision when `c` is tiny) and
/// polishes it with Newton steps on `erfc(x) - c`.
pub fn erfc_inv(c: f64) -> f64 {
    if c <= 0.0 {
        return f64::INFINITY;
    }
    if c >= 2.0 {
        return f64::NEG_INFINITY;
    }
    if c > 1.0 {
        return -erfc_inv(2.0 - c);
    }
    let x = 1.0 - c;
    let mut w = -(c * (2.0 - c)).ln();
    let p = if w < 5.0 {
        w -= 2.5;
        [
            3.43273939e-07,
            -3.5233877e-06,
            -4.39150654e-06,
            0.00021858087,
            -0.00125372503,
            -0.00417768164,
            0.246640727,
            1.50140941,
        ]
        .iter()
        .fold(2.81022636e-08, |acc, &k| k + acc * w)
    } else {
        w = w.sqrt() - 3.0;
        [
            0.000100950558,
            0.00134934322,
            -0.00367342844,
            0.00573950773,
            -0.0076224613,
            0.00943887047,
            1.00167406,
            2.83297682,
        ]
        .iter()
        .fold(-0.000200214257, |acc, &k| k + acc * w)
    };
    let mut y = p * x;
    if c > 1e-6 {
        for _ in 0..3 {
            let slope = -std::f64::consts::FRAC_2_SQRT_PI * (-y * y).exp();
            y -= (libm::erfc(y) - c) / slope;
        }
        return y;
    }
    // Deep tail: Newton on ln erfc from the asymptotic start.
    let target = c.ln();
    y = (-target - 0.5 * (-std::f64::consts::PI * target).ln()).sqrt();
    for _ in 0..60 {
        let q = libm::erfc(y);
        if q <= 0.0 {
            break;
        }
        let dlog = -std::f64::consts::FRAC_2_SQRT_PI * (-y * y).exp() / q;
        let step = (q.ln() - target) / dlog;
        y -= step;
        if step.abs() <= 1e-15 * y.abs() {
            break;
        }
    }
    y
}

/// Inverse error function for `x` in (-1, 1).
pub fn erf_inv(x: f64) -> f64 {
    erfc_inv(1.0 - x)
}

fn ln_choose(n: u64, k: u64) -> f64 {
    libm::lgamma(n as f64 + 1.0) - libm::lgamma(k as f64 + 1.0) - libm::lgamma((n - k) as f64 + 1.0)
}

/// `P[X <= e]` for `X ~ Binomial(b, p)`, summed in log space.
pub fn binomial_tail(b: u64, e: u64, p: f64) -> f64 {
    if p <= 0.0 {
        return 1.0;
    }
    if p >= 1.0 {
        return if e >= b { 1.0 } else { 0.0 };
    }
    let (lp, lq) = (p.ln(), (-p).ln_1p());
    let terms: Vec<f64> = (0..=e.min(b))
        .map(|i| ln_choose(b, i) + i as f64 * lp + (b - i) as f64 * lq)
        .collect();
    let top = terms.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    (top + terms.iter().map(|t| (t - top).exp()).sum::<f64>().ln()).exp().min(1.0)
}

/// The `p` in `[e/b, 1)` where the binomial tail up to `e` equals `c`,
/// by bisection to 1e-12.
pub fn solve_p(b: u64, e: u64, c: f64) -> Result<f64, EntropyError> {
    if b == 0 || e > b || !(c > 0.0 && c < 1.0) {
        return Err(EntropyError::InvalidInputs("solve_p needs b > 0, e <= b, 0 < c < 1"));
    }
    let mut lo = e as f64 / b as f64;
    let mut hi = 1.0;
    if binomial_tail(b, e, lo) < c {
        return Err(EntropyError::EstimateUndefined("binomial tail is below c at p = e/b"));
    }
    while hi - lo > 1e-12 {
        let mid = 0.5 * (lo + hi);
        if binomial_tail(b, e, mid) > c {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

fn bennett(i: &EntropyInputs) -> f64 {
    let (b, e) = (i.b as f64, i.e as f64);
    let k = erfc_inv(i.c);
    b - e - 4.0 * e / 2f64.sqrt() - k * ((8.0 + 4.0 * 2f64.sqrt()) * e).sqrt()
}

fn slutsky(i: &EntropyInputs) -> Result<f64, EntropyError> {
    let (b, e) = (i.b as f64, i.e as f64);
    let k = erfc_inv(i.c);
    let ep = (e / b + k / (2.0 * b).sqrt()).min(1.0 / 3.0);
    let u = (1.0 - 3.0 * ep) / (1.0 - ep);
    let arg = 1.0 - 0.5 * u * u;
    if arg <= 0.0 {
        return Err(EntropyError::EstimateUndefined("Slutsky log argument is not positive"));
    }
    Ok((b - e) * (1.0 + arg.log2()) - k * ((b - e) / 2.0).sqrt())
}

/// `p_E = 1/2 + sqrt(q (1 - q))` with `q = p / (1 - p)`.
pub fn p_e(p: f64) -> Result<f64, EntropyError> {
    let q = p / (1.0 - p);
    let v = q * (1.0 - q);
    if !(v >= 0.0) {
        return Err(EntropyError::EstimateUndefined("p_E needs p <= 1/2"));
    }
    Ok(0.5 + v.sqrt())
}

/// Myers-Pearson objective at a given `R`.
pub fn myers_pearson_objective(b: u64, e: u64, c: f64, pe: f64, r: f64) -> f64 {
    let n = (b - e) as f64;
    n / (1.0 - r) * (pe.powf(r) + (1.0 - pe).powf(r)).log2() - (r / (c * (r - 1.0))).log2() - 2.0
}

/// Maximizes the Myers-Pearson objective over `R` in (1, 2); returns
/// `(t, R, p_E)`. The optimum often sits very close to 1, so the search
/// runs over `ln(R - 1)`: a coarse scan, then golden-section refinement.
pub fn myers_pearson(i: &EntropyInputs) -> Result<(f64, f64, f64), EntropyError> {
    let p = solve_p(i.b, i.e, i.c)?;
    let pe = p_e(p)?;
    let f = |u: f64| myers_pearson_objective(i.b, i.e, i.c, pe, 1.0 + u.exp());
    let (lo, hi) = (-30.0f64, 0.0f64);
    let steps = 300;
    let h = (hi - lo) / steps as f64;
    let best = (0..=steps)
        .map(|s| lo + s as f64 * h)
        .max_by(|a, b| f(*a).total_cmp(&f(*b)))
        .expect("non-empty scan");
    let (mut a, mut z) = ((best - h).max(lo), (best + h).min(hi));
    let g = (5f64.sqrt() - 1.0) / 2.0;
    let (mut x1, mut x2) = (z - g * (z - a), a + g * (z - a));
    let (mut f1, mut f2) = (f(x1), f(x2));
    for _ in 0..200 {
        if f1 < f2 {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + g * (z - a);
            f2 = f(x2);
        } else {
            z = x2;
            x2 = x1;
            f2 = f1;
            x1 = z - g * (z - a);
            f1 = f(x1);
        }
        if (z.exp() - a.exp()) < 1e-12 {
            break;
        }
    }
    let u = 0.5 * (a + z);
    let t = f(u);
    if !t.is_finite() {
        return Err(EntropyError::EstimateUndefined("Myers-Pearson objective is not finite"));
    }
    Ok((t, 1.0 + u.exp(), pe))
}

fn shor_preskill(i: &EntropyInputs) -> Result<f64, EntropyError> {
    let p = solve_p(i.b, i.e, i.c)?;
    let h = p * p.log2() + (1.0 - p) * (1.0 - p).log2();
    Ok((i.b - i.e) as f64 * (1.0 + h) + 2.0 * i.c.log2())
}

/// The estimator's bound `t`, before any deduction.
pub fn estimate_t(kind: EstimatorKind, inputs: &EntropyInputs) -> Result<f64, EntropyError> {
    inputs.validate()?;
    match kind {
        EstimatorKind::Bennett => Ok(bennett(inputs)),
        EstimatorKind::Slutsky => slutsky(inputs),
        EstimatorKind::MyersPearson => myers_pearson(inputs).map(|(t, _, _)| t),
        EstimatorKind::ShorPreskill => shor_preskill(inputs),
    }
}

/// `clamp(floor(t - r - d), 0, b)`.
pub fn usable_from_t(t: f64, r: f64, d: u64, b: u64) -> u64 {
    let v = (t - r - d as f64).floor();
    if v.is_nan() || v <= 0.0 {
        0
    } else {
        (v as u64).min(b)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Usable {
    pub bits: u64,
    pub t: Option<f64>,
    /// Set when the estimate was undefined and the block yields nothing.
    pub warning: Option<EntropyError>,
}

pub fn usable_entropy(kind: EstimatorKind, inputs: &EntropyInputs) -> Usable {
    match estimate_t(kind, inputs) {
        Ok(t) => Usable {
            bits: usable_from_t(t, inputs.r, inputs.d, inputs.b),
            t: Some(t),
            warning: None,
        },
        Err(w) => Usable {
            bits: 0,
            t: None,
            warning: Some(w),
        },
    }
}
