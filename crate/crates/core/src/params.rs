//! Exponent arithmetic: admissibility of (N, p, r, θ, b), the Sobolev
//! regularity window, conjugate exponents, and consistency checks on the
//! window endpoints.
//!
//! Everything here is pure arithmetic on value types; no mesh, no data.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Absolute tolerance for comparisons of strict inequalities. The standing
/// assumptions are strict, so equality-at-tolerance is reported as FAIL.
pub const BOUND_TOL: f64 = 1e-12;

/// Interior clipping width for open intervals.
pub const INTERVAL_EPS: f64 = 1e-9;

/// `a < b` up to the conservative tolerance.
#[inline]
fn strictly_less(a: f64, b: f64) -> bool {
    a < b - BOUND_TOL
}

/// The exponent tuple of the continuous problem.
///
/// `n` is the theoretical space dimension used for exponent arithmetic only;
/// it is decoupled from the computational mesh dimension. Inadmissible tuples
/// are representable on purpose so they can be reported on.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProblemParams {
    /// Space dimension N ≥ 2.
    #[serde(rename = "N")]
    pub n: u32,
    /// Growth exponent of the principal part.
    pub p: f64,
    /// Exponent of the lower-order term.
    pub r: f64,
    /// Degeneracy exponent.
    pub theta: f64,
    /// Coefficient of the lower-order term, b ≥ 0.
    pub b: f64,
}

impl ProblemParams {
    pub fn new(n: u32, p: f64, r: f64, theta: f64, b: f64) -> Result<Self> {
        let params = Self { n, p, r, theta, b };
        params.validate()?;
        Ok(params)
    }

    /// Type-level constraints only; admissibility is a separate report.
    pub fn validate(&self) -> Result<()> {
        if self.n < 2 {
            return Err(Error::InvalidParams(format!("N = {} < 2", self.n)));
        }
        for (name, v) in [("p", self.p), ("r", self.r), ("theta", self.theta), ("b", self.b)] {
            if !v.is_finite() {
                return Err(Error::InvalidParams(format!("{name} = {v} is not finite")));
            }
        }
        if self.b < 0.0 {
            return Err(Error::InvalidParams(format!("b = {} < 0", self.b)));
        }
        Ok(())
    }

    fn nf(&self) -> f64 {
        f64::from(self.n)
    }

    /// Upper bound on θ coming from the Sobolev embedding side: N/(N−1) − 1/(p−1).
    pub fn theta_bound_embedding(&self) -> f64 {
        let n = self.nf();
        n / (n - 1.0) - 1.0 / (self.p - 1.0)
    }

    /// Upper bound on θ coming from the absorption side: (p−r)/(p−1).
    pub fn theta_bound_absorption(&self) -> f64 {
        (self.p - self.r) / (self.p - 1.0)
    }

    /// Threshold on r separating the two window branches: (2N−1)/(N−1).
    pub fn r_branch_threshold(&self) -> f64 {
        let n = self.nf();
        (2.0 * n - 1.0) / (n - 1.0)
    }
}

/// Per-condition outcome of the standing assumptions.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct AdmissibilityReport {
    /// Lower bound on p: 2 − 1/N.
    pub p_lower: f64,
    /// Upper bound on p: N.
    pub p_upper: f64,
    /// 2 − 1/N < p < N.
    pub p_ok: bool,
    /// 1 ≤ r < p.
    pub r_ok: bool,
    /// Embedding-side θ bound.
    pub theta_bound_embedding: f64,
    /// Absorption-side θ bound.
    pub theta_bound_absorption: f64,
    /// 0 ≤ θ < min of the two bounds.
    pub theta_ok: bool,
    /// b ≥ 0.
    pub b_ok: bool,
    pub pass: bool,
}

/// Checks the standing assumptions on (N, p, r, θ, b). Always returns a
/// report; nothing here errors on a merely inadmissible tuple.
pub fn check_admissible(params: &ProblemParams) -> AdmissibilityReport {
    let n = params.nf();
    let p_lower = 2.0 - 1.0 / n;
    let p_upper = n;
    let p_ok = strictly_less(p_lower, params.p) && strictly_less(params.p, p_upper);
    let r_ok = params.r >= 1.0 && strictly_less(params.r, params.p);
    let theta_bound_embedding = params.theta_bound_embedding();
    let theta_bound_absorption = params.theta_bound_absorption();
    let theta_ok = params.theta >= 0.0
        && strictly_less(params.theta, theta_bound_embedding.min(theta_bound_absorption));
    let b_ok = params.b >= 0.0;
    let pass = p_ok && r_ok && theta_ok && b_ok;
    AdmissibilityReport {
        p_lower,
        p_upper,
        p_ok,
        r_ok,
        theta_bound_embedding,
        theta_bound_absorption,
        theta_ok,
        b_ok,
        pass,
    }
}

fn require_admissible(params: &ProblemParams) -> Result<AdmissibilityReport> {
    let report = check_admissible(params);
    if report.pass {
        return Ok(report);
    }
    let mut failed = Vec::new();
    if !report.p_ok {
        failed.push(format!(
            "p = {} outside ({}, {})",
            params.p, report.p_lower, report.p_upper
        ));
    }
    if !report.r_ok {
        failed.push(format!("r = {} outside [1, {})", params.r, params.p));
    }
    if !report.theta_ok {
        failed.push(format!(
            "theta = {} outside [0, {})",
            params.theta,
            report.theta_bound_embedding.min(report.theta_bound_absorption)
        ));
    }
    if !report.b_ok {
        failed.push(format!("b = {} < 0", params.b));
    }
    Err(Error::Inadmissible(failed.join("; ")))
}

/// Which endpoint formula applies to the lower end of the window.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Branch {
    /// r ≥ (2N−1)/(N−1): lower endpoint N(r−1)/(N+r−1).
    HighR,
    /// r < (2N−1)/(N−1): lower endpoint 1.
    LowR,
}

/// The open interval of exponents q for which solutions land in W^{1,q}.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct ExponentRange {
    /// Exclusive lower bound.
    pub lower: f64,
    /// Exclusive upper bound.
    pub upper: f64,
    pub branch: Branch,
    pub nonempty: bool,
}

impl ExponentRange {
    /// An interior point: geometric mean of the bounds, clipped to
    /// (lower + ε, upper − ε).
    pub fn midpoint(&self) -> f64 {
        let gm = (self.lower * self.upper).sqrt();
        gm.clamp(self.lower + INTERVAL_EPS, self.upper - INTERVAL_EPS)
    }

    pub fn contains(&self, q: f64) -> bool {
        self.lower < q && q < self.upper
    }
}

/// Computes the admissible q-interval. Rejects inadmissible tuples, naming
/// the failed assumption.
pub fn q_range(params: &ProblemParams) -> Result<ExponentRange> {
    require_admissible(params)?;
    let n = params.nf();
    let upper = n * (params.p - 1.0) * (1.0 - params.theta) / (n - 1.0 - params.theta * (params.p - 1.0));
    let branch = if params.r >= params.r_branch_threshold() {
        Branch::HighR
    } else {
        Branch::LowR
    };
    let lower = match branch {
        Branch::HighR => n * (params.r - 1.0) / (n + params.r - 1.0),
        Branch::LowR => 1.0,
    };
    Ok(ExponentRange {
        lower,
        upper,
        branch,
        nonempty: lower < upper,
    })
}

/// Sobolev conjugate q* = Nq/(N − q) for 1 ≤ q < N.
pub fn sobolev_conjugate(q: f64, n: u32) -> Result<f64> {
    let nf = f64::from(n);
    if !(1.0..).contains(&q) || q >= nf {
        return Err(Error::InvalidExponent(format!(
            "sobolev conjugate requires 1 <= q < N, got q = {q}, N = {n}"
        )));
    }
    Ok(nf * q / (nf - q))
}

/// Consistency checks on the window endpoints.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct Remark1Report {
    /// High-r interval sits inside (1, upper). `None` when the low-r branch
    /// applies (vacuous).
    pub high_r_interval_inside: Option<bool>,
    /// r − 1 < Nq/(N−q) throughout the interval; checked at the infimum + ε
    /// since q ↦ Nq/(N−q) is increasing.
    pub embedding_dominates_r: bool,
    /// upper < p.
    pub upper_below_p: bool,
    pub pass: bool,
}

pub fn check_remark1(params: &ProblemParams) -> Result<Remark1Report> {
    let range = q_range(params)?;
    let high_r_interval_inside = match range.branch {
        Branch::HighR => Some(range.lower >= 1.0),
        Branch::LowR => None,
    };
    let q_inf = range.lower + INTERVAL_EPS;
    let conj = sobolev_conjugate(q_inf, params.n)?;
    let embedding_dominates_r = strictly_less(params.r - 1.0, conj);
    let upper_below_p = strictly_less(range.upper, params.p);
    let pass = high_r_interval_inside.unwrap_or(true) && embedding_dominates_r && upper_below_p;
    Ok(Remark1Report {
        high_r_interval_inside,
        embedding_dominates_r,
        upper_below_p,
        pass,
    })
}

/// Stricter θ threshold under which the flux itself converges strongly:
/// min{1/(N−p+1), N/(N−1) − 1/(p−1), (p−r)/(p−1)}.
pub fn strong_theta_bound(n: u32, p: f64, r: f64) -> f64 {
    let nf = f64::from(n);
    (1.0 / (nf - p + 1.0))
        .min(nf / (nf - 1.0) - 1.0 / (p - 1.0))
        .min((p - r) / (p - 1.0))
}

impl ProblemParams {
    /// Whether θ sits below the stricter flux-convergence threshold.
    pub fn has_strong_theta(&self) -> bool {
        strictly_less(self.theta, strong_theta_bound(self.n, self.p, self.r))
    }
}

/// Draws a parameter tuple uniformly from the interior of the admissible
/// region: N ∈ {2..10}, then p, r, θ inside their constraints with a small
/// relative margin so conservative comparisons cannot flake.
pub fn sample_admissible<R: rand::Rng>(rng: &mut R) -> ProblemParams {
    const MARGIN: f64 = 1e-6;
    let n: u32 = rng.gen_range(2..=10);
    let nf = f64::from(n);
    let p_lo = 2.0 - 1.0 / nf;
    let p = p_lo + (nf - p_lo) * rng.gen_range(MARGIN..1.0 - MARGIN);
    let r = 1.0 + (p - 1.0) * rng.gen_range(0.0..1.0 - MARGIN);
    let params = ProblemParams { n, p, r, theta: 0.0, b: rng.gen_range(0.0..2.0) };
    let theta_max = params.theta_bound_embedding().min(params.theta_bound_absorption());
    ProblemParams {
        theta: theta_max * rng.gen_range(0.0..1.0 - MARGIN),
        ..params
    }
}
