//! Scalar models for the diffusivity a(s) and the reaction f(s), together with
//! the structural checks a run must pass before the operators are trusted:
//! ellipticity and boundedness of a, the sign condition a'(s)s >= 0 away from
//! a threshold, polynomial growth of f, strict superlinearity, and the
//! monotonicity of H(s) = (n-p)s - n*p*F(s)/f(s) that drives uniqueness.

use std::fmt;
use std::sync::Arc;

use serde::Serialize;

use crate::error::{Error, Result};

pub type ScalarFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// Diffusivity a(s) with first and second derivatives and its declared
/// structural constants: ellipticity floor `eta`, envelope `cap` for |a| and
/// |a'| on the working range, and the sign-condition threshold `rho`.
#[derive(Clone)]
pub struct CoefficientModel {
    pub name: String,
    a: ScalarFn,
    a1: ScalarFn,
    a2: ScalarFn,
    pub eta: f64,
    pub cap: f64,
    pub rho: f64,
}

impl fmt::Debug for CoefficientModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("CoefficientModel")
            .field("name", &self.name)
            .field("eta", &self.eta)
            .field("cap", &self.cap)
            .field("rho", &self.rho)
            .finish()
    }
}

impl CoefficientModel {
    pub fn new(
        name: impl Into<String>,
        a: ScalarFn,
        a1: ScalarFn,
        a2: ScalarFn,
        eta: f64,
        cap: f64,
        rho: f64,
    ) -> Self {
        CoefficientModel {
            name: name.into(),
            a,
            a1,
            a2,
            eta,
            cap,
            rho,
        }
    }

    /// a == 1: the flow degenerates to the pure p-Laplacian.
    pub fn constant() -> Self {
        CoefficientModel::new(
            "const",
            Arc::new(|_| 1.0),
            Arc::new(|_| 0.0),
            Arc::new(|_| 0.0),
            1.0,
            1.0,
            0.0,
        )
    }

    /// a(s) = 1 + s^2. Satisfies a'(s)s = 2s^2 >= 0 everywhere, so rho = 0.
    /// The envelope cap = 200 covers |s| <= 14, far beyond any shipped run.
    pub fn quadratic() -> Self {
        CoefficientModel::new(
            "quadratic",
            Arc::new(|s| 1.0 + s * s),
            Arc::new(|s| 2.0 * s),
            Arc::new(|_| 2.0),
            1.0,
            200.0,
            0.0,
        )
    }

    pub fn from_name(name: &str) -> Result<Self> {
        match name {
            "const" => Ok(CoefficientModel::constant()),
            "quadratic" => Ok(CoefficientModel::quadratic()),
            other => Err(Error::Config(format!(
                "unknown diffusivity model '{other}' (known: const, quadratic)"
            ))),
        }
    }

    pub fn a(&self, s: f64) -> f64 {
        (self.a)(s)
    }

    pub fn a1(&self, s: f64) -> f64 {
        (self.a1)(s)
    }

    pub fn a2(&self, s: f64) -> f64 {
        (self.a2)(s)
    }
}

/// Reaction f(s) with derivative and antiderivative F(s), its growth envelope
/// |f(s)| <= c1 + c2|s|^sigma, and the pair (n, p) the run is set in.
#[derive(Clone)]
pub struct NonlinearityModel {
    pub name: String,
    f: ScalarFn,
    f1: ScalarFn,
    big_f: ScalarFn,
    pub sigma: f64,
    pub c1: f64,
    pub c2: f64,
    pub n: u32,
    pub p: f64,
}

impl fmt::Debug for NonlinearityModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("NonlinearityModel")
            .field("name", &self.name)
            .field("sigma", &self.sigma)
            .field("n", &self.n)
            .field("p", &self.p)
            .finish()
    }
}

impl NonlinearityModel {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        name: impl Into<String>,
        f: ScalarFn,
        f1: ScalarFn,
        big_f: ScalarFn,
        sigma: f64,
        c1: f64,
        c2: f64,
        n: u32,
        p: f64,
    ) -> Self {
        NonlinearityModel {
            name: name.into(),
            f,
            f1,
            big_f,
            sigma,
            c1,
            c2,
            n,
            p,
        }
    }

    pub fn zero(n: u32, p: f64) -> Self {
        NonlinearityModel::new(
            "zero",
            Arc::new(|_| 0.0),
            Arc::new(|_| 0.0),
            Arc::new(|_| 0.0),
            1.0,
            0.0,
            0.0,
            n,
            p,
        )
    }

    /// f == c (the torsion-type load for c = 1).
    pub fn constant(c: f64, n: u32, p: f64) -> Self {
        NonlinearityModel::new(
            format!("const:{c}"),
            Arc::new(move |_| c),
            Arc::new(|_| 0.0),
            Arc::new(move |s| c * s),
            1.0,
            c.abs(),
            0.0,
            n,
            p,
        )
    }

    /// f(s) = s^q for s >= 0, extended oddly below zero. q = 0 gives f == 1.
    pub fn power(q: f64, n: u32, p: f64) -> Result<Self> {
        if !(q.is_finite() && q >= 0.0) {
            return Err(Error::Config(format!("power exponent must be >= 0, got {q}")));
        }
        if q == 0.0 {
            return Ok(NonlinearityModel::constant(1.0, n, p));
        }
        let (c1, sigma) = if q >= 1.0 { (0.0, q) } else { (1.0, 1.0) };
        Ok(NonlinearityModel::new(
            format!("power:{q}"),
            Arc::new(move |s: f64| s.signum() * s.abs().powf(q)),
            Arc::new(move |s: f64| q * s.abs().powf(q - 1.0)),
            Arc::new(move |s: f64| s.abs().powf(q + 1.0) / (q + 1.0)),
            sigma,
            c1,
            1.0,
            n,
            p,
        ))
    }

    /// f(s) = s^(pstar - 1), the borderline growth. Defined only for p < n.
    pub fn critical(n: u32, p: f64) -> Result<Self> {
        if p >= n as f64 {
            return Err(Error::Precondition(format!(
                "critical exponent needs p < n, got p = {p}, n = {n}"
            )));
        }
        let pstar = n as f64 * p / (n as f64 - p);
        let mut nm = NonlinearityModel::power(pstar - 1.0, n, p)?;
        nm.name = "critical".into();
        Ok(nm)
    }

    /// Parse "zero", "const:<c>", "power:<q>", or "critical".
    pub fn from_name(name: &str, n: u32, p: f64) -> Result<Self> {
        if name == "zero" {
            return Ok(NonlinearityModel::zero(n, p));
        }
        if name == "critical" {
            return NonlinearityModel::critical(n, p);
        }
        if let Some(q) = name.strip_prefix("power:") {
            let q: f64 = q
                .parse()
                .map_err(|_| Error::Config(format!("bad power exponent in '{name}'")))?;
            return NonlinearityModel::power(q, n, p);
        }
        if let Some(c) = name.strip_prefix("const:") {
            let c: f64 = c
                .parse()
                .map_err(|_| Error::Config(format!("bad constant in '{name}'")))?;
            return Ok(NonlinearityModel::constant(c, n, p));
        }
        Err(Error::Config(format!(
            "unknown reaction model '{name}' (known: zero, const:<c>, power:<q>, critical)"
        )))
    }

    pub fn f(&self, s: f64) -> f64 {
        (self.f)(s)
    }

    pub fn f1(&self, s: f64) -> f64 {
        (self.f1)(s)
    }

    pub fn big_f(&self, s: f64) -> f64 {
        (self.big_f)(s)
    }

    /// Sobolev conjugate n*p/(n-p); +inf when p >= n.
    pub fn pstar(&self) -> f64 {
        let n = self.n as f64;
        if self.p < n {
            n * self.p / (n - self.p)
        } else {
            f64::INFINITY
        }
    }
}

/// Zero extension: f_hat agrees with f on s >= 0 and vanishes below, so
/// negative undershoots receive no reaction. Applying it twice is pointwise
/// identical to applying it once.
pub fn extend_f_hat(nm: &NonlinearityModel) -> NonlinearityModel {
    let f = nm.f.clone();
    let f1 = nm.f1.clone();
    let big_f = nm.big_f.clone();
    let name = if nm.name.ends_with(".hat") {
        nm.name.clone()
    } else {
        format!("{}.hat", nm.name)
    };
    NonlinearityModel::new(
        name,
        Arc::new(move |s: f64| if s >= 0.0 { f(s) } else { 0.0 }),
        Arc::new(move |s: f64| if s >= 0.0 { f1(s) } else { 0.0 }),
        Arc::new(move |s: f64| big_f(s.max(0.0))),
        nm.sigma,
        nm.c1,
        nm.c2,
        nm.n,
        nm.p,
    )
}

/// Outcome of the structural / uniqueness checks. Flags not exercised by a
/// given check are left true; `witnesses` names each failed condition with the
/// sample that broke it.
#[derive(Debug, Clone, Serialize)]
pub struct HypothesisReport {
    pub ellipticity_ok: bool,
    pub sign_condition_ok: bool,
    pub growth_ok: bool,
    pub positivity_ok: bool,
    pub superlinearity_ok: bool,
    pub h_monotone_ok: bool,
    pub h_values: Vec<(f64, f64)>,
    pub witnesses: Vec<String>,
}

impl HypothesisReport {
    fn fresh() -> Self {
        HypothesisReport {
            ellipticity_ok: true,
            sign_condition_ok: true,
            growth_ok: true,
            positivity_ok: true,
            superlinearity_ok: true,
            h_monotone_ok: true,
            h_values: Vec::new(),
            witnesses: Vec::new(),
        }
    }

    pub fn structural_ok(&self) -> bool {
        self.ellipticity_ok && self.sign_condition_ok && self.growth_ok
    }

    pub fn uniqueness_ok(&self) -> bool {
        self.positivity_ok && self.superlinearity_ok && self.h_monotone_ok
    }
}

fn finite_or_err(v: f64, what: &str, s: f64) -> Result<f64> {
    if v.is_finite() {
        Ok(v)
    } else {
        Err(Error::Eval(format!("{what} is not finite at s = {s}")))
    }
}

/// Sample-based verification of the standing structural hypotheses:
/// a >= eta and |a|, |a'| <= cap on [-s_max, s_max]; a'(s)s >= 0 for
/// |s| >= rho; |f| <= c1 + c2|s|^sigma on [0, s_max] with sigma in the
/// admissible window; f > 0 on (0, s_max].
pub fn check_structural_hypotheses(
    cm: &CoefficientModel,
    nm: &NonlinearityModel,
    s_max: f64,
    samples: usize,
) -> Result<HypothesisReport> {
    if !(s_max > 0.0 && s_max.is_finite()) {
        return Err(Error::Precondition(format!("s_max must be positive, got {s_max}")));
    }
    if samples < 2 {
        return Err(Error::Precondition("need at least 2 samples".into()));
    }
    let mut rep = HypothesisReport::fresh();

    for i in 0..=samples {
        let s = -s_max + 2.0 * s_max * i as f64 / samples as f64;
        let a = finite_or_err(cm.a(s), "a(s)", s)?;
        let a1 = finite_or_err(cm.a1(s), "a'(s)", s)?;
        finite_or_err(cm.a2(s), "a''(s)", s)?;
        if a < cm.eta || a.abs() > cm.cap || a1.abs() > cm.cap {
            if rep.ellipticity_ok {
                rep.witnesses
                    .push(format!("ellipticity/bound broken at s = {s}: a = {a}, a' = {a1}"));
            }
            rep.ellipticity_ok = false;
        }
        if s.abs() >= cm.rho && a1 * s < -1e-12 * (1.0 + s.abs()) {
            if rep.sign_condition_ok {
                rep.witnesses
                    .push(format!("sign condition broken at s = {s}: a'(s)s = {}", a1 * s));
            }
            rep.sign_condition_ok = false;
        }
    }

    let n = nm.n as f64;
    if !(nm.p > 2.0 * n / (n + 2.0)) || nm.sigma < 1.0 - 1e-12 {
        rep.growth_ok = false;
        rep.witnesses.push(format!(
            "exponent window broken: p = {}, sigma = {}, n = {}",
            nm.p, nm.sigma, nm.n
        ));
    }
    let pstar = nm.pstar();
    if pstar.is_finite() && nm.sigma >= pstar - 1.0 {
        rep.growth_ok = false;
        rep.witnesses.push(format!(
            "sigma = {} not below pstar - 1 = {}",
            nm.sigma,
            pstar - 1.0
        ));
    }
    for i in 0..=samples {
        let s = s_max * i as f64 / samples as f64;
        let fv = finite_or_err(nm.f(s), "f(s)", s)?;
        finite_or_err(nm.f1(s), "f'(s)", s)?;
        finite_or_err(nm.big_f(s), "F(s)", s)?;
        let envelope = nm.c1 + nm.c2 * s.abs().powf(nm.sigma);
        if fv.abs() > envelope + 1e-9 * (1.0 + fv.abs()) {
            if rep.growth_ok {
                rep.witnesses
                    .push(format!("growth envelope broken at s = {s}: |f| = {}", fv.abs()));
            }
            rep.growth_ok = false;
        }
        if s > 0.0 && fv <= 0.0 {
            if rep.positivity_ok {
                rep.witnesses.push(format!("f({s}) = {fv} <= 0"));
            }
            rep.positivity_ok = false;
        }
    }
    Ok(rep)
}

/// Checks the two conditions that make positive solutions unique on balls:
/// strict superlinearity 0 < (p-1)f(s) < s f'(s), and nonincreasing
/// H(s) = (n-p)s - n*p*F(s)/f(s). Requires p < n so the conjugate exponent is
/// finite; H values are returned for inspection.
pub fn check_uniqueness_conditions(
    nm: &NonlinearityModel,
    s_max: f64,
    samples: usize,
) -> Result<HypothesisReport> {
    if !(s_max > 0.0 && s_max.is_finite()) {
        return Err(Error::Precondition(format!("s_max must be positive, got {s_max}")));
    }
    if samples < 2 {
        return Err(Error::Precondition("need at least 2 samples".into()));
    }
    let n = nm.n as f64;
    let p = nm.p;
    if p >= n {
        return Err(Error::Precondition(format!(
            "uniqueness check needs p < n, got p = {p}, n = {n}"
        )));
    }
    let mut rep = HypothesisReport::fresh();

    for i in 1..=samples {
        let s = s_max * i as f64 / samples as f64;
        let fv = finite_or_err(nm.f(s), "f(s)", s)?;
        let f1v = finite_or_err(nm.f1(s), "f'(s)", s)?;
        let big = finite_or_err(nm.big_f(s), "F(s)", s)?;
        if fv == 0.0 {
            return Err(Error::Eval(format!("f({s}) = 0: H(s) undefined")));
        }
        if fv < 0.0 {
            if rep.positivity_ok {
                rep.witnesses.push(format!("f({s}) = {fv} < 0"));
            }
            rep.positivity_ok = false;
        }
        let lhs = (p - 1.0) * fv;
        let rhs = s * f1v;
        if !(lhs > 0.0) || rhs - lhs <= 1e-12 * (1.0 + rhs.abs()) {
            if rep.superlinearity_ok {
                rep.witnesses.push(format!(
                    "superlinearity broken at s = {s}: (p-1)f = {lhs}, s f' = {rhs}"
                ));
            }
            rep.superlinearity_ok = false;
        }
        let h = (n - p) * s - n * p * big / fv;
        rep.h_values.push((s, h));
    }

    for w in rep.h_values.windows(2) {
        let (s0, h0) = w[0];
        let (s1, h1) = w[1];
        let slope = (h1 - h0) / (s1 - s0);
        let tol = 1e-8 * (1.0 + h0.abs().max(h1.abs()));
        if slope > tol {
            if rep.h_monotone_ok {
                rep.witnesses
                    .push(format!("H slope {slope:.6} > 0 on [{s0}, {s1}]"));
            }
            rep.h_monotone_ok = false;
        }
    }
    Ok(rep)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fd_check(value: f64, f: impl Fn(f64) -> f64, s: f64) {
        let h = 1e-4;
        let fd = (f(s + h) - f(s - h)) / (2.0 * h);
        let tol = 1e-5 * (1.0 + value.abs());
        assert!(
            (value - fd).abs() <= tol,
            "derivative mismatch at s = {s}: {value} vs fd {fd}"
        );
    }

    #[test]
    fn catalogue_derivatives_match_finite_differences() {
        for cm in [CoefficientModel::constant(), CoefficientModel::quadratic()] {
            for i in 0..40 {
                let s = -2.0 + 4.0 * i as f64 / 39.0;
                fd_check(cm.a1(s), |x| cm.a(x), s);
                fd_check(cm.a2(s), |x| cm.a1(x), s);
            }
        }
        let nm = NonlinearityModel::power(3.0, 2, 2.0).unwrap();
        for i in 0..40 {
            let s = 0.1 + 2.0 * i as f64 / 39.0;
            fd_check(nm.f1(s), |x| nm.f(x), s);
            fd_check(nm.f(s), |x| nm.big_f(x), s);
        }
    }

    #[test]
    fn structural_check_passes_for_shipped_models() {
        let cm = CoefficientModel::quadratic();
        let nm = NonlinearityModel::power(3.0, 2, 2.0).unwrap();
        let rep = check_structural_hypotheses(&cm, &nm, 3.0, 64).unwrap();
        assert!(rep.structural_ok(), "witnesses: {:?}", rep.witnesses);
        assert!(rep.positivity_ok);
    }

    #[test]
    fn sign_condition_fails_for_decreasing_diffusivity() {
        let cm = CoefficientModel::new(
            "bad",
            Arc::new(|s: f64| 2.0 - 0.5 * (s as f64).tanh()),
            Arc::new(|s: f64| -0.5 / (s as f64).cosh().powi(2)),
            Arc::new(|s: f64| (s as f64).tanh() / (s as f64).cosh().powi(2)),
            1.0,
            3.0,
            0.5,
        );
        let nm = NonlinearityModel::zero(2, 2.0);
        let rep = check_structural_hypotheses(&cm, &nm, 2.0, 64).unwrap();
        assert!(!rep.sign_condition_ok);
        assert!(rep.ellipticity_ok);
    }

    #[test]
    fn h_slope_matches_closed_form_for_cubic() {
        // f = s^q gives F/f = s/(q+1), so H(s) = s[(n-p) - n p/(q+1)].
        // At n = 3, p = 2, q = 3 the slope is 1 - 6/4 = -1/2.
        let nm = NonlinearityModel::power(3.0, 3, 2.0).unwrap();
        let rep = check_uniqueness_conditions(&nm, 2.0, 32).unwrap();
        assert!(rep.superlinearity_ok);
        assert!(rep.h_monotone_ok);
        for w in rep.h_values.windows(2) {
            let slope = (w[1].1 - w[0].1) / (w[1].0 - w[0].0);
            assert!((slope + 0.5).abs() < 1e-12, "slope {slope}");
        }
    }

    #[test]
    fn h_monotone_iff_exponent_below_conjugate_window() {
        // n = 3, p = 2: pstar - 1 = 5. Powers 1..=5 pass, 6..=8 fail.
        for q in 1..=8u32 {
            let nm = NonlinearityModel::power(q as f64, 3, 2.0).unwrap();
            let rep = check_uniqueness_conditions(&nm, 2.0, 32).unwrap();
            assert_eq!(rep.h_monotone_ok, q <= 5, "q = {q}");
        }
        // q = 6: slope is 1 - 6/7 = 1/7 > 0.
        let nm = NonlinearityModel::power(6.0, 3, 2.0).unwrap();
        let rep = check_uniqueness_conditions(&nm, 2.0, 32).unwrap();
        let w = &rep.h_values[..2];
        let slope = (w[1].1 - w[0].1) / (w[1].0 - w[0].0);
        assert!((slope - 1.0 / 7.0).abs() < 1e-12);
        assert!(rep.superlinearity_ok);
    }

    #[test]
    fn superlinearity_strict_at_the_borderline_power() {
        // q = p - 1 makes (p-1)f(s) = s f'(s) exactly: must fail.
        let nm = NonlinearityModel::power(1.0, 3, 2.0).unwrap();
        let rep = check_uniqueness_conditions(&nm, 2.0, 32).unwrap();
        assert!(!rep.superlinearity_ok);
    }

    #[test]
    fn uniqueness_check_rejects_p_not_below_n() {
        let nm = NonlinearityModel::power(3.0, 2, 2.0).unwrap();
        assert!(matches!(
            check_uniqueness_conditions(&nm, 2.0, 16),
            Err(Error::Precondition(_))
        ));
    }

    #[test]
    fn zero_extension_is_idempotent_and_kills_negatives() {
        let nm = NonlinearityModel::power(3.0, 2, 2.0).unwrap();
        let hat = extend_f_hat(&nm);
        let hat2 = extend_f_hat(&hat);
        for i in 0..80 {
            let s = -2.0 + 4.0 * i as f64 / 79.0;
            assert_eq!(hat.f(s), hat2.f(s));
            assert_eq!(hat.big_f(s), hat2.big_f(s));
            if s < 0.0 {
                assert_eq!(hat.f(s), 0.0);
                assert_eq!(hat.big_f(s), 0.0);
            } else {
                assert_eq!(hat.f(s), nm.f(s));
            }
        }
        assert_eq!(hat.name, hat2.name);
    }

    #[test]
    fn critical_model_needs_room_below_n() {
        let crit = NonlinearityModel::critical(3, 2.0).unwrap();
        // pstar = 6, so f = s^5.
        assert!((crit.f(2.0) - 32.0).abs() < 1e-12);
        assert!(NonlinearityModel::critical(2, 2.0).is_err());
    }
}
