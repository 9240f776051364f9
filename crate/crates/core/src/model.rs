//! Equation definition: exponents, perturbation terms and their bounds.
//!
//! The model under study is
//!
//! ```text
//! ∂ₜ²u = ∂ᵣ²u + ((N−1)/r)∂ᵣu + |u|^{p−1}u + f(u) + g(r, t, ∂ᵣu, ∂ₜu)
//! ```
//!
//! with p > 1 (and p ≤ 1 + 4/(N−1) when N ≥ 2), |f(u)| ≤ M(1+|u|^q) for
//! some 1 ≤ q < p, and g globally Lipschitz with |g| ≤ M(1+|v|+|z|).  The
//! decay rate entering the damped functionals is γ = min(1/2, (p−q)/(p−1)).

use crate::error::{Error, Result};
use crate::expr::Expr;
use serde::{Deserialize, Serialize};

/// Lower-order source term f(u).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum SourceTerm {
    /// f ≡ 0.
    Zero,
    /// f(u) = −u (Klein–Gordon).
    NegIdentity,
    /// User expression in the variable `u`.
    Expr(Expr),
    /// λ-dilation wrapper: f_λ(u) = λ^{2p/(p−1)} f(λ^{−2/(p−1)} u).
    Scaled { lambda: f64, p: f64, inner: Box<SourceTerm> },
}

impl SourceTerm {
    pub fn eval(&self, u: f64) -> f64 {
        match self {
            SourceTerm::Zero => 0.0,
            SourceTerm::NegIdentity => -u,
            SourceTerm::Expr(e) => e.eval(&[u]),
            SourceTerm::Scaled { lambda, p, inner } => {
                let a = 2.0 / (p - 1.0);
                lambda.powf(a * p) * inner.eval(lambda.powf(-a) * u)
            }
        }
    }

    pub fn is_zero(&self) -> bool {
        matches!(self, SourceTerm::Zero)
    }
}

/// Gradient perturbation g(|x|, t, ∂ᵣu, ∂ₜu).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum GradientTerm {
    /// g ≡ 0.
    Zero,
    /// User expression in the variables `x, t, v, z`.
    Expr(Expr),
    /// λ-dilation wrapper:
    /// g_λ(x,t,v,z) = λ^{2p/(p−1)} g(λx, λt, λ^{−(p+1)/(p−1)}v, λ^{−(p+1)/(p−1)}z).
    Scaled { lambda: f64, p: f64, inner: Box<GradientTerm> },
}

impl GradientTerm {
    pub fn eval(&self, x: f64, t: f64, v: f64, z: f64) -> f64 {
        match self {
            GradientTerm::Zero => 0.0,
            GradientTerm::Expr(e) => e.eval(&[x, t, v, z]),
            GradientTerm::Scaled { lambda, p, inner } => {
                let b = (p + 1.0) / (p - 1.0);
                lambda.powf(2.0 * p / (p - 1.0))
                    * inner.eval(lambda * x, lambda * t, lambda.powf(-b) * v, lambda.powf(-b) * z)
            }
        }
    }

    pub fn is_zero(&self) -> bool {
        matches!(self, GradientTerm::Zero)
    }
}

/// Named preset equations.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Preset {
    /// f ≡ 0, g ≡ 0.
    PurePower,
    /// f(u) = −u, g ≡ 0.
    KleinGordon,
    /// f and g from expression sources.
    Custom,
}

/// The equation: exponents, dimension, bounds and perturbation terms.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EquationSpec {
    pub p: f64,
    pub n_dim: u32,
    /// Sub-power q in the (H_f) bound, 1 ≤ q < p.
    pub q: f64,
    /// Bound constant M in (H_f)/(H_g).
    pub m_bound: f64,
    pub preset: Preset,
    pub f: SourceTerm,
    pub g: GradientTerm,
    /// γ = min(1/2, (p−q)/(p−1)); stored, and must always satisfy this.
    pub gamma: f64,
}

fn check_exponents(p: f64, n_dim: u32, q: f64, m_bound: f64) -> Result<f64> {
    let subcritical = p > 1.0 && (n_dim < 2 || p <= 1.0 + 4.0 / (n_dim as f64 - 1.0));
    if !subcritical || !p.is_finite() {
        return Err(Error::InvalidExponent { p, n: n_dim });
    }
    if !(1.0..=f64::MAX).contains(&q) || q >= p || m_bound <= 0.0 {
        return Err(Error::InvalidBound { q, m: m_bound, p });
    }
    Ok((0.5f64).min((p - q) / (p - 1.0)))
}

impl EquationSpec {
    /// Pure power nonlinearity. q and M are vacuous (f ≡ 0) and default to 1.
    pub fn pure_power(p: f64, n_dim: u32) -> Result<Self> {
        let gamma = check_exponents(p, n_dim, 1.0, 1.0)?;
        Ok(EquationSpec {
            p,
            n_dim,
            q: 1.0,
            m_bound: 1.0,
            preset: Preset::PurePower,
            f: SourceTerm::Zero,
            g: GradientTerm::Zero,
            gamma,
        })
    }

    /// Klein–Gordon: f(u) = −u, so q = 1, M = 1.
    pub fn klein_gordon(p: f64, n_dim: u32) -> Result<Self> {
        let gamma = check_exponents(p, n_dim, 1.0, 1.0)?;
        Ok(EquationSpec {
            p,
            n_dim,
            q: 1.0,
            m_bound: 1.0,
            preset: Preset::KleinGordon,
            f: SourceTerm::NegIdentity,
            g: GradientTerm::Zero,
            gamma,
        })
    }

    /// Custom f/g from expression sources (either may be empty for zero).
    pub fn custom(
        p: f64,
        n_dim: u32,
        q: f64,
        m_bound: f64,
        f_src: Option<&str>,
        g_src: Option<&str>,
    ) -> Result<Self> {
        let gamma = check_exponents(p, n_dim, q, m_bound)?;
        let f = match f_src {
            None | Some("") => SourceTerm::Zero,
            Some(src) => SourceTerm::Expr(Expr::parse(src, &["u"])?),
        };
        let g = match g_src {
            None | Some("") => GradientTerm::Zero,
            Some(src) => GradientTerm::Expr(Expr::parse(src, &["x", "t", "v", "z"])?),
        };
        Ok(EquationSpec { p, n_dim, q, m_bound, preset: Preset::Custom, f, g, gamma })
    }

    /// The λ-dilated equation solved by
    /// U(x,t) = λ^{2/(p−1)} u(λx, λ(t−t₀) + ...): same p, f and g wrapped by
    /// the dilation so that its radial solver form is unchanged.
    pub fn rescaled(&self, lambda: f64) -> Self {
        let mut out = self.clone();
        if !self.f.is_zero() {
            out.f = SourceTerm::Scaled { lambda, p: self.p, inner: Box::new(self.f.clone()) };
        }
        if !self.g.is_zero() {
            out.g = GradientTerm::Scaled { lambda, p: self.p, inner: Box::new(self.g.clone()) };
        }
        out
    }

    /// Antiderivative F(u) = ∫₀ᵘ f(v) dv.  Closed forms for the presets and
    /// the dilation wrapper; adaptive Simpson quadrature for expressions.
    pub fn antiderivative_f(&self, u: f64) -> f64 {
        antiderivative(&self.f, self.p, u)
    }

    /// e^{−2ps/(p−1)} f(e^{2s/(p−1)} w): the f-term of the w-equation.
    /// Closed forms avoid overflow of the inner exponential for presets.
    pub fn scaled_f(&self, s: f64, w: f64) -> f64 {
        match &self.f {
            SourceTerm::Zero => 0.0,
            SourceTerm::NegIdentity => -(-2.0 * s).exp() * w,
            other => {
                let a = 2.0 / (self.p - 1.0);
                (-a * self.p * s).exp() * other.eval((a * s).exp() * w)
            }
        }
    }

    /// e^{−2(p+1)s/(p−1)} F(e^{2s/(p−1)} w): the integrand factor of the
    /// I-correction.  Closed forms for presets.
    pub fn scaled_antiderivative_f(&self, s: f64, w: f64) -> f64 {
        match &self.f {
            SourceTerm::Zero => 0.0,
            // e^{-2(p+1)s/(p-1)} * (-(e^{2s/(p-1)} w)^2 / 2) = -e^{-2s} w^2/2
            SourceTerm::NegIdentity => -(-2.0 * s).exp() * w * w / 2.0,
            other => {
                let a = 2.0 / (self.p - 1.0);
                (-a * (self.p + 1.0) * s).exp() * antiderivative(other, self.p, (a * s).exp() * w)
            }
        }
    }

    /// The g-term of the w-equation at similarity point (y, s) around
    /// (r₀, T₀): e^{−2ps/(p−1)} g(r₀+y e^{−s}, T₀−e^{−s}, e^{(p+1)s/(p−1)}∂ᵧw,
    /// e^{(p+1)s/(p−1)}(∂ₛw + y∂ᵧw + 2w/(p−1))).
    #[allow(clippy::too_many_arguments)]
    pub fn scaled_g(&self, s: f64, y: f64, r0: f64, t0: f64, w: f64, wy: f64, ws: f64) -> f64 {
        if self.g.is_zero() {
            return 0.0;
        }
        let pm = self.p - 1.0;
        let es = (-s).exp();
        let boost = ((self.p + 1.0) / pm * s).exp();
        let z = ws + y * wy + 2.0 / pm * w;
        (-2.0 * self.p / pm * s).exp()
            * self.g.eval(r0 + y * es, t0 - es, boost * wy, boost * z)
    }

    /// Sample-based check of (H_f), (H_g) and a Lipschitz estimate for g.
    pub fn validate_hypotheses(&self, samples: u32, seed: u64) -> Result<HypothesisReport> {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let mut f_margin: f64 = f64::INFINITY;
        let mut f_worst = 0.0;
        // log-spaced |u| from 1e-3 to 1e6, both signs
        for i in 0..samples {
            let mag = 10f64.powf(-3.0 + 9.0 * (i as f64 + 0.5) / samples as f64);
            for u in [mag, -mag] {
                let bound = self.m_bound * (1.0 + mag.powf(self.q));
                let val = self.f.eval(u).abs();
                if !val.is_finite() {
                    return Err(Error::Hypothesis {
                        detail: format!("f({u:.3e}) is not finite"),
                    });
                }
                if bound - val < f_margin {
                    f_margin = bound - val;
                    f_worst = u;
                }
            }
        }
        if f_margin < 0.0 {
            return Err(Error::Hypothesis {
                detail: format!(
                    "|f(u)| > M(1+|u|^q) at u = {f_worst:.6e} (margin {f_margin:.3e})"
                ),
            });
        }
        let mut g_margin: f64 = f64::INFINITY;
        let mut lip: f64 = 0.0;
        if !self.g.is_zero() {
            for _ in 0..samples {
                let x = rng.gen_range(0.0..10.0);
                let t = rng.gen_range(0.0..10.0);
                let v = rng.gen_range(-100.0..100.0);
                let z = rng.gen_range(-100.0..100.0);
                let val = self.g.eval(x, t, v, z).abs();
                if !val.is_finite() {
                    return Err(Error::Hypothesis {
                        detail: format!("g({x:.2},{t:.2},{v:.2},{z:.2}) is not finite"),
                    });
                }
                let bound = self.m_bound * (1.0 + v.abs() + z.abs());
                g_margin = g_margin.min(bound - val);
                // directional difference quotients for the Lipschitz estimate
                let h = 1e-4;
                for k in 0..4 {
                    let mut a = [x, t, v, z];
                    a[k] += h;
                    let d = (self.g.eval(a[0], a[1], a[2], a[3]) - self.g.eval(x, t, v, z)).abs();
                    lip = lip.max(d / h);
                }
            }
            if g_margin < 0.0 {
                return Err(Error::Hypothesis {
                    detail: format!("|g| > M(1+|v|+|z|) somewhere (margin {g_margin:.3e})"),
                });
            }
        } else {
            g_margin = self.m_bound;
        }
        Ok(HypothesisReport {
            f_bound_margin: f_margin,
            g_bound_margin: g_margin,
            g_lipschitz_estimate: lip,
        })
    }
}

fn antiderivative(f: &SourceTerm, p: f64, u: f64) -> f64 {
    match f {
        SourceTerm::Zero => 0.0,
        SourceTerm::NegIdentity => -u * u / 2.0,
        SourceTerm::Expr(e) => adaptive_simpson(&|x| e.eval(&[x]), 0.0, u, 1e-12, 40),
        SourceTerm::Scaled { lambda, p: ps, inner } => {
            let a = 2.0 / (ps - 1.0);
            debug_assert_eq!(*ps, p);
            lambda.powf(a * (ps + 1.0)) * antiderivative(inner, *ps, lambda.powf(-a) * u)
        }
    }
}

/// Adaptive Simpson quadrature on [a, b] (b may be below a).
pub(crate) fn adaptive_simpson(f: &dyn Fn(f64) -> f64, a: f64, b: f64, tol: f64, depth: u32) -> f64 {
    fn simpson(f: &dyn Fn(f64) -> f64, a: f64, fa: f64, b: f64, fb: f64) -> (f64, f64, f64) {
        let m = 0.5 * (a + b);
        let fm = f(m);
        ((b - a) / 6.0 * (fa + 4.0 * fm + fb), m, fm)
    }
    fn rec(
        f: &dyn Fn(f64) -> f64,
        a: f64,
        fa: f64,
        b: f64,
        fb: f64,
        whole: f64,
        m: f64,
        fm: f64,
        tol: f64,
        depth: u32,
    ) -> f64 {
        let (left, lm, flm) = simpson(f, a, fa, m, fm);
        let (right, rm, frm) = simpson(f, m, fm, b, fb);
        let delta = left + right - whole;
        if depth == 0 || delta.abs() <= 15.0 * tol {
            left + right + delta / 15.0
        } else {
            rec(f, a, fa, m, fm, left, lm, flm, tol / 2.0, depth - 1)
                + rec(f, m, fm, b, fb, right, rm, frm, tol / 2.0, depth - 1)
        }
    }
    if a == b {
        return 0.0;
    }
    let fa = f(a);
    let fb = f(b);
    let (whole, m, fm) = simpson(f, a, fa, b, fb);
    rec(f, a, fa, b, fb, whole, m, fm, tol.max(1e-15 * whole.abs()), depth)
}

/// Outcome of sampling the hypothesis bounds.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct HypothesisReport {
    /// min over samples of M(1+|u|^q) − |f(u)|; negative would reject.
    pub f_bound_margin: f64,
    /// min over samples of M(1+|v|+|z|) − |g|.
    pub g_bound_margin: f64,
    /// max sampled directional difference quotient of g.
    pub g_lipschitz_estimate: f64,
}

/// Serializable equation description used in config files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EquationConfig {
    pub preset: Preset,
    pub p: f64,
    #[serde(rename = "N", alias = "n")]
    pub n_dim: u32,
    #[serde(default)]
    pub q: Option<f64>,
    #[serde(rename = "M", alias = "m", default)]
    pub m_bound: Option<f64>,
    #[serde(default)]
    pub f_expr: Option<String>,
    #[serde(default)]
    pub g_expr: Option<String>,
}

impl EquationConfig {
    pub fn build(&self) -> Result<EquationSpec> {
        match self.preset {
            Preset::PurePower => EquationSpec::pure_power(self.p, self.n_dim),
            Preset::KleinGordon => EquationSpec::klein_gordon(self.p, self.n_dim),
            Preset::Custom => EquationSpec::custom(
                self.p,
                self.n_dim,
                self.q.unwrap_or(1.0),
                self.m_bound.unwrap_or(1.0),
                self.f_expr.as_deref(),
                self.g_expr.as_deref(),
            ),
        }
    }

    pub fn of_spec(spec: &EquationSpec) -> Self {
        let f_expr = match &spec.f {
            SourceTerm::Expr(e) => Some(e.src().to_string()),
            _ => None,
        };
        let g_expr = match &spec.g {
            GradientTerm::Expr(e) => Some(e.src().to_string()),
            _ => None,
        };
        EquationConfig {
            preset: spec.preset,
            p: spec.p,
            n_dim: spec.n_dim,
            q: Some(spec.q),
            m_bound: Some(spec.m_bound),
            f_expr,
            g_expr,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gamma_matches_its_definition() {
        let kg = EquationSpec::klein_gordon(3.0, 1).unwrap();
        assert_eq!(kg.gamma, 0.5, "p=3, q=1: (p-q)/(p-1) = 1 caps at 1/2");
        let c = EquationSpec::custom(3.0, 1, 2.5, 2.0, Some("u/2"), None).unwrap();
        assert!((c.gamma - 0.25).abs() < 1e-15, "(3-2.5)/2 = 0.25, got {}", c.gamma);
    }

    #[test]
    fn rejects_bad_exponents() {
        assert!(matches!(
            EquationSpec::pure_power(1.0, 1),
            Err(Error::InvalidExponent { .. })
        ));
        assert!(matches!(
            EquationSpec::pure_power(3.5, 3),
            Err(Error::InvalidExponent { .. })
        ),
        "p = 3.5 > 1 + 4/(N-1) = 3 for N = 3");
        // N = 1 carries no upper bound
        assert!(EquationSpec::pure_power(7.0, 1).is_ok());
        assert!(matches!(
            EquationSpec::custom(3.0, 1, 3.0, 1.0, None, None),
            Err(Error::InvalidBound { .. })
        ),
        "q = p must be rejected");
        assert!(matches!(
            EquationSpec::custom(3.0, 1, 0.5, 1.0, None, None),
            Err(Error::InvalidBound { .. })
        ),
        "q < 1 must be rejected");
    }

    #[test]
    fn klein_gordon_antiderivative_closed_form() {
        let kg = EquationSpec::klein_gordon(3.0, 1).unwrap();
        assert_eq!(kg.antiderivative_f(2.0), -2.0);
        assert_eq!(kg.antiderivative_f(0.0), 0.0);
    }

    // Oracle: for expression sources, F must agree with independent
    // quadrature of f from 0 to u performed at test level.
    #[test]
    fn expression_antiderivative_matches_quadrature() {
        let spec =
            EquationSpec::custom(3.0, 1, 2.0, 2.0, Some("u/(1+abs(u)) + sin(u)"), None).unwrap();
        let f = |x: f64| x / (1.0 + x.abs()) + x.sin();
        for &u in &[-3.0, -0.7, 0.0, 0.4, 2.0, 5.0] {
            // trapezoid refinement oracle, independent of adaptive Simpson
            let mut n = 64;
            let mut prev = f64::NAN;
            let mut val = 0.0;
            for _ in 0..14 {
                let h = u / n as f64;
                let mut acc = 0.5 * (f(0.0) + f(u));
                for i in 1..n {
                    acc += f(i as f64 * h);
                }
                val = acc * h;
                if (val - prev).abs() < 1e-11 {
                    break;
                }
                prev = val;
                n *= 2;
            }
            let got = spec.antiderivative_f(u);
            assert!(
                (got - val).abs() < 1e-9,
                "F({u}) = {got}, trapezoid oracle {val}"
            );
        }
    }

    #[test]
    fn scaled_f_matches_direct_evaluation_at_moderate_s() {
        let kg = EquationSpec::klein_gordon(3.0, 1).unwrap();
        for &(s, w) in &[(0.0, 0.5), (1.0, -1.2), (4.0, 2.0)] {
            let a = 2.0 / (kg.p - 1.0);
            let direct = (-a * kg.p * s).exp() * kg.f.eval((a * s).exp() * w);
            let closed = kg.scaled_f(s, w);
            assert!(
                (closed - direct).abs() <= 1e-14 * direct.abs().max(1.0),
                "s={s}, w={w}: closed {closed} vs direct {direct}"
            );
        }
    }

    #[test]
    fn rescaled_spec_composes_the_dilation() {
        let kg = EquationSpec::klein_gordon(3.0, 1).unwrap();
        let lam = 0.1;
        let r = kg.rescaled(lam);
        // f_lam(u) = lam^{2p/(p-1)} * (-(lam^{-2/(p-1)} u)) = -lam^2 u for p=3
        let u = 0.7;
        assert!(
            (r.f.eval(u) - (-lam * lam * u)).abs() < 1e-15,
            "dilated Klein-Gordon source must be -lambda^2 u at p = 3"
        );
        // F_lam(u) = -lam^2 u^2/2 at p=3
        assert!((r.antiderivative_f(u) - (-lam * lam * u * u / 2.0)).abs() < 1e-15);
    }

    #[test]
    fn hypothesis_sampling_accepts_presets_and_rejects_super_q() {
        let kg = EquationSpec::klein_gordon(3.0, 1).unwrap();
        let rep = kg.validate_hypotheses(200, 7).unwrap();
        assert!(rep.f_bound_margin >= 0.0);
        // f = u^2 claims q = 1: |u^2| > M(1+|u|) for large u
        let bad = EquationSpec::custom(3.0, 1, 1.0, 1.0, Some("u^2"), None).unwrap();
        assert!(matches!(
            bad.validate_hypotheses(200, 7),
            Err(Error::Hypothesis { .. })
        ));
    }

    #[test]
    fn lipschitz_estimate_sees_the_slope() {
        let spec = EquationSpec::custom(
            3.0,
            1,
            1.5,
            2.0,
            None,
            Some("0.5*tanh(v) + 0.25*z"),
        )
        .unwrap();
        let rep = spec.validate_hypotheses(300, 11).unwrap();
        assert!(
            rep.g_lipschitz_estimate <= 0.5 + 1e-3 && rep.g_lipschitz_estimate >= 0.25 - 1e-3,
            "directional slopes of 0.5 tanh(v) + 0.25 z lie in [0.25, 0.5], got {}",
            rep.g_lipschitz_estimate
        );
    }

    #[test]
    fn config_roundtrip() {
        let cfg = EquationConfig {
            preset: Preset::Custom,
            p: 2.5,
            n_dim: 3,
            q: Some(1.5),
            m_bound: Some(2.0),
            f_expr: Some("-u + 0.1*sin(u)".into()),
            g_expr: Some("0.01*(v+z)".into()),
        };
        let spec = cfg.build().unwrap();
        let back = EquationConfig::of_spec(&spec);
        assert_eq!(back.build().unwrap(), spec);
        let toml_text = toml::to_string(&cfg).unwrap();
        let reread: EquationConfig = toml::from_str(&toml_text).unwrap();
        assert_eq!(reread, cfg);
    }
}
