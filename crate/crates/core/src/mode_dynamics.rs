//! Scalar-mode model of one communication round.
//!
//! A residual eigencoordinate `x` and the outer momentum buffer `m` evolve
//! linearly across rounds, `z' = T z`, where `T` depends on the inner loop
//! only through the effective progress `sigma = 1 - (1 - eta*lambda)^S`.

use std::fmt;
use std::str::FromStr;

use num_complex::Complex;
use num_traits::Float;

use crate::error::{invalid, Error, Result};
use crate::scalar::{lit, Real, Scalar};

/// Outer optimizer family.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Method {
    HeavyBall,
    Nesterov,
}

impl Method {
    pub const ALL: [Method; 2] = [Method::HeavyBall, Method::Nesterov];

    pub fn as_str(self) -> &'static str {
        match self {
            Method::HeavyBall => "hb",
            Method::Nesterov => "nag",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "hb" | "heavy-ball" | "heavyball" => Ok(Method::HeavyBall),
            "nag" | "nesterov" => Ok(Method::Nesterov),
            other => Err(invalid("kind", format!("unknown optimizer kind `{other}`"))),
        }
    }
}

/// Inner gradient-descent loop: `steps` steps of size `eta` per round.
#[derive(Debug, Clone, PartialEq)]
pub struct InnerConfig<T> {
    eta: T,
    steps: u32,
}

impl<T: Scalar> InnerConfig<T> {
    pub fn new(eta: T, steps: u32) -> Result<Self> {
        if !eta.is_finite_value() || eta <= T::zero() {
            return Err(invalid("eta", format!("must be positive, got {eta}")));
        }
        if steps == 0 {
            return Err(invalid("steps", "at least one inner step is required"));
        }
        Ok(Self { eta, steps })
    }

    pub fn eta(&self) -> &T {
        &self.eta
    }

    pub fn steps(&self) -> u32 {
        self.steps
    }
}

/// Outer learning rate `nu` and outer momentum `beta`.
#[derive(Debug, Clone, PartialEq)]
pub struct OuterHyperparams<T> {
    nu: T,
    beta: T,
}

impl<T: Scalar> OuterHyperparams<T> {
    pub fn new(nu: T, beta: T) -> Result<Self> {
        if !nu.is_finite_value() || nu <= T::zero() {
            return Err(invalid("nu", format!("must be positive, got {nu}")));
        }
        if !beta.is_finite_value() || beta < T::zero() || beta >= T::one() {
            return Err(invalid("beta_out", format!("must lie in [0, 1), got {beta}")));
        }
        Ok(Self { nu, beta })
    }

    pub fn nu(&self) -> &T {
        &self.nu
    }

    pub fn beta(&self) -> &T {
        &self.beta
    }
}

/// Fraction of a mode's residual removed by one inner phase.
///
/// Values built with [`EffectiveProgress::new`] lie in `[0, 1]`. Values
/// above one only arise from [`EffectiveProgress::synthetic`] and are meant
/// for regime-boundary exploration; simulation entry points reject them.
#[derive(Debug, Clone, PartialEq)]
pub struct EffectiveProgress<T> {
    value: T,
    synthetic: bool,
}

impl<T: Scalar> EffectiveProgress<T> {
    pub fn new(value: T) -> Result<Self> {
        if !value.is_finite_value() || value < T::zero() || value > T::one() {
            return Err(invalid("sigma", format!("must lie in [0, 1], got {value}")));
        }
        Ok(Self {
            value,
            synthetic: false,
        })
    }

    /// Any non-negative finite value, flagged as synthetic.
    pub fn synthetic(value: T) -> Result<Self> {
        if !value.is_finite_value() || value < T::zero() {
            return Err(invalid("sigma", format!("must be non-negative, got {value}")));
        }
        Ok(Self {
            value,
            synthetic: true,
        })
    }

    pub fn value(&self) -> &T {
        &self.value
    }

    pub fn is_synthetic(&self) -> bool {
        self.synthetic
    }
}

/// `sigma = 1 - (1 - eta*lambda)^S`.
pub fn effective_sigma<T: Scalar>(
    inner: &InnerConfig<T>,
    lambda: &T,
) -> Result<EffectiveProgress<T>> {
    if !lambda.is_finite_value() || *lambda < T::zero() {
        return Err(Error::NegativeEigenvalue {
            lambda: lambda.to_f64_lossy(),
        });
    }
    let product = inner.eta.clone() * lambda.clone();
    if product > T::one() {
        return Err(Error::StepTooLarge {
            product: product.to_f64_lossy(),
        });
    }
    let retained = num_traits::pow(T::one() - product, inner.steps as usize);
    EffectiveProgress::new(T::one() - retained)
}

/// Residual coordinate and outer momentum buffer of one mode.
#[derive(Debug, Clone, PartialEq)]
pub struct ModeState<T> {
    pub x: T,
    pub m: T,
}

impl<T: Scalar> ModeState<T> {
    pub fn new(x: T, m: T) -> Self {
        Self { x, m }
    }

    /// Start of a restart cycle: residual `x0`, empty buffer.
    pub fn at_rest(x0: T) -> Self {
        Self { x: x0, m: T::zero() }
    }

    pub fn is_finite(&self) -> bool {
        self.x.is_finite_value() && self.m.is_finite_value()
    }
}

/// Real 2x2 outer-round transition acting on `(x, m)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Transition2x2<T> {
    a11: T,
    a12: T,
    a21: T,
    a22: T,
    kind: Option<Method>,
}

impl<T: Scalar> Transition2x2<T> {
    /// Arbitrary matrix, not tied to an optimizer.
    pub fn from_entries(a11: T, a12: T, a21: T, a22: T) -> Self {
        Self {
            a11,
            a12,
            a21,
            a22,
            kind: None,
        }
    }

    pub fn identity() -> Self {
        Self::from_entries(T::one(), T::zero(), T::zero(), T::one())
    }

    pub fn kind(&self) -> Option<Method> {
        self.kind
    }

    /// Row-major `[a11, a12, a21, a22]`.
    pub fn entries(&self) -> [&T; 4] {
        [&self.a11, &self.a12, &self.a21, &self.a22]
    }

    pub fn a11(&self) -> &T {
        &self.a11
    }

    pub fn a22(&self) -> &T {
        &self.a22
    }

    pub fn trace(&self) -> T {
        self.a11.clone() + self.a22.clone()
    }

    pub fn det(&self) -> T {
        self.a11.clone() * self.a22.clone() - self.a12.clone() * self.a21.clone()
    }

    fn apply(&self, z: &ModeState<T>) -> ModeState<T> {
        ModeState {
            x: self.a11.clone() * z.x.clone() + self.a12.clone() * z.m.clone(),
            m: self.a21.clone() * z.x.clone() + self.a22.clone() * z.m.clone(),
        }
    }
}

/// Heavy-ball / EMA outer update:
/// `m' = beta m + (1-beta) sigma x`, `x' = x - nu m'`.
pub fn transition_hb<T: Scalar>(
    sigma: &EffectiveProgress<T>,
    h: &OuterHyperparams<T>,
) -> Transition2x2<T> {
    let s = sigma.value.clone();
    let one_minus_beta = T::one() - h.beta.clone();
    Transition2x2 {
        a11: T::one() - h.nu.clone() * one_minus_beta.clone() * s.clone(),
        a12: -(h.nu.clone() * h.beta.clone()),
        a21: one_minus_beta * s,
        a22: h.beta.clone(),
        kind: Some(Method::HeavyBall),
    }
}

/// Nesterov outer update: same buffer, step `x' = x - nu((1+beta) m' - beta m)`.
pub fn transition_nag<T: Scalar>(
    sigma: &EffectiveProgress<T>,
    h: &OuterHyperparams<T>,
) -> Transition2x2<T> {
    let s = sigma.value.clone();
    let beta_sq = h.beta.clone() * h.beta.clone();
    Transition2x2 {
        a11: T::one() - h.nu.clone() * (T::one() - beta_sq.clone()) * s.clone(),
        a12: -(h.nu.clone() * beta_sq),
        a21: (T::one() - h.beta.clone()) * s,
        a22: h.beta.clone(),
        kind: Some(Method::Nesterov),
    }
}

pub fn transition<T: Scalar>(
    kind: Method,
    sigma: &EffectiveProgress<T>,
    h: &OuterHyperparams<T>,
) -> Transition2x2<T> {
    match kind {
        Method::HeavyBall => transition_hb(sigma, h),
        Method::Nesterov => transition_nag(sigma, h),
    }
}

/// One outer round, `z' = T z`.
pub fn step<T: Scalar>(state: &ModeState<T>, t: &Transition2x2<T>) -> Result<ModeState<T>> {
    if !state.is_finite() {
        return Err(invalid("state", "input state is not finite"));
    }
    let next = t.apply(state);
    if !next.is_finite() {
        return Err(Error::NonFiniteStep);
    }
    Ok(next)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Regime {
    ComplexConjugate,
    RealDistinct,
    Critical,
}

impl Regime {
    pub fn as_str(self) -> &'static str {
        match self {
            Regime::ComplexConjugate => "complex",
            Regime::RealDistinct => "real",
            Regime::Critical => "critical",
        }
    }
}

impl fmt::Display for Regime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Eigen-structure of a transition.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SpectralParams<T> {
    /// Eigenvalues `rho e^{+-i phi}`; `c` and `theta = atan(c)` describe
    /// the projection `chi_K = rho^K (cos K phi + c sin K phi)`.
    Complex { rho: T, phi: T, c: T, theta: T },
    RealDistinct { eig1: T, eig2: T },
    /// Repeated eigenvalue, within the discriminant tolerance.
    Critical { eig: T },
}

impl<T: Real> SpectralParams<T> {
    pub fn regime(&self) -> Regime {
        match self {
            SpectralParams::Complex { .. } => Regime::ComplexConjugate,
            SpectralParams::RealDistinct { .. } => Regime::RealDistinct,
            SpectralParams::Critical { .. } => Regime::Critical,
        }
    }

    pub fn eigenvalues(&self) -> [Complex<T>; 2] {
        match *self {
            SpectralParams::Complex { rho, phi, .. } => [
                Complex::from_polar(rho, phi),
                Complex::from_polar(rho, -phi),
            ],
            SpectralParams::RealDistinct { eig1, eig2 } => {
                [Complex::new(eig1, T::zero()), Complex::new(eig2, T::zero())]
            }
            SpectralParams::Critical { eig } => {
                [Complex::new(eig, T::zero()), Complex::new(eig, T::zero())]
            }
        }
    }

    /// Spectral radius.
    pub fn radius(&self) -> T {
        match *self {
            SpectralParams::Complex { rho, .. } => rho,
            SpectralParams::RealDistinct { eig1, eig2 } => eig1.abs().max(eig2.abs()),
            SpectralParams::Critical { eig } => eig.abs(),
        }
    }
}

/// Relative band around a vanishing discriminant that counts as critical.
pub fn discriminant_tolerance<T: Real>(trace: T) -> T {
    let floor = lit::<T>(1e-12).max(T::epsilon() * lit(8.0));
    floor * T::one().max(trace * trace)
}

/// Classifies `t` and returns its eigen-structure.
///
/// A non-positive determinant with a positive momentum entry is the NAG
/// overshoot regime, `(1-beta) nu sigma >= 1`, and is reported as an error.
pub fn spectral_params<T: Real>(t: &Transition2x2<T>) -> Result<SpectralParams<T>> {
    let tr = t.trace();
    let det = t.det();
    if det < T::zero() || (det == T::zero() && t.a22 > T::zero()) {
        return Err(Error::Overshoot {
            det: det.to_f64_lossy(),
        });
    }
    let four = lit::<T>(4.0);
    let disc = tr * tr - four * det;
    let tol = discriminant_tolerance(tr);
    if Float::abs(disc) <= tol {
        return Ok(SpectralParams::Critical {
            eig: tr / lit(2.0),
        });
    }
    if disc > T::zero() {
        let root = disc.sqrt();
        // larger magnitude first; the product form avoids cancellation
        let big = if tr >= T::zero() {
            (tr + root) / lit(2.0)
        } else {
            (tr - root) / lit(2.0)
        };
        let small = if big == T::zero() { T::zero() } else { det / big };
        return Ok(SpectralParams::RealDistinct {
            eig1: big,
            eig2: small,
        });
    }
    let rho = det.sqrt();
    let phi = Float::atan2((-disc).sqrt(), tr);
    let c = (t.a11 - t.a22) / (lit::<T>(2.0) * rho * phi.sin());
    Ok(SpectralParams::Complex {
        rho,
        phi,
        c,
        theta: c.atan(),
    })
}

/// Open sigma-interval on which the heavy-ball transition is oscillatory.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RegimeInterval<T> {
    pub lo: T,
    pub hi: T,
    /// Set for `beta = 0`, where the interval collapses to `lo = hi = 1/nu`.
    pub degenerate: bool,
}

impl<T: Real> RegimeInterval<T> {
    pub fn contains(&self, sigma: T) -> bool {
        !self.degenerate && sigma > self.lo && sigma < self.hi
    }

    /// Whether every sigma in `(0, 1]` is oscillatory.
    pub fn covers_unit_interval(&self) -> bool {
        !self.degenerate && self.lo <= T::zero() && self.hi > T::one()
    }
}

/// `((1-sqrt b)/(nu(1+sqrt b)), (1+sqrt b)/(nu(1-sqrt b)))`.
pub fn complex_regime_interval<T: Real>(h: &OuterHyperparams<T>) -> RegimeInterval<T> {
    let nu = *h.nu();
    let beta = *h.beta();
    if beta == T::zero() {
        let mid = T::one() / nu;
        return RegimeInterval {
            lo: mid,
            hi: mid,
            degenerate: true,
        };
    }
    let r = beta.sqrt();
    RegimeInterval {
        lo: (T::one() - r) / (nu * (T::one() + r)),
        hi: (T::one() + r) / (nu * (T::one() - r)),
        degenerate: false,
    }
}

/// Small-`1-beta` approximation of the heavy-ball rotation angle,
/// `phi ~ sqrt(nu sigma (1-beta))`.
pub fn high_momentum_phase<T: Real>(sigma: T, h: &OuterHyperparams<T>) -> T {
    (*h.nu() * sigma * (T::one() - *h.beta())).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scalar::rational;
    use num_rational::BigRational;

    fn hyper(nu: f64, beta: f64) -> OuterHyperparams<f64> {
        OuterHyperparams::new(nu, beta).unwrap()
    }

    fn sig(v: f64) -> EffectiveProgress<f64> {
        EffectiveProgress::new(v).unwrap()
    }

    #[test]
    fn sigma_trivial_cases() {
        let inner = InnerConfig::new(1.0, 1).unwrap();
        assert_eq!(*effective_sigma(&inner, &1.0).unwrap().value(), 1.0);
        let inner = InnerConfig::new(0.3, 17).unwrap();
        assert_eq!(*effective_sigma(&inner, &0.0).unwrap().value(), 0.0);
    }

    #[test]
    fn sigma_long_inner_loop_exact() {
        // 0.9^512 by repeated squaring over exact rationals
        let mut p = rational(9, 10);
        for _ in 0..9 {
            p = p.clone() * p;
        }
        let exact = BigRational::from_integer(1.into()) - p.clone();
        let inner = InnerConfig::new(rational(1, 10), 512).unwrap();
        let got = effective_sigma(&inner, &rational(1, 1)).unwrap();
        assert_eq!(*got.value(), exact);
        // 0.9^512 = 3.7339e-24
        let tail = p.to_f64_lossy();
        assert!((tail - 3.733_918_487_410_2e-24).abs() < 1e-36);

        let inner = InnerConfig::new(0.1f64, 512).unwrap();
        let s = effective_sigma(&inner, &1.0).unwrap();
        assert_eq!(*s.value(), 1.0);
    }

    #[test]
    fn sigma_rejects_bad_inputs() {
        let inner = InnerConfig::new(0.5, 4).unwrap();
        assert!(matches!(
            effective_sigma(&inner, &-1.0),
            Err(Error::NegativeEigenvalue { .. })
        ));
        assert!(matches!(
            effective_sigma(&inner, &2.5),
            Err(Error::StepTooLarge { .. })
        ));
        assert!(InnerConfig::new(0.0, 4).is_err());
        assert!(InnerConfig::new(0.1, 0).is_err());
    }

    #[test]
    fn hyperparam_validation() {
        assert!(OuterHyperparams::new(0.0, 0.5).is_err());
        assert!(OuterHyperparams::new(1.0, 1.0).is_err());
        assert!(OuterHyperparams::new(1.0, -0.1).is_err());
        assert!(OuterHyperparams::new(1.0, 0.0).is_ok());
        assert!(EffectiveProgress::new(1.5).is_err());
        let s = EffectiveProgress::synthetic(1.5).unwrap();
        assert!(s.is_synthetic());
    }

    #[test]
    fn hb_entries() {
        let t = transition_hb(&sig(0.95), &hyper(1.0, 0.9));
        let [a11, a12, a21, a22] = t.entries();
        assert!((a11 - 0.905).abs() < 1e-15);
        assert!((a12 + 0.9).abs() < 1e-15);
        assert!((a21 - 0.095).abs() < 1e-15);
        assert_eq!(*a22, 0.9);

        let t = transition_hb(&sig(0.0), &hyper(0.7, 0.6));
        assert_eq!(t.entries(), [&1.0, &(-0.7 * 0.6), &0.0, &0.6]);
    }

    #[test]
    fn determinants_exact_over_rationals() {
        for (s, nu, b) in [(19, 20, 9), (1, 2, 99), (3, 5, 1)] {
            let sigma = EffectiveProgress::new(rational(s, 20)).unwrap();
            let h = OuterHyperparams::new(rational(nu, 10), rational(b, 100)).unwrap();
            let beta = h.beta().clone();
            assert_eq!(transition_hb(&sigma, &h).det(), beta.clone());
            let one = rational(1, 1);
            let expected = beta.clone()
                * (one.clone() - (one - beta) * h.nu().clone() * sigma.value().clone());
            assert_eq!(transition_nag(&sigma, &h).det(), expected);
        }
    }

    #[test]
    fn nag_examples() {
        let t = transition_nag(&sig(0.5), &hyper(1.0, 0.9));
        assert!((t.det() - 0.855).abs() < 1e-15);
        let h = hyper(1.3, 0.4);
        assert!((transition_nag(&sig(0.0), &h).det() - 0.4).abs() < 1e-16);
        let h = hyper(0.8, 0.0);
        let s = sig(0.35);
        assert_eq!(transition_nag(&s, &h).entries(), transition_hb(&s, &h).entries());
    }

    #[test]
    fn step_examples() {
        let z = ModeState::at_rest(1.0);
        assert_eq!(step(&z, &Transition2x2::identity()).unwrap(), z);
        let t = transition_hb(&sig(0.95), &hyper(1.0, 0.9));
        let z1 = step(&z, &t).unwrap();
        assert!((z1.x - 0.905).abs() < 1e-15 && (z1.m - 0.095).abs() < 1e-15);

        let huge = Transition2x2::from_entries(f64::MAX, f64::MAX, 0.0, 1.0);
        let z = ModeState::new(2.0, 2.0);
        assert!(matches!(step(&z, &huge), Err(Error::NonFiniteStep)));
    }

    #[test]
    fn regime_classification() {
        let t = transition_hb(&sig(0.95), &hyper(1.0, 0.9));
        match spectral_params(&t).unwrap() {
            SpectralParams::Complex { rho, phi, .. } => {
                assert!((rho - 0.9f64.sqrt()).abs() < 1e-15);
                assert!((phi.cos() - 1.805 / (2.0 * 0.9f64.sqrt())).abs() < 1e-13);
            }
            other => panic!("expected complex regime, got {other:?}"),
        }
        for s in [0.05, 0.5, 1.0] {
            let t = transition_hb(&sig(s), &hyper(1.0, 0.9));
            assert_eq!(spectral_params(&t).unwrap().regime(), Regime::ComplexConjugate);
        }
        let crit = Transition2x2::from_entries(1.0, 0.0, 0.0, 1.0);
        assert_eq!(spectral_params(&crit).unwrap().regime(), Regime::Critical);
        let real = Transition2x2::from_entries(0.9, 0.0, 0.0, 0.2);
        match spectral_params(&real).unwrap() {
            SpectralParams::RealDistinct { eig1, eig2 } => {
                assert!((eig1 - 0.9).abs() < 1e-15 && (eig2 - 0.2).abs() < 1e-15);
            }
            other => panic!("expected real regime, got {other:?}"),
        }
    }

    #[test]
    fn overshoot_rejected() {
        // (1-beta) nu sigma = 1.25 > 1 flips the sign of det
        let t = transition_nag(&sig(1.0), &hyper(2.5, 0.5));
        assert!(matches!(spectral_params(&t), Err(Error::Overshoot { .. })));
        // beta = 0 has det = 0 but is plain outer GD, not overshoot
        let t = transition_hb(&sig(0.5), &hyper(1.0, 0.0));
        assert_eq!(spectral_params(&t).unwrap().regime(), Regime::RealDistinct);
    }

    #[test]
    fn interval_values() {
        let iv = complex_regime_interval(&hyper(1.0, 0.9));
        assert!((iv.lo - 0.026_334_038_989_724).abs() < 1e-14);
        assert!((iv.hi - 37.973_665_961_010_28).abs() < 1e-11);
        let iv = complex_regime_interval(&hyper(1.0, 0.99));
        assert!((iv.lo - 0.002_512_578_676_009_053).abs() < 1e-15);
        assert!((iv.hi - 397.997_487_421_324).abs() < 1e-9);
        assert!(!iv.covers_unit_interval());
        let iv = complex_regime_interval(&hyper(2.0, 0.0));
        assert!(iv.degenerate && iv.lo == 0.5 && iv.hi == 0.5);
    }

    #[test]
    fn interval_endpoints_are_critical() {
        for (nu, b) in [(1.0, 0.9), (1.0, 0.99), (1.0, 0.5), (0.3, 0.7)] {
            let h = hyper(nu, b);
            let iv = complex_regime_interval(&h);
            for end in [iv.lo, iv.hi] {
                let t = transition_hb(&EffectiveProgress::synthetic(end).unwrap(), &h);
                assert_eq!(spectral_params(&t).unwrap().regime(), Regime::Critical);
            }
            let inside = 0.5 * (iv.lo + iv.hi.min(1.0));
            if iv.contains(inside) {
                let t = transition_hb(&EffectiveProgress::synthetic(inside).unwrap(), &h);
                assert_eq!(
                    spectral_params(&t).unwrap().regime(),
                    Regime::ComplexConjugate
                );
            }
            let below = iv.lo * 0.5;
            let t = transition_hb(&EffectiveProgress::synthetic(below).unwrap(), &h);
            assert_eq!(spectral_params(&t).unwrap().regime(), Regime::RealDistinct);
        }
    }

    #[test]
    fn f32_transition_builds() {
        let h = OuterHyperparams::new(1.0f32, 0.9).unwrap();
        let t = transition_hb(&EffectiveProgress::new(0.95f32).unwrap(), &h);
        assert!((t.det() - 0.9).abs() <= 8.0 * f32::EPSILON);
        assert_eq!(spectral_params(&t).unwrap().regime(), Regime::ComplexConjugate);
    }
}
