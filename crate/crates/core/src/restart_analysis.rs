//! Restart contraction factor `chi_K = [T^K]_11` and period selection.
//!
//! A restart cycle starts from `(x0, 0)`, so after `K` rounds the residual is
//! `chi_K x0`. By Cayley-Hamilton `chi_K = tr chi_{K-1} - det chi_{K-2}` with
//! `chi_0 = 1`, `chi_1 = a11`, in every regime. The recurrence is the
//! canonical evaluation; the complex-regime closed form is a cross-check.

use num_traits::Float;

use crate::error::{invalid, Error, Result};
use crate::mode_dynamics::{
    spectral_params, transition, EffectiveProgress, Method, OuterHyperparams, SpectralParams,
    Transition2x2,
};
use crate::scalar::{lit, Real, Scalar};
use crate::trajectory_sim::Spectrum;

/// Phase-estimate branches reported alongside a recommendation.
pub const PHASE_BRANCHES: u32 = 3;

/// `|chi_K|` below this is treated as an exact cancellation.
pub const CANCELLATION_FLOOR: f64 = 1e-300;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SeriesSource {
    Recurrence,
    ClosedForm,
}

/// `chi_0 ..= chi_Kmax` for one transition.
#[derive(Debug, Clone, PartialEq)]
pub struct RestartFactorSeries<T> {
    chis: Vec<T>,
    source: SeriesSource,
    kind: Option<Method>,
}

impl<T: Scalar> RestartFactorSeries<T> {
    pub fn chis(&self) -> &[T] {
        &self.chis
    }

    pub fn get(&self, k: usize) -> Option<&T> {
        self.chis.get(k)
    }

    pub fn k_max(&self) -> usize {
        self.chis.len() - 1
    }

    pub fn source(&self) -> SeriesSource {
        self.source
    }

    pub fn kind(&self) -> Option<Method> {
        self.kind
    }
}

pub fn chi_recurrence<T: Scalar>(t: &Transition2x2<T>, k_max: usize) -> RestartFactorSeries<T> {
    chi_recurrence_with(t, k_max, false)
}

/// `flip_det` negates the determinant term. Only the validation suite's
/// fault injection sets it.
pub(crate) fn chi_recurrence_with<T: Scalar>(
    t: &Transition2x2<T>,
    k_max: usize,
    flip_det: bool,
) -> RestartFactorSeries<T> {
    let tr = t.trace();
    let det = if flip_det { -t.det() } else { t.det() };
    let mut chis = Vec::with_capacity(k_max + 1);
    chis.push(T::one());
    if k_max >= 1 {
        chis.push(t.a11().clone());
    }
    for k in 2..=k_max {
        let next = tr.clone() * chis[k - 1].clone() - det.clone() * chis[k - 2].clone();
        chis.push(next);
    }
    RestartFactorSeries {
        chis,
        source: SeriesSource::Recurrence,
        kind: t.kind(),
    }
}

fn complex_parts<T: Real>(sp: &SpectralParams<T>) -> Result<(T, T, T, T)> {
    match *sp {
        SpectralParams::Complex { rho, phi, c, theta } => Ok((rho, phi, c, theta)),
        other => Err(Error::NotComplexRegime {
            found: other.regime().as_str(),
        }),
    }
}

/// `cos(K phi) + C sin(K phi)`, the projection multiplying the envelope.
pub fn bracket<T: Real>(sp: &SpectralParams<T>, k: u32) -> Result<T> {
    let (_, phi, c, _) = complex_parts(sp)?;
    let angle = phi * lit(f64::from(k));
    Ok(angle.cos() + c * angle.sin())
}

/// `sqrt(1 + C^2)`, the largest value the bracket can reach.
pub fn bracket_amplitude<T: Real>(sp: &SpectralParams<T>) -> Result<T> {
    let (_, _, c, _) = complex_parts(sp)?;
    Ok((T::one() + c * c).sqrt())
}

/// `rho^K (cos K phi + C sin K phi)`.
pub fn chi_closed_form<T: Real>(sp: &SpectralParams<T>, k: u32) -> Result<T> {
    let (rho, ..) = complex_parts(sp)?;
    Ok(rho.powi(k as i32) * bracket(sp, k)?)
}

pub fn chi_closed_form_series<T: Real>(
    t: &Transition2x2<T>,
    k_max: usize,
) -> Result<RestartFactorSeries<T>> {
    let sp = spectral_params(t)?;
    let chis = (0..=k_max)
        .map(|k| chi_closed_form(&sp, k as u32))
        .collect::<Result<Vec<_>>>()?;
    Ok(RestartFactorSeries {
        chis,
        source: SeriesSource::ClosedForm,
        kind: t.kind(),
    })
}

/// A contraction rate; `infinite` marks `+inf` from an exact cancellation
/// or a vanishing determinant.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Rate<T> {
    pub value: T,
    pub infinite: bool,
}

impl<T: Real> Rate<T> {
    fn finite(value: T) -> Self {
        Self {
            value,
            infinite: false,
        }
    }

    fn infinity() -> Self {
        Self {
            value: T::infinity(),
            infinite: true,
        }
    }
}

/// `r_K = -log|chi_K| / K`.
pub fn rate_r_k<T: Real>(t: &Transition2x2<T>, k: u32) -> Result<Rate<T>> {
    if k == 0 {
        return Err(invalid("k", "the restarted rate needs K >= 1"));
    }
    let chi = chi_recurrence(t, k as usize).chis[k as usize];
    Ok(rate_from_chi(chi, k))
}

fn rate_from_chi<T: Real>(chi: T, k: u32) -> Rate<T> {
    let mag = Float::abs(chi);
    if mag < lit(CANCELLATION_FLOOR) {
        Rate::infinity()
    } else {
        Rate::finite(-mag.ln() / lit(f64::from(k)))
    }
}

/// Heavy-ball envelope rate `-log(beta) / 2`.
pub fn rate_r_inf<T: Real>(h: &OuterHyperparams<T>) -> Rate<T> {
    let beta = *h.beta();
    if beta == T::zero() {
        return Rate::infinity();
    }
    Rate::finite(-beta.ln() / lit(2.0))
}

/// Envelope rate `-log rho` of an arbitrary complex-regime transition.
pub fn envelope_rate<T: Real>(sp: &SpectralParams<T>) -> Result<T> {
    let (rho, ..) = complex_parts(sp)?;
    Ok(-rho.ln())
}

/// Whether a `K`-period restart beats the non-restarted envelope,
/// `|chi_K| < rho^K`.
pub fn crossover<T: Real>(t: &Transition2x2<T>, k: u32) -> Result<bool> {
    let sp = spectral_params(t)?;
    let (rho, ..) = complex_parts(&sp)?;
    let chi = chi_recurrence(t, k as usize).chis[k as usize];
    Ok(Float::abs(chi) < rho.powi(k as i32))
}

/// The three equivalent crossover tests, evaluated independently.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CrossoverForms<T> {
    /// `r_K > r_inf`
    pub by_rate: bool,
    /// `|chi_K| < rho^K`
    pub by_envelope: bool,
    /// `|cos K phi + C sin K phi| < 1`
    pub by_bracket: bool,
    /// `| |bracket| - 1 |`; small margins are numerically indeterminate.
    pub margin: T,
}

impl<T> CrossoverForms<T> {
    pub fn agree(&self) -> bool {
        self.by_rate == self.by_envelope && self.by_envelope == self.by_bracket
    }
}

pub fn crossover_forms<T: Real>(t: &Transition2x2<T>, k: u32) -> Result<CrossoverForms<T>> {
    if k == 0 {
        return Err(invalid("k", "crossover needs K >= 1"));
    }
    let sp = spectral_params(t)?;
    let (rho, ..) = complex_parts(&sp)?;
    let chi = chi_recurrence(t, k as usize).chis[k as usize];
    let r_k = rate_from_chi(chi, k);
    let r_inf = envelope_rate(&sp)?;
    let b = bracket(&sp, k)?;
    Ok(CrossoverForms {
        by_rate: r_k.infinite || r_k.value > r_inf,
        by_envelope: Float::abs(chi) < rho.powi(k as i32),
        by_bracket: Float::abs(b) < T::one(),
        margin: Float::abs(Float::abs(b) - T::one()),
    })
}

/// Phase-cancellation estimates `round((theta + pi/2 + l pi) / phi)` for
/// `l = 0, 1, ...`, each at least one.
pub fn phase_estimates<T: Real>(sp: &SpectralParams<T>, branches: u32) -> Result<Vec<u32>> {
    let (_, phi, _, theta) = complex_parts(sp)?;
    let pi = T::PI();
    let half_pi = T::FRAC_PI_2();
    Ok((0..branches)
        .map(|l| {
            let k = ((theta + half_pi + pi * lit(f64::from(l))) / phi).round();
            k.to_f64_lossy().clamp(1.0, f64::from(u32::MAX)) as u32
        })
        .collect())
}

#[derive(Debug, Clone, PartialEq)]
pub struct PeriodRecommendation<T> {
    pub k_star: u32,
    /// Phase estimates for `l = 0, 1, 2`; empty outside the complex regime.
    pub k_phase: Vec<u32>,
    pub objective: T,
    pub admissible_range: (u32, u32),
}

fn check_range(k_min: u32, k_max: u32) -> Result<()> {
    if k_min == 0 || k_min > k_max {
        return Err(invalid(
            "admissible_range",
            format!("need 1 <= k_min <= k_max, got [{k_min}, {k_max}]"),
        ));
    }
    Ok(())
}

/// Smallest `K` in `[k_min, k_max]` minimizing `objective(K)`.
fn argmin_period<T: Real>(k_min: u32, k_max: u32, objective: impl Fn(usize) -> T) -> (u32, T) {
    let mut best = (k_min, objective(k_min as usize));
    for k in k_min + 1..=k_max {
        let v = objective(k as usize);
        if v < best.1 {
            best = (k, v);
        }
    }
    best
}

/// Single-mode oracle: `argmin |chi_K|` over the admissible range.
pub fn oracle_period<T: Real>(
    t: &Transition2x2<T>,
    k_min: u32,
    k_max: u32,
) -> Result<PeriodRecommendation<T>> {
    check_range(k_min, k_max)?;
    let series = chi_recurrence(t, k_max as usize);
    let (k_star, objective) = argmin_period(k_min, k_max, |k| Float::abs(series.chis[k]));
    let k_phase = spectral_params(t)
        .and_then(|sp| phase_estimates(&sp, PHASE_BRANCHES))
        .unwrap_or_default();
    Ok(PeriodRecommendation {
        k_star,
        k_phase,
        objective,
        admissible_range: (k_min, k_max),
    })
}

/// `sum_j w_j chi_K(sigma_j)^2` for every `K` up to `k_max`.
pub fn blockwise_objective<T: Real>(
    spectrum: &Spectrum<T>,
    h: &OuterHyperparams<T>,
    kind: Method,
    k_max: usize,
) -> Vec<T> {
    let mut total = vec![T::zero(); k_max + 1];
    for mode in spectrum.modes() {
        let series = chi_recurrence(&transition(kind, &mode.sigma, h), k_max);
        for (acc, chi) in total.iter_mut().zip(series.chis) {
            *acc = *acc + mode.weight * chi * chi;
        }
    }
    total
}

/// Block oracle: `argmin_K sum_j w_j chi_K(sigma_j)^2`. Phase estimates are
/// taken at the weighted mean sigma of the block.
pub fn blockwise_oracle_period<T: Real>(
    spectrum: &Spectrum<T>,
    h: &OuterHyperparams<T>,
    kind: Method,
    k_min: u32,
    k_max: u32,
) -> Result<PeriodRecommendation<T>> {
    check_range(k_min, k_max)?;
    let totals = blockwise_objective(spectrum, h, kind, k_max as usize);
    let (k_star, objective) = argmin_period(k_min, k_max, |k| totals[k]);
    let mean = EffectiveProgress::new(spectrum.weighted_mean_sigma())?;
    let k_phase = spectral_params(&transition(kind, &mean, h))
        .and_then(|sp| phase_estimates(&sp, PHASE_BRANCHES))
        .unwrap_or_default();
    Ok(PeriodRecommendation {
        k_star,
        k_phase,
        objective,
        admissible_range: (k_min, k_max),
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HeuristicPeriod<T> {
    /// Rounded period, `None` when `sigma_bar = 0` (no cancellation exists).
    pub period: Option<u32>,
    /// `pi / (2 sqrt(nu sigma_bar (1 - beta)))` before rounding.
    pub raw: T,
    /// The expansion assumes `beta` near one; set when `beta < 0.9`.
    pub low_momentum: bool,
}

/// High-momentum period estimate for a block concentrated near `sigma_bar`.
pub fn heuristic_period<T: Real>(
    sigma_bar: &EffectiveProgress<T>,
    h: &OuterHyperparams<T>,
) -> HeuristicPeriod<T> {
    let low_momentum = *h.beta() < lit(0.9);
    let denom = lit::<T>(2.0) * (*h.nu() * *sigma_bar.value() * (T::one() - *h.beta())).sqrt();
    if denom == T::zero() {
        return HeuristicPeriod {
            period: None,
            raw: T::infinity(),
            low_momentum,
        };
    }
    let raw = T::PI() / denom;
    let period = raw.round().to_f64_lossy().clamp(1.0, f64::from(u32::MAX)) as u32;
    HeuristicPeriod {
        period: Some(period),
        raw,
        low_momentum,
    }
}
