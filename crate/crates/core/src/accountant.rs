//! Rényi-DP accounting for Poisson-subsampled Gaussian DP-SGD.
//!
//! Per-step RDP is the integer-order binomial bound for the subsampled
//! Gaussian mechanism, evaluated on a grid of orders; composition is
//! additive; conversion to (ε, δ) takes the minimum over orders of
//! `rdp + log(1/δ)/(α − 1)`. Noise calibration inverts the accountant by
//! bisection. Group privacy and utterance-count ε scaling convert
//! guarantees across granularities.

use crate::{Error, Result};

/// An (ε, δ) pair attached to a training run.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct PrivacyParams {
    pub epsilon: f64,
    pub delta: f64,
}

impl PrivacyParams {
    pub fn new(epsilon: f64, delta: f64) -> Result<Self> {
        if epsilon < 0.0 || epsilon.is_nan() {
            return Err(Error::Domain(format!("epsilon must be >= 0, got {epsilon}")));
        }
        if !(0.0..=1.0).contains(&delta) {
            return Err(Error::Domain(format!("delta must be in [0, 1], got {delta}")));
        }
        Ok(PrivacyParams { epsilon, delta })
    }

    /// The no-privacy sentinel used for runs without noise.
    pub fn non_private() -> Self {
        PrivacyParams {
            epsilon: f64::INFINITY,
            delta: 0.0,
        }
    }
}

/// Parameters of the subsampled Gaussian mechanism applied per step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MechanismParams {
    /// Noise multiplier σ (noise std = σ·C).
    pub sigma: f64,
    /// Poisson sampling rate q = L/N.
    pub sampling_rate: f64,
    /// Number of composed steps T.
    pub steps: u64,
}

impl MechanismParams {
    pub fn new(sigma: f64, sampling_rate: f64, steps: u64) -> Result<Self> {
        if sigma <= 0.0 || !sigma.is_finite() {
            return Err(Error::Domain(format!("sigma must be > 0, got {sigma}")));
        }
        if !(0.0..=1.0).contains(&sampling_rate) {
            return Err(Error::Domain(format!(
                "sampling rate must be in [0, 1], got {sampling_rate}"
            )));
        }
        if steps == 0 {
            return Err(Error::Domain("steps must be >= 1".into()));
        }
        Ok(MechanismParams {
            sigma,
            sampling_rate,
            steps,
        })
    }
}

/// RDP values over an ordered grid of orders α > 1.
#[derive(Debug, Clone, PartialEq)]
pub struct RdpCurve {
    points: Vec<(f64, f64)>,
}

impl RdpCurve {
    pub fn new(points: Vec<(f64, f64)>) -> Result<Self> {
        for &(alpha, value) in &points {
            if alpha <= 1.0 || alpha.is_nan() {
                return Err(Error::Domain(format!("order must be > 1, got {alpha}")));
            }
            if value < 0.0 || value.is_nan() {
                return Err(Error::Domain(format!("rdp value must be >= 0, got {value}")));
            }
        }
        Ok(RdpCurve { points })
    }

    pub fn points(&self) -> &[(f64, f64)] {
        &self.points
    }
}

/// Default integer order grid α ∈ {2, …, 64}.
pub fn default_orders() -> Vec<u32> {
    (2..=64).collect()
}

/// RDP of the (unsubsampled) Gaussian mechanism: α / (2σ²).
pub fn gaussian_rdp(sigma: f64, alpha: f64) -> Result<f64> {
    if sigma <= 0.0 || !sigma.is_finite() {
        return Err(Error::Domain(format!("sigma must be > 0, got {sigma}")));
    }
    if alpha <= 1.0 || !alpha.is_finite() {
        return Err(Error::Domain(format!("alpha must be > 1, got {alpha}")));
    }
    Ok(alpha / (2.0 * sigma * sigma))
}

fn ln_factorial(n: u32) -> f64 {
    (2..=u64::from(n)).map(|k| (k as f64).ln()).sum()
}

fn ln_binomial(n: u32, k: u32) -> f64 {
    ln_factorial(n) - ln_factorial(k) - ln_factorial(n - k)
}

/// Per-step RDP upper bound for Poisson subsampling at rate q with Gaussian
/// noise σ, at integer order α ≥ 2:
///
/// `(1/(α−1)) · log( Σ_{j=0..α} C(α,j) (1−q)^(α−j) q^j exp(j(j−1)/(2σ²)) )`
///
/// The sum is evaluated in log space with a max shift; the raw exp term
/// overflows f64 for small σ at high orders.
pub fn subsampled_gaussian_rdp(m: &MechanismParams, alpha: u32) -> Result<f64> {
    if alpha < 2 {
        return Err(Error::Domain(format!("alpha must be an integer >= 2, got {alpha}")));
    }
    let q = m.sampling_rate;
    if q == 0.0 {
        return Ok(0.0);
    }
    let sigma2 = m.sigma * m.sigma;
    let log_q = q.ln();
    let log_1mq = (1.0 - q).ln(); // -inf at q = 1; those terms drop out

    let mut log_terms = Vec::with_capacity(alpha as usize + 1);
    for j in 0..=alpha {
        let mut lt = ln_binomial(alpha, j);
        if j < alpha {
            lt += f64::from(alpha - j) * log_1mq;
        }
        if j > 0 {
            lt += f64::from(j) * log_q;
        }
        if j >= 2 {
            lt += f64::from(j) * f64::from(j - 1) / (2.0 * sigma2);
        }
        log_terms.push(lt);
    }
    let max = log_terms.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let sum: f64 = log_terms.iter().map(|lt| (lt - max).exp()).sum();
    let log_moment = max + sum.ln();
    Ok((log_moment / f64::from(alpha - 1)).max(0.0))
}

/// Per-step RDP curve for one mechanism over the given integer orders.
pub fn per_step_curve(sigma: f64, sampling_rate: f64, orders: &[u32]) -> Result<RdpCurve> {
    let m = MechanismParams::new(sigma, sampling_rate, 1)?;
    let mut points = Vec::with_capacity(orders.len());
    for &alpha in orders {
        points.push((f64::from(alpha), subsampled_gaussian_rdp(&m, alpha)?));
    }
    RdpCurve::new(points)
}

/// Additive RDP composition over `steps` identical steps.
pub fn compose(per_step: &RdpCurve, steps: u64) -> RdpCurve {
    RdpCurve {
        points: per_step
            .points
            .iter()
            .map(|&(alpha, value)| (alpha, value * steps as f64))
            .collect(),
    }
}

/// Convert an RDP curve to (ε, δ): ε = min over orders of
/// `rdp + log(1/δ)/(α − 1)`.
pub fn rdp_to_dp(curve: &RdpCurve, delta: f64) -> Result<PrivacyParams> {
    if curve.points.is_empty() {
        return Err(Error::Empty("rdp curve".into()));
    }
    if !(delta > 0.0 && delta < 1.0) {
        return Err(Error::Domain(format!("delta must be in (0, 1), got {delta}")));
    }
    let log_inv_delta = -delta.ln();
    let epsilon = curve
        .points
        .iter()
        .map(|&(alpha, value)| value + log_inv_delta / (alpha - 1.0))
        .fold(f64::INFINITY, f64::min);
    PrivacyParams::new(epsilon.max(0.0), delta)
}

/// Full accounting for one run: per-step curve over the default orders,
/// composed T times, converted at `delta`.
pub fn epsilon_for(sigma: f64, sampling_rate: f64, steps: u64, delta: f64) -> Result<PrivacyParams> {
    let per_step = per_step_curve(sigma, sampling_rate, &default_orders())?;
    rdp_to_dp(&compose(&per_step, steps), delta)
}

/// Smallest σ (on a bisection grid with relative tolerance 1e-3) whose
/// accounted ε does not exceed the target. The bracket must satisfy
/// ε(hi) ≤ target ≤ ε(lo).
pub fn calibrate_noise(
    target: &PrivacyParams,
    sampling_rate: f64,
    steps: u64,
    sigma_bounds: (f64, f64),
) -> Result<f64> {
    const REL_TOL: f64 = 1e-3;
    if !(target.epsilon > 0.0) || !target.epsilon.is_finite() {
        return Err(Error::Domain(format!(
            "target epsilon must be positive and finite, got {}",
            target.epsilon
        )));
    }
    let (mut lo, mut hi) = sigma_bounds;
    if !(lo > 0.0 && hi > lo) {
        return Err(Error::Domain(format!("invalid sigma bounds ({lo}, {hi})")));
    }
    let eps_at = |sigma: f64| -> Result<f64> {
        Ok(epsilon_for(sigma, sampling_rate, steps, target.delta)?.epsilon)
    };
    let eps_hi = eps_at(hi)?;
    if eps_hi > target.epsilon {
        return Err(Error::Bracket {
            lo,
            hi,
            target: target.epsilon,
            msg: format!("epsilon at sigma={hi} is {eps_hi}, still above target"),
        });
    }
    let eps_lo = eps_at(lo)?;
    if eps_lo < target.epsilon {
        return Err(Error::Bracket {
            lo,
            hi,
            target: target.epsilon,
            msg: format!("epsilon at sigma={lo} is {eps_lo}, already below target"),
        });
    }
    while (hi - lo) / hi > REL_TOL {
        let mid = 0.5 * (lo + hi);
        if eps_at(mid)? <= target.epsilon {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(hi)
}

/// Result of a group-privacy conversion; `vacuous` marks a δ clamped at 1.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GroupPrivacy {
    pub params: PrivacyParams,
    pub vacuous: bool,
}

/// (ε, δ) of a k-unit group from a per-unit guarantee:
/// ε' = k·ε, δ' = min(1, k·e^((k−1)ε)·δ).
pub fn group_privacy(base: &PrivacyParams, k: u64) -> Result<GroupPrivacy> {
    if k == 0 {
        return Err(Error::Domain("group size k must be >= 1".into()));
    }
    if k == 1 {
        return Ok(GroupPrivacy {
            params: *base,
            vacuous: false,
        });
    }
    let k_f = k as f64;
    let exponent = (k_f - 1.0) * base.epsilon;
    let log_delta_prime = k_f.ln() + exponent + base.delta.ln();
    let (delta_prime, vacuous) = if log_delta_prime >= 0.0 {
        (1.0, true)
    } else if exponent < 700.0 {
        // product form keeps full precision when exp() cannot overflow
        (k_f * exponent.exp() * base.delta, false)
    } else {
        (log_delta_prime.exp(), false)
    };
    Ok(GroupPrivacy {
        params: PrivacyParams {
            epsilon: k_f * base.epsilon,
            delta: delta_prime,
        },
        vacuous,
    })
}

/// ε for a coarser unit that contains up to `max_utterances` fine units:
/// the per-unit budget scaled by the utterance count.
pub fn scale_epsilon_for_granularity(eps_base: f64, max_utterances: u64) -> Result<f64> {
    if !(eps_base > 0.0) {
        return Err(Error::Domain(format!("eps_base must be > 0, got {eps_base}")));
    }
    if max_utterances == 0 {
        return Err(Error::Domain("max_utterances must be >= 1".into()));
    }
    Ok(eps_base * max_utterances as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn mech(sigma: f64, q: f64) -> MechanismParams {
        MechanismParams::new(sigma, q, 1).unwrap()
    }

    #[test]
    fn gaussian_rdp_closed_form() {
        assert_eq!(gaussian_rdp(1.0, 2.0).unwrap(), 1.0);
        assert_eq!(gaussian_rdp(2.0, 3.0).unwrap(), 0.375);
        assert!(gaussian_rdp(1e9, 7.0).unwrap() < 1e-17);
        assert!(gaussian_rdp(0.0, 2.0).is_err());
        assert!(gaussian_rdp(1.0, 1.0).is_err());
        assert!(gaussian_rdp(-1.0, 2.0).is_err());
    }

    #[test]
    fn subsampled_rdp_collapses_at_q_zero() {
        for alpha in [2, 5, 33] {
            assert_eq!(subsampled_gaussian_rdp(&mech(1.0, 0.0), alpha).unwrap(), 0.0);
        }
    }

    #[test]
    fn subsampled_rdp_reduces_to_gaussian_at_q_one() {
        for sigma in [0.5, 1.0, 2.0, 4.0] {
            for alpha in 2..=32 {
                let full = subsampled_gaussian_rdp(&mech(sigma, 1.0), alpha).unwrap();
                let gauss = gaussian_rdp(sigma, f64::from(alpha)).unwrap();
                assert!(
                    (full - gauss).abs() <= 1e-12 * gauss,
                    "sigma={sigma} alpha={alpha}: {full} vs {gauss}"
                );
            }
        }
    }

    #[test]
    fn subsampled_rdp_q_one_alpha_two_sigma_one_is_one() {
        assert!((subsampled_gaussian_rdp(&mech(1.0, 1.0), 2).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn subsampled_rdp_survives_tiny_sigma_at_high_order() {
        // exp(j(j-1)/(2σ²)) would overflow f64 here without the log-space sum.
        let v = subsampled_gaussian_rdp(&mech(0.1, 0.01), 64).unwrap();
        assert!(v.is_finite() && v > 0.0);
    }

    #[test]
    fn subsampled_rdp_rejects_alpha_below_two() {
        assert!(subsampled_gaussian_rdp(&mech(1.0, 0.1), 1).is_err());
        assert!(subsampled_gaussian_rdp(&mech(1.0, 0.1), 0).is_err());
    }

    #[test]
    fn subsampled_rdp_monotone_in_q_and_sigma() {
        let qs = [0.001, 0.01, 0.1, 0.5];
        let sigmas = [0.5, 1.0, 2.0, 4.0];
        for alpha in 2..=32 {
            for &sigma in &sigmas {
                let mut prev = 0.0;
                for &q in &qs {
                    let v = subsampled_gaussian_rdp(&mech(sigma, q), alpha).unwrap();
                    assert!(v + 1e-15 >= prev, "not nondecreasing in q");
                    prev = v;
                }
            }
            for &q in &qs {
                let mut prev = f64::INFINITY;
                for &sigma in &sigmas {
                    let v = subsampled_gaussian_rdp(&mech(sigma, q), alpha).unwrap();
                    assert!(v <= prev + 1e-15, "not nonincreasing in sigma");
                    prev = v;
                }
            }
        }
    }

    #[test]
    fn compose_multiplies_values() {
        let curve = RdpCurve::new(vec![(2.0, 0.3), (4.0, 0.9)]).unwrap();
        let composed = compose(&curve, 3);
        assert!((composed.points()[0].1 - 0.9).abs() < 1e-15);
        assert!((composed.points()[1].1 - 2.7).abs() < 1e-15);
        let single = compose(&curve, 1);
        assert_eq!(single.points(), curve.points());
        let ten = compose(&RdpCurve::new(vec![(2.0, 0.5)]).unwrap(), 10);
        assert_eq!(ten.points(), &[(2.0, 5.0)]);
    }

    #[test]
    fn rdp_to_dp_single_point() {
        // δ = e⁻¹ makes log(1/δ) = 1 exactly.
        let curve = RdpCurve::new(vec![(2.0, 1.0)]).unwrap();
        let p = rdp_to_dp(&curve, (-1.0f64).exp()).unwrap();
        assert!((p.epsilon - 2.0).abs() < 1e-12);
    }

    #[test]
    fn rdp_to_dp_takes_min_over_orders() {
        let curve = RdpCurve::new(vec![(2.0, 5.0), (11.0, 1.0)]).unwrap();
        let delta = 1e-4;
        let expected = 1.0 + (1.0f64 / delta).ln() / 10.0;
        let p = rdp_to_dp(&curve, delta).unwrap();
        assert!((p.epsilon - expected).abs() < 1e-12);
    }

    #[test]
    fn rdp_to_dp_rejects_empty_curve_and_bad_delta() {
        assert!(rdp_to_dp(&RdpCurve::new(vec![]).unwrap(), 0.5).is_err());
        let curve = RdpCurve::new(vec![(2.0, 1.0)]).unwrap();
        assert!(rdp_to_dp(&curve, 0.0).is_err());
        assert!(rdp_to_dp(&curve, 1.0).is_err());
    }

    #[test]
    fn rdp_to_dp_epsilon_nonincreasing_in_delta() {
        let curve = per_step_curve(1.0, 0.05, &default_orders()).unwrap();
        let composed = compose(&curve, 100);
        let mut prev = f64::INFINITY;
        for delta in [1e-10, 1e-8, 1e-6, 1e-4, 1e-2] {
            let eps = rdp_to_dp(&composed, delta).unwrap().epsilon;
            assert!(eps <= prev);
            prev = eps;
        }
    }

    #[test]
    fn calibrate_round_trip_hits_target_band() {
        let target = PrivacyParams::new(10.0, 1e-8).unwrap();
        let sigma = calibrate_noise(&target, 0.05, 500, (0.05, 1000.0)).unwrap();
        let achieved = epsilon_for(sigma, 0.05, 500, 1e-8).unwrap().epsilon;
        assert!(achieved <= 10.0);
        assert!(achieved > 10.0 * (1.0 - 1e-2));
    }

    #[test]
    fn calibrate_monotone_in_target() {
        let tighter = calibrate_noise(&PrivacyParams::new(1.0, 1e-8).unwrap(), 0.05, 500, (0.05, 1000.0)).unwrap();
        let looser = calibrate_noise(&PrivacyParams::new(10.0, 1e-8).unwrap(), 0.05, 500, (0.05, 1000.0)).unwrap();
        assert!(tighter > looser);
    }

    #[test]
    fn calibrate_reports_infeasible_bracket() {
        let target = PrivacyParams::new(1.0, 1e-8).unwrap();
        // hi too small: even sigma=0.2 cannot reach epsilon 1 here
        let err = calibrate_noise(&target, 0.05, 500, (0.05, 0.2, )).unwrap_err();
        assert!(matches!(err, Error::Bracket { .. }));
        // lo already below target
        let err = calibrate_noise(&target, 0.05, 500, (50.0, 1000.0)).unwrap_err();
        assert!(matches!(err, Error::Bracket { .. }));
    }

    #[test]
    fn group_privacy_identity_at_k_one() {
        let base = PrivacyParams::new(1.0, 1e-8).unwrap();
        let g = group_privacy(&base, 1).unwrap();
        assert_eq!(g.params, base);
        assert!(!g.vacuous);
    }

    #[test]
    fn group_privacy_k_two_matches_closed_form() {
        let base = PrivacyParams::new(1.0, 1e-8).unwrap();
        let g = group_privacy(&base, 2).unwrap();
        assert_eq!(g.params.epsilon, 2.0);
        let expected = 5.43656365691809e-8; // 2·e·1e-8
        assert!((g.params.delta - expected).abs() <= 1e-12 * expected);
        assert!(!g.vacuous);
    }

    #[test]
    fn group_privacy_clamps_and_flags_vacuous() {
        let base = PrivacyParams::new(1.0, 1e-8).unwrap();
        for k in [40, 99, 313] {
            let g = group_privacy(&base, k).unwrap();
            assert_eq!(g.params.delta, 1.0);
            assert!(g.vacuous, "k={k} should be vacuous");
            assert_eq!(g.params.epsilon, k as f64);
        }
    }

    #[test]
    fn group_privacy_epsilon_linear_in_k() {
        let base = PrivacyParams::new(0.37, 1e-10).unwrap();
        for k in 1..=20u64 {
            let g = group_privacy(&base, k).unwrap();
            assert_eq!(g.params.epsilon, k as f64 * 0.37);
        }
    }

    #[test]
    fn epsilon_scaling_matches_utterance_ladder() {
        assert_eq!(scale_epsilon_for_granularity(10.0, 99).unwrap(), 990.0);
        assert_eq!(scale_epsilon_for_granularity(10.0, 40).unwrap(), 400.0);
        assert_eq!(scale_epsilon_for_granularity(10.0, 313).unwrap(), 3130.0);
        assert!(scale_epsilon_for_granularity(0.0, 1).is_err());
        assert!(scale_epsilon_for_granularity(1.0, 0).is_err());
    }
}
