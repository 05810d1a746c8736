//! Double-precision reference pricing.

pub use crate::circuit::fixed::norm_cdf;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OptionKind {
    Call,
    Put,
}

/// Combined volatility of the ratio of two correlated assets.
pub fn combined_volatility(sigma1: f64, sigma2: f64, rho: f64) -> f64 {
    (sigma1 * sigma1 + sigma2 * sigma2 - 2.0 * rho * sigma1 * sigma2).max(0.0).sqrt()
}

/// Option to exchange asset 2 for asset 1 (Margrabe).
#[allow(clippy::too_many_arguments)]
pub fn margrabe(s1: f64, s2: f64, q1: f64, q2: f64, sigma1: f64, sigma2: f64, rho: f64, t: f64) -> f64 {
    let sigma = combined_volatility(sigma1, sigma2, rho);
    let f1 = s1 * (-q1 * t).exp();
    let f2 = s2 * (-q2 * t).exp();
    let vs = sigma * t.sqrt();
    if vs == 0.0 {
        return (f1 - f2).max(0.0);
    }
    let d1 = ((s1 / s2).ln() + (q2 - q1 + sigma * sigma / 2.0) * t) / vs;
    let d2 = d1 - vs;
    f1 * norm_cdf(d1) - f2 * norm_cdf(d2)
}

/// Garman-Kohlhagen currency option; `rf` is the foreign rate.
pub fn garman_kohlhagen(s0: f64, x: f64, r: f64, rf: f64, sigma: f64, t: f64, kind: OptionKind) -> f64 {
    let fs = s0 * (-rf * t).exp();
    let fx = x * (-r * t).exp();
    let vs = sigma * t.sqrt();
    if vs == 0.0 {
        return match kind {
            OptionKind::Call => (fs - fx).max(0.0),
            OptionKind::Put => (fx - fs).max(0.0),
        };
    }
    let d1 = ((s0 / x).ln() + (r - rf + sigma * sigma / 2.0) * t) / vs;
    let d2 = d1 - vs;
    match kind {
        OptionKind::Call => fs * norm_cdf(d1) - fx * norm_cdf(d2),
        OptionKind::Put => fx * norm_cdf(-d2) - fs * norm_cdf(-d1),
    }
}

/// Valuation haircut on withheld data: e^{-yT}(2Φ(σ√T/2) − 1).
pub fn secrecy_discount(y: f64, sigma: f64, t: f64) -> f64 {
    (-y * t).exp() * (2.0 * norm_cdf(sigma * t.sqrt() / 2.0) - 1.0)
}

/// Compound growth factor of the fund: (1 + 0.04/4)^(4·5).
pub fn dao_growth() -> f64 {
    (1.0f64 + 0.04 / 4.0).powi(4 * 5)
}
