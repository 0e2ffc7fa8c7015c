//! Constant-product pool arithmetic.
//!
//! A pool holds `tau` base tokens and `alpha` subnet tokens with `tau * alpha = k`.
//! The alpha price in base tokens is `tau / alpha`. Staking `d` base tokens moves
//! the pool to `(tau + d, k / (tau + d))`, so the price becomes `(tau + d)^2 / k`
//! and the exact return is `(1 + d/tau)^2 - 1`. Its first-order term `2 d / tau`
//! is the price-impact approximation, and the one-way slippage of a buy of size
//! `d` is exactly `d / tau`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Reserves of one constant-product pool.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PoolState {
    tau_reserve: f64,
    alpha_reserve: f64,
}

impl PoolState {
    pub fn new(tau_reserve: f64, alpha_reserve: f64) -> Result<Self> {
        if !(tau_reserve.is_finite() && tau_reserve > 0.0) {
            return Err(Error::InvalidPool(format!(
                "tau reserve must be positive and finite, got {tau_reserve}"
            )));
        }
        if !(alpha_reserve.is_finite() && alpha_reserve > 0.0) {
            return Err(Error::InvalidPool(format!(
                "alpha reserve must be positive and finite, got {alpha_reserve}"
            )));
        }
        Ok(Self {
            tau_reserve,
            alpha_reserve,
        })
    }

    /// Pool with the given base reserve quoted at `price` base tokens per alpha.
    pub fn with_price(tau_reserve: f64, price: f64) -> Result<Self> {
        if !(price.is_finite() && price > 0.0) {
            return Err(Error::InvalidPool(format!("price must be positive, got {price}")));
        }
        Self::new(tau_reserve, tau_reserve / price)
    }

    pub fn tau_reserve(&self) -> f64 {
        self.tau_reserve
    }

    pub fn alpha_reserve(&self) -> f64 {
        self.alpha_reserve
    }

    pub fn constant_product(&self) -> f64 {
        self.tau_reserve * self.alpha_reserve
    }

    /// Alpha price in base tokens.
    pub fn spot_price(&self) -> f64 {
        self.tau_reserve / self.alpha_reserve
    }

    /// Deposit `delta_tau` base tokens and withdraw alpha along the curve.
    pub fn stake(&self, delta_tau: f64) -> Result<StakeOutcome> {
        check_trade_size(delta_tau)?;
        if delta_tau == 0.0 {
            return Ok(StakeOutcome {
                pool: *self,
                alpha_out: 0.0,
                exact_return: 0.0,
            });
        }
        let k = self.constant_product();
        let new_tau = self.tau_reserve + delta_tau;
        let new_alpha = k / new_tau;
        let pool = PoolState::new(new_tau, new_alpha)?;
        let ratio = delta_tau / self.tau_reserve;
        Ok(StakeOutcome {
            pool,
            alpha_out: self.alpha_reserve - new_alpha,
            exact_return: ratio * (2.0 + ratio),
        })
    }

    /// First-order price impact `2 d / tau` of staking `delta_tau`.
    pub fn price_impact_approx(&self, delta_tau: f64) -> Result<f64> {
        check_trade_size(delta_tau)?;
        Ok(2.0 * delta_tau / self.tau_reserve)
    }

    /// One-way slippage `d / tau` of buying with `delta_tau` base tokens.
    pub fn slippage_one_way(&self, delta_tau: f64) -> Result<f64> {
        check_trade_size(delta_tau)?;
        Ok(delta_tau / self.tau_reserve)
    }

    /// Multiply the base reserve by `factor`, keeping the constant product.
    /// The price moves by `factor^2`.
    pub fn rebalance(&self, factor: f64) -> Result<PoolState> {
        if !(factor.is_finite() && factor > 0.0) {
            return Err(Error::Domain(format!(
                "rebalance factor must be positive, got {factor}"
            )));
        }
        let k = self.constant_product();
        let tau = self.tau_reserve * factor;
        PoolState::new(tau, k / tau)
    }
}

/// Result of a stake against a pool.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StakeOutcome {
    pub pool: PoolState,
    pub alpha_out: f64,
    /// Exact price return `(1 + d/tau)^2 - 1`.
    pub exact_return: f64,
}

fn check_trade_size(delta_tau: f64) -> Result<()> {
    if !(delta_tau.is_finite() && delta_tau >= 0.0) {
        return Err(Error::Domain(format!(
            "stake size must be non-negative and finite, got {delta_tau}"
        )));
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "variant", rename_all = "kebab-case")]
pub enum EmissionPolicy {
    /// Shares proportional to alpha price.
    #[default]
    PriceProportional,
    /// Shares proportional to an exponential moving average of net inflows.
    FlowEma { half_life_days: f64 },
}

impl EmissionPolicy {
    pub fn flow_ema_default() -> Self {
        EmissionPolicy::FlowEma { half_life_days: 30.0 }
    }

    pub fn validate(&self) -> Result<()> {
        if let EmissionPolicy::FlowEma { half_life_days } = *self {
            if !(half_life_days.is_finite() && half_life_days > 0.0) {
                return Err(Error::Domain(format!(
                    "EMA half-life must be positive, got {half_life_days}"
                )));
            }
        }
        Ok(())
    }
}

/// Per-day decay `2^(-1/half_life)`.
pub fn ema_decay(half_life_days: f64) -> f64 {
    (-1.0 / half_life_days).exp2()
}

/// Split `total_emission` across subnets in proportion to price.
pub fn allocate_emissions_price(prices: &[f64], total_emission: f64) -> Result<Vec<f64>> {
    if !(total_emission.is_finite() && total_emission >= 0.0) {
        return Err(Error::Domain(format!(
            "total emission must be non-negative, got {total_emission}"
        )));
    }
    if let Some(p) = prices.iter().find(|p| !(p.is_finite() && **p >= 0.0)) {
        return Err(Error::Domain(format!("price must be non-negative, got {p}")));
    }
    proportional(prices, total_emission)
}

/// Running state of the flow-based allocation: one EMA of net inflow per subnet.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlowEmaState {
    pub ema: Vec<f64>,
}

impl FlowEmaState {
    pub fn fresh(n_subnets: usize) -> Self {
        Self {
            ema: vec![0.0; n_subnets],
        }
    }

    /// One daily EMA step without allocating.
    pub fn update(&self, todays_flows: &[f64], half_life_days: f64) -> Result<FlowEmaState> {
        if todays_flows.len() != self.ema.len() {
            return Err(Error::Domain(format!(
                "flow vector has {} entries, EMA state has {}",
                todays_flows.len(),
                self.ema.len()
            )));
        }
        let lambda = ema_decay(half_life_days);
        let ema = self
            .ema
            .iter()
            .zip(todays_flows)
            .map(|(s, f)| lambda * s + (1.0 - lambda) * f)
            .collect();
        Ok(FlowEmaState { ema })
    }
}

/// Update the inflow EMA with today's flows and allocate in proportion to the
/// positive part of each EMA.
pub fn allocate_emissions_flow(
    state: &FlowEmaState,
    todays_flows: &[f64],
    total_emission: f64,
    policy: EmissionPolicy,
) -> Result<(FlowEmaState, Vec<f64>)> {
    policy.validate()?;
    let half_life = match policy {
        EmissionPolicy::FlowEma { half_life_days } => half_life_days,
        EmissionPolicy::PriceProportional => {
            return Err(Error::Domain("flow allocation requires a flow-EMA policy".into()))
        }
    };
    if !(total_emission.is_finite() && total_emission >= 0.0) {
        return Err(Error::Domain(format!(
            "total emission must be non-negative, got {total_emission}"
        )));
    }
    let next = state.update(todays_flows, half_life)?;
    let clipped: Vec<f64> = next.ema.iter().map(|s| s.max(0.0)).collect();
    let emissions = proportional(&clipped, total_emission)?;
    Ok((next, emissions))
}

fn proportional(weights: &[f64], total: f64) -> Result<Vec<f64>> {
    let sum: f64 = weights.iter().sum();
    if !(sum > 0.0) {
        return Err(Error::UndefinedAllocation("all allocation weights are zero".into()));
    }
    Ok(weights.iter().map(|w| w / sum * total).collect())
}
