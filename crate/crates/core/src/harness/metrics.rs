use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::EpisodeRecord;
use crate::learner::CurvePoint;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MetricError {
    #[error("no episodes with positive length to aggregate")]
    EmptyRun,
    #[error("reward rate {0} is not positive; rescuing cost undefined")]
    ZeroRate(f64),
}

/// Total reward over total time steps, pooled across episodes.
pub fn reward_rate(records: &[EpisodeRecord]) -> Result<f64, MetricError> {
    let reward: f64 = records.iter().map(|r| r.total_reward).sum();
    let steps: u64 = records.iter().map(|r| r.steps as u64).sum();
    rate_from_totals(reward, steps as f64)
}

/// Reward rate from aggregate reward and time totals (or equivalently from
/// their per-episode averages).
pub fn rate_from_totals(reward: f64, time: f64) -> Result<f64, MetricError> {
    if time.is_nan() || time <= 0.0 {
        return Err(MetricError::EmptyRun);
    }
    Ok(reward / time)
}

/// Time steps spent per unit of reward.
pub fn rescuing_cost(rate: f64) -> Result<f64, MetricError> {
    if rate.is_nan() || rate <= 0.0 {
        return Err(MetricError::ZeroRate(rate));
    }
    Ok(1.0 / rate)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub policy: String,
    pub episodes: usize,
    pub avg_time: f64,
    pub avg_reward: f64,
    pub reward_rate: f64,
    /// `None` when the reward rate is not positive.
    pub rescuing_cost: Option<f64>,
    #[serde(skip)]
    pub learning_curve: Option<Vec<CurvePoint>>,
}

impl RunSummary {
    pub fn from_records(
        policy: impl Into<String>,
        records: &[EpisodeRecord],
    ) -> Result<Self, MetricError> {
        if records.is_empty() {
            return Err(MetricError::EmptyRun);
        }
        let n = records.len() as f64;
        let rate = reward_rate(records)?;
        Ok(Self {
            policy: policy.into(),
            episodes: records.len(),
            avg_time: records.iter().map(|r| r.steps as f64).sum::<f64>() / n,
            avg_reward: records.iter().map(|r| r.total_reward).sum::<f64>() / n,
            reward_rate: rate,
            rescuing_cost: rescuing_cost(rate).ok(),
            learning_curve: None,
        })
    }
}
