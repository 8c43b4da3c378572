//! Generalized cost, logit departure choice and day-to-day learning.

use rand::distr::Open01;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::market::TollProfile;
use crate::population::Traveler;
use crate::scalar::Scalar;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum BehaviorError {
    #[error("perception has {perceived} alternatives but experience has {experienced}")]
    Misaligned { perceived: usize, experienced: usize },
    #[error("learning rate must lie in (0, 1), got {0}")]
    LearningRate(f64),
    #[error("choice scale must be positive, got {0}")]
    ChoiceScale(f64),
}

/// Cost of one trip. Component costs are nonnegative; `total` is the
/// (negative) utility `-theta * time_cost - toll_payment`.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct CostBreakdown<T> {
    pub travel_time_cost: T,
    pub schedule_delay_cost: T,
    pub toll_payment: T,
    pub total: T,
    /// Minutes-equivalent `T + SDE*early + SDL*late`.
    pub time_cost: T,
    pub early: bool,
}

/// Cost of departing at `depart` with travel time `travel_time`.
///
/// Credit tolls are paid at `price` per credit; money tolls are paid as is.
pub fn generalized_cost<T: Scalar>(
    traveler: &Traveler<T>,
    depart: T,
    travel_time: T,
    price: T,
    toll: Option<&TollProfile<T>>,
) -> CostBreakdown<T> {
    let theta = traveler.value_of_time;
    let arrival = depart + travel_time;
    let early = arrival < traveler.desired_arrival;
    let delay = if early {
        traveler.sde * (traveler.desired_arrival - arrival)
    } else {
        traveler.sdl * (arrival - traveler.desired_arrival)
    };
    let toll_payment = match toll {
        None => T::zero(),
        Some(profile) => {
            let charge = profile.charge(depart, traveler.trip_length, travel_time);
            if profile.scheme().uses_credits() {
                price * charge
            } else {
                charge
            }
        }
    };
    let time_cost = travel_time + delay;
    CostBreakdown {
        travel_time_cost: theta * travel_time,
        schedule_delay_cost: theta * delay,
        toll_payment,
        total: -theta * time_cost - toll_payment,
        time_cost,
        early,
    }
}

/// Logit probabilities `exp(mu C_t) / sum_s exp(mu C_s)`.
pub fn choice_probabilities<T: Scalar>(perception: &[T], mu: T) -> Vec<T> {
    let max = perception.iter().copied().fold(T::neg_infinity(), T::max);
    let weights: Vec<T> = perception.iter().map(|&c| (mu * (c - max)).exp()).collect();
    let total = weights.iter().copied().fold(T::zero(), |a, b| a + b);
    weights.into_iter().map(|w| w / total).collect()
}

/// Draws `eps ~ Gumbel(0, 1/mu)` per alternative and returns the index of
/// `argmax C + eps` together with the chosen `eps`.
pub fn sample_choice<T: Scalar, R: Rng>(perception: &[T], mu: T, rng: &mut R) -> (usize, T) {
    let mut best = (0, T::neg_infinity(), T::zero());
    for (k, &c) in perception.iter().enumerate() {
        let u: f64 = rng.sample(Open01);
        let eps = T::lit(-(-u.ln()).ln()) / mu;
        let utility = c + eps;
        if utility > best.1 {
            best = (k, utility, eps);
        }
    }
    (best.0, best.2)
}

/// `omega * C + (1 - omega) * c`, elementwise.
pub fn learning_update<T: Scalar>(
    perception: &[T],
    experienced: &[T],
    omega: T,
) -> Result<Vec<T>, BehaviorError> {
    if perception.len() != experienced.len() {
        return Err(BehaviorError::Misaligned {
            perceived: perception.len(),
            experienced: experienced.len(),
        });
    }
    if !(omega > T::zero() && omega < T::one()) {
        return Err(BehaviorError::LearningRate(omega.to_f64().unwrap_or(f64::NAN)));
    }
    Ok(perception
        .iter()
        .zip(experienced)
        .map(|(&c_old, &c_new)| omega * c_old + (T::one() - omega) * c_new)
        .collect())
}
