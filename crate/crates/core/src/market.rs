//! Toll profiles, credit settlement and price adjustment.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::population::Traveler;
use crate::scalar::Scalar;

/// Credits per meter conversion for distance-based tolls.
pub const DISTANCE_SCALE: f64 = 2e-4;
/// Credits per minute conversion for time-based tolls.
pub const TIME_SCALE: f64 = 0.08;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum MarketError {
    #[error("invalid toll profile: {0}")]
    InvalidProfile(String),
    #[error("invalid market parameter: {0}")]
    InvalidParameter(String),
    #[error("{what}: expected {expected} entries, found {found}")]
    LengthMismatch { what: &'static str, expected: usize, found: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum TollShape<T> {
    /// `A exp(-(t - center)^2 / (2 spread^2))`.
    Gaussian { amplitude: T, center: T, spread: T },
    /// Symmetric plateaus: `levels[0]` on `|t - center| < width/2`, `levels[k]`
    /// on the k-th band of `width` minutes further out on each side, 0 beyond.
    Step { levels: [T; 5], center: T, width: T },
    /// Isosceles triangle of the given height, zero outside the base.
    Triangular { height: T, base: T, center: T },
    /// Same toll at every minute.
    Flat { level: T },
}

impl<T: Scalar> TollShape<T> {
    pub fn eval(&self, t: T) -> T {
        match *self {
            TollShape::Gaussian { amplitude, center, spread } => {
                let z = (t - center) / spread;
                amplitude * (-(z * z) / T::lit(2.0)).exp()
            }
            TollShape::Step { levels, center, width } => {
                let band = ((t - center).abs() + width / T::lit(2.0)) / width;
                match band.floor().to_usize() {
                    Some(k) if k < levels.len() => levels[k],
                    _ => T::zero(),
                }
            }
            TollShape::Triangular { height, base, center } => {
                let half = base / T::lit(2.0);
                height * (T::one() - (t - center).abs() / half).max(T::zero())
            }
            TollShape::Flat { level } => level,
        }
    }

    fn validate(&self) -> Result<(), MarketError> {
        let bad = |m: &str| Err(MarketError::InvalidProfile(m.to_string()));
        let finite_nonneg = |v: T| v.is_finite() && v >= T::zero();
        match *self {
            TollShape::Gaussian { amplitude, center, spread } => {
                if !finite_nonneg(amplitude) || !center.is_finite() {
                    return bad("gaussian amplitude must be nonnegative and center finite");
                }
                if !(spread.is_finite() && spread > T::zero()) {
                    return bad("gaussian spread must be positive");
                }
            }
            TollShape::Step { levels, center, width } => {
                if !levels.iter().all(|&l| finite_nonneg(l)) || !center.is_finite() {
                    return bad("step levels must be nonnegative and center finite");
                }
                if !(width.is_finite() && width > T::zero()) {
                    return bad("step band width must be positive");
                }
            }
            TollShape::Triangular { height, base, center } => {
                if !finite_nonneg(height) || !center.is_finite() {
                    return bad("triangle height must be nonnegative and center finite");
                }
                if !(base.is_finite() && base > T::zero()) {
                    return bad("triangle base must be positive");
                }
            }
            TollShape::Flat { level } => {
                if !finite_nonneg(level) {
                    return bad("flat toll must be nonnegative");
                }
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum TollBasis {
    #[default]
    Distance,
    Time,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Denomination {
    #[default]
    Credits,
    Money,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Scheme {
    None,
    TcsDistance,
    TcsTime,
    CongestionPricing,
}

impl Scheme {
    pub fn uses_credits(self) -> bool {
        matches!(self, Scheme::TcsDistance | Scheme::TcsTime)
    }

    pub fn label(self) -> &'static str {
        match self {
            Scheme::None => "none",
            Scheme::TcsDistance => "tcs-distance",
            Scheme::TcsTime => "tcs-time",
            Scheme::CongestionPricing => "cp",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TollProfile<T> {
    pub shape: TollShape<T>,
    #[serde(default)]
    pub basis: TollBasis,
    #[serde(default)]
    pub denomination: Denomination,
    /// Credits (or DKK) per meter or per minute of the basis. Defaults to
    /// [`DISTANCE_SCALE`] or [`TIME_SCALE`].
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scale: Option<T>,
}

impl<T: Scalar> TollProfile<T> {
    pub fn credits(shape: TollShape<T>, basis: TollBasis) -> Self {
        TollProfile { shape, basis, denomination: Denomination::Credits, scale: None }
    }

    pub fn money(shape: TollShape<T>, basis: TollBasis) -> Self {
        TollProfile { shape, basis, denomination: Denomination::Money, scale: None }
    }

    pub fn validate(&self) -> Result<(), MarketError> {
        self.shape.validate()?;
        let s = self.scale();
        if !(s.is_finite() && s >= T::zero()) {
            return Err(MarketError::InvalidProfile("scale must be nonnegative".into()));
        }
        Ok(())
    }

    pub fn scale(&self) -> T {
        self.scale.unwrap_or_else(|| match self.basis {
            TollBasis::Distance => T::lit(DISTANCE_SCALE),
            TollBasis::Time => T::lit(TIME_SCALE),
        })
    }

    pub fn scheme(&self) -> Scheme {
        match (self.denomination, self.basis) {
            (Denomination::Credits, TollBasis::Distance) => Scheme::TcsDistance,
            (Denomination::Credits, TollBasis::Time) => Scheme::TcsTime,
            (Denomination::Money, _) => Scheme::CongestionPricing,
        }
    }

    /// Credits (or DKK) charged for a trip starting at `depart`.
    pub fn charge(&self, depart: T, length: T, travel_time: T) -> T {
        let amount = match self.basis {
            TollBasis::Distance => length,
            TollBasis::Time => travel_time,
        };
        self.shape.eval(depart) * amount * self.scale()
    }

    /// Samples `Toll(t)` on `[start, end]` every `dt` minutes as CSV.
    pub fn write_curve_csv<W: Write>(&self, start: T, end: T, dt: T, mut out: W) -> std::io::Result<()> {
        writeln!(out, "time,toll")?;
        let mut k = 0usize;
        loop {
            let t = start + dt * T::from_usize_lossy(k);
            if t > end {
                break;
            }
            writeln!(out, "{t},{}", self.shape.eval(t))?;
            k += 1;
        }
        Ok(())
    }
}

/// Convenience for `profile.shape.eval(t)`.
pub fn eval_toll<T: Scalar>(profile: &TollProfile<T>, t: T) -> T {
    profile.shape.eval(t)
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct CreditAccount<T> {
    pub consumed: T,
    pub from_endowment: T,
    pub bought: T,
    pub sold: T,
}

impl<T: Scalar> CreditAccount<T> {
    pub fn settle(consumed: T, endowment: T) -> Self {
        CreditAccount {
            consumed,
            from_endowment: endowment.min(consumed),
            bought: (consumed - endowment).max(T::zero()),
            sold: (endowment - consumed).max(T::zero()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Transactions<T> {
    pub accounts: Vec<CreditAccount<T>>,
    pub endowment: T,
    pub price: T,
    pub total_consumed: T,
    pub total_from_endowment: T,
    pub total_bought: T,
    pub total_sold: T,
}

impl<T: Scalar> Transactions<T> {
    /// Excess consumption `Z = sum consumed - I N`.
    pub fn excess(&self) -> T {
        self.total_consumed - self.endowment * T::from_usize_lossy(self.accounts.len())
    }

    /// Credits bought minus credits sold at the regulator's window.
    pub fn trade_imbalance(&self) -> T {
        self.total_bought - self.total_sold
    }
}

/// Settles the credit accounts of one day and returns them with `Z`.
pub fn settle_day<T: Scalar>(
    departures: &[T],
    travel_times: &[T],
    lengths: &[T],
    profile: &TollProfile<T>,
    endowment: T,
    price: T,
) -> Result<(Transactions<T>, T), MarketError> {
    let n = departures.len();
    for (what, v) in [("travel_times", travel_times), ("lengths", lengths)] {
        if v.len() != n {
            return Err(MarketError::LengthMismatch { what, expected: n, found: v.len() });
        }
    }
    let consumption: Vec<T> = departures
        .iter()
        .zip(travel_times)
        .zip(lengths)
        .map(|((&t, &tt), &l)| profile.charge(t, l, tt))
        .collect();
    Ok(settle_consumption(&consumption, endowment, price))
}

/// Settlement from precomputed per-traveler consumption.
pub fn settle_consumption<T: Scalar>(consumption: &[T], endowment: T, price: T) -> (Transactions<T>, T) {
    let accounts: Vec<CreditAccount<T>> =
        consumption.iter().map(|&c| CreditAccount::settle(c, endowment)).collect();
    let sum = |f: fn(&CreditAccount<T>) -> T| accounts.iter().map(f).fold(T::zero(), |a, b| a + b);
    let tx = Transactions {
        total_consumed: sum(|a| a.consumed),
        total_from_endowment: sum(|a| a.from_endowment),
        total_bought: sum(|a| a.bought),
        total_sold: sum(|a| a.sold),
        accounts,
        endowment,
        price,
    };
    let z = tx.excess();
    (tx, z)
}

/// Price after one day: `p + kZ` while `p > 0` (floored at 0), and
/// `p + max(0, kZ)` at `p = 0`.
pub fn update_price<T: Scalar>(p: T, z: T, k: T) -> T {
    update_price_checked(p, z, k).0
}

/// As [`update_price`], also reporting whether the floor at 0 was applied.
pub fn update_price_checked<T: Scalar>(p: T, z: T, k: T) -> (T, bool) {
    let step = k * z;
    if p > T::zero() {
        let next = p + step;
        if next < T::zero() {
            (T::zero(), true)
        } else {
            (next, false)
        }
    } else {
        (p + step.max(T::zero()), false)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MarketState<T> {
    pub price: T,
    pub endowment: T,
    pub adjustment_rate: T,
    /// Excess consumption of the last settled day.
    pub excess: T,
    /// Number of times the price was floored at 0.
    pub clamps: u32,
}

impl<T: Scalar> MarketState<T> {
    pub fn new(price: T, endowment: T, adjustment_rate: T) -> Result<Self, MarketError> {
        if !(price.is_finite() && price >= T::zero()) {
            return Err(MarketError::InvalidParameter(format!("initial price {price}")));
        }
        if !(endowment.is_finite() && endowment >= T::zero()) {
            return Err(MarketError::InvalidParameter(format!("endowment {endowment}")));
        }
        if !(adjustment_rate.is_finite() && adjustment_rate > T::zero()) {
            return Err(MarketError::InvalidParameter(format!("adjustment rate {adjustment_rate}")));
        }
        Ok(MarketState { price, endowment, adjustment_rate, excess: T::zero(), clamps: 0 })
    }

    /// Applies one day's excess and returns the new price.
    pub fn advance(&mut self, z: T) -> T {
        let (p, clamped) = update_price_checked(self.price, z, self.adjustment_rate);
        self.price = p;
        self.excess = z;
        if clamped {
            self.clamps += 1;
        }
        p
    }
}

/// Per-capita credits needed if everyone took their cheapest window slot.
///
/// Time-based tolls use the free-flow travel time, which bounds the
/// congested consumption from below.
pub fn min_endowment<T: Scalar>(
    travelers: &[Traveler<T>],
    profile: &TollProfile<T>,
    free_flow_speed: T,
) -> T {
    if travelers.is_empty() {
        return T::zero();
    }
    let total = travelers
        .iter()
        .map(|tr| {
            let tt = tr.trip_length / free_flow_speed;
            tr.window
                .iter()
                .map(|&t| profile.charge(t, tr.trip_length, tt))
                .fold(T::infinity(), T::min)
        })
        .fold(T::zero(), |a, b| a + b);
    total / T::from_usize_lossy(travelers.len())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::population::departure_window;

    fn gaussian() -> TollShape<f64> {
        TollShape::Gaussian { amplitude: 11.0, center: 18.0, spread: 80.0 }
    }

    #[test]
    fn gaussian_values() {
        let g = gaussian();
        assert_eq!(g.eval(18.0), 11.0);
        assert!((g.eval(98.0) - 11.0 * (-0.5f64).exp()).abs() < 1e-12);
        assert!((g.eval(-62.0) - 0.6065306597 * 11.0).abs() < 1e-9);
    }

    #[test]
    fn step_values() {
        let s = TollShape::Step { levels: [5.0, 4.0, 3.0, 2.0, 1.0], center: 80.0, width: 10.0 };
        assert_eq!(s.eval(80.0), 5.0);
        assert_eq!(s.eval(84.9), 5.0);
        assert_eq!(s.eval(75.1), 5.0);
        assert_eq!(s.eval(86.0), 4.0);
        assert_eq!(s.eval(74.0), 4.0);
        assert_eq!(s.eval(124.0), 1.0);
        assert_eq!(s.eval(126.0), 0.0);
        assert_eq!(s.eval(-1e9), 0.0);
    }

    #[test]
    fn triangle_values() {
        let tri = TollShape::Triangular { height: 6.0, base: 40.0, center: 80.0 };
        assert_eq!(tri.eval(80.0), 6.0);
        assert_eq!(tri.eval(70.0), 3.0);
        assert_eq!(tri.eval(90.0), 3.0);
        assert_eq!(tri.eval(100.0), 0.0);
        assert_eq!(tri.eval(130.0), 0.0);
    }

    #[test]
    fn settlement_examples() {
        let a = CreditAccount::settle(7.0, 5.0);
        assert_eq!((a.bought, a.sold, a.from_endowment), (2.0, 0.0, 5.0));
        let a = CreditAccount::settle(3.0, 5.0);
        assert_eq!((a.bought, a.sold, a.from_endowment), (0.0, 2.0, 3.0));
    }

    #[test]
    fn zero_toll_settlement() {
        let p = TollProfile::credits(TollShape::Flat { level: 0.0 }, TollBasis::Distance);
        let (tx, z) = settle_day(&[1.0, 2.0, 3.0], &[5.0; 3], &[4000.0; 3], &p, 5.0, 1.0).unwrap();
        assert_eq!(z, -15.0);
        assert!(tx.accounts.iter().all(|a| a.sold == 5.0 && a.bought == 0.0));
    }

    #[test]
    fn distance_and_time_consumption() {
        let g = gaussian();
        let d = TollProfile::credits(g.clone(), TollBasis::Distance);
        let t = TollProfile::credits(g, TollBasis::Time);
        assert!((d.charge(18.0, 4600.0, 12.0) - 11.0 * 4600.0 * 2e-4).abs() < 1e-12);
        assert!((t.charge(18.0, 4600.0, 12.0) - 11.0 * 12.0 * 0.08).abs() < 1e-12);
        let (_, z) = settle_day(&[18.0], &[12.0], &[4600.0], &d, 5.0, 1.0).unwrap();
        assert!((z - (10.12 - 5.0)).abs() < 1e-12);
    }

    #[test]
    fn price_examples() {
        assert!((update_price(1.0f64, 1000.0, 2e-4) - 1.2).abs() < 1e-12);
        assert_eq!(update_price(0.0, -5.0, 2e-4), 0.0);
        assert_eq!(update_price(0.5, 0.0, 2e-4), 0.5);
        assert_eq!(update_price_checked(0.1, -1e4, 2e-4), (0.0, true));
        assert!((update_price(0.0f64, 100.0, 2e-4) - 0.02).abs() < 1e-15);
    }

    #[test]
    fn min_endowment_examples() {
        let travelers: Vec<Traveler<f64>> = [3000.0, 5000.0]
            .iter()
            .enumerate()
            .map(|(id, &l)| Traveler {
                id,
                trip_length: l,
                desired_arrival: 90.0,
                sde: 0.5,
                sdl: 4.0,
                value_of_time: 1.1,
                initial_departure: 80.0,
                window: departure_window(80.0, 30, 1.0),
            })
            .collect();
        let flat = TollProfile::credits(TollShape::Flat { level: 3.0 }, TollBasis::Distance);
        assert!((min_endowment(&travelers, &flat, 586.8) - 3.0 * 2e-4 * 4000.0).abs() < 1e-12);
        let zero = TollProfile::credits(TollShape::Flat { level: 0.0 }, TollBasis::Distance);
        assert_eq!(min_endowment(&travelers, &zero, 586.8), 0.0);
        // Cheapest slot of a gaussian centered at 18 is the latest one (110).
        let g = TollProfile::credits(gaussian(), TollBasis::Distance);
        let expected = gaussian().eval(110.0) * 2e-4 * 4000.0;
        assert!((min_endowment(&travelers, &g, 586.8) - expected).abs() < 1e-12);
    }

    #[test]
    fn profiles_round_trip_through_json() {
        let p = TollProfile::credits(
            TollShape::Step { levels: [1.0, 2.0, 3.0, 4.0, 5.0], center: 70.0, width: 8.0 },
            TollBasis::Time,
        );
        let s = serde_json::to_string(&p).unwrap();
        let back: TollProfile<f64> = serde_json::from_str(&s).unwrap();
        assert_eq!(p, back);
        assert_eq!(back.scheme(), Scheme::TcsTime);
    }

    #[test]
    fn invalid_profiles() {
        let p = TollProfile::credits(
            TollShape::Gaussian { amplitude: 1.0, center: 0.0, spread: 0.0 },
            TollBasis::Distance,
        );
        assert!(p.validate().is_err());
        let p = TollProfile::<f64>::credits(TollShape::Flat { level: -1.0 }, TollBasis::Distance);
        assert!(p.validate().is_err());
    }
}
