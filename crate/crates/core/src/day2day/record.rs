use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::behavior::CostBreakdown;
use crate::market::{Scheme, Transactions};
use crate::mfd::DayTrajectory;
use crate::scalar::Scalar;

use super::welfare::Welfare;

/// Width of departure histogram bins in minutes.
pub const HISTOGRAM_BIN: f64 = 5.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Histogram {
    pub start: f64,
    pub width: f64,
    pub counts: Vec<u32>,
}

impl Histogram {
    pub fn of<T: Scalar>(values: &[T], width: f64) -> Self {
        let vals: Vec<f64> = values.iter().filter_map(|v| v.to_f64()).collect();
        if vals.is_empty() {
            return Histogram { start: 0.0, width, counts: Vec::new() };
        }
        let lo = vals.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = vals.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let start = (lo / width).floor() * width;
        let bins = ((hi - start) / width).floor() as usize + 1;
        let mut counts = vec![0u32; bins];
        for v in vals {
            let k = (((v - start) / width).floor() as usize).min(bins - 1);
            counts[k] += 1;
        }
        Histogram { start, width, counts }
    }

    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "bin_start,bin_end,departures")?;
        for (k, c) in self.counts.iter().enumerate() {
            let a = self.start + k as f64 * self.width;
            writeln!(out, "{a},{},{c}", a + self.width)?;
        }
        Ok(())
    }
}

/// Everything that happened on one day.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DayRecord<T> {
    pub day: u32,
    pub scheme: Scheme,
    /// Index into each traveler's window.
    pub choices: Vec<u32>,
    pub departures: Vec<T>,
    pub travel_times: Vec<T>,
    pub costs: Vec<CostBreakdown<T>>,
    pub epsilon: Vec<T>,
    pub transactions: Option<Transactions<T>>,
    /// Credit price in force today.
    pub price: T,
    /// Price set for tomorrow.
    pub next_price: T,
    /// Excess credit consumption (0 without credits).
    pub excess: T,
    /// `|C - c|_1 / N`; absent before perceptions exist.
    pub inconsistency: Option<T>,
    /// `|C - c|_1 / |C|_1` in percent.
    pub gap: Option<T>,
    pub welfare: Welfare<T>,
    pub trajectory: DayTrajectory<T>,
}

impl<T: Scalar> DayRecord<T> {
    pub fn n_travelers(&self) -> usize {
        self.costs.len()
    }

    pub fn peak_accumulation(&self) -> usize {
        self.trajectory.peak_accumulation
    }

    pub fn departure_histogram(&self) -> Histogram {
        Histogram::of(&self.departures, HISTOGRAM_BIN)
    }

    pub fn metrics(&self) -> DayMetrics {
        let n = self.n_travelers().max(1) as f64;
        let f = |v: T| v.to_f64().unwrap_or(f64::NAN);
        let mean = |g: &dyn Fn(&CostBreakdown<T>) -> T| self.costs.iter().map(|c| f(g(c))).sum::<f64>() / n;
        let (consumption, imbalance) = match &self.transactions {
            Some(tx) => (f(tx.total_consumed) / n, f(tx.trade_imbalance())),
            None => (0.0, 0.0),
        };
        DayMetrics {
            day: self.day,
            travel_time_cost: -mean(&|c| c.travel_time_cost),
            schedule_delay: -mean(&|c| c.schedule_delay_cost),
            random_utility: self.epsilon.iter().map(|&e| f(e)).sum::<f64>() / n,
            toll_payment: mean(&|c| c.toll_payment),
            consumer_surplus: f(self.welfare.cs),
            social_welfare: f(self.welfare.w),
            social_welfare_direct: f(self.welfare.w_direct),
            transfers: f(self.welfare.tr),
            regulator_revenue: f(self.welfare.rr),
            regulator_cost: f(self.welfare.rc),
            endowment_spent: f(self.welfare.te),
            price: f(self.price),
            next_price: f(self.next_price),
            excess: f(self.excess),
            credit_consumption: consumption,
            trade_imbalance: imbalance,
            inconsistency: self.inconsistency.map_or(f64::NAN, f),
            gap: self.gap.map_or(f64::NAN, f),
            mean_travel_time: self.travel_times.iter().map(|&t| f(t)).sum::<f64>() / n,
            early_share: self.costs.iter().filter(|c| c.early).count() as f64 / n,
            peak_accumulation: self.peak_accumulation() as f64,
        }
    }
}

/// Scalar summary of a day; signed so that costs are negative utilities.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DayMetrics {
    pub day: u32,
    pub travel_time_cost: f64,
    pub schedule_delay: f64,
    pub random_utility: f64,
    pub toll_payment: f64,
    pub consumer_surplus: f64,
    pub social_welfare: f64,
    pub social_welfare_direct: f64,
    pub transfers: f64,
    pub regulator_revenue: f64,
    pub regulator_cost: f64,
    pub endowment_spent: f64,
    pub price: f64,
    pub next_price: f64,
    pub excess: f64,
    pub credit_consumption: f64,
    pub trade_imbalance: f64,
    pub inconsistency: f64,
    pub gap: f64,
    pub mean_travel_time: f64,
    pub early_share: f64,
    pub peak_accumulation: f64,
}

impl DayMetrics {
    pub const COLUMNS: [&'static str; 21] = [
        "travel_time_cost",
        "schedule_delay",
        "random_utility",
        "toll_payment",
        "consumer_surplus",
        "social_welfare",
        "social_welfare_direct",
        "transfers",
        "regulator_revenue",
        "regulator_cost",
        "endowment_spent",
        "price",
        "next_price",
        "excess",
        "credit_consumption",
        "trade_imbalance",
        "inconsistency",
        "gap",
        "mean_travel_time",
        "early_share",
        "peak_accumulation",
    ];

    pub fn values(&self) -> [f64; 21] {
        [
            self.travel_time_cost,
            self.schedule_delay,
            self.random_utility,
            self.toll_payment,
            self.consumer_surplus,
            self.social_welfare,
            self.social_welfare_direct,
            self.transfers,
            self.regulator_revenue,
            self.regulator_cost,
            self.endowment_spent,
            self.price,
            self.next_price,
            self.excess,
            self.credit_consumption,
            self.trade_imbalance,
            self.inconsistency,
            self.gap,
            self.mean_travel_time,
            self.early_share,
            self.peak_accumulation,
        ]
    }

    pub fn get(&self, column: &str) -> Option<f64> {
        Self::COLUMNS.iter().position(|&c| c == column).map(|k| self.values()[k])
    }

    pub fn write_header<W: Write>(mut out: W) -> std::io::Result<()> {
        writeln!(out, "day,{}", Self::COLUMNS.join(","))
    }

    pub fn write_row<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        write!(out, "{}", self.day)?;
        for v in self.values() {
            if v.is_nan() {
                write!(out, ",")?;
            } else {
                write!(out, ",{v}")?;
            }
        }
        writeln!(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn histogram_bins() {
        let h = Histogram::of(&[61.0, 62.0, 64.9, 65.0, 79.0], 5.0);
        assert_eq!(h.start, 60.0);
        assert_eq!(h.counts, vec![3, 1, 0, 1]);
        assert!(Histogram::of::<f64>(&[], 5.0).counts.is_empty());
    }
}
