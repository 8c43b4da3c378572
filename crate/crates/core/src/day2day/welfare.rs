use serde::{Deserialize, Serialize};

use crate::behavior::CostBreakdown;
use crate::market::{Scheme, Transactions};
use crate::scalar::Scalar;

/// Per-capita welfare components in DKK.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Welfare<T> {
    /// Consumer surplus, including toll payments.
    pub cs: T,
    /// Credits sold by travelers, valued at the price.
    pub tr: T,
    /// Regulator revenue: credits bought by travelers, or money tolls.
    pub rr: T,
    /// Regulator cost of buying back credits.
    pub rc: T,
    /// Endowed credits spent on travel, valued at the price.
    pub te: T,
    /// Social welfare from the components.
    pub w: T,
    /// Social welfare as `mean(-theta * tc + eps)`.
    pub w_direct: T,
}

/// Welfare of one day from the chosen trips and realized choice errors.
pub fn welfare<T: Scalar>(
    costs: &[CostBreakdown<T>],
    epsilon: &[T],
    transactions: Option<&Transactions<T>>,
    scheme: Scheme,
) -> Welfare<T> {
    let n = T::from_usize_lossy(costs.len().max(1));
    let mut cs = T::zero();
    let mut direct = T::zero();
    let mut paid = T::zero();
    for (c, &e) in costs.iter().zip(epsilon) {
        cs = cs + c.total + e;
        direct = direct - (c.travel_time_cost + c.schedule_delay_cost) + e;
        paid = paid + c.toll_payment;
    }
    let mut out = Welfare { cs: cs / n, w_direct: direct / n, ..Welfare::default() };
    match (scheme, transactions) {
        (Scheme::TcsDistance | Scheme::TcsTime, Some(tx)) => {
            let (mut sold, mut bought, mut endowed) = (T::zero(), T::zero(), T::zero());
            for a in &tx.accounts {
                sold = sold + a.sold;
                bought = bought + a.bought;
                endowed = endowed + a.from_endowment;
            }
            out.tr = sold * tx.price / n;
            out.rc = out.tr;
            out.rr = bought * tx.price / n;
            out.te = endowed * tx.price / n;
            out.w = out.cs + out.tr + out.rr - out.rc + out.te;
        }
        (Scheme::CongestionPricing, _) => {
            out.rr = paid / n;
            out.w = out.cs + out.rr;
        }
        _ => out.w = out.cs,
    }
    out
}
