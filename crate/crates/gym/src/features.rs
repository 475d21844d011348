//! State features shared by the market environments.
//!
//! Undefined quantities (a one-sided book, no trade yet, too little
//! history) map to 0, except the imbalance which has its own edge values.

use marketgym_core::book::{Price, Qty};

use crate::markets::MarketRawState;

/// Bid volume over total volume on the first `levels` levels per side
/// (`None` for every level). No bids gives 0, no asks gives 1, an empty
/// book gives 0.5.
pub fn imbalance(bids: &[(Price, Qty)], asks: &[(Price, Qty)], levels: Option<usize>) -> f64 {
    let take = levels.unwrap_or(usize::MAX);
    let bid: Qty = bids.iter().take(take).map(|l| l.1).sum();
    let ask: Qty = asks.iter().take(take).map(|l| l.1).sum();
    match (bid, ask) {
        (0, 0) => 0.5,
        (0, _) => 0.0,
        (_, 0) => 1.0,
        (b, a) => b as f64 / (b + a) as f64,
    }
}

pub fn spread(raw: &MarketRawState) -> f64 {
    raw.spread().map_or(0.0, |s| s as f64)
}

/// Mid minus last trade price.
pub fn direction_feature(raw: &MarketRawState) -> f64 {
    match (raw.mid(), raw.last_transaction) {
        (Some(mid), Some(last)) => mid - last as f64,
        _ => 0.0,
    }
}

/// `[r_t, r_{t-1}, ..., r_{t-k+1}]` with `r_t = mid_t - mid_{t-1}`, from a
/// per-step mid history stored oldest first.
pub fn mid_returns(history: &[Option<f64>], k: usize) -> Vec<f64> {
    (0..k)
        .map(|i| {
            let n = history.len();
            if n < i + 2 {
                return 0.0;
            }
            match (history[n - 1 - i], history[n - 2 - i]) {
                (Some(now), Some(prev)) => now - prev,
                _ => 0.0,
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn imbalance_arithmetic() {
        let bids = [(100, 100), (99, 100), (98, 100), (97, 1000)];
        let asks = [(101, 50), (102, 50)];
        assert_eq!(imbalance(&bids, &asks, Some(3)), 0.75);
        assert_eq!(imbalance(&bids, &asks, None), 1300.0 / 1400.0);
    }

    #[test]
    fn imbalance_edges() {
        assert_eq!(imbalance(&[], &[(101, 5)], Some(3)), 0.0);
        assert_eq!(imbalance(&[(99, 5)], &[], Some(3)), 1.0);
        assert_eq!(imbalance(&[], &[], Some(3)), 0.5);
        assert_eq!(imbalance(&[], &[], None), 0.5);
    }

    #[test]
    fn returns_newest_first() {
        let h = [Some(100.0), Some(101.0), Some(103.0), Some(102.5)];
        assert_eq!(mid_returns(&h, 3), vec![-0.5, 2.0, 1.0]);
    }

    #[test]
    fn returns_undefined_are_zero() {
        assert_eq!(mid_returns(&[], 3), vec![0.0; 3]);
        assert_eq!(mid_returns(&[Some(100.0)], 3), vec![0.0; 3]);
        assert_eq!(mid_returns(&[Some(100.0), None, Some(102.0)], 3), vec![0.0, 0.0, 0.0]);
        assert_eq!(mid_returns(&[Some(100.0), Some(101.0)], 3), vec![1.0, 0.0, 0.0]);
    }

    #[test]
    fn undefined_spread_and_direction() {
        let raw = MarketRawState {
            bids: vec![(99, 1)],
            ..Default::default()
        };
        assert_eq!(spread(&raw), 0.0);
        assert_eq!(direction_feature(&raw), 0.0);
        let raw = MarketRawState {
            bids: vec![(99, 1)],
            asks: vec![(102, 1)],
            last_transaction: Some(100),
            ..Default::default()
        };
        assert_eq!(spread(&raw), 3.0);
        assert_eq!(direction_feature(&raw), 0.5);
    }
}
