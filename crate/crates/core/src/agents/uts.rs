use std::collections::VecDeque;
use std::sync::Arc;

use rand_distr::{Beta, Distribution};
use serde::{Deserialize, Serialize};

use super::{LinkAgent, Proposal};
use crate::error::FieldError;
use crate::mcs::argmax_throughput;
use crate::seed::SimRng;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct UtsConfig {
    /// Number of most recent transmissions kept; unlimited when absent.
    #[serde(default)]
    pub window: Option<usize>,
    /// Keep `window` outcomes per arm instead of one window over all arms.
    #[serde(default)]
    pub per_arm_window: bool,
}

impl UtsConfig {
    pub fn windowed(window: Option<usize>) -> Self {
        Self {
            window,
            per_arm_window: false,
        }
    }

    pub(crate) fn check(&self, prefix: &str, errors: &mut Vec<FieldError>) {
        if self.window == Some(0) {
            errors.push(FieldError {
                field: format!("{prefix}.window"),
                reason: "must be at least 1 (omit for unlimited)".into(),
            });
        }
    }
}

/// Sliding-window HARQ history with per-arm tallies derived from it.
#[derive(Debug, Clone, PartialEq)]
pub struct UtsState {
    capacity: Option<usize>,
    per_arm: bool,
    /// (0-based arm, ack) in arrival order.
    window: VecDeque<(usize, bool)>,
    arm_windows: Vec<VecDeque<bool>>,
    successes: Vec<u32>,
    failures: Vec<u32>,
    leader_visits: Vec<u64>,
}

impl UtsState {
    pub fn new(num_arms: usize, config: &UtsConfig) -> Self {
        Self {
            capacity: config.window,
            per_arm: config.per_arm_window,
            window: VecDeque::new(),
            arm_windows: vec![VecDeque::new(); num_arms],
            successes: vec![0; num_arms],
            failures: vec![0; num_arms],
            leader_visits: vec![0; num_arms],
        }
    }

    pub fn num_arms(&self) -> usize {
        self.successes.len()
    }

    /// (successes, failures) of the 1-based arm `m` within the window.
    pub fn counts(&self, m: usize) -> (u32, u32) {
        (self.successes[m - 1], self.failures[m - 1])
    }

    /// Records one outcome of the 1-based arm `m`, evicting the oldest entry
    /// once the window is full.
    pub fn update(&mut self, m: usize, ack: bool) {
        let arm = m - 1;
        self.tally(arm, ack, 1);
        if self.per_arm {
            let w = &mut self.arm_windows[arm];
            w.push_back(ack);
            if self.capacity.is_some_and(|cap| w.len() > cap) {
                let old = w.pop_front().expect("non-empty");
                self.tally(arm, old, -1);
            }
        } else {
            self.window.push_back((arm, ack));
            if self.capacity.is_some_and(|cap| self.window.len() > cap) {
                let (old_arm, old) = self.window.pop_front().expect("non-empty");
                self.tally(old_arm, old, -1);
            }
        }
    }

    fn tally(&mut self, arm: usize, ack: bool, delta: i32) {
        let slot = if ack {
            &mut self.successes[arm]
        } else {
            &mut self.failures[arm]
        };
        *slot = slot.checked_add_signed(delta).expect("tally underflow");
    }

    /// The window contents, oldest first, as (1-based arm, ack).
    pub fn history(&self) -> Vec<(usize, bool)> {
        if self.per_arm {
            self.arm_windows
                .iter()
                .enumerate()
                .flat_map(|(arm, w)| w.iter().map(move |&ack| (arm + 1, ack)))
                .collect()
        } else {
            self.window.iter().map(|&(arm, ack)| (arm + 1, ack)).collect()
        }
    }

    pub fn len(&self) -> usize {
        if self.per_arm {
            self.arm_windows.iter().map(VecDeque::len).sum()
        } else {
            self.window.len()
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Empirical success rate, 0.5 for arms without observations.
    pub fn empirical_mean(&self, arm: usize) -> f64 {
        let s = f64::from(self.successes[arm]);
        let n = s + f64::from(self.failures[arm]);
        if n == 0.0 {
            0.5
        } else {
            s / n
        }
    }

    /// Unimodal Thompson sampling step over data rates `rates`.
    ///
    /// The leader is the arm with the best empirical throughput. Every
    /// `(|neighborhood| + 1)`-th time an arm leads it is played outright;
    /// otherwise the leader and its index-adjacent neighbors each draw from
    /// `Beta(1 + successes, 1 + failures)` and the best sampled throughput
    /// wins. Ties go to the lowest index. Returns a 1-based arm.
    pub fn propose(&mut self, rates: &[f64], rng: &mut SimRng) -> usize {
        let k = self.num_arms();
        let leader = argmax_throughput(rates, (0..k).map(|a| self.empirical_mean(a)));
        let visits = self.leader_visits[leader];
        self.leader_visits[leader] += 1;

        let lo = leader.saturating_sub(1);
        let hi = (leader + 1).min(k - 1);
        let neighbors = hi - lo;
        if visits.is_multiple_of(neighbors as u64 + 1) {
            return leader + 1;
        }
        let samples: Vec<f64> = (lo..=hi)
            .map(|a| {
                let alpha = 1.0 + f64::from(self.successes[a]);
                let beta = 1.0 + f64::from(self.failures[a]);
                Beta::new(alpha, beta).expect("positive shape").sample(rng)
            })
            .collect();
        lo + argmax_throughput(&rates[lo..=hi], samples.into_iter()) + 1
    }
}

/// Unimodal Thompson sampling agent. It has no CQI mechanism.
pub struct Uts {
    state: UtsState,
    rates: Arc<Vec<f64>>,
}

impl Uts {
    pub fn new(config: &UtsConfig, rates: Arc<Vec<f64>>) -> Self {
        Self {
            state: UtsState::new(rates.len(), config),
            rates,
        }
    }

    pub fn state(&self) -> &UtsState {
        &self.state
    }
}

impl LinkAgent for Uts {
    fn propose(&mut self, rng: &mut SimRng) -> Proposal {
        Proposal {
            mcs: self.state.propose(&self.rates, rng),
            theta_hat_db: None,
        }
    }

    fn observe(&mut self, mcs: usize, ack: bool) {
        self.state.update(mcs, ack);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mcs::McsTable;
    use crate::seed::StreamKey;

    #[test]
    fn cold_start_leads_with_fastest_arm() {
        let rates = McsTable::lte_cqi().rates().to_vec();
        let mut s = UtsState::new(15, &UtsConfig::windowed(None));
        let mut rng = StreamKey::new(1).rng();
        assert_eq!(s.propose(&rates, &mut rng), 15);
    }

    #[test]
    fn leader_follows_empirical_throughput() {
        let rates = McsTable::lte_cqi().rates().to_vec();
        let mut s = UtsState::new(15, &UtsConfig::windowed(None));
        for _ in 0..5 {
            s.update(15, false);
            s.update(7, true);
        }
        // arm 15 scores 0 and arm 7 scores r_7; unseen arms score 0.5 r_m,
        // so the highest unseen arm still leads
        let leader = argmax_throughput(&rates, (0..15).map(|a| s.empirical_mean(a)));
        assert_eq!(leader + 1, 14);
        // once only arms 7 and 15 are known, 7 leads
        let mut only = UtsState::new(2, &UtsConfig::windowed(None));
        for _ in 0..5 {
            only.update(2, false);
            only.update(1, true);
        }
        let mut rng = StreamKey::new(2).rng();
        assert_eq!(only.propose(&[rates[6], rates[14]], &mut rng), 1);
    }

    #[test]
    fn single_arm() {
        let mut s = UtsState::new(1, &UtsConfig::windowed(Some(3)));
        let mut rng = StreamKey::new(3).rng();
        for i in 0..20 {
            assert_eq!(s.propose(&[1.0], &mut rng), 1);
            s.update(1, i % 2 == 0);
        }
    }

    #[test]
    fn fifo_eviction() {
        let mut s = UtsState::new(3, &UtsConfig::windowed(Some(2)));
        s.update(1, true);
        s.update(2, true);
        s.update(3, false);
        assert_eq!(s.history(), vec![(2, true), (3, false)]);
        assert_eq!(s.counts(1), (0, 0));
        assert_eq!(s.counts(3), (0, 1));
    }

    #[test]
    fn tallies() {
        let mut s = UtsState::new(3, &UtsConfig::windowed(None));
        s.update(3, true);
        s.update(3, false);
        assert_eq!(s.counts(3), (1, 1));
        for _ in 0..1000 {
            s.update(1, true);
        }
        assert_eq!(s.counts(1), (1000, 0));
    }

    #[test]
    fn per_arm_windows() {
        let cfg = UtsConfig {
            window: Some(2),
            per_arm_window: true,
        };
        let mut s = UtsState::new(2, &cfg);
        for _ in 0..5 {
            s.update(1, true);
        }
        s.update(2, false);
        assert_eq!(s.counts(1), (2, 0));
        assert_eq!(s.counts(2), (0, 1));
        assert_eq!(s.len(), 3);
    }

    #[test]
    fn leader_is_played_every_third_visit_with_two_neighbors() {
        // arm 2 leads with certainty, neighbors 1 and 3
        let rates = [1.0, 2.0, 3.0];
        let mut s = UtsState::new(3, &UtsConfig::windowed(None));
        for _ in 0..200 {
            s.update(1, true);
            s.update(2, true);
            s.update(3, false);
        }
        let mut rng = StreamKey::new(4).rng();
        let picks: Vec<usize> = (0..9).map(|_| s.propose(&rates, &mut rng)).collect();
        assert_eq!(picks[0], 2);
        assert_eq!(picks[3], 2);
        assert_eq!(picks[6], 2);
    }
}
