//! Multi-level sampling maps over the sequency-ordered Walsh grid.
//!
//! The index grid is split into three nested squares anchored at DC: the
//! low level `max(u, v) < s_low` is sampled completely, the mid and high
//! levels uniformly at random without replacement.

use rand::seq::index;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Share of the budget assigned to each level.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LevelFractions {
    pub low: f64,
    pub mid: f64,
    pub high: f64,
}

impl LevelFractions {
    pub const DEFAULT: LevelFractions = LevelFractions {
        low: 0.6,
        mid: 0.25,
        high: 0.15,
    };

    /// Per-side fractions of the reference configuration; other sides fall
    /// back to [`LevelFractions::DEFAULT`].
    pub fn for_side(side: usize) -> Self {
        let (l, m, h) = match side {
            128 => (2025.0, 689.0, 562.0),
            64 => (676.0, 79.0, 64.0),
            32 => (121.0, 67.0, 16.0),
            _ => return Self::DEFAULT,
        };
        let t = l + m + h;
        LevelFractions {
            low: l / t,
            mid: m / t,
            high: h / t,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let all = [self.low, self.mid, self.high];
        if all.iter().any(|f| !f.is_finite() || *f < 0.0) || self.low <= 0.0 {
            return Err(Error::InvalidParameter(format!("bad level fractions {self:?}")));
        }
        if (all.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidParameter(format!(
                "level fractions must sum to 1, got {self:?}"
            )));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct WalshSamplingMap {
    pub window_side: usize,
    pub s_low: usize,
    pub s_mid: usize,
    /// `(n_low, n_mid, n_high)`.
    pub counts: (usize, usize, usize),
    /// Sorted flat indices `u * window_side + v`.
    pub selected: Vec<usize>,
    pub seed: u64,
}

impl WalshSamplingMap {
    pub fn rows(&self) -> usize {
        self.selected.len()
    }

    /// 0 for low, 1 for mid, 2 for high.
    pub fn level_of(&self, u: usize, v: usize) -> usize {
        let r = u.max(v);
        if r < self.s_low {
            0
        } else if r < self.s_mid {
            1
        } else {
            2
        }
    }

    /// Selected indices of one level, sorted.
    pub fn level_indices(&self, level: usize) -> Vec<usize> {
        let n = self.window_side;
        self.selected
            .iter()
            .copied()
            .filter(|&i| self.level_of(i / n, i % n) == level)
            .collect()
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.window_side;
        if !n.is_power_of_two() {
            return Err(Error::InvalidParameter(format!(
                "Walsh map side {n} is not a power of two"
            )));
        }
        if self.s_low == 0 || self.s_low > self.s_mid || self.s_mid > n {
            return Err(Error::InvalidParameter(format!(
                "level bounds {} / {} invalid for side {n}",
                self.s_low, self.s_mid
            )));
        }
        let mut seen = [0usize; 3];
        let mut prev = None;
        for &i in &self.selected {
            if i >= n * n || prev.is_some_and(|p| p >= i) {
                return Err(Error::InvalidParameter(
                    "selected indices must be sorted, unique and in range".into(),
                ));
            }
            prev = Some(i);
            seen[self.level_of(i / n, i % n)] += 1;
        }
        if (seen[0], seen[1], seen[2]) != self.counts {
            return Err(Error::InvalidParameter(format!(
                "per-level counts {seen:?} disagree with {:?}",
                self.counts
            )));
        }
        if self.selected.first() != Some(&0) {
            return Err(Error::InvalidParameter("DC coefficient must be selected".into()));
        }
        Ok(())
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let map: WalshSamplingMap = serde_json::from_str(s)?;
        map.validate()?;
        Ok(map)
    }
}

/// Builds a three-level map spending exactly `total_budget` coefficients.
///
/// The low square is the largest `s_low` with `s_low² <= low * budget`; the
/// mid count is `round(mid * budget)` and the high level takes the rest.
/// A budget covering every coefficient selects all of them as one low level.
pub fn design_sampling_map(
    window_side: usize,
    total_budget: usize,
    fractions: LevelFractions,
    seed: u64,
) -> Result<WalshSamplingMap> {
    let n = window_side;
    if !n.is_power_of_two() {
        return Err(Error::InvalidParameter(format!(
            "Walsh map side {n} is not a power of two"
        )));
    }
    if total_budget < 1 {
        return Err(Error::InvalidParameter("sampling budget must be at least 1".into()));
    }
    if total_budget > n * n {
        return Err(Error::InvalidParameter(format!(
            "budget {total_budget} exceeds the {} available coefficients",
            n * n
        )));
    }
    fractions.validate()?;
    let b = total_budget as f64;
    let s_low = if total_budget == n * n {
        n
    } else {
        ((fractions.low * b + 1e-9).sqrt().floor() as usize).clamp(1, n)
    };
    let n_low = s_low * s_low;
    let n_mid = ((fractions.mid * b).round() as usize).min(total_budget - n_low);
    let n_high = total_budget - n_low - n_mid;

    let mut s_mid = if s_low == n { n } else { s_low + (n - s_low).div_ceil(2) };
    while s_mid < n && s_mid * s_mid - n_low < n_mid {
        s_mid += 1;
    }
    while s_mid > s_low && n * n - s_mid * s_mid < n_high {
        s_mid -= 1;
    }
    if s_mid * s_mid - n_low < n_mid || n * n - s_mid * s_mid < n_high {
        return Err(Error::InvalidParameter(format!(
            "cannot place {n_mid} mid and {n_high} high samples on a {n}x{n} grid with s_low = {s_low}"
        )));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let region = |lo: usize, hi: usize| -> Vec<usize> {
        (0..n * n)
            .filter(|&i| {
                let r = (i / n).max(i % n);
                r >= lo && r < hi
            })
            .collect()
    };
    let mut selected = region(0, s_low);
    for (lo, hi, count) in [(s_low, s_mid, n_mid), (s_mid, n, n_high)] {
        let cells = region(lo, hi);
        if count > 0 {
            selected.extend(index::sample(&mut rng, cells.len(), count).iter().map(|k| cells[k]));
        }
    }
    selected.sort_unstable();
    let map = WalshSamplingMap {
        window_side: n,
        s_low,
        s_mid,
        counts: (n_low, n_mid, n_high),
        selected,
        seed,
    };
    map.validate()?;
    Ok(map)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reference_counts_per_side() {
        for (side, counts, s_low) in [
            (128, (2025, 689, 562), 45),
            (64, (676, 79, 64), 26),
            (32, (121, 67, 16), 11),
        ] {
            let budget = side * side / 5;
            let map = design_sampling_map(side, budget, LevelFractions::for_side(side), 1).unwrap();
            assert_eq!(map.counts, counts);
            assert_eq!(map.s_low, s_low);
            assert_eq!(map.rows(), budget);
        }
    }

    #[test]
    fn exhaustive_budget_selects_everything() {
        let f = LevelFractions {
            low: 1.0,
            mid: 0.0,
            high: 0.0,
        };
        let map = design_sampling_map(16, 256, f, 3).unwrap();
        assert_eq!(map.s_low, 16);
        assert_eq!(map.selected, (0..256).collect::<Vec<_>>());
        assert_eq!(design_sampling_map(16, 256, LevelFractions::DEFAULT, 3).unwrap(), map);
    }

    #[test]
    fn levels_partition_and_dc_present() {
        let map = design_sampling_map(64, 700, LevelFractions::DEFAULT, 8).unwrap();
        let total: usize = (0..3).map(|l| map.level_indices(l).len()).sum();
        assert_eq!(total, map.rows());
        assert_eq!(map.selected[0], 0);
        assert!(map.s_low < map.s_mid && map.s_mid <= 64);
    }

    #[test]
    fn json_round_trip_and_rejects_tampering() {
        let map = design_sampling_map(32, 204, LevelFractions::for_side(32), 5).unwrap();
        let back = WalshSamplingMap::from_json(&map.to_json().unwrap()).unwrap();
        assert_eq!(back, map);
        let mut bad = map.clone();
        bad.counts.1 += 1;
        assert!(WalshSamplingMap::from_json(&serde_json::to_string(&bad).unwrap()).is_err());
    }

    #[test]
    fn seeds_change_only_random_levels() {
        let a = design_sampling_map(64, 819, LevelFractions::for_side(64), 1).unwrap();
        let b = design_sampling_map(64, 819, LevelFractions::for_side(64), 2).unwrap();
        assert_eq!(a.level_indices(0), b.level_indices(0));
        assert_ne!(a.selected, b.selected);
    }

    #[test]
    fn bad_budgets() {
        assert!(design_sampling_map(32, 0, LevelFractions::DEFAULT, 0).is_err());
        assert!(design_sampling_map(32, 2000, LevelFractions::DEFAULT, 0).is_err());
        assert!(design_sampling_map(48, 100, LevelFractions::DEFAULT, 0).is_err());
    }
}
