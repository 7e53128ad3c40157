//! Plug-in observation probabilities from the empirical distribution of gaps.
//!
//! When neither the observation probability nor its prior is known, but the
//! gaps between observations are i.i.d., the conditional probability of
//! observing exactly `d` rounds after the previous observation is the hazard
//!
//! ```text
//! p(d) = Pr(gap = d) / Pr(gap ≥ d) = 1 − (1 − F(d)) / (1 − F(d − 1)).
//! ```
//!
//! [`GapHistogram`] replaces `F` with the empirical CDF of the gaps seen so
//! far. It keeps counts per distinct gap and, while waiting, the tail count
//! `Z = #{recorded gaps ≥ elapsed}`, which only ever shrinks until the next
//! observation. Each round therefore costs amortized `O(1)` and each
//! observation `O(log u)` for `u` distinct gaps.
//!
//! The gap being recorded is counted before the estimate is formed, so the
//! estimate is always in `[1/k, 1]` after `k` observations.

use std::collections::BTreeMap;
use std::io::Write;
use std::ops::Bound;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Default, PartialEq)]
pub struct GapHistogram {
    counts: BTreeMap<u64, u64>,
    total: u64,
    elapsed: u64,
    tail: u64,
    cursor: Option<u64>,
    exclude_current: bool,
}

impl GapHistogram {
    pub fn new() -> Self {
        Self::default()
    }

    /// Forms estimates from the history before the current gap is added.
    ///
    /// When no earlier gap equals the current one that estimate is zero; the
    /// inclusive estimate is returned instead in that case.
    pub fn excluding_current() -> Self {
        Self {
            exclude_current: true,
            ..Self::default()
        }
    }

    /// Number of observations recorded.
    pub fn total(&self) -> u64 {
        self.total
    }

    /// Rounds elapsed since the last observation.
    pub fn elapsed(&self) -> u64 {
        self.elapsed
    }

    /// Recorded gaps at least as long as the elapsed gap.
    pub fn tail(&self) -> u64 {
        self.tail
    }

    /// `(gap, count)` pairs in ascending gap order.
    pub fn entries(&self) -> impl Iterator<Item = (u64, u64)> + '_ {
        self.counts.iter().map(|(&g, &c)| (g, c))
    }

    pub fn count(&self, gap: u64) -> u64 {
        self.counts.get(&gap).copied().unwrap_or(0)
    }

    /// Moves the elapsed gap forward by one round.
    pub fn advance_round(&mut self) {
        self.elapsed += 1;
        while let Some(key) = self.cursor {
            if self.elapsed <= key {
                break;
            }
            self.tail -= self.counts[&key];
            self.cursor = self.next_key_after(key);
        }
    }

    /// Records an observation after `gap` rounds and returns the estimated
    /// probability of having observed at this gap.
    pub fn record_observation_and_estimate(&mut self, gap: u64) -> Result<f64> {
        if gap == 0 {
            return Err(Error::InvalidGap);
        }
        if gap != self.elapsed {
            self.seek(gap);
        }
        let before = (self.count(gap), self.tail);

        *self.counts.entry(gap).or_insert(0) += 1;
        self.total += 1;
        self.tail += 1;
        let inclusive = self.counts[&gap] as f64 / self.tail as f64;

        let estimate = match before {
            (hits, tail) if self.exclude_current && hits > 0 => hits as f64 / tail as f64,
            _ => inclusive,
        };

        self.elapsed = 0;
        self.tail = self.total;
        self.cursor = self.counts.keys().next().copied();
        Ok(estimate)
    }

    /// Fraction of recorded gaps that are at most `d`.
    pub fn empirical_cdf(&self, d: u64) -> f64 {
        if self.total == 0 {
            return 0.0;
        }
        let below: u64 = self.counts.range(..=d).map(|(_, c)| c).sum();
        below as f64 / self.total as f64
    }

    /// Writes the histogram as `gap,count` CSV rows with a header.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["gap", "count"]).map_err(csv_io)?;
        for (gap, count) in self.entries() {
            w.write_record([gap.to_string(), count.to_string()])
                .map_err(csv_io)?;
        }
        w.flush()?;
        Ok(())
    }

    fn next_key_after(&self, key: u64) -> Option<u64> {
        self.counts
            .range((Bound::Excluded(key), Bound::Unbounded))
            .next()
            .map(|(&k, _)| k)
    }

    fn seek(&mut self, elapsed: u64) {
        self.elapsed = elapsed;
        self.tail = self.counts.range(elapsed..).map(|(_, c)| c).sum();
        self.cursor = self.counts.range(elapsed..).next().map(|(&k, _)| k);
    }
}

fn csv_io(e: csv::Error) -> Error {
    Error::Io(std::io::Error::other(e))
}
