//! Finite integer sets stored as sorted, disjoint, non-adjacent intervals.

use std::fmt;

#[derive(Debug, Clone, PartialEq, Eq, Hash, Default)]
pub struct Domain {
    ivs: Vec<(i64, i64)>,
}

impl Domain {
    pub fn empty() -> Self {
        Domain { ivs: Vec::new() }
    }

    pub fn singleton(v: i64) -> Self {
        Domain { ivs: vec![(v, v)] }
    }

    /// `lo..hi` inclusive; empty when `lo > hi`.
    pub fn range(lo: i64, hi: i64) -> Self {
        if lo > hi {
            Domain::empty()
        } else {
            Domain { ivs: vec![(lo, hi)] }
        }
    }

    pub fn from_values(values: impl IntoIterator<Item = i64>) -> Self {
        let mut vs: Vec<i64> = values.into_iter().collect();
        vs.sort_unstable();
        vs.dedup();
        let mut ivs: Vec<(i64, i64)> = Vec::new();
        for v in vs {
            match ivs.last_mut() {
                Some(last) if last.1.checked_add(1) == Some(v) => last.1 = v,
                _ => ivs.push((v, v)),
            }
        }
        Domain { ivs }
    }

    /// Builds from arbitrary intervals, normalizing order and overlap.
    pub fn from_intervals(intervals: impl IntoIterator<Item = (i64, i64)>) -> Self {
        let mut raw: Vec<(i64, i64)> = intervals.into_iter().filter(|(l, h)| l <= h).collect();
        raw.sort_unstable();
        let mut ivs: Vec<(i64, i64)> = Vec::with_capacity(raw.len());
        for (lo, hi) in raw {
            match ivs.last_mut() {
                Some(last) if lo <= last.1.saturating_add(1) => last.1 = last.1.max(hi),
                _ => ivs.push((lo, hi)),
            }
        }
        Domain { ivs }
    }

    pub fn intervals(&self) -> &[(i64, i64)] {
        &self.ivs
    }

    pub fn is_empty(&self) -> bool {
        self.ivs.is_empty()
    }

    /// Number of values, saturating at `u64::MAX`.
    pub fn size(&self) -> u64 {
        self.ivs
            .iter()
            .fold(0u64, |acc, &(l, h)| acc.saturating_add(((h as i128 - l as i128) as u64).saturating_add(1)))
    }

    pub fn min(&self) -> Option<i64> {
        self.ivs.first().map(|iv| iv.0)
    }

    pub fn max(&self) -> Option<i64> {
        self.ivs.last().map(|iv| iv.1)
    }

    pub fn value(&self) -> Option<i64> {
        match self.ivs.as_slice() {
            [(l, h)] if l == h => Some(*l),
            _ => None,
        }
    }

    pub fn is_singleton(&self) -> bool {
        self.value().is_some()
    }

    pub fn contains(&self, v: i64) -> bool {
        let i = self.ivs.partition_point(|iv| iv.1 < v);
        i < self.ivs.len() && self.ivs[i].0 <= v
    }

    pub fn iter(&self) -> impl Iterator<Item = i64> + '_ {
        self.ivs.iter().flat_map(|&(l, h)| l..=h)
    }

    pub fn intersect(&self, other: &Domain) -> Domain {
        let (a, b) = (&self.ivs, &other.ivs);
        let (mut i, mut j) = (0, 0);
        let mut out = Vec::new();
        while i < a.len() && j < b.len() {
            let lo = a[i].0.max(b[j].0);
            let hi = a[i].1.min(b[j].1);
            if lo <= hi {
                out.push((lo, hi));
            }
            if a[i].1 < b[j].1 {
                i += 1;
            } else {
                j += 1;
            }
        }
        Domain { ivs: out }
    }

    pub fn union(&self, other: &Domain) -> Domain {
        Domain::from_intervals(self.ivs.iter().chain(other.ivs.iter()).copied())
    }

    pub fn clamp(&self, lo: i64, hi: i64) -> Domain {
        self.intersect(&Domain::range(lo, hi))
    }

    pub fn remove(&self, v: i64) -> Domain {
        if !self.contains(v) {
            return self.clone();
        }
        let mut out = Vec::with_capacity(self.ivs.len() + 1);
        for &(l, h) in &self.ivs {
            if v < l || v > h {
                out.push((l, h));
                continue;
            }
            if l < v {
                out.push((l, v - 1));
            }
            if v < h {
                out.push((v + 1, h));
            }
        }
        Domain { ivs: out }
    }

    pub fn is_subset_of(&self, other: &Domain) -> bool {
        self.intersect(other) == *self
    }
}

impl fmt::Display for Domain {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if let Some(v) = self.value() {
            return write!(f, "{v}");
        }
        if let [(l, h)] = self.ivs.as_slice() {
            return write!(f, "{l}..{h}");
        }
        let parts: Vec<String> = self
            .ivs
            .iter()
            .map(|&(l, h)| if l == h { l.to_string() } else { format!("{l}..{h}") })
            .collect();
        write!(f, "{{{}}}", parts.join(", "))
    }
}
