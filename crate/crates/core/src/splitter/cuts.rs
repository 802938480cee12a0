// SPDX-License-Identifier: Apache-2.0
//! Cut points and fragments.
//!
//! A cut at `c` closes a fragment after constituent `c`. The required cuts
//! are:
//!
//! * around every impure constituent (it becomes a singleton fragment);
//! * for every element, somewhere between two pure constituents that see
//!   different values, i.e. in `[last position of old value, new - 1]`;
//! * after the last constituent.
//!
//! For a single element these intervals are disjoint and every cut lands on
//! `new - 1`, which is exactly the classic scan that cuts before each change
//! of signature. With several elements the intervals overlap, and placing one
//! cut per interval over-splits; stabbing them greedily by right endpoint
//! gives the fewest fragments while still cutting right before a change
//! whenever a cut is needed.

use std::collections::BTreeSet;
use std::ops::RangeInclusive;

use serde::{Deserialize, Serialize};

use crate::trace::{Signature, SignatureMatrix};

/// Ascending indices of the last constituent of each fragment.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CutSet {
    pub test: String,
    pub cuts: BTreeSet<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FragmentPurity {
    Pure,
    Impure,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Fragment {
    pub origin: String,
    /// 1-based position among the fragments of `origin`.
    pub order: u32,
    /// Inclusive constituent range, 1-based.
    pub range: RangeInclusive<usize>,
    pub purity: FragmentPurity,
}

impl Fragment {
    pub fn len(&self) -> usize {
        self.range.end() + 1 - self.range.start()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn contains(&self, constituent: usize) -> bool {
        self.range.contains(&constituent)
    }
}

pub fn compute_cuts(test: &str, matrix: &SignatureMatrix) -> CutSet {
    let n = matrix.constituents;
    let mut cuts = BTreeSet::new();
    if n == 0 {
        return CutSet {
            test: test.to_string(),
            cuts,
        };
    }

    let impure: Vec<bool> = (1..=n).map(|c| matrix.is_impure_constituent(c)).collect();
    for c in (1..=n).filter(|c| impure[c - 1]) {
        if c > 1 {
            cuts.insert(c - 1);
        }
        cuts.insert(c);
    }

    // (left, right): some cut must fall in left..=right
    let mut intervals: Vec<(usize, usize)> = Vec::new();
    for (_, row) in &matrix.rows {
        let mut current = None;
        for c in 1..=n {
            if impure[c - 1] {
                current = None;
                continue;
            }
            if let Signature::Pure(v) = row[c - 1] {
                match current {
                    Some((value, last)) if value != v => {
                        intervals.push((last, c - 1));
                        current = Some((v, c));
                    }
                    _ => current = Some((v, c)),
                }
            }
        }
    }
    intervals.sort_by_key(|&(l, r)| (r, l));
    for (l, r) in intervals {
        if cuts.range(l..=r).next().is_none() {
            cuts.insert(r);
        }
    }
    cuts.insert(n);
    CutSet {
        test: test.to_string(),
        cuts,
    }
}

pub fn build_fragments(origin: &str, matrix: &SignatureMatrix, cuts: &CutSet) -> Vec<Fragment> {
    let mut start = 1;
    let mut out = Vec::with_capacity(cuts.cuts.len());
    for (i, &end) in cuts.cuts.iter().enumerate() {
        let impure = (start..=end).any(|c| matrix.is_impure_constituent(c));
        out.push(Fragment {
            origin: origin.to_string(),
            order: i as u32 + 1,
            range: start..=end,
            purity: if impure {
                FragmentPurity::Impure
            } else {
                FragmentPurity::Pure
            },
        });
        start = end + 1;
    }
    out
}
