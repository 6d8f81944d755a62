//! Inter-beat interval series and interval correction.

use crate::biometrics::is_valid_ibi;
use crate::biometrics::{MAX_IBI_S, MIN_IBI_S};
use crate::peaks::PeakList;

/// Neighbours on each side consulted for the local median.
const MEDIAN_RADIUS: usize = 5;
/// Tolerance when matching an over-long interval to twice the local median.
const SPLIT_TOLERANCE: f64 = 0.2;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IbiEntry {
    /// Time of the peak closing the interval, seconds.
    pub t_end: f64,
    /// Interval length, seconds.
    pub ibi: f64,
    pub valid: bool,
}

impl IbiEntry {
    pub fn new(t_end: f64, ibi: f64) -> Self {
        Self {
            t_end,
            ibi,
            valid: is_valid_ibi(ibi),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct IbiSeries {
    pub entries: Vec<IbiEntry>,
}

impl IbiSeries {
    /// Intervals between consecutive peak times.
    pub fn from_peak_times(times: &[f64]) -> Self {
        Self {
            entries: times
                .windows(2)
                .map(|w| IbiEntry::new(w[1], w[1] - w[0]))
                .collect(),
        }
    }

    /// Series whose first interval starts at `start` and whose peaks follow
    /// the cumulative sum of `ibis`.
    pub fn from_intervals(start: f64, ibis: &[f64]) -> Self {
        let mut t = start;
        Self {
            entries: ibis
                .iter()
                .map(|&ibi| {
                    t += ibi;
                    IbiEntry::new(t, ibi)
                })
                .collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn valid_ibis(&self) -> Vec<f64> {
        self.entries
            .iter()
            .filter(|e| e.valid)
            .map(|e| e.ibi)
            .collect()
    }

    pub fn intervals(&self) -> Vec<f64> {
        self.entries.iter().map(|e| e.ibi).collect()
    }

    /// Entries with `t_end` in `[t_start, t_end]`.
    pub fn slice_time(&self, t_start: f64, t_end: f64) -> IbiSeries {
        IbiSeries {
            entries: self
                .entries
                .iter()
                .filter(|e| e.t_end >= t_start && e.t_end <= t_end)
                .copied()
                .collect(),
        }
    }
}

pub fn peaks_to_ibis(peaks: &PeakList) -> IbiSeries {
    IbiSeries::from_peak_times(&peaks.times)
}

/// Repair intervals broken by spurious or missed peaks, then flag anything
/// still outside the valid band.
///
/// * An interval shorter than the band is merged with a neighbour when the
///   sum is in band. With two candidates the one nearer the local median
///   wins, the successor on ties.
/// * An interval longer than the band that is within 20% of twice the
///   local median is split in half.
///
/// Rules are applied until none fires, so the result is a fixed point.
pub fn correct_ibis(series: &IbiSeries) -> IbiSeries {
    let mut e: Vec<IbiEntry> = series.entries.clone();
    while try_merge(&mut e) || try_split(&mut e) {}
    for entry in &mut e {
        entry.valid = is_valid_ibi(entry.ibi);
    }
    IbiSeries { entries: e }
}

fn local_median(e: &[IbiEntry], i: usize) -> Option<f64> {
    let lo = i.saturating_sub(MEDIAN_RADIUS);
    let hi = (i + MEDIAN_RADIUS).min(e.len() - 1);
    let mut v: Vec<f64> = (lo..=hi)
        .filter(|&j| j != i && is_valid_ibi(e[j].ibi))
        .map(|j| e[j].ibi)
        .collect();
    if v.is_empty() {
        return None;
    }
    v.sort_by(f64::total_cmp);
    let m = v.len() / 2;
    Some(if v.len() % 2 == 1 {
        v[m]
    } else {
        0.5 * (v[m - 1] + v[m])
    })
}

fn try_merge(e: &mut Vec<IbiEntry>) -> bool {
    for i in 0..e.len() {
        if e[i].ibi >= MIN_IBI_S {
            continue;
        }
        let succ = (i + 1 < e.len())
            .then(|| e[i].ibi + e[i + 1].ibi)
            .filter(|&s| is_valid_ibi(s));
        let pred = (i > 0)
            .then(|| e[i - 1].ibi + e[i].ibi)
            .filter(|&s| is_valid_ibi(s));
        let merge_with_succ = match (succ, pred) {
            (Some(_), None) => true,
            (None, Some(_)) => false,
            (Some(s), Some(p)) => match local_median(e, i) {
                Some(m) => (s - m).abs() <= (p - m).abs(),
                None => true,
            },
            (None, None) => continue,
        };
        let (first, second) = if merge_with_succ { (i, i + 1) } else { (i - 1, i) };
        e[first] = IbiEntry::new(e[second].t_end, e[first].ibi + e[second].ibi);
        e.remove(second);
        return true;
    }
    false
}

fn try_split(e: &mut Vec<IbiEntry>) -> bool {
    for i in 0..e.len() {
        if e[i].ibi <= MAX_IBI_S {
            continue;
        }
        let Some(m) = local_median(e, i) else { continue };
        if (e[i].ibi / (2.0 * m) - 1.0).abs() > SPLIT_TOLERANCE {
            continue;
        }
        let half = e[i].ibi / 2.0;
        let t_end = e[i].t_end;
        e[i] = IbiEntry::new(t_end, half);
        e.insert(i, IbiEntry::new(t_end - half, half));
        return true;
    }
    false
}
