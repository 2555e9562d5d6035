//! Windowing of update streams and the 37-value feature catalog.
//!
//! | index | feature |
//! |-------|---------|
//! | F1 | announcements |
//! | F2 | withdrawals |
//! | F3 | distinct announced prefixes |
//! | F4 | distinct withdrawn prefixes |
//! | F5 | duplicate announcements (same path and origin as the live route) |
//! | F6 | implicit withdrawals (live route re-announced with new attributes) |
//! | F7 | duplicate withdrawals (prefix already unreachable) |
//! | F8 | new routes (first announcement, or first after a withdrawal) |
//! | F9, F10 | mean and max AS-path length |
//! | F11 | mean distinct ASes per path |
//! | F12, F13 | mean and max edit distance to the previous path of the same (peer, prefix) |
//! | F14-F23 | announcements with path length 1..=10 (longer paths fold into F23) |
//! | F24-F33 | edit distances 1..=10 (larger ones fold into F33) |
//! | F34-F36 | announcements with origin IGP, EGP, INCOMPLETE |
//! | F37 | mean inter-arrival time between records in the window |
//!
//! Statistics over an empty set are 0.

mod dataset;
mod label;

use std::collections::{HashMap, HashSet};
use std::net::Ipv4Addr;

use thiserror::Error;

use crate::bgp::{BgpUpdateRecord, Ipv4Prefix, Origin};

pub use dataset::{
    read_dataset, read_dataset_file, to_file_precision, write_dataset, write_dataset_file, DatasetError,
};
pub use label::{
    label_windows, read_ground_truth, read_ground_truth_file, write_ground_truth, GroundTruthInterval, LabelError,
};

pub const FEATURE_COUNT: usize = 37;
pub const DEFAULT_WINDOW_SECONDS: i64 = 60;

pub const ANNOUNCEMENTS: usize = 0;
pub const WITHDRAWALS: usize = 1;
pub const DISTINCT_ANNOUNCED: usize = 2;
pub const DISTINCT_WITHDRAWN: usize = 3;
pub const DUPLICATE_ANNOUNCEMENTS: usize = 4;
pub const IMPLICIT_WITHDRAWALS: usize = 5;
pub const DUPLICATE_WITHDRAWALS: usize = 6;
pub const NEW_ROUTES: usize = 7;
pub const MEAN_PATH_LEN: usize = 8;
pub const MAX_PATH_LEN: usize = 9;
pub const MEAN_UNIQUE_ASES: usize = 10;
pub const MEAN_EDIT_DISTANCE: usize = 11;
pub const MAX_EDIT_DISTANCE: usize = 12;
pub const PATH_LEN_HIST: usize = 13;
pub const EDIT_DIST_HIST: usize = 23;
pub const ORIGIN_IGP: usize = 33;
pub const ORIGIN_EGP: usize = 34;
pub const ORIGIN_INCOMPLETE: usize = 35;
pub const MEAN_INTERARRIVAL: usize = 36;

/// Width of the path-length and edit-distance histograms.
pub const HIST_BINS: usize = 10;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum WindowError {
    #[error("window length must be positive, got {0}")]
    NonPositiveWindow(i64),
}

/// One window of the feature time series.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureVector {
    pub window_start: u64,
    pub values: [f64; FEATURE_COUNT],
    pub label: Option<u32>,
}

impl FeatureVector {
    pub fn zeros(window_start: u64) -> Self {
        Self {
            window_start,
            values: [0.0; FEATURE_COUNT],
            label: None,
        }
    }

    pub fn with_label(mut self, label: u32) -> Self {
        self.label = Some(label);
        self
    }
}

/// Records whose timestamps fall in `[start, start + duration)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Window {
    pub start: u64,
    pub duration: u64,
    pub records: Vec<BgpUpdateRecord>,
}

/// Splits a stream into dense, contiguous windows starting at `t0`.
///
/// Out-of-order input is stably sorted first. Records stamped before `t0`
/// are dropped.
pub fn bin_stream(mut records: Vec<BgpUpdateRecord>, window_seconds: i64, t0: u64) -> Result<Vec<Window>, WindowError> {
    if window_seconds <= 0 {
        return Err(WindowError::NonPositiveWindow(window_seconds));
    }
    let duration = window_seconds as u64;
    if !records.windows(2).all(|w| w[0].timestamp <= w[1].timestamp) {
        records.sort_by_key(|r| r.timestamp);
    }
    let before = records.partition_point(|r| (r.timestamp.seconds as u64) < t0);
    if before > 0 {
        log::warn!("dropping {before} records stamped before t0={t0}");
    }
    let Some(last) = records.last() else {
        return Ok(Vec::new());
    };
    if (last.timestamp.seconds as u64) < t0 {
        return Ok(Vec::new());
    }
    let count = (last.timestamp.seconds as u64 - t0) / duration + 1;
    let mut windows: Vec<Window> = (0..count)
        .map(|i| Window {
            start: t0 + i * duration,
            duration,
            records: Vec::new(),
        })
        .collect();
    for record in records.into_iter().skip(before) {
        let idx = (record.timestamp.seconds as u64 - t0) / duration;
        windows[idx as usize].records.push(record);
    }
    Ok(windows)
}

#[derive(Debug, Clone)]
struct RouteState {
    as_path: Vec<u32>,
    origin: Origin,
    reachable: bool,
}

/// Per (peer, prefix) routing state carried across windows.
#[derive(Debug, Clone, Default)]
pub struct SessionState {
    routes: HashMap<(Ipv4Addr, u32, Ipv4Prefix), RouteState>,
}

impl SessionState {
    pub fn new() -> Self {
        Self::default()
    }

    /// Whether the (peer, prefix) route is currently announced.
    pub fn is_reachable(&self, peer_address: Ipv4Addr, peer_as: u32, prefix: Ipv4Prefix) -> bool {
        self.routes
            .get(&(peer_address, peer_as, prefix))
            .is_some_and(|r| r.reachable)
    }

    pub fn len(&self) -> usize {
        self.routes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.routes.is_empty()
    }
}

/// Levenshtein distance over AS sequences.
pub fn edit_distance(a: &[u32], b: &[u32]) -> usize {
    let mut prev: Vec<usize> = (0..=b.len()).collect();
    let mut cur = vec![0; b.len() + 1];
    for (i, x) in a.iter().enumerate() {
        cur[0] = i + 1;
        for (j, y) in b.iter().enumerate() {
            let sub = prev[j] + usize::from(x != y);
            cur[j + 1] = sub.min(prev[j + 1] + 1).min(cur[j] + 1);
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    prev[b.len()]
}

fn hist_bin(value: usize) -> usize {
    value.clamp(1, HIST_BINS) - 1
}

/// Reduces a window to its feature vector and advances `state` past it.
pub fn extract_features(window: &Window, state: &mut SessionState) -> FeatureVector {
    let mut fv = FeatureVector::zeros(window.start);
    let v = &mut fv.values;
    let mut announced = HashSet::new();
    let mut withdrawn = HashSet::new();
    let mut path_len_sum = 0usize;
    let mut unique_sum = 0usize;
    let mut edit_sum = 0usize;
    let mut edit_pairs = 0usize;
    let mut max_path = 0usize;
    let mut max_edit = 0usize;

    for record in &window.records {
        let peer = (record.peer_address, record.peer_as);
        for prefix in &record.withdrawn {
            v[WITHDRAWALS] += 1.0;
            withdrawn.insert(*prefix);
            match state.routes.get_mut(&(peer.0, peer.1, *prefix)) {
                Some(route) if route.reachable => route.reachable = false,
                _ => v[DUPLICATE_WITHDRAWALS] += 1.0,
            }
        }
        for ann in &record.announced {
            v[ANNOUNCEMENTS] += 1.0;
            announced.insert(ann.prefix);
            let len = ann.as_path.len();
            path_len_sum += len;
            max_path = max_path.max(len);
            v[PATH_LEN_HIST + hist_bin(len)] += 1.0;
            let unique: HashSet<u32> = ann.as_path.iter().copied().collect();
            unique_sum += unique.len();
            v[match ann.origin {
                Origin::Igp => ORIGIN_IGP,
                Origin::Egp => ORIGIN_EGP,
                Origin::Incomplete => ORIGIN_INCOMPLETE,
            }] += 1.0;

            let key = (peer.0, peer.1, ann.prefix);
            match state.routes.get_mut(&key) {
                Some(route) => {
                    let dist = edit_distance(&route.as_path, &ann.as_path);
                    edit_sum += dist;
                    edit_pairs += 1;
                    max_edit = max_edit.max(dist);
                    if dist > 0 {
                        v[EDIT_DIST_HIST + hist_bin(dist)] += 1.0;
                    }
                    if !route.reachable {
                        v[NEW_ROUTES] += 1.0;
                    } else if route.as_path == ann.as_path && route.origin == ann.origin {
                        v[DUPLICATE_ANNOUNCEMENTS] += 1.0;
                    } else {
                        v[IMPLICIT_WITHDRAWALS] += 1.0;
                    }
                    route.as_path.clone_from(&ann.as_path);
                    route.origin = ann.origin;
                    route.reachable = true;
                }
                None => {
                    v[NEW_ROUTES] += 1.0;
                    state.routes.insert(
                        key,
                        RouteState {
                            as_path: ann.as_path.clone(),
                            origin: ann.origin,
                            reachable: true,
                        },
                    );
                }
            }
        }
    }

    let announcements = v[ANNOUNCEMENTS];
    v[DISTINCT_ANNOUNCED] = announced.len() as f64;
    v[DISTINCT_WITHDRAWN] = withdrawn.len() as f64;
    if announcements > 0.0 {
        v[MEAN_PATH_LEN] = path_len_sum as f64 / announcements;
        v[MEAN_UNIQUE_ASES] = unique_sum as f64 / announcements;
    }
    v[MAX_PATH_LEN] = max_path as f64;
    if edit_pairs > 0 {
        v[MEAN_EDIT_DISTANCE] = edit_sum as f64 / edit_pairs as f64;
    }
    v[MAX_EDIT_DISTANCE] = max_edit as f64;
    if window.records.len() >= 2 {
        let first = window.records[0].timestamp.as_f64();
        let last = window.records[window.records.len() - 1].timestamp.as_f64();
        v[MEAN_INTERARRIVAL] = (last - first) / (window.records.len() - 1) as f64;
    }
    fv
}

/// Bins a stream and extracts every window with one threaded session state.
pub fn featurize_stream(
    records: Vec<BgpUpdateRecord>,
    window_seconds: i64,
    t0: u64,
) -> Result<Vec<FeatureVector>, WindowError> {
    let windows = bin_stream(records, window_seconds, t0)?;
    let mut state = SessionState::new();
    Ok(windows.iter().map(|w| extract_features(w, &mut state)).collect())
}
