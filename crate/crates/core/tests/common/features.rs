//! Brute-force feature counter. Shares nothing with the extractor: each
//! update is judged by scanning the whole history before it, and edit
//! distance is a memoized recursion.

use std::collections::{HashMap, HashSet};
use std::net::Ipv4Addr;

use sicn_core::bgp::{BgpUpdateRecord, Ipv4Prefix, Origin, PrefixAnnouncement, Timestamp};
use sicn_core::features::{
    extract_features, featurize_stream, SessionState, Window, ANNOUNCEMENTS, FEATURE_COUNT, WITHDRAWALS,
};

#[derive(Clone)]
enum Event {
    Announce(Vec<u32>, Origin),
    Withdraw,
}

type Key = (Ipv4Addr, u32, Ipv4Prefix);

fn levenshtein(a: &[u32], b: &[u32]) -> usize {
    fn go(a: &[u32], b: &[u32], i: usize, j: usize, memo: &mut HashMap<(usize, usize), usize>) -> usize {
        if i == a.len() {
            return b.len() - j;
        }
        if j == b.len() {
            return a.len() - i;
        }
        if let Some(&d) = memo.get(&(i, j)) {
            return d;
        }
        let d = if a[i] == b[j] {
            go(a, b, i + 1, j + 1, memo)
        } else {
            1 + go(a, b, i + 1, j, memo)
                .min(go(a, b, i, j + 1, memo))
                .min(go(a, b, i + 1, j + 1, memo))
        };
        memo.insert((i, j), d);
        d
    }
    go(a, b, 0, 0, &mut HashMap::new())
}

/// Feature rows for consecutive windows, history carried from the first.
pub fn oracle_features(windows: &[Window]) -> Vec<[f64; 37]> {
    let mut history: Vec<(Key, Event)> = Vec::new();
    let mut rows = Vec::new();
    for w in windows {
        let mut v = [0.0f64; 37];
        let mut ann_prefixes = HashSet::new();
        let mut wd_prefixes = HashSet::new();
        let (mut lens, mut uniques, mut dists) = (Vec::new(), Vec::new(), Vec::new());
        for r in &w.records {
            for p in &r.withdrawn {
                let key = (r.peer_address, r.peer_as, *p);
                v[1] += 1.0;
                wd_prefixes.insert(*p);
                let last = history.iter().rev().find(|(k, _)| *k == key).map(|(_, e)| e);
                if !matches!(last, Some(Event::Announce(..))) {
                    v[6] += 1.0;
                }
                history.push((key, Event::Withdraw));
            }
            for a in &r.announced {
                let key = (r.peer_address, r.peer_as, a.prefix);
                v[0] += 1.0;
                ann_prefixes.insert(a.prefix);
                let n = a.as_path.len();
                lens.push(n);
                uniques.push(a.as_path.iter().collect::<HashSet<_>>().len());
                v[13 + n.min(10) - 1] += 1.0;
                match a.origin {
                    Origin::Igp => v[33] += 1.0,
                    Origin::Egp => v[34] += 1.0,
                    Origin::Incomplete => v[35] += 1.0,
                }
                let last = history.iter().rev().find(|(k, _)| *k == key).map(|(_, e)| e.clone());
                let last_path = history.iter().rev().find_map(|(k, e)| match e {
                    Event::Announce(p, _) if *k == key => Some(p.clone()),
                    _ => None,
                });
                if let Some(prev) = last_path {
                    let d = levenshtein(&prev, &a.as_path);
                    dists.push(d);
                    if d > 0 {
                        v[23 + d.min(10) - 1] += 1.0;
                    }
                }
                match last {
                    Some(Event::Announce(p, o)) if p == a.as_path && o == a.origin => v[4] += 1.0,
                    Some(Event::Announce(..)) => v[5] += 1.0,
                    _ => v[7] += 1.0,
                }
                history.push((key, Event::Announce(a.as_path.clone(), a.origin)));
            }
        }
        v[2] = ann_prefixes.len() as f64;
        v[3] = wd_prefixes.len() as f64;
        let mean = |xs: &[usize]| {
            if xs.is_empty() {
                0.0
            } else {
                xs.iter().sum::<usize>() as f64 / xs.len() as f64
            }
        };
        v[8] = mean(&lens);
        v[9] = lens.iter().copied().max().unwrap_or(0) as f64;
        v[10] = mean(&uniques);
        v[11] = mean(&dists);
        v[12] = dists.iter().copied().max().unwrap_or(0) as f64;
        let n = w.records.len();
        if n >= 2 {
            let t = |r: &BgpUpdateRecord| r.timestamp.seconds as f64 + r.timestamp.micros as f64 / 1e6;
            v[36] = (t(&w.records[n - 1]) - t(&w.records[0])) / (n - 1) as f64;
        }
        rows.push(v);
    }
    rows
}

/// Indices whose values are counts and must match exactly.
pub fn is_integer_feature(i: usize) -> bool {
    !matches!(i, 8 | 10 | 11 | 36)
}

pub const T0: u32 = 1_000_000_000;
pub const WINDOW: u32 = 60;

fn peer(n: u8) -> (Ipv4Addr, u32) {
    (Ipv4Addr::new(10, 0, 0, n), 65000 + n as u32 * 1000)
}

fn pfx(i: u8) -> Ipv4Prefix {
    Ipv4Prefix::new(Ipv4Addr::new(203, 0, i, 0), 24).unwrap()
}

fn ann(w: u32, at: u32, us: u32, peer_n: u8, prefixes: &[u8], path: &[u32], origin: Origin) -> BgpUpdateRecord {
    let (addr, asn) = peer(peer_n);
    BgpUpdateRecord {
        timestamp: Timestamp::new(T0 + w * WINDOW + at, us).unwrap(),
        peer_address: addr,
        peer_as: asn,
        announced: prefixes
            .iter()
            .map(|&p| PrefixAnnouncement {
                prefix: pfx(p),
                as_path: path.to_vec(),
                origin,
            })
            .collect(),
        withdrawn: Vec::new(),
    }
}

fn wd(w: u32, at: u32, peer_n: u8, prefixes: &[u8]) -> BgpUpdateRecord {
    let (addr, asn) = peer(peer_n);
    BgpUpdateRecord {
        timestamp: Timestamp::from_seconds(T0 + w * WINDOW + at),
        peer_address: addr,
        peer_as: asn,
        announced: Vec::new(),
        withdrawn: prefixes.iter().map(|&p| pfx(p)).collect(),
    }
}

/// Hand-written opening windows followed by a scripted churn stream over a
/// tiny pool, 50 windows in total. Window 0 is the worked example: three
/// announcements with path lengths 2, 3, 4 (IGP, IGP, EGP) and one
/// withdrawal.
pub fn fixture_stream() -> Vec<BgpUpdateRecord> {
    use Origin::*;
    let mut s = vec![
        ann(0, 1, 0, 1, &[1], &[100, 200], Igp),
        ann(0, 2, 0, 1, &[2], &[100, 300, 400], Igp),
        ann(0, 3, 0, 1, &[3], &[100, 300, 400, 500], Egp),
        wd(0, 4, 1, &[4]),
        // duplicate, implicit withdrawal, genuine withdrawal, duplicate withdrawal
        ann(1, 0, 0, 1, &[1], &[100, 200], Igp),
        ann(1, 10, 250_000, 1, &[2], &[100, 300, 400], Egp),
        wd(1, 20, 1, &[3]),
        wd(1, 30, 1, &[3]),
        // re-announce after withdrawal with a different path; same prefix from a second peer
        ann(2, 5, 0, 1, &[3], &[100, 600], Incomplete),
        ann(2, 5, 0, 2, &[3], &[7, 7, 7, 7, 7, 7, 7, 7, 7, 7, 7, 7], Igp),
        // window 3 left empty; window 4 has a single record
        ann(
            4,
            59,
            999_999,
            2,
            &[3, 4],
            &[1, 2, 3, 4, 5, 6, 7, 8, 9, 10, 11, 12, 13],
            Egp,
        ),
        // withdraw then re-announce inside one record
        BgpUpdateRecord {
            timestamp: Timestamp::from_seconds(T0 + 5 * WINDOW),
            peer_address: peer(2).0,
            peer_as: peer(2).1,
            announced: vec![PrefixAnnouncement {
                prefix: pfx(3),
                as_path: vec![9],
                origin: Igp,
            }],
            withdrawn: vec![pfx(3), pfx(9)],
        },
        ann(5, 0, 0, 2, &[4, 4], &[1, 2, 3, 4, 5, 6, 7, 8, 9, 10, 11, 12, 13], Egp),
    ];
    s.extend(super::records::churn_stream(77, 400, T0 + 6 * WINDOW, 44 * WINDOW));
    s
}

pub const FIXTURE_WINDOWS: usize = 50;

/// Extractor output equals the oracle on every feature of every window.
pub fn assert_rows_match(windows: &[Window]) {
    let expected = oracle_features(windows);
    let mut state = SessionState::new();
    for (w, want) in windows.iter().zip(&expected) {
        let got = extract_features(w, &mut state);
        for i in 0..FEATURE_COUNT {
            let (g, e) = (got.values[i], want[i]);
            if is_integer_feature(i) {
                assert_eq!(g, e, "window {} F{}", w.start, i + 1);
            } else {
                assert!((g - e).abs() <= 1e-9, "window {} F{}: {g} vs {e}", w.start, i + 1);
            }
        }
    }
}

/// Window totals of F1 and F2 equal the stream totals.
pub fn assert_conserved(records: Vec<BgpUpdateRecord>, t0: u64) {
    let ann: usize = records.iter().map(|r| r.announced.len()).sum();
    let wd: usize = records.iter().map(|r| r.withdrawn.len()).sum();
    let rows = featurize_stream(records, WINDOW as i64, t0).unwrap();
    assert_eq!(rows.iter().map(|f| f.values[ANNOUNCEMENTS]).sum::<f64>(), ann as f64);
    assert_eq!(rows.iter().map(|f| f.values[WITHDRAWALS]).sum::<f64>(), wd as f64);
}
