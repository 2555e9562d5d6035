//! Discrete-event generation of BGP update streams.
//!
//! Every monitored peer keeps, per prefix, the path it last announced. The
//! topology gives each pair a *stable* path (shortest route under the links
//! currently up). Baseline churn re-announces stable paths and flaps single
//! prefixes; outages change stable paths and drive a withdrawal storm for the
//! affected pairs until the link returns; worms add announcements, many of
//! them with randomized paths. Scheduled actions read the state when they
//! fire, so overlapping events compose.

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::net::Ipv4Addr;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::scenario::{worm_defaults, Scenario, ScenarioEvent, DEFAULT_FADE_ONSET, DEFAULT_OUTAGE_MULTIPLIER};
use super::topology::{Medium, Topology};
use super::SimError;
use crate::bgp::{BgpUpdateRecord, Ipv4Prefix, Origin, PrefixAnnouncement, Timestamp};
use crate::classes::{FaultClass, IncidentClass, WindowClass};
use crate::features::GroundTruthInterval;
use crate::seed::derive_seed;

const MICROS: f64 = 1e6;
/// Baseline and worm flaps re-announce after this many seconds.
const FLAP_DELAY: (f64, f64) = (1.0, 30.0);

#[derive(Debug, Clone, Copy)]
enum Action {
    Announce { peer: usize },
    Flap { peer: usize },
    Refresh { peer: usize, prefix: usize },
    OutageStart { event: usize },
    OutageEnd { event: usize },
    Storm { peer: usize, prefix: usize, event: usize },
    WormStart { event: usize },
    WormEnd { event: usize },
    WormAnnounce { peer: usize, event: usize },
    WormWithdraw { peer: usize, event: usize },
}

struct Scheduled {
    at: u64,
    seq: u64,
    action: Action,
}

impl PartialEq for Scheduled {
    fn eq(&self, other: &Self) -> bool {
        (self.at, self.seq) == (other.at, other.seq)
    }
}

impl Eq for Scheduled {}

impl PartialOrd for Scheduled {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Scheduled {
    // Reversed: the heap pops the earliest action, then the earliest scheduled.
    fn cmp(&self, other: &Self) -> Ordering {
        (other.at, other.seq).cmp(&(self.at, self.seq))
    }
}

/// A validated event with everything resolved to positions and rates.
enum Resolved {
    Outage {
        link: usize,
        start: u64,
        end: u64,
        storm_rate: f64,
        onset: f64,
    },
    Worm {
        peers: Vec<usize>,
        start: u64,
        end: u64,
        announce_rate: f64,
        churn: f64,
        withdraw_rate: f64,
    },
}

struct Peer {
    router: usize,
    address: Ipv4Addr,
    asn: u32,
}

struct Sim<'a> {
    topology: &'a Topology,
    peers: Vec<Peer>,
    prefixes: Vec<(Ipv4Prefix, usize)>,
    link_down: Vec<u32>,
    stable: Vec<Vec<Option<Vec<u32>>>>,
    current: Vec<Vec<Option<Vec<u32>>>>,
    events: Vec<Resolved>,
    heap: BinaryHeap<Scheduled>,
    seq: u64,
    rng: ChaCha8Rng,
    horizon: u64,
    delay: f64,
    announce_rate: f64,
    withdraw_rate: f64,
    records: Vec<BgpUpdateRecord>,
}

fn to_micros(seconds: u64) -> u64 {
    seconds * 1_000_000
}

fn invalid(index: usize, reason: impl Into<String>) -> SimError {
    SimError::Event {
        index: index + 1,
        reason: reason.into(),
    }
}

fn check_multiplier(index: usize, name: &str, value: Option<f64>, default: f64) -> Result<f64, SimError> {
    let v = value.unwrap_or(default);
    if !v.is_finite() || v < 0.0 {
        return Err(invalid(
            index,
            format!("{name} must be a finite non-negative number, got {v}"),
        ));
    }
    Ok(v)
}

fn resolve_events(
    topology: &Topology,
    scenario: &Scenario,
) -> Result<(Vec<Resolved>, Vec<GroundTruthInterval>), SimError> {
    let g = &scenario.gen;
    let mut resolved = Vec::new();
    let mut truth = Vec::new();
    for (i, ev) in scenario.events.iter().enumerate() {
        let (start, end) = ev.span();
        if start >= end {
            return Err(invalid(i, format!("start {start} is not before end {end}")));
        }
        if start < scenario.start || end > scenario.end() {
            return Err(invalid(i, "event lies outside the simulated horizon"));
        }
        match ev {
            ScenarioEvent::LinkOutage { link, multiplier, .. }
            | ScenarioEvent::WeatherFade { link, multiplier, .. } => {
                let pos = topology
                    .link_position(link)
                    .ok_or_else(|| invalid(i, format!("unknown link `{link}`")))?;
                let l = &topology.links()[pos];
                let onset = match ev {
                    ScenarioEvent::WeatherFade { onset, .. } => {
                        if l.medium != Medium::SatelliteRf {
                            return Err(invalid(i, format!("weather fade on `{link}`, a {} link", l.medium)));
                        }
                        check_multiplier(i, "onset", *onset, DEFAULT_FADE_ONSET)?
                    }
                    _ => g.propagation_delay,
                };
                let m = check_multiplier(i, "multiplier", *multiplier, DEFAULT_OUTAGE_MULTIPLIER)?;
                resolved.push(Resolved::Outage {
                    link: pos,
                    start,
                    end,
                    storm_rate: g.withdraw_rate * m,
                    onset,
                });
                if let Some(f) = FaultClass::ALL
                    .into_iter()
                    .find(|f| l.connects(f.link_endpoints().0, f.link_endpoints().1))
                {
                    truth.push(GroundTruthInterval {
                        class: WindowClass::Outage(f),
                        start,
                        end,
                    });
                }
            }
            ScenarioEvent::Worm {
                class,
                peers,
                multiplier,
                churn,
                withdraw_multiplier,
                ..
            } => {
                let class = class.ok_or(SimError::WormWithoutClass { index: i + 1 })?;
                let incident = IncidentClass::from_label(class)
                    .ok_or_else(|| invalid(i, format!("worm class {class} is not an incident class (1-3)")))?;
                let (dm, dc, dw) = worm_defaults(incident);
                let m = check_multiplier(i, "multiplier", *multiplier, dm)?;
                let c = check_multiplier(i, "churn", *churn, dc)?;
                if c > 1.0 {
                    return Err(invalid(i, format!("churn must lie in [0, 1], got {c}")));
                }
                let w = check_multiplier(i, "withdraw_multiplier", *withdraw_multiplier, dw)?;
                let all = topology.peers();
                let targets = if peers.is_empty() {
                    (0..all.len()).collect()
                } else {
                    peers
                        .iter()
                        .map(|p| {
                            all.iter()
                                .position(|q| q == p)
                                .ok_or_else(|| invalid(i, format!("`{p}` is not a monitored peer")))
                        })
                        .collect::<Result<Vec<_>, _>>()?
                };
                resolved.push(Resolved::Worm {
                    peers: targets,
                    start,
                    end,
                    announce_rate: g.announce_rate * (m - 1.0).max(0.0),
                    churn: c,
                    withdraw_rate: g.withdraw_rate * (w - 1.0).max(0.0),
                });
                truth.push(GroundTruthInterval {
                    class: WindowClass::Intrusion(incident),
                    start,
                    end,
                });
            }
        }
    }
    Ok((resolved, truth))
}

impl Sim<'_> {
    fn schedule(&mut self, at: u64, action: Action) {
        self.seq += 1;
        self.heap.push(Scheduled {
            at,
            seq: self.seq,
            action,
        });
    }

    fn gap(&mut self, rate: f64) -> u64 {
        let u: f64 = self.rng.gen();
        ((-(1.0 - u).ln() / rate) * MICROS).round().max(1.0) as u64
    }

    fn uniform(&mut self, lo: f64, hi: f64) -> u64 {
        if hi <= lo {
            return (lo * MICROS) as u64;
        }
        (self.rng.gen_range(lo..hi) * MICROS).round() as u64
    }

    /// Schedules the next arrival of a Poisson process if it falls before `until`.
    fn next_arrival(&mut self, now: u64, rate: f64, until: u64, action: Action) {
        if rate <= 0.0 {
            return;
        }
        let at = now + self.gap(rate);
        if at < until {
            self.schedule(at, action);
        }
    }

    fn recompute_stable(&mut self) -> Vec<(usize, usize)> {
        let up: Vec<bool> = self.link_down.iter().map(|&d| d == 0).collect();
        let n_networks = self.topology.networks().len();
        let mut changed = Vec::new();
        for p in 0..self.peers.len() {
            let by_network: Vec<Option<Vec<u32>>> = (0..n_networks)
                .map(|n| self.topology.as_path(self.peers[p].router, n, &up))
                .collect();
            for (x, &(_, n)) in self.prefixes.iter().enumerate() {
                if self.stable[p][x] != by_network[n] {
                    self.stable[p][x] = by_network[n].clone();
                    changed.push((p, x));
                }
            }
        }
        changed
    }

    fn emit_announce(&mut self, at: u64, peer: usize, prefix: usize, path: Vec<u32>) {
        let p = &self.peers[peer];
        let ann = PrefixAnnouncement {
            prefix: self.prefixes[prefix].0,
            as_path: path.clone(),
            origin: Origin::Igp,
        };
        self.records
            .push(BgpUpdateRecord::announcement(timestamp(at), p.address, p.asn, ann));
        self.current[peer][prefix] = Some(path);
    }

    fn emit_withdraw(&mut self, at: u64, peer: usize, prefix: usize) {
        let p = &self.peers[peer];
        self.records.push(BgpUpdateRecord::withdrawal(
            timestamp(at),
            p.address,
            p.asn,
            self.prefixes[prefix].0,
        ));
        self.current[peer][prefix] = None;
    }

    fn random_prefix(&mut self, peer: usize, from_stable: bool) -> Option<usize> {
        let table = if from_stable {
            &self.stable[peer]
        } else {
            &self.current[peer]
        };
        let candidates: Vec<usize> = (0..table.len()).filter(|&x| table[x].is_some()).collect();
        candidates.choose(&mut self.rng).copied()
    }

    /// Schedules a convergence refresh within `spread` seconds for every
    /// pair (restricted to `peers` when given) whose announced path differs
    /// from its stable path.
    fn converge(&mut self, now: u64, spread: f64, peers: Option<&[usize]>) {
        let all: Vec<usize> = (0..self.peers.len()).collect();
        for &p in peers.unwrap_or(&all) {
            for x in 0..self.prefixes.len() {
                if self.current[p][x] != self.stable[p][x] {
                    let at = now + self.uniform(0.0, spread);
                    self.schedule(at, Action::Refresh { peer: p, prefix: x });
                }
            }
        }
    }

    fn mutate(&mut self, path: &[u32]) -> Vec<u32> {
        let first = path[0];
        let origin = *path.last().expect("non-empty path");
        let k = self.rng.gen_range(1..=3);
        let foreign = |rng: &mut ChaCha8Rng| rng.gen_range(64512..65000u32);
        match self.rng.gen_range(0..3) {
            0 => {
                let mut p = path.to_vec();
                p.extend(std::iter::repeat_n(origin, k));
                p
            }
            1 => {
                let mut p = path.to_vec();
                for _ in 0..k {
                    let at = self.rng.gen_range(1..=p.len());
                    let asn = foreign(&mut self.rng);
                    p.insert(at, asn);
                }
                p
            }
            _ => {
                let mut p = vec![first];
                p.extend((0..k).map(|_| foreign(&mut self.rng)));
                p.push(origin);
                p
            }
        }
    }

    fn step(&mut self, now: u64, action: Action) {
        match action {
            Action::Announce { peer } => {
                // Re-advertise a stable route the peer currently holds.
                let held: Vec<usize> = (0..self.prefixes.len())
                    .filter(|&x| self.current[peer][x].is_some() && self.stable[peer][x].is_some())
                    .collect();
                if let Some(&x) = held.choose(&mut self.rng) {
                    let path = self.stable[peer][x].clone().expect("stable route");
                    self.emit_announce(now, peer, x, path);
                }
                self.next_arrival(now, self.announce_rate, self.horizon, action);
            }
            Action::Flap { peer } => {
                let back = now + self.uniform(FLAP_DELAY.0, FLAP_DELAY.1);
                if back < self.horizon {
                    if let Some(x) = self.random_prefix(peer, false) {
                        self.emit_withdraw(now, peer, x);
                        self.schedule(back, Action::Refresh { peer, prefix: x });
                    }
                }
                self.next_arrival(now, self.withdraw_rate, self.horizon, action);
            }
            Action::Refresh { peer, prefix } => match self.stable[peer][prefix].clone() {
                Some(path) if self.current[peer][prefix].as_ref() != Some(&path) => {
                    self.emit_announce(now, peer, prefix, path)
                }
                None if self.current[peer][prefix].is_some() => self.emit_withdraw(now, peer, prefix),
                _ => {}
            },
            Action::OutageStart { event } => {
                let Resolved::Outage {
                    link,
                    end,
                    storm_rate,
                    onset,
                    ..
                } = self.events[event]
                else {
                    unreachable!("outage action on a worm event")
                };
                self.link_down[link] += 1;
                let changed = self.recompute_stable();
                for &(p, x) in &changed {
                    let at = now + self.uniform(0.0, onset);
                    self.schedule(at, Action::Refresh { peer: p, prefix: x });
                    let storm_from = now + (onset * MICROS) as u64;
                    self.next_arrival(
                        storm_from,
                        storm_rate,
                        to_micros(end),
                        Action::Storm {
                            peer: p,
                            prefix: x,
                            event,
                        },
                    );
                }
            }
            Action::OutageEnd { event } => {
                let Resolved::Outage { link, .. } = self.events[event] else {
                    unreachable!("outage action on a worm event")
                };
                self.link_down[link] -= 1;
                self.recompute_stable();
                self.converge(now, self.delay, None);
            }
            Action::Storm { peer, prefix, event } => {
                let Resolved::Outage { end, storm_rate, .. } = self.events[event] else {
                    unreachable!("storm on a worm event")
                };
                self.emit_withdraw(now, peer, prefix);
                if self.stable[peer][prefix].is_some() {
                    let at = now + self.uniform(0.5, self.delay.max(0.5));
                    self.schedule(at, Action::Refresh { peer, prefix });
                }
                self.next_arrival(now, storm_rate, to_micros(end), action);
            }
            Action::WormStart { event } => {
                let Resolved::Worm {
                    ref peers,
                    end,
                    announce_rate,
                    withdraw_rate,
                    ..
                } = self.events[event]
                else {
                    unreachable!("worm action on an outage event")
                };
                for peer in peers.clone() {
                    self.next_arrival(now, announce_rate, to_micros(end), Action::WormAnnounce { peer, event });
                    self.next_arrival(now, withdraw_rate, to_micros(end), Action::WormWithdraw { peer, event });
                }
            }
            Action::WormEnd { event } => {
                let Resolved::Worm { ref peers, .. } = self.events[event] else {
                    unreachable!("worm action on an outage event")
                };
                let peers = peers.clone();
                self.converge(now, self.delay, Some(&peers));
            }
            Action::WormAnnounce { peer, event } => {
                let Resolved::Worm {
                    end,
                    announce_rate,
                    churn,
                    ..
                } = self.events[event]
                else {
                    unreachable!("worm action on an outage event")
                };
                if let Some(x) = self.random_prefix(peer, true) {
                    let stable = self.stable[peer][x].clone().expect("stable route");
                    let path = if self.rng.gen_bool(churn) {
                        self.mutate(&stable)
                    } else {
                        stable
                    };
                    self.emit_announce(now, peer, x, path);
                }
                self.next_arrival(now, announce_rate, to_micros(end), action);
            }
            Action::WormWithdraw { peer, event } => {
                let Resolved::Worm { end, withdraw_rate, .. } = self.events[event] else {
                    unreachable!("worm action on an outage event")
                };
                if let Some(x) = self.random_prefix(peer, false) {
                    self.emit_withdraw(now, peer, x);
                    let at = now + self.uniform(FLAP_DELAY.0, FLAP_DELAY.1);
                    self.schedule(at, Action::Refresh { peer, prefix: x });
                }
                self.next_arrival(now, withdraw_rate, to_micros(end), action);
            }
        }
    }
}

fn timestamp(at: u64) -> Timestamp {
    Timestamp {
        seconds: (at / 1_000_000) as u32,
        micros: (at % 1_000_000) as u32,
    }
}

/// Generates the update stream seen from the topology's monitored peers and
/// the ground-truth intervals of its labeled events. Deterministic given the
/// scenario (including its seed).
pub fn generate_stream(
    topology: &Topology,
    scenario: &Scenario,
) -> Result<(Vec<BgpUpdateRecord>, Vec<GroundTruthInterval>), SimError> {
    let g = &scenario.gen;
    for (name, v) in [
        ("announce_rate", g.announce_rate),
        ("withdraw_rate", g.withdraw_rate),
        ("propagation_delay", g.propagation_delay),
    ] {
        if !v.is_finite() || v < 0.0 {
            return Err(SimError::Config(format!(
                "{name} must be a finite non-negative number, got {v}"
            )));
        }
    }
    // Leave room for convergence actions after the horizon.
    if scenario.end() + 3600 > u32::MAX as u64 {
        return Err(SimError::Config(
            "scenario ends beyond the 32-bit timestamp range".into(),
        ));
    }
    let (events, truth) = resolve_events(topology, scenario)?;

    let peers: Vec<Peer> = topology
        .peers()
        .iter()
        .map(|id| {
            let router = topology.router_position(id).expect("validated peer");
            let r = &topology.routers()[router];
            Peer {
                router,
                address: r.address.expect("validated peer address"),
                asn: r.asn,
            }
        })
        .collect();
    let prefixes = topology.prefix_owner();
    let n_pairs = vec![vec![None; prefixes.len()]; peers.len()];
    let mut sim = Sim {
        topology,
        peers,
        prefixes,
        link_down: vec![0; topology.links().len()],
        stable: n_pairs.clone(),
        current: n_pairs,
        events,
        heap: BinaryHeap::new(),
        seq: 0,
        rng: ChaCha8Rng::seed_from_u64(derive_seed(g.seed, "simnet")),
        horizon: to_micros(scenario.end()),
        delay: g.propagation_delay,
        announce_rate: g.announce_rate,
        withdraw_rate: g.withdraw_rate,
        records: Vec::new(),
    };
    sim.recompute_stable();

    let t0 = to_micros(scenario.start);
    // Initial table dump, then the baseline processes.
    if g.announce_rate > 0.0 || g.withdraw_rate > 0.0 {
        for p in 0..sim.peers.len() {
            for x in 0..sim.prefixes.len() {
                if let Some(path) = sim.stable[p][x].clone() {
                    sim.emit_announce(t0, p, x, path);
                }
            }
        }
    }
    for peer in 0..sim.peers.len() {
        sim.next_arrival(t0, g.announce_rate, sim.horizon, Action::Announce { peer });
        sim.next_arrival(t0, g.withdraw_rate, sim.horizon, Action::Flap { peer });
    }
    for (event, ev) in sim.events.iter().enumerate() {
        let (start, end, on, off) = match ev {
            Resolved::Outage { start, end, .. } => {
                (*start, *end, Action::OutageStart { event }, Action::OutageEnd { event })
            }
            Resolved::Worm { start, end, .. } => (*start, *end, Action::WormStart { event }, Action::WormEnd { event }),
        };
        sim.seq += 1;
        let seq = sim.seq;
        sim.heap.push(Scheduled {
            at: to_micros(start),
            seq,
            action: on,
        });
        sim.seq += 1;
        let seq = sim.seq;
        sim.heap.push(Scheduled {
            at: to_micros(end),
            seq,
            action: off,
        });
    }

    while let Some(Scheduled { at, action, .. }) = sim.heap.pop() {
        sim.step(at, action);
    }
    Ok((sim.records, truth))
}
