use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::net::Ipv4Addr;

use sicn_core::bgp::{serialize_mrt, BgpUpdateRecord, Ipv4Prefix};
use sicn_core::classes::{FaultClass, IncidentClass, WindowClass};
use sicn_core::features::{featurize_stream, WITHDRAWALS};
use sicn_core::simnet::{generate_stream, reachable_prefixes, GenConfig, Scenario, ScenarioEvent, SimError, Topology};

const T0: u64 = 1_000_000_000;

fn scenario(duration: u64, seed: u64, events: Vec<ScenarioEvent>) -> Scenario {
    Scenario {
        start: T0,
        duration,
        gen: GenConfig {
            seed,
            ..GenConfig::default()
        },
        events,
    }
}

fn outage(link: &str, start: u64, end: u64) -> ScenarioEvent {
    ScenarioEvent::LinkOutage {
        link: link.into(),
        start: T0 + start,
        end: T0 + end,
        multiplier: None,
    }
}

fn worm(class: u32, start: u64, end: u64) -> ScenarioEvent {
    ScenarioEvent::Worm {
        class: Some(class),
        start: T0 + start,
        end: T0 + end,
        peers: Vec::new(),
        multiplier: None,
        churn: None,
        withdraw_multiplier: None,
    }
}

/// Replays a stream into per-peer reachable prefix sets.
fn final_tables(topology: &Topology, records: &[BgpUpdateRecord]) -> BTreeMap<String, BTreeSet<Ipv4Prefix>> {
    let by_addr: HashMap<Ipv4Addr, String> = topology
        .peers()
        .iter()
        .map(|p| (topology.router(p).unwrap().address.unwrap(), p.clone()))
        .collect();
    let mut tables: BTreeMap<String, BTreeSet<Ipv4Prefix>> =
        topology.peers().iter().map(|p| (p.clone(), BTreeSet::new())).collect();
    for r in records {
        let t = tables.get_mut(&by_addr[&r.peer_address]).unwrap();
        for w in &r.withdrawn {
            t.remove(w);
        }
        for a in &r.announced {
            t.insert(a.prefix);
        }
    }
    tables
}

#[test]
fn silence_without_rates_or_events() {
    let topo = Topology::reference();
    let mut s = scenario(3600, 1, Vec::new());
    s.gen.announce_rate = 0.0;
    s.gen.withdraw_rate = 0.0;
    let (records, truth) = generate_stream(&topo, &s).unwrap();
    assert!(records.is_empty());
    assert!(truth.is_empty());
}

#[test]
fn outage_burst_dominates_baseline() {
    let topo = Topology::reference();
    let s = scenario(120 * 60, 3, vec![outage("link-r1-r2", 60 * 60, 70 * 60)]);
    let (records, truth) = generate_stream(&topo, &s).unwrap();
    assert_eq!(truth.len(), 1);
    assert_eq!(truth[0].class, WindowClass::Outage(FaultClass::OutageR1R2));
    let fvs = featurize_stream(records, 60, T0).unwrap();
    let mut baseline: Vec<f64> = fvs[1..60].iter().map(|f| f.values[WITHDRAWALS]).collect();
    baseline.sort_by(f64::total_cmp);
    let median = baseline[baseline.len() / 2].max(1.0);
    for f in &fvs[60..70] {
        assert!(
            f.values[WITHDRAWALS] >= 10.0 * median,
            "window {} has {} withdrawals, baseline median {median}",
            f.window_start,
            f.values[WITHDRAWALS]
        );
    }
}

#[test]
fn withdrawn_prefixes_return_after_outage() {
    let topo = Topology::reference();
    let s = scenario(3600, 4, vec![outage("link-r5-r6", 600, 1200)]);
    let delay = s.gen.propagation_delay;
    let (records, _) = generate_stream(&topo, &s).unwrap();
    let before: Vec<_> = records
        .iter()
        .filter(|r| r.timestamp.seconds < (T0 + 600) as u32)
        .cloned()
        .collect();
    let during: Vec<_> = records
        .iter()
        .filter(|r| r.timestamp.seconds < (T0 + 1200) as u32)
        .cloned()
        .collect();
    let restored_by = T0 as f64 + 1200.0 + delay;
    let after: Vec<_> = records
        .iter()
        .filter(|r| r.timestamp.as_f64() <= restored_by)
        .cloned()
        .collect();
    let at_onset = final_tables(&topo, &before);
    let at_end = final_tables(&topo, &during);
    let restored = final_tables(&topo, &after);
    let lost: usize = at_onset.iter().map(|(p, s)| s.difference(&at_end[p]).count()).sum();
    assert!(lost > 0, "the outage withdrew nothing");
    let healthy = reachable_prefixes(&topo, &[]);
    for (peer, set) in &restored {
        // Baseline flaps may be in flight; everything the outage took is back.
        for p in at_onset[peer].difference(&at_end[peer]) {
            assert!(set.contains(p), "{peer} never re-announced {p}");
        }
        assert!(set.is_subset(&healthy[peer]));
    }
}

#[test]
fn streams_are_deterministic_and_seed_sensitive() {
    let topo = Topology::reference();
    let events = vec![worm(2, 300, 900), outage("link-r1-r2", 1200, 1800)];
    let bytes = |seed| {
        let (records, _) = generate_stream(&topo, &scenario(2400, seed, events.clone())).unwrap();
        records
            .iter()
            .flat_map(|r| serialize_mrt(r).unwrap())
            .collect::<Vec<u8>>()
    };
    assert_eq!(bytes(9), bytes(9));
    assert_ne!(bytes(9), bytes(10));
}

#[test]
fn conservation_after_all_events_end() {
    let topo = Topology::reference();
    let events = vec![
        worm(3, 600, 1200),
        outage("link-r1-r2", 1500, 2100),
        outage("link-r5-r6", 2400, 3000),
        ScenarioEvent::WeatherFade {
            link: "link-t6-sat".into(),
            start: T0 + 3100,
            end: T0 + 3300,
            onset: None,
            multiplier: None,
        },
    ];
    for seed in 0..3 {
        let (records, _) = generate_stream(&topo, &scenario(3600, seed, events.clone())).unwrap();
        assert_eq!(
            final_tables(&topo, &records),
            reachable_prefixes(&topo, &[]),
            "seed {seed}"
        );
    }
}

#[test]
fn worm_records_fall_inside_their_interval() {
    let topo = Topology::reference();
    let s = scenario(1800, 5, vec![worm(3, 600, 1200)]);
    let (records, truth) = generate_stream(&topo, &s).unwrap();
    assert_eq!(truth[0].class, WindowClass::Intrusion(IncidentClass::Slammer));
    let (quiet, noisy) = (
        records
            .iter()
            .filter(|r| r.timestamp.seconds < (T0 + 600) as u32)
            .count(),
        records
            .iter()
            .filter(|r| (T0 + 600..T0 + 1200).contains(&(r.timestamp.seconds as u64)))
            .count(),
    );
    assert!(noisy > 4 * quiet, "worm adds {noisy} records vs {quiet} before");
    // Randomized paths only appear while the worm runs (plus convergence).
    let healthy_max = 4;
    for r in &records {
        for a in &r.announced {
            if a.as_path.len() > healthy_max {
                let t = r.timestamp.as_f64();
                assert!(t >= (T0 + 600) as f64 && t < (T0 + 1200) as f64, "churned path at {t}");
            }
        }
    }
}

#[test]
fn malformed_events_rejected() {
    let topo = Topology::reference();
    let mut bad = worm(1, 10, 20);
    if let ScenarioEvent::Worm { class, .. } = &mut bad {
        *class = None;
    }
    assert!(matches!(
        generate_stream(&topo, &scenario(60, 0, vec![bad])),
        Err(SimError::WormWithoutClass { index: 1 })
    ));
    let fade = ScenarioEvent::WeatherFade {
        link: "link-r1-r2".into(),
        start: T0 + 1,
        end: T0 + 2,
        onset: None,
        multiplier: None,
    };
    assert!(matches!(
        generate_stream(&topo, &scenario(60, 0, vec![fade])),
        Err(SimError::Event { .. })
    ));
    assert!(matches!(
        generate_stream(&topo, &scenario(60, 0, vec![outage("link-nowhere", 1, 2)])),
        Err(SimError::Event { .. })
    ));
    assert!(matches!(
        generate_stream(&topo, &scenario(60, 0, vec![outage("link-r1-r2", 5, 5)])),
        Err(SimError::Event { .. })
    ));
}

#[test]
fn scenario_documents_parse() {
    let s = Scenario::from_toml_str(
        r#"
start = 1000000000
duration = 3600
[gen]
seed = 3
[[events]]
kind = "worm"
class = 2
start = 1000000600
end = 1000001200
[[events]]
kind = "link_outage"
link = "link-r1-r2"
start = 1000001500
end = 1000002000
"#,
    )
    .unwrap();
    assert_eq!(s.gen.announce_rate, 0.5);
    assert_eq!(s.events.len(), 2);
    let back = Scenario::from_json_str(&serde_json::to_string(&s).unwrap()).unwrap();
    assert_eq!(back, s);
}
