use std::net::Ipv4Addr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sicn_core::bgp::mrt::{MRT_HEADER_LEN, TYPE_BGP4MP, TYPE_BGP4MP_ET};
use sicn_core::bgp::{BgpUpdateRecord, Ipv4Prefix, Origin, PrefixAnnouncement, Timestamp};

pub fn random_prefix(rng: &mut impl Rng) -> Ipv4Prefix {
    let len = rng.gen_range(0..=32);
    Ipv4Prefix::new(Ipv4Addr::from(rng.gen::<u32>()), len).unwrap()
}

pub fn random_asn(rng: &mut impl Rng) -> u32 {
    if rng.gen_bool(0.3) {
        rng.gen_range(65_536..=u32::MAX)
    } else {
        rng.gen_range(1..65_536)
    }
}

pub fn random_origin(rng: &mut impl Rng) -> Origin {
    [Origin::Igp, Origin::Egp, Origin::Incomplete][rng.gen_range(0..3)]
}

/// A valid record. Announcements in one UPDATE share their path attributes,
/// so every announced prefix carries the same AS path and origin.
pub fn random_record(rng: &mut impl Rng) -> BgpUpdateRecord {
    let n_ann = rng.gen_range(0..4);
    let n_wd = if n_ann == 0 {
        rng.gen_range(1..4)
    } else {
        rng.gen_range(0..3)
    };
    let path: Vec<u32> = (0..rng.gen_range(1..12)).map(|_| random_asn(rng)).collect();
    let origin = random_origin(rng);
    BgpUpdateRecord {
        timestamp: Timestamp::new(rng.gen(), rng.gen_range(0..1_000_000)).unwrap(),
        peer_address: Ipv4Addr::from(rng.gen::<u32>()),
        peer_as: random_asn(rng),
        announced: (0..n_ann)
            .map(|_| PrefixAnnouncement {
                prefix: random_prefix(rng),
                as_path: path.clone(),
                origin,
            })
            .collect(),
        withdrawn: (0..n_wd).map(|_| random_prefix(rng)).collect(),
    }
}

pub fn random_records(seed: u64, n: usize) -> Vec<BgpUpdateRecord> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n).map(|_| random_record(&mut rng)).collect()
}

/// Time-ordered stream over a small peer/prefix/path pool, so duplicates,
/// re-announcements and path changes are frequent.
pub fn churn_stream(seed: u64, n: usize, t0: u32, span: u32) -> Vec<BgpUpdateRecord> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let peers = [(Ipv4Addr::new(10, 0, 0, 1), 65001), (Ipv4Addr::new(10, 0, 0, 2), 70000)];
    let prefixes: Vec<Ipv4Prefix> = (0..5u8)
        .map(|i| Ipv4Prefix::new(Ipv4Addr::new(192, 0, i, 0), 24).unwrap())
        .collect();
    let mut stamps: Vec<(u32, u32)> = (0..n)
        .map(|_| (t0 + rng.gen_range(0..span), rng.gen_range(0..1_000_000)))
        .collect();
    stamps.sort();
    stamps
        .into_iter()
        .map(|(s, us)| {
            let (peer_address, peer_as) = peers[rng.gen_range(0..peers.len())];
            let n_wd = rng.gen_range(0..3);
            let n_ann = if n_wd == 0 {
                rng.gen_range(1..3)
            } else {
                rng.gen_range(0..3)
            };
            let path: Vec<u32> = (0..rng.gen_range(1..14)).map(|_| rng.gen_range(1..6)).collect();
            let origin = random_origin(&mut rng);
            BgpUpdateRecord {
                timestamp: Timestamp::new(s, us).unwrap(),
                peer_address,
                peer_as,
                announced: (0..n_ann)
                    .map(|_| PrefixAnnouncement {
                        prefix: prefixes[rng.gen_range(0..prefixes.len())],
                        as_path: path.clone(),
                        origin,
                    })
                    .collect(),
                withdrawn: (0..n_wd).map(|_| prefixes[rng.gen_range(0..prefixes.len())]).collect(),
            }
        })
        .collect()
}

/// A framed MRT record of a type the parser does not decode.
pub fn unsupported_record(seconds: u32, mrt_type: u16, payload_len: usize) -> Vec<u8> {
    assert!(mrt_type != TYPE_BGP4MP && mrt_type != TYPE_BGP4MP_ET);
    let mut out = Vec::with_capacity(MRT_HEADER_LEN + payload_len);
    out.extend_from_slice(&seconds.to_be_bytes());
    out.extend_from_slice(&mrt_type.to_be_bytes());
    out.extend_from_slice(&1u16.to_be_bytes());
    out.extend_from_slice(&(payload_len as u32).to_be_bytes());
    out.extend((0..payload_len).map(|i| i as u8));
    out
}
