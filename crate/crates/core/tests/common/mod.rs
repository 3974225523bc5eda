#![allow(dead_code)]

use cdr_mobility::ingest::AntennaRegistry;
use cdr_mobility::{Antenna, AntennaId, CallDirection, CdrRecord, GeoPoint, UserId};
use proptest::prelude::*;

pub fn small_registry(n: u32) -> AntennaRegistry {
    AntennaRegistry::new((0..n).map(|i| Antenna {
        id: AntennaId(i),
        location: GeoPoint {
            lat: -34.6 + 0.01 * (i % 7) as f64,
            lon: -58.4 + 0.013 * (i / 7) as f64,
        },
    }))
    .unwrap()
}

pub fn direction() -> impl Strategy<Value = CallDirection> {
    prop_oneof![Just(CallDirection::Outgoing), Just(CallDirection::Incoming)]
}

/// Records over `users` users and antennas `0..antennas`, spread across a few weeks.
pub fn records(users: u64, antennas: u32, max_len: usize) -> impl Strategy<Value = Vec<CdrRecord>> {
    prop::collection::vec(
        (
            1_330_000_000i64..1_333_000_000,
            0..users,
            0..antennas,
            direction(),
            prop::option::of(0..users),
        )
            .prop_map(|(timestamp, u, a, direction, peer)| CdrRecord {
                timestamp,
                user: UserId(u),
                antenna: AntennaId(a),
                direction,
                peer: peer.map(UserId),
            }),
        0..max_len,
    )
}

/// Peak resident set size of this process, in bytes.
pub fn peak_rss_bytes() -> u64 {
    let mut usage: libc::rusage = unsafe { std::mem::zeroed() };
    unsafe { libc::getrusage(libc::RUSAGE_SELF, &mut usage) };
    usage.ru_maxrss as u64 * 1024
}
