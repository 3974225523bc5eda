mod common;

use std::collections::BTreeSet;

use chrono::{Datelike, Timelike};
use cdr_mobility::commute::{commute_radius, density_grid, important_places, TimeFilter};
use cdr_mobility::events::Fixture;
use cdr_mobility::geo::offset_north;
use cdr_mobility::ingest::AntennaRegistry;
use cdr_mobility::predictor::{train, DirectionFilter};
use cdr_mobility::synth::{generate_population, generate_records, SynthConfig};
use cdr_mobility::{Antenna, AntennaId, BBox, CallDirection, CdrRecord, GeoPoint, GridSpec, UserId, UtcOffset};
use proptest::prelude::*;

fn call(user: u64, antenna: u32, ts: i64) -> CdrRecord {
    CdrRecord {
        timestamp: ts,
        user: UserId(user),
        antenna: AntennaId(antenna),
        direction: CallDirection::Incoming,
        peer: None,
    }
}

/// User `i` calls 12 times from antenna `2i` and 6 times from `2i + 1`,
/// placed `dist(i)` km north.
fn planted(n: u64, dist: impl Fn(u64) -> f64) -> (AntennaRegistry, Vec<CdrRecord>) {
    let mut antennas = Vec::new();
    let mut recs = Vec::new();
    for i in 0..n {
        let home = GeoPoint { lat: -34.9 + 0.004 * i as f64, lon: -58.6 + 0.003 * i as f64 };
        antennas.push(Antenna { id: AntennaId(2 * i as u32), location: home });
        antennas.push(Antenna { id: AntennaId(2 * i as u32 + 1), location: offset_north(home, dist(i)) });
        for k in 0..18 {
            recs.push(call(i, 2 * i as u32 + (k >= 12) as u32, k as i64 * 3_600));
        }
    }
    (AntennaRegistry::new(antennas).unwrap(), recs)
}

fn mean_radius(registry: &AntennaRegistry, recs: &[CdrRecord]) -> f64 {
    let model = train(recs, DirectionFilter::All, UtcOffset::UTC);
    let places = important_places(&model.histogram, 10);
    let report = commute_radius(&places, registry).unwrap();
    assert_eq!(report.users_qualified, report.users_considered);
    report.mean_radius_km.unwrap()
}

#[test]
fn planted_five_km() {
    let (reg, recs) = planted(40, |_| 5.0);
    assert!((mean_radius(&reg, &recs) - 5.0).abs() <= 0.01);
}

#[test]
fn doubling_distances_doubles_the_radius() {
    let d = |i: u64| 1.0 + (i * 37 % 11) as f64 * 0.7;
    let (r1, recs1) = planted(30, d);
    let (r2, recs2) = planted(30, |i| 2.0 * d(i));
    let (a, b) = (mean_radius(&r1, &recs1), mean_radius(&r2, &recs2));
    assert!((b / a - 2.0).abs() <= 2e-9, "{a} {b}");
}

#[test]
fn synth_pairs_recovered() {
    let cfg = SynthConfig {
        n_users: 1000,
        weeks: 3,
        call_rate: 3.0,
        p_slot_adherence: 0.9,
        ..SynthConfig::default()
    };
    let (registry, truth) = generate_population(&cfg).unwrap();
    let (recs, _) = generate_records(&registry, &truth, &Fixture::default(), &cfg).unwrap();
    let model = train(&recs, DirectionFilter::All, cfg.utc_offset);
    let places = important_places(&model.histogram, 20);
    let mut eligible = 0;
    let mut hits = 0;
    for p in places.iter().filter(|p| p.total_calls >= 20) {
        eligible += 1;
        let u = truth.user(p.user).unwrap();
        let found: BTreeSet<_> = p.pair().into_iter().flat_map(|(a, b)| [a, b]).collect();
        if found == BTreeSet::from([u.home, u.work]) {
            hits += 1;
        }
        assert!(p.second.is_none_or(|(_, n)| n <= p.first.1));
    }
    assert!(eligible >= 990, "{eligible}");
    assert!(hits as f64 >= 0.99 * eligible as f64, "{hits} of {eligible}");
}

#[test]
fn work_hours_pull_mass_to_work_cells() {
    let cfg = SynthConfig {
        n_users: 1000,
        weeks: 4,
        ..SynthConfig::default()
    };
    let (registry, truth) = generate_population(&cfg).unwrap();
    let (recs, _) = generate_records(&registry, &truth, &Fixture::default(), &cfg).unwrap();
    let spec = GridSpec::new(cfg.bbox, 0.02).unwrap();
    let cells = spec.rows * spec.cols;
    let (mut workers, mut residents) = (vec![0i64; cells], vec![0i64; cells]);
    let index = |a| spec.cell(registry.location(a).unwrap()).map(|(r, c)| r * spec.cols + c).unwrap();
    for u in &truth.users {
        workers[index(u.work)] += 1;
        residents[index(u.home)] += 1;
    }
    let lean = |hour| {
        let g = density_grid(&recs, &registry, spec, TimeFilter::LocalHour { hour, weekdays_only: true }, cfg.utc_offset);
        (0..cells).map(|i| g.cells[i] as i64 * (workers[i] - residents[i])).sum::<i64>()
    };
    assert!(lean(10) > 0, "10:00 should lean to work cells");
    assert!(lean(20) < 0, "20:00 should lean to home cells");
}

fn local_hour(ts: i64, offset_h: i32) -> (u32, bool) {
    let t = chrono::DateTime::from_timestamp(ts + offset_h as i64 * 3600, 0).unwrap();
    (t.hour(), t.weekday().num_days_from_monday() >= 5)
}

proptest! {
    #[test]
    fn grid_mass_is_conserved(
        recs in common::records(10, 30, 300),
        hour in 0u8..24,
        weekdays_only: bool,
        offset_h in -5i32..5,
        shrink in 0.0f64..0.04,
        cell in 0.004f64..0.05,
    ) {
        let registry = common::small_registry(30);
        let full = registry.bounds(0.0);
        let bbox = BBox::new(
            GeoPoint { lat: full.min.lat + shrink, lon: full.min.lon },
            GeoPoint { lat: full.max.lat, lon: full.max.lon - shrink },
        ).unwrap();
        let spec = GridSpec::new(bbox, cell).unwrap();
        let offset = UtcOffset::new(offset_h).unwrap();
        let g = density_grid(&recs, &registry, spec, TimeFilter::LocalHour { hour, weekdays_only }, offset);
        let expect = recs
            .iter()
            .filter(|r| {
                let (h, weekend) = local_hour(r.timestamp, offset_h);
                h == hour as u32 && !(weekdays_only && weekend) && bbox.contains(registry.location(r.antenna).unwrap())
            })
            .count() as u64;
        prop_assert_eq!(g.total(), expect);
        prop_assert_eq!(g.cells.iter().sum::<u64>(), expect);
    }

    #[test]
    fn places_ignore_record_order(recs in common::records(10, 8, 300), seed: u64) {
        use rand::seq::SliceRandom;
        use rand::SeedableRng;
        let mut shuffled = recs.clone();
        shuffled.shuffle(&mut rand_chacha::ChaCha8Rng::seed_from_u64(seed));
        let a = important_places(&train(&recs, DirectionFilter::All, UtcOffset::UTC).histogram, 3);
        let b = important_places(&train(&shuffled, DirectionFilter::All, UtcOffset::UTC).histogram, 3);
        prop_assert_eq!(a, b);
    }
}
