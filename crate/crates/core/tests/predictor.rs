mod common;

use std::collections::{BTreeMap, BTreeSet, HashSet, VecDeque};

use chrono::{Datelike, Timelike};
use cdr_mobility::events::Fixture;
use cdr_mobility::ingest::AntennaRegistry;
use cdr_mobility::predictor::{cluster_antennas, evaluate, train, train_parallel, DirectionFilter};
use cdr_mobility::synth::{generate_population, generate_records, SynthConfig};
use cdr_mobility::{haversine_km, Antenna, AntennaId, CdrRecord, GeoPoint, TimeSlot, UserId, UtcOffset};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};

/// Slot from the calendar, independently of the library's arithmetic.
fn calendar_slot(ts: i64, offset_h: i32) -> usize {
    let t = chrono::DateTime::from_timestamp(ts + offset_h as i64 * 3600, 0).unwrap();
    t.weekday().num_days_from_monday() as usize * 24 + t.hour() as usize
}

fn recount(recs: &[CdrRecord], offset_h: i32) -> BTreeMap<(UserId, usize), AntennaId> {
    let mut counts: BTreeMap<(UserId, usize), BTreeMap<AntennaId, u32>> = BTreeMap::new();
    for r in recs {
        *counts.entry((r.user, calendar_slot(r.timestamp, offset_h))).or_default().entry(r.antenna).or_default() += 1;
    }
    counts
        .into_iter()
        .map(|(k, c)| {
            let best = c.values().copied().max().unwrap();
            // BTreeMap iterates ids ascending, so the first hit is the smallest.
            (k, c.into_iter().find(|&(_, n)| n == best).unwrap().0)
        })
        .collect()
}

proptest! {
    #[test]
    fn argmax_matches_recount(recs in common::records(8, 5, 400), offset_h in -12i32..=14) {
        let offset = UtcOffset::new(offset_h).unwrap();
        let model = train(&recs, DirectionFilter::All, offset);
        let oracle = recount(&recs, offset_h);
        for u in 0..8 {
            for s in TimeSlot::all() {
                prop_assert_eq!(model.predict(UserId(u), s), oracle.get(&(UserId(u), s.index())).copied());
            }
        }
    }

    #[test]
    fn direction_models_partition_counts(recs in common::records(6, 4, 300)) {
        let all = train(&recs, DirectionFilter::All, UtcOffset::UTC);
        let out = train(&recs, DirectionFilter::OutgoingOnly, UtcOffset::UTC);
        let inc = train(&recs, DirectionFilter::IncomingOnly, UtcOffset::UTC);
        prop_assert_eq!(all.histogram.total_count(), recs.len() as u64);
        prop_assert_eq!(out.histogram.total_count() + inc.histogram.total_count(), recs.len() as u64);
        for (u, s, counts) in all.histogram.cells() {
            for (a, n) in counts.iter() {
                let o = out.histogram.get(u, s).map_or(0, |c| c.count(a));
                let i = inc.histogram.get(u, s).map_or(0, |c| c.count(a));
                prop_assert_eq!(o + i, n);
            }
        }
    }

    #[test]
    fn coverage_is_seen_fraction(train_recs in common::records(6, 4, 200), test_recs in common::records(8, 4, 200)) {
        let model = train(&train_recs, DirectionFilter::All, UtcOffset::UTC);
        let report = evaluate(&model, &test_recs, DirectionFilter::All, UtcOffset::UTC, None);
        let seen: HashSet<_> = train_recs.iter().map(|r| (r.user, calendar_slot(r.timestamp, 0))).collect();
        let known = test_recs.iter().filter(|r| seen.contains(&(r.user, calendar_slot(r.timestamp, 0)))).count();
        prop_assert_eq!(report.total_events, test_recs.len() as u64);
        prop_assert_eq!(report.predicted_events, known as u64);
        prop_assert!(report.correct_events <= report.predicted_events);
        let per_slot = report.per_slot.iter().fold((0, 0, 0), |(t, p, c), s| (t + s.total, p + s.predicted, c + s.correct));
        prop_assert_eq!(per_slot, (report.total_events, report.predicted_events, report.correct_events));
    }
}

#[test]
fn unseen_user_is_unpredicted() {
    let at = |u, ts| CdrRecord {
        timestamp: ts,
        user: UserId(u),
        antenna: AntennaId(1),
        direction: cdr_mobility::CallDirection::Outgoing,
        peer: None,
    };
    let model = train(&[at(1, 0)], DirectionFilter::All, UtcOffset::UTC);
    let report = evaluate(&model, &[at(2, 604_800), at(1, 604_800)], DirectionFilter::All, UtcOffset::UTC, None);
    assert_eq!((report.total_events, report.predicted_events, report.correct_events), (2, 1, 1));
    assert_eq!(report.coverage(), Some(0.5));
}

fn synth_split(p: f64, users: u32) -> (AntennaRegistry, Vec<CdrRecord>, Vec<CdrRecord>, UtcOffset) {
    let cfg = SynthConfig {
        n_users: users,
        weeks: 6,
        call_rate: 6.0,
        p_slot_adherence: p,
        ..SynthConfig::default()
    };
    let (registry, truth) = generate_population(&cfg).unwrap();
    let (recs, _) = generate_records(&registry, &truth, &Fixture::default(), &cfg).unwrap();
    let split = cfg.week_start(4);
    let (a, b) = recs.into_iter().partition(|r| r.timestamp < split);
    (registry, a, b, cfg.utc_offset)
}

#[test]
fn perfect_adherence_is_perfectly_predictable() {
    let (_, train_recs, test_recs, offset) = synth_split(1.0, 200);
    let model = train_parallel(&train_recs, DirectionFilter::All, offset);
    let report = evaluate(&model, &test_recs, DirectionFilter::All, offset, None);
    assert!(report.predicted_events > 0);
    assert_eq!(report.accuracy(), Some(1.0));
}

#[test]
fn clustered_scoring_never_loses() {
    let (registry, train_recs, test_recs, offset) = synth_split(0.6, 300);
    let model = train_parallel(&train_recs, DirectionFilter::All, offset);
    let exact = evaluate(&model, &test_recs, DirectionFilter::All, offset, None);
    for km in [0.0, 1.0, 3.0, 8.0] {
        let c = cluster_antennas(&registry, km);
        let clustered = evaluate(&model, &test_recs, DirectionFilter::All, offset, Some(&c));
        assert_eq!(clustered.predicted_events, exact.predicted_events);
        assert!(clustered.correct_events >= exact.correct_events, "{km} km");
        for (a, b) in clustered.per_slot.iter().zip(&exact.per_slot) {
            assert!(a.correct >= b.correct);
        }
        if km == 0.0 {
            assert_eq!(clustered, exact);
        }
    }
}

#[test]
fn thread_count_does_not_change_the_model() {
    let (_, train_recs, test_recs, offset) = synth_split(0.8, 300);
    let run = |n| {
        rayon::ThreadPoolBuilder::new().num_threads(n).build().unwrap().install(|| {
            let m = train_parallel(&train_recs, DirectionFilter::All, offset);
            let r = evaluate(&m, &test_recs, DirectionFilter::All, offset, None);
            (m, r)
        })
    };
    let (m1, r1) = run(1);
    let (m4, r4) = run(4);
    assert_eq!(m1, m4);
    assert_eq!(r1, r4);
    assert_eq!(m1, train(&train_recs, DirectionFilter::All, offset));
}

fn bfs_components(antennas: &[Antenna], km: f64) -> BTreeSet<BTreeSet<AntennaId>> {
    let mut seen = vec![false; antennas.len()];
    let mut out = BTreeSet::new();
    for start in 0..antennas.len() {
        if seen[start] {
            continue;
        }
        seen[start] = true;
        let mut comp = BTreeSet::new();
        let mut queue = VecDeque::from([start]);
        while let Some(i) = queue.pop_front() {
            comp.insert(antennas[i].id);
            for j in 0..antennas.len() {
                if !seen[j] && haversine_km(antennas[i].location, antennas[j].location) <= km {
                    seen[j] = true;
                    queue.push_back(j);
                }
            }
        }
        out.insert(comp);
    }
    out
}

#[test]
fn clustering_matches_bfs() {
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
    for trial in 0..30 {
        let antennas: Vec<Antenna> = (0..50)
            .map(|i| Antenna {
                id: AntennaId(1000 - i * 7),
                location: GeoPoint {
                    lat: -34.6 + rng.random_range(-0.1..0.1),
                    lon: -58.4 + rng.random_range(-0.1..0.1),
                },
            })
            .collect();
        let registry = AntennaRegistry::new(antennas.clone()).unwrap();
        let km = 0.5 + trial as f64 * 0.15;
        let c = cluster_antennas(&registry, km);
        let mut groups: BTreeMap<_, BTreeSet<AntennaId>> = BTreeMap::new();
        for a in &antennas {
            groups.entry(c.cluster_of(a.id).unwrap()).or_default().insert(a.id);
        }
        for (id, members) in &groups {
            assert_eq!(id.0, *members.first().unwrap());
        }
        let ours: BTreeSet<_> = groups.into_values().collect();
        assert_eq!(ours, bfs_components(&antennas, km), "threshold {km}");
        assert_eq!(c.cluster_count(), ours.len());
    }
}
