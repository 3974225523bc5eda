use std::fs;

use cdr_mobility::events::Fixture;
use cdr_mobility::synth::{generate_cdrs, generate_fixture, generate_population, generate_records, FixturePlan, SynthConfig};
use cdr_mobility::{time_slot, AntennaId};

fn small() -> SynthConfig {
    SynthConfig {
        n_users: 10,
        n_antennas: 5,
        weeks: 2,
        seed: 42,
        ..SynthConfig::default()
    }
}

#[test]
fn same_seed_same_bytes() {
    let cfg = small();
    let plan = FixturePlan { n_matches: 2, ..FixturePlan::default() };
    let dirs = [tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap()];
    for d in &dirs {
        let (registry, truth) = generate_population(&cfg).unwrap();
        let fixture = generate_fixture(&registry, &truth, &cfg, &plan).unwrap();
        generate_cdrs(&registry, &truth, &fixture, &cfg, d.path()).unwrap();
    }
    for name in ["cdrs.csv", "ground_truth.csv", "attendance.csv"] {
        let a = fs::read(dirs[0].path().join(name)).unwrap();
        let b = fs::read(dirs[1].path().join(name)).unwrap();
        assert_eq!(a, b, "{name}");
    }

    let other = SynthConfig { seed: 43, ..cfg.clone() };
    let (r1, t1) = generate_population(&cfg).unwrap();
    let (r2, t2) = generate_population(&other).unwrap();
    let a = generate_records(&r1, &t1, &Fixture::default(), &cfg).unwrap().0;
    let b = generate_records(&r2, &t2, &Fixture::default(), &other).unwrap().0;
    assert_ne!(a, b);
}

#[test]
fn records_sorted_by_time() {
    let cfg = small();
    let (registry, truth) = generate_population(&cfg).unwrap();
    let (recs, _) = generate_records(&registry, &truth, &Fixture::default(), &cfg).unwrap();
    assert!(recs.windows(2).all(|w| w[0] <= w[1]));
}

#[test]
fn no_fans_without_fan_fraction() {
    let cfg = SynthConfig { fan_fraction: 0.0, ..small() };
    let (_, truth) = generate_population(&cfg).unwrap();
    assert_eq!(truth.fans().count(), 0);
}

#[test]
fn fan_count_is_binomial() {
    let cfg = SynthConfig {
        n_users: 10_000,
        fan_fraction: 0.3,
        ..SynthConfig::default()
    };
    let (_, truth) = generate_population(&cfg).unwrap();
    let fans = truth.fans().count() as f64;
    let sd = (10_000.0f64 * 0.3 * 0.7).sqrt();
    assert!((fans - 3_000.0).abs() <= 3.0 * sd, "{fans}");
    assert!(truth.users.iter().all(|u| u.home != u.work));
}

#[test]
fn anchor_fraction_matches_mixture() {
    let cfg = SynthConfig {
        n_users: 1000,
        weeks: 15,
        p_slot_adherence: 0.8,
        ..SynthConfig::default()
    };
    let (registry, truth) = generate_population(&cfg).unwrap();
    let (recs, _) = generate_records(&registry, &truth, &Fixture::default(), &cfg).unwrap();
    let hits = recs
        .iter()
        .filter(|r| truth.user(r.user).unwrap().anchor(time_slot(r.timestamp, cfg.utc_offset)) == r.antenna)
        .count() as f64;
    let n = recs.len() as f64;
    // Off-anchor calls are uniform over every antenna, the anchor included.
    let q = 0.8 + 0.2 / cfg.n_antennas as f64;
    let sd = (q * (1.0 - q) / n).sqrt();
    assert!((hits / n - q).abs() <= 3.0 * sd, "{} vs {q}", hits / n);
}

#[test]
fn certain_adherence_follows_anchors() {
    let cfg = SynthConfig { p_slot_adherence: 1.0, n_users: 100, ..small() };
    let (registry, truth) = generate_population(&cfg).unwrap();
    let (recs, _) = generate_records(&registry, &truth, &Fixture::default(), &cfg).unwrap();
    assert!(!recs.is_empty());
    for r in &recs {
        assert_eq!(r.antenna, truth.user(r.user).unwrap().anchor(time_slot(r.timestamp, cfg.utc_offset)));
    }
}

#[test]
fn forced_attendance_puts_every_fan_at_every_match() {
    let cfg = SynthConfig {
        n_users: 100,
        weeks: 4,
        fan_fraction: 0.2,
        p_attend: 1.0,
        ..SynthConfig::default()
    };
    let (registry, truth) = generate_population(&cfg).unwrap();
    let plan = FixturePlan { n_matches: 3, ..FixturePlan::default() };
    let fixture = generate_fixture(&registry, &truth, &cfg, &plan).unwrap();
    let (recs, truth) = generate_records(&registry, &truth, &fixture, &cfg).unwrap();
    assert!(truth.fans().count() > 0);
    for fan in truth.fans() {
        for m in fixture.matches() {
            let venue = registry.nearest(m.venue).id;
            assert!(
                recs.iter().any(|r| r.user == fan.user && m.in_window(r.timestamp) && r.antenna == venue),
                "{} missing from {}",
                fan.user,
                m.match_id
            );
            assert!(truth.attended.contains(&(fan.user, m.match_id.clone())));
        }
    }
}

#[test]
fn empty_fixture_venue_at_chance() {
    let cfg = SynthConfig {
        n_users: 500,
        weeks: 6,
        ..SynthConfig::default()
    };
    let (registry, truth) = generate_population(&cfg).unwrap();
    let plan = FixturePlan { n_matches: 1, ..FixturePlan::default() };
    let venue: AntennaId = registry
        .nearest(generate_fixture(&registry, &truth, &cfg, &plan).unwrap().matches()[0].venue)
        .id;
    let (recs, _) = generate_records(&registry, &truth, &Fixture::default(), &cfg).unwrap();

    let p = cfg.p_slot_adherence;
    let uniform = (1.0 - p) / cfg.n_antennas as f64;
    let (mut mean, mut var) = (0.0, 0.0);
    for r in &recs {
        let anchored = truth.user(r.user).unwrap().anchor(time_slot(r.timestamp, cfg.utc_offset)) == venue;
        let q = if anchored { p + uniform } else { uniform };
        mean += q;
        var += q * (1.0 - q);
    }
    let observed = recs.iter().filter(|r| r.antenna == venue).count() as f64;
    assert!(observed <= mean + 3.0 * var.sqrt(), "{observed} vs {mean}");
}

#[test]
fn invalid_configs_rejected() {
    for cfg in [
        SynthConfig { p_attend: 1.5, ..small() },
        SynthConfig { n_users: 0, ..small() },
        SynthConfig { call_rate: 0.0, ..small() },
        SynthConfig { n_antennas: 1, ..small() },
    ] {
        assert!(matches!(generate_population(&cfg), Err(cdr_mobility::Error::ConfigInvalid(_))));
    }
    let cfg = small();
    let (registry, truth) = generate_population(&cfg).unwrap();
    // Matches past the generated weeks.
    let plan = FixturePlan { n_matches: 5, ..FixturePlan::default() };
    let fixture = generate_fixture(&registry, &truth, &cfg, &plan).unwrap();
    assert!(generate_records(&registry, &truth, &fixture, &cfg).is_err());
}
