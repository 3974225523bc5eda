//! Tag supporters who show up at the stadium for several consecutive matches.

use cdr_mobility::events::tag_fans;
use cdr_mobility::synth::{generate_fixture, generate_population, generate_records, FixturePlan, SynthConfig};
use cdr_mobility::Result;

pub fn run() -> Result<()> {
    let cfg = SynthConfig {
        n_users: 200,
        n_antennas: 400,
        weeks: 11,
        p_slot_adherence: 1.0,
        p_attend: 0.7,
        ..SynthConfig::default()
    };
    let (registry, truth) = generate_population(&cfg)?;
    let plan = FixturePlan {
        avoid_anchors_km: Some(1.0),
        ..FixturePlan::default()
    };
    let fixture = generate_fixture(&registry, &truth, &cfg, &plan)?;
    let (records, truth) = generate_records(&registry, &truth, &fixture, &cfg)?;

    for k in 1..=4 {
        let tags = tag_fans(&records, &fixture, &registry, 1.0, k)?;
        let fans: Vec<_> = truth.fans().map(|u| u.user).collect();
        let hits = fans.iter().filter(|&&u| tags.contains(u)).count();
        let precision = if tags.is_empty() { 1.0 } else { hits as f64 / tags.len() as f64 };
        let recall = if fans.is_empty() { 1.0 } else { hits as f64 / fans.len() as f64 };
        println!("k = {k}: {} tagged, precision {precision:.3}, recall {recall:.3}", tags.len());
    }
    Ok(())
}

fn main() -> Result<()> {
    run()
}
