//! Where attendees of one match are in the hours around kickoff.

use cdr_mobility::events::{convergence_grids, stadium_zone};
use cdr_mobility::synth::{generate_fixture, generate_population, generate_records, FixturePlan, SynthConfig};
use cdr_mobility::{GridSpec, Result};

pub fn run() -> Result<()> {
    let cfg = SynthConfig {
        n_users: 500,
        weeks: 2,
        call_rate: 6.0,
        fan_fraction: 0.3,
        p_attend: 0.9,
        match_calls: 3,
        ..SynthConfig::default()
    };
    let (registry, truth) = generate_population(&cfg)?;
    let plan = FixturePlan {
        n_matches: 1,
        ..FixturePlan::default()
    };
    let fixture = generate_fixture(&registry, &truth, &cfg, &plan)?;
    let (records, _) = generate_records(&registry, &truth, &fixture, &cfg)?;

    let event = &fixture.matches()[0];
    let zone = stadium_zone(&registry, event, 1.0)?;
    let spec = GridSpec::new(cfg.bbox, 0.02)?;
    let offsets = [-5, -1, 1, 3];
    let grids = convergence_grids(&records, &registry, event, &zone, spec, &offsets, cfg.utc_offset);
    let venue_cell = spec.cell(event.venue);
    for (h, g) in offsets.iter().zip(&grids) {
        let at_venue = venue_cell.map_or(0, |(r, c)| g.get(r, c));
        println!("{h:+}h: {} calls by attendees, {at_venue} in the venue cell", g.total());
    }
    Ok(())
}

fn main() -> Result<()> {
    run()
}
