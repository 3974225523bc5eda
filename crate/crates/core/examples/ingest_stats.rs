//! Streaming CDR ingest with a lenient policy, and dataset statistics.

use std::io::Cursor;
use std::path::Path;

use cdr_mobility::ingest::{read_antennas, CdrReader, ParsePolicy};
use cdr_mobility::{Result, UtcOffset};

const ANTENNAS: &str = "antenna_id,lat,lon\n1,-34.6037,-58.3816\n2,-34.6356,-58.3649\n";

const CDRS: &str = "\
timestamp,user_id,peer_id,direction,antenna_id
1330950000,10,11,OUT,1
1330950060,11,10,IN,2
1330953600,10,,OUT,2
not-a-number,10,,OUT,1
1331036400,12,,SIDEWAYS,1
1331036400,12,,IN,99
1331040000,12,,IN,1
";

pub fn run() -> Result<()> {
    let registry = read_antennas(Cursor::new(ANTENNAS), Path::new("antennas.csv"))?;
    let offset = UtcOffset::new(-3)?;

    let mut reader = CdrReader::from_reader(
        Cursor::new(CDRS),
        Path::new("cdrs.csv"),
        &registry,
        ParsePolicy::SkipAndCount,
        offset,
    )?;
    let records = reader.by_ref().collect::<Result<Vec<_>>>()?;
    let stats = reader.stats();
    println!("kept {} records, skipped {} malformed lines", records.len(), stats.malformed_count);
    println!("{} users between {:?}", stats.user_count, stats.time_range);
    for (day, n) in &stats.per_day_counts {
        println!("  local day {day}: {n} records");
    }

    let strict = CdrReader::from_reader(Cursor::new(CDRS), Path::new("cdrs.csv"), &registry, ParsePolicy::Strict, offset)?;
    match strict.collect::<Result<Vec<_>>>() {
        Ok(_) => println!("strict parse unexpectedly succeeded"),
        Err(e) => println!("strict policy stops at: {e}"),
    }
    Ok(())
}

fn main() -> Result<()> {
    run()
}
