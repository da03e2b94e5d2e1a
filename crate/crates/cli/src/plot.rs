//! Plot data as long-format CSV: `x,series,value`.

use std::io::{self, Write};

use pmcal::sim::ScenarioRow;
use pmcal::theory::BoundCurve;

/// One row per grid point; undefined points get an empty `value`.
pub fn write_curves(out: impl Write, curves: &[BoundCurve]) -> io::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["x", "series", "value"])?;
    for c in curves {
        for ((x, v), m) in c.grid.iter().zip(&c.values).zip(&c.mask) {
            let value = if *m { v.to_string() } else { String::new() };
            w.write_record([x.to_string(), c.name.clone(), value])?;
        }
    }
    w.flush()
}

/// Scenario table with `x = p_star`, series `mean_ratio` and, when known,
/// `expected_ratio`.
pub fn write_scenario_table(out: impl Write, scenario: &str, rows: &[ScenarioRow]) -> io::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["x", "series", "value"])?;
    for r in rows {
        let x = r.p_star.to_string();
        w.write_record([&x, &format!("{scenario}:mean_ratio"), &r.mean_ratio.to_string()])?;
        if let Some(e) = r.expected_ratio {
            w.write_record([&x, &format!("{scenario}:expected_ratio"), &e.to_string()])?;
        }
    }
    w.flush()
}
