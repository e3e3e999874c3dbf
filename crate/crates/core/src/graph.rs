//! GEXF export of a cluster configuration as an undirected period graph.
//!
//! Each period is a node carrying its timestamp, a time-of-day bucket and its
//! cluster label; every pair of periods in the same cluster is joined by an
//! edge whose weight is their correlation, floored so that weakly correlated
//! members stay visible in renderers.

use std::fmt;
use std::io::Write;
use std::path::Path;

use chrono::{DateTime, FixedOffset, Timelike};

use crate::corr::CorrelationMatrix;
use crate::error::{Error, Result};
use crate::likelihood::ClusterConfiguration;

pub const MIN_EDGE_WEIGHT: f64 = 0.01;

/// Coarse session segment of a period start, in its local time.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TimeOfDay {
    /// Before 12:00.
    Morning,
    /// 12:00 up to 14:00.
    Lunch,
    /// 14:00 onwards.
    Afternoon,
}

impl TimeOfDay {
    pub fn of(t: &DateTime<FixedOffset>) -> Self {
        match t.hour() {
            h if h < 12 => TimeOfDay::Morning,
            12 | 13 => TimeOfDay::Lunch,
            _ => TimeOfDay::Afternoon,
        }
    }
}

impl fmt::Display for TimeOfDay {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            TimeOfDay::Morning => "morning",
            TimeOfDay::Lunch => "lunch",
            TimeOfDay::Afternoon => "afternoon",
        })
    }
}

pub fn edge_weight(c_ij: f64) -> f64 {
    c_ij.max(MIN_EDGE_WEIGHT)
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

/// Writes the graph as a GEXF 1.2 document.
pub fn write_gexf<W: Write>(
    mut w: W,
    s: &ClusterConfiguration,
    c: &CorrelationMatrix,
    periods: &[DateTime<FixedOffset>],
) -> Result<()> {
    let n = s.n();
    if c.n() != n {
        return Err(Error::DimensionMismatch { expected: n, actual: c.n() });
    }
    if periods.len() != n {
        return Err(Error::DimensionMismatch { expected: n, actual: periods.len() });
    }
    writeln!(w, r#"<?xml version="1.0" encoding="UTF-8"?>"#)?;
    writeln!(
        w,
        r#"<gexf xmlns="http://www.gexf.net/1.2draft" xmlns:xsi="http://www.w3.org/2001/XMLSchema-instance" xsi:schemaLocation="http://www.gexf.net/1.2draft http://www.gexf.net/1.2draft/gexf.xsd" version="1.2">"#
    )?;
    writeln!(w, "  <meta>")?;
    writeln!(w, "    <creator>mstate {}</creator>", env!("CARGO_PKG_VERSION"))?;
    writeln!(w, "    <description>temporal cluster configuration</description>")?;
    writeln!(w, "  </meta>")?;
    writeln!(w, r#"  <graph mode="static" defaultedgetype="undirected">"#)?;
    writeln!(w, r#"    <attributes class="node">"#)?;
    writeln!(w, r#"      <attribute id="0" title="timestamp" type="string"/>"#)?;
    writeln!(w, r#"      <attribute id="1" title="time_of_day" type="string"/>"#)?;
    writeln!(w, r#"      <attribute id="2" title="cluster" type="integer"/>"#)?;
    writeln!(w, "    </attributes>")?;
    writeln!(w, "    <nodes>")?;
    for (i, (t, label)) in periods.iter().zip(s.labels()).enumerate() {
        let ts = escape(&t.to_rfc3339());
        writeln!(w, r#"      <node id="{i}" label="{ts}">"#)?;
        writeln!(w, "        <attvalues>")?;
        writeln!(w, r#"          <attvalue for="0" value="{ts}"/>"#)?;
        writeln!(w, r#"          <attvalue for="1" value="{}"/>"#, TimeOfDay::of(t))?;
        writeln!(w, r#"          <attvalue for="2" value="{label}"/>"#)?;
        writeln!(w, "        </attvalues>")?;
        writeln!(w, "      </node>")?;
    }
    writeln!(w, "    </nodes>")?;
    writeln!(w, "    <edges>")?;
    let mut id = 0usize;
    for (_, members) in s.clusters() {
        for (a, &i) in members.iter().enumerate() {
            for &j in &members[a + 1..] {
                let weight = edge_weight(c.get(i, j));
                writeln!(w, r#"      <edge id="{id}" source="{i}" target="{j}" weight="{weight}"/>"#)?;
                id += 1;
            }
        }
    }
    writeln!(w, "    </edges>")?;
    writeln!(w, "  </graph>")?;
    writeln!(w, "</gexf>")?;
    Ok(())
}

pub fn save_gexf(
    path: &Path,
    s: &ClusterConfiguration,
    c: &CorrelationMatrix,
    periods: &[DateTime<FixedOffset>],
) -> Result<()> {
    let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
    write_gexf(&mut f, s, c, periods)?;
    f.flush()?;
    Ok(())
}
