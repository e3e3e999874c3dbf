//! Tick parsing and per-period bar aggregation.

use std::collections::BTreeMap;
use std::fmt;
use std::io::{Read, Write};
use std::path::Path;
use std::str::FromStr;

use chrono::{DateTime, Datelike, FixedOffset, NaiveDate, NaiveTime, TimeZone, Weekday};
use log::warn;
use rayon::prelude::*;

use crate::error::{Error, Result};

pub const TICK_HEADER: [&str; 9] =
    ["timestamp", "instrument", "kind", "price", "volume", "bid", "ask", "bid_size", "ask_size"];
pub const BAR_HEADER: [&str; 6] =
    ["instrument", "period_start", "trade_price", "trade_volume", "spread", "quote_imbalance"];

/// The four microstructure features, in state-signature layout order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Feature {
    Price,
    Spread,
    Volume,
    Imbalance,
}

impl Feature {
    pub const ALL: [Feature; 4] = [Feature::Price, Feature::Spread, Feature::Volume, Feature::Imbalance];

    pub fn index(self) -> usize {
        self as usize
    }
}

impl fmt::Display for Feature {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Feature::Price => "price",
            Feature::Spread => "spread",
            Feature::Volume => "volume",
            Feature::Imbalance => "imbalance",
        })
    }
}

impl FromStr for Feature {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "price" => Ok(Feature::Price),
            "spread" => Ok(Feature::Spread),
            "volume" => Ok(Feature::Volume),
            "imbalance" => Ok(Feature::Imbalance),
            _ => Err(format!("unknown feature `{s}`")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TickKind {
    Trade { price: f64, volume: f64 },
    Quote { bid: f64, ask: f64, bid_size: f64, ask_size: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct TickRecord {
    /// UTC nanoseconds since the epoch.
    pub timestamp: i64,
    pub instrument: String,
    pub kind: TickKind,
}

impl TickRecord {
    pub fn validate(&self) -> std::result::Result<(), String> {
        match self.kind {
            TickKind::Trade { price, volume } => {
                if !(price.is_finite() && price > 0.0) {
                    return Err(format!("trade price must be positive, got {price}"));
                }
                if !(volume.is_finite() && volume > 0.0) {
                    return Err(format!("trade volume must be positive, got {volume}"));
                }
            }
            TickKind::Quote { bid, ask, bid_size, ask_size } => {
                if !(bid.is_finite() && bid > 0.0 && ask.is_finite()) {
                    return Err(format!("quote bid must be positive, got {bid}"));
                }
                if ask < bid {
                    return Err(format!("crossed quote: ask {ask} < bid {bid}"));
                }
                if !(bid_size >= 0.0 && ask_size >= 0.0) {
                    return Err("quote sizes must be non-negative".into());
                }
            }
        }
        Ok(())
    }
}

fn parse_num(field: &str, name: &str, line: u64) -> Result<f64> {
    field.parse::<f64>().map_err(|_| Error::Parse { line, message: format!("non-numeric {name} `{field}`") })
}

/// Parses a tick CSV stream.
///
/// Records must be in non-decreasing timestamp order per instrument;
/// interleaving across instruments is free.
pub fn parse_ticks<R: Read>(input: R) -> Result<Vec<TickRecord>> {
    let mut rdr = csv::ReaderBuilder::new().flexible(true).from_reader(input);
    let header = rdr.headers()?.clone();
    if header.iter().ne(TICK_HEADER.iter().copied()) {
        return Err(Error::Parse { line: 1, message: format!("expected header `{}`", TICK_HEADER.join(",")) });
    }
    let mut last_seen: BTreeMap<String, i64> = BTreeMap::new();
    let mut out = Vec::new();
    for rec in rdr.records() {
        let rec = rec?;
        let line = rec.position().map_or(0, |p| p.line());
        if rec.len() != TICK_HEADER.len() {
            return Err(Error::Parse {
                line,
                message: format!("expected {} columns, got {}", TICK_HEADER.len(), rec.len()),
            });
        }
        let ts = DateTime::parse_from_rfc3339(&rec[0])
            .map_err(|e| Error::Parse { line, message: format!("bad timestamp `{}`: {e}", &rec[0]) })?;
        let timestamp =
            ts.timestamp_nanos_opt().ok_or_else(|| Error::Parse { line, message: "timestamp out of range".into() })?;
        let instrument = rec[1].to_string();
        if instrument.is_empty() {
            return Err(Error::Parse { line, message: "empty instrument".into() });
        }
        let (trade_fields, quote_fields) = (&[3usize, 4][..], &[5usize, 6, 7, 8][..]);
        let kind = match &rec[2] {
            "T" => {
                if quote_fields.iter().any(|&i| !rec[i].is_empty()) {
                    return Err(Error::Parse { line, message: "quote fields on a trade record".into() });
                }
                TickKind::Trade {
                    price: parse_num(&rec[3], "price", line)?,
                    volume: parse_num(&rec[4], "volume", line)?,
                }
            }
            "Q" => {
                if trade_fields.iter().any(|&i| !rec[i].is_empty()) {
                    return Err(Error::Parse { line, message: "trade fields on a quote record".into() });
                }
                TickKind::Quote {
                    bid: parse_num(&rec[5], "bid", line)?,
                    ask: parse_num(&rec[6], "ask", line)?,
                    bid_size: parse_num(&rec[7], "bid_size", line)?,
                    ask_size: parse_num(&rec[8], "ask_size", line)?,
                }
            }
            other => return Err(Error::Parse { line, message: format!("unknown kind `{other}`") }),
        };
        let tick = TickRecord { timestamp, instrument, kind };
        tick.validate().map_err(|message| Error::Parse { line, message })?;
        if let Some(&prev) = last_seen.get(&tick.instrument) {
            if timestamp < prev {
                return Err(Error::Ordering { line, instrument: tick.instrument });
            }
        }
        last_seen.insert(tick.instrument.clone(), timestamp);
        out.push(tick);
    }
    Ok(out)
}

fn fmt_num(v: f64) -> String {
    v.to_string()
}

/// Writes ticks in the bit-exact tick CSV schema, with timestamps rendered in `offset`.
pub fn write_ticks<W: Write>(w: W, ticks: &[TickRecord], offset: FixedOffset) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(TICK_HEADER)?;
    for t in ticks {
        let ts = offset.timestamp_nanos(t.timestamp).to_rfc3339();
        let rec: [String; 9] = match t.kind {
            TickKind::Trade { price, volume } => [
                ts,
                t.instrument.clone(),
                "T".into(),
                fmt_num(price),
                fmt_num(volume),
                String::new(),
                String::new(),
                String::new(),
                String::new(),
            ],
            TickKind::Quote { bid, ask, bid_size, ask_size } => [
                ts,
                t.instrument.clone(),
                "Q".into(),
                String::new(),
                String::new(),
                fmt_num(bid),
                fmt_num(ask),
                fmt_num(bid_size),
                fmt_num(ask_size),
            ],
        };
        out.write_record(&rec)?;
    }
    out.flush()?;
    Ok(())
}

/// Trading days, continuous-session hours and bar width.
#[derive(Debug, Clone, PartialEq)]
pub struct SessionCalendar {
    days: Vec<NaiveDate>,
    open: NaiveTime,
    close: NaiveTime,
    bar_minutes: u32,
    offset: FixedOffset,
}

impl SessionCalendar {
    pub fn new(
        mut days: Vec<NaiveDate>,
        open: NaiveTime,
        close: NaiveTime,
        bar_minutes: u32,
        offset: FixedOffset,
    ) -> Result<Self> {
        let bad = |key: &str, message: String| Err(Error::Config { key: key.into(), message });
        if ![5, 15, 30, 60].contains(&bar_minutes) {
            return bad("scale", format!("bar width {bar_minutes} not in {{5, 15, 30, 60}}"));
        }
        if open >= close {
            return bad("open", "session open must precede close".into());
        }
        let session = (close - open).num_minutes();
        if session % bar_minutes as i64 != 0 {
            return bad("scale", format!("session of {session} minutes is not divisible by {bar_minutes}"));
        }
        days.sort();
        days.dedup();
        if days.is_empty() {
            return bad("days", "no trading days".into());
        }
        Ok(Self { days, open, close, bar_minutes, offset })
    }

    /// Monday-to-Friday days in `[start, end]`.
    pub fn weekdays(start: NaiveDate, end: NaiveDate) -> Vec<NaiveDate> {
        start
            .iter_days()
            .take_while(|d| *d <= end)
            .filter(|d| !matches!(d.weekday(), Weekday::Sat | Weekday::Sun))
            .collect()
    }

    pub fn days(&self) -> &[NaiveDate] {
        &self.days
    }

    pub fn offset(&self) -> FixedOffset {
        self.offset
    }

    pub fn bar_minutes(&self) -> u32 {
        self.bar_minutes
    }

    pub fn open(&self) -> NaiveTime {
        self.open
    }

    pub fn periods_per_day(&self) -> usize {
        ((self.close - self.open).num_minutes() / self.bar_minutes as i64) as usize
    }

    pub fn n_periods(&self) -> usize {
        self.days.len() * self.periods_per_day()
    }

    pub fn period_start(&self, index: usize) -> DateTime<FixedOffset> {
        let ppd = self.periods_per_day();
        let day = self.days[index / ppd];
        let local = day.and_time(self.open) + chrono::Duration::minutes((index % ppd) as i64 * self.bar_minutes as i64);
        self.offset.from_local_datetime(&local).single().expect("fixed offsets are unambiguous")
    }

    pub fn period_starts(&self) -> Vec<DateTime<FixedOffset>> {
        (0..self.n_periods()).map(|i| self.period_start(i)).collect()
    }

    /// Period containing the UTC-nanosecond timestamp, or `None` outside the
    /// continuous session (auction prints, non-trading days).
    pub fn locate(&self, timestamp: i64) -> Option<usize> {
        let local = self.offset.timestamp_nanos(timestamp).naive_local();
        let day = self.days.binary_search(&local.date()).ok()?;
        let t = local.time();
        if t < self.open || t >= self.close {
            return None;
        }
        let minutes = (t - self.open).num_nanoseconds()? / 60_000_000_000;
        Some(day * self.periods_per_day() + (minutes / self.bar_minutes as i64) as usize)
    }

    /// Index of the trading day a period timestamp falls in.
    pub fn day_of(&self, t: &DateTime<FixedOffset>) -> Option<usize> {
        let local = t.with_timezone(&self.offset).date_naive();
        self.days.binary_search(&local).ok()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PeriodBar {
    pub instrument: String,
    pub period_index: usize,
    pub period_start: DateTime<FixedOffset>,
    /// Last trade price in the period (carried forward when there are no trades).
    pub trade_price: Option<f64>,
    pub trade_volume: f64,
    /// Mean quoted spread over the period's quotes.
    pub spread: Option<f64>,
    /// Mean of `bid_size / (bid_size + ask_size)` over the period's quotes.
    pub quote_imbalance: Option<f64>,
}

impl PeriodBar {
    pub fn feature(&self, f: Feature) -> Option<f64> {
        match f {
            Feature::Price => self.trade_price,
            Feature::Spread => self.spread,
            Feature::Volume => Some(self.trade_volume),
            Feature::Imbalance => self.quote_imbalance,
        }
    }
}

/// Bars on a full (instrument x period) grid.
#[derive(Debug, Clone, PartialEq)]
pub struct BarTable {
    pub periods: Vec<DateTime<FixedOffset>>,
    pub instruments: Vec<String>,
    /// `bars[instrument][period]`
    pub bars: Vec<Vec<PeriodBar>>,
}

#[derive(Debug, Clone, Default)]
struct Bucket {
    last_price: Option<f64>,
    volume: f64,
    spread_sum: f64,
    spread_n: u32,
    imbalance_sum: f64,
    imbalance_n: u32,
}

/// Streaming per-instrument fold over ordered ticks.
#[derive(Debug, Clone)]
pub struct Aggregator<'a> {
    cal: &'a SessionCalendar,
    buckets: BTreeMap<String, Vec<Bucket>>,
}

impl<'a> Aggregator<'a> {
    pub fn new(cal: &'a SessionCalendar) -> Self {
        Self { cal, buckets: BTreeMap::new() }
    }

    pub fn push(&mut self, tick: &TickRecord) {
        let Some(p) = self.cal.locate(tick.timestamp) else {
            return;
        };
        let n = self.cal.n_periods();
        let buckets = self.buckets.entry(tick.instrument.clone()).or_insert_with(|| vec![Bucket::default(); n]);
        let b = &mut buckets[p];
        match tick.kind {
            TickKind::Trade { price, volume } => {
                b.last_price = Some(price);
                b.volume += volume;
            }
            TickKind::Quote { bid, ask, bid_size, ask_size } => {
                b.spread_sum += ask - bid;
                b.spread_n += 1;
                let depth = bid_size + ask_size;
                if depth > 0.0 {
                    b.imbalance_sum += bid_size / depth;
                    b.imbalance_n += 1;
                }
            }
        }
    }

    pub fn extend<'t, I: IntoIterator<Item = &'t TickRecord>>(&mut self, ticks: I) {
        ticks.into_iter().for_each(|t| self.push(t));
    }

    pub fn finish(self) -> BarTable {
        let periods = self.cal.period_starts();
        let (instruments, bars): (Vec<_>, Vec<_>) = self
            .buckets
            .into_par_iter()
            .map(|(instrument, buckets)| {
                let bars = fill_forward(&instrument, &buckets, &periods);
                (instrument, bars)
            })
            .collect::<Vec<_>>()
            .into_iter()
            .unzip();
        BarTable { periods, instruments, bars }
    }
}

fn fill_forward(instrument: &str, buckets: &[Bucket], periods: &[DateTime<FixedOffset>]) -> Vec<PeriodBar> {
    let (mut price, mut spread, mut imbalance) = (None, None, None);
    buckets
        .iter()
        .zip(periods)
        .enumerate()
        .map(|(period_index, (b, start))| {
            price = b.last_price.or(price);
            if b.spread_n > 0 {
                spread = Some(b.spread_sum / b.spread_n as f64);
            }
            if b.imbalance_n > 0 {
                imbalance = Some(b.imbalance_sum / b.imbalance_n as f64);
            }
            PeriodBar {
                instrument: instrument.to_string(),
                period_index,
                period_start: *start,
                trade_price: price,
                trade_volume: b.volume,
                spread,
                quote_imbalance: imbalance,
            }
        })
        .collect()
}

/// Aggregates ordered ticks into one bar per (instrument, period).
///
/// Instruments with no ticks inside the calendar's sessions do not appear in
/// the output.
pub fn aggregate(ticks: &[TickRecord], cal: &SessionCalendar) -> BarTable {
    let mut agg = Aggregator::new(cal);
    let mut seen: BTreeMap<&str, bool> = BTreeMap::new();
    for t in ticks {
        let inside = cal.locate(t.timestamp).is_some();
        *seen.entry(&t.instrument).or_default() |= inside;
        agg.push(t);
    }
    for (instrument, inside) in seen {
        if !inside {
            warn!("dropping instrument {instrument}: no ticks inside the session calendar");
        }
    }
    agg.finish()
}

fn opt(v: Option<f64>) -> String {
    v.map(fmt_num).unwrap_or_default()
}

impl BarTable {
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(BAR_HEADER)?;
        for series in &self.bars {
            for b in series {
                out.write_record([
                    b.instrument.clone(),
                    b.period_start.to_rfc3339(),
                    opt(b.trade_price),
                    fmt_num(b.trade_volume),
                    opt(b.spread),
                    opt(b.quote_imbalance),
                ])?;
            }
        }
        out.flush()?;
        Ok(())
    }

    /// Reads a bar CSV; every instrument must cover the same period grid.
    pub fn read_csv<R: Read>(r: R) -> Result<Self> {
        let mut rdr = csv::Reader::from_reader(r);
        if rdr.headers()?.iter().ne(BAR_HEADER.iter().copied()) {
            return Err(Error::Parse { line: 1, message: format!("expected header `{}`", BAR_HEADER.join(",")) });
        }
        let mut by_instrument: BTreeMap<String, Vec<PeriodBar>> = BTreeMap::new();
        for rec in rdr.records() {
            let rec = rec?;
            let line = rec.position().map_or(0, |p| p.line());
            let field = |i: usize, name: &str| -> Result<Option<f64>> {
                if rec[i].is_empty() {
                    Ok(None)
                } else {
                    parse_num(&rec[i], name, line).map(Some)
                }
            };
            let period_start = DateTime::parse_from_rfc3339(&rec[1])
                .map_err(|e| Error::Parse { line, message: format!("bad period_start: {e}") })?;
            let bar = PeriodBar {
                instrument: rec[0].to_string(),
                period_index: 0,
                period_start,
                trade_price: field(2, "trade_price")?,
                trade_volume: field(3, "trade_volume")?.unwrap_or(0.0),
                spread: field(4, "spread")?,
                quote_imbalance: field(5, "quote_imbalance")?,
            };
            by_instrument.entry(bar.instrument.clone()).or_default().push(bar);
        }
        let mut instruments = Vec::new();
        let mut bars = Vec::new();
        let mut periods: Option<Vec<DateTime<FixedOffset>>> = None;
        for (instrument, mut series) in by_instrument {
            series.sort_by_key(|b| b.period_start);
            for (i, b) in series.iter_mut().enumerate() {
                b.period_index = i;
            }
            let grid: Vec<_> = series.iter().map(|b| b.period_start).collect();
            match &periods {
                None => periods = Some(grid),
                Some(p) if *p != grid => {
                    return Err(Error::Parse {
                        line: 0,
                        message: format!("instrument {instrument} does not cover the common period grid"),
                    })
                }
                Some(_) => {}
            }
            instruments.push(instrument);
            bars.push(series);
        }
        Ok(BarTable { periods: periods.unwrap_or_default(), instruments, bars })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        self.write_csv(std::io::BufWriter::new(std::fs::File::create(path)?))
    }

    pub fn load(path: &Path) -> Result<Self> {
        if !path.exists() {
            return Err(Error::MissingArtifact(path.to_path_buf()));
        }
        Self::read_csv(std::fs::File::open(path)?)
    }
}
