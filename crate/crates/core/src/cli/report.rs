//! Line-delimited block reports and the summary printed from them.
//!
//! The first line names the tab-separated fields; every following line is one
//! block. Floats are written in shortest round-trip form, so a report parses
//! back to exactly the records that produced it.

use std::fmt::Write as _;

use crate::entropy::EstimatorKind;
use crate::net::{BlockOutcome, BlockRecord, SessionStats};

pub const FIELDS: &[&str] = &[
    "fingerprint",
    "tx",
    "rx",
    "session_id",
    "block_id",
    "outcome",
    "pulses",
    "detections",
    "sifted_bits",
    "wall_time",
    "qber_estimate",
    "b",
    "e",
    "d",
    "round_trips",
    "bytes",
    "t_bennett",
    "t_slutsky",
    "t_myers_pearson",
    "t_shor_preskill",
    "usable_bennett",
    "usable_slutsky",
    "usable_myers_pearson",
    "usable_shor_preskill",
    "secret_bits",
    "auth_spent",
    "auth_bits",
    "app_bits",
];

#[derive(Debug, Clone, PartialEq)]
pub struct ReportRecord {
    pub fingerprint: u64,
    pub tx: String,
    pub rx: String,
    pub block: BlockRecord,
}

pub fn header() -> String {
    FIELDS.join("\t")
}

pub fn format_record(r: &ReportRecord) -> String {
    let b = &r.block;
    let t = |v: Option<f64>| v.map_or_else(|| "undefined".to_string(), |x| x.to_string());
    let mut cols: Vec<String> = vec![
        format!("{:016x}", r.fingerprint),
        r.tx.clone(),
        r.rx.clone(),
        b.session_id.to_string(),
        b.block_id.to_string(),
        b.outcome.name().to_string(),
        b.pulses.to_string(),
        b.detections.to_string(),
        b.sifted_bits.to_string(),
        b.wall_time.to_string(),
        b.qber_estimate.to_string(),
        b.b.to_string(),
        b.e.to_string(),
        b.d.to_string(),
        b.round_trips.to_string(),
        b.bytes.to_string(),
    ];
    cols.extend(b.t.iter().map(|v| t(*v)));
    cols.extend(b.usable.iter().map(u64::to_string));
    cols.extend([b.secret_bits, b.auth_spent, b.auth_bits, b.app_bits].map(|v| v.to_string()));
    cols.join("\t")
}

pub fn write_report(records: &[ReportRecord]) -> String {
    let mut out = header();
    out.push('\n');
    for r in records {
        out.push_str(&format_record(r));
        out.push('\n');
    }
    out
}

pub fn parse_report(text: &str) -> Result<Vec<ReportRecord>, String> {
    let mut lines = text.lines().enumerate();
    let (_, head) = lines.next().ok_or("empty report")?;
    if head != header() {
        return Err("report header does not match this version".into());
    }
    let mut out = Vec::new();
    for (i, line) in lines {
        let at = |what: &str| format!("line {}: {what}", i + 1);
        let cols: Vec<&str> = line.split('\t').collect();
        if cols.len() != FIELDS.len() {
            return Err(at(&format!("expected {} fields, found {}", FIELDS.len(), cols.len())));
        }
        let mut it = cols.into_iter();
        let mut next = || it.next().expect("length checked");
        macro_rules! num {
            () => {
                next().parse().map_err(|_| at("bad number"))?
            };
        }
        let fingerprint = u64::from_str_radix(next(), 16).map_err(|_| at("bad fingerprint"))?;
        let tx = next().to_string();
        let rx = next().to_string();
        let session_id = num!();
        let block_id = num!();
        let outcome: BlockOutcome = next().parse().map_err(|e: String| at(&e))?;
        let mut block = BlockRecord {
            session_id,
            block_id,
            outcome,
            pulses: num!(),
            detections: num!(),
            sifted_bits: num!(),
            wall_time: num!(),
            qber_estimate: num!(),
            b: num!(),
            e: num!(),
            d: num!(),
            round_trips: num!(),
            bytes: num!(),
            t: [None; 4],
            usable: [0; 4],
            secret_bits: 0,
            auth_spent: 0,
            auth_bits: 0,
            app_bits: 0,
        };
        for k in 0..4 {
            let v = next();
            block.t[k] = if v == "undefined" {
                None
            } else {
                Some(v.parse().map_err(|_| at("bad estimate"))?)
            };
        }
        for k in 0..4 {
            block.usable[k] = num!();
        }
        block.secret_bits = num!();
        block.auth_spent = num!();
        block.auth_bits = num!();
        block.app_bits = num!();
        out.push(ReportRecord {
            fingerprint,
            tx,
            rx,
            block,
        });
    }
    Ok(out)
}

/// Everything the summary needs besides the records themselves.
#[derive(Debug, Clone, PartialEq)]
pub struct SummaryContext {
    pub tx: String,
    pub rx: String,
    pub estimator: EstimatorKind,
    pub fingerprint: u64,
}

pub fn render_summary(ctx: &SummaryContext, records: &[ReportRecord]) -> String {
    let blocks: Vec<BlockRecord> = records.iter().map(|r| r.block.clone()).collect();
    let s = SessionStats::from_records(&blocks);
    let sessions = {
        let mut ids: Vec<u32> = blocks.iter().map(|b| b.session_id).collect();
        ids.dedup();
        ids.len()
    };
    let mut o = String::new();
    let mut row = |label: &str, value: String| {
        let _ = writeln!(o, "  {label:<24}{value}");
    };
    row("link", format!("{} -> {}", ctx.tx, ctx.rx));
    row("config", format!("{:016x}", ctx.fingerprint));
    row("sessions", sessions.to_string());
    row("pulses", s.pulses_sent.to_string());
    row("simulated time", format!("{:.6} s", s.wall_time));
    row("detections", s.detections.to_string());
    row("sifted bits", format!("{} ({:.1} bits/s)", s.sifted_bits, s.sifted_rate()));
    row(
        "blocks",
        format!(
            "{} reconciled, {} failed, {} amplified",
            s.blocks_reconciled, s.blocks_failed, s.blocks_amplified
        ),
    );
    row("measured QBER", format!("{:.6}", s.qber_measured));
    row("disclosed bits", s.disclosed_d.to_string());
    row("round trips", s.round_trips.to_string());
    row("bytes exchanged", s.bytes_exchanged.to_string());
    for (k, t) in EstimatorKind::ALL.iter().zip(s.t_estimates) {
        let mark = if *k == ctx.estimator { "  (chosen)" } else { "" };
        let value = t.map_or_else(|| "undefined".to_string(), |t| format!("{t:.3}"));
        row(&format!("mean t {}", k.name()), format!("{value}{mark}"));
    }
    row(
        "secret bits",
        format!("{} ({:.1} bits/s)", s.secret_bits_out, s.secret_rate()),
    );
    row("auth key spent", s.auth_bits_spent.to_string());
    row("auth replenished", s.auth_bits_replenished.to_string());
    row("application bits", s.app_bits.to_string());
    o
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> ReportRecord {
        ReportRecord {
            fingerprint: 0xDEAD_BEEF,
            tx: "anna".into(),
            rx: "bob".into(),
            block: BlockRecord {
                session_id: 1,
                block_id: 3,
                outcome: BlockOutcome::Amplified,
                pulses: 262144,
                detections: 6000,
                sifted_bits: 3000,
                wall_time: 262144.0 / 3.3e6,
                qber_estimate: 0.1 + 0.2,
                b: 4096,
                e: 120,
                d: 950,
                round_trips: 37,
                bytes: 6000,
                t: [Some(3500.5), None, Some(1.0 / 3.0), Some(2900.0)],
                usable: [2550, 0, 0, 1950],
                secret_bits: 0,
                auth_spent: 9000,
                auth_bits: 0,
                app_bits: 0,
            },
        }
    }

    #[test]
    fn records_round_trip_exactly() {
        let recs = vec![sample(), {
            let mut r = sample();
            r.block.outcome = BlockOutcome::Tail;
            r.block.block_id = 4;
            r
        }];
        let text = write_report(&recs);
        assert_eq!(text.lines().count(), 3);
        assert_eq!(parse_report(&text).unwrap(), recs);
    }

    #[test]
    fn malformed_reports_are_rejected() {
        assert!(parse_report("").is_err());
        assert!(parse_report("a\tb\n").is_err());
        let text = write_report(&[sample()]).replace("amplified", "bogus");
        assert!(parse_report(&text).unwrap_err().contains("line 2"));
    }
}
