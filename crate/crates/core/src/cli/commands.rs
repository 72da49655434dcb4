//! The four subcommands. Each writes its output to a caller-supplied sink so
//! tests can compare runs byte for byte.

use std::fmt::Write as _;
use std::io::Write;
use std::path::Path;
use std::time::Instant;

use super::config::RunConfig;
use super::report::{self, ReportRecord, SummaryContext};
use super::CliError;
use crate::entropy::{usable_entropy, EntropyInputs, EstimatorKind};
use crate::net::transport::Link;
use crate::net::{run_session, Network};
use crate::privamp::{gen_pa_params, golden_line, pa_hash, poly_for, Lineage, SUPPORTED_SIZES};
use crate::recon::{reconcile, shannon_limit, ReconProtocol};
use crate::rng::{derive_seed, XorShift64Star};

/// Runs every session a config asks for, prints the summary and writes the
/// block report.
pub fn simulate(
    config_path: &Path,
    out_path: Option<&Path>,
    seed_override: Option<u64>,
    out: &mut impl Write,
) -> Result<Vec<ReportRecord>, CliError> {
    let text = std::fs::read_to_string(config_path)
        .map_err(|e| CliError::Usage(format!("cannot read {}: {e}", config_path.display())))?;
    let mut cfg = RunConfig::parse(&text).map_err(|e| CliError::Usage(format!("{}: {e}", config_path.display())))?;
    if let Some(seed) = seed_override {
        cfg.pipeline.seed = seed;
    }
    let report_path = out_path
        .map(Path::to_path_buf)
        .or_else(|| cfg.output.as_ref().map(|p| config_path.parent().unwrap_or(Path::new("")).join(p)));

    let mut net = Network::new(cfg.topology.clone());
    if net.topology.switch().is_some() && !net.topology.switch().is_some_and(|s| s.connected(&cfg.tx, &cfg.rx)) {
        net.switch_set(&cfg.tx, &cfg.rx).map_err(|e| CliError::Usage(e.to_string()))?;
    }
    match &cfg.auth {
        Some(a) => net
            .preplace_auth(&cfg.tx, &cfg.rx, a.bits, a.key_seed)
            .map_err(|e| CliError::Usage(e.to_string()))?,
        None => writeln!(out, "warning: lab mode, public channel is NOT authenticated")?,
    }

    let mut records = Vec::new();
    for _ in 0..cfg.sessions {
        let session = run_session(&mut net, &cfg.tx, &cfg.rx, &cfg.pipeline, cfg.pulses).map_err(CliError::Session)?;
        records.extend(session.records.into_iter().map(|block| ReportRecord {
            fingerprint: cfg.fingerprint,
            tx: cfg.tx.clone(),
            rx: cfg.rx.clone(),
            block,
        }));
    }

    let ctx = SummaryContext {
        tx: cfg.tx.clone(),
        rx: cfg.rx.clone(),
        estimator: cfg.pipeline.estimator,
        fingerprint: cfg.fingerprint,
    };
    writeln!(out, "simulate")?;
    write!(out, "{}", report::render_summary(&ctx, &records))?;
    if let Some(path) = report_path {
        std::fs::write(&path, report::write_report(&records))
            .map_err(|e| CliError::Usage(format!("cannot write {}: {e}", path.display())))?;
        writeln!(out, "  {:<24}{}", "report", path.display())?;
    }
    Ok(records)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BenchArgs {
    pub block_size: usize,
    pub error_rate: f64,
    pub blocks: usize,
    pub seed: u64,
    pub timing: bool,
}

/// Per-protocol means over all benchmark blocks.
#[derive(Debug, Clone, PartialEq)]
pub struct BenchRow {
    pub protocol: ReconProtocol,
    pub revealed: f64,
    pub percent_of_shannon: f64,
    pub round_trips: f64,
    pub bytes: f64,
    pub failures: usize,
    pub cpu_s_per_mbit: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchTable {
    pub shannon: f64,
    pub rows: Vec<BenchRow>,
}

/// Blocks with exactly `round(rate * size)` planted errors, shared by both
/// protocols.
fn planted_blocks(args: &BenchArgs) -> Vec<(Vec<u8>, Vec<u8>)> {
    let flips = (args.error_rate * args.block_size as f64).round() as usize;
    let mut g = XorShift64Star::new(derive_seed(args.seed, 0xBE));
    (0..args.blocks)
        .map(|_| {
            let a = g.bits(args.block_size);
            let mut b = a.clone();
            for &i in &g.permutation(args.block_size)[..flips] {
                b[i] ^= 1;
            }
            (a, b)
        })
        .collect()
}

pub fn recon_bench(args: &BenchArgs, out: &mut impl Write) -> Result<BenchTable, CliError> {
    if args.block_size == 0 || args.blocks == 0 {
        return Err(CliError::Usage("block size and block count must be positive".into()));
    }
    if !(0.0..0.5).contains(&args.error_rate) {
        return Err(CliError::Usage("error rate must lie in [0, 0.5)".into()));
    }
    let blocks = planted_blocks(args);
    let shannon = shannon_limit(args.error_rate, args.block_size);
    let mut rows = Vec::new();
    for protocol in [ReconProtocol::Cascade, ReconProtocol::Niagara] {
        let (mut d, mut rt, mut bytes, mut failures) = (0usize, 0usize, 0usize, 0usize);
        let started = Instant::now();
        for (i, (a, b)) in blocks.iter().enumerate() {
            let mut link = Link::plain(i as u32);
            let r = reconcile(protocol, a, b, args.error_rate, derive_seed(args.seed, i as u64), &mut link)
                .map_err(|e| CliError::Usage(e.to_string()))?;
            d += r.disclosed_bits_d;
            rt += r.round_trips;
            bytes += r.bytes_exchanged;
            failures += usize::from(r.failed || !r.agree());
        }
        let elapsed = started.elapsed().as_secs_f64();
        let k = blocks.len() as f64;
        let revealed = d as f64 / k;
        rows.push(BenchRow {
            protocol,
            revealed,
            percent_of_shannon: if shannon > 0.0 { 100.0 * revealed / shannon } else { f64::NAN },
            round_trips: rt as f64 / k,
            bytes: bytes as f64 / k,
            failures,
            cpu_s_per_mbit: args
                .timing
                .then(|| elapsed / (k * args.block_size as f64 / 1e6)),
        });
    }

    let mut o = String::new();
    let _ = writeln!(
        o,
        "recon-bench block_size={} error_rate={} blocks={} seed={}",
        args.block_size, args.error_rate, args.blocks, args.seed
    );
    let _ = writeln!(o, "shannon limit: {shannon:.1} bits");
    let _ = writeln!(
        o,
        "{:<10}{:>14}{:>12}{:>13}{:>12}{:>10}{:>14}",
        "protocol", "revealed bits", "% shannon", "round trips", "bytes", "failures", "cpu s/Mbit"
    );
    for r in &rows {
        let cpu = r.cpu_s_per_mbit.map_or_else(|| "-".to_string(), |c| format!("{c:.4}"));
        let pct = if r.percent_of_shannon.is_finite() {
            format!("{:.1}", r.percent_of_shannon)
        } else {
            "-".to_string()
        };
        let _ = writeln!(
            o,
            "{:<10}{:>14.1}{:>12}{:>13.2}{:>12.1}{:>10}{:>14}",
            r.protocol.to_string(),
            r.revealed,
            pct,
            r.round_trips,
            r.bytes,
            r.failures,
            cpu
        );
    }
    out.write_all(o.as_bytes())?;
    Ok(BenchTable { shannon, rows })
}

/// One estimator's row in the entropy table.
#[derive(Debug, Clone, PartialEq)]
pub struct EntropyRow {
    pub kind: EstimatorKind,
    pub t: Option<f64>,
    pub usable: u64,
}

pub fn entropy_rows(inputs: &EntropyInputs) -> Vec<EntropyRow> {
    EstimatorKind::ALL
        .iter()
        .map(|&kind| {
            let u = usable_entropy(kind, inputs);
            EntropyRow {
                kind,
                t: u.t,
                usable: u.bits,
            }
        })
        .collect()
}

fn write_entropy_table(o: &mut String, title: &str, i: &EntropyInputs) {
    let _ = writeln!(
        o,
        "{title}: b={} e={} n={} d={} r={} c={:e}",
        i.b, i.e, i.n, i.d, i.r, i.c
    );
    let _ = writeln!(o, "{:<16}{:>14}{:>10}", "estimator", "t", "usable");
    for row in entropy_rows(i) {
        let t = row.t.map_or_else(|| "undefined".to_string(), |t| format!("{t:.3}"));
        let _ = writeln!(o, "{:<16}{:>14}{:>10}", row.kind.name(), t, row.usable);
    }
}

pub fn entropy_table(inputs: &EntropyInputs, out: &mut impl Write) -> Result<Vec<EntropyRow>, CliError> {
    inputs.validate().map_err(|e| CliError::Usage(e.to_string()))?;
    let mut o = String::new();
    write_entropy_table(&mut o, "entropy-table", inputs);
    let sanity = EntropyInputs {
        e: 0,
        d: 0,
        r: 0.0,
        ..*inputs
    };
    o.push('\n');
    write_entropy_table(&mut o, "sanity (e=0, d=0, r=0)", &sanity);
    out.write_all(o.as_bytes())?;
    Ok(entropy_rows(inputs))
}

/// Golden privacy-amplification vectors with a zero addend.
pub fn pa_vectors(count: usize, n: usize, m: usize, seed: u64) -> Result<String, CliError> {
    if poly_for(n).is_none() {
        return Err(CliError::Usage(format!(
            "unsupported field size {n} (supported: {})",
            SUPPORTED_SIZES.map(|s| s.to_string()).join(", ")
        )));
    }
    if m == 0 || m > n {
        return Err(CliError::Usage(format!("need 0 < m <= n, got m = {m}")));
    }
    let mut g = XorShift64Star::new(seed);
    let mut o = String::new();
    let _ = writeln!(o, "# pa golden vectors: count={count} n={n} m={m} seed={seed}");
    let _ = writeln!(o, "# exps | multiplier | input | m | output  (hex, LSB-first, zero addend)");
    for i in 0..count {
        let mut params = gen_pa_params(n, m, &mut g).map_err(|e| CliError::Usage(e.to_string()))?;
        params.addend = vec![0; m];
        let input = g.bits(n);
        let lineage = Lineage {
            session_id: 0,
            block_id: i as u32,
        };
        let output = pa_hash(&params, &input, lineage).map_err(|e| CliError::Usage(e.to_string()))?;
        let _ = writeln!(o, "{}", golden_line(&params, &input, &output));
    }
    Ok(o)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::privamp::parse_golden_line;

    #[test]
    fn zero_error_bench_reveals_only_top_level_parities() {
        let args = BenchArgs {
            block_size: 4096,
            error_rate: 0.0,
            blocks: 10,
            seed: 3,
            timing: false,
        };
        let mut sink = Vec::new();
        let t = recon_bench(&args, &mut sink).unwrap();
        let cascade = &t.rows[0];
        assert_eq!(cascade.failures, 0);
        assert_eq!(cascade.revealed, 8.0);
        let niagara = &t.rows[1];
        assert_eq!(niagara.round_trips, 1.0);
        assert!(niagara.revealed > 0.0);
        let text = String::from_utf8(sink).unwrap();
        assert!(text.contains("cpu s/Mbit"));
    }

    #[test]
    fn entropy_table_bennett_row_is_b_at_zero_errors() {
        let i = EntropyInputs {
            b: 4096,
            e: 0,
            n: 8192,
            d: 0,
            r: 0.0,
            c: 1e-6,
        };
        let rows = entropy_table(&i, &mut Vec::new()).unwrap();
        assert_eq!(rows[0].t, Some(4096.0));
        assert_eq!(rows[0].usable, 4096);
    }

    #[test]
    fn disclosure_past_every_estimate_zeroes_the_usable_column() {
        let i = EntropyInputs {
            b: 4096,
            e: 123,
            n: 8192,
            d: 5000,
            r: 0.0,
            c: 1e-6,
        };
        assert!(entropy_rows(&i).iter().all(|r| r.usable == 0));
    }

    #[test]
    fn pa_vectors_check_and_repeat() {
        let a = pa_vectors(10, 64, 32, 7).unwrap();
        assert_eq!(a, pa_vectors(10, 64, 32, 7).unwrap());
        let lines: Vec<&str> = a.lines().filter(|l| !l.starts_with('#')).collect();
        assert_eq!(lines.len(), 10);
        assert!(lines.iter().all(|l| parse_golden_line(l).unwrap().check()));
        assert!(pa_vectors(0, 64, 32, 7).unwrap().lines().all(|l| l.starts_with('#')));
        assert!(pa_vectors(1, 100, 32, 7).is_err());
        assert!(pa_vectors(1, 64, 65, 7).is_err());
    }
}
