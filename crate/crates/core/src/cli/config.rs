//! Run configuration files.
//!
//! ```text
//! [run]
//! tx = anna                 # transmitter of the session pair
//! rx = bob
//! pulses = 10000000         # per session
//! sessions = 1
//! seed = 2005               # mandatory; QKDNET_SEED overrides it
//! output = anna-bob.tsv     # optional; --out overrides it
//!
//! [pipeline]
//! sift = classic            # classic | sarg
//! recon = cascade           # cascade | niagara
//! estimator = slutsky       # bennett | slutsky | myers-pearson | shor-preskill
//! confidence = 1e-4
//! nonrandomness = 0
//! block_bits = 4096
//! chunk_pulses = 262144
//! qber_weight = 0.25
//! auth_bootstrap_bits = 1048576   # per direction; 0 runs unauthenticated
//! auth_key_seed = 42
//!
//! [node.anna]
//! role = transmitter        # transmitter | receiver
//! preset = anna-bob         # device values; any of them may be overridden:
//! mu = 0.5                  #   mu, pulse_rate_hz (transmitters)
//!                           #   detector_qe, dark_count_prob,
//!                           #   visibility_error (receivers)
//! [link.campus]             # a dedicated fiber
//! tx = anna
//! rx = bob
//! attenuation_db = 5.1
//!
//! [switch]                  # the 2x2 switch: node:leg_db pairs
//! inputs = alice:0.0, anna:5.1
//! outputs = bob:0.0, boris:11.5
//! couple = anna:bob         # optional initial coupling
//! ```
//!
//! Only one of `[link.*]` or `[switch]` is needed to connect the pair.

use std::path::PathBuf;

use thiserror::Error;

use crate::ini::{Ini, IniError, Section};
use crate::net::{NodeRole, PipelineConfig, Topology, TopologyError};
use crate::qchan::{ChannelError, ChannelParams, PRESET_NAMES};
use crate::rng::fnv1a64;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ConfigError {
    #[error(transparent)]
    Ini(#[from] IniError),
    #[error(transparent)]
    Topology(#[from] TopologyError),
    #[error("{0}")]
    Invalid(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct AuthBootstrap {
    pub bits: usize,
    pub key_seed: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub topology: Topology,
    pub pipeline: PipelineConfig,
    /// `None` is lab mode: no authentication, insecure.
    pub auth: Option<AuthBootstrap>,
    pub tx: String,
    pub rx: String,
    pub pulses: u64,
    pub sessions: u32,
    pub output: Option<PathBuf>,
    /// FNV-1a of the configuration text.
    pub fingerprint: u64,
}

const RUN_KEYS: &[&str] = &["tx", "rx", "pulses", "sessions", "seed", "output"];
const PIPELINE_KEYS: &[&str] = &[
    "sift",
    "recon",
    "estimator",
    "confidence",
    "nonrandomness",
    "block_bits",
    "chunk_pulses",
    "qber_weight",
    "auth_bootstrap_bits",
    "auth_key_seed",
];
const NODE_KEYS: &[&str] = &[
    "role",
    "preset",
    "mu",
    "pulse_rate_hz",
    "detector_qe",
    "dark_count_prob",
    "visibility_error",
];

fn channel_err(section: &Section, key: &str, e: ChannelError) -> ConfigError {
    match e {
        ChannelError::Ini(i) => i.into(),
        other => section.field_error(key, other.to_string()).into(),
    }
}

fn parse_node(s: &Section) -> Result<(NodeRole, ChannelParams), ConfigError> {
    s.check_keys(NODE_KEYS)?;
    let role: NodeRole = s.require("role")?;
    let preset: String = s.require("preset")?;
    let mut device = ChannelParams::preset(&preset, 0).map_err(|_| {
        s.field_error(
            "preset",
            format!("unknown preset `{preset}` (known: {})", PRESET_NAMES.join(", ")),
        )
    })?;
    let fields: [(&str, &mut f64); 5] = [
        ("mu", &mut device.mu),
        ("pulse_rate_hz", &mut device.pulse_rate_hz),
        ("detector_qe", &mut device.detector_qe),
        ("dark_count_prob", &mut device.dark_count_prob),
        ("visibility_error", &mut device.visibility_error),
    ];
    let mut last = "preset";
    for (key, slot) in fields {
        if let Some(v) = s.get::<f64>(key)? {
            *slot = v;
            last = key;
        }
    }
    device.validate().map_err(|e| channel_err(s, last, e))?;
    Ok((role, device))
}

/// Parses `a:1.5, b:0` into name and loss pairs.
fn parse_ports(s: &Section, key: &str) -> Result<Vec<(String, f64)>, ConfigError> {
    let raw: String = s.require(key)?;
    raw.split(',')
        .map(|item| {
            let (n, db) = item
                .split_once(':')
                .ok_or_else(|| s.field_error(key, format!("expected name:loss_db, got `{}`", item.trim())))?;
            let db: f64 = db
                .trim()
                .parse()
                .map_err(|_| s.field_error(key, format!("bad loss `{}`", db.trim())))?;
            Ok((n.trim().to_string(), db))
        })
        .collect()
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let ini = Ini::parse(text)?;
        for s in &ini.sections {
            if s.name.is_empty() {
                if let Some(e) = s.entries.first() {
                    return Err(IniError::Syntax {
                        line: e.line,
                        msg: format!("`{}` appears before any section", e.key),
                    }
                    .into());
                }
                continue;
            }
            let known = matches!(s.name.as_str(), "run" | "pipeline" | "switch")
                || s.name.starts_with("node.")
                || s.name.starts_with("link.");
            if !known {
                return Err(IniError::Syntax {
                    line: s.line,
                    msg: format!("unknown section `[{}]`", s.name),
                }
                .into());
            }
        }

        let mut topology = Topology::new();
        for (name, s) in ini.sections_with_prefix("node.") {
            let (role, device) = parse_node(s)?;
            topology
                .add_node(name, role, device)
                .map_err(|e| s.field_error("role", e.to_string()))?;
        }
        for (_, s) in ini.sections_with_prefix("link.") {
            s.check_keys(&["tx", "rx", "attenuation_db"])?;
            let tx: String = s.require("tx")?;
            let rx: String = s.require("rx")?;
            let db: f64 = s.require("attenuation_db")?;
            topology
                .add_link(&tx, &rx, db)
                .map_err(|e| s.field_error("tx", e.to_string()))?;
        }
        if let Some(s) = ini.section("switch") {
            s.check_keys(&["inputs", "outputs", "couple"])?;
            let inputs = parse_ports(s, "inputs")?;
            let outputs = parse_ports(s, "outputs")?;
            let (Ok(i), Ok(o)) = (<[_; 2]>::try_from(inputs), <[_; 2]>::try_from(outputs)) else {
                return Err(s.field_error("inputs", "the switch has exactly two inputs and two outputs").into());
            };
            topology
                .set_switch(
                    [(&i[0].0, i[0].1), (&i[1].0, i[1].1)],
                    [(&o[0].0, o[0].1), (&o[1].0, o[1].1)],
                )
                .map_err(|e| s.field_error("inputs", e.to_string()))?;
            if let Some(c) = s.get_str("couple") {
                let (tx, rx) = c
                    .split_once(':')
                    .ok_or_else(|| s.field_error("couple", "expected transmitter:receiver"))?;
                topology
                    .switch_set(tx.trim(), rx.trim())
                    .map_err(|e| s.field_error("couple", e.to_string()))?;
            }
        }

        let run = ini.require_section("run")?;
        run.check_keys(RUN_KEYS)?;
        let tx: String = run.require("tx")?;
        let rx: String = run.require("rx")?;
        topology
            .path_loss_db(&tx, &rx)
            .map_err(|e| run.field_error("tx", e.to_string()))?;
        let pulses: u64 = run.require("pulses")?;
        let sessions: u32 = run.get("sessions")?.unwrap_or(1);
        if sessions == 0 {
            return Err(run.field_error("sessions", "must be at least 1").into());
        }
        let seed: u64 = run.require("seed")?;
        let output = run.get_str("output").map(PathBuf::from);

        let mut pipeline = PipelineConfig {
            seed,
            ..PipelineConfig::default()
        };
        let mut auth = Some(AuthBootstrap {
            bits: 1 << 20,
            key_seed: 0,
        });
        if let Some(p) = ini.section("pipeline") {
            p.check_keys(PIPELINE_KEYS)?;
            if let Some(v) = p.get("sift")? {
                pipeline.sift = v;
            }
            if let Some(v) = p.get("recon")? {
                pipeline.recon = v;
            }
            if let Some(v) = p.get("estimator")? {
                pipeline.estimator = v;
            }
            if let Some(v) = p.get("confidence")? {
                pipeline.confidence = v;
            }
            if let Some(v) = p.get("nonrandomness")? {
                pipeline.nonrandomness = v;
            }
            if let Some(v) = p.get("block_bits")? {
                pipeline.block_bits = v;
            }
            if let Some(v) = p.get("chunk_pulses")? {
                pipeline.chunk_pulses = v;
            }
            if let Some(v) = p.get("qber_weight")? {
                pipeline.qber_weight = v;
            }
            let bits: usize = p.get("auth_bootstrap_bits")?.unwrap_or(1 << 20);
            let key_seed: u64 = p.get("auth_key_seed")?.unwrap_or(0);
            auth = (bits > 0).then_some(AuthBootstrap { bits, key_seed });
            pipeline
                .validate()
                .map_err(|e| ConfigError::Invalid(format!("[pipeline] {e}")))?;
        }

        Ok(Self {
            topology,
            pipeline,
            auth,
            tx,
            rx,
            pulses,
            sessions,
            output,
            fingerprint: fnv1a64(text.as_bytes()),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = "\
[run]
tx = anna
rx = bob
pulses = 1000
seed = 5

[node.anna]
role = transmitter
preset = anna-bob

[node.bob]
role = receiver
preset = anna-bob

[link.fiber]
tx = anna
rx = bob
attenuation_db = 5.1
";

    #[test]
    fn minimal_config_uses_defaults() {
        let c = RunConfig::parse(MINIMAL).unwrap();
        assert_eq!(c.pipeline.seed, 5);
        assert_eq!(c.pipeline.block_bits, 4096);
        assert_eq!(c.sessions, 1);
        assert_eq!(c.auth.as_ref().unwrap().bits, 1 << 20);
        assert_eq!(
            c.topology.path_params("anna", "bob", 0).unwrap(),
            ChannelParams::preset("anna-bob", 0).unwrap()
        );
    }

    #[test]
    fn overrides_and_switch() {
        let text = "\
[run]
tx = anna
rx = boris
pulses = 10
seed = 1
[pipeline]
recon = niagara
estimator = shor-preskill
auth_bootstrap_bits = 0
[node.anna]
role = transmitter
preset = anna-bob
mu = 0.25
[node.alice]
role = transmitter
preset = boris-bob
[node.bob]
role = receiver
preset = anna-bob
[node.boris]
role = receiver
preset = boris-bob
[switch]
inputs = alice:0, anna:5.1
outputs = bob:0, boris:11.5
couple = anna:boris
";
        let c = RunConfig::parse(text).unwrap();
        assert!(c.auth.is_none());
        let p = c.topology.path_params("anna", "boris", 0).unwrap();
        assert_eq!(p.mu, 0.25);
        assert!((p.attenuation_db - 16.6).abs() < 1e-12);
        assert_eq!(p.detector_qe, 0.10);
    }

    #[test]
    fn errors_name_the_line_and_field() {
        let cases = [
            (MINIMAL.replace("seed = 5\n", ""), "run.seed"),
            (MINIMAL.replace("pulses = 1000", "pulses = lots"), "line 4"),
            (MINIMAL.replace("preset = anna-bob\n\n[node.bob]", "preset = nowhere\n\n[node.bob]"), "unknown preset"),
            (MINIMAL.replace("attenuation_db = 5.1", "attenuation_db = 5.1\ncolour = red"), "unknown field"),
            (MINIMAL.replace("rx = bob\npulses", "rx = anna\npulses"), "receiver"),
            (format!("{MINIMAL}[extra]\n"), "unknown section"),
            (format!("{MINIMAL}[pipeline]\nconfidence = 2\n"), "confidence"),
        ];
        for (text, needle) in cases {
            let err = RunConfig::parse(&text).unwrap_err().to_string();
            assert!(err.contains(needle), "{err:?} should mention {needle:?}");
        }
    }

    #[test]
    fn fingerprint_tracks_the_text() {
        let a = RunConfig::parse(MINIMAL).unwrap();
        let b = RunConfig::parse(&MINIMAL.replace("seed = 5", "seed = 6")).unwrap();
        assert_ne!(a.fingerprint, b.fingerprint);
    }
}
