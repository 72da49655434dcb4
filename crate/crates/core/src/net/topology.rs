//! Nodes, fiber legs and the 2x2 optical switch.
//!
//! Every node carries the device half of a [`ChannelParams`]: a transmitter
//! contributes `mu` and `pulse_rate_hz`, a receiver contributes
//! `detector_qe`, `dark_count_prob` and `visibility_error`. A path's loss is
//! the sum of the fiber legs it crosses.

use std::collections::BTreeMap;

use thiserror::Error;

use crate::qchan::ChannelParams;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum NodeRole {
    Transmitter,
    Receiver,
}

impl std::str::FromStr for NodeRole {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "transmitter" | "tx" => Ok(NodeRole::Transmitter),
            "receiver" | "rx" => Ok(NodeRole::Receiver),
            _ => Err(format!("unknown node role `{s}` (expected transmitter or receiver)")),
        }
    }
}

impl std::fmt::Display for NodeRole {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            NodeRole::Transmitter => "transmitter",
            NodeRole::Receiver => "receiver",
        })
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TopologyError {
    #[error("unknown node `{0}`")]
    UnknownNode(String),
    #[error("duplicate node `{0}`")]
    DuplicateNode(String),
    #[error("`{node}` is a {actual}, expected a {expected}")]
    RoleMismatch {
        node: String,
        expected: NodeRole,
        actual: NodeRole,
    },
    #[error("`{0}` is not attached to the switch")]
    NotOnSwitch(String),
    #[error("switch needs two transmitter ports and two receiver ports")]
    BadSwitch,
    #[error("no path from `{0}` to `{1}`")]
    NoPath(String, String),
    #[error("invalid fiber loss {0} dB")]
    BadLoss(f64),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Node {
    pub name: String,
    pub role: NodeRole,
    pub device: ChannelParams,
}

/// A dedicated fiber between one transmitter and one receiver.
#[derive(Debug, Clone, PartialEq)]
pub struct FiberLink {
    pub tx: String,
    pub rx: String,
    pub attenuation_db: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SwitchState {
    /// Input 0 to output 0, input 1 to output 1.
    Bar,
    Cross,
}

/// Couples either of two transmitters to either of two receivers.
#[derive(Debug, Clone, PartialEq)]
pub struct Switch {
    pub inputs: [String; 2],
    pub outputs: [String; 2],
    /// Fiber loss between each attached node and the switch.
    pub legs_db: BTreeMap<String, f64>,
    pub state: SwitchState,
}

impl Switch {
    /// The receiver currently coupled to transmitter port `i`.
    pub fn output_for(&self, i: usize) -> &str {
        match self.state {
            SwitchState::Bar => &self.outputs[i],
            SwitchState::Cross => &self.outputs[1 - i],
        }
    }

    pub fn connected(&self, tx: &str, rx: &str) -> bool {
        self.inputs
            .iter()
            .position(|n| n == tx)
            .is_some_and(|i| self.output_for(i) == rx)
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Topology {
    nodes: BTreeMap<String, Node>,
    links: Vec<FiberLink>,
    switch: Option<Switch>,
}

impl Topology {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add_node(&mut self, name: &str, role: NodeRole, device: ChannelParams) -> Result<(), TopologyError> {
        if self.nodes.contains_key(name) {
            return Err(TopologyError::DuplicateNode(name.to_string()));
        }
        self.nodes.insert(
            name.to_string(),
            Node {
                name: name.to_string(),
                role,
                device,
            },
        );
        Ok(())
    }

    pub fn node(&self, name: &str) -> Result<&Node, TopologyError> {
        self.nodes
            .get(name)
            .ok_or_else(|| TopologyError::UnknownNode(name.to_string()))
    }

    pub fn nodes(&self) -> impl Iterator<Item = &Node> {
        self.nodes.values()
    }

    pub fn switch(&self) -> Option<&Switch> {
        self.switch.as_ref()
    }

    fn expect_role(&self, name: &str, role: NodeRole) -> Result<&Node, TopologyError> {
        let node = self.node(name)?;
        if node.role != role {
            return Err(TopologyError::RoleMismatch {
                node: name.to_string(),
                expected: role,
                actual: node.role,
            });
        }
        Ok(node)
    }

    pub fn add_link(&mut self, tx: &str, rx: &str, attenuation_db: f64) -> Result<(), TopologyError> {
        self.expect_role(tx, NodeRole::Transmitter)?;
        self.expect_role(rx, NodeRole::Receiver)?;
        if !(attenuation_db >= 0.0 && attenuation_db.is_finite()) {
            return Err(TopologyError::BadLoss(attenuation_db));
        }
        self.links.push(FiberLink {
            tx: tx.to_string(),
            rx: rx.to_string(),
            attenuation_db,
        });
        Ok(())
    }

    /// Installs the switch with its four legs, in the bar state.
    pub fn set_switch(
        &mut self,
        inputs: [(&str, f64); 2],
        outputs: [(&str, f64); 2],
    ) -> Result<(), TopologyError> {
        if inputs[0].0 == inputs[1].0 || outputs[0].0 == outputs[1].0 {
            return Err(TopologyError::BadSwitch);
        }
        let mut legs_db = BTreeMap::new();
        for (role, ports) in [(NodeRole::Transmitter, inputs), (NodeRole::Receiver, outputs)] {
            for (name, db) in ports {
                self.expect_role(name, role)?;
                if !(db >= 0.0 && db.is_finite()) {
                    return Err(TopologyError::BadLoss(db));
                }
                legs_db.insert(name.to_string(), db);
            }
        }
        self.switch = Some(Switch {
            inputs: inputs.map(|(n, _)| n.to_string()),
            outputs: outputs.map(|(n, _)| n.to_string()),
            legs_db,
            state: SwitchState::Bar,
        });
        Ok(())
    }

    /// Couples `tx` to `rx`; the other transmitter moves to the other
    /// receiver in the same step.
    pub fn switch_set(&mut self, tx: &str, rx: &str) -> Result<(), TopologyError> {
        self.expect_role(tx, NodeRole::Transmitter)?;
        self.expect_role(rx, NodeRole::Receiver)?;
        let sw = self.switch.as_mut().ok_or(TopologyError::BadSwitch)?;
        let i = sw
            .inputs
            .iter()
            .position(|n| n == tx)
            .ok_or_else(|| TopologyError::NotOnSwitch(tx.to_string()))?;
        let o = sw
            .outputs
            .iter()
            .position(|n| n == rx)
            .ok_or_else(|| TopologyError::NotOnSwitch(rx.to_string()))?;
        sw.state = if i == o { SwitchState::Bar } else { SwitchState::Cross };
        Ok(())
    }

    /// Loss between `tx` and `rx`: a dedicated fiber if one exists,
    /// otherwise the two switch legs when the switch couples them.
    pub fn path_loss_db(&self, tx: &str, rx: &str) -> Result<f64, TopologyError> {
        self.expect_role(tx, NodeRole::Transmitter)?;
        self.expect_role(rx, NodeRole::Receiver)?;
        if let Some(l) = self.links.iter().find(|l| l.tx == tx && l.rx == rx) {
            return Ok(l.attenuation_db);
        }
        match &self.switch {
            Some(sw) if sw.connected(tx, rx) => Ok(sw.legs_db[tx] + sw.legs_db[rx]),
            _ => Err(TopologyError::NoPath(tx.to_string(), rx.to_string())),
        }
    }

    /// Channel parameters of the current path from `tx` to `rx`.
    pub fn path_params(&self, tx: &str, rx: &str, rng_seed: u64) -> Result<ChannelParams, TopologyError> {
        let attenuation_db = self.path_loss_db(tx, rx)?;
        let (t, r) = (&self.node(tx)?.device, &self.node(rx)?.device);
        Ok(ChannelParams {
            mu: t.mu,
            pulse_rate_hz: t.pulse_rate_hz,
            attenuation_db,
            detector_qe: r.detector_qe,
            dark_count_prob: r.dark_count_prob,
            visibility_error: r.visibility_error,
            rng_seed,
        })
    }

    /// Two nodes connected through one fiber path with the given loss.
    pub fn pair(tx: &str, rx: &str, params: &ChannelParams) -> Self {
        let mut t = Self::new();
        t.add_node(tx, NodeRole::Transmitter, params.clone())
            .expect("fresh topology");
        t.add_node(rx, NodeRole::Receiver, params.clone())
            .expect("distinct names");
        t.add_link(tx, rx, params.attenuation_db)
            .expect("roles set above");
        t
    }

    /// The Cambridge network: Alice and Bob beside the switch, Anna on the
    /// 5.1 dB strand, Boris on the 11.5 dB strand. Anna and
    /// Bob use the anna-bob devices, Alice and Boris the boris-bob ones.
    pub fn cambridge() -> Self {
        let ab = ChannelParams::preset("anna-bob", 0).expect("built-in preset");
        let bb = ChannelParams::preset("boris-bob", 0).expect("built-in preset");
        let mut t = Self::new();
        for (name, role, device) in [
            ("alice", NodeRole::Transmitter, &bb),
            ("anna", NodeRole::Transmitter, &ab),
            ("bob", NodeRole::Receiver, &ab),
            ("boris", NodeRole::Receiver, &bb),
        ] {
            t.add_node(name, role, device.clone()).expect("distinct names");
        }
        t.set_switch([("alice", 0.0), ("anna", 5.1)], [("bob", 0.0), ("boris", 11.5)])
            .expect("valid ports");
        t
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn switch_composes_legs() {
        let mut t = Topology::cambridge();
        t.switch_set("anna", "bob").unwrap();
        assert!((t.path_loss_db("anna", "bob").unwrap() - 5.1).abs() < 1e-12);
        assert!((t.path_loss_db("alice", "boris").unwrap() - 11.5).abs() < 1e-12);
        assert!(t.path_loss_db("anna", "boris").is_err());
        t.switch_set("anna", "boris").unwrap();
        assert!((t.path_loss_db("anna", "boris").unwrap() - 16.6).abs() < 1e-12);
        assert!((t.path_loss_db("alice", "bob").unwrap() - 0.0).abs() < 1e-12);
        assert!(t.path_loss_db("anna", "bob").is_err());
    }

    #[test]
    fn legs_add_in_db() {
        let p = ChannelParams::preset("anna-bob", 0).unwrap();
        let mut t = Topology::new();
        for (n, r) in [("a", NodeRole::Transmitter), ("c", NodeRole::Transmitter)] {
            t.add_node(n, r, p.clone()).unwrap();
        }
        for n in ["b", "d"] {
            t.add_node(n, NodeRole::Receiver, p.clone()).unwrap();
        }
        t.set_switch([("a", 5.1), ("c", 1.0)], [("b", 0.2), ("d", 2.0)]).unwrap();
        assert!((t.path_loss_db("a", "b").unwrap() - 5.3).abs() < 1e-12);
    }

    #[test]
    fn cambridge_paths_reproduce_presets() {
        let mut t = Topology::cambridge();
        t.switch_set("anna", "bob").unwrap();
        assert_eq!(t.path_params("anna", "bob", 3).unwrap(), ChannelParams::preset("anna-bob", 3).unwrap());
        assert_eq!(t.path_params("alice", "boris", 3).unwrap(), ChannelParams::preset("boris-bob", 3).unwrap());
    }

    #[test]
    fn role_and_port_errors() {
        let mut t = Topology::cambridge();
        assert!(matches!(t.switch_set("bob", "anna"), Err(TopologyError::RoleMismatch { .. })));
        assert!(matches!(t.switch_set("anna", "alice"), Err(TopologyError::RoleMismatch { .. })));
        assert_eq!(t.switch_set("anna", "eve"), Err(TopologyError::UnknownNode("eve".into())));
        let before = t.clone();
        assert!(t.switch_set("bob", "boris").is_err());
        assert_eq!(t, before);
    }

    #[test]
    fn each_input_sees_exactly_one_output() {
        let mut t = Topology::cambridge();
        for (tx, rx) in [("anna", "bob"), ("anna", "boris"), ("alice", "bob"), ("alice", "boris")] {
            t.switch_set(tx, rx).unwrap();
            let sw = t.switch().unwrap();
            for i in 0..2 {
                let reachable = sw.outputs.iter().filter(|o| sw.connected(&sw.inputs[i], o)).count();
                assert_eq!(reachable, 1);
            }
            assert!(sw.connected(tx, rx));
        }
    }
}
