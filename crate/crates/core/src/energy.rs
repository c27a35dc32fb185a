//! Radio catalog and energy accounting.
//!
//! A transmission of `S` bits over a link of rate `B` lasts `S / B` seconds and costs
//! `P * S / B` millijoules at power `P` mW. Battery devices (sensors and mules) pay for what
//! they send and receive; the edge server is never charged. Transmissions use the uplink
//! rate and receptions the downlink rate.

use std::fmt;
use std::io::Write;
use std::ops::{Add, AddAssign};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Nominal radio parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WirelessTech {
    pub name: &'static str,
    /// mW
    pub tx_power: f64,
    /// mW
    pub rx_power: f64,
    /// bit/s
    pub uplink_rate: f64,
    /// bit/s
    pub downlink_rate: f64,
}

pub const FOUR_G: WirelessTech = WirelessTech {
    name: "4G",
    tx_power: 2100.0,
    rx_power: 2100.0,
    uplink_rate: 75e6,
    downlink_rate: 35e6,
};

pub const NB_IOT: WirelessTech = WirelessTech {
    name: "NB-IoT",
    tx_power: 199.0,
    rx_power: 199.52,
    uplink_rate: 0.2e6,
    downlink_rate: 0.2e6,
};

pub const IEEE_802_15_4: WirelessTech = WirelessTech {
    name: "IEEE 802.15.4",
    tx_power: 3.0,
    rx_power: 3.0,
    uplink_rate: 0.12e6,
    downlink_rate: 0.12e6,
};

pub const IEEE_802_11G: WirelessTech = WirelessTech {
    name: "IEEE 802.11g",
    tx_power: 1080.0,
    rx_power: 740.0,
    uplink_rate: 48e6,
    downlink_rate: 48e6,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Tech {
    FourG,
    NbIot,
    Ieee802154,
    Wifi,
}

impl Tech {
    pub const ALL: [Tech; 4] = [Tech::FourG, Tech::NbIot, Tech::Ieee802154, Tech::Wifi];

    pub fn profile(self) -> &'static WirelessTech {
        match self {
            Tech::FourG => &FOUR_G,
            Tech::NbIot => &NB_IOT,
            Tech::Ieee802154 => &IEEE_802_15_4,
            Tech::Wifi => &IEEE_802_11G,
        }
    }

    /// Short identifier used in configuration files and CSV output.
    pub fn key(self) -> &'static str {
        match self {
            Tech::FourG => "4g",
            Tech::NbIot => "nbiot",
            Tech::Ieee802154 => "802.15.4",
            Tech::Wifi => "wifi",
        }
    }
}

impl fmt::Display for Tech {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.key())
    }
}

impl FromStr for Tech {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "4g" | "lte" => Ok(Tech::FourG),
            "nbiot" | "nb-iot" => Ok(Tech::NbIot),
            "802.15.4" | "ieee802154" | "zigbee" => Ok(Tech::Ieee802154),
            "wifi" | "802.11g" | "ieee80211g" => Ok(Tech::Wifi),
            other => Err(Error::config(format!("unknown wireless technology `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Endpoint {
    Tx,
    Rx,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Link {
    Uplink,
    Downlink,
}

/// Seconds needed to move `bits` at `rate` bit/s.
pub fn transmission_time(bits: u64, rate: f64) -> f64 {
    bits as f64 / rate
}

/// Energy in mJ spent by one endpoint of a transmission (mW x s = mJ).
pub fn transmission_energy(bits: u64, tech: &WirelessTech, endpoint: Endpoint, link: Link) -> f64 {
    let power = match endpoint {
        Endpoint::Tx => tech.tx_power,
        Endpoint::Rx => tech.rx_power,
    };
    let rate = match link {
        Link::Uplink => tech.uplink_rate,
        Link::Downlink => tech.downlink_rate,
    };
    power * transmission_time(bits, rate)
}

/// Bits needed to ship one observation: 64 bits per feature, label not transmitted.
pub fn observation_bits(feature_dim: usize) -> u64 {
    64 * feature_dim as u64
}

/// Wire size of a model.
pub fn model_bits(model: &crate::learning::LinearModel) -> u64 {
    model.wire_bits()
}

pub const SCALAR_BITS: u64 = 64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum NodeKind {
    Sensor,
    Mule,
    EdgeServer,
}

impl NodeKind {
    /// Battery-powered nodes are the only ones charged.
    pub fn is_battery(self) -> bool {
        !matches!(self, NodeKind::EdgeServer)
    }

    pub fn key(self) -> &'static str {
        match self {
            NodeKind::Sensor => "sensor",
            NodeKind::Mule => "mule",
            NodeKind::EdgeServer => "edge",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct NodeId {
    pub kind: NodeKind,
    pub id: usize,
}

impl NodeId {
    pub fn sensor(id: usize) -> Self {
        NodeId { kind: NodeKind::Sensor, id }
    }
    pub fn mule(id: usize) -> Self {
        NodeId { kind: NodeKind::Mule, id }
    }
    pub fn edge(id: usize) -> Self {
        NodeId { kind: NodeKind::EdgeServer, id }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum PayloadKind {
    /// Raw observations; the count is carried for the log.
    Observations(usize),
    Model,
    ScalarIndex,
    CenterId,
}

impl PayloadKind {
    pub fn key(self) -> &'static str {
        match self {
            PayloadKind::Observations(_) => "observations",
            PayloadKind::Model => "model",
            PayloadKind::ScalarIndex => "index",
            PayloadKind::CenterId => "center_id",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Payload {
    pub kind: PayloadKind,
    pub bits: u64,
}

/// One physical hop.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MessageRecord {
    pub window: usize,
    pub src: NodeId,
    pub dst: NodeId,
    pub payload: Payload,
    pub tech: Tech,
}

impl MessageRecord {
    pub fn is_collection(&self) -> bool {
        self.src.kind == NodeKind::Sensor
    }
}

/// Accumulated energy per category, in mJ.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct EnergyLedger {
    pub collection_short_mj: f64,
    pub collection_long_mj: f64,
    pub learning_tx_mj: f64,
    pub learning_rx_mj: f64,
}

impl EnergyLedger {
    pub fn collection(&self) -> f64 {
        self.collection_short_mj + self.collection_long_mj
    }

    pub fn learning(&self) -> f64 {
        self.learning_tx_mj + self.learning_rx_mj
    }

    pub fn is_valid(&self) -> bool {
        [
            self.collection_short_mj,
            self.collection_long_mj,
            self.learning_tx_mj,
            self.learning_rx_mj,
        ]
        .iter()
        .all(|v| v.is_finite() && *v >= 0.0)
    }
}

impl Add for EnergyLedger {
    type Output = EnergyLedger;

    fn add(mut self, rhs: EnergyLedger) -> EnergyLedger {
        self += rhs;
        self
    }
}

impl AddAssign for EnergyLedger {
    fn add_assign(&mut self, rhs: EnergyLedger) {
        self.collection_short_mj += rhs.collection_short_mj;
        self.collection_long_mj += rhs.collection_long_mj;
        self.learning_tx_mj += rhs.learning_tx_mj;
        self.learning_rx_mj += rhs.learning_rx_mj;
    }
}

/// Energy attributed to each endpoint of one record.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Charge {
    pub tx_mj: f64,
    pub rx_mj: f64,
}

/// Energy the accounting policy attributes to `record`.
pub fn charge_for(record: &MessageRecord) -> Charge {
    let tech = record.tech.profile();
    let bits = record.payload.bits;
    let tx_mj = if record.src.kind.is_battery() {
        transmission_energy(bits, tech, Endpoint::Tx, Link::Uplink)
    } else {
        0.0
    };
    let rx_mj = if record.dst.kind.is_battery() {
        transmission_energy(bits, tech, Endpoint::Rx, Link::Downlink)
    } else {
        0.0
    };
    Charge { tx_mj, rx_mj }
}

/// Applies one record to the ledger and returns what was charged.
pub fn charge(ledger: &mut EnergyLedger, record: &MessageRecord) -> Charge {
    let c = charge_for(record);
    if record.is_collection() {
        match record.dst.kind {
            NodeKind::EdgeServer => ledger.collection_long_mj += c.tx_mj + c.rx_mj,
            _ => ledger.collection_short_mj += c.tx_mj + c.rx_mj,
        }
    } else {
        ledger.learning_tx_mj += c.tx_mj;
        ledger.learning_rx_mj += c.rx_mj;
    }
    c
}

/// `E_S = E_C + E_L`.
pub fn session_energy(ledger: &EnergyLedger) -> f64 {
    ledger.collection() + ledger.learning()
}

/// Replays a message log into a fresh ledger.
pub fn replay<'a>(records: impl IntoIterator<Item = &'a MessageRecord>) -> EnergyLedger {
    let mut ledger = EnergyLedger::default();
    for r in records {
        charge(&mut ledger, r);
    }
    ledger
}

/// Writes the log as CSV with columns
/// `window,src_id,src_kind,dst_id,dst_kind,payload_kind,bits,tech,mJ_tx,mJ_rx`.
pub fn write_message_log<W: Write>(records: &[MessageRecord], writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    let io = |e: csv::Error| Error::io("<message log>", std::io::Error::other(e));
    w.write_record([
        "window",
        "src_id",
        "src_kind",
        "dst_id",
        "dst_kind",
        "payload_kind",
        "bits",
        "tech",
        "mJ_tx",
        "mJ_rx",
    ])
    .map_err(io)?;
    for r in records {
        let c = charge_for(r);
        w.write_record([
            r.window.to_string(),
            r.src.id.to_string(),
            r.src.kind.key().to_string(),
            r.dst.id.to_string(),
            r.dst.kind.key().to_string(),
            r.payload.kind.key().to_string(),
            r.payload.bits.to_string(),
            r.tech.key().to_string(),
            c.tx_mj.to_string(),
            c.rx_mj.to_string(),
        ])
        .map_err(io)?;
    }
    w.flush().map_err(|e| Error::io("<message log>", e))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rec(src: NodeId, dst: NodeId, bits: u64, tech: Tech) -> MessageRecord {
        MessageRecord {
            window: 0,
            src,
            dst,
            payload: Payload { kind: PayloadKind::Model, bits },
            tech,
        }
    }

    #[test]
    fn times() {
        assert!((transmission_time(3456, 0.12e6) - 0.0288).abs() < 1e-15);
        assert_eq!(transmission_time(0, 1.0), 0.0);
        assert!((transmission_time(24_640, 75e6) - 3.2853e-4).abs() < 1e-8);
    }

    #[test]
    fn energies() {
        let e = transmission_energy(3456, &IEEE_802_15_4, Endpoint::Tx, Link::Uplink);
        assert!((e - 0.0864).abs() < 1e-12);
        let e = transmission_energy(3456, &NB_IOT, Endpoint::Tx, Link::Uplink);
        assert!((e - 3.43872).abs() < 1e-12);
        for t in Tech::ALL {
            assert_eq!(transmission_energy(0, t.profile(), Endpoint::Rx, Link::Downlink), 0.0);
        }
    }

    #[test]
    fn payload_sizes() {
        assert_eq!(observation_bits(54), 3456);
        assert_eq!(observation_bits(1), 64);
        assert!((10_000.0 * transmission_energy(observation_bits(54), &NB_IOT, Endpoint::Tx, Link::Uplink)
            - 34_387.2)
            .abs()
            < 1e-6);
    }

    #[test]
    fn charge_policy() {
        let mut l = EnergyLedger::default();
        charge(&mut l, &rec(NodeId::sensor(0), NodeId::mule(0), 3456, Tech::Ieee802154));
        assert!((l.collection_short_mj - 0.1728).abs() < 1e-12);
        charge(&mut l, &rec(NodeId::sensor(1), NodeId::edge(0), 3456, Tech::NbIot));
        assert!((l.collection_long_mj - 3.43872).abs() < 1e-12);
        charge(&mut l, &rec(NodeId::mule(0), NodeId::edge(0), 24_768, Tech::FourG));
        assert!((l.learning_tx_mj - 2100.0 * 24_768.0 / 75e6).abs() < 1e-12);
        assert!((l.learning_tx_mj - 0.6935).abs() < 1e-4);
        assert_eq!(l.learning_rx_mj, 0.0);
        charge(&mut l, &rec(NodeId::edge(0), NodeId::mule(1), 24_768, Tech::FourG));
        assert!((l.learning_rx_mj - 2100.0 * 24_768.0 / 35e6).abs() < 1e-12);
    }

    #[test]
    fn session_totals() {
        assert_eq!(session_energy(&EnergyLedger::default()), 0.0);
        let l = EnergyLedger {
            collection_short_mj: 1728.0,
            collection_long_mj: 0.0,
            learning_tx_mj: 338.0,
            learning_rx_mj: 0.0,
        };
        assert_eq!(session_energy(&l), 2066.0);
    }

    #[test]
    fn per_bit_tx_ordering_from_catalog() {
        let per_bit = |t: Tech| transmission_energy(1, t.profile(), Endpoint::Tx, Link::Uplink) * 1e6;
        // nJ per bit: NB-IoT 995, 4G 28, 802.15.4 25, 802.11g 22.5
        assert!((per_bit(Tech::NbIot) - 995.0).abs() < 1e-9);
        assert!((per_bit(Tech::FourG) - 28.0).abs() < 1e-9);
        assert!((per_bit(Tech::Ieee802154) - 25.0).abs() < 1e-9);
        assert!((per_bit(Tech::Wifi) - 22.5).abs() < 1e-9);
        let mut order = Tech::ALL.to_vec();
        order.sort_by(|a, b| per_bit(*b).total_cmp(&per_bit(*a)));
        assert_eq!(order, vec![Tech::NbIot, Tech::FourG, Tech::Ieee802154, Tech::Wifi]);
    }

    #[test]
    fn tech_parsing() {
        assert_eq!("WiFi".parse::<Tech>().unwrap(), Tech::Wifi);
        assert_eq!("4g".parse::<Tech>().unwrap(), Tech::FourG);
        assert!(matches!("5g".parse::<Tech>(), Err(Error::Config(_))));
    }

    #[test]
    fn message_log_csv() {
        let log = vec![rec(NodeId::sensor(3), NodeId::mule(1), 3456, Tech::Ieee802154)];
        let mut out = Vec::new();
        write_message_log(&log, &mut out).unwrap();
        let text = String::from_utf8(out).unwrap();
        let mut lines = text.lines();
        assert_eq!(
            lines.next().unwrap(),
            "window,src_id,src_kind,dst_id,dst_kind,payload_kind,bits,tech,mJ_tx,mJ_rx"
        );
        assert!(lines.next().unwrap().starts_with("0,3,sensor,1,mule,model,3456,802.15.4,0.0864"));
    }
}
