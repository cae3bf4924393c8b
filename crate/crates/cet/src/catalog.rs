//! Signal catalog: 67 operational-technology and 11 information-technology
//! signals with role indices used by the simulator and attack builders.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SignalKind {
    Ot,
    It,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ValueKind {
    Continuous,
    Count,
    Binary,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SignalDef {
    pub id: usize,
    pub name: String,
    pub kind: SignalKind,
    pub unit: String,
    pub value_kind: ValueKind,
    /// Prominently displayed on the operator console; these are the
    /// default falsification targets.
    pub console_displayed: bool,
}

/// Well-known OT row indices.
pub mod ot {
    pub const POWER: usize = 0;
    pub const POOL_TEMP: usize = 1;
    pub const TRIP_BUTTON: usize = 2;
    pub const CH1_CPS: usize = 3;
    pub const CH1_RATE: usize = 4;
    pub const CH2_CPS: usize = 5;
    pub const CH3_CPS: usize = 6;
    pub const CH4_CPS: usize = 7;
    pub const ROD_FIRST: usize = 8; // four rod position rows 8..=11
    pub const PERIOD: usize = 12;
    pub const PUMP_ON: usize = 13;
    pub const ALARM_FIRST: usize = 14; // binary status rows 14..=19
    pub const AUX_FIRST: usize = 20; // continuous aux rows 20..=66
}

/// Well-known IT row indices.
pub mod it {
    pub const PACKET_RATE: usize = 0;
    pub const LATENCY: usize = 1;
    pub const CPU_UTIL: usize = 2;
    pub const MEM_UTIL: usize = 3;
    pub const BANDWIDTH: usize = 4;
    pub const CONNECTIONS: usize = 5;
    pub const RETRANSMITS: usize = 6;
    pub const SERVICES: usize = 7;
    pub const PROCESSES: usize = 8;
    pub const DISK_IO: usize = 9;
    pub const PKT_ERRORS: usize = 10;
}

pub const N_OT: usize = 67;
pub const N_IT: usize = 11;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SignalCatalog {
    pub defs: Vec<SignalDef>,
}

impl SignalCatalog {
    /// Default catalog: exactly 67 OT and 11 IT signals, three of them
    /// console-displayed (channel-1 counts, channel-1 change rate,
    /// channel-2 counts).
    pub fn default_catalog() -> SignalCatalog {
        let mut defs = Vec::with_capacity(N_OT + N_IT);
        let push_ot = |defs: &mut Vec<SignalDef>, name: &str, unit: &str, vk: ValueKind, console: bool| {
            let id = defs.len();
            defs.push(SignalDef {
                id,
                name: name.to_string(),
                kind: SignalKind::Ot,
                unit: unit.to_string(),
                value_kind: vk,
                console_displayed: console,
            });
        };
        push_ot(&mut defs, "reactor_power", "%", ValueKind::Continuous, false);
        push_ot(&mut defs, "pool_temperature", "C", ValueKind::Continuous, false);
        push_ot(&mut defs, "trip_button_indication", "bool", ValueKind::Binary, false);
        push_ot(&mut defs, "channel1_counts", "cps", ValueKind::Count, true);
        push_ot(&mut defs, "channel1_change_rate", "%/s", ValueKind::Continuous, true);
        push_ot(&mut defs, "channel2_counts", "cps", ValueKind::Count, true);
        push_ot(&mut defs, "channel3_counts", "cps", ValueKind::Count, false);
        push_ot(&mut defs, "channel4_counts", "cps", ValueKind::Count, false);
        for i in 1..=4 {
            push_ot(&mut defs, &format!("rod{i}_position"), "%", ValueKind::Continuous, false);
        }
        push_ot(&mut defs, "reactor_period", "s", ValueKind::Continuous, false);
        push_ot(&mut defs, "primary_pump_on", "bool", ValueKind::Binary, false);
        for i in 1..=6 {
            push_ot(&mut defs, &format!("status_flag{i}"), "bool", ValueKind::Binary, false);
        }
        let mut aux = 1;
        while defs.len() < N_OT {
            push_ot(&mut defs, &format!("aux_process{aux:02}"), "au", ValueKind::Continuous, false);
            aux += 1;
        }
        let it_names: [(&str, &str); N_IT] = [
            ("net_packet_rate", "pps"),
            ("net_latency", "ms"),
            ("host_cpu_util", "%"),
            ("host_mem_util", "%"),
            ("net_bandwidth", "kBps"),
            ("net_connections", "count"),
            ("net_retransmits", "pps"),
            ("host_services", "count"),
            ("host_processes", "count"),
            ("host_disk_io", "MBps"),
            ("net_packet_errors", "pps"),
        ];
        for (name, unit) in it_names {
            let id = defs.len();
            defs.push(SignalDef {
                id,
                name: name.to_string(),
                kind: SignalKind::It,
                unit: unit.to_string(),
                value_kind: ValueKind::Continuous,
                console_displayed: false,
            });
        }
        SignalCatalog { defs }
    }

    pub fn n_ot(&self) -> usize {
        self.defs.iter().filter(|d| d.kind == SignalKind::Ot).count()
    }

    pub fn n_it(&self) -> usize {
        self.defs.iter().filter(|d| d.kind == SignalKind::It).count()
    }

    pub fn ot_names(&self) -> Vec<String> {
        self.defs
            .iter()
            .filter(|d| d.kind == SignalKind::Ot)
            .map(|d| d.name.clone())
            .collect()
    }

    pub fn it_names(&self) -> Vec<String> {
        self.defs
            .iter()
            .filter(|d| d.kind == SignalKind::It)
            .map(|d| d.name.clone())
            .collect()
    }

    /// OT row indices of the console-displayed falsification targets, in
    /// catalog order.
    pub fn console_targets(&self) -> Vec<usize> {
        self.defs
            .iter()
            .filter(|d| d.kind == SignalKind::Ot)
            .enumerate()
            .filter(|(_, d)| d.console_displayed)
            .map(|(row, _)| row)
            .collect()
    }
}
