//! Edge server power model.
//!
//! A server is `On`, `Idle`, `UnavailableOff` or `AvailableOff`. Idle servers are switched
//! off once their idle streak exceeds `t_idle_max` slots; switched-off servers become
//! available again after `t_off_min` slots. Bringing an available-off server into service
//! costs one setup slot at `p_max`.

use serde::{Deserialize, Serialize};

use crate::workload::VnfSpec;
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PowerParams {
    /// W.
    pub p_idle: f64,
    /// W. Also the setup power.
    pub p_max: f64,
    /// Longest idle streak in slots before the server is switched off.
    pub t_idle_max: u32,
    /// Minimum slots a switched-off server stays unavailable.
    pub t_off_min: u32,
}

impl PowerParams {
    /// 49.9 W idle, 415 W max/setup, 3 idle slots, 1 off slot.
    pub const REFERENCE: PowerParams =
        PowerParams { p_idle: 49.9, p_max: 415.0, t_idle_max: 3, t_off_min: 1 };

    pub fn validate(&self) -> Result<()> {
        if !(0.0 < self.p_idle && self.p_idle < self.p_max) {
            return Err(Error::InvalidParameter("power params need 0 < p_idle < p_max"));
        }
        if self.t_idle_max < 1 || self.t_off_min < 1 {
            return Err(Error::InvalidParameter("t_idle_max and t_off_min must be >= 1"));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ServerMode {
    On,
    Idle,
    UnavailableOff,
    AvailableOff,
}

impl ServerMode {
    pub fn is_off(self) -> bool {
        matches!(self, ServerMode::UnavailableOff | ServerMode::AvailableOff)
    }

    pub fn as_str(self) -> &'static str {
        match self {
            ServerMode::On => "on",
            ServerMode::Idle => "idle",
            ServerMode::UnavailableOff => "unavailable_off",
            ServerMode::AvailableOff => "available_off",
        }
    }
}

/// Whether the base charge of a server (setup power when off, idle power when idle) is paid
/// by the first VNF placed there in a slot or by every VNF.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ChargePolicy {
    #[default]
    Once,
    PerVnf,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ServerState {
    pub mode: ServerMode,
    pub idle_since: Option<u32>,
    pub off_since: Option<u32>,
    /// Set for the single setup slot after leaving `AvailableOff`.
    pub setup: bool,
}

impl ServerState {
    pub fn on() -> Self {
        Self { mode: ServerMode::On, idle_since: None, off_since: None, setup: false }
    }

    pub fn idle(since: u32) -> Self {
        Self { mode: ServerMode::Idle, idle_since: Some(since), off_since: None, setup: false }
    }

    pub fn unavailable_off(since: u32) -> Self {
        Self { mode: ServerMode::UnavailableOff, idle_since: None, off_since: Some(since), setup: false }
    }

    pub fn available_off(since: u32) -> Self {
        Self { mode: ServerMode::AvailableOff, idle_since: None, off_since: Some(since), setup: false }
    }

    /// Off and available from the start of the simulation.
    pub fn initially_off() -> Self {
        Self { mode: ServerMode::AvailableOff, idle_since: None, off_since: None, setup: false }
    }

    fn setup() -> Self {
        Self { setup: true, ..Self::on() }
    }

    /// Mode a placement algorithm sees at the start of `slot`, before new requests land.
    /// Servers still running earlier requests are `On`; an on-but-empty server counts as idle.
    pub fn placement_mode(&self, params: &PowerParams, slot: u32, occupied_by_prior: bool) -> ServerMode {
        if occupied_by_prior {
            return ServerMode::On;
        }
        match self.mode {
            ServerMode::On | ServerMode::Idle => ServerMode::Idle,
            ServerMode::UnavailableOff => {
                if off_duration(self, slot) >= params.t_off_min {
                    ServerMode::AvailableOff
                } else {
                    ServerMode::UnavailableOff
                }
            }
            ServerMode::AvailableOff => ServerMode::AvailableOff,
        }
    }

    /// Power drawn during a slot in this state with `allocated_cpu` in use.
    pub fn power(&self, params: &PowerParams, allocated_cpu: f64, capacity_cpu: f64) -> f64 {
        match self.mode {
            ServerMode::On if self.setup => params.p_max,
            ServerMode::On => server_active_power(allocated_cpu, capacity_cpu, params),
            ServerMode::Idle => params.p_idle,
            ServerMode::UnavailableOff | ServerMode::AvailableOff => 0.0,
        }
    }
}

/// `off_since == None` means off since before the simulated horizon.
fn off_duration(state: &ServerState, slot: u32) -> u32 {
    match state.off_since {
        Some(since) => slot.saturating_sub(since),
        None => u32::MAX,
    }
}

/// Advances one server to `current_slot`.
///
/// The idle streak counts slots inclusively (`slot - idle_since + 1`); the off duration counts
/// elapsed slots (`slot - off_since`).
pub fn step_server_state(
    state: &ServerState,
    params: &PowerParams,
    occupied_this_slot: bool,
    current_slot: u32,
) -> Result<ServerState> {
    let mut state = *state;
    if state.mode == ServerMode::UnavailableOff && off_duration(&state, current_slot) >= params.t_off_min {
        state.mode = ServerMode::AvailableOff;
    }
    let next = match (state.mode, occupied_this_slot) {
        (ServerMode::UnavailableOff, true) => {
            return Err(Error::IllegalTransition { mode: state.mode, slot: current_slot });
        }
        (ServerMode::UnavailableOff, false) | (ServerMode::AvailableOff, false) => state,
        (ServerMode::AvailableOff, true) => ServerState::setup(),
        (ServerMode::On | ServerMode::Idle, true) => ServerState::on(),
        (ServerMode::On, false) => ServerState::idle(current_slot),
        (ServerMode::Idle, false) => {
            let since = state.idle_since.unwrap_or(current_slot);
            if current_slot - since + 1 > params.t_idle_max {
                ServerState::unavailable_off(current_slot)
            } else {
                ServerState::idle(since)
            }
        }
    };
    Ok(next)
}

/// What a placement knows about a server when attributing power to one VNF.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AttributionContext {
    pub mode: ServerMode,
    /// The server will be serving requests in the next slot regardless of this placement.
    pub serves_next: bool,
    pub capacity_cpu: f64,
}

/// Power (W) produced by placing `vnf` on a server this slot.
///
/// | mode now | serves next slot | power |
/// |---|---|---|
/// | off | yes | 0 |
/// | off | no | `p_max` (setup) |
/// | idle | no | `p_idle` + cpu share |
/// | idle or on | yes | cpu share |
///
/// An `On` server not serving next slot is already powered by its current tenants and is
/// charged the cpu share only. `base_already_charged` suppresses the setup/idle base term when
/// another VNF has paid it on the same server this slot.
pub fn vnf_power_attribution(
    ctx: &AttributionContext,
    vnf: &VnfSpec,
    params: &PowerParams,
    base_already_charged: bool,
) -> f64 {
    if vnf.is_pseudo {
        return 0.0;
    }
    let share = vnf.cpu / ctx.capacity_cpu * (params.p_max - params.p_idle);
    match (ctx.mode, ctx.serves_next) {
        (ServerMode::UnavailableOff | ServerMode::AvailableOff, true) => 0.0,
        (ServerMode::UnavailableOff | ServerMode::AvailableOff, false) => {
            if base_already_charged {
                0.0
            } else {
                params.p_max
            }
        }
        (ServerMode::Idle, false) => {
            let base = if base_already_charged { 0.0 } else { params.p_idle };
            base + share
        }
        (ServerMode::Idle, true) | (ServerMode::On, _) => share,
    }
}

/// Power of an active server with `allocated_cpu` of `capacity_cpu` in use.
pub fn server_active_power(allocated_cpu: f64, capacity_cpu: f64, params: &PowerParams) -> f64 {
    params.p_idle + allocated_cpu / capacity_cpu * (params.p_max - params.p_idle)
}
