use proptest::prelude::*;
use satvnf_core::energymodel::{step_server_state, vnf_power_attribution, AttributionContext};
use satvnf_core::{Error, PowerParams, ServerMode, ServerState, VnfSpec};

const P: PowerParams = PowerParams::REFERENCE;

fn mode_strategy() -> impl Strategy<Value = ServerMode> {
    prop_oneof![
        Just(ServerMode::On),
        Just(ServerMode::Idle),
        Just(ServerMode::UnavailableOff),
        Just(ServerMode::AvailableOff),
    ]
}

#[test]
fn scripted_power_trace() {
    // busy at 0 (from off) and 1, idle 2..=4, off at 5, available at 6, busy at 7 and 8
    let occupied = [true, true, false, false, false, false, false, true, true];
    let expected = [
        (ServerMode::On, 415.0),
        (ServerMode::On, 49.9 + 8.0 / 112.0 * 365.1),
        (ServerMode::Idle, 49.9),
        (ServerMode::Idle, 49.9),
        (ServerMode::Idle, 49.9),
        (ServerMode::UnavailableOff, 0.0),
        (ServerMode::AvailableOff, 0.0),
        (ServerMode::On, 415.0),
        (ServerMode::On, 49.9 + 8.0 / 112.0 * 365.1),
    ];
    let mut st = ServerState::initially_off();
    let mut trace = Vec::new();
    for (slot, &occ) in occupied.iter().enumerate() {
        st = step_server_state(&st, &P, occ, slot as u32).unwrap();
        trace.push((st.mode, st.power(&P, 8.0, 112.0)));
    }
    assert_eq!(trace, expected);
}

#[test]
fn idle_three_slots_then_off_then_available() {
    let mut st = ServerState::on();
    let mut modes = Vec::new();
    for slot in 1..=5 {
        st = step_server_state(&st, &P, false, slot).unwrap();
        modes.push(st.mode);
    }
    assert_eq!(
        modes,
        [ServerMode::Idle, ServerMode::Idle, ServerMode::Idle, ServerMode::UnavailableOff, ServerMode::AvailableOff]
    );
    assert_eq!(st, ServerState { off_since: Some(4), ..ServerState::available_off(4) });
    let setup = step_server_state(&st, &P, true, 6).unwrap();
    assert_eq!(setup.power(&P, 4.0, 112.0), 415.0);
}

#[test]
fn occupying_unavailable_server_is_rejected() {
    let st = ServerState::unavailable_off(4);
    assert!(matches!(
        step_server_state(&st, &P, true, 4),
        Err(Error::IllegalTransition { mode: ServerMode::UnavailableOff, slot: 4 })
    ));
}

proptest! {
    #[test]
    fn attribution_is_bounded_and_monotone(
        mode in mode_strategy(),
        serves_next in any::<bool>(),
        charged in any::<bool>(),
        cpu in 1u32..=112,
    ) {
        let vnf = VnfSpec::new(cpu as f64, 4.0, 10.0);
        let ctx = AttributionContext { mode, serves_next, capacity_cpu: 112.0 };
        let w = vnf_power_attribution(&ctx, &vnf, &P, charged);
        prop_assert!(w >= 0.0 && w <= P.p_max + 1e-12);
        // a paid base or a busy future never makes a placement dearer
        prop_assert!(vnf_power_attribution(&ctx, &vnf, &P, true) <= vnf_power_attribution(&ctx, &vnf, &P, false));
        let busy = AttributionContext { serves_next: true, ..ctx };
        prop_assert!(vnf_power_attribution(&busy, &vnf, &P, charged) <= vnf_power_attribution(&ctx, &vnf, &P, charged) + 1e-12);
        prop_assert_eq!(vnf_power_attribution(&ctx, &VnfSpec::pseudo(), &P, charged), 0.0);
    }

    #[test]
    fn legal_schedules_never_break_timing_rules(
        wants in proptest::collection::vec(any::<bool>(), 1..60),
        t_idle_max in 1u32..5,
        t_off_min in 1u32..4,
    ) {
        let params = PowerParams { t_idle_max, t_off_min, ..P };
        let mut st = ServerState::initially_off();
        let mut idle_run = 0u32;
        let mut off_start: Option<u32> = None;
        for (slot, &want) in wants.iter().enumerate() {
            let slot = slot as u32;
            let blocked = st.placement_mode(&params, slot, false) == ServerMode::UnavailableOff;
            let occupied = want && !blocked;
            if want && blocked {
                prop_assert!(step_server_state(&st, &params, true, slot).is_err());
            }
            let next = step_server_state(&st, &params, occupied, slot).unwrap();
            if occupied {
                if let Some(start) = off_start {
                    prop_assert!(slot - start >= t_off_min);
                }
            }
            idle_run = if next.mode == ServerMode::Idle { idle_run + 1 } else { 0 };
            prop_assert!(idle_run <= t_idle_max);
            if next.mode == ServerMode::UnavailableOff && !st.mode.is_off() {
                off_start = Some(slot);
            } else if !next.mode.is_off() {
                off_start = None;
            }
            prop_assert_eq!(next.setup, occupied && st.mode.is_off());
            st = next;
        }
    }
}
