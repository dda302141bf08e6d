//! One line per acceptance criterion; exits non-zero if any fails.

use std::time::Duration;

use satvnf::checks::{self, CheckOutcome, Scale};

fn within(mut o: CheckOutcome, limit: Duration) -> CheckOutcome {
    if o.elapsed > limit {
        o.passed = false;
        o.detail = format!("{}; over the {}s limit", o.detail, limit.as_secs());
    }
    o
}

fn main() {
    let full = Scale::Full;
    let outcomes = [
        within(checks::potential_identity(full), Duration::from_secs(30)),
        checks::nash_convergence(full),
        within(checks::viterbi_oracle(full), Duration::from_secs(60)),
        checks::beam_monotonicity(full),
        checks::feasibility_invariance(full),
        within(checks::qualitative_ordering(full), Duration::from_secs(300)),
        checks::small_load(full),
        checks::taguchi_trend(full),
        checks::power_state_machine(),
        checks::spot_arithmetic(),
    ];
    for o in &outcomes {
        println!("{}", o.line());
    }
    let failed = outcomes.iter().filter(|o| !o.passed).count();
    println!("acceptance: {} passed, {failed} failed", outcomes.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
