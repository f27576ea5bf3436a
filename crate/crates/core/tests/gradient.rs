mod common;

use common::{gradient_check, GRADIENT_FLOOR};
use eef1_core::fairness::EnvyMode;

#[test]
fn analytic_gradient_matches_central_differences() {
    for t in [1.0, 0.01] {
        for lambda in [0.0, 1.0] {
            for mode in [EnvyMode::Ef, EnvyMode::Ef1] {
                let err = gradient_check(t, lambda, mode, GRADIENT_FLOOR);
                assert!(err <= 1e-4, "T={t} lambda={lambda} {mode}: relative error {err:e}");
            }
        }
    }
}
