mod common;

use common::oracle::oracle_solve;
use common::{random_fault, random_radial, rel_err};
use mas_core::grid::{solve_fault, End};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[test]
fn solver_matches_mna_oracle_on_random_radial_networks() {
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed_0001);
    let mut clamped_cases = 0;
    for case in 0..300 {
        let net = random_radial(&mut rng, 10, 3);
        let fault = random_fault(&mut rng, &net);
        let sol = solve_fault(&net, &fault).unwrap();
        let ora = oracle_solve(&net, &fault);
        assert_eq!(sol.converged, ora.converged, "case {case}");
        for (bus, v) in &ora.bus_v {
            let e = rel_err(sol.bus_v[bus], *v);
            assert!(e <= 1e-9, "case {case}: bus {bus} err {e}");
        }
        for (key, i) in &ora.branch_i {
            let e = rel_err(sol.branch_i[key], *i);
            assert!(e <= 1e-9, "case {case}: branch {key:?} err {e} ({} vs {i})", sol.branch_i[key]);
        }
        let e = rel_err(sol.fault_i, ora.fault_i);
        assert!(e <= 1e-9, "case {case}: fault current err {e}");
        if net
            .sources
            .iter()
            .any(|s| s.online && s.kind.is_inverter() && (sol.source_i[&s.id].norm() - s.i_limit).abs() < 1e-9)
        {
            clamped_cases += 1;
        }
    }
    assert!(clamped_cases > 20, "only {clamped_cases} cases exercised the clamp");
}

#[test]
fn converged_solutions_respect_inverter_limits() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for _ in 0..200 {
        let net = random_radial(&mut rng, 10, 3);
        let fault = random_fault(&mut rng, &net);
        let sol = solve_fault(&net, &fault).unwrap();
        if sol.converged {
            for s in net.sources.iter().filter(|s| s.online && s.kind.is_inverter()) {
                assert!(sol.source_i[&s.id].norm() <= s.i_limit + 1e-9);
            }
        }
        // Unfaulted branches carry the same current at both ends.
        for br in net.branches.iter().filter(|b| b.id != fault.branch_id) {
            assert_eq!(sol.branch_i[&(br.id.clone(), End::From)], sol.branch_i[&(br.id.clone(), End::To)]);
        }
    }
}
