#![allow(dead_code)]

pub mod oracle;

use mas_core::grid::{Branch, Bus, End, FaultSpec, Load, Network, Source, SourceKind};
use num_complex::Complex64;
use rand::Rng;

/// Random radial network: bus 0 hosts the grid supply, every other bus hangs
/// off an earlier one. Up to three DGs of mixed machine/converter kinds.
pub fn random_radial(rng: &mut impl Rng, max_buses: usize, max_dgs: usize) -> Network {
    let n = rng.gen_range(2..=max_buses);
    let mut net = Network::default();
    for i in 0..n {
        net.buses.push(Bus { id: format!("N{i}"), v_nominal: 10.0 });
    }
    for i in 1..n {
        let parent = rng.gen_range(0..i);
        net.branches.push(Branch {
            id: format!("B{i}"),
            from_bus: format!("N{parent}"),
            to_bus: format!("N{i}"),
            z: Complex64::new(rng.gen_range(0.01..0.3), rng.gen_range(0.05..0.6)),
            breaker_closed: true,
            relay_end: End::From,
        });
    }
    net.sources.push(Source {
        id: "grid".into(),
        bus: "N0".into(),
        kind: SourceKind::GridSupply,
        emf: Complex64::new(rng.gen_range(0.95..1.05), 0.0),
        z_int: Complex64::new(rng.gen_range(0.0..0.02), rng.gen_range(0.02..0.2)),
        i_limit: 0.0,
        online: true,
        p_out: 1.0,
        q_out: 0.0,
        p_max: 10.0,
        q_max: 10.0,
    });
    let kinds = [SourceKind::Pv, SourceKind::Cchp, SourceKind::Cess, SourceKind::FuelCell];
    for d in 0..rng.gen_range(0..=max_dgs) {
        let kind = kinds[rng.gen_range(0..kinds.len())];
        net.sources.push(Source {
            id: format!("DG{d}"),
            bus: format!("N{}", rng.gen_range(0..n)),
            kind,
            emf: Complex64::new(rng.gen_range(0.95..1.05), 0.0),
            z_int: Complex64::new(rng.gen_range(0.0..0.03), rng.gen_range(0.08..0.4)),
            i_limit: if kind.is_inverter() { rng.gen_range(0.1..2.0) } else { 0.0 },
            online: rng.gen_bool(0.8),
            p_out: 0.2,
            q_out: 0.0,
            p_max: 0.5,
            q_max: 0.2,
        });
    }
    for i in 1..n {
        net.loads.push(Load {
            id: format!("L{i}"),
            bus: format!("N{i}"),
            p: rng.gen_range(0.0..0.5),
            q: rng.gen_range(0.0..0.1),
            shed_priority: i as i64,
            connected: true,
        });
    }
    net.validate().expect("generated network is valid");
    net
}

pub fn random_fault(rng: &mut impl Rng, net: &Network) -> FaultSpec {
    let br = &net.branches[rng.gen_range(0..net.branches.len())];
    let position = match rng.gen_range(0..5) {
        0 => 0.0,
        1 => 1.0,
        _ => rng.gen_range(0.0..1.0),
    };
    let z_fault = if rng.gen_bool(0.5) {
        Complex64::new(0.0, 0.0)
    } else {
        Complex64::new(rng.gen_range(0.0..0.2), rng.gen_range(0.0..0.1))
    };
    FaultSpec { branch_id: br.id.clone(), position, z_fault, permanent: true }
}

/// |a - b| relative to max(|b|, 1).
pub fn rel_err(a: Complex64, b: Complex64) -> f64 {
    (a - b).norm() / b.norm().max(1.0)
}
