//! Independent fault oracle: modified nodal analysis with explicit voltage
//! sources for machine EMFs, bolted faults and zero-length fault segments,
//! solved by hand-written Gaussian elimination.

use std::collections::BTreeMap;

use mas_core::grid::{End, FaultSpec, Network};
use num_complex::Complex64;

pub struct OracleSolution {
    pub bus_v: BTreeMap<String, Complex64>,
    pub branch_i: BTreeMap<(String, End), Complex64>,
    pub fault_i: Complex64,
    pub converged: bool,
}

fn gauss(mut a: Vec<Vec<Complex64>>, mut b: Vec<Complex64>) -> Vec<Complex64> {
    let n = b.len();
    for col in 0..n {
        let piv = (col..n)
            .max_by(|&i, &j| a[i][col].norm().partial_cmp(&a[j][col].norm()).unwrap())
            .unwrap();
        assert!(a[piv][col].norm() > 1e-300, "singular oracle system");
        a.swap(col, piv);
        b.swap(col, piv);
        for row in col + 1..n {
            let f = a[row][col] / a[col][col];
            if f.norm() == 0.0 {
                continue;
            }
            for k in col..n {
                let t = a[col][k];
                a[row][k] -= f * t;
            }
            let t = b[col];
            b[row] -= f * t;
        }
    }
    let mut x = vec![Complex64::new(0.0, 0.0); n];
    for row in (0..n).rev() {
        let mut s = b[row];
        for k in row + 1..n {
            s -= a[row][k] * x[k];
        }
        x[row] = s / a[row][row];
    }
    x
}

enum Elem {
    Imp { a: Option<usize>, b: Option<usize>, z: Complex64 },
    Vsrc { a: Option<usize>, b: Option<usize>, e: Complex64 },
    Isrc { into: usize, i: Complex64 },
}

/// Assumes every bus is connected to the grid supply through closed branches.
pub fn oracle_solve(net: &Network, fault: &FaultSpec) -> OracleSolution {
    let nb = net.buses.len();
    let bus = |id: &str| net.buses.iter().position(|b| b.id == id).unwrap();
    let fbr = net.branches.iter().find(|b| b.id == fault.branch_id).unwrap();
    let fnode = nb;
    let lam = fault.position;
    let inverters: Vec<usize> = net
        .sources
        .iter()
        .enumerate()
        .filter(|(_, s)| s.online && s.kind.is_inverter())
        .map(|(i, _)| i)
        .collect();
    let mut clamped = vec![false; net.sources.len()];
    let mut iterations = 0;
    loop {
        iterations += 1;
        let mut elems: Vec<Elem> = Vec::new();
        let mut n_nodes = nb + 1;
        for br in net.branches.iter().filter(|b| b.breaker_closed && b.id != fbr.id) {
            elems.push(Elem::Imp { a: Some(bus(&br.from_bus)), b: Some(bus(&br.to_bus)), z: br.z });
        }
        let (fa, fb) = (bus(&fbr.from_bus), bus(&fbr.to_bus));
        let seg_a = elems.len();
        if lam == 0.0 {
            elems.push(Elem::Vsrc { a: Some(fa), b: Some(fnode), e: Complex64::new(0.0, 0.0) });
        } else {
            elems.push(Elem::Imp { a: Some(fa), b: Some(fnode), z: fbr.z * lam });
        }
        if lam == 1.0 {
            elems.push(Elem::Vsrc { a: Some(fnode), b: Some(fb), e: Complex64::new(0.0, 0.0) });
        } else {
            elems.push(Elem::Imp { a: Some(fnode), b: Some(fb), z: fbr.z * (1.0 - lam) });
        }
        let fault_elem = elems.len();
        if fault.z_fault.norm() == 0.0 {
            elems.push(Elem::Vsrc { a: Some(fnode), b: None, e: Complex64::new(0.0, 0.0) });
        } else {
            elems.push(Elem::Imp { a: Some(fnode), b: None, z: fault.z_fault });
        }
        let mut src_elem = BTreeMap::new();
        for (k, s) in net.sources.iter().enumerate().filter(|(_, s)| s.online) {
            let b = bus(&s.bus);
            if clamped[k] {
                elems.push(Elem::Isrc { into: b, i: s.emf / s.emf.norm() * s.i_limit });
            } else {
                let internal = n_nodes;
                n_nodes += 1;
                elems.push(Elem::Vsrc { a: Some(internal), b: None, e: s.emf });
                src_elem.insert(k, elems.len());
                elems.push(Elem::Imp { a: Some(internal), b: Some(b), z: s.z_int });
            }
        }

        // Unknowns: node voltages, then one current per voltage source.
        let vsrc: Vec<usize> = (0..elems.len()).filter(|&i| matches!(elems[i], Elem::Vsrc { .. })).collect();
        let dim = n_nodes + vsrc.len();
        let zero = Complex64::new(0.0, 0.0);
        let mut a = vec![vec![zero; dim]; dim];
        let mut rhs = vec![zero; dim];
        for (i, e) in elems.iter().enumerate() {
            match *e {
                Elem::Imp { a: p, b: q, z } => {
                    let y = Complex64::new(1.0, 0.0) / z;
                    if let Some(p) = p {
                        a[p][p] += y;
                    }
                    if let Some(q) = q {
                        a[q][q] += y;
                    }
                    if let (Some(p), Some(q)) = (p, q) {
                        a[p][q] -= y;
                        a[q][p] -= y;
                    }
                }
                Elem::Vsrc { a: p, b: q, e } => {
                    let r = n_nodes + vsrc.iter().position(|&v| v == i).unwrap();
                    // Current variable flows from p through the source to q.
                    if let Some(p) = p {
                        a[p][r] += Complex64::new(1.0, 0.0);
                        a[r][p] += Complex64::new(1.0, 0.0);
                    }
                    if let Some(q) = q {
                        a[q][r] -= Complex64::new(1.0, 0.0);
                        a[r][q] -= Complex64::new(1.0, 0.0);
                    }
                    rhs[r] = e;
                }
                Elem::Isrc { into, i } => rhs[into] += i,
            }
        }
        let x = gauss(a, rhs);
        let v = |n: Option<usize>| n.map(|n| x[n]).unwrap_or(zero);
        let elem_current = |i: usize| -> Complex64 {
            match elems[i] {
                Elem::Imp { a: p, b: q, z } => (v(p) - v(q)) / z,
                // The variable is the current entering the source at `a`.
                Elem::Vsrc { .. } => {
                    let r = n_nodes + vsrc.iter().position(|&k| k == i).unwrap();
                    x[r]
                }
                Elem::Isrc { i, .. } => i,
            }
        };

        let mut next = clamped.clone();
        for &k in &inverters {
            let s = &net.sources[k];
            let norton = match src_elem.get(&k) {
                Some(&ei) => elem_current(ei).norm(),
                None => ((s.emf - x[bus(&s.bus)]) / s.z_int).norm(),
            };
            if !clamped[k] && norton > s.i_limit + 1e-9 {
                next[k] = true;
            } else if clamped[k] && norton < s.i_limit - 1e-9 {
                next[k] = false;
            }
        }
        if next != clamped && iterations < 20 {
            clamped = next;
            continue;
        }

        let mut branch_i = BTreeMap::new();
        for br in &net.branches {
            let (i_from, i_to) = if !br.breaker_closed {
                (zero, zero)
            } else if br.id == fbr.id {
                // The MNA variable of a 0 V source is the current entering it
                // at its `a` node, matching the impedance convention a -> b.
                (elem_current(seg_a), elem_current(seg_a + 1))
            } else {
                let i = (x[bus(&br.from_bus)] - x[bus(&br.to_bus)]) / br.z;
                (i, i)
            };
            branch_i.insert((br.id.clone(), End::From), i_from);
            branch_i.insert((br.id.clone(), End::To), i_to);
        }
        let fault_i = elem_current(fault_elem);
        let bus_v = net.buses.iter().enumerate().map(|(i, b)| (b.id.clone(), x[i])).collect();
        return OracleSolution { bus_v, branch_i, fault_i, converged: next == clamped };
    }
}
