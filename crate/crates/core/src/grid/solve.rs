//! Quasi-steady-state fault solution on the positive-sequence network.
//!
//! Machine sources (grid supply, CCHP) are EMFs behind their internal
//! impedance. Converter sources start as the same Norton equivalent and are
//! switched to a fixed current of `i_limit` in phase with their EMF once the
//! Norton current exceeds the limit; the switching is repeated until the set
//! of clamped sources stops changing.

use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use super::network::{End, FaultSpec, Network};
use super::GridError;

pub const MAX_CLAMP_ITERATIONS: usize = 20;
pub const CLAMP_TOLERANCE: f64 = 1e-9;

const ZERO: Complex64 = Complex64 { re: 0.0, im: 0.0 };
const ONE: Complex64 = Complex64 { re: 1.0, im: 0.0 };

#[derive(Debug, Clone, PartialEq)]
pub struct FaultSolution {
    pub bus_v: BTreeMap<String, Complex64>,
    /// Positive values flow from-bus to to-bus.
    pub branch_i: BTreeMap<(String, End), Complex64>,
    /// Current each source injects into its bus.
    pub source_i: BTreeMap<String, Complex64>,
    pub fault: Option<FaultSpec>,
    /// Current flowing from the network into the fault.
    pub fault_i: Complex64,
    pub fault_v: Complex64,
    pub converged: bool,
    pub iterations: usize,
}

impl FaultSolution {
    pub fn current(&self, branch: &str, end: End) -> Option<Complex64> {
        self.branch_i.get(&(branch.to_string(), end)).copied()
    }

    pub fn voltage(&self, bus: &str) -> Option<Complex64> {
        self.bus_v.get(bus).copied()
    }
}

/// Flat 1.0 pu profile with no current anywhere.
pub fn solve_prefault(net: &Network) -> FaultSolution {
    let bus_v = net.buses.iter().map(|b| (b.id.clone(), ONE)).collect();
    let mut branch_i = BTreeMap::new();
    for br in &net.branches {
        branch_i.insert((br.id.clone(), End::From), ZERO);
        branch_i.insert((br.id.clone(), End::To), ZERO);
    }
    let source_i = net.sources.iter().map(|s| (s.id.clone(), ZERO)).collect();
    FaultSolution {
        bus_v,
        branch_i,
        source_i,
        fault: None,
        fault_i: ZERO,
        fault_v: ONE,
        converged: true,
        iterations: 0,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Part {
    Whole,
    SegA,
    SegB,
}

struct Element {
    a: usize,
    b: usize,
    y: Complex64,
    branch: usize,
    part: Part,
}

struct Topology {
    n_nodes: usize,
    elements: Vec<Element>,
    fault_node: usize,
    /// `None` for a bolted fault (fault node is the reference).
    fault_y: Option<Complex64>,
    /// Faulted branch with its breaker open.
    open: bool,
}

fn build_topology(net: &Network, fault: &FaultSpec) -> Result<Topology, GridError> {
    let fidx = net
        .branches
        .iter()
        .position(|b| b.id == fault.branch_id)
        .ok_or_else(|| GridError::UnknownBranch(fault.branch_id.clone()))?;
    let fbr = &net.branches[fidx];
    // An open breaker disconnects the relay-side segment only; the fault can
    // still be fed from the far end.
    let open = !fbr.breaker_closed;
    let lambda = fault.position;
    if !(0.0..=1.0).contains(&lambda) {
        return Err(GridError::InvalidFault(format!("position {lambda} outside [0, 1]")));
    }
    if fault.z_fault.re < 0.0 {
        return Err(GridError::InvalidFault("negative fault resistance".into()));
    }
    let bus = |id: &str| net.bus_index(id).expect("validated bus reference");
    let n_bus = net.buses.len();
    let (from, to) = (bus(&fbr.from_bus), bus(&fbr.to_bus));
    let (fault_node, n_nodes) = if lambda == 0.0 && !open {
        (from, n_bus)
    } else if lambda == 1.0 {
        (to, n_bus)
    } else {
        (n_bus, n_bus + 1)
    };

    let mut elements = Vec::new();
    for (i, br) in net.branches.iter().enumerate() {
        if !br.breaker_closed || i == fidx {
            continue;
        }
        elements.push(Element {
            a: bus(&br.from_bus),
            b: bus(&br.to_bus),
            y: ONE / br.z,
            branch: i,
            part: Part::Whole,
        });
    }
    if lambda > 0.0 && !open {
        elements.push(Element { a: from, b: fault_node, y: ONE / (fbr.z * lambda), branch: fidx, part: Part::SegA });
    }
    if lambda < 1.0 {
        elements.push(Element { a: fault_node, b: to, y: ONE / (fbr.z * (1.0 - lambda)), branch: fidx, part: Part::SegB });
    }
    let fault_y = if fault.z_fault.norm() == 0.0 { None } else { Some(ONE / fault.z_fault) };
    Ok(Topology { n_nodes, elements, fault_node, fault_y, open })
}

fn components(topo: &Topology) -> Vec<usize> {
    let mut parent: Vec<usize> = (0..topo.n_nodes).collect();
    fn find(p: &mut [usize], mut x: usize) -> usize {
        while p[x] != x {
            p[x] = p[p[x]];
            x = p[x];
        }
        x
    }
    for e in &topo.elements {
        let (ra, rb) = (find(&mut parent, e.a), find(&mut parent, e.b));
        if ra != rb {
            parent[ra.max(rb)] = ra.min(rb);
        }
    }
    (0..topo.n_nodes).map(|i| find(&mut parent, i)).collect()
}

struct ActiveSource {
    idx: usize,
    node: usize,
    emf: Complex64,
    y_int: Complex64,
    inverter: bool,
    i_limit: f64,
}

struct LinearSolution {
    v: Vec<Complex64>,
}

fn solve_linear(
    topo: &Topology,
    comp: &[usize],
    sources: &[ActiveSource],
    clamped: &[bool],
) -> Result<LinearSolution, GridError> {
    let n = topo.n_nodes;
    let mut grounded = vec![false; n];
    let mut fed = vec![false; n];
    for (k, s) in sources.iter().enumerate() {
        fed[comp[s.node]] = true;
        if !clamped[k] {
            grounded[comp[s.node]] = true;
        }
    }
    let froot = comp[topo.fault_node];
    if !fed[froot] {
        return Err(GridError::SingularNetwork);
    }
    grounded[froot] = true;

    let bolted = topo.fault_y.is_none();
    let mut index = vec![usize::MAX; n];
    let mut m = 0;
    for node in 0..n {
        if grounded[comp[node]] && !(bolted && node == topo.fault_node) {
            index[node] = m;
            m += 1;
        }
    }
    let mut y = DMatrix::<Complex64>::zeros(m, m);
    let mut rhs = DVector::<Complex64>::zeros(m);
    for e in &topo.elements {
        let (ia, ib) = (index[e.a], index[e.b]);
        if ia != usize::MAX {
            y[(ia, ia)] += e.y;
        }
        if ib != usize::MAX {
            y[(ib, ib)] += e.y;
        }
        if ia != usize::MAX && ib != usize::MAX {
            y[(ia, ib)] -= e.y;
            y[(ib, ia)] -= e.y;
        }
    }
    if let Some(fy) = topo.fault_y {
        let i = index[topo.fault_node];
        y[(i, i)] += fy;
    }
    for (k, s) in sources.iter().enumerate() {
        let i = index[s.node];
        if i == usize::MAX {
            continue;
        }
        if clamped[k] {
            rhs[i] += s.emf / s.emf.norm() * s.i_limit;
        } else {
            y[(i, i)] += s.y_int;
            rhs[i] += s.emf * s.y_int;
        }
    }
    let x = if m == 0 {
        DVector::zeros(0)
    } else {
        y.lu().solve(&rhs).ok_or(GridError::SingularNetwork)?
    };
    if x.iter().any(|c| !c.re.is_finite() || !c.im.is_finite()) {
        return Err(GridError::SingularNetwork);
    }
    let v = (0..n).map(|node| if index[node] == usize::MAX { ZERO } else { x[index[node]] }).collect();
    Ok(LinearSolution { v })
}

/// Solves the network with `fault` applied.
///
/// Returns `converged = false` (with the last iterate) when the clamp set
/// does not settle within [`MAX_CLAMP_ITERATIONS`] solves.
pub fn solve_fault(net: &Network, fault: &FaultSpec) -> Result<FaultSolution, GridError> {
    let topo = build_topology(net, fault)?;
    let comp = components(&topo);
    let sources: Vec<ActiveSource> = net
        .sources
        .iter()
        .enumerate()
        .filter(|(_, s)| s.online)
        .map(|(idx, s)| ActiveSource {
            idx,
            node: net.bus_index(&s.bus).expect("validated bus reference"),
            emf: s.emf,
            y_int: ONE / s.z_int,
            inverter: s.kind.is_inverter(),
            i_limit: s.i_limit,
        })
        .collect();

    let mut clamped = vec![false; sources.len()];
    let mut iterations = 0;
    let mut converged = false;
    let mut sol;
    loop {
        sol = solve_linear(&topo, &comp, &sources, &clamped)?;
        iterations += 1;
        let mut next = clamped.clone();
        for (k, s) in sources.iter().enumerate() {
            if !s.inverter {
                continue;
            }
            let norton = ((s.emf - sol.v[s.node]) * s.y_int).norm();
            if !clamped[k] && norton > s.i_limit + CLAMP_TOLERANCE {
                next[k] = true;
            } else if clamped[k] && norton < s.i_limit - CLAMP_TOLERANCE {
                next[k] = false;
            }
        }
        // A stable clamp set means the next solve would reproduce this one
        // exactly, so the current change is zero.
        if next == clamped {
            converged = true;
            break;
        }
        if iterations >= MAX_CLAMP_ITERATIONS {
            break;
        }
        clamped = next;
    }

    let v = &sol.v;
    let mut branch_i = BTreeMap::new();
    for br in &net.branches {
        branch_i.insert((br.id.clone(), End::From), ZERO);
        branch_i.insert((br.id.clone(), End::To), ZERO);
    }
    let mut seg_a = None;
    let mut seg_b = None;
    for e in &topo.elements {
        let i = (v[e.a] - v[e.b]) * e.y;
        match e.part {
            Part::Whole => {
                let id = &net.branches[e.branch].id;
                branch_i.insert((id.clone(), End::From), i);
                branch_i.insert((id.clone(), End::To), i);
            }
            Part::SegA => seg_a = Some(i),
            Part::SegB => seg_b = Some(i),
        }
    }

    let mut source_i = BTreeMap::new();
    for s in &net.sources {
        source_i.insert(s.id.clone(), ZERO);
    }
    for (k, s) in sources.iter().enumerate() {
        let i = if clamped[k] {
            s.emf / s.emf.norm() * s.i_limit
        } else {
            (s.emf - v[s.node]) * s.y_int
        };
        source_i.insert(net.sources[s.idx].id.clone(), i);
    }

    // KCL at the fault node gives the fault current for both bolted and
    // impedance faults.
    let f = topo.fault_node;
    let mut fault_i = ZERO;
    for e in &topo.elements {
        let i = (v[e.a] - v[e.b]) * e.y;
        if e.b == f {
            fault_i += i;
        }
        if e.a == f {
            fault_i -= i;
        }
    }
    for (k, s) in sources.iter().enumerate() {
        if s.node == f {
            fault_i += if clamped[k] { s.emf / s.emf.norm() * s.i_limit } else { (s.emf - v[f]) * s.y_int };
        }
    }

    let fid = &fault.branch_id;
    let (ia, ib) = match (seg_a, seg_b) {
        _ if topo.open => (ZERO, seg_b.unwrap_or(-fault_i)),
        (Some(a), Some(b)) => (a, b),
        (None, Some(b)) => (fault_i + b, b),
        (Some(a), None) => (a, a - fault_i),
        (None, None) => unreachable!("a faulted branch always keeps one segment"),
    };
    branch_i.insert((fid.clone(), End::From), ia);
    branch_i.insert((fid.clone(), End::To), ib);

    let bus_v = net.buses.iter().enumerate().map(|(i, b)| (b.id.clone(), v[i])).collect();
    Ok(FaultSolution {
        bus_v,
        branch_i,
        source_i,
        fault: Some(fault.clone()),
        fault_i,
        fault_v: v[f],
        converged,
        iterations,
    })
}
