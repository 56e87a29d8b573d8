//! Island detection and the linear network solves (DC angle solve for MW,
//! linearized Q-V solve for MVAR and voltage magnitude).

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};

use super::case::GridCase;

/// Open/closed and on/off state of every switchable device.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Statuses {
    pub branch_closed: Vec<bool>,
    pub gen_on: Vec<bool>,
    /// Per bus.
    pub load_on: Vec<bool>,
    /// Per bus.
    pub shunt_on: Vec<bool>,
}

impl Statuses {
    pub fn from_case(case: &GridCase) -> Self {
        Self {
            branch_closed: case.branches.iter().map(|b| b.closed).collect(),
            gen_on: case.generators.iter().map(|g| g.online).collect(),
            load_on: vec![true; case.buses.len()],
            shunt_on: vec![true; case.buses.len()],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum IslandIssue {
    NoGeneration,
    Singular,
    InsufficientCapacity,
    ExcessMinimum,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Island {
    pub buses: Vec<usize>,
    /// In-service generators in the island.
    pub gens: Vec<usize>,
}

/// Connected components over closed branches, in order of their lowest bus index.
pub fn find_islands(case: &GridCase, statuses: &Statuses) -> (Vec<Island>, Vec<usize>) {
    let n = case.buses.len();
    let mut parent: Vec<usize> = (0..n).collect();
    fn root(parent: &mut [usize], mut i: usize) -> usize {
        while parent[i] != i {
            parent[i] = parent[parent[i]];
            i = parent[i];
        }
        i
    }
    for (k, br) in case.branches.iter().enumerate() {
        if !statuses.branch_closed[k] {
            continue;
        }
        let a = root(&mut parent, case.bus_idx(br.from).unwrap());
        let b = root(&mut parent, case.bus_idx(br.to).unwrap());
        if a != b {
            let (lo, hi) = if a < b { (a, b) } else { (b, a) };
            parent[hi] = lo;
        }
    }
    let mut island_of_root = vec![usize::MAX; n];
    let mut island_of_bus = vec![0; n];
    let mut islands: Vec<Island> = Vec::new();
    for (i, slot) in island_of_bus.iter_mut().enumerate() {
        let r = root(&mut parent, i);
        if island_of_root[r] == usize::MAX {
            island_of_root[r] = islands.len();
            islands.push(Island {
                buses: Vec::new(),
                gens: Vec::new(),
            });
        }
        *slot = island_of_root[r];
        islands[island_of_root[r]].buses.push(i);
    }
    for (g, gen) in case.generators.iter().enumerate() {
        if statuses.gen_on[g] {
            let i = island_of_bus[case.bus_idx(gen.bus).unwrap()];
            islands[i].gens.push(g);
        }
    }
    (islands, island_of_bus)
}

/// Reduced Laplacian over `unknowns` (buses not held fixed), factorized.
#[derive(Debug, Clone)]
struct Reduced {
    /// Position of each case bus in the reduced system, `usize::MAX` if fixed or outside.
    pos: Vec<usize>,
    unknowns: Vec<usize>,
    chol: Option<Cholesky<f64, Dyn>>,
}

fn closed_branches<'a>(
    case: &'a GridCase,
    statuses: &'a Statuses,
) -> impl Iterator<Item = (usize, usize, usize)> + 'a {
    case.branches
        .iter()
        .enumerate()
        .filter(move |(k, _)| statuses.branch_closed[*k])
        .map(move |(k, br)| (k, case.bus_idx(br.from).unwrap(), case.bus_idx(br.to).unwrap()))
}

impl Reduced {
    /// Returns `None` when the reduced matrix is not positive definite.
    fn build(case: &GridCase, statuses: &Statuses, unknowns: Vec<usize>) -> Option<Self> {
        let mut pos = vec![usize::MAX; case.buses.len()];
        for (p, &b) in unknowns.iter().enumerate() {
            pos[b] = p;
        }
        let m = unknowns.len();
        if m == 0 {
            return Some(Self {
                pos,
                unknowns,
                chol: None,
            });
        }
        let mut mat = DMatrix::<f64>::zeros(m, m);
        for (k, a, b) in closed_branches(case, statuses) {
            let y = 1.0 / case.branches[k].x;
            let (pa, pb) = (pos[a], pos[b]);
            if pa != usize::MAX {
                mat[(pa, pa)] += y;
            }
            if pb != usize::MAX {
                mat[(pb, pb)] += y;
            }
            if pa != usize::MAX && pb != usize::MAX {
                mat[(pa, pb)] -= y;
                mat[(pb, pa)] -= y;
            }
        }
        let chol = Cholesky::new(mat)?;
        Some(Self {
            pos,
            unknowns,
            chol: Some(chol),
        })
    }

    fn solve(&self, rhs: DVector<f64>) -> DVector<f64> {
        match &self.chol {
            Some(c) => c.solve(&rhs),
            None => rhs,
        }
    }
}

#[derive(Debug, Clone)]
struct IslandFactors {
    /// Angle reference bus.
    reference: usize,
    dc: Reduced,
    /// Buses holding a generator voltage setpoint.
    voltage_fixed: Vec<bool>,
    qv: Reduced,
}

/// Islands plus factorized network matrices for one set of statuses. Rebuild
/// whenever any status changes.
#[derive(Debug, Clone)]
pub struct Topology {
    pub islands: Vec<Island>,
    pub island_of_bus: Vec<usize>,
    factors: Vec<Option<IslandFactors>>,
    issues: Vec<Option<IslandIssue>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DcFlow {
    /// Bus angles, rad.
    pub theta: Vec<f64>,
    /// MW at the from end of each branch.
    pub branch_p: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct QvFlow {
    /// Bus voltage magnitudes, pu.
    pub vm: Vec<f64>,
    /// MVAR at the from end of each branch.
    pub branch_q: Vec<f64>,
    pub gen_q: Vec<f64>,
}

impl Topology {
    pub fn build(case: &GridCase, statuses: &Statuses) -> Self {
        let (islands, island_of_bus) = find_islands(case, statuses);
        let mut factors = Vec::with_capacity(islands.len());
        let mut issues = Vec::with_capacity(islands.len());
        for island in &islands {
            let Some(&first_gen) = island.gens.first() else {
                factors.push(None);
                issues.push(Some(IslandIssue::NoGeneration));
                continue;
            };
            let reference = case.bus_idx(case.generators[first_gen].bus).unwrap();
            let mut voltage_fixed = vec![false; case.buses.len()];
            for &g in &island.gens {
                voltage_fixed[case.bus_idx(case.generators[g].bus).unwrap()] = true;
            }
            let dc_unknowns: Vec<usize> = island.buses.iter().copied().filter(|&b| b != reference).collect();
            let qv_unknowns: Vec<usize> = island.buses.iter().copied().filter(|&b| !voltage_fixed[b]).collect();
            match (
                Reduced::build(case, statuses, dc_unknowns),
                Reduced::build(case, statuses, qv_unknowns),
            ) {
                (Some(dc), Some(qv)) => {
                    factors.push(Some(IslandFactors {
                        reference,
                        dc,
                        voltage_fixed,
                        qv,
                    }));
                    issues.push(None);
                }
                _ => {
                    factors.push(None);
                    issues.push(Some(IslandIssue::Singular));
                }
            }
        }
        Self {
            islands,
            island_of_bus,
            factors,
            issues,
        }
    }

    /// Structural problem of an island (no generation, singular matrix), if any.
    pub fn issue(&self, island: usize) -> Option<IslandIssue> {
        self.issues[island]
    }

    pub fn solvable(&self, island: usize) -> bool {
        self.factors[island].is_some()
    }

    /// DC angle solve. `gen_p` is MW per generator; `live[i]` selects the
    /// islands to solve, the rest report zero angles and flows.
    pub fn solve_dc(&self, case: &GridCase, statuses: &Statuses, gen_p: &[f64], live: &[bool]) -> DcFlow {
        let base = case.base_mva();
        let n = case.buses.len();
        let mut injection = vec![0.0; n];
        for (g, gen) in case.generators.iter().enumerate() {
            if statuses.gen_on[g] {
                injection[case.bus_idx(gen.bus).unwrap()] += gen_p[g] / base;
            }
        }
        for (b, bus) in case.buses.iter().enumerate() {
            if statuses.load_on[b] {
                injection[b] -= bus.load_mw / base;
            }
        }
        let mut theta = vec![0.0; n];
        for (i, f) in self.factors.iter().enumerate() {
            let Some(f) = f else { continue };
            if !live[i] {
                continue;
            }
            let rhs = DVector::from_iterator(f.dc.unknowns.len(), f.dc.unknowns.iter().map(|&b| injection[b]));
            let sol = f.dc.solve(rhs);
            for (p, &b) in f.dc.unknowns.iter().enumerate() {
                theta[b] = sol[p];
            }
            theta[f.reference] = 0.0;
        }
        let mut branch_p = vec![0.0; case.branches.len()];
        for (k, a, b) in closed_branches(case, statuses) {
            if live[self.island_of_bus[a]] && self.factors[self.island_of_bus[a]].is_some() {
                branch_p[k] = (theta[a] - theta[b]) / case.branches[k].x * base;
            }
        }
        DcFlow { theta, branch_p }
    }

    /// Linearized reactive solve: generator buses hold `vset`, the others solve
    /// the reduced susceptance system for their reactive injections.
    pub fn solve_qv(&self, case: &GridCase, statuses: &Statuses, vset: &[f64], live: &[bool]) -> QvFlow {
        let base = case.base_mva();
        let n = case.buses.len();
        let mut vm = vec![0.0; n];
        let mut injection = vec![0.0; n];
        for (b, bus) in case.buses.iter().enumerate() {
            if statuses.shunt_on[b] {
                injection[b] += bus.shunt_mvar / base;
            }
            if statuses.load_on[b] {
                injection[b] -= bus.load_mvar / base;
            }
        }
        for (k, a, b) in closed_branches(case, statuses) {
            let half = case.branches[k].charging / 2.0;
            injection[a] += half;
            injection[b] += half;
        }
        let mut held = vec![false; n];
        for (g, gen) in case.generators.iter().enumerate() {
            let b = case.bus_idx(gen.bus).unwrap();
            if statuses.gen_on[g] && !held[b] {
                held[b] = true;
                vm[b] = vset[g];
            }
        }
        for (i, f) in self.factors.iter().enumerate() {
            let Some(f) = f else { continue };
            if !live[i] {
                for &b in &self.islands[i].buses {
                    vm[b] = 0.0;
                }
                continue;
            }
            let mut rhs = DVector::from_iterator(f.qv.unknowns.len(), f.qv.unknowns.iter().map(|&b| injection[b]));
            for (k, a, b) in closed_branches(case, statuses) {
                let y = 1.0 / case.branches[k].x;
                if f.qv.pos[a] != usize::MAX && f.voltage_fixed[b] {
                    rhs[f.qv.pos[a]] += y * vm[b];
                }
                if f.qv.pos[b] != usize::MAX && f.voltage_fixed[a] {
                    rhs[f.qv.pos[b]] += y * vm[a];
                }
            }
            let sol = f.qv.solve(rhs);
            for (p, &b) in f.qv.unknowns.iter().enumerate() {
                vm[b] = sol[p];
            }
        }
        let alive = |bus: usize| {
            let i = self.island_of_bus[bus];
            live[i] && self.factors[i].is_some()
        };
        for (b, v) in vm.iter_mut().enumerate() {
            if !alive(b) {
                *v = 0.0;
            }
        }
        let mut branch_q = vec![0.0; case.branches.len()];
        // reactive power leaving each bus through its branches
        let mut outflow = vec![0.0; n];
        for (k, a, b) in closed_branches(case, statuses) {
            if !alive(a) {
                continue;
            }
            let br = &case.branches[k];
            let series = (vm[a] - vm[b]) / br.x;
            let half = br.charging / 2.0;
            branch_q[k] = (series - half) * base;
            outflow[a] += (series - half) * base;
            outflow[b] += (-series - half) * base;
        }
        let mut gen_q = vec![0.0; case.generators.len()];
        let mut gens_at_bus = vec![0usize; n];
        for (g, gen) in case.generators.iter().enumerate() {
            if statuses.gen_on[g] {
                gens_at_bus[case.bus_idx(gen.bus).unwrap()] += 1;
            }
        }
        for (g, gen) in case.generators.iter().enumerate() {
            let b = case.bus_idx(gen.bus).unwrap();
            if !statuses.gen_on[g] || !alive(b) {
                continue;
            }
            let bus = &case.buses[b];
            let mut local = outflow[b];
            if statuses.load_on[b] {
                local += bus.load_mvar;
            }
            if statuses.shunt_on[b] {
                local -= bus.shunt_mvar;
            }
            gen_q[g] = local / gens_at_bus[b] as f64;
        }
        QvFlow { vm, branch_q, gen_q }
    }
}

/// One-shot DC solve with every island that has generation live.
pub fn solve_dc(case: &GridCase, statuses: &Statuses, gen_p: &[f64]) -> (DcFlow, Topology) {
    let topo = Topology::build(case, statuses);
    let live: Vec<bool> = (0..topo.islands.len()).map(|i| topo.solvable(i)).collect();
    (topo.solve_dc(case, statuses, gen_p, &live), topo)
}

/// One-shot Q-V solve with every island that has generation live.
pub fn solve_qv(case: &GridCase, statuses: &Statuses, vset: &[f64]) -> QvFlow {
    let topo = Topology::build(case, statuses);
    let live: Vec<bool> = (0..topo.islands.len()).map(|i| topo.solvable(i)).collect();
    topo.solve_qv(case, statuses, vset, &live)
}
