//! Architecture library characterization and budget-feasible design variants.

use std::collections::BTreeMap;

use rayon::prelude::*;

use crate::arith::{ArchId, OpType};
use crate::attack::{characterize, check_budget, BudgetCheck, BudgetConstraints, ComposedMetrics, ModuleSpec};
use crate::netlist::Netlist;
use crate::sim::{activity_profile, error_metrics, power_proxy, simulate, word_shape, StreamSpec, VectorStream};

use super::{build_netlist, operators, ArchChoice, Assignment, BenchError, DesignConfig, DesignKind};

/// Architectures offered for each operator type.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Library {
    pub mul: Vec<ArchChoice>,
    pub add: Vec<ArchChoice>,
}

impl Default for Library {
    fn default() -> Self {
        let c = ArchChoice::new;
        Library {
            mul: vec![ArchChoice::EXACT, c(ArchId::Trunc, 2), c(ArchId::Trunc, 4), c(ArchId::Trunc, 6), c(ArchId::Block22, 7)],
            add: vec![
                ArchChoice::EXACT,
                c(ArchId::Loa, 2),
                c(ArchId::Loa, 4),
                c(ArchId::Loa, 6),
                c(ArchId::Trunc, 2),
                c(ArchId::Trunc, 4),
            ],
        }
    }
}

impl Library {
    pub fn exact_only() -> Self {
        Library { mul: vec![ArchChoice::EXACT], add: vec![ArchChoice::EXACT] }
    }

    fn choices(&self, op: OpType) -> &[ArchChoice] {
        match op {
            OpType::Mul => &self.mul,
            OpType::Add | OpType::Sub => &self.add,
        }
    }
}

/// Characterized modules keyed by operator, width and architecture.
#[derive(Debug, Clone, PartialEq)]
pub struct CharLibrary {
    pub stream: StreamSpec,
    pub specs: BTreeMap<(OpType, usize, ArchChoice), ModuleSpec>,
}

impl CharLibrary {
    pub fn get(&self, op: OpType, width: usize, choice: ArchChoice) -> Option<&ModuleSpec> {
        self.specs.get(&(op, width, choice))
    }
}

/// Characterizes every library architecture at each operator width the
/// design uses. Architectures invalid at a width are left out.
pub fn characterize_library(
    design: &DesignKind,
    lib: &Library,
    stream: StreamSpec,
    theta: f64,
) -> Result<CharLibrary, BenchError> {
    let mut keys: Vec<(OpType, usize, ArchChoice)> = Vec::new();
    for o in operators(design)? {
        for &c in lib.choices(o.op) {
            if c.params(o.op, o.width).validate().is_ok() && !keys.contains(&(o.op, o.width, c)) {
                keys.push((o.op, o.width, c));
            }
        }
    }
    let specs = keys
        .par_iter()
        .map(|&(op, w, c)| {
            let s = VectorStream::generate(&[("a".to_string(), w), ("b".to_string(), w)], stream);
            Ok(((op, w, c), characterize(&c.params(op, w), &s, theta)?))
        })
        .collect::<Result<BTreeMap<_, _>, BenchError>>()?;
    Ok(CharLibrary { stream, specs })
}

#[derive(Debug, Clone)]
pub struct Variant {
    pub assignment: Assignment,
    pub netlist: Netlist,
    /// Error (MRED against the integer reference) and power relative to the
    /// all-exact design.
    pub composed: ComposedMetrics,
    pub check: BudgetCheck,
    /// 0 for the first non-dominated front.
    pub front: usize,
}

/// Front index of each point under minimization of both coordinates.
pub fn pareto_fronts(points: &[(f64, f64)]) -> Vec<usize> {
    let dominates = |a: (f64, f64), b: (f64, f64)| a.0 <= b.0 && a.1 <= b.1 && (a.0 < b.0 || a.1 < b.1);
    let mut front = vec![usize::MAX; points.len()];
    let mut level = 0;
    while front.contains(&usize::MAX) {
        let open: Vec<usize> = (0..points.len()).filter(|&i| front[i] == usize::MAX).collect();
        let cur: Vec<usize> = open
            .iter()
            .copied()
            .filter(|&i| !open.iter().any(|&j| dominates(points[j], points[i])))
            .collect();
        for i in cur {
            front[i] = level;
        }
        level += 1;
    }
    front
}

/// Budget-feasible assignments ordered by front, then error, power and label;
/// at most `n_variants` of them.
pub fn generate_variants(
    design: &DesignKind,
    lib: &Library,
    clib: &CharLibrary,
    budget: &BudgetConstraints,
    n_variants: usize,
) -> Result<Vec<Variant>, BenchError> {
    if n_variants == 0 {
        return Err(BenchError::BadParams("n_variants must be at least 1".into()));
    }
    budget.validate()?;
    let ops = operators(design)?;
    let mut assignments = Vec::new();
    for &mul in &lib.mul {
        for &add in &lib.add {
            let a = Assignment { mul, add };
            if ops.iter().all(|o| clib.get(o.op, o.width, a.for_op(o.op)).is_some()) {
                assignments.push(a);
            }
        }
    }
    let build = |a: Assignment| build_netlist(&DesignConfig { design: design.clone(), assignment: a });
    let exact = build(Assignment::EXACT)?;
    let stream = VectorStream::generate(&word_shape(&exact.input_words()), clib.stream);
    let reference: Vec<Vec<u64>> = {
        let rows: Vec<Vec<u64>> = (0..stream.len()).map(|t| design.reference(&stream.vector(t))).collect();
        let n_out = rows.first().map_or(0, |r| r.len());
        (0..n_out).map(|w| rows.iter().map(|r| r[w]).collect()).collect()
    };
    let base = power_proxy(&exact, &activity_profile(&simulate(&exact, &stream)?), None);
    let mut out = assignments
        .par_iter()
        .map(|&a| {
            let n = build(a)?;
            let sim = simulate(&n, &stream)?;
            let error = error_metrics(&sim.outputs, &reference).mred;
            let power = power_proxy(&n, &activity_profile(&sim), Some(&base)).ratio.unwrap_or(1.0);
            let composed = ComposedMetrics { error, power, stream: stream.spec };
            let selected: Vec<ModuleSpec> =
                ops.iter().map(|o| clib.get(o.op, o.width, a.for_op(o.op)).unwrap().clone()).collect();
            let check = check_budget(&selected, &composed, budget)?;
            Ok(Variant { assignment: a, netlist: n, composed, check, front: 0 })
        })
        .collect::<Result<Vec<_>, BenchError>>()?;
    out.retain(|v| v.check.pass && v.composed.error <= budget.e_prime && v.composed.power <= budget.p_prime);
    if out.is_empty() {
        return Err(BenchError::BudgetInfeasible);
    }
    let fronts = pareto_fronts(&out.iter().map(|v| (v.composed.error, v.composed.power)).collect::<Vec<_>>());
    for (v, f) in out.iter_mut().zip(fronts) {
        v.front = f;
    }
    out.sort_by(|a, b| {
        a.front
            .cmp(&b.front)
            .then(a.composed.error.total_cmp(&b.composed.error))
            .then(a.composed.power.total_cmp(&b.composed.power))
            .then(a.assignment.label().cmp(&b.assignment.label()))
    });
    out.truncate(n_variants);
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::StreamMode;

    fn spec() -> StreamSpec {
        StreamSpec::new(300, 5, StreamMode::Correlated { rho: 0.5 })
    }

    fn loose() -> BudgetConstraints {
        BudgetConstraints { e_prime: 1.0, p_prime: 2.0, delta_e: 10.0, delta_p: 10.0 }
    }

    #[test]
    fn fronts_by_domination() {
        let f = pareto_fronts(&[(0.0, 1.0), (0.1, 0.9), (0.1, 1.0), (0.2, 0.9), (0.3, 0.5)]);
        assert_eq!(f, vec![0, 0, 1, 1, 0]);
    }

    #[test]
    fn exact_library_gives_one_variant() {
        let d = DesignKind::fir_default();
        let lib = Library::exact_only();
        let cl = characterize_library(&d, &lib, spec(), 0.1).unwrap();
        let v = generate_variants(&d, &lib, &cl, &loose(), 10).unwrap();
        assert_eq!(v.len(), 1);
        assert_eq!(v[0].composed.error, 0.0);
    }

    #[test]
    fn small_fir_variant_count() {
        let d = DesignKind::Fir { taps: 2, coeffs: vec![3, 5], width: 4 };
        let t = |k| ArchChoice::new(ArchId::Trunc, k);
        let lib = Library { mul: vec![ArchChoice::EXACT, t(1), t(2)], add: vec![ArchChoice::EXACT, t(1), t(2)] };
        let cl = characterize_library(&d, &lib, spec(), 0.1).unwrap();
        let v = generate_variants(&d, &lib, &cl, &loose(), 20).unwrap();
        assert!(!v.is_empty() && v.len() <= 9);
        assert!(v.windows(2).all(|w| w[0].front <= w[1].front));
        assert_eq!(v[0].assignment, Assignment::EXACT);
    }

    #[test]
    fn tight_budget_is_infeasible() {
        let d = DesignKind::Fir { taps: 2, coeffs: vec![3, 5], width: 4 };
        let lib = Library { mul: vec![ArchChoice::new(ArchId::Trunc, 2)], add: vec![ArchChoice::new(ArchId::Trunc, 2)] };
        let cl = characterize_library(&d, &lib, spec(), 0.1).unwrap();
        let b = BudgetConstraints { e_prime: 0.0, p_prime: 2.0, delta_e: 1e-12, delta_p: 10.0 };
        assert!(matches!(generate_variants(&d, &lib, &cl, &b, 10), Err(BenchError::BudgetInfeasible)));
    }
}
