use crate::table::{ColumnType, Value};

use super::solve::{
    solve_concat, solve_div, solve_linear, solve_mod, solve_substring, solve_sum, SolverCaps,
};
use super::{FeatureFamily, FeatureInstance};

/// One row of evidence: argument values and the value the feature must produce.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Sample {
    pub inputs: Vec<Value>,
    pub output: Value,
}

pub trait FeatureSolver: Send + Sync {
    fn family(&self) -> FeatureFamily;

    fn name(&self) -> &'static str {
        self.family().name()
    }

    /// Parameters reproducing every sample, or `None`. Samples of the wrong
    /// shape are unsatisfiable rather than errors.
    fn solve(&self, samples: &[Sample], caps: &SolverCaps) -> Option<FeatureInstance>;
}

fn int_pairs(samples: &[Sample]) -> Option<Vec<(i64, i64)>> {
    samples
        .iter()
        .map(|s| match (s.inputs.as_slice(), &s.output) {
            ([Value::Int(x)], Value::Int(y)) => Some((*x, *y)),
            _ => None,
        })
        .collect()
}

struct Linear;
struct Div;
struct Mod;
struct Sum;
struct Substring;
struct Concat;

impl FeatureSolver for Linear {
    fn family(&self) -> FeatureFamily {
        FeatureFamily::Linear
    }
    fn solve(&self, samples: &[Sample], _: &SolverCaps) -> Option<FeatureInstance> {
        solve_linear(&int_pairs(samples)?)
    }
}

impl FeatureSolver for Div {
    fn family(&self) -> FeatureFamily {
        FeatureFamily::Div
    }
    fn solve(&self, samples: &[Sample], caps: &SolverCaps) -> Option<FeatureInstance> {
        solve_div(&int_pairs(samples)?, caps.div_max)
    }
}

impl FeatureSolver for Mod {
    fn family(&self) -> FeatureFamily {
        FeatureFamily::Mod
    }
    fn solve(&self, samples: &[Sample], _: &SolverCaps) -> Option<FeatureInstance> {
        solve_mod(&int_pairs(samples)?)
    }
}

impl FeatureSolver for Sum {
    fn family(&self) -> FeatureFamily {
        FeatureFamily::Sum
    }
    fn solve(&self, samples: &[Sample], _: &SolverCaps) -> Option<FeatureInstance> {
        let triples = samples
            .iter()
            .map(|s| match (s.inputs.as_slice(), &s.output) {
                ([Value::Int(x), Value::Int(y)], Value::Int(o)) => Some((*x, *y, *o)),
                _ => None,
            })
            .collect::<Option<Vec<_>>>()?;
        solve_sum(&triples)
    }
}

impl FeatureSolver for Substring {
    fn family(&self) -> FeatureFamily {
        FeatureFamily::Substring
    }
    fn solve(&self, samples: &[Sample], caps: &SolverCaps) -> Option<FeatureInstance> {
        let pairs = samples
            .iter()
            .map(|s| match (s.inputs.as_slice(), &s.output) {
                ([Value::Str(x)], Value::Str(y)) => Some((&**x, &**y)),
                _ => None,
            })
            .collect::<Option<Vec<_>>>()?;
        solve_substring(&pairs, caps)
    }
}

impl FeatureSolver for Concat {
    fn family(&self) -> FeatureFamily {
        FeatureFamily::Concat
    }
    fn solve(&self, samples: &[Sample], caps: &SolverCaps) -> Option<FeatureInstance> {
        let rows = samples
            .iter()
            .map(|s| {
                let xs = s
                    .inputs
                    .iter()
                    .map(Value::as_str)
                    .collect::<Option<Vec<_>>>()?;
                Some((xs, s.output.as_str()?))
            })
            .collect::<Option<Vec<_>>>()?;
        solve_concat(&rows, caps)
    }
}

/// Solvers by family, tried in registration order.
pub struct FeatureRegistry {
    solvers: Vec<Box<dyn FeatureSolver>>,
}

impl FeatureRegistry {
    pub fn empty() -> Self {
        FeatureRegistry {
            solvers: Vec::new(),
        }
    }

    /// The six built-in families in solving order.
    pub fn builtin() -> Self {
        let mut r = Self::empty();
        r.register(Box::new(Linear));
        r.register(Box::new(Div));
        r.register(Box::new(Mod));
        r.register(Box::new(Sum));
        r.register(Box::new(Substring));
        r.register(Box::new(Concat));
        r
    }

    /// Adds a solver, replacing any registered under the same name.
    pub fn register(&mut self, solver: Box<dyn FeatureSolver>) {
        self.solvers.retain(|s| s.name() != solver.name());
        self.solvers.push(solver);
    }

    pub fn get(&self, name: &str) -> Option<&dyn FeatureSolver> {
        self.solvers
            .iter()
            .find(|s| s.name() == name)
            .map(|s| s.as_ref())
    }

    pub fn names(&self) -> Vec<&'static str> {
        self.solvers.iter().map(|s| s.name()).collect()
    }

    /// Solvers whose family accepts the given signature, in order.
    pub fn applicable<'a>(
        &'a self,
        inputs: &'a [ColumnType],
        out: ColumnType,
    ) -> impl Iterator<Item = &'a dyn FeatureSolver> + 'a {
        self.solvers
            .iter()
            .filter(move |s| s.family().accepts(inputs, out))
            .map(|s| s.as_ref())
    }

    /// First instance from any applicable solver.
    pub fn solve(
        &self,
        inputs: &[ColumnType],
        out: ColumnType,
        samples: &[Sample],
        caps: &SolverCaps,
    ) -> Option<FeatureInstance> {
        self.applicable(inputs, out)
            .find_map(|s| s.solve(samples, caps))
    }
}

impl Default for FeatureRegistry {
    fn default() -> Self {
        Self::builtin()
    }
}

/// Families that accept `inputs` and produce `out`, in solving order.
pub fn enumerate_feature_families(inputs: &[ColumnType], out: ColumnType) -> Vec<FeatureFamily> {
    FeatureFamily::ALL
        .into_iter()
        .filter(|f| f.accepts(inputs, out))
        .collect()
}
