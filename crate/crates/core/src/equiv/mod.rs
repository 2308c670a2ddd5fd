//! State equivalences, bisimulation checking by partition refinement and
//! well-behavedness analysis.

mod bisim;
mod interval;
mod wellbehaved;

use std::collections::BTreeMap;

use serde::Serialize;
use thiserror::Error;

pub use bisim::{
    check_stochastic_system_bisim, check_system_bisim, rate_to_class, verify_partition, verify_relation,
    BisimReport, Node, Partition, Rate, Verification, Witness,
};
pub use interval::Interval;
pub use wellbehaved::{check_well_behaved, i_graph, may_follow, IGraph, Verdict};

use crate::ast::{canonical_key, ModelError};
use crate::ast::Model;
use crate::lts::{LtsError, OperationalState};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum StateEquivKind {
    /// Identical operational states.
    Equality,
    /// Equal summed strengths per variable and influence type function.
    DotEq,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EquivError {
    #[error(transparent)]
    Lts(#[from] LtsError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("rates of `{event}` cannot be compared: {left} vs {right}")]
    NonComparableRate { event: String, left: String, right: String },
    #[error("no configuration of model {model} has controller `{term}`")]
    UnknownDerivative { model: usize, term: String },
}

/// `(variable, normalized influence type body) -> summed strength`; zero sums are omitted.
pub type StateSignature = BTreeMap<(String, String), f64>;

pub fn state_signature(state: &OperationalState, model: &Model) -> Result<StateSignature, EquivError> {
    let mut sums: BTreeMap<(String, String), (f64, f64)> = BTreeMap::new();
    for (infl, val) in state.iter() {
        let var = model
            .iv
            .get(infl)
            .ok_or_else(|| ModelError::MissingInfluenceVariable(infl.clone()))?;
        let f = canonical_key(&model.resolve(&model.itype_body(&val.itype)?)?);
        let slot = sums.entry((var.clone(), f)).or_insert((0.0, 0.0));
        slot.0 += val.strength;
        slot.1 = slot.1.max(val.strength.abs());
    }
    Ok(sums
        .into_iter()
        .filter_map(|(k, (sum, scale))| {
            // cancellation noise counts as zero
            let v = if sum.abs() <= 1e-12 * scale { 0.0 } else { round_sig(sum) };
            (v != 0.0).then_some((k, v))
        })
        .collect())
}

/// Rounds to 12 significant digits so sums taken in different orders compare equal.
pub(crate) fn round_sig(x: f64) -> f64 {
    if x == 0.0 || !x.is_finite() {
        return x;
    }
    format!("{x:.11e}").parse().unwrap_or(x)
}

pub fn states_equivalent(
    kind: StateEquivKind,
    a: (&OperationalState, &Model),
    b: (&OperationalState, &Model),
) -> Result<bool, EquivError> {
    Ok(match kind {
        StateEquivKind::Equality => a.0 == b.0,
        StateEquivKind::DotEq => state_signature(a.0, a.1)? == state_signature(b.0, b.1)?,
    })
}

#[cfg(test)]
mod tests;
