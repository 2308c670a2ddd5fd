use std::collections::BTreeMap;
use std::fmt;
use std::hash::{Hash, Hasher};

use serde::Serialize;

use crate::ast::ITypeRef;

/// Strength and influence type currently assigned to an influence.
#[derive(Debug, Clone, Serialize)]
pub struct InfluenceValue {
    pub strength: f64,
    pub itype: ITypeRef,
}

impl InfluenceValue {
    pub fn new(strength: f64, itype: ITypeRef) -> InfluenceValue {
        // -0 and 0 are the same strength
        let strength = if strength == 0.0 { 0.0 } else { strength };
        InfluenceValue { strength, itype }
    }
}

impl PartialEq for InfluenceValue {
    fn eq(&self, other: &Self) -> bool {
        self.strength.to_bits() == other.strength.to_bits() && self.itype == other.itype
    }
}

impl Eq for InfluenceValue {}

impl Hash for InfluenceValue {
    fn hash<H: Hasher>(&self, state: &mut H) {
        self.strength.to_bits().hash(state);
        self.itype.hash(state);
    }
}

impl PartialOrd for InfluenceValue {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for InfluenceValue {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.strength
            .total_cmp(&other.strength)
            .then_with(|| self.itype.cmp(&other.itype))
    }
}

impl fmt::Display for InfluenceValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {})", self.strength, self.itype)
    }
}

/// Operational state: influence name to its current value.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
#[serde(transparent)]
pub struct OperationalState(pub BTreeMap<String, InfluenceValue>);

impl OperationalState {
    pub fn new() -> OperationalState {
        OperationalState::default()
    }

    pub fn get(&self, influence: &str) -> Option<&InfluenceValue> {
        self.0.get(influence)
    }

    /// `σ[ι ↦ (r, I)]`.
    pub fn update(&self, influence: &str, strength: f64, itype: ITypeRef) -> OperationalState {
        let mut s = self.clone();
        s.0.insert(influence.to_string(), InfluenceValue::new(strength, itype));
        s
    }

    pub fn iter(&self) -> impl Iterator<Item = (&String, &InfluenceValue)> {
        self.0.iter()
    }
}

impl fmt::Display for OperationalState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("{")?;
        for (i, (k, v)) in self.0.iter().enumerate() {
            if i > 0 {
                f.write_str(", ")?;
            }
            write!(f, "{k} -> {v}")?;
        }
        f.write_str("}")
    }
}

/// Γ(σ, τ, τ′): combines the updates two cooperating agents made to σ.
/// `Err(ι)` names the first influence both sides changed differently.
pub fn merge_gamma(
    sigma: &OperationalState,
    tau: &OperationalState,
    tau2: &OperationalState,
) -> Result<OperationalState, String> {
    let mut out = BTreeMap::new();
    let keys = sigma.0.keys().chain(tau.0.keys()).chain(tau2.0.keys());
    for k in keys {
        if out.contains_key(k) {
            continue;
        }
        let (s, t, t2) = (sigma.0.get(k), tau.0.get(k), tau2.0.get(k));
        let v = if s == t2 {
            t
        } else if s == t {
            t2
        } else {
            return Err(k.clone());
        };
        if let Some(v) = v {
            out.insert(k.clone(), v.clone());
        }
    }
    Ok(OperationalState(out))
}
