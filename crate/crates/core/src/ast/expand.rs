use std::collections::BTreeSet;

use super::{
    normalize, Activation, Activity, CmpOp, DefKind, Definition, EventKind, Expr, Guard, ITypeDef,
    ITypeRef, Model, ModelError, Reset, ResetAtom, Sync, Term, INIT,
};

pub const TIME_VAR: &str = "_time";
pub const TICK_INFLUENCE: &str = "_tick";
pub const TIMER_DEF: &str = "_Timer";
pub const ONE_ITYPE: &str = "_one";

pub fn clock_var(event: &str) -> String {
    format!("_clk_{event}")
}

pub fn duration_var(event: &str) -> String {
    format!("_dur_{event}")
}

fn is_one(model: &Model, e: &Expr) -> bool {
    model
        .resolve(e)
        .map(|v| normalize(&v).as_num() == Some(1.0))
        .unwrap_or(false)
}

/// A subcomponent `S = init:(ι, 1, I).S` with ⟦I⟧ = 1, whose variable is only
/// moved by ι and is never reset after init.
fn find_timer(model: &Model) -> Option<String> {
    for d in model.definitions_of(DefKind::Subcomponent) {
        let Term::Prefix {
            event,
            activity: Some(a),
            ..
        } = &d.body
        else {
            continue;
        };
        if event != INIT || !is_one(model, &a.strength) {
            continue;
        }
        let Ok(body) = model.itype_body(&a.itype) else {
            continue;
        };
        if !is_one(model, &body) {
            continue;
        }
        let Some(var) = model.iv.get(&a.influence) else {
            continue;
        };
        let sole_influence = model
            .iv
            .iter()
            .all(|(i, v)| v != var || *i == a.influence);
        let never_reset = model
            .ec
            .iter()
            .all(|(e, ec)| e == INIT || ec.reset.get(var).is_none());
        let init_det = model
            .ec
            .get(INIT)
            .and_then(|ec| ec.reset.get(var))
            .map_or(true, |v| !v.has_random());
        if sole_influence && never_reset && init_det {
            return Some(var.clone());
        }
    }
    None
}

fn system_def_mut(model: &mut Model) -> Result<&mut Definition, ModelError> {
    let mut name = model.system().ok_or(ModelError::MissingSystem)?.name.clone();
    let mut seen = BTreeSet::new();
    loop {
        let def = model.definition(&name).ok_or(ModelError::MissingSystem)?;
        match &def.body {
            Term::Const { name: n, .. } if seen.insert(n.clone()) => name = n.clone(),
            _ => break,
        }
    }
    Ok(model
        .definitions
        .iter_mut()
        .find(|d| d.name == name)
        .expect("found above"))
}

/// Replaces every general-duration event by an instantaneous timer-driven one.
pub fn expand_general_durations(model: &Model) -> Result<Model, ModelError> {
    let sugared: Vec<String> = model
        .ec
        .iter()
        .filter(|(_, ec)| matches!(ec.activation, Activation::Duration(_)))
        .map(|(e, _)| e.clone())
        .collect();
    if sugared.is_empty() {
        return Ok(model.clone());
    }
    let mut m = model.clone();
    let taken = |m: &Model, n: &str| {
        m.variables.iter().any(|v| v == n)
            || m.params.contains_key(n)
            || m.iv.contains_key(n)
            || m.influences().contains(n)
            || m.definition(n).is_some()
            || m.itypes.contains_key(n)
            || m.event_kind(n).is_some()
    };
    let mut init_reset = m
        .ec
        .get(INIT)
        .map(|ec| ec.reset.clone())
        .ok_or_else(|| ModelError::MissingEventCondition(INIT.into()))?;

    let (time, clock_start) = match find_timer(&m) {
        Some(t) => {
            let start = match init_reset.get(&t) {
                Some(v) => v.clone(),
                None => {
                    init_reset.atoms.push(Reset::assign(&t, Expr::num(0.0)));
                    Expr::num(0.0)
                }
            };
            (t, start)
        }
        None => {
            for n in [TIME_VAR, TICK_INFLUENCE, TIMER_DEF] {
                if taken(&m, n) {
                    return Err(ModelError::NameClash(n.into()));
                }
            }
            let one = match m
                .itypes
                .iter()
                .find(|(_, d)| d.params.is_empty() && normalize(&d.body).as_num() == Some(1.0))
            {
                Some((n, _)) => n.clone(),
                None => {
                    if taken(&m, ONE_ITYPE) {
                        return Err(ModelError::NameClash(ONE_ITYPE.into()));
                    }
                    m.itypes.insert(
                        ONE_ITYPE.into(),
                        ITypeDef {
                            params: Vec::new(),
                            body: Expr::num(1.0),
                        },
                    );
                    ONE_ITYPE.into()
                }
            };
            m.variables.push(TIME_VAR.into());
            m.iv.insert(TICK_INFLUENCE.into(), TIME_VAR.into());
            let timer_body = Term::prefix(
                INIT,
                Some(Activity {
                    influence: TICK_INFLUENCE.into(),
                    strength: Expr::num(1.0),
                    itype: ITypeRef::new(one, &[]),
                }),
                Term::constant(TIMER_DEF),
            );
            let sys = system_def_mut(&mut m)?;
            let Term::Coop(sigma, sync, con) = sys.body.clone() else {
                return Err(ModelError::MalformedSystem("top level is not a cooperation".into()));
            };
            sys.body = Term::coop(
                Term::coop(*sigma, Sync::Shared, Term::constant(TIMER_DEF)),
                sync,
                *con,
            );
            let pos = m
                .definitions
                .iter()
                .rposition(|d| d.kind == DefKind::Subcomponent)
                .map_or(0, |p| p + 1);
            m.definitions.insert(
                pos,
                Definition {
                    kind: DefKind::Subcomponent,
                    name: TIMER_DEF.into(),
                    params: Vec::new(),
                    body: timer_body,
                },
            );
            init_reset.atoms.push(Reset::assign(TIME_VAR, Expr::num(0.0)));
            (TIME_VAR.to_string(), Expr::num(0.0))
        }
    };

    for e in &sugared {
        let (clk, dur) = (clock_var(e), duration_var(e));
        for n in [&clk, &dur] {
            if taken(&m, n) {
                return Err(ModelError::NameClash(n.clone()));
            }
        }
        let ec = m.ec.get(e).expect("listed").clone();
        let Activation::Duration(x) = ec.activation else {
            unreachable!()
        };
        for n in [&clk, &dur] {
            if ec.reset.get(n).is_some() {
                return Err(ModelError::NameClash(n.clone()));
            }
        }
        m.variables.push(clk.clone());
        m.variables.push(dur.clone());
        let mut atoms = vec![
            ResetAtom {
                var: clk.clone(),
                value: Expr::var(&time),
            },
            ResetAtom {
                var: dur.clone(),
                value: x.clone(),
            },
        ];
        atoms.extend(ec.reset.atoms.iter().cloned());
        let guard = Guard::cmp(
            Expr::var(&time),
            CmpOp::Eq,
            Expr::add(Expr::var(&clk), Expr::var(&dur)),
        );
        m.ec.insert(
            e.clone(),
            super::EventCondition {
                activation: Activation::Guard(guard),
                reset: Reset { atoms },
            },
        );
        m.events.insert(e.clone(), EventKind::Instantaneous);
        init_reset.atoms.push(Reset::assign(&clk, clock_start.clone()));
        init_reset.atoms.push(Reset::assign(&dur, x));
    }
    m.ec.get_mut(INIT).expect("checked").reset = init_reset;
    Ok(m)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ast::validate::validate_well_defined;
    use crate::parser::parse_model;

    const SUGAR: &str = "params Delta = 2.5; xi = 0.5;
        variables B, T;
        events stoch fail, stoch tick;
        subcomponent
          Drop =def init:(f, 0, const).Drop + fail:(f, 0, const).Drop + tick:(f, 0, const).Drop;
          Timer =def init:(t, 1, const).Timer;
        controller Con =def fail.Con + tick.Con;
        system S =def (Drop <*> Timer) <*> init.Con;
        iv f = B; t = T;
        ec init = (true, B' = 100 and T' = 0);
           fail = (LogNormal(Delta, xi), B ~ B - Uniform(0, B));
           tick = (delta(3), true);
        types const = 1;";

    #[test]
    fn reuses_existing_timer() {
        let m = parse_model(SUGAR).unwrap();
        assert!(validate_well_defined(&m).is_ok());
        let x = expand_general_durations(&m).unwrap();
        assert!(validate_well_defined(&x).is_ok(), "{:?}", validate_well_defined(&x));
        assert!(x.definition(TIMER_DEF).is_none());
        let fail = &x.ec["fail"];
        assert_eq!(fail.activation.to_string(), "T = _clk_fail + _dur_fail");
        assert_eq!(
            fail.reset.to_string(),
            "_clk_fail' = T and _dur_fail ~ LogNormal(Delta, xi) and B ~ B - Uniform(0, B)"
        );
        assert_eq!(x.event_kind("fail"), Some(EventKind::Instantaneous));
        assert_eq!(
            x.ec["tick"].reset.to_string(),
            "_clk_tick' = T and _dur_tick ~ Dirac(3)"
        );
        let init = x.ec[INIT].reset.to_string();
        assert!(init.contains("_clk_fail' = 0") && init.contains("_dur_fail ~ LogNormal(Delta, xi)"));
        assert!(x.ec.values().all(|ec| !matches!(ec.activation, Activation::Duration(_))));
    }

    #[test]
    fn adds_timer_when_absent() {
        let src = SUGAR
            .replace("Timer =def init:(t, 1, const).Timer;", "Timer =def init:(t, 2, const).Timer;");
        let m = parse_model(&src).unwrap();
        let x = expand_general_durations(&m).unwrap();
        assert!(validate_well_defined(&x).is_ok(), "{:?}", validate_well_defined(&x));
        assert!(x.definition(TIMER_DEF).is_some());
        assert!(x.variables.contains(&TIME_VAR.to_string()));
        assert!(x.ec[INIT].reset.to_string().contains("_time' = 0"));
        assert_eq!(x.ec["fail"].activation.to_string(), "_time = _clk_fail + _dur_fail");
    }

    #[test]
    fn identity_without_sugar() {
        let src = SUGAR
            .replace("(LogNormal(Delta, xi), B", "(0.3, B")
            .replace("(delta(3), true)", "(1, true)");
        let m = parse_model(&src).unwrap();
        assert_eq!(expand_general_durations(&m).unwrap(), m);
    }

    #[test]
    fn name_clash() {
        let src = SUGAR.replace("variables B, T;", "variables B, T, _clk_fail;");
        let m = parse_model(&src).unwrap();
        assert_eq!(
            expand_general_durations(&m),
            Err(ModelError::NameClash("_clk_fail".into()))
        );
    }
}
