use proptest::prelude::*;

use super::*;
use crate::ast::{normalize, ITypeRef};
use crate::parser::{parse_model, parse_term};

const BUFFER: &str = include_str!(concat!(env!("CARGO_MANIFEST_DIR"), "/../../models/buffer.shype"));
const ASSEMBLER: &str = include_str!(concat!(env!("CARGO_MANIFEST_DIR"), "/../../models/assembler.shype"));
const NIL: &str = include_str!(concat!(env!("CARGO_MANIFEST_DIR"), "/../../models/nil.shype"));

fn c() -> ITypeRef {
    ITypeRef::new("const", &[])
}

fn buffer() -> Lts {
    build_lts(&parse_model(BUFFER).unwrap()).unwrap()
}

fn input_on_output_off() -> OperationalState {
    OperationalState::new()
        .update("in", 20.0, c())
        .update("out", 0.0, c())
        .update("f", 0.0, c())
        .update("t", 1.0, c())
}

#[test]
fn buffer_has_four_configurations() {
    let lts = buffer();
    assert_eq!(lts.configs.len(), 4);
    assert_eq!(lts.distinct_states().len(), 4);
    assert!(lts.distinct_states().contains(&input_on_output_off()));
    let init = lts.state(lts.initial);
    assert_eq!(init, &input_on_output_off().update("in", 0.0, c()));
    assert_eq!(
        lts.events(),
        ["empty", "fail", "full", "off_in", "off_out", "on_in", "on_out"].into_iter().collect()
    );
}

#[test]
fn buffer_transitions() {
    let lts = buffer();
    // every configuration can fail, and fail changes nothing
    for c in 0..lts.configs.len() {
        let fails: Vec<_> = lts.outgoing(c).filter(|t| t.event == "fail").collect();
        assert_eq!(fails.len(), 1);
        assert_eq!(fails[0].tgt, c);
    }
    let on = lts
        .transitions
        .iter()
        .find(|t| t.src == lts.initial && t.event == "on_in")
        .unwrap();
    assert_eq!(lts.state(on.tgt).get("in").unwrap().strength, 20.0);
    assert!(lts.transitions.iter().all(|t| t.multiplicity == 1));
}

#[test]
fn nil_controller() {
    let lts = build_lts(&parse_model(NIL).unwrap()).unwrap();
    assert_eq!(lts.configs.len(), 1);
    assert!(lts.transitions.is_empty());
}

#[test]
fn prefix_rules() {
    let m = prepare(&parse_model(BUFFER).unwrap()).unwrap();
    let s = input_on_output_off();
    let t = parse_term("on_in:(in, 7, const).Input").unwrap();
    let succ = successors(&m, &t, &s).unwrap();
    assert_eq!(succ.len(), 1);
    assert_eq!(succ[0].0, "on_in");
    assert_eq!(succ[0].2, s.update("in", 7.0, c()));
    let t = parse_term("fail.Con_fail").unwrap();
    let succ = successors(&m, &t, &s).unwrap();
    assert_eq!(succ, vec![("fail".to_string(), Term::constant("Con_fail"), s.clone(), 1)]);
}

#[test]
fn duplicated_stochastic_prefix_counts_twice() {
    let src = BUFFER.replace(
        "Drop =def init:(f, 0, const).Drop + fail:(f, 0, const).Drop;",
        "Drop =def init:(f, 0, const).Drop + fail:(f, 0, const).Drop + on_in:(f, 0, const).Drop + on_in:(f, 0, const).Drop;",
    );
    let m = parse_model(&src).unwrap();
    // oracle: count the on_in summands of each subcomponent body
    let count = |name: &str| {
        m.definition(name)
            .unwrap()
            .body
            .summands()
            .iter()
            .filter(|t| matches!(t, Term::Prefix { event, .. } if event == "on_in"))
            .count()
    };
    let expected = count("Input") * count("Drop");
    assert_eq!(expected, 2);
    let lts = build_lts(&m).unwrap();
    for t in lts.transitions.iter().filter(|t| t.event == "on_in") {
        assert_eq!(t.multiplicity, expected);
    }
    assert!(lts.transitions.iter().any(|t| t.event == "on_in"));
}

#[test]
fn ode_of_buffer_modes() {
    let lts = buffer();
    let m = &lts.model;
    let on = ode_system_for(&input_on_output_off(), m).unwrap();
    let env: [(&str, f64); 0] = [];
    assert_eq!(on["B"].eval(&env).unwrap(), 20.0);
    assert_eq!(on["T"].eval(&env).unwrap(), 1.0);
    assert_eq!(on["C"].eval(&env).unwrap(), 0.0);
    let off = ode_system_for(&input_on_output_off().update("in", 0.0, c()), m).unwrap();
    // oracle: 0 + 0 + 0
    assert_eq!(off["B"].eval(&env).unwrap(), 0.0);
}

#[test]
fn assembler_feeds_add_up() {
    let lts = build_lts(&parse_model(ASSEMBLER).unwrap()).unwrap();
    let ode = lts.ode(lts.initial).unwrap();
    let env = [("W1", 1.0), ("W2", 1.0)];
    assert_eq!(ode["P"].eval(&env).unwrap(), 20.0 + 20.0 + 20.0);
    assert_eq!(ode["W1"].eval(&[("W1", 3.0)]).unwrap(), 0.05 * 3.0);
}

#[test]
fn build_is_deterministic() {
    let a = lts_to_json(&buffer());
    let b = lts_to_json(&buffer());
    assert_eq!(a, b);
    let lts = build_lts(&parse_model(ASSEMBLER).unwrap()).unwrap();
    assert_eq!(lts_to_json(&lts), lts_to_json(&build_lts(&parse_model(ASSEMBLER).unwrap()).unwrap()));
}

#[test]
fn dot_lists_every_configuration() {
    let dot = lts_to_dot(&buffer());
    assert_eq!(dot.matches(" [label=").count(), 4 + buffer().transitions.len());
    assert!(dot.starts_with("digraph"));
}

#[test]
fn state_cap() {
    let m = parse_model(ASSEMBLER).unwrap();
    assert_eq!(build_lts_capped(&m, 3).unwrap_err(), LtsError::StateSpaceCap(3));
}

#[test]
fn controller_shared_set_is_fixed_syntactically() {
    // after `done` the controller is 0; the system must still wait for it
    let src = "variables X; events go, done;
        subcomponent S =def init:(s, 1, const).S + go:(s, 0, const).S + done:(s, 2, const).S;
        controller C =def done.0 || go.0;
        system Y =def S <*> init.C;
        iv s = X;
        ec init = (true, X' = 0); go = (X >= 1, true); done = (X >= 2, true);
        types const = 1;";
    let lts = build_lts(&parse_model(src).unwrap()).unwrap();
    assert_eq!(lts.transitions.iter().filter(|t| t.event == "done").count(), 2);
    assert_eq!(lts.configs.len(), 5);
    let last = lts.find_term(&parse_term("S <done, go, init> (0 || 0)").unwrap());
    assert_eq!(last.len(), 2);
    assert!(last.iter().all(|&c| lts.outgoing(c).next().is_none()));
}

#[test]
fn configs_with_equal_state_have_equal_odes() {
    for src in [BUFFER, ASSEMBLER] {
        let lts = build_lts(&parse_model(src).unwrap()).unwrap();
        for a in 0..lts.configs.len() {
            for b in 0..lts.configs.len() {
                if lts.configs[a].state == lts.configs[b].state {
                    let (oa, ob) = (lts.ode(a).unwrap(), lts.ode(b).unwrap());
                    let na: Vec<_> = oa.values().map(normalize).collect();
                    let nb: Vec<_> = ob.values().map(normalize).collect();
                    assert_eq!(na, nb);
                }
            }
        }
    }
}

fn random_model(strengths: &[Vec<i8>], controller_events: &[bool]) -> String {
    let n = strengths.len();
    let mut subs = String::new();
    let mut iv = String::new();
    for (i, row) in strengths.iter().enumerate() {
        let mut body = format!("init:(i{i}, 0, const).S{i}");
        for (j, r) in row.iter().enumerate() {
            body.push_str(&format!(" + e{j}:(i{i}, {r}, const).S{i}"));
        }
        subs.push_str(&format!("S{i} =def {body};\n"));
        iv.push_str(&format!("i{i} = X; "));
    }
    let k = strengths[0].len();
    let events: Vec<String> = (0..k).map(|j| format!("stoch e{j}")).collect();
    let con: Vec<String> = (0..k)
        .map(|j| if controller_events[j] { format!("e{j}.C") } else { format!("e{j}.0") })
        .collect();
    let sigma: Vec<String> = (0..n).map(|i| format!("S{i}")).collect();
    let ec: Vec<String> = (0..k).map(|j| format!("e{j} = ({}, true);", j + 1)).collect();
    format!(
        "variables X; events {};
         subcomponent {subs}
         controller C =def {};
         system Y =def ({}) <*> init.C;
         iv {iv}
         ec init = (true, X' = 0); {}
         types const = 1;",
        events.join(", "),
        con.join(" + "),
        sigma.join(" <*> "),
        ec.join(" ")
    )
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn generated_models_build_deterministically(
        (strengths, cyc) in (1usize..4, 1usize..4).prop_flat_map(|(n, k)| (
            prop::collection::vec(prop::collection::vec(-3i8..4, k), n),
            prop::collection::vec(any::<bool>(), k),
        ))
    ) {
        let src = random_model(&strengths, &cyc);
        let m = parse_model(&src)?;
        prop_assert!(crate::ast::validate::validate_well_defined(&m).is_ok());
        // Γ is always defined on well-defined models, so this never fails
        let a = build_lts(&m)?;
        let b = build_lts(&m)?;
        prop_assert_eq!(lts_to_json(&a), lts_to_json(&b));
        for t in &a.transitions {
            prop_assert!(t.multiplicity >= 1);
        }
        // every configuration is reachable from the initial one
        let mut seen = vec![false; a.configs.len()];
        let mut stack = vec![a.initial];
        while let Some(c) = stack.pop() {
            if !std::mem::replace(&mut seen[c], true) {
                stack.extend(a.outgoing(c).map(|t| t.tgt));
            }
        }
        prop_assert!(seen.iter().all(|&s| s));
    }
}
