use std::collections::BTreeSet;
use std::time::Instant;

use proptest::prelude::*;

use super::*;
use crate::ast::{Expr, Reset};
use crate::lts::{build_lts, ode_system_for};
use crate::parser::parse_model;

const BUFFER: &str = include_str!(concat!(env!("CARGO_MANIFEST_DIR"), "/../../models/buffer.shype"));
const ASSEMBLER: &str = include_str!(concat!(env!("CARGO_MANIFEST_DIR"), "/../../models/assembler.shype"));

fn buffer_model() -> Model {
    parse_model(BUFFER).unwrap()
}

fn sos(m: &Model) -> Tdsha {
    from_lts(&build_lts(m).unwrap()).unwrap()
}

fn one_mode(event: &str, reset: Reset, init: Reset) -> Tdsha {
    Tdsha {
        variables: vec!["X".into()],
        events: [(event.to_string(), EventKind::Instantaneous)].into_iter().collect(),
        modes: vec![Mode { label: "q".into() }],
        continuous: Vec::new(),
        instantaneous: vec![InstantTransition {
            src: 0,
            tgt: 0,
            event: event.into(),
            guard: Arc::new(Guard::True),
            reset: Arc::new(reset),
            weight: 1.0,
        }],
        stochastic: Vec::new(),
        init_mode: 0,
        init_reset: Arc::new(init),
    }
}

fn set_x(v: f64) -> Reset {
    Reset {
        atoms: vec![Reset::assign("X", Expr::num(v))],
    }
}

#[test]
fn buffer_sos_automaton() {
    let t = sos(&buffer_model());
    assert_eq!(t.modes.len(), 4);
    assert_eq!(t.continuous.len(), 16);
    let on_in: Vec<_> = t.stochastic.iter().filter(|s| s.event == "on_in").collect();
    assert_eq!(on_in.len(), 2);
    assert!(on_in.iter().all(|s| s.rate.as_num() == Some(0.4)));
    let full: Vec<_> = t.instantaneous.iter().filter(|d| d.event == "full").collect();
    assert_eq!(full.len(), 2);
    assert!(full.iter().all(|d| d.guard.to_string() == "B = 200" && d.weight == 1.0));
    // fail self-loops in every mode
    assert_eq!(t.instantaneous.iter().filter(|d| d.event == "fail" && d.src == d.tgt).count(), 4);
    assert!(t.init_reset.get("B").is_some());
}

#[test]
fn duplicated_stochastic_prefix_gives_parallel_edges() {
    let src = BUFFER.replace(
        "Drop =def init:(f, 0, const).Drop",
        "Drop =def init:(f, 0, const).Drop + on_in:(f, 0, const).Drop + on_in:(f, 0, const).Drop",
    );
    let base = sos(&buffer_model());
    let t = sos(&parse_model(&src).unwrap());
    let count = |t: &Tdsha| t.stochastic.iter().filter(|s| s.event == "on_in").count();
    assert_eq!(count(&t), 2 * count(&base));
}

#[test]
fn vector_field_matches_ode() {
    let m = buffer_model();
    let lts = build_lts(&m).unwrap();
    let t = from_lts(&lts).unwrap();
    let x = [37.0, 4.0, 1.0, 2.0];
    let env: BTreeMap<String, f64> = t.variables.iter().cloned().zip(x).collect();
    for c in 0..lts.configs.len() {
        let ode = ode_system_for(lts.state(c), &lts.model).unwrap();
        let vf = t.vector_field(c, &x).unwrap();
        for (i, v) in t.variables.iter().enumerate() {
            assert!((ode[v].eval(&env).unwrap() - vf[i]).abs() < 1e-12);
        }
    }
    let init = t.vector_field(t.init_mode, &x).unwrap();
    assert_eq!(init, vec![0.0, 1.0, 0.0, 0.0]);
    let on = t.stochastic.iter().find(|s| s.event == "on_in").unwrap().tgt;
    assert_eq!(t.vector_field(on, &x).unwrap(), vec![20.0, 1.0, 0.0, 0.0]);
}

#[test]
fn product_has_product_of_modes() {
    let a = one_mode("e", set_x(1.0), Reset::identity());
    let mut b = sos(&buffer_model());
    b.events.insert("e".into(), EventKind::Instantaneous);
    let p = tdsha_product(&a, &b, &BTreeSet::new()).unwrap();
    assert_eq!(p.modes.len(), a.modes.len() * b.modes.len());
    assert_eq!(p.continuous.len(), b.continuous.len());
    assert_eq!(p.instantaneous.len(), b.modes.len() + b.instantaneous.len());
    assert_eq!(p.stochastic.len(), b.stochastic.len());
}

#[test]
fn synchronized_resets_must_agree() {
    let sync: BTreeSet<String> = ["e".to_string()].into();
    let a = one_mode("e", set_x(1.0), Reset::identity());
    let p = tdsha_product(&a, &one_mode("e", set_x(1.0), Reset::identity()), &sync).unwrap();
    assert_eq!(p.instantaneous.len(), 1);
    assert_eq!(p.instantaneous[0].reset.to_string(), "X' = 1");
    let err = tdsha_product(&a, &one_mode("e", set_x(2.0), Reset::identity()), &sync).unwrap_err();
    assert_eq!(
        err,
        TdshaError::ResetIncompatible {
            event: "e".into(),
            variable: "X".into()
        }
    );
    let err = tdsha_product(
        &one_mode("e", Reset::identity(), set_x(0.0)),
        &one_mode("e", Reset::identity(), set_x(3.0)),
        &sync,
    )
    .unwrap_err();
    assert_eq!(err, TdshaError::InitIncompatible("X".into()));
}

#[test]
fn buffer_compositional_matches_sos() {
    let m = buffer_model();
    let comp = compositional_mapping(&m).unwrap();
    assert_eq!(comp.modes.len(), 16);
    let pruned = prune_unreachable(&comp);
    assert_eq!(pruned.modes.len(), 4);
    let s = sos(&m);
    let iso = graph_isomorphic(&s, &pruned).expect("isomorphic");
    assert_eq!(iso.mapping[s.init_mode], pruned.init_mode);
    let mut seen = iso.mapping.clone();
    seen.sort_unstable();
    assert_eq!(seen, (0..4).collect::<Vec<_>>());
}

#[test]
fn self_isomorphism_is_found() {
    let s = sos(&buffer_model());
    assert!(graph_isomorphic(&s, &s).is_some());
}

#[test]
fn changed_rate_breaks_isomorphism() {
    let m = buffer_model();
    let other = m.with_param("k_in_on", 0.5).unwrap();
    assert!(graph_isomorphic(&sos(&m), &sos(&other)).is_none());
    let other = m.with_param("max_B", 150.0).unwrap();
    assert!(graph_isomorphic(&sos(&m), &sos(&other)).is_none());
}

#[test]
fn assembler_compositional_matches_sos() {
    let m = parse_model(ASSEMBLER).unwrap();
    let start = Instant::now();
    let s = sos(&m);
    let comp = compositional_mapping(&m).unwrap();
    assert!(comp.modes.len() > s.modes.len());
    let pruned = prune_unreachable(&comp);
    assert_eq!(pruned.modes.len(), s.modes.len());
    assert!(graph_isomorphic(&s, &pruned).is_some());
    assert!(start.elapsed().as_secs() < 60);
}

#[test]
fn exports_mention_every_mode() {
    let t = sos(&buffer_model());
    let dot = tdsha_to_dot(&t);
    for i in 0..t.modes.len() {
        assert!(dot.contains(&format!("q{i} [")));
    }
    assert_eq!(dot.matches("style=dashed").count(), t.stochastic.len());
    let j = tdsha_to_json(&t);
    assert_eq!(j["modes"].as_array().unwrap().len(), 4);
    assert_eq!(j["init"]["mode"], t.init_mode);
}

/// Subcomponents act on every event; the controller runs two cycles over
/// chosen events, cooperating on the shared ones when `coop` is set, next to
/// a component that allows every event.
fn generated_model(strengths: &[Vec<i8>], stoch: &[bool], cycles: [&[usize]; 2], coop: bool) -> String {
    let k = stoch.len();
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
    let events: Vec<String> = (0..k)
        .map(|j| if stoch[j] { format!("stoch e{j}") } else { format!("e{j}") })
        .collect();
    let ec: Vec<String> = (0..k)
        .map(|j| {
            if stoch[j] {
                format!("e{j} = ({}, true);", j + 1)
            } else {
                format!("e{j} = (X >= {j}, X' = X - 1);")
            }
        })
        .collect();
    let mut cons = String::new();
    for (c, cyc) in cycles.iter().enumerate() {
        for (s, e) in cyc.iter().enumerate() {
            let next = if s + 1 == cyc.len() { 0 } else { s + 1 };
            cons.push_str(&format!("C{c}_{s} =def e{e}.C{c}_{next};\n"));
        }
    }
    let all: Vec<String> = (0..k).map(|j| format!("e{j}.Cr")).collect();
    cons.push_str(&format!("Cr =def {};\n", all.join(" + ")));
    let op = if coop { "<*>" } else { "||" };
    let sigma: Vec<String> = (0..strengths.len()).map(|i| format!("S{i}")).collect();
    format!(
        "variables X; events {};
         subcomponent {subs}
         controller {cons} Con =def (C0_0 {op} C1_0) || Cr;
         system Sig =def {};
         Sys =def Sig <*> init.Con;
         iv {iv}
         ec init = (true, X' = 0); {}
         types const = 1;",
        events.join(", "),
        sigma.join(" <*> "),
        ec.join(" ")
    )
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn mappings_agree_on_reachable_modes(
        (strengths, stoch, c0, c1) in (1usize..4, 1usize..4).prop_flat_map(|(n, k)| (
            prop::collection::vec(prop::collection::vec(-3i8..4, k), n),
            prop::collection::vec(any::<bool>(), k),
            prop::collection::vec(0..k, 1..4),
            prop::collection::vec(0..k, 1..4),
        )),
        coop in any::<bool>(),
    ) {
        let src = generated_model(&strengths, &stoch, [&c0, &c1], coop);
        let m = parse_model(&src)?;
        let report = crate::ast::validate::validate_well_defined(&m);
        prop_assert!(report.is_ok(), "{:?}\n{}", report, src);
        let s = sos(&m);
        let pruned = prune_unreachable(&compositional_mapping(&m)?);
        prop_assert_eq!(s.modes.len(), pruned.modes.len());
        let iso = graph_isomorphic(&s, &pruned);
        prop_assert!(iso.is_some(), "{}", src);
    }
}
