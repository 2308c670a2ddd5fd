use std::collections::BTreeSet;

use proptest::prelude::*;

use super::bisim::refinement_schedules_agree;
use super::*;
use crate::ast::{canonical_key, ITypeRef, Model, Term};
use crate::lts::build_lts;
use crate::parser::{parse_model, parse_term};

macro_rules! model {
    ($name:literal) => {
        parse_model(include_str!(concat!(env!("CARGO_MANIFEST_DIR"), "/../../models/", $name, ".shype"))).unwrap()
    };
}

fn feeds(a: [f64; 3]) -> Model {
    let m = model!("feeds");
    let m = m.with_param("a1", a[0]).unwrap();
    let m = m.with_param("a2", a[1]).unwrap();
    m.with_param("a3", a[2]).unwrap()
}

fn state(entries: &[(&str, f64, &str)]) -> OperationalState {
    let mut s = OperationalState::new();
    for (i, r, t) in entries {
        let itype = if *t == "const" {
            ITypeRef::new("const", &[])
        } else {
            ITypeRef::new("linear", &[t])
        };
        s = s.update(i, *r, itype);
    }
    s
}

fn sig_model() -> Model {
    parse_model(
        "variables X, Y; events e;
         subcomponent S =def init:(p, 1, const).S + e:(p, 1, const).S;
         Q =def init:(q, 1, const).Q + e:(q, 1, const).Q;
         R =def init:(r, 1, const).R + e:(r, 1, const).R;
         controller C =def e.C;
         system P =def (S <*> Q <*> R) <*> init.C;
         iv p = X; q = X; r = Y;
         ec init = (true, X' = 0); e = (X >= 1, true);
         types const = 1; linear(V) = V; also(V) = V;",
    )
    .unwrap()
}

#[test]
fn signature_sums_strengths_per_variable_and_type() {
    let m = feeds([5.0, 7.0, 8.0]);
    let lts = build_lts(&m).unwrap();
    let sig = state_signature(lts.state(lts.initial), &lts.model).unwrap();
    assert_eq!(sig[&("P".to_string(), "1".to_string())], 20.0);
    assert_eq!(sig.len(), 1);
    let s = lts.state(lts.initial);
    assert_eq!(state_signature(s, &lts.model).unwrap(), sig);
}

#[test]
fn equal_sums_with_different_types_are_not_doteq() {
    let m = sig_model();
    let a = state(&[("p", 2.0, "const"), ("q", 1.0, "const")]);
    let b = state(&[("p", 2.0, "const"), ("q", 1.0, "X")]);
    let c = state(&[("p", 1.0, "const"), ("q", 2.0, "const")]);
    let eq = |x: &OperationalState, y: &OperationalState| {
        states_equivalent(StateEquivKind::DotEq, (x, &m), (y, &m)).unwrap()
    };
    assert!(!eq(&a, &b));
    assert!(eq(&a, &c));
    assert!(!states_equivalent(StateEquivKind::Equality, (&a, &m), (&c, &m)).unwrap());
    // distinct names, same body
    let d = state(&[("p", 2.0, "const"), ("q", 1.0, "const")]);
    let e = d.update("q", 1.0, ITypeRef::new("also", &["X"]));
    assert!(eq(&e, &b));
    // strengths on different variables do not mix
    let f = state(&[("p", 2.0, "const"), ("r", 1.0, "const")]);
    assert!(!eq(&a, &f));
}

#[test]
fn cancelling_strengths_vanish() {
    let m = sig_model();
    let a = state(&[("p", 0.1, "const"), ("q", 0.2, "const"), ("r", 0.0, "const")]);
    let b = state(&[("p", 0.3, "const")]);
    assert!(states_equivalent(StateEquivKind::DotEq, (&a, &m), (&b, &m)).unwrap());
    let z = state(&[("p", 0.1, "const"), ("q", -0.1, "const")]);
    assert!(state_signature(&z, &m).unwrap().is_empty());
}

#[test]
fn rate_to_class_aggregates_multiplicities() {
    let m = model!("buffer");
    let lts = build_lts(&m).unwrap();
    let t = lts.transitions.iter().find(|t| t.event == "on_in").unwrap();
    let target: BTreeSet<usize> = [t.tgt].into();
    let r = rate_to_class(&lts, t.src, "on_in", &target).unwrap();
    assert_eq!(r, Rate { coeff: 0.4, expr: None });
    let r = rate_to_class(&lts, t.src, "off_in", &target).unwrap();
    assert_eq!(r.coeff, 0.0);
    let all: BTreeSet<usize> = (0..lts.configs.len()).collect();
    assert_eq!(rate_to_class(&lts, t.tgt, "on_in", &all).unwrap().coeff, 0.0);

    let src = include_str!(concat!(env!("CARGO_MANIFEST_DIR"), "/../../models/buffer.shype")).replace(
        "Drop =def init:(f, 0, const).Drop",
        "Drop =def init:(f, 0, const).Drop + on_in:(f, 0, const).Drop + on_in:(f, 0, const).Drop",
    );
    let lts = build_lts(&parse_model(&src).unwrap()).unwrap();
    for c in 0..lts.configs.len() {
        // brute force: every derivation counted once
        let mult: usize = lts.outgoing(c).filter(|t| t.event == "on_in").map(|t| t.multiplicity).sum();
        let r = rate_to_class(&lts, c, "on_in", &all).unwrap();
        assert!((r.coeff - 0.4 * mult as f64).abs() < 1e-12);
        if mult > 0 {
            assert_eq!(mult, 2);
        }
    }
}

#[test]
fn model_is_system_bisimilar_to_itself() {
    let m = model!("buffer");
    let r = check_system_bisim(&m, &m).unwrap();
    assert!(r.bisimilar, "{:?}", r.witness);
    assert_eq!(r.partition.block_of(0, 0), r.partition.block_of(1, 0));
}

#[test]
fn timer_refactoring_is_not_system_bisimilar() {
    let r = check_system_bisim(&model!("assembler"), &model!("assembler_t")).unwrap();
    assert!(!r.bisimilar);
    let w = r.witness.unwrap();
    assert!(w.reason.contains("variables"), "{}", w.reason);
}

#[test]
fn perturbed_flow_is_not_system_bisimilar() {
    let m = model!("buffer");
    let r = check_system_bisim(&m, &m.with_param("r_in", 21.0).unwrap()).unwrap();
    assert!(!r.bisimilar);
    let w = r.witness.unwrap();
    assert_eq!(w.path, vec!["on_in".to_string()]);
    assert!(w.reason.starts_with("states differ"), "{}", w.reason);
    assert!(w.reason.contains("21"));
}

#[test]
fn changed_rate_is_found_with_its_block() {
    let m = model!("buffer");
    let other = m.with_param("k_in_on", 0.5).unwrap();
    let r = check_stochastic_system_bisim(&m, &other, StateEquivKind::Equality).unwrap();
    assert!(!r.bisimilar);
    let w = r.witness.unwrap();
    assert!(w.path.is_empty());
    assert!(w.reason.contains("on_in") && w.reason.contains("0.4") && w.reason.contains("0.5"), "{}", w.reason);
    let r = check_system_bisim(&m, &other).unwrap();
    assert!(!r.bisimilar);
    assert!(r.witness.unwrap().reason.contains("rates of `on_in` differ"));
}

#[test]
fn state_dependent_rates_must_match_syntactically() {
    let src = include_str!(concat!(env!("CARGO_MANIFEST_DIR"), "/../../models/buffer.shype"));
    let a = parse_model(&src.replace("on_in = (k_in_on, true)", "on_in = (B / 100, true)")).unwrap();
    let b = parse_model(&src.replace("on_in = (k_in_on, true)", "on_in = (B / 50, true)")).unwrap();
    let c = parse_model(&src.replace("on_in = (k_in_on, true)", "on_in = (0.01 * B, true)")).unwrap();
    let err = check_stochastic_system_bisim(&a, &b, StateEquivKind::Equality).unwrap_err();
    assert!(matches!(err, EquivError::NonComparableRate { ref event, .. } if event == "on_in"), "{err}");
    let r = check_stochastic_system_bisim(&a, &c, StateEquivKind::Equality).unwrap();
    assert!(r.bisimilar, "{:?}", r.witness);
}

fn relation_b() -> Vec<(Term, Term)> {
    [
        ("(C1 || C2) <*> Cm", "D"),
        ("(C1'' || C2'') <*> Cm", "D4"),
        ("(C1' || C2) <*> Cm'", "D11"),
        ("(C1 || C2') <*> Cm''", "D12"),
        ("(C1'' || C2) <*> Cm", "D21"),
        ("(C1 || C2'') <*> Cm", "D22"),
        ("(C1'' || C2') <*> Cm''", "D31"),
        ("(C1' || C2'') <*> Cm'", "D32"),
    ]
    .iter()
    .map(|(a, b)| (parse_term(a).unwrap(), parse_term(b).unwrap()))
    .collect()
}

fn leaves(t: &Term) -> Vec<String> {
    t.coop_leaves().iter().map(|l| l.to_string()).collect()
}

fn controller(t: &Term) -> Vec<String> {
    match t {
        Term::Coop(_, _, c) => leaves(c),
        t => leaves(t),
    }
}

#[test]
fn controllers_are_equivalent() {
    let (p, q) = (model!("assembler"), model!("assembler_d"));
    let r = check_stochastic_system_bisim(&p, &q, StateEquivKind::Equality).unwrap();
    assert!(r.bisimilar, "{:?}", r.witness);
    let (lp, lq) = (build_lts(&p).unwrap(), build_lts(&q).unwrap());
    for (a, b) in relation_b() {
        let (la, lb) = (leaves(&a), leaves(&b));
        let ps: Vec<usize> = (0..lp.configs.len())
            .filter(|&c| controller(lp.term(c)).starts_with(&la))
            .collect();
        assert!(!ps.is_empty(), "{a}");
        for c in ps {
            let block = &r.partition.blocks[r.partition.block_of(0, c).unwrap()];
            assert!(
                block
                    .iter()
                    .any(|n| n.model == 1 && controller(lq.term(n.config)).starts_with(&lb)),
                "{a} / {b}"
            );
        }
    }
    assert_eq!(
        verify_relation(&p, &q, &relation_b(), StateEquivKind::Equality).unwrap(),
        Verification::Verified
    );
    assert_eq!(
        verify_partition(&p, &q, &r.partition, StateEquivKind::Equality).unwrap(),
        Verification::Verified
    );
}

#[test]
fn broken_relation_names_the_pair() {
    let (p, q) = (model!("assembler"), model!("assembler_d"));
    let mut b = relation_b();
    b[4].1 = parse_term("D22").unwrap();
    match verify_relation(&p, &q, &b, StateEquivKind::Equality).unwrap() {
        Verification::Violation { left, right, .. } => {
            assert_eq!((left.as_str(), right.as_str()), ("C1'' || C2 <*> Cm", "D22"));
        }
        v => panic!("{v:?}"),
    }
    b[4].1 = parse_term("Nope").unwrap();
    assert_eq!(
        verify_relation(&p, &q, &b, StateEquivKind::Equality).unwrap_err(),
        EquivError::UnknownDerivative {
            model: 1,
            term: "Nope".into()
        }
    );
}

#[test]
fn identity_relation_is_verified() {
    let m = model!("buffer");
    let lts = build_lts(&m).unwrap();
    let pairs: Vec<(Term, Term)> = (0..lts.configs.len())
        .map(|c| match lts.term(c) {
            Term::Coop(_, _, con) => ((**con).clone(), (**con).clone()),
            t => (t.clone(), t.clone()),
        })
        .collect();
    assert_eq!(
        verify_relation(&m, &m, &pairs, StateEquivKind::Equality).unwrap(),
        Verification::Verified
    );
}

#[test]
fn feeds_with_equal_total_inflow_are_doteq_bisimilar() {
    let a = feeds([5.0, 7.0, 8.0]);
    for (other, expect) in [
        (feeds([10.0, 5.0, 5.0]), true),
        (model!("feed_single"), true),
        (feeds([10.0, 5.0, 6.0]), false),
    ] {
        let r = check_stochastic_system_bisim(&a, &other, StateEquivKind::DotEq).unwrap();
        assert_eq!(r.bisimilar, expect, "{:?}", r.witness);
        // with equality on states only identical inflows match
        let r = check_stochastic_system_bisim(&a, &other, StateEquivKind::Equality).unwrap();
        assert!(!r.bisimilar);
    }
    let r = check_stochastic_system_bisim(&a, &feeds([10.0, 5.0, 6.0]), StateEquivKind::DotEq).unwrap();
    assert!(r.witness.unwrap().reason.starts_with("states differ"));
}

#[test]
fn doteq_blocks_share_their_odes() {
    let a = feeds([5.0, 7.0, 8.0]);
    for other in [feeds([10.0, 5.0, 5.0]), model!("feed_single")] {
        let r = check_stochastic_system_bisim(&a, &other, StateEquivKind::DotEq).unwrap();
        let lts = [build_lts(&a).unwrap(), build_lts(&other).unwrap()];
        for block in &r.partition.blocks {
            let odes: BTreeSet<Vec<(String, String)>> = block
                .iter()
                .map(|n| {
                    lts[n.model]
                        .ode(n.config)
                        .unwrap()
                        .iter()
                        .map(|(v, e)| (v.clone(), canonical_key(e)))
                        .collect()
                })
                .collect();
            assert_eq!(odes.len(), 1, "{odes:?}");
        }
    }
}

#[test]
fn system_bisimilarity_implies_stochastic() {
    let pairs = [
        (model!("buffer"), model!("buffer")),
        (feeds([5.0, 7.0, 8.0]), feeds([5.0, 7.0, 8.0])),
        (model!("assembler"), model!("assembler")),
        (model!("assembler"), model!("assembler_d")),
    ];
    for (p, q) in &pairs {
        let sys = check_system_bisim(p, q).unwrap();
        let sto = check_stochastic_system_bisim(p, q, StateEquivKind::Equality).unwrap();
        assert!(!sys.bisimilar || sto.bisimilar);
        assert_eq!(
            verify_partition(p, q, &sto.partition, StateEquivKind::Equality).unwrap(),
            Verification::Verified
        );
    }
}

#[test]
fn witness_follows_instantaneous_moves() {
    let src = include_str!(concat!(env!("CARGO_MANIFEST_DIR"), "/../../models/buffer.shype"));
    let a = parse_model(src).unwrap();
    let b = parse_model(&src.replace("Con_in' =def off_in.Con_in + full.Con_in", "Con_in' =def off_in.Con_in + full.Con_in'")).unwrap();
    let r = check_stochastic_system_bisim(&a, &b, StateEquivKind::Equality).unwrap();
    assert!(!r.bisimilar);
    let w = r.witness.unwrap();
    assert_eq!(w.path.first().map(String::as_str), Some("on_in"));
    assert!(w.path.contains(&"full".to_string()), "{w:?}");
}

#[test]
fn buffer_is_well_behaved() {
    let v = check_well_behaved(&model!("buffer")).unwrap();
    assert!(v.is_well_behaved(), "{v:?}");
    assert!(check_well_behaved(&model!("buffer_sugar")).unwrap().is_well_behaved());
}

#[test]
fn cyclic_controller_with_stochastic_event_is_well_behaved() {
    assert_eq!(
        check_well_behaved(&model!("cycle")).unwrap(),
        Verdict::WellBehaved {
            reason: "every cycle of every controller component contains a stochastic event".into()
        }
    );
    assert!(check_well_behaved(&model!("assembler")).unwrap().is_well_behaved());
}

#[test]
fn mutual_activation_is_reported() {
    assert_eq!(
        check_well_behaved(&model!("zeno")).unwrap(),
        Verdict::Unknown {
            cycles: vec![vec!["a".into(), "b".into()]]
        }
    );
    let g = i_graph(&model!("zeno")).unwrap();
    assert_eq!(g.edges, [("a".into(), "b".into()), ("b".into(), "a".into())].into());
}

#[test]
fn activation_respects_resets_and_supports() {
    let m = model!("buffer").instantiate().unwrap();
    assert!(!may_follow(&m, "fail", "fail"));
    assert!(!may_follow(&m, "full", "empty"));
    assert!(may_follow(&m, "full", "full"));
    assert!(may_follow(&m, "fail", "full"));
    assert!(may_follow(&m, "fail", "empty"));
    let z = model!("zeno").instantiate().unwrap();
    assert!(may_follow(&z, "a", "b"));
    assert!(!may_follow(&z, "a", "a"));
}

#[test]
fn disjoint_guards_are_pairwise_inactive() {
    let src = include_str!(concat!(env!("CARGO_MANIFEST_DIR"), "/../../models/zeno.shype"))
        .replace("b = (Y = 1, X' = 1 and Y' = 0)", "b = (Y = 1, X' = 2 and Y' = 0)")
        .replace("a = (X = 1, Y' = 1 and X' = 0)", "a = (X = 1, Y' = 3 and X' = 0)");
    let v = check_well_behaved(&parse_model(&src).unwrap()).unwrap();
    assert_eq!(
        v,
        Verdict::WellBehaved {
            reason: "no instantaneous event can enable an instantaneous event".into()
        }
    );
}

/// Controller cycling through `events`, written once or unrolled twice.
fn cyclic(name: &str, events: &[usize], unroll: usize) -> String {
    let n = events.len() * unroll;
    (0..n)
        .map(|i| format!("{name}{i} =def e{}.{name}{};\n", events[i % events.len()], (i + 1) % n))
        .collect()
}

fn congruence_model(events: &[usize], other: &[usize], unroll: usize, op: &str) -> String {
    let k = 3;
    let decl: Vec<String> = (0..k).map(|j| if j == 2 { format!("stoch e{j}") } else { format!("e{j}") }).collect();
    let ec: Vec<String> = (0..k)
        .map(|j| if j == 2 { format!("e{j} = (2, X' = 0);") } else { format!("e{j} = (X >= {j}, X' = X + 1);") })
        .collect();
    let mut body = "init:(s, 1, const).S".to_string();
    for j in 0..k {
        body.push_str(&format!(" + e{j}:(s, {j}, const).S"));
    }
    let all: Vec<String> = (0..k).map(|j| format!("e{j}.Cr")).collect();
    format!(
        "variables X; events {};
         subcomponent S =def {body};
         controller {}{}Cr =def {};
         Con =def (A0 {op} B0) || Cr;
         system Sys =def S <*> init.Con;
         iv s = X;
         ec init = (true, X' = 0); {}
         types const = 1;",
        decl.join(", "),
        cyclic("A", events, unroll),
        cyclic("B", other, 1),
        all.join(" + "),
        ec.join(" ")
    )
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn signature_equality_matches_summed_strengths(
        entries in prop::collection::vec((0usize..3, -3i32..4, any::<bool>()), 0..6),
        other in prop::collection::vec((0usize..3, -3i32..4, any::<bool>()), 0..6),
    ) {
        let m = sig_model();
        let names = ["p", "q", "r"];
        let build = |es: &[(usize, i32, bool)]| {
            let mut s = OperationalState::new();
            for (i, r, lin) in es {
                let t = if *lin { ITypeRef::new("linear", &["X"]) } else { ITypeRef::new("const", &[]) };
                s = s.update(names[*i], *r as f64, t);
            }
            s
        };
        let (a, b) = (build(&entries), build(&other));
        let sums = |s: &OperationalState| {
            let mut out = std::collections::BTreeMap::new();
            for (i, v) in s.iter() {
                let var = if i == "r" { "Y" } else { "X" };
                *out.entry((var, v.itype.name == "linear")).or_insert(0i64) += v.strength as i64;
            }
            out.retain(|_, v| *v != 0);
            out
        };
        let doteq = states_equivalent(StateEquivKind::DotEq, (&a, &m), (&b, &m)).unwrap();
        prop_assert_eq!(doteq, sums(&a) == sums(&b));
        prop_assert!(states_equivalent(StateEquivKind::DotEq, (&a, &m), (&a, &m)).unwrap());
        prop_assert_eq!(doteq, states_equivalent(StateEquivKind::DotEq, (&b, &m), (&a, &m)).unwrap());
    }

    #[test]
    fn bisimilar_controllers_stay_bisimilar_in_context(
        events in prop::collection::vec(0usize..3, 1..4),
        other in prop::collection::vec(0usize..3, 1..4),
        coop in any::<bool>(),
    ) {
        let op = if coop { "<*>" } else { "||" };
        let once = parse_model(&congruence_model(&events, &other, 1, op)).unwrap();
        let twice = parse_model(&congruence_model(&events, &other, 2, op)).unwrap();
        let r = check_stochastic_system_bisim(&once, &twice, StateEquivKind::Equality).unwrap();
        prop_assert!(r.bisimilar, "{:?}", r.witness);
        prop_assert_eq!(
            verify_partition(&once, &twice, &r.partition, StateEquivKind::Equality).unwrap(),
            Verification::Verified
        );
    }

    #[test]
    fn refinement_order_does_not_matter(seed in any::<u64>()) {
        let (p, q) = (model!("assembler"), model!("assembler_d"));
        prop_assert!(refinement_schedules_agree(&p, &q, StateEquivKind::Equality, seed).unwrap());
        let (a, b) = (feeds([5.0, 7.0, 8.0]), model!("feed_single"));
        prop_assert!(refinement_schedules_agree(&a, &b, StateEquivKind::DotEq, seed).unwrap());
    }
}
