use std::sync::{Arc, OnceLock};

use mas_core::adaptive::{build_knowledge, CoordConfig, KnowledgeBase};
use mas_core::agents::EventKind;
use mas_core::comms::LatencyConfig;
use mas_core::grid::{build_network, Network};
use mas_core::sim::{parse_log, run, SettingsMode, SimConfig};
use proptest::prelude::*;

fn fig1() -> (Network, Arc<KnowledgeBase>) {
    static KB: OnceLock<Arc<KnowledgeBase>> = OnceLock::new();
    let net = build_network(include_str!("../data/fig1.net")).unwrap();
    let kb = KB.get_or_init(|| Arc::new(build_knowledge(&net, &CoordConfig::default()).unwrap())).clone();
    (net, kb)
}

fn scenario_line() -> impl Strategy<Value = String> {
    let t = (1u32..250).prop_map(|c| f64::from(c) / 100.0);
    let branch = (1u8..=7).prop_map(|i| format!("B{i}"));
    let dg = prop::sample::select(vec!["PV", "CESS", "CCHP"]);
    prop_oneof![
        (t.clone(), branch.clone(), 0u8..=10, any::<bool>()).prop_map(|(t, b, p, perm)| format!(
            "at {t} fault {b} pos={} zf=0+j0{}",
            f64::from(p) / 10.0,
            if perm { " permanent" } else { "" }
        )),
        (t.clone(), branch.clone()).prop_map(|(t, b)| format!("at {t} clear {b}")),
        (t.clone(), dg.clone(), any::<bool>()).prop_map(|(t, d, on)| format!("at {t} dg {d} {}", if on { "on" } else { "off" })),
        (t.clone(), dg, 0u8..=5).prop_map(|(t, d, p)| format!("at {t} dg {d} p={}", f64::from(p) / 10.0)),
        (t.clone(), 1u8..=7, any::<bool>()).prop_map(|(t, l, on)| format!("at {t} load L{l} {}", if on { "on" } else { "off" })),
        (t, branch, any::<bool>()).prop_map(|(t, b, open)| format!("at {t} breaker {b} {}", if open { "open" } else { "close" })),
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn random_scenarios_keep_the_log_invariants(lines in prop::collection::vec(scenario_line(), 0..6), seed in prop::option::of(any::<u64>())) {
        let (net, kb) = fig1();
        let cfg = SimConfig { latency: LatencyConfig { jitter_seed: seed, ..Default::default() }, ..SimConfig::default() };
        let scenario = lines.join("\n");
        let r = run(&net, &SettingsMode::Adaptive(kb.clone()), &scenario, &cfg).unwrap();

        // Time never runs backwards in either log.
        prop_assert!(r.log.events.windows(2).all(|w| w[0].t <= w[1].t));
        prop_assert!(r.log.messages.windows(2).all(|w| w[0].t <= w[1].t));
        prop_assert!(r.log.events.iter().all(|e| e.t < cfg.horizon));

        // No agent ever attempts an illegal transmission.
        let comms_alarm = r.log.events.iter().find(|e| e.kind == EventKind::Alarm && e.get("reason") == Some("comms"));
        prop_assert!(comms_alarm.is_none(), "{:?}", comms_alarm);

        // Logs survive a round trip and the metrics are recomputable.
        let parsed = parse_log(&r.log.render()).unwrap();
        prop_assert_eq!(&parsed, &r.log);
        prop_assert_eq!(parsed.metrics(), r.metrics.clone());

        // Same inputs, same bytes.
        let again = run(&net, &SettingsMode::Adaptive(kb), &scenario, &cfg).unwrap();
        prop_assert_eq!(again.log.render(), r.log.render());
    }
}

#[test]
fn messages_are_logged_once_per_recipient_after_their_latency() {
    let (net, kb) = fig1();
    let r = run(&net, &SettingsMode::Adaptive(kb), "at 0.1 fault B3 pos=0.5 permanent", &SimConfig::default()).unwrap();
    // Every delivery of one sequence number shares its arrival time and has a distinct recipient.
    let mut by_seq: std::collections::BTreeMap<u64, Vec<&mas_core::comms::MessageRecord>> = Default::default();
    for m in &r.log.messages {
        by_seq.entry(m.seq).or_default().push(m);
    }
    for group in by_seq.values() {
        let to: std::collections::BTreeSet<&str> = group.iter().map(|m| m.to.as_str()).collect();
        assert_eq!(to.len(), group.len());
        assert!(group.iter().all(|m| m.t == group[0].t && m.from == group[0].from));
    }
    // The first message is the trip notice or a digest, never earlier than the fault.
    assert!(r.log.messages[0].t.as_secs() > 0.1);
}

#[test]
fn static_settings_without_a_knowledge_base_never_adapt() {
    let (net, _) = fig1();
    let r = run(
        &net,
        &SettingsMode::Frozen { kb: None, bits: None },
        "at 0.1 dg PV off\nat 0.3 fault B1 pos=0.5 permanent",
        &SimConfig::default(),
    )
    .unwrap();
    assert_eq!(r.lookups, 0);
    assert!(r.log.events.iter().all(|e| e.kind != EventKind::GroupChange));
    assert_eq!(r.metrics.verdicts(), vec![("B1".to_string(), true)]);
}
