use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::*;
use crate::grid::{build_network, Direction};
use crate::time::SimTime;

const FIG1: &str = include_str!("../../data/fig1.net");

fn fig1_fabric() -> Fabric {
    let net = build_network(FIG1).unwrap();
    Fabric::new(AgentLayout::for_network(&net), LatencyConfig::default())
}

fn digest(id: &str) -> Payload {
    Payload::StatusDigest(StatusDigest {
        element_id: id.into(),
        breaker_status: 1,
        direction: Direction::Forward,
        i_mag_a: 1.0,
        v_mag: None,
        switch_count: None,
    })
}

#[test]
fn rule_table_is_total() {
    use AgentKind::*;
    let expect = |s: AgentKind, r: AgentKind| match (s.is_terminal(), s, r.is_terminal(), r) {
        (true, _, true, _) => ModeRule::Direct,
        (true, _, _, Regional) => ModeRule::Direct,
        (true, _, _, Central) => ModeRule::Forbidden,
        (_, Regional, true, _) => ModeRule::Radio,
        (_, Regional, _, Regional) => ModeRule::Blackboard,
        (_, Regional, _, Central) => ModeRule::Direct,
        (_, Central, _, Regional) => ModeRule::Radio,
        (_, Central, true, _) => ModeRule::Forbidden,
        (_, Central, _, Central) => ModeRule::Forbidden,
        _ => unreachable!(),
    };
    let mut n = 0;
    for s in AgentKind::ALL {
        for r in AgentKind::ALL {
            assert_eq!(mode_allowed(s, r), expect(s, r), "{s} -> {r}");
            n += 1;
        }
    }
    assert_eq!(n, 16);
    assert_eq!(mode_allowed(TerminalBranch, TerminalBranch), ModeRule::Direct);
    assert_eq!(mode_allowed(Regional, Regional), ModeRule::Blackboard);
    assert_eq!(mode_allowed(Central, TerminalBranch), ModeRule::Forbidden);
}

#[test]
fn layout_matches_feeders() {
    let net = build_network(FIG1).unwrap();
    let l = AgentLayout::for_network(&net);
    assert_eq!(l.regionals(), ["R1", "R2"]);
    assert_eq!(l.home["B3"], "R1");
    assert_eq!(l.home["B6"], "R2");
    assert_eq!(l.home["CCHP"], "R2");
    assert_eq!(l.home["PV"], "R1");
    // Feeder heads sit in both areas.
    assert_eq!(l.agents["B1"].area_ids, ["A1", "A2"]);
    assert_eq!(l.agents["B5"].area_ids, ["A1", "A2"]);
    assert_eq!(l.agents["B7"].area_ids, ["A2"]);
    assert!(l.links.linked("B1", "B2"));
    assert!(!l.links.linked("B7", "B4"));
    // Each terminal has exactly one regional link, to its home agent.
    assert!(l.links.linked("B1", "R1") && !l.links.linked("B1", "R2"));
}

#[test]
fn send_examples() {
    let mut f = fig1_fabric();
    let t = SimTime::ZERO;
    assert_eq!(
        f.send(t, "B7", Mode::Direct { dest: "B4".into() }, digest("B7"), 1),
        Err(CommsError::NoLink("B7".into(), "B4".into()))
    );
    assert!(f.send(t, "B1", Mode::Direct { dest: "B2".into() }, digest("B1"), 1).is_ok());
    assert!(matches!(
        f.send(t, "R1", Mode::Direct { dest: "B1".into() }, digest("B1"), 1),
        Err(CommsError::ModeViolation { expected: ModeRule::Radio, .. })
    ));
    assert!(matches!(
        f.send(t, "B1", Mode::Direct { dest: CENTRAL_ID.into() }, digest("B1"), 1),
        Err(CommsError::ModeViolation { expected: ModeRule::Forbidden, .. })
    ));
    assert!(matches!(
        f.send(t, "R1", Mode::Radio { area: "A9".into() }, digest("B1"), 1),
        Err(CommsError::UnknownArea(_))
    ));
    assert!(matches!(
        f.send(t, "B1", Mode::BlackboardPost { key: "k".into() }, digest("B1"), 1),
        Err(CommsError::NotRegional(_))
    ));
    let with_v = Payload::StatusDigest(StatusDigest {
        element_id: "B1".into(),
        breaker_status: 1,
        direction: Direction::Forward,
        i_mag_a: 1.0,
        v_mag: Some(0.7),
        switch_count: None,
    });
    assert_eq!(
        f.send(t, "B1", Mode::Direct { dest: "B2".into() }, with_v.clone(), 1),
        Err(CommsError::SelectivityViolation("B1".into()))
    );
    assert!(f.send(t, "B1", Mode::Direct { dest: "R1".into() }, with_v, 1).is_ok());
}

#[test]
fn delivery_order_and_latency() {
    let mut f = fig1_fabric();
    assert!(f.deliver(SimTime::from_secs(10.0)).is_empty());
    let t = SimTime::from_millis(5.0);
    let a = f.send(t, "B2", Mode::Direct { dest: "B3".into() }, digest("B2"), 1).unwrap();
    let b = f.send(t, "B1", Mode::Direct { dest: "B2".into() }, digest("B1"), 1).unwrap();
    let c = f.send(t, "B1", Mode::Direct { dest: "R1".into() }, digest("B1"), 1).unwrap();
    assert!(f.deliver(t).is_empty());
    let d = f.deliver(SimTime::from_millis(6.0));
    assert_eq!(d.iter().map(|d| d.msg.seq).collect::<Vec<_>>(), [a, b]);
    let d = f.deliver(SimTime::from_millis(7.0));
    assert_eq!(d.len(), 1);
    assert_eq!(d[0].msg.seq, c);
    assert_eq!(
        d[0].record().to_string(),
        "t=0.007000 seq=2 mode=DIRECT from=B1 to=R1 type=STATUS bytes=13"
    );
}

#[test]
fn radio_skips_sender() {
    let mut layout = AgentLayout::default();
    for (id, kind) in [("R", AgentKind::Regional), ("T1", AgentKind::TerminalBranch), ("T2", AgentKind::TerminalBranch), ("T3", AgentKind::TerminalDg)] {
        layout.agents.insert(id.into(), AgentRef { id: id.into(), kind, area_ids: vec!["A".into()] });
    }
    layout.links.groups.insert("A".into(), vec!["R".into(), "T1".into(), "T2".into(), "T3".into()]);
    let mut f = Fabric::new(layout, LatencyConfig::default());
    f.send(SimTime::ZERO, "R", Mode::Radio { area: "A".into() }, digest("x"), 1).unwrap();
    let d = f.deliver(SimTime::from_secs(1.0));
    assert_eq!(d.len(), 3);
    assert!(d.iter().all(|d| d.to != Recipient::Agent("R".into())));
    assert!(matches!(
        f.send(SimTime::ZERO, "T1", Mode::Radio { area: "A".into() }, digest("x"), 1),
        Err(CommsError::ModeViolation { .. })
    ));
}

#[test]
fn blackboard_posts_land_on_delivery() {
    let mut f = fig1_fabric();
    f.send(SimTime::ZERO, "R1", Mode::BlackboardPost { key: "dg/PV".into() }, digest("PV"), 3).unwrap();
    assert!(f.blackboard().read("dg/PV").is_none());
    let d = f.deliver(SimTime::from_millis(2.0));
    assert_eq!(d[0].to, Recipient::Blackboard("dg/PV".into()));
    assert_eq!(f.blackboard().read("dg/PV").unwrap().writer, "R1");
}

fn random_send(rng: &mut ChaCha8Rng, ids: &[String], areas: &[String]) -> (String, Mode, Payload) {
    let sender = ids[rng.gen_range(0..ids.len())].clone();
    let mode = match rng.gen_range(0..3) {
        0 => Mode::Direct { dest: ids[rng.gen_range(0..ids.len())].clone() },
        1 => Mode::Radio { area: areas[rng.gen_range(0..areas.len())].clone() },
        _ => Mode::BlackboardPost { key: format!("k{}", rng.gen_range(0..3)) },
    };
    let payload = Payload::StatusDigest(StatusDigest {
        element_id: sender.clone(),
        breaker_status: 1,
        direction: Direction::Forward,
        i_mag_a: 1.0,
        v_mag: rng.gen_bool(0.3).then_some(0.8),
        switch_count: rng.gen_bool(0.2).then_some(3),
    });
    (sender, mode, payload)
}

#[test]
fn fuzzed_sends_never_violate_rules() {
    let mut f = fig1_fabric();
    let ids: Vec<String> = f.layout().agents.keys().cloned().collect();
    let mut areas: Vec<String> = f.layout().links.groups.keys().cloned().collect();
    areas.push("nowhere".into());
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut accepted = 0;
    for i in 0..10_000u64 {
        let (sender, mode, payload) = random_send(&mut rng, &ids, &areas);
        if f.send(SimTime(i * 100), &sender, mode, payload, 1).is_ok() {
            accepted += 1;
        }
    }
    let deliveries = f.deliver(SimTime::from_secs(100.0));
    assert!(accepted > 500);
    for d in deliveries {
        let sk = f.layout().kind(&d.msg.sender).unwrap();
        match &d.to {
            Recipient::Agent(r) => {
                let rk = f.layout().kind(r).unwrap();
                assert_eq!(mode_allowed(sk, rk), d.msg.mode.rule());
                if sk.is_terminal() && rk.is_terminal() {
                    assert!(!d.msg.payload.carries_voltage_or_switch_count());
                    assert!(f.layout().links.linked(&d.msg.sender, r));
                }
            }
            Recipient::Blackboard(_) => assert_eq!(sk, AgentKind::Regional),
        }
    }
}

#[test]
fn identical_send_sequences_deliver_identically() {
    let run = |seed: Option<u64>| {
        let net = build_network(FIG1).unwrap();
        let lat = LatencyConfig { jitter_seed: seed, ..LatencyConfig::default() };
        let mut f = Fabric::new(AgentLayout::for_network(&net), lat);
        let ids: Vec<String> = f.layout().agents.keys().cloned().collect();
        let areas: Vec<String> = f.layout().links.groups.keys().cloned().collect();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for i in 0..500u64 {
            let (s, m, p) = random_send(&mut rng, &ids, &areas);
            let _ = f.send(SimTime(i * 250), &s, m, p, 1);
        }
        f.deliver(SimTime::from_secs(10.0)).iter().map(|d| d.record().to_string()).collect::<Vec<_>>()
    };
    assert_eq!(run(None), run(None));
    assert_eq!(run(Some(9)), run(Some(9)));
    let jittered = run(Some(9));
    let mut times: Vec<&str> = jittered.iter().map(|l| l.split(' ').next().unwrap()).collect();
    let sorted = { let mut t = times.clone(); t.sort(); t };
    assert_eq!(times, sorted);
    times.dedup();
}

fn fold_oracle(posts: &[(u8, u64, String)]) -> Option<(u8, u64, String)> {
    // Brute force: the post no other post beats.
    posts
        .iter()
        .find(|p| {
            posts.iter().all(|q| {
                (p.0, p.1) > (q.0, q.1) || ((p.0, p.1) == (q.0, q.1) && p.2 <= q.2)
            })
        })
        .cloned()
}

proptest! {
    #[test]
    fn blackboard_retains_the_maximum(posts in prop::collection::vec((0u8..4, 0u64..5, prop::sample::select(vec!["R1", "R2", "R3"])), 1..20)) {
        let mut bb = Blackboard::new();
        let mut seen = Vec::new();
        for (i, (prio, t, w)) in posts.iter().enumerate() {
            let v = Payload::TripNotice { branch_id: format!("{i}"), stage: 1 };
            bb.post("k", v, *prio, w, AgentKind::Regional, SimTime(*t)).unwrap();
            seen.push((*prio, *t, w.to_string()));
        }
        let e = bb.read("k").unwrap();
        let want = fold_oracle(&seen).unwrap();
        prop_assert_eq!((e.priority, e.t_post.0, e.writer.clone()), want);
    }
}
