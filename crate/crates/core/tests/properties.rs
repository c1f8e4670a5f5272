use std::collections::BTreeMap;

use proptest::prelude::*;
use xtalk_pqc::ansatz::{build, Family, Level, PqcConfig};
use xtalk_pqc::rb::fit_decay;
use xtalk_pqc::scheduler::{sublayers_of_circuit, xtalk_schedule, ScheduleOptions};
use xtalk_pqc::simulator::effective_layer_epc;
use xtalk_pqc::{Circuit, CrosstalkTable, DeviceModel, Edge, Gate, GateKind, Param};

fn gate_strategy(n: usize) -> impl Strategy<Value = Gate> {
    let rot = (0..3usize, 0..n, prop_oneof![(-10.0f64..10.0).prop_map(Param::Angle), (0..8usize).prop_map(|slot| Param::Slot { slot })])
        .prop_map(|(k, q, p)| Gate::rotation([GateKind::Rx, GateKind::Ry, GateKind::Rz][k], q, p));
    let cx = (0..n, 1..n).prop_map(move |(a, d)| Gate::cx(a, (a + d) % n));
    let barrier = proptest::sample::subsequence((0..n).collect::<Vec<_>>(), 1..=n).prop_map(Gate::barrier);
    prop_oneof![4 => rot, 2 => cx, 1 => barrier]
}

fn circuit_strategy() -> impl Strategy<Value = Circuit> {
    (2..6usize).prop_flat_map(|n| proptest::collection::vec(gate_strategy(n), 0..30).prop_map(move |ops| Circuit::from_ops(n, dense_slots(ops)).unwrap()))
}

/// Renumbers parameter slots so they are contiguous from 0.
fn dense_slots(mut ops: Vec<Gate>) -> Vec<Gate> {
    let mut seen: Vec<usize> = ops.iter().filter_map(|g| g.slot()).collect();
    seen.sort_unstable();
    seen.dedup();
    for g in &mut ops {
        if let Some(Param::Slot { slot }) = &mut g.param {
            *slot = seen.binary_search(slot).unwrap();
        }
    }
    ops
}

/// Default device with `mults` cycled over its one-hop pairs.
fn device_with(mults: &[f64]) -> DeviceModel {
    let mut d = DeviceModel::default_device().without_crosstalk();
    for ((g1, g2), &m) in d.coupling.one_hop_pairs().into_iter().zip(mults.iter().cycle()) {
        d.set_multiplier(g1, g2, m);
    }
    d
}

/// A chain of up to `len` cx gates along the device's longest found path.
fn chain_gates(d: &DeviceModel, len: usize) -> Vec<(usize, usize)> {
    let path = d.coupling.find_path(len + 1).unwrap();
    path.windows(2).map(|w| (w[0], w[1])).collect()
}

fn ala(gates: &[(usize, usize)]) -> Vec<(usize, usize)> {
    gates.iter().step_by(2).chain(gates.iter().skip(1).step_by(2)).copied().collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn text_round_trip(c in circuit_strategy()) {
        let text = c.to_text();
        let back = Circuit::from_text(&text).unwrap();
        prop_assert_eq!(&back, &c);
        prop_assert_eq!(back.to_text(), text);
    }

    #[test]
    fn one_hop_pairs_symmetric_and_disjoint(mults in proptest::collection::vec(0.5f64..3.0, 1..8)) {
        let d = device_with(&mults);
        let pairs = d.coupling.one_hop_pairs();
        for &(a, b) in &pairs {
            prop_assert!(a.is_disjoint(b));
            prop_assert!(pairs.contains(&(b, a)));
        }
    }

    #[test]
    fn multiplier_is_scale_free(k in 0.01f64..50.0, epcs in proptest::collection::vec(1e-4f64..0.05, 4), ms in proptest::collection::vec(0.5f64..4.0, 4)) {
        let edges = [Edge::new(0, 1), Edge::new(2, 3), Edge::new(4, 5), Edge::new(6, 7)];
        let table = |scale: f64| {
            let mut t = CrosstalkTable::new(edges.iter().zip(&epcs).map(|(&e, &p)| (e, p * scale)).collect::<BTreeMap<_, _>>());
            for (i, &g1) in edges.iter().enumerate() {
                let g2 = edges[(i + 1) % 4];
                t.insert(g1, g2, epcs[i] * ms[i] * scale);
            }
            t
        };
        let (a, b) = (table(1.0), table(k));
        for (i, &g1) in edges.iter().enumerate() {
            let g2 = edges[(i + 1) % 4];
            prop_assert!((a.multiplier(g1, g2) - b.multiplier(g1, g2)).abs() <= 1e-12 * a.multiplier(g1, g2));
        }
    }

    #[test]
    fn effective_epc_permutation_invariant(mults in proptest::collection::vec(0.5f64..3.0, 1..8), seed in any::<u64>()) {
        let d = device_with(&mults);
        let layer: Vec<Edge> = ala(&chain_gates(&d, 6)).into_iter().take(3).map(|(a, b)| Edge::new(a, b)).collect();
        let base = effective_layer_epc(&layer, &d).unwrap();
        let mut order: Vec<usize> = (0..layer.len()).collect();
        order.rotate_left((seed % layer.len() as u64) as usize);
        if seed % 2 == 1 {
            order.reverse();
        }
        let permuted: Vec<Edge> = order.iter().map(|&i| layer[i]).collect();
        let eff = effective_layer_epc(&permuted, &d).unwrap();
        for (j, &i) in order.iter().enumerate() {
            prop_assert!((eff[j] - base[i]).abs() <= 1e-15);
        }
    }

    #[test]
    fn fit_is_shuffle_invariant(alpha in 0.9f64..0.999, noise in proptest::collection::vec(-0.01f64..0.01, 5), rot in 0usize..5) {
        let pts: Vec<(usize, f64)> = [1usize, 5, 10, 20, 40].iter().zip(&noise)
            .map(|(&m, e)| (m, (0.75 * alpha.powi(m as i32) + 0.25 + e).clamp(0.0, 1.0)))
            .collect();
        let mut shuffled = pts.clone();
        shuffled.rotate_left(rot);
        shuffled.swap(0, 4);
        match (fit_decay(&pts, 2), fit_decay(&shuffled, 2)) {
            (Ok(a), Ok(b)) => {
                prop_assert_eq!(a.alpha, b.alpha);
                prop_assert_eq!(a.b0, b.b0);
                prop_assert_eq!(a.a0, b.a0);
            }
            (Err(_), Err(_)) => {}
            _ => prop_assert!(false, "fit outcome depends on point order"),
        }
    }

    #[test]
    fn sublayer_count_monotone_in_omega(mults in proptest::collection::vec(1.0f64..3.5, 1..10), len in 2usize..7) {
        let d = device_with(&mults);
        let gates = ala(&chain_gates(&d, len));
        let r = |w: f64| xtalk_schedule(&gates, &d, &ScheduleOptions::with_omega(w)).unwrap().num_sublayers();
        let (r0, r1) = (r(0.0), r(1.0));
        for w in [0.1, 0.3, 0.5, 0.7, 0.9] {
            let rw = r(w);
            prop_assert!(r0 <= rw && rw <= r1, "R(0)={} R({})={} R(1)={}", r0, w, rw, r1);
        }
    }

    #[test]
    fn t_scaling_keeps_omega_zero_partition(k in 0.1f64..10.0, len in 2usize..7, mults in proptest::collection::vec(0.5f64..3.5, 1..6)) {
        let d = device_with(&mults);
        let gates = ala(&chain_gates(&d, len));
        let mut scaled = d.clone();
        for q in &mut scaled.qubit_cal {
            q.t1_us *= k;
            q.t2_us *= k;
        }
        let opts = ScheduleOptions::with_omega(0.0);
        let a = xtalk_schedule(&gates, &d, &opts).unwrap();
        let b = xtalk_schedule(&gates, &scaled, &opts).unwrap();
        prop_assert_eq!(a.assignment, b.assignment);
    }
}

#[test]
fn no_crosstalk_schedules_match_omega_zero_lifetime() {
    let d = DeviceModel::default_device().without_crosstalk();
    for len in 2..7 {
        let gates = ala(&chain_gates(&d, len));
        let s0 = xtalk_schedule(&gates, &d, &ScheduleOptions::with_omega(0.0)).unwrap();
        let err: f64 = gates.iter().map(|&(a, b)| d.cx_epc(Edge::new(a, b)).unwrap().ln()).sum();
        for w in [0.2, 0.5, 0.8] {
            let s = xtalk_schedule(&gates, &d, &ScheduleOptions::with_omega(w)).unwrap();
            let life = (s.objective - w * err) / (1.0 - w);
            assert!((life - s0.objective).abs() < 1e-9, "len {len} ω {w}: {life} vs {}", s0.objective);
        }
    }
}

#[test]
fn families_share_parameters_and_cx_multiset() {
    let d = DeviceModel::default_device().with_uniform_crosstalk(2.0);
    for n in [3, 5, 6] {
        for l in [1, 3] {
            let families = [Family::Base1, Family::Base2, Family::Xtalk(Level::High), Family::Xtalk(Level::Medium), Family::Xtalk(Level::Low)];
            let built: Vec<_> = families.iter().map(|&f| build(&PqcConfig::new(f, n, l).with_m(0), &d).unwrap()).collect();
            let p = built[0].circuit.num_params();
            assert_eq!(p, 2 * n * (l + 1));
            let mut reference: Option<Vec<(usize, usize)>> = None;
            for a in &built {
                assert_eq!(a.circuit.num_params(), p, "{}", a.family);
                let mut cx: Vec<(usize, usize)> = sublayers_of_circuit(&a.circuit).layers.concat();
                cx.sort_unstable();
                match &reference {
                    None => reference = Some(cx),
                    Some(r) => assert_eq!(&cx, r, "{}", a.family),
                }
            }
        }
    }
}
