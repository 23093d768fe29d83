use std::collections::HashMap;
use std::io::Write;
use std::process::{Command, Stdio};

use nilmonoid::diophantine::{alpha_from_model, build_system, export_smtlib, verify_witness, KnapsackInstance};
use nilmonoid::gap_rewrite::{FiniteAbelian, TorsionValue};
use nilmonoid::oracle::{bfs_monoid_ball, heis_eval, parse_heis_word, sumset_n_int, sumset_n_torsion, HeisMatrix};
use nilmonoid::subgroup_tools::{commutator_lattice, smith_normal_form, IntMatrix};
use nilmonoid::{GroupElement, GroupPresentation};
use num_bigint::BigInt;

fn big(xs: &[i64]) -> Vec<BigInt> {
    xs.iter().map(|&x| BigInt::from(x)).collect()
}

#[test]
fn heisenberg_words() {
    let m = heis_eval(&parse_heis_word("x y x y x").unwrap());
    assert_eq!(m, HeisMatrix::new(3, 2, 3));
    assert_eq!(m.to_element(), GroupElement::from_i64(&[3, 2], &[-3]));
    let k = HeisMatrix::x().commutator(&HeisMatrix::y());
    assert_eq!(k, HeisMatrix::z());
    assert_eq!(HeisMatrix::new(1, 1, 1).pow(-2), HeisMatrix::new(-2, -2, 1));
}

#[test]
fn monoid_ball_sizes() {
    let p = GroupPresentation::heisenberg();
    let gens = [p.main_gen(0), p.main_gen(1)];
    let sizes: Vec<usize> = (0..=4).map(|d| bfs_monoid_ball(&p, &gens, d, 10_000).unwrap().len()).collect();
    assert_eq!(sizes, vec![1, 3, 7, 15, 30]);
    let ball = bfs_monoid_ball(&p, &gens, 4, 10_000).unwrap();
    let g = GroupElement::from_i64(&[2, 2], &[-1]);
    assert_eq!(ball.distance(&g), Some(4));
    let w: Vec<GroupElement> = ball.word_for(&g).unwrap().into_iter().map(|i| gens[i].clone()).collect();
    assert_eq!(p.eval_word(&w), g);
}

#[test]
fn integer_and_torsion_sumsets() {
    let s: Vec<i64> = sumset_n_int(&big(&[0, 1, 3]), 3).iter().map(|x| i64::try_from(x).unwrap()).collect();
    assert_eq!(s, vec![0, 1, 2, 3, 4, 5, 6, 7, 9]);
    let g = FiniteAbelian::new(vec![2]).unwrap();
    let a = [TorsionValue::new(0, vec![0]), TorsionValue::new(1, vec![1])];
    let got: Vec<(i64, u64)> = sumset_n_torsion(&a, &g, 3)
        .unwrap()
        .to_values()
        .into_iter()
        .map(|v| (i64::try_from(&v.z).unwrap(), v.t[0]))
        .collect();
    assert_eq!(got, vec![(0, 0), (1, 1), (2, 0), (3, 1)]);
}

#[test]
fn smith_form_fixed() {
    let m = IntMatrix::from_i64(&[&[2, 4, 4], &[-6, 6, 12], &[10, -4, -16]]);
    assert_eq!(smith_normal_form(&m).diagonal(), big(&[2, 6, 12]));
    let m = IntMatrix::from_i64(&[&[2, 0], &[0, 3]]);
    assert_eq!(smith_normal_form(&m).diagonal(), big(&[1, 6]));
}

#[test]
fn commutator_lattice_fixed() {
    let text = r#"{"main":[{"order":"inf"},{"order":"inf"},{"order":"inf"}],
        "central":[{"order":"inf"},{"order":2}],
        "comm":[{"i":1,"j":2,"value":[1,0]},{"i":1,"j":3,"value":[0,1]}]}"#;
    let p = GroupPresentation::from_json(&serde_json::from_str(text).unwrap()).unwrap();
    let lat = commutator_lattice(&p);
    assert_eq!(lat.h, 1);
    assert_eq!(lat.torsion, big(&[2]));
}

fn z3_available() -> bool {
    Command::new("z3").arg("-version").output().is_ok_and(|o| o.status.success())
}

fn parse_model(text: &str) -> HashMap<String, BigInt> {
    let flat = text.split_whitespace().collect::<Vec<_>>().join(" ");
    let mut out = HashMap::new();
    for def in flat.split("(define-fun ").skip(1) {
        let mut parts = def.splitn(2, " () Int ");
        let (Some(name), Some(rest)) = (parts.next(), parts.next()) else { continue };
        let value: String = rest.chars().take_while(|c| *c != ')').collect();
        let value = value.replace("(- ", "-").replace(['(', ' '], "");
        if let Ok(v) = value.parse::<BigInt>() {
            out.insert(name.to_string(), v);
        }
    }
    out
}

#[test]
fn smt_export_round_trips_through_z3() {
    if !z3_available() {
        eprintln!("z3 not found; skipping");
        return;
    }
    let p = GroupPresentation::heisenberg();
    let (x, y) = (p.main_gen(0), p.main_gen(1));
    let target = p.power_i64(&p.central_gen(0), 2);
    let inst = KnapsackInstance::new(&p, target, vec![x.clone(), y.clone(), p.inverse(&x), p.inverse(&y)]).unwrap();
    let sys = build_system(&inst).unwrap();
    let mut child = Command::new("z3").arg("-in").stdin(Stdio::piped()).stdout(Stdio::piped()).spawn().unwrap();
    child.stdin.take().unwrap().write_all(export_smtlib(&sys).as_bytes()).unwrap();
    let out = String::from_utf8(child.wait_with_output().unwrap().stdout).unwrap();
    assert!(out.starts_with("sat"), "{out}");
    let alpha = alpha_from_model(&sys, &parse_model(&out)).expect("model assigns every exponent");
    assert!(verify_witness(&inst, &alpha));
}
