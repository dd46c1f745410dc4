//! Test oracles shared by the integration tests.
#![allow(dead_code)]

use std::collections::BTreeSet;

use dipl_core::how::{parse_value, Registry};
use dipl_core::{Binding, ElementState, FunctionTerm, InterfaceState, Sai};

/// A row of locked numeric fields `e0..` plus an empty `out` field below.
pub fn row(values: &[String]) -> InterfaceState {
    let mut els: Vec<ElementState> = values
        .iter()
        .enumerate()
        .map(|(i, v)| ElementState::text_field(format!("e{i}"), v.clone(), true, 50.0 * i as f64, 0.0))
        .collect();
    els.push(ElementState::text_field("out", "", false, 0.0, 100.0));
    InterfaceState::new(els).unwrap()
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
enum Term {
    Src(usize),
    App(usize, Vec<Term>),
}

#[derive(Debug, Clone)]
struct Node {
    term: Term,
    mask: u64,
    value: Option<i64>,
    depth: usize,
}

fn combos(pool: &[Node], k: usize, mask: u64, picked: &mut Vec<usize>, out: &mut dyn FnMut(&[usize], u64)) {
    if picked.len() == k {
        out(picked, mask);
        return;
    }
    for (i, n) in pool.iter().enumerate() {
        if n.mask & mask != 0 {
            continue;
        }
        picked.push(i);
        combos(pool, k, mask | n.mask, picked, out);
        picked.pop();
    }
}

/// Brute-force explanation enumerator: builds every term of depth at most
/// `depth` whose leaves are distinct sources, evaluates it, and keeps the
/// ones producing the target. Commutative arguments are sorted so that
/// each composition appears once.
pub fn naive_how(
    registry: &Registry,
    state: &InterfaceState,
    target: &Sai,
    depth: usize,
    foci: Option<&[String]>,
) -> BTreeSet<(FunctionTerm, Binding)> {
    let goal = target.value().unwrap_or("").to_string();
    let sources: Vec<&ElementState> = match foci {
        Some(f) => state.layout_order().into_iter().filter(|e| f.contains(&e.id)).collect(),
        None => state
            .layout_order()
            .into_iter()
            .filter(|e| !e.value.is_empty() && e.id != target.selection)
            .collect(),
    };
    let all: u64 = (1u64 << sources.len()) - 1;

    let mut nodes: Vec<Node> = sources
        .iter()
        .enumerate()
        .map(|(i, e)| Node {
            term: Term::Src(i),
            mask: 1 << i,
            value: parse_value(&e.value),
            depth: 0,
        })
        .collect();
    for d in 1..=depth {
        let pool: Vec<Node> = nodes.iter().filter(|n| n.value.is_some()).cloned().collect();
        let mut fresh: BTreeSet<(Term, u64, i64)> = BTreeSet::new();
        for (fi, f) in registry.functions().iter().enumerate() {
            combos(&pool, f.arity, 0, &mut Vec::new(), &mut |idx, mask| {
                if idx.iter().all(|&i| pool[i].depth < d - 1) {
                    return;
                }
                let args: Vec<i64> = idx.iter().map(|&i| pool[i].value.unwrap()).collect();
                let Some(v) = f.apply_num(&args) else { return };
                let mut kids: Vec<Term> = idx.iter().map(|&i| pool[i].term.clone()).collect();
                if f.commutative {
                    kids.sort();
                }
                fresh.insert((Term::App(fi, kids), mask, v));
            });
        }
        nodes.extend(fresh.into_iter().map(|(term, mask, v)| Node {
            term,
            mask,
            value: Some(v),
            depth: d,
        }));
    }

    let goal_num = parse_value(&goal).filter(|n| n.to_string() == goal);
    let mut out = BTreeSet::new();
    for n in &nodes {
        let hit = match &n.term {
            Term::Src(i) => sources[*i].value == goal,
            Term::App(..) => goal_num.is_some() && n.value == goal_num,
        };
        if hit && (foci.is_none() || n.mask == all) {
            out.insert(lift(&n.term, registry, &sources, &target.selection));
        }
    }
    out
}

fn lift(t: &Term, registry: &Registry, sources: &[&ElementState], selection: &str) -> (FunctionTerm, Binding) {
    fn walk(t: &Term, registry: &Registry, order: &mut Vec<usize>) -> FunctionTerm {
        match t {
            Term::Src(i) => {
                if !order.contains(i) {
                    order.push(*i);
                }
                FunctionTerm::Var(order.iter().position(|x| x == i).unwrap())
            }
            Term::App(f, kids) => FunctionTerm::apply(
                registry.functions()[*f].id,
                kids.iter().map(|k| walk(k, registry, order)).collect(),
            ),
        }
    }
    let mut order = Vec::new();
    let term = walk(t, registry, &mut order);
    (term, Binding::new(selection, order.iter().map(|&i| sources[i].id.clone()).collect()))
}
