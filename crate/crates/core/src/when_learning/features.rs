//! State preprocessing for when-learning.
//!
//! `Relative` renames elements by their pointer path from the binding's
//! selection (`sel`, `sel.a`, `sel.b.l`, ...) and from each argument
//! (`arg0`, `arg0.r`, ...), so that the same situation in a different
//! column produces the same features. `AppendBinding` keeps absolute ids
//! and only adds the binding's ids.

use std::collections::{BTreeMap, HashMap, VecDeque};

use serde::{Deserialize, Serialize};

use crate::model::{Binding, Dir, InterfaceState};

use super::tree::FeatureMap;

/// Pointer hops walked from each binding argument in relative mode.
pub const ARG_RADIUS: usize = 1;

/// A state plus derived general features. Currently the only general
/// feature is `Equals(x, y)` over pairs of non-empty elements.
#[derive(Debug, Clone, PartialEq)]
pub struct AugmentedState {
    pub state: InterfaceState,
    /// `Equals` for each unordered pair `(a, b)` with `a < b`.
    pub equals: BTreeMap<(String, String), bool>,
}

impl AugmentedState {
    pub fn equals(&self, a: &str, b: &str) -> Option<bool> {
        let key = if a < b {
            (a.to_string(), b.to_string())
        } else {
            (b.to_string(), a.to_string())
        };
        self.equals.get(&key).copied()
    }
}

/// Adds `Equals` relations between every pair of non-empty elements.
/// With `equals` disabled the relation set is left empty.
pub fn augment_state(state: &InterfaceState, equals: bool) -> AugmentedState {
    let mut rel = BTreeMap::new();
    if equals {
        let filled: Vec<_> = state.elements().filter(|e| !e.is_empty()).collect();
        for (i, a) in filled.iter().enumerate() {
            for b in &filled[i + 1..] {
                rel.insert((a.id.clone(), b.id.clone()), a.value == b.value);
            }
        }
    }
    AugmentedState {
        state: state.clone(),
        equals: rel,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind")]
pub enum Preprocessor {
    Relative { radius: usize },
    AppendBinding,
}

impl Default for Preprocessor {
    fn default() -> Self {
        Preprocessor::Relative { radius: 2 }
    }
}

impl Preprocessor {
    pub fn features(&self, aug: &AugmentedState, binding: &Binding) -> FeatureMap {
        match *self {
            Preprocessor::Relative { radius } => preprocess_relative(aug, binding, radius),
            Preprocessor::AppendBinding => preprocess_append(aug, binding),
        }
    }
}

fn element_features(out: &mut FeatureMap, name: &str, aug: &AugmentedState, id: &str) {
    if let Some(e) = aug.state.get(id) {
        out.insert(format!("{name}.value"), e.value.clone());
        out.insert(format!("{name}.locked"), e.locked.to_string());
        out.insert(format!("{name}.empty"), e.is_empty().to_string());
    }
}

/// Breadth-first pointer walk from `root` (directions in above, below,
/// left, right order). The first path to reach an element names it.
fn walk(aug: &AugmentedState, root: &str, prefix: &str, radius: usize, names: &mut Vec<(String, String)>) {
    let mut seen: HashMap<&str, ()> = HashMap::new();
    let mut queue = VecDeque::new();
    if aug.state.get(root).is_none() {
        return;
    }
    seen.insert(root, ());
    queue.push_back((root, prefix.to_string(), 0usize));
    while let Some((id, name, depth)) = queue.pop_front() {
        names.push((name.clone(), id.to_string()));
        if depth == radius {
            continue;
        }
        for d in Dir::ALL {
            if let Some(n) = aug.state.neighbor(id, d) {
                if seen.insert(n.id.as_str(), ()).is_none() {
                    queue.push_back((n.id.as_str(), format!("{name}.{}", d.short()), depth + 1));
                }
            }
        }
    }
}

fn equals_features(out: &mut FeatureMap, aug: &AugmentedState, names: &[(String, String)]) {
    for (i, (na, ia)) in names.iter().enumerate() {
        for (nb, ib) in &names[i + 1..] {
            if ia == ib {
                continue;
            }
            if let Some(eq) = aug.equals(ia, ib) {
                let (x, y) = if na < nb { (na, nb) } else { (nb, na) };
                out.insert(format!("eq({x},{y})"), eq.to_string());
            }
        }
    }
}

pub fn preprocess_relative(aug: &AugmentedState, binding: &Binding, radius: usize) -> FeatureMap {
    let mut names = Vec::new();
    walk(aug, &binding.selection, "sel", radius, &mut names);
    for (k, a) in binding.args.iter().enumerate() {
        walk(aug, a, &format!("arg{k}"), ARG_RADIUS.min(radius), &mut names);
    }
    let mut out = FeatureMap::new();
    for (name, id) in &names {
        element_features(&mut out, name, aug, id);
    }
    equals_features(&mut out, aug, &names);
    out
}

/// Absolute-id features of the whole state, without any binding.
pub fn absolute_features(aug: &AugmentedState) -> FeatureMap {
    let names: Vec<(String, String)> = aug.state.ids().map(|id| (id.to_string(), id.to_string())).collect();
    let mut out = FeatureMap::new();
    for (name, id) in &names {
        element_features(&mut out, name, aug, id);
    }
    equals_features(&mut out, aug, &names);
    out
}

pub fn preprocess_append(aug: &AugmentedState, binding: &Binding) -> FeatureMap {
    let mut out = absolute_features(aug);
    let mut names = Vec::new();
    out.insert("sel.id".to_string(), binding.selection.clone());
    names.push(("sel".to_string(), binding.selection.clone()));
    for (k, a) in binding.args.iter().enumerate() {
        out.insert(format!("arg{k}.id"), a.clone());
        names.push((format!("arg{k}"), a.clone()));
    }
    for (name, id) in &names {
        element_features(&mut out, name, aug, id);
    }
    out
}
