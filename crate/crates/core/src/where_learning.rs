//! Where-learning: binding generators induced specific-to-general.
//!
//! An `AntiUnify` where-part is a conjunction of literals over the slots of
//! a binding (slot 0 is the selection, slots 1.. the args):
//! - per-slot attribute literals (id, widget type, lock flag, emptiness);
//! - per-slot neighbor groups: the element one pointer-hop away must exist
//!   and satisfy its own attribute literals;
//! - relations between slot pairs: pointer adjacency, exact coordinate
//!   offsets and coordinate orderings.
//!
//! The first example pins everything it sees. Each further example drops
//! the literals it does not satisfy, which yields the least general
//! generalization within this literal language.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::model::{Binding, Dir, ElementState, InterfaceState, WidgetType};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
pub enum WhereVariant {
    #[default]
    AntiUnify,
    MostSpecific,
}

/// Attribute literals of a single element, keyed by attribute name.
pub type Attrs = BTreeMap<String, String>;

fn attrs_of(e: &ElementState) -> Attrs {
    let ty = match e.widget_type {
        WidgetType::TextField => "TextField",
        WidgetType::Button => "Button",
    };
    BTreeMap::from([
        ("id".to_string(), e.id.clone()),
        ("type".to_string(), ty.to_string()),
        ("locked".to_string(), e.locked.to_string()),
        ("empty".to_string(), e.is_empty().to_string()),
    ])
}

fn attrs_hold(lits: &Attrs, e: &ElementState) -> bool {
    let actual = attrs_of(e);
    lits.iter().all(|(k, v)| actual.get(k) == Some(v))
}

fn attrs_meet(lits: &Attrs, e: &ElementState) -> Attrs {
    let actual = attrs_of(e);
    lits.iter()
        .filter(|(k, v)| actual.get(*k) == Some(*v))
        .map(|(k, v)| (k.clone(), v.clone()))
        .collect()
}

/// A relation between slot `i` and slot `j` (i < j).
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(tag = "kind", content = "arg")]
pub enum Relation {
    /// `slot_i.<dir> == slot_j`.
    Pointer(Dir),
    /// `x_j - x_i`, rounded to whole pixels.
    Dx(i64),
    /// `y_j - y_i`, rounded to whole pixels.
    Dy(i64),
    /// `x_i < x_j`.
    LeftOf,
    /// `x_i > x_j`.
    RightOf,
    /// `y_i < y_j`.
    Above,
    /// `y_i > y_j`.
    Below,
}

fn relations_between(a: &ElementState, b: &ElementState) -> BTreeSet<Relation> {
    let mut out = BTreeSet::new();
    for d in Dir::ALL {
        if a.pointer(d) == b.id {
            out.insert(Relation::Pointer(d));
        }
    }
    out.insert(Relation::Dx((b.x - a.x).round() as i64));
    out.insert(Relation::Dy((b.y - a.y).round() as i64));
    if a.x < b.x {
        out.insert(Relation::LeftOf);
    }
    if a.x > b.x {
        out.insert(Relation::RightOf);
    }
    if a.y < b.y {
        out.insert(Relation::Above);
    }
    if a.y > b.y {
        out.insert(Relation::Below);
    }
    out
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NeighborGroup {
    pub slot: usize,
    pub dir: Dir,
    pub attrs: Attrs,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PairRelations {
    pub i: usize,
    pub j: usize,
    pub relations: BTreeSet<Relation>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "variant")]
pub enum WherePart {
    AntiUnify {
        slots: Vec<Attrs>,
        neighbors: Vec<NeighborGroup>,
        relations: Vec<PairRelations>,
    },
    MostSpecific {
        bindings: Vec<Binding>,
    },
}

fn selection_open(state: &InterfaceState, id: &str) -> bool {
    state.get(id).is_some_and(|e| !e.locked && e.is_empty())
}

fn slot_elements<'s>(state: &'s InterfaceState, binding: &Binding) -> Option<Vec<&'s ElementState>> {
    binding.slots().map(|id| state.get(id)).collect()
}

impl WherePart {
    /// A where-part matching exactly `binding` in `state`.
    ///
    /// Returns `None` if some binding element is missing from the state.
    pub fn init(state: &InterfaceState, binding: &Binding, variant: WhereVariant) -> Option<WherePart> {
        let els = slot_elements(state, binding)?;
        Some(match variant {
            WhereVariant::MostSpecific => WherePart::MostSpecific {
                bindings: vec![binding.clone()],
            },
            WhereVariant::AntiUnify => {
                let slots = els.iter().map(|e| attrs_of(e)).collect();
                let mut neighbors = Vec::new();
                for (slot, e) in els.iter().enumerate() {
                    for dir in Dir::ALL {
                        if let Some(n) = state.neighbor(&e.id, dir) {
                            neighbors.push(NeighborGroup {
                                slot,
                                dir,
                                attrs: attrs_of(n),
                            });
                        }
                    }
                }
                let mut relations = Vec::new();
                for i in 0..els.len() {
                    for j in i + 1..els.len() {
                        relations.push(PairRelations {
                            i,
                            j,
                            relations: relations_between(els[i], els[j]),
                        });
                    }
                }
                WherePart::AntiUnify {
                    slots,
                    neighbors,
                    relations,
                }
            }
        })
    }

    pub fn variant(&self) -> WhereVariant {
        match self {
            WherePart::AntiUnify { .. } => WhereVariant::AntiUnify,
            WherePart::MostSpecific { .. } => WhereVariant::MostSpecific,
        }
    }

    pub fn arity(&self) -> usize {
        match self {
            WherePart::AntiUnify { slots, .. } => slots.len().saturating_sub(1),
            WherePart::MostSpecific { bindings } => bindings.first().map_or(0, |b| b.args.len()),
        }
    }

    /// Least general generalization covering the old examples and `binding`.
    /// A binding of a different arity or with missing elements leaves the
    /// where-part unchanged.
    pub fn generalize(&self, state: &InterfaceState, binding: &Binding) -> WherePart {
        if binding.args.len() != self.arity() && !self.is_empty_most_specific() {
            return self.clone();
        }
        let Some(els) = slot_elements(state, binding) else {
            return self.clone();
        };
        match self {
            WherePart::MostSpecific { bindings } => {
                let mut bindings = bindings.clone();
                if !bindings.contains(binding) {
                    bindings.push(binding.clone());
                }
                WherePart::MostSpecific { bindings }
            }
            WherePart::AntiUnify {
                slots,
                neighbors,
                relations,
            } => {
                let slots = slots.iter().zip(&els).map(|(l, e)| attrs_meet(l, e)).collect();
                let neighbors = neighbors
                    .iter()
                    .filter_map(|g| {
                        let n = state.neighbor(&els[g.slot].id, g.dir)?;
                        Some(NeighborGroup {
                            slot: g.slot,
                            dir: g.dir,
                            attrs: attrs_meet(&g.attrs, n),
                        })
                    })
                    .collect();
                let relations = relations
                    .iter()
                    .map(|p| {
                        let now = relations_between(els[p.i], els[p.j]);
                        PairRelations {
                            i: p.i,
                            j: p.j,
                            relations: p.relations.intersection(&now).cloned().collect(),
                        }
                    })
                    .collect();
                WherePart::AntiUnify {
                    slots,
                    neighbors,
                    relations,
                }
            }
        }
    }

    /// Number of literals still in force; larger means more specific. A
    /// most-specific where-part counts as one literal per binding it lists,
    /// negated so that fewer bindings rank higher.
    pub fn specificity(&self) -> i64 {
        match self {
            WherePart::MostSpecific { bindings } => -(bindings.len() as i64),
            WherePart::AntiUnify {
                slots,
                neighbors,
                relations,
            } => {
                let n = slots.iter().map(|a| a.len()).sum::<usize>()
                    + neighbors.iter().map(|g| 1 + g.attrs.len()).sum::<usize>()
                    + relations.iter().map(|p| p.relations.len()).sum::<usize>();
                n as i64
            }
        }
    }

    fn is_empty_most_specific(&self) -> bool {
        matches!(self, WherePart::MostSpecific { bindings } if bindings.is_empty())
    }

    /// Whether `binding` satisfies every literal in `state`, ignoring the
    /// open-selection requirement.
    pub fn covers(&self, state: &InterfaceState, binding: &Binding) -> bool {
        let Some(els) = slot_elements(state, binding) else {
            return false;
        };
        match self {
            WherePart::MostSpecific { bindings } => bindings.contains(binding),
            WherePart::AntiUnify {
                slots,
                neighbors,
                relations,
            } => {
                if els.len() != slots.len() {
                    return false;
                }
                let distinct: BTreeSet<&str> = els.iter().map(|e| e.id.as_str()).collect();
                distinct.len() == els.len()
                    && slots.iter().zip(&els).all(|(l, e)| attrs_hold(l, e))
                    && neighbors.iter().all(|g| neighbor_holds(state, els[g.slot], g))
                    && relations.iter().all(|p| pair_holds(els[p.i], els[p.j], &p.relations))
            }
        }
    }

    /// All bindings satisfying the where-part whose selection is unlocked
    /// and empty, sorted by element ids.
    pub fn matches(&self, state: &InterfaceState) -> Vec<Binding> {
        let mut out = match self {
            WherePart::MostSpecific { bindings } => bindings
                .iter()
                .filter(|b| b.is_valid_in(state) && selection_open(state, &b.selection))
                .cloned()
                .collect(),
            WherePart::AntiUnify {
                slots,
                neighbors,
                relations,
            } => {
                let mut out = Vec::new();
                let mut chosen: Vec<&ElementState> = Vec::with_capacity(slots.len());
                search(state, slots, neighbors, relations, &mut chosen, &mut out);
                out
            }
        };
        out.sort();
        out.dedup();
        out
    }
}

fn neighbor_holds(state: &InterfaceState, e: &ElementState, g: &NeighborGroup) -> bool {
    state.neighbor(&e.id, g.dir).is_some_and(|n| attrs_hold(&g.attrs, n))
}

fn pair_holds(a: &ElementState, b: &ElementState, rels: &BTreeSet<Relation>) -> bool {
    if rels.is_empty() {
        return true;
    }
    let now = relations_between(a, b);
    rels.is_subset(&now)
}

/// Backtracking over slot assignments, checking each literal as soon as all
/// the slots it mentions are assigned.
fn search<'s>(
    state: &'s InterfaceState,
    slots: &[Attrs],
    neighbors: &[NeighborGroup],
    relations: &[PairRelations],
    chosen: &mut Vec<&'s ElementState>,
    out: &mut Vec<Binding>,
) {
    let k = chosen.len();
    if k == slots.len() {
        out.push(Binding::new(
            chosen[0].id.clone(),
            chosen[1..].iter().map(|e| e.id.clone()).collect(),
        ));
        return;
    }
    for e in state.elements() {
        if chosen.iter().any(|c| c.id == e.id) {
            continue;
        }
        if k == 0 && (e.locked || !e.is_empty()) {
            continue;
        }
        if !attrs_hold(&slots[k], e) {
            continue;
        }
        if !neighbors.iter().filter(|g| g.slot == k).all(|g| neighbor_holds(state, e, g)) {
            continue;
        }
        if !relations
            .iter()
            .filter(|p| p.j == k)
            .all(|p| pair_holds(chosen[p.i], e, &p.relations))
        {
            continue;
        }
        chosen.push(e);
        search(state, slots, neighbors, relations, chosen, out);
        chosen.pop();
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Two-column board: A over B over out, columns at x = 100 (col 2) and
    /// x = 150 (col 1).
    fn board() -> InterfaceState {
        let mut els = Vec::new();
        for (c, x) in [(1, 150.0), (2, 100.0)] {
            els.push(ElementState::text_field(format!("A{c}"), "3", true, x, 0.0));
            els.push(ElementState::text_field(format!("B{c}"), "4", true, x, 50.0));
            els.push(ElementState::text_field(format!("out{c}"), "", false, x, 100.0));
        }
        let mut st: BTreeMap<String, ElementState> = els.into_iter().map(|e| (e.id.clone(), e)).collect();
        for c in [1, 2] {
            st.get_mut(&format!("A{c}")).unwrap().below = format!("B{c}");
            st.get_mut(&format!("B{c}")).unwrap().above = format!("A{c}");
            st.get_mut(&format!("B{c}")).unwrap().below = format!("out{c}");
            st.get_mut(&format!("out{c}")).unwrap().above = format!("B{c}");
        }
        InterfaceState::new(st.into_values()).unwrap()
    }

    fn b(sel: &str, args: &[&str]) -> Binding {
        Binding::new(sel, args.iter().map(|s| s.to_string()).collect())
    }

    #[test]
    fn init_matches_only_its_binding() {
        let s = board();
        let wp = WherePart::init(&s, &b("out1", &["A1", "B1"]), WhereVariant::AntiUnify).unwrap();
        assert_eq!(wp.matches(&s), vec![b("out1", &["A1", "B1"])]);
    }

    #[test]
    fn generalization_drops_ids_and_keeps_alignment() {
        let s = board();
        let wp = WherePart::init(&s, &b("out1", &["A1", "B1"]), WhereVariant::AntiUnify)
            .unwrap()
            .generalize(&s, &b("out2", &["A2", "B2"]));
        assert_eq!(wp.matches(&s), vec![b("out1", &["A1", "B1"]), b("out2", &["A2", "B2"])]);
        let WherePart::AntiUnify { slots, relations, .. } = &wp else { unreachable!() };
        assert!(slots.iter().all(|l| !l.contains_key("id")));
        assert!(relations.iter().all(|p| p.relations.contains(&Relation::Dx(0))));
    }

    #[test]
    fn generalize_is_idempotent() {
        let s = board();
        let bd = b("out1", &["A1", "B1"]);
        let wp = WherePart::init(&s, &bd, WhereVariant::AntiUnify).unwrap();
        assert_eq!(wp.generalize(&s, &bd), wp);
    }

    #[test]
    fn locked_selection_is_not_proposed() {
        let s = board();
        let wp = WherePart::init(&s, &b("out1", &["A1", "B1"]), WhereVariant::AntiUnify)
            .unwrap()
            .generalize(&s, &b("out2", &["A2", "B2"]));
        let s2 = s.with_entry("out1", "7", true).unwrap();
        assert_eq!(wp.matches(&s2), vec![b("out2", &["A2", "B2"])]);
    }

    #[test]
    fn selection_only_where_part() {
        let s = board();
        let wp = WherePart::init(&s, &b("out2", &[]), WhereVariant::AntiUnify).unwrap();
        assert_eq!(wp.arity(), 0);
        assert_eq!(wp.matches(&s), vec![b("out2", &[])]);
    }

    #[test]
    fn most_specific_keeps_exact_bindings() {
        let s = board();
        let wp = WherePart::init(&s, &b("out1", &["A1", "B1"]), WhereVariant::MostSpecific)
            .unwrap()
            .generalize(&s, &b("out2", &["A2", "B2"]));
        assert_eq!(wp.matches(&s).len(), 2);
        let s2 = s.with_entry("out2", "1", true).unwrap();
        assert_eq!(wp.matches(&s2), vec![b("out1", &["A1", "B1"])]);
    }

    #[test]
    fn empty_state_has_no_matches() {
        let s = board();
        let wp = WherePart::init(&s, &b("out1", &["A1", "B1"]), WhereVariant::AntiUnify).unwrap();
        assert!(wp.matches(&InterfaceState::empty()).is_empty());
    }

    #[test]
    fn json_export_round_trips() {
        let s = board();
        let wp = WherePart::init(&s, &b("out1", &["A1", "B1"]), WhereVariant::AntiUnify).unwrap();
        let text = serde_json::to_string(&wp).unwrap();
        let back: WherePart = serde_json::from_str(&text).unwrap();
        assert_eq!(back, wp);
    }
}
