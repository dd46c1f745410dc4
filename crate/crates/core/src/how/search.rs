//! Depth-bounded forward-chaining search for function compositions that
//! reproduce a demonstrated value.
//!
//! The search runs in two phases. The first works on *values*: starting from
//! the numeric values found in the state it applies every function to the
//! unique values discovered so far (commutative functions only to sorted
//! combinations) and records, per value, which function/argument-value
//! tuples produce it. The second phase walks back from the target and
//! expands that graph into concrete ground terms over source elements.
//!
//! Conventions for the produced explanations:
//! - every leaf is a distinct source element (no element is read twice);
//! - commutative arguments are ordered canonically by layout position;
//! - the depth-0 copy term `?0` is returned when a source string equals the
//!   target string exactly.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::rc::Rc;

use crate::error::{Error, Result};
use crate::model::{ActionType, Binding, ElementState, FunctionTerm, InterfaceState, Sai};

use super::registry::{parse_value, Registry};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HowSearchConfig {
    pub max_depth: usize,
    pub foci: Option<Vec<String>>,
    pub restrict_to_foci: bool,
}

impl Default for HowSearchConfig {
    fn default() -> Self {
        HowSearchConfig {
            max_depth: 2,
            foci: None,
            restrict_to_foci: false,
        }
    }
}

impl HowSearchConfig {
    pub fn with_depth(max_depth: usize) -> Self {
        HowSearchConfig {
            max_depth,
            ..Default::default()
        }
    }

    /// Restricts explanations to use exactly the given elements as args.
    pub fn focused(mut self, foci: Vec<String>) -> Self {
        self.foci = Some(foci);
        self.restrict_to_foci = true;
        self
    }
}

/// Deduplicated (term, binding) pairs, sorted structurally.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ExplanationSet {
    items: Vec<(FunctionTerm, Binding)>,
}

impl ExplanationSet {
    pub fn from_items(items: impl IntoIterator<Item = (FunctionTerm, Binding)>) -> Self {
        let set: BTreeSet<_> = items.into_iter().collect();
        ExplanationSet {
            items: set.into_iter().collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &(FunctionTerm, Binding)> {
        self.items.iter()
    }

    /// Distinct how-terms regardless of binding.
    pub fn terms(&self) -> BTreeSet<&FunctionTerm> {
        self.items.iter().map(|(t, _)| t).collect()
    }

    pub fn contains_term(&self, term: &FunctionTerm) -> bool {
        self.items.iter().any(|(t, _)| t == term)
    }

    pub fn bindings_for<'a>(&'a self, term: &'a FunctionTerm) -> impl Iterator<Item = &'a Binding> + 'a {
        self.items.iter().filter(move |(t, _)| t == term).map(|(_, b)| b)
    }

    pub fn is_subset_of(&self, other: &ExplanationSet) -> bool {
        self.items.iter().all(|i| other.items.binary_search(i).is_ok())
    }

    /// The most preferred explanation (see [`preference_cmp`]).
    pub fn best(&self) -> Option<&(FunctionTerm, Binding)> {
        self.items.iter().min_by(|a, b| preference_cmp(&a.0, &a.1, &b.0, &b.1))
    }

    pub fn into_items(self) -> Vec<(FunctionTerm, Binding)> {
        self.items
    }
}

/// Preference among competing explanations: fewest constant leaves, then
/// smallest depth, then fewest function applications, then fewest distinct
/// args, then the term's printed form,
/// then the binding.
pub fn preference_cmp(
    ta: &FunctionTerm,
    ba: &Binding,
    tb: &FunctionTerm,
    bb: &Binding,
) -> std::cmp::Ordering {
    term_preference_cmp(ta, tb).then_with(|| ba.cmp(bb))
}

pub fn term_preference_cmp(ta: &FunctionTerm, tb: &FunctionTerm) -> std::cmp::Ordering {
    ta.const_leaves()
        .cmp(&tb.const_leaves())
        .then(ta.depth().cmp(&tb.depth()))
        .then(ta.applications().cmp(&tb.applications()))
        .then(ta.distinct_vars().cmp(&tb.distinct_vars()))
        .then_with(|| ta.to_string().cmp(&tb.to_string()))
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct SearchStats {
    /// Function applications evaluated while building the value graph.
    pub visited: usize,
    /// Distinct values known after the search (all depths).
    pub distinct_values: usize,
}

// ---------------------------------------------------------------------------
// Value graph
// ---------------------------------------------------------------------------

#[derive(Debug, Clone)]
struct Producer {
    func: usize,
    args: Vec<i64>,
    level: usize,
}

/// Toggles for the two search optimizations. Both are on in `how_search`;
/// turning them off is only useful for checking that they do not change
/// the set of produced values.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SearchOptions {
    /// Apply commutative functions to sorted combinations only.
    pub commuting_combinations: bool,
    /// Feed only the unique values of previous depths to the next depth.
    pub unique_values: bool,
}

impl Default for SearchOptions {
    fn default() -> Self {
        SearchOptions {
            commuting_combinations: true,
            unique_values: true,
        }
    }
}

struct ValueGraph {
    first_level: HashMap<i64, usize>,
    producers: HashMap<i64, Vec<Producer>>,
    visited: usize,
}

/// Calls `f` with every index tuple of length `k` over `0..n`.
/// With `sorted`, only non-decreasing tuples are produced.
fn for_each_tuple(n: usize, k: usize, sorted: bool, f: &mut dyn FnMut(&[usize])) {
    fn rec(n: usize, k: usize, sorted: bool, buf: &mut Vec<usize>, f: &mut dyn FnMut(&[usize])) {
        if buf.len() == k {
            f(buf);
            return;
        }
        let start = if sorted { buf.last().copied().unwrap_or(0) } else { 0 };
        for i in start..n {
            buf.push(i);
            rec(n, k, sorted, buf, f);
            buf.pop();
        }
    }
    if n == 0 && k > 0 {
        return;
    }
    rec(n, k, sorted, &mut Vec::with_capacity(k), f);
}

impl ValueGraph {
    /// Builds the value graph to `depth`. When `target` is given, producers
    /// at the final depth are only kept if they yield the target.
    fn build(
        registry: &Registry,
        sources: &[i64],
        depth: usize,
        target: Option<i64>,
        commuting_combinations: bool,
    ) -> ValueGraph {
        let mut first_level: HashMap<i64, usize> = HashMap::new();
        for &v in sources {
            first_level.insert(v, 0);
        }
        let mut producers: HashMap<i64, Vec<Producer>> = HashMap::new();
        let mut visited = 0usize;

        for d in 1..=depth {
            let mut pool: Vec<i64> = first_level
                .iter()
                .filter(|(_, &l)| l < d)
                .map(|(&v, _)| v)
                .collect();
            pool.sort_unstable();
            let fresh: Vec<bool> = pool.iter().map(|v| first_level[v] == d - 1).collect();
            let last = d == depth;
            let mut discovered = Vec::new();

            for (fi, f) in registry.functions().iter().enumerate() {
                let sorted = f.commutative && commuting_combinations;
                let mut args = vec![0i64; f.arity];
                for_each_tuple(pool.len(), f.arity, sorted, &mut |idx| {
                    if !idx.iter().any(|&i| fresh[i]) {
                        return;
                    }
                    for (slot, &i) in idx.iter().enumerate() {
                        args[slot] = pool[i];
                    }
                    visited += 1;
                    let Some(out) = f.apply_num(&args) else { return };
                    if last && target.is_some_and(|t| t != out) {
                        return;
                    }
                    producers.entry(out).or_default().push(Producer {
                        func: fi,
                        args: args.clone(),
                        level: d,
                    });
                    if !first_level.contains_key(&out) {
                        discovered.push(out);
                    }
                });
            }
            for v in discovered {
                first_level.entry(v).or_insert(d);
            }
        }
        ValueGraph {
            first_level,
            producers,
            visited,
        }
    }
}

/// Distinct values reachable from `sources` at each depth `0..=depth`
/// (cumulative). The optimizations can be switched off to check that they
/// do not change the produced sets.
pub fn produced_values(
    registry: &Registry,
    sources: &[i64],
    depth: usize,
    options: SearchOptions,
) -> Vec<BTreeSet<i64>> {
    if options.unique_values {
        let g = ValueGraph::build(registry, sources, depth, None, options.commuting_combinations);
        return (0..=depth)
            .map(|d| {
                g.first_level
                    .iter()
                    .filter(|(_, &l)| l <= d)
                    .map(|(&v, _)| v)
                    .collect()
            })
            .collect();
    }
    // Term-level enumeration: every term value is kept with multiplicity.
    let mut layers: Vec<Vec<i64>> = vec![sources.to_vec()];
    for d in 1..=depth {
        let pool: Vec<i64> = layers.iter().flatten().copied().collect();
        let fresh_from = pool.len() - layers[d - 1].len();
        let mut next = Vec::new();
        for f in registry.functions() {
            let sorted = f.commutative && options.commuting_combinations;
            let mut args = vec![0i64; f.arity];
            for_each_tuple(pool.len(), f.arity, sorted, &mut |idx| {
                if !idx.iter().any(|&i| i >= fresh_from) {
                    return;
                }
                for (slot, &i) in idx.iter().enumerate() {
                    args[slot] = pool[i];
                }
                if let Some(v) = f.apply_num(&args) {
                    next.push(v);
                }
            });
        }
        layers.push(next);
    }
    let mut acc = BTreeSet::new();
    layers
        .iter()
        .map(|layer| {
            acc.extend(layer.iter().copied());
            acc.clone()
        })
        .collect()
}

// ---------------------------------------------------------------------------
// Ground terms
// ---------------------------------------------------------------------------

/// A term whose leaves are indices into the layout-ordered source list.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
enum Ground {
    Src(usize),
    Apply(usize, Vec<Ground>),
}

type TermList = Rc<Vec<(Ground, u64)>>;

struct Expander<'a> {
    registry: &'a Registry,
    graph: &'a ValueGraph,
    source_nums: &'a [Option<i64>],
    memo: HashMap<(i64, usize), TermList>,
}

impl<'a> Expander<'a> {
    fn terms(&mut self, value: i64, budget: usize) -> TermList {
        if let Some(t) = self.memo.get(&(value, budget)) {
            return t.clone();
        }
        let mut out: Vec<(Ground, u64)> = self
            .source_nums
            .iter()
            .enumerate()
            .filter(|(_, n)| **n == Some(value))
            .map(|(i, _)| (Ground::Src(i), 1u64 << i))
            .collect();
        if budget > 0 {
            self.expand_producers(value, budget, &mut out);
        }
        out.sort();
        out.dedup();
        let rc = Rc::new(out);
        self.memo.insert((value, budget), rc.clone());
        rc
    }

    /// Appends every composite term of depth <= `budget` producing `value`.
    fn expand_producers(&mut self, value: i64, budget: usize, out: &mut Vec<(Ground, u64)>) {
        let Some(producers) = self.graph.producers.get(&value) else { return };
        let producers: Vec<Producer> = producers.iter().filter(|p| p.level <= budget).cloned().collect();
        for p in producers {
            let children: Vec<TermList> = p.args.iter().map(|&a| self.terms(a, budget - 1)).collect();
            let commutative = self.registry.functions()[p.func].commutative;
            let mut picked: Vec<&Ground> = Vec::with_capacity(children.len());
            product(&children, 0, 0, &mut picked, &mut |kids, mask| {
                let mut kids: Vec<Ground> = kids.iter().map(|g| (*g).clone()).collect();
                if commutative {
                    kids.sort();
                }
                out.push((Ground::Apply(p.func, kids), mask));
            });
        }
    }
}

/// Cartesian product over child term lists, keeping only leaf-disjoint picks.
fn product<'t>(
    lists: &'t [TermList],
    i: usize,
    mask: u64,
    picked: &mut Vec<&'t Ground>,
    emit: &mut dyn FnMut(&[&Ground], u64),
) {
    if i == lists.len() {
        emit(picked, mask);
        return;
    }
    for (g, m) in lists[i].iter() {
        if mask & m != 0 {
            continue;
        }
        picked.push(g);
        product(lists, i + 1, mask | m, picked, emit);
        picked.pop();
    }
}

/// Converts a ground term into a term over `?i` variables plus the binding
/// listing the source elements in first-occurrence order.
fn lift(g: &Ground, registry: &Registry, sources: &[&ElementState], selection: &str) -> (FunctionTerm, Binding) {
    fn walk(g: &Ground, registry: &Registry, order: &mut Vec<usize>) -> FunctionTerm {
        match g {
            Ground::Src(i) => {
                let var = match order.iter().position(|x| x == i) {
                    Some(p) => p,
                    None => {
                        order.push(*i);
                        order.len() - 1
                    }
                };
                FunctionTerm::Var(var)
            }
            Ground::Apply(f, kids) => FunctionTerm::Apply {
                func: registry.functions()[*f].id.to_string(),
                args: kids.iter().map(|k| walk(k, registry, order)).collect(),
            },
        }
    }
    let mut order = Vec::new();
    let term = walk(g, registry, &mut order);
    let args = order.iter().map(|&i| sources[i].id.clone()).collect();
    (term, Binding::new(selection, args))
}

/// Source elements for a search: non-empty elements other than the
/// selection, in layout order (or exactly the foci when restricted).
fn search_sources<'s>(state: &'s InterfaceState, target: &Sai, config: &HowSearchConfig) -> Result<Vec<&'s ElementState>> {
    if config.restrict_to_foci {
        if let Some(foci) = &config.foci {
            let mut out = Vec::new();
            for id in foci {
                let el = state
                    .get(id)
                    .ok_or_else(|| Error::MalformedState(format!("focus {id:?} not in state")))?;
                if !out.iter().any(|e: &&ElementState| e.id == el.id) {
                    out.push(el);
                }
            }
            out.sort_by(|a, b| crate::model::layout_cmp(a, b));
            return Ok(out);
        }
    }
    Ok(state
        .layout_order()
        .into_iter()
        .filter(|e| !e.value.is_empty() && e.id != target.selection)
        .collect())
}

/// Finds every composition of registry functions (depth <= `max_depth`)
/// over state values that evaluates to the target SAI's value.
pub fn how_search(
    registry: &Registry,
    state: &InterfaceState,
    target: &Sai,
    config: &HowSearchConfig,
) -> Result<ExplanationSet> {
    how_search_with_stats(registry, state, target, config).0
}

pub fn how_search_with_stats(
    registry: &Registry,
    state: &InterfaceState,
    target: &Sai,
    config: &HowSearchConfig,
) -> (Result<ExplanationSet>, SearchStats) {
    let mut stats = SearchStats::default();
    if target.action_type != ActionType::UpdateTextField {
        return (Err(Error::EmptySearch), stats);
    }
    let Some(goal) = target.value() else {
        return (Err(Error::EmptySearch), stats);
    };
    let sources = match search_sources(state, target, config) {
        Ok(s) => s,
        Err(e) => return (Err(e), stats),
    };
    // Leaf sets are tracked as 64-bit masks.
    let sources: Vec<&ElementState> = sources.into_iter().take(64).collect();
    let source_nums: Vec<Option<i64>> = sources.iter().map(|e| parse_value(&e.value)).collect();
    let numeric: Vec<i64> = source_nums.iter().flatten().copied().collect();

    let goal_num = parse_value(goal).filter(|n| n.to_string() == goal);
    let graph = ValueGraph::build(registry, &numeric, config.max_depth, goal_num, true);
    stats.visited = graph.visited;
    stats.distinct_values = graph.first_level.len();

    let mut found: BTreeSet<Ground> = BTreeSet::new();
    let mut masks: BTreeMap<Ground, u64> = BTreeMap::new();
    for (i, e) in sources.iter().enumerate() {
        if e.value == goal {
            found.insert(Ground::Src(i));
            masks.insert(Ground::Src(i), 1 << i);
        }
    }
    if let (Some(t), true) = (goal_num, config.max_depth > 0) {
        let mut ex = Expander {
            registry,
            graph: &graph,
            source_nums: &source_nums,
            memo: HashMap::new(),
        };
        let mut composite = Vec::new();
        ex.expand_producers(t, config.max_depth, &mut composite);
        for (g, m) in composite {
            masks.insert(g.clone(), m);
            found.insert(g);
        }
    }

    let all_mask: u64 = if sources.len() >= 64 { u64::MAX } else { (1u64 << sources.len()) - 1 };
    let items = found
        .iter()
        .filter(|g| !config.restrict_to_foci || config.foci.is_none() || masks[*g] == all_mask)
        .map(|g| lift(g, registry, &sources, &target.selection));
    let set = ExplanationSet::from_items(items);
    if set.is_empty() {
        (Err(Error::EmptySearch), stats)
    } else {
        (Ok(set), stats)
    }
}

/// The constant how-part used when search fails or for button presses.
pub fn bottom_out(target: &Sai) -> FunctionTerm {
    FunctionTerm::Const(target.value().unwrap_or("").to_string())
}

/// Evaluates a term over a binding. `None` means the application yields
/// no action (a partial function was undefined or an arg is missing).
pub fn eval_value(registry: &Registry, term: &FunctionTerm, binding: &Binding, state: &InterfaceState) -> Option<String> {
    match term {
        FunctionTerm::Const(c) => Some(c.clone()),
        FunctionTerm::Var(i) => binding.args.get(*i).and_then(|id| state.get(id)).map(|e| e.value.clone()),
        FunctionTerm::Apply { func, args } => {
            let f = registry.get(func)?;
            if args.len() != f.arity {
                return None;
            }
            let mut nums = Vec::with_capacity(args.len());
            for a in args {
                nums.push(parse_value(&eval_value(registry, a, binding, state)?)?);
            }
            f.apply_num(&nums).map(|v| v.to_string())
        }
    }
}

pub fn eval_term(
    registry: &Registry,
    term: &FunctionTerm,
    action_type: ActionType,
    binding: &Binding,
    state: &InterfaceState,
) -> Option<Sai> {
    if binding.args.len() < term.arity() {
        return None;
    }
    match action_type {
        ActionType::PressButton => Some(Sai::press(binding.selection.clone())),
        ActionType::UpdateTextField => {
            let v = eval_value(registry, term, binding, state)?;
            if v.is_empty() {
                None
            } else {
                Some(Sai::update(binding.selection.clone(), v))
            }
        }
    }
}

/// A term explaining every demonstration, with the bindings it uses in each.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConsistentComposition {
    pub term: FunctionTerm,
    pub bindings: Vec<Vec<Binding>>,
}

/// One demonstration for [`consistent_compositions`].
#[derive(Debug, Clone)]
pub struct Demo {
    pub state: InterfaceState,
    pub sai: Sai,
    pub foci: Option<Vec<String>>,
}

/// Intersects per-demonstration explanation sets by term identity.
pub fn consistent_compositions(
    registry: &Registry,
    demos: &[Demo],
    max_depth: usize,
) -> Result<Vec<ConsistentComposition>> {
    let mut sets = Vec::with_capacity(demos.len());
    for d in demos {
        let mut cfg = HowSearchConfig::with_depth(max_depth);
        if let Some(f) = &d.foci {
            cfg = cfg.focused(f.clone());
        }
        sets.push(how_search(registry, &d.state, &d.sai, &cfg)?);
    }
    let Some(first) = sets.first() else {
        return Err(Error::EmptySearch);
    };
    let mut out: Vec<ConsistentComposition> = first
        .terms()
        .into_iter()
        .filter(|t| sets.iter().all(|s| s.contains_term(t)))
        .map(|t| ConsistentComposition {
            term: t.clone(),
            bindings: sets.iter().map(|s| s.bindings_for(t).cloned().collect()).collect(),
        })
        .collect();
    if out.is_empty() {
        return Err(Error::EmptySearch);
    }
    out.sort_by(|a, b| term_preference_cmp(&a.term, &b.term));
    Ok(out)
}
