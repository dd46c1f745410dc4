//! Shared data model: interface states, SAI actions, bindings, function
//! terms and training signals, plus the JSON state wire format.
//!
//! The wire format is a key-sorted JSON object keyed by element id. Each
//! element carries the tutor widget fields; the internal `locked` flag is
//! written as its negation `contentEditable`.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::de::{MapAccess, Visitor};
use serde::{Deserialize, Deserializer, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum WidgetType {
    TextField,
    Button,
}

/// Spatial pointer directions between interface elements.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Dir {
    Above,
    Below,
    Left,
    Right,
}

impl Dir {
    pub const ALL: [Dir; 4] = [Dir::Above, Dir::Below, Dir::Left, Dir::Right];

    /// Short name used in relative feature paths (`sel.a.l`).
    pub fn short(self) -> &'static str {
        match self {
            Dir::Above => "a",
            Dir::Below => "b",
            Dir::Left => "l",
            Dir::Right => "r",
        }
    }

    pub fn opposite(self) -> Dir {
        match self {
            Dir::Above => Dir::Below,
            Dir::Below => Dir::Above,
            Dir::Left => Dir::Right,
            Dir::Right => Dir::Left,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ElementState {
    pub id: String,
    pub widget_type: WidgetType,
    pub value: String,
    /// Non-editable, either intrinsically or because a correct entry locked it.
    pub locked: bool,
    pub above: String,
    pub below: String,
    pub to_left: String,
    pub to_right: String,
    pub x: f64,
    pub y: f64,
    pub width: f64,
    pub height: f64,
    pub offset_parent: String,
}

impl ElementState {
    /// A text field with no pointers at the given position.
    pub fn text_field(id: impl Into<String>, value: impl Into<String>, locked: bool, x: f64, y: f64) -> Self {
        ElementState {
            id: id.into(),
            widget_type: WidgetType::TextField,
            value: value.into(),
            locked,
            above: String::new(),
            below: String::new(),
            to_left: String::new(),
            to_right: String::new(),
            x,
            y,
            width: 40.0,
            height: 40.0,
            offset_parent: "background-initial".to_string(),
        }
    }

    pub fn button(id: impl Into<String>, x: f64, y: f64) -> Self {
        ElementState {
            widget_type: WidgetType::Button,
            ..ElementState::text_field(id, "", false, x, y)
        }
    }

    pub fn pointer(&self, dir: Dir) -> &str {
        match dir {
            Dir::Above => &self.above,
            Dir::Below => &self.below,
            Dir::Left => &self.to_left,
            Dir::Right => &self.to_right,
        }
    }

    pub fn pointer_mut(&mut self, dir: Dir) -> &mut String {
        match dir {
            Dir::Above => &mut self.above,
            Dir::Below => &mut self.below,
            Dir::Left => &mut self.to_left,
            Dir::Right => &mut self.to_right,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.value.is_empty()
    }
}

/// The full widget state of a tutor interface; the only thing an agent observes.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct InterfaceState {
    elements: BTreeMap<String, ElementState>,
}

impl InterfaceState {
    /// Builds a state and validates id uniqueness, pointer targets and
    /// pointer symmetry.
    pub fn new(elements: impl IntoIterator<Item = ElementState>) -> Result<Self> {
        let mut map = BTreeMap::new();
        for el in elements {
            if el.id.is_empty() {
                return Err(Error::MalformedState("element with empty id".into()));
            }
            if map.contains_key(&el.id) {
                return Err(Error::MalformedState(format!("duplicate id {:?}", el.id)));
            }
            map.insert(el.id.clone(), el);
        }
        let state = InterfaceState { elements: map };
        state.validate()?;
        Ok(state)
    }

    pub fn empty() -> Self {
        InterfaceState::default()
    }

    fn validate(&self) -> Result<()> {
        for el in self.elements.values() {
            for dir in Dir::ALL {
                let target = el.pointer(dir);
                if target.is_empty() {
                    continue;
                }
                let Some(other) = self.elements.get(target) else {
                    return Err(Error::MalformedState(format!(
                        "{}.{:?} points at unknown element {target:?}",
                        el.id, dir
                    )));
                };
                let back = other.pointer(dir.opposite());
                if back != el.id {
                    return Err(Error::MalformedState(format!(
                        "asymmetric pointer: {}.{:?} = {} but {}.{:?} = {back:?}",
                        el.id,
                        dir,
                        other.id,
                        other.id,
                        dir.opposite()
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn get(&self, id: &str) -> Option<&ElementState> {
        self.elements.get(id)
    }

    pub fn contains(&self, id: &str) -> bool {
        self.elements.contains_key(id)
    }

    /// Elements in id order.
    pub fn elements(&self) -> impl Iterator<Item = &ElementState> {
        self.elements.values()
    }

    pub fn ids(&self) -> impl Iterator<Item = &str> {
        self.elements.keys().map(String::as_str)
    }

    pub fn len(&self) -> usize {
        self.elements.len()
    }

    pub fn is_empty(&self) -> bool {
        self.elements.is_empty()
    }

    pub fn neighbor(&self, id: &str, dir: Dir) -> Option<&ElementState> {
        let target = self.elements.get(id)?.pointer(dir);
        if target.is_empty() {
            None
        } else {
            self.elements.get(target)
        }
    }

    /// Returns a copy with `id`'s value replaced and its lock flag set.
    pub fn with_entry(&self, id: &str, value: &str, locked: bool) -> Result<InterfaceState> {
        let mut next = self.clone();
        let el = next
            .elements
            .get_mut(id)
            .ok_or_else(|| Error::MalformedState(format!("unknown element {id:?}")))?;
        el.value = value.to_string();
        el.locked = locked;
        Ok(next)
    }

    /// All elements sorted top-to-bottom then left-to-right (ties by id).
    /// This is the canonical source order used by how-search.
    pub fn layout_order(&self) -> Vec<&ElementState> {
        let mut v: Vec<&ElementState> = self.elements.values().collect();
        v.sort_by(|a, b| layout_cmp(a, b));
        v
    }
}

pub(crate) fn layout_cmp(a: &ElementState, b: &ElementState) -> std::cmp::Ordering {
    a.y.total_cmp(&b.y)
        .then(a.x.total_cmp(&b.x))
        .then_with(|| a.id.cmp(&b.id))
}

// ---------------------------------------------------------------------------
// Wire format
// ---------------------------------------------------------------------------

// Field order is the sorted key order, so serialization is key-sorted.
#[derive(Serialize, Deserialize)]
struct WireElement {
    above: String,
    below: String,
    #[serde(rename = "contentEditable")]
    content_editable: bool,
    height: f64,
    id: String,
    #[serde(rename = "offsetParent")]
    offset_parent: String,
    to_left: String,
    to_right: String,
    #[serde(rename = "type")]
    widget_type: WidgetType,
    value: String,
    width: f64,
    x: f64,
    y: f64,
}

impl From<&ElementState> for WireElement {
    fn from(e: &ElementState) -> Self {
        WireElement {
            above: e.above.clone(),
            below: e.below.clone(),
            content_editable: !e.locked,
            height: e.height,
            id: e.id.clone(),
            offset_parent: e.offset_parent.clone(),
            to_left: e.to_left.clone(),
            to_right: e.to_right.clone(),
            widget_type: e.widget_type,
            value: e.value.clone(),
            width: e.width,
            x: e.x,
            y: e.y,
        }
    }
}

impl From<WireElement> for ElementState {
    fn from(w: WireElement) -> Self {
        ElementState {
            id: w.id,
            widget_type: w.widget_type,
            value: w.value,
            locked: !w.content_editable,
            above: w.above,
            below: w.below,
            to_left: w.to_left,
            to_right: w.to_right,
            x: w.x,
            y: w.y,
            width: w.width,
            height: w.height,
            offset_parent: w.offset_parent,
        }
    }
}

/// Keeps every key of a JSON object, including duplicates, so decoding can
/// reject them instead of silently keeping the last one.
struct Entries(Vec<(String, WireElement)>);

impl<'de> Deserialize<'de> for Entries {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        struct V;
        impl<'de> Visitor<'de> for V {
            type Value = Entries;
            fn expecting(&self, f: &mut fmt::Formatter) -> fmt::Result {
                f.write_str("an object keyed by element id")
            }
            fn visit_map<A: MapAccess<'de>>(self, mut map: A) -> std::result::Result<Entries, A::Error> {
                let mut out = Vec::new();
                while let Some((k, v)) = map.next_entry::<String, WireElement>()? {
                    out.push((k, v));
                }
                Ok(Entries(out))
            }
        }
        d.deserialize_map(V)
    }
}

/// Serializes a state to deterministic, key-sorted JSON.
pub fn encode_state(state: &InterfaceState) -> String {
    serde_json::to_string(&state_to_value(state)).expect("state serializes")
}

pub fn state_to_value(state: &InterfaceState) -> serde_json::Value {
    let map: BTreeMap<&str, WireElement> = state
        .elements
        .iter()
        .map(|(k, v)| (k.as_str(), WireElement::from(v)))
        .collect();
    serde_json::to_value(map).expect("state serializes")
}

pub fn decode_state(text: &str) -> Result<InterfaceState> {
    let entries: Entries =
        serde_json::from_str(text).map_err(|e| Error::MalformedState(e.to_string()))?;
    state_from_entries(entries)
}

pub fn state_from_value(value: serde_json::Value) -> Result<InterfaceState> {
    let entries: Entries =
        serde_json::from_value(value).map_err(|e| Error::MalformedState(e.to_string()))?;
    state_from_entries(entries)
}

fn state_from_entries(entries: Entries) -> Result<InterfaceState> {
    let mut seen = BTreeSet::new();
    let mut elements = Vec::with_capacity(entries.0.len());
    for (key, wire) in entries.0 {
        if !seen.insert(key.clone()) {
            return Err(Error::MalformedState(format!("duplicate id {key:?}")));
        }
        if wire.id != key {
            return Err(Error::MalformedState(format!(
                "key {key:?} does not match element id {:?}",
                wire.id
            )));
        }
        elements.push(ElementState::from(wire));
    }
    InterfaceState::new(elements)
}

impl Serialize for InterfaceState {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        state_to_value(self).serialize(s)
    }
}

impl<'de> Deserialize<'de> for InterfaceState {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let entries = Entries::deserialize(d)?;
        state_from_entries(entries).map_err(serde::de::Error::custom)
    }
}

// ---------------------------------------------------------------------------
// Actions
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum ActionType {
    UpdateTextField,
    PressButton,
}

/// Selection-ActionType-Input triple. Equality is structural.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub struct Sai {
    pub selection: String,
    pub action_type: ActionType,
    pub input: BTreeMap<String, String>,
}

impl Sai {
    pub fn update(selection: impl Into<String>, value: impl Into<String>) -> Sai {
        let mut input = BTreeMap::new();
        input.insert("value".to_string(), value.into());
        Sai {
            selection: selection.into(),
            action_type: ActionType::UpdateTextField,
            input,
        }
    }

    pub fn press(selection: impl Into<String>) -> Sai {
        Sai {
            selection: selection.into(),
            action_type: ActionType::PressButton,
            input: BTreeMap::new(),
        }
    }

    pub fn new(
        selection: impl Into<String>,
        action_type: ActionType,
        input: BTreeMap<String, String>,
    ) -> Result<Sai> {
        let sai = Sai {
            selection: selection.into(),
            action_type,
            input,
        };
        sai.validate()?;
        Ok(sai)
    }

    pub fn validate(&self) -> Result<()> {
        if self.selection.is_empty() {
            return Err(Error::InvalidSai("empty selection".into()));
        }
        match self.action_type {
            ActionType::UpdateTextField => {
                if self.input.len() != 1 || !self.input.contains_key("value") {
                    return Err(Error::InvalidSai(
                        "UpdateTextField input must be exactly {\"value\": ...}".into(),
                    ));
                }
            }
            ActionType::PressButton => {
                if !self.input.is_empty() {
                    return Err(Error::InvalidSai("PressButton input must be empty".into()));
                }
            }
        }
        Ok(())
    }

    /// The written value for text updates.
    pub fn value(&self) -> Option<&str> {
        self.input.get("value").map(String::as_str)
    }
}

impl fmt::Display for Sai {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.value() {
            Some(v) => write!(f, "({}, {:?}, {v:?})", self.selection, self.action_type),
            None => write!(f, "({}, {:?})", self.selection, self.action_type),
        }
    }
}

impl<'de> Deserialize<'de> for Sai {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        struct Raw {
            selection: String,
            action_type: ActionType,
            #[serde(default)]
            input: BTreeMap<String, String>,
        }
        let raw = Raw::deserialize(d)?;
        Sai::new(raw.selection, raw.action_type, raw.input).map_err(serde::de::Error::custom)
    }
}

// ---------------------------------------------------------------------------
// Skills and explanations
// ---------------------------------------------------------------------------

/// The interface elements grounding a skill: one selection plus the
/// ordered how-part arguments.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Binding {
    pub selection: String,
    pub args: Vec<String>,
}

impl Binding {
    pub fn new(selection: impl Into<String>, args: Vec<String>) -> Binding {
        Binding {
            selection: selection.into(),
            args,
        }
    }

    /// Slot 0 is the selection, slots 1.. are the args.
    pub fn slots(&self) -> impl Iterator<Item = &str> {
        std::iter::once(self.selection.as_str()).chain(self.args.iter().map(String::as_str))
    }

    pub fn is_valid_in(&self, state: &InterfaceState) -> bool {
        self.slots().all(|id| state.contains(id))
    }
}

/// How-part AST: a composition of registry functions over binding args.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum FunctionTerm {
    Apply { func: String, args: Vec<FunctionTerm> },
    Var(usize),
    Const(String),
}

impl FunctionTerm {
    pub fn apply(func: impl Into<String>, args: Vec<FunctionTerm>) -> FunctionTerm {
        FunctionTerm::Apply {
            func: func.into(),
            args,
        }
    }

    pub fn depth(&self) -> usize {
        match self {
            FunctionTerm::Apply { args, .. } => 1 + args.iter().map(|a| a.depth()).max().unwrap_or(0),
            _ => 0,
        }
    }

    /// Number of function applications in the term.
    pub fn applications(&self) -> usize {
        match self {
            FunctionTerm::Apply { args, .. } => 1 + args.iter().map(|a| a.applications()).sum::<usize>(),
            _ => 0,
        }
    }

    /// Number of binding args the term reads (max Var index + 1).
    pub fn arity(&self) -> usize {
        match self {
            FunctionTerm::Var(i) => i + 1,
            FunctionTerm::Const(_) => 0,
            FunctionTerm::Apply { args, .. } => args.iter().map(|a| a.arity()).max().unwrap_or(0),
        }
    }

    pub fn const_leaves(&self) -> usize {
        match self {
            FunctionTerm::Const(_) => 1,
            FunctionTerm::Var(_) => 0,
            FunctionTerm::Apply { args, .. } => args.iter().map(|a| a.const_leaves()).sum(),
        }
    }

    pub fn distinct_vars(&self) -> usize {
        fn walk(t: &FunctionTerm, out: &mut BTreeSet<usize>) {
            match t {
                FunctionTerm::Var(i) => {
                    out.insert(*i);
                }
                FunctionTerm::Const(_) => {}
                FunctionTerm::Apply { args, .. } => args.iter().for_each(|a| walk(a, out)),
            }
        }
        let mut s = BTreeSet::new();
        walk(self, &mut s);
        s.len()
    }
}

impl fmt::Display for FunctionTerm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            FunctionTerm::Var(i) => write!(f, "?{i}"),
            FunctionTerm::Const(c) => write!(f, "{c:?}"),
            FunctionTerm::Apply { func, args } => {
                write!(f, "{func}(")?;
                for (i, a) in args.iter().enumerate() {
                    if i > 0 {
                        f.write_str(",")?;
                    }
                    write!(f, "{a}")?;
                }
                f.write_str(")")
            }
        }
    }
}

/// A skill (or a freshly induced how-term) together with the binding that
/// reproduces an observed action.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Explanation {
    pub skill_id: Option<String>,
    pub term: FunctionTerm,
    pub binding: Binding,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Source {
    Demonstration,
    FeedbackOnOwnAction,
}

/// The unit of instruction passed to `train`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingSignal {
    pub state: InterfaceState,
    pub sai: Sai,
    pub reward: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub foci: Option<Vec<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub skill_label: Option<String>,
    pub source: Source,
}

impl TrainingSignal {
    pub fn demonstration(state: InterfaceState, sai: Sai) -> TrainingSignal {
        TrainingSignal {
            state,
            sai,
            reward: 1.0,
            foci: None,
            skill_label: None,
            source: Source::Demonstration,
        }
    }

    pub fn feedback(state: InterfaceState, sai: Sai, reward: f64) -> TrainingSignal {
        TrainingSignal {
            state,
            sai,
            reward,
            foci: None,
            skill_label: None,
            source: Source::FeedbackOnOwnAction,
        }
    }

    pub fn with_foci(mut self, foci: Vec<String>) -> Self {
        self.foci = Some(foci);
        self
    }

    pub fn with_label(mut self, label: impl Into<String>) -> Self {
        self.skill_label = Some(label.into());
        self
    }

    pub fn validate(&self) -> Result<()> {
        self.sai.validate()?;
        if self.source == Source::Demonstration && self.reward <= 0.0 {
            return Err(Error::InvalidSai("demonstrations must carry positive reward".into()));
        }
        if !self.state.contains(&self.sai.selection) {
            return Err(Error::InvalidSai(format!(
                "selection {:?} not in state",
                self.sai.selection
            )));
        }
        Ok(())
    }
}
