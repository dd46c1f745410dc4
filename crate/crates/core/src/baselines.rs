//! State-action responders that map a one-hot encoded state directly to an
//! SAI, with no decomposition into skills.

use serde::{Deserialize, Serialize};

use crate::model::{ActionType, InterfaceState, Sai, Source, TrainingSignal};
use crate::tutor::Domain;
use crate::when_learning::{Dataset, DecisionTree, FeatureMap, TreeConfig};

/// One-hot layout for a domain: a symbol group per element plus one lock
/// bit per element, and the table of every SAI a responder may emit.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OneHotCodec {
    domain: Domain,
    symbols: Vec<String>,
}

impl OneHotCodec {
    pub fn new(domain: Domain) -> OneHotCodec {
        let mut symbols = vec![String::new()];
        match domain {
            Domain::McAddition => symbols.extend((0..10).map(|d| d.to_string())),
            Domain::Fractions => {
                symbols.extend((1..=450).map(|d| d.to_string()));
                symbols.extend(["x", "no", "+", "×"].map(String::from));
            }
        }
        OneHotCodec { domain, symbols }
    }

    pub fn domain(&self) -> Domain {
        self.domain
    }

    /// Symbols per element group; index 0 is the empty symbol.
    pub fn symbols(&self) -> &[String] {
        &self.symbols
    }

    /// Dense encoding: for each element in id order, one bit per symbol
    /// followed by the lock bit. Values outside the vocabulary set no bit.
    pub fn encode(&self, state: &InterfaceState) -> Vec<bool> {
        let group = self.symbols.len() + 1;
        let mut bits = vec![false; state.len() * group];
        for (i, e) in state.elements().enumerate() {
            if let Some(k) = self.symbols.iter().position(|s| *s == e.value) {
                bits[i * group + k] = true;
            }
            bits[i * group + group - 1] = e.locked;
        }
        bits
    }

    /// The set bits of [`encode`](Self::encode) as sparse features.
    pub fn features(&self, state: &InterfaceState) -> FeatureMap {
        let mut f = FeatureMap::new();
        for e in state.elements() {
            if self.symbols.contains(&e.value) {
                f.insert(format!("{}={}", e.id, e.value), "1".into());
            }
            if e.locked {
                f.insert(format!("{}.locked", e.id), "1".into());
            }
        }
        f
    }

    /// Every SAI in the action table for `state`'s layout: each writable
    /// field with each input, then the done button.
    pub fn action_table(&self, state: &InterfaceState) -> Vec<Sai> {
        let mut out = Vec::new();
        for e in state.elements() {
            if e.id == "done" {
                continue;
            }
            let inputs: Vec<&str> = match self.domain {
                Domain::McAddition if e.id.starts_with("inp") => continue,
                Domain::McAddition => self.symbols[1..].iter().map(String::as_str).collect(),
                Domain::Fractions if e.id == "check_convert" => vec!["x", "no"],
                Domain::Fractions if e.id.starts_with("conv_") || e.id.starts_with("ans_") => {
                    self.symbols[1..=450].iter().map(String::as_str).collect()
                }
                Domain::Fractions => continue,
            };
            out.extend(inputs.into_iter().map(|v| Sai::update(e.id.clone(), v)));
        }
        out.push(Sai::press("done"));
        out
    }
}

/// An action-table class label.
pub fn sai_token(sai: &Sai) -> String {
    format!("{}|{}", sai.selection, ai_token(sai))
}

/// The action-type and input part of a token.
pub fn ai_token(sai: &Sai) -> String {
    match sai.action_type {
        ActionType::PressButton => "PressButton".to_string(),
        ActionType::UpdateTextField => format!("UpdateTextField:{}", sai.value().unwrap_or("")),
    }
}

fn sai_from_parts(selection: &str, ai: &str) -> Sai {
    match ai.split_once(':') {
        Some((_, v)) => Sai::update(selection, v),
        None => Sai::press(selection),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ResponderKind {
    /// One tree over whole-SAI classes.
    SingleTree,
    /// A selection tree and an action-type-plus-input tree.
    DoubleTree,
}

/// A decision-tree state-action responder. Learns only from correct
/// actions and refits at problem boundaries.
#[derive(Debug, Clone)]
pub struct StateActionResponder {
    kind: ResponderKind,
    codec: OneHotCodec,
    tree_config: TreeConfig,
    whole: Dataset<String>,
    sel: Dataset<String>,
    ai: Dataset<String>,
    whole_tree: Option<DecisionTree<String>>,
    sel_tree: Option<DecisionTree<String>>,
    ai_tree: Option<DecisionTree<String>>,
    pending: bool,
}

impl StateActionResponder {
    pub fn new(kind: ResponderKind, domain: Domain) -> StateActionResponder {
        StateActionResponder {
            kind,
            codec: OneHotCodec::new(domain),
            tree_config: TreeConfig::default(),
            whole: Dataset::new(),
            sel: Dataset::new(),
            ai: Dataset::new(),
            whole_tree: None,
            sel_tree: None,
            ai_tree: None,
            pending: false,
        }
    }

    pub fn kind(&self) -> ResponderKind {
        self.kind
    }

    pub fn examples(&self) -> usize {
        self.whole.len().max(self.sel.len())
    }

    /// Predicts an SAI. Untrained responders return the first entry of the
    /// action table.
    pub fn act(&self, state: &InterfaceState) -> Sai {
        let f = self.codec.features(state);
        let predicted = match self.kind {
            ResponderKind::SingleTree => self.whole_tree.as_ref().map(|t| {
                let token = t.predict(&f);
                let (sel, ai) = token.split_once('|').expect("token has a selection");
                sai_from_parts(sel, ai)
            }),
            ResponderKind::DoubleTree => match (&self.sel_tree, &self.ai_tree) {
                (Some(s), Some(a)) => Some(sai_from_parts(s.predict(&f), a.predict(&f))),
                _ => None,
            },
        };
        predicted.unwrap_or_else(|| self.codec.action_table(state).swap_remove(0))
    }

    /// Records a correct (state, action) pair. Negative feedback carries no
    /// class label and is ignored.
    pub fn learn(&mut self, state: &InterfaceState, correct: &Sai) {
        let f = self.codec.features(state);
        match self.kind {
            ResponderKind::SingleTree => self.whole.push(&f, sai_token(correct)),
            ResponderKind::DoubleTree => {
                self.sel.push(&f, correct.selection.clone());
                self.ai.push(&f, ai_token(correct));
            }
        }
        self.pending = true;
    }

    pub fn train(&mut self, signal: &TrainingSignal) {
        if signal.reward > 0.0 || signal.source == Source::Demonstration {
            self.learn(&signal.state, &signal.sai);
        }
    }

    /// Refits the trees if examples arrived since the last refit.
    pub fn refit(&mut self) {
        if !self.pending {
            return;
        }
        self.pending = false;
        match self.kind {
            ResponderKind::SingleTree => self.whole_tree = DecisionTree::fit(&self.whole, &self.tree_config),
            ResponderKind::DoubleTree => {
                self.sel_tree = DecisionTree::fit(&self.sel, &self.tree_config);
                self.ai_tree = DecisionTree::fit(&self.ai, &self.tree_config);
            }
        }
    }
}
