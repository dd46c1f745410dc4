//! The agent: skill induction from demonstrations, refinement from
//! feedback, and action selection through a conflict set.
//!
//! Acting factors into stages: where-parts propose bindings, when-parts
//! filter them, how-parts turn each surviving binding into an SAI, and
//! which-utilities order the resulting conflict set.

use std::collections::{BTreeSet, VecDeque};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::how::{
    bottom_out, consistent_compositions, eval_term, how_search, term_preference_cmp, Demo, HowSearchConfig,
    Registry,
};
use crate::model::{layout_cmp, ActionType, Binding, FunctionTerm, InterfaceState, Sai, Source, TrainingSignal};
use crate::when_learning::{
    absolute_features, augment_state, AugmentedState, Dataset, DecisionTree, FeatureMap, Preprocessor, TreeConfig,
};
use crate::where_learning::{WherePart, WhereVariant};

/// How a skill's left-hand side is represented.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
pub enum LhsMode {
    /// Separate where-part (binding generator) and when-part (classifier).
    #[default]
    Decomposed,
    /// One multiclass tree per skill choosing a single binding, or none,
    /// from absolute state features. No where generalization, no when filter.
    SingleBindingTree,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AgentConfig {
    pub lhs: LhsMode,
    pub where_variant: WhereVariant,
    pub when_preprocessor: Preprocessor,
    pub when_config: TreeConfig,
    pub max_depth: usize,
    /// Use tutor-supplied foci to restrict how-search.
    pub use_foci: bool,
    /// Group demonstrations by tutor-supplied skill labels.
    pub use_labels: bool,
    pub implicit_negatives: bool,
    pub which_enabled: bool,
    /// Also generalize where-parts on positive feedback for own actions.
    pub where_on_feedback: bool,
    /// Enabled general features: `Equals` relates pairs of state values,
    /// `Output` exposes the value a candidate application would write.
    pub general_features: Vec<String>,
    /// Registry function ids; `None` means the default registry.
    pub functions: Option<Vec<String>>,
    pub seed: u64,
}

impl Default for AgentConfig {
    fn default() -> Self {
        AgentConfig {
            lhs: LhsMode::Decomposed,
            where_variant: WhereVariant::AntiUnify,
            when_preprocessor: Preprocessor::default(),
            when_config: TreeConfig::default(),
            max_depth: 2,
            use_foci: true,
            use_labels: true,
            implicit_negatives: true,
            which_enabled: true,
            where_on_feedback: false,
            general_features: vec!["Equals".to_string(), "Output".to_string()],
            functions: None,
            seed: 0,
        }
    }
}

impl AgentConfig {
    pub fn single_lhs() -> AgentConfig {
        AgentConfig {
            lhs: LhsMode::SingleBindingTree,
            when_preprocessor: Preprocessor::AppendBinding,
            ..AgentConfig::default()
        }
    }

    fn equals_enabled(&self) -> bool {
        self.general_features.iter().any(|f| f == "Equals")
    }

    fn output_enabled(&self) -> bool {
        self.general_features.iter().any(|f| f == "Output")
    }

    pub fn validate(&self) -> Result<()> {
        for f in &self.general_features {
            if f != "Equals" && f != "Output" {
                return Err(Error::Config(format!("unknown general feature {f:?}")));
            }
        }
        if self.max_depth > 3 {
            return Err(Error::Config("max_depth above 3 is not supported".into()));
        }
        if let Some(ids) = &self.functions {
            Registry::from_ids(ids)?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ExampleKind {
    Explicit,
    ImplicitNegative,
}

/// Binding class for the single-LHS tree; `None` means "no binding".
type BindingClass = Option<Binding>;

#[derive(Debug, Clone)]
struct StoredDemo {
    state: InterfaceState,
    sai: Sai,
    foci: Option<Vec<String>>,
}

#[derive(Debug, Clone)]
pub struct Skill {
    pub id: String,
    pub label: Option<String>,
    pub how: FunctionTerm,
    pub action_type: ActionType,
    pub where_part: WherePart,
    when_data: Dataset<bool>,
    when_kinds: Vec<ExampleKind>,
    when_tree: Option<DecisionTree<bool>>,
    binding_data: Dataset<BindingClass>,
    binding_tree: Option<DecisionTree<BindingClass>>,
    pub positives: u32,
    pub total: u32,
    demos: Vec<StoredDemo>,
}

impl Skill {
    /// Proportion of positive feedback; 0.5 before any feedback.
    pub fn utility(&self) -> f64 {
        if self.total == 0 {
            0.5
        } else {
            self.positives as f64 / self.total as f64
        }
    }

    pub fn when_examples(&self) -> usize {
        self.when_data.len()
    }

    pub fn when_tree(&self) -> Option<&DecisionTree<bool>> {
        self.when_tree.as_ref()
    }

    fn when_accepts(&self, features: &FeatureMap) -> bool {
        self.when_tree.as_ref().is_none_or(|t| *t.predict(features))
    }

    fn record(&mut self, reward_positive: bool) {
        self.total += 1;
        if reward_positive {
            self.positives += 1;
        }
    }
}

/// Serializable view of a skill: the executable rule plus its statistics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SkillExport {
    pub id: String,
    pub label: Option<String>,
    pub how: String,
    pub how_term: FunctionTerm,
    pub action_type: ActionType,
    pub where_part: WherePart,
    /// Disjunction of conjunctions of `(feature, value)` conditions.
    pub when_rules: Vec<Vec<(String, String)>>,
    pub when_tree: Option<serde_json::Value>,
    pub when_examples: usize,
    pub binding_examples: usize,
    pub positives: u32,
    pub total: u32,
    pub utility: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SkillApplication {
    pub skill_id: String,
    pub binding: Binding,
    pub sai: Sai,
    pub utility: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Decision {
    Attempt(SkillApplication),
    HintRequest,
}

/// The intermediate results of one `act` call, stage by stage.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ActTrace {
    /// (skill index, binding) pairs proposed by where-parts.
    pub proposed: Vec<(usize, Binding)>,
    /// The subset accepted by when-parts.
    pub accepted: Vec<(usize, Binding)>,
    pub conflict_set: Vec<SkillApplication>,
}

#[derive(Debug, Clone)]
pub struct Agent {
    config: AgentConfig,
    registry: Registry,
    skills: Vec<Skill>,
    next_id: usize,
    /// Explanation term sets of recent unfocused demonstrations, used to
    /// prefer terms that also explain earlier examples.
    recent_terms: VecDeque<BTreeSet<FunctionTerm>>,
}

const RECENT_TERM_SETS: usize = 16;

impl Agent {
    pub fn new(config: AgentConfig) -> Result<Agent> {
        config.validate()?;
        let registry = match &config.functions {
            Some(ids) => Registry::from_ids(ids)?,
            None => Registry::default_registry(),
        };
        Ok(Agent {
            config,
            registry,
            skills: Vec::new(),
            next_id: 0,
            recent_terms: VecDeque::new(),
        })
    }

    pub fn config(&self) -> &AgentConfig {
        &self.config
    }

    pub fn registry(&self) -> &Registry {
        &self.registry
    }

    pub fn skills(&self) -> &[Skill] {
        &self.skills
    }

    pub fn augment(&self, state: &InterfaceState) -> AugmentedState {
        augment_state(state, self.config.equals_enabled())
    }

    pub fn export_skills(&self) -> Vec<SkillExport> {
        self.skills
            .iter()
            .map(|s| SkillExport {
                id: s.id.clone(),
                label: s.label.clone(),
                how: s.how.to_string(),
                how_term: s.how.clone(),
                action_type: s.action_type,
                where_part: s.where_part.clone(),
                when_rules: s.when_tree.as_ref().map(|t| t.rules_for(&true)).unwrap_or_default(),
                when_tree: s.when_tree.as_ref().and_then(|t| serde_json::to_value(t).ok()),
                when_examples: s.when_data.len(),
                binding_examples: s.binding_data.len(),
                positives: s.positives,
                total: s.total,
                utility: s.utility(),
            })
            .collect()
    }

    // -----------------------------------------------------------------
    // Acting
    // -----------------------------------------------------------------

    /// Runs the full act pipeline and returns every stage.
    pub fn trace(&self, state: &InterfaceState) -> ActTrace {
        let aug = self.augment(state);
        let mut trace = ActTrace::default();
        let absolute = match self.config.lhs {
            LhsMode::SingleBindingTree => Some(absolute_features(&aug)),
            LhsMode::Decomposed => None,
        };
        for (si, skill) in self.skills.iter().enumerate() {
            let bindings = match &absolute {
                None => skill.where_part.matches(state),
                Some(features) => single_binding(skill, features, state).into_iter().collect(),
            };
            for b in bindings {
                if b.args.len() < skill.how.arity() {
                    continue;
                }
                trace.proposed.push((si, b.clone()));
                if absolute.is_none() {
                    let features = when_features(&self.config, &self.registry, &aug, skill, &b);
                    if !skill.when_accepts(&features) {
                        continue;
                    }
                }
                trace.accepted.push((si, b.clone()));
                if let Some(sai) = eval_term(&self.registry, &skill.how, skill.action_type, &b, state) {
                    let utility = if self.config.which_enabled { skill.utility() } else { 0.5 };
                    trace.conflict_set.push(SkillApplication {
                        skill_id: skill.id.clone(),
                        binding: b,
                        sai,
                        utility,
                    });
                }
            }
        }
        trace.conflict_set.sort_by(|a, b| {
            b.utility
                .total_cmp(&a.utility)
                .then_with(|| a.skill_id.cmp(&b.skill_id))
                .then_with(|| a.binding.cmp(&b.binding))
        });
        trace
    }

    pub fn conflict_set(&self, state: &InterfaceState) -> Vec<SkillApplication> {
        self.trace(state).conflict_set
    }

    pub fn act(&self, state: &InterfaceState) -> Decision {
        match self.conflict_set(state).into_iter().next() {
            Some(app) => Decision::Attempt(app),
            None => Decision::HintRequest,
        }
    }

    // -----------------------------------------------------------------
    // Training
    // -----------------------------------------------------------------

    pub fn train(&mut self, signal: &TrainingSignal) -> Result<()> {
        signal.validate()?;
        let positive = signal.reward > 0.0;
        let competing = self.conflict_set(&signal.state);
        let credited = match signal.source {
            Source::FeedbackOnOwnAction => {
                let app = competing.iter().find(|a| a.sai == signal.sai).cloned();
                match app {
                    Some(app) => {
                        let si = self.skill_index(&app.skill_id).expect("conflict set skill exists");
                        self.update_skill(si, &signal.state, &app.binding, positive, ExampleKind::Explicit, true);
                        Some((si, app.binding))
                    }
                    // An action the agent would not produce now; a positive
                    // signal is as informative as a demonstration.
                    None if positive => Some(self.learn_demonstration(signal)?),
                    None => None,
                }
            }
            Source::Demonstration => Some(self.learn_demonstration(signal)?),
        };
        if positive && self.config.implicit_negatives {
            // A field has one correct value, so a competitor writing another
            // value into the same selection is wrong here. Only ones ranked
            // above the confirmed action would have displaced it; actions on
            // other selections may be correct too and are left alone.
            let rank = competing.iter().position(|a| a.sai == signal.sai).unwrap_or(competing.len());
            for app in competing[..rank].iter().filter(|a| a.sai.selection == signal.sai.selection) {
                if let Some(si) = self.skill_index(&app.skill_id) {
                    if credited.as_ref().is_some_and(|(csi, b)| *csi == si && *b == app.binding) {
                        continue;
                    }
                    self.add_negative(si, &signal.state, &app.binding);
                }
            }
        }
        Ok(())
    }

    fn skill_index(&self, id: &str) -> Option<usize> {
        self.skills.iter().position(|s| s.id == id)
    }

    fn add_negative(&mut self, si: usize, state: &InterfaceState, binding: &Binding) {
        let aug = self.augment(state);
        let f = when_features(&self.config, &self.registry, &aug, &self.skills[si], binding);
        let skill = &mut self.skills[si];
        match self.config.lhs {
            LhsMode::Decomposed => {
                skill.when_data.push(&f, false);
                skill.when_kinds.push(ExampleKind::ImplicitNegative);
                skill.when_tree = DecisionTree::fit(&skill.when_data, &self.config.when_config);
            }
            LhsMode::SingleBindingTree => {
                skill.binding_data.push(&absolute_features(&aug), None);
                skill.binding_tree = DecisionTree::fit(&skill.binding_data, &self.config.when_config);
            }
        }
    }

    /// Applies one explicit reward to skill `si` at `binding`.
    fn update_skill(
        &mut self,
        si: usize,
        state: &InterfaceState,
        binding: &Binding,
        positive: bool,
        kind: ExampleKind,
        from_feedback: bool,
    ) {
        let aug = self.augment(state);
        let cfg = &self.config;
        let f = when_features(cfg, &self.registry, &aug, &self.skills[si], binding);
        let skill = &mut self.skills[si];
        skill.record(positive);
        match cfg.lhs {
            LhsMode::Decomposed => {
                if positive && (!from_feedback || cfg.where_on_feedback) {
                    skill.where_part = skill.where_part.generalize(state, binding);
                }
                skill.when_data.push(&f, positive);
                skill.when_kinds.push(kind);
                skill.when_tree = DecisionTree::fit(&skill.when_data, &cfg.when_config);
            }
            LhsMode::SingleBindingTree => {
                let class = positive.then(|| binding.clone());
                skill.binding_data.push(&absolute_features(&aug), class);
                skill.binding_tree = DecisionTree::fit(&skill.binding_data, &cfg.when_config);
            }
        }
    }

    /// Explains a demonstrated SAI, inducing or revising a skill if needed,
    /// and credits the explaining skill. Returns (skill index, binding).
    fn learn_demonstration(&mut self, signal: &TrainingSignal) -> Result<(usize, Binding)> {
        let foci = if self.config.use_foci { signal.foci.clone() } else { None };
        let label = if self.config.use_labels { signal.skill_label.clone() } else { None };
        let state = &signal.state;
        let sai = &signal.sai;

        if let Some((si, covered, b)) = self.explain_with_known(state, sai, foci.as_deref(), label.as_deref()) {
            // Without foci any args that happen to reproduce the value can
            // explain it; for a labeled skill, an explanation its where-part
            // does not cover is a cue to look for a better how-part first.
            let revised = if foci.is_none() && label.is_some() && !covered && self.skills[si].how.arity() > 0 {
                self.revise_labeled(si, signal, None)
            } else {
                None
            };
            if let Some(b) = revised {
                return Ok((si, b));
            }
            self.remember_demo(si, signal, foci.clone());
            self.update_skill(si, state, &b, true, ExampleKind::Explicit, false);
            return Ok((si, b));
        }

        // A labeled skill that cannot explain this demo: look for a how-part
        // consistent with all of the label's demonstrations.
        if let Some(label) = &label {
            if let Some(si) = self.skills.iter().rposition(|s| s.label.as_deref() == Some(label.as_str())) {
                if let Some(b) = self.revise_labeled(si, signal, foci.clone()) {
                    return Ok((si, b));
                }
            }
        }

        let (term, binding) = self.induce_how(state, sai, foci.as_deref())?;
        let si = self.mint_skill(label, term, sai.action_type, state, &binding);
        self.remember_demo(si, signal, foci);
        self.update_skill(si, state, &binding, true, ExampleKind::Explicit, false);
        Ok((si, binding))
    }

    fn remember_demo(&mut self, si: usize, signal: &TrainingSignal, foci: Option<Vec<String>>) {
        if self.skills[si].label.is_some() {
            self.skills[si].demos.push(StoredDemo {
                state: signal.state.clone(),
                sai: signal.sai.clone(),
                foci,
            });
        }
    }

    /// Finds an existing skill whose how-part reproduces `sai` in `state`.
    /// Preference: bindings the where-part already covers, then the
    /// how-part preference order, then the most recently created skill.
    fn explain_with_known(
        &self,
        state: &InterfaceState,
        sai: &Sai,
        foci: Option<&[String]>,
        label: Option<&str>,
    ) -> Option<(usize, bool, Binding)> {
        let mut best: Option<(bool, usize, Binding)> = None;
        for (si, skill) in self.skills.iter().enumerate() {
            if skill.action_type != sai.action_type {
                continue;
            }
            if label.is_some() && skill.label.as_deref() != label {
                continue;
            }
            let Some((covered, b)) = self.best_binding(skill, state, sai, foci) else {
                continue;
            };
            let better = match &best {
                None => true,
                Some((bc, bsi, _)) => covered
                    .cmp(bc)
                    .then_with(|| term_preference_cmp(&self.skills[*bsi].how, &skill.how))
                    .then(si.cmp(bsi))
                    .is_gt(),
            };
            if better {
                best = Some((covered, si, b));
            }
        }
        best.map(|(covered, si, b)| (si, covered, b))
    }

    /// The binding under which `skill` reproduces `sai`, if any, and
    /// whether its where-part already covers it.
    fn best_binding(
        &self,
        skill: &Skill,
        state: &InterfaceState,
        sai: &Sai,
        foci: Option<&[String]>,
    ) -> Option<(bool, Binding)> {
        let arity = skill.how.arity();
        let focus_set: Option<BTreeSet<&str>> = foci.filter(|f| !f.is_empty()).map(|f| f.iter().map(String::as_str).collect());
        let mut sources: Vec<_> = state
            .layout_order()
            .into_iter()
            .filter(|e| !e.is_empty() && e.id != sai.selection)
            .collect();
        if let Some(fs) = &focus_set {
            if fs.len() != arity {
                return None;
            }
            sources.retain(|e| fs.contains(e.id.as_str()));
        }
        let mut found: Option<(bool, bool, Binding)> = None;
        let mut args: Vec<usize> = Vec::with_capacity(arity);
        let mut consider = |args: &[usize]| {
            let b = Binding::new(sai.selection.clone(), args.iter().map(|&i| sources[i].id.clone()).collect());
            if eval_term(&self.registry, &skill.how, skill.action_type, &b, state).as_ref() != Some(sai) {
                return;
            }
            let covered = match self.config.lhs {
                LhsMode::Decomposed => skill.where_part.covers(state, &b),
                LhsMode::SingleBindingTree => false,
            };
            let ordered = args.windows(2).all(|w| layout_cmp(sources[w[0]], sources[w[1]]).is_lt());
            // First found in enumeration order wins among equals.
            let key = (covered, ordered);
            if found.as_ref().is_none_or(|(c, o, _)| key > (*c, *o)) {
                found = Some((covered, ordered, b));
            }
        };
        enumerate_args(sources.len(), arity, &mut args, &mut consider);
        found.map(|(c, _, b)| (c, b))
    }

    fn induce_how(&mut self, state: &InterfaceState, sai: &Sai, foci: Option<&[String]>) -> Result<(FunctionTerm, Binding)> {
        let bottom = || (bottom_out(sai), Binding::new(sai.selection.clone(), vec![]));
        if sai.action_type == ActionType::PressButton {
            return Ok(bottom());
        }
        let mut cfg = HowSearchConfig::with_depth(self.config.max_depth);
        let focused = foci.is_some_and(|f| !f.is_empty());
        if let Some(f) = foci.filter(|f| !f.is_empty()) {
            cfg = cfg.focused(f.to_vec());
        }
        let set = match how_search(&self.registry, state, sai, &cfg) {
            Ok(set) => set,
            Err(Error::EmptySearch) => return Ok(bottom()),
            Err(e) => return Err(e),
        };
        let terms: BTreeSet<FunctionTerm> = set.terms().into_iter().cloned().collect();
        let support = |t: &FunctionTerm| self.recent_terms.iter().filter(|s| s.contains(t)).count();
        let term = terms
            .iter()
            .max_by(|a, b| {
                support(a)
                    .cmp(&support(b))
                    .then_with(|| term_preference_cmp(a, b).reverse())
            })
            .cloned()
            .expect("non-empty explanation set");
        if !focused {
            self.recent_terms.push_back(terms);
            if self.recent_terms.len() > RECENT_TERM_SETS {
                self.recent_terms.pop_front();
            }
        }
        let binding = preferred_binding(state, set.bindings_for(&term));
        Ok((term, binding))
    }

    fn mint_skill(
        &mut self,
        label: Option<String>,
        how: FunctionTerm,
        action_type: ActionType,
        state: &InterfaceState,
        binding: &Binding,
    ) -> usize {
        self.next_id += 1;
        let where_part = WherePart::init(state, binding, self.config.where_variant).expect("binding valid in state");
        self.skills.push(Skill {
            id: format!("s{:03}", self.next_id),
            label,
            how,
            action_type,
            where_part,
            when_data: Dataset::new(),
            when_kinds: Vec::new(),
            when_tree: None,
            binding_data: Dataset::new(),
            binding_tree: None,
            positives: 0,
            total: 0,
            demos: Vec::new(),
        });
        self.skills.len() - 1
    }

    /// Re-derives a labeled skill's how-part from all of its demonstrations
    /// plus `signal`. On success the where-part and when-data are rebuilt
    /// from the demonstrations under the new bindings.
    fn revise_labeled(&mut self, si: usize, signal: &TrainingSignal, foci: Option<Vec<String>>) -> Option<Binding> {
        let mut demos: Vec<Demo> = self.skills[si]
            .demos
            .iter()
            .map(|d| Demo {
                state: d.state.clone(),
                sai: d.sai.clone(),
                foci: d.foci.clone(),
            })
            .collect();
        demos.push(Demo {
            state: signal.state.clone(),
            sai: signal.sai.clone(),
            foci: foci.clone(),
        });
        if demos.iter().any(|d| d.sai.action_type != ActionType::UpdateTextField) {
            return None;
        }
        let comps = consistent_compositions(&self.registry, &demos, self.config.max_depth).ok()?;
        // Among terms explaining every demonstration, prefer the one whose
        // bindings keep the most structure in common, then the usual order.
        let mut best: Option<(f64, FunctionTerm, Vec<Binding>, WherePart)> = None;
        for comp in comps {
            let bindings: Vec<Binding> = demos
                .iter()
                .zip(&comp.bindings)
                .map(|(d, bs)| preferred_binding(&d.state, bs.iter()))
                .collect();
            let Some(first) = WherePart::init(&demos[0].state, &bindings[0], self.config.where_variant) else {
                continue;
            };
            let mut wp = first.clone();
            for (d, b) in demos.iter().zip(&bindings).skip(1) {
                wp = wp.generalize(&d.state, b);
            }
            // Fraction of the first demonstration's literals that survive,
            // so wider bindings are not favored for having more literals.
            let score = wp.specificity() as f64 / first.specificity().max(1) as f64;
            if best.as_ref().is_none_or(|(s, ..)| score > *s) {
                best = Some((score, comp.term, bindings, wp));
            }
        }
        let (_, term, bindings, wp) = best?;

        let cfg = self.config.clone();
        let skill = &mut self.skills[si];
        skill.how = term;
        skill.where_part = wp;
        skill.when_data = Dataset::new();
        skill.when_kinds.clear();
        skill.binding_data = Dataset::new();
        for (d, b) in demos.iter().zip(&bindings) {
            let aug = augment_state(&d.state, cfg.equals_enabled());
            match cfg.lhs {
                LhsMode::Decomposed => {
                    let f = when_features(&cfg, &self.registry, &aug, skill, b);
                    skill.when_data.push(&f, true);
                    skill.when_kinds.push(ExampleKind::Explicit);
                }
                LhsMode::SingleBindingTree => skill.binding_data.push(&absolute_features(&aug), Some(b.clone())),
            }
        }
        skill.when_tree = DecisionTree::fit(&skill.when_data, &cfg.when_config);
        skill.binding_tree = DecisionTree::fit(&skill.binding_data, &cfg.when_config);
        skill.record(true);
        skill.demos.push(StoredDemo {
            state: signal.state.clone(),
            sai: signal.sai.clone(),
            foci,
        });
        bindings.last().cloned()
    }
}

/// When-part features of a candidate application: the preprocessed state,
/// plus `out.value` when the `Output` feature is enabled.
fn when_features(
    cfg: &AgentConfig,
    registry: &Registry,
    aug: &AugmentedState,
    skill: &Skill,
    binding: &Binding,
) -> FeatureMap {
    let mut f = cfg.when_preprocessor.features(aug, binding);
    if cfg.output_enabled() {
        if let Some(v) = eval_term(registry, &skill.how, skill.action_type, binding, &aug.state)
            .as_ref()
            .and_then(|sai| sai.value())
        {
            f.insert("out.value".to_string(), v.to_string());
        }
    }
    f
}

/// Calls `f` with every injective tuple of `k` indices below `n`.
fn enumerate_args(n: usize, k: usize, buf: &mut Vec<usize>, f: &mut dyn FnMut(&[usize])) {
    if buf.len() == k {
        f(buf);
        return;
    }
    for i in 0..n {
        if buf.contains(&i) {
            continue;
        }
        buf.push(i);
        enumerate_args(n, k, buf, f);
        buf.pop();
    }
}

/// Among candidate bindings, prefers args in layout order, then the
/// smallest binding.
fn preferred_binding<'a>(state: &InterfaceState, bindings: impl Iterator<Item = &'a Binding>) -> Binding {
    let in_order = |b: &Binding| {
        b.args.windows(2).all(|w| match (state.get(&w[0]), state.get(&w[1])) {
            (Some(x), Some(y)) => layout_cmp(x, y).is_lt(),
            _ => false,
        })
    };
    bindings
        .min_by(|a, b| in_order(b).cmp(&in_order(a)).then_with(|| a.cmp(b)))
        .cloned()
        .expect("at least one binding")
}

/// The single binding a single-LHS skill proposes in a state, if any.
fn single_binding(skill: &Skill, features: &FeatureMap, state: &InterfaceState) -> Option<Binding> {
    let b = skill.binding_tree.as_ref()?.predict(features).clone()?;
    let sel = state.get(&b.selection)?;
    if sel.locked || !sel.is_empty() || !b.is_valid_in(state) {
        return None;
    }
    Some(b)
}
