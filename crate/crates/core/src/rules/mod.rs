//! Rules over sensitive features, rule sets, support, and frequent-set mining.

mod mining;
mod rule;
mod space;

pub use mining::{
    frequent_rule_sets, is_frequent, support, MiningOutcome, Population, RowMask, SupportResult,
};
pub use rule::{
    contains_term, satisfies, satisfies_category, CompiledRule, CompiledRuleSet, CompiledTermSet, Rule,
    RuleSet,
};
pub use space::{
    single_feature_rules, term_rules, IntervalMode, RuleGroup, RuleSpace, DEFAULT_MAX_RULES_PER_FEATURE,
};
