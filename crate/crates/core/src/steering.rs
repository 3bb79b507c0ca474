//! Intent-dependent steering: the tutor's system prompt is the base
//! template instantiated with the grounding, followed by one prompt
//! addition per selected intent.

use std::collections::HashMap;
use std::sync::OnceLock;

use crate::domain::{Grounding, Intent, IntentSet};
use crate::template;

pub const TUTOR_PROMPT_TEMPLATE: &str = include_str!("../resources/prompts/tutor_prompt.txt");
const ADDITIONS_TABLE: &str = include_str!("../resources/prompts/prompt_additions.tsv");

fn additions() -> &'static HashMap<Intent, String> {
    static TABLE: OnceLock<HashMap<Intent, String>> = OnceLock::new();
    TABLE.get_or_init(|| {
        let mut map = HashMap::new();
        for line in ADDITIONS_TABLE.lines().filter(|l| !l.is_empty()) {
            let (id, text) = line.split_once('\t').unwrap_or((line, ""));
            let intent: Intent = id.parse().expect("additions table uses taxonomy ids");
            if !text.is_empty() {
                map.insert(intent, text.to_string());
            }
        }
        map
    })
}

/// The prompt addition that steers the tutor towards `intent`; `None` for
/// [`Intent::Other`].
pub fn addition_for(intent: Intent) -> Option<&'static str> {
    additions().get(&intent).map(String::as_str)
}

/// The base prompt with `{pb}` and `{sol}` filled in.
pub fn base_prompt(grounding: &Grounding) -> String {
    template::fill(
        TUTOR_PROMPT_TEMPLATE,
        &[
            ("pb", &grounding.problem_statement),
            ("sol", &grounding.solution),
        ],
    )
}

/// Assembles the tutor system prompt. Additions follow the taxonomy order,
/// one per line.
pub fn build_system_prompt(grounding: &Grounding, intents: &IntentSet) -> String {
    let mut prompt = base_prompt(grounding);
    for intent in intents {
        if let Some(text) = addition_for(*intent) {
            prompt.push('\n');
            prompt.push_str(text);
        }
    }
    prompt
}
