//! Label-free parsing prompt.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::ingest::LogSet;
use crate::selector::CandidateLcu;

const DEFAULT_EXAMPLES: &str = include_str!("../../resources/parameter_examples.json");

const INSTRUCTION: &str = "\
You will be given a group of log messages that were probably printed by the \
same logging statement. Turn every log message into its log template: keep \
the static text exactly as it appears and replace each dynamic parameter with \
a placeholder.

Compare the logs with each other before answering. Tokens that stay the same \
across the group are usually static text; tokens that change from one log to \
another are usually parameters. Parameters are values decided at runtime, for \
example identifiers, numbers, sizes, durations, file paths, addresses, URLs, \
and user, host or process names. Error messages and exception descriptions \
explain what happened and are not parameters, so keep them as static text.";

const OUTPUT_CONSTRAINTS: &str = "\
Write exactly one template per log, in the same order as the logs. Replace \
each parameter with a short descriptive name in curly braces, for example \
{directory}. Start every template with the prefix LogTemplate[idx]: where idx \
is the index of the log, and wrap the template itself in backticks. Do not \
add any other text.";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParameterExample {
    pub value: String,
    #[serde(rename = "type")]
    pub type_name: String,
}

impl ParameterExample {
    pub fn new(value: impl Into<String>, type_name: impl Into<String>) -> Self {
        ParameterExample {
            value: value.into(),
            type_name: type_name.into(),
        }
    }

    pub fn render(&self) -> String {
        format!("`{}` -> {{{}}}", self.value, self.type_name)
    }
}

/// The built-in example list.
pub fn default_parameter_examples() -> Vec<ParameterExample> {
    serde_json::from_str(DEFAULT_EXAMPLES).expect("bundled parameter examples are valid JSON")
}

/// Reads a JSON array of `{"value": ..., "type": ...}` objects.
pub fn load_parameter_examples(path: &Path) -> Result<Vec<ParameterExample>, std::io::Error> {
    let text = std::fs::read_to_string(path)?;
    serde_json::from_str(&text).map_err(|e| std::io::Error::new(std::io::ErrorKind::InvalidData, e))
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PromptSpec {
    pub instruction_text: String,
    pub parameter_examples: Vec<ParameterExample>,
    pub output_constraint_text: String,
    pub lcu_logs: Vec<String>,
}

impl PromptSpec {
    pub fn new(lcu_logs: Vec<String>, examples: &[ParameterExample]) -> Self {
        PromptSpec {
            instruction_text: INSTRUCTION.to_owned(),
            parameter_examples: examples.to_vec(),
            output_constraint_text: OUTPUT_CONSTRAINTS.to_owned(),
            lcu_logs,
        }
    }

    /// Instruction, parameter examples, output constraints, queried logs.
    pub fn render(&self) -> String {
        let mut out = String::new();
        out.push_str("## Task\n");
        out.push_str(&self.instruction_text);
        out.push_str("\n\n");
        if !self.parameter_examples.is_empty() {
            out.push_str("## Parameter examples\n");
            out.push_str("Each line shows a parameter value and the placeholder it becomes.\n");
            for ex in &self.parameter_examples {
                out.push_str(&ex.render());
                out.push('\n');
            }
            out.push('\n');
        }
        out.push_str("## Output format\n");
        out.push_str(&self.output_constraint_text);
        out.push_str("\n\n## Logs\n");
        for (i, log) in self.lcu_logs.iter().enumerate() {
            out.push_str(&format!("Log[{}]: {}\n", i + 1, log));
        }
        out
    }
}

/// Prompt for one LCU, logs in member order.
pub fn build_prompt<S>(
    lcu: &CandidateLcu<S>,
    logs: &LogSet,
    examples: &[ParameterExample],
) -> PromptSpec {
    let lines = lcu.members.iter().map(|&id| logs[id].content.clone()).collect();
    PromptSpec::new(lines, examples)
}
