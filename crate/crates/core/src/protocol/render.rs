use std::fmt::Write as _;

use super::{
    TagKind, ACTUAL_OUTPUT_LABEL, EXPECTED_OUTPUT_LABEL, FAILED_REASON_LABEL, INPUT_LABEL,
    JUDGEMENT_LABEL,
};
use crate::datapipe::Problem;
use crate::verifier::{JudgedCase, TestKind, Verdict};

pub const PROMPT_TEMPLATE: &str = include_str!("../../assets/prompt_v1.txt");
pub const ERROR_FORMAT_TEMPLATE: &str = include_str!("../../assets/error_format_v1.txt");
/// System message the prompt was written against. Chat formatting is the
/// host's job, so it is not part of [`render_prompt`]'s output.
pub const SYSTEM_PROMPT: &str = include_str!("../../assets/system_v1.txt");

/// Maximum tool-feedback length in bytes.
pub const DEFAULT_TOOL_FEEDBACK_BUDGET: usize = 4096;

const NO_CORRECT_TESTS: &str = "No correct test cases are generated.";

/// Instantiates the user prompt for a problem.
pub fn render_prompt(problem: &Problem) -> String {
    let mut question = problem.statement.clone();
    if problem.kind == TestKind::CallBased {
        question.push_str("\n\nUse Call-Based format");
        if let Some(name) = &problem.fn_name {
            let _ = write!(question, "\nFunction name: {name}");
        }
    }
    PROMPT_TEMPLATE.replacen("{question}", &question, 1)
}

fn fenced(value: &str) -> String {
    format!("```\n{value}\n```")
}

fn case_block(case: &JudgedCase) -> String {
    let actual = case.actual_output();
    let mut s = format!(
        "{INPUT_LABEL}\n{}\n\n{EXPECTED_OUTPUT_LABEL}\n{}\n\n{ACTUAL_OUTPUT_LABEL}\n{}\n\n{JUDGEMENT_LABEL}\n",
        fenced(&case.test.input),
        fenced(&case.test.expected_output),
        fenced(&actual),
    );
    match &case.verdict {
        Verdict::Passed => s.push_str("Passed\n\n"),
        Verdict::Failed(_) => {
            let _ = write!(s, "Failed\n\n{FAILED_REASON_LABEL}\n{}\n\n", case.failed_reason_text());
        }
        Verdict::WrongTestCase => s.push_str("Wrong test case.\n\n"),
    }
    s
}

fn wrap(body: &str) -> String {
    let kind = TagKind::ToolFeedback;
    format!("{}\n{body}{}", kind.open_tag(), kind.close_tag())
}

pub fn render_error_format() -> String {
    wrap(&format!("{ERROR_FORMAT_TEMPLATE}\n"))
}

pub fn render_feedback(judged: &[JudgedCase], format_error: bool) -> String {
    render_feedback_with_budget(judged, format_error, DEFAULT_TOOL_FEEDBACK_BUDGET)
}

/// Renders per-case feedback blocks inside `<tool-feedback>` tags. When the
/// result would exceed `budget` bytes, whole trailing case blocks are dropped
/// and a notice stating how many were omitted is appended.
pub fn render_feedback_with_budget(
    judged: &[JudgedCase],
    format_error: bool,
    budget: usize,
) -> String {
    if format_error {
        return render_error_format();
    }
    let blocks: Vec<String> = judged.iter().map(case_block).collect();
    let all_invalid =
        !judged.is_empty() && judged.iter().all(|c| c.verdict == Verdict::WrongTestCase);
    let trailer = if all_invalid { format!("{NO_CORRECT_TESTS}\n\n") } else { String::new() };

    let full: String = blocks.concat() + &trailer;
    let overhead = wrap("").len();
    if overhead + full.len() <= budget {
        return wrap(&full);
    }

    let notice = |omitted: usize| format!("[{omitted} more test case result(s) omitted]\n");
    let mut body = String::new();
    let mut kept = 0;
    for block in &blocks {
        let omitted_after = blocks.len() - kept - 1;
        let tail = if omitted_after > 0 { notice(omitted_after).len() } else { 0 };
        if overhead + body.len() + block.len() + trailer.len() + tail > budget {
            break;
        }
        body.push_str(block);
        kept += 1;
    }
    body.push_str(&trailer);
    if kept < blocks.len() {
        body.push_str(&notice(blocks.len() - kept));
    }
    wrap(&body)
}
