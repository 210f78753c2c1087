use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{EXPECTED_OUTPUT_LABEL, INPUT_LABEL};
use crate::verifier::{TestCase, TestKind, TestOrigin};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExtractError {
    #[error("no ```python code block")]
    NoCodeBlock,
    #[error("more than one ```python code block")]
    MultipleCodeBlocks,
    #[error("no test cases")]
    NoTestCases,
}

#[derive(Debug, Clone, PartialEq, Eq)]
struct Fence<'a> {
    start: usize,
    end: usize,
    info: &'a str,
    content: &'a str,
}

/// Finds ``` fenced blocks. A fence whose closing marker sits on the same
/// line as the opening one (```1 3 5```) is inline and has no info string.
/// Unterminated fences are dropped.
fn fences(body: &str) -> Vec<Fence<'_>> {
    let mut out = Vec::new();
    let mut pos = 0;
    while let Some(rel) = body[pos..].find("```") {
        let start = pos + rel;
        let after = start + 3;
        let eol = body[after..].find('\n').map_or(body.len(), |i| after + i);
        let line_rest = &body[after..eol];
        if let Some(close) = line_rest.find("```") {
            out.push(Fence {
                start,
                end: after + close + 3,
                info: "",
                content: line_rest[..close].trim(),
            });
            pos = after + close + 3;
            continue;
        }
        let info = line_rest.trim();
        let content_start = (eol + 1).min(body.len());
        let Some(close_rel) = body[content_start..].find("```") else {
            break;
        };
        let close = content_start + close_rel;
        let content = body[content_start..close]
            .strip_suffix('\n')
            .map(|c| c.strip_suffix('\r').unwrap_or(c))
            .unwrap_or(&body[content_start..close]);
        out.push(Fence { start, end: close + 3, info, content });
        pos = close + 3;
    }
    out
}

/// Returns the content of the single ```python block of a generation answer.
pub fn extract_code(generation_answer_body: &str) -> Result<String, ExtractError> {
    let mut code = fences(generation_answer_body)
        .into_iter()
        .filter(|f| f.info == "python");
    match (code.next(), code.next()) {
        (None, _) => Err(ExtractError::NoCodeBlock),
        (Some(f), None) => Ok(f.content.to_string()),
        (Some(_), Some(_)) => Err(ExtractError::MultipleCodeBlocks),
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct TestCaseExtraction {
    pub cases: Vec<TestCase>,
    /// Offsets (relative to the body) of `- Input:` labels whose pair could
    /// not be completed.
    pub incomplete: Vec<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Item<'a> {
    Input(usize),
    Expected(usize),
    Fence(&'a str),
}

/// Parses `- Input:` / `- Expected Output:` fenced pairs in document order.
pub fn extract_test_cases(verification_answer_body: &str, kind: TestKind) -> TestCaseExtraction {
    let body = verification_answer_body;
    let mut items: Vec<(usize, Item<'_>)> = Vec::new();
    let fs = fences(body);
    let inside_fence = |at: usize| fs.iter().any(|f| at > f.start && at < f.end);
    for (label, make) in [
        (INPUT_LABEL, Item::Input as fn(usize) -> Item<'static>),
        (EXPECTED_OUTPUT_LABEL, Item::Expected as fn(usize) -> Item<'static>),
    ] {
        for (at, _) in body.match_indices(label) {
            if !inside_fence(at) {
                items.push((at, make(at)));
            }
        }
    }
    items.extend(fs.iter().map(|f| (f.start, Item::Fence(f.content))));
    items.sort_by_key(|(at, _)| *at);

    let mut out = TestCaseExtraction::default();
    let mut i = 0;
    while i < items.len() {
        let Item::Input(at) = items[i].1 else {
            i += 1;
            continue;
        };
        let pair = match items.get(i + 1..i + 4) {
            Some([(_, Item::Fence(input)), (_, Item::Expected(_)), (_, Item::Fence(expected))]) => {
                Some((*input, *expected))
            }
            _ => None,
        };
        match pair {
            Some((input, expected)) => {
                out.cases.push(TestCase {
                    input: input.to_string(),
                    expected_output: expected.to_string(),
                    kind,
                    origin: TestOrigin::ModelGenerated,
                });
                i += 4;
            }
            None => {
                out.incomplete.push(at);
                i += 1;
            }
        }
    }
    out
}
