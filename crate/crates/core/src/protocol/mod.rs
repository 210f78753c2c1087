//! Tag grammar for generation/verification rollouts.
//!
//! A response is a flat sequence of tagged blocks that repeats
//! `generation-think`, `generation-answer`, `verification-think`,
//! `verification-answer`, `tool-feedback`. Parsing never fails: malformed
//! input is reported through [`Violation`]s on the returned [`ParsedRollout`].
//!
//! All offsets are byte offsets into the UTF-8 text.

mod extract;
mod parse;
mod render;

pub use extract::{extract_code, extract_test_cases, ExtractError, TestCaseExtraction};
pub use parse::{parse_rollout, parse_rollout_with, ParseOptions};
pub use render::{
    render_error_format, render_feedback, render_feedback_with_budget, render_prompt,
    DEFAULT_TOOL_FEEDBACK_BUDGET, ERROR_FORMAT_TEMPLATE, PROMPT_TEMPLATE, SYSTEM_PROMPT,
};

use serde::{Deserialize, Serialize};
use std::fmt;
use std::ops::Range;

use crate::verifier::TestCase;

/// Fence marker that opens a code block in a generation answer.
pub const CODE_FENCE: &str = "```python";
pub const INPUT_LABEL: &str = "- Input:";
pub const EXPECTED_OUTPUT_LABEL: &str = "- Expected Output:";
pub const ACTUAL_OUTPUT_LABEL: &str = "- Actual Output:";
pub const JUDGEMENT_LABEL: &str = "- Judgement";
pub const FAILED_REASON_LABEL: &str = "- Failed Reason";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TagKind {
    GenerationThink,
    GenerationAnswer,
    VerificationThink,
    VerificationAnswer,
    ToolFeedback,
}

impl TagKind {
    pub const ALL: [TagKind; 5] = [
        TagKind::GenerationThink,
        TagKind::GenerationAnswer,
        TagKind::VerificationThink,
        TagKind::VerificationAnswer,
        TagKind::ToolFeedback,
    ];

    pub fn name(self) -> &'static str {
        match self {
            TagKind::GenerationThink => "generation-think",
            TagKind::GenerationAnswer => "generation-answer",
            TagKind::VerificationThink => "verification-think",
            TagKind::VerificationAnswer => "verification-answer",
            TagKind::ToolFeedback => "tool-feedback",
        }
    }

    pub fn open_tag(self) -> &'static str {
        match self {
            TagKind::GenerationThink => "<generation-think>",
            TagKind::GenerationAnswer => "<generation-answer>",
            TagKind::VerificationThink => "<verification-think>",
            TagKind::VerificationAnswer => "<verification-answer>",
            TagKind::ToolFeedback => "<tool-feedback>",
        }
    }

    pub fn close_tag(self) -> &'static str {
        match self {
            TagKind::GenerationThink => "</generation-think>",
            TagKind::GenerationAnswer => "</generation-answer>",
            TagKind::VerificationThink => "</verification-think>",
            TagKind::VerificationAnswer => "</verification-answer>",
            TagKind::ToolFeedback => "</tool-feedback>",
        }
    }

    /// The block kind that must follow this one in a well-formed rollout.
    pub fn successor(self) -> TagKind {
        match self {
            TagKind::GenerationThink => TagKind::GenerationAnswer,
            TagKind::GenerationAnswer => TagKind::VerificationThink,
            TagKind::VerificationThink => TagKind::VerificationAnswer,
            TagKind::VerificationAnswer => TagKind::ToolFeedback,
            TagKind::ToolFeedback => TagKind::GenerationThink,
        }
    }
}

impl fmt::Display for TagKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// One tagged block. `start..end` covers the open tag through the close tag;
/// `body` is the text strictly between them.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Block {
    pub kind: TagKind,
    pub start: usize,
    pub end: usize,
    pub body: Range<usize>,
    /// False when the close tag is missing.
    pub closed: bool,
}

impl Block {
    pub fn span(&self) -> Range<usize> {
        self.start..self.end
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TurnKind {
    Generation,
    Verification,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Turn {
    /// 1-based; odd for generation, even for verification.
    pub k: usize,
    pub kind: TurnKind,
    /// Offset of the last byte of the turn (inclusive).
    pub end_offset: usize,
    /// Index into `ParsedRollout::blocks` of the answer block.
    pub answer_block: usize,
    pub code: Option<String>,
    pub test_cases: Vec<TestCase>,
    pub extraction_error: Option<ExtractError>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "code", rename_all = "snake_case")]
pub enum Violation {
    /// No tagged blocks at all.
    EmptyRollout,
    UnclosedTag { tag: TagKind, offset: usize },
    UnexpectedCloseTag { tag: TagKind, offset: usize },
    OutOfOrder { expected: TagKind, found: TagKind, offset: usize },
    /// The rollout stops after a think block without its answer block.
    IncompleteTurn { tag: TagKind, offset: usize },
    NoCodeBlock { k: usize },
    MultipleCodeBlocks { k: usize },
    NoTestCases { k: usize },
    IncompleteTestCase { k: usize, offset: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParsedRollout {
    pub raw_text: String,
    pub blocks: Vec<Block>,
    pub turns: Vec<Turn>,
    pub format_ok: bool,
    pub violations: Vec<Violation>,
    /// Index of a trailing block cut off by the response budget, if any.
    pub partial_block: Option<usize>,
}

impl ParsedRollout {
    pub fn generation_turns(&self) -> impl Iterator<Item = &Turn> {
        self.turns.iter().filter(|t| t.kind == TurnKind::Generation)
    }

    pub fn verification_turns(&self) -> impl Iterator<Item = &Turn> {
        self.turns.iter().filter(|t| t.kind == TurnKind::Verification)
    }

    pub fn turn(&self, k: usize) -> Option<&Turn> {
        self.turns.iter().find(|t| t.k == k)
    }

    /// Code of the last generation turn that has extractable code.
    pub fn final_code(&self) -> Option<&str> {
        self.generation_turns()
            .filter_map(|t| t.code.as_deref())
            .last()
    }

    pub fn body(&self, block: &Block) -> &str {
        &self.raw_text[block.body.clone()]
    }

    /// Text pieces (inter-block gaps and blocks) in order; they concatenate
    /// back to `raw_text`.
    pub fn segments(&self) -> Vec<&str> {
        let mut out = Vec::with_capacity(self.blocks.len() * 2 + 1);
        let mut cursor = 0;
        for b in &self.blocks {
            if b.start > cursor {
                out.push(&self.raw_text[cursor..b.start]);
            }
            out.push(&self.raw_text[b.start..b.end]);
            cursor = b.end;
        }
        if cursor < self.raw_text.len() {
            out.push(&self.raw_text[cursor..]);
        }
        out
    }
}

/// True iff the rollout satisfies the tag order, single-code-block and
/// at-least-one-test-case rules. This is the only input to the format reward.
pub fn validate_format(parsed: &ParsedRollout) -> bool {
    parsed.violations.is_empty()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct MaskSpan {
    pub start: usize,
    pub end: usize,
    pub masked: bool,
}

/// Tiles the text with spans; exactly the tool-feedback blocks (tags
/// included) are masked.
pub fn loss_mask_spans(parsed: &ParsedRollout) -> Vec<MaskSpan> {
    let mut spans = Vec::new();
    let mut cursor = 0;
    for b in parsed.blocks.iter().filter(|b| b.kind == TagKind::ToolFeedback) {
        if b.start > cursor {
            spans.push(MaskSpan { start: cursor, end: b.start, masked: false });
        }
        spans.push(MaskSpan { start: b.start, end: b.end, masked: true });
        cursor = b.end;
    }
    if cursor < parsed.raw_text.len() {
        spans.push(MaskSpan { start: cursor, end: parsed.raw_text.len(), masked: false });
    }
    spans
}

/// Per-byte loss mask: `true` where the position contributes to the loss.
pub fn loss_mask(parsed: &ParsedRollout) -> Vec<bool> {
    let mut mask = vec![true; parsed.raw_text.len()];
    for s in loss_mask_spans(parsed).iter().filter(|s| s.masked) {
        mask[s.start..s.end].iter_mut().for_each(|m| *m = false);
    }
    mask
}
