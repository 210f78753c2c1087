use super::{
    extract_code, extract_test_cases, Block, ExtractError, ParsedRollout, TagKind, Turn, TurnKind,
    Violation,
};
use crate::verifier::TestKind;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct ParseOptions {
    /// The response was cut off by a length budget. A trailing unclosed
    /// block is then kept as a partial block instead of a violation.
    pub truncated: bool,
    /// Kind assigned to extracted test cases.
    pub test_kind: TestKind,
}

pub fn parse_rollout(raw_text: &str) -> ParsedRollout {
    parse_rollout_with(raw_text, ParseOptions::default())
}

#[derive(Debug, Clone, Copy)]
struct TagHit {
    at: usize,
    kind: TagKind,
    close: bool,
}

impl TagHit {
    fn len(&self) -> usize {
        if self.close {
            self.kind.close_tag().len()
        } else {
            self.kind.open_tag().len()
        }
    }
}

fn next_tag(text: &str, from: usize) -> Option<TagHit> {
    let bytes = text.as_bytes();
    let mut i = from;
    while let Some(rel) = text[i..].find('<') {
        let at = i + rel;
        let rest = &text[at..];
        let close = bytes.get(at + 1) == Some(&b'/');
        for kind in TagKind::ALL {
            let lit = if close { kind.close_tag() } else { kind.open_tag() };
            if rest.starts_with(lit) {
                return Some(TagHit { at, kind, close });
            }
        }
        i = at + 1;
    }
    None
}

pub fn parse_rollout_with(raw_text: &str, opts: ParseOptions) -> ParsedRollout {
    let mut blocks: Vec<Block> = Vec::new();
    let mut violations = Vec::new();
    let mut partial_block = None;

    let mut pos = 0;
    let mut open: Option<TagHit> = None;
    while let Some(hit) = next_tag(raw_text, pos) {
        // Feedback is written by the environment and may quote tags, so its
        // body is opaque up to the matching close tag.
        if let Some(o) = open {
            if o.kind == TagKind::ToolFeedback && !(hit.close && hit.kind == TagKind::ToolFeedback) {
                pos = hit.at + 1;
                continue;
            }
        }
        match (open, hit.close) {
            (None, false) => open = Some(hit),
            (None, true) => violations.push(Violation::UnexpectedCloseTag {
                tag: hit.kind,
                offset: hit.at,
            }),
            (Some(o), true) if o.kind == hit.kind => {
                blocks.push(Block {
                    kind: o.kind,
                    start: o.at,
                    end: hit.at + hit.len(),
                    body: o.at + o.len()..hit.at,
                    closed: true,
                });
                open = None;
            }
            (Some(_), true) => violations.push(Violation::UnexpectedCloseTag {
                tag: hit.kind,
                offset: hit.at,
            }),
            (Some(o), false) => {
                // A new block starts before the current one was closed.
                violations.push(Violation::UnclosedTag { tag: o.kind, offset: o.at });
                blocks.push(Block {
                    kind: o.kind,
                    start: o.at,
                    end: hit.at,
                    body: o.at + o.len()..hit.at,
                    closed: false,
                });
                open = Some(hit);
            }
        }
        pos = hit.at + hit.len();
    }
    if let Some(o) = open {
        if opts.truncated {
            partial_block = Some(blocks.len());
        } else {
            violations.push(Violation::UnclosedTag { tag: o.kind, offset: o.at });
        }
        blocks.push(Block {
            kind: o.kind,
            start: o.at,
            end: raw_text.len(),
            body: o.at + o.len()..raw_text.len(),
            closed: false,
        });
    }

    let complete = || {
        blocks
            .iter()
            .enumerate()
            .filter(move |(i, _)| Some(*i) != partial_block)
    };

    // Ordering: GT, GA, VT, VA, TF, GT, ...
    if blocks.is_empty() {
        violations.push(Violation::EmptyRollout);
    }
    let mut expected = TagKind::GenerationThink;
    let mut last_kind = None;
    for (_, b) in complete() {
        if b.kind != expected {
            violations.push(Violation::OutOfOrder {
                expected,
                found: b.kind,
                offset: b.start,
            });
        }
        expected = b.kind.successor();
        last_kind = Some((b.kind, b.start));
    }
    if !opts.truncated {
        if let Some((kind, offset)) = last_kind {
            if matches!(kind, TagKind::GenerationThink | TagKind::VerificationThink) {
                violations.push(Violation::IncompleteTurn { tag: kind, offset });
            }
        }
    }

    // Turn indices follow generation/verification cycles: cycle c holds
    // turns 2c+1 and 2c+2, so a malformed phase still consumes its index.
    let mut turns = Vec::new();
    let mut cycle = 0usize;
    let mut seen = [false; 5];
    let slot = |k: TagKind| TagKind::ALL.iter().position(|x| *x == k).unwrap();
    for (idx, b) in complete() {
        let starts_new = seen[slot(TagKind::ToolFeedback)]
            || match b.kind {
                TagKind::GenerationThink => seen.iter().any(|s| *s),
                TagKind::GenerationAnswer => seen[1..].iter().any(|s| *s),
                TagKind::VerificationThink => seen[2..].iter().any(|s| *s),
                TagKind::VerificationAnswer => seen[3],
                TagKind::ToolFeedback => false,
            };
        if starts_new {
            cycle += 1;
            seen = [false; 5];
        }
        seen[slot(b.kind)] = true;
        if !b.closed {
            continue;
        }
        let body = &raw_text[b.body.clone()];
        match b.kind {
            TagKind::GenerationAnswer => {
                let k = 2 * cycle + 1;
                let (code, err) = match extract_code(body) {
                    Ok(code) => (Some(code), None),
                    Err(e) => {
                        violations.push(match e {
                            ExtractError::NoCodeBlock => Violation::NoCodeBlock { k },
                            _ => Violation::MultipleCodeBlocks { k },
                        });
                        (None, Some(e))
                    }
                };
                turns.push(Turn {
                    k,
                    kind: TurnKind::Generation,
                    end_offset: b.end - 1,
                    answer_block: idx,
                    code,
                    test_cases: Vec::new(),
                    extraction_error: err,
                });
            }
            TagKind::VerificationAnswer => {
                let k = 2 * cycle + 2;
                let extraction = extract_test_cases(body, opts.test_kind);
                for rel in &extraction.incomplete {
                    violations.push(Violation::IncompleteTestCase {
                        k,
                        offset: b.body.start + rel,
                    });
                }
                let err = if extraction.cases.is_empty() {
                    violations.push(Violation::NoTestCases { k });
                    Some(ExtractError::NoTestCases)
                } else {
                    None
                };
                turns.push(Turn {
                    k,
                    kind: TurnKind::Verification,
                    end_offset: b.end - 1,
                    answer_block: idx,
                    code: None,
                    test_cases: extraction.cases,
                    extraction_error: err,
                });
            }
            _ => {}
        }
    }

    ParsedRollout {
        raw_text: raw_text.to_string(),
        format_ok: violations.is_empty(),
        blocks,
        turns,
        violations,
        partial_block,
    }
}
