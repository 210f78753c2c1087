//! Fixtures shared by the integration tests.
#![allow(dead_code)]

use std::collections::BTreeMap;

use genver_core::orchestrator::ScriptedPolicy;
use genver_core::verifier::{TestOrigin, TestKind};
use genver_core::{Problem, Sandbox, SandboxConfig, TestCase};
use rand::Rng;
use serde_json::{json, Value};

pub fn sandbox(workers: usize) -> Sandbox {
    let mut cfg = SandboxConfig { workers, ..SandboxConfig::default() };
    cfg.limits.wall_time = 5.0;
    Sandbox::new(cfg).expect("python3 sandbox")
}

// Soldiers with sizes `a` (sorted), vests with sizes `b` (sorted); soldier i
// fits vest j when a_i - x <= b_j <= a_i + y. Print the matching size and
// the pairs.
pub const VESTS_STATEMENT: &str = "The Two-dimensional kingdom has a regular army of n people. Soldier i wants a vest of size a_i but agrees to any size from a_i - x to a_i + y. There are m vests, the j-th of size b_j. Equip as many soldiers as possible and print the number of pairs followed by the pairs.";

pub const VESTS_GOLDEN: &str = "import sys\n\ndef main():\n    d = sys.stdin.read().split()\n    n, m, x, y = map(int, d[:4])\n    a = list(map(int, d[4:4 + n]))\n    b = list(map(int, d[4 + n:4 + n + m]))\n    i = j = 0\n    res = []\n    while i < n and j < m:\n        if b[j] < a[i] - x:\n            j += 1\n        elif b[j] > a[i] + y:\n            i += 1\n        else:\n            res.append((i + 1, j + 1))\n            i += 1\n            j += 1\n    print(len(res))\n    for p in res:\n        print(*p)\n\nmain()";

/// Reuses a vest after a match.
pub const VESTS_BUGGY: &str = "import sys\n\ndef main():\n    d = sys.stdin.read().split()\n    n, m, x, y = map(int, d[:4])\n    a = list(map(int, d[4:4 + n]))\n    b = list(map(int, d[4 + n:4 + n + m]))\n    i = j = 0\n    res = []\n    while i < n and j < m:\n        if b[j] < a[i] - x:\n            j += 1\n        elif b[j] > a[i] + y:\n            i += 1\n        else:\n            res.append((i + 1, j + 1))\n            i += 1\n    print(len(res))\n    for p in res:\n        print(*p)\n\nmain()";

pub const VESTS_SAMPLE_IN: &str = "5 3 0 0\n1 2 3 3 4\n1 3 5";
pub const VESTS_SAMPLE_OUT: &str = "2\n1 1\n3 2";
/// Output of the buggy program on the sample.
pub const VESTS_SAMPLE_BUGGY_OUT: &str = "3\n1 1\n3 2\n4 2";
/// A test whose stated expectation is wrong (the true answer matches all 3).
pub const VESTS_WRONG_IN: &str = "3 3 2 2\n1 5 9\n3 7 11";
pub const VESTS_WRONG_CLAIM: &str = "2\n1 1\n2 2";
pub const VESTS_WRONG_TRUE: &str = "3\n1 1\n2 2\n3 3";
pub const VESTS_EXTRA_IN: &str = "2 4 0 1\n2 5\n1 2 3 6";
pub const VESTS_EXTRA_OUT: &str = "2\n1 2\n2 4";

pub fn stdio_test(input: &str, output: &str) -> TestCase {
    TestCase {
        input: input.into(),
        expected_output: output.into(),
        kind: TestKind::Stdio,
        origin: TestOrigin::GroundTruth,
    }
}

pub fn vests_problem() -> Problem {
    Problem {
        tests: vec![
            stdio_test(VESTS_SAMPLE_IN, VESTS_SAMPLE_OUT),
            stdio_test(VESTS_WRONG_IN, VESTS_WRONG_TRUE),
            stdio_test(VESTS_EXTRA_IN, VESTS_EXTRA_OUT),
            stdio_test("1 1 0 0\n4\n5", "0"),
        ],
        golden_solutions: vec![VESTS_GOLDEN.into()],
        ..Problem::stub("vests", VESTS_STATEMENT)
    }
}

pub fn gen_block(think: &str, code: &str) -> String {
    format!(
        "<generation-think>\n{think}\n</generation-think>\n<generation-answer>\n```python\n{code}\n```\n</generation-answer>\n"
    )
}

pub fn ver_block(think: &str, cases: &[(&str, &str)]) -> String {
    let mut body = String::new();
    for (i, o) in cases {
        body.push_str(&format!("- Input:\n```\n{i}\n```\n- Expected Output:\n```\n{o}\n```\n"));
    }
    format!(
        "<verification-think>\n{think}\n</verification-think>\n<verification-answer>\n{body}</verification-answer>"
    )
}

/// The two policy calls of the vest case study: a buggy first attempt
/// checked with the sample and a wrong extra test, then a fix checked with
/// the sample and a correct extra test.
pub fn vests_script() -> Vec<String> {
    vec![
        gen_block("A greedy two-pointer sweep over sorted sizes.", VESTS_BUGGY)
            + &ver_block(
                "Check the sample, then a case with wide tolerance.",
                &[(VESTS_SAMPLE_IN, VESTS_SAMPLE_OUT), (VESTS_WRONG_IN, VESTS_WRONG_CLAIM)],
            ),
        gen_block(
            "The vest index is not advanced after a match, so one vest is used twice. Advance both pointers.",
            VESTS_GOLDEN,
        ) + &ver_block(
            "Re-check the sample and add more vests than soldiers.",
            &[(VESTS_SAMPLE_IN, VESTS_SAMPLE_OUT), (VESTS_EXTRA_IN, VESTS_EXTRA_OUT)],
        ),
    ]
}

/// A full rollout in the case-study shape: two cycles, each followed by a
/// feedback block.
pub fn vests_transcript() -> String {
    let feedback = "\n<tool-feedback>\n- Judgement\nPassed\n\n</tool-feedback>\n";
    vests_script().iter().map(|c| format!("{c}{feedback}")).collect()
}

/// Dyadic value `m / 2^bits` in `[0, 1]`; sums and differences of such
/// values are exact in f64.
pub fn dyadic_unit<R: Rng>(rng: &mut R, bits: u32) -> f64 {
    let den = 1u64 << bits;
    rng.random_range(0..=den) as f64 / den as f64
}

pub fn dyadic<R: Rng>(rng: &mut R, lo: i64, hi: i64) -> f64 {
    rng.random_range(lo * 16..=hi * 16) as f64 / 16.0
}

/// What a random trajectory is expected to contain.
#[derive(Debug, Clone)]
pub struct TrajectoryPlan {
    pub text: String,
    /// Generation turn index to whether it has code.
    pub gen_has_code: BTreeMap<usize, bool>,
    /// Verification turn index to number of test cases.
    pub ver_tests: BTreeMap<usize, usize>,
    /// Byte ranges of feedback blocks, tags included.
    pub feedback_spans: Vec<(usize, usize)>,
    pub well_formed: bool,
}

/// Random rollout with `turns` phases (1..=9). With `allow_malformed`,
/// answers sometimes lack their code block or test cases.
pub fn random_trajectory<R: Rng>(rng: &mut R, turns: usize, allow_malformed: bool) -> TrajectoryPlan {
    let mut plan = TrajectoryPlan {
        text: String::new(),
        gen_has_code: BTreeMap::new(),
        ver_tests: BTreeMap::new(),
        feedback_spans: Vec::new(),
        well_formed: true,
    };
    let filler = ["", "plan", "x < y and a > b", "ünïcode ✓", "tags like <b> are fine"];
    for k in 1..=turns {
        let think = filler[rng.random_range(0..filler.len())];
        if k % 2 == 1 {
            let has_code = !allow_malformed || rng.random_bool(0.8);
            if has_code {
                plan.text.push_str(&gen_block(think, &format!("print({})", rng.random_range(0..100))));
            } else {
                plan.text.push_str(&format!(
                    "<generation-think>\n{think}\n</generation-think>\n<generation-answer>\nno code here\n</generation-answer>\n"
                ));
                plan.well_formed = false;
            }
            plan.gen_has_code.insert(k, has_code);
        } else {
            let n = if allow_malformed { rng.random_range(0..4) } else { rng.random_range(1..4) };
            let cases: Vec<(String, String)> = (0..n)
                .map(|i| (format!("{i} {}", rng.random_range(0..9)), format!("{}", rng.random_range(0..9))))
                .collect();
            let refs: Vec<(&str, &str)> = cases.iter().map(|(a, b)| (a.as_str(), b.as_str())).collect();
            plan.text.push_str(&ver_block(think, &refs));
            if n == 0 {
                plan.well_formed = false;
            }
            plan.ver_tests.insert(k, n);
            if k < turns || rng.random_bool(0.5) {
                plan.text.push('\n');
                let start = plan.text.len();
                plan.text.push_str("<tool-feedback>\n- Judgement\nPassed\n\n</tool-feedback>");
                plan.feedback_spans.push((start, plan.text.len()));
                plan.text.push('\n');
            }
        }
    }
    plan
}

/// Stdio problem `toy-i`: read two integers, print `a * (i + 2) + b`.
pub fn toy_problem(i: usize) -> Problem {
    let mul = i + 2;
    let golden = format!("a, b = map(int, input().split())\nprint(a * {mul} + b)");
    let tests = (0..3)
        .map(|t| {
            let (a, b) = (t * 3 + 1, t + 7);
            stdio_test(&format!("{a} {b}"), &format!("{}", a * mul + b))
        })
        .collect();
    Problem {
        tests,
        golden_solutions: vec![golden],
        ..Problem::stub(&format!("toy-{i}"), &format!("Read a and b; print a * {mul} + b."))
    }
}

fn toy_code(mul: usize) -> String {
    format!("a, b = map(int, input().split())\nprint(a * {mul} + b)")
}

/// Scripted policy over `toy_problem(0..n)`: problem `i` gets its answer
/// right at the first generation turn when `i % 4 == 0`, at the second
/// when `i % 4 == 1`, at the third when `i % 4 == 2`, and never otherwise.
/// Its own tests are always correct, so a fix ends the episode.
pub fn improving_policy(n: usize) -> ScriptedPolicy {
    let mut policy = ScriptedPolicy::new(0);
    for i in 0..n {
        let mul = i + 2;
        let fixed_at = match i % 4 {
            3 => usize::MAX,
            r => r,
        };
        let check = ver_block("check", &[("1 7", &format!("{}", mul + 7)), ("4 8", &format!("{}", 4 * mul + 8))]);
        let calls = (0..3)
            .map(|c| {
                let code = if c >= fixed_at { toy_code(mul) } else { toy_code(mul + 1) };
                gen_block("compute", &code) + &check
            })
            .collect();
        policy = policy.with_script(&format!("toy-{i}"), calls);
    }
    policy
}

/// Ten raw records: seven good ones (stdio and call-based, including one
/// whose first golden solution does not compile), two interactive problems
/// and one whose only golden solution is wrong.
pub fn datapipe_corpus() -> Vec<Value> {
    let mut out = Vec::new();
    for i in 0..4 {
        out.push(json!({
            "id": format!("sum-{i}"),
            "question": format!("Print the sum of {} integers given on one line.", i + 2),
            "solutions": json!(["print(sum(map(int, input().split())))"]).to_string(),
            "input_output": json!({
                "inputs": [format!("{}\n", (1..=i + 2).map(|x| x.to_string()).collect::<Vec<_>>().join(" "))],
                "outputs": [format!("{}\n", (1..=i + 2).sum::<usize>())],
            }).to_string(),
            "tags": ["Math"],
            "picture_num": 0,
        }));
    }
    out.push(json!({
        "id": "first-golden-broken",
        "question": "Echo the input line reversed.",
        "solutions": ["print(input()[::-1]", "print(input()[::-1])"],
        "input_output": {"inputs": ["abc\n"], "outputs": ["cba\n"]},
    }));
    out.push(json!({
        "id": "call-add",
        "question": "Implement add(a, b).",
        "solutions": ["def add(a, b):\n    return a + b"],
        "input_output": {"fn_name": "add", "inputs": [[1, 2], [-5, 5]], "outputs": [3, 0]},
    }));
    out.push(json!({
        "id": "call-pairs",
        "question": "Implement pairs(xs) returning adjacent pairs as lists.",
        "solutions": ["class Solution:\n    def pairs(self, xs):\n        return [[a, b] for a, b in zip(xs, xs[1:])]"],
        "input_output": {"fn_name": "pairs", "inputs": [[[1, 2, 3]]], "outputs": [[[1, 2], [2, 3]]]},
    }));
    out.push(json!({
        "id": "interactive-guess",
        "question": "Guess the hidden number; the judge answers < or >.",
        "solutions": ["print(1)"],
        "input_output": {"inputs": ["\n"], "outputs": ["1\n"]},
        "tags": ["Interactive", "Binary Search"],
    }));
    out.push(json!({
        "id": "interactive-query",
        "question": "Ask at most 20 queries.",
        "solutions": ["print(1)"],
        "input_output": {"inputs": ["\n"], "outputs": ["1\n"]},
        "raw_tags": json!(["interactive"]).to_string(),
    }));
    out.push(json!({
        "id": "bad-golden",
        "question": "Print the product of two integers.",
        "solutions": ["a, b = map(int, input().split())\nprint(a + b)"],
        "input_output": {"inputs": ["2 3\n"], "outputs": ["6\n"]},
    }));
    out
}
