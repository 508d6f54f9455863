use serde::{Deserialize, Serialize};

use super::client::ModelResponse;
use super::EvalError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct MaxProbChoice {
    pub index: usize,
    /// Another option shared the maximum log-probability.
    pub tie: bool,
}

/// Argmax over the option-id log-probabilities; ties go to the lowest index.
pub fn extract_answer_maxprob(resp: &ModelResponse, ids: &[&str; 4]) -> Result<MaxProbChoice, EvalError> {
    let lp = resp
        .target_logprobs
        .as_ref()
        .ok_or_else(|| EvalError::StrategyUnavailable("response carries no target logprobs".into()))?;
    let mut values = [0.0f64; 4];
    for (v, id) in values.iter_mut().zip(ids) {
        *v = *lp
            .get(*id)
            .ok_or_else(|| EvalError::StrategyUnavailable(format!("no logprob for option {id:?}")))?;
        if v.is_nan() {
            return Err(EvalError::StrategyUnavailable(format!("logprob for option {id:?} is NaN")));
        }
    }
    let mut index = 0;
    for i in 1..4 {
        if values[i] > values[index] {
            index = i;
        }
    }
    let tie = (0..4).any(|i| i != index && values[i] == values[index]);
    Ok(MaxProbChoice { index, tie })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum FirstToken {
    Choice(usize),
    Unparseable,
}

/// First non-whitespace character, compared case-sensitively with the ids.
pub fn extract_answer_firsttoken(resp: &ModelResponse, ids: &[&str; 4]) -> FirstToken {
    first_token_of(&resp.text, ids)
}

pub fn first_token_of(text: &str, ids: &[&str; 4]) -> FirstToken {
    let Some(c) = text.trim_start().chars().next() else {
        return FirstToken::Unparseable;
    };
    let mut buf = [0u8; 4];
    let c = c.encode_utf8(&mut buf);
    match ids.iter().position(|id| *id == c) {
        Some(i) => FirstToken::Choice(i),
        None => FirstToken::Unparseable,
    }
}

/// Translate-then-answer replies restate the question before answering, so
/// the first-token rule applies to the text after the last `Answer:`.
pub fn extract_after_last_answer(text: &str, ids: &[&str; 4]) -> FirstToken {
    match text.rfind("Answer:") {
        Some(pos) => first_token_of(&text[pos + "Answer:".len()..], ids),
        None => first_token_of(text, ids),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RougeScore {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

fn lcs_len(a: &[String], b: &[String]) -> usize {
    let mut prev = vec![0usize; b.len() + 1];
    let mut cur = vec![0usize; b.len() + 1];
    for x in a {
        for (j, y) in b.iter().enumerate() {
            cur[j + 1] = if x == y { prev[j] + 1 } else { prev[j + 1].max(cur[j]) };
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    prev[b.len()]
}

/// ROUGE-L over lowercase whitespace-separated tokens.
pub fn rouge_l(candidate: &str, reference: &str) -> RougeScore {
    let tok = |s: &str| -> Vec<String> { s.split_whitespace().map(str::to_lowercase).collect() };
    let (c, r) = (tok(candidate), tok(reference));
    let lcs = lcs_len(&c, &r) as f64;
    let precision = if c.is_empty() { 0.0 } else { lcs / c.len() as f64 };
    let recall = if r.is_empty() { 0.0 } else { lcs / r.len() as f64 };
    // 2PR/(P+R) rewritten as 2L/(|c|+|r|): one rounding instead of several.
    let f1 = if lcs == 0.0 {
        0.0
    } else {
        2.0 * lcs / (c.len() + r.len()) as f64
    };
    RougeScore { precision, recall, f1 }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::collections::BTreeMap;

    const IDS: [&str; 4] = ["A", "B", "C", "D"];

    fn resp(lp: [f64; 4]) -> ModelResponse {
        ModelResponse {
            text: String::new(),
            target_logprobs: Some(IDS.iter().map(|s| s.to_string()).zip(lp).collect()),
        }
    }

    #[test]
    fn maxprob_argmax_and_tie() {
        assert_eq!(extract_answer_maxprob(&resp([-1.0, -2.0, -3.0, -4.0]), &IDS).unwrap(), MaxProbChoice { index: 0, tie: false });
        assert_eq!(extract_answer_maxprob(&resp([-2.0, -2.0, -3.0, -4.0]), &IDS).unwrap(), MaxProbChoice { index: 0, tie: true });
        assert_eq!(extract_answer_maxprob(&resp([-5.0, -2.0, -3.0, -2.0]), &IDS).unwrap(), MaxProbChoice { index: 1, tie: true });
    }

    #[test]
    fn maxprob_needs_every_target() {
        let mut r = resp([-1.0; 4]);
        r.target_logprobs.as_mut().unwrap().remove("C");
        assert!(matches!(extract_answer_maxprob(&r, &IDS), Err(EvalError::StrategyUnavailable(_))));
        let none = ModelResponse { text: "A".into(), target_logprobs: None };
        assert!(matches!(extract_answer_maxprob(&none, &IDS), Err(EvalError::StrategyUnavailable(_))));
    }

    #[test]
    fn first_token_rules() {
        let r = |t: &str| ModelResponse { text: t.into(), target_logprobs: None };
        assert_eq!(extract_answer_firsttoken(&r(" A. Because"), &IDS), FirstToken::Choice(0));
        assert_eq!(extract_answer_firsttoken(&r("B"), &IDS), FirstToken::Choice(1));
        assert_eq!(extract_answer_firsttoken(&r("The answer is A"), &IDS), FirstToken::Unparseable);
        assert_eq!(extract_answer_firsttoken(&r("a"), &IDS), FirstToken::Unparseable);
        assert_eq!(extract_answer_firsttoken(&r("   "), &IDS), FirstToken::Unparseable);
        assert_eq!(extract_answer_firsttoken(&r("3"), &["1", "2", "3", "4"]), FirstToken::Choice(2));
    }

    #[test]
    fn after_last_answer() {
        let text = " Which is it?\nA.x\nB.y\nC.z\nD.w\nAnswer: C";
        assert_eq!(extract_after_last_answer(text, &IDS), FirstToken::Choice(2));
        assert_eq!(extract_after_last_answer("D", &IDS), FirstToken::Choice(3));
    }

    #[test]
    fn rouge_examples() {
        let same = rouge_l("The cat sat", "the cat sat");
        assert_eq!((same.precision, same.recall, same.f1), (1.0, 1.0, 1.0));
        let disjoint = rouge_l("a b", "c d");
        assert_eq!((disjoint.precision, disjoint.recall, disjoint.f1), (0.0, 0.0, 0.0));
        let r = rouge_l("the cat sat", "the dog sat");
        assert_eq!(r.precision, 2.0 / 3.0);
        assert_eq!(r.recall, 2.0 / 3.0);
        assert_eq!(r.f1, 2.0 / 3.0);
        assert_eq!(rouge_l("", "x").f1, 0.0);
    }

    proptest! {
        #[test]
        // Quarter-integer grid keeps the shifted values exact.
        fn maxprob_shift_and_order_invariant(
            lp in prop::array::uniform4(-80i32..0).prop_map(|a| a.map(|v| v as f64 / 4.0)),
            shift in (-50i32..50).prop_map(f64::from),
        ) {
            let base = extract_answer_maxprob(&resp(lp), &IDS).unwrap();
            let shifted = extract_answer_maxprob(&resp(lp.map(|v| v + shift)), &IDS).unwrap();
            prop_assert_eq!(base, shifted);
            let reversed: BTreeMap<String, f64> = IDS.iter().rev().zip(lp.iter().rev()).map(|(k, v)| (k.to_string(), *v)).collect();
            let r2 = ModelResponse { text: String::new(), target_logprobs: Some(reversed) };
            prop_assert_eq!(extract_answer_maxprob(&r2, &IDS).unwrap(), base);
        }

        #[test]
        fn rouge_swap_symmetry(a in "[a-c ]{0,20}", b in "[a-c ]{0,20}") {
            let x = rouge_l(&a, &b);
            let y = rouge_l(&b, &a);
            prop_assert_eq!(x.precision, y.recall);
            prop_assert_eq!(x.recall, y.precision);
            prop_assert!((x.f1 - y.f1).abs() < 1e-12);
        }
    }
}
