use super::{Choice, OracleError};
use regex::Regex;
use std::sync::OnceLock;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AnswerMode {
    Pairwise,
    Numeric,
}

/// Extracted answer.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Answer {
    Choice(Choice),
    Score(u8),
}

/// Extracts the declared answer from a completion, scanning from the end.
///
/// Pairwise answers follow an "answer" marker (`[Final Answer] A`,
/// `Final Answer: A`, `[Answer] 2`); A/1 name the first presented content
/// and B/2 the second. When several markers are present the last one that
/// carries a token wins. Numeric answers are the last integer in the text
/// and must lie in `[0, 100]`.
pub fn parse_llm_answer(raw: &str, mode: AnswerMode) -> Result<Answer, OracleError> {
    match mode {
        AnswerMode::Pairwise => parse_pairwise(raw).map(Answer::Choice),
        AnswerMode::Numeric => parse_numeric(raw).map(Answer::Score),
    }
}

fn pairwise_re() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| {
        Regex::new(
            r"(?i)answer\s*\]?\s*(?:is|:|=|-|\*)*\s*\**\s*\[?\s*(?:(?:message|option|vaccine|choice)\s*)?\(?([ab12])\b",
        )
        .expect("valid regex")
    })
}

fn parse_pairwise(raw: &str) -> Result<Choice, OracleError> {
    let token = pairwise_re()
        .captures_iter(raw)
        .last()
        .and_then(|c| c.get(1))
        .ok_or_else(|| OracleError::Parse("no declared answer found".into()))?;
    match token.as_str() {
        "A" | "a" | "1" => Ok(Choice::A),
        _ => Ok(Choice::B),
    }
}

fn parse_numeric(raw: &str) -> Result<u8, OracleError> {
    static RE: OnceLock<Regex> = OnceLock::new();
    let re = RE.get_or_init(|| Regex::new(r"-?\d+(\.\d+)?").expect("valid regex"));
    let m = re
        .find_iter(raw)
        .last()
        .ok_or_else(|| OracleError::Parse("no number found".into()))?;
    let text = m.as_str();
    if text.contains('.') {
        return Err(OracleError::Parse(format!("`{text}` is not an integer")));
    }
    let value: i64 = text
        .parse()
        .map_err(|_| OracleError::Parse(format!("`{text}` is not an integer")))?;
    if !(0..=100).contains(&value) {
        return Err(OracleError::Range(value));
    }
    Ok(value as u8)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pick(s: &str) -> Result<Choice, OracleError> {
        parse_pairwise(s)
    }

    #[test]
    fn pairwise_markers() {
        assert_eq!(
            pick("Let me think... Print the final answer... [Final Answer] A").unwrap(),
            Choice::A
        );
        assert_eq!(pick("...the end: [Answer] 2").unwrap(), Choice::B);
        assert_eq!(pick("Final Answer: A").unwrap(), Choice::A);
        assert_eq!(pick("**Final answer:** Message 1").unwrap(), Choice::A);
        assert_eq!(pick("[Final Answer]: B.").unwrap(), Choice::B);
        assert_eq!(pick("answer is (b)").unwrap(), Choice::B);
    }

    #[test]
    fn last_marker_wins() {
        assert_eq!(
            pick("Draft answer: A. On reflection... [Final Answer] B").unwrap(),
            Choice::B
        );
        // A trailing marker without a token does not hide an earlier answer.
        assert_eq!(pick("[Answer] 2. That is my answer.").unwrap(), Choice::B);
    }

    #[test]
    fn pairwise_failures() {
        assert!(matches!(pick("I like both of them."), Err(OracleError::Parse(_))));
        assert!(matches!(pick("Final Answer: both are fine"), Err(OracleError::Parse(_))));
        // "Answer: Absolutely" is not a token A.
        assert!(matches!(pick("Answer: Absolutely"), Err(OracleError::Parse(_))));
    }

    #[test]
    fn numeric() {
        assert_eq!(parse_numeric("85").unwrap(), 85);
        assert_eq!(parse_numeric("0").unwrap(), 0);
        assert_eq!(parse_numeric("I'd say 40, no... [Score] 100").unwrap(), 100);
        assert!(matches!(parse_numeric("score: 150"), Err(OracleError::Range(150))));
        assert!(matches!(parse_numeric("ninety"), Err(OracleError::Parse(_))));
        assert!(matches!(parse_numeric("about 72.5"), Err(OracleError::Parse(_))));
        assert!(matches!(parse_numeric("-3"), Err(OracleError::Range(-3))));
    }
}
