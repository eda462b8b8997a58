use serde::{Deserialize, Serialize};

use super::{parse_formula, ParseError, ParseErrorKind, SourceSpan};
use crate::formula::Formula;
use crate::model::{ServiceRef, SystemModel};

/// A sequent `antecedent ⟹ succedent`: the conjunction of the antecedent
/// implies the disjunction of the succedent.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Sequent {
    pub antecedent: Vec<Formula>,
    pub succedent: Vec<Formula>,
}

/// The open goals of a partial proof about one service.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct ProofGoals {
    pub service: Option<ServiceRef>,
    /// Names that exist only in the implementation; they are projected away.
    pub auxiliary: Vec<String>,
    pub goals: Vec<Sequent>,
    pub tool: Option<String>,
}

#[derive(Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
struct RawGoals {
    #[serde(default)]
    service: Option<String>,
    #[serde(default)]
    auxiliary: Vec<String>,
    goals: Vec<RawSequent>,
    #[serde(default)]
    tool: Option<String>,
}

#[derive(Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
struct RawSequent {
    #[serde(default)]
    antecedent: Vec<String>,
    #[serde(default)]
    succedent: Vec<String>,
}

const FILE: &str = "<goals>";

/// Best-effort position of a formula string inside the JSON text.
fn locate(text: &str, needle: &str) -> SourceSpan {
    let quoted = serde_json::to_string(needle).unwrap_or_default();
    match text.find(&quoted) {
        Some(at) => {
            let before = &text[..at];
            let line = before.matches('\n').count() as u32 + 1;
            let col = before.rsplit('\n').next().unwrap_or("").chars().count() as u32 + 1;
            SourceSpan::new(FILE, line, col, col + quoted.chars().count() as u32)
        }
        None => SourceSpan::new(FILE, 1, 1, 1),
    }
}

fn parse_list(text: &str, items: &[String]) -> Result<Vec<Formula>, ParseError> {
    items
        .iter()
        .map(|s| {
            parse_formula(s).map_err(|e| {
                let mut span = locate(text, s);
                // Point into the string literal; the +1 skips the opening quote.
                span.col_start += e.span.col_start;
                span.col_end = span.col_end.max(span.col_start);
                ParseError::new(e.kind, format!("in goal formula `{s}`: {}", e.message), span)
            })
        })
        .collect()
}

/// Parses a goal file. Formulas use the shared formula syntax; vocabulary is
/// not checked (see [`parse_goals_for`]).
///
/// ```
/// let g = covprob::dsl::parse_goals(
///     r#"{"goals":[{"antecedent":["load >= 0"],"succedent":["n <= load"]}]}"#,
/// ).unwrap();
/// assert_eq!(g.goals.len(), 1);
/// ```
pub fn parse_goals(text: &str) -> Result<ProofGoals, ParseError> {
    let raw: RawGoals = serde_json::from_str(text).map_err(|e| {
        let (line, col) = (e.line() as u32, e.column() as u32);
        ParseError::new(ParseErrorKind::Syntax, e.to_string(), SourceSpan::new(FILE, line, col, col))
    })?;
    let service = match raw.service {
        None => None,
        Some(s) => Some(ServiceRef::parse(&s).ok_or_else(|| {
            ParseError::new(
                ParseErrorKind::Syntax,
                format!("`{s}` is not a qualified service name"),
                locate(text, &s),
            )
        })?),
    };
    let mut goals = Vec::with_capacity(raw.goals.len());
    for g in &raw.goals {
        goals.push(Sequent {
            antecedent: parse_list(text, &g.antecedent)?,
            succedent: parse_list(text, &g.succedent)?,
        });
    }
    Ok(ProofGoals { service, auxiliary: raw.auxiliary, goals, tool: raw.tool })
}

/// Parses a goal file and checks that every variable is either in the
/// region vocabulary of the target service or declared auxiliary.
pub fn parse_goals_for(text: &str, model: &SystemModel) -> Result<ProofGoals, ParseError> {
    let goals = parse_goals(text)?;
    let Some(service) = &goals.service else {
        return Err(ParseError::new(
            ParseErrorKind::Syntax,
            "goal file does not name its service",
            SourceSpan::new(FILE, 1, 1, 1),
        ));
    };
    if model.service(service).is_none() {
        return Err(ParseError::new(
            ParseErrorKind::UnknownReference,
            format!("unknown service `{service}`"),
            locate(text, &service.to_string()),
        ));
    }
    let vocab = model.region_vocabulary(service);
    for g in &goals.goals {
        for f in g.antecedent.iter().chain(&g.succedent) {
            for v in f.free_vars() {
                if !vocab.contains(&v) && !goals.auxiliary.contains(&v) {
                    return Err(ParseError::new(
                        ParseErrorKind::UnknownVariable,
                        format!("`{v}` is neither a model variable nor declared auxiliary"),
                        locate(text, &f.to_string()),
                    ));
                }
            }
        }
    }
    Ok(goals)
}

impl ProofGoals {
    /// Serializes back to the goal-file format.
    pub fn to_json(&self) -> String {
        let raw = RawGoals {
            service: self.service.as_ref().map(|s| s.to_string()),
            auxiliary: self.auxiliary.clone(),
            goals: self
                .goals
                .iter()
                .map(|g| RawSequent {
                    antecedent: g.antecedent.iter().map(|f| f.to_string()).collect(),
                    succedent: g.succedent.iter().map(|f| f.to_string()).collect(),
                })
                .collect(),
            tool: self.tool.clone(),
        };
        serde_json::to_string_pretty(&raw).expect("plain data")
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dsl::parse_model;

    #[test]
    fn empty_goal_set() {
        let g = parse_goals(r#"{"goals":[]}"#).unwrap();
        assert!(g.goals.is_empty());
        assert_eq!(g.service, None);
    }

    #[test]
    fn auxiliary_is_kept() {
        let g = parse_goals(
            r#"{"service":"Network.useLoad","auxiliary":["self_non_null"],"tool":"manual",
                "goals":[{"succedent":["n <= load || self_non_null == 1"]}]}"#,
        )
        .unwrap();
        assert_eq!(g.auxiliary, vec!["self_non_null"]);
        assert_eq!(g.goals[0].antecedent.len(), 0);
        assert_eq!(g.tool.as_deref(), Some("manual"));
    }

    #[test]
    fn syntax_errors_carry_spans() {
        let e = parse_goals("{\"goals\": [").unwrap_err();
        assert_eq!(e.kind, ParseErrorKind::Syntax);
        let e = parse_goals("{\"goals\": [{\"succedent\": [\"n <=\"]}]}").unwrap_err();
        assert_eq!(e.span.line, 1);
        assert!(e.span.col_start > 27);
        // Modal formulas are not first-order.
        assert!(parse_goals(r#"{"goals":[{"succedent":["[s] load >= 0"]}]}"#).is_err());
    }

    #[test]
    fn vocabulary_check() {
        let m = parse_model(
            "component Network { state int load = 0; service useLoad(int n) { load = load - n; } }",
        )
        .unwrap();
        let ok = r#"{"service":"Network.useLoad","auxiliary":["aux"],
                     "goals":[{"succedent":["n <= Network.load || aux > 0"]}]}"#;
        assert!(parse_goals_for(ok, &m).is_ok());
        let bad = r#"{"service":"Network.useLoad","goals":[{"succedent":["n <= aux"]}]}"#;
        assert_eq!(parse_goals_for(bad, &m).unwrap_err().kind, ParseErrorKind::UnknownVariable);
    }

    #[test]
    fn json_round_trip() {
        let src = r#"{"service":"A.f","auxiliary":["x"],"goals":[{"antecedent":["a > 0"],"succedent":[]}]}"#;
        let g = parse_goals(src).unwrap();
        assert_eq!(parse_goals(&g.to_json()).unwrap(), g);
    }
}
