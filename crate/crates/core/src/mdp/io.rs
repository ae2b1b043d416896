//! Plain-text interchange formats.
//!
//! MDP files start with a `num_states num_actions gamma` header followed by
//! one `i a j p r` line per nonzero transition. Policy files hold one action
//! index per line. Blank lines and lines starting with `#` are ignored.

use std::fmt::Write as _;

use super::{ActionId, MdpError, Policy, StateId, TabularMdp};

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum ParseError {
    #[error("line {line}: {message}")]
    Syntax { line: usize, message: String },
    #[error("missing header line")]
    MissingHeader,
    #[error(transparent)]
    Model(#[from] MdpError),
}

fn content_lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines()
        .enumerate()
        .map(|(n, l)| (n + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'))
}

fn field<T: std::str::FromStr>(
    tok: Option<&str>,
    line: usize,
    what: &str,
) -> Result<T, ParseError> {
    let tok = tok.ok_or_else(|| ParseError::Syntax {
        line,
        message: format!("missing {what}"),
    })?;
    tok.parse().map_err(|_| ParseError::Syntax {
        line,
        message: format!("invalid {what} `{tok}`"),
    })
}

/// Parses an MDP file. The result is structurally sound but not yet checked
/// with [`super::validate_mdp`].
pub fn parse_mdp(text: &str) -> Result<TabularMdp, ParseError> {
    let mut lines = content_lines(text);
    let (hl, header) = lines.next().ok_or(ParseError::MissingHeader)?;
    let mut toks = header.split_whitespace();
    let num_states: usize = field(toks.next(), hl, "num_states")?;
    let num_actions: usize = field(toks.next(), hl, "num_actions")?;
    let gamma: f64 = field(toks.next(), hl, "gamma")?;
    if toks.next().is_some() {
        return Err(ParseError::Syntax {
            line: hl,
            message: "trailing tokens in header".into(),
        });
    }
    let mut entries = Vec::new();
    for (n, l) in lines {
        let mut toks = l.split_whitespace();
        let i: usize = field(toks.next(), n, "state")?;
        let a: usize = field(toks.next(), n, "action")?;
        let j: usize = field(toks.next(), n, "next state")?;
        let p: f64 = field(toks.next(), n, "probability")?;
        let r: f64 = field(toks.next(), n, "reward")?;
        if toks.next().is_some() {
            return Err(ParseError::Syntax {
                line: n,
                message: "expected `i a j p r`".into(),
            });
        }
        entries.push((i, a, j, p, r));
    }
    Ok(TabularMdp::from_entries(
        num_states,
        num_actions,
        gamma,
        entries,
    )?)
}

pub fn write_mdp(mdp: &TabularMdp) -> String {
    let mut out = String::new();
    let _ = writeln!(
        out,
        "{} {} {}",
        mdp.num_states(),
        mdp.num_actions(),
        mdp.gamma()
    );
    for i in 0..mdp.num_states() {
        for a in 0..mdp.num_actions() {
            for e in mdp.row(StateId(i), ActionId(a)) {
                let _ = writeln!(out, "{i} {a} {} {} {}", e.next.0, e.prob, e.reward);
            }
        }
    }
    out
}

/// Parses a policy file. Length and action range are checked by the caller,
/// which knows the model.
pub fn parse_policy(text: &str) -> Result<Policy, ParseError> {
    content_lines(text)
        .map(|(n, l)| field::<usize>(Some(l), n, "action index").map(ActionId))
        .collect::<Result<Vec<_>, _>>()
        .map(Policy)
}

pub fn write_policy(policy: &Policy) -> String {
    let mut out = String::with_capacity(policy.len() * 3);
    for a in &policy.0 {
        let _ = writeln!(out, "{}", a.0);
    }
    out
}
