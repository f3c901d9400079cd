//! Reads the statement language back from rendered snippet bodies.

use alloc::string::{String, ToString};
use alloc::vec::Vec;
use thiserror::Error;

use super::{Srs, Stmt};
use crate::types::{parse_type, GroundType, ParseCtx};

#[derive(Clone, Debug, PartialEq, Eq, Error)]
pub enum ParseError {
    #[error("line {line}: {message}")]
    Syntax { line: usize, message: String },
    #[error("line {line}: unknown callable `{path}`")]
    UnknownCallable { line: usize, path: String },
}

fn is_ident(s: &str) -> bool {
    let mut cs = s.chars();
    cs.next().is_some_and(|c| c.is_alphabetic() || c == '_') && cs.all(|c| c.is_alphanumeric() || c == '_')
}

/// Parses one statement such as `let r1 = &mut x0;` or `drop(r1);`.
pub fn parse_stmt(line: &str, lineno: usize, srs: &Srs<'_>) -> Result<(Option<String>, Stmt), ParseError> {
    let syntax = |m: &str| ParseError::Syntax { line: lineno, message: m.into() };
    let line = line.trim();
    let line = line.strip_suffix(';').ok_or_else(|| syntax("missing `;`"))?.trim();
    let (target, expr) = match line.strip_prefix("let ") {
        Some(rest) => {
            let rest = rest.trim_start();
            let rest = rest.strip_prefix("mut ").unwrap_or(rest);
            let (name, expr) = rest.split_once('=').ok_or_else(|| syntax("expected `=`"))?;
            let name = name.trim();
            if !is_ident(name) {
                return Err(syntax("bad binding name"));
            }
            (Some(name.to_string()), expr.trim())
        }
        None => (None, line),
    };
    let ident = |s: &str| -> Result<String, ParseError> {
        let s = s.trim();
        if is_ident(s) {
            Ok(s.into())
        } else {
            Err(syntax("expected a binding name"))
        }
    };
    let place = |s: &str| -> Result<(String, Option<String>), ParseError> {
        match s.split_once('.') {
            Some((x, f)) => Ok((ident(x)?, Some(ident(f)?))),
            None => Ok((ident(s)?, None)),
        }
    };
    if let Some(inner) = expr.strip_prefix("drop(").and_then(|r| r.strip_suffix(')')) {
        return Ok((target, Stmt::Drop(ident(inner)?)));
    }
    if let Some(rest) = expr.strip_prefix('&') {
        let rest = rest.trim_start();
        let (mutable, rest) = match rest.strip_prefix("mut ") {
            Some(r) => (true, r.trim_start()),
            None => (false, rest),
        };
        if let Some(r) = rest.strip_prefix('*') {
            return Ok((target, Stmt::Reborrow { mutable, of: ident(r)? }));
        }
        return Ok((
            target,
            match place(rest)? {
                (of, Some(field)) => Stmt::ProjRef { mutable, of, field },
                (of, None) => Stmt::Borrow { mutable, of },
            },
        ));
    }
    if let Some(r) = expr.strip_prefix('*') {
        return Ok((target, Stmt::Deref(ident(r)?)));
    }
    if let Some(x) = expr.strip_suffix(".clone()") {
        return Ok((target, Stmt::Clone(ident(x)?)));
    }
    if let Some(open) = expr.find('(') {
        let close = expr.strip_suffix(')').ok_or_else(|| syntax("unbalanced call"))?;
        let head = &expr[..open];
        let args_text = &close[open + 1..];
        let (path, types) = match head.split_once("::<") {
            Some((p, t)) => (p, Some(t.strip_suffix('>').ok_or_else(|| syntax("unterminated type arguments"))?)),
            None => (head, None),
        };
        let theta_args: Vec<GroundType> = match types {
            None => Vec::new(),
            Some(t) => {
                let tuple = alloc::format!("({t},)");
                match parse_type(&tuple, &ParseCtx::ground()) {
                    Ok(crate::types::Ty::Tuple(items)) => items
                        .into_iter()
                        .map(|t| GroundType::new(t).ok_or_else(|| syntax("type argument is not ground")))
                        .collect::<Result<_, _>>()?,
                    _ => return Err(syntax("bad type arguments")),
                }
            }
        };
        let (item_ix, item) = srs
            .env
            .items
            .iter()
            .enumerate()
            .find(|(_, it)| it.path() == path.trim())
            .ok_or_else(|| ParseError::UnknownCallable { line: lineno, path: path.trim().into() })?;
        if item.generics.len() != theta_args.len() {
            return Err(syntax("wrong number of type arguments"));
        }
        let mut theta: Vec<(String, GroundType)> = item.generics.iter().cloned().zip(theta_args).collect();
        theta.sort();
        let args = if args_text.trim().is_empty() {
            Vec::new()
        } else {
            args_text.split(',').map(ident).collect::<Result<_, _>>()?
        };
        return Ok((target, Stmt::Call { item: item_ix, theta, args }));
    }
    match place(expr)? {
        (of, Some(field)) => Ok((target, Stmt::ProjMove { of, field })),
        (x, None) => Ok((target, Stmt::Dup(x))),
    }
}

/// Parses a body of statements, one per non-empty line.
pub fn parse_program(text: &str, srs: &Srs<'_>) -> Result<Vec<(Option<String>, Stmt)>, ParseError> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| parse_stmt(l, i + 1, srs))
        .collect()
}
