use alloc::boxed::Box;
use alloc::collections::BTreeSet;
use alloc::string::String;
use alloc::vec::Vec;
use thiserror::Error;

use super::{Lifetime, Name, Qual, Ty};

/// What a type string may refer to.
#[derive(Clone, Debug, Default)]
pub struct ParseCtx {
    /// Identifiers parsed as type variables.
    pub type_vars: BTreeSet<Name>,
    /// Declared lifetimes; `None` accepts any lifetime name.
    pub lifetimes: Option<BTreeSet<Name>>,
    /// Accept `&T` without a lifetime, read as the runtime hook.
    pub allow_elided: bool,
    /// Expansion of `Self`.
    pub self_ty: Option<Ty>,
}

impl ParseCtx {
    /// Context for goal strings and dumps: no variables, elision allowed.
    pub fn ground() -> Self {
        ParseCtx { allow_elided: true, ..ParseCtx::default() }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Error)]
#[error("column {column}: {message}")]
pub struct TypeParseError {
    /// 1-based character column.
    pub column: usize,
    pub message: String,
}

pub fn parse_type(src: &str, ctx: &ParseCtx) -> Result<Ty, TypeParseError> {
    let mut p = Parser { chars: src.chars().collect(), pos: 0, ctx };
    let ty = p.ty()?;
    p.skip_ws();
    if p.pos < p.chars.len() {
        return Err(p.err(alloc::format!("unexpected `{}`", p.chars[p.pos])));
    }
    Ok(ty)
}

struct Parser<'c> {
    chars: Vec<char>,
    pos: usize,
    ctx: &'c ParseCtx,
}

impl Parser<'_> {
    fn err(&self, message: String) -> TypeParseError {
        TypeParseError { column: self.pos + 1, message }
    }

    fn skip_ws(&mut self) {
        while self.pos < self.chars.len() && self.chars[self.pos].is_whitespace() {
            self.pos += 1;
        }
    }

    fn peek(&mut self) -> Option<char> {
        self.skip_ws();
        self.chars.get(self.pos).copied()
    }

    fn eat(&mut self, c: char) -> bool {
        if self.peek() == Some(c) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn expect(&mut self, c: char) -> Result<(), TypeParseError> {
        if self.eat(c) {
            Ok(())
        } else {
            let msg = match self.peek() {
                Some(found) => alloc::format!("expected `{c}`, found `{found}`"),
                None => alloc::format!("expected `{c}`, found end of input"),
            };
            Err(self.err(msg))
        }
    }

    fn ident(&mut self) -> Result<Name, TypeParseError> {
        self.skip_ws();
        let start = self.pos;
        while let Some(&c) = self.chars.get(self.pos) {
            let ok = if self.pos == start { c.is_alphabetic() || c == '_' } else { c.is_alphanumeric() || c == '_' };
            if !ok {
                break;
            }
            self.pos += 1;
        }
        if start == self.pos {
            return Err(self.err(match self.chars.get(self.pos) {
                Some(c) => alloc::format!("expected identifier, found `{c}`"),
                None => "expected identifier, found end of input".into(),
            }));
        }
        Ok(self.chars[start..self.pos].iter().collect())
    }

    /// Consumes the keyword if the next identifier is exactly `kw`.
    fn keyword(&mut self, kw: &str) -> bool {
        self.skip_ws();
        let save = self.pos;
        match self.ident() {
            Ok(id) if id == kw => true,
            _ => {
                self.pos = save;
                false
            }
        }
    }

    fn ty(&mut self) -> Result<Ty, TypeParseError> {
        let mut t = self.prefix()?;
        while self.peek() == Some('.') {
            self.pos += 1;
            let field = self.ident()?;
            t = Ty::Field(Box::new(t), field);
        }
        Ok(t)
    }

    fn prefix(&mut self) -> Result<Ty, TypeParseError> {
        if self.eat('&') {
            let life = if self.peek() == Some('\'') {
                self.pos += 1;
                let name = self.ident()?;
                if let Some(declared) = &self.ctx.lifetimes {
                    if !declared.contains(&name) {
                        return Err(self.err(alloc::format!("undeclared lifetime `'{name}`")));
                    }
                }
                Lifetime::Var(name)
            } else if self.ctx.allow_elided {
                Lifetime::Hook
            } else {
                return Err(self.err("reference needs an explicit lifetime".into()));
            };
            let qual = if self.keyword("mut") { Qual::Mut } else { Qual::Shr };
            let inner = self.ty()?;
            return Ok(Ty::Ref(qual, life, Box::new(inner)));
        }
        self.atom()
    }

    fn list(&mut self, close: char) -> Result<(Vec<Ty>, bool), TypeParseError> {
        let mut items = Vec::new();
        let mut trailing = false;
        if self.eat(close) {
            return Ok((items, trailing));
        }
        loop {
            items.push(self.ty()?);
            if self.eat(',') {
                if self.eat(close) {
                    trailing = true;
                    break;
                }
                continue;
            }
            self.expect(close)?;
            break;
        }
        Ok((items, trailing))
    }

    fn atom(&mut self) -> Result<Ty, TypeParseError> {
        match self.peek() {
            Some('(') => {
                self.pos += 1;
                let (mut items, trailing) = self.list(')')?;
                if items.len() == 1 && !trailing {
                    Ok(items.pop().unwrap())
                } else {
                    Ok(Ty::Tuple(items))
                }
            }
            Some('[') => {
                self.pos += 1;
                let inner = self.ty()?;
                self.expect(']')?;
                Ok(Ty::Slice(Box::new(inner)))
            }
            Some('<') => {
                self.pos += 1;
                let base = self.ty()?;
                if !self.keyword("as") {
                    return Err(self.err("expected `as`".into()));
                }
                let tr = self.ident()?;
                self.expect('>')?;
                self.expect(':')?;
                self.expect(':')?;
                let assoc = self.ident()?;
                Ok(Ty::Assoc(Box::new(base), tr, assoc))
            }
            Some(_) => {
                let start = self.pos;
                let name = self.ident()?;
                if name == "Self" {
                    return match &self.ctx.self_ty {
                        Some(t) => Ok(t.clone()),
                        None => {
                            self.pos = start;
                            Err(self.err("`Self` outside of a method".into()))
                        }
                    };
                }
                if self.ctx.type_vars.contains(&name) {
                    return Ok(Ty::Var(name));
                }
                if self.peek() == Some('<') {
                    self.pos += 1;
                    let (args, _) = self.list('>')?;
                    if args.is_empty() {
                        return Err(self.err("empty generic argument list".into()));
                    }
                    return Ok(Ty::App(name, args));
                }
                Ok(Ty::Base(name))
            }
            None => Err(self.err("unexpected end of input".into())),
        }
    }
}
