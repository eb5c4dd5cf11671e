//! Hand-written lexer and recursive-descent parser for the ASP fragment.

use super::deps::check_non_recursive;
use super::syntax::*;
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
enum Tok {
    Ident(String),
    Var(String),
    Int(i64),
    Str(String),
    Directive(String),
    LParen,
    RParen,
    LBrace,
    RBrace,
    LBrack,
    RBrack,
    Comma,
    Semi,
    Colon,
    Dot,
    DotDot,
    If,
    WeakIf,
    At,
    Eq,
    Minus,
    Eof,
}

#[derive(Clone, Debug)]
struct Token {
    tok: Tok,
    span: Span,
}

fn lex(src: &str) -> Result<Vec<Token>> {
    let chars: Vec<char> = src.chars().collect();
    let mut out = Vec::new();
    let (mut i, mut line, mut col) = (0usize, 1usize, 1usize);
    let err = |line, col, msg: String| Error::Syntax { line, col, msg };
    while i < chars.len() {
        let c = chars[i];
        let span = Span { line, col };
        if c == '\n' {
            i += 1;
            line += 1;
            col = 1;
            continue;
        }
        if c.is_whitespace() {
            i += 1;
            col += 1;
            continue;
        }
        if c == '%' {
            while i < chars.len() && chars[i] != '\n' {
                i += 1;
            }
            continue;
        }
        let start = i;
        let tok = if c.is_ascii_digit() {
            while i < chars.len() && chars[i].is_ascii_digit() {
                i += 1;
            }
            let s: String = chars[start..i].iter().collect();
            Tok::Int(s.parse().map_err(|_| err(line, col, format!("integer out of range: {s}")))?)
        } else if c.is_alphabetic() || c == '_' {
            while i < chars.len() && (chars[i].is_alphanumeric() || chars[i] == '_' || chars[i] == '\'') {
                i += 1;
            }
            let s: String = chars[start..i].iter().collect();
            if c.is_uppercase() || c == '_' {
                Tok::Var(s)
            } else {
                Tok::Ident(s)
            }
        } else if c == '#' {
            i += 1;
            while i < chars.len() && chars[i].is_ascii_alphabetic() {
                i += 1;
            }
            Tok::Directive(chars[start + 1..i].iter().collect())
        } else if c == '"' {
            i += 1;
            let mut s = String::new();
            loop {
                match chars.get(i) {
                    None | Some('\n') => return Err(err(line, col, "unterminated string".into())),
                    Some('"') => {
                        i += 1;
                        break;
                    }
                    Some('\\') => {
                        if let Some(&n) = chars.get(i + 1) {
                            s.push(n);
                        }
                        i += 2;
                    }
                    Some(&ch) => {
                        s.push(ch);
                        i += 1;
                    }
                }
            }
            Tok::Str(s)
        } else {
            let two: String = chars[i..(i + 2).min(chars.len())].iter().collect();
            let (tok, n) = match two.as_str() {
                ":-" => (Tok::If, 2),
                ":~" => (Tok::WeakIf, 2),
                ".." => (Tok::DotDot, 2),
                _ => match c {
                    '(' => (Tok::LParen, 1),
                    ')' => (Tok::RParen, 1),
                    '{' => (Tok::LBrace, 1),
                    '}' => (Tok::RBrace, 1),
                    '[' => (Tok::LBrack, 1),
                    ']' => (Tok::RBrack, 1),
                    ',' => (Tok::Comma, 1),
                    ';' => (Tok::Semi, 1),
                    ':' => (Tok::Colon, 1),
                    '.' => (Tok::Dot, 1),
                    '@' => (Tok::At, 1),
                    '=' => (Tok::Eq, 1),
                    '-' => (Tok::Minus, 1),
                    _ => return Err(err(line, col, format!("unexpected character '{c}'"))),
                },
            };
            i += n;
            tok
        };
        col += i - start;
        out.push(Token { tok, span });
    }
    out.push(Token { tok: Tok::Eof, span: Span { line, col } });
    Ok(out)
}

/// Argument before range expansion.
#[derive(Clone, Debug)]
enum Arg {
    Term(Term),
    Range(i64, i64),
}

#[derive(Clone, Debug)]
struct RawAtom {
    pred: String,
    args: Vec<Arg>,
    span: Span,
}

impl RawAtom {
    fn has_range(&self) -> bool {
        self.args.iter().any(|a| matches!(a, Arg::Range(..)))
    }

    fn expand(&self) -> Vec<Atom> {
        let mut acc: Vec<Vec<Term>> = vec![Vec::new()];
        for a in &self.args {
            let options: Vec<Term> = match a {
                Arg::Term(t) => vec![t.clone()],
                Arg::Range(lo, hi) => (*lo..=*hi).map(Term::Int).collect(),
            };
            acc = acc
                .into_iter()
                .flat_map(|prefix| {
                    options.iter().map(move |t| {
                        let mut p = prefix.clone();
                        p.push(t.clone());
                        p
                    })
                })
                .collect();
        }
        acc.into_iter().map(|args| Atom { predicate: Symbol::new(&self.pred), args }).collect()
    }
}

enum BodyElem {
    Lit(Literal),
    Min { result: Symbol, value: Term, condition: Vec<Literal> },
}

struct Parser {
    toks: Vec<Token>,
    pos: usize,
}

impl Parser {
    fn peek(&self) -> &Tok {
        &self.toks[self.pos].tok
    }

    fn peek_at(&self, k: usize) -> &Tok {
        &self.toks[(self.pos + k).min(self.toks.len() - 1)].tok
    }

    fn span(&self) -> Span {
        self.toks[self.pos].span
    }

    fn next(&mut self) -> Tok {
        let t = self.toks[self.pos].tok.clone();
        if self.pos + 1 < self.toks.len() {
            self.pos += 1;
        }
        t
    }

    fn fail<T>(&self, msg: impl Into<String>) -> Result<T> {
        let s = self.span();
        Err(Error::Syntax { line: s.line, col: s.col, msg: msg.into() })
    }

    fn expect(&mut self, t: Tok, what: &str) -> Result<()> {
        if *self.peek() == t {
            self.next();
            Ok(())
        } else {
            self.fail(format!("expected {what}, found {:?}", self.peek()))
        }
    }

    fn int(&mut self) -> Result<i64> {
        let neg = if *self.peek() == Tok::Minus {
            self.next();
            true
        } else {
            false
        };
        match self.next() {
            Tok::Int(i) => Ok(if neg { -i } else { i }),
            t => self.fail(format!("expected integer, found {t:?}")),
        }
    }

    fn arg(&mut self) -> Result<Arg> {
        match self.peek().clone() {
            Tok::Int(_) | Tok::Minus => {
                let lo = self.int()?;
                if *self.peek() == Tok::DotDot {
                    self.next();
                    let hi = self.int()?;
                    Ok(Arg::Range(lo, hi))
                } else {
                    Ok(Arg::Term(Term::Int(lo)))
                }
            }
            _ => Ok(Arg::Term(self.term()?)),
        }
    }

    fn term(&mut self) -> Result<Term> {
        match self.peek().clone() {
            Tok::Int(_) | Tok::Minus => Ok(Term::Int(self.int()?)),
            Tok::Var(v) => {
                self.next();
                Ok(Term::Var(Symbol::new(&v)))
            }
            Tok::Str(s) => {
                self.next();
                Ok(Term::Sym(Symbol::new(&s)))
            }
            Tok::Ident(name) => {
                self.next();
                if *self.peek() == Tok::LParen {
                    self.next();
                    let mut args = vec![self.term()?];
                    while *self.peek() == Tok::Comma {
                        self.next();
                        args.push(self.term()?);
                    }
                    self.expect(Tok::RParen, "')'")?;
                    Ok(Term::Func(Symbol::new(&name), args))
                } else {
                    Ok(Term::Sym(Symbol::new(&name)))
                }
            }
            t => self.fail(format!("expected term, found {t:?}")),
        }
    }

    fn raw_atom(&mut self) -> Result<RawAtom> {
        let span = self.span();
        let pred = match self.next() {
            Tok::Ident(s) => s,
            t => return self.fail(format!("expected predicate name, found {t:?}")),
        };
        let mut args = Vec::new();
        if *self.peek() == Tok::LParen {
            self.next();
            args.push(self.arg()?);
            while *self.peek() == Tok::Comma {
                self.next();
                args.push(self.arg()?);
            }
            self.expect(Tok::RParen, "')'")?;
        }
        if pred == "nn" && args.len() != 2 {
            return Err(Error::ReservedArity { arity: args.len(), line: span.line, col: span.col });
        }
        Ok(RawAtom { pred, args, span })
    }

    fn plain_atom(&mut self) -> Result<Atom> {
        let raw = self.raw_atom()?;
        if raw.has_range() {
            return Err(Error::Syntax {
                line: raw.span.line,
                col: raw.span.col,
                msg: "range terms are only allowed in heads and choice elements".into(),
            });
        }
        Ok(raw.expand().pop().expect("one expansion"))
    }

    fn literal(&mut self) -> Result<Literal> {
        let negated = matches!(self.peek(), Tok::Ident(s) if s == "not")
            && matches!(self.peek_at(1), Tok::Ident(_));
        if negated {
            self.next();
        }
        Ok(Literal { negated, atom: self.plain_atom()? })
    }

    fn body_elem(&mut self) -> Result<BodyElem> {
        if let (Tok::Var(v), Tok::Eq) = (self.peek().clone(), self.peek_at(1).clone()) {
            self.next();
            self.next();
            match self.next() {
                Tok::Directive(d) if d == "min" => {}
                t => return self.fail(format!("expected #min, found {t:?}")),
            }
            self.expect(Tok::LBrace, "'{'")?;
            let value = self.term()?;
            self.expect(Tok::Colon, "':'")?;
            let mut condition = vec![self.literal()?];
            while *self.peek() == Tok::Comma {
                self.next();
                condition.push(self.literal()?);
            }
            self.expect(Tok::RBrace, "'}'")?;
            return Ok(BodyElem::Min { result: Symbol::new(&v), value, condition });
        }
        Ok(BodyElem::Lit(self.literal()?))
    }

    fn body(&mut self) -> Result<Vec<BodyElem>> {
        let mut out = vec![self.body_elem()?];
        while *self.peek() == Tok::Comma {
            self.next();
            out.push(self.body_elem()?);
        }
        Ok(out)
    }

    fn plain_body(&mut self) -> Result<Vec<Literal>> {
        self.body()?
            .into_iter()
            .map(|e| match e {
                BodyElem::Lit(l) => Ok(l),
                BodyElem::Min { .. } => self.fail("#min is only allowed in the body of a normal rule"),
            })
            .collect()
    }

    fn end(&mut self) -> Result<()> {
        self.expect(Tok::Dot, "'.'")
    }

    fn statement(&mut self, prog: &mut Program) -> Result<()> {
        let span = self.span();
        match self.peek().clone() {
            Tok::Directive(d) if d == "show" || d == "const" => {
                while !matches!(self.peek(), Tok::Dot | Tok::Eof) {
                    self.next();
                }
                self.end()
            }
            Tok::Directive(d) => self.fail(format!("unsupported directive #{d}")),
            Tok::If => {
                self.next();
                let body = self.plain_body()?;
                self.end()?;
                prog.rules.push(Rule { head: None, body, span });
                Ok(())
            }
            Tok::WeakIf => {
                self.next();
                let body = self.plain_body()?;
                self.end()?;
                self.expect(Tok::LBrack, "'['")?;
                let weight = self.term()?;
                self.expect(Tok::At, "'@'")?;
                let level = self.term()?;
                let mut terms = Vec::new();
                while *self.peek() == Tok::Comma {
                    self.next();
                    terms.push(self.term()?);
                }
                self.expect(Tok::RBrack, "']'")?;
                if *self.peek() == Tok::Dot {
                    self.next();
                }
                prog.weaks.push(WeakConstraint { body, weight, level, terms, span });
                Ok(())
            }
            Tok::Int(_) | Tok::LBrace => {
                let lower = if *self.peek() == Tok::LBrace {
                    0
                } else {
                    let l = self.int()?;
                    u32::try_from(l).or_else(|_| self.fail("negative choice bound"))?
                };
                self.expect(Tok::LBrace, "'{'")?;
                let mut elements = Vec::new();
                if *self.peek() != Tok::RBrace {
                    elements.extend(self.raw_atom()?.expand());
                    while matches!(self.peek(), Tok::Semi | Tok::Comma) {
                        self.next();
                        elements.extend(self.raw_atom()?.expand());
                    }
                }
                self.expect(Tok::RBrace, "'}'")?;
                let upper = if matches!(self.peek(), Tok::Int(_)) {
                    let u = self.int()?;
                    Some(u32::try_from(u).or_else(|_| self.fail("negative choice bound"))?)
                } else {
                    None
                };
                let body = if *self.peek() == Tok::If {
                    self.next();
                    self.plain_body()?
                } else {
                    Vec::new()
                };
                self.end()?;
                prog.choices.push(ChoiceRule { lower, upper, elements, body, span });
                Ok(())
            }
            Tok::Ident(_) => {
                let head = self.raw_atom()?;
                let body = if *self.peek() == Tok::If {
                    self.next();
                    self.body()?
                } else {
                    Vec::new()
                };
                self.end()?;
                let mins: Vec<_> = body.iter().filter(|e| matches!(e, BodyElem::Min { .. })).collect();
                if mins.len() > 1 {
                    return self.fail("at most one #min aggregate per rule");
                }
                if mins.len() == 1 {
                    if head.has_range() {
                        return self.fail("range terms are not allowed in the head of a #min rule");
                    }
                    let mut lits = Vec::new();
                    let mut agg = None;
                    for e in body {
                        match e {
                            BodyElem::Lit(l) => lits.push(l),
                            BodyElem::Min { result, value, condition } => agg = Some((result, value, condition)),
                        }
                    }
                    let (result, value, condition) = agg.expect("one aggregate");
                    prog.mins.push(MinRule {
                        head: head.expand().pop().expect("one expansion"),
                        body: lits,
                        result,
                        value,
                        condition,
                        span,
                    });
                    return Ok(());
                }
                let lits: Vec<Literal> = body
                    .into_iter()
                    .map(|e| match e {
                        BodyElem::Lit(l) => l,
                        BodyElem::Min { .. } => unreachable!(),
                    })
                    .collect();
                for h in head.expand() {
                    prog.rules.push(Rule { head: Some(h), body: lits.clone(), span });
                }
                Ok(())
            }
            t => self.fail(format!("unexpected token {t:?}")),
        }
    }
}

/// Parses program text without the recursion check.
pub fn parse_program_unchecked(text: &str) -> Result<Program> {
    let mut p = Parser { toks: lex(text)?, pos: 0 };
    let mut prog = Program::new();
    while *p.peek() != Tok::Eof {
        p.statement(&mut prog)?;
    }
    Ok(prog)
}

/// Parses a non-recursive program. Range terms in heads and choice
/// elements are expanded.
pub fn parse_program(text: &str) -> Result<Program> {
    let prog = parse_program_unchecked(text)?;
    check_non_recursive(&prog)?;
    Ok(prog)
}

/// Parses a single atom, e.g. `result(7)`. Ranges are rejected.
pub fn parse_atom(text: &str) -> Result<Atom> {
    let mut p = Parser { toks: lex(text)?, pos: 0 };
    let a = p.plain_atom()?;
    if *p.peek() == Tok::Dot {
        p.next();
    }
    if *p.peek() != Tok::Eof {
        return p.fail("trailing input after atom");
    }
    Ok(a)
}

/// Parses an atom that may contain ranges, returning every expansion.
pub fn parse_atoms_expanding(text: &str) -> Result<Vec<Atom>> {
    let mut p = Parser { toks: lex(text)?, pos: 0 };
    let a = p.raw_atom()?;
    if *p.peek() == Tok::Dot {
        p.next();
    }
    if *p.peek() != Tok::Eof {
        return p.fail("trailing input after atom");
    }
    Ok(a.expand())
}

/// Parses a single term.
pub fn parse_term(text: &str) -> Result<Term> {
    let mut p = Parser { toks: lex(text)?, pos: 0 };
    let t = p.term()?;
    if *p.peek() != Tok::Eof {
        return p.fail("trailing input after term");
    }
    Ok(t)
}

/// Parses one normal rule, e.g. `f(X) :- g(X), not h(X).`
pub fn parse_rule(text: &str) -> Result<Rule> {
    let prog = parse_program_unchecked(text)?;
    if prog.rules.len() != 1 || !prog.choices.is_empty() || !prog.weaks.is_empty() || !prog.mins.is_empty() {
        return Err(Error::Syntax { line: 1, col: 1, msg: format!("expected exactly one normal rule in `{text}`") });
    }
    Ok(prog.rules.into_iter().next().expect("one rule"))
}
