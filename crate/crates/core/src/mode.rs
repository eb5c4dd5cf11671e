//! Mode declarations, capture/release checking and canonical rule forms.
//!
//! A slot annotated `-` captures its variable: the variable must be released
//! by another literal. A slot annotated `+` releases its variable, and each
//! variable may be released at most once per rule.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;

use itertools::Itertools;

use crate::asp::syntax::*;
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Polarity {
    Capture,
    Release,
    Neutral,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum SlotKind {
    Var,
    Const,
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Slot {
    pub kind: SlotKind,
    pub ty: Symbol,
    pub polarity: Polarity,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ModeDecl {
    pub predicate: Symbol,
    pub slots: Vec<Slot>,
    pub negated: bool,
    /// 0-based argument positions declared interchangeable.
    pub symmetric: Vec<(usize, usize)>,
    pub text: String,
}

impl fmt::Display for ModeDecl {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.text)
    }
}

struct Scanner<'a> {
    s: &'a [u8],
    i: usize,
    text: &'a str,
}

impl<'a> Scanner<'a> {
    fn ws(&mut self) {
        while self.i < self.s.len() && (self.s[self.i] as char).is_whitespace() {
            self.i += 1;
        }
    }

    fn peek(&mut self) -> Option<char> {
        self.ws();
        self.s.get(self.i).map(|&c| c as char)
    }

    fn ident(&mut self) -> Option<String> {
        self.ws();
        let start = self.i;
        while self.i < self.s.len() && ((self.s[self.i] as char).is_alphanumeric() || self.s[self.i] == b'_') {
            self.i += 1;
        }
        (self.i > start).then(|| self.text[start..self.i].to_string())
    }

    fn eat(&mut self, c: char) -> bool {
        if self.peek() == Some(c) {
            self.i += 1;
            true
        } else {
            false
        }
    }

    fn int(&mut self) -> Option<usize> {
        self.ident().and_then(|s| s.parse().ok())
    }
}

impl ModeDecl {
    /// Parses e.g. `modeb not g(var(t)-, const(c))` or
    /// `plus(var(num)-, var(num)-, var(num)+) [symmetric(1,2)]`. The
    /// `modeh`/`modeb` keyword and trailing dot are optional.
    pub fn parse(text: &str) -> Result<ModeDecl> {
        let fail = |msg: &str| Error::Mode { decl: text.to_string(), msg: msg.to_string() };
        let mut sc = Scanner { s: text.as_bytes(), i: 0, text };
        let mut word = sc.ident().ok_or_else(|| fail("expected predicate"))?;
        if word == "modeh" || word == "modeb" {
            word = sc.ident().ok_or_else(|| fail("expected predicate"))?;
        }
        let mut negated = false;
        if word == "not" {
            negated = true;
            word = sc.ident().ok_or_else(|| fail("expected predicate after not"))?;
        }
        if !word.starts_with(|c: char| c.is_ascii_lowercase()) {
            return Err(fail("predicate must start with a lowercase letter"));
        }
        let mut slots = Vec::new();
        if sc.eat('(') {
            loop {
                let kind = match sc.ident().as_deref() {
                    Some("var") => SlotKind::Var,
                    Some("const") => SlotKind::Const,
                    _ => return Err(fail("slot must be var(type) or const(type)")),
                };
                if !sc.eat('(') {
                    return Err(fail("expected '(' after slot kind"));
                }
                let ty = sc.ident().ok_or_else(|| fail("expected type name"))?;
                if !sc.eat(')') {
                    return Err(fail("expected ')' after type"));
                }
                let polarity = if sc.eat('+') {
                    Polarity::Release
                } else if sc.eat('-') {
                    Polarity::Capture
                } else {
                    Polarity::Neutral
                };
                if kind == SlotKind::Const && polarity != Polarity::Neutral {
                    return Err(fail("constant slots cannot capture or release"));
                }
                slots.push(Slot { kind, ty: Symbol::new(&ty), polarity });
                if sc.eat(',') {
                    continue;
                }
                if sc.eat(')') {
                    break;
                }
                return Err(fail("expected ',' or ')'"));
            }
        }
        sc.eat('.');
        let mut symmetric = Vec::new();
        if sc.eat('[') {
            loop {
                match sc.ident().as_deref() {
                    Some("symmetric") => {}
                    _ => return Err(fail("unknown annotation")),
                }
                if !sc.eat('(') {
                    return Err(fail("expected '(' after symmetric"));
                }
                let a = sc.int().ok_or_else(|| fail("expected position"))?;
                if !sc.eat(',') {
                    return Err(fail("expected ','"));
                }
                let b = sc.int().ok_or_else(|| fail("expected position"))?;
                if !sc.eat(')') {
                    return Err(fail("expected ')'"));
                }
                if a == 0 || b == 0 || a > slots.len() || b > slots.len() || a == b {
                    return Err(fail("symmetric positions out of range"));
                }
                let (sa, sb) = (&slots[a - 1], &slots[b - 1]);
                if sa != sb {
                    return Err(fail("symmetric positions must have identical slots"));
                }
                symmetric.push(((a - 1).min(b - 1), (a - 1).max(b - 1)));
                if sc.eat(',') {
                    continue;
                }
                if sc.eat(']') {
                    break;
                }
                return Err(fail("expected ']'"));
            }
        }
        sc.eat('.');
        if sc.peek().is_some() {
            return Err(fail("trailing input"));
        }
        Ok(ModeDecl { predicate: Symbol::new(&word), slots, negated, symmetric, text: text.trim().to_string() })
    }

    pub fn arity(&self) -> usize {
        self.slots.len()
    }

    /// Equivalence classes of interchangeable positions with more than one
    /// member.
    pub fn orbits(&self) -> Vec<Vec<usize>> {
        let mut parent: Vec<usize> = (0..self.slots.len()).collect();
        fn find(p: &mut Vec<usize>, x: usize) -> usize {
            if p[x] != x {
                let r = find(p, p[x]);
                p[x] = r;
            }
            p[x]
        }
        for &(a, b) in &self.symmetric {
            let (ra, rb) = (find(&mut parent, a), find(&mut parent, b));
            if ra != rb {
                parent[ra.max(rb)] = ra.min(rb);
            }
        }
        let mut groups: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
        for i in 0..self.slots.len() {
            let r = find(&mut parent, i);
            groups.entry(r).or_default().push(i);
        }
        groups.into_values().filter(|g| g.len() > 1).collect()
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ModeBias {
    pub heads: Vec<ModeDecl>,
    pub bodies: Vec<ModeDecl>,
    pub types: BTreeMap<Symbol, BTreeSet<Term>>,
    pub max_body: usize,
}

pub const DEFAULT_MAX_BODY: usize = 4;

impl ModeBias {
    pub fn new(heads: Vec<ModeDecl>, bodies: Vec<ModeDecl>, types: BTreeMap<Symbol, BTreeSet<Term>>, max_body: usize)
        -> Result<Self> {
        if heads.is_empty() {
            return Err(Error::Mode { decl: String::new(), msg: "at least one head declaration is required".into() });
        }
        for h in &heads {
            if h.negated {
                return Err(Error::Mode { decl: h.text.clone(), msg: "head declarations cannot be negated".into() });
            }
        }
        for d in heads.iter().chain(&bodies) {
            for s in &d.slots {
                if s.kind == SlotKind::Const && types.get(&s.ty).is_none_or(|t| t.is_empty()) {
                    return Err(Error::Mode {
                        decl: d.text.clone(),
                        msg: format!("constant slot of type {} has no declared domain", s.ty),
                    });
                }
            }
        }
        Ok(ModeBias { heads, bodies, types, max_body })
    }

    pub fn parse(heads: &[&str], bodies: &[&str], types: BTreeMap<Symbol, BTreeSet<Term>>, max_body: usize)
        -> Result<Self> {
        let h = heads.iter().map(|s| ModeDecl::parse(s)).collect::<Result<Vec<_>>>()?;
        let b = bodies.iter().map(|s| ModeDecl::parse(s)).collect::<Result<Vec<_>>>()?;
        ModeBias::new(h, b, types, max_body)
    }

    /// Predicates that may appear in rule heads.
    pub fn head_predicates(&self) -> BTreeSet<PredKey> {
        self.heads.iter().map(|d| PredKey { name: d.predicate.clone(), arity: d.arity() }).collect()
    }

    fn term_fits(&self, t: &Term, slot: &Slot, ground: bool) -> bool {
        match (slot.kind, t) {
            (SlotKind::Var, Term::Var(_)) => !ground,
            (SlotKind::Var, Term::Int(_) | Term::Sym(_)) => {
                ground && self.types.get(&slot.ty).is_none_or(|d| d.contains(t))
            }
            (SlotKind::Const, Term::Int(_) | Term::Sym(_)) => self.types.get(&slot.ty).is_some_and(|d| d.contains(t)),
            _ => false,
        }
    }

    /// A non-ground literal fits a declaration when predicate, arity and
    /// sign agree, variable slots hold variables and constant slots hold
    /// constants of the slot type.
    pub fn compatible(&self, lit: &Literal, decl: &ModeDecl) -> bool {
        lit.negated == decl.negated
            && lit.atom.predicate == decl.predicate
            && lit.atom.arity() == decl.arity()
            && lit.atom.args.iter().zip(&decl.slots).all(|(t, s)| self.term_fits(t, s, false))
    }

    /// A ground literal fits a declaration when variable slots hold
    /// constants of the slot type (any constant for undeclared types).
    pub fn compatible_ground(&self, lit: &Literal, decl: &ModeDecl) -> bool {
        lit.negated == decl.negated
            && lit.atom.predicate == decl.predicate
            && lit.atom.arity() == decl.arity()
            && lit.atom.args.iter().zip(&decl.slots).all(|(t, s)| self.term_fits(t, s, true))
    }

    pub fn head_decls_for<'a>(&'a self, a: &'a Atom, ground: bool) -> impl Iterator<Item = &'a ModeDecl> + 'a {
        let lit = Literal::pos(a.clone());
        self.heads.iter().filter(move |d| {
            if ground {
                self.compatible_ground(&lit, d)
            } else {
                self.compatible(&lit, d)
            }
        })
    }

    pub fn body_decls_for<'a>(&'a self, l: &'a Literal, ground: bool) -> impl Iterator<Item = &'a ModeDecl> + 'a {
        self.bodies.iter().filter(move |d| if ground { self.compatible_ground(l, d) } else { self.compatible(l, d) })
    }

    /// Every way of assigning a compatible declaration to each literal,
    /// head first. Empty when some literal has no compatible declaration.
    fn assignments<'a>(&'a self, rule: &'a Rule) -> Vec<Vec<&'a ModeDecl>> {
        let mut options: Vec<Vec<&ModeDecl>> = Vec::new();
        if let Some(h) = &rule.head {
            options.push(self.head_decls_for(h, false).collect());
        }
        for l in &rule.body {
            options.push(self.body_decls_for(l, false).collect());
        }
        if options.iter().any(Vec::is_empty) {
            return Vec::new();
        }
        options.into_iter().multi_cartesian_product().collect()
    }

    /// Capture/release validity: some assignment of declarations satisfies
    /// the three conditions. Errors when a literal fits no declaration.
    pub fn capture_release_ok(&self, rule: &Rule) -> Result<bool> {
        let assigns = self.assignments(rule);
        if assigns.is_empty() {
            let culprit = rule
                .head
                .iter()
                .map(|h| Literal::pos(h.clone()))
                .chain(rule.body.iter().cloned())
                .find(|l| {
                    if Some(&l.atom) == rule.head.as_ref() && !l.negated {
                        self.head_decls_for(&l.atom, false).next().is_none()
                    } else {
                        self.body_decls_for(l, false).next().is_none()
                    }
                })
                .map(|l| l.to_string())
                .unwrap_or_default();
            return Err(Error::Mode { decl: culprit, msg: "no compatible mode declaration".into() });
        }
        Ok(assigns.iter().any(|a| cr_valid(rule, a)))
    }

    /// Full conformance: compatible literals, consistent variable types,
    /// body cap, safety and capture/release validity.
    pub fn conforms(&self, rule: &Rule) -> bool {
        if rule.body.len() > self.max_body || !is_safe(rule) {
            return false;
        }
        if rule.body.iter().duplicates().next().is_some() {
            return false;
        }
        self.assignments(rule).iter().any(|a| types_consistent(rule, a) && cr_valid(rule, a))
    }

    fn symmetric_decl<'a>(&'a self, lit: &'a Literal, ground: bool) -> Option<&'a ModeDecl> {
        self.body_decls_for(lit, ground).find(|d| !d.symmetric.is_empty())
    }

    /// Sorts arguments within each symmetric orbit of every body literal.
    pub fn canonicalize_symmetric(&self, rule: &Rule) -> Rule {
        let mut out = rule.clone();
        for l in &mut out.body {
            let ground = l.atom.is_ground();
            if let Some(d) = self.symmetric_decl(l, ground).or_else(|| self.symmetric_decl(l, !ground)) {
                for orbit in d.orbits() {
                    let mut vals: Vec<Term> = orbit.iter().map(|&i| l.atom.args[i].clone()).collect();
                    vals.sort();
                    for (&i, v) in orbit.iter().zip(vals) {
                        l.atom.args[i] = v;
                    }
                }
            }
        }
        out
    }

    /// Canonical representative of a rule up to variable renaming, body
    /// order and symmetric argument swaps. Variables are renamed `V1, V2, ...`
    /// in order of first occurrence. Exact up to a search budget, beyond
    /// which a deterministic heuristic ordering is used.
    pub fn canonical_rule(&self, rule: &Rule) -> Rule {
        let mut body: Vec<Literal> = rule.body.clone();
        body.sort();
        body.dedup();
        let orbits: Vec<Vec<Vec<usize>>> = body
            .iter()
            .map(|l| {
                let g = l.atom.is_ground();
                self.symmetric_decl(l, g).or_else(|| self.symmetric_decl(l, !g)).map(|d| d.orbits()).unwrap_or_default()
            })
            .collect();
        let keyed: Vec<(String, Literal, Vec<Vec<usize>>)> = body
            .into_iter()
            .zip(orbits)
            .map(|(l, o)| (invariant_key(&l, &o), l, o))
            .sorted_by(|a, b| a.0.cmp(&b.0).then_with(|| a.1.cmp(&b.1)))
            .collect();
        let groups: Vec<Vec<usize>> = (0..keyed.len()).chunk_by(|&i| keyed[i].0.clone()).into_iter().map(|(_, g)| g.collect()).collect();
        let mut budget: u128 = 1;
        for g in &groups {
            budget = budget.saturating_mul((1..=g.len() as u128).product());
        }
        for (_, _, o) in &keyed {
            for orbit in o {
                budget = budget.saturating_mul((1..=orbit.len() as u128).product());
            }
        }
        if budget > CANONICAL_BUDGET {
            return heuristic_canonical(rule.head.as_ref(), &keyed, rule.span);
        }
        let orders: Vec<Vec<usize>> = groups
            .iter()
            .map(|g| g.iter().copied().permutations(g.len()).collect::<Vec<_>>())
            .multi_cartesian_product()
            .map(|parts| parts.concat())
            .collect();
        let orders = if orders.is_empty() { vec![Vec::new()] } else { orders };
        let variants: Vec<Vec<Literal>> = keyed.iter().map(|(_, l, o)| symmetric_variants(l, o)).collect();
        let mut best: Option<(String, Rule)> = None;
        for order in &orders {
            let choices: Vec<&Vec<Literal>> = order.iter().map(|&i| &variants[i]).collect();
            let combos: Box<dyn Iterator<Item = Vec<&Literal>>> = if choices.is_empty() {
                Box::new(std::iter::once(Vec::new()))
            } else {
                Box::new(choices.into_iter().map(|v| v.iter()).multi_cartesian_product())
            };
            for lits in combos {
                let cand = rename_first_occurrence(rule.head.as_ref(), lits.into_iter().cloned().collect(), rule.span);
                let s = cand.to_string();
                if best.as_ref().is_none_or(|(b, _)| s < *b) {
                    best = Some((s, cand));
                }
            }
        }
        best.expect("at least one ordering").1
    }

    pub fn canonical_string(&self, rule: &Rule) -> String {
        self.canonical_rule(rule).to_string()
    }

    /// Every subrule (same head, subset of the body) with length at least
    /// `min_len` that conforms to the bias, in canonical form, sorted by
    /// length then text.
    pub fn subrules(&self, rule: &Rule, min_len: usize) -> Vec<Rule> {
        let mut body = rule.body.clone();
        body.sort();
        body.dedup();
        let head_len = usize::from(rule.head.is_some());
        let max_size = self.max_body.min(body.len());
        let mut seen: HashMap<String, Rule> = HashMap::new();
        let consider = |lits: Vec<Literal>, seen: &mut HashMap<String, Rule>| {
            if lits.len() + head_len < min_len {
                return;
            }
            let r = Rule { head: rule.head.clone(), body: lits, span: rule.span };
            if self.conforms(&r) {
                let c = self.canonical_rule(&r);
                seen.entry(c.to_string()).or_insert(c);
            }
        };
        if body.len() <= SUBRULE_POWERSET_LIMIT {
            for size in 0..=max_size {
                for idx in (0..body.len()).combinations(size) {
                    consider(idx.iter().map(|&i| body[i].clone()).collect(), &mut seen);
                }
            }
        } else {
            for idx in self.guided_subsets(rule.head.as_ref(), &body, max_size) {
                consider(idx.iter().map(|&i| body[i].clone()).collect(), &mut seen);
            }
        }
        seen.into_values().sorted_by(|a, b| a.length().cmp(&b.length()).then_with(|| a.to_string().cmp(&b.to_string()))).collect()
    }

    /// Body subsets built by adding one literal at a time whose captured
    /// variables are already released (by the head or a chosen literal) and
    /// whose released variables are fresh.
    fn guided_subsets(&self, head: Option<&Atom>, body: &[Literal], max_size: usize) -> Vec<Vec<usize>> {
        let decl_of: Vec<Option<&ModeDecl>> = body.iter().map(|l| self.body_decls_for(l, false).next()).collect();
        let head_decl = head.and_then(|h| self.head_decls_for(h, false).next());
        let mut released: Vec<Symbol> = Vec::new();
        if let (Some(h), Some(d)) = (head, head_decl) {
            released.extend(polar_vars(&h.args, d, Polarity::Release));
        }
        let mut out = Vec::new();
        let mut visited = std::collections::HashSet::new();
        let mut chosen = Vec::new();
        guided_dfs(body, &decl_of, &mut chosen, &mut released, max_size, &mut visited, &mut out);
        out
    }
}

fn guided_dfs(
    body: &[Literal],
    decl_of: &[Option<&ModeDecl>],
    chosen: &mut Vec<usize>,
    released: &mut Vec<Symbol>,
    max_size: usize,
    visited: &mut std::collections::HashSet<Vec<usize>>,
    out: &mut Vec<Vec<usize>>,
) {
    let mut key = chosen.clone();
    key.sort();
    if !visited.insert(key.clone()) {
        return;
    }
    out.push(key);
    if chosen.len() == max_size {
        return;
    }
    for i in 0..body.len() {
        if chosen.contains(&i) {
            continue;
        }
        let Some(d) = decl_of[i] else { continue };
        let caps = polar_vars(&body[i].atom.args, d, Polarity::Capture);
        if !caps.iter().all(|v| released.contains(v)) {
            continue;
        }
        let rels = polar_vars(&body[i].atom.args, d, Polarity::Release);
        if rels.iter().any(|v| released.contains(v)) || rels.iter().duplicates().next().is_some() {
            continue;
        }
        let mark = released.len();
        released.extend(rels);
        chosen.push(i);
        guided_dfs(body, decl_of, chosen, released, max_size, visited, out);
        chosen.pop();
        released.truncate(mark);
    }
}

const CANONICAL_BUDGET: u128 = 4096;
const SUBRULE_POWERSET_LIMIT: usize = 16;

fn polar_vars(args: &[Term], d: &ModeDecl, p: Polarity) -> Vec<Symbol> {
    args.iter()
        .zip(&d.slots)
        .filter(|(_, s)| s.polarity == p)
        .filter_map(|(t, _)| match t {
            Term::Var(v) => Some(v.clone()),
            _ => None,
        })
        .collect()
}

fn cr_valid(rule: &Rule, assign: &[&ModeDecl]) -> bool {
    let lits: Vec<&Atom> = rule.head.iter().chain(rule.body.iter().map(|l| &l.atom)).collect();
    let mut releases: Vec<(usize, Symbol)> = Vec::new();
    for (i, (a, d)) in lits.iter().zip(assign).enumerate() {
        for v in polar_vars(&a.args, d, Polarity::Release) {
            if releases.iter().any(|(_, w)| *w == v) {
                return false;
            }
            releases.push((i, v));
        }
    }
    for (i, (a, d)) in lits.iter().zip(assign).enumerate() {
        for v in polar_vars(&a.args, d, Polarity::Capture) {
            let ok = releases.iter().any(|(j, w)| *w == v && *j != i);
            if !ok {
                return false;
            }
        }
    }
    true
}

fn types_consistent(rule: &Rule, assign: &[&ModeDecl]) -> bool {
    let mut ty: HashMap<&Symbol, &Symbol> = HashMap::new();
    let lits: Vec<&Atom> = rule.head.iter().chain(rule.body.iter().map(|l| &l.atom)).collect();
    for (a, d) in lits.iter().zip(assign) {
        for (t, s) in a.args.iter().zip(&d.slots) {
            if let Term::Var(v) = t {
                if let Some(prev) = ty.insert(v, &s.ty) {
                    if prev != &s.ty {
                        return false;
                    }
                }
            }
        }
    }
    true
}

/// Head variables and variables of negative literals occur in some
/// positive body literal.
pub fn is_safe(rule: &Rule) -> bool {
    let mut pos = Vec::new();
    rule.pos_body().for_each(|a| a.collect_vars(&mut pos));
    let mut needed = rule.head.as_ref().map(Atom::vars).unwrap_or_default();
    rule.neg_body().for_each(|a| a.collect_vars(&mut needed));
    needed.iter().all(|v| pos.contains(v))
}

fn invariant_key(l: &Literal, orbits: &[Vec<usize>]) -> String {
    let mut parts: Vec<String> = l
        .atom
        .args
        .iter()
        .map(|t| if t.is_var() { "_".to_string() } else { t.to_string() })
        .collect();
    for orbit in orbits {
        let mut vals: Vec<String> = orbit.iter().map(|&i| parts[i].clone()).collect();
        vals.sort();
        for (&i, v) in orbit.iter().zip(vals) {
            parts[i] = v;
        }
    }
    format!("{}{}/{}({})", if l.negated { "~" } else { "" }, l.atom.predicate, l.atom.arity(), parts.join(","))
}

fn symmetric_variants(l: &Literal, orbits: &[Vec<usize>]) -> Vec<Literal> {
    let mut out = vec![l.clone()];
    for orbit in orbits {
        let mut next = Vec::new();
        for base in &out {
            for perm in orbit.iter().permutations(orbit.len()) {
                let mut v = base.clone();
                for (&dst, &&src) in orbit.iter().zip(&perm) {
                    v.atom.args[dst] = base.atom.args[src].clone();
                }
                next.push(v);
            }
        }
        out = next;
    }
    out.sort();
    out.dedup();
    out
}

fn rename_first_occurrence(head: Option<&Atom>, body: Vec<Literal>, span: Span) -> Rule {
    let mut map: HashMap<Symbol, Term> = HashMap::new();
    fn ren(t: &Term, map: &mut HashMap<Symbol, Term>) -> Term {
        match t {
            Term::Var(v) => {
                let n = map.len() + 1;
                map.entry(v.clone()).or_insert_with(|| Term::Var(Symbol::new(&format!("V{n}")))).clone()
            }
            Term::Func(f, a) => Term::Func(f.clone(), a.iter().map(|x| ren(x, map)).collect()),
            _ => t.clone(),
        }
    }
    let ren_atom = |a: &Atom, map: &mut HashMap<Symbol, Term>| Atom {
        predicate: a.predicate.clone(),
        args: a.args.iter().map(|t| ren(t, map)).collect(),
    };
    let head = head.map(|h| ren_atom(h, &mut map));
    let body = body.iter().map(|l| Literal { negated: l.negated, atom: ren_atom(&l.atom, &mut map) }).collect();
    Rule { head, body, span }
}

fn heuristic_canonical(head: Option<&Atom>, keyed: &[(String, Literal, Vec<Vec<usize>>)], span: Span) -> Rule {
    let body: Vec<Literal> = keyed.iter().map(|(_, l, _)| l.clone()).collect();
    let first = rename_first_occurrence(head, body, span);
    let mut body = first.body.clone();
    for (l, (_, _, orbits)) in body.iter_mut().zip(keyed) {
        for orbit in orbits {
            let mut vals: Vec<Term> = orbit.iter().map(|&i| l.atom.args[i].clone()).collect();
            vals.sort();
            for (&i, v) in orbit.iter().zip(vals) {
                l.atom.args[i] = v;
            }
        }
    }
    rename_first_occurrence(first.head.as_ref(), body, span)
}
