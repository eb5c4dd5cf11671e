//! Abstract syntax for the supported ASP fragment.

use std::cmp::Ordering;
use std::collections::BTreeSet;
use std::fmt;
use std::hash::{Hash, Hasher};
use std::sync::Arc;

/// Interned-ish string used for predicate names, constants and variables.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Symbol(Arc<str>);

impl Symbol {
    pub fn new(s: &str) -> Self {
        Symbol(Arc::from(s))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }

    /// True when the symbol can be printed as a bare ASP constant.
    pub fn is_plain_constant(&self) -> bool {
        let mut chars = self.0.chars();
        match chars.next() {
            Some(c) if c.is_ascii_lowercase() => {}
            _ => return false,
        }
        chars.all(|c| c.is_ascii_alphanumeric() || c == '_') && &*self.0 != "not"
    }
}

impl fmt::Debug for Symbol {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

impl fmt::Display for Symbol {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<&str> for Symbol {
    fn from(s: &str) -> Self {
        Symbol::new(s)
    }
}

/// A term. Integers order numerically and before symbolic constants.
#[derive(Clone, PartialEq, Eq, Hash)]
pub enum Term {
    Int(i64),
    Sym(Symbol),
    Func(Symbol, Vec<Term>),
    Var(Symbol),
}

impl Term {
    pub fn sym(s: &str) -> Term {
        Term::Sym(Symbol::new(s))
    }

    pub fn var(s: &str) -> Term {
        Term::Var(Symbol::new(s))
    }

    pub fn is_ground(&self) -> bool {
        match self {
            Term::Var(_) => false,
            Term::Func(_, args) => args.iter().all(Term::is_ground),
            _ => true,
        }
    }

    pub fn is_var(&self) -> bool {
        matches!(self, Term::Var(_))
    }

    pub fn as_int(&self) -> Option<i64> {
        match self {
            Term::Int(i) => Some(*i),
            _ => None,
        }
    }

    pub fn collect_vars(&self, out: &mut Vec<Symbol>) {
        match self {
            Term::Var(v) => {
                if !out.contains(v) {
                    out.push(v.clone());
                }
            }
            Term::Func(_, args) => args.iter().for_each(|a| a.collect_vars(out)),
            _ => {}
        }
    }

    fn rank(&self) -> u8 {
        match self {
            Term::Int(_) => 0,
            Term::Sym(_) => 1,
            Term::Func(..) => 2,
            Term::Var(_) => 3,
        }
    }
}

impl Ord for Term {
    fn cmp(&self, other: &Self) -> Ordering {
        match (self, other) {
            (Term::Int(a), Term::Int(b)) => a.cmp(b),
            (Term::Sym(a), Term::Sym(b)) => a.cmp(b),
            (Term::Var(a), Term::Var(b)) => a.cmp(b),
            (Term::Func(f, a), Term::Func(g, b)) => f
                .cmp(g)
                .then(a.len().cmp(&b.len()))
                .then_with(|| a.cmp(b)),
            _ => self.rank().cmp(&other.rank()),
        }
    }
}

impl PartialOrd for Term {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl fmt::Debug for Term {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}

impl fmt::Display for Term {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Term::Int(i) => write!(f, "{i}"),
            Term::Sym(s) if s.is_plain_constant() => write!(f, "{s}"),
            Term::Sym(s) => write!(f, "\"{}\"", s.as_str().replace('\\', "\\\\").replace('"', "\\\"")),
            Term::Var(v) => write!(f, "{v}"),
            Term::Func(name, args) => {
                write!(f, "{name}(")?;
                write_joined(f, args, ",")?;
                write!(f, ")")
            }
        }
    }
}

fn write_joined<T: fmt::Display>(f: &mut fmt::Formatter<'_>, items: &[T], sep: &str) -> fmt::Result {
    for (i, item) in items.iter().enumerate() {
        if i > 0 {
            f.write_str(sep)?;
        }
        write!(f, "{item}")?;
    }
    Ok(())
}

/// Predicate identity: name plus arity.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Debug)]
pub struct PredKey {
    pub name: Symbol,
    pub arity: usize,
}

impl fmt::Display for PredKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}", self.name, self.arity)
    }
}

#[derive(Clone, PartialEq, Eq, Hash)]
pub struct Atom {
    pub predicate: Symbol,
    pub args: Vec<Term>,
}

impl Atom {
    pub fn new(predicate: &str, args: Vec<Term>) -> Self {
        Atom { predicate: Symbol::new(predicate), args }
    }

    pub fn arity(&self) -> usize {
        self.args.len()
    }

    pub fn key(&self) -> PredKey {
        PredKey { name: self.predicate.clone(), arity: self.args.len() }
    }

    pub fn is_ground(&self) -> bool {
        self.args.iter().all(Term::is_ground)
    }

    /// `nn/2` is reserved for neural facts.
    pub fn is_reserved(&self) -> bool {
        self.predicate.as_str() == "nn"
    }

    pub fn vars(&self) -> Vec<Symbol> {
        let mut out = Vec::new();
        self.collect_vars(&mut out);
        out
    }

    pub fn collect_vars(&self, out: &mut Vec<Symbol>) {
        self.args.iter().for_each(|a| a.collect_vars(out));
    }
}

impl Ord for Atom {
    fn cmp(&self, other: &Self) -> Ordering {
        self.predicate
            .cmp(&other.predicate)
            .then(self.args.len().cmp(&other.args.len()))
            .then_with(|| self.args.cmp(&other.args))
    }
}

impl PartialOrd for Atom {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl fmt::Display for Atom {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.predicate)?;
        if !self.args.is_empty() {
            write!(f, "(")?;
            write_joined(f, &self.args, ",")?;
            write!(f, ")")?;
        }
        Ok(())
    }
}

impl fmt::Debug for Atom {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}

#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Literal {
    pub negated: bool,
    pub atom: Atom,
}

impl Literal {
    pub fn pos(atom: Atom) -> Self {
        Literal { negated: false, atom }
    }

    pub fn neg(atom: Atom) -> Self {
        Literal { negated: true, atom }
    }
}

impl fmt::Display for Literal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.negated {
            write!(f, "not ")?;
        }
        write!(f, "{}", self.atom)
    }
}

impl fmt::Debug for Literal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}

/// Source position. Never participates in equality, ordering or hashing.
#[derive(Clone, Copy, Debug, Default)]
pub struct Span {
    pub line: usize,
    pub col: usize,
}

impl PartialEq for Span {
    fn eq(&self, _: &Self) -> bool {
        true
    }
}

impl Eq for Span {}

impl Hash for Span {
    fn hash<H: Hasher>(&self, _: &mut H) {}
}

impl PartialOrd for Span {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Span {
    fn cmp(&self, _: &Self) -> Ordering {
        Ordering::Equal
    }
}

impl fmt::Display for Span {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.line, self.col)
    }
}

/// Normal rule, fact (empty body) or constraint (no head).
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Rule {
    pub head: Option<Atom>,
    pub body: Vec<Literal>,
    pub span: Span,
}

impl Rule {
    pub fn new(head: Option<Atom>, body: Vec<Literal>) -> Self {
        Rule { head, body, span: Span::default() }
    }

    pub fn fact(head: Atom) -> Self {
        Rule::new(Some(head), Vec::new())
    }

    pub fn pos_body(&self) -> impl Iterator<Item = &Atom> {
        self.body.iter().filter(|l| !l.negated).map(|l| &l.atom)
    }

    pub fn neg_body(&self) -> impl Iterator<Item = &Atom> {
        self.body.iter().filter(|l| l.negated).map(|l| &l.atom)
    }

    pub fn is_ground(&self) -> bool {
        self.head.as_ref().is_none_or(Atom::is_ground) && self.body.iter().all(|l| l.atom.is_ground())
    }

    /// Number of literals, head included.
    pub fn length(&self) -> usize {
        self.body.len() + usize::from(self.head.is_some())
    }

    pub fn vars(&self) -> Vec<Symbol> {
        let mut out = Vec::new();
        if let Some(h) = &self.head {
            h.collect_vars(&mut out);
        }
        self.body.iter().for_each(|l| l.atom.collect_vars(&mut out));
        out
    }
}

impl fmt::Display for Rule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if let Some(h) = &self.head {
            write!(f, "{h}")?;
            if !self.body.is_empty() {
                write!(f, " ")?;
            }
        }
        if !self.body.is_empty() {
            write!(f, ":- ")?;
            write_joined(f, &self.body, ", ")?;
        }
        write!(f, ".")
    }
}

impl fmt::Debug for Rule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}

/// `l { a1; ...; an } u :- body.` with `upper == None` meaning unbounded.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Debug)]
pub struct ChoiceRule {
    pub lower: u32,
    pub upper: Option<u32>,
    pub elements: Vec<Atom>,
    pub body: Vec<Literal>,
    pub span: Span,
}

impl fmt::Display for ChoiceRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.lower > 0 {
            write!(f, "{} ", self.lower)?;
        }
        write!(f, "{{ ")?;
        write_joined(f, &self.elements, "; ")?;
        write!(f, " }}")?;
        if let Some(u) = self.upper {
            write!(f, " {u}")?;
        }
        if !self.body.is_empty() {
            write!(f, " :- ")?;
            write_joined(f, &self.body, ", ")?;
        }
        write!(f, ".")
    }
}

/// `:~ body. [weight@level, terms]`
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Debug)]
pub struct WeakConstraint {
    pub body: Vec<Literal>,
    pub weight: Term,
    pub level: Term,
    pub terms: Vec<Term>,
    pub span: Span,
}

impl fmt::Display for WeakConstraint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, ":~ ")?;
        write_joined(f, &self.body, ", ")?;
        write!(f, ". [{}@{}", self.weight, self.level)?;
        for t in &self.terms {
            write!(f, ", {t}")?;
        }
        write!(f, "]")
    }
}

/// `head :- body, Var = #min{ value : condition }.`
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Debug)]
pub struct MinRule {
    pub head: Atom,
    pub body: Vec<Literal>,
    pub result: Symbol,
    pub value: Term,
    pub condition: Vec<Literal>,
    pub span: Span,
}

impl fmt::Display for MinRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} :- ", self.head)?;
        for l in &self.body {
            write!(f, "{l}, ")?;
        }
        write!(f, "{} = #min{{ {} : ", self.result, self.value)?;
        write_joined(f, &self.condition, ", ")?;
        write!(f, " }}.")
    }
}

#[derive(Clone, Default, PartialEq, Eq, Debug)]
pub struct Program {
    pub rules: Vec<Rule>,
    pub choices: Vec<ChoiceRule>,
    pub weaks: Vec<WeakConstraint>,
    /// `#min` aggregate rules. Not evaluated by the answer-set solver.
    pub mins: Vec<MinRule>,
}

impl Program {
    pub fn new() -> Self {
        Program::default()
    }

    pub fn extend(&mut self, other: Program) {
        self.rules.extend(other.rules);
        self.choices.extend(other.choices);
        self.weaks.extend(other.weaks);
        self.mins.extend(other.mins);
    }

    pub fn add_fact(&mut self, atom: Atom) {
        self.rules.push(Rule::fact(atom));
    }

    pub fn is_ground(&self) -> bool {
        self.rules.iter().all(Rule::is_ground)
            && self
                .choices
                .iter()
                .all(|c| c.elements.iter().all(Atom::is_ground) && c.body.iter().all(|l| l.atom.is_ground()))
            && self.weaks.iter().all(|w| {
                w.body.iter().all(|l| l.atom.is_ground())
                    && w.weight.is_ground()
                    && w.level.is_ground()
                    && w.terms.iter().all(Term::is_ground)
            })
            && self.mins.is_empty()
    }

    /// Every atom that occurs anywhere in the program.
    pub fn atoms(&self) -> BTreeSet<Atom> {
        let mut out = BTreeSet::new();
        for r in &self.rules {
            out.extend(r.head.iter().cloned());
            out.extend(r.body.iter().map(|l| l.atom.clone()));
        }
        for c in &self.choices {
            out.extend(c.elements.iter().cloned());
            out.extend(c.body.iter().map(|l| l.atom.clone()));
        }
        for w in &self.weaks {
            out.extend(w.body.iter().map(|l| l.atom.clone()));
        }
        out
    }
}

impl fmt::Display for Program {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for r in &self.rules {
            writeln!(f, "{r}")?;
        }
        for c in &self.choices {
            writeln!(f, "{c}")?;
        }
        for m in &self.mins {
            writeln!(f, "{m}")?;
        }
        for w in &self.weaks {
            writeln!(f, "{w}")?;
        }
        Ok(())
    }
}

/// A set of ground atoms in canonical order.
#[derive(Clone, Default, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Interpretation(pub BTreeSet<Atom>);

impl Interpretation {
    pub fn new() -> Self {
        Interpretation::default()
    }

    pub fn contains(&self, a: &Atom) -> bool {
        self.0.contains(a)
    }

    pub fn insert(&mut self, a: Atom) -> bool {
        self.0.insert(a)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &Atom> {
        self.0.iter()
    }
}

impl FromIterator<Atom> for Interpretation {
    fn from_iter<I: IntoIterator<Item = Atom>>(iter: I) -> Self {
        Interpretation(iter.into_iter().collect())
    }
}

impl fmt::Display for Interpretation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{{")?;
        for (i, a) in self.0.iter().enumerate() {
            if i > 0 {
                write!(f, ", ")?;
            }
            write!(f, "{a}")?;
        }
        write!(f, "}}")
    }
}

impl fmt::Debug for Interpretation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}
