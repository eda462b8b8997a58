use std::collections::BTreeMap;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Zero};

use super::lexer::{tokenize, Tok, Token};
use super::{ParseError, ParseErrorKind, SourceSpan};
use crate::formula::{ArithOp, CmpOp, Formula, Term, VarType};
use crate::model::{
    Component, Distribution, Initializer, Param, Service, ServiceRef, StateVar, Stmt, SystemModel,
    UsageProfile, DEFAULT_NORMAL_PRECISION,
};

const RESERVED: &[&str] = &[
    "component", "state", "int", "bool", "service", "requires", "ensures", "covered", "cost", "if",
    "abort", "repeat", "profile", "true", "false", "fun", "ABORT",
];

pub(crate) struct Parser {
    toks: Vec<Token>,
    pos: usize,
    file: String,
}

type PResult<T> = Result<T, ParseError>;

impl Parser {
    pub(crate) fn new(src: &str, file: &str) -> PResult<Parser> {
        Ok(Parser { toks: tokenize(src, file)?, pos: 0, file: file.to_string() })
    }

    pub(crate) fn peek(&self) -> &Tok {
        &self.toks[self.pos].tok
    }

    pub(crate) fn peek_at(&self, n: usize) -> &Tok {
        &self.toks[(self.pos + n).min(self.toks.len() - 1)].tok
    }

    fn advance(&mut self) -> &Token {
        let t = &self.toks[self.pos];
        if self.pos + 1 < self.toks.len() {
            self.pos += 1;
        }
        t
    }

    pub(crate) fn span(&self) -> SourceSpan {
        let t = &self.toks[self.pos];
        SourceSpan::new(&self.file, t.line, t.col, t.col + t.len)
    }

    pub(crate) fn error<T>(&self, message: impl Into<String>) -> PResult<T> {
        Err(ParseError::new(ParseErrorKind::Syntax, message, self.span()))
    }

    fn describe(&self) -> String {
        match self.peek() {
            Tok::Ident(s) | Tok::Num(s) => format!("`{s}`"),
            Tok::Sym(s) => format!("`{s}`"),
            Tok::Eof => "end of input".to_string(),
        }
    }

    pub(crate) fn at_sym(&self, sym: &str) -> bool {
        matches!(self.peek(), Tok::Sym(s) if *s == sym)
    }

    pub(crate) fn at_kw(&self, kw: &str) -> bool {
        matches!(self.peek(), Tok::Ident(s) if s == kw)
    }

    pub(crate) fn at_eof(&self) -> bool {
        matches!(self.peek(), Tok::Eof)
    }

    pub(crate) fn eat_sym(&mut self, sym: &str) -> bool {
        let hit = self.at_sym(sym);
        if hit {
            self.advance();
        }
        hit
    }

    pub(crate) fn eat_kw(&mut self, kw: &str) -> bool {
        let hit = self.at_kw(kw);
        if hit {
            self.advance();
        }
        hit
    }

    pub(crate) fn expect_sym(&mut self, sym: &str) -> PResult<()> {
        if self.eat_sym(sym) {
            Ok(())
        } else {
            self.error(format!("expected `{sym}`, found {}", self.describe()))
        }
    }

    pub(crate) fn expect_kw(&mut self, kw: &str) -> PResult<()> {
        if self.eat_kw(kw) {
            Ok(())
        } else {
            self.error(format!("expected `{kw}`, found {}", self.describe()))
        }
    }

    pub(crate) fn expect_eof(&mut self) -> PResult<()> {
        if self.at_eof() {
            Ok(())
        } else {
            self.error(format!("unexpected {}", self.describe()))
        }
    }

    pub(crate) fn ident(&mut self) -> PResult<String> {
        match self.peek().clone() {
            Tok::Ident(s) if !RESERVED.contains(&s.as_str()) => {
                self.advance();
                Ok(s)
            }
            _ => self.error(format!("expected identifier, found {}", self.describe())),
        }
    }

    /// `ID` or `ID.ID`.
    pub(crate) fn qname(&mut self) -> PResult<String> {
        let first = self.ident()?;
        if self.at_sym(".") {
            self.advance();
            let second = self.ident()?;
            return Ok(format!("{first}.{second}"));
        }
        Ok(first)
    }

    fn unsigned_int(&mut self) -> PResult<BigInt> {
        match self.peek().clone() {
            Tok::Num(s) if !s.contains('.') => {
                self.advance();
                Ok(s.parse().expect("digits"))
            }
            _ => self.error(format!("expected integer, found {}", self.describe())),
        }
    }

    pub(crate) fn int(&mut self) -> PResult<BigInt> {
        let neg = self.eat_sym("-");
        let v = self.unsigned_int()?;
        Ok(if neg { -v } else { v })
    }

    /// Integer, decimal, or `n/d`, optionally negated.
    pub(crate) fn rational(&mut self) -> PResult<BigRational> {
        let neg = self.eat_sym("-");
        let v = match self.peek().clone() {
            Tok::Num(s) => {
                let span = self.span();
                self.advance();
                let mut v = decimal(&s);
                if self.eat_sym("/") {
                    let d = self.unsigned_int()?;
                    if d.is_zero() {
                        return Err(ParseError::new(
                            ParseErrorKind::Syntax,
                            "zero denominator",
                            span,
                        ));
                    }
                    if !v.is_integer() {
                        return Err(ParseError::new(
                            ParseErrorKind::Syntax,
                            "fraction numerator must be an integer",
                            span,
                        ));
                    }
                    v /= BigRational::from_integer(d);
                }
                v
            }
            _ => return self.error(format!("expected number, found {}", self.describe())),
        };
        Ok(if neg { -v } else { v })
    }

    // ---- terms and formulas ----

    pub(crate) fn term(&mut self) -> PResult<Term> {
        let mut lhs = self.mul_term()?;
        loop {
            let op = if self.at_sym("+") {
                ArithOp::Add
            } else if self.at_sym("-") {
                ArithOp::Sub
            } else {
                return Ok(lhs);
            };
            self.advance();
            let rhs = self.mul_term()?;
            lhs = Term::bin(op, lhs, rhs);
        }
    }

    fn mul_term(&mut self) -> PResult<Term> {
        let mut lhs = self.unary_term()?;
        loop {
            let op = if self.at_sym("*") {
                ArithOp::Mul
            } else if self.at_sym("/") {
                ArithOp::Div
            } else if self.at_sym("%") {
                ArithOp::Rem
            } else {
                return Ok(lhs);
            };
            self.advance();
            let rhs = self.unary_term()?;
            lhs = Term::bin(op, lhs, rhs);
        }
    }

    fn unary_term(&mut self) -> PResult<Term> {
        if self.eat_sym("-") {
            // A minus directly on a literal folds into the literal.
            if let Tok::Num(_) = self.peek() {
                return Ok(Term::Int(-self.unsigned_int()?));
            }
            return Ok(Term::Neg(Box::new(self.unary_term()?)));
        }
        match self.peek().clone() {
            Tok::Num(_) => Ok(Term::Int(self.unsigned_int()?)),
            Tok::Ident(_) => Ok(Term::Var(self.qname()?)),
            Tok::Sym("(") => {
                self.advance();
                let t = self.term()?;
                self.expect_sym(")")?;
                Ok(t)
            }
            _ => self.error(format!("expected term, found {}", self.describe())),
        }
    }

    pub(crate) fn formula(&mut self) -> PResult<Formula> {
        let lhs = self.or_formula()?;
        if self.eat_sym("->") {
            let rhs = self.formula()?;
            return Ok(Formula::implies(lhs, rhs));
        }
        Ok(lhs)
    }

    fn or_formula(&mut self) -> PResult<Formula> {
        let mut parts = vec![self.and_formula()?];
        while self.eat_sym("||") || self.eat_sym("|") {
            parts.push(self.and_formula()?);
        }
        Ok(Formula::or(parts))
    }

    fn and_formula(&mut self) -> PResult<Formula> {
        let mut parts = vec![self.unary_formula()?];
        while self.eat_sym("&&") || self.eat_sym("&") {
            parts.push(self.unary_formula()?);
        }
        Ok(Formula::and(parts))
    }

    fn unary_formula(&mut self) -> PResult<Formula> {
        if self.eat_sym("!") {
            return Ok(Formula::not(self.unary_formula()?));
        }
        if self.eat_kw("true") {
            return Ok(Formula::Bool(true));
        }
        if self.eat_kw("false") {
            return Ok(Formula::Bool(false));
        }
        if self.at_sym("(") {
            // Either a parenthesized term starting a comparison or a
            // parenthesized formula; try the comparison first.
            let save = self.pos;
            if let Ok(f) = self.comparison() {
                return Ok(f);
            }
            self.pos = save;
            self.advance();
            let f = self.formula()?;
            self.expect_sym(")")?;
            return Ok(f);
        }
        self.comparison()
    }

    fn comparison(&mut self) -> PResult<Formula> {
        let lhs = self.term()?;
        let op = match self.peek() {
            Tok::Sym("==") | Tok::Sym("=") => CmpOp::Eq,
            Tok::Sym("!=") => CmpOp::Ne,
            Tok::Sym("<") => CmpOp::Lt,
            Tok::Sym("<=") => CmpOp::Le,
            Tok::Sym(">") => CmpOp::Gt,
            Tok::Sym(">=") => CmpOp::Ge,
            _ => return self.error(format!("expected comparison operator, found {}", self.describe())),
        };
        self.advance();
        let rhs = self.term()?;
        Ok(Formula::cmp(op, lhs, rhs))
    }

    // ---- distributions ----

    pub(crate) fn distribution(&mut self) -> PResult<Distribution> {
        let span = self.span();
        let fail = |e: crate::model::DistributionError| {
            ParseError::new(ParseErrorKind::Syntax, e.to_string(), span.clone())
        };
        if self.eat_kw("uniform") {
            self.expect_sym("(")?;
            let lo = self.small_int()?;
            self.expect_sym(",")?;
            let hi = self.small_int()?;
            self.expect_sym(")")?;
            return Distribution::uniform(lo, hi).map_err(fail);
        }
        if self.eat_kw("normal_d") {
            self.expect_sym("(")?;
            let mean = self.rational()?;
            self.expect_sym(",")?;
            let sd = self.rational()?;
            let mut precision = DEFAULT_NORMAL_PRECISION;
            if self.eat_sym(",") {
                let p = self.unsigned_int()?;
                precision = u64::try_from(&p).or_else(|_| self.error("precision out of range"))?;
            }
            self.expect_sym(")")?;
            return Distribution::normal(mean, sd, precision).map_err(fail);
        }
        if self.eat_kw("pmf") {
            self.expect_sym("{")?;
            let mut entries = Vec::new();
            loop {
                let v = self.int()?;
                self.expect_sym(":")?;
                let m = self.rational()?;
                entries.push((v, m));
                if !self.eat_sym(",") {
                    break;
                }
            }
            self.expect_sym("}")?;
            return Distribution::explicit(entries).map_err(fail);
        }
        self.error(format!("expected distribution, found {}", self.describe()))
    }

    fn small_int(&mut self) -> PResult<i64> {
        let v = self.int()?;
        i64::try_from(&v).or_else(|_| self.error("integer out of range"))
    }

    // ---- statements ----

    fn stmts_until_brace(&mut self, calls: &mut Vec<(ServiceRef, SourceSpan)>) -> PResult<Vec<Stmt>> {
        let mut out = Vec::new();
        while !self.at_sym("}") {
            if self.at_eof() {
                return self.error("expected `}`");
            }
            out.push(self.stmt(calls)?);
        }
        self.advance();
        Ok(out)
    }

    fn stmt(&mut self, calls: &mut Vec<(ServiceRef, SourceSpan)>) -> PResult<Stmt> {
        if self.eat_kw("repeat") {
            let span = self.span();
            let n = self.unsigned_int()?;
            let count = match u32::try_from(&n) {
                Ok(c) if c >= 1 => c,
                _ => {
                    return Err(ParseError::new(
                        ParseErrorKind::Syntax,
                        "repeat count must be a positive integer",
                        span,
                    ))
                }
            };
            self.expect_sym("{")?;
            let body = self.stmts_until_brace(calls)?;
            return Ok(Stmt::Repeat { count, body });
        }
        let guard = if self.eat_kw("if") {
            self.expect_sym("(")?;
            let g = self.formula()?;
            self.expect_sym(")")?;
            g
        } else {
            Formula::Bool(true)
        };
        self.simple_stmt(guard, calls)
    }

    fn simple_stmt(
        &mut self,
        guard: Formula,
        calls: &mut Vec<(ServiceRef, SourceSpan)>,
    ) -> PResult<Stmt> {
        if self.eat_kw("abort") {
            self.expect_sym(";")?;
            return Ok(Stmt::Abort { guard });
        }
        let span = self.span();
        let name = self.qname()?;
        if self.at_sym("(") {
            let service = self.service_ref(&name, span.clone())?;
            let args = self.args()?;
            self.expect_sym(";")?;
            calls.push((service.clone(), span));
            return Ok(Stmt::Call { guard, target: None, service, args });
        }
        if self.eat_sym("~") {
            let dist = self.distribution()?;
            self.expect_sym(";")?;
            return Ok(Stmt::Sample { guard, target: name, dist });
        }
        self.expect_sym("=")?;
        let is_call = matches!(self.peek(), Tok::Ident(_))
            && matches!(self.peek_at(1), Tok::Sym("."))
            && matches!(self.peek_at(2), Tok::Ident(_))
            && matches!(self.peek_at(3), Tok::Sym("("));
        if is_call {
            let span = self.span();
            let callee = self.qname()?;
            let service = self.service_ref(&callee, span.clone())?;
            let args = self.args()?;
            self.expect_sym(";")?;
            calls.push((service.clone(), span));
            return Ok(Stmt::Call { guard, target: Some(name), service, args });
        }
        let value = self.term()?;
        self.expect_sym(";")?;
        Ok(Stmt::Assign { guard, target: name, value })
    }

    fn service_ref(&self, name: &str, span: SourceSpan) -> PResult<ServiceRef> {
        ServiceRef::parse(name).ok_or_else(|| {
            ParseError::new(
                ParseErrorKind::Syntax,
                format!("calls must name `Component.service`, found `{name}`"),
                span,
            )
        })
    }

    pub(crate) fn args(&mut self) -> PResult<Vec<Term>> {
        self.expect_sym("(")?;
        let mut args = Vec::new();
        if !self.at_sym(")") {
            loop {
                args.push(self.term()?);
                if !self.eat_sym(",") {
                    break;
                }
            }
        }
        self.expect_sym(")")?;
        Ok(args)
    }

    pub(crate) fn var_type(&mut self) -> PResult<VarType> {
        if self.eat_kw("int") {
            Ok(VarType::Int)
        } else if self.eat_kw("bool") {
            Ok(VarType::Bool)
        } else {
            self.error(format!("expected `int` or `bool`, found {}", self.describe()))
        }
    }

    // ---- declarations ----

    fn component(&mut self, calls: &mut Vec<(ServiceRef, SourceSpan)>) -> PResult<Component> {
        self.expect_kw("component")?;
        let name = self.ident()?;
        self.expect_sym("{")?;
        let mut state = Vec::new();
        let mut seen: BTreeMap<String, ()> = BTreeMap::new();
        while self.at_kw("state") {
            self.advance();
            let ty = self.var_type()?;
            let span = self.span();
            let var = self.ident()?;
            if seen.insert(var.clone(), ()).is_some() {
                return Err(ParseError::new(
                    ParseErrorKind::DuplicateName,
                    format!("state variable `{var}` declared twice in `{name}`"),
                    span,
                ));
            }
            self.expect_sym("=")?;
            let init = if matches!(self.peek(), Tok::Num(_) | Tok::Sym("-")) {
                Initializer::Const(self.int()?)
            } else if self.eat_kw("true") {
                Initializer::Const(BigInt::one())
            } else if self.eat_kw("false") {
                Initializer::Const(BigInt::zero())
            } else {
                Initializer::Dist(self.distribution()?)
            };
            self.expect_sym(";")?;
            state.push(StateVar { name: var, ty, init });
        }
        let mut services: Vec<Service> = Vec::new();
        while self.at_kw("service") {
            self.advance();
            let span = self.span();
            let sname = self.ident()?;
            if services.iter().any(|s| s.name == sname) {
                return Err(ParseError::new(
                    ParseErrorKind::DuplicateName,
                    format!("service `{sname}` declared twice in `{name}`"),
                    span,
                ));
            }
            self.expect_sym("(")?;
            let mut params: Vec<Param> = Vec::new();
            if !self.at_sym(")") {
                loop {
                    let ty = self.var_type()?;
                    let span = self.span();
                    let p = self.ident()?;
                    if params.iter().any(|q| q.name == p) {
                        return Err(ParseError::new(
                            ParseErrorKind::DuplicateName,
                            format!("parameter `{p}` declared twice"),
                            span,
                        ));
                    }
                    params.push(Param { name: p, ty });
                    if !self.eat_sym(",") {
                        break;
                    }
                }
            }
            self.expect_sym(")")?;
            let mut svc = Service::new(sname, params, Vec::new());
            if self.eat_kw("requires") {
                svc.pre = self.formula()?;
            }
            if self.eat_kw("ensures") {
                svc.post = self.formula()?;
            }
            if self.eat_kw("covered") {
                svc.cov = self.formula()?;
            }
            if self.eat_kw("cost") {
                let span = self.span();
                svc.cost = self.rational()?;
                if svc.cost < BigRational::zero() {
                    return Err(ParseError::new(
                        ParseErrorKind::Syntax,
                        "error cost must be non-negative",
                        span,
                    ));
                }
            }
            self.expect_sym("{")?;
            svc.body = self.stmts_until_brace(calls)?;
            services.push(svc);
        }
        self.expect_sym("}")?;
        Ok(Component { name, state, services })
    }

    pub(crate) fn model(&mut self) -> PResult<SystemModel> {
        let mut calls = Vec::new();
        let mut components: Vec<Component> = Vec::new();
        if self.at_eof() {
            return self.error("a model needs at least one component");
        }
        while !self.at_eof() {
            let span = self.toks.get(self.pos + 1).map(|t| {
                SourceSpan::new(&self.file, t.line, t.col, t.col + t.len)
            });
            let c = self.component(&mut calls)?;
            if components.iter().any(|d| d.name == c.name) {
                return Err(ParseError::new(
                    ParseErrorKind::DuplicateName,
                    format!("component `{}` declared twice", c.name),
                    span.unwrap_or_else(|| self.span()),
                ));
            }
            components.push(c);
        }
        let model = SystemModel { components };
        for (r, span) in calls {
            if model.service(&r).is_none() {
                return Err(ParseError::new(
                    ParseErrorKind::UnknownReference,
                    format!("unknown service `{r}`"),
                    span,
                ));
            }
        }
        Ok(model)
    }

    pub(crate) fn profile(&mut self) -> PResult<UsageProfile> {
        self.expect_kw("profile")?;
        let name = self.ident()?;
        self.expect_sym("{")?;
        let body = self.stmts_until_brace(&mut Vec::new())?;
        self.expect_eof()?;
        Ok(UsageProfile { name, body })
    }
}

fn decimal(s: &str) -> BigRational {
    match s.split_once('.') {
        None => BigRational::from_integer(s.parse().expect("digits")),
        Some((int, frac)) => {
            let num: BigInt = format!("{int}{frac}").parse().expect("digits");
            let den = num_traits::pow(BigInt::from(10), frac.len());
            BigRational::new(num, den)
        }
    }
}

/// Parses a formula in the shared concrete syntax.
///
/// ```
/// let f = covprob::dsl::parse_formula("!(load >= 0) | n <= load").unwrap();
/// assert_eq!(f.to_string(), "!(load >= 0) || n <= load");
/// ```
pub fn parse_formula(src: &str) -> Result<Formula, ParseError> {
    let mut p = Parser::new(src, "<formula>")?;
    let f = p.formula()?;
    p.expect_eof()?;
    Ok(f)
}

pub fn parse_term(src: &str) -> Result<Term, ParseError> {
    let mut p = Parser::new(src, "<term>")?;
    let t = p.term()?;
    p.expect_eof()?;
    Ok(t)
}

/// Parses a model file: one or more `component` blocks.
pub fn parse_model(src: &str) -> Result<SystemModel, ParseError> {
    parse_model_named(src, "<model>")
}

/// Like [`parse_model`], with `file` recorded in error spans.
pub fn parse_model_named(src: &str, file: &str) -> Result<SystemModel, ParseError> {
    Parser::new(src, file)?.model()
}

/// Parses a profile file: a single `profile` block.
pub fn parse_profile(src: &str) -> Result<UsageProfile, ParseError> {
    parse_profile_named(src, "<profile>")
}

pub fn parse_profile_named(src: &str, file: &str) -> Result<UsageProfile, ParseError> {
    Parser::new(src, file)?.profile()
}
