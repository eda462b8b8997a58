//! Flat probabilistic programs.
//!
//! Each service becomes a function whose first statement aborts when the
//! coverage region does not hold; the usage profile becomes `main`. State
//! variables are global and always written qualified. Contracts and error
//! costs have no counterpart and are dropped.

use std::fmt::Write;

use super::parser::Parser;
use super::{ParseError, ParseErrorKind};
use crate::formula::{Formula, Term};
use crate::model::{
    unroll, Component, Initializer, Param, Resolved, Service, ServiceRef, StateVar, Stmt,
    SystemModel, UsageProfile,
};

/// A program reparsed from the flat format.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct QppProgram {
    pub model: SystemModel,
    pub profile: UsageProfile,
}

fn qualify<'m>(
    model: &'m SystemModel,
    scope: Option<&ServiceRef>,
) -> impl Fn(&str) -> Option<Term> + 'm {
    let scope = scope.cloned();
    move |name| {
        let r = match &scope {
            Some(s) => model.resolve_in_service(s, name),
            None => model.resolve_in_profile(name),
        };
        match r {
            Ok(Resolved::State(q)) => Some(Term::Var(q)),
            _ => None,
        }
    }
}

fn qualified_target(model: &SystemModel, scope: Option<&ServiceRef>, name: &str) -> String {
    match qualify(model, scope)(name) {
        Some(Term::Var(q)) => q,
        _ => name.to_string(),
    }
}

fn emit_stmts(out: &mut String, model: &SystemModel, scope: Option<&ServiceRef>, body: &[Stmt]) {
    let q = qualify(model, scope);
    for s in body {
        out.push_str("    ");
        if let Some(g) = s.guard() {
            if *g != Formula::Bool(true) {
                write!(out, "if ({}): ", g.substitute(&q)).unwrap();
            }
        }
        match s {
            Stmt::Assign { target, value, .. } => {
                let t = qualified_target(model, scope, target);
                writeln!(out, "{t} = {};", value.substitute(&q)).unwrap();
            }
            Stmt::Call { target, service, args, .. } => {
                if let Some(t) = target {
                    write!(out, "{} = ", qualified_target(model, scope, t)).unwrap();
                }
                let args: Vec<String> = args.iter().map(|a| a.substitute(&q).to_string()).collect();
                writeln!(out, "{service}({});", args.join(", ")).unwrap();
            }
            Stmt::Abort { .. } => out.push_str("ABORT;\n"),
            Stmt::Sample { target, dist, .. } => {
                writeln!(out, "{} ~ {dist};", qualified_target(model, scope, target)).unwrap();
            }
            Stmt::Repeat { .. } => unreachable!("bodies are unrolled before export"),
        }
    }
}

/// Renders the model and profile as a flat probabilistic program.
///
/// ```
/// use covprob::dsl::{export_qpp, parse_model, parse_profile};
///
/// let m = parse_model("component A { service f(int x) covered x > 0 { } }").unwrap();
/// let p = parse_profile("profile p { v ~ uniform(0, 1); A.f(v); }").unwrap();
/// let text = export_qpp(&m, &p);
/// assert!(text.contains("fun A.f(int x):\n    if (!(x > 0)): ABORT;\n"));
/// ```
pub fn export_qpp(model: &SystemModel, profile: &UsageProfile) -> String {
    let mut out = String::new();
    for c in &model.components {
        for v in &c.state {
            match &v.init {
                Initializer::Const(k) => writeln!(out, "{} {}.{} = {k};", v.ty, c.name, v.name),
                Initializer::Dist(d) => writeln!(out, "{} {}.{} ~ {d};", v.ty, c.name, v.name),
            }
            .unwrap();
        }
    }
    for c in &model.components {
        for s in &c.services {
            let r = ServiceRef::new(&c.name, &s.name);
            let params: Vec<String> =
                s.params.iter().map(|p| format!("{} {}", p.ty, p.name)).collect();
            writeln!(out, "\nfun {r}({}):", params.join(", ")).unwrap();
            let cov = s.cov.substitute(&qualify(model, Some(&r)));
            writeln!(out, "    if (!({cov})): ABORT;").unwrap();
            emit_stmts(&mut out, model, Some(&r), &unroll(&s.body));
        }
    }
    out.push_str("\nfun main():\n");
    emit_stmts(&mut out, model, None, &unroll(&profile.body));
    out
}

fn qpp_stmt(p: &mut Parser) -> Result<Stmt, ParseError> {
    let guard = if p.eat_kw("if") {
        p.expect_sym("(")?;
        let g = p.formula()?;
        p.expect_sym(")")?;
        p.expect_sym(":")?;
        g
    } else {
        Formula::Bool(true)
    };
    if p.eat_kw("ABORT") {
        p.expect_sym(";")?;
        return Ok(Stmt::Abort { guard });
    }
    let span = p.span();
    let name = p.qname()?;
    if p.at_sym("(") {
        let service = ServiceRef::parse(&name)
            .ok_or_else(|| ParseError::new(ParseErrorKind::Syntax, "expected `C.f(...)`", span))?;
        let args = p.args()?;
        p.expect_sym(";")?;
        return Ok(Stmt::Call { guard, target: None, service, args });
    }
    if p.eat_sym("~") {
        let dist = p.distribution()?;
        p.expect_sym(";")?;
        return Ok(Stmt::Sample { guard, target: name, dist });
    }
    p.expect_sym("=")?;
    if let Some(service) = call_ahead(p) {
        p.qname()?;
        let args = p.args()?;
        p.expect_sym(";")?;
        return Ok(Stmt::Call { guard, target: Some(name), service, args });
    }
    let value = p.term()?;
    p.expect_sym(";")?;
    Ok(Stmt::Assign { guard, target: name, value })
}

fn call_ahead(p: &Parser) -> Option<ServiceRef> {
    use super::lexer::Tok;
    match (p.peek(), p.peek_at(1), p.peek_at(2), p.peek_at(3)) {
        (Tok::Ident(c), Tok::Sym("."), Tok::Ident(s), Tok::Sym("(")) => {
            Some(ServiceRef::new(c, s))
        }
        _ => None,
    }
}

fn component_mut<'a>(components: &'a mut Vec<Component>, name: &str) -> &'a mut Component {
    if let Some(i) = components.iter().position(|c| c.name == name) {
        return &mut components[i];
    }
    components.push(Component { name: name.to_string(), state: Vec::new(), services: Vec::new() });
    components.last_mut().unwrap()
}

/// Parses the flat format back into a model and profile. The coverage
/// region of each function is recovered from its leading guarded abort;
/// contracts become `true`.
pub fn parse_qpp(text: &str) -> Result<QppProgram, ParseError> {
    let mut p = Parser::new(text, "<qpp>")?;
    let mut components: Vec<Component> = Vec::new();
    while p.at_kw("int") || p.at_kw("bool") {
        let ty = p.var_type()?;
        let span = p.span();
        let name = p.qname()?;
        let Some((c, v)) = name.split_once('.') else {
            return Err(ParseError::new(
                ParseErrorKind::Syntax,
                "global variables must be qualified",
                span,
            ));
        };
        let init = if p.eat_sym("~") {
            Initializer::Dist(p.distribution()?)
        } else {
            p.expect_sym("=")?;
            Initializer::Const(p.int()?)
        };
        p.expect_sym(";")?;
        component_mut(&mut components, c).state.push(StateVar { name: v.to_string(), ty, init });
    }
    let mut main = None;
    while !p.at_eof() {
        p.expect_kw("fun")?;
        let span = p.span();
        let name = p.qname()?;
        p.expect_sym("(")?;
        let mut params = Vec::new();
        if !p.at_sym(")") {
            loop {
                let ty = p.var_type()?;
                params.push(Param { name: p.ident()?, ty });
                if !p.eat_sym(",") {
                    break;
                }
            }
        }
        p.expect_sym(")")?;
        p.expect_sym(":")?;
        let mut body = Vec::new();
        while !p.at_eof() && !p.at_kw("fun") {
            body.push(qpp_stmt(&mut p)?);
        }
        if name == "main" {
            if main.is_some() || !params.is_empty() {
                return Err(ParseError::new(ParseErrorKind::DuplicateName, "bad `main`", span));
            }
            main = Some(body);
            continue;
        }
        let Some(r) = ServiceRef::parse(&name) else {
            return Err(ParseError::new(
                ParseErrorKind::Syntax,
                "functions other than `main` must be named `Component.service`",
                span,
            ));
        };
        let cov = match body.first() {
            Some(Stmt::Abort { guard: Formula::Not(inner) }) => {
                let cov = (**inner).clone();
                body.remove(0);
                cov
            }
            _ => Formula::Bool(true),
        };
        let comp = component_mut(&mut components, &r.component);
        if comp.services.iter().any(|s| s.name == r.service) {
            return Err(ParseError::new(
                ParseErrorKind::DuplicateName,
                format!("function `{r}` defined twice"),
                span,
            ));
        }
        let mut svc = Service::new(r.service, params, body);
        svc.cov = cov;
        comp.services.push(svc);
    }
    let Some(body) = main else {
        return p.error("missing `fun main()`");
    };
    Ok(QppProgram {
        model: SystemModel { components },
        profile: UsageProfile { name: "main".to_string(), body },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dsl::{parse_model, parse_profile};

    #[test]
    fn trivial_regions_render_as_true_guards() {
        let m = parse_model(
            "component A { state int k = 0; service f() { k = k + 1; } service g(int x) { A.f(); } }",
        )
        .unwrap();
        let p = parse_profile("profile p { A.g(1); }").unwrap();
        let text = export_qpp(&m, &p);
        assert_eq!(text.matches("if (!(true)): ABORT;").count(), 2);
        assert!(text.starts_with("int A.k = 0;\n"));
        assert!(text.contains("    A.k = A.k + 1;\n"));
    }

    #[test]
    fn round_trip_recovers_regions() {
        let m = parse_model(
            "component N { state int load = uniform(0, 2);
               service use(int n) requires load >= 0 covered n <= load { load = load - n; if (load > 5) abort; } }",
        )
        .unwrap();
        let p = parse_profile("profile p { repeat 2 { d ~ pmf{0: 1/2, 3: 1/2}; if (d >= 0) N.use(d); } }")
            .unwrap();
        let back = parse_qpp(&export_qpp(&m, &p)).unwrap();
        let svc = back.model.service(&ServiceRef::new("N", "use")).unwrap();
        assert_eq!(svc.cov.to_string(), "n <= N.load");
        assert_eq!(svc.pre, Formula::Bool(true));
        assert_eq!(svc.body.len(), 2);
        assert_eq!(back.profile.body.len(), 4);
        // Exporting the reparsed program is a fixed point.
        assert_eq!(export_qpp(&back.model, &back.profile), export_qpp(&m, &p));
    }

    #[test]
    fn missing_main() {
        assert!(parse_qpp("int A.x = 0;\nfun A.f():\n").is_err());
    }
}
