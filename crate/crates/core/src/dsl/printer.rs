use std::fmt::Write;

use num_traits::One;

use crate::formula::Formula;
use crate::model::{fmt_rational, Initializer, Stmt, SystemModel, UsageProfile};

/// Renders a model in the canonical concrete syntax. Defaults (`true`
/// contracts and regions, unit cost) are omitted.
pub fn print_model(model: &SystemModel) -> String {
    let mut out = String::new();
    for (i, c) in model.components.iter().enumerate() {
        if i > 0 {
            out.push('\n');
        }
        writeln!(out, "component {} {{", c.name).unwrap();
        for v in &c.state {
            let init = match &v.init {
                Initializer::Const(k) => k.to_string(),
                Initializer::Dist(d) => d.to_string(),
            };
            writeln!(out, "    state {} {} = {init};", v.ty, v.name).unwrap();
        }
        for (j, s) in c.services.iter().enumerate() {
            if j > 0 || !c.state.is_empty() {
                out.push('\n');
            }
            let params: Vec<String> =
                s.params.iter().map(|p| format!("{} {}", p.ty, p.name)).collect();
            write!(out, "    service {}({})", s.name, params.join(", ")).unwrap();
            let mut clauses = Vec::new();
            if s.pre != Formula::Bool(true) {
                clauses.push(format!("requires {}", s.pre));
            }
            if s.post != Formula::Bool(true) {
                clauses.push(format!("ensures {}", s.post));
            }
            if s.cov != Formula::Bool(true) {
                clauses.push(format!("covered {}", s.cov));
            }
            if !s.cost.is_one() {
                clauses.push(format!("cost {}", fmt_rational(&s.cost)));
            }
            if clauses.is_empty() {
                out.push_str(" {\n");
            } else {
                out.push('\n');
                for cl in clauses {
                    writeln!(out, "        {cl}").unwrap();
                }
                out.push_str("    {\n");
            }
            print_into(&mut out, &s.body, 2);
            out.push_str("    }\n");
        }
        out.push_str("}\n");
    }
    out
}

pub fn print_profile(profile: &UsageProfile) -> String {
    let mut out = format!("profile {} {{\n", profile.name);
    print_into(&mut out, &profile.body, 1);
    out.push_str("}\n");
    out
}

/// Renders statements one per line at the given indentation depth.
pub fn print_stmts(stmts: &[Stmt], depth: usize) -> String {
    let mut out = String::new();
    print_into(&mut out, stmts, depth);
    out
}

fn print_into(out: &mut String, stmts: &[Stmt], depth: usize) {
    let pad = "    ".repeat(depth);
    for s in stmts {
        out.push_str(&pad);
        if let Some(g) = s.guard() {
            if *g != Formula::Bool(true) {
                write!(out, "if ({g}) ").unwrap();
            }
        }
        match s {
            Stmt::Assign { target, value, .. } => writeln!(out, "{target} = {value};").unwrap(),
            Stmt::Call { target, service, args, .. } => {
                if let Some(t) = target {
                    write!(out, "{t} = ").unwrap();
                }
                let args: Vec<String> = args.iter().map(|a| a.to_string()).collect();
                writeln!(out, "{service}({});", args.join(", ")).unwrap();
            }
            Stmt::Abort { .. } => out.push_str("abort;\n"),
            Stmt::Sample { target, dist, .. } => writeln!(out, "{target} ~ {dist};").unwrap(),
            Stmt::Repeat { count, body } => {
                writeln!(out, "repeat {count} {{").unwrap();
                print_into(out, body, depth + 1);
                writeln!(out, "{pad}}}").unwrap();
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dsl::{parse_model, parse_profile};

    const MODEL: &str = "\
component Network {
    state int load = 0;

    service addLoad(int n)
        requires load >= 0
        ensures load >= 0
    {
        load = load + n;
    }

    service useLoad(int n)
        covered n <= load
        cost 5/2
    {
        if (n > 0) load = load - n;
    }
}

component Gauge {
    state bool on = pmf{0: 1/3, 1: 2/3};
    state int level = normal_d(3/2, 1, 1000000);

    service read() {
        result = Network.load;
    }
}
";

    #[test]
    fn model_round_trip_is_textual() {
        let m = parse_model(MODEL).unwrap();
        assert_eq!(print_model(&m), MODEL);
    }

    #[test]
    fn profile_round_trip() {
        let src = "profile main {\n    load = 0;\n    repeat 2 {\n        w ~ uniform(5, 9);\n        if (w >= 0) Network.addLoad(w * 3 / 4);\n    }\n    abort;\n}\n";
        let p = parse_profile(src).unwrap();
        assert_eq!(print_profile(&p), src);
    }
}
