//! Canonical printer. Sections come out in a fixed order (params, model,
//! behaviors, objects, requirements, terminations) with declaration order
//! preserved inside each section and four-space indentation.

use alloc::string::String;
use core::fmt::Write;

use super::ast::*;

pub fn render_tree(tree: &ScenarioTree) -> String {
    let mut out = String::new();
    for p in &tree.params {
        let _ = writeln!(out, "param {} = {}", p.name.value, expr(&p.value));
    }
    if let Some(m) = &tree.model_import {
        let _ = writeln!(out, "model {}", m.value);
    }
    for b in &tree.behaviors {
        if !out.is_empty() {
            out.push('\n');
        }
        let params: alloc::vec::Vec<String> = b
            .params
            .iter()
            .map(|p| match &p.default {
                Some(d) => alloc::format!("{}={}", p.name.value, expr(d)),
                None => p.name.value.clone(),
            })
            .collect();
        let _ = writeln!(out, "behavior {}({}):", b.name.value, params.join(", "));
        block(&mut out, &b.body, 1);
    }
    if !tree.objects.is_empty() && !out.is_empty() {
        out.push('\n');
    }
    for o in &tree.objects {
        let _ = write!(out, "{} = new {}", o.name.value, o.class.value);
        let mut first = true;
        let mut sep = |out: &mut String| {
            out.push_str(if first { " " } else { ", " });
            first = false;
        };
        for s in &o.specifiers {
            sep(&mut out);
            let _ = write!(out, "{} {}", s.kind.value.keyword(), expr(&s.target));
            if let Some(d) = &s.distance {
                let _ = write!(out, " by {}", expr(d));
            }
        }
        for p in &o.properties {
            sep(&mut out);
            let _ = write!(out, "with {} {}", p.name.value, expr(&p.value));
        }
        out.push('\n');
    }
    if !(tree.requirements.is_empty() && tree.terminations.is_empty()) && !out.is_empty() {
        out.push('\n');
    }
    for r in &tree.requirements {
        let _ = writeln!(out, "require {}", expr(r));
    }
    for t in &tree.terminations {
        match t {
            Termination::When(e) => {
                let _ = writeln!(out, "terminate when {}", expr(e));
            }
            Termination::After { amount, unit } => {
                let _ = writeln!(out, "terminate after {} {}", expr(amount), unit.as_str());
            }
        }
    }
    out
}

fn indent(out: &mut String, level: usize) {
    for _ in 0..level {
        out.push_str("    ");
    }
}

fn block(out: &mut String, stmts: &[Stmt], level: usize) {
    if stmts.is_empty() {
        indent(out, level);
        out.push_str("pass\n");
    }
    for s in stmts {
        stmt(out, s, level);
    }
}

fn stmt(out: &mut String, s: &Stmt, level: usize) {
    indent(out, level);
    match s {
        Stmt::Do { call, modifier } => {
            let _ = write!(out, "do {}", expr(call));
            match modifier {
                Some(DoModifier::For { amount, unit }) => {
                    let _ = write!(out, " for {} {}", expr(amount), unit.as_str());
                }
                Some(DoModifier::Until(c)) => {
                    let _ = write!(out, " until {}", expr(c));
                }
                None => {}
            }
            out.push('\n');
        }
        Stmt::Take(actions) => {
            let parts: alloc::vec::Vec<String> = actions.iter().map(expr).collect();
            let _ = writeln!(out, "take {}", parts.join(", "));
        }
        Stmt::Wait => out.push_str("wait\n"),
        Stmt::Terminate => out.push_str("terminate\n"),
        Stmt::Pass => out.push_str("pass\n"),
        Stmt::Assign { target, value } => {
            let _ = writeln!(out, "{} = {}", target.value, expr(value));
        }
        Stmt::While { cond, body } => {
            let _ = writeln!(out, "while {}:", expr(cond));
            block(out, body, level + 1);
        }
        Stmt::If { branches, orelse } => {
            for (i, (cond, body)) in branches.iter().enumerate() {
                if i > 0 {
                    indent(out, level);
                }
                let kw = if i == 0 { "if" } else { "elif" };
                let _ = writeln!(out, "{kw} {}:", expr(cond));
                block(out, body, level + 1);
            }
            if let Some(body) = orelse {
                indent(out, level);
                out.push_str("else:\n");
                block(out, body, level + 1);
            }
        }
        Stmt::Try { body, handlers } => {
            out.push_str("try:\n");
            block(out, body, level + 1);
            for h in handlers {
                indent(out, level);
                let _ = writeln!(out, "interrupt when {}:", expr(&h.cond));
                block(out, &h.body, level + 1);
            }
        }
    }
}

pub fn expr(e: &Expr) -> String {
    let mut out = String::new();
    write_expr(&mut out, e);
    out
}

fn operand(out: &mut String, e: &Expr, min: u8) {
    if e.precedence() < min {
        out.push('(');
        write_expr(out, e);
        out.push(')');
    } else {
        write_expr(out, e);
    }
}

fn write_expr(out: &mut String, e: &Expr) {
    match e {
        Expr::Number(n) => out.push_str(n),
        Expr::Str(s) => {
            out.push('\'');
            for c in s.value.chars() {
                match c {
                    '\'' => out.push_str("\\'"),
                    '\\' => out.push_str("\\\\"),
                    '\n' => out.push_str("\\n"),
                    '\t' => out.push_str("\\t"),
                    c => out.push(c),
                }
            }
            out.push('\'');
        }
        Expr::Bool(b) => out.push_str(if *b { "True" } else { "False" }),
        Expr::None => out.push_str("None"),
        Expr::Name(n) => out.push_str(&n.value),
        Expr::Attr { base, attr } => {
            operand(out, base, PREC_POSTFIX);
            out.push('.');
            out.push_str(&attr.value);
        }
        Expr::Call { callee, args } => {
            operand(out, callee, PREC_POSTFIX);
            out.push('(');
            for (i, a) in args.iter().enumerate() {
                if i > 0 {
                    out.push_str(", ");
                }
                if let Some(n) = &a.name {
                    out.push_str(&n.value);
                    out.push('=');
                }
                write_expr(out, &a.value);
            }
            out.push(')');
        }
        Expr::Tuple(items) => {
            out.push('(');
            for (i, it) in items.iter().enumerate() {
                if i > 0 {
                    out.push_str(", ");
                }
                write_expr(out, it);
            }
            if items.len() == 1 {
                out.push(',');
            }
            out.push(')');
        }
        Expr::List(items) => {
            out.push('[');
            for (i, it) in items.iter().enumerate() {
                if i > 0 {
                    out.push_str(", ");
                }
                write_expr(out, it);
            }
            out.push(']');
        }
        Expr::Unary { op: UnaryOp::Neg, operand: inner } => {
            out.push('-');
            operand(out, inner, PREC_UNARY);
        }
        Expr::Unary { op: UnaryOp::Not, operand: inner } => {
            out.push_str("not ");
            operand(out, inner, PREC_NOT);
        }
        Expr::Binary { op, lhs, rhs } => {
            let p = op.precedence();
            operand(out, lhs, p);
            out.push(' ');
            out.push_str(op.as_str());
            out.push(' ');
            operand(out, rhs, p + 1);
        }
        Expr::Degrees(inner) => {
            operand(out, inner, PREC_POSTFIX);
            out.push_str(" deg");
        }
        Expr::Distance { from, to } => {
            out.push_str("(distance ");
            if let Some(f) = from {
                out.push_str("from ");
                operand(out, f, PREC_ADDITIVE);
                out.push(' ');
            }
            out.push_str("to ");
            operand(out, to, PREC_ADDITIVE);
            out.push(')');
        }
    }
}
