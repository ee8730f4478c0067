use std::fmt::Write;

use super::ast::*;

/// Render a program as MiniC source that parses back to the same AST.
pub fn pretty_print(p: &Program) -> String {
    let mut out = String::new();
    for a in &p.annotations {
        let head = match a.kind {
            AnnotationKind::Pre => "pre".to_string(),
            AnnotationKind::Post => "post".to_string(),
            AnnotationKind::GoldInvariant(id) => format!("gold_invariant[{id}]"),
        };
        let _ = writeln!(out, "//@ {head}: {}", a.formula);
    }
    let _ = writeln!(out, "int {}() {{", p.name);
    for d in &p.decls {
        let _ = writeln!(out, "  int {d};");
    }
    block(&mut out, &p.body, 1);
    out.push_str("}\n");
    out
}

/// Render a statement list without the function wrapper.
pub fn print_stmts(stmts: &[Stmt], indent: usize) -> String {
    let mut out = String::new();
    block(&mut out, stmts, indent);
    out
}

fn block(out: &mut String, stmts: &[Stmt], depth: usize) {
    for s in stmts {
        stmt(out, s, depth);
    }
}

fn stmt(out: &mut String, s: &Stmt, depth: usize) {
    let pad = "  ".repeat(depth);
    match s {
        Stmt::If { cond, then_branch, else_branch } => {
            let _ = writeln!(out, "{pad}if ({cond}) {{");
            block(out, then_branch, depth + 1);
            if else_branch.is_empty() {
                let _ = writeln!(out, "{pad}}}");
            } else {
                let _ = writeln!(out, "{pad}}} else {{");
                block(out, else_branch, depth + 1);
                let _ = writeln!(out, "{pad}}}");
            }
        }
        Stmt::While { cond, body, .. } => {
            let _ = writeln!(out, "{pad}while ({cond}) {{");
            block(out, body, depth + 1);
            let _ = writeln!(out, "{pad}}}");
        }
        other => {
            let _ = writeln!(out, "{pad}{other}");
        }
    }
}

#[cfg(test)]
mod tests {
    use super::super::parse_program;
    use super::*;

    fn round_trip(src: &str) {
        let p = parse_program(src).unwrap();
        let text = pretty_print(&p);
        let q = parse_program(&text).unwrap_or_else(|e| panic!("{e}\n{text}"));
        assert_eq!(p, q, "{text}");
    }

    #[test]
    fn single_loop_round_trip() {
        round_trip("int x; x = 0; while (x < 5) { x = x + 1; } assert(x == 5);");
    }

    #[test]
    fn nested_if_round_trip() {
        round_trip(
            "int a, x, y; while (x < 10) { if (a > 1) { y = y - (x - 1); } else if (!(y == 2) || a < -3) { y = -(2); } x = 2 * x + -1; }",
        );
    }

    #[test]
    fn annotations_are_reemitted_first() {
        let p = parse_program("//@ pre: n >= 0\n//@ post: x == n\nint x, n; x = 0;").unwrap();
        let text = pretty_print(&p);
        let lines: Vec<_> = text.lines().collect();
        assert_eq!(lines[0], "//@ pre: n >= 0");
        assert_eq!(lines[1], "//@ post: x == n");
        assert_eq!(lines[2], "int main() {");
        round_trip("//@ pre: n >= 0\n//@ post: x == n\nint x, n; x = 0;");
    }
}
