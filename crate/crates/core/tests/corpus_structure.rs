//! Structural oracles over the whole corpus.

mod support;

use pathinv_core::cfg::{build_cfg, NodeKind};
use pathinv_core::frontend::{count_compound, parse_program, pretty_print, Stmt};
use pathinv_core::paths::{find_all_paths, order_by_priority};

#[test]
fn corpus_round_trips_through_the_printer() {
    for e in support::manifest() {
        let p = e.program();
        let again = parse_program(&pretty_print(&p)).unwrap_or_else(|err| panic!("{}: {err}", e.file));
        assert_eq!(again.body, p.body, "{}", e.file);
        assert_eq!(again.annotations, p.annotations, "{}", e.file);
        assert_eq!(again.decls, p.decls, "{}", e.file);
    }
}

#[test]
fn corpus_cfgs_have_one_node_per_compound_statement() {
    for e in support::manifest() {
        let p = e.program();
        let g = build_cfg(&p);
        let (loops, ifs) = count_compound(&p.body);
        assert_eq!(g.count_kind(|k| matches!(k, NodeKind::LoopHeader { .. })), loops, "{}", e.file);
        assert_eq!(g.count_kind(|k| matches!(k, NodeKind::Branch(_))), ifs, "{}", e.file);
        g.validate().unwrap_or_else(|err| panic!("{}: {err}", e.file));
    }
}

#[test]
fn corpus_segments_match_simple_path_search() {
    for e in support::manifest() {
        let p = e.program();
        let g = build_cfg(&p);
        let ps = find_all_paths(&g);
        let (loops, ifs) = count_compound(&p.body);
        assert_eq!(ps.segments.len(), 1 + loops + 2 * ifs, "{}", e.file);
        assert_eq!(support::views(&ps), support::dfs_segments(&g), "{}", e.file);
    }
}

#[test]
fn oracle_sees_sequential_branches_as_a_union() {
    let src = "int main() { int x, y, i; while (i < 3) { if (x > 0) { x = x - 1; } else { x = 0; } if (y > 0) { y = 1; } i = i + 1; } }";
    let g = build_cfg(&parse_program(src).unwrap());
    let oracle = support::dfs_segments(&g);
    assert_eq!(oracle.len(), 1 + 1 + 4);
    let body = oracle.iter().find(|s| s.region == "loop0").unwrap();
    assert_eq!(body.stmts, vec!["i = i + 1;"]);
    assert_eq!(support::views(&find_all_paths(&g)), oracle);
}

#[test]
fn priority_order_is_innermost_then_source_position() {
    for e in support::manifest() {
        let ps = order_by_priority(find_all_paths(&build_cfg(&e.program())));
        for w in ps.segments.windows(2) {
            let (a, b) = (&w[0], &w[1]);
            assert!(a.depth > b.depth || (a.depth == b.depth && a.position <= b.position), "{}: {} before {}", e.file, a.region, b.region);
        }
        assert_eq!(ps.segments.last().unwrap().depth, 0);
    }
}

#[test]
fn every_loop_has_a_gold_invariant_and_the_corpus_is_complete() {
    let m = support::manifest();
    assert_eq!(m.len(), 12);
    assert_eq!(m.iter().filter(|e| e.combinor == "solved").count(), 10);
    assert_eq!(m.iter().filter(|e| e.llm).count(), 3);
    for e in &m {
        let p = e.program();
        assert!(p.loops().iter().all(|l| matches!(l, Stmt::While { loop_id, .. } if p.gold_invariant(*loop_id).is_some())), "{}", e.file);
    }
    assert!(m.iter().any(|e| e.combinor == "solved" && e.tags.iter().any(|t| t == "nested-loop")));
    assert!(m.iter().any(|e| e.combinor == "solved" && e.tags.iter().any(|t| t == "branch-in-loop")));
}
