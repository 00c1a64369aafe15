use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::*;
use crate::isa::assemble;

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn section(alt: u8) -> Ast {
    Ast::leaf(SECTION, alt)
}

fn empty() -> Ast {
    section(EMPTY_SECTION)
}

#[test]
fn const_set_is_the_literal_expansion() {
    let c = Terminals::Const;
    assert_eq!(c.len(), 143 + 4);
    assert_eq!(c.literal(0), "0x-20");
    assert_eq!(c.literal(10), "0x0");
    assert_eq!(c.literal(142), "0x264");
    assert_eq!(c.literal(143), "@start");
    assert_eq!(c.literal(146), "0xcccc");
    assert_eq!(c.index_of("0x-14"), Some(3));
}

#[test]
fn patterns_only_when_enabled() {
    let plain = default_grammar(false);
    let all: String = plain.rules.iter().flat_map(|r| r.alternatives.iter().map(|a| a.template)).collect();
    assert!(!all.contains("1664525"));
    assert_eq!(plain.rule(SECTION).alternatives.len(), 22);

    let g = default_grammar(true);
    assert_eq!(g.rule(SECTION).alternatives.len(), 24);
    let mut lcg = section(22);
    lcg.terms = vec![1234, 2];
    lcg.children = vec![empty()];
    let text = g.render(&lcg);
    assert!(text.contains("add ax, 1013904223"), "{}", text);
    assert!(text.contains("mov cx, 1664525\nmul cx"));
    assert!(assemble(&text).is_ok());
}

#[test]
fn minimal_tree() {
    let g = default_grammar(false);
    let t = empty();
    assert_eq!(t.count_nodes(), 1);
    assert_eq!(g.render(&t), "@start:\n@end:");
}

#[test]
fn backward_jump_follows_its_label() {
    let g = default_grammar(false);
    let label = Ast {
        children: vec![empty()],
        ..Ast::leaf(LABEL, 0)
    };
    let jump = Ast {
        terms: vec![0],
        children: vec![empty()],
        ..Ast::leaf(BACKWARDS_JUMP, 0)
    };
    let t = Ast {
        children: vec![label, empty(), jump],
        ..section(1)
    };
    t.check(&g).unwrap();
    assert_eq!(g.render(&t), "@start:\nl1:\njmp l1\n@end:");
}

#[test]
fn call_binds_forward_and_loop_backward() {
    let g = default_grammar(false);
    let mut r = rng(3);
    // Structural alternative 3: label, call, backward jump, label, return.
    let t = loop {
        let t = g.grow(&mut r, 6).unwrap();
        if t.alt == 3 {
            break t;
        }
    };
    let text = g.render(&t);
    let lines: Vec<&str> = text.lines().collect();
    let call = lines.iter().position(|l| l.starts_with("call l")).unwrap();
    let target = lines[call].trim_start_matches("call ");
    let def = lines.iter().position(|l| *l == format!("{}:", target)).unwrap();
    assert!(def > call);
    assert!(assemble(&text).is_ok());
}

#[test]
fn grow_is_deterministic() {
    let g = default_grammar(true);
    assert_eq!(g.grow(&mut rng(42), 10).unwrap(), g.grow(&mut rng(42), 10).unwrap());
}

#[test]
fn grow_respects_depth() {
    let g = default_grammar(false);
    let mut r = rng(7);
    for d in 2..12 {
        for _ in 0..50 {
            let t = g.grow(&mut r, d).unwrap();
            assert!(t.height() <= d);
        }
    }
    // At depth 2 the section chain is at most two long.
    for _ in 0..200 {
        let t = g.grow(&mut r, 2).unwrap();
        let chain = 1 + t.children.iter().filter(|c| c.nt == SECTION).count();
        assert!(chain <= 2);
        assert!(t.children.iter().all(|c| c.nt != SECTION || c.alt == EMPTY_SECTION));
    }
}

#[test]
fn depth_unsatisfiable() {
    let g = default_grammar(false);
    assert!(matches!(
        g.grow_from(LABEL, &mut rng(1), 1),
        Err(GrammarError::DepthUnsatisfiable { rule: "label", .. })
    ));
    assert!(g.grow(&mut rng(1), 1).is_ok());
}

#[test]
fn grown_trees_assemble() {
    for patterns in [false, true] {
        let g = default_grammar(patterns);
        let mut r = rng(11);
        for _ in 0..300 {
            let t = g.grow(&mut r, 10).unwrap();
            t.check(&g).unwrap();
            let src = g.render(&t);
            match assemble(&src) {
                Ok(_) => {}
                Err(e) if matches!(e.kind, crate::isa::AssembleErrorKind::ImageTooLarge(_)) => {}
                Err(e) => panic!("{}\n{}", e, src),
            }
        }
    }
}

#[test]
fn text_round_trip() {
    let g = default_grammar(true);
    let mut r = rng(5);
    let trees: Vec<Ast> = (0..50).map(|_| g.grow(&mut r, 8).unwrap()).collect();
    let text = write_trees(&g, &trees);
    assert!(text.starts_with("CGAST1\n"));
    assert_eq!(parse_trees(&g, &text).unwrap(), trees);
    assert!(parse_trees(&g, "CGAST0\n").is_err());
    assert!(Ast::parse_text(&g, "(section.21").is_err());
    assert!(Ast::parse_text(&g, "(section.4 \"mov\" \"zz\" (reg_const_address.0 \"ax\") (section.21))").is_err());
}

#[test]
fn replace_subtree_contract() {
    let g = default_grammar(false);
    let mut r = rng(9);
    let t = g.grow(&mut r, 9).unwrap();
    let points = t.subtree_points();
    assert_eq!(points.len(), t.count_nodes());
    for p in &points {
        let sub = t.subtree_at(p.index).unwrap();
        assert_eq!(sub.nt, p.nt);
        assert_eq!(t.replace_subtree(p.index, sub.clone()).unwrap(), t);
    }
    assert!(t.subtree_at(points.len()).is_none());

    let last_section = points.iter().rev().find(|p| p.nt == SECTION).unwrap();
    let before = t.clone();
    let swapped = t.replace_subtree(last_section.index, g.grow(&mut r, 4).unwrap()).unwrap();
    swapped.check(&g).unwrap();
    assert_eq!(t, before);

    let other = points.iter().find(|p| p.nt != SECTION).map(|p| p.index);
    if let Some(i) = other {
        assert!(matches!(t.replace_subtree(i, empty()), Err(GrammarError::TypeMismatch { .. })));
    }
    assert!(matches!(t.replace_subtree(points.len(), empty()), Err(GrammarError::BadPoint(_))));
}
