//! Derivation trees, tree surgery and the `CGAST1` text form.

use std::fmt::Write as _;

use super::{Grammar, GrammarError, Item, Nt};

pub const AST_HEADER: &str = "CGAST1";

/// One derivation step: the alternative chosen for `nt`, the terminal
/// indices for its `Term` items and one child per `Nt` item, both in item
/// order.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Ast {
    pub nt: Nt,
    pub alt: u8,
    pub terms: Vec<u16>,
    pub children: Vec<Ast>,
}

/// A node position in preorder, with its nonterminal and depth (root = 1).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SubtreePoint {
    pub index: usize,
    pub nt: Nt,
    pub depth: u32,
}

impl Ast {
    pub fn leaf(nt: Nt, alt: u8) -> Ast {
        Ast {
            nt,
            alt,
            terms: Vec::new(),
            children: Vec::new(),
        }
    }

    pub fn count_nodes(&self) -> usize {
        1 + self.children.iter().map(Ast::count_nodes).sum::<usize>()
    }

    pub fn height(&self) -> u32 {
        1 + self.children.iter().map(Ast::height).max().unwrap_or(0)
    }

    /// All nodes in preorder.
    pub fn subtree_points(&self) -> Vec<SubtreePoint> {
        let mut out = Vec::with_capacity(self.count_nodes());
        let mut stack = vec![(self, 1u32)];
        while let Some((node, depth)) = stack.pop() {
            out.push(SubtreePoint {
                index: out.len(),
                nt: node.nt,
                depth,
            });
            for c in node.children.iter().rev() {
                stack.push((c, depth + 1));
            }
        }
        out
    }

    pub fn subtree_at(&self, index: usize) -> Option<&Ast> {
        let mut stack = vec![self];
        let mut seen = 0;
        while let Some(node) = stack.pop() {
            if seen == index {
                return Some(node);
            }
            seen += 1;
            stack.extend(node.children.iter().rev());
        }
        None
    }

    fn subtree_at_mut(&mut self, index: usize) -> Option<&mut Ast> {
        if index == 0 {
            return Some(self);
        }
        let mut skip = index - 1;
        for c in &mut self.children {
            let n = c.count_nodes();
            if skip < n {
                return c.subtree_at_mut(skip);
            }
            skip -= n;
        }
        None
    }

    /// Copy of `self` with the subtree at `index` replaced by `new`, which
    /// must derive from the same nonterminal.
    pub fn replace_subtree(&self, index: usize, new: Ast) -> Result<Ast, GrammarError> {
        let mut out = self.clone();
        let slot = out.subtree_at_mut(index).ok_or(GrammarError::BadPoint(index))?;
        if slot.nt != new.nt {
            return Err(GrammarError::TypeMismatch {
                expected: slot.nt,
                found: new.nt,
            });
        }
        *slot = new;
        Ok(out)
    }

    /// Checks the tree against the grammar: alternative ids, terminal ranges
    /// and child arity and types.
    pub fn check(&self, g: &Grammar) -> Result<(), GrammarError> {
        let bad = |m: String| Err(GrammarError::Invalid(m));
        let Some(rule) = g.rules.get(self.nt.0 as usize) else {
            return bad(format!("unknown nonterminal {}", self.nt.0));
        };
        let Some(alt) = rule.alternatives.get(self.alt as usize) else {
            return bad(format!("`{}` has no alternative {}", rule.name, self.alt));
        };
        let mut terms = self.terms.iter();
        let mut kids = self.children.iter();
        for item in &alt.items {
            match item {
                Item::Term(t) => match terms.next() {
                    Some(&v) if (v as usize) < t.len() => {}
                    _ => return bad(format!("`{}` terminal out of range", rule.name)),
                },
                Item::Nt(n) => match kids.next() {
                    Some(c) if c.nt == *n => c.check(g)?,
                    _ => return bad(format!("`{}` child does not match", rule.name)),
                },
                Item::LabelDef | Item::LabelRef(_) => {}
            }
        }
        if terms.next().is_some() || kids.next().is_some() {
            return bad(format!("`{}` has extra terms or children", rule.name));
        }
        Ok(())
    }

    /// Parenthesised prefix form: `(rule.alt "terminal" ... child ...)`.
    pub fn to_text(&self, g: &Grammar) -> String {
        let mut out = String::new();
        self.write_text(g, &mut out);
        out
    }

    fn write_text(&self, g: &Grammar, out: &mut String) {
        let _ = write!(out, "({}.{}", g.name(self.nt), self.alt);
        let alt = g.alternative(self.nt, self.alt);
        let mut terms = self.terms.iter();
        let mut kids = self.children.iter();
        for item in &alt.items {
            match item {
                Item::Term(t) => {
                    let v = *terms.next().expect("checked tree");
                    let _ = write!(out, " \"{}\"", t.literal(v as usize));
                }
                Item::Nt(_) => {
                    out.push(' ');
                    kids.next().expect("checked tree").write_text(g, out);
                }
                _ => {}
            }
        }
        out.push(')');
    }

    pub fn parse_text(g: &Grammar, text: &str) -> Result<Ast, GrammarError> {
        let mut p = Parser { text, pos: 0 };
        let ast = p.node(g)?;
        p.skip_ws();
        if p.pos != text.len() {
            return Err(p.error("trailing text"));
        }
        Ok(ast)
    }
}

struct Parser<'a> {
    text: &'a str,
    pos: usize,
}

impl Parser<'_> {
    fn error(&self, message: &str) -> GrammarError {
        GrammarError::Parse {
            pos: self.pos,
            message: message.to_string(),
        }
    }

    fn skip_ws(&mut self) {
        let rest = &self.text[self.pos..];
        self.pos += rest.len() - rest.trim_start().len();
    }

    fn expect(&mut self, c: char) -> Result<(), GrammarError> {
        self.skip_ws();
        if self.text[self.pos..].starts_with(c) {
            self.pos += 1;
            Ok(())
        } else {
            Err(self.error(&format!("expected `{}`", c)))
        }
    }

    fn node(&mut self, g: &Grammar) -> Result<Ast, GrammarError> {
        self.expect('(')?;
        let rest = &self.text[self.pos..];
        let end = rest
            .find(|c: char| c.is_whitespace() || c == ')')
            .ok_or_else(|| self.error("unterminated node"))?;
        let id = &rest[..end];
        let (name, alt) = id.rsplit_once('.').ok_or_else(|| self.error("expected `rule.alt`"))?;
        let nt = g.nt_by_name(name).ok_or_else(|| self.error("unknown rule"))?;
        let alt: u8 = alt.parse().map_err(|_| self.error("bad alternative id"))?;
        let items = &g
            .rule(nt)
            .alternatives
            .get(alt as usize)
            .ok_or_else(|| self.error("unknown alternative"))?
            .items;
        self.pos += end;
        let mut ast = Ast::leaf(nt, alt);
        for item in items {
            match item {
                Item::Term(t) => {
                    self.expect('"')?;
                    let rest = &self.text[self.pos..];
                    let close = rest.find('"').ok_or_else(|| self.error("unterminated literal"))?;
                    let v = t
                        .index_of(&rest[..close])
                        .ok_or_else(|| self.error("literal not in its terminal set"))?;
                    ast.terms.push(v as u16);
                    self.pos += close + 1;
                }
                Item::Nt(n) => {
                    let child = self.node(g)?;
                    if child.nt != *n {
                        return Err(self.error("child of the wrong nonterminal"));
                    }
                    ast.children.push(child);
                }
                _ => {}
            }
        }
        self.expect(')')?;
        Ok(ast)
    }
}

/// `CGAST1` header followed by one tree per line.
pub fn write_trees(g: &Grammar, trees: &[Ast]) -> String {
    let mut out = String::from(AST_HEADER);
    out.push('\n');
    for t in trees {
        out.push_str(&t.to_text(g));
        out.push('\n');
    }
    out
}

pub fn parse_trees(g: &Grammar, text: &str) -> Result<Vec<Ast>, GrammarError> {
    let mut lines = text.lines();
    if lines.next().map(str::trim) != Some(AST_HEADER) {
        return Err(GrammarError::Parse {
            pos: 0,
            message: format!("expected header {}", AST_HEADER),
        });
    }
    lines
        .filter(|l| !l.trim().is_empty())
        .map(|l| Ast::parse_text(g, l))
        .collect()
}
