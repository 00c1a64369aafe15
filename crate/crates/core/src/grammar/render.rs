use super::{Ast, Grammar, Item, LabelDir};

struct Renderer<'g> {
    g: &'g Grammar,
    out: String,
    next_label: u32,
}

impl Grammar {
    /// Survivor source for one part, framed by `@start:` and `@end:`.
    ///
    /// Labels are numbered per render. A jump binds to the label defined by
    /// the nearest sibling in its direction within the same alternative, so
    /// every reference resolves.
    pub fn render(&self, ast: &Ast) -> String {
        let mut r = Renderer {
            g: self,
            out: String::from("@start:\n"),
            next_label: 1,
        };
        r.block(ast, None);
        r.out.push_str("@end:");
        r.out
    }
}

impl Renderer<'_> {
    fn block(&mut self, node: &Ast, label: Option<u32>) {
        let alt = self.g.alternative(node.nt, node.alt);
        let kids: Vec<_> = node.children.iter().collect();

        // Labels defined by children, then bind referencing children.
        let mut defined: Vec<Option<u32>> = vec![None; kids.len()];
        for (k, c) in kids.iter().enumerate() {
            if self.g.defines_label(c.nt) {
                defined[k] = Some(self.next_label);
                self.next_label += 1;
            }
        }
        let mut bound = defined.clone();
        for (k, c) in kids.iter().enumerate() {
            bound[k] = match self.g.label_ref(c.nt) {
                Some(LabelDir::Backward) => defined[..k].iter().rev().find_map(|d| *d),
                Some(LabelDir::Forward) => defined[k + 1..].iter().find_map(|d| *d),
                None => bound[k],
            };
        }

        if !alt.template.is_empty() {
            let pieces = self.inline_pieces(node, label);
            fill(&mut self.out, alt.template, &pieces);
            self.out.push('\n');
        }
        let mut k = 0;
        for item in &alt.items {
            if let Item::Nt(n) = item {
                if !self.g.rule(*n).inline {
                    self.block(kids[k], bound[k]);
                }
                k += 1;
            }
        }
    }

    fn inline_pieces(&self, node: &Ast, label: Option<u32>) -> Vec<String> {
        let alt = self.g.alternative(node.nt, node.alt);
        let mut terms = node.terms.iter();
        let mut kids = node.children.iter();
        let mut pieces = Vec::new();
        for item in &alt.items {
            match item {
                Item::Term(t) => pieces.push(t.literal(*terms.next().expect("valid tree") as usize)),
                Item::Nt(n) => {
                    let c = kids.next().expect("valid tree");
                    if self.g.rule(*n).inline {
                        pieces.push(self.inline(c));
                    }
                }
                Item::LabelDef | Item::LabelRef(_) => {
                    pieces.push(format!("l{}", label.expect("label bound by parent")));
                }
            }
        }
        pieces
    }

    fn inline(&self, node: &Ast) -> String {
        let alt = self.g.alternative(node.nt, node.alt);
        let mut s = String::new();
        fill(&mut s, alt.template, &self.inline_pieces(node, None));
        s
    }
}

fn fill(out: &mut String, template: &str, pieces: &[String]) {
    let mut rest = template;
    while let Some(p) = rest.find('{') {
        out.push_str(&rest[..p]);
        let close = rest[p..].find('}').expect("closed placeholder") + p;
        let k: usize = rest[p + 1..close].parse().expect("numeric placeholder");
        out.push_str(&pieces[k]);
        rest = &rest[close + 1..];
    }
    out.push_str(rest);
}
