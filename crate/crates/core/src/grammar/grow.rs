use rand::Rng;

use super::{Ast, Grammar, GrammarError, Item, Nt};

impl Grammar {
    /// Random derivation from the start symbol, at most `max_depth` levels
    /// tall.
    pub fn grow<R: Rng + ?Sized>(&self, rng: &mut R, max_depth: u32) -> Result<Ast, GrammarError> {
        self.grow_from(self.start(), rng, max_depth)
    }

    /// Random derivation of `nt`. Each node picks uniformly among the
    /// alternatives that can still finish within the remaining depth, so
    /// once the budget runs out only the non-recursive ones are left.
    pub fn grow_from<R: Rng + ?Sized>(&self, nt: Nt, rng: &mut R, max_depth: u32) -> Result<Ast, GrammarError> {
        let rule = self.rule(nt);
        let eligible: Vec<usize> = rule
            .alternatives
            .iter()
            .enumerate()
            .filter(|(_, a)| a.min_height <= max_depth)
            .map(|(i, _)| i)
            .collect();
        if eligible.is_empty() {
            return Err(GrammarError::DepthUnsatisfiable {
                rule: rule.name,
                budget: max_depth,
            });
        }
        let choice = eligible[rng.gen_range(0..eligible.len())];
        let mut node = Ast::leaf(nt, choice as u8);
        for item in &rule.alternatives[choice].items {
            match item {
                Item::Term(t) => node.terms.push(rng.gen_range(0..t.len()) as u16),
                Item::Nt(n) => node.children.push(self.grow_from(*n, rng, max_depth - 1)?),
                _ => {}
            }
        }
        Ok(node)
    }
}
