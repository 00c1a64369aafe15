use rand::Rng;

use crate::grammar::Grammar;

use super::Individual;

/// Attempts an operator makes before giving up and returning its parents.
pub const VARIATION_RETRIES: usize = 5;

fn child_of(parent: &Individual) -> Individual {
    let mut c = parent.clone();
    c.clear_evaluation();
    c
}

/// Regrows a uniformly chosen subtree of a uniformly chosen part, within
/// the depth left under `max_depth`. Falls back to the parent after
/// [`VARIATION_RETRIES`] attempts that overflow the image size.
pub fn op_grow_mutation<R: Rng + ?Sized>(ind: &Individual, rng: &mut R, g: &Grammar, max_depth: u32) -> Individual {
    for _ in 0..VARIATION_RETRIES {
        let p = rng.gen_range(0..2);
        let tree = &ind.parts[p];
        let points = tree.subtree_points();
        let point = points[rng.gen_range(0..points.len())];
        let budget = (max_depth + 1).saturating_sub(point.depth);
        let Ok(sub) = g.grow_from(point.nt, rng, budget) else {
            continue;
        };
        let new_tree = tree
            .replace_subtree(point.index, sub)
            .expect("regrown subtree has the point's nonterminal");
        let mut child = child_of(ind);
        child.parts[p] = new_tree;
        if child.is_viable(g, max_depth) {
            return child;
        }
    }
    ind.clone()
}

/// Copies the better part over the other one. Parts are ranked by
/// lifetime, then written bytes; part 1 wins ties. Without metrics the
/// individual is returned unchanged.
pub fn op_duplicate_part(ind: &Individual) -> Individual {
    let Some(m) = &ind.metrics else {
        return ind.clone();
    };
    let key = |i: usize| (m.per_part_lifetime[i], m.per_part_written[i]);
    let best = if key(1) > key(0) { 1 } else { 0 };
    let mut child = child_of(ind);
    child.parts[1 - best] = ind.parts[best].clone();
    child
}

/// Swaps same-nonterminal subtrees between the same part of `a` and `b`.
/// Returns copies of the parents when no viable swap is found in
/// [`VARIATION_RETRIES`] attempts.
pub fn op_xover_subtree<R: Rng + ?Sized>(
    a: &Individual,
    b: &Individual,
    rng: &mut R,
    g: &Grammar,
    max_depth: u32,
) -> (Individual, Individual) {
    let p = rng.gen_range(0..2);
    let (ta, tb) = (&a.parts[p], &b.parts[p]);
    let points_a = ta.subtree_points();
    let points_b = tb.subtree_points();
    for _ in 0..VARIATION_RETRIES {
        let pa = points_a[rng.gen_range(0..points_a.len())];
        let matches: Vec<_> = points_b.iter().filter(|q| q.nt == pa.nt).collect();
        if matches.is_empty() {
            continue;
        }
        let pb = *matches[rng.gen_range(0..matches.len())];
        let sa = ta.subtree_at(pa.index).expect("point from this tree").clone();
        let sb = tb.subtree_at(pb.index).expect("point from this tree").clone();
        let mut ca = child_of(a);
        let mut cb = child_of(b);
        ca.parts[p] = ta.replace_subtree(pa.index, sb).expect("same nonterminal");
        cb.parts[p] = tb.replace_subtree(pb.index, sa).expect("same nonterminal");
        if ca.is_viable(g, max_depth) && cb.is_viable(g, max_depth) {
            return (ca, cb);
        }
    }
    (a.clone(), b.clone())
}

/// Replaces a uniformly chosen part of `a` with a uniformly chosen part
/// of `b`.
pub fn op_xover_parts<R: Rng + ?Sized>(a: &Individual, b: &Individual, rng: &mut R) -> Individual {
    let i = rng.gen_range(0..2);
    let j = rng.gen_range(0..2);
    let mut child = child_of(a);
    child.parts[i] = b.parts[j].clone();
    child
}
