//! Classification tree with binary category-subset splits chosen by Gini.

use rand::seq::index::sample;
use rand::Rng;

use super::table::CategoricalTable;

/// Arity up to which every binary partition is scored.
pub const EXHAUSTIVE_ARITY: usize = 10;
/// Random partitions scored for wider variables.
pub const RANDOM_PARTITIONS: usize = 256;

#[derive(Debug, Clone, PartialEq)]
pub enum Node {
    Leaf {
        class: u8,
    },
    /// Categories in `left_mask` go left; all others, including categories
    /// unseen while training this node, go right.
    Split {
        var: u16,
        left_mask: u64,
        left: u32,
        right: u32,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Tree {
    pub nodes: Vec<Node>,
}

pub struct TreeSettings {
    pub mtry: usize,
    pub max_depth: Option<usize>,
    pub min_leaf: usize,
}

impl Tree {
    /// `value(var)` yields the record's code for predictor `var`.
    pub fn predict(&self, value: impl Fn(usize) -> u8) -> u8 {
        let mut at = 0usize;
        loop {
            match self.nodes[at] {
                Node::Leaf { class } => return class,
                Node::Split {
                    var,
                    left_mask,
                    left,
                    right,
                } => {
                    let c = value(var as usize);
                    at = if left_mask >> c & 1 == 1 { left } else { right } as usize;
                }
            }
        }
    }

    pub fn depth(&self) -> usize {
        fn walk(nodes: &[Node], at: usize) -> usize {
            match nodes[at] {
                Node::Leaf { .. } => 0,
                Node::Split { left, right, .. } => {
                    1 + walk(nodes, left as usize).max(walk(nodes, right as usize))
                }
            }
        }
        walk(&self.nodes, 0)
    }
}

/// `a.0 / a.1 > b.0 / b.1` for positive denominators.
fn greater(a: (u128, u128), b: (u128, u128)) -> bool {
    a.0 * b.1 > b.0 * a.1
}

fn sum_squares(counts: &[u64]) -> u128 {
    counts.iter().map(|&c| u128::from(c) * u128::from(c)).sum()
}

/// `Σ_child Σ_class n² / n_child` as a fraction; larger means lower weighted Gini.
fn partition_score(left: &[u64], right: &[u64]) -> (u128, u128) {
    let nl: u128 = left.iter().map(|&c| u128::from(c)).sum();
    let nr: u128 = right.iter().map(|&c| u128::from(c)).sum();
    (sum_squares(left) * nr + sum_squares(right) * nl, nl * nr)
}

fn majority(counts: &[u64]) -> u8 {
    let mut best = 0;
    for (c, &n) in counts.iter().enumerate() {
        if n > counts[best] {
            best = c;
        }
    }
    best as u8
}

struct Best {
    var: usize,
    mask: u64,
    score: (u128, u128),
}

/// Grows a tree on `sample_rows` (a bootstrap sample, repeats allowed).
pub fn grow<R: Rng>(
    table: &CategoricalTable,
    predictors: &[usize],
    response: &[u8],
    classes: usize,
    mut sample_rows: Vec<u32>,
    settings: &TreeSettings,
    rng: &mut R,
) -> Tree {
    let mut nodes = vec![Node::Leaf { class: 0 }];
    // (node slot, start, end, depth) over `sample_rows`.
    let mut stack = vec![(0usize, 0usize, sample_rows.len(), 0usize)];
    let mut class_counts = vec![0u64; classes];
    while let Some((slot, start, end, depth)) = stack.pop() {
        let rows = &mut sample_rows[start..end];
        class_counts.iter_mut().for_each(|c| *c = 0);
        for &r in rows.iter() {
            class_counts[response[r as usize] as usize] += 1;
        }
        let leaf = Node::Leaf {
            class: majority(&class_counts),
        };
        let n = rows.len();
        let pure = class_counts.iter().filter(|&&c| c > 0).count() <= 1;
        if pure || n < 2 * settings.min_leaf || settings.max_depth.is_some_and(|d| depth >= d) {
            nodes[slot] = leaf;
            continue;
        }
        let parent = (sum_squares(&class_counts), n as u128);
        let Some(best) = best_split(
            table, predictors, response, classes, rows, parent, settings, rng,
        ) else {
            nodes[slot] = leaf;
            continue;
        };
        let column = table.column(predictors[best.var]);
        let goes_left = |r: &u32| best.mask >> column[*r as usize] & 1 == 1;
        // Stable partition keeps row order, and so the tree, deterministic.
        let (mut l, mut r): (Vec<u32>, Vec<u32>) = rows.iter().partition(|x| goes_left(x));
        let n_left = l.len();
        l.append(&mut r);
        rows.copy_from_slice(&l);

        let left = nodes.len() as u32;
        nodes.push(Node::Leaf { class: 0 });
        nodes.push(Node::Leaf { class: 0 });
        nodes[slot] = Node::Split {
            var: best.var as u16,
            left_mask: best.mask,
            left,
            right: left + 1,
        };
        stack.push((left as usize + 1, start + n_left, end, depth + 1));
        stack.push((left as usize, start, start + n_left, depth + 1));
    }
    Tree { nodes }
}

/// Visits predictors in random order. Constant ones are skipped; the search
/// stops once `mtry` varying predictors were scored and a split was found.
#[allow(clippy::too_many_arguments)]
fn best_split<R: Rng>(
    table: &CategoricalTable,
    predictors: &[usize],
    response: &[u8],
    classes: usize,
    rows: &[u32],
    parent: (u128, u128),
    settings: &TreeSettings,
    rng: &mut R,
) -> Option<Best> {
    let order = sample(rng, predictors.len(), predictors.len()).into_vec();
    let mut best: Option<Best> = None;
    let mut scored = 0usize;
    for var in order {
        if scored >= settings.mtry && best.is_some() {
            break;
        }
        let column = table.column(predictors[var]);
        let arity = table.levels(predictors[var]).len();
        // counts[category * classes + class]
        let mut counts = vec![0u64; arity * classes];
        for &r in rows {
            let r = r as usize;
            counts[column[r] as usize * classes + response[r] as usize] += 1;
        }
        let present: Vec<usize> = (0..arity)
            .filter(|&c| {
                counts[c * classes..(c + 1) * classes]
                    .iter()
                    .any(|&x| x > 0)
            })
            .collect();
        if present.len() < 2 {
            continue;
        }
        scored += 1;
        // The last present category always stays right, so each partition
        // is visited once.
        let free = present.len() - 1;
        let subsets: Vec<u64> = if present.len() <= EXHAUSTIVE_ARITY {
            (1..(1u64 << free)).collect()
        } else {
            let mut s: Vec<u64> = (0..RANDOM_PARTITIONS)
                .map(|_| loop {
                    let bits = rng.gen::<u64>() & ((1u64 << free) - 1);
                    if bits != 0 {
                        break bits;
                    }
                })
                .collect();
            s.sort_unstable();
            s.dedup();
            s
        };
        let mut left = vec![0u64; classes];
        let mut right = vec![0u64; classes];
        for bits in subsets {
            let mut mask = 0u64;
            left.iter_mut().for_each(|x| *x = 0);
            right.iter_mut().for_each(|x| *x = 0);
            for (i, &c) in present.iter().enumerate() {
                let side = if i < free && bits >> i & 1 == 1 {
                    mask |= 1 << c;
                    &mut left
                } else {
                    &mut right
                };
                for (k, s) in side.iter_mut().enumerate() {
                    *s += counts[c * classes + k];
                }
            }
            let (nl, nr) = (left.iter().sum::<u64>(), right.iter().sum::<u64>());
            if (nl as usize) < settings.min_leaf || (nr as usize) < settings.min_leaf {
                continue;
            }
            let score = partition_score(&left, &right);
            if !greater(score, parent) {
                continue;
            }
            let better = match &best {
                None => true,
                Some(b) => {
                    greater(score, b.score)
                        || (!greater(b.score, score) && (var, mask) < (b.var, b.mask))
                }
            };
            if better {
                best = Some(Best { var, mask, score });
            }
        }
    }
    best
}
