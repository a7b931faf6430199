//! Exhaustive CART induction written directly from the Gini definition,
//! using exact rationals and dense rows. Shared by several test targets.

#![allow(dead_code)]

use num_rational::Ratio;
use pabsa::classifier::{Node, TreeParams};
use pabsa::corpus::Polarity;
use pabsa::rng::SeededRng;

type Q = Ratio<i128>;

fn counts(y: &[Polarity], idx: &[usize]) -> [usize; 3] {
    let mut c = [0; 3];
    for &i in idx {
        c[y[i].index()] += 1;
    }
    c
}

fn gini_exact(c: &[usize; 3]) -> Q {
    let n: usize = c.iter().sum();
    let mut g = Q::from_integer(1);
    for &k in c {
        let p = Q::new(k as i128, n as i128);
        g -= p * p;
    }
    g
}

fn label_of(c: &[usize; 3]) -> Polarity {
    // First maximum wins, i.e. the lowest encoding on ties.
    let max = *c.iter().max().unwrap();
    Polarity::ALL[c.iter().position(|&v| v == max).unwrap()]
}

fn grow(
    x: &[Vec<f64>],
    y: &[Polarity],
    idx: Vec<usize>,
    depth: usize,
    params: &TreeParams,
    out: &mut Vec<Node<f64>>,
) -> usize {
    let me = out.len();
    let c = counts(y, &idx);
    let n = idx.len();
    let leaf = Node::Leaf {
        counts: c,
        label: label_of(&c),
    };
    let pure = c.iter().filter(|&&v| v > 0).count() == 1;
    if pure || params.max_depth.is_some_and(|d| depth >= d) || n < params.min_samples_split {
        out.push(leaf);
        return me;
    }
    let parent = gini_exact(&c);
    let nq = n as i128;
    let mut best: Option<(usize, f64, Q)> = None;
    for f in 0..x[0].len() {
        let mut vals: Vec<f64> = idx.iter().map(|&i| x[i][f]).collect();
        vals.sort_by(|a, b| a.partial_cmp(b).unwrap());
        vals.dedup();
        for w in vals.windows(2) {
            let t = (w[0] + w[1]) / 2.0;
            let (l, r): (Vec<usize>, Vec<usize>) = idx.iter().partition(|&&i| x[i][f] <= t);
            if l.len() < params.min_samples_leaf || r.len() < params.min_samples_leaf {
                continue;
            }
            let dec = parent
                - Q::new(l.len() as i128, nq) * gini_exact(&counts(y, &l))
                - Q::new(r.len() as i128, nq) * gini_exact(&counts(y, &r));
            if best.as_ref().is_none_or(|b| dec > b.2) {
                best = Some((f, t, dec));
            }
        }
    }
    match best {
        Some((f, t, dec))
            if dec > Q::from_integer(0)
                && (*dec.numer() as f64 / *dec.denom() as f64) > params.min_impurity_decrease =>
        {
            out.push(Node::Split {
                feature: f,
                threshold: t,
                left: 0,
                right: 0,
            });
            let (l, r): (Vec<usize>, Vec<usize>) = idx.iter().partition(|&&i| x[i][f] <= t);
            let li = grow(x, y, l, depth + 1, params, out);
            let ri = grow(x, y, r, depth + 1, params, out);
            if let Node::Split { left, right, .. } = &mut out[me] {
                *left = li;
                *right = ri;
            }
        }
        _ => out.push(leaf),
    }
    me
}

pub fn oracle_tree(x: &[Vec<f64>], y: &[Polarity], params: &TreeParams) -> Vec<Node<f64>> {
    let mut out = Vec::new();
    grow(x, y, (0..y.len()).collect(), 0, params, &mut out);
    out
}

/// Random small problem: up to 200 rows, 1..=5 features, values drawn from a
/// small grid (with zeros and negatives) so ties are frequent.
pub fn random_problem(seed: u64) -> (Vec<Vec<f64>>, Vec<Polarity>, TreeParams) {
    const GRID: [f64; 8] = [-1.5, -0.25, 0.0, 0.0, 0.5, 1.0, 2.0, 3.75];
    let mut rng = SeededRng::new(seed);
    let n = 2 + rng.below(199);
    let d = 1 + rng.below(5);
    let x: Vec<Vec<f64>> = (0..n)
        .map(|_| (0..d).map(|_| GRID[rng.below(GRID.len())]).collect())
        .collect();
    let y = (0..n)
        .map(|i| {
            // Labels loosely tied to feature 0 so trees get some depth.
            if rng.chance(0.6) {
                Polarity::ALL[((x[i][0] + 2.0) as usize) % 3]
            } else {
                Polarity::ALL[rng.below(3)]
            }
        })
        .collect();
    let params = TreeParams {
        max_depth: if rng.chance(0.5) { None } else { Some(1 + rng.below(5)) },
        min_samples_split: 2 + rng.below(4),
        min_samples_leaf: 1 + rng.below(3),
        min_impurity_decrease: if rng.chance(0.7) { 0.0 } else { 0.01 },
    };
    (x, y, params)
}
