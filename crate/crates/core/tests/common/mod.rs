//! Brute-force oracles shared by the integration suites. None of this goes
//! through the enumerator: leaf regions are derived from root-to-leaf path
//! constraints and combined by exhaustive cartesian product.

#![allow(dead_code, clippy::neg_cmp_op_on_partial_ord)]

use treecert::{Ensemble, Interval, Node, NodeId, PostProcess, Region, Tree};

/// One axis constraint in half-open form: `lo < x` (strict) or `lo <= x`,
/// and `x <= hi`.
#[derive(Clone, Copy, Debug)]
struct Bound {
    lo: f32,
    lo_strict: bool,
    hi: f32,
}

impl Bound {
    const FREE: Bound = Bound {
        lo: f32::NEG_INFINITY,
        lo_strict: false,
        hi: f32::INFINITY,
    };

    fn closed(&self) -> Interval {
        let lower = if self.lo_strict {
            f32::from_bits(if self.lo == 0.0 {
                1
            } else if self.lo > 0.0 {
                self.lo.to_bits() + 1
            } else {
                self.lo.to_bits() - 1
            })
        } else {
            self.lo
        };
        Interval::new(lower, self.hi)
    }
}

/// Every leaf of `tree` with the closed region that reaches it.
pub fn leaf_regions(tree: &Tree, n: usize) -> Vec<(Region, Vec<f32>)> {
    fn go(t: &Tree, id: NodeId, path: &mut Vec<Bound>, out: &mut Vec<(Region, Vec<f32>)>) {
        match t.node(id) {
            Node::Leaf { value } => {
                let region = Region::new(path.iter().map(Bound::closed).collect());
                out.push((region, value.to_vec()));
            }
            Node::Split {
                feature,
                threshold,
                left,
                right,
            } => {
                let saved = path[*feature];
                if *threshold < path[*feature].hi {
                    path[*feature].hi = *threshold;
                }
                go(t, *left, path, out);
                path[*feature] = saved;
                let b = &mut path[*feature];
                if *threshold > b.lo || (*threshold == b.lo && !b.lo_strict) {
                    b.lo = *threshold;
                    b.lo_strict = true;
                }
                go(t, *right, path, out);
                path[*feature] = saved;
            }
        }
    }
    let mut out = Vec::new();
    go(tree, tree.root(), &mut vec![Bound::FREE; n], &mut out);
    out
}

fn intersect(a: &Region, b: &Region) -> Region {
    Region::new(
        a.dims
            .iter()
            .zip(&b.dims)
            .map(|(x, y)| Interval::new(x.lower.max(y.lower), x.upper.min(y.upper)))
            .collect(),
    )
}

fn empty(r: &Region) -> bool {
    r.dims.iter().any(|iv| !(iv.lower <= iv.upper))
}

pub fn post(p: PostProcess, v: &mut [f32], b: usize) {
    match p {
        PostProcess::Identity => {}
        PostProcess::DivideByTreeCount => v.iter_mut().for_each(|x| *x /= b as f32),
        PostProcess::Softmax => {
            let mx = v.iter().copied().fold(f32::NEG_INFINITY, f32::max);
            let mut s = 0.0f32;
            for x in v.iter_mut() {
                *x = (*x - mx).exp();
                s += *x;
            }
            v.iter_mut().for_each(|x| *x /= s);
        }
    }
}

/// A class as plain data, comparable bit for bit.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct ClassKey {
    pub region: Vec<(u32, u32)>,
    pub output: Vec<u32>,
}

pub fn key(region: &Region, output: &[f32]) -> ClassKey {
    ClassKey {
        region: region
            .dims
            .iter()
            .map(|iv| (iv.lower.to_bits(), iv.upper.to_bits()))
            .collect(),
        output: output.iter().map(|v| v.to_bits()).collect(),
    }
}

/// Intersects every combination of one leaf region per tree with `domain`,
/// drops empty intersections, and sums the leaves in tree order.
pub fn brute_force_classes(e: &Ensemble, domain: &Region) -> Vec<ClassKey> {
    let per_tree: Vec<_> = e.trees().iter().map(|t| leaf_regions(t, e.n_inputs())).collect();
    let mut choice = vec![0usize; per_tree.len()];
    let mut out = Vec::new();
    'outer: loop {
        let mut region = domain.clone();
        let mut sum = vec![0.0f32; e.n_outputs()];
        for (b, &c) in choice.iter().enumerate() {
            let (r, v) = &per_tree[b][c];
            region = intersect(&region, r);
            for (s, x) in sum.iter_mut().zip(v) {
                *s += *x;
            }
        }
        if !empty(&region) {
            post(e.post_process(), &mut sum, e.tree_count());
            out.push(key(&region, &sum));
        }
        for b in (0..choice.len()).rev() {
            choice[b] += 1;
            if choice[b] < per_tree[b].len() {
                continue 'outer;
            }
            choice[b] = 0;
        }
        break;
    }
    out.sort();
    out
}

/// Classes emitted by the enumerator, canonically sorted.
pub fn enumerated_classes(
    e: &Ensemble,
    domain: &Region,
    s: treecert::SelectionStrategy,
) -> Vec<ClassKey> {
    let mut out = Vec::new();
    treecert::for_each_class(e, domain, s, |m| {
        out.push(key(&m.region, &m.outputs.point()));
        std::ops::ControlFlow::Continue(())
    })
    .expect("enumeration");
    out.sort();
    out
}

/// Per-axis probe values around every threshold the model uses on that
/// axis, plus far-out points.
pub fn probe_grid(e: &Ensemble) -> Vec<Vec<f32>> {
    (0..e.n_inputs())
        .map(|f| {
            let mut vals = vec![-1.0e30f32, 1.0e30, 0.0, f32::MAX, -f32::MAX];
            for t in e.trees() {
                for n in t.nodes() {
                    if let Node::Split {
                        feature, threshold, ..
                    } = n
                    {
                        if *feature == f {
                            let t = *threshold;
                            vals.extend([t, t.next_up(), t.next_down(), t + 0.25, t - 0.25]);
                        }
                    }
                }
            }
            vals.sort_by(f32::total_cmp);
            vals.dedup();
            vals
        })
        .collect()
}

/// Cartesian product of per-axis value lists.
pub fn grid_points(axes: &[Vec<f32>]) -> Vec<Vec<f32>> {
    let mut pts = vec![Vec::new()];
    for axis in axes {
        pts = pts
            .into_iter()
            .flat_map(|p| {
                axis.iter().map(move |&v| {
                    let mut q = p.clone();
                    q.push(v);
                    q
                })
            })
            .collect();
    }
    pts
}

/// Exhaustive robustness oracle over the threshold grid of a box: on every
/// axis take the box ends plus each threshold inside the box and its
/// successor. Each cell of the induced grid lies inside a single leaf of
/// every tree, and the probes hit every cell, so the model is robust on the
/// box iff it is robust on the probes. For a model whose splits never fall
/// inside the box this degenerates to corner enumeration.
pub fn robust_by_probing(e: &Ensemble, region: &Region, class: usize) -> bool {
    let axes: Vec<Vec<f32>> = region
        .dims
        .iter()
        .enumerate()
        .map(|(f, iv)| {
            let mut vals = vec![iv.lower, iv.upper];
            for t in e.trees() {
                for n in t.nodes() {
                    if let Node::Split {
                        feature, threshold, ..
                    } = n
                    {
                        if *feature == f && iv.lower <= *threshold && *threshold < iv.upper {
                            vals.push(*threshold);
                            vals.push(threshold.next_up());
                        }
                    }
                }
            }
            vals.sort_by(f32::total_cmp);
            vals.dedup();
            vals
        })
        .collect();
    grid_points(&axes).iter().all(|p| {
        let y = e.eval(p).unwrap();
        treecert::strict_argmax(&y) == Some(class)
    })
}
