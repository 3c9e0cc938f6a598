use std::collections::{HashMap, HashSet};

use super::{BackwardCtx, Tensor};
use crate::error::{Error, Result};

/// Operation nodes reachable from a root, in topological order: every tensor
/// appears after all of its parents. Untracked tensors are omitted.
pub struct Graph {
    order: Vec<Tensor>,
}

impl Graph {
    pub fn from_root(root: &Tensor) -> Graph {
        let mut order = Vec::new();
        let mut seen = HashSet::new();
        if !root.is_tracked() {
            return Graph { order };
        }
        // iterative post-order DFS
        let mut stack: Vec<(Tensor, bool)> = vec![(root.clone(), false)];
        while let Some((t, expanded)) = stack.pop() {
            if expanded {
                order.push(t);
                continue;
            }
            if !seen.insert(t.id()) {
                continue;
            }
            stack.push((t.clone(), true));
            for p in t.parents().iter().rev() {
                if p.is_tracked() && !seen.contains(&p.id()) {
                    stack.push((p.clone(), false));
                }
            }
        }
        Graph { order }
    }

    pub fn nodes(&self) -> &[Tensor] {
        &self.order
    }

    pub fn len(&self) -> usize {
        self.order.len()
    }

    pub fn is_empty(&self) -> bool {
        self.order.is_empty()
    }
}

impl Tensor {
    /// Reverse-mode pass from a scalar loss. Populates `grad` on every tracked
    /// leaf reachable from `self`; contributions accumulate additively.
    ///
    /// Each forward graph supports exactly one backward pass.
    pub fn backward(&self) -> Result<()> {
        if self.numel() != 1 {
            return Err(Error::NonScalarLoss(self.shape().to_vec()));
        }
        if !self.is_tracked() {
            return Ok(());
        }
        let graph = Graph::from_root(self);
        let consumed = graph
            .nodes()
            .iter()
            .filter_map(Tensor::node)
            .any(|n| n.backward.borrow().is_none());
        if consumed {
            return Err(Error::GraphConsumed);
        }

        let mut grads: HashMap<u64, Vec<f64>> = HashMap::new();
        grads.insert(self.id(), vec![1.0]);
        for t in graph.nodes().iter().rev() {
            let Some(g) = grads.remove(&t.id()) else {
                continue;
            };
            let Some(node) = t.node() else {
                t.accumulate_grad(&g);
                continue;
            };
            let backward = node
                .backward
                .borrow_mut()
                .take()
                .ok_or(Error::GraphConsumed)?;
            let parent_grads = backward(&BackwardCtx {
                grad: &g,
                output: t.data(),
                parents: &node.parents,
            });
            for (p, pg) in node.parents.iter().zip(parent_grads) {
                let Some(pg) = pg else { continue };
                if !p.is_tracked() {
                    continue;
                }
                debug_assert_eq!(pg.len(), p.numel(), "gradient length for {:?}", node.op);
                match grads.get_mut(&p.id()) {
                    Some(acc) => acc.iter_mut().zip(&pg).for_each(|(a, b)| *a += b),
                    None => {
                        grads.insert(p.id(), pg);
                    }
                }
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn polynomial_gradient() {
        let x = Tensor::scalar(3.0).requires_grad();
        x.mul(&x).unwrap().backward().unwrap();
        assert_eq!(x.grad().unwrap(), vec![6.0]);
    }

    #[test]
    fn fan_out_accumulates() {
        let a = Tensor::new(&[3], vec![1.0, -2.0, 0.5]).unwrap().requires_grad();
        a.add(&a).unwrap().sum().backward().unwrap();
        assert_eq!(a.grad().unwrap(), vec![2.0; 3]);

        let b = Tensor::new(&[2], vec![1.0, 2.0]).unwrap().requires_grad();
        let k = 5;
        let mut acc = b.clone();
        for _ in 1..k {
            acc = acc.add(&b).unwrap();
        }
        acc.sum().backward().unwrap();
        assert_eq!(b.grad().unwrap(), vec![k as f64; 2]);
    }

    #[test]
    fn identity_contributes_one() {
        let x = Tensor::new(&[4], vec![0.3; 4]).unwrap().requires_grad();
        x.sum().backward().unwrap();
        assert_eq!(x.grad().unwrap(), vec![1.0; 4]);
    }

    #[test]
    fn double_backward_is_an_error() {
        let x = Tensor::scalar(2.0).requires_grad();
        let y = x.mul(&x).unwrap();
        y.backward().unwrap();
        assert!(matches!(y.backward(), Err(Error::GraphConsumed)));
        // a new loss sharing a consumed subgraph is rejected as well
        let z = y.add(&x).unwrap();
        assert!(matches!(z.backward(), Err(Error::GraphConsumed)));
    }

    #[test]
    fn non_scalar_loss_is_an_error() {
        let x = Tensor::ones(&[2]).unwrap().requires_grad();
        assert!(matches!(x.relu().backward(), Err(Error::NonScalarLoss(_))));
    }

    #[test]
    fn graph_is_topologically_ordered() {
        let a = Tensor::randn(&[3], 1, 1.0).unwrap().requires_grad();
        let b = Tensor::randn(&[3], 2, 1.0).unwrap().requires_grad();
        let c = a.mul(&b).unwrap();
        let d = c.add(&a).unwrap().sigmoid();
        let e = d.mul(&c).unwrap().sum();
        let g = Graph::from_root(&e);
        let pos: HashMap<u64, usize> =
            g.nodes().iter().enumerate().map(|(i, t)| (t.id(), i)).collect();
        assert_eq!(g.len(), 7);
        for t in g.nodes() {
            for p in t.parents() {
                assert!(pos[&p.id()] < pos[&t.id()]);
            }
        }
    }

    #[test]
    fn backward_leaves_leaf_data_untouched() {
        let x = Tensor::new(&[2], vec![1.0, 2.0]).unwrap().requires_grad();
        x.exp().sum().backward().unwrap();
        assert_eq!(x.data(), &[1.0, 2.0]);
    }
}
