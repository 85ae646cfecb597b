use std::cell::RefCell;
use std::collections::{HashMap, HashSet};
use std::fmt;

use crate::params::{ParamId, ParamStore};
use crate::tensor::Tensor;

pub(crate) type BackwardFn = Box<dyn Fn(&Tensor) -> Vec<Option<Tensor>>>;

struct Node {
    value: Tensor,
    parents: Vec<usize>,
    backward: Option<BackwardFn>,
    tracked: bool,
}

/// Records operations so gradients can be pulled back from a scalar loss.
///
/// A tape built with [`Tape::no_grad`] never tracks anything; every op still
/// computes its forward value but stores no backward closure.
pub struct Tape {
    nodes: RefCell<Vec<Node>>,
    params: RefCell<HashMap<(u64, usize), usize>>,
    frozen: RefCell<HashSet<u64>>,
    grad_enabled: bool,
}

impl Default for Tape {
    fn default() -> Self {
        Self::new()
    }
}

impl fmt::Debug for Tape {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Tape")
            .field("nodes", &self.nodes.borrow().len())
            .field("grad_enabled", &self.grad_enabled)
            .finish()
    }
}

/// Handle to a value recorded on a [`Tape`].
#[derive(Clone, Copy)]
pub struct Var<'t> {
    pub(crate) tape: &'t Tape,
    pub(crate) id: usize,
}

impl fmt::Debug for Var<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Var#{}{:?}", self.id, self.shape())
    }
}

impl Tape {
    pub fn new() -> Self {
        Self {
            nodes: RefCell::new(Vec::new()),
            params: RefCell::new(HashMap::new()),
            frozen: RefCell::new(HashSet::new()),
            grad_enabled: true,
        }
    }

    pub fn no_grad() -> Self {
        Self {
            grad_enabled: false,
            ..Self::new()
        }
    }

    pub fn grad_enabled(&self) -> bool {
        self.grad_enabled
    }

    pub fn len(&self) -> usize {
        self.nodes.borrow().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Treat every parameter of `store` as a constant on this tape.
    pub fn freeze(&self, store: &ParamStore) {
        self.frozen.borrow_mut().insert(store.uid());
    }

    pub fn constant(&self, value: Tensor) -> Var<'_> {
        self.push_leaf(value, false)
    }

    /// A leaf whose gradient is reported by [`Tape::backward`].
    pub fn leaf(&self, value: Tensor) -> Var<'_> {
        self.push_leaf(value, self.grad_enabled)
    }

    /// Brings a stored parameter onto the tape. Frozen stores (or stores frozen
    /// on this tape) enter as constants; buffers are never tracked.
    pub fn param(&self, store: &ParamStore, id: ParamId) -> Var<'_> {
        let key = (store.uid(), id.index());
        if let Some(&node) = self.params.borrow().get(&key) {
            return Var { tape: self, id: node };
        }
        let tracked = self.grad_enabled
            && store.is_trainable(id)
            && !store.is_frozen()
            && !self.frozen.borrow().contains(&store.uid());
        let var = self.push_leaf(store.get(id).clone(), tracked);
        self.params.borrow_mut().insert(key, var.id);
        var
    }

    fn push_leaf(&self, value: Tensor, tracked: bool) -> Var<'_> {
        let mut nodes = self.nodes.borrow_mut();
        nodes.push(Node {
            value,
            parents: Vec::new(),
            backward: None,
            tracked,
        });
        Var {
            tape: self,
            id: nodes.len() - 1,
        }
    }

    /// Records the result of an op. `backward` maps the output gradient onto
    /// one optional gradient per parent, in order.
    pub(crate) fn push_op(
        &self,
        value: Tensor,
        parents: &[Var<'_>],
        backward: impl Fn(&Tensor) -> Vec<Option<Tensor>> + 'static,
    ) -> Var<'_> {
        let mut nodes = self.nodes.borrow_mut();
        let tracked = self.grad_enabled && parents.iter().any(|p| nodes[p.id].tracked);
        nodes.push(Node {
            value,
            parents: parents.iter().map(|p| p.id).collect(),
            backward: if tracked {
                Some(Box::new(backward))
            } else {
                None
            },
            tracked,
        });
        Var {
            tape: self,
            id: nodes.len() - 1,
        }
    }

    pub(crate) fn value_of(&self, id: usize) -> Tensor {
        self.nodes.borrow()[id].value.clone()
    }

    pub(crate) fn is_tracked(&self, id: usize) -> bool {
        self.nodes.borrow()[id].tracked
    }

    /// Reverse pass from a single-element `loss`.
    pub fn backward(&self, loss: Var<'_>) -> Gradients {
        let nodes = self.nodes.borrow();
        assert_eq!(
            nodes[loss.id].value.numel(),
            1,
            "backward requires a scalar loss"
        );
        let mut grads: Vec<Option<Tensor>> = vec![None; loss.id + 1];
        if nodes[loss.id].tracked {
            grads[loss.id] = Some(Tensor::ones(nodes[loss.id].value.shape()));
        }
        let mut leaves = HashMap::new();
        for id in (0..=loss.id).rev() {
            let Some(grad) = grads[id].take() else {
                continue;
            };
            let node = &nodes[id];
            match &node.backward {
                Some(backward) => {
                    let parent_grads = backward(&grad);
                    debug_assert_eq!(parent_grads.len(), node.parents.len());
                    for (&pid, pg) in node.parents.iter().zip(parent_grads) {
                        let Some(pg) = pg else { continue };
                        if !nodes[pid].tracked {
                            continue;
                        }
                        debug_assert_eq!(pg.shape(), nodes[pid].value.shape(), "grad shape");
                        match &mut grads[pid] {
                            Some(acc) => acc.accumulate(&pg),
                            slot => *slot = Some(pg),
                        }
                    }
                }
                None => {
                    leaves.insert(id, grad);
                }
            }
        }
        Gradients {
            by_node: leaves,
            params: self.params.borrow().clone(),
        }
    }
}

/// Leaf gradients produced by [`Tape::backward`].
#[derive(Debug, Default)]
pub struct Gradients {
    by_node: HashMap<usize, Tensor>,
    params: HashMap<(u64, usize), usize>,
}

impl Gradients {
    pub fn wrt(&self, var: Var<'_>) -> Option<&Tensor> {
        self.by_node.get(&var.id)
    }

    pub fn param(&self, store: &ParamStore, id: ParamId) -> Option<&Tensor> {
        self.params
            .get(&(store.uid(), id.index()))
            .and_then(|node| self.by_node.get(node))
    }

    /// L2 norm over every gradient that reached `store`.
    pub fn norm_for(&self, store: &ParamStore) -> f64 {
        store
            .ids()
            .filter_map(|id| self.param(store, id))
            .map(|g| g.dot(g))
            .sum::<f64>()
            .sqrt()
    }

    /// True if any parameter of `store` received a gradient.
    pub fn touches(&self, store: &ParamStore) -> bool {
        store.ids().any(|id| self.param(store, id).is_some())
    }
}

impl<'t> Var<'t> {
    pub fn value(&self) -> Tensor {
        self.tape.value_of(self.id)
    }

    pub fn shape(&self) -> Vec<usize> {
        self.tape.nodes.borrow()[self.id].value.shape().to_vec()
    }

    pub fn tape(&self) -> &'t Tape {
        self.tape
    }

    pub fn is_tracked(&self) -> bool {
        self.tape.is_tracked(self.id)
    }

    /// Same value, cut from the graph.
    pub fn detach(&self) -> Var<'t> {
        self.tape.constant(self.value())
    }

    pub fn item(&self) -> f64 {
        self.value().item()
    }
}
