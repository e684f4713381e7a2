use std::cell::RefCell;
use std::rc::Rc;

use crate::Arr;

type BackFn = Box<dyn FnOnce(&Arr) -> Vec<Option<Arr>>>;

pub(crate) const NO_PARENT: usize = usize::MAX;

struct Node {
    parents: Vec<usize>,
    back: Option<BackFn>,
}

#[derive(Default)]
struct Tape {
    nodes: Vec<Node>,
    consumed: bool,
}

/// Recording tape for one forward/backward pass. Clones share the tape.
///
/// A graph is single-threaded by construction (`Rc` inside); parallel
/// evaluation over independent inputs is done by giving each worker its own
/// graph, or none at all for inference.
#[derive(Clone, Default)]
pub struct Graph {
    tape: Rc<RefCell<Tape>>,
}

/// A tensor tracked by (at most) one graph. Cloning is cheap.
#[derive(Clone)]
pub struct Var {
    value: Rc<Arr>,
    node: Option<(Graph, usize)>,
}

impl Graph {
    pub fn new() -> Self {
        Self::default()
    }

    /// A leaf variable whose gradient is retained by `backward`.
    pub fn var(&self, value: Arr) -> Var {
        let id = self.push(Vec::new(), None);
        Var {
            value: Rc::new(value),
            node: Some((self.clone(), id)),
        }
    }

    fn push(&self, parents: Vec<usize>, back: Option<BackFn>) -> usize {
        let mut tape = self.tape.borrow_mut();
        assert!(!tape.consumed, "graph already consumed by backward()");
        tape.nodes.push(Node { parents, back });
        tape.nodes.len() - 1
    }

    fn same(&self, other: &Graph) -> bool {
        Rc::ptr_eq(&self.tape, &other.tape)
    }

    pub fn len(&self) -> usize {
        self.tape.borrow().nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Reverse pass from `root` (seeded with ones). Consumes the tape: the
    /// graph cannot record or replay after this call.
    pub fn backward(&self, root: &Var) -> Gradients {
        let (g, root_id) = root
            .node
            .as_ref()
            .expect("backward root is not tracked by any graph");
        assert!(self.same(g), "backward root belongs to a different graph");

        let mut nodes = {
            let mut tape = self.tape.borrow_mut();
            assert!(!tape.consumed, "graph already consumed by backward()");
            tape.consumed = true;
            std::mem::take(&mut tape.nodes)
        };

        let mut grads: Vec<Option<Arr>> = (0..nodes.len()).map(|_| None).collect();
        grads[*root_id] = Some(Arr::ones(root.value.raw_dim()));

        for id in (0..=*root_id).rev() {
            let Some(grad) = grads[id].take() else { continue };
            let node = &mut nodes[id];
            let Some(back) = node.back.take() else {
                // Leaf: keep its gradient for the caller.
                grads[id] = Some(grad);
                continue;
            };
            let parent_grads = back(&grad);
            assert_eq!(parent_grads.len(), node.parents.len());
            for (&pid, pg) in node.parents.iter().zip(parent_grads) {
                let (Some(pg), true) = (pg, pid != NO_PARENT) else { continue };
                match &mut grads[pid] {
                    Some(acc) => *acc += &pg,
                    slot @ None => *slot = Some(pg),
                }
            }
        }
        Gradients { grads }
    }
}

/// Per-leaf gradients produced by [`Graph::backward`].
pub struct Gradients {
    grads: Vec<Option<Arr>>,
}

impl Gradients {
    pub fn get(&self, var: &Var) -> Option<&Arr> {
        let (_, id) = var.node.as_ref()?;
        self.grads.get(*id)?.as_ref()
    }
}

impl Var {
    /// An untracked tensor (no gradient flows into it).
    pub fn constant(value: Arr) -> Var {
        Var {
            value: Rc::new(value),
            node: None,
        }
    }

    pub fn from_shared(value: Rc<Arr>) -> Var {
        Var { value, node: None }
    }

    pub fn value(&self) -> &Arr {
        &self.value
    }

    pub fn shared_value(&self) -> Rc<Arr> {
        Rc::clone(&self.value)
    }

    pub fn shape(&self) -> &[usize] {
        self.value.shape()
    }

    /// Scalar extraction for 1-element tensors.
    pub fn scalar(&self) -> f64 {
        assert_eq!(self.value.len(), 1, "scalar() on non-scalar var");
        *self.value.iter().next().unwrap()
    }

    pub fn is_tracked(&self) -> bool {
        self.node.is_some()
    }
}

/// Registers `value` as the result of an op over `inputs`, with `back`
/// mapping the output gradient to per-input gradients (same order).
///
/// If no input is tracked the closure is dropped immediately and the result
/// is a plain constant, so inference retains nothing.
pub(crate) fn make_op(
    inputs: &[&Var],
    value: Arr,
    back: impl FnOnce(&Arr) -> Vec<Option<Arr>> + 'static,
) -> Var {
    let graph = inputs.iter().find_map(|v| v.node.as_ref().map(|(g, _)| g.clone()));
    let Some(graph) = graph else {
        return Var::constant(value);
    };
    let parents: Vec<usize> = inputs
        .iter()
        .map(|v| match v.node.as_ref() {
            Some((g, id)) => {
                assert!(graph.same(g), "op inputs belong to different graphs");
                *id
            }
            None => NO_PARENT,
        })
        .collect();
    let id = graph.push(parents, Some(Box::new(back)));
    Var {
        value: Rc::new(value),
        node: Some((graph, id)),
    }
}
