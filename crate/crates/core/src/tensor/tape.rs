use super::Tensor;

/// Handle to a value recorded on a [`Tape`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Var(pub(crate) usize);

pub(crate) trait Backward {
    /// Accumulates input gradients given the gradient of this node's output.
    fn backward(&self, out_grad: &Tensor, tape: &Tape, grads: &mut Grads);
}

struct Node {
    value: Tensor,
    requires_grad: bool,
    op: Option<Box<dyn Backward>>,
}

/// Records a forward computation so gradients can be pulled back through it.
/// One tape per forward pass; it is not shared between threads.
#[derive(Default)]
pub struct Tape {
    nodes: Vec<Node>,
}

/// Gradient slots indexed by [`Var`].
pub struct Grads {
    slots: Vec<Option<Tensor>>,
    needs: Vec<bool>,
}

impl Grads {
    pub fn needs(&self, v: Var) -> bool {
        self.needs[v.0]
    }

    /// Mutable gradient buffer for `v`, zero-initialised on first touch.
    pub(crate) fn slot(&mut self, v: Var, shape: &[usize]) -> &mut [f64] {
        self.slots[v.0].get_or_insert_with(|| Tensor::zeros(shape)).data_mut()
    }

    pub fn get(&self, v: Var) -> Option<&Tensor> {
        self.slots.get(v.0).and_then(|s| s.as_ref())
    }

    pub fn take(&mut self, v: Var) -> Option<Tensor> {
        self.slots.get_mut(v.0).and_then(|s| s.take())
    }
}

impl Tape {
    pub fn new() -> Self {
        Self::default()
    }

    /// Records a leaf. Parameters pass `requires_grad = true`, data `false`.
    pub fn leaf(&mut self, value: Tensor, requires_grad: bool) -> Var {
        self.nodes.push(Node { value, requires_grad, op: None });
        Var(self.nodes.len() - 1)
    }

    pub fn constant(&mut self, value: Tensor) -> Var {
        self.leaf(value, false)
    }

    pub(crate) fn push(&mut self, value: Tensor, inputs: &[Var], op: impl Backward + 'static) -> Var {
        let requires_grad = inputs.iter().any(|v| self.nodes[v.0].requires_grad);
        let op: Option<Box<dyn Backward>> = if requires_grad { Some(Box::new(op)) } else { None };
        self.nodes.push(Node { value, requires_grad, op });
        Var(self.nodes.len() - 1)
    }

    pub fn value(&self, v: Var) -> &Tensor {
        &self.nodes[v.0].value
    }

    pub fn requires_grad(&self, v: Var) -> bool {
        self.nodes[v.0].requires_grad
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Reverse sweep from `root`, seeded with ones. Returns gradients of every
    /// node that requires them.
    pub fn backward(&self, root: Var) -> Grads {
        let n = self.nodes.len();
        let mut grads = Grads { slots: (0..n).map(|_| None).collect(), needs: self.nodes.iter().map(|x| x.requires_grad).collect() };
        if !self.nodes[root.0].requires_grad {
            return grads;
        }
        grads.slots[root.0] = Some(Tensor::full(self.nodes[root.0].value.shape(), 1.0));
        for i in (0..=root.0).rev() {
            let Some(op) = &self.nodes[i].op else { continue };
            let Some(g) = grads.slots[i].take() else { continue };
            op.backward(&g, self, &mut grads);
            grads.slots[i] = Some(g);
        }
        grads
    }
}
