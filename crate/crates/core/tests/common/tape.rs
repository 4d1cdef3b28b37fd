//! Minimal reverse-mode automatic differentiation over scalars.

#[derive(Clone, Copy, Debug)]
pub struct Var(pub usize);

struct Node {
    value: f64,
    parents: [(usize, f64); 2],
    arity: u8,
}

#[derive(Default)]
pub struct Tape {
    nodes: Vec<Node>,
}

impl Tape {
    pub fn new() -> Self {
        Self::default()
    }

    fn push(&mut self, value: f64, parents: &[(usize, f64)]) -> Var {
        let mut p = [(0, 0.0); 2];
        p[..parents.len()].copy_from_slice(parents);
        self.nodes.push(Node { value, parents: p, arity: parents.len() as u8 });
        Var(self.nodes.len() - 1)
    }

    pub fn input(&mut self, v: f64) -> Var {
        self.push(v, &[])
    }

    pub fn constant(&mut self, v: f64) -> Var {
        self.push(v, &[])
    }

    pub fn value(&self, v: Var) -> f64 {
        self.nodes[v.0].value
    }

    pub fn add(&mut self, a: Var, b: Var) -> Var {
        let v = self.value(a) + self.value(b);
        self.push(v, &[(a.0, 1.0), (b.0, 1.0)])
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Var {
        let v = self.value(a) - self.value(b);
        self.push(v, &[(a.0, 1.0), (b.0, -1.0)])
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Var {
        let (x, y) = (self.value(a), self.value(b));
        self.push(x * y, &[(a.0, y), (b.0, x)])
    }

    pub fn div(&mut self, a: Var, b: Var) -> Var {
        let (x, y) = (self.value(a), self.value(b));
        self.push(x / y, &[(a.0, 1.0 / y), (b.0, -x / (y * y))])
    }

    pub fn exp(&mut self, a: Var) -> Var {
        let e = self.value(a).exp();
        self.push(e, &[(a.0, e)])
    }

    pub fn ln(&mut self, a: Var) -> Var {
        let x = self.value(a);
        self.push(x.ln(), &[(a.0, 1.0 / x)])
    }

    /// Heaviside step `u ≥ θ` whose derivative is replaced by `min(max(u - θ + 1, 0), 1)`.
    pub fn spike(&mut self, u: Var, theta: Var) -> Var {
        let x = self.value(u) - self.value(theta);
        let fired = if x >= 0.0 { 1.0 } else { 0.0 };
        let d = if x + 1.0 <= 0.0 {
            0.0
        } else if x + 1.0 >= 1.0 {
            1.0
        } else {
            x + 1.0
        };
        self.push(fired, &[(u.0, d), (theta.0, -d)])
    }

    /// Adjoint of every node with respect to `out`.
    pub fn backward(&self, out: Var) -> Vec<f64> {
        let mut adj = vec![0.0; self.nodes.len()];
        adj[out.0] = 1.0;
        for i in (0..=out.0).rev() {
            let a = adj[i];
            if a == 0.0 {
                continue;
            }
            let node = &self.nodes[i];
            for &(p, w) in &node.parents[..node.arity as usize] {
                adj[p] += a * w;
            }
        }
        adj
    }
}
