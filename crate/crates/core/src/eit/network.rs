//! Nodal analysis of linear resistor networks driven by a current source.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};

use crate::error::{Error, Result};

/// Undirected resistor network; nodes are numbered from 0.
#[derive(Debug, Clone)]
pub struct ResistorNetwork {
    n_nodes: usize,
    /// `(node, node, conductance in S)`
    edges: Vec<(usize, usize, f64)>,
}

impl ResistorNetwork {
    pub fn new(n_nodes: usize, edges: Vec<(usize, usize, f64)>) -> Result<Self> {
        if n_nodes < 2 {
            return Err(Error::Model("network needs at least two nodes".into()));
        }
        for &(a, b, g) in &edges {
            if a >= n_nodes || b >= n_nodes || a == b {
                return Err(Error::Model(format!("bad edge ({a}, {b})")));
            }
            if !(g > 0.0 && g.is_finite()) {
                return Err(Error::Model(format!("edge ({a}, {b}) has conductance {g}")));
            }
        }
        Ok(Self { n_nodes, edges })
    }

    pub fn n_nodes(&self) -> usize {
        self.n_nodes
    }

    /// Weighted graph Laplacian (nodal conductance matrix).
    pub fn laplacian(&self) -> DMatrix<f64> {
        let mut l = DMatrix::zeros(self.n_nodes, self.n_nodes);
        for &(a, b, g) in &self.edges {
            l[(a, a)] += g;
            l[(b, b)] += g;
            l[(a, b)] -= g;
            l[(b, a)] -= g;
        }
        l
    }

    /// Factors the Kirchhoff current-law system with the last node grounded.
    pub fn factor(&self) -> Result<NodalSolver> {
        self.factor_grounded(self.n_nodes - 1)
    }

    /// Factors with `ground` held at zero potential. Potentials near the
    /// ground carry the smallest rounding error.
    pub fn factor_grounded(&self, ground: usize) -> Result<NodalSolver> {
        if ground >= self.n_nodes {
            return Err(Error::Model(format!("ground node {ground} outside 0..{}", self.n_nodes)));
        }
        let keep: Vec<usize> = (0..self.n_nodes).filter(|&i| i != ground).collect();
        let l = self.laplacian();
        let reduced = DMatrix::from_fn(keep.len(), keep.len(), |i, j| l[(keep[i], keep[j])]);
        let chol = Cholesky::new(reduced)
            .ok_or_else(|| Error::Model("network is not connected".into()))?;
        Ok(NodalSolver {
            chol,
            n_nodes: self.n_nodes,
            ground,
            edges: self.edges.clone(),
        })
    }
}

#[derive(Debug, Clone)]
pub struct NodalSolver {
    chol: Cholesky<f64, Dyn>,
    n_nodes: usize,
    ground: usize,
    edges: Vec<(usize, usize, f64)>,
}

/// Refinement sweeps after the initial solve.
const REFINE_STEPS: usize = 3;

/// Node potentials for one current injection.
#[derive(Debug, Clone)]
pub struct NodalSolution {
    pub potentials: Vec<f64>,
    /// Prescribed net current into each node.
    pub injected: Vec<f64>,
}

impl NodalSolver {
    /// Potentials for `current` amperes entering at `source` and leaving at
    /// `sink`, referenced to the grounded node.
    pub fn solve(&self, source: usize, sink: usize, current: f64) -> Result<NodalSolution> {
        let n = self.n_nodes;
        if source >= n || sink >= n {
            return Err(Error::Electrode(format!(
                "injection nodes ({source}, {sink}) outside 0..{n}"
            )));
        }
        if source == sink {
            return Err(Error::Electrode("source and sink coincide".into()));
        }
        let mut injected = vec![0.0; n];
        injected[source] += current;
        injected[sink] -= current;
        // Eliminating leaf nodes cancels conductances of very different size,
        // and the drive current cancels at every node it passes through. The
        // factored solve is therefore refined against an edgewise residual
        // evaluated in double-double arithmetic, with potentials carried as
        // unevaluated sums.
        let gnd = self.ground;
        let mut v = vec![Dd::ZERO; n];
        let mut residual: Vec<f64> = injected.clone();
        for _ in 0..=REFINE_STEPS {
            let r: Vec<f64> = residual.iter().enumerate().filter(|&(i, _)| i != gnd).map(|(_, &r)| r).collect();
            let dv = self.chol.solve(&DVector::from_vec(r));
            for (i, d) in (0..n).filter(|&i| i != gnd).zip(dv.iter()) {
                v[i] = v[i].add(Dd::from(*d));
            }
            let mut acc: Vec<Dd> = injected.iter().map(|&f| Dd::from(f)).collect();
            for &(a, b, g) in &self.edges {
                let i = v[a].sub(v[b]).scale(g);
                acc[a] = acc[a].sub(i);
                acc[b] = acc[b].add(i);
            }
            residual = acc.iter().map(Dd::value).collect();
        }
        Ok(NodalSolution {
            potentials: v.iter().map(Dd::value).collect(),
            injected,
        })
    }
}

/// Error-free transformation: `s + e == a + b` exactly.
fn two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    let bb = s - a;
    (s, (a - (s - bb)) + (b - bb))
}

/// Double-double value `hi + lo` with `|lo| <= ulp(hi) / 2`.
#[derive(Debug, Clone, Copy)]
struct Dd {
    hi: f64,
    lo: f64,
}

impl Dd {
    const ZERO: Dd = Dd { hi: 0.0, lo: 0.0 };

    fn from(x: f64) -> Self {
        Self { hi: x, lo: 0.0 }
    }

    fn value(&self) -> f64 {
        self.hi + self.lo
    }

    fn renorm(hi: f64, lo: f64) -> Self {
        let (hi, lo) = two_sum(hi, lo);
        Self { hi, lo }
    }

    fn add(self, o: Dd) -> Self {
        let (s, e) = two_sum(self.hi, o.hi);
        Self::renorm(s, e + self.lo + o.lo)
    }

    fn sub(self, o: Dd) -> Self {
        self.add(Dd { hi: -o.hi, lo: -o.lo })
    }

    fn scale(self, g: f64) -> Self {
        let p = self.hi * g;
        let e = self.hi.mul_add(g, -p);
        Self::renorm(p, e + self.lo * g)
    }
}

impl NodalSolution {
    /// Net current leaving each node through the network branches, `L v`.
    pub fn nodal_currents(&self, network: &ResistorNetwork) -> Vec<f64> {
        let v = DVector::from_column_slice(&self.potentials);
        (network.laplacian() * v).as_slice().to_vec()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_bad_networks() {
        assert!(ResistorNetwork::new(1, vec![]).is_err());
        assert!(ResistorNetwork::new(3, vec![(0, 3, 1.0)]).is_err());
        assert!(ResistorNetwork::new(3, vec![(0, 1, 0.0)]).is_err());
        let disconnected = ResistorNetwork::new(3, vec![(0, 1, 1.0)]).unwrap();
        assert!(disconnected.factor().is_err());
    }

    #[test]
    fn parallel_resistors() {
        // two 1 S paths between the nodes form 0.5 ohm
        let net = ResistorNetwork::new(2, vec![(0, 1, 1.0), (0, 1, 1.0)]).unwrap();
        let sol = net.factor().unwrap().solve(0, 1, 1.0).unwrap();
        assert!((sol.potentials[0] - sol.potentials[1] - 0.5).abs() < 1e-15);
    }

    #[test]
    fn kcl_holds_on_a_mesh() {
        // Wheatstone-style bridge
        let net = ResistorNetwork::new(
            4,
            vec![(0, 1, 0.5), (0, 2, 0.25), (1, 2, 2.0), (1, 3, 1.0), (2, 3, 0.125)],
        )
        .unwrap();
        let sol = net.factor().unwrap().solve(0, 3, 1e-3).unwrap();
        let currents = sol.nodal_currents(&net);
        for (c, i) in currents.iter().zip(&sol.injected) {
            assert!((c - i).abs() < 1e-15);
        }
        assert!(currents.iter().sum::<f64>().abs() < 1e-15);
    }
}
