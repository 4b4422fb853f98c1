//! The incentive function: a small graph-convolution network over the
//! observation graph whose relation-node outputs fill the incentive matrix.
//!
//! Weight shapes depend only on the feature width and hidden width, never on
//! scenario size, so one parameter vector evaluates on any crew/target count.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matching::IncentiveMatrix;
use crate::obs::{ObservationGraph, FEATURE_DIM};

/// One undirected weighted edge for graph convolution.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConvEdge {
    pub a: usize,
    pub b: usize,
    pub weight: f64,
}

/// x'_i = W_self x_i + W_neigh * sum_{j in N(i)} e_{j,i} x_j
#[derive(Debug, Clone, PartialEq)]
pub struct GraphConvLayer {
    pub d_in: usize,
    pub d_out: usize,
    /// d_out x d_in, row-major; applied to the node's own features.
    pub w_self: Vec<f64>,
    /// d_out x d_in, row-major; applied to the neighbor sum.
    pub w_neigh: Vec<f64>,
}

impl GraphConvLayer {
    pub fn zeros(d_in: usize, d_out: usize) -> Self {
        Self {
            d_in,
            d_out,
            w_self: vec![0.0; d_out * d_in],
            w_neigh: vec![0.0; d_out * d_in],
        }
    }

    pub fn identity(dim: usize) -> Self {
        let mut layer = Self::zeros(dim, dim);
        for i in 0..dim {
            layer.w_self[i * dim + i] = 1.0;
        }
        layer
    }

    pub fn param_count(&self) -> usize {
        2 * self.d_out * self.d_in
    }

    /// Evaluates the layer on `n_nodes x d_in` features. Edges are
    /// undirected: each contributes its weighted endpoint features to both
    /// neighbor sums.
    pub fn forward(
        &self,
        features: &[f64],
        n_nodes: usize,
        edges: &[ConvEdge],
    ) -> Result<Vec<f64>> {
        if features.len() != n_nodes * self.d_in {
            return Err(Error::InvalidConfig(format!(
                "graph conv expected {} features ({} nodes x {}), got {}",
                n_nodes * self.d_in,
                n_nodes,
                self.d_in,
                features.len()
            )));
        }
        for e in edges {
            if e.a >= n_nodes || e.b >= n_nodes {
                return Err(Error::InvalidConfig(format!(
                    "graph conv edge ({}, {}) out of range for {} nodes",
                    e.a, e.b, n_nodes
                )));
            }
        }

        let d_in = self.d_in;
        let mut neighbor_sum = vec![0.0; n_nodes * d_in];
        for e in edges {
            for k in 0..d_in {
                neighbor_sum[e.a * d_in + k] += e.weight * features[e.b * d_in + k];
                if e.a != e.b {
                    neighbor_sum[e.b * d_in + k] += e.weight * features[e.a * d_in + k];
                }
            }
        }

        let mut out = vec![0.0; n_nodes * self.d_out];
        for i in 0..n_nodes {
            let x = &features[i * d_in..(i + 1) * d_in];
            let s = &neighbor_sum[i * d_in..(i + 1) * d_in];
            let row = &mut out[i * self.d_out..(i + 1) * self.d_out];
            for (o, slot) in row.iter_mut().enumerate() {
                let mut acc = 0.0;
                for k in 0..d_in {
                    acc += self.w_self[o * d_in + k] * x[k] + self.w_neigh[o * d_in + k] * s[k];
                }
                *slot = acc;
            }
        }
        Ok(out)
    }
}

/// Shape descriptor for a flattened parameter vector.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct GenomeLayout {
    pub feature_dim: usize,
    pub hidden: usize,
    pub layers: usize,
}

impl GenomeLayout {
    pub fn new(hidden: usize, layers: usize) -> Self {
        Self {
            feature_dim: FEATURE_DIM,
            hidden,
            layers,
        }
    }

    pub fn param_count(&self) -> usize {
        let mut total = 0;
        let mut d_in = self.feature_dim;
        for _ in 0..self.layers {
            total += 2 * self.hidden * d_in;
            d_in = self.hidden;
        }
        total + self.hidden + 1 // linear head weights + bias
    }
}

/// Flat parameter vector plus its layout; the unit of neuroevolution.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolicyGenome {
    pub layout: GenomeLayout,
    pub values: Vec<f64>,
}

impl PolicyGenome {
    pub fn validate(&self) -> Result<()> {
        if self.values.len() != self.layout.param_count() {
            return Err(Error::GenomeLength {
                got: self.values.len(),
                want: self.layout.param_count(),
            });
        }
        Ok(())
    }
}

/// Graph-convolution actor: L conv layers with tanh between, then a linear
/// head applied to each relation node.
#[derive(Debug, Clone, PartialEq)]
pub struct ActorGnn {
    convs: Vec<GraphConvLayer>,
    head_w: Vec<f64>,
    head_b: f64,
}

impl ActorGnn {
    pub fn zeros(hidden: usize, layers: usize) -> Self {
        assert!(layers >= 1, "actor needs at least one conv layer");
        let mut convs = Vec::with_capacity(layers);
        let mut d_in = FEATURE_DIM;
        for _ in 0..layers {
            convs.push(GraphConvLayer::zeros(d_in, hidden));
            d_in = hidden;
        }
        Self {
            convs,
            head_w: vec![0.0; hidden],
            head_b: 0.0,
        }
    }

    /// Random initialization with N(0, sigma) entries.
    pub fn random(hidden: usize, layers: usize, sigma: f64, rng: &mut impl Rng) -> Self {
        let mut actor = Self::zeros(hidden, layers);
        let layout = actor.layout();
        let values: Vec<f64> = (0..layout.param_count())
            .map(|_| sigma * rng.sample::<f64, _>(StandardNormal))
            .collect();
        actor
            .set_genome_values(&values)
            .expect("layout-sized vector");
        actor
    }

    pub fn layout(&self) -> GenomeLayout {
        GenomeLayout::new(self.convs[0].d_out, self.convs.len())
    }

    pub fn hidden_width(&self) -> usize {
        self.convs[0].d_out
    }

    /// Flattens all parameters: conv layers in order (w_self then w_neigh),
    /// then head weights, then head bias.
    pub fn genome(&self) -> PolicyGenome {
        let layout = self.layout();
        let mut values = Vec::with_capacity(layout.param_count());
        for conv in &self.convs {
            values.extend_from_slice(&conv.w_self);
            values.extend_from_slice(&conv.w_neigh);
        }
        values.extend_from_slice(&self.head_w);
        values.push(self.head_b);
        PolicyGenome { layout, values }
    }

    pub fn from_genome(genome: &PolicyGenome) -> Result<Self> {
        genome.validate()?;
        if genome.layout.feature_dim != FEATURE_DIM {
            return Err(Error::InvalidConfig(format!(
                "genome feature_dim {} unsupported (expected {FEATURE_DIM})",
                genome.layout.feature_dim
            )));
        }
        if genome.layout.hidden == 0 || genome.layout.layers == 0 {
            return Err(Error::InvalidConfig(
                "genome layout needs hidden >= 1 and layers >= 1".into(),
            ));
        }
        let mut actor = Self::zeros(genome.layout.hidden, genome.layout.layers);
        actor.set_genome_values(&genome.values)?;
        Ok(actor)
    }

    /// Writes a flat vector back into the weight tensors (inverse of
    /// `genome`).
    pub fn set_genome_values(&mut self, values: &[f64]) -> Result<()> {
        let want = self.layout().param_count();
        if values.len() != want {
            return Err(Error::GenomeLength {
                got: values.len(),
                want,
            });
        }
        let mut cursor = 0;
        for conv in &mut self.convs {
            let n = conv.w_self.len();
            conv.w_self.copy_from_slice(&values[cursor..cursor + n]);
            cursor += n;
            conv.w_neigh.copy_from_slice(&values[cursor..cursor + n]);
            cursor += n;
        }
        let h = self.head_w.len();
        self.head_w.copy_from_slice(&values[cursor..cursor + h]);
        cursor += h;
        self.head_b = values[cursor];
        Ok(())
    }

    /// Runs the network over an observation and scatters the relation-node
    /// scalars into the incentive matrix by their (crew, target) identity.
    pub fn forward(&self, obs: &ObservationGraph) -> Result<IncentiveMatrix> {
        let n_nodes = obs.node_count();
        let edges: Vec<ConvEdge> = obs
            .edges()
            .into_iter()
            .map(|(a, b)| ConvEdge { a, b, weight: 1.0 })
            .collect();

        let mut x = obs.encode_features();
        for conv in &self.convs {
            x = conv.forward(&x, n_nodes, &edges)?;
            for v in &mut x {
                *v = v.tanh();
            }
        }

        let hidden = self.head_w.len();
        let mut values = Vec::with_capacity(obs.n_relations());
        for r in 0..obs.n_relations() {
            let row = &x[r * hidden..(r + 1) * hidden];
            let score: f64 =
                self.head_w.iter().zip(row).map(|(w, v)| w * v).sum::<f64>() + self.head_b;
            values.push(score);
        }
        IncentiveMatrix::new(obs.n_crews, obs.n_targets(), values)
    }
}
