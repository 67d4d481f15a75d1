//! Monotone value networks: sign-constrained feedforward nets with bounded
//! ReLU activations, plus ensembles exposing mean prediction and epistemic
//! variance.

mod checkpoint;
mod ensemble;
mod network;

pub use checkpoint::{load_ensemble, load_ensemble_from_path, save_ensemble, save_ensemble_to_path, CheckpointError};
pub use ensemble::{EnsembleModel, EnsembleScratch};
pub use network::{backward, forward, forward_cached, initialize, ForwardCache};

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum MvnnError {
    #[error("architecture needs {expected} capacity constants, got {got}")]
    CapacityMismatch { expected: usize, got: usize },
    #[error("cutoffs must be positive, got {cutoff}")]
    NonPositiveCutoff { cutoff: f64 },
    #[error("each hidden layer needs a cutoff: {hidden} widths vs {cutoffs} cutoffs")]
    CutoffCountMismatch { hidden: usize, cutoffs: usize },
    #[error("layer widths must be positive")]
    ZeroWidth,
    #[error("input dimension must be positive")]
    ZeroInput,
    #[error("params shaped for a different architecture (layer {layer}: {got_rows}x{got_cols}, expected {rows}x{cols})")]
    ShapeMismatch {
        layer: usize,
        got_rows: usize,
        got_cols: usize,
        rows: usize,
        cols: usize,
    },
}

/// Network shape: input dimension, hidden widths with one bReLU cutoff per
/// hidden layer, and the non-trainable capacity normalizer (the diagonal
/// 1/c_i scaling on the input).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MvnnArchitecture {
    pub input_dim: usize,
    pub hidden_widths: Vec<usize>,
    pub cutoffs: Vec<f64>,
    pub capacity: Vec<f64>,
}

impl MvnnArchitecture {
    pub fn new(
        input_dim: usize,
        hidden_widths: Vec<usize>,
        cutoffs: Vec<f64>,
        capacity: Vec<f64>,
    ) -> Result<Self, MvnnError> {
        if input_dim == 0 {
            return Err(MvnnError::ZeroInput);
        }
        if capacity.len() != input_dim {
            return Err(MvnnError::CapacityMismatch {
                expected: input_dim,
                got: capacity.len(),
            });
        }
        if hidden_widths.iter().any(|&w| w == 0) {
            return Err(MvnnError::ZeroWidth);
        }
        if cutoffs.len() != hidden_widths.len() {
            return Err(MvnnError::CutoffCountMismatch {
                hidden: hidden_widths.len(),
                cutoffs: cutoffs.len(),
            });
        }
        if let Some(&t) = cutoffs.iter().find(|&&t| !(t > 0.0)) {
            return Err(MvnnError::NonPositiveCutoff { cutoff: t });
        }
        Ok(MvnnArchitecture {
            input_dim,
            hidden_widths,
            cutoffs,
            capacity,
        })
    }

    /// Two hidden layers of width 20 with unit cutoffs and unit capacity:
    /// small enough that hundreds of fine-tuning epochs run in seconds.
    pub fn default_for(input_dim: usize) -> Self {
        MvnnArchitecture::new(
            input_dim,
            vec![20, 20],
            vec![1.0, 1.0],
            vec![1.0; input_dim],
        )
        .expect("default architecture is valid")
    }

    /// Number of weight matrices (hidden layers + output layer).
    pub fn num_layers(&self) -> usize {
        self.hidden_widths.len() + 1
    }

    /// (rows, cols) of each weight matrix, input to output.
    pub fn layer_dims(&self) -> Vec<(usize, usize)> {
        let mut dims = Vec::with_capacity(self.num_layers());
        let mut fan_in = self.input_dim;
        for &w in &self.hidden_widths {
            dims.push((w, fan_in));
            fan_in = w;
        }
        dims.push((1, fan_in));
        dims
    }
}

/// Dense row-major matrix, just big enough for this crate's needs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Matrix {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn from_rows(rows: Vec<Vec<f64>>) -> Self {
        let r = rows.len();
        let c = rows.first().map_or(0, |row| row.len());
        let mut data = Vec::with_capacity(r * c);
        for row in rows {
            assert_eq!(row.len(), c, "ragged matrix rows");
            data.extend(row);
        }
        Matrix { rows: r, cols: c, data }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.cols + c]
    }

    #[inline]
    pub fn set(&mut self, r: usize, c: usize, v: f64) {
        self.data[r * self.cols + c] = v;
    }

    #[inline]
    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    #[inline]
    pub fn row_mut(&mut self, r: usize) -> &mut [f64] {
        &mut self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn fill(&mut self, v: f64) {
        self.data.fill(v);
    }
}

/// Trainable parameters: non-negative weight matrices and non-positive
/// biases (the output layer carries no bias).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MvnnParams {
    pub weights: Vec<Matrix>,
    pub biases: Vec<Vec<f64>>,
}

impl MvnnParams {
    pub fn zeros(arch: &MvnnArchitecture) -> Self {
        let dims = arch.layer_dims();
        let weights = dims.iter().map(|&(r, c)| Matrix::zeros(r, c)).collect();
        let biases = dims[..dims.len() - 1]
            .iter()
            .map(|&(r, _)| vec![0.0; r])
            .collect();
        MvnnParams { weights, biases }
    }

    pub fn matches(&self, arch: &MvnnArchitecture) -> Result<(), MvnnError> {
        let dims = arch.layer_dims();
        if self.weights.len() != dims.len() || self.biases.len() + 1 != dims.len() {
            return Err(MvnnError::ShapeMismatch {
                layer: 0,
                got_rows: self.weights.len(),
                got_cols: self.biases.len(),
                rows: dims.len(),
                cols: dims.len() - 1,
            });
        }
        for (i, (w, &(r, c))) in self.weights.iter().zip(&dims).enumerate() {
            if w.rows() != r || w.cols() != c {
                return Err(MvnnError::ShapeMismatch {
                    layer: i,
                    got_rows: w.rows(),
                    got_cols: w.cols(),
                    rows: r,
                    cols: c,
                });
            }
        }
        Ok(())
    }

    pub fn param_count(&self) -> usize {
        self.weights.iter().map(|w| w.data().len()).sum::<usize>()
            + self.biases.iter().map(|b| b.len()).sum::<usize>()
    }

    pub fn values(&self) -> impl Iterator<Item = f64> + '_ {
        self.weights
            .iter()
            .flat_map(|w| w.data().iter().copied())
            .chain(self.biases.iter().flat_map(|b| b.iter().copied()))
    }

    pub fn values_mut(&mut self) -> impl Iterator<Item = &mut f64> + '_ {
        self.weights
            .iter_mut()
            .flat_map(|w| w.data_mut().iter_mut())
            .chain(self.biases.iter_mut().flat_map(|b| b.iter_mut()))
    }

    pub fn fill(&mut self, v: f64) {
        for x in self.values_mut() {
            *x = v;
        }
    }

    pub fn l2_norm_squared(&self) -> f64 {
        self.values().map(|v| v * v).sum()
    }

    /// True when every weight is >= 0 and every bias <= 0.
    pub fn signs_ok(&self) -> bool {
        self.weights
            .iter()
            .all(|w| w.data().iter().all(|&v| v >= 0.0))
            && self.biases.iter().all(|b| b.iter().all(|&v| v <= 0.0))
    }

    /// Clamps weights to [0, inf) and biases to (-inf, 0]. Idempotent.
    pub fn project(&mut self) {
        for w in &mut self.weights {
            for v in w.data_mut() {
                if *v < 0.0 {
                    *v = 0.0;
                }
            }
        }
        for b in &mut self.biases {
            for v in b.iter_mut() {
                if *v > 0.0 {
                    *v = 0.0;
                }
            }
        }
    }
}
