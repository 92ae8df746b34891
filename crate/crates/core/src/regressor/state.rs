use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Window length and channel counts of the regressor state.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct StateMapSpec {
    pub ell: usize,
    pub n_u: usize,
    pub n_y: usize,
}

impl StateMapSpec {
    pub fn new(ell: usize, n_u: usize, n_y: usize) -> Result<Self> {
        let spec = Self { ell, n_u, n_y };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if self.ell == 0 || self.n_u == 0 || self.n_y == 0 {
            return Err(Error::Config(format!(
                "window length and channel counts must be >= 1, got ell={} n_u={} n_y={}",
                self.ell, self.n_u, self.n_y
            )));
        }
        Ok(())
    }

    /// Width of one `(u, y)` block.
    pub fn block(&self) -> usize {
        self.n_u + self.n_y
    }

    /// `L = ell * (n_u + n_y)`.
    pub fn state_dim(&self) -> usize {
        self.ell * self.block()
    }

    /// Input width of the output map: state followed by the current input.
    pub fn input_dim(&self) -> usize {
        self.state_dim() + self.n_u
    }

    /// Offset of the newest block's output slot.
    pub(crate) fn last_y_offset(&self) -> usize {
        (self.ell - 1) * self.block() + self.n_u
    }
}

/// Concatenate `ell` input/output pairs, oldest first, into `(u, y, u, y, ...)`.
pub fn build_state(spec: &StateMapSpec, inputs: &[Vec<f64>], outputs: &[Vec<f64>]) -> Result<Vec<f64>> {
    if inputs.len() != spec.ell || outputs.len() != spec.ell {
        return Err(Error::Usage(format!(
            "state window needs exactly {} input/output pairs, got {} inputs and {} outputs",
            spec.ell,
            inputs.len(),
            outputs.len()
        )));
    }
    let mut z = Vec::with_capacity(spec.state_dim());
    for (u, y) in inputs.iter().zip(outputs) {
        if u.len() != spec.n_u {
            return Err(Error::shape("window input", spec.n_u, u.len()));
        }
        if y.len() != spec.n_y {
            return Err(Error::shape("window output", spec.n_y, y.len()));
        }
        z.extend_from_slice(u);
        z.extend_from_slice(y);
    }
    Ok(z)
}

/// Drop the oldest block and append `(u, y)`, in place. Lengths are the caller's
/// responsibility (checked in debug builds).
pub fn shift_in_place(spec: &StateMapSpec, z: &mut [f64], u: &[f64], y: &[f64]) {
    debug_assert_eq!(z.len(), spec.state_dim());
    let m = spec.block();
    z.copy_within(m.., 0);
    let last = z.len() - m;
    z[last..last + spec.n_u].copy_from_slice(u);
    z[last + spec.n_u..].copy_from_slice(y);
}

pub fn shift_update(spec: &StateMapSpec, z: &[f64], u: &[f64], y: &[f64]) -> Result<Vec<f64>> {
    if z.len() != spec.state_dim() {
        return Err(Error::shape("state", spec.state_dim(), z.len()));
    }
    if u.len() != spec.n_u {
        return Err(Error::shape("input", spec.n_u, u.len()));
    }
    if y.len() != spec.n_y {
        return Err(Error::shape("output", spec.n_y, y.len()));
    }
    let mut next = z.to_vec();
    shift_in_place(spec, &mut next, u, y);
    Ok(next)
}

/// The linear shift realization `z' = Abar z + Bbar u + Sbar y` as explicit matrices.
#[derive(Debug, Clone, PartialEq)]
pub struct CanonicalMatrices {
    pub abar: DMatrix<f64>,
    pub bbar: DMatrix<f64>,
    pub sbar: DMatrix<f64>,
}

impl CanonicalMatrices {
    pub fn apply(&self, z: &[f64], u: &[f64], y: &[f64]) -> Vec<f64> {
        let next = &self.abar * DVector::from_column_slice(z)
            + &self.bbar * DVector::from_column_slice(u)
            + &self.sbar * DVector::from_column_slice(y);
        next.as_slice().to_vec()
    }
}

/// `Abar = A (x) I_m` with `A` the ell-by-ell upper shift; `Bbar`, `Sbar` write the
/// newest block's input and output slots.
pub fn canonical_matrices(spec: &StateMapSpec) -> CanonicalMatrices {
    let l = spec.state_dim();
    let m = spec.block();
    let mut abar = DMatrix::zeros(l, l);
    for i in 0..spec.ell - 1 {
        for j in 0..m {
            abar[(i * m + j, (i + 1) * m + j)] = 1.0;
        }
    }
    let base = (spec.ell - 1) * m;
    let mut bbar = DMatrix::zeros(l, spec.n_u);
    for j in 0..spec.n_u {
        bbar[(base + j, j)] = 1.0;
    }
    let mut sbar = DMatrix::zeros(l, spec.n_y);
    for j in 0..spec.n_y {
        sbar[(base + spec.n_u + j, j)] = 1.0;
    }
    CanonicalMatrices { abar, bbar, sbar }
}
