//! Weight initialization.

use rand::distributions::{Distribution, Uniform};
use rand::Rng;

use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::seed;

/// `rows × cols` matrix with entries i.i.d. uniform on the open interval
/// `(-√6/fan_in, √6/fan_in)`.
pub fn uniform_fan_in<R: Rng>(rows: usize, cols: usize, fan_in: usize, rng: &mut R) -> Result<Matrix> {
    if fan_in == 0 {
        return Err(Error::invalid("fan-in must be positive"));
    }
    let bound = 6f64.sqrt() / fan_in as f64;
    let dist = Uniform::new(-bound, bound);
    let data = (0..rows * cols)
        .map(|_| loop {
            let w = dist.sample(rng);
            if w > -bound {
                break w;
            }
        })
        .collect();
    Ok(Matrix::from_vec(rows, cols, data))
}

/// Recurrent `n × n` weights, uniform in `(-√6/n, √6/n)` with a zero diagonal.
pub fn kaiming_uniform_recurrent_init(n: usize, seed: u64) -> Result<Matrix> {
    if n == 0 {
        return Err(Error::invalid("recurrent pool must have at least one neuron"));
    }
    let mut m = uniform_fan_in(n, n, n, &mut seed::rng(seed))?;
    m.zero_diagonal();
    Ok(m)
}
