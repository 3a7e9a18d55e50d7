//! Scaled dot-product attention from a single group query over node rows.

use rand::Rng;

use super::layers::uniform_init;
use super::tape::{Tape, Var};
use super::tensor::Tensor;
use crate::scalar::Scalar;
use crate::{Error, Result};

/// Projections of one head. No bias terms.
#[derive(Clone, Debug, PartialEq)]
pub struct AttentionHead<T> {
    pub w_q: Tensor<T>,
    pub w_k: Tensor<T>,
    pub w_v: Tensor<T>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct AttentionParams<T> {
    heads: Vec<AttentionHead<T>>,
    w_o: Tensor<T>,
    d_m: usize,
}

impl<T: Scalar> AttentionParams<T> {
    /// Random projections; `d_q` is the query width, `d_m` the node width.
    pub fn new<R: Rng + ?Sized>(
        d_q: usize,
        d_m: usize,
        d_k: usize,
        d_v: usize,
        heads: usize,
        rng: &mut R,
    ) -> Result<Self> {
        if heads == 0 || d_k == 0 || d_v == 0 || d_q == 0 || d_m == 0 {
            return Err(Error::InvalidParameter(format!(
                "attention dimensions must be positive (heads={heads}, d_q={d_q}, d_m={d_m}, d_k={d_k}, d_v={d_v})"
            )));
        }
        let heads = (0..heads)
            .map(|_| AttentionHead {
                w_q: uniform_init(d_q, d_k, d_q, rng),
                w_k: uniform_init(d_m, d_k, d_m, rng),
                w_v: uniform_init(d_m, d_v, d_m, rng),
            })
            .collect::<Vec<_>>();
        let w_o = uniform_init(heads.len() * d_v, d_m, heads.len() * d_v, rng);
        Ok(Self { heads, w_o, d_m })
    }

    pub fn from_parts(heads: Vec<AttentionHead<T>>, w_o: Tensor<T>) -> Result<Self> {
        let first = heads
            .first()
            .ok_or_else(|| Error::InvalidParameter("attention needs at least one head".into()))?;
        let (d_q, d_m, d_k, d_v) = (first.w_q.rows(), first.w_k.rows(), first.w_q.cols(), first.w_v.cols());
        if d_k == 0 || d_v == 0 {
            return Err(Error::InvalidParameter(
                "attention key and value widths must be positive".into(),
            ));
        }
        for h in &heads {
            let ok = h.w_q.shape() == [d_q, d_k] && h.w_k.shape() == [d_m, d_k] && h.w_v.shape() == [d_m, d_v];
            if !ok {
                return Err(Error::Shape {
                    op: "attention_head",
                    left: first.w_k.shape(),
                    right: h.w_k.shape(),
                });
            }
        }
        if w_o.shape() != [heads.len() * d_v, d_m] {
            return Err(Error::Shape {
                op: "attention_output",
                left: [heads.len() * d_v, d_m],
                right: w_o.shape(),
            });
        }
        Ok(Self { heads, w_o, d_m })
    }

    pub fn heads(&self) -> &[AttentionHead<T>] {
        &self.heads
    }

    pub fn head_count(&self) -> usize {
        self.heads.len()
    }

    pub fn w_o(&self) -> &Tensor<T> {
        &self.w_o
    }

    pub fn d_m(&self) -> usize {
        self.d_m
    }

    pub fn d_q(&self) -> usize {
        self.heads[0].w_q.rows()
    }

    /// `w_q, w_k, w_v` per head, then `w_o`.
    pub fn parameters(&self) -> Vec<&Tensor<T>> {
        let mut out: Vec<&Tensor<T>> = self.heads.iter().flat_map(|h| [&h.w_q, &h.w_k, &h.w_v]).collect();
        out.push(&self.w_o);
        out
    }

    pub fn parameters_mut(&mut self) -> Vec<&mut Tensor<T>> {
        let mut out: Vec<&mut Tensor<T>> = self
            .heads
            .iter_mut()
            .flat_map(|h| [&mut h.w_q, &mut h.w_k, &mut h.w_v])
            .collect();
        out.push(&mut self.w_o);
        out
    }

    pub fn bind(&self, tape: &mut Tape<T>) -> Result<AttentionVars> {
        let mut heads = Vec::with_capacity(self.heads.len());
        for h in &self.heads {
            heads.push([
                tape.leaf(h.w_q.clone())?,
                tape.leaf(h.w_k.clone())?,
                tape.leaf(h.w_v.clone())?,
            ]);
        }
        Ok(AttentionVars {
            heads,
            w_o: tape.leaf(self.w_o.clone())?,
            d_m: self.d_m,
        })
    }
}

/// Tape handles for bound [`AttentionParams`].
#[derive(Clone, Debug)]
pub struct AttentionVars {
    heads: Vec<[Var; 3]>,
    w_o: Var,
    d_m: usize,
}

fn inv_sqrt<T: Scalar>(d: usize) -> T {
    T::one() / T::of(d as f64).sqrt()
}

fn record_coefficients<T: Scalar>(
    tape: &mut Tape<T>,
    q: Var,
    k: Var,
    scale_dim: usize,
    mask: Option<&[bool]>,
) -> Result<Var> {
    if tape.value(k).rows() == 0 {
        return Err(Error::EmptyAttention);
    }
    let logits = tape.matmul_transposed(q, k)?;
    let logits = tape.scale(logits, inv_sqrt(scale_dim))?;
    tape.softmax_rows(logits, mask)
}

impl AttentionVars {
    /// Same order as [`AttentionParams::parameters`].
    pub fn vars(&self) -> Vec<Var> {
        let mut out: Vec<Var> = self.heads.iter().flatten().copied().collect();
        out.push(self.w_o);
        out
    }

    /// Records `h_X` for node rows `z_x` (`N × D_m`) and query `z_q` (`1 × D_q`).
    pub fn apply<T: Scalar>(&self, tape: &mut Tape<T>, z_x: Var, z_q: Var, mask: Option<&[bool]>) -> Result<Var> {
        let mut outputs = Vec::with_capacity(self.heads.len());
        for &[w_q, w_k, w_v] in &self.heads {
            let q = tape.matmul(z_q, w_q)?;
            let k = tape.matmul(z_x, w_k)?;
            let v = tape.matmul(z_x, w_v)?;
            let alpha = record_coefficients(tape, q, k, self.d_m, mask)?;
            let head = tape.weighted_row_sum(alpha, v)?;
            outputs.push(tape.relu(head)?);
        }
        let joined = tape.concat_cols(&outputs)?;
        tape.matmul(joined, self.w_o)
    }
}

/// `softmax(q kᵀ / sqrt(scale_dim))`; masked columns come out as exact zeros.
pub fn attention_coefficients<T: Scalar>(
    q: &Tensor<T>,
    k: &Tensor<T>,
    scale_dim: usize,
    mask: Option<&[bool]>,
) -> Result<Tensor<T>> {
    let mut tape = Tape::new();
    let qv = tape.leaf(q.clone())?;
    let kv = tape.leaf(k.clone())?;
    let out = record_coefficients(&mut tape, qv, kv, scale_dim, mask)?;
    Ok(tape.value(out).clone())
}

/// Group-node attention output `h_X` (`1 × D_m`).
pub fn gn_attention<T: Scalar>(
    z_x: &Tensor<T>,
    z_q: &Tensor<T>,
    params: &AttentionParams<T>,
    mask: Option<&[bool]>,
) -> Result<Tensor<T>> {
    let mut tape = Tape::new();
    let vars = params.bind(&mut tape)?;
    let zx = tape.leaf(z_x.clone())?;
    let zq = tape.leaf(z_q.clone())?;
    let out = vars.apply(&mut tape, zx, zq, mask)?;
    Ok(tape.value(out).clone())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn singleton_attention_is_one() {
        let q = Tensor::row_vector(vec![0.3, -1.2]);
        let k = Tensor::row_vector(vec![2.0, 0.5]);
        assert_eq!(attention_coefficients(&q, &k, 16, None).unwrap().data(), &[1.0]);
    }

    #[test]
    fn orthogonal_query_gives_uniform_weights() {
        let q = Tensor::row_vector(vec![1.0, 0.0]);
        let k = Tensor::from_rows(&[vec![0.0, 1.0], vec![0.0, -3.0], vec![0.0, 7.0]]).unwrap();
        let a: Tensor<f64> = attention_coefficients(&q, &k, 16, None).unwrap();
        for &w in a.data() {
            assert!((w - 1.0 / 3.0).abs() < 1e-15);
        }
    }

    #[test]
    fn zero_nodes_is_an_error() {
        let q = Tensor::<f64>::row_vector(vec![1.0]);
        let k = Tensor::<f64>::zeros(0, 1);
        assert!(matches!(
            attention_coefficients(&q, &k, 4, None),
            Err(Error::EmptyAttention)
        ));
    }

    #[test]
    fn identity_projections_pass_relu_of_row() {
        let eye = Tensor::<f64>::identity(3);
        let params = AttentionParams::from_parts(
            vec![AttentionHead {
                w_q: eye.clone(),
                w_k: eye.clone(),
                w_v: eye.clone(),
            }],
            eye,
        )
        .unwrap();
        let z_x = Tensor::row_vector(vec![-1.0, 0.5, 2.0]);
        let z_q = Tensor::row_vector(vec![0.1, 0.2, 0.3]);
        assert_eq!(
            gn_attention(&z_x, &z_q, &params, None).unwrap().data(),
            &[0.0, 0.5, 2.0]
        );
    }

    #[test]
    fn all_masked_is_an_error() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let params = AttentionParams::<f64>::new(4, 4, 2, 2, 2, &mut rng).unwrap();
        let z_x = uniform_init(3, 4, 1, &mut rng);
        let z_q = uniform_init(1, 4, 1, &mut rng);
        let err = gn_attention(&z_x, &z_q, &params, Some(&[false; 3])).unwrap_err();
        assert!(matches!(err, Error::AllMasked));
    }

    #[test]
    fn output_shape_uses_w_o_rows() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let params = AttentionParams::<f64>::new(16, 16, 4, 4, 4, &mut rng).unwrap();
        assert_eq!(params.w_o().shape(), [16, 16]);
        let bad = AttentionParams::from_parts(params.heads().to_vec(), Tensor::zeros(15, 16));
        assert!(bad.is_err());
    }
}
