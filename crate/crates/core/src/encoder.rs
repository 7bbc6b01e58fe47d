//! Sequence encoder: LSTM cell math, unidirectional or bidirectional layers,
//! stacking with inter-layer dropout, and additive self-attention pooling.
//!
//! Gate layout inside the fused parameter block is (input, forget, cell,
//! output), each occupying h rows. One sequence is processed at a time; the
//! batch dimension lives in the training loop.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tensor::{concat, stack_rows, Tensor};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EncoderConfig {
    pub num_layers: usize,
    pub bidirectional: bool,
    pub hidden_size: usize,
    pub inter_layer_dropout: f64,
    pub attention: bool,
}

impl EncoderConfig {
    pub fn validate(&self) -> Result<()> {
        if self.num_layers == 0 {
            return Err(Error::Config("encoder needs at least one layer".into()));
        }
        if self.hidden_size == 0 {
            return Err(Error::Config("hidden_size must be at least 1".into()));
        }
        if !(0.0..1.0).contains(&self.inter_layer_dropout) {
            return Err(Error::Config(format!(
                "inter_layer_dropout {} outside [0, 1)",
                self.inter_layer_dropout
            )));
        }
        Ok(())
    }

    /// Width of each position's output vector.
    pub fn output_width(&self) -> usize {
        if self.bidirectional {
            2 * self.hidden_size
        } else {
            self.hidden_size
        }
    }
}

/// Fused LSTM cell parameters: W_ih is [4h × d_in], W_hh is [4h × h],
/// b is [4h], rows grouped per gate in (i, f, g, o) order.
#[derive(Clone, Debug)]
pub struct LstmCellParams {
    pub w_ih: Tensor,
    pub w_hh: Tensor,
    pub b: Tensor,
    pub hidden: usize,
}

impl LstmCellParams {
    /// Weights uniform(-1/sqrt(h), 1/sqrt(h)); biases zero except the forget
    /// gate's, which starts at +1 so early training does not forget.
    pub fn init<R: Rng>(d_in: usize, hidden: usize, rng: &mut R) -> Result<LstmCellParams> {
        if d_in == 0 || hidden == 0 {
            return Err(Error::Config("lstm dims must be positive".into()));
        }
        let bound = 1.0 / (hidden as f64).sqrt();
        let w_ih = Tensor::rand_uniform(vec![4 * hidden, d_in], -bound, bound, rng);
        w_ih.set_tracked(true);
        let w_hh = Tensor::rand_uniform(vec![4 * hidden, hidden], -bound, bound, rng);
        w_hh.set_tracked(true);
        let mut bias = vec![0.0; 4 * hidden];
        for v in &mut bias[hidden..2 * hidden] {
            *v = 1.0;
        }
        let b = Tensor::param(vec![4 * hidden], bias)?;
        Ok(LstmCellParams {
            w_ih,
            w_hh,
            b,
            hidden,
        })
    }

    pub fn input_size(&self) -> usize {
        self.w_ih.shape()[1]
    }
}

/// One LSTM step. Returns (h_t, c_t).
pub fn lstm_cell(
    x_t: &Tensor,
    h_prev: &Tensor,
    c_prev: &Tensor,
    p: &LstmCellParams,
) -> Result<(Tensor, Tensor)> {
    let h = p.hidden;
    if x_t.shape() != [p.input_size()] {
        return Err(Error::dim("lstm_cell input", x_t.shape(), &[p.input_size()]));
    }
    if h_prev.shape() != [h] || c_prev.shape() != [h] {
        return Err(Error::dim("lstm_cell state", h_prev.shape(), &[h]));
    }
    let pre = p
        .w_ih
        .matvec(x_t)?
        .add(&p.w_hh.matvec(h_prev)?)?
        .add(&p.b)?;
    let i = pre.narrow(0, 0, h)?.sigmoid();
    let f = pre.narrow(0, h, h)?.sigmoid();
    let g = pre.narrow(0, 2 * h, h)?.tanh();
    let o = pre.narrow(0, 3 * h, h)?.sigmoid();
    let c_t = f.mul(c_prev)?.add(&i.mul(&g)?)?;
    let h_t = o.mul(&c_t.tanh())?;
    Ok((h_t, c_t))
}

/// Parameters for one layer: a forward cell, plus a backward cell when the
/// layer is bidirectional.
#[derive(Clone, Debug)]
pub struct LayerParams {
    pub fwd: LstmCellParams,
    pub bwd: Option<LstmCellParams>,
}

impl LayerParams {
    pub fn init<R: Rng>(
        d_in: usize,
        hidden: usize,
        bidirectional: bool,
        rng: &mut R,
    ) -> Result<LayerParams> {
        let fwd = LstmCellParams::init(d_in, hidden, rng)?;
        let bwd = if bidirectional {
            Some(LstmCellParams::init(d_in, hidden, rng)?)
        } else {
            None
        };
        Ok(LayerParams { fwd, bwd })
    }
}

fn run_direction(
    seq: &Tensor,
    p: &LstmCellParams,
    reverse: bool,
) -> Result<Vec<Tensor>> {
    let t_len = seq.shape()[0];
    let mut h = Tensor::zeros(vec![p.hidden]);
    let mut c = Tensor::zeros(vec![p.hidden]);
    let mut states = vec![None; t_len];
    let order: Box<dyn Iterator<Item = usize>> = if reverse {
        Box::new((0..t_len).rev())
    } else {
        Box::new(0..t_len)
    };
    for t in order {
        let x_t = seq.row(t)?;
        let (h_t, c_t) = lstm_cell(&x_t, &h, &c, p)?;
        states[t] = Some(h_t.clone());
        h = h_t;
        c = c_t;
    }
    Ok(states.into_iter().map(|s| s.expect("state filled")).collect())
}

/// Run one layer over a [T × d_in] sequence; output is [T × h], or [T × 2h]
/// with the backward direction's states concatenated per position.
pub fn run_layer(seq: &Tensor, params: &LayerParams) -> Result<Tensor> {
    if seq.shape().len() != 2 {
        return Err(Error::dim("run_layer", seq.shape(), &[]));
    }
    let t_len = seq.shape()[0];
    if t_len == 0 {
        return Err(Error::EmptySequence("run_layer"));
    }
    let fwd_states = run_direction(seq, &params.fwd, false)?;
    match &params.bwd {
        None => stack_rows(&fwd_states),
        Some(bwd) => {
            let bwd_states = run_direction(seq, bwd, true)?;
            let rows: Vec<Tensor> = fwd_states
                .iter()
                .zip(&bwd_states)
                .map(|(f, b)| concat(&[f, b], 0))
                .collect::<Result<_>>()?;
            stack_rows(&rows)
        }
    }
}

/// Apply the stacked layers with inter-layer dropout (training mode only).
pub fn encode<R: Rng>(
    seq_emb: &Tensor,
    cfg: &EncoderConfig,
    layers: &[LayerParams],
    training: bool,
    rng: &mut R,
) -> Result<Tensor> {
    if layers.len() != cfg.num_layers {
        return Err(Error::Config(format!(
            "encoder has {} parameter sets for {} configured layers",
            layers.len(),
            cfg.num_layers
        )));
    }
    let mut out = run_layer(seq_emb, &layers[0])?;
    for layer in &layers[1..] {
        out = out.dropout(cfg.inter_layer_dropout, training, rng)?;
        out = run_layer(&out, layer)?;
    }
    Ok(out)
}

/// Additive attention parameters: scores are v_a · tanh(W_a · state).
#[derive(Clone, Debug)]
pub struct AttentionParams {
    pub w_a: Tensor,
    pub v_a: Tensor,
}

impl AttentionParams {
    pub fn init<R: Rng>(enc_width: usize, rng: &mut R) -> Result<AttentionParams> {
        if enc_width == 0 {
            return Err(Error::Config("attention width must be positive".into()));
        }
        let bound = 1.0 / (enc_width as f64).sqrt();
        let w_a = Tensor::rand_uniform(vec![enc_width, enc_width], -bound, bound, rng);
        w_a.set_tracked(true);
        let v_a = Tensor::rand_uniform(vec![enc_width], -bound, bound, rng);
        v_a.set_tracked(true);
        Ok(AttentionParams { w_a, v_a })
    }
}

/// Pool [T × e] states into one [e] sentence vector by softmax-weighted sum;
/// also returns the [T] weight vector for inspection.
pub fn attend(states: &Tensor, p: &AttentionParams) -> Result<(Tensor, Tensor)> {
    let t_len = states.shape()[0];
    if t_len == 0 {
        return Err(Error::EmptySequence("attend"));
    }
    let mut scores = Vec::with_capacity(t_len);
    for t in 0..t_len {
        let s_t = states.row(t)?;
        let score = p.v_a.dot(&p.w_a.matvec(&s_t)?.tanh())?;
        scores.push(score);
    }
    let score_refs: Vec<&Tensor> = scores.iter().collect();
    let weights = concat(&score_refs, 0)?.softmax(0)?;
    let sentence = states.transpose()?.matvec(&weights)?;
    Ok((sentence, weights))
}

/// Attention-free pooling: the terminal state of each direction. For a
/// unidirectional encoder that is the last row; for a bidirectional one the
/// forward half of the last row joined with the backward half of the first.
pub fn pool_last(states: &Tensor, bidirectional: bool, hidden: usize) -> Result<Tensor> {
    let t_len = states.shape()[0];
    if t_len == 0 {
        return Err(Error::EmptySequence("pool_last"));
    }
    if bidirectional {
        let fwd_end = states.row(t_len - 1)?.narrow(0, 0, hidden)?;
        let bwd_end = states.row(0)?.narrow(0, hidden, hidden)?;
        concat(&[&fwd_end, &bwd_end], 0)
    } else {
        states.row(t_len - 1)
    }
}
