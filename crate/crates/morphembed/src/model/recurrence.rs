//! Recurrent update functions, both as plain tensor math (for evaluation
//! and as the reference the graph version is tested against) and as graph
//! builders used during training.

use crate::error::Result;
use crate::numerics::graph::{Graph, NodeId};
use crate::numerics::tensor::{self, sigmoid, tanh, Tensor};

use super::{ModelParams, RecParams};

impl ModelParams {
    /// h_t = sigmoid(emb * W_in + h_prev * W_rec + bias), rows are batch
    /// stripes.
    pub fn rnn_step_values(&self, emb: &Tensor, h_prev: &Tensor) -> Result<Tensor> {
        let RecParams::Rnn { w_in, w_rec, bias } = self.rec else {
            panic!("rnn_step_values on an LSTM model");
        };
        let mut pre = tensor::add(
            &tensor::matmul(emb, self.set.get(w_in))?,
            &tensor::matmul(h_prev, self.set.get(w_rec))?,
        )?;
        for r in 0..pre.rows() {
            for (v, &b) in pre.row_mut(r).iter_mut().zip(self.set.get(bias).data()) {
                *v += b;
            }
        }
        Ok(sigmoid(&pre))
    }

    /// Standard four-gate LSTM step without peepholes:
    /// i,f,o = sigmoid gates, g = tanh candidate, c' = f.c + i.g,
    /// h' = o.tanh(c').
    pub fn lstm_step_values(
        &self,
        emb: &Tensor,
        h_prev: &Tensor,
        c_prev: &Tensor,
    ) -> Result<(Tensor, Tensor)> {
        let RecParams::Lstm { w, u, b } = self.rec else {
            panic!("lstm_step_values on an RNN model");
        };
        let mut gates = Vec::with_capacity(4);
        for gi in 0..4 {
            let mut pre = tensor::add(
                &tensor::matmul(emb, self.set.get(w[gi]))?,
                &tensor::matmul(h_prev, self.set.get(u[gi]))?,
            )?;
            for r in 0..pre.rows() {
                for (v, &bv) in pre.row_mut(r).iter_mut().zip(self.set.get(b[gi]).data()) {
                    *v += bv;
                }
            }
            gates.push(if gi == 3 { tanh(&pre) } else { sigmoid(&pre) });
        }
        let (i, f, o, g) = (&gates[0], &gates[1], &gates[2], &gates[3]);
        let c = tensor::add(&tensor::mul(f, c_prev)?, &tensor::mul(i, g)?)?;
        let h = tensor::mul(o, &tanh(&c))?;
        Ok((h, c))
    }

    /// Graph version of one recurrent step. Returns (h, optional c).
    pub(crate) fn step_graph(
        &self,
        g: &mut Graph,
        emb: NodeId,
        h_prev: NodeId,
        c_prev: Option<NodeId>,
    ) -> Result<(NodeId, Option<NodeId>)> {
        match self.rec {
            RecParams::Rnn { w_in, w_rec, bias } => {
                let win = g.param(w_in);
                let wrec = g.param(w_rec);
                let bn = g.param(bias);
                let xi = g.matmul(emb, win)?;
                let hh = g.matmul(h_prev, wrec)?;
                let s = g.add(xi, hh)?;
                let pre = g.add_row(s, bn)?;
                Ok((g.sigmoid(pre), None))
            }
            RecParams::Lstm { w, u, b } => {
                let c_prev = c_prev.expect("LSTM step without a cell state");
                let gate = |g: &mut Graph, gi: usize, is_candidate: bool| -> Result<NodeId> {
                    let wn = g.param(w[gi]);
                    let un = g.param(u[gi]);
                    let bn = g.param(b[gi]);
                    let xi = g.matmul(emb, wn)?;
                    let hh = g.matmul(h_prev, un)?;
                    let s = g.add(xi, hh)?;
                    let pre = g.add_row(s, bn)?;
                    Ok(if is_candidate {
                        g.tanh(pre)
                    } else {
                        g.sigmoid(pre)
                    })
                };
                let i = gate(g, 0, false)?;
                let f = gate(g, 1, false)?;
                let o = gate(g, 2, false)?;
                let cand = gate(g, 3, true)?;
                let keep = g.mul(f, c_prev)?;
                let write = g.mul(i, cand)?;
                let c = g.add(keep, write)?;
                let c_act = g.tanh(c);
                let h = g.mul(o, c_act)?;
                Ok((h, Some(c)))
            }
        }
    }
}
