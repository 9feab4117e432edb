//! Backpropagation through time for the full encode → normalize → decode loss.

use super::forward::{forward, reversed_mse, StepCache};
use super::params::{LstmWeights, ModelParams};
use crate::linalg::dot;
use crate::signal::FeatureWindow;
use crate::Result;

/// Gradients of one step given `dL/dh_t` and the cell gradient flowing back
/// from step `t + 1`. Accumulates weight gradients into `grad` and returns
/// `(dL/dx_t, dL/dh_{t-1}, dL/dc_{t-1})`.
fn step_backward(
    w: &LstmWeights,
    grad: &mut LstmWeights,
    s: &StepCache,
    dh: &[f64],
    dc_next: &[f64],
) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
    let hd = dh.len();
    let mut dz = vec![0.0; 4 * hd];
    let mut dc_prev = vec![0.0; hd];
    for j in 0..hd {
        let (i, f, g, o) = (s.gates[j], s.gates[hd + j], s.gates[2 * hd + j], s.gates[3 * hd + j]);
        let tc = s.tanh_c[j];
        let dc = dh[j] * o * (1.0 - tc * tc) + dc_next[j];
        let d_o = dh[j] * tc;
        dz[j] = dc * g * i * (1.0 - i);
        dz[hd + j] = dc * s.c_prev[j] * f * (1.0 - f);
        dz[2 * hd + j] = dc * i * (1.0 - g * g);
        dz[3 * hd + j] = d_o * o * (1.0 - o);
        dc_prev[j] = dc * f;
    }
    grad.wx.add_outer(&dz, &s.x);
    grad.wh.add_outer(&dz, &s.h_prev);
    for (b, d) in grad.b.iter_mut().zip(&dz) {
        *b += d;
    }
    let mut dx = vec![0.0; s.x.len()];
    w.wx.matvec_t_acc(&dz, &mut dx);
    let mut dh_prev = vec![0.0; hd];
    w.wh.matvec_t_acc(&dz, &mut dh_prev);
    (dx, dh_prev, dc_prev)
}

/// Loss and its exact gradient with respect to every parameter.
pub fn backward(window: &FeatureWindow, params: &ModelParams, weight_decay: f64) -> Result<(f64, ModelParams)> {
    let trace = forward(window, params)?;
    let (l, d, hd) = (window.len(), params.d_in, params.d_hidden);
    let mut grad = ModelParams::zeros(d, hd);
    let scale = 2.0 / (l * d) as f64;

    let mut dh_next = vec![0.0; hd];
    let mut dc_next = vec![0.0; hd];
    let mut dy_next = vec![0.0; d];
    for t in (0..l).rev() {
        let y = trace.output.row(t);
        let target = window.features.row(l - 1 - t);
        let dy: Vec<f64> = y
            .iter()
            .zip(target)
            .zip(&dy_next)
            .map(|((yv, xv), fb)| scale * (yv - xv) + fb)
            .collect();
        let step = &trace.dec[t];
        grad.out_w.add_outer(&dy, &step.h);
        for (b, g) in grad.out_b.iter_mut().zip(&dy) {
            *b += g;
        }
        let mut dh = dh_next.clone();
        params.out_w.matvec_t_acc(&dy, &mut dh);
        let (dx, dh_prev, dc_prev) = step_backward(&params.decoder, &mut grad.decoder, step, &dh, &dc_next);
        // Input of step t is the output of step t - 1 (zero for t = 0).
        dy_next = dx;
        dh_next = dh_prev;
        dc_next = dc_prev;
    }
    if weight_decay != 0.0 {
        crate::linalg::axpy(2.0 * weight_decay, params.out_w.as_slice(), grad.out_w.as_mut_slice());
    }

    // Through R* = R / |R|: dR = (I - R* R*^T) dR* / |R|.
    let dr_star = dh_next;
    let proj = dot(&trace.r_star, &dr_star);
    let mut dh: Vec<f64> = dr_star
        .iter()
        .zip(&trace.r_star)
        .map(|(g, u)| (g - u * proj) / trace.r_norm)
        .collect();
    let mut dc = vec![0.0; hd];
    for step in trace.enc.iter().rev() {
        let (_, dh_prev, dc_prev) = step_backward(&params.encoder, &mut grad.encoder, step, &dh, &dc);
        dh = dh_prev;
        dc = dc_prev;
    }

    let loss = reversed_mse(window, &trace.output) + weight_decay * params.out_w.frobenius_sq();
    Ok((loss, grad))
}
