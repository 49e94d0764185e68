//! Per-sample forward and backward passes over a flat parameter vector.

use super::arch::ModelArch;

/// Scratch buffers reused across samples.
#[derive(Debug, Default)]
pub(crate) struct Workspace {
    /// Post-ReLU activations per layer (conv: feature map; dense: hidden layers).
    acts: Vec<Vec<f64>>,
    /// Pooled features and the flat index of each pooling window's maximum.
    pooled: Vec<f64>,
    argmax: Vec<usize>,
    pub(crate) probs: Vec<f64>,
    delta: Vec<f64>,
    delta_prev: Vec<f64>,
}

fn softmax_in_place(logits: &mut [f64]) {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut sum = 0.0;
    for v in logits.iter_mut() {
        *v = (*v - max).exp();
        sum += *v;
    }
    for v in logits.iter_mut() {
        *v /= sum;
    }
}

/// Class probabilities for one input, left in `ws.probs`.
pub(crate) fn forward(arch: &ModelArch, params: &[f64], input: &[f64], ws: &mut Workspace) {
    match arch {
        ModelArch::Conv {
            width,
            filters,
            kernel,
            pool,
            classes,
            ..
        } => {
            let (ch, cw, ph, pw) = arch.conv_dims().expect("conv");
            let slots = arch.layers();
            let (conv, dense) = (slots[0], slots[1]);
            let w = &params[conv.weight_offset..conv.bias_offset];
            let b = &params[conv.bias_offset..conv.bias_offset + conv.bias_len];
            ws.acts.resize(1, Vec::new());
            let fmap = &mut ws.acts[0];
            fmap.clear();
            fmap.resize(filters * ch * cw, 0.0);
            for f in 0..*filters {
                let wf = &w[f * kernel * kernel..(f + 1) * kernel * kernel];
                let out = &mut fmap[f * ch * cw..(f + 1) * ch * cw];
                for y in 0..ch {
                    for x in 0..cw {
                        let mut acc = b[f];
                        for ky in 0..*kernel {
                            let row = &input[(y + ky) * width + x..(y + ky) * width + x + kernel];
                            let wk = &wf[ky * kernel..(ky + 1) * kernel];
                            for (a, c) in row.iter().zip(wk) {
                                acc += a * c;
                            }
                        }
                        out[y * cw + x] = acc.max(0.0);
                    }
                }
            }

            ws.pooled.clear();
            ws.argmax.clear();
            for f in 0..*filters {
                for py in 0..ph {
                    for px in 0..pw {
                        let mut best = f64::NEG_INFINITY;
                        let mut best_idx = 0;
                        for dy in 0..*pool {
                            for dx in 0..*pool {
                                let idx = f * ch * cw + (py * pool + dy) * cw + px * pool + dx;
                                if fmap[idx] > best {
                                    best = fmap[idx];
                                    best_idx = idx;
                                }
                            }
                        }
                        ws.pooled.push(best);
                        ws.argmax.push(best_idx);
                    }
                }
            }

            let flat = ws.pooled.len();
            let dw = &params[dense.weight_offset..dense.bias_offset];
            let db = &params[dense.bias_offset..dense.bias_offset + dense.bias_len];
            ws.probs.clear();
            for c in 0..*classes {
                let row = &dw[c * flat..(c + 1) * flat];
                let z: f64 = row.iter().zip(&ws.pooled).map(|(a, b)| a * b).sum();
                ws.probs.push(z + db[c]);
            }
            softmax_in_place(&mut ws.probs);
        }
        ModelArch::Dense { .. } => {
            let slots = arch.layers();
            let last = slots.len() - 1;
            ws.acts.resize(slots.len(), Vec::new());
            for (l, slot) in slots.iter().enumerate() {
                let (prev, rest) = ws.acts.split_at_mut(l);
                let src: &[f64] = if l == 0 { input } else { &prev[l - 1] };
                let out = &mut rest[0];
                out.clear();
                let w = &params[slot.weight_offset..slot.bias_offset];
                let b = &params[slot.bias_offset..slot.bias_offset + slot.bias_len];
                for j in 0..slot.fan_out {
                    let row = &w[j * slot.fan_in..(j + 1) * slot.fan_in];
                    let z = b[j] + row.iter().zip(src).map(|(a, b)| a * b).sum::<f64>();
                    out.push(if l == last { z } else { z.max(0.0) });
                }
            }
            ws.probs.clear();
            ws.probs.extend_from_slice(&ws.acts[last]);
            softmax_in_place(&mut ws.probs);
        }
    }
}

/// Adds `scale * d(-ln p[label]) / d(params)` into `grad`. Must follow a
/// [`forward`] call on the same input.
pub(crate) fn backward(
    arch: &ModelArch,
    params: &[f64],
    input: &[f64],
    label: usize,
    scale: f64,
    ws: &mut Workspace,
    grad: &mut [f64],
) {
    // Softmax + cross-entropy: dL/dz = p - onehot.
    ws.delta.clear();
    ws.delta.extend(ws.probs.iter().enumerate().map(|(c, p)| {
        scale * (p - if c == label { 1.0 } else { 0.0 })
    }));

    match arch {
        ModelArch::Conv {
            width,
            filters,
            kernel,
            ..
        } => {
            let (ch, cw, _, _) = arch.conv_dims().expect("conv");
            let slots = arch.layers();
            let (conv, dense) = (slots[0], slots[1]);
            let flat = ws.pooled.len();

            ws.delta_prev.clear();
            ws.delta_prev.resize(flat, 0.0);
            for (c, &dz) in ws.delta.iter().enumerate() {
                if dz == 0.0 {
                    continue;
                }
                let gw = &mut grad[dense.weight_offset + c * flat..dense.weight_offset + (c + 1) * flat];
                for (g, a) in gw.iter_mut().zip(&ws.pooled) {
                    *g += dz * a;
                }
                grad[dense.bias_offset + c] += dz;
                let row = &params[dense.weight_offset + c * flat..dense.weight_offset + (c + 1) * flat];
                for (d, w) in ws.delta_prev.iter_mut().zip(row) {
                    *d += dz * w;
                }
            }

            // Route pooled gradients to the winning positions; ReLU passes
            // gradient only where the activation is positive.
            let fmap = &ws.acts[0];
            for (j, &dp) in ws.delta_prev.iter().enumerate() {
                let idx = ws.argmax[j];
                if dp == 0.0 || fmap[idx] <= 0.0 {
                    continue;
                }
                let f = idx / (ch * cw);
                let rem = idx % (ch * cw);
                let (y, x) = (rem / cw, rem % cw);
                let base = conv.weight_offset + f * kernel * kernel;
                for ky in 0..*kernel {
                    let row = &input[(y + ky) * width + x..(y + ky) * width + x + kernel];
                    let g = &mut grad[base + ky * kernel..base + (ky + 1) * kernel];
                    for (gv, a) in g.iter_mut().zip(row) {
                        *gv += dp * a;
                    }
                }
                grad[conv.bias_offset + f] += dp;
            }
            debug_assert_eq!(*filters, conv.bias_len);
        }
        ModelArch::Dense { .. } => {
            let slots = arch.layers();
            for l in (0..slots.len()).rev() {
                let slot = slots[l];
                let src: &[f64] = if l == 0 { input } else { &ws.acts[l - 1] };
                let need_prev = l > 0;
                ws.delta_prev.clear();
                if need_prev {
                    ws.delta_prev.resize(slot.fan_in, 0.0);
                }
                for (j, &dz) in ws.delta.iter().enumerate() {
                    if dz == 0.0 {
                        continue;
                    }
                    let off = slot.weight_offset + j * slot.fan_in;
                    for (g, a) in grad[off..off + slot.fan_in].iter_mut().zip(src) {
                        *g += dz * a;
                    }
                    grad[slot.bias_offset + j] += dz;
                    if need_prev {
                        let row = &params[off..off + slot.fan_in];
                        for (d, w) in ws.delta_prev.iter_mut().zip(row) {
                            *d += dz * w;
                        }
                    }
                }
                if need_prev {
                    let act = &ws.acts[l - 1];
                    for (d, a) in ws.delta_prev.iter_mut().zip(act) {
                        if *a <= 0.0 {
                            *d = 0.0;
                        }
                    }
                    std::mem::swap(&mut ws.delta, &mut ws.delta_prev);
                }
            }
        }
    }
}
