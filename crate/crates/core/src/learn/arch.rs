use std::fmt;
use std::str::FromStr;

use crate::error::{FlccError, Result};

/// Layer layout of the shared classifier.
///
/// `Conv` is a single-channel valid convolution with ReLU, non-overlapping
/// max pooling and one dense softmax layer. `Dense` is a fully connected
/// ReLU network; an empty `hidden` list gives multinomial logistic
/// regression.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum ModelArch {
    Conv {
        height: usize,
        width: usize,
        filters: usize,
        kernel: usize,
        pool: usize,
        classes: usize,
    },
    Dense {
        inputs: usize,
        hidden: Vec<usize>,
        classes: usize,
    },
}

/// Offsets of one weight matrix and its bias inside the flat parameter vector.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LayerSlot {
    pub weight_offset: usize,
    pub weight_len: usize,
    pub bias_offset: usize,
    pub bias_len: usize,
    pub fan_in: usize,
    pub fan_out: usize,
}

impl ModelArch {
    /// conv(8 x 3x3) -> ReLU -> maxpool(2) -> dense(10) on 28x28 inputs.
    pub fn default_conv() -> Self {
        ModelArch::Conv {
            height: 28,
            width: 28,
            filters: 8,
            kernel: 3,
            pool: 2,
            classes: 10,
        }
    }

    /// 784 -> 64 -> 10.
    pub fn default_dense() -> Self {
        ModelArch::Dense {
            inputs: 784,
            hidden: vec![64],
            classes: 10,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            ModelArch::Conv {
                height,
                width,
                filters,
                kernel,
                pool,
                classes,
            } => {
                if *filters == 0 || *kernel == 0 || *pool == 0 || *classes < 2 {
                    return Err(FlccError::param("arch", "conv sizes must be positive, classes >= 2"));
                }
                if kernel > height || kernel > width {
                    return Err(FlccError::param("arch", "kernel larger than input"));
                }
                if (height - kernel + 1) < *pool || (width - kernel + 1) < *pool {
                    return Err(FlccError::param("arch", "pool larger than feature map"));
                }
            }
            ModelArch::Dense {
                inputs,
                hidden,
                classes,
            } => {
                if *inputs == 0 || *classes < 2 || hidden.contains(&0) {
                    return Err(FlccError::param("arch", "dense sizes must be positive, classes >= 2"));
                }
            }
        }
        Ok(())
    }

    pub fn input_len(&self) -> usize {
        match self {
            ModelArch::Conv { height, width, .. } => height * width,
            ModelArch::Dense { inputs, .. } => *inputs,
        }
    }

    pub fn classes(&self) -> usize {
        match self {
            ModelArch::Conv { classes, .. } | ModelArch::Dense { classes, .. } => *classes,
        }
    }

    /// Convolution output and pooled map sizes `(conv_h, conv_w, pool_h, pool_w)`.
    pub(crate) fn conv_dims(&self) -> Option<(usize, usize, usize, usize)> {
        match self {
            ModelArch::Conv {
                height,
                width,
                kernel,
                pool,
                ..
            } => {
                let ch = height - kernel + 1;
                let cw = width - kernel + 1;
                Some((ch, cw, ch / pool, cw / pool))
            }
            ModelArch::Dense { .. } => None,
        }
    }

    /// Weight/bias slots in parameter order.
    pub fn layers(&self) -> Vec<LayerSlot> {
        let mut slots = Vec::new();
        let mut offset = 0;
        let mut push = |fan_in: usize, fan_out: usize, weight_len: usize, bias_len: usize| {
            let slot = LayerSlot {
                weight_offset: offset,
                weight_len,
                bias_offset: offset + weight_len,
                bias_len,
                fan_in,
                fan_out,
            };
            offset += weight_len + bias_len;
            slots.push(slot);
        };
        match self {
            ModelArch::Conv {
                filters,
                kernel,
                classes,
                ..
            } => {
                let (_, _, ph, pw) = self.conv_dims().expect("conv");
                let k2 = kernel * kernel;
                push(k2, filters * k2, filters * k2, *filters);
                let flat = filters * ph * pw;
                push(flat, *classes, classes * flat, *classes);
            }
            ModelArch::Dense {
                inputs,
                hidden,
                classes,
            } => {
                let mut prev = *inputs;
                for &h in hidden.iter().chain(std::iter::once(classes)) {
                    push(prev, h, prev * h, h);
                    prev = h;
                }
            }
        }
        slots
    }

    pub fn param_count(&self) -> usize {
        self.layers()
            .last()
            .map(|s| s.bias_offset + s.bias_len)
            .unwrap_or(0)
    }
}

impl fmt::Display for ModelArch {
    /// Compact descriptor string, e.g. `conv:28x28:8x3x3:pool2:10` or `dense:784-64-10`.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ModelArch::Conv {
                height,
                width,
                filters,
                kernel,
                pool,
                classes,
            } => write!(f, "conv:{height}x{width}:{filters}x{kernel}x{kernel}:pool{pool}:{classes}"),
            ModelArch::Dense {
                inputs,
                hidden,
                classes,
            } => {
                write!(f, "dense:{inputs}")?;
                for h in hidden {
                    write!(f, "-{h}")?;
                }
                write!(f, "-{classes}")
            }
        }
    }
}

impl FromStr for ModelArch {
    type Err = FlccError;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || FlccError::param("arch", format!("cannot parse architecture `{s}`"));
        let num = |t: &str| t.parse::<usize>().map_err(|_| bad());
        let arch = match s {
            "conv" => ModelArch::default_conv(),
            "dense" => ModelArch::default_dense(),
            _ if s.starts_with("conv:") => {
                let parts: Vec<&str> = s["conv:".len()..].split(':').collect();
                let [hw, fk, pool, classes] = parts.as_slice() else {
                    return Err(bad());
                };
                let (h, w) = hw.split_once('x').ok_or_else(bad)?;
                let fk: Vec<&str> = fk.split('x').collect();
                let [filters, k1, k2] = fk.as_slice() else {
                    return Err(bad());
                };
                if k1 != k2 {
                    return Err(bad());
                }
                ModelArch::Conv {
                    height: num(h)?,
                    width: num(w)?,
                    filters: num(filters)?,
                    kernel: num(k1)?,
                    pool: num(pool.strip_prefix("pool").ok_or_else(bad)?)?,
                    classes: num(classes)?,
                }
            }
            _ if s.starts_with("dense:") => {
                let sizes = s["dense:".len()..]
                    .split('-')
                    .map(num)
                    .collect::<Result<Vec<_>>>()?;
                if sizes.len() < 2 {
                    return Err(bad());
                }
                ModelArch::Dense {
                    inputs: sizes[0],
                    hidden: sizes[1..sizes.len() - 1].to_vec(),
                    classes: sizes[sizes.len() - 1],
                }
            }
            _ => return Err(bad()),
        };
        arch.validate()?;
        Ok(arch)
    }
}
