//! The benchmark kernels as operator graphs.
//!
//! - `sobel`: horizontal 3x3 gradient, one output.
//! - `fir6`: 6-tap dot product (`fir4` is a reduced 4-tap instance used for
//!   exhaustive-search checks).
//! - `forwardk2j`: planar two-link forward kinematics. Sine and cosine are
//!   odd/even polynomials of the normalized angle evaluated with Horner's rule.
//! - `dct8`: unnormalized 8-point DCT-II with an even/odd butterfly split.
//! - `fft8`: radix-2 decimation-in-time FFT of 8 real samples; complex values
//!   are carried as separate real and imaginary nodes.

use std::f64::consts::{FRAC_1_SQRT_2, PI};
use std::fmt;
use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::dfg::{schedule_asap, Dfg, NodeId, OpKind, OpLatencies, ScheduledDfg};
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum KernelName {
    Sobel,
    Fir6,
    Forwardk2j,
    Dct8,
    Fft8,
    Fir4,
}

impl KernelName {
    /// The five benchmarks.
    pub const BENCHMARKS: [KernelName; 5] = [
        KernelName::Sobel,
        KernelName::Fir6,
        KernelName::Forwardk2j,
        KernelName::Dct8,
        KernelName::Fft8,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            KernelName::Sobel => "sobel",
            KernelName::Fir6 => "fir6",
            KernelName::Forwardk2j => "forwardk2j",
            KernelName::Dct8 => "dct8",
            KernelName::Fft8 => "fft8",
            KernelName::Fir4 => "fir4",
        }
    }

    pub fn default_sampler(self) -> InputSampler {
        match self {
            KernelName::Sobel | KernelName::Dct8 => InputSampler::Pixels,
            KernelName::Forwardk2j => InputSampler::Angles,
            KernelName::Fir6 | KernelName::Fir4 | KernelName::Fft8 => InputSampler::Signed,
        }
    }
}

impl fmt::Display for KernelName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for KernelName {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s.to_ascii_lowercase().as_str() {
            "sobel" => KernelName::Sobel,
            "fir6" | "fir" => KernelName::Fir6,
            "forwardk2j" => KernelName::Forwardk2j,
            "dct8" | "dct" => KernelName::Dct8,
            "fft8" | "fft" => KernelName::Fft8,
            "fir4" => KernelName::Fir4,
            _ => return Err(Error::UnknownKernel(s.to_string())),
        })
    }
}

/// Input distributions matching each kernel's domain.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum InputSampler {
    /// 8-bit intensities `0..=255`, presented to the datapath as `p / 256`.
    Pixels,
    /// Joint angles uniform in `[0, 2π)`.
    Angles,
    /// Signal samples uniform in `[-1, 1)`.
    Signed,
}

impl InputSampler {
    pub fn draw<R: Rng + ?Sized>(&self, rng: &mut R, n: usize) -> Vec<f64> {
        (0..n)
            .map(|_| match self {
                InputSampler::Pixels => rng.random_range(0u32..=255) as f64 / 256.0,
                InputSampler::Angles => rng.random_range(0.0..2.0 * PI),
                InputSampler::Signed => rng.random_range(-1.0..1.0),
            })
            .collect()
    }
}

/// Kernel constants.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct KernelParams {
    /// FIR taps; the kernel's default taps when absent.
    pub fir_coefficients: Option<Vec<f64>>,
    /// Link lengths of the two-link arm.
    pub link_lengths: [f64; 2],
}

impl Default for KernelParams {
    fn default() -> Self {
        Self {
            fir_coefficients: None,
            link_lengths: [1.0, 0.75],
        }
    }
}

pub const FIR6_TAPS: [f64; 6] = [0.04, 0.16, 0.3, 0.3, 0.16, 0.04];
pub const FIR4_TAPS: [f64; 4] = [0.15, 0.35, 0.35, 0.15];

pub const SOBEL_GX: [[f64; 3]; 3] = [[-1.0, 0.0, 1.0], [-2.0, 0.0, 2.0], [-1.0, 0.0, 1.0]];

/// Least-squares fits on `v ∈ [-1, 1]`: `sin(πv) ≈ Σ s_k v^(2k+1)`,
/// `cos(πv) ≈ Σ c_k v^(2k)`.
const SIN_POLY: [f64; 3] = [3.1034, -4.8138, 1.7262];
const COS_POLY: [f64; 3] = [0.9783, -4.4631, 2.547];

/// Builds and schedules a benchmark with the default operator latencies.
pub fn build_kernel(name: KernelName, params: &KernelParams) -> Result<ScheduledDfg> {
    build_kernel_with(name, params, &OpLatencies::default())
}

pub fn build_kernel_with(
    name: KernelName,
    params: &KernelParams,
    latencies: &OpLatencies,
) -> Result<ScheduledDfg> {
    let graph = match name {
        KernelName::Sobel => sobel(),
        KernelName::Fir6 => fir(name, params.fir_coefficients.as_deref(), &FIR6_TAPS)?,
        KernelName::Fir4 => fir(name, params.fir_coefficients.as_deref(), &FIR4_TAPS)?,
        KernelName::Forwardk2j => forwardk2j(params.link_lengths),
        KernelName::Dct8 => dct8(),
        KernelName::Fft8 => fft8(),
    };
    let dfg = schedule_asap(&graph, latencies)?;
    if let Err(node) = dfg.check_schedule() {
        return Err(Error::MalformedGraph(format!(
            "{name}: schedule recurrence broken at node {node}"
        )));
    }
    Ok(dfg)
}

fn sobel() -> Dfg {
    let mut g = Dfg::new("sobel");
    let pixels: Vec<NodeId> = (0..9).map(|i| g.input(format!("p{i}"))).collect();
    let mut terms = Vec::new();
    for (r, row) in SOBEL_GX.iter().enumerate() {
        for (c, &k) in row.iter().enumerate() {
            if k != 0.0 {
                terms.push(g.const_mul(pixels[3 * r + c], k));
            }
        }
    }
    let gx = g.sum_tree(&terms);
    g.output(gx, "gx");
    g
}

fn fir(name: KernelName, taps: Option<&[f64]>, default: &[f64]) -> Result<Dfg> {
    let taps = taps.unwrap_or(default);
    if taps.len() != default.len() {
        return Err(Error::CoefficientArity {
            kernel: name.to_string(),
            expected: default.len(),
            got: taps.len(),
        });
    }
    let mut g = Dfg::new(name.as_str());
    let xs: Vec<NodeId> = (0..taps.len()).map(|i| g.input(format!("x{i}"))).collect();
    let products: Vec<NodeId> = xs
        .iter()
        .zip(taps)
        .map(|(&x, &c)| g.const_mul(x, c))
        .collect();
    let y = g.sum_tree(&products);
    g.output(y, "y");
    Ok(g)
}

fn horner(g: &mut Dfg, w: NodeId, coefficients: &[f64]) -> NodeId {
    // c0 + w (c1 + w (c2 ...)), evaluated from the highest coefficient.
    let (&top, rest) = coefficients.split_last().expect("non-empty polynomial");
    let mut acc = g.const_mul(w, top);
    for (i, &c) in rest.iter().enumerate().rev() {
        let k = g.constant(c);
        acc = g.add(acc, k);
        if i > 0 {
            acc = g.mul(acc, w);
        }
    }
    acc
}

fn sin_cos(g: &mut Dfg, theta: NodeId) -> (NodeId, NodeId) {
    // v = θ/π - 1 so that sin θ = -sin(πv) and cos θ = -cos(πv).
    let scaled = g.const_mul(theta, 1.0 / PI);
    let one = g.constant(1.0);
    let v = g.sub(scaled, one);
    let w = g.mul(v, v);
    let neg = |p: &[f64; 3]| p.map(|c| -c);
    let sin_inner = horner(g, w, &neg(&SIN_POLY));
    let sin = g.mul(sin_inner, v);
    let cos = horner(g, w, &neg(&COS_POLY));
    (sin, cos)
}

fn forwardk2j(links: [f64; 2]) -> Dfg {
    let mut g = Dfg::new("forwardk2j");
    let t1 = g.input("theta1");
    let t2 = g.input("theta2");
    let (s1, c1) = sin_cos(&mut g, t1);
    let (s2, c2) = sin_cos(&mut g, t2);
    // Angle-sum identities.
    let c1c2 = g.mul(c1, c2);
    let s1s2 = g.mul(s1, s2);
    let c12 = g.sub(c1c2, s1s2);
    let s1c2 = g.mul(s1, c2);
    let c1s2 = g.mul(c1, s2);
    let s12 = g.add(s1c2, c1s2);
    let x1 = g.const_mul(c1, links[0]);
    let x2 = g.const_mul(c12, links[1]);
    let x = g.add(x1, x2);
    let y1 = g.const_mul(s1, links[0]);
    let y2 = g.const_mul(s12, links[1]);
    let y = g.add(y1, y2);
    g.output(x, "x");
    g.output(y, "y");
    g
}

/// `cos(π (2n + 1) k / 16)`.
pub fn dct8_coefficient(k: usize, n: usize) -> f64 {
    (PI * ((2 * n + 1) * k) as f64 / 16.0).cos()
}

fn dct8() -> Dfg {
    let mut g = Dfg::new("dct8");
    let x: Vec<NodeId> = (0..8).map(|i| g.input(format!("x{i}"))).collect();
    let s: Vec<NodeId> = (0..4).map(|n| g.add(x[n], x[7 - n])).collect();
    let d: Vec<NodeId> = (0..4).map(|n| g.sub(x[n], x[7 - n])).collect();

    // Even half: 4-point DCT of the sums.
    let e0 = g.add(s[0], s[3]);
    let e1 = g.add(s[1], s[2]);
    let e2 = g.sub(s[0], s[3]);
    let e3 = g.sub(s[1], s[2]);
    let mut out = [0; 8];
    out[0] = g.add(e0, e1);
    let diff = g.sub(e0, e1);
    out[4] = g.const_mul(diff, dct8_coefficient(4, 0));
    for k in [2usize, 6] {
        let a = g.const_mul(e2, dct8_coefficient(k, 0));
        let b = g.const_mul(e3, dct8_coefficient(k, 1));
        out[k] = g.add(a, b);
    }
    // Odd half: direct products with the differences.
    for k in [1usize, 3, 5, 7] {
        let terms: Vec<NodeId> = (0..4)
            .map(|n| g.const_mul(d[n], dct8_coefficient(k, n)))
            .collect();
        out[k] = g.sum_tree(&terms);
    }
    for (k, &node) in out.iter().enumerate() {
        g.output(node, format!("X{k}"));
    }
    g
}

/// A complex value whose parts may be structurally zero.
#[derive(Clone, Copy)]
struct Cx {
    re: Option<NodeId>,
    im: Option<NodeId>,
}

fn add_parts(g: &mut Dfg, a: Option<NodeId>, b: Option<NodeId>) -> Option<NodeId> {
    match (a, b) {
        (Some(a), Some(b)) => Some(g.add(a, b)),
        (a, None) => a,
        (None, b) => b,
    }
}

fn sub_parts(g: &mut Dfg, a: Option<NodeId>, b: Option<NodeId>) -> Option<NodeId> {
    match (a, b) {
        (Some(a), Some(b)) => Some(g.sub(a, b)),
        (a, None) => a,
        // -(-b) folds back to b.
        (None, Some(b)) if g.nodes[b].kind == OpKind::Neg => Some(g.nodes[b].operands[0]),
        (None, Some(b)) => Some(g.neg(b)),
    }
}

fn butterfly(g: &mut Dfg, a: Cx, b: Cx) -> (Cx, Cx) {
    let sum = Cx {
        re: add_parts(g, a.re, b.re),
        im: add_parts(g, a.im, b.im),
    };
    let diff = Cx {
        re: sub_parts(g, a.re, b.re),
        im: sub_parts(g, a.im, b.im),
    };
    (sum, diff)
}

/// Multiplies by `W_8^k = exp(-2πik/8)`.
fn twiddle(g: &mut Dfg, z: Cx, k: usize) -> Cx {
    match k % 8 {
        0 => z,
        // -i (re + i im) = im - i re
        2 => Cx {
            re: z.im,
            im: sub_parts(g, None, z.re),
        },
        // (1 - i)/√2 (re + i im) = ((re + im) + i (im - re))/√2
        1 => {
            let s = add_parts(g, z.re, z.im);
            let d = sub_parts(g, z.im, z.re);
            Cx {
                re: s.map(|n| g.const_mul(n, FRAC_1_SQRT_2)),
                im: d.map(|n| g.const_mul(n, FRAC_1_SQRT_2)),
            }
        }
        // -(1 + i)/√2 (re + i im) = ((im - re) - i (re + im))/√2
        3 => {
            let d = sub_parts(g, z.im, z.re);
            let s = add_parts(g, z.re, z.im);
            Cx {
                re: d.map(|n| g.const_mul(n, FRAC_1_SQRT_2)),
                im: s.map(|n| g.const_mul(n, -FRAC_1_SQRT_2)),
            }
        }
        _ => unreachable!("radix-2 stages only use k < 4"),
    }
}

fn fft8() -> Dfg {
    let mut g = Dfg::new("fft8");
    let x: Vec<NodeId> = (0..8).map(|i| g.input(format!("x{i}"))).collect();
    // Bit-reversed order.
    let mut stage: Vec<Cx> = [0, 4, 2, 6, 1, 5, 3, 7]
        .iter()
        .map(|&i| Cx {
            re: Some(x[i]),
            im: None,
        })
        .collect();
    let mut span = 1;
    while span < 8 {
        let mut next = stage.clone();
        for group in (0..8).step_by(2 * span) {
            for j in 0..span {
                let top = stage[group + j];
                let bottom = twiddle(&mut g, stage[group + j + span], j * 8 / (2 * span));
                let (sum, diff) = butterfly(&mut g, top, bottom);
                next[group + j] = sum;
                next[group + j + span] = diff;
            }
        }
        stage = next;
        span *= 2;
    }
    for (k, z) in stage.iter().enumerate() {
        if let Some(re) = z.re {
            g.output(re, format!("re{k}"));
        }
        if let Some(im) = z.im {
            g.output(im, format!("im{k}"));
        }
    }
    g
}
