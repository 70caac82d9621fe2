use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use schedsel_core::dfg::Trace;
use schedsel_core::kernels::{FIR6_TAPS, SOBEL_GX};
use schedsel_core::{build_kernel, EvalMode, FixedPointFormat, KernelName, KernelParams, ScheduledDfg};

fn build(name: KernelName) -> ScheduledDfg {
    build_kernel(name, &KernelParams::default()).unwrap()
}

fn output(dfg: &ScheduledDfg, trace: &Trace, label: &str) -> f64 {
    dfg.outputs()
        .find(|&id| dfg.nodes[id].label == label)
        .map(|id| trace.values[id])
        .unwrap_or(0.0)
}

fn quantized(fmt: &FixedPointFormat, xs: &[f64]) -> Vec<f64> {
    xs.iter().map(|&x| fmt.to_real(fmt.quantize(x).0)).collect()
}

fn random_inputs(rng: &mut ChaCha8Rng, n: usize, scale: f64) -> Vec<f64> {
    (0..n).map(|_| rng.random_range(-scale..scale)).collect()
}

#[test]
fn dct8_matches_direct_matrix_product() {
    let dfg = build(KernelName::Dct8);
    let fmt = FixedPointFormat::default();
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..500 {
        let x = quantized(&fmt, &random_inputs(&mut rng, 8, 2.0));
        let trace = dfg.evaluate(&x, EvalMode::Exact, &fmt).unwrap();
        for k in 0..8 {
            let direct: f64 = (0..8)
                .map(|n| x[n] * (PI * ((2 * n + 1) * k) as f64 / 16.0).cos())
                .sum();
            let got = output(&dfg, &trace, &format!("X{k}"));
            // four floored products plus quantized coefficients
            assert!((got - direct).abs() <= 8.0 * fmt.ulp(), "X{k}: {got} vs {direct}");
        }
    }
}

fn dft(x: &[f64]) -> Vec<(f64, f64)> {
    let n = x.len();
    (0..n)
        .map(|k| {
            x.iter().enumerate().fold((0.0, 0.0), |(re, im), (j, &v)| {
                let a = -2.0 * PI * (j * k) as f64 / n as f64;
                (re + v * a.cos(), im + v * a.sin())
            })
        })
        .collect()
}

fn fft_outputs(dfg: &ScheduledDfg, trace: &Trace) -> Vec<(f64, f64)> {
    (0..8)
        .map(|k| {
            (
                output(dfg, trace, &format!("re{k}")),
                output(dfg, trace, &format!("im{k}")),
            )
        })
        .collect()
}

#[test]
fn fft8_matches_direct_dft() {
    let dfg = build(KernelName::Fft8);
    let fmt = FixedPointFormat::default();
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    for _ in 0..500 {
        let x = quantized(&fmt, &random_inputs(&mut rng, 8, 2.0));
        let trace = dfg.evaluate(&x, EvalMode::Exact, &fmt).unwrap();
        for (k, ((re, im), (dre, dim))) in fft_outputs(&dfg, &trace).into_iter().zip(dft(&x)).enumerate() {
            assert!((re - dre).abs() <= 6.0 * fmt.ulp(), "re{k}: {re} vs {dre}");
            assert!((im - dim).abs() <= 6.0 * fmt.ulp(), "im{k}: {im} vs {dim}");
        }
    }
}

#[test]
fn fft8_preserves_energy_on_basis_inputs() {
    let dfg = build(KernelName::Fft8);
    let fmt = FixedPointFormat::default();
    for j in 0..8 {
        let mut x = vec![0.0; 8];
        x[j] = 1.5;
        let trace = dfg.evaluate(&x, EvalMode::Exact, &fmt).unwrap();
        let out: f64 = fft_outputs(&dfg, &trace).iter().map(|(r, i)| r * r + i * i).sum();
        let input: f64 = x.iter().map(|v| v * v).sum();
        assert!((out / 8.0 - input).abs() < 0.02, "basis {j}: {} vs {input}", out / 8.0);
    }
}

#[test]
fn fft8_preserves_energy_on_random_inputs() {
    let dfg = build(KernelName::Fft8);
    let fmt = FixedPointFormat::default();
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    for _ in 0..200 {
        let x = quantized(&fmt, &random_inputs(&mut rng, 8, 1.0));
        let trace = dfg.evaluate(&x, EvalMode::Exact, &fmt).unwrap();
        let out: f64 = fft_outputs(&dfg, &trace).iter().map(|(r, i)| r * r + i * i).sum();
        let input: f64 = x.iter().map(|v| v * v).sum();
        assert!((out / 8.0 - input).abs() < 0.05, "{} vs {input}", out / 8.0);
    }
}

/// The exact datapath is the fixed-point dot product with each product
/// floored once.
fn fir_fixed_oracle(fmt: &FixedPointFormat, x: &[f64]) -> f64 {
    let raw: i64 = x
        .iter()
        .zip(FIR6_TAPS)
        .map(|(&v, c)| (fmt.quantize(v).0 * fmt.quantize(c).0).div_euclid(256))
        .sum();
    fmt.to_real(raw)
}

#[test]
fn fir6_is_linear_up_to_product_rounding() {
    let dfg = build(KernelName::Fir6);
    let fmt = FixedPointFormat::default();
    let ulp = fmt.ulp();
    let y_of = |x: &[f64]| {
        let t = dfg.evaluate(x, EvalMode::Exact, &fmt).unwrap();
        output(&dfg, &t, "y")
    };
    let mut rng = ChaCha8Rng::seed_from_u64(14);
    for _ in 0..1000 {
        let x = quantized(&fmt, &random_inputs(&mut rng, 6, 4.0));
        let y = quantized(&fmt, &random_inputs(&mut rng, 6, 4.0));
        let (a, b) = (rng.random_range(-3i32..=3) as f64, rng.random_range(-3i32..=3) as f64);
        let combo: Vec<f64> = x.iter().zip(&y).map(|(u, v)| a * u + b * v).collect();
        assert_eq!(y_of(&x), fir_fixed_oracle(&fmt, &x));
        let lhs = y_of(&combo);
        let rhs = a * y_of(&x) + b * y_of(&y);
        // each of the six products loses under one ULP in every evaluation
        let bound = 6.0 * (1.0 + a.abs() + b.abs()) * ulp;
        assert!((lhs - rhs).abs() < bound, "{lhs} vs {rhs}");
    }
    assert_eq!(y_of(&[0.0; 6]), 0.0);
}

#[test]
fn fir6_exact_products_are_exactly_linear() {
    // inputs that are multiples of 4 make every tap product exact
    let dfg = build(KernelName::Fir6);
    let fmt = FixedPointFormat::default();
    let y_of = |x: &[f64]| {
        let t = dfg.evaluate(x, EvalMode::Exact, &fmt).unwrap();
        output(&dfg, &t, "y")
    };
    let mut rng = ChaCha8Rng::seed_from_u64(15);
    for _ in 0..200 {
        let x: Vec<f64> = (0..6).map(|_| 4.0 * rng.random_range(-4i32..=4) as f64).collect();
        let y: Vec<f64> = (0..6).map(|_| 4.0 * rng.random_range(-4i32..=4) as f64).collect();
        let combo: Vec<f64> = x.iter().zip(&y).map(|(u, v)| 2.0 * u - v).collect();
        assert!((y_of(&combo) - (2.0 * y_of(&x) - y_of(&y))).abs() <= fmt.ulp());
    }
}

fn mean_abs_error(name: KernelName, truncation: u32, inputs: &[Vec<f64>]) -> f64 {
    let dfg = build(name);
    let fmt = FixedPointFormat::default().with_truncation(truncation);
    let total: f64 = inputs
        .iter()
        .map(|x| {
            let exact = dfg.evaluate(x, EvalMode::Exact, &fmt).unwrap();
            let approx = dfg.evaluate(x, EvalMode::Approximate, &fmt).unwrap();
            dfg.outputs()
                .map(|o| (exact.values[o] - approx.values[o]).abs())
                .sum::<f64>()
        })
        .sum();
    total / inputs.len() as f64
}

#[test]
fn error_grows_with_truncation() {
    for name in KernelName::BENCHMARKS {
        let dfg = build(name);
        let mut rng = ChaCha8Rng::seed_from_u64(16);
        let inputs: Vec<Vec<f64>> = (0..1000)
            .map(|_| name.default_sampler().draw(&mut rng, dfg.input_count()))
            .collect();
        let errors: Vec<f64> = (0..=6).map(|t| mean_abs_error(name, t, &inputs)).collect();
        assert_eq!(errors[0], 0.0, "{name}");
        assert!(errors[1] > 0.0, "{name}");
        assert!(errors.windows(2).all(|w| w[1] >= w[0]), "{name}: {errors:?}");
    }
}

#[test]
fn zero_truncation_is_exact() {
    let fmt = FixedPointFormat::default().with_truncation(0);
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    for name in KernelName::BENCHMARKS {
        let dfg = build(name);
        for _ in 0..50 {
            let x = name.default_sampler().draw(&mut rng, dfg.input_count());
            let e = dfg.evaluate(&x, EvalMode::Exact, &fmt).unwrap();
            let a = dfg.evaluate(&x, EvalMode::Approximate, &fmt).unwrap();
            assert_eq!(e.raw, a.raw, "{name}");
        }
    }
}

#[test]
fn sobel_matches_convolution() {
    let dfg = build(KernelName::Sobel);
    let fmt = FixedPointFormat::default();
    let mut rng = ChaCha8Rng::seed_from_u64(18);
    for _ in 0..200 {
        let p = KernelName::Sobel.default_sampler().draw(&mut rng, 9);
        let t = dfg.evaluate(&p, EvalMode::Exact, &fmt).unwrap();
        let direct: f64 = (0..9).map(|i| SOBEL_GX[i / 3][i % 3] * p[i]).sum();
        assert!((output(&dfg, &t, "gx") - direct).abs() < 1e-12);
    }
}

#[test]
fn arm_position_tracks_true_kinematics() {
    let dfg = build(KernelName::Forwardk2j);
    let fmt = FixedPointFormat::default();
    let mut rng = ChaCha8Rng::seed_from_u64(19);
    // Worst-case fit errors on [-1, 1]: 0.016 for sin, 0.063 for cos. The
    // angle-sum products add at most the sum of the four factor errors.
    let bound = 0.063 + 0.75 * 2.0 * (0.016 + 0.063) + 0.02;
    let mut total = 0.0;
    for _ in 0..500 {
        let th = KernelName::Forwardk2j.default_sampler().draw(&mut rng, 2);
        let t = dfg.evaluate(&th, EvalMode::Exact, &fmt).unwrap();
        let x = th[0].cos() + 0.75 * (th[0] + th[1]).cos();
        let y = th[0].sin() + 0.75 * (th[0] + th[1]).sin();
        let (ex, ey) = ((output(&dfg, &t, "x") - x).abs(), (output(&dfg, &t, "y") - y).abs());
        assert!(ex < bound && ey < bound, "{th:?}: {ex} {ey}");
        total += ex + ey;
    }
    assert!(total / 1000.0 < 0.05);
}
