//! Shared helpers for the integration tests: deterministic RNG, a direct
//! 2-D DFT, zero-padded convolution, an independent greedy-merge oracle,
//! and the procedural texture dataset used by the end-to-end suite.

#![allow(dead_code)]

use std::f64::consts::TAU;
use std::path::Path;

use num_complex::Complex64;
use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

use lfd::imaging::{save_pgm, GrayImage, Kernel};

pub fn seeded_rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Uniform f64 in [0, 1) from the top 53 bits of one draw.
pub fn unit_f64(rng: &mut impl RngCore) -> f64 {
    (rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

pub fn random_image(rng: &mut impl RngCore, w: usize, h: usize) -> GrayImage {
    let samples = (0..w * h).map(|_| unit_f64(rng)).collect();
    GrayImage::new(w, h, samples).unwrap()
}

/// Full-image 2-D DFT by row-column 1-D transforms. Index (a, b) holds the
/// response at frequency (a/h cycles per row step, b/w cycles per col step).
pub fn dft2(data: &[f64], w: usize, h: usize) -> Vec<Complex64> {
    let complex: Vec<Complex64> = data.iter().map(|v| Complex64::new(*v, 0.0)).collect();
    dft2_complex(&complex, w, h)
}

pub fn dft2_complex(data: &[Complex64], w: usize, h: usize) -> Vec<Complex64> {
    let twiddle = |n: usize| -> Vec<Complex64> {
        (0..n).map(|k| Complex64::cis(-TAU * k as f64 / n as f64)).collect()
    };
    let tw_w = twiddle(w);
    let tw_h = twiddle(h);

    // Rows first.
    let mut rows = vec![Complex64::ZERO; w * h];
    for r in 0..h {
        for b in 0..w {
            let mut acc = Complex64::ZERO;
            for c in 0..w {
                acc += data[r * w + c] * tw_w[(b * c) % w];
            }
            rows[r * w + b] = acc;
        }
    }
    // Then columns.
    let mut out = vec![Complex64::ZERO; w * h];
    for b in 0..w {
        for a in 0..h {
            let mut acc = Complex64::ZERO;
            for r in 0..h {
                acc += rows[r * w + b] * tw_h[(a * r) % h];
            }
            out[a * w + b] = acc;
        }
    }
    out
}

/// DFT of a centered kernel on a w x h grid: the taps sit at offsets
/// relative to the kernel center, matching centered convolution.
pub fn kernel_dft(kernel: &Kernel, w: usize, h: usize) -> Vec<Complex64> {
    let kh = kernel.height() as i64 / 2;
    let kw = kernel.width() as i64 / 2;
    let mut out = vec![Complex64::ZERO; w * h];
    for a in 0..h {
        for b in 0..w {
            let mut acc = Complex64::ZERO;
            for r in -kh..=kh {
                for c in -kw..=kw {
                    let weight = kernel.at((r + kh) as usize, (c + kw) as usize);
                    let phase = -TAU * (a as f64 * r as f64 / h as f64 + b as f64 * c as f64 / w as f64);
                    acc += weight * Complex64::cis(phase);
                }
            }
            out[a * w + b] = acc;
        }
    }
    out
}

/// Centered convolution with zero padding, same-size output.
pub fn conv2_zero(data: &[f64], w: usize, h: usize, kernel: &Kernel) -> Vec<f64> {
    let kh = kernel.height() as i64 / 2;
    let kw = kernel.width() as i64 / 2;
    let read = |r: i64, c: i64| -> f64 {
        if r < 0 || c < 0 || r >= h as i64 || c >= w as i64 {
            0.0
        } else {
            data[r as usize * w + c as usize]
        }
    };
    let mut out = vec![0.0; w * h];
    for r in 0..h as i64 {
        for c in 0..w as i64 {
            let mut acc = 0.0;
            for dr in -kh..=kh {
                for dc in -kw..=kw {
                    acc += kernel.at((dr + kh) as usize, (dc + kw) as usize) * read(r - dr, c - dc);
                }
            }
            out[r as usize * w + c as usize] = acc;
        }
    }
    out
}

/// Multiply an image by a window centered at `(center_row, center_col)`;
/// zero outside the window support.
pub fn windowed_image(
    data: &[f64],
    w: usize,
    h: usize,
    window: &[f64],
    window_size: usize,
    center_row: usize,
    center_col: usize,
) -> Vec<f64> {
    let half = (window_size / 2) as i64;
    let mut out = vec![0.0; w * h];
    for dr in -half..=half {
        for dc in -half..=half {
            let r = center_row as i64 + dr;
            let c = center_col as i64 + dc;
            if r >= 0 && c >= 0 && (r as usize) < h && (c as usize) < w {
                let wv = window[(dr + half) as usize * window_size + (dc + half) as usize];
                out[r as usize * w + c as usize] = wv * data[r as usize * w + c as usize];
            }
        }
    }
    out
}

/// Independent brute-force greedy merge: rescans the full group list at
/// every step.
pub fn brute_force_merge(hist: &[u64], target: usize) -> Vec<u32> {
    let mut groups: Vec<(u64, Vec<u32>)> =
        hist.iter().enumerate().map(|(b, c)| (*c, vec![b as u32])).collect();
    while groups.len() > target {
        let key = |g: &(u64, Vec<u32>)| (g.0, *g.1.iter().min().unwrap());
        let mut order: Vec<usize> = (0..groups.len()).collect();
        order.sort_by_key(|&i| key(&groups[i]));
        let (a, b) = (order[0], order[1]);
        let (lo, hi) = (a.min(b), a.max(b));
        let absorbed = groups.remove(hi);
        groups[lo].0 += absorbed.0;
        groups[lo].1.extend(absorbed.1);
    }
    groups.sort_by_key(|g| *g.1.iter().min().unwrap());
    let mut assignment = vec![0u32; hist.len()];
    for (id, (_, members)) in groups.iter().enumerate() {
        for &b in members {
            assignment[b as usize] = id as u32;
        }
    }
    assignment
}

/// Procedural texture dataset: `classes` directories of `per_class` PGM
/// images, `side` x `side`. Every class is a fixed mixture of three oriented
/// gratings (deterministic per class index); samples vary by grating phase
/// and light pixel noise, seeded by `master_seed`.
pub fn write_synthetic_dataset(
    root: &Path,
    classes: usize,
    per_class: usize,
    side: usize,
    master_seed: u64,
) {
    for class in 0..classes {
        let dir = root.join(format!("tex{class:02}"));
        std::fs::create_dir_all(&dir).unwrap();
        let gratings = class_gratings(class, classes);
        for index in 0..per_class {
            let img = synthetic_sample(&gratings, side, master_seed, class, index);
            save_pgm(&img, &dir.join(format!("s{index:02}.pgm"))).unwrap();
        }
    }
}

/// One standalone texture image: the grating mixture of a synthetic class,
/// with seed-driven phases and noise.
pub fn texture_image(side: usize, class: usize, classes: usize, seed: u64) -> GrayImage {
    synthetic_sample(&class_gratings(class, classes), side, seed, class, 0)
}

/// (orientation, frequency, amplitude) triples of one class.
fn class_gratings(class: usize, classes: usize) -> Vec<(f64, f64, f64)> {
    let base_angle = std::f64::consts::PI * class as f64 / classes as f64;
    let base_freq = 0.07 + 0.012 * class as f64;
    vec![
        (base_angle, base_freq, 0.22),
        (base_angle + std::f64::consts::PI / 3.0, (2.1 * base_freq).min(0.45), 0.13),
        (base_angle + 2.0 * std::f64::consts::PI / 3.0, (3.3 * base_freq).min(0.45), 0.07),
    ]
}

fn synthetic_sample(
    gratings: &[(f64, f64, f64)],
    side: usize,
    master_seed: u64,
    class: usize,
    index: usize,
) -> GrayImage {
    let stream = master_seed
        .wrapping_add((class as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15))
        .wrapping_add((index as u64).wrapping_mul(0xD1B5_4A32_D192_ED03));
    let mut rng = seeded_rng(stream);
    let phases: Vec<f64> = gratings.iter().map(|_| unit_f64(&mut rng) * TAU).collect();
    let mut samples = Vec::with_capacity(side * side);
    for r in 0..side {
        for c in 0..side {
            let mut v = 0.5;
            for ((angle, freq, amp), phase) in gratings.iter().zip(&phases) {
                let t = TAU * freq * (angle.cos() * c as f64 + angle.sin() * r as f64) + phase;
                v += amp * t.sin();
            }
            v += 0.03 * (unit_f64(&mut rng) - 0.5);
            samples.push(v.clamp(0.0, 1.0));
        }
    }
    GrayImage::new(side, side, samples).unwrap()
}
