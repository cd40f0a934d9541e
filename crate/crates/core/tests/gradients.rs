//! Analytic gradients against central finite differences.

use docseg::backend::{Backend, CpuBackend, NaiveBackend};
use docseg::data::Labels;
use docseg::netgraph::ops::{upsample_bilinear_2x, upsample_bilinear_2x_backward};
use docseg::netgraph::{build_graph, ArchConfig, Network, RenormSettings, WeightStore};
use docseg::postproc::Grid;
use docseg::tensor::Tensor;
use docseg::train::{pixel_loss, LossMode};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random(shape: &[usize], rng: &mut ChaCha8Rng) -> Tensor {
    let n = shape.iter().product();
    Tensor::from_vec(shape, (0..n).map(|_| rng.gen_range(-2.0..2.0)).collect()).unwrap()
}

fn dot(a: &Tensor, b: &Tensor) -> f64 {
    a.data().iter().zip(b.data()).map(|(&x, &y)| x as f64 * y as f64).sum()
}

/// Central difference of `f` at coordinate `i` of `x`, using the step that
/// was actually representable in `f32`.
fn central(x: &Tensor, i: usize, eps: f32, mut f: impl FnMut(&Tensor) -> f64) -> f64 {
    let mut xp = x.clone();
    let mut xm = x.clone();
    xp.data_mut()[i] += eps;
    xm.data_mut()[i] -= eps;
    let h = xp.data()[i] as f64 - xm.data()[i] as f64;
    (f(&xp) - f(&xm)) / h
}

fn assert_close(analytic: f64, numeric: f64, rel: f64, what: &str) {
    let scale = analytic.abs().max(numeric.abs()).max(1e-4);
    assert!(
        (analytic - numeric).abs() <= rel * scale,
        "{what}: analytic {analytic:.8e} vs numeric {numeric:.8e}"
    );
}

fn random_labels(n: usize, h: usize, w: usize, c: usize, multilabel: bool, rng: &mut ChaCha8Rng) -> Vec<Labels> {
    (0..n)
        .map(|_| Labels {
            n_classes: c,
            multilabel,
            bits: Grid::from_fn(w, h, |_, _| {
                if rng.gen_bool(0.1) {
                    docseg::data::IGNORE
                } else if multilabel {
                    rng.gen_range(0..1u64 << c)
                } else {
                    1 << rng.gen_range(0..c)
                }
            }),
        })
        .collect()
}

#[test]
fn pixel_loss_gradient_matches_finite_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for (mode, multilabel) in [(LossMode::SoftmaxCe, false), (LossMode::SigmoidBce, true)] {
        for c in [2usize, 4] {
            let logits = random(&[2, 4, 4, c], &mut rng);
            let labels = random_labels(2, 4, 4, c, multilabel, &mut rng);
            let (_, grad) = pixel_loss(&logits, &labels, mode).unwrap();
            for i in 0..logits.len() {
                let num = central(&logits, i, 1e-2, |z| pixel_loss(z, &labels, mode).unwrap().0);
                assert_close(grad.data()[i] as f64, num, 1e-3, &format!("{mode:?} c={c} logit {i}"));
            }
        }
    }
}

/// Independent bilinear ×2 oracle: output `i` samples input coordinate
/// `(i + 0.5) / 2 - 0.5`, clamped to the valid range.
fn upsample_oracle(x: &Tensor) -> Vec<f64> {
    let (n, h, w, c) = x.nhwc();
    let coord = |i: usize, len: usize| -> (usize, usize, f64) {
        let s = ((i as f64 + 0.5) / 2.0 - 0.5).clamp(0.0, (len - 1) as f64);
        let lo = s.floor() as usize;
        (lo, (lo + 1).min(len - 1), s - lo as f64)
    };
    let v = |b: usize, y: usize, xx: usize, k: usize| x.data()[((b * h + y) * w + xx) * c + k] as f64;
    let mut out = Vec::new();
    for b in 0..n {
        for oy in 0..2 * h {
            let (y0, y1, fy) = coord(oy, h);
            for ox in 0..2 * w {
                let (x0, x1, fx) = coord(ox, w);
                for k in 0..c {
                    let top = v(b, y0, x0, k) * (1.0 - fx) + v(b, y0, x1, k) * fx;
                    let bot = v(b, y1, x0, k) * (1.0 - fx) + v(b, y1, x1, k) * fx;
                    out.push(top * (1.0 - fy) + bot * fy);
                }
            }
        }
    }
    out
}

#[test]
fn upsample_forward_matches_bilinear_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    for &(h, w) in &[(1usize, 1usize), (3, 5), (4, 4), (7, 2)] {
        let x = random(&[2, h, w, 3], &mut rng);
        let y = upsample_bilinear_2x(&x);
        assert_eq!(y.shape(), &[2, 2 * h, 2 * w, 3]);
        for (a, b) in y.data().iter().zip(upsample_oracle(&x)) {
            assert!((*a as f64 - b).abs() < 1e-5);
        }
    }
}

#[test]
fn upsample_backward_matches_finite_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    let x = random(&[1, 3, 4, 2], &mut rng);
    let dy = random(&[1, 6, 8, 2], &mut rng);
    let dx = upsample_bilinear_2x_backward(x.shape(), &dy);
    for i in 0..x.len() {
        let num = central(&x, i, 1e-2, |t| dot(&upsample_bilinear_2x(t), &dy));
        assert_close(dx.data()[i] as f64, num, 1e-3, &format!("upsample input {i}"));
    }
}

fn check_conv_backward(backend: &dyn Backend, seed: u64) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for &(k, s, c_in, c_out, h, w) in &[(3usize, 1usize, 2usize, 3usize, 8usize, 8usize), (3, 2, 2, 2, 6, 5), (1, 2, 3, 2, 4, 4)] {
        let x = random(&[1, h, w, c_in], &mut rng);
        let kern = random(&[k, k, c_in, c_out], &mut rng);
        let bias: Vec<f32> = (0..c_out).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let y = backend.conv2d(&x, &kern, Some(&bias), s);
        let dy = random(y.shape(), &mut rng);
        let g = backend.conv2d_backward(&x, &kern, s, &dy, true);
        let name = backend.name();
        let dx = g.input.expect("input gradient requested");
        // Linear in x and in the kernel: a large step keeps f32 rounding of
        // the outputs out of the difference quotient.
        for i in 0..x.len() {
            let num = central(&x, i, 0.5, |t| dot(&backend.conv2d(t, &kern, Some(&bias), s), &dy));
            assert_close(dx.data()[i] as f64, num, 1e-3, &format!("{name} k={k} s={s} dx[{i}]"));
        }
        for i in 0..kern.len() {
            let num = central(&kern, i, 0.5, |t| dot(&backend.conv2d(&x, t, Some(&bias), s), &dy));
            assert_close(g.kernel.data()[i] as f64, num, 1e-3, &format!("{name} k={k} s={s} dk[{i}]"));
        }
        // The output is affine in the bias, so its gradient is the sum of dy per channel.
        for (o, &gb) in g.bias.iter().enumerate() {
            let expect: f64 = dy.data().iter().skip(o).step_by(c_out).map(|&v| v as f64).sum();
            assert_close(gb as f64, expect, 1e-4, &format!("{name} bias {o}"));
        }
    }
}

#[test]
fn conv_backward_matches_finite_differences() {
    check_conv_backward(&CpuBackend::default(), 14);
    check_conv_backward(&NaiveBackend, 15);
}

/// End-to-end check through a slim network. Renormalisation is pinned to
/// plain batch normalisation (r = 1, d = 0) so the analytic gradient is the
/// exact derivative of the forward pass.
#[test]
fn network_backward_matches_finite_differences() {
    let graph = build_graph(&ArchConfig {
        reduction_channels: 4,
        decoder_channels: vec![4, 4, 4, 4, 4],
        ..Default::default()
    })
    .unwrap();
    let net = Network::new(graph.clone());
    let weights = WeightStore::xavier(&graph, 5);
    let mut rng = ChaCha8Rng::seed_from_u64(16);
    let x = random(&[2, 32, 32, 3], &mut rng);
    let labels = random_labels(2, 32, 32, 2, false, &mut rng);
    let renorm = RenormSettings {
        r_min: 1.0,
        r_max: 1.0,
        d_max: 0.0,
        momentum: 0.99,
    };
    let loss = |w: &WeightStore| -> f64 {
        let (logits, _) = net.forward_train(w, &x, &renorm).unwrap();
        pixel_loss(&logits, &labels, LossMode::SoftmaxCe).unwrap().0
    };
    let (logits, tape) = net.forward_train(&weights, &x, &renorm).unwrap();
    let (_, dlogits) = pixel_loss(&logits, &labels, LossMode::SoftmaxCe).unwrap();
    let grads = net.backward(&weights, &tape, &dlogits).unwrap();

    let names = [
        "classifier/weights",
        "decoder/step5/conv/weights",
        "decoder/step1/conv/renorm/gamma",
        "reduction/block4/weights",
        "encoder/block4/unit3/conv3/weights",
        "encoder/conv1/weights",
    ];
    let mut checked = 0;
    for name in names {
        let g = grads.get(name).unwrap_or_else(|| panic!("no gradient for {name}"));
        let p = weights.get(name).unwrap();
        // Largest-gradient coordinates give the best signal-to-rounding ratio.
        let mut idx: Vec<usize> = (0..p.len()).collect();
        idx.sort_by(|&a, &b| g.data()[b].abs().total_cmp(&g.data()[a].abs()));
        for &i in idx.iter().take(3) {
            // f32 rounding of the loss (~1e-7) swamps smaller gradients.
            if g.data()[i].abs() < 1e-3 {
                continue;
            }
            // Kinks sit densely around the stem, so the quotient is taken over a
            // shrinking ladder of steps; it converges to the analytic value.
            let errors: Vec<(f32, f64)> = [1e-3f32, 3e-4, 1e-4]
                .iter()
                .map(|&eps| {
                    let num = central(p, i, eps, |t| {
                        let mut w = weights.clone();
                        *w.get_mut(name).unwrap() = t.clone();
                        loss(&w)
                    });
                    (eps, num)
                })
                .collect();
            let analytic = g.data()[i] as f64;
            let best = errors
                .iter()
                .map(|&(_, n)| n)
                .min_by(|a, b| (a - analytic).abs().total_cmp(&(b - analytic).abs()))
                .unwrap();
            assert_close(analytic, best, 1e-2, &format!("{name}[{i}] over steps {errors:?}"));
            checked += 1;
        }
    }
    assert!(checked >= 9, "only {checked} coordinates carry a measurable gradient");
}
