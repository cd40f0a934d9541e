//! Overfits a slim network on synthetic pages and reports training mIoU.
//!
//! Usage: `cargo run --release --example train_synthetic -- [epochs] [size] [lr]`

use std::time::Instant;

use docseg::data::synthetic_pages;
use docseg::eval::{mask_iou, mean_iou};
use docseg::netgraph::{build_graph, ArchConfig, Network, WeightStore};
use docseg::postproc::Grid;
use docseg::train::{fit_with, FitOptions, TrainConfig};

fn main() -> docseg::Result<()> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let epochs: usize = args.first().map_or(20, |s| s.parse().expect("epochs"));
    let size: usize = args.get(1).map_or(256, |s| s.parse().expect("size"));
    let lr: f64 = args.get(2).map_or(1e-3, |s| s.parse().expect("lr"));

    let pages = synthetic_pages(8, size, size, 42);
    let samples: Vec<_> = pages.iter().map(|p| p.sample.clone()).collect();

    let arch = ArchConfig {
        reduction_channels: 32,
        decoder_channels: vec![32, 32, 16, 16, 8],
        ..Default::default()
    };
    let graph = build_graph(&arch)?;
    let mut weights = WeightStore::xavier(&graph, 1);
    let config = TrainConfig {
        initial_lr: lr,
        allow_any_lr: true,
        freeze_encoder: true,
        epochs,
        batch_size: 1,
        seed: 3,
        ..Default::default()
    };

    let start = Instant::now();
    let mut last = Instant::now();
    let mut report = |r: &docseg::train::StepRecord, _: &WeightStore| {
        if r.step % 8 == 7 {
            println!("step {:4}  loss {:.4}  ({:.2} s/step)", r.step + 1, r.loss, last.elapsed().as_secs_f64() / 8.0);
            last = Instant::now();
        }
        Ok(())
    };
    let history = fit_with(
        &graph,
        &mut weights,
        &samples,
        &config,
        FitOptions {
            jobs: 1,
            on_step: Some(&mut report),
            ..Default::default()
        },
    )?;
    println!("{} steps in {:.1} s", history.steps.len(), start.elapsed().as_secs_f64());

    let net = Network::new(graph);
    let mut ious = Vec::new();
    for p in &pages {
        let probs = net.forward(&weights, &p.sample.image.to_input_tensor()?)?;
        let (_, h, w, c) = probs.nhwc();
        let d = probs.data();
        let pred = Grid::from_fn(w, h, |x, y| {
            let o = (y * w + x) * c;
            d[o + 1] > d[o]
        });
        ious.push(mask_iou(&pred, &p.sample.labels.class_mask(1))?);
    }
    println!("training mIoU (foreground): {:.4}", mean_iou(&ious)?);
    Ok(())
}
