//! Baseline detection: smoothing, hysteresis and centre-line vectorisation
//! on a probability map with a few gently curved text lines.

use docseg::pipelines::{builtin_task, postprocess, Shape};
use docseg::postproc::ProbabilityMap;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn main() -> docseg::Result<()> {
    let task = builtin_task("baseline")?;
    let (w, h) = (480, 320);
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    // y = base + amp·sin(x / period), x in [start, end)
    let lines: Vec<(f64, f64, f64, usize, usize)> = (0..5)
        .map(|i| (40.0 + 55.0 * i as f64, rng.gen_range(0.0..6.0), rng.gen_range(40.0..90.0), rng.gen_range(10..60), rng.gen_range(360..470)))
        .collect();
    let mut data = Vec::with_capacity(w * h * 2);
    for y in 0..h {
        for x in 0..w {
            let ridge = lines
                .iter()
                .filter(|l| x >= l.3 && x < l.4)
                .map(|&(base, amp, period, _, _)| {
                    let d = y as f64 - (base + amp * (x as f64 / period).sin());
                    (-d * d / 4.0).exp()
                })
                .fold(0.0, f64::max);
            let p = (0.9 * ridge + rng.gen_range(0.0..0.08)).min(1.0) as f32;
            data.extend([1.0 - p, p]);
        }
    }
    let map = ProbabilityMap::new(w, h, 2, data)?;
    let out = postprocess(&task, &map, None)?;
    for (_, shape) in &out.shapes {
        if let Shape::Polyline(line) = shape {
            let v = line.vertices();
            let (a, b) = (v[0], v[v.len() - 1]);
            println!("{:2} vertices  ({:.0}, {:.0}) .. ({:.0}, {:.0})", v.len(), a[0], a[1], b[0], b[1]);
        }
    }
    println!("{} baselines from {} drawn", out.shapes.len(), lines.len());
    Ok(())
}
