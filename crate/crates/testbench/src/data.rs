//! Synthetic datasets.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use treecert::Sample;

#[derive(Debug, Clone)]
pub struct Dataset {
    pub n_inputs: usize,
    pub n_classes: usize,
    pub samples: Vec<Sample>,
}

impl Dataset {
    /// First `fraction` of the samples for training, the rest for testing.
    pub fn split(&self, fraction: f64) -> (Dataset, Dataset) {
        let cut = (self.samples.len() as f64 * fraction).round() as usize;
        let part = |s: &[Sample]| Dataset {
            n_inputs: self.n_inputs,
            n_classes: self.n_classes,
            samples: s.to_vec(),
        };
        (part(&self.samples[..cut]), part(&self.samples[cut..]))
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        for s in &self.samples {
            for v in &s.features {
                out.push_str(&format!("{v},"));
            }
            out.push_str(&format!("{}\n", s.label));
        }
        out
    }
}

/// Two vehicles on curved trajectories; label 1 if they come closer than a
/// fixed radius within the simulated horizon.
///
/// Features: relative x and y position, speed and initial heading of the
/// second vehicle (all in `[0, 1]`), and the turn rate of each vehicle in
/// `[-1, 1]`.
pub fn collision_dataset(samples: usize, seed: u64) -> Dataset {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let samples = (0..samples)
        .map(|_| {
            let features = vec![
                rng.gen_range(0.0f32..1.0),
                rng.gen_range(0.0f32..1.0),
                rng.gen_range(0.0f32..1.0),
                rng.gen_range(0.0f32..1.0),
                rng.gen_range(-1.0f32..1.0),
                rng.gen_range(-1.0f32..1.0),
            ];
            let label = collides(&features) as usize;
            Sample { features, label }
        })
        .collect();
    Dataset {
        n_inputs: 6,
        n_classes: 2,
        samples,
    }
}

fn collides(f: &[f32]) -> bool {
    use std::f64::consts::PI;
    let f: Vec<f64> = f.iter().map(|&v| f64::from(v)).collect();
    let (mut x1, mut y1, mut h1) = (0.0f64, 0.0f64, 0.0f64);
    let (mut x2, mut y2) = (2.0 * f[0] - 1.0, 2.0 * f[1] - 1.0);
    let mut h2 = 2.0 * PI * f[3];
    let (v1, v2) = (0.5, 0.2 + 0.8 * f[2]);
    let dt = 0.1;
    for _ in 0..30 {
        if (x1 - x2).hypot(y1 - y2) < 0.25 {
            return true;
        }
        h1 += f[4] * PI * dt;
        h2 += f[5] * PI * dt;
        x1 += v1 * h1.cos() * dt;
        y1 += v1 * h1.sin() * dt;
        x2 += v2 * h2.cos() * dt;
        y2 += v2 * h2.sin() * dt;
    }
    false
}

const GLYPHS: [[&str; 7]; 10] = [
    [".###.", "#...#", "#..##", "#.#.#", "##..#", "#...#", ".###."],
    ["..#..", ".##..", "..#..", "..#..", "..#..", "..#..", ".###."],
    [".###.", "#...#", "....#", "...#.", "..#..", ".#...", "#####"],
    ["####.", "....#", "....#", ".###.", "....#", "....#", "####."],
    ["...#.", "..##.", ".#.#.", "#..#.", "#####", "...#.", "...#."],
    ["#####", "#....", "####.", "....#", "....#", "#...#", ".###."],
    ["..##.", ".#...", "#....", "####.", "#...#", "#...#", ".###."],
    ["#####", "....#", "...#.", "..#..", ".#...", ".#...", ".#..."],
    [".###.", "#...#", "#...#", ".###.", "#...#", "#...#", ".###."],
    [".###.", "#...#", "#...#", ".####", "....#", "...#.", ".##.."],
];

/// 8x8 grey-scale digits with integer intensities in `0..=16`, row-major.
/// Each image is a 5x7 glyph at a random offset with random stroke
/// intensity, slight blur, and background noise.
pub fn digits_dataset(samples: usize, seed: u64) -> Dataset {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let samples = (0..samples)
        .map(|i| {
            let label = i % 10;
            let (dx, dy) = (rng.gen_range(0..=3usize), rng.gen_range(0..=1usize));
            let mut img = [0.0f32; 64];
            let ink = rng.gen_range(10.0f32..16.0);
            for (r, row) in GLYPHS[label].iter().enumerate() {
                for (c, ch) in row.bytes().enumerate() {
                    if ch != b'#' || rng.gen_bool(0.08) {
                        continue;
                    }
                    let (y, x) = (r + dy, c + dx);
                    img[y * 8 + x] += ink;
                    for (ny, nx) in [(y.wrapping_sub(1), x), (y + 1, x), (y, x.wrapping_sub(1)), (y, x + 1)] {
                        if ny < 8 && nx < 8 {
                            img[ny * 8 + nx] += ink * 0.15;
                        }
                    }
                }
            }
            let features = img
                .iter()
                .map(|&v| (v + rng.gen_range(0.0f32..2.5)).round().clamp(0.0, 16.0))
                .collect();
            Sample { features, label }
        })
        .collect();
    Dataset {
        n_inputs: 64,
        n_classes: 10,
        samples,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn collision_labels_are_mixed() {
        let d = collision_dataset(2000, 1);
        let pos = d.samples.iter().filter(|s| s.label == 1).count();
        assert!(pos > 200 && pos < 1800, "{pos} positives");
    }

    #[test]
    fn digits_are_in_range() {
        let d = digits_dataset(100, 2);
        assert!(d
            .samples
            .iter()
            .all(|s| s.features.len() == 64 && s.features.iter().all(|&v| (0.0..=16.0).contains(&v))));
    }
}
