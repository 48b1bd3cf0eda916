use std::f64::consts::PI;

use ndarray::Array2;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{seeded_rng, standard_normal};
use crate::mlp::{Dataset, Targets};

/// `f(x) = 4x sin(8x)`, the W-shaped regression target.
pub fn wreg_target(x: f64) -> f64 {
    4.0 * x * (8.0 * x).sin()
}

/// `n` noiseless samples of [`wreg_target`] at `x ~ U[-1, 1]`.
pub fn gen_wreg(n: usize, seed: u64) -> Result<Dataset> {
    if n < 2 {
        return Err(Error::invalid(format!("wreg needs at least 2 samples, got {n}")));
    }
    let mut rng = seeded_rng(seed);
    let xs: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..=1.0)).collect();
    let ys: Vec<f64> = xs.iter().map(|&x| wreg_target(x)).collect();
    Dataset::new(
        "wreg",
        Array2::from_shape_vec((n, 1), xs).expect("n x 1"),
        Targets::Values(Array2::from_shape_vec((n, 1), ys).expect("n x 1")),
    )
}

/// Two interleaved spiral arms, one per class.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SwissRoll {
    pub t_min: f64,
    pub t_max: f64,
    pub noise: f64,
    /// Coordinates are divided by this before noise is added.
    pub scale: f64,
}

impl Default for SwissRoll {
    fn default() -> Self {
        Self {
            t_min: 0.5 * PI,
            t_max: 3.5 * PI,
            noise: 0.01,
            scale: 3.5 * PI,
        }
    }
}

impl SwissRoll {
    /// Noise-free point on arm `class` at parameter `t`.
    pub fn point(&self, t: f64, class: usize) -> [f64; 2] {
        let phase = t + class as f64 * PI;
        [t * phase.cos() / self.scale, t * phase.sin() / self.scale]
    }

    /// `n` points, alternating class 0 and 1.
    pub fn generate(&self, n: usize, seed: u64) -> Result<Dataset> {
        if n < 2 || n % 2 != 0 {
            return Err(Error::invalid(format!("swiss roll needs an even n >= 2, got {n}")));
        }
        let mut rng = seeded_rng(seed);
        let mut inputs = Array2::zeros((n, 2));
        let mut labels = Vec::with_capacity(n);
        for i in 0..n {
            let class = i % 2;
            let t = rng.random_range(self.t_min..=self.t_max);
            let p = self.point(t, class);
            for (d, coord) in p.iter().enumerate() {
                inputs[(i, d)] = coord + self.noise * standard_normal(&mut rng);
            }
            labels.push(class);
        }
        Dataset::new("swissroll", inputs, Targets::Classes(labels))
    }
}

pub fn gen_swissroll(n: usize, seed: u64) -> Result<Dataset> {
    SwissRoll::default().generate(n, seed)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn wreg_reference_values() {
        assert_eq!(wreg_target(0.0), 0.0);
        assert!((wreg_target(1.0) - 3.9574).abs() < 1e-4);
        assert!((wreg_target(0.5) - -1.5136).abs() < 1e-4);
        assert!(gen_wreg(1, 0).is_err());
    }

    #[test]
    fn swissroll_balance_and_antipodes() {
        let d = gen_swissroll(200, 3).unwrap();
        let Targets::Classes(c) = d.targets() else { panic!() };
        assert_eq!(c.iter().filter(|&&k| k == 0).count(), 100);
        let roll = SwissRoll::default();
        let (a, b) = (roll.point(2.0, 0), roll.point(2.0, 1));
        assert!((a[0] + b[0]).abs() < 1e-15 && (a[1] + b[1]).abs() < 1e-15);
        assert!(gen_swissroll(201, 0).is_err());
        assert_eq!(gen_swissroll(50, 9).unwrap().inputs(), gen_swissroll(50, 9).unwrap().inputs());
    }
}
