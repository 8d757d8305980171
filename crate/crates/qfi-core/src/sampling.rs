//! Quasi-random in-domain point sampling for residual certification.
//!
//! Certification sweeps use a deterministic low-discrepancy sequence (the
//! R_d additive recurrence) inside an axis-aligned box, rejecting points
//! closer than `margin` to an excluded locus. Given the same seed, box and
//! count, the sample set is reproducible bit-for-bit.

use crate::field::Domain;

/// Axis-aligned sampling box.
#[derive(Debug, Clone)]
pub struct SampleBox {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
}

impl SampleBox {
    pub fn new(lo: Vec<f64>, hi: Vec<f64>) -> Self {
        assert_eq!(lo.len(), hi.len());
        SampleBox { lo, hi }
    }

    pub fn dim(&self) -> usize {
        self.lo.len()
    }
}

/// Margin used when rejecting sample points near excluded loci.
pub const SAMPLE_MARGIN: f64 = 1e-2;

/// Generalized-golden-ratio (R_d) low-discrepancy sequence in [0, 1)^d.
fn r_sequence(d: usize, index: u64) -> Vec<f64> {
    // phi_d is the unique positive root of x^(d+1) = x + 1.
    let mut phi = 1.5_f64;
    for _ in 0..64 {
        phi = (1.0 + phi).powf(1.0 / (d as f64 + 1.0));
    }
    (0..d)
        .map(|k| {
            let alpha = 1.0 / phi.powi(k as i32 + 1);
            (0.5 + alpha * index as f64).fract()
        })
        .collect()
}

/// Draw `count` in-domain points from `box_`, skipping points within
/// `SAMPLE_MARGIN` of the domain's excluded loci. The `seed` offsets the
/// sequence so distinct sweeps decorrelate while staying deterministic.
pub fn sample_points(box_: &SampleBox, domain: &Domain, count: usize, seed: u64) -> Vec<Vec<f64>> {
    let d = box_.dim();
    let mut out = Vec::with_capacity(count);
    let mut index = seed.wrapping_mul(7919).wrapping_add(1);
    let mut attempts = 0u64;
    while out.len() < count {
        attempts += 1;
        assert!(
            attempts < 100_000,
            "sampling box appears to lie mostly outside the domain"
        );
        let u = r_sequence(d, index);
        index += 1;
        let q: Vec<f64> = (0..d)
            .map(|k| box_.lo[k] + u[k] * (box_.hi[k] - box_.lo[k]))
            .collect();
        if domain.contains(&q, SAMPLE_MARGIN) {
            out.push(q);
        }
    }
    out
}

/// Certification sweep configuration: number of sample points and residual
/// tolerance. Defaults follow the crate-wide certification policy
/// (200 points, 1e-10 for symmetry objects).
#[derive(Debug, Clone)]
pub struct CertConfig {
    pub n_points: usize,
    pub tol: f64,
    pub seed: u64,
}

impl Default for CertConfig {
    fn default() -> Self {
        CertConfig {
            n_points: 200,
            tol: 1e-10,
            seed: 0,
        }
    }
}

impl CertConfig {
    pub fn with_tol(tol: f64) -> Self {
        CertConfig {
            tol,
            ..Default::default()
        }
    }
}

/// Residual certificate: the sup of a defining-equation residual over the
/// sampled points.
#[derive(Debug, Clone, serde::Serialize)]
pub struct Certificate {
    pub max_residual: f64,
    pub points_sampled: usize,
}

impl Certificate {
    pub fn sweep<F: FnMut(&[f64]) -> f64>(points: &[Vec<f64>], mut residual: F) -> Certificate {
        let max_residual = points
            .iter()
            .map(|q| residual(q))
            .fold(0.0_f64, |m, r| m.max(r.abs()));
        Certificate {
            max_residual,
            points_sampled: points.len(),
        }
    }

    pub fn passes(&self, tol: f64) -> bool {
        self.max_residual <= tol
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sampler_is_deterministic_and_respects_domain() {
        let bx = SampleBox::new(vec![-1.0, -1.0], vec![1.0, 1.0]);
        let dom = Domain::excluding(|q| (q[0] + q[1]).abs());
        let a = sample_points(&bx, &dom, 200, 3);
        let b = sample_points(&bx, &dom, 200, 3);
        assert_eq!(a, b);
        for q in &a {
            assert!((q[0] + q[1]).abs() > SAMPLE_MARGIN);
        }
    }

    #[test]
    fn r_sequence_covers_box() {
        let bx = SampleBox::new(vec![0.0], vec![1.0]);
        let pts = sample_points(&bx, &Domain::all(), 1000, 0);
        let mean: f64 = pts.iter().map(|p| p[0]).sum::<f64>() / 1000.0;
        assert!((mean - 0.5).abs() < 0.02, "mean {mean}");
    }
}
