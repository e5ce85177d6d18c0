//! Closed-form mean of a quadratic surrogate over a box and its gradient with
//! respect to the box parameters.
//!
//! Over `Π [c_k - σ_k, c_k + σ_k]` the uniform mean of each monomial is
//!
//! * `1 -> 1`
//! * `x_i -> c_i`
//! * `x_i x_j -> c_i c_j` for `i != j`
//! * `x_i^2 -> c_i^2 + σ_i^2 / 3`
//!
//! The volume `Π 2σ_k` never has to be formed: it cancels against the
//! normalization.

use serde::{Deserialize, Serialize};

use crate::domain::BoxDomain;
use crate::error::{Error, Result};
use crate::surrogate::QuadraticSurrogate;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeanAndGrad {
    pub mean: f64,
    pub d_center: Vec<f64>,
    pub d_half: Vec<f64>,
}

fn check(s: &QuadraticSurrogate, domain: &BoxDomain) -> Result<()> {
    if s.dim() != domain.dim() || domain.half_lengths.len() != domain.dim() {
        return Err(Error::Domain(format!(
            "surrogate has {} dims, box has {}",
            s.dim(),
            domain.dim()
        )));
    }
    if let Some((i, s)) = domain
        .half_lengths
        .iter()
        .enumerate()
        .find(|(_, s)| s.is_nan() || **s <= 0.0)
    {
        return Err(Error::Domain(format!("half-length {i} is not positive ({s})")));
    }
    Ok(())
}

/// Uniform mean of `s` over the box.
pub fn box_mean(s: &QuadraticSurrogate, domain: &BoxDomain) -> Result<f64> {
    check(s, domain)?;
    let (c, sig) = (&domain.centers, &domain.half_lengths);
    let d = s.dim();
    let mut mean = s.constant;
    let mut k = 0;
    for i in 0..d {
        mean += s.linear[i] * c[i];
        for j in i..d {
            let b = s.quad[k];
            k += 1;
            mean += if i == j {
                b * (c[i] * c[i] + sig[i] * sig[i] / 3.0)
            } else {
                b * c[i] * c[j]
            };
        }
    }
    Ok(mean)
}

/// [`box_mean`] together with its partial derivatives in every center and
/// half-length.
pub fn box_mean_grad(s: &QuadraticSurrogate, domain: &BoxDomain) -> Result<MeanAndGrad> {
    let mean = box_mean(s, domain)?;
    let (c, sig) = (&domain.centers, &domain.half_lengths);
    let d = s.dim();
    let mut d_center = s.linear.clone();
    let mut d_half = vec![0.0; d];
    let mut k = 0;
    for i in 0..d {
        for j in i..d {
            let b = s.quad[k];
            k += 1;
            if i == j {
                d_center[i] += 2.0 * b * c[i];
                d_half[i] = 2.0 / 3.0 * b * sig[i];
            } else {
                d_center[i] += b * c[j];
                d_center[j] += b * c[i];
            }
        }
    }
    Ok(MeanAndGrad {
        mean,
        d_center,
        d_half,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn only_quad(d: usize, i: usize, j: usize, v: f64) -> QuadraticSurrogate {
        let mut s = QuadraticSurrogate::zero(d);
        s.set_quad_coef(i, j, v);
        s
    }

    fn fd_grad(s: &QuadraticSurrogate, b: &BoxDomain) -> (Vec<f64>, Vec<f64>) {
        let h = 1e-5;
        let d = b.dim();
        let mut gc = vec![0.0; d];
        let mut gs = vec![0.0; d];
        for i in 0..d {
            let (mut p, mut m) = (b.clone(), b.clone());
            p.centers[i] += h;
            m.centers[i] -= h;
            gc[i] = (box_mean(s, &p).unwrap() - box_mean(s, &m).unwrap()) / (2.0 * h);
            let (mut p, mut m) = (b.clone(), b.clone());
            p.half_lengths[i] += h;
            m.half_lengths[i] -= h;
            gs[i] = (box_mean(s, &p).unwrap() - box_mean(s, &m).unwrap()) / (2.0 * h);
        }
        (gc, gs)
    }

    #[test]
    fn constant_mean() {
        let mut s = QuadraticSurrogate::zero(3);
        s.constant = 2.0;
        let b = BoxDomain::new(vec![1.0, -4.0, 0.2], vec![0.1, 3.0, 7.0]).unwrap();
        assert_eq!(box_mean(&s, &b).unwrap(), 2.0);
        let g = box_mean_grad(&s, &b).unwrap();
        assert!(g.d_center.iter().chain(&g.d_half).all(|v| *v == 0.0));
    }

    #[test]
    fn square_over_unit_interval() {
        let s = only_quad(1, 0, 0, 1.0);
        let b = BoxDomain::new(vec![0.0], vec![1.0]).unwrap();
        assert!((box_mean(&s, &b).unwrap() - 1.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn square_over_shifted_interval() {
        let s = only_quad(1, 0, 0, 1.0);
        let b = BoxDomain::new(vec![2.0], vec![3.0]).unwrap();
        assert!((box_mean(&s, &b).unwrap() - 7.0).abs() < 1e-12);
    }

    #[test]
    fn half_gradient_of_negative_square() {
        let s = only_quad(1, 0, 0, -1.0);
        let b = BoxDomain::new(vec![0.4], vec![3.0]).unwrap();
        let g = box_mean_grad(&s, &b).unwrap();
        let (_, fd) = fd_grad(&s, &b);
        assert!((fd[0] - -2.0).abs() < 1e-6);
        assert!((g.d_half[0] - -2.0).abs() < 1e-12);
    }

    #[test]
    fn cross_term_center_gradient() {
        let s = only_quad(2, 0, 1, 2.0);
        let b = BoxDomain::new(vec![0.0, 0.5], vec![1.0, 1.0]).unwrap();
        let g = box_mean_grad(&s, &b).unwrap();
        let (fd, _) = fd_grad(&s, &b);
        assert!((fd[0] - 1.0).abs() < 1e-6);
        assert!((g.d_center[0] - 1.0).abs() < 1e-12);
        assert!((g.d_center[1]).abs() < 1e-12);
    }

    #[test]
    fn rejects_non_positive_half_length() {
        let s = QuadraticSurrogate::zero(1);
        let b = BoxDomain {
            centers: vec![0.0],
            half_lengths: vec![0.0],
        };
        assert!(matches!(box_mean(&s, &b), Err(Error::Domain(_))));
        let b = BoxDomain::new(vec![0.0, 1.0], vec![1.0, 1.0]).unwrap();
        assert!(box_mean(&s, &b).is_err());
    }

    fn random_case(d: usize, rng: &mut ChaCha8Rng) -> (QuadraticSurrogate, BoxDomain) {
        let w: Vec<f64> = (0..crate::surrogate::coefficient_count(d))
            .map(|_| rng.gen_range(-2.0..2.0))
            .collect();
        let s = QuadraticSurrogate::from_coefficients(d, &w).unwrap();
        let b = BoxDomain::new(
            (0..d).map(|_| rng.gen_range(-2.0..2.0)).collect(),
            (0..d).map(|_| rng.gen_range(0.1..2.0)).collect(),
        )
        .unwrap();
        (s, b)
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn gradient_matches_finite_differences(seed in any::<u64>(), d in 1usize..6) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let (s, b) = random_case(d, &mut rng);
            let g = box_mean_grad(&s, &b).unwrap();
            let (fc, fs) = fd_grad(&s, &b);
            for (a, e) in g.d_center.iter().chain(&g.d_half).zip(fc.iter().chain(&fs)) {
                prop_assert!((a - e).abs() <= 1e-5 * e.abs().max(1.0), "{} vs {}", a, e);
            }
            prop_assert_eq!(g.mean, box_mean(&s, &b).unwrap());
        }

        #[test]
        fn no_diagonal_means_no_half_dependence(seed in any::<u64>(), d in 1usize..6) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let (mut s, b) = random_case(d, &mut rng);
            for i in 0..d {
                s.set_quad_coef(i, i, 0.0);
            }
            let g = box_mean_grad(&s, &b).unwrap();
            prop_assert!(g.d_half.iter().all(|v| *v == 0.0));
            let mut wider = b.clone();
            for h in &mut wider.half_lengths {
                *h *= 3.0;
            }
            prop_assert!((box_mean(&s, &b).unwrap() - box_mean(&s, &wider).unwrap()).abs() < 1e-12);
        }

        #[test]
        fn translation_covariance(seed in any::<u64>(), d in 1usize..5) {
            // p(x) = q(x - t) with q random: mean of p over box(c + t) equals mean of q over box(c).
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let (q, b) = random_case(d, &mut rng);
            let t: Vec<f64> = (0..d).map(|_| rng.gen_range(-3.0..3.0)).collect();
            // Expand q(x - t) into monomials of x.
            let mut p = q.clone();
            p.constant = q.predict(&t.iter().map(|v| -v).collect::<Vec<_>>());
            for i in 0..d {
                let mut lin = q.linear[i];
                for j in 0..d {
                    let bij = q.quad_coef(i, j);
                    lin -= if i == j { 2.0 * bij * t[i] } else { bij * t[j] };
                }
                p.linear[i] = lin;
            }
            let shifted = BoxDomain::new(
                b.centers.iter().zip(&t).map(|(c, t)| c + t).collect(),
                b.half_lengths.clone(),
            ).unwrap();
            let lhs = box_mean(&p, &shifted).unwrap();
            let rhs = box_mean(&q, &b).unwrap();
            prop_assert!((lhs - rhs).abs() < 1e-9 * (1.0 + rhs.abs()), "{} vs {}", lhs, rhs);
        }
    }
}
