//! Per-iteration objective: the (mode-transformed) surrogate box mean plus the
//! half-length gain, minus the center and one-hot penalties, with its exact
//! gradient.
//!
//! Only free dimensions enter the gain and penalty sums, and only free
//! dimensions receive gradient.

use serde::{Deserialize, Serialize};

use crate::box_integral::box_mean_grad;
use crate::domain::{free_mask, BoxDomain, DimKind, FeatureSchema, ObjectiveMode, PenaltyWeights};
use crate::error::{Error, Result};
use crate::surrogate::QuadraticSurrogate;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObjectiveReport {
    pub value: f64,
    pub surrogate_mean: f64,
    pub gain_half: f64,
    pub pen_center: f64,
    pub pen_binary: f64,
    pub pen_cat_width: f64,
    pub pen_group_sum: f64,
    pub grad_center: Vec<f64>,
    pub grad_half: Vec<f64>,
}

impl ObjectiveReport {
    pub fn penalty_total(&self) -> f64 {
        self.pen_center + self.pen_binary + self.pen_cat_width + self.pen_group_sum
    }
}

/// Mode transform of a box mean and its derivative.
pub fn mode_transform(mode: ObjectiveMode, mean: f64) -> (f64, f64) {
    match mode {
        ObjectiveMode::Maximize => (mean, 1.0),
        ObjectiveMode::Minimize => (-mean, -1.0),
        ObjectiveMode::TargetMean(target) => {
            let gap = mean - target;
            (-gap * gap, -2.0 * gap)
        }
    }
}

pub fn evaluate(
    s: &QuadraticSurrogate,
    domain: &BoxDomain,
    schema: &FeatureSchema,
    w: &PenaltyWeights,
    mode: ObjectiveMode,
) -> Result<ObjectiveReport> {
    let d = domain.dim();
    if schema.dim() != d {
        return Err(Error::Schema(format!("schema has {} dims, box has {d}", schema.dim())));
    }
    let base = box_mean_grad(s, domain)?;
    let (transformed, slope) = mode_transform(mode, base.mean);
    let free = free_mask(schema);
    let (c, sig) = (&domain.centers, &domain.half_lengths);

    let mut grad_center: Vec<f64> = base.d_center.iter().map(|g| slope * g).collect();
    let mut grad_half: Vec<f64> = base.d_half.iter().map(|g| slope * g).collect();
    let (mut gain_half, mut pen_center, mut pen_binary, mut pen_cat_width) = (0.0, 0.0, 0.0, 0.0);

    for i in 0..d {
        if !free[i] {
            grad_center[i] = 0.0;
            grad_half[i] = 0.0;
            continue;
        }
        match schema.dims[i].kind {
            DimKind::Numeric => {
                gain_half += w.lambda * sig[i] * sig[i];
                grad_half[i] += 2.0 * w.lambda * sig[i];
                pen_center += w.beta * c[i] * c[i];
                grad_center[i] -= 2.0 * w.beta * c[i];
            }
            DimKind::OneHot(_) => {
                let off = c[i] * (1.0 - c[i]);
                pen_binary += w.mu * off * off;
                grad_center[i] -= 2.0 * w.mu * off * (1.0 - 2.0 * c[i]);
                pen_cat_width += w.omega * sig[i] * sig[i];
                grad_half[i] -= 2.0 * w.omega * sig[i];
            }
        }
    }

    let mut pen_group_sum = 0.0;
    for members in &schema.groups {
        if !members.iter().any(|&p| free[p]) {
            continue;
        }
        let excess = members.iter().map(|&p| c[p]).sum::<f64>() - 1.0;
        pen_group_sum += w.gamma * excess * excess;
        for &p in members.iter().filter(|&&p| free[p]) {
            grad_center[p] -= 2.0 * w.gamma * excess;
        }
    }

    let value = transformed + gain_half - pen_center - pen_binary - pen_cat_width - pen_group_sum;
    Ok(ObjectiveReport {
        value,
        surrogate_mean: base.mean,
        gain_half,
        pen_center,
        pen_binary,
        pen_cat_width,
        pen_group_sum,
        grad_center,
        grad_half,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::box_integral::box_mean;
    use crate::domain::{Constraint, DimSpec};
    use crate::surrogate::coefficient_count;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn mixed_schema() -> FeatureSchema {
        let dims = vec![
            DimSpec::numeric("a"),
            DimSpec::numeric("b"),
            DimSpec::one_hot("g=x", 0),
            DimSpec::one_hot("g=y", 0),
            DimSpec::one_hot("g=z", 0),
        ];
        FeatureSchema::from_dims(dims, vec!["g".into()]).unwrap()
    }

    fn fd_check(s: &QuadraticSurrogate, b: &BoxDomain, schema: &FeatureSchema, w: &PenaltyWeights, mode: ObjectiveMode) -> std::result::Result<(), String> {
        let r = evaluate(s, b, schema, w, mode).unwrap();
        let h = 1e-6;
        let val = |bb: &BoxDomain| evaluate(s, bb, schema, w, mode).unwrap().value;
        for i in 0..b.dim() {
            for which in 0..2 {
                let (mut p, mut m) = (b.clone(), b.clone());
                let (analytic, slot_p, slot_m) = if which == 0 {
                    (r.grad_center[i], &mut p.centers[i], &mut m.centers[i])
                } else {
                    (r.grad_half[i], &mut p.half_lengths[i], &mut m.half_lengths[i])
                };
                *slot_p += h;
                *slot_m -= h;
                let free = schema.dims[i].constraint.is_free();
                let fd = if free { (val(&p) - val(&m)) / (2.0 * h) } else { 0.0 };
                let err = (analytic - fd).abs() / fd.abs().max(1.0);
                if err >= 1e-5 {
                    return Err(format!("dim {i} part {which}: analytic {analytic} fd {fd}"));
                }
            }
        }
        Ok(())
    }

    #[test]
    fn zero_weights_reduce_to_box_mean() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let w: Vec<f64> = (0..coefficient_count(2)).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let s = QuadraticSurrogate::from_coefficients(2, &w).unwrap();
        let b = BoxDomain::new(vec![0.3, -0.2], vec![0.5, 1.5]).unwrap();
        let r = evaluate(&s, &b, &FeatureSchema::numeric(2), &PenaltyWeights::default(), ObjectiveMode::Maximize).unwrap();
        let g = box_mean_grad(&s, &b).unwrap();
        assert_eq!(r.value, g.mean);
        assert_eq!(r.grad_center, g.d_center);
        assert_eq!(r.grad_half, g.d_half);
    }

    #[test]
    fn half_length_gain() {
        let s = QuadraticSurrogate::zero(2);
        let b = BoxDomain::new(vec![0.0, 0.0], vec![2.0, 1.0]).unwrap();
        let w = PenaltyWeights { lambda: 0.1, ..Default::default() };
        let r = evaluate(&s, &b, &FeatureSchema::numeric(2), &w, ObjectiveMode::Maximize).unwrap();
        assert!((r.value - 0.5).abs() < 1e-12);
        assert!((r.gain_half - 0.5).abs() < 1e-12);
    }

    #[test]
    fn valid_one_hot_has_no_penalty() {
        let schema = mixed_schema();
        let b = BoxDomain::new(vec![0.0, 0.0, 1.0, 0.0, 0.0], vec![1.0; 5]).unwrap();
        let w = PenaltyWeights { mu: 30.0, gamma: 10.0, ..Default::default() };
        let r = evaluate(&QuadraticSurrogate::zero(5), &b, &schema, &w, ObjectiveMode::Maximize).unwrap();
        assert_eq!(r.pen_binary, 0.0);
        assert_eq!(r.pen_group_sum, 0.0);
    }

    #[test]
    fn center_penalty_value_and_gradient() {
        let b = BoxDomain::new(vec![2.0], vec![1.0]).unwrap();
        let w = PenaltyWeights { beta: 0.03, ..Default::default() };
        let schema = FeatureSchema::numeric(1);
        let s = QuadraticSurrogate::zero(1);
        let r = evaluate(&s, &b, &schema, &w, ObjectiveMode::Maximize).unwrap();
        assert!((r.pen_center - 0.12).abs() < 1e-12);
        assert!((r.grad_center[0] - -0.12).abs() < 1e-12);
        fd_check(&s, &b, &schema, &w, ObjectiveMode::Maximize).unwrap();
    }

    #[test]
    fn constrained_dims_excluded() {
        let mut schema = mixed_schema();
        schema.dims[0].constraint = Constraint::FixedInterval { center: 2.0, half_length: 1.0 };
        for p in 2..5 {
            schema.dims[p].constraint = Constraint::FixedValue(if p == 3 { 1.0 } else { 0.0 });
        }
        let b = BoxDomain::new(vec![2.0, 0.5, 0.0, 1.0, 0.0], vec![1.0, 0.3, 1e-3, 1e-3, 1e-3]).unwrap();
        let w = PenaltyWeights { lambda: 0.1, beta: 0.5, mu: 3.0, omega: 1.0, gamma: 2.0 };
        let mut s = QuadraticSurrogate::zero(5);
        s.linear = vec![1.0; 5];
        let r = evaluate(&s, &b, &schema, &w, ObjectiveMode::Maximize).unwrap();
        assert!((r.gain_half - 0.1 * 0.09).abs() < 1e-15);
        assert!((r.pen_center - 0.5 * 0.25).abs() < 1e-15);
        assert_eq!(r.pen_cat_width, 0.0);
        assert_eq!(r.pen_group_sum, 0.0);
        for i in [0, 2, 3, 4] {
            assert_eq!(r.grad_center[i], 0.0);
            assert_eq!(r.grad_half[i], 0.0);
        }
        // Fixed dims still feed the surrogate mean.
        assert!((r.surrogate_mean - 3.5).abs() < 1e-12);
    }

    #[test]
    fn target_mean_peaks_at_target() {
        let mut s = QuadraticSurrogate::zero(1);
        s.constant = 0.7;
        let b = BoxDomain::new(vec![0.0], vec![1.0]).unwrap();
        let w = PenaltyWeights { lambda: 0.2, ..Default::default() };
        let schema = FeatureSchema::numeric(1);
        let hit = evaluate(&s, &b, &schema, &w, ObjectiveMode::TargetMean(0.7)).unwrap();
        assert!((hit.value - (hit.gain_half - hit.penalty_total())).abs() < 1e-15);
        let miss = evaluate(&s, &b, &schema, &w, ObjectiveMode::TargetMean(0.5)).unwrap();
        assert!(miss.value < hit.value);
    }

    fn random_config(seed: u64) -> (QuadraticSurrogate, BoxDomain, FeatureSchema, PenaltyWeights) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut schema = mixed_schema();
        for d in &mut schema.dims {
            d.constraint = match rng.gen_range(0..5) {
                0 => Constraint::FixedValue(rng.gen_range(-1.0..1.0)),
                1 => Constraint::FixedInterval { center: rng.gen_range(-1.0..1.0), half_length: rng.gen_range(0.1..1.0) },
                _ => Constraint::Free,
            };
        }
        let w: Vec<f64> = (0..coefficient_count(5)).map(|_| rng.gen_range(-2.0..2.0)).collect();
        let s = QuadraticSurrogate::from_coefficients(5, &w).unwrap();
        let b = BoxDomain::new(
            (0..5).map(|_| rng.gen_range(-1.5..1.5)).collect(),
            (0..5).map(|_| rng.gen_range(0.1..2.0)).collect(),
        ).unwrap();
        let w = PenaltyWeights {
            lambda: rng.gen_range(0.0..1.0),
            beta: rng.gen_range(0.0..1.0),
            mu: rng.gen_range(0.0..30.0),
            omega: rng.gen_range(0.0..2.0),
            gamma: rng.gen_range(0.0..10.0),
        };
        (s, b, schema, w)
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn gradient_matches_finite_differences(seed in any::<u64>(), target in -2.0..2.0f64) {
            let (s, b, schema, w) = random_config(seed);
            for mode in [ObjectiveMode::Maximize, ObjectiveMode::Minimize, ObjectiveMode::TargetMean(target)] {
                if let Err(e) = fd_check(&s, &b, &schema, &w, mode) {
                    prop_assert!(false, "{:?}: {}", mode, e);
                }
            }
        }

        #[test]
        fn report_is_consistent(seed in any::<u64>()) {
            let (s, b, schema, w) = random_config(seed);
            let r = evaluate(&s, &b, &schema, &w, ObjectiveMode::Maximize).unwrap();
            prop_assert!(r.gain_half >= 0.0 && r.pen_binary >= 0.0 && r.pen_cat_width >= 0.0 && r.pen_group_sum >= 0.0);
            let expect = r.surrogate_mean + r.gain_half - r.penalty_total();
            prop_assert!((r.value - expect).abs() <= 1e-12 * (1.0 + expect.abs()));
            prop_assert_eq!(r.surrogate_mean, box_mean(&s, &b).unwrap());
        }

        #[test]
        fn minimize_is_maximize_of_negation(seed in any::<u64>()) {
            let (s, b, schema, w) = random_config(seed);
            let lhs = evaluate(&s, &b, &schema, &w, ObjectiveMode::Minimize).unwrap();
            let rhs = evaluate(&s.negated(), &b, &schema, &w, ObjectiveMode::Maximize).unwrap();
            prop_assert!((lhs.value - rhs.value).abs() < 1e-12 * (1.0 + lhs.value.abs()));
            for (a, b) in lhs.grad_center.iter().zip(&rhs.grad_center) {
                prop_assert!((a - b).abs() < 1e-12 * (1.0 + a.abs()));
            }
        }

        #[test]
        fn group_order_does_not_matter(seed in any::<u64>()) {
            let (s, b, schema, w) = random_config(seed);
            // Swap dims 2 and 4 (both in the group) consistently in box, schema and surrogate.
            let swap = |i: usize| match i { 2 => 4, 4 => 2, x => x };
            let mut s2 = QuadraticSurrogate::zero(5);
            s2.constant = s.constant;
            for i in 0..5 {
                s2.linear[i] = s.linear[swap(i)];
                for j in i..5 {
                    s2.set_quad_coef(i, j, s.quad_coef(swap(i), swap(j)));
                }
            }
            let b2 = BoxDomain::new(
                (0..5).map(|i| b.centers[swap(i)]).collect(),
                (0..5).map(|i| b.half_lengths[swap(i)]).collect(),
            ).unwrap();
            let mut schema2 = schema.clone();
            for i in 0..5 {
                schema2.dims[i].constraint = schema.dims[swap(i)].constraint;
            }
            let r1 = evaluate(&s, &b, &schema, &w, ObjectiveMode::Maximize).unwrap();
            let r2 = evaluate(&s2, &b2, &schema2, &w, ObjectiveMode::Maximize).unwrap();
            prop_assert!((r1.value - r2.value).abs() < 1e-12 * (1.0 + r1.value.abs()));
        }
    }
}
