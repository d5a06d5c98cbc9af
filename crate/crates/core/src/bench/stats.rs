use serde::{Deserialize, Serialize};

use super::BenchError;

pub fn mean(xs: &[f64]) -> Option<f64> {
    (!xs.is_empty()).then(|| xs.iter().sum::<f64>() / xs.len() as f64)
}

/// Standard deviation with the `n - 1` denominator; `None` below two samples.
pub fn sample_sd(xs: &[f64]) -> Option<f64> {
    if xs.len() < 2 {
        return None;
    }
    let m = mean(xs)?;
    let ss: f64 = xs.iter().map(|x| (x - m) * (x - m)).sum();
    Some((ss / (xs.len() - 1) as f64).sqrt())
}

const LANCZOS_G: f64 = 7.0;
const LANCZOS: [f64; 9] = [
    0.999_999_999_999_809_9,
    676.520_368_121_885_1,
    -1_259.139_216_722_402_8,
    771.323_428_777_653_1,
    -176.615_029_162_140_6,
    12.507_343_278_686_905,
    -0.138_571_095_265_720_12,
    9.984_369_578_019_572e-6,
    1.505_632_735_149_311_6e-7,
];

/// `ln Γ(x)` for `x > 0` (Lanczos, g = 7, nine terms).
pub fn ln_gamma(x: f64) -> f64 {
    if x < 0.5 {
        // Reflection: Γ(x) Γ(1 - x) = π / sin(πx).
        let pi = std::f64::consts::PI;
        return (pi / (pi * x).sin()).ln() - ln_gamma(1.0 - x);
    }
    let x = x - 1.0;
    let mut acc = LANCZOS[0];
    for (i, c) in LANCZOS.iter().enumerate().skip(1) {
        acc += c / (x + i as f64);
    }
    let t = x + LANCZOS_G + 0.5;
    0.5 * (2.0 * std::f64::consts::PI).ln() + (x + 0.5) * t.ln() - t + acc.ln()
}

const CF_EPS: f64 = 1e-16;
const CF_TINY: f64 = 1e-300;
const CF_MAX_ITER: usize = 10_000;

/// Continued fraction for the incomplete beta function (modified Lentz).
fn beta_continued_fraction(a: f64, b: f64, x: f64) -> f64 {
    let qab = a + b;
    let qap = a + 1.0;
    let qam = a - 1.0;
    let mut c = 1.0;
    let mut d = 1.0 - qab * x / qap;
    if d.abs() < CF_TINY {
        d = CF_TINY;
    }
    d = 1.0 / d;
    let mut h = d;
    for m in 1..=CF_MAX_ITER {
        let m = m as f64;
        let m2 = 2.0 * m;
        let aa = m * (b - m) * x / ((qam + m2) * (a + m2));
        d = 1.0 + aa * d;
        if d.abs() < CF_TINY {
            d = CF_TINY;
        }
        c = 1.0 + aa / c;
        if c.abs() < CF_TINY {
            c = CF_TINY;
        }
        d = 1.0 / d;
        h *= d * c;
        let aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
        d = 1.0 + aa * d;
        if d.abs() < CF_TINY {
            d = CF_TINY;
        }
        c = 1.0 + aa / c;
        if c.abs() < CF_TINY {
            c = CF_TINY;
        }
        d = 1.0 / d;
        let step = d * c;
        h *= step;
        if (step - 1.0).abs() < CF_EPS {
            break;
        }
    }
    h
}

/// Regularized incomplete beta `I_x(a, b)` for `a, b > 0`, `x ∈ [0, 1]`.
pub fn regularized_incomplete_beta(a: f64, b: f64, x: f64) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    if x >= 1.0 {
        return 1.0;
    }
    let ln_front = ln_gamma(a + b) - ln_gamma(a) - ln_gamma(b) + a * x.ln() + b * (1.0 - x).ln();
    let front = ln_front.exp();
    // The fraction converges fast only below the mean; use symmetry above it.
    if x < (a + 1.0) / (a + b + 2.0) {
        front * beta_continued_fraction(a, b, x) / a
    } else {
        1.0 - front * beta_continued_fraction(b, a, 1.0 - x) / b
    }
}

/// `P(F > f)` for an F distribution with `(d1, d2)` degrees of freedom.
pub fn f_survival(f: f64, d1: f64, d2: f64) -> f64 {
    if f <= 0.0 {
        return 1.0;
    }
    if f.is_infinite() {
        return 0.0;
    }
    regularized_incomplete_beta(d2 / 2.0, d1 / 2.0, d2 / (d2 + d1 * f)).clamp(0.0, 1.0)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnovaResult {
    /// `+∞` when every group is constant but the groups differ.
    #[serde(with = "maybe_infinite")]
    pub f_statistic: f64,
    pub p_value: f64,
    pub df_between: usize,
    pub df_within: usize,
    pub group_means: Vec<f64>,
}

/// Writes `+∞` as the string `"inf"` since JSON has no infinity.
mod maybe_infinite {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        if v.is_infinite() {
            s.serialize_str("inf")
        } else {
            s.serialize_f64(*v)
        }
    }

    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Repr {
        Num(f64),
        Str(String),
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        match Repr::deserialize(d)? {
            Repr::Num(v) => Ok(v),
            Repr::Str(s) if s == "inf" => Ok(f64::INFINITY),
            Repr::Str(s) => Err(serde::de::Error::custom(format!(
                "expected number or \"inf\", got {s:?}"
            ))),
        }
    }
}

/// Classic one-way ANOVA: `F = (SS_between / (g - 1)) / (SS_within / (N - g))`
/// with the p-value from the F survival function.
pub fn one_way_anova(groups: &[Vec<f64>]) -> Result<AnovaResult, BenchError> {
    if groups.len() < 2 {
        return Err(BenchError::AnovaInput(format!(
            "at least 2 groups, got {}",
            groups.len()
        )));
    }
    if let Some(i) = groups.iter().position(|g| g.len() < 2) {
        return Err(BenchError::AnovaInput(format!(
            "at least 2 samples per group; group {i} has {}",
            groups[i].len()
        )));
    }
    if groups.iter().flatten().any(|x| !x.is_finite()) {
        return Err(BenchError::AnovaInput("finite observations".into()));
    }
    let n: usize = groups.iter().map(Vec::len).sum();
    let grand = groups.iter().flatten().sum::<f64>() / n as f64;
    let group_means: Vec<f64> = groups.iter().map(|g| g.iter().sum::<f64>() / g.len() as f64).collect();
    let ss_between: f64 = groups
        .iter()
        .zip(&group_means)
        .map(|(g, m)| g.len() as f64 * (m - grand) * (m - grand))
        .sum();
    let ss_within: f64 = groups
        .iter()
        .zip(&group_means)
        .map(|(g, m)| g.iter().map(|x| (x - m) * (x - m)).sum::<f64>())
        .sum();
    if ss_between == 0.0 && ss_within == 0.0 {
        return Err(BenchError::DegenerateAnova);
    }
    let df_between = groups.len() - 1;
    let df_within = n - groups.len();
    let f_statistic = if ss_within == 0.0 {
        f64::INFINITY
    } else {
        (ss_between / df_between as f64) / (ss_within / df_within as f64)
    };
    let p_value = f_survival(f_statistic, df_between as f64, df_within as f64);
    Ok(AnovaResult {
        f_statistic,
        p_value,
        df_between,
        df_within,
        group_means,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use statrs::distribution::{ContinuousCDF, FisherSnedecor};

    #[test]
    fn textbook_anova() {
        let r = one_way_anova(&[vec![3.0, 4.0, 5.0], vec![7.0, 8.0, 9.0], vec![11.0, 12.0, 13.0]]).unwrap();
        assert!((r.f_statistic - 48.0).abs() < 1e-9);
        assert_eq!((r.df_between, r.df_within), (2, 6));
        // With d1 = 2 the survival function has the closed form (1 + d1 F / d2)^(-d2/2) = 17^-3.
        assert!((r.p_value - 1.0 / 4913.0).abs() < 1e-12);
        assert_eq!(r.group_means, vec![4.0, 8.0, 12.0]);
    }

    #[test]
    fn equal_means_give_zero_f() {
        let r = one_way_anova(&[vec![1.0, 2.0, 3.0], vec![2.0, 1.0, 3.0]]).unwrap();
        assert!(r.f_statistic.abs() < 1e-12);
        assert!((r.p_value - 1.0).abs() < 1e-9);
    }

    #[test]
    fn degenerate_and_bad_inputs() {
        assert!(matches!(
            one_way_anova(&[vec![2.0, 2.0], vec![2.0, 2.0]]),
            Err(BenchError::DegenerateAnova)
        ));
        assert!(matches!(
            one_way_anova(&[vec![1.0, 2.0]]),
            Err(BenchError::AnovaInput(_))
        ));
        assert!(matches!(
            one_way_anova(&[vec![1.0, 2.0], vec![3.0]]),
            Err(BenchError::AnovaInput(_))
        ));
    }

    #[test]
    fn constant_distinct_groups_are_infinitely_significant() {
        let r = one_way_anova(&[vec![1.0, 1.0], vec![2.0, 2.0]]).unwrap();
        assert!(r.f_statistic.is_infinite());
        assert_eq!(r.p_value, 0.0);
        let json = serde_json::to_string(&r).unwrap();
        assert!(json.contains("\"inf\""));
        let back: AnovaResult = serde_json::from_str(&json).unwrap();
        assert_eq!(back, r);
    }

    #[test]
    fn ln_gamma_known_values() {
        assert!(ln_gamma(1.0).abs() < 1e-14);
        assert!(ln_gamma(2.0).abs() < 1e-14);
        assert!((ln_gamma(0.5) - std::f64::consts::PI.sqrt().ln()).abs() < 1e-14);
        assert!((ln_gamma(10.0) - 362_880f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn incomplete_beta_closed_forms() {
        // I_x(1, 1) = x; I_x(a, 1) = x^a; I_x(1, b) = 1 - (1 - x)^b.
        for &x in &[0.01, 0.3, 0.5, 0.77, 0.99] {
            assert!((regularized_incomplete_beta(1.0, 1.0, x) - x).abs() < 1e-14);
            assert!((regularized_incomplete_beta(3.5, 1.0, x) - x.powf(3.5)).abs() < 1e-13);
            assert!((regularized_incomplete_beta(1.0, 4.0, x) - (1.0 - (1.0 - x).powi(4))).abs() < 1e-13);
        }
    }

    proptest! {
        #[test]
        fn f_survival_matches_statrs(f in 0.01f64..50.0, d1 in 1u32..40, d2 in 1u32..400) {
            let dist = FisherSnedecor::new(f64::from(d1), f64::from(d2)).unwrap();
            let expected = 1.0 - dist.cdf(f);
            let got = f_survival(f, f64::from(d1), f64::from(d2));
            prop_assert!((got - expected).abs() < 1e-10, "got {got} expected {expected}");
        }

        #[test]
        fn shift_and_scale_leave_f_unchanged(
            groups in prop::collection::vec(prop::collection::vec(0.0f64..100.0, 2..20), 2..6),
            shift in -1000.0f64..1000.0,
            lambda in 0.01f64..100.0,
        ) {
            let Ok(base) = one_way_anova(&groups) else { return Ok(()); };
            let shifted: Vec<Vec<f64>> = groups.iter().map(|g| g.iter().map(|x| x + shift).collect()).collect();
            let scaled: Vec<Vec<f64>> = groups.iter().map(|g| g.iter().map(|x| x * lambda).collect()).collect();
            prop_assert!((one_way_anova(&shifted).unwrap().f_statistic - base.f_statistic).abs() <= 1e-9);
            prop_assert!((one_way_anova(&scaled).unwrap().f_statistic - base.f_statistic).abs() <= 1e-9);
        }
    }

    #[test]
    fn sd_uses_n_minus_one() {
        assert_eq!(
            sample_sd(&[2.0, 4.0, 4.0, 4.0, 5.0, 5.0, 7.0, 9.0]).unwrap(),
            (32.0f64 / 7.0).sqrt()
        );
        assert_eq!(sample_sd(&[1.0]), None);
        assert_eq!(mean(&[]), None);
    }
}
