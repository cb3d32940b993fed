use serde::{Deserialize, Serialize};

use super::special::{chi2_sf, student_t_two_sided};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TestMethod {
    ChiSquared,
    WelchT,
    PooledT,
}

impl TestMethod {
    pub fn as_str(self) -> &'static str {
        match self {
            TestMethod::ChiSquared => "chi_squared",
            TestMethod::WelchT => "welch_t",
            TestMethod::PooledT => "pooled_t",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestResult {
    pub feature: String,
    pub statistic: f64,
    pub p_value: f64,
    pub dof: f64,
    pub method: TestMethod,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TTestVariant {
    #[default]
    Welch,
    Pooled,
}

/// Pearson chi-squared independence test on an `r × 2` contingency table
/// (rows = categories, columns = label 0 / label 1), without continuity
/// correction. Rows with a zero total do not count towards the degrees of
/// freedom.
pub fn chi_squared_contingency(table: &[[f64; 2]]) -> Result<TestResult> {
    let rows: Vec<[f64; 2]> = table.iter().copied().filter(|r| r[0] + r[1] > 0.0).collect();
    if rows.len() < 2 {
        return Err(Error::Degenerate(
            "chi-squared test needs at least two observed categories".into(),
        ));
    }
    let col = [
        rows.iter().map(|r| r[0]).sum::<f64>(),
        rows.iter().map(|r| r[1]).sum::<f64>(),
    ];
    let total = col[0] + col[1];
    let mut stat = 0.0;
    for r in &rows {
        let row_total = r[0] + r[1];
        for j in 0..2 {
            let e = row_total * col[j] / total;
            if e > 0.0 {
                stat += (r[j] - e).powi(2) / e;
            }
        }
    }
    let dof = (rows.len() - 1) as f64;
    Ok(TestResult {
        feature: String::new(),
        statistic: stat,
        p_value: chi2_sf(stat, dof),
        dof,
        method: TestMethod::ChiSquared,
    })
}

/// Chi-squared test between a categorical feature (class index per row)
/// and binary labels.
pub fn chi_squared_test(categories: &[usize], labels: &[u8]) -> Result<TestResult> {
    if categories.len() != labels.len() {
        return Err(Error::Parameter("categories and labels differ in length".into()));
    }
    let k = categories.iter().copied().max().map_or(0, |m| m + 1);
    let mut table = vec![[0.0f64; 2]; k];
    for (&c, &y) in categories.iter().zip(labels) {
        if y > 1 {
            return Err(Error::Domain(format!("label {y} is not binary")));
        }
        table[c][y as usize] += 1.0;
    }
    chi_squared_contingency(&table)
}

fn mean_var(x: &[f64]) -> (f64, f64) {
    let n = x.len() as f64;
    let m = x.iter().sum::<f64>() / n;
    let v = x.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (n - 1.0);
    (m, v)
}

/// Two-sample t-test of `mean(a) - mean(b)` with a two-sided p-value.
pub fn t_test(a: &[f64], b: &[f64], variant: TTestVariant) -> Result<TestResult> {
    if a.len() < 2 || b.len() < 2 {
        return Err(Error::Degenerate(format!(
            "t-test needs at least two values per group (got {} and {})",
            a.len(),
            b.len()
        )));
    }
    let (ma, va) = mean_var(a);
    let (mb, vb) = mean_var(b);
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (se, dof) = match variant {
        TTestVariant::Welch => {
            let (qa, qb) = (va / na, vb / nb);
            let se2 = qa + qb;
            let dof = if se2 > 0.0 {
                se2 * se2 / (qa * qa / (na - 1.0) + qb * qb / (nb - 1.0))
            } else {
                na + nb - 2.0
            };
            (se2.sqrt(), dof)
        }
        TTestVariant::Pooled => {
            let dof = na + nb - 2.0;
            let sp2 = ((na - 1.0) * va + (nb - 1.0) * vb) / dof;
            ((sp2 * (1.0 / na + 1.0 / nb)).sqrt(), dof)
        }
    };
    let method = match variant {
        TTestVariant::Welch => TestMethod::WelchT,
        TTestVariant::Pooled => TestMethod::PooledT,
    };
    let diff = ma - mb;
    let (t, p) = if se > 0.0 {
        let t = diff / se;
        (t, student_t_two_sided(t, dof))
    } else if diff == 0.0 {
        (0.0, 1.0)
    } else {
        return Err(Error::Degenerate(
            "t-test groups have zero variance and different means".into(),
        ));
    };
    Ok(TestResult {
        feature: String::new(),
        statistic: t,
        p_value: p,
        dof,
        method,
    })
}

/// t-test of the feature's mean in event hours (label 1) against
/// non-event hours (label 0).
pub fn t_test_two_sample(values: &[f64], labels: &[u8], variant: TTestVariant) -> Result<TestResult> {
    if values.len() != labels.len() {
        return Err(Error::Parameter("values and labels differ in length".into()));
    }
    let mut pos = Vec::new();
    let mut neg = Vec::new();
    for (&v, &y) in values.iter().zip(labels) {
        match y {
            0 => neg.push(v),
            1 => pos.push(v),
            other => return Err(Error::Domain(format!("label {other} is not binary"))),
        }
    }
    t_test(&pos, &neg, variant)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn chi_squared_reference_table() {
        let r = chi_squared_contingency(&[[10.0, 20.0], [20.0, 10.0]]).unwrap();
        assert!((r.statistic - 20.0 / 3.0).abs() < 1e-12);
        assert_eq!(r.dof, 1.0);
        // Q(1/2, 10/3) from a 30-digit reference evaluation.
        assert!((r.p_value - 0.009_823_274_507_519_248).abs() < 1e-9);
    }

    #[test]
    fn balanced_table_is_independent() {
        let r = chi_squared_contingency(&[[15.0, 15.0], [15.0, 15.0]]).unwrap();
        assert_eq!(r.statistic, 0.0);
        assert_eq!(r.p_value, 1.0);
    }

    #[test]
    fn single_category_is_degenerate() {
        assert!(matches!(
            chi_squared_test(&[0, 0, 0], &[0, 1, 1]),
            Err(Error::Degenerate(_))
        ));
        // An unobserved class index does not count.
        assert!(matches!(chi_squared_test(&[2, 2], &[0, 1]), Err(Error::Degenerate(_))));
    }

    #[test]
    fn chi_squared_from_rows() {
        let mut cats = Vec::new();
        let mut labels = Vec::new();
        for (c, n0, n1) in [(0usize, 10, 20), (1, 20, 10)] {
            cats.extend(std::iter::repeat_n(c, n0 + n1));
            labels.extend(std::iter::repeat_n(0u8, n0));
            labels.extend(std::iter::repeat_n(1u8, n1));
        }
        let r = chi_squared_test(&cats, &labels).unwrap();
        assert!((r.statistic - 20.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn pooled_reference() {
        let r = t_test(&[1.0, 2.0, 3.0], &[2.0, 3.0, 4.0], TTestVariant::Pooled).unwrap();
        assert!((r.statistic - -1.224_744_871_391_589).abs() < 1e-12);
        assert_eq!(r.dof, 4.0);
        // I_{4/(4+t^2)}(2, 1/2) from a 30-digit reference evaluation.
        assert!((r.p_value - 0.287_864_134_726_690_66).abs() < 1e-9);
    }

    #[test]
    fn identical_groups() {
        let r = t_test(&[1.0, 5.0, 2.0], &[1.0, 5.0, 2.0], TTestVariant::Welch).unwrap();
        assert_eq!(r.statistic, 0.0);
        assert!((r.p_value - 1.0).abs() < 1e-15);
        let r = t_test(&[3.0, 3.0], &[3.0, 3.0], TTestVariant::Welch).unwrap();
        assert_eq!(r.p_value, 1.0);
    }

    #[test]
    fn extreme_separation() {
        let r = t_test(
            &[0.0, 0.0, 0.0, 0.001],
            &[10.0, 10.0, 10.0, 10.001],
            TTestVariant::Welch,
        )
        .unwrap();
        assert!(r.p_value < 1e-6, "p = {}", r.p_value);
        // Equal variances and sizes: Welch dof equals n1 + n2 - 2.
        assert!((r.dof - 6.0).abs() < 1e-9);
    }

    #[test]
    fn t_test_errors() {
        assert!(t_test(&[1.0], &[1.0, 2.0], TTestVariant::Welch).is_err());
        assert!(t_test(&[1.0, 1.0], &[2.0, 2.0], TTestVariant::Welch).is_err());
        assert!(t_test_two_sample(&[1.0, 2.0], &[0, 0], TTestVariant::Welch).is_err());
    }

    proptest! {
        #[test]
        fn chi_squared_label_swap(rows in prop::collection::vec((0u32..50, 0u32..50), 2..8)) {
            let t: Vec<[f64; 2]> = rows.iter().map(|&(a, b)| [f64::from(a), f64::from(b)]).collect();
            let s: Vec<[f64; 2]> = t.iter().map(|r| [r[1], r[0]]).collect();
            if let (Ok(a), Ok(b)) = (chi_squared_contingency(&t), chi_squared_contingency(&s)) {
                prop_assert!((a.statistic - b.statistic).abs() <= 1e-9 * a.statistic.max(1.0));
            }
        }

        #[test]
        fn chi2_tail_monotone(x in 0.0f64..60.0, dx in 0.01f64..10.0, dof in 1u32..30) {
            prop_assert!(chi2_sf(x + dx, f64::from(dof)) <= chi2_sf(x, f64::from(dof)));
        }

        #[test]
        fn t_test_shift_and_scale_invariant(
            a in prop::collection::vec(-50.0f64..50.0, 3..15),
            b in prop::collection::vec(-50.0f64..50.0, 3..15),
            shift in -100.0f64..100.0,
            scale in 0.1f64..10.0,
        ) {
            let base = t_test(&a, &b, TTestVariant::Welch);
            let tr = |v: &[f64]| v.iter().map(|x| scale * x + shift).collect::<Vec<_>>();
            let moved = t_test(&tr(&a), &tr(&b), TTestVariant::Welch);
            if let (Ok(x), Ok(y)) = (base, moved) {
                prop_assert!((x.p_value - y.p_value).abs() < 1e-8);
            }
        }
    }
}
