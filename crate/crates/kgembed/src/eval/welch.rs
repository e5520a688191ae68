//! Welch's two-sample t-test on triple-aligned reciprocal ranks.

use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::error::{Error, Result};

/// Welch test statistic, Welch-Satterthwaite degrees of freedom, and the
/// two-sided p-value.
#[derive(Debug, Clone, Copy, serde::Serialize)]
pub struct WelchResult {
    pub t: f64,
    pub dof: f64,
    pub p: f64,
}

impl WelchResult {
    /// Improvement flag at the conventional 0.05 level.
    pub fn significant(&self) -> bool {
        self.p < 0.05
    }
}

fn mean_and_var(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var)
}

/// Welch's unpaired t statistic over two samples (typically reciprocal ranks
/// aligned by triple). Zero variance in both samples with equal means gives
/// t = 0, p = 1 by convention.
pub fn welch_test(a: &[f64], b: &[f64]) -> Result<WelchResult> {
    if a.len() < 2 || b.len() < 2 {
        return Err(Error::InvalidArgument("welch test needs at least 2 samples per side".into()));
    }
    let (mean_a, var_a) = mean_and_var(a);
    let (mean_b, var_b) = mean_and_var(b);
    let na = a.len() as f64;
    let nb = b.len() as f64;
    let se2 = var_a / na + var_b / nb;
    if se2 == 0.0 {
        let degenerate_dof = na + nb - 2.0;
        if mean_a == mean_b {
            return Ok(WelchResult { t: 0.0, dof: degenerate_dof, p: 1.0 });
        }
        let t = if mean_a > mean_b { f64::INFINITY } else { f64::NEG_INFINITY };
        return Ok(WelchResult { t, dof: degenerate_dof, p: 0.0 });
    }
    let t = (mean_a - mean_b) / se2.sqrt();
    let dof = se2 * se2 / ((var_a / na).powi(2) / (na - 1.0) + (var_b / nb).powi(2) / (nb - 1.0));
    let dist = StudentsT::new(0.0, 1.0, dof)
        .map_err(|e| Error::InvalidArgument(format!("t distribution: {e}")))?;
    let p = 2.0 * dist.cdf(-t.abs());
    Ok(WelchResult { t, dof, p })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn identical_samples_give_t_zero_p_one() {
        let xs = [0.5, 0.25, 1.0, 0.1];
        let r = welch_test(&xs, &xs).unwrap();
        assert_relative_eq!(r.t, 0.0);
        assert_relative_eq!(r.p, 1.0);
        assert!(!r.significant());
    }

    #[test]
    fn quintuple_reference_values() {
        let a = [1.0, 2.0, 3.0, 4.0, 5.0];
        let b = [3.0, 4.0, 5.0, 6.0, 7.0];
        let r = welch_test(&a, &b).unwrap();
        assert_relative_eq!(r.t, -2.0, epsilon = 1e-12);
        assert_relative_eq!(r.dof, 8.0, epsilon = 1e-12);
        // two-sided p for t = -2.0 at 8 dof
        assert_relative_eq!(r.p, 0.0805, epsilon = 5e-4);
    }

    #[test]
    fn constant_equal_samples_hit_the_convention() {
        let a = [0.5, 0.5, 0.5];
        let r = welch_test(&a, &a).unwrap();
        assert_eq!(r.t, 0.0);
        assert_eq!(r.p, 1.0);
    }

    #[test]
    fn constant_unequal_samples_are_certainly_different() {
        let a = [0.5, 0.5, 0.5];
        let b = [0.25, 0.25, 0.25];
        let r = welch_test(&a, &b).unwrap();
        assert!(r.t.is_infinite() && r.t > 0.0);
        assert_eq!(r.p, 0.0);
        assert!(r.significant());
    }

    #[test]
    fn too_small_samples_rejected() {
        assert!(welch_test(&[1.0], &[1.0, 2.0]).is_err());
    }
}
