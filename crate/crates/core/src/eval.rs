//! Summary statistics and numeric formatting for reported log-likelihoods.

/// Round-trip formatting: 17 significant digits in scientific notation.
pub fn fmt_f64(v: f64) -> String {
    if v.is_finite() {
        format!("{v:.16e}")
    } else {
        format!("{v}")
    }
}

/// Mean and standard error (sample std / √N) of per-example scores.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MeanSe {
    pub mean: f64,
    pub se: f64,
    pub n: usize,
}

impl MeanSe {
    pub fn of(values: &[f64]) -> Self {
        let n = values.len();
        if n == 0 {
            return MeanSe {
                mean: f64::NAN,
                se: f64::NAN,
                n,
            };
        }
        let mean = values.iter().sum::<f64>() / n as f64;
        let se = if n > 1 {
            let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
            (var / n as f64).sqrt()
        } else {
            0.0
        };
        MeanSe { mean, se, n }
    }

    /// Half-width of the normal 95% interval, `1.96 * se`.
    pub fn ci95(&self) -> f64 {
        1.96 * self.se
    }

    /// Combines fold results: mean of means, standard error of the fold means.
    pub fn across(folds: &[MeanSe]) -> Self {
        let means: Vec<f64> = folds.iter().map(|f| f.mean).collect();
        let mut s = MeanSe::of(&means);
        s.n = folds.iter().map(|f| f.n).sum();
        s
    }

    pub const CSV_HEADER: &'static str = "mean_loglik,std_err,ci95,n";

    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{},{}",
            fmt_f64(self.mean),
            fmt_f64(self.se),
            fmt_f64(self.ci95()),
            self.n
        )
    }
}
