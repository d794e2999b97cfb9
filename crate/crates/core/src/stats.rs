//! Small statistics toolbox shared by the analysis stage and the test oracles.

use alloc::vec::Vec;

use crate::math;

/// Arithmetic mean; 0 for an empty slice.
pub fn mean(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        return 0.0;
    }
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Unbiased sample variance; 0 for fewer than two samples.
pub fn variance(xs: &[f64]) -> f64 {
    if xs.len() < 2 {
        return 0.0;
    }
    let m = mean(xs);
    xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (xs.len() - 1) as f64
}

/// Sample standard deviation.
pub fn std_dev(xs: &[f64]) -> f64 {
    math::sqrt(variance(xs))
}

/// Median (average of the two central order statistics for even lengths).
pub fn median(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        return 0.0;
    }
    let mut v: Vec<f64> = xs.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// Standard deviation of a binomial proportion estimate `p` over `n` trials.
pub fn binomial_sigma(p: f64, n: u64) -> f64 {
    if n == 0 {
        return 0.0;
    }
    math::sqrt(p * (1.0 - p) / n as f64)
}

/// Circular mean of a set of angles, in `(-pi, pi]`. `None` if the resultant
/// vector vanishes.
pub fn circular_mean(angles: &[f64]) -> Option<f64> {
    let mut s = 0.0;
    let mut c = 0.0;
    for &a in angles {
        s += math::sin(a);
        c += math::cos(a);
    }
    if math::hypot(s, c) < 1e-12 {
        return None;
    }
    Some(math::atan2(s, c))
}

/// Mergeable first/second-moment accumulator, the shard-and-merge primitive
/// used by the binned analyses.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct MomentAccumulator {
    pub count: u64,
    pub sum: f64,
    pub sum_sq: f64,
}

impl MomentAccumulator {
    pub fn push(&mut self, x: f64) {
        self.count += 1;
        self.sum += x;
        self.sum_sq += x * x;
    }

    pub fn merge(&mut self, other: &Self) {
        self.count += other.count;
        self.sum += other.sum;
        self.sum_sq += other.sum_sq;
    }

    pub fn mean(&self) -> f64 {
        if self.count == 0 {
            0.0
        } else {
            self.sum / self.count as f64
        }
    }

    /// Binomial standard deviation of the mean, appropriate when the pushed
    /// values are 0/1 outcomes.
    pub fn binomial_sigma_of_mean(&self) -> f64 {
        binomial_sigma(self.mean(), self.count)
    }
}

/// Kolmogorov distribution complementary CDF: `P(D > x)` in the large-sample
/// limit, via the alternating series.
pub fn kolmogorov_sf(x: f64) -> f64 {
    if x <= 0.0 {
        return 1.0;
    }
    let mut sum = 0.0;
    for k in 1..=100 {
        let kf = k as f64;
        let term = math::exp(-2.0 * kf * kf * x * x);
        sum += if k % 2 == 1 { term } else { -term };
        if term < 1e-16 {
            break;
        }
    }
    (2.0 * sum).clamp(0.0, 1.0)
}

/// One-sample Kolmogorov-Smirnov test against a CDF. Returns (statistic, p).
pub fn ks_test_cdf<F: Fn(f64) -> f64>(samples: &[f64], cdf: F) -> (f64, f64) {
    let mut v: Vec<f64> = samples.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len() as f64;
    let mut d: f64 = 0.0;
    for (i, &x) in v.iter().enumerate() {
        let f = cdf(x);
        let lo = i as f64 / n;
        let hi = (i + 1) as f64 / n;
        d = d.max(math::abs(f - lo)).max(math::abs(hi - f));
    }
    (d, kolmogorov_sf(math::sqrt(n) * d))
}

/// Two-sample Kolmogorov-Smirnov test. Returns (statistic, p).
pub fn ks_test_two_sample(a: &[f64], b: &[f64]) -> (f64, f64) {
    let mut xa: Vec<f64> = a.to_vec();
    let mut xb: Vec<f64> = b.to_vec();
    xa.sort_by(f64::total_cmp);
    xb.sort_by(f64::total_cmp);
    let (na, nb) = (xa.len(), xb.len());
    let mut i = 0;
    let mut j = 0;
    let mut d: f64 = 0.0;
    while i < na && j < nb {
        let x = xa[i].min(xb[j]);
        while i < na && xa[i] <= x {
            i += 1;
        }
        while j < nb && xb[j] <= x {
            j += 1;
        }
        d = d.max(math::abs(i as f64 / na as f64 - j as f64 / nb as f64));
    }
    let ne = (na as f64 * nb as f64) / (na as f64 + nb as f64);
    (d, kolmogorov_sf(math::sqrt(ne) * d))
}

/// Regularized lower incomplete gamma function P(a, x).
pub fn gamma_p(a: f64, x: f64) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    if x < a + 1.0 {
        // Series expansion.
        let mut term = 1.0 / a;
        let mut sum = term;
        let mut ap = a;
        for _ in 0..500 {
            ap += 1.0;
            term *= x / ap;
            sum += term;
            if math::abs(term) < math::abs(sum) * 1e-15 {
                break;
            }
        }
        sum * math::exp(-x + a * math::ln(x) - ln_gamma(a))
    } else {
        1.0 - gamma_q_cf(a, x)
    }
}

/// Regularized upper incomplete gamma function Q(a, x) = 1 - P(a, x).
pub fn gamma_q(a: f64, x: f64) -> f64 {
    1.0 - gamma_p(a, x)
}

fn gamma_q_cf(a: f64, x: f64) -> f64 {
    // Lentz continued fraction.
    let tiny = 1e-300;
    let mut b = x + 1.0 - a;
    let mut c = 1.0 / tiny;
    let mut d = 1.0 / b;
    let mut h = d;
    for i in 1..500 {
        let an = -(i as f64) * (i as f64 - a);
        b += 2.0;
        d = an * d + b;
        if math::abs(d) < tiny {
            d = tiny;
        }
        c = b + an / c;
        if math::abs(c) < tiny {
            c = tiny;
        }
        d = 1.0 / d;
        let delta = d * c;
        h *= delta;
        if math::abs(delta - 1.0) < 1e-15 {
            break;
        }
    }
    h * math::exp(-x + a * math::ln(x) - ln_gamma(a))
}

/// Natural log of the gamma function (Lanczos approximation).
pub fn ln_gamma(x: f64) -> f64 {
    const COEF: [f64; 6] = [
        76.180_091_729_471_46,
        -86.505_320_329_416_77,
        24.014_098_240_830_91,
        -1.231_739_572_450_155,
        0.120_865_097_386_617_7e-2,
        -0.539_523_938_495_3e-5,
    ];
    let mut y = x;
    let tmp = x + 5.5;
    let tmp = tmp - (x + 0.5) * math::ln(tmp);
    let mut ser = 1.000_000_000_190_015;
    for c in COEF {
        y += 1.0;
        ser += c / y;
    }
    -tmp + math::ln(2.506_628_274_631_000_5 * ser / x)
}

/// Chi-square survival function for `k` degrees of freedom.
pub fn chi2_sf(x: f64, k: f64) -> f64 {
    gamma_q(0.5 * k, 0.5 * x)
}

/// Pearson chi-square test of observed counts against uniform expectation.
/// Returns (statistic, p).
pub fn chi2_uniform_test(counts: &[u64]) -> (f64, f64) {
    let total: u64 = counts.iter().sum();
    let k = counts.len();
    if k < 2 || total == 0 {
        return (0.0, 1.0);
    }
    let expected = total as f64 / k as f64;
    let stat: f64 = counts
        .iter()
        .map(|&c| {
            let d = c as f64 - expected;
            d * d / expected
        })
        .sum();
    (stat, chi2_sf(stat, (k - 1) as f64))
}
