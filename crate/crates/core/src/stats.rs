//! Probability kernel: standard-normal helpers, truncated normal
//! moments/CDF/sampling, Bernoulli participation, and seeded RNG streams.
//!
//! Everything here is pure and deterministic given an [`RngStream`]; the
//! distribution types are immutable and freely shareable.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::Error;

const SQRT_2: f64 = std::f64::consts::SQRT_2;
const INV_SQRT_2PI: f64 = 0.398_942_280_401_432_7;

/// Standard normal probability density.
pub fn norm_pdf(z: f64) -> f64 {
    INV_SQRT_2PI * (-0.5 * z * z).exp()
}

/// Standard normal CDF via the complementary error function (absolute
/// error below 1e-15, which the pricing bisection relies on).
pub fn norm_cdf(z: f64) -> f64 {
    0.5 * erfc(-z / SQRT_2)
}

/// Standard normal quantile. Used for inverse-CDF sampling.
pub fn norm_quantile(p: f64) -> f64 {
    ppnd16(p)
}

// Rational Chebyshev approximations for erf/erfc (Cody's calerf scheme);
// absolute error stays in the last couple of ulps across all branches.

const ERF_A: [f64; 5] = [
    3.16112374387056560e0,
    1.13864154151050156e2,
    3.77485237685302021e2,
    3.20937758913846947e3,
    1.85777706184603153e-1,
];
const ERF_B: [f64; 4] = [
    2.36012909523441209e1,
    2.44024637934444173e2,
    1.28261652607737228e3,
    2.84423683343917062e3,
];
const ERF_C: [f64; 9] = [
    5.64188496988670089e-1,
    8.88314979438837594e0,
    6.61191906371416295e1,
    2.98635138197400131e2,
    8.81952221241769090e2,
    1.71204761263407058e3,
    2.05107837782607147e3,
    1.23033935479799725e3,
    2.15311535474403846e-8,
];
const ERF_D: [f64; 8] = [
    1.57449261107098347e1,
    1.17693950891312499e2,
    5.37181101862009858e2,
    1.62138957456669019e3,
    3.29079923573345963e3,
    4.36261909014324716e3,
    3.43936767414372164e3,
    1.23033935480374942e3,
];
const ERF_P: [f64; 6] = [
    3.05326634961232344e-1,
    3.60344899949804439e-1,
    1.25781726111229246e-1,
    1.60837851487422766e-2,
    6.58749161529837803e-4,
    1.63153871373020978e-2,
];
const ERF_Q: [f64; 5] = [
    2.56852019228982242e0,
    1.87295284992346047e0,
    5.27905102951428412e-1,
    6.05183413124413191e-2,
    2.33520497626869185e-3,
];
const INV_SQRT_PI: f64 = 5.641_895_835_477_563e-1;

/// erf on the central interval |x| <= 0.46875.
fn erf_small(x: f64) -> f64 {
    let ysq = x * x;
    let mut num = ERF_A[4] * ysq;
    let mut den = ysq;
    for i in 0..3 {
        num = (num + ERF_A[i]) * ysq;
        den = (den + ERF_B[i]) * ysq;
    }
    x * (num + ERF_A[3]) / (den + ERF_B[3])
}

/// erfc(y) for y in (0.46875, 4].
fn erfc_mid(y: f64) -> f64 {
    let mut num = ERF_C[8] * y;
    let mut den = y;
    for i in 0..7 {
        num = (num + ERF_C[i]) * y;
        den = (den + ERF_D[i]) * y;
    }
    let result = (num + ERF_C[7]) / (den + ERF_D[7]);
    scale_by_exp(y, result)
}

/// erfc(y) for y > 4.
fn erfc_large(y: f64) -> f64 {
    let ysq = 1.0 / (y * y);
    let mut num = ERF_P[5] * ysq;
    let mut den = ysq;
    for i in 0..4 {
        num = (num + ERF_P[i]) * ysq;
        den = (den + ERF_Q[i]) * ysq;
    }
    let mut result = ysq * (num + ERF_P[4]) / (den + ERF_Q[4]);
    result = (INV_SQRT_PI - result) / y;
    scale_by_exp(y, result)
}

/// Multiply by exp(-y^2) split so the large part is computed on an exactly
/// representable argument.
fn scale_by_exp(y: f64, result: f64) -> f64 {
    let ysq = (y * 16.0).trunc() / 16.0;
    let del = (y - ysq) * (y + ysq);
    (-ysq * ysq).exp() * (-del).exp() * result
}

pub fn erf(x: f64) -> f64 {
    if x.abs() <= 0.46875 {
        erf_small(x)
    } else {
        1.0 - erfc(x)
    }
}

pub fn erfc(x: f64) -> f64 {
    let y = x.abs();
    let tail = if y <= 0.46875 {
        return 1.0 - erf_small(x);
    } else if y <= 4.0 {
        erfc_mid(y)
    } else if y < 26.6 {
        erfc_large(y)
    } else {
        0.0
    };
    if x < 0.0 {
        2.0 - tail
    } else {
        tail
    }
}

// Wichura's PPND16 rational approximation of the standard normal
// quantile.

const PPND_A: [f64; 8] = [
    3.3871328727963666080e0,
    1.3314166789178437745e2,
    1.9715909503065514427e3,
    1.3731693765509461125e4,
    4.5921953931549871457e4,
    6.7265770927008700853e4,
    3.3430575583588128105e4,
    2.5090809287301226727e3,
];
const PPND_B: [f64; 7] = [
    4.2313330701600911252e1,
    6.8718700749205790830e2,
    5.3941960214247511077e3,
    2.1213794301586595867e4,
    3.9307895800092710610e4,
    2.8729085735721942674e4,
    5.2264952788528545610e3,
];
const PPND_C: [f64; 8] = [
    1.42343711074968357734e0,
    4.63033784615654529590e0,
    5.76949722146069140550e0,
    3.64784832476320460504e0,
    1.27045825245236838258e0,
    2.41780725177450611770e-1,
    2.27238449892691845833e-2,
    7.74545014278341407640e-4,
];
const PPND_D: [f64; 7] = [
    2.05319162663775882187e0,
    1.67638483018380384940e0,
    6.89767334985100004550e-1,
    1.48103976427480074590e-1,
    1.51986665636164571966e-2,
    5.47593808499534494600e-4,
    1.05075007164441684324e-9,
];
const PPND_E: [f64; 8] = [
    6.65790464350110377720e0,
    5.46378491116411436990e0,
    1.78482653991729133580e0,
    2.96560571828504891230e-1,
    2.65321895265761230930e-2,
    1.24266094738807843860e-3,
    2.71155556874348757815e-5,
    2.01033439929228813265e-7,
];
const PPND_F: [f64; 7] = [
    5.99832206555887937690e-1,
    1.36929880922735805310e-1,
    1.48753612908506148525e-2,
    7.86869131145613259100e-4,
    1.84631831751005468180e-5,
    1.42151175831644588870e-7,
    2.04426310338993978564e-15,
];

fn ppnd_ratio(r: f64, num: &[f64; 8], den: &[f64; 7]) -> f64 {
    let mut n = num[7];
    for i in (0..7).rev() {
        n = n * r + num[i];
    }
    let mut d = den[6];
    for i in (0..6).rev() {
        d = d * r + den[i];
    }
    n / (d * r + 1.0)
}

fn ppnd16(p: f64) -> f64 {
    if p <= 0.0 {
        return f64::NEG_INFINITY;
    }
    if p >= 1.0 {
        return f64::INFINITY;
    }
    let q = p - 0.5;
    if q.abs() <= 0.425 {
        let r = 0.180625 - q * q;
        return q * ppnd_ratio(r, &PPND_A, &PPND_B);
    }
    let r = if q < 0.0 { p } else { 1.0 - p };
    let r = (-r.ln()).sqrt();
    let x = if r <= 5.0 {
        ppnd_ratio(r - 1.6, &PPND_C, &PPND_D)
    } else {
        ppnd_ratio(r - 5.0, &PPND_E, &PPND_F)
    };
    if q < 0.0 {
        -x
    } else {
        x
    }
}

/// SplitMix64 step; the workhorse for deriving independent stream ids.
pub fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9e37_79b9_7f4a_7c15);
    let mut z = x;
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Stable combination of several labels into one stream id.
pub fn mix_labels(labels: &[u64]) -> u64 {
    let mut acc = 0x243f_6a88_85a3_08d3;
    for &l in labels {
        acc = splitmix64(acc ^ l);
    }
    acc
}

/// A named, reproducible random stream: identical `(seed, stream)` pairs
/// yield identical draw sequences regardless of what other streams did.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RngStream {
    pub seed: u64,
    pub stream: u64,
}

impl RngStream {
    pub fn new(seed: u64, stream: u64) -> Self {
        Self { seed, stream }
    }

    /// Derive an independent child stream. Children with distinct labels
    /// never share state with each other or with the parent.
    pub fn substream(&self, label: u64) -> Self {
        Self {
            seed: self.seed,
            stream: splitmix64(self.stream ^ splitmix64(label)),
        }
    }

    /// Instantiate the generator. ChaCha is counter-based, so the 64-bit
    /// stream id selects a disjoint sequence for the same seed.
    pub fn rng(&self) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(self.stream);
        rng
    }
}

/// Bernoulli participation: a worker attends a trading with probability `a`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BernoulliParticipation {
    pub a: f64,
}

impl BernoulliParticipation {
    pub fn new(a: f64) -> Result<Self, Error> {
        if !(0.0..=1.0).contains(&a) || !a.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "attendance probability must lie in [0,1], got {a}"
            )));
        }
        Ok(Self { a })
    }

    pub fn sample(&self, rng: &mut impl Rng) -> bool {
        rng.random::<f64>() < self.a
    }
}

/// Normal distribution truncated to `[lo, hi]`.
///
/// Standardized bounds and the normalizing mass are cached at construction;
/// they appear in every moment/CDF evaluation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(into = "TruncNormalRaw")]
pub struct TruncNormal {
    mu: f64,
    sigma: f64,
    lo: f64,
    hi: f64,
    /// (lo - mu) / sigma
    z_lo: f64,
    /// (hi - mu) / sigma
    z_hi: f64,
    cdf_lo: f64,
    cdf_hi: f64,
    /// cdf_hi - cdf_lo, the untruncated mass of [lo, hi].
    mass: f64,
}

#[derive(Serialize, Deserialize)]
struct TruncNormalRaw {
    mu: f64,
    sigma: f64,
    lo: f64,
    hi: f64,
}

impl From<TruncNormal> for TruncNormalRaw {
    fn from(d: TruncNormal) -> Self {
        Self { mu: d.mu, sigma: d.sigma, lo: d.lo, hi: d.hi }
    }
}

impl<'de> Deserialize<'de> for TruncNormal {
    fn deserialize<D: serde::Deserializer<'de>>(de: D) -> Result<Self, D::Error> {
        let raw = TruncNormalRaw::deserialize(de)?;
        TruncNormal::new(raw.mu, raw.sigma, raw.lo, raw.hi).map_err(serde::de::Error::custom)
    }
}

impl TruncNormal {
    pub fn new(mu: f64, sigma: f64, lo: f64, hi: f64) -> Result<Self, Error> {
        if !(sigma > 0.0) || !sigma.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "truncated normal requires sigma > 0, got {sigma}"
            )));
        }
        if !(lo < hi) || !lo.is_finite() || !hi.is_finite() || !mu.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "truncated normal requires finite lo < hi, got [{lo}, {hi}]"
            )));
        }
        let z_lo = (lo - mu) / sigma;
        let z_hi = (hi - mu) / sigma;
        let cdf_lo = norm_cdf(z_lo);
        let cdf_hi = norm_cdf(z_hi);
        let mass = cdf_hi - cdf_lo;
        if !(mass > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "truncation [{lo}, {hi}] carries no probability mass around mu={mu}, sigma={sigma}"
            )));
        }
        Ok(Self { mu, sigma, lo, hi, z_lo, z_hi, cdf_lo, cdf_hi, mass })
    }

    pub fn mu(&self) -> f64 {
        self.mu
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    pub fn lo(&self) -> f64 {
        self.lo
    }

    pub fn hi(&self) -> f64 {
        self.hi
    }

    /// Standardized bounds ((lo-mu)/sigma, (hi-mu)/sigma).
    pub fn standardized_bounds(&self) -> (f64, f64) {
        (self.z_lo, self.z_hi)
    }

    /// Closed-form mean of the truncated distribution. Always inside
    /// (lo, hi).
    pub fn mean(&self) -> f64 {
        self.mu + self.sigma * (norm_pdf(self.z_lo) - norm_pdf(self.z_hi)) / self.mass
    }

    /// Variance of the truncated distribution.
    pub fn variance(&self) -> f64 {
        let (pl, ph) = (norm_pdf(self.z_lo), norm_pdf(self.z_hi));
        let a = (self.z_lo * pl - self.z_hi * ph) / self.mass;
        let b = (pl - ph) / self.mass;
        self.sigma * self.sigma * (1.0 + a - b * b)
    }

    /// CDF of the truncated distribution: 0 below `lo`, 1 above `hi`.
    pub fn cdf(&self, y: f64) -> f64 {
        if y < self.lo {
            0.0
        } else if y > self.hi {
            1.0
        } else {
            ((norm_cdf((y - self.mu) / self.sigma) - self.cdf_lo) / self.mass).clamp(0.0, 1.0)
        }
    }

    /// Density of the truncated distribution (0 outside `[lo, hi]`).
    pub fn pdf(&self, y: f64) -> f64 {
        if y < self.lo || y > self.hi {
            0.0
        } else {
            norm_pdf((y - self.mu) / self.sigma) / (self.sigma * self.mass)
        }
    }

    /// Inverse-CDF sample on the parent normal restricted to the truncation
    /// window; exact support, no rejection loop.
    pub fn sample(&self, rng: &mut impl Rng) -> f64 {
        let u: f64 = rng.random();
        let p = self.cdf_lo + u * self.mass;
        let x = self.mu + self.sigma * norm_quantile(p);
        x.clamp(self.lo, self.hi)
    }

    /// Affine image `scale * X + shift` of the truncated variable. For
    /// negative `scale` the support bounds swap accordingly.
    pub fn affine(&self, scale: f64, shift: f64) -> Result<Self, Error> {
        if scale == 0.0 {
            return Err(Error::InvalidParameter("affine scale must be nonzero".into()));
        }
        let (a, b) = (scale * self.lo + shift, scale * self.hi + shift);
        TruncNormal::new(
            scale * self.mu + shift,
            scale.abs() * self.sigma,
            a.min(b),
            a.max(b),
        )
    }
}

/// One realization of every worker's participation and local workload.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TradingDraw {
    pub alpha: Vec<bool>,
    pub beta: Vec<f64>,
}

impl TradingDraw {
    pub fn attended(&self) -> usize {
        self.alpha.iter().filter(|&&x| x).count()
    }
}

/// Sample one trading draw. Each worker consumes two private substreams
/// (participation, workload), so draws are independent across workers and
/// reproducible regardless of evaluation order.
pub fn sample_draw(
    workers: &[(BernoulliParticipation, TruncNormal)],
    rng: &RngStream,
) -> TradingDraw {
    let mut alpha = Vec::with_capacity(workers.len());
    let mut beta = Vec::with_capacity(workers.len());
    for (idx, (part, load)) in workers.iter().enumerate() {
        let mut a_rng = rng.substream(2 * idx as u64).rng();
        let mut b_rng = rng.substream(2 * idx as u64 + 1).rng();
        alpha.push(part.sample(&mut a_rng));
        beta.push(load.sample(&mut b_rng));
    }
    TradingDraw { alpha, beta }
}

/// Gauss-Legendre nodes and weights on [-1, 1], computed by Newton iteration
/// on the Legendre recurrence.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let m = n.div_ceil(2);
    for i in 0..m {
        // Tricomi initial guess.
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            // Legendre P_n(x) and derivative by recurrence.
            let (mut p0, mut p1) = (1.0, x);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
            let dx = p1 / dp;
            x -= dx;
            if dx.abs() < 1e-15 {
                break;
            }
        }
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    (nodes, weights)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn norm_cdf_reference_values() {
        assert_abs_diff_eq!(norm_cdf(0.0), 0.5, epsilon = 1e-15);
        // Abramowitz & Stegun 26.2.x reference values.
        assert_abs_diff_eq!(norm_cdf(1.0), 0.841344746068543, epsilon = 1e-12);
        assert_abs_diff_eq!(norm_cdf(-2.0), 0.022750131948179, epsilon = 1e-12);
        assert_abs_diff_eq!(norm_cdf(3.5), 0.999767370920964, epsilon = 1e-12);
    }

    #[test]
    fn quantile_inverts_cdf() {
        for &p in &[1e-6, 0.01, 0.3, 0.5, 0.77, 0.999] {
            assert_abs_diff_eq!(norm_cdf(norm_quantile(p)), p, epsilon = 1e-9);
        }
    }

    #[test]
    fn trunc_mean_symmetric_truncation_is_mu() {
        let d = TruncNormal::new(0.0, 1.0, -1.0, 1.0).unwrap();
        assert_abs_diff_eq!(d.mean(), 0.0, epsilon = 1e-14);
    }

    #[test]
    fn trunc_mean_degenerate_spread() {
        let d = TruncNormal::new(3.0, 1e-9, 2.0, 4.0).unwrap();
        assert_abs_diff_eq!(d.mean(), 3.0, epsilon = 1e-6);
    }

    #[test]
    fn trunc_mean_matches_quadrature() {
        // E[X] = integral of y * pdf(y) over [lo, hi].
        let d = TruncNormal::new(3.0, 0.5, 2.5, 4.5).unwrap();
        let (nodes, weights) = gauss_legendre(200);
        let (a, b) = (d.lo(), d.hi());
        let mut int = 0.0;
        for (x, w) in nodes.iter().zip(&weights) {
            let y = 0.5 * (b - a) * x + 0.5 * (a + b);
            int += w * y * d.pdf(y);
        }
        int *= 0.5 * (b - a);
        assert_abs_diff_eq!(d.mean(), int, epsilon = 1e-8);
    }

    #[test]
    fn trunc_cdf_boundaries_and_symmetry() {
        let d = TruncNormal::new(0.0, 1.0, -2.0, 2.0).unwrap();
        assert_eq!(d.cdf(d.lo() - 1.0), 0.0);
        assert_eq!(d.cdf(d.hi() + 0.5), 1.0);
        assert_abs_diff_eq!(d.cdf(0.0), 0.5, epsilon = 1e-14);
        assert_abs_diff_eq!(d.cdf(d.lo()), 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!(d.cdf(d.hi()), 1.0, epsilon = 1e-15);
    }

    #[test]
    fn trunc_cdf_nondecreasing() {
        let d = TruncNormal::new(3.0, 0.5, 2.5, 4.5).unwrap();
        let mut prev = -1.0;
        for i in 0..=400 {
            let y = 2.0 + 3.0 * i as f64 / 400.0;
            let c = d.cdf(y);
            assert!(c >= prev);
            prev = c;
        }
    }

    #[test]
    fn samples_stay_in_support() {
        let d = TruncNormal::new(3.0, 0.5, 2.5, 4.5).unwrap();
        let mut rng = RngStream::new(7, 0).rng();
        for _ in 0..10_000 {
            let x = d.sample(&mut rng);
            assert!((d.lo()..=d.hi()).contains(&x));
        }
    }

    #[test]
    fn bernoulli_extremes() {
        let mut rng = RngStream::new(1, 1).rng();
        let certain = BernoulliParticipation::new(1.0).unwrap();
        let never = BernoulliParticipation::new(0.0).unwrap();
        for _ in 0..1000 {
            assert!(certain.sample(&mut rng));
            assert!(!never.sample(&mut rng));
        }
    }

    #[test]
    fn draws_are_reproducible() {
        let workers: Vec<_> = (0..4)
            .map(|i| {
                (
                    BernoulliParticipation::new(0.5 + 0.1 * i as f64).unwrap(),
                    TruncNormal::new(3.0, 0.5, 2.0, 4.0).unwrap(),
                )
            })
            .collect();
        let s = RngStream::new(42, 9);
        let d1 = sample_draw(&workers, &s);
        let d2 = sample_draw(&workers, &s);
        assert_eq!(d1, d2);
        let d3 = sample_draw(&workers, &RngStream::new(42, 10));
        assert_ne!(d1, d3);
    }

    #[test]
    fn substreams_differ() {
        let s = RngStream::new(5, 0);
        let a: Vec<u64> = {
            let mut r = s.substream(0).rng();
            (0..4).map(|_| r.random()).collect()
        };
        let b: Vec<u64> = {
            let mut r = s.substream(1).rng();
            (0..4).map(|_| r.random()).collect()
        };
        assert_ne!(a, b);
    }

    #[test]
    fn gauss_legendre_integrates_polynomials() {
        let (nodes, weights) = gauss_legendre(8);
        // degree-7 polynomial integrated exactly by 8 nodes
        let f = |x: f64| 3.0 * x.powi(7) - x.powi(4) + 2.0 * x + 1.0;
        let num: f64 = nodes.iter().zip(&weights).map(|(x, w)| w * f(*x)).sum();
        // odd terms vanish; int_{-1}^{1} -x^4 + 1 = -2/5 + 2
        assert_abs_diff_eq!(num, 1.6, epsilon = 1e-12);
    }

    #[test]
    fn invalid_parameters_rejected() {
        assert!(TruncNormal::new(0.0, 0.0, -1.0, 1.0).is_err());
        assert!(TruncNormal::new(0.0, 1.0, 1.0, 1.0).is_err());
        assert!(TruncNormal::new(0.0, 1.0, 2.0, -2.0).is_err());
        assert!(BernoulliParticipation::new(1.5).is_err());
        assert!(BernoulliParticipation::new(-0.1).is_err());
    }
}
