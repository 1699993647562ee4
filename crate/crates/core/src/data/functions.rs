use statrs::function::factorial::factorial;
use statrs::function::gamma::gamma;

use super::{Benchmark, DataError};

const BESSEL_MAX_TERMS: usize = 60;
const BESSEL_TOLERANCE: f64 = 1e-12;

/// `J_ν(x)` for `ν, x ≥ 0` by its power series, stopping once a term falls
/// below `1e-12` of the partial sum or after 60 terms.
pub fn bessel_j(nu: f64, x: f64) -> f64 {
    let half = 0.5 * x;
    let q = -half * half;
    // Integer orders use the exact factorial table.
    let norm = if nu.fract() == 0.0 && nu <= 170.0 { factorial(nu as u64) } else { gamma(nu + 1.0) };
    let mut term = half.powf(nu) / norm;
    let mut sum = term;
    for m in 0..BESSEL_MAX_TERMS {
        let m = m as f64;
        term *= q / ((m + 1.0) * (m + nu + 1.0));
        sum += term;
        if term.abs() < BESSEL_TOLERANCE * sum.abs() || term == 0.0 {
            break;
        }
    }
    sum
}

/// `P_n(z)` by the three-term recurrence `(k+1) P_{k+1} = (2k+1) z P_k − k P_{k−1}`.
pub fn legendre_p(n: u32, z: f64) -> f64 {
    let (mut prev, mut cur) = (1.0, z);
    if n == 0 {
        return prev;
    }
    for k in 1..n {
        let k = k as f64;
        let next = ((2.0 * k + 1.0) * z * cur - k * prev) / (k + 1.0);
        prev = cur;
        cur = next;
    }
    cur
}

fn domain(b: Benchmark, detail: String) -> DataError {
    DataError::Domain { benchmark: b.name(), detail }
}

pub fn eval_benchmark(b: Benchmark, x: &[f64]) -> Result<f64, DataError> {
    if x.len() != b.input_dim() {
        return Err(DataError::Arity { expected: b.input_dim(), got: x.len() });
    }
    if let Some(v) = x.iter().find(|v| !v.is_finite()) {
        return Err(domain(b, format!("non-finite input {v}")));
    }
    let y = match b {
        Benchmark::FeynmanI30_3 => {
            let (i0, n, theta) = (x[0], x[1], x[2]);
            let s = (0.5 * theta).sin();
            if s.abs() < 1e-8 {
                return Err(domain(b, format!("sin(θ/2) vanishes at θ = {theta}")));
            }
            let num = (0.5 * n * theta).sin();
            i0 * num * num / (s * s)
        }
        Benchmark::FeynmanI37_4 => {
            let (i1, i2, delta) = (x[0], x[1], x[2]);
            if i1 < 0.0 || i2 < 0.0 {
                return Err(domain(b, format!("intensities ({i1}, {i2}) must be non-negative")));
            }
            i1 + i2 + 2.0 * (i1 * i2).sqrt() * delta.cos()
        }
        Benchmark::Bessel => {
            let (nu, arg) = (x[0], x[1]);
            if nu < 0.0 || arg < 0.0 {
                return Err(domain(b, format!("order {nu} and argument {arg} must be non-negative")));
            }
            bessel_j(nu, arg)
        }
        Benchmark::Legendre => {
            let (n, z) = (x[0], x[1]);
            if n < 0.0 || n.fract() != 0.0 || n > u32::MAX as f64 {
                return Err(domain(b, format!("degree {n} must be a non-negative integer")));
            }
            legendre_p(n as u32, z)
        }
    };
    Ok(y)
}
