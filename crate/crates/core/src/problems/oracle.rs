use nalgebra::DVector;

use super::Problem;
use crate::error::{Error, Result};
use crate::noise::NoiseStream;
use crate::point::Point;

/// One oracle answer `v = V(z) + U + b`.
#[derive(Debug, Clone, PartialEq)]
pub struct OracleSample {
    pub value: DVector<f64>,
    pub queries_used: usize,
}

/// Stochastic first-order oracle: `V(z)` plus one draw of the stream's noise.
pub fn sfo_query(problem: &dyn Problem, z: &Point, stream: &mut NoiseStream) -> OracleSample {
    let mut value = problem.field(z.coords());
    if !stream.model().is_none() {
        value += stream.draw(z.dim());
    }
    OracleSample {
        value,
        queries_used: 1,
    }
}

/// The SPSA estimate for one seed of the signed basis. Seeds are numbered
/// `0..2d`: seed `j` is `+e_{j/2}` when `j` is even and `-e_{j/2}` when odd.
pub fn spsa_estimate_for_seed(
    problem: &dyn Problem,
    z: &Point,
    delta: f64,
    seed: usize,
) -> Result<DVector<f64>> {
    let d = z.dim();
    assert!(seed < 2 * d, "seed index {seed} out of range for d = {d}");
    if !(delta > 0.0) {
        return Err(Error::invalid("delta", format!("must be positive, got {delta}")));
    }
    let i = seed / 2;
    let dir = if seed % 2 == 0 { 1.0 } else { -1.0 };
    let mut probe = z.coords().clone();
    probe[i] += delta * dir;
    let f = problem.objective(&probe).ok_or_else(|| Error::Unsupported {
        problem: problem.label().to_string(),
        what: "zeroth-order queries (no objective)",
    })?;
    // -1 on the minimizing block, +1 on the maximizing block
    let block_sign = if i < z.d1() { -1.0 } else { 1.0 };
    let mut v = DVector::zeros(d);
    v[i] = block_sign * (d as f64 / delta) * f * dir;
    Ok(v)
}

/// Zeroth-order oracle `v = ±(d/δ) f(z + δw) w` with `w` uniform on `{±e_i}`.
pub fn spsa_query(
    problem: &dyn Problem,
    z: &Point,
    delta: f64,
    stream: &mut NoiseStream,
) -> Result<OracleSample> {
    let seed = stream.index_below(2 * z.dim());
    Ok(OracleSample {
        value: spsa_estimate_for_seed(problem, z, delta, seed)?,
        queries_used: 1,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::noise::NoiseModel;
    use crate::problems::{make_bilinear, make_forsaken, GradientWell};

    fn enumerate_mean(problem: &dyn Problem, z: &Point, delta: f64) -> DVector<f64> {
        let d = z.dim();
        let mut acc = DVector::zeros(d);
        for j in 0..2 * d {
            acc += spsa_estimate_for_seed(problem, z, delta, j).unwrap();
        }
        acc / (2 * d) as f64
    }

    #[test]
    fn noiseless_sfo_returns_field() {
        let mut s = NoiseStream::new(NoiseModel::None, 0);
        let q = sfo_query(&make_bilinear(), &Point::xy(1.0, 0.0), &mut s);
        assert_eq!(q.value.as_slice(), &[0.0, 1.0]);
        assert_eq!(q.queries_used, 1);
    }

    #[test]
    fn gaussian_sfo_is_unbiased_with_bounded_variance() {
        let sigma = 0.1;
        let n = 100_000;
        let mut s = NoiseStream::new(NoiseModel::Gaussian { sigma }, 8);
        let z = Point::xy(1.0, 0.0);
        let mut mean = DVector::zeros(2);
        let mut second = 0.0;
        for _ in 0..n {
            let v = sfo_query(&make_bilinear(), &z, &mut s).value;
            let e = &v - DVector::from_vec(vec![0.0, 1.0]);
            second += e.norm_squared();
            mean += v;
        }
        mean /= n as f64;
        let tol = 3.0 * sigma / (n as f64).sqrt();
        assert!((mean[0] - 0.0).abs() < tol && (mean[1] - 1.0).abs() < tol, "{mean}");
        let second = second / n as f64;
        assert!(second <= sigma * sigma * (1.0 + 5.0 / (n as f64).sqrt()), "{second}");
    }

    #[test]
    fn spsa_enumeration_on_bilinear_is_exact() {
        let m = enumerate_mean(&make_bilinear(), &Point::xy(1.0, 1.0), 0.01);
        assert!((m[0] + 1.0).abs() < 1e-12 && (m[1] - 1.0).abs() < 1e-12, "{m}");
    }

    #[test]
    fn spsa_enumeration_is_the_symmetric_difference() {
        let p = make_forsaken();
        let z = Point::xy(0.3, -0.7);
        let delta = 0.05;
        let m = enumerate_mean(&p, &z, delta);
        for i in 0..2 {
            let mut a = z.coords().clone();
            let mut b = z.coords().clone();
            a[i] += delta;
            b[i] -= delta;
            let sd = (p.objective(&a).unwrap() - p.objective(&b).unwrap()) / (2.0 * delta);
            let sign = if i == 0 { -1.0 } else { 1.0 };
            assert!((m[i] - sign * sd).abs() < 1e-12);
        }
    }

    #[test]
    fn spsa_needs_an_objective() {
        let mut s = NoiseStream::new(NoiseModel::None, 0);
        let r = spsa_query(&GradientWell::default(), &Point::xy(0.5, 0.5), 0.1, &mut s);
        assert!(matches!(r, Err(Error::Unsupported { .. })));
    }
}
