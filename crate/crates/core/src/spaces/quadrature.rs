//! Quadrature on the reference triangle (0,0), (1,0), (0,1).

use crate::error::{check, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct Quadrature {
    /// Barycentric coordinates `[1 - xi - eta, xi, eta]`.
    pub points: Vec<[f64; 3]>,
    /// Weights on the reference triangle; they sum to 1/2.
    pub weights: Vec<f64>,
    /// Total polynomial degree integrated exactly.
    pub degree: usize,
}

impl Quadrature {
    /// Smallest rule in this module that is exact for degree `degree`.
    pub fn with_degree(degree: usize) -> Result<Self> {
        check(degree >= 1, "quad_degree", || "must be at least 1".into())?;
        check(degree <= 40, "quad_degree", || {
            format!("{degree} is unreasonably large")
        })?;
        Ok(match degree {
            1 => Self::centroid(),
            2 => Self::three_point(),
            3..=5 => Self::seven_point(),
            d => Self::collapsed_gauss(d),
        })
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    fn centroid() -> Self {
        Self {
            points: vec![[1.0 / 3.0; 3]],
            weights: vec![0.5],
            degree: 1,
        }
    }

    fn three_point() -> Self {
        let (a, b) = (1.0 / 6.0, 2.0 / 3.0);
        Self {
            points: vec![[b, a, a], [a, b, a], [a, a, b]],
            weights: vec![1.0 / 6.0; 3],
            degree: 2,
        }
    }

    /// Radon's 7-point degree-5 rule.
    fn seven_point() -> Self {
        let s15 = 15f64.sqrt();
        let a1 = (6.0 - s15) / 21.0;
        let a2 = (6.0 + s15) / 21.0;
        let w1 = (155.0 - s15) / 2400.0;
        let w2 = (155.0 + s15) / 2400.0;
        let mut points = vec![[1.0 / 3.0; 3]];
        let mut weights = vec![9.0 / 80.0];
        for (a, w) in [(a1, w1), (a2, w2)] {
            let b = 1.0 - 2.0 * a;
            points.extend([[b, a, a], [a, b, a], [a, a, b]]);
            weights.extend([w; 3]);
        }
        Self {
            points,
            weights,
            degree: 5,
        }
    }

    /// Conical product of Gauss–Legendre rules through the collapsed map
    /// `(xi, eta) = (s, t (1 - s))`.
    fn collapsed_gauss(degree: usize) -> Self {
        // The Jacobian (1 - s) adds one to the degree in s.
        let n = (degree + 2).div_ceil(2);
        let (x, w) = gauss_legendre_unit(n);
        let mut points = Vec::with_capacity(n * n);
        let mut weights = Vec::with_capacity(n * n);
        for i in 0..n {
            for j in 0..n {
                let xi = x[i];
                let eta = x[j] * (1.0 - x[i]);
                points.push([1.0 - xi - eta, xi, eta]);
                weights.push(w[i] * w[j] * (1.0 - x[i]));
            }
        }
        Self {
            points,
            weights,
            degree: 2 * n - 2,
        }
    }
}

/// Gauss–Legendre nodes and weights on [0, 1].
pub fn gauss_legendre_unit(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for i in 0..n {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre(n, x);
            dp = d;
            let dx = p / d;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let (_, d) = legendre(n, x);
        if d != 0.0 {
            dp = d;
        }
        nodes[i] = 0.5 * (1.0 - x);
        weights[i] = 1.0 / ((1.0 - x * x) * dp * dp);
    }
    (nodes, weights)
}

fn legendre(n: usize, x: f64) -> (f64, f64) {
    let (mut p0, mut p1) = (1.0, x);
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, dp)
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Exact integral of xi^a eta^b over the reference triangle: a! b! / (a+b+2)!.
    fn monomial_exact(a: u32, b: u32) -> f64 {
        let fact = |k: u32| (1..=k).map(f64::from).product::<f64>();
        fact(a) * fact(b) / fact(a + b + 2)
    }

    fn integrate(q: &Quadrature, a: u32, b: u32) -> f64 {
        q.points
            .iter()
            .zip(&q.weights)
            .map(|(p, w)| w * p[1].powi(a as i32) * p[2].powi(b as i32))
            .sum()
    }

    #[test]
    fn weights_sum_to_half() {
        for d in 1..=12 {
            let q = Quadrature::with_degree(d).unwrap();
            let s: f64 = q.weights.iter().sum();
            assert!((s - 0.5).abs() < 1e-15, "degree {d}: {s}");
            assert!(q.degree >= d);
        }
    }

    #[test]
    fn exact_on_monomials() {
        for d in 1..=14 {
            let q = Quadrature::with_degree(d).unwrap();
            for a in 0..=q.degree as u32 {
                for b in 0..=(q.degree as u32 - a) {
                    let got = integrate(&q, a, b);
                    let want = monomial_exact(a, b);
                    assert!(
                        (got - want).abs() < 1e-14,
                        "degree {} rule, x^{a} y^{b}: {got} vs {want}",
                        q.degree
                    );
                }
            }
        }
    }

    #[test]
    fn seven_point_is_not_degree_six() {
        let q = Quadrature::with_degree(5).unwrap();
        assert_eq!(q.len(), 7);
        let worst = (0..=6u32)
            .map(|a| (integrate(&q, a, 6 - a) - monomial_exact(a, 6 - a)).abs())
            .fold(0.0, f64::max);
        assert!(worst > 1e-6);
    }

    #[test]
    fn rejects_degree_zero() {
        assert!(Quadrature::with_degree(0).is_err());
    }

    #[test]
    fn gauss_legendre_integrates_polynomials() {
        for n in 1..=10 {
            let (x, w) = gauss_legendre_unit(n);
            for p in 0..(2 * n) as i32 {
                let s: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(p)).sum();
                assert!((s - 1.0 / (p + 1) as f64).abs() < 1e-14);
            }
        }
    }
}
