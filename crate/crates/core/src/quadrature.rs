//! Gauss-Legendre rules and Smolyak sparse grids for the uniform probability
//! measure on `[-1, 1]^m` (weights sum to one).

use alloc::collections::BTreeMap;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};

/// Nodes and weights integrating against the uniform probability measure.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadratureRule {
    dim: usize,
    level: usize,
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl QuadratureRule {
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn level(&self) -> usize {
        self.level
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn node(&self, k: usize) -> &[f64] {
        &self.nodes[k * self.dim..(k + 1) * self.dim]
    }

    pub fn nodes(&self) -> impl Iterator<Item = &[f64]> {
        self.nodes.chunks_exact(self.dim)
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn integrate(&self, mut f: impl FnMut(&[f64]) -> f64) -> f64 {
        self.nodes().zip(&self.weights).map(|(x, w)| w * f(x)).sum()
    }
}

/// `n`-point Gauss-Legendre rule on `[-1, 1]`, weights normalized to the
/// probability density 1/2. Nodes ascend.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1, "Gauss-Legendre rule needs at least one point");
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    let half = n.div_ceil(2);
    for i in 0..half {
        // Tricomi initial guess for the i-th largest root
        let theta = core::f64::consts::PI * (4 * i + 3) as f64 / (4 * n + 2) as f64;
        let mut z = libm::cos(theta);
        let mut dp = 1.0;
        for _ in 0..100 {
            let (p, d) = legendre_with_derivative(n, z);
            dp = d;
            let dz = p / d;
            z -= dz;
            if dz.abs() <= 1e-16 {
                break;
            }
        }
        let (_, d) = legendre_with_derivative(n, z);
        dp = if d != 0.0 { d } else { dp };
        let weight = 1.0 / ((1.0 - z * z) * dp * dp);
        x[n - 1 - i] = z;
        x[i] = -z;
        w[n - 1 - i] = weight;
        w[i] = weight;
    }
    if n % 2 == 1 {
        x[n / 2] = 0.0;
    }
    (x, w)
}

/// `(P_n(z), P_n'(z))` for the classical (unnormalized) Legendre polynomial.
fn legendre_with_derivative(n: usize, z: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = z;
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * z * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (z * p1 - p0) / (z * z - 1.0);
    (p1, d)
}

/// Full tensor product of `points`-point Gauss-Legendre rules.
pub fn tensor_gauss(dim: usize, points: usize) -> Result<QuadratureRule> {
    if dim == 0 || points == 0 {
        return Err(Error::invalid("tensor rule needs dim >= 1 and points >= 1"));
    }
    let sizes = vec![points; dim];
    let rules: Vec<_> = (1..=points).map(gauss_legendre).collect();
    let mut nodes = Vec::new();
    let mut weights = Vec::new();
    for_each_tensor_point(&sizes, &rules, |x, w| {
        nodes.extend_from_slice(x);
        weights.push(w);
    });
    Ok(QuadratureRule { dim, level: points, nodes, weights })
}

fn for_each_tensor_point(sizes: &[usize], rules: &[(Vec<f64>, Vec<f64>)], mut emit: impl FnMut(&[f64], f64)) {
    let dim = sizes.len();
    let mut idx = vec![0usize; dim];
    let mut x = vec![0.0; dim];
    loop {
        let mut w = 1.0;
        for d in 0..dim {
            let (nodes, weights) = &rules[sizes[d] - 1];
            x[d] = nodes[idx[d]];
            w *= weights[idx[d]];
        }
        emit(&x, w);
        let mut d = 0;
        loop {
            if d == dim {
                return;
            }
            idx[d] += 1;
            if idx[d] < sizes[d] {
                break;
            }
            idx[d] = 0;
            d += 1;
        }
    }
}

fn binomial(n: usize, k: usize) -> f64 {
    if k > n {
        return 0.0;
    }
    let k = k.min(n - k);
    let mut r = 1.0;
    for i in 0..k {
        r = r * (n - i) as f64 / (i + 1) as f64;
    }
    libm::round(r)
}

/// Visits every multi-index `i ∈ N^dim`, `i_d >= 1`, with `lo <= |i| <= hi`.
fn for_each_level_index(dim: usize, lo: usize, hi: usize, mut f: impl FnMut(&[usize])) {
    let mut idx = vec![1usize; dim];
    fn rec(d: usize, idx: &mut [usize], used: usize, lo: usize, hi: usize, f: &mut impl FnMut(&[usize])) {
        let dim = idx.len();
        if d == dim {
            if used >= lo {
                f(idx);
            }
            return;
        }
        let remaining = dim - d - 1;
        let mut i = 1;
        while used + i + remaining <= hi {
            idx[d] = i;
            rec(d + 1, idx, used + i, lo, hi, f);
            i += 1;
        }
    }
    rec(0, &mut idx, 0, lo, hi, &mut f);
}

/// Smolyak sparse grid built from non-nested Gauss-Legendre rules, where 1D
/// level `i` uses `i` points and tensor levels satisfy `|i| ≤ dim + level - 1`
/// (combination technique). Exact for total degree `≤ 2·level - 1`.
/// Coincident nodes are merged (exact coordinate match) and nodes are sorted
/// lexicographically.
pub fn sparse_grid(dim: usize, level: usize) -> Result<QuadratureRule> {
    if dim == 0 {
        return Err(Error::invalid("sparse grid needs dim >= 1"));
    }
    if level == 0 {
        return Err(Error::invalid("sparse grid level must be >= 1"));
    }
    let q = dim + level - 1;
    let rules: Vec<_> = (1..=level).map(gauss_legendre).collect();
    let lo = level.max(dim);
    let mut merged: BTreeMap<Vec<u64>, f64> = BTreeMap::new();
    for_each_level_index(dim, lo, q, |idx| {
        let total: usize = idx.iter().sum();
        let k = q - total;
        let sign = if k.is_multiple_of(2) { 1.0 } else { -1.0 };
        let coef = sign * binomial(dim - 1, k);
        if coef == 0.0 {
            return;
        }
        for_each_tensor_point(idx, &rules, |x, w| {
            let key: Vec<u64> = x.iter().map(|v| ordered_bits(*v)).collect();
            *merged.entry(key).or_insert(0.0) += coef * w;
        });
    });
    let mut nodes = Vec::with_capacity(merged.len() * dim);
    let mut weights = Vec::with_capacity(merged.len());
    for (key, w) in merged {
        if w == 0.0 {
            continue;
        }
        nodes.extend(key.iter().map(|b| from_ordered_bits(*b)));
        weights.push(w);
    }
    Ok(QuadratureRule { dim, level, nodes, weights })
}

// Monotone map from f64 to u64 so that BTreeMap order is numeric order.
fn ordered_bits(x: f64) -> u64 {
    let x = if x == 0.0 { 0.0 } else { x };
    let b = x.to_bits();
    if b >> 63 == 1 {
        !b
    } else {
        b | (1 << 63)
    }
}

fn from_ordered_bits(b: u64) -> f64 {
    if b >> 63 == 1 {
        f64::from_bits(b & !(1 << 63))
    } else {
        f64::from_bits(!b)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn uniform_moment(power: u32) -> f64 {
        if power % 2 == 1 {
            0.0
        } else {
            1.0 / (power as f64 + 1.0)
        }
    }

    #[test]
    fn gauss_legendre_is_exact_to_degree_2n_minus_1() {
        for n in 1..=12 {
            let (x, w) = gauss_legendre(n);
            assert!((w.iter().sum::<f64>() - 1.0).abs() < 1e-14);
            for p in 0..(2 * n as u32) {
                let v: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(p as i32)).sum();
                assert!((v - uniform_moment(p)).abs() < 1e-13, "n={n} p={p}");
            }
        }
    }

    #[test]
    fn gauss_legendre_nodes_are_symmetric_and_sorted() {
        let (x, w) = gauss_legendre(7);
        assert!(x.windows(2).all(|p| p[0] < p[1]));
        for i in 0..7 {
            assert_eq!(x[i], -x[6 - i]);
            assert_eq!(w[i], w[6 - i]);
        }
        assert_eq!(x[3], 0.0);
    }

    #[test]
    fn one_dimensional_sparse_grid_is_gauss() {
        for level in 1..=6 {
            let r = sparse_grid(1, level).unwrap();
            let (x, w) = gauss_legendre(level);
            assert_eq!(r.len(), level);
            for k in 0..level {
                assert!((r.node(k)[0] - x[k]).abs() < 1e-15);
                assert!((r.weights()[k] - w[k]).abs() < 1e-15);
            }
            let odd = r.integrate(|x| x[0].powi(2 * level as i32 - 1));
            assert!(odd.abs() < 1e-13);
        }
    }

    #[test]
    fn sparse_grid_weights_sum_to_one() {
        for dim in 1..=4 {
            for level in 1..=5 {
                let r = sparse_grid(dim, level).unwrap();
                assert!((r.weights().iter().sum::<f64>() - 1.0).abs() < 1e-12, "dim={dim} level={level}");
                assert!(r.nodes().all(|x| x.iter().all(|v| v.abs() <= 1.0)));
            }
        }
    }

    #[test]
    fn sparse_grid_moment() {
        let r = sparse_grid(2, 3).unwrap();
        let v = r.integrate(|x| x[0] * x[0] * x[1] * x[1]);
        assert!((v - 1.0 / 9.0).abs() < 1e-12);
    }

    #[test]
    fn sparse_grid_total_degree_exactness() {
        // every monomial of total degree <= 2·level - 1 in 3 variables
        for level in 1..=4 {
            let r = sparse_grid(3, level).unwrap();
            let max = 2 * level as u32 - 1;
            for a in 0..=max {
                for b in 0..=(max - a) {
                    for c in 0..=(max - a - b) {
                        let v = r.integrate(|x| x[0].powi(a as i32) * x[1].powi(b as i32) * x[2].powi(c as i32));
                        let e = uniform_moment(a) * uniform_moment(b) * uniform_moment(c);
                        assert!((v - e).abs() < 1e-12, "level={level} ({a},{b},{c})");
                    }
                }
            }
        }
    }

    #[test]
    fn sparse_grid_node_counts_are_locked() {
        // regression values recorded from the first computation
        assert_eq!(sparse_grid(2, 3).unwrap().len(), 13);
        assert_eq!(sparse_grid(4, 5).unwrap().len(), SPARSE_4_5);
        assert_eq!(sparse_grid(10, 5).unwrap().len(), SPARSE_10_5);
    }

    const SPARSE_4_5: usize = 385;
    const SPARSE_10_5: usize = 8761;

    #[test]
    fn bad_arguments() {
        assert!(sparse_grid(0, 2).is_err());
        assert!(sparse_grid(2, 0).is_err());
        assert!(tensor_gauss(0, 2).is_err());
    }

    #[test]
    fn ordered_bits_round_trip_and_order() {
        let vals = [-1.0, -0.5, -1e-300, 0.0, 1e-300, 0.25, 1.0];
        for w in vals.windows(2) {
            assert!(ordered_bits(w[0]) < ordered_bits(w[1]));
        }
        for v in vals {
            assert_eq!(from_ordered_bits(ordered_bits(v)), v);
        }
        assert_eq!(ordered_bits(-0.0), ordered_bits(0.0));
    }
}
