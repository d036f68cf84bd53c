//! Dense row-major matrices and a seeded PRNG.
//!
//! The generator is xoshiro256** (Blackman & Vigna) with its 256-bit state
//! filled from the 64-bit seed by four successive SplitMix64 outputs. Both
//! algorithms are fixed here so that a seed reproduces the same stream on
//! every platform:
//!
//! ```text
//! splitmix64: z = (s += 0x9E3779B97F4A7C15)
//!             z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9
//!             z = (z ^ (z >> 27)) * 0x94D049BB133111EB
//!             return z ^ (z >> 31)
//! xoshiro256**: result = rotl(s1 * 5, 7) * 9
//!             t = s1 << 17
//!             s2 ^= s0; s3 ^= s1; s1 ^= s2; s0 ^= s3; s2 ^= t; s3 = rotl(s3, 45)
//! ```
//!
//! Uniform reals in `[0, 1)` take the top 53 bits of a draw: `(x >> 11) * 2^-53`.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, PartialEq, Serialize, Deserialize)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl fmt::Debug for Matrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Matrix({}x{}) [", self.rows, self.cols)?;
        for r in 0..self.rows.min(6) {
            write!(f, "\n  {:?}", &self.row(r)[..self.cols.min(8)])?;
        }
        write!(f, "\n]")
    }
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Matrix {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Matrix::zeros(n, n);
        for i in 0..n {
            m.data[i * n + i] = 1.0;
        }
        m
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::Shape(format!(
                "{} values cannot fill a {rows}x{cols} matrix",
                data.len()
            )));
        }
        if let Some(bad) = data.iter().find(|v| !v.is_finite()) {
            return Err(Error::Argument(format!("non-finite matrix entry {bad}")));
        }
        Ok(Matrix { rows, cols, data })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != cols) {
            return Err(Error::Shape("ragged rows".into()));
        }
        Matrix::from_vec(rows.len(), cols, rows.concat())
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.data.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    #[inline]
    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    #[inline]
    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    #[inline]
    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.cols + c]
    }

    #[inline]
    pub fn set(&mut self, r: usize, c: usize, v: f64) {
        self.data[r * self.cols + c] = v;
    }

    #[inline]
    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn transpose(&self) -> Matrix {
        let mut out = Matrix::zeros(self.cols, self.rows);
        for r in 0..self.rows {
            for c in 0..self.cols {
                out.data[c * self.rows + r] = self.data[r * self.cols + c];
            }
        }
        out
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub fn fill(&mut self, v: f64) {
        self.data.iter_mut().for_each(|x| *x = v);
    }

    /// `self += other`, elementwise.
    pub fn add_assign(&mut self, other: &Matrix) -> Result<()> {
        if self.shape() != other.shape() {
            return Err(Error::Shape(format!(
                "cannot add {:?} to {:?}",
                other.shape(),
                self.shape()
            )));
        }
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += b;
        }
        Ok(())
    }

    pub fn scale(&mut self, factor: f64) {
        self.data.iter_mut().for_each(|x| *x *= factor);
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(v.abs()))
    }
}

pub fn matmul(a: &Matrix, b: &Matrix) -> Result<Matrix> {
    if a.cols != b.rows {
        return Err(Error::Shape(format!(
            "cannot multiply {}x{} by {}x{}",
            a.rows, a.cols, b.rows, b.cols
        )));
    }
    let mut out = Matrix::zeros(a.rows, b.cols);
    for i in 0..a.rows {
        let out_row = &mut out.data[i * b.cols..(i + 1) * b.cols];
        for (p, &aip) in a.row(i).iter().enumerate() {
            if aip == 0.0 {
                continue;
            }
            for (o, &bpj) in out_row.iter_mut().zip(b.row(p)) {
                *o += aip * bpj;
            }
        }
    }
    Ok(out)
}

pub fn relu(m: &Matrix) -> Matrix {
    Matrix {
        rows: m.rows,
        cols: m.cols,
        data: m.data.iter().map(|&v| relu_scalar(v)).collect(),
    }
}

#[inline]
pub fn relu_scalar(v: f64) -> f64 {
    if v > 0.0 {
        v
    } else {
        0.0
    }
}

/// Entries i.i.d. uniform in `[lo, hi)`.
pub fn sample_uniform(rng: &mut Rng, lo: f64, hi: f64, rows: usize, cols: usize) -> Result<Matrix> {
    if !lo.is_finite() || !hi.is_finite() || lo >= hi {
        return Err(Error::Argument(format!(
            "uniform range requires lo < hi, got [{lo}, {hi})"
        )));
    }
    let span = hi - lo;
    let data = (0..rows * cols)
        .map(|_| lo + span * rng.next_f64())
        .collect();
    Ok(Matrix { rows, cols, data })
}

/// Entries i.i.d. standard normal.
pub fn sample_normal(rng: &mut Rng, rows: usize, cols: usize) -> Matrix {
    let data = (0..rows * cols).map(|_| rng.next_gaussian()).collect();
    Matrix { rows, cols, data }
}

/// A random `n x n` orthogonal matrix: the Q factor of a Gaussian matrix,
/// with column signs fixed so that R has a positive diagonal.
pub fn sample_orthogonal(rng: &mut Rng, n: usize) -> Matrix {
    let g = sample_normal(rng, n, n);
    // Modified Gram-Schmidt on the columns of g.
    let mut cols: Vec<Vec<f64>> = (0..n)
        .map(|c| (0..n).map(|r| g.get(r, c)).collect())
        .collect();
    for j in 0..n {
        for i in 0..j {
            let (done, rest) = cols.split_at_mut(j);
            let qi = &done[i];
            let cj = &mut rest[0];
            let proj: f64 = qi.iter().zip(cj.iter()).map(|(a, b)| a * b).sum();
            for (c, q) in cj.iter_mut().zip(qi) {
                *c -= proj * q;
            }
        }
        let norm = cols[j].iter().map(|v| v * v).sum::<f64>().sqrt();
        // A Gaussian matrix is singular with probability zero; the fallback
        // only guards degenerate generator states.
        if norm < 1e-12 {
            cols[j] = (0..n).map(|r| if r == j { 1.0 } else { 0.0 }).collect();
        } else {
            cols[j].iter_mut().for_each(|v| *v /= norm);
        }
    }
    let mut q = Matrix::zeros(n, n);
    for (c, col) in cols.iter().enumerate() {
        for (r, &v) in col.iter().enumerate() {
            q.set(r, c, v);
        }
    }
    q
}

/// xoshiro256** seeded through SplitMix64. See the module docs.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Rng {
    seed: u64,
    s: [u64; 4],
    spare_gaussian: Option<u64>,
}

#[inline]
fn splitmix64(state: &mut u64) -> u64 {
    *state = state.wrapping_add(0x9E37_79B9_7F4A_7C15);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

impl Rng {
    pub fn new(seed: u64) -> Self {
        let mut sm = seed;
        let s = [
            splitmix64(&mut sm),
            splitmix64(&mut sm),
            splitmix64(&mut sm),
            splitmix64(&mut sm),
        ];
        Rng {
            seed,
            s,
            spare_gaussian: None,
        }
    }

    /// Independent stream keyed by `(seed, tags)`. Used to give each paper,
    /// epoch or restart its own generator without threading one `Rng`
    /// through parallel code.
    pub fn derive(seed: u64, tags: &[u64]) -> Self {
        let mut h = seed;
        let mut acc = splitmix64(&mut h);
        for &t in tags {
            let mut x = acc ^ t.wrapping_mul(0xD6E8_FEB8_6659_FD93);
            acc = splitmix64(&mut x);
        }
        Rng::new(acc)
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    #[inline]
    pub fn next_u64(&mut self) -> u64 {
        let result = self.s[1].wrapping_mul(5).rotate_left(7).wrapping_mul(9);
        let t = self.s[1] << 17;
        self.s[2] ^= self.s[0];
        self.s[3] ^= self.s[1];
        self.s[1] ^= self.s[2];
        self.s[0] ^= self.s[3];
        self.s[2] ^= t;
        self.s[3] = self.s[3].rotate_left(45);
        result
    }

    /// Uniform in `[0, 1)` with 53 bits of precision.
    #[inline]
    pub fn next_f64(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform integer in `0..bound` (Lemire's multiply-shift with rejection).
    pub fn below(&mut self, bound: usize) -> usize {
        assert!(bound > 0, "below(0)");
        let bound = bound as u64;
        let threshold = bound.wrapping_neg() % bound;
        loop {
            let m = (self.next_u64() as u128) * (bound as u128);
            if (m as u64) >= threshold {
                return (m >> 64) as usize;
            }
        }
    }

    /// Standard normal via the polar Box-Muller method; the second value of
    /// each pair is cached.
    pub fn next_gaussian(&mut self) -> f64 {
        if let Some(bits) = self.spare_gaussian.take() {
            return f64::from_bits(bits);
        }
        loop {
            let u = 2.0 * self.next_f64() - 1.0;
            let v = 2.0 * self.next_f64() - 1.0;
            let s = u * u + v * v;
            if s > 0.0 && s < 1.0 {
                let f = (-2.0 * s.ln() / s).sqrt();
                self.spare_gaussian = Some((v * f).to_bits());
                return u * f;
            }
        }
    }

    /// Fisher-Yates shuffle.
    pub fn shuffle<T>(&mut self, items: &mut [T]) {
        for i in (1..items.len()).rev() {
            let j = self.below(i + 1);
            items.swap(i, j);
        }
    }
}

impl rand::RngCore for Rng {
    fn next_u32(&mut self) -> u32 {
        (Rng::next_u64(self) >> 32) as u32
    }

    fn next_u64(&mut self) -> u64 {
        Rng::next_u64(self)
    }

    fn fill_bytes(&mut self, dst: &mut [u8]) {
        for chunk in dst.chunks_mut(8) {
            let bytes = Rng::next_u64(self).to_le_bytes();
            chunk.copy_from_slice(&bytes[..chunk.len()]);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::Rng;
    use proptest::prelude::*;

    fn m(rows: &[&[f64]]) -> Matrix {
        Matrix::from_rows(&rows.iter().map(|r| r.to_vec()).collect::<Vec<_>>()).unwrap()
    }

    #[test]
    fn matmul_identity_left() {
        let a = m(&[&[1.5, -2.0], &[0.25, 7.0]]);
        assert_eq!(matmul(&Matrix::identity(2), &a).unwrap(), a);
    }

    #[test]
    fn matmul_hand_example() {
        let a = m(&[&[1.0, 2.0], &[3.0, 4.0]]);
        let b = m(&[&[5.0], &[6.0]]);
        assert_eq!(matmul(&a, &b).unwrap(), m(&[&[17.0], &[39.0]]));
    }

    #[test]
    fn matmul_zero_annihilates() {
        let a = m(&[&[1.0, 2.0], &[3.0, 4.0]]);
        assert_eq!(
            matmul(&Matrix::zeros(2, 2), &a).unwrap(),
            Matrix::zeros(2, 2)
        );
    }

    #[test]
    fn matmul_shape_error() {
        let a = Matrix::zeros(2, 3);
        assert!(matches!(matmul(&a, &a), Err(Error::Shape(_))));
    }

    #[test]
    fn relu_cases() {
        let x = m(&[&[-1.0, 0.0, 2.0]]);
        assert_eq!(relu(&x).as_slice(), &[0.0, 0.0, 2.0]);
        let pos = m(&[&[0.5, 3.0]]);
        assert_eq!(relu(&pos), pos);
        let neg = m(&[&[-0.5, -3.0]]);
        assert_eq!(relu(&neg), Matrix::zeros(1, 2));
    }

    #[test]
    fn uniform_is_deterministic() {
        let a = sample_uniform(&mut Rng::new(9), -1.0, 1.0, 4, 5).unwrap();
        let b = sample_uniform(&mut Rng::new(9), -1.0, 1.0, 4, 5).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn uniform_mean_near_half() {
        let s = sample_uniform(&mut Rng::new(1), 0.0, 1.0, 1, 100_000).unwrap();
        let mean = s.as_slice().iter().sum::<f64>() / s.len() as f64;
        assert!((mean - 0.5).abs() < 0.01, "mean {mean}");
        assert!(s.as_slice().iter().all(|&v| (0.0..1.0).contains(&v)));
    }

    #[test]
    fn uniform_rejects_empty_range() {
        assert!(matches!(
            sample_uniform(&mut Rng::new(1), 0.5, 0.5, 1, 1),
            Err(Error::Argument(_))
        ));
    }

    #[test]
    fn xoshiro_reference_vector() {
        // First outputs of xoshiro256** for state {1, 2, 3, 4}, from the
        // reference C implementation.
        let mut r = Rng {
            seed: 0,
            s: [1, 2, 3, 4],
            spare_gaussian: None,
        };
        assert_eq!(r.next_u64(), 11520);
        assert_eq!(r.next_u64(), 0);
        assert_eq!(r.next_u64(), 1509978240);
        assert_eq!(r.next_u64(), 1215971899390074240);
    }

    #[test]
    fn different_seeds_diverge() {
        let mut a = Rng::new(1);
        let mut b = Rng::new(2);
        let same = (0..100).filter(|_| a.next_u64() == b.next_u64()).count();
        assert!(same < 100);
    }

    #[test]
    fn orthogonal_columns() {
        let q = sample_orthogonal(&mut Rng::new(3), 12);
        let qtq = matmul(&q.transpose(), &q).unwrap();
        for i in 0..12 {
            for j in 0..12 {
                let want = if i == j { 1.0 } else { 0.0 };
                assert!((qtq.get(i, j) - want).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn gaussian_moments() {
        let mut r = Rng::new(11);
        let xs: Vec<f64> = (0..200_000).map(|_| r.next_gaussian()).collect();
        let mean = xs.iter().sum::<f64>() / xs.len() as f64;
        let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / xs.len() as f64;
        assert!(mean.abs() < 0.01);
        assert!((var - 1.0).abs() < 0.02);
    }

    fn small_matrix(rows: usize, cols: usize) -> impl Strategy<Value = Matrix> {
        prop::collection::vec(-10.0f64..10.0, rows * cols)
            .prop_map(move |d| Matrix::from_vec(rows, cols, d).unwrap())
    }

    proptest! {
        #[test]
        fn matmul_associative(a in small_matrix(3, 4), b in small_matrix(4, 2), c in small_matrix(2, 5)) {
            let left = matmul(&matmul(&a, &b).unwrap(), &c).unwrap();
            let right = matmul(&a, &matmul(&b, &c).unwrap()).unwrap();
            for (x, y) in left.as_slice().iter().zip(right.as_slice()) {
                prop_assert!((x - y).abs() < 1e-9);
            }
        }

        #[test]
        fn transpose_involution(a in small_matrix(3, 7)) {
            prop_assert_eq!(a.transpose().transpose(), a);
        }

        #[test]
        fn relu_idempotent(a in small_matrix(2, 6)) {
            prop_assert_eq!(relu(&relu(&a)), relu(&a));
        }

        #[test]
        fn equal_seeds_equal_streams(seed in any::<u64>()) {
            let mut a = Rng::new(seed);
            let mut b = Rng::new(seed);
            for _ in 0..64 {
                prop_assert_eq!(a.next_u64(), b.next_u64());
            }
        }
    }
}
