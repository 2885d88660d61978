//! Bit-packed binary matrices and the Boolean product kernels.
//!
//! Rows are stored as runs of `u64` words. Each row owns `stride` words, which
//! may exceed the number needed for `n_cols`; the extra capacity lets columns
//! be appended without repacking every row. Bits beyond `n_cols` are always
//! zero.

use std::fmt;

use rayon::prelude::*;

use crate::error::{Error, Result};

pub(crate) const WORD_BITS: usize = 64;

#[inline]
pub(crate) fn words_for(bits: usize) -> usize {
    bits.div_ceil(WORD_BITS)
}

/// Mask of the valid bits in the last word of a `bits`-long row.
#[inline]
pub(crate) fn tail_mask(bits: usize) -> u64 {
    match bits % WORD_BITS {
        0 => u64::MAX,
        r => (1u64 << r) - 1,
    }
}

#[inline]
pub(crate) fn get_bit(words: &[u64], i: usize) -> bool {
    (words[i / WORD_BITS] >> (i % WORD_BITS)) & 1 == 1
}

#[inline]
pub(crate) fn set_bit(words: &mut [u64], i: usize, value: bool) {
    let mask = 1u64 << (i % WORD_BITS);
    if value {
        words[i / WORD_BITS] |= mask;
    } else {
        words[i / WORD_BITS] &= !mask;
    }
}

#[inline]
pub(crate) fn popcount(words: &[u64]) -> usize {
    words.iter().map(|w| w.count_ones() as usize).sum()
}

#[inline]
pub(crate) fn intersects(a: &[u64], b: &[u64]) -> bool {
    a.iter().zip(b).any(|(x, y)| x & y != 0)
}

/// Borrowed view of one packed row.
#[derive(Clone, Copy)]
pub struct BitRow<'a> {
    words: &'a [u64],
    len: usize,
}

impl<'a> BitRow<'a> {
    /// Wraps `words` as a row of `len` bits. Bits past `len` must be zero.
    pub fn new(words: &'a [u64], len: usize) -> Self {
        assert!(words.len() >= words_for(len), "row storage too short");
        BitRow {
            words: &words[..words_for(len)],
            len,
        }
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn get(&self, i: usize) -> bool {
        assert!(i < self.len, "bit {i} out of range for row of length {}", self.len);
        get_bit(self.words, i)
    }

    pub fn words(&self) -> &'a [u64] {
        self.words
    }

    pub fn count_ones(&self) -> usize {
        popcount(self.words)
    }

    pub fn iter(&self) -> impl Iterator<Item = bool> + '_ {
        (0..self.len).map(|i| get_bit(self.words, i))
    }

    pub fn to_vec(&self) -> Vec<bool> {
        self.iter().collect()
    }
}

impl fmt::Debug for BitRow<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for b in self.iter() {
            f.write_str(if b { "1" } else { "0" })?;
        }
        Ok(())
    }
}

/// Owned packed bit vector.
#[derive(Clone, PartialEq, Eq, Default)]
pub struct BitVector {
    words: Vec<u64>,
    len: usize,
}

impl BitVector {
    pub fn zeros(len: usize) -> Self {
        BitVector {
            words: vec![0; words_for(len)],
            len,
        }
    }

    pub fn from_bools(bits: &[bool]) -> Self {
        let mut v = BitVector::zeros(bits.len());
        for (i, &b) in bits.iter().enumerate() {
            if b {
                set_bit(&mut v.words, i, true);
            }
        }
        v
    }

    pub fn set(&mut self, i: usize, value: bool) {
        assert!(i < self.len, "bit {i} out of range for vector of length {}", self.len);
        set_bit(&mut self.words, i, value);
    }

    pub fn as_row(&self) -> BitRow<'_> {
        BitRow::new(&self.words, self.len)
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }
}

impl fmt::Debug for BitVector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.as_row().fmt(f)
    }
}

/// Dense binary matrix, one bit per entry, row-major.
#[derive(Clone)]
pub struct BinaryMatrix {
    n_rows: usize,
    n_cols: usize,
    stride: usize,
    words: Vec<u64>,
}

impl BinaryMatrix {
    pub fn zeros(n_rows: usize, n_cols: usize) -> Self {
        Self::with_col_capacity(n_rows, n_cols, n_cols)
    }

    /// All-zero matrix whose rows can grow to `capacity` columns without
    /// reallocation.
    pub fn with_col_capacity(n_rows: usize, n_cols: usize, capacity: usize) -> Self {
        let stride = words_for(capacity.max(n_cols)).max(1);
        BinaryMatrix {
            n_rows,
            n_cols,
            stride,
            words: vec![0; n_rows * stride],
        }
    }

    pub fn ones(n_rows: usize, n_cols: usize) -> Self {
        let mut m = Self::zeros(n_rows, n_cols);
        let used = words_for(n_cols);
        if used > 0 {
            let tail = tail_mask(n_cols);
            for r in 0..n_rows {
                let row = m.row_words_mut(r);
                row.fill(u64::MAX);
                row[used - 1] = tail;
            }
        }
        m
    }

    pub fn from_fn(n_rows: usize, n_cols: usize, mut f: impl FnMut(usize, usize) -> bool) -> Self {
        let mut m = Self::zeros(n_rows, n_cols);
        for r in 0..n_rows {
            for c in 0..n_cols {
                if f(r, c) {
                    m.set(r, c, true);
                }
            }
        }
        m
    }

    /// Builds a matrix from nested rows of 0/1 values. All rows must have the
    /// same length; any nonzero value counts as 1.
    pub fn from_rows<R: AsRef<[u8]>>(rows: &[R]) -> Result<Self> {
        let n_cols = rows.first().map_or(0, |r| r.as_ref().len());
        if let Some((i, r)) = rows
            .iter()
            .enumerate()
            .find(|(_, r)| r.as_ref().len() != n_cols)
        {
            return Err(Error::Shape(format!(
                "row {i} has {} entries, expected {n_cols}",
                r.as_ref().len()
            )));
        }
        Ok(Self::from_fn(rows.len(), n_cols, |r, c| rows[r].as_ref()[c] != 0))
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn n_cols(&self) -> usize {
        self.n_cols
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.n_rows, self.n_cols)
    }

    /// Number of words that carry data in each row.
    #[inline]
    pub(crate) fn row_len_words(&self) -> usize {
        words_for(self.n_cols)
    }

    #[inline]
    pub fn get(&self, r: usize, c: usize) -> bool {
        assert!(
            r < self.n_rows && c < self.n_cols,
            "({r}, {c}) out of range for {}x{} matrix",
            self.n_rows,
            self.n_cols
        );
        get_bit(&self.words[r * self.stride..], c)
    }

    #[inline]
    pub fn set(&mut self, r: usize, c: usize, value: bool) {
        assert!(
            r < self.n_rows && c < self.n_cols,
            "({r}, {c}) out of range for {}x{} matrix",
            self.n_rows,
            self.n_cols
        );
        set_bit(&mut self.words[r * self.stride..], c, value);
    }

    pub fn row(&self, r: usize) -> BitRow<'_> {
        BitRow::new(self.row_words(r), self.n_cols)
    }

    #[inline]
    pub(crate) fn row_words(&self, r: usize) -> &[u64] {
        let start = r * self.stride;
        &self.words[start..start + self.row_len_words()]
    }

    #[inline]
    pub(crate) fn row_words_mut(&mut self, r: usize) -> &mut [u64] {
        let start = r * self.stride;
        let len = self.row_len_words();
        &mut self.words[start..start + len]
    }

    /// Full-stride row chunks, for partitioning rows across workers.
    pub(crate) fn par_row_chunks_mut(&mut self) -> rayon::slice::ChunksExactMut<'_, u64> {
        self.words.par_chunks_exact_mut(self.stride)
    }

    pub fn count_ones(&self) -> usize {
        (0..self.n_rows).map(|r| popcount(self.row_words(r))).sum()
    }

    pub fn density(&self) -> f64 {
        let total = self.n_rows * self.n_cols;
        if total == 0 {
            0.0
        } else {
            self.count_ones() as f64 / total as f64
        }
    }

    pub fn col_count_ones(&self, c: usize) -> usize {
        (0..self.n_rows).filter(|&r| self.get(r, c)).count()
    }

    pub fn col(&self, c: usize) -> BitVector {
        let mut v = BitVector::zeros(self.n_rows);
        for r in 0..self.n_rows {
            if self.get(r, c) {
                v.set(r, true);
            }
        }
        v
    }

    pub fn transpose(&self) -> BinaryMatrix {
        let mut t = BinaryMatrix::zeros(self.n_cols, self.n_rows);
        for r in 0..self.n_rows {
            let row = self.row_words(r);
            for (wi, &w) in row.iter().enumerate() {
                let mut bits = w;
                while bits != 0 {
                    let c = wi * WORD_BITS + bits.trailing_zeros() as usize;
                    set_bit(&mut t.words[c * t.stride..], r, true);
                    bits &= bits - 1;
                }
            }
        }
        t
    }

    /// Appends `k` all-zero columns.
    pub fn push_cols(&mut self, k: usize) {
        let new_cols = self.n_cols + k;
        let needed = words_for(new_cols);
        if needed > self.stride {
            let new_stride = needed.max(self.stride * 2);
            let mut words = vec![0; self.n_rows * new_stride];
            for r in 0..self.n_rows {
                let used = self.row_len_words();
                words[r * new_stride..r * new_stride + used].copy_from_slice(self.row_words(r));
            }
            self.words = words;
            self.stride = new_stride;
        }
        self.n_cols = new_cols;
    }

    /// Removes column `c`, shifting later columns one position left.
    pub fn remove_col(&mut self, c: usize) {
        assert!(c < self.n_cols, "column {c} out of range for {} columns", self.n_cols);
        let used = self.row_len_words();
        let wi = c / WORD_BITS;
        let bi = c % WORD_BITS;
        for r in 0..self.n_rows {
            let row = &mut self.words[r * self.stride..r * self.stride + used];
            let low = if bi == 0 { 0 } else { row[wi] & ((1u64 << bi) - 1) };
            let high = if bi == 63 { 0 } else { (row[wi] >> (bi + 1)) << bi };
            row[wi] = low | high;
            for j in wi + 1..used {
                let carry = row[j] & 1;
                row[j - 1] |= carry << 63;
                row[j] >>= 1;
            }
        }
        self.n_cols -= 1;
    }

    /// Appends a row. `bits` must have `n_cols` entries.
    pub fn push_row(&mut self, bits: BitRow<'_>) {
        assert_eq!(bits.len(), self.n_cols, "row length mismatch");
        let start = self.words.len();
        self.words.resize(start + self.stride, 0);
        self.words[start..start + bits.words().len()].copy_from_slice(bits.words());
        self.n_rows += 1;
    }

    pub fn push_zero_rows(&mut self, k: usize) {
        self.words.resize(self.words.len() + k * self.stride, 0);
        self.n_rows += k;
    }

    pub fn remove_row(&mut self, r: usize) {
        assert!(r < self.n_rows, "row {r} out of range for {} rows", self.n_rows);
        let start = r * self.stride;
        self.words.drain(start..start + self.stride);
        self.n_rows -= 1;
    }

    /// Indices of set entries in row-major order.
    pub fn iter_ones(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        (0..self.n_rows).flat_map(move |r| {
            let row = self.row_words(r);
            row.iter().enumerate().flat_map(move |(wi, &w)| {
                let mut bits = w;
                std::iter::from_fn(move || {
                    if bits == 0 {
                        None
                    } else {
                        let c = wi * WORD_BITS + bits.trailing_zeros() as usize;
                        bits &= bits - 1;
                        Some((r, c))
                    }
                })
            })
        })
    }

    pub fn to_rows(&self) -> Vec<Vec<u8>> {
        (0..self.n_rows)
            .map(|r| self.row(r).iter().map(u8::from).collect())
            .collect()
    }

    /// Keeps only the listed columns, in the given order.
    pub fn select_cols(&self, cols: &[usize]) -> BinaryMatrix {
        BinaryMatrix::from_fn(self.n_rows, cols.len(), |r, j| self.get(r, cols[j]))
    }

    /// Number of entries in which `self` and `other` differ.
    pub fn hamming(&self, other: &BinaryMatrix) -> Result<usize> {
        if self.shape() != other.shape() {
            return Err(Error::Shape(format!(
                "{:?} vs {:?}",
                self.shape(),
                other.shape()
            )));
        }
        Ok((0..self.n_rows)
            .map(|r| {
                self.row_words(r)
                    .iter()
                    .zip(other.row_words(r))
                    .map(|(a, b)| (a ^ b).count_ones() as usize)
                    .sum::<usize>()
            })
            .sum())
    }
}

impl PartialEq for BinaryMatrix {
    fn eq(&self, other: &Self) -> bool {
        self.shape() == other.shape()
            && (0..self.n_rows).all(|r| self.row_words(r) == other.row_words(r))
    }
}

impl Eq for BinaryMatrix {}

impl fmt::Debug for BinaryMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "BinaryMatrix {}x{} [", self.n_rows, self.n_cols)?;
        for r in 0..self.n_rows {
            writeln!(f, "  {:?}", self.row(r))?;
        }
        write!(f, "]")
    }
}

/// Tallies of a Boolean reconstruction against observed data.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash)]
pub struct PredictionCounts {
    pub tp: usize,
    pub fp: usize,
    pub tn: usize,
    pub fn_: usize,
}

impl PredictionCounts {
    pub fn correct(&self) -> usize {
        self.tp + self.tn
    }

    pub fn wrong(&self) -> usize {
        self.fp + self.fn_
    }

    pub fn total(&self) -> usize {
        self.tp + self.fp + self.tn + self.fn_
    }
}

impl std::ops::AddAssign for PredictionCounts {
    fn add_assign(&mut self, o: Self) {
        self.tp += o.tp;
        self.fp += o.fp;
        self.tn += o.tn;
        self.fn_ += o.fn_;
    }
}

fn check_factors(z: &BinaryMatrix, u: &BinaryMatrix) -> Result<()> {
    if z.n_cols() != u.n_cols() {
        return Err(Error::Shape(format!(
            "latent dimension of Z ({}) differs from U ({})",
            z.n_cols(),
            u.n_cols()
        )));
    }
    Ok(())
}

fn check_data(x: &BinaryMatrix, z: &BinaryMatrix, u: &BinaryMatrix) -> Result<()> {
    check_factors(z, u)?;
    if x.n_rows() != z.n_rows() || x.n_cols() != u.n_rows() {
        return Err(Error::Shape(format!(
            "data is {}x{} but factors imply {}x{}",
            x.n_rows(),
            x.n_cols(),
            z.n_rows(),
            u.n_rows()
        )));
    }
    Ok(())
}

/// Boolean product: `x[n][d] = OR_l (z[n][l] AND u[d][l])`. `U` is `D x L`.
pub fn boolean_product(z: &BinaryMatrix, u: &BinaryMatrix) -> Result<BinaryMatrix> {
    check_factors(z, u)?;
    let ut = u.transpose();
    let mut out = BinaryMatrix::zeros(z.n_rows(), u.n_rows());
    let mut cover = vec![0u64; words_for(u.n_rows())];
    for n in 0..z.n_rows() {
        active_coverage(z.row_words(n), &ut, &mut cover);
        out.row_words_mut(n).copy_from_slice(&cover);
    }
    Ok(out)
}

/// ORs together the code rows of `codes_t` (an `L x D` matrix) selected by the
/// set bits of `factor_row`.
pub(crate) fn active_coverage(factor_row: &[u64], codes_t: &BinaryMatrix, cover: &mut [u64]) {
    cover.fill(0);
    for (wi, &w) in factor_row.iter().enumerate() {
        let mut bits = w;
        while bits != 0 {
            let l = wi * WORD_BITS + bits.trailing_zeros() as usize;
            for (c, s) in cover.iter_mut().zip(codes_t.row_words(l)) {
                *c |= s;
            }
            bits &= bits - 1;
        }
    }
}

/// Counts for one row given its data words and coverage words (both of
/// `len` bits).
pub(crate) fn row_counts(x: &[u64], cover: &[u64], len: usize) -> PredictionCounts {
    let tp = x.iter().zip(cover).map(|(a, b)| (a & b).count_ones() as usize).sum();
    let ones = popcount(x);
    let positives = popcount(cover);
    let fp = positives - tp;
    let fn_ = ones - tp;
    let tn = len - tp - fp - fn_;
    PredictionCounts { tp, fp, tn, fn_ }
}

/// Compares `boolean_product(z, u)` against `x` entrywise.
pub fn prediction_counts(
    x: &BinaryMatrix,
    z: &BinaryMatrix,
    u: &BinaryMatrix,
) -> Result<PredictionCounts> {
    check_data(x, z, u)?;
    Ok(prediction_counts_t(x, z, &u.transpose()))
}

/// As [`prediction_counts`], with `U` supplied already transposed (`L x D`).
pub(crate) fn prediction_counts_t(
    x: &BinaryMatrix,
    z: &BinaryMatrix,
    ut: &BinaryMatrix,
) -> PredictionCounts {
    let mut total = PredictionCounts::default();
    let mut cover = vec![0u64; x.row_len_words()];
    for n in 0..x.n_rows() {
        active_coverage(z.row_words(n), ut, &mut cover);
        total += row_counts(x.row_words(n), &cover, x.n_cols());
    }
    total
}

/// Counts `(tn, fn_)` among the negative predictions of a single row.
pub fn row_negative_counts(
    x_row: BitRow<'_>,
    z_row: BitRow<'_>,
    u: &BinaryMatrix,
) -> Result<(usize, usize)> {
    if x_row.len() != u.n_rows() || z_row.len() != u.n_cols() {
        return Err(Error::Shape(format!(
            "row lengths ({}, {}) do not match U {}x{}",
            x_row.len(),
            z_row.len(),
            u.n_rows(),
            u.n_cols()
        )));
    }
    let mut tn = 0;
    let mut fn_ = 0;
    for d in 0..u.n_rows() {
        if !intersects(z_row.words(), u.row_words(d)) {
            if x_row.get(d) {
                fn_ += 1;
            } else {
                tn += 1;
            }
        }
    }
    Ok((tn, fn_))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn naive_product(z: &BinaryMatrix, u: &BinaryMatrix) -> BinaryMatrix {
        BinaryMatrix::from_fn(z.n_rows(), u.n_rows(), |n, d| {
            (0..z.n_cols()).any(|l| z.get(n, l) && u.get(d, l))
        })
    }

    fn m(rows: &[&[u8]]) -> BinaryMatrix {
        BinaryMatrix::from_rows(rows).unwrap()
    }

    fn arb_matrix(rows: usize, cols: usize) -> impl Strategy<Value = BinaryMatrix> {
        proptest::collection::vec(any::<bool>(), rows * cols)
            .prop_map(move |v| BinaryMatrix::from_fn(rows, cols, |r, c| v[r * cols + c]))
    }

    fn arb_triple() -> impl Strategy<Value = (BinaryMatrix, BinaryMatrix, BinaryMatrix)> {
        (1usize..=16, 1usize..=16, 0usize..=5).prop_flat_map(|(n, d, l)| {
            (arb_matrix(n, d), arb_matrix(n, l), arb_matrix(d, l))
        })
    }

    #[test]
    fn empty_latent_gives_zeros() {
        let z = BinaryMatrix::zeros(3, 0);
        let u = BinaryMatrix::zeros(4, 0);
        assert_eq!(boolean_product(&z, &u).unwrap(), BinaryMatrix::zeros(3, 4));
    }

    #[test]
    fn small_products() {
        assert_eq!(boolean_product(&m(&[&[1]]), &m(&[&[1]])).unwrap(), m(&[&[1]]));
        let z = m(&[&[1, 0], &[0, 1]]);
        let u = m(&[&[1, 0], &[1, 1]]);
        assert_eq!(boolean_product(&z, &u).unwrap(), m(&[&[1, 1], &[0, 1]]));
    }

    #[test]
    fn product_rejects_mismatched_latent() {
        let err = boolean_product(&BinaryMatrix::zeros(2, 2), &BinaryMatrix::zeros(2, 3));
        assert!(matches!(err, Err(Error::Shape(_))));
    }

    #[test]
    fn counts_on_hand_example() {
        let x = m(&[&[1, 0], &[1, 1]]);
        let z = m(&[&[1, 0], &[0, 1]]);
        let u = m(&[&[1, 0], &[1, 1]]);
        let c = prediction_counts(&x, &z, &u).unwrap();
        assert_eq!(c, PredictionCounts { tp: 2, fp: 1, tn: 0, fn_: 1 });
    }

    #[test]
    fn counts_all_ones_against_empty_factors() {
        let x = BinaryMatrix::ones(3, 5);
        let c = prediction_counts(&x, &BinaryMatrix::zeros(3, 0), &BinaryMatrix::zeros(5, 0)).unwrap();
        assert_eq!(c, PredictionCounts { tp: 0, fp: 0, tn: 0, fn_: 15 });
    }

    #[test]
    fn counts_reject_bad_shapes() {
        let x = BinaryMatrix::zeros(3, 5);
        let r = prediction_counts(&x, &BinaryMatrix::zeros(2, 1), &BinaryMatrix::zeros(5, 1));
        assert!(r.is_err());
    }

    #[test]
    fn negative_counts_examples() {
        let x = BitVector::from_bools(&[true, false, true]);
        let z = BitVector::from_bools(&[true]);
        let u = m(&[&[1], &[0], &[0]]);
        assert_eq!(row_negative_counts(x.as_row(), z.as_row(), &u).unwrap(), (1, 1));

        let z0 = BitVector::from_bools(&[false]);
        assert_eq!(row_negative_counts(x.as_row(), z0.as_row(), &u).unwrap(), (1, 2));

        let full = BinaryMatrix::ones(3, 1);
        assert_eq!(row_negative_counts(x.as_row(), z.as_row(), &full).unwrap(), (0, 0));

        assert!(row_negative_counts(z.as_row(), z.as_row(), &u).is_err());
    }

    #[test]
    fn column_growth_and_removal() {
        let mut a = BinaryMatrix::zeros(3, 62);
        a.set(0, 61, true);
        a.set(2, 0, true);
        a.push_cols(5);
        assert_eq!(a.n_cols(), 67);
        assert!(a.get(0, 61));
        assert!(!a.get(0, 66));
        a.set(1, 66, true);
        a.set(1, 64, true);
        a.remove_col(3);
        assert_eq!(a.n_cols(), 66);
        assert!(a.get(0, 60));
        assert!(a.get(1, 65));
        assert!(a.get(1, 63));
        assert!(a.get(2, 0));
        assert_eq!(a.count_ones(), 4);
    }

    #[test]
    fn rows_push_and_remove() {
        let mut a = m(&[&[1, 0], &[0, 1]]);
        let v = BitVector::from_bools(&[true, true]);
        a.push_row(v.as_row());
        a.remove_row(0);
        assert_eq!(a, m(&[&[0, 1], &[1, 1]]));
        a.push_zero_rows(1);
        assert_eq!(a.n_rows(), 3);
        assert_eq!(a.row(2).count_ones(), 0);
    }

    #[test]
    fn ones_respects_padding() {
        let a = BinaryMatrix::ones(2, 70);
        assert_eq!(a.count_ones(), 140);
        assert_eq!(a.transpose().count_ones(), 140);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(1000))]

        #[test]
        fn product_matches_naive((x, z, u) in arb_triple()) {
            let fast = boolean_product(&z, &u).unwrap();
            prop_assert_eq!(&fast, &naive_product(&z, &u));

            // Transposing the data swaps the roles of the two factors.
            prop_assert_eq!(fast.transpose(), boolean_product(&u, &z).unwrap());

            let c = prediction_counts(&x, &z, &u).unwrap();
            prop_assert_eq!(c.total(), x.n_rows() * x.n_cols());

            let mut rowwise = PredictionCounts::default();
            for n in 0..x.n_rows() {
                let (tn, fn_) = row_negative_counts(x.row(n), z.row(n), &u).unwrap();
                let mut tp = 0;
                let mut fp = 0;
                for d in 0..x.n_cols() {
                    if fast.get(n, d) {
                        if x.get(n, d) { tp += 1 } else { fp += 1 }
                    }
                }
                rowwise += PredictionCounts { tp, fp, tn, fn_ };
            }
            prop_assert_eq!(c, rowwise);
        }

        #[test]
        fn set_then_get(rows in 1usize..20, cols in 1usize..140, r in 0usize..20, c in 0usize..140, v: bool) {
            let r = r % rows;
            let c = c % cols;
            let mut a = BinaryMatrix::ones(rows, cols);
            let before = a.clone();
            a.set(r, c, v);
            prop_assert_eq!(a.get(r, c), v);
            for i in 0..rows {
                for j in 0..cols {
                    if (i, j) != (r, c) {
                        prop_assert_eq!(a.get(i, j), before.get(i, j));
                    }
                }
            }
        }

        #[test]
        fn remove_col_matches_select(a in (1usize..6, 1usize..140).prop_flat_map(|(r, c)| arb_matrix(r, c)), pick in 0usize..140) {
            let c = pick % a.n_cols();
            let keep: Vec<usize> = (0..a.n_cols()).filter(|&j| j != c).collect();
            let mut b = a.clone();
            b.remove_col(c);
            prop_assert_eq!(b, a.select_cols(&keep));
        }
    }
}
