#pragma once

#include <cstdint>
#include <stdexcept>
#include <vector>

namespace twh {

// Dense matrix over GF(2), rows packed into 64-bit words. The complexes this
// library builds have at most a few dozen generators per grade, so dense
// elimination is more than enough.
class GF2Matrix {
 public:
  GF2Matrix() = default;
  GF2Matrix(std::size_t rows, std::size_t cols)
      : rows_(rows), cols_(cols), words_((cols + 63) / 64), data_(rows * ((cols + 63) / 64), 0) {}

  static GF2Matrix identity(std::size_t n) {
    GF2Matrix m(n, n);
    for (std::size_t i = 0; i < n; ++i) m.set(i, i, true);
    return m;
  }

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }

  bool get(std::size_t r, std::size_t c) const {
    return (data_[r * words_ + c / 64] >> (c % 64)) & 1u;
  }
  void set(std::size_t r, std::size_t c, bool v) {
    std::uint64_t& w = data_[r * words_ + c / 64];
    std::uint64_t mask = std::uint64_t(1) << (c % 64);
    if (v)
      w |= mask;
    else
      w &= ~mask;
  }

  void xor_rows(std::size_t dst, std::size_t src) {
    for (std::size_t k = 0; k < words_; ++k) data_[dst * words_ + k] ^= data_[src * words_ + k];
  }
  void swap_rows(std::size_t a, std::size_t b) {
    if (a == b) return;
    for (std::size_t k = 0; k < words_; ++k)
      std::swap(data_[a * words_ + k], data_[b * words_ + k]);
  }
  bool row_empty(std::size_t r) const {
    for (std::size_t k = 0; k < words_; ++k)
      if (data_[r * words_ + k]) return false;
    return true;
  }

  GF2Matrix multiply(const GF2Matrix& rhs) const {
    if (cols_ != rhs.rows_) throw std::invalid_argument("GF2Matrix: shape mismatch");
    GF2Matrix out(rows_, rhs.cols_);
    for (std::size_t i = 0; i < rows_; ++i)
      for (std::size_t j = 0; j < cols_; ++j)
        if (get(i, j)) out.xor_row_with(i, rhs, j);
    return out;
  }

  bool is_zero() const {
    for (auto w : data_)
      if (w) return false;
    return true;
  }

  bool operator==(const GF2Matrix& o) const {
    return rows_ == o.rows_ && cols_ == o.cols_ && data_ == o.data_;
  }

  // Row echelon rank.
  std::size_t rank() const {
    GF2Matrix m = *this;
    return m.eliminate();
  }

  // In-place elimination; returns rank. Pivot columns are recorded if asked.
  std::size_t eliminate(std::vector<std::size_t>* pivot_cols = nullptr) {
    std::size_t r = 0;
    for (std::size_t c = 0; c < cols_ && r < rows_; ++c) {
      std::size_t piv = r;
      while (piv < rows_ && !get(piv, c)) ++piv;
      if (piv == rows_) continue;
      swap_rows(piv, r);
      for (std::size_t i = 0; i < rows_; ++i)
        if (i != r && get(i, c)) xor_rows(i, r);
      if (pivot_cols) pivot_cols->push_back(c);
      ++r;
    }
    return r;
  }

  // Basis of the null space (as column vectors collected in a matrix with
  // cols() rows; each output column x satisfies A x = 0).
  GF2Matrix kernel_basis() const {
    GF2Matrix m = *this;
    std::vector<std::size_t> pivots;
    m.eliminate(&pivots);
    std::vector<bool> is_pivot(cols_, false);
    for (auto c : pivots) is_pivot[c] = true;
    std::vector<std::size_t> free_cols;
    for (std::size_t c = 0; c < cols_; ++c)
      if (!is_pivot[c]) free_cols.push_back(c);
    GF2Matrix basis(cols_, free_cols.size());
    for (std::size_t j = 0; j < free_cols.size(); ++j) {
      std::size_t fc = free_cols[j];
      basis.set(fc, j, true);
      for (std::size_t r = 0; r < pivots.size(); ++r)
        if (m.get(r, fc)) basis.set(pivots[r], j, true);
    }
    return basis;
  }

  // Solve A x = b if consistent; returns false when b is outside the column
  // space. x has cols() entries.
  bool solve(const std::vector<bool>& b, std::vector<bool>& x) const {
    if (b.size() != rows_) throw std::invalid_argument("GF2Matrix::solve: bad rhs size");
    GF2Matrix aug(rows_, cols_ + 1);
    for (std::size_t i = 0; i < rows_; ++i) {
      for (std::size_t j = 0; j < cols_; ++j) aug.set(i, j, get(i, j));
      aug.set(i, cols_, b[i]);
    }
    std::vector<std::size_t> pivots;
    std::size_t r = 0;
    for (std::size_t c = 0; c < cols_ && r < rows_; ++c) {
      std::size_t piv = r;
      while (piv < rows_ && !aug.get(piv, c)) ++piv;
      if (piv == rows_) continue;
      aug.swap_rows(piv, r);
      for (std::size_t i = 0; i < rows_; ++i)
        if (i != r && aug.get(i, c)) aug.xor_rows(i, r);
      pivots.push_back(c);
      ++r;
    }
    for (std::size_t i = r; i < rows_; ++i)
      if (aug.get(i, cols_)) return false;
    x.assign(cols_, false);
    for (std::size_t i = 0; i < pivots.size(); ++i) x[pivots[i]] = aug.get(i, cols_);
    return true;
  }

 private:
  void xor_row_with(std::size_t dst, const GF2Matrix& src, std::size_t src_row) {
    for (std::size_t k = 0; k < words_ && k < src.words_; ++k)
      data_[dst * words_ + k] ^= src.data_[src_row * src.words_ + k];
  }

  std::size_t rows_ = 0, cols_ = 0, words_ = 0;
  std::vector<std::uint64_t> data_;
};

}  // namespace twh
