#pragma once
#include <cstddef>
#include <vector>

#include "uvmap/common.hpp"

namespace uvmap {

// ---------------------------------------------------------------------------
// Matrix — dense row-major double storage
// ---------------------------------------------------------------------------

class Matrix {
public:
    Matrix() = default;
    Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
        : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

    [[nodiscard]] std::size_t rows() const { return rows_; }
    [[nodiscard]] std::size_t cols() const { return cols_; }
    [[nodiscard]] std::size_t size() const { return data_.size(); }

    double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
    double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

    double* data() { return data_.data(); }
    [[nodiscard]] const double* data() const { return data_.data(); }

    double* row(std::size_t r) { return data_.data() + r * cols_; }
    [[nodiscard]] const double* row(std::size_t r) const { return data_.data() + r * cols_; }

    void fill(double v) { std::fill(data_.begin(), data_.end(), v); }

    void resize(std::size_t rows, std::size_t cols) {
        rows_ = rows;
        cols_ = cols;
        data_.assign(rows * cols, 0.0);
    }

private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<double> data_;
};

// out = alpha * op(a) * op(b) + beta * out, where op is optional transpose.
// Shapes are validated; `out` must already have the result shape when beta != 0,
// and is resized otherwise.
void matmul(const Matrix& a, bool transpose_a, const Matrix& b, bool transpose_b,
            Matrix& out, double alpha = 1.0, double beta = 0.0);

// Number of threads the matmul backend may use (1 = serial). Also recorded in
// run manifests so replays can pin the same value.
void set_compute_threads(int n);
int compute_threads();

// Name of the active matmul backend ("openblas" or "builtin"); for diagnostics.
const char* matmul_backend();

}  // namespace uvmap
