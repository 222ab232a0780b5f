#pragma once

#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace felab {

/// Probabilities below this are floored before taking logs.
inline constexpr double kLogFloor = 1e-16;

struct ModelError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Dense column-major matrix. Columns are the conditioning variable
/// (hidden state), rows the conditioned one (outcome / next state).
class Matrix {
public:
    Matrix() = default;
    Matrix(int rows, int cols, double fill = 0.0)
        : rows_(rows), cols_(cols), data_(static_cast<std::size_t>(rows) * cols, fill) {}

    int rows() const { return rows_; }
    int cols() const { return cols_; }

    double& operator()(int r, int c) { return data_[static_cast<std::size_t>(c) * rows_ + r]; }
    double operator()(int r, int c) const { return data_[static_cast<std::size_t>(c) * rows_ + r]; }

    std::span<double> col(int c) { return {data_.data() + static_cast<std::size_t>(c) * rows_, static_cast<std::size_t>(rows_)}; }
    std::span<const double> col(int c) const { return {data_.data() + static_cast<std::size_t>(c) * rows_, static_cast<std::size_t>(rows_)}; }

    std::vector<double>& data() { return data_; }
    const std::vector<double>& data() const { return data_; }

    /// y = M x  (rows() result, x has cols() entries).
    void multiply(std::span<const double> x, std::span<double> y) const;
    /// y = M^T x (cols() result, x has rows() entries).
    void multiply_transposed(std::span<const double> x, std::span<double> y) const;

private:
    int rows_ = 0, cols_ = 0;
    std::vector<double> data_;
};

double log_safe(double x);

/// Stabilized softmax (max-subtraction); returns a normalized vector.
std::vector<double> softmax(std::span<const double> x);
void softmax_inplace(std::vector<double>& x);

/// KL(q || p) in nats; p is floored at kLogFloor. Throws on size mismatch.
double kl_divergence(std::span<const double> q, std::span<const double> p);

/// Shannon entropy of a probability vector, in nats.
double entropy(std::span<const double> p);

/// Normalize each column to sum 1. Throws ModelError naming the first
/// column whose sum is not positive. `label` names the array in errors.
void normalize_columns_inplace(Matrix& m, const std::string& label = "matrix");
Matrix normalize_counts(const Matrix& counts, const std::string& label = "counts");

void normalize_inplace(std::vector<double>& v);

double dot(std::span<const double> a, std::span<const double> b);

} // namespace felab
