#include "felab/math_utils.hpp"

#include <algorithm>
#include <cmath>

namespace felab {

void Matrix::multiply(std::span<const double> x, std::span<double> y) const {
    std::fill(y.begin(), y.end(), 0.0);
    for (int c = 0; c < cols_; ++c) {
        const double xc = x[c];
        if (xc == 0.0) continue;
        const double* col = data_.data() + static_cast<std::size_t>(c) * rows_;
        for (int r = 0; r < rows_; ++r) y[r] += col[r] * xc;
    }
}

void Matrix::multiply_transposed(std::span<const double> x, std::span<double> y) const {
    for (int c = 0; c < cols_; ++c) {
        const double* col = data_.data() + static_cast<std::size_t>(c) * rows_;
        double acc = 0.0;
        for (int r = 0; r < rows_; ++r) acc += col[r] * x[r];
        y[c] = acc;
    }
}

double log_safe(double x) {
    return std::log(std::max(x, kLogFloor));
}

std::vector<double> softmax(std::span<const double> x) {
    std::vector<double> out(x.begin(), x.end());
    softmax_inplace(out);
    return out;
}

void softmax_inplace(std::vector<double>& x) {
    double m = *std::max_element(x.begin(), x.end());
    double sum = 0.0;
    for (double& v : x) {
        v = std::exp(v - m);
        sum += v;
    }
    for (double& v : x) v /= sum;
}

double kl_divergence(std::span<const double> q, std::span<const double> p) {
    if (q.size() != p.size()) throw ModelError("kl_divergence: dimension mismatch");
    double acc = 0.0;
    for (std::size_t i = 0; i < q.size(); ++i) {
        if (q[i] > 0.0) acc += q[i] * (std::log(q[i]) - log_safe(p[i]));
    }
    return acc;
}

double entropy(std::span<const double> p) {
    double acc = 0.0;
    for (double x : p) {
        if (x > 0.0) acc -= x * std::log(x);
    }
    return acc;
}

void normalize_columns_inplace(Matrix& m, const std::string& label) {
    for (int c = 0; c < m.cols(); ++c) {
        auto col = m.col(c);
        double sum = 0.0;
        for (double v : col) {
            if (v < 0.0) throw ModelError(label + ": negative entry in column " + std::to_string(c));
            sum += v;
        }
        if (sum <= 0.0) throw ModelError(label + ": column " + std::to_string(c) + " has zero sum");
        for (double& v : col) v /= sum;
    }
}

Matrix normalize_counts(const Matrix& counts, const std::string& label) {
    Matrix out = counts;
    normalize_columns_inplace(out, label);
    return out;
}

void normalize_inplace(std::vector<double>& v) {
    double sum = 0.0;
    for (double x : v) sum += x;
    if (sum <= 0.0) throw ModelError("normalize: zero-sum vector");
    for (double& x : v) x /= sum;
}

double dot(std::span<const double> a, std::span<const double> b) {
    double acc = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) acc += a[i] * b[i];
    return acc;
}

} // namespace felab
