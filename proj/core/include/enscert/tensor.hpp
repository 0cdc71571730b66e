#pragma once

#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <vector>

namespace enscert {

using Vector = std::vector<double>;

/// Dense row-major matrix/vector value type shared by the model and the
/// computation graph. A column vector is rows x 1, a scalar is 1 x 1.
struct Tensor {
    int rows = 0;
    int cols = 0;
    std::vector<double> v;

    Tensor() = default;
    Tensor(int r, int c) : rows(r), cols(c), v(static_cast<size_t>(r) * c, 0.0) {}

    static Tensor scalar(double x) {
        Tensor t(1, 1);
        t.v[0] = x;
        return t;
    }
    static Tensor column(const Vector& x) {
        Tensor t(static_cast<int>(x.size()), 1);
        t.v = x;
        return t;
    }
    static Tensor full(int r, int c, double x) {
        Tensor t(r, c);
        for (auto& e : t.v) e = x;
        return t;
    }
    static Tensor one_hot(int dim, int index) {
        Tensor t(dim, 1);
        t.v.at(static_cast<size_t>(index)) = 1.0;
        return t;
    }

    double& at(int r, int c) { return v[static_cast<size_t>(r) * cols + c]; }
    double at(int r, int c) const { return v[static_cast<size_t>(r) * cols + c]; }
    size_t size() const { return v.size(); }
    bool is_scalar() const { return rows == 1 && cols == 1; }
    bool same_shape(const Tensor& o) const { return rows == o.rows && cols == o.cols; }

    double scalar_value() const {
        if (!is_scalar()) throw std::logic_error("tensor is not a scalar");
        return v[0];
    }
};

inline void matvec_into(const Tensor& m, const double* x, double* out) {
    for (int r = 0; r < m.rows; ++r) {
        double acc = 0.0;
        const double* row = m.v.data() + static_cast<size_t>(r) * m.cols;
        for (int c = 0; c < m.cols; ++c) acc += row[c] * x[c];
        out[r] = acc;
    }
}

inline void matvec_transposed_into(const Tensor& m, const double* x, double* out) {
    for (int c = 0; c < m.cols; ++c) out[c] = 0.0;
    for (int r = 0; r < m.rows; ++r) {
        const double* row = m.v.data() + static_cast<size_t>(r) * m.cols;
        for (int c = 0; c < m.cols; ++c) out[c] += row[c] * x[r];
    }
}

inline double dot(const Vector& a, const Vector& b) {
    double acc = 0.0;
    for (size_t i = 0; i < a.size(); ++i) acc += a[i] * b[i];
    return acc;
}

inline double l2_norm(const Vector& a) {
    double acc = 0.0;
    for (double x : a) acc += x * x;
    return std::sqrt(acc);
}

}  // namespace enscert
