#pragma once

#include <algorithm>
#include <numeric>
#include <string>
#include <vector>

#include "ethladder/common.hpp"

namespace ethladder {

// Hermitian operator with real coefficients in a fixed sector basis,
// compressed row storage.
struct SparseOperator {
    int dim_ = 0;
    std::vector<int> row_ptr;  // size dim_+1
    std::vector<int> col;
    std::vector<double> val;
    std::string label;

    int dim() const { return dim_; }
    std::size_t nonzeros() const { return col.size(); }

    double coefficient(int r, int c) const {
        for (int k = row_ptr[r]; k < row_ptr[r + 1]; ++k)
            if (col[k] == c) return val[k];
        return 0.0;
    }
};

namespace detail {

// Row-major triplet assembly; duplicates within a row are merged.
struct SparseBuilder {
    int dim = 0;
    std::vector<std::vector<std::pair<int, double>>> rows;

    explicit SparseBuilder(int d) : dim(d), rows(d) {}

    void add(int r, int c, double v) { rows[r].emplace_back(c, v); }

    SparseOperator finish(std::string label) {
        SparseOperator op;
        op.dim_ = dim;
        op.label = std::move(label);
        op.row_ptr.assign(dim + 1, 0);
        for (int r = 0; r < dim; ++r) {
            auto& entries = rows[r];
            std::sort(entries.begin(), entries.end());
            std::vector<std::pair<int, double>> merged;
            for (auto& [c, v] : entries) {
                if (!merged.empty() && merged.back().first == c)
                    merged.back().second += v;
                else
                    merged.emplace_back(c, v);
            }
            entries = std::move(merged);
            op.row_ptr[r + 1] = op.row_ptr[r] + static_cast<int>(entries.size());
        }
        op.col.reserve(op.row_ptr[dim]);
        op.val.reserve(op.row_ptr[dim]);
        for (auto& entries : rows)
            for (auto& [c, v] : entries) {
                op.col.push_back(c);
                op.val.push_back(v);
            }
        return op;
    }
};

} // namespace detail

// a*A + b*B over a shared basis.
inline SparseOperator combine(double a, const SparseOperator& A,
                              double b, const SparseOperator& B,
                              std::string label) {
    if (A.dim() != B.dim())
        throw dimension_error("combine: operator dimensions differ");
    detail::SparseBuilder builder(A.dim());
    for (int r = 0; r < A.dim(); ++r) {
        for (int k = A.row_ptr[r]; k < A.row_ptr[r + 1]; ++k)
            builder.add(r, A.col[k], a * A.val[k]);
        for (int k = B.row_ptr[r]; k < B.row_ptr[r + 1]; ++k)
            builder.add(r, B.col[k], b * B.val[k]);
    }
    return builder.finish(std::move(label));
}

inline void matvec_into(const SparseOperator& op, const Vec& x, Vec& y) {
    if (x.size() != op.dim())
        throw dimension_error("matvec: vector length does not match operator dimension");
    y.resize(op.dim());
    for (int r = 0; r < op.dim_; ++r) {
        double acc = 0.0;
        for (int k = op.row_ptr[r]; k < op.row_ptr[r + 1]; ++k)
            acc += op.val[k] * x[op.col[k]];
        y[r] = acc;
    }
}

inline void matvec_into(const SparseOperator& op, const CVec& x, CVec& y) {
    if (x.size() != op.dim())
        throw dimension_error("matvec: vector length does not match operator dimension");
    y.resize(op.dim());
    for (int r = 0; r < op.dim_; ++r) {
        Complex acc{0.0, 0.0};
        for (int k = op.row_ptr[r]; k < op.row_ptr[r + 1]; ++k)
            acc += op.val[k] * x[op.col[k]];
        y[r] = acc;
    }
}

inline Vec matvec(const SparseOperator& op, const Vec& x) {
    Vec y;
    matvec_into(op, x, y);
    return y;
}

inline CVec matvec(const SparseOperator& op, const CVec& x) {
    CVec y;
    matvec_into(op, x, y);
    return y;
}

// <psi|A|psi>, real by Hermiticity.
inline double expectation(const SparseOperator& op, const CVec& psi) {
    if (psi.size() != op.dim())
        throw dimension_error("expectation: vector length does not match operator dimension");
    double acc = 0.0;
    for (int r = 0; r < op.dim_; ++r) {
        Complex row{0.0, 0.0};
        for (int k = op.row_ptr[r]; k < op.row_ptr[r + 1]; ++k)
            row += op.val[k] * psi[op.col[k]];
        acc += (std::conj(psi[r]) * row).real();
    }
    return acc;
}

inline double expectation(const SparseOperator& op, const Vec& psi) {
    return psi.dot(matvec(op, psi));
}

inline bool is_hermitian(const SparseOperator& op, double tol = 0.0) {
    for (int r = 0; r < op.dim(); ++r)
        for (int k = op.row_ptr[r]; k < op.row_ptr[r + 1]; ++k)
            if (std::abs(op.coefficient(op.col[k], r) - op.val[k]) > tol)
                return false;
    return true;
}

// Gershgorin interval; always contains the spectrum.
inline std::pair<double, double> gershgorin_interval(const SparseOperator& op) {
    double lo = 0.0, hi = 0.0;
    bool first = true;
    for (int r = 0; r < op.dim(); ++r) {
        double center = 0.0, radius = 0.0;
        for (int k = op.row_ptr[r]; k < op.row_ptr[r + 1]; ++k) {
            if (op.col[k] == r)
                center += op.val[k];
            else
                radius += std::abs(op.val[k]);
        }
        if (first) {
            lo = center - radius;
            hi = center + radius;
            first = false;
        } else {
            lo = std::min(lo, center - radius);
            hi = std::max(hi, center + radius);
        }
    }
    return {lo, hi};
}

inline Mat to_dense(const SparseOperator& op) {
    Mat m = Mat::Zero(op.dim(), op.dim());
    for (int r = 0; r < op.dim(); ++r)
        for (int k = op.row_ptr[r]; k < op.row_ptr[r + 1]; ++k)
            m(r, op.col[k]) += op.val[k];
    return m;
}

} // namespace ethladder
