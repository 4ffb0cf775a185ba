#pragma once

// Independent reference computations. Nothing here calls into the code under
// test except for plain data types.

#include <algorithm>
#include <cmath>
#include <numeric>
#include <span>
#include <vector>

#include "fen/core/tensor.hpp"

namespace fen::testing {

inline double dcg_at(std::span<const int> rel_in_order, std::size_t k) {
    double s = 0.0;
    for (std::size_t pos = 0; pos < k; ++pos) s += (std::pow(2.0, rel_in_order[pos]) - 1.0) / std::log2(pos + 2.0);
    return s;
}

/// NDCG@k by enumerating every permutation for the ideal DCG. `long_side`
/// ranks by descending score with relevance = label; otherwise ascending score
/// with relevance = 4 - label. Scores must be distinct.
inline double brute_ndcg(std::span<const int> labels, std::span<const double> scores, std::size_t k, bool long_side) {
    const std::size_t n = labels.size();
    std::vector<int> rel(n);
    for (std::size_t i = 0; i < n; ++i) rel[i] = long_side ? labels[i] : 4 - labels[i];
    std::vector<std::size_t> by_score(n);
    std::iota(by_score.begin(), by_score.end(), 0);
    std::sort(by_score.begin(), by_score.end(), [&](std::size_t a, std::size_t b) {
        return long_side ? scores[a] > scores[b] : scores[a] < scores[b];
    });
    std::vector<int> ranked(n);
    for (std::size_t p = 0; p < n; ++p) ranked[p] = rel[by_score[p]];
    const double dcg = dcg_at(ranked, k);

    std::vector<std::size_t> perm(n);
    std::iota(perm.begin(), perm.end(), 0);
    double best = 0.0;
    do {
        std::vector<int> r(n);
        for (std::size_t p = 0; p < n; ++p) r[p] = rel[perm[p]];
        best = std::max(best, dcg_at(r, k));
    } while (std::next_permutation(perm.begin(), perm.end()));
    return best == 0.0 ? 1.0 : dcg / best;
}

/// Entropy of softmax(labels), the ListNet floor.
inline double softmax_entropy(std::span<const int> labels) {
    double z = 0.0;
    for (int y : labels) z += std::exp(static_cast<double>(y));
    double h = 0.0;
    for (int y : labels) {
        const double p = std::exp(static_cast<double>(y)) / z;
        h -= p * std::log(p);
    }
    return h;
}

struct BruteEwm {
    double mean;
    double std;
};

/// Weighted mean and reliability-corrected std of x[0..t] with weights
/// decay^(t - i), summed directly.
inline BruteEwm brute_ewm(std::span<const double> x, std::size_t t, double decay) {
    double w = 0.0, w2 = 0.0, m = 0.0;
    for (std::size_t i = 0; i <= t; ++i) {
        const double wi = std::pow(decay, static_cast<double>(t - i));
        w += wi;
        w2 += wi * wi;
        m += wi * x[i];
    }
    m /= w;
    double ss = 0.0;
    for (std::size_t i = 0; i <= t; ++i) ss += std::pow(decay, static_cast<double>(t - i)) * (x[i] - m) * (x[i] - m);
    return {m, t == 0 ? std::nan("") : std::sqrt(ss / (w - w2 / w))};
}

using Mat = std::vector<std::vector<double>>;

inline Mat to_mat(const Tensor& t) {
    Mat m(t.rows(), std::vector<double>(t.cols()));
    for (std::size_t i = 0; i < t.rows(); ++i)
        for (std::size_t j = 0; j < t.cols(); ++j) m[i][j] = t(i, j);
    return m;
}

inline Mat mat_mul(const Mat& a, const Mat& b) {
    Mat c(a.size(), std::vector<double>(b[0].size(), 0.0));
    for (std::size_t i = 0; i < a.size(); ++i)
        for (std::size_t k = 0; k < b.size(); ++k)
            for (std::size_t j = 0; j < b[0].size(); ++j) c[i][j] += a[i][k] * b[k][j];
    return c;
}

inline Mat transpose(const Mat& a) {
    Mat t(a[0].size(), std::vector<double>(a.size()));
    for (std::size_t i = 0; i < a.size(); ++i)
        for (std::size_t j = 0; j < a[0].size(); ++j) t[j][i] = a[i][j];
    return t;
}

inline Mat softmax_rows(Mat a) {
    for (auto& row : a) {
        const double mx = *std::max_element(row.begin(), row.end());
        double z = 0.0;
        for (auto& v : row) z += (v = std::exp(v - mx));
        for (auto& v : row) v /= z;
    }
    return a;
}

inline Mat add_bias(Mat a, const Tensor& bias) {
    for (auto& row : a)
        for (std::size_t j = 0; j < row.size(); ++j) row[j] += bias[j];
    return a;
}

inline Mat add(Mat a, const Mat& b) {
    for (std::size_t i = 0; i < a.size(); ++i)
        for (std::size_t j = 0; j < a[i].size(); ++j) a[i][j] += b[i][j];
    return a;
}

inline Mat elu(Mat a) {
    for (auto& row : a)
        for (auto& v : row) v = v > 0 ? v : std::expm1(v);
    return a;
}

inline Mat layer_norm(Mat a, const Tensor& gain, const Tensor& bias, double eps) {
    for (auto& row : a) {
        double m = 0.0;
        for (double v : row) m += v;
        m /= static_cast<double>(row.size());
        double var = 0.0;
        for (double v : row) var += (v - m) * (v - m);
        var /= static_cast<double>(row.size());
        for (std::size_t j = 0; j < row.size(); ++j) row[j] = gain[j] * (row[j] - m) / std::sqrt(var + eps) + bias[j];
    }
    return a;
}

inline Mat concat_cols(const Mat& a, const Mat& b) {
    Mat c = a;
    for (std::size_t i = 0; i < a.size(); ++i) c[i].insert(c[i].end(), b[i].begin(), b[i].end());
    return c;
}

}  // namespace fen::testing
