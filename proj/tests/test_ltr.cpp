#include "catch_amalgamated.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "fen/ltr/ranking.hpp"
#include "gradcheck.hpp"
#include "oracles.hpp"

using namespace fen;
using Catch::Matchers::WithinAbs;

namespace {

std::vector<double> distinct_scores(std::size_t n, std::mt19937_64& rng) {
    std::vector<double> s(n);
    for (auto& v : s) v = ad::unit_uniform(rng) * 10.0 - 5.0;
    return s;
}

}  // namespace

TEST_CASE("quintiles: forced split of ten ascending returns", "[ltr]") {
    std::vector<double> r{1, 2, 3, 4, 5, 6, 7, 8, 9, 10};
    CHECK(assign_quintiles(r) == std::vector<int>{0, 0, 1, 1, 2, 2, 3, 3, 4, 4});
}

TEST_CASE("quintiles: equal returns fall back to id order", "[ltr]") {
    std::vector<double> r(10, 0.01);
    std::vector<std::string> ids{"j", "i", "h", "g", "f", "e", "d", "c", "b", "a"};
    CHECK(assign_quintiles(r, ids) == std::vector<int>{4, 4, 3, 3, 2, 2, 1, 1, 0, 0});
}

TEST_CASE("quintiles: remainder goes to the lowest bins", "[ltr]") {
    std::mt19937_64 rng(3);
    for (std::size_t n = 5; n <= 23; ++n) {
        const auto bins = assign_quintiles(distinct_scores(n, rng));
        std::vector<std::size_t> counts(5, 0);
        for (int b : bins) ++counts[static_cast<std::size_t>(b)];
        for (std::size_t b = 0; b < 5; ++b) CHECK(counts[b] == n / 5 + (b < n % 5 ? 1 : 0));
    }
    const auto bins = assign_quintiles(std::vector<double>{7, 6, 5, 4, 3, 2, 1});
    std::vector<std::size_t> counts(5, 0);
    for (int b : bins) ++counts[static_cast<std::size_t>(b)];
    CHECK(counts == std::vector<std::size_t>{2, 2, 1, 1, 1});
    CHECK_THROWS_AS(assign_quintiles(std::vector<double>{1, 2, 3, 4}), DataError);
}

TEST_CASE("listnet: closed-form entropy at score = label", "[ltr]") {
    const std::vector<int> y{0, 1};
    const std::vector<double> s{0.0, 1.0};
    const double e = std::exp(1.0);
    const double p0 = 1.0 / (1.0 + e), p1 = e / (1.0 + e);
    const double h = -(p0 * std::log(p0) + p1 * std::log(p1));
    CHECK_THAT(listnet_loss(y, s), WithinAbs(h, 1e-12));
    CHECK_THAT(h, WithinAbs(0.5822, 5e-5));
}

TEST_CASE("listnet: nonnegative, entropy floor and shift invariance", "[ltr]") {
    std::mt19937_64 rng(11);
    std::uniform_int_distribution<int> bin(0, 4);
    for (int trial = 0; trial < 200; ++trial) {
        const std::size_t n = 2 + static_cast<std::size_t>(trial % 12);
        std::vector<int> y(n);
        for (auto& v : y) v = bin(rng);
        auto s = distinct_scores(n, rng);
        const double loss = listnet_loss(y, s);
        CHECK(loss >= 0.0);

        std::vector<double> as_real(y.begin(), y.end());
        CHECK_THAT(listnet_loss(y, as_real), WithinAbs(testing::softmax_entropy(y), 1e-10));
        CHECK(loss >= testing::softmax_entropy(y) - 1e-12);

        auto shifted = s;
        const double c = ad::unit_uniform(rng) * 20.0 - 10.0;
        for (auto& v : shifted) v += c;
        CHECK_THAT(listnet_loss(y, shifted), WithinAbs(loss, 1e-12));
    }
}

TEST_CASE("listnet: tape version agrees with the scalar version and its gradient", "[ltr]") {
    std::mt19937_64 rng(5);
    std::uniform_int_distribution<int> bin(0, 4);
    for (int trial = 0; trial < 20; ++trial) {
        const std::size_t n = 3 + static_cast<std::size_t>(trial % 8);
        std::vector<int> y(n);
        for (auto& v : y) v = bin(rng);
        Tensor s = testing::random_tensor({n, 1}, rng);
        ad::Tape tape;
        CHECK_THAT(listnet_loss(tape.param(s), y).value().item(), WithinAbs(listnet_loss(y, s.values()), 1e-12));
        ParamRefs refs{{"scores", &s, true}};
        const auto res = testing::check_gradients(refs, [&](ad::Tape& t) { return listnet_loss(t.param(s), y); });
        CHECK(res.max_rel_error <= 1e-4);
    }
}

TEST_CASE("listnet: mismatched lengths are rejected", "[ltr]") {
    CHECK_THROWS_AS(listnet_loss(std::vector<int>{1, 2}, std::vector<double>{0.1}), ShapeError);
}

TEST_CASE("ndcg: ideal ranking scores 1", "[ltr]") {
    const std::vector<int> y{0, 1, 2, 3, 4, 2};
    const std::vector<double> s{0.0, 1.0, 2.0, 3.0, 4.0, 2.5};
    for (std::size_t k = 1; k <= y.size(); ++k) {
        CHECK_THAT(ndcg_at_k(y, s, k, Direction::Long), WithinAbs(1.0, 1e-15));
        CHECK_THAT(ndcg_at_k(y, s, k, Direction::Short), WithinAbs(1.0, 1e-15));
    }
}

TEST_CASE("ndcg: reversed four-item list equals the enumerated minimum", "[ltr]") {
    const std::vector<int> y{0, 1, 2, 3};
    const std::vector<double> s{4, 3, 2, 1};
    const double expected = (1.0 / std::log2(3.0)) / (7.0 + 3.0 / std::log2(3.0));
    CHECK_THAT(ndcg_at_k(y, s, 2, Direction::Long), WithinAbs(expected, 1e-12));
    CHECK_THAT(testing::brute_ndcg(y, s, 2, true), WithinAbs(expected, 1e-12));

    // Enumerate every ordering of the four scores: the reversed one is the minimum.
    std::vector<double> perm{1, 2, 3, 4};
    double lo = 1.0, hi = 0.0;
    do {
        const double v = ndcg_at_k(y, perm, 2, Direction::Long);
        lo = std::min(lo, v);
        hi = std::max(hi, v);
    } while (std::next_permutation(perm.begin(), perm.end()));
    CHECK_THAT(lo, WithinAbs(expected, 1e-12));
    CHECK_THAT(hi, WithinAbs(1.0, 1e-12));
}

TEST_CASE("ndcg: matches exhaustive permutation oracle for n <= 6", "[ltr]") {
    std::mt19937_64 rng(2024);
    std::uniform_int_distribution<int> bin(0, 4);
    double worst = 0.0;
    for (std::size_t n = 1; n <= 6; ++n) {
        for (int trial = 0; trial < 40; ++trial) {
            std::vector<int> y(n);
            for (auto& v : y) v = bin(rng);
            const auto s = distinct_scores(n, rng);
            for (std::size_t k = 1; k <= n; ++k) {
                worst = std::max(worst, std::abs(ndcg_at_k(y, s, k, Direction::Long) - testing::brute_ndcg(y, s, k, true)));
                worst = std::max(worst, std::abs(ndcg_at_k(y, s, k, Direction::Short) - testing::brute_ndcg(y, s, k, false)));
            }
        }
    }
    CHECK(worst <= 1e-12);
}

TEST_CASE("ndcg: invalid k is rejected", "[ltr]") {
    const std::vector<int> y{0, 1, 2};
    const std::vector<double> s{1, 2, 3};
    CHECK_THROWS_AS(ndcg_at_k(y, s, 0, Direction::Long), DataError);
    CHECK_THROWS_AS(ndcg_at_k(y, s, 4, Direction::Long), DataError);
}

TEST_CASE("signal: top and bottom m by score", "[ltr]") {
    std::vector<double> s{1, 2, 3, 4, 5, 6, 7, 8, 9, 10};
    std::vector<std::string> ids{"a", "b", "c", "d", "e", "f", "g", "h", "i", "j"};
    CHECK(scores_to_signal(s, ids, 2) == std::vector<int>{-1, -1, 0, 0, 0, 0, 0, 0, 1, 1});
    std::vector<double> flat(10, 0.5);
    CHECK(scores_to_signal(flat, ids, 2) == std::vector<int>{-1, -1, 0, 0, 0, 0, 0, 0, 1, 1});
    CHECK_THROWS_AS(scores_to_signal(s, ids, 6), DataError);
}

TEST_CASE("signal: id -> position mapping is invariant to input order", "[ltr]") {
    std::mt19937_64 rng(8);
    std::uniform_int_distribution<int> coarse(0, 3);  // plenty of ties
    for (int trial = 0; trial < 200; ++trial) {
        const std::size_t n = 4 + static_cast<std::size_t>(trial % 9);
        std::vector<double> s(n);
        std::vector<std::string> ids(n);
        for (std::size_t i = 0; i < n; ++i) {
            s[i] = coarse(rng);
            ids[i] = "id" + std::to_string(100 + i);
        }
        const auto base = scores_to_signal(s, ids, n / 4);
        std::vector<std::size_t> perm(n);
        std::iota(perm.begin(), perm.end(), 0);
        std::shuffle(perm.begin(), perm.end(), rng);
        std::vector<double> ps(n);
        std::vector<std::string> pids(n);
        for (std::size_t i = 0; i < n; ++i) {
            ps[i] = s[perm[i]];
            pids[i] = ids[perm[i]];
        }
        const auto moved = scores_to_signal(ps, pids, n / 4);
        for (std::size_t i = 0; i < n; ++i) CHECK(moved[i] == base[perm[i]]);
    }
}
