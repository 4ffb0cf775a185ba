#include "catch_amalgamated.hpp"

#include <cmath>
#include <numeric>
#include <random>

#include "fen/core/adam.hpp"
#include "fen/core/checkpoint.hpp"
#include "fen/core/tape.hpp"
#include "gradcheck.hpp"

using namespace fen;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;

TEST_CASE("matmul forward", "[autodiff]") {
    ad::Tape tape;
    auto eye = tape.constant(Tensor::from_rows({{1, 0}, {0, 1}}));
    auto b = tape.constant(Tensor::from_rows({{3, 4}, {5, 6}}));
    CHECK(ad::matmul(eye, b).value() == Tensor::from_rows({{3, 4}, {5, 6}}));

    auto r = tape.constant(Tensor::from_rows({{1, 2}}));
    auto c = tape.constant(Tensor::from_rows({{3}, {4}}));
    CHECK(ad::matmul(r, c).value().item() == 11.0);
}

TEST_CASE("matmul rejects mismatched inner dimensions with both shapes", "[autodiff]") {
    ad::Tape tape;
    auto a = tape.constant(Tensor::matrix(2, 3));
    auto b = tape.constant(Tensor::matrix(2, 3));
    try {
        ad::matmul(a, b);
        FAIL("expected ShapeError");
    } catch (const ShapeError& e) {
        const std::string msg = e.what();
        CHECK(msg.find("[2x3] x [2x3]") != std::string::npos);
    }
}

TEST_CASE("gradient of sum(A*B) wrt A", "[autodiff]") {
    Tensor a = Tensor::from_rows({{1, 2}, {3, 4}});
    Tensor b = Tensor::from_rows({{1, 1}, {1, 1}});
    ad::Tape tape;
    auto loss = ad::sum(ad::matmul(tape.param(a), tape.constant(b)));
    tape.backward(loss);
    CHECK(*tape.grad(a) == Tensor::from_rows({{2, 2}, {2, 2}}));

    ParamRefs refs{{"a", &a, true}};
    auto res = testing::check_gradients(refs, [&](ad::Tape& t) { return ad::sum(ad::matmul(t.param(a), t.constant(b))); },
                                        1e-6);
    CHECK(res.max_rel_error < 1e-6);
}

TEST_CASE("softmax rows", "[autodiff]") {
    ad::Tape tape;
    auto s = ad::softmax_rows(tape.constant(Tensor::from_rows({{0, 0, 0}, {std::log(2.0), 0, -1e300}})));
    CHECK_THAT(s.value()(0, 0), WithinAbs(1.0 / 3.0, 1e-15));
    CHECK_THAT(s.value()(0, 2), WithinAbs(1.0 / 3.0, 1e-15));
    CHECK_THAT(s.value()(1, 0), WithinAbs(2.0 / 3.0, 1e-15));
    CHECK_THAT(s.value()(1, 1), WithinAbs(1.0 / 3.0, 1e-15));

    auto big = ad::softmax_rows(tape.constant(Tensor::from_rows({{1000, 0}})));
    CHECK(big.value().all_finite());
    CHECK_THAT(big.value()(0, 0), WithinAbs(1.0, 1e-15));
    CHECK_THAT(big.value()(0, 1), WithinAbs(0.0, 1e-15));
}

TEST_CASE("softmax rows sum to one and commute with permutations", "[autodiff][property]") {
    std::mt19937_64 rng(11);
    for (int trial = 0; trial < 200; ++trial) {
        const std::size_t n = 1 + rng() % 12;
        auto v = testing::random_tensor({1, n}, rng, -30, 30);
        std::vector<std::size_t> perm(n);
        std::iota(perm.begin(), perm.end(), 0);
        std::shuffle(perm.begin(), perm.end(), rng);
        Tensor pv({1, n});
        for (std::size_t i = 0; i < n; ++i) pv[i] = v[perm[i]];
        ad::Tape tape;
        const Tensor s = ad::softmax_rows(tape.constant(v)).value();
        const Tensor ps = ad::softmax_rows(tape.constant(pv)).value();
        double total = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            total += s[i];
            CHECK(s[i] >= 0.0);
            CHECK_THAT(ps[i], WithinAbs(s[perm[i]], 1e-15));
        }
        CHECK_THAT(total, WithinAbs(1.0, 1e-12));
    }
}

TEST_CASE("layer norm", "[autodiff]") {
    ad::Tape tape;
    auto g = tape.constant(Tensor::matrix(1, 3, 1.0));
    auto b = tape.constant(Tensor::matrix(1, 3, 0.0));
    auto constant_row = ad::layer_norm(tape.constant(Tensor::from_rows({{5, 5, 5}})), g, b);
    for (double v : constant_row.value().values()) CHECK(v == 0.0);

    auto g2 = tape.constant(Tensor::matrix(1, 2, 1.0));
    auto b2 = tape.constant(Tensor::matrix(1, 2, 0.0));
    auto y = ad::layer_norm(tape.constant(Tensor::from_rows({{1, 3}})), g2, b2, 0.0);
    CHECK_THAT(y.value()[0], WithinAbs(-1.0, 1e-15));
    CHECK_THAT(y.value()[1], WithinAbs(1.0, 1e-15));

    std::mt19937_64 rng(5);
    auto x = testing::random_tensor({4, 6}, rng);
    ad::Tape t2;
    auto z = ad::layer_norm(t2.constant(x), t2.constant(Tensor::matrix(1, 6, 1.0)), t2.constant(Tensor::matrix(1, 6)));
    for (std::size_t i = 0; i < 4; ++i) {
        double m = 0, v = 0;
        for (std::size_t j = 0; j < 6; ++j) m += z.value()(i, j) / 6;
        for (std::size_t j = 0; j < 6; ++j) v += (z.value()(i, j) - m) * (z.value()(i, j) - m) / 6;
        CHECK_THAT(m, WithinAbs(0.0, 1e-12));
        CHECK_THAT(v, WithinAbs(1.0, 1e-5));
    }
}

TEST_CASE("elu", "[autodiff]") {
    ad::Tape tape;
    auto y = ad::elu(tape.constant(Tensor::from_rows({{0.0, 2.0, -std::log(2.0)}})));
    CHECK(y.value()[0] == 0.0);
    CHECK(y.value()[1] == 2.0);
    CHECK_THAT(y.value()[2], WithinAbs(-0.5, 1e-15));
}

TEST_CASE("dropout", "[autodiff]") {
    std::mt19937_64 rng(3);
    ad::Tape tape;
    auto x = tape.constant(testing::random_tensor({7, 5}, rng));
    CHECK(ad::dropout(x, 0.8, false, rng).value() == x.value());
    CHECK(ad::dropout(x, 0.0, true, rng).value() == x.value());
    CHECK_THROWS_AS(ad::dropout(x, 1.0, true, rng), ConfigError);

    // Zero count ~ Binomial(1e5, 0.5): must fall within 3 sigma of the mean.
    const std::size_t n = 100000;
    auto ones = tape.constant(Tensor({1, n}, 1.0));
    std::mt19937_64 seeded(42);
    auto d = ad::dropout(ones, 0.5, true, seeded);
    std::size_t zeros = 0;
    for (double v : d.value().values()) {
        if (v == 0.0) {
            ++zeros;
        } else {
            CHECK(v == 2.0);
        }
    }
    const double mean = 0.5 * n, sigma = std::sqrt(n * 0.25);
    CHECK(std::abs(static_cast<double>(zeros) - mean) <= 3.0 * sigma);
}

TEST_CASE("backward basics", "[autodiff]") {
    Tensor p = Tensor::from_rows({{1, 2, 3}});
    {
        ad::Tape tape;
        tape.backward(ad::sum(tape.param(p)));
        CHECK(*tape.grad(p) == Tensor::from_rows({{1, 1, 1}}));
    }
    {
        ad::Tape tape;
        auto v = tape.param(p);
        tape.backward(ad::sum(ad::mul(v, v)));
        CHECK(*tape.grad(p) == Tensor::from_rows({{2, 4, 6}}));
    }
    {
        ad::Tape tape;
        auto v = tape.param(p);
        CHECK_THROWS_AS(tape.backward(v), ContractError);
    }
    {
        ad::Tape tape;
        auto v = tape.param(p, false);
        tape.backward(ad::sum(v));
        CHECK(tape.grad(p) == nullptr);
    }
}

TEST_CASE("finite differences agree with backward for every op", "[autodiff][property]") {
    std::mt19937_64 rng(2024);
    for (int trial = 0; trial < 20; ++trial) {
        Tensor a = testing::random_tensor({3, 4}, rng);
        Tensor b = testing::random_tensor({4, 2}, rng);
        Tensor c = testing::random_tensor({3, 4}, rng);
        Tensor w = testing::random_tensor({3, 4}, rng);  // fixed weights to make the loss non-trivial
        Tensor gain = testing::random_tensor({1, 4}, rng);
        Tensor bias = testing::random_tensor({1, 4}, rng);
        ParamRefs refs{{"a", &a, true}, {"b", &b, true}, {"c", &c, true}, {"gain", &gain, true}, {"bias", &bias, true}};
        const auto seed = rng();
        auto loss = [&](ad::Tape& t) {
            std::mt19937_64 drop_rng(seed);
            auto va = t.param(a), vb = t.param(b), vc = t.param(c);
            auto wt = t.constant(w);
            auto mix = ad::add(ad::mul(va, vc), ad::sub(va, ad::scale(vc, 0.5)));
            auto ln = ad::layer_norm(mix, t.param(gain), t.param(bias));
            auto e = ad::elu(ad::dropout(ln, 0.3, true, drop_rng));
            auto sm = ad::softmax_rows(ad::add_bias(e, t.param(bias)));
            auto lsm = ad::log_softmax_rows(ad::transpose(ad::matmul(va, vb)));
            auto cat = ad::concat_cols(sm, ad::transpose(lsm));
            auto left = ad::sum(ad::mul(sm, wt));
            return ad::add(ad::add(left, ad::mean(ad::mul(cat, cat))), ad::sum(lsm));
        };
        auto res = testing::check_gradients(refs, loss);
        CHECK(res.max_rel_error <= 1e-4);
        CHECK(res.checked == a.size() + b.size() + c.size() + gain.size() + bias.size());
    }
}

TEST_CASE("adam step", "[autodiff][adam]") {
    SECTION("zero gradient leaves parameters unchanged") {
        Tensor p = Tensor::from_rows({{0.3, -1.2}});
        const Tensor before = p;
        Tensor g(p.shape(), 0.0);
        AdamState st;
        Tensor* ps[] = {&p};
        const Tensor* gs[] = {&g};
        for (int i = 0; i < 5; ++i) adam_step(ps, gs, st, {0.1});
        CHECK(p == before);
    }
    SECTION("single bias-corrected step") {
        Tensor p = Tensor::scalar(1.0);
        Tensor g = Tensor::scalar(1.0);
        AdamState st;
        Tensor* ps[] = {&p};
        const Tensor* gs[] = {&g};
        adam_step(ps, gs, st, {0.1});
        // m_hat = v_hat = 1 after correction: p = 1 - 0.1 * 1 / (1 + 1e-8)
        CHECK_THAT(p.item(), WithinAbs(1.0 - 0.1 / (1.0 + 1e-8), 1e-15));
        CHECK_THAT(p.item(), WithinAbs(0.9, 1e-8));
    }
    SECTION("converges on a convex quadratic") {
        // f(p) = sum (p - target)^2, minimiser = target.
        Tensor p = Tensor::from_rows({{4.0, -3.0, 0.5}});
        const Tensor target = Tensor::from_rows({{1.0, 2.0, -0.25}});
        AdamState st;
        AdamConfig cfg{0.05};
        for (int it = 0; it < 20000; ++it) {
            if (it == 4000) cfg.learning_rate = 1e-3;
            if (it == 8000) cfg.learning_rate = 1e-5;
            ad::Tape tape;
            auto d = ad::sub(tape.param(p), tape.constant(target));
            tape.backward(ad::sum(ad::mul(d, d)));
            Tensor* ps[] = {&p};
            const Tensor* gs[] = {tape.grad(p)};
            adam_step(ps, gs, st, cfg);
        }
        CHECK(max_abs_diff(p, target) <= 1e-6);
    }
    SECTION("null gradient means frozen") {
        Tensor p = Tensor::scalar(2.0);
        const Tensor before = p;
        AdamState st;
        Tensor* ps[] = {&p};
        const Tensor* gs[] = {nullptr};
        adam_step(ps, gs, st, {});
        CHECK(p == before);
    }
    SECTION("shape mismatch") {
        Tensor p = Tensor::matrix(2, 2);
        Tensor g = Tensor::matrix(1, 2);
        AdamState st;
        Tensor* ps[] = {&p};
        const Tensor* gs[] = {&g};
        CHECK_THROWS_AS(adam_step(ps, gs, st, {}), ShapeError);
    }
}

TEST_CASE("checkpoints round-trip bit-exactly", "[autodiff][checkpoint]") {
    std::mt19937_64 rng(9);
    std::vector<NamedTensor> entries;
    for (int i = 0; i < 6; ++i) {
        auto t = testing::random_tensor({1 + rng() % 5, 1 + rng() % 5}, rng, -1e6, 1e6);
        t[0] = i == 0 ? -0.0 : (i == 1 ? 5e-324 : t[0]);
        entries.push_back({"tensor." + std::to_string(i), std::move(t)});
    }
    const auto decoded = decode_checkpoint(encode_checkpoint(entries));
    REQUIRE(decoded.size() == entries.size());
    for (std::size_t i = 0; i < entries.size(); ++i) {
        CHECK(decoded[i].name == entries[i].name);
        CHECK(decoded[i].value.shape() == entries[i].value.shape());
        CHECK(std::memcmp(decoded[i].value.values().data(), entries[i].value.values().data(),
                          entries[i].value.size() * sizeof(double)) == 0);
    }
    CHECK(encode_checkpoint(decoded) == encode_checkpoint(entries));
    CHECK_THROWS_AS(decode_checkpoint("garbage!"), DataError);
    auto bytes = encode_checkpoint(entries);
    bytes.pop_back();
    CHECK_THROWS_AS(decode_checkpoint(bytes), DataError);
}
