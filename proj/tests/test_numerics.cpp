#include <doctest.h>

#include <cmath>
#include <vector>

#include "chase/gradcheck.hpp"
#include "chase/kernels.hpp"
#include "chase/ops.hpp"
#include "chase/rng.hpp"
#include "chase/tensor.hpp"

using namespace chase;

namespace {

void matmul_reference(const double* a, const double* b, double* c, int n, int k, int m) {
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < m; ++j) {
            double s = 0.0;
            for (int p = 0; p < k; ++p) s += a[i * k + p] * b[p * m + j];
            c[i * m + j] = s;
        }
}

ParamSet small_gru_params(int d, int h, double scale, std::uint64_t seed) {
    ParamSet ps;
    GruSpec spec{d, h, "gru"};
    add_gru_params(ps, spec, Rng(seed));
    for (auto& e : ps.entries())
        for (auto& v : e.value.data) v *= scale;
    return ps;
}

}  // namespace

TEST_CASE("rng streams are independent of draw order and deterministic") {
    Rng a(1234);
    Rng b(1234);
    for (int i = 0; i < 5; ++i) CHECK(a.next_u64() == b.next_u64());

    Rng r1(99);
    Rng child_before = r1.stream("data");
    r1.next_u64();
    r1.uniform01();
    Rng child_after = r1.stream("data");
    CHECK(child_before.next_u64() == child_after.next_u64());

    Rng c1 = Rng(7).stream("init");
    Rng c2 = Rng(7).stream("dropout");
    CHECK(c1.next_u64() != c2.next_u64());
}

TEST_CASE("rng distributions stay in range") {
    Rng r(5);
    double mn = 1.0, mx = 0.0, acc = 0.0;
    for (int i = 0; i < 20000; ++i) {
        double u = r.uniform01();
        mn = std::min(mn, u);
        mx = std::max(mx, u);
        acc += u;
    }
    CHECK(mn >= 0.0);
    CHECK(mx < 1.0);
    CHECK(acc / 20000 == doctest::Approx(0.5).epsilon(0.02));

    Rng g(6);
    double mean = 0.0, m2 = 0.0;
    const int n = 50000;
    for (int i = 0; i < n; ++i) {
        double x = g.normal();
        mean += x;
        m2 += x * x;
    }
    mean /= n;
    CHECK(mean == doctest::Approx(0.0).epsilon(0.02));
    CHECK(m2 / n - mean * mean == doctest::Approx(1.0).epsilon(0.03));

    Rng h(7);
    std::vector<int> counts(5, 0);
    for (int i = 0; i < 5000; ++i) ++counts[static_cast<std::size_t>(h.below(5))];
    for (int c : counts) CHECK(c > 800);
}

TEST_CASE("matmul kernel matches reference across odd shapes") {
    Rng r(42);
    for (int trial = 0; trial < 60; ++trial) {
        int n = static_cast<int>(r.uniform_int(1, 70));
        int k = static_cast<int>(r.uniform_int(1, 70));
        int m = static_cast<int>(r.uniform_int(1, 200));
        std::vector<double> a(static_cast<std::size_t>(n) * k), b(static_cast<std::size_t>(k) * m);
        for (auto& v : a) v = r.uniform(-2, 2);
        for (auto& v : b) v = r.uniform(-2, 2);
        std::vector<double> c(static_cast<std::size_t>(n) * m, 1.0);
        std::vector<double> ref(static_cast<std::size_t>(n) * m);
        matmul_reference(a.data(), b.data(), ref.data(), n, k, m);
        matmul(a.data(), b.data(), c.data(), n, k, m, false);
        for (std::size_t i = 0; i < c.size(); ++i)
            CHECK(c[i] == doctest::Approx(ref[i]).epsilon(1e-12));
        // accumulate path
        matmul(a.data(), b.data(), c.data(), n, k, m, true);
        for (std::size_t i = 0; i < c.size(); ++i)
            CHECK(c[i] == doctest::Approx(2.0 * ref[i]).epsilon(1e-12));
    }
}

TEST_CASE("vector transcendentals match scalar math") {
    Rng r(9);
    std::vector<double> x(1000), y(1000);
    for (auto& v : x) v = r.uniform(-30, 30);
    vtanh(x.data(), y.data(), 1000);
    for (int i = 0; i < 1000; ++i) CHECK(y[i] == doctest::Approx(std::tanh(x[i])).epsilon(1e-12));
    vsigmoid(x.data(), y.data(), 1000);
    for (int i = 0; i < 1000; ++i)
        CHECK(y[i] == doctest::Approx(1.0 / (1.0 + std::exp(-x[i]))).epsilon(1e-12));
}

TEST_CASE("tensor shape invariants") {
    CHECK_THROWS_AS(Tensor({2, 3}, std::vector<double>(5, 0.0)), ShapeError);
    Tensor t = Tensor::zeros({2, 3});
    CHECK(t.numel() == 6);
    CHECK(t.all_finite());
    ParamSet ps;
    ps.add("w", Tensor::zeros({2, 2}));
    CHECK_THROWS_AS(ps.add("w", Tensor::zeros({2, 2})), ConfigError);
    CHECK(ps.grad("w").same_shape(ps.value("w")));
}

TEST_CASE("gru cell with zero parameters") {
    const int d = 6, h = 4;
    ParamSet ps = small_gru_params(d, h, 0.0, 1);
    GruSpec spec{d, h, "gru"};

    Tensor x = Tensor::full({d}, 0.37);
    Tensor h0 = Tensor::zeros({h});
    auto res = gru_cell_forward(x, h0, ps, spec);
    for (double v : res.h.data) CHECK(v == 0.0);
    for (double v : res.z.data) CHECK(v == doctest::Approx(0.5));

    // h_prev = v -> h = 0.5 v  (z = sigmoid(0) = 0.5, candidate = 0)
    Tensor hv = Tensor::zeros({h});
    for (int i = 0; i < h; ++i) hv.data[static_cast<std::size_t>(i)] = 0.1 * (i + 1);
    auto res2 = gru_cell_forward(x, hv, ps, spec);
    for (int i = 0; i < h; ++i)
        CHECK(res2.h.data[static_cast<std::size_t>(i)] ==
              doctest::Approx(0.5 * hv.data[static_cast<std::size_t>(i)]));
}

TEST_CASE("gru cell rejects mismatched dimensions") {
    ParamSet ps = small_gru_params(6, 4, 1.0, 2);
    GruSpec spec{6, 4, "gru"};
    CHECK_THROWS_AS(gru_cell_forward(Tensor::zeros({5}), Tensor::zeros({4}), ps, spec),
                    ShapeError);
}

TEST_CASE("gru sequence gradients match finite differences") {
    const int d = 6, h = 8, B = 3, Tg = 5;
    ParamSet ps = small_gru_params(d, h, 0.7, 3);
    GruSpec spec{d, h, "gru"};

    Rng data(11);
    std::vector<double> xtm(static_cast<std::size_t>(Tg) * B * d);
    for (auto& v : xtm) v = data.uniform(-1, 1);
    // Scalar loss: fixed random weighting of every hidden state.
    std::vector<double> wts(static_cast<std::size_t>(Tg) * B * h);
    for (auto& v : wts) v = data.uniform(-1, 1);

    auto loss_fn = [&]() {
        GruCache cache;
        gru_forward(ps, spec, xtm.data(), B, Tg, cache);
        return dot(cache.hall.data(), wts.data(), static_cast<int>(wts.size()));
    };

    GruCache cache;
    gru_forward(ps, spec, xtm.data(), B, Tg, cache);
    std::vector<double> dhall = wts;
    ps.zero_grads();
    gru_backward(ps, spec, cache, dhall);

    auto report = grad_check(loss_fn, ps, 1e-5, 10000);
    CHECK(report.coordinates_checked == ps.coordinate_count());
    CHECK(report.max_rel_error < 1e-5);
}

TEST_CASE("gaussian nll closed-form values") {
    Tensor x = Tensor::full({4}, 0.3);
    Tensor mu = Tensor::full({4}, 0.3);
    Tensor lv = Tensor::zeros({4});
    // residual vanishes: 0.5 log(2 pi)
    CHECK(gaussian_nll(x, mu, lv) == doctest::Approx(0.9189385332046727).epsilon(1e-12));
    for (auto& v : mu.data) v -= 1.0;
    CHECK(gaussian_nll(x, mu, lv) == doctest::Approx(1.4189385332046727).epsilon(1e-12));
    CHECK_THROWS_AS(gaussian_nll(Tensor::zeros({3}), mu, lv), ShapeError);
}

TEST_CASE("gaussian nll gradient matches finite differences") {
    const int dims = 6;
    ParamSet ps;
    Rng r(13);
    Tensor mu0 = Tensor::zeros({dims}), lv0 = Tensor::zeros({dims});
    for (auto& v : mu0.data) v = r.uniform(-1, 1);
    for (auto& v : lv0.data) v = r.uniform(-1.5, 1.5);
    ps.add("mu", mu0);
    ps.add("lv", lv0);
    std::vector<double> target(dims);
    for (auto& v : target) v = r.uniform(-1, 1);

    auto loss_fn = [&]() {
        return gaussian_nll_row(target.data(), ps.value("mu").ptr(), ps.value("lv").ptr(), dims);
    };
    ps.zero_grads();
    gaussian_nll_row_backward(target.data(), ps.value("mu").ptr(), ps.value("lv").ptr(), dims,
                              1.0, ps.grad("mu").ptr(), ps.grad("lv").ptr());
    auto report = grad_check(loss_fn, ps, 1e-5);
    CHECK(report.max_rel_error < 1e-5);
}

TEST_CASE("logvar clamp freezes gradient outside the window") {
    double x = 0.4, mu = 0.1, lv = 9.5;
    double dmu = 0.0, dlv = 0.0;
    gaussian_nll_row_backward(&x, &mu, &lv, 1, 1.0, &dmu, &dlv);
    CHECK(dlv == 0.0);
    double v1 = gaussian_nll_row(&x, &mu, &lv, 1);
    double lv2 = 8.0;
    CHECK(v1 == gaussian_nll_row(&x, &mu, &lv2, 1));
}

TEST_CASE("softmax rows sum to one within 1e-12") {
    Rng r(17);
    std::vector<double> x(5 * 7);
    for (auto& v : x) v = r.uniform(-700, 700);
    softmax_rows(x.data(), 5, 7);
    for (int i = 0; i < 5; ++i) {
        double s = 0.0;
        for (int j = 0; j < 7; ++j) {
            CHECK(x[i * 7 + j] >= 0.0);
            s += x[i * 7 + j];
        }
        CHECK(std::fabs(s - 1.0) < 1e-12);
    }
}

TEST_CASE("adam zero gradient leaves parameters unchanged") {
    ParamSet ps;
    ps.add("w", Tensor::full({3}, 0.5));
    AdamOptimizer opt(ps, 1e-3);
    opt.step(ps);
    CHECK(opt.step_count() == 1);
    for (double v : ps.value("w").data) CHECK(v == 0.5);
}

TEST_CASE("adam first step with constant gradient moves by about lr") {
    ParamSet ps;
    ps.add("w", Tensor::zeros({4}));
    AdamOptimizer opt(ps, 1e-3);
    for (auto& g : ps.grad("w").data) g = 0.37;
    opt.step(ps);
    for (double v : ps.value("w").data) CHECK(v == doctest::Approx(-1e-3).epsilon(1e-4));
    for (double g : ps.grad("w").data) CHECK(g == 0.0);
}

TEST_CASE("adam drives a quadratic bowl to the origin") {
    ParamSet ps;
    ps.add("w", Tensor::full({8}, 1.0));
    AdamOptimizer opt(ps, 1e-2);
    for (int it = 0; it < 2000; ++it) {
        auto& w = ps.value("w");
        auto& g = ps.grad("w");
        for (std::size_t i = 0; i < w.data.size(); ++i) g.data[i] = 2.0 * w.data[i];
        opt.step(ps);
    }
    double norm = 0.0;
    for (double v : ps.value("w").data) norm += v * v;
    CHECK(std::sqrt(norm) < 1e-3);
}

TEST_CASE("grad_check is exact for a linear loss") {
    ParamSet ps;
    Rng r(23);
    Tensor w = Tensor::zeros({50});
    for (auto& v : w.data) v = r.uniform(-1, 1);
    ps.add("w", w);
    std::vector<double> c(50);
    for (auto& v : c) v = r.uniform(-2, 2);
    auto loss_fn = [&]() { return dot(ps.value("w").ptr(), c.data(), 50); };
    ps.zero_grads();
    for (int i = 0; i < 50; ++i)
        ps.grad("w").data[static_cast<std::size_t>(i)] = c[static_cast<std::size_t>(i)];
    auto report = grad_check(loss_fn, ps, 1e-5);
    CHECK(report.max_rel_error < 1e-9);
}

TEST_CASE("grad_check flags non-finite losses") {
    ParamSet ps;
    ps.add("w", Tensor::full({2}, 2.0));
    auto loss_fn = [&]() { return std::log(-1.0); };
    CHECK_THROWS_AS(grad_check(loss_fn, ps, 1e-5), NumericalError);
}

TEST_CASE("dropout mask is inverted and seeded") {
    Rng r(31);
    std::vector<double> mask(20000);
    Rng use = r.stream("dropout");
    dropout_mask(use, 0.25, mask.data(), 20000);
    int zeros = 0;
    double mean = 0.0;
    for (double v : mask) {
        if (v == 0.0)
            ++zeros;
        else
            CHECK(v == doctest::Approx(1.0 / 0.75));
        mean += v;
    }
    CHECK(zeros / 20000.0 == doctest::Approx(0.25).epsilon(0.05));
    CHECK(mean / 20000.0 == doctest::Approx(1.0).epsilon(0.02));

    std::vector<double> mask2(20000);
    Rng use2 = r.stream("dropout");
    dropout_mask(use2, 0.25, mask2.data(), 20000);
    CHECK(mask == mask2);
}

TEST_CASE("softplus limits") {
    CHECK(softplus(0.0) == doctest::Approx(std::log(2.0)).epsilon(1e-14));
    CHECK(softplus(50.0) == doctest::Approx(50.0).epsilon(1e-12));
    CHECK(softplus(-60.0) == doctest::Approx(0.0).epsilon(1e-12));
    CHECK(softplus(-60.0) > 0.0);
}
