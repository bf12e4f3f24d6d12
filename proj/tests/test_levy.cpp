#include <doctest.h>

#include "levyrough/errors.hpp"
#include "levyrough/levy.hpp"

#include <algorithm>
#include <cmath>

using namespace levyrough;

namespace {

LevyTriplet brownian(const Context& c, double var = 1.0) {
    LevyTriplet t = LevyTriplet::zero(c);
    for (int i = 0; i < c->d(); ++i) t.A(i, i) = var;
    return t;
}

GroupElement level1_point(const Context& c, std::initializer_list<double> v) {
    Eigen::VectorXd x(c->d());
    int i = 0;
    for (double a : v) x[i++] = a;
    return exp(LieElement::from_level1(c, x));
}

// Two-sample Kolmogorov-Smirnov statistic.
double ks(std::vector<double> a, std::vector<double> b) {
    std::sort(a.begin(), a.end());
    std::sort(b.begin(), b.end());
    std::size_t i = 0, j = 0;
    double best = 0.0;
    while (i < a.size() && j < b.size()) {
        const double x = std::min(a[i], b[j]);
        while (i < a.size() && a[i] <= x) ++i;
        while (j < b.size() && b[j] <= x) ++j;
        best = std::max(best, std::abs(double(i) / a.size() - double(j) / b.size()));
    }
    return best;
}

} // namespace

TEST_CASE("sample_levy trivial triplets") {
    auto c = AlgebraContext::make(2, 3);
    auto zero = sample_levy(LevyTriplet::zero(c), 16, 1.0, 1);
    for (const auto& x : zero.path.points) CHECK(max_abs_diff(x, GroupElement::identity(c)) == 0.0);

    LevyTriplet t = LevyTriplet::zero(c);
    std::mt19937_64 rng(3);
    t.B = random_lie(c, rng).coords();
    auto s = sample_levy(t, 64, 2.0, 5);
    CHECK(max_abs_diff(s.path.endpoint(), exp(LieElement(c, 2.0 * t.B))) < 1e-12);
    CHECK(s.path.kind == PathKind::CadlagStep);
    s.path.validate(true);
}

TEST_CASE("sample_levy level-1 moments match T B and T A") {
    auto c = AlgebraContext::make(2, 2);
    LevyTriplet t = LevyTriplet::zero(c);
    t.A(0, 0) = 0.8;
    t.A(0, 1) = t.A(1, 0) = 0.3;
    t.A(1, 1) = 0.5;
    t.B << 0.4, -0.2, 0.1;
    t.Pi.atoms.push_back({level1_point(c, {0.5, 0.25}), 1.5});
    const double T = 1.5;
    const int n = 100000;
    Eigen::Vector2d s = Eigen::Vector2d::Zero();
    Eigen::Matrix2d s2 = Eigen::Matrix2d::Zero();
    for (int k = 0; k < n; ++k) {
        const auto p = sample_levy(t, 2, T, stream_seed(11, k));
        const Eigen::Vector2d x = xi_coords(p.path.endpoint()).head(2);
        s += x;
        s2 += x * x.transpose();
    }
    const Eigen::Vector2d mean = s / n;
    const Eigen::Matrix2d cov = s2 / n - mean * mean.transpose();
    // level-1 of log X_T: T B plus compensated jumps, covariance T (A + sum w xi xi^T)
    const Eigen::Vector2d g(0.5, 0.25);
    const Eigen::Matrix2d true_cov = T * (t.A.topLeftCorner(2, 2) + 1.5 * g * g.transpose());
    for (int i = 0; i < 2; ++i) {
        const double se = std::sqrt(true_cov(i, i) / n);
        CHECK(std::abs(mean[i] - T * t.B[i]) < 3 * se);
        for (int j = 0; j < 2; ++j) {
            const double se2 = std::sqrt((true_cov(i, i) * true_cov(j, j) + true_cov(i, j) * true_cov(i, j)) / n);
            CHECK(std::abs(cov(i, j) - true_cov(i, j)) < 4 * se2);
        }
    }
}

TEST_CASE("increments over disjoint windows are stationary and independent") {
    auto c = AlgebraContext::make(2, 2);
    LevyTriplet t = brownian(c, 0.7);
    t.Pi.atoms.push_back({level1_point(c, {0.3, -0.6}), 2.0});
    const int n = 10000;
    std::vector<std::vector<double>> w1(3), w2(3);
    double cross = 0.0;
    for (int k = 0; k < n; ++k) {
        const auto p = sample_levy(t, 8, 2.0, stream_seed(12, k));
        const GroupElement mid = p.path.at(1.0);
        const Eigen::VectorXd a = xi_coords(mid);
        const Eigen::VectorXd b = xi_coords(inverse(mid) * p.path.endpoint());
        for (int i = 0; i < 3; ++i) {
            w1[i].push_back(a[i]);
            w2[i].push_back(b[i]);
        }
        cross += a[0] * b[0];
    }
    for (int i = 0; i < 3; ++i) CHECK(ks(w1[i], w2[i]) < 1.95 * std::sqrt(2.0 / n));
    double v1 = 0, v2 = 0;
    for (int k = 0; k < n; ++k) {
        v1 += w1[0][k] * w1[0][k];
        v2 += w2[0][k] * w2[0][k];
    }
    CHECK(std::abs(cross / std::sqrt(v1 * v2)) < 4.0 / std::sqrt(double(n)));
}

TEST_CASE("sample_levy rejects bad input") {
    auto c = AlgebraContext::make(2, 2);
    LevyTriplet t = LevyTriplet::zero(c);
    t.A(0, 0) = -1.0;
    CHECK_THROWS_AS(sample_levy(t, 4, 1.0, 0), ValidationError);
    t = LevyTriplet::zero(c);
    t.Pi.stable = StableFamily{1.5, 0.0};
    CHECK_THROWS_AS(sample_levy(t, 4, 1.0, 0), ValidationError);
    t = LevyTriplet::zero(c);
    t.Pi.atoms.push_back({GroupElement::identity(c), 1.0});
    CHECK_THROWS_AS(t.validate(), ValidationError);
}

TEST_CASE("stable family masses, moments and quantiles") {
    StableFamily s{1.5, 1e-3, 1.0, 0.7, {}};
    auto c = AlgebraContext::make(2, 2);
    JumpMeasure pi;
    pi.stable = s;
    double mass = 0.0, m2 = 0.0, m05 = 0.0;
    pi.visit_draws(c, -1.0, [&](const JumpDraw& j, double w) {
        if (j.letter != 0) return;
        mass += w;
        m2 += w * j.r * j.r;
        m05 += w * std::sqrt(std::abs(j.r));
    });
    CHECK(mass == doctest::Approx(s.letter_mass(1e-3)).epsilon(1e-12));
    CHECK(m2 == doctest::Approx(s.letter_moment(2.0, 1e-3)).epsilon(1e-12));
    CHECK(m05 == doctest::Approx(s.letter_moment(0.5, 1e-3)).epsilon(1e-12));
    CHECK(s.letter_moment(1.5, 0.01) == doctest::Approx(2 * 0.7 * std::log(100.0)));
    CHECK(s.radius_quantile(1e-3, 0.0) == doctest::Approx(1e-3));
    CHECK(s.radius_quantile(1e-3, 1.0) == doctest::Approx(1.0));
    // median of |r|
    std::mt19937_64 rng(4);
    JumpSampler js(c, pi);
    const double med = s.radius_quantile(1e-3, 0.5);
    int below = 0;
    const int n = 20000;
    for (int k = 0; k < n; ++k) below += std::abs(js.draw(rng).r) < med;
    CHECK(std::abs(below - n / 2.0) < 4 * std::sqrt(n / 4.0));
}

TEST_CASE("approximating array with no jumps") {
    auto c = AlgebraContext::make(2, 2);
    LevyTriplet t = brownian(c, 0.6);
    t.B << 0.3, -0.1, 0.2;
    for (long n : {1L, 8L, 64L}) {
        ApproximatingArray a(t, n);
        CHECK(a.w() == 0.0);
        CHECK((a.b() * n - t.B).norm() < 1e-14);
        Eigen::VectorXd mean = Eigen::VectorXd::Zero(3);
        Eigen::MatrixXd second = Eigen::MatrixXd::Zero(3, 3);
        a.visit_law([&](const GroupElement& x, double w) {
            mean += w * xi_coords(x);
            second += w * xi_coords(x) * xi_coords(x).transpose();
        });
        CHECK((mean - a.b()).norm() < 1e-14);
        CHECK((n * (second - mean * mean.transpose()) - t.A).cwiseAbs().maxCoeff() < 1e-12);
    }
    // MC version of the drift condition
    ApproximatingArray a(t, 16);
    std::mt19937_64 rng(5);
    Eigen::VectorXd s = Eigen::VectorXd::Zero(3);
    const int n = 20000;
    for (int k = 0; k < n; ++k) s += xi_coords(a.sample(rng));
    CHECK(std::abs(16 * s[0] / n - t.B[0]) < 3 * 16 * std::sqrt(0.6 / 16 / n));
}

TEST_CASE("approximating array with finite atoms") {
    auto c = AlgebraContext::make(2, 2);
    LevyTriplet t = brownian(c, 0.5);
    const GroupElement g1 = level1_point(c, {0.4, 0.1});
    const GroupElement g2 = level1_point(c, {-0.2, 0.3});
    t.Pi.atoms = {{g1, 1.0}, {g2, 2.0}};
    t.B << 0.1, 0.2, 0.0;
    // small n: Pi(U^c) = 0 so any n works, but h_n > 0 until n/2 >= 3
    ApproximatingArray small(t, 4);
    CHECK(small.h() > 0.0);
    CHECK(small.w() <= 2.0);
    ApproximatingArray big(t, 64);
    CHECK(big.h() == 0.0);
    CHECK(big.w() == doctest::Approx(3.0));

    const long n = 64;
    Eigen::VectorXd drift = Eigen::VectorXd::Zero(3);
    Eigen::MatrixXd second = Eigen::MatrixXd::Zero(3, 3);
    double atom_mass = 0.0;
    big.visit_law([&](const GroupElement& x, double w) {
        const Eigen::VectorXd xi = xi_coords(x);
        drift += n * w * xi;
        second += n * w * xi * xi.transpose();
        if (max_abs_diff(x, g1) < 1e-15 || max_abs_diff(x, g2) < 1e-15) atom_mass += w;
    });
    CHECK(atom_mass == doctest::Approx(3.0 / 64));
    CHECK((drift - t.B).norm() < 1e-12);
    const Eigen::MatrixXd limit = t.A + t.Pi.xi_second_moment(c);
    // n (1 - w/n) b b^T is the only finite-n remainder
    const Eigen::MatrixXd rem = n * (1 - 3.0 / n) * big.b() * big.b().transpose();
    CHECK((second - limit - rem).cwiseAbs().maxCoeff() < 1e-12);

    // MC check of condition (3) and support
    std::mt19937_64 rng(6);
    const int m = 40000;
    double s01 = 0, s01sq = 0;
    const double rad = big.nu_radius();
    for (int k = 0; k < m; ++k) {
        bool jump = false;
        const GroupElement x = big.sample(rng, &jump);
        if (jump) CHECK((max_abs_diff(x, g1) == 0.0 || max_abs_diff(x, g2) == 0.0));
        else CHECK(homogeneous_norm(x) <= rad + 1e-12);
        const Eigen::VectorXd xi = xi_coords(x);
        s01 += n * xi[0] * xi[1];
        s01sq += n * n * xi[0] * xi[0] * xi[1] * xi[1];
    }
    const double mean01 = s01 / m;
    const double se = std::sqrt((s01sq / m - mean01 * mean01) / m);
    CHECK(std::abs(mean01 - limit(0, 1)) < 3 * se + std::abs(rem(0, 1)));
    CHECK(ApproximatingArray(t, 1024).nu_radius() < rad);
}

TEST_CASE("approximating array thresholds") {
    auto c = AlgebraContext::make(2, 2);
    LevyTriplet t = LevyTriplet::zero(c);
    t.Pi.atoms.push_back({level1_point(c, {3.0, 0.0}), 5.0});
    CHECK_THROWS_AS(ApproximatingArray(t, 8), ValidationError);
    ApproximatingArray a(t, 10);
    CHECK(a.w() == 5.0);

    // stable part: h_n solves the tail equation
    LevyTriplet s = LevyTriplet::zero(c);
    s.Pi.stable = StableFamily{1.5, 1e-6, 1.0, 1.0, {0}};
    ApproximatingArray b(s, 64);
    CHECK(b.w() == doctest::Approx(32.0).epsilon(1e-9));
    CHECK(b.h() > 1e-6);
}

TEST_CASE("feinsilver probe") {
    auto c = AlgebraContext::make(2, 2);
    const GroupElement g = level1_point(c, {0.8, -0.4});
    std::vector<BumpFunction> bumps{{g, 0.3}, {level1_point(c, {-1.0, 0.0}), 0.4}};

    auto bm = std::make_shared<TripletArray>(brownian(c));
    auto r0 = feinsilver_probe(*bm, bm->triplet(), bumps, {16, 256}, 0, 1);
    CHECK(r0.pi_f[0] == 0.0);
    CHECK(r0.rows.back().bumps[0].best() < 1e-12);

    LevyTriplet t = LevyTriplet::zero(c);
    t.Pi.atoms.push_back({g, 1.7});
    t.B = 1.7 * xi_coords(g);
    TripletArray ta(t);
    auto r1 = feinsilver_probe(ta, t, bumps, {16, 64, 1024}, 500, 2);
    CHECK(r1.pi_f[0] == doctest::Approx(1.7));
    CHECK(r1.rows.back().bumps[0].best() == doctest::Approx(1.7).epsilon(1e-12));
    CHECK(r1.rows.back().drift_err < 1e-12);

    LevyTriplet drift = LevyTriplet::zero(c);
    drift.B << 0.5, 0.25, -0.3;
    TripletArray da(drift);
    auto r2 = feinsilver_probe(da, drift, {}, {1, 10, 100}, 0, 3);
    for (const auto& row : r2.rows) CHECK(row.drift_err < 1e-12);
    CHECK(r2.rows.back().second_err < 1e-2);
}

TEST_CASE("scales check") {
    auto c = AlgebraContext::make(2, 2);
    LevyTriplet t = brownian(c, 0.5);
    t.A(2, 2) = 0.0;
    TripletArray ta(t);
    ScalingFunction quad;
    quad.q = Eigen::VectorXd::Constant(3, 2.0);
    quad.far = 1e9;
    auto r = scales_check(ta, quad, {4, 16, 64, 256}, 2000, 7);
    for (const auto& row : r.rows) {
        CHECK(row.value.exact == doctest::Approx(1.0).epsilon(1e-9));
        CHECK(std::abs(row.value.mc - 1.0) <= 4 * row.value.stderr_ + 1e-12);
    }
    CHECK_FALSE(r.growing);

    LevyTriplet mix = brownian(c, 0.5);
    mix.Pi.atoms.push_back({level1_point(c, {0.5, 0.5}), 1.0});
    TripletArray ma(mix);
    auto r2 = scales_check(ma, ScalingFunction::prototype(c, 1.0), {8, 64, 512}, 0, 8);
    CHECK_FALSE(r2.growing);
    CHECK(r2.sup < 3.0);

    LevyTriplet st = LevyTriplet::zero(c);
    st.Pi.stable = StableFamily{1.5, 1e-9, 1.0, 1.0, {0}};
    TripletArray sa(st);
    ScalingFunction low;
    low.q = Eigen::VectorXd::Constant(3, 0.5);
    auto r3 = scales_check(sa, low, {16, 64, 256, 1024, 4096}, 0, 9);
    CHECK(r3.growing);
    for (std::size_t i = 1; i < r3.rows.size(); ++i) CHECK(r3.rows[i].value.exact > r3.rows[i - 1].value.exact);
    auto r4 = scales_check(sa, ScalingFunction::prototype(c), {16, 64, 256, 1024, 4096}, 0, 9);
    CHECK_FALSE(r4.growing);

    ScalingFunction bad;
    bad.q = Eigen::VectorXd::Constant(3, 2.5);
    CHECK_THROWS_AS(scales_check(ta, bad, {4}, 1, 1), ValidationError);
}

TEST_CASE("p-variation exponent presets") {
    auto c2 = AlgebraContext::make(2, 2);
    auto r = min_pvar_exponent(exponent_input(brownian(c2)), c2);
    CHECK(r.p_star == 2.0);
    REQUIRE(r.binding.size() == 2);
    CHECK(r.binding[0].condition == "i");
    CHECK(r.boundary == "excluded");

    LevyTriplet st = LevyTriplet::zero(c2);
    st.Pi.stable = StableFamily{1.5, 1e-3, 1.0, 1.0, {}};
    auto rs = min_pvar_exponent(exponent_input(st), c2);
    CHECK(rs.p_star == 1.5);
    CHECK(rs.binding[0].condition == "iii");
    CHECK(rs.boundary == "excluded");

    LevyTriplet drift = LevyTriplet::zero(c2);
    drift.B << 1.0, 0.0, 0.0;
    auto rd = min_pvar_exponent(exponent_input(drift), c2);
    CHECK(rd.p_star == 1.0);
    CHECK(rd.boundary == "unresolved");

    auto c4 = AlgebraContext::make(2, 4);
    LevyTriplet l2 = LevyTriplet::zero(c4);
    l2.A(2, 2) = 1.0;
    auto r4 = min_pvar_exponent(exponent_input(l2), c4);
    CHECK(r4.p_star == 4.0);
    CHECK(r4.binding.back().condition == "i");

    // drift on a degree-3 coordinate: condition (ii), boundary unresolved
    LevyTriplet d3 = LevyTriplet::zero(c4);
    d3.B[c4->basis_begin(3)] = 1.0;
    auto r3 = min_pvar_exponent(exponent_input(d3), c4);
    CHECK(r3.p_star == 3.0);
    CHECK(r3.binding[0].condition == "ii");
    CHECK(r3.boundary == "unresolved");

    // compensated drift: B equal to int xi dPi leaves K empty
    LevyTriplet cp = LevyTriplet::zero(c2);
    const GroupElement g = exp(LieElement::basis(c2, 2));
    cp.Pi.atoms.push_back({g, 2.0});
    cp.B = 2.0 * xi_coords(g);
    CHECK(exponent_input(cp).K.empty());
    CHECK(min_pvar_exponent(exponent_input(cp), c2).p_star == 1.0);

    PvarExponentInput bad;
    bad.gamma_sup.resize(3);
    bad.J = {5};
    CHECK_THROWS_AS(min_pvar_exponent(bad, c2), ValidationError);
}

TEST_CASE("p-variation exponent is monotone") {
    auto c = AlgebraContext::make(3, 3);
    std::mt19937_64 rng(10);
    std::uniform_int_distribution<int> idx(0, c->m() - 1);
    std::uniform_real_distribution<double> u(0.0, 2.0);
    for (int rep = 0; rep < 200; ++rep) {
        PvarExponentInput in;
        in.gamma_sup.resize(c->m());
        for (int k = 0; k < 2; ++k) in.J.push_back(idx(rng));
        for (int k = 0; k < 2; ++k) in.K.push_back(idx(rng));
        for (auto& g : in.gamma_sup) g.sup = u(rng) < 0.5 ? 0.0 : 0.5 * u(rng);
        const double base = min_pvar_exponent(in, c).p_star;
        PvarExponentInput more = in;
        more.J.push_back(idx(rng));
        more.K.push_back(idx(rng));
        auto& g = more.gamma_sup[idx(rng)];
        g.sup = std::min(2.0, g.sup + u(rng));
        CHECK(min_pvar_exponent(more, c).p_star >= base);
    }
}

TEST_CASE("divergence probe") {
    auto c = AlgebraContext::make(2, 2);
    LevyTriplet drift = LevyTriplet::zero(c);
    drift.B << -0.7, 0.2, 0.0;
    auto rd = bg_divergence_probe(drift, 0, 1.0, {4, 16, 64}, 3, 2.0, 1);
    for (const auto& row : rd.rows) CHECK(row.mean == doctest::Approx(1.4).epsilon(1e-12));

    LevyTriplet bm = brownian(c);
    auto rb = bg_divergence_probe(bm, 0, 2.0, {8, 16, 32, 64}, 400, 1.0, 2, 16);
    for (const auto& row : rb.rows) CHECK(std::abs(row.mean - 1.0) < 4 * row.stderr_);
    CHECK(std::abs(rb.slope) < 0.1);
    auto rb1 = bg_divergence_probe(bm, 0, 1.0, {8, 32, 128, 512}, 100, 1.0, 3);
    CHECK(rb1.slope == doctest::Approx(0.5).epsilon(0.05));

    LevyTriplet st = LevyTriplet::zero(c);
    st.Pi.stable = StableFamily{1.5, 5e-3, 1.0, 1.0, {0}};
    auto lo = bg_divergence_probe(st, 0, 1.0, {16, 64, 256, 1024}, 200, 1.0, 4);
    auto hi = bg_divergence_probe(st, 0, 1.9, {16, 64, 256, 1024}, 200, 1.0, 4);
    CHECK(lo.slope > 0.15);
    CHECK(std::abs(hi.slope) < 0.1);

    CHECK_THROWS_AS(bg_divergence_probe(bm, 0, 2.0, {8, 12}, 1, 1.0, 1), ValidationError);
}

TEST_CASE("tightness probe") {
    auto c = AlgebraContext::make(2, 2);
    ConstantArray ca(c);
    auto rc = tightness_probe(ca, 32, 1.0, {0.1, 0.5}, 1.0, 2.0, 10, 1);
    for (const auto& row : rc.rows) {
        CHECK(row.mean_nu == 0.0);
        CHECK(row.pass);
    }
    GaussianArray ga(c, Eigen::VectorXd::Zero(2), Eigen::MatrixXd::Identity(2, 2));
    auto rg = tightness_probe(ga, 64, 1.0, {0.25, 0.5, 1.0}, 1.0, 2.0, 300, 2);
    CHECK(rg.all_pass);
    for (const auto& row : rg.rows) CHECK(row.mean_nu > 0.0);

    // every step of this walk is longer than delta
    std::vector<GroupElement> inc;
    for (int k = 0; k < 10; ++k) inc.push_back(level1_point(c, {k % 2 ? 1.0 : -1.0, 0.0}));
    const DiscretePath w = walk_from_array(c, inc);
    CHECK(nu_delta(w.points, 0.5).count == 10);
}

TEST_CASE("stream seeds") {
    CHECK(stream_seed(1, 0) != stream_seed(1, 1));
    CHECK(stream_seed(1, 0) != stream_seed(2, 0));
    CHECK(stream_seed(7, 9) == stream_seed(7, 9));
    std::vector<double> v{1, 2, 3, 4, 5};
    CHECK(pairwise_sum(v) == 15.0);
}
