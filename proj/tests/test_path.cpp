#include <doctest.h>

#include "levyrough/errors.hpp"
#include "levyrough/path.hpp"

#include <cmath>
#include <functional>
#include <map>

using namespace levyrough;

namespace {

std::vector<Eigen::VectorXd> random_segments(int d, int k, std::mt19937_64& rng) {
    std::normal_distribution<double> g;
    std::vector<Eigen::VectorXd> s;
    for (int i = 0; i < k; ++i) {
        Eigen::VectorXd v(d);
        for (int a = 0; a < d; ++a) v[a] = g(rng);
        s.push_back(v);
    }
    return s;
}

DiscretePath random_walk(const Context& c, int n, std::mt19937_64& rng, double scale = 0.5) {
    std::vector<GroupElement> inc;
    for (int i = 0; i < n; ++i) inc.push_back(random_group(c, rng, scale));
    return walk_from_array(c, inc);
}

double exhaustive_pvar(const std::vector<GroupElement>& pts, double p) {
    const std::size_t n = pts.size();
    const std::size_t inner = n - 2;
    double best = 0.0;
    for (std::size_t mask = 0; mask < (std::size_t{1} << inner); ++mask) {
        std::size_t prev = 0;
        double s = 0.0;
        for (std::size_t i = 1; i < n; ++i) {
            if (i < n - 1 && !(mask >> (i - 1) & 1)) continue;
            s += std::pow(distance(pts[prev], pts[i]), p);
            prev = i;
        }
        best = std::max(best, s);
    }
    return best;
}

std::size_t brute_nu(const std::vector<GroupElement>& pts, double delta) {
    const std::size_t n = pts.size();
    std::map<std::size_t, std::size_t> memo;
    std::function<std::size_t(std::size_t)> g = [&](std::size_t s) -> std::size_t {
        if (auto it = memo.find(s); it != memo.end()) return it->second;
        std::size_t best = 0;
        for (std::size_t a = s; a < n; ++a)
            for (std::size_t b = a + 1; b < n; ++b)
                if (distance(pts[a], pts[b]) > delta) best = std::max(best, 1 + g(b));
        memo[s] = best;
        return best;
    };
    return g(0);
}

Eigen::VectorXd vec2(double a, double b) {
    Eigen::VectorXd v(2);
    v << a, b;
    return v;
}

} // namespace

TEST_CASE("signature of a linear segment") {
    auto c = AlgebraContext::make(2, 4);
    Eigen::VectorXd v = vec2(0.7, -1.2);
    DiscretePath x = signature_lift(c, {v});
    double fact = 1.0;
    for (int k = 1; k <= 4; ++k) {
        fact *= k;
        for (std::size_t i = 0; i < c->level_size(k); ++i) {
            Word w = c->word_at(c->offset(k) + i);
            double prod = 1.0;
            for (int a : w) prod *= v[a];
            CHECK(x.endpoint().coeff(w) == doctest::Approx(prod / fact).epsilon(1e-14));
        }
    }
    CHECK(x.kind == PathKind::LogLinear);
}

TEST_CASE("unit square loop against fine Riemann sums") {
    auto c = AlgebraContext::make(2, 2);
    std::vector<Eigen::VectorXd> loop{vec2(1, 0), vec2(0, 1), vec2(-1, 0), vec2(0, -1)};
    DiscretePath x = signature_lift(c, loop);
    const int fine = 4000;
    double s12 = 0.0, s21 = 0.0;
    Eigen::VectorXd pos = Eigen::VectorXd::Zero(2);
    for (const auto& side : loop)
        for (int k = 0; k < fine; ++k) {
            Eigen::VectorXd dx = side / fine;
            s12 += pos[0] * dx[1];
            s21 += pos[1] * dx[0];
            pos += dx;
        }
    CHECK(x.endpoint().level(1).norm() <= 1e-15);
    CHECK(std::abs(x.endpoint().coeff({0, 1}) - s12) <= 1e-6);
    CHECK(std::abs(x.endpoint().coeff({1, 0}) - s21) <= 1e-6);
    CHECK(x.endpoint().coeff({0, 1}) == doctest::Approx(1.0));
    CHECK(x.endpoint().coeff({1, 0}) == doctest::Approx(-1.0));
}

TEST_CASE("Chen identity") {
    std::mt19937_64 rng(3);
    auto c = AlgebraContext::make(3, 3);
    for (int k = 0; k < 50; ++k) {
        auto a = random_segments(3, 1 + k % 4, rng);
        auto b = random_segments(3, 1 + k % 3, rng);
        auto ab = a;
        ab.insert(ab.end(), b.begin(), b.end());
        GroupElement lhs = signature_lift(c, ab).endpoint();
        GroupElement rhs = signature_lift(c, a).endpoint() * signature_lift(c, b).endpoint();
        CHECK(max_abs_diff(lhs, rhs) <= 1e-10);
        DiscretePath cat = concatenate(signature_lift(c, a), signature_lift(c, b));
        CHECK(max_abs_diff(cat.endpoint(), lhs) <= 1e-10);
        CHECK_NOTHROW(cat.validate(true));
    }
}

TEST_CASE("walk assembly") {
    auto c = AlgebraContext::make(2, 2);
    DiscretePath empty = walk_from_array(c, {});
    CHECK(empty.size() == 1);
    CHECK(max_abs_diff(empty.endpoint(), GroupElement::identity(c)) == 0.0);
    std::mt19937_64 rng(1);
    GroupElement g = random_group(c, rng);
    DiscretePath one = walk_from_array(c, {g});
    CHECK(one.times == std::vector<double>{0.0, 1.0});
    CHECK(max_abs_diff(one.endpoint(), g) == 0.0);
    CHECK(max_abs_diff(one.at(0.999), GroupElement::identity(c)) == 0.0);
    DiscretePath back = walk_from_array(c, {g, inverse(g)});
    CHECK(max_abs_diff(back.endpoint(), GroupElement::identity(c)) <= 1e-14);
    CHECK(back.kind == PathKind::CadlagStep);
}

TEST_CASE("p-variation basics") {
    auto c1 = AlgebraContext::make(1, 1);
    auto pt = [&](double v) { return exp(LieElement::from_level1(c1, Eigen::VectorXd::Constant(1, v))); };
    DiscretePath mono = walk_from_array(c1, {pt(0.3), pt(0.5), pt(0.2)});
    for (double p : {1.0, 1.5, 2.0, 3.0}) CHECK(p_variation(mono, p).value == doctest::Approx(1.0));
    DiscretePath zig = walk_from_array(c1, {pt(1.0), pt(-1.0)});
    CHECK(p_variation(zig, 1.0).value == doctest::Approx(2.0));
    CHECK(p_variation(zig, 1.0).witness == std::vector<std::size_t>{0, 1, 2});
    CHECK_THROWS_AS(p_variation(zig, 0.5), ValidationError);
}

TEST_CASE("p-variation equals exhaustive partitions") {
    std::mt19937_64 rng(4);
    auto c = AlgebraContext::make(2, 2);
    for (int k = 0; k < 60; ++k) {
        const int n = 2 + k % 11;
        DiscretePath x = random_walk(c, n - 1, rng);
        for (double p : {1.0, 2.5, 4.0}) {
            PvarReport r = p_variation(x, p);
            CHECK(r.sum == doctest::Approx(exhaustive_pvar(x.points, p)).epsilon(1e-12));
            double s = 0.0;
            for (std::size_t i = 1; i < r.witness.size(); ++i)
                s += std::pow(distance(x.points[r.witness[i - 1]], x.points[r.witness[i]]), p);
            CHECK(s == doctest::Approx(r.sum).epsilon(1e-9));
            CHECK(r.witness.front() == 0);
            CHECK(r.witness.back() == x.size() - 1);
        }
        double prev = INFINITY;
        for (double p : {1.0, 1.5, 2.0, 2.5, 3.0}) {
            const double v = p_variation(x, p).value;
            CHECK(v <= prev * (1 + 1e-12));
            prev = v;
        }
    }
}

TEST_CASE("p-variation refinement of mixed-grade segments") {
    auto c = AlgebraContext::make(2, 2);
    Eigen::VectorXd l(3);
    l << 1.0, 0.0, 2.0;
    DiscretePath x;
    x.ctx = c;
    x.kind = PathKind::LogLinear;
    x.times = {0.0, 1.0};
    x.points = {GroupElement::identity(c), exp(LieElement(c, l))};
    const double coarse = p_variation(x, 1.0, {5000, 0}).sum;
    const double fine = p_variation(x, 1.0, {5000, 8}).sum;
    CHECK(fine > coarse);
    PvarOptions o;
    o.cap = 2;
    CHECK_THROWS_AS(p_variation(x, 1.0, o), SizeError);
}

TEST_CASE("nu_delta greedy equals brute force") {
    auto c1 = AlgebraContext::make(1, 1);
    auto pt = [&](double v) { return exp(LieElement::from_level1(c1, Eigen::VectorXd::Constant(1, v))); };
    CHECK(nu_delta(walk_from_array(c1, {pt(2.0)}), 1.0).count == 1);
    CHECK(nu_delta(walk_from_array(c1, {pt(1.5), pt(1.5), pt(1.5), pt(1.5)}), 1.0).count == 4);
    CHECK_THROWS_AS(nu_delta(walk_from_array(c1, {}), 0.0), ValidationError);

    std::mt19937_64 rng(9);
    auto c = AlgebraContext::make(2, 2);
    for (int k = 0; k < 80; ++k) {
        DiscretePath x = random_walk(c, 1 + k % 11, rng);
        std::size_t prev = SIZE_MAX;
        for (double delta : {0.1, 0.3, 0.6, 1.0, 2.0}) {
            OscillationReport r = nu_delta(x, delta);
            CHECK(r.count == brute_nu(x.points, delta));
            CHECK(r.count <= prev);
            prev = r.count;
            std::size_t s = 0;
            for (std::size_t t : r.stop_times) {
                double osc = 0.0;
                for (std::size_t i = s; i < t; ++i) osc = std::max(osc, distance(x.points[i], x.points[t]));
                CHECK(osc > delta);
                s = t;
            }
        }
    }
}

TEST_CASE("dyadic upper bound dominates p-variation") {
    auto c = AlgebraContext::make(2, 2);
    CHECK(pvar_upper_bound(walk_from_array(c, {GroupElement::identity(c)}), 2.0) == 0.0);
    auto c1 = AlgebraContext::make(1, 1);
    DiscretePath unit = walk_from_array(c1, {exp(LieElement::from_level1(c1, Eigen::VectorXd::Constant(1, 1.0)))});
    CHECK(pvar_upper_bound(unit, 2.0) >= 1.0);
    std::mt19937_64 rng(10);
    for (int k = 0; k < 50; ++k) {
        DiscretePath x = random_walk(c, 5 + k % 20, rng, 0.3 + 0.05 * (k % 7));
        for (double p : {1.0, 2.0, 2.5}) CHECK(pvar_upper_bound(x, p) >= p_variation(x, p).sum);
    }
}

TEST_CASE("Holder reparametrisation") {
    auto c = AlgebraContext::make(2, 2);
    DiscretePath geo = signature_lift(c, {vec2(1, 0), vec2(0, 1), vec2(-1, 0)}, 3.0);
    geo.validate(true);
    DiscretePath r0 = holder_reparam(geo, 1.0);
    REQUIRE(r0.size() == geo.size());
    for (std::size_t i = 0; i < geo.size(); ++i) CHECK(r0.times[i] == doctest::Approx(geo.times[i]).epsilon(1e-12));

    DiscretePath speeds = signature_lift(c, {vec2(1, 0), vec2(0, 3)}, 2.0);
    DiscretePath r1 = holder_reparam(speeds, 1.0);
    CHECK(r1.times[1] == doctest::Approx(0.5));
    CHECK(r1.times[2] == doctest::Approx(2.0));

    std::mt19937_64 rng(12);
    for (int k = 0; k < 10; ++k) {
        DiscretePath x = signature_lift(c, random_segments(2, 8, rng), 1.0);
        const double p = 2.0;
        DiscretePath y = holder_reparam(x, p);
        CHECK(p_variation(y, p).sum == doctest::Approx(p_variation(x, p).sum).epsilon(1e-12));
        std::vector<GroupElement> pts;
        std::vector<double> times;
        std::vector<std::size_t> stamp;
        pvar_candidates(y, p, 1, pts, times, &stamp);
        const auto prefix = pvar_prefix(pts, p);
        const double total = prefix.back();
        for (std::size_t i = 0; i < y.size(); ++i) {
            CHECK(prefix[stamp[i]] == doctest::Approx(total * y.times[i] / y.T).epsilon(1e-9));
            for (std::size_t j = i + 1; j < y.size(); ++j)
                CHECK(std::pow(distance(y.points[i], y.points[j]), p) <=
                      total * (y.times[j] - y.times[i]) / y.T * (1 + 1e-12));
        }
    }
    DiscretePath flat = walk_from_array(c, {});
    flat.kind = PathKind::LogLinear;
    CHECK_THROWS_AS(holder_reparam(flat, 2.0), ValidationError);
}
