#include <doctest.h>

#include "levyrough/errors.hpp"
#include "levyrough/interpolation.hpp"

#include <cmath>

using namespace levyrough;

namespace {

DiscretePath random_walk(const Context& c, int n, std::mt19937_64& rng, double scale = 0.5) {
    std::vector<GroupElement> inc;
    for (int i = 0; i < n; ++i) inc.push_back(random_group(c, rng, scale));
    return walk_from_array(c, inc);
}

std::vector<PathFunctionPtr> registered(const Context& c) {
    return {log_linear_pf(c), malcev_pf(c), perturbed_pf_default(c), mcshane_pf(c)};
}

// Largest ratio of phi-path p-variation to jump size over the jumps of x.
double jump_constant(const DiscretePath& x, const PathFunction& phi, double p) {
    double C = 0.0;
    for (std::size_t i = 1; i < x.size(); ++i) {
        GroupElement d = inverse(x.points[i - 1]) * x.points[i];
        const double s = homogeneous_norm(d);
        if (s > 0.0) C = std::max(C, p_variation(phi.apply(d), p).value / s);
    }
    return C;
}

} // namespace

TEST_CASE("path functions start at 1 and end at x") {
    std::mt19937_64 rng(1);
    for (int N : {2, 3}) {
        auto c = AlgebraContext::make(2, N);
        for (const auto& phi : registered(c)) {
            for (int k = 0; k < 40; ++k) {
                GroupElement x = phi->sample_domain(rng);
                REQUIRE(phi->in_domain(x));
                DiscretePath p = phi->apply(x);
                CHECK_NOTHROW(p.validate(true));
                CHECK(p.times.back() == 1.0);
                CHECK(max_abs_diff(p.points.front(), GroupElement::identity(c)) == 0.0);
                CHECK(max_abs_diff(p.points.back(), x) == 0.0);
                // Interior built from segment products, compare the last step too.
                GroupElement rebuilt = p.points[p.size() - 2] * exp(p.segment_log(p.size() - 2));
                CHECK(max_abs_diff(rebuilt, x) <= 1e-10);
            }
        }
    }
}

TEST_CASE("log-linear chord") {
    auto c = AlgebraContext::make(2, 2);
    auto phi = log_linear_pf(c);
    DiscretePath one = phi->apply(GroupElement::identity(c));
    CHECK(max_abs_diff(one.points.back(), GroupElement::identity(c)) == 0.0);
    Eigen::VectorXd v(2);
    v << 0.3, -0.4;
    GroupElement x = exp(LieElement::from_level1(c, v));
    DiscretePath p = phi->apply(x);
    CHECK(max_abs_diff(p.at(0.5), exp(LieElement::from_level1(c, v * 0.5))) <= 1e-15);
    CHECK(phi->approx_constant(1.0, 1.0, 200, 0) == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(phi->p_star() == 2.0);
}

TEST_CASE("Malcev generators and decomposition") {
    for (int N : {2, 3, 4}) {
        auto c = AlgebraContext::make(2, N);
        auto phi = malcev_pf(c);
        for (int i = 0; i < c->m(); ++i)
            CHECK(max_abs_diff(segments_signature(c, phi->generator(i)), exp(LieElement::basis(c, i))) <= 1e-12);
        std::mt19937_64 rng(2);
        for (int k = 0; k < 30; ++k) {
            GroupElement x = random_group(c, rng);
            CHECK(max_abs_diff(phi->compose(phi->decompose(x)), x) <= 1e-12);
            CHECK(max_abs_diff(segments_signature(c, phi->segments(x)), x) <= 1e-10);
        }
    }
    auto c = AlgebraContext::make(2, 2);
    auto phi = malcev_pf(c);
    // the unit square commutator
    CHECK(phi->generator(2).size() == 4);
    DiscretePath g = phi->apply(exp(LieElement::basis(c, 0)));
    CHECK(max_abs_diff(g.points.back(), exp(LieElement::basis(c, 0))) == 0.0);
    const double lam = 0.3;
    GroupElement x = exp(LieElement::basis(c, 2) * lam);
    auto segs = phi->segments(x);
    REQUIRE(segs.size() == phi->generator(2).size());
    for (std::size_t k = 0; k < segs.size(); ++k)
        CHECK((segs[k] - phi->generator(2)[k] * std::sqrt(lam)).norm() <= 1e-15);
}

TEST_CASE("Malcev Holder constant is bounded") {
    auto c = AlgebraContext::make(2, 3);
    auto phi = malcev_pf(c);
    std::mt19937_64 rng(3);
    double worst = 0.0;
    for (int k = 0; k < 200; ++k) {
        GroupElement x = random_group(c, rng, 2.0);
        DiscretePath p = phi->apply(x);
        const double h = holder1_constant(p);
        CHECK(p_variation(p, 1.0, {5000, 0}).value <= h * (1 + 1e-12));
        worst = std::max(worst, h / homogeneous_norm(x));
    }
    CHECK(std::isfinite(worst));
    CHECK(phi->approx_constant(1.0) >= 1.0);
}

TEST_CASE("perturbed path function") {
    auto c = AlgebraContext::make(2, 2);
    auto phi = perturbed_pf_default(c);
    Eigen::VectorXd y(2);
    y << 0.4, 0.1;
    DiscretePath chord = phi->apply(exp(LieElement::from_level1(c, y)));
    CHECK(chord.size() == 3);
    CHECK(max_abs_diff(chord.points[1], chord.points[2]) == 0.0);
    // y = 0, lambda = 1: the stored loop after a constant half
    DiscretePath loop = phi->apply(exp(LieElement::basis(c, 2)));
    CHECK(loop.size() == 6);
    CHECK(loop.points[2].coeff({0}) == doctest::Approx(1.0));
    Tensor bad = exp(LieElement::from_level1(c, y)).tensor();
    CHECK(phi->in_domain(GroupElement::unchecked(bad)));
    auto c3 = AlgebraContext::make(2, 3);
    auto phi3 = perturbed_pf_default(c3);
    Eigen::VectorXd l = Eigen::VectorXd::Zero(c3->m());
    l[2] = 0.5;  // degree-2 component
    CHECK_FALSE(phi3->in_domain(exp(LieElement(c3, l))));
    CHECK_THROWS_AS(phi3->apply(exp(LieElement(c3, l))), DomainError);
    CHECK_THROWS_AS(perturbed_pf(c, LieElement::basis(c, 0), {}), ValidationError);
}

TEST_CASE("custom and McShane rules") {
    auto c = AlgebraContext::make(2, 2);
    auto phi = mcshane_pf(c);
    Eigen::VectorXd y(2);
    y << 1.0, 2.0;
    GroupElement x = exp(LieElement::from_level1(c, Eigen::Vector2d(1.0, 0.0))) *
                     exp(LieElement::from_level1(c, Eigen::Vector2d(0.0, 2.0)));
    CHECK(phi->in_domain(x));
    CHECK_FALSE(phi->in_domain(exp(LieElement::from_level1(c, y))));
    CHECK_THROWS_AS(phi->apply(exp(LieElement::from_level1(c, y))), DomainError);
    CHECK_THROWS_AS(custom_pf(c, {Eigen::MatrixXd::Identity(2, 2) * 0.5}, "half"), ValidationError);
}

TEST_CASE("connect without jumps is the identity") {
    auto c = AlgebraContext::make(2, 2);
    DiscretePath x = walk_from_array(c, {GroupElement::identity(c), GroupElement::identity(c)});
    ConnectResult r = connect(x, *log_linear_pf(c));
    CHECK(r.tau.total == 0.0);
    CHECK(r.path.times == x.times);
    for (std::size_t i = 0; i < x.size(); ++i) CHECK(max_abs_diff(r.path.points[i], x.points[i]) == 0.0);
}

TEST_CASE("connect inserts a single geodesic window") {
    auto c = AlgebraContext::make(2, 2);
    std::mt19937_64 rng(4);
    GroupElement g = random_group(c, rng);
    DiscretePath x;
    x.ctx = c;
    x.kind = PathKind::CadlagStep;
    x.times = {0.0, 0.5};
    x.points = {GroupElement::identity(c), g};
    ConnectResult r = connect(x, *log_linear_pf(c));
    const double size = homogeneous_norm(g);
    REQUIRE(r.tau.window.size() == 1);
    CHECK(r.tau.window[0] < size);
    CHECK(r.path.size() == 3);
    CHECK(max_abs_diff(r.path.endpoint(), g) == 0.0);
    const double s = 1.0 / (1.0 + r.tau.window[0]);
    CHECK(r.path.times[1] == doctest::Approx(0.5 * s));
    CHECK(r.path.times[2] == doctest::Approx((0.5 + r.tau.window[0]) * s));
}

TEST_CASE("connect orders windows by jump size") {
    auto c1 = AlgebraContext::make(1, 1);
    auto pt = [&](double v) { return exp(LieElement::from_level1(c1, Eigen::VectorXd::Constant(1, v))); };
    DiscretePath x = walk_from_array(c1, {pt(0.25), pt(0.75), pt(0.25), pt(0.0625)});
    ConnectResult r = connect(x, *log_linear_pf(c1));
    // size order 0.75 (t=.5), 0.25 (t=.25), 0.25 (t=.75), 0.0625 (t=1)
    REQUIRE(r.tau.r_index.size() == 4);
    CHECK(r.tau.r_index[1] == 1);
    CHECK(r.tau.r_index[0] == 3);
    CHECK(r.tau.r_index[2] == 4);
    CHECK(r.tau.r_index[3] == 5);
    for (std::size_t k = 0; k < 4; ++k) CHECK(r.tau.window[k] == std::ldexp(1.0, -static_cast<int>(r.tau.r_index[k])));
}

TEST_CASE("connect properties on random walks") {
    std::mt19937_64 rng(5);
    auto c = AlgebraContext::make(2, 2);
    for (const auto& phi : {log_linear_pf(c), PathFunctionPtr(malcev_pf(c))}) {
        for (int k = 0; k < 25; ++k) {
            DiscretePath x = random_walk(c, 3 + k % 9, rng);
            ConnectResult r = connect(x, *phi);
            // windows shorter than their jumps
            for (std::size_t j = 0; j < r.tau.window.size(); ++j) {
                std::size_t i = 1;
                while (x.times[i] != r.tau.jump_times[j]) ++i;
                CHECK(r.tau.window[j] < distance(x.points[i - 1], x.points[i]));
            }
            // removing windows recovers the step path
            for (std::size_t i = 0; i < x.size(); ++i) {
                CHECK(r.path.at(r.tau.eval(x.times[i])) .tensor().coeffs() == x.points[i].tensor().coeffs());
                CHECK(r.path.times[r.stamp_index[i]] == r.tau.eval(x.times[i]));
            }
            CHECK(r.path.times.back() == doctest::Approx(x.T));
            // left invariance
            GroupElement g = random_group(c, rng);
            ConnectResult rg = connect(left_translate(g, x), *phi);
            REQUIRE(rg.path.size() == r.path.size());
            for (std::size_t i = 0; i < r.path.size(); ++i) {
                CHECK(rg.path.times[i] == r.path.times[i]);
                CHECK(max_abs_diff(rg.path.points[i], g * r.path.points[i]) <= 1e-12);
            }
            // p-variation inequality with the per-path constant
            for (double p : {1.5, 2.0, 3.0}) {
                const double C = jump_constant(x, *phi, p);
                const double lhs = p_variation(r.path, p).sum;
                const double rhs = connecting_R(C, p) * p_variation(x, p).sum;
                CHECK(lhs <= rhs);
                auto psi = pvar_envelope(*phi, p, C);
                CHECK(psi(0.0) == 0.0);
                CHECK(std::pow(lhs, 1.0 / p) <= psi(p_variation(x, p).value) * (1 + 1e-12));
            }
        }
    }
}

TEST_CASE("connect validation") {
    auto c = AlgebraContext::make(2, 3);
    Eigen::VectorXd l = Eigen::VectorXd::Zero(c->m());
    l[2] = 0.5;
    DiscretePath x = walk_from_array(c, {exp(LieElement(c, l))});
    CHECK_THROWS_WITH_AS(connect(x, *perturbed_pf_default(c)), doctest::Contains("t=1"), DomainError);
    ConnectConfig bad;
    bad.ratio = 1.0;
    CHECK_THROWS_AS(connect(x, *log_linear_pf(c), bad), ValidationError);
    DiscretePath ll = x;
    ll.kind = PathKind::LogLinear;
    CHECK_THROWS_AS(connect(ll, *log_linear_pf(c)), ValidationError);
}

TEST_CASE("jump mask keeps masked increments geodesic") {
    auto c = AlgebraContext::make(2, 2);
    std::mt19937_64 rng(6);
    DiscretePath x = random_walk(c, 4, rng);
    std::vector<bool> mask{false, false, true, false, true};
    ConnectResult r = connect(x, *malcev_pf(c), {}, &mask);
    CHECK(r.tau.window.size() == 2);
    CHECK(max_abs_diff(r.path.endpoint(), x.endpoint()) == 0.0);
    // the first increment is a single segment
    CHECK(r.stamp_index[1] == 1);
}

TEST_CASE("connecting constant") {
    CHECK(connecting_R(0.0, 1.0) == doctest::Approx(4.0));
    CHECK(connecting_R(1.0, 2.0) == doctest::Approx(1 + 4 + 3 + 1 + 4 + 6));
}
