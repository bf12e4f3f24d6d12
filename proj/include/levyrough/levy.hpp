#pragma once

#include "levyrough/parallel.hpp"
#include "levyrough/path.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <map>
#include <mutex>
#include <memory>
#include <optional>
#include <random>
#include <string>
#include <vector>

namespace levyrough {

// Jumps exp(r e_i) along level-1 letters with Levy density c |r|^{-1-alpha} dr,
// both signs. Only cutoff < |r| <= upper is simulated or integrated.
struct StableFamily {
    double alpha = 1.5;
    double cutoff = 1e-3;
    double upper = 1.0;
    double intensity = 1.0;
    std::vector<int> letters;  // empty: every letter

    void validate(int d) const;
    std::vector<int> active_letters(int d) const;
    // Mass of a < |r| <= upper on one letter, both signs.
    double letter_mass(double a) const;
    // Integral of |r|^gamma over a < |r| <= upper on one letter.
    double letter_moment(double gamma, double a) const;
    // Inverse CDF of |r| restricted to (a, upper].
    double radius_quantile(double a, double u) const;
};

struct Atom {
    GroupElement point;
    double weight = 0.0;
};

// One jump: either an atom index, or a stable jump r e_letter.
struct JumpDraw {
    int atom = -1;
    int letter = -1;
    double r = 0.0;
};

class JumpMeasure {
public:
    std::vector<Atom> atoms;
    std::optional<StableFamily> stable;

    bool empty() const { return atoms.empty() && !stable; }
    void validate(const Context& ctx) const;
    GroupElement point(const Context& ctx, const JumpDraw& j) const;

    // Pi(U_h^c) with U_h^c = {|xi| > h} or {||x|| > 1}; h < 0 means the whole modelled measure.
    double tail_mass(const Context& ctx, double h) const;
    // Weighted nodes of Pi restricted to U_h^c: atoms exactly, the stable part by Gauss-Legendre.
    void visit(const Context& ctx, double h, const std::function<void(const GroupElement&, double)>& f) const;
    // Same, but hands over the draw so callers can cache per atom.
    void visit_draws(const Context& ctx, double h, const std::function<void(const JumpDraw&, double)>& f) const;
    Eigen::VectorXd xi_integral(const Context& ctx, double h = -1.0) const;
    Eigen::MatrixXd xi_second_moment(const Context& ctx, double h = -1.0) const;

    // Lower limit of |r| for the stable part of U_h^c.
    double stable_lower(const Context& ctx, double h) const;
};

// Draws from Pi restricted to U_h^c, normalised.
class JumpSampler {
public:
    JumpSampler(const Context& ctx, const JumpMeasure& pi, double h = -1.0);
    double mass() const { return mass_; }
    JumpDraw draw(std::mt19937_64& rng) const;

private:
    double mass_ = 0.0;
    double lower_ = 0.0;
    std::optional<StableFamily> stable_;
    std::vector<int> atom_ids_;
    std::vector<int> letters_;
    std::vector<double> cum_;  // cumulative weights: atoms, then letters
};

struct LevyTriplet {
    Context ctx;
    Eigen::MatrixXd A;  // m x m, Lie coordinates
    Eigen::VectorXd B;  // m
    JumpMeasure Pi;

    static LevyTriplet zero(const Context& ctx);
    void validate() const;
    // B - int xi dPi over the modelled measure: the drift left after compensation.
    Eigen::VectorXd compensated_drift() const;
};

// Symmetric square root by spectral decomposition; eigenvalues >= -1e-10 are floored at 0.
Eigen::MatrixXd psd_sqrt(const Eigen::MatrixXd& A);

// Splitting scheme on a grid of n steps: per step the Poisson jumps (uniform times
// inside the step, in increasing order), then exp(sqrt(h) A^{1/2} z + h B~) at the grid time.
class LevySampler {
public:
    explicit LevySampler(const LevyTriplet& t);

    const LevyTriplet& triplet() const { return t_; }
    const Eigen::MatrixXd& root() const { return root_; }
    const std::vector<int>& active_columns() const { return active_; }
    const Eigen::VectorXd& drift() const { return drift_; }
    double jump_rate() const { return jumps_.mass(); }

    // on_jump(t, const JumpDraw&), on_diffusion(t, const Eigen::VectorXd& lie_coords).
    template <class OnJump, class OnDiffusion>
    void run(int n_steps, double T, std::mt19937_64& rng, OnJump&& on_jump, OnDiffusion&& on_diffusion) const;

private:
    LevyTriplet t_;
    Eigen::MatrixXd root_;
    std::vector<int> active_;
    Eigen::VectorXd drift_;
    JumpSampler jumps_;
};

struct SampledPath {
    DiscretePath path;              // cadlag_step
    std::vector<bool> jump_mask;    // per point: true when the increment into it is a Poisson jump
};

SampledPath sample_levy(const LevyTriplet& t, int n_steps, double T, std::uint64_t seed);

// Law of the row variable X_{n1} of an iid array, for every n.
class ArrayFamily {
public:
    virtual ~ArrayFamily() = default;
    virtual std::string name() const = 0;
    virtual const Context& ctx() const = 0;
    virtual GroupElement sample(long n, std::mt19937_64& rng) const = 0;
    // Exact law of X_{n1} as weighted points; false when no finite representation exists.
    virtual bool visit_law(long, const std::function<void(const GroupElement&, double)>&) const {
        return false;
    }
};

using ArrayFamilyPtr = std::shared_ptr<const ArrayFamily>;

// X_{n1} distributed as (w_n/n) mu_n + (1 - w_n/n) law(exp(Y_n)), Y_n = b_n + L R with R iid +-1.
class ApproximatingArray {
public:
    ApproximatingArray(const LevyTriplet& t, long n);

    long n() const { return n_; }
    double h() const { return h_; }
    double w() const { return w_; }
    const Eigen::VectorXd& b() const { return b_; }
    // Active columns of the covariance root.
    const Eigen::MatrixXd& L() const { return L_; }

    GroupElement sample(std::mt19937_64& rng, bool* from_jump = nullptr) const;
    // sup of ||exp(Y_n)|| over the support of Y_n; infinity if too many signs to enumerate.
    double nu_radius() const;
    bool enumerable() const { return L_.cols() <= kMaxSigns; }
    // Jump part by quadrature, diffusion part by enumerating the 2^r sign patterns.
    bool visit_law(const std::function<void(const GroupElement&, double)>& f) const;

    static constexpr int kMaxSigns = 16;

private:
    LevyTriplet t_;
    long n_;
    double h_ = 0.0;
    double w_ = 0.0;
    Eigen::VectorXd b_;
    Eigen::MatrixXd L_;
    std::optional<JumpSampler> mu_;
};

class TripletArray : public ArrayFamily {
public:
    explicit TripletArray(LevyTriplet t) : t_(std::move(t)) { t_.validate(); }
    std::string name() const override { return "approximating"; }
    const Context& ctx() const override { return t_.ctx; }
    GroupElement sample(long n, std::mt19937_64& rng) const override;
    bool visit_law(long n, const std::function<void(const GroupElement&, double)>& f) const override;
    const LevyTriplet& triplet() const { return t_; }
    std::shared_ptr<const ApproximatingArray> array(long n) const;

private:
    LevyTriplet t_;
    mutable std::mutex mu_;
    mutable std::map<long, std::shared_ptr<const ApproximatingArray>> cache_;
};

// X = exp(Y), Y ~ N(mu/n, A/n) on level 1.
class GaussianArray : public ArrayFamily {
public:
    GaussianArray(const Context& ctx, Eigen::VectorXd mu, Eigen::MatrixXd A, int nodes = 20);
    std::string name() const override { return "gaussian"; }
    const Context& ctx() const override { return ctx_; }
    GroupElement sample(long n, std::mt19937_64& rng) const override;
    bool visit_law(long n, const std::function<void(const GroupElement&, double)>& f) const override;
    const Eigen::VectorXd& mu() const { return mu_; }
    const Eigen::MatrixXd& A() const { return A_; }

protected:
    virtual GroupElement transform(const Eigen::VectorXd& y, long n) const;

    Context ctx_;
    Eigen::VectorXd mu_;
    Eigen::MatrixXd A_;
    Eigen::MatrixXd root_;
    int nodes_;
};

// X = S_N(psi(Y)) with psi(y) the segments C_1 y, ..., C_K y.
class NonlinearGaussianArray : public GaussianArray {
public:
    NonlinearGaussianArray(const Context& ctx, Eigen::VectorXd mu, Eigen::MatrixXd A, std::vector<Eigen::MatrixXd> C,
                           int nodes = 20);
    std::string name() const override { return "nonlinear"; }
    // lim n E[xi(X_{n1})] in degree 2: the quadratic part of xi(S_N(psi(y))) against A.
    Eigen::VectorXd limit_drift() const;

protected:
    GroupElement transform(const Eigen::VectorXd& y, long n) const override;

private:
    std::vector<Eigen::MatrixXd> C_;
};

// X = exp(Y) exp(v / n).
class PerturbedArray : public GaussianArray {
public:
    PerturbedArray(const Context& ctx, Eigen::VectorXd mu, Eigen::MatrixXd A, LieElement v, int nodes = 20);
    std::string name() const override { return "perturbed"; }
    const LieElement& v() const { return v_; }

protected:
    GroupElement transform(const Eigen::VectorXd& y, long n) const override;

private:
    LieElement v_;
};

class ConstantArray : public ArrayFamily {
public:
    explicit ConstantArray(const Context& ctx) : ctx_(ctx) {}
    std::string name() const override { return "constant"; }
    const Context& ctx() const override { return ctx_; }
    GroupElement sample(long, std::mt19937_64&) const override { return GroupElement::identity(ctx_); }
    bool visit_law(long, const std::function<void(const GroupElement&, double)>& f) const override {
        f(GroupElement::identity(ctx_), 1.0);
        return true;
    }

private:
    Context ctx_;
};

DiscretePath sample_walk(const ArrayFamily& fam, long n, double T, std::mt19937_64& rng);

// theta(x) = min(far, sum |xi_i|^{q_i}) for ||x|| <= radius, far otherwise.
struct ScalingFunction {
    Eigen::VectorXd q;
    double radius = std::numeric_limits<double>::infinity();
    double far = 1.0;

    // c^2 min |xi|^2.
    static ScalingFunction prototype(const Context& ctx, double c = 1.0);
    void validate(int m) const;
    double operator()(const GroupElement& x) const;
};

struct MomentEstimate {
    double mc = 0.0;
    double stderr_ = 0.0;
    double exact = std::numeric_limits<double>::quiet_NaN();
    bool has_exact() const { return !std::isnan(exact); }
    double best() const { return has_exact() ? exact : mc; }
};

// n E[f(X_{n1})] by MC (with stderr), plus the exact value when the law is finite.
MomentEstimate scaled_moment(const ArrayFamily& fam, long n, const std::function<double(const GroupElement&)>& f,
                             int mc, std::uint64_t seed, int jobs = 1);

struct ScalesRow {
    long n = 0;
    MomentEstimate value;
};

struct ScalesReport {
    std::vector<ScalesRow> rows;
    double slope = 0.0;       // log-log slope of n E[theta] against n
    double tail_slope = 0.0;  // the same over the upper half of n_grid
    bool growing = false;
    double sup = 0.0;
};

ScalesReport scales_check(const ArrayFamily& fam, const ScalingFunction& theta, const std::vector<long>& n_grid,
                          int mc, std::uint64_t seed, int jobs = 1);

// f(x) = max(0, 1 - d(x, center) / radius).
struct BumpFunction {
    GroupElement center;
    double radius = 0.5;
    double operator()(const GroupElement& x) const;
};

struct FeinsilverRow {
    long n = 0;
    std::vector<MomentEstimate> bumps;  // n E[f_k]
    Eigen::VectorXd drift;              // n E[xi]
    Eigen::MatrixXd second;             // n E[xi xi^T]
    double drift_err = 0.0;
    double second_err = 0.0;
    double bump_err = 0.0;
};

struct FeinsilverReport {
    std::vector<double> pi_f;     // Pi(f_k)
    Eigen::VectorXd B;
    Eigen::MatrixXd second_limit;  // A + int xi xi^T dPi
    std::vector<FeinsilverRow> rows;
};

FeinsilverReport feinsilver_probe(const ArrayFamily& fam, const LevyTriplet& t, const std::vector<BumpFunction>& f,
                                  const std::vector<long>& n_grid, int mc, std::uint64_t seed, int jobs = 1);

struct GammaSup {
    double sup = 0.0;
    bool attained = false;
};

struct PvarExponentInput {
    std::vector<int> J;  // basis indices, 0-based
    std::vector<int> K;
    std::vector<GammaSup> gamma_sup;  // length m
};

// J, K and Gamma of a triplet; the stable tail counts with its true index, the cutoff ignored.
PvarExponentInput exponent_input(const LevyTriplet& t, double tol = 1e-12);
// Basis indices k with 1 not in Gamma_k.
std::vector<bool> k_tilde(const std::vector<GammaSup>& g);

struct ExponentTerm {
    std::string condition;  // "i", "ii", "iii", "floor"
    int index = -1;
    double bound = 0.0;
    bool excluded = false;  // p = bound is known to give infinite p-variation
};

struct ExponentReport {
    double p_star = 1.0;
    std::vector<ExponentTerm> terms;
    std::vector<ExponentTerm> binding;
    // "excluded": p = p_star gives infinite p-variation; "unresolved": not decided.
    std::string boundary;
};

ExponentReport min_pvar_exponent(const PvarExponentInput& in, const Context& ctx);

struct DivergenceRow {
    int steps = 0;
    double mean = 0.0;
    double stderr_ = 0.0;
    double partition_sup = std::numeric_limits<double>::quiet_NaN();
    double partition_sup_stderr = std::numeric_limits<double>::quiet_NaN();
};

struct DivergenceReport {
    int coord = 0;
    double q = 2.0;
    std::vector<DivergenceRow> rows;
    double slope = 0.0;                 // of mean against steps
    double partition_slope = std::numeric_limits<double>::quiet_NaN();
};

// Sums of |xi_i(X_{(k-1)h, kh})|^q over uniform meshes. Every mesh must divide the finest one;
// all meshes are read off one path per sample. partition_cap > 0 also computes the sup over
// partitions of the mesh points for meshes up to that size.
DivergenceReport bg_divergence_probe(const LevyTriplet& t, int coord, double q, const std::vector<int>& meshes, int mc,
                                     double T, std::uint64_t seed, int jobs = 1, int partition_cap = 0);

struct TightnessRow {
    double delta = 0.0;
    double h = 0.0;
    double q_hat = 0.0;
    double q_stderr = 0.0;
    double mean_nu = 0.0;
    double nu_stderr = 0.0;
    double bound = 0.0;
    bool pass = false;
};

struct TightnessReport {
    std::vector<TightnessRow> rows;
    bool all_pass = true;
};

// h(delta) = a delta^kappa; walks of n steps on [0, T].
TightnessReport tightness_probe(const ArrayFamily& fam, long n, double T, const std::vector<double>& deltas, double a,
                                double kappa, int mc, std::uint64_t seed, int jobs = 1);

double loglog_slope(const std::vector<double>& x, const std::vector<double>& y);

// ---- implementation of LevySampler::run

template <class OnJump, class OnDiffusion>
void LevySampler::run(int n_steps, double T, std::mt19937_64& rng, OnJump&& on_jump,
                      OnDiffusion&& on_diffusion) const {
    const double h = T / n_steps;
    const double sh = std::sqrt(h);
    const double rate = jumps_.mass() * h;
    std::poisson_distribution<long> poisson(rate > 0 ? rate : 1.0);
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    std::normal_distribution<double> normal(0.0, 1.0);
    Eigen::VectorXd y(drift_.size());
    const Eigen::VectorXd hdrift = h * drift_;
    std::vector<double> when;
    for (int k = 0; k < n_steps; ++k) {
        const double t0 = k * h;
        if (rate > 0) {
            const long K = poisson(rng);
            if (K > 0) {
                when.resize(K);
                for (auto& u : when) {
                    do u = unif(rng);
                    while (u == 0.0);
                }
                std::sort(when.begin(), when.end());
                for (long j = 0; j < K; ++j) {
                    const JumpDraw jd = jumps_.draw(rng);
                    on_jump(t0 + when[j] * h, jd);
                }
            }
        }
        y = hdrift;
        for (int c : active_) y.noalias() += (sh * normal(rng)) * root_.col(c);
        on_diffusion(k + 1 == n_steps ? T : (k + 1) * h, y);
    }
}

} // namespace levyrough
