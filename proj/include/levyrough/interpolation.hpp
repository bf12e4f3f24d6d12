#pragma once

#include "levyrough/path.hpp"

#include <functional>
#include <memory>
#include <random>
#include <string>
#include <vector>

namespace levyrough {

// A rule x -> unit-time log_linear path from 1 to x.
class PathFunction {
public:
    virtual ~PathFunction() = default;

    virtual std::string name() const = 0;
    virtual const Context& ctx() const = 0;
    virtual bool in_domain(const GroupElement& x, double tol = 1e-9) const = 0;
    // Throws DomainError outside the domain.
    virtual DiscretePath apply(const GroupElement& x) const = 0;
    // Smallest p at which the rule is p-approximating on its whole domain.
    virtual double p_star() const = 0;
    virtual GroupElement sample_domain(std::mt19937_64& rng) const = 0;
    // phi(delta_c x) is delta_c phi(x) for c > 0, so C(r) does not depend on r.
    virtual bool dilation_equivariant() const { return true; }

    // Sampled sup of ||phi(x)||_{p-var} / ||x|| over domain points; frozen seed.
    double approx_constant(double p, double r = 1.0, int samples = 400, int refine = 1) const;
};

using PathFunctionPtr = std::shared_ptr<const PathFunction>;

// Piecewise-linear R^d path given by its segment vectors.
using SegmentPath = std::vector<Eigen::VectorXd>;

SegmentPath reverse_path(const SegmentPath& g);
SegmentPath scale_path(const SegmentPath& g, double c);
GroupElement segments_signature(const Context& ctx, const SegmentPath& g);

PathFunctionPtr log_linear_pf(const Context& ctx);

class MalcevPathFunction : public PathFunction {
public:
    explicit MalcevPathFunction(const Context& ctx);

    std::string name() const override { return "malcev"; }
    const Context& ctx() const override { return ctx_; }
    bool in_domain(const GroupElement&, double) const override { return true; }
    DiscretePath apply(const GroupElement& x) const override;
    double p_star() const override { return 1.0; }
    GroupElement sample_domain(std::mt19937_64& rng) const override;

    // x = exp(lambda_m u_m) ... exp(lambda_1 u_1).
    Eigen::VectorXd decompose(const GroupElement& x) const;
    GroupElement compose(const Eigen::VectorXd& lambda) const;
    // Piecewise-linear path with signature exp(u_i).
    const SegmentPath& generator(int i) const { return gen_[i]; }
    // Segments realising x, ordered gamma_m ... gamma_1, with block boundaries.
    SegmentPath segments(const GroupElement& x, std::vector<std::size_t>* block_end = nullptr) const;

private:
    SegmentPath segments_from(const Eigen::VectorXd& lambda, int first, std::vector<std::size_t>* block_end) const;

    Context ctx_;
    std::vector<SegmentPath> gen_;
};

std::shared_ptr<const MalcevPathFunction> malcev_pf(const Context& ctx);

// Domain exp(y) exp(lambda v), y in R^d, v central; chord then scaled gamma.
PathFunctionPtr perturbed_pf(const Context& ctx, const LieElement& v, const SegmentPath& gamma);
// v the last top-degree basis element, gamma its Malcev generator.
PathFunctionPtr perturbed_pf_default(const Context& ctx);
// psi(y) = segments C_1 y, ..., C_K y with sum C_k = I; domain {S_N(psi(x^1))}.
PathFunctionPtr custom_pf(const Context& ctx, const std::vector<Eigen::MatrixXd>& C, const std::string& name);
// Coordinate staircase e_1 then e_2 ...
PathFunctionPtr mcshane_pf(const Context& ctx);

// Sup over pairs of stamps of d(x_s, x_t) / (t - s).
double holder1_constant(const DiscretePath& path);

struct ConnectConfig {
    double r_first = 0.5;
    double ratio = 0.5;

    // r_i for i >= 1, non-increasing and summable.
    double r(std::size_t i) const;
    void validate() const;
};

struct TimeChange {
    double T = 1.0;
    double total = 0.0;  // sum of inserted window lengths
    std::vector<double> jump_times;
    std::vector<double> window;
    std::vector<std::size_t> r_index;  // n_k

    double raw(double t) const;   // t + sum of windows with t_k <= t
    double eval(double t) const;  // raw rescaled onto [0, T]
    double eval_left(double t) const;
};

struct ConnectResult {
    DiscretePath path;
    TimeChange tau;
    std::vector<std::size_t> stamp_index;  // position of each original stamp in path
};

// jump_mask[i] set: increment i is traversed by phi inside a window; unset:
// followed as a geodesic over its original time interval.
ConnectResult connect(const DiscretePath& x, const PathFunction& phi, const ConnectConfig& cfg = {},
                      const std::vector<bool>* jump_mask = nullptr);

// R = 1 + 2^p + 3^{p-1} + C^p (1 + 2^p + 2 * 3^{p-1}).
double connecting_R(double C, double p);

// psi(r) = R(C)^{1/p} r bounding ||x^phi||_{p-var} by ||x||_{p-var}.
std::function<double(double)> pvar_envelope(const PathFunction& phi, double p, double C);
std::function<double(double)> pvar_envelope(const PathFunction& phi, double p);

} // namespace levyrough
