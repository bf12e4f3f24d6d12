#include "levyrough/interpolation.hpp"

#include "levyrough/errors.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

namespace levyrough {

namespace {

DiscretePath unit_path(const Context& ctx) {
    DiscretePath p;
    p.ctx = ctx;
    p.T = 1.0;
    p.kind = PathKind::LogLinear;
    return p;
}

// Pin the endpoint to x after checking the constructed value agrees.
void pin_endpoint(DiscretePath& p, const GroupElement& x, const std::string& who) {
    const double scale = 1.0 + x.tensor().coeffs().cwiseAbs().maxCoeff();
    if (max_abs_diff(p.points.back(), x) > 1e-9 * scale)
        throw NumericError(who + ": constructed path misses its endpoint");
    p.points.back() = x;
}

int basis_index(const Context& ctx, const Word& w) {
    const auto& b = ctx->lie_basis();
    auto it = std::find(b.begin(), b.end(), w);
    if (it == b.end()) throw NumericError("word is not a Lyndon basis element");
    return static_cast<int>(it - b.begin());
}

class LogLinearPathFunction : public PathFunction {
public:
    explicit LogLinearPathFunction(Context ctx) : ctx_(std::move(ctx)) {}
    std::string name() const override { return "logchord"; }
    const Context& ctx() const override { return ctx_; }
    bool in_domain(const GroupElement&, double) const override { return true; }
    DiscretePath apply(const GroupElement& x) const override {
        DiscretePath p = unit_path(ctx_);
        p.times = {0.0, 1.0};
        p.points = {GroupElement::identity(ctx_), x};
        return p;
    }
    double p_star() const override { return static_cast<double>(ctx_->N()); }
    GroupElement sample_domain(std::mt19937_64& rng) const override { return random_group(ctx_, rng); }

private:
    Context ctx_;
};

class PerturbedPathFunction : public PathFunction {
public:
    PerturbedPathFunction(Context ctx, LieElement v, SegmentPath gamma)
        : ctx_(std::move(ctx)), v_(std::move(v)), gamma_(std::move(gamma)) {
        const int N = ctx_->N();
        if (N < 2) throw ValidationError("perturbed path function needs N >= 2");
        require_same(ctx_, v_.ctx());
        for (int i = 0; i < ctx_->basis_begin(N); ++i)
            if (v_.coords()[i] != 0.0) throw ValidationError("perturbation v must be top-grade");
        vtop_ = v_.level(N);
        if (vtop_.norm() == 0.0) throw ValidationError("perturbation v must be nonzero");
        for (const auto& s : gamma_)
            if (s.size() != ctx_->d()) throw ValidationError("gamma segment dimension mismatch");
        if (max_abs_diff(segments_signature(ctx_, gamma_), exp(v_)) > 1e-9)
            throw ValidationError("gamma signature must equal exp(v)");
    }

    std::string name() const override { return "perturbed"; }
    const Context& ctx() const override { return ctx_; }

    bool split(const GroupElement& x, double tol, Eigen::VectorXd& y, double& lambda) const {
        const LieElement l = log(x);
        const int N = ctx_->N();
        for (int i = ctx_->d(); i < ctx_->basis_begin(N); ++i)
            if (std::abs(l.coords()[i]) > tol) return false;
        const Eigen::VectorXd top = l.level(N);
        lambda = top.dot(vtop_) / vtop_.squaredNorm();
        if ((top - lambda * vtop_).norm() > tol * (1.0 + top.norm())) return false;
        y = l.level(1);
        return true;
    }

    bool in_domain(const GroupElement& x, double tol) const override {
        Eigen::VectorXd y;
        double lambda = 0.0;
        return split(x, tol, y, lambda);
    }

    DiscretePath apply(const GroupElement& x) const override {
        Eigen::VectorXd y;
        double lambda = 0.0;
        if (!split(x, 1e-9, y, lambda)) throw DomainError("perturbed: point outside exp(y)exp(lambda v)");
        DiscretePath p = unit_path(ctx_);
        const GroupElement ey = exp(LieElement::from_level1(ctx_, y));
        p.times = {0.0, 0.5};
        p.points = {GroupElement::identity(ctx_), ey};
        if (lambda == 0.0 || gamma_.empty()) {
            p.times.push_back(1.0);
            p.points.push_back(ey);
        } else {
            const double c = std::pow(std::abs(lambda), 1.0 / ctx_->N());
            const SegmentPath g = scale_path(lambda > 0 ? gamma_ : reverse_path(gamma_), c);
            GroupElement cur = ey;
            for (std::size_t k = 0; k < g.size(); ++k) {
                cur = cur * exp(LieElement::from_level1(ctx_, g[k]));
                p.times.push_back(k + 1 == g.size() ? 1.0 : 0.5 + 0.5 * static_cast<double>(k + 1) / g.size());
                p.points.push_back(cur);
            }
        }
        pin_endpoint(p, x, "perturbed");
        return p;
    }

    double p_star() const override { return 1.0; }

    GroupElement sample_domain(std::mt19937_64& rng) const override {
        std::uniform_real_distribution<double> u(-1.0, 1.0);
        Eigen::VectorXd y(ctx_->d());
        for (int i = 0; i < ctx_->d(); ++i) y[i] = u(rng);
        const double lambda = 0.5 * (u(rng) + 1.0);
        return exp(LieElement::from_level1(ctx_, y) + v_ * lambda);
    }

private:
    Context ctx_;
    LieElement v_;
    SegmentPath gamma_;
    Eigen::VectorXd vtop_;
};

class CustomPathFunction : public PathFunction {
public:
    CustomPathFunction(Context ctx, std::vector<Eigen::MatrixXd> C, std::string name)
        : ctx_(std::move(ctx)), C_(std::move(C)), name_(std::move(name)) {
        const int d = ctx_->d();
        if (C_.empty()) throw ValidationError("custom path function needs at least one matrix");
        Eigen::MatrixXd sum = Eigen::MatrixXd::Zero(d, d);
        for (const auto& c : C_) {
            if (c.rows() != d || c.cols() != d) throw ValidationError("custom matrices must be d x d");
            sum += c;
        }
        if ((sum - Eigen::MatrixXd::Identity(d, d)).cwiseAbs().maxCoeff() > 1e-12)
            throw ValidationError("custom matrices must sum to the identity");
    }

    std::string name() const override { return name_; }
    const Context& ctx() const override { return ctx_; }

    SegmentPath rule(const Eigen::VectorXd& y) const {
        SegmentPath s;
        for (const auto& c : C_) s.push_back(c * y);
        return s;
    }

    bool in_domain(const GroupElement& x, double tol) const override {
        const Eigen::VectorXd y = x.level(1);
        const GroupElement s = segments_signature(ctx_, rule(y));
        return max_abs_diff(s, x) <= tol * (1.0 + x.tensor().coeffs().cwiseAbs().maxCoeff());
    }

    DiscretePath apply(const GroupElement& x) const override {
        if (!in_domain(x, 1e-9)) throw DomainError(name_ + ": point is not the lift of its own rule");
        DiscretePath p = signature_lift(ctx_, rule(x.level(1)), 1.0);
        pin_endpoint(p, x, name_);
        return p;
    }

    double p_star() const override { return 1.0; }

    GroupElement sample_domain(std::mt19937_64& rng) const override {
        std::uniform_real_distribution<double> u(-1.0, 1.0);
        Eigen::VectorXd y(ctx_->d());
        for (int i = 0; i < ctx_->d(); ++i) y[i] = u(rng);
        return segments_signature(ctx_, rule(y));
    }

private:
    Context ctx_;
    std::vector<Eigen::MatrixXd> C_;
    std::string name_;
};

} // namespace

double PathFunction::approx_constant(double p, double r, int samples, int refine) const {
    std::mt19937_64 rng(0x5eedULL);
    PvarOptions opt;
    opt.refine = refine;
    double worst = 0.0;
    for (int s = 0; s < samples; ++s) {
        GroupElement x = sample_domain(rng);
        const double nx = homogeneous_norm(x);
        if (nx == 0.0) continue;
        if (!dilation_equivariant()) x = dilation(x, r / nx);
        worst = std::max(worst, p_variation(apply(x), p, opt).value / homogeneous_norm(x));
    }
    return worst;
}

SegmentPath reverse_path(const SegmentPath& g) {
    SegmentPath r(g.rbegin(), g.rend());
    for (auto& v : r) v = -v;
    return r;
}

SegmentPath scale_path(const SegmentPath& g, double c) {
    SegmentPath r = g;
    for (auto& v : r) v *= c;
    return r;
}

GroupElement segments_signature(const Context& ctx, const SegmentPath& g) {
    GroupElement x = GroupElement::identity(ctx);
    for (const auto& v : g) x = x * exp(LieElement::from_level1(ctx, v));
    return x;
}

PathFunctionPtr log_linear_pf(const Context& ctx) { return std::make_shared<LogLinearPathFunction>(ctx); }

MalcevPathFunction::MalcevPathFunction(const Context& ctx) : ctx_(ctx) {
    const int m = ctx->m();
    const int d = ctx->d();
    std::vector<SegmentPath> raw(m);
    for (int i = 0; i < m; ++i) {
        const Word& w = ctx->lie_basis()[i];
        if (w.size() == 1) {
            raw[i] = {Eigen::VectorXd::Unit(d, w[0])};
            continue;
        }
        // Longest proper suffix that is a basis word.
        std::size_t cut = 1;
        const auto& basis = ctx->lie_basis();
        while (std::find(basis.begin(), basis.end(), Word(w.begin() + static_cast<long>(cut), w.end())) == basis.end())
            ++cut;
        const int a = basis_index(ctx, Word(w.begin(), w.begin() + static_cast<long>(cut)));
        const int b = basis_index(ctx, Word(w.begin() + static_cast<long>(cut), w.end()));
        SegmentPath g = raw[a];
        g.insert(g.end(), raw[b].begin(), raw[b].end());
        const SegmentPath ra = reverse_path(raw[a]);
        const SegmentPath rb = reverse_path(raw[b]);
        g.insert(g.end(), ra.begin(), ra.end());
        g.insert(g.end(), rb.begin(), rb.end());
        raw[i] = g;
    }
    // Correct top-down: the defect of raw[i] lives in degrees above deg(u_i).
    gen_.assign(m, {});
    for (int i = m - 1; i >= 0; --i) {
        const int deg = ctx->degree(i);
        gen_[i] = raw[i];
        if (deg == ctx->N()) continue;
        const GroupElement defect = inverse(segments_signature(ctx, raw[i])) * exp(LieElement::basis(ctx, i));
        Eigen::VectorXd lam = decompose(defect);
        const int first = ctx->basis_begin(deg + 1);
        if (lam.head(first).cwiseAbs().maxCoeff() > 1e-10) throw NumericError("Malcev generator correction failed");
        lam.head(first).setZero();
        const SegmentPath corr = segments_from(lam, first, nullptr);
        gen_[i].insert(gen_[i].end(), corr.begin(), corr.end());
    }
}

Eigen::VectorXd MalcevPathFunction::decompose(const GroupElement& x) const {
    require_same(ctx_, x.ctx());
    Eigen::VectorXd lam = Eigen::VectorXd::Zero(ctx_->m());
    GroupElement P = x;
    for (int j = 1; j <= ctx_->N(); ++j) {
        const LieElement l = log(P);
        const int b = ctx_->basis_begin(j);
        const int e = ctx_->basis_begin(j + 1);
        for (int i = b; i < e; ++i) lam[i] = l.coords()[i];
        if (j == ctx_->N()) break;
        for (int i = b; i < e; ++i)
            if (lam[i] != 0.0) P = P * exp(LieElement::basis(ctx_, i) * -lam[i]);
    }
    return lam;
}

GroupElement MalcevPathFunction::compose(const Eigen::VectorXd& lambda) const {
    GroupElement x = GroupElement::identity(ctx_);
    for (int i = ctx_->m() - 1; i >= 0; --i)
        if (lambda[i] != 0.0) x = x * exp(LieElement::basis(ctx_, i) * lambda[i]);
    return x;
}

SegmentPath MalcevPathFunction::segments_from(const Eigen::VectorXd& lambda, int first,
                                              std::vector<std::size_t>* block_end) const {
    SegmentPath out;
    if (block_end) block_end->clear();
    for (int i = ctx_->m() - 1; i >= first; --i) {
        const double l = lambda[i];
        if (l != 0.0) {
            const double c = std::pow(std::abs(l), 1.0 / ctx_->degree(i));
            const SegmentPath g = scale_path(l > 0 ? gen_[i] : reverse_path(gen_[i]), c);
            out.insert(out.end(), g.begin(), g.end());
        }
        if (block_end) block_end->push_back(out.size());
    }
    return out;
}

SegmentPath MalcevPathFunction::segments(const GroupElement& x, std::vector<std::size_t>* block_end) const {
    return segments_from(decompose(x), 0, block_end);
}

DiscretePath MalcevPathFunction::apply(const GroupElement& x) const {
    std::vector<std::size_t> block_end;
    const SegmentPath segs = segments(x, &block_end);
    const std::size_t m = block_end.size();
    DiscretePath p = unit_path(ctx_);
    p.times.push_back(0.0);
    p.points.push_back(GroupElement::identity(ctx_));
    std::size_t start = 0;
    GroupElement cur = p.points.back();
    for (std::size_t b = 0; b < m; ++b) {
        const double t0 = static_cast<double>(b) / m;
        const double t1 = b + 1 == m ? 1.0 : static_cast<double>(b + 1) / m;
        const std::size_t len = block_end[b] - start;
        if (len == 0) {
            p.times.push_back(t1);
            p.points.push_back(cur);
        }
        for (std::size_t k = 0; k < len; ++k) {
            cur = cur * exp(LieElement::from_level1(ctx_, segs[start + k]));
            p.times.push_back(k + 1 == len ? t1 : t0 + (t1 - t0) * static_cast<double>(k + 1) / len);
            p.points.push_back(cur);
        }
        start = block_end[b];
    }
    pin_endpoint(p, x, "malcev");
    return p;
}

GroupElement MalcevPathFunction::sample_domain(std::mt19937_64& rng) const { return random_group(ctx_, rng); }

std::shared_ptr<const MalcevPathFunction> malcev_pf(const Context& ctx) {
    return std::make_shared<MalcevPathFunction>(ctx);
}

PathFunctionPtr perturbed_pf(const Context& ctx, const LieElement& v, const SegmentPath& gamma) {
    return std::make_shared<PerturbedPathFunction>(ctx, v, gamma);
}

PathFunctionPtr perturbed_pf_default(const Context& ctx) {
    if (ctx->N() < 2) throw ValidationError("perturbed path function needs N >= 2");
    MalcevPathFunction malcev(ctx);
    const int top = ctx->m() - 1;
    return perturbed_pf(ctx, LieElement::basis(ctx, top), malcev.generator(top));
}

PathFunctionPtr custom_pf(const Context& ctx, const std::vector<Eigen::MatrixXd>& C, const std::string& name) {
    return std::make_shared<CustomPathFunction>(ctx, C, name);
}

PathFunctionPtr mcshane_pf(const Context& ctx) {
    std::vector<Eigen::MatrixXd> C;
    for (int k = 0; k < ctx->d(); ++k) {
        Eigen::MatrixXd c = Eigen::MatrixXd::Zero(ctx->d(), ctx->d());
        c(k, k) = 1.0;
        C.push_back(c);
    }
    return custom_pf(ctx, C, "mcshane");
}

double holder1_constant(const DiscretePath& path) {
    DistanceTable dist(path.points);
    double h = 0.0;
    for (std::size_t i = 0; i < path.size(); ++i)
        for (std::size_t j = i + 1; j < path.size(); ++j)
            h = std::max(h, dist(i, j) / (path.times[j] - path.times[i]));
    return h;
}

double ConnectConfig::r(std::size_t i) const { return r_first * std::pow(ratio, static_cast<double>(i) - 1.0); }

void ConnectConfig::validate() const {
    if (!(r_first > 0.0) || !std::isfinite(r_first)) throw ValidationError("r sequence must be positive");
    if (!(ratio > 0.0 && ratio < 1.0)) throw ValidationError("r sequence ratio must lie in (0, 1)");
}

double TimeChange::raw(double t) const {
    double s = 0.0;
    for (std::size_t k = 0; k < jump_times.size(); ++k)
        if (jump_times[k] <= t) s += window[k];
    return t + s;
}

double TimeChange::eval(double t) const { return raw(t) * T / (T + total); }

double TimeChange::eval_left(double t) const {
    double s = 0.0;
    for (std::size_t k = 0; k < jump_times.size(); ++k)
        if (jump_times[k] < t) s += window[k];
    return (t + s) * T / (T + total);
}

ConnectResult connect(const DiscretePath& x, const PathFunction& phi, const ConnectConfig& cfg,
                      const std::vector<bool>* jump_mask) {
    x.validate();
    cfg.validate();
    require_same(x.ctx, phi.ctx());
    if (x.kind != PathKind::CadlagStep) throw ValidationError("connect needs a cadlag_step path");
    const std::size_t n = x.size();
    if (jump_mask && jump_mask->size() != n) throw ValidationError("jump mask length must match the path");

    struct Jump {
        std::size_t stamp;
        double size;
        GroupElement delta;
    };
    std::vector<Jump> jumps;
    std::vector<GroupElement> delta(n);
    for (std::size_t i = 1; i < n; ++i) {
        if (jump_mask && !(*jump_mask)[i]) continue;
        GroupElement d = inverse(x.points[i - 1]) * x.points[i];
        const double s = homogeneous_norm(d);
        if (s == 0.0) continue;
        if (!phi.in_domain(d)) {
            std::ostringstream os;
            os.precision(17);
            os << "jump at t=" << x.times[i] << " outside the domain of " << phi.name();
            throw DomainError(os.str());
        }
        jumps.push_back({i, s, d});
    }
    std::vector<std::size_t> order(jumps.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return jumps[a].size > jumps[b].size; });

    std::vector<double> window(jumps.size());
    std::vector<std::size_t> rindex(jumps.size());
    std::size_t prev = 0;
    for (std::size_t k : order) {
        std::size_t nk = prev + 1;
        while (!(cfg.r(nk) < jumps[k].size)) {
            ++nk;
            if (nk > 100000) throw NumericError("r sequence does not reach the jump size");
        }
        window[k] = cfg.r(nk);
        rindex[k] = nk;
        prev = nk;
    }

    ConnectResult res;
    TimeChange& tau = res.tau;
    tau.T = x.T;
    for (std::size_t k = 0; k < jumps.size(); ++k) {
        tau.jump_times.push_back(x.times[jumps[k].stamp]);
        tau.window.push_back(window[k]);
        tau.r_index.push_back(rindex[k]);
        tau.total += window[k];
    }
    const double scale = tau.T / (tau.T + tau.total);
    auto rescale = [&](double raw) { return raw * tau.T / (tau.T + tau.total); };

    DiscretePath& out = res.path;
    out.ctx = x.ctx;
    out.T = x.T;
    out.kind = PathKind::LogLinear;
    out.times.push_back(0.0);
    out.points.push_back(x.points[0]);
    res.stamp_index.push_back(0);
    std::size_t jk = 0;
    double raw_shift = 0.0;
    for (std::size_t i = 1; i < n; ++i) {
        const double t = x.times[i];
        if (jk < jumps.size() && jumps[jk].stamp == i) {
            const double start = rescale(t + raw_shift);
            const double len = window[jk] * scale;
            out.times.push_back(start);
            out.points.push_back(x.points[i - 1]);
            const DiscretePath seg = phi.apply(jumps[jk].delta);
            for (std::size_t q = 1; q + 1 < seg.size(); ++q) {
                out.times.push_back(start + seg.times[q] * len);
                out.points.push_back(x.points[i - 1] * seg.points[q]);
            }
            raw_shift += window[jk];
            ++jk;
        }
        out.times.push_back(rescale(t + raw_shift));
        out.points.push_back(x.points[i]);
        res.stamp_index.push_back(out.size() - 1);
    }
    out.validate();
    return res;
}

double connecting_R(double C, double p) {
    return 1.0 + std::pow(2.0, p) + std::pow(3.0, p - 1.0) +
           std::pow(C, p) * (1.0 + std::pow(2.0, p) + 2.0 * std::pow(3.0, p - 1.0));
}

std::function<double(double)> pvar_envelope(const PathFunction&, double p, double C) {
    const double slope = std::pow(connecting_R(C, p), 1.0 / p);
    return [slope](double r) { return slope * r; };
}

std::function<double(double)> pvar_envelope(const PathFunction& phi, double p) {
    return pvar_envelope(phi, p, phi.approx_constant(p));
}

} // namespace levyrough
