#include "levyrough/path.hpp"

#include "levyrough/errors.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace levyrough {

namespace {

double norm_raw(const AlgebraContext& ctx, const double* c) {
    double s = 0.0;
    for (int j = 1; j <= ctx.N(); ++j) {
        const double* a = c + ctx.offset(j);
        double q = 0.0;
        for (std::size_t i = 0; i < ctx.level_size(j); ++i) q += a[i] * a[i];
        if (q == 0.0) continue;
        if (j == 1)
            s += std::sqrt(q);
        else if (j == 2)
            s += std::sqrt(std::sqrt(q));
        else
            s += std::pow(q, 0.5 / j);
    }
    return s;
}

double powp(double x, double p) { return p == 1.0 ? x : (p == 2.0 ? x * x : std::pow(x, p)); }

// Active levels of a Lie element: bit j-1 set if level j is nonzero.
bool needs_refine(const LieElement& l, double p) {
    int levels = 0;
    int top = 0;
    for (int j = 1; j <= l.ctx()->N(); ++j)
        if (l.level(j).cwiseAbs().maxCoeff() > 0.0) {
            ++levels;
            top = j;
        }
    if (levels == 0) return false;
    if (levels > 1) return true;
    return top > p;
}

} // namespace

std::string to_string(PathKind k) { return k == PathKind::CadlagStep ? "cadlag_step" : "log_linear"; }

PathKind path_kind_from_string(const std::string& s) {
    if (s == "cadlag_step") return PathKind::CadlagStep;
    if (s == "log_linear") return PathKind::LogLinear;
    throw ValidationError("unknown path kind: " + s);
}

void DiscretePath::validate(bool based) const {
    if (!ctx) throw ValidationError("path without algebra context");
    if (times.size() != points.size()) throw ValidationError("path times and points differ in length");
    if (points.empty()) throw ValidationError("path needs at least one point");
    if (times.front() != 0.0) throw ValidationError("path must start at time 0");
    if (!(T > 0.0) || times.back() > T) throw ValidationError("path times must lie in [0, T]");
    for (std::size_t i = 1; i < times.size(); ++i)
        if (!(times[i] > times[i - 1])) throw ValidationError("path times must be strictly increasing");
    for (const auto& x : points) require_same(ctx, x.ctx());
    if (based && max_abs_diff(points.front(), GroupElement::identity(ctx)) > 0.0)
        throw ValidationError("based path must start at the identity");
}

LieElement DiscretePath::segment_log(std::size_t k) const { return log(inverse(points[k]) * points[k + 1]); }

GroupElement DiscretePath::at(double t) const {
    if (t <= times.front()) return points.front();
    auto it = std::upper_bound(times.begin(), times.end(), t);
    const std::size_t k = static_cast<std::size_t>(it - times.begin()) - 1;
    if (times[k] == t || kind == PathKind::CadlagStep || k + 1 == points.size()) return points[k];
    const double s = (t - times[k]) / (times[k + 1] - times[k]);
    return points[k] * exp(segment_log(k) * s);
}

DiscretePath signature_lift(const Context& ctx, const std::vector<Eigen::VectorXd>& segments, double T) {
    DiscretePath out;
    out.ctx = ctx;
    out.T = T;
    out.kind = PathKind::LogLinear;
    out.times.push_back(0.0);
    out.points.push_back(GroupElement::identity(ctx));
    const std::size_t K = segments.size();
    for (std::size_t k = 0; k < K; ++k) {
        if (segments[k].size() != ctx->d()) throw ValidationError("segment dimension mismatch");
        out.points.push_back(out.points.back() * exp(LieElement::from_level1(ctx, segments[k])));
        out.times.push_back(k + 1 == K ? T : T * static_cast<double>(k + 1) / static_cast<double>(K));
    }
    return out;
}

DiscretePath walk_from_array(const Context& ctx, const std::vector<GroupElement>& increments, double T) {
    DiscretePath out;
    out.ctx = ctx;
    out.T = T;
    out.kind = PathKind::CadlagStep;
    out.times.push_back(0.0);
    out.points.push_back(GroupElement::identity(ctx));
    const std::size_t n = increments.size();
    for (std::size_t k = 0; k < n; ++k) {
        require_same(ctx, increments[k].ctx());
        out.points.push_back(out.points.back() * increments[k]);
        out.times.push_back(k + 1 == n ? T : T * static_cast<double>(k + 1) / static_cast<double>(n));
    }
    return out;
}

DiscretePath left_translate(const GroupElement& g, const DiscretePath& x) {
    DiscretePath out = x;
    for (auto& p : out.points) p = g * p;
    return out;
}

DiscretePath concatenate(const DiscretePath& x, const DiscretePath& y) {
    require_same(x.ctx, y.ctx);
    DiscretePath out = x;
    const GroupElement base = x.endpoint() * inverse(y.points.front());
    for (std::size_t i = 1; i < y.size(); ++i) {
        out.times.push_back(x.T + y.times[i]);
        out.points.push_back(base * y.points[i]);
    }
    out.T = x.T + y.T;
    return out;
}

DistanceTable::DistanceTable(const std::vector<GroupElement>& pts) : pts_(pts) {
    inv_.reserve(pts.size());
    for (const auto& x : pts) inv_.push_back(inverse(x).tensor());
    if (!pts.empty()) scratch_ = Eigen::VectorXd::Zero(pts.front().ctx()->size());
}

double DistanceTable::operator()(std::size_t i, std::size_t j) const {
    const AlgebraContext& ctx = *pts_[i].ctx();
    tensor_mul_raw(ctx, inv_[i].coeffs().data(), pts_[j].tensor().coeffs().data(), scratch_.data());
    return norm_raw(ctx, scratch_.data());
}

void pvar_candidates(const DiscretePath& path, double p, int refine, std::vector<GroupElement>& pts,
                     std::vector<double>& times, std::vector<std::size_t>* stamp_index) {
    pts.clear();
    times.clear();
    if (stamp_index) stamp_index->clear();
    for (std::size_t k = 0; k < path.size(); ++k) {
        if (stamp_index) stamp_index->push_back(pts.size());
        pts.push_back(path.points[k]);
        times.push_back(path.times[k]);
        if (path.kind != PathKind::LogLinear || refine <= 0 || k + 1 == path.size()) continue;
        const LieElement l = path.segment_log(k);
        if (!needs_refine(l, p)) continue;
        for (int r = 1; r <= refine; ++r) {
            const double s = static_cast<double>(r) / (refine + 1);
            pts.push_back(path.points[k] * exp(l * s));
            times.push_back(path.times[k] + s * (path.times[k + 1] - path.times[k]));
        }
    }
}

double pvar_sum(const std::vector<GroupElement>& pts, double p, std::vector<std::size_t>* witness) {
    if (p < 1.0) throw ValidationError("p-variation needs p >= 1");
    const std::size_t n = pts.size();
    if (n <= 1) {
        if (witness) *witness = std::vector<std::size_t>(n, 0);
        return 0.0;
    }
    DistanceTable dist(pts);
    std::vector<double> f(n, 0.0);
    std::vector<std::size_t> next(n, n - 1);
    for (std::size_t i = n - 1; i-- > 0;) {
        double best = -1.0;
        std::size_t arg = i + 1;
        for (std::size_t j = i + 1; j < n; ++j) {
            const double v = powp(dist(i, j), p) + f[j];
            if (v > best) {
                best = v;
                arg = j;
            }
        }
        f[i] = best;
        next[i] = arg;
    }
    if (witness) {
        witness->clear();
        for (std::size_t i = 0;; i = next[i]) {
            witness->push_back(i);
            if (i == n - 1) break;
        }
    }
    return f[0];
}

std::vector<double> pvar_prefix(const std::vector<GroupElement>& pts, double p) {
    if (p < 1.0) throw ValidationError("p-variation needs p >= 1");
    const std::size_t n = pts.size();
    std::vector<double> best(n, 0.0);
    if (n <= 1) return best;
    DistanceTable dist(pts);
    for (std::size_t j = 1; j < n; ++j) {
        double b = 0.0;
        for (std::size_t i = 0; i < j; ++i) b = std::max(b, best[i] + powp(dist(i, j), p));
        best[j] = b;
    }
    return best;
}

PvarReport p_variation(const DiscretePath& path, double p, const PvarOptions& opt) {
    if (!(p >= 1.0)) throw ValidationError("p-variation needs p >= 1");
    std::vector<GroupElement> pts;
    std::vector<double> times;
    pvar_candidates(path, p, opt.refine, pts, times);
    if (pts.size() > opt.cap) throw SizeError("p-variation point count exceeds cap");
    PvarReport r;
    r.p = p;
    r.sum = pvar_sum(pts, p, &r.witness);
    r.value = std::pow(r.sum, 1.0 / p);
    for (std::size_t i : r.witness) r.witness_times.push_back(times[i]);
    return r;
}

OscillationReport nu_delta(const std::vector<GroupElement>& pts, double delta) {
    if (!(delta > 0.0)) throw ValidationError("nu_delta needs delta > 0");
    OscillationReport r;
    r.delta = delta;
    if (pts.size() < 2) return r;
    DistanceTable dist(pts);
    std::size_t s = 0;
    for (std::size_t k = 1; k < pts.size(); ++k) {
        for (std::size_t i = s; i < k; ++i) {
            if (dist(i, k) > delta) {
                ++r.count;
                r.stop_times.push_back(k);
                s = k;
                break;
            }
        }
    }
    return r;
}

OscillationReport nu_delta(const DiscretePath& path, double delta) { return nu_delta(path.points, delta); }

double max_oscillation(const std::vector<GroupElement>& pts) {
    DistanceTable dist(pts);
    double m = 0.0;
    for (std::size_t i = 0; i < pts.size(); ++i)
        for (std::size_t j = i + 1; j < pts.size(); ++j) m = std::max(m, dist(i, j));
    return m;
}

double pvar_upper_bound(const DiscretePath& path, double p) {
    if (!(p >= 1.0)) throw ValidationError("p-variation needs p >= 1");
    const auto& pts = path.points;
    DistanceTable dist(pts);
    double M = 0.0;
    double minpos = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < pts.size(); ++i)
        for (std::size_t j = i + 1; j < pts.size(); ++j) {
            const double v = dist(i, j);
            M = std::max(M, v);
            if (v > 0.0) minpos = std::min(minpos, v);
        }
    if (M == 0.0) return 0.0;
    double bound = std::pow(M, p) * static_cast<double>(nu_delta(pts, 1.0).count);
    for (int r = 1; std::ldexp(1.0, -r) >= minpos / 2.0; ++r) {
        const double delta = std::ldexp(1.0, -r);
        bound += std::pow(2.0, (1.0 - r) * p) * static_cast<double>(nu_delta(pts, delta).count);
    }
    return bound;
}

DiscretePath holder_reparam(const DiscretePath& path, double p, const PvarOptions& opt) {
    if (path.kind != PathKind::LogLinear) throw ValidationError("holder_reparam needs a log_linear path");
    std::vector<GroupElement> pts;
    std::vector<double> times;
    std::vector<std::size_t> stamp;
    pvar_candidates(path, p, opt.refine, pts, times, &stamp);
    if (pts.size() > opt.cap) throw SizeError("p-variation point count exceeds cap");
    const std::vector<double> prefix = pvar_prefix(pts, p);
    const double total = prefix.back();
    if (!(total > 0.0)) throw ValidationError("holder_reparam of a constant path is degenerate");
    DiscretePath out;
    out.ctx = path.ctx;
    out.T = path.T;
    out.kind = PathKind::LogLinear;
    for (std::size_t k = 0; k < path.size(); ++k) {
        const double t = k + 1 == path.size() ? path.T : path.T * prefix[stamp[k]] / total;
        if (!out.times.empty() && !(t > out.times.back())) continue;
        out.times.push_back(t);
        out.points.push_back(path.points[k]);
    }
    return out;
}

} // namespace levyrough
