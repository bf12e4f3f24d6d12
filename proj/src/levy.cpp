#include "levyrough/levy.hpp"

#include "levyrough/errors.hpp"
#include "levyrough/interpolation.hpp"
#include "levyrough/quadrature.hpp"

#include <numeric>

namespace levyrough {

std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

std::uint64_t stream_seed(std::uint64_t master, std::uint64_t index) {
    return splitmix64(splitmix64(master) ^ splitmix64(index + 0x632be59bd9b4e019ULL));
}

// ---- stable family

void StableFamily::validate(int d) const {
    if (!(alpha > 0.0 && alpha < 2.0)) throw ValidationError("stable alpha must lie in (0, 2)");
    if (!(cutoff > 0.0)) throw ValidationError("stable family needs a positive small-jump cutoff");
    if (!(upper > cutoff)) throw ValidationError("stable upper radius must exceed the cutoff");
    if (!(intensity > 0.0) || !std::isfinite(intensity)) throw ValidationError("stable intensity must be positive");
    for (int l : letters)
        if (l < 0 || l >= d) throw ValidationError("stable letter out of range");
}

std::vector<int> StableFamily::active_letters(int d) const {
    if (!letters.empty()) return letters;
    std::vector<int> all(d);
    std::iota(all.begin(), all.end(), 0);
    return all;
}

double StableFamily::letter_mass(double a) const {
    if (a >= upper) return 0.0;
    return 2.0 * intensity * (std::pow(a, -alpha) - std::pow(upper, -alpha)) / alpha;
}

double StableFamily::letter_moment(double gamma, double a) const {
    if (a >= upper) return 0.0;
    if (std::abs(gamma - alpha) < 1e-14) return 2.0 * intensity * std::log(upper / a);
    return 2.0 * intensity * (std::pow(upper, gamma - alpha) - std::pow(a, gamma - alpha)) / (gamma - alpha);
}

double StableFamily::radius_quantile(double a, double u) const {
    const double lo = std::pow(a, -alpha);
    const double hi = std::pow(upper, -alpha);
    return std::pow(lo - u * (lo - hi), -1.0 / alpha);
}

// ---- jump measure

namespace {

double unit_ball_radius(const Context& ctx) {
    Eigen::VectorXd e = Eigen::VectorXd::Zero(ctx->d());
    e[0] = 1.0;
    return 1.0 / homogeneous_norm(exp(LieElement::from_level1(ctx, e)));
}

bool in_tail(const GroupElement& x, double h) {
    if (h < 0) return true;
    return xi_coords(x).norm() > h || homogeneous_norm(x) > 1.0;
}

constexpr int kPanelNodes = 16;
constexpr double kPanelWidth = 0.25;  // in log r

} // namespace

void JumpMeasure::validate(const Context& ctx) const {
    for (const auto& a : atoms) {
        if (!(a.weight > 0.0) || !std::isfinite(a.weight)) throw ValidationError("atom weights must be positive");
        require_same(ctx, a.point.ctx());
        if (max_abs_diff(a.point, GroupElement::identity(ctx)) == 0.0)
            throw ValidationError("the jump measure must not charge the identity");
    }
    if (stable) stable->validate(ctx->d());
}

GroupElement JumpMeasure::point(const Context& ctx, const JumpDraw& j) const {
    if (j.atom >= 0) return atoms[j.atom].point;
    Eigen::VectorXd v = Eigen::VectorXd::Zero(ctx->d());
    v[j.letter] = j.r;
    return exp(LieElement::from_level1(ctx, v));
}

double JumpMeasure::stable_lower(const Context& ctx, double h) const {
    if (!stable) return 0.0;
    if (h < 0) return stable->cutoff;
    return std::max(stable->cutoff, std::min(h, unit_ball_radius(ctx)));
}

double JumpMeasure::tail_mass(const Context& ctx, double h) const {
    double s = 0.0;
    for (const auto& a : atoms)
        if (in_tail(a.point, h)) s += a.weight;
    if (stable) s += stable->active_letters(ctx->d()).size() * stable->letter_mass(stable_lower(ctx, h));
    return s;
}

void JumpMeasure::visit_draws(const Context& ctx, double h,
                              const std::function<void(const JumpDraw&, double)>& f) const {
    for (std::size_t i = 0; i < atoms.size(); ++i)
        if (in_tail(atoms[i].point, h)) f(JumpDraw{static_cast<int>(i), -1, 0.0}, atoms[i].weight);
    if (!stable) return;
    const double a = stable_lower(ctx, h);
    if (a >= stable->upper) return;
    static const QuadratureRule gl = gauss_legendre(kPanelNodes);
    const double s0 = std::log(a), s1 = std::log(stable->upper);
    const int panels = std::max(4, static_cast<int>(std::ceil((s1 - s0) / kPanelWidth)));
    const double width = (s1 - s0) / panels;
    for (int l : stable->active_letters(ctx->d())) {
        for (int p = 0; p < panels; ++p) {
            const double mid = s0 + (p + 0.5) * width;
            for (int k = 0; k < kPanelNodes; ++k) {
                const double s = mid + 0.5 * width * gl.nodes[k];
                const double r = std::exp(s);
                // density c r^{-1-alpha} dr = c r^{-alpha} ds
                const double wt = 0.5 * width * gl.weights[k] * stable->intensity * std::pow(r, -stable->alpha);
                f(JumpDraw{-1, l, r}, wt);
                f(JumpDraw{-1, l, -r}, wt);
            }
        }
    }
}

void JumpMeasure::visit(const Context& ctx, double h,
                        const std::function<void(const GroupElement&, double)>& f) const {
    visit_draws(ctx, h, [&](const JumpDraw& j, double w) { f(point(ctx, j), w); });
}

Eigen::VectorXd JumpMeasure::xi_integral(const Context& ctx, double h) const {
    Eigen::VectorXd s = Eigen::VectorXd::Zero(ctx->m());
    for (const auto& a : atoms)
        if (in_tail(a.point, h)) s += a.weight * xi_coords(a.point);
    return s;  // the stable part is symmetric
}

Eigen::MatrixXd JumpMeasure::xi_second_moment(const Context& ctx, double h) const {
    Eigen::MatrixXd s = Eigen::MatrixXd::Zero(ctx->m(), ctx->m());
    for (const auto& a : atoms) {
        if (!in_tail(a.point, h)) continue;
        const Eigen::VectorXd x = xi_coords(a.point);
        s += a.weight * x * x.transpose();
    }
    if (stable) {
        const double mom = stable->letter_moment(2.0, stable_lower(ctx, h));
        for (int l : stable->active_letters(ctx->d())) s(l, l) += mom;
    }
    return s;
}

JumpSampler::JumpSampler(const Context& ctx, const JumpMeasure& pi, double h) {
    double acc = 0.0;
    for (std::size_t i = 0; i < pi.atoms.size(); ++i) {
        if (!in_tail(pi.atoms[i].point, h)) continue;
        acc += pi.atoms[i].weight;
        atom_ids_.push_back(static_cast<int>(i));
        cum_.push_back(acc);
    }
    if (pi.stable) {
        stable_ = pi.stable;
        lower_ = pi.stable_lower(ctx, h);
        const double lm = pi.stable->letter_mass(lower_);
        if (lm > 0) {
            for (int l : pi.stable->active_letters(ctx->d())) {
                acc += lm;
                letters_.push_back(l);
                cum_.push_back(acc);
            }
        }
    }
    mass_ = acc;
}

JumpDraw JumpSampler::draw(std::mt19937_64& rng) const {
    if (!(mass_ > 0)) throw ValidationError("cannot draw from an empty jump measure");
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    const double u = unif(rng) * mass_;
    std::size_t k = std::upper_bound(cum_.begin(), cum_.end(), u) - cum_.begin();
    if (k >= cum_.size()) k = cum_.size() - 1;
    if (k < atom_ids_.size()) return JumpDraw{atom_ids_[k], -1, 0.0};
    const int letter = letters_[k - atom_ids_.size()];
    const double r = stable_->radius_quantile(lower_, unif(rng));
    const double sign = unif(rng) < 0.5 ? -1.0 : 1.0;
    return JumpDraw{-1, letter, sign * r};
}

// ---- triplet

LevyTriplet LevyTriplet::zero(const Context& ctx) {
    LevyTriplet t;
    t.ctx = ctx;
    t.A = Eigen::MatrixXd::Zero(ctx->m(), ctx->m());
    t.B = Eigen::VectorXd::Zero(ctx->m());
    return t;
}

void LevyTriplet::validate() const {
    if (!ctx) throw ValidationError("triplet has no algebra context");
    const int m = ctx->m();
    if (A.rows() != m || A.cols() != m) throw ValidationError("A must be m x m");
    if (B.size() != m) throw ValidationError("B must have length m");
    if (!A.allFinite() || !B.allFinite()) throw ValidationError("triplet entries must be finite");
    if ((A - A.transpose()).cwiseAbs().maxCoeff() > 1e-12 * std::max(1.0, A.cwiseAbs().maxCoeff()))
        throw ValidationError("A must be symmetric");
    if (m > 0) {
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(A, Eigen::EigenvaluesOnly);
        if (es.eigenvalues().minCoeff() < -1e-10) throw ValidationError("A must be positive semidefinite");
    }
    Pi.validate(ctx);
}

Eigen::VectorXd LevyTriplet::compensated_drift() const { return B - Pi.xi_integral(ctx); }

Eigen::MatrixXd psd_sqrt(const Eigen::MatrixXd& A) {
    if (A.size() == 0) return A;
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(A);
    Eigen::VectorXd ev = es.eigenvalues();
    if (ev.minCoeff() < -1e-10) throw ValidationError("matrix is not positive semidefinite");
    const double floor = 1e-14 * std::max(1.0, ev.cwiseAbs().maxCoeff());
    for (Eigen::Index i = 0; i < ev.size(); ++i) ev[i] = ev[i] <= floor ? 0.0 : std::sqrt(ev[i]);
    return es.eigenvectors() * ev.asDiagonal() * es.eigenvectors().transpose();
}

LevySampler::LevySampler(const LevyTriplet& t) : t_(t), jumps_((t.validate(), t.ctx), t.Pi, -1.0) {
    root_ = psd_sqrt(t_.A);
    for (Eigen::Index c = 0; c < root_.cols(); ++c)
        if (root_.col(c).cwiseAbs().maxCoeff() > 0.0) active_.push_back(static_cast<int>(c));
    drift_ = t_.compensated_drift();
}

SampledPath sample_levy(const LevyTriplet& t, int n_steps, double T, std::uint64_t seed) {
    if (n_steps < 1) throw ValidationError("n_steps must be positive");
    if (!(T > 0.0) || !std::isfinite(T)) throw ValidationError("T must be positive");
    LevySampler sampler(t);
    std::mt19937_64 rng(seed);
    SampledPath out;
    DiscretePath& p = out.path;
    p.ctx = t.ctx;
    p.T = T;
    p.kind = PathKind::CadlagStep;
    p.times.push_back(0.0);
    out.jump_mask.push_back(false);
    p.points.push_back(GroupElement::identity(t.ctx));
    const double h = T / n_steps;
    int step = 0;
    auto stamp = [&](double when) {
        const double last = p.times.back();
        const double grid = step + 1 == n_steps ? T : (step + 1) * h;
        when = std::min(when, std::nextafter(grid, 0.0));
        if (when <= last) when = std::nextafter(last, grid);
        return when;
    };
    sampler.run(
        n_steps, T, rng,
        [&](double when, const JumpDraw& j) {
            p.times.push_back(stamp(when));
            p.points.push_back(p.points.back() * t.Pi.point(t.ctx, j));
            out.jump_mask.push_back(true);
        },
        [&](double when, const Eigen::VectorXd& y) {
            p.times.push_back(when);
            p.points.push_back(p.points.back() * exp(LieElement(t.ctx, y)));
            out.jump_mask.push_back(false);
            ++step;
        });
    return out;
}

// ---- approximating array

ApproximatingArray::ApproximatingArray(const LevyTriplet& t, long n) : t_(t), n_(n) {
    t_.validate();
    if (n < 1) throw ValidationError("array size n must be positive");
    const Context& ctx = t_.ctx;
    const JumpMeasure& pi = t_.Pi;
    const double half = 0.5 * static_cast<double>(n);
    const double inf = std::numeric_limits<double>::infinity();
    if (pi.tail_mass(ctx, inf) > half)
        throw ValidationError("n too small: Pi outside the unit ball exceeds n/2");
    if (pi.tail_mass(ctx, 0.0) <= half) {
        h_ = 0.0;
    } else {
        double lo = 0.0, hi = pi.stable ? pi.stable->upper : 0.0;
        for (const auto& a : pi.atoms) hi = std::max(hi, xi_coords(a.point).norm());
        for (int it = 0; it < 200 && hi - lo > 1e-15 * std::max(1.0, hi); ++it) {
            const double mid = 0.5 * (lo + hi);
            (pi.tail_mass(ctx, mid) <= half ? hi : lo) = mid;
        }
        // the infimum sits on an atom's jump point when one lies in the final bracket
        double snap = hi;
        for (const auto& a : pi.atoms) {
            const double z = xi_coords(a.point).norm();
            if (z >= lo && z <= hi && z < snap && pi.tail_mass(ctx, z) <= half) snap = z;
        }
        h_ = snap;
    }
    w_ = pi.tail_mass(ctx, h_);

    const auto gam = exponent_input(t_).gamma_sup;
    const std::vector<bool> kt = k_tilde(gam);
    const Eigen::VectorXd full = pi.xi_integral(ctx, -1.0);
    const Eigen::VectorXd tail = pi.xi_integral(ctx, h_);
    const double scale = 1.0 / ((1.0 - w_ / n) * n);
    b_.resize(ctx->m());
    for (int k = 0; k < ctx->m(); ++k) b_[k] = scale * (t_.B[k] - (kt[k] ? full[k] : tail[k]));
    const Eigen::MatrixXd root = psd_sqrt(scale * t_.A);
    std::vector<int> cols;
    for (Eigen::Index c = 0; c < root.cols(); ++c)
        if (root.col(c).cwiseAbs().maxCoeff() > 0.0) cols.push_back(static_cast<int>(c));
    L_.resize(ctx->m(), static_cast<Eigen::Index>(cols.size()));
    for (std::size_t c = 0; c < cols.size(); ++c) L_.col(c) = root.col(cols[c]);
    if (w_ > 0) mu_.emplace(ctx, pi, h_);
}

GroupElement ApproximatingArray::sample(std::mt19937_64& rng, bool* from_jump) const {
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    const bool jump = mu_ && unif(rng) < w_ / n_;
    if (from_jump) *from_jump = jump;
    if (jump) return t_.Pi.point(t_.ctx, mu_->draw(rng));
    Eigen::VectorXd y = b_;
    for (Eigen::Index c = 0; c < L_.cols(); ++c) y += (unif(rng) < 0.5 ? -1.0 : 1.0) * L_.col(c);
    return exp(LieElement(t_.ctx, y));
}

namespace {

template <class F>
void for_each_sign(const Eigen::VectorXd& b, const Eigen::MatrixXd& L, F&& f) {
    const Eigen::Index r = L.cols();
    const std::uint64_t count = 1ULL << r;
    Eigen::VectorXd y(b.size());
    for (std::uint64_t s = 0; s < count; ++s) {
        y = b;
        for (Eigen::Index c = 0; c < r; ++c) y += ((s >> c) & 1ULL ? -1.0 : 1.0) * L.col(c);
        f(y);
    }
}

} // namespace

double ApproximatingArray::nu_radius() const {
    if (!enumerable()) return std::numeric_limits<double>::infinity();
    double best = 0.0;
    for_each_sign(b_, L_, [&](const Eigen::VectorXd& y) {
        best = std::max(best, homogeneous_norm(exp(LieElement(t_.ctx, y))));
    });
    return best;
}

bool ApproximatingArray::visit_law(const std::function<void(const GroupElement&, double)>& f) const {
    if (!enumerable()) return false;
    const double n = static_cast<double>(n_);
    if (w_ > 0) t_.Pi.visit(t_.ctx, h_, [&](const GroupElement& x, double wt) { f(x, wt / n); });
    const double each = (1.0 - w_ / n) / std::ldexp(1.0, static_cast<int>(L_.cols()));
    for_each_sign(b_, L_, [&](const Eigen::VectorXd& y) { f(exp(LieElement(t_.ctx, y)), each); });
    return true;
}

std::shared_ptr<const ApproximatingArray> TripletArray::array(long n) const {
    std::lock_guard<std::mutex> lk(mu_);
    auto it = cache_.find(n);
    if (it != cache_.end()) return it->second;
    auto a = std::make_shared<const ApproximatingArray>(t_, n);
    cache_[n] = a;
    return a;
}

GroupElement TripletArray::sample(long n, std::mt19937_64& rng) const { return array(n)->sample(rng); }

bool TripletArray::visit_law(long n, const std::function<void(const GroupElement&, double)>& f) const {
    return array(n)->visit_law(f);
}

// ---- Gaussian arrays

GaussianArray::GaussianArray(const Context& ctx, Eigen::VectorXd mu, Eigen::MatrixXd A, int nodes)
    : ctx_(ctx), mu_(std::move(mu)), A_(std::move(A)), nodes_(nodes) {
    const int d = ctx_->d();
    if (mu_.size() != d || A_.rows() != d || A_.cols() != d)
        throw ValidationError("Gaussian array needs a length-d mean and a d x d covariance");
    if (nodes_ < 1) throw ValidationError("quadrature order must be positive");
    root_ = psd_sqrt(A_);
}

GroupElement GaussianArray::transform(const Eigen::VectorXd& y, long) const {
    return exp(LieElement::from_level1(ctx_, y));
}

GroupElement GaussianArray::sample(long n, std::mt19937_64& rng) const {
    std::normal_distribution<double> normal(0.0, 1.0);
    Eigen::VectorXd z(ctx_->d());
    for (Eigen::Index i = 0; i < z.size(); ++i) z[i] = normal(rng);
    const double dn = static_cast<double>(n);
    return transform(mu_ / dn + root_ * z / std::sqrt(dn), n);
}

bool GaussianArray::visit_law(long n, const std::function<void(const GroupElement&, double)>& f) const {
    std::vector<int> cols;
    for (Eigen::Index c = 0; c < root_.cols(); ++c)
        if (root_.col(c).cwiseAbs().maxCoeff() > 0.0) cols.push_back(static_cast<int>(c));
    const double total = std::pow(static_cast<double>(nodes_), static_cast<double>(cols.size()));
    if (total > 1e6) return false;
    const QuadratureRule gh = gauss_hermite_normal(nodes_);
    const double dn = static_cast<double>(n);
    std::vector<int> idx(cols.size(), 0);
    for (;;) {
        Eigen::VectorXd y = mu_ / dn;
        double wt = 1.0;
        for (std::size_t c = 0; c < cols.size(); ++c) {
            y += root_.col(cols[c]) * (gh.nodes[idx[c]] / std::sqrt(dn));
            wt *= gh.weights[idx[c]];
        }
        f(transform(y, n), wt);
        std::size_t c = 0;
        while (c < idx.size() && ++idx[c] == nodes_) idx[c++] = 0;
        if (c == idx.size()) break;
    }
    return true;
}

NonlinearGaussianArray::NonlinearGaussianArray(const Context& ctx, Eigen::VectorXd mu, Eigen::MatrixXd A,
                                               std::vector<Eigen::MatrixXd> C, int nodes)
    : GaussianArray(ctx, std::move(mu), std::move(A), nodes), C_(std::move(C)) {
    const int d = ctx->d();
    if (C_.empty()) throw ValidationError("nonlinear array needs at least one matrix");
    Eigen::MatrixXd sum = Eigen::MatrixXd::Zero(d, d);
    for (const auto& c : C_) {
        if (c.rows() != d || c.cols() != d) throw ValidationError("segment matrices must be d x d");
        sum += c;
    }
    if ((sum - Eigen::MatrixXd::Identity(d, d)).cwiseAbs().maxCoeff() > 1e-12)
        throw ValidationError("segment matrices must sum to the identity");
}

GroupElement NonlinearGaussianArray::transform(const Eigen::VectorXd& y, long) const {
    SegmentPath g;
    for (const auto& c : C_) g.push_back(c * y);
    return segments_signature(ctx_, g);
}

Eigen::VectorXd NonlinearGaussianArray::limit_drift() const {
    const int d = ctx_->d();
    const int m = ctx_->m();
    Eigen::VectorXd out = Eigen::VectorXd::Zero(m);
    out.head(d) = mu_;
    if (ctx_->N() < 2) return out;
    const int b2 = ctx_->basis_begin(2), e2 = ctx_->basis_begin(2) + ctx_->level_dims()[1];
    auto xi2 = [&](const Eigen::VectorXd& y) { return xi_coords(transform(y, 1)).segment(b2, e2 - b2).eval(); };
    std::vector<Eigen::VectorXd> diag(d);
    for (int i = 0; i < d; ++i) diag[i] = xi2(Eigen::VectorXd::Unit(d, i));
    for (int i = 0; i < d; ++i) {
        out.segment(b2, e2 - b2) += A_(i, i) * diag[i];
        for (int j = i + 1; j < d; ++j) {
            const Eigen::VectorXd q =
                0.5 * (xi2(Eigen::VectorXd::Unit(d, i) + Eigen::VectorXd::Unit(d, j)) - diag[i] - diag[j]);
            out.segment(b2, e2 - b2) += 2.0 * A_(i, j) * q;
        }
    }
    return out;
}

PerturbedArray::PerturbedArray(const Context& ctx, Eigen::VectorXd mu, Eigen::MatrixXd A, LieElement v, int nodes)
    : GaussianArray(ctx, std::move(mu), std::move(A), nodes), v_(std::move(v)) {
    require_same(ctx, v_.ctx());
}

GroupElement PerturbedArray::transform(const Eigen::VectorXd& y, long n) const {
    return exp(LieElement::from_level1(ctx_, y)) * exp(v_ * (1.0 / static_cast<double>(n)));
}

DiscretePath sample_walk(const ArrayFamily& fam, long n, double T, std::mt19937_64& rng) {
    std::vector<GroupElement> inc;
    inc.reserve(n);
    for (long k = 0; k < n; ++k) inc.push_back(fam.sample(n, rng));
    return walk_from_array(fam.ctx(), inc, T);
}

// ---- scaling functions and Feinsilver diagnostics

ScalingFunction ScalingFunction::prototype(const Context& ctx, double c) {
    ScalingFunction s;
    s.q = Eigen::VectorXd::Constant(ctx->m(), 2.0);
    s.far = c * c;
    return s;
}

void ScalingFunction::validate(int m) const {
    if (q.size() != m) throw ValidationError("scaling exponents must have length m");
    for (Eigen::Index i = 0; i < q.size(); ++i)
        if (!(q[i] > 0.0 && q[i] <= 2.0)) throw ValidationError("scaling exponents must lie in (0, 2]");
    if (!(radius > 0.0)) throw ValidationError("scaling radius must be positive");
    if (!(far > 0.0) || !std::isfinite(far)) throw ValidationError("scaling far constant must be positive");
}

double ScalingFunction::operator()(const GroupElement& x) const {
    if (std::isfinite(radius) && homogeneous_norm(x) > radius) return far;
    const Eigen::VectorXd xi = xi_coords(x);
    double s = 0.0;
    for (Eigen::Index i = 0; i < xi.size(); ++i) s += std::pow(std::abs(xi[i]), q[i]);
    return std::min(far, s);
}

double BumpFunction::operator()(const GroupElement& x) const {
    return std::max(0.0, 1.0 - distance(x, center) / radius);
}

namespace {

constexpr std::size_t kBlock = 256;

struct Moments {
    double s = 0.0, s2 = 0.0;
    Moments operator+(const Moments& o) const { return {s + o.s, s2 + o.s2}; }
};

} // namespace

MomentEstimate scaled_moment(const ArrayFamily& fam, long n, const std::function<double(const GroupElement&)>& f,
                             int mc, std::uint64_t seed, int jobs) {
    MomentEstimate est;
    const double dn = static_cast<double>(n);
    if (mc > 0) {
        const std::size_t blocks = (static_cast<std::size_t>(mc) + kBlock - 1) / kBlock;
        auto parts = run_blocks<Moments>(blocks, jobs, [&](std::size_t b) {
            Moments m;
            const std::size_t end = std::min<std::size_t>(mc, (b + 1) * kBlock);
            for (std::size_t s = b * kBlock; s < end; ++s) {
                std::mt19937_64 rng(stream_seed(seed, s));
                const double v = f(fam.sample(n, rng));
                m.s += v;
                m.s2 += v * v;
            }
            return m;
        });
        const Moments tot = pairwise_sum(parts);
        const double mean = tot.s / mc;
        const double var = mc > 1 ? std::max(0.0, (tot.s2 - mc * mean * mean) / (mc - 1)) : 0.0;
        est.mc = dn * mean;
        est.stderr_ = dn * std::sqrt(var / mc);
    }
    double ex = 0.0;
    if (fam.visit_law(n, [&](const GroupElement& x, double w) { ex += w * f(x); })) est.exact = dn * ex;
    return est;
}

double loglog_slope(const std::vector<double>& x, const std::vector<double>& y) {
    if (x.size() != y.size() || x.size() < 2) return std::numeric_limits<double>::quiet_NaN();
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    const double k = static_cast<double>(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) {
        if (!(x[i] > 0) || !(y[i] > 0)) return std::numeric_limits<double>::quiet_NaN();
        const double lx = std::log(x[i]), ly = std::log(y[i]);
        sx += lx;
        sy += ly;
        sxx += lx * lx;
        sxy += lx * ly;
    }
    return (k * sxy - sx * sy) / (k * sxx - sx * sx);
}

ScalesReport scales_check(const ArrayFamily& fam, const ScalingFunction& theta, const std::vector<long>& n_grid,
                          int mc, std::uint64_t seed, int jobs) {
    theta.validate(fam.ctx()->m());
    if (n_grid.empty()) throw ValidationError("n_grid must not be empty");
    ScalesReport rep;
    std::vector<double> xs, ys;
    for (std::size_t i = 0; i < n_grid.size(); ++i) {
        const MomentEstimate e = scaled_moment(fam, n_grid[i], std::cref(theta), mc, stream_seed(seed, i), jobs);
        rep.rows.push_back({n_grid[i], e});
        xs.push_back(static_cast<double>(n_grid[i]));
        ys.push_back(e.best());
        rep.sup = std::max(rep.sup, e.best());
    }
    rep.slope = loglog_slope(xs, ys);
    // growth is judged on the upper half of the grid, where a bounded sequence has levelled off
    const std::size_t from = xs.size() - std::max<std::size_t>(2, xs.size() / 2);
    rep.tail_slope = from + 2 <= xs.size()
                         ? loglog_slope({xs.begin() + from, xs.end()}, {ys.begin() + from, ys.end()})
                         : std::numeric_limits<double>::quiet_NaN();
    const auto& first = rep.rows[from].value;
    const auto& last = rep.rows.back().value;
    const double noise = 3.0 * (first.has_exact() ? 0.0 : first.stderr_) + 3.0 * (last.has_exact() ? 0.0 : last.stderr_);
    rep.growing = std::isfinite(rep.tail_slope) && rep.tail_slope > 0.1 && last.best() > first.best() + noise;
    return rep;
}

FeinsilverReport feinsilver_probe(const ArrayFamily& fam, const LevyTriplet& t, const std::vector<BumpFunction>& f,
                                  const std::vector<long>& n_grid, int mc, std::uint64_t seed, int jobs) {
    t.validate();
    require_same(fam.ctx(), t.ctx);
    const Context& ctx = t.ctx;
    const int m = ctx->m();
    FeinsilverReport rep;
    rep.B = t.B;
    rep.second_limit = t.A + t.Pi.xi_second_moment(ctx);
    for (const auto& b : f) {
        double s = 0.0;
        t.Pi.visit(ctx, -1.0, [&](const GroupElement& x, double w) { s += w * b(x); });
        rep.pi_f.push_back(s);
    }
    for (std::size_t i = 0; i < n_grid.size(); ++i) {
        const long n = n_grid[i];
        const double dn = static_cast<double>(n);
        FeinsilverRow row;
        row.n = n;
        for (std::size_t k = 0; k < f.size(); ++k) {
            row.bumps.push_back(scaled_moment(fam, n, std::cref(f[k]), mc, stream_seed(seed, i * 1000 + k), jobs));
            row.bump_err = std::max(row.bump_err, std::abs(row.bumps.back().best() - rep.pi_f[k]));
        }
        row.drift = Eigen::VectorXd::Zero(m);
        row.second = Eigen::MatrixXd::Zero(m, m);
        const bool exact = fam.visit_law(n, [&](const GroupElement& x, double w) {
            const Eigen::VectorXd xi = xi_coords(x);
            row.drift += w * xi;
            row.second += w * xi * xi.transpose();
        });
        if (!exact) {
            for (int s = 0; s < mc; ++s) {
                std::mt19937_64 rng(stream_seed(stream_seed(seed, i * 1000 + 999), s));
                const Eigen::VectorXd xi = xi_coords(fam.sample(n, rng));
                row.drift += xi / mc;
                row.second += xi * xi.transpose() / mc;
            }
        }
        row.drift *= dn;
        row.second *= dn;
        row.drift_err = m ? (row.drift - rep.B).cwiseAbs().maxCoeff() : 0.0;
        row.second_err = m ? (row.second - rep.second_limit).cwiseAbs().maxCoeff() : 0.0;
        rep.rows.push_back(std::move(row));
    }
    return rep;
}

// ---- p-variation exponent

PvarExponentInput exponent_input(const LevyTriplet& t, double tol) {
    t.validate();
    const int m = t.ctx->m();
    PvarExponentInput in;
    in.gamma_sup.assign(m, GammaSup{});
    if (t.Pi.stable)
        for (int l : t.Pi.stable->active_letters(t.ctx->d())) in.gamma_sup[l] = GammaSup{t.Pi.stable->alpha, true};
    for (int j = 0; j < m; ++j)
        if (t.A(j, j) > tol) in.J.push_back(j);
    const std::vector<bool> kt = k_tilde(in.gamma_sup);
    const Eigen::VectorXd bt = t.compensated_drift();
    for (int k = 0; k < m; ++k)
        if (kt[k] && std::abs(bt[k]) > tol) in.K.push_back(k);
    return in;
}

std::vector<bool> k_tilde(const std::vector<GammaSup>& g) {
    std::vector<bool> out(g.size());
    for (std::size_t k = 0; k < g.size(); ++k) out[k] = !(g[k].sup > 1.0 || (g[k].sup == 1.0 && g[k].attained));
    return out;
}

ExponentReport min_pvar_exponent(const PvarExponentInput& in, const Context& ctx) {
    const int m = ctx->m();
    if (static_cast<int>(in.gamma_sup.size()) != m) throw ValidationError("gamma_sup must have length m");
    auto check = [&](int i) {
        if (i < 0 || i >= m) throw ValidationError("basis index out of range");
    };
    ExponentReport rep;
    rep.terms.push_back({"floor", -1, 1.0, false});
    for (int j : in.J) {
        check(j);
        rep.terms.push_back({"i", j, 2.0 * ctx->degree(j), true});
    }
    for (int k : in.K) {
        check(k);
        rep.terms.push_back({"ii", k, static_cast<double>(ctx->degree(k)), false});
    }
    for (int i = 0; i < m; ++i) {
        const GammaSup& g = in.gamma_sup[i];
        if (!(g.sup >= 0.0 && g.sup <= 2.0)) throw ValidationError("gamma_sup must lie in [0, 2]");
        if (g.sup > 0.0) rep.terms.push_back({"iii", i, ctx->degree(i) * g.sup, g.attained});
    }
    for (const auto& t : rep.terms) rep.p_star = std::max(rep.p_star, t.bound);
    bool excluded = false;
    for (const auto& t : rep.terms) {
        if (std::abs(t.bound - rep.p_star) <= 1e-12 * rep.p_star) {
            rep.binding.push_back(t);
            excluded = excluded || t.excluded;
        }
    }
    rep.boundary = excluded ? "excluded" : "unresolved";
    return rep;
}

// ---- diagnostic probes

namespace {

struct MeshAcc {
    std::vector<double> s, s2, ps, ps2;
    MeshAcc operator+(const MeshAcc& o) const {
        MeshAcc r = *this;
        for (std::size_t i = 0; i < s.size(); ++i) {
            r.s[i] += o.s[i];
            r.s2[i] += o.s2[i];
            r.ps[i] += o.ps[i];
            r.ps2[i] += o.ps2[i];
        }
        return r;
    }
};

double partition_sup(const std::vector<GroupElement>& pts, int coord, double q) {
    const std::size_t n = pts.size();
    std::vector<GroupElement> inv(n);
    for (std::size_t i = 0; i < n; ++i) inv[i] = inverse(pts[i]);
    std::vector<double> best(n, 0.0);
    for (std::size_t j = 1; j < n; ++j) {
        double b = 0.0;
        for (std::size_t i = 0; i < j; ++i)
            b = std::max(b, best[i] + std::pow(std::abs(xi_coords(inv[i] * pts[j])[coord]), q));
        best[j] = b;
    }
    return best.back();
}

} // namespace

DivergenceReport bg_divergence_probe(const LevyTriplet& t, int coord, double q, const std::vector<int>& meshes, int mc,
                                     double T, std::uint64_t seed, int jobs, int partition_cap) {
    t.validate();
    if (coord < 0 || coord >= t.ctx->m()) throw ValidationError("coordinate out of range");
    if (!(q > 0.0)) throw ValidationError("q must be positive");
    if (meshes.empty() || mc < 1) throw ValidationError("need at least one mesh and one sample");
    const int finest = *std::max_element(meshes.begin(), meshes.end());
    for (int n : meshes)
        if (n < 1 || finest % n != 0) throw ValidationError("every mesh must divide the finest mesh");
    const LevySampler sampler(t);
    const std::size_t K = meshes.size();
    const std::size_t blocks = (static_cast<std::size_t>(mc) + kBlock - 1) / kBlock;
    auto parts = run_blocks<MeshAcc>(blocks, jobs, [&](std::size_t b) {
        MeshAcc acc{std::vector<double>(K), std::vector<double>(K), std::vector<double>(K), std::vector<double>(K)};
        const std::size_t end = std::min<std::size_t>(mc, (b + 1) * kBlock);
        std::vector<GroupElement> grid;
        for (std::size_t s = b * kBlock; s < end; ++s) {
            std::mt19937_64 rng(stream_seed(seed, s));
            grid.assign(1, GroupElement::identity(t.ctx));
            GroupElement x = grid.front();
            sampler.run(
                finest, T, rng, [&](double, const JumpDraw& j) { x = x * t.Pi.point(t.ctx, j); },
                [&](double, const Eigen::VectorXd& y) {
                    x = x * exp(LieElement(t.ctx, y));
                    grid.push_back(x);
                });
            for (std::size_t k = 0; k < K; ++k) {
                const int stride = finest / meshes[k];
                double sum = 0.0;
                std::vector<GroupElement> sub{grid.front()};
                for (int i = 1; i <= meshes[k]; ++i) {
                    const GroupElement& a = grid[(i - 1) * stride];
                    const GroupElement& c = grid[i * stride];
                    sum += std::pow(std::abs(xi_coords(inverse(a) * c)[coord]), q);
                    sub.push_back(c);
                }
                acc.s[k] += sum;
                acc.s2[k] += sum * sum;
                if (partition_cap > 0 && meshes[k] <= partition_cap) {
                    const double ps = partition_sup(sub, coord, q);
                    acc.ps[k] += ps;
                    acc.ps2[k] += ps * ps;
                }
            }
        }
        return acc;
    });
    const MeshAcc tot = pairwise_sum(parts);
    DivergenceReport rep;
    rep.coord = coord;
    rep.q = q;
    std::vector<double> xs, ys, pxs, pys;
    for (std::size_t k = 0; k < K; ++k) {
        DivergenceRow row;
        row.steps = meshes[k];
        row.mean = tot.s[k] / mc;
        const double var = mc > 1 ? std::max(0.0, (tot.s2[k] - mc * row.mean * row.mean) / (mc - 1)) : 0.0;
        row.stderr_ = std::sqrt(var / mc);
        if (partition_cap > 0 && meshes[k] <= partition_cap) {
            row.partition_sup = tot.ps[k] / mc;
            const double pv =
                mc > 1 ? std::max(0.0, (tot.ps2[k] - mc * row.partition_sup * row.partition_sup) / (mc - 1)) : 0.0;
            row.partition_sup_stderr = std::sqrt(pv / mc);
            pxs.push_back(meshes[k]);
            pys.push_back(row.partition_sup);
        }
        xs.push_back(meshes[k]);
        ys.push_back(row.mean);
        rep.rows.push_back(row);
    }
    rep.slope = loglog_slope(xs, ys);
    if (pxs.size() >= 2) rep.partition_slope = loglog_slope(pxs, pys);
    return rep;
}

namespace {

struct TightAcc {
    std::vector<double> short_gaps, gaps, nu, nu2;
    TightAcc operator+(const TightAcc& o) const {
        TightAcc r = *this;
        for (std::size_t i = 0; i < gaps.size(); ++i) {
            r.short_gaps[i] += o.short_gaps[i];
            r.gaps[i] += o.gaps[i];
            r.nu[i] += o.nu[i];
            r.nu2[i] += o.nu2[i];
        }
        return r;
    }
};

} // namespace

TightnessReport tightness_probe(const ArrayFamily& fam, long n, double T, const std::vector<double>& deltas, double a,
                                double kappa, int mc, std::uint64_t seed, int jobs) {
    if (n < 1 || mc < 1) throw ValidationError("walk size and sample count must be positive");
    if (!(T > 0.0) || !(a > 0.0)) throw ValidationError("T and a must be positive");
    for (double d : deltas)
        if (!(d > 0.0)) throw ValidationError("deltas must be positive");
    const std::size_t K = deltas.size();
    std::vector<double> hs(K);
    for (std::size_t k = 0; k < K; ++k) hs[k] = a * std::pow(deltas[k], kappa);
    const std::size_t blocks = (static_cast<std::size_t>(mc) + kBlock - 1) / kBlock;
    auto parts = run_blocks<TightAcc>(blocks, jobs, [&](std::size_t b) {
        TightAcc acc{std::vector<double>(K), std::vector<double>(K), std::vector<double>(K), std::vector<double>(K)};
        const std::size_t end = std::min<std::size_t>(mc, (b + 1) * kBlock);
        for (std::size_t s = b * kBlock; s < end; ++s) {
            std::mt19937_64 rng(stream_seed(seed, s));
            const DiscretePath walk = sample_walk(fam, n, T, rng);
            for (std::size_t k = 0; k < K; ++k) {
                const OscillationReport osc = nu_delta(walk.points, deltas[k]);
                double prev = 0.0;
                for (std::size_t idx : osc.stop_times) {
                    const double tt = walk.times[idx];
                    if (tt - prev <= hs[k]) acc.short_gaps[k] += 1.0;
                    prev = tt;
                }
                // the gap after the last stop time never ends, so it counts as long
                acc.gaps[k] += osc.count + 1.0;
                acc.nu[k] += osc.count;
                acc.nu2[k] += static_cast<double>(osc.count) * osc.count;
            }
        }
        return acc;
    });
    const TightAcc tot = pairwise_sum(parts);
    TightnessReport rep;
    for (std::size_t k = 0; k < K; ++k) {
        TightnessRow row;
        row.delta = deltas[k];
        row.h = hs[k];
        row.q_hat = tot.short_gaps[k] / tot.gaps[k];
        row.q_stderr = std::sqrt(row.q_hat * (1.0 - row.q_hat) / tot.gaps[k]);
        row.mean_nu = tot.nu[k] / mc;
        const double var = mc > 1 ? std::max(0.0, (tot.nu2[k] - mc * row.mean_nu * row.mean_nu) / (mc - 1)) : 0.0;
        row.nu_stderr = std::sqrt(var / mc);
        const double q_up = row.q_hat + 3.0 * row.q_stderr;
        row.bound = q_up >= 1.0 ? std::numeric_limits<double>::infinity() : std::ceil(T / row.h) / (1.0 - q_up);
        row.pass = row.mean_nu <= row.bound;
        rep.all_pass = rep.all_pass && row.pass;
        rep.rows.push_back(row);
    }
    return rep;
}

} // namespace levyrough
