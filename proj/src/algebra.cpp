#include "levyrough/algebra.hpp"

#include "levyrough/errors.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <sstream>

namespace levyrough {

namespace {

bool lex_less(const Word& a, const Word& b) {
    return std::lexicographical_compare(a.begin(), a.end(), b.begin(), b.end());
}

bool is_lyndon(const Word& w) {
    for (std::size_t i = 1; i < w.size(); ++i) {
        Word suffix(w.begin() + static_cast<long>(i), w.end());
        if (!lex_less(w, suffix)) return false;
    }
    return !w.empty();
}

// Duval's generator: all Lyndon words of length <= N in lexicographic order.
std::vector<Word> lyndon_words(int d, int N) {
    std::vector<Word> out;
    Word w{0};
    while (!w.empty()) {
        out.push_back(w);
        const std::size_t len = w.size();
        while (static_cast<int>(w.size()) < N) w.push_back(w[w.size() - len]);
        while (!w.empty() && w.back() == d - 1) w.pop_back();
        if (!w.empty()) ++w.back();
    }
    return out;
}

} // namespace

std::shared_ptr<const AlgebraContext> AlgebraContext::make(int d, int N, std::size_t cap) {
    if (d < 1 || N < 1) throw ValidationError("algebra context needs d >= 1 and N >= 1");
    std::size_t total = 1;
    std::size_t p = 1;
    for (int k = 1; k <= N; ++k) {
        if (p > cap / static_cast<std::size_t>(d)) throw SizeError("tensor word count exceeds cap");
        p *= static_cast<std::size_t>(d);
        total += p;
        if (total > cap) throw SizeError("tensor word count exceeds cap");
    }

    std::shared_ptr<AlgebraContext> ctx(new AlgebraContext(d, N));
    ctx->pow_.assign(N + 2, 1);
    for (int k = 1; k <= N + 1; ++k) ctx->pow_[k] = ctx->pow_[k - 1] * static_cast<std::size_t>(d);
    ctx->offset_.assign(N + 2, 0);
    ctx->offset_[0] = 0;
    for (int k = 1; k <= N + 1; ++k) ctx->offset_[k] = ctx->offset_[k - 1] + ctx->pow_[k - 1];

    for (std::size_t i = 1; i < ctx->size(); ++i) ctx->words_.push_back(ctx->word_at(i));

    std::vector<Word> lw = lyndon_words(d, N);
    std::stable_sort(lw.begin(), lw.end(),
                     [](const Word& a, const Word& b) { return a.size() < b.size(); });
    ctx->lie_basis_ = lw;
    ctx->level_dims_.assign(N, 0);
    ctx->basis_begin_.assign(N + 2, 0);
    for (const Word& w : lw) ctx->level_dims_[w.size() - 1]++;
    ctx->basis_begin_[1] = 0;
    for (int j = 2; j <= N + 1; ++j)
        ctx->basis_begin_[j] = ctx->basis_begin_[j - 1] + ctx->level_dims_[j - 2];

    // Bracket each Lyndon word through its standard factorization w = uv,
    // v the longest proper Lyndon suffix.
    Context cptr = ctx;
    std::map<Word, Tensor> poly;
    ctx->split_.assign(lw.size(), 0);
    ctx->expansion_.resize(lw.size());
    for (std::size_t i = 0; i < lw.size(); ++i) {
        const Word& w = lw[i];
        Tensor t(cptr);
        if (w.size() == 1) {
            t[ctx->word_index(w)] = 1.0;
        } else {
            std::size_t cut = 0;
            for (std::size_t s = 1; s < w.size(); ++s) {
                Word v(w.begin() + static_cast<long>(s), w.end());
                if (is_lyndon(v)) {
                    cut = s;
                    break;
                }
            }
            ctx->split_[i] = static_cast<int>(cut);
            Word u(w.begin(), w.begin() + static_cast<long>(cut));
            Word v(w.begin() + static_cast<long>(cut), w.end());
            t = bracket(poly.at(u), poly.at(v));
        }
        const std::size_t lead = ctx->word_index(w);
        if (std::abs(t[lead] - 1.0) > 1e-12) throw NumericError("Lyndon bracket is not unitriangular");
        for (std::size_t k = 0; k < ctx->size(); ++k) {
            if (t[k] != 0.0) {
                if (k != lead && lex_less(ctx->word_at(k), w))
                    throw NumericError("Lyndon bracket is not unitriangular");
                ctx->expansion_[i].emplace_back(k, t[k]);
            }
        }
        poly.emplace(w, std::move(t));
    }
    return ctx;
}

std::size_t AlgebraContext::word_index(const Word& w) const {
    if (static_cast<int>(w.size()) > N_) throw ValidationError("word longer than truncation level");
    std::size_t idx = 0;
    for (int a : w) {
        if (a < 0 || a >= d_) throw ValidationError("letter outside alphabet");
        idx = idx * static_cast<std::size_t>(d_) + static_cast<std::size_t>(a);
    }
    return offset_[w.size()] + idx;
}

int AlgebraContext::level_of(std::size_t index) const {
    int k = 0;
    while (k < N_ && index >= offset_[k + 1]) ++k;
    return k;
}

Word AlgebraContext::word_at(std::size_t index) const {
    const int k = level_of(index);
    std::size_t r = index - offset_[k];
    Word w(k);
    for (int i = k - 1; i >= 0; --i) {
        w[i] = static_cast<int>(r % static_cast<std::size_t>(d_));
        r /= static_cast<std::size_t>(d_);
    }
    return w;
}

std::string AlgebraContext::word_string(const Word& w) const {
    std::ostringstream os;
    for (std::size_t i = 0; i < w.size(); ++i) os << (i ? "," : "") << (w[i] + 1);
    return os.str();
}

std::string AlgebraContext::bracket_string(int i) const {
    const Word& w = lie_basis_[i];
    if (w.size() == 1) return "e" + std::to_string(w[0] + 1);
    const int cut = split_[i];
    Word u(w.begin(), w.begin() + cut);
    Word v(w.begin() + cut, w.end());
    auto find = [&](const Word& x) {
        return static_cast<int>(std::find(lie_basis_.begin(), lie_basis_.end(), x) - lie_basis_.begin());
    };
    return "[" + bracket_string(find(u)) + "," + bracket_string(find(v)) + "]";
}

void require_same(const Context& a, const Context& b) {
    if (!a || !b || !a->same_shape(*b)) throw ValidationError("algebra context mismatch");
}

Tensor::Tensor(Context ctx) : ctx_(std::move(ctx)), c_(Eigen::VectorXd::Zero(ctx_->size())) {}

Tensor::Tensor(Context ctx, Eigen::VectorXd coeffs) : ctx_(std::move(ctx)), c_(std::move(coeffs)) {
    if (static_cast<std::size_t>(c_.size()) != ctx_->size()) throw ValidationError("tensor size mismatch");
    if (!c_.allFinite()) throw ValidationError("tensor coefficients must be finite");
}

Tensor Tensor::unit(const Context& ctx) {
    Tensor t(ctx);
    t[0] = 1.0;
    return t;
}

Tensor& Tensor::operator+=(const Tensor& o) {
    require_same(ctx_, o.ctx_);
    c_ += o.c_;
    return *this;
}

Tensor& Tensor::operator-=(const Tensor& o) {
    require_same(ctx_, o.ctx_);
    c_ -= o.c_;
    return *this;
}

Tensor operator+(Tensor a, const Tensor& b) { return a += b; }
Tensor operator-(Tensor a, const Tensor& b) { return a -= b; }
Tensor operator*(Tensor a, double s) { return a *= s; }
Tensor operator*(double s, Tensor a) { return a *= s; }

void tensor_mul_raw(const AlgebraContext& ctx, const double* a, const double* b, double* out) {
    const int N = ctx.N();
    for (int k = 0; k <= N; ++k) {
        double* o = out + ctx.offset(k);
        const std::size_t nk = ctx.level_size(k);
        std::fill(o, o + nk, 0.0);
        for (int i = 0; i <= k; ++i) {
            const int j = k - i;
            const double* ai = a + ctx.offset(i);
            const double* bj = b + ctx.offset(j);
            const std::size_t ni = ctx.level_size(i);
            const std::size_t nj = ctx.level_size(j);
            for (std::size_t p = 0; p < ni; ++p) {
                const double ap = ai[p];
                if (ap == 0.0) continue;
                double* row = o + p * nj;
                for (std::size_t q = 0; q < nj; ++q) row[q] += ap * bj[q];
            }
        }
    }
}

Tensor tensor_mul(const Tensor& a, const Tensor& b) {
    require_same(a.ctx(), b.ctx());
    Tensor out(a.ctx());
    tensor_mul_raw(*a.ctx(), a.coeffs().data(), b.coeffs().data(), out.coeffs().data());
    return out;
}

Tensor bracket(const Tensor& a, const Tensor& b) { return tensor_mul(a, b) - tensor_mul(b, a); }

Tensor tensor_exp(const Tensor& t) {
    if (std::abs(t[0]) > 0.0) throw ValidationError("tensor_exp needs zero scalar part");
    const Context& ctx = t.ctx();
    // 1 + t(1 + t/2(1 + t/3(...)))
    Tensor r = Tensor::unit(ctx);
    Tensor tmp(ctx);
    for (int k = ctx->N(); k >= 1; --k) {
        tensor_mul_raw(*ctx, t.coeffs().data(), r.coeffs().data(), tmp.coeffs().data());
        tmp.coeffs() *= 1.0 / k;
        tmp[0] += 1.0;
        std::swap(r, tmp);
    }
    return r;
}

Tensor tensor_log(const Tensor& t) {
    if (std::abs(t[0] - 1.0) > 1e-12) throw ValidationError("tensor_log needs unit scalar part");
    const Context& ctx = t.ctx();
    const int N = ctx->N();
    Tensor y = t;
    y[0] = 0.0;
    // sum_{k=1}^N (-1)^{k+1} y^k / k in nested form
    Tensor r = Tensor::unit(ctx) * ((N % 2 == 1 ? 1.0 : -1.0) / N);
    Tensor tmp(ctx);
    for (int k = N - 1; k >= 1; --k) {
        tensor_mul_raw(*ctx, y.coeffs().data(), r.coeffs().data(), tmp.coeffs().data());
        tmp[0] += (k % 2 == 1 ? 1.0 : -1.0) / k;
        std::swap(r, tmp);
    }
    tensor_mul_raw(*ctx, y.coeffs().data(), r.coeffs().data(), tmp.coeffs().data());
    return tmp;
}

LieElement::LieElement(Context ctx) : ctx_(std::move(ctx)), coords_(Eigen::VectorXd::Zero(ctx_->m())) {}

LieElement::LieElement(Context ctx, Eigen::VectorXd coords) : ctx_(std::move(ctx)), coords_(std::move(coords)) {
    if (coords_.size() != ctx_->m()) throw ValidationError("Lie coordinate length mismatch");
    if (!coords_.allFinite()) throw ValidationError("Lie coordinates must be finite");
}

LieElement LieElement::from_level1(const Context& ctx, const Eigen::VectorXd& v) {
    if (v.size() != ctx->d()) throw ValidationError("level-1 vector has wrong dimension");
    LieElement l(ctx);
    l.coords_.head(ctx->d()) = v;
    return l;
}

LieElement LieElement::basis(const Context& ctx, int i) {
    if (i < 0 || i >= ctx->m()) throw ValidationError("basis index out of range");
    LieElement l(ctx);
    l.coords_[i] = 1.0;
    return l;
}

LieElement LieElement::from_tensor(const Tensor& t, double* residual) {
    const Context& ctx = t.ctx();
    Eigen::VectorXd r = t.coeffs();
    Eigen::VectorXd coords(ctx->m());
    for (int i = 0; i < ctx->m(); ++i) {
        const double lam = r[ctx->word_index(ctx->lie_basis()[i])];
        coords[i] = lam;
        if (lam == 0.0) continue;
        for (const auto& [k, c] : ctx->basis_expansion(i)) r[k] -= lam * c;
    }
    if (residual) *residual = r.norm();
    LieElement l(ctx);
    l.coords_ = coords;
    return l;
}

Tensor LieElement::to_tensor() const {
    Tensor t(ctx_);
    for (int i = 0; i < ctx_->m(); ++i) {
        const double lam = coords_[i];
        if (lam == 0.0) continue;
        for (const auto& [k, c] : ctx_->basis_expansion(i)) t[k] += lam * c;
    }
    return t;
}

LieElement LieElement::operator+(const LieElement& o) const {
    require_same(ctx_, o.ctx_);
    return LieElement(ctx_, coords_ + o.coords_);
}

LieElement LieElement::operator-(const LieElement& o) const {
    require_same(ctx_, o.ctx_);
    return LieElement(ctx_, coords_ - o.coords_);
}

LieElement LieElement::operator*(double s) const { return LieElement(ctx_, coords_ * s); }

GroupElement GroupElement::identity(const Context& ctx) { return GroupElement(Tensor::unit(ctx)); }

GroupElement GroupElement::from_tensor(const Tensor& t, double tol) {
    if (std::abs(t[0] - 1.0) > tol) throw ValidationError("group element needs unit scalar coefficient");
    Tensor u = t;
    u[0] = 1.0;
    double res = 0.0;
    LieElement::from_tensor(tensor_log(u), &res);
    if (res > tol) throw ValidationError("tensor is not group-like (log leaves the Lie algebra)");
    return GroupElement(std::move(u));
}

GroupElement GroupElement::unchecked(Tensor t) { return GroupElement(std::move(t)); }

GroupElement operator*(const GroupElement& a, const GroupElement& b) {
    return GroupElement::unchecked(tensor_mul(a.tensor(), b.tensor()));
}

GroupElement exp(const LieElement& l) { return GroupElement::unchecked(tensor_exp(l.to_tensor())); }

LieElement log(const GroupElement& x) { return LieElement::from_tensor(tensor_log(x.tensor())); }

GroupElement inverse(const GroupElement& x) { return exp(-log(x)); }

GroupElement dilation(const GroupElement& x, double lambda) {
    Tensor t = x.tensor();
    double s = 1.0;
    for (int k = 1; k <= t.ctx()->N(); ++k) {
        s *= lambda;
        t.level(k) *= s;
    }
    return GroupElement::unchecked(std::move(t));
}

LieElement dilation(const LieElement& l, double lambda) {
    Eigen::VectorXd c = l.coords();
    const Context& ctx = l.ctx();
    for (int i = 0; i < ctx->m(); ++i) c[i] *= std::pow(lambda, ctx->degree(i));
    return LieElement(ctx, c);
}

double level_norm(const GroupElement& x, int level) { return x.level(level).norm(); }

double homogeneous_norm(const GroupElement& x) {
    double s = 0.0;
    for (int j = 1; j <= x.ctx()->N(); ++j) {
        const double n = x.level(j).norm();
        s += j == 1 ? n : std::pow(n, 1.0 / j);
    }
    return s;
}

double distance(const GroupElement& x, const GroupElement& y) { return homogeneous_norm(inverse(x) * y); }

Eigen::VectorXd xi_coords(const GroupElement& x) { return log(x).coords(); }

double lie_residual(const GroupElement& x) {
    double r = 0.0;
    LieElement::from_tensor(tensor_log(x.tensor()), &r);
    return r;
}

double max_abs_diff(const Tensor& a, const Tensor& b) {
    require_same(a.ctx(), b.ctx());
    return (a.coeffs() - b.coeffs()).cwiseAbs().maxCoeff();
}

double max_abs_diff(const GroupElement& a, const GroupElement& b) { return max_abs_diff(a.tensor(), b.tensor()); }

LieElement random_lie(const Context& ctx, std::mt19937_64& rng, double scale) {
    std::uniform_real_distribution<double> u(-scale, scale);
    Eigen::VectorXd c(ctx->m());
    for (int i = 0; i < ctx->m(); ++i) c[i] = u(rng);
    return LieElement(ctx, c);
}

GroupElement random_group(const Context& ctx, std::mt19937_64& rng, double scale) {
    return exp(random_lie(ctx, rng, scale));
}

} // namespace levyrough
