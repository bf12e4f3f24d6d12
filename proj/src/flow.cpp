#include "levyrough/flow.hpp"

#include "levyrough/errors.hpp"

#include <cmath>
#include <sstream>

namespace levyrough {

LinearVectorFields::LinearVectorFields(const Context& ctx, std::vector<CMatrix> mats, bool anti_hermitian)
    : ctx_(ctx), mats_(std::move(mats)), anti_hermitian_(anti_hermitian) {
    if (!ctx_) throw ValidationError("vector fields need an algebra context");
    if (static_cast<int>(mats_.size()) != ctx_->d()) throw ValidationError("need one matrix per letter");
    e_ = static_cast<int>(mats_.front().rows());
    if (e_ < 1) throw ValidationError("state dimension must be positive");
    for (const auto& m : mats_) {
        if (m.rows() != e_ || m.cols() != e_) throw ValidationError("vector-field matrices must all be e x e");
        if (!m.allFinite()) throw ValidationError("vector-field matrices must be finite");
        if (anti_hermitian_ && (m.adjoint() + m).cwiseAbs().maxCoeff() > 1e-12)
            throw ValidationError("matrix tagged anti-Hermitian is not");
    }
    const CMatrix I = CMatrix::Identity(e_, e_);
    words_.assign(ctx_->size(), I);
    const auto& ws = ctx_->words();
    for (std::size_t k = 0; k < ws.size(); ++k) {
        const Word& w = ws[k];
        const std::size_t idx = ctx_->word_index(w);
        if (w.size() == 1) {
            words_[idx] = mats_[w[0]];
        } else {
            const Word prefix(w.begin(), w.end() - 1);
            words_[idx] = mats_[w.back()] * words_[ctx_->word_index(prefix)];
        }
    }
    basis_.assign(ctx_->m(), CMatrix::Zero(e_, e_));
    for (int i = 0; i < ctx_->m(); ++i)
        for (const auto& [idx, c] : ctx_->basis_expansion(i)) basis_[i] += c * words_[idx];
}

LinearVectorFields LinearVectorFields::from_real(const Context& ctx, const std::vector<Eigen::MatrixXd>& mats) {
    std::vector<CMatrix> c;
    for (const auto& m : mats) c.push_back(m.cast<Complex>());
    return LinearVectorFields(ctx, std::move(c), false);
}

bool LinearVectorFields::is_zero() const {
    for (const auto& m : mats_)
        if (m.cwiseAbs().maxCoeff() > 0.0) return false;
    return true;
}

CMatrix LinearVectorFields::extend(const Tensor& t) const {
    require_same(ctx_, t.ctx());
    CMatrix out = CMatrix::Zero(e_, e_);
    for (std::size_t i = 0; i < words_.size(); ++i)
        if (t[i] != 0.0) out += t[i] * words_[i];
    return out;
}

CMatrix LinearVectorFields::extend(const LieElement& l) const {
    require_same(ctx_, l.ctx());
    CMatrix out = CMatrix::Zero(e_, e_);
    for (int i = 0; i < ctx_->m(); ++i)
        if (l.coords()[i] != 0.0) out += l.coords()[i] * basis_[i];
    return out;
}

CMatrix extend_to_words(const LinearVectorFields& M, const Word& w) {
    if (w.empty()) return CMatrix::Identity(M.e(), M.e());
    if (static_cast<int>(w.size()) > M.ctx()->N()) throw ValidationError("word longer than the truncation level");
    return M.word(M.ctx()->word_index(w));
}

CMatrix solve_linear(const DiscretePath& path, const LinearVectorFields& M) {
    require_same(path.ctx, M.ctx());
    if (path.kind != PathKind::LogLinear) throw ValidationError("solve_linear needs a log_linear path");
    CMatrix U = CMatrix::Identity(M.e(), M.e());
    for (std::size_t k = 0; k + 1 < path.size(); ++k) U = expm(M.extend(path.segment_log(k))) * U;
    return U;
}

CMatrix matrix_power(const CMatrix& A, long n) {
    if (n < 0) throw ValidationError("negative matrix power");
    CMatrix result = CMatrix::Identity(A.rows(), A.cols());
    CMatrix base = A;
    while (n > 0) {
        if (n & 1) result = base * result;
        n >>= 1;
        if (n) base = base * base;
    }
    return result;
}

CMatrix solve_euler(const DiscretePath& path, const LinearVectorFields& M, int substeps) {
    require_same(path.ctx, M.ctx());
    if (path.kind != PathKind::LogLinear) throw ValidationError("solve_euler needs a log_linear path");
    if (substeps < 1) throw ValidationError("substeps must be positive");
    CMatrix U = CMatrix::Identity(M.e(), M.e());
    for (std::size_t k = 0; k + 1 < path.size(); ++k) {
        const CMatrix step = M.evaluate(exp(path.segment_log(k) * (1.0 / substeps)));
        U = matrix_power(step, substeps) * U;
    }
    return U;
}

CMatrix flow_of(const PathFunction& phi, const GroupElement& x, const LinearVectorFields& M) {
    return solve_linear(phi.apply(x), M);
}

double unitarity_defect(const CMatrix& U) {
    return (U.adjoint() * U - CMatrix::Identity(U.rows(), U.cols())).norm();
}

void check_diffusion_degrees(const LevyTriplet& t) {
    const int half = t.ctx->N() / 2;
    for (int i = 0; i < t.ctx->m(); ++i) {
        if (t.ctx->degree(i) <= half) continue;
        if (t.A.row(i).cwiseAbs().maxCoeff() > 0.0) {
            std::ostringstream os;
            os << "A couples basis element " << t.ctx->bracket_string(i) << " of degree " << t.ctx->degree(i)
               << " > floor(N/2) = " << half << "; such a process has infinite p-variation for every p < N+1";
            throw ValidationError(os.str());
        }
    }
}

CMatrix char_exponent(const LevyTriplet& t, const PathFunction& phi, const LinearVectorFields& M) {
    t.validate();
    require_same(t.ctx, M.ctx());
    require_same(t.ctx, phi.ctx());
    check_diffusion_degrees(t);
    const int m = t.ctx->m();
    const int e = M.e();
    const CMatrix I = CMatrix::Identity(e, e);
    CMatrix psi = CMatrix::Zero(e, e);
    for (int i = 0; i < m; ++i)
        if (t.B[i] != 0.0) psi += t.B[i] * M.basis(i);
    for (int i = 0; i < m; ++i)
        for (int j = 0; j < m; ++j)
            if (t.A(i, j) != 0.0) psi += 0.5 * t.A(i, j) * M.basis(i) * M.basis(j);
    t.Pi.visit(t.ctx, -1.0, [&](const GroupElement& x, double w) {
        CMatrix f = flow_of(phi, x, M) - I;
        const Eigen::VectorXd xi = xi_coords(x);
        for (int i = 0; i < m; ++i)
            if (xi[i] != 0.0) f -= xi[i] * M.basis(i);
        psi += w * f;
    });
    return psi;
}

double char_exponent_truncation(const LevyTriplet& t, const LinearVectorFields& M) {
    if (!t.Pi.stable) return 0.0;
    const StableFamily& s = *t.Pi.stable;
    double bound = 0.0;
    for (int l : s.active_letters(t.ctx->d())) {
        const double a = op_norm(M.mats()[l]);
        bound += 2.0 * s.intensity * 0.5 * a * a * std::exp(s.cutoff * a) * std::pow(s.cutoff, 2.0 - s.alpha) /
                 (2.0 - s.alpha);
    }
    return bound;
}

// ---- Levy-Khintchine verification

LkPipeline::LkPipeline(const LevyTriplet& t, PathFunctionPtr phi, const LinearVectorFields& M)
    : sampler_(t), phi_(std::move(phi)), M_(&M) {
    require_same(t.ctx, M.ctx());
    require_same(t.ctx, phi_->ctx());
    for (const auto& a : t.Pi.atoms) atom_flow_.push_back(flow_of(*phi_, a.point, M));
}

CMatrix LkPipeline::jump_flow(const JumpDraw& j) const {
    if (j.atom >= 0) return atom_flow_[j.atom];
    const LevyTriplet& t = sampler_.triplet();
    return flow_of(*phi_, t.Pi.point(t.ctx, j), *M_);
}

CMatrix LkPipeline::sample(int n_steps, double T, std::uint64_t seed) const {
    std::mt19937_64 rng(seed);
    const int m = sampler_.triplet().ctx->m();
    const int e = M_->e();
    if (e == 2) {
        std::vector<Eigen::Matrix2cd> basis(m);
        for (int i = 0; i < m; ++i) basis[i] = M_->basis(i);
        Eigen::Matrix2cd U = Eigen::Matrix2cd::Identity();
        sampler_.run(
            n_steps, T, rng, [&](double, const JumpDraw& j) { U = Eigen::Matrix2cd(jump_flow(j)) * U; },
            [&](double, const Eigen::VectorXd& y) {
                Eigen::Matrix2cd X = Eigen::Matrix2cd::Zero();
                for (int i = 0; i < m; ++i)
                    if (y[i] != 0.0) X += y[i] * basis[i];
                U = expm2(X) * U;
            });
        return U;
    }
    CMatrix U = CMatrix::Identity(e, e);
    sampler_.run(
        n_steps, T, rng, [&](double, const JumpDraw& j) { U = jump_flow(j) * U; },
        [&](double, const Eigen::VectorXd& y) {
            CMatrix X = CMatrix::Zero(e, e);
            for (int i = 0; i < m; ++i)
                if (y[i] != 0.0) X += y[i] * M_->basis(i);
            U = expm(X) * U;
        });
    return U;
}

namespace {

constexpr std::size_t kLkBlock = 1024;

struct FlowAcc {
    CMatrix s;
    Eigen::MatrixXd s2;
    double unit = 0.0;
    FlowAcc operator+(const FlowAcc& o) const { return {s + o.s, s2 + o.s2, std::max(unit, o.unit)}; }
};

std::string describe(const ExponentReport& r) {
    std::ostringstream os;
    os << "p_star = " << r.p_star << " via";
    for (const auto& b : r.binding) os << " (" << b.condition << (b.index >= 0 ? ", u" + std::to_string(b.index + 1) : "") << ")";
    return os.str();
}

} // namespace

CharFunctionReport lk_verify(const LevyTriplet& t, PathFunctionPtr phi, const LinearVectorFields& M, long n_samples,
                             int n_steps, std::uint64_t seed, int jobs, double T) {
    t.validate();
    if (n_samples < 2) throw ValidationError("need at least two samples");
    if (n_steps < 1) throw ValidationError("n_steps must be positive");
    if (!(T > 0.0)) throw ValidationError("T must be positive");
    for (const auto& mat : M.mats())
        if ((mat.adjoint() + mat).cwiseAbs().maxCoeff() > 1e-12) throw ValidationError("M must be anti-Hermitian");
    CharFunctionReport rep;
    rep.exponent = min_pvar_exponent(exponent_input(t), t.ctx);
    const int N = t.ctx->N();
    if (rep.exponent.p_star >= N + 1)
        throw ValidationError("no p < N + 1 gives finite p-variation: " + describe(rep.exponent));
    if (phi->p_star() >= N + 1) throw ValidationError("path function is not p-approximating for any p < N + 1");
    rep.psi = char_exponent(t, *phi, M);
    rep.closed_form = expm(CMatrix(T * rep.psi));
    rep.truncation_bound = T * char_exponent_truncation(t, M);
    rep.n_samples = n_samples;
    rep.n_steps = n_steps;
    rep.T = T;

    const LkPipeline pipe(t, phi, M);
    const int e = M.e();
    const std::size_t blocks = (static_cast<std::size_t>(n_samples) + kLkBlock - 1) / kLkBlock;
    auto parts = run_blocks<FlowAcc>(blocks, jobs, [&](std::size_t b) {
        FlowAcc acc{CMatrix::Zero(e, e), Eigen::MatrixXd::Zero(e, e), 0.0};
        const std::size_t end = std::min<std::size_t>(n_samples, (b + 1) * kLkBlock);
        for (std::size_t s = b * kLkBlock; s < end; ++s) {
            const CMatrix U = pipe.sample(n_steps, T, stream_seed(seed, s));
            acc.s += U;
            acc.s2 += U.cwiseAbs2();
            acc.unit = std::max(acc.unit, unitarity_defect(U));
        }
        return acc;
    });
    const FlowAcc tot = pairwise_sum(parts);
    const double n = static_cast<double>(n_samples);
    rep.mc_mean = tot.s / n;
    const Eigen::MatrixXd var = ((tot.s2 / n - rep.mc_mean.cwiseAbs2()) * (n / (n - 1.0))).cwiseMax(0.0);
    const Eigen::MatrixXd se = (var / n).cwiseSqrt();
    rep.stderr_op = op_norm(se);
    rep.error = op_norm(CMatrix(rep.mc_mean - rep.closed_form));
    rep.tolerance = std::max(3.0 * rep.stderr_op, 5e-3);
    rep.max_unitarity = tot.unit;
    rep.pass = rep.error <= rep.tolerance && rep.max_unitarity <= 1e-9;
    return rep;
}

// ---- convergence of the walks

LevyTriplet limit_triplet(const ArrayFamily& fam) {
    const Context& ctx = fam.ctx();
    const int d = ctx->d();
    if (const auto* ta = dynamic_cast<const TripletArray*>(&fam)) return ta->triplet();
    if (dynamic_cast<const ConstantArray*>(&fam)) return LevyTriplet::zero(ctx);
    const auto* ga = dynamic_cast<const GaussianArray*>(&fam);
    if (!ga) throw ValidationError("no known limit for array family " + fam.name());
    LevyTriplet t = LevyTriplet::zero(ctx);
    t.A.topLeftCorner(d, d) = ga->A();
    t.B.head(d) = ga->mu();
    if (const auto* na = dynamic_cast<const NonlinearGaussianArray*>(&fam)) {
        t.B = na->limit_drift();
    } else if (const auto* pa = dynamic_cast<const PerturbedArray*>(&fam)) {
        const int top = ctx->basis_begin(ctx->N());
        if (ctx->N() > 1 && pa->v().coords().head(top).cwiseAbs().maxCoeff() > 0.0)
            throw ValidationError("perturbation must be central (top degree) for a known limit");
        t.B += pa->v().coords();
    }
    return t;
}

ConvergenceReport convergence_experiment(const ArrayFamily& fam, const PathFunction& phi, const LinearVectorFields& M,
                                         const std::vector<long>& n_grid, int mc, std::uint64_t seed, int jobs) {
    require_same(fam.ctx(), M.ctx());
    if (n_grid.empty()) throw ValidationError("n_grid must not be empty");
    ConvergenceReport rep;
    const LevyTriplet lim = limit_triplet(fam);
    rep.psi = char_exponent(lim, phi, M);
    rep.target = expm(rep.psi);
    const int e = M.e();
    for (std::size_t i = 0; i < n_grid.size(); ++i) {
        const long n = n_grid[i];
        if (n < 1) throw ValidationError("array sizes must be positive");
        ConvergenceRow row;
        row.n = n;
        CMatrix ex = CMatrix::Zero(e, e);
        if (fam.visit_law(n, [&](const GroupElement& x, double w) { ex += w * flow_of(phi, x, M); }))
            row.exact_error = op_norm(CMatrix(matrix_power(ex, n) - rep.target));
        if (mc > 0) {
            const std::size_t blocks = (static_cast<std::size_t>(mc) + kLkBlock - 1) / kLkBlock;
            const std::uint64_t sn = stream_seed(seed, i);
            auto parts = run_blocks<CMatrix>(blocks, jobs, [&](std::size_t b) {
                CMatrix acc = CMatrix::Zero(e, e);
                const std::size_t end = std::min<std::size_t>(mc, (b + 1) * kLkBlock);
                for (std::size_t s = b * kLkBlock; s < end; ++s) {
                    std::mt19937_64 rng(stream_seed(sn, s));
                    CMatrix U = CMatrix::Identity(e, e);
                    for (long k = 0; k < n; ++k) U = flow_of(phi, fam.sample(n, rng), M) * U;
                    acc += U;
                }
                return acc;
            });
            const CMatrix mean = pairwise_sum(parts) / static_cast<double>(mc);
            row.mc_error = op_norm(CMatrix(mean - rep.target));
        }
        rep.rows.push_back(row);
    }
    for (std::size_t i = 1; i < rep.rows.size(); ++i)
        if (rep.rows[i].exact_error > rep.rows[i - 1].exact_error) ++rep.inversions;
    return rep;
}

} // namespace levyrough
