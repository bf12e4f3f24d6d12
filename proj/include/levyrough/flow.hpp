#pragma once

#include "levyrough/expm.hpp"
#include "levyrough/interpolation.hpp"
#include "levyrough/levy.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace levyrough {

// d matrices M(e_1), ..., M(e_d) on C^e, extended to words by
// M(e_{i1} ... e_{ik}) = M(e_ik) ... M(e_i1).
class LinearVectorFields {
public:
    LinearVectorFields(const Context& ctx, std::vector<CMatrix> mats, bool anti_hermitian = false);
    static LinearVectorFields from_real(const Context& ctx, const std::vector<Eigen::MatrixXd>& mats);

    const Context& ctx() const { return ctx_; }
    int e() const { return e_; }
    const std::vector<CMatrix>& mats() const { return mats_; }
    bool anti_hermitian() const { return anti_hermitian_; }
    bool is_zero() const;

    // Indexed by dense word index; index 0 is the identity.
    const CMatrix& word(std::size_t index) const { return words_[index]; }
    const CMatrix& basis(int i) const { return basis_[i]; }
    CMatrix extend(const Tensor& t) const;
    CMatrix extend(const LieElement& l) const;
    // sum over words |w| <= N of x^w M(w), including the identity.
    CMatrix evaluate(const GroupElement& x) const { return extend(x.tensor()); }

private:
    Context ctx_;
    int e_ = 0;
    std::vector<CMatrix> mats_;
    bool anti_hermitian_ = false;
    std::vector<CMatrix> words_;
    std::vector<CMatrix> basis_;
};

CMatrix extend_to_words(const LinearVectorFields& M, const Word& w);

// Product of expm(M(l_k)) over the segment logs, later segments on the left.
CMatrix solve_linear(const DiscretePath& path, const LinearVectorFields& M);
// Each segment split into `substeps` step-N Euler increments M(exp(l / substeps)).
CMatrix solve_euler(const DiscretePath& path, const LinearVectorFields& M, int substeps);
// M_phi(x): the flow along phi(x).
CMatrix flow_of(const PathFunction& phi, const GroupElement& x, const LinearVectorFields& M);

double unitarity_defect(const CMatrix& U);

// Rejects A_ij != 0 whenever deg(u_i) > floor(N/2).
void check_diffusion_degrees(const LevyTriplet& t);

// Psi_X(M) with the jump integral over the modelled measure (atoms exactly, stable part by quadrature).
CMatrix char_exponent(const LevyTriplet& t, const PathFunction& phi, const LinearVectorFields& M);
// Taylor bound on the jump integral below the stable cutoff, for chord-type flows
// of small level-1 jumps; 0 without a stable part.
double char_exponent_truncation(const LevyTriplet& t, const LinearVectorFields& M);

// One sample of M(X^phi) for X drawn by sample_levy: Poisson jumps through phi (cached per atom),
// grid increments as geodesics.
class LkPipeline {
public:
    LkPipeline(const LevyTriplet& t, PathFunctionPtr phi, const LinearVectorFields& M);
    CMatrix sample(int n_steps, double T, std::uint64_t seed) const;

private:
    CMatrix jump_flow(const JumpDraw& j) const;

    LevySampler sampler_;
    PathFunctionPtr phi_;
    const LinearVectorFields* M_;
    std::vector<CMatrix> atom_flow_;
};

struct CharFunctionReport {
    CMatrix psi;
    CMatrix closed_form;  // exp(T psi)
    CMatrix mc_mean;
    long n_samples = 0;
    int n_steps = 0;
    double T = 1.0;
    double error = 0.0;      // ||mc_mean - closed_form||_op
    double stderr_op = 0.0;  // operator norm of the componentwise standard-error matrix
    double tolerance = 0.0;  // max(3 stderr_op, 5e-3)
    double max_unitarity = 0.0;
    double truncation_bound = 0.0;
    ExponentReport exponent;
    bool pass = false;
};

CharFunctionReport lk_verify(const LevyTriplet& t, PathFunctionPtr phi, const LinearVectorFields& M, long n_samples,
                             int n_steps, std::uint64_t seed, int jobs = 1, double T = 1.0);

// The triplet the row law converges to, for the array families with a known limit.
LevyTriplet limit_triplet(const ArrayFamily& fam);

struct ConvergenceRow {
    long n = 0;
    double exact_error = std::numeric_limits<double>::quiet_NaN();  // ||E[M_phi(X_n1)]^n - exp(Psi)||_op
    double mc_error = std::numeric_limits<double>::quiet_NaN();     // MC mean of the walk flow M(X^{n,phi})
};

struct ConvergenceReport {
    CMatrix psi;
    CMatrix target;
    std::vector<ConvergenceRow> rows;
    int inversions = 0;  // increases of exact_error along the grid
};

ConvergenceReport convergence_experiment(const ArrayFamily& fam, const PathFunction& phi, const LinearVectorFields& M,
                                         const std::vector<long>& n_grid, int mc, std::uint64_t seed, int jobs = 1);

CMatrix matrix_power(const CMatrix& A, long n);

} // namespace levyrough
