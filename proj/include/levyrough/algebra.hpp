#pragma once

#include <Eigen/Dense>

#include <cstddef>
#include <memory>
#include <random>
#include <string>
#include <utility>
#include <vector>

namespace levyrough {

// Letters are 0-based: letter i stands for e_{i+1}.
using Word = std::vector<int>;

// Dense layout of T^N(R^d): level k occupies [offset(k), offset(k) + d^k).
// Within a level, words are indexed base d with the first letter most significant.
class AlgebraContext {
public:
    static constexpr std::size_t kDefaultCap = 1u << 20;

    static std::shared_ptr<const AlgebraContext> make(int d, int N, std::size_t cap = kDefaultCap);

    int d() const { return d_; }
    int N() const { return N_; }
    int m() const { return static_cast<int>(lie_basis_.size()); }

    std::size_t size() const { return offset_.back(); }
    std::size_t offset(int level) const { return offset_[level]; }
    std::size_t level_size(int level) const { return pow_[level]; }
    std::size_t word_index(const Word& w) const;
    Word word_at(std::size_t index) const;
    int level_of(std::size_t index) const;

    // Words of length 1..N in storage order.
    const std::vector<Word>& words() const { return words_; }

    // Lyndon basis u_1..u_m ordered by (degree, lexicographic).
    const std::vector<Word>& lie_basis() const { return lie_basis_; }
    int degree(int i) const { return static_cast<int>(lie_basis_[i].size()); }
    const std::vector<int>& level_dims() const { return level_dims_; }
    // Basis indices of degree j form [basis_begin(j), basis_begin(j + 1)).
    int basis_begin(int level) const { return basis_begin_[level]; }
    // Expansion of the bracketed Lyndon word u_i in tensor words: (dense index, coefficient).
    const std::vector<std::pair<std::size_t, double>>& basis_expansion(int i) const {
        return expansion_[i];
    }
    std::string bracket_string(int i) const;
    std::string word_string(const Word& w) const;

    bool same_shape(const AlgebraContext& o) const { return d_ == o.d_ && N_ == o.N_; }

private:
    AlgebraContext(int d, int N) : d_(d), N_(N) {}

    int d_;
    int N_;
    std::vector<std::size_t> pow_;
    std::vector<std::size_t> offset_;
    std::vector<Word> words_;
    std::vector<Word> lie_basis_;
    std::vector<int> split_;  // standard factorization point for degree >= 2
    std::vector<int> level_dims_;
    std::vector<int> basis_begin_;
    std::vector<std::vector<std::pair<std::size_t, double>>> expansion_;
};

using Context = std::shared_ptr<const AlgebraContext>;

void require_same(const Context& a, const Context& b);

class Tensor {
public:
    Tensor() = default;
    explicit Tensor(Context ctx);
    Tensor(Context ctx, Eigen::VectorXd coeffs);

    static Tensor zero(const Context& ctx) { return Tensor(ctx); }
    static Tensor unit(const Context& ctx);

    const Context& ctx() const { return ctx_; }
    const Eigen::VectorXd& coeffs() const { return c_; }
    Eigen::VectorXd& coeffs() { return c_; }
    double operator[](std::size_t i) const { return c_[i]; }
    double& operator[](std::size_t i) { return c_[i]; }
    double coeff(const Word& w) const { return c_[ctx_->word_index(w)]; }

    auto level(int k) const { return c_.segment(ctx_->offset(k), ctx_->level_size(k)); }
    auto level(int k) { return c_.segment(ctx_->offset(k), ctx_->level_size(k)); }

    Tensor& operator+=(const Tensor& o);
    Tensor& operator-=(const Tensor& o);
    Tensor& operator*=(double s) {
        c_ *= s;
        return *this;
    }

private:
    Context ctx_;
    Eigen::VectorXd c_;
};

Tensor operator+(Tensor a, const Tensor& b);
Tensor operator-(Tensor a, const Tensor& b);
Tensor operator*(Tensor a, double s);
Tensor operator*(double s, Tensor a);

// Truncated product, raw form: out must not alias a or b.
void tensor_mul_raw(const AlgebraContext& ctx, const double* a, const double* b, double* out);
Tensor tensor_mul(const Tensor& a, const Tensor& b);
Tensor bracket(const Tensor& a, const Tensor& b);
// Requires zero scalar part.
Tensor tensor_exp(const Tensor& t);
// Requires unit scalar part.
Tensor tensor_log(const Tensor& t);

class LieElement {
public:
    LieElement() = default;
    explicit LieElement(Context ctx);
    LieElement(Context ctx, Eigen::VectorXd coords);

    static LieElement from_level1(const Context& ctx, const Eigen::VectorXd& v);
    static LieElement basis(const Context& ctx, int i);
    // Projects a tensor onto the Lie basis; the non-Lie remainder norm goes to *residual.
    static LieElement from_tensor(const Tensor& t, double* residual = nullptr);

    const Context& ctx() const { return ctx_; }
    const Eigen::VectorXd& coords() const { return coords_; }
    Eigen::VectorXd& coords() { return coords_; }
    auto level(int j) const {
        return coords_.segment(ctx_->basis_begin(j), ctx_->level_dims()[j - 1]);
    }
    Tensor to_tensor() const;

    LieElement operator+(const LieElement& o) const;
    LieElement operator-(const LieElement& o) const;
    LieElement operator*(double s) const;
    LieElement operator-() const { return *this * -1.0; }

private:
    Context ctx_;
    Eigen::VectorXd coords_;
};

class GroupElement {
public:
    GroupElement() = default;

    static GroupElement identity(const Context& ctx);
    // Validates unit scalar and group-likeness within tol.
    static GroupElement from_tensor(const Tensor& t, double tol = 1e-9);
    // Trusted construction, for values produced by group operations.
    static GroupElement unchecked(Tensor t);

    const Context& ctx() const { return t_.ctx(); }
    const Tensor& tensor() const { return t_; }
    double coeff(const Word& w) const { return t_.coeff(w); }
    auto level(int k) const { return t_.level(k); }

private:
    explicit GroupElement(Tensor t) : t_(std::move(t)) {}
    Tensor t_;
};

GroupElement operator*(const GroupElement& a, const GroupElement& b);
GroupElement exp(const LieElement& l);
LieElement log(const GroupElement& x);
GroupElement inverse(const GroupElement& x);
GroupElement dilation(const GroupElement& x, double lambda);
LieElement dilation(const LieElement& l, double lambda);
double level_norm(const GroupElement& x, int level);
double homogeneous_norm(const GroupElement& x);
double distance(const GroupElement& x, const GroupElement& y);
Eigen::VectorXd xi_coords(const GroupElement& x);
// Norm of the part of log(x) outside the Lie algebra.
double lie_residual(const GroupElement& x);
double max_abs_diff(const Tensor& a, const Tensor& b);
double max_abs_diff(const GroupElement& a, const GroupElement& b);

LieElement random_lie(const Context& ctx, std::mt19937_64& rng, double scale = 1.0);
GroupElement random_group(const Context& ctx, std::mt19937_64& rng, double scale = 1.0);

} // namespace levyrough
