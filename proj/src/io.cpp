#include "levyrough/io.hpp"

#include "levyrough/errors.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <mutex>
#include <sstream>

namespace levyrough {

namespace {

const Json& field(const Json& j, const char* key) {
    if (!j.is_object() || !j.contains(key)) throw ValidationError(std::string("missing field \"") + key + "\"");
    return j.at(key);
}

int int_field(const Json& j, const char* key) {
    const Json& v = field(j, key);
    if (!v.is_number_integer()) throw ValidationError(std::string("field \"") + key + "\" must be an integer");
    return v.get<int>();
}

Context context_of(const Json& j) { return context_for(int_field(j, "d"), int_field(j, "N")); }

Json levels_of(const Tensor& t) {
    const Context& c = t.ctx();
    Json levels = Json::array();
    for (int k = 1; k <= c->N(); ++k) levels.push_back(to_json(Eigen::VectorXd(t.level(k))));
    return levels;
}

Tensor tensor_from_levels(const Json& j, const Context& c, double unit) {
    const Json& levels = field(j, "levels");
    if (!levels.is_array() || static_cast<int>(levels.size()) != c->N())
        throw ValidationError("\"levels\" must list N levels");
    Tensor t(c);
    t[0] = unit;
    for (int k = 1; k <= c->N(); ++k) {
        const Eigen::VectorXd v = vector_from(levels[k - 1]);
        if (static_cast<std::size_t>(v.size()) != c->level_size(k))
            throw ValidationError("level " + std::to_string(k) + " has the wrong length");
        t.level(k) = v;
    }
    return t;
}

Json stable_to_json(const StableFamily& s) {
    Json j;
    j["family"] = "stable";
    j["alpha"] = s.alpha;
    j["cutoff"] = s.cutoff;
    j["upper"] = s.upper;
    j["intensity"] = s.intensity;
    j["letters"] = s.letters;
    return j;
}

} // namespace

Context context_for(int d, int N) {
    static std::mutex mu;
    static std::map<std::pair<int, int>, Context> cache;
    std::lock_guard<std::mutex> lock(mu);
    auto it = cache.find({d, N});
    if (it != cache.end()) return it->second;
    Context c = AlgebraContext::make(d, N);
    cache.emplace(std::make_pair(d, N), c);
    return c;
}

Json num(double x) {
    if (std::isnan(x)) return "nan";
    if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
    return x;
}

double num_from(const Json& j) {
    if (j.is_number()) return j.get<double>();
    if (j.is_string()) {
        const std::string s = j.get<std::string>();
        if (s == "inf") return std::numeric_limits<double>::infinity();
        if (s == "-inf") return -std::numeric_limits<double>::infinity();
        if (s == "nan") return std::numeric_limits<double>::quiet_NaN();
    }
    throw ValidationError("expected a number, got " + j.dump());
}

Json to_json(const Eigen::VectorXd& v) {
    Json a = Json::array();
    for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(num(v[i]));
    return a;
}

Json to_json(const Eigen::MatrixXd& A) {
    Json a = Json::array();
    for (Eigen::Index i = 0; i < A.rows(); ++i) a.push_back(to_json(Eigen::VectorXd(A.row(i).transpose())));
    return a;
}

Json to_json(const CMatrix& A) {
    Json a = Json::array();
    for (Eigen::Index i = 0; i < A.rows(); ++i) {
        Json row = Json::array();
        for (Eigen::Index k = 0; k < A.cols(); ++k) row.push_back(Json::array({num(A(i, k).real()), num(A(i, k).imag())}));
        a.push_back(row);
    }
    return a;
}

Eigen::VectorXd vector_from(const Json& j) {
    if (!j.is_array()) throw ValidationError("expected an array of numbers");
    Eigen::VectorXd v(j.size());
    for (std::size_t i = 0; i < j.size(); ++i) v[i] = num_from(j[i]);
    return v;
}

Eigen::MatrixXd matrix_from(const Json& j) {
    if (!j.is_array() || j.empty()) return Eigen::MatrixXd(0, 0);
    const std::size_t cols = j[0].is_array() ? j[0].size() : 0;
    Eigen::MatrixXd A(j.size(), cols);
    for (std::size_t i = 0; i < j.size(); ++i) {
        if (!j[i].is_array() || j[i].size() != cols) throw ValidationError("matrix rows must have equal length");
        for (std::size_t k = 0; k < cols; ++k) A(i, k) = num_from(j[i][k]);
    }
    return A;
}

CMatrix cmatrix_from(const Json& j) {
    if (!j.is_array() || j.empty() || !j[0].is_array()) throw ValidationError("expected a matrix");
    const std::size_t cols = j[0].size();
    CMatrix A(j.size(), cols);
    for (std::size_t i = 0; i < j.size(); ++i) {
        if (!j[i].is_array() || j[i].size() != cols) throw ValidationError("matrix rows must have equal length");
        for (std::size_t k = 0; k < cols; ++k) {
            const Json& e = j[i][k];
            if (e.is_array()) {
                if (e.size() != 2) throw ValidationError("complex entries are [re, im]");
                A(i, k) = Complex(num_from(e[0]), num_from(e[1]));
            } else {
                A(i, k) = num_from(e);
            }
        }
    }
    return A;
}

Json to_json(const GroupElement& x) {
    Json j;
    j["d"] = x.ctx()->d();
    j["N"] = x.ctx()->N();
    j["levels"] = levels_of(x.tensor());
    return j;
}

GroupElement group_from_json(const Json& j) {
    return GroupElement::from_tensor(tensor_from_levels(j, context_of(j), 1.0));
}

Json to_json(const LieElement& l) {
    Json j;
    j["d"] = l.ctx()->d();
    j["N"] = l.ctx()->N();
    j["levels"] = levels_of(l.to_tensor());
    return j;
}

LieElement lie_from_json(const Json& j) {
    double residual = 0.0;
    LieElement l = LieElement::from_tensor(tensor_from_levels(j, context_of(j), 0.0), &residual);
    if (residual > 1e-9) throw ValidationError("tensor is not in the Lie algebra");
    return l;
}

LieElement lie_from_any(const Json& j, const Context& ctx) {
    if (j.is_array()) {
        const Eigen::VectorXd c = vector_from(j);
        if (c.size() != ctx->m()) throw ValidationError("Lie coordinates need m entries");
        return LieElement(ctx, c);
    }
    LieElement l = lie_from_json(j);
    require_same(l.ctx(), ctx);
    return LieElement(ctx, l.coords());
}

Json to_json(const DiscretePath& p) {
    Json j;
    j["d"] = p.ctx->d();
    j["N"] = p.ctx->N();
    j["T"] = p.T;
    j["kind"] = to_string(p.kind);
    j["times"] = p.times;
    Json pts = Json::array();
    for (const auto& x : p.points) pts.push_back(to_json(x));
    j["points"] = pts;
    return j;
}

DiscretePath path_from_json(const Json& j) {
    DiscretePath p;
    p.T = num_from(field(j, "T"));
    p.kind = path_kind_from_string(field(j, "kind").get<std::string>());
    const Json& times = field(j, "times");
    const Json& pts = field(j, "points");
    if (!times.is_array() || !pts.is_array() || times.size() != pts.size())
        throw ValidationError("\"times\" and \"points\" must be arrays of equal length");
    if (j.contains("d")) p.ctx = context_of(j);
    for (std::size_t i = 0; i < pts.size(); ++i) {
        p.times.push_back(num_from(times[i]));
        if (pts[i].is_array()) {
            if (!p.ctx) throw ValidationError("level-list points need \"d\" and \"N\" on the path");
            Json wrapped;
            wrapped["levels"] = pts[i];
            p.points.push_back(GroupElement::from_tensor(tensor_from_levels(wrapped, p.ctx, 1.0)));
        } else {
            GroupElement x = group_from_json(pts[i]);
            if (!p.ctx) p.ctx = x.ctx();
            require_same(p.ctx, x.ctx());
            p.points.push_back(std::move(x));
        }
    }
    if (!p.ctx) throw ValidationError("path has no points and no \"d\", \"N\"");
    p.validate();
    return p;
}

Json to_json(const LevyTriplet& t) {
    Json j;
    j["d"] = t.ctx->d();
    j["N"] = t.ctx->N();
    j["A"] = to_json(t.A);
    j["B"] = to_json(t.B);
    Json pi = Json::object();
    if (t.Pi.stable) pi = stable_to_json(*t.Pi.stable);
    Json atoms = Json::array();
    for (const auto& a : t.Pi.atoms) {
        Json aj;
        aj["point"] = to_json(a.point);
        aj["w"] = a.weight;
        atoms.push_back(aj);
    }
    pi["atoms"] = atoms;
    j["Pi"] = pi;
    return j;
}

LevyTriplet triplet_from_json(const Json& j) {
    const Context c = context_of(j);
    LevyTriplet t = LevyTriplet::zero(c);
    const int m = c->m(), d = c->d();
    if (j.contains("A")) {
        const Eigen::MatrixXd A = matrix_from(j.at("A"));
        if (A.rows() == m && A.cols() == m) {
            t.A = A;
        } else if (A.rows() == d && A.cols() == d) {
            t.A.topLeftCorner(d, d) = A;
        } else if (A.size() != 0) {
            throw ValidationError("A must be m x m or d x d");
        }
    }
    if (j.contains("B")) {
        const Eigen::VectorXd B = vector_from(j.at("B"));
        if (B.size() == m) {
            t.B = B;
        } else if (B.size() == d) {
            t.B.head(d) = B;
        } else if (B.size() != 0) {
            throw ValidationError("B must have m or d entries");
        }
    }
    if (j.contains("Pi")) {
        const Json& pi = j.at("Pi");
        if (!pi.is_object()) throw ValidationError("\"Pi\" must be an object");
        if (pi.contains("atoms")) {
            for (const Json& a : pi.at("atoms")) {
                const Json& pt = field(a, "point");
                GroupElement x = pt.is_array() ? exp(lie_from_any(pt, c)) : group_from_json(pt);
                require_same(x.ctx(), c);
                t.Pi.atoms.push_back({std::move(x), num_from(field(a, "w"))});
            }
        }
        if (pi.contains("family")) {
            if (pi.at("family") != "stable") throw ValidationError("unknown jump family " + pi.at("family").dump());
            StableFamily s;
            s.alpha = num_from(field(pi, "alpha"));
            if (pi.contains("cutoff")) s.cutoff = num_from(pi.at("cutoff"));
            if (pi.contains("upper")) s.upper = num_from(pi.at("upper"));
            if (pi.contains("intensity")) s.intensity = num_from(pi.at("intensity"));
            if (pi.contains("letters")) s.letters = pi.at("letters").get<std::vector<int>>();
            t.Pi.stable = s;
        }
    }
    t.validate();
    return t;
}

Json to_json(const LinearVectorFields& M) {
    Json j;
    Json mats = Json::array();
    for (const auto& a : M.mats()) mats.push_back(to_json(a));
    j["mats"] = mats;
    j["anti_hermitian"] = M.anti_hermitian();
    return j;
}

LinearVectorFields fields_from_json(const Json& j, const Context& ctx) {
    const Json& list = j.is_object() ? field(j, "mats") : j;
    if (!list.is_array()) throw ValidationError("M must be a list of matrices");
    std::vector<CMatrix> mats;
    for (const Json& a : list) mats.push_back(cmatrix_from(a));
    bool ah = false;
    if (j.is_object() && j.contains("anti_hermitian")) {
        ah = j.at("anti_hermitian").get<bool>();
    } else {
        ah = !mats.empty();
        for (const auto& a : mats)
            if (a.rows() != a.cols() || (a + a.adjoint()).norm() > 1e-12) ah = false;
    }
    return LinearVectorFields(ctx, std::move(mats), ah);
}

ArrayFamilyPtr family_from_json(const Json& j) {
    const std::string type = field(j, "type").get<std::string>();
    if (type == "approximating") return std::make_shared<TripletArray>(triplet_from_json(field(j, "triplet")));
    const Context c = context_of(j);
    if (type == "constant") return std::make_shared<ConstantArray>(c);
    const Eigen::VectorXd mu = j.contains("mu") ? vector_from(j.at("mu")) : Eigen::VectorXd::Zero(c->d());
    const Eigen::MatrixXd A = matrix_from(field(j, "A"));
    const int nodes = j.contains("nodes") ? j.at("nodes").get<int>() : 20;
    if (type == "gaussian") return std::make_shared<GaussianArray>(c, mu, A, nodes);
    if (type == "nonlinear") {
        std::vector<Eigen::MatrixXd> C;
        for (const Json& m : field(j, "C")) C.push_back(matrix_from(m));
        return std::make_shared<NonlinearGaussianArray>(c, mu, A, std::move(C), nodes);
    }
    if (type == "perturbed") return std::make_shared<PerturbedArray>(c, mu, A, lie_from_any(field(j, "v"), c), nodes);
    throw ValidationError("unknown array family " + type);
}

PathFunctionPtr make_path_function(const Json& spec, const Context& ctx) {
    if (spec.is_string()) return make_path_function(spec.get<std::string>(), ctx);
    const std::string name = field(spec, "name").get<std::string>();
    if (name == "perturbed") {
        SegmentPath gamma;
        for (const Json& s : field(spec, "gamma")) gamma.push_back(vector_from(s));
        return perturbed_pf(ctx, lie_from_any(field(spec, "v"), ctx), gamma);
    }
    if (name == "custom") {
        std::vector<Eigen::MatrixXd> C;
        for (const Json& m : field(spec, "C")) C.push_back(matrix_from(m));
        return custom_pf(ctx, C, spec.contains("label") ? spec.at("label").get<std::string>() : "custom");
    }
    return make_path_function(name, ctx);
}

PathFunctionPtr make_path_function(const std::string& spec, const Context& ctx) {
    if (spec == "logchord") return log_linear_pf(ctx);
    if (spec == "malcev") return malcev_pf(ctx);
    if (spec == "mcshane") return mcshane_pf(ctx);
    if (spec == "perturbed") return perturbed_pf_default(ctx);
    for (const char* kind : {"perturbed", "custom"}) {
        const std::string prefix = std::string(kind) + ":";
        if (spec.rfind(prefix, 0) == 0) {
            Json j = read_json_file(spec.substr(prefix.size()));
            j["name"] = kind;
            return make_path_function(j, ctx);
        }
    }
    throw ValidationError("unknown path function " + spec);
}

Json to_json(const PvarReport& r) {
    Json j;
    j["p"] = r.p;
    j["value"] = num(r.value);
    j["sum"] = num(r.sum);
    j["witness_times"] = r.witness_times;
    return j;
}

Json to_json(const OscillationReport& r) {
    Json j;
    j["delta"] = r.delta;
    j["count"] = r.count;
    j["stop_times"] = r.stop_times;
    return j;
}

Json to_json(const ExponentReport& r, const Context& ctx) {
    auto term = [&](const ExponentTerm& t) {
        Json j;
        j["condition"] = t.condition;
        j["index"] = t.index;
        j["basis"] = t.index >= 0 ? ctx->bracket_string(t.index) : "";
        j["bound"] = num(t.bound);
        j["excluded"] = t.excluded;
        return j;
    };
    Json j;
    j["p_star"] = num(r.p_star);
    j["boundary"] = r.boundary;
    Json b = Json::array(), terms = Json::array();
    for (const auto& t : r.binding) b.push_back(term(t));
    for (const auto& t : r.terms) terms.push_back(term(t));
    j["binding"] = b;
    j["terms"] = terms;
    return j;
}

Json to_json(const MomentEstimate& m) {
    Json j;
    j["mc"] = num(m.mc);
    j["stderr"] = num(m.stderr_);
    j["exact"] = m.has_exact() ? num(m.exact) : Json(nullptr);
    return j;
}

Json to_json(const CharFunctionReport& r, const Context& ctx) {
    Json j;
    j["pass"] = r.pass;
    j["error"] = num(r.error);
    j["tolerance"] = num(r.tolerance);
    j["stderr_op"] = num(r.stderr_op);
    j["max_unitarity"] = num(r.max_unitarity);
    j["truncation_bound"] = num(r.truncation_bound);
    j["n_samples"] = r.n_samples;
    j["n_steps"] = r.n_steps;
    j["T"] = r.T;
    j["psi"] = to_json(r.psi);
    j["closed_form"] = to_json(r.closed_form);
    j["mc_mean"] = to_json(r.mc_mean);
    j["exponent"] = to_json(r.exponent, ctx);
    return j;
}

Json to_json(const ConvergenceReport& r) {
    Json j;
    j["psi"] = to_json(r.psi);
    j["target"] = to_json(r.target);
    j["inversions"] = r.inversions;
    Json rows = Json::array();
    for (const auto& row : r.rows) {
        Json x;
        x["n"] = row.n;
        x["exact_error"] = num(row.exact_error);
        x["mc_error"] = num(row.mc_error);
        rows.push_back(x);
    }
    j["rows"] = rows;
    return j;
}

Json to_json(const ScalesReport& r) {
    Json j;
    j["slope"] = num(r.slope);
    j["tail_slope"] = num(r.tail_slope);
    j["growing"] = r.growing;
    j["sup"] = num(r.sup);
    Json rows = Json::array();
    for (const auto& row : r.rows) {
        Json x = to_json(row.value);
        x["n"] = row.n;
        rows.push_back(x);
    }
    j["rows"] = rows;
    return j;
}

Json to_json(const FeinsilverReport& r) {
    Json j;
    Json pf = Json::array();
    for (double v : r.pi_f) pf.push_back(num(v));
    j["pi_f"] = pf;
    j["B"] = to_json(r.B);
    j["second_limit"] = to_json(r.second_limit);
    Json rows = Json::array();
    for (const auto& row : r.rows) {
        Json x;
        x["n"] = row.n;
        Json b = Json::array();
        for (const auto& m : row.bumps) b.push_back(to_json(m));
        x["bumps"] = b;
        x["drift"] = to_json(row.drift);
        x["second"] = to_json(row.second);
        x["drift_err"] = num(row.drift_err);
        x["second_err"] = num(row.second_err);
        x["bump_err"] = num(row.bump_err);
        rows.push_back(x);
    }
    j["rows"] = rows;
    return j;
}

Json to_json(const DivergenceReport& r) {
    Json j;
    j["coord"] = r.coord;
    j["q"] = r.q;
    j["slope"] = num(r.slope);
    j["partition_slope"] = num(r.partition_slope);
    Json rows = Json::array();
    for (const auto& row : r.rows) {
        Json x;
        x["steps"] = row.steps;
        x["mean"] = num(row.mean);
        x["stderr"] = num(row.stderr_);
        x["partition_sup"] = num(row.partition_sup);
        x["partition_sup_stderr"] = num(row.partition_sup_stderr);
        rows.push_back(x);
    }
    j["rows"] = rows;
    return j;
}

Json to_json(const TightnessReport& r) {
    Json j;
    j["all_pass"] = r.all_pass;
    Json rows = Json::array();
    for (const auto& row : r.rows) {
        Json x;
        x["delta"] = row.delta;
        x["h"] = row.h;
        x["q_hat"] = num(row.q_hat);
        x["q_stderr"] = num(row.q_stderr);
        x["mean_nu"] = num(row.mean_nu);
        x["nu_stderr"] = num(row.nu_stderr);
        x["bound"] = num(row.bound);
        x["pass"] = row.pass;
        rows.push_back(x);
    }
    j["rows"] = rows;
    return j;
}

Json read_json_file(const std::filesystem::path& p) {
    std::ifstream in(p);
    if (!in) throw ValidationError("cannot open " + p.string());
    try {
        return Json::parse(in);
    } catch (const nlohmann::json::exception& e) {
        throw ValidationError(p.string() + ": " + e.what());
    }
}

void write_text_file(const std::filesystem::path& p, const std::string& text) {
    if (p.has_parent_path()) std::filesystem::create_directories(p.parent_path());
    std::ofstream out(p, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + p.string());
    out << text;
    if (!out) throw std::runtime_error("write failed: " + p.string());
}

std::string dump(const Json& j) { return j.dump(2) + "\n"; }

CsvWriter::CsvWriter(std::vector<std::string> header) : columns_(header.size()) {
    for (std::size_t i = 0; i < header.size(); ++i) out_ += (i ? "," : "") + header[i];
    out_ += "\n";
}

CsvWriter& CsvWriter::cell(double x) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", x);
    return cell(std::string(buf));
}

CsvWriter& CsvWriter::cell(long x) { return cell(std::to_string(x)); }

CsvWriter& CsvWriter::cell(const std::string& s) {
    if (filled_ > 0) out_ += ",";
    out_ += s;
    ++filled_;
    return *this;
}

void CsvWriter::end_row() {
    if (filled_ != columns_) throw std::logic_error("CSV row has the wrong number of cells");
    out_ += "\n";
    filled_ = 0;
}

std::string path_csv(const DiscretePath& p) {
    std::vector<std::string> header{"t"};
    for (int i = 1; i <= p.ctx->d(); ++i) header.push_back("x" + std::to_string(i));
    CsvWriter w(header);
    for (std::size_t k = 0; k < p.size(); ++k) {
        w.cell(p.times[k]);
        const auto l1 = p.points[k].level(1);
        for (Eigen::Index i = 0; i < l1.size(); ++i) w.cell(l1[i]);
        w.end_row();
    }
    return w.str();
}

std::string time_change_csv(const TimeChange& tau, const std::vector<double>& grid) {
    CsvWriter w({"t", "tau"});
    for (double t : grid) {
        w.cell(t);
        w.cell(tau.eval(t));
        w.end_row();
    }
    return w.str();
}

} // namespace levyrough
