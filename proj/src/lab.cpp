#include "levyrough/lab.hpp"

#include "levyrough/errors.hpp"

#include <cmath>
#include <cstdio>
#include <map>
#include <sstream>

namespace levyrough {

namespace {

template <class T>
T opt(Json& cfg, const char* key, T def) {
    if (!cfg.contains(key)) cfg[key] = def;
    try {
        return cfg.at(key).get<T>();
    } catch (const nlohmann::json::exception&) {
        throw ValidationError(std::string("config key \"") + key + "\" has the wrong type");
    }
}

const Json& need(const Json& cfg, const char* key) {
    if (!cfg.contains(key)) throw ValidationError(std::string("config needs \"") + key + "\"");
    return cfg.at(key);
}

long positive(long v, const char* what) {
    if (v < 1) throw ValidationError(std::string(what) + " must be positive");
    return v;
}

std::string fmt(double x) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.6g", x);
    return buf;
}

GroupElement level1_exp(const Context& c, std::initializer_list<double> v, double area = 0.0) {
    LieElement l(c);
    int i = 0;
    for (double x : v) l.coords()[i++] = x;
    if (c->N() >= 2 && c->m() > c->d()) l.coords()[c->d()] = area;
    return exp(l);
}

Json resolve_triplet(const Json& j) {
    if (j.is_string()) {
        const std::string s = j.get<std::string>();
        if (s.rfind("preset:", 0) == 0) return to_json(preset_triplet(s.substr(7)));
        return read_json_file(s);
    }
    return j;
}

Json resolve_family(Json j) {
    if (j.is_string()) j = read_json_file(j.get<std::string>());
    if (j.is_object() && j.contains("triplet")) j["triplet"] = resolve_triplet(j.at("triplet"));
    return j;
}

Json resolve_phi(const Json& j) {
    if (!j.is_string()) return j;
    const std::string s = j.get<std::string>();
    for (const char* kind : {"perturbed", "custom"}) {
        const std::string prefix = std::string(kind) + ":";
        if (s.rfind(prefix, 0) == 0) {
            Json f = read_json_file(s.substr(prefix.size()));
            f["name"] = kind;
            return f;
        }
    }
    return j;
}

LinearVectorFields fields_from(const Json& j, const Context& ctx) {
    if (j.is_string()) {
        const std::string s = j.get<std::string>();
        if (s.rfind("preset:", 0) == 0) return preset_fields(s.substr(7), ctx);
        throw ValidationError("unresolved M reference " + s);
    }
    return fields_from_json(j, ctx);
}

std::vector<long> long_list(Json& cfg, const char* key, std::vector<long> def) {
    const auto v = opt(cfg, key, def);
    if (v.empty()) throw ValidationError(std::string(key) + " must not be empty");
    for (long n : v) positive(n, key);
    return v;
}

void common(Json& cfg, std::uint64_t& seed, int& jobs) {
    seed = opt<std::uint64_t>(cfg, "seed", 1);
    jobs = static_cast<int>(positive(opt(cfg, "jobs", 1), "jobs"));
}

std::string matrix_csv(const std::vector<std::pair<std::string, const CMatrix*>>& cols) {
    std::vector<std::string> header{"i", "j"};
    for (const auto& c : cols) {
        header.push_back(c.first + "_re");
        header.push_back(c.first + "_im");
    }
    CsvWriter w(header);
    const CMatrix& first = *cols.front().second;
    for (Eigen::Index i = 0; i < first.rows(); ++i)
        for (Eigen::Index k = 0; k < first.cols(); ++k) {
            w.cell(static_cast<long>(i)).cell(static_cast<long>(k));
            for (const auto& c : cols) w.cell((*c.second)(i, k).real()).cell((*c.second)(i, k).imag());
            w.end_row();
        }
    return w.str();
}

// ---- commands

CommandResult cmd_simulate(Json& cfg) {
    const LevyTriplet t = triplet_from_json(need(cfg, "triplet"));
    const int steps = static_cast<int>(positive(opt(cfg, "steps", 256), "steps"));
    const double T = opt(cfg, "T", 1.0);
    if (!(T > 0)) throw ValidationError("T must be positive");
    const long samples = positive(opt(cfg, "samples", 10L), "samples");
    const long keep = std::min(samples, opt(cfg, "keep", std::min(samples, 10L)));
    std::uint64_t seed;
    int jobs;
    common(cfg, seed, jobs);

    const Context& c = t.ctx;
    const int m = c->m(), d = c->d();
    constexpr long kSimBlock = 64;
    const std::size_t blocks = (samples + kSimBlock - 1) / kSimBlock;
    auto terminal = run_blocks<Eigen::MatrixXd>(blocks, jobs, [&](std::size_t b) {
        const long lo = static_cast<long>(b) * kSimBlock, hi = std::min(samples, lo + kSimBlock);
        Eigen::MatrixXd out(m, hi - lo);
        for (long s = lo; s < hi; ++s)
            out.col(s - lo) = xi_coords(sample_levy(t, steps, T, stream_seed(seed, s)).path.endpoint());
        return out;
    });
    Eigen::MatrixXd X(m, samples);
    for (std::size_t b = 0; b < blocks; ++b) X.middleCols(b * kSimBlock, terminal[b].cols()) = terminal[b];

    const Eigen::MatrixXd L1 = X.topRows(d);
    const Eigen::VectorXd mean = L1.rowwise().mean();
    const Eigen::MatrixXd centred = L1.colwise() - mean;
    const double dof = samples > 1 ? static_cast<double>(samples - 1) : 1.0;
    const Eigen::MatrixXd cov = centred * centred.transpose() / dof;
    Eigen::VectorXd mean_se(d), var_se(d);
    for (int i = 0; i < d; ++i) {
        mean_se[i] = std::sqrt(cov(i, i) / samples);
        const double m4 = centred.row(i).array().pow(4).mean();
        var_se[i] = std::sqrt(std::max(0.0, m4 - cov(i, i) * cov(i, i)) / samples);
    }
    const Eigen::VectorXd expected_mean = T * t.B.head(d);
    const Eigen::MatrixXd expected_cov =
        T * (t.A.topLeftCorner(d, d) + t.Pi.xi_second_moment(c).topLeftCorner(d, d));

    std::vector<std::string> header{"sample", "t", "jump"};
    for (int i = 1; i <= d; ++i) header.push_back("x" + std::to_string(i));
    CsvWriter pw(header);
    Json kept = Json::array();
    for (long s = 0; s < keep; ++s) {
        const SampledPath sp = sample_levy(t, steps, T, stream_seed(seed, s));
        for (std::size_t k = 0; k < sp.path.size(); ++k) {
            pw.cell(s).cell(sp.path.times[k]).cell(static_cast<long>(sp.jump_mask[k]));
            const auto l1 = sp.path.points[k].level(1);
            for (int i = 0; i < d; ++i) pw.cell(l1[i]);
            pw.end_row();
        }
        kept.push_back(to_json(sp.path));
    }
    std::vector<std::string> th{"sample"};
    for (int i = 0; i < m; ++i) th.push_back("xi" + std::to_string(i + 1));
    CsvWriter tw(th);
    for (long s = 0; s < samples; ++s) {
        tw.cell(s);
        for (int i = 0; i < m; ++i) tw.cell(X(i, s));
        tw.end_row();
    }

    CommandResult r;
    Json summary;
    summary["level1_mean"] = to_json(mean);
    summary["level1_mean_stderr"] = to_json(mean_se);
    summary["expected_mean"] = to_json(expected_mean);
    summary["level1_cov"] = to_json(cov);
    summary["level1_var_stderr"] = to_json(var_se);
    summary["expected_cov"] = to_json(expected_cov);
    r.report["terminal"] = summary;
    r.report["paths"] = kept;
    r.csv = {{"simulate.csv", pw.str()}, {"simulate_terminal.csv", tw.str()}};
    r.summary = "simulated " + std::to_string(samples) + " paths, level-1 terminal mean " + fmt(mean[0]) + " (expected " +
                fmt(expected_mean[0]) + ")";
    return r;
}

CommandResult cmd_signature(Json& cfg) {
    const int N = static_cast<int>(positive(opt(cfg, "N", 2), "N"));
    const double T = opt(cfg, "T", 1.0);
    const Json& segs = need(cfg, "segments");
    if (!segs.is_array() || segs.empty()) throw ValidationError("segments must be a non-empty list of vectors");
    std::vector<Eigen::VectorXd> v;
    for (const Json& s : segs) v.push_back(vector_from(s));
    const int d = static_cast<int>(v.front().size());
    if (d < 1) throw ValidationError("segments must have positive dimension");
    const Context c = context_for(d, N);
    const DiscretePath p = signature_lift(c, v, T);
    const GroupElement& x = p.endpoint();
    const LieElement l = log(x);

    CommandResult r;
    r.report["signature"] = to_json(x);
    Json lg;
    lg["coords"] = to_json(l.coords());
    Json names = Json::array();
    for (int i = 0; i < c->m(); ++i) names.push_back(c->bracket_string(i));
    lg["basis"] = names;
    r.report["log"] = lg;
    if (N >= 2) {
        Eigen::MatrixXd area(d, d);
        for (int i = 0; i < d; ++i)
            for (int k = 0; k < d; ++k) area(i, k) = 0.5 * (x.coeff({i, k}) - x.coeff({k, i}));
        r.report["levy_area"] = to_json(area);
    }
    CsvWriter w({"word", "coefficient"});
    for (const Word& wd : c->words()) {
        w.cell(c->word_string(wd)).cell(x.coeff(wd));
        w.end_row();
    }
    r.csv = {{"signature.csv", w.str()}};
    r.summary = "signature of " + std::to_string(v.size()) + " segments in G^" + std::to_string(N) + "(R^" +
                std::to_string(d) + ")" + (N >= 2 && d >= 2 ? ", area_12 " + fmt(0.5 * (x.coeff({0, 1}) - x.coeff({1, 0}))) : "");
    return r;
}

CommandResult cmd_pvar(Json& cfg) {
    const DiscretePath path = path_from_json(need(cfg, "path"));
    const double p = opt(cfg, "p", 2.0);
    PvarOptions o;
    o.refine = static_cast<int>(opt(cfg, "refine", 1));
    o.cap = static_cast<std::size_t>(positive(opt(cfg, "cap", 5000L), "cap"));
    const PvarReport rep = p_variation(path, p, o);

    CommandResult r;
    r.report["pvar"] = to_json(rep);
    r.report["upper_bound"] = num(pvar_upper_bound(path, p));
    CsvWriter w({"k", "t"});
    for (std::size_t k = 0; k < rep.witness_times.size(); ++k) {
        w.cell(static_cast<long>(k)).cell(rep.witness_times[k]);
        w.end_row();
    }
    r.csv = {{"pvar_witness.csv", w.str()}};
    r.summary = "p=" + fmt(p) + " variation " + fmt(rep.value);
    return r;
}

CommandResult cmd_connect(Json& cfg) {
    const DiscretePath x = path_from_json(need(cfg, "path"));
    const auto phi = make_path_function(opt<Json>(cfg, "phi", "logchord"), x.ctx);
    ConnectConfig cc;
    cc.r_first = opt(cfg, "r_first", cc.r_first);
    cc.ratio = opt(cfg, "ratio", cc.ratio);
    const ConnectResult cr = connect(x, *phi, cc);

    CommandResult r;
    Json tau;
    tau["T"] = cr.tau.T;
    tau["total"] = cr.tau.total;
    tau["jump_times"] = cr.tau.jump_times;
    tau["window"] = cr.tau.window;
    tau["r_index"] = cr.tau.r_index;
    r.report["n_jumps"] = cr.tau.jump_times.size();
    r.report["identity"] = cr.tau.jump_times.empty();
    r.report["time_change"] = tau;
    r.report["stamp_index"] = cr.stamp_index;
    if (cfg.contains("p")) {
        const double p = cfg.at("p").get<double>();
        PvarOptions o;
        o.refine = static_cast<int>(opt(cfg, "refine", 1));
        const double vx = p_variation(x, p, o).value, vc = p_variation(cr.path, p, o).value;
        const double C = phi->approx_constant(p);
        const double R = connecting_R(C, p);
        Json b;
        b["p"] = p;
        b["pvar_input"] = num(vx);
        b["pvar_connected"] = num(vc);
        b["C"] = num(C);
        b["R"] = num(R);
        b["ratio"] = vx > 0 ? num(std::pow(vc / vx, p)) : Json(nullptr);
        b["holds"] = std::pow(vc, p) <= R * std::pow(vx, p) * (1 + 1e-12) + 1e-300;
        r.report["bound"] = b;
    }
    r.report["path"] = to_json(cr.path);
    std::vector<double> grid = x.times;
    r.csv = {{"connect_time_change.csv", time_change_csv(cr.tau, grid)}, {"connect_path.csv", path_csv(cr.path)}};
    r.summary = "connected " + std::to_string(cr.tau.jump_times.size()) + " jumps with " + phi->name() +
                ", inserted time " + fmt(cr.tau.total);
    return r;
}

CommandResult cmd_lk(Json& cfg) {
    const LevyTriplet t = triplet_from_json(need(cfg, "triplet"));
    const auto phi = make_path_function(opt<Json>(cfg, "phi", "logchord"), t.ctx);
    const LinearVectorFields M = fields_from(opt<Json>(cfg, "M", "preset:pauli"), t.ctx);
    const long samples = positive(opt(cfg, "samples", 100000L), "samples");
    const int steps = static_cast<int>(positive(opt(cfg, "steps", 1024), "steps"));
    const double T = opt(cfg, "T", 1.0);
    std::uint64_t seed;
    int jobs;
    common(cfg, seed, jobs);
    const CharFunctionReport rep = lk_verify(t, phi, M, samples, steps, seed, jobs, T);

    CommandResult r;
    r.report["lk"] = to_json(rep, t.ctx);
    r.csv = {{"lk.csv", matrix_csv({{"closed_form", &rep.closed_form}, {"mc_mean", &rep.mc_mean}, {"psi", &rep.psi}})}};
    r.exit_code = rep.pass ? kExitOk : kExitTolerance;
    r.summary = std::string(rep.pass ? "PASS" : "FAIL") + " error " + fmt(rep.error) + " tolerance " + fmt(rep.tolerance) +
                " unitarity " + fmt(rep.max_unitarity);
    return r;
}

CommandResult cmd_minp(Json& cfg) {
    const LevyTriplet t = triplet_from_json(need(cfg, "triplet"));
    const double tol = opt(cfg, "tol", 1e-12);
    const PvarExponentInput in = exponent_input(t, tol);
    const ExponentReport rep = min_pvar_exponent(in, t.ctx);

    CommandResult r;
    r.report["exponent"] = to_json(rep, t.ctx);
    r.report["J"] = in.J;
    r.report["K"] = in.K;
    Json g = Json::array();
    for (const auto& s : in.gamma_sup) {
        Json x;
        x["sup"] = num(s.sup);
        x["attained"] = s.attained;
        g.push_back(x);
    }
    r.report["gamma_sup"] = g;
    CsvWriter w({"condition", "index", "basis", "bound", "excluded"});
    for (const auto& term : rep.terms) {
        w.cell(term.condition).cell(static_cast<long>(term.index));
        w.cell(term.index >= 0 ? t.ctx->bracket_string(term.index) : std::string("-"));
        w.cell(term.bound).cell(static_cast<long>(term.excluded));
        w.end_row();
    }
    r.csv = {{"minp.csv", w.str()}};
    r.summary = "p_star " + fmt(rep.p_star) + " (" + rep.boundary + ")";
    return r;
}

CommandResult cmd_probe(Json& cfg) {
    const std::string kind = need(cfg, "kind").get<std::string>();
    std::uint64_t seed;
    int jobs;
    CommandResult r;
    if (kind == "feinsilver") {
        const ArrayFamilyPtr fam = family_from_json(need(cfg, "family"));
        Json tj = cfg.contains("triplet") ? cfg.at("triplet") : fam->name() == "approximating" ? cfg["family"]["triplet"] : Json();
        if (tj.is_null()) throw ValidationError("feinsilver probe needs the limit \"triplet\"");
        const LevyTriplet t = triplet_from_json(tj);
        std::vector<BumpFunction> bumps;
        for (const Json& b : opt(cfg, "bumps", Json::array())) {
            const Json& cj = need(b, "center");
            GroupElement center = cj.is_array() ? exp(lie_from_any(cj, t.ctx)) : group_from_json(cj);
            bumps.push_back({center, b.contains("radius") ? b.at("radius").get<double>() : 0.5});
        }
        const auto grid = long_list(cfg, "n_grid", {16, 64, 256, 1024});
        const int mc = static_cast<int>(opt(cfg, "mc", 0));
        common(cfg, seed, jobs);
        const FeinsilverReport rep = feinsilver_probe(*fam, t, bumps, grid, mc, seed, jobs);
        r.report["feinsilver"] = to_json(rep);
        CsvWriter w({"n", "drift_err", "second_err", "bump_err"});
        for (const auto& row : rep.rows) {
            w.cell(row.n).cell(row.drift_err).cell(row.second_err).cell(row.bump_err);
            w.end_row();
        }
        r.csv = {{"probe_feinsilver.csv", w.str()}};
        const auto& last = rep.rows.back();
        r.summary = "n=" + std::to_string(last.n) + " drift_err " + fmt(last.drift_err) + " second_err " +
                    fmt(last.second_err) + " bump_err " + fmt(last.bump_err);
    } else if (kind == "tightness") {
        const ArrayFamilyPtr fam = family_from_json(need(cfg, "family"));
        const long n = positive(opt(cfg, "n", 1024L), "n");
        const double T = opt(cfg, "T", 1.0);
        const auto deltas = opt(cfg, "deltas", std::vector<double>{0.25, 0.5, 1.0});
        const double a = opt(cfg, "a", 1.0), kappa = opt(cfg, "kappa", 2.0);
        const int mc = static_cast<int>(positive(opt(cfg, "mc", 300), "mc"));
        common(cfg, seed, jobs);
        const TightnessReport rep = tightness_probe(*fam, n, T, deltas, a, kappa, mc, seed, jobs);
        r.report["tightness"] = to_json(rep);
        CsvWriter w({"delta", "h", "q_hat", "q_stderr", "mean_nu", "nu_stderr", "bound", "pass"});
        for (const auto& row : rep.rows) {
            w.cell(row.delta).cell(row.h).cell(row.q_hat).cell(row.q_stderr).cell(row.mean_nu).cell(row.nu_stderr);
            w.cell(row.bound).cell(static_cast<long>(row.pass));
            w.end_row();
        }
        r.csv = {{"probe_tightness.csv", w.str()}};
        r.exit_code = rep.all_pass ? kExitOk : kExitTolerance;
        r.summary = std::string(rep.all_pass ? "PASS" : "FAIL") + " tightness bound on " + std::to_string(rep.rows.size()) +
                    " deltas";
    } else if (kind == "bg") {
        const LevyTriplet t = triplet_from_json(need(cfg, "triplet"));
        const int coord = static_cast<int>(opt(cfg, "coord", 0));
        const double q = opt(cfg, "q", 2.0);
        const auto meshes = opt(cfg, "meshes", std::vector<int>{64, 128, 256, 512});
        const int mc = static_cast<int>(positive(opt(cfg, "mc", 200), "mc"));
        const double T = opt(cfg, "T", 1.0);
        const int cap = static_cast<int>(opt(cfg, "partition_cap", 0));
        common(cfg, seed, jobs);
        const DivergenceReport rep = bg_divergence_probe(t, coord, q, meshes, mc, T, seed, jobs, cap);
        r.report["bg"] = to_json(rep);
        CsvWriter w({"steps", "mean", "stderr", "partition_sup"});
        for (const auto& row : rep.rows) {
            w.cell(static_cast<long>(row.steps)).cell(row.mean).cell(row.stderr_).cell(row.partition_sup);
            w.end_row();
        }
        r.csv = {{"probe_bg.csv", w.str()}};
        r.summary = "coord " + std::to_string(coord) + " q=" + fmt(q) + " slope " + fmt(rep.slope) + ", finest mean " +
                    fmt(rep.rows.back().mean);
    } else {
        throw ValidationError("unknown probe kind " + kind + " (feinsilver, tightness, bg)");
    }
    return r;
}

CommandResult cmd_walk_converge(Json& cfg) {
    const ArrayFamilyPtr fam = family_from_json(need(cfg, "family"));
    const auto phi = make_path_function(opt<Json>(cfg, "phi", "logchord"), fam->ctx());
    const LinearVectorFields M = fields_from(opt<Json>(cfg, "M", "preset:pauli"), fam->ctx());
    const auto grid = long_list(cfg, "n_grid", {16, 32, 64, 128, 256, 512, 1024});
    const int mc = static_cast<int>(opt(cfg, "mc", 0));
    const int allowed = static_cast<int>(opt(cfg, "max_inversions", 1));
    std::uint64_t seed;
    int jobs;
    common(cfg, seed, jobs);
    const ConvergenceReport rep = convergence_experiment(*fam, *phi, M, grid, mc, seed, jobs);

    CommandResult r;
    r.report["convergence"] = to_json(rep);
    CsvWriter w({"n", "exact_error", "mc_error"});
    for (const auto& row : rep.rows) {
        w.cell(row.n).cell(row.exact_error).cell(row.mc_error);
        w.end_row();
    }
    r.csv = {{"walk_converge.csv", w.str()}};
    const bool ok = rep.inversions <= allowed;
    r.exit_code = ok ? kExitOk : kExitTolerance;
    r.summary = std::string(ok ? "PASS" : "FAIL") + " " + fam->name() + " with " + phi->name() + ": error " +
                fmt(rep.rows.front().exact_error) + " -> " + fmt(rep.rows.back().exact_error) + ", inversions " +
                std::to_string(rep.inversions);
    return r;
}

Json gaussian_family(const std::string& type) {
    Json f;
    f["type"] = type;
    f["d"] = 2;
    f["N"] = 2;
    f["mu"] = {0.2, -0.1};
    f["A"] = {{1.0, 0.3}, {0.3, 0.5}};
    return f;
}

} // namespace

LevyTriplet preset_triplet(const std::string& name) {
    const Context c2 = context_for(2, 2);
    LevyTriplet t = LevyTriplet::zero(c2);
    auto brownian = [&](LevyTriplet& x) { x.A.topLeftCorner(2, 2).setIdentity(); };
    auto atoms = [&](LevyTriplet& x) {
        x.Pi.atoms.push_back({level1_exp(c2, {0.8, -0.3}, 0.2), 1.5});
        x.Pi.atoms.push_back({level1_exp(c2, {-0.4, 0.6}, -0.1), 0.7});
    };
    if (name == "brownian") {
        brownian(t);
    } else if (name == "drift") {
        t.B << 1.0, -0.5, 0.0;
    } else if (name == "compound_poisson") {
        atoms(t);
        t.B = t.Pi.xi_integral(c2);
    } else if (name == "jump_diffusion") {
        brownian(t);
        atoms(t);
        t.B << 0.1, 0.0, 0.0;
    } else if (name == "stable") {
        t.Pi.stable = StableFamily{};
    } else if (name == "level2_g4") {
        t = LevyTriplet::zero(context_for(2, 4));
        t.A.topLeftCorner(2, 2).setIdentity();
        t.A(2, 2) = 1.0;
    } else {
        throw ValidationError("unknown triplet preset " + name);
    }
    t.validate();
    return t;
}

LinearVectorFields preset_fields(const std::string& name, const Context& ctx) {
    if (name != "pauli") throw ValidationError("unknown M preset " + name);
    if (ctx->d() > 3) throw ValidationError("the pauli preset covers d <= 3");
    const Complex i(0, 1);
    CMatrix x(2, 2), y(2, 2), z(2, 2);
    x << 0, i, i, 0;
    y << 0, 1, -1, 0;
    z << i, 0, 0, -i;
    std::vector<CMatrix> all{x, y, z};
    all.resize(ctx->d());
    return LinearVectorFields(ctx, all, true);
}

std::vector<std::string> preset_names(const std::string& command) {
    static const std::map<std::string, std::vector<std::string>> names{
        {"simulate", {"brownian", "compound_poisson", "jump_diffusion", "stable"}},
        {"lk", {"brownian", "compound_poisson", "jump_diffusion"}},
        {"minp", {"brownian", "stable", "drift", "level2_g4", "compound_poisson"}},
        {"probe",
         {"feinsilver", "tightness_gaussian", "tightness_poisson", "tightness_nonlinear", "bg_brownian", "bg_drift",
          "bg_stable"}},
        {"walk-converge", {"kunita", "nonlinear", "perturbed"}},
    };
    auto it = names.find(command);
    return it == names.end() ? std::vector<std::string>{} : it->second;
}

Json preset_config(const std::string& command, const std::string& name) {
    Json j;
    if (command == "simulate") {
        j["triplet"] = "preset:" + name;
        j["samples"] = name == "stable" ? 20 : 1000;
        j["steps"] = 256;
    } else if (command == "lk") {
        j["triplet"] = "preset:" + name;
        j["M"] = "preset:pauli";
        if (name == "brownian") {
            j["phi"] = "logchord";
            j["samples"] = 100000;
            j["steps"] = 1024;
        } else if (name == "compound_poisson") {
            j["phi"] = "malcev";
            j["samples"] = 100000;
            j["steps"] = 8;
        } else if (name == "jump_diffusion") {
            j["phi"] = "malcev";
            j["samples"] = 20000;
            j["steps"] = 256;
        } else {
            throw ValidationError("unknown lk preset " + name);
        }
    } else if (command == "minp") {
        j["triplet"] = "preset:" + name;
    } else if (command == "probe") {
        if (name == "feinsilver") {
            j["kind"] = "feinsilver";
            j["family"] = {{"type", "approximating"}, {"triplet", "preset:compound_poisson"}};
            const LevyTriplet t = preset_triplet("compound_poisson");
            Json bumps = Json::array();
            for (const auto& a : t.Pi.atoms) bumps.push_back({{"center", to_json(a.point)}, {"radius", 0.3}});
            j["bumps"] = bumps;
            j["n_grid"] = {16, 64, 256, 1024};
            j["mc"] = 0;
        } else if (name.rfind("tightness_", 0) == 0) {
            j["kind"] = "tightness";
            j["n"] = 1024;
            j["deltas"] = {0.25, 0.5, 1.0};
            j["a"] = 1.0;
            j["kappa"] = 2.0;
            j["mc"] = 300;
            if (name == "tightness_gaussian") {
                j["family"] = gaussian_family("gaussian");
            } else if (name == "tightness_poisson") {
                j["family"] = {{"type", "approximating"}, {"triplet", "preset:jump_diffusion"}};
            } else if (name == "tightness_nonlinear") {
                Json f = gaussian_family("nonlinear");
                f["C"] = {{{1.0, 0.0}, {0.0, 0.0}}, {{0.0, 0.0}, {0.0, 1.0}}};
                j["family"] = f;
            } else {
                throw ValidationError("unknown probe preset " + name);
            }
        } else if (name.rfind("bg_", 0) == 0) {
            j["kind"] = "bg";
            j["coord"] = 0;
            j["meshes"] = {64, 128, 256, 512};
            j["mc"] = 200;
            if (name == "bg_brownian") {
                j["triplet"] = "preset:brownian";
                j["q"] = 2.0;
            } else if (name == "bg_drift") {
                j["triplet"] = "preset:drift";
                j["q"] = 1.0;
                j["mc"] = 4;
            } else if (name == "bg_stable") {
                Json t = to_json(preset_triplet("stable"));
                t["Pi"]["cutoff"] = 5e-3;
                t["Pi"]["letters"] = {0};
                j["triplet"] = t;
                j["q"] = 1.0;
            } else {
                throw ValidationError("unknown probe preset " + name);
            }
        } else {
            throw ValidationError("unknown probe preset " + name);
        }
    } else if (command == "walk-converge") {
        j["M"] = "preset:pauli";
        j["n_grid"] = {16, 32, 64, 128, 256, 512, 1024};
        if (name == "kunita") {
            j["family"] = gaussian_family("gaussian");
            j["phi"] = "logchord";
        } else if (name == "nonlinear") {
            Json f = gaussian_family("nonlinear");
            f["C"] = {{{1.0, 0.0}, {0.0, 0.0}}, {{0.0, 0.0}, {0.0, 1.0}}};
            j["family"] = f;
            j["phi"] = "mcshane";
        } else if (name == "perturbed") {
            Json f = gaussian_family("perturbed");
            f["v"] = {0.0, 0.0, 0.8};
            j["family"] = f;
            j["phi"] = "perturbed";
        } else {
            throw ValidationError("unknown walk-converge preset " + name);
        }
    } else {
        throw ValidationError("no presets for " + command);
    }
    return j;
}

Json resolve_config(const std::string& command, Json cfg) {
    if (!cfg.is_object()) throw ValidationError("config must be a JSON object");
    if (cfg.contains("preset")) {
        Json base = preset_config(command, cfg.at("preset").get<std::string>());
        for (auto it = cfg.begin(); it != cfg.end(); ++it)
            if (it.key() != "preset") base[it.key()] = it.value();
        cfg = std::move(base);
    }
    if (cfg.contains("triplet")) cfg["triplet"] = resolve_triplet(cfg.at("triplet"));
    if (cfg.contains("family")) cfg["family"] = resolve_family(cfg.at("family"));
    if (cfg.contains("phi")) cfg["phi"] = resolve_phi(cfg.at("phi"));
    for (const char* key : {"path", "segments"})
        if (cfg.contains(key) && cfg.at(key).is_string()) cfg[key] = read_json_file(cfg.at(key).get<std::string>());
    if (cfg.contains("segments") && cfg.at("segments").is_object()) {
        const Json s = cfg.at("segments");
        cfg["segments"] = need(s, "segments");
        if (s.contains("N") && !cfg.contains("N")) cfg["N"] = s.at("N");
        if (s.contains("T") && !cfg.contains("T")) cfg["T"] = s.at("T");
    }
    if (cfg.contains("M") && cfg.at("M").is_string()) {
        const std::string s = cfg.at("M").get<std::string>();
        if (s.rfind("preset:", 0) != 0) cfg["M"] = read_json_file(s);
    }
    return cfg;
}

CommandResult run_command(const std::string& command, Json cfg) {
    cfg = resolve_config(command, std::move(cfg));
    CommandResult r;
    if (command == "simulate") {
        r = cmd_simulate(cfg);
    } else if (command == "signature") {
        r = cmd_signature(cfg);
    } else if (command == "pvar") {
        r = cmd_pvar(cfg);
    } else if (command == "connect") {
        r = cmd_connect(cfg);
    } else if (command == "lk") {
        r = cmd_lk(cfg);
    } else if (command == "minp") {
        r = cmd_minp(cfg);
    } else if (command == "probe") {
        r = cmd_probe(cfg);
    } else if (command == "walk-converge") {
        r = cmd_walk_converge(cfg);
    } else {
        throw ValidationError("unknown command " + command);
    }
    Json report;
    report["command"] = command;
    report["config"] = cfg;
    report["exit_code"] = r.exit_code;
    for (auto it = r.report.begin(); it != r.report.end(); ++it) report[it.key()] = it.value();
    r.report = std::move(report);
    return r;
}

void write_outputs(const CommandResult& r, const std::string& command, const std::filesystem::path& out) {
    std::string stem = command;
    for (char& ch : stem)
        if (ch == '-') ch = '_';
    write_text_file(out / (stem + ".json"), dump(r.report));
    for (const auto& [name, text] : r.csv) write_text_file(out / name, text);
}

} // namespace levyrough
