#include "levyrough/errors.hpp"
#include "levyrough/lab.hpp"

#include <CLI11.hpp>

#include <iostream>
#include <map>
#include <optional>

using namespace levyrough;

namespace {

// Flag values that override keys of the config file.
struct Overrides {
    std::map<std::string, std::string> strings;
    std::map<std::string, double> numbers;
    std::map<std::string, long> integers;
    std::map<std::string, std::vector<double>> lists;

    void apply(Json& cfg) const {
        for (const auto& [k, v] : strings) cfg[k] = v;
        for (const auto& [k, v] : numbers) cfg[k] = v;
        for (const auto& [k, v] : integers) cfg[k] = v;
        for (const auto& [k, v] : lists) {
            bool whole = true;
            for (double x : v) whole = whole && x == static_cast<double>(static_cast<long>(x));
            if (whole && (k == "n_grid" || k == "meshes")) {
                std::vector<long> w(v.begin(), v.end());
                cfg[k] = w;
            } else {
                cfg[k] = v;
            }
        }
    }
};

struct Sub {
    CLI::App* app = nullptr;
    std::string config_file;
    std::string preset;
    std::map<std::string, std::string> strings;
    std::map<std::string, double> numbers;
    std::map<std::string, long> integers;
    std::map<std::string, std::vector<double>> lists;
};

void add_string(Sub& s, const std::string& flag, const std::string& key, const std::string& help) {
    s.app->add_option_function<std::string>(flag, [&s, key](const std::string& v) { s.strings[key] = v; }, help);
}
void add_number(Sub& s, const std::string& flag, const std::string& key, const std::string& help) {
    s.app->add_option_function<double>(flag, [&s, key](double v) { s.numbers[key] = v; }, help);
}
void add_integer(Sub& s, const std::string& flag, const std::string& key, const std::string& help) {
    s.app->add_option_function<long>(flag, [&s, key](long v) { s.integers[key] = v; }, help);
}
void add_list(Sub& s, const std::string& flag, const std::string& key, const std::string& help) {
    s.app->add_option_function<std::vector<double>>(flag, [&s, key](const std::vector<double>& v) { s.lists[key] = v; },
                                                   help)
        ->delimiter(',');
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"levylab: Levy processes in free nilpotent groups, signatures and rough flows"};
    app.require_subcommand(1);
    app.fallthrough();
    std::uint64_t seed = 0;
    bool seed_set = false;
    int jobs = 0;
    std::string out = ".";
    app.add_option_function<std::uint64_t>("--seed", [&](std::uint64_t v) { seed = v, seed_set = true; }, "master seed");
    app.add_option("--jobs", jobs, "worker threads; results do not depend on it");
    app.add_option("--out", out, "output directory")->capture_default_str();

    const std::vector<std::pair<std::string, std::string>> commands{
        {"simulate", "sample Levy paths from a triplet"},
        {"signature", "signature and Levy area of a piecewise linear path"},
        {"pvar", "exact p-variation of a path file"},
        {"connect", "connect the jumps of a cadlag path with a path function"},
        {"lk", "Monte Carlo check of the Levy-Khintchine formula for a linear flow"},
        {"minp", "p-variation exponent of a triplet"},
        {"probe", "feinsilver, tightness or bg diagnostics"},
        {"walk-converge", "convergence of walk flows to the Levy limit"},
    };
    std::map<std::string, Sub> subs;
    for (const auto& [name, help] : commands) {
        Sub& s = subs[name];
        s.app = app.add_subcommand(name, help);
        s.app->add_option("--config", s.config_file, "scenario JSON; an emitted report's \"config\" is accepted");
        s.app->add_option("--preset", s.preset, "named scenario");
        add_integer(s, "--samples", "samples", "Monte Carlo sample count");
        add_integer(s, "--steps", "steps", "time steps");
        add_number(s, "--T", "T", "time horizon");
    }
    add_string(subs["simulate"], "--triplet", "triplet", "triplet JSON file or preset:<name>");
    add_integer(subs["simulate"], "--keep", "keep", "paths written in full");
    add_string(subs["signature"], "--segments", "segments", "JSON file with a list of segment vectors");
    add_integer(subs["signature"], "--N", "N", "truncation level");
    for (const char* c : {"pvar", "connect"}) {
        add_string(subs[c], "--path", "path", "path JSON file");
        add_number(subs[c], "--p", "p", "variation exponent");
        add_integer(subs[c], "--pvar-refine", "refine", "interior candidates per log-linear segment");
    }
    add_string(subs["connect"], "--phi", "phi", "logchord, malcev, mcshane, perturbed[:file], custom:file");
    add_number(subs["connect"], "--r-first", "r_first", "first radius");
    add_number(subs["connect"], "--ratio", "ratio", "radius ratio");
    for (const char* c : {"lk", "minp"}) add_string(subs[c], "--triplet", "triplet", "triplet JSON file or preset:<name>");
    for (const char* c : {"lk", "walk-converge"}) {
        add_string(subs[c], "--phi", "phi", "logchord, malcev, mcshane, perturbed[:file], custom:file");
        add_string(subs[c], "--M", "M", "matrices JSON file or preset:pauli");
    }
    std::string probe_kind;
    subs["probe"].app->add_option("kind", probe_kind, "feinsilver, tightness or bg");
    add_string(subs["probe"], "--triplet", "triplet", "triplet JSON file or preset:<name>");
    add_string(subs["probe"], "--family", "family", "array family JSON file");
    add_integer(subs["probe"], "--mc", "mc", "Monte Carlo rows per point");
    add_integer(subs["probe"], "--n", "n", "walk length");
    add_integer(subs["probe"], "--coord", "coord", "basis coordinate, 0-based");
    add_number(subs["probe"], "--q", "q", "exponent of the increment sums");
    add_list(subs["probe"], "--meshes", "meshes", "comma separated step counts");
    add_list(subs["probe"], "--deltas", "deltas", "comma separated deltas");
    add_list(subs["probe"], "--n-grid", "n_grid", "comma separated n");
    add_string(subs["walk-converge"], "--family", "family", "array family JSON file");
    add_integer(subs["walk-converge"], "--mc", "mc", "Monte Carlo walks per n");
    add_list(subs["walk-converge"], "--n-grid", "n_grid", "comma separated n");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kExitOk : kExitValidation;
    }

    for (auto& [name, s] : subs) {
        if (!s.app->parsed()) continue;
        try {
            Json cfg = Json::object();
            if (!s.config_file.empty()) {
                cfg = read_json_file(s.config_file);
                if (cfg.contains("config") && cfg.contains("command")) cfg = Json(cfg.at("config"));
            }
            if (!s.preset.empty()) cfg["preset"] = s.preset;
            if (name == "probe" && !probe_kind.empty()) cfg["kind"] = probe_kind;
            Overrides{s.strings, s.numbers, s.integers, s.lists}.apply(cfg);
            if (seed_set) cfg["seed"] = seed;
            if (jobs > 0) cfg["jobs"] = jobs;
            const CommandResult r = run_command(name, cfg);
            write_outputs(r, name, out);
            std::cout << name << ": " << r.summary << "\n";
            return r.exit_code;
        } catch (const ValidationError& e) {
            std::cerr << name << ": " << e.what() << "\n";
            return kExitValidation;
        } catch (const NumericError& e) {
            std::cerr << name << ": " << e.what() << "\n";
            return kExitTolerance;
        } catch (const std::exception& e) {
            std::cerr << name << ": " << e.what() << "\n";
            return 1;
        }
    }
    return kExitValidation;
}
