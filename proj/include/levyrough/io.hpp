#pragma once

#include "levyrough/flow.hpp"

#include <json.hpp>

#include <filesystem>
#include <string>
#include <vector>

namespace levyrough {

using Json = nlohmann::ordered_json;

// One context per (d, N), shared by everything read from disk.
Context context_for(int d, int N);

// Non-finite doubles are written as the strings "inf", "-inf", "nan".
Json num(double x);
double num_from(const Json& j);
Json to_json(const Eigen::VectorXd& v);
Json to_json(const Eigen::MatrixXd& A);
Json to_json(const CMatrix& A);
Eigen::VectorXd vector_from(const Json& j);
Eigen::MatrixXd matrix_from(const Json& j);
// Entries are numbers or [re, im] pairs.
CMatrix cmatrix_from(const Json& j);

// {"d", "N", "levels": [[...], ...]}, level j in word order.
Json to_json(const GroupElement& x);
GroupElement group_from_json(const Json& j);
Json to_json(const LieElement& l);
LieElement lie_from_json(const Json& j);
// A Lie element given either in the levels schema or as basis coordinates.
LieElement lie_from_any(const Json& j, const Context& ctx);

// {"d", "N", "T", "kind", "times", "points"}.
Json to_json(const DiscretePath& p);
DiscretePath path_from_json(const Json& j);

// {"d", "N", "A", "B", "Pi": {"atoms": [{"point", "w"}], "family": "stable", ...}}.
// A may be m x m or the d x d level-1 block; atom points are group elements or Lie coordinates.
Json to_json(const LevyTriplet& t);
LevyTriplet triplet_from_json(const Json& j);

// A list of e x e matrices, or {"mats": [...], "anti_hermitian": bool}.
Json to_json(const LinearVectorFields& M);
LinearVectorFields fields_from_json(const Json& j, const Context& ctx);

// Array families: {"type": "gaussian" | "nonlinear" | "perturbed" | "approximating" | "constant", ...}.
ArrayFamilyPtr family_from_json(const Json& j);

// logchord, malcev, mcshane, perturbed:<file>, custom:<file>. Files are JSON:
// perturbed {"v", "gamma": [[...], ...]}, custom {"C": [matrices]}.
PathFunctionPtr make_path_function(const std::string& spec, const Context& ctx);
// The same with the file contents supplied inline.
PathFunctionPtr make_path_function(const Json& spec, const Context& ctx);

Json to_json(const PvarReport& r);
Json to_json(const OscillationReport& r);
Json to_json(const ExponentReport& r, const Context& ctx);
Json to_json(const MomentEstimate& m);
Json to_json(const CharFunctionReport& r, const Context& ctx);
Json to_json(const ConvergenceReport& r);
Json to_json(const ScalesReport& r);
Json to_json(const FeinsilverReport& r);
Json to_json(const DivergenceReport& r);
Json to_json(const TightnessReport& r);

Json read_json_file(const std::filesystem::path& p);
void write_text_file(const std::filesystem::path& p, const std::string& text);
std::string dump(const Json& j);

// Rows of numbers printed with %.17g; strings are written verbatim.
class CsvWriter {
public:
    explicit CsvWriter(std::vector<std::string> header);
    CsvWriter& cell(double x);
    CsvWriter& cell(long x);
    CsvWriter& cell(const std::string& s);
    void end_row();
    std::string str() const { return out_; }

private:
    std::size_t columns_;
    std::size_t filled_ = 0;
    std::string out_;
};

std::string path_csv(const DiscretePath& p);
std::string time_change_csv(const TimeChange& tau, const std::vector<double>& grid);

} // namespace levyrough
