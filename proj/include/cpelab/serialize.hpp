#pragma once

#include <string>

#include <json.hpp>

#include "cpelab/model.hpp"
#include "cpelab/sequences.hpp"

namespace cpelab {

using Json = nlohmann::json;

// Doubles travel as C99 hex-float strings so round-trips are value-exact.
std::string double_to_hex(double x);
double double_from_hex(const std::string& s);

Json vec_to_json(const Vec& v);
Vec vec_from_json(const Json& j);
Json matrix_to_json(const Matrix& m);
Matrix matrix_from_json(const Json& j);

Json seqspec_to_json(const SeqSpec& s);
SeqSpec seqspec_from_json(const Json& j);

Json model_to_json(const TransformerModel& model);
TransformerModel model_from_json(const Json& j);

void save_model(const TransformerModel& model, const std::string& path);
TransformerModel load_model(const std::string& path);

}  // namespace cpelab
