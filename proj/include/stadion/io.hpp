#pragma once

#include "stadion/datagen.hpp"
#include "stadion/models.hpp"

#include <json.hpp>

#include <string>

namespace stadion {

using json = nlohmann::json;

// Sample matrices travel as CSV with header x1,...,xd and one full-precision
// decimal row per sample.
void write_csv(const std::string& path, const MatrixXd& X);
MatrixXd read_csv(const std::string& path);

json read_json_file(const std::string& path);
void write_json_file(const std::string& path, const json& doc);

json model_to_json(const SdeModel& model);
SdeModel model_from_json(const json& doc);

json intervention_to_json(const Intervention& phi);
Intervention intervention_from_json(const json& doc);

// Bundle directory: bundle.json next to obs.csv, train_<i>.csv, test_<i>.csv.
void save_bundle(const BenchmarkBundle& bundle, const std::string& dir);
BenchmarkBundle load_bundle(const std::string& dir);

}  // namespace stadion
