#include "stadion/io.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

namespace stadion {

namespace fs = std::filesystem;

void write_csv(const std::string& path, const MatrixXd& X) {
  std::ofstream out(path);
  require(out.good(), ErrorCode::io_error, "cannot open " + path);
  for (long j = 0; j < X.cols(); ++j) {
    out << (j == 0 ? "x" : ",x") << (j + 1);
  }
  out << "\n";
  char buf[40];
  for (long i = 0; i < X.rows(); ++i) {
    for (long j = 0; j < X.cols(); ++j) {
      std::snprintf(buf, sizeof(buf), "%.17g", X(i, j));
      if (j > 0) out << ',';
      out << buf;
    }
    out << "\n";
  }
  require(out.good(), ErrorCode::io_error, "failed writing " + path);
}

MatrixXd read_csv(const std::string& path) {
  std::ifstream in(path);
  require(in.good(), ErrorCode::io_error, "cannot open " + path);
  std::string line;
  require(static_cast<bool>(std::getline(in, line)), ErrorCode::io_error,
          "empty csv " + path);
  std::vector<std::vector<double>> rows;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<double> row;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) {
      size_t used = 0;
      row.push_back(std::stod(cell, &used));
    }
    if (!rows.empty()) {
      require(row.size() == rows.front().size(), ErrorCode::io_error,
              "ragged csv " + path);
    }
    rows.push_back(std::move(row));
  }
  require(!rows.empty(), ErrorCode::io_error, "csv has no data rows: " + path);
  MatrixXd X(static_cast<long>(rows.size()),
             static_cast<long>(rows.front().size()));
  for (long i = 0; i < X.rows(); ++i) {
    for (long j = 0; j < X.cols(); ++j) X(i, j) = rows[i][j];
  }
  return X;
}

json read_json_file(const std::string& path) {
  std::ifstream in(path);
  require(in.good(), ErrorCode::io_error, "cannot open " + path);
  json doc;
  try {
    in >> doc;
  } catch (const std::exception& e) {
    fail(ErrorCode::io_error, "invalid json in " + path + ": " + e.what());
  }
  return doc;
}

void write_json_file(const std::string& path, const json& doc) {
  std::ofstream out(path);
  require(out.good(), ErrorCode::io_error, "cannot open " + path);
  out << doc.dump(2) << "\n";
  require(out.good(), ErrorCode::io_error, "failed writing " + path);
}

namespace {

json matrix_to_json(const MatrixXd& M) {
  json rows = json::array();
  for (long i = 0; i < M.rows(); ++i) {
    json row = json::array();
    for (long j = 0; j < M.cols(); ++j) row.push_back(M(i, j));
    rows.push_back(std::move(row));
  }
  return rows;
}

MatrixXd matrix_from_json(const json& doc) {
  require(doc.is_array() && !doc.empty(), ErrorCode::io_error,
          "expected a non-empty nested array");
  const long rows = static_cast<long>(doc.size());
  const long cols = static_cast<long>(doc[0].size());
  MatrixXd M(rows, cols);
  for (long i = 0; i < rows; ++i) {
    require(static_cast<long>(doc[i].size()) == cols, ErrorCode::io_error,
            "ragged nested array");
    for (long j = 0; j < cols; ++j) M(i, j) = doc[i][j].get<double>();
  }
  return M;
}

json vector_to_json(const VectorXd& v) {
  json out = json::array();
  for (long i = 0; i < v.size(); ++i) out.push_back(v[i]);
  return out;
}

VectorXd vector_from_json(const json& doc) {
  VectorXd v(static_cast<long>(doc.size()));
  for (long i = 0; i < v.size(); ++i) v[i] = doc[i].get<double>();
  return v;
}

json basis_to_json(const FeatureBasis& basis) {
  json out = json::array();
  for (const FeatureEntry& f : basis.entries) {
    json e;
    switch (f.kind) {
      case FeatureEntry::Kind::constant:
        e["type"] = "constant";
        break;
      case FeatureEntry::Kind::coordinate:
        e["type"] = "coordinate";
        e["i"] = f.i;
        break;
      case FeatureEntry::Kind::monomial:
        e["type"] = "monomial";
        e["i"] = f.i;
        e["j"] = f.j;
        break;
      case FeatureEntry::Kind::tanh_ridge:
        e["type"] = "tanh";
        e["w"] = vector_to_json(f.w);
        e["c"] = f.c;
        break;
    }
    out.push_back(std::move(e));
  }
  return out;
}

FeatureBasis basis_from_json(const json& doc, int d) {
  FeatureBasis basis;
  basis.dim = d;
  for (const json& e : doc) {
    FeatureEntry f;
    const std::string type = e.at("type").get<std::string>();
    if (type == "constant") {
      f.kind = FeatureEntry::Kind::constant;
    } else if (type == "coordinate") {
      f.kind = FeatureEntry::Kind::coordinate;
      f.i = e.at("i").get<int>();
    } else if (type == "monomial") {
      f.kind = FeatureEntry::Kind::monomial;
      f.i = e.at("i").get<int>();
      f.j = e.at("j").get<int>();
    } else if (type == "tanh") {
      f.kind = FeatureEntry::Kind::tanh_ridge;
      f.w = vector_from_json(e.at("w"));
      f.c = e.at("c").get<double>();
    } else {
      fail(ErrorCode::io_error, "unknown feature type: " + type);
    }
    basis.entries.push_back(std::move(f));
  }
  return basis;
}

json dbasis_to_json(const DiffusionBasis& basis) {
  json out = json::array();
  for (const DiffusionField& f : basis.entries) {
    json e;
    if (f.kind == DiffusionField::Kind::unit_coordinate) {
      e["type"] = "unit";
      e["j"] = f.j;
    } else {
      e["type"] = "vector";
      e["v"] = vector_to_json(f.v);
    }
    out.push_back(std::move(e));
  }
  return out;
}

DiffusionBasis dbasis_from_json(const json& doc, int d) {
  DiffusionBasis basis;
  basis.dim = d;
  for (const json& e : doc) {
    DiffusionField f;
    const std::string type = e.at("type").get<std::string>();
    if (type == "unit") {
      f.kind = DiffusionField::Kind::unit_coordinate;
      f.j = e.at("j").get<int>();
    } else if (type == "vector") {
      f.kind = DiffusionField::Kind::constant_vector;
      f.v = vector_from_json(e.at("v"));
    } else {
      fail(ErrorCode::io_error, "unknown diffusion field type: " + type);
    }
    basis.entries.push_back(std::move(f));
  }
  return basis;
}

}  // namespace

json model_to_json(const SdeModel& model) {
  json doc;
  doc["d"] = model.d;
  if (model.kind == DriftKind::linear) {
    doc["kind"] = "linear";
    doc["basis"] = basis_to_json(model.basis);
    doc["B"] = matrix_to_json(model.B);
    json mask = json::array();
    for (int i = 0; i < model.d; ++i) {
      json row = json::array();
      for (int q = 0; q < model.feature_count(); ++q) {
        row.push_back(static_cast<bool>(model.fixed_mask(i, q)));
      }
      mask.push_back(std::move(row));
    }
    doc["fixed_mask"] = std::move(mask);
  } else {
    doc["kind"] = "mlp";
    doc["hidden"] = model.hidden;
    json coords = json::array();
    for (const MlpCoord& c : model.coords) {
      json e;
      e["bias"] = c.bias;
      e["w"] = vector_to_json(c.w);
      e["U"] = matrix_to_json(c.U);
      e["v"] = vector_to_json(c.v);
      coords.push_back(std::move(e));
    }
    doc["coords"] = std::move(coords);
  }
  json diffusion;
  if (model.diffusion_mode == DiffusionMode::diag_exp) {
    diffusion["mode"] = "diag_exp";
    diffusion["s"] = vector_to_json(model.s);
  } else {
    diffusion["mode"] = "basis_cone";
    diffusion["A"] = vector_to_json(model.A);
    diffusion["basis"] = dbasis_to_json(model.dbasis);
  }
  doc["diffusion"] = std::move(diffusion);
  return doc;
}

SdeModel model_from_json(const json& doc) {
  SdeModel model;
  model.d = doc.at("d").get<int>();
  const std::string kind = doc.at("kind").get<std::string>();
  if (kind == "linear") {
    model.kind = DriftKind::linear;
    model.basis = basis_from_json(doc.at("basis"), model.d);
    model.B = matrix_from_json(doc.at("B"));
    require(model.B.rows() == model.d &&
                model.B.cols() == model.basis.size(),
            ErrorCode::io_error, "model B shape mismatch");
    const json& mask = doc.at("fixed_mask");
    model.fixed_mask = MaskXb::Constant(model.d, model.basis.size(), false);
    for (int i = 0; i < model.d; ++i) {
      for (int q = 0; q < model.basis.size(); ++q) {
        model.fixed_mask(i, q) = mask[i][q].get<bool>();
      }
    }
  } else if (kind == "mlp") {
    model.kind = DriftKind::mlp;
    model.hidden = doc.at("hidden").get<int>();
    for (const json& e : doc.at("coords")) {
      MlpCoord c;
      c.bias = e.at("bias").get<double>();
      c.w = vector_from_json(e.at("w"));
      c.U = matrix_from_json(e.at("U"));
      c.v = vector_from_json(e.at("v"));
      model.coords.push_back(std::move(c));
    }
    require(static_cast<int>(model.coords.size()) == model.d,
            ErrorCode::io_error, "model coords count mismatch");
  } else {
    fail(ErrorCode::io_error, "unknown model kind: " + kind);
  }
  const json& diffusion = doc.at("diffusion");
  const std::string mode = diffusion.at("mode").get<std::string>();
  if (mode == "diag_exp") {
    model.diffusion_mode = DiffusionMode::diag_exp;
    model.s = vector_from_json(diffusion.at("s"));
    require(model.s.size() == model.d, ErrorCode::io_error,
            "diffusion s length mismatch");
  } else if (mode == "basis_cone") {
    model.diffusion_mode = DiffusionMode::basis_cone;
    model.dbasis = dbasis_from_json(diffusion.at("basis"), model.d);
    model.A = vector_from_json(diffusion.at("A"));
    require(model.A.size() == model.dbasis.size(), ErrorCode::io_error,
            "diffusion A length mismatch");
  } else {
    fail(ErrorCode::io_error, "unknown diffusion mode: " + mode);
  }
  return model;
}

json intervention_to_json(const Intervention& phi) {
  json doc;
  doc["targets"] = phi.targets;
  doc["shift"] = vector_to_json(phi.shift);
  json scale = json::array();
  for (long t = 0; t < phi.log_scale.size(); ++t) {
    scale.push_back(phi.beta(static_cast<int>(t)));
  }
  doc["scale"] = std::move(scale);
  return doc;
}

Intervention intervention_from_json(const json& doc) {
  Intervention phi;
  phi.targets = doc.at("targets").get<std::vector<int>>();
  phi.shift = vector_from_json(doc.at("shift"));
  const VectorXd scale = vector_from_json(doc.at("scale"));
  phi.log_scale = VectorXd(scale.size());
  for (long t = 0; t < scale.size(); ++t) {
    require(scale[t] > 0.0, ErrorCode::invalid_input,
            "intervention scale must be positive");
    phi.log_scale[t] = std::log(scale[t]);
  }
  phi.validate(1 << 30);
  return phi;
}

void save_bundle(const BenchmarkBundle& bundle, const std::string& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  require(!ec, ErrorCode::io_error, "cannot create " + dir);

  json doc;
  doc["kind"] = bundle.config.kind == SystemKind::sde ? "sde" : "scm";
  doc["graph_kind"] = bundle.config.graph == GraphKind::er ? "er" : "sf";
  doc["d"] = bundle.config.d;
  doc["n_per_env"] = bundle.config.n_per_env;
  doc["shift_magnitude"] = bundle.config.shift_magnitude;
  doc["expected_degree"] = bundle.config.expected_degree;
  doc["seed"] = bundle.config.seed;

  json adj = json::array();
  for (int i = 0; i < bundle.graph.d; ++i) {
    json row = json::array();
    for (int j = 0; j < bundle.graph.d; ++j) {
      row.push_back(bundle.graph.adj(i, j));
    }
    adj.push_back(std::move(row));
  }
  doc["graph"] = std::move(adj);

  if (bundle.config.kind == SystemKind::sde) {
    doc["system"] = {{"M", matrix_to_json(bundle.sde.M)},
                     {"D", vector_to_json(bundle.sde.D_diag)},
                     {"mean", vector_to_json(bundle.sde.mean)}};
  } else {
    doc["system"] = {{"W", matrix_to_json(bundle.scm.W)},
                     {"noise_scale", vector_to_json(bundle.scm.noise_scale)},
                     {"spectral_radius", bundle.scm.spectral_radius}};
  }
  doc["standardization"] = {{"mean", vector_to_json(bundle.standard_mean)},
                            {"std", vector_to_json(bundle.standard_std)}};

  auto env_meta = [](const EnvSpec& spec) {
    return json{{"target", spec.target}, {"shift", spec.shift}};
  };
  json train_meta = json::array(), test_meta = json::array();
  for (const EnvSpec& spec : bundle.train_specs) train_meta.push_back(env_meta(spec));
  for (const EnvSpec& spec : bundle.test_specs) test_meta.push_back(env_meta(spec));
  doc["train_envs"] = std::move(train_meta);
  doc["test_envs"] = std::move(test_meta);

  write_json_file(dir + "/bundle.json", doc);
  write_csv(dir + "/obs.csv", bundle.observational.X);
  for (size_t e = 0; e < bundle.train_envs.size(); ++e) {
    write_csv(dir + "/train_" + std::to_string(e) + ".csv",
              bundle.train_envs[e].X);
  }
  for (size_t e = 0; e < bundle.test_envs.size(); ++e) {
    write_csv(dir + "/test_" + std::to_string(e) + ".csv",
              bundle.test_envs[e].X);
  }
}

BenchmarkBundle load_bundle(const std::string& dir) {
  const json doc = read_json_file(dir + "/bundle.json");
  BenchmarkBundle bundle;
  bundle.config.kind =
      doc.at("kind").get<std::string>() == "sde" ? SystemKind::sde
                                                 : SystemKind::scm;
  bundle.config.graph =
      doc.at("graph_kind").get<std::string>() == "er" ? GraphKind::er
                                                      : GraphKind::sf;
  bundle.config.d = doc.at("d").get<int>();
  bundle.config.n_per_env = doc.at("n_per_env").get<long>();
  bundle.config.shift_magnitude = doc.at("shift_magnitude").get<double>();
  bundle.config.expected_degree = doc.at("expected_degree").get<double>();
  bundle.config.seed = doc.at("seed").get<std::uint64_t>();

  const json& adj = doc.at("graph");
  bundle.graph.d = bundle.config.d;
  bundle.graph.adj = Eigen::MatrixXi::Zero(bundle.graph.d, bundle.graph.d);
  for (int i = 0; i < bundle.graph.d; ++i) {
    for (int j = 0; j < bundle.graph.d; ++j) {
      bundle.graph.adj(i, j) = adj[i][j].get<int>();
    }
  }
  const json& system = doc.at("system");
  if (bundle.config.kind == SystemKind::sde) {
    bundle.sde.M = matrix_from_json(system.at("M"));
    bundle.sde.D_diag = vector_from_json(system.at("D"));
    bundle.sde.mean = vector_from_json(system.at("mean"));
  } else {
    bundle.scm.W = matrix_from_json(system.at("W"));
    bundle.scm.noise_scale = vector_from_json(system.at("noise_scale"));
    bundle.scm.spectral_radius = system.at("spectral_radius").get<double>();
  }
  bundle.standard_mean = vector_from_json(doc.at("standardization").at("mean"));
  bundle.standard_std = vector_from_json(doc.at("standardization").at("std"));

  bundle.observational.X = read_csv(dir + "/obs.csv");
  bundle.observational.env_index = 0;

  auto load_envs = [&](const json& metas, const std::string& prefix,
                       std::vector<EnvSpec>& specs,
                       std::vector<Dataset>& datasets, int env_offset) {
    int index = 0;
    for (const json& meta : metas) {
      EnvSpec spec;
      spec.target = meta.at("target").get<int>();
      spec.shift = meta.at("shift").get<double>();
      spec.intervention = Intervention::shift_on(spec.target, spec.shift);
      Dataset data;
      data.X = read_csv(dir + "/" + prefix + std::to_string(index) + ".csv");
      data.env_index = env_offset + index;
      data.targets = {spec.target};
      specs.push_back(std::move(spec));
      datasets.push_back(std::move(data));
      ++index;
    }
  };
  load_envs(doc.at("train_envs"), "train_", bundle.train_specs,
            bundle.train_envs, 1);
  load_envs(doc.at("test_envs"), "test_", bundle.test_specs, bundle.test_envs,
            1 + static_cast<int>(bundle.train_envs.size()));
  bundle.config.n_train_env = static_cast<int>(bundle.train_envs.size());
  bundle.config.n_test_env = static_cast<int>(bundle.test_envs.size());
  return bundle;
}

}  // namespace stadion
