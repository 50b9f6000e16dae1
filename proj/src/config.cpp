#include "nmsk/config.hpp"

#include <json.hpp>

#include <set>

namespace nmsk {

namespace {

using nlohmann::json;

void reject_unknown_keys(const json& obj, const std::string& section,
                         const std::set<std::string>& known) {
  for (const auto& [key, value] : obj.items()) {
    if (!known.count(key))
      throw ConfigError("unknown key '" + (section.empty() ? key : section + "." + key) + "'");
  }
}

double as_number(const json& v, const std::string& field) {
  if (!v.is_number())
    throw ConfigError("field '" + field + "' must be a number");
  return v.get<double>();
}

long as_integer(const json& v, const std::string& field) {
  if (!v.is_number_integer())
    throw ConfigError("field '" + field + "' must be an integer");
  return v.get<long>();
}

Eigen::VectorXd as_vector(const json& v, const std::string& field) {
  if (!v.is_array() || v.empty())
    throw ConfigError("field '" + field + "' must be a nonempty array");
  Eigen::VectorXd out(v.size());
  for (std::size_t i = 0; i < v.size(); ++i)
    out[static_cast<Eigen::Index>(i)] = as_number(v[i], field);
  return out;
}

Eigen::MatrixXd as_matrix(const json& v, const std::string& field) {
  if (!v.is_array() || v.empty())
    throw ConfigError("field '" + field + "' must be an array of rows");
  const std::size_t k = v.size();
  Eigen::MatrixXd out(k, k);
  for (std::size_t i = 0; i < k; ++i) {
    if (!v[i].is_array() || v[i].size() != k)
      throw ConfigError("field '" + field + "' must be square");
    for (std::size_t j = 0; j < k; ++j)
      out(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) =
          as_number(v[i][j], field);
  }
  return out;
}

Command parse_command(const std::string& name) {
  if (name == "solve") return Command::solve;
  if (name == "scan") return Command::scan;
  if (name == "exponents") return Command::exponents;
  if (name == "mc") return Command::mc;
  if (name == "nishimori") return Command::nishimori;
  if (name == "converge") return Command::converge;
  throw ConfigError("unknown command '" + name + "'");
}

void validate_scan_param(const std::string& param, int K) {
  // accepted forms: mu[i][j], h[i], alpha[i]
  const auto bad = [&] {
    throw ConfigError("scan parameter '" + param +
                      "' is not mu[i][j], h[i] or alpha[i]");
  };
  std::string head;
  std::vector<int> idx;
  std::size_t pos = param.find('[');
  if (pos == std::string::npos) bad();
  head = param.substr(0, pos);
  while (pos != std::string::npos) {
    const std::size_t end = param.find(']', pos);
    if (end == std::string::npos) bad();
    try {
      idx.push_back(std::stoi(param.substr(pos + 1, end - pos - 1)));
    } catch (...) {
      bad();
    }
    pos = param.find('[', end);
  }
  for (int i : idx)
    if (i < 0 || i >= K) throw ConfigError("scan parameter '" + param + "': index out of range");
  if (head == "mu" && idx.size() == 2) return;
  if (head == "h" && idx.size() == 1) return;
  if (head == "alpha" && idx.size() == 1) {
    if (K != 2)
      throw ConfigError("scan over alpha requires K = 2 (the other entry absorbs the complement)");
    return;
  }
  bad();
}

} // namespace

const char* command_name(Command c) {
  switch (c) {
    case Command::solve: return "solve";
    case Command::scan: return "scan";
    case Command::exponents: return "exponents";
    case Command::mc: return "mc";
    case Command::nishimori: return "nishimori";
    case Command::converge: return "converge";
  }
  return "?";
}

namespace {

RunConfig parse_document(const json& doc) {
  if (!doc.is_object()) throw ConfigError("config must be a JSON object");
  reject_unknown_keys(doc, "", {"command", "model", "solver", "scan",
                                "exponents", "mc", "output"});

  RunConfig cfg;
  if (!doc.contains("command") || !doc["command"].is_string())
    throw ConfigError("field 'command' is required");
  cfg.command = parse_command(doc["command"].get<std::string>());

  if (!doc.contains("model") || !doc["model"].is_object())
    throw ConfigError("section 'model' is required");
  const json& model = doc["model"];
  reject_unknown_keys(model, "model", {"alpha", "mu", "h"});
  for (const char* f : {"alpha", "mu", "h"})
    if (!model.contains(f))
      throw ConfigError(std::string("model.") + f + " is required");
  try {
    cfg.model = ModelParams::make(as_vector(model["alpha"], "model.alpha"),
                                  as_matrix(model["mu"], "model.mu"),
                                  as_vector(model["h"], "model.h"));
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string("model: ") + e.what());
  }
  const int K = cfg.model.species_count();
  if (cfg.model.mu.rows() != K)
    throw ConfigError("model.mu size must match model.alpha");

  if (doc.contains("solver")) {
    const json& s = doc["solver"];
    reject_unknown_keys(s, "solver", {"n_random", "tol", "kkt_tol",
                                      "boundary_tol", "damping", "max_iter",
                                      "seed"});
    if (s.contains("n_random"))
      cfg.solver.n_random = static_cast<int>(as_integer(s["n_random"], "solver.n_random"));
    if (s.contains("tol")) cfg.solver.tol = as_number(s["tol"], "solver.tol");
    if (s.contains("kkt_tol"))
      cfg.solver.kkt_tol = as_number(s["kkt_tol"], "solver.kkt_tol");
    if (s.contains("boundary_tol"))
      cfg.solver.boundary_tol = as_number(s["boundary_tol"], "solver.boundary_tol");
    if (s.contains("damping"))
      cfg.solver.damping = as_number(s["damping"], "solver.damping");
    if (s.contains("max_iter"))
      cfg.solver.max_iter = as_integer(s["max_iter"], "solver.max_iter");
    if (s.contains("seed"))
      cfg.solver.seed = s["seed"].get<std::uint64_t>();
    if (cfg.solver.n_random < 0) throw ConfigError("solver.n_random must be >= 0");
    if (!(cfg.solver.tol > 0)) throw ConfigError("solver.tol must be > 0");
    if (!(cfg.solver.damping > 0) || cfg.solver.damping > 1)
      throw ConfigError("solver.damping must be in (0, 1]");
  }

  if (doc.contains("scan")) {
    const json& s = doc["scan"];
    reject_unknown_keys(s, "scan", {"axes"});
    if (!s.contains("axes") || !s["axes"].is_array() || s["axes"].empty())
      throw ConfigError("scan.axes must be a nonempty array");
    for (const json& a : s["axes"]) {
      reject_unknown_keys(a, "scan.axes[]", {"param", "from", "to", "steps", "scale"});
      ScanAxis axis;
      if (!a.contains("param") || !a["param"].is_string())
        throw ConfigError("scan axis needs a 'param' name");
      axis.param = a["param"].get<std::string>();
      validate_scan_param(axis.param, K);
      if (!a.contains("from") || !a.contains("to"))
        throw ConfigError("scan axis needs 'from' and 'to'");
      axis.from = as_number(a["from"], "scan.from");
      axis.to = as_number(a["to"], "scan.to");
      if (a.contains("steps"))
        axis.steps = static_cast<int>(as_integer(a["steps"], "scan.steps"));
      if (axis.steps < 1) throw ConfigError("scan.steps must be >= 1");
      if (a.contains("scale")) {
        const std::string sc = a["scale"].get<std::string>();
        if (sc == "log") axis.log_scale = true;
        else if (sc != "linear") throw ConfigError("scan.scale must be 'linear' or 'log'");
      }
      if (axis.log_scale && (axis.from <= 0 || axis.to <= 0))
        throw ConfigError("scan: log scale needs positive endpoints");
      cfg.scan.push_back(std::move(axis));
    }
  }
  if (cfg.command == Command::scan && cfg.scan.empty())
    throw ConfigError("command 'scan' requires a scan.axes section");

  if (doc.contains("exponents")) {
    const json& e = doc["exponents"];
    reject_unknown_keys(e, "exponents", {"name", "lambda", "window"});
    if (e.contains("name")) {
      cfg.exponents.name = e["name"].get<std::string>();
      if (cfg.exponents.name != "beta" && cfg.exponents.name != "delta" &&
          cfg.exponents.name != "lambda_line")
        throw ConfigError("exponents.name must be beta, delta or lambda_line");
    }
    if (e.contains("lambda"))
      cfg.exponents.lambda = as_number(e["lambda"], "exponents.lambda");
    if (e.contains("window")) {
      const json& w = e["window"];
      reject_unknown_keys(w, "exponents.window", {"from", "to", "points"});
      if (w.contains("from")) cfg.exponents.window_from = as_number(w["from"], "exponents.window.from");
      if (w.contains("to")) cfg.exponents.window_to = as_number(w["to"], "exponents.window.to");
      if (w.contains("points"))
        cfg.exponents.window_points =
            static_cast<int>(as_integer(w["points"], "exponents.window.points"));
    }
  }

  if (doc.contains("mc")) {
    const json& m = doc["mc"];
    reject_unknown_keys(m, "mc", {"N", "sweeps", "therm", "n_disorder",
                                  "master_seed", "mode", "n_list"});
    if (m.contains("N")) cfg.mc.N = static_cast<int>(as_integer(m["N"], "mc.N"));
    if (m.contains("sweeps")) cfg.mc.sweeps = as_integer(m["sweeps"], "mc.sweeps");
    if (m.contains("therm")) cfg.mc.therm = as_integer(m["therm"], "mc.therm");
    if (m.contains("n_disorder"))
      cfg.mc.n_disorder = static_cast<int>(as_integer(m["n_disorder"], "mc.n_disorder"));
    if (m.contains("master_seed"))
      cfg.mc.master_seed = m["master_seed"].get<std::uint64_t>();
    if (m.contains("mode")) {
      cfg.mc.mode = m["mode"].get<std::string>();
      if (cfg.mc.mode != "exact" && cfg.mc.mode != "mc")
        throw ConfigError("mc.mode must be 'exact' or 'mc'");
    }
    if (m.contains("n_list")) {
      if (!m["n_list"].is_array() || m["n_list"].empty())
        throw ConfigError("mc.n_list must be a nonempty array");
      for (const json& v : m["n_list"])
        cfg.mc.n_list.push_back(static_cast<int>(as_integer(v, "mc.n_list")));
    }
    if (cfg.mc.N < 1) throw ConfigError("mc.N must be >= 1");
    if (cfg.mc.n_disorder < 2) throw ConfigError("mc.n_disorder must be >= 2");
  }
  if (cfg.command == Command::converge && cfg.mc.n_list.empty())
    throw ConfigError("command 'converge' requires mc.n_list");

  if (doc.contains("output")) {
    const json& o = doc["output"];
    reject_unknown_keys(o, "output", {"dir", "format"});
    if (o.contains("dir")) cfg.output.dir = o["dir"].get<std::string>();
    if (o.contains("format")) {
      const std::string f = o["format"].get<std::string>();
      if (f == "csv") cfg.output.format = OutputFormat::csv;
      else if (f == "jsonl") cfg.output.format = OutputFormat::jsonl;
      else throw ConfigError("output.format must be 'csv' or 'jsonl'");
    }
  }
  return cfg;
}

} // namespace

RunConfig parse_config(const std::string& text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("config parse error: ") + e.what());
  }
  try {
    return parse_document(doc);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
}

std::string echo_config(const RunConfig& cfg) {
  json doc;
  doc["command"] = command_name(cfg.command);
  json model;
  model["alpha"] = std::vector<double>(cfg.model.alpha.data(),
                                       cfg.model.alpha.data() + cfg.model.alpha.size());
  std::vector<std::vector<double>> mu(cfg.model.mu.rows());
  for (Eigen::Index i = 0; i < cfg.model.mu.rows(); ++i)
    mu[i] = std::vector<double>(cfg.model.mu.row(i).begin(),
                                cfg.model.mu.row(i).end());
  model["mu"] = mu;
  model["h"] = std::vector<double>(cfg.model.h.data(),
                                   cfg.model.h.data() + cfg.model.h.size());
  doc["model"] = model;

  doc["solver"] = {{"n_random", cfg.solver.n_random},
                   {"tol", cfg.solver.tol},
                   {"kkt_tol", cfg.solver.kkt_tol},
                   {"boundary_tol", cfg.solver.boundary_tol},
                   {"damping", cfg.solver.damping},
                   {"max_iter", cfg.solver.max_iter},
                   {"seed", cfg.solver.seed}};

  if (!cfg.scan.empty()) {
    json axes = json::array();
    for (const ScanAxis& a : cfg.scan)
      axes.push_back({{"param", a.param},
                      {"from", a.from},
                      {"to", a.to},
                      {"steps", a.steps},
                      {"scale", a.log_scale ? "log" : "linear"}});
    doc["scan"] = {{"axes", axes}};
  }

  doc["exponents"] = {{"name", cfg.exponents.name},
                      {"lambda", cfg.exponents.lambda},
                      {"window",
                       {{"from", cfg.exponents.window_from},
                        {"to", cfg.exponents.window_to},
                        {"points", cfg.exponents.window_points}}}};

  json mc = {{"N", cfg.mc.N},
             {"sweeps", cfg.mc.sweeps},
             {"therm", cfg.mc.therm},
             {"n_disorder", cfg.mc.n_disorder},
             {"master_seed", cfg.mc.master_seed},
             {"mode", cfg.mc.mode}};
  if (!cfg.mc.n_list.empty()) mc["n_list"] = cfg.mc.n_list;
  doc["mc"] = mc;

  doc["output"] = {{"dir", cfg.output.dir},
                   {"format", cfg.output.format == OutputFormat::csv ? "csv" : "jsonl"}};
  return doc.dump(2);
}

} // namespace nmsk
