#include "horo/config.hpp"

#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>

namespace horo {

namespace {

std::string bool_str(bool v) { return v ? "true" : "false"; }

bool parse_bool(const std::string& v, const std::string& key) {
  if (v == "true") return true;
  if (v == "false") return false;
  throw UsageError("config: " + key + " must be true or false, got '" + v + "'");
}

std::string combine_str(DistanceWeights::Combine c) {
  return c == DistanceWeights::Combine::mobius ? "mobius" : "euclidean";
}

std::string reading_str(DistanceWeights::Reading r) {
  return r == DistanceWeights::Reading::literal ? "literal" : "elementwise";
}

std::string center_agg_str(ModelConfig::CenterAgg a) {
  switch (a) {
    case ModelConfig::CenterAgg::avg: return "avg";
    case ModelConfig::CenterAgg::attention: return "attention";
    case ModelConfig::CenterAgg::deepsets: return "deepsets";
  }
  return "attention";
}

std::string limit_agg_str(ModelConfig::LimitAgg a) {
  return a == ModelConfig::LimitAgg::min ? "min" : "deepsets";
}

std::string depth_str(RunConfig::DepthHandling d) {
  switch (d) {
    case RunConfig::DepthHandling::none: return "none";
    case RunConfig::DepthHandling::single: return "single";
    case RunConfig::DepthHandling::per_level: return "per_level";
  }
  return "none";
}

std::string mix_str(const std::vector<StructureTag>& mix) {
  std::string out;
  for (std::size_t i = 0; i < mix.size(); ++i) {
    if (i) out += ",";
    out += to_string(mix[i]);
  }
  return out;
}

}  // namespace

std::string RunConfig::serialize() const {
  std::ostringstream out;
  out << "dataset = " << dataset << "\n";
  out << "d = " << model.d << "\n";
  out << "hidden = " << model.hidden << "\n";
  out << "center_agg = " << center_agg_str(model.center_agg) << "\n";
  out << "limit_agg = " << limit_agg_str(model.limit_agg) << "\n";
  out << "gamma = " << format_double(model.dist.gamma) << "\n";
  out << "combine = " << combine_str(model.dist.combine_mode) << "\n";
  out << "reading = " << reading_str(model.dist.reading) << "\n";
  out << "margin = " << format_double(model.margin) << "\n";
  out << "negatives = " << model.negatives << "\n";
  out << "share_set_mlp = " << bool_str(model.share_set_mlp) << "\n";
  out << "literal_center_sum = " << bool_str(model.literal_center_sum) << "\n";
  out << "query_mix = " << mix_str(query_mix) << "\n";
  out << "queries_per_structure = " << queries_per_structure << "\n";
  out << "max_answers = " << max_answers << "\n";
  out << "require_hard_answer = " << bool_str(require_hard_answer) << "\n";
  out << "depth_handling = " << depth_str(depth_handling) << "\n";
  out << "split = " << format_double(split.train) << "," << format_double(split.valid) << ","
      << format_double(split.test) << "\n";
  out << "epochs = " << epochs << "\n";
  out << "batch = " << batch << "\n";
  out << "lr = " << format_double(lr) << "\n";
  out << "beta1 = " << format_double(beta1) << "\n";
  out << "beta2 = " << format_double(beta2) << "\n";
  out << "adam_eps = " << format_double(adam_eps) << "\n";
  out << "seed = " << seed << "\n";
  out << "deterministic = " << bool_str(deterministic) << "\n";
  out << "threads = " << threads << "\n";
  out << "eval_cadence = " << eval_cadence << "\n";
  out << "eval_queries = " << eval_queries << "\n";
  out << "strict_phase_sweep = " << bool_str(strict_phase_sweep) << "\n";
  out << "curvature = " << format_double(curvature) << "\n";
  out << "trainable_curvature = " << bool_str(trainable_curvature) << "\n";
  return out.str();
}

RunConfig RunConfig::parse(const std::string& text) {
  std::map<std::string, std::string> kv;
  std::istringstream in(text);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto comment = line.find('#');
    if (comment != std::string::npos) line = line.substr(0, comment);
    const auto trim = [](std::string s) {
      const auto b = s.find_first_not_of(" \t\r");
      if (b == std::string::npos) return std::string();
      const auto e = s.find_last_not_of(" \t\r");
      return s.substr(b, e - b + 1);
    };
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw UsageError("config line " + std::to_string(line_no) + ": expected key = value");
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (!kv.emplace(key, value).second)
      throw UsageError("config: duplicate key '" + key + "'");
  }

  RunConfig cfg;
  const auto take = [&](const char* key) -> std::optional<std::string> {
    auto it = kv.find(key);
    if (it == kv.end()) return std::nullopt;
    std::string v = it->second;
    kv.erase(it);
    return v;
  };
  const auto take_int = [&](const char* key, std::int64_t lo, std::int64_t hi,
                            std::int64_t fallback) {
    const auto v = take(key);
    if (!v) return fallback;
    std::int64_t x = 0;
    try {
      x = std::stoll(*v);
    } catch (...) {
      throw UsageError(std::string("config: ") + key + " must be an integer");
    }
    if (x < lo || x > hi)
      throw UsageError(std::string("config: ") + key + " out of range");
    return x;
  };
  const auto take_double = [&](const char* key, double fallback) {
    const auto v = take(key);
    if (!v) return fallback;
    try {
      return std::stod(*v);
    } catch (...) {
      throw UsageError(std::string("config: ") + key + " must be a number");
    }
  };

  if (auto v = take("dataset")) cfg.dataset = *v;
  cfg.model.d = static_cast<std::int32_t>(take_int("d", 1, 1 << 16, cfg.model.d));
  cfg.model.hidden = static_cast<std::int32_t>(take_int("hidden", 0, 1 << 16, cfg.model.hidden));
  if (auto v = take("center_agg")) {
    if (*v == "avg") cfg.model.center_agg = ModelConfig::CenterAgg::avg;
    else if (*v == "attention") cfg.model.center_agg = ModelConfig::CenterAgg::attention;
    else if (*v == "deepsets") cfg.model.center_agg = ModelConfig::CenterAgg::deepsets;
    else throw UsageError("config: center_agg must be avg|attention|deepsets");
  }
  if (auto v = take("limit_agg")) {
    if (*v == "min") cfg.model.limit_agg = ModelConfig::LimitAgg::min;
    else if (*v == "deepsets") cfg.model.limit_agg = ModelConfig::LimitAgg::deepsets;
    else throw UsageError("config: limit_agg must be deepsets|min");
  }
  cfg.model.dist.gamma = take_double("gamma", cfg.model.dist.gamma);
  if (auto v = take("combine")) {
    if (*v == "euclidean") cfg.model.dist.combine_mode = DistanceWeights::Combine::euclidean;
    else if (*v == "mobius") cfg.model.dist.combine_mode = DistanceWeights::Combine::mobius;
    else throw UsageError("config: combine must be euclidean|mobius");
  }
  if (auto v = take("reading")) {
    if (*v == "elementwise") cfg.model.dist.reading = DistanceWeights::Reading::elementwise;
    else if (*v == "literal") cfg.model.dist.reading = DistanceWeights::Reading::literal;
    else throw UsageError("config: reading must be elementwise|literal");
  }
  cfg.model.margin = take_double("margin", cfg.model.margin);
  cfg.model.negatives =
      static_cast<std::int32_t>(take_int("negatives", 1, 1 << 20, cfg.model.negatives));
  if (auto v = take("share_set_mlp")) cfg.model.share_set_mlp = parse_bool(*v, "share_set_mlp");
  if (auto v = take("literal_center_sum"))
    cfg.model.literal_center_sum = parse_bool(*v, "literal_center_sum");
  if (auto v = take("query_mix")) {
    cfg.query_mix.clear();
    std::istringstream mix(*v);
    std::string tag;
    while (std::getline(mix, tag, ','))
      if (!tag.empty()) cfg.query_mix.push_back(structure_tag_from_string(tag));
    if (cfg.query_mix.empty()) throw UsageError("config: query_mix must not be empty");
  }
  cfg.queries_per_structure = static_cast<std::int32_t>(
      take_int("queries_per_structure", 1, 1 << 24, cfg.queries_per_structure));
  cfg.max_answers =
      static_cast<std::int32_t>(take_int("max_answers", 1, 1 << 24, cfg.max_answers));
  if (auto v = take("require_hard_answer"))
    cfg.require_hard_answer = parse_bool(*v, "require_hard_answer");
  if (auto v = take("depth_handling")) {
    if (*v == "none") cfg.depth_handling = DepthHandling::none;
    else if (*v == "single") cfg.depth_handling = DepthHandling::single;
    else if (*v == "per_level") cfg.depth_handling = DepthHandling::per_level;
    else throw UsageError("config: depth_handling must be none|single|per_level");
  }
  if (auto v = take("split")) {
    std::istringstream parts(*v);
    std::string part;
    std::vector<double> r;
    while (std::getline(parts, part, ',')) r.push_back(std::stod(part));
    if (r.size() != 3) throw UsageError("config: split must be three comma-separated ratios");
    cfg.split = {r[0], r[1], r[2]};
  }
  cfg.epochs = static_cast<std::int32_t>(take_int("epochs", 0, 1 << 24, cfg.epochs));
  cfg.batch = static_cast<std::int32_t>(take_int("batch", 1, 1 << 24, cfg.batch));
  cfg.lr = take_double("lr", cfg.lr);
  cfg.beta1 = take_double("beta1", cfg.beta1);
  cfg.beta2 = take_double("beta2", cfg.beta2);
  cfg.adam_eps = take_double("adam_eps", cfg.adam_eps);
  cfg.seed = static_cast<std::uint64_t>(take_int("seed", 0, INT64_MAX, cfg.seed));
  if (auto v = take("deterministic")) cfg.deterministic = parse_bool(*v, "deterministic");
  cfg.threads = static_cast<std::int32_t>(take_int("threads", 0, 4096, cfg.threads));
  cfg.eval_cadence =
      static_cast<std::int32_t>(take_int("eval_cadence", 0, 1 << 24, cfg.eval_cadence));
  cfg.eval_queries =
      static_cast<std::int32_t>(take_int("eval_queries", 1, 1 << 24, cfg.eval_queries));
  if (auto v = take("strict_phase_sweep"))
    cfg.strict_phase_sweep = parse_bool(*v, "strict_phase_sweep");
  cfg.curvature = take_double("curvature", cfg.curvature);
  if (auto v = take("trainable_curvature"))
    cfg.trainable_curvature = parse_bool(*v, "trainable_curvature");

  if (!kv.empty()) throw UsageError("config: unknown key '" + kv.begin()->first + "'");
  return cfg;
}

RunConfig RunConfig::load(const std::string& path) {
  std::ifstream file(path);
  if (!file) throw DataError("cannot open config: " + path);
  std::ostringstream text;
  text << file.rdbuf();
  return parse(text.str());
}

void RunConfig::save(const std::string& path) const {
  std::ofstream file(path, std::ios::binary);
  if (!file) throw DataError("cannot write config: " + path);
  file << serialize();
}

std::uint64_t RunConfig::digest() const { return fnv1a(serialize()); }

void RunConfig::validate(bool check_files) const {
  if (model.d < 1) throw UsageError("config: d must be >= 1");
  if (epochs < 0) throw UsageError("config: epochs must be >= 0");
  if (model.margin <= 0.0) throw UsageError("config: margin must be positive");
  if (curvature <= 0.0) throw UsageError("config: curvature must be positive");
  const double sum = split.train + split.valid + split.test;
  if (split.train < 0 || split.valid < 0 || split.test < 0 || std::abs(sum - 1.0) > 1e-9)
    throw UsageError("config: split ratios must be nonnegative and sum to 1");
  if (check_files && !dataset.empty() && !std::filesystem::exists(dataset))
    throw DataError("config: dataset file does not exist: " + dataset);
}

}  // namespace horo
