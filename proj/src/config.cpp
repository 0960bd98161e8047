#include "dln/config.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <limits>
#include <map>
#include <set>
#include <sstream>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

namespace dln {

namespace pt = boost::property_tree;

namespace {

const std::map<std::string, std::set<std::string>>& schema() {
  static const std::map<std::string, std::set<std::string>> s = {
      {"experiment", {"kind", "d", "N", "seed"}},
      {"loss", {"type", "entries"}},
      {"flow",
       {"level", "method", "dt", "t_end", "record_every", "beta", "stop_tolerance",
        "stop_window"}},
      {"sde", {"level", "beta", "kappa", "dt", "t_end", "paths", "record_every"}},
      {"init", {"mode", "scale"}},
      {"dyson", {"form", "initial"}},
      {"sphere", {"radius"}},
      {"entropy_map", {"sigma_min", "sigma_max", "points", "beta"}},
      {"complete", {"paths", "energy_threshold", "det_threshold"}},
      {"output", {"dir", "rank_rel_tol"}},
  };
  return s;
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

std::string lower(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return std::tolower(c); });
  return s;
}

double to_double(const std::string& key, const std::string& raw) {
  const std::string v = lower(trim(raw));
  if (v == "inf" || v == "+inf" || v == "infinity") return std::numeric_limits<double>::infinity();
  double out = 0.0;
  const char* first = v.data();
  const char* last = v.data() + v.size();
  if (!v.empty() && *first == '+') ++first;
  const auto [ptr, ec] = std::from_chars(first, last, out);
  if (v.empty() || ec != std::errc() || ptr != last || !std::isfinite(out))
    throw ConfigError(key + ": expected a number, got '" + raw + "'");
  return out;
}

long long to_integer(const std::string& key, const std::string& raw) {
  const std::string v = trim(raw);
  long long out = 0;
  const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (v.empty() || ec != std::errc() || ptr != v.data() + v.size())
    throw ConfigError(key + ": expected an integer, got '" + raw + "'");
  return out;
}

std::uint64_t to_seed(const std::string& key, const std::string& raw) {
  const std::string v = trim(raw);
  std::uint64_t out = 0;
  const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (v.empty() || ec != std::errc() || ptr != v.data() + v.size())
    throw ConfigError(key + ": expected an unsigned 64-bit seed, got '" + raw + "'");
  return out;
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string item;
  std::istringstream is(s);
  while (std::getline(is, item, sep)) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

std::vector<MaskEntry> parse_entries(const std::string& raw) {
  std::vector<MaskEntry> out;
  for (const std::string& triple : split(raw, ';')) {
    const auto parts = split(triple, ',');
    if (parts.size() != 3)
      throw ConfigError("loss.entries: expected 'i,j,target' triples, got '" + triple + "'");
    const long long i = to_integer("loss.entries", parts[0]);
    const long long j = to_integer("loss.entries", parts[1]);
    if (i < 1 || j < 1) throw ConfigError("loss.entries: indices are 1-based");
    out.push_back({static_cast<Index>(i - 1), static_cast<Index>(j - 1),
                   to_double("loss.entries", parts[2])});
  }
  return out;
}

std::string fmt(double x) {
  if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
  return format_double(x);
}

class Reader {
 public:
  explicit Reader(const pt::ptree& tree) : tree_(tree) {}

  bool has(const std::string& section, const std::string& key) const {
    const auto s = tree_.get_child_optional(section);
    return s && s->get_optional<std::string>(key);
  }
  std::string str(const std::string& section, const std::string& key,
                  const std::string& fallback) const {
    if (!has(section, key)) return fallback;
    return trim(tree_.get_child(section).get<std::string>(key));
  }
  double num(const std::string& section, const std::string& key, double fallback) const {
    return has(section, key) ? to_double(section + "." + key, str(section, key, "")) : fallback;
  }
  long long integer(const std::string& section, const std::string& key,
                    long long fallback) const {
    return has(section, key) ? to_integer(section + "." + key, str(section, key, "")) : fallback;
  }

 private:
  const pt::ptree& tree_;
};

template <class Fn>
void wrap(Fn&& fn) {
  try {
    fn();
  } catch (const DomainError& e) {
    throw ConfigError(e.what());
  } catch (const DimensionError& e) {
    throw ConfigError(e.what());
  }
}

}  // namespace

std::string kind_name(ExperimentKind kind) {
  switch (kind) {
    case ExperimentKind::kFlow: return "flow";
    case ExperimentKind::kRle: return "rle";
    case ExperimentKind::kDyson: return "dyson";
    case ExperimentKind::kSphere: return "sphere";
    case ExperimentKind::kComplete: return "complete";
    case ExperimentKind::kAudit: return "audit";
    case ExperimentKind::kEntropyMap: return "entropy-map";
  }
  return "unknown";
}

ExperimentKind parse_kind(const std::string& name) {
  for (ExperimentKind k :
       {ExperimentKind::kFlow, ExperimentKind::kRle, ExperimentKind::kDyson,
        ExperimentKind::kSphere, ExperimentKind::kComplete, ExperimentKind::kAudit,
        ExperimentKind::kEntropyMap})
    if (kind_name(k) == lower(trim(name))) return k;
  throw ConfigError("experiment.kind: unknown kind '" + name + "'");
}

void ExperimentConfig::set_seed(std::uint64_t s) {
  seed = s;
  sde.seed = s;
  init.seed = s;
}

void ExperimentConfig::validate() const {
  if (d < 1) throw ConfigError("experiment.d must be >= 1");
  if (depth < 1) throw ConfigError("experiment.N must be >= 1");
  wrap([&] { loss.validate(d); });
  if (!(init.scale > 0.0)) throw ConfigError("init.scale must be positive");
  if (!(rankRelTol >= 0.0)) throw ConfigError("output.rank_rel_tol must be >= 0");
  switch (kind) {
    case ExperimentKind::kFlow:
      wrap([&] { flow.validate(); });
      if (flowLevel == FlowLevel::kReduced && init.mode == InitMode::kGaussian)
        throw ConfigError("flow.level = reduced needs init.mode = balanced");
      break;
    case ExperimentKind::kComplete:
      wrap([&] { flow.validate(); });
      if (completion.paths < 1) throw ConfigError("complete.paths must be >= 1");
      if (!(completion.energyThreshold > 0.0) || !(completion.detThreshold > 0.0))
        throw ConfigError("complete thresholds must be positive");
      break;
    case ExperimentKind::kRle:
      wrap([&] { sde.validate(); });
      if (sdeRecordEvery < 1) throw ConfigError("sde.record_every must be >= 1");
      if (rleLevel == RleLevel::kUp && init.mode == InitMode::kGaussian)
        throw ConfigError("sde.level = up needs init.mode = balanced");
      break;
    case ExperimentKind::kDyson:
      wrap([&] { sde.validate(); });
      if (sdeRecordEvery < 1) throw ConfigError("sde.record_every must be >= 1");
      if (dyson.initial.size() != 0) {
        if (dyson.initial.size() != d) throw ConfigError("dyson.initial must have d entries");
        wrap([&] { DysonState{dyson.initial}.validate(); });
      }
      break;
    case ExperimentKind::kSphere:
      wrap([&] { sde.validate(); });
      if (sdeRecordEvery < 1) throw ConfigError("sde.record_every must be >= 1");
      if (!(sphere.radius > 0.0)) throw ConfigError("sphere.radius must be positive");
      break;
    case ExperimentKind::kEntropyMap:
      if (!(entropyMap.sigmaMin > 0.0) || !(entropyMap.sigmaMax > entropyMap.sigmaMin))
        throw ConfigError("entropy_map needs 0 < sigma_min < sigma_max");
      if (entropyMap.points < 2) throw ConfigError("entropy_map.points must be >= 2");
      if (!(entropyMap.beta > 0.0)) throw ConfigError("entropy_map.beta must be positive");
      if (d > 4) throw ConfigError("entropy_map tabulates a full grid; use d <= 4");
      break;
    case ExperimentKind::kAudit:
      break;
  }
}

ExperimentConfig parse_config(const std::string& text) {
  pt::ptree tree;
  try {
    std::istringstream is(text);
    pt::read_ini(is, tree);
  } catch (const pt::ini_parser_error& e) {
    throw ConfigError(std::string("config: ") + e.message() + " (line " +
                      std::to_string(e.line()) + ")");
  }
  for (const auto& [section, body] : tree) {
    const auto it = schema().find(section);
    if (it == schema().end()) {
      if (body.empty()) throw ConfigError("config: key '" + section + "' outside a section");
      throw ConfigError("config: unknown section [" + section + "]");
    }
    for (const auto& kv : body)
      if (!it->second.count(kv.first))
        throw ConfigError("config: unknown key '" + kv.first + "' in [" + section + "]");
  }
  const Reader r(tree);
  ExperimentConfig c;
  if (!r.has("experiment", "kind")) throw ConfigError("experiment.kind is required");
  c.kind = parse_kind(r.str("experiment", "kind", ""));
  c.d = static_cast<Index>(r.integer("experiment", "d", 2));
  c.depth = static_cast<int>(r.integer("experiment", "N", 3));
  if (c.d < 1) throw ConfigError("experiment.d must be >= 1");
  c.set_seed(r.has("experiment", "seed") ? to_seed("experiment.seed", r.str("experiment", "seed", ""))
                                         : 0);

  const std::string lossType = lower(r.str("loss", "type", "completion"));
  if (lossType == "completion") {
    c.loss = r.has("loss", "entries") ? LossSpec::completion(parse_entries(r.str("loss", "entries", "")))
                                      : LossSpec::unit_diagonal(c.d);
  } else if (lossType == "quadratic") {
    c.loss = LossSpec::frobenius_quadratic();
  } else if (lossType == "zero") {
    c.loss = LossSpec::zero();
  } else {
    throw ConfigError("loss.type: expected completion, quadratic or zero");
  }

  const std::string flowLevel = lower(r.str("flow", "level", "full"));
  if (flowLevel == "full") c.flowLevel = FlowLevel::kFull;
  else if (flowLevel == "reduced") c.flowLevel = FlowLevel::kReduced;
  else throw ConfigError("flow.level: expected full or reduced");
  const std::string method = lower(r.str("flow", "method", "rk4"));
  if (method == "rk4") c.flow.method = Method::kRk4;
  else if (method == "euler") c.flow.method = Method::kEuler;
  else throw ConfigError("flow.method: expected rk4 or euler");
  c.flow.dt = r.num("flow", "dt", 1e-3);
  c.flow.tEnd = r.num("flow", "t_end", 10.0);
  c.flow.recordEvery = static_cast<int>(r.integer("flow", "record_every", 10));
  c.flow.beta = r.num("flow", "beta", std::numeric_limits<double>::infinity());
  c.flow.stopTolerance = r.num("flow", "stop_tolerance", 1e-9);
  c.flow.stopWindow = static_cast<int>(r.integer("flow", "stop_window", 100));

  const std::string rleLevel = lower(r.str("sde", "level", "down"));
  if (rleLevel == "down") c.rleLevel = RleLevel::kDown;
  else if (rleLevel == "up") c.rleLevel = RleLevel::kUp;
  else throw ConfigError("sde.level: expected down or up");
  c.sde.beta = r.num("sde", "beta", 1.0);
  c.sde.kappa = r.num("sde", "kappa", 1.0);
  c.sde.dt = r.num("sde", "dt", 1e-3);
  c.sde.tEnd = r.num("sde", "t_end", 1.0);
  c.sde.paths = static_cast<int>(r.integer("sde", "paths", 1));
  c.sdeRecordEvery = static_cast<int>(r.integer("sde", "record_every", 100));

  const std::string mode = lower(r.str("init", "mode", "balanced"));
  if (mode == "balanced") c.init.mode = InitMode::kBalanced;
  else if (mode == "gaussian") c.init.mode = InitMode::kGaussian;
  else throw ConfigError("init.mode: expected balanced or gaussian");
  c.init.scale = r.num("init", "scale", 0.5);

  const std::string form = lower(r.str("dyson", "form", "particle"));
  if (form == "particle") c.dyson.form = DysonForm::kParticle;
  else if (form == "matrix") c.dyson.form = DysonForm::kMatrix;
  else throw ConfigError("dyson.form: expected particle or matrix");
  if (r.has("dyson", "initial")) {
    const auto xs = split(r.str("dyson", "initial", ""), ',');
    c.dyson.initial.resize(static_cast<Index>(xs.size()));
    for (std::size_t i = 0; i < xs.size(); ++i)
      c.dyson.initial(static_cast<Index>(i)) = to_double("dyson.initial", xs[i]);
  }
  c.sphere.radius = r.num("sphere", "radius", 1.0);
  c.entropyMap.sigmaMin = r.num("entropy_map", "sigma_min", 0.1);
  c.entropyMap.sigmaMax = r.num("entropy_map", "sigma_max", 3.0);
  c.entropyMap.points = static_cast<int>(r.integer("entropy_map", "points", 30));
  c.entropyMap.beta = r.num("entropy_map", "beta", 1.0);
  c.completion.paths = static_cast<int>(r.integer("complete", "paths", 200));
  c.completion.energyThreshold = r.num("complete", "energy_threshold", 1e-6);
  c.completion.detThreshold = r.num("complete", "det_threshold", 1e-3);
  c.outputDir = r.str("output", "dir", "");
  c.rankRelTol = r.num("output", "rank_rel_tol", 1e-6);
  c.validate();
  return c;
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config file '" + path + "'");
  std::ostringstream os;
  os << in.rdbuf();
  return parse_config(os.str());
}

std::string echo_config(const ExperimentConfig& c) {
  std::ostringstream os;
  os << "[experiment]\n"
     << "kind = " << kind_name(c.kind) << "\n"
     << "d = " << c.d << "\n"
     << "N = " << c.depth << "\n"
     << "seed = " << c.seed << "\n\n";
  os << "[loss]\n";
  if (c.loss.kind == LossKind::kFrobeniusQuadratic) {
    os << "type = quadratic\n";
  } else if (c.loss.mask.empty()) {
    os << "type = zero\n";
  } else {
    os << "type = completion\nentries = ";
    for (std::size_t i = 0; i < c.loss.mask.size(); ++i) {
      const MaskEntry& e = c.loss.mask[i];
      os << (i ? "; " : "") << e.row + 1 << "," << e.col + 1 << "," << fmt(e.target);
    }
    os << "\n";
  }
  os << "\n[flow]\n"
     << "level = " << (c.flowLevel == FlowLevel::kFull ? "full" : "reduced") << "\n"
     << "method = " << (c.flow.method == Method::kRk4 ? "rk4" : "euler") << "\n"
     << "dt = " << fmt(c.flow.dt) << "\n"
     << "t_end = " << fmt(c.flow.tEnd) << "\n"
     << "record_every = " << c.flow.recordEvery << "\n"
     << "beta = " << fmt(c.flow.beta) << "\n"
     << "stop_tolerance = " << fmt(c.flow.stopTolerance) << "\n"
     << "stop_window = " << c.flow.stopWindow << "\n\n";
  os << "[sde]\n"
     << "level = " << (c.rleLevel == RleLevel::kDown ? "down" : "up") << "\n"
     << "beta = " << fmt(c.sde.beta) << "\n"
     << "kappa = " << fmt(c.sde.kappa) << "\n"
     << "dt = " << fmt(c.sde.dt) << "\n"
     << "t_end = " << fmt(c.sde.tEnd) << "\n"
     << "paths = " << c.sde.paths << "\n"
     << "record_every = " << c.sdeRecordEvery << "\n\n";
  os << "[init]\n"
     << "mode = " << (c.init.mode == InitMode::kBalanced ? "balanced" : "gaussian") << "\n"
     << "scale = " << fmt(c.init.scale) << "\n\n";
  os << "[dyson]\n"
     << "form = " << (c.dyson.form == DysonForm::kParticle ? "particle" : "matrix") << "\n";
  if (c.dyson.initial.size() > 0) {
    os << "initial = ";
    for (Index i = 0; i < c.dyson.initial.size(); ++i)
      os << (i ? ", " : "") << fmt(c.dyson.initial(i));
    os << "\n";
  }
  os << "\n[sphere]\nradius = " << fmt(c.sphere.radius) << "\n\n";
  os << "[entropy_map]\n"
     << "sigma_min = " << fmt(c.entropyMap.sigmaMin) << "\n"
     << "sigma_max = " << fmt(c.entropyMap.sigmaMax) << "\n"
     << "points = " << c.entropyMap.points << "\n"
     << "beta = " << fmt(c.entropyMap.beta) << "\n\n";
  os << "[complete]\n"
     << "paths = " << c.completion.paths << "\n"
     << "energy_threshold = " << fmt(c.completion.energyThreshold) << "\n"
     << "det_threshold = " << fmt(c.completion.detThreshold) << "\n\n";
  // The output directory is where a run goes, not part of what it computes;
  // leaving it out keeps the echo identical across reruns.
  os << "[output]\n"
     << "rank_rel_tol = " << fmt(c.rankRelTol) << "\n";
  return os.str();
}

}  // namespace dln
