#include "xreid/run_config.hpp"

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include "xreid/errors.hpp"

namespace xreid {

namespace {

std::string trim(const std::string& s) {
  std::size_t b = s.find_first_not_of(" \t");
  if (b == std::string::npos) return "";
  std::size_t e = s.find_last_not_of(" \t");
  return s.substr(b, e - b + 1);
}

std::string fmt_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

// Raw parsed file: section -> key -> (value, line). Keys are consumed as
// they are read back so leftovers can be reported as unknown.
struct IniFile {
  std::map<std::string, std::map<std::string, std::pair<std::string, long>>> sections;
  std::vector<std::string> errors;

  static IniFile parse(const std::string& path);

  std::string* find(const std::string& section, const std::string& key) {
    auto s = sections.find(section);
    if (s == sections.end()) return nullptr;
    auto k = s->second.find(key);
    if (k == s->second.end()) return nullptr;
    consumed.insert(section + "." + key);
    return &k->second.first;
  }

  void report_unknown() {
    for (const auto& [section, keys] : sections) {
      for (const auto& [key, value] : keys) {
        if (!consumed.count(section + "." + key)) {
          errors.push_back("line " + std::to_string(value.second) +
                           ": unknown key [" + section + "] " + key);
        }
      }
    }
  }

 private:
  std::set<std::string> consumed;
};

IniFile IniFile::parse(const std::string& path) {
  IniFile ini;
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    ini.errors.push_back("cannot open config file " + path);
    return ini;
  }
  std::string line, section;
  long line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    std::size_t comment = line.find_first_of("#;");
    if (comment != std::string::npos) line = line.substr(0, comment);
    line = trim(line);
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']') {
        ini.errors.push_back("line " + std::to_string(line_no) +
                             ": malformed section header");
        continue;
      }
      section = trim(line.substr(1, line.size() - 2));
      continue;
    }
    std::size_t eq = line.find('=');
    if (eq == std::string::npos) {
      ini.errors.push_back("line " + std::to_string(line_no) +
                           ": expected key = value");
      continue;
    }
    std::string key = trim(line.substr(0, eq));
    std::string value = trim(line.substr(eq + 1));
    if (section.empty()) {
      ini.errors.push_back("line " + std::to_string(line_no) +
                           ": key outside of a section");
      continue;
    }
    ini.sections[section][key] = {value, line_no};
  }
  return ini;
}

struct Reader {
  IniFile& ini;
  std::vector<std::string>& errors;

  void str(const std::string& sec, const std::string& key, std::string& out) {
    if (std::string* v = ini.find(sec, key)) out = *v;
  }
  template <typename T, typename Parse>
  void parse_with(const std::string& sec, const std::string& key, T& out,
                  Parse parse) {
    std::string* v = ini.find(sec, key);
    if (!v) return;
    try {
      out = parse(*v);
    } catch (const std::exception& e) {
      errors.push_back("[" + sec + "] " + key + ": " + e.what() + " ('" + *v + "')");
    }
  }
  void integer(const std::string& sec, const std::string& key, int& out) {
    parse_with(sec, key, out, [](const std::string& s) {
      std::size_t pos = 0;
      int v = std::stoi(s, &pos);
      if (pos != s.size()) throw std::invalid_argument("not an integer");
      return v;
    });
  }
  void longint(const std::string& sec, const std::string& key, long& out) {
    parse_with(sec, key, out, [](const std::string& s) {
      std::size_t pos = 0;
      long v = std::stol(s, &pos);
      if (pos != s.size()) throw std::invalid_argument("not an integer");
      return v;
    });
  }
  void u64(const std::string& sec, const std::string& key, std::uint64_t& out) {
    parse_with(sec, key, out, [](const std::string& s) {
      std::size_t pos = 0;
      unsigned long long v = std::stoull(s, &pos);
      if (pos != s.size()) throw std::invalid_argument("not an integer");
      return static_cast<std::uint64_t>(v);
    });
  }
  void number(const std::string& sec, const std::string& key, double& out) {
    parse_with(sec, key, out, [](const std::string& s) {
      std::size_t pos = 0;
      double v = std::stod(s, &pos);
      if (pos != s.size()) throw std::invalid_argument("not a number");
      return v;
    });
  }
  void boolean(const std::string& sec, const std::string& key, bool& out) {
    parse_with(sec, key, out, [](const std::string& s) {
      if (s == "true" || s == "1") return true;
      if (s == "false" || s == "0") return false;
      throw std::invalid_argument("expected true|false");
    });
  }
  void long_list(const std::string& sec, const std::string& key,
                 std::vector<long>& out) {
    parse_with(sec, key, out, [](const std::string& s) {
      std::vector<long> v;
      std::stringstream ss(s);
      std::string item;
      while (std::getline(ss, item, ',')) {
        item = trim(item);
        if (item.empty()) continue;
        std::size_t pos = 0;
        v.push_back(std::stol(item, &pos));
        if (pos != item.size()) throw std::invalid_argument("not an integer list");
      }
      return v;
    });
  }
};

}  // namespace

const char* to_string(RankingVariant v) {
  switch (v) {
    case RankingVariant::triplet: return "triplet";
    case RankingVariant::cosine_triplet: return "cosine_triplet";
    case RankingVariant::at: return "at";
    case RankingVariant::expat: return "expat";
    case RankingVariant::tuplet21: return "tuplet21";
  }
  return "?";
}

RankingVariant ranking_variant_from_string(const std::string& s) {
  if (s == "triplet") return RankingVariant::triplet;
  if (s == "cosine_triplet") return RankingVariant::cosine_triplet;
  if (s == "at") return RankingVariant::at;
  if (s == "expat") return RankingVariant::expat;
  if (s == "tuplet21") return RankingVariant::tuplet21;
  throw ValidationError("unknown loss variant '" + s +
                        "' (expected triplet|cosine_triplet|at|expat|tuplet21)");
}

TrainConfig RunConfig::train_config() const {
  TrainConfig cfg;
  cfg.steps = steps;
  cfg.lr = LrSchedule{base_lr, decay_factor, decay_steps, warmup_steps, 0.1};
  cfg.batch_size = batch;
  cfg.loss = loss;
  cfg.normalizer = normalizer;
  cfg.csbn_momentum = csbn_momentum;
  cfg.csbn_epsilon = csbn_epsilon;
  cfg.hidden_dim = hidden_dim;
  cfg.embed_dim = embed_dim;
  cfg.seed = seed;
  cfg.checkpoint_every = checkpoint_every;
  return cfg;
}

SyntheticConfig RunConfig::synthetic_config() const {
  SyntheticConfig s;
  s.train_identities = ids;
  s.test_identities = test_ids;
  s.samples_per_id_per_modality = per_mod;
  s.dim = dim;
  s.gap = gap;
  s.noise = noise;
  s.seed = substream(seed, "data").state();
  return s;
}

std::uint64_t RunConfig::eval_seed() const {
  return substream(seed, "eval").state();
}

RunConfig RunConfig::load(const std::string& path) {
  IniFile ini = IniFile::parse(path);
  RunConfig cfg;
  std::vector<std::string> errors = ini.errors;
  Reader r{ini, errors};

  std::string source = "synthetic", loss_variant = to_string(cfg.loss.variant);
  std::string normalizer = to_string(cfg.normalizer);
  std::string eval_mode = to_string(cfg.eval_mode);

  r.str("data", "source", source);
  r.str("data", "train_csv", cfg.train_csv);
  r.str("data", "test_csv", cfg.test_csv);
  r.integer("data", "ids", cfg.ids);
  r.integer("data", "test_ids", cfg.test_ids);
  r.integer("data", "per_mod", cfg.per_mod);
  r.integer("data", "dim", cfg.dim);
  r.number("data", "gap", cfg.gap);
  r.number("data", "noise", cfg.noise);

  r.str("loss", "variant", loss_variant);
  r.boolean("loss", "use_ranking", cfg.loss.use_ranking);
  r.boolean("loss", "use_identity", cfg.loss.use_identity);
  r.number("loss", "triplet_margin", cfg.loss.triplet_margin);
  r.number("loss", "expat_margin", cfg.loss.expat_margin);
  r.number("loss", "alpha", cfg.loss.alpha);
  r.number("loss", "beta", cfg.loss.beta);
  r.number("loss", "label_smoothing", cfg.loss.label_smoothing);

  r.str("csbn", "variant", normalizer);
  r.number("csbn", "momentum", cfg.csbn_momentum);
  r.number("csbn", "epsilon", cfg.csbn_epsilon);

  r.longint("train", "steps", cfg.steps);
  r.number("train", "base_lr", cfg.base_lr);
  r.number("train", "decay_factor", cfg.decay_factor);
  r.long_list("train", "decay_steps", cfg.decay_steps);
  r.longint("train", "warmup_steps", cfg.warmup_steps);
  r.integer("train", "batch", cfg.batch);
  r.integer("train", "hidden_dim", cfg.hidden_dim);
  r.integer("train", "embed_dim", cfg.embed_dim);
  r.longint("train", "checkpoint_every", cfg.checkpoint_every);
  r.u64("train", "seed", cfg.seed);

  r.str("eval", "mode", eval_mode);
  r.integer("eval", "trials", cfg.eval_trials);

  r.str("output", "dir", cfg.out_dir);

  ini.report_unknown();

  auto parse_enum = [&](const std::string& what, auto parse, auto& out) {
    try {
      out = parse();
    } catch (const ValidationError& e) {
      errors.push_back(what + ": " + e.what());
    }
  };
  if (source == "synthetic") {
    cfg.source = DataSource::synthetic;
  } else if (source == "csv") {
    cfg.source = DataSource::csv;
  } else {
    errors.push_back("[data] source: expected synthetic|csv, got '" + source + "'");
  }
  parse_enum("[loss] variant", [&] { return ranking_variant_from_string(loss_variant); },
             cfg.loss.variant);
  parse_enum("[csbn] variant", [&] { return normalizer_from_string(normalizer); },
             cfg.normalizer);
  parse_enum("[eval] mode", [&] { return gallery_mode_from_string(eval_mode); },
             cfg.eval_mode);

  // Semantic checks; every violation is reported.
  if (cfg.source == DataSource::synthetic) {
    if (!cfg.train_csv.empty() || !cfg.test_csv.empty()) {
      errors.push_back("[data] exactly one source: csv paths set while source=synthetic");
    }
    if (cfg.ids < 2) errors.push_back("[data] ids: need >= 2 identities");
    if (cfg.test_ids < 2) errors.push_back("[data] test_ids: need >= 2 identities");
    if (cfg.per_mod < 2) errors.push_back("[data] per_mod: need >= 2 samples");
    if (cfg.dim < 4) errors.push_back("[data] dim: need >= 4");
  } else {
    if (cfg.train_csv.empty()) {
      errors.push_back("[data] train_csv: required when source=csv");
    } else if (!std::filesystem::exists(cfg.train_csv)) {
      errors.push_back("[data] train_csv: path does not exist: " + cfg.train_csv);
    }
    if (!cfg.test_csv.empty() && !std::filesystem::exists(cfg.test_csv)) {
      errors.push_back("[data] test_csv: path does not exist: " + cfg.test_csv);
    }
  }
  if (cfg.loss.triplet_margin < 0) errors.push_back("[loss] triplet_margin: must be >= 0");
  if (cfg.loss.alpha < 0 || cfg.loss.beta < 0) {
    errors.push_back("[loss] alpha/beta: must be >= 0");
  }
  if (cfg.loss.label_smoothing < 0 || cfg.loss.label_smoothing >= 1) {
    errors.push_back("[loss] label_smoothing: must be in [0, 1)");
  }
  if (!cfg.loss.use_ranking && !cfg.loss.use_identity) {
    errors.push_back("[loss] use_ranking/use_identity: at least one must be true");
  }
  if (cfg.csbn_momentum <= 0 || cfg.csbn_momentum >= 1) {
    errors.push_back("[csbn] momentum: must be in (0, 1)");
  }
  if (cfg.csbn_epsilon <= 0) errors.push_back("[csbn] epsilon: must be > 0");
  if (cfg.steps < 1) errors.push_back("[train] steps: must be >= 1");
  if (cfg.base_lr < 0) errors.push_back("[train] base_lr: must be >= 0");
  if (cfg.batch < 1) errors.push_back("[train] batch: must be >= 1");
  if (cfg.hidden_dim < 1 || cfg.embed_dim < 1) {
    errors.push_back("[train] hidden_dim/embed_dim: must be >= 1");
  }
  if (cfg.warmup_steps < 0) errors.push_back("[train] warmup_steps: must be >= 0");
  if (cfg.eval_trials < 1) errors.push_back("[eval] trials: must be >= 1");
  if (cfg.out_dir.empty()) errors.push_back("[output] dir: must be set");

  if (!errors.empty()) {
    std::string msg = "config validation failed:";
    for (const std::string& e : errors) msg += "\n  - " + e;
    throw ValidationError(msg);
  }
  return cfg;
}

void RunConfig::save(const std::string& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ValidationError("config: cannot open " + path + " for writing");
  out << "[data]\n";
  out << "source = " << (source == DataSource::synthetic ? "synthetic" : "csv") << "\n";
  if (!train_csv.empty()) out << "train_csv = " << train_csv << "\n";
  if (!test_csv.empty()) out << "test_csv = " << test_csv << "\n";
  out << "ids = " << ids << "\n";
  out << "test_ids = " << test_ids << "\n";
  out << "per_mod = " << per_mod << "\n";
  out << "dim = " << dim << "\n";
  out << "gap = " << fmt_double(gap) << "\n";
  out << "noise = " << fmt_double(noise) << "\n";
  out << "\n[loss]\n";
  out << "variant = " << to_string(loss.variant) << "\n";
  out << "use_ranking = " << (loss.use_ranking ? "true" : "false") << "\n";
  out << "use_identity = " << (loss.use_identity ? "true" : "false") << "\n";
  out << "triplet_margin = " << fmt_double(loss.triplet_margin) << "\n";
  out << "expat_margin = " << fmt_double(loss.expat_margin) << "\n";
  out << "alpha = " << fmt_double(loss.alpha) << "\n";
  out << "beta = " << fmt_double(loss.beta) << "\n";
  out << "label_smoothing = " << fmt_double(loss.label_smoothing) << "\n";
  out << "\n[csbn]\n";
  out << "variant = " << to_string(normalizer) << "\n";
  out << "momentum = " << fmt_double(csbn_momentum) << "\n";
  out << "epsilon = " << fmt_double(csbn_epsilon) << "\n";
  out << "\n[train]\n";
  out << "steps = " << steps << "\n";
  out << "base_lr = " << fmt_double(base_lr) << "\n";
  out << "decay_factor = " << fmt_double(decay_factor) << "\n";
  out << "decay_steps = ";
  for (std::size_t i = 0; i < decay_steps.size(); ++i) {
    out << (i ? "," : "") << decay_steps[i];
  }
  out << "\n";
  out << "warmup_steps = " << warmup_steps << "\n";
  out << "batch = " << batch << "\n";
  out << "hidden_dim = " << hidden_dim << "\n";
  out << "embed_dim = " << embed_dim << "\n";
  out << "checkpoint_every = " << checkpoint_every << "\n";
  out << "seed = " << seed << "\n";
  out << "\n[eval]\n";
  out << "mode = " << to_string(eval_mode) << "\n";
  out << "trials = " << eval_trials << "\n";
  out << "\n[output]\n";
  out << "dir = " << out_dir << "\n";
  if (!out) throw ValidationError("config: write failed for " + path);
}

}  // namespace xreid
