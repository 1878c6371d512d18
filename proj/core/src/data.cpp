#include "xreid/data.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

#include "xreid/errors.hpp"

namespace xreid {

namespace {

void require(bool ok, const std::string& msg) {
  if (!ok) throw ValidationError(msg);
}

// Columns of a D x D standard Gaussian matrix, orthonormalized with
// modified Gram-Schmidt.
std::vector<std::vector<double>> random_orthonormal(int dim, Rng& rng) {
  std::vector<std::vector<double>> cols(dim, std::vector<double>(dim));
  for (auto& c : cols) {
    for (double& v : c) v = rng.next_normal();
  }
  for (int j = 0; j < dim; ++j) {
    for (int i = 0; i < j; ++i) {
      double proj = 0.0;
      for (int r = 0; r < dim; ++r) proj += cols[j][r] * cols[i][r];
      for (int r = 0; r < dim; ++r) cols[j][r] -= proj * cols[i][r];
    }
    double norm = 0.0;
    for (double v : cols[j]) norm += v * v;
    norm = std::sqrt(norm);
    for (double& v : cols[j]) v /= norm;
  }
  return cols;
}

struct ModalityMaps {
  // Row-major D x D matrices.
  std::vector<double> rgb;
  std::vector<double> ir;
};

ModalityMaps build_maps(int dim, double gap, std::uint64_t seed) {
  Rng rng_base = substream(seed, "map_rgb");
  auto q = random_orthonormal(dim, rng_base);
  Rng rng_gap = substream(seed, "map_gap");
  double inv_sqrt_d = 1.0 / std::sqrt(static_cast<double>(dim));

  ModalityMaps maps;
  maps.rgb.resize(static_cast<std::size_t>(dim) * dim);
  maps.ir.resize(static_cast<std::size_t>(dim) * dim);
  for (int r = 0; r < dim; ++r) {
    for (int c = 0; c < dim; ++c) {
      maps.rgb[static_cast<std::size_t>(r) * dim + c] = q[c][r];
    }
  }
  for (int r = 0; r < dim; ++r) {
    for (int c = 0; c < dim; ++c) {
      std::size_t idx = static_cast<std::size_t>(r) * dim + c;
      maps.ir[idx] = maps.rgb[idx] + gap * rng_gap.next_normal() * inv_sqrt_d;
    }
  }
  return maps;
}

std::vector<double> apply_map(const std::vector<double>& m, int dim,
                              const std::vector<double>& x) {
  std::vector<double> y(dim, 0.0);
  for (int r = 0; r < dim; ++r) {
    double acc = 0.0;
    for (int c = 0; c < dim; ++c) acc += m[static_cast<std::size_t>(r) * dim + c] * x[c];
    y[r] = acc;
  }
  return y;
}

std::vector<double> identity_latent(int dim, std::uint64_t seed, int id) {
  Rng rng = substream(seed, "latent", static_cast<std::uint64_t>(id));
  std::vector<double> u(dim);
  double norm = 0.0;
  for (double& v : u) {
    v = rng.next_normal();
    norm += v * v;
  }
  norm = std::sqrt(norm);
  for (double& v : u) v /= norm;
  return u;
}

void emit_identity(Dataset& ds, const ModalityMaps& maps,
                   const SyntheticConfig& cfg, int id) {
  std::vector<double> latent = identity_latent(cfg.dim, cfg.seed, id);
  std::vector<double> base_rgb = apply_map(maps.rgb, cfg.dim, latent);
  std::vector<double> base_ir = apply_map(maps.ir, cfg.dim, latent);
  for (int mod = 0; mod < 2; ++mod) {
    Rng noise_rng = substream(cfg.seed, "noise",
                              static_cast<std::uint64_t>(id) * 2 + mod);
    const std::vector<double>& base = mod == 0 ? base_rgb : base_ir;
    for (int s = 0; s < cfg.samples_per_id_per_modality; ++s) {
      Sample sample;
      sample.id = id;
      sample.modality = mod == 0 ? Modality::rgb : Modality::ir;
      // rgb cameras 0/1, ir cameras 2/3, alternating
      sample.camera = (mod == 0 ? 0 : 2) + (s % 2);
      sample.features.resize(cfg.dim);
      for (int c = 0; c < cfg.dim; ++c) {
        sample.features[c] = base[c] + cfg.noise * noise_rng.next_normal();
      }
      ds.samples.push_back(std::move(sample));
    }
  }
}

void check_synth(int identities, int per_modality, int dim) {
  require(identities >= 2, "generate_synthetic: need >= 2 identities");
  require(per_modality >= 2, "generate_synthetic: need >= 2 samples per id per modality");
  require(dim >= 4, "generate_synthetic: need dim >= 4");
}

}  // namespace

std::vector<int> Dataset::identities() const {
  std::set<int> s;
  for (const Sample& smp : samples) s.insert(smp.id);
  return {s.begin(), s.end()};
}

int Dataset::count(int id, Modality m) const {
  int n = 0;
  for (const Sample& smp : samples) {
    if (smp.id == id && smp.modality == m) ++n;
  }
  return n;
}

Dataset generate_synthetic(int identities, int per_modality, int dim,
                           double gap, double noise, std::uint64_t seed) {
  check_synth(identities, per_modality, dim);
  SyntheticConfig cfg;
  cfg.train_identities = identities;
  cfg.samples_per_id_per_modality = per_modality;
  cfg.dim = dim;
  cfg.gap = gap;
  cfg.noise = noise;
  cfg.seed = seed;

  ModalityMaps maps = build_maps(dim, gap, seed);
  Dataset ds;
  ds.split = Split::train;
  ds.dim = dim;
  for (int id = 0; id < identities; ++id) emit_identity(ds, maps, cfg, id);
  return ds;
}

std::pair<Dataset, Dataset> generate_synthetic_pair(const SyntheticConfig& cfg) {
  check_synth(cfg.train_identities, cfg.samples_per_id_per_modality, cfg.dim);
  require(cfg.test_identities >= 2, "generate_synthetic: need >= 2 test identities");

  ModalityMaps maps = build_maps(cfg.dim, cfg.gap, cfg.seed);
  Dataset train;
  train.split = Split::train;
  train.dim = cfg.dim;
  for (int id = 0; id < cfg.train_identities; ++id) emit_identity(train, maps, cfg, id);

  Dataset test;
  test.split = Split::test;
  test.dim = cfg.dim;
  for (int id = cfg.train_identities;
       id < cfg.train_identities + cfg.test_identities; ++id) {
    emit_identity(test, maps, cfg, id);
  }
  return {std::move(train), std::move(test)};
}

const char* to_string(Modality m) { return m == Modality::rgb ? "rgb" : "ir"; }

void save_dataset(const Dataset& ds, const std::string& path) {
  require(ds.dim >= 1, "save_dataset: empty dataset");
  std::ofstream out(path, std::ios::binary);  // binary: LF newlines everywhere
  if (!out) throw ValidationError("save_dataset: cannot open " + path);
  out << "id,modality,camera";
  for (int c = 0; c < ds.dim; ++c) out << ",f" << c;
  out << "\n";
  char buf[64];
  for (const Sample& s : ds.samples) {
    out << s.id << ',' << to_string(s.modality) << ',' << s.camera;
    for (double v : s.features) {
      std::snprintf(buf, sizeof(buf), "%.17g", v);
      out << ',' << buf;
    }
    out << "\n";
  }
  if (!out) throw ValidationError("save_dataset: write failed for " + path);
}

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> fields;
  std::string cur;
  for (char ch : line) {
    if (ch == ',') {
      fields.push_back(cur);
      cur.clear();
    } else {
      cur.push_back(ch);
    }
  }
  fields.push_back(cur);
  return fields;
}

}  // namespace

Dataset load_dataset(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError("load_dataset: cannot open " + path);

  std::string line;
  long line_no = 0;
  if (!std::getline(in, line)) {
    throw ValidationError("load_dataset: no samples in " + path);
  }
  if (!line.empty() && line.back() == '\r') line.pop_back();
  ++line_no;
  std::vector<std::string> header = split_csv_line(line);
  if (header.size() < 4 || header[0] != "id" || header[1] != "modality" ||
      header[2] != "camera") {
    throw ParseError("load_dataset: malformed header, expected id,modality,camera,f0,...", line_no);
  }
  int dim = static_cast<int>(header.size()) - 3;
  for (int c = 0; c < dim; ++c) {
    if (header[3 + c] != "f" + std::to_string(c)) {
      throw ParseError("load_dataset: malformed header, expected column f" +
                           std::to_string(c), line_no);
    }
  }

  Dataset ds;
  ds.dim = dim;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::vector<std::string> f = split_csv_line(line);
    if (static_cast<int>(f.size()) != dim + 3) {
      throw ParseError("load_dataset: expected " + std::to_string(dim + 3) +
                           " fields, got " + std::to_string(f.size()), line_no);
    }
    Sample s;
    try {
      std::size_t pos = 0;
      s.id = std::stoi(f[0], &pos);
      if (pos != f[0].size()) throw std::invalid_argument("trailing");
      s.camera = std::stoi(f[2], &pos);
      if (pos != f[2].size()) throw std::invalid_argument("trailing");
    } catch (const std::exception&) {
      throw ParseError("load_dataset: non-integer id/camera", line_no);
    }
    if (f[1] == "rgb") {
      s.modality = Modality::rgb;
    } else if (f[1] == "ir") {
      s.modality = Modality::ir;
    } else {
      throw ParseError("load_dataset: unknown modality token '" + f[1] + "'", line_no);
    }
    s.features.resize(dim);
    for (int c = 0; c < dim; ++c) {
      try {
        std::size_t pos = 0;
        s.features[c] = std::stod(f[3 + c], &pos);
        if (pos != f[3 + c].size()) throw std::invalid_argument("trailing");
      } catch (const std::exception&) {
        throw ParseError("load_dataset: bad feature value '" + f[3 + c] + "'", line_no);
      }
    }
    ds.samples.push_back(std::move(s));
  }
  if (ds.samples.empty()) {
    throw ValidationError("load_dataset: no samples in " + path);
  }
  return ds;
}

TupleSampler::TupleSampler(const Dataset& train, std::uint64_t seed)
    : data_(&train), seed_(seed) {
  for (int i = 0; i < static_cast<int>(train.samples.size()); ++i) {
    const Sample& s = train.samples[i];
    if (s.modality == Modality::rgb) {
      rgb_of_[s.id].push_back(i);
      all_rgb_.push_back(i);
    } else {
      ir_of_[s.id].push_back(i);
      all_ir_.push_back(i);
    }
  }
  std::set<int> id_set;
  for (const Sample& s : train.samples) id_set.insert(s.id);
  ids_.assign(id_set.begin(), id_set.end());
  require(ids_.size() >= 2, "TupleSampler: need >= 2 identities");
  for (int id : ids_) {
    if (rgb_of_[id].size() < 2 || ir_of_[id].size() < 2) {
      throw ValidationError("TupleSampler: identity " + std::to_string(id) +
                            " has < 2 samples in a modality");
    }
  }
  for (int id : ids_) {
    tuples_per_epoch_ += static_cast<long>(
        std::max(rgb_of_[id].size(), ir_of_[id].size()));
  }
}

void TupleSampler::build_epoch(long epoch) const {
  if (cached_epoch_ == epoch) return;
  Rng rng = substream(seed_, "epoch", static_cast<std::uint64_t>(epoch));
  epoch_pairs_.clear();
  epoch_pairs_.reserve(tuples_per_epoch_);
  for (int id : ids_) {
    std::vector<int> rgb = rgb_of_.at(id);
    std::vector<int> ir = ir_of_.at(id);
    rng.shuffle(rgb);
    rng.shuffle(ir);
    // Pair up to the larger count, cycling the smaller side, so every
    // sample of both modalities anchors at least once per epoch.
    std::size_t n = std::max(rgb.size(), ir.size());
    for (std::size_t j = 0; j < n; ++j) {
      epoch_pairs_.emplace_back(rgb[j % rgb.size()], ir[j % ir.size()]);
    }
  }
  rng.shuffle(epoch_pairs_);
  cached_epoch_ = epoch;
}

TupleIndices TupleSampler::tuple_at(long g) const {
  long epoch = g / tuples_per_epoch_;
  long offset = g % tuples_per_epoch_;
  build_epoch(epoch);
  auto [a_rgb, a_ir] = epoch_pairs_[offset];
  int id = data_->samples[a_rgb].id;

  Rng rng = substream(seed_, "tuple", static_cast<std::uint64_t>(g));

  // Positive from the other modality, excluding the paired anchor sample.
  auto pick_excluding = [&rng](const std::vector<int>& pool, int excluded) {
    std::size_t slot = rng.next_below(pool.size() - 1);
    std::size_t excl_pos = static_cast<std::size_t>(
        std::find(pool.begin(), pool.end(), excluded) - pool.begin());
    return pool[slot >= excl_pos ? slot + 1 : slot];
  };
  auto pick_negative = [&](const std::vector<int>& pool) {
    for (;;) {
      int idx = pool[rng.next_below(pool.size())];
      if (data_->samples[idx].id != id) return idx;
    }
  };

  TupleIndices t;
  t.anchor_rgb = a_rgb;
  t.anchor_ir = a_ir;
  t.pos_ir = pick_excluding(ir_of_.at(id), a_ir);
  t.neg_ir = pick_negative(all_ir_);
  t.pos_rgb = pick_excluding(rgb_of_.at(id), a_rgb);
  t.neg_rgb = pick_negative(all_rgb_);
  return t;
}

std::vector<TupleIndices> TupleSampler::next_batch(int n) {
  require(n >= 1, "TupleSampler: batch size must be >= 1");
  std::vector<TupleIndices> batch;
  batch.reserve(n);
  for (int i = 0; i < n; ++i) batch.push_back(tuple_at(cursor_++));
  return batch;
}

}  // namespace xreid
