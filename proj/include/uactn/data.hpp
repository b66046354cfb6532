#ifndef UACTN_DATA_HPP
#define UACTN_DATA_HPP

// Synthetic sketch / multi-view shape datasets with controllable sketch
// noise, and the text formats used to store them (manifest, feature CSV,
// noisy-flag CSV). Embedding files reuse the feature CSV with views=1.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "uactn/numeric.hpp"
#include "uactn/rng.hpp"
#include "uactn/text_io.hpp"

namespace uactn {

enum class Split { train, test };
enum class Modality { sketch, shape };
enum class NoiseMode { ambiguous, label };

inline const char* to_string(Split s) { return s == Split::train ? "train" : "test"; }
inline const char* to_string(Modality m) { return m == Modality::sketch ? "sketch" : "shape"; }
inline const char* to_string(NoiseMode m) { return m == NoiseMode::ambiguous ? "ambiguous" : "label"; }

inline NoiseMode parse_noise_mode(std::string_view s) {
  if (s == "ambiguous") return NoiseMode::ambiguous;
  if (s == "label") return NoiseMode::label;
  throw std::invalid_argument("unknown noise mode '" + std::string(s) +
                              "' (expected ambiguous or label)");
}

struct SampleRecord {
  std::string id;
  std::size_t label = 0;
  Split split = Split::train;
  Modality modality = Modality::sketch;
  Matrix payload;      // 1×dim for a sketch or embedding, V×dim for a shape
  bool noisy = false;  // synthetic ground truth; stored in a separate file

  bool operator==(const SampleRecord&) const = default;
};

struct Manifest {
  std::size_t classes = 10;
  std::size_t dim = 16;
  std::size_t views = 12;
  std::size_t sketch_train = 50;  // per class
  std::size_t sketch_test = 30;   // per class
  std::size_t shape_train = 10;   // per class
  std::size_t shape_test = 4;     // per class
  double noise_frac = 0.0;
  NoiseMode noise_mode = NoiseMode::ambiguous;
  std::uint64_t seed = 0;

  bool operator==(const Manifest&) const = default;
};

struct Dataset {
  Manifest manifest;
  std::vector<SampleRecord> sketches;
  std::vector<SampleRecord> shapes;

  bool operator==(const Dataset&) const = default;
};

/// Records of `recs` in the given split, in file order.
inline std::vector<const SampleRecord*> select(const std::vector<SampleRecord>& recs,
                                               Split split) {
  std::vector<const SampleRecord*> out;
  for (const auto& r : recs)
    if (r.split == split) out.push_back(&r);
  return out;
}

// ---------------------------------------------------------------------------
// Generation

inline constexpr double kCleanNoiseStd = 0.1;
inline constexpr double kAmbiguousNoiseStd = 0.3;
inline constexpr double kMaxPrototypeCosine = 0.5;

namespace detail {

inline Matrix random_unit_row(std::size_t dim, Rng& rng) {
  Matrix v = rng.normal_matrix(1, dim);
  return l2_normalize_rows(v);
}

inline Matrix jitter(const Matrix& base, double std_dev, Rng& rng) {
  Matrix out = base;
  for (double& v : out.values()) v += std_dev * rng.normal();
  return out;
}

}  // namespace detail

/// Class prototypes: random unit vectors, rejection-sampled to pairwise
/// cosine below 0.5.
inline Matrix generate_prototypes(std::size_t classes, std::size_t dim, Rng& rng,
                                  std::size_t max_attempts = 10000) {
  Matrix protos(classes, dim);
  for (std::size_t c = 0; c < classes; ++c) {
    bool placed = false;
    for (std::size_t attempt = 0; attempt < max_attempts && !placed; ++attempt) {
      Matrix cand = detail::random_unit_row(dim, rng);
      placed = true;
      for (std::size_t k = 0; k < c && placed; ++k) {
        placed = dot(cand.row(0), protos.row(k)) < kMaxPrototypeCosine;
      }
      if (placed) std::copy(cand.row(0).begin(), cand.row(0).end(), protos.row(c).begin());
    }
    if (!placed) {
      throw std::runtime_error("generate: cannot place " + std::to_string(classes) +
                               " prototypes with pairwise cosine < 0.5 in dim " +
                               std::to_string(dim) + "; use a larger dim");
    }
  }
  return protos;
}

/// Number of noisy sketches among `n` of one class and split.
inline std::size_t noisy_count(std::size_t n, double noise_frac) {
  return std::min(n, static_cast<std::size_t>(std::ceil(noise_frac * static_cast<double>(n) - 1e-9)));
}

/// Draw order: prototypes; then sketches split by split (train, test),
/// class by class; then shapes in the same order. Within a class/split the
/// noisy subset is chosen by a shuffle before the features are drawn.
inline Dataset generate(const Manifest& m, Rng& rng) {
  if (m.classes < 2) throw std::invalid_argument("generate: need at least 2 classes");
  if (m.dim == 0 || m.views == 0) throw std::invalid_argument("generate: dim and views must be positive");
  if (!(m.noise_frac >= 0.0 && m.noise_frac <= 1.0))
    throw std::invalid_argument("generate: noise_frac must be in [0, 1]");

  Dataset ds;
  ds.manifest = m;
  const Matrix protos = generate_prototypes(m.classes, m.dim, rng);
  auto proto = [&](std::size_t c) { return Matrix::row_vector(protos.row(c)); };
  auto other_class = [&](std::size_t c) {
    std::size_t o = rng.index(m.classes - 1);
    return o >= c ? o + 1 : o;
  };

  char idbuf[32];
  std::size_t next_id = 0;
  for (Split sp : {Split::train, Split::test}) {
    const std::size_t n = sp == Split::train ? m.sketch_train : m.sketch_test;
    for (std::size_t c = 0; c < m.classes; ++c) {
      std::vector<char> noisy(n, 0);
      std::fill_n(noisy.begin(), noisy_count(n, m.noise_frac), 1);
      rng.shuffle(noisy);
      for (std::size_t k = 0; k < n; ++k) {
        SampleRecord r;
        std::snprintf(idbuf, sizeof idbuf, "sk%06zu", next_id++);
        r.id = idbuf;
        r.label = c;
        r.split = sp;
        r.modality = Modality::sketch;
        r.noisy = noisy[k] != 0;
        if (!r.noisy) {
          r.payload = detail::jitter(proto(c), kCleanNoiseStd, rng);
        } else if (m.noise_mode == NoiseMode::ambiguous) {
          const Matrix mid = scale(add(proto(c), proto(other_class(c))), 0.5);
          r.payload = detail::jitter(mid, kAmbiguousNoiseStd, rng);
        } else {
          r.payload = detail::jitter(proto(other_class(c)), kCleanNoiseStd, rng);
        }
        ds.sketches.push_back(std::move(r));
      }
    }
  }

  next_id = 0;
  for (Split sp : {Split::train, Split::test}) {
    const std::size_t n = sp == Split::train ? m.shape_train : m.shape_test;
    for (std::size_t c = 0; c < m.classes; ++c) {
      for (std::size_t k = 0; k < n; ++k) {
        SampleRecord r;
        std::snprintf(idbuf, sizeof idbuf, "sh%06zu", next_id++);
        r.id = idbuf;
        r.label = c;
        r.split = sp;
        r.modality = Modality::shape;
        r.payload = Matrix(m.views, m.dim);
        for (std::size_t v = 0; v < m.views; ++v) {
          for (std::size_t j = 0; j < m.dim; ++j) {
            r.payload(v, j) = protos(c, j) + kCleanNoiseStd * rng.normal();
          }
        }
        ds.shapes.push_back(std::move(r));
      }
    }
  }
  return ds;
}

// ---------------------------------------------------------------------------
// Feature CSV
//
//   id,label,split,modality,dim=<D>,views=<V>
//   <id>,<label>,<train|test>,<sketch|shape>,v0,...,v{V*D-1}
//
// Shape rows store their V views back to back. Values use 17 significant
// digits so a load returns the identical doubles.

struct FeatureTable {
  std::size_t dim = 0;
  std::size_t views = 1;
  std::vector<SampleRecord> records;
};

inline void write_features(std::ostream& out, std::size_t dim, std::size_t views,
                           const std::vector<SampleRecord>& recs) {
  out << "id,label,split,modality,dim=" << dim << ",views=" << views << '\n';
  for (const auto& r : recs) {
    if (r.payload.rows() != views || r.payload.cols() != dim) {
      throw std::invalid_argument("write_features: record " + r.id + " has payload " +
                                  r.payload.shape() + ", expected " + std::to_string(views) +
                                  "x" + std::to_string(dim));
    }
    out << r.id << ',' << r.label << ',' << to_string(r.split) << ',' << to_string(r.modality);
    for (double v : r.payload.values()) out << ',' << format_double(v);
    out << '\n';
  }
}

inline void save_features(const std::string& path, std::size_t dim, std::size_t views,
                          const std::vector<SampleRecord>& recs) {
  auto out = open_for_write(path);
  write_features(out, dim, views, recs);
}

namespace detail {

inline std::size_t header_number(std::string_view field, std::string_view key,
                                 const std::string& where) {
  field = trim(field);
  std::uint64_t n = 0;
  if (field.substr(0, key.size()) != key || !parse_u64(field.substr(key.size()), n) || n == 0) {
    throw ParseError(where, 1, "bad header field '" + std::string(field) + "', expected " +
                                   std::string(key) + "<positive integer>");
  }
  return static_cast<std::size_t>(n);
}

}  // namespace detail

inline FeatureTable read_features(std::istream& in, const std::string& where) {
  std::string line;
  if (!std::getline(in, line)) throw ParseError(where, 1, "missing header");
  const auto head = split(trim(line), ',');
  if (head.size() != 6 || trim(head[0]) != "id" || trim(head[1]) != "label" ||
      trim(head[2]) != "split" || trim(head[3]) != "modality") {
    throw ParseError(where, 1, "header must be id,label,split,modality,dim=<D>,views=<V>");
  }
  FeatureTable t;
  t.dim = detail::header_number(head[4], "dim=", where);
  t.views = detail::header_number(head[5], "views=", where);
  const std::size_t width = t.dim * t.views;

  std::set<std::string, std::less<>> seen;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    const auto text = trim(line);
    if (text.empty()) continue;
    const auto f = split(text, ',');
    if (f.size() != 4 + width) {
      throw ParseError(where, lineno, "expected " + std::to_string(width) + " values, found " +
                                          std::to_string(f.size() < 4 ? 0 : f.size() - 4));
    }
    SampleRecord r;
    r.id = std::string(trim(f[0]));
    if (r.id.empty()) throw ParseError(where, lineno, "empty id");
    if (!seen.insert(r.id).second) throw ParseError(where, lineno, "duplicate id '" + r.id + "'");
    std::uint64_t label = 0;
    if (!parse_u64(f[1], label)) throw ParseError(where, lineno, "bad label '" + std::string(f[1]) + "'");
    r.label = static_cast<std::size_t>(label);
    const auto sp = trim(f[2]);
    if (sp == "train") r.split = Split::train;
    else if (sp == "test") r.split = Split::test;
    else throw ParseError(where, lineno, "bad split '" + std::string(sp) + "'");
    const auto mod = trim(f[3]);
    if (mod == "sketch") r.modality = Modality::sketch;
    else if (mod == "shape") r.modality = Modality::shape;
    else throw ParseError(where, lineno, "bad modality '" + std::string(mod) + "'");
    r.payload = Matrix(t.views, t.dim);
    auto vals = r.payload.values();
    for (std::size_t k = 0; k < width; ++k) {
      if (!parse_double(f[4 + k], vals[k]) || !std::isfinite(vals[k])) {
        throw ParseError(where, lineno, "bad value '" + std::string(f[4 + k]) + "' in column " +
                                            std::to_string(5 + k));
      }
    }
    t.records.push_back(std::move(r));
  }
  return t;
}

inline FeatureTable load_features(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);
  return read_features(in, path);
}

// ---------------------------------------------------------------------------
// Noisy flags: id,noisy

inline void save_noisy_flags(const std::string& path, const std::vector<SampleRecord>& recs) {
  auto out = open_for_write(path);
  out << "id,noisy\n";
  for (const auto& r : recs) out << r.id << ',' << (r.noisy ? 1 : 0) << '\n';
}

inline std::map<std::string, bool, std::less<>> load_noisy_flags(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);
  std::string line;
  if (!std::getline(in, line) || trim(line) != "id,noisy") {
    throw ParseError(path, 1, "header must be id,noisy");
  }
  std::map<std::string, bool, std::less<>> flags;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    const auto text = trim(line);
    if (text.empty()) continue;
    const auto f = split(text, ',');
    if (f.size() != 2 || (trim(f[1]) != "0" && trim(f[1]) != "1")) {
      throw ParseError(path, lineno, "expected <id>,<0|1>");
    }
    if (!flags.emplace(std::string(trim(f[0])), trim(f[1]) == "1").second) {
      throw ParseError(path, lineno, "duplicate id");
    }
  }
  return flags;
}

// ---------------------------------------------------------------------------
// Manifest: key=value

inline void write_manifest(std::ostream& out, const Manifest& m) {
  out << "format=uactn-dataset-1\n"
      << "classes=" << m.classes << '\n'
      << "dim=" << m.dim << '\n'
      << "views=" << m.views << '\n'
      << "sketch_train=" << m.sketch_train << '\n'
      << "sketch_test=" << m.sketch_test << '\n'
      << "shape_train=" << m.shape_train << '\n'
      << "shape_test=" << m.shape_test << '\n'
      << "noise_frac=" << format_double(m.noise_frac) << '\n'
      << "noise_mode=" << to_string(m.noise_mode) << '\n'
      << "seed=" << m.seed << '\n';
}

inline Manifest parse_manifest(const KeyValues& kv, const std::string& where) {
  auto get = [&](const char* key) -> const std::string& {
    auto it = kv.find(key);
    if (it == kv.end()) throw ParseError(where + ": missing key '" + key + "'");
    return it->second;
  };
  auto size = [&](const char* key) {
    std::uint64_t v = 0;
    if (!parse_u64(get(key), v)) throw ParseError(where + ": bad integer for " + key);
    return static_cast<std::size_t>(v);
  };
  if (get("format") != "uactn-dataset-1") throw ParseError(where + ": unsupported format");
  Manifest m;
  m.classes = size("classes");
  m.dim = size("dim");
  m.views = size("views");
  m.sketch_train = size("sketch_train");
  m.sketch_test = size("sketch_test");
  m.shape_train = size("shape_train");
  m.shape_test = size("shape_test");
  if (!parse_double(get("noise_frac"), m.noise_frac)) throw ParseError(where + ": bad noise_frac");
  try {
    m.noise_mode = parse_noise_mode(get("noise_mode"));
  } catch (const std::invalid_argument& e) {
    throw ParseError(where + ": " + e.what());
  }
  std::uint64_t seed = 0;
  if (!parse_u64(get("seed"), seed)) throw ParseError(where + ": bad seed");
  m.seed = seed;
  return m;
}

/// Directory layout: manifest.txt, sketches.csv, shapes.csv, noisy.csv.
struct DatasetPaths {
  std::filesystem::path dir;
  std::string manifest() const { return (dir / "manifest.txt").string(); }
  std::string sketches() const { return (dir / "sketches.csv").string(); }
  std::string shapes() const { return (dir / "shapes.csv").string(); }
  std::string noisy() const { return (dir / "noisy.csv").string(); }
};

inline void save_dataset(const Dataset& ds, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  const DatasetPaths p{dir};
  {
    auto out = open_for_write(p.manifest());
    write_manifest(out, ds.manifest);
  }
  save_features(p.sketches(), ds.manifest.dim, 1, ds.sketches);
  save_features(p.shapes(), ds.manifest.dim, ds.manifest.views, ds.shapes);
  save_noisy_flags(p.noisy(), ds.sketches);
}

/// Loads a dataset directory and checks the files agree with the manifest.
/// Noisy flags are attached only when `with_noisy_flags` is set.
inline Dataset load_dataset(const std::filesystem::path& dir, bool with_noisy_flags = false) {
  const DatasetPaths p{dir};
  Dataset ds;
  ds.manifest = parse_manifest(read_key_values(p.manifest()), p.manifest());
  const Manifest& m = ds.manifest;
  FeatureTable sk = load_features(p.sketches());
  FeatureTable sh = load_features(p.shapes());
  if (sk.dim != m.dim || sk.views != 1) {
    throw ParseError(p.sketches() + ": header dim/views disagree with manifest");
  }
  if (sh.dim != m.dim || sh.views != m.views) {
    throw ParseError(p.shapes() + ": header dim/views disagree with manifest");
  }
  auto check = [&](const FeatureTable& t, Modality mod, std::size_t n_train,
                   std::size_t n_test, const std::string& where) {
    std::size_t train = 0, test = 0;
    for (const auto& r : t.records) {
      if (r.modality != mod) throw ParseError(where + ": record " + r.id + " has wrong modality");
      if (r.label >= m.classes) throw ParseError(where + ": record " + r.id + " label out of range");
      (r.split == Split::train ? train : test)++;
    }
    if (train != n_train * m.classes || test != n_test * m.classes) {
      throw ParseError(where + ": split counts disagree with manifest");
    }
  };
  check(sk, Modality::sketch, m.sketch_train, m.sketch_test, p.sketches());
  check(sh, Modality::shape, m.shape_train, m.shape_test, p.shapes());
  ds.sketches = std::move(sk.records);
  ds.shapes = std::move(sh.records);
  if (with_noisy_flags) {
    const auto flags = load_noisy_flags(p.noisy());
    for (auto& r : ds.sketches) {
      auto it = flags.find(r.id);
      if (it == flags.end()) throw ParseError(p.noisy() + ": no flag for " + r.id);
      r.noisy = it->second;
    }
  }
  return ds;
}

}  // namespace uactn

#endif  // UACTN_DATA_HPP
