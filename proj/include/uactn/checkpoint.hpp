#ifndef UACTN_CHECKPOINT_HPP
#define UACTN_CHECKPOINT_HPP

// Text checkpoints.
//
//   uactn-checkpoint 1
//   kind <sketch|shape>
//   config
//   <TrainConfig key=value lines>
//   end-config
//   param <name> <rows> <cols>
//   <one line per row, values separated by single spaces>
//   ...
//   end
//
// Values are written with 17 significant digits, so load(save(m)) is
// bitwise identical. Parameter names are <block>.<layer>.<weight|bias>
// plus `classifier.weight` in sketch checkpoints.

#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "uactn/config.hpp"
#include "uactn/losses.hpp"
#include "uactn/model.hpp"
#include "uactn/text_io.hpp"

namespace uactn {

inline constexpr const char* kCheckpointMagic = "uactn-checkpoint 1";

enum class CheckpointKind { sketch, shape };

struct SketchCheckpoint {
  TrainConfig config;
  SketchModel model;
  Classifier classifier;
};

struct ShapeCheckpoint {
  TrainConfig config;
  ShapeEncoder encoder;
};

namespace detail {

inline void write_param(std::ostream& out, const std::string& name, const Matrix& m) {
  out << "param " << name << ' ' << m.rows() << ' ' << m.cols() << '\n';
  for (std::size_t r = 0; r < m.rows(); ++r) {
    auto row = m.row(r);
    for (std::size_t c = 0; c < row.size(); ++c) {
      if (c) out << ' ';
      out << format_double(row[c]);
    }
    out << '\n';
  }
}

inline void write_mlp(std::ostream& out, const std::string& prefix, const Mlp& m) {
  for (std::size_t l = 0; l < m.layers.size(); ++l) {
    write_param(out, prefix + "." + std::to_string(l) + ".weight", m.layers[l].weight);
    write_param(out, prefix + "." + std::to_string(l) + ".bias", m.layers[l].bias);
  }
}

inline void write_header(std::ostream& out, const char* kind, const TrainConfig& cfg) {
  out << kCheckpointMagic << '\n' << "kind " << kind << '\n' << "config\n";
  write_config(out, cfg);
  out << "end-config\n";
}

struct RawCheckpoint {
  std::string kind;
  TrainConfig config;
  std::map<std::string, Matrix, std::less<>> params;
};

inline RawCheckpoint read_raw(std::istream& in, const std::string& where) {
  RawCheckpoint raw;
  std::string line;
  std::size_t lineno = 0;
  auto next = [&]() -> bool {
    if (!std::getline(in, line)) return false;
    ++lineno;
    return true;
  };
  if (!next() || trim(line) != kCheckpointMagic) {
    throw ParseError(where, 1, "not a checkpoint (expected '" + std::string(kCheckpointMagic) + "')");
  }
  if (!next() || trim(line).substr(0, 5) != "kind ") throw ParseError(where, lineno, "expected 'kind'");
  raw.kind = std::string(trim(trim(line).substr(5)));
  if (!next() || trim(line) != "config") throw ParseError(where, lineno, "expected 'config'");
  std::stringstream cfg_text;
  while (true) {
    if (!next()) throw ParseError(where, lineno, "unterminated config block");
    if (trim(line) == "end-config") break;
    cfg_text << line << '\n';
  }
  try {
    raw.config = apply_config(TrainConfig{}, parse_key_values(cfg_text, where));
  } catch (const ParseError& e) {
    throw ParseError(where + ": " + e.what());
  }
  while (true) {
    if (!next()) throw ParseError(where, lineno, "missing 'end'");
    const auto t = trim(line);
    if (t == "end") break;
    const auto f = split(t, ' ');
    std::uint64_t rows = 0, cols = 0;
    if (f.size() != 4 || f[0] != "param" || !parse_u64(f[2], rows) || !parse_u64(f[3], cols)) {
      throw ParseError(where, lineno, "expected 'param <name> <rows> <cols>'");
    }
    const std::string name(f[1]);  // `f` views `line`, which the rows overwrite
    Matrix m(static_cast<std::size_t>(rows), static_cast<std::size_t>(cols));
    for (std::size_t r = 0; r < m.rows(); ++r) {
      if (!next()) throw ParseError(where, lineno, "truncated parameter " + name);
      const auto vals = split(trim(line), ' ');
      if (vals.size() != m.cols()) {
        throw ParseError(where, lineno, "expected " + std::to_string(m.cols()) + " values");
      }
      for (std::size_t c = 0; c < m.cols(); ++c) {
        if (!parse_double(vals[c], m(r, c))) throw ParseError(where, lineno, "bad value");
      }
    }
    if (!raw.params.emplace(name, std::move(m)).second) {
      throw ParseError(where, lineno, "duplicate parameter " + name);
    }
  }
  return raw;
}

inline Matrix take(RawCheckpoint& raw, const std::string& name, const std::string& where) {
  auto it = raw.params.find(name);
  if (it == raw.params.end()) throw ParseError(where + ": missing parameter " + name);
  Matrix m = std::move(it->second);
  raw.params.erase(it);
  return m;
}

inline Mlp take_mlp(RawCheckpoint& raw, const std::string& prefix, const std::string& where) {
  Mlp m;
  for (std::size_t l = 0; raw.params.count(prefix + "." + std::to_string(l) + ".weight"); ++l) {
    const std::string base = prefix + "." + std::to_string(l);
    Linear layer{take(raw, base + ".weight", where), take(raw, base + ".bias", where)};
    if (layer.bias.rows() != 1 || layer.bias.cols() != layer.weight.rows()) {
      throw ParseError(where + ": bias shape of " + base + " does not match its weight");
    }
    if (!m.layers.empty() && m.layers.back().out_dim() != layer.in_dim()) {
      throw ParseError(where + ": layer " + base + " does not chain with the previous layer");
    }
    m.layers.push_back(std::move(layer));
  }
  if (m.layers.empty()) throw ParseError(where + ": no layers for " + prefix);
  return m;
}

inline void require_consumed(const RawCheckpoint& raw, const std::string& where) {
  if (!raw.params.empty()) {
    throw ParseError(where + ": unexpected parameter " + raw.params.begin()->first);
  }
}

}  // namespace detail

inline void write_checkpoint(std::ostream& out, const SketchCheckpoint& c) {
  detail::write_header(out, "sketch", c.config);
  detail::write_mlp(out, "backbone", c.model.backbone);
  detail::write_mlp(out, "head.mu", c.model.head.mu);
  detail::write_mlp(out, "head.logvar", c.model.head.logvar);
  detail::write_param(out, "classifier.weight", c.classifier.weight);
  out << "end\n";
}

inline void write_checkpoint(std::ostream& out, const ShapeCheckpoint& c) {
  detail::write_header(out, "shape", c.config);
  detail::write_mlp(out, "view_backbone", c.encoder.view_backbone);
  detail::write_mlp(out, "proj", c.encoder.proj);
  out << "end\n";
}

template <class Checkpoint>
void save_checkpoint(const std::string& path, const Checkpoint& c) {
  auto out = open_for_write(path);
  write_checkpoint(out, c);
}

inline CheckpointKind peek_checkpoint_kind(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);
  std::string line;
  if (!std::getline(in, line) || trim(line) != kCheckpointMagic) {
    throw ParseError(path, 1, "not a checkpoint");
  }
  if (!std::getline(in, line)) throw ParseError(path, 2, "expected 'kind'");
  const auto t = trim(line);
  if (t == "kind sketch") return CheckpointKind::sketch;
  if (t == "kind shape") return CheckpointKind::shape;
  throw ParseError(path, 2, "unknown checkpoint kind");
}

inline SketchCheckpoint read_sketch_checkpoint(std::istream& in, const std::string& where) {
  auto raw = detail::read_raw(in, where);
  if (raw.kind != "sketch") throw ParseError(where + ": expected a sketch checkpoint, got " + raw.kind);
  SketchCheckpoint c;
  c.config = raw.config;
  c.model.backbone = detail::take_mlp(raw, "backbone", where);
  c.model.head.mu = detail::take_mlp(raw, "head.mu", where);
  c.model.head.logvar = detail::take_mlp(raw, "head.logvar", where);
  c.classifier.weight = detail::take(raw, "classifier.weight", where);
  c.classifier.frozen = true;
  detail::require_consumed(raw, where);
  if (c.classifier.dim() != c.model.embed_dim() || c.model.head.logvar.out_dim() != c.model.embed_dim()) {
    throw ParseError(where + ": head and classifier dimensions disagree");
  }
  return c;
}

inline ShapeCheckpoint read_shape_checkpoint(std::istream& in, const std::string& where) {
  auto raw = detail::read_raw(in, where);
  if (raw.kind != "shape") throw ParseError(where + ": expected a shape checkpoint, got " + raw.kind);
  ShapeCheckpoint c;
  c.config = raw.config;
  c.encoder.view_backbone = detail::take_mlp(raw, "view_backbone", where);
  c.encoder.proj = detail::take_mlp(raw, "proj", where);
  detail::require_consumed(raw, where);
  return c;
}

inline SketchCheckpoint load_sketch_checkpoint(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);
  return read_sketch_checkpoint(in, path);
}

inline ShapeCheckpoint load_shape_checkpoint(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);
  return read_shape_checkpoint(in, path);
}

}  // namespace uactn

#endif  // UACTN_CHECKPOINT_HPP
