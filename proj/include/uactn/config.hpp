#ifndef UACTN_CONFIG_HPP
#define UACTN_CONFIG_HPP

#include <cstdint>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "uactn/text_io.hpp"

namespace uactn {

/// Every hyperparameter of both training stages. Defaults are the
/// full-scale published settings except the desk-scale dimensions.
struct TrainConfig {
  std::size_t input_dim = 16;   // sketch feature width
  std::size_t view_dim = 16;    // per-view shape feature width
  std::size_t embed_dim = 32;
  std::vector<std::size_t> hidden = {64, 64};
  std::vector<std::size_t> head_hidden = {};
  std::size_t classes = 10;
  std::size_t views = 12;

  std::size_t batch_size = 64;
  double lr0 = 4e-4;
  std::size_t max_epochs = 200;
  double momentum = 0.0;

  double s_sketch = 30.0;
  double m_s = 0.5;
  double s_shape = 15.0;
  double m_v = 0.8;
  double lambda = 0.005;

  std::uint64_t seed = 0;

  bool operator==(const TrainConfig&) const = default;

  void validate() const {
    auto positive = [](std::size_t v, const char* name) {
      if (v == 0) throw std::invalid_argument(std::string("config: ") + name + " must be positive");
    };
    positive(input_dim, "input_dim");
    positive(view_dim, "view_dim");
    positive(embed_dim, "embed_dim");
    positive(views, "views");
    positive(batch_size, "batch_size");
    positive(max_epochs, "max_epochs");
    for (auto h : hidden) positive(h, "hidden");
    for (auto h : head_hidden) positive(h, "head_hidden");
    if (classes < 2) throw std::invalid_argument("config: classes must be >= 2");
    if (!(lr0 >= 0.0)) throw std::invalid_argument("config: lr0 must be >= 0");
    if (!(momentum >= 0.0 && momentum < 1.0))
      throw std::invalid_argument("config: momentum must lie in [0, 1)");
    if (!(s_sketch > 0.0) || !(s_shape > 0.0))
      throw std::invalid_argument("config: scales must be > 0");
    if (!(m_s >= 0.0 && m_s < 1.0) || !(m_v >= 0.0 && m_v < 1.0))
      throw std::invalid_argument("config: margins must lie in [0, 1)");
    if (!(lambda >= 0.0)) throw std::invalid_argument("config: lambda must be >= 0");
  }
};

namespace detail {

inline std::string join_dims(const std::vector<std::size_t>& dims) {
  std::string s;
  for (std::size_t i = 0; i < dims.size(); ++i) {
    if (i) s += ',';
    s += std::to_string(dims[i]);
  }
  return s;
}

inline std::vector<std::size_t> parse_dims(const std::string& key,
                                           std::string_view v) {
  std::vector<std::size_t> dims;
  if (trim(v).empty()) return dims;
  for (auto part : split(v, ',')) {
    std::uint64_t d = 0;
    if (!parse_u64(part, d)) {
      throw ParseError("config: bad value for " + key + ": '" + std::string(v) + "'");
    }
    dims.push_back(static_cast<std::size_t>(d));
  }
  return dims;
}

}  // namespace detail

/// Applies recognised keys on top of `base`. Unknown keys are rejected.
inline TrainConfig apply_config(TrainConfig cfg, const KeyValues& kv) {
  for (const auto& [key, value] : kv) {
    auto as_size = [&]() {
      std::uint64_t v = 0;
      if (!parse_u64(value, v)) throw ParseError("config: bad integer for " + key + ": '" + value + "'");
      return static_cast<std::size_t>(v);
    };
    auto as_double = [&]() {
      double v = 0;
      if (!parse_double(value, v)) throw ParseError("config: bad number for " + key + ": '" + value + "'");
      return v;
    };
    if (key == "input_dim") cfg.input_dim = as_size();
    else if (key == "view_dim") cfg.view_dim = as_size();
    else if (key == "embed_dim") cfg.embed_dim = as_size();
    else if (key == "hidden") cfg.hidden = detail::parse_dims(key, value);
    else if (key == "head_hidden") cfg.head_hidden = detail::parse_dims(key, value);
    else if (key == "classes") cfg.classes = as_size();
    else if (key == "views") cfg.views = as_size();
    else if (key == "batch_size") cfg.batch_size = as_size();
    else if (key == "lr0") cfg.lr0 = as_double();
    else if (key == "max_epochs") cfg.max_epochs = as_size();
    else if (key == "momentum") cfg.momentum = as_double();
    else if (key == "s_sketch") cfg.s_sketch = as_double();
    else if (key == "m_s") cfg.m_s = as_double();
    else if (key == "s_shape") cfg.s_shape = as_double();
    else if (key == "m_v") cfg.m_v = as_double();
    else if (key == "lambda") cfg.lambda = as_double();
    else if (key == "seed") {
      std::uint64_t v = 0;
      if (!parse_u64(value, v)) throw ParseError("config: bad seed '" + value + "'");
      cfg.seed = v;
    } else {
      throw ParseError("config: unknown key '" + key + "'");
    }
  }
  return cfg;
}

inline TrainConfig load_config(const std::string& path, TrainConfig base = {}) {
  return apply_config(std::move(base), read_key_values(path));
}

inline void write_config(std::ostream& out, const TrainConfig& c) {
  out << "input_dim=" << c.input_dim << '\n'
      << "view_dim=" << c.view_dim << '\n'
      << "embed_dim=" << c.embed_dim << '\n'
      << "hidden=" << detail::join_dims(c.hidden) << '\n'
      << "head_hidden=" << detail::join_dims(c.head_hidden) << '\n'
      << "classes=" << c.classes << '\n'
      << "views=" << c.views << '\n'
      << "batch_size=" << c.batch_size << '\n'
      << "lr0=" << format_double(c.lr0) << '\n'
      << "max_epochs=" << c.max_epochs << '\n'
      << "momentum=" << format_double(c.momentum) << '\n'
      << "s_sketch=" << format_double(c.s_sketch) << '\n'
      << "m_s=" << format_double(c.m_s) << '\n'
      << "s_shape=" << format_double(c.s_shape) << '\n'
      << "m_v=" << format_double(c.m_v) << '\n'
      << "lambda=" << format_double(c.lambda) << '\n'
      << "seed=" << c.seed << '\n';
}

inline std::string to_string(const TrainConfig& c) {
  std::ostringstream os;
  write_config(os, c);
  return os.str();
}

}  // namespace uactn

#endif  // UACTN_CONFIG_HPP
