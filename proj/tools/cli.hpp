#ifndef UACTN_TOOLS_CLI_HPP
#define UACTN_TOOLS_CLI_HPP

// The `uactn` command line. run() is separate from main() so tests can
// drive commands in-process.
//
// Exit codes: 0 success, 1 usage error, 2 runtime or data error.

#include <CLI11.hpp>

#include <chrono>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "uactn/uactn.hpp"

namespace uactn::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 1;
inline constexpr int kExitRuntime = 2;

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Training flags layered over a base config: base, then --config, then
/// the individual overrides. Dimensions always come from the dataset.
struct TrainFlags {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> epochs;
  std::optional<std::size_t> batch_size;
  std::optional<double> lr;
  std::optional<double> momentum;
  std::optional<double> lambda;

  void add_to(CLI::App& cmd) {
    cmd.add_option("--config", config, "key=value file of TrainConfig fields")
        ->check(CLI::ExistingFile);
    cmd.add_option("--seed", seed, "Rng seed (overrides the config)");
    cmd.add_option("--epochs", epochs, "max_epochs override");
    cmd.add_option("--batch-size", batch_size, "batch_size override");
    cmd.add_option("--lr", lr, "lr0 override");
    cmd.add_option("--momentum", momentum, "momentum override");
    cmd.add_option("--lambda", lambda, "KL weight override");
  }

  TrainConfig resolve(TrainConfig base, const Manifest& m) const {
    if (!config.empty()) base = load_config(config, base);
    if (seed) base.seed = *seed;
    if (epochs) base.max_epochs = *epochs;
    if (batch_size) base.batch_size = *batch_size;
    if (lr) base.lr0 = *lr;
    if (momentum) base.momentum = *momentum;
    if (lambda) base.lambda = *lambda;
    base.input_dim = m.dim;
    base.view_dim = m.dim;
    base.classes = m.classes;
    base.views = m.views;
    base.validate();
    return base;
  }
};

inline void print_config(std::ostream& out, const TrainConfig& cfg) {
  out << "# config\n" << to_string(cfg);
}

inline void print_epochs(std::ostream& out, const TrainReport& r) {
  for (const auto& e : r.epochs) {
    out << "epoch " << e.epoch << " loss " << format_double(e.loss) << " lr "
        << format_double(e.lr) << '\n';
  }
}

inline void save_report(const std::string& path, const TrainReport& r) {
  auto f = open_for_write(path);
  write_report(f, r);
}

inline std::optional<Split> parse_split(const std::string& s) {
  if (s == "train") return Split::train;
  if (s == "test") return Split::test;
  if (s == "all") return std::nullopt;
  throw UsageError("--split must be train, test or all, got '" + s + "'");
}

inline std::vector<const SampleRecord*> select_split(const std::vector<SampleRecord>& recs,
                                                     const std::optional<Split>& split) {
  if (split) return select(recs, *split);
  std::vector<const SampleRecord*> out;
  for (const auto& r : recs) out.push_back(&r);
  return out;
}

inline std::vector<SampleRecord> embedding_records(const std::vector<const SampleRecord*>& src,
                                                   const Matrix& emb) {
  std::vector<SampleRecord> out;
  out.reserve(src.size());
  for (std::size_t i = 0; i < src.size(); ++i) {
    SampleRecord r;
    r.id = src[i]->id;
    r.label = src[i]->label;
    r.split = src[i]->split;
    r.modality = src[i]->modality;
    r.payload = Matrix(1, emb.cols());
    std::copy(emb.row(i).begin(), emb.row(i).end(), r.payload.row(0).begin());
    out.push_back(std::move(r));
  }
  return out;
}

/// Embedding CSV rows as one matrix plus labels and ids.
struct EmbeddingSet {
  Matrix values;
  std::vector<std::size_t> labels;
  std::vector<std::string> ids;
};

inline EmbeddingSet load_embeddings(const std::string& path) {
  FeatureTable t = load_features(path);
  if (t.views != 1) throw ParseError(path + ": embedding files must have views=1");
  if (t.records.empty()) throw ParseError(path + ": no rows");
  EmbeddingSet e{Matrix(t.records.size(), t.dim), {}, {}};
  for (std::size_t i = 0; i < t.records.size(); ++i) {
    const auto& r = t.records[i];
    std::copy(r.payload.row(0).begin(), r.payload.row(0).end(), e.values.row(i).begin());
    e.labels.push_back(r.label);
    e.ids.push_back(r.id);
  }
  return e;
}

// ---------------------------------------------------------------------------
// Commands

struct GenDataArgs {
  std::string out;
  Manifest m;
  std::string noise_mode = "ambiguous";
};

inline int gen_data(const GenDataArgs& a, std::ostream& out) {
  Manifest m = a.m;
  m.noise_mode = parse_noise_mode(a.noise_mode);
  if (!(m.noise_frac >= 0.0 && m.noise_frac <= 1.0)) {
    throw UsageError("--noise-frac must lie in [0, 1]");
  }
  out << "# manifest\n";
  write_manifest(out, m);
  Rng rng(m.seed);
  const Dataset ds = generate(m, rng);
  save_dataset(ds, a.out);
  out << "wrote " << ds.sketches.size() << " sketches and " << ds.shapes.size()
      << " shapes to " << a.out << '\n';
  return kExitOk;
}

struct TrainSketchArgs {
  std::string data;
  std::string out;
  std::string report;
  TrainFlags flags;
};

inline int train_sketch(const TrainSketchArgs& a, std::ostream& out, std::ostream& err) {
  const Dataset ds = load_dataset(a.data);
  const TrainConfig cfg = a.flags.resolve(TrainConfig{}, ds.manifest);
  print_config(out, cfg);
  const auto t0 = std::chrono::steady_clock::now();
  Rng rng(cfg.seed);
  Stage1Result r = train_stage1(select(ds.sketches, Split::train), cfg, rng);
  print_epochs(out, r.report);
  save_checkpoint(a.out, SketchCheckpoint{cfg, r.model, r.classifier});
  save_report(a.report.empty() ? a.out + ".report" : a.report, r.report);
  err << "train-sketch: "
      << std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count() << " s\n";
  return kExitOk;
}

struct TrainShapeArgs {
  std::string data;
  std::string checkpoint;
  std::string out;
  std::string report;
  TrainFlags flags;
};

inline int train_shape(const TrainShapeArgs& a, std::ostream& out, std::ostream& err) {
  const SketchCheckpoint sketch = load_sketch_checkpoint(a.checkpoint);
  const Dataset ds = load_dataset(a.data);
  const TrainConfig cfg = a.flags.resolve(sketch.config, ds.manifest);
  if (cfg.embed_dim != sketch.classifier.dim() || cfg.classes != sketch.classifier.classes()) {
    throw std::invalid_argument("train-shape: config embed_dim/classes (" +
                                std::to_string(cfg.embed_dim) + "/" + std::to_string(cfg.classes) +
                                ") disagree with the class centres " +
                                sketch.classifier.weight.shape());
  }
  print_config(out, cfg);
  const auto t0 = std::chrono::steady_clock::now();
  Rng rng(cfg.seed);
  Stage2Result r = train_stage2(select(ds.shapes, Split::train), sketch.classifier, cfg, rng);
  print_epochs(out, r.report);
  save_checkpoint(a.out, ShapeCheckpoint{cfg, r.encoder});
  save_report(a.report.empty() ? a.out + ".report" : a.report, r.report);
  err << "train-shape: "
      << std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count() << " s\n";
  return kExitOk;
}

struct EmbedArgs {
  std::string data;
  std::string checkpoint;
  std::string out;
  std::string split = "test";
};

inline int embed(const EmbedArgs& a, std::ostream& out) {
  const auto split = parse_split(a.split);
  const CheckpointKind kind = peek_checkpoint_kind(a.checkpoint);
  const Dataset ds = load_dataset(a.data);
  if (kind == CheckpointKind::sketch) {
    const SketchCheckpoint c = load_sketch_checkpoint(a.checkpoint);
    print_config(out, c.config);
    if (c.model.in_dim() != ds.manifest.dim) {
      throw std::invalid_argument("embed: checkpoint expects width " +
                                  std::to_string(c.model.in_dim()) + ", dataset has " +
                                  std::to_string(ds.manifest.dim));
    }
    const auto recs = select_split(ds.sketches, split);
    const Matrix mu = encode_sketch(c.model, stack_sketches(recs)).mu;
    save_features(a.out, mu.cols(), 1, embedding_records(recs, mu));
    out << "embedded " << recs.size() << " sketches, D=" << mu.cols() << '\n';
  } else {
    const ShapeCheckpoint c = load_shape_checkpoint(a.checkpoint);
    print_config(out, c.config);
    if (c.encoder.in_dim() != ds.manifest.dim) {
      throw std::invalid_argument("embed: checkpoint expects view width " +
                                  std::to_string(c.encoder.in_dim()) + ", dataset has " +
                                  std::to_string(ds.manifest.dim));
    }
    const auto recs = select_split(ds.shapes, split);
    const Matrix f = embed_shapes(c.encoder, recs);
    save_features(a.out, f.cols(), 1, embedding_records(recs, f));
    out << "embedded " << recs.size() << " shapes, D=" << f.cols() << '\n';
  }
  return kExitOk;
}

struct EvalArgs {
  std::string queries;
  std::string gallery;
  std::string out;
};

/// Writes metrics.txt, per_query.csv and pr_curve.txt under --out.
inline int eval(const EvalArgs& a, std::ostream& out) {
  const EmbeddingSet q = load_embeddings(a.queries);
  const EmbeddingSet g = load_embeddings(a.gallery);
  if (q.values.cols() != g.values.cols()) {
    throw std::invalid_argument("eval: query dim " + std::to_string(q.values.cols()) +
                                " vs gallery dim " + std::to_string(g.values.cols()));
  }
  out << "queries=" << a.queries << '\n' << "gallery=" << a.gallery << '\n'
      << "seed=none\n";
  const MetricReport rep = evaluate(q.values, g.values, q.labels, g.labels);
  std::filesystem::create_directories(a.out);
  const std::filesystem::path dir(a.out);
  {
    auto f = open_for_write((dir / "metrics.txt").string());
    write_metrics(f, rep);
  }
  {
    auto f = open_for_write((dir / "per_query.csv").string());
    write_per_query(f, rep, q.ids);
  }
  {
    auto f = open_for_write((dir / "pr_curve.txt").string());
    write_pr_curve(f, rep.pr);
  }
  write_metrics(out, rep);
  return kExitOk;
}

struct UncertaintyArgs {
  std::string data;
  std::string checkpoint;
  std::string out;
  std::string split = "train";
  std::string noisy;
};

inline int report_uncertainty(const UncertaintyArgs& a, std::ostream& out) {
  const auto split = parse_split(a.split);
  const SketchCheckpoint c = load_sketch_checkpoint(a.checkpoint);
  print_config(out, c.config);
  const Dataset ds = load_dataset(a.data);
  const auto recs = select_split(ds.sketches, split);
  const std::vector<double> scores = uncertainty_scores(encode_sketch(c.model, stack_sketches(recs)));
  std::vector<std::string> ids;
  for (const auto* r : recs) ids.push_back(r->id);
  const auto report = normalize_and_bucket(scores, ids);
  {
    auto f = open_for_write(a.out);
    write_uncertainty_report(f, report);
  }
  const BucketSummary s = summarize_buckets(report);
  out << "low_percent=" << format_double(s.percent[0]) << '\n'
      << "mid_percent=" << format_double(s.percent[1]) << '\n'
      << "high_percent=" << format_double(s.percent[2]) << '\n';
  if (!a.noisy.empty()) {
    const auto flags = load_noisy_flags(a.noisy);
    std::vector<SampleRecord> flagged;
    for (const auto* r : recs) {
      auto it = flags.find(r->id);
      if (it == flags.end()) throw ParseError(a.noisy + ": no flag for " + r->id);
      flagged.push_back(SampleRecord{r->id, r->label, r->split, r->modality, Matrix(), it->second});
    }
    std::vector<const SampleRecord*> ptrs;
    for (const auto& r : flagged) ptrs.push_back(&r);
    const UncertaintySplit u = split_by_noise(scores, ptrs);
    out << "noisy_mean=" << format_double(u.noisy_mean) << '\n'
        << "clean_mean=" << format_double(u.clean_mean) << '\n'
        << "auc=" << format_double(u.auc) << '\n';
  }
  return kExitOk;
}

struct GradcheckArgs {
  std::uint64_t seed = 1;
  std::size_t trials = 20;
  GradcheckSizes sizes;
  double tolerance = 1e-4;
};

inline int gradcheck(const GradcheckArgs& a, std::ostream& out, std::ostream& err) {
  out << "seed=" << a.seed << " trials=" << a.trials << " batch=" << a.sizes.batch
      << " dim=" << a.sizes.dim << " classes=" << a.sizes.classes << '\n'
      << "# seed lmcl kl uncertainty transfer\n";
  double worst = 0.0;
  for (std::size_t t = 0; t < a.trials; ++t) {
    const std::uint64_t s = a.seed + t;
    const GradcheckReport r = run_gradchecks(s, a.sizes);
    out << s << ' ' << format_double(r.lmcl) << ' ' << format_double(r.kl) << ' '
        << format_double(r.uncertainty) << ' ' << format_double(r.transfer) << '\n';
    worst = std::max(worst, r.worst());
  }
  out << "worst=" << format_double(worst) << '\n';
  if (!(worst < a.tolerance)) {
    err << "gradcheck: max relative error " << worst << " >= " << a.tolerance << '\n';
    return kExitRuntime;
  }
  return kExitOk;
}

// ---------------------------------------------------------------------------

inline int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Uncertainty-aware cross-modal sketch/shape retrieval", "uactn"};
  app.require_subcommand(1);

  GenDataArgs gen;
  auto* c_gen = app.add_subcommand("gen-data", "Generate a synthetic two-modality dataset");
  c_gen->add_option("--out", gen.out, "Output directory")->required();
  c_gen->add_option("--seed", gen.m.seed, "Rng seed");
  c_gen->add_option("--classes", gen.m.classes, "Number of classes")->check(CLI::Range(2, 100000));
  c_gen->add_option("--dim", gen.m.dim, "Feature width")->check(CLI::PositiveNumber);
  c_gen->add_option("--views", gen.m.views, "Views per shape")->check(CLI::PositiveNumber);
  c_gen->add_option("--sketch-train", gen.m.sketch_train, "Training sketches per class");
  c_gen->add_option("--sketch-test", gen.m.sketch_test, "Test sketches per class");
  c_gen->add_option("--shape-train", gen.m.shape_train, "Training shapes per class");
  c_gen->add_option("--shape-test", gen.m.shape_test, "Test shapes per class");
  c_gen->add_option("--noise-frac", gen.m.noise_frac, "Fraction of noisy sketches per class");
  c_gen->add_option("--noise-mode", gen.noise_mode, "ambiguous or label")
      ->check(CLI::IsMember({"ambiguous", "label"}));

  TrainSketchArgs ts;
  auto* c_ts = app.add_subcommand("train-sketch", "Stage 1: sketch encoder and class centres");
  c_ts->add_option("--data", ts.data, "Dataset directory")->required()->check(CLI::ExistingDirectory);
  c_ts->add_option("--out", ts.out, "Checkpoint path")->required();
  c_ts->add_option("--report", ts.report, "Loss curve path (default <out>.report)");
  ts.flags.add_to(*c_ts);

  TrainShapeArgs tsh;
  auto* c_tsh = app.add_subcommand("train-shape", "Stage 2: shape encoder against frozen centres");
  c_tsh->add_option("--data", tsh.data, "Dataset directory")->required()->check(CLI::ExistingDirectory);
  c_tsh->add_option("--checkpoint", tsh.checkpoint, "Sketch checkpoint")->required()->check(CLI::ExistingFile);
  c_tsh->add_option("--out", tsh.out, "Checkpoint path")->required();
  c_tsh->add_option("--report", tsh.report, "Loss curve path (default <out>.report)");
  tsh.flags.add_to(*c_tsh);

  EmbedArgs em;
  auto* c_em = app.add_subcommand("embed", "Write μ (sketch checkpoint) or f (shape checkpoint) rows");
  c_em->add_option("--data", em.data, "Dataset directory")->required()->check(CLI::ExistingDirectory);
  c_em->add_option("--checkpoint", em.checkpoint, "Sketch or shape checkpoint")->required()->check(CLI::ExistingFile);
  c_em->add_option("--out", em.out, "Embedding CSV path")->required();
  c_em->add_option("--split", em.split, "train, test or all");

  EvalArgs ev;
  auto* c_ev = app.add_subcommand("eval", "Score query embeddings against a gallery");
  c_ev->add_option("--queries", ev.queries, "Query embedding CSV")->required()->check(CLI::ExistingFile);
  c_ev->add_option("--gallery", ev.gallery, "Gallery embedding CSV")->required()->check(CLI::ExistingFile);
  c_ev->add_option("--out", ev.out, "Report directory")->required();

  UncertaintyArgs un;
  auto* c_un = app.add_subcommand("report-uncertainty", "Harmonic-mean σ² scores and buckets");
  c_un->add_option("--data", un.data, "Dataset directory")->required()->check(CLI::ExistingDirectory);
  c_un->add_option("--checkpoint", un.checkpoint, "Sketch checkpoint")->required()->check(CLI::ExistingFile);
  c_un->add_option("--out", un.out, "Report CSV path")->required();
  c_un->add_option("--split", un.split, "train, test or all");
  c_un->add_option("--noisy", un.noisy, "Noisy-flag CSV; adds noisy/clean means and AUC")
      ->check(CLI::ExistingFile);

  GradcheckArgs gc;
  auto* c_gc = app.add_subcommand("gradcheck", "Finite-difference check of every loss gradient");
  c_gc->add_option("--seed", gc.seed, "First seed");
  c_gc->add_option("--trials", gc.trials, "Number of seeds")->check(CLI::PositiveNumber);
  c_gc->add_option("--batch", gc.sizes.batch, "Rows per instance")->check(CLI::PositiveNumber);
  c_gc->add_option("--dim", gc.sizes.dim, "Embedding width")->check(CLI::PositiveNumber);
  c_gc->add_option("--classes", gc.sizes.classes, "Classes")->check(CLI::Range(2, 1000));
  c_gc->add_option("--tolerance", gc.tolerance, "Maximum relative error");

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "uactn: " << e.what() << '\n';
    auto subs = app.get_subcommands();
    err << (subs.empty() ? app.help() : subs.front()->help());
    return kExitUsage;
  }

  try {
    if (*c_gen) return gen_data(gen, out);
    if (*c_ts) return train_sketch(ts, out, err);
    if (*c_tsh) return train_shape(tsh, out, err);
    if (*c_em) return embed(em, out);
    if (*c_ev) return eval(ev, out);
    if (*c_un) return report_uncertainty(un, out);
    if (*c_gc) return gradcheck(gc, out, err);
  } catch (const UsageError& e) {
    err << "uactn: " << e.what() << '\n';
    return kExitUsage;
  } catch (const std::exception& e) {
    err << "uactn: " << e.what() << '\n';
    return kExitRuntime;
  }
  return kExitUsage;
}

}  // namespace uactn::cli

#endif  // UACTN_TOOLS_CLI_HPP
