#ifndef UACTN_EXPERIMENT_HPP
#define UACTN_EXPERIMENT_HPP

// End-to-end in-memory runs: stage 1, stage 2, cross-modal evaluation of
// test sketches against the test shape gallery, and σ² statistics of the
// training sketches against their ground-truth noisy flags.

#include <vector>

#include "uactn/data.hpp"
#include "uactn/metrics.hpp"
#include "uactn/trainer.hpp"
#include "uactn/uncertainty.hpp"

namespace uactn {

/// Harmonic-mean σ² of every row of a Gaussian embedding batch.
inline std::vector<double> uncertainty_scores(const GaussianEmbedding& e) {
  const Matrix var = e.variance();
  std::vector<double> out(var.rows());
  for (std::size_t i = 0; i < var.rows(); ++i) out[i] = harmonic_mean(var.row(i));
  return out;
}

struct UncertaintySplit {
  double noisy_mean = 0.0;
  double clean_mean = 0.0;
  double auc = 0.0;
};

inline UncertaintySplit split_by_noise(const std::vector<double>& scores,
                                       const std::vector<const SampleRecord*>& recs) {
  UncertaintySplit s;
  std::vector<char> flags(recs.size());
  double n_noisy = 0, n_clean = 0;
  for (std::size_t i = 0; i < recs.size(); ++i) {
    flags[i] = recs[i]->noisy ? 1 : 0;
    if (recs[i]->noisy) {
      s.noisy_mean += scores[i];
      n_noisy += 1;
    } else {
      s.clean_mean += scores[i];
      n_clean += 1;
    }
  }
  if (n_noisy > 0) s.noisy_mean /= n_noisy;
  if (n_clean > 0) s.clean_mean /= n_clean;
  if (n_noisy > 0 && n_clean > 0) s.auc = detection_auc(scores, flags);
  return s;
}

struct ExperimentResult {
  Stage1Result stage1;
  Stage2Result stage2;
  MetricReport test;            // test sketches vs test shapes
  double sketch_train_acc = 0.0;
  double shape_train_acc = 0.0;
  UncertaintySplit train_uncertainty;
};

inline double accuracy(const std::vector<std::size_t>& pred, const std::vector<std::size_t>& truth) {
  std::size_t ok = 0;
  for (std::size_t i = 0; i < pred.size(); ++i) ok += pred[i] == truth[i];
  return pred.empty() ? 0.0 : static_cast<double>(ok) / static_cast<double>(pred.size());
}

/// Each stage draws from its own Rng(cfg.seed), as the CLI commands do.
inline ExperimentResult run_experiment(const Dataset& ds, TrainConfig cfg) {
  cfg.input_dim = ds.manifest.dim;
  cfg.view_dim = ds.manifest.dim;
  cfg.classes = ds.manifest.classes;
  cfg.views = ds.manifest.views;

  const auto sk_train = select(ds.sketches, Split::train);
  const auto sk_test = select(ds.sketches, Split::test);
  const auto sh_train = select(ds.shapes, Split::train);
  const auto sh_test = select(ds.shapes, Split::test);

  ExperimentResult res;
  {
    Rng rng(cfg.seed);
    res.stage1 = train_stage1(sk_train, cfg, rng);
  }
  {
    Rng rng(cfg.seed);
    res.stage2 = train_stage2(sh_train, res.stage1.classifier, cfg, rng);
  }

  const GaussianEmbedding train_emb = encode_sketch(res.stage1.model, stack_sketches(sk_train));
  res.sketch_train_acc = accuracy(nearest_centre(train_emb.mu, res.stage1.classifier),
                                  labels_of(sk_train));
  res.train_uncertainty = split_by_noise(uncertainty_scores(train_emb), sk_train);

  const Matrix shape_train_emb = embed_shapes(res.stage2.encoder, sh_train);
  res.shape_train_acc = accuracy(nearest_centre(shape_train_emb, res.stage1.classifier),
                                 labels_of(sh_train));

  const Matrix queries = encode_sketch(res.stage1.model, stack_sketches(sk_test)).mu;
  const Matrix gallery = embed_shapes(res.stage2.encoder, sh_test);
  const auto ql = labels_of(sk_test);
  const auto gl = labels_of(sh_test);
  res.test = evaluate(queries, gallery, ql, gl);
  return res;
}

}  // namespace uactn

#endif  // UACTN_EXPERIMENT_HPP
