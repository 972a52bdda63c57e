#pragma once

#include <iosfwd>
#include <map>
#include <optional>

#include "horo/anomaly.hpp"
#include "horo/checkpoint.hpp"
#include "horo/config.hpp"
#include "horo/metrics.hpp"
#include "horo/optim.hpp"
#include "horo/sampling.hpp"

namespace horo {

struct EvalReport {
  struct Row {
    std::int64_t count = 0;
    double hits1 = 0.0;
    double hits3 = 0.0;
    double hits10 = 0.0;
    double mrr_pub = 0.0;   // as-published normalization
    double mrr_std = 0.0;   // first-hit reciprocal rank
  };
  // All nine structure keys plus "avg" are always present; structures with
  // no queries carry count 0 and render as null in JSON.
  std::map<std::string, Row> rows;

  std::string to_json() const;
  std::string to_text() const;
};

EvalReport evaluate_queries(const ParameterStore& params, const ModelConfig& cfg,
                            std::span<const QuerySample> queries);

struct TrainOptions {
  std::ostream* log = nullptr;
  std::string checkpoint_path;  // written at the end (and on numeric aborts)
  const SemanticVectors* init_vectors = nullptr;  // semantic center initialization
};

struct TrainResult {
  Checkpoint checkpoint;
  SplitBundle bundle;
  std::vector<QuerySample> train_queries;
  std::vector<double> epoch_losses;
};

// The full training loop: per epoch, translation/intersection/union batches
// (interleaved in fixed rotation, or as a strict three-phase sweep when
// configured), margin ranking loss, one optimizer step per batch.
TrainResult train_on_store(const TripleStore& kg, const RunConfig& cfg,
                           const TrainOptions& opts = {});
// Loads cfg.dataset, applies depth handling, then trains.
TrainResult run_train(const RunConfig& cfg, const TrainOptions& opts = {});

EvalReport run_eval(const Checkpoint& ckpt, std::span<const QuerySample> queries);

enum class SemanticMode { none, initiation, collaboration };

struct AnomalyRunResult {
  PseudoTree pseudo_tree;
  Checkpoint checkpoint;
  std::vector<AnomalyLevelResult> levels;  // one per parent depth, ascending
};

// Hierarchy anomaly pipeline: inject foreign leaves, train on the noisy
// tree (all edges), then screen every parent level with the policy.
AnomalyRunResult run_anomaly(const RunConfig& cfg, double noise_rate,
                             const ThresholdPolicy& policy,
                             SemanticMode semantic = SemanticMode::none,
                             const SemanticVectors* vectors = nullptr, double beta = 1.0,
                             const TrainOptions& opts = {});

}  // namespace horo
