#include "horo/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>

#include <json.hpp>

namespace horo {

namespace {

nlohmann::json row_json(const EvalReport::Row& row) {
  if (row.count == 0) return nullptr;
  nlohmann::json j;
  j["count"] = row.count;
  j["hits@1"] = row.hits1;
  j["hits@3"] = row.hits3;
  j["hits@10"] = row.hits10;
  j["mrr"] = row.mrr_pub;
  j["mrr_standard"] = row.mrr_std;
  return j;
}

}  // namespace

std::string EvalReport::to_json() const {
  nlohmann::json out;
  for (const auto& [key, row] : rows) out[key] = row_json(row);
  return out.dump(2) + "\n";
}

std::string EvalReport::to_text() const {
  std::string out =
      "structure  count   hits@1   hits@3  hits@10      mrr  mrr_std\n";
  for (int i = 0; i <= kStructureTagCount; ++i) {
    const std::string key =
        i < kStructureTagCount ? to_string(structure_tag_at(i)) : "avg";
    const Row& row = rows.at(key);
    char line[160];
    if (row.count == 0) {
      std::snprintf(line, sizeof(line), "%-9s %6s %8s %8s %8s %8s %8s\n", key.c_str(), "-",
                    "-", "-", "-", "-", "-");
    } else {
      std::snprintf(line, sizeof(line), "%-9s %6lld %8.4f %8.4f %8.4f %8.4f %8.4f\n",
                    key.c_str(), static_cast<long long>(row.count), row.hits1, row.hits3,
                    row.hits10, row.mrr_pub, row.mrr_std);
    }
    out += line;
  }
  return out;
}

EvalReport evaluate_queries(const ParameterStore& params, const ModelConfig& cfg,
                            std::span<const QuerySample> queries) {
  EvalReport report;
  for (int i = 0; i < kStructureTagCount; ++i)
    report.rows[to_string(structure_tag_at(i))] = {};
  report.rows["avg"] = {};

  const auto n = static_cast<std::int32_t>(params.entity_count());
  for (const QuerySample& q : queries) {
    const DnfQuery dnf = to_dnf(q.ast);
    const RankedOutput ranked = rank_entities(score_all(params, cfg, dnf), q.answers);
    EvalReport::Row& row = report.rows[to_string(q.tag)];
    ++row.count;
    row.hits1 += hits_at_k(ranked, std::min(1, n));
    row.hits3 += hits_at_k(ranked, std::min(3, n));
    row.hits10 += hits_at_k(ranked, std::min(10, n));
    row.mrr_pub += mrr_as_published(ranked);
    row.mrr_std += mrr_standard(ranked);
  }

  EvalReport::Row& avg = report.rows["avg"];
  for (int i = 0; i < kStructureTagCount; ++i) {
    EvalReport::Row& row = report.rows[to_string(structure_tag_at(i))];
    if (row.count == 0) continue;
    row.hits1 /= row.count;
    row.hits3 /= row.count;
    row.hits10 /= row.count;
    row.mrr_pub /= row.count;
    row.mrr_std /= row.count;
    avg.hits1 += row.hits1;
    avg.hits3 += row.hits3;
    avg.hits10 += row.hits10;
    avg.mrr_pub += row.mrr_pub;
    avg.mrr_std += row.mrr_std;
    ++avg.count;  // number of structures contributing to the average
  }
  if (avg.count > 0) {
    avg.hits1 /= avg.count;
    avg.hits3 /= avg.count;
    avg.hits10 /= avg.count;
    avg.mrr_pub /= avg.count;
    avg.mrr_std /= avg.count;
  }
  return report;
}

namespace {

enum class Family { translation, intersection, unions };

Family family_of(const QueryAst& q) {
  if (q.contains(QueryAst::Kind::unite)) return Family::unions;
  if (q.contains(QueryAst::Kind::intersect)) return Family::intersection;
  return Family::translation;
}

struct PreparedQuery {
  DnfQuery dnf;
  const QuerySample* sample;
  Family family;
};

TripleStore apply_depth_handling(TripleStore kg, RunConfig::DepthHandling mode) {
  switch (mode) {
    case RunConfig::DepthHandling::none:
      return kg;
    case RunConfig::DepthHandling::single:
      return depth_encode(kg, DepthMode::single);
    case RunConfig::DepthHandling::per_level:
      return depth_encode(kg, DepthMode::per_level);
  }
  return kg;
}

}  // namespace

TrainResult train_on_store(const TripleStore& kg, const RunConfig& cfg,
                           const TrainOptions& opts) {
  cfg.validate(false);
  TrainResult result;
  result.bundle = split(kg, cfg.split, cfg.seed);

  // One fixed query set per structure, sampled up front.
  for (StructureTag tag : cfg.query_mix) {
    SampleOptions sopts;
    sopts.max_answers = cfg.max_answers;
    auto sampled =
        sample_queries(result.bundle, tag, cfg.queries_per_structure,
                       derive_seed(cfg.seed, std::string("queries/") + to_string(tag)),
                       AnswerGraph::train, sopts);
    result.train_queries.insert(result.train_queries.end(),
                                std::make_move_iterator(sampled.begin()),
                                std::make_move_iterator(sampled.end()));
  }

  std::vector<PreparedQuery> prepared;
  prepared.reserve(result.train_queries.size());
  for (const QuerySample& q : result.train_queries)
    prepared.push_back({to_dnf(q.ast), &q, family_of(q.ast)});

  ParameterStore params(cfg.model.d, cfg.model.hidden_width(), kg.entity_count(),
                        kg.relation_count(), {cfg.curvature, cfg.trainable_curvature});
  if (opts.init_vectors)
    init_params_semantic(params, derive_seed(cfg.seed, "init"), *opts.init_vectors);
  else
    init_params(params, derive_seed(cfg.seed, "init"));

  OptimState optim;
  optim.lr = cfg.lr;
  optim.beta1 = cfg.beta1;
  optim.beta2 = cfg.beta2;
  optim.eps = cfg.adam_eps;
  optim.configure(params);

  ad::GradientBuffer grads;
  grads.configure(params.shapes());

  // Cadence-gated validation set, sampled once.
  std::vector<QuerySample> val_queries;
  if (cfg.eval_cadence > 0) {
    const bool has_held_out = result.bundle.valid.edge_count() > 0;
    SampleOptions sopts;
    sopts.max_answers = cfg.max_answers;
    sopts.require_hard_answer = has_held_out && cfg.require_hard_answer;
    for (StructureTag tag : cfg.query_mix) {
      auto sampled = sample_queries(
          result.bundle, tag, cfg.eval_queries,
          derive_seed(cfg.seed, std::string("val_queries/") + to_string(tag)),
          has_held_out ? AnswerGraph::full : AnswerGraph::train, sopts);
      val_queries.insert(val_queries.end(), std::make_move_iterator(sampled.begin()),
                         std::make_move_iterator(sampled.end()));
    }
  }

  const auto make_checkpoint = [&](const ParameterStore& snapshot, std::int64_t step,
                                   const std::string& metrics) {
    Checkpoint ckpt;
    ckpt.params = snapshot;
    ckpt.entities = kg.entities();
    ckpt.relations = kg.relations();
    ckpt.config_text = cfg.serialize();
    ckpt.step = step;
    ckpt.metrics_json = metrics;
    return ckpt;
  };

  ParameterStore last_good = params;
  std::int64_t last_good_step = 0;
  std::string last_metrics;

  const int threads = cfg.threads > 0 ? cfg.threads : 1;
  std::int64_t step = 0;
  try {
    for (std::int32_t epoch = 0; epoch < cfg.epochs; ++epoch) {
      // Fresh positive/negative draws per epoch over the fixed query set.
      std::vector<TrainPair> pairs(prepared.size());
      std::vector<Family> pair_family(prepared.size());
      Rng pos_rng(derive_seed(cfg.seed, "epoch_pos", epoch));
      for (std::size_t i = 0; i < prepared.size(); ++i) {
        const QuerySample& sample = *prepared[i].sample;
        auto it = sample.answers.begin();
        std::advance(it, pos_rng.next_below(sample.answers.size()));
        pairs[i].query = &prepared[i].dnf;
        pairs[i].positive = *it;
        pairs[i].negatives = sample_negatives(
            sample.answers, cfg.model.negatives, kg.entity_count(),
            derive_seed(cfg.seed, "epoch_neg",
                        (static_cast<std::uint64_t>(epoch) << 32) | i));
        pair_family[i] = prepared[i].family;
      }

      // Family pools, each shuffled, then either interleaved per batch or
      // swept family by family.
      std::array<std::vector<std::size_t>, 3> pools;
      for (std::size_t i = 0; i < pairs.size(); ++i)
        pools[static_cast<int>(pair_family[i])].push_back(i);
      Rng shuffle_rng(derive_seed(cfg.seed, "shuffle", epoch));
      for (auto& pool : pools)
        for (std::size_t i = pool.size(); i > 1; --i)
          std::swap(pool[i - 1], pool[shuffle_rng.next_below(i)]);

      std::vector<std::vector<std::size_t>> batches;
      if (cfg.strict_phase_sweep) {
        for (const auto& pool : pools)
          for (std::size_t lo = 0; lo < pool.size(); lo += cfg.batch) {
            const std::size_t hi = std::min(pool.size(), lo + cfg.batch);
            batches.emplace_back(pool.begin() + lo, pool.begin() + hi);
          }
      } else {
        std::array<std::size_t, 3> cursor{0, 0, 0};
        for (int f = 0; true; f = (f + 1) % 3) {
          if (cursor[0] >= pools[0].size() && cursor[1] >= pools[1].size() &&
              cursor[2] >= pools[2].size())
            break;
          const auto& pool = pools[f];
          if (cursor[f] >= pool.size()) continue;
          const std::size_t hi = std::min(pool.size(), cursor[f] + cfg.batch);
          batches.emplace_back(pool.begin() + cursor[f], pool.begin() + hi);
          cursor[f] = hi;
        }
      }

      double epoch_loss = 0.0;
      for (const auto& batch : batches) {
        std::vector<TrainPair> chunk;
        chunk.reserve(batch.size());
        for (std::size_t i : batch) chunk.push_back(pairs[i]);
        grads.zero();
        epoch_loss += batch_loss_and_grad(params, cfg.model, chunk, grads, threads);
        optim_step(params, grads, optim);
        ++step;
      }
      result.epoch_losses.push_back(epoch_loss);

      if (opts.log) {
        (*opts.log) << "epoch " << epoch + 1 << "/" << cfg.epochs << " loss "
                    << format_double(epoch_loss);
        if (cfg.eval_cadence > 0 && (epoch + 1) % cfg.eval_cadence == 0) {
          const EvalReport report = evaluate_queries(params, cfg.model, val_queries);
          last_metrics = report.to_json();
          (*opts.log) << " val_hits@3 " << report.rows.at("avg").hits3 << " val_mrr "
                      << report.rows.at("avg").mrr_pub;
        }
        (*opts.log) << "\n";
      } else if (cfg.eval_cadence > 0 && (epoch + 1) % cfg.eval_cadence == 0) {
        last_metrics = evaluate_queries(params, cfg.model, val_queries).to_json();
      }

      last_good = params;
      last_good_step = step;
    }
  } catch (const NumericError&) {
    if (!opts.checkpoint_path.empty())
      save_checkpoint(make_checkpoint(last_good, last_good_step, last_metrics),
                      opts.checkpoint_path);
    throw;
  }

  result.checkpoint = make_checkpoint(params, step, last_metrics);
  if (!opts.checkpoint_path.empty()) save_checkpoint(result.checkpoint, opts.checkpoint_path);
  return result;
}

TrainResult run_train(const RunConfig& cfg, const TrainOptions& opts) {
  cfg.validate(true);
  const TripleStore kg = apply_depth_handling(load_tsv(cfg.dataset), cfg.depth_handling);
  return train_on_store(kg, cfg, opts);
}

EvalReport run_eval(const Checkpoint& ckpt, std::span<const QuerySample> queries) {
  const RunConfig cfg = ckpt.config();
  return evaluate_queries(ckpt.params, cfg.model, queries);
}

AnomalyRunResult run_anomaly(const RunConfig& cfg, double noise_rate,
                             const ThresholdPolicy& policy, SemanticMode semantic,
                             const SemanticVectors* vectors, double beta,
                             const TrainOptions& opts) {
  cfg.validate(true);
  const TripleStore tree = apply_depth_handling(load_tsv(cfg.dataset), cfg.depth_handling);

  AnomalyRunResult result;
  result.pseudo_tree = build_pseudo_tree(tree, noise_rate, derive_seed(cfg.seed, "noise"));

  if (semantic != SemanticMode::none && vectors == nullptr)
    throw UsageError("run_anomaly: semantic mode requires vectors");

  RunConfig train_cfg = cfg;
  train_cfg.split = {1.0, 0.0, 0.0};  // the task trains on the full noisy tree
  TrainOptions train_opts = opts;
  if (semantic == SemanticMode::initiation) train_opts.init_vectors = vectors;

  TrainResult trained = train_on_store(result.pseudo_tree.store, train_cfg, train_opts);
  result.checkpoint = std::move(trained.checkpoint);

  for (std::int32_t level = 0; level <= result.pseudo_tree.max_parent_depth; ++level) {
    if (result.pseudo_tree.parents_at_level(level).empty()) continue;
    if (semantic == SemanticMode::collaboration)
      result.levels.push_back(anomaly_detect_semantic(result.pseudo_tree,
                                                      result.checkpoint.params, cfg.model, level,
                                                      *vectors, beta, policy, cfg.seed));
    else
      result.levels.push_back(anomaly_detect(result.pseudo_tree, result.checkpoint.params,
                                             cfg.model, level, policy, cfg.seed));
  }
  return result;
}

}  // namespace horo
