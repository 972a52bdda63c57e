#include <fstream>
#include <iostream>

#include <CLI11.hpp>
#include <json.hpp>

#include "horo/analysis.hpp"
#include "horo/gradcheck.hpp"
#include "horo/synth.hpp"
#include "horo/trainer.hpp"

namespace {

using namespace horo;

void write_file(const std::string& path, const std::string& content) {
  std::ofstream file(path, std::ios::binary);
  if (!file) throw DataError("cannot write " + path);
  file << content;
}

struct CommonOverrides {
  std::optional<std::uint64_t> seed;
  std::optional<std::int32_t> threads;
  bool deterministic = false;
  bool strict_algorithm1 = false;

  void attach(CLI::App* cmd) {
    cmd->add_option("--seed", seed, "Override the config seed");
    cmd->add_option("--threads", threads, "Worker threads (0 = 1)");
    cmd->add_flag("--deterministic", deterministic,
                  "Bit-reproducible runs (single-ordered reduction)");
    cmd->add_flag("--strict-algorithm1", strict_algorithm1,
                  "Sweep query families per epoch instead of interleaving");
  }

  void apply(RunConfig& cfg) const {
    if (seed) cfg.seed = *seed;
    if (threads) cfg.threads = *threads;
    if (deterministic) {
      cfg.deterministic = true;
      cfg.threads = 1;
    }
    if (strict_algorithm1) cfg.strict_phase_sweep = true;
  }
};

DepthMode parse_tree_mode(const std::string& mode) {
  if (mode == "single") return DepthMode::single;
  if (mode == "per_level") return DepthMode::per_level;
  throw UsageError("mode must be single|per_level");
}

int run(int argc, char** argv) {
  CLI::App app{"Gyrovector region embeddings for knowledge-graph queries"};
  app.require_subcommand(1);

  // --- train ---
  auto* train = app.add_subcommand("train", "Train embeddings from a config file");
  std::string train_config;
  std::string train_out = "model.ckpt";
  CommonOverrides train_over;
  train->add_option("--config", train_config, "Run config path")->required();
  train->add_option("--out", train_out, "Checkpoint output path");
  train_over.attach(train);
  train->callback([&] {
    RunConfig cfg = RunConfig::load(train_config);
    train_over.apply(cfg);
    TrainOptions opts;
    opts.log = &std::cout;
    opts.checkpoint_path = train_out;
    run_train(cfg, opts);
    std::cout << "checkpoint written to " << train_out << "\n";
  });

  // --- eval ---
  auto* eval = app.add_subcommand("eval", "Rank all entities for a query file");
  std::string eval_ckpt, eval_queries, eval_config, eval_json;
  eval->add_option("--checkpoint", eval_ckpt, "Checkpoint path")->required();
  eval->add_option("--queries", eval_queries, "Query JSONL path")->required();
  eval->add_option("--config", eval_config, "Config to cross-check against the checkpoint");
  eval->add_option("--json", eval_json, "Write the metrics report as JSON");
  eval->callback([&] {
    const Checkpoint ckpt = load_checkpoint(eval_ckpt);
    if (!eval_config.empty()) {
      const RunConfig other = RunConfig::load(eval_config);
      if (other.digest() != fnv1a(ckpt.config_text))
        std::cerr << "warning: --config digest differs from the checkpoint's config\n";
    }
    TripleStore vocab_only(ckpt.entities, ckpt.relations, {});
    const auto queries = read_query_jsonl(eval_queries, vocab_only);
    const EvalReport report = run_eval(ckpt, queries);
    std::cout << report.to_text();
    if (!eval_json.empty()) write_file(eval_json, report.to_json());
  });

  // --- sample-queries ---
  auto* sample = app.add_subcommand("sample-queries", "Sample benchmark-shaped queries");
  std::string sample_data, sample_structure, sample_out;
  std::int32_t sample_count = 100;
  std::uint64_t sample_seed = 1;
  std::string sample_answer_graph = "train";
  std::string sample_depth = "none";
  std::string sample_split = "1,0,0";
  std::int32_t sample_max_answers = 100;
  bool sample_no_hard = false;
  sample->add_option("--data", sample_data, "Triple TSV path")->required();
  sample->add_option("--structure", sample_structure, "Query structure tag")->required();
  sample->add_option("--count", sample_count, "Number of samples");
  sample->add_option("--seed", sample_seed, "Sampling seed");
  sample->add_option("--answer-graph", sample_answer_graph, "train|full");
  sample->add_option("--depth-handling", sample_depth, "none|single|per_level");
  sample->add_option("--split", sample_split, "train,valid,test edge ratios");
  sample->add_option("--max-answers", sample_max_answers, "Answer set size cap");
  sample->add_flag("--no-hard-answer", sample_no_hard,
                   "Drop the held-out-edge requirement for full-graph sampling");
  sample->add_option("--out", sample_out, "Output JSONL (stdout when omitted)");
  sample->callback([&] {
    RunConfig cfg;  // reuse the parser for the split/depth flags
    cfg = RunConfig::parse("split = " + sample_split + "\ndepth_handling = " + sample_depth +
                           "\n");
    TripleStore kg = load_tsv(sample_data);
    if (cfg.depth_handling == RunConfig::DepthHandling::single)
      kg = depth_encode(kg, DepthMode::single);
    else if (cfg.depth_handling == RunConfig::DepthHandling::per_level)
      kg = depth_encode(kg, DepthMode::per_level);
    const SplitBundle bundle = split(kg, cfg.split, sample_seed);
    SampleOptions opts;
    opts.max_answers = sample_max_answers;
    opts.require_hard_answer = !sample_no_hard;
    const auto samples = sample_queries(
        bundle, structure_tag_from_string(sample_structure), sample_count, sample_seed,
        sample_answer_graph == "full" ? AnswerGraph::full : AnswerGraph::train, opts);
    if (sample_out.empty())
      write_query_jsonl(samples, kg, std::cout);
    else
      write_query_jsonl(samples, kg, sample_out);
  });

  // --- anomaly ---
  auto* anomaly = app.add_subcommand("anomaly",
                                     "Pseudo-tree pipeline: inject noise, train, detect");
  std::string an_config, an_json, an_out, an_sem_vectors;
  double an_noise = 0.10;
  std::string an_policy = "calibrated";
  double an_quantile = 0.9;
  double an_threshold = 0.0;
  std::string an_semantic = "none";
  double an_beta = 1.0;
  std::optional<std::int32_t> an_level;
  CommonOverrides an_over;
  anomaly->add_option("--config", an_config, "Run config path")->required();
  anomaly->add_option("--noise-rate", an_noise, "Fraction of foreign leaves per parent");
  anomaly->add_option("--policy", an_policy, "calibrated|quantile|fixed");
  anomaly->add_option("--quantile", an_quantile, "Quantile for the quantile policy");
  anomaly->add_option("--threshold", an_threshold, "Threshold for the fixed policy");
  anomaly->add_option("--semantic-mode", an_semantic, "none|si|sc");
  anomaly->add_option("--semantic-vectors", an_sem_vectors, "Entity vector TSV");
  anomaly->add_option("--beta", an_beta, "Semantic blending weight");
  anomaly->add_option("--level", an_level, "Report a single parent level only");
  anomaly->add_option("--out", an_out, "Checkpoint output path");
  anomaly->add_option("--json", an_json, "Write per-level metrics as JSON");
  an_over.attach(anomaly);
  anomaly->callback([&] {
    RunConfig cfg = RunConfig::load(an_config);
    an_over.apply(cfg);
    ThresholdPolicy policy;
    if (an_policy == "calibrated") policy.kind = ThresholdPolicy::Kind::calibrated;
    else if (an_policy == "quantile") policy.kind = ThresholdPolicy::Kind::quantile;
    else if (an_policy == "fixed") policy.kind = ThresholdPolicy::Kind::fixed;
    else throw UsageError("policy must be calibrated|quantile|fixed");
    policy.quantile = an_quantile;
    policy.threshold = an_threshold;

    SemanticMode mode = SemanticMode::none;
    if (an_semantic == "si") mode = SemanticMode::initiation;
    else if (an_semantic == "sc") mode = SemanticMode::collaboration;
    else if (an_semantic != "none") throw UsageError("semantic-mode must be none|si|sc");
    std::optional<SemanticVectors> vectors;
    if (mode != SemanticMode::none) {
      if (an_sem_vectors.empty())
        throw UsageError("--semantic-vectors required for semantic modes");
      // Entity names resolve against the raw dataset vocabulary.
      vectors = load_semantic_vectors(an_sem_vectors, load_tsv(cfg.dataset));
    }

    TrainOptions opts;
    opts.log = &std::cout;
    opts.checkpoint_path = an_out;
    const AnomalyRunResult result = run_anomaly(
        cfg, an_noise, policy, mode, vectors ? &*vectors : nullptr, an_beta, opts);

    std::cout << "level  parents  precision  recall      f1  threshold\n";
    nlohmann::json levels_json = nlohmann::json::array();
    for (const AnomalyLevelResult& lvl : result.levels) {
      if (an_level && lvl.level != *an_level) continue;
      std::printf("P%-5d %8lld %10.4f %7.4f %7.4f  %s\n", lvl.level,
                  static_cast<long long>(lvl.parents_evaluated), lvl.metrics.precision,
                  lvl.metrics.recall, lvl.metrics.f1, format_double(lvl.threshold).c_str());
      nlohmann::json j;
      j["level"] = lvl.level;
      j["parents"] = lvl.parents_evaluated;
      j["precision"] = lvl.metrics.precision;
      j["recall"] = lvl.metrics.recall;
      j["f1"] = lvl.metrics.f1;
      j["threshold"] = lvl.threshold;
      levels_json.push_back(std::move(j));
    }
    if (!an_json.empty()) write_file(an_json, levels_json.dump(2) + "\n");
  });

  // --- analyze-distances ---
  auto* analyze = app.add_subcommand("analyze-distances",
                                     "Within/between-level distance analysis CSV");
  std::string az_ckpt, az_data, az_metric = "hyp", az_out;
  analyze->add_option("--checkpoint", az_ckpt, "Checkpoint path")->required();
  analyze->add_option("--data", az_data, "Hierarchy triple TSV")->required();
  analyze->add_option("--metric", az_metric, "hyp|euclid");
  analyze->add_option("--out", az_out, "CSV output (stdout when omitted)");
  analyze->callback([&] {
    const Checkpoint ckpt = load_checkpoint(az_ckpt);
    const TripleStore tree = load_tsv(az_data);
    if (tree.entity_count() != ckpt.params.entity_count())
      throw DataError("analyze-distances: tree and checkpoint entity counts differ");
    const DistanceMetric metric = az_metric == "euclid" ? DistanceMetric::euclid
                                                        : DistanceMetric::hyp;
    if (az_metric != "hyp" && az_metric != "euclid")
      throw UsageError("metric must be hyp|euclid");
    const std::string csv =
        distance_analysis_csv(analyze_distances(tree, ckpt.params, metric));
    if (az_out.empty()) std::cout << csv;
    else write_file(az_out, csv);
  });

  // --- export-viz ---
  auto* viz = app.add_subcommand("export-viz", "2-D projection of the learned regions");
  std::string viz_ckpt, viz_data, viz_json, viz_svg;
  viz->add_option("--checkpoint", viz_ckpt, "Checkpoint path")->required();
  viz->add_option("--data", viz_data, "Optional hierarchy TSV for level labels");
  viz->add_option("--json", viz_json, "JSON output path")->required();
  viz->add_option("--svg", viz_svg, "Optional SVG output path");
  viz->callback([&] {
    const Checkpoint ckpt = load_checkpoint(viz_ckpt);
    std::vector<std::int32_t> levels(ckpt.params.entity_count(), 0);
    if (!viz_data.empty()) {
      const TripleStore tree = load_tsv(viz_data);
      if (tree.entity_count() != ckpt.params.entity_count())
        throw DataError("export-viz: tree and checkpoint entity counts differ");
      levels = node_depths(tree);
    }
    std::vector<Hyperboloid> regions;
    std::vector<VizEntry> entries;
    for (EntityId e = 0; e < ckpt.params.entity_count(); ++e) {
      regions.push_back(ckpt.params.entity(e));
      entries.push_back({std::to_string(e), ckpt.entities.name(e), levels[e]});
    }
    const Projected2D proj = pca_project_2d(regions);
    if (proj.degenerate)
      std::cerr << "warning: rank-deficient embedding; projected to the origin\n";
    write_file(viz_json, viz_export_json(proj, entries));
    if (!viz_svg.empty()) write_file(viz_svg, viz_export_svg(proj, entries));
  });

  // --- gradcheck ---
  auto* gc = app.add_subcommand("gradcheck", "Finite-difference gradient audit");
  std::uint64_t gc_seed = 20240818;
  std::int32_t gc_configs = 100;
  double gc_tol = 1e-4;
  gc->add_option("--seed", gc_seed, "Suite seed");
  gc->add_option("--configs", gc_configs, "Random configurations per operation");
  gc->add_option("--tolerance", gc_tol, "Maximum relative error");
  gc->callback([&] {
    const GradientReport report = run_gradcheck_suite(gc_seed, gc_configs);
    std::cout << format_report(report, gc_tol);
    if (!report.passed(gc_tol)) throw NumericError("gradient check failed");
  });

  // --- gen-tree ---
  auto* gtree = app.add_subcommand("gen-tree", "Write a synthetic hierarchy TSV");
  TreeSpec tree_spec;
  std::string gtree_mode = "per_level", gtree_out;
  gtree->add_option("--depth", tree_spec.depth, "Tree depth");
  gtree->add_option("--branch", tree_spec.branching, "Branching factor");
  gtree->add_option("--mode", gtree_mode, "single|per_level relation encoding");
  gtree->add_option("--seed", tree_spec.seed, "Seed");
  gtree->add_option("--out", gtree_out, "Output TSV")->required();
  gtree->callback([&] {
    tree_spec.relation_mode = parse_tree_mode(gtree_mode);
    save_tsv(gen_tree(tree_spec), gtree_out);
  });

  // --- gen-kg ---
  auto* gkg = app.add_subcommand("gen-kg", "Write a random overlapping KG TSV");
  std::int32_t gkg_entities = 50, gkg_relations = 5;
  double gkg_density = 0.02;
  std::uint64_t gkg_seed = 1;
  std::string gkg_out;
  gkg->add_option("--entities", gkg_entities, "Entity count");
  gkg->add_option("--relations", gkg_relations, "Relation count");
  gkg->add_option("--density", gkg_density, "Edge probability per (h,t,r)");
  gkg->add_option("--seed", gkg_seed, "Seed");
  gkg->add_option("--out", gkg_out, "Output TSV")->required();
  gkg->callback([&] {
    save_tsv(gen_overlap_kg(gkg_entities, gkg_relations, gkg_density, gkg_seed), gkg_out);
  });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);  // prints usage/help text
    return code == 0 ? 0 : 1;
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  try {
    return run(argc, argv);
  } catch (const horo::UsageError& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return 1;
  } catch (const horo::DataError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return 2;
  } catch (const horo::NumericError& e) {
    std::cerr << "numeric error: " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
