#pragma once

#include <string>

#include "horo/model.hpp"
#include "horo/sampling.hpp"
#include "horo/triples.hpp"

namespace horo {

// Everything a training run depends on, serialized as a flat key = value
// text file. Serialization is canonical (fixed key order, shortest
// round-trippable numbers) so the digest is stable and round trips are
// lossless.
struct RunConfig {
  std::string dataset;  // triple TSV path
  ModelConfig model;    // d, aggregators, distance weights, margin, negatives

  // Sampling.
  std::vector<StructureTag> query_mix = {
      StructureTag::t1, StructureTag::t2, StructureTag::t3,
      StructureTag::i2, StructureTag::i3, StructureTag::u2,
      StructureTag::ip, StructureTag::pi, StructureTag::up};
  std::int32_t queries_per_structure = 1000;
  std::int32_t max_answers = 100;
  bool require_hard_answer = true;

  // Data handling.
  enum class DepthHandling { none, single, per_level };
  DepthHandling depth_handling = DepthHandling::none;
  SplitRatios split;

  // Optimization.
  std::int32_t epochs = 300;
  std::int32_t batch = 128;
  double lr = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_eps = 1e-8;

  // Execution.
  std::uint64_t seed = 1;
  bool deterministic = false;
  std::int32_t threads = 1;
  std::int32_t eval_cadence = 0;   // epochs between validation logs; 0 = off
  std::int32_t eval_queries = 200; // per structure, cadence-gated validation
  bool strict_phase_sweep = false; // per-epoch family sweep instead of rotation

  // Curvature.
  double curvature = 1.0;
  bool trainable_curvature = false;

  std::string serialize() const;
  static RunConfig parse(const std::string& text);
  static RunConfig load(const std::string& path);
  void save(const std::string& path) const;
  std::uint64_t digest() const;  // over the canonical serialization

  // d >= 1, epochs >= 0, ratios normalized, referenced files exist.
  void validate(bool check_files = true) const;
};

}  // namespace horo
