#pragma once

#include <array>
#include <span>
#include <unordered_map>
#include <vector>

#include "horo/hyperboloid.hpp"
#include "horo/query.hpp"
#include "horo/tape.hpp"
#include "horo/tape_geo.hpp"

namespace horo {

enum class ManifoldKind { ball, nonneg, euclid };

// Fixed parameter block layout. Entity/relation tables hold one region per
// row (center rows on the ball manifold, limit rows nonnegative); the five
// two-layer perceptrons and the curvature scale are Euclidean.
namespace block {
inline constexpr std::int32_t kEntityCen = 0;
inline constexpr std::int32_t kEntityLim = 1;
inline constexpr std::int32_t kRelCen = 2;
inline constexpr std::int32_t kRelLim = 3;
inline constexpr std::int32_t kAttW1 = 4;    // attention logits net f: R^2d -> R^d
inline constexpr std::int32_t kAttB1 = 5;
inline constexpr std::int32_t kAttW2 = 6;
inline constexpr std::int32_t kAttB2 = 7;
inline constexpr std::int32_t kSetInW1 = 8;  // set-encoder inner net: R^2d -> R^d
inline constexpr std::int32_t kSetInB1 = 9;
inline constexpr std::int32_t kSetInW2 = 10;
inline constexpr std::int32_t kSetInB2 = 11;
inline constexpr std::int32_t kSetOutW1 = 12;  // set-encoder outer net: R^d -> R^d
inline constexpr std::int32_t kSetOutB1 = 13;
inline constexpr std::int32_t kSetOutW2 = 14;
inline constexpr std::int32_t kSetOutB2 = 15;
inline constexpr std::int32_t kCtrInW1 = 16;  // center set-aggregator nets (ablation)
inline constexpr std::int32_t kCtrInB1 = 17;
inline constexpr std::int32_t kCtrInW2 = 18;
inline constexpr std::int32_t kCtrInB2 = 19;
inline constexpr std::int32_t kCtrOutW1 = 20;
inline constexpr std::int32_t kCtrOutB1 = 21;
inline constexpr std::int32_t kCtrOutW2 = 22;
inline constexpr std::int32_t kCtrOutB2 = 23;
inline constexpr std::int32_t kCurvature = 24;
inline constexpr std::int32_t kCount = 25;
}  // namespace block

struct ModelConfig {
  std::int32_t d = 16;
  std::int32_t hidden = 0;  // 0 -> 2d
  enum class CenterAgg { avg, attention, deepsets };
  CenterAgg center_agg = CenterAgg::attention;
  enum class LimitAgg { deepsets, min };
  LimitAgg limit_agg = LimitAgg::deepsets;
  DistanceWeights dist;
  // Ranking margin. Distances here are sums of per-coordinate gyro
  // differences, each bounded by 1, so the usable scale grows with d; 1.0
  // suits the desk-scale dimensions (16-32).
  double margin = 1.0;
  std::int32_t negatives = 128;
  // Attention logits reuse the set-encoder inner net instead of their own.
  bool share_set_mlp = false;
  // Center aggregation as the literal per-coordinate gyro-scaled Euclidean
  // sum (can leave the ball; default combines in the origin tangent space).
  bool literal_center_sum = false;

  std::int32_t hidden_width() const { return hidden > 0 ? hidden : 2 * d; }
};

// Dense f64 parameter storage for one model instance.
class ParameterStore {
 public:
  ParameterStore() = default;
  ParameterStore(std::int32_t d, std::int32_t hidden, std::int32_t n_entities,
                 std::int32_t n_relations, Curvature curvature);

  std::int32_t dim() const { return d_; }
  std::int32_t hidden() const { return hidden_; }
  std::int32_t entity_count() const { return n_entities_; }
  std::int32_t relation_count() const { return n_relations_; }

  double curvature() const { return blocks_[block::kCurvature][0]; }
  bool curvature_trainable() const { return curvature_trainable_; }
  Curvature curvature_param() const { return {curvature(), curvature_trainable_}; }

  const ad::BlockShape& shape(std::int32_t b) const { return shapes_[b]; }
  std::vector<ad::BlockShape> shapes() const { return shapes_; }
  ManifoldKind kind(std::int32_t b) const;
  static const char* block_name(std::int32_t b);

  std::span<double> row(std::int32_t b, std::int32_t r);
  std::span<const double> row(std::int32_t b, std::int32_t r) const;
  std::span<double> flat(std::int32_t b) { return blocks_[b]; }
  std::span<const double> flat(std::int32_t b) const { return blocks_[b]; }

  Hyperboloid entity(EntityId e) const;
  Hyperboloid relation(RelationId r) const;

 private:
  std::int32_t d_ = 0;
  std::int32_t hidden_ = 0;
  std::int32_t n_entities_ = 0;
  std::int32_t n_relations_ = 0;
  bool curvature_trainable_ = false;
  std::vector<ad::BlockShape> shapes_;
  std::vector<std::vector<double>> blocks_;
};

// Externally supplied entity feature vectors (e.g. pre-computed text
// embeddings), all of one dimension.
struct SemanticVectors {
  std::int32_t dim = 0;
  std::unordered_map<EntityId, std::vector<double>> vectors;
};

// Random initialization: centers as exp0 of small Gaussian tangents, limits
// as |N(0, 0.01)|, perceptrons with uniform fan-in scaling.
void init_params(ParameterStore& store, std::uint64_t seed);
// Same, but centers of covered entities start from the supplied vectors
// (scaled into the ball); zero vectors fall back to the default jitter.
void init_params_semantic(ParameterStore& store, std::uint64_t seed, const SemanticVectors& vecs,
                          double alpha = 0.5);

// --- plain (tape-free) forward ------------------------------------------------

BallPoint aggregate_centers(const ParameterStore& store, const ModelConfig& cfg,
                            std::span<const Hyperboloid> members, ModelConfig::CenterAgg mode);
Hyperboloid intersect_members(const ParameterStore& store, const ModelConfig& cfg,
                              std::span<const Hyperboloid> members);
// Union-free branch -> region, by recursive evaluation.
Hyperboloid embed_query(const ParameterStore& store, const ModelConfig& cfg,
                        const QueryAst& branch);
// Minimum branch distance over the DNF of q, entity scored as its center.
double score(const ParameterStore& store, const ModelConfig& cfg, const QueryAst& q, EntityId e);
// Distances of every entity to a pre-embedded DNF (eval hot path).
std::vector<double> score_all(const ParameterStore& store, const ModelConfig& cfg,
                              const DnfQuery& dnf);

struct TrainPair {
  const DnfQuery* query = nullptr;
  EntityId positive = -1;
  std::vector<EntityId> negatives;
};

// Margin log-sigmoid ranking loss, plain evaluation (no gradients).
double training_loss(const ParameterStore& store, const ModelConfig& cfg,
                     std::span<const TrainPair> pairs);

// --- tape forward ---------------------------------------------------------

struct TapeCtx {
  ad::Tape& tape;
  const ParameterStore& store;
  const ModelConfig& cfg;
  ad::NodeId c = -1;  // curvature node: param when trainable, constant otherwise

  TapeCtx(ad::Tape& t, const ParameterStore& s, const ModelConfig& m);

  // Shared tensors (perceptron weights) are emitted once per tape.
  ad::NodeId flat_param(std::int32_t blk);

 private:
  std::array<ad::NodeId, block::kCount> param_cache_;
};

ad::TapeBox t_entity(TapeCtx& ctx, EntityId e);
ad::TapeBox t_embed_query(TapeCtx& ctx, const QueryAst& branch);
ad::NodeId t_pair_loss(TapeCtx& ctx, const DnfQuery& dnf, EntityId positive,
                       std::span<const EntityId> negatives);

// Sum of pair losses with reverse-mode gradients accumulated into grads
// (which must be configured and zeroed by the caller). Pairs are processed
// in chunks by `threads` workers and merged in worker order, so results are
// bitwise reproducible for a fixed thread count.
double batch_loss_and_grad(const ParameterStore& store, const ModelConfig& cfg,
                           std::span<const TrainPair> pairs, ad::GradientBuffer& grads,
                           int threads = 1);

}  // namespace horo
