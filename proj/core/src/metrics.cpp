#include "horo/metrics.hpp"

#include <algorithm>
#include <numeric>

namespace horo {

RankedOutput rank_entities(const std::vector<double>& scores, std::set<EntityId> answers) {
  RankedOutput out;
  out.ids.resize(scores.size());
  std::iota(out.ids.begin(), out.ids.end(), 0);
  std::sort(out.ids.begin(), out.ids.end(), [&](EntityId a, EntityId b) {
    if (scores[a] != scores[b]) return scores[a] < scores[b];
    return a < b;
  });
  out.scores.resize(scores.size());
  for (std::size_t i = 0; i < out.ids.size(); ++i) out.scores[i] = scores[out.ids[i]];
  out.answers = std::move(answers);
  return out;
}

double hits_at_k(const RankedOutput& output, std::int32_t k) {
  if (k <= 0) throw UsageError("hits_at_k: k must be positive");
  if (k > static_cast<std::int32_t>(output.ids.size()))
    throw UsageError("hits_at_k: k exceeds output length");
  std::int32_t hits = 0;
  for (std::int32_t i = 0; i < k; ++i)
    if (output.answers.count(output.ids[i])) ++hits;
  return static_cast<double>(hits) / static_cast<double>(k);
}

double mrr_as_published(const RankedOutput& output) {
  if (output.ids.empty()) throw UsageError("mrr: empty output");
  double acc = 0.0;
  for (std::size_t i = 0; i < output.ids.size(); ++i)
    if (output.answers.count(output.ids[i])) acc += 1.0 / static_cast<double>(i + 1);
  return acc / static_cast<double>(output.ids.size());
}

double mrr_standard(const RankedOutput& output) {
  for (std::size_t i = 0; i < output.ids.size(); ++i)
    if (output.answers.count(output.ids[i])) return 1.0 / static_cast<double>(i + 1);
  return 0.0;
}

}  // namespace horo
