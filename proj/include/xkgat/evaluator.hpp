#pragma once

#include <array>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "xkgat/checkpoint.hpp"
#include "xkgat/kg_store.hpp"
#include "xkgat/model.hpp"

namespace xkgat {

enum class RankSetting { raw, filter };

struct RankResult {
  Triple triple;
  std::size_t raw_rank = 1;
  std::size_t filtered_rank = 1;
};

inline constexpr std::array<int, 4> kHitsAt = {1, 3, 5, 10};

struct MetricReport {
  double mrr = 0.0;
  std::map<int, double> hits;
  std::size_t n_test = 0;
  RankSetting setting = RankSetting::raw;
};

/// Scores (h, r, e) for candidate tails e under a trained model.
///
/// For the attention model every candidate gets its own subgraph in principle.
/// Only the target row depends on the candidate tail unless the tail is the
/// head of some subgraph triple (it then gains the target as a neighbor) or
/// (h, r, e) / its inverse is stored (the leakage guard changes N). All other
/// candidates share one base forward pass and only the target row is
/// recomputed, which gives the same scores as the per-candidate pass.
class TailScorer {
 public:
  TailScorer(const TripleStore& store, const Parameters<double>& params, const ModelConfig& config,
             ModelKind kind);

  /// Entry e holds the score of (head, relation, e).
  std::vector<double> score_tails(EntityId head, RelationId relation) const;
  /// Score from a freshly built subgraph for exactly this triple.
  double score(const Triple& triple) const;

  const TripleStore& store() const noexcept { return store_; }

 private:
  const TripleStore& store_;
  const Parameters<double>& params_;
  ModelConfig config_;
  ModelKind kind_;
  RelationTying tying_;
  std::vector<double> omega_;
};

/// Pessimistic rank of `test.tail` among `scores` (ascending, ties counted
/// against the true tail). The filtered rank skips candidates e != t with
/// (h, r, e) in `filter_set`.
RankResult rank_from_scores(const Triple& test, std::span<const double> scores,
                            const TripleSet& filter_set);

RankResult rank_tail(const Triple& test, const TailScorer& scorer, const TripleSet& filter_set);

MetricReport compute_metrics(std::span<const RankResult> ranks, RankSetting setting);

struct PlpOptions {
  /// Also rank heads through the inverse relation (t, r~inv, ?).
  bool head_side = false;
  unsigned workers = 1;
};

struct PlpReport {
  MetricReport raw;
  MetricReport filtered;
  std::vector<RankResult> ranks;
};

/// Partial link prediction over `split.test` with filter set
/// train + valid + test. `split.train` must be inverse-augmented when
/// `head_side` is set.
PlpReport run_plp(const Split& split, const Checkpoint& checkpoint, const ModelConfig& config,
                  const PlpOptions& options);

/// Filtered MRR of `triples` against `filter_set`.
double filtered_mrr(std::span<const Triple> triples, const TailScorer& scorer,
                    const TripleSet& filter_set, unsigned workers);

TripleSet make_filter_set(std::initializer_list<std::span<const Triple>> parts);

/// `metric<TAB>setting<TAB>value` lines.
std::string format_metrics(const PlpReport& report);
/// Header plus one row per setting: method, setting, MRR, Hit@10, Hit@3, Hit@1.
std::string format_metrics_table(const PlpReport& report, const std::string& method);

const char* to_string(RankSetting setting);

}  // namespace xkgat
