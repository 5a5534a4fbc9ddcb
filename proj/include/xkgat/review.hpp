#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <shared_mutex>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace xkgat {

using NamedTriple = std::array<std::string, 3>;

enum class Verdict { accept, reject };
enum class ReviewStatus { pending, accepted, rejected };
enum class PredictionSource { model, rule };

struct ReviewExplanation {
  std::vector<NamedTriple> path;
  double alpha = 0.0;
  std::optional<std::size_t> support;
};

struct Prediction {
  std::string id;
  NamedTriple triple;
  double score = 0.0;
  std::vector<ReviewExplanation> explanations;  // alpha descending
  PredictionSource source = PredictionSource::model;
  ReviewStatus status = ReviewStatus::pending;
};

/// 16 hex digits of FNV-1a 64 over "head\trelation\ttail".
std::string prediction_id(const NamedTriple& triple);

/// Left join of a predictions JSONL file with an explanations JSONL file on
/// triple identity. Duplicate predictions collapse to the first occurrence.
std::vector<Prediction> load_queue(const std::filesystem::path& predictions,
                                   const std::optional<std::filesystem::path>& explanations);

struct PredictionRecord {
  NamedTriple triple;
  double score = 0.0;
  PredictionSource source = PredictionSource::model;
};
std::string format_prediction_line(const PredictionRecord& record);

/// One line of the decision log.
struct LogRecord {
  enum class Type { decision, reopen };
  Type type = Type::decision;
  std::string prediction_id;
  Verdict verdict = Verdict::accept;  // decision records only
  std::string reviewer;
  std::int64_t timestamp = 0;  // UTC seconds
  std::int64_t elapsed_ms = 0;
};

/// Append-only JSON-lines log; every append is flushed to disk before it returns.
class DecisionLog {
 public:
  explicit DecisionLog(std::filesystem::path path);
  ~DecisionLog();
  DecisionLog(const DecisionLog&) = delete;
  DecisionLog& operator=(const DecisionLog&) = delete;

  void append(const LogRecord& record);
  const std::filesystem::path& path() const noexcept { return path_; }

  /// Records in file order. A torn final line (no trailing newline) is ignored.
  static std::vector<LogRecord> replay(const std::filesystem::path& path);

 private:
  std::filesystem::path path_;
  int fd_ = -1;
};

struct DecisionRequest {
  std::string prediction_id;
  Verdict verdict = Verdict::accept;
  std::string reviewer;
  std::int64_t elapsed_ms = 0;
};

enum class DecisionOutcome { recorded, duplicate, not_found, conflict };

struct ReviewStats {
  std::size_t total = 0;
  std::size_t pending = 0;
  std::size_t accepted = 0;
  std::size_t rejected = 0;
  std::size_t decisions = 0;
  std::optional<double> mean_elapsed_ms;
  /// Share of accepted predictions labeled correct, when labels are given.
  std::optional<double> accept_precision;
};

/// Statistics from the log alone: the last record per prediction decides its
/// status. `labels` maps prediction ids to ground truth.
ReviewStats stats_from_log(std::span<const LogRecord> records, std::size_t total,
                           const std::map<std::string, bool>* labels = nullptr,
                           const std::optional<std::string>& reviewer = std::nullopt);

class ReviewQueue {
 public:
  /// Replays `log_path` (if it exists) and keeps appending to it.
  ReviewQueue(std::vector<Prediction> predictions, const std::filesystem::path& log_path);

  struct Page {
    std::vector<Prediction> items;
    std::size_t total = 0;
  };
  /// Ordered by score ascending, then id.
  Page list(std::optional<ReviewStatus> status, std::size_t page, std::size_t page_size) const;

  struct Result {
    DecisionOutcome outcome;
    std::int64_t timestamp = 0;
  };
  Result record(const DecisionRequest& request);
  /// Returns a decided prediction to pending.
  DecisionOutcome reopen(const std::string& id, const std::string& reviewer);

  std::optional<Prediction> find(const std::string& id) const;
  std::string export_tsv() const;
  ReviewStats stats(const std::optional<std::string>& reviewer = std::nullopt) const;
  std::map<std::string, ReviewStatus> statuses() const;

 private:
  void apply(const LogRecord& record);
  std::int64_t next_timestamp();

  mutable std::shared_mutex mutex_;
  std::vector<Prediction> items_;  // sorted by (score, id)
  std::unordered_map<std::string, std::size_t> index_;
  std::map<std::string, LogRecord> last_decision_;
  std::vector<LogRecord> records_;
  std::unique_ptr<DecisionLog> log_;
  std::int64_t last_timestamp_ = 0;
};

/// HTTP front end: the JSON API under /api plus static files from `static_dir`.
class ReviewServer {
 public:
  ReviewServer(ReviewQueue& queue, std::optional<std::filesystem::path> static_dir);
  ~ReviewServer();

  /// Binds to `port` (0 picks a free port) and returns the bound port.
  int bind(const std::string& host, int port);
  /// Serves until stop() is called.
  void listen();
  void stop();

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

const char* to_string(Verdict v);
const char* to_string(ReviewStatus s);
const char* to_string(PredictionSource s);
std::optional<Verdict> parse_verdict(std::string_view s);
std::optional<ReviewStatus> parse_status(std::string_view s);

}  // namespace xkgat
