#include "xkgat/review.hpp"

#include <fcntl.h>
#include <unistd.h>

#include <algorithm>
#include <cerrno>
#include <chrono>
#include <cstring>
#include <fstream>
#include <set>

#include "xkgat/kg_store.hpp"

#include <httplib.h>
#include <json.hpp>

namespace xkgat {

using nlohmann::json;

const char* to_string(Verdict v) { return v == Verdict::accept ? "accept" : "reject"; }

const char* to_string(ReviewStatus s) {
  switch (s) {
    case ReviewStatus::pending: return "pending";
    case ReviewStatus::accepted: return "accepted";
    case ReviewStatus::rejected: return "rejected";
  }
  return "pending";
}

const char* to_string(PredictionSource s) { return s == PredictionSource::model ? "model" : "rule"; }

std::optional<Verdict> parse_verdict(std::string_view s) {
  if (s == "accept") return Verdict::accept;
  if (s == "reject") return Verdict::reject;
  return std::nullopt;
}

std::optional<ReviewStatus> parse_status(std::string_view s) {
  if (s == "pending") return ReviewStatus::pending;
  if (s == "accepted") return ReviewStatus::accepted;
  if (s == "rejected") return ReviewStatus::rejected;
  return std::nullopt;
}

std::string prediction_id(const NamedTriple& triple) {
  std::uint64_t hash = 0xcbf29ce484222325ULL;
  auto feed = [&](std::string_view s) {
    for (unsigned char c : s) {
      hash ^= c;
      hash *= 0x100000001b3ULL;
    }
  };
  feed(triple[0]);
  feed("\t");
  feed(triple[1]);
  feed("\t");
  feed(triple[2]);
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(hash));
  return buf;
}

namespace {

NamedTriple named_triple(const json& j) {
  if (!j.is_array() || j.size() != 3) throw DataError("triple must be a 3-element array");
  return {j[0].get<std::string>(), j[1].get<std::string>(), j[2].get<std::string>()};
}

json triple_json(const NamedTriple& t) { return json::array({t[0], t[1], t[2]}); }

json prediction_json(const Prediction& p) {
  json explanations = json::array();
  for (const auto& e : p.explanations) {
    json path = json::array();
    for (const auto& t : e.path) path.push_back(triple_json(t));
    explanations.push_back({{"path", path},
                            {"alpha", e.alpha},
                            {"support", e.support ? json(*e.support) : json()}});
  }
  return {{"id", p.id},
          {"head", p.triple[0]},
          {"relation", p.triple[1]},
          {"tail", p.triple[2]},
          {"score", p.score},
          {"source", to_string(p.source)},
          {"status", to_string(p.status)},
          {"explanations", explanations}};
}

json record_json(const LogRecord& r) {
  json j = {{"type", r.type == LogRecord::Type::decision ? "decision" : "reopen"},
            {"prediction_id", r.prediction_id},
            {"reviewer", r.reviewer},
            {"timestamp", r.timestamp}};
  if (r.type == LogRecord::Type::decision) {
    j["verdict"] = to_string(r.verdict);
    j["elapsed_ms"] = r.elapsed_ms;
  }
  return j;
}

LogRecord record_from_json(const json& j) {
  LogRecord r;
  const auto type = j.at("type").get<std::string>();
  if (type == "decision") {
    r.type = LogRecord::Type::decision;
    const auto verdict = parse_verdict(j.at("verdict").get<std::string>());
    if (!verdict) throw DataError("unknown verdict");
    r.verdict = *verdict;
    r.elapsed_ms = j.at("elapsed_ms").get<std::int64_t>();
  } else if (type == "reopen") {
    r.type = LogRecord::Type::reopen;
  } else {
    throw DataError("unknown record type '" + type + "'");
  }
  r.prediction_id = j.at("prediction_id").get<std::string>();
  r.reviewer = j.at("reviewer").get<std::string>();
  r.timestamp = j.at("timestamp").get<std::int64_t>();
  return r;
}

}  // namespace

std::string format_prediction_line(const PredictionRecord& record) {
  const json j = {{"head", record.triple[0]},
                  {"relation", record.triple[1]},
                  {"tail", record.triple[2]},
                  {"score", record.score},
                  {"source", to_string(record.source)}};
  return j.dump();
}

std::vector<Prediction> load_queue(const std::filesystem::path& predictions,
                                   const std::optional<std::filesystem::path>& explanations) {
  std::map<NamedTriple, std::vector<ReviewExplanation>> by_target;
  if (explanations) {
    const auto lines = read_lines(*explanations);
    for (std::size_t i = 0; i < lines.size(); ++i) {
      if (lines[i].empty()) continue;
      try {
        const auto j = json::parse(lines[i]);
        ReviewExplanation e;
        for (const auto& t : j.at("path")) e.path.push_back(named_triple(t));
        e.alpha = j.at("alpha").get<double>();
        if (j.contains("support") && !j.at("support").is_null()) {
          e.support = j.at("support").get<std::size_t>();
        }
        by_target[named_triple(j.at("target"))].push_back(std::move(e));
      } catch (const json::exception& ex) {
        throw ParseError(explanations->string(), i + 1, ex.what());
      } catch (const DataError& ex) {
        throw ParseError(explanations->string(), i + 1, ex.what());
      }
    }
  }
  std::vector<Prediction> out;
  std::set<std::string> seen;
  const auto lines = read_lines(predictions);
  for (std::size_t i = 0; i < lines.size(); ++i) {
    if (lines[i].empty()) continue;
    Prediction p;
    try {
      const auto j = json::parse(lines[i]);
      p.triple = {j.at("head").get<std::string>(), j.at("relation").get<std::string>(),
                  j.at("tail").get<std::string>()};
      p.score = j.at("score").get<double>();
      const auto source = j.value("source", std::string("model"));
      if (source != "model" && source != "rule") throw DataError("unknown source '" + source + "'");
      p.source = source == "rule" ? PredictionSource::rule : PredictionSource::model;
    } catch (const json::exception& ex) {
      throw ParseError(predictions.string(), i + 1, ex.what());
    } catch (const DataError& ex) {
      throw ParseError(predictions.string(), i + 1, ex.what());
    }
    p.id = prediction_id(p.triple);
    if (!seen.insert(p.id).second) continue;
    if (auto it = by_target.find(p.triple); it != by_target.end()) {
      p.explanations = it->second;
      std::stable_sort(p.explanations.begin(), p.explanations.end(),
                       [](const auto& a, const auto& b) { return a.alpha > b.alpha; });
    }
    out.push_back(std::move(p));
  }
  return out;
}

// ---------------------------------------------------------------------------

DecisionLog::DecisionLog(std::filesystem::path path) : path_(std::move(path)) {
  if (path_.has_parent_path()) std::filesystem::create_directories(path_.parent_path());
  fd_ = ::open(path_.c_str(), O_WRONLY | O_CREAT | O_APPEND | O_CLOEXEC, 0644);
  if (fd_ < 0) {
    throw DataError("cannot open decision log " + path_.string() + ": " + std::strerror(errno));
  }
}

DecisionLog::~DecisionLog() {
  if (fd_ >= 0) ::close(fd_);
}

void DecisionLog::append(const LogRecord& record) {
  const std::string line = record_json(record).dump() + "\n";
  std::size_t written = 0;
  while (written < line.size()) {
    const auto n = ::write(fd_, line.data() + written, line.size() - written);
    if (n < 0) {
      if (errno == EINTR) continue;
      throw std::runtime_error("decision log write failed: " + std::string(std::strerror(errno)));
    }
    written += static_cast<std::size_t>(n);
  }
  if (::fsync(fd_) != 0) {
    throw std::runtime_error("decision log fsync failed: " + std::string(std::strerror(errno)));
  }
}

std::vector<LogRecord> DecisionLog::replay(const std::filesystem::path& path) {
  std::vector<LogRecord> out;
  if (!std::filesystem::exists(path)) return out;
  std::ifstream in(path, std::ios::binary);
  const std::string content((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  std::size_t start = 0;
  std::size_t line_no = 0;
  while (start < content.size()) {
    const auto end = content.find('\n', start);
    if (end == std::string::npos) break;  // torn write
    ++line_no;
    const std::string line = content.substr(start, end - start);
    start = end + 1;
    if (line.empty()) continue;
    try {
      out.push_back(record_from_json(json::parse(line)));
    } catch (const json::exception& ex) {
      throw ParseError(path.string(), line_no, ex.what());
    } catch (const DataError& ex) {
      throw ParseError(path.string(), line_no, ex.what());
    }
  }
  return out;
}

ReviewStats stats_from_log(std::span<const LogRecord> records, std::size_t total,
                           const std::map<std::string, bool>* labels,
                           const std::optional<std::string>& reviewer) {
  std::map<std::string, const LogRecord*> last;
  ReviewStats stats;
  stats.total = total;
  double elapsed = 0.0;
  for (const auto& r : records) {
    if (r.type == LogRecord::Type::reopen) {
      last.erase(r.prediction_id);
      continue;
    }
    last[r.prediction_id] = &r;
    if (reviewer && r.reviewer != *reviewer) continue;
    ++stats.decisions;
    elapsed += static_cast<double>(r.elapsed_ms);
  }
  if (stats.decisions > 0) stats.mean_elapsed_ms = elapsed / static_cast<double>(stats.decisions);
  std::size_t labeled = 0;
  std::size_t correct = 0;
  std::size_t decided = 0;
  for (const auto& [id, r] : last) {
    ++decided;
    if (reviewer && r->reviewer != *reviewer) continue;
    if (r->verdict == Verdict::accept) {
      ++stats.accepted;
      if (labels) {
        if (auto it = labels->find(id); it != labels->end()) {
          ++labeled;
          correct += it->second ? 1 : 0;
        }
      }
    } else {
      ++stats.rejected;
    }
  }
  stats.pending = total >= decided ? total - decided : 0;
  if (labeled > 0) stats.accept_precision = static_cast<double>(correct) / static_cast<double>(labeled);
  return stats;
}

// ---------------------------------------------------------------------------

ReviewQueue::ReviewQueue(std::vector<Prediction> predictions, const std::filesystem::path& log_path)
    : items_(std::move(predictions)) {
  std::sort(items_.begin(), items_.end(), [](const Prediction& a, const Prediction& b) {
    if (a.score != b.score) return a.score < b.score;
    return a.id < b.id;
  });
  for (std::size_t i = 0; i < items_.size(); ++i) {
    if (!index_.emplace(items_[i].id, i).second) {
      throw DataError("duplicate prediction id " + items_[i].id);
    }
  }
  for (auto& r : DecisionLog::replay(log_path)) {
    if (!index_.contains(r.prediction_id)) continue;
    apply(r);
    last_timestamp_ = std::max(last_timestamp_, r.timestamp);
    records_.push_back(std::move(r));
  }
  log_ = std::make_unique<DecisionLog>(log_path);
}

void ReviewQueue::apply(const LogRecord& r) {
  auto& item = items_[index_.at(r.prediction_id)];
  if (r.type == LogRecord::Type::reopen) {
    item.status = ReviewStatus::pending;
    last_decision_.erase(r.prediction_id);
    return;
  }
  item.status = r.verdict == Verdict::accept ? ReviewStatus::accepted : ReviewStatus::rejected;
  last_decision_[r.prediction_id] = r;
}

std::int64_t ReviewQueue::next_timestamp() {
  const auto now = std::chrono::duration_cast<std::chrono::seconds>(
                       std::chrono::system_clock::now().time_since_epoch())
                       .count();
  last_timestamp_ = std::max<std::int64_t>(last_timestamp_, now);
  return last_timestamp_;
}

ReviewQueue::Page ReviewQueue::list(std::optional<ReviewStatus> status, std::size_t page,
                                    std::size_t page_size) const {
  std::shared_lock lock(mutex_);
  Page out;
  const std::size_t first = page * page_size;
  for (const auto& p : items_) {
    if (status && p.status != *status) continue;
    if (out.total >= first && out.items.size() < page_size) out.items.push_back(p);
    ++out.total;
  }
  return out;
}

ReviewQueue::Result ReviewQueue::record(const DecisionRequest& request) {
  if (request.reviewer.empty()) throw DataError("reviewer must not be empty");
  if (request.elapsed_ms < 0) throw DataError("elapsed_ms must be >= 0");
  std::unique_lock lock(mutex_);
  auto it = index_.find(request.prediction_id);
  if (it == index_.end()) return {DecisionOutcome::not_found};
  if (items_[it->second].status != ReviewStatus::pending) {
    const auto& previous = last_decision_.at(request.prediction_id);
    if (previous.verdict == request.verdict && previous.reviewer == request.reviewer) {
      return {DecisionOutcome::duplicate, previous.timestamp};
    }
    return {DecisionOutcome::conflict, previous.timestamp};
  }
  LogRecord r;
  r.type = LogRecord::Type::decision;
  r.prediction_id = request.prediction_id;
  r.verdict = request.verdict;
  r.reviewer = request.reviewer;
  r.elapsed_ms = request.elapsed_ms;
  r.timestamp = next_timestamp();
  log_->append(r);
  apply(r);
  records_.push_back(r);
  return {DecisionOutcome::recorded, r.timestamp};
}

DecisionOutcome ReviewQueue::reopen(const std::string& id, const std::string& reviewer) {
  std::unique_lock lock(mutex_);
  auto it = index_.find(id);
  if (it == index_.end()) return DecisionOutcome::not_found;
  if (items_[it->second].status == ReviewStatus::pending) return DecisionOutcome::duplicate;
  LogRecord r;
  r.type = LogRecord::Type::reopen;
  r.prediction_id = id;
  r.reviewer = reviewer;
  r.timestamp = next_timestamp();
  log_->append(r);
  apply(r);
  records_.push_back(r);
  return DecisionOutcome::recorded;
}

std::optional<Prediction> ReviewQueue::find(const std::string& id) const {
  std::shared_lock lock(mutex_);
  auto it = index_.find(id);
  if (it == index_.end()) return std::nullopt;
  return items_[it->second];
}

std::string ReviewQueue::export_tsv() const {
  std::shared_lock lock(mutex_);
  std::string out;
  for (const auto& p : items_) {
    if (p.status != ReviewStatus::accepted) continue;
    out += p.triple[0] + "\t" + p.triple[1] + "\t" + p.triple[2] + "\n";
  }
  return out;
}

ReviewStats ReviewQueue::stats(const std::optional<std::string>& reviewer) const {
  std::shared_lock lock(mutex_);
  return stats_from_log(records_, items_.size(), nullptr, reviewer);
}

std::map<std::string, ReviewStatus> ReviewQueue::statuses() const {
  std::shared_lock lock(mutex_);
  std::map<std::string, ReviewStatus> out;
  for (const auto& p : items_) out.emplace(p.id, p.status);
  return out;
}

// ---------------------------------------------------------------------------

struct ReviewServer::Impl {
  ReviewQueue& queue;
  httplib::Server server;

  explicit Impl(ReviewQueue& q) : queue(q) {}
};

namespace {

void reply(httplib::Response& res, int status, const json& body) {
  res.status = status;
  res.set_content(body.dump(), "application/json");
}

void reply_error(httplib::Response& res, int status, const std::string& message) {
  reply(res, status, json{{"error", message}});
}

std::optional<std::size_t> parse_size(const std::string& s) {
  if (s.empty() || s.size() > 9) return std::nullopt;
  std::size_t v = 0;
  for (char c : s) {
    if (c < '0' || c > '9') return std::nullopt;
    v = v * 10 + static_cast<std::size_t>(c - '0');
  }
  return v;
}

json stats_json(const ReviewStats& s) {
  return {{"total", s.total},
          {"pending", s.pending},
          {"accepted", s.accepted},
          {"rejected", s.rejected},
          {"decisions", s.decisions},
          {"mean_elapsed_ms", s.mean_elapsed_ms ? json(*s.mean_elapsed_ms) : json()}};
}

}  // namespace

ReviewServer::ReviewServer(ReviewQueue& queue, std::optional<std::filesystem::path> static_dir)
    : impl_(std::make_unique<Impl>(queue)) {
  auto& server = impl_->server;
  auto& q = impl_->queue;

  server.Get("/api/predictions", [&q](const httplib::Request& req, httplib::Response& res) {
    std::optional<ReviewStatus> status;
    const auto status_text = req.get_param_value("status");
    if (!status_text.empty() && status_text != "all") {
      status = parse_status(status_text);
      if (!status) return reply_error(res, 400, "unknown status '" + status_text + "'");
    }
    std::size_t page = 0;
    std::size_t page_size = 20;
    if (req.has_param("page")) {
      auto v = parse_size(req.get_param_value("page"));
      if (!v) return reply_error(res, 400, "page must be a nonnegative integer");
      page = *v;
    }
    if (req.has_param("page_size")) {
      auto v = parse_size(req.get_param_value("page_size"));
      if (!v || *v < 1 || *v > 1000) return reply_error(res, 400, "page_size must be in [1, 1000]");
      page_size = *v;
    }
    const auto result = q.list(status, page, page_size);
    json items = json::array();
    for (const auto& p : result.items) items.push_back(prediction_json(p));
    reply(res, 200, {{"total", result.total}, {"page", page}, {"page_size", page_size}, {"items", items}});
  });

  server.Post("/api/decisions", [&q](const httplib::Request& req, httplib::Response& res) {
    DecisionRequest request;
    try {
      const auto body = json::parse(req.body);
      request.prediction_id = body.at("prediction_id").get<std::string>();
      const auto verdict = parse_verdict(body.at("verdict").get<std::string>());
      if (!verdict) return reply_error(res, 400, "verdict must be accept or reject");
      request.verdict = *verdict;
      request.reviewer = body.at("reviewer").get<std::string>();
      request.elapsed_ms = body.value("elapsed_ms", std::int64_t{0});
    } catch (const json::exception& ex) {
      return reply_error(res, 400, std::string("malformed decision: ") + ex.what());
    }
    if (request.reviewer.empty()) return reply_error(res, 400, "reviewer must not be empty");
    if (request.elapsed_ms < 0) return reply_error(res, 400, "elapsed_ms must be >= 0");
    const auto result = q.record(request);
    switch (result.outcome) {
      case DecisionOutcome::not_found:
        return reply_error(res, 404, "unknown prediction id " + request.prediction_id);
      case DecisionOutcome::conflict:
        return reply_error(res, 409, "prediction " + request.prediction_id + " is already decided");
      case DecisionOutcome::recorded:
      case DecisionOutcome::duplicate:
        return reply(res, 200,
                     {{"prediction_id", request.prediction_id},
                      {"status", result.outcome == DecisionOutcome::recorded ? "recorded" : "duplicate"},
                      {"timestamp", result.timestamp}});
    }
  });

  server.Get("/api/export", [&q](const httplib::Request& req, httplib::Response& res) {
    const auto format = req.get_param_value("format");
    if (!format.empty() && format != "tsv") return reply_error(res, 400, "only format=tsv is supported");
    res.status = 200;
    res.set_content(q.export_tsv(), "text/tab-separated-values");
  });

  server.Get("/api/stats", [&q](const httplib::Request& req, httplib::Response& res) {
    std::optional<std::string> reviewer;
    if (req.has_param("reviewer")) reviewer = req.get_param_value("reviewer");
    reply(res, 200, stats_json(q.stats(reviewer)));
  });

  if (static_dir && std::filesystem::is_directory(*static_dir)) {
    server.set_mount_point("/", static_dir->string());
  }
}

ReviewServer::~ReviewServer() = default;

int ReviewServer::bind(const std::string& host, int port) {
  if (port == 0) {
    const int bound = impl_->server.bind_to_any_port(host);
    if (bound < 0) throw std::runtime_error("cannot bind " + host);
    return bound;
  }
  if (!impl_->server.bind_to_port(host, port)) {
    throw std::runtime_error("cannot bind " + host + ":" + std::to_string(port));
  }
  return port;
}

void ReviewServer::listen() { impl_->server.listen_after_bind(); }

void ReviewServer::stop() { impl_->server.stop(); }

}  // namespace xkgat
