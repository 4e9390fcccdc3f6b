#pragma once

#include <filesystem>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "lowmt/humeval.hpp"

namespace lowmt::store {

inline constexpr const char* kSessionFile = "session.json";
inline constexpr const char* kLogFile = "annotations.jsonl";
inline constexpr const char* kLockFile = "writer.lock";

struct ReplayResult {
  humeval::AnnotationSession session;
  std::size_t records = 0;
  // Bytes of the log that belong to complete lines.
  std::size_t valid_bytes = 0;
  bool trailing_fragment = false;
};

// Rebuilds a session from its definition and a log image. A final line
// without a newline is an interrupted write and is ignored.
ReplayResult replay(const humeval::AnnotationSession& definition, std::string_view log);

// A campaign directory: versioned session definition plus an append-only
// JSONL log of accepted submissions. Opened as writer, the store holds an
// exclusive lock so only one process appends.
class CampaignStore {
 public:
  enum class Mode { reader, writer };

  static void initialize(const std::filesystem::path& root, const humeval::AnnotationSession& session,
                         const std::vector<humeval::SubmissionRecord>& records = {});
  static std::unique_ptr<CampaignStore> open(const std::filesystem::path& root, Mode mode);

  ~CampaignStore();
  CampaignStore(const CampaignStore&) = delete;
  CampaignStore& operator=(const CampaignStore&) = delete;

  const std::filesystem::path& root() const { return root_; }
  std::size_t record_count() const;

  humeval::AnnotationSession snapshot() const;

  // Validates, appends (fsync) and applies; the session changes only after
  // the line is durable.
  humeval::SubmissionRecord submit(const std::string& annotator, int segment,
                                   const std::vector<humeval::SlotSubmission>& slots);

  std::optional<humeval::Task> next(const std::string& annotator) const;
  nlohmann::json progress_json() const;

 private:
  CampaignStore(std::filesystem::path root, Mode mode);

  std::filesystem::path root_;
  Mode mode_;
  int lock_fd_ = -1;
  int log_fd_ = -1;
  mutable std::mutex mutex_;
  std::optional<humeval::AnnotationSession> session_;
  std::size_t records_ = 0;
};

nlohmann::json progress_json(const humeval::AnnotationSession& session);

// Report bundle for a (possibly partial) campaign. Automatic metrics are
// included when every segment has a reference.
nlohmann::json campaign_report(const humeval::AnnotationSession& session);

enum class ReportFormat { json, tsv, kappa };

// The exact bytes served over HTTP and printed by the CLI.
std::string render_report(const humeval::AnnotationSession& session, ReportFormat format);

std::string utc_timestamp();

}  // namespace lowmt::store
