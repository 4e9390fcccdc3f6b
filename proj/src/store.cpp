#include "lowmt/store.hpp"

#include <cerrno>
#include <cstring>
#include <ctime>
#include <fstream>
#include <sstream>

#include <fcntl.h>
#include <sys/file.h>
#include <unistd.h>

#include "lowmt/error.hpp"
#include "lowmt/metrics.hpp"

namespace lowmt::store {

namespace fs = std::filesystem;
using humeval::AnnotationSession;
using humeval::SubmissionRecord;

namespace {

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::io, "cannot read " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

void write_all(int fd, const std::string& data, const fs::path& path) {
  std::size_t off = 0;
  while (off < data.size()) {
    const ssize_t n = ::write(fd, data.data() + off, data.size() - off);
    if (n < 0) {
      if (errno == EINTR) continue;
      throw Error(ErrorKind::io, "write to " + path.string() + " failed: " + std::strerror(errno));
    }
    off += static_cast<std::size_t>(n);
  }
  if (::fsync(fd) != 0) throw Error(ErrorKind::io, "fsync of " + path.string() + " failed");
}

void write_durable(const fs::path& path, const std::string& data) {
  const fs::path tmp = path.string() + ".tmp";
  const int fd = ::open(tmp.c_str(), O_WRONLY | O_CREAT | O_TRUNC | O_CLOEXEC, 0644);
  if (fd < 0) throw Error(ErrorKind::io, "cannot create " + tmp.string());
  try {
    write_all(fd, data, tmp);
  } catch (...) {
    ::close(fd);
    throw;
  }
  ::close(fd);
  fs::rename(tmp, path);
}

AnnotationSession load_definition(const fs::path& root) {
  const auto text = read_file(root / kSessionFile);
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::parse, (root / kSessionFile).string() + ": " + e.what());
  }
  return AnnotationSession::from_definition(j);
}

}  // namespace

ReplayResult replay(const AnnotationSession& definition, std::string_view log) {
  ReplayResult result{definition, 0, 0, false};
  std::size_t pos = 0;
  std::size_t line_no = 0;
  while (pos < log.size()) {
    const auto nl = log.find('\n', pos);
    if (nl == std::string_view::npos) {
      result.trailing_fragment = true;
      break;
    }
    ++line_no;
    const auto line = log.substr(pos, nl - pos);
    pos = nl + 1;
    if (line.find_first_not_of(" \t\r") == std::string_view::npos) {
      result.valid_bytes = pos;
      continue;
    }
    try {
      const auto record = humeval::submission_from_json(nlohmann::json::parse(line));
      result.session.apply(record);
    } catch (const nlohmann::json::exception& e) {
      throw Error(ErrorKind::parse, "log line " + std::to_string(line_no) + ": " + e.what());
    } catch (const Error& e) {
      throw Error(ErrorKind::parse, "log line " + std::to_string(line_no) + ": " + e.what());
    }
    ++result.records;
    result.valid_bytes = pos;
  }
  return result;
}

void CampaignStore::initialize(const fs::path& root, const AnnotationSession& session,
                               const std::vector<SubmissionRecord>& records) {
  if (fs::exists(root / kSessionFile)) {
    throw Error(ErrorKind::conflict, "a campaign already exists in " + root.string());
  }
  fs::create_directories(root);
  std::string log;
  for (const auto& r : records) log += humeval::to_json(r).dump() + "\n";
  write_durable(root / kLogFile, log);
  write_durable(root / kSessionFile, session.definition_json().dump(2) + "\n");
}

CampaignStore::CampaignStore(fs::path root, Mode mode) : root_(std::move(root)), mode_(mode) {}

CampaignStore::~CampaignStore() {
  if (log_fd_ >= 0) {
    ::fsync(log_fd_);
    ::close(log_fd_);
  }
  if (lock_fd_ >= 0) ::close(lock_fd_);
}

std::unique_ptr<CampaignStore> CampaignStore::open(const fs::path& root, Mode mode) {
  if (!fs::exists(root / kSessionFile)) throw Error(ErrorKind::not_found, "no campaign in " + root.string());
  std::unique_ptr<CampaignStore> store(new CampaignStore(root, mode));
  if (mode == Mode::writer) {
    const fs::path lock = root / kLockFile;
    store->lock_fd_ = ::open(lock.c_str(), O_RDWR | O_CREAT | O_CLOEXEC, 0644);
    if (store->lock_fd_ < 0) throw Error(ErrorKind::io, "cannot open " + lock.string());
    if (::flock(store->lock_fd_, LOCK_EX | LOCK_NB) != 0) {
      throw Error(ErrorKind::conflict, "campaign " + root.string() + " is locked by another writer");
    }
  }
  const auto definition = load_definition(root);
  const fs::path log_path = root / kLogFile;
  const std::string log = fs::exists(log_path) ? read_file(log_path) : std::string();
  auto replayed = replay(definition, log);
  if (mode == Mode::writer) {
    store->log_fd_ = ::open(log_path.c_str(), O_WRONLY | O_CREAT | O_APPEND | O_CLOEXEC, 0644);
    if (store->log_fd_ < 0) throw Error(ErrorKind::io, "cannot open " + log_path.string());
    if (replayed.trailing_fragment) {
      if (::ftruncate(store->log_fd_, static_cast<off_t>(replayed.valid_bytes)) != 0 || ::fsync(store->log_fd_) != 0) {
        throw Error(ErrorKind::io, "cannot truncate interrupted write in " + log_path.string());
      }
    }
  }
  store->session_ = std::move(replayed.session);
  store->records_ = replayed.records;
  return store;
}

std::size_t CampaignStore::record_count() const {
  std::lock_guard lock(mutex_);
  return records_;
}

AnnotationSession CampaignStore::snapshot() const {
  std::lock_guard lock(mutex_);
  return *session_;
}

SubmissionRecord CampaignStore::submit(const std::string& annotator, int segment,
                                       const std::vector<humeval::SlotSubmission>& slots) {
  if (mode_ != Mode::writer) throw Error(ErrorKind::conflict, "store opened read-only");
  std::lock_guard lock(mutex_);
  auto record = session_->prepare(annotator, segment, slots);
  record.timestamp = utc_timestamp();
  write_all(log_fd_, humeval::to_json(record).dump() + "\n", root_ / kLogFile);
  session_->apply(record);
  ++records_;
  return record;
}

std::optional<humeval::Task> CampaignStore::next(const std::string& annotator) const {
  std::lock_guard lock(mutex_);
  return humeval::next_task(*session_, annotator);
}

nlohmann::json CampaignStore::progress_json() const {
  std::lock_guard lock(mutex_);
  return store::progress_json(*session_);
}

nlohmann::json progress_json(const AnnotationSession& session) {
  const auto p = session.progress();
  nlohmann::json annotators = nlohmann::json::object();
  for (const auto& [id, counts] : p.per_annotator) annotators[id] = {{"done", counts.first}, {"total", counts.second}};
  return {{"done", p.done}, {"total", p.total}, {"complete", p.done == p.total}, {"annotators", annotators}};
}

nlohmann::json campaign_report(const AnnotationSession& session) {
  std::map<std::string, humeval::SystemMetrics> automatic;
  bool have_refs = true;
  for (const auto& seg : session.segments()) have_refs = have_refs && !seg.reference.empty();
  if (have_refs) {
    std::vector<std::string> refs;
    for (const auto& seg : session.segments()) refs.push_back(seg.reference);
    for (const auto& sys : session.systems()) {
      std::vector<std::string> hyps;
      for (const auto& seg : session.segments()) hyps.push_back(seg.outputs.at(sys));
      try {
        const auto m = metrics::evaluate_all(hyps, refs);
        automatic[sys] = {m.bleu.score, m.ter.score, m.chrf.score};
      } catch (const Error&) {
        automatic[sys] = {};
      }
    }
  }
  auto report = humeval::he_report(session, automatic, {.weights = {}, .require_complete = false});
  report["progress"] = progress_json(session);
  return report;
}

std::string render_report(const AnnotationSession& session, ReportFormat format) {
  const auto report = campaign_report(session);
  switch (format) {
    case ReportFormat::json: return report.dump(2) + "\n";
    case ReportFormat::tsv: return humeval::he_report_tsv(report);
    case ReportFormat::kappa: return humeval::kappa_table_tsv(report);
  }
  return {};
}

std::string utc_timestamp() {
  const std::time_t now = std::time(nullptr);
  std::tm tm{};
  ::gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

}  // namespace lowmt::store
