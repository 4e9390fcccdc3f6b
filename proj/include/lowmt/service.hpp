#pragma once

#include <filesystem>
#include <memory>
#include <optional>
#include <string>

#include <nlohmann/json.hpp>

#include "lowmt/store.hpp"

namespace lowmt::service {

struct BindAddress {
  std::string host = "127.0.0.1";
  int port = 8080;
};

// "host:port", ":port" or "port".
BindAddress parse_bind(const std::string& text);

struct ServiceOptions {
  BindAddress bind;
  std::optional<std::filesystem::path> static_dir;
};

// Applies LOWMT_BIND and LOWMT_STORE over flag values.
void apply_environment(BindAddress& bind, std::filesystem::path& store_root);

nlohmann::json error_payload(const std::exception& e);
int http_status(const std::exception& e);

// Parses a submission body: either a single slot
//   {"segment_id":1,"slot":"A","rating":4,"errors":[...]}
// or a batch {"segment_id":1,"slots":[{"slot":"A",...},...]}.
std::pair<int, std::vector<humeval::SlotSubmission>> parse_submission_body(const std::string& body);

class AnnotationService {
 public:
  AnnotationService(store::CampaignStore& store, ServiceOptions options);
  ~AnnotationService();

  // Binds the socket and starts serving on a background thread. Throws a
  // startup error when the address cannot be bound.
  void start();
  // Blocks until stop() is called.
  void wait();
  void stop();
  int port() const;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace lowmt::service
