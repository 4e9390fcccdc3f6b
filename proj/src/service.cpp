#include "lowmt/service.hpp"

#include <cstdlib>
#include <thread>

#include <sys/socket.h>

#include <httplib.h>

#include "lowmt/error.hpp"

namespace lowmt::service {

namespace {

constexpr const char* kJson = "application/json";

void send_json(httplib::Response& res, int status, const nlohmann::json& body) {
  res.status = status;
  res.set_content(body.dump() + "\n", kJson);
}

void send_error(httplib::Response& res, const std::exception& e) {
  send_json(res, http_status(e), error_payload(e));
}

}  // namespace

BindAddress parse_bind(const std::string& text) {
  BindAddress bind;
  std::string port_text = text;
  if (const auto colon = text.rfind(':'); colon != std::string::npos) {
    if (colon > 0) bind.host = text.substr(0, colon);
    port_text = text.substr(colon + 1);
  }
  try {
    std::size_t used = 0;
    bind.port = std::stoi(port_text, &used);
    if (used != port_text.size() || bind.port < 0 || bind.port > 65535) throw std::out_of_range("port");
  } catch (const std::exception&) {
    throw Error(ErrorKind::configuration, "invalid bind address '" + text + "'");
  }
  return bind;
}

void apply_environment(BindAddress& bind, std::filesystem::path& store_root) {
  if (const char* b = std::getenv("LOWMT_BIND"); b != nullptr && *b != '\0') bind = parse_bind(b);
  if (const char* s = std::getenv("LOWMT_STORE"); s != nullptr && *s != '\0') store_root = s;
}

nlohmann::json error_payload(const std::exception& e) {
  nlohmann::json err = {{"message", e.what()}};
  if (const auto* v = dynamic_cast<const ValidationError*>(&e)) {
    err["kind"] = "validation";
    err["field"] = v->field();
  } else if (const auto* x = dynamic_cast<const Error*>(&e)) {
    err["kind"] = std::string(to_string(x->kind()));
  } else {
    err["kind"] = "internal";
  }
  return {{"error", err}};
}

int http_status(const std::exception& e) {
  const auto* x = dynamic_cast<const Error*>(&e);
  if (x == nullptr) return 500;
  switch (x->kind()) {
    case ErrorKind::not_found: return 404;
    case ErrorKind::conflict: return 409;
    case ErrorKind::validation: return 422;
    case ErrorKind::parse: return 400;
    default: return 500;
  }
}

namespace {

humeval::SlotSubmission parse_slot(const nlohmann::json& j) {
  humeval::SlotSubmission s;
  if (!j.contains("slot") || !j["slot"].is_string()) throw ValidationError("slot", "slot label is required");
  s.slot = j["slot"].get<std::string>();
  if (!j.contains("rating") || !j["rating"].is_number_integer()) {
    throw ValidationError("rating", "rating must be an integer from 0 to 6");
  }
  const auto rating = j["rating"].get<long long>();
  if (rating < humeval::kSqmMin || rating > humeval::kSqmMax) {
    throw ValidationError("rating", "rating must be an integer from 0 to 6, got " + std::to_string(rating));
  }
  s.rating = static_cast<int>(rating);
  if (j.contains("errors")) {
    if (!j["errors"].is_array()) throw ValidationError("errors", "errors must be a list");
    for (const auto& e : j["errors"]) {
      humeval::ErrorInput in;
      if (!e.is_object() || !e.contains("category") || !e["category"].is_string()) {
        throw ValidationError("category", "each error needs a category");
      }
      in.category = e["category"].get<std::string>();
      if (e.contains("severity") && !e["severity"].is_null()) {
        if (!e["severity"].is_string()) throw ValidationError("severity", "severity must be 'minor' or 'major'");
        in.severity = e["severity"].get<std::string>();
      }
      if (e.contains("span") && !e["span"].is_null()) {
        const auto& sp = e["span"];
        if (!sp.is_array() || sp.size() != 2 || !sp[0].is_number_unsigned() || !sp[1].is_number_unsigned()) {
          throw ValidationError("span", "span must be [start, end]");
        }
        in.span = humeval::Span{sp[0].get<std::size_t>(), sp[1].get<std::size_t>()};
      }
      s.errors.push_back(std::move(in));
    }
  }
  return s;
}

}  // namespace

std::pair<int, std::vector<humeval::SlotSubmission>> parse_submission_body(const std::string& body) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(body);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::parse, std::string("request body is not JSON: ") + e.what());
  }
  if (!j.is_object()) throw Error(ErrorKind::parse, "request body must be a JSON object");
  if (!j.contains("segment_id") || !j["segment_id"].is_number_integer()) {
    throw ValidationError("segment_id", "segment_id must be an integer");
  }
  const int segment = j["segment_id"].get<int>();
  std::vector<humeval::SlotSubmission> slots;
  if (j.contains("slots")) {
    if (!j["slots"].is_array() || j["slots"].empty()) throw ValidationError("slots", "slots must be a non-empty list");
    for (const auto& s : j["slots"]) slots.push_back(parse_slot(s));
  } else {
    slots.push_back(parse_slot(j));
  }
  return {segment, std::move(slots)};
}

struct AnnotationService::Impl {
  store::CampaignStore& store;
  ServiceOptions options;
  httplib::Server server;
  std::thread thread;
  int port = 0;

  Impl(store::CampaignStore& s, ServiceOptions o) : store(s), options(std::move(o)) {}
};

AnnotationService::AnnotationService(store::CampaignStore& store, ServiceOptions options)
    : impl_(std::make_unique<Impl>(store, std::move(options))) {
  auto& server = impl_->server;
  auto& st = impl_->store;

  // Exclusive binding: a second server on the same port must fail.
  server.set_socket_options([](socket_t sock) {
    int yes = 1;
    setsockopt(sock, SOL_SOCKET, SO_REUSEADDR, &yes, sizeof(yes));
  });
  server.set_exception_handler([](const httplib::Request&, httplib::Response& res, std::exception_ptr ep) {
    try {
      std::rethrow_exception(ep);
    } catch (const std::exception& e) {
      send_error(res, e);
    }
  });

  server.Get("/health", [](const httplib::Request&, httplib::Response& res) {
    send_json(res, 200, {{"status", "ok"}});
  });

  server.Get(R"(/annotators/([^/]+)/next)", [&st](const httplib::Request& req, httplib::Response& res) {
    const std::string annotator = req.matches[1];
    try {
      const auto task = st.next(annotator);
      if (!task) {
        const auto p = st.progress_json()["annotators"][annotator];
        send_json(res, 200, {{"status", "complete"}, {"progress", p}});
        return;
      }
      auto body = humeval::to_json(*task);
      body["status"] = "pending";
      send_json(res, 200, body);
    } catch (const std::exception& e) {
      send_error(res, e);
    }
  });

  server.Post(R"(/annotators/([^/]+)/submissions)", [&st](const httplib::Request& req, httplib::Response& res) {
    const std::string annotator = req.matches[1];
    try {
      const auto [segment, slots] = parse_submission_body(req.body);
      const auto record = st.submit(annotator, segment, slots);
      nlohmann::json accepted = nlohmann::json::array();
      for (const auto& u : record.units) accepted.push_back(u.slot);
      const auto p = st.progress_json()["annotators"][annotator];
      send_json(res, 201, {{"status", "accepted"}, {"segment_id", segment}, {"slots", accepted}, {"progress", p}});
    } catch (const std::exception& e) {
      send_error(res, e);
    }
  });

  server.Get("/report", [&st](const httplib::Request& req, httplib::Response& res) {
    try {
      auto format = store::ReportFormat::json;
      const auto f = req.get_param_value("format");
      if (f == "tsv") {
        format = store::ReportFormat::tsv;
      } else if (f == "kappa") {
        format = store::ReportFormat::kappa;
      } else if (!f.empty() && f != "json") {
        throw ValidationError("format", "format must be json, tsv or kappa");
      }
      res.status = 200;
      res.set_content(store::render_report(st.snapshot(), format),
                      format == store::ReportFormat::json ? kJson : "text/tab-separated-values");
    } catch (const std::exception& e) {
      send_error(res, e);
    }
  });

  server.Get("/progress", [&st](const httplib::Request&, httplib::Response& res) {
    send_json(res, 200, st.progress_json());
  });

  if (impl_->options.static_dir) {
    if (!server.set_mount_point("/", impl_->options.static_dir->string())) {
      throw Error(ErrorKind::startup, "static directory " + impl_->options.static_dir->string() + " not found");
    }
  }
}

AnnotationService::~AnnotationService() {
  stop();
}

void AnnotationService::start() {
  const auto& bind = impl_->options.bind;
  if (bind.port == 0) {
    impl_->port = impl_->server.bind_to_any_port(bind.host);
    if (impl_->port < 0) throw Error(ErrorKind::startup, "cannot bind " + bind.host);
  } else {
    if (!impl_->server.bind_to_port(bind.host, bind.port)) {
      throw Error(ErrorKind::startup, "cannot bind " + bind.host + ":" + std::to_string(bind.port));
    }
    impl_->port = bind.port;
  }
  impl_->thread = std::thread([this] { impl_->server.listen_after_bind(); });
  impl_->server.wait_until_ready();
}

void AnnotationService::wait() {
  if (impl_->thread.joinable()) impl_->thread.join();
}

void AnnotationService::stop() {
  if (!impl_) return;
  impl_->server.stop();
  if (impl_->thread.joinable()) impl_->thread.join();
}

int AnnotationService::port() const { return impl_->port; }

}  // namespace lowmt::service
