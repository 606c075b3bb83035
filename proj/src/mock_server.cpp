#include "dpkit/mock_server.hpp"

#include <atomic>
#include <chrono>
#include <mutex>
#include <thread>

#include <httplib.h>
#include <nlohmann/json.hpp>

#include "dpkit/util.hpp"

namespace dpkit::mock {

namespace {
using nlohmann::json;
}

struct MockServer::Impl {
  explicit Impl(MockConfig cfg) : config(std::move(cfg)), fail_remaining(config.fail_first) {}

  MockConfig config;
  httplib::Server server;
  std::thread thread;

  std::atomic<long> requests{0};
  std::atomic<int> in_flight{0};
  std::atomic<int> peak{0};
  std::atomic<int> fail_remaining;
  mutable std::mutex bodies_mutex;
  std::vector<std::string> bodies;

  void handle(const httplib::Request& req, httplib::Response& res) {
    requests.fetch_add(1);
    int now = in_flight.fetch_add(1) + 1;
    int seen = peak.load();
    while (now > seen && !peak.compare_exchange_weak(seen, now)) {
    }
    if (config.delay_ms > 0)
      std::this_thread::sleep_for(std::chrono::milliseconds(config.delay_ms));

    if (config.record_bodies) {
      std::lock_guard<std::mutex> lock(bodies_mutex);
      bodies.push_back(req.body);
    }

    if (fail_remaining.load() > 0 && fail_remaining.fetch_sub(1) > 0) {
      res.status = 500;
      res.set_content("injected failure", "text/plain");
      in_flight.fetch_sub(1);
      return;
    }

    json body;
    try {
      body = json::parse(req.body);
    } catch (const json::exception&) {
      res.status = 400;
      res.set_content("bad json", "text/plain");
      in_flight.fetch_sub(1);
      return;
    }

    std::string system, user;
    for (const auto& msg : body.value("messages", json::array())) {
      std::string role = msg.value("role", "");
      if (role == "system") system = msg.value("content", "");
      if (role == "user") user = msg.value("content", "");
    }

    std::string answer;
    bool found = true;
    switch (config.mode) {
      case Mode::Echo:
        answer = user;
        break;
      case Mode::Replay:
      case Mode::Rule: {
        auto it = config.responses.find(util::prompt_hash(system, user));
        if (it != config.responses.end()) {
          answer = it->second;
        } else if (config.fallback_no) {
          answer = "No";
        } else {
          found = false;
        }
        break;
      }
    }

    if (!found) {
      res.status = 404;
      res.set_content("no fixture for prompt", "text/plain");
    } else {
      json reply = {{"choices",
                     json::array({{{"message", {{"role", "assistant"}, {"content", answer}}},
                                   {"finish_reason", "stop"}}})}};
      res.set_content(reply.dump(), "application/json");
    }
    in_flight.fetch_sub(1);
  }
};

MockServer::MockServer(MockConfig config) : impl_(std::make_unique<Impl>(std::move(config))) {}

MockServer::~MockServer() { stop(); }

int MockServer::start(int port) {
  auto* impl = impl_.get();
  impl->server.new_task_queue = [] { return new httplib::ThreadPool(32); };
  impl->server.Post("/v1/chat/completions",
                    [impl](const httplib::Request& req, httplib::Response& res) {
                      impl->handle(req, res);
                    });
  impl->server.Get("/health", [](const httplib::Request&, httplib::Response& res) {
    res.set_content("ok", "text/plain");
  });

  if (port == 0) {
    port_ = impl->server.bind_to_any_port("127.0.0.1");
    if (port_ <= 0) throw BindError("could not bind to a free port on 127.0.0.1");
  } else {
    if (!impl->server.bind_to_port("127.0.0.1", port))
      throw BindError("could not bind 127.0.0.1:" + std::to_string(port));
    port_ = port;
  }

  impl->thread = std::thread([impl] { impl->server.listen_after_bind(); });
  for (int i = 0; i < 200 && !impl->server.is_running(); ++i)
    std::this_thread::sleep_for(std::chrono::milliseconds(5));
  if (!impl->server.is_running()) throw BindError("server did not come up");
  return port_;
}

void MockServer::stop() {
  if (!impl_) return;
  if (impl_->server.is_running()) impl_->server.stop();
  if (impl_->thread.joinable()) impl_->thread.join();
}

bool MockServer::running() const { return impl_ && impl_->server.is_running(); }

std::string MockServer::base_url() const { return "http://127.0.0.1:" + std::to_string(port_); }

long MockServer::request_count() const { return impl_->requests.load(); }

int MockServer::peak_concurrency() const { return impl_->peak.load(); }

void MockServer::reset_counters() {
  impl_->requests.store(0);
  impl_->peak.store(0);
}

std::vector<std::string> MockServer::recorded_bodies() const {
  std::lock_guard<std::mutex> lock(impl_->bodies_mutex);
  return impl_->bodies;
}

void add_rule(MockConfig& config, const std::string& system, const std::string& user,
              const std::string& answer) {
  config.responses[util::prompt_hash(system, user)] = answer;
}

}  // namespace dpkit::mock
