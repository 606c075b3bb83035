#pragma once

#include <memory>
#include <string>
#include <unordered_map>
#include <vector>

#include "dpkit/core.hpp"

namespace dpkit::mock {

struct BindError : Error {
  using Error::Error;
};

enum class Mode { Echo, Replay, Rule };

// Deterministic chat-completion backend for tests and offline runs.
//   echo   - answers with the user message verbatim
//   replay - answers from a prompt-hash -> text map (fixture transcripts)
//   rule   - like replay but the map carries rendered gold labels, so the
//            backend behaves as a perfect model
// Replay and rule keys come from util::prompt_hash(system, user) over the
// exact message contents received, so client-side prompt wrappers must
// match whatever produced the map.
struct MockConfig {
  Mode mode = Mode::Echo;
  std::unordered_map<std::string, std::string> responses;  // replay/rule map
  bool fallback_no = false;  // unknown replay prompt: true -> "No", false -> 404
  int fail_first = 0;        // serve this many 500s before behaving
  int delay_ms = 0;          // per-request handler sleep, for concurrency tests
  bool record_bodies = false;
};

class MockServer {
 public:
  explicit MockServer(MockConfig config);
  ~MockServer();
  MockServer(const MockServer&) = delete;
  MockServer& operator=(const MockServer&) = delete;

  // Binds 127.0.0.1:<port> (0 picks a free port) and serves on a background
  // thread. Returns the bound port. Throws BindError when the bind fails.
  int start(int port = 0);
  void stop();
  bool running() const;

  int port() const { return port_; }
  std::string base_url() const;

  long request_count() const;
  int peak_concurrency() const;
  void reset_counters();
  std::vector<std::string> recorded_bodies() const;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
  int port_ = 0;
};

// Convenience for building rule maps: hash of (system, user) -> answer.
void add_rule(MockConfig& config, const std::string& system, const std::string& user,
              const std::string& answer);

}  // namespace dpkit::mock
