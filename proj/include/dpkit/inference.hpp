#pragma once

#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "dpkit/core.hpp"

namespace dpkit::infer {

struct EndpointError : Error {
  EndpointError(int status, const std::string& what)
      : Error("endpoint returned " + std::to_string(status) + ": " + what), status(status) {}
  int status;
};
struct Timeout : Error {
  using Error::Error;
};
struct RetriesExhausted : Error {
  using Error::Error;
};

struct Sampling {
  double temperature = 0.35;
  double top_p = 0.9;
  int top_k = 20;
  int max_tokens = 1024;
};

// Optional decoration applied around the user text before sending, for
// models that expect an instruction block. Replay-style mocks key on the
// text as sent, so fixtures must be produced with the same wrapper.
struct PromptWrapper {
  std::string prefix;
  std::string suffix;
};

struct EndpointProfile {
  std::string base_url = "http://127.0.0.1:8000";
  std::string model_name = "local";
  Sampling sampling;
  std::optional<PromptWrapper> prompt_wrapper;
  std::string auth_token;       // sent as a bearer header when non-empty
  double timeout_seconds = 60.0;
  int max_retries = 2;          // attempts = max_retries + 1
  int max_in_flight = 8;
  int backoff_base_ms = 250;    // doubled per attempt, jittered
  std::string env_prefix = "DPKIT";
};

// Overrides base_url / auth_token / model_name from <PREFIX>_BASE_URL,
// <PREFIX>_AUTH_TOKEN and <PREFIX>_MODEL when those variables are set.
EndpointProfile apply_env(EndpointProfile profile);

struct CompletionRequest {
  std::string system;
  std::string user_text;
  // Shared prefix (system + task description + knowledge) used for grouping;
  // not sent over the wire.
  std::string prefix;
  std::optional<double> temperature;
  std::optional<double> top_p;
  std::optional<int> top_k;
  std::optional<int> max_tokens;
};

struct CompletionResponse {
  std::string text;
  std::string finish_reason;
  long latency_ms = 0;
  int attempts = 1;
};

struct CompletionOutcome {
  std::optional<CompletionResponse> response;
  std::string error;
  bool ok() const { return response.has_value(); }
};

class Client {
 public:
  explicit Client(EndpointProfile profile);
  ~Client();
  Client(const Client&) = delete;
  Client& operator=(const Client&) = delete;

  const EndpointProfile& profile() const { return profile_; }

  // One request, retried on transient failure (connect errors, timeouts,
  // 408/429/5xx) with exponential backoff. Non-transient 4xx throws
  // EndpointError at once.
  CompletionResponse complete(const CompletionRequest& request) const;

  // Many requests with at most max_in_flight in flight; results come back
  // in request order and failures are captured per item instead of thrown.
  std::vector<CompletionOutcome> complete_many(const std::vector<CompletionRequest>& requests) const;

 private:
  struct Impl;
  EndpointProfile profile_;
  std::unique_ptr<Impl> impl_;
};

// Stable partition by byte-identical prefix: groups appear in first-seen
// order and keep the input order of their members, so flattening contiguous
// input blocks reproduces the input.
std::vector<std::vector<std::size_t>> batch_by_prefix(const std::vector<CompletionRequest>& requests);

}  // namespace dpkit::infer
