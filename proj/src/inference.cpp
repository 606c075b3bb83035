#include "dpkit/inference.hpp"

#include <atomic>
#include <chrono>
#include <cstdlib>
#include <mutex>
#include <random>
#include <semaphore>
#include <thread>
#include <unordered_map>

#include <httplib.h>
#include <nlohmann/json.hpp>

namespace dpkit::infer {

namespace {

using nlohmann::json;

std::optional<std::string> env_var(const std::string& name) {
  const char* v = std::getenv(name.c_str());
  if (!v || !*v) return std::nullopt;
  return std::string(v);
}

bool transient_status(int status) {
  return status == 408 || status == 429 || status >= 500;
}

}  // namespace

EndpointProfile apply_env(EndpointProfile profile) {
  if (auto v = env_var(profile.env_prefix + "_BASE_URL")) profile.base_url = *v;
  if (auto v = env_var(profile.env_prefix + "_AUTH_TOKEN")) profile.auth_token = *v;
  if (auto v = env_var(profile.env_prefix + "_MODEL")) profile.model_name = *v;
  return profile;
}

struct Client::Impl {
  explicit Impl(const EndpointProfile& p)
      : gate(p.max_in_flight > 0 ? p.max_in_flight : 1), rng(std::random_device{}()) {}

  std::counting_semaphore<4096> gate;
  std::mutex rng_mutex;
  std::mt19937_64 rng;

  int jitter_ms(int upper) {
    if (upper <= 0) return 0;
    std::lock_guard<std::mutex> lock(rng_mutex);
    return int(rng() % std::uint64_t(upper + 1));
  }
};

Client::Client(EndpointProfile profile)
    : profile_(std::move(profile)), impl_(std::make_unique<Impl>(profile_)) {}

Client::~Client() = default;

CompletionResponse Client::complete(const CompletionRequest& request) const {
  json body;
  body["model"] = profile_.model_name;
  std::string user_text = request.user_text;
  if (profile_.prompt_wrapper)
    user_text = profile_.prompt_wrapper->prefix + user_text + profile_.prompt_wrapper->suffix;
  body["messages"] = json::array();
  if (!request.system.empty())
    body["messages"].push_back({{"role", "system"}, {"content", request.system}});
  body["messages"].push_back({{"role", "user"}, {"content", user_text}});
  body["temperature"] = request.temperature.value_or(profile_.sampling.temperature);
  body["top_p"] = request.top_p.value_or(profile_.sampling.top_p);
  body["top_k"] = request.top_k.value_or(profile_.sampling.top_k);
  body["max_tokens"] = request.max_tokens.value_or(profile_.sampling.max_tokens);
  const std::string payload = body.dump();

  httplib::Headers headers;
  if (!profile_.auth_token.empty())
    headers.emplace("Authorization", "Bearer " + profile_.auth_token);

  const int attempts_allowed = profile_.max_retries + 1;
  std::string last_error;
  bool last_was_timeout = false;
  auto started = std::chrono::steady_clock::now();

  for (int attempt = 1; attempt <= attempts_allowed; ++attempt) {
    if (attempt > 1) {
      int delay = profile_.backoff_base_ms;
      for (int i = 2; i < attempt; ++i) delay *= 2;
      delay += impl_->jitter_ms(delay / 4);
      std::this_thread::sleep_for(std::chrono::milliseconds(delay));
    }

    impl_->gate.acquire();
    httplib::Client cli(profile_.base_url);
    auto secs = std::chrono::duration<double>(profile_.timeout_seconds);
    cli.set_connection_timeout(std::chrono::duration_cast<std::chrono::milliseconds>(secs));
    cli.set_read_timeout(std::chrono::duration_cast<std::chrono::milliseconds>(secs));
    cli.set_write_timeout(std::chrono::duration_cast<std::chrono::milliseconds>(secs));
    auto res = cli.Post("/v1/chat/completions", headers, payload, "application/json");
    impl_->gate.release();

    if (!res) {
      auto err = res.error();
      last_was_timeout = err == httplib::Error::ConnectionTimeout || err == httplib::Error::Read ||
                         err == httplib::Error::Write;
      last_error = "transport error: " + httplib::to_string(err);
      continue;
    }
    if (res->status != 200) {
      if (!transient_status(res->status))
        throw EndpointError(res->status, res->body.substr(0, 200));
      last_was_timeout = false;
      last_error = "status " + std::to_string(res->status);
      continue;
    }

    json parsed;
    try {
      parsed = json::parse(res->body);
    } catch (const json::exception& e) {
      last_error = std::string("bad response body: ") + e.what();
      continue;
    }
    if (!parsed.contains("choices") || !parsed["choices"].is_array() || parsed["choices"].empty()) {
      last_error = "response missing choices";
      continue;
    }
    const auto& choice = parsed["choices"][0];
    CompletionResponse out;
    out.text = choice.value("message", json::object()).value("content", std::string());
    out.finish_reason = choice.value("finish_reason", std::string());
    out.attempts = attempt;
    out.latency_ms = long(std::chrono::duration_cast<std::chrono::milliseconds>(
                              std::chrono::steady_clock::now() - started)
                              .count());
    return out;
  }

  if (last_was_timeout)
    throw Timeout("request timed out after " + std::to_string(attempts_allowed) +
                  " attempts: " + last_error);
  throw RetriesExhausted("gave up after " + std::to_string(attempts_allowed) +
                         " attempts: " + last_error);
}

std::vector<CompletionOutcome> Client::complete_many(
    const std::vector<CompletionRequest>& requests) const {
  std::vector<CompletionOutcome> results(requests.size());
  if (requests.empty()) return results;
  std::atomic<std::size_t> next{0};
  int workers = std::max(1, std::min<int>(profile_.max_in_flight, int(requests.size())));

  auto run = [&]() {
    while (true) {
      std::size_t i = next.fetch_add(1);
      if (i >= requests.size()) return;
      try {
        results[i].response = complete(requests[i]);
      } catch (const std::exception& e) {
        results[i].error = e.what();
      }
    }
  };

  std::vector<std::thread> pool;
  pool.reserve(std::size_t(workers));
  for (int w = 0; w < workers; ++w) pool.emplace_back(run);
  for (auto& t : pool) t.join();
  return results;
}

std::vector<std::vector<std::size_t>> batch_by_prefix(
    const std::vector<CompletionRequest>& requests) {
  std::vector<std::vector<std::size_t>> groups;
  std::unordered_map<std::string, std::size_t> seen;
  for (std::size_t i = 0; i < requests.size(); ++i) {
    auto [it, inserted] = seen.emplace(requests[i].prefix, groups.size());
    if (inserted) groups.emplace_back();
    groups[it->second].push_back(i);
  }
  return groups;
}

}  // namespace dpkit::infer
