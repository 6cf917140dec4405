#include "swizzle/llm_client.hpp"

#include <chrono>
#include <cstdlib>
#include <fstream>
#include <regex>
#include <thread>

#include <httplib.h>
#include <json.hpp>
#include <openssl/sha.h>

#include "swizzle/error.hpp"

namespace swz {

namespace {

std::string env_or_empty(const char* name) {
  const char* v = std::getenv(name);
  return v ? v : "";
}

class HttpTransport : public Transport {
 public:
  HttpResult post(const std::string& url, const std::string& body, const std::map<std::string, std::string>& headers,
                  double timeout_seconds) override {
    static const std::regex kUrl(R"(^(https?://[^/]+)(/.*)?$)");
    std::smatch m;
    if (!std::regex_match(url, m, kUrl)) throw Error(ErrorKind::InvalidArgument, "bad endpoint URL '" + url + "'");
    httplib::Client cli(m[1].str());
    const auto total = static_cast<std::int64_t>(timeout_seconds * 1e6);
    const time_t sec = static_cast<time_t>(total / 1000000), usec = static_cast<time_t>(total % 1000000);
    cli.set_connection_timeout(sec, usec);
    cli.set_read_timeout(sec, usec);
    cli.set_write_timeout(sec, usec);
    httplib::Headers h;
    for (const auto& [k, v] : headers) h.emplace(k, v);
    const std::string path = m[2].matched ? m[2].str() : "/";
    auto res = cli.Post(path, h, body, "application/json");
    HttpResult out;
    if (!res) {
      out.timed_out = res.error() == httplib::Error::ConnectionTimeout || res.error() == httplib::Error::Read;
      out.error = httplib::to_string(res.error());
      return out;
    }
    out.status = res->status;
    out.body = res->body;
    return out;
  }
};

}  // namespace

ClientConfig config_from_env(ClientMode mode, std::string fixture_path) {
  ClientConfig c;
  c.endpoint = env_or_empty("COMPLETION_ENDPOINT");
  c.credential = env_or_empty("COMPLETION_API_KEY");
  c.model = env_or_empty("COMPLETION_MODEL");
  c.mode = mode;
  c.fixture_path = std::move(fixture_path);
  return c;
}

void validate(const ClientConfig& c) {
  if (c.max_retries < 0) throw Error(ErrorKind::InvalidArgument, "max_retries must be >= 0");
  if (c.timeout_seconds <= 0) throw Error(ErrorKind::InvalidArgument, "timeout must be positive");
  if (c.backoff_base_seconds < 0) throw Error(ErrorKind::InvalidArgument, "backoff base must be >= 0");
  if (c.mode != ClientMode::Replay) {
    if (c.endpoint.empty()) throw Error(ErrorKind::InvalidArgument, "COMPLETION_ENDPOINT is not set");
    if (c.credential.empty()) throw Error(ErrorKind::InvalidArgument, "COMPLETION_API_KEY is not set");
    if (c.model.empty()) throw Error(ErrorKind::InvalidArgument, "COMPLETION_MODEL is not set");
  }
  if (c.mode != ClientMode::Live && c.fixture_path.empty())
    throw Error(ErrorKind::InvalidArgument, "replay and record need a fixture path");
  if (c.mode == ClientMode::Replay && !std::ifstream(c.fixture_path))
    throw Error(ErrorKind::Io, "cannot read fixture '" + c.fixture_path + "'");
}

std::string prompt_digest(std::string_view prompt) {
  unsigned char md[SHA256_DIGEST_LENGTH];
  SHA256(reinterpret_cast<const unsigned char*>(prompt.data()), prompt.size(), md);
  static const char* kHex = "0123456789abcdef";
  std::string out;
  for (unsigned char b : md) {
    out += kHex[b >> 4];
    out += kHex[b & 15];
  }
  return out;
}

std::vector<double> backoff_schedule(const ClientConfig& c) {
  std::vector<double> out;
  double d = c.backoff_base_seconds;
  for (int i = 0; i < c.max_retries; ++i, d *= 2) out.push_back(d);
  return out;
}

std::unique_ptr<Transport> make_http_transport() { return std::make_unique<HttpTransport>(); }

std::vector<FixtureEntry> load_fixture(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::Io, "cannot read fixture '" + path + "'");
  std::vector<FixtureEntry> out;
  std::string line;
  int n = 0;
  while (std::getline(in, line)) {
    ++n;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      const auto j = nlohmann::json::parse(line);
      FixtureEntry e;
      e.prompt_digest = j.at("prompt_digest").get<std::string>();
      e.response = j.at("response").get<std::string>();
      if (j.contains("prompt")) e.prompt = j["prompt"].get<std::string>();
      out.push_back(std::move(e));
    } catch (const nlohmann::json::exception& ex) {
      throw Error(ErrorKind::Schema, path + ":" + std::to_string(n) + ": " + ex.what());
    }
  }
  return out;
}

void append_fixture(const std::string& path, const FixtureEntry& e) {
  std::ofstream out(path, std::ios::app);
  nlohmann::ordered_json j;
  j["prompt_digest"] = e.prompt_digest;
  if (!e.prompt.empty()) j["prompt"] = e.prompt;
  j["response"] = e.response;
  out << j.dump() << '\n';
  out.flush();
  if (!out) throw Error(ErrorKind::Io, "cannot append to fixture '" + path + "'");
}

std::string chat_request_body(const std::string& model, const std::string& prompt) {
  nlohmann::ordered_json j;
  j["model"] = model;
  j["messages"] = nlohmann::ordered_json::array({{{"role", "user"}, {"content", prompt}}});
  return j.dump();
}

std::string chat_response_text(const std::string& body) {
  try {
    const auto j = nlohmann::json::parse(body);
    return j.at("choices").at(0).at("message").at("content").get<std::string>();
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::Schema, std::string("unexpected completion response: ") + e.what());
  }
}

CompletionClient::CompletionClient(ClientConfig config, std::shared_ptr<Transport> transport, Sleeper sleeper)
    : config_(std::move(config)), transport_(std::move(transport)), sleeper_(std::move(sleeper)) {
  validate(config_);
  if (config_.mode == ClientMode::Replay) {
    replay_ = load_fixture(config_.fixture_path);
    return;
  }
  if (!transport_) transport_ = make_http_transport();
  if (!sleeper_)
    sleeper_ = [](double s) { std::this_thread::sleep_for(std::chrono::duration<double>(s)); };
}

std::string CompletionClient::complete(const std::string& prompt) {
  const std::string digest = prompt_digest(prompt);
  if (config_.mode == ClientMode::Replay) {
    if (replay_next_ >= replay_.size())
      throw Error(ErrorKind::Exhausted, "replay fixture exhausted after " + std::to_string(replay_.size()) + " entries");
    const FixtureEntry& e = replay_[replay_next_];
    if (e.prompt_digest != digest)
      throw Error(ErrorKind::DigestMismatch, "replay entry " + std::to_string(replay_next_) + " was recorded for prompt " +
                                                 e.prompt_digest + ", got " + digest);
    ++replay_next_;
    return e.response;
  }
  std::string text = complete_live(prompt);
  if (config_.mode == ClientMode::Record) append_fixture(config_.fixture_path, {digest, prompt, text});
  return text;
}

std::string CompletionClient::complete_live(const std::string& prompt) {
  const std::map<std::string, std::string> headers = {{"Authorization", "Bearer " + config_.credential}};
  const std::string body = chat_request_body(config_.model, prompt);
  const auto delays = backoff_schedule(config_);
  for (int attempt = 0;; ++attempt) {
    const HttpResult r = transport_->post(config_.endpoint, body, headers, config_.timeout_seconds);
    if (r.status >= 200 && r.status < 300) return chat_response_text(r.body);
    if (attempt >= config_.max_retries) {
      const std::string tries = " after " + std::to_string(attempt + 1) + " attempts";
      if (r.timed_out) throw Error(ErrorKind::Timeout, "completion request timed out" + tries);
      if (r.status == 0) throw Error(ErrorKind::Transport, "completion request failed (" + r.error + ")" + tries);
      throw Error(ErrorKind::Transport, "completion endpoint returned status " + std::to_string(r.status) + tries);
    }
    sleeper_(delays[static_cast<std::size_t>(attempt)]);
    ++retries_;
  }
}

}  // namespace swz
