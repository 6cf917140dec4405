#pragma once

#include <functional>
#include <map>
#include <memory>
#include <string>
#include <string_view>
#include <vector>

namespace swz {

enum class ClientMode { Live, Replay, Record };

struct ClientConfig {
  std::string endpoint;    // full URL of a chat-completions endpoint
  std::string credential;  // bearer token; only ever taken from the environment
  std::string model;
  double timeout_seconds = 60.0;
  int max_retries = 3;
  double backoff_base_seconds = 1.0;
  ClientMode mode = ClientMode::Live;
  std::string fixture_path;  // Replay and Record
};

// Reads COMPLETION_ENDPOINT, COMPLETION_API_KEY and COMPLETION_MODEL. Unset
// variables leave the fields empty.
ClientConfig config_from_env(ClientMode mode = ClientMode::Live, std::string fixture_path = {});

// Live and Record need endpoint, credential and model; Replay needs a
// readable fixture. Throws Error(InvalidArgument) or Error(Io).
void validate(const ClientConfig& config);

// Lowercase hex SHA-256 of the prompt bytes.
std::string prompt_digest(std::string_view prompt);

// Delay before retry i (0-based): base * 2^i.
std::vector<double> backoff_schedule(const ClientConfig& config);

struct HttpResult {
  int status = 0;  // 0 when no response arrived
  std::string body;
  bool timed_out = false;
  std::string error;  // transport-level failure description
};

class Transport {
 public:
  virtual ~Transport() = default;
  virtual HttpResult post(const std::string& url, const std::string& body,
                          const std::map<std::string, std::string>& headers, double timeout_seconds) = 0;
};

// HTTP(S) via cpp-httplib.
std::unique_ptr<Transport> make_http_transport();

using Sleeper = std::function<void(double seconds)>;

struct FixtureEntry {
  std::string prompt_digest;
  std::string prompt;  // optional, for reading fixtures by eye
  std::string response;
};

std::vector<FixtureEntry> load_fixture(const std::string& path);
void append_fixture(const std::string& path, const FixtureEntry& entry);

// Serializes its requests. In Replay mode the transport is never touched,
// and no transport is created unless one is passed in.
class CompletionClient {
 public:
  explicit CompletionClient(ClientConfig config, std::shared_ptr<Transport> transport = nullptr,
                            Sleeper sleeper = nullptr);

  // Live: first choice's message text. Replay: the next fixture entry, whose
  // digest must match. Throws Error(Timeout) or Error(Transport) once retries
  // run out, Error(DigestMismatch) or Error(Exhausted) in replay.
  std::string complete(const std::string& prompt);

  const ClientConfig& config() const { return config_; }
  int retries_performed() const { return retries_; }  // across all calls
  std::size_t replay_position() const { return replay_next_; }

 private:
  std::string complete_live(const std::string& prompt);

  ClientConfig config_;
  std::shared_ptr<Transport> transport_;
  Sleeper sleeper_;
  std::vector<FixtureEntry> replay_;
  std::size_t replay_next_ = 0;
  int retries_ = 0;
};

// Chat-completions request body and response extraction.
std::string chat_request_body(const std::string& model, const std::string& prompt);
std::string chat_response_text(const std::string& body);  // throws Error(Schema)

}  // namespace swz
