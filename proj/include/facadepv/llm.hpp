#pragma once

#include <chrono>
#include <cstddef>
#include <deque>
#include <map>
#include <memory>
#include <mutex>
#include <semaphore>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "facadepv/facade.hpp"
#include "facadepv/layout.hpp"

namespace facadepv {

struct PromptBundle {
  std::string system_role;
  std::string task_text;
  std::map<std::string, std::string> placeholders;
};

/// Renders the describe -> transcribe -> partition -> qualify template for
/// one facade. Throws MissingScale when the facade has no metric block.
PromptBundle build_prompt(const FacadeDescription& facade, const LayoutConstraints& c);

/// True when `text` still holds a {placeholder} marker.
bool has_unresolved_placeholder(std::string_view text);

struct LlmConfig {
  std::string endpoint_url = "http://127.0.0.1:8080/v1/chat/completions";
  std::string model_name = "gpt-4";
  std::string auth_header = "Authorization";
  std::string auth_token_env = "FACADEPV_LLM_TOKEN";  // token read from this variable
  double temperature = 0.0;
  int max_tokens = 1000;
  int max_attempts = 6;
  double timeout_s = 120.0;
  int max_in_flight = 4;

  void validate() const;
};

struct ChatRequest {
  std::string model;
  std::string system;
  std::string user;
  double temperature = 0.0;
  int max_tokens = 1000;
};

nlohmann::json chat_request_body(const ChatRequest& request);
/// choices[0].message.content of a chat-completion response body.
std::string chat_response_content(std::string_view body);

/// Returns the assistant message text or throws TransportError.
class ChatTransport {
 public:
  virtual ~ChatTransport() = default;
  virtual std::string complete(const ChatRequest& request) = 0;
};

/// POSTs {model, messages[system, user], temperature, max_tokens} to the
/// configured endpoint.
class HttpChatTransport final : public ChatTransport {
 public:
  explicit HttpChatTransport(LlmConfig config);
  std::string complete(const ChatRequest& request) override;

 private:
  LlmConfig config_;
  std::string scheme_host_port_;
  std::string path_;
  std::string token_;
};

/// Scripted responder: replies with the given bodies in order. A body equal
/// to kTransportFailure raises TransportError instead. Throws TransportError
/// once the script is exhausted.
class MockTransport final : public ChatTransport {
 public:
  static constexpr std::string_view kTransportFailure = "<transport-error>";

  explicit MockTransport(std::vector<std::string> script);
  /// Script file: a JSON array of response strings.
  static std::vector<std::string> load_script(const std::string& path);

  std::string complete(const ChatRequest& request) override;
  std::size_t calls() const;
  std::vector<ChatRequest> requests() const;

 private:
  mutable std::mutex mutex_;
  std::deque<std::string> script_;
  std::vector<ChatRequest> seen_;
};

/// Caps concurrent requests through a shared inner transport.
class ThrottledTransport final : public ChatTransport {
 public:
  ThrottledTransport(ChatTransport& inner, int max_in_flight);
  std::string complete(const ChatRequest& request) override;

 private:
  ChatTransport& inner_;
  std::counting_semaphore<1024> slots_;
};

/// Extracts the first JSON object containing "installable_rectangles".
/// Surrounding prose and code fences are ignored. Throws MalformedResponse
/// when no such object exists and SchemaViolation for a bad entry.
std::vector<BoundingBox> parse_layout(std::string_view response_text);

enum class ViolationKind { OverlapsObstruction, OverlapsSibling, OutOfBounds, BelowMinimumSize };
std::string_view to_string(ViolationKind k) noexcept;

struct Violation {
  ViolationKind kind;
  std::size_t index;  // offending rectangle
  std::size_t other;  // obstruction or sibling index where relevant
  std::string describe() const;
};

using ValidationOutcome = std::variant<LayoutResult, std::vector<Violation>>;

/// Accepts iff rectangles are pairwise disjoint, avoid every obstruction,
/// lie within the wall and pass qualify. Accepted layouts carry provenance
/// LlmValidated.
ValidationOutcome validate_layout(std::span<const BoundingBox> rects, const FacadeDescription& facade,
                                  const LayoutConstraints& c);

struct AttemptFailure {
  int attempt;  // 1-based
  std::size_t wall;
  std::string reason;
};

struct ReasoningOutcome {
  std::optional<LayoutResult> layout;
  int attempts_used = 0;     // max over walls, <= max_attempts
  int requests_sent = 0;     // total over walls
  bool fell_back = false;
  std::vector<AttemptFailure> failure_log;
};

/// build -> send -> parse -> validate, up to max_attempts per wall. Retries
/// append a one-line note naming the previous failure. Walls that exhaust
/// their attempts fall back to the deterministic layout; if every wall does,
/// the result is exactly deterministic_layout(facade).
ReasoningOutcome reason_layout(const FacadeDescription& facade, const LayoutConstraints& c, const LlmConfig& cfg,
                               ChatTransport& transport);

}  // namespace facadepv
