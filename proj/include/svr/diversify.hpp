#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <string_view>
#include <vector>

#include "svr/annotate.hpp"

namespace svr {

struct RewriteRequest {
  std::string image_ref;
  std::string compact_metadata;
  std::string original_text;
  std::uint64_t style_seed = 0;
  /// Encoded PNG, sent only when the endpoint asks for image attachment.
  std::vector<std::uint8_t> image_png;
};

enum class TeacherMode { mock, http };

const char* to_string(TeacherMode mode);
TeacherMode parse_teacher_mode(std::string_view text);

struct TeacherEndpointConfig {
  TeacherMode mode = TeacherMode::mock;
  /// Scheme, host and optional port, e.g. "https://api.example.com".
  std::string base_url = "http://127.0.0.1:8000";
  std::string path = "/v1/chat/completions";
  std::string model = "teacher";
  /// Name of the environment variable holding the bearer token. The token
  /// itself never appears in configuration.
  std::string token_env = "SVR_TEACHER_TOKEN";
  double timeout_seconds = 30.0;
  int max_retries = 2;
  double temperature = 0.7;
  /// JSON pointer to the completion text in the response body.
  std::string response_pointer = "/choices/0/message/content";
  bool attach_image = false;
  int max_in_flight = 4;

  void validate() const;
};

/// Marker prepended by the mock teacher.
inline constexpr std::string_view kMockRewritePrefix = "[mock-rewrite] ";

struct RewriteMessages {
  std::string system;
  std::string user;
};

/// Teacher system prompt and the user prompt with metadata and template
/// substituted.
RewriteMessages build_rewrite_messages(const RewriteRequest& request);

/// Chat-completion request body for the endpoint.
std::string build_request_body(const RewriteRequest& request, const TeacherEndpointConfig& config);

/// Completion text at the configured pointer; empty when the body is not
/// JSON, the path is missing, or the value is not a string.
std::string extract_completion(std::string_view body, std::string_view pointer);

enum class ViolationKind { missing_mention, contradiction, eye_term, label_token };

const char* to_string(ViolationKind kind);

struct Violation {
  ViolationKind kind;
  std::string detail;
};

/// Lexical check that `text` mentions every present pathology, does not
/// assert absent ones without a negation in the same sentence, avoids
/// eye-dependent direction terms, and carries no diagnosis label.
std::vector<Violation> verify_fact_preservation(const SampleMetadata& metadata,
                                                std::string_view text);

struct RewriteResult {
  std::string text;
  bool fallback = false;
  int attempts = 0;
  /// Why the template was kept; empty on success.
  std::string failure;
};

/// Rewrites template reasoning through the configured teacher. Transport
/// failures are retried up to `max_retries` times; after that, or when the
/// rewrite fails verification, the original text is returned with the
/// fallback flag set. Safe to call from several threads.
class TeacherClient {
 public:
  explicit TeacherClient(TeacherEndpointConfig config);
  ~TeacherClient();
  TeacherClient(const TeacherClient&) = delete;
  TeacherClient& operator=(const TeacherClient&) = delete;

  const TeacherEndpointConfig& config() const { return config_; }

  RewriteResult rewrite(const RewriteRequest& request, const SampleMetadata& metadata);

 private:
  struct Limiter;

  TeacherEndpointConfig config_;
  std::unique_ptr<Limiter> limiter_;
};

/// Fixed pool of rewordings of the training question.
const std::vector<std::string>& question_paraphrases();

/// Paraphrase chosen by seed when diversifying, otherwise the training
/// question.
std::string_view question_for_sample(std::uint64_t seed, bool diversify);

}  // namespace svr
