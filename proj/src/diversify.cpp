#include "svr/diversify.hpp"

#include <httplib.h>
#include <openssl/evp.h>

#include <algorithm>
#include <cctype>
#include <chrono>
#include <cstdlib>
#include <semaphore>
#include <stdexcept>

#include "svr/growth.hpp"
#include "svr/random.hpp"

namespace svr {

namespace {

constexpr std::string_view kSystemPrompt =
    "You are an ophthalmology OCTA expert and skilled medical writer.\n"
    "You will receive an OCTA image, concise metadata, and an original\n"
    "chain-of-thought (CoT). Rewrite the CoT in a different language\n"
    "style while preserving ALL medical facts, locations, and uncertainty.\n"
    "Do not add new findings. Keep content consistent with the image and\n"
    "metadata. Spatial terminology constraint: avoid eye-dependent terms\n"
    "(e.g., temporal, nasal, superotemporal, inferonasal, superior/inferior\n"
    "when tied to eye laterality). Use only absolute image directions such\n"
    "as left, right, up, down, and center to describe locations.\n"
    "Aim for similar length and clarity. Output only the rewritten CoT.";

constexpr std::string_view kUserPrompt =
    "Here is an OCTA image <image>.\n"
    "Metadata (JSON): <COMPACT_METADATA_JSON>\n"
    "\n"
    "Original CoT describing the image:\n"
    "<ORIGINAL_COT>\n"
    "\n"
    "Task: Rewrite the CoT with a distinct language style (e.g., more\n"
    "academic, more succinct, or slightly conversational) while preserving\n"
    "all facts and spatial relations. Do not invent new content.\n"
    "Use only absolute image directions such as left, right, up, down, and center.\n"
    "Return only the rewritten CoT.";

void replace_once(std::string& text, std::string_view placeholder, std::string_view value) {
  const auto at = text.find(placeholder);
  if (at != std::string::npos) text.replace(at, placeholder.size(), value);
}

std::string lower(std::string_view text) {
  std::string out(text);
  for (char& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return out;
}

std::vector<std::string> words(std::string_view text) {
  std::vector<std::string> out;
  std::string current;
  for (char c : text) {
    // Apostrophes inside a word are kept so contractions stay whole.
    if (std::isalnum(static_cast<unsigned char>(c)) || (c == '\'' && !current.empty())) {
      current += c;
    } else if (!current.empty()) {
      out.push_back(std::move(current));
      current.clear();
    }
  }
  if (!current.empty()) out.push_back(std::move(current));
  return out;
}

/// Splits at '.', '!', '?' or ';' followed by whitespace or the end, so
/// decimals such as "0.24" stay intact.
std::vector<std::string> sentences(std::string_view text) {
  std::vector<std::string> out;
  std::size_t start = 0;
  for (std::size_t i = 0; i < text.size(); ++i) {
    const char c = text[i];
    if (c != '.' && c != '!' && c != '?' && c != ';') continue;
    if (i + 1 < text.size() && !std::isspace(static_cast<unsigned char>(text[i + 1]))) continue;
    out.emplace_back(text.substr(start, i + 1 - start));
    start = i + 1;
  }
  if (start < text.size()) out.emplace_back(text.substr(start));
  return out;
}

struct TermGroup {
  const char* name;
  std::vector<std::string> stems;
};

const std::vector<TermGroup>& term_groups() {
  static const std::vector<TermGroup> groups{
      {"dropout", {"dropout", "drop-out", "non-perfusion", "nonperfusion", "capillary loss"}},
      {"microaneurysm", {"microaneurysm"}},
      {"neovascularization", {"neovascular"}},
      {"tortuosity", {"tortuosity", "tortuous"}},
  };
  return groups;
}

bool mentions(const std::string& lowered, const TermGroup& group) {
  return std::any_of(group.stems.begin(), group.stems.end(),
                     [&](const std::string& s) { return lowered.find(s) != std::string::npos; });
}

bool has_negation(const std::string& lowered_sentence) {
  static const std::vector<std::string> cues{"no",   "not",   "without", "absent", "absence",
                                             "none", "neither", "nor",   "free",   "lack"};
  for (const auto& w : words(lowered_sentence))
    if (std::find(cues.begin(), cues.end(), w) != cues.end() || w.ends_with("n't")) return true;
  return false;
}

bool present(const SampleMetadata& m, std::size_t group) {
  switch (group) {
    case 0: return !m.dropout.empty();
    case 1: return !m.microaneurysms.empty();
    case 2: return !m.neovascularization.empty();
    default: return m.tortuosity.present();
  }
}

std::string base64(const std::vector<std::uint8_t>& bytes) {
  std::string out(4 * ((bytes.size() + 2) / 3), '\0');
  const int n = EVP_EncodeBlock(reinterpret_cast<unsigned char*>(out.data()), bytes.data(),
                                static_cast<int>(bytes.size()));
  out.resize(static_cast<std::size_t>(n));
  return out;
}

std::string trim(std::string_view text) {
  const auto first = text.find_first_not_of(" \t\r\n");
  if (first == std::string_view::npos) return {};
  const auto last = text.find_last_not_of(" \t\r\n");
  return std::string(text.substr(first, last - first + 1));
}

}  // namespace

const char* to_string(TeacherMode mode) { return mode == TeacherMode::mock ? "mock" : "http"; }

TeacherMode parse_teacher_mode(std::string_view text) {
  if (text == "mock") return TeacherMode::mock;
  if (text == "http") return TeacherMode::http;
  throw ConfigError("teacher.mode must be \"mock\" or \"http\"");
}

void TeacherEndpointConfig::validate() const {
  if (!(timeout_seconds > 0.0)) throw ConfigError("teacher.timeout_seconds must be positive");
  if (max_retries < 0) throw ConfigError("teacher.max_retries must be non-negative");
  if (max_in_flight < 1) throw ConfigError("teacher.max_in_flight must be at least 1");
  if (!(temperature >= 0.0)) throw ConfigError("teacher.temperature must be non-negative");
  if (mode == TeacherMode::http && base_url.empty()) throw ConfigError("teacher.base_url is empty");
  if (!response_pointer.empty() && response_pointer.front() != '/')
    throw ConfigError("teacher.response_pointer must start with '/'");
}

RewriteMessages build_rewrite_messages(const RewriteRequest& request) {
  RewriteMessages messages{std::string(kSystemPrompt), std::string(kUserPrompt)};
  replace_once(messages.user, "<COMPACT_METADATA_JSON>", request.compact_metadata);
  replace_once(messages.user, "<ORIGINAL_COT>", request.original_text);
  return messages;
}

std::string build_request_body(const RewriteRequest& request, const TeacherEndpointConfig& config) {
  const auto messages = build_rewrite_messages(request);
  nlohmann::json user_content = messages.user;
  if (config.attach_image && !request.image_png.empty()) {
    user_content = nlohmann::json::array(
        {{{"type", "text"}, {"text", messages.user}},
         {{"type", "image_url"},
          {"image_url", {{"url", "data:image/png;base64," + base64(request.image_png)}}}}});
  }
  const nlohmann::json body{
      {"model", config.model},
      {"temperature", config.temperature},
      {"messages",
       {{{"role", "system"}, {"content", messages.system}}, {{"role", "user"}, {"content", user_content}}}}};
  return body.dump();
}

std::string extract_completion(std::string_view body, std::string_view pointer) {
  const auto doc = nlohmann::json::parse(body, nullptr, false);
  if (doc.is_discarded()) return {};
  try {
    const auto& value = doc.at(nlohmann::json::json_pointer(std::string(pointer)));
    return value.is_string() ? value.get<std::string>() : std::string();
  } catch (const nlohmann::json::exception&) {
    return {};
  }
}

const char* to_string(ViolationKind kind) {
  switch (kind) {
    case ViolationKind::missing_mention: return "missing_mention";
    case ViolationKind::contradiction: return "contradiction";
    case ViolationKind::eye_term: return "eye_term";
    case ViolationKind::label_token: return "label_token";
  }
  return "";
}

std::vector<Violation> verify_fact_preservation(const SampleMetadata& metadata,
                                                std::string_view text) {
  std::vector<Violation> violations;
  const std::string lowered = lower(text);
  const auto& groups = term_groups();

  for (std::size_t g = 0; g < groups.size(); ++g) {
    if (present(metadata, g)) {
      if (!mentions(lowered, groups[g]))
        violations.push_back({ViolationKind::missing_mention, groups[g].name});
      continue;
    }
    for (const auto& sentence : sentences(lowered)) {
      if (mentions(sentence, groups[g]) && !has_negation(sentence))
        violations.push_back({ViolationKind::contradiction, groups[g].name + std::string(": ") + trim(sentence)});
    }
  }

  for (const auto& term : eye_dependent_terms())
    if (lowered.find(term) != std::string::npos) violations.push_back({ViolationKind::eye_term, term});

  for (const auto& w : words(text))
    if (w == "Healthy" || w == "NPDR" || w == "PDR") violations.push_back({ViolationKind::label_token, w});

  return violations;
}

struct TeacherClient::Limiter {
  explicit Limiter(int n) : slots(n) {}
  std::counting_semaphore<1024> slots;
};

TeacherClient::TeacherClient(TeacherEndpointConfig config) : config_(std::move(config)) {
  config_.validate();
  limiter_ = std::make_unique<Limiter>(std::min(config_.max_in_flight, 1024));
}

TeacherClient::~TeacherClient() = default;

RewriteResult TeacherClient::rewrite(const RewriteRequest& request, const SampleMetadata& metadata) {
  RewriteResult result;
  std::string candidate;

  if (config_.mode == TeacherMode::mock) {
    result.attempts = 1;
    candidate = std::string(kMockRewritePrefix) + request.original_text;
  } else {
    const std::string body = build_request_body(request, config_);
    httplib::Headers headers;
    if (const char* token = std::getenv(config_.token_env.c_str()); token && *token)
      headers.emplace("Authorization", std::string("Bearer ") + token);
    const auto timeout = std::chrono::duration<double>(config_.timeout_seconds);
    const auto timeout_us = std::chrono::duration_cast<std::chrono::microseconds>(timeout);

    limiter_->slots.acquire();
    for (int attempt = 0; attempt <= config_.max_retries; ++attempt) {
      ++result.attempts;
      try {
        httplib::Client client(config_.base_url);
        client.set_connection_timeout(timeout_us);
        client.set_read_timeout(timeout_us);
        client.set_write_timeout(timeout_us);
        auto response = client.Post(config_.path, headers, body, "application/json");
        if (!response) {
          result.failure = "transport error: " + httplib::to_string(response.error());
          continue;
        }
        if (response->status != 200) {
          result.failure = "http status " + std::to_string(response->status);
          continue;
        }
        candidate = trim(extract_completion(response->body, config_.response_pointer));
        if (candidate.empty()) {
          result.failure = "empty or malformed response";
          continue;
        }
        result.failure.clear();
        break;
      } catch (const std::exception& e) {
        result.failure = std::string("client error: ") + e.what();
      }
    }
    limiter_->slots.release();
  }

  if (!candidate.empty()) {
    const auto violations = verify_fact_preservation(metadata, candidate);
    if (violations.empty()) {
      result.text = std::move(candidate);
      return result;
    }
    result.failure = std::string("verification failed: ") + to_string(violations.front().kind) +
                      " (" + violations.front().detail + ")";
  }
  result.text = request.original_text;
  result.fallback = true;
  return result;
}

const std::vector<std::string>& question_paraphrases() {
  static const std::vector<std::string> pool{
      "Describe the features visible in this OCTA image, then check it for signs of diabetic "
      "retinopathy (DR) and classify it as Healthy, NPDR, or PDR.",
      "Which structures and abnormalities can you see in this OCTA scan? Describe them first, then "
      "grade diabetic retinopathy (DR) as Healthy, NPDR, or PDR.",
      "Please review this OCTA image: describe what you observe, look for diabetic retinopathy (DR) "
      "findings, and give a classification of Healthy, NPDR, or PDR.",
      "What does this OCTA image show? Walk through the visible features, assess for diabetic "
      "retinopathy (DR), and state whether it is Healthy, NPDR, or PDR.",
      "Examine this OCTA image. First summarize the vascular features, then decide whether there is "
      "diabetic retinopathy (DR) and label it Healthy, NPDR, or PDR.",
      "Looking at this OCTA image, what features stand out? After describing them, evaluate for "
      "diabetic retinopathy (DR) and classify the image as Healthy, NPDR, or PDR.",
  };
  return pool;
}

std::string_view question_for_sample(std::uint64_t seed, bool diversify) {
  if (!diversify) return kTrainingQuestion;
  const auto& pool = question_paraphrases();
  return pool[splitmix64(seed ^ 0x5155455354494f4eULL) % pool.size()];
}

}  // namespace svr
