#pragma once

#include <array>
#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "prefalign/evalsuite.hpp"
#include "prefalign/toyworld.hpp"

namespace prefalign {

struct JudgeVerdict {
  double aesthetic = 0.0;   // 0..40
  double structural = 0.0;  // 0..30
  double semantic = 0.0;    // 0..30
  double total = 0.0;       // 0..100, sum of the three
  std::string raw;

  friend bool operator==(const JudgeVerdict&, const JudgeVerdict&) = default;
};

/// Throws "judge-range" or "judge-sum".
void validate_verdict(const JudgeVerdict& v);

/// The evaluator's system prompt (scoring rubric), byte-stable.
const std::string& render_prompt();

/// Short text stating what the masked region should contain.
std::string describe_task(const InpaintTask& task, int num_classes);

/// Extracts the last "<criterion>: <number>" for each sub-score and the total
/// from free text and validates the result. Unparseable text raises
/// "judge-parse" with the raw text in the message.
JudgeVerdict parse_verdict(const std::string& text);

struct RemoteJudgeConfig {
  std::string endpoint;  // http://host:port/path
  std::string model = "gpt-4o";
  double timeout_s = 60.0;
  int max_retries = 4;
  double backoff_s = 0.5;  // doubled after every failed attempt
  int parallelism = 4;
};

struct JudgeRequest {
  std::string system_prompt;
  std::string task_description;
  /// base64 PNGs: source, masked view, mask, result.
  std::array<std::string, 4> images;
  std::string endpoint;
  std::string auth_token;
  double timeout_s = 60.0;
};

/// Builds a request; the token comes from JUDGE_API_KEY when set.
JudgeRequest make_judge_request(const InpaintTask& task, const Image& result, int num_classes,
                                const RemoteJudgeConfig& config);

/// Chat-completion JSON body for the request.
std::string judge_request_body(const JudgeRequest& req, const std::string& model);

/// One POST with retries; network errors surface as "judge-network", HTTP
/// errors as "judge-http" after the retry budget is spent.
JudgeVerdict judge_remote(const JudgeRequest& req, const RemoteJudgeConfig& config);

/// At most config.parallelism requests in flight; results in input order,
/// nullopt where the request failed.
std::vector<std::optional<JudgeVerdict>> judge_remote_batch(std::span<const JudgeRequest> requests,
                                                            const RemoteJudgeConfig& config);

/// Deterministic stand-in: color match to the class prototype, exactness of
/// the unmasked region, and fidelity, mapped onto the rubric ranges.
JudgeVerdict judge_mock(const InpaintTask& task, const Image& img, int num_classes);

Judge mock_judge(int num_classes);
Judge remote_judge(RemoteJudgeConfig config, int num_classes);

struct JudgedPair {
  const InpaintTask* task = nullptr;
  Image x;
  Image y;
};

struct Agreement {
  double percent = 0.0;
  std::size_t agreed = 0;
  std::size_t counted = 0;
  std::size_t skipped = 0;
};

/// Fraction of pairs on which both judges pick the same winner; a tie only
/// agrees with a tie.
Agreement judge_agreement(const Judge& a, const Judge& b, std::span<const JudgedPair> pairs);

}  // namespace prefalign
