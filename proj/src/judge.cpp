#include "prefalign/judge.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <regex>
#include <thread>

#include <httplib.h>
#include <json.hpp>

#include "prefalign/error.hpp"
#include "prefalign/parallel.hpp"
#include "prefalign/png.hpp"
#include "prefalign/rewards.hpp"

namespace prefalign {

namespace {

struct Criterion {
  const char* pattern;
  double max;
};

constexpr Criterion kAesthetic{"aesthetic\\s+quality", 40.0};
constexpr Criterion kStructural{"structural\\s+coherence", 30.0};
constexpr Criterion kSemantic{"semantic\\s+alignment", 30.0};
constexpr Criterion kTotal{"total(?:\\s+score)?", 100.0};

std::optional<double> last_score(const std::string& text, const Criterion& c) {
  // name, optional "(0-40 points)", optional markdown emphasis, colon, number
  const std::regex re(std::string(c.pattern) + "\\s*(?:\\([^)\\n]*\\))?[\\s*_]*[:=][\\s*_]*(-?\\d+(?:\\.\\d+)?)",
                      std::regex::icase);
  std::optional<double> found;
  for (auto it = std::sregex_iterator(text.begin(), text.end(), re); it != std::sregex_iterator(); ++it)
    found = std::stod((*it)[1].str());
  return found;
}

struct Endpoint {
  std::string host;  // scheme://host:port
  std::string path;
};

Endpoint split_endpoint(const std::string& url) {
  static const std::regex re(R"(^(http://[^/]+)(/.*)?$)");
  std::smatch m;
  require(std::regex_match(url, m, re), "invalid-config",
          "judge endpoint must look like http://host:port/path, got '" + url + "'");
  return {m[1].str(), m[2].matched ? m[2].str() : "/"};
}

void sleep_for(double seconds) {
  std::this_thread::sleep_for(std::chrono::duration<double>(seconds));
}

}  // namespace

void validate_verdict(const JudgeVerdict& v) {
  auto in_range = [](double x, double hi) { return std::isfinite(x) && x >= 0.0 && x <= hi; };
  require(in_range(v.aesthetic, kAesthetic.max), "judge-range",
          "aesthetic score " + std::to_string(v.aesthetic) + " outside 0..40");
  require(in_range(v.structural, kStructural.max), "judge-range",
          "structural score " + std::to_string(v.structural) + " outside 0..30");
  require(in_range(v.semantic, kSemantic.max), "judge-range",
          "semantic score " + std::to_string(v.semantic) + " outside 0..30");
  require(in_range(v.total, kTotal.max), "judge-range", "total " + std::to_string(v.total) + " outside 0..100");
  const double sum = v.aesthetic + v.structural + v.semantic;
  require(std::abs(sum - v.total) <= 1e-9 * std::max(1.0, sum), "judge-sum",
          "stated total " + std::to_string(v.total) + " differs from sub-score sum " + std::to_string(sum));
}

const std::string& render_prompt() {
  static const std::string prompt =
      "You are a human expert in analysis of image inpainting.\n"
      "Please evaluate the image inpainting result based on the following three criteria:\n"
      "- Aesthetic Quality (0–40 points):\n"
      "  - Visual appeal in color harmony, composition, style coherence\n"
      "  - Texture realism and naturalness\n"
      "- Structural Coherence (0–30 points)\n"
      "  - Preservation of geometric structures and content continuity\n"
      "  - Seamlessness at mask boundaries\n"
      "- Semantic Alignment (0–30 points)\n"
      "  - Faithfulness to the Text Prompt instructions\n"
      "  - Contextual consistency of added or restored content\n"
      "\n"
      "For each criterion, provide:\n"
      "- A sub‑score.\n"
      "- A 1–2‑sentence justification.\n"
      "Then compute the total score (0–100).\n";
  return prompt;
}

std::string describe_task(const InpaintTask& task, int num_classes) {
  const ClassPrototype p = class_prototype(static_cast<int>(task.label), num_classes);
  auto rgb = [](const Eigen::Vector3d& c) {
    return "rgb(" + std::to_string(std::lround(c[0] * 255)) + ", " + std::to_string(std::lround(c[1] * 255)) + ", " +
           std::to_string(std::lround(c[2] * 255)) + ")";
  };
  return "Fill the masked region so the picture shows class " + std::to_string(task.label) +
         ": a centered " + rgb(p.foreground) + " rectangle on a plain " + rgb(p.background) + " background.";
}

JudgeVerdict parse_verdict(const std::string& text) {
  const auto a = last_score(text, kAesthetic);
  const auto s = last_score(text, kStructural);
  const auto m = last_score(text, kSemantic);
  const auto t = last_score(text, kTotal);
  if (!a || !s || !m || !t) fail("judge-parse", "could not find all four scores in response: " + text);
  JudgeVerdict v{*a, *s, *m, *t, text};
  validate_verdict(v);
  return v;
}

JudgeRequest make_judge_request(const InpaintTask& task, const Image& result, int num_classes,
                                const RemoteJudgeConfig& config) {
  JudgeRequest req;
  req.system_prompt = render_prompt();
  req.task_description = describe_task(task, num_classes);
  req.images = {base64_encode(encode_png(task.source)), base64_encode(encode_png(masked_view(task))),
                base64_encode(encode_png(task.mask)), base64_encode(encode_png(result))};
  req.endpoint = config.endpoint;
  if (const char* key = std::getenv("JUDGE_API_KEY")) req.auth_token = key;
  req.timeout_s = config.timeout_s;
  return req;
}

std::string judge_request_body(const JudgeRequest& req, const std::string& model) {
  require(!req.system_prompt.empty(), "invalid-input", "judge request without a system prompt");
  using nlohmann::json;
  json content = json::array();
  content.push_back({{"type", "text"},
                     {"text", "Inpainting prompt: " + req.task_description +
                                  "\nImages in order: input image, masked input, mask, inpainting result."
                                  "\nReport each criterion as '<criterion>: <score>' and finish with "
                                  "'Total: <score>'."}});
  for (const auto& img : req.images) {
    require(!img.empty(), "invalid-input", "judge request needs all four images");
    content.push_back({{"type", "image_url"}, {"image_url", {{"url", "data:image/png;base64," + img}}}});
  }
  json body = {{"model", model},
               {"messages", json::array({{{"role", "system"}, {"content", req.system_prompt}},
                                         {{"role", "user"}, {"content", content}}})}};
  return body.dump();
}

JudgeVerdict judge_remote(const JudgeRequest& req, const RemoteJudgeConfig& config) {
  const Endpoint ep = split_endpoint(req.endpoint);
  const std::string body = judge_request_body(req, config.model);
  std::string last_error;
  double backoff = config.backoff_s;
  for (int attempt = 0; attempt <= config.max_retries; ++attempt) {
    if (attempt > 0) {
      sleep_for(backoff);
      backoff *= 2.0;
    }
    httplib::Client client(ep.host);
    const auto timeout = std::chrono::duration<double>(req.timeout_s);
    client.set_connection_timeout(std::chrono::duration_cast<std::chrono::microseconds>(timeout));
    client.set_read_timeout(std::chrono::duration_cast<std::chrono::microseconds>(timeout));
    client.set_write_timeout(std::chrono::duration_cast<std::chrono::microseconds>(timeout));
    httplib::Headers headers;
    if (!req.auth_token.empty()) headers.emplace("Authorization", "Bearer " + req.auth_token);
    auto res = client.Post(ep.path, headers, body, "application/json");
    if (!res) {
      last_error = "judge-network: " + httplib::to_string(res.error());
      continue;
    }
    if (res->status == 429 || res->status >= 500) {
      last_error = "judge-http: status " + std::to_string(res->status);
      continue;
    }
    if (res->status != 200) fail("judge-http", "status " + std::to_string(res->status) + ": " + res->body);

    std::string text;
    try {
      const auto reply = nlohmann::json::parse(res->body);
      text = reply.at("choices").at(0).at("message").at("content").get<std::string>();
    } catch (const nlohmann::json::exception&) {
      fail("judge-parse", "response is not a chat completion: " + res->body);
    }
    return parse_verdict(text);
  }
  const auto colon = last_error.find(':');
  fail(last_error.substr(0, colon),
       "gave up after " + std::to_string(config.max_retries + 1) + " attempts:" + last_error.substr(colon + 1));
}

std::vector<std::optional<JudgeVerdict>> judge_remote_batch(std::span<const JudgeRequest> requests,
                                                            const RemoteJudgeConfig& config) {
  std::vector<std::optional<JudgeVerdict>> out(requests.size());
  const std::size_t lanes = static_cast<std::size_t>(std::max(1, config.parallelism));
  std::vector<std::thread> workers;
  for (std::size_t lane = 0; lane < std::min(lanes, requests.size()); ++lane) {
    workers.emplace_back([&, lane] {
      for (std::size_t i = lane; i < requests.size(); i += lanes) {
        try {
          out[i] = judge_remote(requests[i], config);
        } catch (const Error&) {
          out[i].reset();
        }
      }
    });
  }
  for (auto& w : workers) w.join();
  return out;
}

JudgeVerdict judge_mock(const InpaintTask& task, const Image& img, int num_classes) {
  check_image(img);
  require(img.width == task.source.width && img.height == task.source.height, "shape-mismatch",
          "result and task differ in size");
  const WorldDims dims{img.width, img.height, num_classes};
  const double target = vividness(prototype_image(dims, static_cast<int>(task.label)));

  std::size_t kept = 0, exact = 0;
  for (Eigen::Index p = 0; p < img.pixels(); ++p) {
    if (task.mask.data[p] > 0.5) continue;
    ++kept;
    if (img.pixel(p) == task.source.pixel(p)) ++exact;
  }
  JudgeVerdict v;
  v.aesthetic = 40.0 * std::clamp(1.0 - 4.0 * std::abs(vividness(img) - target), 0.0, 1.0);
  v.structural = 30.0 * (kept == 0 ? 1.0 : static_cast<double>(exact) / static_cast<double>(kept));
  v.semantic = 30.0 * std::clamp(1.0 + fidelity(task, img) / 0.05, 0.0, 1.0);
  v.total = v.aesthetic + v.structural + v.semantic;
  return v;
}

Judge mock_judge(int num_classes) {
  return [num_classes](const InpaintTask& task, const Image& img) -> std::optional<double> {
    return judge_mock(task, img, num_classes).total;
  };
}

Judge remote_judge(RemoteJudgeConfig config, int num_classes) {
  return [config = std::move(config), num_classes](const InpaintTask& task,
                                                   const Image& img) -> std::optional<double> {
    return judge_remote(make_judge_request(task, img, num_classes, config), config).total;
  };
}

Agreement judge_agreement(const Judge& a, const Judge& b, std::span<const JudgedPair> pairs) {
  require(!pairs.empty(), "invalid-input", "agreement needs at least one pair");
  auto verdict = [](const Judge& j, const JudgedPair& p) -> std::optional<int> {
    try {
      const auto sx = j(*p.task, p.x);
      const auto sy = j(*p.task, p.y);
      if (!sx || !sy) return std::nullopt;
      return (*sx > *sy) - (*sx < *sy);
    } catch (const Error&) {
      return std::nullopt;
    }
  };
  Agreement out;
  for (const auto& p : pairs) {
    const auto va = verdict(a, p);
    const auto vb = verdict(b, p);
    if (!va || !vb) {
      ++out.skipped;
      continue;
    }
    ++out.counted;
    if (*va == *vb) ++out.agreed;
  }
  if (out.counted > 0) out.percent = 100.0 * static_cast<double>(out.agreed) / static_cast<double>(out.counted);
  return out;
}

}  // namespace prefalign
