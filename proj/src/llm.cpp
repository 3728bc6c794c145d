#include "facadepv/llm.hpp"

#include <algorithm>
#include <cstdlib>
#include <fstream>
#include <regex>
#include <sstream>

#include <fmt/format.h>

#include "facadepv/error.hpp"
#include "json_util.hpp"

// after Eigen: OpenSSL headers break Eigen template definitions otherwise
#define CPPHTTPLIB_OPENSSL_SUPPORT
#include <httplib.h>

namespace facadepv {

using nlohmann::json;

namespace {

constexpr std::string_view kSystemRole =
    "You are an expert civil engineer specializing in Building-Integrated Photovoltaics (BIPV). "
    "Your task is to determine the optimal layout for PV panels on a building facade based on provided "
    "geometric and semantic data. You must strictly follow all instructions and output formats.";

constexpr std::string_view kTaskTemplate = R"(Task: Given the dimensions of a building facade and the locations of obstructions (windows, doors, balconies, etc.), identify all possible rectangular areas suitable for PV installation.

Step 1: Understand Metric Canvas (Provided for Context)
The building facade image has been rectified to a front-on view. The relevant parameters are:
- Real-world dimensions: width = {w_m} meters, height = {h_m} meters.
- Pixel dimensions: width = {w_px} pixels, height = {h_px} pixels.
- The scale is: x-direction: {w_m} meters/{w_px}, y-direction: {h_m} meters/{h_px}.
All following coordinates are in pixels, with the origin (0, 0) at the top-left corner of the rectified image.

Step 2: Identify Obstructions (Provided Semantic Layout)
The wall region available for analysis is: {wall_boxes}.
The following are obstructions on the facade where PV panels cannot be installed. They are provided as lists of bounding boxes, each defined by [x1, y1, x2, y2], representing the top-left (x1, y1) and bottom-right (x2, y2) pixel coordinates:
- Windows: {list_of_window_boxes}
- Doors: {list_of_door_boxes}
- Balconies: {list_of_balcony_boxes}
- Other obstructions: {list_of_other_boxes}
Note: If a list is empty, it means no such obstructions were detected.

Step 3: Partition Usable Wall Area
Your primary goal is to analyze the remaining "wall" area (i.e., total facade area minus all areas occupied by the obstructions from Step 2). You must subdivide this available wall space into a set of non-overlapping rectangular regions suitable for potential PV installation. The following critical rules apply:
(a) Maximize Area per Region: Each identified rectangular region should be as large as possible. Minimize the total number of rectangles by favoring larger, contiguous PV arrays.
(b) Mutual Exclusivity and Obstruction Avoidance: The generated rectangular regions must not overlap with any of the obstruction bounding boxes from Step 2, nor with each other.
(c) Comprehensive Coverage: The set of identified rectangular regions should aim to cover as much of the available, unobstructed wall surface as possible.
(d) Merging for Optimization: If merging two or more adjacent, smaller valid sub-regions (that individually satisfy all rules) results in a larger valid rectangular region without violating exclusivity or obstruction rules, this merge operation should be performed.

Step 4: Qualify Rectangles for PV Installation
From the list of potential wall rectangles generated in Step 3, filter them based on practical PV module installation constraints. A rectangle is considered suitable for PV installation only if it meets both of the following dimensional criteria (converted to real-world meters using the scale factor from Step 1):
- The shorter side (width or height) is at least {min_short_edge_m} meters.
- The longer side (width or height) is at least {min_long_edge_m} meters.
Rectangles failing to meet either criterion must be discarded.

Output Format:
Provide your final answer strictly as a JSON object. This object should have a single key named "installable_rectangles", whose value is a list of valid rectangular areas that passed all criteria in Step 4. Each rectangle in the list must be represented by its pixel coordinates in the format [x1, y1, x2, y2]. If no rectangles are found to be suitable, return an empty list for "installable_rectangles".

Example of a valid output:
{
  "installable_rectangles": [
    [150, 50, 300, 400],
    [550, 50, 700, 400],
    [50, 450, 700, 600]
  ]
}

Example if no suitable areas are found:
{
  "installable_rectangles": []
}

Begin your analysis now.)";

std::string num(double v) { return fmt::format("{}", v); }

std::string box_text(const BoundingBox& b) {
  return fmt::format("[{},{},{},{}]", num(b.x_min), num(b.y_min), num(b.x_max), num(b.y_max));
}

std::string box_list(const std::vector<BoundingBox>& boxes) {
  std::string out = "[";
  for (std::size_t i = 0; i < boxes.size(); ++i) {
    if (i) out += ", ";
    out += box_text(boxes[i]);
  }
  return out + "]";
}

std::string render(std::string_view tmpl, const std::map<std::string, std::string>& values) {
  std::string out(tmpl);
  for (const auto& [key, value] : values) {
    const std::string marker = "{" + key + "}";
    for (auto pos = out.find(marker); pos != std::string::npos; pos = out.find(marker, pos + value.size())) {
      out.replace(pos, marker.size(), value);
    }
  }
  return out;
}

// Matching closing brace for the object starting at `start`, honoring JSON
// string literals; npos when unbalanced.
std::size_t matching_brace(std::string_view text, std::size_t start) {
  int depth = 0;
  bool in_string = false;
  for (std::size_t i = start; i < text.size(); ++i) {
    const char ch = text[i];
    if (in_string) {
      if (ch == '\\') ++i;
      else if (ch == '"') in_string = false;
      continue;
    }
    if (ch == '"') in_string = true;
    else if (ch == '{') ++depth;
    else if (ch == '}' && --depth == 0) return i;
  }
  return std::string_view::npos;
}

// Facade restricted to one wall and the obstructions touching it.
FacadeDescription single_wall(const FacadeDescription& facade, const BoundingBox& wall) {
  FacadeDescription sub = facade;
  sub.components.clear();
  sub.components.push_back({ComponentClass::Wall, wall});
  for (const auto& c : facade.components) {
    if (c.cls == ComponentClass::Wall) continue;
    const auto inter = intersection(c.box, wall);
    if (inter.valid()) sub.components.push_back({c.cls, inter});
  }
  return sub;
}

std::string summarize(const std::vector<Violation>& violations) {
  std::string out;
  const std::size_t shown = std::min<std::size_t>(violations.size(), 8);
  for (std::size_t i = 0; i < shown; ++i) {
    if (i) out += "; ";
    out += violations[i].describe();
  }
  if (violations.size() > shown) out += fmt::format("; and {} more", violations.size() - shown);
  return out;
}

}  // namespace

PromptBundle build_prompt(const FacadeDescription& facade, const LayoutConstraints& c) {
  const auto& scale = facade.require_scale();
  PromptBundle p;
  p.system_role = std::string(kSystemRole);

  std::vector<BoundingBox> others;
  for (const auto& comp : facade.components) {
    if (comp.cls == ComponentClass::Roof || comp.cls == ComponentClass::Other) others.push_back(comp.box);
  }
  std::string walls;
  const auto wall_boxes = facade.walls();
  for (std::size_t i = 0; i < wall_boxes.size(); ++i) {
    if (i) walls += ", ";
    walls += fmt::format("wall{}: {}", i + 1, box_text(wall_boxes[i]));
  }

  p.placeholders = {
      {"w_m", num(scale.width_m)},
      {"h_m", num(scale.height_m)},
      {"w_px", num(facade.width_px)},
      {"h_px", num(facade.height_px)},
      {"wall_boxes", walls},
      {"list_of_window_boxes", box_list(facade.boxes_of(ComponentClass::Window))},
      {"list_of_door_boxes", box_list(facade.boxes_of(ComponentClass::Door))},
      {"list_of_balcony_boxes", box_list(facade.boxes_of(ComponentClass::Balcony))},
      {"list_of_other_boxes", box_list(others)},
      {"min_short_edge_m", num(c.min_short_edge_m)},
      {"min_long_edge_m", num(c.min_long_edge_m)},
  };
  p.task_text = render(kTaskTemplate, p.placeholders);
  return p;
}

bool has_unresolved_placeholder(std::string_view text) {
  static const std::regex marker(R"(\{[A-Za-z_][A-Za-z0-9_]*\})");
  return std::regex_search(text.begin(), text.end(), marker);
}

void LlmConfig::validate() const {
  if (max_attempts < 1) throw Error(ErrorKind::InvalidArgument, "max_attempts must be >= 1");
  if (max_in_flight < 1) throw Error(ErrorKind::InvalidArgument, "max_in_flight must be >= 1");
  if (max_tokens < 1) throw Error(ErrorKind::InvalidArgument, "max_tokens must be >= 1");
  if (!(timeout_s > 0.0)) throw Error(ErrorKind::InvalidArgument, "timeout_s must be positive");
}

json chat_request_body(const ChatRequest& r) {
  return json{{"model", r.model},
              {"messages", json::array({json{{"role", "system"}, {"content", r.system}},
                                        json{{"role", "user"}, {"content", r.user}}})},
              {"temperature", r.temperature},
              {"max_tokens", r.max_tokens}};
}

std::string chat_response_content(std::string_view body) {
  json doc;
  try {
    doc = json::parse(body);
  } catch (const json::parse_error& e) {
    throw Error(ErrorKind::TransportError, std::string("response body is not JSON: ") + e.what());
  }
  try {
    return doc.at("choices").at(0).at("message").at("content").get<std::string>();
  } catch (const json::exception&) {
    throw Error(ErrorKind::TransportError, "response lacks choices[0].message.content");
  }
}

HttpChatTransport::HttpChatTransport(LlmConfig config) : config_(std::move(config)) {
  static const std::regex url(R"(^(https?://[^/]+)(/.*)?$)");
  std::smatch m;
  if (!std::regex_match(config_.endpoint_url, m, url)) {
    throw Error(ErrorKind::InvalidArgument, "endpoint URL must be http(s)://host[:port]/path");
  }
  scheme_host_port_ = m[1].str();
  path_ = m[2].matched ? m[2].str() : "/";
  if (const char* token = std::getenv(config_.auth_token_env.c_str())) token_ = token;
}

std::string HttpChatTransport::complete(const ChatRequest& request) {
  httplib::Client client(scheme_host_port_);
  const auto secs = static_cast<time_t>(config_.timeout_s);
  const auto usecs = static_cast<time_t>((config_.timeout_s - static_cast<double>(secs)) * 1e6);
  client.set_connection_timeout(secs, usecs);
  client.set_read_timeout(secs, usecs);
  client.set_write_timeout(secs, usecs);

  httplib::Headers headers;
  if (!token_.empty()) {
    const bool bearer = config_.auth_header == "Authorization";
    headers.emplace(config_.auth_header, bearer ? "Bearer " + token_ : token_);
  }
  const auto res = client.Post(path_, headers, chat_request_body(request).dump(), "application/json");
  if (!res) {
    throw Error(ErrorKind::TransportError, "request failed: " + httplib::to_string(res.error()));
  }
  if (res->status != 200) {
    throw Error(ErrorKind::TransportError, fmt::format("HTTP status {}", res->status));
  }
  return chat_response_content(res->body);
}

MockTransport::MockTransport(std::vector<std::string> script) : script_(script.begin(), script.end()) {}

std::vector<std::string> MockTransport::load_script(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::IoError, "cannot open mock script " + path);
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::parse_error& e) {
    throw Error(ErrorKind::SchemaViolation, std::string("mock script is not JSON: ") + e.what());
  }
  if (!doc.is_array()) throw Error(ErrorKind::SchemaViolation, "mock script must be a JSON array of strings");
  std::vector<std::string> script;
  for (const auto& entry : doc) {
    if (!entry.is_string()) throw Error(ErrorKind::SchemaViolation, "mock script entries must be strings");
    script.push_back(entry.get<std::string>());
  }
  return script;
}

std::string MockTransport::complete(const ChatRequest& request) {
  std::lock_guard lock(mutex_);
  seen_.push_back(request);
  if (script_.empty()) throw Error(ErrorKind::TransportError, "mock script exhausted");
  std::string body = std::move(script_.front());
  script_.pop_front();
  if (body == kTransportFailure) throw Error(ErrorKind::TransportError, "scripted transport failure");
  return body;
}

std::size_t MockTransport::calls() const {
  std::lock_guard lock(mutex_);
  return seen_.size();
}

std::vector<ChatRequest> MockTransport::requests() const {
  std::lock_guard lock(mutex_);
  return seen_;
}

ThrottledTransport::ThrottledTransport(ChatTransport& inner, int max_in_flight)
    : inner_(inner), slots_(std::clamp(max_in_flight, 1, 1024)) {}

std::string ThrottledTransport::complete(const ChatRequest& request) {
  slots_.acquire();
  struct Release {
    std::counting_semaphore<1024>& s;
    ~Release() { s.release(); }
  } release{slots_};
  return inner_.complete(request);
}

std::vector<BoundingBox> parse_layout(std::string_view text) {
  for (std::size_t start = text.find('{'); start != std::string_view::npos; start = text.find('{', start + 1)) {
    const auto end = matching_brace(text, start);
    if (end == std::string_view::npos) continue;
    const json doc = json::parse(text.substr(start, end - start + 1), nullptr, false);
    if (doc.is_discarded() || !doc.is_object() || !doc.contains("installable_rectangles")) continue;
    return layout_from_json(doc);
  }
  throw Error(ErrorKind::MalformedResponse, "no JSON object with key 'installable_rectangles'");
}

std::string_view to_string(ViolationKind k) noexcept {
  switch (k) {
    case ViolationKind::OverlapsObstruction: return "OverlapsObstruction";
    case ViolationKind::OverlapsSibling: return "OverlapsSibling";
    case ViolationKind::OutOfBounds: return "OutOfBounds";
    case ViolationKind::BelowMinimumSize: return "BelowMinimumSize";
  }
  return "Unknown";
}

std::string Violation::describe() const {
  switch (kind) {
    case ViolationKind::OverlapsObstruction:
      return fmt::format("rectangle {} overlaps obstruction {}", index, other);
    case ViolationKind::OverlapsSibling:
      return fmt::format("rectangle {} overlaps rectangle {}", index, other);
    case ViolationKind::OutOfBounds:
      return fmt::format("rectangle {} extends outside the wall", index);
    case ViolationKind::BelowMinimumSize:
      return fmt::format("rectangle {} is below the minimum edge lengths", index);
  }
  return {};
}

ValidationOutcome validate_layout(std::span<const BoundingBox> rects, const FacadeDescription& facade,
                                  const LayoutConstraints& c) {
  const auto& scale = facade.require_scale();
  const auto walls = facade.walls();
  const auto obstructions = facade.obstructions();
  std::vector<Violation> violations;
  for (std::size_t i = 0; i < rects.size(); ++i) {
    const auto& r = rects[i];
    const BoundingBox one[] = {r};
    if (region_overlap(one, walls).a_minus_b > 0.0) violations.push_back({ViolationKind::OutOfBounds, i, i});
    for (std::size_t j = 0; j < obstructions.size(); ++j) {
      if (overlaps(r, obstructions[j])) violations.push_back({ViolationKind::OverlapsObstruction, i, j});
    }
    for (std::size_t j = i + 1; j < rects.size(); ++j) {
      if (overlaps(r, rects[j])) violations.push_back({ViolationKind::OverlapsSibling, i, j});
    }
    if (!satisfies(metric_extent(r, scale), c)) violations.push_back({ViolationKind::BelowMinimumSize, i, i});
  }
  if (!violations.empty()) return violations;
  auto result = qualify(rects, scale, c);
  result.provenance = Provenance::LlmValidated;
  return result;
}

ReasoningOutcome reason_layout(const FacadeDescription& facade, const LayoutConstraints& c, const LlmConfig& cfg,
                               ChatTransport& transport) {
  cfg.validate();
  c.validate();
  facade.require_scale();
  ReasoningOutcome out;

  const auto walls = facade.walls();
  std::vector<BoundingBox> accepted;
  std::vector<std::size_t> failed_walls;

  for (std::size_t w = 0; w < walls.size(); ++w) {
    const auto sub = walls.size() == 1 ? facade : single_wall(facade, walls[w]);
    const auto prompt = build_prompt(sub, c);
    std::string correction;
    bool ok = false;
    int attempt = 1;
    for (; attempt <= cfg.max_attempts; ++attempt) {
      ChatRequest req{cfg.model_name, prompt.system_role, prompt.task_text + correction, cfg.temperature,
                      cfg.max_tokens};
      ++out.requests_sent;
      std::string reason;
      try {
        const auto rects = parse_layout(transport.complete(req));
        auto verdict = validate_layout(rects, sub, c);
        if (auto* layout = std::get_if<LayoutResult>(&verdict)) {
          accepted.insert(accepted.end(), layout->rectangles.begin(), layout->rectangles.end());
          ok = true;
          break;
        }
        reason = summarize(std::get<std::vector<Violation>>(verdict));
      } catch (const Error& e) {
        reason = e.what();
      }
      out.failure_log.push_back({attempt, w, reason});
      correction = "\n\nNote: your previous answer was rejected (" + reason +
                   "). Return a corrected JSON object that satisfies every rule.";
    }
    out.attempts_used = std::max(out.attempts_used, ok ? attempt : cfg.max_attempts);
    if (!ok) failed_walls.push_back(w);
  }

  if (failed_walls.size() == walls.size()) {
    out.layout = deterministic_layout(facade, c);
    out.fell_back = true;
    return out;
  }
  for (auto w : failed_walls) {
    const auto det = deterministic_layout(single_wall(facade, walls[w]), c);
    accepted.insert(accepted.end(), det.rectangles.begin(), det.rectangles.end());
  }

  // Walls that overlap each other can still produce overlapping siblings.
  auto verdict = validate_layout(accepted, facade, c);
  if (auto* layout = std::get_if<LayoutResult>(&verdict)) {
    out.layout = std::move(*layout);
    out.fell_back = !failed_walls.empty();
    if (out.fell_back) out.layout->provenance = Provenance::Deterministic;
  } else {
    out.layout = deterministic_layout(facade, c);
    out.fell_back = true;
    out.failure_log.push_back({0, 0, "combined wall layouts conflict: " +
                                         summarize(std::get<std::vector<Violation>>(verdict))});
  }
  return out;
}

}  // namespace facadepv
