#include "defamekit/domain.hpp"

#include <algorithm>
#include <array>
#include <set>

#include "defamekit/errors.hpp"
#include "defamekit/text.hpp"

namespace defamekit {

using nlohmann::json;

bool ValidationReport::has(std::string_view v) const {
  return std::find(violations.begin(), violations.end(), v) != violations.end();
}

ValidationReport validate_profile(const CharacterProfile& p, std::string_view prefix) {
  ValidationReport r;
  const std::string pre(prefix);
  auto blank = [](const std::string& s) { return text::trim(s).empty(); };
  if (blank(p.name)) r.violations.push_back(pre + "name non-empty");
  if (blank(p.profession)) r.violations.push_back(pre + "profession non-empty");
  if (blank(p.faction)) r.violations.push_back(pre + "faction non-empty");
  if (p.personality_traits.empty() || p.personality_traits.size() > kMaxTraits)
    r.violations.push_back(pre + "personality_traits 1–5 entries");
  std::set<std::string> seen;
  for (const auto& t : p.personality_traits) {
    if (!seen.insert(text::normalize_whitespace(t)).second) {
      r.violations.push_back(pre + "personality_traits unique");
      break;
    }
  }
  if (blank(p.catchphrases.public_line)) r.violations.push_back(pre + "catchphrases.public non-empty");
  if (blank(p.catchphrases.private_line)) r.violations.push_back(pre + "catchphrases.private non-empty");
  return r;
}

ValidationReport validate_brief(const CampaignBrief& b) {
  ValidationReport r = validate_profile(b.sender, "sender.");
  auto target = validate_profile(b.target, "target.");
  r.violations.insert(r.violations.end(), target.violations.begin(), target.violations.end());

  if (b.intelligence.empty() || b.intelligence.size() > 2) r.violations.emplace_back(violation::kIntelLength);
  std::set<std::string> kinds;
  bool kind_empty = false, body_empty = false, body_long = false, dup = false;
  for (const auto& item : b.intelligence) {
    kind_empty |= text::trim(item.kind).empty();
    body_empty |= text::trim(item.body).empty();
    body_long |= text::utf8_length(item.body) > kMaxIntelBodyChars;
    dup |= !kinds.insert(text::normalize_whitespace(item.kind)).second;
  }
  if (kind_empty) r.violations.emplace_back(violation::kIntelKindEmpty);
  if (body_empty) r.violations.emplace_back(violation::kIntelBodyEmpty);
  if (body_long) r.violations.emplace_back(violation::kIntelBodyLength);
  if (dup) r.violations.emplace_back(violation::kIntelKindsUnique);

  if (text::normalize_whitespace(b.sender.name) == text::normalize_whitespace(b.target.name))
    r.violations.emplace_back(violation::kSenderIsTarget);
  if (text::trim(b.audience).empty()) r.violations.emplace_back(violation::kAudienceEmpty);
  if (text::trim(b.angle).empty()) r.violations.emplace_back(violation::kAngleEmpty);
  return r;
}

// ---------------------------------------------------------------------------
// Wire format

namespace {

const json& require(const json& j, const char* key, const std::string& path) {
  if (!j.is_object()) throw FieldError(path, "expected an object");
  auto it = j.find(key);
  if (it == j.end()) throw FieldError(path.empty() ? key : path + "." + key, "missing required field");
  return *it;
}

std::string require_string(const json& j, const char* key, const std::string& path) {
  const json& v = require(j, key, path);
  if (!v.is_string()) throw FieldError(path.empty() ? key : path + "." + key, "expected a string");
  return text::normalize_whitespace(v.get<std::string>());
}

}  // namespace

CharacterProfile profile_from_json(const json& j, const std::string& path) {
  if (!j.is_object()) throw FieldError(path, "expected an object");
  CharacterProfile p;
  p.name = require_string(j, "name", path);
  p.profession = require_string(j, "profession", path);
  p.faction = require_string(j, "faction", path);
  p.description = require_string(j, "description", path);

  const char* traits_key = j.contains("personality_traits") ? "personality_traits" : "personality_trait";
  const json& traits = require(j, traits_key, path);
  const std::string traits_path = path + ".personality_traits";
  if (traits.is_string()) {
    p.personality_traits.push_back(text::normalize_whitespace(traits.get<std::string>()));
  } else if (traits.is_array()) {
    for (const auto& t : traits) {
      if (!t.is_string()) throw FieldError(traits_path, "expected strings");
      p.personality_traits.push_back(text::normalize_whitespace(t.get<std::string>()));
    }
  } else {
    throw FieldError(traits_path, "expected a list of strings");
  }

  const json& cp = require(j, "catchphrases", path);
  p.catchphrases.public_line = require_string(cp, "public", path + ".catchphrases");
  p.catchphrases.private_line = require_string(cp, "private", path + ".catchphrases");
  return p;
}

json profile_to_json(const CharacterProfile& p) {
  return json{{"name", p.name},
              {"profession", p.profession},
              {"personality_traits", p.personality_traits},
              {"faction", p.faction},
              {"description", p.description},
              {"catchphrases", {{"public", p.catchphrases.public_line}, {"private", p.catchphrases.private_line}}}};
}

CampaignBrief brief_from_json(const json& j) {
  if (!j.is_object()) throw FieldError("", "brief must be an object");
  CampaignBrief b;
  b.sender = profile_from_json(require(j, "sender", ""), "sender");
  b.target = profile_from_json(require(j, "target", ""), "target");

  const json& intel = require(j, "intelligence", "");
  if (intel.is_object()) {
    for (const auto& [kind, body] : intel.items()) {
      if (!body.is_string()) throw FieldError("intelligence." + kind, "expected a string");
      b.intelligence.push_back({text::normalize_whitespace(kind), text::normalize_whitespace(body.get<std::string>())});
    }
  } else if (intel.is_array()) {
    for (std::size_t i = 0; i < intel.size(); ++i) {
      const std::string path = "intelligence[" + std::to_string(i) + "]";
      b.intelligence.push_back({require_string(intel[i], "kind", path), require_string(intel[i], "body", path)});
    }
  } else {
    throw FieldError("intelligence", "expected a map of kind to body");
  }

  b.audience = j.contains("target_audience") || !j.contains("audience") ? require_string(j, "target_audience", "")
                                                                          : require_string(j, "audience", "");
  b.angle = require_string(j, "angle", "");
  return b;
}

json brief_to_json(const CampaignBrief& b) {
  json intel = json::object();
  for (const auto& item : b.intelligence) intel[item.kind] = item.body;
  return json{{"sender", profile_to_json(b.sender)},
              {"target", profile_to_json(b.target)},
              {"intelligence", intel},
              {"target_audience", b.audience},
              {"angle", b.angle}};
}

namespace {

json parse_json_document(std::string_view document) {
  if (text::trim(document).empty()) throw ParseError("empty document", 1, 1);
  try {
    return json::parse(document.begin(), document.end());
  } catch (const json::parse_error& e) {
    // e.byte is 1-based offset of the last character read.
    std::size_t offset = e.byte == 0 ? 0 : std::min<std::size_t>(e.byte - 1, document.size());
    int line = 1, col = 1;
    for (std::size_t i = 0; i < offset; ++i) {
      if (document[i] == '\n') {
        ++line;
        col = 1;
      } else {
        ++col;
      }
    }
    throw ParseError("malformed JSON at line " + std::to_string(line) + ", column " + std::to_string(col) + ": " +
                         e.what(),
                     line, col);
  }
}

void canonicalize_value(json& v) {
  if (v.is_string()) {
    v = text::normalize_whitespace(v.get<std::string>());
  } else if (v.is_object() || v.is_array()) {
    for (auto& child : v) canonicalize_value(child);
  }
}

void canonicalize_profile(json& p) {
  if (p.is_object() && p.contains("personality_trait") && !p.contains("personality_traits")) {
    p["personality_traits"] = p["personality_trait"];
    p.erase("personality_trait");
  }
  if (p.is_object() && p.contains("personality_traits") && p["personality_traits"].is_string())
    p["personality_traits"] = json::array({p["personality_traits"]});
}

}  // namespace

CampaignBrief parse_brief(std::string_view document) { return brief_from_json(parse_json_document(document)); }

std::string serialize_brief(const CampaignBrief& brief) { return brief_to_json(brief).dump(); }

std::string canonicalize_brief_document(std::string_view document) {
  json j = parse_json_document(document);
  if (j.contains("sender")) canonicalize_profile(j["sender"]);
  if (j.contains("target")) canonicalize_profile(j["target"]);
  if (j.contains("audience") && !j.contains("target_audience")) {
    j["target_audience"] = j["audience"];
    j.erase("audience");
  }
  if (j.contains("intelligence") && j["intelligence"].is_array()) {
    json m = json::object();
    for (const auto& item : j["intelligence"]) m[item.value("kind", "")] = item.value("body", "");
    j["intelligence"] = m;
  }
  canonicalize_value(j);
  return j.dump();
}

// ---------------------------------------------------------------------------
// Poster parsing

bool PosterParse::failed(std::string_view section) const {
  return std::any_of(failures.begin(), failures.end(), [&](const auto& f) { return f.section == section; });
}

namespace {

struct QuotePair {
  std::string_view open;
  std::string_view close;
};

// Straight, curly, low-9 and guillemet quotes; curly quotes are often
// mismatched in model output, so both closing forms are accepted.
constexpr std::array<QuotePair, 7> kQuotes = {{{"\"", "\""},
                                               {"\xE2\x80\x9C", "\xE2\x80\x9D"},
                                               {"\xE2\x80\x9C", "\xE2\x80\x9C"},
                                               {"\xE2\x80\x9E", "\xE2\x80\x9C"},
                                               {"\xC2\xAB", "\xC2\xBB"},
                                               {"'", "'"},
                                               {"\xE2\x80\x98", "\xE2\x80\x99"}}};

// Returns the quoted text without its quotes, or nullopt when the line is not quoted.
std::optional<std::string> unquote(const std::string& line) {
  for (const auto& q : kQuotes) {
    if (line.size() >= q.open.size() + q.close.size() && line.starts_with(q.open) && line.ends_with(q.close))
      return text::normalize_whitespace(
          std::string_view(line).substr(q.open.size(), line.size() - q.open.size() - q.close.size()));
  }
  return std::nullopt;
}

}  // namespace

PosterParse parse_poster(std::string_view raw_text) {
  // Non-empty lines, each tagged with the blank-line separated block it sits in.
  struct Line {
    std::string text;
    int block;
  };
  std::vector<Line> lines;
  int block = 0;
  bool prev_blank = true;
  for (const auto& raw : text::split_lines(raw_text)) {
    std::string t = text::normalize_whitespace(raw);
    if (t.empty()) {
      prev_blank = true;
      continue;
    }
    if (prev_blank && !lines.empty()) ++block;
    prev_blank = false;
    lines.push_back({std::move(t), block});
  }

  PosterOutput out;
  out.raw_text = std::string(raw_text);
  std::vector<SectionFailure> failures;
  const std::size_t n = lines.size();

  if (n >= 1) out.title = lines[0].text;
  if (n >= 2) out.subtitle = lines[1].text;

  std::size_t tail = n;  // one past the last line available to signature/body
  if (n >= 3) {
    if (auto q = unquote(lines[n - 1].text); q && !q->empty()) {
      out.catchphrase = *q;
      tail = n - 1;
    }
  }
  if (tail >= 3) {
    out.signature = lines[tail - 1].text;
    --tail;
  }

  // Lines [2, tail) form the middle: body blocks followed by the contrast block.
  if (tail > 2) {
    const int last_block = lines[tail - 1].block;
    const bool has_separate_contrast = lines[2].block != last_block;
    std::size_t contrast_start = tail;
    if (has_separate_contrast) {
      contrast_start = tail;
      while (contrast_start > 2 && lines[contrast_start - 1].block == last_block) --contrast_start;
      std::string contrast;
      for (std::size_t i = contrast_start; i < tail; ++i) contrast += (contrast.empty() ? "" : " ") + lines[i].text;
      out.contrast_line = contrast;
    }
    std::string body;
    int body_block = -1;
    for (std::size_t i = 2; i < contrast_start; ++i) {
      if (!body.empty()) body += lines[i].block == body_block ? " " : "\n";
      body += lines[i].text;
      body_block = lines[i].block;
    }
    out.body = body;
  }

  if (out.title.empty()) failures.push_back({"title", "missing"});
  if (out.subtitle.empty()) failures.push_back({"subtitle", "missing"});
  if (out.body.empty()) failures.push_back({"body", "missing"});
  if (out.contrast_line.empty()) failures.push_back({"contrast_line", "missing"});
  if (out.signature.empty()) failures.push_back({"signature", "missing"});
  if (out.catchphrase.empty()) failures.push_back({"catchphrase", "missing"});
  if (const auto len = text::utf8_length(out.body); len > kMaxBodyChars)
    failures.push_back({"body", "length " + std::to_string(len) + " exceeds " + std::to_string(kMaxBodyChars)});

  PosterParse result;
  if (failures.empty())
    result.poster = std::move(out);
  else
    result.failures = std::move(failures);
  return result;
}

json poster_to_json(const PosterOutput& p) {
  return json{{"title", p.title},
              {"subtitle", p.subtitle},
              {"body", p.body},
              {"contrast_line", p.contrast_line},
              {"signature", p.signature},
              {"catchphrase", p.catchphrase},
              {"raw_text", p.raw_text}};
}

PosterOutput poster_from_json(const json& j) {
  PosterOutput p;
  p.title = require_string(j, "title", "poster");
  p.subtitle = require_string(j, "subtitle", "poster");
  p.body = require(j, "body", "poster").get<std::string>();
  p.contrast_line = require_string(j, "contrast_line", "poster");
  p.signature = require_string(j, "signature", "poster");
  p.catchphrase = require_string(j, "catchphrase", "poster");
  p.raw_text = j.value("raw_text", "");
  return p;
}

}  // namespace defamekit
