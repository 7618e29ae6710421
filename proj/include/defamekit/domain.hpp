#pragma once

// Game-world data model: character profiles, intelligence, campaign briefs
// (the model input) and the structured poster the model writes.

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

namespace defamekit {

inline constexpr std::size_t kMaxBodyChars = 500;
inline constexpr std::size_t kMaxIntelBodyChars = 1000;
inline constexpr std::size_t kMaxTraits = 5;

struct Catchphrases {
  std::string public_line;
  std::string private_line;
  bool operator==(const Catchphrases&) const = default;
};

struct CharacterProfile {
  std::string name;
  std::string profession;
  std::vector<std::string> personality_traits;
  std::string faction;
  std::string description;
  Catchphrases catchphrases;
  bool operator==(const CharacterProfile&) const = default;
};

struct IntelligenceItem {
  std::string kind;  // e.g. "failure", "addiction"
  std::string body;
  bool operator==(const IntelligenceItem&) const = default;
};

struct CampaignBrief {
  CharacterProfile sender;
  CharacterProfile target;
  std::vector<IntelligenceItem> intelligence;  // 1 or 2 items
  std::string audience;
  std::string angle;
  bool operator==(const CampaignBrief&) const = default;
};

struct PosterOutput {
  std::string title;
  std::string subtitle;
  std::string body;
  std::string contrast_line;
  std::string signature;
  std::string catchphrase;
  std::string raw_text;
  bool operator==(const PosterOutput&) const = default;
};

// Violation names used by validate_brief. Profile violations are prefixed
// with "sender." or "target.".
namespace violation {
inline constexpr const char* kIntelLength = "intelligence length ∈ {1,2}";
inline constexpr const char* kSenderIsTarget = "sender ≠ target";
inline constexpr const char* kAudienceEmpty = "audience non-empty";
inline constexpr const char* kAngleEmpty = "angle non-empty";
inline constexpr const char* kIntelKindEmpty = "intelligence kind non-empty";
inline constexpr const char* kIntelBodyEmpty = "intelligence body non-empty";
inline constexpr const char* kIntelBodyLength = "intelligence body ≤ 1000 characters";
inline constexpr const char* kIntelKindsUnique = "intelligence kinds unique";
}  // namespace violation

struct ValidationReport {
  std::vector<std::string> violations;
  bool ok() const { return violations.empty(); }
  bool has(std::string_view v) const;
};

ValidationReport validate_profile(const CharacterProfile& profile, std::string_view prefix);
ValidationReport validate_brief(const CampaignBrief& brief);

// Wire format. Field names follow the game's export format:
// `personality_trait` is accepted as an alias of `personality_traits`,
// `intelligence` is a map kind -> body (an array of {kind, body} is also
// accepted on input), and the audience travels as `target_audience`.
CharacterProfile profile_from_json(const nlohmann::json& j, const std::string& path);
nlohmann::json profile_to_json(const CharacterProfile& p);
CampaignBrief brief_from_json(const nlohmann::json& j);
nlohmann::json brief_to_json(const CampaignBrief& brief);

// Throws ParseError (with line/column) or FieldError (with field path).
CampaignBrief parse_brief(std::string_view document);
// Canonical form: sorted keys, normalized whitespace in every text value.
std::string serialize_brief(const CampaignBrief& brief);
std::string canonicalize_brief_document(std::string_view document);

// One missing or invalid poster section.
struct SectionFailure {
  std::string section;
  std::string reason;
  std::string to_string() const { return section + ": " + reason; }
  bool operator==(const SectionFailure&) const = default;
};

// Exactly one of `poster` / `failures` is populated.
struct PosterParse {
  std::optional<PosterOutput> poster;
  std::vector<SectionFailure> failures;
  bool ok() const { return poster.has_value(); }
  bool failed(std::string_view section) const;
};

// Layout: title on the first non-empty line, subtitle on the second; the
// last non-empty line is the quoted catchphrase and the one before it the
// signature. Between them, blank-line separated blocks hold the body and,
// as the final block, the contrast line.
PosterParse parse_poster(std::string_view raw_text);

nlohmann::json poster_to_json(const PosterOutput& poster);
PosterOutput poster_from_json(const nlohmann::json& j);

}  // namespace defamekit
