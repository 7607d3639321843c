#pragma once

#include <array>
#include <compare>
#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include <json.hpp>

namespace empdialog {

enum class Intent {
  Questioning,
  Acknowledging,
  Agreeing,
  Consoling,
  Encouraging,
  Sympathizing,
  Wishing,
  Suggesting,
  SharingOwnThoughts,
  SharingExperience,
  Advising,
  ExpressingCare,
  ExpressingRelief,
  Disapproving,
  Appreciating,
};

inline constexpr std::size_t kIntentCount = 15;
inline constexpr std::size_t kCoreIntentCount = 8;
inline constexpr std::size_t kDefaultEmotionCount = 32;

struct IntentInfo {
  Intent intent;
  std::string_view name;  // canonical lowercase
  double reference_frequency;
  bool core;
};

/// The fixed 15-intent taxonomy in frequency order. The first eight are the
/// core intents kept as classifier labels.
const std::array<IntentInfo, kIntentCount>& intent_table();
const IntentInfo& intent_info(Intent intent);
std::string_view intent_name(Intent intent);
std::optional<Intent> intent_from_name(std::string_view name);
bool is_core(Intent intent);

enum class Valence { Positive, Negative, None };

std::string_view valence_name(Valence v);

struct Emotion {
  std::string name;
  Valence valence = Valence::Positive;
  bool basic = false;
};

/// Emotion | Intent | Neutral. For emotions `index` points into the
/// LabelSpace emotion list; for intents it is the Intent enumerator.
class Label {
 public:
  enum class Kind { Emotion, Intent, Neutral };

  Label() : Label(Kind::Neutral, 0) {}
  static Label emotion(std::size_t index) { return Label(Kind::Emotion, index); }
  static Label intent(Intent i) { return Label(Kind::Intent, static_cast<std::size_t>(i)); }
  static Label neutral() { return Label(Kind::Neutral, 0); }

  Kind kind() const { return kind_; }
  bool is_emotion() const { return kind_ == Kind::Emotion; }
  bool is_intent() const { return kind_ == Kind::Intent; }
  bool is_neutral() const { return kind_ == Kind::Neutral; }
  std::size_t emotion_index() const { return index_; }
  Intent as_intent() const { return static_cast<Intent>(index_); }

  friend bool operator==(const Label&, const Label&) = default;

 private:
  Label(Kind k, std::size_t i) : kind_(k), index_(i) {}
  Kind kind_;
  std::size_t index_;
};

/// Validated emotion set plus the derived classifier label universe:
/// emotions (config order), then the core intents, then neutral.
class LabelSpace {
 public:
  explicit LabelSpace(std::vector<Emotion> emotions);

  const std::vector<Emotion>& emotions() const { return emotions_; }
  std::size_t emotion_count() const { return emotions_.size(); }
  std::size_t class_count() const { return emotions_.size() + kCoreIntentCount + 1; }

  std::optional<std::size_t> find_emotion(std::string_view name) const;

  /// Classifier class id. Non-core intents collapse onto neutral.
  std::size_t class_id(const Label& label) const;
  /// Inverse of class_id over the classifier universe.
  Label class_label(std::size_t id) const;
  std::size_t neutral_id() const { return class_count() - 1; }

  std::string name(const Label& label) const;
  std::string class_name(std::size_t id) const { return name(class_label(id)); }
  /// Accepts emotion names, any of the 15 intent names, and "neutral".
  std::optional<Label> parse(std::string_view name) const;

  Valence valence_of(const Label& label) const;
  Valence valence_of(std::string_view emotion_name) const;  // throws on unknown

 private:
  std::vector<Emotion> emotions_;
  std::unordered_map<std::string, std::size_t> by_name_;
};

struct LabelConfigOptions {
  /// Require exactly 32 emotions and exactly 8 basic ones.
  bool strict = true;
};

LabelSpace load_label_config(const nlohmann::json& doc, LabelConfigOptions options = {});
LabelSpace load_label_config_file(const std::string& path, LabelConfigOptions options = {});

/// Built-in copy of data/labels.json.
const nlohmann::json& default_label_config();
LabelSpace default_label_space();

}  // namespace empdialog
