#include "empdialog/taxonomy.hpp"

#include <fstream>
#include <set>

#include "empdialog/error.hpp"

namespace empdialog {

namespace {

// Frequencies from the 521 manually annotated listener sentences.
constexpr std::array<IntentInfo, kIntentCount> kIntents{{
    {Intent::Questioning, "questioning", 0.2438, true},
    {Intent::Acknowledging, "acknowledging", 0.2246, true},
    {Intent::Agreeing, "agreeing", 0.0960, true},
    {Intent::Consoling, "consoling", 0.0787, true},
    {Intent::Encouraging, "encouraging", 0.0537, true},
    {Intent::Sympathizing, "sympathizing", 0.0537, true},
    {Intent::Wishing, "wishing", 0.0441, true},
    {Intent::Suggesting, "suggesting", 0.0403, true},
    {Intent::SharingOwnThoughts, "sharing_own_thoughts", 0.0403, false},
    {Intent::SharingExperience, "sharing_experience", 0.0384, false},
    {Intent::Advising, "advising", 0.0269, false},
    {Intent::ExpressingCare, "expressing_care", 0.0230, false},
    {Intent::ExpressingRelief, "expressing_relief", 0.0153, false},
    {Intent::Disapproving, "disapproving", 0.0115, false},
    {Intent::Appreciating, "appreciating", 0.0095, false},
}};

constexpr std::string_view kNeutral = "neutral";

}  // namespace

const std::array<IntentInfo, kIntentCount>& intent_table() { return kIntents; }

const IntentInfo& intent_info(Intent intent) { return kIntents[static_cast<std::size_t>(intent)]; }

std::string_view intent_name(Intent intent) { return intent_info(intent).name; }

std::optional<Intent> intent_from_name(std::string_view name) {
  for (const auto& info : kIntents) {
    if (info.name == name) return info.intent;
  }
  return std::nullopt;
}

bool is_core(Intent intent) { return intent_info(intent).core; }

std::string_view valence_name(Valence v) {
  switch (v) {
    case Valence::Positive:
      return "positive";
    case Valence::Negative:
      return "negative";
    case Valence::None:
      break;
  }
  return "none";
}

LabelSpace::LabelSpace(std::vector<Emotion> emotions) : emotions_(std::move(emotions)) {
  for (std::size_t i = 0; i < emotions_.size(); ++i) {
    const auto& name = emotions_[i].name;
    if (name.empty()) throw InputError("emotion with empty name");
    if (name == kNeutral || intent_from_name(name)) {
      throw InputError("emotion name collides with a reserved label: " + name);
    }
    if (!by_name_.emplace(name, i).second) throw InputError("duplicate emotion name: " + name);
  }
}

std::optional<std::size_t> LabelSpace::find_emotion(std::string_view name) const {
  auto it = by_name_.find(std::string(name));
  if (it == by_name_.end()) return std::nullopt;
  return it->second;
}

std::size_t LabelSpace::class_id(const Label& label) const {
  switch (label.kind()) {
    case Label::Kind::Emotion:
      if (label.emotion_index() >= emotions_.size()) throw InvariantError("emotion index out of range");
      return label.emotion_index();
    case Label::Kind::Intent:
      if (is_core(label.as_intent())) return emotions_.size() + static_cast<std::size_t>(label.as_intent());
      return neutral_id();
    case Label::Kind::Neutral:
      break;
  }
  return neutral_id();
}

Label LabelSpace::class_label(std::size_t id) const {
  if (id < emotions_.size()) return Label::emotion(id);
  if (id < emotions_.size() + kCoreIntentCount) return Label::intent(static_cast<Intent>(id - emotions_.size()));
  if (id == neutral_id()) return Label::neutral();
  throw InvariantError("class id out of range: " + std::to_string(id));
}

std::string LabelSpace::name(const Label& label) const {
  switch (label.kind()) {
    case Label::Kind::Emotion:
      return emotions_.at(label.emotion_index()).name;
    case Label::Kind::Intent:
      return std::string(intent_name(label.as_intent()));
    case Label::Kind::Neutral:
      break;
  }
  return std::string(kNeutral);
}

std::optional<Label> LabelSpace::parse(std::string_view name) const {
  if (name == kNeutral) return Label::neutral();
  if (auto e = find_emotion(name)) return Label::emotion(*e);
  if (auto i = intent_from_name(name)) return Label::intent(*i);
  return std::nullopt;
}

Valence LabelSpace::valence_of(const Label& label) const {
  if (!label.is_emotion()) return Valence::None;
  return emotions_.at(label.emotion_index()).valence;
}

Valence LabelSpace::valence_of(std::string_view emotion_name) const {
  auto idx = find_emotion(emotion_name);
  if (!idx) throw InputError("unknown emotion: " + std::string(emotion_name));
  return emotions_[*idx].valence;
}

LabelSpace load_label_config(const nlohmann::json& doc, LabelConfigOptions options) {
  if (!doc.is_object()) throw InputError("label config must be a JSON object");
  if (!doc.contains("version") || !doc["version"].is_number_integer() || doc["version"].get<int>() != 1) {
    throw InputError("label config: unsupported or missing version");
  }
  if (!doc.contains("emotions") || !doc["emotions"].is_array()) {
    throw InputError("label config: missing emotions array");
  }
  std::vector<Emotion> emotions;
  for (const auto& entry : doc["emotions"]) {
    if (!entry.is_object() || !entry.contains("name") || !entry["name"].is_string()) {
      throw InputError("label config: emotion entry without a name");
    }
    Emotion e;
    e.name = entry["name"].get<std::string>();
    if (!entry.contains("valence") || !entry["valence"].is_string()) {
      throw InputError("label config: missing valence for " + e.name);
    }
    auto v = entry["valence"].get<std::string>();
    if (v == "positive") {
      e.valence = Valence::Positive;
    } else if (v == "negative") {
      e.valence = Valence::Negative;
    } else {
      throw InputError("label config: bad valence '" + v + "' for " + e.name);
    }
    e.basic = entry.value("basic", false);
    emotions.push_back(std::move(e));
  }
  if (doc.contains("intents")) {
    // Intents are fixed; a listed set must agree with the built-in taxonomy.
    std::set<std::string> listed;
    for (const auto& i : doc["intents"]) {
      auto name = i.get<std::string>();
      if (!intent_from_name(name)) throw InputError("label config: unknown intent " + name);
      if (!listed.insert(name).second) throw InputError("label config: duplicate intent " + name);
    }
    if (listed.size() != kIntentCount) throw InputError("label config: intents must list all 15 intents");
  }
  if (options.strict) {
    if (emotions.size() != kDefaultEmotionCount) {
      throw InputError("label config: expected 32 emotions, got " + std::to_string(emotions.size()));
    }
    std::size_t basic = 0;
    for (const auto& e : emotions) basic += e.basic ? 1 : 0;
    if (basic != 8) throw InputError("label config: expected 8 basic emotions, got " + std::to_string(basic));
  }
  return LabelSpace(std::move(emotions));
}

LabelSpace load_label_config_file(const std::string& path, LabelConfigOptions options) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open label config: " + path);
  nlohmann::json doc;
  try {
    in >> doc;
  } catch (const nlohmann::json::exception& e) {
    throw InputError("label config " + path + ": " + e.what());
  }
  return load_label_config(doc, options);
}

LabelSpace default_label_space() { return load_label_config(default_label_config()); }

}  // namespace empdialog
