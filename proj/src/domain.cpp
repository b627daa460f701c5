#include "agedg/domain.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <unordered_set>

#include "agedg/error.hpp"

namespace agedg {

namespace {

constexpr std::array<std::string_view, kNumEmotions> kEmotionNames{
    "Neutral", "Happy", "Sad", "Surprise", "Fear", "Disgust", "Anger", "Contempt"};

constexpr std::array<std::string_view, kNumAgeGroups> kAgeGroupNames{"18-30", "30-40", "40-50",
                                                                     "50-60", "60-85"};

constexpr std::array<std::pair<double, double>, kNumAgeGroups> kAgeEdges{
    {{18.0, 30.0}, {30.0, 40.0}, {40.0, 50.0}, {50.0, 60.0}, {60.0, 85.0}}};

bool iequals(std::string_view a, std::string_view b) {
  return a.size() == b.size() && std::equal(a.begin(), a.end(), b.begin(), [](char x, char y) {
           return std::tolower(static_cast<unsigned char>(x)) ==
                  std::tolower(static_cast<unsigned char>(y));
         });
}

}  // namespace

std::string_view emotion_name(EmotionClass e) noexcept { return kEmotionNames[index_of(e)]; }

std::optional<EmotionClass> parse_emotion(std::string_view name) noexcept {
  for (std::size_t i = 0; i < kNumEmotions; ++i) {
    if (iequals(name, kEmotionNames[i])) return static_cast<EmotionClass>(i);
  }
  return std::nullopt;
}

EmotionClass emotion_from_index(std::size_t index) {
  if (index >= kNumEmotions) throw DataError("emotion index " + std::to_string(index) + " out of range");
  return static_cast<EmotionClass>(index);
}

std::string_view age_group_name(AgeGroup g) noexcept { return kAgeGroupNames[ordinal(g)]; }

std::optional<AgeGroup> parse_age_group(std::string_view name) noexcept {
  for (std::size_t i = 0; i < kNumAgeGroups; ++i) {
    if (name == kAgeGroupNames[i]) return static_cast<AgeGroup>(i);
  }
  return std::nullopt;
}

AgeGroup age_group_from_ordinal(std::size_t ord) {
  if (ord >= kNumAgeGroups) throw DataError("age-group ordinal " + std::to_string(ord) + " out of range");
  return static_cast<AgeGroup>(ord);
}

std::pair<double, double> age_group_edges(AgeGroup g) noexcept { return kAgeEdges[ordinal(g)]; }

std::size_t DomainSet::size() const noexcept {
  std::size_t n = 0;
  for (AgeGroup g : kAllAgeGroups) n += contains(g) ? 1 : 0;
  return n;
}

std::vector<AgeGroup> DomainSet::members() const {
  std::vector<AgeGroup> out;
  for (AgeGroup g : kAllAgeGroups) {
    if (contains(g)) out.push_back(g);
  }
  return out;
}

std::string DomainSet::to_string() const {
  std::string out;
  for (AgeGroup g : members()) {
    if (!out.empty()) out += ',';
    out += age_group_name(g);
  }
  return out;
}

AgeGroup assign_age_group(double age) {
  if (!std::isfinite(age)) throw DataError("age is not finite");
  if (age < 18.0 || age > 85.0) {
    throw DataError("age " + std::to_string(age) + " outside [18, 85]");
  }
  for (std::size_t i = 0; i + 1 < kNumAgeGroups; ++i) {
    if (age < kAgeEdges[i].second) return static_cast<AgeGroup>(i);
  }
  return AgeGroup::a60_85;
}

void AffectAnnotation::validate() const {
  if (!std::isfinite(valence) || valence < -1.0 || valence > 1.0) {
    throw DataError("valence out of range");
  }
  if (!std::isfinite(arousal) || arousal < -1.0 || arousal > 1.0) {
    throw DataError("arousal out of range");
  }
}

std::array<std::size_t, kNumAgeGroups> DomainSplit::train_sizes() const {
  std::array<std::size_t, kNumAgeGroups> sizes{};
  for (std::size_t i = 0; i < kNumAgeGroups; ++i) sizes[i] = domains[i].train.size();
  return sizes;
}

void DomainSplit::validate() const {
  std::unordered_set<std::string> seen;
  for (AgeGroup g : kAllAgeGroups) {
    const auto& part = (*this)[g];
    for (const auto* list : {&part.train, &part.validation, &part.test}) {
      for (const auto& s : *list) {
        if (s.domain != g) {
          throw DataError("sample '" + s.id + "' stored under domain " +
                          std::string(age_group_name(g)) + " but assigned to " +
                          std::string(age_group_name(s.domain)));
        }
        if (s.input.size() != shape.size()) {
          throw DataError("sample '" + s.id + "' has input size " +
                          std::to_string(s.input.size()) + ", expected " +
                          std::to_string(shape.size()));
        }
        if (!seen.insert(s.id).second) throw DataError("duplicate sample id '" + s.id + "'");
      }
    }
  }
}

}  // namespace agedg
