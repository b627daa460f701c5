#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <initializer_list>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace agedg {

inline constexpr std::size_t kNumEmotions = 8;
inline constexpr std::size_t kNumAgeGroups = 5;

enum class EmotionClass : std::uint8_t {
  neutral = 0,
  happy,
  sad,
  surprise,
  fear,
  disgust,
  anger,
  contempt,
};

std::string_view emotion_name(EmotionClass e) noexcept;
/// Case-insensitive lookup; nullopt for unknown names.
std::optional<EmotionClass> parse_emotion(std::string_view name) noexcept;
inline std::size_t index_of(EmotionClass e) noexcept { return static_cast<std::size_t>(e); }
EmotionClass emotion_from_index(std::size_t index);

/// Apparent-age domains. Bins are [18,30), [30,40), [40,50), [50,60), [60,85].
enum class AgeGroup : std::uint8_t { a18_30 = 0, a30_40, a40_50, a50_60, a60_85 };

inline constexpr std::array<AgeGroup, kNumAgeGroups> kAllAgeGroups{
    AgeGroup::a18_30, AgeGroup::a30_40, AgeGroup::a40_50, AgeGroup::a50_60, AgeGroup::a60_85};

std::string_view age_group_name(AgeGroup g) noexcept;
std::optional<AgeGroup> parse_age_group(std::string_view name) noexcept;
inline std::size_t ordinal(AgeGroup g) noexcept { return static_cast<std::size_t>(g); }
AgeGroup age_group_from_ordinal(std::size_t ordinal);
/// Lower and upper edge in years.
std::pair<double, double> age_group_edges(AgeGroup g) noexcept;
inline std::size_t adjacency_distance(AgeGroup a, AgeGroup b) noexcept {
  return ordinal(a) > ordinal(b) ? ordinal(a) - ordinal(b) : ordinal(b) - ordinal(a);
}

/// Set of age groups, iterated in ordinal order.
class DomainSet {
 public:
  DomainSet() = default;
  DomainSet(std::initializer_list<AgeGroup> groups) {
    for (AgeGroup g : groups) insert(g);
  }
  static DomainSet all() { return DomainSet(0x1F); }

  void insert(AgeGroup g) noexcept { bits_ |= bit(g); }
  void erase(AgeGroup g) noexcept { bits_ &= static_cast<std::uint8_t>(~bit(g)); }
  bool contains(AgeGroup g) const noexcept { return (bits_ & bit(g)) != 0; }
  bool empty() const noexcept { return bits_ == 0; }
  std::size_t size() const noexcept;
  std::vector<AgeGroup> members() const;
  DomainSet complement() const noexcept { return DomainSet(static_cast<std::uint8_t>(~bits_ & 0x1F)); }
  std::uint8_t mask() const noexcept { return bits_; }
  /// "18-30,30-40" style listing.
  std::string to_string() const;

  friend bool operator==(const DomainSet&, const DomainSet&) = default;

 private:
  explicit DomainSet(std::uint8_t bits) : bits_(bits) {}
  static std::uint8_t bit(AgeGroup g) noexcept {
    return static_cast<std::uint8_t>(1u << static_cast<unsigned>(g));
  }
  std::uint8_t bits_ = 0;
};

/// Throws DataError for non-finite ages or ages outside [18, 85].
AgeGroup assign_age_group(double age);

struct AffectAnnotation {
  EmotionClass emotion = EmotionClass::neutral;
  double valence = 0.0;
  double arousal = 0.0;

  /// Throws DataError naming the offending field.
  void validate() const;
  friend bool operator==(const AffectAnnotation&, const AffectAnnotation&) = default;
};

enum class InputMode : std::uint8_t { features = 0, image = 1 };

/// Shape of one sample's input: a d-vector, or an H x W x C array stored row-major.
struct InputShape {
  InputMode mode = InputMode::features;
  std::size_t height = 1;
  std::size_t width = 1;
  std::size_t channels = 0;

  static InputShape vector(std::size_t dim) { return {InputMode::features, 1, 1, dim}; }
  static InputShape image(std::size_t h, std::size_t w, std::size_t c) {
    return {InputMode::image, h, w, c};
  }
  std::size_t size() const noexcept { return height * width * channels; }
  friend bool operator==(const InputShape&, const InputShape&) = default;
};

struct Sample {
  std::string id;
  std::string path;
  std::vector<double> input;
  AffectAnnotation annotation;
  double apparent_age = 0.0;
  AgeGroup domain = AgeGroup::a18_30;

  friend bool operator==(const Sample&, const Sample&) = default;
};

struct DomainPartition {
  std::vector<Sample> train;
  std::vector<Sample> validation;
  std::vector<Sample> test;
  friend bool operator==(const DomainPartition&, const DomainPartition&) = default;
};

/// Per-age-group train/validation/test partitions over a dataset with uniform input shape.
struct DomainSplit {
  InputShape shape;
  std::array<DomainPartition, kNumAgeGroups> domains;

  DomainPartition& operator[](AgeGroup g) { return domains[ordinal(g)]; }
  const DomainPartition& operator[](AgeGroup g) const { return domains[ordinal(g)]; }

  std::array<std::size_t, kNumAgeGroups> train_sizes() const;
  /// Throws DataError on duplicate ids, inconsistent domains or non-uniform shapes.
  void validate() const;
  friend bool operator==(const DomainSplit&, const DomainSplit&) = default;
};

}  // namespace agedg
