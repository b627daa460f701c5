#include <algorithm>
#include <bit>
#include <charconv>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numeric>
#include <random>
#include <sstream>

#include "agedg/data.hpp"
#include "agedg/error.hpp"

namespace agedg::data {

static_assert(std::endian::native == std::endian::little,
              "sidecar arrays are written in host order, which must be little-endian");

namespace {

constexpr std::array<std::string_view, 6> kManifestHeader{"id",      "path",    "age",
                                                          "emotion", "valence", "arousal"};
constexpr char kArrayMagic[8] = {'A', 'G', 'D', 'G', 'A', 'R', 'R', '1'};
constexpr std::uint32_t kArrayVersion = 1;

std::string trim(std::string_view s) {
  std::size_t b = 0;
  std::size_t e = s.size();
  while (b < e && (s[b] == ' ' || s[b] == '\t' || s[b] == '\r')) ++b;
  while (e > b && (s[e - 1] == ' ' || s[e - 1] == '\t' || s[e - 1] == '\r')) --e;
  return std::string(s.substr(b, e - b));
}

// RFC 4180 field splitting for one physical line (no embedded newlines).
std::vector<std::string> split_csv_line(std::string_view line, std::size_t line_no) {
  std::vector<std::string> fields;
  std::string cur;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"') {
        if (i + 1 < line.size() && line[i + 1] == '"') {
          cur += '"';
          ++i;
        } else {
          quoted = false;
        }
      } else {
        cur += c;
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      fields.push_back(trim(cur));
      cur.clear();
    } else {
      cur += c;
    }
  }
  if (quoted) throw DataError(line_no, "row", "unterminated quoted field");
  fields.push_back(trim(cur));
  return fields;
}

std::string csv_escape(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + '"';
}

double parse_real(const std::string& text, std::size_t line, const char* field) {
  double value = 0.0;
  const auto* end = text.data() + text.size();
  const auto [ptr, ec] = std::from_chars(text.data(), end, value);
  if (text.empty() || ec != std::errc() || ptr != end) {
    throw DataError(line, field, "not a number: '" + text + "'");
  }
  if (!std::isfinite(value)) throw DataError(line, field, "value is not finite");
  return value;
}

std::string format_real(double v) {
  std::array<char, 32> buf{};
  const auto [ptr, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), v);
  return std::string(buf.data(), ptr);
}

template <class T>
void write_pod(std::ostream& os, const T& v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <class T>
T read_pod(std::istream& is, const std::filesystem::path& path) {
  T v{};
  is.read(reinterpret_cast<char*>(&v), sizeof(T));
  if (!is) throw DataError("truncated input array file " + path.string());
  return v;
}

}  // namespace

ManifestLoad load_manifest(const std::filesystem::path& path, const ManifestOptions& options) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open manifest " + path.string());

  ManifestLoad result;
  std::string line;
  std::size_t line_no = 0;
  if (!std::getline(in, line)) throw DataError(1, "header", "manifest is empty");
  ++line_no;
  if (line.size() >= 3 && line.compare(0, 3, "\xEF\xBB\xBF") == 0) line.erase(0, 3);
  const auto header = split_csv_line(line, line_no);
  if (header.size() != kManifestHeader.size() ||
      !std::equal(header.begin(), header.end(), kManifestHeader.begin())) {
    throw DataError(1, "header", "expected 'id,path,age,emotion,valence,arousal'");
  }

  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    const auto f = split_csv_line(line, line_no);
    if (f.size() != kManifestHeader.size()) {
      throw DataError(line_no, "row",
                      "expected 6 fields, found " + std::to_string(f.size()));
    }
    Sample s;
    s.id = f[0];
    if (s.id.empty()) throw DataError(line_no, "id", "empty id");
    s.path = f[1];
    s.apparent_age = parse_real(f[2], line_no, "age");
    const auto emotion = parse_emotion(f[3]);
    if (!emotion) throw DataError(line_no, "emotion", "unknown emotion '" + f[3] + "'");
    s.annotation.emotion = *emotion;
    s.annotation.valence = parse_real(f[4], line_no, "valence");
    s.annotation.arousal = parse_real(f[5], line_no, "arousal");
    if (s.annotation.valence < -1.0 || s.annotation.valence > 1.0) {
      throw DataError(line_no, "valence", "valence out of range");
    }
    if (s.annotation.arousal < -1.0 || s.annotation.arousal > 1.0) {
      throw DataError(line_no, "arousal", "arousal out of range");
    }
    if (s.apparent_age < 18.0 || s.apparent_age > 85.0) {
      ++result.skipped_rows;
      result.skipped_diagnostics.push_back("line " + std::to_string(line_no) + ": age " + f[2] +
                                           " outside [18, 85], row skipped");
      continue;
    }
    s.domain = assign_age_group(s.apparent_age);
    if (options.check_paths && s.path.find('#') == std::string::npos) {
      const auto resolved = path.parent_path() / s.path;
      if (!std::filesystem::exists(resolved)) {
        throw DataError(line_no, "path", "file does not exist: " + resolved.string());
      }
    }
    result.samples.push_back(std::move(s));
  }
  return result;
}

void write_manifest(const std::filesystem::path& path, const std::vector<Sample>& samples) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot write manifest " + path.string());
  out << "id,path,age,emotion,valence,arousal\n";
  for (const auto& s : samples) {
    out << csv_escape(s.id) << ',' << csv_escape(s.path) << ',' << format_real(s.apparent_age)
        << ',' << emotion_name(s.annotation.emotion) << ',' << format_real(s.annotation.valence)
        << ',' << format_real(s.annotation.arousal) << '\n';
  }
  if (!out) throw DataError("failed writing manifest " + path.string());
}

void write_input_array(const std::filesystem::path& path, const InputShape& shape,
                       const std::vector<Sample>& samples) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot write input array " + path.string());
  out.write(kArrayMagic, sizeof(kArrayMagic));
  write_pod(out, kArrayVersion);
  write_pod(out, static_cast<std::uint32_t>(shape.mode));
  write_pod(out, static_cast<std::uint64_t>(samples.size()));
  write_pod(out, static_cast<std::uint64_t>(shape.height));
  write_pod(out, static_cast<std::uint64_t>(shape.width));
  write_pod(out, static_cast<std::uint64_t>(shape.channels));
  for (const auto& s : samples) {
    if (s.input.size() != shape.size()) {
      throw ShapeError("sample '" + s.id + "' input size does not match the array shape");
    }
    out.write(reinterpret_cast<const char*>(s.input.data()),
              static_cast<std::streamsize>(s.input.size() * sizeof(double)));
  }
  if (!out) throw DataError("failed writing input array " + path.string());
}

InputArray read_input_array(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open input array " + path.string());
  char magic[8];
  in.read(magic, sizeof(magic));
  if (!in || std::memcmp(magic, kArrayMagic, sizeof(magic)) != 0) {
    throw DataError(path.string() + " is not an input array file");
  }
  const auto version = read_pod<std::uint32_t>(in, path);
  if (version != kArrayVersion) {
    throw DataError("input array version " + std::to_string(version) + " unsupported");
  }
  InputArray arr;
  const auto mode = read_pod<std::uint32_t>(in, path);
  if (mode > 1) throw DataError("input array has unknown mode " + std::to_string(mode));
  arr.shape.mode = static_cast<InputMode>(mode);
  const auto rows = read_pod<std::uint64_t>(in, path);
  arr.shape.height = read_pod<std::uint64_t>(in, path);
  arr.shape.width = read_pod<std::uint64_t>(in, path);
  arr.shape.channels = read_pod<std::uint64_t>(in, path);
  arr.values = Matrix<double>(rows, arr.shape.size());
  in.read(reinterpret_cast<char*>(arr.values.data.data()),
          static_cast<std::streamsize>(arr.values.data.size() * sizeof(double)));
  if (!in) throw DataError("truncated input array file " + path.string());
  return arr;
}

Dataset load_dataset(const std::filesystem::path& manifest, const std::filesystem::path& inputs) {
  auto loaded = load_manifest(manifest);
  const auto arr = read_input_array(inputs);
  Dataset ds;
  ds.shape = arr.shape;
  ds.skipped_rows = loaded.skipped_rows;
  for (auto& s : loaded.samples) {
    const auto hash = s.path.rfind('#');
    std::size_t row = 0;
    if (hash == std::string::npos) {
      throw DataError("sample '" + s.id + "' has no sidecar row reference in its path");
    }
    const char* first = s.path.data() + hash + 1;
    const char* last = s.path.data() + s.path.size();
    const auto [ptr, ec] = std::from_chars(first, last, row);
    if (ec != std::errc() || ptr != last || row >= arr.values.rows) {
      throw DataError("sample '" + s.id + "' references an invalid sidecar row");
    }
    const auto r = arr.values.row(row);
    s.input.assign(r.begin(), r.end());
    ds.samples.push_back(std::move(s));
  }
  return ds;
}

DomainSplit split_by_fractions(const std::vector<Sample>& samples, const InputShape& shape,
                               const SplitFractions& fractions, std::uint64_t seed) {
  if (fractions.validation < 0.0 || fractions.test < 0.0 ||
      fractions.validation + fractions.test >= 1.0) {
    throw ConfigError("split fractions must be non-negative and leave room for training");
  }
  DomainSplit split;
  split.shape = shape;
  for (AgeGroup g : kAllAgeGroups) {
    std::vector<std::size_t> members;
    for (std::size_t i = 0; i < samples.size(); ++i) {
      if (samples[i].domain == g) members.push_back(i);
    }
    std::mt19937_64 rng(seed ^ (0x9E3779B97F4A7C15ULL * (ordinal(g) + 1)));
    std::vector<std::size_t> order = members;
    std::shuffle(order.begin(), order.end(), rng);
    const auto n = order.size();
    const auto n_val = static_cast<std::size_t>(std::floor(static_cast<double>(n) * fractions.validation));
    const auto n_test = static_cast<std::size_t>(std::floor(static_cast<double>(n) * fractions.test));
    std::vector<std::size_t> val(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_val));
    std::vector<std::size_t> test(order.begin() + static_cast<std::ptrdiff_t>(n_val),
                                  order.begin() + static_cast<std::ptrdiff_t>(n_val + n_test));
    std::vector<std::size_t> train(order.begin() + static_cast<std::ptrdiff_t>(n_val + n_test),
                                   order.end());
    for (auto* idx : {&train, &val, &test}) std::sort(idx->begin(), idx->end());
    auto& part = split[g];
    for (auto i : train) part.train.push_back(samples[i]);
    for (auto i : val) part.validation.push_back(samples[i]);
    for (auto i : test) part.test.push_back(samples[i]);
  }
  split.validate();
  return split;
}

DomainCounts allocate_budget(const DomainCounts& pools, const DomainSet& active,
                             std::size_t budget) {
  std::uint64_t available = 0;
  for (AgeGroup g : active.members()) available += pools[ordinal(g)];
  if (budget > available) {
    throw ConfigError("training budget " + std::to_string(budget) + " exceeds the pool of " +
                      std::to_string(available) + " samples over domains {" + active.to_string() +
                      "} (shortfall " + std::to_string(budget - available) + ")");
  }
  DomainCounts alloc{};
  if (budget == 0) return alloc;
  std::array<std::uint64_t, kNumAgeGroups> remainder{};
  std::size_t assigned = 0;
  for (AgeGroup g : active.members()) {
    const auto i = ordinal(g);
    const std::uint64_t numerator = static_cast<std::uint64_t>(budget) * pools[i];
    alloc[i] = static_cast<std::size_t>(numerator / available);
    remainder[i] = numerator % available;
    assigned += alloc[i];
  }
  std::vector<std::size_t> order;
  for (AgeGroup g : active.members()) order.push_back(ordinal(g));
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return remainder[a] > remainder[b]; });
  for (std::size_t k = 0; assigned < budget; ++k, ++assigned) ++alloc[order[k]];
  return alloc;
}

DomainSplit equalize_training_budget(const DomainSplit& split, const DomainSet& active,
                                     std::size_t total_budget, std::uint64_t seed) {
  const auto alloc = allocate_budget(split.train_sizes(), active, total_budget);
  DomainSplit out = split;
  for (AgeGroup g : kAllAgeGroups) {
    const auto i = ordinal(g);
    auto& train = out[g].train;
    if (!active.contains(g)) {
      train.clear();
      continue;
    }
    if (alloc[i] == train.size()) continue;
    std::vector<std::size_t> order(train.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::mt19937_64 rng(seed ^ (0xD1B54A32D192ED03ULL * (i + 1)));
    std::shuffle(order.begin(), order.end(), rng);
    order.resize(alloc[i]);
    std::sort(order.begin(), order.end());
    std::vector<Sample> picked;
    picked.reserve(order.size());
    for (auto k : order) picked.push_back(split[g].train[k]);
    train = std::move(picked);
  }
  return out;
}

Matrix<double> stack_inputs(const std::vector<const Sample*>& samples, std::size_t input_size) {
  Matrix<double> m(samples.size(), input_size);
  for (std::size_t r = 0; r < samples.size(); ++r) {
    if (samples[r]->input.size() != input_size) {
      throw ShapeError("sample '" + samples[r]->id + "' has input size " +
                       std::to_string(samples[r]->input.size()) + ", expected " +
                       std::to_string(input_size));
    }
    std::copy(samples[r]->input.begin(), samples[r]->input.end(), m.row(r).begin());
  }
  return m;
}

}  // namespace agedg::data
