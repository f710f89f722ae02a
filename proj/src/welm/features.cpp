#include "focusclf/welm/features.hpp"

#include <charconv>
#include <fstream>
#include <numeric>
#include <sstream>

#include <fmt/format.h>

#include "focusclf/cnn/train.hpp"
#include "focusclf/errors.hpp"

namespace focusclf::welm {

namespace {

constexpr Tap kAllTaps[] = {Tap::C1, Tap::C2, Tap::C3, Tap::C4, Tap::FC1, Tap::FC2};

bool is_conv(Tap t) { return t == Tap::C1 || t == Tap::C2 || t == Tap::C3 || t == Tap::C4; }

std::size_t conv_index(Tap t) { return static_cast<std::size_t>(t); }

// Row i of an N×... activation reduced to features.
std::vector<double> conv_row(const TensorF& act, std::size_t i, Pooling pooling) {
  const std::size_t h = act.extent(1), w = act.extent(2), k = act.extent(3);
  const float* base = act.ptr() + i * h * w * k;
  if (pooling == Pooling::Flatten) return std::vector<double>(base, base + h * w * k);
  std::vector<double> out(k, 0.0);
  for (std::size_t p = 0; p < h * w; ++p)
    for (std::size_t c = 0; c < k; ++c) out[c] += base[p * k + c];
  for (double& v : out) v /= static_cast<double>(h * w);
  return out;
}

std::vector<double> dense_row(const TensorF& act, std::size_t i) {
  const std::size_t k = act.extent(1);
  return std::vector<double>(act.ptr() + i * k, act.ptr() + (i + 1) * k);
}

std::vector<std::string> split(const std::string& line, char sep) {
  std::vector<std::string> out;
  std::string cell;
  std::istringstream in(line);
  while (std::getline(in, cell, sep)) out.push_back(cell);
  if (!line.empty() && line.back() == sep) out.emplace_back();
  return out;
}

}  // namespace

std::string to_string(Tap tap) {
  static const char* kNames[] = {"C1", "C2", "C3", "C4", "FC1", "FC2"};
  return kNames[static_cast<int>(tap)];
}

std::string to_string(Pooling pooling) { return pooling == Pooling::Flatten ? "flatten" : "channel-average"; }

Pooling parse_pooling(const std::string& text) {
  if (text == "channel-average" || text == "average" || text == "avg") return Pooling::ChannelAverage;
  if (text == "flatten") return Pooling::Flatten;
  throw InputError("unknown pooling mode '" + text + "' (expected channel-average or flatten)");
}

std::vector<Tap> parse_taps(const std::string& text) {
  std::vector<Tap> taps;
  for (const auto& name : split(text, '+')) {
    bool found = false;
    for (Tap t : kAllTaps) {
      if (to_string(t) == name) {
        taps.push_back(t);
        found = true;
      }
    }
    if (!found) throw InputError("unknown feature tap '" + name + "' (expected C1..C4, FC1, FC2)");
  }
  if (taps.empty()) throw InputError("no feature taps given");
  return taps;
}

std::string taps_name(std::span<const Tap> taps) {
  std::string out;
  for (Tap t : taps) out += (out.empty() ? "" : "+") + to_string(t);
  return out;
}

std::vector<std::vector<Tap>> default_tap_sets() {
  return {{Tap::C1}, {Tap::C2}, {Tap::C3}, {Tap::C4}, {Tap::FC1}, {Tap::FC2}, {Tap::C1, Tap::C4}};
}

std::size_t feature_dimension(const cnn::ModelConfig& config, std::span<const Tap> taps, Pooling pooling) {
  const auto sizes = cnn::stage_sizes(config.input_size);
  static constexpr std::size_t kStage[] = {0, 1, 3, 4};  // C1, C2, C3, C4 positions in stage_sizes
  std::size_t d = 0;
  for (Tap t : taps) {
    if (is_conv(t)) {
      const std::size_t k = config.conv_widths[conv_index(t)];
      const std::size_t side = sizes[kStage[conv_index(t)]];
      d += pooling == Pooling::Flatten ? side * side * k : k;
    } else {
      d += config.fc_widths[t == Tap::FC1 ? 0 : 1];
    }
  }
  return d;
}

TapFeatures extract_tap_features(const cnn::ModelParamsF& params, std::span<const data::Patch> patches, Pooling pooling,
                                 std::size_t batch_size) {
  TapFeatures out;
  for (Tap t : kAllTaps) out[t].reserve(patches.size());
  for (std::size_t start = 0; start < patches.size(); start += batch_size) {
    const std::size_t end = std::min(patches.size(), start + batch_size);
    std::vector<std::size_t> idx(end - start);
    std::iota(idx.begin(), idx.end(), start);
    cnn::ForwardCache<float> cache;
    cnn::forward(params, cnn::stack_patches(patches, idx), cnn::Mode::Infer, &cache);
    for (std::size_t i = 0; i < idx.size(); ++i) {
      for (std::size_t c = 0; c < 4; ++c) out[kAllTaps[c]].push_back(conv_row(cache.activation[c], i, pooling));
      out[Tap::FC1].push_back(dense_row(cache.fc1, i));
      out[Tap::FC2].push_back(dense_row(cache.fc2, i));
    }
  }
  return out;
}

std::vector<FeatureVector> compose_features(const TapFeatures& all, std::span<const data::Patch> patches,
                                            std::span<const Tap> taps, Pooling pooling) {
  if (taps.empty()) throw InputError("no feature taps given");
  std::vector<FeatureVector> out(patches.size());
  for (std::size_t i = 0; i < patches.size(); ++i) {
    auto& f = out[i];
    f.lesion_id = patches[i].record.lesion_id;
    f.label = patches[i].record.label == data::Label::Unknown ? -1 : data::class_index(patches[i].record.label);
    f.taps.assign(taps.begin(), taps.end());
    f.pooling = pooling;
    for (Tap t : taps) {
      const auto& row = all.at(t).at(i);
      f.values.insert(f.values.end(), row.begin(), row.end());
    }
  }
  return out;
}

std::vector<FeatureVector> extract_features(const cnn::ModelParamsF& params, std::span<const data::Patch> patches,
                                            std::span<const Tap> taps, Pooling pooling) {
  return compose_features(extract_tap_features(params, patches, pooling), patches, taps, pooling);
}

FeatureVector extract_features(const cnn::ModelParamsF& params, const data::Patch& patch, std::span<const Tap> taps,
                               Pooling pooling) {
  return extract_features(params, std::span<const data::Patch>(&patch, 1), taps, pooling)[0];
}

void write_features_csv(const std::filesystem::path& path, std::span<const FeatureVector> features) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  const std::size_t d = features.empty() ? 0 : features[0].values.size();
  out << "lesion_id,label";
  for (std::size_t j = 0; j < d; ++j) out << ",f" << j;
  out << '\n';
  for (const auto& f : features) {
    if (f.values.size() != d) throw ShapeError("feature rows have differing dimensions");
    out << f.lesion_id << ',' << (f.label >= 0 ? std::to_string(f.label) : "");
    for (double v : f.values) out << ',' << fmt::format("{}", v);
    out << '\n';
  }
  if (!out) throw IoError("failed writing " + path.string());
}

std::vector<FeatureVector> read_features_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read " + path.string());
  std::string line;
  if (!std::getline(in, line) || line.rfind("lesion_id,label", 0) != 0) {
    throw FormatError(path.string() + ": missing 'lesion_id,label,...' header");
  }
  const std::size_t columns = split(line, ',').size();
  std::vector<FeatureVector> out;
  std::size_t row = 1;
  while (std::getline(in, line)) {
    ++row;
    if (line.empty()) continue;
    const auto cells = split(line, ',');
    if (cells.size() != columns) {
      throw FormatError(fmt::format("{}:{}: expected {} columns, found {}", path.string(), row, columns, cells.size()));
    }
    FeatureVector f;
    f.lesion_id = cells[0];
    f.label = cells[1].empty() ? -1 : data::class_index(data::parse_label(cells[1]));
    for (std::size_t j = 2; j < cells.size(); ++j) {
      double v = 0;
      const auto* end = cells[j].data() + cells[j].size();
      auto [ptr, ec] = std::from_chars(cells[j].data(), end, v);
      if (ec != std::errc() || ptr != end) {
        throw FormatError(fmt::format("{}:{}: bad number '{}'", path.string(), row, cells[j]));
      }
      f.values.push_back(v);
    }
    out.push_back(std::move(f));
  }
  return out;
}

std::vector<std::vector<double>> feature_matrix(std::span<const FeatureVector> features) {
  std::vector<std::vector<double>> x;
  x.reserve(features.size());
  for (const auto& f : features) x.push_back(f.values);
  return x;
}

std::vector<int> feature_labels(std::span<const FeatureVector> features) {
  std::vector<int> y;
  for (const auto& f : features) y.push_back(f.label);
  return y;
}

}  // namespace focusclf::welm
