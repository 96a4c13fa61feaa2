#include "timbre/frames.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>

#include <nlohmann/json.hpp>

#include "timbre/binio.hpp"
#include "timbre/errors.hpp"

namespace timbre {

SpectralFrame extract_frame(const Spectrogram& sg, double at_ms) {
  const double duration_ms = sg.duration_s() * 1000.0;
  if (at_ms < 0.0 || at_ms > duration_ms)
    throw OutOfRange("frame time outside the signal duration");
  const auto idx = std::min<Eigen::Index>(
      sg.frames() - 1,
      Eigen::Index(std::llround(at_ms / 1000.0 / sg.hop_seconds)));
  SpectralFrame frame;
  frame.spec = sg.spec;
  if (sg.spec.kind == TransformKind::Nsgt)
    frame.magnitudes = sg.coeffs.col(idx).segment(1, sg.bins() - 2).cwiseAbs();
  else
    frame.magnitudes = sg.coeffs.col(idx).cwiseAbs();
  return frame;
}

double corpus_normalize(std::vector<SpectralFrame>& frames) {
  double maximum = 0.0;
  for (const auto& f : frames)
    if (f.magnitudes.size() > 0)
      maximum = std::max(maximum, f.magnitudes.maxCoeff());
  if (!(maximum > 0.0))
    throw DegenerateCorpus("all frames are zero; nothing to normalize");
  for (auto& f : frames) f.magnitudes /= maximum;
  return maximum;
}

std::vector<std::string> FrameStore::class_list() const {
  std::set<std::string> s;
  for (const auto& m : meta) s.insert(m.class_label);
  return {s.begin(), s.end()};
}

std::vector<int> FrameStore::split_indices(const std::string& split) const {
  std::vector<int> out;
  for (int i = 0; i < int(meta.size()); ++i)
    if (meta[size_t(i)].split == split) out.push_back(i);
  return out;
}

void FrameStore::save(const std::string& path) const {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("cannot write " + path);
  write_magic(os, "TSF1");
  write_le<std::uint8_t>(os, std::uint8_t(spec.kind));
  write_le<std::uint8_t>(os, std::uint8_t(spec.nsgt_scale));
  write_le<double>(os, spec.window_ms);
  write_le<double>(os, spec.hop_ms);
  write_le<double>(os, spec.fmin_hz);
  write_le<double>(os, spec.fmax_hz);
  write_le<double>(os, spec.sample_rate);
  write_le<std::uint32_t>(os, std::uint32_t(frames.cols()));
  write_le<std::uint32_t>(os, std::uint32_t(frames.rows()));
  write_le<double>(os, norm_constant);
  write_le<std::uint64_t>(os, seed);
  for (Eigen::Index r = 0; r < frames.rows(); ++r)
    for (Eigen::Index c = 0; c < frames.cols(); ++c)
      write_le<float>(os, frames(r, c));
  if (!os) throw IoError("failed writing " + path);

  nlohmann::json manifest;
  manifest["seed"] = seed;
  manifest["transform"] = spec.name();
  manifest["norm_constant"] = norm_constant;
  manifest["classes"] = class_list();
  auto& entries = manifest["frames"] = nlohmann::json::array();
  for (const auto& m : meta)
    entries.push_back({{"source_id", m.source_id},
                       {"class_label", m.class_label},
                       {"split", m.split}});
  std::ofstream js(path + ".json");
  if (!js) throw IoError("cannot write " + path + ".json");
  js << manifest.dump(2) << "\n";
}

FrameStore FrameStore::load(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open " + path);
  expect_magic(is, "TSF1");
  FrameStore store;
  store.spec.kind = TransformKind(read_le<std::uint8_t>(is));
  store.spec.nsgt_scale = NsgtScale(read_le<std::uint8_t>(is));
  store.spec.window_ms = read_le<double>(is);
  store.spec.hop_ms = read_le<double>(is);
  store.spec.fmin_hz = read_le<double>(is);
  store.spec.fmax_hz = read_le<double>(is);
  store.spec.sample_rate = read_le<double>(is);
  const auto cols = read_le<std::uint32_t>(is);
  const auto rows = read_le<std::uint32_t>(is);
  store.norm_constant = read_le<double>(is);
  store.seed = read_le<std::uint64_t>(is);
  store.frames.resize(rows, cols);
  for (std::uint32_t r = 0; r < rows; ++r)
    for (std::uint32_t c = 0; c < cols; ++c)
      store.frames(r, c) = read_le<float>(is);

  std::ifstream js(path + ".json");
  if (js) {
    nlohmann::json manifest = nlohmann::json::parse(js);
    for (const auto& e : manifest["frames"])
      store.meta.push_back({e["source_id"].get<std::string>(),
                            e["class_label"].get<std::string>(),
                            e["split"].get<std::string>()});
    if (store.meta.size() != rows)
      throw FormatError("manifest entry count disagrees with " + path);
  }
  return store;
}

}  // namespace timbre
