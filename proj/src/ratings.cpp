#include "timbre/ratings.hpp"

#include <algorithm>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include <nlohmann/json.hpp>

#include "timbre/errors.hpp"

namespace timbre {

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::stringstream ss(line);
  std::string field;
  while (std::getline(ss, field, ',')) out.push_back(field);
  return out;
}

}  // namespace

int TimbreTarget::index_of(const std::string& instrument) const {
  auto it = std::find(instruments.begin(), instruments.end(), instrument);
  return it == instruments.end() ? -1 : int(it - instruments.begin());
}

std::vector<RatingRecord> load_ratings_csv(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw IoError("cannot open " + path);
  std::string line;
  if (!std::getline(is, line)) throw FormatError("empty ratings file " + path);
  std::vector<RatingRecord> records;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    auto f = split_csv_line(line);
    if (f.size() != 7)
      throw FormatError("ratings row needs 7 fields: " + line);
    RatingRecord r;
    r.study_id = f[0];
    r.subject_id = f[1];
    r.instrument_a = f[2];
    r.instrument_b = f[3];
    r.value = std::stod(f[4]);
    r.scale_min = std::stod(f[5]);
    r.scale_max = std::stod(f[6]);
    if (r.instrument_a == r.instrument_b)
      throw FormatError("self-pair rating for " + r.instrument_a);
    records.push_back(std::move(r));
  }
  return records;
}

std::vector<RatingRecord> normalize_studies(std::vector<RatingRecord> records) {
  for (auto& r : records) {
    if (!(r.scale_max > r.scale_min))
      throw DegenerateScale("study " + r.study_id + " has a degenerate scale");
    r.value = (r.value - r.scale_min) / (r.scale_max - r.scale_min);
    r.scale_min = 0.0;
    r.scale_max = 1.0;
  }
  return records;
}

std::vector<std::string> select_common_instruments(
    const std::vector<RatingRecord>& records) {
  std::set<std::string> studies;
  std::map<std::string, std::set<std::string>> studies_of;
  for (const auto& r : records) {
    studies.insert(r.study_id);
    studies_of[r.instrument_a].insert(r.study_id);
    studies_of[r.instrument_b].insert(r.study_id);
  }
  const std::size_t need = studies.size() >= 2 ? 2 : 1;
  std::vector<std::string> candidates;
  for (const auto& [name, in_studies] : studies_of)
    if (in_studies.size() >= need) candidates.push_back(name);
  if (candidates.empty())
    throw NoCommonPairs("no instrument co-occurs across studies");

  const int n = int(candidates.size());
  if (n > 64) throw Unsupported("more than 64 candidate instruments");
  std::map<std::string, int> index;
  for (int i = 0; i < n; ++i) index[candidates[size_t(i)]] = i;
  std::vector<std::uint64_t> adj(size_t(n), 0);
  for (const auto& r : records) {
    auto a = index.find(r.instrument_a), b = index.find(r.instrument_b);
    if (a == index.end() || b == index.end()) continue;
    adj[size_t(a->second)] |= 1ULL << b->second;
    adj[size_t(b->second)] |= 1ULL << a->second;
  }

  // exact maximum clique over the rated-pair graph; candidate sets are tiny
  std::uint64_t best = 0;
  auto grow = [&](auto&& self, std::uint64_t clique, std::uint64_t allowed) -> void {
    if (std::popcount(clique | allowed) <= std::popcount(best)) return;
    if (allowed == 0) {
      if (std::popcount(clique) > std::popcount(best)) best = clique;
      return;
    }
    const int v = std::countr_zero(allowed);
    self(self, clique | (1ULL << v), allowed & adj[size_t(v)]);
    self(self, clique, allowed & ~(1ULL << v));
  };
  grow(grow, 0, n == 64 ? ~0ULL : (1ULL << n) - 1);

  std::vector<std::string> out;
  for (int i = 0; i < n; ++i)
    if (best & (1ULL << i)) out.push_back(candidates[size_t(i)]);
  if (out.size() < 2) throw NoCommonPairs("no fully rated instrument pair");
  return out;
}

DissimilarityMatrix aggregate(const std::vector<RatingRecord>& normalized,
                              const std::vector<std::string>& instruments,
                              bool impute_grand_mean) {
  const int n = int(instruments.size());
  std::map<std::string, int> index;
  for (int i = 0; i < n; ++i) index[instruments[size_t(i)]] = i;

  Eigen::MatrixXd sum = Eigen::MatrixXd::Zero(n, n);
  Eigen::MatrixXd count = Eigen::MatrixXd::Zero(n, n);
  double grand_sum = 0.0;
  long grand_count = 0;
  for (const auto& r : normalized) {
    if (r.value < 0.0 || r.value > 1.0)
      throw FormatError("aggregate expects normalized values in [0,1]");
    auto a = index.find(r.instrument_a), b = index.find(r.instrument_b);
    if (a == index.end() || b == index.end()) continue;
    sum(a->second, b->second) += r.value;
    sum(b->second, a->second) += r.value;
    count(a->second, b->second) += 1;
    count(b->second, a->second) += 1;
    grand_sum += r.value;
    ++grand_count;
  }

  DissimilarityMatrix m;
  m.instruments = instruments;
  m.values = Eigen::MatrixXd::Zero(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j) {
      if (count(i, j) == 0) {
        if (!impute_grand_mean)
          throw MissingPair("no rating for pair " + instruments[size_t(i)] +
                            " / " + instruments[size_t(j)]);
        m.values(i, j) = m.values(j, i) =
            grand_count ? grand_sum / double(grand_count) : 0.0;
      } else {
        m.values(i, j) = m.values(j, i) = sum(i, j) / count(i, j);
      }
    }
  return m;
}

void save_target_json(const std::string& path, const TimbreTarget& target) {
  nlohmann::json j;
  j["instruments"] = target.instruments;
  auto& coords = j["coords"] = nlohmann::json::array();
  for (Eigen::Index r = 0; r < target.coords.rows(); ++r) {
    nlohmann::json row = nlohmann::json::array();
    for (Eigen::Index c = 0; c < target.coords.cols(); ++c)
      row.push_back(target.coords(r, c));
    coords.push_back(row);
  }
  j["eigenvalues"] = std::vector<double>(
      target.eigenvalues.data(),
      target.eigenvalues.data() + target.eigenvalues.size());
  auto& matrix = j["dissimilarity"] = nlohmann::json::array();
  for (Eigen::Index r = 0; r < target.source_matrix.values.rows(); ++r) {
    nlohmann::json row = nlohmann::json::array();
    for (Eigen::Index c = 0; c < target.source_matrix.values.cols(); ++c)
      row.push_back(target.source_matrix.values(r, c));
    matrix.push_back(row);
  }
  std::ofstream os(path);
  if (!os) throw IoError("cannot write " + path);
  os << j.dump(2) << "\n";
}

TimbreTarget load_target_json(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw IoError("cannot open " + path);
  nlohmann::json j = nlohmann::json::parse(is);
  TimbreTarget t;
  t.instruments = j["instruments"].get<std::vector<std::string>>();
  const auto& coords = j["coords"];
  const int n = int(coords.size());
  const int d = n ? int(coords[0].size()) : 0;
  t.coords.resize(n, d);
  for (int r = 0; r < n; ++r)
    for (int c = 0; c < d; ++c) t.coords(r, c) = coords[size_t(r)][size_t(c)];
  auto ev = j["eigenvalues"].get<std::vector<double>>();
  t.eigenvalues = Eigen::Map<Eigen::VectorXd>(ev.data(), Eigen::Index(ev.size()));
  t.source_matrix.instruments = t.instruments;
  const auto& matrix = j["dissimilarity"];
  t.source_matrix.values.resize(n, n);
  for (int r = 0; r < n; ++r)
    for (int c = 0; c < n; ++c)
      t.source_matrix.values(r, c) = matrix[size_t(r)][size_t(c)];
  return t;
}

}  // namespace timbre
