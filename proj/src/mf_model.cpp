#include "pamacf/mf_model.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>
#include <string>

#include "pamacf/rng.hpp"

namespace pamacf {

namespace {

void put_u32(std::ostream& out, std::uint32_t v) {
  unsigned char b[4] = {static_cast<unsigned char>(v), static_cast<unsigned char>(v >> 8),
                        static_cast<unsigned char>(v >> 16), static_cast<unsigned char>(v >> 24)};
  out.write(reinterpret_cast<const char*>(b), 4);
}

std::uint32_t get_u32(std::istream& in, const char* what) {
  unsigned char b[4];
  if (!in.read(reinterpret_cast<char*>(b), 4)) throw DataError(std::string("model file truncated while reading ") + what);
  return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
         (static_cast<std::uint32_t>(b[2]) << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
}

void put_matrix(std::ostream& out, const std::vector<double>& data) {
  for (double x : data) put_u32(out, std::bit_cast<std::uint32_t>(static_cast<float>(x)));
}

void get_matrix(std::istream& in, std::vector<double>& data, const char* what) {
  for (double& x : data) x = static_cast<double>(std::bit_cast<float>(get_u32(in, what)));
}

}  // namespace

EmbeddingModel::EmbeddingModel(std::size_t n_users, std::size_t n_items, std::size_t dim)
    : n_users_(n_users), n_items_(n_items), dim_(dim), users_(n_users * dim, 0.0), items_(n_items * dim, 0.0) {}

void EmbeddingModel::round_to_storage() {
  for (double& x : users_) x = static_cast<double>(static_cast<float>(x));
  for (double& x : items_) x = static_cast<double>(static_cast<float>(x));
}

bool EmbeddingModel::all_finite() const {
  auto finite = [](double x) { return std::isfinite(x); };
  return std::all_of(users_.begin(), users_.end(), finite) && std::all_of(items_.begin(), items_.end(), finite);
}

EmbeddingModel init_embeddings(std::size_t n_users, std::size_t n_items, std::size_t dim, std::uint64_t seed,
                               double scale) {
  if (dim == 0) throw UsageError("embedding dimension must be >= 1");
  if (!(scale >= 0.0)) throw UsageError("init scale must be >= 0");
  EmbeddingModel m(n_users, n_items, dim);
  if (scale == 0.0) return m;
  Rng rng = make_rng(seed, 0xE11B);
  std::normal_distribution<double> normal(0.0, scale);
  for (double& x : m.user_data()) x = normal(rng);
  for (double& x : m.item_data()) x = normal(rng);
  return m;
}

double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) s += a[k] * b[k];
  return s;
}

double l2_norm(std::span<const double> a) { return std::sqrt(dot(a, a)); }

double score(const EmbeddingModel& m, UserId u, ItemId i) {
  if (u >= m.n_users() || i >= m.n_items())
    throw DataError("score: id out of range (user " + std::to_string(u) + ", item " + std::to_string(i) + ")");
  return dot(m.user(u), m.item(i));
}

std::vector<ItemId> recommend_top_k(const EmbeddingModel& m, const InteractionDataset& ds, UserId u, std::size_t k) {
  if (k == 0) throw UsageError("k must be >= 1");
  const auto& seen = ds.train[u];
  std::vector<std::pair<double, ItemId>> cand;
  cand.reserve(m.n_items() - std::min(m.n_items(), seen.size()));
  auto user = m.user(u);
  std::size_t next_seen = 0;
  for (ItemId i = 0; i < m.n_items(); ++i) {
    if (next_seen < seen.size() && seen[next_seen] == i) {
      ++next_seen;
      continue;
    }
    cand.emplace_back(dot(user, m.item(i)), i);
  }
  const std::size_t take = std::min(k, cand.size());
  auto better = [](const auto& a, const auto& b) { return a.first > b.first || (a.first == b.first && a.second < b.second); };
  std::partial_sort(cand.begin(), cand.begin() + static_cast<std::ptrdiff_t>(take), cand.end(), better);
  std::vector<ItemId> out(take);
  for (std::size_t r = 0; r < take; ++r) out[r] = cand[r].second;
  return out;
}

double user_norm(const EmbeddingModel& m, UserId u) { return l2_norm(m.user(u)); }

double mean_user_norm(const EmbeddingModel& m) {
  if (m.n_users() == 0) return 0.0;
  double total = 0.0;
  for (UserId u = 0; u < m.n_users(); ++u) total += user_norm(m, u);
  return total / static_cast<double>(m.n_users());
}

void save_model(const EmbeddingModel& m, std::ostream& out) {
  out.write(kModelMagic, 4);
  put_u32(out, kModelVersion);
  put_u32(out, static_cast<std::uint32_t>(m.n_users()));
  put_u32(out, static_cast<std::uint32_t>(m.n_items()));
  put_u32(out, static_cast<std::uint32_t>(m.dim()));
  put_matrix(out, m.user_data());
  put_matrix(out, m.item_data());
  if (!out) throw DataError("failed writing model");
}

void save_model(const EmbeddingModel& m, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path.string());
  save_model(m, out);
}

EmbeddingModel load_model(std::istream& in) {
  char magic[4];
  if (!in.read(magic, 4)) throw DataError("model file truncated while reading magic");
  if (std::memcmp(magic, kModelMagic, 4) != 0) throw DataError("bad model magic; expected \"PAMA\"");
  auto version = get_u32(in, "version");
  if (version != kModelVersion)
    throw DataError("unsupported model version " + std::to_string(version) + "; expected 1");
  auto n_users = get_u32(in, "n_users");
  auto n_items = get_u32(in, "n_items");
  auto dim = get_u32(in, "dim");
  if (dim == 0) throw DataError("model dimension must be >= 1");
  EmbeddingModel m(n_users, n_items, dim);
  get_matrix(in, m.user_data(), "user matrix");
  get_matrix(in, m.item_data(), "item matrix");
  if (in.peek() != std::char_traits<char>::eof()) throw DataError("trailing bytes after model payload");
  return m;
}

EmbeddingModel load_model(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path.string());
  return load_model(in);
}

}  // namespace pamacf
