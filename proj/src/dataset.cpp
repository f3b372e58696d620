#include "pamacf/dataset.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>
#include <unordered_map>

namespace pamacf {

namespace {

bool sorted_contains(const ItemList& list, ItemId i) {
  return std::binary_search(list.begin(), list.end(), i);
}

void sort_unique(ItemList& list) {
  std::sort(list.begin(), list.end());
  list.erase(std::unique(list.begin(), list.end()), list.end());
}

std::vector<std::string_view> tokenize(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t pos = 0;
  while (pos < line.size()) {
    while (pos < line.size() && std::isspace(static_cast<unsigned char>(line[pos]))) ++pos;
    std::size_t end = pos;
    while (end < line.size() && !std::isspace(static_cast<unsigned char>(line[end]))) ++end;
    if (end > pos) out.push_back(line.substr(pos, end - pos));
    pos = end;
  }
  return out;
}

std::uint64_t parse_id(std::string_view tok, std::string_view source, std::size_t line_no) {
  std::uint64_t value = 0;
  auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), value);
  if (ec != std::errc() || ptr != tok.data() + tok.size()) {
    std::ostringstream msg;
    msg << source << ":" << line_no << ": malformed token '" << tok << "'";
    throw DataError(msg.str());
  }
  return value;
}

// Integer-safe rounding of fraction*count; guards against 0.2*10 = 2.0000000000000004.
std::size_t ceil_count(double fraction, std::size_t count) {
  return static_cast<std::size_t>(std::ceil(fraction * static_cast<double>(count) - 1e-9));
}

std::size_t floor_count(double fraction, std::size_t count) {
  return static_cast<std::size_t>(std::floor(fraction * static_cast<double>(count) + 1e-9));
}

std::vector<ItemList> read_dense_lists(const std::filesystem::path& path, std::size_t n_users) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path.string());
  std::vector<ItemList> lists(n_users);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line[0] == '#') continue;
    auto toks = tokenize(line);
    if (toks.empty()) continue;
    auto u = parse_id(toks[0], path.string(), line_no);
    if (u >= lists.size()) lists.resize(u + 1);
    for (std::size_t k = 1; k < toks.size(); ++k)
      lists[u].push_back(static_cast<ItemId>(parse_id(toks[k], path.string(), line_no)));
    sort_unique(lists[u]);
  }
  return lists;
}

std::vector<std::uint64_t> read_id_map(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path.string());
  std::vector<std::uint64_t> ids;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line[0] == '#' || line.rfind("original_id", 0) == 0) continue;
    auto comma = line.find(',');
    if (comma == std::string::npos) throw DataError(path.string() + ":" + std::to_string(line_no) + ": expected 'original_id,dense_id'");
    auto original = parse_id(std::string_view(line).substr(0, comma), path.string(), line_no);
    auto dense = parse_id(std::string_view(line).substr(comma + 1), path.string(), line_no);
    if (dense >= ids.size()) ids.resize(dense + 1);
    ids[dense] = original;
  }
  return ids;
}

}  // namespace

bool InteractionDataset::in_train(UserId u, ItemId i) const { return sorted_contains(train[u], i); }

bool InteractionDataset::interacted(UserId u, ItemId i) const {
  return sorted_contains(train[u], i) || sorted_contains(validation[u], i) || sorted_contains(test[u], i);
}

std::size_t InteractionDataset::train_interactions() const {
  std::size_t total = 0;
  for (const auto& l : train) total += l.size();
  return total;
}

void InteractionDataset::recompute_popularity() {
  item_popularity.assign(n_items, 0);
  for (const auto& l : train)
    for (ItemId i : l) ++item_popularity[i];
}

void InteractionDataset::check_invariants() const {
  if (train.size() != n_users || validation.size() != n_users || test.size() != n_users)
    throw DataError("split list count does not match n_users");
  if (item_popularity.size() != n_items) throw DataError("item_popularity size does not match n_items");
  std::vector<std::uint32_t> pop(n_items, 0);
  for (std::size_t u = 0; u < n_users; ++u) {
    for (const ItemList* l : {&train[u], &validation[u], &test[u]}) {
      for (std::size_t k = 0; k < l->size(); ++k) {
        if ((*l)[k] >= n_items) throw DataError("item id out of range for user " + std::to_string(u));
        if (k > 0 && (*l)[k - 1] >= (*l)[k]) throw DataError("unsorted or duplicate items for user " + std::to_string(u));
      }
    }
    for (ItemId i : train[u]) {
      ++pop[i];
      if (sorted_contains(validation[u], i) || sorted_contains(test[u], i))
        throw DataError("overlapping splits for user " + std::to_string(u));
    }
    for (ItemId i : validation[u])
      if (sorted_contains(test[u], i)) throw DataError("overlapping splits for user " + std::to_string(u));
  }
  if (pop != item_popularity) throw DataError("item_popularity is stale");
}

void SplitConfig::validate() const {
  if (!(test_fraction >= 0.0 && test_fraction < 1.0)) throw UsageError("test_fraction must be in [0,1)");
  if (!(validation_fraction >= 0.0 && validation_fraction < 1.0))
    throw UsageError("validation_fraction must be in [0,1)");
  if (test_fraction + validation_fraction >= 1.0)
    throw UsageError("test_fraction + validation_fraction must be < 1");
}

InteractionDataset parse_interactions(std::istream& in, std::string_view source) {
  InteractionDataset ds;
  std::unordered_map<std::uint64_t, UserId> user_index;
  std::unordered_map<std::uint64_t, ItemId> item_index;
  std::string line;
  std::size_t line_no = 0;
  bool any_record = false;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line[0] == '#') continue;
    auto toks = tokenize(line);
    if (toks.empty()) continue;
    any_record = true;
    auto raw_user = parse_id(toks[0], source, line_no);
    auto [uit, new_user] = user_index.try_emplace(raw_user, static_cast<UserId>(ds.user_original_ids.size()));
    if (new_user) {
      ds.user_original_ids.push_back(raw_user);
      ds.train.emplace_back();
    }
    auto& list = ds.train[uit->second];
    for (std::size_t k = 1; k < toks.size(); ++k) {
      auto raw_item = parse_id(toks[k], source, line_no);
      auto [iit, new_item] = item_index.try_emplace(raw_item, static_cast<ItemId>(ds.item_original_ids.size()));
      if (new_item) ds.item_original_ids.push_back(raw_item);
      list.push_back(iit->second);
    }
  }
  if (!any_record) throw DataError(std::string(source) + ": no interaction records");
  ds.n_users = ds.train.size();
  ds.n_items = ds.item_original_ids.size();
  for (auto& l : ds.train) sort_unique(l);
  ds.validation.assign(ds.n_users, {});
  ds.test.assign(ds.n_users, {});
  ds.recompute_popularity();
  return ds;
}

InteractionDataset load_interactions(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path.string());
  return parse_interactions(in, path.string());
}

InteractionDataset filter_min_interactions(const InteractionDataset& ds, std::size_t min_k) {
  std::vector<char> keep_user(ds.n_users, 1);
  std::vector<char> keep_item(ds.n_items, 1);
  bool changed = min_k > 0;
  while (changed) {
    changed = false;
    std::vector<std::size_t> item_deg(ds.n_items, 0);
    std::vector<std::size_t> user_deg(ds.n_users, 0);
    for (std::size_t u = 0; u < ds.n_users; ++u) {
      if (!keep_user[u]) continue;
      for (ItemId i : ds.train[u]) {
        if (!keep_item[i]) continue;
        ++user_deg[u];
        ++item_deg[i];
      }
    }
    for (std::size_t u = 0; u < ds.n_users; ++u)
      if (keep_user[u] && user_deg[u] < min_k) keep_user[u] = 0, changed = true;
    for (std::size_t i = 0; i < ds.n_items; ++i)
      if (keep_item[i] && item_deg[i] < min_k) keep_item[i] = 0, changed = true;
  }

  std::vector<ItemId> item_map(ds.n_items, 0);
  InteractionDataset out;
  for (std::size_t i = 0; i < ds.n_items; ++i) {
    if (!keep_item[i]) continue;
    item_map[i] = static_cast<ItemId>(out.item_original_ids.size());
    out.item_original_ids.push_back(ds.item_original_ids[i]);
  }
  auto remap = [&](const ItemList& in) {
    ItemList l;
    for (ItemId i : in)
      if (keep_item[i]) l.push_back(item_map[i]);
    return l;
  };
  for (std::size_t u = 0; u < ds.n_users; ++u) {
    if (!keep_user[u]) continue;
    out.user_original_ids.push_back(ds.user_original_ids[u]);
    out.train.push_back(remap(ds.train[u]));
    out.validation.push_back(remap(ds.validation[u]));
    out.test.push_back(remap(ds.test[u]));
  }
  out.n_users = out.train.size();
  out.n_items = out.item_original_ids.size();
  if (out.n_users == 0 || out.n_items == 0) throw DataError("dataset exhausted by filter");
  out.recompute_popularity();
  return out;
}

InteractionDataset split(const InteractionDataset& ds, const SplitConfig& cfg) {
  cfg.validate();
  InteractionDataset out;
  out.n_items = ds.n_items;
  out.item_original_ids = ds.item_original_ids;
  for (std::size_t u = 0; u < ds.n_users; ++u) {
    if (!ds.validation[u].empty() || !ds.test[u].empty())
      throw DataError("split() expects a dataset with train lists only");
    ItemList items = ds.train[u];
    const std::size_t total = items.size();
    const std::size_t n_test = std::min(total, ceil_count(cfg.test_fraction, total));
    const std::size_t n_valid = std::min(total - n_test, floor_count(cfg.validation_fraction, total));
    Rng rng = make_rng(cfg.seed, u);
    std::shuffle(items.begin(), items.end(), rng);
    ItemList test(items.begin(), items.begin() + n_test);
    ItemList valid(items.begin() + n_test, items.begin() + n_test + n_valid);
    ItemList train(items.begin() + n_test + n_valid, items.end());
    if (train.empty()) continue;
    std::sort(test.begin(), test.end());
    std::sort(valid.begin(), valid.end());
    std::sort(train.begin(), train.end());
    out.user_original_ids.push_back(ds.user_original_ids[u]);
    out.train.push_back(std::move(train));
    out.validation.push_back(std::move(valid));
    out.test.push_back(std::move(test));
  }
  out.n_users = out.train.size();
  if (out.n_users == 0) throw DataError("split left no users with train interactions");
  out.recompute_popularity();
  return out;
}

ItemId sample_negative(const InteractionDataset& ds, UserId u, Rng& rng) {
  if (ds.train[u].size() >= ds.n_items)
    throw DataError("user " + std::to_string(u) + " interacts with every item; no negative exists");
  std::uniform_int_distribution<ItemId> pick(0, static_cast<ItemId>(ds.n_items - 1));
  for (;;) {
    ItemId j = pick(rng);
    if (!ds.in_train(u, j)) return j;
  }
}

void write_interactions(std::ostream& out, const std::vector<ItemList>& lists, UserId first_user) {
  for (std::size_t u = 0; u < lists.size(); ++u) {
    out << (first_user + u);
    for (ItemId i : lists[u]) out << ' ' << i;
    out << '\n';
  }
}

void write_id_map(std::ostream& out, const std::vector<std::uint64_t>& original_ids) {
  out << "original_id,dense_id\n";
  for (std::size_t k = 0; k < original_ids.size(); ++k) out << original_ids[k] << ',' << k << '\n';
}

void save_split_dir(const std::filesystem::path& dir, const InteractionDataset& ds) {
  std::filesystem::create_directories(dir);
  auto write_file = [&](const char* name, auto&& body) {
    std::ofstream out(dir / name);
    if (!out) throw DataError("cannot write " + (dir / name).string());
    body(out);
  };
  write_file("train.txt", [&](std::ostream& o) { write_interactions(o, ds.train); });
  write_file("valid.txt", [&](std::ostream& o) { write_interactions(o, ds.validation); });
  write_file("test.txt", [&](std::ostream& o) { write_interactions(o, ds.test); });
  write_file("users.csv", [&](std::ostream& o) { write_id_map(o, ds.user_original_ids); });
  write_file("items.csv", [&](std::ostream& o) { write_id_map(o, ds.item_original_ids); });
}

InteractionDataset load_split_dir(const std::filesystem::path& dir) {
  InteractionDataset ds;
  ds.user_original_ids = read_id_map(dir / "users.csv");
  ds.item_original_ids = read_id_map(dir / "items.csv");
  ds.n_users = ds.user_original_ids.size();
  ds.n_items = ds.item_original_ids.size();
  ds.train = read_dense_lists(dir / "train.txt", ds.n_users);
  ds.validation = read_dense_lists(dir / "valid.txt", ds.n_users);
  ds.test = read_dense_lists(dir / "test.txt", ds.n_users);
  if (ds.train.size() != ds.n_users || ds.validation.size() != ds.n_users || ds.test.size() != ds.n_users)
    throw DataError(dir.string() + ": user id outside users.csv range");
  for (const auto* lists : {&ds.train, &ds.validation, &ds.test})
    for (const auto& l : *lists)
      if (!l.empty() && l.back() >= ds.n_items) throw DataError(dir.string() + ": item id outside items.csv range");
  ds.recompute_popularity();
  ds.check_invariants();
  return ds;
}

}  // namespace pamacf
