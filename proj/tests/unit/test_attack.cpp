#include <doctest.h>

#include <algorithm>
#include <set>

#include "pamacf/attack.hpp"
#include "pamacf/synthetic.hpp"

using namespace pamacf;

namespace {

InteractionDataset synthetic(std::size_t users, std::uint64_t seed = 7) {
  SyntheticConfig cfg;
  cfg.n_users = users;
  cfg.seed = seed;
  return make_two_cluster(cfg);
}

}  // namespace

TEST_SUITE("attack-sim") {
  TEST_CASE("fake user count") {
    CHECK(fake_user_count(200, 0.01) == 2);
    CHECK(fake_user_count(500, 0.01) == 5);
    CHECK(fake_user_count(10, 0.01) == 1);
    CHECK(fake_user_count(200, 0.05) == 10);
  }

  TEST_CASE("profiles contain the targets and the right number of fillers") {
    const auto ds = synthetic(200);
    AttackSpec spec;
    spec.targets = {3, 17, 40};
    spec.filler_count = 12;
    const auto profiles = generate_profiles(ds, spec);
    CHECK(profiles.size() == 2);
    for (const auto& p : profiles) {
      CHECK(p.size() == 15);
      CHECK(std::is_sorted(p.begin(), p.end()));
      for (ItemId t : spec.targets) CHECK(std::binary_search(p.begin(), p.end(), t));
    }
    CHECK(generate_profiles(ds, spec) == profiles);

    spec.filler_count = 0;
    for (const auto& p : generate_profiles(ds, spec)) CHECK(p == ItemList{3, 17, 40});
  }

  TEST_CASE("default filler count follows the mean profile length") {
    const auto ds = synthetic(100);
    const double mean = static_cast<double>(ds.train_interactions()) / static_cast<double>(ds.n_users);
    CHECK(default_filler_count(ds, 3) == static_cast<std::size_t>(std::llround(mean)) - 3);
    CHECK(default_filler_count(ds, 10000) == 0);
  }

  TEST_CASE("bandwagon fillers come from the popular pool") {
    const auto ds = synthetic(200);
    AttackSpec spec;
    spec.method = AttackMethod::bandwagon;
    spec.targets = {0};
    spec.budget = 0.05;
    spec.popular_fraction = 0.1;
    const auto pool = popular_pool(ds, spec.targets, spec.popular_fraction);
    CHECK(pool.size() == 30);
    for (std::size_t k = 1; k < pool.size(); ++k)
      CHECK(ds.item_popularity[pool[k - 1]] >= ds.item_popularity[pool[k]]);
    const std::set<ItemId> allowed(pool.begin(), pool.end());
    for (const auto& p : generate_profiles(ds, spec))
      for (ItemId i : p) CHECK((i == 0 || allowed.count(i) == 1));

    spec.filler_count = 30;
    for (const auto& p : generate_profiles(ds, spec)) {
      std::set<ItemId> fillers(p.begin(), p.end());
      fillers.erase(0);
      CHECK(fillers == allowed);
    }
    spec.filler_count = 31;
    CHECK_THROWS_AS(generate_profiles(ds, spec), DataError);
  }

  TEST_CASE("inject appends train-only users") {
    const auto ds = synthetic(50);
    AttackSpec spec;
    spec.targets = {1};
    const auto same = inject(ds, {}, spec);
    CHECK(same.data.train == ds.train);
    CHECK(same.data.n_users == ds.n_users);
    CHECK(same.fake_count == 0);

    const auto two = inject(ds, {{1, 2}, {1, 5, 9}}, spec);
    CHECK(two.data.n_users == ds.n_users + 2);
    CHECK(two.fake_begin == ds.n_users);
    CHECK(two.is_fake(static_cast<UserId>(ds.n_users + 1)));
    CHECK_FALSE(two.is_fake(0));
    CHECK(two.data.test[ds.n_users].empty());
    CHECK(std::equal(ds.test.begin(), ds.test.end(), two.data.test.begin()));
    CHECK(two.data.item_popularity[1] == ds.item_popularity[1] + 2);
    two.data.check_invariants();

    CHECK_THROWS_AS(inject(ds, {{static_cast<ItemId>(ds.n_items)}}, spec), DataError);
  }

  TEST_CASE("cold targets are the least popular eligible items") {
    const auto ds = synthetic(200);
    const auto targets = select_cold_targets(ds, 5, 3);
    CHECK(targets.size() == 5);
    std::uint32_t max_chosen = 0;
    for (ItemId t : targets) {
      CHECK(ds.item_popularity[t] >= 3);
      max_chosen = std::max(max_chosen, ds.item_popularity[t]);
    }
    std::size_t colder = 0;
    for (ItemId i = 0; i < ds.n_items; ++i)
      if (ds.item_popularity[i] >= 3 && ds.item_popularity[i] < max_chosen) ++colder;
    CHECK(colder <= 5);
    CHECK_THROWS_AS(select_cold_targets(ds, ds.n_items + 1, 1), DataError);
  }

  TEST_CASE("AttackSpec validation and json round trip") {
    AttackSpec spec;
    CHECK_THROWS_AS(spec.validate(10), UsageError);
    spec.targets = {12};
    CHECK_THROWS_AS(spec.validate(10), DataError);
    spec.targets = {2, 4};
    spec.method = AttackMethod::bandwagon;
    spec.filler_count = 7;
    nlohmann::json j = spec;
    const auto back = j.get<AttackSpec>();
    CHECK(back.targets == spec.targets);
    CHECK(back.method == AttackMethod::bandwagon);
    CHECK(back.filler_count == 7);
    CHECK_THROWS_AS(parse_attack_method("segment"), UsageError);
  }
}
