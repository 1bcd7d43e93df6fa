#include <algorithm>
#include <cmath>
#include <string>

#include "dmpo/error.hpp"
#include "dmpo/mdp.hpp"

namespace dmpo {
namespace envs {
namespace {

std::size_t flat(std::size_t n_states, std::size_t n_actions, std::size_t s,
                 std::size_t a, std::size_t next) {
  return (s * n_actions + a) * n_states + next;
}

void check_probability(double p, const char* name) {
  if (!(p >= 0.0 && p <= 1.0)) {
    throw ValidationError(std::string(name) + " must lie in [0, 1]");
  }
}

}  // namespace

std::size_t chain_advance_action(std::size_t state, std::size_t actions) {
  return (state + 1) % actions;
}

Mdp chain(const ChainParams& p) {
  if (p.n < 2) throw ValidationError("chain: n must be at least 2");
  if (p.actions < 2) throw ValidationError("chain: actions must be at least 2");
  if (p.start >= p.n - 1) throw ValidationError("chain: start must precede the goal");
  check_probability(p.slip, "chain: slip");

  const std::size_t n = p.n;
  const std::size_t na = p.actions;
  const std::size_t goal = n - 1;
  std::vector<double> transition(n * na * n, 0.0);
  Table reward(n, na, 0.0);

  for (std::size_t s = 0; s < goal; ++s) {
    const std::size_t back = s == 0 ? 0 : s - 1;
    const std::size_t good = chain_advance_action(s, na);
    for (std::size_t a = 0; a < na; ++a) {
      if (a != good) {
        transition[flat(n, na, s, a, back)] = 1.0;
      } else if (s + 1 == goal) {
        transition[flat(n, na, s, a, goal)] = 1.0;
      } else {
        transition[flat(n, na, s, a, s + 1)] += 1.0 - p.slip;
        transition[flat(n, na, s, a, back)] += p.slip;
      }
    }
    if (p.dense) {
      reward(s, good) = 1.0 / static_cast<double>(n - 1);
    } else if (s + 1 == goal) {
      reward(s, good) = 1.0;
    }
  }
  // Goal rows are never used; keep them as self-loops.
  for (std::size_t a = 0; a < na; ++a) transition[flat(n, na, goal, a, goal)] = 1.0;

  std::vector<double> initial(n, 0.0);
  initial[p.start] = 1.0;
  const std::size_t horizon = p.horizon > 0 ? p.horizon : 2 * (n - 1);
  return Mdp(n, na, std::move(transition), std::move(reward), std::move(initial), {goal},
             horizon);
}

std::size_t shop_tree_states(std::size_t depth, std::size_t branching) {
  std::size_t total = 0;
  std::size_t layer = 1;
  for (std::size_t level = 0; level <= depth; ++level) {
    total += layer;
    layer *= branching;
  }
  return total;
}

Mdp shop(const ShopParams& p) {
  if (p.depth < 1) throw ValidationError("shop: depth must be at least 1");
  if (p.branching < 2) throw ValidationError("shop: branching must be at least 2");
  check_probability(p.slip, "shop: slip");

  const std::size_t b = p.branching;
  const std::size_t tree = shop_tree_states(p.depth, b);
  const std::size_t done = tree;
  const std::size_t n = tree + 1;
  std::vector<double> transition(n * b * n, 0.0);
  Table reward(n, b, 0.0);

  // Breadth-first numbering: children of node i are b*i + 1 .. b*i + b.
  // Level of node i and the number of target choices on its path.
  std::vector<std::size_t> level(tree, 0);
  std::vector<std::size_t> matches(tree, 0);
  auto target = [b](std::size_t lvl) { return (lvl + 1) % b; };
  std::size_t leaves = 1;
  for (std::size_t i = 0; i < p.depth; ++i) leaves *= b;
  const std::size_t internal = tree - leaves;

  for (std::size_t node = 0; node < internal; ++node) {
    for (std::size_t a = 0; a < b; ++a) {
      const std::size_t child = b * node + 1 + a;
      level[child] = level[node] + 1;
      matches[child] = matches[node] + (a == target(level[node]) ? 1 : 0);
      // A slip lands on a uniformly random sibling.
      for (std::size_t c = 0; c < b; ++c) {
        double mass = p.slip / static_cast<double>(b);
        if (c == a) mass += 1.0 - p.slip;
        transition[flat(n, b, node, a, b * node + 1 + c)] += mass;
      }
    }
  }
  const double levels = static_cast<double>(p.depth + 1);
  for (std::size_t leaf = internal; leaf < tree; ++leaf) {
    for (std::size_t a = 0; a < b; ++a) {
      transition[flat(n, b, leaf, a, done)] = 1.0;
      const std::size_t hit = matches[leaf] + (a == target(p.depth) ? 1 : 0);
      reward(leaf, a) = static_cast<double>(hit) / levels;
    }
  }
  for (std::size_t a = 0; a < b; ++a) transition[flat(n, b, done, a, done)] = 1.0;

  std::vector<double> initial(n, 0.0);
  initial[0] = 1.0;
  const std::size_t horizon = p.horizon > 0 ? p.horizon : p.depth + 1;
  return Mdp(n, b, std::move(transition), std::move(reward), std::move(initial), {done},
             horizon);
}

Mdp grid(const GridParams& p) {
  if (p.width < 1 || p.height < 1 || p.width * p.height < 2) {
    throw ValidationError("grid: needs at least two cells");
  }
  check_probability(p.slip, "grid: slip");

  const std::size_t cells = p.width * p.height;
  const std::size_t done = cells;
  const std::size_t goal = cells - 1;
  const std::size_t n = cells + 1;
  constexpr std::size_t na = 4;
  std::vector<double> transition(n * na * n, 0.0);
  Table reward(n, na, 0.0);

  auto move = [&](std::size_t cell, std::size_t dir) {
    std::size_t x = cell % p.width;
    std::size_t y = cell / p.width;
    switch (dir) {
      case 0: y = y + 1 < p.height ? y + 1 : y; break;  // up
      case 1: y = y > 0 ? y - 1 : y; break;             // down
      case 2: x = x > 0 ? x - 1 : x; break;             // left
      default: x = x + 1 < p.width ? x + 1 : x; break;  // right
    }
    return y * p.width + x;
  };

  for (std::size_t cell = 0; cell < cells; ++cell) {
    for (std::size_t a = 0; a < na; ++a) {
      if (cell == goal) {
        transition[flat(n, na, cell, a, done)] = 1.0;
        reward(cell, a) = 1.0;
        continue;
      }
      transition[flat(n, na, cell, a, move(cell, a))] += 1.0 - p.slip;
      for (std::size_t d = 0; d < na; ++d) {
        transition[flat(n, na, cell, a, move(cell, d))] += p.slip / na;
      }
    }
  }
  for (std::size_t a = 0; a < na; ++a) transition[flat(n, na, done, a, done)] = 1.0;

  std::vector<double> initial(n, 0.0);
  initial[0] = 1.0;
  const std::size_t horizon = p.horizon > 0 ? p.horizon : 2 * (p.width + p.height);
  return Mdp(n, na, std::move(transition), std::move(reward), std::move(initial), {done},
             horizon);
}

}  // namespace envs

namespace {

class ParamReader {
 public:
  explicit ParamReader(const EnvSpec& spec) : spec_(spec) {}

  std::size_t count(const std::string& key, std::size_t fallback) const {
    auto it = spec_.params.find(key);
    if (it == spec_.params.end()) return fallback;
    const double v = it->second;
    if (!(v >= 0.0) || v != std::floor(v)) {
      throw ValidationError(spec_.name + ": parameter '" + key +
                            "' must be a non-negative integer");
    }
    return static_cast<std::size_t>(v);
  }

  double real(const std::string& key, double fallback) const {
    auto it = spec_.params.find(key);
    return it == spec_.params.end() ? fallback : it->second;
  }

  void only(std::initializer_list<const char*> allowed) const {
    for (const auto& [key, value] : spec_.params) {
      bool known = false;
      for (const char* name : allowed) known = known || key == name;
      if (!known) throw ConfigError(spec_.name + ": unknown parameter '" + key + "'");
    }
  }

 private:
  const EnvSpec& spec_;
};

}  // namespace

Mdp make_env(const EnvSpec& spec) {
  const ParamReader in(spec);
  if (spec.name == "chain") {
    in.only({"n", "slip", "actions", "start", "horizon", "dense"});
    envs::ChainParams p;
    p.n = in.count("n", p.n);
    p.slip = in.real("slip", p.slip);
    p.actions = in.count("actions", p.actions);
    p.start = in.count("start", p.start);
    p.horizon = in.count("horizon", p.horizon);
    p.dense = in.real("dense", 0.0) != 0.0;
    return envs::chain(p);
  }
  if (spec.name == "shop") {
    in.only({"depth", "branching", "slip", "horizon"});
    envs::ShopParams p;
    p.depth = in.count("depth", p.depth);
    p.branching = in.count("branching", p.branching);
    p.slip = in.real("slip", p.slip);
    p.horizon = in.count("horizon", p.horizon);
    return envs::shop(p);
  }
  if (spec.name == "grid") {
    in.only({"width", "height", "slip", "horizon"});
    envs::GridParams p;
    p.width = in.count("width", p.width);
    p.height = in.count("height", p.height);
    p.slip = in.real("slip", p.slip);
    p.horizon = in.count("horizon", p.horizon);
    return envs::grid(p);
  }
  throw ConfigError("unknown environment '" + spec.name + "'");
}

}  // namespace dmpo
