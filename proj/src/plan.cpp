#include "brickyard/plan.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>

#include "brickyard/errors.hpp"
#include "brickyard/parallel.hpp"
#include "brickyard/rng.hpp"

namespace brickyard {

void to_json(json& j, const BuildPlan& p) {
  j = json{{"stations", p.stations},
           {"bricks", p.bricks},
           {"distance", p.distance},
           {"station_count", p.station_count}};
}

void from_json(const json& j, BuildPlan& p) {
  p.stations = j.at("stations").get<std::vector<double>>();
  p.bricks = j.at("bricks").get<std::vector<std::vector<int>>>();
  p.distance = j.at("distance");
  p.station_count = j.at("station_count");
}

namespace {

// everything below runs in integer millimeters so overlap and tie
// comparisons are exact

constexpr int64_t kSupportOverlapMm = 10;

int64_t length_mm(BrickType t) { return int64_t(std::llround(brick_length(t) * 1000.0)); }

struct WallBrick {
  int id = 0;
  int layer = 0;
  int64_t lo = 0, hi = 0, center = 0;
  int left = -1;               // same layer, directly to the left
  std::vector<int> supports;   // lower-layer bricks overlapping > 1 cm
};

struct Wall {
  std::vector<WallBrick> bricks;  // id order, layer-major left to right
  std::vector<int64_t> cand;      // distinct ascending
  std::vector<int> by_center;     // brick ids sorted by center
  int64_t reach = 0;
  uint64_t full = 0;
};

Wall build_wall(const Blueprint& bp, const PlannerConfig& cfg) {
  validate_blueprint(bp);
  Wall w;
  w.reach = int64_t(std::llround(cfg.reach_half * 1000.0));
  int64_t tx = int64_t(std::llround(cfg.t_x * 1000.0));

  int id = 0;
  for (size_t k = 0; k < bp.layers.size(); ++k) {
    int64_t cum = 0;
    int prev = -1;
    for (BrickType t : bp.layers[k]) {
      WallBrick b;
      b.id = id;
      b.layer = int(k);
      b.lo = cum;
      cum += length_mm(t);
      b.hi = cum;
      b.center = (b.lo + b.hi) / 2;
      b.left = prev;
      prev = id++;
      w.bricks.push_back(b);
    }
  }
  if (w.bricks.size() > 64) throw BadArgument("planner handles at most 64 bricks");
  w.full = w.bricks.size() == 64 ? ~0ull : (1ull << w.bricks.size()) - 1;

  for (auto& b : w.bricks) {
    if (b.layer == 0) continue;
    for (const auto& c : w.bricks) {
      if (c.layer != b.layer - 1) continue;
      if (std::min(b.hi, c.hi) - std::max(b.lo, c.lo) > kSupportOverlapMm)
        b.supports.push_back(c.id);
    }
  }

  std::set<int64_t> cs;
  for (const auto& b : w.bricks) cs.insert(b.center + tx);
  w.cand.assign(cs.begin(), cs.end());

  w.by_center.resize(w.bricks.size());
  for (size_t i = 0; i < w.bricks.size(); ++i) w.by_center[i] = int(i);
  std::sort(w.by_center.begin(), w.by_center.end(), [&](int a, int b) {
    if (w.bricks[a].center != w.bricks[b].center) return w.bricks[a].center < w.bricks[b].center;
    return a < b;
  });
  return w;
}

uint64_t closure_mask(const Wall& w, uint64_t built, int64_t p, std::vector<int>* order) {
  bool changed = true;
  while (changed) {
    changed = false;
    for (const auto& b : w.bricks) {
      if (built >> b.id & 1) continue;
      if (std::llabs(b.center - p) > w.reach) continue;
      if (b.left >= 0 && !(built >> b.left & 1)) continue;
      bool supported = true;
      for (int s : b.supports)
        if (!(built >> s & 1)) {
          supported = false;
          break;
        }
      if (!supported) continue;
      built |= 1ull << b.id;
      if (order) order->push_back(b.id);
      changed = true;
    }
  }
  return built;
}

// fixpoint over every candidate; anything still missing can never be built
void require_feasible(const Wall& w) {
  uint64_t built = 0;
  bool changed = true;
  while (changed) {
    changed = false;
    for (int64_t p : w.cand) {
      uint64_t nb = closure_mask(w, built, p, nullptr);
      if (nb != built) {
        built = nb;
        changed = true;
      }
    }
  }
  if (built != w.full) throw Infeasible("some bricks are unreachable from every station");
}

struct RawPlan {
  std::vector<int> stations;  // candidate indices
  int64_t dist = 0;
};

RawPlan greedy_mm(const Wall& w) {
  RawPlan plan;
  uint64_t built = 0;
  int64_t cur = 0;
  while (built != w.full) {
    int best = -1;
    int gain_best = 0;
    int64_t d_best = 0;
    for (size_t ci = 0; ci < w.cand.size(); ++ci) {
      uint64_t nb = closure_mask(w, built, w.cand[ci], nullptr);
      int gain = __builtin_popcountll(nb ^ built);
      if (gain == 0) continue;
      int64_t d = plan.stations.empty() ? 0 : std::llabs(w.cand[ci] - cur);
      if (gain > gain_best || (gain == gain_best && d < d_best)) {
        best = int(ci);
        gain_best = gain;
        d_best = d;
      }
      // ascending scan makes the remaining tie fall to the smallest x
    }
    if (best < 0) throw Infeasible("no station can place a brick");
    if (!plan.stations.empty()) plan.dist += std::llabs(w.cand[best] - cur);
    cur = w.cand[best];
    built = closure_mask(w, built, cur, nullptr);
    plan.stations.push_back(best);
  }
  return plan;
}

class Search {
 public:
  explicit Search(const Wall& w) : w_(w) {}

  RawPlan run() {
    RawPlan seed = greedy_mm(w_);
    best_s_ = int(seed.stations.size());
    best_d_ = seed.dist;
    dfs(0, -1, 0, 0);
    RawPlan out;
    out.stations = have_seq_ ? best_seq_ : seed.stations;
    out.dist = best_d_;
    return out;
  }

 private:
  // fewest windows of width 2*reach covering the unbuilt centers
  int station_lb(uint64_t built) const {
    int cnt = 0;
    int64_t end = std::numeric_limits<int64_t>::min();
    for (int id : w_.by_center) {
      if (built >> id & 1) continue;
      int64_t c = w_.bricks[id].center;
      if (c > end) {
        ++cnt;
        end = c + 2 * w_.reach;
      }
    }
    return cnt;
  }

  // future stations must reach the leftmost and rightmost unbuilt centers
  int64_t dist_lb(uint64_t built, bool root, int64_t cur) const {
    int64_t lo = std::numeric_limits<int64_t>::max(), hi = std::numeric_limits<int64_t>::min();
    for (const auto& b : w_.bricks)
      if (!(built >> b.id & 1)) {
        lo = std::min(lo, b.center);
        hi = std::max(hi, b.center);
      }
    if (hi < lo) return 0;
    int64_t L = lo + w_.reach;  // must stand at or left of this
    int64_t R = hi - w_.reach;  // must stand at or right of this
    if (L >= R) {
      if (root) return 0;
      if (cur < R) return R - cur;
      if (cur > L) return cur - L;
      return 0;
    }
    if (root) return R - L;
    return (R - L) + std::min(std::llabs(cur - L), std::llabs(cur - R));
  }

  void accept(int s, int64_t d) {
    best_s_ = s;
    best_d_ = d;
    best_seq_ = seq_;
    have_seq_ = true;
  }

  void dfs(uint64_t built, int ci, int s, int64_t d) {
    if (built == w_.full) {
      if (s < best_s_ || (s == best_s_ && (have_seq_ ? d < best_d_ : d <= best_d_)))
        accept(s, d);
      return;
    }
    int slb = s + station_lb(built);
    if (slb > best_s_) return;
    bool root = ci < 0;
    int64_t cur = root ? 0 : w_.cand[ci];
    if (slb == best_s_) {
      int64_t dlb = d + dist_lb(built, root, cur);
      if (have_seq_ ? dlb >= best_d_ : dlb > best_d_) return;
    }

    auto& entries = memo_[{built, ci}];
    for (const auto& [es, ed] : entries)
      if (es <= s && ed <= d) return;  // seen this state at least as cheaply
    entries.erase(std::remove_if(entries.begin(), entries.end(),
                                 [&](const std::pair<int, int64_t>& e) {
                                   return s <= e.first && d <= e.second;
                                 }),
                  entries.end());
    entries.emplace_back(s, d);

    for (size_t nj = 0; nj < w_.cand.size(); ++nj) {
      uint64_t nb = closure_mask(w_, built, w_.cand[nj], nullptr);
      if (nb == built) continue;
      int64_t nd = d + (root ? 0 : std::llabs(w_.cand[nj] - cur));
      seq_.push_back(int(nj));
      dfs(nb, int(nj), s + 1, nd);
      seq_.pop_back();
    }
  }

  const Wall& w_;
  int best_s_ = 0;
  int64_t best_d_ = 0;
  std::vector<int> best_seq_;
  bool have_seq_ = false;
  std::vector<int> seq_;
  std::map<std::pair<uint64_t, int>, std::vector<std::pair<int, int64_t>>> memo_;
};

BuildPlan replay(const Wall& w, const std::vector<int>& station_idx) {
  BuildPlan plan;
  uint64_t built = 0;
  int64_t cur = 0, dist = 0;
  for (size_t i = 0; i < station_idx.size(); ++i) {
    int64_t p = w.cand[station_idx[i]];
    std::vector<int> order;
    built = closure_mask(w, built, p, &order);
    if (i > 0) dist += std::llabs(p - cur);
    cur = p;
    plan.stations.push_back(double(p) / 1000.0);
    plan.bricks.push_back(order);
  }
  plan.distance = double(dist) / 1000.0;
  plan.station_count = int(plan.stations.size());
  return plan;
}

}  // namespace

std::vector<double> candidate_positions(const Blueprint& bp, const PlannerConfig& cfg) {
  Wall w = build_wall(bp, cfg);
  std::vector<double> out;
  for (int64_t p : w.cand) out.push_back(double(p) / 1000.0);
  return out;
}

std::vector<int> buildable_closure(const Blueprint& bp, const std::set<int>& built,
                                   double station, const PlannerConfig& cfg) {
  Wall w = build_wall(bp, cfg);
  uint64_t mask = 0;
  for (int id : built)
    if (id >= 0 && id < int(w.bricks.size())) mask |= 1ull << id;
  std::vector<int> order;
  closure_mask(w, mask, int64_t(std::llround(station * 1000.0)), &order);
  return order;
}

BuildPlan plan_optimal(const Blueprint& bp, const PlannerConfig& cfg) {
  Wall w = build_wall(bp, cfg);
  require_feasible(w);
  Search search(w);
  RawPlan raw = search.run();
  return replay(w, raw.stations);
}

BuildPlan plan_greedy(const Blueprint& bp, const PlannerConfig& cfg) {
  Wall w = build_wall(bp, cfg);
  require_feasible(w);
  return replay(w, greedy_mm(w).stations);
}

Blueprint generate_blueprint(const std::map<BrickType, int>& counts, int layers,
                             double layer_length, uint64_t seed) {
  if (layers <= 0) throw BadArgument("layer count must be positive");
  int64_t row_mm = int64_t(std::llround(layer_length * 1000.0));
  if (row_mm <= 0) throw BadArgument("layer length must be positive");

  std::vector<BrickType> pool;
  int64_t total = 0;
  for (BrickType t : {BrickType::red, BrickType::green, BrickType::blue, BrickType::orange}) {
    auto it = counts.find(t);
    int n = it == counts.end() ? 0 : it->second;
    if (n < 0) throw BadArgument("negative brick count");
    for (int i = 0; i < n; ++i) {
      pool.push_back(t);
      total += length_mm(t);
    }
  }
  if (pool.empty() || total != int64_t(layers) * row_mm)
    throw Unpartitionable("brick lengths do not sum to layers x layer_length");

  Rng rng(seed);
  for (int attempt = 0; attempt < 100000; ++attempt) {
    std::vector<BrickType> order = pool;
    for (size_t i = order.size(); i > 1; --i)
      std::swap(order[i - 1], order[rng.uniform_index(i)]);

    Blueprint bp;
    bp.layers.assign(layers, {});
    int64_t cum = 0;
    int row = 0;
    bool ok = true;
    for (BrickType t : order) {
      cum += length_mm(t);
      if (cum > row_mm) {
        ok = false;
        break;
      }
      bp.layers[row].push_back(t);
      if (cum == row_mm) {
        cum = 0;
        ++row;
      }
    }
    if (ok && row == layers) return bp;
  }
  throw Unpartitionable("no row-exact arrangement found in 100000 shuffles");
}

std::vector<BenchRow> bench_plans(const std::map<BrickType, int>& counts, int layers,
                                  double layer_length, int n, uint64_t seed,
                                  const PlannerConfig& cfg) {
  using clock = std::chrono::steady_clock;
  std::vector<BenchRow> rows(std::max(0, n));
  std::vector<std::exception_ptr> errs(rows.size());
  parallel_for(int64_t(rows.size()), [&](int64_t i) {
    try {
      Blueprint bp = generate_blueprint(counts, layers, layer_length, mix_seed(seed, uint64_t(i)));
      auto t0 = clock::now();
      BuildPlan opt = plan_optimal(bp, cfg);
      auto t1 = clock::now();
      BuildPlan gre = plan_greedy(bp, cfg);
      auto t2 = clock::now();
      BenchRow& r = rows[i];
      r.instance = int(i);
      r.stations_opt = opt.station_count;
      r.dist_opt = opt.distance;
      r.secs_opt = std::chrono::duration<double>(t1 - t0).count();
      r.stations_greedy = gre.station_count;
      r.dist_greedy = gre.distance;
      r.secs_greedy = std::chrono::duration<double>(t2 - t1).count();
    } catch (...) {
      errs[i] = std::current_exception();
    }
  });
  for (const auto& e : errs)
    if (e) std::rethrow_exception(e);
  return rows;
}

}  // namespace brickyard
