#pragma once
#include <map>
#include <set>

#include "brickyard/core.hpp"

namespace brickyard {

struct PlannerConfig {
  double t_x = 0.675;        // candidate offset from brick centers
  double reach_half = 0.675; // placeable iff |center - station| <= this
};

struct BuildPlan {
  std::vector<double> stations;          // robot x positions, visit order
  std::vector<std::vector<int>> bricks;  // per station, placement order
  double distance = 0.0;                 // sum of |p_i - p_{i-1}|
  int station_count = 0;
};

void to_json(json& j, const BuildPlan& p);
void from_json(const json& j, BuildPlan& p);

// distinct sorted {brick center + t_x}
std::vector<double> candidate_positions(const Blueprint& bp, const PlannerConfig& cfg = {});

// bricks newly placeable from `station` given `built`, grown to the
// fixpoint, ordered layer-major then left to right. A brick goes in when
// it is unbuilt, in reach, every lower brick overlapping its footprint by
// more than 1 cm is built (layer 0 rests on the ground), and its left
// neighbour is built.
std::vector<int> buildable_closure(const Blueprint& bp, const std::set<int>& built,
                                   double station, const PlannerConfig& cfg = {});

// exact lexicographic optimum over (station count, travel distance);
// among optima, the lexicographically smallest station sequence
BuildPlan plan_optimal(const Blueprint& bp, const PlannerConfig& cfg = {});

// repeatedly take the station placing the most bricks; ties to the
// nearest station, then the smallest x
BuildPlan plan_greedy(const Blueprint& bp, const PlannerConfig& cfg = {});

// uniform random arrangement of the multiset into `layers` rows of exactly
// layer_length, by shuffle + row cut with rejection
Blueprint generate_blueprint(const std::map<BrickType, int>& counts, int layers,
                             double layer_length, uint64_t seed);

struct BenchRow {
  int instance = 0;
  int stations_opt = 0;
  double dist_opt = 0.0;
  double secs_opt = 0.0;
  int stations_greedy = 0;
  double dist_greedy = 0.0;
  double secs_greedy = 0.0;
};

// n random blueprints, both planners on each; rows in instance order
std::vector<BenchRow> bench_plans(const std::map<BrickType, int>& counts, int layers,
                                  double layer_length, int n, uint64_t seed,
                                  const PlannerConfig& cfg = {});

}  // namespace brickyard
