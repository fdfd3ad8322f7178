#include "brickyard/mission.hpp"

#include <algorithm>
#include <array>
#include <sstream>

#include "brickyard/errors.hpp"
#include "brickyard/rng.hpp"

namespace brickyard {

void to_json(json& j, const StorageSlot& s) {
  j = json{{"compartment", s.compartment},
           {"bin", s.bin},
           {"level", s.level},
           {"orange_slot", s.orange_slot}};
}

void from_json(const json& j, StorageSlot& s) {
  s.compartment = j.at("compartment");
  s.bin = j.at("bin");
  s.level = j.at("level");
  s.orange_slot = j.at("orange_slot");
}

StoragePlan assign_storage(const std::vector<std::pair<int, BrickType>>& picks,
                           const StorageRack& rack) {
  LoadCount load;
  for (const auto& [id, t] : picks) {
    switch (t) {
      case BrickType::red: load.red++; break;
      case BrickType::green: load.green++; break;
      case BrickType::blue: load.blue++; break;
      case BrickType::orange: load.orange++; break;
    }
  }
  std::string why;
  if (!rack_admissible(rack, load, &why)) throw OverCapacity(why);

  StoragePlan plan;
  std::array<std::vector<int>, 3> fill;  // compartment -> per-bin level
  for (auto& f : fill) f.assign(rack.bins_per_compartment, 0);
  int oranges = 0;
  for (const auto& [id, t] : picks) {
    StorageSlot s;
    if (t == BrickType::orange) {
      s.orange_slot = oranges++;
    } else {
      int comp = t == BrickType::red ? 0 : t == BrickType::green ? 1 : 2;
      int limit = stack_limit(rack, t);
      for (int b = 0; b < rack.bins_per_compartment; ++b) {
        if (fill[comp][b] < limit) {
          s.compartment = comp;
          s.bin = b;
          s.level = fill[comp][b]++;
          break;
        }
      }
    }
    plan.slots.emplace_back(id, s);
  }
  return plan;
}

void to_json(json& j, const WorldState& w) {
  json status = json::object();
  for (const auto& [id, st] : w.status) status[std::to_string(id)] = st;
  json slots = json::object();
  for (const auto& [id, sl] : w.slots) slots[std::to_string(id)] = sl;
  j = json{{"scene", w.scene},      {"status", status},
           {"slots", slots},        {"robot", w.robot},
           {"robot_belief", w.robot_belief}, {"rack", w.rack},
           {"rack_load", w.rack_load}, {"fsm", w.fsm},
           {"clock", w.clock}};
}

void from_json(const json& j, WorldState& w) {
  w.scene = j.at("scene").get<Scene>();
  w.status.clear();
  for (const auto& [k, v] : j.at("status").items()) w.status[std::stoi(k)] = v.get<std::string>();
  w.slots.clear();
  for (const auto& [k, v] : j.at("slots").items()) w.slots[std::stoi(k)] = v.get<StorageSlot>();
  w.robot = j.at("robot").get<PlanarPose>();
  w.robot_belief = j.at("robot_belief").get<PlanarPose>();
  w.rack = j.at("rack").get<StorageRack>();
  w.rack_load = j.at("rack_load").get<LoadCount>();
  w.fsm = j.at("fsm").get<std::string>();
  w.clock = j.at("clock");
}

std::string log_to_jsonl(const MissionLog& log) {
  std::ostringstream out;
  for (const auto& e : log) {
    json j{{"t", e.t}, {"state", e.state}, {"event", e.event}, {"payload", e.payload}};
    out << j.dump() << "\n";
  }
  return out.str();
}

std::string snapshot(const WorldState& w) { return json(w).dump(); }

WorldState restore(const std::string& bytes) {
  try {
    return json::parse(bytes).get<WorldState>();
  } catch (const json::exception& e) {
    throw CorruptSnapshot(std::string("snapshot does not parse: ") + e.what());
  }
}

namespace {

RigidTransform look_at_camera(const Eigen::Vector3d& from, const Eigen::Vector3d& to) {
  Eigen::Vector3d z = (to - from).normalized();  // optical axis
  Eigen::Vector3d x = z.cross(Eigen::Vector3d::UnitZ());
  if (x.norm() < 1e-9) x = Eigen::Vector3d::UnitX();
  x.normalize();
  Eigen::Vector3d y = z.cross(x);
  RigidTransform T;
  T.R.col(0) = x;
  T.R.col(1) = y;
  T.R.col(2) = z;
  T.t = from;
  return T;
}

struct Sim {
  const Scene& nominal;
  const Blueprint& bp;
  const MissionConfig& cfg;
  uint64_t seed;

  WorldState w;
  MissionLog log;
  std::vector<std::pair<std::string, std::string>> snaps;
  Rng odom_rng, arm_rng;
  uint64_t scan_counter = 0;

  Scene model_pile;            // robot database: bricks still on the pile
  RigidTransform pile_rough;   // belief-frame pile pose
  bool pile_registered = false;
  RigidTransform wall_belief;
  bool wall_known = false;
  RigidTransform true_wall, true_pile;

  std::vector<Brick> positions;          // blueprint bricks, wall frame
  std::map<int, int> placed_by_position; // position id -> physical brick id
  BuildPlan plan;
  bool any_misplaced = false;
  double worst_place_err = 0.0;

  Sim(const Scene& n, const Blueprint& b, const MissionConfig& c, uint64_t s)
      : nominal(n), bp(b), cfg(c), seed(s),
        odom_rng(mix_seed(s, 1)), arm_rng(mix_seed(s, 3)) {}

  json counts() const {
    std::map<std::string, int> c{{"on_pile", 0}, {"stored", 0}, {"placed", 0}, {"lost", 0}};
    for (const auto& [id, st] : w.status) c[st]++;
    return json(c);
  }

  void event(const std::string& name, json payload = json::object()) {
    payload["counts"] = counts();
    log.push_back({w.clock, w.fsm, name, std::move(payload)});
  }

  void enter(const std::string& state) {
    w.fsm = state;
    event("enter");
    snaps.emplace_back(state, snapshot(w));
  }

  // ---- motion. The robot tracks commands in its odometry frame; drift
  // accumulates between where it is and where it thinks it is.

  PlanarPose drift() const { return compose(w.robot, inverse(w.robot_belief)); }

  RigidTransform physical(const RigidTransform& commanded) const {
    return compose(planar_to_rigid(drift()), commanded);
  }

  PointCloud to_belief(PointCloud pts) const {
    RigidTransform D = planar_to_rigid(compose(w.robot_belief, inverse(w.robot)));
    for (auto& p : pts.points) p = D.R * p + D.t;
    for (auto& n : pts.normals) n = D.R * n;
    return pts;
  }

  void drive(const PlanarPose& target) {
    PlanarPose rel = compose(inverse(w.robot_belief), target);
    double dist = std::hypot(target.x - w.robot_belief.x, target.y - w.robot_belief.y);
    w.robot_belief = target;
    PlanarPose noisy = rel;
    if (dist > 0 && (cfg.odom_sigma_per_m > 0 || cfg.odom_yaw_sigma_per_m > 0)) {
      noisy = PlanarPose(rel.x + odom_rng.gaussian() * cfg.odom_sigma_per_m * dist,
                         rel.y + odom_rng.gaussian() * cfg.odom_sigma_per_m * dist,
                         rel.yaw + odom_rng.gaussian() * cfg.odom_yaw_sigma_per_m * dist);
    }
    w.robot = compose(w.robot, noisy);
    w.clock += dist / cfg.drive_speed + 1.0;
    event("drive", {{"target", json(target)}, {"distance", dist}});
  }

  // ---- sensing

  PointCloud scan_around(const Eigen::Vector3d& target_belief, double radius,
                         std::vector<RigidTransform>* commanded_out = nullptr) {
    auto commanded = arc_trajectory(target_belief, radius, 1.0, 5);
    std::vector<RigidTransform> phys;
    for (const auto& c : commanded) phys.push_back(physical(c));
    LidarModel lidar = cfg.lidar;
    lidar.sigma_range = cfg.scan_sigma;
    PointCloud s = simulate_lidar_scan(w.scene, phys, lidar, mix_seed(seed, 100 + scan_counter++));
    w.clock += 2.0;
    if (commanded_out) *commanded_out = commanded;
    return to_belief(std::move(s));
  }

  // ---- setup

  void init_world() {
    w.scene = nominal;
    w.rack = cfg.rack;
    true_pile = nominal.frame("pile");
    true_wall = nominal.frame("wall");
    Rng jitter(mix_seed(seed, 6));
    for (auto& b : w.scene.bricks) {
      if (b.frame != "pile") continue;
      Rng j = jitter.child(uint64_t(b.id));
      b.pose = PlanarPose(b.pose.x + j.uniform(-cfg.pile_jitter_xy, cfg.pile_jitter_xy),
                          b.pose.y + j.uniform(-cfg.pile_jitter_xy, cfg.pile_jitter_xy),
                          b.pose.yaw + j.uniform(-cfg.pile_jitter_yaw, cfg.pile_jitter_yaw));
      w.status[b.id] = "on_pile";
    }
    model_pile = nominal;
    model_pile.bricks.clear();
    for (const auto& b : nominal.bricks)
      if (b.frame == "pile") model_pile.bricks.push_back(b);

    positions = blueprint_bricks(bp);
    plan = cfg.optimal_plan ? plan_optimal(bp, cfg.planner) : plan_greedy(bp, cfg.planner);
    w.robot = w.robot_belief = PlanarPose(0, 0, 0);
  }

  // ---- pile phase

  Eigen::Vector3d pile_center_belief() const {
    Eigen::Vector3d lo(1e300, 1e300, 1e300), hi(-1e300, -1e300, -1e300);
    for (const auto& b : model_pile.bricks) {
      OrientedBox box = model_pile.brick_box(b);
      lo = lo.cwiseMin(box.pose.t);
      hi = hi.cwiseMax(box.pose.t);
    }
    Eigen::Vector3d c = 0.5 * (lo + hi);
    c.z() = 0;
    return c;
  }

  void detect_and_register_pile() {
    enter("detect_pile");
    Eigen::Vector3d center = pile_center_belief();
    std::vector<RigidTransform> commanded;
    PointCloud scan = scan_around(center, 3.5, &commanded);

    Geofence fence;
    Eigen::Vector3d lo(1e300, 1e300, 0), hi(-1e300, -1e300, 0);
    for (const auto& b : model_pile.bricks) {
      OrientedBox box = model_pile.brick_box(b);
      lo = lo.cwiseMin(box.pose.t);
      hi = hi.cwiseMax(box.pose.t);
    }
    fence.x_min = lo.x() - 1.5;
    fence.x_max = hi.x() + 1.5;
    fence.y_min = lo.y() - 1.5;
    fence.y_max = hi.y() + 1.5;

    Eigen::Vector3d expected = hi - lo + Eigen::Vector3d(0.4, 0.4, 0.0);
    expected.z() = 0.0;
    for (const auto& b : model_pile.bricks)
      expected.z() = std::max(expected.z(), b.z_base + kBrickSide);
    // cluster extents come back principal-axis first
    if (expected.x() < expected.y()) std::swap(expected.x(), expected.y());

    // the whole pile is the target, so the link distance must bridge the
    // gaps between its type rows
    PileDetectConfig detect_cfg = cfg.pile;
    detect_cfg.link_dist = std::max(detect_cfg.link_dist, 1.0);
    PileHypothesis pile =
        detect_pile(scan, fence, expected, detect_cfg, mix_seed(seed, 40 + scan_counter));
    event("pile_found", {{"score", pile.score}});

    enter("register_pile");
    FrameEstimate est = register_target(model_pile, "pile", scan, nominal.frame("pile"),
                                        cfg.registration, commanded[commanded.size() / 2],
                                        mix_seed(seed, 50 + scan_counter));
    pile_rough = est.pose;
    pile_registered = true;
    event("pile_registered", {{"pairs", est.pairs}, {"converged", est.converged}});
  }

  std::vector<BrickEstimate> estimate_pile_bricks(std::vector<RigidTransform>* commanded_out) {
    enter("estimate_bricks");
    PointCloud scan = scan_around(pile_center_belief(), 3.0, commanded_out);
    scan = estimate_normals(scan, 16, (*commanded_out)[commanded_out->size() / 2].t);
    FrameEstimate rough;
    rough.pose = pile_rough;
    std::vector<int> include;
    for (const auto& b : model_pile.bricks) include.push_back(b.id);
    auto ests = estimate_bricks(model_pile, "pile", rough, scan, include, cfg.estimate,
                                (*commanded_out)[commanded_out->size() / 2]);
    json per = json::array();
    for (const auto& e : ests)
      per.push_back({{"id", e.id}, {"confidence", e.confidence}, {"pairs", e.pairs}});
    event("estimates", {{"bricks", per}});
    return ests;
  }

  const Brick* scene_brick(int id) const {
    for (const auto& b : w.scene.bricks)
      if (b.id == id && b.frame == "pile") return &b;
    return nullptr;
  }

  void remove_scene_brick(int id) {
    auto& v = w.scene.bricks;
    v.erase(std::remove_if(v.begin(), v.end(),
                           [&](const Brick& b) { return b.id == id && b.frame == "pile"; }),
            v.end());
  }

  void remove_model_brick(int id) {
    auto& v = model_pile.bricks;
    v.erase(std::remove_if(v.begin(), v.end(), [&](const Brick& b) { return b.id == id; }),
            v.end());
  }

  // true pick error: arm commanded at the estimate (odometry coords),
  // executed with the drift offset, against the real brick
  bool grip_ok(const BrickEstimate& est) const {
    const Brick* truth = scene_brick(est.id);
    if (!truth) return false;
    PlanarPose est_world = compose(rigid_to_planar(pile_rough), est.pose);
    PlanarPose arm = compose(drift(), est_world);
    PlanarPose true_world = compose(rigid_to_planar(true_pile), truth->pose);
    double dxy = std::hypot(arm.x - true_world.x, arm.y - true_world.y);
    double dyaw = std::abs(normalize_angle(arm.yaw - true_world.yaw));
    return dxy <= cfg.grip_tol_xy && dyaw <= cfg.grip_tol_yaw;
  }

  bool store_brick(int id, BrickType type) {
    LoadCount next = w.rack_load;
    switch (type) {
      case BrickType::red: next.red++; break;
      case BrickType::green: next.green++; break;
      case BrickType::blue: next.blue++; break;
      case BrickType::orange: next.orange++; break;
    }
    if (!rack_admissible(w.rack, next, nullptr)) return false;

    std::array<std::vector<int>, 3> fill;
    for (auto& f : fill) f.assign(w.rack.bins_per_compartment, 0);
    int oranges = 0;
    for (const auto& [bid, sl] : w.slots) {
      (void)bid;
      if (sl.orange_slot >= 0)
        ++oranges;
      else if (sl.compartment >= 0)
        fill[sl.compartment][sl.bin]++;
    }
    StorageSlot s;
    if (type == BrickType::orange) {
      s.orange_slot = oranges;
    } else {
      int comp = type == BrickType::red ? 0 : type == BrickType::green ? 1 : 2;
      int limit = stack_limit(w.rack, type);
      for (int b = 0; b < w.rack.bins_per_compartment; ++b)
        if (fill[comp][b] < limit) {
          s.compartment = comp;
          s.bin = b;
          s.level = fill[comp][b];
          break;
        }
      if (s.bin < 0) return false;
    }
    w.slots[id] = s;
    w.rack_load = next;
    w.status[id] = "stored";
    event("stored", {{"id", id}, {"slot", json(s)}});
    return true;
  }

  // one trip worth of picking: fill the rack with `want` bricks per type
  void pick_phase(std::map<BrickType, int> want) {
    detect_and_register_pile();
    std::map<int, int> attempts;
    int total = 0;
    for (auto& [t, n] : want) total += n;
    while (total > 0) {
      std::vector<RigidTransform> commanded;
      auto ests = estimate_pile_bricks(&commanded);
      auto order = pickable_bricks(ests, cfg.pick_confidence);
      int chosen = -1;
      const BrickEstimate* chosen_est = nullptr;
      for (int id : order) {
        const Brick* b = scene_brick(id);
        if (!b || w.status[id] != "on_pile") continue;
        auto it = want.find(b->type);
        if (it == want.end() || it->second <= 0) continue;
        chosen = id;
        for (const auto& e : ests)
          if (e.id == id) chosen_est = &e;
        break;
      }
      if (chosen < 0) {
        // nothing confident matches the remaining demand: give up on the
        // least visible needed brick so the loop always shrinks
        int worst = -1;
        double worst_conf = 2.0;
        for (const auto& e : ests) {
          const Brick* b = scene_brick(e.id);
          if (!b || w.status[e.id] != "on_pile") continue;
          auto it = want.find(b->type);
          if (it == want.end() || it->second <= 0) continue;
          if (e.confidence < worst_conf) {
            worst_conf = e.confidence;
            worst = e.id;
          }
        }
        if (worst < 0) break;  // demand cannot be met from this pile at all
        const Brick* b = scene_brick(worst);
        want[b->type]--;
        total--;
        w.status[worst] = "lost";
        remove_model_brick(worst);
        event("brick_lost", {{"id", worst}, {"confidence", worst_conf}});
        continue;
      }

      enter("pick");
      w.clock += 20.0;
      const Brick* b = scene_brick(chosen);
      BrickType type = b->type;
      bool ok = chosen_est->confidence >= cfg.pick_confidence && grip_ok(*chosen_est);
      if (!ok && attempts[chosen] == 0) {
        attempts[chosen] = 1;
        event("pick_retry", {{"id", chosen}});
        continue;  // rescan and try once more
      }
      if (!ok) {
        w.status[chosen] = "lost";
        remove_model_brick(chosen);
        remove_scene_brick(chosen);
        want[type]--;
        total--;
        event("brick_lost", {{"id", chosen}});
        continue;
      }
      remove_scene_brick(chosen);
      remove_model_brick(chosen);
      if (!store_brick(chosen, type)) {
        w.status[chosen] = "lost";
        event("brick_lost", {{"id", chosen}, {"reason", "no rack slot"}});
      }
      want[type]--;
      total--;
    }
  }

  // ---- wall phase

  void find_wall() {
    enter("find_wall");
    bool built_any = false;
    for (const auto& [pos, id] : placed_by_position) {
      (void)pos;
      (void)id;
      built_any = true;
      break;
    }
    RigidTransform wall_nominal = nominal.frame("wall");
    if (!built_any || !wall_known) {
      // read the ground marker with the approach camera
      Eigen::Vector3d aim = wall_nominal.apply(Eigen::Vector3d(0.75, 0.5, 0.0));
      std::vector<MarkerFrameObs> obs;
      int frames = 8;
      for (int i = 0; i < frames; ++i) {
        Eigen::Vector3d back =
            wall_nominal.apply(Eigen::Vector3d(0.75 - 0.05 * i, -cfg.marker_standoff, 0.0));
        back.z() = cfg.camera_height;
        RigidTransform cmd = look_at_camera(back, aim);
        RigidTransform phys = physical(cmd);
        Image8 img;
        try {
          img = synth_marker_image(w.scene, phys, cfg.camera, cfg.pixel_noise,
                                   mix_seed(seed, 300 + uint64_t(i)));
        } catch (const MarkerNotVisible&) {
          continue;
        }
        MarkerFrameObs o;
        o.stamp = w.clock + 0.3 * i;
        o.camera = cmd;
        try {
          o.pixels = detect_marker_frame(img, cfg.mask, cfg.corner);
        } catch (const NoCandidate&) {
          continue;
        }
        obs.push_back(std::move(o));
      }
      w.clock += 0.3 * frames;
      MarkerDetection det = accumulate_and_fit(obs, cfg.camera, cfg.marker);
      if (!det.valid) throw MarkerNotVisible("marker leg lengths failed validation");
      double yaw = std::atan2(det.leg_a_dir.y(), det.leg_a_dir.x());
      wall_belief = planar_to_rigid(PlanarPose(det.intersection.x(), det.intersection.y(), yaw));
      wall_known = true;
      event("marker_fit", {{"intersection", {det.intersection.x(), det.intersection.y()}},
                           {"side_a", det.side_a},
                           {"side_b", det.side_b}});
    } else {
      enter("register_wall");
      Scene model = nominal;
      model.bricks.clear();
      for (const auto& [pos, id] : placed_by_position) {
        (void)id;
        model.bricks.push_back(positions[pos]);
      }
      Eigen::Vector3d center(0, 0, 0);
      for (const auto& b : model.bricks) center += planar_to_rigid(b.pose, b.z_base).t;
      center /= double(model.bricks.size());
      Eigen::Vector3d center_w = wall_belief.apply(center);
      center_w.z() = 0;
      std::vector<RigidTransform> commanded;
      PointCloud scan = scan_around(center_w, 3.0, &commanded);
      FrameEstimate est =
          register_target(model, "wall", scan, wall_belief, cfg.registration,
                          commanded[commanded.size() / 2], mix_seed(seed, 400 + scan_counter));
      if (est.converged) wall_belief = est.pose;
      event("wall_registered", {{"pairs", est.pairs}, {"converged", est.converged}});
    }
  }

  std::map<BrickType, std::vector<int>> stored_by_type() const {
    std::map<BrickType, std::vector<int>> out;
    std::vector<std::pair<int, StorageSlot>> items(w.slots.begin(), w.slots.end());
    // stable order: by slot position
    std::sort(items.begin(), items.end(), [](const auto& a, const auto& b) {
      const StorageSlot &x = a.second, &y = b.second;
      auto key = [](const StorageSlot& s) {
        return std::array<int, 4>{s.orange_slot, s.compartment, s.bin, s.level};
      };
      return key(x) < key(y);
    });
    for (const auto& [id, sl] : items) {
      (void)sl;
      if (w.status.at(id) != "stored") continue;
      for (const auto& b : nominal.bricks)
        if (b.id == id) out[b.type].push_back(id);
    }
    return out;
  }

  bool supports_met(int position) const {
    const Brick& target = positions[position];
    auto fp = brick_footprint(target.type, target.pose);
    double lo = fp[0].x(), hi = fp[0].x();
    for (const auto& c : fp) {
      lo = std::min(lo, c.x());
      hi = std::max(hi, c.x());
    }
    int layer = int(std::lround(target.z_base / kLayerHeight));
    for (const auto& other : positions) {
      int olayer = int(std::lround(other.z_base / kLayerHeight));
      if (olayer != layer - 1) continue;
      auto ofp = brick_footprint(other.type, other.pose);
      double olo = ofp[0].x(), ohi = ofp[0].x();
      for (const auto& c : ofp) {
        olo = std::min(olo, c.x());
        ohi = std::max(ohi, c.x());
      }
      if (std::min(hi, ohi) - std::max(lo, olo) > 0.01 && !placed_by_position.count(other.id))
        return false;
    }
    // left neighbour in the same layer
    const Brick* left = nullptr;
    double best = -1e300;
    for (const auto& other : positions) {
      int olayer = int(std::lround(other.z_base / kLayerHeight));
      if (olayer != layer || other.id == target.id) continue;
      if (other.pose.x < target.pose.x && other.pose.x > best) {
        best = other.pose.x;
        left = &other;
      }
    }
    if (left && !placed_by_position.count(left->id)) return false;
    return true;
  }

  void place_phase() {
    auto inventory = stored_by_type();
    bool progressed = true;
    std::set<int> skipped;
    while (progressed) {
      progressed = false;
      for (size_t si = 0; si < plan.stations.size(); ++si) {
        std::vector<int> todo;
        for (int pos : plan.bricks[si]) {
          if (placed_by_position.count(pos)) continue;
          auto& pool = inventory[positions[pos].type];
          if (pool.empty()) continue;
          todo.push_back(pos);
        }
        if (todo.empty()) continue;

        enter("drive_station");
        PlanarPose wall_planar = rigid_to_planar(wall_belief);
        PlanarPose station_local(plan.stations[si], -1.2, 0.0);
        drive(compose(wall_planar, station_local));
        int placed_before = int(placed_by_position.size());
        if (placed_before >= 3) find_wall();  // refine against built bricks

        enter("place");
        for (int pos : todo) {
          if (placed_by_position.count(pos)) continue;
          auto& pool = inventory[positions[pos].type];
          if (pool.empty()) continue;
          if (!supports_met(pos)) {
            event("support_deferred", {{"position", pos}});
            continue;
          }
          int brick_id = pool.front();
          pool.erase(pool.begin());

          const Brick& target = positions[pos];
          PlanarPose cmd = compose(rigid_to_planar(wall_belief), target.pose);
          PlanarPose phys = compose(drift(), cmd);
          PlanarPose noisy(phys.x + arm_rng.gaussian() * cfg.arm_sigma_xy,
                           phys.y + arm_rng.gaussian() * cfg.arm_sigma_xy,
                           phys.yaw + arm_rng.gaussian() * cfg.arm_sigma_yaw);
          PlanarPose in_wall = compose(inverse(rigid_to_planar(true_wall)), noisy);

          Brick placed;
          placed.id = brick_id;
          placed.type = target.type;
          placed.pose = in_wall;
          placed.z_base = target.z_base;  // settles onto the layer below
          placed.frame = "wall";
          w.scene.bricks.push_back(placed);

          auto slot = w.slots.find(brick_id);
          if (slot != w.slots.end()) {
            switch (placed.type) {
              case BrickType::red: w.rack_load.red--; break;
              case BrickType::green: w.rack_load.green--; break;
              case BrickType::blue: w.rack_load.blue--; break;
              case BrickType::orange: w.rack_load.orange--; break;
            }
            w.slots.erase(slot);
          }
          w.status[brick_id] = "placed";
          placed_by_position[pos] = brick_id;
          w.clock += 15.0;

          double exy = std::hypot(in_wall.x - target.pose.x, in_wall.y - target.pose.y);
          double eyaw = std::abs(normalize_angle(in_wall.yaw - target.pose.yaw));
          worst_place_err = std::max(worst_place_err, exy);
          bool ok = exy <= cfg.place_tol && eyaw <= cfg.grip_tol_yaw;
          if (!ok) any_misplaced = true;
          event("placed", {{"position", pos},
                           {"brick", brick_id},
                           {"err_xy", exy},
                           {"err_yaw", eyaw},
                           {"ok", ok}});
          progressed = true;
        }
      }
    }
  }

  MissionResult run() {
    enter("plan");
    init_world();
    event("planned", {{"stations", plan.station_count}, {"distance", plan.distance}});

    std::map<BrickType, int> demand;
    for (const auto& pos : positions) demand[pos.type]++;
    std::map<BrickType, int> available;
    for (const auto& b : nominal.bricks)
      if (b.frame == "pile") available[b.type]++;
    for (const auto& [t, n] : demand)
      if (available[t] < n)
        throw BadArgument(std::string("pile lacks ") + to_string(t) + " bricks");

    std::vector<std::map<BrickType, int>> trips;
    if (cfg.orange_first && demand[BrickType::orange] > 0) {
      trips.push_back({{BrickType::orange, demand[BrickType::orange]}});
      auto rest = demand;
      rest.erase(BrickType::orange);
      if (!rest.empty()) trips.push_back(rest);
    } else {
      trips.push_back(demand);
    }

    std::string aborted;
    try {
      for (auto& trip : trips) {
        int total = 0;
        for (auto& [t, n] : trip) total += n;
        if (total == 0) continue;
        PlanarPose pile_planar = rigid_to_planar(nominal.frame("pile"));
        drive(compose(pile_planar, PlanarPose(-3.0, 0.0, 0.0)));
        pick_phase(trip);

        PlanarPose wall_planar = rigid_to_planar(nominal.frame("wall"));
        enter("drive_to_wall");
        drive(compose(wall_planar, PlanarPose(0.75, -cfg.marker_standoff - 0.5, 0.0)));
        find_wall();
        place_phase();
      }
    } catch (const Error& e) {
      // perception gave up somewhere; the mission ends where it stands
      aborted = e.what();
      event("aborted", {{"reason", aborted}});
    }

    enter("done");
    MissionResult res;
    res.success =
        aborted.empty() && placed_by_position.size() == positions.size() && !any_misplaced;
    if (!res.success) {
      if (!aborted.empty())
        res.failure = aborted;
      else
        res.failure = placed_by_position.size() < positions.size() ? "IncompleteWall"
                                                                   : "MisplacedBrick";
    }
    event("finished", {{"success", res.success},
                       {"failure", res.failure},
                       {"worst_place_err", worst_place_err}});
    res.log = std::move(log);
    res.state = std::move(w);
    res.snapshots = std::move(snaps);
    return res;
  }
};

}  // namespace

MissionResult run_mission(const Scene& nominal, const Blueprint& blueprint,
                          const MissionConfig& cfg, uint64_t seed) {
  validate_blueprint(blueprint);
  if (!nominal.frames.count("pile") || !nominal.frames.count("wall"))
    throw BadArgument("scene needs pile and wall frames");
  Sim sim(nominal, blueprint, cfg, seed);
  return sim.run();
}

}  // namespace brickyard
