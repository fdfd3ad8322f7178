// Command-line front end: every pipeline stage, file-based I/O, one
// manifest written next to every output.
#include <CLI11.hpp>
#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "brickyard/mission.hpp"
#include "brickyard/parallel.hpp"
#include "brickyard/registration.hpp"
#include "brickyard/thermal.hpp"

namespace fs = std::filesystem;

namespace brickyard {

// config structs serialize here, not in the library: only the CLI needs
// them on disk (--config files and the run manifest)

void to_json(json& j, const SolverConfig& c) {
  j = json{{"mu0", c.mu0},
           {"mu_up", c.mu_up},
           {"mu_down", c.mu_down},
           {"max_mu_escalations", c.max_mu_escalations},
           {"max_iterations", c.max_iterations},
           {"param_tol", c.param_tol},
           {"cost_tol", c.cost_tol},
           {"fd_step", c.fd_step},
           {"use_analytic", c.use_analytic}};
}

void from_json(const json& j, SolverConfig& c) {
  c.mu0 = j.value("mu0", c.mu0);
  c.mu_up = j.value("mu_up", c.mu_up);
  c.mu_down = j.value("mu_down", c.mu_down);
  c.max_mu_escalations = j.value("max_mu_escalations", c.max_mu_escalations);
  c.max_iterations = j.value("max_iterations", c.max_iterations);
  c.param_tol = j.value("param_tol", c.param_tol);
  c.cost_tol = j.value("cost_tol", c.cost_tol);
  c.fd_step = j.value("fd_step", c.fd_step);
  c.use_analytic = j.value("use_analytic", c.use_analytic);
}

void to_json(json& j, const RenderConfig& c) {
  j = json{{"angular_step", c.angular_step},
           {"voxel", c.voxel},
           {"include_ground", c.include_ground},
           {"window_margin", c.window_margin}};
}

void from_json(const json& j, RenderConfig& c) {
  c.angular_step = j.value("angular_step", c.angular_step);
  c.voxel = j.value("voxel", c.voxel);
  c.include_ground = j.value("include_ground", c.include_ground);
  c.window_margin = j.value("window_margin", c.window_margin);
}

void to_json(json& j, const PileDetectConfig& c) {
  j = json{{"voxel", c.voxel},
           {"ransac_inlier", c.ransac_inlier},
           {"ransac_iters", c.ransac_iters},
           {"ground_clear", c.ground_clear},
           {"link_dist", c.link_dist},
           {"min_cluster", c.min_cluster},
           {"extent_tol", c.extent_tol}};
}

void from_json(const json& j, PileDetectConfig& c) {
  c.voxel = j.value("voxel", c.voxel);
  c.ransac_inlier = j.value("ransac_inlier", c.ransac_inlier);
  c.ransac_iters = j.value("ransac_iters", c.ransac_iters);
  c.ground_clear = j.value("ground_clear", c.ground_clear);
  c.link_dist = j.value("link_dist", c.link_dist);
  c.min_cluster = j.value("min_cluster", c.min_cluster);
  c.extent_tol = j.value("extent_tol", c.extent_tol);
}

void to_json(json& j, const RegistrationConfig& c) {
  j = json{{"crop_half_extent", c.crop_half_extent},
           {"voxel", c.voxel},
           {"normal_k", c.normal_k},
           {"ransac_inlier", c.ransac_inlier},
           {"ransac_iters", c.ransac_iters},
           {"initial_corr_dist", c.initial_corr_dist},
           {"rough_corr_dist", c.rough_corr_dist},
           {"fine_corr_dist", c.fine_corr_dist},
           {"max_rounds", c.max_rounds},
           {"min_pairs", c.min_pairs},
           {"dir_weight", c.dir_weight},
           {"converged_rms", c.converged_rms},
           {"solver", c.solver}};
}

void from_json(const json& j, RegistrationConfig& c) {
  c.crop_half_extent = j.value("crop_half_extent", c.crop_half_extent);
  c.voxel = j.value("voxel", c.voxel);
  c.normal_k = j.value("normal_k", c.normal_k);
  c.ransac_inlier = j.value("ransac_inlier", c.ransac_inlier);
  c.ransac_iters = j.value("ransac_iters", c.ransac_iters);
  c.initial_corr_dist = j.value("initial_corr_dist", c.initial_corr_dist);
  c.rough_corr_dist = j.value("rough_corr_dist", c.rough_corr_dist);
  c.fine_corr_dist = j.value("fine_corr_dist", c.fine_corr_dist);
  c.max_rounds = j.value("max_rounds", c.max_rounds);
  c.min_pairs = j.value("min_pairs", c.min_pairs);
  c.dir_weight = j.value("dir_weight", c.dir_weight);
  c.converged_rms = j.value("converged_rms", c.converged_rms);
  if (j.count("solver")) from_json(j.at("solver"), c.solver);
}

void to_json(json& j, const MultiBrickConfig& c) {
  j = json{{"lambda_dot", c.lambda_dot},
           {"lambda_dist", c.lambda_dist},
           {"lambda_r", c.lambda_r},
           {"lambda_t", c.lambda_t},
           {"contact_tol", c.contact_tol},
           {"free_z", c.free_z},
           {"rounds", c.rounds},
           {"solver", c.solver},
           {"render", c.render}};
}

void from_json(const json& j, MultiBrickConfig& c) {
  c.lambda_dot = j.value("lambda_dot", c.lambda_dot);
  c.lambda_dist = j.value("lambda_dist", c.lambda_dist);
  c.lambda_r = j.value("lambda_r", c.lambda_r);
  c.lambda_t = j.value("lambda_t", c.lambda_t);
  c.contact_tol = j.value("contact_tol", c.contact_tol);
  c.free_z = j.value("free_z", c.free_z);
  c.rounds = j.value("rounds", c.rounds);
  if (j.count("solver")) from_json(j.at("solver"), c.solver);
  if (j.count("render")) from_json(j.at("render"), c.render);
}

void to_json(json& j, const PlannerConfig& c) {
  j = json{{"t_x", c.t_x}, {"reach_half", c.reach_half}};
}

void from_json(const json& j, PlannerConfig& c) {
  c.t_x = j.value("t_x", c.t_x);
  c.reach_half = j.value("reach_half", c.reach_half);
}

void to_json(json& j, const HsvRange& r) {
  j = json{{"h_lo", r.h_lo}, {"h_hi", r.h_hi}, {"s_min", r.s_min}, {"v_min", r.v_min}};
}

void from_json(const json& j, HsvRange& r) {
  r.h_lo = j.value("h_lo", r.h_lo);
  r.h_hi = j.value("h_hi", r.h_hi);
  r.s_min = j.value("s_min", r.s_min);
  r.v_min = j.value("v_min", r.v_min);
}

void to_json(json& j, const ColorMaskConfig& c) {
  j = json{{"yellow", c.yellow}, {"magenta", c.magenta}, {"proximity_px", c.proximity_px}};
}

void from_json(const json& j, ColorMaskConfig& c) {
  if (j.count("yellow")) from_json(j.at("yellow"), c.yellow);
  if (j.count("magenta")) from_json(j.at("magenta"), c.magenta);
  c.proximity_px = j.value("proximity_px", c.proximity_px);
}

void to_json(json& j, const CornerConfig& c) {
  j = json{{"window", c.window},
           {"threshold", c.threshold},
           {"nms_radius", c.nms_radius},
           {"partner_px", c.partner_px},
           {"min_votes", c.min_votes}};
}

void from_json(const json& j, CornerConfig& c) {
  c.window = j.value("window", c.window);
  c.threshold = j.value("threshold", c.threshold);
  c.nms_radius = j.value("nms_radius", c.nms_radius);
  c.partner_px = j.value("partner_px", c.partner_px);
  c.min_votes = j.value("min_votes", c.min_votes);
}

void to_json(json& j, const MarkerFitConfig& c) {
  j = json{{"window", c.window},
           {"cluster_link", c.cluster_link},
           {"min_cluster", c.min_cluster},
           {"leg_a", c.leg_a},
           {"leg_b", c.leg_b},
           {"length_tol", c.length_tol}};
}

void from_json(const json& j, MarkerFitConfig& c) {
  c.window = j.value("window", c.window);
  c.cluster_link = j.value("cluster_link", c.cluster_link);
  c.min_cluster = j.value("min_cluster", c.min_cluster);
  c.leg_a = j.value("leg_a", c.leg_a);
  c.leg_b = j.value("leg_b", c.leg_b);
  c.length_tol = j.value("length_tol", c.length_tol);
}

void to_json(json& j, const CameraModel& c) {
  j = json{{"fx", c.fx}, {"fy", c.fy}, {"cx", c.cx},
           {"cy", c.cy}, {"width", c.width}, {"height", c.height}};
}

void from_json(const json& j, CameraModel& c) {
  c.fx = j.value("fx", c.fx);
  c.fy = j.value("fy", c.fy);
  c.cx = j.value("cx", c.cx);
  c.cy = j.value("cy", c.cy);
  c.width = j.value("width", c.width);
  c.height = j.value("height", c.height);
}

void to_json(json& j, const LidarModel& m) {
  j = json{{"rings", m.rings},
           {"elevation_min", m.elevation_min},
           {"elevation_step", m.elevation_step},
           {"azimuth_step", m.azimuth_step},
           {"max_range", m.max_range},
           {"sigma_range", m.sigma_range}};
}

void from_json(const json& j, LidarModel& m) {
  m.rings = j.value("rings", m.rings);
  m.elevation_min = j.value("elevation_min", m.elevation_min);
  m.elevation_step = j.value("elevation_step", m.elevation_step);
  m.azimuth_step = j.value("azimuth_step", m.azimuth_step);
  m.max_range = j.value("max_range", m.max_range);
  m.sigma_range = j.value("sigma_range", m.sigma_range);
}

void to_json(json& j, const MissionConfig& c) {
  j = json{{"pile_jitter_xy", c.pile_jitter_xy},
           {"pile_jitter_yaw", c.pile_jitter_yaw},
           {"odom_sigma_per_m", c.odom_sigma_per_m},
           {"odom_yaw_sigma_per_m", c.odom_yaw_sigma_per_m},
           {"arm_sigma_xy", c.arm_sigma_xy},
           {"arm_sigma_yaw", c.arm_sigma_yaw},
           {"scan_sigma", c.scan_sigma},
           {"pixel_noise", c.pixel_noise},
           {"pick_confidence", c.pick_confidence},
           {"grip_tol_xy", c.grip_tol_xy},
           {"grip_tol_yaw", c.grip_tol_yaw},
           {"place_tol", c.place_tol},
           {"orange_first", c.orange_first},
           {"optimal_plan", c.optimal_plan},
           {"marker_standoff", c.marker_standoff},
           {"camera_height", c.camera_height},
           {"drive_speed", c.drive_speed},
           {"rack", c.rack},
           {"pile", c.pile},
           {"estimate", c.estimate},
           {"registration", c.registration},
           {"marker", c.marker},
           {"mask", c.mask},
           {"corner", c.corner},
           {"camera", c.camera},
           {"lidar", c.lidar},
           {"planner", c.planner}};
}

void from_json(const json& j, MissionConfig& c) {
  c.pile_jitter_xy = j.value("pile_jitter_xy", c.pile_jitter_xy);
  c.pile_jitter_yaw = j.value("pile_jitter_yaw", c.pile_jitter_yaw);
  c.odom_sigma_per_m = j.value("odom_sigma_per_m", c.odom_sigma_per_m);
  c.odom_yaw_sigma_per_m = j.value("odom_yaw_sigma_per_m", c.odom_yaw_sigma_per_m);
  c.arm_sigma_xy = j.value("arm_sigma_xy", c.arm_sigma_xy);
  c.arm_sigma_yaw = j.value("arm_sigma_yaw", c.arm_sigma_yaw);
  c.scan_sigma = j.value("scan_sigma", c.scan_sigma);
  c.pixel_noise = j.value("pixel_noise", c.pixel_noise);
  c.pick_confidence = j.value("pick_confidence", c.pick_confidence);
  c.grip_tol_xy = j.value("grip_tol_xy", c.grip_tol_xy);
  c.grip_tol_yaw = j.value("grip_tol_yaw", c.grip_tol_yaw);
  c.place_tol = j.value("place_tol", c.place_tol);
  c.orange_first = j.value("orange_first", c.orange_first);
  c.optimal_plan = j.value("optimal_plan", c.optimal_plan);
  c.marker_standoff = j.value("marker_standoff", c.marker_standoff);
  c.camera_height = j.value("camera_height", c.camera_height);
  c.drive_speed = j.value("drive_speed", c.drive_speed);
  if (j.count("rack")) c.rack = j.at("rack").get<StorageRack>();
  if (j.count("pile")) from_json(j.at("pile"), c.pile);
  if (j.count("estimate")) from_json(j.at("estimate"), c.estimate);
  if (j.count("registration")) from_json(j.at("registration"), c.registration);
  if (j.count("marker")) from_json(j.at("marker"), c.marker);
  if (j.count("mask")) from_json(j.at("mask"), c.mask);
  if (j.count("corner")) from_json(j.at("corner"), c.corner);
  if (j.count("camera")) from_json(j.at("camera"), c.camera);
  if (j.count("lidar")) from_json(j.at("lidar"), c.lidar);
  if (j.count("planner")) from_json(j.at("planner"), c.planner);
}

}  // namespace brickyard

namespace {

using namespace brickyard;

constexpr const char* kVersion = "1.0.0";

int log_level() {
  static int level = [] {
    const char* env = std::getenv("BRICKYARD_LOG");
    if (!env) return 0;
    std::string s(env);
    if (s == "debug") return 2;
    if (s == "info") return 1;
    return 0;
  }();
  return level;
}

template <class... Args>
void log_info(Args&&... args) {
  if (log_level() < 1) return;
  std::ostringstream out;
  (out << ... << args);
  std::cerr << "[brickyard] " << out.str() << "\n";
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw BadFile("cannot open " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

json read_json(const std::string& path) {
  try {
    return json::parse(read_file(path));
  } catch (const json::exception& e) {
    throw BadFile(path + " is not valid JSON: " + e.what());
  }
}

void write_atomic(const std::string& path, const std::string& bytes) {
  fs::path p(path);
  if (p.has_parent_path()) fs::create_directories(p.parent_path());
  fs::path tmp = p;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw BadFile("cannot write " + tmp.string());
    out << bytes;
  }
  fs::rename(tmp, p);
}

// every command records what it ran with; runtime is the only field allowed
// to vary between identical runs
struct Manifest {
  std::string command;
  json config = json::object();
  json inputs = json::object();
  json outputs = json::array();
  json seed;  // null when the command takes none
  std::chrono::steady_clock::time_point start = std::chrono::steady_clock::now();

  void write(const std::string& primary_out, bool out_is_dir = false) {
    double runtime =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    json j{{"command", command}, {"config", config},   {"inputs", inputs},
           {"outputs", outputs}, {"seed", seed},       {"version", kVersion},
           {"runtime_s", runtime}};
    fs::path p(primary_out);
    fs::path mpath = out_is_dir ? p / "manifest.json" : fs::path(primary_out + ".manifest.json");
    write_atomic(mpath.string(), j.dump(2) + "\n");
  }
};

void write_json_out(Manifest& m, const std::string& path, const json& j) {
  write_atomic(path, j.dump(2) + "\n");
  json check = json::parse(read_file(path));  // confirm it reads back
  (void)check;
  m.outputs.push_back(path);
}

std::vector<double> parse_nums(const std::string& s, size_t n, const std::string& what) {
  std::vector<double> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      out.push_back(std::stod(item));
    } catch (const std::exception&) {
      throw CLI::ValidationError(what, "expected comma-separated numbers, got '" + s + "'");
    }
  }
  if (out.size() != n)
    throw CLI::ValidationError(what, "expected " + std::to_string(n) + " numbers, got '" + s + "'");
  return out;
}

template <class Cfg>
Cfg load_config(const std::string& path) {
  Cfg cfg;
  if (!path.empty()) from_json(read_json(path), cfg);
  return cfg;
}

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.9g", v);
  return buf;
}

struct MeanStd {
  double mean = 0.0, stddev = 0.0;
};

MeanStd mean_std(const std::vector<double>& xs) {
  MeanStd r;
  if (xs.empty()) return r;
  for (double x : xs) r.mean += x;
  r.mean /= double(xs.size());
  for (double x : xs) r.stddev += (x - r.mean) * (x - r.mean);
  r.stddev = std::sqrt(r.stddev / double(xs.size()));
  return r;
}

// ---------------------------------------------------------------- commands

void cmd_gen_blueprint(CLI::App* app) {
  struct Opts {
    int red = 0, green = 0, blue = 0, orange = 0;
    int layers = 2;
    double layer_length = 9.0;
    uint64_t seed = 0;
    std::string out = "bp.json";
  };
  auto o = std::make_shared<Opts>();
  auto* c = app->add_subcommand("gen-blueprint", "random blueprint from a brick multiset");
  c->add_option("--red", o->red);
  c->add_option("--green", o->green);
  c->add_option("--blue", o->blue);
  c->add_option("--orange", o->orange);
  c->add_option("--layers", o->layers);
  c->add_option("--layer-length", o->layer_length, "meters per layer");
  c->add_option("--seed", o->seed)->required();
  c->add_option("--out", o->out);
  c->callback([o] {
    Manifest m;
    m.command = "gen-blueprint";
    m.seed = o->seed;
    std::map<BrickType, int> counts{{BrickType::red, o->red},
                                    {BrickType::green, o->green},
                                    {BrickType::blue, o->blue},
                                    {BrickType::orange, o->orange}};
    m.config = json{{"red", o->red},       {"green", o->green},
                    {"blue", o->blue},     {"orange", o->orange},
                    {"layers", o->layers}, {"layer_length", o->layer_length}};
    Blueprint bp = generate_blueprint(counts, o->layers, o->layer_length, o->seed);
    write_json_out(m, o->out, json(bp));
    read_json(o->out).get<Blueprint>();
    log_info("blueprint with ", bp.layers.size(), " layers -> ", o->out);
    m.write(o->out);
  });
}

void cmd_gen_scene(CLI::App* app) {
  struct Opts {
    std::string kind = "mission";
    std::string blueprint;
    int red = 0, green = 0, blue = 0, orange = 0;
    std::vector<double> pile_pose{0, 0, 0};
    std::vector<double> wall_pose{4.0, 0, 0};
    int built = -1;
    bool no_marker = false;
    double row_gap = 0.8, along_gap = 0.10;
    int stack_height = 2;
    double jitter_xy = 0.0, jitter_yaw = 0.0;
    uint64_t seed = 0;
    std::string out = "scene.json";
  };
  auto o = std::make_shared<Opts>();
  auto* c = app->add_subcommand("gen-scene", "synthetic pile / wall / mission scene");
  c->add_option("--kind", o->kind)->check(CLI::IsMember({"pile", "wall", "mission"}));
  c->add_option("--blueprint", o->blueprint, "wall and mission kinds");
  c->add_option("--red", o->red);
  c->add_option("--green", o->green);
  c->add_option("--blue", o->blue);
  c->add_option("--orange", o->orange);
  c->add_option("--pile-pose", o->pile_pose, "x,y,yaw")->delimiter(',')->expected(3);
  c->add_option("--wall-pose", o->wall_pose, "x,y,yaw")->delimiter(',')->expected(3);
  c->add_option("--built", o->built, "wall kind: bricks already placed, -1 for all");
  c->add_flag("--no-marker", o->no_marker, "skip the ground marker");
  c->add_option("--row-gap", o->row_gap);
  c->add_option("--along-gap", o->along_gap);
  c->add_option("--stack-height", o->stack_height);
  c->add_option("--jitter-xy", o->jitter_xy);
  c->add_option("--jitter-yaw", o->jitter_yaw, "radians");
  c->add_option("--seed", o->seed)->required();
  c->add_option("--out", o->out);
  c->callback([o] {
    Manifest m;
    m.command = "gen-scene";
    m.seed = o->seed;
    m.config = json{{"kind", o->kind},
                    {"pile_pose", o->pile_pose},
                    {"wall_pose", o->wall_pose},
                    {"built", o->built},
                    {"no_marker", o->no_marker}};
    PlanarPose pile_p(o->pile_pose[0], o->pile_pose[1], o->pile_pose[2]);
    PlanarPose wall_p(o->wall_pose[0], o->wall_pose[1], o->wall_pose[2]);
    PileLayout layout;
    layout.row_gap = o->row_gap;
    layout.along_gap = o->along_gap;
    layout.stack_height = o->stack_height;
    layout.jitter_xy = o->jitter_xy;
    layout.jitter_yaw = o->jitter_yaw;

    Scene s;
    if (o->kind == "pile") {
      LoadCount counts{o->red, o->green, o->blue, o->orange};
      s = make_pile_scene(counts, planar_to_rigid(pile_p), layout, o->seed);
    } else {
      if (o->blueprint.empty())
        throw CLI::ValidationError("--blueprint", "required for kind " + o->kind);
      Blueprint bp = read_json(o->blueprint).get<Blueprint>();
      m.inputs["blueprint"] = o->blueprint;
      if (o->kind == "wall") {
        s = make_wall_scene(bp, planar_to_rigid(wall_p), o->built);
      } else {
        LoadCount counts;
        for (const auto& layer : bp.layers)
          for (BrickType t : layer) {
            if (t == BrickType::red) counts.red++;
            if (t == BrickType::green) counts.green++;
            if (t == BrickType::blue) counts.blue++;
            if (t == BrickType::orange) counts.orange++;
          }
        counts.red += o->red;
        counts.green += o->green;
        counts.blue += o->blue;
        counts.orange += o->orange;
        s = make_pile_scene(counts, planar_to_rigid(pile_p), layout, o->seed);
        s.frames["wall"] = planar_to_rigid(wall_p);
      }
      if (!o->no_marker) {
        MarkerSpec spec;
        spec.pose = wall_p;
        s.marker = spec;
      }
    }
    write_json_out(m, o->out, json(s));
    read_json(o->out).get<Scene>();
    log_info(s.bricks.size(), " bricks -> ", o->out);
    m.write(o->out);
  });
}

void cmd_scan(CLI::App* app) {
  struct Opts {
    std::string scene;
    std::string frame;
    std::string target;
    double radius = 3.5, height = 1.0, arc_span = 0.5;
    int poses = 5;
    LidarModel lidar;
    uint64_t seed = 0;
    std::string out = "scan.ply";
  };
  auto o = std::make_shared<Opts>();
  auto* c = app->add_subcommand("scan", "simulated lidar sweep of a scene");
  c->add_option("--scene", o->scene)->required();
  c->add_option("--frame", o->frame, "aim at this frame's origin");
  c->add_option("--target", o->target, "x,y,z aim point (overrides --frame)");
  c->add_option("--radius", o->radius);
  c->add_option("--height", o->height);
  c->add_option("--arc-span", o->arc_span, "radians of arc");
  c->add_option("--poses", o->poses);
  c->add_option("--rings", o->lidar.rings);
  c->add_option("--max-range", o->lidar.max_range);
  c->add_option("--sigma-range", o->lidar.sigma_range);
  c->add_option("--seed", o->seed)->required();
  c->add_option("--out", o->out);
  c->callback([o] {
    Manifest m;
    m.command = "scan";
    m.seed = o->seed;
    m.inputs["scene"] = o->scene;
    Scene s = read_json(o->scene).get<Scene>();
    Eigen::Vector3d target;
    if (!o->target.empty()) {
      auto v = parse_nums(o->target, 3, "--target");
      target = Eigen::Vector3d(v[0], v[1], v[2]);
    } else if (!o->frame.empty()) {
      target = s.frame(o->frame).t;
    } else {
      if (s.bricks.empty()) throw BadArgument("scene has no bricks; give --target");
      Eigen::Vector3d lo(1e300, 1e300, 1e300), hi(-1e300, -1e300, -1e300);
      for (const auto& b : s.bricks) {
        Eigen::Vector3d t = s.brick_box(b).pose.t;
        lo = lo.cwiseMin(t);
        hi = hi.cwiseMax(t);
      }
      target = 0.5 * (lo + hi);
      target.z() = 0;
    }
    m.config = json{{"target", {target.x(), target.y(), target.z()}},
                    {"radius", o->radius},
                    {"height", o->height},
                    {"arc_span", o->arc_span},
                    {"poses", o->poses},
                    {"lidar", o->lidar}};
    auto traj = arc_trajectory(target, o->radius, o->height, o->poses, o->arc_span);
    PointCloud scan = simulate_lidar_scan(s, traj, o->lidar, o->seed);
    save_ply(o->out, scan);
    PointCloud check = load_ply(o->out);
    if (check.size() != scan.size()) throw BadFile(o->out + " did not round-trip");
    m.outputs.push_back(o->out);
    log_info(scan.size(), " points -> ", o->out);
    m.write(o->out);
  });
}

void cmd_detect_pile(CLI::App* app) {
  struct Opts {
    std::string scan, fence, expected, config;
    uint64_t seed = 0;
    std::string out = "pile.json";
  };
  auto o = std::make_shared<Opts>();
  auto* c = app->add_subcommand("detect-pile", "find the brick pile inside a geofence");
  c->add_option("--scan", o->scan)->required();
  c->add_option("--fence", o->fence, "x_min,x_max,y_min,y_max")->required();
  c->add_option("--expected", o->expected, "ex,ey,ez expected extent")->required();
  c->add_option("--config", o->config, "JSON overrides");
  c->add_option("--seed", o->seed);
  c->add_option("--out", o->out);
  c->callback([o] {
    Manifest m;
    m.command = "detect-pile";
    m.seed = o->seed;
    m.inputs["scan"] = o->scan;
    auto f = parse_nums(o->fence, 4, "--fence");
    auto e = parse_nums(o->expected, 3, "--expected");
    auto cfg = load_config<PileDetectConfig>(o->config);
    m.config = json{{"fence", f}, {"expected", e}, {"detect", cfg}};
    PointCloud scan = load_ply(o->scan);
    Geofence fence{f[0], f[1], f[2], f[3]};
    PileHypothesis pile = detect_pile(scan, fence, Eigen::Vector3d(e[0], e[1], e[2]), cfg, o->seed);
    write_json_out(m, o->out, json(pile));
    read_json(o->out).get<PileHypothesis>();
    log_info("pile score ", pile.score, " -> ", o->out);
    m.write(o->out);
  });
}

void cmd_register(CLI::App* app) {
  struct Opts {
    std::string scene, frame = "pile", scan, init, sensor, marker_dir, config, dump_report;
    uint64_t seed = 0;
    std::string out = "est.json";
  };
  auto o = std::make_shared<Opts>();
  auto* c = app->add_subcommand("register", "align a model frame against a scan");
  c->add_option("--scene", o->scene, "model scene JSON")->required();
  c->add_option("--frame", o->frame);
  c->add_option("--scan", o->scan)->required();
  c->add_option("--init", o->init, "x,y,yaw initial frame guess")->required();
  c->add_option("--sensor", o->sensor, "x,y,z model render viewpoint")->required();
  c->add_option("--marker-dir", o->marker_dir, "dx,dy front-line prior");
  c->add_option("--config", o->config, "JSON overrides");
  c->add_option("--dump-report", o->dump_report, "write per-stage solver reports");
  c->add_option("--seed", o->seed);
  c->add_option("--out", o->out);
  c->callback([o] {
    Manifest m;
    m.command = "register";
    m.seed = o->seed;
    m.inputs = json{{"scene", o->scene}, {"scan", o->scan}};
    auto iv = parse_nums(o->init, 3, "--init");
    auto sv = parse_nums(o->sensor, 3, "--sensor");
    auto cfg = load_config<RegistrationConfig>(o->config);
    m.config = json{{"frame", o->frame}, {"init", iv}, {"sensor", sv}, {"registration", cfg}};
    Scene model = read_json(o->scene).get<Scene>();
    PointCloud scan = load_ply(o->scan);
    RigidTransform init = planar_to_rigid(PlanarPose(iv[0], iv[1], iv[2]));
    RigidTransform sensor;
    sensor.t = Eigen::Vector3d(sv[0], sv[1], sv[2]);
    std::optional<Eigen::Vector2d> dir;
    if (!o->marker_dir.empty()) {
      auto dv = parse_nums(o->marker_dir, 2, "--marker-dir");
      dir = Eigen::Vector2d(dv[0], dv[1]);
    }
    std::vector<SolveReport> reports;
    FrameEstimate est = register_target(model, o->frame, scan, init, cfg, sensor, o->seed, dir,
                                        o->dump_report.empty() ? nullptr : &reports);
    write_json_out(m, o->out, json(est));
    read_json(o->out).get<FrameEstimate>();
    if (!o->dump_report.empty()) write_json_out(m, o->dump_report, json(reports));
    log_info("pairs ", est.pairs, est.converged ? ", converged" : ", not converged");
    m.write(o->out);
  });
}

void cmd_estimate_bricks(CLI::App* app) {
  struct Opts {
    std::string scene, frame = "pile", scan, init, sensor, include, config, dump_report;
    std::string out = "bricks.json";
  };
  auto o = std::make_shared<Opts>();
  auto* c = app->add_subcommand("estimate-bricks", "per-brick pose refinement in a frame");
  c->add_option("--scene", o->scene, "model scene JSON")->required();
  c->add_option("--frame", o->frame);
  c->add_option("--scan", o->scan)->required();
  c->add_option("--init", o->init, "x,y,yaw frame pose")->required();
  c->add_option("--sensor", o->sensor, "x,y,z model render viewpoint")->required();
  c->add_option("--include", o->include, "comma-separated brick ids (default: all)");
  c->add_option("--config", o->config, "JSON overrides");
  c->add_option("--dump-report", o->dump_report, "write per-round solver reports");
  c->add_option("--out", o->out);
  c->callback([o] {
    Manifest m;
    m.command = "estimate-bricks";
    m.inputs = json{{"scene", o->scene}, {"scan", o->scan}};
    auto iv = parse_nums(o->init, 3, "--init");
    auto sv = parse_nums(o->sensor, 3, "--sensor");
    auto cfg = load_config<MultiBrickConfig>(o->config);
    m.config = json{{"frame", o->frame}, {"init", iv}, {"sensor", sv}, {"estimate", cfg}};
    Scene model = read_json(o->scene).get<Scene>();
    PointCloud scan = load_ply(o->scan);
    FrameEstimate rough;
    rough.pose = planar_to_rigid(PlanarPose(iv[0], iv[1], iv[2]));
    std::vector<int> include;
    if (!o->include.empty()) {
      std::stringstream ss(o->include);
      std::string item;
      while (std::getline(ss, item, ',')) include.push_back(std::stoi(item));
    } else {
      for (const auto& b : model.bricks)
        if (b.frame == o->frame) include.push_back(b.id);
    }
    RigidTransform sensor;
    sensor.t = Eigen::Vector3d(sv[0], sv[1], sv[2]);
    std::vector<SolveReport> reports;
    auto ests = estimate_bricks(model, o->frame, rough, scan, include, cfg, sensor,
                                o->dump_report.empty() ? nullptr : &reports);
    write_json_out(m, o->out, json(ests));
    for (const auto& item : read_json(o->out)) item.get<BrickEstimate>();
    if (!o->dump_report.empty()) write_json_out(m, o->dump_report, json(reports));
    log_info(ests.size(), " bricks -> ", o->out);
    m.write(o->out);
  });
}

void cmd_plan(CLI::App* app) {
  struct Opts {
    std::string blueprint, mode = "optimal", config;
    std::string out = "plan.json";
  };
  auto o = std::make_shared<Opts>();
  auto* c = app->add_subcommand("plan", "build order for a blueprint");
  c->add_option("--blueprint", o->blueprint)->required();
  c->add_option("--mode", o->mode)->check(CLI::IsMember({"optimal", "greedy"}));
  c->add_option("--config", o->config, "JSON overrides");
  c->add_option("--out", o->out);
  c->callback([o] {
    Manifest m;
    m.command = "plan";
    m.inputs["blueprint"] = o->blueprint;
    auto cfg = load_config<PlannerConfig>(o->config);
    m.config = json{{"mode", o->mode}, {"planner", cfg}};
    Blueprint bp = read_json(o->blueprint).get<Blueprint>();
    BuildPlan plan = o->mode == "optimal" ? plan_optimal(bp, cfg) : plan_greedy(bp, cfg);
    write_json_out(m, o->out, json(plan));
    read_json(o->out).get<BuildPlan>();
    log_info(plan.station_count, " stations, ", fmt(plan.distance), " m -> ", o->out);
    m.write(o->out);
  });
}

void cmd_bench(CLI::App* app) {
  struct Opts {
    int n = 1000;
    int red = 20, green = 10, blue = 5, orange = 0;
    int layers = 2;
    double layer_length = 9.0;
    int jobs = 0;
    uint64_t seed = 0;
    std::string config;
    std::string out = "bench.csv";
  };
  auto o = std::make_shared<Opts>();
  auto* c = app->add_subcommand("bench", "optimal vs greedy over random blueprints");
  c->add_option("--n", o->n);
  c->add_option("--red", o->red);
  c->add_option("--green", o->green);
  c->add_option("--blue", o->blue);
  c->add_option("--orange", o->orange);
  c->add_option("--layers", o->layers);
  c->add_option("--layer-length", o->layer_length);
  c->add_option("--jobs", o->jobs, "worker threads, 0 = library default");
  c->add_option("--config", o->config, "JSON overrides");
  c->add_option("--seed", o->seed)->required();
  c->add_option("--out", o->out);
  c->callback([o] {
    Manifest m;
    m.command = "bench";
    m.seed = o->seed;
    auto cfg = load_config<PlannerConfig>(o->config);
    m.config = json{{"n", o->n},           {"red", o->red},
                    {"green", o->green},   {"blue", o->blue},
                    {"orange", o->orange}, {"layers", o->layers},
                    {"layer_length", o->layer_length}, {"jobs", o->jobs},
                    {"planner", cfg}};
#ifdef _OPENMP
    if (o->jobs > 0) omp_set_num_threads(o->jobs);
#endif
    std::map<BrickType, int> counts{{BrickType::red, o->red},
                                    {BrickType::green, o->green},
                                    {BrickType::blue, o->blue},
                                    {BrickType::orange, o->orange}};
    auto rows = bench_plans(counts, o->layers, o->layer_length, o->n, o->seed, cfg);

    std::ostringstream csv;
    csv << "method,instance,stations,distance,runtime_s\n";
    std::vector<double> s_opt, d_opt, t_opt, s_gre, d_gre, t_gre;
    for (const auto& r : rows) {
      csv << "optimal," << r.instance << "," << r.stations_opt << "," << fmt(r.dist_opt) << ","
          << fmt(r.secs_opt) << "\n";
      csv << "greedy," << r.instance << "," << r.stations_greedy << "," << fmt(r.dist_greedy)
          << "," << fmt(r.secs_greedy) << "\n";
      s_opt.push_back(r.stations_opt);
      d_opt.push_back(r.dist_opt);
      t_opt.push_back(r.secs_opt);
      s_gre.push_back(r.stations_greedy);
      d_gre.push_back(r.dist_greedy);
      t_gre.push_back(r.secs_greedy);
    }
    csv << "\nmethod,stations_mean,stations_std,distance_mean,distance_std,runtime_mean,"
           "runtime_std\n";
    auto line = [&](const char* name, const std::vector<double>& s, const std::vector<double>& d,
                    const std::vector<double>& t) {
      auto ms = mean_std(s), md = mean_std(d), mt = mean_std(t);
      csv << name << "," << fmt(ms.mean) << "," << fmt(ms.stddev) << "," << fmt(md.mean) << ","
          << fmt(md.stddev) << "," << fmt(mt.mean) << "," << fmt(mt.stddev) << "\n";
    };
    line("optimal", s_opt, d_opt, t_opt);
    line("greedy", s_gre, d_gre, t_gre);
    write_atomic(o->out, csv.str());
    m.outputs.push_back(o->out);
    log_info(rows.size(), " instances -> ", o->out);
    m.write(o->out);
  });
}

void cmd_detect_marker(CLI::App* app) {
  struct Opts {
    std::string images, poses, mask_config, corner_config, fit_config, camera_config;
    std::string out = "marker.json";
  };
  auto o = std::make_shared<Opts>();
  auto* c = app->add_subcommand("detect-marker", "L-marker fit from camera frames");
  c->add_option("--images", o->images, "directory with the PPM frames")->required();
  c->add_option("--poses", o->poses, "JSON list of {file, stamp, camera}")->required();
  c->add_option("--mask-config", o->mask_config);
  c->add_option("--corner-config", o->corner_config);
  c->add_option("--fit-config", o->fit_config);
  c->add_option("--camera-config", o->camera_config);
  c->add_option("--out", o->out);
  c->callback([o] {
    Manifest m;
    m.command = "detect-marker";
    m.inputs = json{{"images", o->images}, {"poses", o->poses}};
    auto mask = load_config<ColorMaskConfig>(o->mask_config);
    auto corner = load_config<CornerConfig>(o->corner_config);
    auto fit = load_config<MarkerFitConfig>(o->fit_config);
    auto cam = load_config<CameraModel>(o->camera_config);
    m.config = json{{"mask", mask}, {"corner", corner}, {"fit", fit}, {"camera", cam}};
    json poses = read_json(o->poses);
    std::vector<MarkerFrameObs> obs;
    int skipped = 0;
    for (const auto& entry : poses) {
      MarkerFrameObs ob;
      ob.stamp = entry.at("stamp");
      ob.camera = entry.at("camera").get<RigidTransform>();
      fs::path img_path = fs::path(o->images) / entry.at("file").get<std::string>();
      Image8 img = load_ppm(img_path.string());
      try {
        ob.pixels = detect_marker_frame(img, mask, corner);
      } catch (const NoCandidate&) {
        skipped++;
        continue;
      }
      obs.push_back(std::move(ob));
    }
    log_info(obs.size(), " frames with candidates, ", skipped, " skipped");
    MarkerDetection det = accumulate_and_fit(obs, cam, fit);
    write_json_out(m, o->out, json(det));
    read_json(o->out).get<MarkerDetection>();
    m.write(o->out);
  });
}

void cmd_detect_heat(CLI::App* app) {
  struct Opts {
    std::string image, camera_config;
    int threshold = 8000;
    double range_coeff = 75.0;
    std::string out = "heat.json";
  };
  auto o = std::make_shared<Opts>();
  auto* c = app->add_subcommand("detect-heat", "hottest blob box and range estimate");
  c->add_option("--image", o->image, "16-bit PGM, centi-degrees C")->required();
  c->add_option("--threshold", o->threshold, "centi-degrees C");
  c->add_option("--range-coeff", o->range_coeff, "distance = coeff / box width px");
  c->add_option("--camera-config", o->camera_config);
  c->add_option("--out", o->out);
  c->callback([o] {
    Manifest m;
    m.command = "detect-heat";
    m.inputs["image"] = o->image;
    auto cam = load_config<CameraModel>(o->camera_config);
    m.config = json{{"threshold", o->threshold}, {"range_coeff", o->range_coeff}, {"camera", cam}};
    Image16 img = load_pgm16(o->image);
    auto det = detect_heat(img, uint16_t(o->threshold), cam, o->range_coeff);
    json out;
    if (det) {
      out = json{{"found", true}, {"detection", *det}};
      log_info("heat at ", fmt(det->distance), " m");
    } else {
      out = json{{"found", false}, {"detection", nullptr}};
      log_info("no heat above threshold");
    }
    write_json_out(m, o->out, out);
    m.write(o->out);
  });
}

void cmd_run_mission(CLI::App* app) {
  struct Opts {
    std::string scene, blueprint, config;
    uint64_t seed = 0;
    std::string out = "mission";
  };
  auto o = std::make_shared<Opts>();
  auto* c = app->add_subcommand("run-mission", "full pick-and-place simulation");
  c->add_option("--scene", o->scene, "nominal scene with pile and wall frames")->required();
  c->add_option("--blueprint", o->blueprint)->required();
  c->add_option("--config", o->config, "JSON overrides");
  c->add_option("--seed", o->seed)->required();
  c->add_option("--out", o->out, "output directory");
  c->callback([o] {
    Manifest m;
    m.command = "run-mission";
    m.seed = o->seed;
    m.inputs = json{{"scene", o->scene}, {"blueprint", o->blueprint}};
    auto cfg = load_config<MissionConfig>(o->config);
    m.config = json(cfg);
    Scene nominal = read_json(o->scene).get<Scene>();
    Blueprint bp = read_json(o->blueprint).get<Blueprint>();
    MissionResult res = run_mission(nominal, bp, cfg, o->seed);

    fs::create_directories(fs::path(o->out) / "snapshots");
    std::string log_path = (fs::path(o->out) / "mission.log.jsonl").string();
    write_atomic(log_path, log_to_jsonl(res.log));
    {
      std::ifstream in(log_path);
      std::string line;
      while (std::getline(in, line)) {
        json check = json::parse(line);
        (void)check;
      }
    }
    m.outputs.push_back(log_path);

    std::string state_path = (fs::path(o->out) / "final_state.json").string();
    write_json_out(m, state_path, json(res.state));
    restore(read_file(state_path));

    int idx = 0;
    for (const auto& [name, bytes] : res.snapshots) {
      char fname[64];
      std::snprintf(fname, sizeof fname, "%03d_%s.json", idx++, name.c_str());
      std::string p = (fs::path(o->out) / "snapshots" / fname).string();
      write_atomic(p, bytes + "\n");
      m.outputs.push_back(p);
    }

    std::string result_path = (fs::path(o->out) / "result.json").string();
    write_json_out(m, result_path,
                   json{{"success", res.success}, {"failure", res.failure}});
    log_info("mission ", res.success ? "succeeded" : "failed: " + res.failure);
    m.write(o->out, true);
    if (log_level() >= 1)
      std::cerr << "[brickyard] " << res.log.size() << " log events, " << idx << " snapshots\n";
  });
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"brick pipeline tools"};
  app.require_subcommand(1);
  cmd_gen_blueprint(&app);
  cmd_gen_scene(&app);
  cmd_scan(&app);
  cmd_detect_pile(&app);
  cmd_register(&app);
  cmd_estimate_bricks(&app);
  cmd_plan(&app);
  cmd_bench(&app);
  cmd_detect_marker(&app);
  cmd_detect_heat(&app);
  cmd_run_mission(&app);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  } catch (const brickyard::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
