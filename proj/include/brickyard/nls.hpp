#pragma once
#include <Eigen/Dense>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "brickyard/core.hpp"
#include "brickyard/errors.hpp"

namespace brickyard {

struct SingularSystem : Error {
  explicit SingularSystem(const std::string& what = "") : Error("SingularSystem", what) {}
};

struct SolverConfig {
  double mu0 = 1e-4;
  double mu_up = 10.0;        // after a rejected step
  double mu_down = 0.5;       // after an accepted step
  int max_mu_escalations = 10;
  int max_iterations = 20;
  double param_tol = 5e-8;    // max-norm of an accepted update (radians for rotations)
  double cost_tol = 1e-6;     // relative cost drop
  double fd_step = 1e-7;      // central difference step scale
  bool use_analytic = true;
};

// stalled also covers the degenerate all-frozen problem (zero iterations)
enum class Termination { param_tol, cost_tol, max_iter, stalled };
const char* to_string(Termination t);

struct SolveReport {
  Termination termination = Termination::max_iter;
  int iterations = 0;              // step attempts, accepted or not
  double initial_cost = 0.0;
  double final_cost = 0.0;
  std::vector<double> cost_trace;  // initial cost, then cost after each accepted step
};

void to_json(json& j, const SolveReport& r);

// residual blocks over named parameter blocks; cost is the plain sum of
// squared residual entries
class ResidualProblem {
 public:
  using EvalFn = std::function<void(const std::vector<Eigen::VectorXd>& params,
                                    Eigen::VectorXd& residual,
                                    std::vector<Eigen::MatrixXd>* jacobians)>;

  int add_block(const std::string& name, const Eigen::VectorXd& value, bool frozen = false);
  int block_index(const std::string& name) const;
  int num_blocks() const { return int(blocks_.size()); }
  const Eigen::VectorXd& value(int block) const { return blocks_[block].value; }
  void set_value(int block, const Eigen::VectorXd& v);
  void set_frozen(int block, bool frozen) { blocks_[block].frozen = frozen; }
  bool frozen(int block) const { return blocks_[block].frozen; }
  // individual coordinates held constant while the rest of the block moves
  void set_constant_coords(int block, const std::vector<int>& coords);

  void add_residual(const std::vector<int>& blocks, int dim, EvalFn fn,
                    bool has_analytic = false);
  int num_residuals() const { return int(residuals_.size()); }

  double cost() const;
  // max abs deviation between analytic and central-difference jacobians over
  // all residuals touching the block; 0 when nothing analytic touches it
  double check_jacobian(int block, double eps = 1e-6) const;

 private:
  friend SolveReport solve(ResidualProblem&, const SolverConfig&);
  struct Block {
    std::string name;
    Eigen::VectorXd value;
    bool frozen = false;
    std::vector<uint8_t> constant;  // per-coordinate
  };
  struct Residual {
    std::vector<int> blocks;
    int dim = 0;
    EvalFn fn;
    bool has_analytic = false;
  };
  double cost_of(const std::vector<Eigen::VectorXd>& values) const;
  std::vector<Block> blocks_;
  std::vector<Residual> residuals_;
  std::map<std::string, int> by_name_;
};

// Levenberg-Marquardt with additive mu * diag(JtJ) damping.
// throws SingularSystem when the damped normal equations stay indefinite
// through the escalation budget.
SolveReport solve(ResidualProblem& problem, const SolverConfig& config = {});

}  // namespace brickyard
