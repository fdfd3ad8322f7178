#include "brickyard/nls.hpp"

#include <cmath>

namespace brickyard {

const char* to_string(Termination t) {
  switch (t) {
    case Termination::param_tol: return "param_tol";
    case Termination::cost_tol: return "cost_tol";
    case Termination::max_iter: return "max_iter";
    case Termination::stalled: return "stalled";
  }
  return "?";
}

void to_json(json& j, const SolveReport& r) {
  j = json{{"termination", to_string(r.termination)},
           {"iterations", r.iterations},
           {"initial_cost", r.initial_cost},
           {"final_cost", r.final_cost},
           {"cost_trace", r.cost_trace}};
}

int ResidualProblem::add_block(const std::string& name, const Eigen::VectorXd& value,
                               bool frozen) {
  if (by_name_.count(name)) throw BadArgument("duplicate block '" + name + "'");
  Block b;
  b.name = name;
  b.value = value;
  b.frozen = frozen;
  b.constant.assign(size_t(value.size()), 0);
  blocks_.push_back(std::move(b));
  int id = int(blocks_.size()) - 1;
  by_name_[name] = id;
  return id;
}

int ResidualProblem::block_index(const std::string& name) const {
  auto it = by_name_.find(name);
  if (it == by_name_.end()) throw BadArgument("no block '" + name + "'");
  return it->second;
}

void ResidualProblem::set_value(int block, const Eigen::VectorXd& v) {
  if (v.size() != blocks_[block].value.size()) throw BadArgument("block size mismatch");
  blocks_[block].value = v;
}

void ResidualProblem::set_constant_coords(int block, const std::vector<int>& coords) {
  for (int c : coords) {
    if (c < 0 || c >= blocks_[block].value.size()) throw BadArgument("coord out of range");
    blocks_[block].constant[c] = 1;
  }
}

void ResidualProblem::add_residual(const std::vector<int>& blocks, int dim, EvalFn fn,
                                   bool has_analytic) {
  for (int b : blocks)
    if (b < 0 || b >= num_blocks()) throw BadArgument("residual references unknown block");
  if (dim <= 0) throw BadArgument("residual dim must be positive");
  residuals_.push_back({blocks, dim, std::move(fn), has_analytic});
}

double ResidualProblem::cost_of(const std::vector<Eigen::VectorXd>& values) const {
  double total = 0.0;
  std::vector<Eigen::VectorXd> args;
  Eigen::VectorXd r;
  for (const Residual& res : residuals_) {
    args.clear();
    for (int b : res.blocks) args.push_back(values[b]);
    r.resize(res.dim);
    res.fn(args, r, nullptr);
    total += r.squaredNorm();
  }
  return total;
}

double ResidualProblem::cost() const {
  std::vector<Eigen::VectorXd> values;
  for (const Block& b : blocks_) values.push_back(b.value);
  return cost_of(values);
}

namespace {

// central differences, step scaled per coordinate
void numeric_jacobian(const ResidualProblem::EvalFn& fn, std::vector<Eigen::VectorXd> args,
                      int which, int dim, double step, Eigen::MatrixXd& jac) {
  int n = int(args[which].size());
  jac.resize(dim, n);
  Eigen::VectorXd rp(dim), rm(dim);
  for (int c = 0; c < n; ++c) {
    double x0 = args[which][c];
    double h = step * (1.0 + std::abs(x0));
    args[which][c] = x0 + h;
    fn(args, rp, nullptr);
    args[which][c] = x0 - h;
    fn(args, rm, nullptr);
    args[which][c] = x0;
    jac.col(c) = (rp - rm) / (2.0 * h);
  }
}

}  // namespace

double ResidualProblem::check_jacobian(int block, double eps) const {
  double worst = 0.0;
  std::vector<Eigen::VectorXd> args;
  for (const Residual& res : residuals_) {
    if (!res.has_analytic) continue;
    bool touches = false;
    for (int b : res.blocks) touches |= (b == block);
    if (!touches) continue;
    args.clear();
    for (int b : res.blocks) args.push_back(blocks_[b].value);
    Eigen::VectorXd r(res.dim);
    std::vector<Eigen::MatrixXd> jacs(res.blocks.size());
    res.fn(args, r, &jacs);
    for (size_t k = 0; k < res.blocks.size(); ++k) {
      if (res.blocks[k] != block) continue;
      Eigen::MatrixXd fd;
      numeric_jacobian(res.fn, args, int(k), res.dim, eps, fd);
      worst = std::max(worst, (jacs[k] - fd).cwiseAbs().maxCoeff());
    }
  }
  return worst;
}

SolveReport solve(ResidualProblem& problem, const SolverConfig& config) {
  auto& blocks = problem.blocks_;
  auto& residuals = problem.residuals_;

  // column layout over free coordinates
  struct ColRange {
    int offset = -1;
    std::vector<int> coords;  // free coordinate indices within the block
  };
  std::vector<ColRange> layout(blocks.size());
  int ncols = 0;
  for (size_t b = 0; b < blocks.size(); ++b) {
    if (blocks[b].frozen) continue;
    ColRange cr;
    cr.offset = ncols;
    for (int c = 0; c < blocks[b].value.size(); ++c)
      if (!blocks[b].constant[c]) cr.coords.push_back(c);
    if (cr.coords.empty()) continue;
    layout[b] = cr;
    ncols += int(cr.coords.size());
  }

  SolveReport report;
  std::vector<Eigen::VectorXd> values;
  for (const auto& b : blocks) values.push_back(b.value);
  report.initial_cost = problem.cost_of(values);
  report.final_cost = report.initial_cost;
  report.cost_trace.push_back(report.initial_cost);
  if (ncols == 0) {
    report.termination = Termination::stalled;
    return report;
  }

  int nrows = 0;
  for (const auto& res : residuals) nrows += res.dim;

  Eigen::MatrixXd J(nrows, ncols);
  Eigen::VectorXd r(nrows);
  auto linearize = [&]() {
    J.setZero();
    std::vector<Eigen::VectorXd> args;
    std::vector<Eigen::MatrixXd> jacs;
    int row = 0;
    for (const auto& res : residuals) {
      args.clear();
      for (int b : res.blocks) args.push_back(values[b]);
      Eigen::VectorXd ri(res.dim);
      bool analytic = config.use_analytic && res.has_analytic;
      if (analytic) {
        jacs.assign(res.blocks.size(), Eigen::MatrixXd());
        res.fn(args, ri, &jacs);
      } else {
        res.fn(args, ri, nullptr);
      }
      r.segment(row, res.dim) = ri;
      for (size_t k = 0; k < res.blocks.size(); ++k) {
        int b = res.blocks[k];
        if (layout[b].offset < 0) continue;
        Eigen::MatrixXd jac;
        if (analytic)
          jac = jacs[k];
        else
          numeric_jacobian(res.fn, args, int(k), res.dim, config.fd_step, jac);
        const auto& coords = layout[b].coords;
        for (size_t c = 0; c < coords.size(); ++c)
          J.block(row, layout[b].offset + int(c), res.dim, 1) += jac.col(coords[c]);
      }
      row += res.dim;
    }
  };

  double mu = config.mu0;
  double cost = report.initial_cost;
  bool need_linearize = true;
  Eigen::MatrixXd H;
  Eigen::VectorXd g, diag;

  auto finish = [&](Termination t) {
    report.termination = t;
    report.final_cost = cost;
    for (size_t b = 0; b < blocks.size(); ++b) blocks[b].value = values[b];
    return report;
  };

  while (report.iterations < config.max_iterations) {
    if (need_linearize) {
      linearize();
      H = J.transpose() * J;
      g = J.transpose() * r;
      diag = H.diagonal();
      need_linearize = false;
    }
    // damped normal equations; escalate on indefiniteness
    Eigen::VectorXd step;
    {
      int escalations = 0;
      for (;;) {
        Eigen::MatrixXd A = H;
        for (int i = 0; i < ncols; ++i) A(i, i) += mu * diag(i);
        Eigen::LLT<Eigen::MatrixXd> llt(A);
        if (llt.info() == Eigen::Success) {
          step = llt.solve(-g);
          if (step.allFinite()) break;
        }
        if (++escalations > config.max_mu_escalations)
          throw SingularSystem("normal equations not positive definite");
        mu *= config.mu_up;
      }
    }

    ++report.iterations;
    std::vector<Eigen::VectorXd> trial = values;
    for (size_t b = 0; b < blocks.size(); ++b) {
      if (layout[b].offset < 0) continue;
      const auto& coords = layout[b].coords;
      for (size_t c = 0; c < coords.size(); ++c)
        trial[b][coords[c]] += step[layout[b].offset + int(c)];
    }
    double trial_cost = problem.cost_of(trial);
    if (trial_cost < cost) {
      double drop = cost - trial_cost;
      values = std::move(trial);
      double prev = cost;
      cost = trial_cost;
      report.cost_trace.push_back(cost);
      mu *= config.mu_down;
      need_linearize = true;
      if (step.lpNorm<Eigen::Infinity>() <= config.param_tol) return finish(Termination::param_tol);
      if (prev > 0.0 && drop / prev <= config.cost_tol) return finish(Termination::cost_tol);
      if (prev == 0.0) return finish(Termination::cost_tol);
    } else {
      mu *= config.mu_up;
      if (mu > 1e32) return finish(Termination::stalled);
    }
  }
  return finish(Termination::max_iter);
}

}  // namespace brickyard
