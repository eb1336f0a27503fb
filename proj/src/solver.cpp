#include "senreg/solver.hpp"

#include <Eigen/Cholesky>
#include <cmath>

#include "senreg/errors.hpp"

namespace senreg {

namespace {

double pivot_ratio(const Eigen::LLT<Eigen::MatrixXd>& llt) {
  const Eigen::VectorXd d = llt.matrixLLT().diagonal();
  const double hi = d.maxCoeff();
  const double lo = d.minCoeff();
  return hi > 0.0 ? (lo / hi) * (lo / hi) : 0.0;
}

// Runs the ADMM iterations on res.state. MaxN bounds the variable count so small problems
// stay on the stack.
template <int MaxN>
void iterate(const Eigen::MatrixXd& step_in, const Eigen::VectorXd& offset_in, double rho, const AdmmOptions& opts,
             AdmmResult& res) {
  constexpr int kMaxWork = MaxN == Eigen::Dynamic ? Eigen::Dynamic : 2 * MaxN;
  using Vec = Eigen::Matrix<double, Eigen::Dynamic, 1, 0, MaxN, 1>;
  using Work = Eigen::Matrix<double, Eigen::Dynamic, 1, 0, kMaxWork, 1>;
  using Step = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, 0, MaxN, kMaxWork>;

  AdmmState& st = res.state;
  const Eigen::Index n = offset_in.size();
  const Step step = step_in;
  const Vec offset = offset_in;
  Work w(2 * n);  // [z; lambda]
  w.head(n) = st.z;
  w.tail(n) = st.lambda;
  Vec x(n);
  for (int it = 1; it <= opts.max_iter; ++it) {
    x.noalias() = offset + step * w;
    double primal = 0.0, dual = 0.0;
    for (Eigen::Index i = 0; i < n; i += 2) {
      const double u = x[i] + w[n + i] / rho;
      const double v = x[i + 1] + w[n + i + 1] / rho;
      const double norm = std::sqrt(u * u + v * v);
      if (!(norm > 0.0)) {
        throw DegenerateProjectionError("admm_qcqp: pair " + std::to_string(i / 2) + " has zero norm");
      }
      const double zu = u / norm, zv = v / norm;
      const double px = x[i] - zu, py = x[i + 1] - zv;
      const double dx = zu - w[i], dy = zv - w[i + 1];
      primal += px * px + py * py;
      dual += dx * dx + dy * dy;
      w[i] = zu;
      w[i + 1] = zv;
      w[n + i] += rho * px;
      w[n + i + 1] += rho * py;
    }
    res.primal_residual = std::sqrt(primal);
    res.dual_residual = std::sqrt(dual);
    res.iterations = it;
    if (res.primal_residual <= opts.tol && res.dual_residual <= opts.tol) {
      res.converged = true;
      break;
    }
  }
  st.x = x;
  st.z = w.head(n);
  st.lambda = w.tail(n);
}

}  // namespace

Eigen::VectorXd solve_weighted_ls(const Subproblem& sub) {
  if (sub.c.size() != sub.H.rows()) throw ContractViolation("solve_weighted_ls: dimension mismatch");
  Eigen::MatrixXd normal = sub.normal_matrix();
  const Eigen::VectorXd rhs = sub.normal_rhs();

  Eigen::LLT<Eigen::MatrixXd> llt(normal);
  if (llt.info() != Eigen::Success || pivot_ratio(llt) < 1e-13) {
    const double jitter = 1e-12 * normal.trace();
    normal.diagonal().array() += jitter;
    llt.compute(normal);
    if (llt.info() != Eigen::Success || pivot_ratio(llt) < 1e-9) {
      throw RankDeficiencyError(sub.block, -1, "normal matrix is rank deficient");
    }
  }
  return -llt.solve(rhs);
}

NormalFactor::NormalFactor(const Subproblem& sub) : cols_(sub.H.cols()) {
  Eigen::MatrixXd normal = sub.normal_matrix();
  auto pivots_ok = [this](double floor) {
    if (ldlt_.info() != Eigen::Success) return false;
    const Eigen::VectorXd d = ldlt_.vectorD();
    return d.minCoeff() > floor * d.maxCoeff();
  };
  ldlt_.compute(normal.sparseView());
  if (!pivots_ok(1e-13)) {
    normal.diagonal().array() += 1e-12 * normal.trace();
    ldlt_.compute(normal.sparseView());
    if (!pivots_ok(1e-9)) throw RankDeficiencyError(sub.block, -1, "normal matrix is rank deficient");
  }
}

Eigen::VectorXd NormalFactor::minimizer(const Subproblem& sub) const {
  if (sub.H.cols() != cols_ || sub.c.size() != sub.H.rows()) {
    throw ContractViolation("NormalFactor: subproblem does not match the factored matrix");
  }
  return -ldlt_.solve(sub.normal_rhs());
}

double auto_penalty(const Eigen::MatrixXd& normal) {
  if (normal.rows() == 0) throw ContractViolation("auto_penalty: empty matrix");
  return normal.diagonal().mean();
}

AdmmState cold_start(const Eigen::VectorXd& start) {
  AdmmState s;
  s.z = project_circles(start);
  s.x = s.z;
  s.lambda = Eigen::VectorXd::Zero(start.size());
  return s;
}

AdmmResult admm_qcqp(const Subproblem& sub, const AdmmOptions& opts, const AdmmState& init) {
  const Eigen::Index n = sub.H.cols();
  if (n % 2 != 0) throw ContractViolation("admm_qcqp: variable count must be even");
  if (init.z.size() != n || init.lambda.size() != n) throw ContractViolation("admm_qcqp: bad initial state");

  const Eigen::MatrixXd normal = sub.normal_matrix();
  const Eigen::VectorXd b = sub.normal_rhs();
  const double rho = opts.penalty ? *opts.penalty : auto_penalty(normal);
  if (!(rho > 0.0)) throw ContractViolation("admm_qcqp: penalty must be positive");

  Eigen::MatrixXd system = normal;
  system.diagonal().array() += 0.5 * rho;
  const Eigen::LLT<Eigen::MatrixXd> llt(system);
  if (llt.info() != Eigen::Success) throw SolverError(sub.block, -1, "x-update system is not positive definite");
  // x = a + [A, -B] [z; lambda] with A = (rho/2) S^-1, B = S^-1 / 2, a = -S^-1 b
  const Eigen::MatrixXd inv = llt.solve(Eigen::MatrixXd::Identity(n, n));
  Eigen::MatrixXd step(n, 2 * n);
  step.leftCols(n) = (0.5 * rho) * inv;
  step.rightCols(n) = -0.5 * inv;
  const Eigen::VectorXd offset = -(inv * b);

  AdmmResult res;
  AdmmState& st = res.state;
  st.z = project_circles(init.z);
  st.x = init.x.size() == n ? init.x : st.z;
  st.lambda = init.lambda;
  st.penalty = rho;

  if (n <= 8) {
    iterate<8>(step, offset, rho, opts, res);
  } else {
    iterate<Eigen::Dynamic>(step, offset, rho, opts, res);
  }
  res.solution = st.z;
  return res;
}

AdmmResult admm_qcqp(const Subproblem& sub, const AdmmOptions& opts) {
  const Eigen::Index n = sub.H.cols();
  Eigen::VectorXd start = Eigen::VectorXd::Zero(n);
  for (Eigen::Index i = 0; i < n; i += 2) start[i] = 1.0;
  const Eigen::VectorXd free = -sub.normal_matrix().ldlt().solve(sub.normal_rhs());
  if (free.allFinite()) {
    for (Eigen::Index i = 0; i < n; i += 2) {
      if (std::hypot(free[i], free[i + 1]) > 0.0) start.segment<2>(i) = free.segment<2>(i);
    }
  }
  return admm_qcqp(sub, opts, cold_start(start));
}

std::vector<double> angles_from_pairs(const Eigen::VectorXd& x) {
  if (x.size() % 2 != 0) throw ContractViolation("angles_from_pairs: odd-length vector");
  std::vector<double> out;
  out.reserve(static_cast<std::size_t>(x.size() / 2));
  for (Eigen::Index i = 0; i < x.size(); i += 2) {
    if (std::abs(std::hypot(x[i], x[i + 1]) - 1.0) > 1e-6) {
      throw ContractViolation("angles_from_pairs: pair " + std::to_string(i / 2) + " is not on the unit circle");
    }
    out.push_back(std::atan2(x[i + 1], x[i]));
  }
  return out;
}

std::string_view to_string(Termination t) { return t == Termination::Converged ? "converged" : "sweep_limit"; }

SolveReport bcd(const RegistrationProblem& problem, WeightMode mode, const BcdInit& init, const BcdOptions& opts) {
  const std::size_t K = problem.instance_count();
  const std::size_t M = problem.sensor_count();
  if (K < 2) throw ContractViolation("bcd needs at least two instances");

  SolveReport rep;
  rep.biases = init.biases ? *init.biases : BiasSet(M);
  if (rep.biases.sensor_count() != M) throw ContractViolation("initial bias set does not match sensor count");
  rep.weights = build_weights(problem, rep.biases, mode);

  auto ls_solve = [](const Subproblem& sub, int sweep) {
    try {
      return solve_weighted_ls(sub);
    } catch (const RankDeficiencyError& e) {
      throw RankDeficiencyError(e.block(), sweep, "normal matrix is rank deficient");
    }
  };

  std::optional<NormalFactor> vel_factor;
  auto velocity_step = [&](int sweep) {
    const Subproblem sub = assemble_velocity(problem, rep.biases, rep.weights);
    try {
      if (!vel_factor) vel_factor.emplace(sub);
    } catch (const RankDeficiencyError& e) {
      throw RankDeficiencyError(e.block(), sweep, "normal matrix is rank deficient");
    }
    VelocityTrack v(vel_factor->minimizer(sub));
    return std::pair{std::move(v), sub.objective(v.stacked)};
  };

  if (init.velocities) {
    rep.velocities = *init.velocities;
    rep.objective.push_back(objective(problem, rep.biases, rep.velocities, rep.weights));
  } else {
    auto [v, f] = velocity_step(0);
    rep.velocities = std::move(v);
    rep.objective.push_back(f);
  }

  std::vector<std::optional<AdmmState>> warm(std::size(kAngleKinds));

  for (int sweep = 1; sweep <= opts.max_sweeps; ++sweep) {
    const BiasSet before = rep.biases;
    int admm_iters = 0;

    auto [v, fv] = velocity_step(sweep);
    rep.velocities = std::move(v);
    rep.block_objective.push_back(fv);

    const Subproblem range_sub = assemble_range(problem, rep.biases, rep.velocities, rep.weights);
    const Eigen::VectorXd dr = ls_solve(range_sub, sweep);
    for (std::size_t m = 0; m < M; ++m) rep.biases.range[m] = dr[static_cast<Eigen::Index>(m)];
    rep.block_objective.push_back(range_sub.objective(dr));

    for (std::size_t a = 0; a < std::size(kAngleKinds); ++a) {
      const AngleKind kind = kAngleKinds[a];
      const Subproblem sub = assemble_angle(kind, problem, rep.biases, rep.velocities, rep.weights);
      const Eigen::VectorXd current = angle_pairs(rep.biases.of(kind));

      AdmmState start = cold_start(current);
      if (opts.warm_start && warm[a]) {
        start.x = warm[a]->x;
        start.lambda = warm[a]->lambda;
      }
      const AdmmResult res = admm_qcqp(sub, opts.admm, start);
      admm_iters += res.iterations;
      if (!res.converged) {
        throw ConvergenceError(std::string(to_string(kind)), sweep,
                               "ADMM hit " + std::to_string(res.iterations) + " iterations (primal " +
                                   std::to_string(res.primal_residual) + ", dual " +
                                   std::to_string(res.dual_residual) + ")");
      }
      warm[a] = res.state;

      const double f_new = sub.objective(res.solution);
      const double f_old = sub.objective(current);
      if (f_new <= f_old) {
        const auto angles = angles_from_pairs(res.solution);
        auto& target = rep.biases.of(kind);
        for (std::size_t m = 0; m < M; ++m) target[m] = wrap_angle(angles[m]);
        rep.block_objective.push_back(f_new);
      } else {
        ++rep.rejected_angle_updates;
        rep.block_objective.push_back(f_old);
      }
    }

    rep.sweeps = sweep;
    rep.admm_iterations.push_back(admm_iters);
    rep.total_admm_iterations += admm_iters;
    rep.objective.push_back(rep.block_objective.back());
    rep.last_change = rep.biases.max_abs_difference(before);
    if (rep.last_change < opts.tol) {
      rep.termination = Termination::Converged;
      break;
    }
  }
  return rep;
}

}  // namespace senreg
