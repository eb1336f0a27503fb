#pragma once

#include <Eigen/Core>
#include <Eigen/SparseCholesky>
#include <optional>
#include <string>
#include <vector>

#include "senreg/assembly.hpp"

namespace senreg {

/// Unique minimizer of ||H x + c||_Q^2 via Cholesky of H^T Q H.
/// Throws RankDeficiencyError (tagged with sub.block) when the normal matrix is singular.
Eigen::VectorXd solve_weighted_ls(const Subproblem& sub);

/// Sparse factorization of H^T Q H, reused for any c with the same H and Q.
class NormalFactor {
 public:
  /// Throws RankDeficiencyError (tagged with sub.block) when the normal matrix is singular.
  explicit NormalFactor(const Subproblem& sub);
  /// Minimizer of ||H x + c||_Q^2 for sub.c; sub.H and sub.weights must match the factored ones.
  Eigen::VectorXd minimizer(const Subproblem& sub) const;

 private:
  Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> ldlt_;
  Eigen::Index cols_ = 0;
};

/// Iterates of the split problem  min ||Hx + c||_Q^2 + indicator_C(z)  s.t.  x = z.
struct AdmmState {
  Eigen::VectorXd x;
  Eigen::VectorXd z;       ///< always on the product of circles
  Eigen::VectorXd lambda;  ///< multiplier of x = z
  double penalty = 0.0;
};

struct AdmmOptions {
  std::optional<double> penalty;  ///< unset: mean diagonal of H^T Q H
  double tol = 1e-9;
  int max_iter = 50000;
};

struct AdmmResult {
  Eigen::VectorXd solution;  ///< final z, feasible by construction
  AdmmState state;
  int iterations = 0;
  double primal_residual = 0.0;  ///< ||x - z||
  double dual_residual = 0.0;    ///< ||z_new - z_old||
  bool converged = false;
};

/// Mean of the diagonal of `normal`.
double auto_penalty(const Eigen::MatrixXd& normal);

/// Starts ADMM at x = z = start (projected), lambda = 0.
AdmmState cold_start(const Eigen::VectorXd& start);

/// Solves  min ||H x + c||_Q^2  s.t. every pair of x has unit norm.  Stops when both the primal
/// residual ||x - z|| and the dual residual ||z_new - z_old|| drop to `tol`; hitting max_iter
/// returns converged = false with the last residuals.
AdmmResult admm_qcqp(const Subproblem& sub, const AdmmOptions& opts, const AdmmState& init);
/// Cold start from the projection of the unconstrained least-squares point.
AdmmResult admm_qcqp(const Subproblem& sub, const AdmmOptions& opts);

/// atan2(x_{2m+1}, x_{2m}) per pair. Throws ContractViolation when a pair is off the unit
/// circle by more than 1e-6.
std::vector<double> angles_from_pairs(const Eigen::VectorXd& x);

struct BcdOptions {
  double tol = 1e-5;  ///< max |change| over all biases between sweeps (m / rad)
  int max_sweeps = 1000;
  AdmmOptions admm;
  bool warm_start = true;
};

enum class Termination { Converged, SweepLimit };
std::string_view to_string(Termination t);

struct SolveReport {
  BiasSet biases;
  VelocityTrack velocities;
  WeightSpec weights;
  std::vector<double> objective;        ///< [0] at the initial point, then one value per sweep
  std::vector<double> block_objective;  ///< after every block update, 6 per sweep
  int sweeps = 0;
  std::vector<int> admm_iterations;     ///< total ADMM iterations per sweep
  long total_admm_iterations = 0;
  int rejected_angle_updates = 0;       ///< ADMM points that would have raised the objective
  double last_change = 0.0;
  Termination termination = Termination::SweepLimit;
};

struct BcdInit {
  std::optional<BiasSet> biases;          ///< default: all zero
  std::optional<VelocityTrack> velocities;  ///< default: velocity LS at the initial biases
};

/// Block coordinate descent over (velocities, range, elevation, roll, pitch, yaw).
/// Weights are built once at the initial biases. Throws SolverError subclasses tagged with the
/// failing block and sweep.
SolveReport bcd(const RegistrationProblem& problem, WeightMode mode, const BcdInit& init = {},
                const BcdOptions& opts = {});

}  // namespace senreg
