#include "bubblelab/linearization.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <random>

#include <Eigen/SparseLU>

#include "bubblelab/errors.hpp"
#include "bubblelab/parallel.hpp"

namespace bubblelab {

using std::numbers::pi;

namespace {

using Triplet = Eigen::Triplet<double>;

SparseMatrix local_matrix(const RadialMesh& mesh, double kappa, const Eigen::VectorXd& b) {
  SparseMatrix A = -mesh.stiffness();
  for (int i = 0; i < mesh.size(); ++i)
    A.coeffRef(i, i) += b[i] - kappa * kappa * mesh.inverse_mass()[i];
  A.makeCompressed();
  return A;
}

// Reduced problem on the free nodes: node 0 is eliminated (Schur complement
// of its regularity row for k = 0, Dirichlet for k >= 1), the outer node is
// dropped under a Dirichlet condition.
struct Reduced {
  int first = 1;
  int last = 0;  // inclusive
  bool schur = false;
  double a00 = 0.0;
  Eigen::VectorXd a0;  // A_{0, j} over the full index range
  SparseMatrix A;      // local part on the free nodes
  Eigen::VectorXd b;   // weight on the free nodes
  double coupling = 0.0;
  int size() const { return last - first + 1; }
};

Reduced reduce(const ModeOperator& op) {
  Reduced red;
  const int N = op.size();
  red.last = op.outer == OuterBoundary::dirichlet ? N - 2 : N - 1;
  red.coupling = op.coupling;
  const int n = red.size();
  if (n < 1) throw PreconditionError("mode operator has no free nodes");
  red.a0 = Eigen::VectorXd::Zero(N);
  for (int col = 0; col < op.local.outerSize(); ++col)
    for (SparseMatrix::InnerIterator it(op.local, col); it; ++it)
      if (it.row() == 0) red.a0[col] = it.value();
  red.a00 = red.a0[0];
  red.schur = op.k == 0 && red.a00 != 0.0;

  std::vector<Triplet> trips;
  for (int col = red.first; col <= red.last; ++col)
    for (SparseMatrix::InnerIterator it(op.local, col); it; ++it)
      if (it.row() >= red.first && it.row() <= red.last)
        trips.emplace_back(it.row() - red.first, col - red.first, it.value());
  if (red.schur) {
    for (int i = red.first; i <= red.last; ++i) {
      if (red.a0[i] == 0.0) continue;
      for (int j = red.first; j <= red.last; ++j)
        if (red.a0[j] != 0.0)
          trips.emplace_back(i - red.first, j - red.first, -red.a0[i] * red.a0[j] / red.a00);
    }
  }
  red.A.resize(n, n);
  red.A.setFromTriplets(trips.begin(), trips.end());
  red.b = op.weight.segment(red.first, n);
  for (int i = 0; i < n; ++i)
    if (!(red.b[i] > 0.0)) throw PreconditionError("mode operator weight must be positive");
  return red;
}

Eigen::MatrixXd dense_symmetrized(const Reduced& red) {
  Eigen::MatrixXd A = Eigen::MatrixXd(red.A);
  if (red.coupling != 0.0) A -= red.coupling * red.b * red.b.transpose();
  const Eigen::VectorXd s = red.b.cwiseSqrt().cwiseInverse();
  return s.asDiagonal() * A * s.asDiagonal();
}

// Full nodal vector from the free-node values.
std::vector<double> expand(const Reduced& red, const Eigen::VectorXd& phi_free, int N) {
  std::vector<double> phi(N, 0.0);
  for (int i = 0; i < red.size(); ++i) phi[red.first + i] = phi_free[i];
  if (red.schur) {
    double s = 0.0;
    for (int j = red.first; j <= red.last; ++j) s += red.a0[j] * phi[j];
    phi[0] = -s / red.a00;
  }
  double norm = 0.0;
  int pivot = 0;
  for (int i = 0; i < N; ++i)
    if (std::abs(phi[i]) > norm) norm = std::abs(phi[i]);
  if (norm == 0.0) return phi;
  for (int i = 0; i < N; ++i)
    if (std::abs(phi[i]) > 1e-3 * norm) {
      pivot = i;
      break;
    }
  const double scale = (phi[pivot] < 0.0 ? -1.0 : 1.0) / norm;
  for (auto& v : phi) v *= scale;
  return phi;
}

struct EigenPairs {
  std::vector<double> values;
  std::vector<Eigen::VectorXd> vectors;  // in the symmetrized coordinates
  double residual = 0.0;
};

EigenPairs dense_pairs(const Reduced& red, int count) {
  const Eigen::MatrixXd C = dense_symmetrized(red);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(C);
  if (es.info() != Eigen::Success) throw SolverError("eigensolver: dense decomposition failed");
  std::vector<int> order(C.rows());
  for (int i = 0; i < static_cast<int>(order.size()); ++i) order[i] = i;
  std::stable_sort(order.begin(), order.end(), [&](int x, int y) {
    return std::abs(es.eigenvalues()[x]) < std::abs(es.eigenvalues()[y]);
  });
  EigenPairs out;
  const int keep = std::min<int>(count, static_cast<int>(order.size()));
  for (int i = 0; i < keep; ++i) {
    out.values.push_back(es.eigenvalues()[order[i]]);
    out.vectors.push_back(es.eigenvectors().col(order[i]));
  }
  return out;
}

// Shift-invert Lanczos with full reorthogonalization on C^{-1}, where
// C = B^{-1/2} (A - c b b^T) B^{-1/2}. The rank-one term is carried by a
// bordered sparse factorization.
bool lanczos_pairs(const Reduced& red, int count, std::uint64_t seed, EigenPairs& out) {
  const int n = red.size();
  const bool border = red.coupling != 0.0;
  const int dim = n + (border ? 1 : 0);
  std::vector<Triplet> trips;
  for (int col = 0; col < red.A.outerSize(); ++col)
    for (SparseMatrix::InnerIterator it(red.A, col); it; ++it)
      trips.emplace_back(it.row(), col, it.value());
  if (border) {
    for (int i = 0; i < n; ++i) {
      trips.emplace_back(i, n, red.b[i]);
      trips.emplace_back(n, i, red.b[i]);
    }
    trips.emplace_back(n, n, 1.0 / red.coupling);
  }
  SparseMatrix M(dim, dim);
  M.setFromTriplets(trips.begin(), trips.end());
  // SparseLU does not terminate on a structurally empty column.
  for (int col = 0; col < dim; ++col)
    if (M.outerIndexPtr()[col + 1] == M.outerIndexPtr()[col]) return false;
  Eigen::SparseLU<SparseMatrix, Eigen::COLAMDOrdering<int>> lu;
  lu.compute(M);
  if (lu.info() != Eigen::Success) return false;
  const Eigen::VectorXd sqrt_b = red.b.cwiseSqrt();

  auto apply_inverse = [&](const Eigen::VectorXd& x) {
    Eigen::VectorXd rhs = Eigen::VectorXd::Zero(dim);
    rhs.head(n) = sqrt_b.cwiseProduct(x);
    const Eigen::VectorXd sol = lu.solve(rhs);
    return Eigen::VectorXd(sqrt_b.cwiseProduct(sol.head(n)));
  };

  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  Eigen::VectorXd start(n);
  for (int i = 0; i < n; ++i) start[i] = normal(rng);

  int steps = std::min(n, std::max(4 * count, 48));
  while (true) {
    Eigen::MatrixXd V(n, steps + 1);
    std::vector<double> alpha(steps), beta(steps + 1, 0.0);
    V.col(0) = start.normalized();
    int m = steps;
    for (int j = 0; j < steps; ++j) {
      Eigen::VectorXd w = apply_inverse(V.col(j));
      if (!w.allFinite()) return false;
      alpha[j] = V.col(j).dot(w);
      for (int pass = 0; pass < 2; ++pass)
        w -= V.leftCols(j + 1) * (V.leftCols(j + 1).transpose() * w);
      beta[j + 1] = w.norm();
      if (beta[j + 1] <= 1e-14 * std::abs(alpha[j]) || j + 1 == n) {
        m = j + 1;
        break;
      }
      V.col(j + 1) = w / beta[j + 1];
    }
    Eigen::MatrixXd T = Eigen::MatrixXd::Zero(m, m);
    for (int j = 0; j < m; ++j) {
      T(j, j) = alpha[j];
      if (j + 1 < m) T(j, j + 1) = T(j + 1, j) = beta[j + 1];
    }
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(T);
    std::vector<int> order(m);
    for (int i = 0; i < m; ++i) order[i] = i;
    std::stable_sort(order.begin(), order.end(), [&](int x, int y) {
      return std::abs(es.eigenvalues()[x]) > std::abs(es.eigenvalues()[y]);
    });
    const int keep = std::min(count, m);
    bool converged = true;
    double worst = 0.0;
    for (int i = 0; i < keep; ++i) {
      const double theta = es.eigenvalues()[order[i]];
      const double res = std::abs(beta[m] * es.eigenvectors()(m - 1, order[i]));
      const double rel = theta != 0.0 ? res / std::abs(theta) : res;
      worst = std::max(worst, rel);
      if (rel > 1e-10) converged = false;
    }
    if (converged || m < steps || steps == n) {
      if (!converged && worst > 1e-6)
        throw SolverError("eigensolver: Lanczos did not converge (relative residual " +
                          std::to_string(worst) + ")");
      out.values.clear();
      out.vectors.clear();
      for (int i = 0; i < keep; ++i) {
        const double theta = es.eigenvalues()[order[i]];
        if (theta == 0.0) return false;
        out.values.push_back(1.0 / theta);
        out.vectors.push_back(V.leftCols(m) * es.eigenvectors().col(order[i]));
      }
      out.residual = worst;
      return true;
    }
    steps = std::min(n, 2 * steps);
  }
}

}  // namespace

Eigen::VectorXd ModeOperator::apply(const Eigen::VectorXd& phi) const {
  Eigen::VectorXd out = local * phi;
  if (coupling != 0.0) out -= coupling * weight * weight.dot(phi);
  return out;
}

Eigen::VectorXd ModeOperator::apply_strong(const Eigen::VectorXd& phi) const {
  const Eigen::VectorXd weak = apply(phi);
  Eigen::VectorXd out = Eigen::VectorXd::Zero(size());
  const double a1 = 1.0 + mesh->alpha();
  for (int i = 1; i + 1 < size(); ++i)
    out[i] = a1 * a1 * std::pow(mesh->r()[i], 2.0 * mesh->alpha()) * weak[i] / mesh->mass()[i];
  return out;
}

ModeOperator build_mode_operator(const SolutionPoint& point, int k) {
  if (k < 0) throw PreconditionError("mode index must be >= 0");
  if (!(point.rho > 0.0)) throw PreconditionError("mode operator needs rho > 0");
  const RadialMesh& mesh = *point.mesh;
  const double a1 = 1.0 + mesh.alpha();
  ModeOperator op;
  op.k = k;
  op.kappa = k / a1;
  op.mesh = point.mesh;
  op.weight.resize(mesh.size());
  for (int i = 0; i < mesh.size(); ++i) {
    const double w_hat = point.rho * point.spec.hstar(mesh.r()[i]) *
                         std::exp(point.u[i] - point.log_mass) / (a1 * a1);
    op.weight[i] = mesh.mass()[i] * w_hat;
  }
  op.local = local_matrix(mesh, op.kappa, op.weight);
  op.coupling = k == 0 ? 2.0 * pi * a1 / point.rho : 0.0;
  op.outer = OuterBoundary::dirichlet;
  return op;
}

ModeOperator build_entire_mode_operator(double alpha, int k, double radius,
                                        const MeshPolicy& policy) {
  if (k < 0) throw PreconditionError("mode index must be >= 0");
  auto mesh = std::make_shared<const RadialMesh>(RadialMesh::graded(alpha, policy, 1.0, radius));
  ModeOperator op;
  op.k = k;
  op.kappa = k / (1.0 + alpha);
  op.mesh = mesh;
  op.weight.resize(mesh->size());
  for (int i = 0; i < mesh->size(); ++i) {
    const double t = mesh->t()[i];
    op.weight[i] = mesh->mass()[i] * 8.0 / ((1.0 + t * t) * (1.0 + t * t));
  }
  op.local = local_matrix(*mesh, op.kappa, op.weight);
  op.outer = OuterBoundary::neumann;
  return op;
}

Eigen::MatrixXd symmetrized_matrix(const ModeOperator& op) { return dense_symmetrized(reduce(op)); }

ModeSpectrum mode_spectrum(const ModeOperator& op, int count, std::uint64_t seed) {
  if (count < 1) throw PreconditionError("eigenvalue count must be >= 1");
  const Reduced red = reduce(op);
  EigenPairs pairs;
  const bool small = red.size() <= 64;
  if (small || !lanczos_pairs(red, count, seed ^ (0x9e3779b97f4a7c15ULL * (op.k + 1)), pairs))
    pairs = dense_pairs(red, count);

  ModeSpectrum spec;
  spec.k = op.k;
  std::vector<int> order(pairs.values.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = static_cast<int>(i);
  std::stable_sort(order.begin(), order.end(), [&](int x, int y) {
    return std::abs(pairs.values[x]) < std::abs(pairs.values[y]);
  });
  for (int i : order) spec.eigenvalues.push_back(pairs.values[i]);
  spec.smallest_magnitude = spec.eigenvalues.empty() ? 0.0 : std::abs(spec.eigenvalues.front());
  spec.residual = pairs.residual;
  if (!order.empty()) {
    const Eigen::VectorXd phi_free =
        pairs.vectors[order.front()].cwiseQuotient(red.b.cwiseSqrt());
    spec.eigenvector_0 = expand(red, phi_free, op.size());
  }
  return spec;
}

std::vector<ScanRow> nondegeneracy_scan(const Branch& branch, int k_max,
                                        const ScanOptions& options) {
  if (k_max < 0) throw PreconditionError("k_max must be >= 0");
  std::vector<ScanRow> rows(branch.points.size());
  const int modes = k_max + 1;
  const int tasks = static_cast<int>(branch.points.size()) * modes;
  std::vector<ModeSpectrum> spectra(tasks);
  parallel_for(tasks, options.threads, [&](int task) {
    const auto& point = branch.points[task / modes];
    const int k = task % modes;
    spectra[task] = mode_spectrum(build_mode_operator(point, k), options.count,
                                  options.seed + static_cast<std::uint64_t>(task / modes));
  });
  for (std::size_t p = 0; p < rows.size(); ++p) {
    auto& row = rows[p];
    row.lambda = branch.points[p].lambda;
    row.min_magnitude = std::numeric_limits<double>::infinity();
    for (int k = 0; k < modes; ++k) {
      const auto& s = spectra[p * modes + k];
      row.eig_min.push_back(s.eigenvalues.at(0));
      row.eig_min_next.push_back(s.eigenvalues.size() > 1 ? s.eigenvalues[1] : s.eigenvalues[0]);
      row.min_magnitude = std::min(row.min_magnitude, s.smallest_magnitude);
    }
    row.kernel_flag = row.min_magnitude < options.kernel_threshold;
  }
  return rows;
}

std::vector<double> local_kernel_field(const SolutionPoint& point) {
  const ModeOperator op = build_mode_operator(point, 0);
  const int N = op.size();
  // Xi_0 = 1; unknowns Xi_1..Xi_{N-1}; equations are the weak rows 0..N-2.
  std::vector<Triplet> trips;
  Eigen::VectorXd rhs = Eigen::VectorXd::Zero(N - 1);
  for (int col = 0; col < N; ++col)
    for (SparseMatrix::InnerIterator it(op.local, col); it; ++it) {
      if (it.row() > N - 2) continue;
      if (col == 0)
        rhs[it.row()] -= it.value();
      else
        trips.emplace_back(it.row(), col - 1, it.value());
    }
  SparseMatrix A(N - 1, N - 1);
  A.setFromTriplets(trips.begin(), trips.end());
  Eigen::SparseLU<SparseMatrix, Eigen::COLAMDOrdering<int>> lu;
  lu.compute(A);
  if (lu.info() != Eigen::Success) throw SolverError("local kernel field: singular system");
  const Eigen::VectorXd sol = lu.solve(rhs);
  std::vector<double> xi(N);
  xi[0] = 1.0;
  for (int i = 1; i < N; ++i) xi[i] = sol[i - 1];
  double norm = 0.0;
  for (double v : xi) norm = std::max(norm, std::abs(v));
  for (auto& v : xi) v /= norm;
  return xi;
}

namespace {

B0Result project_radial(const std::function<double(double)>& xi_of_r, const SolutionPoint& point,
                        double r0) {
  if (!(r0 > 0.0)) throw PreconditionError("b0: r0 must be positive");
  const double a1 = 1.0 + point.spec.alpha;
  const double gbar = pi * point.spec.hstar(0.0) / a1;
  // gbar z^{2+2a} = gbar e^lambda t^2 with z = r / sigma.
  const double scale = gbar * std::exp(point.lambda);
  const auto& mesh = *point.mesh;
  auto q_of = [&](double r) {
    const double t = mesh.t_of_r(r);
    return scale * t * t;
  };
  const double R = std::min(r0, mesh.radius());
  const double num = mesh.integrate_density(
      [&](double r) {
        const double q = q_of(r);
        return xi_of_r(r) * (1.0 - q) / ((1.0 + q) * (1.0 + q) * (1.0 + q));
      },
      R);
  const double den = mesh.integrate_density(
      [&](double r) {
        const double q = q_of(r);
        const double x0 = (1.0 - q) / (1.0 + q);
        return x0 * x0 / ((1.0 + q) * (1.0 + q));
      },
      R);
  return {num / den, point.lambda < 2.0};
}

}  // namespace

B0Result b0_projection(std::span<const double> xi, const SolutionPoint& point, double r0) {
  if (static_cast<int>(xi.size()) != point.mesh->size())
    throw PreconditionError("b0: field size does not match the mesh");
  const auto* mesh = point.mesh.get();
  return project_radial([&](double r) { return mesh->evaluate(xi, r).value; }, point, r0);
}

B0Result b0_projection(const std::function<double(double, double)>& xi,
                       const SolutionPoint& point, double r0, int n_theta) {
  if (n_theta < 1) throw PreconditionError("b0: n_theta must be >= 1");
  auto average = [&](double r) {
    double s = 0.0;
    for (int j = 0; j < n_theta; ++j) {
      const double th = 2.0 * pi * j / n_theta;
      s += xi(r * std::cos(th), r * std::sin(th));
    }
    return s / n_theta;
  };
  return project_radial(average, point, r0);
}

std::vector<double> normalized_difference(const SolutionPoint& a, const SolutionPoint& b) {
  const auto& ma = *a.mesh;
  std::vector<double> d(ma.size());
  double norm = 0.0;
  for (int i = 0; i < ma.size(); ++i) {
    d[i] = (a.u[i] - a.log_mass) - (b.u_at(ma.r()[i]).value - b.log_mass);
    norm = std::max(norm, std::abs(d[i]));
  }
  const auto& mb = *b.mesh;
  for (int i = 0; i < mb.size(); ++i)
    norm = std::max(norm, std::abs((a.u_at(mb.r()[i]).value - a.log_mass) -
                                   (b.u[i] - b.log_mass)));
  if (norm == 0.0) throw PreconditionError("normalized difference of identical solutions");
  for (auto& v : d) v /= norm;
  return d;
}

std::vector<FoldPair> find_fold_pairs(const Branch& branch, const MeshPolicy& policy,
                                      const ContinuationOptions& options) {
  std::vector<FoldPair> pairs;
  const auto& pts = branch.points;
  for (int k : branch.fold_flags) {
    if (k < 1 || k + 1 >= static_cast<int>(pts.size())) continue;
    const SolutionPoint& left = pts[k - 1];
    const double target = left.rho;
    const double side = pts[k].rho - target;
    int j = k + 1;
    while (j < static_cast<int>(pts.size()) && (pts[j].rho - target) * side > 0.0) ++j;
    if (j >= static_cast<int>(pts.size())) continue;
    // Bracket [pts[j-1], pts[j]] in lambda; regula falsi on lambda solves.
    SolutionPoint lo = pts[j - 1], hi = pts[j];
    double f_lo = lo.rho - target, f_hi = hi.rho - target;
    SolutionPoint best = std::abs(f_lo) < std::abs(f_hi) ? lo : hi;
    int side_kept = 0;
    for (int it = 0; it < 80 && std::abs(best.rho - target) > 1e-10; ++it) {
      double lam = (lo.lambda * f_hi - hi.lambda * f_lo) / (f_hi - f_lo);
      if (!(lam > lo.lambda && lam < hi.lambda)) lam = 0.5 * (lo.lambda + hi.lambda);
      SolutionPoint mid = continue_to(lo, nullptr, lam, policy, options);
      const double f_mid = mid.rho - target;
      if (f_mid * f_lo > 0.0) {
        lo = mid;
        f_lo = f_mid;
        if (side_kept == -1) f_hi *= 0.5;
        side_kept = -1;
      } else {
        hi = mid;
        f_hi = f_mid;
        if (side_kept == 1) f_lo *= 0.5;
        side_kept = 1;
      }
      if (std::abs(f_mid) < std::abs(best.rho - target)) best = mid;
    }
    if (std::abs(best.rho - target) > 1e-10) continue;
    pairs.push_back({left, best, k});
  }
  return pairs;
}

}  // namespace bubblelab
