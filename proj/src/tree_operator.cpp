#include "spock/tree_operator.hpp"

#include <cmath>
#include <stdexcept>

#include "spock/parallel.hpp"
#include "spock/rng.hpp"

namespace spock {

TreeOperator::TreeOperator(const Raocp& p, const SocEpigraphData& soc)
    : p_(&p), soc_(&soc), zl_(make_primal_layout(p)), el_(make_dual_layout(p, soc)) {
  const int nnl = p.tree->num_nonleaf();
  dual_cones_.reserve(nnl);
  for (int i = 0; i < nnl; ++i) dual_cones_.push_back(dual_cone(p.risk[i].cone));
  adj_xu_.assign(p.tree->num_nodes() - 1, Eigen::VectorXd::Zero(p.nx + p.nu));
  mnorm_scratch_.resize(el_.n);
}

void TreeOperator::apply(const Eigen::VectorXd& z, Eigen::VectorXd& eta) const {
  const auto& p = *p_;
  const auto& tr = *p.tree;
  const int nn = tr.num_nodes();
  const int nnl = tr.num_nonleaf();
  const int nx = p.nx, nu = p.nu;
  eta.resize(el_.n);
  const uint64_t flops = 4ull * (nx + nu) * (nx + nu);

  global_pool().parallel_for(0, nn, [&](int i) {
    if (i < nnl) {
      const int ny = el_.seg1_ydim[i];
      eta.segment(el_.y_copy(i), ny) = z.segment(zl_.y(i), ny);
      eta[el_.risk_scalar(i)] = z[zl_.s(i)] - p.risk[i].b.dot(z.segment(zl_.y(i), ny));
      eta.segment(el_.cstr(i), el_.seg1_nc[i]).noalias() =
          p.Gx[i] * z.segment(zl_.x(i), nx) + p.Gu[i] * z.segment(zl_.u(i), nu);
    }
    if (i > 0) {
      const auto& d = soc_->stage[i - 1];
      const int anc = tr.ancestor_of(i);
      const auto x = z.segment(zl_.x(anc), nx);
      const auto u = z.segment(zl_.u(anc), nu);
      auto seg = eta.segment(el_.stage_soc(i), d.p + 2);
      if (d.p > 0)
        seg.head(d.p).noalias() =
            d.head_map.leftCols(nx) * x + d.head_map.rightCols(nu) * u;
      const double row = 0.5 * z[zl_.tau(i)] -
                         0.5 * (d.q_kernel.head(nx).dot(x) + d.q_kernel.tail(nu).dot(u));
      seg[d.p] = row;
      seg[d.p + 1] = row;
    }
    if (i >= nnl) {
      const int j = i - nnl;
      const auto x = z.segment(zl_.x(i), nx);
      eta.segment(el_.leaf_cstr(j), el_.seg3_nc[j]).noalias() = p.GN[j] * x;
      const auto& d = soc_->leaf[j];
      auto seg = eta.segment(el_.leaf_soc(j), d.p + 2);
      if (d.p > 0) seg.head(d.p).noalias() = d.head_map * x;
      const double row = 0.5 * z[zl_.s(i)] - 0.5 * d.q_kernel.dot(x);
      seg[d.p] = row;
      seg[d.p + 1] = row;
    }
  }, flops);
}

void TreeOperator::apply_adjoint(const Eigen::VectorXd& eta, Eigen::VectorXd& z) const {
  const auto& p = *p_;
  const auto& tr = *p.tree;
  const int nn = tr.num_nodes();
  const int nnl = tr.num_nonleaf();
  const int nx = p.nx, nu = p.nu;
  z.setZero(zl_.n);
  const uint64_t flops = 4ull * (nx + nu) * (nx + nu);

  global_pool().parallel_for(0, nn, [&](int i) {
    if (i < nnl) {
      const int ny = el_.seg1_ydim[i];
      const double sc = eta[el_.risk_scalar(i)];
      z.segment(zl_.y(i), ny) = eta.segment(el_.y_copy(i), ny) - sc * p.risk[i].b;
      z[zl_.s(i)] += sc;
      const auto ec = eta.segment(el_.cstr(i), el_.seg1_nc[i]);
      z.segment(zl_.x(i), nx).noalias() += p.Gx[i].transpose() * ec;
      z.segment(zl_.u(i), nu).noalias() += p.Gu[i].transpose() * ec;
    }
    if (i > 0) {
      const auto& d = soc_->stage[i - 1];
      const auto seg = eta.segment(el_.stage_soc(i), d.p + 2);
      const double rsum = seg[d.p] + seg[d.p + 1];
      auto& t = adj_xu_[i - 1];
      t = -0.5 * rsum * d.q_kernel;
      if (d.p > 0) t.noalias() += d.head_map.transpose() * seg.head(d.p);
      z[zl_.tau(i)] = 0.5 * rsum;
    }
    if (i >= nnl) {
      const int j = i - nnl;
      const auto& d = soc_->leaf[j];
      const auto seg = eta.segment(el_.leaf_soc(j), d.p + 2);
      const double rsum = seg[d.p] + seg[d.p + 1];
      z.segment(zl_.x(i), nx).noalias() +=
          p.GN[j].transpose() * eta.segment(el_.leaf_cstr(j), el_.seg3_nc[j]);
      if (d.p > 0) z.segment(zl_.x(i), nx).noalias() += d.head_map.transpose() * seg.head(d.p);
      z.segment(zl_.x(i), nx) -= 0.5 * rsum * d.q_kernel;
      z[zl_.s(i)] += 0.5 * rsum;
    }
  }, flops);

  // gather the children's stage-cost terms into each ancestor, ascending
  global_pool().parallel_for(0, nnl, [&](int i) {
    for (int k = 0; k < tr.num_children(i); ++k) {
      const auto& t = adj_xu_[tr.child_first(i) + k - 1];
      z.segment(zl_.x(i), nx) += t.head(nx);
      z.segment(zl_.u(i), nu) += t.tail(nu);
    }
  }, static_cast<uint64_t>(nx + nu));
}

namespace {
// Valid spectral-norm upper bound, sqrt(||A||_1 ||A||_inf).
double holder_bound(const Eigen::MatrixXd& A) {
  if (A.size() == 0) return 0.0;
  const double n1 = A.cwiseAbs().colwise().sum().maxCoeff();
  const double ninf = A.cwiseAbs().rowwise().sum().maxCoeff();
  return std::sqrt(n1 * ninf);
}
}  // namespace

double TreeOperator::analytic_norm_bound() const {
  const auto& p = *p_;
  const auto& tr = *p.tree;
  const int nn = tr.num_nodes();
  const int nnl = tr.num_nonleaf();

  int max_ch = 1;
  for (int i = 0; i < nnl; ++i) max_ch = std::max(max_ch, tr.num_children(i));

  double mx = 0.0;
  for (int i = 0; i < nn; ++i) {
    if (i < nnl) {
      mx = std::max(mx, 1.0);  // y-copy rows
      mx = std::max(mx, std::sqrt(1.0 + p.risk[i].b.squaredNorm()));
      Eigen::MatrixXd g(p.Gx[i].rows(), p.nx + p.nu);
      g << p.Gx[i], p.Gu[i];
      mx = std::max(mx, holder_bound(g));
    }
    if (i > 0) {
      const auto& d = soc_->stage[i - 1];
      mx = std::max(mx, std::sqrt(d.lambda_max + 0.5 * (1.0 + d.q_kernel.squaredNorm())));
    }
    if (i >= nnl) {
      const auto& d = soc_->leaf[i - nnl];
      mx = std::max(mx, holder_bound(p.GN[i - nnl]));
      mx = std::max(mx, std::sqrt(d.lambda_max + 0.5 * (1.0 + d.q_kernel.squaredNorm())));
    }
  }
  return std::sqrt(1.0 + static_cast<double>(max_ch)) * mx;
}

OpNormEstimate estimate_norm(
    int nz, int neta,
    const std::function<void(const Eigen::VectorXd&, Eigen::VectorXd&)>& apply,
    const std::function<void(const Eigen::VectorXd&, Eigen::VectorXd&)>& apply_adjoint,
    double analytic_bound, double tol, int max_iters) {
  Philox rng(0x9E3779B97F4A7C15ull);
  Eigen::VectorXd v(nz);
  for (int k = 0; k < nz; ++k) v[k] = rng.normal();
  v.normalize();

  Eigen::VectorXd u(neta), w(nz);
  OpNormEstimate out;
  out.analytic_bound = analytic_bound;
  double prev = 0.0, prev_change = 0.0;
  for (int it = 1; it <= max_iters; ++it) {
    apply(v, u);
    const double est = u.norm();  // ||L v||, ||v|| = 1, never above the true norm
    out.estimate = est;
    out.iterations = it;
    if (est == 0.0) {
      out.converged = true;
      break;
    }
    if (it > 2) {
      // linear convergence: extrapolate the remaining error from the
      // contraction ratio of successive Rayleigh increments
      const double change = std::fabs(est - prev);
      double ratio = prev_change > 0.0 ? change / prev_change : 0.0;
      ratio = std::min(ratio, 0.999);
      const double remaining = change * ratio / (1.0 - ratio);
      if (change + remaining <= tol * est) {
        out.converged = true;
        break;
      }
      prev_change = change;
    } else if (it == 2) {
      prev_change = std::fabs(est - prev);
    }
    prev = est;
    apply_adjoint(u, w);
    const double wn = w.norm();
    if (wn == 0.0) {
      out.converged = true;
      break;
    }
    v = w / wn;
  }
  return out;
}

OpNormEstimate TreeOperator::estimate_norm(double tol, int max_iters) const {
  return spock::estimate_norm(
      zl_.n, el_.n, [this](const Eigen::VectorXd& z, Eigen::VectorXd& e) { apply(z, e); },
      [this](const Eigen::VectorXd& e, Eigen::VectorXd& z) { apply_adjoint(e, z); },
      analytic_norm_bound(), tol, max_iters);
}

double TreeOperator::m_norm(const Eigen::VectorXd& z, const Eigen::VectorXd& eta,
                            double alpha) const {
  apply(z, mnorm_scratch_);
  const double rad = z.squaredNorm() - 2.0 * alpha * eta.dot(mnorm_scratch_) + eta.squaredNorm();
  const double scale = z.squaredNorm() + eta.squaredNorm();
  if (rad < -1e-12 * std::max(1.0, scale))
    throw std::runtime_error("m_norm: negative radicand (alpha violates alpha*||L|| < 1)");
  return std::sqrt(std::max(0.0, rad));
}

}  // namespace spock
