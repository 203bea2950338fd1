#include "spock/solver.hpp"

#include <Eigen/Dense>
#include <cmath>
#include <stdexcept>

namespace spock {

void SpockParams::validate() const {
  if (eps_abs <= 0.0 || eps_rel < 0.0) throw std::invalid_argument("SpockParams: bad tolerances");
  if (alpha < 0.0) throw std::invalid_argument("SpockParams: alpha must be >= 0");
  if (aa_memory < 1) throw std::invalid_argument("SpockParams: aa_memory must be >= 1");
  if (c0 < 0.0 || c0 >= 1.0 || c1 < 0.0 || c1 >= 1.0 || c2 < 0.0 || c2 >= 1.0)
    throw std::invalid_argument("SpockParams: c0, c1, c2 must be in [0, 1)");
  if (beta <= 0.0 || beta >= 1.0 || sigma <= 0.0 || sigma >= 1.0)
    throw std::invalid_argument("SpockParams: beta, sigma must be in (0, 1)");
  if (lambda <= 0.0 || lambda >= 2.0) throw std::invalid_argument("SpockParams: lambda must be in (0, 2)");
  if (max_iters < 1 || max_backtracks < 1) throw std::invalid_argument("SpockParams: bad iteration caps");
}

const char* to_string(SpockTermination t) {
  switch (t) {
    case SpockTermination::Converged: return "converged";
    case SpockTermination::MaxIters: return "max_iters";
    case SpockTermination::Stalled: return "stalled";
    case SpockTermination::Cancelled: return "cancelled";
  }
  return "unknown";
}

std::pair<Eigen::VectorXd, Eigen::VectorXd> residuals_xi(const TreeOperator& op,
                                                         const Eigen::VectorXd& z,
                                                         const Eigen::VectorXd& eta,
                                                         const Eigen::VectorXd& z_next,
                                                         const Eigen::VectorXd& eta_next,
                                                         double alpha) {
  const Eigen::VectorXd dz = z - z_next;
  const Eigen::VectorXd de = eta - eta_next;
  Eigen::VectorXd Lsde(z.size()), Ldz(eta.size());
  op.apply_adjoint(de, Lsde);
  op.apply(dz, Ldz);
  return {dz / alpha - Lsde, de / alpha - Ldz};
}

AndersonAccelerator::AndersonAccelerator(int memory) : m_(memory) {
  if (memory < 1) throw std::invalid_argument("AndersonAccelerator: memory must be >= 1");
}

void AndersonAccelerator::reset() {
  k_ = 0;
  res_.clear();
  diff_.clear();
}

Eigen::VectorXd AndersonAccelerator::direction(const Eigen::VectorXd& r) {
  // push newest residual and difference, truncate to m columns
  Eigen::VectorXd d = res_.empty() ? r : Eigen::VectorXd(r - res_.front());
  res_.insert(res_.begin(), r);
  diff_.insert(diff_.begin(), std::move(d));
  if (static_cast<int>(res_.size()) > m_) {
    res_.pop_back();
    diff_.pop_back();
  }
  const int k = k_++;
  if (k <= m_) return -r;

  const int cols = static_cast<int>(diff_.size());
  Eigen::MatrixXd Md(r.size(), cols), Mr(r.size(), cols);
  for (int c = 0; c < cols; ++c) {
    Md.col(c) = diff_[c];
    Mr.col(c) = res_[c];
  }
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(Md);
  qr.setThreshold(1e-12);
  const Eigen::VectorXd kappa = qr.solve(r);
  return -r - (Mr - Md) * kappa;
}

SpockSolver::SpockSolver(const Raocp& problem, SpockParams params) : params_(std::move(params)) {
  params_.validate();
  problem.validate();
  if (params_.use_preconditioner) {
    auto pr = precondition(problem);
    scaled_ = std::move(pr.first);
    pc_ = std::move(pr.second);
  } else {
    scaled_ = problem;
    pc_ = identity_precond(problem);
  }
  x_init_orig_ = problem.x_init;
  soc_ = soc_epigraph_data(scaled_);
  op_ = std::make_unique<TreeOperator>(scaled_, soc_);
  cache_ = make_solver_cache(scaled_);
  norm_ = op_->estimate_norm();
  alpha_ = params_.alpha > 0.0 ? params_.alpha : 0.99 / std::max(norm_.estimate, 1e-300);

  const auto& zl = op_->zlay();
  const auto& el = op_->elay();
  const auto& tr = *scaled_.tree;
  d1_ = Eigen::VectorXd::Ones(zl.n);
  d2_ = Eigen::VectorXd::Ones(el.n);
  if (!pc_.is_identity) {
    for (int i = 0; i < tr.num_nodes(); ++i) {
      d1_.segment(zl.x(i), zl.nx) = tr.is_leaf(i) ? pc_.sxN : pc_.sx;
      if (i < tr.num_nonleaf()) d1_.segment(zl.u(i), zl.nu) = pc_.su;
    }
    for (int i = 0; i < tr.num_nonleaf(); ++i)
      d2_.segment(el.cstr(i), el.seg1_nc[i]).setConstant(pc_.cstr_scale[i]);
  }
  tz_.resize(zl.n);
  te_.resize(el.n);
  tz2_.resize(zl.n);
  te2_.resize(el.n);
}

Eigen::VectorXd SpockSolver::unscale_primal(const Eigen::VectorXd& zs) const {
  if (pc_.is_identity) return zs;
  const auto& zl = op_->zlay();
  const auto& tr = *scaled_.tree;
  Eigen::VectorXd z = zs;
  for (int i = 0; i < tr.num_nodes(); ++i) {
    auto x = z.segment(zl.x(i), zl.nx);
    x = tr.is_leaf(i) ? pc_.unscale_xN(x) : pc_.unscale_x(x);
    if (i < tr.num_nonleaf()) {
      auto u = z.segment(zl.u(i), zl.nu);
      u = pc_.unscale_u(u);
    }
  }
  return z;
}

Eigen::VectorXd SpockSolver::scale_primal(const Eigen::VectorXd& zo) const {
  if (pc_.is_identity) return zo;
  const auto& zl = op_->zlay();
  const auto& tr = *scaled_.tree;
  Eigen::VectorXd z = zo;
  for (int i = 0; i < tr.num_nodes(); ++i) {
    auto x = z.segment(zl.x(i), zl.nx);
    x = (tr.is_leaf(i) ? pc_.sxN : pc_.sx).cwiseProduct(Eigen::VectorXd(x));
    if (i < tr.num_nonleaf()) {
      auto u = z.segment(zl.u(i), zl.nu);
      u = pc_.su.cwiseProduct(Eigen::VectorXd(u));
    }
  }
  return z;
}

void SpockSolver::apply_T(const Eigen::VectorXd& z, const Eigen::VectorXd& eta,
                          Eigen::VectorXd& z_out, Eigen::VectorXd& eta_out) {
  const auto& zl = op_->zlay();
  // primal half: prox of f = s0 + indicator(S1) + indicator(S2)
  op_->apply_adjoint(eta, tz_);
  z_out = z - alpha_ * tz_;
  z_out[0] -= alpha_;
  proj_s1(scaled_, cache_, zl, scaled_.x_init, z_out);
  proj_s2(scaled_, cache_, zl, z_out);
  // dual half via the Moreau identity
  tz_ = 2.0 * z_out - z;
  op_->apply(tz_, te_);
  eta_out = eta + alpha_ * te_;
  te_ = eta_out / alpha_;
  proj_s3(scaled_, soc_, op_->elay(), op_->dual_cones(), te_);
  eta_out.noalias() -= alpha_ * te_;
}

double SpockSolver::m_norm_cached_Lrz(const Eigen::VectorXd& rz, const Eigen::VectorXd& reta,
                                      Eigen::VectorXd& Lrz) const {
  op_->apply(rz, Lrz);
  const double rad = rz.squaredNorm() - 2.0 * alpha_ * reta.dot(Lrz) + reta.squaredNorm();
  const double scale = rz.squaredNorm() + reta.squaredNorm();
  if (rad < -1e-12 * std::max(1.0, scale))
    throw std::runtime_error("spock: negative M-norm radicand (alpha too large)");
  return std::sqrt(std::max(0.0, rad));
}

SolveResult SpockSolver::solve() { return run(x_init_orig_, std::nullopt, true); }

SolveResult SpockSolver::solve(const Eigen::VectorXd& x_init, const std::optional<WarmStart>& warm) {
  return run(x_init, warm, true);
}

SolveResult SpockSolver::solve_cp() { return run(x_init_orig_, std::nullopt, false); }

SolveResult SpockSolver::solve_cp(const Eigen::VectorXd& x_init,
                                  const std::optional<WarmStart>& warm) {
  return run(x_init, warm, false);
}

SolveResult SpockSolver::run(const Eigen::VectorXd& x_init, const std::optional<WarmStart>& warm,
                             bool supermann) {
  if (x_init.size() != scaled_.nx) throw std::invalid_argument("solve: x_init has wrong length");
  scaled_.x_init = pc_.is_identity ? x_init : pc_.scale_x(x_init);

  const auto& zl = op_->zlay();
  const auto& el = op_->elay();
  const int nz = zl.n, ne = el.n;

  Eigen::VectorXd vz = Eigen::VectorXd::Zero(nz), ve = Eigen::VectorXd::Zero(ne);
  if (warm) {
    if (warm->z_scaled.size() != nz || warm->eta.size() != ne)
      throw std::invalid_argument("solve: warm start has wrong dimensions");
    vz = warm->z_scaled;
    ve = warm->eta;
  }

  Eigen::VectorXd Tz(nz), Te(ne), rz(nz), re(ne), Lrz(ne), Lsre(nz);
  Eigen::VectorXd xi1(nz), xi2(ne);
  Eigen::VectorXd cz(nz), ce(ne), cTz(nz), cTe(ne), crz(nz), cre(ne), cLrz(ne);
  Eigen::VectorXd pz(nz), pe(ne);

  SpockStatus st;
  st.alpha = alpha_;
  st.op_norm = norm_;
  AndersonAccelerator aa(params_.aa_memory);

  auto refresh = [&]() {
    apply_T(vz, ve, Tz, Te);
    rz = vz - Tz;
    re = ve - Te;
  };

  auto finish = [&](SpockTermination why) {
    st.reason = why;
    SolveResult out;
    out.z_scaled = Tz;
    out.eta = Te;
    out.z = unscale_primal(Tz);
    out.status = std::move(st);
    return out;
  };

  refresh();
  double omega = m_norm_cached_Lrz(rz, re, Lrz);
  double zeta = omega;
  double omega_safe = omega;
  double th1 = 0.0, th2 = 0.0;

  for (int k = 0;; ++k) {
    // termination residuals of the candidate update T(v)
    op_->apply_adjoint(re, Lsre);
    xi1 = rz / alpha_ - Lsre;
    xi2 = re / alpha_ - Lrz;
    const double n1 = xi1.cwiseProduct(d1_).lpNorm<Eigen::Infinity>();
    const double n2 = xi2.cwiseProduct(d2_).lpNorm<Eigen::Infinity>();
    if (k == 0) {
      th1 = std::max(params_.eps_abs, params_.eps_rel * n1);
      th2 = std::max(params_.eps_abs, params_.eps_rel * n2);
    }
    st.iterations = k;
    st.xi1_inf = n1;
    st.xi2_inf = n2;
    if (!std::isfinite(n1) || !std::isfinite(n2) || !std::isfinite(omega))
      return finish(SpockTermination::Stalled);
    if (n1 <= th1 && n2 <= th2) return finish(SpockTermination::Converged);
    if (k >= params_.max_iters) return finish(SpockTermination::MaxIters);
    if (params_.cancelled && params_.cancelled()) return finish(SpockTermination::Cancelled);

    st.rnorm_history.push_back(omega);

    if (!supermann) {
      vz.swap(Tz);
      ve.swap(Te);
      if (params_.progress) params_.progress(k, omega, 'K');
      refresh();
      omega = m_norm_cached_Lrz(rz, re, Lrz);
      continue;
    }

    // Anderson direction from the stacked residual
    Eigen::VectorXd rfull(nz + ne);
    rfull << rz, re;
    const Eigen::VectorXd psi = aa.direction(rfull);
    const auto psiz = psi.head(nz);
    const auto psie = psi.tail(ne);

    char branch;
    bool carried = false;
    double omega_next = 0.0;
    if (omega <= params_.c0 * zeta) {
      vz += psiz;  // K0: blind fast update
      ve += psie;
      zeta = omega;
      branch = '0';
      ++st.k0_steps;
    } else {
      // M psi, reused across backtracks of the line search
      op_->apply_adjoint(psie, tz2_);
      pz = psiz - alpha_ * tz2_;
      op_->apply(psiz, te2_);
      pe = psie - alpha_ * te2_;

      double tau = 1.0;
      int backtracks = 0;
      for (;;) {
        cz = vz + tau * psiz;
        ce = ve + tau * psie;
        apply_T(cz, ce, cTz, cTe);
        crz = cz - cTz;
        cre = ce - cTe;
        const double omt = m_norm_cached_Lrz(crz, cre, cLrz);
        if ((omega <= omega_safe && omt <= params_.c1 * omega) || omt == 0.0) {
          // K1: educated update accepted
          vz.swap(cz);
          ve.swap(ce);
          Tz.swap(cTz);
          Te.swap(cTe);
          rz.swap(crz);
          re.swap(cre);
          Lrz.swap(cLrz);
          omega_safe = omt + std::pow(params_.c2, k);
          branch = '1';
          ++st.k1_steps;
          carried = true;
          omega_next = omt;
          break;
        }
        // rho = ||r~||_M^2 - <r~, M(v~ - v)>: distance test for the halfspace
        // separating v from fix T. The candidate difference is tau * psi, so
        // the inner product reuses M psi computed once per direction.
        const double rho = omt * omt - tau * (crz.dot(pz) + cre.dot(pe));
        if (rho >= params_.sigma * omt * omega) {
          // K2: safeguarded projective update
          const double coef = params_.lambda * rho / (omt * omt);
          vz -= coef * crz;
          ve -= coef * cre;
          branch = '2';
          ++st.k2_steps;
          break;
        }
        tau *= params_.beta;
        if (++backtracks > params_.max_backtracks) {
          // fall back to the plain KM step
          vz = Tz;
          ve = Te;
          branch = 'S';
          ++st.stalled_steps;
          break;
        }
      }
    }

    if (params_.progress) params_.progress(k, omega, branch);
    if (carried) {
      omega = omega_next;
    } else {
      refresh();
      omega = m_norm_cached_Lrz(rz, re, Lrz);
    }
  }
}

}  // namespace spock
